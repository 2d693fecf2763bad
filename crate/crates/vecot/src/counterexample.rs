//! Constructive witness for a demand with a unique achieving sub-partition
//! that no price matrix can serve.
//!
//! The construction places, for each agent, interior atoms strictly inside
//! that agent's zero-cost price cell (pinning the bulk demand), plus `q+1`
//! boundary atoms whose density rows lie exactly on the tie hyperplane of a
//! designated agent pair. Boundary weights are powers of two times a scale,
//! so subset sums are distinct and the achieving assignment is unique. The
//! cost field vanishes on interior atoms and realizes an adversarial vector
//! `w` of cost differences on the boundary atoms; the designated split of
//! the boundary atoms is chosen non-threshold in `w`, and on the boundary
//! every price matrix acts through the single scalar
//! `s = (p_i - p_k) . zeta_boundary`, so the split is unservable.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::dual_solver::{solve_dual, DualReport, SolveStatus, SolverConfig, SolverError};
use crate::mat::{lstsq_residual, Mat};
use crate::measure::{CostField, LayeredMeasure, MeasureError};
use crate::partition::{
    achievable_exact, demand_of, Assignment, DemandMatrix, PartitionError, DEFAULT_EXACT_TOL,
};
use crate::pricing::{is_equilibrium, PriceMatrix, PricingError};

#[derive(Debug, Error)]
pub enum WitnessError {
    #[error("unsupported witness shape: {0}")]
    UnsupportedShape(String),
    #[error("boundary span degenerate: adversarial vector lies in the tie span")]
    DegenerateSpan,
    #[error("interior sampling failed for agent {agent}")]
    InteriorSampling { agent: usize },
    #[error(transparent)]
    Measure(#[from] MeasureError),
    #[error(transparent)]
    Partition(#[from] PartitionError),
    #[error(transparent)]
    Pricing(#[from] PricingError),
    #[error(transparent)]
    Solver(#[from] SolverError),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum BoundaryWeights {
    /// `scale * (1, 2, 4, ...)`: distinct subset sums, forcing uniqueness.
    PowersOfTwo,
    /// All atoms share the scale; atom swaps preserve demand, so the
    /// achieving assignment is no longer unique. Kept as a mutation for
    /// tests of why distinct subset sums matter.
    Equal,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum SplitChoice {
    /// Alternating split: even boundary atoms to agent `i`, odd to `k`.
    /// With increasing `w` this is non-threshold, hence unservable.
    NonThreshold,
    /// First atom to `i`, rest to `k`: servable by any threshold in
    /// `[w_0, w_1]`; an equilibrium exists.
    ThresholdConsistent,
}

#[derive(Clone, Debug)]
pub struct WitnessParams {
    pub layers: usize,
    pub agents: usize,
    pub interior_points_per_agent: usize,
    /// Weight scale of the boundary atoms; `0` removes them entirely.
    pub boundary_weight_scale: f64,
    pub seed: u64,
    /// 1-based agent indices of the designated tied pair.
    pub designated_pair: (usize, usize),
    pub boundary_weights: BoundaryWeights,
    pub split: SplitChoice,
    /// Replace the adversarial cost field by zero (mutation used to show
    /// the base prices become an equilibrium again).
    pub zero_cost: bool,
}

impl Default for WitnessParams {
    fn default() -> Self {
        WitnessParams {
            layers: 2,
            agents: 2,
            interior_points_per_agent: 3,
            boundary_weight_scale: 0.05,
            seed: 7,
            designated_pair: (1, 2),
            boundary_weights: BoundaryWeights::PowersOfTwo,
            split: SplitChoice::NonThreshold,
            zero_cost: false,
        }
    }
}

#[derive(Clone, Debug)]
pub struct WitnessInstance {
    pub measure: LayeredMeasure,
    pub cost: CostField,
    /// The prices whose zero-cost partition generated the target.
    pub base_prices: PriceMatrix,
    pub boundary_indices: Vec<usize>,
    /// Cost differences `c_i - c_k` on the boundary atoms.
    pub adversarial: Vec<f64>,
    pub designated_pair: (usize, usize),
    pub designated: Assignment,
    pub target: DemandMatrix,
    /// Whether the boundary weights have pairwise distinct subset sums.
    pub distinct_subset_sums: bool,
    pub params: WitnessParams,
}

impl WitnessInstance {
    pub fn smallest_boundary_atom_mass(&self) -> f64 {
        self.boundary_indices
            .iter()
            .map(|&t| self.measure.weight(t))
            .fold(f64::INFINITY, f64::min)
    }
}

/// Builds the witness. Supported shapes: any `n >= 2` when `q = 2`, and
/// `2 <= n <= q` for `q >= 3`.
pub fn build_witness(params: &WitnessParams) -> Result<WitnessInstance, WitnessError> {
    let q = params.layers;
    let n = params.agents;
    if q < 2 || n < 2 {
        return Err(WitnessError::UnsupportedShape(format!(
            "need q >= 2 and n >= 2, got q = {q}, n = {n}"
        )));
    }
    if q >= 3 && n > q {
        return Err(WitnessError::UnsupportedShape(format!(
            "vertex layout needs n <= q for q >= 3, got n = {n}, q = {q}"
        )));
    }
    let (i_agent, k_agent) = params.designated_pair;
    if i_agent == 0 || k_agent == 0 || i_agent > n || k_agent > n || i_agent == k_agent {
        return Err(WitnessError::UnsupportedShape(format!(
            "designated pair ({i_agent}, {k_agent}) is not a pair of distinct agents <= {n}"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    // build in canonical labels (pair = agents 1 and 2), relabel at the end
    let price_rows = canonical_prices(q, n);
    let boundary_rows = boundary_density_rows(q, n);
    let mut points: Vec<Vec<f64>> = Vec::new();
    let mut weights: Vec<f64> = Vec::new();
    let mut densities: Vec<Vec<f64>> = Vec::new();
    let mut interior_label: Vec<usize> = Vec::new();
    for agent in 0..n {
        for idx in 0..params.interior_points_per_agent {
            let row = sample_interior_row(&mut rng, &price_rows, agent, q, n)
                .ok_or(WitnessError::InteriorSampling { agent: agent + 1 })?;
            let angle = std::f64::consts::TAU * agent as f64 / n as f64;
            let radius = 1.0 + 0.17 * idx as f64;
            points.push(vec![radius * angle.cos(), radius * angle.sin()]);
            weights.push(rng.random_range(0.5..1.5));
            densities.push(row);
            interior_label.push(agent + 1);
        }
    }
    let mut boundary_indices = Vec::new();
    if params.boundary_weight_scale > 0.0 {
        for (l, row) in boundary_rows.iter().enumerate() {
            boundary_indices.push(points.len());
            points.push(vec![0.0, -0.31 * (l as f64 + 1.0)]);
            let factor = match params.boundary_weights {
                BoundaryWeights::PowersOfTwo => (1u64 << l) as f64,
                BoundaryWeights::Equal => 1.0,
            };
            weights.push(params.boundary_weight_scale * factor);
            densities.push(row.clone());
        }
    }
    let measure = LayeredMeasure::build(points, weights, densities)?;
    let t = measure.num_points();
    // adversarial vector w: cost difference c_i - c_k on the boundary atoms
    let adversarial: Vec<f64> = (0..boundary_indices.len()).map(|l| l as f64).collect();
    if !boundary_indices.is_empty() {
        let mut span = Mat::zeros(boundary_indices.len(), q);
        for (l, &idx) in boundary_indices.iter().enumerate() {
            for j in 0..q {
                span.set(l, j, measure.density_row(idx)[j]);
            }
        }
        let resid = lstsq_residual(&span, &adversarial);
        let rnorm: f64 = resid.iter().map(|v| v * v).sum::<f64>().sqrt();
        let wnorm: f64 = adversarial.iter().map(|v| v * v).sum::<f64>().sqrt();
        if wnorm > 0.0 && rnorm <= 1e-6 * wnorm {
            return Err(WitnessError::DegenerateSpan);
        }
    }
    let mut cost_rows = vec![vec![0.0; t]; n];
    if !params.zero_cost {
        for (l, &idx) in boundary_indices.iter().enumerate() {
            cost_rows[0][idx] = adversarial[l]; // canonical agent 1 = pair i
        }
    }
    let cost = CostField::new(cost_rows)?;
    // designated labels: interiors to their agent, atoms per the split
    let mut labels = vec![0usize; t];
    for (p, &label) in interior_label.iter().enumerate() {
        labels[p] = label;
    }
    for (l, &idx) in boundary_indices.iter().enumerate() {
        labels[idx] = match params.split {
            SplitChoice::NonThreshold => {
                if l % 2 == 0 {
                    1
                } else {
                    2
                }
            }
            SplitChoice::ThresholdConsistent => {
                if l == 0 {
                    1
                } else {
                    2
                }
            }
        };
    }
    let distinct_subset_sums = boundary_indices.is_empty()
        || subset_sums_distinct(
            &boundary_indices
                .iter()
                .map(|&idx| measure.weight(idx))
                .collect::<Vec<_>>(),
        );
    // relabel so that the canonical pair (1, 2) lands on the requested pair
    let perm = pair_permutation(n, i_agent, k_agent);
    let labels: Vec<usize> = labels
        .iter()
        .map(|&l| if l == 0 { 0 } else { perm[l - 1] })
        .collect();
    let mut price_perm = vec![vec![0.0; q]; n];
    let mut cost_perm = vec![vec![0.0; t]; n];
    for (canon, rows) in price_rows.iter().enumerate() {
        price_perm[perm[canon] - 1] = rows.clone();
        cost_perm[perm[canon] - 1] = cost.rows()[canon].clone();
    }
    let base_prices = PriceMatrix::from_rows(&price_perm)?;
    let cost = CostField::new(cost_perm)?;
    let designated = Assignment::new(labels, n)?;
    let target = demand_of(&measure, &designated)?;
    Ok(WitnessInstance {
        measure,
        cost,
        base_prices,
        boundary_indices,
        adversarial,
        designated_pair: (i_agent, k_agent),
        designated,
        target,
        distinct_subset_sums,
        params: params.clone(),
    })
}

/// Canonical price rows: the designated pair is agents 1 and 2.
///
/// For `q = 2` with two agents these are the unit rows `(1,0)`, `(0,1)`;
/// more agents get lines tangent to `x^2` at dyadic touch points, so each
/// agent wins an interval of the simplex and adjacent envelopes tie at
/// exactly representable points. For `q >= 3`, agent `m` takes the unit
/// row `e_m`.
fn canonical_prices(q: usize, n: usize) -> Vec<Vec<f64>> {
    if q == 2 {
        if n == 2 {
            return vec![vec![1.0, 0.0], vec![0.0, 1.0]];
        }
        let mut denom = 1usize;
        while denom < n + 1 {
            denom <<= 1;
        }
        (1..=n)
            .map(|m| {
                let tau = m as f64 / denom as f64;
                vec![2.0 * tau - tau * tau, -tau * tau]
            })
            .collect()
    } else {
        (0..n)
            .map(|m| {
                let mut row = vec![0.0; q];
                row[m] = 1.0;
                row
            })
            .collect()
    }
}

/// Density rows of the `q+1` boundary atoms: exactly on the tie hyperplane
/// of the canonical pair, strictly dominating every other agent there.
fn boundary_density_rows(q: usize, n: usize) -> Vec<Vec<f64>> {
    if q == 2 {
        let x_star = if n == 2 {
            0.5
        } else {
            let mut denom = 1usize;
            while denom < n + 1 {
                denom <<= 1;
            }
            // tie of the tangent lines at tau_1 and tau_2
            (1.0 / denom as f64 + 2.0 / denom as f64) / 2.0
        };
        vec![vec![x_star, 1.0 - x_star]; q + 1]
    } else {
        (0..=q)
            .map(|l| {
                // zeta_1 = zeta_2 = a_l, dyadic, above every other
                // coordinate; non-affine in l so the tie span cannot absorb
                // the affine adversarial vector
                let a = 0.375 + (1u64 << l) as f64 / (1u64 << (q + 4)) as f64;
                let rest = (1.0 - 2.0 * a) / (q - 2) as f64;
                let mut row = vec![rest; q];
                row[0] = a;
                row[1] = a;
                row
            })
            .collect()
    }
}

fn income_of(row: &[f64], prices: &[Vec<f64>], agent: usize) -> f64 {
    prices[agent].iter().zip(row).map(|(p, z)| p * z).sum()
}

fn sample_interior_row(
    rng: &mut ChaCha8Rng,
    prices: &[Vec<f64>],
    agent: usize,
    q: usize,
    n: usize,
) -> Option<Vec<f64>> {
    for _ in 0..4000 {
        let row: Vec<f64> = if q == 2 {
            if n == 2 {
                let hi = if agent == 0 {
                    rng.random_range(0.56..0.95)
                } else {
                    rng.random_range(0.05..0.44)
                };
                vec![hi, 1.0 - hi]
            } else {
                // near the agent's touch interval
                let mut denom = 1usize;
                while denom < n + 1 {
                    denom <<= 1;
                }
                let tau = (agent + 1) as f64 / denom as f64;
                let gap = 1.0 / denom as f64;
                let x = tau + rng.random_range(-0.35 * gap..0.35 * gap);
                vec![x, 1.0 - x]
            }
        } else {
            let mut row: Vec<f64> = (0..q).map(|_| rng.random_range(0.01..0.2)).collect();
            row[agent] = rng.random_range(0.55..0.9);
            let s: f64 = row.iter().sum();
            row.iter_mut().for_each(|v| *v /= s);
            row
        };
        let own = income_of(&row, prices, agent);
        if own <= 1e-6 {
            continue;
        }
        let best_other = (0..n)
            .filter(|m| *m != agent)
            .map(|m| income_of(&row, prices, m))
            .fold(f64::NEG_INFINITY, f64::max);
        if own - best_other > 1e-6 {
            return Some(row);
        }
    }
    None
}

fn subset_sums_distinct(weights: &[f64]) -> bool {
    let k = weights.len();
    let mut sums = Vec::with_capacity(1 << k);
    for mask in 0u32..(1u32 << k) {
        let mut s = 0.0;
        for (b, w) in weights.iter().enumerate() {
            if mask & (1 << b) != 0 {
                s += w;
            }
        }
        sums.push(s);
    }
    sums.sort_by(|a, b| a.partial_cmp(b).expect("finite sums"));
    sums.windows(2).all(|w| (w[1] - w[0]).abs() > 1e-12)
}

/// Permutation sending canonical agents (1, 2, rest in order) to
/// (i, k, remaining indices ascending); entry `perm[canonical-1] = actual`.
fn pair_permutation(n: usize, i_agent: usize, k_agent: usize) -> Vec<usize> {
    let mut perm = vec![0usize; n];
    perm[0] = i_agent;
    perm[1] = k_agent;
    let mut rest: Vec<usize> = (1..=n).filter(|a| *a != i_agent && *a != k_agent).collect();
    rest.sort_unstable();
    for (slot, agent) in perm.iter_mut().skip(2).zip(rest) {
        *slot = agent;
    }
    perm
}

/// Brute-force uniqueness of the achieving sub-partition.
pub fn verify_uniqueness(wit: &WitnessInstance) -> Result<(bool, u64), PartitionError> {
    let res = achievable_exact(&wit.target, &wit.measure, DEFAULT_EXACT_TOL)?;
    Ok((res.witness_count == 1, res.witness_count))
}

#[derive(Clone, Copy, Debug, Serialize)]
pub struct GridSpec {
    pub lo: f64,
    pub hi: f64,
    pub points_per_axis: usize,
}

impl Default for GridSpec {
    fn default() -> Self {
        GridSpec {
            lo: -10.0,
            hi: 10.0,
            points_per_axis: 41,
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct NoEquilibriumEvidence {
    /// Largest `w` over boundary atoms designated to agent `i`: any serving
    /// price scalar must reach it.
    pub threshold_lower: f64,
    /// Smallest `w` over atoms designated to `k`: the scalar may not exceed it.
    pub threshold_upper: f64,
    /// Empty threshold interval: the designated split is unservable.
    pub threshold_infeasible: bool,
    pub grid_points_checked: u64,
    pub grid_equilibria_found: u64,
    pub solver_status: String,
    pub solver_best_integral_residual: f64,
    pub solver_price_norm: f64,
    pub smallest_boundary_atom_mass: f64,
    /// `solver_best_integral_residual >= smallest_boundary_atom_mass / 2`.
    pub residual_floor_holds: bool,
    /// The proof-grade verdict is the threshold argument; grid and solver
    /// runs corroborate.
    pub no_equilibrium: bool,
}

/// Threshold interval of the designated split: `[max w over i-atoms,
/// min w over k-atoms]`, computed from the actual cost field.
pub fn threshold_interval(wit: &WitnessInstance) -> (f64, f64) {
    let (i_agent, k_agent) = wit.designated_pair;
    let mut lower = f64::NEG_INFINITY;
    let mut upper = f64::INFINITY;
    for &idx in &wit.boundary_indices {
        let w = wit.cost.cost(i_agent - 1, idx) - wit.cost.cost(k_agent - 1, idx);
        match wit.designated.label(idx) {
            l if l == i_agent => lower = lower.max(w),
            l if l == k_agent => upper = upper.min(w),
            _ => {}
        }
    }
    (lower, upper)
}

/// Gathers the three pieces of non-existence evidence: the threshold
/// argument (decisive), an exhaustive price-grid search, and an ascent
/// solver run whose integral residual floors at the boundary-atom scale.
pub fn verify_no_equilibrium(
    wit: &WitnessInstance,
    grid: &GridSpec,
    solver_cfg: &SolverConfig,
) -> Result<NoEquilibriumEvidence, WitnessError> {
    let (lower, upper) = threshold_interval(wit);
    let threshold_infeasible = lower > upper;
    let n = wit.target.agents();
    let q = wit.target.layers();
    let axes = n * q;
    let ppa = grid.points_per_axis;
    let total = (ppa as u64).pow(axes as u32);
    let step = if ppa > 1 {
        (grid.hi - grid.lo) / (ppa - 1) as f64
    } else {
        0.0
    };
    let equilibria: u64 = (0..total)
        .into_par_iter()
        .map(|flat| {
            let mut rows = vec![vec![0.0; q]; n];
            let mut rem = flat;
            for slot in 0..axes {
                let idx = (rem % ppa as u64) as usize;
                rem /= ppa as u64;
                rows[slot / q][slot % q] = grid.lo + step * idx as f64;
            }
            let p = PriceMatrix::from_rows(&rows).expect("grid prices finite");
            match is_equilibrium(&wit.measure, &wit.cost, &p, &wit.target, 1e-9, true) {
                Ok(true) => 1u64,
                _ => 0u64,
            }
        })
        .sum();
    let report = solve_dual(&wit.measure, &wit.cost, &wit.target, solver_cfg)?;
    let atom_mass = wit.smallest_boundary_atom_mass();
    let residual_floor_holds = report.best_integral_residual >= atom_mass / 2.0;
    Ok(NoEquilibriumEvidence {
        threshold_lower: lower,
        threshold_upper: upper,
        threshold_infeasible,
        grid_points_checked: total,
        grid_equilibria_found: equilibria,
        solver_status: format!("{:?}", report.status),
        solver_best_integral_residual: report.best_integral_residual,
        solver_price_norm: report.price_norm,
        smallest_boundary_atom_mass: atom_mass,
        residual_floor_holds,
        no_equilibrium: threshold_infeasible,
    })
}

#[derive(Clone, Debug, Serialize)]
pub struct RefinementRow {
    pub boundary_scale: f64,
    pub status: String,
    pub iterations: usize,
    pub best_integral_residual: f64,
    /// Price norm at the first iterate achieving the best residual.
    pub price_norm_at_best_residual: f64,
    /// Price norm at the first iterate with residual at or below the fixed
    /// threshold; `None` when the run never gets there.
    pub price_norm_at_fixed_residual: Option<f64>,
}

/// Runs the solver across boundary scales (0 removes the atoms entirely)
/// and records how hard each level pushes prices for a given residual.
pub fn refinement_study(
    base: &WitnessParams,
    scales: &[f64],
    fixed_residual: f64,
    cfg: &SolverConfig,
) -> Result<Vec<RefinementRow>, WitnessError> {
    let mut rows = Vec::with_capacity(scales.len());
    for &scale in scales {
        let params = WitnessParams {
            boundary_weight_scale: scale,
            ..base.clone()
        };
        let wit = build_witness(&params)?;
        let report = solve_dual(&wit.measure, &wit.cost, &wit.target, cfg)?;
        rows.push(summarize_run(scale, &report, fixed_residual));
    }
    Ok(rows)
}

fn summarize_run(scale: f64, report: &DualReport, fixed_residual: f64) -> RefinementRow {
    let mut best = f64::INFINITY;
    let mut price_at_best = report.price_norm;
    let mut price_at_fixed = None;
    for rec in &report.history {
        if rec.residual_inf < best {
            best = rec.residual_inf;
            price_at_best = rec.price_norm;
        }
        if price_at_fixed.is_none() && rec.residual_inf <= fixed_residual {
            price_at_fixed = Some(rec.price_norm);
        }
    }
    // the terminal state counts too (converged runs often end below every
    // recorded residual)
    if report.integral_residual_norm < best {
        best = report.integral_residual_norm;
        price_at_best = report.price_norm;
    }
    if price_at_fixed.is_none()
        && (report.residual_norm <= fixed_residual
            || report.integral_residual_norm <= fixed_residual)
    {
        price_at_fixed = Some(report.price_norm);
    }
    RefinementRow {
        boundary_scale: scale,
        status: match report.status {
            SolveStatus::Converged => "Converged".into(),
            SolveStatus::Diverged => "Diverged".into(),
            SolveStatus::IterationCap => "IterationCap".into(),
        },
        iterations: report.iterations,
        best_integral_residual: best,
        price_norm_at_best_residual: price_at_best,
        price_norm_at_fixed_residual: price_at_fixed,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mat::dot;
    use crate::pricing::TieRule;

    #[test]
    fn default_witness_shape() {
        let wit = build_witness(&WitnessParams::default()).unwrap();
        assert_eq!(wit.measure.num_points(), 9);
        assert_eq!(wit.boundary_indices.len(), 3);
        assert_eq!(wit.adversarial, vec![0.0, 1.0, 2.0]);
        assert!(wit.distinct_subset_sums);
        // boundary rows tie the pair exactly
        let p = &wit.base_prices;
        for &idx in &wit.boundary_indices {
            let row = wit.measure.density_row(idx);
            let gi = dot(p.row(0), row);
            let gk = dot(p.row(1), row);
            assert_eq!(gi, gk);
            assert_eq!(gi, 0.5);
        }
        // designated split alternates i, k, i
        let labels: Vec<usize> = wit
            .boundary_indices
            .iter()
            .map(|&t| wit.designated.label(t))
            .collect();
        assert_eq!(labels, vec![1, 2, 1]);
        // base price rows pairwise distinct
        assert_ne!(p.row(0), p.row(1));
    }

    #[test]
    fn boundary_weights_have_distinct_subset_sums() {
        let wit = build_witness(&WitnessParams::default()).unwrap();
        let w: Vec<f64> = wit
            .boundary_indices
            .iter()
            .map(|&t| wit.measure.weight(t))
            .collect();
        assert_eq!(w, vec![0.05, 0.10, 0.20]);
        assert!(subset_sums_distinct(&w));
        assert!(!subset_sums_distinct(&[0.05, 0.05, 0.05]));
    }

    #[test]
    fn adversarial_vector_escapes_tie_span() {
        // identical boundary rows make the span one-dimensional; w = (0,1,2)
        // projects with a visible residual
        let wit = build_witness(&WitnessParams::default()).unwrap();
        let mut span = Mat::zeros(3, 2);
        for (l, &idx) in wit.boundary_indices.iter().enumerate() {
            for j in 0..2 {
                span.set(l, j, wit.measure.density_row(idx)[j]);
            }
        }
        let resid = lstsq_residual(&span, &wit.adversarial);
        let rnorm: f64 = resid.iter().map(|v| v * v).sum::<f64>().sqrt();
        let wnorm: f64 = wit.adversarial.iter().map(|v| v * v).sum::<f64>().sqrt();
        assert!(rnorm > 1e-6 * wnorm);
    }

    #[test]
    fn default_witness_is_unique() {
        let wit = build_witness(&WitnessParams::default()).unwrap();
        let (unique, count) = verify_uniqueness(&wit).unwrap();
        assert!(unique, "witness count {count}");
    }

    #[test]
    fn equal_boundary_weights_break_uniqueness() {
        let params = WitnessParams {
            boundary_weights: BoundaryWeights::Equal,
            ..WitnessParams::default()
        };
        let wit = build_witness(&params).unwrap();
        let (unique, count) = verify_uniqueness(&wit).unwrap();
        assert!(!unique);
        assert!(count > 1, "count {count}");
    }

    #[test]
    fn threshold_interval_is_empty_by_construction() {
        let wit = build_witness(&WitnessParams::default()).unwrap();
        let (lower, upper) = threshold_interval(&wit);
        assert_eq!(lower, 2.0);
        assert_eq!(upper, 1.0);
        assert!(lower > upper);
    }

    #[test]
    fn threshold_consistent_split_admits_equilibrium() {
        let params = WitnessParams {
            split: SplitChoice::ThresholdConsistent,
            ..WitnessParams::default()
        };
        let wit = build_witness(&params).unwrap();
        let (lower, upper) = threshold_interval(&wit);
        assert!(lower <= upper);
        let cfg = SolverConfig {
            step_rule: crate::dual_solver::StepRule::Diminishing { a: 2.0 },
            max_iterations: 20_000,
            ..SolverConfig::default()
        };
        let report = solve_dual(&wit.measure, &wit.cost, &wit.target, &cfg).unwrap();
        assert_eq!(report.status, SolveStatus::Converged);
    }

    #[test]
    fn zero_cost_mutation_restores_equilibrium_at_base_prices() {
        let params = WitnessParams {
            zero_cost: true,
            ..WitnessParams::default()
        };
        let wit = build_witness(&params).unwrap();
        assert!(is_equilibrium(
            &wit.measure,
            &wit.cost,
            &wit.base_prices,
            &wit.target,
            1e-9,
            true
        )
        .unwrap());
        // without the tie search the lowest-index rule grabs all atoms for
        // agent 1 and misses the target
        assert!(!is_equilibrium(
            &wit.measure,
            &wit.cost,
            &wit.base_prices,
            &wit.target,
            1e-9,
            false
        )
        .unwrap());
    }

    #[test]
    fn small_grid_finds_no_equilibrium() {
        let wit = build_witness(&WitnessParams::default()).unwrap();
        let grid = GridSpec {
            lo: -6.0,
            hi: 6.0,
            points_per_axis: 9,
        };
        let cfg = SolverConfig {
            max_iterations: 3000,
            ..SolverConfig::default()
        };
        let ev = verify_no_equilibrium(&wit, &grid, &cfg).unwrap();
        assert!(ev.threshold_infeasible);
        assert_eq!(ev.grid_equilibria_found, 0);
        assert!(ev.no_equilibrium);
        assert!(ev.residual_floor_holds);
    }

    #[test]
    fn designated_pair_relabeling() {
        let params = WitnessParams {
            layers: 3,
            agents: 3,
            designated_pair: (2, 3),
            ..WitnessParams::default()
        };
        let wit = build_witness(&params).unwrap();
        // atoms tie agents 2 and 3 exactly, and agent 1 stays below
        for &idx in &wit.boundary_indices {
            let row = wit.measure.density_row(idx);
            let g2 = dot(wit.base_prices.row(1), row);
            let g3 = dot(wit.base_prices.row(2), row);
            let g1 = dot(wit.base_prices.row(0), row);
            assert_eq!(g2, g3);
            assert!(g1 < g2);
        }
        let (lower, upper) = threshold_interval(&wit);
        assert!(lower > upper);
    }

    #[test]
    fn boundary_free_scale_converges() {
        let params = WitnessParams {
            boundary_weight_scale: 0.0,
            ..WitnessParams::default()
        };
        let wit = build_witness(&params).unwrap();
        assert!(wit.boundary_indices.is_empty());
        let cfg = SolverConfig {
            step_rule: crate::dual_solver::StepRule::Diminishing { a: 2.0 },
            ..SolverConfig::default()
        };
        let report = solve_dual(&wit.measure, &wit.cost, &wit.target, &cfg).unwrap();
        assert_eq!(report.status, SolveStatus::Converged);
    }

    #[test]
    fn witness_interiors_are_strict() {
        let wit = build_witness(&WitnessParams::default()).unwrap();
        let a = crate::pricing::zero_cost_assign(
            &wit.measure,
            &wit.base_prices,
            &TieRule::LowestIndex,
        )
        .unwrap();
        for t in 0..wit.measure.num_points() {
            if !wit.boundary_indices.contains(&t) {
                assert_eq!(a.label(t), wit.designated.label(t));
            }
        }
    }
}
