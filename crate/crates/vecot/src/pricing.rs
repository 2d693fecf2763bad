//! Price-induced partitions and the concave dual of demand matching.
//!
//! For prices `P` (one row per agent; the null agent's row is identically
//! zero and implicit) the net income of selling point `x_t` to agent `i` is
//! `p_i . zeta(x_t) - c_i(x_t)`. A point goes to an income-maximizing agent
//! when that income is positive and stays unsold otherwise. Ties between
//! agents at a point of positive weight are a real discrete event, so every
//! operation that resolves them takes an explicit [`TieRule`], and the
//! equilibrium test may search over tie completions.

use std::collections::BTreeMap;

use thiserror::Error;

use crate::mat::{frobenius_dot, Mat};
use crate::measure::{CostField, LayeredMeasure};
use crate::partition::{demand_of, Assignment, DemandMatrix, PartitionError};

/// Guard on the number of tie completions `is_equilibrium` may enumerate.
pub const TIE_COMPLETION_GUARD: f64 = (1u64 << 20) as f64;

#[derive(Debug, Error)]
pub enum PricingError {
    #[error("size mismatch: {0}")]
    SizeMismatch(String),
    #[error("point index {index} out of range (measure has {points})")]
    IndexOutOfRange { index: usize, points: usize },
    #[error("too many tie completions: {completions:.3e}")]
    TooManyTies { completions: f64 },
    #[error(transparent)]
    Partition(#[from] PartitionError),
}

/// `n x q` matrix of per-agent, per-layer prices. The null agent's zero row
/// is never stored.
#[derive(Clone, Debug, PartialEq)]
pub struct PriceMatrix {
    entries: Mat,
}

impl PriceMatrix {
    pub fn new(entries: Mat) -> Result<Self, PricingError> {
        if !entries.is_finite() {
            return Err(PricingError::SizeMismatch(
                "price entries must be finite".into(),
            ));
        }
        Ok(PriceMatrix { entries })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self, PricingError> {
        Self::new(Mat::from_rows(rows))
    }

    pub fn zeros(agents: usize, layers: usize) -> Self {
        PriceMatrix {
            entries: Mat::zeros(agents, layers),
        }
    }

    pub fn agents(&self) -> usize {
        self.entries.rows()
    }

    pub fn layers(&self) -> usize {
        self.entries.cols()
    }

    pub fn row(&self, agent: usize) -> &[f64] {
        self.entries.row(agent)
    }

    pub fn get(&self, agent: usize, layer: usize) -> f64 {
        self.entries.get(agent, layer)
    }

    pub fn as_mat(&self) -> &Mat {
        &self.entries
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.entries.frobenius_norm()
    }

    /// `self + alpha * step`, for ascent iterations.
    pub fn stepped(&self, step: &Mat, alpha: f64) -> PriceMatrix {
        let mut entries = self.entries.clone();
        entries.add_scaled(step, alpha);
        PriceMatrix { entries }
    }
}

/// How ties between income-maximizing agents are resolved.
#[derive(Clone, Debug, Default)]
pub enum TieRule {
    /// Smallest tied agent index wins; ties at income exactly zero go to
    /// the null agent.
    #[default]
    LowestIndex,
    /// Per-point overrides (point index -> agent). An override is honored
    /// only when that agent is genuinely tied at the point; other points
    /// fall back to `LowestIndex`.
    Override(BTreeMap<usize, usize>),
}

fn check_shapes(
    m: &LayeredMeasure,
    c: &CostField,
    p: &PriceMatrix,
) -> Result<(), PricingError> {
    if c.num_points() != m.num_points() {
        return Err(PricingError::SizeMismatch(format!(
            "cost field covers {} points, measure has {}",
            c.num_points(),
            m.num_points()
        )));
    }
    if c.num_agents() != p.agents() {
        return Err(PricingError::SizeMismatch(format!(
            "cost field has {} agents, prices have {}",
            c.num_agents(),
            p.agents()
        )));
    }
    if p.layers() != m.num_layers() {
        return Err(PricingError::SizeMismatch(format!(
            "prices have {} layers, measure has {}",
            p.layers(),
            m.num_layers()
        )));
    }
    Ok(())
}

#[inline]
fn income(m: &LayeredMeasure, c: &CostField, p: &PriceMatrix, agent: usize, t: usize) -> f64 {
    let zeta = m.density_row(t);
    let mut v = -c.cost(agent, t);
    for (j, pj) in p.row(agent).iter().enumerate() {
        v += pj * zeta[j];
    }
    v
}

/// Best clamped net income at point `t`: `[max_i p_i . zeta - c_i]_+`.
pub fn phi_at(
    m: &LayeredMeasure,
    c: &CostField,
    p: &PriceMatrix,
    t: usize,
) -> Result<f64, PricingError> {
    check_shapes(m, c, p)?;
    if t >= m.num_points() {
        return Err(PricingError::IndexOutOfRange {
            index: t,
            points: m.num_points(),
        });
    }
    Ok(phi_raw(m, c, p, t))
}

#[inline]
fn phi_raw(m: &LayeredMeasure, c: &CostField, p: &PriceMatrix, t: usize) -> f64 {
    let mut best = 0.0f64;
    for agent in 0..p.agents() {
        best = best.max(income(m, c, p, agent, t));
    }
    best
}

/// Exactly tied labels at point `t`: agents whose income reaches the
/// clamped maximum, plus the null agent when that maximum is zero.
/// Labels are 1-based agents, 0 the null agent.
fn exact_candidates(m: &LayeredMeasure, c: &CostField, p: &PriceMatrix, t: usize) -> Vec<usize> {
    let phi = phi_raw(m, c, p, t);
    let mut cands = Vec::new();
    if phi == 0.0 {
        cands.push(0);
    }
    for agent in 0..p.agents() {
        if income(m, c, p, agent, t) == phi {
            cands.push(agent + 1);
        }
    }
    cands
}

/// One pass over all points for the ascent solver: exact lowest-index
/// labels, their `eps`-tie variants, the tied points with their candidate
/// sets, and the weighted phi total (so the dual objective costs nothing
/// extra). Candidate vectors are only allocated for genuinely tied points.
pub(crate) struct PointScan {
    pub labels_exact: Vec<usize>,
    pub labels_eps_lowest: Vec<usize>,
    pub tied: Vec<(usize, Vec<usize>)>,
    pub phi_weighted_total: f64,
}

pub(crate) fn scan_points(
    m: &LayeredMeasure,
    c: &CostField,
    p: &PriceMatrix,
    eps: f64,
) -> PointScan {
    let n = p.agents();
    let t_count = m.num_points();
    let mut labels_exact = Vec::with_capacity(t_count);
    let mut labels_eps_lowest = Vec::with_capacity(t_count);
    let mut tied = Vec::new();
    let mut phi_weighted_total = 0.0;
    let mut incomes = vec![0.0; n];
    for t in 0..t_count {
        for (agent, slot) in incomes.iter_mut().enumerate() {
            *slot = income(m, c, p, agent, t);
        }
        let mut phi = 0.0f64;
        for v in &incomes {
            phi = phi.max(*v);
        }
        phi_weighted_total += m.weight(t) * phi;
        let exact = if phi == 0.0 {
            0
        } else {
            incomes
                .iter()
                .position(|v| *v == phi)
                .expect("max income attained")
                + 1
        };
        labels_exact.push(exact);
        // eps candidates: null agent when phi is near zero, plus every
        // agent within eps of the top
        let mut count = 0usize;
        let mut lowest = usize::MAX;
        if phi <= eps {
            count += 1;
            lowest = 0;
        }
        for (agent, v) in incomes.iter().enumerate() {
            if *v >= phi - eps {
                count += 1;
                if lowest == usize::MAX {
                    lowest = agent + 1;
                }
            }
        }
        labels_eps_lowest.push(lowest);
        if count > 1 {
            let mut cands = Vec::with_capacity(count);
            if phi <= eps {
                cands.push(0);
            }
            for (agent, v) in incomes.iter().enumerate() {
                if *v >= phi - eps {
                    cands.push(agent + 1);
                }
            }
            tied.push((t, cands));
        }
    }
    PointScan {
        labels_exact,
        labels_eps_lowest,
        tied,
        phi_weighted_total,
    }
}

fn resolve(cands: &[usize], t: usize, tie_rule: &TieRule) -> usize {
    debug_assert!(!cands.is_empty());
    if let TieRule::Override(map) = tie_rule {
        if let Some(wanted) = map.get(&t) {
            if cands.contains(wanted) {
                return *wanted;
            }
        }
    }
    *cands.iter().min().expect("candidate set nonempty")
}

/// Assigns every point to an income-maximizing agent (label 0 when no
/// income is positive), resolving exact ties by `tie_rule`.
pub fn assign_by_price(
    m: &LayeredMeasure,
    c: &CostField,
    p: &PriceMatrix,
    tie_rule: &TieRule,
) -> Result<Assignment, PricingError> {
    check_shapes(m, c, p)?;
    let labels: Vec<usize> = (0..m.num_points())
        .map(|t| resolve(&exact_candidates(m, c, p, t), t, tie_rule))
        .collect();
    Ok(Assignment::new(labels, p.agents())?)
}

/// `assign_by_price` with all production costs zero.
pub fn zero_cost_assign(
    m: &LayeredMeasure,
    p: &PriceMatrix,
    tie_rule: &TieRule,
) -> Result<Assignment, PricingError> {
    let c = CostField::zero(p.agents(), m.num_points());
    assign_by_price(m, &c, p, tie_rule)
}

/// Demand of the price-induced assignment.
pub fn induced_demand(
    m: &LayeredMeasure,
    c: &CostField,
    p: &PriceMatrix,
    tie_rule: &TieRule,
) -> Result<DemandMatrix, PricingError> {
    let a = assign_by_price(m, c, p, tie_rule)?;
    Ok(demand_of(m, &a)?)
}

/// The concave dual functional: the entrywise pairing of prices with the
/// target demand minus the integral of the clamped best income.
pub fn dual_objective(
    m: &LayeredMeasure,
    c: &CostField,
    p: &PriceMatrix,
    target: &DemandMatrix,
) -> Result<f64, PricingError> {
    check_shapes(m, c, p)?;
    if target.agents() != p.agents() || target.layers() != p.layers() {
        return Err(PricingError::SizeMismatch(
            "target demand shape differs from prices".into(),
        ));
    }
    let pairing = frobenius_dot(p.as_mat(), target.as_mat());
    let mut phi_total = 0.0;
    for t in 0..m.num_points() {
        phi_total += m.weight(t) * phi_raw(m, c, p, t);
    }
    Ok(pairing - phi_total)
}

/// `target - induced_demand(P)`; equals the gradient of the dual objective
/// wherever no point is tied.
pub fn dual_supergradient(
    m: &LayeredMeasure,
    c: &CostField,
    p: &PriceMatrix,
    target: &DemandMatrix,
    tie_rule: &TieRule,
) -> Result<Mat, PricingError> {
    if target.agents() != p.agents() || target.layers() != p.layers() {
        return Err(PricingError::SizeMismatch(
            "target demand shape differs from prices".into(),
        ));
    }
    let induced = induced_demand(m, c, p, tie_rule)?;
    Ok(target.as_mat().sub(induced.as_mat()))
}

/// Searches completions of the tied points for one whose demand matches
/// `target` within `tol` in the max norm. `forced` holds the demand of the
/// un-tied points; each tied point contributes its layer masses to any of
/// its candidate agents (or nothing, for the null agent).
pub(crate) fn integral_completion_search(
    m: &LayeredMeasure,
    target: &DemandMatrix,
    forced: &Mat,
    tied: &[(usize, Vec<usize>)],
    tol: f64,
) -> Option<Vec<usize>> {
    let n = target.agents();
    let q = target.layers();
    let mut partial = forced.clone();
    let mut chosen = vec![0usize; tied.len()];
    fn rec(
        m: &LayeredMeasure,
        target: &DemandMatrix,
        tied: &[(usize, Vec<usize>)],
        tol: f64,
        pos: usize,
        partial: &mut Mat,
        chosen: &mut Vec<usize>,
        n: usize,
        q: usize,
    ) -> bool {
        // overshoot is unrecoverable: contributions are nonnegative
        for i in 0..n {
            for j in 0..q {
                if partial.get(i, j) > target.get(i, j) + tol {
                    return false;
                }
            }
        }
        if pos == tied.len() {
            for i in 0..n {
                for j in 0..q {
                    if (partial.get(i, j) - target.get(i, j)).abs() > tol {
                        return false;
                    }
                }
            }
            return true;
        }
        let (point, cands) = &tied[pos];
        for &label in cands {
            chosen[pos] = label;
            if label >= 1 {
                for j in 0..q {
                    partial.add_to(label - 1, j, m.layer_mass(*point, j));
                }
            }
            if rec(m, target, tied, tol, pos + 1, partial, chosen, n, q) {
                return true;
            }
            if label >= 1 {
                for j in 0..q {
                    partial.add_to(label - 1, j, -m.layer_mass(*point, j));
                }
            }
        }
        false
    }
    if rec(
        m, target, tied, tol, 0, &mut partial, &mut chosen, n, q,
    ) {
        Some(chosen)
    } else {
        None
    }
}

/// Decides whether `p` is an equilibrium price for `target`: some
/// resolution of the exactly tied points must reproduce the target demand
/// within `tol` in the max norm. Without `allow_tie_search` only the
/// lowest-index resolution is tried.
pub fn is_equilibrium(
    m: &LayeredMeasure,
    c: &CostField,
    p: &PriceMatrix,
    target: &DemandMatrix,
    tol: f64,
    allow_tie_search: bool,
) -> Result<bool, PricingError> {
    check_shapes(m, c, p)?;
    if target.agents() != p.agents() || target.layers() != p.layers() {
        return Err(PricingError::SizeMismatch(
            "target demand shape differs from prices".into(),
        ));
    }
    let n = p.agents();
    let q = m.num_layers();
    let mut forced = Mat::zeros(n, q);
    let mut tied: Vec<(usize, Vec<usize>)> = Vec::new();
    let mut lowest = Mat::zeros(n, q);
    for t in 0..m.num_points() {
        let cands = exact_candidates(m, c, p, t);
        let low = *cands.iter().min().expect("nonempty");
        if low >= 1 {
            for j in 0..q {
                lowest.add_to(low - 1, j, m.layer_mass(t, j));
            }
        }
        if cands.len() == 1 {
            if cands[0] >= 1 {
                for j in 0..q {
                    forced.add_to(cands[0] - 1, j, m.layer_mass(t, j));
                }
            }
        } else {
            tied.push((t, cands));
        }
    }
    let lowest_matches = (0..n).all(|i| {
        (0..q).all(|j| (lowest.get(i, j) - target.get(i, j)).abs() <= tol)
    });
    if lowest_matches {
        return Ok(true);
    }
    if !allow_tie_search || tied.is_empty() {
        return Ok(false);
    }
    let completions: f64 = tied.iter().map(|(_, c)| c.len() as f64).product();
    if completions > TIE_COMPLETION_GUARD {
        return Err(PricingError::TooManyTies { completions });
    }
    Ok(integral_completion_search(m, target, &forced, &tied, tol).is_some())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::partition::sample_achievable;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn three_point_two_layer() -> LayeredMeasure {
        LayeredMeasure::build(
            vec![vec![0.0, 0.0], vec![1.0, 0.0], vec![0.0, 1.0]],
            vec![1.0, 1.0, 1.0],
            vec![vec![1.0, 0.0], vec![0.0, 1.0], vec![0.5, 0.5]],
        )
        .unwrap()
    }

    #[test]
    fn phi_zero_prices_nonneg_costs() {
        let m = three_point_two_layer();
        let c = CostField::new(vec![vec![0.1, 0.2, 0.3], vec![0.3, 0.2, 0.1]]).unwrap();
        let p = PriceMatrix::zeros(2, 2);
        for t in 0..3 {
            assert_eq!(phi_at(&m, &c, &p, t).unwrap(), 0.0);
        }
    }

    #[test]
    fn phi_symmetric_tie_value() {
        let m = three_point_two_layer();
        let c = CostField::zero(2, 3);
        let p = PriceMatrix::from_rows(&[vec![1.0, 0.0], vec![0.0, 1.0]]).unwrap();
        assert_eq!(phi_at(&m, &c, &p, 2).unwrap(), 0.5);
    }

    #[test]
    fn phi_clamps_at_zero() {
        let m = LayeredMeasure::build(vec![vec![0.0]], vec![1.0], vec![vec![1.0]]).unwrap();
        let c = CostField::new(vec![vec![0.5]]).unwrap();
        let p = PriceMatrix::from_rows(&[vec![0.3]]).unwrap();
        assert_eq!(phi_at(&m, &c, &p, 0).unwrap(), 0.0);
    }

    #[test]
    fn phi_index_out_of_range() {
        let m = three_point_two_layer();
        let c = CostField::zero(1, 3);
        let p = PriceMatrix::zeros(1, 2);
        assert!(matches!(
            phi_at(&m, &c, &p, 5),
            Err(PricingError::IndexOutOfRange { index: 5, .. })
        ));
    }

    #[test]
    fn assign_nothing_when_costs_dominate() {
        let m = three_point_two_layer();
        let c = CostField::new(vec![vec![1.0; 3], vec![1.0; 3]]).unwrap();
        let p = PriceMatrix::zeros(2, 2);
        let a = assign_by_price(&m, &c, &p, &TieRule::LowestIndex).unwrap();
        assert_eq!(a.labels(), &[0, 0, 0]);
    }

    #[test]
    fn assign_scalar_dominant_agent() {
        let m = LayeredMeasure::build(
            vec![vec![0.0], vec![1.0]],
            vec![1.0, 1.0],
            vec![vec![1.0], vec![1.0]],
        )
        .unwrap();
        let c = CostField::zero(2, 2);
        let p = PriceMatrix::from_rows(&[vec![2.0], vec![1.0]]).unwrap();
        let a = assign_by_price(&m, &c, &p, &TieRule::LowestIndex).unwrap();
        assert_eq!(a.labels(), &[1, 1]);
    }

    #[test]
    fn tie_rule_semantics() {
        let m = three_point_two_layer();
        let c = CostField::zero(2, 3);
        let p = PriceMatrix::from_rows(&[vec![1.0, 0.0], vec![0.0, 1.0]]).unwrap();
        let low = assign_by_price(&m, &c, &p, &TieRule::LowestIndex).unwrap();
        assert_eq!(low.labels(), &[1, 2, 1]);
        let mut over = BTreeMap::new();
        over.insert(2usize, 2usize);
        let forced = assign_by_price(&m, &c, &p, &TieRule::Override(over)).unwrap();
        assert_eq!(forced.labels(), &[1, 2, 2]);
    }

    #[test]
    fn zero_cost_assign_matches_spec_examples() {
        let m = three_point_two_layer();
        let ones = PriceMatrix::from_rows(&[vec![1.0, 1.0]]).unwrap();
        let a = zero_cost_assign(&m, &ones, &TieRule::LowestIndex).unwrap();
        assert_eq!(a.labels(), &[1, 1, 1]);
        let zero = PriceMatrix::zeros(2, 2);
        let b = zero_cost_assign(&m, &zero, &TieRule::LowestIndex).unwrap();
        assert_eq!(b.labels(), &[0, 0, 0]);
    }

    #[test]
    fn induced_demand_hand_value() {
        let m = three_point_two_layer();
        let c = CostField::zero(2, 3);
        let p = PriceMatrix::from_rows(&[vec![1.0, 0.0], vec![0.0, 1.0]]).unwrap();
        let d = induced_demand(&m, &c, &p, &TieRule::LowestIndex).unwrap();
        assert_eq!(d.row(0), &[1.5, 0.5]);
        assert_eq!(d.row(1), &[0.0, 1.0]);
    }

    #[test]
    fn induced_demand_single_agent_saturates() {
        let m = three_point_two_layer();
        let c = CostField::new(vec![vec![0.4, 0.2, 0.9]]).unwrap();
        let p = PriceMatrix::from_rows(&[vec![100.0, 100.0]]).unwrap();
        let d = induced_demand(&m, &c, &p, &TieRule::LowestIndex).unwrap();
        assert_eq!(d.row(0), m.total_mass().as_slice());
    }

    #[test]
    fn dual_objective_zero_cases() {
        let m = three_point_two_layer();
        let c = CostField::new(vec![vec![0.1; 3], vec![0.4; 3]]).unwrap();
        let p = PriceMatrix::zeros(2, 2);
        let target = sample_achievable(&m, 2, 3).demand;
        assert_eq!(dual_objective(&m, &c, &p, &target).unwrap(), 0.0);
        let zero_target = DemandMatrix::zeros(2, 2);
        assert_eq!(dual_objective(&m, &c, &p, &zero_target).unwrap(), 0.0);
    }

    #[test]
    fn supergradient_matches_definition() {
        let m = three_point_two_layer();
        let c = CostField::new(vec![vec![0.1; 3], vec![0.4; 3]]).unwrap();
        let p = PriceMatrix::zeros(2, 2);
        let target = sample_achievable(&m, 2, 5).demand;
        let g = dual_supergradient(&m, &c, &p, &target, &TieRule::LowestIndex).unwrap();
        // induced demand is zero at zero prices with positive costs
        assert_eq!(g, target.as_mat().clone());
        let p2 = PriceMatrix::from_rows(&[vec![1.0, 0.0], vec![0.0, 1.0]]).unwrap();
        let induced = induced_demand(&m, &c, &p2, &TieRule::LowestIndex).unwrap();
        let g2 = dual_supergradient(&m, &c, &p2, &induced, &TieRule::LowestIndex).unwrap();
        assert_eq!(g2.inf_norm(), 0.0);
    }

    #[test]
    fn supergradient_finite_difference_check() {
        let m = three_point_two_layer();
        let c = CostField::new(vec![vec![0.13, 0.21, 0.34], vec![0.27, 0.11, 0.09]]).unwrap();
        let p = PriceMatrix::from_rows(&[vec![0.81, 0.33], vec![0.12, 0.77]]).unwrap();
        let target = sample_achievable(&m, 2, 1).demand;
        let g = dual_supergradient(&m, &c, &p, &target, &TieRule::LowestIndex).unwrap();
        let h = 1e-6;
        for i in 0..2 {
            for j in 0..2 {
                let mut up = p.as_mat().clone();
                up.add_to(i, j, h);
                let mut dn = p.as_mat().clone();
                dn.add_to(i, j, -h);
                let fu = dual_objective(&m, &c, &PriceMatrix::new(up).unwrap(), &target).unwrap();
                let fd = dual_objective(&m, &c, &PriceMatrix::new(dn).unwrap(), &target).unwrap();
                let fd_grad = (fu - fd) / (2.0 * h);
                assert!(
                    (fd_grad - g.get(i, j)).abs() < 1e-4,
                    "entry ({i},{j}): fd {fd_grad} vs {g:?}"
                );
            }
        }
    }

    #[test]
    fn equilibrium_self_consistency() {
        let m = three_point_two_layer();
        let c = CostField::new(vec![vec![0.1, 0.3, 0.2], vec![0.2, 0.1, 0.4]]).unwrap();
        let p = PriceMatrix::from_rows(&[vec![0.9, 0.1], vec![0.2, 0.8]]).unwrap();
        let target = induced_demand(&m, &c, &p, &TieRule::LowestIndex).unwrap();
        assert!(is_equilibrium(&m, &c, &p, &target, 1e-9, false).unwrap());
    }

    #[test]
    fn equilibrium_rejects_mispricing() {
        let m = LayeredMeasure::build(
            vec![vec![0.0], vec![1.0]],
            vec![0.5, 0.5],
            vec![vec![1.0], vec![1.0]],
        )
        .unwrap();
        let c = CostField::zero(2, 2);
        // agent 1 outbids everywhere but the target splits the mass
        let p = PriceMatrix::from_rows(&[vec![2.0], vec![1.0]]).unwrap();
        let target = DemandMatrix::from_rows(&[vec![0.5], vec![0.5]]).unwrap();
        assert!(!is_equilibrium(&m, &c, &p, &target, 1e-9, true).unwrap());
    }

    #[test]
    fn equilibrium_found_by_tie_search() {
        let m = three_point_two_layer();
        let c = CostField::zero(2, 3);
        let p = PriceMatrix::from_rows(&[vec![1.0, 0.0], vec![0.0, 1.0]]).unwrap();
        // the tied midpoint atom must go to agent 2
        let target = DemandMatrix::from_rows(&[vec![1.0, 0.0], vec![0.5, 1.5]]).unwrap();
        assert!(!is_equilibrium(&m, &c, &p, &target, 1e-9, false).unwrap());
        assert!(is_equilibrium(&m, &c, &p, &target, 1e-9, true).unwrap());
    }

    #[test]
    fn concavity_and_supergradient_inequality() {
        let m = three_point_two_layer();
        let c = CostField::new(vec![vec![0.31, 0.07, 0.55], vec![0.12, 0.42, 0.23]]).unwrap();
        let target = sample_achievable(&m, 2, 17).demand;
        let mut rng = ChaCha8Rng::seed_from_u64(23);
        let mut random_prices = || -> PriceMatrix {
            let rows: Vec<Vec<f64>> = (0..2)
                .map(|_| (0..2).map(|_| rng.random_range(-2.0..2.0)).collect())
                .collect();
            PriceMatrix::from_rows(&rows).unwrap()
        };
        for _ in 0..50 {
            let p1 = random_prices();
            let p2 = random_prices();
            let f1 = dual_objective(&m, &c, &p1, &target).unwrap();
            let f2 = dual_objective(&m, &c, &p2, &target).unwrap();
            for lambda in [0.25, 0.5, 0.75] {
                let mut mix = p1.as_mat().scale(lambda);
                mix.add_scaled(p2.as_mat(), 1.0 - lambda);
                let fmix =
                    dual_objective(&m, &c, &PriceMatrix::new(mix).unwrap(), &target).unwrap();
                assert!(fmix >= lambda * f1 + (1.0 - lambda) * f2 - 1e-9);
            }
            let g1 = dual_supergradient(&m, &c, &p1, &target, &TieRule::LowestIndex).unwrap();
            let lin = f1 + frobenius_dot(&g1, &p2.as_mat().sub(p1.as_mat()));
            assert!(f2 <= lin + 1e-9);
        }
    }

    #[test]
    fn translation_leaves_interior_assignments_alone() {
        let m = three_point_two_layer();
        let c = CostField::new(vec![vec![0.05, 0.1, 0.2], vec![0.15, 0.02, 0.11]]).unwrap();
        let p = PriceMatrix::from_rows(&[vec![2.0, 1.0], vec![1.0, 2.2]]).unwrap();
        let a = assign_by_price(&m, &c, &p, &TieRule::LowestIndex).unwrap();
        // all incomes strictly positive before and after the shift
        let shift = vec![0.7, -0.1];
        let rows: Vec<Vec<f64>> = (0..2)
            .map(|i| {
                p.row(i)
                    .iter()
                    .zip(&shift)
                    .map(|(v, s)| v + s)
                    .collect()
            })
            .collect();
        let p2 = PriceMatrix::from_rows(&rows).unwrap();
        let b = assign_by_price(&m, &c, &p2, &TieRule::LowestIndex).unwrap();
        assert_eq!(a, b);
    }
}
