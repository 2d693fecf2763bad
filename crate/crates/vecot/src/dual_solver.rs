//! Supergradient ascent on the concave dual of demand matching.
//!
//! The iteration is `P <- P + alpha_k (target - induced(P))`. Demands are
//! sums over atoms, so an exact integral match is only available when the
//! target is demand of some price-induced labeling; in general the optimum
//! sits on a tie face where the residual mass must be split fractionally
//! across the tied points. Convergence is therefore detected in three
//! grades: an exact integral match, an integral completion of the tied
//! points, or a fractional completion of the tied points (the discrete
//! stand-in for resolving ties on a set of measure zero). The fractional
//! grade never certifies an equilibrium price; it certifies that the dual
//! optimum has been reached and reports the matching shares.

use std::collections::VecDeque;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::lp::{self, LpError, LpStatus, Sense};
use crate::mat::Mat;
use crate::measure::{CostField, LayeredMeasure};
use crate::partition::{
    self, demand_of, feasible_necessary, relaxed_program, Assignment, DemandMatrix,
    FractionalAssignment, PartitionError,
};
use crate::pricing::{
    self, integral_completion_search, scan_points, PriceMatrix, PricingError,
};

#[derive(Debug, Error)]
pub enum SolverError {
    #[error("demand violates the necessary feasibility condition: {0}")]
    InfeasibleDemand(String),
    #[error("only a fractional optimum exists (LP value {lp_value})")]
    FractionalOnly { lp_value: f64 },
    #[error(transparent)]
    Pricing(#[from] PricingError),
    #[error(transparent)]
    Partition(#[from] PartitionError),
    #[error(transparent)]
    Lp(#[from] LpError),
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum StepRule {
    /// `alpha_k = a / k`.
    Diminishing { a: f64 },
    /// `alpha_k = (estimate - f_k) / |g_k|^2`, with a `1/k` fallback once
    /// the estimate is met. The estimate should upper-bound the dual
    /// supremum (any achieving assignment's production cost works).
    Polyak { estimate: f64 },
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum InitialPrices {
    Zero,
    /// Uniform in [-1, 1], reproducible from the seed.
    Seeded(u64),
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum PriceReporting {
    /// Report the best-objective iterate (default).
    BestObjective,
    /// Report the average of the last `w` iterates.
    WindowAverage(usize),
}

#[derive(Clone, Debug)]
pub struct SolverConfig {
    pub max_iterations: usize,
    /// Max-norm tolerance on `target - matched demand`.
    pub residual_tol: f64,
    /// Frobenius price norm beyond which a stuck run counts as diverged.
    pub divergence_price_norm: f64,
    pub step_rule: StepRule,
    pub reporting: PriceReporting,
    pub initial: InitialPrices,
    /// Incomes within this margin of a point's best are treated as tied by
    /// the completion search.
    pub tie_eps: f64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            max_iterations: 50_000,
            residual_tol: 1e-6,
            divergence_price_norm: 1e4,
            step_rule: StepRule::Diminishing { a: 1.0 },
            reporting: PriceReporting::BestObjective,
            initial: InitialPrices::Zero,
            tie_eps: 1e-6,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SolveStatus {
    Converged,
    Diverged,
    IterationCap,
}

/// How the target demand was matched at the converged prices.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum MatchKind {
    /// The lowest-index price-induced assignment matches outright.
    Exact,
    /// Some integral resolution of the tied points matches.
    TieCompletedIntegral,
    /// Only fractional splits of the tied points match: the dual optimum is
    /// reached but no integral equilibrium assignment exists there.
    TieCompletedFractional,
}

#[derive(Clone, Copy, Debug)]
pub struct IterationRecord {
    pub objective: f64,
    pub residual_inf: f64,
    pub price_norm: f64,
}

#[derive(Clone, Debug)]
pub struct DualReport {
    pub prices: PriceMatrix,
    /// Dual objective at the reported prices.
    pub objective: f64,
    /// Best dual objective seen anywhere along the run.
    pub best_objective: f64,
    /// `target - matched demand` at the reported prices (the matched demand
    /// uses the convergence completion when one exists).
    pub residual: Mat,
    pub residual_norm: f64,
    /// Residual of the plain lowest-index assignment at the reported prices.
    pub integral_residual_norm: f64,
    /// Smallest lowest-index residual seen anywhere along the run.
    pub best_integral_residual: f64,
    pub price_norm: f64,
    pub iterations: usize,
    pub status: SolveStatus,
    pub match_kind: Option<MatchKind>,
    /// Shares achieving the target at convergence (one-hot rows when the
    /// match is integral).
    pub completion: Option<FractionalAssignment>,
    /// Lowest-index labels at the reported prices, with ties resolved over
    /// the `tie_eps` candidate sets.
    pub induced_assignment: Assignment,
    pub history: Vec<IterationRecord>,
}

/// One ascent state's bookkeeping.
struct Evaluation {
    labels_exact: Vec<usize>,
    labels_eps: Vec<usize>,
    tied: Vec<(usize, Vec<usize>)>,
    induced: DemandMatrix,
    residual_mat: Mat,
    residual_inf: f64,
    objective: f64,
}

fn evaluate(
    m: &LayeredMeasure,
    c: &CostField,
    p: &PriceMatrix,
    target: &DemandMatrix,
    tie_eps: f64,
) -> Result<Evaluation, SolverError> {
    let scan = scan_points(m, c, p, tie_eps);
    let n = p.agents();
    let assignment = Assignment::new(scan.labels_exact.clone(), n)?;
    let induced = demand_of(m, &assignment)?;
    let residual_mat = target.as_mat().sub(induced.as_mat());
    let residual_inf = residual_mat.inf_norm();
    let objective =
        crate::mat::frobenius_dot(p.as_mat(), target.as_mat()) - scan.phi_weighted_total;
    Ok(Evaluation {
        labels_exact: scan.labels_exact,
        labels_eps: scan.labels_eps_lowest,
        tied: scan.tied,
        induced,
        residual_mat,
        residual_inf,
        objective,
    })
}

/// Projects prices onto the affine subspace where every tied point's
/// candidate incomes coincide exactly (and vanish when the null agent is a
/// candidate). Minimum-norm correction through the normal equations; a
/// tiny ridge keeps redundant tie rows harmless.
fn project_to_tie_face(
    m: &LayeredMeasure,
    c: &CostField,
    p: &PriceMatrix,
    tied: &[(usize, Vec<usize>)],
) -> Option<PriceMatrix> {
    let n = p.agents();
    let q = p.layers();
    let dim = n * q;
    let mut rows: Vec<Vec<f64>> = Vec::new();
    let mut rhs: Vec<f64> = Vec::new();
    for (t, cands) in tied {
        let zeta = m.density_row(*t);
        let anchor = cands[0];
        for &other in &cands[1..] {
            let mut row = vec![0.0; dim];
            let mut b = 0.0;
            // income(anchor) - income(other) = 0, with agent 0's income
            // fixed at zero
            if anchor >= 1 {
                for (j, z) in zeta.iter().enumerate() {
                    row[(anchor - 1) * q + j] += z;
                }
                b += c.cost(anchor - 1, *t);
            }
            if other >= 1 {
                for (j, z) in zeta.iter().enumerate() {
                    row[(other - 1) * q + j] -= z;
                }
                b -= c.cost(other - 1, *t);
            }
            rows.push(row);
            rhs.push(b);
        }
    }
    if rows.is_empty() {
        return Some(p.clone());
    }
    let k = rows.len();
    let x0: Vec<f64> = p.as_mat().data().to_vec();
    // r = b - A x0
    let mut r = vec![0.0; k];
    for (i, row) in rows.iter().enumerate() {
        r[i] = rhs[i] - crate::mat::dot(row, &x0);
    }
    let mut gram = Mat::zeros(k, k);
    for i in 0..k {
        for j in 0..k {
            gram.set(i, j, crate::mat::dot(&rows[i], &rows[j]));
        }
        gram.add_to(i, i, 1e-12);
    }
    let y = crate::mat::solve_dense(&gram, &r, 0.0)?;
    let mut x = x0;
    for (row, yi) in rows.iter().zip(&y) {
        for (slot, a) in x.iter_mut().zip(row) {
            *slot += yi * a;
        }
    }
    let mut entries = Mat::zeros(n, q);
    for i in 0..n {
        for j in 0..q {
            entries.set(i, j, x[i * q + j]);
        }
    }
    PriceMatrix::new(entries).ok()
}

/// Ties tighter than this are treated as exact when verifying a polished
/// price matrix, keeping the certified dual value within float dust of the
/// optimum.
const POLISH_VERIFY_EPS: f64 = 1e-9;

/// Projects onto the face where `tied`'s candidates coincide and re-runs
/// the match test there under the strict tie tolerance. `None` when the
/// projection fails or the polished point does not verify.
#[allow(clippy::type_complexity)]
fn polish_and_verify(
    m: &LayeredMeasure,
    c: &CostField,
    target: &DemandMatrix,
    p: &PriceMatrix,
    tied: &[(usize, Vec<usize>)],
    residual_tol: f64,
) -> Result<Option<(MatchKind, Option<FractionalAssignment>, Evaluation, PriceMatrix)>, SolverError>
{
    let Some(polished) = project_to_tie_face(m, c, p, tied) else {
        return Ok(None);
    };
    let ev = evaluate(m, c, &polished, target, POLISH_VERIFY_EPS)?;
    if let Some((kind, completion)) = try_match(m, target, &ev, residual_tol)? {
        return Ok(Some((kind, completion, ev, polished)));
    }
    Ok(None)
}

/// Match test at one price state: the plain lowest-index assignment, then
/// integral completions of the tied points, then fractional ones.
fn try_match(
    m: &LayeredMeasure,
    target: &DemandMatrix,
    ev: &Evaluation,
    residual_tol: f64,
) -> Result<Option<(MatchKind, Option<FractionalAssignment>)>, SolverError> {
    if ev.residual_inf <= residual_tol {
        return Ok(Some((MatchKind::Exact, None)));
    }
    if ev.tied.is_empty() {
        return Ok(None);
    }
    let tied_mass: f64 = ev.tied.iter().map(|(t, _)| m.weight(*t)).sum();
    if tied_mass + residual_tol < ev.residual_inf {
        return Ok(None);
    }
    let n = target.agents();
    let q = target.layers();
    let tied_points: Vec<usize> = ev.tied.iter().map(|(t, _)| *t).collect();
    let mut forced = Mat::zeros(n, q);
    for (t, &label) in ev.labels_exact.iter().enumerate() {
        if label >= 1 && !tied_points.contains(&t) {
            for j in 0..q {
                forced.add_to(label - 1, j, m.layer_mass(t, j));
            }
        }
    }
    let combos: f64 = ev.tied.iter().map(|(_, c)| c.len() as f64).product();
    if combos <= 4096.0 {
        if let Some(chosen) =
            integral_completion_search(m, target, &forced, &ev.tied, residual_tol)
        {
            let mut labels = ev.labels_exact.clone();
            for (pos, (t, _)) in ev.tied.iter().enumerate() {
                labels[*t] = chosen[pos];
            }
            let a = Assignment::new(labels, n)?;
            let fa = FractionalAssignment::from_assignment(&a);
            return Ok(Some((MatchKind::TieCompletedIntegral, Some(fa))));
        }
    }
    if let Some(fa) = fractional_completion(m, target, ev, residual_tol)? {
        return Ok(Some((MatchKind::TieCompletedFractional, Some(fa))));
    }
    Ok(None)
}

/// Tries to match the target by fractionally splitting the tied points,
/// holding every un-tied point at its exact label. Returns the full share
/// matrix on success.
fn fractional_completion(
    m: &LayeredMeasure,
    target: &DemandMatrix,
    ev: &Evaluation,
    tol: f64,
) -> Result<Option<FractionalAssignment>, SolverError> {
    let n = target.agents();
    let q = target.layers();
    // demand forced by un-tied points
    let tied_points: Vec<usize> = ev.tied.iter().map(|(t, _)| *t).collect();
    let mut forced = Mat::zeros(n, q);
    for (t, &label) in ev.labels_exact.iter().enumerate() {
        if label >= 1 && !tied_points.contains(&t) {
            for j in 0..q {
                forced.add_to(label - 1, j, m.layer_mass(t, j));
            }
        }
    }
    // variables: one share per (tied point, nonnull candidate)
    let mut var_of: Vec<(usize, usize)> = Vec::new();
    for (t, cands) in &ev.tied {
        for &cand in cands {
            if cand >= 1 {
                var_of.push((*t, cand));
            }
        }
    }
    let nvars = var_of.len();
    let mut prog = lp::LinearProgram::minimize(vec![0.0; nvars]);
    for (t, cands) in &ev.tied {
        let mut coeffs = vec![0.0; nvars];
        for (v, (vt, _)) in var_of.iter().enumerate() {
            if vt == t {
                coeffs[v] = 1.0;
            }
        }
        let sense = if cands.contains(&0) { Sense::Le } else { Sense::Eq };
        prog.add_row(coeffs, sense, 1.0);
    }
    for i in 0..n {
        for j in 0..q {
            let mut coeffs = vec![0.0; nvars];
            for (v, (vt, vi)) in var_of.iter().enumerate() {
                if *vi == i + 1 {
                    coeffs[v] = m.layer_mass(*vt, j);
                }
            }
            let need = target.get(i, j) - forced.get(i, j);
            prog.add_row(coeffs.clone(), Sense::Le, need + tol);
            prog.add_row(coeffs, Sense::Ge, need - tol);
        }
    }
    let sol = lp::solve(&prog)?;
    if sol.status != LpStatus::Optimal {
        return Ok(None);
    }
    let mut shares = Mat::zeros(m.num_points(), n + 1);
    for (t, &label) in ev.labels_exact.iter().enumerate() {
        if !tied_points.contains(&t) {
            shares.set(t, label, 1.0);
        }
    }
    for (v, (vt, vi)) in var_of.iter().enumerate() {
        shares.add_to(*vt, *vi, sol.primal[v].max(0.0));
    }
    for &t in &tied_points {
        let sold: f64 = (1..=n).map(|i| shares.get(t, i)).sum();
        shares.set(t, 0, (1.0 - sold).max(0.0));
    }
    Ok(Some(FractionalAssignment::new(shares)?))
}

fn initial_prices(cfg: &SolverConfig, n: usize, q: usize) -> PriceMatrix {
    match cfg.initial {
        InitialPrices::Zero => PriceMatrix::zeros(n, q),
        InitialPrices::Seeded(seed) => {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let rows: Vec<Vec<f64>> = (0..n)
                .map(|_| (0..q).map(|_| rng.random_range(-1.0..1.0)).collect())
                .collect();
            PriceMatrix::from_rows(&rows).expect("finite random prices")
        }
    }
}

/// Maximizes the dual objective for `target` by supergradient ascent.
///
/// Status semantics: `Converged` means the residual tolerance was met by an
/// exact, integral-completed, or fractionally completed match (see
/// [`MatchKind`]); `Diverged` means the price norm blew past the configured
/// threshold while the residual stayed an order of magnitude above
/// tolerance (the signature of a demand with no finite dual maximizer);
/// `IterationCap` is everything else.
pub fn solve_dual(
    m: &LayeredMeasure,
    c: &CostField,
    target: &DemandMatrix,
    cfg: &SolverConfig,
) -> Result<DualReport, SolverError> {
    c.matches(m)
        .map_err(|e| SolverError::InfeasibleDemand(e.to_string()))?;
    if target.layers() != m.num_layers() {
        return Err(SolverError::InfeasibleDemand(format!(
            "target has {} layers, measure has {}",
            target.layers(),
            m.num_layers()
        )));
    }
    if !feasible_necessary(target, m) {
        return Err(SolverError::InfeasibleDemand(format!(
            "layer totals {:?} exceed measure totals {:?}",
            target.layer_totals(),
            m.total_mass()
        )));
    }
    let n = target.agents();
    let q = target.layers();
    let mut p = initial_prices(cfg, n, q);
    let mut history: Vec<IterationRecord> = Vec::new();
    let mut recent: VecDeque<f64> = VecDeque::with_capacity(1000);
    let mut best_objective = f64::NEG_INFINITY;
    let mut best_prices = p.clone();
    let mut best_integral_residual = f64::INFINITY;
    let mut window: VecDeque<Mat> = VecDeque::new();
    let window_len = match cfg.reporting {
        PriceReporting::WindowAverage(w) => w.max(1),
        PriceReporting::BestObjective => 0,
    };
    let mut converged: Option<(MatchKind, Option<FractionalAssignment>, Evaluation, PriceMatrix)> =
        None;
    for k in 1..=cfg.max_iterations + 1 {
        let ev = evaluate(m, c, &p, target, cfg.tie_eps)?;
        if ev.objective > best_objective {
            best_objective = ev.objective;
            best_prices = p.clone();
        }
        best_integral_residual = best_integral_residual.min(ev.residual_inf);
        if let Some((kind, completion)) = try_match(m, target, &ev, cfg.residual_tol)? {
            // land exactly on the tie face when a completion carried the
            // match: at exact ties the matched value is the dual optimum
            let refined = if kind == MatchKind::Exact {
                None
            } else {
                polish_and_verify(m, c, target, &p, &ev.tied, cfg.residual_tol)?
            };
            let settled = refined.unwrap_or((kind, completion, ev, p.clone()));
            if settled.2.objective > best_objective {
                best_objective = settled.2.objective;
                best_prices = settled.3.clone();
            }
            best_integral_residual = best_integral_residual.min(settled.2.residual_inf);
            converged = Some(settled);
            break;
        }
        if k % 25 == 0 {
            // margins near a multi-point tie face can shrink very slowly;
            // periodically hypothesize the face from coarser margins and
            // adopt the projection only when it verifies strictly
            let mut settled = None;
            for guess_eps in [1e-5, 1e-4, 1e-3] {
                let scan = scan_points(m, c, &p, guess_eps);
                if scan.tied.is_empty() {
                    continue;
                }
                if let Some(refined) =
                    polish_and_verify(m, c, target, &p, &scan.tied, cfg.residual_tol)?
                {
                    settled = Some(refined);
                    break;
                }
            }
            if let Some(settled) = settled {
                if settled.2.objective > best_objective {
                    best_objective = settled.2.objective;
                    best_prices = settled.3.clone();
                }
                best_integral_residual = best_integral_residual.min(settled.2.residual_inf);
                converged = Some(settled);
                break;
            }
        }
        recent.push_back(ev.residual_inf);
        if recent.len() > 1000 {
            recent.pop_front();
        }
        if p.frobenius_norm() > cfg.divergence_price_norm {
            let window_best = recent.iter().copied().fold(f64::INFINITY, f64::min);
            if window_best >= 10.0 * cfg.residual_tol {
                break;
            }
        }
        if k > cfg.max_iterations {
            break;
        }
        history.push(IterationRecord {
            objective: ev.objective,
            residual_inf: ev.residual_inf,
            price_norm: p.frobenius_norm(),
        });
        let alpha = match cfg.step_rule {
            StepRule::Diminishing { a } => a / k as f64,
            StepRule::Polyak { estimate } => {
                let gap = estimate - ev.objective;
                let gsq = ev.residual_mat.frobenius_norm().powi(2);
                if gap > 0.0 && gsq > 1e-300 {
                    gap / gsq
                } else {
                    1.0 / k as f64
                }
            }
        };
        p = p.stepped(&ev.residual_mat, alpha);
        if window_len > 0 {
            window.push_back(p.as_mat().clone());
            if window.len() > window_len {
                window.pop_front();
            }
        }
    }
    let iterations = history.len();
    if let Some((kind, completion, ev, final_prices)) = converged {
        let matched_demand = match &completion {
            Some(fa) => fa.demand(m),
            None => ev.induced.clone(),
        };
        let residual = target.as_mat().sub(matched_demand.as_mat());
        let residual_norm = residual.inf_norm();
        let induced_assignment = Assignment::new(ev.labels_eps.clone(), n)?;
        return Ok(DualReport {
            objective: ev.objective,
            best_objective,
            residual,
            residual_norm,
            integral_residual_norm: ev.residual_inf,
            best_integral_residual,
            price_norm: final_prices.frobenius_norm(),
            iterations,
            status: SolveStatus::Converged,
            match_kind: Some(kind),
            completion,
            induced_assignment,
            history,
            prices: final_prices,
        });
    }
    // not converged: diverged if we broke on the price-norm test, else cap
    let diverged = p.frobenius_norm() > cfg.divergence_price_norm;
    let reported = match cfg.reporting {
        PriceReporting::BestObjective => best_prices,
        PriceReporting::WindowAverage(_) => {
            if window.is_empty() {
                best_prices
            } else {
                let mut acc = Mat::zeros(n, q);
                for item in &window {
                    acc.add_scaled(item, 1.0 / window.len() as f64);
                }
                PriceMatrix::new(acc).expect("averaged prices finite")
            }
        }
    };
    let ev = evaluate(m, c, &reported, target, cfg.tie_eps)?;
    let induced_assignment = Assignment::new(ev.labels_eps.clone(), n)?;
    Ok(DualReport {
        objective: ev.objective,
        best_objective,
        residual: ev.residual_mat.clone(),
        residual_norm: ev.residual_inf,
        integral_residual_norm: ev.residual_inf,
        best_integral_residual,
        price_norm: reported.frobenius_norm(),
        iterations,
        status: if diverged {
            SolveStatus::Diverged
        } else {
            SolveStatus::IterationCap
        },
        match_kind: None,
        completion: None,
        induced_assignment,
        history,
        prices: reported,
    })
}

/// Single-layer convenience wrapper: the demand is a vector, one entry per
/// agent.
pub fn solve_scalar(
    m: &LayeredMeasure,
    c: &CostField,
    target: &[f64],
    cfg: &SolverConfig,
) -> Result<DualReport, SolverError> {
    if m.num_layers() != 1 {
        return Err(SolverError::InfeasibleDemand(format!(
            "scalar solver needs q = 1, measure has q = {}",
            m.num_layers()
        )));
    }
    let rows: Vec<Vec<f64>> = target.iter().map(|v| vec![*v]).collect();
    let demand = DemandMatrix::from_rows(&rows)
        .map_err(|e| SolverError::InfeasibleDemand(e.to_string()))?;
    solve_dual(m, c, &demand, cfg)
}

/// Optimal value of the fractional demand-matching program (the LP primal
/// whose dual the ascent solver maximizes). Useful as a Polyak estimate.
pub fn optimal_relaxed_cost(
    m: &LayeredMeasure,
    c: &CostField,
    target: &DemandMatrix,
) -> Result<f64, SolverError> {
    let prog = relaxed_program(m, target, Some(c));
    let sol = lp::solve(&prog)?;
    match sol.status {
        LpStatus::Optimal => Ok(sol.objective),
        LpStatus::Infeasible => Err(SolverError::InfeasibleDemand(
            "demand is not fractionally achievable".into(),
        )),
        LpStatus::Unbounded => Err(SolverError::Lp(LpError::NumericalBreakdown(
            "demand program cannot be unbounded".into(),
        ))),
    }
}

/// A demand-achieving assignment of minimal production cost.
#[derive(Clone, Debug)]
pub struct StablePartition {
    pub assignment: Assignment,
    pub cost: f64,
    /// Optimal value of the LP relaxation (equals `cost` when the LP
    /// optimum is integral).
    pub lp_value: f64,
}

const INTEGRALITY_TOL: f64 = 1e-7;

/// Solves the fractional demand-matching program and extracts an integral
/// optimum when one exists: either the LP vertex is already integral, or
/// some integral completion of its fractional points meets the target.
pub fn stable_partition(
    m: &LayeredMeasure,
    c: &CostField,
    target: &DemandMatrix,
    tol: f64,
) -> Result<StablePartition, SolverError> {
    let prog = relaxed_program(m, target, Some(c));
    let sol = lp::solve(&prog)?;
    match sol.status {
        LpStatus::Infeasible => {
            return Err(SolverError::InfeasibleDemand(
                "demand is not fractionally achievable".into(),
            ))
        }
        LpStatus::Unbounded => {
            return Err(SolverError::Lp(LpError::NumericalBreakdown(
                "demand program cannot be unbounded".into(),
            )))
        }
        LpStatus::Optimal => {}
    }
    let t = m.num_points();
    let n = target.agents();
    let q = target.layers();
    let shares = partition::shares_from_primal(t, n, &sol.primal);
    let mut labels = vec![0usize; t];
    let mut fractional: Vec<(usize, Vec<usize>)> = Vec::new();
    for point in 0..t {
        let mut cands: Vec<usize> = Vec::new();
        let mut integral_label = None;
        for i in 0..=n {
            let s = shares.share(point, i);
            if s > INTEGRALITY_TOL {
                cands.push(i);
            }
            if (s - 1.0).abs() <= INTEGRALITY_TOL {
                integral_label = Some(i);
            }
        }
        match integral_label {
            Some(l) => labels[point] = l,
            None => fractional.push((point, cands)),
        }
    }
    if fractional.is_empty() {
        let assignment = Assignment::new(labels, n)?;
        let realized = demand_of(m, &assignment)?;
        if realized.inf_distance(target) <= tol.max(1e-6) {
            let cost = partition::monge_cost(m, c, &assignment)?;
            return Ok(StablePartition {
                assignment,
                cost,
                lp_value: sol.objective,
            });
        }
        return Err(SolverError::FractionalOnly {
            lp_value: sol.objective,
        });
    }
    // try integral completions over the fractional support
    let combos: f64 = fractional.iter().map(|(_, c)| c.len() as f64).product();
    if combos <= pricing::TIE_COMPLETION_GUARD {
        let mut forced = Mat::zeros(n, q);
        for (point, &label) in labels.iter().enumerate() {
            if label >= 1 && !fractional.iter().any(|(fp, _)| *fp == point) {
                for j in 0..q {
                    forced.add_to(label - 1, j, m.layer_mass(point, j));
                }
            }
        }
        if let Some(chosen) =
            integral_completion_search(m, target, &forced, &fractional, tol.max(1e-9))
        {
            for (pos, (point, _)) in fractional.iter().enumerate() {
                labels[*point] = chosen[pos];
            }
            let assignment = Assignment::new(labels, n)?;
            let cost = partition::monge_cost(m, c, &assignment)?;
            return Ok(StablePartition {
                assignment,
                cost,
                lp_value: sol.objective,
            });
        }
    }
    Err(SolverError::FractionalOnly {
        lp_value: sol.objective,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::partition::sample_achievable;
    use crate::pricing::{induced_demand, is_equilibrium, TieRule};

    fn three_point_two_layer() -> LayeredMeasure {
        LayeredMeasure::build(
            vec![vec![0.0, 0.0], vec![1.0, 0.0], vec![0.0, 1.0]],
            vec![1.0, 1.0, 1.0],
            vec![vec![1.0, 0.0], vec![0.0, 1.0], vec![0.5, 0.5]],
        )
        .unwrap()
    }

    fn random_scalar_instance(
        points: usize,
        agents: usize,
        seed: u64,
    ) -> (LayeredMeasure, CostField) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let pts: Vec<Vec<f64>> = (0..points)
            .map(|_| vec![rng.random_range(0.0..1.0), rng.random_range(0.0..1.0)])
            .collect();
        let weights: Vec<f64> = (0..points).map(|_| rng.random_range(0.01..1.0)).collect();
        let dens = vec![vec![1.0]; points];
        let m = LayeredMeasure::build(pts, weights, dens).unwrap();
        let costs: Vec<Vec<f64>> = (0..agents)
            .map(|_| (0..points).map(|_| rng.random_range(0.0..1.0)).collect())
            .collect();
        (m, CostField::new(costs).unwrap())
    }

    #[test]
    fn converges_in_zero_iterations_when_started_at_optimum() {
        // zero prices with positive costs induce the zero demand, so a zero
        // target is matched before any step is taken
        let m = three_point_two_layer();
        let c = CostField::new(vec![vec![0.1, 0.3, 0.2], vec![0.2, 0.1, 0.4]]).unwrap();
        let zero_target = DemandMatrix::zeros(2, 2);
        let rep = solve_dual(&m, &c, &zero_target, &SolverConfig::default()).unwrap();
        assert_eq!(rep.status, SolveStatus::Converged);
        assert_eq!(rep.iterations, 0);
        assert_eq!(rep.match_kind, Some(MatchKind::Exact));
        assert_eq!(rep.residual_norm, 0.0);
        assert!(rep.history.is_empty());
    }

    #[test]
    fn scalar_single_agent_saturation() {
        let (m, c) = random_scalar_instance(12, 1, 3);
        let total = m.total_mass()[0];
        let cfg = SolverConfig {
            step_rule: StepRule::Diminishing { a: 2.0 },
            ..SolverConfig::default()
        };
        let rep = solve_scalar(&m, &c, &[total], &cfg).unwrap();
        assert_eq!(rep.status, SolveStatus::Converged);
        // the winning price must clear every cost
        let max_cost = (0..m.num_points())
            .map(|t| c.cost(0, t))
            .fold(f64::NEG_INFINITY, f64::max);
        assert!(rep.prices.get(0, 0) > max_cost);
    }

    #[test]
    fn scalar_zero_demand_converges_immediately() {
        let (m, c) = random_scalar_instance(8, 2, 4);
        let cfg = SolverConfig::default();
        let rep = solve_scalar(&m, &c, &[0.0, 0.0], &cfg).unwrap();
        assert_eq!(rep.status, SolveStatus::Converged);
        assert_eq!(rep.iterations, 0);
    }

    #[test]
    fn scalar_random_matches_lp_value() {
        for seed in 0..5u64 {
            let (m, c) = random_scalar_instance(40, 3, 100 + seed);
            let sample = sample_achievable(&m, 3, 200 + seed);
            let lp_value = optimal_relaxed_cost(&m, &c, &sample.demand).unwrap();
            let cfg = SolverConfig {
                step_rule: StepRule::Polyak { estimate: lp_value },
                ..SolverConfig::default()
            };
            let rep = solve_dual(&m, &c, &sample.demand, &cfg).unwrap();
            assert_eq!(rep.status, SolveStatus::Converged, "seed {seed}");
            assert!(
                (rep.best_objective - lp_value).abs() <= 1e-6,
                "seed {seed}: dual {} vs lp {}",
                rep.best_objective,
                lp_value
            );
        }
    }

    #[test]
    fn infeasible_demand_rejected_upfront() {
        let m = three_point_two_layer();
        let c = CostField::zero(1, 3);
        let over = DemandMatrix::from_rows(&[vec![5.0, 0.1]]).unwrap();
        assert!(matches!(
            solve_dual(&m, &c, &over, &SolverConfig::default()),
            Err(SolverError::InfeasibleDemand(_))
        ));
    }

    #[test]
    fn unreachable_demand_diverges_under_polyak() {
        // one point with an asymmetric demand: passes the necessary
        // condition but no fractional share can produce (0.7, 0.1)
        let m = LayeredMeasure::build(vec![vec![0.0]], vec![2.0], vec![vec![0.5, 0.5]]).unwrap();
        let c = CostField::zero(1, 1);
        let target = DemandMatrix::from_rows(&[vec![0.7, 0.1]]).unwrap();
        let cfg = SolverConfig {
            step_rule: StepRule::Polyak { estimate: 1e9 },
            max_iterations: 5000,
            ..SolverConfig::default()
        };
        let rep = solve_dual(&m, &c, &target, &cfg).unwrap();
        assert_eq!(rep.status, SolveStatus::Diverged);
        assert!(rep.best_integral_residual > 0.05);
    }

    #[test]
    fn objective_running_max_is_nondecreasing() {
        let (m, c) = random_scalar_instance(25, 3, 7);
        let sample = sample_achievable(&m, 3, 8);
        let cfg = SolverConfig {
            max_iterations: 300,
            ..SolverConfig::default()
        };
        let rep = solve_dual(&m, &c, &sample.demand, &cfg).unwrap();
        let mut running = f64::NEG_INFINITY;
        let mut maxima = Vec::new();
        for rec in &rep.history {
            running = running.max(rec.objective);
            maxima.push(running);
        }
        assert!(maxima.windows(2).all(|w| w[0] <= w[1]));
    }

    #[test]
    fn converged_exact_is_equilibrium() {
        let (m, c) = random_scalar_instance(20, 2, 31);
        // price-induced target: the exact regime
        let p = PriceMatrix::from_rows(&[vec![0.7], vec![0.55]]).unwrap();
        let target = induced_demand(&m, &c, &p, &TieRule::LowestIndex).unwrap();
        let lp_value = optimal_relaxed_cost(&m, &c, &target).unwrap();
        let cfg = SolverConfig {
            step_rule: StepRule::Polyak { estimate: lp_value },
            ..SolverConfig::default()
        };
        let rep = solve_dual(&m, &c, &target, &cfg).unwrap();
        assert_eq!(rep.status, SolveStatus::Converged);
        if rep.match_kind == Some(MatchKind::Exact) {
            assert!(is_equilibrium(&m, &c, &rep.prices, &target, 1e-6, true).unwrap());
        }
    }

    #[test]
    fn stable_partition_zero_cost_is_free() {
        let m = three_point_two_layer();
        let c = CostField::zero(2, 3);
        let sample = sample_achievable(&m, 2, 5);
        let sp = stable_partition(&m, &c, &sample.demand, 1e-9).unwrap();
        assert!(sp.cost.abs() < 1e-9);
        assert!(sp.lp_value.abs() < 1e-9);
    }

    #[test]
    fn stable_partition_price_induced_target_is_integral() {
        let (m, c) = random_scalar_instance(18, 2, 77);
        let p = PriceMatrix::from_rows(&[vec![0.8], vec![0.6]]).unwrap();
        let target = induced_demand(&m, &c, &p, &TieRule::LowestIndex).unwrap();
        let sp = stable_partition(&m, &c, &target, 1e-9).unwrap();
        let realized = demand_of(&m, &sp.assignment).unwrap();
        assert!(realized.inf_distance(&target) <= 1e-7);
        // strong duality: integral optimum value matches the LP value
        assert!((sp.cost - sp.lp_value).abs() <= 1e-7 * (1.0 + sp.lp_value.abs()));
    }

    #[test]
    fn stable_partition_reports_fractional_only() {
        // subset-sum demand whose optimal LP vertex is strictly cheaper
        // fractionally: take all of the cheap point plus part of a dear one
        let m = LayeredMeasure::build(
            vec![vec![0.0], vec![1.0], vec![2.0], vec![3.0]],
            vec![0.1, 0.2, 0.3, 0.4],
            vec![vec![1.0]; 4],
        )
        .unwrap();
        let c = CostField::new(vec![vec![0.4, 0.3, 0.2, 0.1]]).unwrap();
        // demand 0.5 = 0.1 + 0.4 exactly, but cheapest fill is 0.4 + 1/3 of 0.3
        let target = DemandMatrix::from_rows(&[vec![0.5]]).unwrap();
        match stable_partition(&m, &c, &target, 1e-9) {
            Err(SolverError::FractionalOnly { lp_value }) => {
                let expected = 0.4 * 0.1 + 0.1 * 0.2;
                assert!((lp_value - expected).abs() < 1e-9);
            }
            other => panic!("expected FractionalOnly, got {other:?}"),
        }
    }
}
