//! Sub-partitions, demand matrices, the Monge cost, and achievability
//! oracles. Label 0 is the null agent: it absorbs unsold mass and never
//! pays or charges anything.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use thiserror::Error;

use crate::lp::{self, LinearProgram, LpError, LpStatus, Sense};
use crate::mat::Mat;
use crate::measure::{CostField, LayeredMeasure};

/// Exact achievability is decided up to this tolerance by default; demands
/// are sums of floating-point products, so bitwise equality is meaningless.
pub const DEFAULT_EXACT_TOL: f64 = 1e-9;
/// Brute-force guard: `(n+1)^T` label sequences at most.
pub const ENUMERATION_GUARD: f64 = 1e7;
/// Slack allowed by the necessary feasibility condition.
pub const FEASIBILITY_SLACK: f64 = 1e-9;

#[derive(Debug, Error)]
pub enum PartitionError {
    #[error("size mismatch: {0}")]
    SizeMismatch(String),
    #[error("enumeration too large: (n+1)^T = {combinations:.3e} exceeds the guard")]
    TooLarge { combinations: f64 },
    #[error(transparent)]
    Lp(#[from] LpError),
}

/// Point labels over `{0, 1, ..., n}`; 0 marks unsold mass.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Assignment {
    labels: Vec<usize>,
    agents: usize,
}

impl Assignment {
    pub fn new(labels: Vec<usize>, agents: usize) -> Result<Self, PartitionError> {
        if let Some(bad) = labels.iter().position(|l| *l > agents) {
            return Err(PartitionError::SizeMismatch(format!(
                "label {} at point {bad} exceeds agent count {agents}",
                labels[bad]
            )));
        }
        Ok(Assignment { labels, agents })
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn label(&self, t: usize) -> usize {
        self.labels[t]
    }

    pub fn agents(&self) -> usize {
        self.agents
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }
}

/// Row-stochastic point-to-agent shares, column 0 = unsold.
#[derive(Clone, Debug, PartialEq)]
pub struct FractionalAssignment {
    shares: Mat,
}

impl FractionalAssignment {
    pub fn new(shares: Mat) -> Result<Self, PartitionError> {
        for t in 0..shares.rows() {
            let row = shares.row(t);
            let sum: f64 = row.iter().sum();
            if row.iter().any(|v| *v < -1e-9) || (sum - 1.0).abs() > 1e-9 {
                return Err(PartitionError::SizeMismatch(format!(
                    "share row {t} is not a distribution (sum {sum})"
                )));
            }
        }
        Ok(FractionalAssignment { shares })
    }

    pub fn from_assignment(a: &Assignment) -> Self {
        let mut shares = Mat::zeros(a.len(), a.agents() + 1);
        for (t, l) in a.labels().iter().enumerate() {
            shares.set(t, *l, 1.0);
        }
        FractionalAssignment { shares }
    }

    pub fn shares(&self) -> &Mat {
        &self.shares
    }

    /// Share of point `t` held by agent `i` (0 = null agent).
    pub fn share(&self, t: usize, i: usize) -> f64 {
        self.shares.get(t, i)
    }

    pub fn num_points(&self) -> usize {
        self.shares.rows()
    }

    pub fn agents(&self) -> usize {
        self.shares.cols() - 1
    }

    /// Demand realized by the fractional shares.
    pub fn demand(&self, m: &LayeredMeasure) -> DemandMatrix {
        let n = self.agents();
        let q = m.num_layers();
        let mut d = Mat::zeros(n, q);
        for t in 0..m.num_points() {
            for i in 1..=n {
                let s = self.share(t, i);
                if s != 0.0 {
                    for j in 0..q {
                        d.add_to(i - 1, j, s * m.layer_mass(t, j));
                    }
                }
            }
        }
        DemandMatrix::from_mat_unchecked(d)
    }
}

/// Nonnegative `n x q` matrix of demanded per-layer masses.
#[derive(Clone, Debug, PartialEq)]
pub struct DemandMatrix {
    entries: Mat,
}

impl DemandMatrix {
    pub fn new(entries: Mat) -> Result<Self, PartitionError> {
        if entries.iter().any(|v| !v.is_finite() || v < -1e-12) {
            return Err(PartitionError::SizeMismatch(
                "demand entries must be finite and nonnegative".into(),
            ));
        }
        Ok(DemandMatrix { entries })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self, PartitionError> {
        Self::new(Mat::from_rows(rows))
    }

    pub fn zeros(agents: usize, layers: usize) -> Self {
        DemandMatrix {
            entries: Mat::zeros(agents, layers),
        }
    }

    pub(crate) fn from_mat_unchecked(entries: Mat) -> Self {
        DemandMatrix { entries }
    }

    pub fn agents(&self) -> usize {
        self.entries.rows()
    }

    pub fn layers(&self) -> usize {
        self.entries.cols()
    }

    #[inline]
    pub fn get(&self, agent: usize, layer: usize) -> f64 {
        self.entries.get(agent, layer)
    }

    pub fn as_mat(&self) -> &Mat {
        &self.entries
    }

    pub fn row(&self, agent: usize) -> &[f64] {
        self.entries.row(agent)
    }

    pub fn inf_distance(&self, other: &DemandMatrix) -> f64 {
        self.entries.sub(&other.entries).inf_norm()
    }

    /// Convex combination `lambda*self + (1-lambda)*other`.
    pub fn blend(&self, other: &DemandMatrix, lambda: f64) -> DemandMatrix {
        let mut m = self.entries.scale(lambda);
        m.add_scaled(&other.entries, 1.0 - lambda);
        DemandMatrix { entries: m }
    }

    /// Per-layer totals over all agents.
    pub fn layer_totals(&self) -> Vec<f64> {
        let q = self.layers();
        let mut out = vec![0.0; q];
        for i in 0..self.agents() {
            for (j, o) in out.iter_mut().enumerate() {
                *o += self.get(i, j);
            }
        }
        out
    }
}

fn check_sizes(m: &LayeredMeasure, a: &Assignment) -> Result<(), PartitionError> {
    if a.len() != m.num_points() {
        return Err(PartitionError::SizeMismatch(format!(
            "assignment covers {} points, measure has {}",
            a.len(),
            m.num_points()
        )));
    }
    Ok(())
}

/// `m_i^j = sum over points labeled i of w_t * zeta_j(x_t)`.
pub fn demand_of(m: &LayeredMeasure, a: &Assignment) -> Result<DemandMatrix, PartitionError> {
    check_sizes(m, a)?;
    let q = m.num_layers();
    let mut d = Mat::zeros(a.agents(), q);
    for (t, &label) in a.labels().iter().enumerate() {
        if label == 0 {
            continue;
        }
        for j in 0..q {
            d.add_to(label - 1, j, m.layer_mass(t, j));
        }
    }
    Ok(DemandMatrix::from_mat_unchecked(d))
}

/// Total production cost of an assignment; unsold points cost nothing.
pub fn monge_cost(
    m: &LayeredMeasure,
    c: &CostField,
    a: &Assignment,
) -> Result<f64, PartitionError> {
    check_sizes(m, a)?;
    if c.num_points() != m.num_points() {
        return Err(PartitionError::SizeMismatch(
            "cost field and measure disagree on point count".into(),
        ));
    }
    let mut total = 0.0;
    for (t, &label) in a.labels().iter().enumerate() {
        if label >= 1 {
            total += m.weight(t) * c.cost(label - 1, t);
        }
    }
    Ok(total)
}

/// Necessary feasibility: per-layer demand totals may not exceed the
/// per-layer measure totals (small slack for float sums).
pub fn feasible_necessary(d: &DemandMatrix, m: &LayeredMeasure) -> bool {
    assert_eq!(
        d.layers(),
        m.num_layers(),
        "demand and measure layer counts differ"
    );
    let totals = m.total_mass();
    d.layer_totals()
        .iter()
        .zip(&totals)
        .all(|(need, have)| *need <= have + FEASIBILITY_SLACK)
}

/// Outcome of the brute-force membership oracle.
#[derive(Clone, Debug)]
pub struct ExactWitness {
    pub achievable: bool,
    /// First achieving assignment in lexicographic label order.
    pub witness: Option<Assignment>,
    pub witness_count: u64,
}

/// Brute force over all `(n+1)^T` label sequences. Returns the first
/// witness in lexicographic order together with the number of achieving
/// assignments (for uniqueness checks).
pub fn achievable_exact(
    d: &DemandMatrix,
    m: &LayeredMeasure,
    tol: f64,
) -> Result<ExactWitness, PartitionError> {
    if d.layers() != m.num_layers() {
        return Err(PartitionError::SizeMismatch(
            "demand and measure layer counts differ".into(),
        ));
    }
    let t = m.num_points();
    let n = d.agents();
    let combinations = ((n + 1) as f64).powi(t as i32);
    if combinations > ENUMERATION_GUARD {
        return Err(PartitionError::TooLarge { combinations });
    }
    // suffix layer masses for pruning: what is still assignable from point p on
    let q = m.num_layers();
    let mut suffix = vec![vec![0.0; q]; t + 1];
    for p in (0..t).rev() {
        for j in 0..q {
            suffix[p][j] = suffix[p + 1][j] + m.layer_mass(p, j);
        }
    }
    let branch = |first_label: usize| -> (u64, Option<Vec<usize>>) {
        let mut labels = vec![0usize; t];
        labels[0] = first_label;
        let mut partial = Mat::zeros(n, q);
        if first_label >= 1 {
            for j in 0..q {
                partial.add_to(first_label - 1, j, m.layer_mass(0, j));
            }
        }
        let mut count = 0u64;
        let mut first: Option<Vec<usize>> = None;
        dfs(
            m, d, tol, &suffix, 1, &mut labels, &mut partial, &mut count, &mut first,
        );
        (count, first)
    };
    let results: Vec<(u64, Option<Vec<usize>>)> = if t == 0 {
        vec![]
    } else if combinations > 50_000.0 {
        (0..=n).into_par_iter().map(branch).collect()
    } else {
        (0..=n).map(branch).collect()
    };
    let mut count = 0u64;
    let mut witness = None;
    for (c, w) in results {
        count += c;
        if witness.is_none() {
            witness = w;
        }
    }
    Ok(ExactWitness {
        achievable: count > 0,
        witness: witness.map(|labels| Assignment { labels, agents: n }),
        witness_count: count,
    })
}

#[allow(clippy::too_many_arguments)]
fn dfs(
    m: &LayeredMeasure,
    target: &DemandMatrix,
    tol: f64,
    suffix: &[Vec<f64>],
    depth: usize,
    labels: &mut Vec<usize>,
    partial: &mut Mat,
    count: &mut u64,
    first: &mut Option<Vec<usize>>,
) {
    let n = target.agents();
    let q = m.num_layers();
    // prune: overshoot is unrecoverable, undershoot beyond remaining mass too
    for i in 0..n {
        for j in 0..q {
            let have = partial.get(i, j);
            if have > target.get(i, j) + tol {
                return;
            }
            if have + suffix[depth][j] < target.get(i, j) - tol {
                return;
            }
        }
    }
    if depth == labels.len() {
        for i in 0..n {
            for j in 0..q {
                if (partial.get(i, j) - target.get(i, j)).abs() > tol {
                    return;
                }
            }
        }
        *count += 1;
        if first.is_none() {
            *first = Some(labels.clone());
        }
        return;
    }
    for label in 0..=n {
        labels[depth] = label;
        if label >= 1 {
            for j in 0..q {
                partial.add_to(label - 1, j, m.layer_mass(depth, j));
            }
        }
        dfs(m, target, tol, suffix, depth + 1, labels, partial, count, first);
        if label >= 1 {
            for j in 0..q {
                partial.add_to(label - 1, j, -m.layer_mass(depth, j));
            }
        }
    }
    labels[depth] = 0;
}

/// Builds the fractional sub-partition program: variables are the shares
/// `pi_{t,i}` (point-major, agents 1..=n), row sums at most 1 with the
/// slack going to the null agent, and one equality per demand entry. The
/// objective is the fractional Monge cost when a cost field is supplied,
/// zero otherwise.
pub(crate) fn relaxed_program(
    m: &LayeredMeasure,
    d: &DemandMatrix,
    costs: Option<&CostField>,
) -> LinearProgram {
    let t = m.num_points();
    let n = d.agents();
    let q = m.num_layers();
    let nvars = t * n;
    let mut objective = vec![0.0; nvars];
    if let Some(c) = costs {
        for point in 0..t {
            for i in 0..n {
                objective[point * n + i] = m.weight(point) * c.cost(i, point);
            }
        }
    }
    let mut p = LinearProgram::minimize(objective);
    for point in 0..t {
        let mut coeffs = vec![0.0; nvars];
        for i in 0..n {
            coeffs[point * n + i] = 1.0;
        }
        p.add_row(coeffs, Sense::Le, 1.0);
    }
    for i in 0..n {
        for j in 0..q {
            let mut coeffs = vec![0.0; nvars];
            for point in 0..t {
                coeffs[point * n + i] = m.layer_mass(point, j);
            }
            p.add_row(coeffs, Sense::Eq, d.get(i, j));
        }
    }
    p
}

/// Converts an LP share vector (point-major as in [`relaxed_program`]) into
/// a fractional assignment, sending the per-point slack to the null agent.
pub(crate) fn shares_from_primal(t: usize, n: usize, primal: &[f64]) -> FractionalAssignment {
    let mut shares = Mat::zeros(t, n + 1);
    for point in 0..t {
        let mut sold = 0.0;
        for i in 0..n {
            let v = primal[point * n + i].max(0.0);
            shares.set(point, i + 1, v);
            sold += v;
        }
        shares.set(point, 0, (1.0 - sold).max(0.0));
    }
    FractionalAssignment { shares }
}

/// LP relaxation of achievability: point mass may be split fractionally
/// across agents, with slack going to the null agent. Under this relaxation
/// the achievable set is exactly convex.
pub fn achievable_relaxed(
    d: &DemandMatrix,
    m: &LayeredMeasure,
) -> Result<(bool, Option<FractionalAssignment>), PartitionError> {
    if d.layers() != m.num_layers() {
        return Err(PartitionError::SizeMismatch(
            "demand and measure layer counts differ".into(),
        ));
    }
    let t = m.num_points();
    let n = d.agents();
    let p = relaxed_program(m, d, None);
    let sol = lp::solve(&p)?;
    match sol.status {
        LpStatus::Optimal => Ok((true, Some(shares_from_primal(t, n, &sol.primal)))),
        LpStatus::Infeasible => Ok((false, None)),
        LpStatus::Unbounded => Err(PartitionError::Lp(LpError::NumericalBreakdown(
            "feasibility program cannot be unbounded".into(),
        ))),
    }
}

/// A demand together with the assignment that generated it.
#[derive(Clone, Debug)]
pub struct SampledDemand {
    pub demand: DemandMatrix,
    pub assignment: Assignment,
}

/// Random labels, then `demand_of`; the result is achievable by construction.
pub fn sample_achievable(m: &LayeredMeasure, n: usize, seed: u64) -> SampledDemand {
    assert!(n >= 1, "need at least one agent");
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let labels: Vec<usize> = (0..m.num_points())
        .map(|_| rng.random_range(0..=n))
        .collect();
    let assignment = Assignment { labels, agents: n };
    let demand = demand_of(m, &assignment).expect("sampled labels always fit the measure");
    SampledDemand { demand, assignment }
}
