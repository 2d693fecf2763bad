//! Partial orders on layered measures.
//!
//! `(X, mu) >= (Y, nu)` at level `n` means every demand achievable from `Y`
//! by an `n`-sub-partition is achievable from `X`. The order over all `n`
//! at once is decided by a finite LP: a row-stochastic kernel pushing the
//! layer masses of `X` onto those of `Y` exists iff the order holds. The
//! convex-function criterion and assignment sampling are retained as
//! independent cross-checks, and the q-layer transport problem over plans
//! with layer-marginal constraints is solved as a finite LP with its dual.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use thiserror::Error;

use crate::lp::{self, FarkasCertificate, LinearProgram, LpError, LpStatus, Sense};
use crate::mat::{dot, Mat};
use crate::measure::{LayeredMeasure, MeasureError};
use crate::partition::{
    achievable_relaxed, demand_of, feasible_necessary, sample_achievable, Assignment,
    DemandMatrix, PartitionError,
};

#[derive(Debug, Error)]
pub enum OrderError {
    #[error("layer counts differ: {0} vs {1}")]
    LayerMismatch(usize, usize),
    #[error("plan set is empty (no kernel pushes the source onto the target)")]
    InfeasiblePlan,
    #[error("pair cost must be {rows}x{cols}")]
    CostShape { rows: usize, cols: usize },
    #[error(transparent)]
    Measure(#[from] MeasureError),
    #[error(transparent)]
    Partition(#[from] PartitionError),
    #[error(transparent)]
    Lp(#[from] LpError),
}

/// Row-stochastic kernel: row `t` distributes source point `t` over the
/// target points.
#[derive(Clone, Debug, PartialEq)]
pub struct KernelMatrix {
    entries: Mat,
}

impl KernelMatrix {
    pub fn new(entries: Mat) -> Result<Self, OrderError> {
        for t in 0..entries.rows() {
            let row = entries.row(t);
            let sum: f64 = row.iter().sum();
            if row.iter().any(|v| *v < -1e-9) || (sum - 1.0).abs() > 1e-9 {
                return Err(OrderError::Measure(MeasureError::NonSimplexRow {
                    row: t,
                    sum,
                }));
            }
        }
        Ok(KernelMatrix { entries })
    }

    pub fn identity(size: usize) -> Self {
        let mut m = Mat::zeros(size, size);
        for t in 0..size {
            m.set(t, t, 1.0);
        }
        KernelMatrix { entries: m }
    }

    pub fn source_points(&self) -> usize {
        self.entries.rows()
    }

    pub fn target_points(&self) -> usize {
        self.entries.cols()
    }

    pub fn get(&self, t: usize, s: usize) -> f64 {
        self.entries.get(t, s)
    }

    pub fn as_mat(&self) -> &Mat {
        &self.entries
    }
}

/// Convex test functions, each a pointwise max of affine pieces (or a norm,
/// convex outright).
#[derive(Clone, Debug, Serialize)]
pub enum ConvexFn {
    MaxCoordinate,
    L1Norm,
    L2Norm,
    MaxNorm,
    /// `max_k (slope_k . z + offset_k)`, clamped at zero when `clamp` so the
    /// function stays nonnegative.
    MaxAffine {
        slopes: Vec<Vec<f64>>,
        offsets: Vec<f64>,
        clamp: bool,
    },
}

impl ConvexFn {
    pub fn eval(&self, z: &[f64]) -> f64 {
        match self {
            ConvexFn::MaxCoordinate => z.iter().copied().fold(f64::NEG_INFINITY, f64::max),
            ConvexFn::L1Norm => z.iter().map(|v| v.abs()).sum(),
            ConvexFn::L2Norm => z.iter().map(|v| v * v).sum::<f64>().sqrt(),
            ConvexFn::MaxNorm => z.iter().map(|v| v.abs()).fold(0.0, f64::max),
            ConvexFn::MaxAffine {
                slopes,
                offsets,
                clamp,
            } => {
                let mut best = if *clamp { 0.0 } else { f64::NEG_INFINITY };
                for (slope, offset) in slopes.iter().zip(offsets) {
                    best = best.max(dot(slope, z) + offset);
                }
                best
            }
        }
    }
}

#[derive(Clone, Debug)]
pub struct ConvexTestFamily {
    pub members: Vec<(String, ConvexFn)>,
}

impl ConvexTestFamily {
    /// Coordinate max, the `l1`/`l2`/`max` norms, and `extra` random
    /// clamped max-affine functions.
    pub fn builtin(q: usize, extra: usize, seed: u64) -> Self {
        use rand::Rng;
        let mut members: Vec<(String, ConvexFn)> = vec![
            ("max_coordinate".into(), ConvexFn::MaxCoordinate),
            ("l1_norm".into(), ConvexFn::L1Norm),
            ("l2_norm".into(), ConvexFn::L2Norm),
            ("max_norm".into(), ConvexFn::MaxNorm),
        ];
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for idx in 0..extra {
            let pieces = rng.random_range(2..6);
            let slopes: Vec<Vec<f64>> = (0..pieces)
                .map(|_| (0..q).map(|_| rng.random_range(-1.0..1.0)).collect())
                .collect();
            let offsets: Vec<f64> = (0..pieces).map(|_| rng.random_range(-0.3..0.3)).collect();
            members.push((
                format!("max_affine_{idx}"),
                ConvexFn::MaxAffine {
                    slopes,
                    offsets,
                    clamp: true,
                },
            ));
        }
        ConvexTestFamily { members }
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }
}

fn integral(m: &LayeredMeasure, f: &ConvexFn) -> f64 {
    (0..m.num_points())
        .map(|t| m.weight(t) * f.eval(m.density_row(t)))
        .sum()
}

#[derive(Clone, Debug, Serialize)]
pub struct ConvexReport {
    pub holds: bool,
    /// Name, source integral and target integral of the first violation.
    pub violation: Option<(String, f64, f64)>,
    pub checked: usize,
}

/// Checks `sum_t w_t f(zeta_X) >= sum_s w_s f(zeta_Y) - 1e-9` for every
/// family member; a violation certifies the order fails.
pub fn convex_criterion(
    mx: &LayeredMeasure,
    my: &LayeredMeasure,
    fam: &ConvexTestFamily,
) -> Result<ConvexReport, OrderError> {
    if mx.num_layers() != my.num_layers() {
        return Err(OrderError::LayerMismatch(
            mx.num_layers(),
            my.num_layers(),
        ));
    }
    for (name, f) in &fam.members {
        let lhs = integral(mx, f);
        let rhs = integral(my, f);
        if lhs < rhs - 1e-9 {
            return Ok(ConvexReport {
                holds: false,
                violation: Some((name.clone(), lhs, rhs)),
                checked: fam.len(),
            });
        }
    }
    Ok(ConvexReport {
        holds: true,
        violation: None,
        checked: fam.len(),
    })
}

pub enum KernelOutcome {
    Exists(KernelMatrix),
    /// Farkas certificate of the kernel program's infeasibility.
    Infeasible(FarkasCertificate),
}

fn kernel_program(mx: &LayeredMeasure, my: &LayeredMeasure) -> LinearProgram {
    let tx = mx.num_points();
    let ty = my.num_points();
    let q = mx.num_layers();
    let nvars = tx * ty;
    let mut p = LinearProgram::minimize(vec![0.0; nvars]);
    for t in 0..tx {
        let mut coeffs = vec![0.0; nvars];
        for s in 0..ty {
            coeffs[t * ty + s] = 1.0;
        }
        p.add_row(coeffs, Sense::Eq, 1.0);
    }
    for s in 0..ty {
        for j in 0..q {
            let mut coeffs = vec![0.0; nvars];
            for t in 0..tx {
                coeffs[t * ty + s] = mx.layer_mass(t, j);
            }
            p.add_row(coeffs, Sense::Eq, my.layer_mass(s, j));
        }
    }
    p
}

/// Decides the full order: a row-stochastic kernel with
/// `sum_t K_{t,s} w_t zeta_j(x_t) = w_s zeta_j(y_s)` exists iff `mx`
/// dominates `my` at every level simultaneously.
pub fn kernel_exists(
    mx: &LayeredMeasure,
    my: &LayeredMeasure,
) -> Result<KernelOutcome, OrderError> {
    if mx.num_layers() != my.num_layers() {
        return Err(OrderError::LayerMismatch(
            mx.num_layers(),
            my.num_layers(),
        ));
    }
    let prog = kernel_program(mx, my);
    let sol = lp::solve(&prog)?;
    match sol.status {
        LpStatus::Optimal => {
            let ty = my.num_points();
            let mut k = Mat::zeros(mx.num_points(), ty);
            for t in 0..mx.num_points() {
                let mut sum = 0.0;
                for s in 0..ty {
                    let v = sol.primal[t * ty + s].max(0.0);
                    k.set(t, s, v);
                    sum += v;
                }
                // clean up float dust so the kernel validates row-stochastic
                if sum > 0.0 && (sum - 1.0).abs() > 1e-12 {
                    for s in 0..ty {
                        k.set(t, s, k.get(t, s) / sum);
                    }
                }
            }
            Ok(KernelOutcome::Exists(KernelMatrix::new(k)?))
        }
        LpStatus::Infeasible => Ok(KernelOutcome::Infeasible(
            sol.certificate.expect("infeasible solves carry certificates"),
        )),
        LpStatus::Unbounded => Err(OrderError::Lp(LpError::NumericalBreakdown(
            "kernel feasibility program cannot be unbounded".into(),
        ))),
    }
}

/// Exposes the kernel feasibility program so certificates can be verified
/// against it.
pub fn kernel_program_for(mx: &LayeredMeasure, my: &LayeredMeasure) -> LinearProgram {
    kernel_program(mx, my)
}

/// Pushes `mx` through a kernel: target point `s` receives layer masses
/// `sum_t K_{t,s} w_t zeta_j(x_t)`; its weight and density row are derived.
/// Targets receiving no mass are dropped and reported.
#[derive(Clone, Debug)]
pub struct Pushforward {
    pub measure: LayeredMeasure,
    pub dropped: Vec<usize>,
}

pub fn kernel_pushforward(
    mx: &LayeredMeasure,
    kernel: &KernelMatrix,
    target_points: &[Vec<f64>],
) -> Result<Pushforward, OrderError> {
    if kernel.source_points() != mx.num_points() {
        return Err(OrderError::Measure(MeasureError::DimensionMismatch(
            format!(
                "kernel has {} source rows, measure has {} points",
                kernel.source_points(),
                mx.num_points()
            ),
        )));
    }
    if target_points.len() != kernel.target_points() {
        return Err(OrderError::Measure(MeasureError::DimensionMismatch(
            format!(
                "kernel has {} target columns, got {} target points",
                kernel.target_points(),
                target_points.len()
            ),
        )));
    }
    let q = mx.num_layers();
    let ty = kernel.target_points();
    let mut points = Vec::new();
    let mut weights = Vec::new();
    let mut densities = Vec::new();
    let mut dropped = Vec::new();
    for s in 0..ty {
        let mut layer = vec![0.0; q];
        for t in 0..mx.num_points() {
            let share = kernel.get(t, s);
            if share != 0.0 {
                for (j, l) in layer.iter_mut().enumerate() {
                    *l += share * mx.layer_mass(t, j);
                }
            }
        }
        let total: f64 = layer.iter().sum();
        if total <= 1e-12 {
            dropped.push(s);
            continue;
        }
        points.push(target_points[s].clone());
        weights.push(total);
        densities.push(layer.iter().map(|l| l / total).collect());
    }
    let measure = LayeredMeasure::build(points, weights, densities)?;
    Ok(Pushforward { measure, dropped })
}

#[derive(Clone, Debug)]
pub enum DominanceVerdict {
    /// Sampling evidence only, never proof.
    Holds { demands_checked: usize, exhaustive: bool },
    /// A demand achievable from `Y` but not (even fractionally) from `X`.
    FailsWithWitness { demand: DemandMatrix },
}

const EXHAUSTIVE_DOMINANCE_CAP: f64 = 10_000.0;

/// Samples `n`-sub-partition demands of `my` (exhaustively when the label
/// space is small) and tests each for relaxed achievability in `mx`.
pub fn dominates_n(
    mx: &LayeredMeasure,
    my: &LayeredMeasure,
    n: usize,
    trials: usize,
    seed: u64,
) -> Result<DominanceVerdict, OrderError> {
    if mx.num_layers() != my.num_layers() {
        return Err(OrderError::LayerMismatch(
            mx.num_layers(),
            my.num_layers(),
        ));
    }
    let ty = my.num_points();
    let mut demands: Vec<DemandMatrix> = Vec::new();
    // the per-agent full assignments catch coordinatewise mass violations
    for agent in 1..=n {
        let labels = vec![agent; ty];
        demands.push(demand_of(my, &Assignment::new(labels, n)?)?);
    }
    let space = ((n + 1) as f64).powi(ty as i32);
    let exhaustive = space <= EXHAUSTIVE_DOMINANCE_CAP;
    if exhaustive {
        let mut labels = vec![0usize; ty];
        loop {
            demands.push(demand_of(my, &Assignment::new(labels.clone(), n)?)?);
            let mut pos = 0;
            loop {
                if pos == ty {
                    break;
                }
                labels[pos] += 1;
                if labels[pos] <= n {
                    break;
                }
                labels[pos] = 0;
                pos += 1;
            }
            if pos == ty {
                break;
            }
        }
    } else {
        for k in 0..trials {
            demands.push(sample_achievable(my, n, seed.wrapping_add(k as u64)).demand);
        }
    }
    // dedupe by bit pattern; demands repeat heavily in small spaces
    let mut seen: Vec<Vec<u64>> = Vec::new();
    let mut unique: Vec<DemandMatrix> = Vec::new();
    for d in demands {
        let key: Vec<u64> = d.as_mat().iter().map(|v| v.to_bits()).collect();
        if !seen.contains(&key) {
            seen.push(key);
            unique.push(d);
        }
    }
    let checked = unique.len();
    for d in unique {
        if !feasible_necessary(&d, mx) {
            return Ok(DominanceVerdict::FailsWithWitness { demand: d });
        }
        let (ok, _) = achievable_relaxed(&d, mx)?;
        if !ok {
            return Ok(DominanceVerdict::FailsWithWitness { demand: d });
        }
    }
    Ok(DominanceVerdict::Holds {
        demands_checked: checked,
        exhaustive,
    })
}

/// Solution of the q-layer transport problem.
#[derive(Clone, Debug)]
pub struct KantorovichSolution {
    pub value: f64,
    /// Mass moved from source point `t` to target point `s`.
    pub plan: Mat,
    /// Source potentials (one per source point).
    pub source_potentials: Vec<f64>,
    /// Target potentials (per target point and layer).
    pub target_potentials: Mat,
    pub dual_value: f64,
}

impl KantorovichSolution {
    /// Max violation of the dual feasibility system
    /// `phi_t + zeta(x_t) . psi_s <= c(t, s)`.
    pub fn dual_feasibility_violation(
        &self,
        mx: &LayeredMeasure,
        pair_cost: &Mat,
    ) -> f64 {
        let mut worst = 0.0f64;
        for t in 0..mx.num_points() {
            for s in 0..self.target_potentials.rows() {
                let lhs = self.source_potentials[t]
                    + dot(mx.density_row(t), self.target_potentials.row(s));
                worst = worst.max(lhs - pair_cost.get(t, s));
            }
        }
        worst
    }
}

/// Minimizes `sum c(t,s) pi_{t,s}` over plans with full first marginal and
/// layer-weighted second marginals; returns the optimal plan with the LP
/// dual interpreted as transport potentials.
pub fn kantorovich_q(
    mx: &LayeredMeasure,
    my: &LayeredMeasure,
    pair_cost: &Mat,
) -> Result<KantorovichSolution, OrderError> {
    if mx.num_layers() != my.num_layers() {
        return Err(OrderError::LayerMismatch(
            mx.num_layers(),
            my.num_layers(),
        ));
    }
    let tx = mx.num_points();
    let ty = my.num_points();
    let q = mx.num_layers();
    if pair_cost.rows() != tx || pair_cost.cols() != ty {
        return Err(OrderError::CostShape { rows: tx, cols: ty });
    }
    let nvars = tx * ty;
    let mut objective = vec![0.0; nvars];
    for t in 0..tx {
        for s in 0..ty {
            objective[t * ty + s] = pair_cost.get(t, s);
        }
    }
    let mut prog = LinearProgram::minimize(objective);
    for t in 0..tx {
        let mut coeffs = vec![0.0; nvars];
        for s in 0..ty {
            coeffs[t * ty + s] = 1.0;
        }
        prog.add_row(coeffs, Sense::Eq, mx.weight(t));
    }
    for s in 0..ty {
        for j in 0..q {
            let mut coeffs = vec![0.0; nvars];
            for t in 0..tx {
                coeffs[t * ty + s] = mx.density_row(t)[j];
            }
            prog.add_row(coeffs, Sense::Eq, my.layer_mass(s, j));
        }
    }
    let sol = lp::solve(&prog)?;
    match sol.status {
        LpStatus::Infeasible => Err(OrderError::InfeasiblePlan),
        LpStatus::Unbounded => Err(OrderError::Lp(LpError::NumericalBreakdown(
            "transport program cannot be unbounded".into(),
        ))),
        LpStatus::Optimal => {
            let mut plan = Mat::zeros(tx, ty);
            for t in 0..tx {
                for s in 0..ty {
                    plan.set(t, s, sol.primal[t * ty + s].max(0.0));
                }
            }
            let source_potentials: Vec<f64> = sol.row_duals[..tx].to_vec();
            let mut target_potentials = Mat::zeros(ty, q);
            for s in 0..ty {
                for j in 0..q {
                    target_potentials.set(s, j, sol.row_duals[tx + s * q + j]);
                }
            }
            let dual_value = sol.dual_objective(&prog);
            Ok(KantorovichSolution {
                value: sol.objective,
                plan,
                source_potentials,
                target_potentials,
                dual_value,
            })
        }
    }
}
