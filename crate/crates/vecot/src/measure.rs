//! Layered measures: weighted point clouds with per-point density rows on
//! the probability simplex, plus per-agent production costs.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::mat::dot;

/// Density rows must sum to 1 within this tolerance after validation.
pub const SIMPLEX_TOL: f64 = 1e-12;
/// Rows whose sum is off by at most this much are renormalized, otherwise rejected.
pub const SIMPLEX_ACCEPT_TOL: f64 = 1e-9;
/// Alignment threshold used by the genericity diagnostics.
pub const ALIGNMENT_TOL: f64 = 1e-9;

#[derive(Debug, Error, PartialEq)]
pub enum MeasureError {
    #[error("measure must have at least one point and one layer")]
    EmptyMeasure,
    #[error("density row {row} is not on the simplex (sum {sum})")]
    NonSimplexRow { row: usize, sum: f64 },
    #[error("points {first} and {second} have identical coordinates")]
    DuplicatePoint { first: usize, second: usize },
    #[error("weight {index} is not strictly positive")]
    NonPositiveWeight { index: usize },
    #[error("{0}")]
    DimensionMismatch(String),
    #[error("non-finite value in {0}")]
    NonFinite(&'static str),
}

/// A discretized vector-valued measure: `T` points in `R^d`, strictly
/// positive weights, and a `T x q` density matrix whose rows lie on the
/// probability simplex. Immutable after construction.
#[derive(Clone, Debug, PartialEq)]
pub struct LayeredMeasure {
    points: Vec<Vec<f64>>,
    weights: Vec<f64>,
    densities: Vec<Vec<f64>>,
    layers: usize,
}

impl LayeredMeasure {
    /// Validates and builds a measure. Density rows within
    /// [`SIMPLEX_ACCEPT_TOL`] of summing to 1 are renormalized; rows already
    /// within [`SIMPLEX_TOL`] are kept bit-identical so that re-validation
    /// of a valid measure changes nothing.
    pub fn build(
        points: Vec<Vec<f64>>,
        weights: Vec<f64>,
        densities: Vec<Vec<f64>>,
    ) -> Result<Self, MeasureError> {
        let t = points.len();
        if t == 0 {
            return Err(MeasureError::EmptyMeasure);
        }
        if weights.len() != t || densities.len() != t {
            return Err(MeasureError::DimensionMismatch(format!(
                "points/weights/densities lengths differ: {}/{}/{}",
                t,
                weights.len(),
                densities.len()
            )));
        }
        let q = densities[0].len();
        if q == 0 {
            return Err(MeasureError::EmptyMeasure);
        }
        let d = points[0].len();
        if d == 0 {
            return Err(MeasureError::DimensionMismatch(
                "points must have at least one coordinate".into(),
            ));
        }
        for (i, p) in points.iter().enumerate() {
            if p.len() != d {
                return Err(MeasureError::DimensionMismatch(format!(
                    "point {i} has dimension {} != {d}",
                    p.len()
                )));
            }
            if p.iter().any(|v| !v.is_finite()) {
                return Err(MeasureError::NonFinite("points"));
            }
        }
        for (i, w) in weights.iter().enumerate() {
            if !w.is_finite() {
                return Err(MeasureError::NonFinite("weights"));
            }
            if *w <= 0.0 {
                return Err(MeasureError::NonPositiveWeight { index: i });
            }
        }
        let mut normalized = Vec::with_capacity(t);
        for (i, row) in densities.iter().enumerate() {
            if row.len() != q {
                return Err(MeasureError::DimensionMismatch(format!(
                    "density row {i} has {} layers != {q}",
                    row.len()
                )));
            }
            if row.iter().any(|v| !v.is_finite()) {
                return Err(MeasureError::NonFinite("densities"));
            }
            let sum: f64 = row.iter().sum();
            if row.iter().any(|v| *v < 0.0) || (sum - 1.0).abs() > SIMPLEX_ACCEPT_TOL {
                return Err(MeasureError::NonSimplexRow { row: i, sum });
            }
            if (sum - 1.0).abs() <= SIMPLEX_TOL {
                normalized.push(row.clone());
            } else {
                normalized.push(row.iter().map(|v| v / sum).collect());
            }
        }
        // exact-coordinate duplicate detection via bit patterns
        let mut keyed: Vec<(Vec<u64>, usize)> = points
            .iter()
            .enumerate()
            .map(|(i, p)| (p.iter().map(|v| v.to_bits()).collect(), i))
            .collect();
        keyed.sort();
        for pair in keyed.windows(2) {
            if pair[0].0 == pair[1].0 {
                return Err(MeasureError::DuplicatePoint {
                    first: pair[0].1.min(pair[1].1),
                    second: pair[0].1.max(pair[1].1),
                });
            }
        }
        Ok(LayeredMeasure {
            points,
            weights,
            densities: normalized,
            layers: q,
        })
    }

    pub fn num_points(&self) -> usize {
        self.points.len()
    }

    pub fn num_layers(&self) -> usize {
        self.layers
    }

    pub fn dim(&self) -> usize {
        self.points[0].len()
    }

    pub fn point(&self, t: usize) -> &[f64] {
        &self.points[t]
    }

    pub fn points(&self) -> &[Vec<f64>] {
        &self.points
    }

    pub fn weight(&self, t: usize) -> f64 {
        self.weights[t]
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// Density row `(zeta_1(x_t), ..., zeta_q(x_t))`.
    pub fn density_row(&self, t: usize) -> &[f64] {
        &self.densities[t]
    }

    pub fn densities(&self) -> &[Vec<f64>] {
        &self.densities
    }

    /// Mass of layer `j` carried by point `t`.
    #[inline]
    pub fn layer_mass(&self, t: usize, j: usize) -> f64 {
        self.weights[t] * self.densities[t][j]
    }

    /// Per-layer total masses; entries sum to the total scalar mass.
    pub fn total_mass(&self) -> Vec<f64> {
        let mut out = vec![0.0; self.layers];
        for t in 0..self.num_points() {
            for (j, out_j) in out.iter_mut().enumerate() {
                *out_j += self.layer_mass(t, j);
            }
        }
        out
    }

    pub fn total_scalar_mass(&self) -> f64 {
        self.weights.iter().sum()
    }
}

/// Per-agent, per-point production costs. Row `i` holds `c_i(x_t)`; the
/// null agent's cost is identically zero and never stored.
#[derive(Clone, Debug, PartialEq)]
pub struct CostField {
    costs: Vec<Vec<f64>>,
}

impl CostField {
    pub fn new(costs: Vec<Vec<f64>>) -> Result<Self, MeasureError> {
        if costs.is_empty() {
            return Err(MeasureError::DimensionMismatch(
                "cost field needs at least one agent".into(),
            ));
        }
        let t = costs[0].len();
        for (i, row) in costs.iter().enumerate() {
            if row.len() != t {
                return Err(MeasureError::DimensionMismatch(format!(
                    "cost row {i} has {} points != {t}",
                    row.len()
                )));
            }
            if row.iter().any(|v| !v.is_finite()) {
                return Err(MeasureError::NonFinite("costs"));
            }
        }
        Ok(CostField { costs })
    }

    pub fn zero(agents: usize, points: usize) -> Self {
        CostField {
            costs: vec![vec![0.0; points]; agents],
        }
    }

    pub fn num_agents(&self) -> usize {
        self.costs.len()
    }

    pub fn num_points(&self) -> usize {
        self.costs[0].len()
    }

    #[inline]
    pub fn cost(&self, agent: usize, t: usize) -> f64 {
        self.costs[agent][t]
    }

    pub fn rows(&self) -> &[Vec<f64>] {
        &self.costs
    }

    pub fn matches(&self, m: &LayeredMeasure) -> Result<(), MeasureError> {
        if self.num_points() != m.num_points() {
            return Err(MeasureError::DimensionMismatch(format!(
                "cost field covers {} points, measure has {}",
                self.num_points(),
                m.num_points()
            )));
        }
        Ok(())
    }
}

/// Total weight of points whose density row is orthogonal to `lambda`
/// within [`ALIGNMENT_TOL`].
pub fn alignment_weight(m: &LayeredMeasure, lambda: &[f64]) -> f64 {
    (0..m.num_points())
        .filter(|&t| dot(lambda, m.density_row(t)).abs() < ALIGNMENT_TOL)
        .map(|t| m.weight(t))
        .sum()
}

/// Total weight of points where `lambda . zeta(x_t)` coincides with the
/// cost difference `c_i(x_t) - c_k(x_t)` within [`ALIGNMENT_TOL`].
pub fn cost_alignment_weight(
    m: &LayeredMeasure,
    c: &CostField,
    lambda: &[f64],
    i: usize,
    k: usize,
) -> f64 {
    (0..m.num_points())
        .filter(|&t| {
            (dot(lambda, m.density_row(t)) - (c.cost(i, t) - c.cost(k, t))).abs() < ALIGNMENT_TOL
        })
        .map(|t| m.weight(t))
        .sum()
}

#[derive(Clone, Debug)]
pub struct ProbeStat {
    pub probe: Vec<f64>,
    pub flagged_weight: f64,
}

#[derive(Clone, Debug)]
pub struct PairProbeStat {
    pub agent_i: usize,
    pub agent_k: usize,
    pub max_flagged_weight: f64,
}

/// Advisory diagnostics standing in for the generic-position assumptions:
/// duplicate density rows, weight aligned with random probe directions, and
/// weight where probe directions hit cost differences. Never blocks.
#[derive(Clone, Debug)]
pub struct GenericityReport {
    pub duplicate_rows: Vec<(usize, usize)>,
    pub zero_alignment: Vec<ProbeStat>,
    pub cost_alignment: Vec<PairProbeStat>,
    pub max_zero_alignment_weight: f64,
}

pub fn genericity_report(
    m: &LayeredMeasure,
    c: &CostField,
    probes: usize,
    seed: u64,
) -> GenericityReport {
    let q = m.num_layers();
    let mut duplicate_rows = Vec::new();
    for a in 0..m.num_points() {
        for b in a + 1..m.num_points() {
            if m.density_row(a) == m.density_row(b) {
                duplicate_rows.push((a, b));
            }
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let dirs: Vec<Vec<f64>> = (0..probes).map(|_| random_unit(&mut rng, q)).collect();
    let zero_alignment: Vec<ProbeStat> = dirs
        .iter()
        .map(|lambda| ProbeStat {
            probe: lambda.clone(),
            flagged_weight: alignment_weight(m, lambda),
        })
        .collect();
    let max_zero_alignment_weight = zero_alignment
        .iter()
        .fold(0.0f64, |acc, p| acc.max(p.flagged_weight));
    let n = c.num_agents();
    let mut cost_alignment = Vec::new();
    for i in 0..n {
        for k in 0..n {
            if i == k {
                continue;
            }
            let worst = dirs
                .iter()
                .map(|lambda| cost_alignment_weight(m, c, lambda, i, k))
                .fold(0.0f64, f64::max);
            cost_alignment.push(PairProbeStat {
                agent_i: i,
                agent_k: k,
                max_flagged_weight: worst,
            });
        }
    }
    GenericityReport {
        duplicate_rows,
        zero_alignment,
        cost_alignment,
        max_zero_alignment_weight,
    }
}

fn random_unit(rng: &mut ChaCha8Rng, q: usize) -> Vec<f64> {
    use rand::Rng;
    loop {
        // Box-Muller-free gaussian-ish sampling is not needed; a rejection
        // sample from the cube is fine for direction probes.
        let v: Vec<f64> = (0..q).map(|_| rng.random_range(-1.0..1.0)).collect();
        let norm = dot(&v, &v).sqrt();
        if norm > 1e-3 {
            return v.iter().map(|x| x / norm).collect();
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn two_point_scalar() -> LayeredMeasure {
        LayeredMeasure::build(
            vec![vec![0.0, 0.0], vec![1.0, 0.0]],
            vec![0.5, 0.5],
            vec![vec![1.0], vec![1.0]],
        )
        .unwrap()
    }

    pub(crate) fn three_point_two_layer() -> LayeredMeasure {
        LayeredMeasure::build(
            vec![vec![0.0, 0.0], vec![1.0, 0.0], vec![0.0, 1.0]],
            vec![1.0, 1.0, 1.0],
            vec![vec![1.0, 0.0], vec![0.0, 1.0], vec![0.5, 0.5]],
        )
        .unwrap()
    }

    #[test]
    fn scalar_measure_total_mass() {
        let m = two_point_scalar();
        assert_eq!(m.total_mass(), vec![1.0]);
    }

    #[test]
    fn layered_masses_hand_sum() {
        let m = three_point_two_layer();
        let tm = m.total_mass();
        assert!((tm[0] - 1.5).abs() < 1e-12);
        assert!((tm[1] - 1.5).abs() < 1e-12);
    }

    #[test]
    fn single_point_mass_split() {
        let m = LayeredMeasure::build(
            vec![vec![0.0]],
            vec![2.0],
            vec![vec![0.25, 0.75]],
        )
        .unwrap();
        assert_eq!(m.total_mass(), vec![0.5, 1.5]);
    }

    #[test]
    fn non_simplex_row_rejected() {
        let err = LayeredMeasure::build(
            vec![vec![0.0], vec![1.0]],
            vec![1.0, 1.0],
            vec![vec![0.6, 0.6], vec![0.5, 0.5]],
        )
        .unwrap_err();
        assert_eq!(
            err,
            MeasureError::NonSimplexRow {
                row: 0,
                sum: 1.2
            }
        );
    }

    #[test]
    fn negative_density_rejected() {
        let err = LayeredMeasure::build(
            vec![vec![0.0]],
            vec![1.0],
            vec![vec![-0.1, 1.1]],
        )
        .unwrap_err();
        assert!(matches!(err, MeasureError::NonSimplexRow { row: 0, .. }));
    }

    #[test]
    fn duplicate_points_rejected() {
        let err = LayeredMeasure::build(
            vec![vec![1.0, 2.0], vec![1.0, 2.0]],
            vec![1.0, 1.0],
            vec![vec![1.0], vec![1.0]],
        )
        .unwrap_err();
        assert_eq!(err, MeasureError::DuplicatePoint { first: 0, second: 1 });
    }

    #[test]
    fn empty_rejected() {
        assert_eq!(
            LayeredMeasure::build(vec![], vec![], vec![]).unwrap_err(),
            MeasureError::EmptyMeasure
        );
    }

    #[test]
    fn zero_weight_rejected() {
        let err = LayeredMeasure::build(
            vec![vec![0.0]],
            vec![0.0],
            vec![vec![1.0]],
        )
        .unwrap_err();
        assert_eq!(err, MeasureError::NonPositiveWeight { index: 0 });
    }

    #[test]
    fn revalidation_is_idempotent() {
        let m = three_point_two_layer();
        let again = LayeredMeasure::build(
            m.points().to_vec(),
            m.weights().to_vec(),
            m.densities().to_vec(),
        )
        .unwrap();
        assert_eq!(m, again);
    }

    #[test]
    fn near_simplex_row_renormalized() {
        let m = LayeredMeasure::build(
            vec![vec![0.0]],
            vec![1.0],
            vec![vec![0.5 + 2e-10, 0.5]],
        )
        .unwrap();
        let s: f64 = m.density_row(0).iter().sum();
        assert!((s - 1.0).abs() <= SIMPLEX_TOL);
    }

    #[test]
    fn genericity_distinct_rows_unflagged() {
        let m = three_point_two_layer();
        let c = CostField::new(vec![
            vec![0.13, 0.57, 0.91],
            vec![0.71, 0.02, 0.44],
        ])
        .unwrap();
        let rep = genericity_report(&m, &c, 16, 42);
        assert!(rep.max_zero_alignment_weight == 0.0);
    }

    #[test]
    fn genericity_duplicate_rows_listed() {
        let m = LayeredMeasure::build(
            vec![vec![0.0], vec![1.0], vec![2.0]],
            vec![1.0, 1.0, 1.0],
            vec![vec![0.5, 0.5], vec![0.5, 0.5], vec![0.25, 0.75]],
        )
        .unwrap();
        let c = CostField::zero(1, 3);
        let rep = genericity_report(&m, &c, 4, 0);
        assert_eq!(rep.duplicate_rows, vec![(0, 1)]);
    }

    #[test]
    fn alignment_weight_flags_boundary_direction() {
        let m = LayeredMeasure::build(
            vec![vec![0.0], vec![1.0]],
            vec![0.3, 0.7],
            vec![vec![0.5, 0.5], vec![0.8, 0.2]],
        )
        .unwrap();
        let inv = 1.0 / 2.0f64.sqrt();
        let w = alignment_weight(&m, &[inv, -inv]);
        assert!((w - 0.3).abs() < 1e-12);
    }
}
