//! Structural invariants checked over randomized instances.

use proptest::prelude::*;

use vecot::dual_solver::optimal_relaxed_cost;
use vecot::mat::Mat;
use vecot::measure::{CostField, LayeredMeasure};
use vecot::partition::{
    achievable_exact, achievable_relaxed, demand_of, feasible_necessary, sample_achievable,
    Assignment, DemandMatrix, DEFAULT_EXACT_TOL,
};
use vecot::pricing::{assign_by_price, dual_objective, phi_at, PriceMatrix, TieRule};

#[derive(Clone, Debug)]
struct SmallInstance {
    measure: LayeredMeasure,
    labels: Vec<usize>,
    agents: usize,
}

fn small_instance() -> impl Strategy<Value = SmallInstance> {
    (1usize..=5, 1usize..=3, 1usize..=3)
        .prop_flat_map(|(points, layers, agents)| {
            let weights = proptest::collection::vec(0.1f64..2.0, points);
            let raw_rows =
                proptest::collection::vec(proptest::collection::vec(0.05f64..1.0, layers), points);
            let labels = proptest::collection::vec(0usize..=agents, points);
            (weights, raw_rows, labels).prop_map(move |(weights, raw_rows, labels)| {
                let pts: Vec<Vec<f64>> = (0..points).map(|i| vec![i as f64]).collect();
                let densities: Vec<Vec<f64>> = raw_rows
                    .iter()
                    .map(|row| {
                        let s: f64 = row.iter().sum();
                        row.iter().map(|v| v / s).collect()
                    })
                    .collect();
                SmallInstance {
                    measure: LayeredMeasure::build(pts, weights, densities).unwrap(),
                    labels,
                    agents,
                }
            })
        })
        .prop_filter("enumeration guard", |inst| {
            ((inst.agents + 1) as f64).powi(inst.measure.num_points() as i32) <= 50_000.0
        })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn demand_roundtrips_through_exact_oracle(inst in small_instance()) {
        let a = Assignment::new(inst.labels.clone(), inst.agents).unwrap();
        let d = demand_of(&inst.measure, &a).unwrap();
        let w = achievable_exact(&d, &inst.measure, DEFAULT_EXACT_TOL).unwrap();
        prop_assert!(w.achievable);
        prop_assert!(w.witness_count >= 1);
        // integral witnesses embed fractionally
        let (relaxed, _) = achievable_relaxed(&d, &inst.measure).unwrap();
        prop_assert!(relaxed);
        prop_assert!(feasible_necessary(&d, &inst.measure));
    }

    #[test]
    fn relaxed_set_is_convex(inst in small_instance(), seed in 0u64..1000, lambda in 0.0f64..=1.0) {
        let d1 = sample_achievable(&inst.measure, inst.agents, seed).demand;
        let d2 = sample_achievable(&inst.measure, inst.agents, seed.wrapping_add(77)).demand;
        let mid = d1.blend(&d2, lambda);
        let (ok, _) = achievable_relaxed(&mid, &inst.measure).unwrap();
        prop_assert!(ok);
    }

    #[test]
    fn relaxed_set_shrinks_along_agent_rows(inst in small_instance(), seed in 0u64..1000, lambda in 0.0f64..=1.0) {
        let d = sample_achievable(&inst.measure, inst.agents, seed).demand;
        let mut rows: Vec<Vec<f64>> = (0..d.agents()).map(|i| d.row(i).to_vec()).collect();
        for v in rows[0].iter_mut() {
            *v *= lambda;
        }
        let scaled = DemandMatrix::from_rows(&rows).unwrap();
        let (ok, _) = achievable_relaxed(&scaled, &inst.measure).unwrap();
        prop_assert!(ok);
    }

    #[test]
    fn row_projection_is_convex(inst in small_instance(), seed in 0u64..1000, lambda in 0.0f64..=1.0) {
        // single-row demands with the other agents freed entirely
        let d1 = sample_achievable(&inst.measure, inst.agents, seed).demand;
        let d2 = sample_achievable(&inst.measure, inst.agents, seed.wrapping_add(31)).demand;
        let row: Vec<f64> = d1
            .row(0)
            .iter()
            .zip(d2.row(0))
            .map(|(a, b)| lambda * a + (1.0 - lambda) * b)
            .collect();
        let single = DemandMatrix::from_rows(&[row]).unwrap();
        let (ok, _) = achievable_relaxed(&single, &inst.measure).unwrap();
        prop_assert!(ok);
    }

    #[test]
    fn phi_nonnegative_and_zero_means_unsold(inst in small_instance(), pseed in 0u64..1000) {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(pseed);
        let q = inst.measure.num_layers();
        let n = inst.agents;
        let costs: Vec<Vec<f64>> = (0..n)
            .map(|_| (0..inst.measure.num_points()).map(|_| rng.random_range(0.0..1.0)).collect())
            .collect();
        let c = CostField::new(costs).unwrap();
        let rows: Vec<Vec<f64>> = (0..n)
            .map(|_| (0..q).map(|_| rng.random_range(-1.5..1.5)).collect())
            .collect();
        let p = PriceMatrix::from_rows(&rows).unwrap();
        let a = assign_by_price(&inst.measure, &c, &p, &TieRule::LowestIndex).unwrap();
        for t in 0..inst.measure.num_points() {
            let phi = phi_at(&inst.measure, &c, &p, t).unwrap();
            prop_assert!(phi >= 0.0);
            if phi == 0.0 {
                prop_assert_eq!(a.label(t), 0);
            }
        }
    }

    #[test]
    fn weak_duality_against_relaxed_primal(inst in small_instance(), pseed in 0u64..1000) {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(pseed);
        let q = inst.measure.num_layers();
        let n = inst.agents;
        let costs: Vec<Vec<f64>> = (0..n)
            .map(|_| (0..inst.measure.num_points()).map(|_| rng.random_range(0.0..1.0)).collect())
            .collect();
        let c = CostField::new(costs).unwrap();
        let a = Assignment::new(inst.labels.clone(), n).unwrap();
        let target = demand_of(&inst.measure, &a).unwrap();
        let primal = optimal_relaxed_cost(&inst.measure, &c, &target).unwrap();
        for _ in 0..4 {
            let rows: Vec<Vec<f64>> = (0..n)
                .map(|_| (0..q).map(|_| rng.random_range(-2.0..2.0)).collect())
                .collect();
            let p = PriceMatrix::from_rows(&rows).unwrap();
            let dual = dual_objective(&inst.measure, &c, &p, &target).unwrap();
            prop_assert!(dual <= primal + 1e-7, "dual {} primal {}", dual, primal);
        }
    }

    #[test]
    fn measure_revalidation_is_identity(inst in small_instance()) {
        let m = &inst.measure;
        let again = LayeredMeasure::build(
            m.points().to_vec(),
            m.weights().to_vec(),
            m.densities().to_vec(),
        )
        .unwrap();
        prop_assert_eq!(m.clone(), again);
    }

    #[test]
    fn total_mass_sums_to_scalar_mass(inst in small_instance()) {
        let tm = inst.measure.total_mass();
        let sum: f64 = tm.iter().sum();
        prop_assert!(tm.iter().all(|v| *v >= 0.0));
        prop_assert!((sum - inst.measure.total_scalar_mass()).abs() < 1e-9);
    }
}

#[test]
fn fractional_witness_reproduces_demand() {
    // deterministic cross-check that the relaxed oracle's witness realizes
    // the demand it certifies
    let m = LayeredMeasure::build(
        vec![vec![0.0], vec![1.0], vec![2.0]],
        vec![0.7, 1.1, 0.4],
        vec![vec![0.3, 0.7], vec![0.8, 0.2], vec![0.5, 0.5]],
    )
    .unwrap();
    let d1 = sample_achievable(&m, 2, 5).demand;
    let d2 = sample_achievable(&m, 2, 9).demand;
    let mid = d1.blend(&d2, 0.4);
    let (ok, witness) = achievable_relaxed(&mid, &m).unwrap();
    assert!(ok);
    let realized = witness.unwrap().demand(&m);
    assert!(realized.inf_distance(&mid) <= 1e-7);
}

#[test]
fn demand_matrices_compare_by_infinity_norm() {
    let a = DemandMatrix::from_rows(&[vec![1.0, 2.0]]).unwrap();
    let b = DemandMatrix::from_rows(&[vec![1.5, 1.0]]).unwrap();
    assert_eq!(a.inf_distance(&b), 1.0);
    let m = Mat::from_rows(&[vec![1.0, -3.0]]);
    assert_eq!(m.inf_norm(), 3.0);
}
