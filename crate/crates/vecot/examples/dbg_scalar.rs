// scratch diagnostic for the scalar regression stall
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use vecot::dual_solver::*;
use vecot::measure::{CostField, LayeredMeasure};
use vecot::partition::sample_achievable;
use vecot::pricing::*;
use vecot::mat::dot;

fn random_scalar_instance(points: usize, agents: usize, seed: u64) -> (LayeredMeasure, CostField) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let pts: Vec<Vec<f64>> = (0..points)
        .map(|i| vec![i as f64, rng.random_range(0.0..1.0)])
        .collect();
    let weights: Vec<f64> = (0..points).map(|_| rng.random_range(1e-6..1.0)).collect();
    let dens = vec![vec![1.0]; points];
    let m = LayeredMeasure::build(pts, weights, dens).unwrap();
    let costs: Vec<Vec<f64>> = (0..agents)
        .map(|_| (0..points).map(|_| rng.random_range(0.0..1.0)).collect())
        .collect();
    (m, CostField::new(costs).unwrap())
}

fn main() {
    for seed in 0..25u64 {
        let (m, c) = random_scalar_instance(100, 4, 1000 + seed);
        let target = sample_achievable(&m, 4, 2000 + seed).demand;
        let lp = optimal_relaxed_cost(&m, &c, &target).unwrap();
        let cfg = SolverConfig { step_rule: StepRule::Polyak { estimate: lp }, ..Default::default() };
        let rep = solve_dual(&m, &c, &target, &cfg).unwrap();
        let gap = (rep.best_objective - lp).abs();
        if rep.status != SolveStatus::Converged || gap > 1e-6 {
            println!("seed {seed}: status {:?} iters {} gap {:.3e} resid {:.3e} best_resid {:.3e}", rep.status, rep.iterations, gap, rep.residual_norm, rep.best_integral_residual);
            // margins at final prices
            let p = &rep.prices;
            let mut margins: Vec<(f64, usize)> = (0..m.num_points()).map(|t| {
                let mut inc: Vec<f64> = (0..4).map(|i| dot(p.row(i), m.density_row(t)) - c.cost(i, t)).collect();
                inc.push(0.0);
                inc.sort_by(|a, b| b.partial_cmp(a).unwrap());
                (inc[0] - inc[1], t)
            }).collect();
            margins.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
            println!("  smallest margins: {:?}", &margins[..6.min(margins.len())]);
        }
    }
}
