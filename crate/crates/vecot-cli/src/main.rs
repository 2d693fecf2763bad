//! Command-line driver: instance I/O, solver and oracle dispatch, witness
//! construction, order checks, and SVG rendering.
//!
//! Exit codes: 0 success/converged, 1 input error, 2 diverged,
//! 3 iteration cap.

mod render;
mod report;

use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use vecot::counterexample::{
    build_witness, verify_no_equilibrium, verify_uniqueness, BoundaryWeights, GridSpec,
    SplitChoice, WitnessParams,
};
use vecot::dual_solver::{
    optimal_relaxed_cost, solve_dual, DualReport, InitialPrices, SolveStatus, SolverConfig,
    StepRule,
};
use vecot::io::{error_kind, InstanceFile, IoError, LabelsFile, PairFile, TargetFile};
use vecot::measure::{CostField, LayeredMeasure};
use vecot::order::{
    convex_criterion, dominates_n, kernel_exists, kernel_program_for, ConvexTestFamily,
    DominanceVerdict, KernelOutcome,
};
use vecot::partition::{achievable_exact, achievable_relaxed, feasible_necessary, PartitionError};
use vecot::DemandMatrix;

use report::{emit, sha256_hex, write_atomic, ErrorObject, RunReport};

#[derive(Parser)]
#[command(
    name = "vecot",
    version,
    about = "Sub-partitioning of layered measures: demand feasibility, equilibrium pricing, order checks"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Maximize the demand-matching dual and search for equilibrium prices
    Solve(SolveArgs),
    /// Decide whether a demand matrix is achievable (exact or relaxed)
    Check(CheckArgs),
    /// Build the unique-partition / no-equilibrium witness and verify it
    Witness(WitnessArgs),
    /// Compare two layered measures under the partial-order criteria
    Order(OrderArgs),
    /// Render a labeled 2d instance to SVG
    Render(RenderArgs),
}

#[derive(Args)]
struct SolveArgs {
    /// Instance JSON (points, weights, densities, optional costs)
    #[arg(long, required_unless_present = "witness")]
    instance: Option<PathBuf>,
    /// Target demand JSON ({"demand": [[..]]})
    #[arg(long, required_unless_present = "witness")]
    target: Option<PathBuf>,
    /// Use the built-in default witness instance and its target instead
    #[arg(long)]
    witness: bool,
    /// Seed for randomized initial prices (zero matrix when absent)
    #[arg(long)]
    seed: Option<u64>,
    /// Residual tolerance in the max norm
    #[arg(long, default_value_t = 1e-6)]
    tol: f64,
    #[arg(long, default_value_t = 50_000)]
    max_iter: usize,
    /// Price norm beyond which a stuck run is declared diverged
    #[arg(long, default_value_t = 1e4)]
    div_norm: f64,
    /// Step rule: "diminishing" or "polyak"
    #[arg(long, default_value = "diminishing")]
    step: String,
    /// Constant for the diminishing rule (alpha_k = a / k)
    #[arg(long, default_value_t = 1.0)]
    step_a: f64,
    /// Polyak estimate: a float, or "auto" to precompute the LP optimum
    #[arg(long)]
    polyak_estimate: Option<String>,
    /// Report path (stdout when absent)
    #[arg(long)]
    out: Option<PathBuf>,
    /// Iteration history CSV path
    #[arg(long)]
    history: Option<PathBuf>,
}

#[derive(Args)]
struct CheckArgs {
    #[arg(long)]
    instance: PathBuf,
    #[arg(long)]
    target: PathBuf,
    /// Brute-force oracle (downgrades to relaxed when the label space is
    /// too large)
    #[arg(long, conflicts_with = "relaxed")]
    exact: bool,
    /// LP relaxation oracle
    #[arg(long)]
    relaxed: bool,
    #[arg(long, default_value_t = 1e-9)]
    tol: f64,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct WitnessArgs {
    #[arg(long, default_value_t = 2)]
    layers: usize,
    #[arg(long, default_value_t = 2)]
    agents: usize,
    #[arg(long, default_value_t = 3)]
    interior: usize,
    #[arg(long, default_value_t = 0.05)]
    scale: f64,
    #[arg(long, default_value_t = 7)]
    seed: u64,
    /// Equal boundary weights (breaks uniqueness; for demonstration)
    #[arg(long)]
    equal_weights: bool,
    /// Use the servable boundary split instead of the adversarial one
    #[arg(long)]
    threshold_consistent: bool,
    /// Drop the adversarial costs
    #[arg(long)]
    zero_cost: bool,
    #[arg(long, default_value_t = 41)]
    grid_points: usize,
    #[arg(long, default_value_t = 10.0)]
    grid_range: f64,
    #[arg(long, default_value_t = 20_000)]
    solver_iters: usize,
    #[arg(long)]
    out_instance: Option<PathBuf>,
    #[arg(long)]
    out_evidence: Option<PathBuf>,
}

#[derive(Args)]
struct OrderArgs {
    /// Pair JSON ({"x": instance, "y": instance, optional "pair_cost"})
    #[arg(long)]
    pair: PathBuf,
    /// Sub-partition level for the sampling criterion
    #[arg(long, default_value_t = 2)]
    level: usize,
    #[arg(long, default_value_t = 64)]
    trials: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct RenderArgs {
    #[arg(long)]
    instance: PathBuf,
    /// Labels JSON ({"labels": [..]})
    #[arg(long)]
    labels: PathBuf,
    #[arg(long)]
    out: PathBuf,
}

fn main() {
    configure_threads();
    let cli = Cli::parse();
    let code = match cli.command {
        Command::Solve(args) => cmd_solve(&args),
        Command::Check(args) => cmd_check(&args),
        Command::Witness(args) => cmd_witness(&args),
        Command::Order(args) => cmd_order(&args),
        Command::Render(args) => cmd_render(&args),
    };
    std::process::exit(code);
}

/// `VECOT_THREADS` caps the rayon worker count.
fn configure_threads() {
    if let Ok(raw) = std::env::var("VECOT_THREADS") {
        if let Ok(n) = raw.trim().parse::<usize>() {
            if n >= 1 {
                let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
            }
        }
    }
}

fn fail(kind: &str, detail: impl ToString) -> i32 {
    print!("{}", ErrorObject::new(kind, detail.to_string()).to_json());
    1
}

fn fail_io(err: &IoError) -> i32 {
    fail(error_kind(err), err)
}

fn read_file(path: &Path) -> Result<String, i32> {
    fs::read_to_string(path).map_err(|e| fail("Io", format!("{}: {e}", path.display())))
}

fn load_instance(path: &Path) -> Result<(String, LayeredMeasure, Option<CostField>), i32> {
    let text = read_file(path)?;
    let file = InstanceFile::from_json(&text).map_err(|e| fail_io(&e))?;
    let measure = file.measure().map_err(|e| fail_io(&e))?;
    let costs = file.cost_field(&measure).map_err(|e| fail_io(&e))?;
    Ok((text, measure, costs))
}

fn load_target(path: &Path) -> Result<DemandMatrix, i32> {
    let text = read_file(path)?;
    let file = TargetFile::from_json(&text).map_err(|e| fail_io(&e))?;
    file.demand_matrix().map_err(|e| fail_io(&e))
}

#[derive(Serialize)]
struct SolveOutcome {
    status: String,
    match_kind: Option<String>,
    objective: f64,
    best_objective: f64,
    residual_norm: f64,
    integral_residual_norm: f64,
    best_integral_residual: f64,
    price_norm: f64,
    iterations: usize,
    final_prices: Vec<Vec<f64>>,
    residual: Vec<Vec<f64>>,
}

fn solve_outcome(rep: &DualReport) -> SolveOutcome {
    SolveOutcome {
        status: format!("{:?}", rep.status),
        match_kind: rep.match_kind.map(|k| format!("{k:?}")),
        objective: rep.objective,
        best_objective: rep.best_objective,
        residual_norm: rep.residual_norm,
        integral_residual_norm: rep.integral_residual_norm,
        best_integral_residual: rep.best_integral_residual,
        price_norm: rep.price_norm,
        iterations: rep.iterations,
        final_prices: (0..rep.prices.agents())
            .map(|i| rep.prices.row(i).to_vec())
            .collect(),
        residual: rep.residual.to_nested(),
    }
}

fn history_csv(rep: &DualReport) -> String {
    let mut csv = String::from("iter,objective,residual_inf,price_frobenius\n");
    for (k, rec) in rep.history.iter().enumerate() {
        csv.push_str(&format!(
            "{},{},{},{}\n",
            k + 1,
            rec.objective,
            rec.residual_inf,
            rec.price_norm
        ));
    }
    csv
}

fn cmd_solve(args: &SolveArgs) -> i32 {
    let (digest, measure, costs, target) = if args.witness {
        let wit = match build_witness(&WitnessParams::default()) {
            Ok(w) => w,
            Err(e) => return fail("Witness", e),
        };
        let text = InstanceFile::of_witness(&wit).to_json();
        (
            sha256_hex(text.as_bytes()),
            wit.measure.clone(),
            Some(wit.cost.clone()),
            wit.target.clone(),
        )
    } else {
        let (text, measure, costs) =
            match load_instance(args.instance.as_deref().expect("clap enforces")) {
                Ok(v) => v,
                Err(code) => return code,
            };
        let target = match load_target(args.target.as_deref().expect("clap enforces")) {
            Ok(t) => t,
            Err(code) => return code,
        };
        (sha256_hex(text.as_bytes()), measure, costs, target)
    };
    let costs = costs.unwrap_or_else(|| CostField::zero(target.agents(), measure.num_points()));
    if costs.num_agents() != target.agents() {
        return fail(
            "DimensionMismatch",
            format!(
                "cost field has {} agents, target has {}",
                costs.num_agents(),
                target.agents()
            ),
        );
    }
    let step_rule = match args.step.as_str() {
        "diminishing" => StepRule::Diminishing { a: args.step_a },
        "polyak" => {
            let estimate = match args.polyak_estimate.as_deref() {
                None | Some("auto") => match optimal_relaxed_cost(&measure, &costs, &target) {
                    Ok(v) => v,
                    Err(e) => return fail("InfeasibleDemand", e),
                },
                Some(raw) => match raw.parse::<f64>() {
                    Ok(v) => v,
                    Err(_) => return fail("Invalid", "polyak estimate must be a float or 'auto'"),
                },
            };
            StepRule::Polyak { estimate }
        }
        other => return fail("Invalid", format!("unknown step rule '{other}'")),
    };
    let cfg = SolverConfig {
        max_iterations: args.max_iter,
        residual_tol: args.tol,
        divergence_price_norm: args.div_norm,
        step_rule,
        initial: match args.seed {
            Some(seed) => InitialPrices::Seeded(seed),
            None => InitialPrices::Zero,
        },
        ..SolverConfig::default()
    };
    let rep = match solve_dual(&measure, &costs, &target, &cfg) {
        Ok(r) => r,
        Err(e) => return fail("InfeasibleDemand", e),
    };
    if let Some(path) = &args.history {
        if let Err(e) = write_atomic(path, &history_csv(&rep)) {
            return fail("Io", e);
        }
    }
    let outcome = solve_outcome(&rep);
    let doc = RunReport::new("solve", digest, outcome)
        .counter("iterations", rep.iterations as u64)
        .to_json();
    if let Err(e) = emit(args.out.as_deref(), &doc) {
        return fail("Io", e);
    }
    match rep.status {
        SolveStatus::Converged => 0,
        SolveStatus::Diverged => 2,
        SolveStatus::IterationCap => 3,
    }
}

#[derive(Serialize)]
struct CheckOutcome {
    mode: String,
    downgraded: bool,
    feasible_necessary: bool,
    achievable: bool,
    witness_labels: Option<Vec<usize>>,
    witness_count: Option<u64>,
    fractional_witness: Option<Vec<Vec<f64>>>,
}

fn relaxed_outcome(
    target: &DemandMatrix,
    measure: &LayeredMeasure,
    necessary: bool,
    downgraded: bool,
) -> Result<CheckOutcome, i32> {
    match achievable_relaxed(target, measure) {
        Ok((ok, witness)) => Ok(CheckOutcome {
            mode: "relaxed".into(),
            downgraded,
            feasible_necessary: necessary,
            achievable: ok,
            witness_labels: None,
            witness_count: None,
            fractional_witness: witness.map(|f| f.shares().to_nested()),
        }),
        Err(e) => Err(fail("Lp", e)),
    }
}

fn cmd_check(args: &CheckArgs) -> i32 {
    let (text, measure, _costs) = match load_instance(&args.instance) {
        Ok(v) => v,
        Err(code) => return code,
    };
    let target = match load_target(&args.target) {
        Ok(t) => t,
        Err(code) => return code,
    };
    if target.layers() != measure.num_layers() {
        return fail(
            "DimensionMismatch",
            format!(
                "target has {} layers, instance has {}",
                target.layers(),
                measure.num_layers()
            ),
        );
    }
    let necessary = feasible_necessary(&target, &measure);
    let want_exact = args.exact || !args.relaxed;
    let outcome = if want_exact {
        match achievable_exact(&target, &measure, args.tol) {
            Ok(w) => CheckOutcome {
                mode: "exact".into(),
                downgraded: false,
                feasible_necessary: necessary,
                achievable: w.achievable,
                witness_labels: w.witness.map(|a| a.labels().to_vec()),
                witness_count: Some(w.witness_count),
                fractional_witness: None,
            },
            Err(PartitionError::TooLarge { combinations }) => {
                eprintln!(
                    "warning: exact enumeration infeasible ((n+1)^T = {combinations:.3e}); \
                     downgrading to the relaxed oracle"
                );
                match relaxed_outcome(&target, &measure, necessary, true) {
                    Ok(o) => o,
                    Err(code) => return code,
                }
            }
            Err(e) => return fail("Partition", e),
        }
    } else {
        match relaxed_outcome(&target, &measure, necessary, false) {
            Ok(o) => o,
            Err(code) => return code,
        }
    };
    let count = outcome.witness_count.unwrap_or(0);
    let doc = RunReport::new("check", sha256_hex(text.as_bytes()), outcome)
        .counter("witness_count", count)
        .to_json();
    if let Err(e) = emit(args.out.as_deref(), &doc) {
        return fail("Io", e);
    }
    0
}

#[derive(Serialize)]
struct WitnessOutcome {
    layers: usize,
    agents: usize,
    boundary_indices: Vec<usize>,
    adversarial: Vec<f64>,
    designated_pair: (usize, usize),
    distinct_subset_sums: bool,
    unique: bool,
    witness_count: u64,
    evidence: vecot::counterexample::NoEquilibriumEvidence,
    target: Vec<Vec<f64>>,
}

fn cmd_witness(args: &WitnessArgs) -> i32 {
    let params = WitnessParams {
        layers: args.layers,
        agents: args.agents,
        interior_points_per_agent: args.interior,
        boundary_weight_scale: args.scale,
        seed: args.seed,
        designated_pair: (1, 2),
        boundary_weights: if args.equal_weights {
            BoundaryWeights::Equal
        } else {
            BoundaryWeights::PowersOfTwo
        },
        split: if args.threshold_consistent {
            SplitChoice::ThresholdConsistent
        } else {
            SplitChoice::NonThreshold
        },
        zero_cost: args.zero_cost,
    };
    let wit = match build_witness(&params) {
        Ok(w) => w,
        Err(e) => return fail("Witness", e),
    };
    let instance_text = InstanceFile::of_witness(&wit).to_json();
    if let Some(path) = &args.out_instance {
        if let Err(e) = write_atomic(path, &instance_text) {
            return fail("Io", e);
        }
    }
    let (unique, count) = match verify_uniqueness(&wit) {
        Ok(v) => v,
        Err(e) => return fail("Partition", e),
    };
    let grid = GridSpec {
        lo: -args.grid_range,
        hi: args.grid_range,
        points_per_axis: args.grid_points,
    };
    let cfg = SolverConfig {
        max_iterations: args.solver_iters,
        ..SolverConfig::default()
    };
    let evidence = match verify_no_equilibrium(&wit, &grid, &cfg) {
        Ok(ev) => ev,
        Err(e) => return fail("Witness", e),
    };
    let grid_points = evidence.grid_points_checked;
    let outcome = WitnessOutcome {
        layers: args.layers,
        agents: args.agents,
        boundary_indices: wit.boundary_indices.clone(),
        adversarial: wit.adversarial.clone(),
        designated_pair: wit.designated_pair,
        distinct_subset_sums: wit.distinct_subset_sums,
        unique,
        witness_count: count,
        evidence,
        target: (0..wit.target.agents())
            .map(|i| wit.target.row(i).to_vec())
            .collect(),
    };
    let doc = RunReport::new("witness", sha256_hex(instance_text.as_bytes()), outcome)
        .counter("grid_points", grid_points)
        .counter("witness_count", count)
        .to_json();
    if let Err(e) = emit(args.out_evidence.as_deref(), &doc) {
        return fail("Io", e);
    }
    0
}

#[derive(Serialize)]
struct OrderOutcome {
    kernel_exists: bool,
    certificate_verified: Option<bool>,
    convex_holds: bool,
    convex_violation: Option<(String, f64, f64)>,
    dominance: String,
    dominance_exhaustive: Option<bool>,
    witness_demand: Option<Vec<Vec<f64>>>,
    consistent: bool,
}

fn cmd_order(args: &OrderArgs) -> i32 {
    let text = match read_file(&args.pair) {
        Ok(t) => t,
        Err(code) => return code,
    };
    let pair = match PairFile::from_json(&text) {
        Ok(p) => p,
        Err(e) => return fail_io(&e),
    };
    let mx = match pair.x.measure() {
        Ok(m) => m,
        Err(e) => return fail_io(&e),
    };
    let my = match pair.y.measure() {
        Ok(m) => m,
        Err(e) => return fail_io(&e),
    };
    let kernel = match kernel_exists(&mx, &my) {
        Ok(k) => k,
        Err(e) => return fail("Order", e),
    };
    let (kernel_ok, certificate_verified) = match &kernel {
        KernelOutcome::Exists(_) => (true, None),
        KernelOutcome::Infeasible(cert) => {
            let prog = kernel_program_for(&mx, &my);
            (false, Some(cert.verify(&prog, 1e-7)))
        }
    };
    let fam = ConvexTestFamily::builtin(mx.num_layers(), 16, args.seed);
    let convex = match convex_criterion(&mx, &my, &fam) {
        Ok(c) => c,
        Err(e) => return fail("Order", e),
    };
    let dominance = match dominates_n(&mx, &my, args.level, args.trials, args.seed) {
        Ok(d) => d,
        Err(e) => return fail("Order", e),
    };
    let (dom_str, dom_exhaustive, witness_demand, dom_failed, checked) = match dominance {
        DominanceVerdict::Holds {
            demands_checked,
            exhaustive,
        } => (
            "holds".to_string(),
            Some(exhaustive),
            None,
            false,
            demands_checked as u64,
        ),
        DominanceVerdict::FailsWithWitness { demand } => (
            "fails".to_string(),
            None,
            Some(
                (0..demand.agents())
                    .map(|i| demand.row(i).to_vec())
                    .collect::<Vec<_>>(),
            ),
            true,
            0,
        ),
    };
    let consistent = !(kernel_ok && (!convex.holds || dom_failed));
    let outcome = OrderOutcome {
        kernel_exists: kernel_ok,
        certificate_verified,
        convex_holds: convex.holds,
        convex_violation: convex.violation,
        dominance: dom_str,
        dominance_exhaustive: dom_exhaustive,
        witness_demand,
        consistent,
    };
    let doc = RunReport::new("order", sha256_hex(text.as_bytes()), outcome)
        .counter("demands_checked", checked)
        .to_json();
    if let Err(e) = emit(args.out.as_deref(), &doc) {
        return fail("Io", e);
    }
    0
}

fn cmd_render(args: &RenderArgs) -> i32 {
    let (_text, measure, _costs) = match load_instance(&args.instance) {
        Ok(v) => v,
        Err(code) => return code,
    };
    let labels_text = match read_file(&args.labels) {
        Ok(t) => t,
        Err(code) => return code,
    };
    let labels = match LabelsFile::from_json(&labels_text) {
        Ok(l) => l.labels,
        Err(e) => return fail_io(&e),
    };
    let svg = match render::render_svg(&measure, &labels) {
        Ok(s) => s,
        Err(e) => return fail("DimensionMismatch", e),
    };
    if let Err(e) = write_atomic(&args.out, &svg) {
        return fail("Io", e);
    }
    0
}
