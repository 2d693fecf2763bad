//! Dense linear-programming oracle.
//!
//! Two-phase primal simplex on a dense tableau with Bland's anti-cycling
//! rule. Every pivot decision is index-ordered, so identical inputs produce
//! identical pivot sequences. Optimal solves return both primal and dual
//! values (the duals re-solved from the final basis against the original
//! columns, which keeps them free of tableau drift); infeasible solves
//! return a Farkas certificate checkable by a single matrix-vector product.
//!
//! Intended scale is a few thousand variables by a couple thousand rows;
//! there is deliberately no sparse machinery.

use thiserror::Error;

use crate::mat::{solve_dense, Mat};

/// Primal feasibility tolerance (also the infeasibility decision tolerance).
pub const FEAS_TOL: f64 = 1e-9;
/// Relative duality-gap tolerance that optimal solutions are held to.
pub const DUALITY_REL_TOL: f64 = 1e-8;

const PIVOT_TOL: f64 = 1e-9;
const REDUCED_COST_TOL: f64 = 1e-9;

#[derive(Debug, Error)]
pub enum LpError {
    #[error("numerical breakdown: {0}")]
    NumericalBreakdown(String),
    #[error("malformed program: {0}")]
    BadProgram(String),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Sense {
    Le,
    Eq,
    Ge,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Objective {
    Minimize,
    Maximize,
}

#[derive(Clone, Debug)]
struct Row {
    coeffs: Vec<f64>,
    sense: Sense,
    rhs: f64,
}

/// Dense LP: objective over `n` variables, rows with mixed senses, and per
/// variable bounds (lower 0 or free, upper finite or none).
#[derive(Clone, Debug)]
pub struct LinearProgram {
    objective_sense: Objective,
    objective: Vec<f64>,
    rows: Vec<Row>,
    free: Vec<bool>,
    upper: Vec<f64>,
}

impl LinearProgram {
    pub fn minimize(objective: Vec<f64>) -> Self {
        let n = objective.len();
        LinearProgram {
            objective_sense: Objective::Minimize,
            objective,
            rows: Vec::new(),
            free: vec![false; n],
            upper: vec![f64::INFINITY; n],
        }
    }

    pub fn maximize(objective: Vec<f64>) -> Self {
        let mut p = Self::minimize(objective);
        p.objective_sense = Objective::Maximize;
        p
    }

    pub fn add_row(&mut self, coeffs: Vec<f64>, sense: Sense, rhs: f64) {
        self.rows.push(Row { coeffs, sense, rhs });
    }

    /// Marks a variable as free (lower bound -inf instead of 0).
    pub fn set_free(&mut self, var: usize) {
        self.free[var] = true;
    }

    pub fn set_upper(&mut self, var: usize, upper: f64) {
        self.upper[var] = upper;
    }

    pub fn num_vars(&self) -> usize {
        self.objective.len()
    }

    pub fn num_rows(&self) -> usize {
        self.rows.len()
    }

    pub fn row_coeffs(&self, i: usize) -> &[f64] {
        &self.rows[i].coeffs
    }

    pub fn row_sense(&self, i: usize) -> Sense {
        self.rows[i].sense
    }

    pub fn row_rhs(&self, i: usize) -> f64 {
        self.rows[i].rhs
    }

    fn validate(&self) -> Result<(), LpError> {
        let n = self.num_vars();
        if self.objective.iter().any(|v| !v.is_finite()) {
            return Err(LpError::BadProgram("non-finite objective".into()));
        }
        for (i, row) in self.rows.iter().enumerate() {
            if row.coeffs.len() != n {
                return Err(LpError::BadProgram(format!(
                    "row {i} has {} coefficients, expected {n}",
                    row.coeffs.len()
                )));
            }
            if row.coeffs.iter().any(|v| !v.is_finite()) || !row.rhs.is_finite() {
                return Err(LpError::BadProgram(format!("row {i} has non-finite data")));
            }
        }
        for (j, u) in self.upper.iter().enumerate() {
            if u.is_nan() || *u == f64::NEG_INFINITY {
                return Err(LpError::BadProgram(format!("bad upper bound on var {j}")));
            }
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum LpStatus {
    Optimal,
    Infeasible,
    Unbounded,
}

/// Farkas-type infeasibility certificate. `row_multipliers[i]` pairs with
/// user row `i`, `upper_bound_multipliers[j]` with the bound `x_j <= u_j`.
#[derive(Clone, Debug)]
pub struct FarkasCertificate {
    pub row_multipliers: Vec<f64>,
    pub upper_bound_multipliers: Vec<f64>,
}

impl FarkasCertificate {
    /// Checks the certificate against the program: the combined row
    /// `y^T A + lambda` must be <= 0 on nonnegative variables (== 0 on free
    /// ones), multiplier signs must respect the row senses, and the combined
    /// right-hand side `y^T b + lambda^T u` must be strictly positive.
    pub fn verify(&self, p: &LinearProgram, tol: f64) -> bool {
        let n = p.num_vars();
        if self.row_multipliers.len() != p.num_rows() || self.upper_bound_multipliers.len() != n {
            return false;
        }
        let mut combined = vec![0.0; n];
        let mut rhs = 0.0;
        for (i, y) in self.row_multipliers.iter().enumerate() {
            match p.rows[i].sense {
                Sense::Le if *y > tol => return false,
                Sense::Ge if *y < -tol => return false,
                _ => {}
            }
            for (j, c) in p.rows[i].coeffs.iter().enumerate() {
                combined[j] += y * c;
            }
            rhs += y * p.rows[i].rhs;
        }
        for (j, lam) in self.upper_bound_multipliers.iter().enumerate() {
            if *lam != 0.0 && !p.upper[j].is_finite() {
                return false;
            }
            if *lam > tol {
                return false;
            }
            combined[j] += lam;
            if p.upper[j].is_finite() {
                rhs += lam * p.upper[j];
            }
        }
        for (j, z) in combined.iter().enumerate() {
            if p.free[j] {
                if z.abs() > tol {
                    return false;
                }
            } else if *z > tol {
                return false;
            }
        }
        rhs > tol
    }
}

#[derive(Clone, Debug)]
pub struct LpSolution {
    pub status: LpStatus,
    /// Optimal variable values (empty unless `Optimal`).
    pub primal: Vec<f64>,
    /// One dual value per user row (empty unless `Optimal`). For a
    /// minimization, `<=`-rows get nonpositive duals and `>=`-rows
    /// nonnegative ones; signs flip for maximization.
    pub row_duals: Vec<f64>,
    /// Dual values of the finite upper bounds, per variable.
    pub upper_bound_duals: Vec<f64>,
    pub objective: f64,
    pub certificate: Option<FarkasCertificate>,
    pub feasibility_residual: f64,
    pub complementarity_residual: f64,
    pub pivots: usize,
}

impl LpSolution {
    /// `y^T b + lambda^T u`; equals `objective` at optimality in both senses.
    pub fn dual_objective(&self, p: &LinearProgram) -> f64 {
        let mut v = 0.0;
        for (i, y) in self.row_duals.iter().enumerate() {
            v += y * p.rows[i].rhs;
        }
        for (j, lam) in self.upper_bound_duals.iter().enumerate() {
            if p.upper[j].is_finite() {
                v += lam * p.upper[j];
            }
        }
        v
    }
}

/// Column bookkeeping for the standard form.
#[derive(Clone, Copy, Debug)]
enum ColKind {
    /// Structural column for variable `j` with the given sign (+1, or -1 for
    /// the negative part of a free variable split).
    Structural(usize, f64),
    Slack,
    Artificial,
}

struct Tableau {
    m: usize,
    ncols: usize,
    // m rows of ncols coefficients, then a rhs column
    a: Vec<f64>,
    rhs: Vec<f64>,
    basis: Vec<usize>,
    kinds: Vec<ColKind>,
    // reduced cost rows; last element is minus the current objective value
    cost1: Vec<f64>,
    cost1_val: f64,
    cost2: Vec<f64>,
    cost2_val: f64,
    pivots: usize,
}

impl Tableau {
    #[inline]
    fn at(&self, r: usize, c: usize) -> f64 {
        self.a[r * self.ncols + c]
    }

    fn pivot(&mut self, row: usize, col: usize) {
        let piv = self.at(row, col);
        debug_assert!(piv.abs() > 0.0);
        let inv = 1.0 / piv;
        for c in 0..self.ncols {
            self.a[row * self.ncols + c] *= inv;
        }
        self.rhs[row] *= inv;
        for r in 0..self.m {
            if r == row {
                continue;
            }
            let factor = self.at(r, col);
            if factor == 0.0 {
                continue;
            }
            for c in 0..self.ncols {
                let v = self.at(row, c);
                if v != 0.0 {
                    self.a[r * self.ncols + c] -= factor * v;
                }
            }
            self.a[r * self.ncols + col] = 0.0;
            self.rhs[r] -= factor * self.rhs[row];
            if self.rhs[r].abs() < 1e-14 {
                self.rhs[r] = 0.0;
            }
        }
        let f1 = self.cost1[col];
        if f1 != 0.0 {
            for c in 0..self.ncols {
                self.cost1[c] -= f1 * self.at(row, c);
            }
            self.cost1[col] = 0.0;
            self.cost1_val -= f1 * self.rhs[row];
        }
        let f2 = self.cost2[col];
        if f2 != 0.0 {
            for c in 0..self.ncols {
                self.cost2[c] -= f2 * self.at(row, c);
            }
            self.cost2[col] = 0.0;
            self.cost2_val -= f2 * self.rhs[row];
        }
        self.basis[row] = col;
        self.pivots += 1;
    }

    /// Bland's rule: entering = lowest-index column with negative reduced
    /// cost, leaving = min-ratio row breaking ties by lowest basic index.
    fn run_phase(&mut self, phase_one: bool, max_pivots: usize) -> Result<PhaseEnd, LpError> {
        loop {
            if self.pivots > max_pivots {
                return Err(LpError::NumericalBreakdown(
                    "pivot limit exceeded (cycling not resolved by Bland's rule?)".into(),
                ));
            }
            let cost = if phase_one { &self.cost1 } else { &self.cost2 };
            let mut entering = None;
            for (c, kind) in self.kinds.iter().enumerate() {
                if !phase_one && matches!(kind, ColKind::Artificial) {
                    continue;
                }
                if cost[c] < -REDUCED_COST_TOL {
                    entering = Some(c);
                    break;
                }
            }
            let Some(jin) = entering else {
                return Ok(PhaseEnd::Optimal);
            };
            // drive basic artificials out through this column first; they sit
            // at zero so the pivot is degenerate and feasibility is kept
            if !phase_one {
                let mut art_row = None;
                for r in 0..self.m {
                    if matches!(self.kinds[self.basis[r]], ColKind::Artificial)
                        && self.at(r, jin).abs() > PIVOT_TOL
                    {
                        art_row = Some(r);
                        break;
                    }
                }
                if let Some(r) = art_row {
                    self.pivot(r, jin);
                    continue;
                }
            }
            let mut leave: Option<(usize, f64)> = None;
            for r in 0..self.m {
                let coeff = self.at(r, jin);
                if coeff > PIVOT_TOL {
                    let ratio = self.rhs[r] / coeff;
                    match leave {
                        None => leave = Some((r, ratio)),
                        Some((br, bratio)) => {
                            if ratio < bratio - 1e-12
                                || (ratio <= bratio + 1e-12 && self.basis[r] < self.basis[br])
                            {
                                leave = Some((r, ratio));
                            }
                        }
                    }
                }
            }
            match leave {
                Some((r, _)) => self.pivot(r, jin),
                None => {
                    if phase_one {
                        return Err(LpError::NumericalBreakdown(
                            "phase-one objective unbounded".into(),
                        ));
                    }
                    return Ok(PhaseEnd::Unbounded);
                }
            }
        }
    }
}

enum PhaseEnd {
    Optimal,
    Unbounded,
}

struct StandardForm {
    tableau: Tableau,
    // original standard-form columns (pre-pivot), for fresh basis solves
    a0: Mat,
    rhs0: Vec<f64>,
    phase1_cost: Vec<f64>,
    // per effective row: was it negated during normalization, and which
    // user row / bound it came from
    flipped: Vec<bool>,
    num_user_rows: usize,
    bound_row_var: Vec<usize>,
    min_objective: Vec<f64>,
}

fn build_standard_form(p: &LinearProgram) -> StandardForm {
    let n = p.num_vars();
    let sign = match p.objective_sense {
        Objective::Minimize => 1.0,
        Objective::Maximize => -1.0,
    };
    // effective rows: user rows then upper-bound rows
    let mut eff: Vec<(Vec<f64>, Sense, f64)> = p
        .rows
        .iter()
        .map(|r| (r.coeffs.clone(), r.sense, r.rhs))
        .collect();
    let mut bound_row_var = Vec::new();
    for j in 0..n {
        if p.upper[j].is_finite() {
            let mut coeffs = vec![0.0; n];
            coeffs[j] = 1.0;
            eff.push((coeffs, Sense::Le, p.upper[j]));
            bound_row_var.push(j);
        }
    }
    let m = eff.len();
    // columns: structural (with free splits), then slacks, then artificials
    let mut kinds = Vec::new();
    let mut col_of_var = Vec::with_capacity(n);
    for j in 0..n {
        col_of_var.push(kinds.len());
        kinds.push(ColKind::Structural(j, 1.0));
        if p.free[j] {
            kinds.push(ColKind::Structural(j, -1.0));
        }
    }
    let mut flipped = vec![false; m];
    for (i, row) in eff.iter_mut().enumerate() {
        if row.2 < 0.0 {
            for c in row.0.iter_mut() {
                *c = -*c;
            }
            row.2 = -row.2;
            row.1 = match row.1 {
                Sense::Le => Sense::Ge,
                Sense::Eq => Sense::Eq,
                Sense::Ge => Sense::Le,
            };
            flipped[i] = true;
        }
    }
    let slack_start = kinds.len();
    let mut slack_of_row = vec![usize::MAX; m];
    for (i, row) in eff.iter().enumerate() {
        if !matches!(row.1, Sense::Eq) {
            slack_of_row[i] = kinds.len();
            kinds.push(ColKind::Slack);
        }
    }
    let art_start = kinds.len();
    let mut art_of_row = vec![usize::MAX; m];
    for (i, row) in eff.iter().enumerate() {
        if !matches!(row.1, Sense::Le) {
            art_of_row[i] = kinds.len();
            kinds.push(ColKind::Artificial);
        }
    }
    let ncols = kinds.len();
    let mut a = vec![0.0; m * ncols];
    let mut rhs = vec![0.0; m];
    for (i, (coeffs, sense, b)) in eff.iter().enumerate() {
        for j in 0..n {
            let base = col_of_var[j];
            a[i * ncols + base] = coeffs[j];
            if p.free[j] {
                a[i * ncols + base + 1] = -coeffs[j];
            }
        }
        match sense {
            Sense::Le => a[i * ncols + slack_of_row[i]] = 1.0,
            Sense::Ge => {
                a[i * ncols + slack_of_row[i]] = -1.0;
                a[i * ncols + art_of_row[i]] = 1.0;
            }
            Sense::Eq => a[i * ncols + art_of_row[i]] = 1.0,
        }
        rhs[i] = *b;
    }
    let mut min_objective = vec![0.0; ncols];
    for (c, kind) in kinds.iter().enumerate() {
        if let ColKind::Structural(j, s) = kind {
            min_objective[c] = sign * p.objective[*j] * s;
        }
    }
    let mut phase1_cost = vec![0.0; ncols];
    for c in art_start..ncols {
        phase1_cost[c] = 1.0;
    }
    // initial basis: slack for Le rows, artificial otherwise
    let mut basis = vec![0usize; m];
    for i in 0..m {
        basis[i] = if art_of_row[i] != usize::MAX && matches!(eff[i].1, Sense::Ge | Sense::Eq) {
            art_of_row[i]
        } else {
            slack_of_row[i]
        };
    }
    debug_assert!(art_start >= slack_start);
    // reduced cost rows relative to that basis
    let mut cost1 = phase1_cost.clone();
    let mut cost1_val = 0.0;
    let cost2 = min_objective.clone();
    let cost2_val = 0.0;
    for i in 0..m {
        if phase1_cost[basis[i]] != 0.0 {
            let f = phase1_cost[basis[i]];
            for c in 0..ncols {
                cost1[c] -= f * a[i * ncols + c];
            }
            cost1_val -= f * rhs[i];
        }
        debug_assert_eq!(min_objective[basis[i]], 0.0);
    }
    let a0 = {
        let mut mat = Mat::zeros(m, ncols);
        for r in 0..m {
            for c in 0..ncols {
                mat.set(r, c, a[r * ncols + c]);
            }
        }
        mat
    };
    let rhs0 = rhs.clone();
    StandardForm {
        tableau: Tableau {
            m,
            ncols,
            a,
            rhs,
            basis,
            kinds,
            cost1,
            cost1_val,
            cost2,
            cost2_val,
            pivots: 0,
        },
        a0,
        rhs0,
        phase1_cost,
        flipped,
        num_user_rows: p.num_rows(),
        bound_row_var,
        min_objective,
    }
}

/// Solves `B^T y = c_B` against the original (pre-pivot) columns of the
/// current basis; `y` are the duals of the effective rows.
fn basis_duals(sf: &StandardForm, costs: &[f64]) -> Option<Vec<f64>> {
    let m = sf.tableau.m;
    let mut bt = Mat::zeros(m, m);
    let mut cb = vec![0.0; m];
    for (r, &col) in sf.tableau.basis.iter().enumerate() {
        for i in 0..m {
            bt.set(r, i, sf.a0.get(i, col));
        }
        cb[r] = costs[col];
    }
    solve_dense(&bt, &cb, 1e-12)
}

fn basis_primal(sf: &StandardForm) -> Option<Vec<f64>> {
    let m = sf.tableau.m;
    let mut b = Mat::zeros(m, m);
    for (c, &col) in sf.tableau.basis.iter().enumerate() {
        for r in 0..m {
            b.set(r, c, sf.a0.get(r, col));
        }
    }
    solve_dense(&b, &sf.rhs0, 1e-12)
}

fn map_duals_back(sf: &StandardForm, y_eff: &[f64], sign: f64) -> (Vec<f64>, Vec<f64>) {
    let mut y = y_eff.to_vec();
    for (i, fl) in sf.flipped.iter().enumerate() {
        if *fl {
            y[i] = -y[i];
        }
    }
    let row_duals: Vec<f64> = y[..sf.num_user_rows].iter().map(|v| sign * v).collect();
    let upper_duals: Vec<f64> = y[sf.num_user_rows..].iter().map(|v| sign * v).collect();
    (row_duals, upper_duals)
}

pub fn solve(p: &LinearProgram) -> Result<LpSolution, LpError> {
    p.validate()?;
    let mut sf = build_standard_form(p);
    let max_pivots = 200 * (sf.tableau.m + sf.tableau.ncols) + 20_000;
    let has_artificials = sf.phase1_cost.iter().any(|c| *c != 0.0);
    if has_artificials {
        sf.tableau.run_phase(true, max_pivots)?;
        let phase1_value = -sf.tableau.cost1_val;
        let b_scale = 1.0 + sf.rhs0.iter().fold(0.0f64, |acc, v| acc.max(v.abs()));
        if phase1_value > FEAS_TOL * b_scale * 10.0 {
            let y_eff = basis_duals(&sf, &sf.phase1_cost).ok_or_else(|| {
                LpError::NumericalBreakdown("singular basis extracting certificate".into())
            })?;
            let (rowm, ubm) = map_duals_back(&sf, &y_eff, 1.0);
            let mut upper = vec![0.0; p.num_vars()];
            for (k, var) in sf.bound_row_var.iter().enumerate() {
                upper[*var] = ubm[k];
            }
            let certificate = FarkasCertificate {
                row_multipliers: rowm,
                upper_bound_multipliers: upper,
            };
            return Ok(LpSolution {
                status: LpStatus::Infeasible,
                primal: Vec::new(),
                row_duals: Vec::new(),
                upper_bound_duals: Vec::new(),
                objective: f64::NAN,
                certificate: Some(certificate),
                feasibility_residual: phase1_value,
                complementarity_residual: 0.0,
                pivots: sf.tableau.pivots,
            });
        }
    }
    match sf.tableau.run_phase(false, max_pivots)? {
        PhaseEnd::Unbounded => Ok(LpSolution {
            status: LpStatus::Unbounded,
            primal: Vec::new(),
            row_duals: Vec::new(),
            upper_bound_duals: Vec::new(),
            objective: match p.objective_sense {
                Objective::Minimize => f64::NEG_INFINITY,
                Objective::Maximize => f64::INFINITY,
            },
            certificate: None,
            feasibility_residual: 0.0,
            complementarity_residual: 0.0,
            pivots: sf.tableau.pivots,
        }),
        PhaseEnd::Optimal => extract_optimal(p, &sf),
    }
}

fn extract_optimal(p: &LinearProgram, sf: &StandardForm) -> Result<LpSolution, LpError> {
    let n = p.num_vars();
    // fresh primal from the basis; falls back to tableau values if singular
    let xb = basis_primal(sf);
    let mut col_values = vec![0.0; sf.tableau.ncols];
    match xb {
        Some(vals) => {
            for (r, &col) in sf.tableau.basis.iter().enumerate() {
                col_values[col] = vals[r];
            }
        }
        None => {
            for (r, &col) in sf.tableau.basis.iter().enumerate() {
                col_values[col] = sf.tableau.rhs[r];
            }
        }
    }
    let mut primal = vec![0.0; n];
    for (c, kind) in sf.tableau.kinds.iter().enumerate() {
        if let ColKind::Structural(j, s) = kind {
            primal[*j] += s * col_values[c];
        }
    }
    let mut objective = 0.0;
    for j in 0..n {
        objective += p.objective[j] * primal[j];
    }
    let sign = match p.objective_sense {
        Objective::Minimize => 1.0,
        Objective::Maximize => -1.0,
    };
    let y_eff = basis_duals(sf, &sf.min_objective)
        .ok_or_else(|| LpError::NumericalBreakdown("singular basis extracting duals".into()))?;
    let (row_duals, ubm) = map_duals_back(sf, &y_eff, sign);
    let mut upper_bound_duals = vec![0.0; n];
    for (k, var) in sf.bound_row_var.iter().enumerate() {
        upper_bound_duals[*var] = ubm[k];
    }
    // residuals against the original program
    let mut feas = 0.0f64;
    for row in &p.rows {
        let lhs: f64 = row
            .coeffs
            .iter()
            .zip(&primal)
            .map(|(c, x)| c * x)
            .sum();
        let viol = match row.sense {
            Sense::Le => (lhs - row.rhs).max(0.0),
            Sense::Ge => (row.rhs - lhs).max(0.0),
            Sense::Eq => (lhs - row.rhs).abs(),
        };
        feas = feas.max(viol);
    }
    for j in 0..n {
        if !p.free[j] {
            feas = feas.max(-primal[j]);
        }
        if p.upper[j].is_finite() {
            feas = feas.max(primal[j] - p.upper[j]);
        }
    }
    // complementary slackness: row duals against slacks, reduced costs
    // against variable values
    let mut comp = 0.0f64;
    for (i, row) in p.rows.iter().enumerate() {
        let lhs: f64 = row
            .coeffs
            .iter()
            .zip(&primal)
            .map(|(c, x)| c * x)
            .sum();
        comp = comp.max((row_duals[i] * (lhs - row.rhs)).abs());
    }
    for j in 0..n {
        // reduced cost in min form: c_j - y^T a_j - lambda_j
        let mut rc = sign * p.objective[j];
        for (i, row) in p.rows.iter().enumerate() {
            rc -= sign * row_duals[i] * row.coeffs[j];
        }
        rc -= sign * upper_bound_duals[j];
        if p.free[j] {
            comp = comp.max(rc.abs());
        } else {
            comp = comp.max((rc * primal[j]).abs());
        }
        if p.upper[j].is_finite() {
            comp = comp.max((upper_bound_duals[j] * (primal[j] - p.upper[j])).abs());
        }
    }
    let scale = 1.0 + objective.abs();
    if feas > 1e-6 * scale {
        return Err(LpError::NumericalBreakdown(format!(
            "optimal basis infeasible beyond recovery (residual {feas:.3e})"
        )));
    }
    Ok(LpSolution {
        status: LpStatus::Optimal,
        primal,
        row_duals,
        upper_bound_duals,
        objective,
        certificate: None,
        feasibility_residual: feas,
        complementarity_residual: comp,
        pivots: sf.tableau.pivots,
    })
}

/// Phase-one feasibility check. Returns the Farkas certificate when the
/// constraint system is infeasible.
pub fn feasibility(p: &LinearProgram) -> Result<(bool, Option<FarkasCertificate>), LpError> {
    let mut probe = p.clone();
    probe.objective = vec![0.0; p.num_vars()];
    probe.objective_sense = Objective::Minimize;
    let sol = solve(&probe)?;
    match sol.status {
        LpStatus::Infeasible => Ok((false, sol.certificate)),
        _ => Ok((true, None)),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn min_with_lower_row() {
        // min x s.t. x >= 1
        let mut p = LinearProgram::minimize(vec![1.0]);
        p.add_row(vec![1.0], Sense::Ge, 1.0);
        let s = solve(&p).unwrap();
        assert_eq!(s.status, LpStatus::Optimal);
        assert!((s.primal[0] - 1.0).abs() < 1e-9);
        assert!((s.objective - 1.0).abs() < 1e-9);
    }

    #[test]
    fn max_box() {
        // max x + y s.t. x + y <= 1
        let mut p = LinearProgram::maximize(vec![1.0, 1.0]);
        p.add_row(vec![1.0, 1.0], Sense::Le, 1.0);
        let s = solve(&p).unwrap();
        assert_eq!(s.status, LpStatus::Optimal);
        assert!((s.objective - 1.0).abs() < 1e-9);
        // strong duality through the returned duals
        assert!((s.dual_objective(&p) - s.objective).abs() < 1e-9);
    }

    #[test]
    fn contradictory_rows_infeasible() {
        // min 0 s.t. x <= -1, x >= 0
        let mut p = LinearProgram::minimize(vec![0.0]);
        p.add_row(vec![1.0], Sense::Le, -1.0);
        let s = solve(&p).unwrap();
        assert_eq!(s.status, LpStatus::Infeasible);
        assert!(s.certificate.unwrap().verify(&p, 1e-9));
    }

    #[test]
    fn feasibility_box_member() {
        // x = 0.5 with 0 <= x <= 1
        let mut p = LinearProgram::minimize(vec![0.0]);
        p.add_row(vec![1.0], Sense::Eq, 0.5);
        p.set_upper(0, 1.0);
        let (ok, cert) = feasibility(&p).unwrap();
        assert!(ok);
        assert!(cert.is_none());
    }

    #[test]
    fn feasibility_box_violation_certified() {
        // x = 2 with 0 <= x <= 1
        let mut p = LinearProgram::minimize(vec![0.0]);
        p.add_row(vec![1.0], Sense::Eq, 2.0);
        p.set_upper(0, 1.0);
        let (ok, cert) = feasibility(&p).unwrap();
        assert!(!ok);
        assert!(cert.unwrap().verify(&p, 1e-9));
    }

    #[test]
    fn empty_constraints_feasible() {
        let p = LinearProgram::minimize(vec![0.0, 0.0]);
        let (ok, _) = feasibility(&p).unwrap();
        assert!(ok);
    }

    #[test]
    fn unbounded_detected() {
        let p = LinearProgram::maximize(vec![1.0]);
        let s = solve(&p).unwrap();
        assert_eq!(s.status, LpStatus::Unbounded);
    }

    #[test]
    fn free_variable_split() {
        // min x s.t. x >= -3, x free
        let mut p = LinearProgram::minimize(vec![1.0]);
        p.set_free(0);
        p.add_row(vec![1.0], Sense::Ge, -3.0);
        let s = solve(&p).unwrap();
        assert_eq!(s.status, LpStatus::Optimal);
        assert!((s.primal[0] + 3.0).abs() < 1e-9);
    }

    #[test]
    fn equality_with_negative_rhs() {
        let mut p = LinearProgram::minimize(vec![1.0, 2.0]);
        p.add_row(vec![1.0, -1.0], Sense::Eq, -2.0);
        let s = solve(&p).unwrap();
        assert_eq!(s.status, LpStatus::Optimal);
        // x - y = -2, minimize x + 2y -> x = 0, y = 2
        assert!((s.primal[0]).abs() < 1e-9);
        assert!((s.primal[1] - 2.0).abs() < 1e-9);
    }

    #[test]
    fn beale_cycling_instance() {
        // classic cycling example for Dantzig's rule; Bland must terminate
        let mut p = LinearProgram::minimize(vec![-0.75, 150.0, -0.02, 6.0]);
        p.add_row(vec![0.25, -60.0, -0.04, 9.0], Sense::Le, 0.0);
        p.add_row(vec![0.5, -90.0, -0.02, 3.0], Sense::Le, 0.0);
        p.add_row(vec![0.0, 0.0, 1.0, 0.0], Sense::Le, 1.0);
        let s = solve(&p).unwrap();
        assert_eq!(s.status, LpStatus::Optimal);
        assert!((s.objective + 0.05).abs() < 1e-9);
    }

    #[test]
    fn degenerate_equalities_redundant_row() {
        // duplicated equality rows force a redundant artificial in the basis
        let mut p = LinearProgram::minimize(vec![1.0, 1.0]);
        p.add_row(vec![1.0, 1.0], Sense::Eq, 1.0);
        p.add_row(vec![1.0, 1.0], Sense::Eq, 1.0);
        let s = solve(&p).unwrap();
        assert_eq!(s.status, LpStatus::Optimal);
        assert!((s.objective - 1.0).abs() < 1e-9);
    }

    #[test]
    fn duals_satisfy_strong_duality_random() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
        for _ in 0..30 {
            let n = rng.random_range(2..6);
            let m = rng.random_range(1..5);
            let mut p =
                LinearProgram::minimize((0..n).map(|_| rng.random_range(0.1..2.0)).collect());
            for _ in 0..m {
                let coeffs: Vec<f64> = (0..n).map(|_| rng.random_range(0.0..1.0)).collect();
                p.add_row(coeffs, Sense::Ge, rng.random_range(0.1..1.0));
            }
            let s = solve(&p).unwrap();
            assert_eq!(s.status, LpStatus::Optimal);
            let gap = (s.objective - s.dual_objective(&p)).abs();
            assert!(
                gap <= DUALITY_REL_TOL * (1.0 + s.objective.abs()),
                "gap {gap}"
            );
            assert!(s.feasibility_residual <= FEAS_TOL);
            assert!(s.complementarity_residual <= 1e-9 * (1.0 + s.objective.abs()));
        }
    }

    #[test]
    fn deterministic_pivot_sequence() {
        let build = || {
            let mut p = LinearProgram::maximize(vec![3.0, 5.0, 4.0]);
            p.add_row(vec![2.0, 3.0, 0.0], Sense::Le, 8.0);
            p.add_row(vec![0.0, 2.0, 5.0], Sense::Le, 10.0);
            p.add_row(vec![3.0, 2.0, 4.0], Sense::Le, 15.0);
            p
        };
        let a = solve(&build()).unwrap();
        let b = solve(&build()).unwrap();
        assert_eq!(a.pivots, b.pivots);
        assert_eq!(a.primal, b.primal);
        assert_eq!(a.row_duals, b.row_duals);
    }
}
