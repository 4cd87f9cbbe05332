//! Dense simplex solver for [`LinearProgram`].
//!
//! Fixed variables are substituted and the equality rows are eliminated by
//! Gauss-Jordan reduction, leaving `min c^T y  s.t.  G y <= h` over free `y`.
//! That problem is solved through its dual `min h^T l  s.t.  G^T l = -c, l >= 0`
//! with a two-phase tableau method; `y` is read off the simplex multipliers.
//! Each dual column is a primal inequality, so a basis is a set of active
//! constraints and can be carried between structurally similar programs.

use std::collections::HashMap;

use log::{debug, warn};
use thiserror::Error;

use crate::lp::{LinearProgram, RowLabel};

/// Identity of a primal constraint, stable across programs with the same row labels.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ConstraintKey {
    Row(RowLabel),
    Lower(usize),
    Upper(usize),
}

/// Set of constraints that were active in a previous solution.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct BasisHint {
    pub active: Vec<ConstraintKey>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolverOptions {
    pub feasibility_tol: f64,
    pub optimality_tol: f64,
    pub pivot_tol: f64,
    /// Switch to Bland's rule after `bland_factor * (rows + cols)` pivots in one phase.
    pub bland_factor: usize,
    /// Give up after `pivot_limit_factor * (rows + cols)` pivots in total.
    pub pivot_limit_factor: usize,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self { feasibility_tol: 1e-7, optimality_tol: 1e-9, pivot_tol: 1e-10, bland_factor: 5, pivot_limit_factor: 50 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LpStatus {
    Optimal,
    Infeasible,
    Unbounded,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LpSolution {
    pub status: LpStatus,
    /// Primal point; for `Unbounded` a feasible point, for `Infeasible` empty.
    pub x: Vec<f64>,
    pub objective: f64,
    pub pivots: usize,
    pub phase_two_pivots: usize,
    pub basis: BasisHint,
    pub warm_started: bool,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SolverError {
    #[error("invalid linear program: {0}")]
    Invalid(String),
    #[error("numerical breakdown after {pivots} pivots: {reason}")]
    Numerical { pivots: usize, reason: String },
    #[error("pivot limit of {0} exceeded")]
    PivotLimit(usize),
}

pub fn solve(lp: &LinearProgram, hint: Option<&BasisHint>, opts: &SolverOptions) -> Result<LpSolution, SolverError> {
    lp.validate().map_err(SolverError::Invalid)?;
    let infeasible = |warm| LpSolution {
        status: LpStatus::Infeasible,
        x: Vec::new(),
        objective: f64::NAN,
        pivots: 0,
        phase_two_pivots: 0,
        basis: BasisHint::default(),
        warm_started: warm,
    };
    let reduced = match Reduction::build(lp, opts) {
        Some(r) => r,
        None => return Ok(infeasible(false)),
    };
    let form = match reduced.inequality_form(lp, opts) {
        Some(f) => f,
        None => return Ok(infeasible(false)),
    };
    debug!(
        "lp {} vars / {} eq / {} ineq reduced to {} free vars and {} rows",
        lp.num_vars(),
        lp.equalities.len(),
        lp.inequalities.len(),
        form.cols,
        form.rows.len()
    );

    let hint_cols = hint.and_then(|h| map_hint(h, &form, lp.num_vars()));
    let warm = hint_cols.as_ref().is_some_and(|c| !c.is_empty());
    let hint_cols = hint_cols.unwrap_or_default();

    let mut stats = Stats::default();
    let limit = opts.pivot_limit_factor * (form.rows.len() + form.cols) + 1000;
    let outcome = solve_dual(&form, &form.cost, &hint_cols, opts, &mut stats, limit)?;
    let finish = |status, y: &[f64], basis: Vec<usize>, stats: &Stats| {
        let x = reduced.expand(y);
        let objective = lp.objective(&x);
        LpSolution {
            status,
            objective,
            x,
            pivots: stats.total,
            phase_two_pivots: stats.phase_two,
            basis: BasisHint { active: basis.into_iter().map(|i| form.keys[i]).collect() },
            warm_started: warm,
        }
    };
    match outcome {
        DualOutcome::Optimal { y, basis } => {
            let sol = finish(LpStatus::Optimal, &y, basis, &stats);
            let viol = lp.max_violation(&sol.x);
            if viol > 1e-5 {
                warn!("lp solution violates constraints by {viol:.3e}");
            }
            Ok(sol)
        }
        DualOutcome::Unbounded => Ok(LpSolution { pivots: stats.total, phase_two_pivots: stats.phase_two, ..infeasible(warm) }),
        DualOutcome::Infeasible => {
            // The dual has no feasible point: the primal is unbounded or infeasible.
            let zero = vec![0.0; form.cols];
            match solve_dual(&form, &zero, &[], opts, &mut stats, limit)? {
                DualOutcome::Optimal { y, basis } => {
                    let mut sol = finish(LpStatus::Unbounded, &y, basis, &stats);
                    sol.objective = f64::NEG_INFINITY;
                    Ok(sol)
                }
                _ => Ok(LpSolution { pivots: stats.total, phase_two_pivots: stats.phase_two, ..infeasible(warm) }),
            }
        }
    }
}

fn map_hint(hint: &BasisHint, form: &InequalityForm, n: usize) -> Option<Vec<usize>> {
    if hint.active.iter().any(|k| matches!(*k, ConstraintKey::Lower(j) | ConstraintKey::Upper(j) if j >= n)) {
        warn!("basis hint references variables outside the program, starting cold");
        return None;
    }
    let mut index = HashMap::with_capacity(form.keys.len());
    for (i, k) in form.keys.iter().enumerate() {
        index.entry(*k).or_insert(i);
    }
    let mut cols: Vec<usize> = hint.active.iter().filter_map(|k| index.get(k).copied()).collect();
    cols.sort_unstable();
    cols.dedup();
    if cols.is_empty() && !hint.active.is_empty() {
        debug!("no hinted constraint survives in this program, starting cold");
    }
    Some(cols)
}

/// Affine map from the free variables `y` back to the original `x`.
struct Reduction {
    cols: usize,
    constant: Vec<f64>,
    coeffs: Vec<Vec<(usize, f64)>>,
}

impl Reduction {
    fn build(lp: &LinearProgram, opts: &SolverOptions) -> Option<Self> {
        let n = lp.num_vars();
        if lp.lower.iter().zip(&lp.upper).any(|(lo, hi)| lo > hi) {
            return None;
        }
        let fixed: Vec<bool> = (0..n).map(|j| lp.lower[j] == lp.upper[j]).collect();

        // Dense equality system with fixed variables moved to the right-hand side.
        let mut rows: Vec<Vec<f64>> = Vec::with_capacity(lp.equalities.len());
        let mut rhs = Vec::with_capacity(lp.equalities.len());
        let mut scale = Vec::with_capacity(lp.equalities.len());
        for row in &lp.equalities {
            let mut dense = vec![0.0; n];
            let mut b = row.rhs;
            for &(j, a) in &row.coeffs {
                if fixed[j] {
                    b -= a * lp.lower[j];
                } else {
                    dense[j] += a;
                }
            }
            scale.push(row.coeffs.iter().fold(row.rhs.abs(), |m, &(_, a)| m.max(a.abs())).max(1.0));
            rows.push(dense);
            rhs.push(b);
        }

        let mut pivot_of_row: Vec<Option<usize>> = vec![None; rows.len()];
        let mut is_pivot = vec![false; n];
        for i in 0..rows.len() {
            let mut best = (0.0, usize::MAX);
            for (j, &a) in rows[i].iter().enumerate() {
                if !is_pivot[j] && !fixed[j] && a.abs() > best.0 {
                    best = (a.abs(), j);
                }
            }
            if best.0 <= 1e-9 * scale[i] {
                if rhs[i].abs() > opts.feasibility_tol * scale[i] {
                    debug!("inconsistent equality row {i}: residual {:.3e}", rhs[i]);
                    return None;
                }
                continue;
            }
            let p = best.1;
            let inv = 1.0 / rows[i][p];
            rows[i].iter_mut().for_each(|a| *a *= inv);
            rhs[i] *= inv;
            rows[i][p] = 1.0;
            let nz: Vec<(usize, f64)> =
                rows[i].iter().enumerate().filter(|(_, a)| **a != 0.0).map(|(j, a)| (j, *a)).collect();
            let (b_i, pivot_row) = (rhs[i], i);
            for (k, row) in rows.iter_mut().enumerate() {
                if k == pivot_row {
                    continue;
                }
                let f = row[p];
                if f != 0.0 {
                    for &(j, a) in &nz {
                        row[j] -= f * a;
                    }
                    row[p] = 0.0;
                    rhs[k] -= f * b_i;
                }
            }
            pivot_of_row[i] = Some(p);
            is_pivot[p] = true;
        }

        let mut free_index = vec![usize::MAX; n];
        let mut cols = 0;
        for j in 0..n {
            if !fixed[j] && !is_pivot[j] {
                free_index[j] = cols;
                cols += 1;
            }
        }
        let mut constant = vec![0.0; n];
        let mut coeffs = vec![Vec::new(); n];
        for j in 0..n {
            if fixed[j] {
                constant[j] = lp.lower[j];
            } else if !is_pivot[j] {
                coeffs[j] = vec![(free_index[j], 1.0)];
            }
        }
        for (i, p) in pivot_of_row.iter().enumerate() {
            if let Some(p) = *p {
                constant[p] = rhs[i];
                coeffs[p] = rows[i]
                    .iter()
                    .enumerate()
                    .filter(|&(j, a)| j != p && *a != 0.0 && free_index[j] != usize::MAX)
                    .map(|(j, a)| (free_index[j], -a))
                    .collect();
            }
        }
        Some(Self { cols, constant, coeffs })
    }

    fn expand(&self, y: &[f64]) -> Vec<f64> {
        self.constant
            .iter()
            .zip(&self.coeffs)
            .map(|(c, terms)| c + terms.iter().map(|&(k, a)| a * y[k]).sum::<f64>())
            .collect()
    }

    fn inequality_form(&self, lp: &LinearProgram, opts: &SolverOptions) -> Option<InequalityForm> {
        let mut form = InequalityForm { cols: self.cols, ..Default::default() };
        form.cost = vec![0.0; self.cols];
        for (j, &c) in lp.cost.iter().enumerate() {
            for &(k, a) in &self.coeffs[j] {
                form.cost[k] += c * a;
            }
        }
        let mut push = |dense: Vec<f64>, rhs: f64, key: ConstraintKey| -> bool {
            let norm = dense.iter().fold(0.0f64, |m, a| m.max(a.abs()));
            if norm <= 1e-12 {
                return rhs >= -opts.feasibility_tol * (1.0 + rhs.abs());
            }
            // Cancellation in the elimination leaves round-off where zeros belong.
            form.rows.push(dense.iter().map(|a| if a.abs() <= 1e-13 * norm { 0.0 } else { a / norm }).collect());
            form.rhs.push(rhs / norm);
            form.keys.push(key);
            true
        };
        for row in &lp.inequalities {
            let mut dense = vec![0.0; self.cols];
            let mut b = row.rhs;
            for &(j, a) in &row.coeffs {
                b -= a * self.constant[j];
                for &(k, c) in &self.coeffs[j] {
                    dense[k] += a * c;
                }
            }
            if !push(dense, b, ConstraintKey::Row(row.label)) {
                return None;
            }
        }
        for j in 0..lp.num_vars() {
            if self.coeffs[j].is_empty() {
                if lp.lower[j] == lp.upper[j] {
                    continue;
                }
                let v = self.constant[j];
                let tol = opts.feasibility_tol * (1.0 + v.abs());
                if v < lp.lower[j] - tol || v > lp.upper[j] + tol {
                    return None;
                }
                continue;
            }
            if lp.lower[j].is_finite() {
                let mut dense = vec![0.0; self.cols];
                for &(k, a) in &self.coeffs[j] {
                    dense[k] -= a;
                }
                if !push(dense, self.constant[j] - lp.lower[j], ConstraintKey::Lower(j)) {
                    return None;
                }
            }
            if lp.upper[j].is_finite() {
                let mut dense = vec![0.0; self.cols];
                for &(k, a) in &self.coeffs[j] {
                    dense[k] += a;
                }
                if !push(dense, lp.upper[j] - self.constant[j], ConstraintKey::Upper(j)) {
                    return None;
                }
            }
        }
        Some(form)
    }
}

/// `min cost^T y  s.t.  rows * y <= rhs`, `y` free.
#[derive(Default)]
struct InequalityForm {
    cols: usize,
    cost: Vec<f64>,
    rows: Vec<Vec<f64>>,
    rhs: Vec<f64>,
    keys: Vec<ConstraintKey>,
}

#[derive(Default)]
struct Stats {
    total: usize,
    phase_two: usize,
}

enum DualOutcome {
    Optimal { y: Vec<f64>, basis: Vec<usize> },
    Unbounded,
    Infeasible,
}

#[derive(Debug, PartialEq, Eq)]
enum PhaseEnd {
    Optimal,
    Unbounded,
}

const MAX_ROUNDS: usize = 4;
/// Pivots between refactorizations of the basis inverse.
const REFACTOR_EVERY: usize = 64;

fn solve_dual(
    form: &InequalityForm,
    c: &[f64],
    hint: &[usize],
    opts: &SolverOptions,
    stats: &mut Stats,
    limit: usize,
) -> Result<DualOutcome, SolverError> {
    if form.cols == 0 {
        return Ok(DualOutcome::Optimal { y: Vec::new(), basis: Vec::new() });
    }
    let rhs_scale = 1.0 + c.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let mut start: Vec<usize> = hint.to_vec();
    for round in 0..MAX_ROUNDS {
        let mut s = Revised::new(form, c, opts);
        s.install(&start);
        s.cover_negative();
        if s.needs_phase_one() {
            s.phase_two = false;
            if s.iterate(stats, limit)? == PhaseEnd::Unbounded {
                return Err(SolverError::Numerical {
                    pivots: stats.total,
                    reason: "phase one reported an unbounded ray".into(),
                });
            }
            let residual = s.artificial_mass();
            if residual > opts.feasibility_tol * rhs_scale {
                debug!("dual phase one residual {residual:.3e}");
                return Ok(DualOutcome::Infeasible);
            }
            s.drive_out_artificials();
        }
        s.phase_two = true;
        let before = stats.phase_two;
        let end = s.iterate(stats, limit)?;
        stats.phase_two = before + s.phase_two_pivots;
        if end == PhaseEnd::Unbounded {
            return Ok(DualOutcome::Unbounded);
        }
        let y = s.primal();
        if y.iter().any(|v| !v.is_finite()) {
            return Err(SolverError::Numerical { pivots: stats.total, reason: "non-finite primal point".into() });
        }
        let basis = s.real_basis();
        if s.certifies(&y) {
            return Ok(DualOutcome::Optimal { y, basis });
        }
        debug!("solution not certified after round {round}, restarting from its basis");
        start = basis;
    }
    Err(SolverError::Numerical {
        pivots: stats.total,
        reason: format!("no certified optimum after {MAX_ROUNDS} restarts"),
    })
}

/// Column of the dual standard form: a primal constraint, the artificial of
/// a dual row, or the auxiliary column used to repair a negative start.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Col {
    Real(usize),
    Art(usize),
    Omega,
}

/// Revised simplex on `S G^T l = -S c, l >= 0` with an explicit dense basis
/// inverse, refactored every [`REFACTOR_EVERY`] pivots. `S` flips rows so the
/// right-hand side is nonnegative.
struct Revised<'a> {
    form: &'a InequalityForm,
    opts: &'a SolverOptions,
    n: usize,
    m: usize,
    sign: Vec<f64>,
    b: Vec<f64>,
    basis: Vec<Col>,
    is_basic: Vec<bool>,
    binv: Vec<f64>,
    x: Vec<f64>,
    omega: Vec<f64>,
    phase_two: bool,
    since_refactor: usize,
    phase_two_pivots: usize,
}

impl<'a> Revised<'a> {
    fn new(form: &'a InequalityForm, c: &[f64], opts: &'a SolverOptions) -> Self {
        let n = form.cols;
        let m = form.rows.len();
        let sign: Vec<f64> = c.iter().map(|&ci| if -ci < 0.0 { -1.0 } else { 1.0 }).collect();
        let b: Vec<f64> = c.iter().zip(&sign).map(|(ci, s)| -s * ci).collect();
        let mut binv = vec![0.0; n * n];
        for i in 0..n {
            binv[i * n + i] = 1.0;
        }
        Self {
            form,
            opts,
            n,
            m,
            x: b.clone(),
            sign,
            b,
            basis: (0..n).map(Col::Art).collect(),
            is_basic: vec![false; m],
            binv,
            omega: vec![0.0; n],
            phase_two: false,
            since_refactor: 0,
            phase_two_pivots: 0,
        }
    }

    fn order(&self, c: Col) -> usize {
        match c {
            Col::Real(j) => j,
            Col::Art(i) => self.m + i,
            Col::Omega => self.m + self.n,
        }
    }

    fn column(&self, c: Col) -> Vec<f64> {
        match c {
            Col::Real(j) => self.form.rows[j].iter().zip(&self.sign).map(|(g, s)| g * s).collect(),
            Col::Art(i) => {
                let mut e = vec![0.0; self.n];
                e[i] = 1.0;
                e
            }
            Col::Omega => self.omega.clone(),
        }
    }

    fn cost(&self, c: Col) -> f64 {
        match (c, self.phase_two) {
            (Col::Real(j), true) => self.form.rhs[j],
            (Col::Real(_), false) => 0.0,
            (_, true) => 0.0,
            (_, false) => 1.0,
        }
    }

    /// `B^{-1} a` for a column of the program.
    fn ftran(&self, c: Col) -> Vec<f64> {
        let n = self.n;
        match c {
            Col::Art(i) => (0..n).map(|k| self.binv[k * n + i]).collect(),
            _ => {
                let a = self.column(c);
                self.binv.chunks_exact(n).map(|row| row.iter().zip(&a).map(|(p, q)| p * q).sum()).collect()
            }
        }
    }

    /// Simplex multipliers times the row signs, i.e. the primal point.
    fn rho(&self) -> Vec<f64> {
        let n = self.n;
        let mut pi = vec![0.0; n];
        for (k, &col) in self.basis.iter().enumerate() {
            let cb = self.cost(col);
            if cb != 0.0 {
                for (p, v) in pi.iter_mut().zip(&self.binv[k * n..(k + 1) * n]) {
                    *p += cb * v;
                }
            }
        }
        pi.iter().zip(&self.sign).map(|(p, s)| p * s).collect()
    }

    fn pivot(&mut self, r: usize, col: Col, alpha: &[f64]) {
        let n = self.n;
        let ar = alpha[r];
        let theta = self.x[r] / ar;
        for (k, (xk, &ak)) in self.x.iter_mut().zip(alpha).enumerate() {
            if k != r {
                *xk -= ak * theta;
            }
        }
        self.x[r] = theta;
        let row_r: Vec<f64> = self.binv[r * n..(r + 1) * n].iter().map(|v| v / ar).collect();
        for (k, row) in self.binv.chunks_exact_mut(n).enumerate() {
            if k == r {
                row.copy_from_slice(&row_r);
                continue;
            }
            let f = alpha[k];
            if f != 0.0 {
                for (v, &p) in row.iter_mut().zip(&row_r) {
                    *v -= f * p;
                }
            }
        }
        if let Col::Real(j) = self.basis[r] {
            self.is_basic[j] = false;
        }
        if let Col::Real(j) = col {
            self.is_basic[j] = true;
        }
        self.basis[r] = col;
        self.since_refactor += 1;
    }

    /// Recomputes the inverse from the basis columns; dependent columns are
    /// swapped for artificials.
    fn refactor(&mut self) {
        let n = self.n;
        for _ in 0..2 {
            let mut a = vec![0.0; n * n];
            for (k, &col) in self.basis.iter().enumerate() {
                for (i, v) in self.column(col).into_iter().enumerate() {
                    a[i * n + k] = v;
                }
            }
            let mut inv = vec![0.0; n * n];
            for i in 0..n {
                inv[i * n + i] = 1.0;
            }
            let mut used = vec![false; n];
            let mut pivot_row = vec![usize::MAX; n];
            let mut dependent = Vec::new();
            for k in 0..n {
                let mut best = (1e-11, usize::MAX);
                for i in 0..n {
                    if !used[i] && a[i * n + k].abs() > best.0 {
                        best = (a[i * n + k].abs(), i);
                    }
                }
                let p = best.1;
                if p == usize::MAX {
                    dependent.push(k);
                    continue;
                }
                used[p] = true;
                pivot_row[k] = p;
                let inv_p = 1.0 / a[p * n + k];
                for v in &mut a[p * n..(p + 1) * n] {
                    *v *= inv_p;
                }
                for v in &mut inv[p * n..(p + 1) * n] {
                    *v *= inv_p;
                }
                let (ap, ip) = (a[p * n..(p + 1) * n].to_vec(), inv[p * n..(p + 1) * n].to_vec());
                for i in 0..n {
                    let f = a[i * n + k];
                    if i == p || f == 0.0 {
                        continue;
                    }
                    for (v, q) in a[i * n..(i + 1) * n].iter_mut().zip(&ap) {
                        *v -= f * q;
                    }
                    for (v, q) in inv[i * n..(i + 1) * n].iter_mut().zip(&ip) {
                        *v -= f * q;
                    }
                }
            }
            if dependent.is_empty() {
                for k in 0..n {
                    let p = pivot_row[k];
                    self.binv[k * n..(k + 1) * n].copy_from_slice(&inv[p * n..(p + 1) * n]);
                }
                break;
            }
            debug!("basis has {} dependent columns, replacing them by artificials", dependent.len());
            let mut free_rows = (0..n).filter(|&i| !used[i]);
            for k in dependent {
                if let Col::Real(j) = self.basis[k] {
                    self.is_basic[j] = false;
                }
                self.basis[k] = Col::Art(free_rows.next().expect("one free row per dependent column"));
            }
        }
        self.x = self.binv.chunks_exact(n).map(|row| row.iter().zip(&self.b).map(|(p, q)| p * q).sum()).collect();
        self.since_refactor = 0;
    }

    /// Pivots the given constraint columns into artificial positions.
    fn install(&mut self, cols: &[usize]) {
        for &j in cols {
            if j >= self.m || self.is_basic[j] {
                continue;
            }
            let alpha = self.ftran(Col::Real(j));
            let mut best = (1e-9, None);
            for (k, a) in alpha.iter().enumerate() {
                if !matches!(self.basis[k], Col::Real(_)) && a.abs() > best.0 {
                    best = (a.abs(), Some(k));
                }
            }
            if let Some(r) = best.1 {
                self.pivot(r, Col::Real(j), &alpha);
            }
        }
        if self.since_refactor > 0 {
            self.refactor();
        }
    }

    /// Makes the basic solution nonnegative by bringing in the auxiliary column.
    fn cover_negative(&mut self) {
        let n = self.n;
        let mut alpha = vec![0.0; n];
        let mut worst = (-1e-11, None);
        for k in 0..n {
            let v = self.x[k];
            if v < 0.0 {
                if v < -1e-11 {
                    alpha[k] = -1.0;
                    if v < worst.0 {
                        worst = (v, Some(k));
                    }
                } else {
                    self.x[k] = 0.0;
                }
            }
        }
        let Some(r) = worst.1 else { return };
        let mut omega = vec![0.0; n];
        for (k, &a) in alpha.iter().enumerate() {
            if a != 0.0 {
                for (o, v) in omega.iter_mut().zip(self.column(self.basis[k])) {
                    *o -= v;
                }
            }
        }
        self.omega = omega;
        self.pivot(r, Col::Omega, &alpha);
    }

    fn needs_phase_one(&self) -> bool {
        self.basis.iter().zip(&self.x).any(|(c, &v)| !matches!(c, Col::Real(_)) && v > 1e-12)
    }

    fn artificial_mass(&self) -> f64 {
        self.basis.iter().zip(&self.x).filter(|(c, _)| !matches!(c, Col::Real(_))).map(|(_, v)| v.max(0.0)).sum()
    }

    fn drive_out_artificials(&mut self) {
        let n = self.n;
        let tol = 1e-9f64.max(self.opts.pivot_tol);
        for r in 0..n {
            if matches!(self.basis[r], Col::Real(_)) {
                continue;
            }
            let w: Vec<f64> = self.binv[r * n..(r + 1) * n].iter().zip(&self.sign).map(|(p, s)| p * s).collect();
            let mut best = (tol, None);
            for (j, g) in self.form.rows.iter().enumerate() {
                if self.is_basic[j] {
                    continue;
                }
                let a: f64 = g.iter().zip(&w).map(|(p, q)| p * q).sum();
                if a.abs() > best.0 {
                    best = (a.abs(), Some(j));
                }
            }
            if let Some(j) = best.1 {
                let alpha = self.ftran(Col::Real(j));
                self.pivot(r, Col::Real(j), &alpha);
            }
        }
    }

    /// Primal simplex over the constraint columns. In phase two basic
    /// artificials are held at zero by letting any nonzero entry block.
    fn iterate(&mut self, stats: &mut Stats, limit: usize) -> Result<PhaseEnd, SolverError> {
        let opts = self.opts;
        let bland_after = opts.bland_factor * (self.m + self.n);
        let mut count = 0usize;
        loop {
            if self.since_refactor >= REFACTOR_EVERY {
                self.refactor();
            }
            let rho = self.rho();
            let bland = count >= bland_after;
            let mut enter = None;
            let mut best = -opts.optimality_tol;
            for (j, g) in self.form.rows.iter().enumerate() {
                if self.is_basic[j] {
                    continue;
                }
                let d = self.cost(Col::Real(j)) - g.iter().zip(&rho).map(|(p, q)| p * q).sum::<f64>();
                if d < best {
                    enter = Some(j);
                    if bland {
                        break;
                    }
                    best = d;
                }
            }
            let Some(q) = enter else {
                if self.since_refactor > 0 {
                    self.refactor();
                    continue;
                }
                return Ok(PhaseEnd::Optimal);
            };

            let alpha = self.ftran(Col::Real(q));
            let mut leave: Option<usize> = None;
            let (mut best_ratio, mut best_piv) = (f64::INFINITY, 0.0);
            for (k, &a) in alpha.iter().enumerate() {
                let a = if self.phase_two && !matches!(self.basis[k], Col::Real(_)) { a.abs() } else { a };
                if a <= opts.pivot_tol {
                    continue;
                }
                let ratio = self.x[k].max(0.0) / a;
                let tie = 1e-12 * (1.0 + best_ratio.abs().min(1e12));
                let take = match leave {
                    None => true,
                    Some(_) if ratio < best_ratio - tie => true,
                    Some(l) if ratio <= best_ratio + tie => {
                        if bland {
                            self.order(self.basis[k]) < self.order(self.basis[l])
                        } else {
                            a > best_piv
                        }
                    }
                    _ => false,
                };
                if take {
                    leave = Some(k);
                    best_ratio = ratio.min(best_ratio);
                    best_piv = a;
                }
            }
            let Some(r) = leave else {
                // Trust a ray only on a fresh factorization.
                if self.since_refactor > 0 {
                    self.refactor();
                    continue;
                }
                return Ok(PhaseEnd::Unbounded);
            };
            self.pivot(r, Col::Real(q), &alpha);
            count += 1;
            stats.total += 1;
            if self.phase_two {
                self.phase_two_pivots += 1;
            }
            if stats.total > limit {
                return Err(SolverError::PivotLimit(limit));
            }
        }
    }

    fn real_basis(&self) -> Vec<usize> {
        let mut b: Vec<usize> =
            self.basis.iter().filter_map(|c| if let Col::Real(j) = *c { Some(j) } else { None }).collect();
        b.sort_unstable();
        b
    }

    fn primal(&mut self) -> Vec<f64> {
        self.phase_two = true;
        if self.since_refactor > 0 {
            self.refactor();
        }
        self.rho()
    }

    /// Checks the point against the rows: primal feasibility, nonnegative
    /// duals on real columns, zero artificials, small dual residual and gap.
    fn certifies(&self, y: &[f64]) -> bool {
        let tol = self.opts.feasibility_tol;
        let scale = 1.0 + self.b.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let mut residual: Vec<f64> = self.b.iter().map(|v| -v).collect();
        let mut dual_objective = 0.0;
        for (k, &col) in self.basis.iter().enumerate() {
            let l = self.x[k];
            match col {
                Col::Real(j) => {
                    if l < -tol * scale {
                        return false;
                    }
                    dual_objective += l * self.form.rhs[j];
                    for ((r, g), s) in residual.iter_mut().zip(&self.form.rows[j]).zip(&self.sign) {
                        *r += l * g * s;
                    }
                }
                _ => {
                    if l.abs() > tol * scale {
                        return false;
                    }
                }
            }
        }
        if residual.iter().any(|r| r.abs() > tol * scale) {
            return false;
        }
        let c_dot_y: f64 = self.b.iter().zip(&self.sign).zip(y).map(|((b, s), v)| -b * s * v).sum();
        if (c_dot_y + dual_objective).abs() > tol * scale * (1.0 + c_dot_y.abs()) {
            return false;
        }
        self.form.rows.iter().zip(&self.form.rhs).all(|(g, &h)| {
            let gy: f64 = g.iter().zip(y).map(|(a, b)| a * b).sum();
            gy <= h + tol * (1.0 + h.abs())
        })
    }
}
