//! Dense two-phase simplex.
//!
//! Problems are stated as
//!
//! ```text
//! minimize    c·z
//! subject to  A_eq z  = b_eq
//!             A_ub z <= b_ub
//!             lower_j <= z_j <= upper_j
//! ```
//!
//! and solved on a dense tableau. Every hull query in this crate reduces to an
//! LP with a handful of rows and up to a few thousand columns, so nothing here
//! tries to be sparse.

use thiserror::Error;

/// Default primal feasibility / optimality tolerance.
pub const DEFAULT_TOL: f64 = 1e-9;

/// Pivot elements smaller than this are treated as zero.
const PIVOT_EPS: f64 = 1e-9;
const HARRIS_SLACK: f64 = 1e-9;

/// Row-major dense matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Matrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    /// An empty matrix with `cols` columns, for appending rows.
    pub fn empty(cols: usize) -> Self {
        Self::zeros(0, cols)
    }

    pub fn from_rows<R: AsRef<[f64]>>(rows: &[R]) -> Result<Self, LpError> {
        let cols = rows.first().map_or(0, |r| r.as_ref().len());
        let mut m = Self::empty(cols);
        for r in rows {
            m.push_row(r.as_ref())?;
        }
        Ok(m)
    }

    pub fn push_row(&mut self, row: &[f64]) -> Result<(), LpError> {
        if row.len() != self.cols {
            return Err(LpError::Malformed(format!(
                "row has {} entries, matrix has {} columns",
                row.len(),
                self.cols
            )));
        }
        self.data.extend_from_slice(row);
        self.rows += 1;
        Ok(())
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn row_mut(&mut self, i: usize) -> &mut [f64] {
        &mut self.data[i * self.cols..(i + 1) * self.cols]
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VarBounds {
    pub lower: Option<f64>,
    pub upper: Option<f64>,
}

impl VarBounds {
    pub const NON_NEGATIVE: VarBounds = VarBounds {
        lower: Some(0.0),
        upper: None,
    };
    pub const FREE: VarBounds = VarBounds {
        lower: None,
        upper: None,
    };

    pub fn new(lower: Option<f64>, upper: Option<f64>) -> Self {
        Self { lower, upper }
    }
}

impl Default for VarBounds {
    fn default() -> Self {
        Self::NON_NEGATIVE
    }
}

/// A linear program in inequality/equality form. Variables default to `z >= 0`.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearProgram {
    pub objective: Vec<f64>,
    pub a_eq: Matrix,
    pub b_eq: Vec<f64>,
    pub a_ub: Matrix,
    pub b_ub: Vec<f64>,
    pub bounds: Vec<VarBounds>,
}

impl LinearProgram {
    pub fn minimize(objective: Vec<f64>) -> Self {
        let n = objective.len();
        Self {
            a_eq: Matrix::empty(n),
            b_eq: Vec::new(),
            a_ub: Matrix::empty(n),
            b_ub: Vec::new(),
            bounds: vec![VarBounds::default(); n],
            objective,
        }
    }

    /// A pure feasibility problem over `n` variables.
    pub fn feasibility(n: usize) -> Self {
        Self::minimize(vec![0.0; n])
    }

    pub fn num_vars(&self) -> usize {
        self.objective.len()
    }

    pub fn eq(mut self, row: &[f64], rhs: f64) -> Result<Self, LpError> {
        self.a_eq.push_row(row)?;
        self.b_eq.push(rhs);
        Ok(self)
    }

    pub fn le(mut self, row: &[f64], rhs: f64) -> Result<Self, LpError> {
        self.a_ub.push_row(row)?;
        self.b_ub.push(rhs);
        Ok(self)
    }

    pub fn ge(self, row: &[f64], rhs: f64) -> Result<Self, LpError> {
        let neg: Vec<f64> = row.iter().map(|v| -v).collect();
        self.le(&neg, -rhs)
    }

    pub fn bound(mut self, var: usize, lower: Option<f64>, upper: Option<f64>) -> Result<Self, LpError> {
        let n = self.num_vars();
        let slot = self
            .bounds
            .get_mut(var)
            .ok_or_else(|| LpError::Malformed(format!("variable {var} out of range (n = {n})")))?;
        *slot = VarBounds::new(lower, upper);
        Ok(self)
    }

    fn validate(&self) -> Result<(), LpError> {
        let n = self.num_vars();
        if self.a_eq.cols() != n || self.a_ub.cols() != n {
            return Err(LpError::Malformed(format!(
                "constraint matrices have {} / {} columns, objective has {n}",
                self.a_eq.cols(),
                self.a_ub.cols()
            )));
        }
        if self.a_eq.rows() != self.b_eq.len() {
            return Err(LpError::Malformed(format!(
                "A_eq has {} rows but b_eq has {}",
                self.a_eq.rows(),
                self.b_eq.len()
            )));
        }
        if self.a_ub.rows() != self.b_ub.len() {
            return Err(LpError::Malformed(format!(
                "A_ub has {} rows but b_ub has {}",
                self.a_ub.rows(),
                self.b_ub.len()
            )));
        }
        if self.bounds.len() != n {
            return Err(LpError::Malformed(format!(
                "{} variable bounds for {n} variables",
                self.bounds.len()
            )));
        }
        let finite = self
            .objective
            .iter()
            .chain(&self.a_eq.data)
            .chain(&self.b_eq)
            .chain(&self.a_ub.data)
            .chain(&self.b_ub)
            .all(|v| v.is_finite());
        let bounds_ok = self
            .bounds
            .iter()
            .all(|b| b.lower.map_or(true, f64::is_finite) && b.upper.map_or(true, f64::is_finite));
        if !finite || !bounds_ok {
            return Err(LpError::Malformed("non-finite coefficient".into()));
        }
        Ok(())
    }

    /// Largest constraint violation of `z`, including variable bounds.
    pub fn max_violation(&self, z: &[f64]) -> f64 {
        let dot = |row: &[f64]| row.iter().zip(z).map(|(a, b)| a * b).sum::<f64>();
        let mut worst = 0.0_f64;
        for i in 0..self.a_eq.rows() {
            worst = worst.max((dot(self.a_eq.row(i)) - self.b_eq[i]).abs());
        }
        for i in 0..self.a_ub.rows() {
            worst = worst.max(dot(self.a_ub.row(i)) - self.b_ub[i]);
        }
        for (b, v) in self.bounds.iter().zip(z) {
            if let Some(l) = b.lower {
                worst = worst.max(l - v);
            }
            if let Some(u) = b.upper {
                worst = worst.max(v - u);
            }
        }
        worst
    }

    pub fn objective_at(&self, z: &[f64]) -> f64 {
        self.objective.iter().zip(z).map(|(c, v)| c * v).sum()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LpStatus {
    Optimal,
    Infeasible,
    Unbounded,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LpOutcome {
    pub status: LpStatus,
    pub solution: Option<Vec<f64>>,
    pub objective_value: Option<f64>,
}

impl LpOutcome {
    fn optimal(solution: Vec<f64>, objective_value: f64) -> Self {
        Self {
            status: LpStatus::Optimal,
            solution: Some(solution),
            objective_value: Some(objective_value),
        }
    }

    fn without_solution(status: LpStatus) -> Self {
        Self {
            status,
            solution: None,
            objective_value: None,
        }
    }

    pub fn is_optimal(&self) -> bool {
        self.status == LpStatus::Optimal
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LpError {
    #[error("malformed linear program: {0}")]
    Malformed(String),
    #[error("simplex gave up after {iterations} pivots")]
    IterationLimit { iterations: usize },
    #[error("numerical breakdown: returned point violates constraints by {violation:e}")]
    Numerical { violation: f64 },
    #[error("tolerance must be positive and finite, got {0}")]
    BadTolerance(f64),
}

impl LpError {
    /// Solver failures are distinct from an honest Infeasible or Unbounded verdict.
    pub fn is_solver_failure(&self) -> bool {
        matches!(self, LpError::IterationLimit { .. } | LpError::Numerical { .. })
    }
}

/// Entering-variable rule.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PivotRule {
    /// Lowest-index improving column. Never cycles.
    Bland,
    /// Most-negative reduced cost, switching permanently to Bland's rule after
    /// a run of degenerate pivots.
    DantzigThenBland,
}

#[derive(Debug, Clone, Copy)]
pub struct SimplexOptions {
    pub tol: f64,
    pub rule: PivotRule,
    /// Pivot cap as a multiple of (columns + rows) of the standard form.
    pub iteration_factor: usize,
}

impl Default for SimplexOptions {
    fn default() -> Self {
        Self {
            tol: DEFAULT_TOL,
            rule: PivotRule::DantzigThenBland,
            iteration_factor: 50,
        }
    }
}

/// Solve `lp` to tolerance `tol` with the default pivoting rule, retrying
/// under pure Bland if that run breaks down numerically or stalls.
pub fn solve(lp: &LinearProgram, tol: f64) -> Result<LpOutcome, LpError> {
    let opts = SimplexOptions {
        tol,
        ..SimplexOptions::default()
    };
    match solve_with(lp, &opts) {
        Err(e) if e.is_solver_failure() => {
            log::debug!("simplex retry under Bland's rule after: {e}");
            solve_with(
                lp,
                &SimplexOptions {
                    rule: PivotRule::Bland,
                    ..opts
                },
            )
        }
        other => other,
    }
}

pub fn solve_with(lp: &LinearProgram, opts: &SimplexOptions) -> Result<LpOutcome, LpError> {
    if !(opts.tol > 0.0 && opts.tol.is_finite()) {
        return Err(LpError::BadTolerance(opts.tol));
    }
    lp.validate()?;
    let std = StandardForm::build(lp);
    let mut tab = Tableau::new(&std);
    let cap = opts.iteration_factor.max(1) * (tab.ncols + tab.nrows).max(1);
    let mut pivots = 0usize;

    if tab.num_artificial > 0 {
        tab.load_phase_one();
        match tab.run(opts, cap, &mut pivots)? {
            Phase::Optimal => {}
            // Phase one is bounded below by zero.
            Phase::Unbounded => return Err(LpError::Numerical { violation: f64::INFINITY }),
        }
        let infeasibility = -tab.obj_rhs();
        if infeasibility > opts.tol * (1.0 + tab.rhs_scale) {
            return Ok(LpOutcome::without_solution(LpStatus::Infeasible));
        }
        tab.evict_artificials();
    }

    tab.load_phase_two(&std.cost);
    match tab.run(opts, cap, &mut pivots)? {
        Phase::Unbounded => return Ok(LpOutcome::without_solution(LpStatus::Unbounded)),
        Phase::Optimal => {}
    }

    let y = tab.basic_solution();
    let z = std.recover(&y);
    let violation = lp.max_violation(&z);
    let allowed = 1e-6 * (1.0 + tab.rhs_scale);
    if violation > allowed {
        return Err(LpError::Numerical { violation });
    }
    let value = lp.objective_at(&z);
    Ok(LpOutcome::optimal(z, value))
}

/// How an original variable maps onto non-negative standard-form columns.
#[derive(Debug, Clone, Copy)]
enum VarMap {
    /// z = offset + y
    Shift { col: usize, offset: f64 },
    /// z = offset - y
    Flip { col: usize, offset: f64 },
    /// z = y+ - y-
    Split { pos: usize, neg: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum RowKind {
    Eq,
    Le,
}

/// `min cost·y, rows (= or <=) rhs, y >= 0`.
struct StandardForm {
    nvars: usize,
    cost: Vec<f64>,
    rows: Vec<(Vec<f64>, RowKind, f64)>,
    maps: Vec<VarMap>,
}

impl StandardForm {
    fn build(lp: &LinearProgram) -> Self {
        let mut maps = Vec::with_capacity(lp.num_vars());
        let mut nvars = 0usize;
        let mut upper_rows = Vec::new();
        for b in &lp.bounds {
            match (b.lower, b.upper) {
                (Some(l), u) => {
                    maps.push(VarMap::Shift { col: nvars, offset: l });
                    if let Some(u) = u {
                        upper_rows.push((nvars, u - l));
                    }
                    nvars += 1;
                }
                (None, Some(u)) => {
                    maps.push(VarMap::Flip { col: nvars, offset: u });
                    nvars += 1;
                }
                (None, None) => {
                    maps.push(VarMap::Split { pos: nvars, neg: nvars + 1 });
                    nvars += 2;
                }
            }
        }

        let translate = |row: &[f64], rhs: f64| -> (Vec<f64>, f64) {
            let mut out = vec![0.0; nvars];
            let mut rhs = rhs;
            for (a, m) in row.iter().zip(&maps) {
                if *a == 0.0 {
                    continue;
                }
                match *m {
                    VarMap::Shift { col, offset } => {
                        out[col] += a;
                        rhs -= a * offset;
                    }
                    VarMap::Flip { col, offset } => {
                        out[col] -= a;
                        rhs -= a * offset;
                    }
                    VarMap::Split { pos, neg } => {
                        out[pos] += a;
                        out[neg] -= a;
                    }
                }
            }
            (out, rhs)
        };

        let mut rows = Vec::with_capacity(lp.a_eq.rows() + lp.a_ub.rows() + upper_rows.len());
        for i in 0..lp.a_eq.rows() {
            let (r, b) = translate(lp.a_eq.row(i), lp.b_eq[i]);
            rows.push((r, RowKind::Eq, b));
        }
        for i in 0..lp.a_ub.rows() {
            let (r, b) = translate(lp.a_ub.row(i), lp.b_ub[i]);
            rows.push((r, RowKind::Le, b));
        }
        for (col, width) in upper_rows {
            let mut r = vec![0.0; nvars];
            r[col] = 1.0;
            rows.push((r, RowKind::Le, width));
        }

        let (cost, _) = translate(&lp.objective, 0.0);
        Self { nvars, cost, rows, maps }
    }

    fn recover(&self, y: &[f64]) -> Vec<f64> {
        self.maps
            .iter()
            .map(|m| match *m {
                VarMap::Shift { col, offset } => offset + y[col],
                VarMap::Flip { col, offset } => offset - y[col],
                VarMap::Split { pos, neg } => y[pos] - y[neg],
            })
            .collect()
    }
}

enum Phase {
    Optimal,
    Unbounded,
}

struct Tableau {
    nrows: usize,
    /// structural + slack + artificial columns (excludes rhs)
    ncols: usize,
    nstruct: usize,
    first_artificial: usize,
    num_artificial: usize,
    width: usize,
    /// (nrows + 1) x width; last row holds reduced costs, last column the rhs.
    t: Vec<f64>,
    basis: Vec<usize>,
    rhs_scale: f64,
}

impl Tableau {
    fn new(std: &StandardForm) -> Self {
        let nrows = std.rows.len();
        let nslack = std.rows.iter().filter(|r| r.1 == RowKind::Le).count();
        // A row needs an artificial unless it is `<=` with a non-negative rhs.
        let needs_art: Vec<bool> = std
            .rows
            .iter()
            .map(|(_, k, b)| !(*k == RowKind::Le && *b >= 0.0))
            .collect();
        let num_artificial = needs_art.iter().filter(|&&a| a).count();
        let nstruct = std.nvars;
        let first_artificial = nstruct + nslack;
        let ncols = first_artificial + num_artificial;
        let width = ncols + 1;
        let mut t = vec![0.0; (nrows + 1) * width];
        let mut basis = vec![0usize; nrows];
        let mut slack = nstruct;
        let mut art = first_artificial;
        let mut rhs_scale = 0.0_f64;
        for (i, (row, kind, rhs)) in std.rows.iter().enumerate() {
            let sign = if *rhs < 0.0 { -1.0 } else { 1.0 };
            let r = &mut t[i * width..(i + 1) * width];
            for (dst, a) in r[..nstruct].iter_mut().zip(row) {
                *dst = sign * a;
            }
            r[ncols] = sign * rhs;
            rhs_scale = rhs_scale.max(rhs.abs());
            if *kind == RowKind::Le {
                r[slack] = sign;
                if !needs_art[i] {
                    basis[i] = slack;
                }
                slack += 1;
            }
            if needs_art[i] {
                r[art] = 1.0;
                basis[i] = art;
                art += 1;
            }
        }
        Self {
            nrows,
            ncols,
            nstruct,
            first_artificial,
            num_artificial,
            width,
            t,
            basis,
            rhs_scale,
        }
    }

    #[inline]
    fn at(&self, i: usize, j: usize) -> f64 {
        self.t[i * self.width + j]
    }

    fn obj_row(&self) -> &[f64] {
        &self.t[self.nrows * self.width..]
    }

    fn obj_rhs(&self) -> f64 {
        self.t[self.nrows * self.width + self.ncols]
    }

    fn is_artificial(&self, j: usize) -> bool {
        j >= self.first_artificial
    }

    /// Reduced costs for `min Σ artificials`.
    fn load_phase_one(&mut self) {
        let w = self.width;
        let m = self.nrows;
        for v in &mut self.t[m * w..] {
            *v = 0.0;
        }
        for i in 0..m {
            if self.is_artificial(self.basis[i]) {
                for j in 0..w {
                    let a = self.t[i * w + j];
                    self.t[m * w + j] -= a;
                }
            }
        }
        for j in self.first_artificial..self.ncols {
            self.t[m * w + j] = 0.0;
        }
    }

    /// Reduced costs for the true objective over the current basis.
    fn load_phase_two(&mut self, cost: &[f64]) {
        let w = self.width;
        let m = self.nrows;
        for j in 0..w {
            self.t[m * w + j] = if j < self.nstruct { cost[j] } else { 0.0 };
        }
        for i in 0..m {
            let b = self.basis[i];
            let cb = if b < self.nstruct { cost[b] } else { 0.0 };
            if cb != 0.0 {
                for j in 0..w {
                    let a = self.t[i * w + j];
                    self.t[m * w + j] -= cb * a;
                }
            }
        }
    }

    /// Pivot zero-valued artificials out of the basis where possible. Rows
    /// where none can leave are redundant and keep their artificial pinned at zero.
    fn evict_artificials(&mut self) {
        for i in 0..self.nrows {
            if !self.is_artificial(self.basis[i]) {
                continue;
            }
            let col = (0..self.first_artificial)
                .filter(|&j| self.at(i, j).abs() > 1e-9)
                .max_by(|&a, &b| self.at(i, a).abs().total_cmp(&self.at(i, b).abs()));
            if let Some(j) = col {
                self.pivot(i, j);
            }
        }
    }

    fn pivot(&mut self, row: usize, col: usize) {
        let w = self.width;
        let p = self.t[row * w + col];
        let inv = 1.0 / p;
        for v in &mut self.t[row * w..(row + 1) * w] {
            *v *= inv;
        }
        self.t[row * w + col] = 1.0;
        let (head, tail) = self.t.split_at_mut(row * w);
        let (prow, rest) = tail.split_at_mut(w);
        let fix = |r: &mut [f64]| {
            let f = r[col];
            if f != 0.0 {
                for (dst, src) in r.iter_mut().zip(prow.iter()) {
                    *dst -= f * src;
                }
                r[col] = 0.0;
            }
        };
        for r in head.chunks_exact_mut(w) {
            fix(r);
        }
        for r in rest.chunks_exact_mut(w) {
            fix(r);
        }
        self.basis[row] = col;
    }

    fn entering(&self, rule: PivotRule, bland: bool, tol: f64) -> Option<usize> {
        let d = &self.obj_row()[..self.first_artificial];
        if bland || rule == PivotRule::Bland {
            d.iter().position(|&v| v < -tol)
        } else {
            let mut best = None;
            let mut best_v = -tol;
            for (j, &v) in d.iter().enumerate() {
                if v < best_v {
                    best_v = v;
                    best = Some(j);
                }
            }
            best
        }
    }

    /// Ratio test. Under Bland's rule: the min-ratio row, ties to the lowest
    /// basic index among pivots not much smaller than the largest tied one. Otherwise a two-pass (Harris) test: rows whose
    /// ratio is within the feasibility slack of the minimum compete, and the
    /// largest pivot element wins.
    fn leaving(&self, col: usize, bland: bool) -> Option<usize> {
        let rhs = |i: usize| self.at(i, self.ncols).max(0.0);
        let candidates = (0..self.nrows).filter(|&i| self.at(i, col) > PIVOT_EPS);
        if bland {
            let ratio = |i: usize| rhs(i) / self.at(i, col);
            let theta = candidates.clone().map(ratio).fold(f64::INFINITY, f64::min);
            if !theta.is_finite() {
                return None;
            }
            let ties: Vec<usize> = candidates
                .filter(|&i| ratio(i) <= theta + 1e-12 * (1.0 + theta))
                .collect();
            let biggest = ties.iter().map(|&i| self.at(i, col)).fold(0.0, f64::max);
            return ties
                .into_iter()
                .filter(|&i| self.at(i, col) >= 1e-3 * biggest)
                .min_by_key(|&i| self.basis[i]);
        }
        let bound = candidates
            .clone()
            .map(|i| (rhs(i) + HARRIS_SLACK) / self.at(i, col))
            .fold(f64::INFINITY, f64::min);
        if !bound.is_finite() {
            return None;
        }
        candidates
            .filter(|&i| rhs(i) / self.at(i, col) <= bound)
            .max_by(|&a, &b| self.at(a, col).total_cmp(&self.at(b, col)).then(b.cmp(&a)))
    }

    fn run(&mut self, opts: &SimplexOptions, cap: usize, pivots: &mut usize) -> Result<Phase, LpError> {
        let mut bland = false;
        let mut degenerate_run = 0usize;
        loop {
            let Some(col) = self.entering(opts.rule, bland, opts.tol) else {
                return Ok(Phase::Optimal);
            };
            let Some(row) = self.leaving(col, bland || opts.rule == PivotRule::Bland) else {
                return Ok(Phase::Unbounded);
            };
            if *pivots >= cap {
                return Err(LpError::IterationLimit { iterations: *pivots });
            }
            if self.at(row, self.ncols).abs() <= PIVOT_EPS {
                degenerate_run += 1;
                if degenerate_run > 8 {
                    bland = true;
                }
            } else {
                degenerate_run = 0;
            }
            self.pivot(row, col);
            *pivots += 1;
        }
    }

    fn basic_solution(&self) -> Vec<f64> {
        let mut y = vec![0.0; self.nstruct];
        for i in 0..self.nrows {
            let b = self.basis[i];
            if b < self.nstruct {
                y[b] = self.at(i, self.ncols).max(0.0);
            }
        }
        y
    }
}
