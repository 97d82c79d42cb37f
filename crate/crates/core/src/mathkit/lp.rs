//! Small dense linear programs with box-bounded variables.
//!
//! Two-phase primal simplex over a dense tableau, using the bounded-variable
//! ratio test so that variable bounds never become explicit rows. The entering
//! column follows Bland's smallest-index rule. Among (near-)tied leaving rows
//! the largest pivot wins, with exact ties going to the smallest basis index,
//! so runs are reproducible bit-for-bit.
//!
//! The tableau is rebuilt from the original rows every few pivots. A rebuild
//! that meets a singular basis rolls back to the last good one and retries
//! with rebuilds after every pivot, skipping columns that caused trouble.

use thiserror::Error;

/// Largest instance the solver accepts.
pub const MAX_VARIABLES: usize = 200;

const PIVOT_TOL: f64 = 1e-9;
const COST_TOL: f64 = 1e-11;
const FEAS_TOL: f64 = 1e-9;
const MAX_ITERATIONS: usize = 100_000;
/// Pivots between rebuilds of the tableau from the original rows.
const REFRESH_EVERY: usize = 40;
/// Blocking steps this close to the minimum count as ties in the ratio test.
const TIE_TOL: f64 = 1e-12;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LpError {
    #[error("infeasible: no assignment satisfies the constraints")]
    Infeasible,
    #[error("unbounded objective")]
    Unbounded,
    #[error("malformed program: {0}")]
    Malformed(String),
    #[error("iteration limit reached")]
    IterationLimit,
    #[error("numerically singular basis")]
    Numerical,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Sense {
    Minimize,
    Maximize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Relation {
    Le,
    Ge,
    Eq,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Constraint {
    pub coeffs: Vec<f64>,
    pub relation: Relation,
    pub rhs: f64,
}

impl Constraint {
    pub fn new(coeffs: Vec<f64>, relation: Relation, rhs: f64) -> Self {
        Constraint {
            coeffs,
            relation,
            rhs,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LinearProgram {
    pub objective: Vec<f64>,
    pub sense: Sense,
    pub constraints: Vec<Constraint>,
    /// `(lower, upper)` per variable. Lower bounds must be finite; upper
    /// bounds may be `f64::INFINITY`.
    pub bounds: Vec<(f64, f64)>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LpSolution {
    pub optimum: f64,
    pub assignment: Vec<f64>,
}

/// Solves the program and breaks ties between optimal vertices by taking the
/// lexicographically smallest assignment.
pub fn solve_bounded_lp(lp: &LinearProgram) -> Result<LpSolution, LpError> {
    let first = lp.optimum()?;
    let n = lp.objective.len();
    let scale = 1.0 + first.optimum.abs();
    // Pin the objective to its optimum (within tolerance), then minimise
    // each coordinate in turn.
    let mut pinned = lp.clone();
    let relation = match lp.sense {
        Sense::Minimize => Relation::Le,
        Sense::Maximize => Relation::Ge,
    };
    let slack = 1e-12 * scale;
    let bound = match lp.sense {
        Sense::Minimize => first.optimum + slack,
        Sense::Maximize => first.optimum - slack,
    };
    pinned
        .constraints
        .push(Constraint::new(lp.objective.clone(), relation, bound));
    pinned.sense = Sense::Minimize;
    let mut assignment = first.assignment.clone();
    for k in 0..n {
        let mut objective = vec![0.0; n];
        objective[k] = 1.0;
        pinned.objective = objective;
        match pinned.optimum() {
            Ok(sol) => {
                let v = sol.assignment[k];
                let hi = (v + 1e-10 * (1.0 + v.abs())).min(pinned.bounds[k].1);
                pinned.bounds[k] = (v.max(pinned.bounds[k].0), hi.max(v));
                assignment = sol.assignment;
            }
            // Numerical trouble in the refinement never invalidates the
            // optimum already found; keep the last good vertex.
            Err(_) => break,
        }
    }
    let optimum = lp
        .objective
        .iter()
        .zip(&assignment)
        .map(|(c, x)| c * x)
        .sum();
    Ok(LpSolution {
        optimum,
        assignment,
    })
}

impl LinearProgram {
    fn validate(&self) -> Result<(), LpError> {
        let n = self.objective.len();
        if n == 0 {
            return Err(LpError::Malformed("no variables".into()));
        }
        if n > MAX_VARIABLES {
            return Err(LpError::Malformed(format!(
                "{n} variables exceeds the limit of {MAX_VARIABLES}"
            )));
        }
        if self.bounds.len() != n {
            return Err(LpError::Malformed(format!(
                "{} bounds for {n} variables",
                self.bounds.len()
            )));
        }
        for (j, &(lo, hi)) in self.bounds.iter().enumerate() {
            if !lo.is_finite() || hi.is_nan() || hi < lo {
                return Err(LpError::Malformed(format!(
                    "variable {j} has invalid bounds [{lo}, {hi}]"
                )));
            }
        }
        for (i, c) in self.constraints.iter().enumerate() {
            if c.coeffs.len() != n || !c.rhs.is_finite() || c.coeffs.iter().any(|a| !a.is_finite())
            {
                return Err(LpError::Malformed(format!("constraint {i} is malformed")));
            }
        }
        if self.objective.iter().any(|c| !c.is_finite()) {
            return Err(LpError::Malformed("non-finite objective".into()));
        }
        Ok(())
    }

    /// Optimal value and the vertex reached by the simplex path, without the
    /// lexicographic refinement of [`solve_bounded_lp`].
    pub fn optimum(&self) -> Result<LpSolution, LpError> {
        self.validate()?;
        let mut t = Tableau::new(self);
        t.phase_one()?;
        let sign = match self.sense {
            Sense::Minimize => 1.0,
            Sense::Maximize => -1.0,
        };
        let mut cost = vec![0.0; t.cols];
        for (j, c) in self.objective.iter().enumerate() {
            cost[j] = sign * c;
        }
        t.run(&cost)?;
        let n = self.objective.len();
        let assignment: Vec<f64> = (0..n)
            .map(|j| t.x[j].clamp(self.bounds[j].0, self.bounds[j].1))
            .collect();
        let optimum = self
            .objective
            .iter()
            .zip(&assignment)
            .map(|(c, x)| c * x)
            .sum();
        Ok(LpSolution {
            optimum,
            assignment,
        })
    }
}

struct Snapshot {
    a: Vec<f64>,
    x: Vec<f64>,
    status: Vec<Status>,
    basis: Vec<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Status {
    Basic,
    AtLower,
    AtUpper,
}

/// Columns: structural `0..n`, one slack per row `n..n+m`, one artificial per
/// row `n+m..n+2m`.
struct Tableau {
    rows: usize,
    cols: usize,
    n_struct: usize,
    a: Vec<f64>,
    /// The sign-adjusted rows the tableau started from, and their
    /// right-hand sides, for rebuilding it without accumulated error.
    orig: Vec<f64>,
    rhs: Vec<f64>,
    lower: Vec<f64>,
    upper: Vec<f64>,
    x: Vec<f64>,
    status: Vec<Status>,
    basis: Vec<usize>,
}

impl Tableau {
    fn new(lp: &LinearProgram) -> Self {
        let n = lp.objective.len();
        let m = lp.constraints.len();
        let cols = n + 2 * m;
        let mut a = vec![0.0; m * cols];
        let mut lower = vec![0.0; cols];
        let mut upper = vec![f64::INFINITY; cols];
        let mut x = vec![0.0; cols];
        let mut status = vec![Status::AtLower; cols];
        for j in 0..n {
            lower[j] = lp.bounds[j].0;
            upper[j] = lp.bounds[j].1;
            x[j] = lower[j];
        }
        let mut basis = Vec::with_capacity(m);
        let mut rhs = Vec::with_capacity(m);
        for (i, c) in lp.constraints.iter().enumerate() {
            let row = &mut a[i * cols..(i + 1) * cols];
            row[..n].copy_from_slice(&c.coeffs);
            match c.relation {
                Relation::Le => row[n + i] = 1.0,
                Relation::Ge => row[n + i] = -1.0,
                Relation::Eq => upper[n + i] = 0.0,
            }
            let activity: f64 = c.coeffs.iter().zip(&x[..n]).map(|(p, q)| p * q).sum();
            let residual = c.rhs - activity;
            // Artificial column is +-1 so that it starts non-negative; scale
            // the row so the basis inverse stays the identity.
            let sign = if residual < 0.0 { -1.0 } else { 1.0 };
            for v in row.iter_mut() {
                *v *= sign;
            }
            row[n + m + i] = 1.0;
            rhs.push(sign * c.rhs);
            let art = n + m + i;
            x[art] = residual.abs();
            status[art] = Status::Basic;
            basis.push(art);
        }
        Tableau {
            rows: m,
            cols,
            n_struct: n,
            orig: a.clone(),
            a,
            rhs,
            lower,
            upper,
            x,
            status,
            basis,
        }
    }

    fn artificial(&self, j: usize) -> bool {
        j >= self.n_struct + self.rows
    }

    fn phase_one(&mut self) -> Result<(), LpError> {
        let mut cost = vec![0.0; self.cols];
        for c in cost.iter_mut().skip(self.n_struct + self.rows) {
            *c = 1.0;
        }
        self.run(&cost)?;
        let infeasibility: f64 = (self.n_struct + self.rows..self.cols)
            .map(|j| self.x[j])
            .sum();
        let scale = 1.0
            + (0..self.rows)
                .map(|i| self.x[self.basis[i]].abs())
                .fold(0.0, f64::max);
        if infeasibility > FEAS_TOL * scale {
            return Err(LpError::Infeasible);
        }
        // Drive artificials out of the basis where a structural or slack
        // column can replace them; rows with no such column are redundant.
        for r in 0..self.rows {
            if !self.artificial(self.basis[r]) {
                continue;
            }
            let entering = (0..self.n_struct + self.rows).find(|&j| {
                self.status[j] != Status::Basic && self.a[r * self.cols + j].abs() > 1e-9
            });
            if let Some(j) = entering {
                let leaving = self.basis[r];
                self.pivot(r, j);
                self.status[leaving] = Status::AtLower;
                self.x[leaving] = 0.0;
            }
        }
        for j in self.n_struct + self.rows..self.cols {
            self.lower[j] = 0.0;
            self.upper[j] = 0.0;
            if self.status[j] != Status::Basic {
                self.x[j] = 0.0;
            }
        }
        Ok(())
    }

    /// Recomputes `B⁻¹A` and the basic values from the original rows by
    /// Gauss-Jordan elimination with partial pivoting. Returns false, leaving
    /// the tableau untouched, if the basis is numerically singular.
    fn refresh(&mut self) -> bool {
        let (m, cols) = (self.rows, self.cols);
        let w = m + cols + 1;
        let mut aug = vec![0.0; m * w];
        for i in 0..m {
            let row = &mut aug[i * w..(i + 1) * w];
            for (k, &j) in self.basis.iter().enumerate() {
                row[k] = self.orig[i * cols + j];
            }
            row[m..m + cols].copy_from_slice(&self.orig[i * cols..(i + 1) * cols]);
            let mut r = self.rhs[i];
            for j in 0..cols {
                if self.status[j] != Status::Basic && self.x[j] != 0.0 {
                    r -= self.orig[i * cols + j] * self.x[j];
                }
            }
            row[w - 1] = r;
        }
        for k in 0..m {
            let p = (k..m)
                .max_by(|&a, &b| aug[a * w + k].abs().total_cmp(&aug[b * w + k].abs()))
                .unwrap();
            if aug[p * w + k].abs() < 1e-13 {
                return false;
            }
            if p != k {
                for c in 0..w {
                    aug.swap(k * w + c, p * w + c);
                }
            }
            let piv = aug[k * w + k];
            for v in &mut aug[k * w..(k + 1) * w] {
                *v /= piv;
            }
            let pivot_row: Vec<f64> = aug[k * w..(k + 1) * w].to_vec();
            for i in 0..m {
                if i == k {
                    continue;
                }
                let f = aug[i * w + k];
                if f == 0.0 {
                    continue;
                }
                for (v, pr) in aug[i * w..(i + 1) * w].iter_mut().zip(&pivot_row) {
                    *v -= f * pr;
                }
            }
        }
        for i in 0..m {
            self.a[i * cols..(i + 1) * cols].copy_from_slice(&aug[i * w + m..i * w + m + cols]);
            for (k, &b) in self.basis.iter().enumerate() {
                self.a[i * cols + b] = if i == k { 1.0 } else { 0.0 };
            }
            self.x[self.basis[i]] = aug[i * w + w - 1];
        }
        true
    }

    fn snapshot(&self) -> Snapshot {
        Snapshot {
            a: self.a.clone(),
            x: self.x.clone(),
            status: self.status.clone(),
            basis: self.basis.clone(),
        }
    }

    fn restore(&mut self, s: &Snapshot) {
        self.a.clone_from(&s.a);
        self.x.clone_from(&s.x);
        self.status.clone_from(&s.status);
        self.basis.clone_from(&s.basis);
    }

    /// Rebuilds the tableau. If drift has led the simplex onto a singular
    /// basis, rolls back to the last good state and switches to rebuilding
    /// after every pivot for a while. Returns false after a rollback.
    fn checkpoint(&mut self, good: &mut Snapshot, careful: &mut usize) -> bool {
        if self.refresh() {
            *good = self.snapshot();
            return true;
        }
        self.restore(good);
        *careful = 2 * REFRESH_EVERY;
        false
    }

    fn pivot(&mut self, r: usize, j: usize) {
        let cols = self.cols;
        let p = self.a[r * cols + j];
        for v in &mut self.a[r * cols..(r + 1) * cols] {
            *v /= p;
        }
        let pivot_row: Vec<f64> = self.a[r * cols..(r + 1) * cols].to_vec();
        for i in 0..self.rows {
            if i == r {
                continue;
            }
            let f = self.a[i * cols + j];
            if f == 0.0 {
                continue;
            }
            let row = &mut self.a[i * cols..(i + 1) * cols];
            for (v, pr) in row.iter_mut().zip(&pivot_row) {
                *v -= f * pr;
            }
            row[j] = 0.0;
        }
        self.status[self.basis[r]] = Status::AtLower;
        self.basis[r] = j;
        self.status[j] = Status::Basic;
    }

    fn run(&mut self, cost: &[f64]) -> Result<(), LpError> {
        let cols = self.cols;
        // Starts at one so that optimality is always confirmed on a rebuilt
        // tableau.
        let mut since_refresh = 1usize;
        let mut careful = 0usize;
        let mut good = self.snapshot();
        // Columns whose last pivot produced a singular basis, skipped until
        // the next successful pivot.
        let mut rejected = vec![false; cols];
        let mut last_entering = None;
        for _ in 0..MAX_ITERATIONS {
            if since_refresh >= REFRESH_EVERY || (careful > 0 && since_refresh > 0) {
                let was_careful = careful > 0;
                if self.checkpoint(&mut good, &mut careful) {
                    rejected.fill(false);
                    careful = careful.saturating_sub(1);
                } else if was_careful {
                    // The single pivot since `good` was bad; try another column.
                    if let Some(j) = last_entering {
                        rejected[j] = true;
                    }
                }
                since_refresh = 0;
            }
            // Reduced costs d_j = c_j - c_B · column_j.
            let mut entering = None;
            for j in 0..cols {
                if self.status[j] == Status::Basic || self.lower[j] == self.upper[j] || rejected[j]
                {
                    continue;
                }
                let mut d = cost[j];
                for i in 0..self.rows {
                    d -= cost[self.basis[i]] * self.a[i * cols + j];
                }
                let improving = match self.status[j] {
                    Status::AtLower => d < -COST_TOL,
                    Status::AtUpper => d > COST_TOL,
                    Status::Basic => false,
                };
                if improving {
                    entering = Some(j);
                    break;
                }
            }
            let Some(j) = entering else {
                if rejected.iter().any(|&r| r) {
                    return Err(LpError::Numerical);
                }
                // Confirm optimality on a freshly rebuilt tableau.
                if since_refresh == 0 {
                    return Ok(());
                }
                self.checkpoint(&mut good, &mut careful);
                since_refresh = 0;
                continue;
            };
            since_refresh += 1;
            last_entering = Some(j);
            let dir = if self.status[j] == Status::AtLower {
                1.0
            } else {
                -1.0
            };

            // Two-pass ratio test: find the smallest step, then among rows
            // that block within a hair of it take the largest pivot.
            let limit_of = |i: usize| -> Option<(f64, f64)> {
                let alpha = dir * self.a[i * cols + j];
                let b = self.basis[i];
                if alpha > PIVOT_TOL {
                    Some(((self.x[b] - self.lower[b]).max(0.0) / alpha, alpha))
                } else if alpha < -PIVOT_TOL && self.upper[b].is_finite() {
                    Some(((self.upper[b] - self.x[b]).max(0.0) / -alpha, alpha))
                } else {
                    None
                }
            };
            let flip = self.upper[j] - self.lower[j];
            let min_limit = (0..self.rows)
                .filter_map(limit_of)
                .map(|(l, _)| l)
                .fold(f64::INFINITY, f64::min);
            let mut step = flip;
            let mut leave: Option<(usize, f64)> = None;
            if min_limit < flip {
                let slack = min_limit + TIE_TOL * (1.0 + min_limit);
                for i in 0..self.rows {
                    let Some((limit, alpha)) = limit_of(i) else {
                        continue;
                    };
                    if limit > slack {
                        continue;
                    }
                    let better = match leave {
                        None => true,
                        Some((r, best)) => {
                            alpha.abs() > best.abs()
                                || (alpha.abs() == best.abs() && self.basis[i] < self.basis[r])
                        }
                    };
                    if better {
                        leave = Some((i, alpha));
                    }
                }
                step = min_limit;
            }
            if !step.is_finite() {
                return Err(LpError::Unbounded);
            }

            for i in 0..self.rows {
                let b = self.basis[i];
                self.x[b] -= dir * step * self.a[i * cols + j];
            }
            self.x[j] += dir * step;

            match leave {
                None => {
                    // Bound flip without a basis change.
                    if self.status[j] == Status::AtLower {
                        self.status[j] = Status::AtUpper;
                        self.x[j] = self.upper[j];
                    } else {
                        self.status[j] = Status::AtLower;
                        self.x[j] = self.lower[j];
                    }
                }
                Some((r, alpha)) => {
                    let b = self.basis[r];
                    self.pivot(r, j);
                    if alpha > 0.0 {
                        self.status[b] = Status::AtLower;
                        self.x[b] = self.lower[b];
                    } else {
                        self.status[b] = Status::AtUpper;
                        self.x[b] = self.upper[b];
                    }
                }
            }
        }
        Err(LpError::IterationLimit)
    }
}
