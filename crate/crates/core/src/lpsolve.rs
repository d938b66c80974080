//! Dense two-phase simplex for small linear programs.
//!
//! Problems are stated over free variables as
//! `max c·x  s.t.  G x <= g,  F x = f`. Internally every free variable is
//! split into a nonnegative pair and a slack is attached to each inequality
//! row; equality rows receive an artificial variable directly instead of
//! being rewritten as two opposing inequalities.

use thiserror::Error;

/// Pivot magnitudes below this are treated as zero.
const PIVOT_EPS: f64 = 1e-10;
/// Reduced costs must exceed this to enter the basis.
const COST_EPS: f64 = 1e-10;
/// Phase-one residual above which the program is declared infeasible.
const FEAS_EPS: f64 = 1e-8;
/// Consecutive non-improving pivots before switching to Bland's rule.
const DEGENERATE_SWITCH: usize = 64;

pub const DEFAULT_MAX_PIVOTS: usize = 50_000;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum LpError {
    #[error("row {row} has width {found}, expected {expected}")]
    RowWidth {
        row: usize,
        found: usize,
        expected: usize,
    },
    #[error("objective has length {found}, expected {expected}")]
    ObjectiveWidth { found: usize, expected: usize },
    #[error("right-hand side length {found} does not match {expected} rows")]
    RhsLength { found: usize, expected: usize },
    #[error("non-finite coefficient in linear program")]
    NonFinite,
    #[error("simplex did not terminate within {0} pivots")]
    NumericalFailure(usize),
}

/// `max objective·x` subject to `ineq_rows x <= ineq_rhs` and
/// `eq_rows x = eq_rhs`, with `x` free.
#[derive(Debug, Clone, Default)]
pub struct LinearProgram {
    pub num_vars: usize,
    pub objective: Vec<f64>,
    pub ineq_rows: Vec<Vec<f64>>,
    pub ineq_rhs: Vec<f64>,
    pub eq_rows: Vec<Vec<f64>>,
    pub eq_rhs: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum LpOutcome {
    Optimal { value: f64, point: Vec<f64> },
    Infeasible,
    Unbounded,
}

impl LpOutcome {
    pub fn is_infeasible(&self) -> bool {
        matches!(self, LpOutcome::Infeasible)
    }
}

impl LinearProgram {
    pub fn new(num_vars: usize) -> Self {
        LinearProgram {
            num_vars,
            objective: vec![0.0; num_vars],
            ..Default::default()
        }
    }

    pub fn with_objective(mut self, objective: Vec<f64>) -> Self {
        self.objective = objective;
        self
    }

    pub fn push_ineq(&mut self, row: Vec<f64>, rhs: f64) {
        self.ineq_rows.push(row);
        self.ineq_rhs.push(rhs);
    }

    pub fn push_eq(&mut self, row: Vec<f64>, rhs: f64) {
        self.eq_rows.push(row);
        self.eq_rhs.push(rhs);
    }

    fn validate(&self) -> Result<(), LpError> {
        if self.objective.len() != self.num_vars {
            return Err(LpError::ObjectiveWidth {
                found: self.objective.len(),
                expected: self.num_vars,
            });
        }
        if self.ineq_rhs.len() != self.ineq_rows.len() {
            return Err(LpError::RhsLength {
                found: self.ineq_rhs.len(),
                expected: self.ineq_rows.len(),
            });
        }
        if self.eq_rhs.len() != self.eq_rows.len() {
            return Err(LpError::RhsLength {
                found: self.eq_rhs.len(),
                expected: self.eq_rows.len(),
            });
        }
        for (row, r) in self.ineq_rows.iter().chain(self.eq_rows.iter()).enumerate() {
            if r.len() != self.num_vars {
                return Err(LpError::RowWidth {
                    row,
                    found: r.len(),
                    expected: self.num_vars,
                });
            }
        }
        let all_finite = self
            .objective
            .iter()
            .chain(self.ineq_rhs.iter())
            .chain(self.eq_rhs.iter())
            .chain(self.ineq_rows.iter().flatten())
            .chain(self.eq_rows.iter().flatten())
            .all(|v| v.is_finite());
        if !all_finite {
            return Err(LpError::NonFinite);
        }
        Ok(())
    }

    /// Largest constraint violation of `x`.
    pub fn violation(&self, x: &[f64]) -> f64 {
        let mut worst: f64 = 0.0;
        for (row, &b) in self.ineq_rows.iter().zip(&self.ineq_rhs) {
            worst = worst.max(dot(row, x) - b);
        }
        for (row, &b) in self.eq_rows.iter().zip(&self.eq_rhs) {
            worst = worst.max((dot(row, x) - b).abs());
        }
        worst
    }

    pub fn solve(&self) -> Result<LpOutcome, LpError> {
        self.solve_with_limit(DEFAULT_MAX_PIVOTS)
    }

    pub fn solve_with_limit(&self, max_pivots: usize) -> Result<LpOutcome, LpError> {
        self.validate()?;
        Tableau::build(self).run(self, max_pivots)
    }
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Row-major simplex tableau. The last column holds the right-hand side and
/// the last row holds the (negated) reduced costs of the active objective.
struct Tableau {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
    basis: Vec<usize>,
    n: usize,
    first_artificial: usize,
    pivots: usize,
}

impl Tableau {
    fn build(lp: &LinearProgram) -> Self {
        let n = lp.num_vars;
        let m_in = lp.ineq_rows.len();
        let m_eq = lp.eq_rows.len();
        let rows = m_in + m_eq;
        // Artificials are needed for equality rows and for inequality rows
        // whose slack would start negative.
        let needs_art: Vec<bool> = (0..rows)
            .map(|r| r >= m_in || lp.ineq_rhs[r] < 0.0)
            .collect();
        let n_art = needs_art.iter().filter(|&&a| a).count();
        let first_artificial = 2 * n + m_in;
        let cols = first_artificial + n_art;
        let width = cols + 1;
        let mut data = vec![0.0; (rows + 1) * width];
        let mut basis = vec![0; rows];
        let mut art = first_artificial;
        for r in 0..rows {
            let (coeffs, rhs) = if r < m_in {
                (&lp.ineq_rows[r], lp.ineq_rhs[r])
            } else {
                (&lp.eq_rows[r - m_in], lp.eq_rhs[r - m_in])
            };
            let sign = if rhs < 0.0 { -1.0 } else { 1.0 };
            let row = &mut data[r * width..(r + 1) * width];
            for j in 0..n {
                row[j] = sign * coeffs[j];
                row[n + j] = -sign * coeffs[j];
            }
            if r < m_in {
                row[2 * n + r] = sign;
            }
            row[cols] = sign * rhs;
            if needs_art[r] {
                row[art] = 1.0;
                basis[r] = art;
                art += 1;
            } else {
                basis[r] = 2 * n + r;
            }
        }
        Tableau {
            rows,
            cols,
            data,
            basis,
            n,
            first_artificial,
            pivots: 0,
        }
    }

    #[inline]
    fn width(&self) -> usize {
        self.cols + 1
    }

    #[inline]
    fn at(&self, r: usize, c: usize) -> f64 {
        self.data[r * self.width() + c]
    }

    fn set_objective(&mut self, costs: &[f64]) {
        // Objective row stores -c_j + c_B B^{-1} A_j, i.e. negative entries
        // mark improving columns for maximization.
        let w = self.width();
        let obj = self.rows * w;
        for c in 0..w {
            self.data[obj + c] = 0.0;
        }
        for (slot, cost) in self.data[obj..obj + self.cols].iter_mut().zip(costs) {
            *slot = -cost;
        }
        for r in 0..self.rows {
            let cb = costs[self.basis[r]];
            if cb != 0.0 {
                for c in 0..w {
                    self.data[obj + c] += cb * self.data[r * w + c];
                }
            }
        }
    }

    fn pivot(&mut self, pr: usize, pc: usize) {
        let w = self.width();
        let p = self.data[pr * w + pc];
        for c in 0..w {
            self.data[pr * w + c] /= p;
        }
        self.data[pr * w + pc] = 1.0;
        let pivot_row: Vec<f64> = self.data[pr * w..(pr + 1) * w].to_vec();
        for r in 0..=self.rows {
            if r == pr {
                continue;
            }
            let factor = self.data[r * w + pc];
            if factor != 0.0 {
                let row = &mut self.data[r * w..(r + 1) * w];
                for (v, &pv) in row.iter_mut().zip(&pivot_row) {
                    *v -= factor * pv;
                }
                row[pc] = 0.0;
            }
        }
        self.basis[pr] = pc;
        self.pivots += 1;
    }

    /// Runs simplex iterations on the current objective row. Columns at or
    /// beyond `col_limit` may not enter. Returns `false` when unbounded.
    fn optimize(&mut self, col_limit: usize, max_pivots: usize) -> Result<bool, LpError> {
        let mut stalled = 0usize;
        let mut last_value = self.objective_value();
        loop {
            if self.pivots >= max_pivots {
                return Err(LpError::NumericalFailure(max_pivots));
            }
            let bland = stalled >= DEGENERATE_SWITCH;
            let obj = self.rows;
            let mut entering = None;
            let mut best = -COST_EPS;
            for c in 0..col_limit {
                let rc = self.at(obj, c);
                if rc < -COST_EPS {
                    if bland {
                        entering = Some(c);
                        break;
                    }
                    if rc < best {
                        best = rc;
                        entering = Some(c);
                    }
                }
            }
            let Some(pc) = entering else {
                return Ok(true);
            };
            let mut leaving: Option<(usize, f64)> = None;
            for r in 0..self.rows {
                let a = self.at(r, pc);
                if a > PIVOT_EPS {
                    let ratio = self.at(r, self.cols) / a;
                    match leaving {
                        None => leaving = Some((r, ratio)),
                        Some((lr, lratio)) => {
                            if ratio < lratio - 1e-12
                                || (ratio <= lratio + 1e-12 && self.basis[r] < self.basis[lr])
                            {
                                leaving = Some((r, ratio));
                            }
                        }
                    }
                }
            }
            let Some((pr, _)) = leaving else {
                return Ok(false);
            };
            self.pivot(pr, pc);
            let value = self.objective_value();
            if value > last_value + 1e-12 {
                stalled = 0;
                last_value = value;
            } else {
                stalled += 1;
            }
        }
    }

    fn objective_value(&self) -> f64 {
        self.at(self.rows, self.cols)
    }

    fn run(mut self, lp: &LinearProgram, max_pivots: usize) -> Result<LpOutcome, LpError> {
        let n_art = self.cols - self.first_artificial;
        if n_art > 0 {
            let mut costs = vec![0.0; self.cols];
            for c in costs.iter_mut().skip(self.first_artificial) {
                *c = -1.0;
            }
            self.set_objective(&costs);
            self.optimize(self.cols, max_pivots)?;
            let residual = -self.objective_value();
            let scale = 1.0
                + lp
                    .ineq_rhs
                    .iter()
                    .chain(lp.eq_rhs.iter())
                    .fold(0.0f64, |a, b| a.max(b.abs()));
            if residual > FEAS_EPS * scale {
                return Ok(LpOutcome::Infeasible);
            }
            self.expel_artificials();
        }
        let mut costs = vec![0.0; self.cols];
        for j in 0..self.n {
            costs[j] = lp.objective[j];
            costs[self.n + j] = -lp.objective[j];
        }
        self.set_objective(&costs);
        if !self.optimize(self.first_artificial, max_pivots)? {
            return Ok(LpOutcome::Unbounded);
        }
        let mut point = vec![0.0; self.n];
        for r in 0..self.rows {
            let b = self.basis[r];
            let v = self.at(r, self.cols);
            if b < self.n {
                point[b] += v;
            } else if b < 2 * self.n {
                point[b - self.n] -= v;
            }
        }
        let value = dot(&lp.objective, &point);
        Ok(LpOutcome::Optimal { value, point })
    }

    /// Pivots zero-level artificials out of the basis; rows where that is
    /// impossible are linearly dependent and get zeroed.
    fn expel_artificials(&mut self) {
        for r in 0..self.rows {
            if self.basis[r] < self.first_artificial {
                continue;
            }
            let mut best: Option<(usize, f64)> = None;
            for c in 0..self.first_artificial {
                let a = self.at(r, c).abs();
                if a > PIVOT_EPS && best.is_none_or(|(_, b)| a > b) {
                    best = Some((c, a));
                }
            }
            match best {
                Some((c, _)) => self.pivot(r, c),
                None => {
                    let w = self.width();
                    for c in 0..w {
                        self.data[r * w + c] = 0.0;
                    }
                }
            }
        }
    }
}
