//! Halfspace-represented polyhedra `{z : G z <= g, F z = f}`.
//!
//! Inequality rows are kept at unit Euclidean norm. A zero row with a
//! negative offset marks a trivially infeasible system. Sets may be
//! unbounded, which is how cylinders produced by extrusion are stored.

use std::fmt::Write as _;

use nalgebra::DMatrix;
use thiserror::Error;

use crate::hull;
use crate::lpsolve::{dot, LinearProgram, LpError, LpOutcome};

/// Absolute tolerance for duplicate rows and membership tests.
pub const GEOM_EPS: f64 = 1e-9;
/// Default cap on intermediate Fourier–Motzkin rows.
pub const DEFAULT_ELIMINATION_CAP: usize = 20_000;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum PolytopeError {
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("non-finite coefficient")]
    NonFinite,
    #[error("operation requires a nonempty set")]
    EmptySet,
    #[error("operation requires a bounded set")]
    UnboundedSet,
    #[error("cannot build a hull from an empty vertex list")]
    DegenerateInput,
    #[error("elimination produced {rows} rows, above the cap of {cap}")]
    EliminationBlowup { rows: usize, cap: usize },
    #[error("coordinate {index} out of range for dimension {dim}")]
    CoordinateOutOfRange { index: usize, dim: usize },
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error(transparent)]
    Lp(#[from] LpError),
}

#[derive(Debug, Clone, PartialEq)]
pub struct HPolytope {
    dim: usize,
    ineq: Vec<Vec<f64>>,
    ineq_rhs: Vec<f64>,
    eq: Vec<Vec<f64>>,
    eq_rhs: Vec<f64>,
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

fn check_row(row: &[f64], dim: usize) -> Result<(), PolytopeError> {
    if row.len() != dim {
        return Err(PolytopeError::DimensionMismatch {
            expected: dim,
            found: row.len(),
        });
    }
    if row.iter().any(|v| !v.is_finite()) {
        return Err(PolytopeError::NonFinite);
    }
    Ok(())
}

impl HPolytope {
    pub fn new(
        dim: usize,
        ineq: Vec<Vec<f64>>,
        ineq_rhs: Vec<f64>,
        eq: Vec<Vec<f64>>,
        eq_rhs: Vec<f64>,
    ) -> Result<Self, PolytopeError> {
        if ineq.len() != ineq_rhs.len() {
            return Err(PolytopeError::DimensionMismatch {
                expected: ineq.len(),
                found: ineq_rhs.len(),
            });
        }
        if eq.len() != eq_rhs.len() {
            return Err(PolytopeError::DimensionMismatch {
                expected: eq.len(),
                found: eq_rhs.len(),
            });
        }
        for row in ineq.iter().chain(eq.iter()) {
            check_row(row, dim)?;
        }
        if ineq_rhs.iter().chain(eq_rhs.iter()).any(|v| !v.is_finite()) {
            return Err(PolytopeError::NonFinite);
        }
        let mut p = HPolytope {
            dim,
            ineq: Vec::new(),
            ineq_rhs: Vec::new(),
            eq: Vec::new(),
            eq_rhs: Vec::new(),
        };
        for (row, b) in ineq.into_iter().zip(ineq_rhs) {
            p.push_ineq(row, b);
        }
        for (row, b) in eq.into_iter().zip(eq_rhs) {
            p.push_eq(row, b);
        }
        Ok(p)
    }

    /// All of `R^dim`.
    pub fn universe(dim: usize) -> Self {
        HPolytope {
            dim,
            ineq: Vec::new(),
            ineq_rhs: Vec::new(),
            eq: Vec::new(),
            eq_rhs: Vec::new(),
        }
    }

    /// Canonical empty set: a single `0 <= -1` row.
    pub fn empty(dim: usize) -> Self {
        HPolytope {
            dim,
            ineq: vec![vec![0.0; dim]],
            ineq_rhs: vec![-1.0],
            eq: Vec::new(),
            eq_rhs: Vec::new(),
        }
    }

    pub fn from_box(lo: &[f64], hi: &[f64]) -> Result<Self, PolytopeError> {
        if lo.len() != hi.len() {
            return Err(PolytopeError::DimensionMismatch {
                expected: lo.len(),
                found: hi.len(),
            });
        }
        let dim = lo.len();
        let mut ineq = Vec::new();
        let mut rhs = Vec::new();
        for k in 0..dim {
            let mut up = vec![0.0; dim];
            up[k] = 1.0;
            ineq.push(up);
            rhs.push(hi[k]);
            let mut down = vec![0.0; dim];
            down[k] = -1.0;
            ineq.push(down);
            rhs.push(-lo[k]);
        }
        HPolytope::new(dim, ineq, rhs, Vec::new(), Vec::new())
    }

    fn push_ineq(&mut self, mut row: Vec<f64>, mut b: f64) {
        let n = norm(&row);
        if n <= GEOM_EPS {
            if b < -GEOM_EPS && !self.has_infeasible_marker() {
                self.ineq.push(vec![0.0; self.dim]);
                self.ineq_rhs.push(-1.0);
            }
            return;
        }
        row.iter_mut().for_each(|v| *v /= n);
        b /= n;
        self.ineq.push(row);
        self.ineq_rhs.push(b);
    }

    fn push_eq(&mut self, mut row: Vec<f64>, mut b: f64) {
        let n = norm(&row);
        if n <= GEOM_EPS {
            if b.abs() > GEOM_EPS {
                self.push_ineq(vec![0.0; self.dim], -1.0);
            }
            return;
        }
        row.iter_mut().for_each(|v| *v /= n);
        b /= n;
        self.eq.push(row);
        self.eq_rhs.push(b);
    }

    fn has_infeasible_marker(&self) -> bool {
        self.ineq
            .iter()
            .zip(&self.ineq_rhs)
            .any(|(r, &b)| b < 0.0 && r.iter().all(|v| *v == 0.0))
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn inequalities(&self) -> impl Iterator<Item = (&[f64], f64)> {
        self.ineq
            .iter()
            .map(Vec::as_slice)
            .zip(self.ineq_rhs.iter().copied())
    }

    pub fn equalities(&self) -> impl Iterator<Item = (&[f64], f64)> {
        self.eq.iter().map(Vec::as_slice).zip(self.eq_rhs.iter().copied())
    }

    pub fn num_inequalities(&self) -> usize {
        self.ineq.len()
    }

    pub fn num_equalities(&self) -> usize {
        self.eq.len()
    }

    fn lp(&self, objective: Vec<f64>) -> LinearProgram {
        LinearProgram {
            num_vars: self.dim,
            objective,
            ineq_rows: self.ineq.clone(),
            ineq_rhs: self.ineq_rhs.clone(),
            eq_rows: self.eq.clone(),
            eq_rhs: self.eq_rhs.clone(),
        }
    }

    pub fn is_empty(&self) -> Result<bool, PolytopeError> {
        if self.has_infeasible_marker() {
            return Ok(true);
        }
        if self.ineq.is_empty() && self.eq.is_empty() {
            return Ok(false);
        }
        Ok(self.lp(vec![0.0; self.dim]).solve()?.is_infeasible())
    }

    /// A feasible point, if any.
    pub fn interior_hint(&self) -> Result<Option<Vec<f64>>, PolytopeError> {
        match self.lp(vec![0.0; self.dim]).solve()? {
            LpOutcome::Optimal { point, .. } => Ok(Some(point)),
            _ => Ok(None),
        }
    }

    /// `max <direction, z>` over the set; `+inf` when unbounded.
    pub fn support(&self, direction: &[f64]) -> Result<f64, PolytopeError> {
        check_row(direction, self.dim)?;
        match self.lp(direction.to_vec()).solve()? {
            LpOutcome::Optimal { value, .. } => Ok(value),
            LpOutcome::Unbounded => Ok(f64::INFINITY),
            LpOutcome::Infeasible => Err(PolytopeError::EmptySet),
        }
    }

    /// Maximizer of `<direction, z>`; `None` when unbounded.
    pub fn maximizer(&self, direction: &[f64]) -> Result<Option<Vec<f64>>, PolytopeError> {
        check_row(direction, self.dim)?;
        match self.lp(direction.to_vec()).solve()? {
            LpOutcome::Optimal { point, .. } => Ok(Some(point)),
            LpOutcome::Unbounded => Ok(None),
            LpOutcome::Infeasible => Err(PolytopeError::EmptySet),
        }
    }

    pub fn contains(&self, point: &[f64], tol: f64) -> bool {
        if point.len() != self.dim {
            return false;
        }
        self.inequalities().all(|(a, b)| dot(a, point) <= b + tol)
            && self.equalities().all(|(a, b)| (dot(a, point) - b).abs() <= tol)
    }

    /// Re-embeds the set into `new_dim` coordinates; coordinate `k` of the
    /// current set lands at `positions[k]`, other coordinates are free.
    pub fn embed(&self, new_dim: usize, positions: &[usize]) -> Result<HPolytope, PolytopeError> {
        if positions.len() != self.dim {
            return Err(PolytopeError::DimensionMismatch {
                expected: self.dim,
                found: positions.len(),
            });
        }
        if let Some(&bad) = positions.iter().find(|&&p| p >= new_dim) {
            return Err(PolytopeError::CoordinateOutOfRange {
                index: bad,
                dim: new_dim,
            });
        }
        let lift = |row: &Vec<f64>| {
            let mut out = vec![0.0; new_dim];
            for (k, &p) in positions.iter().enumerate() {
                out[p] = row[k];
            }
            out
        };
        Ok(HPolytope {
            dim: new_dim,
            ineq: self.ineq.iter().map(lift).collect(),
            ineq_rhs: self.ineq_rhs.clone(),
            eq: self.eq.iter().map(lift).collect(),
            eq_rhs: self.eq_rhs.clone(),
        })
    }

    /// Constraint union without pruning.
    pub fn stack(&self, other: &HPolytope) -> Result<HPolytope, PolytopeError> {
        if other.dim != self.dim {
            return Err(PolytopeError::DimensionMismatch {
                expected: self.dim,
                found: other.dim,
            });
        }
        let mut out = self.clone();
        out.ineq.extend(other.ineq.iter().cloned());
        out.ineq_rhs.extend(other.ineq_rhs.iter().copied());
        out.eq.extend(other.eq.iter().cloned());
        out.eq_rhs.extend(other.eq_rhs.iter().copied());
        Ok(out)
    }

    pub fn intersect(&self, other: &HPolytope) -> Result<HPolytope, PolytopeError> {
        self.stack(other)?.remove_redundancy()
    }

    /// Drops duplicate rows, keeping the tightest offset for each normal.
    fn dedup_rows(&mut self) {
        let mut order: Vec<usize> = (0..self.ineq.len()).collect();
        order.sort_by(|&a, &b| {
            self.ineq[a]
                .iter()
                .zip(&self.ineq[b])
                .map(|(x, y)| x.total_cmp(y))
                .find(|o| o.is_ne())
                .unwrap_or(std::cmp::Ordering::Equal)
                .then(self.ineq_rhs[a].total_cmp(&self.ineq_rhs[b]))
        });
        let mut keep_rows: Vec<Vec<f64>> = Vec::new();
        let mut keep_rhs: Vec<f64> = Vec::new();
        for idx in order {
            let row = &self.ineq[idx];
            let b = self.ineq_rhs[idx];
            let dup = keep_rows.iter().position(|k| {
                k.iter().zip(row).all(|(x, y)| (x - y).abs() <= GEOM_EPS)
            });
            match dup {
                Some(pos) => keep_rhs[pos] = keep_rhs[pos].min(b),
                None => {
                    keep_rows.push(row.clone());
                    keep_rhs.push(b);
                }
            }
        }
        self.ineq = keep_rows;
        self.ineq_rhs = keep_rhs;
    }

    /// Removes inequality rows implied by the remaining constraints, one LP
    /// per row. Empty sets collapse to the canonical empty polytope.
    pub fn remove_redundancy(&self) -> Result<HPolytope, PolytopeError> {
        if self.is_empty()? {
            return Ok(HPolytope::empty(self.dim));
        }
        let mut p = self.clone();
        p.dedup_rows();
        let mut keep = vec![true; p.ineq.len()];
        for i in 0..p.ineq.len() {
            let mut lp = LinearProgram::new(self.dim).with_objective(p.ineq[i].clone());
            for (j, (row, &b)) in p.ineq.iter().zip(&p.ineq_rhs).enumerate() {
                if j == i {
                    // relaxed copy keeps the LP bounded in this direction
                    lp.push_ineq(row.clone(), b + 1.0);
                } else if keep[j] {
                    lp.push_ineq(row.clone(), b);
                }
            }
            for (row, &b) in p.eq.iter().zip(&p.eq_rhs) {
                lp.push_eq(row.clone(), b);
            }
            if let LpOutcome::Optimal { value, .. } = lp.solve()? {
                if value <= p.ineq_rhs[i] + GEOM_EPS {
                    keep[i] = false;
                }
            }
        }
        let mut k = keep.iter();
        p.ineq.retain(|_| *k.next().unwrap());
        let mut k = keep.iter();
        p.ineq_rhs.retain(|_| *k.next().unwrap());
        p.reduce_equalities();
        Ok(p)
    }

    /// Replaces the equality rows by a linearly independent subset.
    fn reduce_equalities(&mut self) {
        if self.eq.len() <= 1 {
            return;
        }
        let mut reduced: Vec<Vec<f64>> = Vec::new();
        let mut pivots: Vec<usize> = Vec::new();
        let mut keep = Vec::new();
        for (idx, row) in self.eq.iter().enumerate() {
            let mut r = row.clone();
            for (b, &p) in reduced.iter().zip(&pivots) {
                let f = r[p];
                if f != 0.0 {
                    r.iter_mut().zip(b).for_each(|(x, y)| *x -= f * y);
                }
            }
            let (p, mag) = r
                .iter()
                .enumerate()
                .map(|(i, v)| (i, v.abs()))
                .fold((0, 0.0), |acc, x| if x.1 > acc.1 { x } else { acc });
            if mag > 1e-9 {
                let pv = r[p];
                r.iter_mut().for_each(|x| *x /= pv);
                reduced.push(r);
                pivots.push(p);
                keep.push(idx);
            }
        }
        self.eq = keep.iter().map(|&i| self.eq[i].clone()).collect();
        self.eq_rhs = keep.iter().map(|&i| self.eq_rhs[i]).collect();
    }

    /// `true` iff `other ⊆ self` up to `tol`, via support functions of
    /// `other` along every facet normal of `self`.
    pub fn includes(&self, other: &HPolytope, tol: f64) -> Result<bool, PolytopeError> {
        if other.dim != self.dim {
            return Err(PolytopeError::DimensionMismatch {
                expected: self.dim,
                found: other.dim,
            });
        }
        if other.is_empty()? {
            return Ok(true);
        }
        if self.has_infeasible_marker() {
            return Ok(false);
        }
        for (a, b) in self.inequalities() {
            if other.support(a)? > b + tol {
                return Ok(false);
            }
        }
        for (a, b) in self.equalities() {
            let neg: Vec<f64> = a.iter().map(|v| -v).collect();
            if other.support(a)? > b + tol || other.support(&neg)? > -b + tol {
                return Ok(false);
            }
        }
        Ok(true)
    }

    /// Two-sided inclusion.
    pub fn set_eq(&self, other: &HPolytope, tol: f64) -> Result<bool, PolytopeError> {
        let (a_empty, b_empty) = (self.is_empty()?, other.is_empty()?);
        if a_empty || b_empty {
            return Ok(a_empty == b_empty);
        }
        Ok(self.includes(other, tol)? && other.includes(self, tol)?)
    }

    /// Largest support-function difference over the facet normals of both
    /// sets. Zero for identical sets, `+inf` if exactly one is unbounded in
    /// a probed direction.
    pub fn support_gap(&self, other: &HPolytope) -> Result<f64, PolytopeError> {
        let (a_empty, b_empty) = (self.is_empty()?, other.is_empty()?);
        if a_empty || b_empty {
            return Ok(if a_empty == b_empty { 0.0 } else { f64::INFINITY });
        }
        let mut dirs: Vec<Vec<f64>> = Vec::new();
        for p in [self, other] {
            for (a, _) in p.inequalities() {
                dirs.push(a.to_vec());
            }
            for (a, _) in p.equalities() {
                dirs.push(a.to_vec());
                dirs.push(a.iter().map(|v| -v).collect());
            }
        }
        let mut gap: f64 = 0.0;
        for d in dirs {
            let (x, y) = (self.support(&d)?, other.support(&d)?);
            let diff = if x.is_infinite() && y.is_infinite() {
                0.0
            } else {
                (x - y).abs()
            };
            gap = gap.max(diff);
        }
        Ok(gap)
    }

    /// Projection onto the coordinates not listed in `drop`, by
    /// Fourier–Motzkin elimination with LP pruning after every step.
    /// Equality rows are used for substitution before any inequality
    /// combination; remaining coordinates go highest index first.
    pub fn eliminate(&self, drop: &[usize], cap: usize) -> Result<HPolytope, PolytopeError> {
        if let Some(&bad) = drop.iter().find(|&&k| k >= self.dim) {
            return Err(PolytopeError::CoordinateOutOfRange {
                index: bad,
                dim: self.dim,
            });
        }
        let mut drop: Vec<usize> = drop.to_vec();
        drop.sort_unstable();
        drop.dedup();
        let new_dim = self.dim - drop.len();
        if self.is_empty()? {
            return Ok(HPolytope::empty(new_dim));
        }
        let mut work = self.clone();
        work.dedup_rows();
        let mut pending = drop.clone();
        while !pending.is_empty() {
            let eq_pick = pending
                .iter()
                .rev()
                .copied()
                .find(|&k| work.eq.iter().any(|r| r[k].abs() > GEOM_EPS));
            match eq_pick {
                Some(k) => {
                    work.substitute_equality(k);
                    pending.retain(|&c| c != k);
                }
                None => {
                    let k = pending.pop().unwrap();
                    work.fourier_motzkin(k, cap)?;
                    work = work.remove_redundancy()?;
                    if work.has_infeasible_marker() {
                        return Ok(HPolytope::empty(new_dim));
                    }
                }
            }
        }
        let keep: Vec<usize> = (0..self.dim).filter(|k| !drop.contains(k)).collect();
        let select = |row: &Vec<f64>| keep.iter().map(|&k| row[k]).collect::<Vec<f64>>();
        let out = HPolytope::new(
            new_dim,
            work.ineq.iter().map(select).collect(),
            work.ineq_rhs.clone(),
            work.eq.iter().map(select).collect(),
            work.eq_rhs.clone(),
        )?;
        out.remove_redundancy()
    }

    /// Projection keeping exactly the coordinates in `keep` (ascending).
    pub fn project_onto(&self, keep: &[usize], cap: usize) -> Result<HPolytope, PolytopeError> {
        let drop: Vec<usize> = (0..self.dim).filter(|k| !keep.contains(k)).collect();
        self.eliminate(&drop, cap)
    }

    fn substitute_equality(&mut self, k: usize) {
        let (r, _) = self
            .eq
            .iter()
            .enumerate()
            .map(|(i, row)| (i, row[k].abs()))
            .fold((usize::MAX, 0.0), |acc, x| if x.1 > acc.1 { x } else { acc });
        let pivot_row = self.eq.remove(r);
        let pivot_rhs = self.eq_rhs.remove(r);
        let pk = pivot_row[k];
        let old_ineq = std::mem::take(&mut self.ineq);
        let old_rhs = std::mem::take(&mut self.ineq_rhs);
        for (mut row, mut b) in old_ineq.into_iter().zip(old_rhs) {
            let f = row[k] / pk;
            if f != 0.0 {
                row.iter_mut().zip(&pivot_row).for_each(|(x, y)| *x -= f * y);
                b -= f * pivot_rhs;
            }
            row[k] = 0.0;
            self.push_ineq(row, b);
        }
        let old_eq = std::mem::take(&mut self.eq);
        let old_eq_rhs = std::mem::take(&mut self.eq_rhs);
        for (mut row, mut b) in old_eq.into_iter().zip(old_eq_rhs) {
            let f = row[k] / pk;
            if f != 0.0 {
                row.iter_mut().zip(&pivot_row).for_each(|(x, y)| *x -= f * y);
                b -= f * pivot_rhs;
            }
            row[k] = 0.0;
            self.push_eq(row, b);
        }
    }

    fn fourier_motzkin(&mut self, k: usize, cap: usize) -> Result<(), PolytopeError> {
        let mut pos = Vec::new();
        let mut neg = Vec::new();
        let mut rows: Vec<(Vec<f64>, f64)> = Vec::new();
        for (row, &b) in self.ineq.iter().zip(&self.ineq_rhs) {
            if row[k] > GEOM_EPS {
                pos.push((row, b));
            } else if row[k] < -GEOM_EPS {
                neg.push((row, b));
            } else {
                let mut r = row.clone();
                r[k] = 0.0;
                rows.push((r, b));
            }
        }
        let total = rows.len() + pos.len() * neg.len();
        if total > cap {
            return Err(PolytopeError::EliminationBlowup { rows: total, cap });
        }
        for (p, bp) in &pos {
            for (n, bn) in &neg {
                let (cp, cn) = (p[k], -n[k]);
                let mut r: Vec<f64> = p.iter().zip(n.iter()).map(|(x, y)| x / cp + y / cn).collect();
                r[k] = 0.0;
                rows.push((r, bp / cp + bn / cn));
            }
        }
        for row in self.eq.iter_mut() {
            row[k] = 0.0;
        }
        self.ineq.clear();
        self.ineq_rhs.clear();
        for (r, b) in rows {
            self.push_ineq(r, b);
        }
        self.dedup_rows();
        Ok(())
    }

    /// Vertices of a bounded, nonempty set, sorted lexicographically.
    pub fn vertices(&self) -> Result<Vec<Vec<f64>>, PolytopeError> {
        if self.is_empty()? {
            return Err(PolytopeError::EmptySet);
        }
        for k in 0..self.dim {
            for s in [1.0, -1.0] {
                let mut d = vec![0.0; self.dim];
                d[k] = s;
                if self.support(&d)?.is_infinite() {
                    return Err(PolytopeError::UnboundedSet);
                }
            }
        }
        let (origin, basis) = self.affine_parametrization()?;
        let r = basis.len();
        if r == 0 {
            return Ok(vec![origin]);
        }
        // homogenized cone {(y, t) : t (b - A z0) - (A N) y >= 0, t >= 0}
        let mut cone_rows = Vec::new();
        for (a, b) in self.inequalities() {
            let mut row: Vec<f64> = basis.iter().map(|n| -dot(a, n)).collect();
            row.push(b - dot(a, &origin));
            cone_rows.push(row);
        }
        let mut t_row = vec![0.0; r];
        t_row.push(1.0);
        cone_rows.push(t_row);
        let rays = hull::extreme_rays(&cone_rows, r + 1).ok_or(PolytopeError::UnboundedSet)?;
        let mut verts: Vec<Vec<f64>> = Vec::new();
        for ray in rays {
            let t = ray[r];
            if t <= 1e-12 {
                continue;
            }
            let mut z = origin.clone();
            for (coef, n) in ray[..r].iter().zip(&basis) {
                z.iter_mut().zip(n).for_each(|(zi, ni)| *zi += coef / t * ni);
            }
            verts.push(z);
        }
        Ok(cluster_points(verts, 1e-7))
    }

    /// A point of the equality subspace together with an orthonormal basis
    /// of its direction space.
    fn affine_parametrization(&self) -> Result<(Vec<f64>, Vec<Vec<f64>>), PolytopeError> {
        if self.eq.is_empty() {
            let origin = self.interior_hint()?.ok_or(PolytopeError::EmptySet)?;
            let basis = (0..self.dim)
                .map(|k| {
                    let mut e = vec![0.0; self.dim];
                    e[k] = 1.0;
                    e
                })
                .collect();
            return Ok((origin, basis));
        }
        let m = self.eq.len();
        let f = DMatrix::from_fn(m, self.dim, |r, c| self.eq[r][c]);
        let origin = self.interior_hint()?.ok_or(PolytopeError::EmptySet)?;
        // eigenvectors of F^T F with zero eigenvalue span null(F)
        let gram = (f.transpose() * f).symmetric_eigen();
        let basis = gram
            .eigenvalues
            .iter()
            .enumerate()
            .filter(|(_, ev)| ev.abs() <= 1e-9)
            .map(|(i, _)| gram.eigenvectors.column(i).iter().copied().collect())
            .collect();
        Ok((origin, basis))
    }

    /// H-representation of the convex hull of `points`. Lower-dimensional
    /// hulls carry explicit equality rows.
    pub fn from_vertices(points: &[Vec<f64>]) -> Result<HPolytope, PolytopeError> {
        let first = points.first().ok_or(PolytopeError::DegenerateInput)?;
        let dim = first.len();
        for p in points {
            check_row(p, dim)?;
        }
        let pts = cluster_points(points.to_vec(), GEOM_EPS);
        let n = pts.len();
        let centroid: Vec<f64> = (0..dim)
            .map(|k| pts.iter().map(|p| p[k]).sum::<f64>() / n as f64)
            .collect();
        if n == 1 {
            let eq = (0..dim)
                .map(|k| {
                    let mut e = vec![0.0; dim];
                    e[k] = 1.0;
                    e
                })
                .collect();
            return HPolytope::new(dim, Vec::new(), Vec::new(), eq, pts[0].clone());
        }
        let diffs = DMatrix::from_fn(dim, n, |r, c| pts[c][r] - centroid[r]);
        let scale = diffs.iter().fold(0.0f64, |a, b| a.max(b.abs())).max(1.0);
        let svd = diffs.svd(true, false);
        let u = svd.u.unwrap();
        let mut order: Vec<usize> = (0..svd.singular_values.len()).collect();
        order.sort_by(|&a, &b| svd.singular_values[b].total_cmp(&svd.singular_values[a]));
        let rank = order
            .iter()
            .filter(|&&i| svd.singular_values[i] > 1e-9 * scale)
            .count();
        let span: Vec<Vec<f64>> = order[..rank]
            .iter()
            .map(|&i| u.column(i).iter().copied().collect())
            .collect();
        // orthogonal complement of the span gives the equality normals
        let mut normals: Vec<Vec<f64>> = Vec::new();
        for k in 0..dim {
            let mut e = vec![0.0; dim];
            e[k] = 1.0;
            for s in span.iter().chain(normals.iter()) {
                let c = dot(&e, s);
                e.iter_mut().zip(s).for_each(|(x, y)| *x -= c * y);
            }
            let nn = norm(&e);
            if nn > 1e-6 {
                e.iter_mut().for_each(|x| *x /= nn);
                normals.push(e);
            }
            if span.len() + normals.len() == dim {
                break;
            }
        }
        let eq_rhs: Vec<f64> = normals.iter().map(|nrm| dot(nrm, &centroid)).collect();

        let reduced: Vec<Vec<f64>> = pts
            .iter()
            .map(|p| {
                let d: Vec<f64> = p.iter().zip(&centroid).map(|(a, b)| a - b).collect();
                span.iter().map(|s| dot(s, &d)).collect()
            })
            .collect();
        // facets (a, beta) satisfy beta - a·y >= 0 for all reduced points
        let cone_rows: Vec<Vec<f64>> = reduced
            .iter()
            .map(|y| {
                let mut row: Vec<f64> = y.iter().map(|v| -v).collect();
                row.push(1.0);
                row
            })
            .collect();
        let rays = hull::extreme_rays(&cone_rows, rank + 1).ok_or(PolytopeError::DegenerateInput)?;
        let mut ineq = Vec::new();
        let mut ineq_rhs = Vec::new();
        for ray in rays {
            let a = &ray[..rank];
            if norm(a) <= 1e-9 {
                continue;
            }
            let beta = ray[rank];
            let mut row = vec![0.0; dim];
            for (coef, s) in a.iter().zip(&span) {
                row.iter_mut().zip(s).for_each(|(x, y)| *x += coef * y);
            }
            let rhs = beta + dot(&row, &centroid);
            ineq.push(row);
            ineq_rhs.push(rhs);
        }
        let mut p = HPolytope::new(dim, ineq, ineq_rhs, normals, eq_rhs)?;
        p.dedup_rows();
        Ok(p)
    }

    /// Text form: a `dim k` header, then `I a1 .. ak b` for `a·z <= b` and
    /// `E a1 .. ak b` for `a·z = b`.
    pub fn to_text(&self) -> String {
        let mut s = format!("dim {}\n", self.dim);
        for (a, b) in self.inequalities() {
            s.push('I');
            for v in a.iter().chain(std::iter::once(&b)) {
                write!(s, " {v}").unwrap();
            }
            s.push('\n');
        }
        for (a, b) in self.equalities() {
            s.push('E');
            for v in a.iter().chain(std::iter::once(&b)) {
                write!(s, " {v}").unwrap();
            }
            s.push('\n');
        }
        s
    }

    pub fn from_text(text: &str) -> Result<HPolytope, PolytopeError> {
        let mut dim: Option<usize> = None;
        let mut ineq = Vec::new();
        let mut ineq_rhs = Vec::new();
        let mut eq = Vec::new();
        let mut eq_rhs = Vec::new();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let err = |message: String| PolytopeError::Parse {
                line: lineno + 1,
                message,
            };
            let mut parts = line.split_whitespace();
            let tag = parts.next().unwrap();
            match (tag, dim) {
                ("dim", None) => {
                    let k = parts
                        .next()
                        .ok_or_else(|| err("missing dimension".into()))?
                        .parse::<usize>()
                        .map_err(|e| err(e.to_string()))?;
                    dim = Some(k);
                }
                ("dim", Some(_)) => return Err(err("duplicate dim header".into())),
                (_, None) => return Err(err("expected `dim k` header".into())),
                ("I" | "E", Some(k)) => {
                    let vals = parts
                        .map(|t| t.parse::<f64>().map_err(|e| err(format!("{t:?}: {e}"))))
                        .collect::<Result<Vec<f64>, _>>()?;
                    if vals.len() != k + 1 {
                        return Err(err(format!("expected {} numbers, found {}", k + 1, vals.len())));
                    }
                    let (row, b) = (vals[..k].to_vec(), vals[k]);
                    if tag == "I" {
                        ineq.push(row);
                        ineq_rhs.push(b);
                    } else {
                        eq.push(row);
                        eq_rhs.push(b);
                    }
                }
                (other, Some(_)) => return Err(err(format!("unknown row tag {other:?}"))),
            }
        }
        let dim = dim.ok_or(PolytopeError::Parse {
            line: 0,
            message: "missing `dim k` header".into(),
        })?;
        HPolytope::new(dim, ineq, ineq_rhs, eq, eq_rhs)
    }
}

/// Merges points closer than `tol` (max-norm) and sorts the result.
pub fn cluster_points(mut pts: Vec<Vec<f64>>, tol: f64) -> Vec<Vec<f64>> {
    let mut out: Vec<Vec<f64>> = Vec::new();
    pts.sort_by(|a, b| lex_cmp(a, b));
    for p in pts {
        if !out
            .iter()
            .any(|q| q.iter().zip(&p).all(|(x, y)| (x - y).abs() <= tol))
        {
            out.push(p);
        }
    }
    out
}

pub fn lex_cmp(a: &[f64], b: &[f64]) -> std::cmp::Ordering {
    a.iter()
        .zip(b)
        .map(|(x, y)| x.total_cmp(y))
        .find(|o| o.is_ne())
        .unwrap_or(a.len().cmp(&b.len()))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn unit_box(dim: usize) -> HPolytope {
        HPolytope::from_box(&vec![0.0; dim], &vec![1.0; dim]).unwrap()
    }

    #[test]
    fn rows_are_normalized() {
        let p = HPolytope::new(2, vec![vec![3.0, 4.0]], vec![10.0], vec![], vec![]).unwrap();
        let (a, b) = p.inequalities().next().unwrap();
        assert!((norm(a) - 1.0).abs() < 1e-15);
        assert!((b - 2.0).abs() < 1e-15);
    }

    #[test]
    fn zero_row_with_negative_offset_is_infeasible() {
        let p = HPolytope::new(1, vec![vec![0.0]], vec![-2.0], vec![], vec![]).unwrap();
        assert!(p.is_empty().unwrap());
        let q = HPolytope::new(1, vec![vec![0.0]], vec![2.0], vec![], vec![]).unwrap();
        assert_eq!(q.num_inequalities(), 0);
    }

    #[test]
    fn emptiness() {
        let p = HPolytope::new(1, vec![vec![1.0], vec![-1.0]], vec![-1.0, -1.0], vec![], vec![]).unwrap();
        assert!(p.is_empty().unwrap());
        assert!(!unit_box(2).is_empty().unwrap());
    }

    #[test]
    fn support_of_box_and_slab() {
        assert!((unit_box(2).support(&[1.0, 0.0]).unwrap() - 1.0).abs() < 1e-12);
        let slab = unit_box(1).embed(2, &[0]).unwrap();
        assert_eq!(slab.support(&[0.0, 1.0]).unwrap(), f64::INFINITY);
        assert_eq!(HPolytope::empty(2).support(&[1.0, 0.0]), Err(PolytopeError::EmptySet));
    }

    #[test]
    fn triangle_hull_and_support() {
        let tri = HPolytope::from_vertices(&[vec![1.0, 2.0], vec![3.0, 2.0], vec![2.0, 4.0]]).unwrap();
        assert_eq!(tri.num_inequalities(), 3);
        assert_eq!(tri.num_equalities(), 0);
        assert!((tri.support(&[0.0, 1.0]).unwrap() - 4.0).abs() < 1e-9);
        assert!(tri.contains(&[2.0, 3.0], 1e-9));
        assert!(!tri.contains(&[1.0, 3.0], 1e-9));
        let v = tri.vertices().unwrap();
        assert_eq!(v.len(), 3);
    }

    #[test]
    fn single_point_hull_is_equalities() {
        let p = HPolytope::from_vertices(&[vec![2.0, -1.0]]).unwrap();
        assert_eq!(p.num_equalities(), 2);
        assert_eq!(p.num_inequalities(), 0);
        assert_eq!(p.vertices().unwrap(), vec![vec![2.0, -1.0]]);
    }

    #[test]
    fn segment_in_plane_has_one_equality() {
        let p = HPolytope::from_vertices(&[vec![0.0, 0.0], vec![1.0, 1.0]]).unwrap();
        assert_eq!(p.num_equalities(), 1);
        assert_eq!(p.num_inequalities(), 2);
        assert!(p.contains(&[0.5, 0.5], 1e-9));
        assert!(!p.contains(&[0.5, 0.6], 1e-9));
        let v = p.vertices().unwrap();
        assert_eq!(v.len(), 2);
    }

    #[test]
    fn unit_interval_vertices() {
        let v = unit_box(1).vertices().unwrap();
        assert_eq!(v.len(), 2);
        assert!(v[0][0].abs() < 1e-9 && (v[1][0] - 1.0).abs() < 1e-9);
    }

    #[test]
    fn unbounded_vertices_rejected() {
        let slab = unit_box(1).embed(2, &[0]).unwrap();
        assert_eq!(slab.vertices(), Err(PolytopeError::UnboundedSet));
        assert_eq!(HPolytope::empty(2).vertices(), Err(PolytopeError::EmptySet));
    }

    #[test]
    fn intersection_cases() {
        let b = unit_box(2);
        let bb = b.intersect(&b).unwrap();
        assert!(bb.set_eq(&b, 1e-9).unwrap());
        assert_eq!(bb.num_inequalities(), 4);
        let far = HPolytope::from_box(&[2.0, 2.0], &[3.0, 3.0]).unwrap();
        assert!(b.intersect(&far).unwrap().is_empty().unwrap());
    }

    #[test]
    fn inclusion_cases() {
        let b = unit_box(2);
        let half = HPolytope::from_box(&[0.0, 0.0], &[0.5, 1.0]).unwrap();
        assert!(b.includes(&half, 1e-9).unwrap());
        assert!(!half.includes(&b, 1e-9).unwrap());
    }

    #[test]
    fn elimination_of_triangle() {
        let tri = HPolytope::from_vertices(&[vec![1.0, 2.0], vec![3.0, 2.0], vec![2.0, 4.0]]).unwrap();
        let x = tri.project_onto(&[0], DEFAULT_ELIMINATION_CAP).unwrap();
        assert!((x.support(&[1.0]).unwrap() - 3.0).abs() < 1e-9);
        assert!((x.support(&[-1.0]).unwrap() + 1.0).abs() < 1e-9);
        let y = tri.project_onto(&[1], DEFAULT_ELIMINATION_CAP).unwrap();
        assert!((y.support(&[1.0]).unwrap() - 4.0).abs() < 1e-9);
    }

    #[test]
    fn elimination_through_equality() {
        // x1 = x0 + u, |u| <= 1, x1 in [-1, 1]  =>  x0 in [-2, 2]
        let p = HPolytope::new(
            3,
            vec![
                vec![0.0, 1.0, 0.0],
                vec![0.0, -1.0, 0.0],
                vec![0.0, 0.0, 1.0],
                vec![0.0, 0.0, -1.0],
            ],
            vec![1.0, 1.0, 1.0, 1.0],
            vec![vec![-1.0, -1.0, 1.0]],
            vec![0.0],
        )
        .unwrap();
        let x0 = p.project_onto(&[0], DEFAULT_ELIMINATION_CAP).unwrap();
        assert!((x0.support(&[1.0]).unwrap() - 2.0).abs() < 1e-9);
        assert!((x0.support(&[-1.0]).unwrap() - 2.0).abs() < 1e-9);
    }

    #[test]
    fn elimination_cap_is_enforced() {
        let p = HPolytope::from_vertices(&[
            vec![0.0, 0.0, 0.0],
            vec![1.0, 0.0, 0.0],
            vec![0.0, 1.0, 0.0],
            vec![0.0, 0.0, 1.0],
        ])
        .unwrap();
        assert!(matches!(
            p.project_onto(&[0], 1),
            Err(PolytopeError::EliminationBlowup { .. })
        ));
    }

    #[test]
    fn text_round_trip() {
        let tri = HPolytope::from_vertices(&[vec![1.0, 2.0], vec![3.0, 2.0], vec![2.0, 4.0]]).unwrap();
        let seg = HPolytope::from_vertices(&[vec![0.0, 0.0], vec![1.0, 1.0]]).unwrap();
        for p in [tri, seg] {
            let back = HPolytope::from_text(&p.to_text()).unwrap();
            // rows are renormalized on load, so compare up to rounding
            assert_eq!(back.num_inequalities(), p.num_inequalities());
            assert_eq!(back.num_equalities(), p.num_equalities());
            for ((a, b), (c, d)) in back.inequalities().zip(p.inequalities()) {
                assert!(a.iter().zip(c).all(|(x, y)| (x - y).abs() < 1e-12));
                assert!((b - d).abs() < 1e-12);
            }
            assert!(back.set_eq(&p, 1e-9).unwrap());
        }
        let parsed = HPolytope::from_text("# unit interval\ndim 1\nI 1 1\nI -1 0\n").unwrap();
        assert_eq!(parsed.num_inequalities(), 2);
    }

    #[test]
    fn text_errors_carry_line_numbers() {
        assert!(matches!(
            HPolytope::from_text("dim 2\nI 1 2\n"),
            Err(PolytopeError::Parse { line: 2, .. })
        ));
        assert!(matches!(HPolytope::from_text("I 1 2\n"), Err(PolytopeError::Parse { line: 1, .. })));
        assert!(matches!(HPolytope::from_text("dim 1\nX 1 2\n"), Err(PolytopeError::Parse { .. })));
    }

    #[test]
    fn from_vertices_rejects_empty() {
        assert_eq!(HPolytope::from_vertices(&[]), Err(PolytopeError::DegenerateInput));
    }
}
