//! Linear-affine agents: assembly of the local polytopic constraint system,
//! with robust tightening against bounded additive disturbances.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::axisset::{AxisSet, LabeledSet};
use crate::polytope::{HPolytope, PolytopeError};
use crate::reachability::{AxisIndex, Dynamics, NetworkSpec, ReachError, ReachMode, Region, Relation, Scope, ScopedRegion};

/// Delay between a disturbance sample and its first effect on the state
/// inside the trajectory perturbation sum.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DisturbanceLag {
    /// `χ(t)` sums `d(τ)` for `τ ≤ t − 2`.
    #[default]
    Paper,
    /// One-step propagation: `τ ≤ t − 1`.
    Standard,
}

impl DisturbanceLag {
    pub fn steps(self) -> usize {
        match self {
            DisturbanceLag::Paper => 2,
            DisturbanceLag::Standard => 1,
        }
    }
}

/// Constraint that produced a row.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "source", rename_all = "snake_case")]
pub enum RowSource {
    Dynamics { agent: usize, t: usize },
    StateSet { agent: usize, t: usize },
    InputSet { agent: usize, t: usize },
    Coupling { agent: usize, index: usize, t: usize },
    Start { agent: usize },
    PartitionK { agent: usize, t: usize },
    Target { agent: usize },
}

/// `rows · z (≤ or =) rhs`, one source tag per row.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct LinearRows {
    pub width: usize,
    pub rows: Vec<Vec<f64>>,
    pub rhs: Vec<f64>,
    pub sources: Vec<RowSource>,
}

impl LinearRows {
    fn new(width: usize) -> Self {
        LinearRows {
            width,
            ..Default::default()
        }
    }

    fn push(&mut self, row: Vec<f64>, rhs: f64, source: RowSource) {
        debug_assert_eq!(row.len(), self.width);
        self.rows.push(row);
        self.rhs.push(rhs);
        self.sources.push(source);
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    /// `row · z − rhs` for every row.
    pub fn residuals(&self, z: &[f64]) -> Vec<f64> {
        self.rows
            .iter()
            .zip(&self.rhs)
            .map(|(r, b)| r.iter().zip(z).map(|(p, q)| p * q).sum::<f64>() - b)
            .collect()
    }
}

/// The assembled system `F z = f`, `G z ≤ g − δ` of one scope.
#[derive(Debug, Clone)]
pub struct RobustLocalSystem {
    pub axes: AxisSet,
    pub equalities: LinearRows,
    pub inequalities: LinearRows,
    /// `δ`, one entry per inequality row.
    pub margins: Vec<f64>,
    /// Maps the stacked disturbance `(d(0), ..., d(H−1))` to the trajectory
    /// perturbation over `axes`.
    pub disturbance_map: DMatrix<f64>,
    /// A disturbance sequence attaining each row's margin.
    pub worst_case: Vec<Vec<f64>>,
}

impl RobustLocalSystem {
    pub fn polytope(&self) -> Result<HPolytope, PolytopeError> {
        let rhs: Vec<f64> = self.inequalities.rhs.iter().zip(&self.margins).map(|(g, d)| g - d).collect();
        let p = HPolytope::new(
            self.axes.len(),
            self.inequalities.rows.clone(),
            rhs,
            self.equalities.rows.clone(),
            self.equalities.rhs.clone(),
        )?;
        p.remove_redundancy()
    }

    pub fn labeled(&self) -> Result<LabeledSet, ReachError> {
        Ok(LabeledSet::polytope(self.axes.clone(), self.polytope()?)?)
    }
}

fn affine_of(spec: &NetworkSpec, i: usize) -> Result<&crate::reachability::AffineDynamics, ReachError> {
    match &spec.agents[i].dynamics {
        Dynamics::Affine(d) => Ok(d),
        Dynamics::Finite(_) => Err(ReachError::UnsupportedDynamics {
            agent: i,
            reason: "finite transition tables have no affine form".into(),
        }),
    }
}

fn place(row: &mut [f64], positions: &[usize], block: &DMatrix<f64>, r: usize, sign: f64) {
    for (c, &p) in positions.iter().enumerate() {
        row[p] += sign * block[(r, c)];
    }
}

/// Closed-form dynamics rows of every owner:
/// `x_i(t) = A_ii^t x_i(0) + Σ_τ A_ii^{t−τ−1} (Σ_{j≠i} A_ij x_j(τ) + Σ_j B_ij u_j(τ) + K_i)`
/// for `t = 1, ..., H`.
pub fn build_equalities(spec: &NetworkSpec, index: &AxisIndex, scope: &Scope) -> Result<LinearRows, ReachError> {
    let mut out = LinearRows::new(scope.width());
    for &i in &scope.owners {
        let d = affine_of(spec, i)?;
        let n_i = spec.agents[i].state_dim;
        let a_ii = d.a.get(&i).cloned().unwrap_or_else(|| DMatrix::zeros(n_i, n_i));
        // powers[p] = A_ii^p
        let mut powers = vec![DMatrix::identity(n_i, n_i)];
        for p in 1..=index.horizon() {
            powers.push(&powers[p - 1] * &a_ii);
        }
        let x0 = scope.positions(&index.x_tilde(0, i));
        for t in 1..=index.horizon() {
            let xt = scope.positions(&index.x_tilde(t, i));
            let mut rows = vec![vec![0.0; scope.width()]; n_i];
            let mut rhs = vec![0.0; n_i];
            for (r, row) in rows.iter_mut().enumerate() {
                row[xt[r]] += 1.0;
                place(row, &x0, &powers[t], r, -1.0);
            }
            for tau in 0..t {
                let p = &powers[t - tau - 1];
                for (&j, a_ij) in &d.a {
                    if j == i {
                        continue;
                    }
                    let blk = p * a_ij;
                    let pos = scope.positions(&index.x_tilde(tau, j));
                    for (r, row) in rows.iter_mut().enumerate() {
                        place(row, &pos, &blk, r, -1.0);
                    }
                }
                for (&j, b_ij) in &d.b {
                    let blk = p * b_ij;
                    let pos = scope.positions(&index.u_tilde(tau, j));
                    for (r, row) in rows.iter_mut().enumerate() {
                        place(row, &pos, &blk, r, -1.0);
                    }
                }
                let k = p * &d.k;
                for (r, v) in rhs.iter_mut().enumerate() {
                    *v += k[r];
                }
            }
            for (row, b) in rows.into_iter().zip(rhs) {
                out.push(row, b, RowSource::Dynamics { agent: i, t });
            }
        }
    }
    Ok(out)
}

/// One-step dynamics rows `x_i(t+1) − Σ_j A_ij x_j(t) − Σ_j B_ij u_j(t) = K_i`
/// for every owner and `t < H`.
pub fn build_recursive_equalities(spec: &NetworkSpec, index: &AxisIndex, scope: &Scope) -> Result<LinearRows, ReachError> {
    let mut out = LinearRows::new(scope.width());
    for &i in &scope.owners {
        let d = affine_of(spec, i)?;
        for t in 0..index.horizon() {
            let next = scope.positions(&index.x_tilde(t + 1, i));
            for r in 0..spec.agents[i].state_dim {
                let mut row = vec![0.0; scope.width()];
                row[next[r]] = 1.0;
                for (&j, a_ij) in &d.a {
                    place(&mut row, &scope.positions(&index.x_tilde(t, j)), a_ij, r, -1.0);
                }
                for (&j, b_ij) in &d.b {
                    place(&mut row, &scope.positions(&index.u_tilde(t, j)), b_ij, r, -1.0);
                }
                out.push(row, d.k[r], RowSource::Dynamics { agent: i, t: t + 1 });
            }
        }
    }
    Ok(out)
}

fn push_region(out: &mut LinearRows, scope: &Scope, sub: &AxisSet, region: &Region, source: RowSource) -> Result<(), ReachError> {
    let Some(p) = region.as_polytope() else {
        return Err(ReachError::UnsupportedDynamics {
            agent: source_agent(source),
            reason: "affine agents need polytopic regions".into(),
        });
    };
    let pos = scope.positions(sub);
    let lift = |a: &[f64], sign: f64| {
        let mut row = vec![0.0; scope.width()];
        for (k, &p) in pos.iter().enumerate() {
            row[p] = sign * a[k];
        }
        row
    };
    for (a, b) in p.inequalities() {
        out.push(lift(a, 1.0), b, source);
    }
    for (a, b) in p.equalities() {
        out.push(lift(a, 1.0), b, source);
        out.push(lift(a, -1.0), -b, source);
    }
    Ok(())
}

fn source_agent(s: RowSource) -> usize {
    match s {
        RowSource::Dynamics { agent, .. }
        | RowSource::StateSet { agent, .. }
        | RowSource::InputSet { agent, .. }
        | RowSource::Coupling { agent, .. }
        | RowSource::Start { agent }
        | RowSource::PartitionK { agent, .. }
        | RowSource::Target { agent } => agent,
    }
}

fn push_scoped(out: &mut LinearRows, index: &AxisIndex, scope: &Scope, t: usize, s: &ScopedRegion, source: RowSource) -> Result<(), ReachError> {
    push_region(out, scope, &index.states_of(t, &s.agents), &s.region, source)
}

/// Inequality rows: state and input sets of every member at every step,
/// then per owner the couplings and partitions for `t < H`, the start
/// restriction (checking mode only) and the target at `t = H`.
pub fn build_inequalities(spec: &NetworkSpec, index: &AxisIndex, scope: &Scope, mode: ReachMode) -> Result<LinearRows, ReachError> {
    let mut out = LinearRows::new(scope.width());
    let h = index.horizon();
    for &j in &scope.members {
        let a = &spec.agents[j];
        for t in 0..=h {
            push_region(&mut out, scope, &index.x_tilde(t, j), &a.state_set, RowSource::StateSet { agent: j, t })?;
            push_region(&mut out, scope, &index.u_tilde(t, j), &a.input_set, RowSource::InputSet { agent: j, t })?;
        }
    }
    for &i in &scope.owners {
        let a = &spec.agents[i];
        for (l, c) in a.coupling.iter().enumerate() {
            if c.relation == Relation::Lt {
                log::warn!("agent {i}: strict coupling {l} is relaxed to a non-strict one");
            }
            for t in 0..h {
                let mut row = vec![0.0; scope.width()];
                for (j, coeffs) in &c.state_terms {
                    for (p, v) in scope.positions(&index.x_tilde(t, *j)).into_iter().zip(coeffs) {
                        row[p] += v;
                    }
                }
                for (j, coeffs) in &c.input_terms {
                    for (p, v) in scope.positions(&index.u_tilde(t, *j)).into_iter().zip(coeffs) {
                        row[p] += v;
                    }
                }
                let source = RowSource::Coupling { agent: i, index: l, t };
                if c.relation == Relation::Eq {
                    out.push(row.iter().map(|v| -v).collect(), -c.rhs, source);
                }
                out.push(row, c.rhs, source);
            }
        }
        if mode == ReachMode::ReachCheck {
            if let Some(s) = &a.start {
                push_scoped(&mut out, index, scope, 0, s, RowSource::Start { agent: i })?;
            }
        }
        if let Some(p) = &a.partition_k {
            for t in 0..h {
                push_scoped(&mut out, index, scope, t, p, RowSource::PartitionK { agent: i, t })?;
            }
        }
        if let Some(s) = a.effective_target() {
            push_scoped(&mut out, index, scope, h, s, RowSource::Target { agent: i })?;
        }
    }
    Ok(out)
}

/// Column offsets of each agent's disturbance inside one `d(τ)` block.
fn disturbance_offsets(spec: &NetworkSpec) -> Result<(Vec<usize>, usize), ReachError> {
    let mut offs = Vec::with_capacity(spec.len());
    let mut v = 0;
    for i in 0..spec.len() {
        offs.push(v);
        v += affine_of(spec, i)?.e.ncols();
    }
    Ok((offs, v))
}

/// Map from the stacked disturbance `(d(0), ..., d(H−1))` to the
/// perturbation of every state coordinate of the scope; input rows are 0.
/// State `x_j(t)` receives `Σ_{τ ≤ t−lag} 𝐀^{t−τ−lag} 𝐄 d(τ)` restricted to `j`.
pub fn disturbance_map(spec: &NetworkSpec, index: &AxisIndex, scope: &Scope, lag: DisturbanceLag) -> Result<DMatrix<f64>, ReachError> {
    let h = index.horizon();
    let n = index.total_states();
    let (offs, v) = disturbance_offsets(spec)?;
    let mut out = DMatrix::zeros(scope.width(), h * v);
    if v == 0 || h == 0 {
        return Ok(out);
    }
    let state_off: Vec<usize> = (0..spec.len()).map(|j| spec.agents[..j].iter().map(|a| a.state_dim).sum()).collect();
    let mut big_a = DMatrix::zeros(n, n);
    let mut big_e = DMatrix::zeros(n, v);
    for i in 0..spec.len() {
        let d = affine_of(spec, i)?;
        for (&j, a_ij) in &d.a {
            big_a.view_mut((state_off[i], state_off[j]), a_ij.shape()).copy_from(a_ij);
        }
        big_e.view_mut((state_off[i], offs[i]), d.e.shape()).copy_from(&d.e);
    }
    let lag = lag.steps();
    // prop[p] = 𝐀^p 𝐄
    let mut prop = vec![big_e.clone()];
    for p in 1..h {
        prop.push(&big_a * &prop[p - 1]);
    }
    for &j in &scope.members {
        let n_j = spec.agents[j].state_dim;
        for t in lag..=h {
            let rows = scope.positions(&index.x_tilde(t, j));
            for tau in 0..=(t - lag) {
                let blk = prop[t - tau - lag].rows(state_off[j], n_j);
                for (r, &pr) in rows.iter().enumerate() {
                    for c in 0..v {
                        out[(pr, tau * v + c)] = blk[(r, c)];
                    }
                }
            }
        }
    }
    Ok(out)
}

/// Lower and upper corners when the set is an axis-aligned box.
fn box_bounds(p: &HPolytope) -> Option<(Vec<f64>, Vec<f64>)> {
    if p.num_equalities() > 0 {
        return None;
    }
    let mut lo = vec![f64::NEG_INFINITY; p.dim()];
    let mut hi = vec![f64::INFINITY; p.dim()];
    for (a, b) in p.inequalities() {
        let mut nz = a.iter().enumerate().filter(|(_, v)| **v != 0.0);
        let (k, &c) = nz.next()?;
        if nz.next().is_some() {
            return None;
        }
        if c > 0.0 {
            hi[k] = hi[k].min(b / c);
        } else {
            lo[k] = lo[k].max(b / c);
        }
    }
    if lo.iter().chain(&hi).all(|v| v.is_finite()) && lo.iter().zip(&hi).all(|(l, h)| l <= h) {
        Some((lo, hi))
    } else {
        None
    }
}

/// Support of one disturbance set in direction `c`, with a maximizer.
fn disturbance_support(set: &HPolytope, bounds: Option<&(Vec<f64>, Vec<f64>)>, c: &[f64]) -> Result<(f64, Vec<f64>), ReachError> {
    if let Some((lo, hi)) = bounds {
        let arg: Vec<f64> = c.iter().zip(lo.iter().zip(hi)).map(|(ci, (l, h))| if *ci > 0.0 { *h } else { *l }).collect();
        let val = c.iter().zip(&arg).map(|(p, q)| p * q).sum();
        return Ok((val, arg));
    }
    let arg = set.maximizer(c)?.ok_or(PolytopeError::UnboundedSet)?;
    let val = c.iter().zip(&arg).map(|(p, q)| p * q).sum();
    Ok((val, arg))
}

/// Per-row robust margins `δ_r = max_𝐝 (G_r 𝐋) 𝐝` over the product of the
/// disturbance sets, plus an attaining disturbance sequence per row.
pub fn robust_margin(spec: &NetworkSpec, ineq: &LinearRows, map: &DMatrix<f64>) -> Result<(Vec<f64>, Vec<Vec<f64>>), ReachError> {
    let (offs, v) = disturbance_offsets(spec)?;
    let blocks = map.ncols().checked_div(v).unwrap_or(0);
    let mut sets = Vec::new();
    for (i, &off) in offs.iter().enumerate() {
        let d = affine_of(spec, i)?;
        if d.e.ncols() == 0 {
            continue;
        }
        let set = d.disturbance.as_ref().ok_or(ReachError::UnboundedDisturbance { agent: i })?;
        let bounds = box_bounds(set);
        let rest = match &bounds {
            Some((lo, hi)) => lo.iter().zip(hi).map(|(l, h)| 0.5 * (l + h)).collect(),
            None => set.interior_hint()?.ok_or(ReachError::UnboundedDisturbance { agent: i })?,
        };
        sets.push((off, set, bounds, rest));
    }
    let mut margins = Vec::with_capacity(ineq.len());
    let mut worst = Vec::with_capacity(ineq.len());
    for row in &ineq.rows {
        let g = nalgebra::RowDVector::from_row_slice(row);
        let c = &g * map;
        let mut delta = 0.0;
        let mut d = vec![0.0; map.ncols()];
        for tau in 0..blocks {
            for (off, set, bounds, rest) in &sets {
                let start = tau * v + off;
                let width = set.dim();
                let cb: Vec<f64> = (0..width).map(|k| c[start + k]).collect();
                if cb.iter().all(|x| *x == 0.0) {
                    d[start..start + width].copy_from_slice(rest);
                    continue;
                }
                let (val, arg) = disturbance_support(set, bounds.as_ref(), &cb)?;
                delta += val;
                d[start..start + width].copy_from_slice(&arg);
            }
        }
        margins.push(delta);
        worst.push(d);
    }
    Ok((margins, worst))
}

/// Assembles the robust system of a scope. `recursive` selects one-step
/// dynamics rows instead of the closed form.
pub fn robust_local_system(
    spec: &NetworkSpec,
    index: &AxisIndex,
    scope: &Scope,
    mode: ReachMode,
    lag: DisturbanceLag,
    recursive: bool,
) -> Result<RobustLocalSystem, ReachError> {
    let equalities = if recursive {
        build_recursive_equalities(spec, index, scope)?
    } else {
        build_equalities(spec, index, scope)?
    };
    let inequalities = build_inequalities(spec, index, scope, mode)?;
    let disturbance_map = disturbance_map(spec, index, scope, lag)?;
    let (margins, worst_case) = robust_margin(spec, &inequalities, &disturbance_map)?;
    if lag == DisturbanceLag::Paper && margins.iter().any(|d| *d != 0.0) {
        log::info!("disturbance margins use the two-step lag; the one-step convention is available as `standard`");
    }
    Ok(RobustLocalSystem {
        axes: scope.axes.clone(),
        equalities,
        inequalities,
        margins,
        disturbance_map,
        worst_case,
    })
}

/// The robust local solution set of node `i`, over `B^H_i`.
pub fn robust_local_polytope(spec: &NetworkSpec, index: &AxisIndex, i: usize, mode: ReachMode, lag: DisturbanceLag) -> Result<LabeledSet, ReachError> {
    robust_local_system(spec, index, &Scope::local(index, i), mode, lag, false)?.labeled()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::reachability::{AffineDynamics, AgentSpec};
    use nalgebra::DVector;
    use std::collections::BTreeMap;

    fn scalar(a: f64, k: f64, dist: Option<f64>, h: usize) -> NetworkSpec {
        let e = if dist.is_some() { DMatrix::from_element(1, 1, 1.0) } else { DMatrix::zeros(1, 0) };
        NetworkSpec {
            horizon: h,
            agents: vec![AgentSpec {
                state_dim: 1,
                input_dim: 1,
                state_neighbours: vec![],
                constraint_neighbours: vec![],
                dynamics: Dynamics::Affine(AffineDynamics {
                    a: BTreeMap::from([(0, DMatrix::from_element(1, 1, a))]),
                    b: BTreeMap::from([(0, DMatrix::from_element(1, 1, 1.0))]),
                    k: DVector::from_element(1, k),
                    e,
                    disturbance: dist.map(|w| HPolytope::from_box(&[-w], &[w]).unwrap()),
                }),
                state_set: Region::Polytope(HPolytope::from_box(&[-10.0], &[10.0]).unwrap()),
                input_set: Region::Polytope(HPolytope::from_box(&[-1.0], &[1.0]).unwrap()),
                target: Some(ScopedRegion::own(0, Region::Polytope(HPolytope::from_box(&[-1.0], &[1.0]).unwrap()))),
                start: None,
                partition_k: None,
                partition_h: None,
                coupling: vec![],
            }],
        }
    }

    fn setup(spec: &NetworkSpec) -> (AxisIndex, Scope) {
        let index = spec.axis_index().unwrap();
        let scope = Scope::local(&index, 0);
        (index, scope)
    }

    #[test]
    fn integrator_equality() {
        let spec = scalar(1.0, 0.0, None, 1);
        let (index, scope) = setup(&spec);
        let f = build_equalities(&spec, &index, &scope).unwrap();
        // z = (x0, u0, x1, u1)
        assert_eq!(f.rows, vec![vec![-1.0, -1.0, 1.0, 0.0]]);
        assert_eq!(f.rhs, vec![0.0]);
    }

    #[test]
    fn doubling_map_closed_form() {
        let spec = scalar(2.0, 1.0, None, 2);
        let (index, scope) = setup(&spec);
        let f = build_equalities(&spec, &index, &scope).unwrap();
        // z = (x0, u0, x1, u1, x2, u2)
        assert_eq!(f.rows[0], vec![-2.0, -1.0, 1.0, 0.0, 0.0, 0.0]);
        assert_eq!(f.rhs[0], 1.0);
        assert_eq!(f.rows[1], vec![-4.0, -2.0, 0.0, -1.0, 1.0, 0.0]);
        assert_eq!(f.rhs[1], 3.0);
    }

    #[test]
    fn input_box_rows() {
        let spec = scalar(1.0, 0.0, None, 1);
        let (index, scope) = setup(&spec);
        let g = build_inequalities(&spec, &index, &scope, ReachMode::Pre).unwrap();
        let input_rows: Vec<(&Vec<f64>, f64)> = g
            .rows
            .iter()
            .zip(&g.rhs)
            .zip(&g.sources)
            .filter(|(_, s)| matches!(s, RowSource::InputSet { t: 0, .. }))
            .map(|((r, b), _)| (r, *b))
            .collect();
        assert_eq!(input_rows.len(), 2);
        assert!(input_rows.iter().any(|(r, b)| r[1] > 0.0 && (r[1] - b).abs() < 1e-12));
        assert!(input_rows.iter().any(|(r, b)| r[1] < 0.0 && (-r[1] - b).abs() < 1e-12));
        assert!(g.sources.iter().any(|s| matches!(s, RowSource::InputSet { t: 1, .. })));
    }

    #[test]
    fn no_disturbance_no_margin() {
        let spec = scalar(1.0, 0.0, None, 2);
        let (index, scope) = setup(&spec);
        let sys = robust_local_system(&spec, &index, &scope, ReachMode::Pre, DisturbanceLag::Paper, false).unwrap();
        assert!(sys.margins.iter().all(|d| *d == 0.0));
    }

    #[test]
    fn two_step_lag_margin() {
        let spec = scalar(1.0, 0.0, Some(0.5), 2);
        let (index, scope) = setup(&spec);
        let sys = robust_local_system(&spec, &index, &scope, ReachMode::Pre, DisturbanceLag::Paper, false).unwrap();
        let target = sys
            .inequalities
            .sources
            .iter()
            .zip(&sys.inequalities.rows)
            .position(|(s, r)| matches!(s, RowSource::Target { .. }) && r[4] > 0.0)
            .unwrap();
        assert!((sys.margins[target] - 0.5).abs() < 1e-12);
    }

    #[test]
    fn one_step_lag_shrinks_pre() {
        let spec = scalar(1.0, 0.0, Some(0.5), 1);
        let (index, scope) = setup(&spec);
        let sys = robust_local_system(&spec, &index, &scope, ReachMode::Pre, DisturbanceLag::Standard, false).unwrap();
        let pre = sys.polytope().unwrap().project_onto(&[0], 10_000).unwrap();
        assert!((pre.support(&[1.0]).unwrap() - 1.5).abs() < 1e-9);
        assert!((pre.support(&[-1.0]).unwrap() - 1.5).abs() < 1e-9);
    }
}
