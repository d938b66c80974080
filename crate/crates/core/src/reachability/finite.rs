//! Exhaustive enumeration of local trajectories for finite-transition agents.

use crate::axisset::POINT_EPS;

use super::{AxisIndex, Dynamics, NetworkSpec, ReachError, ReachMode, Region, Relation, Scope, ScopedRegion, Transition};

struct Enumerator<'a> {
    spec: &'a NetworkSpec,
    index: &'a AxisIndex,
    scope: &'a Scope,
    mode: ReachMode,
    out: Vec<Vec<f64>>,
}

fn points_of(r: &Region) -> &[Vec<f64>] {
    match r {
        Region::Points(t) => t.points(),
        Region::Polytope(_) => &[],
    }
}

fn close(a: &[f64], b: &[f64]) -> bool {
    a.len() == b.len() && a.iter().zip(b).all(|(x, y)| (x - y).abs() <= POINT_EPS)
}

impl<'a> Enumerator<'a> {
    fn gather(&self, z: &[f64], axes: &crate::axisset::AxisSet) -> Vec<f64> {
        self.scope.positions(axes).into_iter().map(|p| z[p]).collect()
    }

    fn scoped_ok(&self, z: &[f64], t: usize, s: &ScopedRegion) -> bool {
        let v = self.gather(z, &self.index.states_of(t, &s.agents));
        s.region.contains(&v, POINT_EPS)
    }

    /// Owner constraints that only involve slice `t`.
    fn slice_ok(&self, z: &[f64], t: usize) -> bool {
        let h = self.index.horizon();
        self.scope.owners.iter().all(|&i| {
            let a = &self.spec.agents[i];
            if t < h {
                for c in &a.coupling {
                    let mut v = 0.0;
                    for (j, coeffs) in &c.state_terms {
                        v += dot(coeffs, &self.gather(z, &self.index.x_tilde(t, *j)));
                    }
                    for (j, coeffs) in &c.input_terms {
                        v += dot(coeffs, &self.gather(z, &self.index.u_tilde(t, *j)));
                    }
                    let ok = match c.relation {
                        Relation::Le => v <= c.rhs + POINT_EPS,
                        Relation::Eq => (v - c.rhs).abs() <= POINT_EPS,
                        Relation::Lt => v < c.rhs,
                    };
                    if !ok {
                        return false;
                    }
                }
                if let Some(p) = &a.partition_k {
                    if !self.scoped_ok(z, t, p) {
                        return false;
                    }
                }
            }
            if t == 0 && self.mode == ReachMode::ReachCheck {
                if let Some(s) = &a.start {
                    if !self.scoped_ok(z, 0, s) {
                        return false;
                    }
                }
            }
            if t == h {
                if let Some(s) = a.effective_target() {
                    if !self.scoped_ok(z, h, s) {
                        return false;
                    }
                }
            }
            true
        })
    }

    /// Successor states of owner `i` from slice `t − 1`.
    fn successors(&self, z: &[f64], t: usize, i: usize) -> Vec<Vec<f64>> {
        let Dynamics::Finite(table) = &self.spec.agents[i].dynamics else {
            return Vec::new();
        };
        let reads = self.spec.agents[i].reads(i);
        let x = self.gather(z, &self.index.states_of(t - 1, &reads));
        let u = self.gather(z, &self.index.inputs_of(t - 1, &reads));
        table
            .iter()
            .filter(|tr: &&Transition| close(&tr.state, &x) && close(&tr.input, &u))
            .map(|tr| tr.next.clone())
            .collect()
    }

    /// Assigns member number `k` of slice `t`, then recurses.
    fn descend(&mut self, z: &mut Vec<f64>, t: usize, k: usize) {
        let members = &self.scope.members;
        if k == members.len() {
            if !self.slice_ok(z, t) {
                return;
            }
            if t == self.index.horizon() {
                self.out.push(z.clone());
            } else {
                self.descend(z, t + 1, 0);
            }
            return;
        }
        let j = members[k];
        let a = &self.spec.agents[j];
        let xs: Vec<Vec<f64>> = if t > 0 && self.scope.owners.contains(&j) {
            self.successors(z, t, j)
                .into_iter()
                .filter(|x| a.state_set.contains(x, POINT_EPS))
                .collect()
        } else {
            points_of(&a.state_set).to_vec()
        };
        let us = points_of(&a.input_set).to_vec();
        let xp = self.scope.positions(&self.index.x_tilde(t, j));
        let up = self.scope.positions(&self.index.u_tilde(t, j));
        for x in &xs {
            for (p, v) in xp.iter().zip(x) {
                z[*p] = *v;
            }
            for u in &us {
                for (p, v) in up.iter().zip(u) {
                    z[*p] = *v;
                }
                self.descend(z, t, k + 1);
            }
        }
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(p, q)| p * q).sum()
}

/// Every trajectory over the scope's axes that satisfies the owners' rows.
pub(super) fn enumerate(spec: &NetworkSpec, index: &AxisIndex, scope: &Scope, mode: ReachMode) -> Result<Vec<Vec<f64>>, ReachError> {
    for &j in &scope.members {
        let a = &spec.agents[j];
        if !matches!(a.state_set, Region::Points(_)) || !matches!(a.input_set, Region::Points(_)) {
            return Err(ReachError::UnsupportedDynamics {
                agent: j,
                reason: "finite agents need point-list state and input sets".into(),
            });
        }
    }
    let mut e = Enumerator {
        spec,
        index,
        scope,
        mode,
        out: Vec::new(),
    };
    let mut z = vec![f64::NAN; scope.width()];
    e.descend(&mut z, 0, 0);
    Ok(e.out)
}
