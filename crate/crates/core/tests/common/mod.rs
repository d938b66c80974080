//! Seeded generators of small networks and trajectory helpers shared by
//! the integration tests.
#![allow(dead_code)]

use std::collections::BTreeMap;

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use reachnet_core::affine::DisturbanceLag;
use reachnet_core::axisset::AxisSet;
use reachnet_core::polytope::HPolytope;
use reachnet_core::reachability::{
    AffineDynamics, AgentSpec, AxisIndex, Dynamics, LinearCoupling, NetworkSpec, Region, Relation, ScopedRegion,
};

pub fn boxed(lo: &[f64], hi: &[f64]) -> Region {
    Region::Polytope(HPolytope::from_box(lo, hi).unwrap())
}

pub fn cube(n: usize, r: f64) -> Region {
    boxed(&vec![-r; n], &vec![r; n])
}

fn random_matrix(rng: &mut ChaCha8Rng, r: usize, c: usize, scale: f64) -> DMatrix<f64> {
    DMatrix::from_fn(r, c, |_, _| (rng.gen_range(-1.0..1.0) * scale * 4.0).round() / 4.0)
}

/// `count` agents in a chain where agent `i+1` reads agent `i`; optional
/// coupling rows and disturbances.
pub fn random_network(seed: u64) -> NetworkSpec {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let count = rng.gen_range(2..=3);
    let planar = rng.gen_bool(0.3);
    let horizon = if planar { rng.gen_range(1..=2) } else { rng.gen_range(1..=3) };
    let dims: Vec<usize> = (0..count).map(|_| if planar && rng.gen_bool(0.5) { 2 } else { 1 }).collect();
    let disturbed = rng.gen_bool(0.3);
    let mut agents = Vec::new();
    for i in 0..count {
        let n = dims[i];
        let mut a = BTreeMap::new();
        let mut diag = random_matrix(&mut rng, n, n, 0.6);
        for k in 0..n {
            diag[(k, k)] = 1.0;
        }
        a.insert(i, diag);
        let mut state_neighbours = Vec::new();
        if i > 0 {
            a.insert(i - 1, random_matrix(&mut rng, n, dims[i - 1], 0.5));
            state_neighbours.push(i - 1);
        }
        let mut b = BTreeMap::new();
        let mut bi = DMatrix::zeros(n, 1);
        bi[(n - 1, 0)] = 1.0;
        if n == 2 {
            bi[(0, 0)] = 0.5;
        }
        b.insert(i, bi);
        let k = DVector::from_fn(n, |_, _| (rng.gen_range(-0.5..0.5) * 4.0f64).round() / 4.0);
        let (e, disturbance) = if disturbed {
            (DMatrix::from_element(n, 1, 1.0), Some(HPolytope::from_box(&[-0.1], &[0.1]).unwrap()))
        } else {
            (DMatrix::zeros(n, 0), None)
        };
        let half = rng.gen_range(1.0..2.0f64);
        let centre: Vec<f64> = (0..n).map(|_| rng.gen_range(-0.5..0.5)).collect();
        let lo: Vec<f64> = centre.iter().map(|c| c - half).collect();
        let hi: Vec<f64> = centre.iter().map(|c| c + half).collect();
        let mut coupling = Vec::new();
        let mut constraint_neighbours = Vec::new();
        if i > 0 && rng.gen_bool(0.5) {
            coupling.push(LinearCoupling {
                state_terms: vec![(i - 1, vec![1.0; dims[i - 1]]), (i, vec![1.0; n])],
                input_terms: vec![],
                relation: Relation::Le,
                rhs: rng.gen_range(2.0..5.0),
            });
            constraint_neighbours.push(i - 1);
        }
        agents.push(AgentSpec {
            state_dim: n,
            input_dim: 1,
            state_neighbours,
            constraint_neighbours,
            dynamics: Dynamics::Affine(AffineDynamics {
                a,
                b,
                k,
                e,
                disturbance,
            }),
            state_set: cube(n, 5.0),
            input_set: cube(1, 1.0),
            target: Some(ScopedRegion::own(i, boxed(&lo, &hi))),
            start: None,
            partition_k: None,
            partition_h: None,
            coupling,
        });
    }
    NetworkSpec { horizon, agents }
}

/// Two scalar agents, `x_1` driven by `x_2`:
/// `x_1(t+1) = x_1 + 0.5 x_2 + u_1`, `x_2(t+1) = x_2 + u_2`.
pub fn two_agent_chain(horizon: usize) -> NetworkSpec {
    let one = |v: f64| DMatrix::from_element(1, 1, v);
    let agent = |a: BTreeMap<usize, DMatrix<f64>>, me: usize, reads: Vec<usize>| AgentSpec {
        state_dim: 1,
        input_dim: 1,
        state_neighbours: reads,
        constraint_neighbours: vec![],
        dynamics: Dynamics::Affine(AffineDynamics {
            a,
            b: BTreeMap::from([(me, one(1.0))]),
            k: DVector::zeros(1),
            e: DMatrix::zeros(1, 0),
            disturbance: None,
        }),
        state_set: cube(1, 5.0),
        input_set: cube(1, 1.0),
        target: Some(ScopedRegion::own(me, cube(1, 1.0))),
        start: None,
        partition_k: None,
        partition_h: None,
        coupling: vec![],
    };
    NetworkSpec {
        horizon,
        agents: vec![
            agent(BTreeMap::from([(0, one(1.0)), (1, one(0.5))]), 0, vec![1]),
            agent(BTreeMap::from([(1, one(1.0))]), 1, vec![]),
        ],
    }
}

/// Adds `d_i ∈ [-w, w]` entering every state coordinate of every agent.
pub fn with_disturbance(mut spec: NetworkSpec, w: f64) -> NetworkSpec {
    for a in &mut spec.agents {
        if let Dynamics::Affine(d) = &mut a.dynamics {
            d.e = DMatrix::from_element(a.state_dim, 1, 1.0);
            d.disturbance = Some(HPolytope::from_box(&[-w], &[w]).unwrap());
        }
    }
    spec
}

/// Nominal next state of agent `i` from stacked per-agent states and inputs.
pub fn step(spec: &NetworkSpec, i: usize, x: &[Vec<f64>], u: &[Vec<f64>]) -> Vec<f64> {
    let Dynamics::Affine(d) = &spec.agents[i].dynamics else {
        panic!("affine agent expected")
    };
    let mut next = d.k.clone();
    for (&j, a) in &d.a {
        next += a * DVector::from_column_slice(&x[j]);
    }
    for (&j, b) in &d.b {
        next += b * DVector::from_column_slice(&u[j]);
    }
    next.iter().copied().collect()
}

/// Vertices and convex combinations of a polytope, from LP maximizers in
/// random directions.
pub fn sample_polytope(p: &HPolytope, rng: &mut ChaCha8Rng, count: usize) -> Vec<Vec<f64>> {
    let mut corners = Vec::new();
    for _ in 0..12 {
        let dir: Vec<f64> = (0..p.dim()).map(|_| rng.gen_range(-1.0..1.0)).collect();
        if let Ok(Some(v)) = p.maximizer(&dir) {
            corners.push(v);
        }
    }
    if corners.is_empty() {
        return corners;
    }
    let mut out = corners.clone();
    while out.len() < count {
        let w: Vec<f64> = corners.iter().map(|_| rng.gen_range(0.0..1.0f64).powi(3)).collect();
        let total: f64 = w.iter().sum();
        out.push(
            (0..p.dim())
                .map(|c| corners.iter().zip(&w).map(|(v, wi)| v[c] * wi / total).sum())
                .collect(),
        );
    }
    out
}

/// Whether some input sequence drawn from `levels` (per input coordinate)
/// steers `x0` into the targets while respecting every constraint; inputs
/// at `t = H` are taken as zero.
pub fn brute_force_reachable(spec: &NetworkSpec, x0: &[Vec<f64>], levels: &[f64]) -> bool {
    fn ok_at(spec: &NetworkSpec, t: usize, x: &[Vec<f64>], u: &[Vec<f64>]) -> bool {
        spec.agents.iter().enumerate().all(|(i, a)| {
            a.state_set.contains(&x[i], 1e-12)
                && a.input_set.contains(&u[i], 1e-12)
                && (t == spec.horizon
                    || a.coupling.iter().all(|c| {
                        let v: f64 = c
                            .state_terms
                            .iter()
                            .map(|(j, w)| w.iter().zip(&x[*j]).map(|(p, q)| p * q).sum::<f64>())
                            .chain(c.input_terms.iter().map(|(j, w)| w.iter().zip(&u[*j]).map(|(p, q)| p * q).sum::<f64>()))
                            .sum();
                        v <= c.rhs + 1e-12
                    }))
                && (t == spec.horizon
                    || a.partition_k.as_ref().is_none_or(|p| {
                        let v: Vec<f64> = p.agents.iter().flat_map(|&j| x[j].clone()).collect();
                        p.region.contains(&v, 1e-12)
                    }))
        })
    }
    fn target_ok(spec: &NetworkSpec, x: &[Vec<f64>]) -> bool {
        spec.agents.iter().all(|a| {
            a.effective_target().is_none_or(|s| {
                let v: Vec<f64> = s.agents.iter().flat_map(|&j| x[j].clone()).collect();
                s.region.contains(&v, 1e-12)
            })
        })
    }
    fn search(spec: &NetworkSpec, t: usize, x: Vec<Vec<f64>>, choices: &[Vec<Vec<f64>>]) -> bool {
        if t == spec.horizon {
            let zero: Vec<Vec<f64>> = spec.agents.iter().map(|a| vec![0.0; a.input_dim]).collect();
            return ok_at(spec, t, &x, &zero) && target_ok(spec, &x);
        }
        choices.iter().any(|u| {
            ok_at(spec, t, &x, u) && {
                let next: Vec<Vec<f64>> = (0..spec.len()).map(|i| step(spec, i, &x, u)).collect();
                search(spec, t + 1, next, choices)
            }
        })
    }
    // every joint input at one step
    let mut choices: Vec<Vec<Vec<f64>>> = vec![vec![]];
    for a in &spec.agents {
        let mut per_agent: Vec<Vec<f64>> = vec![vec![]];
        for _ in 0..a.input_dim {
            per_agent = per_agent
                .into_iter()
                .flat_map(|p| levels.iter().map(move |l| [p.clone(), vec![*l]].concat()))
                .collect();
        }
        choices = choices
            .into_iter()
            .flat_map(|c| per_agent.iter().map(move |p| [c.clone(), vec![p.clone()]].concat()))
            .collect();
    }
    search(spec, 0, x0.to_vec(), &choices)
}

/// Signed distance-like margin of `p` to the boundary of `poly`: positive
/// inside, negative outside, magnitude a lower bound on the distance.
pub fn boundary_margin(poly: &HPolytope, p: &[f64]) -> f64 {
    let worst = poly
        .inequalities()
        .map(|(a, b)| {
            let n = a.iter().map(|v| v * v).sum::<f64>().sqrt();
            (a.iter().zip(p).map(|(x, y)| x * y).sum::<f64>() - b) / n
        })
        .fold(f64::NEG_INFINITY, f64::max);
    -worst
}

fn points(pts: Vec<Vec<f64>>) -> Region {
    Region::Points(reachnet_core::axisset::PointTable::new(pts[0].len(), pts).unwrap())
}

/// Finite agents with scalar states `{0, 1, 2}` and inputs `{0, 1}`, agent
/// `i+1` reading agent `i`; random partial transition tables and targets.
/// Three-agent networks get a one-step horizon.
pub fn random_finite_network(seed: u64) -> NetworkSpec {
    use reachnet_core::reachability::Transition;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let count = rng.gen_range(2..=3);
    // neighbours' trajectories are free in a local solution, so three
    // agents over two steps already yield millions of tuples
    let horizon = if count == 3 { 1 } else { rng.gen_range(1..=2) };
    let states = [0.0, 1.0, 2.0];
    let inputs = [0.0, 1.0];
    let mut agents = Vec::new();
    for i in 0..count {
        let reads: Vec<usize> = if i > 0 { vec![i - 1, i] } else { vec![i] };
        let mut table = Vec::new();
        let mut combos: Vec<(Vec<f64>, Vec<f64>)> = vec![(vec![], vec![])];
        for _ in &reads {
            let mut grown = Vec::new();
            for (s, u) in &combos {
                for x in states {
                    for v in inputs {
                        grown.push(([s.clone(), vec![x]].concat(), [u.clone(), vec![v]].concat()));
                    }
                }
            }
            combos = grown;
        }
        for (s, u) in combos {
            for x in states {
                if rng.gen_bool(0.4) {
                    table.push(Transition {
                        state: s.clone(),
                        input: u.clone(),
                        next: vec![x],
                    });
                }
            }
        }
        let mut target: Vec<Vec<f64>> = states.iter().filter(|_| rng.gen_bool(0.6)).map(|x| vec![*x]).collect();
        if target.is_empty() {
            target.push(vec![0.0]);
        }
        let mut coupling = Vec::new();
        let mut constraint_neighbours = Vec::new();
        if i > 0 && rng.gen_bool(0.5) {
            coupling.push(LinearCoupling {
                state_terms: vec![(i - 1, vec![1.0]), (i, vec![1.0])],
                input_terms: vec![],
                relation: if rng.gen_bool(0.5) { Relation::Lt } else { Relation::Le },
                rhs: 3.0,
            });
            constraint_neighbours.push(i - 1);
        }
        agents.push(AgentSpec {
            state_dim: 1,
            input_dim: 1,
            state_neighbours: if i > 0 { vec![i - 1] } else { vec![] },
            constraint_neighbours,
            dynamics: Dynamics::Finite(table),
            state_set: points(states.iter().map(|x| vec![*x]).collect()),
            input_set: points(inputs.iter().map(|x| vec![*x]).collect()),
            target: Some(ScopedRegion::own(i, points(target))),
            start: None,
            partition_k: None,
            partition_h: None,
            coupling,
        });
    }
    NetworkSpec { horizon, agents }
}

/// Per-time, per-agent states and inputs of a trajectory.
pub struct Trajectory {
    pub x: Vec<Vec<Vec<f64>>>,
    pub u: Vec<Vec<Vec<f64>>>,
}

impl Trajectory {
    pub fn to_z(&self, index: &AxisIndex) -> Vec<f64> {
        let mut z = vec![0.0; index.global().len()];
        for t in 0..self.x.len() {
            for j in 0..self.x[t].len() {
                for (a, v) in index.x_tilde(t, j).iter().zip(&self.x[t][j]) {
                    z[a - 1] = *v;
                }
                for (a, v) in index.u_tilde(t, j).iter().zip(&self.u[t][j]) {
                    z[a - 1] = *v;
                }
            }
        }
        z
    }

    pub fn from_z(z: &[f64], index: &AxisIndex) -> Self {
        let pick = |s: AxisSet| s.iter().map(|a| z[a - 1]).collect::<Vec<f64>>();
        let h = index.horizon();
        Trajectory {
            x: (0..=h).map(|t| (0..index.agents()).map(|j| pick(index.x_tilde(t, j))).collect()).collect(),
            u: (0..=h).map(|t| (0..index.agents()).map(|j| pick(index.u_tilde(t, j))).collect()).collect(),
        }
    }
}

/// Forward simulation with `d[t][j]` added through `E_j`.
pub fn simulate(spec: &NetworkSpec, x0: Vec<Vec<f64>>, u: Vec<Vec<Vec<f64>>>, d: Option<&[Vec<Vec<f64>>]>) -> Trajectory {
    let mut x = vec![x0];
    for t in 0..spec.horizon {
        let next = (0..spec.len())
            .map(|i| {
                let mut v = step(spec, i, &x[t], &u[t]);
                if let (Some(d), Dynamics::Affine(a)) = (d, &spec.agents[i].dynamics) {
                    let push = &a.e * DVector::from_column_slice(&d[t][i]);
                    for (k, p) in push.iter().enumerate() {
                        v[k] += p;
                    }
                }
                v
            })
            .collect();
        x.push(next);
    }
    Trajectory { x, u }
}

/// Trajectory perturbation by direct propagation of `ζ(t+1) = 𝐀ζ(t) + 𝐄d(t)`,
/// delayed by one extra step for the two-step convention.
pub fn perturbation(spec: &NetworkSpec, index: &AxisIndex, d: &[Vec<Vec<f64>>], lag: DisturbanceLag) -> Vec<f64> {
    let zero_u: Vec<Vec<Vec<f64>>> = (0..=spec.horizon).map(|_| spec.agents.iter().map(|a| vec![0.0; a.input_dim]).collect()).collect();
    let mut linear = spec.clone();
    for a in &mut linear.agents {
        if let Dynamics::Affine(dy) = &mut a.dynamics {
            dy.k = DVector::zeros(a.state_dim);
        }
    }
    let x0 = spec.agents.iter().map(|a| vec![0.0; a.state_dim]).collect();
    let mut tr = simulate(&linear, x0, zero_u, Some(d));
    if lag == DisturbanceLag::Paper {
        tr.x.insert(0, spec.agents.iter().map(|a| vec![0.0; a.state_dim]).collect());
        tr.x.pop();
    }
    tr.to_z(index)
}
