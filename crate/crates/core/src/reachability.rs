//! Networked backward reachability: network description, local constraint
//! systems, the distributed procedure and its centralized counterpart.

mod finite;
mod index;

use std::collections::BTreeMap;

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use thiserror::Error;

use crate::affine::{self, DisturbanceLag};
use crate::axisset::{join_extrusions, project_set_with_cap, AxisError, AxisSet, LabeledSet, PointTable};
use crate::fixpoint::{run_distributed, FixpointError, FixpointProblem, IterationTrace, DEFAULT_TOLERANCE};
use crate::netgraph::{default_max_rounds, Graph, GraphError};
use crate::polytope::{HPolytope, PolytopeError, DEFAULT_ELIMINATION_CAP};

pub use index::AxisIndex;

/// Largest `(H+1)(n+m)` accepted by the centralized oracle by default.
pub const DEFAULT_DIMENSION_CAP: usize = 64;

#[derive(Debug, Error)]
pub enum ReachError {
    #[error("the network has no agents")]
    NoAgents,
    #[error("agent {agent}: {message}")]
    InvalidAgent { agent: usize, message: String },
    #[error("agent {agent}: {field} has dimension {found}, expected {expected}")]
    RegionDimension {
        agent: usize,
        field: &'static str,
        expected: usize,
        found: usize,
    },
    #[error("agent {agent}: {field} is not contained in {container}")]
    NotContained {
        agent: usize,
        field: &'static str,
        container: &'static str,
    },
    #[error("agent {agent}: {field} mentions agent {other}, which is outside its neighbourhood")]
    OutsideNeighbourhood { agent: usize, field: String, other: usize },
    #[error("agent {agent}: matrix {name} is {found:?}, expected {expected:?}")]
    ShapeMismatch {
        agent: usize,
        name: String,
        expected: (usize, usize),
        found: (usize, usize),
    },
    #[error("agent {agent}: {reason}")]
    UnsupportedDynamics { agent: usize, reason: String },
    #[error("agent {agent}: the disturbance set must be bounded and nonempty")]
    UnboundedDisturbance { agent: usize },
    #[error("all agents must share one dynamics kind")]
    MixedDynamics,
    #[error("the centralized problem has {dim} coordinates, above the cap of {cap}")]
    DimensionCapExceeded { dim: usize, cap: usize },
    #[error(transparent)]
    Graph(#[from] GraphError),
    #[error(transparent)]
    Axis(#[from] AxisError),
    #[error(transparent)]
    Polytope(#[from] PolytopeError),
    #[error(transparent)]
    Fixpoint(#[from] FixpointError),
}

impl ReachError {
    /// Errors caused by the input description rather than by computation.
    pub fn is_validation(&self) -> bool {
        !matches!(
            self,
            ReachError::Axis(_) | ReachError::Polytope(_) | ReachError::Fixpoint(_) | ReachError::DimensionCapExceeded { .. }
        )
    }
}

/// A constraint set: convex polytope or finite list of points.
#[derive(Debug, Clone)]
pub enum Region {
    Polytope(HPolytope),
    Points(PointTable),
}

impl Region {
    pub fn dim(&self) -> usize {
        match self {
            Region::Polytope(p) => p.dim(),
            Region::Points(t) => t.width(),
        }
    }

    pub fn contains(&self, p: &[f64], tol: f64) -> bool {
        match self {
            Region::Polytope(h) => h.contains(p, tol),
            Region::Points(t) => t.contains(p),
        }
    }

    pub fn as_polytope(&self) -> Option<&HPolytope> {
        match self {
            Region::Polytope(p) => Some(p),
            Region::Points(_) => None,
        }
    }

    fn labeled(&self, axes: AxisSet) -> Result<LabeledSet, AxisError> {
        match self {
            Region::Polytope(p) => LabeledSet::polytope(axes, p.clone()),
            Region::Points(t) => LabeledSet::points(axes, t.points().to_vec()),
        }
    }
}

/// A region over the stacked states of `agents` (ascending ids).
#[derive(Debug, Clone)]
pub struct ScopedRegion {
    pub agents: Vec<usize>,
    pub region: Region,
}

impl ScopedRegion {
    pub fn own(agent: usize, region: Region) -> Self {
        ScopedRegion {
            agents: vec![agent],
            region,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Relation {
    Le,
    Eq,
    /// Strict; the polytope backend relaxes it to `Le`.
    Lt,
}

/// `Σ_j c_jᵀ x_j(t) + Σ_j d_jᵀ u_j(t)  rel  rhs` for every `t < H`.
#[derive(Debug, Clone)]
pub struct LinearCoupling {
    pub state_terms: Vec<(usize, Vec<f64>)>,
    pub input_terms: Vec<(usize, Vec<f64>)>,
    pub relation: Relation,
    pub rhs: f64,
}

/// `x_i(t+1) = Σ_j A_ij x_j(t) + Σ_j B_ij u_j(t) + K_i + E_i d_i(t)`.
#[derive(Debug, Clone)]
pub struct AffineDynamics {
    pub a: BTreeMap<usize, DMatrix<f64>>,
    pub b: BTreeMap<usize, DMatrix<f64>>,
    pub k: DVector<f64>,
    /// `n_i × v_i`; zero columns means no disturbance.
    pub e: DMatrix<f64>,
    pub disturbance: Option<HPolytope>,
}

/// One admissible move of a finite agent. `state` and `input` stack the
/// values of the agent and its state neighbours in ascending id order.
#[derive(Debug, Clone, PartialEq)]
pub struct Transition {
    pub state: Vec<f64>,
    pub input: Vec<f64>,
    pub next: Vec<f64>,
}

#[derive(Debug, Clone)]
pub enum Dynamics {
    Affine(AffineDynamics),
    Finite(Vec<Transition>),
}

#[derive(Debug, Clone)]
pub struct AgentSpec {
    pub state_dim: usize,
    pub input_dim: usize,
    /// Agents whose state enters this agent's dynamics.
    pub state_neighbours: Vec<usize>,
    /// Agents this agent shares coupling constraints with.
    pub constraint_neighbours: Vec<usize>,
    pub dynamics: Dynamics,
    pub state_set: Region,
    pub input_set: Region,
    /// Target at time `H`; defaults to `partition_h`.
    pub target: Option<ScopedRegion>,
    /// Start restriction, only used when checking reachability.
    pub start: Option<ScopedRegion>,
    /// Constraint on states at `t = 0, ..., H-1`.
    pub partition_k: Option<ScopedRegion>,
    pub partition_h: Option<ScopedRegion>,
    pub coupling: Vec<LinearCoupling>,
}

impl AgentSpec {
    /// The agent itself and its state neighbours, ascending.
    pub fn reads(&self, i: usize) -> Vec<usize> {
        let mut v = self.state_neighbours.clone();
        v.push(i);
        v.sort_unstable();
        v.dedup();
        v
    }

    /// `𝓝_i`: reads plus constraint neighbours.
    pub fn neighbours(&self, i: usize) -> Vec<usize> {
        let mut v = self.reads(i);
        v.extend(self.constraint_neighbours.iter().copied());
        v.sort_unstable();
        v.dedup();
        v
    }

    /// Effective target: the given one, else `partition_h`.
    pub fn effective_target(&self) -> Option<&ScopedRegion> {
        self.target.as_ref().or(self.partition_h.as_ref())
    }
}

#[derive(Debug, Clone)]
pub struct NetworkSpec {
    pub horizon: usize,
    pub agents: Vec<AgentSpec>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BackendChoice {
    Polytope,
    Finite,
}

/// `Pre` drops the start restriction; `ReachCheck` keeps it.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ReachMode {
    #[default]
    Pre,
    ReachCheck,
}

#[derive(Debug, Clone)]
pub struct ReachOptions {
    pub mode: ReachMode,
    pub lag: DisturbanceLag,
    pub tolerance: f64,
    pub max_rounds: Option<usize>,
    pub elimination_cap: usize,
    pub dimension_cap: usize,
}

impl Default for ReachOptions {
    fn default() -> Self {
        ReachOptions {
            mode: ReachMode::Pre,
            lag: DisturbanceLag::default(),
            tolerance: DEFAULT_TOLERANCE,
            max_rounds: None,
            elimination_cap: DEFAULT_ELIMINATION_CAP,
            dimension_cap: DEFAULT_DIMENSION_CAP,
        }
    }
}

impl NetworkSpec {
    pub fn len(&self) -> usize {
        self.agents.len()
    }

    pub fn is_empty(&self) -> bool {
        self.agents.is_empty()
    }

    /// Which backend the dynamics payloads call for.
    pub fn backend(&self) -> Result<BackendChoice, ReachError> {
        let first = match self.agents.first().ok_or(ReachError::NoAgents)?.dynamics {
            Dynamics::Affine(_) => BackendChoice::Polytope,
            Dynamics::Finite(_) => BackendChoice::Finite,
        };
        let same = self.agents.iter().all(|a| {
            matches!(
                (&a.dynamics, first),
                (Dynamics::Affine(_), BackendChoice::Polytope) | (Dynamics::Finite(_), BackendChoice::Finite)
            )
        });
        if same {
            Ok(first)
        } else {
            Err(ReachError::MixedDynamics)
        }
    }

    /// Communication graph: `i` talks to every agent in `𝓝_i`, both ways.
    pub fn graph(&self) -> Result<Graph, ReachError> {
        let reads: Vec<Vec<usize>> = self
            .agents
            .iter()
            .enumerate()
            .map(|(i, a)| a.neighbours(i).into_iter().filter(|&j| j != i).collect())
            .collect();
        Ok(Graph::from_influence(&reads)?)
    }

    pub fn axis_index(&self) -> Result<AxisIndex, ReachError> {
        let graph = self.graph()?;
        Ok(build_axis_index(self, &graph))
    }

    /// Checks every structural invariant of the description.
    pub fn validate(&self) -> Result<(), ReachError> {
        let backend = self.backend()?;
        let count = self.agents.len();
        let graph = self.graph()?;
        for (i, a) in self.agents.iter().enumerate() {
            let bad = |message: String| ReachError::InvalidAgent { agent: i, message };
            if a.state_dim == 0 {
                return Err(bad("state dimension must be positive".into()));
            }
            if a.input_dim == 0 {
                return Err(bad("input dimension must be positive".into()));
            }
            for &j in a.state_neighbours.iter().chain(&a.constraint_neighbours) {
                if j >= count {
                    return Err(bad(format!("neighbour {j} does not exist")));
                }
            }
            let dim_check = |field: &'static str, r: &Region, expected: usize| {
                if r.dim() != expected {
                    Err(ReachError::RegionDimension {
                        agent: i,
                        field,
                        expected,
                        found: r.dim(),
                    })
                } else {
                    Ok(())
                }
            };
            dim_check("state_set", &a.state_set, a.state_dim)?;
            dim_check("input_set", &a.input_set, a.input_dim)?;
            let m_i = graph.neighbours(i);
            let scoped = [
                ("target", &a.target),
                ("start", &a.start),
                ("partition_k", &a.partition_k),
                ("partition_h", &a.partition_h),
            ];
            for (field, s) in scoped {
                let Some(s) = s else { continue };
                if s.agents.is_empty() || s.agents.windows(2).any(|w| w[0] >= w[1]) {
                    return Err(bad(format!("{field} agents must be nonempty and strictly increasing")));
                }
                if let Some(&o) = s.agents.iter().find(|j| !m_i.contains(j)) {
                    return Err(ReachError::OutsideNeighbourhood {
                        agent: i,
                        field: field.to_string(),
                        other: o,
                    });
                }
                let expected = s.agents.iter().map(|&j| self.agents[j].state_dim).sum();
                dim_check(field, &s.region, expected)?;
            }
            let nbrs = a.neighbours(i);
            for (l, c) in a.coupling.iter().enumerate() {
                let field = format!("coupling[{l}]");
                if !c.rhs.is_finite() {
                    return Err(bad(format!("{field} has a non-finite offset")));
                }
                for (terms, is_state) in [(&c.state_terms, true), (&c.input_terms, false)] {
                    for (j, coeffs) in terms {
                        if !nbrs.contains(j) {
                            return Err(ReachError::OutsideNeighbourhood {
                                agent: i,
                                field: field.clone(),
                                other: *j,
                            });
                        }
                        let want = if is_state { self.agents[*j].state_dim } else { self.agents[*j].input_dim };
                        if coeffs.len() != want || coeffs.iter().any(|v| !v.is_finite()) {
                            return Err(bad(format!("{field} has a malformed term for agent {j}")));
                        }
                    }
                }
            }
            match (&a.dynamics, backend) {
                (Dynamics::Affine(d), BackendChoice::Polytope) => self.validate_affine(i, d, &nbrs)?,
                (Dynamics::Finite(t), BackendChoice::Finite) => self.validate_finite(i, t)?,
                _ => unreachable!("backend() rejects mixed payloads"),
            }
            if backend == BackendChoice::Polytope {
                let regions = [
                    Some(&a.state_set),
                    Some(&a.input_set),
                    a.target.as_ref().map(|s| &s.region),
                    a.start.as_ref().map(|s| &s.region),
                    a.partition_k.as_ref().map(|s| &s.region),
                    a.partition_h.as_ref().map(|s| &s.region),
                ];
                if regions.iter().flatten().any(|r| matches!(r, Region::Points(_))) {
                    return Err(ReachError::UnsupportedDynamics {
                        agent: i,
                        reason: "affine agents need polytopic regions".into(),
                    });
                }
            } else if !matches!(a.state_set, Region::Points(_)) || !matches!(a.input_set, Region::Points(_)) {
                return Err(ReachError::UnsupportedDynamics {
                    agent: i,
                    reason: "finite agents need point-list state and input sets".into(),
                });
            }
            self.check_inclusion(i, "target", &a.target, "partition_h", &a.partition_h)?;
            self.check_inclusion(i, "start", &a.start, "partition_k", &a.partition_k)?;
        }
        Ok(())
    }

    fn validate_affine(&self, i: usize, d: &AffineDynamics, nbrs: &[usize]) -> Result<(), ReachError> {
        let n_i = self.agents[i].state_dim;
        let shape = |name: String, m: &DMatrix<f64>, expected: (usize, usize)| {
            if m.shape() != expected {
                Err(ReachError::ShapeMismatch {
                    agent: i,
                    name,
                    expected,
                    found: m.shape(),
                })
            } else if m.iter().any(|v| !v.is_finite()) {
                Err(ReachError::InvalidAgent {
                    agent: i,
                    message: format!("{name} has non-finite entries"),
                })
            } else {
                Ok(())
            }
        };
        for (blocks, label) in [(&d.a, "A"), (&d.b, "B")] {
            for (&j, m) in blocks {
                if !nbrs.contains(&j) {
                    return Err(ReachError::OutsideNeighbourhood {
                        agent: i,
                        field: format!("{label}[{j}]"),
                        other: j,
                    });
                }
                let cols = if label == "A" { self.agents[j].state_dim } else { self.agents[j].input_dim };
                shape(format!("{label}[{j}]"), m, (n_i, cols))?;
            }
        }
        if d.k.len() != n_i || d.k.iter().any(|v| !v.is_finite()) {
            return Err(ReachError::ShapeMismatch {
                agent: i,
                name: "K".into(),
                expected: (n_i, 1),
                found: (d.k.len(), 1),
            });
        }
        shape("E".into(), &d.e, (n_i, d.e.ncols()))?;
        if d.e.ncols() > 0 {
            let Some(dist) = &d.disturbance else {
                return Err(ReachError::UnboundedDisturbance { agent: i });
            };
            if dist.dim() != d.e.ncols() {
                return Err(ReachError::RegionDimension {
                    agent: i,
                    field: "disturbance",
                    expected: d.e.ncols(),
                    found: dist.dim(),
                });
            }
            if dist.is_empty()? {
                return Err(ReachError::UnboundedDisturbance { agent: i });
            }
            for k in 0..dist.dim() {
                for s in [1.0, -1.0] {
                    let mut dir = vec![0.0; dist.dim()];
                    dir[k] = s;
                    if !dist.support(&dir)?.is_finite() {
                        return Err(ReachError::UnboundedDisturbance { agent: i });
                    }
                }
            }
        }
        Ok(())
    }

    fn validate_finite(&self, i: usize, transitions: &[Transition]) -> Result<(), ReachError> {
        let reads = self.agents[i].reads(i);
        let sw: usize = reads.iter().map(|&j| self.agents[j].state_dim).sum();
        let iw: usize = reads.iter().map(|&j| self.agents[j].input_dim).sum();
        for (k, t) in transitions.iter().enumerate() {
            if t.state.len() != sw || t.input.len() != iw || t.next.len() != self.agents[i].state_dim {
                return Err(ReachError::InvalidAgent {
                    agent: i,
                    message: format!("transition {k} has widths ({}, {}, {}), expected ({sw}, {iw}, {})", t.state.len(), t.input.len(), t.next.len(), self.agents[i].state_dim),
                });
            }
        }
        Ok(())
    }

    /// `S ⊆ P` where `P`'s agents must be a subset of `S`'s.
    fn check_inclusion(
        &self,
        i: usize,
        field: &'static str,
        inner: &Option<ScopedRegion>,
        container: &'static str,
        outer: &Option<ScopedRegion>,
    ) -> Result<(), ReachError> {
        let (Some(s), Some(p)) = (inner, outer) else {
            return Ok(());
        };
        let fail = || ReachError::NotContained { agent: i, field, container };
        if !p.agents.iter().all(|j| s.agents.contains(j)) {
            return Err(fail());
        }
        let index = self.plain_index();
        let s_axes = index.states_of(0, &s.agents);
        let p_axes = index.states_of(0, &p.agents);
        let s_set = s.region.labeled(s_axes)?;
        let p_set = p.region.labeled(p_axes.clone())?;
        let shadow = project_set_with_cap(&s_set, &p_axes, DEFAULT_ELIMINATION_CAP)?;
        if !same_kind_subset(&shadow, &p_set)? {
            return Err(fail());
        }
        Ok(())
    }

    /// Index with trivial neighbourhoods, for layout-only uses.
    fn plain_index(&self) -> AxisIndex {
        AxisIndex::new(
            self.agents.iter().map(|a| a.state_dim).collect(),
            self.agents.iter().map(|a| a.input_dim).collect(),
            self.horizon,
            (0..self.agents.len()).map(|i| vec![i]).collect(),
        )
    }
}

/// Subset test that tolerates a finite set inside a polytope.
fn same_kind_subset(a: &LabeledSet, b: &LabeledSet) -> Result<bool, AxisError> {
    if a.kind() == b.kind() {
        return a.is_subset_of(b, 1e-9);
    }
    match (a.as_points(), b.as_polytope()) {
        (Some(t), Some(p)) => Ok(t.points().iter().all(|q| p.contains(q, 1e-9))),
        _ => {
            // polytope inside a finite set: only possible when empty
            a.is_empty()
        }
    }
}

/// Builds the axis-set index from a network and its communication graph.
pub fn build_axis_index(spec: &NetworkSpec, graph: &Graph) -> AxisIndex {
    AxisIndex::new(
        spec.agents.iter().map(|a| a.state_dim).collect(),
        spec.agents.iter().map(|a| a.input_dim).collect(),
        spec.horizon,
        graph.neighbourhoods().to_vec(),
    )
}

/// Coordinates and constraint owners of one constraint system: the local
/// system of node `i`, or the whole network.
#[derive(Debug, Clone)]
pub struct Scope {
    pub axes: AxisSet,
    /// Agents whose states and inputs appear in `axes`.
    pub members: Vec<usize>,
    /// Agents whose dynamics, couplings and targets are imposed.
    pub owners: Vec<usize>,
}

impl Scope {
    pub fn local(index: &AxisIndex, i: usize) -> Self {
        Scope {
            axes: index.horizon_set(i),
            members: index.neighbourhood(i).to_vec(),
            owners: vec![i],
        }
    }

    pub fn global(index: &AxisIndex) -> Self {
        let all: Vec<usize> = (0..index.agents()).collect();
        Scope {
            axes: index.global(),
            members: all.clone(),
            owners: all,
        }
    }

    pub fn width(&self) -> usize {
        self.axes.len()
    }

    /// Positions of `sub` inside this scope's coordinate vector.
    pub fn positions(&self, sub: &AxisSet) -> Vec<usize> {
        sub.positions_in(&self.axes).expect("sub-axes lie inside the scope")
    }
}

/// Constraint systems of Pre computation for node `i`: all local
/// trajectories satisfying the node's own rows.
pub fn local_system_solution(spec: &NetworkSpec, index: &AxisIndex, i: usize, opts: &ReachOptions) -> Result<LabeledSet, ReachError> {
    let scope = Scope::local(index, i);
    system_solution(spec, index, &scope, opts)
}

fn system_solution(spec: &NetworkSpec, index: &AxisIndex, scope: &Scope, opts: &ReachOptions) -> Result<LabeledSet, ReachError> {
    match spec.backend()? {
        BackendChoice::Polytope => {
            let sys = affine::robust_local_system(spec, index, scope, opts.mode, opts.lag, false)?;
            Ok(LabeledSet::polytope(scope.axes.clone(), sys.polytope()?)?)
        }
        BackendChoice::Finite => {
            let pts = finite::enumerate(spec, index, scope, opts.mode)?;
            Ok(LabeledSet::points(scope.axes.clone(), pts)?)
        }
    }
}

/// Per-node result of the distributed procedure.
#[derive(Debug, Clone)]
pub struct LocalSolution {
    pub node: usize,
    /// Local solution set before any exchange, over `B^H_i`.
    pub initial: LabeledSet,
    /// Fixed-point set over `B^H_i`.
    pub refined: LabeledSet,
    /// Pre-set (or checked start set) over `B_{x,0,i}`.
    pub start_set: LabeledSet,
    /// Admissible controls over `B_{x,0,i} ∪ B^H_{u,i}`.
    pub controls: LabeledSet,
}

#[derive(Debug, Clone)]
pub struct DistributedOutcome {
    pub index: AxisIndex,
    pub graph: Graph,
    pub solutions: Vec<LocalSolution>,
    pub trace: IterationTrace,
    /// Wall time of each node's local solve.
    pub solve_seconds: Vec<f64>,
}

/// The distributed procedure: local solves, fixed-point exchange over the
/// overlap graph of the `B^H_i`, then per-node extraction.
pub fn run_algorithm2(spec: &NetworkSpec, opts: &ReachOptions) -> Result<DistributedOutcome, ReachError> {
    spec.validate()?;
    let graph = spec.graph()?;
    let index = build_axis_index(spec, &graph);
    let solved: Vec<(LabeledSet, f64)> = (0..spec.len())
        .into_par_iter()
        .map(|i| {
            let clock = std::time::Instant::now();
            let s = local_system_solution(spec, &index, i, opts)?;
            Ok((s, clock.elapsed().as_secs_f64()))
        })
        .collect::<Result<_, ReachError>>()?;
    let (initial, solve_seconds): (Vec<LabeledSet>, Vec<f64>) = solved.into_iter().unzip();
    let mut problem = FixpointProblem::new(initial.clone())?.with_tolerance(opts.tolerance)?;
    let rounds = opts.max_rounds.unwrap_or_else(|| default_max_rounds(spec.len()));
    problem = problem.with_max_rounds(rounds)?;
    let (refined, trace) = run_distributed(&problem)?;
    let solutions = refined
        .into_par_iter()
        .zip(initial)
        .enumerate()
        .map(|(i, (refined, initial))| {
            let start_set = project_set_with_cap(&refined, &index.x_at(0, i), opts.elimination_cap)?;
            let controls = project_set_with_cap(&refined, &index.control_axes(i), opts.elimination_cap)?;
            Ok(LocalSolution {
                node: i,
                initial,
                refined,
                start_set,
                controls,
            })
        })
        .collect::<Result<Vec<_>, ReachError>>()?;
    Ok(DistributedOutcome {
        index,
        graph,
        solutions,
        trace,
        solve_seconds,
    })
}

/// Monolithic solution of the network-wide system.
#[derive(Debug, Clone)]
pub struct CentralizedOutcome {
    pub index: AxisIndex,
    /// All feasible trajectories, over `B̄^H`.
    pub trajectories: LabeledSet,
    /// Over `B̄_{x,0}`.
    pub start_set: LabeledSet,
    /// Over `B̄_{x,0} ∪ B̄^H_u`.
    pub controls: LabeledSet,
}

impl CentralizedOutcome {
    /// `𝒫_{B_{x,0,i}}` of the global start set.
    pub fn node_start_set(&self, i: usize, cap: usize) -> Result<LabeledSet, ReachError> {
        Ok(project_set_with_cap(&self.start_set, &self.index.x_at(0, i), cap)?)
    }

    /// `𝒫_{B_{x,0,i} ∪ B^H_{u,i}}` of the global control set.
    pub fn node_controls(&self, i: usize, cap: usize) -> Result<LabeledSet, ReachError> {
        Ok(project_set_with_cap(&self.controls, &self.index.control_axes(i), cap)?)
    }
}

/// The network-wide system built independently of the local ones: one-step
/// dynamics rows for every agent instead of the closed form.
pub fn centralized_reachability(spec: &NetworkSpec, opts: &ReachOptions) -> Result<CentralizedOutcome, ReachError> {
    spec.validate()?;
    let graph = spec.graph()?;
    let index = build_axis_index(spec, &graph);
    let dim = index.global().len();
    if dim > opts.dimension_cap {
        return Err(ReachError::DimensionCapExceeded {
            dim,
            cap: opts.dimension_cap,
        });
    }
    let scope = Scope::global(&index);
    let trajectories = match spec.backend()? {
        BackendChoice::Polytope => {
            let sys = affine::robust_local_system(spec, &index, &scope, opts.mode, opts.lag, true)?;
            LabeledSet::polytope(scope.axes.clone(), sys.polytope()?)?
        }
        BackendChoice::Finite => LabeledSet::points(scope.axes.clone(), finite::enumerate(spec, &index, &scope, opts.mode)?)?,
    };
    let controls = project_set_with_cap(&trajectories, &index.global_control_axes(), opts.elimination_cap)?;
    let start_set = project_set_with_cap(&controls, &index.global_x(0), opts.elimination_cap)?;
    Ok(CentralizedOutcome {
        index,
        trajectories,
        start_set,
        controls,
    })
}

/// Join of all start restrictions and state sets at `t = 0`, as seen by each
/// node: `𝒫_{B_{x,0,i}}(S̄_k)`, computed with the distributed fixed point.
pub fn start_projections(spec: &NetworkSpec, index: &AxisIndex, opts: &ReachOptions) -> Result<Vec<LabeledSet>, ReachError> {
    let mut sets = Vec::new();
    for (j, a) in spec.agents.iter().enumerate() {
        sets.push(a.state_set.labeled(index.x_tilde(0, j))?);
        if let Some(s) = &a.start {
            sets.push(s.region.labeled(index.states_of(0, &s.agents))?);
        }
    }
    let problem = FixpointProblem::new(sets)?.with_tolerance(opts.tolerance)?;
    let (out, _) = run_distributed(&problem)?;
    let joined_axes = index.global_x(0);
    let refs: Vec<&LabeledSet> = out.iter().collect();
    let joined = join_extrusions(&refs, &joined_axes)?;
    (0..spec.len())
        .map(|i| Ok(project_set_with_cap(&joined, &index.x_at(0, i), opts.elimination_cap)?))
        .collect()
}

/// Verdict of a reachability check: node `i` passes when every start state
/// it sees can reach the target, i.e. its extracted start set equals the
/// projection of the full start restriction.
pub fn reach_check(spec: &NetworkSpec, outcome: &DistributedOutcome, opts: &ReachOptions) -> Result<Vec<bool>, ReachError> {
    let wanted = start_projections(spec, &outcome.index, opts)?;
    outcome
        .solutions
        .iter()
        .zip(&wanted)
        .map(|(s, w)| Ok(same_kind_subset(w, &s.start_set)?))
        .collect()
}
