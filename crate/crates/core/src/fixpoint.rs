//! Distributed computation of the projections of an extrusion-generated set,
//! with the centralized join as a baseline.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::axisset::{join_extrusions, project_set, AxisError, AxisSet, BackendKind, LabeledSet, SetBackend};
use crate::netgraph::{default_max_rounds, run_rounds, Graph, RoundError, RoundOutcome, StepOutput};
use crate::polytope::HPolytope;

pub const DEFAULT_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Error)]
pub enum FixpointError {
    #[error("problem has no nodes")]
    NoNodes,
    #[error("all initial sets must share one backend")]
    BackendMismatch,
    #[error("tolerance must be finite and nonnegative, got {0}")]
    BadTolerance(f64),
    #[error("max_rounds must be at least 1")]
    ZeroRounds,
    #[error(transparent)]
    Axis(#[from] AxisError),
    #[error("node {node} failed in round {round}: {source}")]
    Step {
        node: usize,
        round: usize,
        #[source]
        source: AxisError,
    },
    #[error("no convergence within {max_rounds} rounds")]
    MaxRoundsExceeded {
        max_rounds: usize,
        partial: Box<IterationTrace>,
    },
}

/// Initial per-node sets `S_i(0)` plus stopping parameters. The axis set of
/// node `i` is the axis set of its initial set.
#[derive(Debug, Clone)]
pub struct FixpointProblem {
    initial_sets: Vec<LabeledSet>,
    tolerance: f64,
    max_rounds: usize,
}

impl FixpointProblem {
    pub fn new(initial_sets: Vec<LabeledSet>) -> Result<Self, FixpointError> {
        let first = initial_sets.first().ok_or(FixpointError::NoNodes)?;
        if initial_sets.iter().any(|s| s.kind() != first.kind()) {
            return Err(FixpointError::BackendMismatch);
        }
        let max_rounds = default_max_rounds(initial_sets.len());
        Ok(FixpointProblem {
            initial_sets,
            tolerance: DEFAULT_TOLERANCE,
            max_rounds,
        })
    }

    pub fn with_tolerance(mut self, tol: f64) -> Result<Self, FixpointError> {
        if !tol.is_finite() || tol < 0.0 {
            return Err(FixpointError::BadTolerance(tol));
        }
        self.tolerance = tol;
        Ok(self)
    }

    pub fn with_max_rounds(mut self, max_rounds: usize) -> Result<Self, FixpointError> {
        if max_rounds == 0 {
            return Err(FixpointError::ZeroRounds);
        }
        self.max_rounds = max_rounds;
        Ok(self)
    }

    pub fn initial_sets(&self) -> &[LabeledSet] {
        &self.initial_sets
    }

    pub fn axis_sets(&self) -> Vec<AxisSet> {
        self.initial_sets.iter().map(|s| s.axes().clone()).collect()
    }

    pub fn union_axes(&self) -> AxisSet {
        AxisSet::union_all(self.initial_sets.iter().map(|s| s.axes()))
    }

    pub fn tolerance(&self) -> f64 {
        self.tolerance
    }

    pub fn max_rounds(&self) -> usize {
        self.max_rounds
    }

    pub fn kind(&self) -> BackendKind {
        self.initial_sets[0].kind()
    }

    pub fn graph(&self) -> Graph {
        Graph::from_axis_overlap(&self.axis_sets())
    }
}

/// `S̄ = ⋂_i E(S_i(0))` over the union of all axes.
pub fn centralized_join(problem: &FixpointProblem) -> Result<LabeledSet, FixpointError> {
    let refs: Vec<&LabeledSet> = problem.initial_sets.iter().collect();
    Ok(join_extrusions(&refs, &problem.union_axes())?)
}

/// Projections of the centralized join onto every node's axes.
pub fn centralized_projections(problem: &FixpointProblem) -> Result<Vec<LabeledSet>, FixpointError> {
    let joined = centralized_join(problem)?;
    problem
        .initial_sets
        .iter()
        .map(|s| Ok(project_set(&joined, s.axes())?))
        .collect()
}

/// One update of node `i`: join the neighbours' sets over the union of
/// their axes and project back onto `axes`. `neighbour_sets` must include
/// the node's own set.
pub fn local_update(axes: &AxisSet, neighbour_sets: &[&LabeledSet]) -> Result<LabeledSet, AxisError> {
    let target = AxisSet::union_all(neighbour_sets.iter().map(|s| s.axes()));
    let joined = join_extrusions(neighbour_sets, &target)?;
    project_set(&joined, axes)
}

fn unchanged(old: &LabeledSet, new: &LabeledSet, tol: f64) -> Result<bool, AxisError> {
    match old.kind() {
        BackendKind::Points => new.set_eq(old, 0.0),
        // new ⊆ old always holds, so only the reverse inclusion is tested
        BackendKind::Polytope => old.is_subset_of(new, tol),
    }
}

/// Runs the distributed iteration to its fixed point.
pub fn run_distributed(problem: &FixpointProblem) -> Result<(Vec<LabeledSet>, IterationTrace), FixpointError> {
    let graph = problem.graph();
    let axes = problem.axis_sets();
    let tol = problem.tolerance;
    let result = run_rounds(&graph, problem.initial_sets.clone(), problem.max_rounds, |i, inbox| {
        let sets: Vec<&LabeledSet> = inbox.iter().map(|(_, s)| *s).collect();
        let own = inbox.iter().find(|(j, _)| *j == i).expect("own set is in the inbox").1;
        let next = local_update(&axes[i], &sets)?;
        let changed = !unchanged(own, &next, tol)?;
        Ok(StepOutput { state: next, changed })
    });
    match result {
        Ok(outcome) => {
            let trace = IterationTrace::from_outcome(&graph, &outcome)?;
            let mut sets = outcome.final_states().to_vec();
            if trace.globally_empty {
                // components that share no axes with the empty node cannot
                // observe it, so the orchestrator broadcasts the verdict
                sets = sets
                    .iter()
                    .map(|s| LabeledSet::empty_like(s.axes().clone(), s.kind()))
                    .collect();
            }
            Ok((sets, trace))
        }
        Err(RoundError::MaxRoundsExceeded { max_rounds, partial }) => Err(FixpointError::MaxRoundsExceeded {
            max_rounds,
            partial: Box::new(IterationTrace::from_outcome(&graph, &partial)?),
        }),
        Err(RoundError::Step { node, round, source }) => Err(FixpointError::Step { node, round, source }),
        Err(RoundError::ZeroRounds) => Err(FixpointError::ZeroRounds),
        Err(RoundError::StateCount { .. }) => unreachable!("one state per node by construction"),
    }
}

/// Serializable form of a labeled set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum SetRecord {
    Points { axes: AxisSet, points: Vec<Vec<f64>> },
    Polytope { axes: AxisSet, hrep: String },
}

impl SetRecord {
    pub fn from_set(s: &LabeledSet) -> Self {
        match s.backend() {
            SetBackend::Points(t) => SetRecord::Points {
                axes: s.axes().clone(),
                points: t.points().to_vec(),
            },
            SetBackend::Polytope(p) => SetRecord::Polytope {
                axes: s.axes().clone(),
                hrep: p.to_text(),
            },
        }
    }

    pub fn to_set(&self) -> Result<LabeledSet, AxisError> {
        match self {
            SetRecord::Points { axes, points } => LabeledSet::points(axes.clone(), points.clone()),
            SetRecord::Polytope { axes, hrep } => LabeledSet::polytope(axes.clone(), HPolytope::from_text(hrep)?),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NodeRecord {
    pub node: usize,
    pub changed: bool,
    pub empty: bool,
    pub set: SetRecord,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoundRecord {
    pub round: usize,
    pub messages: usize,
    pub nodes: Vec<NodeRecord>,
}

/// Per-round record of every node's set. Wall-clock data is kept apart in
/// [`IterationTrace::step_seconds`] and is not serialized, so traces of
/// identical runs are byte-identical.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IterationTrace {
    pub neighbourhoods: Vec<Vec<usize>>,
    pub rounds: Vec<RoundRecord>,
    pub converged: bool,
    /// First round whose sets are a fixed point.
    pub fixed_round: Option<usize>,
    /// Some node ended with an empty set, so the global set is empty.
    pub globally_empty: bool,
    #[serde(skip)]
    pub step_seconds: Vec<Vec<f64>>,
}

impl IterationTrace {
    fn from_outcome(graph: &Graph, outcome: &RoundOutcome<LabeledSet>) -> Result<Self, AxisError> {
        let mut rounds = Vec::with_capacity(outcome.history.len());
        for (k, states) in outcome.history.iter().enumerate() {
            let nodes = states
                .iter()
                .enumerate()
                .map(|(i, s)| {
                    Ok(NodeRecord {
                        node: i,
                        changed: outcome.changed[k][i],
                        empty: s.is_empty()?,
                        set: SetRecord::from_set(s),
                    })
                })
                .collect::<Result<Vec<_>, AxisError>>()?;
            rounds.push(RoundRecord {
                round: k,
                messages: outcome.messages[k],
                nodes,
            });
        }
        let globally_empty = rounds.last().is_some_and(|r| r.nodes.iter().any(|n| n.empty));
        if globally_empty {
            log::warn!("the extrusion-generated set is empty; every node converges to the empty set");
        }
        Ok(IterationTrace {
            neighbourhoods: graph.neighbourhoods().to_vec(),
            rounds,
            converged: outcome.converged,
            fixed_round: outcome.fixed_round(),
            globally_empty,
            step_seconds: outcome.step_seconds.clone(),
        })
    }

    /// Sets of every node at round `k`.
    pub fn sets_at(&self, k: usize) -> Result<Vec<LabeledSet>, AxisError> {
        self.rounds[k].nodes.iter().map(|n| n.set.to_set()).collect()
    }

    pub fn rounds_executed(&self) -> usize {
        self.rounds.len().saturating_sub(1)
    }
}
