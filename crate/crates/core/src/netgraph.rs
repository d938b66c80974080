//! Influencing / communication graphs and a synchronous round simulator.

use std::fmt::Debug;
use std::time::Instant;

use rayon::prelude::*;
use thiserror::Error;

use crate::axisset::AxisSet;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum GraphError {
    #[error("node {node} references neighbour {neighbour}, but there are only {count} nodes")]
    IndexOutOfRange {
        node: usize,
        neighbour: usize,
        count: usize,
    },
}

/// Directed influence edges plus their undirected closure. Node ids are
/// zero-based; every node is its own neighbour.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Graph {
    influence: Vec<(usize, usize)>,
    neighbours: Vec<Vec<usize>>,
}

impl Graph {
    /// `reads[i]` lists the nodes that influence node `i`; the influence
    /// edge set is `{(i, j) : j in reads[i] or j == i}`.
    pub fn from_influence(reads: &[Vec<usize>]) -> Result<Graph, GraphError> {
        let count = reads.len();
        let mut influence = Vec::new();
        let mut neighbours: Vec<Vec<usize>> = (0..count).map(|i| vec![i]).collect();
        for (i, r) in reads.iter().enumerate() {
            influence.push((i, i));
            for &j in r {
                if j >= count {
                    return Err(GraphError::IndexOutOfRange {
                        node: i,
                        neighbour: j,
                        count,
                    });
                }
                influence.push((i, j));
                neighbours[i].push(j);
                neighbours[j].push(i);
            }
        }
        influence.sort_unstable();
        influence.dedup();
        for m in &mut neighbours {
            m.sort_unstable();
            m.dedup();
        }
        Ok(Graph {
            influence,
            neighbours,
        })
    }

    /// Edge `(i, j)` iff the axis sets of `i` and `j` intersect.
    pub fn from_axis_overlap(axis_sets: &[AxisSet]) -> Graph {
        let count = axis_sets.len();
        let reads: Vec<Vec<usize>> = (0..count)
            .map(|i| {
                (0..count)
                    .filter(|&j| j != i && !axis_sets[i].is_disjoint(&axis_sets[j]))
                    .collect()
            })
            .collect();
        Graph::from_influence(&reads).expect("indices are in range by construction")
    }

    pub fn len(&self) -> usize {
        self.neighbours.len()
    }

    pub fn is_empty(&self) -> bool {
        self.neighbours.is_empty()
    }

    /// Communication neighbourhood `M_i`, ascending, including `i`.
    pub fn neighbours(&self, i: usize) -> &[usize] {
        &self.neighbours[i]
    }

    pub fn neighbourhoods(&self) -> &[Vec<usize>] {
        &self.neighbours
    }

    /// Directed influence edges including self loops.
    pub fn influence_edges(&self) -> &[(usize, usize)] {
        &self.influence
    }

    /// Undirected communication edges `(i, j)` with `i < j`.
    pub fn edges(&self) -> Vec<(usize, usize)> {
        let mut out = Vec::new();
        for (i, m) in self.neighbours.iter().enumerate() {
            out.extend(m.iter().filter(|&&j| j > i).map(|&j| (i, j)));
        }
        out
    }

    pub fn has_edge(&self, i: usize, j: usize) -> bool {
        self.neighbours[i].binary_search(&j).is_ok()
    }

    /// Messages exchanged per round: one per ordered pair of distinct
    /// neighbours.
    pub fn messages_per_round(&self) -> usize {
        self.neighbours.iter().map(|m| m.len() - 1).sum()
    }
}

/// Result of one node's local step.
#[derive(Debug, Clone)]
pub struct StepOutput<S> {
    pub state: S,
    pub changed: bool,
}

/// Full history of a synchronous run. `history[k][i]` is node `i`'s state
/// after round `k` (round 0 is the initial state).
#[derive(Debug, Clone)]
pub struct RoundOutcome<S> {
    pub history: Vec<Vec<S>>,
    pub changed: Vec<Vec<bool>>,
    pub messages: Vec<usize>,
    /// Per round, per node step time in seconds (zero for round 0).
    pub step_seconds: Vec<Vec<f64>>,
    pub converged: bool,
}

impl<S> RoundOutcome<S> {
    pub fn final_states(&self) -> &[S] {
        self.history.last().expect("history always holds round 0")
    }

    /// Number of update rounds executed, including the confirming round.
    pub fn rounds_executed(&self) -> usize {
        self.history.len() - 1
    }

    /// First round whose states are a fixed point, when converged.
    pub fn fixed_round(&self) -> Option<usize> {
        self.converged.then(|| self.rounds_executed() - 1)
    }
}

#[derive(Debug, Error)]
pub enum RoundError<S: Debug, E: std::error::Error + 'static> {
    #[error("max_rounds must be at least 1")]
    ZeroRounds,
    #[error("expected {expected} initial states, got {found}")]
    StateCount { expected: usize, found: usize },
    #[error("node {node} failed in round {round}: {source}")]
    Step {
        node: usize,
        round: usize,
        #[source]
        source: E,
    },
    #[error("no convergence within {max_rounds} rounds")]
    MaxRoundsExceeded {
        max_rounds: usize,
        partial: Box<RoundOutcome<S>>,
    },
}

/// Runs synchronous rounds. In round `k` node `i` calls
/// `step(i, inbox)` where `inbox` holds `(j, state_j(k-1))` for every
/// `j in M_i` (own state included). Nodes of a round run in parallel; the
/// run stops once every node reports `changed == false` in the same round.
pub fn run_rounds<S, E, F>(
    graph: &Graph,
    init: Vec<S>,
    max_rounds: usize,
    step: F,
) -> Result<RoundOutcome<S>, RoundError<S, E>>
where
    S: Clone + Send + Sync + Debug,
    E: std::error::Error + Send + 'static,
    F: Fn(usize, &[(usize, &S)]) -> Result<StepOutput<S>, E> + Sync,
{
    if max_rounds == 0 {
        return Err(RoundError::ZeroRounds);
    }
    if init.len() != graph.len() {
        return Err(RoundError::StateCount {
            expected: graph.len(),
            found: init.len(),
        });
    }
    let count = graph.len();
    let mut outcome = RoundOutcome {
        history: vec![init],
        changed: vec![vec![true; count]],
        messages: vec![0],
        step_seconds: vec![vec![0.0; count]],
        converged: false,
    };
    for round in 1..=max_rounds {
        let prev = outcome.history.last().unwrap();
        let results: Vec<Result<(StepOutput<S>, f64), E>> = (0..count)
            .into_par_iter()
            .map(|i| {
                let inbox: Vec<(usize, &S)> =
                    graph.neighbours(i).iter().map(|&j| (j, &prev[j])).collect();
                let start = Instant::now();
                let out = step(i, &inbox)?;
                Ok((out, start.elapsed().as_secs_f64()))
            })
            .collect();
        let mut states = Vec::with_capacity(count);
        let mut changed = Vec::with_capacity(count);
        let mut seconds = Vec::with_capacity(count);
        for (node, r) in results.into_iter().enumerate() {
            let (out, secs) = r.map_err(|source| RoundError::Step {
                node,
                round,
                source,
            })?;
            states.push(out.state);
            changed.push(out.changed);
            seconds.push(secs);
        }
        let done = changed.iter().all(|c| !c);
        outcome.history.push(states);
        outcome.changed.push(changed);
        outcome.messages.push(graph.messages_per_round());
        outcome.step_seconds.push(seconds);
        if done {
            outcome.converged = true;
            return Ok(outcome);
        }
    }
    Err(RoundError::MaxRoundsExceeded {
        max_rounds,
        partial: Box::new(outcome),
    })
}

/// Default round budget: ten rounds per node.
pub fn default_max_rounds(nodes: usize) -> usize {
    (10 * nodes).max(1)
}
