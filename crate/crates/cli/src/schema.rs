//! JSON problem files and their conversion to the core types.
//!
//! Agent ids are 0-based. Axis indices in `axis_problem` are 1-based, as in
//! the core library. Matrices are row-major nested arrays.

use std::collections::BTreeMap;
use std::path::Path;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use reachnet_core::axisset::{AxisSet, LabeledSet, PointTable, SetBackend};
use reachnet_core::polytope::HPolytope;
use reachnet_core::reachability::{
    AffineDynamics, AgentSpec, Dynamics, LinearCoupling, NetworkSpec, Region, Relation, ScopedRegion, Transition,
};

use crate::error::CliError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpecFile {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub horizon: Option<i64>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub agents: Vec<AgentFile>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub coupling: Vec<CouplingFile>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub targets: Vec<TargetFile>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub axis_problem: Option<AxisProblemFile>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AgentFile {
    pub state_dim: usize,
    pub input_dim: usize,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub state_neighbours: Vec<usize>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub constraint_neighbours: Vec<usize>,
    pub dynamics: DynamicsFile,
    pub state_set: RegionFile,
    pub input_set: RegionFile,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub partition_k: Option<ScopedFile>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub partition_h: Option<ScopedFile>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DynamicsFile {
    Affine(AffineFile),
    Finite(Vec<TransitionFile>),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AffineFile {
    /// State matrices keyed by the agent whose state they multiply.
    pub a: BTreeMap<usize, Vec<Vec<f64>>>,
    pub b: BTreeMap<usize, Vec<Vec<f64>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub k: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub e: Option<Vec<Vec<f64>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub disturbance: Option<RegionFile>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TransitionFile {
    pub state: Vec<f64>,
    pub input: Vec<f64>,
    pub next: Vec<f64>,
}

/// `{"box": {"lo": [..], "hi": [..]}}`, `{"hrep": "dim 1\nI 1 2\n..."}`,
/// `{"vertices": [[..], ..]}` or `{"points": [[..], ..]}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RegionFile {
    Box { lo: Vec<f64>, hi: Vec<f64> },
    Hrep(String),
    Vertices(Vec<Vec<f64>>),
    Points(Vec<Vec<f64>>),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScopedFile {
    /// Agents whose stacked states the region constrains; defaults to the owner.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub agents: Option<Vec<usize>>,
    pub region: RegionFile,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RelationFile {
    #[default]
    Le,
    Eq,
    Lt,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TermFile {
    pub agent: usize,
    pub coeffs: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CouplingFile {
    /// Agent that owns the constraint.
    pub agent: usize,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub state_terms: Vec<TermFile>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub input_terms: Vec<TermFile>,
    #[serde(default)]
    pub relation: RelationFile,
    pub rhs: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Role {
    #[default]
    Target,
    Start,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TargetFile {
    pub agent: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub agents: Option<Vec<usize>>,
    pub region: RegionFile,
    #[serde(default)]
    pub role: Role,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AxisProblemFile {
    pub sets: Vec<AxisSetFile>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AxisSetFile {
    pub axes: Vec<usize>,
    pub region: RegionFile,
}

/// A loaded problem file: a network, an axis problem, or both.
#[derive(Debug, Clone)]
pub struct Problem {
    pub network: Option<NetworkSpec>,
    pub axis_sets: Option<Vec<LabeledSet>>,
}

fn invalid(field: impl Into<String>, message: impl Into<String>) -> CliError {
    CliError::Invalid {
        field: field.into(),
        message: message.into(),
    }
}

/// Reads, parses and validates a problem file.
pub fn load_spec(path: &Path) -> Result<Problem, CliError> {
    let text = std::fs::read_to_string(path).map_err(|source| CliError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    parse_spec(&text)
}

pub fn parse_spec(text: &str) -> Result<Problem, CliError> {
    let de = &mut serde_json::Deserializer::from_str(text);
    let file: SpecFile = serde_path_to_error::deserialize(de).map_err(|e| {
        let inner = e.inner();
        CliError::Parse {
            path: e.path().to_string(),
            line: inner.line(),
            column: inner.column(),
            message: inner.to_string(),
        }
    })?;
    file.to_problem()
}

/// Pretty JSON for a problem, readable back by [`parse_spec`].
pub fn serialize_spec(problem: &Problem) -> String {
    serde_json::to_string_pretty(&SpecFile::from_problem(problem)).expect("problem files always serialize")
}

fn matrix(field: &str, rows: &[Vec<f64>], cols_hint: Option<usize>) -> Result<DMatrix<f64>, CliError> {
    let cols = rows.first().map(|r| r.len()).or(cols_hint).unwrap_or(0);
    if let Some(r) = rows.iter().position(|r| r.len() != cols) {
        return Err(invalid(field, format!("row {r} has {} entries, expected {cols}", rows[r].len())));
    }
    Ok(DMatrix::from_fn(rows.len(), cols, |r, c| rows[r][c]))
}

fn rows_of(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    (0..m.nrows()).map(|r| m.row(r).iter().copied().collect()).collect()
}

impl RegionFile {
    /// `width` is needed for empty point lists and is checked otherwise.
    pub fn to_region(&self, field: &str, width: Option<usize>) -> Result<Region, CliError> {
        let geom = |e: reachnet_core::polytope::PolytopeError| invalid(field, e.to_string());
        let region = match self {
            RegionFile::Box { lo, hi } => {
                if lo.len() != hi.len() {
                    return Err(invalid(field, format!("box bounds have {} and {} entries", lo.len(), hi.len())));
                }
                if let Some(k) = (0..lo.len()).find(|&k| lo[k] > hi[k]) {
                    return Err(invalid(field, format!("box coordinate {k} has lo > hi")));
                }
                Region::Polytope(HPolytope::from_box(lo, hi).map_err(geom)?)
            }
            RegionFile::Hrep(text) => Region::Polytope(HPolytope::from_text(text).map_err(geom)?),
            RegionFile::Vertices(v) => Region::Polytope(HPolytope::from_vertices(v).map_err(geom)?),
            RegionFile::Points(p) => {
                let w = p.first().map(|r| r.len()).or(width).unwrap_or(0);
                Region::Points(PointTable::new(w, p.clone()).map_err(|e| invalid(field, e.to_string()))?)
            }
        };
        if let Some(w) = width {
            if region.dim() != w {
                return Err(invalid(field, format!("region has dimension {}, expected {w}", region.dim())));
            }
        }
        Ok(region)
    }

    pub fn from_region(r: &Region) -> Self {
        match r {
            Region::Polytope(p) => RegionFile::Hrep(p.to_text()),
            Region::Points(t) => RegionFile::Points(t.points().to_vec()),
        }
    }
}

fn scoped(owner: usize, field: &str, agents: &Option<Vec<usize>>, region: &RegionFile) -> Result<ScopedRegion, CliError> {
    Ok(ScopedRegion {
        agents: agents.clone().unwrap_or_else(|| vec![owner]),
        region: region.to_region(field, None)?,
    })
}

fn scoped_file(owner: usize, s: &ScopedRegion) -> ScopedFile {
    ScopedFile {
        agents: (s.agents != [owner]).then(|| s.agents.clone()),
        region: RegionFile::from_region(&s.region),
    }
}

impl SpecFile {
    pub fn to_problem(&self) -> Result<Problem, CliError> {
        let network = if self.agents.is_empty() {
            if self.horizon.is_some() || !self.coupling.is_empty() || !self.targets.is_empty() {
                return Err(invalid("agents", "a network needs at least one agent"));
            }
            None
        } else {
            Some(self.network()?)
        };
        let axis_sets = self.axis_problem.as_ref().map(axis_sets).transpose()?;
        if network.is_none() && axis_sets.is_none() {
            return Err(invalid("agents", "the file holds neither agents nor an axis_problem"));
        }
        Ok(Problem { network, axis_sets })
    }

    fn network(&self) -> Result<NetworkSpec, CliError> {
        let horizon = self.horizon.ok_or_else(|| invalid("horizon", "missing"))?;
        if horizon < 0 {
            return Err(invalid("horizon", format!("must be nonnegative, got {horizon}")));
        }
        let count = self.agents.len();
        let mut agents = Vec::with_capacity(count);
        for (i, a) in self.agents.iter().enumerate() {
            agents.push(agent(i, a)?);
        }
        for (l, c) in self.coupling.iter().enumerate() {
            let field = format!("coupling[{l}]");
            if c.agent >= count {
                return Err(invalid(format!("{field}.agent"), format!("agent {} does not exist", c.agent)));
            }
            let terms = |ts: &[TermFile], name: &str| -> Result<Vec<(usize, Vec<f64>)>, CliError> {
                ts.iter()
                    .enumerate()
                    .map(|(k, t)| {
                        if t.agent >= count {
                            Err(invalid(format!("{field}.{name}[{k}].agent"), format!("agent {} does not exist", t.agent)))
                        } else {
                            Ok((t.agent, t.coeffs.clone()))
                        }
                    })
                    .collect()
            };
            let coupling = LinearCoupling {
                state_terms: terms(&c.state_terms, "state_terms")?,
                input_terms: terms(&c.input_terms, "input_terms")?,
                relation: match c.relation {
                    RelationFile::Le => Relation::Le,
                    RelationFile::Eq => Relation::Eq,
                    RelationFile::Lt => Relation::Lt,
                },
                rhs: c.rhs,
            };
            // agents named in a coupling row become constraint neighbours
            let owner: &mut AgentSpec = &mut agents[c.agent];
            for (j, _) in coupling.state_terms.iter().chain(&coupling.input_terms) {
                if *j != c.agent && !owner.neighbours(c.agent).contains(j) {
                    owner.constraint_neighbours.push(*j);
                }
            }
            owner.constraint_neighbours.sort_unstable();
            owner.coupling.push(coupling);
        }
        for (l, t) in self.targets.iter().enumerate() {
            let field = format!("targets[{l}]");
            if t.agent >= count {
                return Err(invalid(format!("{field}.agent"), format!("agent {} does not exist", t.agent)));
            }
            let s = scoped(t.agent, &format!("{field}.region"), &t.agents, &t.region)?;
            let slot = match t.role {
                Role::Target => &mut agents[t.agent].target,
                Role::Start => &mut agents[t.agent].start,
            };
            if slot.is_some() {
                return Err(invalid(field, format!("agent {} already has a {:?} region", t.agent, t.role).to_lowercase()));
            }
            *slot = Some(s);
        }
        let spec = NetworkSpec {
            horizon: horizon as usize,
            agents,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn from_problem(problem: &Problem) -> Self {
        let mut file = SpecFile {
            horizon: None,
            agents: Vec::new(),
            coupling: Vec::new(),
            targets: Vec::new(),
            axis_problem: None,
        };
        if let Some(spec) = &problem.network {
            file.horizon = Some(spec.horizon as i64);
            for (i, a) in spec.agents.iter().enumerate() {
                file.agents.push(agent_file(i, a));
                for c in &a.coupling {
                    let terms = |ts: &[(usize, Vec<f64>)]| {
                        ts.iter()
                            .map(|(j, v)| TermFile {
                                agent: *j,
                                coeffs: v.clone(),
                            })
                            .collect()
                    };
                    file.coupling.push(CouplingFile {
                        agent: i,
                        state_terms: terms(&c.state_terms),
                        input_terms: terms(&c.input_terms),
                        relation: match c.relation {
                            Relation::Le => RelationFile::Le,
                            Relation::Eq => RelationFile::Eq,
                            Relation::Lt => RelationFile::Lt,
                        },
                        rhs: c.rhs,
                    });
                }
                for (s, role) in [(&a.target, Role::Target), (&a.start, Role::Start)] {
                    if let Some(s) = s {
                        let f = scoped_file(i, s);
                        file.targets.push(TargetFile {
                            agent: i,
                            agents: f.agents,
                            region: f.region,
                            role,
                        });
                    }
                }
            }
        }
        if let Some(sets) = &problem.axis_sets {
            file.axis_problem = Some(AxisProblemFile {
                sets: sets
                    .iter()
                    .map(|s| AxisSetFile {
                        axes: s.axes().indices().to_vec(),
                        region: match s.backend() {
                            SetBackend::Points(t) => RegionFile::Points(t.points().to_vec()),
                            SetBackend::Polytope(p) => RegionFile::Hrep(p.to_text()),
                        },
                    })
                    .collect(),
            });
        }
        file
    }
}

fn agent(i: usize, a: &AgentFile) -> Result<AgentSpec, CliError> {
    let at = |name: &str| format!("agents[{i}].{name}");
    let dynamics = match &a.dynamics {
        DynamicsFile::Affine(d) => {
            let blocks = |m: &BTreeMap<usize, Vec<Vec<f64>>>, name: &str| -> Result<BTreeMap<usize, DMatrix<f64>>, CliError> {
                m.iter()
                    .map(|(j, rows)| Ok((*j, matrix(&at(&format!("dynamics.affine.{name}.{j}")), rows, None)?)))
                    .collect()
            };
            let e = match &d.e {
                Some(rows) => matrix(&at("dynamics.affine.e"), rows, None)?,
                None => DMatrix::zeros(a.state_dim, 0),
            };
            let disturbance = match &d.disturbance {
                Some(r) => match r.to_region(&at("dynamics.affine.disturbance"), None)? {
                    Region::Polytope(p) => Some(p),
                    Region::Points(_) => {
                        return Err(invalid(at("dynamics.affine.disturbance"), "must be a polytope"));
                    }
                },
                None => None,
            };
            Dynamics::Affine(AffineDynamics {
                a: blocks(&d.a, "a")?,
                b: blocks(&d.b, "b")?,
                k: DVector::from_vec(d.k.clone().unwrap_or_else(|| vec![0.0; a.state_dim])),
                e,
                disturbance,
            })
        }
        DynamicsFile::Finite(table) => Dynamics::Finite(
            table
                .iter()
                .map(|t| Transition {
                    state: t.state.clone(),
                    input: t.input.clone(),
                    next: t.next.clone(),
                })
                .collect(),
        ),
    };
    let opt = |s: &Option<ScopedFile>, name: &str| {
        s.as_ref()
            .map(|s| scoped(i, &at(&format!("{name}.region")), &s.agents, &s.region))
            .transpose()
    };
    Ok(AgentSpec {
        state_dim: a.state_dim,
        input_dim: a.input_dim,
        state_neighbours: a.state_neighbours.clone(),
        constraint_neighbours: a.constraint_neighbours.clone(),
        dynamics,
        state_set: a.state_set.to_region(&at("state_set"), Some(a.state_dim))?,
        input_set: a.input_set.to_region(&at("input_set"), Some(a.input_dim))?,
        target: None,
        start: None,
        partition_k: opt(&a.partition_k, "partition_k")?,
        partition_h: opt(&a.partition_h, "partition_h")?,
        coupling: Vec::new(),
    })
}

fn agent_file(i: usize, a: &AgentSpec) -> AgentFile {
    let dynamics = match &a.dynamics {
        Dynamics::Affine(d) => DynamicsFile::Affine(AffineFile {
            a: d.a.iter().map(|(j, m)| (*j, rows_of(m))).collect(),
            b: d.b.iter().map(|(j, m)| (*j, rows_of(m))).collect(),
            k: Some(d.k.iter().copied().collect()),
            e: (d.e.ncols() > 0).then(|| rows_of(&d.e)),
            disturbance: d.disturbance.as_ref().map(|p| RegionFile::Hrep(p.to_text())),
        }),
        Dynamics::Finite(t) => DynamicsFile::Finite(
            t.iter()
                .map(|t| TransitionFile {
                    state: t.state.clone(),
                    input: t.input.clone(),
                    next: t.next.clone(),
                })
                .collect(),
        ),
    };
    AgentFile {
        state_dim: a.state_dim,
        input_dim: a.input_dim,
        state_neighbours: a.state_neighbours.clone(),
        constraint_neighbours: a.constraint_neighbours.clone(),
        dynamics,
        state_set: RegionFile::from_region(&a.state_set),
        input_set: RegionFile::from_region(&a.input_set),
        partition_k: a.partition_k.as_ref().map(|s| scoped_file(i, s)),
        partition_h: a.partition_h.as_ref().map(|s| scoped_file(i, s)),
    }
}

fn axis_sets(p: &AxisProblemFile) -> Result<Vec<LabeledSet>, CliError> {
    if p.sets.is_empty() {
        return Err(invalid("axis_problem.sets", "needs at least one set"));
    }
    let sets: Vec<LabeledSet> = p
        .sets
        .iter()
        .enumerate()
        .map(|(k, s)| {
            let field = format!("axis_problem.sets[{k}]");
            let axes = AxisSet::new(s.axes.clone()).map_err(|e| invalid(format!("{field}.axes"), e.to_string()))?;
            let region = s.region.to_region(&format!("{field}.region"), Some(axes.len()))?;
            let set = match region {
                Region::Polytope(poly) => LabeledSet::polytope(axes, poly),
                Region::Points(t) => LabeledSet::points(axes, t.points().to_vec()),
            };
            set.map_err(|e| invalid(field, e.to_string()))
        })
        .collect::<Result<_, _>>()?;
    if sets.iter().any(|s| s.kind() != sets[0].kind()) {
        return Err(invalid("axis_problem.sets", "cannot mix point lists and polytopes"));
    }
    Ok(sets)
}
