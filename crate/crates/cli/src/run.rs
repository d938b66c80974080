//! Run orchestration and artifact export.

use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use reachnet_core::affine::DisturbanceLag;
use reachnet_core::axisset::{LabeledSet, SetBackend};
use reachnet_core::fixpoint::{centralized_projections, run_distributed, FixpointError, FixpointProblem, IterationTrace, DEFAULT_TOLERANCE};
use reachnet_core::polytope::HPolytope;
use reachnet_core::reachability::{
    centralized_reachability, reach_check, run_algorithm2, start_projections, NetworkSpec, ReachError, ReachMode, ReachOptions,
};

use crate::error::{CliError, EXIT_OK};
use crate::schema::load_spec;

/// Support-function gap under which compare mode reports agreement.
pub const AGREEMENT_GAP: f64 = 1e-6;
const SAMPLES_PER_SET: usize = 64;
const MAX_VERTEX_DIM: usize = 8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum Mode {
    Centralized,
    Distributed,
    Compare,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum Task {
    Pre,
    ReachCheck,
    FixpointOnly,
}

#[derive(Debug, Clone)]
pub struct RunConfig {
    pub mode: Mode,
    pub task: Task,
    pub spec: PathBuf,
    pub out: PathBuf,
    pub tolerance: f64,
    pub max_rounds: Option<usize>,
    pub seed: u64,
    pub lag: DisturbanceLag,
}

impl RunConfig {
    pub fn new(mode: Mode, task: Task, spec: impl Into<PathBuf>, out: impl Into<PathBuf>) -> Self {
        RunConfig {
            mode,
            task,
            spec: spec.into(),
            out: out.into(),
            tolerance: DEFAULT_TOLERANCE,
            max_rounds: None,
            seed: 0,
            lag: DisturbanceLag::default(),
        }
    }

    pub fn validate(&self) -> Result<(), CliError> {
        if !(self.tolerance.is_finite() && self.tolerance > 0.0) {
            return Err(CliError::Invalid {
                field: "--tol".into(),
                message: format!("must be positive and finite, got {}", self.tolerance),
            });
        }
        if self.max_rounds == Some(0) {
            return Err(CliError::Invalid {
                field: "--max-rounds".into(),
                message: "must be at least 1".into(),
            });
        }
        Ok(())
    }

    fn distributed(&self) -> bool {
        self.mode != Mode::Centralized
    }

    fn centralized(&self) -> bool {
        self.mode != Mode::Distributed
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct TraceSummary {
    pub rounds_executed: usize,
    pub fixed_round: Option<usize>,
    pub converged: bool,
    pub globally_empty: bool,
    pub messages: usize,
}

impl TraceSummary {
    fn of(t: &IterationTrace) -> Self {
        TraceSummary {
            rounds_executed: t.rounds_executed(),
            fixed_round: t.fixed_round,
            converged: t.converged,
            globally_empty: t.globally_empty,
            messages: t.rounds.iter().map(|r| r.messages).sum(),
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct SetComparison {
    pub node: usize,
    pub name: String,
    /// Polytopes only.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub support_gap: Option<f64>,
    /// Finite tables only: points on one side and not the other.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub only_distributed: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub only_centralized: Option<usize>,
    pub equal: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct Comparison {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub max_support_gap: Option<f64>,
    pub agreement_gap: f64,
    pub all_equal: bool,
    pub sets: Vec<SetComparison>,
}

#[derive(Debug, Clone, Serialize)]
pub struct ReachVerdict {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub distributed: Option<Vec<bool>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub centralized: Option<Vec<bool>>,
    pub reachable: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct Report {
    pub mode: Mode,
    pub task: Task,
    pub seed: u64,
    pub tolerance: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub max_rounds: Option<usize>,
    pub disturbance_lag: DisturbanceLag,
    pub nodes: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub distributed: Option<TraceSummary>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub comparison: Option<Comparison>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub reach_check: Option<ReachVerdict>,
    /// Result files relative to the output directory.
    pub files: Vec<String>,
}

#[derive(Debug, Clone, Default, Serialize)]
pub struct Timings {
    pub load_seconds: f64,
    pub local_solve_seconds: Vec<f64>,
    /// Sum of node step times per round.
    pub round_seconds: Vec<f64>,
    pub distributed_seconds: f64,
    pub centralized_seconds: f64,
    pub total_seconds: f64,
}

struct Writer<'a> {
    root: &'a Path,
    seed: u64,
    files: Vec<String>,
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> CliError + '_ {
    move |source| CliError::Io {
        path: path.to_path_buf(),
        source,
    }
}

fn csv(header: &str, rows: &[Vec<f64>]) -> String {
    let mut s = String::from(header);
    s.push('\n');
    for r in rows {
        let cells: Vec<String> = r.iter().map(|v| v.to_string()).collect();
        s.push_str(&cells.join(","));
        s.push('\n');
    }
    s
}

/// Stable per-file seed offset.
fn mix(seed: u64, name: &str) -> u64 {
    name.bytes()
        .fold(seed ^ 0xcbf2_9ce4_8422_2325, |h, b| (h ^ u64::from(b)).wrapping_mul(0x0100_0000_01b3))
}

fn samples(p: &HPolytope, vertices: Option<&[Vec<f64>]>, rng: &mut ChaCha8Rng) -> Result<Vec<Vec<f64>>, CliError> {
    let mut out = Vec::with_capacity(SAMPLES_PER_SET);
    match vertices {
        Some(vs) if !vs.is_empty() => {
            // random convex combinations with exponential weights
            for _ in 0..SAMPLES_PER_SET {
                let w: Vec<f64> = vs.iter().map(|_| -(1.0 - rng.gen::<f64>()).ln()).collect();
                let total: f64 = w.iter().sum();
                let mut x = vec![0.0; p.dim()];
                for (v, wk) in vs.iter().zip(&w) {
                    for (xi, vi) in x.iter_mut().zip(v) {
                        *xi += vi * wk / total;
                    }
                }
                out.push(x);
            }
        }
        _ => {
            for _ in 0..SAMPLES_PER_SET {
                let d: Vec<f64> = (0..p.dim()).map(|_| rng.gen::<f64>() * 2.0 - 1.0).collect();
                if let Some(x) = p.maximizer(&d).map_err(reachnet_core::axisset::AxisError::from)? {
                    out.push(x);
                }
            }
        }
    }
    Ok(out)
}

impl Writer<'_> {
    fn write(&mut self, rel: &str, contents: &str) -> Result<(), CliError> {
        let path = self.root.join(rel);
        if let Some(dir) = path.parent() {
            fs::create_dir_all(dir).map_err(io_err(dir))?;
        }
        fs::write(&path, contents).map_err(io_err(&path))?;
        self.files.push(rel.to_string());
        Ok(())
    }

    fn json<T: Serialize>(&mut self, rel: &str, value: &T) -> Result<(), CliError> {
        let mut s = serde_json::to_string_pretty(value).expect("records serialize");
        s.push('\n');
        self.write(rel, &s)
    }

    /// A set as `.poly` (with vertex and sample CSVs) or as a point CSV.
    fn set(&mut self, stem: &str, s: &LabeledSet) -> Result<(), CliError> {
        let header: Vec<String> = s.axes().iter().map(|a| format!("z{a}")).collect();
        let header = header.join(",");
        match s.backend() {
            SetBackend::Points(t) => self.write(&format!("{stem}.csv"), &csv(&header, t.points())),
            SetBackend::Polytope(p) => {
                let axes: Vec<String> = s.axes().iter().map(|a| a.to_string()).collect();
                self.write(&format!("{stem}.poly"), &format!("# axes {}\n{}", axes.join(" "), p.to_text()))?;
                if p.is_empty().map_err(reachnet_core::axisset::AxisError::from)? {
                    return Ok(());
                }
                let vertices = if p.dim() <= MAX_VERTEX_DIM { p.vertices().ok() } else { None };
                if let Some(v) = &vertices {
                    self.write(&format!("{stem}_vertices.csv"), &csv(&header, v))?;
                }
                let mut rng = ChaCha8Rng::seed_from_u64(mix(self.seed, stem));
                let pts = samples(p, vertices.as_deref(), &mut rng)?;
                self.write(&format!("{stem}_samples.csv"), &csv(&header, &pts))
            }
        }
    }
}

fn compare(node: usize, name: &str, d: &LabeledSet, c: &LabeledSet) -> Result<SetComparison, CliError> {
    match (d.backend(), c.backend()) {
        (SetBackend::Polytope(p), SetBackend::Polytope(q)) => {
            let gap = p.support_gap(q).map_err(reachnet_core::axisset::AxisError::from)?;
            Ok(SetComparison {
                node,
                name: name.into(),
                support_gap: Some(gap),
                only_distributed: None,
                only_centralized: None,
                equal: gap <= AGREEMENT_GAP,
            })
        }
        (SetBackend::Points(a), SetBackend::Points(b)) => {
            let only_d = a.points().iter().filter(|p| !b.contains(p)).count();
            let only_c = b.points().iter().filter(|p| !a.contains(p)).count();
            Ok(SetComparison {
                node,
                name: name.into(),
                support_gap: None,
                only_distributed: Some(only_d),
                only_centralized: Some(only_c),
                equal: only_d == 0 && only_c == 0 && d.axes() == c.axes(),
            })
        }
        _ => Err(reachnet_core::axisset::AxisError::BackendMismatch.into()),
    }
}

fn comparison(sets: Vec<SetComparison>) -> Comparison {
    let gaps: Vec<f64> = sets.iter().filter_map(|s| s.support_gap).collect();
    Comparison {
        max_support_gap: (!gaps.is_empty()).then(|| gaps.iter().copied().fold(0.0, f64::max)),
        agreement_gap: AGREEMENT_GAP,
        all_equal: sets.iter().all(|s| s.equal),
        sets,
    }
}

fn partial_trace(e: &CliError) -> Option<&IterationTrace> {
    match e {
        CliError::Fixpoint(FixpointError::MaxRoundsExceeded { partial, .. })
        | CliError::Reach(ReachError::Fixpoint(FixpointError::MaxRoundsExceeded { partial, .. })) => Some(partial),
        _ => None,
    }
}

fn round_seconds(t: &IterationTrace) -> Vec<f64> {
    t.step_seconds.iter().map(|r| r.iter().sum()).collect()
}

/// Executes one run and writes every artifact under `config.out`.
pub fn run(config: &RunConfig) -> Result<Report, CliError> {
    let clock = Instant::now();
    config.validate()?;
    let problem = load_spec(&config.spec)?;
    let mut timings = Timings {
        load_seconds: clock.elapsed().as_secs_f64(),
        ..Timings::default()
    };
    fs::create_dir_all(&config.out).map_err(io_err(&config.out))?;
    let mut w = Writer {
        root: &config.out,
        seed: config.seed,
        files: Vec::new(),
    };
    let mut report = Report {
        mode: config.mode,
        task: config.task,
        seed: config.seed,
        tolerance: config.tolerance,
        max_rounds: config.max_rounds,
        disturbance_lag: config.lag,
        nodes: 0,
        distributed: None,
        comparison: None,
        reach_check: None,
        files: Vec::new(),
    };
    let outcome = match config.task {
        Task::FixpointOnly => {
            let sets = problem.axis_sets.ok_or_else(|| CliError::Invalid {
                field: "axis_problem".into(),
                message: "required for the fixpoint-only task".into(),
            })?;
            run_fixpoint(config, sets, &mut w, &mut report, &mut timings)
        }
        Task::Pre | Task::ReachCheck => {
            let spec = problem.network.ok_or_else(|| CliError::Invalid {
                field: "agents".into(),
                message: "required for the pre and reach-check tasks".into(),
            })?;
            run_network(config, &spec, &mut w, &mut report, &mut timings)
        }
    };
    if let Err(e) = &outcome {
        if let Some(t) = partial_trace(e) {
            w.json("trace.json", t)?;
        }
    }
    outcome?;
    timings.total_seconds = clock.elapsed().as_secs_f64();
    w.json("timings.json", &timings)?;
    report.files = w.files.clone();
    report.files.push("report.json".into());
    w.json("report.json", &report)?;
    Ok(report)
}

fn run_fixpoint(config: &RunConfig, sets: Vec<LabeledSet>, w: &mut Writer, report: &mut Report, timings: &mut Timings) -> Result<(), CliError> {
    report.nodes = sets.len();
    let mut problem = FixpointProblem::new(sets)?.with_tolerance(config.tolerance)?;
    if let Some(k) = config.max_rounds {
        problem = problem.with_max_rounds(k)?;
    }
    let mut distributed = None;
    if config.distributed() {
        let clock = Instant::now();
        let (out, trace) = run_distributed(&problem)?;
        timings.distributed_seconds = clock.elapsed().as_secs_f64();
        timings.round_seconds = round_seconds(&trace);
        w.json("trace.json", &trace)?;
        for (i, s) in out.iter().enumerate() {
            w.set(&format!("distributed/node_{i}"), s)?;
        }
        report.distributed = Some(TraceSummary::of(&trace));
        distributed = Some(out);
    }
    if config.centralized() {
        let clock = Instant::now();
        let out = centralized_projections(&problem)?;
        timings.centralized_seconds = clock.elapsed().as_secs_f64();
        for (i, s) in out.iter().enumerate() {
            w.set(&format!("centralized/node_{i}"), s)?;
        }
        if let Some(d) = &distributed {
            let sets = d
                .iter()
                .zip(&out)
                .enumerate()
                .map(|(i, (d, c))| compare(i, "set", d, c))
                .collect::<Result<Vec<_>, _>>()?;
            report.comparison = Some(comparison(sets));
        }
    }
    Ok(())
}

fn run_network(config: &RunConfig, spec: &NetworkSpec, w: &mut Writer, report: &mut Report, timings: &mut Timings) -> Result<(), CliError> {
    report.nodes = spec.len();
    let opts = ReachOptions {
        mode: if config.task == Task::ReachCheck {
            ReachMode::ReachCheck
        } else {
            ReachMode::Pre
        },
        lag: config.lag,
        tolerance: config.tolerance,
        max_rounds: config.max_rounds,
        ..ReachOptions::default()
    };
    let mut verdict = ReachVerdict {
        distributed: None,
        centralized: None,
        reachable: true,
    };
    let mut distributed = None;
    if config.distributed() {
        let clock = Instant::now();
        let out = run_algorithm2(spec, &opts)?;
        timings.distributed_seconds = clock.elapsed().as_secs_f64();
        timings.local_solve_seconds = out.solve_seconds.clone();
        timings.round_seconds = round_seconds(&out.trace);
        w.json("trace.json", &out.trace)?;
        for s in &out.solutions {
            w.set(&format!("distributed/node_{}_start_set", s.node), &s.start_set)?;
            w.set(&format!("distributed/node_{}_controls", s.node), &s.controls)?;
        }
        report.distributed = Some(TraceSummary::of(&out.trace));
        if opts.mode == ReachMode::ReachCheck {
            let v = reach_check(spec, &out, &opts)?;
            verdict.reachable &= v.iter().all(|&b| b);
            verdict.distributed = Some(v);
        }
        distributed = Some(out);
    }
    if config.centralized() {
        let clock = Instant::now();
        let out = centralized_reachability(spec, &opts)?;
        let cap = opts.elimination_cap;
        w.set("centralized/start_set", &out.start_set)?;
        w.set("centralized/controls", &out.controls)?;
        let mut per_node = Vec::with_capacity(spec.len());
        for i in 0..spec.len() {
            let (s, c) = (out.node_start_set(i, cap)?, out.node_controls(i, cap)?);
            w.set(&format!("centralized/node_{i}_start_set"), &s)?;
            w.set(&format!("centralized/node_{i}_controls"), &c)?;
            per_node.push((s, c));
        }
        if opts.mode == ReachMode::ReachCheck {
            let wanted = start_projections(spec, &out.index, &opts)?;
            let v = wanted
                .iter()
                .zip(&per_node)
                .map(|(want, (s, _))| want.is_subset_of(s, config.tolerance))
                .collect::<Result<Vec<_>, _>>()?;
            verdict.reachable &= v.iter().all(|&b| b);
            verdict.centralized = Some(v);
        }
        timings.centralized_seconds = clock.elapsed().as_secs_f64();
        if let Some(d) = &distributed {
            let mut sets = Vec::new();
            for (sol, (s, c)) in d.solutions.iter().zip(&per_node) {
                sets.push(compare(sol.node, "start_set", &sol.start_set, s)?);
                sets.push(compare(sol.node, "controls", &sol.controls, c)?);
            }
            report.comparison = Some(comparison(sets));
        }
    }
    if opts.mode == ReachMode::ReachCheck {
        report.reach_check = Some(verdict);
    }
    Ok(())
}

/// Runs and converts the outcome to an exit code, leaving `error.json` in
/// the output directory on failure.
pub fn execute(config: &RunConfig) -> i32 {
    let stale = config.out.join("error.json");
    if stale.exists() {
        let _ = fs::remove_file(&stale);
    }
    match run(config) {
        Ok(report) => {
            if let Some(c) = &report.comparison {
                if !c.all_equal {
                    log::warn!("distributed and centralized results differ");
                }
            }
            EXIT_OK
        }
        Err(e) => {
            eprintln!("error: {e}");
            let record = e.record();
            if fs::create_dir_all(&config.out).is_ok() {
                let body = serde_json::to_string_pretty(&record).expect("records serialize");
                if let Err(io) = fs::write(&stale, body + "\n") {
                    eprintln!("error: could not write {}: {io}", stale.display());
                }
            }
            record.exit_code
        }
    }
}
