//! Scenario files, persisted outputs and the three command verbs.
//!
//! A scenario file is JSON:
//!
//! ```json
//! {
//!   "graph": "k4.json",
//!   "f": 1,
//!   "faulty": [4],
//!   "adversary": {"name": "constant", "params": {"value": 100}, "seed": 7},
//!   "inputs": [0, 6, 12, 0],
//!   "epsilon": 1e-6,
//!   "max_iters": 10000,
//!   "default_value": 0.0
//! }
//! ```
//!
//! `graph` is either a path, resolved against the scenario file's directory,
//! or an inline `{"n": .., "edges": [..]}` object.
//!
//! Everything written here is a pure function of the scenario and the seed,
//! so repeated runs produce byte-identical files.

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::adversary::AdversarySpec;
use crate::engine::{run_scenario, Scenario, ScenarioRun, StoppingRule, DEFAULT_MAX_ITERS};
use crate::error::{Error, Result};
use crate::graph::{
    check_degree_condition, check_sufficiency_condition, DegreeCheck, DirectedGraph, FaultConfig,
    GraphFile, NodeId, SufficiencyCheck,
};
use crate::matrix::{
    build_transition_matrix, convergence_certificate, ConditionChecks, ConvergenceCertificate,
    RowAudit, TransitionMatrix,
};

/// Process exit status of a verb.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Status {
    Pass,
    /// Validity, convergence, certificate or graph condition failure.
    Fail,
    /// Unreadable or invalid input.
    InputError,
}

impl Status {
    pub fn code(self) -> u8 {
        match self {
            Status::Pass => 0,
            Status::Fail => 1,
            Status::InputError => 2,
        }
    }

    /// Status a verb exits with when it stops on `e`.
    pub fn of_error(e: &Error) -> Self {
        match e {
            Error::Verification(_) | Error::Reconstruction { .. } => Status::Fail,
            _ => Status::InputError,
        }
    }

    fn from_pass(pass: bool) -> Self {
        if pass {
            Status::Pass
        } else {
            Status::Fail
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum GraphSource {
    Path(PathBuf),
    Inline(GraphFile),
}

fn default_max_iters() -> usize {
    DEFAULT_MAX_ITERS
}

/// Scenario file contents.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub graph: GraphSource,
    pub f: usize,
    #[serde(default)]
    pub faulty: Vec<NodeId>,
    pub adversary: AdversarySpec,
    pub inputs: Vec<f64>,
    pub epsilon: f64,
    #[serde(default = "default_max_iters")]
    pub max_iters: usize,
    #[serde(default)]
    pub default_value: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    /// Output directory, relative to the scenario file.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub out: Option<PathBuf>,
}

impl ScenarioConfig {
    /// Reads a scenario file. Relative `graph` and `out` paths are rebased
    /// onto the file's directory.
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut config: ScenarioConfig =
            serde_json::from_str(&text).map_err(|source| Error::Parse {
                path: path.to_owned(),
                source,
            })?;
        let base = path.parent().unwrap_or(Path::new(""));
        if let GraphSource::Path(p) = &mut config.graph {
            *p = base.join(&*p);
        }
        if let Some(out) = &mut config.out {
            *out = base.join(&*out);
        }
        Ok(config)
    }

    pub fn load_graph(&self) -> Result<DirectedGraph> {
        match &self.graph {
            GraphSource::Path(p) => DirectedGraph::load(p),
            GraphSource::Inline(file) => file.clone().into_graph(),
        }
    }

    /// Seed precedence: override, adversary seed, top-level seed, 0.
    pub fn effective_seed(&self, seed_override: Option<u64>) -> u64 {
        seed_override
            .or(self.adversary.seed)
            .or(self.seed)
            .unwrap_or(0)
    }

    /// Builds and validates the scenario.
    pub fn scenario(&self, seed_override: Option<u64>) -> Result<Scenario> {
        let graph = self.load_graph()?;
        let faults = FaultConfig::new(self.f, self.faulty.iter().copied())?;
        Ok(
            Scenario::new(graph, faults, self.adversary.clone(), self.inputs.clone())?
                .with_stopping(StoppingRule {
                    epsilon: Some(self.epsilon),
                    max_iters: self.max_iters,
                })
                .with_default_value(self.default_value)
                .with_seed(self.effective_seed(seed_override)),
        )
    }
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    File::create(path)
        .map(BufWriter::new)
        .map_err(|e| Error::io(path, e))
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut w = create(path)?;
    serde_json::to_writer_pretty(&mut w, value)?;
    w.write_all(b"\n").map_err(|e| Error::io(path, e))?;
    w.flush().map_err(|e| Error::io(path, e))
}

/// `t,node_id,value,u,mu,spread`, one row per fault-free node per round,
/// starting with the inputs at `t = 0`.
pub fn write_trace_csv<W: Write>(run: &ScenarioRun, writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["t", "node_id", "value", "u", "mu", "spread"])?;
    let rounds =
        std::iter::once(&run.initial_states).chain(run.traces.iter().map(|tr| &tr.states_after));
    for (t, states) in rounds.enumerate() {
        let (u, mu) = (run.summary.u[t], run.summary.mu[t]);
        for (id, v) in run.nodes.iter().zip(states) {
            w.write_record([
                t.to_string(),
                id.to_string(),
                v.to_string(),
                u.to_string(),
                mu.to_string(),
                (u - mu).to_string(),
            ])?;
        }
    }
    w.flush().map_err(csv::Error::from)?;
    Ok(())
}

/// `t,u,mu,spread`, one row per round including `t = 0`.
pub fn write_plot_csv<W: Write>(run: &ScenarioRun, writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["t", "u", "mu", "spread"])?;
    for (t, (u, mu)) in run.summary.u.iter().zip(&run.summary.mu).enumerate() {
        w.write_record([
            t.to_string(),
            u.to_string(),
            mu.to_string(),
            (u - mu).to_string(),
        ])?;
    }
    w.flush().map_err(csv::Error::from)?;
    Ok(())
}

/// On-disk form of one transition matrix.
#[derive(Clone, Debug, Serialize)]
pub struct MatrixDump<'a> {
    pub t: usize,
    pub nodes: &'a [NodeId],
    pub beta: f64,
    pub rows: Vec<Vec<String>>,
    pub audits: &'a [RowAudit],
    pub checks: &'a ConditionChecks,
    pub verified: bool,
}

impl<'a> From<&'a TransitionMatrix> for MatrixDump<'a> {
    fn from(m: &'a TransitionMatrix) -> Self {
        Self {
            t: m.t,
            nodes: &m.nodes,
            beta: m.beta,
            rows: m
                .matrix
                .to_rows()
                .into_iter()
                .map(|r| r.into_iter().map(|x| x.to_string()).collect())
                .collect(),
            audits: &m.audits,
            checks: &m.checks,
            verified: m.checks.all(),
        }
    }
}

/// Compact per-run summary written as `summary.json`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RunReport {
    pub seed: u64,
    pub rounds: usize,
    pub epsilon: f64,
    pub validity: bool,
    pub converged: bool,
    pub initial_spread: f64,
    pub final_spread: f64,
    pub final_u: f64,
    pub final_mu: f64,
    pub nodes: Vec<NodeId>,
    pub final_states: Vec<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub certificate_pass: Option<bool>,
}

#[derive(Clone, Debug, Default)]
pub struct RunOptions {
    pub dump_matrices: bool,
    pub certify: bool,
    pub out: Option<PathBuf>,
    pub seed: Option<u64>,
}

#[derive(Clone, Debug)]
pub struct RunOutcome {
    pub status: Status,
    pub out_dir: PathBuf,
    pub report: RunReport,
    pub certificate: Option<ConvergenceCertificate>,
}

/// Output directory when neither the flag nor the file names one:
/// `<name>.out` beside the scenario file.
fn default_out_dir(config_path: &Path) -> PathBuf {
    let stem = config_path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "scenario".into());
    config_path
        .parent()
        .unwrap_or(Path::new(""))
        .join(format!("{stem}.out"))
}

/// Executes one scenario and persists `trace.csv`, `plot.csv`,
/// `summary.json`, plus `matrices/` and `certificate.json` when asked.
pub fn run_config(
    config: &ScenarioConfig,
    out_dir: &Path,
    opts: &RunOptions,
) -> Result<RunOutcome> {
    let scenario = config.scenario(opts.seed)?;
    let run = run_scenario(&scenario)?;
    fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;

    let trace_path = out_dir.join("trace.csv");
    write_trace_csv(&run, create(&trace_path)?)?;
    let plot_path = out_dir.join("plot.csv");
    write_plot_csv(&run, create(&plot_path)?)?;

    if opts.dump_matrices {
        let dir = out_dir.join("matrices");
        fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
        for tr in &run.traces {
            let m = build_transition_matrix(tr, &scenario.graph, &scenario.faults)?;
            write_json(
                &dir.join(format!("round_{:05}.json", m.t)),
                &MatrixDump::from(&m),
            )?;
        }
    }

    let certificate = if opts.certify {
        let cert = convergence_certificate(
            &run.traces,
            &scenario.graph,
            &scenario.faults,
            config.epsilon,
        )?;
        write_json(&out_dir.join("certificate.json"), &cert)?;
        Some(cert)
    } else {
        None
    };

    let s = &run.summary;
    let report = RunReport {
        seed: scenario.seed,
        rounds: s.rounds,
        epsilon: config.epsilon,
        validity: s.validity,
        converged: s.converged,
        initial_spread: s.initial_spread,
        final_spread: s.final_spread,
        final_u: s.u[s.u.len() - 1],
        final_mu: s.mu[s.mu.len() - 1],
        nodes: run.nodes.clone(),
        final_states: s.final_states.clone(),
        certificate_pass: certificate.as_ref().map(|c| c.passes),
    };
    write_json(&out_dir.join("summary.json"), &report)?;

    let pass = report.validity && report.converged && report.certificate_pass != Some(false);
    Ok(RunOutcome {
        status: Status::from_pass(pass),
        out_dir: out_dir.to_owned(),
        report,
        certificate,
    })
}

/// `run` verb. Errors are input errors; verification failures come back as
/// [`Status::Fail`].
pub fn cmd_run(config_path: &Path, opts: &RunOptions) -> Result<RunOutcome> {
    let config = ScenarioConfig::load(config_path)?;
    let out_dir = opts
        .out
        .clone()
        .or_else(|| config.out.clone())
        .unwrap_or_else(|| default_out_dir(config_path));
    run_config(&config, &out_dir, opts)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CheckReport {
    pub n: usize,
    pub f: usize,
    pub degree: DegreeCheck,
    pub sufficiency: SufficiencyCheck,
    pub holds: bool,
}

/// Degree and sufficiency checks on a graph.
pub fn check_graph(g: &DirectedGraph, f: usize) -> Result<CheckReport> {
    let degree = check_degree_condition(g, f);
    let sufficiency = check_sufficiency_condition(g, f)?;
    let holds = degree.holds && sufficiency.holds;
    Ok(CheckReport {
        n: g.n(),
        f,
        degree,
        sufficiency,
        holds,
    })
}

fn write_check<W: Write>(r: &CheckReport, w: &mut W) -> std::io::Result<()> {
    writeln!(w, "graph: n = {}, f = {}", r.n, r.f)?;
    if r.degree.holds {
        writeln!(w, "degree condition: pass")?;
    } else {
        writeln!(
            w,
            "degree condition: FAIL (in-degree <= 2f at {:?})",
            r.degree.violating
        )?;
    }
    for fs in &r.sufficiency.per_fault_set {
        let verdict = if fs.holds { "pass" } else { "FAIL" };
        writeln!(w, "F = {:?}: tau = {}, {verdict}", fs.faulty, fs.tau)?;
    }
    if let Some(wit) = &r.sufficiency.witness {
        writeln!(
            w,
            "witness: F = {:?}, reduced graph without a root:",
            wit.faulty
        )?;
        for i in wit.reduced.nodes() {
            writeln!(w, "  {i} <- {:?}", wit.reduced.kept_in(*i))?;
        }
    }
    writeln!(w, "result: {}", if r.holds { "pass" } else { "FAIL" })
}

/// `check` verb: prints the report to `out` and returns the status.
pub fn cmd_check<W: Write>(graph_path: &Path, f: usize, out: &mut W) -> Result<Status> {
    let g = DirectedGraph::load(graph_path)?;
    let report = check_graph(&g, f)?;
    write_check(&report, out).map_err(|e| Error::io("<output>", e))?;
    Ok(Status::from_pass(report.holds))
}

/// One row of a [`BatchReport`].
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct BatchEntry {
    pub name: String,
    pub status: Status,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub rounds: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub final_spread: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub validity: Option<bool>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub converged: Option<bool>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub certificate_pass: Option<bool>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct BatchStats {
    pub scenarios: usize,
    pub passed: usize,
    pub failed: usize,
    pub input_errors: usize,
    pub max_rounds: Option<usize>,
    pub mean_rounds: Option<f64>,
    pub max_final_spread: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct BatchReport {
    pub entries: Vec<BatchEntry>,
    pub stats: BatchStats,
}

impl BatchReport {
    pub fn failures(&self) -> impl Iterator<Item = &BatchEntry> {
        self.entries.iter().filter(|e| e.status != Status::Pass)
    }

    pub fn status(&self) -> Status {
        Status::from_pass(self.failures().next().is_none())
    }

    fn from_entries(entries: Vec<BatchEntry>) -> Self {
        let count = |s: Status| entries.iter().filter(|e| e.status == s).count();
        let rounds: Vec<usize> = entries.iter().filter_map(|e| e.rounds).collect();
        let stats = BatchStats {
            scenarios: entries.len(),
            passed: count(Status::Pass),
            failed: count(Status::Fail),
            input_errors: count(Status::InputError),
            max_rounds: rounds.iter().copied().max(),
            mean_rounds: (!rounds.is_empty())
                .then(|| rounds.iter().sum::<usize>() as f64 / rounds.len() as f64),
            max_final_spread: entries
                .iter()
                .filter_map(|e| e.final_spread)
                .reduce(f64::max),
        };
        Self { entries, stats }
    }
}

/// Scenario files (`*.json`) directly inside `dir`, sorted by name.
pub fn scenario_files(dir: &Path) -> Result<Vec<PathBuf>> {
    let mut files = Vec::new();
    for entry in fs::read_dir(dir).map_err(|e| Error::io(dir, e))? {
        let path = entry.map_err(|e| Error::io(dir, e))?.path();
        if path.is_file() && path.extension().is_some_and(|x| x == "json") {
            files.push(path);
        }
    }
    files.sort();
    Ok(files)
}

#[derive(Clone, Debug, Default)]
pub struct SweepOptions {
    /// Worker threads; `None` uses rayon's default.
    pub parallel: Option<usize>,
    pub out: Option<PathBuf>,
    pub seed: Option<u64>,
    pub dump_matrices: bool,
}

fn sweep_one(path: &Path, out_root: &Path, opts: &SweepOptions) -> BatchEntry {
    let name = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    let run_opts = RunOptions {
        dump_matrices: opts.dump_matrices,
        certify: true,
        out: None,
        seed: opts.seed,
    };
    let result =
        ScenarioConfig::load(path).and_then(|c| run_config(&c, &out_root.join(&name), &run_opts));
    match result {
        Ok(o) => BatchEntry {
            name,
            status: o.status,
            rounds: Some(o.report.rounds),
            final_spread: Some(o.report.final_spread),
            validity: Some(o.report.validity),
            converged: Some(o.report.converged),
            certificate_pass: o.report.certificate_pass,
            error: None,
        },
        Err(e) => BatchEntry {
            name,
            status: Status::of_error(&e),
            rounds: None,
            final_spread: None,
            validity: None,
            converged: None,
            certificate_pass: None,
            error: Some(e.to_string()),
        },
    }
}

/// `sweep` verb: certifies every scenario in `dir` and writes
/// `batch_report.json` plus one output directory per scenario under the
/// output root (default `<dir>/sweep-out`). Errors only when the directory
/// itself is unusable or holds no scenarios.
pub fn cmd_sweep(dir: &Path, opts: &SweepOptions) -> Result<BatchReport> {
    let files = scenario_files(dir)?;
    if files.is_empty() {
        return Err(Error::InvalidScenario(format!(
            "no *.json scenario files in {}",
            dir.display()
        )));
    }
    let out_root = opts.out.clone().unwrap_or_else(|| dir.join("sweep-out"));
    fs::create_dir_all(&out_root).map_err(|e| Error::io(&out_root, e))?;

    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(k) = opts.parallel {
        builder = builder.num_threads(k.max(1));
    }
    let pool = builder
        .build()
        .map_err(|e| Error::InvalidScenario(format!("thread pool: {e}")))?;
    let entries = pool.install(|| {
        files
            .par_iter()
            .map(|p| sweep_one(p, &out_root, opts))
            .collect::<Vec<_>>()
    });

    let report = BatchReport::from_entries(entries);
    write_json(&out_root.join("batch_report.json"), &report)?;
    Ok(report)
}
