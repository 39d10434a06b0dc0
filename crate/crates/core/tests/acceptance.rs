//! Acceptance gate. Runs every criterion, prints one line each and exits
//! non-zero if any fails.

mod common;

use std::collections::BTreeMap;
use std::fs;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::process::ExitCode;
use std::sync::OnceLock;
use std::time::{Duration, Instant};

use iabc::adversary::AdversarySpec;
use iabc::engine::{run_scenario, RoundTrace, Scenario, ScenarioRun, StoppingRule};
use iabc::graph::{
    check_sufficiency_condition, enumerate_reduced_graphs, has_nonzero_column_in_power,
    reduced_graph_count, root_exists, ConnectivityMatrix, DirectedGraph, FaultConfig,
};
use iabc::harness::{cmd_sweep, run_config, GraphSource, RunOptions, ScenarioConfig, SweepOptions};
use iabc::matrix::{
    block_length, block_product_certificate, build_transition_matrix, convergence_certificate,
    dominance_check, ergodicity, hajnal_bound_check, Matrix, TransitionMatrix,
};
use rand::Rng;

type Outcome = Result<String, String>;
type Criterion = (&'static str, fn() -> Outcome, Option<Duration>);

macro_rules! ensure {
    ($cond:expr, $($msg:tt)+) => {
        let ok: bool = $cond;
        if !ok {
            return Err(format!($($msg)+));
        }
    };
}

const SCENARIOS: usize = 1000;
const EPSILON: f64 = 1e-6;

struct Corpus {
    scenarios: Vec<Scenario>,
    runs: Vec<ScenarioRun>,
    matrices: Vec<Vec<Result<TransitionMatrix, String>>>,
}

fn corpus() -> &'static Corpus {
    static CORPUS: OnceLock<Corpus> = OnceLock::new();
    CORPUS.get_or_init(|| {
        let mut rng = common::rng(0x1abc);
        let scenarios: Vec<Scenario> = (0..SCENARIOS)
            .map(|_| {
                common::random_scenario(&mut rng).with_stopping(StoppingRule::spread_below(EPSILON))
            })
            .collect();
        let runs: Vec<ScenarioRun> = scenarios.iter().map(|s| run_scenario(s).unwrap()).collect();
        let matrices = scenarios
            .iter()
            .zip(&runs)
            .map(|(s, r)| {
                r.traces
                    .iter()
                    .map(|tr| {
                        build_transition_matrix(tr, &s.graph, &s.faults).map_err(|e| e.to_string())
                    })
                    .collect()
            })
            .collect();
        Corpus {
            scenarios,
            runs,
            matrices,
        }
    })
}

fn a_of(g: &DirectedGraph, f: usize, i: usize) -> f64 {
    1.0 / (g.in_degree(i) + 1 - 2 * f) as f64
}

fn beta_of(g: &DirectedGraph, f: usize) -> f64 {
    let alpha = g.nodes().map(|i| a_of(g, f, i)).fold(1.0, f64::min);
    if f == 0 {
        alpha
    } else {
        alpha / (4 * f) as f64
    }
}

/// Re-checks one matrix from scratch against the trace it came from.
fn audit_matrix(m: &TransitionMatrix, tr: &RoundTrace, s: &Scenario) -> Result<(), String> {
    let (g, fc) = (&s.graph, &s.faults);
    let beta = beta_of(g, fc.f);
    let rows = m.matrix.to_rows();
    let scale = tr
        .states_before
        .iter()
        .fold(1.0_f64, |acc, v| acc.max(v.abs()));
    for (p, row) in rows.iter().enumerate() {
        let i = tr.nodes[p];
        let sum: f64 = row.iter().sum();
        ensure!(
            (sum - 1.0).abs() <= 1e-12,
            "t={} node {i}: row sum {sum}",
            tr.t
        );
        ensure!(
            row.iter().all(|&x| x >= 0.0),
            "t={} node {i}: negative entry",
            tr.t
        );
        ensure!(
            row[p] == a_of(g, fc.f, i),
            "t={} node {i}: diagonal {} != a_i",
            tr.t,
            row[p]
        );
        for (q, &x) in row.iter().enumerate() {
            let j = tr.nodes[q];
            ensure!(
                x == 0.0 || j == i || g.has_edge(j, i),
                "t={} node {i}: entry at {j} without an edge",
                tr.t
            );
        }
        let honest_in = g
            .in_neighbors(i)
            .iter()
            .filter(|j| !fc.is_faulty(**j))
            .count();
        let need = (honest_in + 1).saturating_sub(fc.f);
        let have = row.iter().filter(|&&x| x >= beta * (1.0 - 1e-9)).count();
        ensure!(
            have >= need,
            "t={} node {i}: {have} entries >= beta, need {need}",
            tr.t
        );
        let v: f64 = row.iter().zip(&tr.states_before).map(|(x, v)| x * v).sum();
        let err = (v - tr.states_after[p]).abs();
        ensure!(
            err <= 1e-9 * scale,
            "t={} node {i}: reproduction error {err}",
            tr.t
        );
    }
    Ok(())
}

fn hand_fixture() -> Outcome {
    let g = DirectedGraph::complete(4);
    let fc = FaultConfig::new(1, [4]).unwrap();
    let s = Scenario::new(
        g.clone(),
        fc.clone(),
        AdversarySpec::named("constant").with_param("value", 100.0),
        vec![0.0, 6.0, 12.0, 0.0],
    )
    .unwrap()
    .with_stopping(StoppingRule::fixed_rounds(1));
    let run = run_scenario(&s).unwrap();
    let tr = &run.traces[0];
    // Node 1 keeps 12 -> (0+12)/2; node 2 keeps 12 -> (6+12)/2; node 3 keeps 6 -> (12+6)/2.
    ensure!(
        tr.states_after == vec![6.0, 9.0, 9.0],
        "round 1 states {:?}",
        tr.states_after
    );
    let m = build_transition_matrix(tr, &g, &fc).map_err(|e| e.to_string())?;
    let expected = vec![
        vec![0.5, 0.0, 0.5],
        vec![0.0, 0.5, 0.5],
        vec![0.0, 0.5, 0.5],
    ];
    ensure!(
        m.matrix.to_rows() == expected,
        "M[1] = {:?}",
        m.matrix.to_rows()
    );
    Ok("v[1] = (6, 9, 9), M[1] rows exact".into())
}

fn row_conditions() -> Outcome {
    let c = corpus();
    let mut rounds = 0;
    for ((s, run), ms) in c.scenarios.iter().zip(&c.runs).zip(&c.matrices) {
        for (tr, m) in run.traces.iter().zip(ms) {
            let m = m
                .as_ref()
                .map_err(|e| format!("{e} (graph {:?}, F {:?})", s.graph, s.faults))?;
            ensure!(m.checks.all(), "t={}: module flags {:?}", tr.t, m.checks);
            audit_matrix(m, tr, s)?;
            rounds += 1;
        }
    }
    let mut by_f = [0; 3];
    c.scenarios.iter().for_each(|s| by_f[s.faults.f] += 1);
    Ok(format!(
        "{} scenarios (f = 0/1/2: {:?}), {rounds} round matrices",
        c.scenarios.len(),
        by_f
    ))
}

fn validity() -> Outcome {
    let c = corpus();
    let tol = |x: f64| 1e-12 * x.abs().max(1.0);
    for run in &c.runs {
        let (u, mu) = (&run.summary.u, &run.summary.mu);
        for t in 1..u.len() {
            ensure!(
                u[t] <= u[t - 1] + tol(u[t - 1]),
                "U rose at t={t}: {} -> {}",
                u[t - 1],
                u[t]
            );
            ensure!(
                mu[t] >= mu[t - 1] - tol(mu[t - 1]),
                "mu fell at t={t}: {} -> {}",
                mu[t - 1],
                mu[t]
            );
        }
        ensure!(run.summary.validity, "engine reported a validity failure");
    }
    Ok(format!("{} scenarios", c.runs.len()))
}

fn convergence() -> Outcome {
    let c = corpus();
    let mut max_rounds = 0;
    let mut block_checks = 0;
    for (s, run) in c.scenarios.iter().zip(&c.runs) {
        ensure!(
            run.summary.final_spread < EPSILON,
            "spread {} after {} rounds",
            run.summary.final_spread,
            run.summary.rounds
        );
        max_rounds = max_rounds.max(run.summary.rounds);
        let cert = convergence_certificate(&run.traces, &s.graph, &s.faults, EPSILON)
            .map_err(|e| e.to_string())?;
        ensure!(
            cert.passes,
            "certificate fails: {:?}",
            cert.block_spread_checks
        );

        // Continue small-block scenarios past convergence so that at least
        // two blocks complete.
        let block = block_length(&s.graph, &s.faults).unwrap();
        if block <= 120 {
            let long = s
                .clone()
                .with_stopping(StoppingRule::fixed_rounds(2 * block as usize));
            let traces = run_scenario(&long).unwrap().traces;
            let cert = convergence_certificate(&traces, &s.graph, &s.faults, f64::INFINITY)
                .map_err(|e| e.to_string())?;
            let blocks = cert.blocks.as_ref().ok_or("unverified rounds")?;
            ensure!(
                blocks.blocks.len() == 2,
                "{} complete blocks",
                blocks.blocks.len()
            );
            for check in &cert.block_spread_checks {
                ensure!(
                    check.ratio <= check.bound + 1e-10,
                    "t={}: ratio {} > bound {}",
                    check.t,
                    check.ratio,
                    check.bound
                );
                block_checks += 1;
            }
        }
    }
    Ok(format!(
        "max {max_rounds} rounds to 1e-6, {block_checks} block-boundary spread checks"
    ))
}

fn oracle_delta(m: &Matrix) -> f64 {
    (0..m.ncols())
        .map(|j| {
            let col: Vec<f64> = m.column(j).collect();
            col.iter().copied().fold(f64::NEG_INFINITY, f64::max)
                - col.iter().copied().fold(f64::INFINITY, f64::min)
        })
        .fold(0.0, f64::max)
}

fn oracle_lambda(m: &Matrix) -> f64 {
    let n = m.nrows();
    let mut worst: f64 = 0.0;
    for a in 0..n {
        for b in 0..n {
            let tv: f64 = m
                .row(a)
                .iter()
                .zip(m.row(b))
                .map(|(x, y)| (x - y).abs())
                .sum::<f64>()
                / 2.0;
            worst = worst.max(tv);
        }
    }
    worst
}

fn naive_product(ms: &[Matrix]) -> Matrix {
    let n = ms[0].nrows();
    let mut acc = Matrix::identity(n);
    for m in ms {
        let mut next = Matrix::zeros(n, n);
        for i in 0..n {
            for j in 0..n {
                next[(i, j)] = (0..n).map(|k| acc[(i, k)] * m[(k, j)]).sum();
            }
        }
        acc = next;
    }
    acc
}

fn ergodicity_oracle() -> Outcome {
    let mut rng = common::rng(5);
    let mut worst: f64 = 0.0;
    for _ in 0..10_000 {
        let n = rng.random_range(2..=6);
        let m = common::random_stochastic(&mut rng, n);
        let r = ergodicity(&m).map_err(|e| e.to_string())?;
        let (d, l) = (oracle_delta(&m), oracle_lambda(&m));
        worst = worst.max((r.delta - d).abs()).max((r.lambda - l).abs());
        ensure!(
            (r.delta - d).abs() <= 1e-12,
            "delta {} vs oracle {d}",
            r.delta
        );
        ensure!(
            (r.lambda - l).abs() <= 1e-12,
            "lambda {} vs oracle {l}",
            r.lambda
        );
    }
    for _ in 0..1000 {
        let n = rng.random_range(2..=6);
        let len = rng.random_range(1..=5);
        let ms: Vec<Matrix> = (0..len)
            .map(|_| common::random_stochastic(&mut rng, n))
            .collect();
        let bound: f64 = ms.iter().map(oracle_lambda).product();
        let d = oracle_delta(&naive_product(&ms));
        ensure!(d <= bound + 1e-10, "delta(product) {d} > {bound}");
        let h = hajnal_bound_check(&ms).map_err(|e| e.to_string())?;
        ensure!(h.holds, "module Hajnal check failed: {h:?}");
    }
    Ok(format!(
        "10000 matrices (max deviation {worst:.1e}), 1000 products"
    ))
}

fn reduced_graphs() -> Outcome {
    let k4 = DirectedGraph::complete(4);
    let fc = FaultConfig::new(1, [4]).unwrap();
    let tau = enumerate_reduced_graphs(&k4, &fc).unwrap().len();
    ensure!(tau == 8, "tau = {tau}");
    ensure!(
        reduced_graph_count(&k4, &fc).unwrap() == 8,
        "closed-form tau"
    );
    ensure!(
        check_sufficiency_condition(&k4, 1).unwrap().holds,
        "K4 fails"
    );
    let cyc = check_sufficiency_condition(&DirectedGraph::cycle(3), 1).unwrap();
    ensure!(!cyc.holds, "3-cycle passes");
    let w = cyc.witness.ok_or("no witness")?;
    ensure!(w.reduced.edges().count() == 0, "witness has edges");

    let mut rng = common::rng(6);
    let mut rooted = 0;
    while rooted < 20_000 {
        let n = rng.random_range(2..=6);
        let p = rng.random_range(0.3..=1.0);
        let g = common::random_graph(&mut rng, n, p);
        let f = rng.random_range(0..=2.min(n - 1));
        let faults = common::random_faults(&mut rng, n, f);
        if faults.phi() == n || reduced_graph_count(&g, &faults).unwrap() > 5000 {
            continue;
        }
        let power = n - faults.phi();
        for h in enumerate_reduced_graphs(&g, &faults).unwrap() {
            if root_exists(&h).is_some() {
                let col = has_nonzero_column_in_power(&ConnectivityMatrix::from(&h), power);
                ensure!(
                    col.is_some(),
                    "rooted reduced graph {:?} has no full column in power {power}",
                    h.edges().collect::<Vec<_>>()
                );
                rooted += 1;
            }
        }
    }
    Ok(format!(
        "tau = 8, K4 pass, 3-cycle edgeless witness, {rooted} rooted reduced graphs"
    ))
}

fn dominance() -> Outcome {
    let c = corpus();
    let mut count = 0;
    for (s, ms) in c.scenarios.iter().zip(&c.matrices) {
        let beta = beta_of(&s.graph, s.faults.f);
        for m in ms {
            let m = m.as_ref().map_err(|e| e.clone())?;
            let h = dominance_check(m, &s.graph, &s.faults).map_err(|e| e.to_string())?;
            ensure!(h.nodes() == m.nodes.as_slice(), "witness nodes differ");
            for (p, &i) in m.nodes.iter().enumerate() {
                let kept = h.kept_in(i);
                let honest_in = s
                    .graph
                    .in_neighbors(i)
                    .iter()
                    .filter(|j| !s.faults.is_faulty(**j))
                    .count();
                ensure!(
                    kept.len() == honest_in.saturating_sub(s.faults.f),
                    "node {i}: {} kept in-edges",
                    kept.len()
                );
                for (q, &j) in m.nodes.iter().enumerate() {
                    let h_entry = if j == i || kept.contains(&j) {
                        1.0
                    } else {
                        0.0
                    };
                    ensure!(
                        kept.iter().all(|k| s.graph.has_edge(*k, i)),
                        "node {i}: kept a non-edge"
                    );
                    ensure!(
                        beta * h_entry * (1.0 - 1e-9) <= m.matrix[(p, q)],
                        "t={}: beta*H[{i}][{j}] > M",
                        m.t
                    );
                }
            }
            count += 1;
        }
    }
    Ok(format!("{count} witnesses"))
}

fn block_certificates() -> Outcome {
    let g = DirectedGraph::complete(4);
    let fc = FaultConfig::new(1, [4]).unwrap();
    let s = Scenario::new(
        g.clone(),
        fc.clone(),
        AdversarySpec::named("constant").with_param("value", 100.0),
        vec![0.0, 6.0, 12.0, 0.0],
    )
    .unwrap()
    .with_stopping(StoppingRule::fixed_rounds(240));
    let run = run_scenario(&s).unwrap();
    let ms: Vec<TransitionMatrix> = run
        .traces
        .iter()
        .map(|tr| build_transition_matrix(tr, &g, &fc))
        .collect::<Result<_, _>>()
        .map_err(|e| e.to_string())?;
    let cert = block_product_certificate(&ms, &g, &fc).map_err(|e| e.to_string())?;
    ensure!(
        cert.block_len == 24 && cert.blocks.len() == 10,
        "{} blocks of {}",
        cert.blocks.len(),
        cert.block_len
    );
    let gamma = (24.0 * (0.125_f64).ln()).exp();
    for b in &cert.blocks {
        ensure!(b.scrambling, "block {} not scrambling", b.index);
        ensure!(
            b.lambda <= 1.0 - gamma + 1e-10,
            "block {}: lambda {}",
            b.index,
            b.lambda
        );
        ensure!(
            b.column_min >= gamma,
            "block {}: column min {} < gamma",
            b.index,
            b.column_min
        );
    }
    let full = convergence_certificate(&run.traces, &g, &fc, EPSILON).map_err(|e| e.to_string())?;
    ensure!(full.passes, "convergence certificate fails");
    let worst = cert.blocks.iter().map(|b| b.lambda).fold(0.0, f64::max);
    Ok(format!("10 blocks of 24 rounds, max lambda(Q) {worst:.3e}"))
}

fn tree(dir: &Path) -> BTreeMap<String, Vec<u8>> {
    let mut out = BTreeMap::new();
    let mut stack = vec![dir.to_owned()];
    while let Some(d) = stack.pop() {
        for e in fs::read_dir(&d).unwrap() {
            let p = e.unwrap().path();
            if p.is_dir() {
                stack.push(p);
            } else {
                let key = p.strip_prefix(dir).unwrap().to_string_lossy().into_owned();
                out.insert(key, fs::read(&p).unwrap());
            }
        }
    }
    out
}

fn config_of(s: &Scenario) -> ScenarioConfig {
    ScenarioConfig {
        graph: GraphSource::Inline(s.graph.to_file()),
        f: s.faults.f,
        faulty: s.faults.faulty.iter().copied().collect(),
        adversary: s.adversary.clone(),
        inputs: s.inputs.clone(),
        epsilon: EPSILON,
        max_iters: 10_000,
        default_value: s.default_value,
        seed: Some(s.seed),
        out: None,
    }
}

fn determinism() -> Outcome {
    let c = corpus();
    let opts = RunOptions {
        dump_matrices: true,
        certify: true,
        ..Default::default()
    };
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    let mut files = 0;
    for (k, s) in c.scenarios.iter().take(40).enumerate() {
        let cfg = config_of(s);
        for root in [&a, &b] {
            run_config(&cfg, &root.path().join(k.to_string()), &opts).map_err(|e| e.to_string())?;
        }
        // Writing the configs out doubles as the sweep input below.
        fs::write(
            a.path().join(format!("s{k:02}.json")),
            serde_json::to_string(&cfg).unwrap(),
        )
        .unwrap();
    }
    let (ta, tb) = (tree(a.path()), tree(b.path()));
    for (name, bytes) in &ta {
        if name.ends_with(".json") && !name.contains('/') {
            continue;
        }
        ensure!(tb.get(name) == Some(bytes), "{name} differs between runs");
        files += 1;
    }

    let sweeps: Vec<_> = [1, 4]
        .into_iter()
        .map(|k| {
            let out = tempfile::tempdir().unwrap();
            let report = cmd_sweep(
                a.path(),
                &SweepOptions {
                    parallel: Some(k),
                    out: Some(out.path().to_owned()),
                    ..Default::default()
                },
            )
            .unwrap();
            (report, tree(out.path()), out)
        })
        .collect();
    ensure!(
        sweeps[0].0.entries.len() == 40,
        "{} sweep entries",
        sweeps[0].0.entries.len()
    );
    ensure!(
        sweeps[0].1 == sweeps[1].1,
        "sweep outputs depend on parallelism"
    );
    Ok(format!(
        "{files} files identical across runs, sweep identical for 1 and 4 threads"
    ))
}

fn main() -> ExitCode {
    let criteria: [Criterion; 9] = [
        (
            "hand-worked K4 fixture",
            hand_fixture,
            Some(Duration::from_secs(1)),
        ),
        (
            "transition matrix conditions",
            row_conditions,
            Some(Duration::from_secs(120)),
        ),
        ("validity", validity, None),
        ("convergence", convergence, None),
        ("ergodicity oracle", ergodicity_oracle, None),
        (
            "reduced graphs",
            reduced_graphs,
            Some(Duration::from_secs(30)),
        ),
        ("dominance", dominance, None),
        (
            "block certificates",
            block_certificates,
            Some(Duration::from_secs(10)),
        ),
        ("determinism", determinism, None),
    ];
    let mut failed = 0;
    for (k, (name, check, limit)) in criteria.into_iter().enumerate() {
        let start = Instant::now();
        let outcome = catch_unwind(AssertUnwindSafe(check))
            .unwrap_or_else(|_| Err("panicked".into()))
            .and_then(|detail| match limit {
                Some(l) if start.elapsed() > l => {
                    Err(format!("took {:?}, limit {l:?}", start.elapsed()))
                }
                _ => Ok(detail),
            });
        let elapsed = start.elapsed();
        match outcome {
            Ok(detail) => println!(
                "criterion {}: PASS  {name}: {detail} ({elapsed:.2?})",
                k + 1
            ),
            Err(why) => {
                failed += 1;
                println!("criterion {}: FAIL  {name}: {why} ({elapsed:.2?})", k + 1);
            }
        }
    }
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
