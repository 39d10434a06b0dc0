//! Batch execution: writes three scenario files and sweeps them in parallel.
//!
//! The last scenario puts two faulty nodes on K4 with f = 1, so the sweep
//! records it as an input error and the batch status is a failure.

use std::fs;

use iabc::graph::DirectedGraph;
use iabc::harness::{cmd_sweep, SweepOptions};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let dir = tempfile::tempdir()?;
    // Graphs live in a subdirectory; the sweep only picks up top-level files.
    fs::create_dir(dir.path().join("graphs"))?;
    fs::write(
        dir.path().join("graphs/k4.json"),
        serde_json::to_string(&DirectedGraph::complete(4).to_file())?,
    )?;
    let scenario = |adversary: &str, faulty: &str| {
        format!(
            r#"{{"graph": "graphs/k4.json", "f": 1, "faulty": {faulty}, "adversary": {adversary},
                "inputs": [0, 6, 12, 3], "epsilon": 1e-6}}"#
        )
    };
    fs::write(
        dir.path().join("a_constant.json"),
        scenario(r#"{"name": "constant", "params": {"value": 50}}"#, "[4]"),
    )?;
    fs::write(
        dir.path().join("b_random.json"),
        scenario(r#"{"name": "split_random", "seed": 3}"#, "[1]"),
    )?;
    fs::write(
        dir.path().join("c_bad.json"),
        scenario(r#"{"name": "silent"}"#, "[3, 4]"),
    )?;

    let report = cmd_sweep(
        dir.path(),
        &SweepOptions {
            parallel: Some(2),
            ..Default::default()
        },
    )?;
    println!("{}", serde_json::to_string_pretty(&report)?);
    println!("batch status: {:?}", report.status());
    Ok(())
}
