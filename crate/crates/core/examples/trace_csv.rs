//! Writes the per-node trace and the plot data of a run to stdout.

use std::io::stdout;

use iabc::adversary::AdversarySpec;
use iabc::engine::{run_scenario, Scenario, StoppingRule};
use iabc::graph::{DirectedGraph, FaultConfig};
use iabc::harness::{write_plot_csv, write_trace_csv};

fn main() -> iabc::Result<()> {
    let scenario = Scenario::new(
        DirectedGraph::complete(5),
        FaultConfig::new(1, [5])?,
        AdversarySpec::named("boundary_push"),
        vec![2.0, 3.0, 5.0, 7.0, 0.0],
    )?
    .with_stopping(StoppingRule::spread_below(1e-3));
    let run = run_scenario(&scenario)?;

    println!("# trace");
    write_trace_csv(&run, stdout().lock())?;
    println!("# plot");
    write_plot_csv(&run, stdout().lock())?;
    Ok(())
}
