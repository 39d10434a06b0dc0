//! Rebuilds the transition matrix of every round and checks that it
//! reproduces the simulated update exactly.
//!
//! Row `i` explains node `i`'s new value as a convex combination of the
//! fault-free states of the previous round, even though some of the values
//! it averaged came from faulty senders.

use iabc::adversary::AdversarySpec;
use iabc::engine::{run_scenario, Scenario, StoppingRule};
use iabc::graph::{DirectedGraph, FaultConfig};
use iabc::matrix::build_transition_matrix;

fn main() -> iabc::Result<()> {
    let g = DirectedGraph::complete(5);
    let fc = FaultConfig::new(1, [2])?;
    let scenario = Scenario::new(
        g.clone(),
        fc.clone(),
        AdversarySpec::named("mimic_extreme").with_param("inset", 0.3),
        vec![3.0, 0.0, -1.0, 8.0, 5.0],
    )?
    .with_stopping(StoppingRule::fixed_rounds(3));
    let run = run_scenario(&scenario)?;

    for trace in &run.traces {
        let m = build_transition_matrix(trace, &g, &fc)?;
        println!("t = {} (beta = {}), nodes {:?}", m.t, m.beta, m.nodes);
        for (row, audit) in m.matrix.to_rows().iter().zip(&m.audits) {
            let cells: Vec<_> = row.iter().map(|x| format!("{x:.4}")).collect();
            println!(
                "  [{}]  faulty in {}, faulty kept {}, pairs {}",
                cells.join(" "),
                audit.faulty_in,
                audit.faulty_kept,
                audit.pairs
            );
        }
        for d in m.audits.iter().flat_map(|a| &a.decompositions) {
            println!(
                "    w{} = {} * v{} + {} * v{}",
                d.kept, d.lambda, d.large, d.psi, d.small
            );
        }
        println!("  conditions hold: {}", m.checks.all());
    }
    Ok(())
}
