//! One round of the trimmed-mean update on K4, worked by hand.
//!
//! Node 4 is faulty and sends 100 to everyone. With f = 1 each fault-free
//! node drops its smallest and largest received value and averages its own
//! value with what is left, using weight `a = 1/(3 - 2 + 1) = 1/2`.
//!
//! ```bash
//! cargo run --example k4_round
//! ```

use iabc::adversary::AdversarySpec;
use iabc::engine::{run_scenario, Scenario, StoppingRule};
use iabc::graph::{DirectedGraph, FaultConfig};

fn main() -> iabc::Result<()> {
    let scenario = Scenario::new(
        DirectedGraph::complete(4),
        FaultConfig::new(1, [4])?,
        AdversarySpec::named("constant").with_param("value", 100.0),
        vec![0.0, 6.0, 12.0, 0.0],
    )?
    .with_stopping(StoppingRule::fixed_rounds(1));

    let run = run_scenario(&scenario)?;
    let round = &run.traces[0];
    for (p, &i) in round.nodes.iter().enumerate() {
        let inbox: Vec<_> = round.inboxes[p]
            .entries
            .iter()
            .map(|(j, v)| format!("{j}:{v}"))
            .collect();
        let trim = &round.trims[p];
        println!(
            "node {i}: own {} | received [{}] | dropped low {:?} high {:?} | kept {:?} -> {}",
            round.states_before[p],
            inbox.join(", "),
            trim.removed_small,
            trim.removed_large,
            trim.kept,
            round.states_after[p],
        );
    }
    println!(
        "U: {} -> {}, mu: {} -> {}",
        round.u_before, round.u_after, round.mu_before, round.mu_after
    );
    assert_eq!(round.states_after, vec![6.0, 9.0, 9.0]);
    Ok(())
}
