//! Every built-in strategy on the same scenario, plus a custom one.
//!
//! Strategies are chosen by name and a parameter map, the same shape a
//! scenario file uses. Anything implementing [`Adversary`] can be plugged in
//! through [`run_scenario_with`].

use iabc::adversary::{
    Adversary, AdversarySpec, AdversaryView, FaultyEmission, BUILTIN_STRATEGIES,
};
use iabc::engine::{run_scenario, run_scenario_with, Scenario};
use iabc::graph::{DirectedGraph, FaultConfig};

/// Tells the lower half of the fault-free nodes a huge value and the upper
/// half a tiny one, trying to drag them apart.
struct Polarise {
    magnitude: f64,
}

impl Adversary for Polarise {
    fn name(&self) -> &str {
        "polarise"
    }

    fn emit(&self, view: &AdversaryView<'_>) -> FaultyEmission {
        let mid = (view.max_state() + view.min_state()) / 2.0;
        let mut out = FaultyEmission::default();
        for (j, i) in view.faulty_edges() {
            let below = view.state_of(i).is_some_and(|v| v < mid);
            out.send(
                j,
                i,
                if below {
                    self.magnitude
                } else {
                    -self.magnitude
                },
            );
        }
        out
    }
}

fn scenario(spec: AdversarySpec) -> iabc::Result<Scenario> {
    Ok(Scenario::new(
        DirectedGraph::complete(7),
        FaultConfig::new(2, [3, 6])?,
        spec,
        vec![1.0, 4.0, 0.0, 9.0, 2.0, 0.0, 7.0],
    )?
    .with_seed(42))
}

fn main() -> iabc::Result<()> {
    let specs = [
        AdversarySpec::named("silent"),
        AdversarySpec::named("constant").with_param("value", 1e6),
        AdversarySpec::named("boundary_push").with_param("delta", 5.0),
        AdversarySpec::named("split_random").with_param("withhold", 0.25),
        AdversarySpec::named("mimic_extreme").with_param("side", "high"),
    ];
    assert_eq!(specs.len(), BUILTIN_STRATEGIES.len());

    for spec in specs {
        let run = run_scenario(&scenario(spec.clone())?)?;
        let s = &run.summary;
        println!(
            "{:<14} rounds {:>3}  validity {}  final value ~ {:.6}",
            spec.name, s.rounds, s.validity, s.final_states[0]
        );
    }

    let run = run_scenario_with(
        &scenario(AdversarySpec::named("custom"))?,
        &Polarise { magnitude: 1e9 },
    )?;
    println!(
        "{:<14} rounds {:>3}  validity {}  final value ~ {:.6}",
        "polarise", run.summary.rounds, run.summary.validity, run.summary.final_states[0]
    );
    Ok(())
}
