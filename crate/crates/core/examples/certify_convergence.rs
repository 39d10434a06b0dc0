//! Certifies a K4 run block by block.
//!
//! Every `L = tau * (n - phi)` rounds the product of the transition matrices
//! must be scrambling with a column bounded below by `beta^L`, and the spread
//! must shrink at least as fast as the product of the block coefficients.

use iabc::adversary::AdversarySpec;
use iabc::engine::{run_scenario, Scenario, StoppingRule};
use iabc::graph::{DirectedGraph, FaultConfig};
use iabc::matrix::{block_length, convergence_certificate};

fn main() -> iabc::Result<()> {
    let g = DirectedGraph::complete(4);
    let fc = FaultConfig::new(1, [4])?;
    let block = block_length(&g, &fc)?;
    let scenario = Scenario::new(
        g.clone(),
        fc.clone(),
        AdversarySpec::named("mimic_extreme").with_param("inset", 0.45),
        vec![0.0, 6.0, 12.0, 0.0],
    )?
    .with_seed(7)
    .with_stopping(StoppingRule::fixed_rounds(10 * block as usize));
    let run = run_scenario(&scenario)?;

    let cert = convergence_certificate(&run.traces, &g, &fc, 1e-6)?;
    let blocks = cert.blocks.as_ref().expect("every round verified");
    println!(
        "beta {}  tau {}  block length {}  gamma {:e}",
        blocks.beta, blocks.tau, blocks.block_len, blocks.gamma
    );
    for (b, check) in blocks.blocks.iter().zip(&cert.block_spread_checks) {
        println!(
            "block {:>2} (rounds {:>3}..={:>3}): lambda {:.3e}  column {:?}  spread ratio {:.3e} <= {:.3e}",
            b.index, b.first_round, b.last_round, b.lambda, b.column, check.ratio, check.bound
        );
    }
    println!(
        "final spread {:e}, certificate passes: {}",
        cert.final_spread, cert.passes
    );
    Ok(())
}
