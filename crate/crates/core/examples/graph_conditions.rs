//! Degree and sufficiency conditions on a few small graphs.
//!
//! The sufficiency check asks, for every candidate faulty set `F` with
//! `|F| <= f`, whether every reduced graph has a node that reaches all
//! others. On failure it returns a reduced graph without such a root.

use iabc::graph::{
    check_degree_condition, check_sufficiency_condition, enumerate_reduced_graphs,
    reduced_graph_count, root_exists, DirectedGraph, FaultConfig,
};

fn report(name: &str, g: &DirectedGraph, f: usize) -> iabc::Result<()> {
    let degree = check_degree_condition(g, f);
    let suff = check_sufficiency_condition(g, f)?;
    println!(
        "{name} (n = {}, f = {f}): degree {}, sufficiency {}",
        g.n(),
        degree.holds,
        suff.holds
    );
    if let Some(w) = &suff.witness {
        let edges: Vec<_> = w.reduced.edges().collect();
        println!("  witness F = {:?}, reduced edges {edges:?}", w.faulty);
    }
    Ok(())
}

fn main() -> iabc::Result<()> {
    let k4 = DirectedGraph::complete(4);
    report("K4", &k4, 1)?;
    report("3-cycle", &DirectedGraph::cycle(3), 1)?;
    report("K6", &DirectedGraph::complete(6), 2)?;
    report("K7", &DirectedGraph::complete(7), 2)?;

    // Each fault-free node of K4 with F = {4} has two fault-free in-neighbours
    // and drops one of them: 2^3 = 8 reduced graphs, all with a root.
    let fc = FaultConfig::new(1, [4])?;
    let reduced = enumerate_reduced_graphs(&k4, &fc)?;
    assert_eq!(reduced.len() as u128, reduced_graph_count(&k4, &fc)?);
    for h in &reduced {
        let edges: Vec<_> = h.edges().collect();
        println!("  {edges:?} root {:?}", root_exists(h));
    }
    Ok(())
}
