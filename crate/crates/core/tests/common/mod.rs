#![allow(dead_code)]

use iabc::adversary::AdversarySpec;
use iabc::engine::Scenario;
use iabc::graph::{
    check_degree_condition, check_sufficiency_condition, DirectedGraph, FaultConfig,
};
use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Every ordered pair is an edge with probability `p`.
pub fn random_graph(rng: &mut impl Rng, n: usize, p: f64) -> DirectedGraph {
    let edges = (1..=n)
        .flat_map(|j| (1..=n).map(move |i| (j, i)))
        .filter(|(j, i)| j != i)
        .filter(|_| rng.random_bool(p))
        .collect::<Vec<_>>();
    DirectedGraph::new(n, edges).expect("generated edges are in range")
}

/// Rejection-samples a graph with `n <= 8` nodes meeting both graph
/// conditions for `f`.
pub fn random_condition_graph(rng: &mut impl Rng, f: usize) -> DirectedGraph {
    let min_n = (3 * f + 1).max(2);
    loop {
        let n = rng.random_range(min_n..=8);
        let p = rng.random_range(0.55..=1.0);
        let g = random_graph(rng, n, p);
        if check_degree_condition(&g, f).holds && check_sufficiency_condition(&g, f).unwrap().holds
        {
            return g;
        }
    }
}

pub fn random_faults(rng: &mut impl Rng, n: usize, f: usize) -> FaultConfig {
    let count = rng.random_range(0..=f);
    let faulty = sample(rng, n, count).into_iter().map(|p| p + 1);
    FaultConfig::new(f, faulty).unwrap()
}

pub fn random_adversary(rng: &mut impl Rng) -> AdversarySpec {
    match rng.random_range(0..5) {
        0 => AdversarySpec::named("silent"),
        1 => AdversarySpec::named("constant").with_param("value", rng.random_range(-5.0..5.0)),
        2 => AdversarySpec::named("boundary_push").with_param("delta", rng.random_range(0.0..3.0)),
        3 => {
            AdversarySpec::named("split_random").with_param("withhold", rng.random_range(0.0..0.5))
        }
        _ => AdversarySpec::named("mimic_extreme")
            .with_param("side", ["low", "high", "split"][rng.random_range(0..3)])
            .with_param("inset", rng.random_range(0.01..0.99)),
    }
}

/// Random graph, faulty set, strategy, inputs in `[0, 1]` and seed.
pub fn random_scenario(rng: &mut impl Rng) -> Scenario {
    let f = rng.random_range(0..=2);
    let g = random_condition_graph(rng, f);
    let faults = random_faults(rng, g.n(), f);
    let inputs = (0..g.n()).map(|_| rng.random_range(0.0..=1.0)).collect();
    let adversary = random_adversary(rng);
    let seed = rng.random();
    Scenario::new(g, faults, adversary, inputs)
        .unwrap()
        .with_seed(seed)
}

/// A row-stochastic matrix; roughly a third of the entries are zeroed.
pub fn random_stochastic(rng: &mut impl Rng, n: usize) -> iabc::matrix::Matrix {
    let rows: Vec<Vec<f64>> = (0..n)
        .map(|_| {
            let mut r: Vec<f64> = (0..n)
                .map(|_| {
                    if rng.random_bool(0.35) {
                        0.0
                    } else {
                        rng.random::<f64>()
                    }
                })
                .collect();
            if r.iter().all(|&x| x == 0.0) {
                r[rng.random_range(0..n)] = 1.0;
            }
            let s: f64 = r.iter().sum();
            r.iter_mut().for_each(|x| *x /= s);
            r
        })
        .collect();
    iabc::matrix::Matrix::from_rows(&rows).unwrap()
}
