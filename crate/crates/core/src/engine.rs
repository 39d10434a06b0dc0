//! Synchronous execution of the trimmed-mean iteration.
//!
//! In round `t` every fault-free node `i` sends `v_i[t-1]` on its outgoing
//! edges, collects one value per incoming neighbor (faulty senders choose
//! theirs, withheld messages fall back to a default), drops the `f` smallest
//! and `f` largest, and averages what is left together with its own state
//! using the uniform weight `a_i = 1 / (|N_i^-| - 2f + 1)`.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::adversary::{Adversary, AdversarySpec, AdversaryView, Strategy};
use crate::error::{Error, Result};
use crate::graph::{check_degree_condition, DirectedGraph, FaultConfig, FaultFreeIndex, NodeId};

/// Relative tolerance on the validity inequalities.
pub const VALIDITY_TOL: f64 = 1e-12;

/// Default cap on the number of rounds.
pub const DEFAULT_MAX_ITERS: usize = 10_000;

/// `a_i = 1 / (|N_i^-| - 2f + 1)`. With `f > 0` node `i` needs more than
/// `2f` incoming neighbors.
pub fn weight_a(g: &DirectedGraph, f: usize, i: NodeId) -> Result<f64> {
    let d = g.in_degree(i);
    if f > 0 && d <= 2 * f {
        return Err(Error::DegreeTooSmall {
            node: i,
            in_degree: d,
            required: 2 * f + 1,
            f,
        });
    }
    Ok(1.0 / (d - 2 * f + 1) as f64)
}

/// `α = min_i a_i` over every node of the graph.
pub fn alpha(g: &DirectedGraph, f: usize) -> Result<f64> {
    g.nodes()
        .map(|i| weight_a(g, f, i))
        .try_fold(1.0_f64, |acc, a| Ok(acc.min(a?)))
}

/// The vector `r_i[t]`: one value per incoming neighbor of `receiver`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RoundInbox {
    pub receiver: NodeId,
    pub entries: BTreeMap<NodeId, f64>,
}

/// Result of discarding the `f` smallest and `f` largest received values.
/// Each list is in ascending `(value, sender)` order.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TrimOutcome {
    /// `S`.
    pub removed_small: Vec<(NodeId, f64)>,
    /// `N_i^*[t]` with the received values `w_j`.
    pub kept: Vec<(NodeId, f64)>,
    /// `L`.
    pub removed_large: Vec<(NodeId, f64)>,
}

impl TrimOutcome {
    pub fn kept_ids(&self) -> impl Iterator<Item = NodeId> + '_ {
        self.kept.iter().map(|(id, _)| *id)
    }

    pub fn kept_value(&self, id: NodeId) -> Option<f64> {
        self.kept.iter().find(|(k, _)| *k == id).map(|(_, v)| *v)
    }

    pub fn kept_values(&self) -> impl Iterator<Item = f64> + '_ {
        self.kept.iter().map(|(_, v)| *v)
    }
}

/// Sorts by `(value, sender id)` and slices off `f` entries at each end.
pub fn trim(inbox: &RoundInbox, f: usize) -> Result<TrimOutcome> {
    let got = inbox.entries.len();
    if f > 0 && got < 2 * f + 1 {
        return Err(Error::TooFewValues {
            needed: 2 * f + 1,
            got,
        });
    }
    let mut sorted: Vec<(NodeId, f64)> = inbox.entries.iter().map(|(&j, &v)| (j, v)).collect();
    sorted.sort_by(|(ja, va), (jb, vb)| va.total_cmp(vb).then(ja.cmp(jb)));
    let removed_large = sorted.split_off(got - f);
    let kept = sorted.split_off(f);
    Ok(TrimOutcome {
        removed_small: sorted,
        kept,
        removed_large,
    })
}

/// `a · (own + Σ kept)`. The result is clamped to the hull of the averaged
/// values, which only ever corrects rounding.
pub fn update_value(own: f64, trimmed: &TrimOutcome, a: f64) -> f64 {
    debug_assert!((a - 1.0 / (trimmed.kept.len() + 1) as f64).abs() < 1e-15);
    let values = || std::iter::once(own).chain(trimmed.kept_values());
    let (lo, hi) = values().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), x| {
        (lo.min(x), hi.max(x))
    });
    let total: f64 = values().map(|w| a * w).sum();
    total.clamp(lo, hi)
}

/// Everything that happened in one round, for the fault-free nodes.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RoundTrace {
    pub t: usize,
    /// Fault-free node ids; every per-node vector below follows this order.
    pub nodes: Vec<NodeId>,
    pub inboxes: Vec<RoundInbox>,
    pub trims: Vec<TrimOutcome>,
    pub states_before: Vec<f64>,
    pub states_after: Vec<f64>,
    pub u_before: f64,
    pub u_after: f64,
    pub mu_before: f64,
    pub mu_after: f64,
}

impl RoundTrace {
    pub fn position(&self, id: NodeId) -> Option<usize> {
        self.nodes.iter().position(|&n| n == id)
    }

    pub fn spread_after(&self) -> f64 {
        self.u_after - self.mu_after
    }
}

/// Fixed inputs shared by every round of a run.
#[derive(Clone, Copy, Debug)]
pub struct RoundContext<'a> {
    pub graph: &'a DirectedGraph,
    pub faults: &'a FaultConfig,
    pub index: &'a FaultFreeIndex,
    pub default_value: f64,
    pub seed: u64,
}

fn hull(values: &[f64]) -> (f64, f64) {
    values
        .iter()
        .fold((f64::NEG_INFINITY, f64::INFINITY), |(u, mu), &v| {
            (u.max(v), mu.min(v))
        })
}

/// Executes round `t` from the fault-free states `v[t-1]`.
pub fn run_round(
    ctx: &RoundContext<'_>,
    states: &[f64],
    adversary: &dyn Adversary,
    t: usize,
) -> Result<RoundTrace> {
    let nodes = ctx.index.ids();
    if states.len() != nodes.len() {
        return Err(Error::Dimension(format!(
            "{} states for {} fault-free nodes",
            states.len(),
            nodes.len()
        )));
    }
    let view = AdversaryView {
        t,
        graph: ctx.graph,
        faults: ctx.faults,
        index: ctx.index,
        states,
        seed: ctx.seed,
    };
    let emission = adversary.emit(&view);

    let f = ctx.faults.f;
    let mut inboxes = Vec::with_capacity(nodes.len());
    let mut trims = Vec::with_capacity(nodes.len());
    let mut after = Vec::with_capacity(nodes.len());
    for (p, &i) in nodes.iter().enumerate() {
        let entries = ctx
            .graph
            .in_neighbors(i)
            .iter()
            .map(|&j| {
                let value = match ctx.index.position(j) {
                    Some(q) => states[q],
                    None => emission
                        .value(j, i)
                        .filter(|v| v.is_finite())
                        .unwrap_or(ctx.default_value),
                };
                (j, value)
            })
            .collect();
        let inbox = RoundInbox {
            receiver: i,
            entries,
        };
        let a = weight_a(ctx.graph, f, i)?;
        let trimmed = trim(&inbox, f)?;
        after.push(update_value(states[p], &trimmed, a));
        inboxes.push(inbox);
        trims.push(trimmed);
    }

    let (u_before, mu_before) = hull(states);
    let (u_after, mu_after) = hull(&after);
    Ok(RoundTrace {
        t,
        nodes: nodes.to_vec(),
        inboxes,
        trims,
        states_before: states.to_vec(),
        states_after: after,
        u_before,
        u_after,
        mu_before,
        mu_after,
    })
}

/// Stop once `U[t] - μ[t] < epsilon`, or after `max_iters` rounds. Without an
/// epsilon the run always lasts `max_iters` rounds.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct StoppingRule {
    pub epsilon: Option<f64>,
    pub max_iters: usize,
}

impl StoppingRule {
    pub fn spread_below(epsilon: f64) -> Self {
        Self {
            epsilon: Some(epsilon),
            max_iters: DEFAULT_MAX_ITERS,
        }
    }

    pub fn fixed_rounds(rounds: usize) -> Self {
        Self {
            epsilon: None,
            max_iters: rounds,
        }
    }

    fn done(&self, spread: f64) -> bool {
        self.epsilon.is_some_and(|eps| spread < eps)
    }
}

/// A fully validated scenario.
#[derive(Clone, Debug)]
pub struct Scenario {
    pub graph: DirectedGraph,
    pub faults: FaultConfig,
    pub adversary: AdversarySpec,
    /// One input per node; entries of faulty nodes are ignored.
    pub inputs: Vec<f64>,
    pub stopping: StoppingRule,
    pub default_value: f64,
    pub seed: u64,
}

impl Scenario {
    pub fn new(
        graph: DirectedGraph,
        faults: FaultConfig,
        adversary: AdversarySpec,
        inputs: Vec<f64>,
    ) -> Result<Self> {
        let s = Self {
            graph,
            faults,
            adversary,
            inputs,
            stopping: StoppingRule::spread_below(1e-6),
            default_value: 0.0,
            seed: 0,
        };
        s.validate()?;
        Ok(s)
    }

    pub fn with_stopping(mut self, stopping: StoppingRule) -> Self {
        self.stopping = stopping;
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn with_default_value(mut self, value: f64) -> Self {
        self.default_value = value;
        self
    }

    /// Checks the configuration invariants and the degree condition.
    pub fn validate(&self) -> Result<()> {
        self.faults.validate_for(&self.graph)?;
        let n = self.graph.n();
        if self.inputs.len() != n {
            return Err(Error::InvalidScenario(format!(
                "{} inputs for {n} nodes",
                self.inputs.len()
            )));
        }
        if let Some((i, v)) = self
            .inputs
            .iter()
            .enumerate()
            .find(|(i, v)| !self.faults.is_faulty(i + 1) && !v.is_finite())
        {
            return Err(Error::InvalidScenario(format!(
                "input of node {} is {v}",
                i + 1
            )));
        }
        if let Some(eps) = self.stopping.epsilon {
            if eps.is_nan() || eps <= 0.0 {
                return Err(Error::InvalidScenario(format!(
                    "epsilon must be positive, got {eps}"
                )));
            }
        }
        if self.stopping.max_iters == 0 {
            return Err(Error::InvalidScenario(
                "max_iters must be at least 1".into(),
            ));
        }
        if !self.default_value.is_finite() {
            return Err(Error::InvalidScenario(
                "default_value must be finite".into(),
            ));
        }
        if self.faults.phi() == n {
            return Err(Error::InvalidScenario("every node is faulty".into()));
        }
        let degree = check_degree_condition(&self.graph, self.faults.f);
        if let Some(&node) = degree.violating.first() {
            return Err(Error::DegreeTooSmall {
                node,
                in_degree: self.graph.in_degree(node),
                required: 2 * self.faults.f + 1,
                f: self.faults.f,
            });
        }
        Ok(())
    }

    pub fn fault_free_index(&self) -> FaultFreeIndex {
        FaultFreeIndex::new(self.graph.n(), &self.faults)
    }

    /// `v[0]`: inputs of the fault-free nodes.
    pub fn initial_states(&self) -> Vec<f64> {
        self.fault_free_index()
            .ids()
            .iter()
            .map(|&id| self.inputs[id - 1])
            .collect()
    }
}

/// Per-run summary. `u[t]` and `mu[t]` are indexed from `t = 0`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RunSummary {
    pub rounds: usize,
    pub u: Vec<f64>,
    pub mu: Vec<f64>,
    pub validity: bool,
    pub converged: bool,
    pub initial_spread: f64,
    pub final_spread: f64,
    pub final_states: Vec<f64>,
}

#[derive(Clone, Debug)]
pub struct ScenarioRun {
    pub nodes: Vec<NodeId>,
    pub initial_states: Vec<f64>,
    pub traces: Vec<RoundTrace>,
    pub summary: RunSummary,
}

/// Runs a scenario with its configured built-in strategy.
pub fn run_scenario(scenario: &Scenario) -> Result<ScenarioRun> {
    scenario.validate()?;
    let strategy = Strategy::from_spec(&scenario.adversary)?;
    run_scenario_with(scenario, &strategy)
}

/// Runs a scenario against an arbitrary adversary; `scenario.adversary` is
/// ignored.
pub fn run_scenario_with(scenario: &Scenario, adversary: &dyn Adversary) -> Result<ScenarioRun> {
    scenario.validate()?;
    let index = scenario.fault_free_index();
    let ctx = RoundContext {
        graph: &scenario.graph,
        faults: &scenario.faults,
        index: &index,
        default_value: scenario.default_value,
        seed: scenario.seed,
    };
    let initial = scenario.initial_states();
    let (u0, mu0) = hull(&initial);
    let mut u = vec![u0];
    let mut mu = vec![mu0];
    let mut states = initial.clone();
    let mut traces = Vec::new();
    let stopping = scenario.stopping;
    while traces.len() < stopping.max_iters && !stopping.done(u[u.len() - 1] - mu[mu.len() - 1]) {
        let trace = run_round(&ctx, &states, adversary, traces.len() + 1)?;
        u.push(trace.u_after);
        mu.push(trace.mu_after);
        states.clone_from(&trace.states_after);
        traces.push(trace);
    }
    let final_spread = u[u.len() - 1] - mu[mu.len() - 1];
    let summary = RunSummary {
        rounds: traces.len(),
        validity: traces.is_empty() || check_validity(&traces),
        converged: stopping.epsilon.is_none_or(|eps| final_spread < eps),
        initial_spread: u0 - mu0,
        final_spread,
        final_states: states,
        u,
        mu,
    };
    Ok(ScenarioRun {
        nodes: index.ids().to_vec(),
        initial_states: initial,
        traces,
        summary,
    })
}

fn not_below(later: f64, earlier: f64) -> bool {
    later >= earlier - VALIDITY_TOL * earlier.abs().max(1.0)
}

/// `μ` never decreases and `U` never increases, within [`VALIDITY_TOL`]
/// relative slack, both inside each round and across consecutive rounds.
pub fn check_validity(traces: &[RoundTrace]) -> bool {
    let within = traces
        .iter()
        .all(|tr| not_below(tr.mu_after, tr.mu_before) && not_below(tr.u_before, tr.u_after));
    let chained = traces.windows(2).all(|w| {
        not_below(w[1].mu_before, w[0].mu_after) && not_below(w[0].u_after, w[1].u_before)
    });
    !traces.is_empty() && within && chained
}
