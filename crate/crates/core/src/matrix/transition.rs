//! Reconstruction of the per-round transition matrix `M[t]`.
//!
//! A round of the trimmed-mean update is linear in the fault-free states only
//! when every kept value came from a fault-free node. Otherwise the kept
//! faulty values are rewritten as convex combinations of fault-free values
//! that were trimmed on either side of them. The resulting row `M_i[t]`
//! satisfies, for every fault-free `i`:
//!
//! 1. it is stochastic over the fault-free nodes;
//! 2. `M_ii[t] = a_i`;
//! 3. `M_ij[t] > 0` only if `j = i` or `(j, i)` is an edge;
//! 4. at least `|N_i^- ∩ (V - F)| - f + 1` entries are at least `β`.
//!
//! Write `δ` for the number of faulty in-neighbors of `i` and `δ_C` for the
//! number of faulty nodes among the kept ones. When `f - δ + δ_C = 0` every
//! kept node is fault-free and the row is plain averaging. Otherwise
//! `c = f - δ + δ_C` fault-free nodes are taken from each of `L` and `S`
//! (`L*`, `S*`), each kept value `w_k` is split as
//! `λ_{k,j} v_{l_j} + ψ_{k,j} v_{s_j}`, and the mass `a_i w_k` is spread over
//! these pairs: fault-free `k` keeps `a_i / 2` for itself and contributes
//! `a_i / (2c)` per pair, faulty `k` contributes `a_i / c` per pair.
//!
//! The condition-4 count follows from `|N_i^-| - f - δ + 1`, which equals
//! `|N_i^- ∩ (V - F)| - f + 1`.

use serde::Serialize;

use super::dense::{compensated_sum, Matrix};
use crate::engine::{alpha, RoundTrace};
use crate::error::{Error, Result};
use crate::graph::{DirectedGraph, FaultConfig, NodeId};

/// Row sums must equal 1 within this absolute slack.
pub const ROW_SUM_TOL: f64 = 1e-12;

/// `M[t] v[t-1]` must reproduce `v[t]` within this slack, scaled by
/// `max(1, |v|_∞)`.
pub const REPRODUCTION_TOL: f64 = 1e-9;

/// Relative slack when comparing an entry against `β`. The guaranteed entries
/// can equal `β` exactly, so rounding may land one ulp below it.
pub const BETA_REL_SLACK: f64 = 1e-9;

/// Uniform lower bound on the guaranteed entries of every row: `α` when
/// `f = 0`, otherwise `α / (4f)`.
pub fn beta(g: &DirectedGraph, f: usize) -> Result<f64> {
    let alpha = alpha(g, f)?;
    Ok(if f == 0 {
        alpha
    } else {
        alpha / (4 * f) as f64
    })
}

pub(crate) fn at_least_beta(x: f64, beta: f64) -> bool {
    x >= beta * (1.0 - BETA_REL_SLACK)
}

/// A row of `M[t]`, indexed by fault-free position.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct StochasticRow {
    pub entries: Vec<f64>,
}

impl StochasticRow {
    pub fn sum(&self) -> f64 {
        compensated_sum(self.entries.iter().copied())
    }

    pub fn dot(&self, v: &[f64]) -> f64 {
        compensated_sum(self.entries.iter().zip(v).map(|(a, b)| a * b))
    }
}

/// `w_k = λ v_{l_j} + ψ v_{s_j}` for kept node `k` and pair index `j`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct WeightDecomposition {
    pub kept: NodeId,
    pub kept_faulty: bool,
    pub pair: usize,
    pub large: NodeId,
    pub small: NodeId,
    pub lambda: f64,
    pub psi: f64,
}

/// Solves `w = λ hi + (1 - λ) lo`. Degenerate brackets split evenly; the
/// result is clipped to `[0, 1]` against rounding at the endpoints.
pub fn decompose(w: f64, hi: f64, lo: f64) -> (f64, f64) {
    if hi == lo {
        return (0.5, 0.5);
    }
    let lambda = ((w - lo) / (hi - lo)).clamp(0.0, 1.0);
    (lambda, 1.0 - lambda)
}

/// How a row was built.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RowAudit {
    pub node: NodeId,
    pub a: f64,
    /// Faulty in-neighbors of the node.
    pub faulty_in: usize,
    /// Faulty nodes among the kept ones.
    pub faulty_kept: usize,
    /// `f - δ + δ_C`.
    pub pairs: usize,
    pub large_star: Vec<NodeId>,
    pub small_star: Vec<NodeId>,
    pub decompositions: Vec<WeightDecomposition>,
    pub reproduced: f64,
    pub observed: f64,
}

/// Builds `M_i[t]` for fault-free node `node` from a round trace.
pub fn build_transition_row(
    trace: &RoundTrace,
    node: NodeId,
    faults: &FaultConfig,
) -> Result<(StochasticRow, RowAudit)> {
    let fail = |reason: String| Error::Reconstruction {
        node,
        t: trace.t,
        reason,
    };
    let p = trace
        .position(node)
        .ok_or_else(|| fail("node is not fault-free in this trace".into()))?;
    let inbox = &trace.inboxes[p];
    let trim = &trace.trims[p];
    let v = &trace.states_before;
    let pos = |id: NodeId| trace.position(id);
    let state = |id: NodeId| pos(id).map(|q| v[q]);

    let f = faults.f;
    let a = 1.0 / (trim.kept.len() + 1) as f64;
    let faulty_in = inbox
        .entries
        .keys()
        .filter(|j| faults.is_faulty(**j))
        .count();
    let faulty_kept = trim.kept_ids().filter(|k| faults.is_faulty(*k)).count();
    if faulty_in > f {
        return Err(fail(format!(
            "{faulty_in} faulty in-neighbors exceed f = {f}"
        )));
    }
    let pairs = f - faulty_in + faulty_kept;

    let mut entries = vec![0.0; trace.nodes.len()];
    entries[p] = a;
    let mut large_star = Vec::new();
    let mut small_star = Vec::new();
    let mut decompositions = Vec::new();

    if pairs == 0 {
        for k in trim.kept_ids() {
            let q = pos(k).ok_or_else(|| fail(format!("kept node {k} is faulty")))?;
            entries[q] = a;
        }
    } else {
        let pick = |removed: &[(NodeId, f64)]| -> Vec<NodeId> {
            let mut ids: Vec<NodeId> = removed
                .iter()
                .map(|(id, _)| *id)
                .filter(|id| !faults.is_faulty(*id))
                .collect();
            ids.sort_unstable();
            ids.truncate(pairs);
            ids
        };
        large_star = pick(&trim.removed_large);
        small_star = pick(&trim.removed_small);
        if large_star.len() < pairs || small_star.len() < pairs {
            return Err(fail(format!(
                "need {pairs} fault-free trimmed nodes on each side, found {} large and {} small",
                large_star.len(),
                small_star.len()
            )));
        }
        let pair_mass = a / pairs as f64;
        for &(k, w) in &trim.kept {
            let kept_faulty = faults.is_faulty(k);
            let factor = if kept_faulty {
                pair_mass
            } else {
                let q = pos(k).ok_or_else(|| fail(format!("kept node {k} missing from trace")))?;
                entries[q] += a / 2.0;
                pair_mass / 2.0
            };
            for (j, (&l, &s)) in large_star.iter().zip(&small_star).enumerate() {
                let (hi, lo) = (state(l).unwrap(), state(s).unwrap());
                let scale = hi.abs().max(lo.abs()).max(1.0);
                if w < lo - REPRODUCTION_TOL * scale || w > hi + REPRODUCTION_TOL * scale {
                    return Err(fail(format!(
                        "kept value {w} from {k} is not between {lo} ({s}) and {hi} ({l})"
                    )));
                }
                let (lambda, psi) = decompose(w, hi, lo);
                entries[pos(l).unwrap()] += factor * lambda;
                entries[pos(s).unwrap()] += factor * psi;
                decompositions.push(WeightDecomposition {
                    kept: k,
                    kept_faulty,
                    pair: j + 1,
                    large: l,
                    small: s,
                    lambda,
                    psi,
                });
            }
        }
    }

    let row = StochasticRow { entries };
    let reproduced = row.dot(v);
    let observed = trace.states_after[p];
    let scale = v.iter().fold(1.0_f64, |m, x| m.max(x.abs()));
    if (reproduced - observed).abs() > REPRODUCTION_TOL * scale {
        return Err(fail(format!(
            "row reproduces {reproduced}, the round produced {observed}"
        )));
    }
    let audit = RowAudit {
        node,
        a,
        faulty_in,
        faulty_kept,
        pairs,
        large_star,
        small_star,
        decompositions,
        reproduced,
        observed,
    };
    Ok((row, audit))
}

/// Outcome of checking the four row conditions plus reproduction.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ConditionChecks {
    pub stochastic: bool,
    pub diagonal: bool,
    pub zero_pattern: bool,
    pub nontrivial_count: bool,
    pub reproduces: bool,
    pub max_row_sum_error: f64,
    pub max_reproduction_error: f64,
    /// Smallest `(#entries >= β) - required` over the rows.
    pub min_nontrivial_surplus: i64,
}

impl ConditionChecks {
    pub fn all(&self) -> bool {
        self.stochastic
            && self.diagonal
            && self.zero_pattern
            && self.nontrivial_count
            && self.reproduces
    }

    fn failures(&self) -> Vec<&'static str> {
        [
            (self.stochastic, "stochastic"),
            (self.diagonal, "diagonal"),
            (self.zero_pattern, "zero pattern"),
            (self.nontrivial_count, "non-trivial count"),
            (self.reproduces, "reproduction"),
        ]
        .into_iter()
        .filter(|(ok, _)| !ok)
        .map(|(_, name)| name)
        .collect()
    }
}

/// `M[t]` together with how each row was obtained.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TransitionMatrix {
    pub t: usize,
    pub nodes: Vec<NodeId>,
    pub matrix: Matrix,
    pub beta: f64,
    pub audits: Vec<RowAudit>,
    pub checks: ConditionChecks,
}

impl TransitionMatrix {
    pub fn dim(&self) -> usize {
        self.nodes.len()
    }
}

/// Checks the four conditions of `m` against the graph and the trace.
pub fn verify_conditions(
    m: &Matrix,
    nodes: &[NodeId],
    trace: &RoundTrace,
    g: &DirectedGraph,
    faults: &FaultConfig,
    beta: f64,
) -> Result<ConditionChecks> {
    let mut checks = ConditionChecks {
        stochastic: true,
        diagonal: true,
        zero_pattern: true,
        nontrivial_count: true,
        reproduces: true,
        max_row_sum_error: 0.0,
        max_reproduction_error: 0.0,
        min_nontrivial_surplus: i64::MAX,
    };
    let reproduced = m.mul_vec(&trace.states_before)?;
    let scale = trace
        .states_before
        .iter()
        .fold(1.0_f64, |s, x| s.max(x.abs()));
    for (p, &i) in nodes.iter().enumerate() {
        let row = m.row(p);
        let sum_err = (compensated_sum(row.iter().copied()) - 1.0).abs();
        checks.max_row_sum_error = checks.max_row_sum_error.max(sum_err);
        checks.stochastic &= sum_err <= ROW_SUM_TOL && row.iter().all(|x| *x >= 0.0);

        let a = crate::engine::weight_a(g, faults.f, i)?;
        checks.diagonal &= row[p] == a;

        checks.zero_pattern &= row
            .iter()
            .enumerate()
            .all(|(q, &x)| x == 0.0 || q == p || g.has_edge(nodes[q], i));

        let fault_free_in = g
            .in_neighbors(i)
            .iter()
            .filter(|j| !faults.is_faulty(**j))
            .count();
        let required = fault_free_in as i64 - faults.f as i64 + 1;
        let present = row.iter().filter(|x| at_least_beta(**x, beta)).count() as i64;
        checks.min_nontrivial_surplus = checks.min_nontrivial_surplus.min(present - required);
        checks.nontrivial_count &= present >= required;

        let err = (reproduced[p] - trace.states_after[p]).abs();
        checks.max_reproduction_error = checks.max_reproduction_error.max(err);
        checks.reproduces &= err <= REPRODUCTION_TOL * scale;
    }
    Ok(checks)
}

/// Stacks the rows of every fault-free node and verifies the result.
pub fn build_transition_matrix(
    trace: &RoundTrace,
    g: &DirectedGraph,
    faults: &FaultConfig,
) -> Result<TransitionMatrix> {
    let beta = beta(g, faults.f)?;
    let mut rows = Vec::with_capacity(trace.nodes.len());
    let mut audits = Vec::with_capacity(trace.nodes.len());
    for &i in &trace.nodes {
        let (row, audit) = build_transition_row(trace, i, faults)?;
        rows.push(row.entries);
        audits.push(audit);
    }
    let matrix = Matrix::from_rows(&rows)?;
    let checks = verify_conditions(&matrix, &trace.nodes, trace, g, faults, beta)?;
    if !checks.all() {
        return Err(Error::Verification(format!(
            "transition matrix for t = {} fails: {}",
            trace.t,
            checks.failures().join(", ")
        )));
    }
    Ok(TransitionMatrix {
        t: trace.t,
        nodes: trace.nodes.clone(),
        matrix,
        beta,
        audits,
        checks,
    })
}
