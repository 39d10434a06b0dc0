//! Numerical convergence certificates built on reconstructed matrices.
//!
//! Every `M[t]` dominates `β H[t]` for some reduced graph `H[t]`. Any run of
//! `τ(n - φ)` consecutive connectivity matrices from `R_F` has a column that
//! is positive everywhere (some member repeats `n - φ` times and has a root;
//! diagonals are positive). Hence each block product
//! `Q(k) = M[kL]···M[(k-1)L + 1]`, `L = τ(n - φ)`, has a column bounded
//! below by `β^L`, is scrambling, and `λ(Q(k)) <= 1 - β^L`.

use std::collections::{BTreeMap, BTreeSet};

use serde::Serialize;

use super::dense::Matrix;
use super::ergodicity::{ergodicity, lambda, STOCHASTIC_TOL};
use super::transition::{at_least_beta, beta, build_transition_matrix, TransitionMatrix};
use crate::engine::{check_validity, RoundTrace};
use crate::error::{Error, Result};
use crate::graph::{
    reduced_graph_count, ConnectivityMatrix, DirectedGraph, FaultConfig, NodeId, ReducedGraph,
};

/// Slack on the λ and spread-ratio inequalities.
pub const CERTIFICATE_SLACK: f64 = 1e-10;

/// Finds `H[t] ∈ R_F` with `β H[t] <= M[t]`: each row keeps
/// `|N_i^- ∩ (V - F)| - f` fault-free in-neighbors whose entries are at
/// least `β`, lowest ids first.
pub fn dominance_check(
    m: &TransitionMatrix,
    g: &DirectedGraph,
    faults: &FaultConfig,
) -> Result<ReducedGraph> {
    let beta = beta(g, faults.f)?;
    let mut kept = BTreeMap::new();
    for (p, &i) in m.nodes.iter().enumerate() {
        let row = m.matrix.row(p);
        if !at_least_beta(row[p], beta) {
            return Err(Error::Verification(format!(
                "t = {}: diagonal of node {i} is {} < β = {beta}",
                m.t, row[p]
            )));
        }
        let available: Vec<NodeId> = g
            .in_neighbors(i)
            .iter()
            .copied()
            .filter(|j| !faults.is_faulty(*j))
            .collect();
        let need = available.len() - faults.f.min(available.len());
        let chosen: BTreeSet<NodeId> = available
            .iter()
            .copied()
            .filter(|j| {
                m.nodes
                    .iter()
                    .position(|n| n == j)
                    .is_some_and(|q| at_least_beta(row[q], beta))
            })
            .take(need)
            .collect();
        if chosen.len() < need {
            return Err(Error::Verification(format!(
                "t = {}: node {i} has {} in-neighbor entries >= β, needs {need}",
                m.t,
                chosen.len()
            )));
        }
        kept.insert(i, chosen);
    }
    Ok(ReducedGraph::from_kept(m.nodes.iter().copied(), kept))
}

/// `L = τ (n - φ)` for the given faulty set, saturating.
pub fn block_length(g: &DirectedGraph, faults: &FaultConfig) -> Result<u128> {
    let tau = reduced_graph_count(g, faults)?;
    Ok(tau.saturating_mul((g.n() - faults.phi()) as u128))
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct BlockReport {
    /// 1-based block number.
    pub index: usize,
    pub first_round: usize,
    pub last_round: usize,
    pub stochastic: bool,
    pub lambda: f64,
    pub overlap: f64,
    pub scrambling: bool,
    /// Node labelling the all-positive column of the product of the `H[t]`.
    pub column: Option<NodeId>,
    /// Smallest entry of `Q` in that column.
    pub column_min: f64,
    pub passes: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct BlockCertificate {
    pub beta: f64,
    pub tau: u128,
    pub fault_free: usize,
    pub block_len: u128,
    /// `β^L`.
    pub gamma: f64,
    /// `1 - β^L`.
    pub lambda_bound: f64,
    pub blocks: Vec<BlockReport>,
    pub passes: bool,
}

/// Computes `Q(k)` for each complete block and checks it. Trailing rounds
/// that do not fill a block are ignored.
pub fn evaluate_blocks(
    matrices: &[TransitionMatrix],
    witnesses: &[ReducedGraph],
    g: &DirectedGraph,
    faults: &FaultConfig,
) -> Result<BlockCertificate> {
    if matrices.len() != witnesses.len() {
        return Err(Error::Dimension(format!(
            "{} matrices but {} dominance witnesses",
            matrices.len(),
            witnesses.len()
        )));
    }
    let beta = beta(g, faults.f)?;
    let tau = reduced_graph_count(g, faults)?;
    let fault_free = g.n() - faults.phi();
    let block_len = block_length(g, faults)?;
    let gamma = (block_len as f64 * beta.ln()).exp();
    let lambda_bound = 1.0 - gamma;

    let mut blocks = Vec::new();
    let len = usize::try_from(block_len).unwrap_or(usize::MAX).max(1);
    for (b, chunk) in matrices.chunks_exact(len).enumerate() {
        let hs = &witnesses[b * len..(b + 1) * len];
        let nodes = chunk[0].nodes.clone();
        let mut q = Matrix::identity(nodes.len());
        let mut h = ConnectivityMatrix::identity(nodes.clone());
        // later rounds multiply from the left, as in v[t] = M[t] v[t-1]
        for (m, w) in chunk.iter().zip(hs) {
            q = m.matrix.mul(&q)?;
            h = ConnectivityMatrix::of(w).product(&h);
        }
        let stochastic = q.check_row_stochastic(STOCHASTIC_TOL).is_ok();
        let erg = ergodicity(&q)?;
        let col = h.nonzero_column();
        let column_min = col.map_or(0.0, |c| q.column(c).fold(f64::INFINITY, f64::min));
        let passes = stochastic
            && erg.scrambling
            && col.is_some()
            && column_min >= gamma * (1.0 - 1e-9)
            && erg.lambda <= lambda_bound + CERTIFICATE_SLACK;
        blocks.push(BlockReport {
            index: b + 1,
            first_round: chunk[0].t,
            last_round: chunk[chunk.len() - 1].t,
            stochastic,
            lambda: erg.lambda,
            overlap: erg.overlap,
            scrambling: erg.scrambling,
            column: col.map(|c| nodes[c]),
            column_min,
            passes,
        });
    }
    Ok(BlockCertificate {
        beta,
        tau,
        fault_free,
        block_len,
        gamma,
        lambda_bound,
        passes: blocks.iter().all(|b| b.passes),
        blocks,
    })
}

/// Block certificate over `matrices`, whose length must be a multiple of
/// `τ(n - φ)`. Any failing block is an error.
pub fn block_product_certificate(
    matrices: &[TransitionMatrix],
    g: &DirectedGraph,
    faults: &FaultConfig,
) -> Result<BlockCertificate> {
    let len = block_length(g, faults)?;
    if !(matrices.len() as u128).is_multiple_of(len) {
        return Err(Error::Dimension(format!(
            "{} matrices do not split into blocks of {len}",
            matrices.len()
        )));
    }
    let witnesses = matrices
        .iter()
        .map(|m| dominance_check(m, g, faults))
        .collect::<Result<Vec<_>>>()?;
    let cert = evaluate_blocks(matrices, &witnesses, g, faults)?;
    if let Some(bad) = cert.blocks.iter().find(|b| !b.passes) {
        return Err(Error::Verification(format!(
            "block {} (rounds {}..={}) fails: λ = {}, bound {}, column {:?}",
            bad.index, bad.first_round, bad.last_round, bad.lambda, cert.lambda_bound, bad.column
        )));
    }
    Ok(cert)
}

/// `spread(t) / spread(0)` against a product bound.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SpreadCheck {
    pub t: usize,
    pub ratio: f64,
    pub bound: f64,
    pub holds: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ConvergenceCertificate {
    pub rounds: usize,
    pub validity: bool,
    /// Every round's matrix satisfied the four conditions and has a
    /// dominance witness.
    pub matrices_verified: bool,
    pub round_failures: Vec<String>,
    pub blocks: Option<BlockCertificate>,
    pub blocks_pass: bool,
    pub initial_spread: f64,
    pub final_spread: f64,
    /// Spread ratio at each block boundary and at the end against the
    /// product of the completed blocks' `λ(Q)`.
    pub block_spread_checks: Vec<SpreadCheck>,
    /// Spread ratio after every round against `Π λ(M[s])`.
    pub round_spread_checks_hold: bool,
    pub round_lambda_product: f64,
    pub converged: bool,
    pub epsilon: f64,
    /// Midpoint of the final states, the approximate common value.
    pub common_value: Option<f64>,
    pub passes: bool,
}

/// Combines validity, per-round matrix verification, block certificates and
/// the spread bounds into one report. `traces` must be consecutive rounds
/// starting at `t = 1`.
pub fn convergence_certificate(
    traces: &[RoundTrace],
    g: &DirectedGraph,
    faults: &FaultConfig,
    epsilon: f64,
) -> Result<ConvergenceCertificate> {
    let Some(first) = traces.first() else {
        return Ok(ConvergenceCertificate {
            rounds: 0,
            validity: true,
            matrices_verified: true,
            round_failures: Vec::new(),
            blocks: None,
            blocks_pass: true,
            initial_spread: 0.0,
            final_spread: 0.0,
            block_spread_checks: Vec::new(),
            round_spread_checks_hold: true,
            round_lambda_product: 1.0,
            converged: true,
            epsilon,
            common_value: None,
            passes: true,
        });
    };
    let validity = check_validity(traces);

    let mut round_failures = Vec::new();
    let mut matrices = Vec::with_capacity(traces.len());
    let mut witnesses = Vec::with_capacity(traces.len());
    for tr in traces {
        match build_transition_matrix(tr, g, faults)
            .and_then(|m| dominance_check(&m, g, faults).map(|w| (m, w)))
        {
            Ok((m, w)) => {
                matrices.push(m);
                witnesses.push(w);
            }
            Err(e) => round_failures.push(e.to_string()),
        }
    }
    let matrices_verified = round_failures.is_empty();

    let initial_spread = first.u_before - first.mu_before;
    let last = &traces[traces.len() - 1];
    let final_spread = last.spread_after();
    let ratio_at = |t: usize| {
        let s = traces[t - 1].spread_after();
        if initial_spread > 0.0 {
            s / initial_spread
        } else {
            0.0
        }
    };

    let mut round_lambda_product = 1.0;
    let mut round_spread_checks_hold = true;
    for m in &matrices {
        round_lambda_product *= lambda(&m.matrix)?;
        let ratio = ratio_at(m.t);
        round_spread_checks_hold &= ratio <= round_lambda_product + CERTIFICATE_SLACK;
    }

    let (blocks, block_spread_checks) = if matrices_verified {
        let cert = evaluate_blocks(&matrices, &witnesses, g, faults)?;
        let mut checks = Vec::new();
        let mut bound = 1.0;
        for b in &cert.blocks {
            bound *= b.lambda;
            let ratio = ratio_at(b.last_round);
            checks.push(SpreadCheck {
                t: b.last_round,
                ratio,
                bound,
                holds: ratio <= bound + CERTIFICATE_SLACK,
            });
        }
        let ratio = ratio_at(last.t);
        checks.push(SpreadCheck {
            t: last.t,
            ratio,
            bound,
            holds: ratio <= bound + CERTIFICATE_SLACK,
        });
        (Some(cert), checks)
    } else {
        (None, Vec::new())
    };
    let blocks_pass = blocks.as_ref().is_some_and(|b| b.passes);
    let converged = final_spread < epsilon;
    let passes = validity
        && matrices_verified
        && blocks_pass
        && block_spread_checks.iter().all(|c| c.holds)
        && round_spread_checks_hold
        && converged;
    Ok(ConvergenceCertificate {
        rounds: traces.len(),
        validity,
        matrices_verified,
        round_failures,
        blocks,
        blocks_pass,
        initial_spread,
        final_spread,
        block_spread_checks,
        round_spread_checks_hold,
        round_lambda_product,
        converged,
        epsilon,
        common_value: Some((last.u_after + last.mu_after) / 2.0),
        passes,
    })
}
