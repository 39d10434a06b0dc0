//! The sufficiency condition: for every faulty set `F` with `|F| <= f`, every
//! reduced graph in `R_F` has a root (a node reaching all others).
//!
//! Two routes are provided. [`check_sufficiency_exhaustive`] walks `R_F`
//! directly, which is exponential in the number of edges.
//! [`check_sufficiency_condition`] uses an equivalent formulation over node
//! subsets: a reduced graph without a root exists iff there are two disjoint,
//! non-empty sets `A`, `B` of fault-free nodes such that every node of `A`
//! (resp. `B`) has at most `f` fault-free in-neighbors outside `A` (resp. `B`).
//! Dropping exactly those outside edges isolates `A` and `B` from the rest, so
//! no single node can reach both; conversely two source components of a
//! rootless reduced graph form such a pair.

use std::collections::{BTreeMap, BTreeSet};

use itertools::Itertools;
use serde::Serialize;

use super::reduced::{reduced_graph_count, reduced_graphs, root_exists, ReducedGraph};
use super::{DirectedGraph, FaultConfig, NodeId};
use crate::error::{Error, Result};

/// Outcome for one candidate faulty set.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct FaultSetReport {
    pub faulty: Vec<NodeId>,
    /// `|R_F|`, saturating.
    pub tau: u128,
    pub holds: bool,
}

/// A faulty set together with a member of its `R_F` that has no root.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct SufficiencyWitness {
    pub faulty: BTreeSet<NodeId>,
    pub reduced: ReducedGraph,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct SufficiencyCheck {
    pub holds: bool,
    pub per_fault_set: Vec<FaultSetReport>,
    /// The first failing faulty set in canonical order, if any.
    pub witness: Option<SufficiencyWitness>,
}

/// Checks every faulty set of size `0..=f` using the disjoint-closed-pair
/// search. Requires at most 63 nodes.
pub fn check_sufficiency_condition(g: &DirectedGraph, f: usize) -> Result<SufficiencyCheck> {
    if g.n() > 63 {
        return Err(Error::InvalidGraph(format!(
            "sufficiency check supports at most 63 nodes, got {}",
            g.n()
        )));
    }
    check_all_fault_sets(g, f, check_sufficiency_for)
}

/// Reference route: enumerates every reduced graph of every faulty set. A
/// faulty set covering every node leaves nothing to agree on and passes.
pub fn check_sufficiency_exhaustive(g: &DirectedGraph, f: usize) -> Result<SufficiencyCheck> {
    check_all_fault_sets(g, f, |g, fc| {
        Ok(reduced_graphs(g, fc)?.find(|h| !h.nodes().is_empty() && root_exists(h).is_none()))
    })
}

fn check_all_fault_sets(
    g: &DirectedGraph,
    f: usize,
    per_set: impl Fn(&DirectedGraph, &FaultConfig) -> Result<Option<ReducedGraph>>,
) -> Result<SufficiencyCheck> {
    let mut per_fault_set = Vec::new();
    let mut witness = None;
    for size in 0..=f.min(g.n()) {
        for faulty in g.nodes().combinations(size) {
            let fc = FaultConfig::new(f, faulty.iter().copied())?;
            let tau = reduced_graph_count(g, &fc)?;
            let rootless = per_set(g, &fc)?;
            per_fault_set.push(FaultSetReport {
                faulty,
                tau,
                holds: rootless.is_none(),
            });
            if let (None, Some(reduced)) = (&witness, rootless) {
                witness = Some(SufficiencyWitness {
                    faulty: fc.faulty.clone(),
                    reduced,
                });
            }
        }
    }
    Ok(SufficiencyCheck {
        holds: witness.is_none(),
        per_fault_set,
        witness,
    })
}

/// Checks a single, fixed faulty set. Returns a rootless member of `R_F`
/// when one exists.
pub fn check_sufficiency_for(
    g: &DirectedGraph,
    faults: &FaultConfig,
) -> Result<Option<ReducedGraph>> {
    faults.validate_for(g)?;
    let ids: Vec<NodeId> = g.nodes().filter(|i| !faults.is_faulty(*i)).collect();
    if ids.len() > 63 {
        return Err(Error::InvalidGraph(format!(
            "sufficiency check supports at most 63 fault-free nodes, got {}",
            ids.len()
        )));
    }
    let pos: BTreeMap<NodeId, usize> = ids.iter().enumerate().map(|(p, &id)| (id, p)).collect();
    let in_mask: Vec<u64> = ids
        .iter()
        .map(|&i| {
            g.in_neighbors(i)
                .iter()
                .filter_map(|j| pos.get(j))
                .fold(0u64, |m, &p| m | (1 << p))
        })
        .collect();

    let m = ids.len();
    let full: u64 = if m == 64 { u64::MAX } else { (1u64 << m) - 1 };
    let closed = |set: u64| {
        (0..m)
            .filter(|p| set & (1 << p) != 0)
            .all(|p| (in_mask[p] & !set).count_ones() as usize <= faults.f)
    };
    let closed_sets: Vec<u64> = (1..=full).filter(|&s| closed(s)).collect();
    let pair = closed_sets.iter().enumerate().find_map(|(x, &a)| {
        closed_sets[x + 1..]
            .iter()
            .find(|&&b| a & b == 0)
            .map(|&b| (a, b))
    });
    let Some((a, b)) = pair else {
        return Ok(None);
    };

    // Build the isolating reduced graph: nodes in A or B drop their outside
    // in-edges first, everyone tops up with the lowest ids.
    let mut kept = BTreeMap::new();
    for (p, &i) in ids.iter().enumerate() {
        let available: Vec<NodeId> = g
            .in_neighbors(i)
            .iter()
            .copied()
            .filter(|j| pos.contains_key(j))
            .collect();
        let quota = faults.f.min(available.len());
        let home = [a, b].into_iter().find(|s| s & (1 << p) != 0).unwrap_or(0);
        let (outside, inside): (Vec<NodeId>, Vec<NodeId>) = available
            .iter()
            .copied()
            .partition(|j| home != 0 && home & (1 << pos[j]) == 0);
        let removed: BTreeSet<NodeId> = outside
            .iter()
            .chain(inside.iter())
            .take(quota)
            .copied()
            .collect();
        debug_assert!(outside.iter().all(|j| removed.contains(j)));
        let kept_here: BTreeSet<NodeId> = available
            .into_iter()
            .filter(|j| !removed.contains(j))
            .collect();
        kept.insert(i, kept_here);
    }
    let witness = ReducedGraph::from_kept(ids.iter().copied(), kept);
    debug_assert!(root_exists(&witness).is_none());
    Ok(Some(witness))
}
