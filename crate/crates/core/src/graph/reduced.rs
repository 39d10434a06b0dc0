use std::collections::{BTreeMap, BTreeSet, VecDeque};

use itertools::Itertools;
use serde::Serialize;

use super::{DirectedGraph, FaultConfig, NodeId};
use crate::error::Result;

/// A member of `R_F`: the fault-free subgraph of `G` after every fault-free
/// node drops `min(f, available)` of its remaining incoming edges.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub struct ReducedGraph {
    nodes: Vec<NodeId>,
    kept_in: BTreeMap<NodeId, BTreeSet<NodeId>>,
}

impl ReducedGraph {
    /// Assembles a reduced graph from explicit kept in-edge sets. Nodes not
    /// present in `kept_in` keep nothing.
    pub fn from_kept(
        nodes: impl IntoIterator<Item = NodeId>,
        kept_in: BTreeMap<NodeId, BTreeSet<NodeId>>,
    ) -> Self {
        let nodes: Vec<NodeId> = nodes.into_iter().sorted().dedup().collect();
        let kept_in = nodes
            .iter()
            .map(|&i| (i, kept_in.get(&i).cloned().unwrap_or_default()))
            .collect();
        Self { nodes, kept_in }
    }

    /// Fault-free node ids in ascending order.
    pub fn nodes(&self) -> &[NodeId] {
        &self.nodes
    }

    pub fn kept_in(&self, i: NodeId) -> &BTreeSet<NodeId> {
        &self.kept_in[&i]
    }

    pub fn kept_in_edges(&self) -> &BTreeMap<NodeId, BTreeSet<NodeId>> {
        &self.kept_in
    }

    /// Kept edges `(from, to)`.
    pub fn edges(&self) -> impl Iterator<Item = (NodeId, NodeId)> + '_ {
        self.kept_in
            .iter()
            .flat_map(|(&i, froms)| froms.iter().map(move |&j| (j, i)))
    }

    /// Nodes reachable from `start` along kept edges, `start` included.
    pub fn reachable_from(&self, start: NodeId) -> BTreeSet<NodeId> {
        let mut out: BTreeMap<NodeId, Vec<NodeId>> = BTreeMap::new();
        for (j, i) in self.edges() {
            out.entry(j).or_default().push(i);
        }
        let mut seen = BTreeSet::from([start]);
        let mut queue = VecDeque::from([start]);
        while let Some(u) = queue.pop_front() {
            for &v in out.get(&u).into_iter().flatten() {
                if seen.insert(v) {
                    queue.push_back(v);
                }
            }
        }
        seen
    }
}

/// Removal options for one fault-free node: every kept set obtained by
/// dropping `min(f, available)` of its fault-free in-neighbors.
fn kept_options(g: &DirectedGraph, faults: &FaultConfig, i: NodeId) -> Vec<BTreeSet<NodeId>> {
    let available: Vec<NodeId> = g
        .in_neighbors(i)
        .iter()
        .copied()
        .filter(|j| !faults.is_faulty(*j))
        .collect();
    let drop = faults.f.min(available.len());
    available
        .iter()
        .copied()
        .combinations(drop)
        .map(|removed| {
            available
                .iter()
                .copied()
                .filter(|j| !removed.contains(j))
                .collect()
        })
        .collect()
}

/// Lazily walks `R_F` in canonical order (nodes ascending, removal sets in
/// lexicographic order).
pub fn reduced_graphs<'a>(
    g: &'a DirectedGraph,
    faults: &'a FaultConfig,
) -> Result<impl Iterator<Item = ReducedGraph> + 'a> {
    faults.validate_for(g)?;
    let nodes: Vec<NodeId> = g.nodes().filter(|i| !faults.is_faulty(*i)).collect();
    let options: Vec<Vec<BTreeSet<NodeId>>> =
        nodes.iter().map(|&i| kept_options(g, faults, i)).collect();
    let combos: Box<dyn Iterator<Item = Vec<BTreeSet<NodeId>>>> = if nodes.is_empty() {
        Box::new(std::iter::once(Vec::new()))
    } else {
        Box::new(
            options
                .into_iter()
                .map(|o| o.into_iter())
                .multi_cartesian_product(),
        )
    };
    Ok(combos.map(move |choice| ReducedGraph {
        nodes: nodes.clone(),
        kept_in: nodes.iter().copied().zip(choice).collect(),
    }))
}

/// All distinct members of `R_F`; the length is `τ`.
pub fn enumerate_reduced_graphs(
    g: &DirectedGraph,
    faults: &FaultConfig,
) -> Result<Vec<ReducedGraph>> {
    let distinct: BTreeSet<ReducedGraph> = reduced_graphs(g, faults)?.collect();
    Ok(distinct.into_iter().collect())
}

/// `τ = |R_F|` without enumerating: the product over fault-free nodes of
/// `C(available, min(f, available))`. Saturates at `u128::MAX`.
pub fn reduced_graph_count(g: &DirectedGraph, faults: &FaultConfig) -> Result<u128> {
    faults.validate_for(g)?;
    let mut total: u128 = 1;
    for i in g.nodes().filter(|i| !faults.is_faulty(*i)) {
        let available = g
            .in_neighbors(i)
            .iter()
            .filter(|j| !faults.is_faulty(**j))
            .count();
        total = total.saturating_mul(binomial(available, faults.f.min(available)));
    }
    Ok(total)
}

fn binomial(n: usize, k: usize) -> u128 {
    let k = k.min(n - k);
    (0..k).fold(1u128, |acc, step| {
        acc.saturating_mul((n - step) as u128) / (step as u128 + 1)
    })
}

/// Some node with directed paths to every node of `h`, smallest id first.
pub fn root_exists(h: &ReducedGraph) -> Option<NodeId> {
    h.nodes
        .iter()
        .copied()
        .find(|&k| h.reachable_from(k).len() == h.nodes.len())
}

/// The 0/1 connectivity matrix of a reduced graph: entry `(r, c)` is set when
/// node `c` has a kept edge into node `r`, and on the diagonal.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct ConnectivityMatrix {
    nodes: Vec<NodeId>,
    entries: Vec<Vec<bool>>,
}

impl ConnectivityMatrix {
    pub fn of(h: &ReducedGraph) -> Self {
        let pos: BTreeMap<NodeId, usize> =
            h.nodes.iter().enumerate().map(|(p, &id)| (id, p)).collect();
        let dim = h.nodes.len();
        let mut entries = vec![vec![false; dim]; dim];
        for (r, row) in entries.iter_mut().enumerate() {
            row[r] = true;
            for j in h.kept_in(h.nodes[r]) {
                row[pos[j]] = true;
            }
        }
        Self {
            nodes: h.nodes.clone(),
            entries,
        }
    }

    pub fn identity(nodes: Vec<NodeId>) -> Self {
        let dim = nodes.len();
        let entries = (0..dim)
            .map(|r| (0..dim).map(|c| r == c).collect())
            .collect();
        Self { nodes, entries }
    }

    pub fn dim(&self) -> usize {
        self.nodes.len()
    }

    pub fn nodes(&self) -> &[NodeId] {
        &self.nodes
    }

    pub fn get(&self, r: usize, c: usize) -> u8 {
        u8::from(self.entries[r][c])
    }

    pub fn rows(&self) -> Vec<Vec<u8>> {
        self.entries
            .iter()
            .map(|row| row.iter().map(|&b| u8::from(b)).collect())
            .collect()
    }

    /// Boolean (OR of ANDs) product `self · other`.
    pub fn product(&self, other: &Self) -> Self {
        let dim = self.dim();
        assert_eq!(
            dim,
            other.dim(),
            "connectivity matrices must share a dimension"
        );
        let entries = (0..dim)
            .map(|r| {
                (0..dim)
                    .map(|c| (0..dim).any(|k| self.entries[r][k] && other.entries[k][c]))
                    .collect()
            })
            .collect();
        Self {
            nodes: self.nodes.clone(),
            entries,
        }
    }

    /// Index of the first column whose entries are all set.
    pub fn nonzero_column(&self) -> Option<usize> {
        (0..self.dim()).find(|&c| self.entries.iter().all(|row| row[c]))
    }
}

impl From<&ReducedGraph> for ConnectivityMatrix {
    fn from(h: &ReducedGraph) -> Self {
        Self::of(h)
    }
}

/// Boolean `m^p`; returns the node id labelling an all-positive column.
pub fn has_nonzero_column_in_power(m: &ConnectivityMatrix, p: usize) -> Option<NodeId> {
    assert!(p >= 1, "power must be positive");
    let mut acc = m.clone();
    for _ in 1..p {
        acc = acc.product(m);
    }
    acc.nonzero_column().map(|c| m.nodes[c])
}
