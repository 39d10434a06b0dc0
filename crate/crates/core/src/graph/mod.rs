//! Directed communication graphs, Byzantine fault sets, and the graph-level
//! conditions under which iterative approximate consensus is achievable.
//!
//! Node ids are `1..=n`. Edges are ordered pairs `(j, i)` meaning `j` can send
//! to `i`; self-loops are rejected (every node implicitly hears itself).

mod condition;
mod reduced;

use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use condition::{
    check_sufficiency_condition, check_sufficiency_exhaustive, check_sufficiency_for,
    FaultSetReport, SufficiencyCheck, SufficiencyWitness,
};
pub use reduced::{
    enumerate_reduced_graphs, has_nonzero_column_in_power, reduced_graph_count, reduced_graphs,
    root_exists, ConnectivityMatrix, ReducedGraph,
};

pub type NodeId = usize;

/// A simple directed graph on nodes `1..=n` without self-loops.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct DirectedGraph {
    n: usize,
    // index 0 unused so that node ids index directly
    in_nbrs: Vec<BTreeSet<NodeId>>,
    out_nbrs: Vec<BTreeSet<NodeId>>,
}

impl DirectedGraph {
    /// Builds a graph from `(from, to)` pairs. Duplicate edges collapse.
    pub fn new(n: usize, edges: impl IntoIterator<Item = (NodeId, NodeId)>) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidGraph(
                "graph must have at least one node".into(),
            ));
        }
        let mut in_nbrs = vec![BTreeSet::new(); n + 1];
        let mut out_nbrs = vec![BTreeSet::new(); n + 1];
        for (j, i) in edges {
            if j == 0 || j > n || i == 0 || i > n {
                return Err(Error::InvalidGraph(format!(
                    "edge [{j}, {i}] references a node outside 1..={n}"
                )));
            }
            if j == i {
                return Err(Error::InvalidGraph(format!("self-loop on node {i}")));
            }
            in_nbrs[i].insert(j);
            out_nbrs[j].insert(i);
        }
        Ok(Self {
            n,
            in_nbrs,
            out_nbrs,
        })
    }

    pub fn complete(n: usize) -> Self {
        let edges = (1..=n).flat_map(|j| (1..=n).filter(move |&i| i != j).map(move |i| (j, i)));
        Self::new(n, edges).expect("complete graph is valid")
    }

    /// The directed cycle `1 -> 2 -> ... -> n -> 1`.
    pub fn cycle(n: usize) -> Self {
        let edges = (1..=n).map(|j| (j, j % n + 1)).filter(|(j, i)| j != i);
        Self::new(n, edges).expect("cycle is valid")
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn nodes(&self) -> impl Iterator<Item = NodeId> {
        1..=self.n
    }

    /// All edges `(from, to)` in ascending order.
    pub fn edges(&self) -> impl Iterator<Item = (NodeId, NodeId)> + '_ {
        self.nodes()
            .flat_map(move |j| self.out_nbrs[j].iter().map(move |&i| (j, i)))
    }

    pub fn edge_count(&self) -> usize {
        self.in_nbrs.iter().map(BTreeSet::len).sum()
    }

    pub fn has_edge(&self, from: NodeId, to: NodeId) -> bool {
        to <= self.n && self.in_nbrs[to].contains(&from)
    }

    /// `N_i^-`: nodes with an edge into `i`.
    pub fn in_neighbors(&self, i: NodeId) -> &BTreeSet<NodeId> {
        &self.in_nbrs[i]
    }

    /// `N_i^+`: nodes that `i` has an edge into.
    pub fn out_neighbors(&self, i: NodeId) -> &BTreeSet<NodeId> {
        &self.out_nbrs[i]
    }

    pub fn in_degree(&self, i: NodeId) -> usize {
        self.in_nbrs[i].len()
    }

    pub fn contains(&self, i: NodeId) -> bool {
        (1..=self.n).contains(&i)
    }

    pub fn to_file(&self) -> GraphFile {
        GraphFile {
            n: self.n,
            edges: self.edges().map(|(j, i)| [j, i]).collect(),
        }
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let file: GraphFile = serde_json::from_str(&text).map_err(|source| Error::Parse {
            path: path.to_owned(),
            source,
        })?;
        file.into_graph()
    }
}

/// On-disk graph description: `{"n": 4, "edges": [[1, 2], ...]}` where
/// `[j, i]` is the edge `j -> i`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GraphFile {
    pub n: usize,
    pub edges: Vec<[NodeId; 2]>,
}

impl GraphFile {
    pub fn into_graph(self) -> Result<DirectedGraph> {
        DirectedGraph::new(self.n, self.edges.into_iter().map(|[j, i]| (j, i)))
    }
}

/// In- and out-neighbor sets for every node.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct NeighborSets {
    pub in_neighbors: BTreeMap<NodeId, BTreeSet<NodeId>>,
    pub out_neighbors: BTreeMap<NodeId, BTreeSet<NodeId>>,
}

pub fn neighbor_sets(g: &DirectedGraph) -> NeighborSets {
    NeighborSets {
        in_neighbors: g.nodes().map(|i| (i, g.in_neighbors(i).clone())).collect(),
        out_neighbors: g.nodes().map(|i| (i, g.out_neighbors(i).clone())).collect(),
    }
}

/// The fault budget `f` together with the actual faulty set `F` (`|F| <= f`).
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct FaultConfig {
    pub f: usize,
    pub faulty: BTreeSet<NodeId>,
}

impl FaultConfig {
    pub fn new(f: usize, faulty: impl IntoIterator<Item = NodeId>) -> Result<Self> {
        let faulty: BTreeSet<NodeId> = faulty.into_iter().collect();
        if faulty.len() > f {
            return Err(Error::InvalidFaults(format!(
                "{} faulty nodes exceed the budget f = {f}",
                faulty.len()
            )));
        }
        Ok(Self { f, faulty })
    }

    pub fn fault_free(f: usize) -> Self {
        Self {
            f,
            faulty: BTreeSet::new(),
        }
    }

    /// Checks that every faulty id is a node of `g`.
    pub fn validate_for(&self, g: &DirectedGraph) -> Result<()> {
        if self.faulty.len() > self.f {
            return Err(Error::InvalidFaults(format!(
                "{} faulty nodes exceed the budget f = {}",
                self.faulty.len(),
                self.f
            )));
        }
        match self.faulty.iter().find(|&&id| !g.contains(id)) {
            Some(id) => Err(Error::InvalidFaults(format!(
                "faulty node {id} outside 1..={}",
                g.n()
            ))),
            None => Ok(()),
        }
    }

    /// `φ = |F|`.
    pub fn phi(&self) -> usize {
        self.faulty.len()
    }

    pub fn is_faulty(&self, id: NodeId) -> bool {
        self.faulty.contains(&id)
    }
}

/// Dense indexing of the fault-free nodes `V - F` in ascending id order.
///
/// Transition matrices and state vectors are indexed by position here, which
/// plays the role of relabelling the fault-free nodes as `1..=n-φ`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct FaultFreeIndex {
    ids: Vec<NodeId>,
    pos: Vec<Option<usize>>,
}

impl FaultFreeIndex {
    pub fn new(n: usize, faults: &FaultConfig) -> Self {
        let ids: Vec<NodeId> = (1..=n).filter(|id| !faults.is_faulty(*id)).collect();
        let mut pos = vec![None; n + 1];
        for (p, &id) in ids.iter().enumerate() {
            pos[id] = Some(p);
        }
        Self { ids, pos }
    }

    pub fn ids(&self) -> &[NodeId] {
        &self.ids
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    pub fn position(&self, id: NodeId) -> Option<usize> {
        self.pos.get(id).copied().flatten()
    }

    pub fn id_at(&self, p: usize) -> NodeId {
        self.ids[p]
    }
}

/// Result of the `|N_i^-| > 2f` degree test.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct DegreeCheck {
    pub holds: bool,
    pub violating: Vec<NodeId>,
}

/// Every node needs more than `2f` incoming neighbors when `f > 0`.
pub fn check_degree_condition(g: &DirectedGraph, f: usize) -> DegreeCheck {
    if f == 0 {
        return DegreeCheck {
            holds: true,
            violating: Vec::new(),
        };
    }
    let violating: Vec<NodeId> = g.nodes().filter(|&i| g.in_degree(i) <= 2 * f).collect();
    DegreeCheck {
        holds: violating.is_empty(),
        violating,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn set(ids: &[NodeId]) -> BTreeSet<NodeId> {
        ids.iter().copied().collect()
    }

    #[test]
    fn complete_graph_neighbors() {
        let ns = neighbor_sets(&DirectedGraph::complete(4));
        assert_eq!(ns.in_neighbors[&1], set(&[2, 3, 4]));
        assert_eq!(ns.out_neighbors[&1], set(&[2, 3, 4]));
    }

    #[test]
    fn single_edge_neighbors() {
        let g = DirectedGraph::new(2, [(1, 2)]).unwrap();
        let ns = neighbor_sets(&g);
        assert_eq!(ns.in_neighbors[&2], set(&[1]));
        assert!(ns.out_neighbors[&2].is_empty());
    }

    #[test]
    fn cycle_neighbors() {
        let ns = neighbor_sets(&DirectedGraph::cycle(3));
        assert_eq!(ns.in_neighbors[&3], set(&[2]));
        assert_eq!(ns.out_neighbors[&3], set(&[1]));
    }

    #[test]
    fn rejects_self_loops_and_bad_ids() {
        assert!(matches!(
            DirectedGraph::new(3, [(2, 2)]),
            Err(Error::InvalidGraph(_))
        ));
        assert!(DirectedGraph::new(3, [(0, 1)]).is_err());
        assert!(DirectedGraph::new(3, [(1, 4)]).is_err());
        assert!(DirectedGraph::new(0, []).is_err());
    }

    #[test]
    fn degree_condition_examples() {
        assert!(check_degree_condition(&DirectedGraph::complete(4), 1).holds);
        let k3 = check_degree_condition(&DirectedGraph::complete(3), 1);
        assert!(!k3.holds);
        assert_eq!(k3.violating, vec![1, 2, 3]);
        let sparse = DirectedGraph::new(3, [(1, 2)]).unwrap();
        assert!(check_degree_condition(&sparse, 0).holds);
    }

    #[test]
    fn fault_config_bounds() {
        assert!(FaultConfig::new(1, [1, 2]).is_err());
        let fc = FaultConfig::new(1, [5]).unwrap();
        assert!(fc.validate_for(&DirectedGraph::complete(4)).is_err());
        let idx = FaultFreeIndex::new(4, &FaultConfig::new(1, [2]).unwrap());
        assert_eq!(idx.ids(), &[1, 3, 4]);
        assert_eq!(idx.position(3), Some(1));
        assert_eq!(idx.position(2), None);
    }

    #[test]
    fn graph_file_roundtrip() {
        let g = DirectedGraph::cycle(5);
        let text = serde_json::to_string(&g.to_file()).unwrap();
        let back: GraphFile = serde_json::from_str(&text).unwrap();
        assert_eq!(back.into_graph().unwrap(), g);
    }
}
