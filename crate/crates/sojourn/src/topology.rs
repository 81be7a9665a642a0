//! Interaction networks.
//!
//! Players sit on an undirected graph: either a periodic square lattice
//! (von Neumann neighborhoods) or a Watts-Strogatz small-world graph. The
//! adjacency is frozen into a compact CSR layout at construction time, with
//! neighbor lists sorted ascending so that every downstream iteration order
//! is deterministic.

use crate::error::{Error, Result};
use rand::Rng;
use std::collections::BTreeSet;
use std::fmt;
use std::io::{self, Write};

/// Dense player index, 0-based.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct NodeId(pub u32);

impl NodeId {
    #[inline]
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

impl fmt::Display for NodeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.0.fmt(f)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum NetworkKind {
    Lattice { side: u32 },
    SmallWorld { k: u32, p: f64 },
    Custom,
}

/// Immutable undirected graph in CSR form. Safe to share across threads.
#[derive(Debug, Clone)]
pub struct NetworkTopology {
    kind: NetworkKind,
    offsets: Vec<u32>,
    targets: Vec<NodeId>,
}

/// One public goods group: the focal node first, then its neighbors in
/// ascending order. Every node is focal of exactly one group.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GameGroup {
    pub focal: NodeId,
    pub members: Vec<NodeId>,
}

impl NetworkTopology {
    /// Periodic square lattice of `side * side` nodes with von Neumann
    /// neighborhoods. `side = 2` collapses the wrap-around duplicates, so
    /// each node there has degree 2.
    pub fn lattice(side: u32) -> Result<Self> {
        if side < 2 {
            return Err(Error::invalid(
                "side",
                format!("lattice side must be at least 2, got {side}"),
            ));
        }
        let n = side as usize * side as usize;
        let mut adjacency = vec![BTreeSet::new(); n];
        for row in 0..side {
            for col in 0..side {
                let id = row * side + col;
                let up = ((row + side - 1) % side) * side + col;
                let down = ((row + 1) % side) * side + col;
                let left = row * side + (col + side - 1) % side;
                let right = row * side + (col + 1) % side;
                for nb in [up, down, left, right] {
                    if nb != id {
                        adjacency[id as usize].insert(nb);
                    }
                }
            }
        }
        Ok(Self::from_adjacency(
            NetworkKind::Lattice { side },
            adjacency,
        ))
    }

    /// Watts-Strogatz graph: a ring where each node starts adjacent to its
    /// `k/2` nearest neighbors on each side, then every clockwise ring edge
    /// is rewired with probability `p` to a uniformly random non-neighbor.
    /// A rewire keeps its near endpoint, so every node retains degree at
    /// least `k/2`; the edge count is exactly `n * k / 2` throughout.
    pub fn small_world<R: Rng>(n: u32, k: u32, p: f64, rng: &mut R) -> Result<Self> {
        if k < 2 || !k.is_multiple_of(2) {
            return Err(Error::invalid(
                "k",
                format!("ring degree must be even and at least 2, got {k}"),
            ));
        }
        if n <= k {
            return Err(Error::invalid(
                "n",
                format!("need more nodes than ring degree, got n={n}, k={k}"),
            ));
        }
        if !(0.0..=1.0).contains(&p) {
            return Err(Error::invalid(
                "p",
                format!("rewiring probability must lie in [0, 1], got {p}"),
            ));
        }
        let mut adjacency = vec![BTreeSet::new(); n as usize];
        for i in 0..n {
            for j in 1..=k / 2 {
                let other = (i + j) % n;
                adjacency[i as usize].insert(other);
                adjacency[other as usize].insert(i);
            }
        }
        // Each undirected ring edge is visited once, as the clockwise edge
        // of its lower-offset endpoint; processing order is fixed so one
        // seed always wires the same graph.
        for i in 0..n {
            for j in 1..=k / 2 {
                let old = (i + j) % n;
                if rng.random::<f64>() >= p {
                    continue;
                }
                let candidates = n as usize - 1 - adjacency[i as usize].len();
                if candidates == 0 {
                    continue;
                }
                let target = loop {
                    let t = rng.random_range(0..n);
                    if t != i && !adjacency[i as usize].contains(&t) {
                        break t;
                    }
                };
                adjacency[i as usize].remove(&old);
                adjacency[old as usize].remove(&i);
                adjacency[i as usize].insert(target);
                adjacency[target as usize].insert(i);
            }
        }
        Ok(Self::from_adjacency(
            NetworkKind::SmallWorld { k, p },
            adjacency,
        ))
    }

    /// Build from an explicit undirected edge list (used by tests and custom
    /// scenarios). Duplicate edges collapse; self-loops are rejected.
    pub fn from_edges(node_count: u32, edges: &[(u32, u32)]) -> Result<Self> {
        if node_count == 0 {
            return Err(Error::invalid(
                "node_count",
                "graph must have at least one node",
            ));
        }
        let mut adjacency = vec![BTreeSet::new(); node_count as usize];
        for &(u, v) in edges {
            if u == v {
                return Err(Error::invalid("edges", format!("self-loop at node {u}")));
            }
            if u >= node_count || v >= node_count {
                return Err(Error::invalid(
                    "edges",
                    format!("edge ({u}, {v}) references a node outside 0..{node_count}"),
                ));
            }
            adjacency[u as usize].insert(v);
            adjacency[v as usize].insert(u);
        }
        Ok(Self::from_adjacency(NetworkKind::Custom, adjacency))
    }

    fn from_adjacency(kind: NetworkKind, adjacency: Vec<BTreeSet<u32>>) -> Self {
        let mut offsets = Vec::with_capacity(adjacency.len() + 1);
        let mut targets = Vec::new();
        offsets.push(0u32);
        for set in &adjacency {
            targets.extend(set.iter().map(|&t| NodeId(t)));
            offsets.push(targets.len() as u32);
        }
        let topology = Self {
            kind,
            offsets,
            targets,
        };
        topology.check_invariants();
        topology
    }

    /// Exhaustive structural check: sorted neighbor lists, no self-loops,
    /// no duplicates, and symmetric adjacency. Construction bugs panic here
    /// rather than corrupting a simulation.
    fn check_invariants(&self) {
        for i in 0..self.node_count() {
            let node = NodeId(i as u32);
            let nbrs = self.neighbors(node);
            for (pos, &nb) in nbrs.iter().enumerate() {
                assert_ne!(nb, node, "self-loop at node {node}");
                if pos > 0 {
                    assert!(
                        nbrs[pos - 1] < nb,
                        "unsorted or duplicate neighbor at {node}"
                    );
                }
                assert!(
                    self.neighbors(nb).binary_search(&node).is_ok(),
                    "asymmetric edge ({node}, {nb})"
                );
            }
        }
    }

    pub fn kind(&self) -> &NetworkKind {
        &self.kind
    }

    pub fn node_count(&self) -> usize {
        self.offsets.len() - 1
    }

    /// Number of undirected edges.
    pub fn edge_count(&self) -> usize {
        self.targets.len() / 2
    }

    pub fn degree(&self, node: NodeId) -> usize {
        self.neighbors(node).len()
    }

    /// Neighbors of `node` in ascending order.
    pub fn neighbors(&self, node: NodeId) -> &[NodeId] {
        let lo = self.offsets[node.index()] as usize;
        let hi = self.offsets[node.index() + 1] as usize;
        &self.targets[lo..hi]
    }

    /// The group hosted by `focal`: itself plus all neighbors.
    pub fn group(&self, focal: NodeId) -> GameGroup {
        let nbrs = self.neighbors(focal);
        let mut members = Vec::with_capacity(nbrs.len() + 1);
        members.push(focal);
        members.extend_from_slice(nbrs);
        GameGroup { focal, members }
    }

    /// All groups, ordered by focal node.
    pub fn groups(&self) -> Vec<GameGroup> {
        (0..self.node_count())
            .map(|i| self.group(NodeId(i as u32)))
            .collect()
    }

    /// Average group size, `sum(degree + 1) / n`. Exactly 5 on the lattice.
    pub fn mean_group_size(&self) -> f64 {
        (self.targets.len() + self.node_count()) as f64 / self.node_count() as f64
    }

    pub fn lattice_side(&self) -> Option<u32> {
        match self.kind {
            NetworkKind::Lattice { side } => Some(side),
            _ => None,
        }
    }

    /// Write one `u,v` line per undirected edge with `u < v`, ascending.
    pub fn write_edge_list<W: Write>(&self, mut out: W) -> io::Result<()> {
        for i in 0..self.node_count() {
            let node = NodeId(i as u32);
            for &nb in self.neighbors(node) {
                if node < nb {
                    writeln!(out, "{node},{nb}")?;
                }
            }
        }
        Ok(())
    }
}
