use std::collections::{BTreeSet, BinaryHeap};
use std::cmp::Reverse;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A directed acyclic graph over nodes `0..d`.
///
/// Edges are kept sorted; parent and child lists are sorted ascending.
#[derive(Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "DagJson", into = "DagJson")]
pub struct Dag {
    d: usize,
    edges: BTreeSet<(usize, usize)>,
    parents: Vec<Vec<usize>>,
    children: Vec<Vec<usize>>,
}

#[derive(Serialize, Deserialize)]
struct DagJson {
    d: usize,
    edges: Vec<[usize; 2]>,
}

impl TryFrom<DagJson> for Dag {
    type Error = Error;

    fn try_from(j: DagJson) -> Result<Self> {
        Dag::new(j.d, j.edges.into_iter().map(|[a, b]| (a, b)))
    }
}

impl From<Dag> for DagJson {
    fn from(g: Dag) -> Self {
        DagJson {
            d: g.d,
            edges: g.edges.iter().map(|&(a, b)| [a, b]).collect(),
        }
    }
}

impl Dag {
    pub fn new(d: usize, edges: impl IntoIterator<Item = (usize, usize)>) -> Result<Self> {
        let mut set = BTreeSet::new();
        for (a, b) in edges {
            for node in [a, b] {
                if node >= d {
                    return Err(Error::NodeOutOfRange { node, count: d });
                }
            }
            if a == b {
                return Err(Error::SelfLoop(a));
            }
            set.insert((a, b));
        }
        let mut parents = vec![Vec::new(); d];
        let mut children = vec![Vec::new(); d];
        for &(a, b) in &set {
            children[a].push(b);
            parents[b].push(a);
        }
        for list in parents.iter_mut() {
            list.sort_unstable();
        }
        let g = Dag {
            d,
            edges: set,
            parents,
            children,
        };
        if g.kahn_order().len() != d {
            return Err(Error::Cycle);
        }
        Ok(g)
    }

    pub fn empty(d: usize) -> Self {
        Dag::new(d, []).expect("empty graph is acyclic")
    }

    pub fn node_count(&self) -> usize {
        self.d
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn edges(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.edges.iter().copied()
    }

    pub fn has_edge(&self, from: usize, to: usize) -> bool {
        self.edges.contains(&(from, to))
    }

    pub fn adjacent(&self, a: usize, b: usize) -> bool {
        self.has_edge(a, b) || self.has_edge(b, a)
    }

    pub fn parents(&self, node: usize) -> &[usize] {
        &self.parents[node]
    }

    pub fn children(&self, node: usize) -> &[usize] {
        &self.children[node]
    }

    /// Nodes in topological order, lowest index first among ready nodes.
    pub fn topological_order(&self) -> Vec<usize> {
        self.kahn_order()
    }

    fn kahn_order(&self) -> Vec<usize> {
        let mut indeg: Vec<usize> = self.parents.iter().map(Vec::len).collect();
        let mut ready: BinaryHeap<Reverse<usize>> = indeg
            .iter()
            .enumerate()
            .filter(|(_, &k)| k == 0)
            .map(|(v, _)| Reverse(v))
            .collect();
        let mut order = Vec::with_capacity(self.d);
        while let Some(Reverse(v)) = ready.pop() {
            order.push(v);
            for &c in &self.children[v] {
                indeg[c] -= 1;
                if indeg[c] == 0 {
                    ready.push(Reverse(c));
                }
            }
        }
        order
    }

    /// Unordered adjacent pairs `(a, b)` with `a < b`.
    pub fn skeleton(&self) -> BTreeSet<(usize, usize)> {
        self.edges
            .iter()
            .map(|&(a, b)| (a.min(b), a.max(b)))
            .collect()
    }

    /// Unshielded colliders `a -> c <- b` as `(a, c, b)` with `a < b`.
    pub fn v_structures(&self) -> BTreeSet<(usize, usize, usize)> {
        let mut out = BTreeSet::new();
        for c in 0..self.d {
            let pa = &self.parents[c];
            for (x, &a) in pa.iter().enumerate() {
                for &b in &pa[x + 1..] {
                    if !self.adjacent(a, b) {
                        out.insert((a, c, b));
                    }
                }
            }
        }
        out
    }

    /// Relabels node `v` as `perm[v]`.
    pub fn permuted(&self, perm: &[usize]) -> Result<Dag> {
        if perm.len() != self.d {
            return Err(Error::InvalidParams(format!(
                "permutation of length {} for {} nodes",
                perm.len(),
                self.d
            )));
        }
        Dag::new(self.d, self.edges().map(|(a, b)| (perm[a], perm[b])))
    }

    /// Descendants of `node`, excluding itself.
    pub fn descendants(&self, node: usize) -> BTreeSet<usize> {
        let mut seen = BTreeSet::new();
        let mut stack = vec![node];
        while let Some(v) = stack.pop() {
            for &c in &self.children[v] {
                if seen.insert(c) {
                    stack.push(c);
                }
            }
        }
        seen
    }
}

impl fmt::Debug for Dag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Dag(d={}, ", self.d)?;
        f.debug_list()
            .entries(self.edges.iter().map(|(a, b)| format!("{a}->{b}")))
            .finish()?;
        write!(f, ")")
    }
}

/// All labeled DAGs on `d` nodes, ordered by the bitmask of their edge set over
/// the ordered pairs `(a, b)`, `a != b`, in lexicographic order.
pub fn enumerate_dags(d: usize) -> Result<Vec<Dag>> {
    const MAX_NODES: usize = 5;
    if d > MAX_NODES {
        return Err(Error::TooLarge {
            what: "DAG enumeration node count",
            size: d,
            limit: MAX_NODES,
        });
    }
    let pairs: Vec<(usize, usize)> = (0..d)
        .flat_map(|a| (0..d).filter(move |&b| b != a).map(move |b| (a, b)))
        .collect();
    let mut out = Vec::new();
    for mask in 0u64..(1u64 << pairs.len()) {
        // cheap reject of 2-cycles before the full check
        if pairs
            .iter()
            .enumerate()
            .any(|(k, &(a, b))| a < b && mask >> k & 1 == 1 && mask >> pair_index(d, b, a) & 1 == 1)
        {
            continue;
        }
        let edges = pairs
            .iter()
            .enumerate()
            .filter(|(k, _)| mask >> k & 1 == 1)
            .map(|(_, &p)| p);
        if let Ok(g) = Dag::new(d, edges) {
            out.push(g);
        }
    }
    Ok(out)
}

fn pair_index(d: usize, a: usize, b: usize) -> usize {
    a * (d - 1) + if b > a { b - 1 } else { b }
}

pub fn markov_equivalent_dags(g1: &Dag, g2: &Dag) -> bool {
    g1.node_count() == g2.node_count()
        && g1.skeleton() == g2.skeleton()
        && g1.v_structures() == g2.v_structures()
}
