//! Unlabeled trees, their canonical codes, and the weighted forests `F^n`.
//!
//! `F^0` is the single node. `F^{n+1}` is obtained from `F^n` by taking, for
//! every tree `T` and every node `X` of `T`, a copy of `T` with a new leaf
//! attached at `X`. Isomorphic copies are merged and their multiplicities
//! summed, so the multiplicities of `F^n` add up to `n!`.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub const MAX_FOREST_ORDER: usize = 9;
pub const MAX_TREE_NODES: usize = 10;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum TreeError {
    #[error("edge list does not describe a tree on {nodes} nodes: {reason}")]
    NotATree { nodes: usize, reason: &'static str },
    #[error("forest order {0} exceeds the supported bound {MAX_FOREST_ORDER}")]
    OrderTooLarge(usize),
    #[error("node count {0} outside 1..={MAX_TREE_NODES}")]
    NodeCount(usize),
}

/// An unlabeled tree, stored with one concrete labeling and its canonical code.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CanonicalTree {
    pub node_count: usize,
    pub edges: Vec<(usize, usize)>,
    pub code: String,
}

impl CanonicalTree {
    pub fn new(node_count: usize, edges: Vec<(usize, usize)>) -> Result<Self, TreeError> {
        let code = canonical_code(node_count, &edges)?;
        Ok(Self {
            node_count,
            edges,
            code,
        })
    }

    pub fn single_node() -> Self {
        Self::new(1, Vec::new()).expect("one node is a tree")
    }

    pub fn path(nodes: usize) -> Self {
        Self::new(nodes, (1..nodes).map(|i| (i - 1, i)).collect()).expect("path")
    }

    pub fn star(nodes: usize) -> Self {
        Self::new(nodes, (1..nodes).map(|i| (0, i)).collect()).expect("star")
    }

    pub fn adjacency(&self) -> Vec<Vec<usize>> {
        adjacency(self.node_count, &self.edges)
    }

    pub fn degrees(&self) -> Vec<usize> {
        self.adjacency().iter().map(Vec::len).collect()
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    /// The one or two centroid nodes.
    pub fn centroids(&self) -> Vec<usize> {
        centroids(&self.adjacency())
    }

    /// Isomorphic copy whose node ids follow a preorder walk from the canonical root.
    pub fn normalized(&self) -> Self {
        Self {
            node_count: self.node_count,
            edges: relabel_canonically(self.node_count, &self.edges),
            code: self.code.clone(),
        }
    }

    /// Copy of the tree with a new leaf attached at `at`.
    pub fn with_leaf(&self, at: usize) -> Self {
        let mut edges = self.edges.clone();
        edges.push((at, self.node_count));
        Self::new(self.node_count + 1, edges).expect("adding a leaf keeps a tree")
    }
}

fn adjacency(n: usize, edges: &[(usize, usize)]) -> Vec<Vec<usize>> {
    let mut adj = vec![Vec::new(); n];
    for &(u, v) in edges {
        adj[u].push(v);
        adj[v].push(u);
    }
    adj
}

fn check_tree(n: usize, edges: &[(usize, usize)]) -> Result<Vec<Vec<usize>>, TreeError> {
    let bad = |reason| TreeError::NotATree { nodes: n, reason };
    if n == 0 {
        return Err(bad("empty"));
    }
    if edges.iter().any(|&(u, v)| u >= n || v >= n) {
        return Err(bad("node id out of range"));
    }
    if edges.iter().any(|&(u, v)| u == v) {
        return Err(bad("self-loop"));
    }
    if edges.len() != n - 1 {
        return Err(bad(if edges.len() >= n { "cyclic" } else { "disconnected" }));
    }
    let adj = adjacency(n, edges);
    let mut seen = vec![false; n];
    let mut stack = vec![0];
    seen[0] = true;
    while let Some(u) = stack.pop() {
        for &v in &adj[u] {
            if !seen[v] {
                seen[v] = true;
                stack.push(v);
            }
        }
    }
    if seen.iter().all(|&s| s) {
        Ok(adj)
    } else {
        Err(bad("disconnected"))
    }
}

fn subtree_sizes(adj: &[Vec<usize>], root: usize) -> (Vec<usize>, Vec<usize>) {
    let n = adj.len();
    let mut parent = vec![usize::MAX; n];
    let mut order = Vec::with_capacity(n);
    let mut stack = vec![root];
    parent[root] = root;
    while let Some(u) = stack.pop() {
        order.push(u);
        for &v in &adj[u] {
            if parent[v] == usize::MAX {
                parent[v] = u;
                stack.push(v);
            }
        }
    }
    let mut size = vec![1; n];
    for &u in order.iter().rev() {
        if u != root {
            size[parent[u]] += size[u];
        }
    }
    (size, parent)
}

fn centroids(adj: &[Vec<usize>]) -> Vec<usize> {
    let n = adj.len();
    let (size, parent) = subtree_sizes(adj, 0);
    let mut best = Vec::new();
    let mut best_w = usize::MAX;
    for u in 0..n {
        let mut w = n - size[u];
        for &v in &adj[u] {
            if parent[v] == u && v != u {
                w = w.max(size[v]);
            }
        }
        if w < best_w {
            best_w = w;
            best = vec![u];
        } else if w == best_w {
            best.push(u);
        }
    }
    best
}

fn ahu(adj: &[Vec<usize>], u: usize, from: usize) -> String {
    let mut kids: Vec<String> = adj[u]
        .iter()
        .filter(|&&v| v != from)
        .map(|&v| ahu(adj, v, u))
        .collect();
    kids.sort();
    let mut s = String::with_capacity(2 + kids.iter().map(String::len).sum::<usize>());
    s.push('(');
    for k in kids {
        s.push_str(&k);
    }
    s.push(')');
    s
}

/// Centroid-rooted AHU code; equal codes iff the trees are isomorphic.
pub fn canonical_code(node_count: usize, edges: &[(usize, usize)]) -> Result<String, TreeError> {
    let adj = check_tree(node_count, edges)?;
    Ok(centroids(&adj)
        .into_iter()
        .map(|c| ahu(&adj, c, usize::MAX))
        .min()
        .expect("a tree has a centroid"))
}

// Relabel so that node ids follow a preorder walk of the canonical encoding.
fn relabel_canonically(n: usize, edges: &[(usize, usize)]) -> Vec<(usize, usize)> {
    let adj = adjacency(n, edges);
    let root = centroids(&adj)
        .into_iter()
        .min_by_key(|&c| ahu(&adj, c, usize::MAX))
        .unwrap();
    let mut out = Vec::with_capacity(n.saturating_sub(1));
    let mut next = 1;
    fn walk(adj: &[Vec<usize>], u: usize, from: usize, id: usize, next: &mut usize, out: &mut Vec<(usize, usize)>) {
        let mut kids: Vec<(String, usize)> = adj[u]
            .iter()
            .filter(|&&v| v != from)
            .map(|&v| (ahu(adj, v, u), v))
            .collect();
        kids.sort();
        for (_, v) in kids {
            let vid = *next;
            *next += 1;
            out.push((id, vid));
            walk(adj, v, u, vid, next, out);
        }
    }
    walk(&adj, root, usize::MAX, 0, &mut next, &mut out);
    out
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ForestEntry {
    pub tree: CanonicalTree,
    pub multiplicity: u64,
}

/// Trees keyed by canonical code, with integer multiplicities.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct WeightedForest {
    pub order: usize,
    pub entries: BTreeMap<String, ForestEntry>,
}

impl WeightedForest {
    pub fn total_multiplicity(&self) -> u64 {
        self.entries.values().map(|e| e.multiplicity).sum()
    }

    pub fn iter(&self) -> impl Iterator<Item = &ForestEntry> {
        self.entries.values()
    }

    pub fn multiplicity_of(&self, tree: &CanonicalTree) -> u64 {
        self.entries.get(&tree.code).map_or(0, |e| e.multiplicity)
    }

    pub fn to_json(&self) -> ForestJson {
        ForestJson {
            order: self.order,
            trees: self
                .entries
                .values()
                .map(|e| ForestTreeJson {
                    code: e.tree.code.clone(),
                    edges: e.tree.edges.iter().map(|&(u, v)| [u, v]).collect(),
                    multiplicity: e.multiplicity,
                })
                .collect(),
        }
    }

    pub fn from_json(json: &ForestJson) -> Result<Self, TreeError> {
        let mut entries = BTreeMap::new();
        for t in &json.trees {
            let edges: Vec<(usize, usize)> = t.edges.iter().map(|e| (e[0], e[1])).collect();
            let tree = CanonicalTree::new(edges.len() + 1, edges)?;
            entries.insert(
                tree.code.clone(),
                ForestEntry {
                    tree,
                    multiplicity: t.multiplicity,
                },
            );
        }
        Ok(Self {
            order: json.order,
            entries,
        })
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ForestJson {
    pub order: usize,
    pub trees: Vec<ForestTreeJson>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ForestTreeJson {
    pub code: String,
    pub edges: Vec<[usize; 2]>,
    pub multiplicity: u64,
}

/// The trees of `F^4` (`S1..S3`) and `F^5` (`T1..T6`) by their customary names.
pub fn named_tree(name: &str) -> Option<CanonicalTree> {
    let edges: &[(usize, usize)] = match name {
        "S1" => &[(0, 1), (0, 2), (0, 3), (0, 4)],
        "S2" => &[(0, 2), (1, 2), (2, 3), (3, 4)],
        "S3" => &[(0, 1), (1, 2), (2, 3), (3, 4)],
        "T1" => &[(0, 1), (0, 2), (0, 3), (0, 4), (0, 5)],
        "T2" => &[(0, 1), (1, 2), (2, 3), (1, 4), (2, 5)],
        "T3" => &[(0, 1), (1, 2), (2, 3), (3, 4), (4, 5)],
        "T4" => &[(0, 1), (1, 2), (2, 3), (1, 4), (1, 5)],
        "T5" => &[(0, 1), (1, 2), (2, 3), (3, 4), (2, 5)],
        "T6" => &[(0, 2), (1, 2), (2, 3), (3, 4), (4, 5)],
        _ => return None,
    };
    Some(CanonicalTree::new(edges.len() + 1, edges.to_vec()).expect("named trees are trees"))
}

pub const NAMED_TREES: [&str; 9] = ["S1", "S2", "S3", "T1", "T2", "T3", "T4", "T5", "T6"];

/// `F^n`, built by iterating the add-a-leaf step from the single node.
pub fn generate_forest(n: usize) -> Result<WeightedForest, TreeError> {
    if n > MAX_FOREST_ORDER {
        return Err(TreeError::OrderTooLarge(n));
    }
    let seed = CanonicalTree::single_node();
    let mut entries = BTreeMap::new();
    entries.insert(
        seed.code.clone(),
        ForestEntry {
            tree: seed,
            multiplicity: 1,
        },
    );
    for order in 1..=n {
        let mut next: BTreeMap<String, ForestEntry> = BTreeMap::new();
        for entry in entries.values() {
            for x in 0..entry.tree.node_count {
                let grown = entry.tree.with_leaf(x).normalized();
                next.entry(grown.code.clone())
                    .and_modify(|e| e.multiplicity += entry.multiplicity)
                    .or_insert(ForestEntry {
                        tree: grown,
                        multiplicity: entry.multiplicity,
                    });
            }
        }
        entries = next;
        debug_assert!(entries.values().all(|e| e.tree.node_count == order + 1));
    }
    Ok(WeightedForest { order: n, entries })
}

/// All unlabeled free trees on `node_count` nodes, sorted by code.
///
/// Rooted trees are generated as canonical level sequences (each successor is
/// obtained by copying the tail of the sequence from the last node that can
/// still be lowered), then unrooted and deduplicated by code.
pub fn enumerate_trees(node_count: usize) -> Result<Vec<CanonicalTree>, TreeError> {
    if node_count == 0 || node_count > MAX_TREE_NODES {
        return Err(TreeError::NodeCount(node_count));
    }
    let n = node_count;
    let mut level: Vec<usize> = (0..n).collect();
    let mut found: BTreeMap<String, CanonicalTree> = BTreeMap::new();
    loop {
        let mut edges = Vec::with_capacity(n - 1);
        let mut last_at = vec![0usize; n];
        for i in 1..n {
            last_at[level[i]] = i;
            edges.push((last_at[level[i] - 1], i));
        }
        let t = CanonicalTree::new(n, edges)?.normalized();
        found.entry(t.code.clone()).or_insert(t);

        let Some(p) = (1..n).rev().find(|&i| level[i] > 1) else {
            break;
        };
        let q = (0..p).rev().find(|&i| level[i] == level[p] - 1).unwrap();
        for i in p..n {
            level[i] = level[i - (p - q)];
        }
    }
    Ok(found.into_values().collect())
}
