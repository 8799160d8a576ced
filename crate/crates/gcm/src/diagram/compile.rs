//! Compiling trees of `Λ` symbols into closed diagram expressions.
//!
//! A tree node with neighbours carrying vector fields `g_1..g_m` stands for
//! `Λ_m(g_1, ..., g_m) = (-1)^m (1/m) Σ_σ tr(∇g_σ(1) ⋯ ∇g_σ(m))`. A subtree hanging
//! off an edge is turned into the vector field it pairs with: for a node with
//! children `Φ_1..Φ_m` and the parent direction `ξ`,
//!
//! ```text
//! ∫ Λ_{m+1}(Φ_1, ..., Φ_m, ξ) dμ = ∫ M_i^j ∇_j ξ^i dμ = ∫ ξ^i Ψ_i dμ,
//! M_i^j = (-1)^{m+1} Σ_σ (∇Φ_σ(1) ⋯ ∇Φ_σ(m))_i^j,
//! Ψ_i   = -∇_j M_i^j - M_i^j ∇_j U,
//! ```
//!
//! and a leaf gives `Ψ = ∇U`.

use std::collections::HashMap;

use num_bigint::BigInt;
use num_rational::BigRational;

use super::{rational, DiagramError, DiagramExpr};
use crate::forest::CanonicalTree;

pub const MAX_COMPILE_NODES: usize = 8;

const OUT: &str = "i";

/// A tree with a distinguished node whose dangling edge points away from the tree.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct DanglingTree {
    pub tree: CanonicalTree,
    pub distinguished: usize,
}

impl DanglingTree {
    pub fn new(tree: CanonicalTree, distinguished: usize) -> Result<Self, DiagramError> {
        if distinguished >= tree.node_count {
            return Err(DiagramError::Malformed(format!(
                "node {distinguished} not in a tree of {} nodes",
                tree.node_count
            )));
        }
        Ok(Self { tree, distinguished })
    }
}

struct Compiler {
    adj: Vec<Vec<usize>>,
    fields: HashMap<String, DiagramExpr>,
}

impl Compiler {
    fn new(tree: &CanonicalTree) -> Result<Self, DiagramError> {
        if tree.node_count > MAX_COMPILE_NODES {
            return Err(DiagramError::TreeTooLarge(tree.node_count));
        }
        Ok(Self {
            adj: tree.adjacency(),
            fields: HashMap::new(),
        })
    }

    fn rooted_code(&self, u: usize, parent: usize) -> String {
        let mut kids: Vec<String> = self.adj[u]
            .iter()
            .filter(|&&v| v != parent)
            .map(|&v| self.rooted_code(v, u))
            .collect();
        kids.sort();
        format!("({})", kids.concat())
    }

    /// Vector field (free label `i`) of the subtree at `u` seen from `parent`.
    fn field(&mut self, u: usize, parent: usize) -> Result<DiagramExpr, DiagramError> {
        let key = self.rooted_code(u, parent);
        if let Some(e) = self.fields.get(&key) {
            return Ok(e.clone());
        }
        let kids: Vec<usize> = self.adj[u].iter().copied().filter(|&v| v != parent).collect();
        let psi = if kids.is_empty() {
            DiagramExpr::gradient(OUT)
        } else {
            let chains = self.chain_sum(u, &kids)?;
            let m = kids.len();
            let sign = if (m + 1).is_multiple_of(2) { 1 } else { -1 };
            let big_m = chains.scale(&rational(sign, 1));
            let div = big_m.grad("c")?.contract("b", "c")?;
            let drift = big_m.multiply(&DiagramExpr::gradient("c"))?.contract("b", "c")?;
            div.add(&drift).neg().rename("a", OUT)?
        };
        self.fields.insert(key, psi.clone());
        Ok(psi)
    }

    /// `Σ_σ (∇g_σ(1) ⋯ ∇g_σ(m))_a^b` over all orderings of the fields of `kids`.
    ///
    /// Identical subtrees are grouped, and the ordered sum is accumulated over
    /// count vectors; the sum over all `m!` labeled orderings is that result
    /// times `Π c_τ!`.
    fn chain_sum(&mut self, u: usize, kids: &[usize]) -> Result<DiagramExpr, DiagramError> {
        let mut kinds: Vec<(String, usize)> = Vec::new();
        let mut counts: Vec<usize> = Vec::new();
        for &v in kids {
            let code = self.rooted_code(v, u);
            match kinds.iter().position(|(c, _)| *c == code) {
                Some(p) => counts[p] += 1,
                None => {
                    kinds.push((code, v));
                    counts.push(1);
                }
            }
        }
        // ∇Φ with derivative index `c` and vector index `d`
        let mut pieces = Vec::with_capacity(kinds.len());
        for (_, v) in &kinds {
            let phi = self.field(*v, u)?;
            pieces.push(phi.rename(OUT, "d")?.grad("c")?);
        }

        let mut memo: HashMap<Vec<usize>, DiagramExpr> = HashMap::new();
        let total = ordered_chains(&counts, &pieces, &mut memo)?;
        let multiplicity: BigInt = counts.iter().map(|&c| (1..=c).product::<usize>()).map(BigInt::from).product();
        Ok(total.scale(&BigRational::from_integer(multiplicity)))
    }
}

fn ordered_chains(
    counts: &[usize],
    pieces: &[DiagramExpr],
    memo: &mut HashMap<Vec<usize>, DiagramExpr>,
) -> Result<DiagramExpr, DiagramError> {
    if let Some(e) = memo.get(counts) {
        return Ok(e.clone());
    }
    let used: usize = counts.iter().sum();
    let mut acc = DiagramExpr::zero(&["a", "b"]);
    for (t, &c) in counts.iter().enumerate() {
        if c == 0 {
            continue;
        }
        let piece = &pieces[t];
        let extended = if used == 1 {
            piece.rename("c", "a")?.rename("d", "b")?
        } else {
            let mut rest = counts.to_vec();
            rest[t] -= 1;
            let prefix = ordered_chains(&rest, pieces, memo)?;
            prefix.multiply(piece)?.contract("b", "c")?.rename("d", "b")?
        };
        acc = acc.add(&extended);
    }
    memo.insert(counts.to_vec(), acc.clone());
    Ok(acc)
}

/// Vector field of a dangling tree, with free label `i`.
pub fn compile_dangling_tree(dt: &DanglingTree) -> Result<DiagramExpr, DiagramError> {
    compile_dangling_tree_labeled(dt, OUT)
}

pub fn compile_dangling_tree_labeled(dt: &DanglingTree, label: &str) -> Result<DiagramExpr, DiagramError> {
    let mut c = Compiler::new(&dt.tree)?;
    c.field(dt.distinguished, usize::MAX)?.rename(OUT, label)
}

/// `Λ_m` at `root`, with the subtrees around it compiled to vector fields.
pub fn compile_tree_rooted(t: &CanonicalTree, root: usize) -> Result<DiagramExpr, DiagramError> {
    if root >= t.node_count {
        return Err(DiagramError::Malformed(format!("root {root} not in tree")));
    }
    if t.node_count == 1 {
        return Err(DiagramError::Malformed("a single node carries no diagram".into()));
    }
    let mut c = Compiler::new(t)?;
    let kids = c.adj[root].clone();
    let m = kids.len() as i64;
    let chains = c.chain_sum(root, &kids)?;
    let sign = if m % 2 == 0 { 1 } else { -1 };
    Ok(chains.contract("a", "b")?.scale(&rational(sign, m)))
}

/// Pairs the vector fields of the two halves obtained by cutting edge `(u, v)`.
pub fn compile_tree_split(t: &CanonicalTree, u: usize, v: usize) -> Result<DiagramExpr, DiagramError> {
    if !t.edges.iter().any(|&(a, b)| (a, b) == (u, v) || (a, b) == (v, u)) {
        return Err(DiagramError::Malformed(format!("({u}, {v}) is not an edge")));
    }
    let mut c = Compiler::new(t)?;
    let left = c.field(u, v)?.rename(OUT, "p")?;
    let right = c.field(v, u)?.rename(OUT, "q")?;
    left.multiply(&right)?.contract("p", "q")
}

/// Closed form of a tree: `Λ` at the centroid, or the pairing across the
/// central edge when the tree has two centroids.
pub fn compile_tree(t: &CanonicalTree) -> Result<DiagramExpr, DiagramError> {
    let cs = t.centroids();
    match cs.as_slice() {
        [c] => compile_tree_rooted(t, *c),
        [a, b] => compile_tree_split(t, *a, *b),
        _ => unreachable!("a tree has one or two centroids"),
    }
}
