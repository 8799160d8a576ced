//! Tensor diagrams over the symbols `∇^k U`, with `U = log μ`.
//!
//! A [`Multigraph`] stands for one contracted product: a node of degree `k`
//! is the symmetric tensor `∇^k U` (degree 0 is `U` itself), an internal edge
//! contracts one index of each endpoint, and a dangling edge is a free index
//! carrying a label. A [`DiagramExpr`] is a rational linear combination of
//! canonical multigraphs sharing one set of free labels.
//!
//! The operations mirror the calculus used on such integrands:
//! [`DiagramExpr::grad`] is the Leibniz rule, [`DiagramExpr::contract`] joins
//! two free indices, [`DiagramExpr::multiply`] is the pointwise product, and
//! [`ipp`] rewrites a scalar integrand `∫ G dμ` by integration by parts.

mod canon;
mod compile;
mod ipp;
mod relations;

use std::collections::BTreeMap;
use std::fmt;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, Zero};
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use compile::{
    compile_dangling_tree, compile_dangling_tree_labeled, compile_tree, compile_tree_rooted, compile_tree_split,
    DanglingTree, MAX_COMPILE_NODES,
};
pub use ipp::ipp;
pub use relations::{equivalent_mod_ipp, ipp_relation, IppReduction, IppSpan};

pub type Label = String;

pub const MAX_CANON_NODES: usize = 12;
pub const MAX_CANON_EDGES: usize = 16;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum DiagramError {
    #[error("multigraph too large: {nodes} nodes, {edges} edges")]
    TooLarge { nodes: usize, edges: usize },
    #[error("label {0:?} already present")]
    DuplicateLabel(Label),
    #[error("label {0:?} not present")]
    MissingLabel(Label),
    #[error("label sets overlap in a product")]
    LabelCollision,
    #[error("edge {edge} is not incident to node {node}")]
    NotIncident { node: usize, edge: usize },
    #[error("integration by parts needs a scalar integrand")]
    NotScalar,
    #[error("tree has {0} nodes, above the compile bound {MAX_COMPILE_NODES}")]
    TreeTooLarge(usize),
    #[error(transparent)]
    Tree(#[from] crate::forest::TreeError),
    #[error("malformed diagram: {0}")]
    Malformed(String),
}

/// A multigraph with labeled dangling edges; loops are edges `(v, v)`.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Multigraph {
    node_count: usize,
    edges: Vec<(usize, usize)>,
    dangling: Vec<(usize, Label)>,
}

impl Multigraph {
    /// Builds a multigraph; edges are normalized to `u <= v` and sorted.
    pub fn new(node_count: usize, edges: Vec<(usize, usize)>, dangling: Vec<(usize, Label)>) -> Result<Self, DiagramError> {
        if edges.iter().any(|&(u, v)| u >= node_count || v >= node_count)
            || dangling.iter().any(|(u, _)| *u >= node_count)
        {
            return Err(DiagramError::Malformed("node id out of range".into()));
        }
        let mut labels: Vec<&Label> = dangling.iter().map(|(_, l)| l).collect();
        labels.sort();
        if let Some(w) = labels.windows(2).find(|w| w[0] == w[1]) {
            return Err(DiagramError::DuplicateLabel(w[0].clone()));
        }
        let mut edges: Vec<(usize, usize)> = edges.into_iter().map(|(u, v)| (u.min(v), u.max(v))).collect();
        edges.sort_unstable();
        let mut dangling = dangling;
        dangling.sort_by(|a, b| a.1.cmp(&b.1));
        Ok(Self {
            node_count,
            edges,
            dangling,
        })
    }

    /// One node carrying a single free index: `∇_label U`.
    pub fn gradient_node(label: &str) -> Self {
        Self {
            node_count: 1,
            edges: Vec::new(),
            dangling: vec![(0, label.to_string())],
        }
    }

    pub fn node_count(&self) -> usize {
        self.node_count
    }

    /// Internal edges (loops included as `(v, v)`), sorted.
    pub fn edges(&self) -> &[(usize, usize)] {
        &self.edges
    }

    /// Dangling attachments `(node, label)`, sorted by label.
    pub fn dangling(&self) -> &[(usize, Label)] {
        &self.dangling
    }

    pub fn labels(&self) -> Vec<Label> {
        self.dangling.iter().map(|(_, l)| l.clone()).collect()
    }

    /// Edge ends plus dangling attachments at `v`; a loop counts twice.
    pub fn degree(&self, v: usize) -> usize {
        let ends: usize = self
            .edges
            .iter()
            .map(|&(a, b)| usize::from(a == v) + usize::from(b == v))
            .sum();
        ends + self.dangling.iter().filter(|(u, _)| *u == v).count()
    }

    pub fn degrees(&self) -> Vec<usize> {
        let mut d = vec![0; self.node_count];
        for &(a, b) in &self.edges {
            d[a] += 1;
            d[b] += 1;
        }
        for (u, _) in &self.dangling {
            d[*u] += 1;
        }
        d
    }

    pub fn max_degree(&self) -> usize {
        self.degrees().into_iter().max().unwrap_or(0)
    }

    pub fn loops_at(&self, v: usize) -> usize {
        self.edges.iter().filter(|&&(a, b)| a == v && b == v).count()
    }

    pub fn is_connected(&self) -> bool {
        if self.node_count == 0 {
            return true;
        }
        let mut seen = vec![false; self.node_count];
        let mut stack = vec![0];
        seen[0] = true;
        while let Some(u) = stack.pop() {
            for &(a, b) in &self.edges {
                for (x, y) in [(a, b), (b, a)] {
                    if x == u && !seen[y] {
                        seen[y] = true;
                        stack.push(y);
                    }
                }
            }
        }
        seen.into_iter().all(|s| s)
    }

    /// Canonical representative of the isomorphism class, dangling labels acting as colours.
    pub fn canonicalize(&self) -> Result<Self, DiagramError> {
        if self.node_count > MAX_CANON_NODES || self.edges.len() + self.dangling.len() > MAX_CANON_EDGES {
            return Err(DiagramError::TooLarge {
                nodes: self.node_count,
                edges: self.edges.len(),
            });
        }
        Ok(canon::canonical_form(self))
    }

    fn canonical(&self) -> Self {
        self.canonicalize().expect("diagram within canonicalization bounds")
    }

    /// Applies `perm` (old id -> new id) to every node reference.
    pub fn relabel_nodes(&self, perm: &[usize]) -> Self {
        Self::new(
            self.node_count,
            self.edges.iter().map(|&(u, v)| (perm[u], perm[v])).collect(),
            self.dangling.iter().map(|(u, l)| (perm[*u], l.clone())).collect(),
        )
        .expect("permutation keeps ids in range")
    }

    fn with_dangling(&self, v: usize, label: &str) -> Self {
        let mut g = self.clone();
        g.dangling.push((v, label.to_string()));
        g.dangling.sort_by(|a, b| a.1.cmp(&b.1));
        g
    }

    fn disjoint_union(&self, other: &Self) -> Self {
        let off = self.node_count;
        let mut edges = self.edges.clone();
        edges.extend(other.edges.iter().map(|&(u, v)| (u + off, v + off)));
        edges.sort_unstable();
        let mut dangling = self.dangling.clone();
        dangling.extend(other.dangling.iter().map(|(u, l)| (u + off, l.clone())));
        dangling.sort_by(|a, b| a.1.cmp(&b.1));
        Self {
            node_count: self.node_count + other.node_count,
            edges,
            dangling,
        }
    }

    fn join_labels(&self, a: &str, b: &str) -> Self {
        let ua = self.dangling.iter().find(|(_, l)| l == a).map(|(u, _)| *u).unwrap();
        let ub = self.dangling.iter().find(|(_, l)| l == b).map(|(u, _)| *u).unwrap();
        let mut g = self.clone();
        g.dangling.retain(|(_, l)| l != a && l != b);
        g.edges.push((ua.min(ub), ua.max(ub)));
        g.edges.sort_unstable();
        g
    }

    fn rename_label(&self, from: &str, to: &str) -> Self {
        let mut g = self.clone();
        for (_, l) in g.dangling.iter_mut() {
            if l == from {
                *l = to.to_string();
            }
        }
        g.dangling.sort_by(|a, b| a.1.cmp(&b.1));
        g
    }

    pub(crate) fn remove_edge(&self, idx: usize) -> Self {
        let mut g = self.clone();
        g.edges.remove(idx);
        g
    }

    pub(crate) fn add_edge(&self, u: usize, v: usize) -> Self {
        let mut g = self.clone();
        g.edges.push((u.min(v), u.max(v)));
        g.edges.sort_unstable();
        g
    }

    pub(crate) fn add_node(&self) -> (Self, usize) {
        let mut g = self.clone();
        g.node_count += 1;
        (g, self.node_count)
    }
}

impl fmt::Display for Multigraph {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[{}|", self.node_count)?;
        let parts: Vec<String> = self.edges.iter().map(|(u, v)| format!("{u}-{v}")).collect();
        write!(f, "{}", parts.join(","))?;
        if !self.dangling.is_empty() {
            let d: Vec<String> = self.dangling.iter().map(|(u, l)| format!("{u}:{l}")).collect();
            write!(f, "|{}", d.join(","))?;
        }
        write!(f, "]")
    }
}

/// Rational linear combination of canonical multigraphs over a common label set.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct DiagramExpr {
    dangling: Vec<Label>,
    terms: BTreeMap<Multigraph, BigRational>,
}

pub fn rational(n: i64, d: i64) -> BigRational {
    BigRational::new(BigInt::from(n), BigInt::from(d))
}

impl DiagramExpr {
    /// The empty sum over the given free labels.
    pub fn zero(labels: &[&str]) -> Self {
        let mut dangling: Vec<Label> = labels.iter().map(|s| s.to_string()).collect();
        dangling.sort();
        Self {
            dangling,
            terms: BTreeMap::new(),
        }
    }

    pub fn from_graph(g: &Multigraph, coeff: BigRational) -> Result<Self, DiagramError> {
        let canon = g.canonicalize()?;
        let mut e = Self {
            dangling: canon.labels(),
            terms: BTreeMap::new(),
        };
        e.dangling.sort();
        e.add_term(canon, coeff);
        Ok(e)
    }

    /// `∇_label U` as a one-term expression.
    pub fn gradient(label: &str) -> Self {
        Self::from_graph(&Multigraph::gradient_node(label), BigRational::one()).unwrap()
    }

    pub fn labels(&self) -> &[Label] {
        &self.dangling
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn terms(&self) -> impl Iterator<Item = (&Multigraph, &BigRational)> {
        self.terms.iter()
    }

    pub fn coefficient(&self, g: &Multigraph) -> BigRational {
        let canon = g.canonical();
        self.terms.get(&canon).cloned().unwrap_or_else(BigRational::zero)
    }

    pub fn max_degree(&self) -> usize {
        self.terms.keys().map(Multigraph::max_degree).max().unwrap_or(0)
    }

    /// Adds `coeff · g` where `g` is already canonical.
    fn add_term(&mut self, g: Multigraph, coeff: BigRational) {
        use std::collections::btree_map::Entry;
        if coeff.is_zero() {
            return;
        }
        match self.terms.entry(g) {
            Entry::Vacant(v) => {
                v.insert(coeff);
            }
            Entry::Occupied(mut o) => {
                *o.get_mut() += coeff;
                if o.get().is_zero() {
                    o.remove();
                }
            }
        }
    }

    pub(crate) fn collect(labels: Vec<Label>, items: impl IntoIterator<Item = (Multigraph, BigRational)>) -> Self {
        let mut acc: BTreeMap<Multigraph, BigRational> = BTreeMap::new();
        for (g, c) in items {
            let slot = acc.entry(g.canonical()).or_insert_with(BigRational::zero);
            *slot += c;
        }
        acc.retain(|_, c| !c.is_zero());
        Self { dangling: labels, terms: acc }
    }

    pub fn add(&self, other: &Self) -> Self {
        assert_eq!(self.dangling, other.dangling, "sum of diagrams with different free labels");
        let mut out = self.clone();
        for (g, c) in &other.terms {
            out.add_term(g.clone(), c.clone());
        }
        out
    }

    pub fn sub(&self, other: &Self) -> Self {
        self.add(&other.neg())
    }

    pub fn scale(&self, c: &BigRational) -> Self {
        if c.is_zero() {
            return Self::zero(&self.label_refs());
        }
        Self {
            dangling: self.dangling.clone(),
            terms: self.terms.iter().map(|(g, k)| (g.clone(), k * c)).collect(),
        }
    }

    pub fn neg(&self) -> Self {
        self.scale(&-BigRational::one())
    }

    fn label_refs(&self) -> Vec<&str> {
        self.dangling.iter().map(String::as_str).collect()
    }

    /// Leibniz rule: attach a new free index to each node of each term in turn.
    pub fn grad(&self, new_label: &str) -> Result<Self, DiagramError> {
        if self.dangling.iter().any(|l| l == new_label) {
            return Err(DiagramError::DuplicateLabel(new_label.to_string()));
        }
        let mut labels = self.dangling.clone();
        labels.push(new_label.to_string());
        labels.sort();
        let items = self
            .terms
            .iter()
            .flat_map(|(g, c)| (0..g.node_count).map(move |v| (g.with_dangling(v, new_label), c.clone())));
        Ok(Self::collect(labels, items))
    }

    /// Joins free indices `a` and `b` into an internal edge.
    pub fn contract(&self, a: &str, b: &str) -> Result<Self, DiagramError> {
        for l in [a, b] {
            if !self.dangling.iter().any(|x| x == l) {
                return Err(DiagramError::MissingLabel(l.to_string()));
            }
        }
        if a == b {
            return Err(DiagramError::DuplicateLabel(a.to_string()));
        }
        let labels: Vec<Label> = self.dangling.iter().filter(|l| *l != a && *l != b).cloned().collect();
        let items = self.terms.iter().map(|(g, c)| (g.join_labels(a, b), c.clone()));
        Ok(Self::collect(labels, items))
    }

    /// Pointwise product: disjoint union of diagrams, coefficients multiplied.
    pub fn multiply(&self, other: &Self) -> Result<Self, DiagramError> {
        if self.dangling.iter().any(|l| other.dangling.contains(l)) {
            return Err(DiagramError::LabelCollision);
        }
        let mut labels = self.dangling.clone();
        labels.extend(other.dangling.iter().cloned());
        labels.sort();
        let mut items = Vec::with_capacity(self.terms.len() * other.terms.len());
        for (g, c) in &self.terms {
            for (h, d) in &other.terms {
                items.push((g.disjoint_union(h), c * d));
            }
        }
        Ok(Self::collect(labels, items))
    }

    /// Renames a free index.
    pub fn rename(&self, from: &str, to: &str) -> Result<Self, DiagramError> {
        if !self.dangling.iter().any(|x| x == from) {
            return Err(DiagramError::MissingLabel(from.to_string()));
        }
        if from == to {
            return Ok(self.clone());
        }
        if self.dangling.iter().any(|x| x == to) {
            return Err(DiagramError::DuplicateLabel(to.to_string()));
        }
        let mut labels: Vec<Label> = self
            .dangling
            .iter()
            .map(|l| if l == from { to.to_string() } else { l.clone() })
            .collect();
        labels.sort();
        let items = self.terms.iter().map(|(g, c)| (g.rename_label(from, to), c.clone()));
        Ok(Self::collect(labels, items))
    }

    pub fn to_json(&self) -> DiagramJson {
        DiagramJson {
            dangling: self.dangling.clone(),
            terms: self
                .terms
                .iter()
                .map(|(g, c)| TermJson {
                    nodes: g.node_count,
                    edges: g.edges.iter().filter(|(u, v)| u != v).map(|&(u, v)| [u, v]).collect(),
                    loops: g.edges.iter().filter(|(u, v)| u == v).map(|&(u, _)| u).collect(),
                    dangling_at: g.dangling.clone(),
                    coeff: format_rational(c),
                })
                .collect(),
        }
    }

    pub fn from_json(json: &DiagramJson) -> Result<Self, DiagramError> {
        let mut labels = json.dangling.clone();
        labels.sort();
        let mut items = Vec::new();
        for t in &json.terms {
            let mut edges: Vec<(usize, usize)> = t.edges.iter().map(|e| (e[0], e[1])).collect();
            edges.extend(t.loops.iter().map(|&v| (v, v)));
            let g = Multigraph::new(t.nodes, edges, t.dangling_at.clone())?;
            let mut gl = g.labels();
            gl.sort();
            if gl != labels {
                return Err(DiagramError::Malformed("term labels differ from the declared set".into()));
            }
            g.canonicalize()?;
            items.push((g, parse_rational(&t.coeff)?));
        }
        Ok(Self::collect(labels, items))
    }
}

pub fn format_rational(c: &BigRational) -> String {
    if c.denom().is_one() {
        format!("{}/1", c.numer())
    } else {
        format!("{}/{}", c.numer(), c.denom())
    }
}

pub fn parse_rational(s: &str) -> Result<BigRational, DiagramError> {
    let bad = || DiagramError::Malformed(format!("bad coefficient {s:?}"));
    let (n, d) = match s.split_once('/') {
        Some((n, d)) => (n.trim(), d.trim()),
        None => (s.trim(), "1"),
    };
    let n: BigInt = n.parse().map_err(|_| bad())?;
    let d: BigInt = d.parse().map_err(|_| bad())?;
    if d.is_zero() {
        return Err(bad());
    }
    Ok(BigRational::new(n, d))
}

impl fmt::Display for DiagramExpr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.terms.is_empty() {
            return write!(f, "0");
        }
        for (i, (g, c)) in self.terms.iter().enumerate() {
            let sign = if c.is_negative() { "-" } else if i > 0 { "+" } else { "" };
            if i > 0 {
                write!(f, " ")?;
            }
            write!(f, "{sign}")?;
            if i > 0 || c.is_negative() {
                write!(f, " ")?;
            }
            let a = c.abs();
            if !a.is_one() {
                write!(f, "{a}*")?;
            }
            write!(f, "{g}")?;
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct DiagramJson {
    pub dangling: Vec<Label>,
    pub terms: Vec<TermJson>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TermJson {
    pub nodes: usize,
    pub edges: Vec<[usize; 2]>,
    pub loops: Vec<usize>,
    pub dangling_at: Vec<(usize, Label)>,
    pub coeff: String,
}

#[cfg(test)]
mod tests {
    use super::*;

    fn g(n: usize, edges: &[(usize, usize)], dangling: &[(usize, &str)]) -> Multigraph {
        Multigraph::new(
            n,
            edges.to_vec(),
            dangling.iter().map(|(u, l)| (*u, l.to_string())).collect(),
        )
        .unwrap()
    }

    #[test]
    fn cycle_relabelings_agree() {
        let a = g(4, &[(0, 1), (1, 2), (2, 3), (3, 0)], &[]);
        let b = g(4, &[(0, 2), (2, 1), (1, 3), (3, 0)], &[]);
        assert_eq!(a.canonicalize().unwrap(), b.canonicalize().unwrap());
    }

    #[test]
    fn distinct_shapes_stay_distinct() {
        let loop_tri = g(3, &[(0, 1), (1, 2), (2, 0), (2, 2)], &[]);
        let pend_tri = g(4, &[(0, 1), (1, 2), (2, 0), (2, 3)], &[]);
        assert_ne!(loop_tri.canonicalize().unwrap(), pend_tri.canonicalize().unwrap());
        let double = g(2, &[(0, 1), (0, 1)], &[]);
        let single = g(2, &[(0, 1)], &[]);
        assert_ne!(double.canonicalize().unwrap(), single.canonicalize().unwrap());
    }

    #[test]
    fn grad_of_gradient_node() {
        let e = DiagramExpr::gradient("i").grad("j").unwrap();
        let want = DiagramExpr::from_graph(&g(1, &[], &[(0, "i"), (0, "j")]), BigRational::one()).unwrap();
        assert_eq!(e, want);
    }

    #[test]
    fn grad_of_fisher_integrand_merges() {
        let fisher = DiagramExpr::from_graph(&g(2, &[(0, 1)], &[]), BigRational::one()).unwrap();
        let e = fisher.grad("j").unwrap();
        let want = DiagramExpr::from_graph(&g(2, &[(0, 1)], &[(0, "j")]), rational(2, 1)).unwrap();
        assert_eq!(e, want);
    }

    #[test]
    fn contractions() {
        let hess = DiagramExpr::from_graph(&g(1, &[], &[(0, "i"), (0, "j")]), BigRational::one()).unwrap();
        let lap = hess.contract("i", "j").unwrap();
        assert_eq!(lap, DiagramExpr::from_graph(&g(1, &[(0, 0)], &[]), BigRational::one()).unwrap());

        let pair = DiagramExpr::gradient("i").multiply(&DiagramExpr::gradient("j")).unwrap();
        assert_eq!(pair.labels(), ["i", "j"]);
        let fisher = pair.contract("i", "j").unwrap();
        assert_eq!(fisher, DiagramExpr::from_graph(&g(2, &[(0, 1)], &[]), BigRational::one()).unwrap());
        assert!(pair.contract("i", "k").is_err());
    }

    #[test]
    fn multiply_rules() {
        let a = DiagramExpr::gradient("i").scale(&rational(2, 3));
        let b = DiagramExpr::gradient("j").scale(&rational(-3, 5));
        let p = a.multiply(&b).unwrap();
        assert_eq!(p.terms().next().unwrap().1, &rational(-2, 5));
        assert!(a.multiply(&DiagramExpr::zero(&["k"])).unwrap().is_zero());
        assert_eq!(a.multiply(&a), Err(DiagramError::LabelCollision));
    }

    #[test]
    fn json_round_trip() {
        let e = DiagramExpr::from_graph(&g(3, &[(0, 1), (1, 2), (1, 1)], &[(2, "i")]), rational(-7, 2)).unwrap();
        let json = e.to_json();
        assert_eq!(json.terms[0].coeff, "-7/2");
        let back = DiagramExpr::from_json(&json).unwrap();
        assert_eq!(back, e);
    }
}
