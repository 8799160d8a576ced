//! Equality of scalar integrands modulo integration by parts.
//!
//! Every application of [`ipp`](super::ipp) yields a relation `G - ipp(G, g, i)`
//! whose integral vanishes for every density. Two expressions have the same
//! integral identically when their difference lies in the span of such
//! relations. The relation set is grown from the terms of the difference by
//! closing under further rewrites, and membership is decided by exact
//! rational elimination.

use std::collections::{BTreeMap, HashMap, VecDeque};

use num_rational::BigRational;
use num_traits::{One, Zero};

use super::{ipp, DiagramError, DiagramExpr, Multigraph};

/// The vanishing combination `G - ipp(G, g, i)`.
pub fn ipp_relation(mg: &Multigraph, g: usize, i: usize) -> Result<DiagramExpr, DiagramError> {
    let lhs = DiagramExpr::from_graph(mg, BigRational::one())?;
    Ok(lhs.sub(&ipp(mg, g, i)?))
}

type Row = BTreeMap<usize, BigRational>;

/// Outcome of an equivalence query.
#[derive(Clone, Debug)]
pub struct IppReduction {
    pub equivalent: bool,
    pub graphs: usize,
    pub relations: usize,
    pub rank: usize,
}

#[derive(Default)]
struct Echelon {
    // each pivot row has no entries left of its lead column
    pivots: HashMap<usize, Row>,
}

impl Echelon {
    fn reduce(&self, mut row: Row) -> Row {
        let mut cursor = 0usize;
        loop {
            let next = row.range(cursor..).map(|(&c, _)| c).find(|c| self.pivots.contains_key(c));
            let Some(col) = next else {
                return row;
            };
            let factor = row[&col].clone();
            for (c, v) in &self.pivots[&col] {
                let slot = row.entry(*c).or_insert_with(BigRational::zero);
                *slot -= &factor * v;
                if slot.is_zero() {
                    row.remove(c);
                }
            }
            cursor = col + 1;
        }
    }

    fn insert(&mut self, row: Row) -> bool {
        let row = self.reduce(row);
        let Some((&lead, lead_val)) = row.iter().next() else {
            return false;
        };
        let inv = BigRational::one() / lead_val;
        self.pivots.insert(lead, row.into_iter().map(|(c, v)| (c, v * &inv)).collect());
        true
    }
}

/// The span of integration-by-parts relations reachable from a set of integrands.
///
/// Rewrites that would exceed `max_nodes` nodes or leave a node of degree zero
/// are not generated; `max_graphs` caps the closure.
pub struct IppSpan {
    max_nodes: usize,
    max_graphs: usize,
    ids: HashMap<Multigraph, usize>,
    queue: VecDeque<Multigraph>,
    echelon: Echelon,
    relations: usize,
}

impl IppSpan {
    pub fn new(max_nodes: usize, max_graphs: usize) -> Self {
        Self {
            max_nodes,
            max_graphs,
            ids: HashMap::new(),
            queue: VecDeque::new(),
            echelon: Echelon::default(),
            relations: 0,
        }
    }

    fn intern(&mut self, g: &Multigraph) -> usize {
        let n = self.ids.len();
        *self.ids.entry(g.clone()).or_insert_with(|| {
            self.queue.push_back(g.clone());
            n
        })
    }

    fn row_of(&mut self, e: &DiagramExpr) -> Row {
        let mut row = Row::new();
        for (g, c) in e.terms() {
            let id = self.intern(g);
            row.insert(id, c.clone());
        }
        row
    }

    /// Adds every relation reachable from the terms of `e`.
    pub fn extend(&mut self, e: &DiagramExpr) -> Result<(), DiagramError> {
        if !e.labels().is_empty() {
            return Err(DiagramError::NotScalar);
        }
        self.row_of(e);
        while let Some(g) = self.queue.pop_front() {
            for (idx, &(u, v)) in g.edges().iter().enumerate() {
                let ends: &[usize] = if u == v { &[u] } else { &[u, v] };
                for &node in ends {
                    let image = ipp(&g, node, idx)?;
                    let admissible = image
                        .terms()
                        .all(|(h, _)| h.node_count() <= self.max_nodes && h.degrees().iter().all(|&d| d > 0));
                    if !admissible || self.ids.len() + image.len() > self.max_graphs {
                        continue;
                    }
                    let relation = DiagramExpr::from_graph(&g, BigRational::one())?.sub(&image);
                    let row = self.row_of(&relation);
                    self.relations += 1;
                    self.echelon.insert(row);
                }
            }
        }
        Ok(())
    }

    /// Whether `e` integrates to zero by the relations collected so far.
    pub fn contains(&mut self, e: &DiagramExpr) -> Result<bool, DiagramError> {
        if !e.labels().is_empty() {
            return Err(DiagramError::NotScalar);
        }
        let row = self.row_of(e);
        Ok(self.echelon.reduce(row).is_empty())
    }

    pub fn graphs(&self) -> usize {
        self.ids.len()
    }

    pub fn relations(&self) -> usize {
        self.relations
    }

    pub fn rank(&self) -> usize {
        self.echelon.pivots.len()
    }
}

/// Decides whether `a - b` is a combination of integration-by-parts relations.
pub fn equivalent_mod_ipp(
    a: &DiagramExpr,
    b: &DiagramExpr,
    max_nodes: usize,
    max_graphs: usize,
) -> Result<IppReduction, DiagramError> {
    let diff = a.sub(b);
    if !diff.labels().is_empty() || !a.labels().is_empty() {
        return Err(DiagramError::NotScalar);
    }
    let mut span = IppSpan::new(max_nodes, max_graphs);
    span.extend(&diff)?;
    let equivalent = span.contains(&diff)?;
    Ok(IppReduction {
        equivalent,
        graphs: span.graphs(),
        relations: span.relations(),
        rank: span.rank(),
    })
}
