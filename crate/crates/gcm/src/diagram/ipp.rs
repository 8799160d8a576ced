//! Integration by parts on scalar integrands.
//!
//! For an edge `i = (g, h)`, write the factor at `h` as `∇_i ∇^{k-1}U` and move
//! that derivative onto the rest of the integrand and onto the weight `μ`:
//!
//! ```text
//! ∫ G dμ = -∫ (G_g + G_0 + Σ_{f ∉ {g,h}} G_f) dμ
//! ```
//!
//! where `h` loses its end of `i`, and the end at `g` is reattached as a loop
//! at `g` (`G_g`), to a new `∇U` node (`G_0`), or to another node `f` (`G_f`).
//! When `i` is a loop at `g`, one end is detached and
//! `∫ G dμ = -∫ (G_0 + Σ_{f ≠ g} G_f) dμ`.

use num_rational::BigRational;
use num_traits::One;

use super::{DiagramError, DiagramExpr, Multigraph};

pub fn ipp(mg: &Multigraph, g: usize, i: usize) -> Result<DiagramExpr, DiagramError> {
    if !mg.dangling().is_empty() {
        return Err(DiagramError::NotScalar);
    }
    let &(a, b) = mg
        .edges()
        .get(i)
        .ok_or(DiagramError::NotIncident { node: g, edge: i })?;
    if a != g && b != g {
        return Err(DiagramError::NotIncident { node: g, edge: i });
    }
    let h = if a == g { b } else { a };
    let base = mg.remove_edge(i);
    let minus = -BigRational::one();
    let mut items = Vec::new();
    if h != g {
        items.push((base.add_edge(g, g), minus.clone()));
    }
    for f in 0..mg.node_count() {
        if f != g && f != h {
            items.push((base.add_edge(g, f), minus.clone()));
        }
    }
    let (grown, fresh) = base.add_node();
    items.push((grown.add_edge(g, fresh), minus));
    Ok(DiagramExpr::collect(Vec::new(), items))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::diagram::rational;

    fn g(n: usize, edges: &[(usize, usize)]) -> Multigraph {
        Multigraph::new(n, edges.to_vec(), Vec::new()).unwrap().canonicalize().unwrap()
    }

    fn idx(mg: &Multigraph, e: (usize, usize)) -> usize {
        mg.edges().iter().position(|&x| x == e).unwrap()
    }

    #[test]
    fn laplacian_to_fisher() {
        let lap = g(1, &[(0, 0)]);
        let out = ipp(&lap, 0, 0).unwrap();
        let fisher = DiagramExpr::from_graph(&g(2, &[(0, 1)]), rational(-1, 1)).unwrap();
        assert_eq!(out, fisher);
    }

    #[test]
    fn triangle_loop_step() {
        let raw = Multigraph::new(3, vec![(0, 1), (1, 2), (0, 2), (2, 2)], Vec::new()).unwrap();
        let out = ipp(&raw, 2, idx(&raw, (2, 2))).unwrap();
        let pendant = DiagramExpr::from_graph(&g(4, &[(0, 1), (1, 2), (0, 2), (2, 3)]), rational(-1, 1)).unwrap();
        let doubled = DiagramExpr::from_graph(&g(3, &[(0, 1), (1, 2), (0, 2), (0, 2)]), rational(-2, 1)).unwrap();
        assert_eq!(out, pendant.add(&doubled));
    }

    #[test]
    fn rejects_bad_input() {
        let raw = Multigraph::new(3, vec![(0, 1), (1, 2)], Vec::new()).unwrap();
        assert!(matches!(ipp(&raw, 0, 1), Err(DiagramError::NotIncident { .. })));
        let dangling = Multigraph::gradient_node("i");
        assert_eq!(ipp(&dangling, 0, 0), Err(DiagramError::NotScalar));
    }
}
