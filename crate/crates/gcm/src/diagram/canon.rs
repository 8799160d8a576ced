//! Canonical labeling of small multigraphs.
//!
//! Colour refinement followed by individualization over the first non-trivial
//! cell, keeping the lexicographically smallest relabeled encoding. Twin nodes
//! (identical neighbourhoods, no dangling edges) are tried once per cell.

use super::Multigraph;

struct Work {
    n: usize,
    adj: Vec<Vec<u16>>,
    base: Vec<usize>,
}

impl Work {
    fn new(mg: &Multigraph) -> Self {
        let n = mg.node_count;
        let mut adj = vec![vec![0u16; n]; n];
        for &(u, v) in &mg.edges {
            adj[u][v] += 1;
            if u != v {
                adj[v][u] += 1;
            }
        }
        let mut keys: Vec<(usize, u16, Vec<&str>)> = (0..n)
            .map(|v| {
                let labels: Vec<&str> = mg
                    .dangling
                    .iter()
                    .filter(|(u, _)| *u == v)
                    .map(|(_, l)| l.as_str())
                    .collect();
                (mg.degree(v), adj[v][v], labels)
            })
            .collect();
        let node_keys = keys.clone();
        keys.sort();
        keys.dedup();
        let base = node_keys
            .iter()
            .map(|k| keys.binary_search(k).unwrap())
            .collect();
        Self { n, adj, base }
    }

    fn refine(&self, colors: &mut Vec<usize>) {
        let mut cells = count_distinct(colors);
        loop {
            let sigs: Vec<(usize, Vec<(usize, u16)>)> = (0..self.n)
                .map(|v| {
                    let mut nb: Vec<(usize, u16)> = (0..self.n)
                        .filter(|&w| w != v && self.adj[v][w] > 0)
                        .map(|w| (colors[w], self.adj[v][w]))
                        .collect();
                    nb.sort_unstable();
                    (colors[v], nb)
                })
                .collect();
            let mut sorted = sigs.clone();
            sorted.sort();
            sorted.dedup();
            for v in 0..self.n {
                colors[v] = sorted.binary_search(&sigs[v]).unwrap();
            }
            if sorted.len() == cells {
                return;
            }
            cells = sorted.len();
        }
    }

    fn twins(&self, u: usize, v: usize, has_dangling: &[bool]) -> bool {
        if has_dangling[u] || has_dangling[v] || self.adj[u][u] != self.adj[v][v] {
            return false;
        }
        (0..self.n).all(|w| w == u || w == v || self.adj[u][w] == self.adj[v][w])
    }
}

fn count_distinct(colors: &[usize]) -> usize {
    let mut c = colors.to_vec();
    c.sort_unstable();
    c.dedup();
    c.len()
}

fn encode(mg: &Multigraph, perm: &[usize]) -> Multigraph {
    let mut edges: Vec<(usize, usize)> = mg
        .edges
        .iter()
        .map(|&(u, v)| {
            let (a, b) = (perm[u], perm[v]);
            (a.min(b), a.max(b))
        })
        .collect();
    edges.sort_unstable();
    let mut dangling: Vec<(usize, String)> = mg
        .dangling
        .iter()
        .map(|(u, l)| (perm[*u], l.clone()))
        .collect();
    dangling.sort_by(|a, b| a.1.cmp(&b.1));
    Multigraph {
        node_count: mg.node_count,
        edges,
        dangling,
    }
}

fn search(w: &Work, mg: &Multigraph, colors: Vec<usize>, has_dangling: &[bool], best: &mut Option<Multigraph>) {
    let n = w.n;
    let mut by_color: Vec<Vec<usize>> = vec![Vec::new(); n];
    for v in 0..n {
        by_color[colors[v]].push(v);
    }
    let Some(cell) = by_color.iter().find(|c| c.len() > 1) else {
        let cand = encode(mg, &colors);
        if best.as_ref().is_none_or(|b| cand < *b) {
            *best = Some(cand);
        }
        return;
    };
    let c = colors[cell[0]];
    let mut tried: Vec<usize> = Vec::new();
    for &v in cell {
        if tried.iter().any(|&u| w.twins(u, v, has_dangling)) {
            continue;
        }
        tried.push(v);
        let mut next: Vec<usize> = colors.iter().map(|&x| if x > c { x + 1 } else { x }).collect();
        for &u in cell {
            if u != v {
                next[u] = c + 1;
            }
        }
        w.refine(&mut next);
        search(w, mg, next, has_dangling, best);
    }
}

pub(super) fn canonical_form(mg: &Multigraph) -> Multigraph {
    let w = Work::new(mg);
    let mut colors = w.base.clone();
    w.refine(&mut colors);
    let mut has_dangling = vec![false; mg.node_count];
    for (u, _) in &mg.dangling {
        has_dangling[*u] = true;
    }
    let mut best = None;
    search(&w, mg, colors, &has_dangling, &mut best);
    best.expect("search reaches at least one discrete colouring")
}
