use std::collections::{BTreeMap, BTreeSet};

use gcm::forest::{canonical_code, enumerate_trees, generate_forest, named_tree, CanonicalTree, ForestJson, WeightedForest};
use proptest::prelude::*;

fn prufer_decode(seq: &[usize], n: usize) -> Vec<(usize, usize)> {
    let mut degree = vec![1usize; n];
    for &x in seq {
        degree[x] += 1;
    }
    let mut edges = Vec::with_capacity(n - 1);
    for &x in seq {
        let leaf = (0..n).find(|&v| degree[v] == 1).unwrap();
        edges.push((leaf, x));
        degree[leaf] -= 1;
        degree[x] -= 1;
    }
    let rest: Vec<usize> = (0..n).filter(|&v| degree[v] == 1).collect();
    edges.push((rest[0], rest[1]));
    edges
}

// Labels increase along every path leaving node 0.
fn is_increasing(n: usize, edges: &[(usize, usize)]) -> bool {
    let mut adj = vec![Vec::new(); n];
    for &(u, v) in edges {
        adj[u].push(v);
        adj[v].push(u);
    }
    let mut stack = vec![(0usize, usize::MAX)];
    while let Some((u, from)) = stack.pop() {
        for &v in &adj[u] {
            if v == from {
                continue;
            }
            if v < u {
                return false;
            }
            stack.push((v, u));
        }
    }
    true
}

/// Multiplicities of `F^order` from all labeled trees, via Prüfer sequences.
fn brute_force_forest(order: usize) -> BTreeMap<String, u64> {
    let n = order + 1;
    let mut out = BTreeMap::new();
    if n == 2 {
        out.insert(canonical_code(2, &[(0, 1)]).unwrap(), 1);
        return out;
    }
    let len = n - 2;
    let total = n.pow(len as u32);
    for mut idx in 0..total {
        let mut seq = vec![0; len];
        for s in seq.iter_mut() {
            *s = idx % n;
            idx /= n;
        }
        let edges = prufer_decode(&seq, n);
        if is_increasing(n, &edges) {
            *out.entry(canonical_code(n, &edges).unwrap()).or_insert(0) += 1;
        }
    }
    out
}

fn multiplicities(f: &WeightedForest) -> BTreeMap<String, u64> {
    f.iter().map(|e| (e.tree.code.clone(), e.multiplicity)).collect()
}

#[test]
fn matches_labeled_tree_enumeration() {
    for order in 1..=6 {
        assert_eq!(multiplicities(&generate_forest(order).unwrap()), brute_force_forest(order), "order {order}");
    }
}

#[test]
fn fourth_and_fifth_forests() {
    let f4 = generate_forest(4).unwrap();
    let got: Vec<u64> = ["S1", "S2", "S3"].iter().map(|s| f4.multiplicity_of(&named_tree(s).unwrap())).collect();
    assert_eq!(got, vec![2, 14, 8]);
    assert_eq!(f4.entries.len(), 3);

    let f5 = generate_forest(5).unwrap();
    let names = ["T1", "T2", "T3", "T4", "T5", "T6"];
    let got: Vec<u64> = names.iter().map(|s| f5.multiplicity_of(&named_tree(s).unwrap())).collect();
    assert_eq!(got, vec![2, 14, 16, 22, 36, 30]);
    assert_eq!(f5.entries.len(), 6);
}

#[test]
fn total_multiplicity_is_factorial() {
    let mut fact = 1u64;
    for n in 0..=8 {
        if n > 0 {
            fact *= n as u64;
        }
        assert_eq!(generate_forest(n).unwrap().total_multiplicity(), fact, "n = {n}");
    }
}

#[test]
fn shapes_cover_every_tree() {
    for n in 1..=8 {
        let forest: BTreeSet<String> = generate_forest(n).unwrap().entries.keys().cloned().collect();
        let all: BTreeSet<String> = enumerate_trees(n + 1).unwrap().into_iter().map(|t| t.code).collect();
        assert_eq!(forest, all, "order {n}");
    }
}

#[test]
fn json_round_trip() {
    let f = generate_forest(5).unwrap();
    let text = serde_json::to_string(&f.to_json()).unwrap();
    let back: ForestJson = serde_json::from_str(&text).unwrap();
    assert_eq!(WeightedForest::from_json(&back).unwrap(), f);
}

fn permuted(t: &CanonicalTree, perm: &[usize]) -> Vec<(usize, usize)> {
    t.edges.iter().map(|&(u, v)| (perm[u], perm[v])).collect()
}

fn isomorphic_brute(a: &CanonicalTree, b: &CanonicalTree) -> bool {
    if a.node_count != b.node_count {
        return false;
    }
    let target: BTreeSet<(usize, usize)> = b.edges.iter().map(|&(u, v)| (u.min(v), u.max(v))).collect();
    let mut perm: Vec<usize> = (0..a.node_count).collect();
    loop {
        let mapped: BTreeSet<(usize, usize)> = permuted(a, &perm).into_iter().map(|(u, v)| (u.min(v), u.max(v))).collect();
        if mapped == target {
            return true;
        }
        // next permutation
        let Some(i) = (0..perm.len().saturating_sub(1)).rev().find(|&i| perm[i] < perm[i + 1]) else {
            return false;
        };
        let j = (i + 1..perm.len()).rev().find(|&j| perm[j] > perm[i]).unwrap();
        perm.swap(i, j);
        perm[i + 1..].reverse();
    }
}

#[test]
fn codes_agree_with_brute_force_isomorphism() {
    for n in 1..=7 {
        let trees = enumerate_trees(n).unwrap();
        for (i, a) in trees.iter().enumerate() {
            for b in &trees[i + 1..] {
                assert!(!isomorphic_brute(a, b), "{} ~ {}", a.code, b.code);
            }
        }
    }
}

proptest! {
    #[test]
    fn code_is_labeling_invariant(which in 0usize..47, seed in any::<u64>()) {
        use rand::seq::SliceRandom;
        use rand::SeedableRng;
        let trees = enumerate_trees(8).unwrap();
        let t = &trees[which % trees.len()];
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let mut perm: Vec<usize> = (0..t.node_count).collect();
        perm.shuffle(&mut rng);
        let relabeled = CanonicalTree::new(t.node_count, permuted(t, &perm)).unwrap();
        prop_assert_eq!(&relabeled.code, &t.code);
        prop_assert_eq!(relabeled.normalized(), t.normalized());
    }
}
