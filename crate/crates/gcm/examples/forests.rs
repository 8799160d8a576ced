//! The weighted forests F^n: each tree with its multiplicity, summing to n!.

use gcm::forest::{enumerate_trees, generate_forest};

fn main() -> anyhow::Result<()> {
    for n in 1..=6 {
        let forest = generate_forest(n)?;
        println!("F^{n}: {} trees, total multiplicity {}", forest.entries.len(), forest.total_multiplicity());
        for entry in forest.iter() {
            println!("  {:>4} x {:?}", entry.multiplicity, entry.tree.edges);
        }
    }
    for nodes in 2..=8 {
        println!("{nodes} nodes: {} unlabeled trees", enumerate_trees(nodes)?.len());
    }
    Ok(())
}
