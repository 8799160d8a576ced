//! Trees compiled into sums of multigraph contractions of ∇^k U.

use gcm::diagram::{compile_dangling_tree, compile_tree, DanglingTree};
use gcm::evaluator::{forest_expression, CompileCache};
use gcm::forest::{generate_forest, named_tree, CanonicalTree, NAMED_TREES};

fn main() -> anyhow::Result<()> {
    for nodes in 2..=5 {
        println!("path {nodes}: {}", compile_tree(&CanonicalTree::path(nodes))?);
        println!("star {nodes}: {}", compile_tree(&CanonicalTree::star(nodes))?);
    }
    for name in NAMED_TREES {
        let expr = compile_tree(&named_tree(name).expect("named tree"))?;
        println!("{name}: {} terms", expr.terms().count());
    }

    let cache = CompileCache::new();
    for n in 1..=4 {
        println!("F^{n} = {}", forest_expression(&generate_forest(n)?, &cache)?);
    }

    // the vector field left over when one node keeps its gradient
    let cherry = CanonicalTree::new(3, vec![(0, 1), (0, 2)])?;
    println!("cherry, dangling at the centre: {}", compile_dangling_tree(&DanglingTree::new(cherry, 0)?)?);
    Ok(())
}
