//! Individual tree values on log-concave densities, including random quartics.

use gcm::density::DensityModel;
use gcm::diagram::DiagramExpr;
use gcm::evaluator::{eval_many, CompileCache};
use gcm::forest::{enumerate_trees, named_tree, NAMED_TREES};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn main() -> anyhow::Result<()> {
    let cache = CompileCache::new();
    let mut trees: Vec<(String, _)> =
        NAMED_TREES.iter().map(|n| (n.to_string(), named_tree(n).expect("named tree"))).collect();
    trees.extend(enumerate_trees(4)?.into_iter().map(|t| (t.code.clone(), t)));
    let forms = trees.iter().map(|(_, t)| cache.get(t)).collect::<Result<Vec<_>, _>>()?;
    let refs: Vec<&DiagramExpr> = forms.iter().map(|f| f.as_ref()).collect();

    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let mut densities = vec![DensityModel::gaussian_diag(&[0.0, 0.0], &[0.5, 2.0])?];
    for _ in 0..3 {
        densities.push(DensityModel::quartic(rng.gen_range(0.05..1.0), rng.gen_range(0.0..1.0), rng.gen_range(-1.0..1.0))?);
    }
    for m in &densities {
        let grid = m.build_grid(1e-10)?;
        println!("{}", m.describe());
        for ((name, _), v) in trees.iter().zip(eval_many(&refs, m, &grid)?) {
            println!("  {name:>12}: {:+.6e}", v.value);
        }
    }
    Ok(())
}
