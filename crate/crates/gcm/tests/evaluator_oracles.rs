use std::time::Instant;

use gcm::density::DensityModel;
use gcm::diagram::{compile_tree, ipp, rational, DiagramExpr, Multigraph};
use gcm::evaluator::{
    entropy_time_derivative, eval_diagram, eval_forest, eval_many, forest_values, internal_energy, ledoux_integrand,
    CompileCache, EvalError, PressureFamily, Potential, Samples,
};
use gcm::forest::{generate_forest, named_tree, CanonicalTree, NAMED_TREES};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs().max(1e-300)
}

fn single(nodes: usize, edges: &[(usize, usize)]) -> DiagramExpr {
    DiagramExpr::from_graph(&Multigraph::new(nodes, edges.to_vec(), vec![]).unwrap(), rational(1, 1)).unwrap()
}

// (m-1)! 2^(m-1) / s^m per dimension, from H = -(d/2) log(2πe(σ² + 2t))
fn gaussian_oracle(d: usize, s: f64, m: usize) -> f64 {
    let fact: f64 = (1..m).map(|i| i as f64).product();
    d as f64 * fact * 2f64.powi(m as i32 - 1) / s.powi(m as i32)
}

#[test]
fn fisher_information_and_laplacian() {
    let g = DensityModel::gaussian(&[0.3], 2.0).unwrap();
    let grid = g.build_grid(1e-10).unwrap();
    let fisher = single(2, &[(0, 1)]);
    assert!(rel(eval_diagram(&fisher, &g, &grid).unwrap(), 0.5) < 1e-9);
    let cache = CompileCache::new();
    let f2 = generate_forest(2).unwrap();
    assert!(rel(eval_forest(&f2, &g, &grid, &cache).unwrap(), 0.5) < 1e-9);

    let lap = single(1, &[(0, 0)]);
    for m in [g, DensityModel::quartic(0.25, 0.5, 0.3).unwrap(), DensityModel::quartic(0.1, 0.0, 0.0).unwrap().heat_evolve(0.3).unwrap()] {
        let grid = m.build_grid(1e-10).unwrap();
        let a = eval_diagram(&lap, &m, &grid).unwrap();
        let b = eval_diagram(&fisher, &m, &grid).unwrap();
        assert!(rel(a, -b) < 1e-8, "{}: {a} vs {b}", m.describe());
    }
}

#[test]
fn gaussian_forests_match_closed_form() {
    let cache = CompileCache::new();
    for d in [1, 2] {
        for s in [1.0, 2.0, 4.0] {
            let g = DensityModel::gaussian(&vec![0.1; d], s).unwrap();
            let grid = g.build_grid(1e-11).unwrap();
            let vals = forest_values(5, &g, &grid, &cache).unwrap();
            for (i, v) in vals.iter().enumerate() {
                let want = gaussian_oracle(d, s, i + 1);
                assert!(rel(v.value, want) < 1e-6, "d={d} s={s} m={}: {} vs {want}", i + 1, v.value);
            }
        }
    }
    // anisotropic: the per-axis contributions add
    let g = DensityModel::gaussian_diag(&[0.0, 0.5], &[0.5, 3.0]).unwrap();
    let grid = g.build_grid(1e-11).unwrap();
    let vals = forest_values(4, &g, &grid, &cache).unwrap();
    for (i, v) in vals.iter().enumerate() {
        let want = gaussian_oracle(1, 0.5, i + 1) + gaussian_oracle(1, 3.0, i + 1);
        assert!(rel(v.value, want) < 1e-6, "m={}", i + 1);
    }
}

#[test]
fn quartic_forests_match_entropy_derivatives() {
    let q = DensityModel::quartic(0.25, 0.5, 0.0).unwrap();
    let cache = CompileCache::new();
    let start = Instant::now();
    for t in [0.25, 0.5] {
        let m_t = q.heat_evolve(t).unwrap();
        let grid = m_t.build_grid(1e-11).unwrap();
        let vals = forest_values(4, &m_t, &grid, &cache).unwrap();
        for m in 1..=4 {
            let fd = entropy_time_derivative(&q, t, m, 1e-12).unwrap();
            let signed = if m % 2 == 0 { fd.value } else { -fd.value };
            let v = vals[m - 1].value;
            assert!(rel(v, signed) < 1e-3, "t={t} m={m}: diagram {v} vs fd {signed} (±{})", fd.error);
            assert!(v > 0.0);
        }
    }
    eprintln!("quartic cross-check took {:?}", start.elapsed());
}

#[test]
fn every_named_tree_is_nonnegative() {
    let cache = CompileCache::new();
    let trees: Vec<CanonicalTree> = NAMED_TREES.iter().map(|n| named_tree(n).unwrap()).collect();
    let forms: Vec<_> = trees.iter().map(|t| cache.get(t).unwrap()).collect();
    let refs: Vec<&DiagramExpr> = forms.iter().map(|f| f.as_ref()).collect();
    let q = DensityModel::quartic(0.25, 0.5, 0.2).unwrap();
    let densities = [
        DensityModel::gaussian(&[0.0], 1.0).unwrap(),
        DensityModel::gaussian(&[0.0, 0.0], 1.0).unwrap(),
        DensityModel::gaussian_diag(&[0.0, 0.0], &[0.5, 2.0]).unwrap(),
        q.clone(),
        q.heat_evolve(0.25).unwrap(),
    ];
    for m in &densities {
        let grid = m.build_grid(1e-10).unwrap();
        for (name, v) in NAMED_TREES.iter().zip(eval_many(&refs, m, &grid).unwrap()) {
            assert!(v.value >= -1e-8, "{name} on {}: {}", m.describe(), v.value);
        }
        for (i, v) in forest_values(5, m, &grid, &cache).unwrap().iter().enumerate() {
            assert!(v.value >= -1e-8, "F^{} on {}: {}", i + 1, m.describe(), v.value);
        }
    }
}

#[test]
fn ledoux_forms_agree_in_one_dimension() {
    let cache = CompileCache::new();
    for m in [
        DensityModel::gaussian(&[0.0], 1.5).unwrap(),
        DensityModel::quartic(0.25, 0.5, 0.0).unwrap(),
        DensityModel::quartic(0.25, 0.5, 0.0).unwrap().heat_evolve(0.5).unwrap(),
    ] {
        let grid = m.build_grid(1e-11).unwrap();
        let vals = forest_values(4, &m, &grid, &cache).unwrap();
        let samples = Samples::new(&m, &grid, 4).unwrap();
        for n in [3, 4] {
            let lx = samples.integrate_with(|s| ledoux_integrand(n, s).unwrap()).value * 2f64.powi(n as i32 - 1);
            assert!(rel(vals[n - 1].value, lx) < 1e-6, "{} n={n}: {} vs {lx}", m.describe(), vals[n - 1].value);
        }
    }
}

#[test]
fn dilation_scales_forest_values() {
    let cache = CompileCache::new();
    for g in [DensityModel::gaussian(&[0.2], 1.0).unwrap(), DensityModel::gaussian_diag(&[0.0, 0.3], &[1.0, 0.6]).unwrap()] {
        let lambda = 2.0;
        let d = g.dilate(lambda).unwrap();
        let a = forest_values(4, &g, &g.build_grid(1e-12).unwrap(), &cache).unwrap();
        let b = forest_values(4, &d, &d.build_grid(1e-12).unwrap(), &cache).unwrap();
        for m in 1..=4 {
            let want = a[m - 1].value * lambda.powi(-2 * m as i32);
            assert!(rel(b[m - 1].value, want) < 1e-8, "m={m}");
        }
    }
}

#[test]
fn integration_by_parts_preserves_values() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut pool = Vec::new();
    for n in 2..=5 {
        for t in gcm::forest::enumerate_trees(n).unwrap() {
            for (g, _) in compile_tree(&t).unwrap().terms() {
                pool.push(g.clone());
            }
        }
    }
    let densities = [
        DensityModel::quartic(0.25, 0.5, 0.3).unwrap(),
        DensityModel::gaussian_diag(&[0.1, -0.2], &[0.8, 1.7]).unwrap(),
    ];
    let grids: Vec<_> = densities.iter().map(|m| m.build_grid(1e-11).unwrap()).collect();
    for _ in 0..30 {
        let g = pool.choose(&mut rng).unwrap();
        let e = rng.gen_range(0..g.edges().len());
        let (a, b) = g.edges()[e];
        let node = if rng.gen_bool(0.5) { a } else { b };
        let lhs = DiagramExpr::from_graph(g, rational(1, 1)).unwrap();
        let rhs = ipp(g, node, e).unwrap();
        for (m, grid) in densities.iter().zip(&grids) {
            let v = eval_many(&[&lhs, &rhs], m, grid).unwrap();
            let scale = v[0].value.abs().max(1e-3);
            assert!((v[0].value - v[1].value).abs() < 1e-6 * scale, "{g} at {node}/{e}: {:?}", v);
        }
    }
}

#[test]
fn pressures_and_internal_energies() {
    let ent = PressureFamily::Entropy;
    assert_eq!(ent.pressure(1, 0.7).unwrap(), 0.7);
    assert_eq!(ent.pressure(2, 0.7).unwrap(), 0.0);
    let p2 = PressureFamily::power(2.0).unwrap();
    assert!(rel(p2.pressure(1, 1.3).unwrap(), 1.69) < 1e-15);
    assert!(rel(p2.pressure(2, 1.3).unwrap(), 1.69) < 1e-15);
    let p3 = PressureFamily::power(3.0).unwrap();
    assert!(rel(p3.pressure(2, 1.3).unwrap(), 2.0 * 1.3f64.powi(3)) < 1e-15);
    assert!(rel(p3.pressure(3, 1.3).unwrap(), 4.0 * 1.3f64.powi(3)) < 1e-15);

    let std = DensityModel::gaussian(&[0.0], 1.0).unwrap();
    let grid = std.build_grid(1e-12).unwrap();
    let h = internal_energy(&std, &Potential::zero(1), &ent, &grid).unwrap();
    assert!(rel(h.value, -0.5 * (2.0 * std::f64::consts::PI * std::f64::consts::E).ln()) < 1e-10);
    let kl = internal_energy(&std, &Potential::standard_gaussian(1), &ent, &grid).unwrap();
    assert!(kl.value.abs() < 1e-10);
    let wide = DensityModel::gaussian(&[0.0], 2.0).unwrap();
    let grid = wide.build_grid(1e-12).unwrap();
    let kl = internal_energy(&wide, &Potential::standard_gaussian(1), &ent, &grid).unwrap();
    assert!(rel(kl.value, 0.5 * (2.0 - 1.0 - 2f64.ln())) < 1e-10, "{kl:?}");
    // ∫ μ² for N(0, s) is 1/(2√(πs))
    let e2 = internal_energy(&wide, &Potential::zero(1), &p2, &grid).unwrap();
    assert!(rel(e2.value, 1.0 / (2.0 * (2.0 * std::f64::consts::PI).sqrt()) - 1.0) < 1e-10);
}

#[test]
fn rejects_bad_requests() {
    let g = DensityModel::gaussian(&[0.0], 1.0).unwrap();
    let grid = g.build_grid(1e-8).unwrap();
    let open = DiagramExpr::gradient("i");
    assert!(matches!(eval_diagram(&open, &g, &grid), Err(EvalError::NotScalar(_))));
    let other = DensityModel::gaussian(&[5.0], 1.0).unwrap();
    let fisher = single(2, &[(0, 1)]);
    assert!(matches!(eval_diagram(&fisher, &other, &grid), Err(EvalError::StaleGrid { .. })));
    let too_deep = single(2, &[(0, 1); 13]);
    assert!(matches!(eval_diagram(&too_deep, &g, &grid), Err(EvalError::DegreeTooHigh { .. })));
    assert!(matches!(eval_forest(&generate_forest(7).unwrap(), &g, &grid, &CompileCache::new()), Err(EvalError::Order(7))));
}

#[test]
fn compile_cache_round_trips() {
    let cache = CompileCache::new();
    for n in NAMED_TREES {
        cache.get(&named_tree(n).unwrap()).unwrap();
    }
    assert_eq!(cache.len(), 9);
    let json = serde_json::to_string(&cache.to_json()).unwrap();
    let back = CompileCache::from_json(&serde_json::from_str(&json).unwrap()).unwrap();
    let t = named_tree("T2").unwrap();
    assert_eq!(*back.get(&t).unwrap(), compile_tree(&t).unwrap());
}
