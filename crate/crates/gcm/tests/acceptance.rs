//! Acceptance suite: one PASS/FAIL line per criterion, with its runtime budget.
//! Exits nonzero if any criterion fails.

use std::collections::BTreeMap;
use std::sync::Arc;
use std::time::{Duration, Instant};

use gcm::bell::{bell_apply, bell_polynomial, binomial, BellPolynomial};
use gcm::density::{DensityModel, DerivativeStack, QuadratureGrid};
use gcm::diagram::{compile_dangling_tree, compile_tree, ipp, rational, DanglingTree, DiagramExpr, Multigraph};
use gcm::evaluator::{
    entropy_time_derivative, eval_many, forest_values, CompileCache, Potential, PressureFamily, Samples,
};
use gcm::forest::{generate_forest, named_tree, CanonicalTree, NAMED_TREES};
use gcm::transport::{
    energy_derivative, energy_derivative_fd, hessian_two_routes, wasserstein_fdb, AnalyticField, FieldTerm,
    FlowSettings, Functional, Geodesic, TransportCouple, Trig,
};
use num_bigint::{BigInt, BigUint};
use num_rational::BigRational;
use num_traits::{One, Zero};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Check = Result<String, String>;

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs()
}

fn ensure(ok: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if ok {
        Ok(())
    } else {
        Err(msg())
    }
}

// ---- 1: Bell polynomials ----

type Poly = BTreeMap<Vec<usize>, BigRational>;

fn int(n: i64) -> BigRational {
    BigRational::from_integer(BigInt::from(n))
}

fn big(n: &BigUint) -> BigRational {
    BigRational::from_integer(BigInt::from(n.clone()))
}

fn add_into(p: &mut Poly, mut e: Vec<usize>, c: BigRational) {
    while e.last() == Some(&0) {
        e.pop();
    }
    let slot = p.entry(e.clone()).or_insert_with(BigRational::zero);
    *slot += c;
    if slot.is_zero() {
        p.remove(&e);
    }
}

fn to_poly(b: &BellPolynomial) -> Poly {
    let mut p = Poly::new();
    for m in &b.monomials {
        add_into(&mut p, m.exponents.counts().to_vec(), big(&m.coefficient));
    }
    p
}

/// `(coefficient, [(variable, power)])` monomials as written in the table.
fn table_poly(monos: &[(i64, &[(usize, usize)])]) -> Poly {
    let mut p = Poly::new();
    for (c, vars) in monos {
        let mut e = vec![0; 4];
        for &(v, pow) in *vars {
            e[v - 1] = pow;
        }
        add_into(&mut p, e, int(*c));
    }
    p
}

fn eval_rat(b: &BellPolynomial, args: &[BigRational]) -> BigRational {
    bell_apply(
        b,
        args,
        BigRational::zero(),
        |fs| fs.iter().fold(BigRational::one(), |acc, x| acc * *x),
        |acc, c, t| acc + big(c) * t,
    )
    .expect("enough arguments")
}

fn bell_goldens() -> Check {
    let table: Vec<((usize, usize), Poly)> = vec![
        ((1, 1), table_poly(&[(1, &[(1, 1)])])),
        ((2, 1), table_poly(&[(1, &[(2, 1)])])),
        ((2, 2), table_poly(&[(1, &[(1, 2)])])),
        ((3, 1), table_poly(&[(1, &[(3, 1)])])),
        ((3, 2), table_poly(&[(3, &[(1, 1), (2, 1)])])),
        ((3, 3), table_poly(&[(1, &[(1, 3)])])),
        ((4, 1), table_poly(&[(1, &[(4, 1)])])),
        ((4, 2), table_poly(&[(3, &[(2, 2)]), (4, &[(1, 1), (3, 1)])])),
        ((4, 3), table_poly(&[(6, &[(1, 2), (2, 1)])])),
        ((4, 4), table_poly(&[(1, &[(1, 4)])])),
    ];
    for ((n, k), want) in &table {
        let got = bell_polynomial(*n, *k);
        ensure(&to_poly(&got) == want, || format!("B_{{{n},{k}}} = {got}"))?;
    }
    // B_{n+1,k} = Σ_i C(n,i) X_{i+1} B_{n-i,k-1} as polynomials
    for n in 0..=6 {
        for k in 1..=n + 1 {
            let mut rhs = Poly::new();
            for i in 0..=n {
                let c = big(&binomial(n, i));
                for (e, v) in to_poly(&bell_polynomial(n - i, k - 1)) {
                    let mut e = e.clone();
                    e.resize(e.len().max(i + 1), 0);
                    e[i] += 1;
                    add_into(&mut rhs, e, v * &c);
                }
            }
            ensure(to_poly(&bell_polynomial(n + 1, k)) == rhs, || format!("recurrence at n={}, k={k}", n + 1))?;
        }
    }
    // composition of exponential formal series, at random rationals
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let draw = |rng: &mut ChaCha8Rng| -> Vec<BigRational> {
        (0..7)
            .map(|_| BigRational::new(BigInt::from(rng.gen_range(-9i64..=9)), BigInt::from(rng.gen_range(1i64..=5))))
            .collect()
    };
    let trials = 20;
    for _ in 0..trials {
        let (x, f, g) = (draw(&mut rng), draw(&mut rng), draw(&mut rng));
        let y: Vec<BigRational> =
            (1..=7).map(|k| (1..=k).map(|l| &f[l - 1] * eval_rat(&bell_polynomial(k, l), &x)).sum()).collect();
        let h: Vec<BigRational> =
            (1..=7).map(|k| (1..=k).map(|l| &g[l - 1] * eval_rat(&bell_polynomial(k, l), &f)).sum()).collect();
        for n in 1..=7 {
            let direct: BigRational = (1..=n).map(|k| &g[k - 1] * eval_rat(&bell_polynomial(n, k), &y)).sum();
            let composed: BigRational = (1..=n).map(|k| &h[k - 1] * eval_rat(&bell_polynomial(n, k), &x)).sum();
            ensure(direct == composed, || format!("composition fails at n={n}"))?;
        }
    }
    Ok(format!("table n<=4 exact, recurrence n<=7 exact, composition n<=7 on {trials} random rational triples"))
}

// ---- 2: forests ----

fn sorted_multiplicities(n: usize) -> Result<Vec<u64>, String> {
    let f = generate_forest(n).map_err(|e| e.to_string())?;
    let mut m: Vec<u64> = f.iter().map(|e| e.multiplicity).collect();
    m.sort();
    Ok(m)
}

fn forest_counts() -> Check {
    let f4 = sorted_multiplicities(4)?;
    ensure(f4 == [2, 8, 14], || format!("F^4 multiplicities {f4:?}"))?;
    let f5 = sorted_multiplicities(5)?;
    ensure(f5 == [2, 14, 16, 22, 30, 36], || format!("F^5 multiplicities {f5:?}"))?;
    for n in 1..=8 {
        let total: u64 = sorted_multiplicities(n)?.iter().sum();
        let fact: u64 = (1..=n as u64).product();
        ensure(total == fact, || format!("F^{n} totals {total}, expected {fact}"))?;
    }
    Ok(format!("F^4 {f4:?}, F^5 {f5:?}, totals n! for n<=8"))
}

// ---- 3: compiled closed forms ----

fn term(n: usize, edges: &[(usize, usize)], dangling: &[(usize, &str)], p: i64) -> DiagramExpr {
    let g = Multigraph::new(n, edges.to_vec(), dangling.iter().map(|(u, l)| (*u, l.to_string())).collect())
        .expect("valid multigraph");
    DiagramExpr::from_graph(&g, rational(p, 1)).expect("canonical")
}

fn sum(parts: &[DiagramExpr]) -> DiagramExpr {
    parts[1..].iter().fold(parts[0].clone(), |acc, e| acc.add(e))
}

fn tree(n: usize, edges: &[(usize, usize)]) -> CanonicalTree {
    CanonicalTree::new(n, edges.to_vec()).expect("tree")
}

fn compiled_goldens() -> Check {
    let fail = |e: gcm::diagram::DiagramError| e.to_string();
    let cases: Vec<(&str, DiagramExpr, DiagramExpr)> = vec![
        ("F1: |∇U|²", compile_tree(&CanonicalTree::path(2)).map_err(fail)?, term(2, &[(0, 1)], &[], 1)),
        (
            "F2: 2 tr((∇²U)²)",
            compile_tree(&CanonicalTree::path(3)).map_err(fail)?.scale(&rational(2, 1)),
            term(2, &[(0, 1), (0, 1)], &[], 2),
        ),
        (
            "F3 star: -2 tr((∇²U)³)",
            compile_tree(&CanonicalTree::star(4)).map_err(fail)?,
            term(3, &[(0, 1), (1, 2), (2, 0)], &[], -2),
        ),
        (
            "F3 path",
            compile_tree(&CanonicalTree::path(4)).map_err(fail)?,
            sum(&[
                term(2, &[(0, 0), (1, 1), (0, 1)], &[], 1),
                term(3, &[(0, 0), (0, 1), (1, 2)], &[], 2),
                term(4, &[(0, 1), (1, 2), (2, 3)], &[], 1),
            ]),
        ),
        (
            "S1: 6 tr((∇²U)⁴)",
            compile_tree(&named_tree("S1").expect("S1")).map_err(fail)?,
            term(4, &[(0, 1), (1, 2), (2, 3), (3, 0)], &[], 6),
        ),
        (
            "two-node dangling field",
            compile_dangling_tree(&DanglingTree::new(CanonicalTree::path(2), 0).map_err(fail)?).map_err(fail)?,
            sum(&[term(1, &[(0, 0)], &[(0, "i")], -1), term(2, &[(0, 1)], &[(0, "i")], -1)]),
        ),
        (
            "three-node path dangling at an end",
            compile_dangling_tree(&DanglingTree::new(tree(3, &[(0, 1), (1, 2)]), 0).map_err(fail)?).map_err(fail)?,
            sum(&[
                term(3, &[(0, 1), (0, 2)], &[(0, "i")], 1),
                term(1, &[(0, 0), (0, 0)], &[(0, "i")], 1),
                term(2, &[(0, 0), (0, 1)], &[(0, "i")], 2),
                term(2, &[(0, 1), (0, 1)], &[(0, "i")], 2),
                term(2, &[(1, 1), (0, 1)], &[(0, "i")], 1),
                term(3, &[(0, 1), (1, 2)], &[(0, "i")], 1),
            ]),
        ),
        (
            "cherry dangling at the centre",
            compile_dangling_tree(&DanglingTree::new(tree(3, &[(0, 1), (0, 2)]), 0).map_err(fail)?).map_err(fail)?,
            sum(&[
                term(2, &[(0, 1), (0, 1)], &[(0, "i")], 2),
                term(2, &[(1, 1), (0, 1)], &[(0, "i")], 2),
                term(3, &[(0, 1), (1, 2)], &[(0, "i")], 2),
            ]),
        ),
    ];
    for (name, got, want) in &cases {
        ensure(got == want, || format!("{name}: got {got}, want {want}"))?;
    }
    // the forest form of F^2 carries the multiplicity
    let f2 = gcm::evaluator::forest_expression(&generate_forest(2).map_err(|e| e.to_string())?, &CompileCache::new())
        .map_err(|e| e.to_string())?;
    ensure(f2 == cases[1].2, || format!("F^2 forest form {f2}"))?;
    Ok(format!("{} closed forms identical as canonical expressions", cases.len()))
}

// ---- 4: Gaussian closed form ----

fn gaussian_oracle() -> Check {
    let cache = CompileCache::new();
    let mut worst: f64 = 0.0;
    for d in [1usize, 2] {
        for s in [1.0, 2.0, 4.0] {
            let g = DensityModel::gaussian(&vec![0.0; d], s).map_err(|e| e.to_string())?;
            let grid = g.build_grid(1e-11).map_err(|e| e.to_string())?;
            let vals = forest_values(5, &g, &grid, &cache).map_err(|e| e.to_string())?;
            for m in 1..=5 {
                let fact: f64 = (1..m).map(|i| i as f64).product();
                let want = d as f64 * fact * 2f64.powi(m as i32 - 1) / s.powi(m as i32);
                let r = rel(vals[m - 1].value, want);
                worst = worst.max(r);
                ensure(r <= 1e-6, || format!("d={d} s={s} m={m}: {} vs {want}", vals[m - 1].value))?;
            }
        }
    }
    Ok(format!("30 values, worst relative error {worst:.1e} (tol 1e-6)"))
}

// ---- 5: finite differences of the entropy ----

fn fd_cross_check() -> Check {
    let q = DensityModel::quartic(0.25, 0.5, 0.0).map_err(|e| e.to_string())?;
    let cache = CompileCache::new();
    let mut worst: f64 = 0.0;
    for t in [0.25, 0.5] {
        let mt = q.heat_evolve(t).map_err(|e| e.to_string())?;
        let grid = mt.build_grid(1e-11).map_err(|e| e.to_string())?;
        let vals = forest_values(4, &mt, &grid, &cache).map_err(|e| e.to_string())?;
        for m in 1..=4 {
            let fd = entropy_time_derivative(&q, t, m, 1e-12).map_err(|e| e.to_string())?;
            let signed = if m % 2 == 0 { fd.value } else { -fd.value };
            let r = rel(vals[m - 1].value, signed);
            worst = worst.max(r);
            ensure(r <= 1e-3, || format!("t={t} m={m}: {} vs FD {signed}", vals[m - 1].value))?;
        }
    }
    Ok(format!("quartic, 8 values, worst relative difference {worst:.1e} (tol 1e-3)"))
}

// ---- 6: signs ----

fn sign_suite() -> Check {
    let q = DensityModel::quartic(0.25, 0.5, 0.2).map_err(|e| e.to_string())?;
    let densities = [
        DensityModel::gaussian(&[0.0], 1.0),
        DensityModel::gaussian(&[0.0, 0.0], 1.0),
        DensityModel::gaussian_diag(&[0.0, 0.0], &[0.5, 2.0]),
        Ok(q.clone()),
        q.heat_evolve(0.25),
    ];
    let cache = CompileCache::new();
    let trees: Vec<_> = NAMED_TREES.iter().map(|n| named_tree(n).expect("named")).collect();
    let forms = trees.iter().map(|t| cache.get(t)).collect::<Result<Vec<_>, _>>().map_err(|e| e.to_string())?;
    let refs: Vec<&DiagramExpr> = forms.iter().map(|f| f.as_ref()).collect();
    let mut lowest = (f64::INFINITY, String::new());
    let mut count = 0;
    for m in densities {
        let m = m.map_err(|e| e.to_string())?;
        let grid = m.build_grid(1e-10).map_err(|e| e.to_string())?;
        let mut named: Vec<(String, f64)> = NAMED_TREES
            .iter()
            .zip(eval_many(&refs, &m, &grid).map_err(|e| e.to_string())?)
            .map(|(n, v)| (n.to_string(), v.value))
            .collect();
        for (i, v) in forest_values(5, &m, &grid, &cache).map_err(|e| e.to_string())?.iter().enumerate() {
            named.push((format!("F^{}", i + 1), v.value));
        }
        for (name, v) in named {
            count += 1;
            ensure(v >= -1e-8, || format!("{name} on {}: {v}", m.describe()))?;
            if v < lowest.0 {
                lowest = (v, format!("{name} on {}", m.describe()));
            }
        }
    }
    Ok(format!("{count} values >= -1e-8; smallest {:.3e} ({})", lowest.0, lowest.1))
}

// ---- 7: integration by parts ----

fn ipp_property() -> Check {
    let mut pool = Vec::new();
    for n in 2..=5 {
        for t in gcm::forest::enumerate_trees(n).map_err(|e| e.to_string())? {
            for (g, _) in compile_tree(&t).map_err(|e| e.to_string())?.terms() {
                if g.node_count() <= 5 && g.edges().len() <= 7 {
                    pool.push(g.clone());
                }
            }
        }
    }
    let densities = [
        DensityModel::quartic(0.25, 0.5, 0.3).map_err(|e| e.to_string())?,
        DensityModel::gaussian_diag(&[0.1, -0.2], &[0.8, 1.7]).map_err(|e| e.to_string())?,
    ];
    let grids: Vec<QuadratureGrid> =
        densities.iter().map(|m| m.build_grid(1e-11)).collect::<Result<_, _>>().map_err(|e| e.to_string())?;
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let mut worst: f64 = 0.0;
    let instances = 50;
    for _ in 0..instances {
        let g = pool.choose(&mut rng).expect("non-empty pool");
        let e = rng.gen_range(0..g.edges().len());
        let (a, b) = g.edges()[e];
        let node = if rng.gen_bool(0.5) { a } else { b };
        let lhs = DiagramExpr::from_graph(g, rational(1, 1)).map_err(|e| e.to_string())?;
        let rhs = ipp(g, node, e).map_err(|e| e.to_string())?;
        for (m, grid) in densities.iter().zip(&grids) {
            let v = eval_many(&[&lhs, &rhs], m, grid).map_err(|e| e.to_string())?;
            // values that vanish by symmetry are compared on the scale 1e-3
            let r = (v[0].value - v[1].value).abs() / v[0].value.abs().max(1e-3);
            worst = worst.max(r);
            ensure(r <= 1e-6, || format!("{g} at node {node}, edge {e}: {} vs {}", v[0].value, v[1].value))?;
        }
    }
    Ok(format!("{instances} instances from {} graphs on 2 densities, worst relative gap {worst:.1e}", pool.len()))
}

// ---- 8: chain rule along transport ----

fn fdb_chain_rule() -> Check {
    let mu0 = DensityModel::quartic(0.5, 0.25, 0.0).map_err(|e| e.to_string())?;
    let grid = mu0.build_grid(1e-12).map_err(|e| e.to_string())?;
    let err = |e: gcm::transport::TransportError| e.to_string();
    let f = Functional::Linear(
        AnalyticField::scalar(1, vec![FieldTerm::trig(0, 1.0, Trig::Cos, 1.5, 0), FieldTerm::monomial(0, 0.2, &[3])])
            .map_err(err)?,
    );
    let flowing = AnalyticField::velocity(
        1,
        vec![FieldTerm::trig(0, 0.3, Trig::Sin, 1.0, 0).in_time(&[1.0, 0.5]), FieldTerm::monomial(0, -0.1, &[2])],
    )
    .map_err(err)?;
    let couple = TransportCouple {
        mu0: mu0.clone(),
        velocity: Arc::new(flowing),
        settings: FlowSettings::default(),
    };
    let mut worst: f64 = 0.0;
    for t in [0.0, 0.4] {
        for n in 1..=4 {
            let r = wasserstein_fdb(&couple, &f, n, t, &grid).map_err(err)?;
            let d = rel(r.lhs.value, r.rhs);
            worst = worst.max(d);
            ensure(d <= 1e-4, || format!("flow t={t} n={n}: FD {} vs {}", r.lhs.value, r.rhs))?;
        }
    }
    let v = AnalyticField::velocity(1, vec![FieldTerm::trig(0, 0.3, Trig::Sin, 1.0, 0)]).map_err(err)?;
    let geo = TransportCouple {
        mu0: mu0.clone(),
        velocity: Arc::new(Geodesic::new(mu0, v, &grid).map_err(err)?),
        settings: FlowSettings::default(),
    };
    let mut off: f64 = 0.0;
    for n in 1..=4 {
        let r = wasserstein_fdb(&geo, &f, n, 0.3, &grid).map_err(err)?;
        let stray = r.terms[..n - 1].iter().fold(0.0f64, |m, x| m.max(x.abs())) / r.rhs.abs();
        off = off.max(stray);
        ensure(stray <= 1e-12, || format!("geodesic n={n}: terms {:?}", r.terms))?;
    }
    Ok(format!(
        "flow: worst relative gap {worst:.1e} (tol 1e-4); geodesic: k<n terms at most {off:.1e} of the total"
    ))
}

// ---- 9: internal energies ----

fn swirl() -> Result<AnalyticField, String> {
    AnalyticField::velocity(
        2,
        vec![
            FieldTerm::monomial(0, 0.3, &[0, 1]),
            FieldTerm::trig(0, 0.2, Trig::Sin, 1.3, 0),
            FieldTerm::monomial(1, -0.4, &[1, 1]),
        ],
    )
    .map_err(|e| e.to_string())
}

fn energy_differentials() -> Check {
    let err = |e: gcm::transport::TransportError| e.to_string();
    let mu0 = DensityModel::quartic(0.5, 0.25, 0.0).map_err(|e| e.to_string())?;
    let grid = mu0.build_grid(1e-12).map_err(|e| e.to_string())?;
    let v = AnalyticField::velocity(1, vec![FieldTerm::trig(0, 0.3, Trig::Sin, 1.0, 0)]).map_err(err)?;
    let families = [
        PressureFamily::Entropy,
        PressureFamily::power(2.0).map_err(|e| e.to_string())?,
        PressureFamily::power(1.5).map_err(|e| e.to_string())?,
    ];
    let mut worst: f64 = 0.0;
    let mut count = 0;
    for pot in [Potential::zero(1), Potential::standard_gaussian(1)] {
        for fam in &families {
            for n in 1..=3 {
                let formula = energy_derivative(&mu0, &v, &pot, fam, n, &grid).map_err(err)?;
                let fd = energy_derivative_fd(&mu0, &v, &pot, fam, n, &grid).map_err(err)?;
                let d = rel(formula, fd.value);
                worst = worst.max(d);
                count += 1;
                ensure(d <= 1e-4, || format!("{fam:?} n={n}: {formula} vs FD {}", fd.value))?;
            }
        }
    }
    let phi = AnalyticField::velocity(1, vec![FieldTerm::trig(0, 0.3, Trig::Sin, 1.0, 0), FieldTerm::monomial(0, 0.2, &[2])])
        .map_err(err)?;
    let h1 = hessian_two_routes(&mu0, &phi, &Potential::standard_gaussian(1), &grid).map_err(err)?;
    let g2 = DensityModel::gaussian_diag(&[0.0, 0.3], &[0.7, 1.4]).map_err(|e| e.to_string())?;
    let grid2 = g2.build_grid(1e-10).map_err(|e| e.to_string())?;
    let h2 = hessian_two_routes(&g2, &swirl()?, &Potential::standard_gaussian(2), &grid2).map_err(err)?;
    let hr = rel(h1.transport, h1.integrated).max(rel(h2.transport, h2.integrated));
    ensure(hr <= 1e-6, || format!("Hessian routes {h1:?}, {h2:?}"))?;
    Ok(format!("{count} derivatives, worst relative gap {worst:.1e} (tol 1e-4); Hessian routes agree to {hr:.1e} (tol 1e-6)"))
}

// ---- 10: one-dimensional closed forms ----

fn gamma_tilde(n: usize, s: &DerivativeStack) -> f64 {
    let (u2, u3, u4) = (s.component(2, 0), s.component(3, 0), s.component(4, 0));
    match n {
        3 => u3 * u3 - 2.0 * u2.powi(3),
        _ => u4 * u4 - 12.0 * u2 * u3 * u3 + 6.0 * u2.powi(4),
    }
}

fn ledoux_cross_check() -> Check {
    let q = DensityModel::quartic(0.25, 0.5, 0.0).map_err(|e| e.to_string())?;
    let densities = [
        DensityModel::gaussian(&[0.0], 1.0),
        DensityModel::gaussian(&[0.3], 2.0),
        Ok(q.clone()),
        q.heat_evolve(0.5),
    ];
    let cache = CompileCache::new();
    let mut worst: f64 = 0.0;
    for m in densities {
        let m = m.map_err(|e| e.to_string())?;
        let grid = m.build_grid(1e-11).map_err(|e| e.to_string())?;
        let vals = forest_values(4, &m, &grid, &cache).map_err(|e| e.to_string())?;
        let samples = Samples::new(&m, &grid, 4).map_err(|e| e.to_string())?;
        for n in [3, 4] {
            let closed = samples.integrate_with(|s| gamma_tilde(n, s)).value * 2f64.powi(n as i32 - 1);
            let r = rel(vals[n - 1].value, closed);
            worst = worst.max(r);
            ensure(r <= 1e-6, || format!("n={n} on {}: {} vs {closed}", m.describe(), vals[n - 1].value))?;
        }
    }
    Ok(format!("4 densities, n = 3, 4, worst relative gap {worst:.1e} (tol 1e-6)"))
}

fn main() {
    let criteria: [(u32, &str, Duration, fn() -> Check); 10] = [
        (1, "Bell goldens and identities", Duration::from_secs(1), bell_goldens),
        (2, "forest counts", Duration::from_secs(5), forest_counts),
        (3, "compiled closed forms", Duration::from_secs(60), compiled_goldens),
        (4, "Gaussian closed form", Duration::from_secs(120), gaussian_oracle),
        (5, "entropy finite differences", Duration::from_secs(300), fd_cross_check),
        (6, "sign suite", Duration::from_secs(300), sign_suite),
        (7, "integration by parts", Duration::from_secs(120), ipp_property),
        (8, "transport chain rule", Duration::from_secs(60), fdb_chain_rule),
        (9, "internal-energy derivatives", Duration::from_secs(120), energy_differentials),
        (10, "one-dimensional closed forms", Duration::from_secs(60), ledoux_cross_check),
    ];
    let filter: Vec<u32> = std::env::args().skip(1).filter_map(|a| a.parse().ok()).collect();
    let mut failed = 0;
    for (id, name, budget, check) in criteria {
        if !filter.is_empty() && !filter.contains(&id) {
            continue;
        }
        let start = Instant::now();
        let result = check();
        let took = start.elapsed();
        let (ok, detail) = match result {
            Ok(d) if took <= budget => (true, d),
            Ok(d) => (false, format!("{d}; over the {budget:?} budget")),
            Err(e) => (false, e),
        };
        if !ok {
            failed += 1;
        }
        println!(
            "{} {id:>2} {name} [{:.2}s / {}s]: {detail}",
            if ok { "PASS" } else { "FAIL" },
            took.as_secs_f64(),
            budget.as_secs()
        );
    }
    if failed > 0 {
        println!("{failed} criteria failed");
        std::process::exit(1);
    }
}
