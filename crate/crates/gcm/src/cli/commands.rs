use std::sync::Arc;

use anyhow::{anyhow, bail, Result};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use super::config::{grid_for, read_densities, read_json, EnergyConfig, FdbConfig, FunctionalSpec, RunConfig};
use super::{GcmCheckArgs, Global, Outcome, TreeValuesArgs, VerifyArgs};
use crate::density::{DensityModel, DensitySpec};
use crate::diagram::{compile_dangling_tree, compile_tree, DanglingTree, DiagramExpr, DiagramJson, MAX_COMPILE_NODES};
use crate::evaluator::{
    entropy_time_derivative, eval_many, forest_expression, forest_values, gaussian_forest_value, CompileCache,
};
use crate::forest::{enumerate_trees, generate_forest, named_tree, CanonicalTree, ForestJson, NAMED_TREES};
use crate::transport::{
    energy_derivative, energy_derivative_fd, hessian_two_routes, wasserstein_fdb, Field, Functional, Geodesic,
    TransportCouple,
};

const MAX_GCM_ORDER: usize = 5;
const MAX_VERIFY_ORDER: usize = 5;
// denominators below this count as absolute differences
const REL_FLOOR: f64 = 1e-6;
// tolerated size of the k < n chain-rule terms along a geodesic
const COLLAPSE_TOL: f64 = 1e-8;
// largest Hessian eigenvalue of log μ₀ accepted as log-concave
const CONCAVITY_SLACK: f64 = 1e-10;

/// `|a − b| / max(|b|, 1e-6)`.
pub(crate) fn relative(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs().max(REL_FLOOR)
}

fn to_csv<T: Serialize>(rows: &[T]) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for r in rows {
        w.serialize(r)?;
    }
    Ok(String::from_utf8(w.into_inner().map_err(|e| anyhow!("{e}"))?)?)
}

#[derive(Serialize)]
struct ForestBody {
    #[serde(flatten)]
    forest: ForestJson,
    total_multiplicity: u64,
}

/// The forest `F^n` with its multiplicities; fails if they do not add up to `n!`.
pub fn forest(n: usize) -> Result<Outcome> {
    if n == 0 {
        bail!("forest order must be at least 1");
    }
    let f = generate_forest(n)?;
    let total = f.total_multiplicity();
    let factorial: u64 = (1..=n as u64).product();
    let mut out = Outcome::new(
        "forest",
        ForestBody {
            forest: f.to_json(),
            total_multiplicity: total,
        },
        total == factorial,
    )?;
    out.golden = Some(format!("forest_{n}"));
    Ok(out)
}

enum Selection {
    Tree(CanonicalTree),
    Forest(usize),
}

fn select(selector: &str) -> Result<Selection> {
    let bad = || anyhow!("unknown tree selector {selector:?}");
    if let Some(t) = named_tree(selector) {
        return Ok(Selection::Tree(t));
    }
    if let Some(n) = selector.strip_prefix('F') {
        return Ok(Selection::Forest(n.parse().map_err(|_| bad())?));
    }
    let Some((kind, arg)) = selector.split_once(':') else {
        return Err(bad());
    };
    let tree = match kind {
        "path" | "star" => {
            let n: usize = arg.parse().map_err(|_| bad())?;
            if !(2..=MAX_COMPILE_NODES).contains(&n) {
                bail!("{selector}: node count outside 2..={MAX_COMPILE_NODES}");
            }
            if kind == "path" {
                CanonicalTree::path(n)
            } else {
                CanonicalTree::star(n)
            }
        }
        "edges" => {
            let edges = arg
                .split(',')
                .map(|e| {
                    let (u, v) = e.split_once('-').ok_or_else(bad)?;
                    Ok((u.trim().parse()?, v.trim().parse()?))
                })
                .collect::<Result<Vec<(usize, usize)>>>()?;
            CanonicalTree::new(edges.len() + 1, edges)?
        }
        _ => return Err(bad()),
    };
    Ok(Selection::Tree(tree))
}

#[derive(Serialize)]
struct TreeJson {
    node_count: usize,
    edges: Vec<[usize; 2]>,
    code: String,
}

#[derive(Serialize)]
struct CompileBody {
    selector: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    tree: Option<TreeJson>,
    #[serde(skip_serializing_if = "Option::is_none")]
    dangling: Option<usize>,
    expr: DiagramJson,
}

/// Compiles a tree selector (see [`super::Command::Compile`]) to canonical diagram JSON.
pub fn compile(selector: &str, dangling: Option<usize>) -> Result<Outcome> {
    let (tree, expr): (Option<&CanonicalTree>, DiagramExpr);
    let selection = select(selector)?;
    match (&selection, dangling) {
        (Selection::Forest(n), None) => {
            tree = None;
            expr = forest_expression(&generate_forest(*n)?, &CompileCache::new())?;
        }
        (Selection::Forest(_), Some(_)) => bail!("a forest has no dangling form"),
        (Selection::Tree(t), None) => {
            tree = Some(t);
            expr = compile_tree(t)?;
        }
        (Selection::Tree(t), Some(node)) => {
            tree = Some(t);
            expr = compile_dangling_tree(&DanglingTree::new(t.clone(), node)?)?;
        }
    }
    let body = CompileBody {
        selector: selector.to_string(),
        tree: tree.map(|t| TreeJson {
            node_count: t.node_count,
            edges: t.edges.iter().map(|&(u, v)| [u, v]).collect(),
            code: t.code.clone(),
        }),
        dangling,
        expr: expr.to_json(),
    };
    let mut out = Outcome::new("compile", body, true)?;
    let stem: String = selector
        .chars()
        .map(|c| if c.is_ascii_alphanumeric() { c } else { '_' })
        .collect();
    out.golden = Some(match dangling {
        Some(d) => format!("compile_{stem}_dangling{d}"),
        None => format!("compile_{stem}"),
    });
    Ok(out)
}

#[derive(Clone, Debug, Serialize)]
struct Certificate {
    skipped: bool,
    nodes: usize,
    max_hessian_eigenvalue: f64,
    log_concave: bool,
}

/// Largest eigenvalue of `∇² log μ` over the nodes of a quadrature grid.
fn certify(model: &DensityModel) -> Result<Certificate> {
    let grid = model.build_grid(1e-8)?;
    let mut top = f64::NEG_INFINITY;
    for i in 0..grid.weights.len() {
        top = top.max(model.max_hessian_eigenvalue(grid.point(i))?);
    }
    Ok(Certificate {
        skipped: false,
        nodes: grid.weights.len(),
        max_hessian_eigenvalue: top,
        log_concave: top <= CONCAVITY_SLACK,
    })
}

#[derive(Serialize)]
struct GcmRow {
    m: usize,
    t: f64,
    value: f64,
    error_estimate: f64,
    exact: Option<f64>,
    fd_value: Option<f64>,
    fd_error: Option<f64>,
    fd_rel_diff: Option<f64>,
    sign_margin: f64,
    pass: bool,
}

#[derive(Serialize)]
struct GcmBody {
    config: RunConfig,
    density: String,
    certificate: Certificate,
    rows: Vec<GcmRow>,
}

/// `val(F^m) = (−1)^m dᵐ/dtᵐ H(μ_t)` along the heat flow, with its sign margin and
/// optional finite-difference and closed-form comparisons.
pub fn gcm_check(a: &GcmCheckArgs, g: &Global) -> Result<Outcome> {
    let specs = read_densities(&a.density)?;
    let [spec] = specs.as_slice() else {
        bail!("gcm-check takes exactly one density");
    };
    let config = RunConfig {
        command: "gcm-check".into(),
        densities: vec![spec.clone()],
        times: if a.t.is_empty() { vec![spec.time()] } else { a.t.clone() },
        orders: if a.m.is_empty() { (1..=MAX_GCM_ORDER).collect() } else { a.m.clone() },
        tol: g.tol.unwrap_or(1e-8),
        seed: g.seed,
    };
    config.check(MAX_GCM_ORDER)?;
    if !(a.fd_tol > 0.0) {
        bail!("--fd-tol must be positive");
    }
    if let Some(t) = config.times.iter().find(|&&t| t < 0.0) {
        bail!("heat-flow time {t} is negative");
    }
    let initial = spec.initial()?;
    let certificate = if a.allow_nonlogconcave {
        Certificate {
            skipped: true,
            nodes: 0,
            max_hessian_eigenvalue: f64::NAN,
            log_concave: false,
        }
    } else {
        let c = certify(&initial)?;
        if !c.log_concave {
            bail!(
                "log-concavity certificate failed: Hessian eigenvalue {} on {}; pass --allow-nonlogconcave to proceed",
                c.max_hessian_eigenvalue,
                initial.describe()
            );
        }
        c
    };
    let cache = CompileCache::new();
    let top = *config.orders.iter().max().expect("orders are non-empty");
    let mut rows = Vec::new();
    for &t in &config.times {
        let model = spec.at_time(t)?;
        let grid = model.build_grid(a.grid_tol.unwrap_or(1e-11))?;
        let values = forest_values(top, &model, &grid, &cache)?;
        for &m in &config.orders {
            let v = values[m - 1];
            let fd = if a.fd {
                let d = entropy_time_derivative(&initial, t, m, 1e-12)?;
                Some(if m % 2 == 0 { d } else { crate::density::Estimate { value: -d.value, error: d.error } })
            } else {
                None
            };
            let fd_rel_diff = fd.map(|d| relative(v.value, d.value));
            let pass = v.value >= -config.tol && fd_rel_diff.is_none_or(|r| r <= a.fd_tol);
            rows.push(GcmRow {
                m,
                t,
                value: v.value,
                error_estimate: v.error,
                exact: gaussian_forest_value(&model, m),
                fd_value: fd.map(|d| d.value),
                fd_error: fd.map(|d| d.error),
                fd_rel_diff,
                sign_margin: v.value,
                pass,
            });
        }
    }
    let pass = rows.iter().all(|r| r.pass);
    let csv = to_csv(&rows)?;
    let body = GcmBody {
        config,
        density: initial.describe(),
        certificate,
        rows,
    };
    let mut out = Outcome::new("gcm-check", body, pass)?;
    out.csv = Some(csv);
    Ok(out)
}

#[derive(Serialize)]
struct TreeRow {
    density: String,
    t: f64,
    tree: String,
    nodes: usize,
    code: String,
    value: f64,
    error_estimate: f64,
    sign_margin: f64,
    pass: bool,
}

#[derive(Serialize)]
struct TreeBody {
    config: RunConfig,
    rows: Vec<TreeRow>,
}

/// A random log-concave quartic `exp(−(a x⁴ + b x² + c x))`.
fn random_quartic(rng: &mut ChaCha8Rng) -> DensitySpec {
    DensitySpec::Quartic {
        a: rng.gen_range(0.05..1.0),
        b: rng.gen_range(0.0..1.0),
        c: rng.gen_range(-1.0..1.0),
        t: 0.0,
    }
}

/// `val_μ(T)` for every selected tree and density; fails if any is below `−tol`.
pub fn tree_values(a: &TreeValuesArgs, g: &Global) -> Result<Outcome> {
    let mut specs = match &a.density {
        Some(p) => read_densities(p)?,
        None => Vec::new(),
    };
    let mut rng = ChaCha8Rng::seed_from_u64(g.seed);
    specs.extend((0..a.random).map(|_| random_quartic(&mut rng)));
    if specs.is_empty() {
        bail!("give --density or --random");
    }
    let mut trees: Vec<(String, CanonicalTree)> = Vec::new();
    if a.named {
        trees.extend(NAMED_TREES.iter().map(|n| (n.to_string(), named_tree(n).expect("named"))));
    }
    if let Some((lo, hi)) = a.nodes {
        if lo < 2 || hi > MAX_COMPILE_NODES {
            bail!("node counts must lie in 2..={MAX_COMPILE_NODES}");
        }
        for k in lo..=hi {
            trees.extend(enumerate_trees(k)?.into_iter().map(|t| (t.code.clone(), t)));
        }
    }
    if trees.is_empty() {
        bail!("give --nodes or --named");
    }
    let config = RunConfig {
        command: "tree-values".into(),
        densities: specs.clone(),
        times: a.t.clone(),
        orders: Vec::new(),
        tol: g.tol.unwrap_or(1e-8),
        seed: g.seed,
    };
    config.check(usize::MAX)?;
    let cache = CompileCache::new();
    let forms = trees.iter().map(|(_, t)| cache.get(t)).collect::<Result<Vec<_>, _>>()?;
    let refs: Vec<&DiagramExpr> = forms.iter().map(|f| f.as_ref()).collect();
    let mut rows = Vec::new();
    for spec in &specs {
        let times = if a.t.is_empty() { vec![spec.time()] } else { a.t.clone() };
        for t in times {
            let model = spec.at_time(t)?;
            let grid = model.build_grid(a.grid_tol.unwrap_or(1e-10))?;
            let label = model.describe();
            for ((name, tree), v) in trees.iter().zip(eval_many(&refs, &model, &grid)?) {
                rows.push(TreeRow {
                    density: label.clone(),
                    t,
                    tree: name.clone(),
                    nodes: tree.node_count,
                    code: tree.code.clone(),
                    value: v.value,
                    error_estimate: v.error,
                    sign_margin: v.value,
                    pass: v.value >= -config.tol,
                });
            }
        }
    }
    let pass = rows.iter().all(|r| r.pass);
    let csv = to_csv(&rows)?;
    let mut out = Outcome::new("tree-values", TreeBody { config, rows }, pass)?;
    out.csv = Some(csv);
    Ok(out)
}

#[derive(Serialize)]
struct FdbRow {
    n: usize,
    t: f64,
    lhs: f64,
    lhs_error: f64,
    rhs: f64,
    terms: Vec<f64>,
    rel_diff: f64,
    /// Largest `|term_k|` with `k < n`; reported for geodesic couples.
    #[serde(skip_serializing_if = "Option::is_none")]
    off_diagonal: Option<f64>,
    pass: bool,
}

/// [`FdbRow`] with the per-k terms joined by `;`, since CSV cells are scalar.
#[derive(Serialize)]
struct FdbCsvRow {
    n: usize,
    t: f64,
    lhs: f64,
    lhs_error: f64,
    rhs: f64,
    terms: String,
    rel_diff: f64,
    off_diagonal: Option<f64>,
    pass: bool,
}

impl From<&FdbRow> for FdbCsvRow {
    fn from(r: &FdbRow) -> Self {
        Self {
            n: r.n,
            t: r.t,
            lhs: r.lhs,
            lhs_error: r.lhs_error,
            rhs: r.rhs,
            terms: r.terms.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(";"),
            rel_diff: r.rel_diff,
            off_diagonal: r.off_diagonal,
            pass: r.pass,
        }
    }
}

#[derive(Serialize)]
struct FdbBody {
    config: RunConfig,
    input: FdbConfig,
    rows: Vec<FdbRow>,
}

/// Finite differences of `F(μ_t)` against the transport chain rule.
pub fn fdb_verify(a: &VerifyArgs, g: &Global) -> Result<Outcome> {
    let mut input: FdbConfig = read_json(&a.config)?;
    if !a.m.is_empty() {
        input.orders = a.m.clone();
    }
    if !a.t.is_empty() {
        input.times = a.t.clone();
    }
    if let Some(tol) = g.tol {
        input.tol = tol;
    }
    let config = RunConfig {
        command: "fdb-verify".into(),
        densities: vec![input.density.clone()],
        times: input.times.clone(),
        orders: input.orders.clone(),
        tol: input.tol,
        seed: g.seed,
    };
    config.check(MAX_VERIFY_ORDER)?;
    let mu0 = input.density.build()?;
    let grid = grid_for(&mu0, input.grid_tol, input.panel_order)?;
    let velocity: Arc<dyn Field> = if input.geodesic {
        Arc::new(Geodesic::new(mu0.clone(), input.velocity.clone(), &grid)?)
    } else {
        Arc::new(input.velocity.clone())
    };
    let functional = match &input.functional {
        FunctionalSpec::Linear { f } => Functional::Linear(f.clone()),
        FunctionalSpec::Entropy => Functional::Entropy,
    };
    let couple = TransportCouple {
        mu0,
        velocity,
        settings: input.flow,
    };
    let mut rows = Vec::new();
    for &t in &input.times {
        for &n in &input.orders {
            let r = wasserstein_fdb(&couple, &functional, n, t, &grid)?;
            let rel_diff = relative(r.lhs.value, r.rhs);
            let off_diagonal = input
                .geodesic
                .then(|| r.terms[..n - 1].iter().fold(0.0f64, |m, x| m.max(x.abs())));
            let collapsed = off_diagonal.is_none_or(|o| o <= COLLAPSE_TOL * r.rhs.abs().max(1.0));
            rows.push(FdbRow {
                n,
                t,
                lhs: r.lhs.value,
                lhs_error: r.lhs.error,
                rhs: r.rhs,
                terms: r.terms,
                rel_diff,
                off_diagonal,
                pass: rel_diff <= input.tol && collapsed,
            });
        }
    }
    let pass = rows.iter().all(|r| r.pass);
    let table: Vec<FdbCsvRow> = rows.iter().map(FdbCsvRow::from).collect();
    let csv = to_csv(&table)?;
    let mut out = Outcome::new("fdb-verify", FdbBody { config, input, rows }, pass)?;
    out.csv = Some(csv);
    Ok(out)
}

#[derive(Serialize)]
struct EnergyRow {
    n: usize,
    formula: f64,
    fd: f64,
    fd_error: f64,
    rel_diff: f64,
    pass: bool,
}

#[derive(Serialize)]
struct HessianRow {
    transport: f64,
    integrated: f64,
    rel_diff: f64,
    pass: bool,
}

#[derive(Serialize)]
struct EnergyBody {
    config: RunConfig,
    input: EnergyConfig,
    rows: Vec<EnergyRow>,
    #[serde(skip_serializing_if = "Option::is_none")]
    hessian: Option<HessianRow>,
}

/// Derivatives of an internal energy along `(id + t v)_♯ μ₀` at `t = 0`, from the
/// pressure formula and by finite differences; optionally the two Hessian routes.
pub fn energy_verify(a: &VerifyArgs, g: &Global) -> Result<Outcome> {
    let mut input: EnergyConfig = read_json(&a.config)?;
    if !a.m.is_empty() {
        input.orders = a.m.clone();
    }
    if !a.t.is_empty() {
        bail!("energy-verify differentiates at t = 0; --t does not apply");
    }
    if let Some(tol) = g.tol {
        input.tol = tol;
    }
    let config = RunConfig {
        command: "energy-verify".into(),
        densities: vec![input.density.clone()],
        times: vec![0.0],
        orders: input.orders.clone(),
        tol: input.tol,
        seed: g.seed,
    };
    config.check(MAX_VERIFY_ORDER)?;
    if !(input.hessian_tol > 0.0) {
        bail!("hessian_tol must be positive");
    }
    let mu0 = input.density.build()?;
    let (potential, family) = input.resolved(mu0.dim)?;
    let grid = grid_for(&mu0, input.grid_tol, input.panel_order)?;
    let mut rows = Vec::new();
    for &n in &input.orders {
        let formula = energy_derivative(&mu0, &input.velocity, &potential, &family, n, &grid)?;
        let fd = energy_derivative_fd(&mu0, &input.velocity, &potential, &family, n, &grid)?;
        let rel_diff = relative(formula, fd.value);
        rows.push(EnergyRow {
            n,
            formula,
            fd: fd.value,
            fd_error: fd.error,
            rel_diff,
            pass: rel_diff <= input.tol,
        });
    }
    let hessian = if input.hessian {
        let h = hessian_two_routes(&mu0, &input.velocity, &potential, &grid)?;
        let rel_diff = relative(h.transport, h.integrated);
        Some(HessianRow {
            transport: h.transport,
            integrated: h.integrated,
            rel_diff,
            pass: rel_diff <= input.hessian_tol,
        })
    } else {
        None
    };
    let pass = rows.iter().all(|r| r.pass) && hessian.as_ref().is_none_or(|h| h.pass);
    let csv = to_csv(&rows)?;
    let mut out = Outcome::new(
        "energy-verify",
        EnergyBody {
            config,
            input,
            rows,
            hessian,
        },
        pass,
    )?;
    out.csv = Some(csv);
    Ok(out)
}
