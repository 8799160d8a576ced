//! Convective derivatives along velocity fields and the Wasserstein chain rule.
//!
//! Fields are evaluated on jets: variable 0 is time and variables `1..=d` are
//! space. A field sees arbitrary jet arguments, so nesting operators such as
//! the convective derivative only needs local expansions at one point.

mod characteristics;
mod energy;
mod fdb;
mod field;
mod geodesic;
mod heat;

use std::collections::HashMap;
use std::sync::Arc;

use num_traits::ToPrimitive;
use thiserror::Error;

use crate::bell::bell_polynomial;
use crate::density::DensityError;
use crate::evaluator::{EvalError, Potential};
use crate::jet::{Jet, JetSpace};

pub use characteristics::{flow, flow_expansion, flow_log_jacobian, FlowSettings};
pub use energy::{energy_derivative, energy_derivative_fd, hessian_two_routes, HessianRoutes};
pub use fdb::{wasserstein_fdb, FdbReport, Functional, TransportCouple};
pub use field::{AnalyticField, FieldTerm, Shape, Trig};
pub use geodesic::{Geodesic, PushforwardLogDensity};
pub use heat::HeatFlow;

#[derive(Debug, Error)]
pub enum TransportError {
    #[error(transparent)]
    Density(#[from] DensityError),
    #[error(transparent)]
    Eval(#[from] EvalError),
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("time {t} outside the validity window ({lo}, {hi})")]
    Window { t: f64, lo: f64, hi: f64 },
    #[error("inverting the transport map at {x:?} did not converge")]
    Inversion { x: Vec<f64> },
    #[error("order {0} outside the supported range")]
    Order(usize),
    #[error("invalid parameters: {0}")]
    BadParams(String),
    #[error("unsupported: {0}")]
    Unsupported(String),
}

/// A smooth map `(t, x) ↦ R^outputs` evaluated on jets.
pub trait Field: Send + Sync {
    fn dim(&self) -> usize;
    fn outputs(&self) -> usize;
    fn apply(&self, t: &Jet, x: &[Jet]) -> Result<Vec<Jet>, TransportError>;
}

/// Taylor expansion of `field` at `(t, x)` in the space-time variables.
pub fn local(field: &dyn Field, t: f64, x: &[f64], order: usize) -> Result<Vec<Jet>, TransportError> {
    if x.len() != field.dim() {
        return Err(TransportError::Dimension(format!("point {x:?} for a field in {} dimensions", field.dim())));
    }
    let space = JetSpace::shared(1 + x.len(), order);
    let tj = Jet::variable(&space, 0, t);
    let xj: Vec<Jet> = x.iter().enumerate().map(|(i, &v)| Jet::variable(&space, i + 1, v)).collect();
    field.apply(&tj, &xj)
}

/// Point value of `field`.
pub fn evaluate(field: &dyn Field, t: f64, x: &[f64]) -> Result<Vec<f64>, TransportError> {
    Ok(local(field, t, x, 0)?.iter().map(Jet::value).collect())
}

fn increments(t: &Jet, x: &[Jet]) -> Vec<Jet> {
    std::iter::once(t).chain(x).map(|j| j.add_scalar(-j.value())).collect()
}

/// Expands `build` at the value of the arguments with one extra order, then
/// re-expands the result in the arguments' space.
fn reexpand(
    t: &Jet,
    x: &[Jet],
    build: impl FnOnce(f64, &[f64], usize) -> Result<Vec<Jet>, TransportError>,
) -> Result<Vec<Jet>, TransportError> {
    let x0: Vec<f64> = x.iter().map(Jet::value).collect();
    let out = build(t.value(), &x0, t.space().order() + 1)?;
    let deltas = increments(t, x);
    Ok(out.iter().map(|j| j.substitute(&deltas)).collect())
}

/// A field given by a closure on jets.
#[derive(Clone)]
pub struct JetField {
    dim: usize,
    outputs: usize,
    f: Arc<dyn Fn(&Jet, &[Jet]) -> Vec<Jet> + Send + Sync>,
}

impl JetField {
    pub fn new(dim: usize, outputs: usize, f: impl Fn(&Jet, &[Jet]) -> Vec<Jet> + Send + Sync + 'static) -> Self {
        Self {
            dim,
            outputs,
            f: Arc::new(f),
        }
    }
}

impl Field for JetField {
    fn dim(&self) -> usize {
        self.dim
    }

    fn outputs(&self) -> usize {
        self.outputs
    }

    fn apply(&self, t: &Jet, x: &[Jet]) -> Result<Vec<Jet>, TransportError> {
        Ok((self.f)(t, x))
    }
}

/// `∂_t g + Φ·∇g` applied componentwise to local jets.
pub fn convective(g: &[Jet], phi: &[Jet]) -> Vec<Jet> {
    g.iter()
        .map(|gi| {
            phi.iter()
                .enumerate()
                .fold(gi.diff(0), |acc, (i, p)| &acc + &(p * &gi.diff(i + 1)))
        })
        .collect()
}

/// The field `cD g = ∂_t g + Φ·∇g`.
#[derive(Clone)]
pub struct ConvectiveDerivative {
    g: Arc<dyn Field>,
    phi: Arc<dyn Field>,
}

impl ConvectiveDerivative {
    pub fn new(g: Arc<dyn Field>, phi: Arc<dyn Field>) -> Result<Self, TransportError> {
        if g.dim() != phi.dim() || phi.outputs() != phi.dim() {
            return Err(TransportError::Dimension(format!(
                "field on R^{} along a velocity R^{} -> R^{}",
                g.dim(),
                phi.dim(),
                phi.outputs()
            )));
        }
        Ok(Self { g, phi })
    }
}

impl Field for ConvectiveDerivative {
    fn dim(&self) -> usize {
        self.g.dim()
    }

    fn outputs(&self) -> usize {
        self.g.outputs()
    }

    fn apply(&self, t: &Jet, x: &[Jet]) -> Result<Vec<Jet>, TransportError> {
        reexpand(t, x, |t0, x0, order| {
            let g = local(&*self.g, t0, x0, order)?;
            let phi = local(&*self.phi, t0, x0, order)?;
            Ok(convective(&g, &phi))
        })
    }
}

/// `cD^n g` along `phi`; `n = 0` returns `g`.
pub fn iterated_cd(g: Arc<dyn Field>, phi: Arc<dyn Field>, n: usize) -> Result<Arc<dyn Field>, TransportError> {
    let mut out = g;
    for _ in 0..n {
        out = Arc::new(ConvectiveDerivative::new(out, Arc::clone(&phi))?);
    }
    Ok(out)
}

/// `[Φ, cDΦ, …, cD^{n-1}Φ]`.
pub fn velocity_derivatives(phi: &Arc<dyn Field>, n: usize) -> Result<Vec<Arc<dyn Field>>, TransportError> {
    (0..n).map(|j| iterated_cd(Arc::clone(phi), Arc::clone(phi), j)).collect()
}

fn matmul(a: &[Vec<Jet>], b: &[Vec<Jet>]) -> Vec<Vec<Jet>> {
    let d = a.len();
    (0..d)
        .map(|i| {
            (0..d)
                .map(|j| (1..d).fold(&a[i][0] * &b[0][j], |acc, k| &acc + &(&a[i][k] * &b[k][j])))
                .collect()
        })
        .collect()
}

fn permutations(items: &[usize]) -> Vec<Vec<usize>> {
    if items.len() <= 1 {
        return vec![items.to_vec()];
    }
    let mut out = Vec::new();
    for i in 0..items.len() {
        let mut rest = items.to_vec();
        let head = rest.remove(i);
        for mut p in permutations(&rest) {
            p.insert(0, head);
            out.push(p);
        }
    }
    out
}

/// `Λ_n(g₁, …, g_n) = (-1)^n/n Σ_σ tr(∇g_σ1 ⋯ ∇g_σn) + (g₁ ⊗ ⋯ ⊗ g_n) : ∇^n V`
/// on local jets of the arguments; `x` are the spatial coordinates as jets of
/// the same space. The result is accurate to one order below the arguments.
pub fn lambda(args: &[&[Jet]], x: &[Jet], potential: &Potential) -> Jet {
    let n = args.len();
    let d = x.len();
    let space = x[0].space();
    assert!(n >= 1, "Λ needs at least one argument");
    let grad = |g: &[Jet]| -> Vec<Vec<Jet>> { (0..d).map(|i| (0..d).map(|j| g[j].diff(i + 1)).collect()).collect() };
    let mats: Vec<Vec<Vec<Jet>>> = args.iter().map(|g| grad(g)).collect();
    let trace = |m: &[Vec<Jet>]| (1..d).fold(m[0][0].clone(), |acc, i| &acc + &m[i][i]);

    // trace is cyclic, so fixing the first factor absorbs the 1/n
    let all_same = args.iter().all(|g| std::ptr::eq(g.as_ptr(), args[0].as_ptr()));
    let mut cyc = Jet::constant(space, 0.0);
    if all_same {
        let mut p = mats[0].clone();
        for _ in 1..n {
            p = matmul(&p, &mats[0]);
        }
        let count: usize = (1..n).product();
        cyc = trace(&p).scale(count as f64);
    } else {
        let rest: Vec<usize> = (1..n).collect();
        for perm in permutations(&rest) {
            let p = perm.iter().fold(mats[0].clone(), |acc, &k| matmul(&acc, &mats[k]));
            cyc = &cyc + &trace(&p);
        }
    }
    let sign = if n.is_multiple_of(2) { 1.0 } else { -1.0 };
    let mut out = cyc.scale(sign);

    if !potential.terms.is_empty() {
        let mut derivs: HashMap<Vec<usize>, Jet> = HashMap::new();
        for flat in 0..d.pow(n as u32) {
            let mut idx = Vec::with_capacity(n);
            let mut f = flat;
            for _ in 0..n {
                idx.push(f % d);
                f /= d;
            }
            let mut alpha = vec![0; d];
            for &i in &idx {
                alpha[i] += 1;
            }
            let dv = derivs
                .entry(alpha.clone())
                .or_insert_with(|| {
                    let mut p = potential.clone();
                    for (axis, &a) in alpha.iter().enumerate() {
                        for _ in 0..a {
                            p = p.derivative(axis);
                        }
                    }
                    p.compose(x)
                })
                .clone();
            let prod = idx.iter().enumerate().fold(dv, |acc, (k, &i)| &acc * &args[k][i]);
            out = &out + &prod;
        }
    }
    out
}

/// `Λ_n` of fields, as a scalar field.
#[derive(Clone)]
pub struct LambdaField {
    args: Vec<Arc<dyn Field>>,
    potential: Potential,
}

impl LambdaField {
    pub fn new(args: Vec<Arc<dyn Field>>, potential: Potential) -> Result<Self, TransportError> {
        let d = args.first().map(|a| a.dim()).ok_or_else(|| TransportError::BadParams("Λ of no fields".into()))?;
        if args.iter().any(|a| a.dim() != d || a.outputs() != d) || potential.dim != d {
            return Err(TransportError::Dimension("Λ needs velocity fields and a potential of one dimension".into()));
        }
        Ok(Self { args, potential })
    }
}

impl Field for LambdaField {
    fn dim(&self) -> usize {
        self.args[0].dim()
    }

    fn outputs(&self) -> usize {
        1
    }

    fn apply(&self, t: &Jet, x: &[Jet]) -> Result<Vec<Jet>, TransportError> {
        reexpand(t, x, |t0, x0, order| {
            let locals = self
                .args
                .iter()
                .map(|a| local(&**a, t0, x0, order))
                .collect::<Result<Vec<_>, _>>()?;
            let space = locals[0][0].space();
            let xj: Vec<Jet> = x0.iter().enumerate().map(|(i, &v)| Jet::variable(space, i + 1, v)).collect();
            let refs: Vec<&[Jet]> = locals.iter().map(|l| l.as_slice()).collect();
            Ok(vec![lambda(&refs, &xj, &self.potential)])
        })
    }
}

/// Point value of `Λ_n` for jets computed once per distinct argument.
fn lambda_value(locals: &[Vec<Jet>], idx: &[usize], x: &[Jet], potential: &Potential) -> f64 {
    let refs: Vec<&[Jet]> = idx.iter().map(|&j| locals[j - 1].as_slice()).collect();
    lambda(&refs, x, potential).value()
}

/// `Σ_k Σ_{B_{n,k}} c · Λ_k(cD^{j₁-1}Φ, …)` at `(t, x)`, i.e. `cD^n log ρ` with
/// `ρ = dμ/dν` computed from the velocity alone.
pub fn log_density_derivative(
    phi: &Arc<dyn Field>,
    potential: &Potential,
    n: usize,
    t: f64,
    x: &[f64],
) -> Result<f64, TransportError> {
    if n == 0 {
        return Err(TransportError::Order(0));
    }
    let fields = velocity_derivatives(phi, n)?;
    let locals = fields
        .iter()
        .map(|f| local(&**f, t, x, 1))
        .collect::<Result<Vec<_>, _>>()?;
    let space = locals[0][0].space();
    let xj: Vec<Jet> = x.iter().enumerate().map(|(i, &v)| Jet::variable(space, i + 1, v)).collect();
    let mut acc = 0.0;
    for k in 1..=n {
        for mono in bell_polynomial(n, k).monomials {
            let c = mono.coefficient.to_f64().unwrap_or(f64::INFINITY);
            acc += c * lambda_value(&locals, &mono.exponents.factor_indices(), &xj, potential);
        }
    }
    Ok(acc)
}

/// `cD^n (log μ + V)` at `(t, x)` by differentiating a log-density field directly.
pub fn log_density_derivative_direct(
    log_mu: Arc<dyn Field>,
    phi: &Arc<dyn Field>,
    potential: &Potential,
    n: usize,
    t: f64,
    x: &[f64],
) -> Result<f64, TransportError> {
    let pot = potential.clone();
    let inner = Arc::clone(&log_mu);
    let log_rho: Arc<dyn Field> = Arc::new(JetFieldTry {
        dim: log_mu.dim(),
        f: Box::new(move |t, x| {
            let u = inner.apply(t, x)?;
            Ok(vec![&u[0] + &pot.compose(x)])
        }),
    });
    let f = iterated_cd(log_rho, Arc::clone(phi), n)?;
    Ok(evaluate(&*f, t, x)?[0])
}

type TryFn = Box<dyn Fn(&Jet, &[Jet]) -> Result<Vec<Jet>, TransportError> + Send + Sync>;

struct JetFieldTry {
    dim: usize,
    f: TryFn,
}

impl Field for JetFieldTry {
    fn dim(&self) -> usize {
        self.dim
    }

    fn outputs(&self) -> usize {
        1
    }

    fn apply(&self, t: &Jet, x: &[Jet]) -> Result<Vec<Jet>, TransportError> {
        (self.f)(t, x)
    }
}
