//! Numeric values of diagram integrands against a density.
//!
//! A scalar [`DiagramExpr`] is first flattened into a [`Contraction`]: in one
//! dimension every term is a product of `U^(k)`, and in the plane every
//! assignment of the two axis indices to the edges yields a product of tensor
//! components `∂₁^{k-j}∂₂^{j} U`. Equal products are merged, so evaluating at a
//! point is a short polynomial in the derivative components. Integrals are
//! then quadrature sums `Σ w_q μ(x_q) · (...)` in a fixed order.

mod energy;
mod fd;

use std::collections::{BTreeMap, HashMap};
use std::f64::consts::PI;
use std::sync::{Arc, RwLock};

use num_rational::BigRational;
use num_traits::{ToPrimitive, Zero};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::density::{DensityError, DensityKind, DensityModel, DerivativeStack, Estimate, Kahan, QuadratureGrid};
use crate::diagram::{compile_tree, rational, DiagramError, DiagramExpr, DiagramJson};
use crate::forest::{generate_forest, CanonicalTree, TreeError, WeightedForest};

pub use energy::{internal_energy, PressureFamily, PressureTerm, Potential, PotentialTerm};
pub use fd::{central_weights, entropy_time_derivative, finite_difference, finite_difference_scaled, FD_STEPS};

/// Largest forest order accepted by [`eval_forest`].
pub const MAX_EVAL_ORDER: usize = 6;
/// Largest relative normalization defect tolerated before a grid counts as stale.
pub const STALE_GRID: f64 = 1e-6;

#[derive(Debug, Error)]
pub enum EvalError {
    #[error(transparent)]
    Density(#[from] DensityError),
    #[error(transparent)]
    Diagram(#[from] DiagramError),
    #[error(transparent)]
    Tree(#[from] TreeError),
    #[error("integrand has free indices {0:?}")]
    NotScalar(Vec<String>),
    #[error("node degree {degree} exceeds the {available} derivatives available")]
    DegreeTooHigh { degree: usize, available: usize },
    #[error("grid carries mass {mass} for this density; rebuild it")]
    StaleGrid { mass: f64 },
    #[error("grid dimension {grid} does not match density dimension {density}")]
    Dimension { grid: usize, density: usize },
    #[error("order {0} outside the supported range")]
    Order(usize),
    #[error("overflow: {0}")]
    Overflow(String),
    #[error("invalid parameters: {0}")]
    BadParams(String),
}

/// A scalar diagram integrand as a polynomial in derivative-tensor components.
#[derive(Clone, Debug)]
pub struct Contraction {
    dim: usize,
    max_degree: usize,
    // coefficient and factors `(k, j)` standing for the component `∂₁^{k-j}∂₂^{j} U`
    monomials: Vec<(f64, Vec<(usize, usize)>)>,
}

impl Contraction {
    pub fn new(expr: &DiagramExpr, dim: usize) -> Result<Self, EvalError> {
        if !expr.labels().is_empty() {
            return Err(EvalError::NotScalar(expr.labels().to_vec()));
        }
        if !(1..=2).contains(&dim) {
            return Err(EvalError::BadParams(format!("contraction in dimension {dim}")));
        }
        let mut merged: BTreeMap<Vec<(usize, usize)>, BigRational> = BTreeMap::new();
        for (g, c) in expr.terms() {
            let degrees = g.degrees();
            let edges = g.edges();
            let assignments = if dim == 1 { 1usize } else { 1 << edges.len() };
            for mask in 0..assignments {
                let mut twos = vec![0; degrees.len()];
                for (e, &(u, v)) in edges.iter().enumerate() {
                    if mask >> e & 1 == 1 {
                        twos[u] += 1;
                        twos[v] += 1;
                    }
                }
                let mut factors: Vec<(usize, usize)> = degrees.iter().copied().zip(twos).collect();
                factors.sort_unstable();
                *merged.entry(factors).or_insert_with(BigRational::zero) += c;
            }
        }
        let monomials = merged
            .into_iter()
            .filter(|(_, c)| !c.is_zero())
            .map(|(f, c)| (c.to_f64().expect("finite rational coefficient"), f))
            .collect();
        Ok(Self {
            dim,
            max_degree: expr.max_degree(),
            monomials,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn max_degree(&self) -> usize {
        self.max_degree
    }

    /// Number of distinct component products.
    pub fn len(&self) -> usize {
        self.monomials.len()
    }

    pub fn is_empty(&self) -> bool {
        self.monomials.is_empty()
    }

    /// The full contraction at one point.
    pub fn at(&self, stack: &DerivativeStack) -> f64 {
        let mut acc = Kahan::default();
        for (c, factors) in &self.monomials {
            let mut p = *c;
            for &(k, j) in factors {
                p *= stack.component(k, j);
                if p == 0.0 {
                    break;
                }
            }
            acc.add(p);
        }
        acc.value()
    }
}

/// Log-derivative stacks and mass weights `w_q μ(x_q)` over a quadrature grid.
pub struct Samples {
    stacks: Vec<DerivativeStack>,
    mass_weights: Vec<f64>,
    mass: f64,
    order: usize,
}

impl Samples {
    pub fn new(model: &DensityModel, grid: &QuadratureGrid, order: usize) -> Result<Self, EvalError> {
        if grid.dim != model.dim {
            return Err(EvalError::Dimension {
                grid: grid.dim,
                density: model.dim,
            });
        }
        if order > model.max_order {
            return Err(EvalError::DegreeTooHigh {
                degree: order,
                available: model.max_order,
            });
        }
        let stacks = (0..grid.len())
            .into_par_iter()
            .map(|i| model.log_derivatives(grid.point(i), order))
            .collect::<Result<Vec<_>, _>>()?;
        let mass_weights: Vec<f64> = stacks
            .iter()
            .zip(&grid.weights)
            .map(|(s, w)| w * s.component(0, 0).exp())
            .collect();
        let mut mass = Kahan::default();
        for w in &mass_weights {
            mass.add(*w);
        }
        let mass = mass.value();
        if (mass - 1.0).abs() > STALE_GRID {
            return Err(EvalError::StaleGrid { mass });
        }
        Ok(Self {
            stacks,
            mass_weights,
            mass,
            order,
        })
    }

    pub fn len(&self) -> usize {
        self.stacks.len()
    }

    pub fn is_empty(&self) -> bool {
        self.stacks.is_empty()
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn stacks(&self) -> &[DerivativeStack] {
        &self.stacks
    }

    /// `∫ f dμ` for a pointwise function of the log-derivative stack.
    pub fn integrate_with(&self, f: impl Fn(&DerivativeStack) -> f64 + Sync) -> Estimate {
        let values: Vec<f64> = self.stacks.par_iter().map(&f).collect();
        let mut acc = Kahan::default();
        for (v, w) in values.iter().zip(&self.mass_weights) {
            acc.add(w * v);
        }
        let value = acc.value();
        Estimate {
            value,
            error: value.abs() * (self.mass - 1.0).abs(),
        }
    }

    pub fn integrate(&self, c: &Contraction) -> Result<Estimate, EvalError> {
        if c.max_degree() > self.order {
            return Err(EvalError::DegreeTooHigh {
                degree: c.max_degree(),
                available: self.order,
            });
        }
        if c.dim() != self.stacks.first().map_or(c.dim(), |s| s.dim) {
            return Err(EvalError::Dimension {
                grid: self.stacks[0].dim,
                density: c.dim(),
            });
        }
        Ok(self.integrate_with(|s| c.at(s)))
    }
}

/// `∫ (full contraction of expr) dμ` by quadrature on `grid`.
pub fn eval_diagram(expr: &DiagramExpr, model: &DensityModel, grid: &QuadratureGrid) -> Result<f64, EvalError> {
    let c = Contraction::new(expr, model.dim)?;
    if c.max_degree() > model.max_order {
        return Err(EvalError::DegreeTooHigh {
            degree: c.max_degree(),
            available: model.max_order,
        });
    }
    let samples = Samples::new(model, grid, c.max_degree())?;
    Ok(samples.integrate(&c)?.value)
}

/// Compiled closed forms of trees, keyed by canonical code.
#[derive(Debug, Default)]
pub struct CompileCache {
    forms: RwLock<HashMap<String, Arc<DiagramExpr>>>,
}

impl CompileCache {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn get(&self, tree: &CanonicalTree) -> Result<Arc<DiagramExpr>, EvalError> {
        if let Some(e) = self.forms.read().expect("cache lock").get(&tree.code) {
            return Ok(Arc::clone(e));
        }
        let compiled = Arc::new(compile_tree(tree)?);
        let mut w = self.forms.write().expect("cache lock");
        Ok(Arc::clone(w.entry(tree.code.clone()).or_insert(compiled)))
    }

    pub fn len(&self) -> usize {
        self.forms.read().expect("cache lock").len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Snapshot sorted by code, for golden files.
    pub fn to_json(&self) -> BTreeMap<String, DiagramJson> {
        self.forms
            .read()
            .expect("cache lock")
            .iter()
            .map(|(k, v)| (k.clone(), v.to_json()))
            .collect()
    }

    pub fn from_json(map: &BTreeMap<String, DiagramJson>) -> Result<Self, EvalError> {
        let mut forms = HashMap::new();
        for (k, v) in map {
            forms.insert(k.clone(), Arc::new(DiagramExpr::from_json(v)?));
        }
        Ok(Self {
            forms: RwLock::new(forms),
        })
    }
}

/// `Σ multiplicity · compile_tree(tree)` over the forest.
pub fn forest_expression(f: &WeightedForest, cache: &CompileCache) -> Result<DiagramExpr, EvalError> {
    let mut acc = DiagramExpr::zero(&[]);
    for e in f.iter() {
        let form = cache.get(&e.tree)?;
        acc = acc.add(&form.scale(&rational(e.multiplicity as i64, 1)));
    }
    Ok(acc)
}

/// `val_μ(F^n)`, which equals `(-1)^n dⁿ/dtⁿ H(μ_t)` along the heat flow.
pub fn eval_forest(
    f: &WeightedForest,
    model: &DensityModel,
    grid: &QuadratureGrid,
    cache: &CompileCache,
) -> Result<f64, EvalError> {
    if f.order == 0 || f.order > MAX_EVAL_ORDER {
        return Err(EvalError::Order(f.order));
    }
    eval_diagram(&forest_expression(f, cache)?, model, grid)
}

/// Values of several scalar integrands from one pass of derivative sampling.
pub fn eval_many(
    exprs: &[&DiagramExpr],
    model: &DensityModel,
    grid: &QuadratureGrid,
) -> Result<Vec<Estimate>, EvalError> {
    let cs = exprs
        .iter()
        .map(|e| Contraction::new(e, model.dim))
        .collect::<Result<Vec<_>, _>>()?;
    let order = cs.iter().map(Contraction::max_degree).max().unwrap_or(0);
    let samples = Samples::new(model, grid, order)?;
    cs.iter().map(|c| samples.integrate(c)).collect()
}

/// `val(F^m)` for `m = 1..=max_m`, sharing one sampling pass.
pub fn forest_values(
    max_m: usize,
    model: &DensityModel,
    grid: &QuadratureGrid,
    cache: &CompileCache,
) -> Result<Vec<Estimate>, EvalError> {
    if max_m == 0 || max_m > MAX_EVAL_ORDER {
        return Err(EvalError::Order(max_m));
    }
    let exprs = (1..=max_m)
        .map(|m| forest_expression(&generate_forest(m)?, cache))
        .collect::<Result<Vec<_>, _>>()?;
    eval_many(&exprs.iter().collect::<Vec<_>>(), model, grid)
}

/// Closed-form `val(F^m) = Σ_i (m-1)! 2^{m-1} / s_i^m` for a Gaussian with variances `s_i`.
pub fn gaussian_forest_value(model: &DensityModel, m: usize) -> Option<f64> {
    match &model.kind {
        DensityKind::Gaussian { var, .. } if m >= 1 => {
            let c: f64 = (1..m).map(|i| i as f64).product::<f64>() * 2f64.powi(m as i32 - 1);
            Some(var[..model.dim].iter().map(|s| c / s.powi(m as i32)).sum())
        }
        _ => None,
    }
}

/// One-dimensional heat-flow integrands with `val(F^n) = 2^{n-1} ∫ Γ̃_n(U) dμ`:
/// `Γ̃₃ = U‴² − 2U″³` and `Γ̃₄ = U⁗² − 12U″U‴² + 6U″⁴`.
pub fn ledoux_integrand(n: usize, stack: &DerivativeStack) -> Option<f64> {
    let u = |k: usize| stack.component(k, 0);
    match n {
        3 => Some(u(3).powi(2) - 2.0 * u(2).powi(3)),
        4 => Some(u(4).powi(2) - 12.0 * u(2) * u(3).powi(2) + 6.0 * u(2).powi(4)),
        _ => None,
    }
}

/// Entropy of a Gaussian with the given variances, `-(1/2) Σ log(2πe s_i)`.
pub fn gaussian_entropy(var: &[f64]) -> f64 {
    -0.5 * var.iter().map(|s| (2.0 * PI * std::f64::consts::E * s).ln()).sum::<f64>()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Diagram,
    Fd,
    ClosedForm,
}

/// One numeric result, as written by the command-line tools.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ResultRecord {
    pub density: String,
    pub t: f64,
    pub order: usize,
    pub value: f64,
    pub method: Method,
    pub error_estimate: f64,
}
