use std::sync::Arc;

use num_traits::ToPrimitive;
use rayon::prelude::*;
use serde::Serialize;

use crate::bell::bell_polynomial;
use crate::density::{DensityModel, Estimate, Kahan, QuadratureGrid};
use crate::evaluator::{finite_difference_scaled, Potential};
use crate::jet::Jet;

use super::{lambda, local, velocity_derivatives, AnalyticField, Field, FlowSettings, TransportError};

// F(μ_s) comes from trajectory series accurate well beyond the default steps,
// and wider steps keep rounding out of the fourth and fifth differences
const LHS_STEP_SCALE: f64 = 2.0;

/// A functional on probability measures.
#[derive(Clone, Debug)]
pub enum Functional {
    /// `F(μ) = ∫ f dμ` for a time-independent scalar `f`.
    Linear(AnalyticField),
    /// `H(μ) = ∫ log μ dμ`, one-dimensional only.
    Entropy,
}

/// A curve of measures `μ_t = (X_t)_♯ μ₀` driven by a velocity field.
#[derive(Clone)]
pub struct TransportCouple {
    pub mu0: DensityModel,
    pub velocity: Arc<dyn Field>,
    pub settings: FlowSettings,
}

/// Both sides of the chain rule for `dⁿ/dtⁿ F(μ_t)`.
#[derive(Clone, Debug, Serialize)]
pub struct FdbReport {
    pub n: usize,
    pub t: f64,
    /// Finite differences of `F(μ_s)` in `s`.
    pub lhs: Estimate,
    /// `Σ_k` of [`Self::terms`].
    pub rhs: f64,
    /// Entry `k − 1` holds `Σ_{B_{n,k}} c · D^kF(μ_t)(cD^{j₁−1}Φ, …)`.
    pub terms: Vec<f64>,
}

fn contract(grads: &Jet, args: &[&[f64]], dim: usize) -> f64 {
    let k = args.len();
    let mut acc = 0.0;
    for flat in 0..dim.pow(k as u32) {
        let mut alpha = vec![0usize; 1 + dim];
        let mut f = flat;
        let mut prod = 1.0;
        for a in args {
            let i = f % dim;
            f /= dim;
            alpha[1 + i] += 1;
            prod *= a[i];
        }
        acc += prod * grads.partial(&alpha);
    }
    acc
}

/// Compares finite differences of `F(μ_s)` at `s = t` with the chain rule
/// `Σ_k Σ_{B_{n,k}} c · D^kF(μ_t)(cD^{j₁−1}Φ, …, cD^{j_k−1}Φ)`. `grid` must
/// integrate against `μ₀`.
pub fn wasserstein_fdb(
    couple: &TransportCouple,
    functional: &Functional,
    n: usize,
    t: f64,
    grid: &QuadratureGrid,
) -> Result<FdbReport, TransportError> {
    if n == 0 || n > 5 {
        return Err(TransportError::Order(n));
    }
    let dim = couple.mu0.dim;
    if couple.velocity.dim() != dim || couple.velocity.outputs() != dim || grid.dim != dim {
        return Err(TransportError::Dimension("couple, velocity and grid disagree".into()));
    }
    if let Functional::Linear(f) = functional {
        if f.dim != dim || f.outputs != 1 || !f.is_time_independent() {
            return Err(TransportError::BadParams("linear functional needs a time-independent scalar".into()));
        }
    }
    if matches!(functional, Functional::Entropy) && dim != 1 {
        return Err(TransportError::Unsupported("entropy chain rule is one-dimensional".into()));
    }
    let phi = &couple.velocity;
    let fields = velocity_derivatives(phi, n)?;
    let potential = Potential::zero(dim);
    let polys: Vec<_> = (1..=n).map(|k| bell_polynomial(n, k)).collect();

    struct Node {
        weight: f64,
        // trajectory, then the log-Jacobian for the entropy, as series around t
        series: Vec<Jet>,
        terms: Vec<f64>,
    }

    let nodes: Vec<Node> = (0..grid.weights.len())
        .into_par_iter()
        .map(|i| -> Result<Node, TransportError> {
            let y = grid.point(i);
            let weight = grid.weights[i] * couple.mu0.density(y);
            let series = match functional {
                Functional::Linear(_) => super::flow_expansion(&**phi, y, t, &couple.settings)?,
                Functional::Entropy => {
                    let (path, log_j) = super::flow_log_jacobian(&**phi, y, t, &couple.settings)?;
                    vec![path[0].clone(), log_j]
                }
            };
            let x: Vec<f64> = series[..dim].iter().map(Jet::value).collect();
            let order = if matches!(functional, Functional::Linear(_)) { 0 } else { 1 };
            let locals = fields
                .iter()
                .map(|f| local(&**f, t, &x, order))
                .collect::<Result<Vec<_>, _>>()?;
            let mut terms = vec![0.0; n];
            match functional {
                Functional::Linear(f) => {
                    let grads = local(f, t, &x, n)?.remove(0);
                    let vals: Vec<Vec<f64>> = locals.iter().map(|l| l.iter().map(Jet::value).collect()).collect();
                    for (k, poly) in polys.iter().enumerate() {
                        for mono in &poly.monomials {
                            let args: Vec<&[f64]> =
                                mono.exponents.factor_indices().iter().map(|&j| vals[j - 1].as_slice()).collect();
                            terms[k] += mono.coefficient.to_f64().unwrap_or(f64::INFINITY) * contract(&grads, &args, dim);
                        }
                    }
                }
                Functional::Entropy => {
                    let space = locals[0][0].space();
                    let xj = vec![Jet::variable(space, 1, x[0])];
                    for (k, poly) in polys.iter().enumerate() {
                        for mono in &poly.monomials {
                            let refs: Vec<&[Jet]> =
                                mono.exponents.factor_indices().iter().map(|&j| locals[j - 1].as_slice()).collect();
                            terms[k] += mono.coefficient.to_f64().unwrap_or(f64::INFINITY)
                                * lambda(&refs, &xj, &potential).value();
                        }
                    }
                }
            }
            Ok(Node { weight, series, terms })
        })
        .collect::<Result<_, _>>()?;

    let value_at = |s: f64| -> f64 {
        let off = s - t;
        let mut acc = Kahan::default();
        for node in &nodes {
            let v = match functional {
                Functional::Linear(f) => {
                    let x: Vec<f64> = node.series.iter().map(|j| j.eval_var(0, off).value()).collect();
                    f.eval(0.0, &x)[0]
                }
                // H(μ_s) = H(μ₀) − ∫ log det ∂_y X_s dμ₀, and the constant drops out
                Functional::Entropy => -node.series[1].eval_var(0, off).value(),
            };
            acc.add(node.weight * v);
        }
        acc.value()
    };
    let lhs = finite_difference_scaled(|s| Ok(value_at(s)), t, n, LHS_STEP_SCALE)?;
    let mut terms = vec![0.0; n];
    for node in &nodes {
        for (k, v) in node.terms.iter().enumerate() {
            terms[k] += node.weight * v;
        }
    }
    Ok(FdbReport {
        n,
        t,
        lhs,
        rhs: terms.iter().sum(),
        terms,
    })
}
