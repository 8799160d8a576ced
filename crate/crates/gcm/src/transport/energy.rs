use rayon::prelude::*;
use serde::Serialize;

use crate::bell::bell_polynomial;
use crate::density::{DensityModel, Estimate, Kahan, QuadratureGrid};
use crate::evaluator::{finite_difference, EvalError, Potential, PressureFamily};
use crate::jet::Jet;

use super::{lambda, local, AnalyticField, TransportError};

fn check(mu0: &DensityModel, v: &AnalyticField, potential: &Potential, grid: &QuadratureGrid) -> Result<(), TransportError> {
    if v.dim != mu0.dim || v.outputs != v.dim || potential.dim != mu0.dim || grid.dim != mu0.dim {
        return Err(TransportError::Dimension("density, velocity, potential and grid disagree".into()));
    }
    if !v.is_time_independent() {
        return Err(TransportError::BadParams("geodesic velocity must be time-independent".into()));
    }
    Ok(())
}

/// `p_k(ρ) e^{-V}` from `log ρ` and `V`.
fn weighted_pressure(fam: &PressureFamily, k: usize, log_rho: f64, v: f64) -> Result<f64, TransportError> {
    Ok(match *fam {
        PressureFamily::Entropy => {
            if k == 1 {
                (log_rho - v).exp()
            } else {
                0.0
            }
        }
        PressureFamily::Power { m } => {
            let big = m * log_rho - v;
            if big > 700.0 {
                return Err(EvalError::Overflow(format!("ρ^m e^(-V) = e^{big:.1}")).into());
            }
            (m - 1.0).powi(k as i32 - 1) * big.exp()
        }
    })
}

/// `dⁿ/dtⁿ E((id + t v)_♯ μ₀)` at `t = 0` from the pressures:
/// `∫ Σ_k B_{n,k}(Λ₁(v), …, Λ_{n−k+1}(v)) p_k(ρ) dν` with `ρ = dμ₀/dν`.
pub fn energy_derivative(
    mu0: &DensityModel,
    v: &AnalyticField,
    potential: &Potential,
    fam: &PressureFamily,
    n: usize,
    grid: &QuadratureGrid,
) -> Result<f64, TransportError> {
    check(mu0, v, potential, grid)?;
    if n == 0 || n > 6 {
        return Err(TransportError::Order(n));
    }
    let polys: Vec<_> = (1..=n).map(|k| bell_polynomial(n, k)).collect();
    let parts = (0..grid.weights.len())
        .into_par_iter()
        .map(|i| -> Result<f64, TransportError> {
            let y = grid.point(i);
            let g = local(v, 0.0, y, 1)?;
            let space = g[0].space();
            let xj: Vec<Jet> = y.iter().enumerate().map(|(a, &c)| Jet::variable(space, a + 1, c)).collect();
            let lam: Vec<f64> = (1..=n)
                .map(|j| {
                    let args: Vec<&[Jet]> = vec![g.as_slice(); j];
                    lambda(&args, &xj, potential).value()
                })
                .collect();
            let vy = potential.value(y);
            let log_rho = mu0.log_density(y) + vy;
            let mut acc = 0.0;
            for (k, poly) in polys.iter().enumerate() {
                let b = poly.eval_f64(&lam[..poly.arity()]).map_err(|e| TransportError::BadParams(e.to_string()))?;
                if b != 0.0 {
                    acc += b * weighted_pressure(fam, k + 1, log_rho, vy)?;
                }
            }
            Ok(grid.weights[i] * acc)
        })
        .collect::<Result<Vec<f64>, _>>()?;
    let mut sum = Kahan::default();
    parts.into_iter().for_each(|p| sum.add(p));
    Ok(sum.value())
}

/// The same derivative by finite differences of `E(t) = ∫ h(ρ_t ∘ T_t) e^{−V∘T_t} J_t dy`
/// with `T_t = id + t v` and `J_t = det ∇T_t`.
pub fn energy_derivative_fd(
    mu0: &DensityModel,
    v: &AnalyticField,
    potential: &Potential,
    fam: &PressureFamily,
    n: usize,
    grid: &QuadratureGrid,
) -> Result<Estimate, TransportError> {
    check(mu0, v, potential, grid)?;
    let dim = mu0.dim;
    let grads: Vec<AnalyticField> = (0..dim).map(|a| v.derivative(a)).collect();
    struct Node {
        w: f64,
        y: Vec<f64>,
        vel: Vec<f64>,
        // jac[i][j] = ∂_i v_j
        jac: Vec<Vec<f64>>,
        log_mu: f64,
    }
    let nodes: Vec<Node> = (0..grid.weights.len())
        .map(|i| {
            let y = grid.point(i).to_vec();
            Node {
                w: grid.weights[i],
                vel: v.eval(0.0, &y),
                jac: grads.iter().map(|g| g.eval(0.0, &y)).collect(),
                log_mu: mu0.log_density(&y),
                y,
            }
        })
        .collect();
    let energy = |t: f64| -> Result<f64, EvalError> {
        let mut acc = Kahan::default();
        for node in &nodes {
            let j = if dim == 1 {
                1.0 + t * node.jac[0][0]
            } else {
                (1.0 + t * node.jac[0][0]) * (1.0 + t * node.jac[1][1]) - t * t * node.jac[0][1] * node.jac[1][0]
            };
            if !(j > 0.0) {
                return Err(EvalError::BadParams(format!("transport map folds at t = {t}")));
            }
            let x: Vec<f64> = node.y.iter().zip(&node.vel).map(|(a, b)| a + t * b).collect();
            let vx = potential.value(&x);
            acc.add(node.w * j * fam.weighted(node.log_mu - j.ln() + vx, vx)?);
        }
        Ok(acc.value())
    };
    Ok(finite_difference(energy, 0.0, n)?)
}

/// The Hessian of the relative entropy `KL(μ | e^{−V})` along `Φ` computed two ways.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct HessianRoutes {
    /// `∫ tr(∇Φ ∇Φ) + Φᵀ ∇²V Φ dμ`.
    pub transport: f64,
    /// `∫ Φᵀ(∇²U + ∇²V)Φ dμ + ∫ (∇·Φ + ∇U·Φ)² dμ` with `U = log μ`.
    pub integrated: f64,
}

pub fn hessian_two_routes(
    mu: &DensityModel,
    phi: &AnalyticField,
    potential: &Potential,
    grid: &QuadratureGrid,
) -> Result<HessianRoutes, TransportError> {
    check(mu, phi, potential, grid)?;
    let dim = mu.dim;
    let pairs = (0..grid.weights.len())
        .into_par_iter()
        .map(|i| -> Result<(f64, f64), TransportError> {
            let y = grid.point(i);
            let g = local(phi, 0.0, y, 1)?;
            let space = g[0].space();
            let xj: Vec<Jet> = y.iter().enumerate().map(|(a, &c)| Jet::variable(space, a + 1, c)).collect();
            let a = lambda(&[g.as_slice(), g.as_slice()], &xj, potential).value();
            let stack = mu.log_derivatives(y, 2)?;
            let f: Vec<f64> = g.iter().map(Jet::value).collect();
            let hess = potential.jet(&crate::jet::JetSpace::shared(dim, 2), y);
            let mut quad = 0.0;
            let mut div = 0.0;
            let mut drift = 0.0;
            for p in 0..dim {
                let mut unit = vec![0; 1 + dim];
                unit[1 + p] = 1;
                div += g[p].partial(&unit);
                drift += stack.entry(&[p]) * f[p];
                for q in 0..dim {
                    let mut alpha = vec![0; dim];
                    alpha[p] += 1;
                    alpha[q] += 1;
                    quad += f[p] * f[q] * (stack.entry(&[p, q]) + hess.partial(&alpha));
                }
            }
            let w = grid.weights[i] * stack.component(0, 0).exp();
            Ok((w * a, w * (quad + (div + drift).powi(2))))
        })
        .collect::<Result<Vec<_>, _>>()?;
    let (mut a, mut b) = (Kahan::default(), Kahan::default());
    for (x, y) in pairs {
        a.add(x);
        b.add(y);
    }
    Ok(HessianRoutes {
        transport: a.value(),
        integrated: b.value(),
    })
}
