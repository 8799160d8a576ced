//! Probability densities on the line and the plane with high-order derivative oracles.
//!
//! Three families are supported: Gaussians with diagonal covariance, the
//! log-concave quartic `μ ∝ exp(-(a x⁴ + b x² + c x))`, and the heat-flow
//! evolution of a one-dimensional Gaussian or quartic, computed by Gaussian
//! convolution on a fixed inner grid. Derivative tensors are symmetric, so a
//! tensor of order `k` in the plane is stored by its `k + 1` distinct
//! components `∂₁^{k-j} ∂₂^{j}`.

mod quadrature;

use std::f64::consts::PI;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::jet::{Jet, JetSpace};
pub use quadrature::{composite, gauss_legendre, kahan_sum, Kahan, QuadratureGrid};

pub const MAX_ORDER: usize = 12;
pub const POSITIVITY_FLOOR: f64 = 1e-300;
const MAX_GRID_POINTS: usize = 400_000;
const PANEL_ORDER: usize = 12;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DensityError {
    #[error("derivative order {requested} exceeds the supported {max}")]
    OrderTooLarge { requested: usize, max: usize },
    #[error("heat-flow time must be positive, got {0}")]
    NonPositiveTime(f64),
    #[error("density {value:e} below the positivity floor at {x:?}")]
    BelowFloor { x: Vec<f64>, value: f64 },
    #[error("invalid parameters: {0}")]
    BadParams(String),
    #[error("unsupported: {0}")]
    Unsupported(String),
    #[error("grid mass {mass} misses 1 by more than {tol:e}")]
    Normalization { mass: f64, tol: f64 },
    #[error("no grid within {0} points meets the tolerance")]
    GridTooLarge(usize),
    #[error("point has dimension {got}, density has {expected}")]
    Dimension { expected: usize, got: usize },
}

/// Symmetric derivative tensors of orders `0..=K` at one point.
#[derive(Clone, Debug, PartialEq)]
pub struct DerivativeStack {
    pub dim: usize,
    pub x: Vec<f64>,
    tensors: Vec<Vec<f64>>,
}

impl DerivativeStack {
    pub(crate) fn new(dim: usize, x: &[f64], tensors: Vec<Vec<f64>>) -> Self {
        Self {
            dim,
            x: x.to_vec(),
            tensors,
        }
    }

    pub fn order(&self) -> usize {
        self.tensors.len() - 1
    }

    /// Distinct components of the order-`k` tensor, indexed by how many indices equal 2.
    pub fn components(&self, k: usize) -> &[f64] {
        &self.tensors[k]
    }

    /// `∂₁^{k-twos} ∂₂^{twos}`.
    pub fn component(&self, k: usize, twos: usize) -> f64 {
        self.tensors[k][twos]
    }

    /// Entry of the order-`k` tensor at a multi-index with entries in `0..dim`.
    pub fn entry(&self, idx: &[usize]) -> f64 {
        let twos = idx.iter().filter(|&&i| i == 1).count();
        self.tensors[idx.len()][twos]
    }

    /// The order-`k` tensor as a dense row-major array of `dim^k` entries.
    pub fn dense(&self, k: usize) -> Vec<f64> {
        let total = self.dim.pow(k as u32);
        (0..total)
            .map(|mut flat| {
                let mut twos = 0;
                for _ in 0..k {
                    if self.dim == 2 {
                        twos += flat % 2;
                        flat /= 2;
                    }
                }
                self.tensors[k][twos]
            })
            .collect()
    }

    /// The Taylor jet at `x` with these derivatives; `space` needs `dim` variables.
    pub fn as_jet(&self, space: &Arc<JetSpace>) -> Jet {
        Jet::from_partials(space, |alpha| {
            let k: usize = alpha.iter().sum();
            let twos = if self.dim == 2 { alpha[1] } else { 0 };
            self.tensors[k][twos]
        })
    }

    fn from_jet(dim: usize, x: &[f64], jet: &Jet, order: usize) -> Self {
        let tensors = (0..=order)
            .map(|k| {
                if dim == 1 {
                    vec![jet.partial(&[k])]
                } else {
                    (0..=k).map(|j| jet.partial(&[k - j, j])).collect()
                }
            })
            .collect();
        Self::new(dim, x, tensors)
    }
}

/// `∇^k U` from the ratios `∇^k μ / μ` by inverting `μ = e^U`; entry 0 of the
/// result is set to `log_mu`.
pub fn log_derivatives_from_ratios(ratios: &DerivativeStack, log_mu: f64) -> DerivativeStack {
    let space = JetSpace::new(ratios.dim, ratios.order());
    let u = ratios.as_jet(&space).ln();
    let mut out = DerivativeStack::from_jet(ratios.dim, &ratios.x, &u, ratios.order());
    out.tensors[0][0] = log_mu;
    out
}

/// `∇^k μ / μ` from `∇^k U` by expanding `e^U`.
pub fn ratios_from_log_derivatives(logs: &DerivativeStack) -> DerivativeStack {
    let space = JetSpace::new(logs.dim, logs.order());
    let mut shifted = logs.clone();
    shifted.tensors[0][0] = 0.0;
    let a = shifted.as_jet(&space).exp();
    DerivativeStack::from_jet(logs.dim, &logs.x, &a, logs.order())
}

// Probabilists' Hermite polynomials He_0..He_k at z.
fn hermite(z: f64, k: usize) -> Vec<f64> {
    let mut h = vec![1.0, z];
    for n in 1..k {
        let next = z * h[n] - n as f64 * h[n - 1];
        h.push(next);
    }
    h.truncate(k + 1);
    h
}

/// Nodes of the base density, carried with log quadrature weights, for convolution.
#[derive(Clone, Debug)]
pub struct InnerGrid {
    nodes: Vec<f64>,
    log_weights: Vec<f64>,
}

#[derive(Clone, Debug)]
pub enum DensityKind {
    Gaussian { mean: [f64; 2], var: [f64; 2] },
    Quartic1D { a: f64, b: f64, c: f64, log_z: f64, mean: f64, std: f64 },
    HeatEvolved { base: Box<DensityModel>, t: f64, inner: Arc<InnerGrid> },
}

#[derive(Clone, Debug)]
pub struct DensityModel {
    pub dim: usize,
    pub kind: DensityKind,
    pub max_order: usize,
}

fn check_order(k: usize) -> Result<(), DensityError> {
    if k > MAX_ORDER {
        Err(DensityError::OrderTooLarge {
            requested: k,
            max: MAX_ORDER,
        })
    } else {
        Ok(())
    }
}

// Smallest and largest x with f(x) >= f(mode) - drop, for a concave f.
fn level_interval(f: impl Fn(f64) -> f64, mode: f64, scale: f64, drop: f64) -> (f64, f64) {
    let top = f(mode);
    let find = |dir: f64| {
        let mut step = scale;
        while f(mode + dir * step) > top - drop {
            step *= 2.0;
        }
        let (mut inside, mut outside) = (0.0, step);
        for _ in 0..200 {
            let mid = 0.5 * (inside + outside);
            if f(mode + dir * mid) > top - drop {
                inside = mid;
            } else {
                outside = mid;
            }
        }
        mode + dir * outside
    };
    (find(-1.0), find(1.0))
}

impl DensityModel {
    /// Isotropic Gaussian with covariance `s·I`.
    pub fn gaussian(mean: &[f64], s: f64) -> Result<Self, DensityError> {
        Self::gaussian_diag(mean, &vec![s; mean.len()])
    }

    pub fn gaussian_diag(mean: &[f64], var: &[f64]) -> Result<Self, DensityError> {
        let dim = mean.len();
        if !(1..=2).contains(&dim) || var.len() != dim {
            return Err(DensityError::BadParams("Gaussian needs matching mean and variance in 1 or 2 dimensions".into()));
        }
        if var.iter().any(|&v| !(v > 0.0 && v.is_finite())) {
            return Err(DensityError::BadParams(format!("variances must be positive, got {var:?}")));
        }
        let mut m = [0.0; 2];
        let mut v = [1.0; 2];
        m[..dim].copy_from_slice(mean);
        v[..dim].copy_from_slice(var);
        Ok(Self {
            dim,
            kind: DensityKind::Gaussian { mean: m, var: v },
            max_order: MAX_ORDER,
        })
    }

    /// `μ(x) = exp(-(a x⁴ + b x² + c x)) / Z` with `a, b ≥ 0` not both zero.
    pub fn quartic(a: f64, b: f64, c: f64) -> Result<Self, DensityError> {
        if !(a >= 0.0 && b >= 0.0) || (a == 0.0 && b == 0.0) || !c.is_finite() {
            return Err(DensityError::BadParams(format!(
                "quartic needs a, b >= 0, not both zero; got a={a}, b={b}, c={c}"
            )));
        }
        let v = |x: f64| a * x.powi(4) + b * x * x + c * x;
        let dv = |x: f64| 4.0 * a * x.powi(3) + 2.0 * b * x + c;
        // V' is increasing, so bisection finds the mode
        let (mut lo, mut hi) = (-1.0, 1.0);
        while dv(lo) > 0.0 {
            lo *= 2.0;
        }
        while dv(hi) < 0.0 {
            hi *= 2.0;
        }
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if dv(mid) > 0.0 {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        let mode = 0.5 * (lo + hi);
        let curv = (12.0 * a * mode * mode + 2.0 * b).max(1e-300);
        let width = curv.powf(-0.5).min((1.0 / a.max(1e-300)).powf(0.25));
        let (left, right) = level_interval(|x| -v(x), mode, width, 750.0);
        let vmode = v(mode);
        // refine until the normalizer and first two moments settle
        let mut panels = 16;
        let mut prev: Option<[f64; 3]> = None;
        let moments = loop {
            let (xs, ws) = composite(left, right, panels, 20);
            let mut m = [Kahan::default(); 3];
            for (x, w) in xs.iter().zip(&ws) {
                let f = w * (vmode - v(*x)).exp();
                m[0].add(f);
                m[1].add(f * x);
                m[2].add(f * x * x);
            }
            let cur = [m[0].value(), m[1].value(), m[2].value()];
            if let Some(p) = prev {
                if (0..3).all(|i| (cur[i] - p[i]).abs() <= 1e-15 * cur[0].max(cur[i].abs())) {
                    break cur;
                }
            }
            prev = Some(cur);
            panels *= 2;
            if panels > 1 << 14 {
                break cur;
            }
        };
        let log_z = moments[0].ln() - vmode;
        let mean = moments[1] / moments[0];
        let std = (moments[2] / moments[0] - mean * mean).sqrt();
        Ok(Self {
            dim: 1,
            kind: DensityKind::Quartic1D {
                a,
                b,
                c,
                log_z,
                mean,
                std,
            },
            max_order: MAX_ORDER,
        })
    }

    /// Explicit convolution wrapper `μ_t = μ * N(0, 2t)` of a one-dimensional base.
    pub fn heat_evolved(base: &DensityModel, t: f64) -> Result<Self, DensityError> {
        if !(t > 0.0) {
            return Err(DensityError::NonPositiveTime(t));
        }
        if base.dim != 1 {
            return Err(DensityError::Unsupported("convolution wrapper is one-dimensional".into()));
        }
        let (base, t) = match &base.kind {
            DensityKind::HeatEvolved { base, t: t0, .. } => ((**base).clone(), t0 + t),
            _ => (base.clone(), t),
        };
        let sigma = (2.0 * t).sqrt();
        let scale = base.scales()[0];
        let center = base.centers()[0];
        let (lo, hi) = level_interval(|x| base.log_density(&[x]), center, scale, 80.0);
        let width = sigma.min(scale) / 2.0;
        let panels = ((hi - lo) / width).ceil().max(8.0) as usize;
        let (nodes, weights) = composite(lo, hi, panels, 16);
        let log_weights = nodes.iter().zip(&weights).map(|(y, w)| w.ln() + base.log_density(&[*y])).collect();
        Ok(Self {
            dim: 1,
            kind: DensityKind::HeatEvolved {
                base: Box::new(base),
                t,
                inner: Arc::new(InnerGrid { nodes, log_weights }),
            },
            max_order: MAX_ORDER,
        })
    }

    /// The heat flow run for time `t`: closed form for Gaussians, convolution otherwise.
    pub fn heat_evolve(&self, t: f64) -> Result<Self, DensityError> {
        if !(t > 0.0) {
            return Err(DensityError::NonPositiveTime(t));
        }
        match &self.kind {
            DensityKind::Gaussian { mean, var } => {
                let v: Vec<f64> = var[..self.dim].iter().map(|v| v + 2.0 * t).collect();
                Self::gaussian_diag(&mean[..self.dim], &v)
            }
            _ => Self::heat_evolved(self, t),
        }
    }

    /// The same heat-flow path at absolute time `t`. A convolution wrapper keeps its
    /// nodes, so values depend smoothly on `t`; this is what finite differences in
    /// time need. The nodes were sized for the original time and stay accurate for
    /// any later one.
    pub fn with_time(&self, t: f64) -> Result<Self, DensityError> {
        if !(t > 0.0) {
            return Err(DensityError::NonPositiveTime(t));
        }
        match &self.kind {
            DensityKind::HeatEvolved { base, inner, .. } => Ok(Self {
                dim: 1,
                kind: DensityKind::HeatEvolved {
                    base: base.clone(),
                    t,
                    inner: Arc::clone(inner),
                },
                max_order: self.max_order,
            }),
            _ => Err(DensityError::Unsupported("only heat-evolved densities carry a time".into())),
        }
    }

    /// Image under `x ↦ λx`.
    pub fn dilate(&self, lambda: f64) -> Result<Self, DensityError> {
        if !(lambda > 0.0) {
            return Err(DensityError::BadParams(format!("dilation factor must be positive, got {lambda}")));
        }
        match &self.kind {
            DensityKind::Gaussian { mean, var } => {
                let m: Vec<f64> = mean[..self.dim].iter().map(|m| m * lambda).collect();
                let v: Vec<f64> = var[..self.dim].iter().map(|v| v * lambda * lambda).collect();
                Self::gaussian_diag(&m, &v)
            }
            DensityKind::Quartic1D { a, b, c, .. } => Self::quartic(a / lambda.powi(4), b / lambda.powi(2), c / lambda),
            DensityKind::HeatEvolved { base, t, .. } => Self::heat_evolved(&base.dilate(lambda)?, t * lambda * lambda),
        }
    }

    /// Per-axis centre used to place grids.
    pub fn centers(&self) -> Vec<f64> {
        match &self.kind {
            DensityKind::Gaussian { mean, .. } => mean[..self.dim].to_vec(),
            DensityKind::Quartic1D { mean, .. } => vec![*mean],
            DensityKind::HeatEvolved { base, .. } => base.centers(),
        }
    }

    /// Per-axis standard deviation.
    pub fn scales(&self) -> Vec<f64> {
        match &self.kind {
            DensityKind::Gaussian { var, .. } => var[..self.dim].iter().map(|v| v.sqrt()).collect(),
            DensityKind::Quartic1D { std, .. } => vec![*std],
            DensityKind::HeatEvolved { base, t, .. } => vec![(base.scales()[0].powi(2) + 2.0 * t).sqrt()],
        }
    }

    pub fn describe(&self) -> String {
        match &self.kind {
            DensityKind::Gaussian { mean, var } => {
                format!("gaussian(dim={}, mean={:?}, var={:?})", self.dim, &mean[..self.dim], &var[..self.dim])
            }
            DensityKind::Quartic1D { a, b, c, .. } => format!("quartic(a={a}, b={b}, c={c})"),
            DensityKind::HeatEvolved { base, t, .. } => format!("heat({}, t={t})", base.describe()),
        }
    }

    fn check_dim(&self, x: &[f64]) -> Result<(), DensityError> {
        if x.len() != self.dim {
            Err(DensityError::Dimension {
                expected: self.dim,
                got: x.len(),
            })
        } else {
            Ok(())
        }
    }

    pub fn log_density(&self, x: &[f64]) -> f64 {
        match &self.kind {
            DensityKind::Gaussian { mean, var } => (0..self.dim)
                .map(|i| -(x[i] - mean[i]).powi(2) / (2.0 * var[i]) - 0.5 * (2.0 * PI * var[i]).ln())
                .sum(),
            DensityKind::Quartic1D { a, b, c, log_z, .. } => {
                let x = x[0];
                -(a * x.powi(4) + b * x * x + c * x) - log_z
            }
            DensityKind::HeatEvolved { t, inner, .. } => self.posterior(inner, *t, x[0], 0).0,
        }
    }

    pub fn density(&self, x: &[f64]) -> f64 {
        self.log_density(x).exp()
    }

    // Log density at x and the posterior central moments 0..=k of y given x, with
    // entry 1 holding the posterior mean.
    fn posterior(&self, inner: &InnerGrid, t: f64, x: f64, k: usize) -> (f64, Vec<f64>) {
        let s2 = 2.0 * t;
        let logs: Vec<f64> = inner
            .nodes
            .iter()
            .zip(&inner.log_weights)
            .map(|(y, lw)| lw - (x - y).powi(2) / (2.0 * s2))
            .collect();
        let top = logs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let p: Vec<f64> = logs.iter().map(|l| (l - top).exp()).collect();
        let total = kahan_sum(p.iter().copied());
        let log_mu = top + total.ln() - 0.5 * (2.0 * PI * s2).ln();
        let mut moments = vec![1.0];
        if k >= 1 {
            let mean = kahan_sum(p.iter().zip(&inner.nodes).map(|(p, y)| p * y)) / total;
            moments.push(mean);
            for r in 2..=k {
                let m = kahan_sum(p.iter().zip(&inner.nodes).map(|(p, y)| p * (y - mean).powi(r as i32))) / total;
                moments.push(m);
            }
        }
        (log_mu, moments)
    }

    /// `∇^k μ(x)` for `k = 0..=order`.
    pub fn mu_derivatives(&self, x: &[f64], order: usize) -> Result<DerivativeStack, DensityError> {
        check_order(order)?;
        self.check_dim(x)?;
        match &self.kind {
            DensityKind::Gaussian { mean, var } => {
                let axis: Vec<Vec<f64>> = (0..self.dim)
                    .map(|i| {
                        let sd = var[i].sqrt();
                        let z = (x[i] - mean[i]) / sd;
                        let phi = (-0.5 * z * z).exp() / (2.0 * PI * var[i]).sqrt();
                        hermite(z, order)
                            .iter()
                            .enumerate()
                            .map(|(k, h)| (-1.0 / sd).powi(k as i32) * h * phi)
                            .collect()
                    })
                    .collect();
                let tensors = (0..=order)
                    .map(|k| {
                        if self.dim == 1 {
                            vec![axis[0][k]]
                        } else {
                            (0..=k).map(|j| axis[0][k - j] * axis[1][j]).collect()
                        }
                    })
                    .collect();
                Ok(DerivativeStack::new(self.dim, x, tensors))
            }
            DensityKind::Quartic1D { .. } => {
                let logs = self.log_derivatives(x, order)?;
                let mu = self.density(x);
                let ratios = ratios_from_log_derivatives(&logs);
                let tensors = (0..=order).map(|k| vec![mu * ratios.component(k, 0)]).collect();
                Ok(DerivativeStack::new(1, x, tensors))
            }
            DensityKind::HeatEvolved { t, inner, .. } => {
                // ∂^k μ_t(x) = ∫ (-1/σ)^k He_k((x-y)/σ) G_σ(x-y) dμ₀(y), σ² = 2t
                let sigma = (2.0 * t).sqrt();
                let x0 = x[0];
                let logs: Vec<f64> = inner
                    .nodes
                    .iter()
                    .zip(&inner.log_weights)
                    .map(|(y, lw)| lw - (x0 - y).powi(2) / (2.0 * sigma * sigma))
                    .collect();
                let top = logs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
                let mut acc = vec![Kahan::default(); order + 1];
                for (y, l) in inner.nodes.iter().zip(&logs) {
                    let p = (l - top).exp();
                    let he = hermite((x0 - y) / sigma, order);
                    for k in 0..=order {
                        acc[k].add(p * he[k]);
                    }
                }
                let norm = (top - 0.5 * (2.0 * PI * sigma * sigma).ln()).exp();
                let tensors = (0..=order)
                    .map(|k| vec![norm * (-1.0 / sigma).powi(k as i32) * acc[k].value()])
                    .collect();
                Ok(DerivativeStack::new(1, x, tensors))
            }
        }
    }

    /// `∇^k U` for `U = log μ` and `k = 0..=order`; entry 0 is `U(x)` itself.
    pub fn log_derivatives(&self, x: &[f64], order: usize) -> Result<DerivativeStack, DensityError> {
        check_order(order)?;
        self.check_dim(x)?;
        let log_mu = self.log_density(x);
        if log_mu < POSITIVITY_FLOOR.ln() {
            return Err(DensityError::BelowFloor {
                x: x.to_vec(),
                value: log_mu.exp(),
            });
        }
        let tensors = match &self.kind {
            DensityKind::Gaussian { mean, var } => (0..=order)
                .map(|k| match k {
                    0 => vec![log_mu],
                    1 => (0..self.dim).map(|i| -(x[i] - mean[i]) / var[i]).collect(),
                    2 if self.dim == 1 => vec![-1.0 / var[0]],
                    2 => vec![-1.0 / var[0], 0.0, -1.0 / var[1]],
                    _ => vec![0.0; if self.dim == 1 { 1 } else { k + 1 }],
                })
                .collect(),
            DensityKind::Quartic1D { a, b, c, .. } => {
                let x = x[0];
                let d = [
                    log_mu,
                    -(4.0 * a * x.powi(3) + 2.0 * b * x + c),
                    -(12.0 * a * x * x + 2.0 * b),
                    -24.0 * a * x,
                    -24.0 * a,
                ];
                (0..=order).map(|k| vec![d.get(k).copied().unwrap_or(0.0)]).collect()
            }
            DensityKind::HeatEvolved { t, inner, .. } => {
                // U = log ∫ G(x-y) dμ₀(y); its derivatives are scaled posterior cumulants:
                // U' = (κ₁ - x)/σ², U'' = -1/σ² + κ₂/σ⁴, U^(k) = κ_k/σ^{2k}
                let s2 = 2.0 * t;
                let (_, moments) = self.posterior(inner, *t, x[0], order.max(1));
                let space = JetSpace::new(1, order.max(1));
                let mgf = Jet::from_partials(&space, |a| match a[0] {
                    0 => 1.0,
                    1 => 0.0,
                    r => moments[r],
                });
                let cumulants = mgf.ln();
                (0..=order)
                    .map(|k| {
                        vec![match k {
                            0 => log_mu,
                            1 => (moments[1] - x[0]) / s2,
                            2 => -1.0 / s2 + cumulants.partial(&[2]) / (s2 * s2),
                            _ => cumulants.partial(&[k]) / s2.powi(k as i32),
                        }]
                    })
                    .collect()
            }
        };
        Ok(DerivativeStack::new(self.dim, x, tensors))
    }

    /// Largest eigenvalue of `∇²U` at `x`.
    pub fn max_hessian_eigenvalue(&self, x: &[f64]) -> Result<f64, DensityError> {
        let d = self.log_derivatives(x, 2)?;
        let h = d.components(2);
        Ok(if self.dim == 1 {
            h[0]
        } else {
            let (a, b, c) = (h[0], h[1], h[2]);
            0.5 * (a + c) + (0.25 * (a - c).powi(2) + b * b).sqrt()
        })
    }

    /// Composite Gauss–Legendre grid on a box losing less than `tol / 10` of the mass.
    pub fn build_grid(&self, tol: f64) -> Result<QuadratureGrid, DensityError> {
        self.build_grid_with(tol, PANEL_ORDER)
    }

    /// As [`Self::build_grid`] with `panel_order` nodes per panel; low orders
    /// suit smooth integrands that are expensive per node.
    pub fn build_grid_with(&self, tol: f64, panel_order: usize) -> Result<QuadratureGrid, DensityError> {
        if !(2..=64).contains(&panel_order) {
            return Err(DensityError::BadParams(format!("panel order {panel_order} outside 2..=64")));
        }
        if !(tol > 0.0 && tol <= 1e-3) {
            return Err(DensityError::BadParams(format!("grid tolerance must lie in (0, 1e-3], got {tol}")));
        }
        let budget = tol / (10.0 * self.dim as f64);
        let mut bounds = Vec::new();
        let mut lost = 0.0;
        for axis in 0..self.dim {
            let (lo, hi, tail) = self.axis_box(axis, budget);
            bounds.push((lo, hi));
            lost += tail;
        }
        let scales = self.scales();
        let mut refine = 1.0;
        loop {
            let axes: Vec<(Vec<f64>, Vec<f64>)> = bounds
                .iter()
                .zip(&scales)
                .map(|(&(lo, hi), s)| {
                    let panels = ((hi - lo) / (s * refine)).ceil().max(4.0) as usize;
                    composite(lo, hi, panels, panel_order)
                })
                .collect();
            let count: usize = axes.iter().map(|a| a.0.len()).product();
            if count > MAX_GRID_POINTS {
                return Err(DensityError::GridTooLarge(MAX_GRID_POINTS));
            }
            let grid = QuadratureGrid::tensor(&axes, lost, bounds.clone());
            let mass = self.mass(&grid);
            if (mass - 1.0).abs() <= tol {
                return Ok(grid);
            }
            refine /= 2.0;
            if refine < 1.0 / 64.0 {
                return Err(DensityError::Normalization { mass, tol });
            }
        }
    }

    // Box on one axis with both tails below `budget / 2`, and the bound on the tails.
    fn axis_box(&self, axis: usize, budget: f64) -> (f64, f64, f64) {
        let center = self.centers()[axis];
        let scale = self.scales()[axis];
        // marginal log density and its derivative along the axis
        let marginal = |x: f64| -> (f64, f64) {
            match &self.kind {
                DensityKind::Gaussian { mean, var } => {
                    let v = var[axis];
                    (-(x - mean[axis]).powi(2) / (2.0 * v) - 0.5 * (2.0 * PI * v).ln(), -(x - mean[axis]) / v)
                }
                _ => {
                    let d = self.log_derivatives(&[x], 1).expect("axis scan stays above the floor");
                    (d.component(0, 0), d.component(1, 0))
                }
            }
        };
        // for a log-concave density the tail beyond x is at most μ(x)/|U'(x)|
        let side = |dir: f64| -> (f64, f64) {
            let mut x = center;
            loop {
                x += dir * scale / 4.0;
                let (lu, du) = marginal(x);
                let inward = -dir * du;
                if inward > 0.0 {
                    let tail = lu.exp() / inward;
                    if tail < budget / 2.0 {
                        return (x, tail);
                    }
                }
            }
        };
        let (lo, tl) = side(-1.0);
        let (hi, th) = side(1.0);
        (lo, hi, tl + th)
    }

    /// `Σ w μ` over the grid.
    pub fn mass(&self, grid: &QuadratureGrid) -> f64 {
        kahan_sum((0..grid.len()).map(|i| grid.weights[i] * self.density(grid.point(i))))
    }

    /// `H(μ) = ∫ μ log μ` with an error estimate from the normalization defect and the tails.
    pub fn entropy(&self, grid: &QuadratureGrid) -> Result<Estimate, DensityError> {
        let mut h = Kahan::default();
        let mut mass = Kahan::default();
        let mut deepest: f64 = 0.0;
        for i in 0..grid.len() {
            let l = self.log_density(grid.point(i));
            let m = l.exp();
            h.add(grid.weights[i] * m * l);
            mass.add(grid.weights[i] * m);
            deepest = deepest.max(-l);
        }
        let defect = (mass.value() - 1.0).abs();
        if defect > 1e-3 {
            return Err(DensityError::Normalization {
                mass: mass.value(),
                tol: 1e-3,
            });
        }
        Ok(Estimate {
            value: h.value(),
            // the discarded tails carry |log μ| at least as large as anywhere inside
            error: defect + grid.truncation_bound * (1.0 + deepest),
        })
    }
}

/// A numerical value with an error estimate.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub value: f64,
    pub error: f64,
}

/// Density configuration as read from JSON, e.g.
/// `{"kind": "quartic", "a": 0.25, "b": 0.5, "c": 0.0, "t": 0.5}`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum DensitySpec {
    Gaussian {
        #[serde(default)]
        mean: Option<Vec<f64>>,
        #[serde(default)]
        var: Option<Vec<f64>>,
        #[serde(default)]
        s: Option<f64>,
        #[serde(default)]
        dim: Option<usize>,
        #[serde(default)]
        t: f64,
    },
    Quartic {
        a: f64,
        b: f64,
        #[serde(default)]
        c: f64,
        #[serde(default)]
        t: f64,
    },
}

impl DensitySpec {
    pub fn time(&self) -> f64 {
        match self {
            Self::Gaussian { t, .. } | Self::Quartic { t, .. } => *t,
        }
    }

    /// The initial density, before any heat flow.
    pub fn initial(&self) -> Result<DensityModel, DensityError> {
        match self {
            Self::Gaussian { mean, var, s, dim, .. } => {
                let dim = dim
                    .or(mean.as_ref().map(Vec::len))
                    .or(var.as_ref().map(Vec::len))
                    .unwrap_or(1);
                let mean = mean.clone().unwrap_or_else(|| vec![0.0; dim]);
                let var = match (var, s) {
                    (Some(v), None) => v.clone(),
                    (None, Some(s)) => vec![*s; dim],
                    (None, None) => vec![1.0; dim],
                    (Some(_), Some(_)) => return Err(DensityError::BadParams("give either var or s, not both".into())),
                };
                DensityModel::gaussian_diag(&mean, &var)
            }
            Self::Quartic { a, b, c, .. } => DensityModel::quartic(*a, *b, *c),
        }
    }

    /// The initial density evolved by the heat flow to time `t` (a zero time is the identity).
    pub fn at_time(&self, t: f64) -> Result<DensityModel, DensityError> {
        let m = self.initial()?;
        if t == 0.0 {
            Ok(m)
        } else {
            m.heat_evolve(t)
        }
    }

    pub fn build(&self) -> Result<DensityModel, DensityError> {
        self.at_time(self.time())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn standard_gaussian_at_origin() {
        let g = DensityModel::gaussian(&[0.0], 1.0).unwrap();
        let d = g.mu_derivatives(&[0.0], 2).unwrap();
        let c = 1.0 / (2.0 * PI).sqrt();
        assert!((d.component(0, 0) - c).abs() < 1e-16);
        assert_eq!(d.component(1, 0), 0.0);
        assert!((d.component(2, 0) + c).abs() < 1e-16);
    }

    #[test]
    fn quartic_score() {
        let q = DensityModel::quartic(0.25, 0.5, 0.0).unwrap();
        let d = q.mu_derivatives(&[1.0], 1).unwrap();
        assert!((d.component(1, 0) / d.component(0, 0) + 2.0).abs() < 1e-14);
        let u = q.log_derivatives(&[1.0], 4).unwrap();
        assert_eq!(u.component(3, 0), -6.0);
        assert_eq!(u.component(4, 0), -6.0);
    }

    #[test]
    fn rejects_bad_input() {
        let g = DensityModel::gaussian(&[0.0], 1.0).unwrap();
        assert!(matches!(g.heat_evolve(0.0), Err(DensityError::NonPositiveTime(_))));
        assert!(matches!(g.mu_derivatives(&[0.0], MAX_ORDER + 1), Err(DensityError::OrderTooLarge { .. })));
        assert!(DensityModel::quartic(-1.0, 0.0, 0.0).is_err());
        assert!(g.build_grid(1e-2).is_err());
    }

    #[test]
    fn spec_parses() {
        let s: DensitySpec = serde_json::from_str(r#"{"kind":"quartic","a":0.25,"b":0.5,"t":0.5}"#).unwrap();
        assert_eq!(s.time(), 0.5);
        assert!(matches!(s.build().unwrap().kind, DensityKind::HeatEvolved { .. }));
        let g: DensitySpec = serde_json::from_str(r#"{"kind":"gaussian","dim":2,"s":1.0,"t":0.5}"#).unwrap();
        assert_eq!(g.build().unwrap().scales(), vec![2f64.sqrt(); 2]);
    }
}
