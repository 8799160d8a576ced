//! Central finite differences with Richardson extrapolation.

use crate::density::{DensityKind, DensityModel, Estimate};

use super::EvalError;

/// Step sizes tried, each half the previous.
pub const FD_STEPS: [f64; 3] = [0.02, 0.01, 0.005];
// error of an order-6 stencil shrinks by 2^6 when h halves
const RICHARDSON: f64 = 64.0;

/// Weights of the central stencil for the `m`-th derivative with accuracy order 6,
/// on offsets `-p..=p` in units of the step (Fornberg's recursion).
pub fn central_weights(m: usize) -> Vec<f64> {
    let p = m.div_ceil(2) + 2;
    let xs: Vec<f64> = (0..=2 * p).map(|i| i as f64 - p as f64).collect();
    let n = xs.len();
    // c[j][k]: weight of node j for derivative k
    let mut c = vec![vec![0.0; m + 1]; n];
    c[0][0] = 1.0;
    let mut c1 = 1.0;
    for i in 1..n {
        let top = m.min(i);
        let mut c2 = 1.0;
        for j in 0..i {
            let c3 = xs[i] - xs[j];
            c2 *= c3;
            if j == i - 1 {
                for k in (0..=top).rev() {
                    let lower = if k > 0 { c[i - 1][k - 1] } else { 0.0 };
                    c[i][k] = c1 * (k as f64 * lower - xs[i - 1] * c[i - 1][k]) / c2;
                }
            }
            for k in (0..=top).rev() {
                let lower = if k > 0 { c[j][k - 1] } else { 0.0 };
                c[j][k] = (xs[i] * c[j][k] - k as f64 * lower) / c3;
            }
        }
        c1 = c2;
    }
    c.iter().map(|row| row[m]).collect()
}

/// `f^(m)(t)` from stencils at the steps in [`FD_STEPS`], Richardson-extrapolated
/// over the two finest pairs; the error combines their disagreement with a
/// rounding bound.
pub fn finite_difference(f: impl FnMut(f64) -> Result<f64, EvalError>, t: f64, m: usize) -> Result<Estimate, EvalError> {
    finite_difference_scaled(f, t, m, 1.0)
}

/// [`finite_difference`] with every step multiplied by `scale`.
pub fn finite_difference_scaled(
    mut f: impl FnMut(f64) -> Result<f64, EvalError>,
    t: f64,
    m: usize,
    scale: f64,
) -> Result<Estimate, EvalError> {
    if !(scale > 0.0 && scale.is_finite()) {
        return Err(EvalError::BadParams(format!("step scale {scale}")));
    }
    if m == 0 || m > 6 {
        return Err(EvalError::Order(m));
    }
    let w = central_weights(m);
    let p = (w.len() - 1) / 2;
    let mut raw = Vec::new();
    let mut rounding: f64 = 0.0;
    for h in FD_STEPS.map(|h| h * scale) {
        let mut acc = 0.0;
        let mut size = 0.0;
        for (i, wi) in w.iter().enumerate() {
            if *wi == 0.0 {
                continue;
            }
            let v = f(t + (i as f64 - p as f64) * h)?;
            acc += wi * v;
            size += (wi * v).abs();
        }
        let hm = h.powi(m as i32);
        raw.push(acc / hm);
        rounding = rounding.max(8.0 * f64::EPSILON * size / hm);
    }
    let coarse = (RICHARDSON * raw[1] - raw[0]) / (RICHARDSON - 1.0);
    let fine = (RICHARDSON * raw[2] - raw[1]) / (RICHARDSON - 1.0);
    Ok(Estimate {
        value: fine,
        error: (fine - coarse).abs() + rounding,
    })
}

/// `dᵐ/dtᵐ H(μ_t)` at `t` along the heat flow started from `initial`, by finite
/// differences on one fixed grid. Convolution nodes are shared by all stencil
/// times so the entropy is a smooth function of time.
pub fn entropy_time_derivative(initial: &DensityModel, t: f64, m: usize, grid_tol: f64) -> Result<Estimate, EvalError> {
    let reach = (m.div_ceil(2) + 2) as f64 * FD_STEPS[0];
    let path: Box<dyn Fn(f64) -> Result<DensityModel, EvalError>> = match &initial.kind {
        DensityKind::Gaussian { .. } => Box::new(move |s: f64| {
            if s == 0.0 {
                Ok(initial.clone())
            } else {
                Ok(initial.heat_evolve(s)?)
            }
        }),
        _ => {
            if t - reach <= 0.0 {
                return Err(EvalError::BadParams(format!(
                    "time {t} too close to 0 for a stencil reaching {reach}"
                )));
            }
            let offset = match &initial.kind {
                DensityKind::HeatEvolved { t, .. } => *t,
                _ => 0.0,
            };
            let anchor = initial.heat_evolve(t - reach)?;
            Box::new(move |s: f64| Ok(anchor.with_time(offset + s)?))
        }
    };
    let grid = path(t)?.build_grid(grid_tol)?;
    finite_difference(|s| Ok(path(s)?.entropy(&grid)?.value), t, m)
}
