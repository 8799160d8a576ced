use std::sync::Arc;

use crate::density::{DensityModel, DerivativeStack, QuadratureGrid};
use crate::jet::{Jet, JetSpace};

use super::{AnalyticField, Field, TransportError};

const NEWTON_TOL: f64 = 1e-14;
const NEWTON_ITERS: usize = 200;

struct Inner {
    mu0: DensityModel,
    v: AnalyticField,
    // diagonal Jacobian entries ∂_i v_i
    slopes: Vec<AnalyticField>,
    window: (f64, f64),
}

/// The displacement interpolation `μ_t = (id + t v)_♯ μ₀` for a time-independent
/// velocity whose component `i` depends on `x_i` only. Its Eulerian velocity
/// `Φ(t, x) = v(y)` with `y + t v(y) = x` satisfies `cD Φ = 0`.
#[derive(Clone)]
pub struct Geodesic(Arc<Inner>);

impl Geodesic {
    /// The window is the largest interval around 0 on which `1 + t ∂_i v_i > 0`
    /// at every node of `grid`.
    pub fn new(mu0: DensityModel, v: AnalyticField, grid: &QuadratureGrid) -> Result<Self, TransportError> {
        if v.dim != mu0.dim || v.outputs != v.dim || grid.dim != v.dim {
            return Err(TransportError::Dimension(format!(
                "velocity R^{} -> R^{} for a density on R^{}",
                v.dim, v.outputs, mu0.dim
            )));
        }
        if !v.is_time_independent() || !v.is_diagonal() {
            return Err(TransportError::Unsupported(
                "geodesics need a time-independent velocity with component i depending on x_i only".into(),
            ));
        }
        let slopes: Vec<AnalyticField> = (0..v.dim).map(|i| v.derivative(i)).collect();
        let (mut up, mut down) = (0.0f64, 0.0f64);
        for i in 0..grid.weights.len() {
            let y = grid.point(i);
            for (axis, s) in slopes.iter().enumerate() {
                let d = s.eval(0.0, y)[axis];
                up = up.max(-d);
                down = down.max(d);
            }
        }
        let hi = if up > 0.0 { 1.0 / up } else { f64::INFINITY };
        let lo = if down > 0.0 { -1.0 / down } else { f64::NEG_INFINITY };
        Ok(Self(Arc::new(Inner {
            mu0,
            v,
            slopes,
            window: (lo, hi),
        })))
    }

    pub fn window(&self) -> (f64, f64) {
        self.0.window
    }

    pub fn initial(&self) -> &DensityModel {
        &self.0.mu0
    }

    pub fn velocity(&self) -> &AnalyticField {
        &self.0.v
    }

    fn check_time(&self, t: f64) -> Result<(), TransportError> {
        let (lo, hi) = self.0.window;
        if t > lo && t < hi {
            Ok(())
        } else {
            Err(TransportError::Window { t, lo, hi })
        }
    }

    /// `x = y + t v(y)`.
    pub fn map(&self, t: f64, y: &[f64]) -> Vec<f64> {
        let v = self.0.v.eval(0.0, y);
        y.iter().zip(v).map(|(a, b)| a + t * b).collect()
    }

    /// Solves `y + t v(y) = x` component by component, by Newton's method
    /// safeguarded with bisection.
    pub fn preimage(&self, t: f64, x: &[f64]) -> Result<Vec<f64>, TransportError> {
        self.check_time(t)?;
        let inner = &*self.0;
        let mut y = x.to_vec();
        for i in 0..x.len() {
            let residual = |yi: f64, y: &mut Vec<f64>| {
                y[i] = yi;
                yi + t * inner.v.eval(0.0, y)[i] - x[i]
            };
            let slope = |yi: f64, y: &mut Vec<f64>| {
                y[i] = yi;
                1.0 + t * inner.slopes[i].eval(0.0, y)[i]
            };
            // bracket a sign change; the residual is increasing inside the window
            let mut width = 1.0 + x[i].abs();
            let (mut a, mut b) = (x[i] - width, x[i] + width);
            let mut grow = 0;
            while residual(a, &mut y) > 0.0 || residual(b, &mut y) < 0.0 {
                width *= 2.0;
                a = x[i] - width;
                b = x[i] + width;
                grow += 1;
                if grow > 60 {
                    return Err(TransportError::Inversion { x: x.to_vec() });
                }
            }
            let mut yi = x[i];
            let mut done = false;
            for _ in 0..NEWTON_ITERS {
                let f = residual(yi, &mut y);
                if f.abs() <= NEWTON_TOL * (1.0 + x[i].abs()) {
                    done = true;
                    break;
                }
                if f > 0.0 {
                    b = yi;
                } else {
                    a = yi;
                }
                let step = yi - f / slope(yi, &mut y);
                yi = if step > a && step < b { step } else { 0.5 * (a + b) };
                if b - a < 1e-15 * (1.0 + yi.abs()) {
                    done = true;
                    break;
                }
            }
            if !done {
                return Err(TransportError::Inversion { x: x.to_vec() });
            }
            y[i] = yi;
        }
        Ok(y)
    }

    /// The preimage as jets in the arguments' space.
    fn preimage_jet(&self, t: &Jet, x: &[Jet]) -> Result<Vec<Jet>, TransportError> {
        let x0: Vec<f64> = x.iter().map(Jet::value).collect();
        let y0 = self.preimage(t.value(), &x0)?;
        let space = t.space();
        let mut y: Vec<Jet> = y0.iter().map(|&v| Jet::constant(space, v)).collect();
        // Newton doubles the number of correct orders per step
        let mut correct = 1;
        while correct <= space.order() {
            let v = self.0.v.apply(t, &y)?;
            let mut next = Vec::with_capacity(y.len());
            for i in 0..y.len() {
                let s = self.0.slopes[i].apply(t, &y)?;
                let f = &(&y[i] + &(t * &v[i])) - &x[i];
                let df = (t * &s[i]).add_scalar(1.0);
                next.push(&y[i] - &f.div(&df));
            }
            y = next;
            correct *= 2;
        }
        Ok(y)
    }

    /// `log dμ_t/dx = U₀(y) − Σ log(1 + t ∂_i v_i(y))` as a scalar field.
    pub fn log_density_field(&self) -> PushforwardLogDensity {
        PushforwardLogDensity(self.clone())
    }

    /// `dμ_t/dx` at `x`.
    pub fn density(&self, t: f64, x: &[f64]) -> Result<f64, TransportError> {
        Ok(super::evaluate(&self.log_density_field(), t, x)?[0].exp())
    }

    /// Spatial derivatives of `log μ_t` at `x` up to `order`; entry 0 is `log μ_t(x)`.
    pub fn pushforward(&self, t: f64, x: &[f64], order: usize) -> Result<DerivativeStack, TransportError> {
        let u = super::local(&self.log_density_field(), t, x, order)?.remove(0);
        let dim = x.len();
        let tensors = (0..=order)
            .map(|k| {
                (0..=if dim == 2 { k } else { 0 })
                    .map(|twos| {
                        let mut alpha = vec![0; 1 + dim];
                        alpha[1] = k - twos;
                        if dim == 2 {
                            alpha[2] = twos;
                        }
                        u.partial(&alpha)
                    })
                    .collect()
            })
            .collect();
        Ok(DerivativeStack::new(dim, x, tensors))
    }
}

impl Field for Geodesic {
    fn dim(&self) -> usize {
        self.0.v.dim
    }

    fn outputs(&self) -> usize {
        self.0.v.dim
    }

    fn apply(&self, t: &Jet, x: &[Jet]) -> Result<Vec<Jet>, TransportError> {
        let y = self.preimage_jet(t, x)?;
        self.0.v.apply(t, &y)
    }
}

/// The log-density of a [`Geodesic`] interpolation.
#[derive(Clone)]
pub struct PushforwardLogDensity(Geodesic);

impl Field for PushforwardLogDensity {
    fn dim(&self) -> usize {
        self.0.dim()
    }

    fn outputs(&self) -> usize {
        1
    }

    fn apply(&self, t: &Jet, x: &[Jet]) -> Result<Vec<Jet>, TransportError> {
        let g = &self.0;
        let y = g.preimage_jet(t, x)?;
        let y0: Vec<f64> = y.iter().map(Jet::value).collect();
        let order = t.space().order();
        let stack = g.0.mu0.log_derivatives(&y0, order)?;
        let base = stack.as_jet(&JetSpace::shared(y.len(), order));
        let deltas: Vec<Jet> = y.iter().map(|yi| yi.add_scalar(-yi.value())).collect();
        let mut u = base.substitute(&deltas);
        for (i, s) in g.0.slopes.iter().enumerate() {
            let d = s.apply(t, &y)?;
            u = &u - &(t * &d[i]).add_scalar(1.0).ln();
        }
        Ok(vec![u])
    }
}
