use serde::{Deserialize, Serialize};

use crate::jet::{Jet, JetSpace};

use super::{Field, TransportError};

/// Taylor-series integration of `dX/dt = Φ(t, X)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FlowSettings {
    /// Largest time step.
    pub step: f64,
    /// Degree of the series in time.
    pub order: usize,
}

impl Default for FlowSettings {
    fn default() -> Self {
        Self { step: 0.05, order: 14 }
    }
}

impl FlowSettings {
    fn check(&self) -> Result<(), TransportError> {
        if !(self.step > 0.0 && self.step.is_finite()) || self.order < 2 {
            return Err(TransportError::BadParams(format!("flow settings {self:?}")));
        }
        Ok(())
    }
}

/// Series of the trajectory through `start` at time `t0`, by Picard iteration in
/// the time variable 0 of the start jets' space.
fn taylor_series(field: &dyn Field, t0: f64, start: &[Jet]) -> Result<Vec<Jet>, TransportError> {
    let space = start[0].space();
    let tj = Jet::variable(space, 0, t0);
    let mut x = start.to_vec();
    // each pass fixes one more time degree
    for _ in 0..=space.order() {
        let phi = field.apply(&tj, &x)?;
        x = start.iter().zip(&phi).map(|(s, p)| s + &p.antiderivative(0)).collect();
    }
    Ok(x)
}

fn integrate(field: &dyn Field, start: Vec<Jet>, t: f64, settings: &FlowSettings) -> Result<Vec<Jet>, TransportError> {
    settings.check()?;
    let steps = (t.abs() / settings.step).ceil() as usize;
    let h = if steps == 0 { 0.0 } else { t / steps as f64 };
    let mut x = start;
    for k in 0..steps {
        let series = taylor_series(field, k as f64 * h, &x)?;
        x = series.iter().map(|s| s.eval_var(0, h)).collect();
    }
    Ok(x)
}

/// `X_t(y)` for the flow starting at time 0.
pub fn flow(field: &dyn Field, y: &[f64], t: f64, settings: &FlowSettings) -> Result<Vec<f64>, TransportError> {
    let space = JetSpace::shared(1, settings.order);
    let start = y.iter().map(|&v| Jet::constant(&space, v)).collect();
    Ok(integrate(field, start, t, settings)?.iter().map(Jet::value).collect())
}

/// Series in `s − t` of `X_s(y)` around `s = t`.
pub fn flow_expansion(field: &dyn Field, y: &[f64], t: f64, settings: &FlowSettings) -> Result<Vec<Jet>, TransportError> {
    let space = JetSpace::shared(1, settings.order);
    let start = y.iter().map(|&v| Jet::constant(&space, v)).collect();
    let at = integrate(field, start, t, settings)?;
    taylor_series(field, t, &at)
}

/// `∇·Φ` along a trajectory series, as a series in the same time variable.
fn divergence_along(field: &dyn Field, t0: f64, x: &[Jet]) -> Result<Jet, TransportError> {
    let line = x[0].space();
    let dim = x.len();
    let wide = JetSpace::shared(1 + dim, line.order());
    let tau = [Jet::variable(&wide, 0, 0.0)];
    let args: Vec<Jet> = x
        .iter()
        .enumerate()
        .map(|(i, xi)| &xi.substitute(&tau) + &Jet::variable(&wide, i + 1, 0.0))
        .collect();
    let phi = field.apply(&Jet::variable(&wide, 0, t0), &args)?;
    let mut div = (0..dim).fold(Jet::constant(&wide, 0.0), |acc, i| &acc + &phi[i].diff(i + 1));
    for i in 0..dim {
        div = div.eval_var(i + 1, 0.0);
    }
    let mut back = vec![Jet::constant(line, 0.0); 1 + dim];
    back[0] = Jet::variable(line, 0, 0.0);
    Ok(div.substitute(&back))
}

/// Series in `s − t` of `X_s(y)` and of `log det ∂_y X_s(y)`, the latter from
/// Liouville's formula `d/ds log det ∂_y X_s = (∇·Φ)(s, X_s)`.
pub fn flow_log_jacobian(
    field: &dyn Field,
    y: &[f64],
    t: f64,
    settings: &FlowSettings,
) -> Result<(Vec<Jet>, Jet), TransportError> {
    settings.check()?;
    let space = JetSpace::shared(1, settings.order);
    let steps = (t.abs() / settings.step).ceil() as usize;
    let h = if steps == 0 { 0.0 } else { t / steps as f64 };
    let mut x: Vec<Jet> = y.iter().map(|&v| Jet::constant(&space, v)).collect();
    let mut log_j = 0.0;
    for k in 0..steps {
        let t0 = k as f64 * h;
        let series = taylor_series(field, t0, &x)?;
        log_j += divergence_along(field, t0, &series)?.antiderivative(0).eval_var(0, h).value();
        x = series.iter().map(|s| s.eval_var(0, h)).collect();
    }
    let series = taylor_series(field, t, &x)?;
    let growth = divergence_along(field, t, &series)?.antiderivative(0).add_scalar(log_j);
    Ok((series, growth))
}
