use crate::density::{DensityModel, MAX_ORDER};
use crate::jet::{Jet, JetSpace};

use super::{reexpand, Field, TransportError};

/// The heat flow `∂_t μ = ∂²_x μ` from a one-dimensional initial density, whose
/// velocity is `Φ = −∂_x log μ_t`.
#[derive(Clone, Debug)]
pub struct HeatFlow {
    initial: DensityModel,
}

/// `log μ_t(x)` as a field.
#[derive(Clone, Debug)]
pub struct HeatLogDensity(HeatFlow);

/// `−∂_x log μ_t(x)` as a field.
#[derive(Clone, Debug)]
pub struct HeatVelocity(HeatFlow);

impl HeatFlow {
    pub fn new(initial: DensityModel) -> Result<Self, TransportError> {
        if initial.dim != 1 {
            return Err(TransportError::Unsupported("heat-flow fields are one-dimensional".into()));
        }
        Ok(Self { initial })
    }

    pub fn log_density(&self) -> HeatLogDensity {
        HeatLogDensity(self.clone())
    }

    pub fn velocity(&self) -> HeatVelocity {
        HeatVelocity(self.clone())
    }

    fn at(&self, t: f64) -> Result<DensityModel, TransportError> {
        if t < 0.0 {
            return Err(TransportError::BadParams(format!("heat flow at negative time {t}")));
        }
        if t == 0.0 {
            return Ok(self.initial.clone());
        }
        Ok(self.initial.heat_evolve(t)?)
    }

    /// Local jet of `log μ` in `(t, x)`; time derivatives are traded for
    /// `∂_t = ∂²_x`, so the order is limited to half the spatial one.
    fn log_jet(&self, t: f64, x: f64, order: usize) -> Result<Jet, TransportError> {
        if 2 * order > MAX_ORDER {
            return Err(TransportError::Order(order));
        }
        let model = self.at(t)?;
        let d = model.mu_derivatives(&[x], 2 * order)?;
        let mu = d.component(0, 0);
        if !(mu > 0.0) {
            return Err(TransportError::BadParams(format!("density vanishes at {x}")));
        }
        let space = JetSpace::shared(2, order);
        let ratio = Jet::from_partials(&space, |alpha| d.component(alpha[1] + 2 * alpha[0], 0) / mu);
        Ok(ratio.ln().add_scalar(model.log_density(&[x])))
    }
}

impl Field for HeatLogDensity {
    fn dim(&self) -> usize {
        1
    }

    fn outputs(&self) -> usize {
        1
    }

    fn apply(&self, t: &Jet, x: &[Jet]) -> Result<Vec<Jet>, TransportError> {
        let u = self.0.log_jet(t.value(), x[0].value(), t.space().order())?;
        Ok(vec![u.substitute(&super::increments(t, x))])
    }
}

impl Field for HeatVelocity {
    fn dim(&self) -> usize {
        1
    }

    fn outputs(&self) -> usize {
        1
    }

    fn apply(&self, t: &Jet, x: &[Jet]) -> Result<Vec<Jet>, TransportError> {
        reexpand(t, x, |t0, x0, order| Ok(vec![self.0.log_jet(t0, x0[0], order)?.diff(1).scale(-1.0)]))
    }
}
