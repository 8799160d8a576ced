use std::fs;
use std::path::Path;

use anyhow::{bail, Context, Result};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::density::{DensityModel, DensitySpec, QuadratureGrid};
use crate::evaluator::{Potential, PressureFamily};
use crate::transport::{AnalyticField, FlowSettings};

/// The resolved inputs of a run, echoed into every numeric document.
#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct RunConfig {
    pub command: String,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub densities: Vec<DensitySpec>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub times: Vec<f64>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub orders: Vec<usize>,
    pub tol: f64,
    pub seed: u64,
}

impl RunConfig {
    pub fn check(&self, max_order: usize) -> Result<()> {
        if !(self.tol > 0.0 && self.tol.is_finite()) {
            bail!("tolerance must be positive, got {}", self.tol);
        }
        if let Some(&m) = self.orders.iter().find(|&&m| m == 0 || m > max_order) {
            bail!("order {m} outside 1..={max_order}");
        }
        if let Some(t) = self.times.iter().find(|t| !t.is_finite()) {
            bail!("time {t} is not finite");
        }
        Ok(())
    }
}

pub(crate) fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))
}

#[derive(Deserialize)]
#[serde(untagged)]
enum OneOrMany {
    One(DensitySpec),
    Many(Vec<DensitySpec>),
}

/// A file holding one density specification or an array of them.
pub(crate) fn read_densities(path: &Path) -> Result<Vec<DensitySpec>> {
    Ok(match read_json::<OneOrMany>(path)? {
        OneOrMany::One(d) => vec![d],
        OneOrMany::Many(v) => v,
    })
}

/// Quadrature grid with per-dimension defaults: fine Gauss panels in 1-d, and
/// low-order panels in 2-d where integrands are costly.
pub(crate) fn grid_for(model: &DensityModel, tol: Option<f64>, panel_order: Option<usize>) -> Result<QuadratureGrid> {
    let grid = match (model.dim, panel_order) {
        (_, Some(p)) => model.build_grid_with(tol.unwrap_or(1e-10), p)?,
        (1, None) => model.build_grid(tol.unwrap_or(1e-12))?,
        _ => model.build_grid_with(tol.unwrap_or(1e-10), 4)?,
    };
    Ok(grid)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum FunctionalSpec {
    /// `∫ f dμ` for a scalar field `f`.
    Linear { f: AnalyticField },
    Entropy,
}

fn default_orders() -> Vec<usize> {
    vec![1, 2, 3]
}

fn default_times() -> Vec<f64> {
    vec![0.0]
}

fn default_fdb_tol() -> f64 {
    1e-4
}

fn default_hessian_tol() -> f64 {
    1e-6
}

fn yes() -> bool {
    true
}

/// Input of `fdb-verify`.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FdbConfig {
    /// Initial measure `μ₀`.
    pub density: DensitySpec,
    pub velocity: AnalyticField,
    /// Use the geodesic interpolation of `velocity` instead of its flow.
    #[serde(default)]
    pub geodesic: bool,
    pub functional: FunctionalSpec,
    #[serde(default = "default_orders")]
    pub orders: Vec<usize>,
    #[serde(default = "default_times")]
    pub times: Vec<f64>,
    #[serde(default = "default_fdb_tol")]
    pub tol: f64,
    #[serde(default)]
    pub flow: FlowSettings,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub grid_tol: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub panel_order: Option<usize>,
}

/// Input of `energy-verify`.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EnergyConfig {
    pub density: DensitySpec,
    /// Time-independent displacement `v` of `(id + t v)_♯ μ₀`.
    pub velocity: AnalyticField,
    /// Reference potential; zero when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub potential: Option<Potential>,
    #[serde(default = "entropy")]
    pub family: PressureFamily,
    #[serde(default = "default_orders")]
    pub orders: Vec<usize>,
    #[serde(default = "default_fdb_tol")]
    pub tol: f64,
    /// Also compare the two routes to the relative-entropy Hessian.
    #[serde(default = "yes")]
    pub hessian: bool,
    #[serde(default = "default_hessian_tol")]
    pub hessian_tol: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub grid_tol: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub panel_order: Option<usize>,
}

fn entropy() -> PressureFamily {
    PressureFamily::Entropy
}

impl EnergyConfig {
    /// The potential and family after validation.
    pub fn resolved(&self, dim: usize) -> Result<(Potential, PressureFamily)> {
        let potential = match &self.potential {
            Some(p) if p.dim != dim => bail!("potential on R^{} for a density on R^{dim}", p.dim),
            Some(p) => Potential::new(p.dim, p.terms.clone())?,
            None => Potential::zero(dim),
        };
        let family = match self.family {
            PressureFamily::Power { m } => PressureFamily::power(m)?,
            f => f,
        };
        Ok((potential, family))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn configs_parse_with_defaults() {
        let fdb: FdbConfig = serde_json::from_str(
            r#"{"density":{"kind":"quartic","a":0.5,"b":0.25},
                "velocity":{"dim":1,"terms":[{"coeff":0.3,"trig":{"func":"sin","omega":1.0,"axis":0}}]},
                "functional":{"kind":"linear","f":{"dim":1,"outputs":1,"terms":[{"coeff":1.0,"monomial":[4]}]}}}"#,
        )
        .unwrap();
        assert_eq!(fdb.orders, vec![1, 2, 3]);
        assert_eq!(fdb.flow, FlowSettings::default());
        let energy: EnergyConfig = serde_json::from_str(
            r#"{"density":{"kind":"gaussian","s":1.0},
                "velocity":{"dim":1,"terms":[{"coeff":1.0,"monomial":[1]}]},
                "family":{"family":"power","m":0.5}}"#,
        )
        .unwrap();
        assert!(energy.hessian);
        assert!(energy.resolved(1).is_ok());
        let bad: EnergyConfig = serde_json::from_str(
            r#"{"density":{"kind":"gaussian","s":1.0},
                "velocity":{"dim":1,"terms":[]},
                "family":{"family":"power","m":1.0}}"#,
        )
        .unwrap();
        assert!(bad.resolved(1).is_err());
    }
}
