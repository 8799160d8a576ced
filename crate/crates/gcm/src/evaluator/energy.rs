//! Internal energies `E(μ) = ∫ h(dμ/dν) dν` against a reference `ν = e^{-V} dx`.

use std::f64::consts::PI;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::density::{DensityModel, Estimate, Kahan, QuadratureGrid};
use crate::jet::{Jet, JetSpace};

use super::EvalError;

pub const MAX_PRESSURE_ORDER: usize = 6;

/// `c · ρ^power · (log ρ)^logs`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PressureTerm {
    pub coeff: f64,
    pub power: f64,
    pub logs: u32,
}

/// The integrand `h` of an internal energy, with its iterated pressures
/// `p₀ = h`, `p_{k+1} = ρ p_k′ − p_k`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum PressureFamily {
    /// `h(ρ) = ρ log ρ`.
    Entropy,
    /// `h(ρ) = (ρ^m − ρ)/(m − 1)`.
    Power { m: f64 },
}

impl PressureFamily {
    pub fn power(m: f64) -> Result<Self, EvalError> {
        if !(m.is_finite() && m > 0.0 && m != 1.0) {
            return Err(EvalError::BadParams(format!("power family needs m > 0, m != 1; got {m}")));
        }
        Ok(Self::Power { m })
    }

    /// `h` as a sum of terms.
    pub fn integrand(&self) -> Vec<PressureTerm> {
        match *self {
            Self::Entropy => vec![PressureTerm {
                coeff: 1.0,
                power: 1.0,
                logs: 1,
            }],
            Self::Power { m } => vec![
                PressureTerm {
                    coeff: 1.0 / (m - 1.0),
                    power: m,
                    logs: 0,
                },
                PressureTerm {
                    coeff: -1.0 / (m - 1.0),
                    power: 1.0,
                    logs: 0,
                },
            ],
        }
    }

    /// `p_k` obtained by applying `ρ∂_ρ − 1` to `h` term by term, `k` times.
    pub fn symbolic(&self, k: usize) -> Vec<PressureTerm> {
        let mut terms = self.integrand();
        for _ in 0..k {
            let mut next: Vec<PressureTerm> = Vec::new();
            let mut push = |t: PressureTerm| {
                if t.coeff == 0.0 {
                    return;
                }
                match next.iter_mut().find(|u| u.power == t.power && u.logs == t.logs) {
                    Some(u) => u.coeff += t.coeff,
                    None => next.push(t),
                }
            };
            for t in &terms {
                push(PressureTerm {
                    coeff: t.coeff * (t.power - 1.0),
                    ..*t
                });
                if t.logs > 0 {
                    push(PressureTerm {
                        coeff: t.coeff * t.logs as f64,
                        logs: t.logs - 1,
                        ..*t
                    });
                }
            }
            next.retain(|t| t.coeff != 0.0);
            terms = next;
        }
        terms
    }

    /// `p_k(ρ)` in closed form; `p_0 = h`.
    pub fn pressure(&self, k: usize, rho: f64) -> Result<f64, EvalError> {
        if k > MAX_PRESSURE_ORDER {
            return Err(EvalError::Order(k));
        }
        Ok(match (*self, k) {
            (Self::Entropy, 0) => rho * rho.ln(),
            (Self::Entropy, 1) => rho,
            (Self::Entropy, _) => 0.0,
            (Self::Power { m }, 0) => (rho.powf(m) - rho) / (m - 1.0),
            (Self::Power { m }, k) => (m - 1.0).powi(k as i32 - 1) * rho.powf(m),
        })
    }

    /// `h(ρ) e^{-V}` from `log ρ` and `V`, avoiding a separate overflow of `ρ`.
    pub(crate) fn weighted(&self, log_rho: f64, v: f64) -> Result<f64, EvalError> {
        match *self {
            Self::Entropy => Ok((log_rho - v).exp() * log_rho),
            Self::Power { m } => {
                let big = m * log_rho - v;
                if big > 700.0 {
                    return Err(EvalError::Overflow(format!("ρ^m e^(-V) = e^{big:.1}")));
                }
                Ok((big.exp() - (log_rho - v).exp()) / (m - 1.0))
            }
        }
    }
}

/// `c · x₁^a x₂^b`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PotentialTerm {
    pub coeff: f64,
    pub powers: [usize; 2],
}

/// A polynomial reference potential of degree at most 4 in one or two variables.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Potential {
    pub dim: usize,
    pub terms: Vec<PotentialTerm>,
}

impl Potential {
    pub fn new(dim: usize, terms: Vec<PotentialTerm>) -> Result<Self, EvalError> {
        if !(1..=2).contains(&dim) {
            return Err(EvalError::BadParams(format!("potential in dimension {dim}")));
        }
        for t in &terms {
            if t.powers[0] + t.powers[1] > 4 || (dim == 1 && t.powers[1] > 0) {
                return Err(EvalError::BadParams(format!("unsupported potential term {t:?}")));
            }
        }
        Ok(Self { dim, terms })
    }

    /// `V = 0`, i.e. Lebesgue reference measure.
    pub fn zero(dim: usize) -> Self {
        Self { dim, terms: Vec::new() }
    }

    /// `V = |x|²/2 + (d/2) log 2π`, so `ν` is the standard Gaussian.
    pub fn standard_gaussian(dim: usize) -> Self {
        let mut terms = vec![PotentialTerm {
            coeff: 0.5 * dim as f64 * (2.0 * PI).ln(),
            powers: [0, 0],
        }];
        for axis in 0..dim {
            let mut powers = [0, 0];
            powers[axis] = 2;
            terms.push(PotentialTerm { coeff: 0.5, powers });
        }
        Self { dim, terms }
    }

    pub fn value(&self, x: &[f64]) -> f64 {
        self.terms
            .iter()
            .map(|t| t.coeff * (0..self.dim).map(|i| x[i].powi(t.powers[i] as i32)).product::<f64>())
            .sum()
    }

    /// Taylor jet of `V` at `x` in `space`, which must have `dim` variables.
    pub fn jet(&self, space: &Arc<JetSpace>, x: &[f64]) -> Jet {
        let vars: Vec<Jet> = (0..self.dim).map(|i| Jet::variable(space, i, x[i])).collect();
        self.compose(&vars)
    }

    /// `V(x₁, …)` with jet arguments, one per dimension.
    pub fn compose(&self, vars: &[Jet]) -> Jet {
        let space = vars[0].space();
        let mut acc = Jet::constant(space, 0.0);
        for t in &self.terms {
            let mut m = Jet::constant(space, t.coeff);
            for (i, v) in vars.iter().enumerate().take(self.dim) {
                for _ in 0..t.powers[i] {
                    m = &m * v;
                }
            }
            acc = &acc + &m;
        }
        acc
    }

    /// `∂V/∂x_axis`.
    pub fn derivative(&self, axis: usize) -> Self {
        let terms = self
            .terms
            .iter()
            .filter(|t| t.powers[axis] > 0)
            .map(|t| {
                let mut powers = t.powers;
                powers[axis] -= 1;
                PotentialTerm {
                    coeff: t.coeff * t.powers[axis] as f64,
                    powers,
                }
            })
            .collect();
        Self { dim: self.dim, terms }
    }
}

/// `E(μ) = ∫ h(μ e^V) e^{-V} dx` by quadrature on `grid`.
pub fn internal_energy(
    model: &DensityModel,
    potential: &Potential,
    fam: &PressureFamily,
    grid: &QuadratureGrid,
) -> Result<Estimate, EvalError> {
    if potential.dim != model.dim || grid.dim != model.dim {
        return Err(EvalError::Dimension {
            grid: grid.dim,
            density: model.dim,
        });
    }
    let mut acc = Kahan::default();
    let mut mass = Kahan::default();
    for (i, w) in grid.weights.iter().enumerate() {
        let x = grid.point(i);
        let log_mu = model.log_density(x);
        let v = potential.value(x);
        acc.add(w * fam.weighted(log_mu + v, v)?);
        mass.add(w * log_mu.exp());
    }
    let value = acc.value();
    Ok(Estimate {
        value,
        error: (mass.value() - 1.0).abs() * value.abs().max(1.0),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn eval(terms: &[PressureTerm], rho: f64) -> f64 {
        terms.iter().map(|t| t.coeff * rho.powf(t.power) * rho.ln().powi(t.logs as i32)).sum()
    }

    #[test]
    fn closed_forms_follow_the_recursion() {
        for fam in [PressureFamily::Entropy, PressureFamily::power(2.0).unwrap(), PressureFamily::power(3.5).unwrap()] {
            for k in 0..=MAX_PRESSURE_ORDER {
                for rho in [0.1, 0.7, 2.3] {
                    let s = eval(&fam.symbolic(k), rho);
                    let c = fam.pressure(k, rho).unwrap();
                    assert!((s - c).abs() < 1e-12 * (1.0 + c.abs()), "{fam:?} k={k} ρ={rho}: {s} vs {c}");
                }
            }
        }
        assert!(PressureFamily::Entropy.symbolic(2).is_empty());
    }

    #[test]
    fn potential_jet_matches_values() {
        let v = Potential::new(
            2,
            vec![
                PotentialTerm { coeff: 0.5, powers: [2, 0] },
                PotentialTerm { coeff: -0.3, powers: [1, 2] },
                PotentialTerm { coeff: 0.1, powers: [0, 4] },
            ],
        )
        .unwrap();
        let sp = JetSpace::new(2, 4);
        let x = [0.4, -1.1];
        let j = v.jet(&sp, &x);
        assert!((j.value() - v.value(&x)).abs() < 1e-15);
        assert!((j.partial(&[1, 2]) - (-0.6)).abs() < 1e-14);
        assert!((j.partial(&[0, 4]) - 2.4).abs() < 1e-14);
        let d = v.derivative(1).derivative(1);
        assert!((d.value(&x) - j.partial(&[0, 2])).abs() < 1e-13);
        assert!(Potential::new(1, vec![PotentialTerm { coeff: 1.0, powers: [5, 0] }]).is_err());
    }
}
