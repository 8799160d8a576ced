use serde::{Deserialize, Serialize};

use crate::jet::Jet;

use super::{Field, TransportError};

const MAX_DEGREE: usize = 4;
const MAX_TIME_DEGREE: usize = 3;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Trig {
    Sin,
    Cos,
}

/// Spatial factor of one term.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Shape {
    /// `Π x_i^{e_i}`.
    Monomial(Vec<usize>),
    /// `sin(ω x_axis)` or `cos(ω x_axis)`.
    Trig { func: Trig, omega: f64, axis: usize },
}

/// `coeff · p(t) · shape(x)` in output `component`; an empty `time_poly` means 1.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FieldTerm {
    #[serde(default)]
    pub component: usize,
    pub coeff: f64,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub time_poly: Vec<f64>,
    #[serde(flatten)]
    pub shape: Shape,
}

impl FieldTerm {
    pub fn monomial(component: usize, coeff: f64, exponents: &[usize]) -> Self {
        Self {
            component,
            coeff,
            time_poly: Vec::new(),
            shape: Shape::Monomial(exponents.to_vec()),
        }
    }

    pub fn trig(component: usize, coeff: f64, func: Trig, omega: f64, axis: usize) -> Self {
        Self {
            component,
            coeff,
            time_poly: Vec::new(),
            shape: Shape::Trig { func, omega, axis },
        }
    }

    /// Multiplies the term by `Σ c_k t^k`.
    pub fn in_time(mut self, poly: &[f64]) -> Self {
        self.time_poly = poly.to_vec();
        self
    }
}

#[derive(Deserialize)]
struct RawField {
    dim: usize,
    outputs: Option<usize>,
    #[serde(default)]
    time_poly: Vec<f64>,
    terms: Vec<FieldTerm>,
}

/// A field built from polynomial and trigonometric terms with polynomial time
/// dependence. In JSON, `outputs` defaults to `dim`, i.e. a velocity.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawField")]
pub struct AnalyticField {
    pub dim: usize,
    pub outputs: usize,
    /// Common time factor; empty means 1.
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub time_poly: Vec<f64>,
    pub terms: Vec<FieldTerm>,
}

impl TryFrom<RawField> for AnalyticField {
    type Error = TransportError;

    fn try_from(raw: RawField) -> Result<Self, TransportError> {
        let f = Self {
            dim: raw.dim,
            outputs: raw.outputs.unwrap_or(raw.dim),
            time_poly: raw.time_poly,
            terms: raw.terms,
        };
        f.validate()?;
        Ok(f)
    }
}

fn horner_f64(poly: &[f64], t: f64) -> f64 {
    if poly.is_empty() {
        return 1.0;
    }
    poly.iter().rev().fold(0.0, |acc, c| acc * t + c)
}

fn horner_jet(poly: &[f64], t: &Jet) -> Jet {
    if poly.is_empty() {
        return Jet::constant(t.space(), 1.0);
    }
    poly.iter()
        .rev()
        .fold(Jet::constant(t.space(), 0.0), |acc, &c| (&acc * t).add_scalar(c))
}

fn derive_poly(poly: &[f64]) -> Vec<f64> {
    if poly.len() <= 1 {
        return vec![0.0];
    }
    poly.iter().enumerate().skip(1).map(|(k, c)| k as f64 * c).collect()
}

impl AnalyticField {
    /// A velocity field on `R^dim`.
    pub fn velocity(dim: usize, terms: Vec<FieldTerm>) -> Result<Self, TransportError> {
        Self::with_outputs(dim, dim, terms)
    }

    /// A scalar function on `R^dim`.
    pub fn scalar(dim: usize, terms: Vec<FieldTerm>) -> Result<Self, TransportError> {
        Self::with_outputs(dim, 1, terms)
    }

    pub fn with_outputs(dim: usize, outputs: usize, terms: Vec<FieldTerm>) -> Result<Self, TransportError> {
        let f = Self {
            dim,
            outputs,
            time_poly: Vec::new(),
            terms,
        };
        f.validate()?;
        Ok(f)
    }

    /// Multiplies the whole field by `Σ c_k t^k`.
    pub fn in_time(mut self, poly: &[f64]) -> Result<Self, TransportError> {
        self.time_poly = poly.to_vec();
        self.validate()?;
        Ok(self)
    }

    pub fn validate(&self) -> Result<(), TransportError> {
        if !(1..=2).contains(&self.dim) || self.outputs == 0 {
            return Err(TransportError::BadParams(format!("field R^{} -> R^{}", self.dim, self.outputs)));
        }
        if self.time_poly.len() > MAX_TIME_DEGREE + 1 {
            return Err(TransportError::BadParams("time polynomial above degree 3".into()));
        }
        for t in &self.terms {
            let bad = |why: &str| Err(TransportError::BadParams(format!("{why}: {t:?}")));
            if t.component >= self.outputs {
                return bad("component out of range");
            }
            if !t.coeff.is_finite() || t.time_poly.iter().any(|c| !c.is_finite()) {
                return bad("non-finite coefficient");
            }
            if t.time_poly.len() > MAX_TIME_DEGREE + 1 {
                return bad("time polynomial above degree 3");
            }
            match &t.shape {
                Shape::Monomial(e) => {
                    if e.len() != self.dim {
                        return bad("exponent count differs from the dimension");
                    }
                    if e.iter().sum::<usize>() > MAX_DEGREE {
                        return bad("monomial above degree 4");
                    }
                }
                Shape::Trig { omega, axis, .. } => {
                    if *axis >= self.dim || !omega.is_finite() {
                        return bad("bad trigonometric factor");
                    }
                }
            }
        }
        Ok(())
    }

    pub fn is_time_independent(&self) -> bool {
        self.time_poly.len() <= 1 && self.terms.iter().all(|t| t.time_poly.len() <= 1)
    }

    /// Whether component `i` depends on `x_i` alone, for every `i`.
    pub fn is_diagonal(&self) -> bool {
        self.outputs == self.dim
            && self.terms.iter().all(|t| match &t.shape {
                Shape::Monomial(e) => e.iter().enumerate().all(|(i, &a)| a == 0 || i == t.component),
                Shape::Trig { axis, .. } => *axis == t.component,
            })
    }

    pub fn eval(&self, t: f64, x: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.outputs];
        let common = horner_f64(&self.time_poly, t);
        for term in &self.terms {
            let s = match &term.shape {
                Shape::Monomial(e) => e.iter().zip(x).map(|(&a, xi)| xi.powi(a as i32)).product(),
                Shape::Trig { func: Trig::Sin, omega, axis } => (omega * x[*axis]).sin(),
                Shape::Trig { func: Trig::Cos, omega, axis } => (omega * x[*axis]).cos(),
            };
            out[term.component] += term.coeff * horner_f64(&term.time_poly, t) * s;
        }
        out.iter().map(|v| v * common).collect()
    }

    /// `∂f/∂x_axis`, in closed form.
    pub fn derivative(&self, axis: usize) -> Self {
        let mut terms = Vec::new();
        for t in &self.terms {
            match &t.shape {
                Shape::Monomial(e) => {
                    if e[axis] > 0 {
                        let mut e2 = e.clone();
                        e2[axis] -= 1;
                        terms.push(FieldTerm {
                            coeff: t.coeff * e[axis] as f64,
                            shape: Shape::Monomial(e2),
                            ..t.clone()
                        });
                    }
                }
                Shape::Trig { func, omega, axis: a } if *a == axis => {
                    let (func, sign) = match func {
                        Trig::Sin => (Trig::Cos, 1.0),
                        Trig::Cos => (Trig::Sin, -1.0),
                    };
                    terms.push(FieldTerm {
                        coeff: t.coeff * omega * sign,
                        shape: Shape::Trig { func, omega: *omega, axis },
                        ..t.clone()
                    });
                }
                Shape::Trig { .. } => {}
            }
        }
        Self {
            terms,
            ..self.clone()
        }
    }

    /// `∂f/∂t`, in closed form.
    pub fn time_derivative(&self) -> Self {
        // product rule over the common factor and the per-term factor
        let mut terms = Vec::new();
        for t in &self.terms {
            let own = if t.time_poly.is_empty() { vec![1.0] } else { t.time_poly.clone() };
            let common = if self.time_poly.is_empty() { vec![1.0] } else { self.time_poly.clone() };
            let a = mul_poly(&derive_poly(&own), &common);
            let b = mul_poly(&own, &derive_poly(&common));
            let sum: Vec<f64> = (0..a.len().max(b.len()))
                .map(|k| a.get(k).unwrap_or(&0.0) + b.get(k).unwrap_or(&0.0))
                .collect();
            terms.push(FieldTerm {
                time_poly: sum,
                ..t.clone()
            });
        }
        Self {
            dim: self.dim,
            outputs: self.outputs,
            time_poly: Vec::new(),
            terms,
        }
    }
}

fn mul_poly(a: &[f64], b: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; a.len() + b.len() - 1];
    for (i, x) in a.iter().enumerate() {
        for (j, y) in b.iter().enumerate() {
            out[i + j] += x * y;
        }
    }
    out
}

impl Field for AnalyticField {
    fn dim(&self) -> usize {
        self.dim
    }

    fn outputs(&self) -> usize {
        self.outputs
    }

    fn apply(&self, t: &Jet, x: &[Jet]) -> Result<Vec<Jet>, TransportError> {
        let space = t.space();
        let mut out = vec![Jet::constant(space, 0.0); self.outputs];
        for term in &self.terms {
            let s = match &term.shape {
                Shape::Monomial(e) => {
                    let mut m = Jet::constant(space, term.coeff);
                    for (xi, &a) in x.iter().zip(e) {
                        for _ in 0..a {
                            m = &m * xi;
                        }
                    }
                    m
                }
                Shape::Trig { func, omega, axis } => {
                    let arg = x[*axis].scale(*omega);
                    let v = match func {
                        Trig::Sin => arg.sin(),
                        Trig::Cos => arg.cos(),
                    };
                    v.scale(term.coeff)
                }
            };
            let s = if term.time_poly.is_empty() { s } else { &s * &horner_jet(&term.time_poly, t) };
            out[term.component] = &out[term.component] + &s;
        }
        if !self.time_poly.is_empty() {
            let c = horner_jet(&self.time_poly, t);
            out = out.iter().map(|o| o * &c).collect();
        }
        Ok(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::transport::local;

    fn sample() -> AnalyticField {
        AnalyticField::velocity(
            2,
            vec![
                FieldTerm::monomial(0, 0.5, &[2, 1]).in_time(&[1.0, -0.5]),
                FieldTerm::trig(1, 0.3, Trig::Sin, 1.5, 0),
                FieldTerm::trig(1, -0.2, Trig::Cos, 0.7, 1),
            ],
        )
        .unwrap()
        .in_time(&[1.0, 0.0, 0.25])
        .unwrap()
    }

    #[test]
    fn closed_form_derivatives_match_jets() {
        let f = sample();
        let (t, x) = (0.4, [0.3, -0.8]);
        let j = local(&f, t, &x, 2).unwrap();
        for c in 0..2 {
            assert!((j[c].value() - f.eval(t, &x)[c]).abs() < 1e-15);
            for axis in 0..2 {
                let mut alpha = [0, 0, 0];
                alpha[axis + 1] = 1;
                assert!((j[c].partial(&alpha) - f.derivative(axis).eval(t, &x)[c]).abs() < 1e-14);
            }
            assert!((j[c].partial(&[1, 0, 0]) - f.time_derivative().eval(t, &x)[c]).abs() < 1e-14);
        }
        assert!(!f.is_time_independent());
        assert!(!f.is_diagonal());
    }

    #[test]
    fn json_round_trip_and_defaults() {
        let f = sample();
        let text = serde_json::to_string(&f).unwrap();
        let back: AnalyticField = serde_json::from_str(&text).unwrap();
        assert_eq!(f, back);
        let v: AnalyticField =
            serde_json::from_str(r#"{"dim":1,"terms":[{"coeff":0.3,"trig":{"func":"sin","omega":1.0,"axis":0}}]}"#).unwrap();
        assert_eq!(v.outputs, 1);
        assert!(v.is_diagonal());
        assert!(serde_json::from_str::<AnalyticField>(r#"{"dim":1,"terms":[{"coeff":1,"monomial":[5]}]}"#).is_err());
    }
}
