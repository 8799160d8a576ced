//! Truncated multivariate Taylor series.
//!
//! A [`Jet`] stores the normalized Taylor coefficients `∂^α f(p) / α!` of a
//! function at a point `p`, for every multi-index `α` of total degree at most
//! the order of its [`JetSpace`]. Arithmetic and elementary functions act on
//! jets exactly up to truncation, which makes mixed partial derivatives of
//! closed-form expressions available without symbolic differentiation.

use std::collections::HashMap;
use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};
use std::sync::{Arc, Mutex, OnceLock};

/// Multi-index bookkeeping shared by all jets of one shape.
pub struct JetSpace {
    nvars: usize,
    order: usize,
    exps: Vec<Vec<usize>>,
    index: HashMap<Vec<usize>, usize>,
    // (i, j, k): monomial i times monomial j is monomial k
    products: Vec<(usize, usize, usize)>,
}

impl fmt::Debug for JetSpace {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "JetSpace({} vars, order {})", self.nvars, self.order)
    }
}

impl JetSpace {
    pub fn new(nvars: usize, order: usize) -> Arc<Self> {
        let mut exps = Vec::new();
        for deg in 0..=order {
            push_degree(nvars, deg, &mut Vec::new(), &mut exps);
        }
        let index: HashMap<Vec<usize>, usize> = exps.iter().cloned().enumerate().map(|(i, e)| (e, i)).collect();
        let mut products = Vec::new();
        for (i, a) in exps.iter().enumerate() {
            for (j, b) in exps.iter().enumerate() {
                let da: usize = a.iter().sum();
                let db: usize = b.iter().sum();
                if da + db <= order {
                    let sum: Vec<usize> = a.iter().zip(b).map(|(x, y)| x + y).collect();
                    products.push((i, j, index[&sum]));
                }
            }
        }
        Arc::new(Self {
            nvars,
            order,
            exps,
            index,
            products,
        })
    }

    /// A process-wide space of the given shape, built once.
    pub fn shared(nvars: usize, order: usize) -> Arc<Self> {
        static SPACES: OnceLock<Mutex<HashMap<(usize, usize), Arc<JetSpace>>>> = OnceLock::new();
        let mut map = SPACES.get_or_init(Default::default).lock().expect("jet space registry");
        Arc::clone(map.entry((nvars, order)).or_insert_with(|| Self::new(nvars, order)))
    }

    pub fn nvars(&self) -> usize {
        self.nvars
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn len(&self) -> usize {
        self.exps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.exps.is_empty()
    }

    pub fn exponents(&self, i: usize) -> &[usize] {
        &self.exps[i]
    }

    pub fn position(&self, alpha: &[usize]) -> Option<usize> {
        self.index.get(alpha).copied()
    }
}

// graded lexicographic enumeration, first variable varying slowest
fn push_degree(nvars: usize, deg: usize, prefix: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
    if prefix.len() + 1 == nvars {
        prefix.push(deg);
        out.push(prefix.clone());
        prefix.pop();
        return;
    }
    if nvars == 0 {
        if deg == 0 {
            out.push(Vec::new());
        }
        return;
    }
    for first in (0..=deg).rev() {
        prefix.push(first);
        push_degree(nvars, deg - first, prefix, out);
        prefix.pop();
    }
}

fn factorial(n: usize) -> f64 {
    (1..=n).map(|i| i as f64).product()
}

#[derive(Clone, Debug)]
pub struct Jet {
    space: Arc<JetSpace>,
    coeffs: Vec<f64>,
}

impl Jet {
    pub fn constant(space: &Arc<JetSpace>, value: f64) -> Self {
        let mut coeffs = vec![0.0; space.len()];
        coeffs[0] = value;
        Self {
            space: Arc::clone(space),
            coeffs,
        }
    }

    /// The coordinate function `x_var` expanded around `value`.
    pub fn variable(space: &Arc<JetSpace>, var: usize, value: f64) -> Self {
        let mut j = Self::constant(space, value);
        if space.order >= 1 {
            let mut e = vec![0; space.nvars];
            e[var] = 1;
            j.coeffs[space.index[&e]] = 1.0;
        }
        j
    }

    /// Builds a jet from partial derivatives given by a callback on multi-indices.
    pub fn from_partials(space: &Arc<JetSpace>, mut partial: impl FnMut(&[usize]) -> f64) -> Self {
        let coeffs = space
            .exps
            .iter()
            .map(|e| partial(e) / e.iter().map(|&a| factorial(a)).product::<f64>())
            .collect();
        Self {
            space: Arc::clone(space),
            coeffs,
        }
    }

    pub fn space(&self) -> &Arc<JetSpace> {
        &self.space
    }

    pub fn value(&self) -> f64 {
        self.coeffs[0]
    }

    pub fn coefficients(&self) -> &[f64] {
        &self.coeffs
    }

    /// `∂^α f` at the expansion point; zero beyond the truncation order.
    pub fn partial(&self, alpha: &[usize]) -> f64 {
        match self.space.index.get(alpha) {
            Some(&i) => self.coeffs[i] * alpha.iter().map(|&a| factorial(a)).product::<f64>(),
            None => 0.0,
        }
    }

    /// Partial derivative in one variable; the top degree of the result is lost.
    pub fn diff(&self, var: usize) -> Self {
        let mut out = vec![0.0; self.coeffs.len()];
        for (i, e) in self.space.exps.iter().enumerate() {
            if e[var] == 0 {
                continue;
            }
            let mut lower = e.clone();
            lower[var] -= 1;
            out[self.space.index[&lower]] = self.coeffs[i] * e[var] as f64;
        }
        Self {
            space: Arc::clone(&self.space),
            coeffs: out,
        }
    }

    /// Integral in one variable from 0; terms pushed past the order are dropped.
    pub fn antiderivative(&self, var: usize) -> Self {
        let mut out = vec![0.0; self.coeffs.len()];
        for (i, e) in self.space.exps.iter().enumerate() {
            if e[var] == 0 {
                continue;
            }
            let mut lower = e.clone();
            lower[var] -= 1;
            out[i] = self.coeffs[self.space.index[&lower]] / e[var] as f64;
        }
        Self {
            space: Arc::clone(&self.space),
            coeffs: out,
        }
    }

    /// The series with variable `var` set to `offset` from the expansion point.
    pub fn eval_var(&self, var: usize, offset: f64) -> Self {
        let mut out = vec![0.0; self.coeffs.len()];
        for (i, e) in self.space.exps.iter().enumerate() {
            let mut rest = e.clone();
            rest[var] = 0;
            out[self.space.index[&rest]] += self.coeffs[i] * offset.powi(e[var] as i32);
        }
        Self {
            space: Arc::clone(&self.space),
            coeffs: out,
        }
    }

    /// The series evaluated at `p + δ`, where `deltas` are jets of another space
    /// with zero value; the result lives in that space.
    pub fn substitute(&self, deltas: &[Jet]) -> Self {
        assert_eq!(deltas.len(), self.space.nvars, "one increment per variable");
        let target = deltas.first().map(|d| Arc::clone(&d.space)).expect("at least one variable");
        let keep = self.space.order.min(target.order);
        let powers: Vec<Vec<Jet>> = deltas
            .iter()
            .map(|d| {
                let mut p = vec![Jet::constant(&target, 1.0)];
                for _ in 0..keep {
                    let next = p.last().expect("nonempty") * d;
                    p.push(next);
                }
                p
            })
            .collect();
        let mut out = Jet::constant(&target, 0.0);
        for (i, e) in self.space.exps.iter().enumerate() {
            if self.coeffs[i] == 0.0 || e.iter().sum::<usize>() > keep {
                continue;
            }
            let mut m = Jet::constant(&target, self.coeffs[i]);
            for (v, &a) in e.iter().enumerate() {
                if a > 0 {
                    m = &m * &powers[v][a];
                }
            }
            out = &out + &m;
        }
        out
    }

    pub fn scale(&self, s: f64) -> Self {
        Self {
            space: Arc::clone(&self.space),
            coeffs: self.coeffs.iter().map(|c| c * s).collect(),
        }
    }

    pub fn add_scalar(&self, s: f64) -> Self {
        let mut out = self.clone();
        out.coeffs[0] += s;
        out
    }

    /// `f(self)` from the derivatives `f(a), f'(a), f''(a), ...` at `a = self.value()`.
    pub fn compose(&self, derivs: &[f64]) -> Self {
        let mut delta = self.clone();
        delta.coeffs[0] = 0.0;
        let mut out = Self::constant(&self.space, derivs[0]);
        let mut power = Self::constant(&self.space, 1.0);
        for (k, d) in derivs.iter().enumerate().skip(1).take(self.space.order) {
            power = &power * &delta;
            if *d != 0.0 {
                out = &out + &power.scale(d / factorial(k));
            }
        }
        out
    }

    pub fn exp(&self) -> Self {
        let e = self.value().exp();
        self.compose(&vec![e; self.space.order + 1])
    }

    pub fn ln(&self) -> Self {
        let a = self.value();
        let mut d = vec![a.ln()];
        let mut v = 1.0 / a;
        for k in 1..=self.space.order {
            d.push(v);
            v *= -(k as f64) / a;
        }
        self.compose(&d)
    }

    pub fn recip(&self) -> Self {
        let a = self.value();
        let mut d = Vec::with_capacity(self.space.order + 1);
        let mut v = 1.0 / a;
        for k in 0..=self.space.order {
            d.push(v);
            v *= -((k + 1) as f64) / a;
        }
        self.compose(&d)
    }

    pub fn div(&self, other: &Jet) -> Self {
        self * &other.recip()
    }

    pub fn powi(&self, n: i32) -> Self {
        let a = self.value();
        let mut d = Vec::with_capacity(self.space.order + 1);
        let mut c = 1.0;
        for k in 0..=self.space.order {
            d.push(c * a.powi(n - k as i32));
            c *= f64::from(n) - k as f64;
        }
        self.compose(&d)
    }

    pub fn sin(&self) -> Self {
        let (s, c) = self.value().sin_cos();
        let cycle = [s, c, -s, -c];
        self.compose(&(0..=self.space.order).map(|k| cycle[k % 4]).collect::<Vec<_>>())
    }

    pub fn cos(&self) -> Self {
        let (s, c) = self.value().sin_cos();
        let cycle = [c, -s, -c, s];
        self.compose(&(0..=self.space.order).map(|k| cycle[k % 4]).collect::<Vec<_>>())
    }
}

impl Add for &Jet {
    type Output = Jet;
    fn add(self, rhs: &Jet) -> Jet {
        Jet {
            space: Arc::clone(&self.space),
            coeffs: self.coeffs.iter().zip(&rhs.coeffs).map(|(a, b)| a + b).collect(),
        }
    }
}

impl Sub for &Jet {
    type Output = Jet;
    fn sub(self, rhs: &Jet) -> Jet {
        Jet {
            space: Arc::clone(&self.space),
            coeffs: self.coeffs.iter().zip(&rhs.coeffs).map(|(a, b)| a - b).collect(),
        }
    }
}

impl Mul for &Jet {
    type Output = Jet;
    fn mul(self, rhs: &Jet) -> Jet {
        let mut coeffs = vec![0.0; self.coeffs.len()];
        for &(i, j, k) in &self.space.products {
            coeffs[k] += self.coeffs[i] * rhs.coeffs[j];
        }
        Jet {
            space: Arc::clone(&self.space),
            coeffs,
        }
    }
}

impl Neg for &Jet {
    type Output = Jet;
    fn neg(self) -> Jet {
        self.scale(-1.0)
    }
}
