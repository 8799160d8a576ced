//! Composite Gauss–Legendre grids and compensated sums.

use std::f64::consts::PI;

/// Kahan–Babuška (Neumaier) compensated accumulator.
#[derive(Clone, Copy, Debug, Default)]
pub struct Kahan {
    sum: f64,
    comp: f64,
}

impl Kahan {
    pub fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.comp += (self.sum - t) + x;
        } else {
            self.comp += (x - t) + self.sum;
        }
        self.sum = t;
    }

    pub fn value(&self) -> f64 {
        self.sum + self.comp
    }
}

pub fn kahan_sum(xs: impl IntoIterator<Item = f64>) -> f64 {
    let mut k = Kahan::default();
    for x in xs {
        k.add(x);
    }
    k.value()
}

/// Nodes and weights of the `n`-point Gauss–Legendre rule on `[-1, 1]`, ascending.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(n >= 1);
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    for i in 0..n.div_ceil(2) {
        let mut x = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (p, q) = legendre_pair(n, x);
            dp = n as f64 * (x * p - q) / (x * x - 1.0);
            let dx = p / dp;
            x -= dx;
            if dx.abs() < 1e-16 {
                let (p, q) = legendre_pair(n, x);
                dp = n as f64 * (x * p - q) / (x * x - 1.0);
                break;
            }
        }
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        nodes[i] = -x;
        nodes[n - 1 - i] = x;
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    if n % 2 == 1 {
        nodes[n / 2] = 0.0;
    }
    (nodes, weights)
}

// (P_n(x), P_{n-1}(x))
fn legendre_pair(n: usize, x: f64) -> (f64, f64) {
    let (mut p0, mut p1) = (1.0, x);
    if n == 0 {
        return (1.0, 0.0);
    }
    for k in 2..=n {
        let p2 = ((2 * k - 1) as f64 * x * p1 - (k - 1) as f64 * p0) / k as f64;
        p0 = p1;
        p1 = p2;
    }
    (p1, p0)
}

/// Composite rule with `panels` equal panels of `order` points on `[lo, hi]`.
pub fn composite(lo: f64, hi: f64, panels: usize, order: usize) -> (Vec<f64>, Vec<f64>) {
    let (x, w) = gauss_legendre(order);
    let h = (hi - lo) / panels as f64;
    let mut nodes = Vec::with_capacity(panels * order);
    let mut weights = Vec::with_capacity(panels * order);
    for p in 0..panels {
        let a = lo + p as f64 * h;
        for (xi, wi) in x.iter().zip(&w) {
            nodes.push(a + 0.5 * h * (xi + 1.0));
            weights.push(0.5 * h * wi);
        }
    }
    (nodes, weights)
}

/// Tensor-product quadrature over a truncated box, in one or two dimensions.
#[derive(Clone, Debug)]
pub struct QuadratureGrid {
    pub dim: usize,
    /// Coordinates; the second entry is unused in one dimension.
    pub points: Vec<[f64; 2]>,
    pub weights: Vec<f64>,
    /// Upper bound on the probability mass outside the box.
    pub truncation_bound: f64,
    pub bounds: Vec<(f64, f64)>,
}

impl QuadratureGrid {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn point(&self, i: usize) -> &[f64] {
        &self.points[i][..self.dim]
    }

    pub(crate) fn tensor(axes: &[(Vec<f64>, Vec<f64>)], truncation_bound: f64, bounds: Vec<(f64, f64)>) -> Self {
        let dim = axes.len();
        let mut points = Vec::new();
        let mut weights = Vec::new();
        match axes {
            [(x, w)] => {
                for (xi, wi) in x.iter().zip(w) {
                    points.push([*xi, 0.0]);
                    weights.push(*wi);
                }
            }
            [(x, wx), (y, wy)] => {
                for (xi, wxi) in x.iter().zip(wx) {
                    for (yj, wyj) in y.iter().zip(wy) {
                        points.push([*xi, *yj]);
                        weights.push(wxi * wyj);
                    }
                }
            }
            _ => unreachable!("grids are one- or two-dimensional"),
        }
        Self {
            dim,
            points,
            weights,
            truncation_bound,
            bounds,
        }
    }

    /// CSV dump with columns `x[,y],weight,mu`.
    pub fn to_csv(&self, mu: impl Fn(&[f64]) -> f64) -> String {
        let mut out = String::from(if self.dim == 1 { "x,weight,mu\n" } else { "x,y,weight,mu\n" });
        for (p, w) in self.points.iter().zip(&self.weights) {
            let coords: Vec<String> = p[..self.dim].iter().map(|c| format!("{c:.17e}")).collect();
            out.push_str(&format!("{},{w:.17e},{:.17e}\n", coords.join(","), mu(&p[..self.dim])));
        }
        out
    }
}
