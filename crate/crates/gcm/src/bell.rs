//! Partial exponential Bell polynomials with exact integer coefficients.
//!
//! `B_{n,k}(X_1, ..., X_{n-k+1})` is the sum over partitions of an `n`-set into
//! `k` blocks, a block of size `i` contributing a factor `X_i`. Grouping by the
//! block-size profile `h` (with `h_i` blocks of size `i`) gives
//!
//! ```text
//! B_{n,k} = Σ_h  n! / (Π h_i! · Π (i!)^{h_i})  ·  Π X_i^{h_i}
//! ```
//!
//! Conventions: `B_{0,0} = 1`, and `B_{n,k} = 0` when `k > n`, or `k = 0 < n`.
//!
//! ```
//! use gcm::bell::bell_polynomial;
//! let b = bell_polynomial(4, 2);
//! assert_eq!(b.to_string(), "3*X2^2 + 4*X1*X3");
//! ```

use std::fmt;

use num_bigint::BigUint;
use num_traits::{One, Zero};
use serde::Serialize;
use thiserror::Error;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum BellError {
    #[error("B_{{{n},{k}}} needs {needed} arguments, got {got}")]
    Arity {
        n: usize,
        k: usize,
        needed: usize,
        got: usize,
    },
}

/// Block-size profile: `counts[i - 1]` is the number of blocks of size `i`.
#[derive(Clone, Debug, Default, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub struct PartitionVector {
    counts: Vec<usize>,
}

impl PartitionVector {
    pub fn new(mut counts: Vec<usize>) -> Self {
        while counts.last() == Some(&0) {
            counts.pop();
        }
        Self { counts }
    }

    /// Builds a profile from `(size, count)` pairs.
    pub fn from_pairs(pairs: &[(usize, usize)]) -> Self {
        let len = pairs.iter().map(|&(i, _)| i).max().unwrap_or(0);
        let mut counts = vec![0; len];
        for &(i, h) in pairs {
            assert!(i >= 1, "block sizes start at 1");
            counts[i - 1] += h;
        }
        Self::new(counts)
    }

    /// Number of blocks of size `i` (`i >= 1`).
    pub fn count(&self, i: usize) -> usize {
        if i == 0 {
            return 0;
        }
        self.counts.get(i - 1).copied().unwrap_or(0)
    }

    pub fn counts(&self) -> &[usize] {
        &self.counts
    }

    /// `Σ h_i`
    pub fn blocks(&self) -> usize {
        self.counts.iter().sum()
    }

    /// `Σ i·h_i`
    pub fn weight(&self) -> usize {
        self.counts.iter().enumerate().map(|(i, h)| (i + 1) * h).sum()
    }

    pub fn is_member(&self, n: usize, k: usize) -> bool {
        self.blocks() == k && self.weight() == n
    }

    /// Block sizes in ascending order, each repeated by its count.
    pub fn factor_indices(&self) -> Vec<usize> {
        let mut out = Vec::with_capacity(self.blocks());
        for (i, &h) in self.counts.iter().enumerate() {
            out.extend(std::iter::repeat_n(i + 1, h));
        }
        out
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct BellMonomial {
    pub coefficient: BigUint,
    pub exponents: PartitionVector,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct BellPolynomial {
    pub n: usize,
    pub k: usize,
    pub monomials: Vec<BellMonomial>,
}

pub fn factorial(n: usize) -> BigUint {
    (1..=n).fold(BigUint::one(), |acc, i| acc * i)
}

pub fn binomial(n: usize, k: usize) -> BigUint {
    if k > n {
        return BigUint::zero();
    }
    let k = k.min(n - k);
    let mut acc = BigUint::one();
    for i in 0..k {
        acc = acc * (n - i) / (i + 1);
    }
    acc
}

/// Coefficient of `Π X_i^{h_i}` in `B_{n,k}`; zero when `h` is not a profile of `(n, k)`.
pub fn bell_coefficient(n: usize, k: usize, h: &PartitionVector) -> BigUint {
    if !h.is_member(n, k) {
        return BigUint::zero();
    }
    let mut denom = BigUint::one();
    for (idx, &hi) in h.counts().iter().enumerate() {
        denom *= factorial(hi);
        denom *= factorial(idx + 1).pow(hi as u32);
    }
    factorial(n) / denom
}

/// All profiles of `n` into exactly `k` parts, by descent on the largest part.
fn partitions(n: usize, k: usize) -> Vec<Vec<usize>> {
    fn rec(rest: usize, parts: usize, max: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if parts == 0 {
            if rest == 0 {
                out.push(cur.clone());
            }
            return;
        }
        if rest < parts {
            return;
        }
        let hi = max.min(rest - (parts - 1));
        for p in (1..=hi).rev() {
            if p * parts < rest {
                break;
            }
            cur.push(p);
            rec(rest - p, parts - 1, p, cur, out);
            cur.pop();
        }
    }
    let mut out = Vec::new();
    rec(n, k, n, &mut Vec::new(), &mut out);
    out
}

pub fn bell_polynomial(n: usize, k: usize) -> BellPolynomial {
    let mut monomials = Vec::new();
    if n == 0 && k == 0 {
        monomials.push(BellMonomial {
            coefficient: BigUint::one(),
            exponents: PartitionVector::default(),
        });
    } else if k >= 1 && k <= n {
        // Descent yields the parts in decreasing lexicographic order; reversing it
        // lists the most balanced profile first, e.g. `3*X2^2 + 4*X1*X3`.
        let profiles = partitions(n, k).into_iter().rev().map(|parts| {
            let mut counts = vec![0; n - k + 1];
            for p in parts {
                counts[p - 1] += 1;
            }
            PartitionVector::new(counts)
        });
        for h in profiles {
            monomials.push(BellMonomial {
                coefficient: bell_coefficient(n, k, &h),
                exponents: h,
            });
        }
    }
    BellPolynomial { n, k, monomials }
}

impl BellPolynomial {
    /// Number of arguments `X_1..X_{n-k+1}` the polynomial reads.
    pub fn arity(&self) -> usize {
        if self.k == 0 || self.k > self.n {
            0
        } else {
            self.n - self.k + 1
        }
    }

    pub fn is_zero(&self) -> bool {
        self.monomials.is_empty()
    }

    pub fn eval_f64(&self, args: &[f64]) -> Result<f64, BellError> {
        bell_apply(self, args, 0.0, |fs| fs.iter().map(|&&x| x).product(), |acc, c, t| {
            acc + to_f64(c) * t
        })
    }
}

pub(crate) fn to_f64(c: &BigUint) -> f64 {
    num_traits::ToPrimitive::to_f64(c).unwrap_or(f64::INFINITY)
}

/// Evaluates a Bell polynomial over a caller-supplied product structure.
///
/// `product` receives the factors of one monomial in ascending index order
/// (each repeated by its exponent) and returns their product; `add_scaled`
/// folds `acc + coefficient * term`. For `B_{0,0}` the product callback is
/// called with an empty slice and should return the unit.
pub fn bell_apply<T, P, A>(
    poly: &BellPolynomial,
    args: &[T],
    zero: T,
    mut product: P,
    mut add_scaled: A,
) -> Result<T, BellError>
where
    P: FnMut(&[&T]) -> T,
    A: FnMut(T, &BigUint, T) -> T,
{
    let needed = poly.arity();
    if args.len() < needed {
        return Err(BellError::Arity {
            n: poly.n,
            k: poly.k,
            needed,
            got: args.len(),
        });
    }
    let mut acc = zero;
    for m in &poly.monomials {
        let factors: Vec<&T> = m.exponents.factor_indices().iter().map(|&i| &args[i - 1]).collect();
        let term = product(&factors);
        acc = add_scaled(acc, &m.coefficient, term);
    }
    Ok(acc)
}

impl fmt::Display for BellPolynomial {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.monomials.is_empty() {
            return write!(f, "0");
        }
        for (idx, m) in self.monomials.iter().enumerate() {
            if idx > 0 {
                write!(f, " + ")?;
            }
            let mut parts = Vec::new();
            if !m.coefficient.is_one() || m.exponents.blocks() == 0 {
                parts.push(m.coefficient.to_string());
            }
            for (i, &h) in m.exponents.counts().iter().enumerate() {
                match h {
                    0 => {}
                    1 => parts.push(format!("X{}", i + 1)),
                    _ => parts.push(format!("X{}^{}", i + 1, h)),
                }
            }
            write!(f, "{}", parts.join("*"))?;
        }
        Ok(())
    }
}

/// Stirling numbers of the second kind by the triangle recurrence.
pub fn stirling2(n: usize, k: usize) -> BigUint {
    let mut row = vec![BigUint::one()];
    for i in 1..=n {
        let mut next = vec![BigUint::zero(); i + 1];
        for j in 1..=i {
            let keep = if j < i { &row[j] * j } else { BigUint::zero() };
            next[j] = keep + &row[j - 1];
        }
        row = next;
    }
    row.get(k).cloned().unwrap_or_default()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn table_up_to_four() {
        let expect = [
            ((1, 1), "X1"),
            ((2, 1), "X2"),
            ((2, 2), "X1^2"),
            ((3, 1), "X3"),
            ((3, 2), "3*X1*X2"),
            ((3, 3), "X1^3"),
            ((4, 1), "X4"),
            ((4, 2), "3*X2^2 + 4*X1*X3"),
            ((4, 3), "6*X1^2*X2"),
            ((4, 4), "X1^4"),
        ];
        for ((n, k), s) in expect {
            assert_eq!(bell_polynomial(n, k).to_string(), s, "B_{n},{k}");
        }
    }

    #[test]
    fn conventions() {
        assert_eq!(bell_polynomial(0, 0).to_string(), "1");
        assert!(bell_polynomial(3, 0).is_zero());
        assert!(bell_polynomial(0, 2).is_zero());
        assert!(bell_polynomial(2, 3).is_zero());
    }

    #[test]
    fn coefficient_examples() {
        let h = PartitionVector::from_pairs(&[(2, 2)]);
        assert_eq!(bell_coefficient(4, 2, &h), BigUint::from(3u32));
        let h = PartitionVector::from_pairs(&[(1, 1)]);
        assert_eq!(bell_coefficient(1, 1, &h), BigUint::from(1u32));
        let h = PartitionVector::from_pairs(&[(1, 1), (2, 1), (3, 1)]);
        assert_eq!(bell_coefficient(6, 3, &h), BigUint::from(60u32));
        assert_eq!(bell_coefficient(5, 3, &h), BigUint::zero());
    }

    #[test]
    fn apply_scalars() {
        assert_eq!(bell_polynomial(2, 2).eval_f64(&[5.0]).unwrap(), 25.0);
        assert_eq!(bell_polynomial(4, 2).eval_f64(&[1.0, 2.0, 3.0]).unwrap(), 24.0);
        let err = bell_polynomial(4, 2).eval_f64(&[1.0, 2.0]).unwrap_err();
        assert_eq!(err, BellError::Arity { n: 4, k: 2, needed: 3, got: 2 });
    }

    #[test]
    fn stirling_values() {
        assert_eq!(stirling2(7, 3), BigUint::from(301u32));
        assert_eq!(stirling2(0, 0), BigUint::one());
        assert_eq!(stirling2(5, 0), BigUint::zero());
    }
}
