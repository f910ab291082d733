//! Dense univariate polynomials in the monomial basis.
//!
//! [`RatPoly`] keeps exact rational coefficients and is what coefficient data is
//! stored as. [`Poly`] is the `f64` mirror used for evaluation, stationarity
//! equations and root isolation.

use alloc::vec;
use alloc::vec::Vec;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};

pub type Rational = BigRational;

pub fn rat(n: i64, d: i64) -> Rational {
    Rational::new(BigInt::from(n), BigInt::from(d))
}

pub fn rat_to_f64(r: &Rational) -> f64 {
    r.to_f64().unwrap_or(f64::NAN)
}

/// Exact polynomial with rational coefficients, `c[k]` multiplying `x^k`.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct RatPoly {
    c: Vec<Rational>,
}

impl RatPoly {
    pub fn new(mut c: Vec<Rational>) -> Self {
        while c.last().is_some_and(|v| v.is_zero()) {
            c.pop();
        }
        Self { c }
    }

    pub fn zero() -> Self {
        Self { c: Vec::new() }
    }

    pub fn constant(v: Rational) -> Self {
        Self::new(vec![v])
    }

    /// Builds from small integer ratios, `(num, den)` per coefficient.
    pub fn from_ratios(c: &[(i64, i64)]) -> Self {
        Self::new(c.iter().map(|&(n, d)| rat(n, d)).collect())
    }

    pub fn coeffs(&self) -> &[Rational] {
        &self.c
    }

    pub fn degree(&self) -> Option<usize> {
        self.c.len().checked_sub(1)
    }

    pub fn is_zero(&self) -> bool {
        self.c.is_empty()
    }

    pub fn eval(&self, x: &Rational) -> Rational {
        let mut acc = Rational::zero();
        for v in self.c.iter().rev() {
            acc = acc * x + v;
        }
        acc
    }

    pub fn derivative(&self) -> Self {
        let c = self
            .c
            .iter()
            .enumerate()
            .skip(1)
            .map(|(k, v)| v * Rational::from_integer(BigInt::from(k)))
            .collect();
        Self::new(c)
    }

    pub fn add(&self, other: &Self) -> Self {
        let n = self.c.len().max(other.c.len());
        let c = (0..n)
            .map(|k| {
                let a = self.c.get(k).cloned().unwrap_or_else(Rational::zero);
                let b = other.c.get(k).cloned().unwrap_or_else(Rational::zero);
                a + b
            })
            .collect();
        Self::new(c)
    }

    pub fn neg(&self) -> Self {
        Self::new(self.c.iter().map(|v| -v).collect())
    }

    pub fn sub(&self, other: &Self) -> Self {
        self.add(&other.neg())
    }

    pub fn scale(&self, s: &Rational) -> Self {
        Self::new(self.c.iter().map(|v| v * s).collect())
    }

    pub fn mul(&self, other: &Self) -> Self {
        if self.is_zero() || other.is_zero() {
            return Self::zero();
        }
        let mut c = vec![Rational::zero(); self.c.len() + other.c.len() - 1];
        for (i, a) in self.c.iter().enumerate() {
            for (j, b) in other.c.iter().enumerate() {
                c[i + j] += a * b;
            }
        }
        Self::new(c)
    }

    /// `p(1 - x)`.
    pub fn compose_one_minus(&self) -> Self {
        // Horner in the polynomial ring with x replaced by (1 - x).
        let one_minus_x = Self::new(vec![Rational::one(), -Rational::one()]);
        let mut acc = Self::zero();
        for v in self.c.iter().rev() {
            acc = acc.mul(&one_minus_x).add(&Self::constant(v.clone()));
        }
        acc
    }

    /// `p(a + t)` as a polynomial in `t`.
    pub fn shift(&self, a: &Rational) -> Self {
        let a_plus_t = Self::new(vec![a.clone(), Rational::one()]);
        let mut acc = Self::zero();
        for v in self.c.iter().rev() {
            acc = acc.mul(&a_plus_t).add(&Self::constant(v.clone()));
        }
        acc
    }

    pub fn to_f64(&self) -> Poly {
        Poly::new(self.c.iter().map(rat_to_f64).collect())
    }

    /// Largest absolute coefficient, as a float.
    pub fn max_abs_coeff(&self) -> f64 {
        self.c.iter().map(|v| rat_to_f64(&v.abs())).fold(0.0, f64::max)
    }
}

/// Floating-point polynomial, `c[k]` multiplying `x^k`.
#[derive(Clone, Debug, PartialEq, Default)]
pub struct Poly {
    c: Vec<f64>,
}

impl Poly {
    pub fn new(mut c: Vec<f64>) -> Self {
        while c.last().is_some_and(|v| *v == 0.0) {
            c.pop();
        }
        Self { c }
    }

    pub fn zero() -> Self {
        Self { c: Vec::new() }
    }

    pub fn constant(v: f64) -> Self {
        Self::new(vec![v])
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.c
    }

    pub fn degree(&self) -> Option<usize> {
        self.c.len().checked_sub(1)
    }

    pub fn is_zero(&self) -> bool {
        self.c.is_empty()
    }

    pub fn eval(&self, x: f64) -> f64 {
        self.c.iter().rev().fold(0.0, |acc, v| acc * x + v)
    }

    /// Bound on the rounding error of [`Poly::eval`] at `x`.
    pub fn eval_error_bound(&self, x: f64) -> f64 {
        let ax = x.abs();
        let s = self.c.iter().rev().fold(0.0, |acc, v| acc * ax + v.abs());
        8.0 * f64::EPSILON * s * (self.c.len().max(1) as f64)
    }

    pub fn derivative(&self) -> Self {
        Self::new(
            self.c
                .iter()
                .enumerate()
                .skip(1)
                .map(|(k, v)| v * k as f64)
                .collect(),
        )
    }

    /// Antiderivative vanishing at `x = 0`.
    pub fn antiderivative(&self) -> Self {
        let mut c = Vec::with_capacity(self.c.len() + 1);
        c.push(0.0);
        for (k, v) in self.c.iter().enumerate() {
            c.push(v / (k as f64 + 1.0));
        }
        Self::new(c)
    }

    pub fn add(&self, other: &Self) -> Self {
        let n = self.c.len().max(other.c.len());
        Self::new(
            (0..n)
                .map(|k| self.c.get(k).copied().unwrap_or(0.0) + other.c.get(k).copied().unwrap_or(0.0))
                .collect(),
        )
    }

    pub fn sub(&self, other: &Self) -> Self {
        self.add(&other.scale(-1.0))
    }

    pub fn scale(&self, s: f64) -> Self {
        Self::new(self.c.iter().map(|v| v * s).collect())
    }

    pub fn mul(&self, other: &Self) -> Self {
        if self.is_zero() || other.is_zero() {
            return Self::zero();
        }
        let mut c = vec![0.0; self.c.len() + other.c.len() - 1];
        for (i, a) in self.c.iter().enumerate() {
            for (j, b) in other.c.iter().enumerate() {
                c[i + j] += a * b;
            }
        }
        Self::new(c)
    }

    /// Synthetic division by `(x - r)`: returns quotient and remainder `p(r)`.
    pub fn deflate(&self, r: f64) -> (Self, f64) {
        if self.c.is_empty() {
            return (Self::zero(), 0.0);
        }
        let n = self.c.len();
        let mut q = vec![0.0; n.saturating_sub(1)];
        let mut acc = 0.0;
        for k in (0..n).rev() {
            acc = acc * r + self.c[k];
            if k > 0 {
                q[k - 1] = acc;
            }
        }
        (Self::new(q), acc)
    }

    /// Real roots in the closed interval `[a, b]`, sorted and deduplicated.
    ///
    /// Roots of the derivative split `[a, b]` into monotone pieces; each sign
    /// change is refined by bisection to machine precision. Points where the
    /// value is within rounding error of zero (double roots, roots at the
    /// endpoints) are reported as roots.
    pub fn real_roots(&self, a: f64, b: f64) -> Vec<f64> {
        let mut roots = match self.degree() {
            None | Some(0) => Vec::new(),
            Some(1) => {
                let r = -self.c[0] / self.c[1];
                if r >= a && r <= b {
                    vec![r]
                } else {
                    Vec::new()
                }
            }
            Some(_) => {
                let crit = self.derivative().real_roots(a, b);
                let mut pts = Vec::with_capacity(crit.len() + 2);
                pts.push(a);
                pts.extend(crit.into_iter().filter(|&x| x > a && x < b));
                pts.push(b);
                let mut out = Vec::new();
                for &x in &pts {
                    if self.eval(x).abs() <= self.eval_error_bound(x) {
                        out.push(x);
                    }
                }
                for w in pts.windows(2) {
                    let (x0, x1) = (w[0], w[1]);
                    let (v0, v1) = (self.eval(x0), self.eval(x1));
                    let z0 = v0.abs() <= self.eval_error_bound(x0);
                    let z1 = v1.abs() <= self.eval_error_bound(x1);
                    if !z0 && !z1 && (v0 < 0.0) != (v1 < 0.0) {
                        out.push(self.bisect(x0, x1, v0));
                    }
                }
                out
            }
        };
        roots.sort_by(|x, y| x.partial_cmp(y).unwrap_or(core::cmp::Ordering::Equal));
        roots.dedup_by(|x, y| (*x - *y).abs() <= 1e-12 * (1.0 + y.abs()));
        roots
    }

    fn bisect(&self, mut lo: f64, mut hi: f64, vlo: f64) -> f64 {
        let neg_lo = vlo < 0.0;
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if mid <= lo || mid >= hi {
                break;
            }
            let v = self.eval(mid);
            if v == 0.0 {
                return mid;
            }
            if (v < 0.0) == neg_lo {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        0.5 * (lo + hi)
    }
}

/// Continued-fraction convergents of `x` with denominators up to `max_den`.
pub fn convergents(x: f64, max_den: i64) -> Vec<(i64, i64)> {
    let mut out = Vec::new();
    if !x.is_finite() {
        return out;
    }
    let (mut h0, mut h1) = (0i128, 1i128);
    let (mut k0, mut k1) = (1i128, 0i128);
    let mut r = x;
    for _ in 0..40 {
        let a = libm::floor(r);
        if a.abs() > 1e15 {
            break;
        }
        let ai = a as i128;
        let h2 = ai * h1 + h0;
        let k2 = ai * k1 + k0;
        if k2 > max_den as i128 {
            break;
        }
        out.push((h2 as i64, k2 as i64));
        h0 = h1;
        h1 = h2;
        k0 = k1;
        k1 = k2;
        let frac = r - a;
        if frac.abs() < 1e-15 {
            break;
        }
        r = 1.0 / frac;
    }
    out
}

/// Tries to recover an exact rational root of `p` near the float `x`. The
/// window is wide because multiple roots are only located to about `ε^(1/m)`;
/// the exact evaluation rules out false matches.
pub fn snap_rational_root(p: &RatPoly, x: f64) -> Option<Rational> {
    for (n, d) in convergents(x, 1_000_000).into_iter().rev() {
        let q = rat(n, d);
        if (rat_to_f64(&q) - x).abs() > 1e-4 {
            continue;
        }
        if p.eval(&q).is_zero() {
            return Some(q);
        }
    }
    None
}
