//! Worked examples with known thresholds and closed-form profiles.

use alloc::vec;

use crate::coeffs::{CoefficientSet, PiecewisePolynomial};
use crate::poly::{rat, RatPoly};

fn split_half(left: &[(i64, i64)], right: &[(i64, i64)]) -> PiecewisePolynomial {
    PiecewisePolynomial::new(
        vec![rat(0, 1), rat(1, 2), rat(1, 1)],
        vec![RatPoly::from_ratios(left), RatPoly::from_ratios(right)],
    )
    .expect("preset pieces are continuous")
}

fn whole(c: &[(i64, i64)]) -> PiecewisePolynomial {
    PiecewisePolynomial::single(RatPoly::from_ratios(c))
}

fn build(f: PiecewisePolynomial, g: PiecewisePolynomial, d: PiecewisePolynomial) -> CoefficientSet {
    CoefficientSet::new(f, g, d).expect("preset satisfies the standing assumptions")
}

/// `D = φ(φ-1/2)²` / `-(1-φ)(1/2-φ)²`, tent `g`, cubic `f`: positive-negative
/// diffusivity with a double zero at 1/2 and vertical junction slopes at `c = 0`.
pub fn ex51() -> CoefficientSet {
    build(
        split_half(&[(0, 1), (-1, 2), (3, 4), (1, 3)], &[(-5, 8), (2, 1), (-7, 4), (1, 3)]),
        split_half(&[(0, 1), (1, 1)], &[(1, 1), (-1, 1)]),
        split_half(&[(0, 1), (1, 4), (-1, 1), (1, 1)], &[(-1, 4), (5, 4), (-2, 1), (1, 1)]),
    )
}

fn ex52_f_g() -> (PiecewisePolynomial, PiecewisePolynomial) {
    (
        split_half(&[(0, 1), (0, 1), (-1, 1), (1, 1)], &[(-1, 4), (1, 1), (-2, 1), (1, 1)]),
        split_half(&[(0, 1), (0, 1), (1, 1)], &[(1, 1), (-2, 1), (1, 1)]),
    )
}

/// `g = φ²` / `(1-φ)²`, `D = φ(1/2-φ)` / `-(1-φ)(φ-1/2)`: critical speed 0 with
/// flux `φ²(φ-1/2)` on `(0, 1/2)`.
pub fn ex52() -> CoefficientSet {
    let (f, g) = ex52_f_g();
    build(f, g, split_half(&[(0, 1), (1, 2), (-1, 1)], &[(1, 2), (-3, 2), (1, 1)]))
}

/// [`ex52`] with the diffusivity negated: negative-positive pattern with a
/// strictly positive critical speed.
pub fn ex52_negated() -> CoefficientSet {
    let (f, g) = ex52_f_g();
    build(f, g, split_half(&[(0, 1), (-1, 2), (1, 1)], &[(-1, 2), (3, 2), (-1, 1)]))
}

/// `D = φ - 1/2`, `g = φ(1-φ)`, `f = 0`: both flux-limit thresholds equal 1.
pub fn ex53a() -> CoefficientSet {
    build(whole(&[(0, 1)]), whole(&[(0, 1), (1, 1), (-1, 1)]), whole(&[(-1, 2), (1, 1)]))
}

/// `D = (φ-1/2)³`, `g = φ` / `1-φ`, `f = 0` / `(φ-1/2)²(φ-3/2)`: the threshold
/// from the right of 1/2 exceeds the one from the left, producing a corner.
pub fn ex53b() -> CoefficientSet {
    build(
        split_half(&[(0, 1)], &[(-3, 8), (7, 4), (-5, 2), (1, 1)]),
        split_half(&[(0, 1), (1, 1)], &[(1, 1), (-1, 1)]),
        whole(&[(-1, 8), (3, 4), (-3, 2), (1, 1)]),
    )
}
