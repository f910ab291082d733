//! Piecewise-polynomial coefficients `f`, `g`, `D` on `[0, 1]`, assumption
//! checks, sign-pattern classification of `D`, and the exact sups used by the
//! speed bounds.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use num_traits::{One, Zero};

use crate::error::{Error, Result};
use crate::poly::{rat_to_f64, snap_rational_root, Poly, RatPoly, Rational};

pub const MAX_DEGREE: usize = 12;

/// Which one-sided limit to take at a point.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub enum Side {
    /// Limit from below, `x -> x0-`.
    Left,
    /// Limit from above, `x -> x0+`.
    Right,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub enum Continuity {
    C0,
    C1,
}

/// Polynomial pieces on consecutive subintervals of `[0, 1]`.
#[derive(Clone, Debug)]
pub struct PiecewisePolynomial {
    breakpoints: Vec<Rational>,
    pieces: Vec<RatPoly>,
    bp: Vec<f64>,
    fp: Vec<Poly>,
    // Each piece re-expanded about its endpoints (and optionally its zeros),
    // so values near a high-order zero keep their relative accuracy.
    local: Vec<Vec<Expansion>>,
}

#[derive(Clone, Debug)]
struct Expansion {
    center: f64,
    p: Poly,
    dp: Poly,
}

impl Expansion {
    fn new(piece: &RatPoly, center: &Rational) -> Self {
        let q = piece.shift(center);
        Self { center: rat_to_f64(center), p: q.to_f64(), dp: q.derivative().to_f64() }
    }
}

impl PartialEq for PiecewisePolynomial {
    fn eq(&self, other: &Self) -> bool {
        self.breakpoints == other.breakpoints && self.pieces == other.pieces
    }
}

impl PiecewisePolynomial {
    /// Checks breakpoint order, the degree cap and exact continuity.
    pub fn new(breakpoints: Vec<Rational>, pieces: Vec<RatPoly>) -> Result<Self> {
        if breakpoints.len() < 2 || pieces.len() + 1 != breakpoints.len() {
            return Err(Error::MalformedCoefficients(format!(
                "{} breakpoints do not match {} pieces",
                breakpoints.len(),
                pieces.len()
            )));
        }
        if !breakpoints[0].is_zero() || !breakpoints[breakpoints.len() - 1].is_one() {
            return Err(Error::MalformedCoefficients("breakpoints must start at 0 and end at 1".into()));
        }
        if breakpoints.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::MalformedCoefficients("breakpoints must be strictly increasing".into()));
        }
        if let Some(p) = pieces.iter().position(|p| p.degree().unwrap_or(0) > MAX_DEGREE) {
            return Err(Error::MalformedCoefficients(format!("piece {p} exceeds degree {MAX_DEGREE}")));
        }
        for i in 1..pieces.len() {
            let x = &breakpoints[i];
            if pieces[i - 1].eval(x) != pieces[i].eval(x) {
                return Err(Error::MalformedCoefficients(format!(
                    "pieces {} and {} disagree at breakpoint {}",
                    i - 1,
                    i,
                    rat_to_f64(x)
                )));
            }
        }
        Ok(Self::from_parts(breakpoints, pieces))
    }

    /// A single polynomial on all of `[0, 1]`.
    pub fn single(p: RatPoly) -> Self {
        Self::from_parts(vec![Rational::zero(), Rational::one()], vec![p])
    }

    fn from_parts(breakpoints: Vec<Rational>, pieces: Vec<RatPoly>) -> Self {
        let bp = breakpoints.iter().map(rat_to_f64).collect();
        let fp = pieces.iter().map(RatPoly::to_f64).collect();
        let local = pieces
            .iter()
            .enumerate()
            .map(|(i, p)| vec![Expansion::new(p, &breakpoints[i]), Expansion::new(p, &breakpoints[i + 1])])
            .collect();
        Self { breakpoints, pieces, bp, fp, local }
    }

    pub fn breakpoints(&self) -> &[Rational] {
        &self.breakpoints
    }

    pub fn pieces(&self) -> &[RatPoly] {
        &self.pieces
    }

    pub fn breakpoints_f64(&self) -> &[f64] {
        &self.bp
    }

    pub fn pieces_f64(&self) -> &[Poly] {
        &self.fp
    }

    /// Index of the piece governing the one-sided limit at `x`.
    pub fn piece_index(&self, x: f64, side: Side) -> usize {
        let n = self.fp.len();
        match side {
            Side::Left => (0..n).find(|&i| x <= self.bp[i + 1]).unwrap_or(n - 1),
            Side::Right => (0..n).rev().find(|&i| x >= self.bp[i]).unwrap_or(0),
        }
    }

    fn expansion(&self, x: f64, side: Side) -> &Expansion {
        let i = self.piece_index(x, side);
        let mut best = &self.local[i][0];
        for e in &self.local[i][1..] {
            if (x - e.center).abs() < (x - best.center).abs() {
                best = e;
            }
        }
        best
    }

    /// Adds expansions about the interior zeros of each piece.
    pub(crate) fn with_root_centers(mut self) -> Self {
        for (i, p) in self.fp.iter().enumerate() {
            if p.is_zero() {
                continue;
            }
            for r in p.real_roots(self.bp[i], self.bp[i + 1]) {
                if r <= self.bp[i] || r >= self.bp[i + 1] {
                    continue;
                }
                let center = snap_rational_root(&self.pieces[i], r)
                    .or_else(|| Rational::from_float(r))
                    .expect("isolated roots are finite");
                self.local[i].push(Expansion::new(&self.pieces[i], &center));
            }
        }
        self
    }

    pub fn value(&self, x: f64) -> f64 {
        self.value_side(x, Side::Left)
    }

    pub fn value_side(&self, x: f64, side: Side) -> f64 {
        let e = self.expansion(x, side);
        e.p.eval(x - e.center)
    }

    /// One-sided derivative at `x`.
    pub fn slope(&self, x: f64, side: Side) -> f64 {
        let e = self.expansion(x, side);
        e.dp.eval(x - e.center)
    }

    fn rational_index(&self, x: &Rational, side: Side) -> usize {
        let n = self.pieces.len();
        match side {
            Side::Left => (0..n).find(|&i| *x <= self.breakpoints[i + 1]).unwrap_or(n - 1),
            Side::Right => (0..n).rev().find(|&i| *x >= self.breakpoints[i]).unwrap_or(0),
        }
    }

    pub fn eval_exact(&self, x: &Rational, side: Side) -> Rational {
        self.pieces[self.rational_index(x, side)].eval(x)
    }

    pub fn slope_exact(&self, x: &Rational, side: Side) -> Rational {
        self.pieces[self.rational_index(x, side)].derivative().eval(x)
    }

    pub fn derivative(&self) -> Self {
        Self::from_parts(self.breakpoints.clone(), self.pieces.iter().map(RatPoly::derivative).collect())
    }

    pub fn neg(&self) -> Self {
        Self::from_parts(self.breakpoints.clone(), self.pieces.iter().map(RatPoly::neg).collect())
    }

    /// Exact product on the union of both breakpoint sets.
    pub fn product(&self, other: &Self) -> Self {
        let mut bps: Vec<Rational> = self.breakpoints.iter().chain(other.breakpoints.iter()).cloned().collect();
        bps.sort();
        bps.dedup();
        let two = Rational::from_integer(2.into());
        let pieces = bps
            .windows(2)
            .map(|w| {
                let mid = (&w[0] + &w[1]) / &two;
                let a = &self.pieces[self.rational_index(&mid, Side::Left)];
                let b = &other.pieces[other.rational_index(&mid, Side::Left)];
                a.mul(b)
            })
            .collect();
        Self::from_parts(bps, pieces)
    }

    /// `x -> p(1 - x)` with mirrored breakpoints.
    pub fn reflect_argument(&self) -> Self {
        let one = Rational::one();
        let bps = self.breakpoints.iter().rev().map(|b| &one - b).collect();
        let pieces = self.pieces.iter().rev().map(RatPoly::compose_one_minus).collect();
        Self::from_parts(bps, pieces)
    }

    pub fn continuity(&self) -> Vec<Continuity> {
        (1..self.pieces.len())
            .map(|i| {
                let x = &self.breakpoints[i];
                if self.pieces[i - 1].derivative().eval(x) == self.pieces[i].derivative().eval(x) {
                    Continuity::C1
                } else {
                    Continuity::C0
                }
            })
            .collect()
    }

    /// Pieces overlapping `[lo, hi]`, clipped: `(x0, x1, piece index)`.
    pub fn segments(&self, lo: f64, hi: f64) -> Vec<(f64, f64, usize)> {
        (0..self.fp.len())
            .filter_map(|i| {
                let x0 = self.bp[i].max(lo);
                let x1 = self.bp[i + 1].min(hi);
                (x1 > x0).then_some((x0, x1, i))
            })
            .collect()
    }

    pub fn max_degree(&self) -> usize {
        self.pieces.iter().filter_map(RatPoly::degree).max().unwrap_or(0)
    }
}

/// The coefficient triple plus the derived `h = f'`, `D'` and `D g`.
#[derive(Clone, Debug)]
pub struct CoefficientSet {
    f: PiecewisePolynomial,
    g: PiecewisePolynomial,
    d: PiecewisePolynomial,
    h: PiecewisePolynomial,
    dg: PiecewisePolynomial,
}

impl PartialEq for CoefficientSet {
    fn eq(&self, other: &Self) -> bool {
        self.f == other.f && self.g == other.g && self.d == other.d
    }
}

impl CoefficientSet {
    /// Enforces `f(0) = 0`, `g(0) = g(1) = 0` and `g > 0` on `(0, 1)`.
    pub fn new(f: PiecewisePolynomial, g: PiecewisePolynomial, d: PiecewisePolynomial) -> Result<Self> {
        let zero = Rational::zero();
        let one = Rational::one();
        if !f.eval_exact(&zero, Side::Right).is_zero() {
            return Err(Error::AssumptionViolated("f(0) = 0".into()));
        }
        if !g.eval_exact(&zero, Side::Right).is_zero() || !g.eval_exact(&one, Side::Left).is_zero() {
            return Err(Error::AssumptionViolated("g(0) = g(1) = 0".into()));
        }
        check_positive_inside(&g)?;
        let h = f.derivative();
        let dg = d.product(&g);
        let d = d.with_root_centers();
        Ok(Self { f, g, d, h, dg })
    }

    pub fn f(&self) -> &PiecewisePolynomial {
        &self.f
    }
    pub fn g(&self) -> &PiecewisePolynomial {
        &self.g
    }
    pub fn d(&self) -> &PiecewisePolynomial {
        &self.d
    }
    pub fn h(&self) -> &PiecewisePolynomial {
        &self.h
    }
    pub fn dg(&self) -> &PiecewisePolynomial {
        &self.dg
    }

    /// `D̄(φ) = -D(1-φ)`, `ḡ(φ) = g(1-φ)`, `f̄(φ) = f(1) - f(1-φ)`.
    pub fn reflect(&self) -> Self {
        let f1 = self.f.eval_exact(&Rational::one(), Side::Left);
        let fr = self.f.reflect_argument();
        let f_bar = PiecewisePolynomial::from_parts(
            fr.breakpoints.clone(),
            fr.pieces.iter().map(|p| RatPoly::constant(f1.clone()).sub(p)).collect(),
        );
        let g_bar = self.g.reflect_argument();
        let d_bar = self.d.reflect_argument().neg().with_root_centers();
        let h = f_bar.derivative();
        let dg = d_bar.product(&g_bar);
        Self { f: f_bar, g: g_bar, d: d_bar, h, dg }
    }

    /// `h(x) - c`, `D'(x)` and `(Dg)'(x)` from the requested side.
    pub fn local_data(&self, x: f64, side: Side) -> LocalData {
        LocalData {
            h: self.h.value_side(x, side),
            d: self.d.value_side(x, side),
            d_slope: self.d.slope(x, side),
            g: self.g.value_side(x, side),
            g_slope: self.g.slope(x, side),
            dg_slope: self.dg.slope(x, side),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LocalData {
    pub h: f64,
    pub d: f64,
    pub d_slope: f64,
    pub g: f64,
    pub g_slope: f64,
    pub dg_slope: f64,
}

fn check_positive_inside(g: &PiecewisePolynomial) -> Result<()> {
    let bad = || Error::AssumptionViolated("g positive on (0,1)".into());
    for (i, p) in g.pieces_f64().iter().enumerate() {
        let (a, b) = (g.breakpoints_f64()[i], g.breakpoints_f64()[i + 1]);
        if p.is_zero() {
            return Err(bad());
        }
        if p.real_roots(a, b).iter().any(|&r| r > 0.0 && r < 1.0) {
            return Err(bad());
        }
        if p.eval(0.5 * (a + b)) <= 0.0 {
            return Err(bad());
        }
    }
    Ok(())
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub enum Pattern {
    #[cfg_attr(feature = "serde", serde(rename = "PN"))]
    Pn,
    #[cfg_attr(feature = "serde", serde(rename = "NP"))]
    Np,
    #[cfg_attr(feature = "serde", serde(rename = "PNP"))]
    Pnp,
    #[cfg_attr(feature = "serde", serde(rename = "NPN"))]
    Npn,
    #[cfg_attr(feature = "serde", serde(rename = "UNSUPPORTED"))]
    Unsupported,
}

#[derive(Clone, Copy, Debug, PartialEq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize))]
pub struct EndpointSlopes {
    pub zero: f64,
    pub one: f64,
    pub alpha_minus: Option<f64>,
    pub alpha_plus: Option<f64>,
    pub beta_minus: Option<f64>,
    pub beta_plus: Option<f64>,
}

/// Sign pattern of `D` with its degeneracy points.
///
/// `alpha` is a zero where `D` goes from positive to negative, `beta` one where
/// it goes from negative to positive.
#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize))]
pub struct CaseClassification {
    pub pattern: Pattern,
    pub alpha: Option<f64>,
    pub beta: Option<f64>,
    /// Whether the reported zeros were confirmed as exact rational roots.
    pub zeros_exact: bool,
    pub endpoint_values: [f64; 2],
    pub endpoint_slopes: EndpointSlopes,
    /// Finiteness of the one-sided `Dg` Dini derivatives at 0 and at 1.
    pub dg_conditions: [bool; 2],
}

/// Classifies the sign pattern of `D` by per-piece root isolation.
pub fn validate(coeffs: &CoefficientSet) -> Result<CaseClassification> {
    let d = coeffs.d();
    let bp = d.breakpoints_f64();
    let mut zeros: Vec<(f64, Option<Rational>)> = Vec::new();
    for (i, p) in d.pieces_f64().iter().enumerate() {
        if p.is_zero() {
            return Err(Error::AssumptionViolated(format!(
                "D vanishes identically on [{}, {}]",
                bp[i],
                bp[i + 1]
            )));
        }
        for r in p.real_roots(bp[i], bp[i + 1]) {
            if r <= 0.0 || r >= 1.0 {
                continue;
            }
            let exact = breakpoint_match(d, r).or_else(|| snap_rational_root(&d.pieces()[i], r));
            zeros.push((r, exact));
        }
    }
    zeros.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap_or(core::cmp::Ordering::Equal));
    zeros.dedup_by(|a, b| (a.0 - b.0).abs() <= 1e-12);

    let mut cuts: Vec<f64> = vec![0.0, 1.0];
    cuts.extend(bp.iter().copied());
    cuts.extend(zeros.iter().map(|z| z.0));
    cuts.sort_by(|a, b| a.partial_cmp(b).unwrap_or(core::cmp::Ordering::Equal));
    cuts.dedup_by(|a, b| (*a - *b).abs() <= 1e-12);

    // Signs on consecutive open cells, with the cell boundaries.
    let mut cells: Vec<(i8, f64, f64)> = Vec::new();
    for w in cuts.windows(2) {
        let v = d.value(0.5 * (w[0] + w[1]));
        let s = if v > 0.0 {
            1
        } else if v < 0.0 {
            -1
        } else {
            0
        };
        if s == 0 {
            return Err(Error::AssumptionViolated(format!("D vanishes on ({}, {})", w[0], w[1])));
        }
        match cells.last_mut() {
            Some(last) if last.0 == s => last.2 = w[1],
            _ => cells.push((s, w[0], w[1])),
        }
    }
    let changes: Vec<f64> = cells.windows(2).map(|w| w[0].2).collect();
    for z in &zeros {
        if !changes.iter().any(|c| (c - z.0).abs() <= 1e-12) {
            return Err(Error::AssumptionViolated(format!(
                "D has a zero without sign change at {}",
                z.0
            )));
        }
    }
    let exact_of = |x: f64| zeros.iter().find(|z| (z.0 - x).abs() <= 1e-12).and_then(|z| z.1.clone());
    let signs: Vec<i8> = cells.iter().map(|c| c.0).collect();
    let (pattern, alpha, beta) = match signs.as_slice() {
        [1, -1] => (Pattern::Pn, Some(changes[0]), None),
        [-1, 1] => (Pattern::Np, None, Some(changes[0])),
        [1, -1, 1] => (Pattern::Pnp, Some(changes[0]), Some(changes[1])),
        [-1, 1, -1] => (Pattern::Npn, Some(changes[1]), Some(changes[0])),
        _ => (Pattern::Unsupported, None, None),
    };
    let zeros_exact = alpha.iter().chain(beta.iter()).all(|&x| exact_of(x).is_some());
    // Snap to the exact value when one was found so that D(alpha) = 0 holds exactly.
    let snap = |x: Option<f64>| x.map(|v| exact_of(v).map(|r| rat_to_f64(&r)).unwrap_or(v));
    let alpha = snap(alpha);
    let beta = snap(beta);

    let endpoint_slopes = EndpointSlopes {
        zero: d.slope(0.0, Side::Right),
        one: d.slope(1.0, Side::Left),
        alpha_minus: alpha.map(|a| d.slope(a, Side::Left)),
        alpha_plus: alpha.map(|a| d.slope(a, Side::Right)),
        beta_minus: beta.map(|b| d.slope(b, Side::Left)),
        beta_plus: beta.map(|b| d.slope(b, Side::Right)),
    };
    Ok(CaseClassification {
        pattern,
        alpha,
        beta,
        zeros_exact,
        endpoint_values: [d.value_side(0.0, Side::Right), d.value_side(1.0, Side::Left)],
        endpoint_slopes,
        dg_conditions: [dini_dg_at_zero(coeffs).is_finite(), dini_dg_at_one(coeffs).is_finite()],
    })
}

fn breakpoint_match(p: &PiecewisePolynomial, x: f64) -> Option<Rational> {
    p.breakpoints()
        .iter()
        .find(|b| rat_to_f64(b) == x)
        .filter(|b| p.eval_exact(b, Side::Left).is_zero() && p.eval_exact(b, Side::Right).is_zero())
        .cloned()
}

/// Right Dini derivative of `D g` at 0; the exact one-sided derivative for polynomial pieces.
pub fn dini_dg_at_zero(coeffs: &CoefficientSet) -> f64 {
    rat_to_f64(&coeffs.dg().slope_exact(&Rational::zero(), Side::Right))
}

/// Left Dini derivative of `D g` at 1.
pub fn dini_dg_at_one(coeffs: &CoefficientSet) -> f64 {
    rat_to_f64(&coeffs.dg().slope_exact(&Rational::one(), Side::Left))
}

/// Sup of `(F(φ) - F(base)) / (φ - base)` over `interval`, `base` being one of
/// its endpoints (excluded, contributing the one-sided derivative as a limit).
///
/// Each piece is handled through the zeros of the stationarity polynomial of
/// the quotient.
pub fn sup_difference_quotient(f: &PiecewisePolynomial, base: f64, interval: (f64, f64)) -> f64 {
    let (lo, hi) = interval;
    let fb = f.value(base);
    let mut best = f64::NEG_INFINITY;
    for (x0, x1, i) in f.segments(lo, hi) {
        let p = f.pieces_f64()[i].sub(&Poly::constant(fb));
        if x0 == base || x1 == base {
            let (q, _) = p.deflate(base);
            let mut cands = vec![x0, x1];
            cands.extend(q.derivative().real_roots(x0, x1));
            for x in cands {
                best = best.max(q.eval(x));
            }
        } else {
            let lin = Poly::new(vec![-base, 1.0]);
            let n = p.derivative().mul(&lin).sub(&p);
            let mut cands = vec![x0, x1];
            cands.extend(n.real_roots(x0, x1));
            for x in cands {
                best = best.max(p.eval(x) / (x - base));
            }
        }
    }
    best
}

/// Sup over `φ` in `interval` of the mean value of `Dg(s)/(s - base)` between
/// `base` and `φ`; the limit at `base` is included.
pub fn mean_value_quotient_sup(coeffs: &CoefficientSet, base: f64, interval: (f64, f64)) -> Result<f64> {
    let dg = coeffs.dg();
    let scale = dg.pieces().iter().map(RatPoly::max_abs_coeff).fold(0.0, f64::max);
    if dg.value(base).abs() > 1e-12 * scale.max(1.0) {
        return Err(Error::NonIntegrableSingularity { base });
    }
    let (lo, hi) = interval;
    let mut segs = dg.segments(lo, hi);
    let upward = base <= lo;
    if !upward {
        segs.reverse();
    }
    let mut best = f64::NEG_INFINITY;
    let mut acc = 0.0;
    for (x0, x1, i) in segs {
        let (near, far) = if upward { (x0, x1) } else { (x1, x0) };
        let p = &dg.pieces_f64()[i];
        let (q, rem) = p.deflate(base);
        let qa = q.antiderivative();
        let touches = near == base;
        let integral = |x: f64| -> f64 {
            let mut v = acc + qa.eval(x) - qa.eval(near);
            if !touches {
                v += rem * (libm::log((x - base).abs()) - libm::log((near - base).abs()));
            }
            v
        };
        let mut cands = vec![far];
        if touches {
            best = best.max(q.eval(base));
            // p(x) - I(x) with I polynomial
            let n = p.sub(&qa).add(&Poly::constant(qa.eval(base)));
            cands.extend(n.real_roots(x0.min(x1), x0.max(x1)));
        } else {
            cands.push(near);
            let n = |x: f64| p.eval(x) - integral(x);
            cands.extend(sampled_roots(n, x0.min(x1), x0.max(x1), 256));
        }
        for x in cands {
            if x != base {
                best = best.max(integral(x) / (x - base));
            }
        }
        acc = integral(far);
    }
    Ok(best)
}

/// Sign changes of `f` on a uniform sample of `[a, b]`, refined by bisection.
pub(crate) fn sampled_roots(f: impl Fn(f64) -> f64, a: f64, b: f64, n: usize) -> Vec<f64> {
    let mut out = Vec::new();
    let mut x0 = a;
    let mut v0 = f(a);
    for k in 1..=n {
        let x1 = a + (b - a) * k as f64 / n as f64;
        let v1 = f(x1);
        if v0 == 0.0 {
            out.push(x0);
        } else if (v0 < 0.0) != (v1 < 0.0) && v1 != 0.0 {
            let (mut lo, mut hi, mut vlo) = (x0, x1, v0);
            for _ in 0..200 {
                let mid = 0.5 * (lo + hi);
                if mid <= lo || mid >= hi {
                    break;
                }
                let vm = f(mid);
                if (vm < 0.0) == (vlo < 0.0) {
                    lo = mid;
                    vlo = vm;
                } else {
                    hi = mid;
                }
            }
            out.push(0.5 * (lo + hi));
        }
        x0 = x1;
        v0 = v1;
    }
    out
}
