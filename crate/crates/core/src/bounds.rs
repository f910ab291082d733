//! Analytic brackets for the threshold speeds and the local slopes `s_±`.

use alloc::format;

use crate::coeffs::{mean_value_quotient_sup, sup_difference_quotient, CoefficientSet, Side};
use crate::error::{Error, Result};

/// Formula behind one end of a [`SpeedBracket`].
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum BoundSource {
    /// `sup δ(f, base)`.
    ConvectionQuotient,
    /// `h(base) + 2√(slope of Dg at base)`.
    LocalSlope,
    /// `sup δ(f, base) + 2√(sup δ(Dg, base))`.
    ReactionQuotient,
    /// `sup δ(f, base) + 2√(sup of the mean of Dg/(s - base))`.
    MeanValue,
}

#[derive(Clone, Copy, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct SpeedBracket {
    pub lower: f64,
    pub upper: f64,
    /// Mean-value refinement of `upper`, when it applies.
    pub refined_upper: Option<f64>,
    pub lower_source: BoundSource,
    pub upper_source: BoundSource,
}

impl SpeedBracket {
    /// The tightest certified upper bound.
    pub fn best_upper(&self) -> f64 {
        self.refined_upper.map_or(self.upper, |r| r.min(self.upper))
    }
}

/// Roots of `s² - (h(γ) - c)s + p = 0` with `p` the one-sided slope of `Dg` at `γ`.
#[derive(Clone, Copy, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct SlopePair {
    pub gamma: f64,
    pub c: f64,
    pub s_minus: f64,
    pub s_plus: f64,
    pub discriminant: f64,
}

/// Real roots of `s² - b s + p`, ordered, or `None` when complex.
pub fn quadratic_roots(b: f64, p: f64) -> Option<(f64, f64, f64)> {
    let disc = b * b - 4.0 * p;
    let tiny = 64.0 * f64::EPSILON * (b * b + 4.0 * p.abs());
    if disc < -tiny {
        return None;
    }
    let sq = libm::sqrt(disc.max(0.0));
    let (r1, r2) = if b == 0.0 && sq == 0.0 {
        (0.0, 0.0)
    } else {
        let q = 0.5 * (b + if b >= 0.0 { sq } else { -sq });
        if q == 0.0 {
            (0.0, 0.0)
        } else {
            (q, p / q)
        }
    };
    Some((r1.min(r2), r1.max(r2), disc))
}

/// `s_±(γ, c)` using the one-sided data of the side given (the side on which
/// the interval under analysis lies).
///
/// The product term is `(Dg)'(γ)`, which equals `D'(γ)g(γ)` wherever `D` or `g`
/// vanishes at `γ`.
pub fn slope_pair(coeffs: &CoefficientSet, gamma: f64, c: f64, side: Side) -> Result<SlopePair> {
    let ld = coeffs.local_data(gamma, side);
    let b = ld.h - c;
    match quadratic_roots(b, ld.dg_slope) {
        Some((s_minus, s_plus, discriminant)) => Ok(SlopePair { gamma, c, s_minus, s_plus, discriminant }),
        None => Err(Error::ComplexRoots { gamma, c, discriminant: b * b - 4.0 * ld.dg_slope }),
    }
}

fn check_sign(coeffs: &CoefficientSet, interval: (f64, f64), positive: bool, what: &str) -> Result<()> {
    let d = coeffs.d();
    let (a, b) = interval;
    for (x0, x1, i) in d.segments(a, b) {
        let p = &d.pieces_f64()[i];
        let inner = p.real_roots(x0, x1).into_iter().any(|r| r > a + 1e-12 && r < b - 1e-12);
        let mid = p.eval(0.5 * (x0 + x1));
        if inner || (mid > 0.0) != positive || mid == 0.0 {
            return Err(Error::PreconditionFailed(format!(
                "D must be {} on ({a}, {b}) for {what}",
                if positive { "positive" } else { "negative" }
            )));
        }
    }
    Ok(())
}

/// Bracket for the threshold of semi-wavefronts from `alpha` to 0, using `D > 0` on `(0, alpha)`.
pub fn bracket_c_pr(coeffs: &CoefficientSet, alpha: f64) -> Result<SpeedBracket> {
    check_sign(coeffs, (0.0, alpha), true, "c_pr")?;
    let dini = coeffs.dg().slope(0.0, Side::Right);
    if !dini.is_finite() {
        return Err(Error::PreconditionFailed("upper Dini derivative of Dg at 0 is infinite".into()));
    }
    let conv = sup_difference_quotient(coeffs.f(), 0.0, (0.0, alpha));
    let h0 = coeffs.h().value_side(0.0, Side::Right);
    let (lower, lower_source) = lower_of(conv, (dini >= 0.0).then(|| h0 + 2.0 * libm::sqrt(dini)));
    let react = sup_difference_quotient(coeffs.dg(), 0.0, (0.0, alpha)).max(0.0);
    let upper = conv + 2.0 * libm::sqrt(react);
    let mean = mean_value_quotient_sup(coeffs, 0.0, (0.0, alpha))?.max(0.0);
    let refined = (conv + 2.0 * libm::sqrt(mean)).min(upper);
    Ok(SpeedBracket {
        lower,
        upper,
        refined_upper: Some(refined),
        lower_source,
        upper_source: BoundSource::ReactionQuotient,
    })
}

/// Bracket for the threshold of semi-wavefronts from 1 to `alpha`, via reflection.
pub fn bracket_c_nl(coeffs: &CoefficientSet, alpha: f64) -> Result<SpeedBracket> {
    bracket_c_pr(&coeffs.reflect(), 1.0 - alpha)
}

/// Bracket for the flux-limit threshold on `(beta, 1]`, using `D > 0` there.
pub fn bracket_c_pl(coeffs: &CoefficientSet, beta: f64) -> Result<SpeedBracket> {
    check_sign(coeffs, (beta, 1.0), true, "c_pl")?;
    Ok(degenerate_end_bracket(coeffs, beta, (beta, 1.0), Side::Right))
}

/// Bracket for the flux-limit threshold on `[0, beta)`, via reflection.
pub fn bracket_c_nr(coeffs: &CoefficientSet, beta: f64) -> Result<SpeedBracket> {
    bracket_c_pl(&coeffs.reflect(), 1.0 - beta)
}

/// Bounds-style hint for the connection between two zeros of `D`: the
/// flux-limit formulas centred at `beta` on the interval between them.
pub fn bracket_interior(coeffs: &CoefficientSet, alpha: f64, beta: f64) -> Result<SpeedBracket> {
    let interval = (alpha.min(beta), alpha.max(beta));
    let side = if beta < alpha { Side::Right } else { Side::Left };
    let mid = 0.5 * (interval.0 + interval.1);
    if coeffs.d().value(mid) == 0.0 {
        return Err(Error::PreconditionFailed("D vanishes inside the connection interval".into()));
    }
    Ok(degenerate_end_bracket(coeffs, beta, interval, side))
}

fn degenerate_end_bracket(coeffs: &CoefficientSet, beta: f64, interval: (f64, f64), side: Side) -> SpeedBracket {
    let conv = sup_difference_quotient(coeffs.f(), beta, interval);
    let ld = coeffs.local_data(beta, side);
    let prod = ld.d_slope * ld.g;
    let (lower, lower_source) = lower_of(conv, (prod >= 0.0).then(|| ld.h + 2.0 * libm::sqrt(prod)));
    // Dg(β) = 0, so the mean value form is always available here.
    let mean = mean_value_quotient_sup(coeffs, beta, interval).unwrap_or(f64::INFINITY).max(0.0);
    SpeedBracket {
        lower,
        upper: (conv + 2.0 * libm::sqrt(mean)).max(lower),
        refined_upper: None,
        lower_source,
        upper_source: BoundSource::MeanValue,
    }
}

fn lower_of(conv: f64, local: Option<f64>) -> (f64, BoundSource) {
    match local {
        Some(l) if l > conv => (l, BoundSource::LocalSlope),
        _ => (conv, BoundSource::ConvectionQuotient),
    }
}

/// Whether the convection quotients leave room for a speed `c ≤ h(alpha)`,
/// the necessary condition for vertical junction slopes when `D'(alpha) = 0`.
pub fn check_vertical_necessary_condition(coeffs: &CoefficientSet, alpha: f64) -> bool {
    let left = sup_difference_quotient(coeffs.f(), 0.0, (0.0, alpha));
    let right = sup_difference_quotient(coeffs.f(), 1.0, (alpha, 1.0));
    left.max(right) <= coeffs.h().value(alpha) + 1e-12
}

/// Whether `h(φ) ≥ h(0)` on sample points approaching 0 inside `(0, alpha)`.
/// When this holds the lower estimate of the threshold at 0 may be strict.
pub fn lower_bound_possibly_strict(coeffs: &CoefficientSet, alpha: f64) -> bool {
    let h = coeffs.h();
    let h0 = h.value_side(0.0, Side::Right);
    (4..=16).all(|k| h.value(alpha * libm::ldexp(1.0, -k)) >= h0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::presets;
    use proptest::prelude::*;

    #[test]
    fn strict_lower_flag_follows_h_near_zero() {
        // h = 3φ² - 2φ for ex52, h = φ² + 3φ/2 - 1/2 for ex51, h ≡ 0 for ex53a
        assert!(!lower_bound_possibly_strict(&presets::ex52(), 0.5));
        assert!(lower_bound_possibly_strict(&presets::ex51(), 0.5));
        assert!(lower_bound_possibly_strict(&presets::ex53a(), 0.5));
    }

    #[test]
    fn pure_reaction_bracket_is_a_point() {
        let b = bracket_c_pl(&presets::ex53a(), 0.5).unwrap();
        assert!((b.lower - 1.0).abs() < 1e-12 && (b.upper - 1.0).abs() < 1e-9, "{b:?}");
        let b = bracket_c_nr(&presets::ex53a(), 0.5).unwrap();
        assert!((b.lower - 1.0).abs() < 1e-12 && (b.upper - 1.0).abs() < 1e-9, "{b:?}");
    }

    #[test]
    fn negated_diffusivity_lower_bound() {
        let b = bracket_c_pl(&presets::ex52_negated(), 0.5).unwrap();
        assert!(b.lower >= -0.25 + libm::sqrt(0.5) - 1e-12, "{b:?}");
    }

    #[test]
    fn zero_threshold_lies_in_brackets() {
        let c = presets::ex52();
        let pr = bracket_c_pr(&c, 0.5).unwrap();
        let nl = bracket_c_nl(&c, 0.5).unwrap();
        for b in [pr, nl] {
            assert!(b.lower <= 0.0 && 0.0 <= b.upper, "{b:?}");
            assert!(b.refined_upper.unwrap() <= b.upper);
        }
        assert_eq!(pr, nl);
        let b = bracket_c_pr(&presets::ex51(), 0.5).unwrap();
        assert!(b.lower <= 0.0 && 0.0 <= b.upper, "{b:?}");
    }

    #[test]
    fn wrong_pattern_is_rejected() {
        assert!(matches!(bracket_c_pl(&presets::ex51(), 0.5), Err(Error::PreconditionFailed(_))));
        assert!(matches!(bracket_c_pr(&presets::ex53a(), 0.5), Err(Error::PreconditionFailed(_))));
    }

    #[test]
    fn slope_pairs() {
        let c = presets::ex53a();
        let sp = slope_pair(&c, 0.5, 1.0, Side::Right).unwrap();
        assert!((sp.s_minus + 0.5).abs() < 1e-12 && (sp.s_plus + 0.5).abs() < 1e-12);
        let sp = slope_pair(&c, 0.5, 3.0, Side::Right).unwrap();
        assert!(sp.s_minus < 0.0 && sp.s_plus < 0.0);
        assert!(matches!(slope_pair(&c, 0.5, 0.5, Side::Right), Err(Error::ComplexRoots { .. })));
        let sp = slope_pair(&presets::ex51(), 0.5, 0.5, Side::Left).unwrap();
        assert_eq!((sp.s_minus, sp.s_plus), (0.0, 0.0));
    }

    #[test]
    fn vertical_condition_on_the_double_zero_example() {
        assert!(check_vertical_necessary_condition(&presets::ex51(), 0.5));
    }

    proptest! {
        #[test]
        fn vieta(b in -5.0f64..5.0, p in -5.0f64..5.0) {
            if let Some((lo, hi, _)) = quadratic_roots(b, p) {
                prop_assert!(lo <= hi);
                prop_assert!((lo + hi - b).abs() <= 1e-12 * (1.0 + b.abs() + lo.abs() + hi.abs()));
                prop_assert!((lo * hi - p).abs() <= 1e-12 * (1.0 + p.abs() + lo.abs() * hi.abs()));
            } else {
                prop_assert!(b * b < 4.0 * p);
            }
        }
    }
}
