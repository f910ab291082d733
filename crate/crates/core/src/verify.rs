//! Weak-form residuals of computed profiles against smooth bumps, and the
//! table of worked-example checks.

use alloc::collections::BinaryHeap;
use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use crate::coeffs::CoefficientSet;
use crate::error::{Error, Result};
use crate::profile::{paste_unchecked, PointName, RegularityKind, SemiProfile, WaveProfile};
use crate::shooting::{gauss20, integrate, Acceptance, ShootingOptions, SingularProblem};

/// `exp(-1/(1-u²))` on `|u| < 1`, zero outside.
pub fn bump(u: f64) -> f64 {
    if u.abs() >= 1.0 {
        return 0.0;
    }
    libm::exp(-1.0 / (1.0 - u * u))
}

/// Derivative of [`bump`] in `u`.
pub fn bump_derivative(u: f64) -> f64 {
    if u.abs() >= 1.0 {
        return 0.0;
    }
    let q = 1.0 - u * u;
    bump(u) * (-2.0 * u / (q * q))
}

/// Bumps `ψ_i(ξ) = bump((ξ - center_i)/width_i)` supported on `[center - width, center + width]`.
#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct TestFunctionFamily {
    pub centers: Vec<f64>,
    pub widths: Vec<f64>,
}

impl TestFunctionFamily {
    pub fn new(centers: Vec<f64>, widths: Vec<f64>) -> Result<Self> {
        if centers.len() != widths.len() {
            return Err(Error::PreconditionFailed("centers and widths differ in length".into()));
        }
        if centers.iter().any(|c| !c.is_finite()) || widths.iter().any(|w| !(w.is_finite() && *w > 0.0)) {
            return Err(Error::PreconditionFailed("widths must be positive and centers finite".into()));
        }
        Ok(Self { centers, widths })
    }

    /// Three bumps of half-width `width` around each point (centered, and
    /// shifted by `±width/2`), plus `n_extra` evenly spaced over `range`.
    pub fn straddling(points: &[f64], width: f64, n_extra: usize, range: (f64, f64)) -> Result<Self> {
        let mut centers = Vec::new();
        for &p in points {
            centers.extend([p, p - 0.5 * width, p + 0.5 * width]);
        }
        for k in 0..n_extra {
            centers.push(range.0 + (range.1 - range.0) * (k as f64 + 0.5) / n_extra as f64);
        }
        let widths = vec![width; centers.len()];
        Self::new(centers, widths)
    }

    pub fn len(&self) -> usize {
        self.centers.len()
    }

    pub fn is_empty(&self) -> bool {
        self.centers.is_empty()
    }

    pub fn value(&self, i: usize, xi: f64) -> f64 {
        bump((xi - self.centers[i]) / self.widths[i])
    }

    pub fn derivative(&self, i: usize, xi: f64) -> f64 {
        bump_derivative((xi - self.centers[i]) / self.widths[i]) / self.widths[i]
    }

    pub fn support(&self, i: usize) -> (f64, f64) {
        (self.centers[i] - self.widths[i], self.centers[i] + self.widths[i])
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case", tag = "kind"))]
pub enum QuadratureRule {
    /// 20-point Gauss–Legendre on panels cut at every profile breakpoint inside
    /// the support, refined where whole and halves disagree.
    Adaptive { tol: f64 },
    /// Composite midpoint rule on uniform panels over the support.
    Midpoint { panels: usize },
}

impl Default for QuadratureRule {
    fn default() -> Self {
        QuadratureRule::Adaptive { tol: 1e-13 }
    }
}

/// What the residual needs from a profile.
pub trait ProfileData {
    /// `(φ(ξ), D(φ)φ'(ξ))`.
    fn eval(&self, xi: f64) -> (f64, f64);
    /// Points in `(lo, hi)` where the data are not smooth.
    fn breakpoints(&self, lo: f64, hi: f64) -> Vec<f64>;
    /// Range of `ξ` where [`ProfileData::eval`] is trustworthy.
    fn coverage(&self) -> (f64, f64);
}

impl ProfileData for WaveProfile {
    fn eval(&self, xi: f64) -> (f64, f64) {
        WaveProfile::eval(self, xi)
    }

    fn breakpoints(&self, lo: f64, hi: f64) -> Vec<f64> {
        let inside = |x: &f64| *x > lo && *x < hi;
        let mut nodes: Vec<f64> = Vec::new();
        let mut hard: Vec<f64> = self.junctions.iter().map(|j| j.xi).collect();
        for p in &self.pieces {
            nodes.extend(p.nodes.iter().map(|n| n.xi));
            for e in [&p.upper, &p.lower] {
                hard.extend(e.xi);
                nodes.extend(e.tail.iter().map(|t| t.0));
            }
        }
        nodes.retain(inside);
        nodes.sort_by(f64::total_cmp);
        // start from a subset of the nodes; refinement picks up the slope jumps the limiter leaves at the others
        let step = nodes.len().div_ceil(MAX_PANELS).max(1);
        let mut v: Vec<f64> = nodes.into_iter().step_by(step).collect();
        v.extend(hard.into_iter().filter(inside));
        v.sort_by(f64::total_cmp);
        v.dedup();
        v
    }

    fn coverage(&self) -> (f64, f64) {
        let first = &self.pieces[0];
        let last = &self.pieces[self.pieces.len() - 1];
        let (n_lo, n_hi) = self.node_range();
        let lo = match first.upper.xi {
            Some(_) => f64::NEG_INFINITY,
            None => first.upper.tail.last().map_or(n_lo, |t| t.0),
        };
        let hi = match last.lower.xi {
            Some(_) => f64::INFINITY,
            None => last.lower.tail.last().map_or(n_hi, |t| t.0),
        };
        (lo, hi)
    }
}

/// `φ ≡ value` on the whole line.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ConstantProfile(pub f64);

impl ProfileData for ConstantProfile {
    fn eval(&self, _xi: f64) -> (f64, f64) {
        (self.0, 0.0)
    }

    fn breakpoints(&self, _lo: f64, _hi: f64) -> Vec<f64> {
        Vec::new()
    }

    fn coverage(&self) -> (f64, f64) {
        (f64::NEG_INFINITY, f64::INFINITY)
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ResidualEntry {
    pub center: f64,
    pub width: f64,
    /// `∫ (D(φ)φ' - f(φ) + cφ)ψ' - g(φ)ψ dξ`.
    pub value: f64,
    /// `∫ |g(φ)ψ| dξ`.
    pub scale: f64,
}

#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ResidualReport {
    pub entries: Vec<ResidualEntry>,
    pub max_abs: f64,
    /// Largest per-bump scale.
    pub scale: f64,
    /// `max_abs / scale`, with `0/0 = 0`.
    pub max_relative: f64,
}

struct Panel {
    a: f64,
    b: f64,
    value: f64,
    err: f64,
}

impl Panel {
    fn new(f: &dyn Fn(f64) -> f64, a: f64, b: f64, whole: f64) -> Self {
        let m = 0.5 * (a + b);
        let value = gauss20(f, a, m) + gauss20(f, m, b);
        let err = (value - whole).abs();
        Panel { a, b, value, err: if err.is_finite() { err } else { f64::INFINITY } }
    }
}

impl PartialEq for Panel {
    fn eq(&self, other: &Self) -> bool {
        self.err.total_cmp(&other.err).is_eq()
    }
}

impl Eq for Panel {}

impl PartialOrd for Panel {
    fn partial_cmp(&self, other: &Self) -> Option<core::cmp::Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Panel {
    fn cmp(&self, other: &Self) -> core::cmp::Ordering {
        self.err.total_cmp(&other.err)
    }
}

/// Panels split where the whole and half-panel Gauss sums disagree most, until
/// the summed disagreement is below `tol` (or a rounding floor) or the split budget runs out.
fn adaptive(f: &dyn Fn(f64) -> f64, cuts: &[f64], tol: f64) -> f64 {
    let mut heap: BinaryHeap<Panel> = cuts.windows(2).map(|w| Panel::new(f, w[0], w[1], gauss20(f, w[0], w[1]))).collect();
    let mass: f64 = cuts.windows(2).map(|w| gauss20(|x| f(x).abs(), w[0], w[1])).sum();
    // next to vertical tangents φ(ξ) is only known to rounding
    let target = tol.max(1e-11 * mass);
    let mut err: f64 = heap.iter().map(|p| p.err).sum();
    for _ in 0..MAX_SPLITS {
        if err <= target {
            break;
        }
        let Some(p) = heap.pop() else { break };
        let m = 0.5 * (p.a + p.b);
        if !(m > p.a && m < p.b) {
            heap.push(Panel { err: 0.0, ..p });
            continue;
        }
        let (l, r) = (gauss20(f, p.a, m), gauss20(f, m, p.b));
        let (pl, pr) = (Panel::new(f, p.a, m, l), Panel::new(f, m, p.b, r));
        err += pl.err + pr.err - p.err;
        heap.push(pl);
        heap.push(pr);
    }
    heap.iter().map(|p| p.value).sum()
}

const MAX_SPLITS: usize = 2000;
const MAX_PANELS: usize = 256;

fn integrate_panels(f: &dyn Fn(f64) -> f64, cuts: &[f64], rule: QuadratureRule) -> f64 {
    match rule {
        QuadratureRule::Adaptive { tol } => adaptive(f, cuts, tol),
        QuadratureRule::Midpoint { panels } => {
            let (lo, hi) = (cuts[0], cuts[cuts.len() - 1]);
            let n = panels.max(1);
            let h = (hi - lo) / n as f64;
            (0..n).map(|k| f(lo + (k as f64 + 0.5) * h)).sum::<f64>() * h
        }
    }
}

/// Weak-form residual of `profile` with speed `c` against every bump of `family`.
/// The flux term uses the stored `z = D(φ)φ'`, never a difference of `φ`.
pub fn weak_residual(
    profile: &dyn ProfileData,
    coeffs: &CoefficientSet,
    c: f64,
    family: &TestFunctionFamily,
    rule: QuadratureRule,
) -> Result<ResidualReport> {
    let (cov_lo, cov_hi) = profile.coverage();
    let mut entries = Vec::with_capacity(family.len());
    for i in 0..family.len() {
        let (lo, hi) = family.support(i);
        if lo < cov_lo || hi > cov_hi {
            return Err(Error::SupportNotCovered { lo, hi });
        }
        let mut cuts = vec![lo];
        cuts.extend(profile.breakpoints(lo, hi));
        cuts.push(hi);
        let integrand = |xi: f64| {
            let (phi, z) = profile.eval(xi);
            let dpsi = family.derivative(i, xi);
            let psi = family.value(i, xi);
            let flux = if dpsi == 0.0 { 0.0 } else { (z - coeffs.f().value(phi) + c * phi) * dpsi };
            let source = if psi == 0.0 { 0.0 } else { coeffs.g().value(phi) * psi };
            flux - source
        };
        let magnitude = |xi: f64| {
            let psi = family.value(i, xi);
            if psi == 0.0 {
                0.0
            } else {
                (coeffs.g().value(profile.eval(xi).0) * psi).abs()
            }
        };
        let value = integrate_panels(&integrand, &cuts, rule);
        let scale = integrate_panels(&magnitude, &cuts, rule);
        if !(value.is_finite() && scale.is_finite()) {
            return Err(Error::QuadratureFailure(format!("non-finite residual for the bump at {}", family.centers[i])));
        }
        entries.push(ResidualEntry { center: family.centers[i], width: family.widths[i], value, scale });
    }
    let max_abs = entries.iter().fold(0.0f64, |m, e| m.max(e.value.abs()));
    let scale = entries.iter().fold(0.0f64, |m, e| m.max(e.scale));
    let max_relative = if max_abs == 0.0 { 0.0 } else { max_abs / scale };
    Ok(ResidualReport { entries, max_abs, scale, max_relative })
}

/// How an [`OracleRow`] compares `computed` with `expected`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum Relation {
    /// `|computed - expected| ≤ tolerance`.
    Near,
    /// `computed ≥ expected - tolerance`.
    AtLeast,
    /// `computed > expected`.
    Above,
}

#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct OracleRow {
    pub example: String,
    pub quantity: String,
    pub relation: Relation,
    pub expected: f64,
    pub computed: f64,
    pub tolerance: f64,
    pub pass: bool,
}

struct Table(Vec<OracleRow>);

impl Table {
    fn push(&mut self, example: &str, quantity: &str, relation: Relation, expected: f64, computed: f64, tolerance: f64) {
        let pass = match relation {
            Relation::Near => (computed - expected).abs() <= tolerance,
            Relation::AtLeast => computed >= expected - tolerance,
            Relation::Above => computed > expected,
        };
        self.0.push(OracleRow {
            example: example.into(),
            quantity: quantity.into(),
            relation,
            expected,
            computed,
            tolerance,
            pass,
        });
    }

    fn near(&mut self, example: &str, quantity: &str, expected: f64, computed: Option<f64>, tolerance: f64) {
        self.push(example, quantity, Relation::Near, expected, computed.unwrap_or(f64::NAN), tolerance);
    }

    fn flag(&mut self, example: &str, quantity: &str, ok: bool) {
        self.push(example, quantity, Relation::Near, 1.0, if ok { 1.0 } else { 0.0 }, 0.0);
    }
}

fn sup_error(wp: &WaveProfile, lo: f64, hi: f64, exact: impl Fn(f64) -> f64) -> f64 {
    (0..=2000)
        .map(|k| {
            let x = lo + (hi - lo) * k as f64 / 2000.0;
            (wp.eval(x).0 - exact(x)).abs()
        })
        .fold(0.0, f64::max)
}

fn trajectory_error(coeffs: &CoefficientSet, problem: SingularProblem, c: f64, range: (f64, f64), exact: impl Fn(f64) -> f64) -> Option<f64> {
    let t = integrate(&problem, coeffs, c, &ShootingOptions::default()).ok()?;
    let mut worst: f64 = 0.0;
    for k in 0..=200 {
        let phi = range.0 + (range.1 - range.0) * k as f64 / 200.0;
        worst = worst.max((t.z_at(phi)? - exact(phi)).abs());
    }
    Some(worst)
}

/// `count` bumps of half-width `width`: three straddling each junction and
/// attainment point, the rest spread evenly around them.
pub fn landmark_family(wp: &WaveProfile, width: f64, count: usize) -> Result<TestFunctionFamily> {
    let mut pts: Vec<f64> = wp.junctions.iter().map(|j| j.xi).collect();
    pts.extend(wp.xi_one());
    pts.extend(wp.xi_zero());
    if pts.is_empty() {
        pts.push(0.0);
    }
    let lo = pts.iter().copied().fold(f64::INFINITY, f64::min) - 4.0 * width;
    let hi = pts.iter().copied().fold(f64::NEG_INFINITY, f64::max) + 4.0 * width;
    TestFunctionFamily::straddling(&pts, width, count.saturating_sub(3 * pts.len()).max(2), (lo, hi))
}

fn residual_of(wp: &WaveProfile, coeffs: &CoefficientSet, width: f64) -> Option<f64> {
    let fam = landmark_family(wp, width, 20).ok()?;
    weak_residual(wp, coeffs, wp.c, &fam, QuadratureRule::default()).ok().map(|r| r.max_relative)
}

/// Runs the worked examples end to end and compares each known quantity.
pub fn oracle_suite() -> Vec<OracleRow> {
    use crate::orchestrator::{compute_speed_report, solve_with_report, Normalization, SolveOptions, ThresholdName};
    use crate::presets;

    let mut t = Table(Vec::new());
    let opts = ShootingOptions::default();
    let pinned = SolveOptions { normalization: Normalization::PinValue { phi: 0.25, xi: 0.0 }, ..SolveOptions::default() };

    // positive-negative, double zero at 1/2, vertical junction
    let c51 = presets::ex51();
    match compute_speed_report(&c51, &opts) {
        Ok(r) => {
            let cl = &r.classification;
            t.flag("ex51", "pattern PN with alpha = 1/2", cl.pattern == crate::Pattern::Pn && cl.alpha == Some(0.5));
            t.near("ex51", "D'(alpha)", 0.0, cl.endpoint_slopes.alpha_minus, 1e-12);
            t.near("ex51", "c_pn", 0.0, Some(r.composite), 1e-3);
            match solve_with_report(&c51, 0.0, &r, &pinned) {
                Ok(wp) => {
                    t.near("ex51", "xi_1", -5.0 / 32.0, wp.xi_one(), 1e-4);
                    t.near("ex51", "xi_alpha", -1.0 / 32.0, wp.junction_xi(PointName::Alpha), 1e-4);
                    t.near("ex51", "xi_0", 3.0 / 32.0, wp.xi_zero(), 1e-4);
                    let exact = |x: f64| {
                        if x < -5.0 / 32.0 {
                            1.0
                        } else if x < -1.0 / 32.0 {
                            0.5 + libm::sqrt(-1.0 / 16.0 - 2.0 * x)
                        } else if x < 3.0 / 32.0 {
                            0.5 - libm::sqrt(1.0 / 16.0 + 2.0 * x)
                        } else {
                            0.0
                        }
                    };
                    t.near("ex51", "sup |phi - exact|", 0.0, Some(sup_error(&wp, -0.3, 0.3, exact)), 1e-4);
                    let kind = |p| wp.label(p).map(|l| l.kind);
                    let sharp = |p| matches!(kind(p), Some(RegularityKind::SharpFiniteSlope | RegularityKind::SharpVertical));
                    t.flag("ex51", "sharp at 0 and 1", sharp(PointName::Zero) && sharp(PointName::One));
                    t.flag("ex51", "vertical slopes at alpha", kind(PointName::Alpha) == Some(RegularityKind::JunctionVertical));
                    t.near("ex51", "max relative weak residual", 0.0, residual_of(&wp, &c51, 0.02), 1e-6);
                }
                Err(_) => t.flag("ex51", "profile at c = 0", false),
            }
        }
        Err(_) => t.flag("ex51", "speed report", false),
    }

    // positive-negative with exponential tails, and its negation
    let c52 = presets::ex52();
    match compute_speed_report(&c52, &opts) {
        Ok(r) => {
            t.near("ex52", "c_pr", 0.0, r.threshold(ThresholdName::CPr), 1e-3);
            t.near("ex52", "c_nl", 0.0, r.threshold(ThresholdName::CNl), 1e-3);
            t.near("ex52", "c_pn", 0.0, Some(r.composite), 1e-3);
            let z_err = SingularProblem::z_intro_left(&c52, 0.5)
                .ok()
                .and_then(|p| trajectory_error(&c52, p, 0.0, (0.01, 0.49), |x| x * x * (x - 0.5)));
            t.near("ex52", "sup |z - phi^2(phi - 1/2)|", 0.0, z_err, 1e-6);
            match solve_with_report(&c52, 0.0, &r, &pinned) {
                Ok(wp) => {
                    let half_ln = libm::log(0.5);
                    let exact = |x: f64| if x > half_ln { 0.25 * libm::exp(-x) } else { 1.0 - libm::exp(x) };
                    t.near("ex52", "sup |phi - exact|", 0.0, Some(sup_error(&wp, -5.0, 5.0, exact)), 1e-4);
                    t.near("ex52", "xi_alpha", half_ln, wp.junction_xi(PointName::Alpha), 1e-4);
                    t.near("ex52", "max relative weak residual", 0.0, residual_of(&wp, &c52, 0.5), 1e-6);
                }
                Err(_) => t.flag("ex52", "profile at c = 0", false),
            }
        }
        Err(_) => t.flag("ex52", "speed report", false),
    }
    let c52n = presets::ex52_negated();
    let lower = 1.0 / libm::sqrt(2.0) - 0.25;
    match compute_speed_report(&c52n, &opts) {
        Ok(r) => {
            let b = r.brackets.get(&ThresholdName::CPl).map_or(f64::NAN, |b| b.lower);
            t.push("ex52n", "lower bound for c_np", Relation::AtLeast, lower, b, 1e-9);
            t.push("ex52n", "c_np", Relation::AtLeast, lower, r.composite, 1e-9);
            t.push("ex52n", "c_np above 0", Relation::Above, 0.0, r.composite, 0.0);
        }
        Err(_) => t.flag("ex52n", "speed report", false),
    }

    // negative-positive, linear D: both flux-limit thresholds equal 1
    let c53a = presets::ex53a();
    match crate::bounds::bracket_c_pl(&c53a, 0.5) {
        Ok(b) => t.near("ex53a", "c_pl bracket width", 0.0, Some(b.best_upper() - b.lower), 1e-12),
        Err(_) => t.flag("ex53a", "c_pl bracket", false),
    }
    match compute_speed_report(&c53a, &opts) {
        Ok(r) => {
            t.near("ex53a", "c_pl", 1.0, r.threshold(ThresholdName::CPl), 1e-3);
            t.near("ex53a", "c_nr", 1.0, r.threshold(ThresholdName::CNr), 1e-3);
            t.near("ex53a", "c_np", 1.0, Some(r.composite), 1e-3);
        }
        Err(_) => t.flag("ex53a", "speed report", false),
    }

    // negative-positive with a corner at beta
    let c53b = presets::ex53b();
    let z_err = SingularProblem::flux_limit_left(&c53b, 0.5).ok().and_then(|p| {
        let p = SingularProblem { acceptance: Acceptance::ReachTarget, ..p };
        trajectory_error(&c53b, p, 0.0, (0.51, 0.99), |x| (x - 0.5) * (x - 0.5) * (x - 1.0))
    });
    t.near("ex53b", "sup |z - (phi - 1/2)^2(phi - 1)|", 0.0, z_err, 1e-6);
    match compute_speed_report(&c53b, &opts) {
        Ok(r) => {
            let c_pl = r.threshold(ThresholdName::CPl);
            let c_nr = r.threshold(ThresholdName::CNr);
            t.near("ex53b", "c_pl", 0.0, c_pl, 1e-3);
            t.push("ex53b", "c_nr above c_pl", Relation::Above, c_pl.unwrap_or(f64::NAN), c_nr.unwrap_or(f64::NAN), 0.0);
            t.near("ex53b", "c_np = c_nr", c_nr.unwrap_or(f64::NAN), Some(r.composite), 1e-12);
            match solve_with_report(&c53b, r.composite, &r, &pinned) {
                Ok(wp) => {
                    let corner = wp.label(PointName::Beta).is_some_and(|l| {
                        l.kind == RegularityKind::JunctionCorner
                            && match (l.left, l.right) {
                                (Some(a), Some(b)) => a != b,
                                _ => false,
                            }
                    });
                    t.flag("ex53b", "corner at beta", corner);
                    t.near("ex53b", "max relative weak residual", 0.0, residual_of(&wp, &c53b, 0.5), 1e-5);
                }
                Err(_) => t.flag("ex53b", "profile at c_np", false),
            }
        }
        Err(_) => t.flag("ex53b", "speed report", false),
    }
    t.0
}

/// Pastes two pieces without checking the junction flux; used to build defective profiles.
pub fn mispaste(upper: SemiProfile, lower: SemiProfile) -> Result<WaveProfile> {
    paste_unchecked(vec![upper, lower])
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::orchestrator::{solve_wavefront, Normalization, SolveOptions};
    use crate::presets;
    use crate::profile::{reconstruct, ArrivalHint};
    use crate::shooting::ProblemKind;

    fn piece(coeffs: &CoefficientSet, anchor: f64, target: f64, flux: f64) -> SemiProfile {
        let p = SingularProblem::new(coeffs, anchor, target, ProblemKind::SemiWavefront, Acceptance::ReachTarget)
            .unwrap()
            .with_start_flux(flux);
        let t = integrate(&p, coeffs, 0.0, &ShootingOptions::default()).unwrap();
        reconstruct(&t, coeffs, None, ArrivalHint::Auto).unwrap()
    }

    #[test]
    fn bump_is_flat_at_its_edges() {
        assert_eq!(bump(1.0), 0.0);
        assert_eq!(bump(-1.0), 0.0);
        assert!((bump(0.0) - libm::exp(-1.0)).abs() < 1e-16);
        assert!(bump(0.999) < 1e-200);
        let h = 1e-6;
        for u in [-0.7, -0.2, 0.3, 0.8] {
            let fd = (bump(u + h) - bump(u - h)) / (2.0 * h);
            assert!((fd - bump_derivative(u)).abs() < 1e-7, "{u}");
        }
    }

    #[test]
    fn family_rejects_bad_widths() {
        assert!(TestFunctionFamily::new(vec![0.0], vec![0.0]).is_err());
        assert!(TestFunctionFamily::new(vec![0.0, 1.0], vec![1.0]).is_err());
        let f = TestFunctionFamily::straddling(&[0.0, 1.0], 0.1, 4, (-1.0, 2.0)).unwrap();
        assert_eq!(f.len(), 10);
    }

    #[test]
    fn constant_profile_has_zero_residual() {
        let coeffs = presets::ex51();
        let fam = TestFunctionFamily::straddling(&[0.0], 0.3, 5, (-2.0, 2.0)).unwrap();
        for rule in [QuadratureRule::default(), QuadratureRule::Midpoint { panels: 50 }] {
            let r = weak_residual(&ConstantProfile(0.0), &coeffs, 0.3, &fam, rule).unwrap();
            assert!(r.entries.iter().all(|e| e.value == 0.0));
            assert_eq!(r.max_relative, 0.0);
        }
    }

    #[test]
    fn vertical_junction_profile_is_a_weak_solution() {
        let coeffs = presets::ex51();
        let opts = SolveOptions { normalization: Normalization::PinValue { phi: 0.25, xi: 0.0 }, ..Default::default() };
        let wp = solve_wavefront(&coeffs, 0.0, &opts).unwrap();
        let pts = [-5.0 / 32.0, -1.0 / 32.0, 3.0 / 32.0];
        let fam = TestFunctionFamily::straddling(&pts, 0.02, 11, (-0.25, 0.2)).unwrap();
        assert_eq!(fam.len(), 20);
        let r = weak_residual(&wp, &coeffs, 0.0, &fam, QuadratureRule::default()).unwrap();
        assert!(r.max_relative < 1e-6, "{}", r.max_relative);
        assert!(r.scale > 0.0);
    }

    #[test]
    fn tail_coverage_is_enforced() {
        let coeffs = presets::ex52();
        let wp = solve_wavefront(&coeffs, 0.0, &SolveOptions::default()).unwrap();
        let (lo, hi) = ProfileData::coverage(&wp);
        assert!(lo.is_finite() && hi.is_finite() && lo < -20.0 && hi > 20.0);
        let fam = TestFunctionFamily::new(vec![hi], vec![1.0]).unwrap();
        assert!(matches!(
            weak_residual(&wp, &coeffs, 0.0, &fam, QuadratureRule::default()),
            Err(Error::SupportNotCovered { .. })
        ));
    }

    fn mispasted(ell: f64) -> WaveProfile {
        let coeffs = presets::ex51();
        let upper = piece(&coeffs, 0.5, 1.0, 0.0);
        let lower = piece(&coeffs, 0.5, 0.0, ell);
        mispaste(upper, lower).unwrap()
    }

    #[test]
    fn flux_jump_shows_up_as_a_point_mass() {
        let coeffs = presets::ex51();
        let psi0 = libm::exp(-1.0);
        let mut values = Vec::new();
        for ell in [-0.2, -0.1, -0.05] {
            let wp = mispasted(ell);
            let xa = wp.junctions[0].xi;
            let fam = TestFunctionFamily::new(vec![xa], vec![0.01]).unwrap();
            let r = weak_residual(&wp, &coeffs, 0.0, &fam, QuadratureRule::default()).unwrap();
            let v = r.entries[0].value;
            if ell == -0.1 {
                assert!((v - 0.1 * psi0).abs() < 1e-6, "{v}");
            }
            values.push((ell, v));
        }
        for (ell, v) in values {
            assert!((v / (-ell) - psi0).abs() < 0.02 * psi0, "{ell}: {v}");
        }
    }

    #[test]
    fn midpoint_rule_converges_at_second_order() {
        let coeffs = presets::ex52();
        let wp = solve_wavefront(&coeffs, 0.0, &SolveOptions::default()).unwrap();
        let fam = TestFunctionFamily::new(vec![-0.3, 0.4, 1.5], vec![0.8, 0.6, 1.0]).unwrap();
        let exact = weak_residual(&wp, &coeffs, 0.0, &fam, QuadratureRule::default()).unwrap();
        let err = |n| {
            let r = weak_residual(&wp, &coeffs, 0.0, &fam, QuadratureRule::Midpoint { panels: n }).unwrap();
            r.entries.iter().zip(&exact.entries).map(|(a, b)| (a.value - b.value).abs()).fold(0.0, f64::max)
        };
        let (e1, e2) = (err(40), err(80));
        assert!(e1 > 0.0 && e1 / e2 >= 3.5, "{e1} {e2}");
        let m = weak_residual(&wp, &coeffs, 0.0, &fam, QuadratureRule::Midpoint { panels: 80 }).unwrap();
        let m2 = weak_residual(&wp, &coeffs, 0.0, &fam, QuadratureRule::Midpoint { panels: 160 }).unwrap();
        assert!(m.max_abs >= 3.5 * m2.max_abs || m2.max_abs < 1e-9, "{} {}", m.max_abs, m2.max_abs);
    }

    #[test]
    fn oracle_rows_all_pass() {
        let rows = oracle_suite();
        assert!(rows.len() >= 20);
        for r in &rows {
            assert!(r.pass, "{r:?}");
        }
    }
}
