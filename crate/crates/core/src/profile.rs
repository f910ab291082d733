//! Profiles `φ(ξ)` rebuilt from flux trajectories, regularity labels, and
//! pasting of semi-wavefronts at the zeros of `D`.

use alloc::vec::Vec;

use crate::bounds::quadratic_roots;
use crate::coeffs::{CaseClassification, CoefficientSet, Pattern, Side};
use crate::error::{Error, Result};
use crate::shooting::{acceptance_kappa, gauss20, hermite, local_branches, Branch, FluxTrajectory, LocalModel};

/// A one-sided derivative `φ'`, possibly vertical.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Slope {
    Finite(f64),
    /// `φ' = -∞`.
    Vertical,
}

impl Slope {
    pub fn value(&self) -> f64 {
        match *self {
            Slope::Finite(v) => v,
            Slope::Vertical => f64::NEG_INFINITY,
        }
    }
}

#[cfg(feature = "serde")]
impl serde::Serialize for Slope {
    fn serialize<S: serde::Serializer>(&self, s: S) -> core::result::Result<S::Ok, S::Error> {
        match *self {
            Slope::Finite(v) => s.serialize_f64(v),
            Slope::Vertical => s.serialize_str("-inf"),
        }
    }
}

#[cfg(feature = "serde")]
impl<'de> serde::Deserialize<'de> for Slope {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> core::result::Result<Self, D::Error> {
        struct V;
        impl serde::de::Visitor<'_> for V {
            type Value = Slope;
            fn expecting(&self, f: &mut core::fmt::Formatter) -> core::fmt::Result {
                f.write_str("a number or \"-inf\"")
            }
            fn visit_f64<E: serde::de::Error>(self, v: f64) -> core::result::Result<Slope, E> {
                Ok(Slope::Finite(v))
            }
            fn visit_i64<E: serde::de::Error>(self, v: i64) -> core::result::Result<Slope, E> {
                Ok(Slope::Finite(v as f64))
            }
            fn visit_u64<E: serde::de::Error>(self, v: u64) -> core::result::Result<Slope, E> {
                Ok(Slope::Finite(v as f64))
            }
            fn visit_str<E: serde::de::Error>(self, v: &str) -> core::result::Result<Slope, E> {
                if v == "-inf" {
                    Ok(Slope::Vertical)
                } else {
                    Err(E::custom("expected \"-inf\""))
                }
            }
        }
        d.deserialize_any(V)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "lowercase"))]
pub enum PointName {
    Zero,
    One,
    Alpha,
    Beta,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "SCREAMING_SNAKE_CASE"))]
pub enum RegularityKind {
    Classical,
    SharpFiniteSlope,
    SharpVertical,
    JunctionFinite,
    JunctionVertical,
    JunctionCorner,
    /// Borderline cases where the data do not decide the regularity.
    Undetermined,
}

#[derive(Clone, Copy, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct RegularityLabel {
    pub point: PointName,
    pub value: f64,
    pub kind: RegularityKind,
    /// `φ'(ξ⁻)` at the point, when it is part of the prediction.
    pub left: Option<Slope>,
    /// `φ'(ξ⁺)`.
    pub right: Option<Slope>,
}

/// Threshold speeds available to the labelling; absent ones are not part of the pattern.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct SubThresholds {
    pub c_pr: Option<f64>,
    pub c_nl: Option<f64>,
    pub c_pl: Option<f64>,
    pub c_nr: Option<f64>,
    pub c_ab: Option<f64>,
    pub c_ba: Option<f64>,
}

/// Tolerance for deciding `c = c*` in the labels.
pub const LABEL_TOL: f64 = 1e-5;

fn sharp(slope: Slope) -> RegularityKind {
    match slope {
        Slope::Finite(_) => RegularityKind::SharpFiniteSlope,
        Slope::Vertical => RegularityKind::SharpVertical,
    }
}

/// End reached along the threshold trajectory of a positive region
/// (0 in `PN`, `PNP`; mirrored for 1 in `PN`, `NPN`).
fn threshold_end(coeffs: &CoefficientSet, e: f64, side: Side, c: f64, cstar: Option<f64>, tol: f64) -> (RegularityKind, Option<Slope>) {
    let ld = coeffs.local_data(e, side);
    if ld.d.abs() > 1e-12 {
        return (RegularityKind::Classical, None);
    }
    let Some(cs) = cstar else {
        return (RegularityKind::Undetermined, None);
    };
    if c > cs + tol {
        return (RegularityKind::Classical, None);
    }
    if (cs - ld.h).abs() <= tol || cs < ld.h {
        return (RegularityKind::Undetermined, None);
    }
    let slope = if ld.d_slope > 1e-12 {
        Slope::Finite((ld.h - cs) / ld.d_slope)
    } else {
        Slope::Vertical
    };
    (sharp(slope), Some(slope))
}

/// End of a negative region reached for every speed (0 in `NP`, `NPN`; 1 in `NP`, `PNP`).
fn free_end(coeffs: &CoefficientSet, e: f64, side: Side, c: f64, tol: f64) -> (RegularityKind, Option<Slope>) {
    let ld = coeffs.local_data(e, side);
    if ld.d.abs() > 1e-12 || c > ld.h + tol {
        return (RegularityKind::Classical, None);
    }
    if (c - ld.h).abs() <= tol {
        return if ld.d_slope < -1e-12 { (RegularityKind::Classical, None) } else { (RegularityKind::Undetermined, None) };
    }
    let slope = if ld.d_slope < -1e-12 { Slope::Finite((ld.h - c) / ld.d_slope) } else { Slope::Vertical };
    (sharp(slope), Some(slope))
}

/// One side of a junction at a zero of `D` crossed from positive to negative.
fn alpha_side(coeffs: &CoefficientSet, alpha: f64, c: f64, side: Side, tol: f64) -> Slope {
    let ld = coeffs.local_data(alpha, side);
    if ld.d_slope < -1e-12 || c > ld.h + tol {
        match quadratic_roots(ld.h - c, ld.dg_slope) {
            Some((s_minus, _, _)) if s_minus < 0.0 => Slope::Finite(ld.g / s_minus),
            _ => Slope::Vertical,
        }
    } else {
        Slope::Vertical
    }
}

/// One side of a junction at a zero of `D` crossed from negative to positive,
/// governed by the flux-limit threshold `cstar` of that side.
fn beta_side(coeffs: &CoefficientSet, beta: f64, c: f64, side: Side, cstar: Option<f64>, tol: f64) -> Option<Slope> {
    let ld = coeffs.local_data(beta, side);
    let cs = cstar?;
    let (s_minus, s_plus) = match quadratic_roots(ld.h - c, ld.dg_slope) {
        Some((a, b, _)) => (a, b),
        None => {
            // Rounding at a double root.
            let m = 0.5 * (ld.h - c);
            (m, m)
        }
    };
    if c > cs + tol {
        (s_minus < 0.0).then(|| Slope::Finite(ld.g / s_minus))
    } else if ld.d_slope.abs() > 1e-12 && s_plus < 0.0 {
        Some(Slope::Finite(ld.g / s_plus))
    } else {
        Some(Slope::Vertical)
    }
}

fn junction(point: PointName, value: f64, left: Option<Slope>, right: Option<Slope>) -> RegularityLabel {
    let kind = match (left, right) {
        (Some(Slope::Vertical), Some(Slope::Vertical)) => RegularityKind::JunctionVertical,
        (Some(Slope::Finite(a)), Some(Slope::Finite(b))) if (a - b).abs() <= 1e-9 * (1.0 + a.abs()) => RegularityKind::JunctionFinite,
        (Some(_), Some(_)) => RegularityKind::JunctionCorner,
        _ => RegularityKind::Undetermined,
    };
    RegularityLabel { point, value, kind, left, right }
}

fn end_label(point: PointName, (kind, slope): (RegularityKind, Option<Slope>)) -> RegularityLabel {
    let value = if point == PointName::Zero { 0.0 } else { 1.0 };
    let (left, right) = if point == PointName::Zero { (slope, None) } else { (None, slope) };
    RegularityLabel { point, value, kind, left, right }
}

/// Regularity at 0, 1 and the zeros of `D` from the case tables.
pub fn classify_regularity(
    coeffs: &CoefficientSet,
    classification: &CaseClassification,
    c: f64,
    t: &SubThresholds,
) -> Vec<RegularityLabel> {
    classify_regularity_with(coeffs, classification, c, t, LABEL_TOL)
}

pub fn classify_regularity_with(
    coeffs: &CoefficientSet,
    cl: &CaseClassification,
    c: f64,
    t: &SubThresholds,
    tol: f64,
) -> Vec<RegularityLabel> {
    let z = PointName::Zero;
    let o = PointName::One;
    let mut out = Vec::new();
    let alpha_label = |a: f64| {
        junction(
            PointName::Alpha,
            a,
            Some(alpha_side(coeffs, a, c, Side::Right, tol)),
            Some(alpha_side(coeffs, a, c, Side::Left, tol)),
        )
    };
    match cl.pattern {
        Pattern::Pn => {
            let a = cl.alpha.unwrap_or(0.5);
            out.push(end_label(o, threshold_end(coeffs, 1.0, Side::Left, c, t.c_nl, tol)));
            out.push(alpha_label(a));
            out.push(end_label(z, threshold_end(coeffs, 0.0, Side::Right, c, t.c_pr, tol)));
        }
        Pattern::Np => {
            let b = cl.beta.unwrap_or(0.5);
            out.push(end_label(o, free_end(coeffs, 1.0, Side::Left, c, tol)));
            out.push(junction(
                PointName::Beta,
                b,
                beta_side(coeffs, b, c, Side::Right, t.c_pl, tol),
                beta_side(coeffs, b, c, Side::Left, t.c_nr, tol),
            ));
            out.push(end_label(z, free_end(coeffs, 0.0, Side::Right, c, tol)));
        }
        Pattern::Pnp => {
            let (a, b) = (cl.alpha.unwrap_or(0.0), cl.beta.unwrap_or(1.0));
            out.push(end_label(o, free_end(coeffs, 1.0, Side::Left, c, tol)));
            out.push(junction(
                PointName::Beta,
                b,
                beta_side(coeffs, b, c, Side::Right, t.c_pl, tol),
                beta_side(coeffs, b, c, Side::Left, t.c_ab, tol),
            ));
            out.push(alpha_label(a));
            out.push(end_label(z, threshold_end(coeffs, 0.0, Side::Right, c, t.c_pr, tol)));
        }
        Pattern::Npn => {
            let (a, b) = (cl.alpha.unwrap_or(1.0), cl.beta.unwrap_or(0.0));
            out.push(end_label(o, threshold_end(coeffs, 1.0, Side::Left, c, t.c_nl, tol)));
            out.push(alpha_label(a));
            out.push(junction(
                PointName::Beta,
                b,
                beta_side(coeffs, b, c, Side::Right, t.c_ba, tol),
                beta_side(coeffs, b, c, Side::Left, t.c_nr, tol),
            ));
            out.push(end_label(z, free_end(coeffs, 0.0, Side::Right, c, tol)));
        }
        Pattern::Unsupported => {}
    }
    out
}

/// Which local branch a trajectory is taken to follow into its target end.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ArrivalHint {
    /// Largest slope magnitude.
    Strong,
    /// Smallest slope magnitude (tangent branch when there is one).
    Weak,
    /// The branch closest to the computed end value.
    Auto,
}

#[derive(Clone, Copy, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ProfileNode {
    pub xi: f64,
    pub phi: f64,
    pub z: f64,
    /// `dξ/dφ = D/z`.
    pub dxi: f64,
    pub dz: f64,
}

/// One end of a [`SemiProfile`].
#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct PieceEnd {
    pub phi: f64,
    /// `None` when the end is only approached as `ξ → ∓∞`.
    pub xi: Option<f64>,
    /// One-sided limit of `D(φ)φ'`.
    pub flux: f64,
    pub flux_tol: f64,
    pub model: LocalModel,
    /// `(ξ, φ, z)` continuing the profile into an infinite tail.
    pub tail: Vec<(f64, f64, f64)>,
}

/// A monotone profile on one sign interval of `D`.
#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct SemiProfile {
    pub c: f64,
    /// Nodes by increasing `ξ` (decreasing `φ`).
    pub nodes: Vec<ProfileNode>,
    /// End with the larger `φ`.
    pub upper: PieceEnd,
    /// End with the smaller `φ`.
    pub lower: PieceEnd,
}

fn end_node(m: &LocalModel, coeffs: &CoefficientSet, c: f64, xi: f64, flux: f64) -> ProfileNode {
    let mut dxi = m.dxi_limit(coeffs, c);
    if !dxi.is_finite() {
        dxi = f64::NAN;
    }
    let mut dz = m.dz(coeffs, c, m.end);
    if !dz.is_finite() {
        dz = f64::NAN;
    }
    ProfileNode { xi, phi: m.end, z: flux, dxi, dz }
}

fn build_tail(m: &LocalModel, coeffs: &CoefficientSet, c: f64, from: &ProfileNode) -> Vec<(f64, f64, f64)> {
    let r0 = (from.phi - m.end).abs();
    let dir = (from.phi - m.end).signum();
    let w0 = libm::log(r0);
    let mut out = Vec::with_capacity(321);
    out.push((from.xi, from.phi, from.z));
    let mut xi = from.xi;
    let dw = 0.25;
    for k in 0..320 {
        let (a, b) = (w0 - dw * k as f64, w0 - dw * (k + 1) as f64);
        xi += gauss20(
            |w| {
                let r = libm::exp(w);
                let x = m.end + dir * r;
                let z = m.z(coeffs, c, x);
                coeffs.d().value_side(x, m.side) / z * r * dir
            },
            a,
            b,
        );
        if !xi.is_finite() {
            break;
        }
        let x = m.end + dir * libm::exp(b);
        out.push((xi, x, m.z(coeffs, c, x)));
    }
    out
}

/// Rebuilds `φ(ξ)` from a trajectory by `ξ = ∫ D/z`, closing each end with its
/// local model: an exact end node when the end is attained at finite `ξ`,
/// otherwise a tail table. `anchor = (φ_ref, ξ_ref)` fixes the shift; without
/// it the anchored end (or first node) sits at `ξ = 0`.
pub fn reconstruct(
    traj: &FluxTrajectory,
    coeffs: &CoefficientSet,
    anchor: Option<(f64, f64)>,
    arrival: ArrivalHint,
) -> Result<SemiProfile> {
    if !traj.reached() || traj.nodes.len() < 2 {
        return Err(Error::PreconditionFailed("trajectory did not reach its target".into()));
    }
    let c = traj.c;
    let p = &traj.problem;
    let t = p.target_end;
    let last = traj.nodes[traj.nodes.len() - 1];
    let kappa = acceptance_kappa(coeffs, p, c);
    let flux_tol = 4.0 * kappa * traj.epsilon;
    let target_side = p.side_at(t);
    let arrival_model = if last.z.abs() > flux_tol {
        LocalModel::new(coeffs, c, t, target_side, Branch::Flux { value: last.z })
    } else {
        match local_branches(coeffs, c, t, target_side, p.z_sign) {
            Ok(ms) => match arrival {
                ArrivalHint::Strong => ms[0],
                ArrivalHint::Weak => ms[ms.len() - 1],
                ArrivalHint::Auto => *ms
                    .iter()
                    .min_by(|a, b| {
                        let da = (a.z(coeffs, c, last.phi) - last.z).abs();
                        let db = (b.z(coeffs, c, last.phi) - last.z).abs();
                        da.total_cmp(&db)
                    })
                    .unwrap_or(&ms[0]),
            },
            Err(_) => LocalModel::new(coeffs, c, t, target_side, Branch::Flux { value: last.z }),
        }
    };
    let arrival_flux = if let Branch::Flux { value } = arrival_model.branch { value } else { 0.0 };
    let start_flux = if let Branch::Flux { value } = traj.start.branch { value } else { 0.0 };

    let mut nodes: Vec<ProfileNode> = traj
        .nodes
        .iter()
        .map(|n| ProfileNode { xi: n.xi, phi: n.phi, z: n.z, dxi: n.dxi, dz: n.dz })
        .collect();
    let start_node = traj.start_finite.then(|| end_node(&traj.start, coeffs, c, 0.0, start_flux));
    let arrival_finite = arrival_model.attains_finitely(coeffs);
    let arrival_node = arrival_finite.then(|| {
        let xi = last.xi - arrival_model.xi_integral(coeffs, c, last.phi);
        end_node(&arrival_model, coeffs, c, xi, arrival_flux)
    });
    if let Some(n) = start_node {
        nodes.insert(0, n);
    }
    if let Some(n) = arrival_node {
        nodes.push(n);
    }
    if nodes.windows(2).any(|w| !(w[1].xi - w[0].xi).is_finite()) {
        return Err(Error::QuadratureFailure("non-finite ξ increment".into()));
    }
    if nodes[0].phi < nodes[nodes.len() - 1].phi {
        nodes.reverse();
    }
    let make_end = |m: &LocalModel, finite: bool, flux: f64, tol: f64, edge: &ProfileNode| PieceEnd {
        phi: m.end,
        xi: finite.then_some(edge.xi),
        flux,
        flux_tol: tol,
        model: *m,
        tail: if finite { Vec::new() } else { build_tail(m, coeffs, c, edge) },
    };
    let first = nodes[0];
    let lastn = nodes[nodes.len() - 1];
    let start_end = |edge: &ProfileNode| make_end(&traj.start, traj.start_finite, start_flux, flux_tol, edge);
    let arrival_end = |edge: &ProfileNode| make_end(&arrival_model, arrival_finite, arrival_flux, flux_tol, edge);
    let (upper, lower) = if traj.start.end > t {
        (start_end(&first), arrival_end(&lastn))
    } else {
        (arrival_end(&first), start_end(&lastn))
    };
    let mut sp = SemiProfile { c, nodes, upper, lower };
    if let Some((phi_ref, xi_ref)) = anchor {
        let xi_at = sp.xi_at_phi(phi_ref).ok_or_else(|| Error::PreconditionFailed("anchor outside the profile".into()))?;
        sp.shift(xi_ref - xi_at);
    }
    Ok(sp)
}

/// Fritsch–Carlson limited derivatives for monotone cubic Hermite on one interval.
fn limited(d0: f64, d1: f64, secant: f64) -> (f64, f64) {
    if secant == 0.0 {
        return (0.0, 0.0);
    }
    let mut a = if d0.is_finite() { d0 / secant } else { 3.0 };
    let mut b = if d1.is_finite() { d1 / secant } else { 3.0 };
    a = a.max(0.0);
    b = b.max(0.0);
    let r = a * a + b * b;
    if r > 9.0 {
        let tau = 3.0 / libm::sqrt(r);
        a *= tau;
        b *= tau;
    }
    (a * secant, b * secant)
}

impl SemiProfile {
    pub fn shift(&mut self, dx: f64) {
        for n in &mut self.nodes {
            n.xi += dx;
        }
        for e in [&mut self.upper, &mut self.lower] {
            if let Some(x) = e.xi.as_mut() {
                *x += dx;
            }
            for p in &mut e.tail {
                p.0 += dx;
            }
        }
    }

    pub fn xi_range(&self) -> (f64, f64) {
        (self.nodes[0].xi, self.nodes[self.nodes.len() - 1].xi)
    }

    /// `ξ` where the profile equals `phi` inside the node range.
    pub fn xi_at_phi(&self, phi: f64) -> Option<f64> {
        let n = &self.nodes;
        let i = n.windows(2).position(|w| w[0].phi >= phi && phi >= w[1].phi)?;
        let (a, b) = (&n[i], &n[i + 1]);
        let sec = (b.xi - a.xi) / (b.phi - a.phi);
        let (d0, d1) = limited(a.dxi, b.dxi, sec);
        Some(hermite(a.phi, b.phi, a.xi, b.xi, d0, d1, phi))
    }

    /// `(φ, z)` at `xi`, constant beyond finite ends and following the tail tables beyond infinite ones.
    pub fn eval(&self, xi: f64) -> (f64, f64) {
        let n = &self.nodes;
        let (lo, hi) = self.xi_range();
        if xi <= lo {
            return eval_end(&self.upper, xi, true);
        }
        if xi >= hi {
            return eval_end(&self.lower, xi, false);
        }
        let i = n.partition_point(|p| p.xi <= xi).saturating_sub(1).min(n.len() - 2);
        let (a, b) = (&n[i], &n[i + 1]);
        let sec = (b.xi - a.xi) / (b.phi - a.phi);
        let (d0, d1) = limited(a.dxi, b.dxi, sec);
        let phi = invert_hermite(a, b, d0, d1, xi);
        let z = if a.dz.is_finite() && b.dz.is_finite() {
            hermite(a.phi, b.phi, a.z, b.z, a.dz, b.dz, phi)
        } else {
            a.z + (b.z - a.z) * (phi - a.phi) / (b.phi - a.phi)
        };
        (phi, z)
    }

    /// Uniform re-gridding of the finite node range by monotone cubic interpolation.
    pub fn samples(&self, n: usize) -> Vec<(f64, f64)> {
        let (lo, hi) = self.xi_range();
        (0..n)
            .map(|k| {
                let x = lo + (hi - lo) * k as f64 / (n.max(2) - 1) as f64;
                (x, self.eval(x).0)
            })
            .collect()
    }

    pub fn flux_at(&self, phi: f64) -> Option<f64> {
        if phi == self.upper.phi {
            Some(self.upper.flux)
        } else if phi == self.lower.phi {
            Some(self.lower.flux)
        } else {
            None
        }
    }
}

/// `φ` in `[b.phi, a.phi]` with `ξ(φ) = xi` on the monotone cubic through `a`, `b`:
/// Newton steps, falling back to bisection when a step leaves the bracket.
fn invert_hermite(a: &ProfileNode, b: &ProfileNode, d0: f64, d1: f64, xi: f64) -> f64 {
    let (mut lo, mut hi) = (b.phi, a.phi);
    let h = b.phi - a.phi;
    let mut p = a.phi + h * ((xi - a.xi) / (b.xi - a.xi)).clamp(0.0, 1.0);
    for _ in 0..100 {
        let t = (p - a.phi) / h;
        let t2 = t * t;
        let r = hermite(a.phi, b.phi, a.xi, b.xi, d0, d1, p) - xi;
        if r == 0.0 {
            return p;
        }
        // ξ decreases in φ
        if r > 0.0 {
            lo = lo.max(p);
        } else {
            hi = hi.min(p);
        }
        let slope = ((6.0 * t2 - 6.0 * t) * a.xi + (3.0 * t2 - 4.0 * t + 1.0) * h * d0 + (6.0 * t - 6.0 * t2) * b.xi
            + (3.0 * t2 - 2.0 * t) * h * d1)
            / h;
        let mut next = p - r / slope;
        if !(next > lo && next < hi) {
            next = 0.5 * (lo + hi);
        }
        if (next - p).abs() <= 1e-16 * (1.0 + p.abs()) || hi - lo <= 1e-16 * (1.0 + p.abs()) {
            return next;
        }
        p = next;
    }
    p
}

fn eval_end(end: &PieceEnd, xi: f64, upper: bool) -> (f64, f64) {
    // past an attained end the profile is constant, so `D(φ)φ' = 0` there
    if end.xi.is_some() || end.tail.is_empty() {
        return (end.phi, 0.0);
    }
    let t = &end.tail;
    // tail ξ runs away from the nodes: decreasing for the upper end
    let pos = if upper {
        t.iter().position(|p| p.0 <= xi)
    } else {
        t.iter().position(|p| p.0 >= xi)
    };
    match pos {
        None => (end.phi, 0.0),
        Some(0) => (t[0].1, t[0].2),
        Some(k) => {
            let (x0, p0, z0) = t[k - 1];
            let (x1, p1, z1) = t[k];
            let (w0, w1) = (libm::log((p0 - end.phi).abs()), libm::log((p1 - end.phi).abs()));
            let s = (xi - x0) / (x1 - x0);
            let r = libm::exp(w0 + s * (w1 - w0));
            (end.phi + (p0 - end.phi).signum() * r, z0 + s * (z1 - z0))
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Junction {
    pub point: PointName,
    pub phi: f64,
    pub xi: f64,
}

/// A global front: semi-profiles from the `φ = 1` side to the `φ = 0` side.
#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct WaveProfile {
    pub c: f64,
    pub pieces: Vec<SemiProfile>,
    pub junctions: Vec<Junction>,
    pub labels: Vec<RegularityLabel>,
    pub thresholds: SubThresholds,
}

/// Resolves undetermined end labels from the computed pieces: an equilibrium
/// approached only as `ξ → ∓∞` is classical, one attained at finite `ξ` is sharp.
pub fn settle_end_labels(wp: &mut WaveProfile, coeffs: &CoefficientSet) {
    let c = wp.c;
    let ends = [
        (PointName::One, wp.pieces.first().map(|p| p.upper.clone())),
        (PointName::Zero, wp.pieces.last().map(|p| p.lower.clone())),
    ];
    for (point, end) in ends {
        let Some(end) = end else { continue };
        let Some(label) = wp.labels.iter_mut().find(|l| l.point == point && l.kind == RegularityKind::Undetermined) else {
            continue;
        };
        if end.xi.is_none() {
            label.kind = RegularityKind::Classical;
            continue;
        }
        let dxi = end.model.dxi_limit(coeffs, c);
        let slope = if dxi.is_finite() && dxi != 0.0 { Slope::Finite(1.0 / dxi) } else { Slope::Vertical };
        label.kind = sharp(slope);
        match point {
            PointName::One => label.right = Some(slope),
            _ => label.left = Some(slope),
        }
    }
}

/// Pastes semi-profiles after checking that the flux vanishes on both sides of each junction.
pub fn paste(left: SemiProfile, middle: Option<SemiProfile>, right: SemiProfile) -> Result<WaveProfile> {
    let mut v = Vec::from([left]);
    v.extend(middle);
    v.push(right);
    assemble(v, true)
}

/// Pastes without the zero-flux check (for building deliberately defective profiles).
pub fn paste_unchecked(pieces: Vec<SemiProfile>) -> Result<WaveProfile> {
    assemble(pieces, false)
}

fn assemble(mut pieces: Vec<SemiProfile>, check: bool) -> Result<WaveProfile> {
    let c = pieces[0].c;
    let mut junctions = Vec::new();
    for i in 0..pieces.len() - 1 {
        let (a, b) = (&pieces[i].lower, &pieces[i + 1].upper);
        if (a.phi - b.phi).abs() > 1e-12 {
            return Err(Error::PreconditionFailed("pieces do not meet".into()));
        }
        if check && (a.flux.abs() > a.flux_tol || b.flux.abs() > b.flux_tol) {
            return Err(Error::FluxMismatch { junction: a.phi, mismatch: a.flux - b.flux });
        }
        let (Some(xa), Some(xb)) = (a.xi, b.xi) else {
            return Err(Error::PreconditionFailed("junction not attained at finite ξ".into()));
        };
        let phi = a.phi;
        pieces[i + 1].shift(xa - xb);
        junctions.push(Junction { point: PointName::Alpha, phi, xi: xa });
    }
    Ok(WaveProfile { c, pieces, junctions, labels: Vec::new(), thresholds: SubThresholds::default() })
}

impl WaveProfile {
    pub fn eval(&self, xi: f64) -> (f64, f64) {
        for p in &self.pieces {
            match p.lower.xi {
                Some(x) if xi > x => continue,
                _ => return p.eval(xi),
            }
        }
        let last = &self.pieces[self.pieces.len() - 1];
        last.eval(xi)
    }

    pub fn shift(&mut self, dx: f64) {
        for p in &mut self.pieces {
            p.shift(dx);
        }
        for j in &mut self.junctions {
            j.xi += dx;
        }
    }

    /// Finite `ξ` where 1 is attained.
    pub fn xi_one(&self) -> Option<f64> {
        self.pieces[0].upper.xi
    }

    /// Finite `ξ` where 0 is attained.
    pub fn xi_zero(&self) -> Option<f64> {
        self.pieces[self.pieces.len() - 1].lower.xi
    }

    pub fn junction_xi(&self, point: PointName) -> Option<f64> {
        self.junctions.iter().find(|j| j.point == point).map(|j| j.xi)
    }

    /// `ξ` where the profile equals `phi`.
    pub fn xi_at_phi(&self, phi: f64) -> Option<f64> {
        self.pieces.iter().find_map(|p| p.xi_at_phi(phi))
    }

    /// Range of `ξ` covered by nodes, with finite attainment points included.
    pub fn node_range(&self) -> (f64, f64) {
        (self.pieces[0].xi_range().0, self.pieces[self.pieces.len() - 1].xi_range().1)
    }

    /// All node `ξ` values in order.
    pub fn node_xis(&self) -> Vec<f64> {
        self.pieces.iter().flat_map(|p| p.nodes.iter().map(|n| n.xi)).collect()
    }

    /// Uniform samples `(ξ, φ, z)` on `[lo, hi]`.
    pub fn samples(&self, lo: f64, hi: f64, n: usize) -> Vec<(f64, f64, f64)> {
        (0..n)
            .map(|k| {
                let x = lo + (hi - lo) * k as f64 / (n.max(2) - 1) as f64;
                let (p, z) = self.eval(x);
                (x, p, z)
            })
            .collect()
    }

    pub fn label(&self, point: PointName) -> Option<&RegularityLabel> {
        self.labels.iter().find(|l| l.point == point)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::presets;
    use crate::shooting::{integrate, Acceptance, ProblemKind, ShootingOptions, SingularProblem};

    fn piece(coeffs: &CoefficientSet, anchor: f64, target: f64, c: f64, flux: f64, at: Option<(f64, f64)>) -> SemiProfile {
        let p = SingularProblem::new(coeffs, anchor, target, ProblemKind::SemiWavefront, Acceptance::ReachTarget)
            .unwrap()
            .with_start_flux(flux);
        let t = integrate(&p, coeffs, c, &ShootingOptions::default()).unwrap();
        reconstruct(&t, coeffs, at, ArrivalHint::Auto).unwrap()
    }

    #[test]
    fn square_root_piece_with_finite_ends() {
        // On (0, 1/2) at c = 0 the flux is φ(φ - 1/2) and φ = 1/2 - √(1/16 + 2ξ).
        let c = presets::ex51();
        let s = piece(&c, 0.5, 0.0, 0.0, 0.0, Some((0.5, -1.0 / 32.0)));
        assert!((s.upper.xi.unwrap() + 1.0 / 32.0).abs() < 1e-9);
        assert!((s.lower.xi.unwrap() - 3.0 / 32.0).abs() < 1e-6);
        for k in 1..100 {
            let xi = -1.0 / 32.0 + 0.125 * k as f64 / 100.0;
            let exact = 0.5 - libm::sqrt(1.0 / 16.0 + 2.0 * xi);
            assert!((s.eval(xi).0 - exact).abs() < 1e-6, "{xi}");
        }
        assert_eq!(s.eval(1.0).0, 0.0);
        assert_eq!(s.eval(-1.0).0, 0.5);
    }

    #[test]
    fn exponential_tail_piece() {
        // On (0, 1/2) at c = 0 the flux is φ²(φ - 1/2) and φ = e^{-ξ}/4.
        let c = presets::ex52();
        let s = piece(&c, 0.5, 0.0, 0.0, 0.0, Some((0.5, libm::log(0.5))));
        assert!(s.lower.xi.is_none());
        for xi in [-0.6, 0.0, 1.0, 3.0, 8.0, 20.0] {
            let exact = 0.25 * libm::exp(-xi);
            assert!((s.eval(xi).0 - exact).abs() <= 1e-6 * exact.max(1e-3), "{xi}: {}", s.eval(xi).0);
        }
    }

    #[test]
    fn shift_moves_everything() {
        let c = presets::ex51();
        let mut s = piece(&c, 0.5, 0.0, 0.0, 0.0, None);
        let before = (s.xi_at_phi(0.25).unwrap(), s.lower.xi.unwrap(), s.eval(0.01).0);
        s.shift(0.7);
        assert!((s.xi_at_phi(0.25).unwrap() - before.0 - 0.7).abs() < 1e-12);
        assert!((s.lower.xi.unwrap() - before.1 - 0.7).abs() < 1e-12);
        assert!((s.eval(0.71).0 - before.2).abs() < 1e-12);
    }

    #[test]
    fn nonzero_junction_flux_is_refused() {
        let c = presets::ex51();
        // D < 0 above 1/2, so the flux there is positive.
        let upper = piece(&c, 0.5, 1.0, 0.0, 0.1, None);
        let lower = piece(&c, 0.5, 0.0, 0.0, 0.0, None);
        assert!((upper.lower.flux - 0.1).abs() < 1e-12);
        match paste(upper.clone(), None, lower.clone()) {
            Err(Error::FluxMismatch { junction, mismatch }) => {
                assert_eq!(junction, 0.5);
                assert!((mismatch - 0.1).abs() < 1e-9, "{mismatch}");
            }
            other => panic!("{other:?}"),
        }
        let w = paste_unchecked(alloc::vec![upper, lower]).unwrap();
        assert_eq!(w.junctions.len(), 1);
    }

    #[test]
    fn pasted_profile_is_continuous_at_the_junction() {
        let c = presets::ex51();
        let upper = piece(&c, 0.5, 1.0, 0.0, 0.0, None);
        let lower = piece(&c, 0.5, 0.0, 0.0, 0.0, None);
        let w = paste(upper, None, lower).unwrap();
        let x = w.junctions[0].xi;
        for h in [1e-3, 1e-5, 1e-7] {
            assert!((w.eval(x - h).0 - 0.5).abs() < 2.0 * libm::sqrt(h));
            assert!((w.eval(x + h).0 - 0.5).abs() < 2.0 * libm::sqrt(h));
        }
        assert!((w.xi_one().unwrap() - x + 0.125).abs() < 1e-6);
        assert!((w.xi_zero().unwrap() - x - 0.125).abs() < 1e-6);
    }

    #[test]
    fn limiter_keeps_monotone_derivatives() {
        let (a, b) = limited(1.0, 1.0, 1.0);
        assert_eq!((a, b), (1.0, 1.0));
        let (a, b) = limited(10.0, 10.0, 1.0);
        assert!(a * a + b * b <= 9.0 + 1e-12);
    }
}
