//! Pipelines per sign pattern: classification, brackets, thresholds, pieces,
//! pasting, labels and normalization.

use alloc::boxed::Box;
use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use crate::bounds::{bracket_c_pl, bracket_c_pr, bracket_interior, lower_bound_possibly_strict, SpeedBracket};
use crate::coeffs::{validate, CaseClassification, CoefficientSet, Pattern, Side};
use crate::error::{Error, Result};
use crate::profile::{
    classify_regularity_with, paste, reconstruct, settle_end_labels, ArrivalHint, PointName, RegularityKind, SemiProfile,
    SubThresholds,
    WaveProfile, LABEL_TOL,
};
use crate::shooting::{
    critical_speed, integrate, interior_connection_speed, Acceptance, CriticalSpeedResult, ProblemKind, ShootingOptions,
    SingularProblem,
};

/// `D̄(φ) = -D(1-φ)`, `ḡ(φ) = g(1-φ)`, `f̄(φ) = f(1) - f(1-φ)`.
pub fn reflect(coeffs: &CoefficientSet) -> CoefficientSet {
    coeffs.reflect()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum ThresholdName {
    CPr,
    CNl,
    CPl,
    CNr,
    CAb,
    CBa,
}

impl ThresholdName {
    pub fn as_str(&self) -> &'static str {
        match self {
            ThresholdName::CPr => "c_pr",
            ThresholdName::CNl => "c_nl",
            ThresholdName::CPl => "c_pl",
            ThresholdName::CNr => "c_nr",
            ThresholdName::CAb => "c_ab",
            ThresholdName::CBa => "c_ba",
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize))]
pub struct SpeedReport {
    pub classification: CaseClassification,
    pub sub_thresholds: BTreeMap<ThresholdName, CriticalSpeedResult>,
    /// `c_pn`, `c_np`, `c_pnp` or `c_npn`.
    pub composite_name: String,
    pub composite: f64,
    pub brackets: BTreeMap<ThresholdName, SpeedBracket>,
    pub diagnostics: Vec<String>,
}

impl SpeedReport {
    pub fn threshold(&self, name: ThresholdName) -> Option<f64> {
        self.sub_thresholds.get(&name).map(|r| r.c_star)
    }

    pub fn sub_threshold_values(&self) -> SubThresholds {
        SubThresholds {
            c_pr: self.threshold(ThresholdName::CPr),
            c_nl: self.threshold(ThresholdName::CNl),
            c_pl: self.threshold(ThresholdName::CPl),
            c_nr: self.threshold(ThresholdName::CNr),
            c_ab: self.threshold(ThresholdName::CAb),
            c_ba: self.threshold(ThresholdName::CBa),
        }
    }
}

fn check_dini(coeffs: &CoefficientSet, at_zero: bool) -> Result<()> {
    let v = if at_zero { coeffs.dg().slope(0.0, Side::Right) } else { coeffs.dg().slope(1.0, Side::Left) };
    if v.is_finite() {
        Ok(())
    } else {
        Err(Error::AssumptionViolated(format!(
            "upper Dini derivative of Dg at {} is infinite",
            if at_zero { 0 } else { 1 }
        )))
    }
}

/// Threshold of semi-wavefronts from `alpha` to 0 on `(0, alpha)`.
fn c_pr(coeffs: &CoefficientSet, alpha: f64, opts: &ShootingOptions) -> Result<(SpeedBracket, CriticalSpeedResult)> {
    let b = bracket_c_pr(coeffs, alpha)?;
    let p = SingularProblem::z_intro_left(coeffs, alpha)?;
    Ok((b, critical_speed(&p, coeffs, &b, opts)?))
}

/// Flux-limit threshold at `beta` on `(beta, 1)`.
fn c_pl(coeffs: &CoefficientSet, beta: f64, opts: &ShootingOptions) -> Result<(SpeedBracket, CriticalSpeedResult)> {
    let b = bracket_c_pl(coeffs, beta)?;
    let p = SingularProblem::flux_limit_left(coeffs, beta)?;
    Ok((b, critical_speed(&p, coeffs, &b, opts)?))
}

/// Analytic brackets of every sub-threshold relevant to the sign pattern, without shooting.
pub fn speed_brackets(coeffs: &CoefficientSet) -> Result<BTreeMap<ThresholdName, SpeedBracket>> {
    let cl = validate(coeffs)?;
    let refl = coeffs.reflect();
    let mut out = BTreeMap::new();
    match cl.pattern {
        Pattern::Pn => {
            let a = cl.alpha.unwrap_or(0.5);
            out.insert(ThresholdName::CPr, bracket_c_pr(coeffs, a)?);
            out.insert(ThresholdName::CNl, bracket_c_pr(&refl, 1.0 - a)?);
        }
        Pattern::Np => {
            let b = cl.beta.unwrap_or(0.5);
            out.insert(ThresholdName::CPl, bracket_c_pl(coeffs, b)?);
            out.insert(ThresholdName::CNr, bracket_c_pl(&refl, 1.0 - b)?);
        }
        Pattern::Pnp => {
            let (a, b) = (cl.alpha.unwrap_or(0.0), cl.beta.unwrap_or(1.0));
            out.insert(ThresholdName::CPr, bracket_c_pr(coeffs, a)?);
            out.insert(ThresholdName::CPl, bracket_c_pl(coeffs, b)?);
            out.insert(ThresholdName::CAb, bracket_interior(coeffs, a, b)?);
        }
        Pattern::Npn => {
            let (a, b) = (cl.alpha.unwrap_or(1.0), cl.beta.unwrap_or(0.0));
            out.insert(ThresholdName::CNl, bracket_c_pr(&refl, 1.0 - a)?);
            out.insert(ThresholdName::CNr, bracket_c_pl(&refl, 1.0 - b)?);
            out.insert(ThresholdName::CBa, bracket_interior(coeffs, a, b)?);
        }
        Pattern::Unsupported => return Err(Error::AssumptionViolated("D must change sign once or twice".into())),
    }
    Ok(out)
}

/// Every sub-threshold relevant to the sign pattern of `D` and their maximum.
/// Thresholds on the `φ = 1` side of a zero of `D` are computed on the reflected set.
pub fn compute_speed_report(coeffs: &CoefficientSet, opts: &ShootingOptions) -> Result<SpeedReport> {
    let cl = validate(coeffs)?;
    let mut subs = BTreeMap::new();
    let mut brackets = BTreeMap::new();
    let mut diagnostics = Vec::new();
    let mut put = |name, (b, r): (SpeedBracket, CriticalSpeedResult)| {
        brackets.insert(name, b);
        subs.insert(name, r);
    };
    let refl = || coeffs.reflect();
    let flag_strict = |set: &CoefficientSet, alpha: f64, name: &str| {
        if lower_bound_possibly_strict(set, alpha) {
            format!("h does not decrease near the end of {name}; its lower estimate may be strict")
        } else {
            String::new()
        }
    };
    let composite_name = match cl.pattern {
        Pattern::Pn => {
            check_dini(coeffs, true)?;
            check_dini(coeffs, false)?;
            let a = cl.alpha.unwrap_or(0.5);
            diagnostics.push(flag_strict(coeffs, a, "c_pr"));
            diagnostics.push(flag_strict(&refl(), 1.0 - a, "c_nl"));
            put(ThresholdName::CPr, c_pr(coeffs, a, opts)?);
            put(ThresholdName::CNl, c_pr(&refl(), 1.0 - a, opts)?);
            "c_pn"
        }
        Pattern::Np => {
            let b = cl.beta.unwrap_or(0.5);
            put(ThresholdName::CPl, c_pl(coeffs, b, opts)?);
            put(ThresholdName::CNr, c_pl(&refl(), 1.0 - b, opts)?);
            "c_np"
        }
        Pattern::Pnp => {
            check_dini(coeffs, true)?;
            let (a, b) = (cl.alpha.unwrap_or(0.0), cl.beta.unwrap_or(1.0));
            diagnostics.push(flag_strict(coeffs, a, "c_pr"));
            put(ThresholdName::CPr, c_pr(coeffs, a, opts)?);
            put(ThresholdName::CPl, c_pl(coeffs, b, opts)?);
            let hint = bracket_interior(coeffs, a, b)?;
            put(ThresholdName::CAb, (hint, interior_connection_speed(coeffs, a, b, Some(hint), opts)?));
            "c_pnp"
        }
        Pattern::Npn => {
            check_dini(coeffs, false)?;
            if check_dini(coeffs, true).is_err() {
                diagnostics.push(String::from("upper Dini derivative of Dg at 0 is infinite"));
            }
            let (a, b) = (cl.alpha.unwrap_or(1.0), cl.beta.unwrap_or(0.0));
            diagnostics.push(flag_strict(&refl(), 1.0 - a, "c_nl"));
            put(ThresholdName::CNl, c_pr(&refl(), 1.0 - a, opts)?);
            put(ThresholdName::CNr, c_pl(&refl(), 1.0 - b, opts)?);
            let hint = bracket_interior(coeffs, a, b)?;
            put(ThresholdName::CBa, (hint, interior_connection_speed(coeffs, b, a, Some(hint), opts)?));
            "c_npn"
        }
        Pattern::Unsupported => {
            return Err(Error::AssumptionViolated("D must change sign once or twice".into()));
        }
    };
    let composite = subs.values().map(|r| r.c_star).fold(f64::NEG_INFINITY, f64::max);
    Ok(SpeedReport {
        classification: cl,
        sub_thresholds: subs,
        composite_name: composite_name.into(),
        composite,
        brackets,
        diagnostics: diagnostics.into_iter().filter(|d| !d.is_empty()).collect(),
    })
}

/// Where the solved profile is pinned in `ξ`.
#[derive(Clone, Copy, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case", tag = "kind"))]
pub enum Normalization {
    /// First junction (smallest `ξ`) at `ξ = 0`.
    JunctionAtZero,
    /// `φ(xi) = phi`.
    PinValue { phi: f64, xi: f64 },
}

#[derive(Clone, Copy, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct SolveOptions {
    pub shooting: ShootingOptions,
    pub normalization: Normalization,
    /// How far below the composite threshold a speed is still accepted.
    pub admissibility_tol: f64,
    pub label_tol: f64,
}

impl Default for SolveOptions {
    fn default() -> Self {
        Self {
            shooting: ShootingOptions::default(),
            normalization: Normalization::JunctionAtZero,
            admissibility_tol: 1e-5,
            label_tol: LABEL_TOL,
        }
    }
}

/// The front with speed `c`, or `NotAdmissible` below the composite threshold.
pub fn solve_wavefront(coeffs: &CoefficientSet, c: f64, opts: &SolveOptions) -> Result<WaveProfile> {
    let report = compute_speed_report(coeffs, &opts.shooting)?;
    solve_with_report(coeffs, c, &report, opts)
}

fn end_hint(kind: RegularityKind) -> ArrivalHint {
    match kind {
        RegularityKind::SharpFiniteSlope | RegularityKind::SharpVertical => ArrivalHint::Strong,
        RegularityKind::Classical => ArrivalHint::Weak,
        _ => ArrivalHint::Auto,
    }
}

/// As [`solve_wavefront`], reusing a report.
pub fn solve_with_report(coeffs: &CoefficientSet, c: f64, report: &SpeedReport, opts: &SolveOptions) -> Result<WaveProfile> {
    if c < report.composite - opts.admissibility_tol {
        return Err(Error::NotAdmissible { c, threshold: report.composite, report: Box::new(report.clone()) });
    }
    let cl = &report.classification;
    let th = report.sub_threshold_values();
    let labels = classify_regularity_with(coeffs, cl, c, &th, opts.label_tol);
    let kind_at = |p: PointName| labels.iter().find(|l| l.point == p).map_or(RegularityKind::Undetermined, |l| l.kind);
    let near = |t: Option<f64>| if t.is_some_and(|t| (c - t).abs() <= opts.label_tol) { ArrivalHint::Strong } else { ArrivalHint::Weak };
    let piece = |anchor: f64, target: f64, hint: ArrivalHint| -> Result<SemiProfile> {
        let p = SingularProblem::new(coeffs, anchor, target, ProblemKind::SemiWavefront, Acceptance::VanishAtTarget)?;
        let traj = integrate(&p, coeffs, c, &opts.shooting)?;
        if !traj.reached() {
            return Err(Error::NotAdmissible { c, threshold: report.composite, report: Box::new(report.clone()) });
        }
        reconstruct(&traj, coeffs, None, hint)
    };
    let (pieces, names) = match cl.pattern {
        Pattern::Pn => {
            let a = cl.alpha.unwrap_or(0.5);
            let left = piece(a, 1.0, end_hint(kind_at(PointName::One)))?;
            let right = piece(a, 0.0, end_hint(kind_at(PointName::Zero)))?;
            ((left, None, right), [PointName::Alpha, PointName::Alpha])
        }
        Pattern::Np => {
            let b = cl.beta.unwrap_or(0.5);
            let left = piece(1.0, b, near(th.c_pl))?;
            let right = piece(0.0, b, near(th.c_nr))?;
            ((left, None, right), [PointName::Beta, PointName::Beta])
        }
        Pattern::Pnp => {
            let (a, b) = (cl.alpha.unwrap_or(0.0), cl.beta.unwrap_or(1.0));
            let left = piece(1.0, b, near(th.c_pl))?;
            let mid = piece(a, b, near(th.c_ab))?;
            let right = piece(a, 0.0, end_hint(kind_at(PointName::Zero)))?;
            ((left, Some(mid), right), [PointName::Beta, PointName::Alpha])
        }
        Pattern::Npn => {
            let (a, b) = (cl.alpha.unwrap_or(1.0), cl.beta.unwrap_or(0.0));
            let left = piece(a, 1.0, end_hint(kind_at(PointName::One)))?;
            let mid = piece(a, b, near(th.c_ba))?;
            let right = piece(0.0, b, near(th.c_nr))?;
            ((left, Some(mid), right), [PointName::Alpha, PointName::Beta])
        }
        Pattern::Unsupported => return Err(Error::AssumptionViolated("D must change sign once or twice".into())),
    };
    for (end, tol) in [(&pieces.0.upper, pieces.0.upper.flux_tol), (&pieces.2.lower, pieces.2.lower.flux_tol)] {
        if end.flux.abs() > tol {
            return Err(Error::NotAdmissible { c, threshold: report.composite, report: Box::new(report.clone()) });
        }
    }
    let mut wp = paste(pieces.0, pieces.1, pieces.2)?;
    for (j, n) in wp.junctions.iter_mut().zip(names) {
        j.point = n;
    }
    wp.labels = labels;
    wp.thresholds = th;
    settle_end_labels(&mut wp, coeffs);
    normalize(&mut wp, opts.normalization)?;
    Ok(wp)
}

pub fn normalize(wp: &mut WaveProfile, n: Normalization) -> Result<()> {
    let dx = match n {
        Normalization::JunctionAtZero => -wp.junctions[0].xi,
        Normalization::PinValue { phi, xi } => {
            let at = wp
                .xi_at_phi(phi)
                .ok_or_else(|| Error::PreconditionFailed(format!("profile never takes the value {phi}")))?;
            xi - at
        }
    };
    wp.shift(dx);
    Ok(())
}
