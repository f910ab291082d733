//! Shooting for the singular flux equation `ż = h(φ) - c - D(φ)g(φ)/z` on a
//! sign interval of `D`, solvability tests and threshold bisection.

use alloc::vec;
use alloc::vec::Vec;

use crate::bounds::{bracket_interior, quadratic_roots, SpeedBracket};
use crate::coeffs::{CoefficientSet, Side};
use crate::error::{Error, Result};
use crate::ode::{dopri_step, error_norm, rosenbrock_step, step_factor_order, State};

/// Which boundary problem a [`SingularProblem`] instantiates.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "kebab-case"))]
pub enum ProblemKind {
    /// `(0, α)`, `D > 0`, vanishing flux at 0.
    ZIntroLeft,
    /// `(α, 1)`, `D < 0`, vanishing flux at 1.
    ZIntroRight,
    /// `(β, 1)`, `D > 0`, flux limit at `β`.
    FluxLimitLeft,
    /// `(0, β)`, `D < 0`, flux limit at `β`.
    FluxLimitRight,
    /// Between two zeros of `D`.
    InteriorConnection,
    /// A profile piece started at a zero of `D`.
    SemiWavefront,
}

/// How a trajectory is judged at the target end.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum Acceptance {
    /// Reaching the target without sign violation.
    ReachTarget,
    /// Reaching the target with `|z(target ∓ ε)| ≤ κ ε`.
    VanishAtTarget,
}

#[derive(Clone, Copy, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct SingularProblem {
    pub interval: (f64, f64),
    /// `-1` where `D > 0`, `+1` where `D < 0`.
    pub z_sign: f64,
    pub anchored_end: f64,
    pub target_end: f64,
    pub kind: ProblemKind,
    pub acceptance: Acceptance,
    /// Nonzero to start from `z(anchored_end) = start_flux` instead of a vanishing flux.
    pub start_flux: f64,
}

impl SingularProblem {
    pub fn new(
        coeffs: &CoefficientSet,
        anchored_end: f64,
        target_end: f64,
        kind: ProblemKind,
        acceptance: Acceptance,
    ) -> Result<Self> {
        let interval = (anchored_end.min(target_end), anchored_end.max(target_end));
        if !(interval.0 >= 0.0 && interval.1 <= 1.0 && interval.0 < interval.1) {
            return Err(Error::PreconditionFailed("interval must lie in [0, 1]".into()));
        }
        let d = coeffs.d();
        let mut sign = 0.0;
        for (x0, x1, i) in d.segments(interval.0, interval.1) {
            let p = &d.pieces_f64()[i];
            let inner = p.real_roots(x0, x1).into_iter().any(|r| r > interval.0 + 1e-12 && r < interval.1 - 1e-12);
            let s = p.eval(0.5 * (x0 + x1)).signum();
            if inner || p.eval(0.5 * (x0 + x1)) == 0.0 || (sign != 0.0 && s != sign) {
                return Err(Error::PreconditionFailed("D changes sign inside the interval".into()));
            }
            sign = s;
        }
        Ok(Self { interval, z_sign: -sign, anchored_end, target_end, kind, acceptance, start_flux: 0.0 })
    }

    /// `(0, α)` anchored at 0.
    pub fn z_intro_left(coeffs: &CoefficientSet, alpha: f64) -> Result<Self> {
        Self::new(coeffs, 0.0, alpha, ProblemKind::ZIntroLeft, Acceptance::ReachTarget)
    }

    /// `(α, 1)` anchored at 1.
    pub fn z_intro_right(coeffs: &CoefficientSet, alpha: f64) -> Result<Self> {
        Self::new(coeffs, 1.0, alpha, ProblemKind::ZIntroRight, Acceptance::ReachTarget)
    }

    /// `(β, 1)` anchored at 1, flux inspected at `β`.
    pub fn flux_limit_left(coeffs: &CoefficientSet, beta: f64) -> Result<Self> {
        Self::new(coeffs, 1.0, beta, ProblemKind::FluxLimitLeft, Acceptance::VanishAtTarget)
    }

    /// `(0, β)` anchored at 0, flux inspected at `β`.
    pub fn flux_limit_right(coeffs: &CoefficientSet, beta: f64) -> Result<Self> {
        Self::new(coeffs, 0.0, beta, ProblemKind::FluxLimitRight, Acceptance::VanishAtTarget)
    }

    /// Connection between two zeros of `D`, anchored at the one where `D`
    /// turns from positive to negative.
    pub fn interior(coeffs: &CoefficientSet, left: f64, right: f64) -> Result<Self> {
        let mid = coeffs.d().value(0.5 * (left + right));
        let (a, t) = if mid < 0.0 { (left, right) } else { (right, left) };
        Self::new(coeffs, a, t, ProblemKind::InteriorConnection, Acceptance::VanishAtTarget)
    }

    pub fn with_start_flux(mut self, flux: f64) -> Self {
        self.start_flux = flux;
        self
    }

    /// Side of `x` on which the interval lies.
    pub fn side_at(&self, x: f64) -> Side {
        if x <= self.interval.0 {
            Side::Right
        } else {
            Side::Left
        }
    }
}

/// Local behaviour of `z` next to an end where it is singular.
#[derive(Clone, Copy, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum Branch {
    /// `z ≈ s (φ - e)`.
    Linear { s: f64 },
    /// `z ≈ D g / (h - c)`, tangent to the zero slope.
    Balance,
    /// `z ≈ k (φ - e)²` when `Dg` vanishes to third order.
    Quadratic { k: f64 },
    /// `z ≈ k |φ - e|^{3/2}` when `Dg` vanishes to second order.
    ThreeHalves { k: f64 },
    /// `z ≈ value`, a nonzero flux.
    Flux { value: f64 },
}

pub const SERIES_TERMS: usize = 9;

#[derive(Clone, Copy, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct LocalModel {
    pub end: f64,
    pub side: Side,
    pub branch: Branch,
    /// Power-series coefficients of `z` in `φ - end` (index = power); all zero when unavailable.
    pub series: [f64; SERIES_TERMS],
}

/// Taylor coefficients of `p` around `e`.
fn taylor(p: &crate::poly::Poly, e: f64, n: usize) -> Vec<f64> {
    let mut out = Vec::with_capacity(n);
    let mut q = p.clone();
    let mut fact = 1.0;
    for k in 0..n {
        if k > 0 {
            fact *= k as f64;
        }
        out.push(q.eval(e) / fact);
        q = q.derivative();
    }
    out
}

/// Series solution of `z ż = (h - c) z - D g` around `e` with the leading
/// behaviour of `branch`, solving order by order for the coefficient that
/// enters linearly; truncated at the first resonance.
fn series_for(coeffs: &CoefficientSet, c: f64, e: f64, side: Side, branch: Branch) -> [f64; SERIES_TERMS] {
    let mut a = [0.0; SERIES_TERMS];
    let (start, lag) = match branch {
        Branch::Linear { s } => {
            a[1] = s;
            (2, 0)
        }
        Branch::Balance => (2, 0),
        Branch::Quadratic { k } => {
            a[2] = k;
            (3, 1)
        }
        _ => return a,
    };
    let hp = &coeffs.h().pieces_f64()[coeffs.h().piece_index(e, side)];
    let dgp = &coeffs.dg().pieces_f64()[coeffs.dg().piece_index(e, side)];
    let mut hc = taylor(hp, e, SERIES_TERMS + 1);
    hc[0] -= c;
    let pc = taylor(dgp, e, SERIES_TERMS + 1);
    let residual = |a: &[f64; SERIES_TERMS], n: usize| -> f64 {
        let get = |i: usize| if i < SERIES_TERMS { a[i] } else { 0.0 };
        let mut l = 0.0;
        let mut r = -pc[n];
        for i in 1..=n {
            l += get(i) * (n - i + 1) as f64 * get(n - i + 1);
            r += hc[n - i] * get(i);
        }
        l - r
    };
    for m in start..SERIES_TERMS {
        let n = m + lag;
        a[m] = 0.0;
        let e0 = residual(&a, n);
        a[m] = 1.0;
        let e1 = residual(&a, n);
        let slope = e1 - e0;
        if slope.abs() <= 1e-12 * (1.0 + e0.abs()) {
            a[m] = 0.0;
            break;
        }
        a[m] = -e0 / slope;
        if !a[m].is_finite() {
            a[m] = 0.0;
            break;
        }
    }
    a
}

impl LocalModel {
    pub fn new(coeffs: &CoefficientSet, c: f64, end: f64, side: Side, branch: Branch) -> Self {
        Self { end, side, branch, series: series_for(coeffs, c, end, side, branch) }
    }
}

const GL_NODES: [f64; 10] = [
    0.076_526_521_133_497_33,
    0.227_785_851_141_645_08,
    0.373_706_088_715_419_56,
    0.510_867_001_950_827_1,
    0.636_053_680_726_515,
    0.746_331_906_460_150_8,
    0.839_116_971_822_218_8,
    0.912_234_428_251_326,
    0.963_971_927_277_913_8,
    0.993_128_599_185_094_9,
];
const GL_WEIGHTS: [f64; 10] = [
    0.152_753_387_130_725_85,
    0.149_172_986_472_603_75,
    0.142_096_109_318_382_05,
    0.131_688_638_449_176_63,
    0.118_194_531_961_518_42,
    0.101_930_119_817_240_44,
    0.083_276_741_576_704_75,
    0.062_672_048_334_109_06,
    0.040_601_429_800_386_94,
    0.017_614_007_139_152_12,
];

/// 20-point Gauss–Legendre rule on `[a, b]`.
pub(crate) fn gauss20(f: impl Fn(f64) -> f64, a: f64, b: f64) -> f64 {
    let (m, r) = (0.5 * (a + b), 0.5 * (b - a));
    let mut s = 0.0;
    for (x, w) in GL_NODES.iter().zip(GL_WEIGHTS.iter()) {
        s += w * (f(m - r * x) + f(m + r * x));
    }
    s * r
}

impl LocalModel {
    /// Model value of `z` at `phi`.
    pub fn z(&self, coeffs: &CoefficientSet, c: f64, phi: f64) -> f64 {
        let u = phi - self.end;
        if self.series.iter().any(|&a| a != 0.0) && !matches!(self.branch, Branch::Flux { .. } | Branch::ThreeHalves { .. }) {
            return self.series.iter().rev().fold(0.0, |acc, &a| acc * u + a);
        }
        match self.branch {
            Branch::Linear { s } => s * u,
            Branch::Balance => {
                let dg = coeffs.d().value_side(phi, self.side) * coeffs.g().value_side(phi, self.side);
                dg / (coeffs.h().value_side(phi, self.side) - c)
            }
            Branch::Quadratic { k } => k * u * u,
            Branch::ThreeHalves { k } => k * libm::pow(u.abs(), 1.5),
            Branch::Flux { value } => value,
        }
    }

    /// `dz/dφ` of the model at `phi`.
    pub fn dz(&self, coeffs: &CoefficientSet, c: f64, phi: f64) -> f64 {
        let u = phi - self.end;
        match self.branch {
            Branch::Flux { .. } => 0.0,
            Branch::ThreeHalves { k } => 1.5 * k * libm::sqrt(u.abs()) * u.signum(),
            _ if self.series.iter().any(|&a| a != 0.0) => {
                let mut acc = 0.0;
                for (i, &a) in self.series.iter().enumerate().skip(1).rev() {
                    acc = acc * u + i as f64 * a;
                }
                acc
            }
            _ => {
                let z = self.z(coeffs, c, phi);
                if z == 0.0 {
                    self.slope()
                } else {
                    let dg = coeffs.d().value_side(phi, self.side) * coeffs.g().value_side(phi, self.side);
                    coeffs.h().value_side(phi, self.side) - c - dg / z
                }
            }
        }
    }

    /// Slope of `z` at the end.
    pub fn slope(&self) -> f64 {
        match self.branch {
            Branch::Linear { s } => s,
            _ => 0.0,
        }
    }

    /// Whether `∫ D/z` converges at the end, i.e. the end is reached at finite `ξ`.
    pub fn attains_finitely(&self, coeffs: &CoefficientSet) -> bool {
        let ld = coeffs.local_data(self.end, self.side);
        let dzero = ld.d.abs() <= 1e-12;
        match self.branch {
            Branch::Linear { .. } => dzero,
            Branch::Balance => ld.g.abs() > 1e-12,
            Branch::Quadratic { .. } => dzero && ld.d_slope.abs() <= 1e-12,
            Branch::ThreeHalves { .. } => dzero,
            Branch::Flux { .. } => true,
        }
    }

    /// Limit of `dξ/dφ = D/z` at the end (infinite when not attained finitely).
    pub fn dxi_limit(&self, coeffs: &CoefficientSet, c: f64) -> f64 {
        let ld = coeffs.local_data(self.end, self.side);
        let dir = if self.side == Side::Right { 1.0 } else { -1.0 };
        match self.branch {
            Branch::Linear { s } if ld.d.abs() <= 1e-12 => ld.d_slope / s,
            Branch::Balance if ld.g.abs() > 1e-12 => (ld.h - c) / ld.g,
            Branch::Flux { value } => ld.d / value,
            Branch::Quadratic { k } if ld.d.abs() <= 1e-12 && ld.d_slope.abs() <= 1e-12 => {
                let dd = coeffs.d().pieces_f64()[coeffs.d().piece_index(self.end, self.side)]
                    .derivative()
                    .derivative()
                    .eval(self.end);
                dd / (2.0 * k)
            }
            _ => {
                // D/z keeps the sign of -z_sign * D, unbounded.
                let probe = self.end + dir * 1e-9;
                let v = coeffs.d().value(probe) / self.z(coeffs, c, probe);
                if v < 0.0 {
                    f64::NEG_INFINITY
                } else {
                    f64::INFINITY
                }
            }
        }
    }

    /// `∫_end^phi D/z_model`, assuming it converges.
    pub fn xi_integral(&self, coeffs: &CoefficientSet, c: f64, phi: f64) -> f64 {
        let u = phi - self.end;
        let dir = u.signum();
        let t1 = libm::sqrt(u.abs());
        // φ = end + dir t² removes the |u|^{-1/2} endpoint singularity.
        gauss20(
            |t| {
                let x = self.end + dir * t * t;
                let z = self.z(coeffs, c, x);
                if z == 0.0 {
                    0.0
                } else {
                    coeffs.d().value_side(x, self.side) / z * 2.0 * t * dir
                }
            },
            0.0,
            t1,
        )
    }

    /// `∫_from^to D/z_model` away from the end (used for infinite tails),
    /// integrated in `ln|φ - end|`.
    pub fn xi_between(&self, coeffs: &CoefficientSet, c: f64, from: f64, to: f64) -> f64 {
        let (w0, w1) = (libm::log((from - self.end).abs()), libm::log((to - self.end).abs()));
        let dir = if self.side == Side::Right { 1.0 } else { -1.0 };
        let n = libm::ceil((w1 - w0).abs()).max(1.0) as usize;
        let mut acc = 0.0;
        for k in 0..n {
            let a = w0 + (w1 - w0) * k as f64 / n as f64;
            let b = w0 + (w1 - w0) * (k + 1) as f64 / n as f64;
            acc += gauss20(
                |w| {
                    let r = libm::exp(w);
                    let x = self.end + dir * r;
                    coeffs.d().value_side(x, self.side) / self.z(coeffs, c, x) * r * dir
                },
                a,
                b,
            );
        }
        acc
    }
}

/// Admissible local branches at `e`, where `z` vanishes, for a trajectory
/// living on `side` of `e` with interior sign `z_sign`; largest slope magnitude first.
pub fn local_branches(coeffs: &CoefficientSet, c: f64, e: f64, side: Side, z_sign: f64) -> Result<Vec<LocalModel>> {
    let ld = coeffs.local_data(e, side);
    let b = ld.h - c;
    let p = ld.dg_slope;
    let u_dir = if side == Side::Right { 1.0 } else { -1.0 };
    let model = |branch| LocalModel::new(coeffs, c, e, side, branch);
    let tiny = 1e-12;
    let mut out = Vec::new();
    if p.abs() <= tiny && b.abs() <= tiny {
        let piece = &coeffs.dg().pieces_f64()[coeffs.dg().piece_index(e, side)];
        let d2 = piece.derivative().derivative();
        let q = 0.5 * d2.eval(e);
        if q.abs() > tiny {
            let v = -q * u_dir / 1.5;
            if v > 0.0 {
                out.push(model(Branch::ThreeHalves { k: z_sign * libm::sqrt(v) }));
            }
        } else {
            let r = d2.derivative().eval(e) / 6.0;
            let hp = coeffs.h().slope(e, side);
            // 2k² - h'(e)k + R = 0
            if let Some((k1, k2, _)) = quadratic_roots(0.5 * hp, 0.5 * r) {
                for k in [k1, k2] {
                    if k != 0.0 && k.signum() == z_sign && !out.iter().any(|m: &LocalModel| m.branch == Branch::Quadratic { k }) {
                        out.push(model(Branch::Quadratic { k }));
                    }
                }
                out.sort_by(|a, b| branch_size(b).total_cmp(&branch_size(a)));
            }
        }
        if out.is_empty() {
            return Err(Error::NoAdmissibleLocalSlope { end: e, c });
        }
        return Ok(out);
    }
    let Some((s1, s2, _)) = quadratic_roots(b, p) else {
        return Err(Error::NoAdmissibleLocalSlope { end: e, c });
    };
    let zero_root = p.abs() <= tiny;
    let roots = if zero_root { [b, b] } else { [s1, s2] };
    for s in roots {
        if s != 0.0 && (s * u_dir).signum() == z_sign && !out.iter().any(|m: &LocalModel| m.branch == Branch::Linear { s }) {
            out.push(model(Branch::Linear { s }));
        }
    }
    out.sort_by(|a, b| branch_size(b).total_cmp(&branch_size(a)));
    if zero_root && b.abs() > tiny {
        let piece = &coeffs.dg().pieces_f64()[coeffs.dg().piece_index(e, side)];
        if let Some(sg) = leading_sign(piece, e, u_dir) {
            if sg * b.signum() == z_sign {
                out.push(model(Branch::Balance));
            }
        }
    }
    if out.is_empty() {
        return Err(Error::NoAdmissibleLocalSlope { end: e, c });
    }
    Ok(out)
}

fn branch_size(m: &LocalModel) -> f64 {
    match m.branch {
        Branch::Linear { s } => s.abs(),
        Branch::Quadratic { k } | Branch::ThreeHalves { k } => k.abs(),
        _ => 0.0,
    }
}

/// Sign of `p` just to the `u_dir` side of `e`, from its first nonvanishing derivative.
fn leading_sign(p: &crate::poly::Poly, e: f64, u_dir: f64) -> Option<f64> {
    let scale = p.coeffs().iter().fold(0.0f64, |m, c| m.max(c.abs())).max(1e-300);
    let mut q = p.clone();
    let mut k = 0;
    while !q.is_zero() {
        let v = q.eval(e);
        if v.abs() > 1e-12 * scale {
            return Some(v.signum() * if k % 2 == 1 { u_dir } else { 1.0 });
        }
        q = q.derivative();
        k += 1;
    }
    None
}

#[derive(Clone, Copy, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ShootingOptions {
    /// Offset from the singular ends.
    pub epsilon_start: f64,
    pub rtol: f64,
    /// Final bisection width.
    pub tol_bisection: f64,
    pub h_min: f64,
    pub max_steps: usize,
}

impl Default for ShootingOptions {
    fn default() -> Self {
        Self { epsilon_start: 1e-6, rtol: 1e-10, tol_bisection: 1e-6, h_min: 1e-12, max_steps: 400_000 }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct TrajectoryNode {
    pub phi: f64,
    pub z: f64,
    /// `∫ D/z` from the anchored end (or from the first node when that diverges).
    pub xi: f64,
    pub dz: f64,
    pub dxi: f64,
}

#[derive(Clone, Copy, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case", tag = "kind"))]
pub enum Termination {
    ReachedTarget,
    SignViolation { phi: f64 },
    StepFailure { phi: f64 },
}

#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct FluxTrajectory {
    pub c: f64,
    pub problem: SingularProblem,
    pub epsilon: f64,
    pub start: LocalModel,
    pub start_slope: f64,
    /// Whether the anchored end is reached at finite `ξ`; node `xi` is then measured from it.
    pub start_finite: bool,
    pub nodes: Vec<TrajectoryNode>,
    pub termination: Termination,
    /// `z(target ∓ ε)` when the target was reached.
    pub z_at_target: Option<f64>,
}

impl FluxTrajectory {
    pub fn reached(&self) -> bool {
        self.termination == Termination::ReachedTarget
    }

    /// Cubic Hermite value of `z` at `phi` inside the node range.
    pub fn z_at(&self, phi: f64) -> Option<f64> {
        let n = &self.nodes;
        let i = n.windows(2).position(|w| (w[0].phi - phi) * (w[1].phi - phi) <= 0.0)?;
        let (a, b) = (&n[i], &n[i + 1]);
        Some(hermite(a.phi, b.phi, a.z, b.z, a.dz, b.dz, phi))
    }

    /// Largest relative defect of the equation at interval midpoints, over nodes with `|z| > 10 ε`.
    pub fn midpoint_residual(&self, coeffs: &CoefficientSet) -> f64 {
        let mut worst: f64 = 0.0;
        for w in self.nodes.windows(2) {
            let (a, b) = (&w[0], &w[1]);
            if a.z.abs() <= 10.0 * self.epsilon || b.z.abs() <= 10.0 * self.epsilon {
                continue;
            }
            let x = 0.5 * (a.phi + b.phi);
            let hh = b.phi - a.phi;
            let z = 0.5 * (a.z + b.z) + hh * (a.dz - b.dz) / 8.0;
            let dz = 1.5 * (b.z - a.z) / hh - 0.25 * (a.dz + b.dz);
            let dg = coeffs.d().value(x) * coeffs.g().value(x);
            let rhs = coeffs.h().value(x) - self.c - dg / z;
            let scale = 1.0 + coeffs.h().value(x).abs() + self.c.abs() + (dg / z).abs();
            worst = worst.max((dz - rhs).abs() / scale);
        }
        worst
    }
}

pub(crate) fn hermite(x0: f64, x1: f64, y0: f64, y1: f64, d0: f64, d1: f64, x: f64) -> f64 {
    let h = x1 - x0;
    let t = (x - x0) / h;
    let (t2, t3) = (t * t, t * t * t);
    (2.0 * t3 - 3.0 * t2 + 1.0) * y0 + (t3 - 2.0 * t2 + t) * h * d0 + (-2.0 * t3 + 3.0 * t2) * y1 + (t3 - t2) * h * d1
}

/// Integrates from `anchored_end ± ε` toward `target_end ∓ ε`, co-integrating `ξ' = D/z`.
pub fn integrate(problem: &SingularProblem, coeffs: &CoefficientSet, c: f64, opts: &ShootingOptions) -> Result<FluxTrajectory> {
    integrate_with(problem, coeffs, c, opts, opts.epsilon_start, None)
}

/// As [`integrate`] with an explicit start branch.
pub fn integrate_from(
    problem: &SingularProblem,
    coeffs: &CoefficientSet,
    c: f64,
    opts: &ShootingOptions,
    start: LocalModel,
) -> Result<FluxTrajectory> {
    integrate_with(problem, coeffs, c, opts, opts.epsilon_start, Some(start))
}

const STIFF_RTOL: f64 = 1e-6;

fn integrate_with(
    problem: &SingularProblem,
    coeffs: &CoefficientSet,
    c: f64,
    opts: &ShootingOptions,
    eps: f64,
    start: Option<LocalModel>,
) -> Result<FluxTrajectory> {
    let e = problem.anchored_end;
    let t = problem.target_end;
    let dir = (t - e).signum();
    let side = problem.side_at(e);
    let start = match start {
        Some(m) => m,
        None if problem.start_flux != 0.0 => LocalModel::new(coeffs, c, e, side, Branch::Flux { value: problem.start_flux }),
        None => local_branches(coeffs, c, e, side, problem.z_sign)?[0],
    };
    let phi0 = e + dir * eps;
    let phi_end = t - dir * eps;
    if (phi_end - phi0) * dir <= 0.0 {
        return Err(Error::PreconditionFailed("interval shorter than the start offsets".into()));
    }
    let z0 = start.z(coeffs, c, phi0);
    if z0 * problem.z_sign <= 0.0 || z0.is_nan() {
        return Err(Error::NoAdmissibleLocalSlope { end: e, c });
    }
    let start_finite = start.attains_finitely(coeffs);
    let xi0 = if start_finite { start.xi_integral(coeffs, c, phi0) } else { 0.0 };

    let (d, g, h) = (coeffs.d(), coeffs.g(), coeffs.h());
    let z_sign = problem.z_sign;
    let mut rhs = |x: f64, y: State| -> Option<State> {
        let z = y[0];
        if z * z_sign <= 0.0 || !z.is_finite() {
            return None;
        }
        let dv = d.value(x);
        Some([h.value(x) - c - dv * g.value(x) / z, dv / z])
    };

    // Attracting degenerate branches at the target make the equation stiff;
    // once the solution has settled onto one of them it is continued by the model.
    let target_side = problem.side_at(t);
    let target_models = local_branches(coeffs, c, t, target_side, problem.z_sign).unwrap_or_default();
    let mut x = phi0;
    let mut y = [z0, xi0];
    let mut dy = match rhs(x, y) {
        Some(v) => v,
        None => return Err(Error::NoAdmissibleLocalSlope { end: e, c }),
    };
    let node = |x: f64, y: State, dy: State| TrajectoryNode { phi: x, z: y[0], xi: y[1], dz: dy[0], dxi: dy[1] };
    let mut nodes = vec![node(x, y, dy)];
    let span = (t - e).abs();
    let h_max = span / 256.0;
    let fwd = if dir > 0.0 { Side::Right } else { Side::Left };
    let dgp = coeffs.dg();
    // Degenerate starts can put z far below any fixed absolute tolerance.
    let atol = [1e-14f64.min(opts.rtol * z0.abs()), 1e-12];
    let mut hs = eps.min(h_max);
    let mut sign_hit = false;
    let mut termination = Termination::ReachedTarget;
    let mut steps = 0usize;
    loop {
        let remaining = (phi_end - x) * dir;
        if remaining <= 1e-15 * (1.0 + x.abs()) {
            break;
        }
        steps += 1;
        if steps > opts.max_steps {
            termination = Termination::StepFailure { phi: x };
            break;
        }
        let stiffness = dy[0] - (h.value(x) - c);
        let jac = -stiffness / y[0];
        if jac * dir < 0.0 && (jac * (t - x).abs().min((x - e).abs())).abs() > 100.0 {
            if let Some(m) = target_models.iter().find(|m| {
                let mz = m.z(coeffs, c, x);
                mz * z_sign > 0.0 && (mz - y[0]).abs() <= 1e-5 * mz.abs()
            }) {
                follow_model(m, coeffs, c, x, y, phi_end, &mut nodes);
                y = [m.z(coeffs, c, phi_end), nodes.last().map_or(y[1], |n| n.xi)];
                break;
            }
        }
        let mut step = hs.min(h_max).min(remaining);
        // Past the explicit stability limit on an attracting branch, switch to
        // the linearly implicit pair. There ż is dominated by the noise in z
        // times the Jacobian, so it says nothing about an approaching zero.
        let implicit = jac * dir < 0.0 && (jac * step).abs() > 1.0;
        if dy[0] != 0.0 && !implicit {
            let collapse = 0.5 * (y[0] / dy[0]).abs();
            if collapse < opts.h_min && collapse < remaining {
                // z is being driven to zero faster than any admissible step.
                termination = Termination::SignViolation { phi: x };
                break;
            }
            step = step.min(collapse);
        }
        let trial = if implicit {
            let dv = d.value(x);
            let jm = [[jac, 0.0], [-dv / (y[0] * y[0]), 0.0]];
            let dfdx = [h.slope(x, fwd) - dgp.slope(x, fwd) / y[0], d.slope(x, fwd) / y[0]];
            rosenbrock_step(&mut rhs, x, y, dy, jm, dfdx, dir * step)
        } else {
            dopri_step(&mut rhs, x, y, dy, dir * step)
        };
        let order = if implicit { 3.0 } else { 5.0 };
        match trial {
            Some(st) if st.y[0] * z_sign > 0.0 => {
                // Errors committed on an attracting branch decay, so implicit
                // steps only need to keep the sign and rough size of z.
                let rtol = if implicit { opts.rtol.max(STIFF_RTOL) } else { opts.rtol };
                let norm = error_norm(&st.err, &y, &st.y, rtol, &atol);
                if norm <= 1.0 {
                    x = if step == remaining { phi_end } else { x + dir * step };
                    y = st.y;
                    dy = st.dy;
                    nodes.push(node(x, y, dy));
                    hs = step * step_factor_order(norm, order);
                    sign_hit = false;
                } else {
                    hs = step * step_factor_order(norm, order);
                }
            }
            _ => {
                sign_hit = true;
                hs = 0.25 * step;
            }
        }
        if hs < opts.h_min && hs < remaining {
            termination = classify_failure(x, y, dy, span, sign_hit, implicit);
            break;
        }
    }
    let z_at_target = (termination == Termination::ReachedTarget).then_some(y[0]);
    Ok(FluxTrajectory {
        c,
        problem: *problem,
        epsilon: eps,
        start,
        start_slope: start.slope(),
        start_finite,
        nodes,
        termination,
        z_at_target,
    })
}

/// Appends model nodes from `x` to `phi_end`, geometrically spaced toward the model's end.
fn follow_model(
    m: &LocalModel,
    coeffs: &CoefficientSet,
    c: f64,
    x: f64,
    y: State,
    phi_end: f64,
    nodes: &mut Vec<TrajectoryNode>,
) {
    let (r0, r1) = ((x - m.end).abs(), (phi_end - m.end).abs());
    let dir = (x - m.end).signum();
    // ratio 0.98 between neighbours keeps the Hermite inverse of ξ(φ) at 1e-7
    let k = (libm::ceil(libm::log(r0 / r1) / 0.02) as usize).clamp(32, 4000);
    let mut xi = y[1];
    let mut prev = x;
    for i in 1..=k {
        let r = r0 * libm::pow(r1 / r0, i as f64 / k as f64);
        let p = if i == k { phi_end } else { m.end + dir * r };
        xi += m.xi_between(coeffs, c, prev, p);
        let z = m.z(coeffs, c, p);
        let d = coeffs.d().value(p);
        nodes.push(TrajectoryNode { phi: p, z, xi, dz: m.dz(coeffs, c, p), dxi: d / z });
        prev = p;
    }
}

fn classify_failure(x: f64, y: State, dy: State, span: f64, sign_hit: bool, implicit: bool) -> Termination {
    // A collapse time far below the interval scale means z is falling onto zero.
    let collapsing = !implicit && (y[0] * dy[0]) < 0.0 && y[0].abs() < 1e-8 * span * dy[0].abs();
    if sign_hit || collapsing || y[0].abs() < 1e-8 {
        Termination::SignViolation { phi: x }
    } else {
        Termination::StepFailure { phi: x }
    }
}

/// `κ = |s_-(target, c)| + 1`, or `1 + √|p|` when the local slopes are complex.
pub fn acceptance_kappa(coeffs: &CoefficientSet, problem: &SingularProblem, c: f64) -> f64 {
    let t = problem.target_end;
    let ld = coeffs.local_data(t, problem.side_at(t));
    match quadratic_roots(ld.h - c, ld.dg_slope) {
        Some((s_minus, _, _)) => s_minus.abs() + 1.0,
        None => 1.0 + libm::sqrt(ld.dg_slope.abs()),
    }
}

/// Largest `|z|` at `target ∓ ε` still read as a vanishing flux: four times
/// the largest local branch there, capped by `κε`. Zero without a branch.
pub fn vanish_tolerance(coeffs: &CoefficientSet, problem: &SingularProblem, c: f64, eps: f64) -> f64 {
    let cap = acceptance_kappa(coeffs, problem, c) * eps;
    let t = problem.target_end;
    let x = t - (t - problem.anchored_end).signum() * eps;
    match local_branches(coeffs, c, t, problem.side_at(t), problem.z_sign) {
        Ok(ms) => {
            let m = ms.iter().map(|m| m.z(coeffs, c, x).abs()).fold(0.0, f64::max);
            (4.0 * m).min(cap)
        }
        Err(_) => 0.0,
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "SCREAMING_SNAKE_CASE"))]
pub enum Solvability {
    Solvable,
    Unsolvable,
    /// The decision changed between `ε` and `ε/2`.
    Indeterminate,
}

fn decide(problem: &SingularProblem, coeffs: &CoefficientSet, c: f64, opts: &ShootingOptions, eps: f64) -> Result<(bool, Option<FluxTrajectory>)> {
    if problem.acceptance == Acceptance::VanishAtTarget && problem.start_flux == 0.0 {
        // A flux can only vanish at the target along one of its local branches.
        let t = problem.target_end;
        if local_branches(coeffs, c, t, problem.side_at(t), problem.z_sign).is_err() {
            return Ok((false, None));
        }
    }
    let traj = match integrate_with(problem, coeffs, c, opts, eps, None) {
        Ok(t) => t,
        Err(Error::NoAdmissibleLocalSlope { .. }) => return Ok((false, None)),
        Err(e) => return Err(e),
    };
    if let Termination::StepFailure { phi } = traj.termination {
        return Err(Error::StepFailure { phi });
    }
    let ok = match (problem.acceptance, traj.z_at_target) {
        (_, None) => false,
        (Acceptance::ReachTarget, Some(_)) => true,
        (Acceptance::VanishAtTarget, Some(z)) => z.abs() <= vanish_tolerance(coeffs, problem, c, eps),
    };
    Ok((ok, Some(traj)))
}

/// Solvability at `c`, checked at `ε` and `ε/2`. The trajectory is the one at `ε`.
pub fn is_solvable(
    problem: &SingularProblem,
    coeffs: &CoefficientSet,
    c: f64,
    opts: &ShootingOptions,
) -> Result<(Solvability, Option<FluxTrajectory>)> {
    let (a, traj) = decide(problem, coeffs, c, opts, opts.epsilon_start)?;
    let (b, _) = decide(problem, coeffs, c, opts, 0.5 * opts.epsilon_start)?;
    let s = match (a, b) {
        (true, true) => Solvability::Solvable,
        (false, false) => Solvability::Unsolvable,
        _ => Solvability::Indeterminate,
    };
    Ok((s, traj))
}

/// Indeterminate answers are retried with smaller offsets; the last decision stands.
fn settled(problem: &SingularProblem, coeffs: &CoefficientSet, c: f64, opts: &ShootingOptions) -> Result<(bool, Option<FluxTrajectory>)> {
    let mut o = *opts;
    for _ in 0..3 {
        let (s, traj) = is_solvable(problem, coeffs, c, &o)?;
        match s {
            Solvability::Solvable => return Ok((true, traj)),
            Solvability::Unsolvable => return Ok((false, traj)),
            Solvability::Indeterminate => o.epsilon_start *= 0.25,
        }
    }
    decide(problem, coeffs, c, &o, o.epsilon_start)
}

#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct CriticalSpeedResult {
    /// Solvable end of the final bisection interval.
    pub c_star: f64,
    pub bracket_used: SpeedBracket,
    /// The bisection interval actually searched, after slack and widening.
    pub search_interval: (f64, f64),
    pub bisection_width: f64,
    pub solvable_probe: Option<FluxTrajectory>,
    pub unsolvable_probe: Option<FluxTrajectory>,
}

/// Bisection over `[lower - slack, upper + slack]`, `slack = max(1, span)`,
/// widened by up to 4 spans when the ends do not straddle the threshold.
pub fn critical_speed(
    problem: &SingularProblem,
    coeffs: &CoefficientSet,
    bracket: &SpeedBracket,
    opts: &ShootingOptions,
) -> Result<CriticalSpeedResult> {
    let upper = bracket.best_upper().max(bracket.lower);
    let span = upper - bracket.lower;
    let slack = span.max(1.0);
    bisect(problem, coeffs, bracket, opts, bracket.lower - slack, upper + slack, |k| {
        (k <= 4).then_some(slack)
    })
}

/// Threshold of the connection between the zeros `left < right` of `D`.
pub fn interior_connection_speed(
    coeffs: &CoefficientSet,
    left: f64,
    right: f64,
    bracket_hint: Option<SpeedBracket>,
    opts: &ShootingOptions,
) -> Result<CriticalSpeedResult> {
    let problem = SingularProblem::interior(coeffs, left, right)?;
    let hint = match bracket_hint {
        Some(b) => b,
        None => bracket_interior(coeffs, problem.anchored_end, problem.target_end)?,
    };
    let span = (hint.upper - hint.lower).max(0.0);
    let slack = span.max(1.0);
    bisect(&problem, coeffs, &hint, opts, hint.lower - slack, hint.upper + slack, |k| {
        (k <= 8).then(|| slack * libm::pow(2.0, k as f64))
    })
}

fn bisect(
    problem: &SingularProblem,
    coeffs: &CoefficientSet,
    bracket: &SpeedBracket,
    opts: &ShootingOptions,
    mut lo: f64,
    mut hi: f64,
    widen: impl Fn(usize) -> Option<f64>,
) -> Result<CriticalSpeedResult> {
    let mut k = 1;
    let (mut ok_hi, mut probe_hi) = settled(problem, coeffs, hi, opts)?;
    while !ok_hi {
        let Some(w) = widen(k) else {
            return Err(Error::BracketInconsistent { lo, hi });
        };
        hi += w;
        k += 1;
        (ok_hi, probe_hi) = settled(problem, coeffs, hi, opts)?;
    }
    let mut k = 1;
    let (mut ok_lo, mut probe_lo) = settled(problem, coeffs, lo, opts)?;
    while ok_lo {
        let Some(w) = widen(k) else {
            return Err(Error::BracketInconsistent { lo, hi });
        };
        lo -= w;
        k += 1;
        (ok_lo, probe_lo) = settled(problem, coeffs, lo, opts)?;
    }
    let search_interval = (lo, hi);
    while hi - lo > opts.tol_bisection {
        let mid = 0.5 * (lo + hi);
        let (ok, traj) = settled(problem, coeffs, mid, opts)?;
        if ok {
            hi = mid;
            probe_hi = traj;
        } else {
            lo = mid;
            probe_lo = traj;
        }
    }
    // The smallest speed verified solvable, so fronts can be built at `c_star`.
    let c_star = hi;
    let on_lower = (c_star - bracket.lower).abs() <= opts.tol_bisection;
    Ok(CriticalSpeedResult {
        c_star,
        bracket_used: *bracket,
        search_interval,
        bisection_width: hi - lo,
        solvable_probe: probe_hi,
        unsolvable_probe: if on_lower { None } else { probe_lo },
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bounds::{bracket_c_pl, bracket_c_pr};
    use crate::coeffs::PiecewisePolynomial;
    use crate::poly::RatPoly;
    use crate::presets;

    fn opts() -> ShootingOptions {
        ShootingOptions::default()
    }

    #[test]
    fn explicit_flux_on_the_left_interval() {
        let c = presets::ex52();
        let p = SingularProblem::z_intro_left(&c, 0.5).unwrap();
        let t = integrate(&p, &c, 0.0, &opts()).unwrap();
        assert!(t.reached());
        let mut worst: f64 = 0.0;
        for k in 0..=480 {
            let x = 0.01 + 0.48 * k as f64 / 480.0;
            let exact = x * x * (x - 0.5);
            worst = worst.max((t.z_at(x).unwrap() - exact).abs());
        }
        for n in t.nodes.iter().step_by(20) {
            std::println!("{} {} {}", n.phi, n.z, n.phi * n.phi * (n.phi - 0.5));
        }
        assert!(worst < 1e-6, "{worst}");
        assert!(t.midpoint_residual(&c) < 1e-6);
    }

    #[test]
    fn explicit_flux_on_the_right_interval() {
        // ex53b at c = 0 on (1/2, 1): z = (φ - 1/2)²(φ - 1).
        let c = presets::ex53b();
        let p = SingularProblem::flux_limit_left(&c, 0.5).unwrap();
        let t = integrate(&p, &c, 0.0, &opts()).unwrap();
        assert!(t.reached());
        let mut worst: f64 = 0.0;
        for k in 0..=480 {
            let x = 0.51 + 0.48 * k as f64 / 480.0;
            let exact = (x - 0.5) * (x - 0.5) * (x - 1.0);
            worst = worst.max((t.z_at(x).unwrap() - exact).abs());
        }
        assert!(worst < 1e-6, "{worst}");
    }

    #[test]
    fn agrees_with_fixed_step_rk4() {
        let cs = presets::ex53a();
        let p = SingularProblem::flux_limit_left(&cs, 0.5).unwrap();
        let t = integrate(&p, &cs, 2.0, &opts()).unwrap();
        let rk = rk4_reference(&cs, 2.0, 1.0 - 1e-6, t.nodes[0].z, 0.6, 200_000);
        assert!((t.z_at(0.6).unwrap() - rk).abs() < 1e-8);
    }

    fn rk4_reference(cs: &CoefficientSet, c: f64, x0: f64, z0: f64, x1: f64, n: usize) -> f64 {
        let f = |x: f64, z: f64| cs.h().value(x) - c - cs.d().value(x) * cs.g().value(x) / z;
        let hh = (x1 - x0) / n as f64;
        let (mut x, mut z) = (x0, z0);
        for _ in 0..n {
            let k1 = f(x, z);
            let k2 = f(x + 0.5 * hh, z + 0.5 * hh * k1);
            let k3 = f(x + 0.5 * hh, z + 0.5 * hh * k2);
            let k4 = f(x + hh, z + hh * k3);
            z += hh / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
            x += hh;
        }
        z
    }

    #[test]
    fn degenerate_end_offers_linear_and_balance_branches() {
        let f = PiecewisePolynomial::single(RatPoly::from_ratios(&[(0, 1)]));
        let g = PiecewisePolynomial::single(RatPoly::from_ratios(&[(0, 1), (1, 1), (-1, 1)]));
        let d = PiecewisePolynomial::single(RatPoly::from_ratios(&[(0, 1), (1, 1)]));
        let cs = CoefficientSet::new(f, g, d).unwrap();
        let m = local_branches(&cs, 1.0, 0.0, Side::Right, -1.0).unwrap();
        assert_eq!(m[0].branch, Branch::Linear { s: -1.0 });
        assert_eq!(m[1].branch, Branch::Balance);
    }

    #[test]
    fn solvability_around_zero_threshold() {
        let c = presets::ex52();
        let p = SingularProblem::z_intro_left(&c, 0.5).unwrap();
        assert_eq!(is_solvable(&p, &c, 0.0, &opts()).unwrap().0, Solvability::Solvable);
        assert_eq!(is_solvable(&p, &c, -0.1, &opts()).unwrap().0, Solvability::Unsolvable);
    }

    #[test]
    fn thresholds_of_the_examples() {
        let c = presets::ex52();
        let p = SingularProblem::z_intro_left(&c, 0.5).unwrap();
        let r = critical_speed(&p, &c, &bracket_c_pr(&c, 0.5).unwrap(), &opts()).unwrap();
        assert!(r.c_star.abs() < 1e-3, "{}", r.c_star);

        let c = presets::ex53a();
        let p = SingularProblem::flux_limit_left(&c, 0.5).unwrap();
        let r = critical_speed(&p, &c, &bracket_c_pl(&c, 0.5).unwrap(), &opts()).unwrap();
        assert!((r.c_star - 1.0).abs() < 1e-3, "{}", r.c_star);

        let c = presets::ex53b();
        let p = SingularProblem::flux_limit_left(&c, 0.5).unwrap();
        let r = critical_speed(&p, &c, &bracket_c_pl(&c, 0.5).unwrap(), &opts()).unwrap();
        assert!(r.c_star.abs() < 1e-3, "{}", r.c_star);
    }

    #[test]
    fn stiff_balance_start_reaches_the_target() {
        // Dg vanishes cubically at 1 while h(1) = 0, so for c > 0 the start is
        // the balance branch z ~ -(1-φ)³/(2c), stiff like c²/(1-φ)³.
        let c = presets::ex52_negated();
        let p = SingularProblem::flux_limit_left(&c, 0.5).unwrap();
        for speed in [0.1, 1.0, 5.0] {
            let t = integrate(&p, &c, speed, &opts()).unwrap();
            assert_eq!(t.start.branch, Branch::Balance);
            assert!(t.reached(), "{speed}: {:?}", t.termination);
        }
        let b = bracket_c_pl(&c, 0.5).unwrap();
        let r = critical_speed(&p, &c, &b, &opts()).unwrap();
        let edge = core::f64::consts::FRAC_1_SQRT_2 - 0.25;
        assert!(r.c_star >= edge - 1e-9 && r.c_star - edge < 2e-6, "{}", r.c_star);
    }

    #[test]
    fn no_target_branch_means_no_vanishing() {
        // For c < 0 both local slopes at 1/2 have the wrong sign.
        let c = presets::ex53b();
        let p = SingularProblem::flux_limit_left(&c, 0.5).unwrap();
        assert_eq!(vanish_tolerance(&c, &p, -1e-4, 1e-6), 0.0);
        assert_eq!(is_solvable(&p, &c, -1e-4, &opts()).unwrap().0, Solvability::Unsolvable);
        assert_eq!(is_solvable(&p, &c, 1e-4, &opts()).unwrap().0, Solvability::Solvable);
    }

    #[test]
    fn start_slope_matches_slope_pair() {
        let c = presets::ex53a();
        let p = SingularProblem::flux_limit_left(&c, 0.5).unwrap();
        let t = integrate(&p, &c, 0.3, &opts()).unwrap();
        let sp = crate::bounds::slope_pair(&c, 1.0, 0.3, Side::Left).unwrap();
        assert_eq!(t.start_slope, sp.s_plus);
    }
}
