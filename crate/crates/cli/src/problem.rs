//! Problem files: coefficient triples as exact rational strings plus run options.

use std::path::{Path, PathBuf};
use std::str::FromStr;

use num_bigint::BigInt;
use serde::{Deserialize, Serialize};
use wavefront_core::coeffs::{CoefficientSet, PiecewisePolynomial};
use wavefront_core::orchestrator::Normalization;
use wavefront_core::poly::{RatPoly, Rational};
use wavefront_core::presets;

use crate::CliError;

/// One coefficient on `[0, 1]`: breakpoints and per-piece coefficients in
/// ascending powers of `φ`. Without breakpoints there is a single piece.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PiecewiseSpec {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub breakpoints: Option<Vec<String>>,
    pub pieces: Vec<Vec<String>>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunOptions {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub speed: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tol_bisection: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tol_ode: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub epsilon_start: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub normalization: Option<Normalization>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub out: Option<PathBuf>,
}

impl RunOptions {
    fn is_empty(&self) -> bool {
        *self == RunOptions::default()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemFile {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    pub f: PiecewiseSpec,
    pub g: PiecewiseSpec,
    #[serde(rename = "D", alias = "d")]
    pub d: PiecewiseSpec,
    #[serde(default, skip_serializing_if = "RunOptions::is_empty")]
    pub options: RunOptions,
}

/// Parses `p`, `p/q` or a decimal such as `-0.125` or `3e-2` exactly.
pub fn parse_rational(s: &str) -> Result<Rational, String> {
    let t = s.trim();
    if t.contains('/') {
        return Rational::from_str(t).map_err(|_| format!("not a rational number: {s:?}"));
    }
    let (mantissa, exp) = match t.find(['e', 'E']) {
        Some(i) => (&t[..i], t[i + 1..].parse::<i32>().map_err(|_| format!("bad exponent in {s:?}"))?),
        None => (t, 0),
    };
    let (neg, digits) = match mantissa.strip_prefix('-') {
        Some(rest) => (true, rest),
        None => (false, mantissa.strip_prefix('+').unwrap_or(mantissa)),
    };
    let (int, frac) = digits.split_once('.').unwrap_or((digits, ""));
    if int.is_empty() && frac.is_empty() || !(int.chars().chain(frac.chars()).all(|c| c.is_ascii_digit())) {
        return Err(format!("not a number: {s:?}"));
    }
    let mut n = BigInt::from_str(&format!("{int}{frac}")).map_err(|_| format!("not a number: {s:?}"))?;
    if neg {
        n = -n;
    }
    let scale = exp - frac.len() as i32;
    let ten = BigInt::from(10);
    Ok(if scale >= 0 {
        Rational::from_integer(n * ten.pow(scale as u32))
    } else {
        Rational::new(n, ten.pow((-scale) as u32))
    })
}

impl PiecewiseSpec {
    pub fn to_piecewise(&self, what: &str) -> Result<PiecewisePolynomial, CliError> {
        let err = |m: String| CliError::Parse(format!("{what}: {m}"));
        let pieces = self
            .pieces
            .iter()
            .map(|p| p.iter().map(|c| parse_rational(c)).collect::<Result<Vec<_>, _>>().map(RatPoly::new))
            .collect::<Result<Vec<_>, _>>()
            .map_err(err)?;
        let breakpoints = match &self.breakpoints {
            Some(b) => b.iter().map(|x| parse_rational(x)).collect::<Result<Vec<_>, _>>().map_err(err)?,
            None => vec![Rational::from_integer(0.into()), Rational::from_integer(1.into())],
        };
        PiecewisePolynomial::new(breakpoints, pieces).map_err(|e| CliError::Parse(format!("{what}: {e}")))
    }

    pub fn from_piecewise(p: &PiecewisePolynomial) -> Self {
        let bp = p.breakpoints();
        let single = bp.len() == 2 && bp[0] == Rational::from_integer(0.into()) && bp[1] == Rational::from_integer(1.into());
        PiecewiseSpec {
            breakpoints: (!single).then(|| bp.iter().map(|r| r.to_string()).collect()),
            pieces: p.pieces().iter().map(|q| q.coeffs().iter().map(|r| r.to_string()).collect()).collect(),
        }
    }
}

impl ProblemFile {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::Io { path: path.to_path_buf(), source: e })?;
        serde_json::from_str(&text).map_err(|e| CliError::Parse(format!("{}: {e}", path.display())))
    }

    pub fn coefficients(&self) -> Result<CoefficientSet, CliError> {
        let f = self.f.to_piecewise("f")?;
        let g = self.g.to_piecewise("g")?;
        let d = self.d.to_piecewise("d")?;
        Ok(CoefficientSet::new(f, g, d)?)
    }

    pub fn from_coefficients(name: Option<String>, c: &CoefficientSet, options: RunOptions) -> Self {
        ProblemFile {
            name,
            f: PiecewiseSpec::from_piecewise(c.f()),
            g: PiecewiseSpec::from_piecewise(c.g()),
            d: PiecewiseSpec::from_piecewise(c.d()),
            options,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, clap::ValueEnum)]
pub enum Preset {
    Ex51,
    Ex52,
    Ex52n,
    Ex53a,
    Ex53b,
}

impl Preset {
    pub fn problem(self) -> ProblemFile {
        let pin = RunOptions {
            normalization: Some(Normalization::PinValue { phi: 0.25, xi: 0.0 }),
            speed: Some(0.0),
            ..RunOptions::default()
        };
        let (name, c, options) = match self {
            Preset::Ex51 => ("ex51", presets::ex51(), pin),
            Preset::Ex52 => ("ex52", presets::ex52(), pin),
            Preset::Ex52n => ("ex52n", presets::ex52_negated(), RunOptions::default()),
            Preset::Ex53a => ("ex53a", presets::ex53a(), RunOptions::default()),
            Preset::Ex53b => ("ex53b", presets::ex53b(), RunOptions::default()),
        };
        ProblemFile::from_coefficients(Some(name.into()), &c, options)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn decimals_and_fractions_are_exact() {
        assert_eq!(parse_rational("3/4").unwrap(), Rational::new(3.into(), 4.into()));
        assert_eq!(parse_rational("-0.125").unwrap(), Rational::new((-1).into(), 8.into()));
        assert_eq!(parse_rational("25e-2").unwrap(), Rational::new(1.into(), 4.into()));
        assert_eq!(parse_rational("2E1").unwrap(), Rational::from_integer(20.into()));
        assert_eq!(parse_rational(".5").unwrap(), Rational::new(1.into(), 2.into()));
        for bad in ["", "-", "1/0x", "abc", "1.2.3", "0.1e"] {
            assert!(parse_rational(bad).is_err(), "{bad}");
        }
    }

    #[test]
    fn presets_round_trip() {
        for p in [Preset::Ex51, Preset::Ex52, Preset::Ex52n, Preset::Ex53a, Preset::Ex53b] {
            let file = p.problem();
            let text = serde_json::to_string_pretty(&file).unwrap();
            let back: ProblemFile = serde_json::from_str(&text).unwrap();
            assert_eq!(back, file);
            let c = back.coefficients().unwrap();
            let again = ProblemFile::from_coefficients(file.name.clone(), &c, file.options.clone());
            assert_eq!(again, file);
        }
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let text = r#"{"f":{"pieces":[["0"]]},"g":{"pieces":[["0","1","-1"]]},"D":{"pieces":[["-1/2","1"]]},"extra":1}"#;
        assert!(serde_json::from_str::<ProblemFile>(text).is_err());
        let text = r#"{"f":{"pieces":[["0"]],"knots":[]},"g":{"pieces":[["0","1","-1"]]},"d":{"pieces":[["-1/2","1"]]}}"#;
        assert!(serde_json::from_str::<ProblemFile>(text).is_err());
    }
}
