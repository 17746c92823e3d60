//! Report envelope and number formatting shared by every command.

use std::io::Write;
use std::path::Path;
use std::str::FromStr;

use serde::{Serialize, Serializer};
use weylscope_core::weyl::Orientation;
use weylscope_core::MetricField;

use crate::error::Result;
use crate::metric_file::ResolvedMetric;

/// Report format version.
pub const SCHEMA: &str = "weylscope.report/1";

/// A float written with 17 significant digits; non-finite values become `null`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Num(pub f64);

pub fn fmt_float(x: f64) -> String {
    format!("{x:.16e}")
}

impl Serialize for Num {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        if self.0.is_finite() {
            serde_json::Number::from_str(&fmt_float(self.0))
                .expect("scientific notation is a JSON number")
                .serialize(s)
        } else {
            s.serialize_none()
        }
    }
}

pub fn nums<const N: usize>(xs: [f64; N]) -> [Num; N] {
    xs.map(Num)
}

#[derive(Debug, Clone, Serialize)]
pub struct Tool {
    pub name: &'static str,
    pub version: &'static str,
}

pub const TOOL: Tool = Tool {
    name: "weylscope",
    version: env!("CARGO_PKG_VERSION"),
};

/// Sign and normalization conventions every number in a report refers to.
#[derive(Debug, Clone, Serialize)]
pub struct Conventions {
    pub orientation: &'static str,
    pub riemann: &'static str,
    pub lambda_plus_basis: &'static str,
    pub form_norm: &'static str,
    pub wplus_norm: &'static str,
    pub complex_structure: &'static str,
    pub conformal_factor: &'static str,
    pub spectral_gap: &'static str,
}

pub fn conventions(orientation: Orientation) -> Conventions {
    Conventions {
        orientation: orientation.as_str(),
        riemann: "R_abcd = g_ae R^e_bcd with sectional curvature K(e_a, e_b) = R_abab for orthonormal e; the round unit S^4 has s = 12",
        lambda_plus_basis: "(e01 + e23)/sqrt2, (e02 + e31)/sqrt2, (e03 + e12)/sqrt2 in a Gram-Schmidt frame of d0..d3; reversed orientation flips the sign of the second summands",
        form_norm: "|w|^2 = (1/2) w_ab w^ab, so the top eigenform has |w|^2 = 2",
        wplus_norm: "|W+|^2 = alpha^2 + beta^2 + gamma^2 on Lambda+; the tensor contraction W_abcd W^abcd is 4 times this",
        complex_structure: "z1 = x0 + i x1, z2 = x2 + i x3; potentials give g = 2 Re(d^2 phi / dz_j dzbar_k)",
        conformal_factor: "g = f^-2 h with f = alpha_h^(-1/3)",
        spectral_gap: "(alpha - beta)/|W+| compared with gap_tol",
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct MetricDescriptor {
    pub name: String,
    pub origin: String,
    pub provenance: &'static str,
    pub source: Vec<String>,
    /// Coordinate bounds; unbounded ends are `null`.
    pub domain: [[Num; 2]; 4],
    #[serde(skip_serializing_if = "Option::is_none")]
    pub coverage: Option<&'static str>,
}

impl MetricDescriptor {
    pub fn new(r: &ResolvedMetric) -> MetricDescriptor {
        MetricDescriptor::of(&r.metric, r.origin.clone(), r.coverage)
    }

    pub fn of(m: &MetricField, origin: String, coverage: Option<&'static str>) -> MetricDescriptor {
        MetricDescriptor {
            name: m.name().to_string(),
            origin,
            provenance: m.provenance().as_str(),
            source: m.source_text().to_vec(),
            domain: m.domain().bounds.map(nums),
            coverage,
        }
    }
}

/// Writes `text` to `out`, or to stdout when `out` is `None`.
pub fn emit(text: &str, out: Option<&Path>) -> Result<()> {
    match out {
        Some(path) => std::fs::write(path, text)?,
        None => {
            let mut stdout = std::io::stdout().lock();
            stdout.write_all(text.as_bytes())?;
            stdout.flush()?;
        }
    }
    Ok(())
}

pub fn to_json<T: Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("reports serialize");
    s.push('\n');
    s
}
