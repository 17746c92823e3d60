//! JSON metric files:
//! `{"kind": "components" | "potential", "exprs": [...], "domain": [[lo, hi] x 4], "name": "..."}`.
//! Unbounded domain ends are written as `null`; a missing domain means all of R^4.

use std::path::Path;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use weylscope_core::catalog::catalog_get;
use weylscope_core::geometry::{ChartDomain, MetricSource};
use weylscope_core::MetricField;

use crate::error::{Failure, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MetricKind {
    Components,
    Potential,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MetricFile {
    pub kind: MetricKind,
    pub exprs: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub domain: Option<[[Option<f64>; 2]; 4]>,
    pub name: String,
}

impl MetricFile {
    pub fn parse(text: &str) -> Result<MetricFile> {
        serde_json::from_str(text).map_err(|e| Failure::Input(format!("metric file: {e}")))
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("metric files serialize")
    }

    pub fn chart_domain(&self) -> Result<ChartDomain> {
        let Some(d) = self.domain else {
            return Ok(ChartDomain::whole());
        };
        Ok(ChartDomain::new(d.map(|[lo, hi]| {
            [lo.unwrap_or(f64::NEG_INFINITY), hi.unwrap_or(f64::INFINITY)]
        }))?)
    }

    pub fn build(&self) -> Result<MetricField> {
        let domain = self.chart_domain()?;
        let exprs: Vec<&str> = self.exprs.iter().map(String::as_str).collect();
        let context =
            |e: weylscope_core::Error| Failure::Input(format!("metric `{}`: {e}", self.name));
        match self.kind {
            MetricKind::Components => {
                MetricField::from_components(&self.name, &exprs, domain).map_err(context)
            }
            MetricKind::Potential => match exprs.as_slice() {
                [phi] => {
                    MetricField::from_kahler_potential(&self.name, phi, domain).map_err(context)
                }
                _ => Err(Failure::Input(format!(
                    "metric `{}`: a potential takes exactly one expression, got {}",
                    self.name,
                    exprs.len()
                ))),
            },
        }
    }

    /// File form of a metric given by components or a potential.
    pub fn from_metric(m: &MetricField) -> Result<MetricFile> {
        let kind = match m.source() {
            MetricSource::Components(_) => MetricKind::Components,
            MetricSource::KahlerPotential(_) => MetricKind::Potential,
            MetricSource::Conformal { .. } => {
                return Err(Failure::Input(format!(
                    "`{}` is a conformal rescaling and has no file form",
                    m.name()
                )))
            }
        };
        let finite = |x: f64| x.is_finite().then_some(x);
        let domain = m.domain().bounds.map(|[lo, hi]| [finite(lo), finite(hi)]);
        Ok(MetricFile {
            kind,
            exprs: m.source_text().to_vec(),
            domain: (!domain.iter().flatten().all(Option::is_none)).then_some(domain),
            name: m.name().to_string(),
        })
    }
}

/// A metric together with its catalog coverage note, if it came from the catalog.
pub struct ResolvedMetric {
    pub metric: Arc<MetricField>,
    pub coverage: Option<&'static str>,
    pub origin: String,
}

/// Resolves `spec` as a metric file when it names an existing file or ends
/// in `.json`, and as a catalog name otherwise.
pub fn resolve_metric(spec: &str) -> Result<ResolvedMetric> {
    let path = Path::new(spec);
    if path.is_file() || spec.ends_with(".json") {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Failure::Input(format!("cannot read `{spec}`: {e}")))?;
        let file = MetricFile::parse(&text).map_err(|e| Failure::Input(format!("{spec}: {e}")))?;
        return Ok(ResolvedMetric {
            metric: Arc::new(file.build()?),
            coverage: None,
            origin: format!("file:{spec}"),
        });
    }
    let entry = catalog_get(spec).map_err(|e| Failure::Input(e.to_string()))?;
    Ok(ResolvedMetric {
        origin: format!("catalog:{}", entry.name),
        metric: entry.metric,
        coverage: Some(entry.coverage),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn expressions_round_trip_bit_exactly() {
        let src = r#"{
  "kind": "components",
  "exprs": ["1 + 0.1000000000000000055511151231257827*x0^2", "0", "0", "0", "1", "0", "0", "exp( -x1 )", "0", "(1+x2^2)^(3/2)"],
  "domain": [[-1.0, 1.0], [null, null], [-2.5, 2.5], [0.0, null]],
  "name": "odd spacing"
}"#;
        let file = MetricFile::parse(src).unwrap();
        let m = file.build().unwrap();
        let back = MetricFile::from_metric(&m).unwrap();
        assert_eq!(back, file);
        assert_eq!(MetricFile::parse(&back.to_json()).unwrap(), file);
        assert_eq!(m.domain().bounds[3], [0.0, f64::INFINITY]);
    }

    #[test]
    fn malformed_files_are_input_errors() {
        let bad_expr = r#"{"kind": "potential", "exprs": ["log(1 + x0^^2)"], "name": "x"}"#;
        let e = MetricFile::parse(bad_expr).unwrap().build().unwrap_err();
        assert_eq!(e.exit_code(), 2);
        assert!(e.to_string().contains("syntax error at byte"), "{e}");
        let wrong_count = r#"{"kind": "components", "exprs": ["1"], "name": "x"}"#;
        assert_eq!(
            MetricFile::parse(wrong_count)
                .unwrap()
                .build()
                .unwrap_err()
                .exit_code(),
            2
        );
        assert!(MetricFile::parse(r#"{"kind": "tensor", "exprs": [], "name": "x"}"#).is_err());
        assert!(resolve_metric("nosuch").is_err());
        assert!(resolve_metric("/nonexistent/bad.json").is_err());
    }

    #[test]
    fn catalog_potentials_have_a_file_form() {
        let r = resolve_metric("fubini_study").unwrap();
        let file = MetricFile::from_metric(&r.metric).unwrap();
        assert_eq!(file.kind, MetricKind::Potential);
        assert_eq!(file.domain, None);
        assert_eq!(file.build().unwrap().source_text(), r.metric.source_text());
    }
}
