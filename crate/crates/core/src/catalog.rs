//! Built-in metrics with closed-form components and known curvature.
//!
//! | name | chart | coverage |
//! |------|-------|----------|
//! | `flat` | ℝ⁴ | all of ℝ⁴ |
//! | `round_s4` | stereographic | S⁴ minus a point |
//! | `s2xs2`, `s2xs2_unequal:a:b` | product of stereographic charts | S²×S² minus two spheres |
//! | `fubini_study` | affine chart of CP² | CP² minus a line |
//! | `fs_perturbed:eps:seed` | box `[−1,1]⁴` of the affine chart | local only |

use alloc::format;
use alloc::string::{String, ToString};
use alloc::sync::Arc;
use alloc::vec::Vec;

#[allow(unused_imports)] // inherent methods shadow it when std is linked
use num_traits::Float;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::forms::TwoFormField;
use crate::geometry::{ChartDomain, MetricField, PointCurvature};
use crate::weyl::DeterminantSign;

/// Documented curvature of a catalog metric.
#[derive(Debug, Clone, PartialEq)]
pub struct GroundTruth {
    /// Constant scalar curvature, if constant.
    pub s: Option<f64>,
    /// Constant W⁺ eigenvalues (descending), if constant.
    pub wplus: Option<[f64; 3]>,
    /// Einstein constant λ with `Ric = λg`, if Einstein.
    pub einstein: Option<f64>,
    pub kahler: bool,
    pub det_sign: DeterminantSign,
}

#[derive(Debug, Clone)]
pub struct CatalogEntry {
    /// Canonical name including parameters, e.g. `fs_perturbed:0.05:7`.
    pub name: String,
    pub metric: Arc<MetricField>,
    pub coverage: &'static str,
    pub truth: GroundTruth,
}

/// Largest allowed perturbation size for `fs_perturbed`.
pub const MAX_PERTURBATION: f64 = 0.05;

const FS_POTENTIAL: &str = "log(1 + x0^2 + x1^2 + x2^2 + x3^2)";
const ROUND_S4: &str = "4/(1 + x0^2 + x1^2 + x2^2 + x3^2)^2";

/// Catalog names in listing order.
pub const NAMES: [&str; 6] = [
    "flat",
    "fs_perturbed",
    "fubini_study",
    "round_s4",
    "s2xs2",
    "s2xs2_unequal",
];

fn kahler_truth(s: f64, einstein: Option<f64>) -> GroundTruth {
    GroundTruth {
        s: Some(s),
        wplus: Some([s / 6.0, -s / 12.0, -s / 12.0]),
        einstein,
        kahler: true,
        det_sign: DeterminantSign::Positive,
    }
}

fn product_potential(a: f64, b: f64) -> String {
    format!(
        "{} * log(1 + x0^2 + x1^2) + {} * log(1 + x2^2 + x3^2)",
        fmt_num(2.0 * a * a),
        fmt_num(2.0 * b * b)
    )
}

/// Shortest decimal that parses back to `x` (expressions accept no signs
/// inside literals, so callers only pass non-negative values).
fn fmt_num(x: f64) -> String {
    let s = format!("{x:?}");
    if s.contains('e') {
        format!("{x:.17e}")
    } else {
        s
    }
}

fn parse_params(spec: &str) -> Result<(&str, Vec<&str>)> {
    let spec = spec.trim();
    if let Some(open) = spec.find('(') {
        let close = spec
            .strip_suffix(')')
            .ok_or_else(|| Error::InvalidInput(format!("unbalanced parameters in `{spec}`")))?;
        let args = &close[open + 1..];
        let params = if args.trim().is_empty() {
            Vec::new()
        } else {
            args.split(',').map(str::trim).collect()
        };
        return Ok((spec[..open].trim(), params));
    }
    let mut parts = spec.split(':');
    let name = parts.next().unwrap_or("");
    Ok((name, parts.map(str::trim).collect()))
}

fn number(name: &str, text: &str) -> Result<f64> {
    text.parse::<f64>()
        .ok()
        .filter(|v| v.is_finite())
        .ok_or_else(|| Error::InvalidInput(format!("{name}: `{text}` is not a number")))
}

/// Looks up a catalog entry by name, with optional parameters written as
/// `name:p1:p2` or `name(p1, p2)`.
pub fn catalog_get(spec: &str) -> Result<CatalogEntry> {
    let (name, params) = parse_params(spec)?;
    let arity = |n: usize| -> Result<()> {
        if params.len() > n {
            Err(Error::InvalidInput(format!(
                "`{name}` takes at most {n} parameters"
            )))
        } else {
            Ok(())
        }
    };
    match name {
        "flat" => {
            arity(0)?;
            let m = MetricField::from_components(
                "flat",
                &["1", "0", "0", "0", "1", "0", "0", "1", "0", "1"],
                ChartDomain::whole(),
            )?
            .with_kahler_form(TwoFormField::standard_kahler());
            Ok(CatalogEntry {
                name: "flat".into(),
                metric: Arc::new(m),
                coverage: "all of R^4",
                truth: GroundTruth {
                    s: Some(0.0),
                    wplus: Some([0.0; 3]),
                    einstein: Some(0.0),
                    kahler: true,
                    det_sign: DeterminantSign::ZeroBand,
                },
            })
        }
        "round_s4" => {
            arity(0)?;
            let m = MetricField::from_components(
                "round_s4",
                &[
                    ROUND_S4, "0", "0", "0", ROUND_S4, "0", "0", ROUND_S4, "0", ROUND_S4,
                ],
                ChartDomain::whole(),
            )?;
            Ok(CatalogEntry {
                name: "round_s4".into(),
                metric: Arc::new(m),
                coverage: "S^4 minus one point (stereographic)",
                truth: GroundTruth {
                    s: Some(12.0),
                    wplus: Some([0.0; 3]),
                    einstein: Some(3.0),
                    kahler: false,
                    det_sign: DeterminantSign::ZeroBand,
                },
            })
        }
        "s2xs2" => {
            arity(0)?;
            let m = MetricField::from_kahler_potential(
                "s2xs2",
                &product_potential(1.0, 1.0),
                ChartDomain::whole(),
            )?;
            Ok(CatalogEntry {
                name: "s2xs2".into(),
                metric: Arc::new(m),
                coverage: "S^2 x S^2 minus (pt x S^2) u (S^2 x pt)",
                truth: kahler_truth(4.0, Some(1.0)),
            })
        }
        "s2xs2_unequal" => {
            arity(2)?;
            let a = params
                .first()
                .map(|t| number("a", t))
                .transpose()?
                .unwrap_or(1.0);
            let b = params
                .get(1)
                .map(|t| number("b", t))
                .transpose()?
                .unwrap_or(2.0);
            if !(a > 0.0 && b > 0.0) {
                return Err(Error::InvalidInput(format!(
                    "radii must be positive, got a = {a}, b = {b}"
                )));
            }
            let name = format!("s2xs2_unequal:{}:{}", fmt_num(a), fmt_num(b));
            let m = MetricField::from_kahler_potential(
                &name,
                &product_potential(a, b),
                ChartDomain::whole(),
            )?;
            let s = 2.0 / (a * a) + 2.0 / (b * b);
            let einstein = (a == b).then(|| 1.0 / (a * a));
            Ok(CatalogEntry {
                name,
                metric: Arc::new(m),
                coverage: "S^2(a) x S^2(b) minus (pt x S^2) u (S^2 x pt)",
                truth: kahler_truth(s, einstein),
            })
        }
        "fubini_study" => {
            arity(0)?;
            let m = MetricField::from_kahler_potential(
                "fubini_study",
                FS_POTENTIAL,
                ChartDomain::whole(),
            )?;
            Ok(CatalogEntry {
                name: "fubini_study".into(),
                metric: Arc::new(m),
                coverage: "CP^2 minus a projective line (affine chart)",
                truth: kahler_truth(12.0, Some(3.0)),
            })
        }
        "fs_perturbed" => {
            arity(2)?;
            let eps = params
                .first()
                .map(|t| number("eps", t))
                .transpose()?
                .unwrap_or(0.05);
            let seed = match params.get(1) {
                Some(t) => t.parse::<u64>().map_err(|_| {
                    Error::InvalidInput(format!("seed: `{t}` is not an unsigned integer"))
                })?,
                None => 7,
            };
            fs_perturbed(eps, seed)
        }
        _ => Err(Error::UnknownMetric(name.to_string())),
    }
}

/// Potential of `fs_perturbed(eps, seed)`:
/// `log(1 + |x|²) + eps · Σ w_i (x_i − c_i)² · exp(−|x − c|²)` with centre
/// `c ∈ [−0.1, 0.1]⁴` and weights `w_i ≥ 0` summing to 2, drawn from ChaCha8
/// seeded with `seed` and rounded to six decimals. The unperturbed case
/// `w = (1, 1, 0, 0)`, `c = 0` is the simplest member of the family.
pub fn fs_perturbed_potential(eps: f64, seed: u64) -> String {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let round = |v: f64| (v * 1e6).round() / 1e6;
    let c: [f64; 4] = core::array::from_fn(|_| round(rng.gen_range(-0.1..0.1)));
    let raw: [f64; 4] = core::array::from_fn(|_| rng.gen_range(0.0..1.0));
    let total: f64 = raw.iter().sum();
    let w: [f64; 4] = raw.map(|v| round(2.0 * v / total));
    let shift = |i: usize| {
        if c[i] >= 0.0 {
            format!("(x{i} - {:.6})", c[i])
        } else {
            format!("(x{i} + {:.6})", -c[i])
        }
    };
    let quad: Vec<String> = (0..4)
        .map(|i| format!("{:.6}*{}^2", w[i], shift(i)))
        .collect();
    let dist: Vec<String> = (0..4).map(|i| format!("{}^2", shift(i))).collect();
    format!(
        "{FS_POTENTIAL} + {}*({})*exp(-({}))",
        fmt_num(eps),
        quad.join(" + "),
        dist.join(" + ")
    )
}

/// Grid points per axis of the validity scan for perturbed potentials.
pub const PERTURBATION_SCAN: usize = 10;

fn fs_perturbed(eps: f64, seed: u64) -> Result<CatalogEntry> {
    if !(0.0..=MAX_PERTURBATION).contains(&eps) {
        return Err(Error::InvalidInput(format!(
            "eps must lie in [0, {MAX_PERTURBATION}], got {eps}"
        )));
    }
    let name = format!("fs_perturbed:{}:{seed}", fmt_num(eps));
    let m = MetricField::from_kahler_potential(
        &name,
        &fs_perturbed_potential(eps, seed),
        ChartDomain::cube(1.0),
    )?;
    for p in m.domain().grid(PERTURBATION_SCAN, 0.0) {
        let s = PointCurvature::at(&m, &p)
            .map_err(|e| Error::InvalidInput(format!("eps = {eps} too large: {e}")))?
            .scalar_curvature();
        if !(s > 0.0) {
            return Err(Error::InvalidInput(format!(
                "eps = {eps} too large: scalar curvature {s:e} at {:?}",
                p.0
            )));
        }
    }
    Ok(CatalogEntry {
        name,
        metric: Arc::new(m),
        coverage: "box [-1,1]^4 of the affine chart of CP^2 (local)",
        truth: GroundTruth {
            s: None,
            wplus: None,
            einstein: None,
            kahler: true,
            det_sign: DeterminantSign::Positive,
        },
    })
}

/// All catalog entries (parameterized ones with their defaults), sorted by name.
pub fn list_catalog() -> Result<Vec<CatalogEntry>> {
    NAMES.iter().map(|n| catalog_get(n)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn listing_is_sorted_and_complete() {
        let entries = list_catalog().unwrap();
        assert!(entries.len() >= 6);
        let names: Vec<&str> = entries
            .iter()
            .map(|e| e.name.split(':').next().unwrap())
            .collect();
        let mut sorted = names.clone();
        sorted.sort();
        assert_eq!(names, sorted);
    }

    #[test]
    fn parameter_syntax() {
        assert_eq!(
            catalog_get("s2xs2_unequal:1:2").unwrap().name,
            "s2xs2_unequal:1.0:2.0"
        );
        assert_eq!(
            catalog_get("s2xs2_unequal(1, 2)").unwrap().name,
            "s2xs2_unequal:1.0:2.0"
        );
        assert!(matches!(
            catalog_get("nosuch"),
            Err(Error::UnknownMetric(_))
        ));
        assert!(matches!(
            catalog_get("s2xs2_unequal:0:1"),
            Err(Error::InvalidInput(_))
        ));
        assert!(matches!(
            catalog_get("fs_perturbed:5:1"),
            Err(Error::InvalidInput(_))
        ));
        assert!(matches!(catalog_get("flat:1"), Err(Error::InvalidInput(_))));
    }

    #[test]
    fn perturbed_potential_is_reproducible() {
        assert_eq!(
            fs_perturbed_potential(0.05, 7),
            fs_perturbed_potential(0.05, 7)
        );
        assert_ne!(
            fs_perturbed_potential(0.05, 7),
            fs_perturbed_potential(0.05, 8)
        );
        crate::expr::parse_expression(&fs_perturbed_potential(0.03, 2)).unwrap();
    }
}
