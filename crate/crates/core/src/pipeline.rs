//! Conformally-Kähler detection: the preferred conformal factor
//! `f = α_h^{-1/3}`, the rescaled metric `g = f⁻²h`, its Kähler residual
//! `|∇ω|_g`, the Derdziński metric `h = s⁻²g` of a Kähler metric and the round
//! trip between the two.

use alloc::format;
use alloc::string::String;
use alloc::sync::Arc;
use alloc::vec::Vec;

#[allow(unused_imports)] // inherent methods shadow it when std is linked
use num_traits::Float;

use crate::error::{Error, Result};
use crate::geometry::{
    covariant_derivative_with, raise_values, ChartPoint, MetricField, PointCurvature, Provenance,
    ScalarField, TensorJet,
};
use crate::jet::Jet;
use crate::linalg::{mat3_vec, mat4j_values, Vec3};
use crate::weyl::{
    classify_determinant, megatron, threshold_check, top_eigenform, weyl_spectrum, CurvatureJets,
    DeterminantClass, DeterminantSign, Orientation, ThresholdRecord, WeylSpectrum, DEFAULT_GAP_TOL,
};

/// `6^{-2/3}`: ratio between the metric recovered from the Derdziński metric
/// and the original Kähler metric.
pub fn roundtrip_ratio() -> f64 {
    6.0f64.powf(-2.0 / 3.0)
}

/// Default grid size per axis for the positivity scan of `s`.
pub const DERDZINSKI_SCAN: usize = 11;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PipelineOptions {
    /// Relative spectral gap `(α − β)/|W⁺|` below which the top eigenvalue is
    /// treated as degenerate.
    pub gap_tol: f64,
    /// Relative band `|β| ≤ det_tol·|W⁺|` classified as zero.
    pub det_tol: f64,
    pub orientation: Orientation,
}

impl Default for PipelineOptions {
    fn default() -> Self {
        PipelineOptions {
            gap_tol: DEFAULT_GAP_TOL,
            det_tol: 1e-9,
            orientation: Orientation::Standard,
        }
    }
}

/// `f = α_h^{-1/3}` as a jet of order `k` at `p` (consumes `k + 2` metric orders).
pub fn preferred_factor(
    h: &MetricField,
    p: &ChartPoint,
    k: u8,
    opts: &PipelineOptions,
) -> Result<Jet> {
    let cj = CurvatureJets::at(h, p, k, opts.orientation)?;
    let top = cj.top_eigen(opts.gap_tol, None)?;
    let alpha = top.alpha.value();
    if !(alpha > 0.0) {
        return Err(Error::NonPositive {
            what: "top eigenvalue of W+".into(),
            value: alpha,
        });
    }
    top.alpha.powf(-1.0 / 3.0)
}

/// `g = α_h^{2/3} h`, evaluated lazily point by point.
pub fn rescale_to_g(h: Arc<MetricField>, opts: &PipelineOptions) -> MetricField {
    let name = format!("rescaled({})", h.name());
    let factor = ScalarField::TopEigenvaluePower {
        metric: h.clone(),
        exponent: -1.0 / 3.0,
        orientation: opts.orientation,
        gap_tol: opts.gap_tol,
    };
    MetricField::conformal(&name, h, factor, Provenance::ConformalRescale)
}

/// `h = s⁻²g` for a Kähler metric with positive scalar curvature, checked on
/// a grid of `scan` points per axis.
pub fn derdzinski(g: Arc<MetricField>, scan: usize) -> Result<MetricField> {
    if g.kahler_form().is_none() {
        return Err(Error::Precondition(format!(
            "`{}` has no Kähler form; build it from a potential",
            g.name()
        )));
    }
    for p in g.domain().grid(scan, 0.0) {
        let s = PointCurvature::at(&g, &p)?.scalar_curvature();
        if !(s > 0.0) {
            return Err(Error::NonPositive {
                what: format!("scalar curvature at {:?}", p.0),
                value: s,
            });
        }
    }
    let name = format!("derdzinski({})", g.name());
    Ok(MetricField::conformal(
        &name,
        g.clone(),
        ScalarField::ScalarCurvature(g),
        Provenance::Derdzinski,
    ))
}

/// Kähler residual of the top eigenform field of a metric at one point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KahlerResidual {
    /// `|∇ω|` with `|∇ω|² = ½ g^ef g^ac g^bd ∇_e ω_ab ∇_f ω_cd`.
    pub norm: f64,
    pub norm_sq: f64,
    /// `W⁺(∇ω, ∇ω) = g^ef ⟨∇_e ω, W⁺ ∇_f ω⟩`.
    pub wplus_grad: f64,
    /// `β |∇ω|²`.
    pub beta_grad: f64,
    pub spectrum: WeylSpectrum,
    pub s: f64,
}

/// `|∇ω|_g` for the eigenform of the simple top eigenvalue of `W⁺_g`; needs
/// metric jets of order 3.
pub fn kahler_residual(
    g: &MetricField,
    p: &ChartPoint,
    opts: &PipelineOptions,
) -> Result<KahlerResidual> {
    let cj = CurvatureJets::at(g, p, 1, opts.orientation)?;
    let top = cj.top_eigen(opts.gap_tol, None)?;
    let nabla = covariant_derivative_with(&cj.geometry.gamma, &top.omega);
    let ginv = mat4j_values(&cj.geometry.ginv);
    let vals = nabla.values();
    let raised = raise_values(&vals, 3, &ginv);
    let norm_sq = 0.5 * vals.iter().zip(&raised).map(|(a, b)| a * b).sum::<f64>();

    let plus_up: [TensorJet; 3] = cj.bases.plus_up.clone().map(|t| t.truncate(0));
    let coeff: [Vec3; 4] = core::array::from_fn(|e| {
        core::array::from_fn(|i| {
            let mut acc = 0.0;
            for a in 0..4 {
                for b in a + 1..4 {
                    acc += plus_up[i].get(&[a, b]).value() * vals[TensorJet::flat(&[e, a, b])];
                }
            }
            acc
        })
    });
    let w: [[f64; 3]; 3] = {
        let wj = cj.wplus();
        core::array::from_fn(|i| core::array::from_fn(|j| wj[i][j].value()))
    };
    let mut wplus_grad = 0.0;
    for e in 0..4 {
        let wc = mat3_vec(&w, &coeff[e]);
        for f in 0..4 {
            wplus_grad += ginv[e][f] * (0..3).map(|i| coeff[f][i] * wc[i]).sum::<f64>();
        }
    }
    let spectrum = top.spectrum;
    Ok(KahlerResidual {
        norm: norm_sq.max(0.0).sqrt(),
        norm_sq,
        wplus_grad,
        beta_grad: spectrum.beta * norm_sq,
        spectrum,
        s: cj.scalar_curvature().value(),
    })
}

/// Full pipeline analysis of `h` at one point.
#[derive(Debug, Clone, PartialEq)]
pub struct PointRecord {
    pub point: [f64; 4],
    pub s: f64,
    pub spectrum: WeylSpectrum,
    pub classification: DeterminantClass,
    pub threshold: ThresholdRecord,
    /// `f = α_h^{-1/3}`.
    pub f: f64,
    /// Top eigenvalue of the rescaled metric `g = f⁻²h`.
    pub alpha_g: f64,
    pub alpha_g_f: f64,
    pub s_g: f64,
    /// `|∇ω|_g`, which also bounds the failure of `J` to be integrable.
    pub kahler_residual: f64,
    pub wplus_grad: f64,
    pub beta_grad: f64,
    /// `−W⁺(∇ω,∇ω)`, reported where `det W⁺ > 0`.
    pub negatron_slack: Option<f64>,
    /// `β|∇ω|² − W⁺(∇ω,∇ω)`.
    pub positron_slack: f64,
    /// `|W⁺|² − (3/2)α²`.
    pub megatron_slack: f64,
    /// Top eigenform of `h`, components `(01, 02, 03, 12, 13, 23)`.
    pub omega: [f64; 6],
}

/// Runs the pipeline on `h` at `p`; `g` must be `rescale_to_g(h)`.
pub fn analyze_point(
    h: &MetricField,
    g: &MetricField,
    p: &ChartPoint,
    opts: &PipelineOptions,
) -> Result<PointRecord> {
    let cj = CurvatureJets::at(h, p, 0, opts.orientation)?;
    let dec = cj.decomposition();
    let spectrum = weyl_spectrum(&dec.wplus);
    let omega = top_eigenform(&dec, &spectrum, opts.gap_tol, None)?;
    let classification = classify_determinant(&spectrum, opts.det_tol);
    let threshold = threshold_check(&spectrum)?;
    let f = spectrum.alpha.powf(-1.0 / 3.0);
    let kr = kahler_residual(g, p, opts)?;
    let alpha_g = kr.spectrum.alpha;
    let (megatron_slack, _) = megatron(&spectrum);
    Ok(PointRecord {
        point: p.0,
        s: dec.s,
        spectrum,
        classification,
        threshold,
        f,
        alpha_g,
        alpha_g_f: alpha_g * f,
        s_g: kr.s,
        kahler_residual: kr.norm,
        wplus_grad: kr.wplus_grad,
        beta_grad: kr.beta_grad,
        negatron_slack: (kr.spectrum.beta < 0.0
            && classification.sign == DeterminantSign::Positive)
            .then_some(-kr.wplus_grad),
        positron_slack: kr.beta_grad - kr.wplus_grad,
        megatron_slack,
        omega: [
            omega[0][1],
            omega[0][2],
            omega[0][3],
            omega[1][2],
            omega[1][3],
            omega[2][3],
        ],
    })
}

/// Aggregate over a set of pipeline records.
#[derive(Debug, Clone, PartialEq)]
pub struct PipelineSummary {
    pub points: usize,
    pub failures: usize,
    pub min_det: Option<f64>,
    pub min_gap: Option<f64>,
    pub max_residual: Option<f64>,
    pub max_alpha_f_error: Option<f64>,
    pub verdict: String,
}

/// Verdict: "no points", "conformally-kahler" when every point has
/// `det W⁺ > 0` and Kähler residual at most `residual_tol`, otherwise
/// "not-conformally-kahler".
pub fn summarize(records: &[PointRecord], failures: usize, residual_tol: f64) -> PipelineSummary {
    let fold = |f: &dyn Fn(&PointRecord) -> f64, pick: fn(f64, f64) -> f64| {
        records.iter().map(f).reduce(pick)
    };
    let verdict = if records.is_empty() && failures == 0 {
        "no points"
    } else if failures == 0
        && records.iter().all(|r| {
            r.classification.sign == DeterminantSign::Positive && r.kahler_residual <= residual_tol
        })
    {
        "conformally-kahler"
    } else {
        "not-conformally-kahler"
    };
    PipelineSummary {
        points: records.len(),
        failures,
        min_det: fold(&|r| r.spectrum.det, f64::min),
        min_gap: fold(&|r| r.spectrum.gap, f64::min),
        max_residual: fold(&|r| r.kahler_residual, f64::max),
        max_alpha_f_error: fold(&|r| (r.alpha_g_f - 1.0).abs(), f64::max),
        verdict: verdict.into(),
    }
}

/// Component ratio `g′/g` at one point of the round trip.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RoundtripPoint {
    pub point: [f64; 4],
    pub ratio_min: f64,
    pub ratio_max: f64,
    pub kahler_residual: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RoundtripReport {
    pub expected: f64,
    pub points: Vec<RoundtripPoint>,
    pub max_deviation: f64,
    pub max_residual: f64,
}

/// The recovered metric `rescale_to_g(derdzinski(g))`.
pub fn roundtrip_metric(
    g: Arc<MetricField>,
    scan: usize,
    opts: &PipelineOptions,
) -> Result<MetricField> {
    let h = Arc::new(derdzinski(g, scan)?);
    Ok(rescale_to_g(h, opts))
}

/// Ratio of `g′ = rescale_to_g(derdzinski(g))` to `g` over the components
/// with `|g_ab| ≥ 1e−6·max|g|`, and the Kähler residual of `g′`.
pub fn roundtrip_at(
    g: &MetricField,
    g_prime: &MetricField,
    p: &ChartPoint,
    opts: &PipelineOptions,
) -> Result<RoundtripPoint> {
    let gv = g.jets(p, 0)?.values();
    let gp = g_prime.jets(p, 0)?.values();
    let max = gv.iter().flatten().fold(0.0f64, |m, v| m.max(v.abs()));
    let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
    for a in 0..4 {
        for b in 0..4 {
            if gv[a][b].abs() >= 1e-6 * max {
                let r = gp[a][b] / gv[a][b];
                lo = lo.min(r);
                hi = hi.max(r);
            }
        }
    }
    let kr = kahler_residual(g_prime, p, opts)?;
    Ok(RoundtripPoint {
        point: p.0,
        ratio_min: lo,
        ratio_max: hi,
        kahler_residual: kr.norm,
    })
}

pub fn roundtrip(
    g: Arc<MetricField>,
    points: &[ChartPoint],
    scan: usize,
    opts: &PipelineOptions,
) -> Result<RoundtripReport> {
    let g_prime = roundtrip_metric(g.clone(), scan, opts)?;
    let pts = points
        .iter()
        .map(|p| roundtrip_at(&g, &g_prime, p, opts))
        .collect::<Result<Vec<_>>>()?;
    Ok(roundtrip_report(pts))
}

pub fn roundtrip_report(points: Vec<RoundtripPoint>) -> RoundtripReport {
    let expected = roundtrip_ratio();
    let max_deviation = points
        .iter()
        .map(|r| {
            (r.ratio_min - expected)
                .abs()
                .max((r.ratio_max - expected).abs())
        })
        .fold(0.0, f64::max);
    let max_residual = points.iter().map(|r| r.kahler_residual).fold(0.0, f64::max);
    RoundtripReport {
        expected,
        points,
        max_deviation,
        max_residual,
    }
}
