//! Point analysis and scans.

use std::sync::Arc;

use rayon::prelude::*;
use serde::Serialize;
use weylscope_core::geometry::ChartPoint;
use weylscope_core::linalg::Mat4;
use weylscope_core::pipeline::{
    analyze_point, rescale_to_g, summarize, PipelineOptions, PointRecord,
};
use weylscope_core::weyl::align_sign;
use weylscope_core::MetricField;

use crate::error::{Failure, Result};
use crate::report::{
    conventions, fmt_float, nums, Conventions, MetricDescriptor, Num, Tool, SCHEMA, TOOL,
};

/// Runs `f` on a pool of `threads` workers.
pub fn with_threads<R: Send>(threads: usize, f: impl FnOnce() -> R + Send) -> Result<R> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads.max(1))
        .build()
        .map_err(|e| Failure::Input(format!("thread pool: {e}")))?;
    Ok(pool.install(f))
}

#[derive(Debug, Clone, Serialize)]
pub struct ThresholdOut {
    /// `β/α`.
    pub x: Num,
    /// `det W⁺ / |W⁺|³`.
    pub ratio: Num,
    pub lhs: bool,
    pub rhs: bool,
    pub agree: bool,
    pub boundary: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct ResidualsOut {
    pub wplus_grad: Num,
    pub beta_grad: Num,
    pub negatron_slack: Option<Num>,
    pub positron_slack: Num,
    pub megatron_slack: Num,
}

/// One analysed point as written to reports.
#[derive(Debug, Clone, Serialize)]
pub struct RecordOut {
    pub index: usize,
    pub point: [Num; 4],
    pub s: Num,
    pub alpha: Num,
    pub beta: Num,
    pub gamma: Num,
    pub det: Num,
    pub norm2: Num,
    pub normalized_det: Num,
    pub gap: Num,
    pub det_sign: &'static str,
    pub signs_agree: bool,
    pub threshold: ThresholdOut,
    pub f: Num,
    pub alpha_g: Num,
    pub alpha_g_f: Num,
    pub s_g: Num,
    pub kahler_residual: Num,
    pub residuals: ResidualsOut,
    /// Top eigenform of `h`, components `(01, 02, 03, 12, 13, 23)`.
    pub omega: [Num; 6],
    /// Whether `omega` was negated to continue the sign of the previous record.
    pub omega_flipped: bool,
}

impl RecordOut {
    pub fn new(index: usize, r: &PointRecord, omega: [f64; 6], omega_flipped: bool) -> RecordOut {
        let sp = &r.spectrum;
        let t = &r.threshold;
        RecordOut {
            index,
            point: nums(r.point),
            s: Num(r.s),
            alpha: Num(sp.alpha),
            beta: Num(sp.beta),
            gamma: Num(sp.gamma),
            det: Num(sp.det),
            norm2: Num(sp.norm2),
            normalized_det: Num(sp.normalized_det()),
            gap: Num(sp.gap),
            det_sign: r.classification.sign.as_str(),
            signs_agree: r.classification.signs_agree,
            threshold: ThresholdOut {
                x: Num(t.x),
                ratio: Num(t.ratio),
                lhs: t.lhs,
                rhs: t.rhs,
                agree: t.agree,
                boundary: t.boundary,
            },
            f: Num(r.f),
            alpha_g: Num(r.alpha_g),
            alpha_g_f: Num(r.alpha_g_f),
            s_g: Num(r.s_g),
            kahler_residual: Num(r.kahler_residual),
            residuals: ResidualsOut {
                wplus_grad: Num(r.wplus_grad),
                beta_grad: Num(r.beta_grad),
                negatron_slack: r.negatron_slack.map(Num),
                positron_slack: Num(r.positron_slack),
                megatron_slack: Num(r.megatron_slack),
            },
            omega: nums(omega),
            omega_flipped,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct PointFailure {
    pub index: usize,
    pub point: [Num; 4],
    pub kind: &'static str,
    pub error: String,
}

#[derive(Debug, Clone, Serialize)]
pub struct SummaryOut {
    pub points: usize,
    pub failures: usize,
    pub min_det: Option<Num>,
    pub min_gap: Option<Num>,
    pub max_kahler_residual: Option<Num>,
    pub max_alpha_f_error: Option<Num>,
    pub verdict: String,
}

#[derive(Debug, Clone, Serialize)]
pub struct AnalysisReport {
    pub schema: &'static str,
    pub tool: Tool,
    pub command: &'static str,
    pub metric: MetricDescriptor,
    pub conventions: Conventions,
    pub parameters: serde_json::Value,
    pub records: Vec<RecordOut>,
    pub failures: Vec<PointFailure>,
    pub summary: SummaryOut,
}

/// Points, records and failures of one scan, in scan order.
pub struct ScanOutcome {
    pub records: Vec<RecordOut>,
    pub failures: Vec<PointFailure>,
    pub summary: SummaryOut,
}

fn omega_matrix(c: &[f64; 6]) -> Mat4 {
    let mut m = [[0.0; 4]; 4];
    for (k, (a, b)) in [(0, 1), (0, 2), (0, 3), (1, 2), (1, 3), (2, 3)]
        .into_iter()
        .enumerate()
    {
        m[a][b] = c[k];
        m[b][a] = -c[k];
    }
    m
}

/// Analyses `points` of `h` in parallel and assembles the records in scan
/// order, carrying the sign of the eigenform from each record to the next.
pub fn scan_points(
    h: Arc<MetricField>,
    points: &[ChartPoint],
    opts: &PipelineOptions,
    residual_tol: f64,
) -> ScanOutcome {
    let g = rescale_to_g(h.clone(), opts);
    let results: Vec<_> = points
        .par_iter()
        .map(|p| analyze_point(&h, &g, p, opts))
        .collect();
    let mut records = Vec::new();
    let mut raw = Vec::new();
    let mut failures = Vec::new();
    let mut previous: Option<Mat4> = None;
    for (index, (p, res)) in points.iter().zip(results).enumerate() {
        match res {
            Ok(r) => {
                let mut omega = omega_matrix(&r.omega);
                let flipped = previous
                    .as_ref()
                    .is_some_and(|prev| align_sign(&mut omega, prev));
                previous = Some(omega);
                let comps = [
                    omega[0][1],
                    omega[0][2],
                    omega[0][3],
                    omega[1][2],
                    omega[1][3],
                    omega[2][3],
                ];
                records.push(RecordOut::new(index, &r, comps, flipped));
                raw.push(r);
            }
            Err(e) => failures.push(PointFailure {
                index,
                point: nums(p.0),
                kind: if e.is_math_domain() {
                    "math-domain"
                } else {
                    "input"
                },
                error: e.to_string(),
            }),
        }
    }
    let s = summarize(&raw, failures.len(), residual_tol);
    ScanOutcome {
        records,
        failures,
        summary: SummaryOut {
            points: s.points,
            failures: s.failures,
            min_det: s.min_det.map(Num),
            min_gap: s.min_gap.map(Num),
            max_kahler_residual: s.max_residual.map(Num),
            max_alpha_f_error: s.max_alpha_f_error.map(Num),
            verdict: s.verdict,
        },
    }
}

pub fn analysis_report(
    command: &'static str,
    metric: MetricDescriptor,
    opts: &PipelineOptions,
    parameters: serde_json::Value,
    outcome: ScanOutcome,
) -> AnalysisReport {
    AnalysisReport {
        schema: SCHEMA,
        tool: TOOL,
        command,
        metric,
        conventions: conventions(opts.orientation),
        parameters,
        records: outcome.records,
        failures: outcome.failures,
        summary: outcome.summary,
    }
}

const CSV_HEADER: [&str; 36] = [
    "index",
    "x0",
    "x1",
    "x2",
    "x3",
    "s",
    "alpha",
    "beta",
    "gamma",
    "det",
    "norm2",
    "normalized_det",
    "gap",
    "det_sign",
    "signs_agree",
    "threshold_x",
    "threshold_ratio",
    "threshold_lhs",
    "threshold_rhs",
    "threshold_boundary",
    "f",
    "alpha_g",
    "alpha_g_f",
    "s_g",
    "kahler_residual",
    "negatron_slack",
    "positron_slack",
    "megatron_slack",
    "omega01",
    "omega02",
    "omega03",
    "omega12",
    "omega13",
    "omega23",
    "omega_flipped",
    "wplus_grad",
];

/// Record table as CSV; missing values are empty cells.
pub fn records_csv(records: &[RecordOut]) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let io = |e: csv::Error| Failure::Io(std::io::Error::other(e));
    w.write_record(CSV_HEADER).map_err(io)?;
    let f = |n: &Num| {
        if n.0.is_finite() {
            fmt_float(n.0)
        } else {
            String::new()
        }
    };
    for r in records {
        let mut row = vec![r.index.to_string()];
        row.extend(r.point.iter().map(f));
        row.extend(
            [
                &r.s,
                &r.alpha,
                &r.beta,
                &r.gamma,
                &r.det,
                &r.norm2,
                &r.normalized_det,
                &r.gap,
            ]
            .map(f),
        );
        row.push(r.det_sign.to_string());
        row.push(r.signs_agree.to_string());
        row.push(f(&r.threshold.x));
        row.push(f(&r.threshold.ratio));
        row.extend([r.threshold.lhs, r.threshold.rhs, r.threshold.boundary].map(|b| b.to_string()));
        row.extend([&r.f, &r.alpha_g, &r.alpha_g_f, &r.s_g, &r.kahler_residual].map(f));
        row.push(
            r.residuals
                .negatron_slack
                .as_ref()
                .map(f)
                .unwrap_or_default(),
        );
        row.push(f(&r.residuals.positron_slack));
        row.push(f(&r.residuals.megatron_slack));
        row.extend(r.omega.iter().map(f));
        row.push(r.omega_flipped.to_string());
        row.push(f(&r.residuals.wplus_grad));
        w.write_record(&row).map_err(io)?;
    }
    let bytes = w
        .into_inner()
        .map_err(|e| Failure::Io(std::io::Error::other(e.to_string())))?;
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}
