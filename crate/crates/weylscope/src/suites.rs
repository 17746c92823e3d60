//! Verification suites behind `weylscope verify`.

use std::f64::consts::PI;
use std::sync::Arc;

use rayon::prelude::*;
use serde::Serialize;
use serde_json::json;
use weylscope_core::forms::TwoFormField;
use weylscope_core::geometry::{
    conformal_rescale, ChartDomain, ChartPoint, LocalGeometry, ScalarField,
};
use weylscope_core::pipeline::{
    analyze_point, derdzinski, rescale_to_g, roundtrip_at, roundtrip_ratio, PipelineOptions,
    DERDZINSKI_SCAN,
};
use weylscope_core::verify::{
    block_count, combine_blocks, divergence_weyl, lemma_suite, merge_oracle, oracle_block,
    oracle_report, quadrature_block, scalar_curvature_density, signature_density,
    weighted_divergence, weitzenboeck_form, weitzenboeck_weyl, Check, QuadratureEstimate,
    LEMMA_TOL,
};
use weylscope_core::weyl::{
    megatron, threshold, threshold_check, weyl_spectrum, CurvatureJets, DeterminantSign,
    Orientation,
};
use weylscope_core::{Error as CoreError, MetricField};

use crate::error::{Failure, Result};
use crate::metric_file::resolve_metric;
use crate::report::{conventions, nums, Conventions, Num, Tool, SCHEMA, TOOL};

pub const SUITES: [&str; 8] = [
    "einstein",
    "weighted",
    "weitzenboeck",
    "lemmas",
    "oracle",
    "quadrature",
    "pipeline",
    "roundtrip",
];

/// Conformal factor of the weighted and Weitzenböck suites.
pub const BUMP_FACTOR: &str = "1 + 0.1*exp(-(x0^2 + x1^2 + x2^2 + x3^2))";

/// Default metric of the lemma and round-trip suites.
pub const PERTURBED: &str = "fs_perturbed:0.03:2";

pub const DEFAULT_POINTS: usize = 10;
pub const DEFAULT_ORACLE_SAMPLES: u64 = 1_000_000;
pub const DEFAULT_QUADRATURE_SAMPLES: u64 = 100_000;

#[derive(Debug, Clone)]
pub struct SuiteParams {
    pub seed: u64,
    /// Sample count of the oracle and quadrature suites (suite default if `None`).
    pub samples: Option<u64>,
    /// Replaces the primary tolerance of each suite.
    pub tol: Option<f64>,
    /// Replaces the suite's default metrics.
    pub metric: Option<String>,
    /// Points per metric for pointwise suites.
    pub points: usize,
    pub orientation: Orientation,
}

impl Default for SuiteParams {
    fn default() -> Self {
        SuiteParams {
            seed: 42,
            samples: None,
            tol: None,
            metric: None,
            points: DEFAULT_POINTS,
            orientation: Orientation::Standard,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct CheckOut {
    pub name: String,
    pub pass: bool,
    /// `"<="` or `">="`: how values compare with the tolerance when passing.
    pub comparison: &'static str,
    pub tolerance: Num,
    /// Value farthest on the failing side.
    pub worst: Option<Num>,
    pub worst_point: Option<[Num; 4]>,
    pub evaluated: usize,
    pub errors: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub detail: Option<serde_json::Value>,
}

#[derive(Debug, Clone, Serialize)]
pub struct Counterexample {
    pub check: String,
    pub point: Option<[Num; 4]>,
    pub value: Option<Num>,
    pub error: Option<String>,
}

#[derive(Debug, Clone, Serialize)]
pub struct SuiteOut {
    pub suite: &'static str,
    pub pass: bool,
    pub parameters: serde_json::Value,
    pub checks: Vec<CheckOut>,
    /// First failure of the first failing check.
    pub counterexample: Option<Counterexample>,
}

#[derive(Debug, Clone, Serialize)]
pub struct VerifyReport {
    pub schema: &'static str,
    pub tool: Tool,
    pub command: &'static str,
    pub conventions: Conventions,
    pub parameters: serde_json::Value,
    pub pass: bool,
    pub suites: Vec<SuiteOut>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum Cmp {
    AtMost,
    AtLeast,
}

/// Accumulates the values of one check in evaluation order.
struct Acc {
    out: CheckOut,
    cmp: Cmp,
    first: Option<Counterexample>,
}

impl Acc {
    fn new(name: impl Into<String>, cmp: Cmp, tol: f64) -> Acc {
        Acc {
            out: CheckOut {
                name: name.into(),
                pass: true,
                comparison: if cmp == Cmp::AtMost { "<=" } else { ">=" },
                tolerance: Num(tol),
                worst: None,
                worst_point: None,
                evaluated: 0,
                errors: 0,
                detail: None,
            },
            cmp,
            first: None,
        }
    }

    fn at_most(name: impl Into<String>, tol: f64) -> Acc {
        Acc::new(name, Cmp::AtMost, tol)
    }

    fn at_least(name: impl Into<String>, tol: f64) -> Acc {
        Acc::new(name, Cmp::AtLeast, tol)
    }

    fn push(&mut self, v: f64, p: Option<[f64; 4]>) {
        let tol = self.out.tolerance.0;
        let ok = match self.cmp {
            Cmp::AtMost => v <= tol,
            Cmp::AtLeast => v >= tol,
        };
        self.push_flag(ok, v, p);
    }

    fn push_flag(&mut self, ok: bool, v: f64, p: Option<[f64; 4]>) {
        self.out.evaluated += 1;
        let worse = match (self.out.worst, self.cmp) {
            (None, _) => true,
            (Some(w), _) if v.is_nan() && !w.0.is_nan() => true,
            (Some(w), Cmp::AtMost) => v > w.0,
            (Some(w), Cmp::AtLeast) => v < w.0,
        };
        if worse {
            self.out.worst = Some(Num(v));
            self.out.worst_point = p.map(nums);
        }
        if !ok {
            self.out.pass = false;
            self.first.get_or_insert_with(|| Counterexample {
                check: self.out.name.clone(),
                point: p.map(nums),
                value: Some(Num(v)),
                error: None,
            });
        }
    }

    fn error(&mut self, e: &CoreError, p: Option<[f64; 4]>) {
        self.out.errors += 1;
        self.out.pass = false;
        self.first.get_or_insert_with(|| Counterexample {
            check: self.out.name.clone(),
            point: p.map(nums),
            value: None,
            error: Some(e.to_string()),
        });
    }

    fn detail(mut self, d: serde_json::Value) -> Acc {
        self.out.detail = Some(d);
        self
    }
}

#[derive(Default)]
struct SuiteBuilder {
    checks: Vec<CheckOut>,
    counterexample: Option<Counterexample>,
}

impl SuiteBuilder {
    fn add(&mut self, acc: Acc) {
        if !acc.out.pass && self.counterexample.is_none() {
            self.counterexample = acc.first;
        }
        self.checks.push(acc.out);
    }

    fn add_all(&mut self, accs: impl IntoIterator<Item = Acc>) {
        for a in accs {
            self.add(a);
        }
    }

    /// Records a failed setup step (for instance a metric that cannot be built).
    fn setup_error(&mut self, name: &str, e: &CoreError) {
        let mut acc = Acc::at_most(format!("{name}/setup"), 0.0);
        acc.error(e, None);
        self.add(acc);
    }

    fn finish(self, suite: &'static str, parameters: serde_json::Value) -> SuiteOut {
        SuiteOut {
            suite,
            pass: self.checks.iter().all(|c| c.pass),
            parameters,
            checks: self.checks,
            counterexample: self.counterexample,
        }
    }
}

fn eval_points<T: Send>(
    points: &[ChartPoint],
    f: impl Fn(&ChartPoint) -> std::result::Result<T, CoreError> + Sync,
) -> Vec<std::result::Result<T, CoreError>> {
    points.par_iter().map(&f).collect()
}

fn sample_points(m: &MetricField, params: &SuiteParams) -> Vec<ChartPoint> {
    m.domain().random_points(params.points, params.seed, 0.0)
}

fn metric_list(params: &SuiteParams, defaults: &[&str]) -> Vec<String> {
    match &params.metric {
        Some(m) => vec![m.clone()],
        None => defaults.iter().map(|s| s.to_string()).collect(),
    }
}

fn pipeline_options(params: &SuiteParams) -> PipelineOptions {
    PipelineOptions {
        orientation: params.orientation,
        ..PipelineOptions::default()
    }
}

/// Relative deviation of the Ricci tensor from `(s/4) g`.
fn einstein_deviation(m: &MetricField, p: &ChartPoint) -> std::result::Result<f64, CoreError> {
    let mj = m.jets(p, 2)?;
    let geo = LocalGeometry::new(&mj, 0)?;
    let ric = geo.ricci();
    let g = mj.values();
    let s = geo.scalar_curvature().value();
    let (mut dev, mut scale) = (0.0f64, 0.0f64);
    for a in 0..4 {
        for b in 0..4 {
            dev = dev.max((ric[a][b].value() - 0.25 * s * g[a][b]).abs());
            scale = scale.max(ric[a][b].value().abs());
        }
    }
    Ok(if scale > 0.0 { dev / scale } else { dev })
}

fn einstein(params: &SuiteParams) -> Result<SuiteOut> {
    let tol = params.tol.unwrap_or(1e-8);
    let names = metric_list(params, &["flat", "round_s4", "s2xs2", "fubini_study"]);
    let mut suite = SuiteBuilder::default();
    for name in &names {
        let m = resolve_metric(name)?.metric;
        let pts = sample_points(&m, params);
        let results = eval_points(&pts, |p| {
            Ok((
                divergence_weyl(&m, p, params.orientation)?.relative,
                einstein_deviation(&m, p)?,
            ))
        });
        let mut div = Acc::at_most(format!("{name}/divergence_weyl"), tol);
        let mut ein = Acc::at_most(format!("{name}/einstein_deviation"), tol);
        for (p, r) in pts.iter().zip(results) {
            match r {
                Ok((d, e)) => {
                    div.push(d, Some(p.0));
                    ein.push(e, Some(p.0));
                }
                Err(e) => div.error(&e, Some(p.0)),
            }
        }
        suite.add_all([div, ein]);
    }
    Ok(suite.finish(
        "einstein",
        json!({ "metrics": names, "points": params.points, "tolerance": Num(tol) }),
    ))
}

fn weighted(params: &SuiteParams) -> Result<SuiteOut> {
    let tol = params.tol.unwrap_or(1e-6);
    let configs: Vec<(String, &str, Option<ChartDomain>)> = match &params.metric {
        Some(m) => vec![(m.clone(), BUMP_FACTOR, None)],
        None => vec![
            ("fubini_study".into(), BUMP_FACTOR, None),
            (
                "s2xs2".into(),
                "1 + 0.05*x0^2",
                Some(ChartDomain::cube(1.0)),
            ),
        ],
    };
    let mut suite = SuiteBuilder::default();
    for (name, factor, domain) in &configs {
        let mut h = (*resolve_metric(name)?.metric).clone();
        if let Some(d) = domain {
            h = h.with_domain(*d);
        }
        let h = Arc::new(h);
        let f = ScalarField::parse(factor)?;
        let g = conformal_rescale(h.clone(), f);
        let unit = conformal_rescale(h.clone(), ScalarField::Constant(1.0));
        let pts = sample_points(&h, params);
        let results = eval_points(&pts, |p| {
            let base = divergence_weyl(&h, p, params.orientation)?;
            let weighted = weighted_divergence(&g, p, params.orientation)?;
            let plain = divergence_weyl(&g, p, params.orientation)?;
            let unit = weighted_divergence(&unit, p, params.orientation)?;
            Ok((
                base.relative,
                weighted.relative,
                plain.relative,
                (unit.residual - base.residual).abs(),
            ))
        });
        let mut base = Acc::at_most(format!("{name}/base_divergence"), 1e-8);
        let mut weighted = Acc::at_most(format!("{name}/weighted_divergence"), tol)
            .detail(json!({ "factor": factor }));
        let mut plain = Acc::at_least(format!("{name}/unweighted_divergence_nonzero"), 1e-7);
        let mut unit = Acc::at_most(format!("{name}/unit_weight_consistency"), 1e-12);
        for (p, r) in pts.iter().zip(results) {
            match r {
                Ok((b, w, d, u)) => {
                    base.push(b, Some(p.0));
                    weighted.push(w, Some(p.0));
                    plain.push(d, Some(p.0));
                    unit.push(u, Some(p.0));
                }
                Err(e) => weighted.error(&e, Some(p.0)),
            }
        }
        suite.add_all([base, weighted, plain, unit]);
    }
    let metrics: Vec<&String> = configs.iter().map(|c| &c.0).collect();
    Ok(suite.finish(
        "weighted",
        json!({ "metrics": metrics, "points": params.points, "tolerance": Num(tol) }),
    ))
}

fn weitzenboeck(params: &SuiteParams) -> Result<SuiteOut> {
    let tol_form = params.tol.unwrap_or(1e-6);
    let tol_weyl = params.tol.map_or(1e-5, |t| t * 10.0);
    let or = params.orientation;
    let mut suite = SuiteBuilder::default();

    let flat = resolve_metric("flat")?.metric;
    let mut parallel = Acc::at_most("flat/constant_form", 1e-12);
    match weitzenboeck_form(
        &flat,
        &TwoFormField::standard_kahler(),
        &ChartPoint([0.3, -0.2, 0.1, 0.4]),
        false,
        or,
    ) {
        Ok(r) => parallel.push(r.residual, Some(r.point)),
        Err(e) => parallel.error(&e, None),
    }
    suite.add(parallel);

    let name = params
        .metric
        .clone()
        .unwrap_or_else(|| "fubini_study".into());
    let h = resolve_metric(&name)?.metric;
    let Some(form) = h.kahler_form().cloned() else {
        return Err(Failure::Input(format!("`{name}` carries no Kähler form")));
    };
    let weighted_form = form.clone().scaled("1 + x0^2")?;
    let pts = sample_points(&h, params);
    let results = eval_points(&pts, |p| {
        let k = weitzenboeck_form(&h, &form, p, false, or)?;
        let w = weitzenboeck_form(&h, &weighted_form, p, true, or)?;
        Ok((k.relative, w.relative, w.scale))
    });
    let mut kahler = Acc::at_most(format!("{name}/kahler_form"), 1e-8);
    let mut nontrivial = Acc::at_most(format!("{name}/weighted_form"), tol_form)
        .detail(json!({ "form": "(1 + x0^2) w, projected to Lambda+" }));
    let mut sides = Acc::at_least(format!("{name}/weighted_form_scale"), 1e-6);
    for (p, r) in pts.iter().zip(results) {
        match r {
            Ok((k, w, s)) => {
                kahler.push(k, Some(p.0));
                nontrivial.push(w, Some(p.0));
                sides.push(s, Some(p.0));
            }
            Err(e) => nontrivial.error(&e, Some(p.0)),
        }
    }
    suite.add_all([kahler, nontrivial, sides]);

    let mut weyl_cases: Vec<(String, Arc<MetricField>, ScalarField, f64)> = vec![(
        format!("{name}/weyl_unit_weight"),
        h.clone(),
        ScalarField::Constant(1.0),
        1e-7,
    )];
    if params.metric.is_none() {
        weyl_cases.push((
            "s2xs2/weyl_unit_weight".into(),
            resolve_metric("s2xs2")?.metric,
            ScalarField::Constant(1.0),
            1e-7,
        ));
    }
    weyl_cases.push((
        format!("{name}/weyl_weighted"),
        h.clone(),
        ScalarField::parse(BUMP_FACTOR)?,
        tol_weyl,
    ));
    for (check, base, factor, tol) in weyl_cases {
        let g = conformal_rescale(base.clone(), factor);
        let pts = sample_points(&base, params);
        let results = eval_points(&pts, |p| weitzenboeck_weyl(&g, p, or, 1e-7));
        let mut acc = Acc::at_most(check, tol);
        for (p, r) in pts.iter().zip(results) {
            match r {
                Ok(r) => acc.push(r.identity.relative, Some(p.0)),
                Err(e) => acc.error(&e, Some(p.0)),
            }
        }
        suite.add(acc);
    }
    Ok(suite.finish(
        "weitzenboeck",
        json!({ "metric": name, "factor": BUMP_FACTOR, "points": params.points, "tolerance": Num(tol_form) }),
    ))
}

fn lemmas(params: &SuiteParams) -> Result<SuiteOut> {
    let name = params.metric.clone().unwrap_or_else(|| PERTURBED.into());
    let opts = pipeline_options(params);
    let mut suite = SuiteBuilder::default();
    let source = resolve_metric(&name)?.metric;
    let pts = sample_points(&source, params);
    match derdzinski(source.clone(), DERDZINSKI_SCAN) {
        Ok(h) => {
            let g = rescale_to_g(Arc::new(h), &opts);
            let results = eval_points(&pts, |p| lemma_suite(&g, p, &opts));
            let names = [
                "negatron",
                "positron",
                "megatron",
                "megatron_identity",
                "glissando",
                "sign_rule",
            ];
            let mut accs: Vec<Acc> = names
                .iter()
                .enumerate()
                .map(|(i, n)| {
                    let tol = if i == 3 { 0.0 } else { -LEMMA_TOL };
                    Acc::at_least(format!("{name}/{n}"), tol)
                })
                .collect();
            for (p, r) in pts.iter().zip(results) {
                match r {
                    Ok(l) => {
                        let checks: [Option<Check>; 6] = [
                            l.negatron,
                            Some(l.positron),
                            Some(l.megatron),
                            Some(l.megatron_identity),
                            Some(l.glissando),
                            Some(l.sign_rule),
                        ];
                        for (acc, c) in accs.iter_mut().zip(checks) {
                            if let Some(c) = c {
                                acc.push_flag(c.pass, c.slack, Some(p.0));
                            }
                        }
                    }
                    Err(e) => accs[1].error(&e, Some(p.0)),
                }
            }
            suite.add_all(accs);
        }
        Err(e) => suite.setup_error(&name, &e),
    }

    let fs = resolve_metric("fubini_study")?.metric;
    let fs_pts = sample_points(&fs, params);
    let results = eval_points(&fs_pts, |p| {
        let sp = CurvatureJets::at(&fs, p, 0, params.orientation)?.spectrum();
        Ok(megatron(&sp).0.abs() / sp.norm2)
    });
    let mut equality = Acc::at_most("fubini_study/megatron_equality", 1e-9);
    for (p, r) in fs_pts.iter().zip(results) {
        match r {
            Ok(v) => equality.push(v, Some(p.0)),
            Err(e) => equality.error(&e, Some(p.0)),
        }
    }
    suite.add(equality);

    let mut both_false = Acc::at_most("synthetic/glissando_both_false", 0.0)
        .detail(json!({ "spectrum": [4, 3, -7] }));
    let t = threshold_check(&weyl_spectrum(&[
        [4.0, 0.0, 0.0],
        [0.0, 3.0, 0.0],
        [0.0, 0.0, -7.0],
    ]))?;
    both_false.push_flag(!t.lhs && !t.rhs && t.agree, t.ratio - threshold(), None);
    suite.add(both_false);

    Ok(suite.finish(
        "lemmas",
        json!({ "metric": name, "points": params.points, "tolerance": Num(LEMMA_TOL) }),
    ))
}

fn oracle(params: &SuiteParams) -> Result<SuiteOut> {
    let n = params.samples.unwrap_or(DEFAULT_ORACLE_SAMPLES);
    let blocks: Vec<_> = (0..block_count(n))
        .into_par_iter()
        .map(|b| oracle_block(params.seed, n, b))
        .collect();
    let report = oracle_report(params.seed, merge_oracle(blocks));
    let mut suite = SuiteBuilder::default();
    let examples: Vec<_> = report
        .outcome
        .counterexamples
        .iter()
        .map(
            |c| json!({ "sample": c.sample, "check": c.check, "eigenvalues": nums(c.eigenvalues) }),
        )
        .collect();
    let mut counter = Acc::at_most("spectra/counterexamples", 0.0).detail(json!({
        "samples": report.outcome.samples,
        "boundary_excluded": report.outcome.boundary_excluded,
        "counterexamples": examples,
    }));
    counter.push(report.outcome.counterexamples.len() as f64, None);
    if let Some(c) = report.outcome.counterexamples.first() {
        counter.first = Some(Counterexample {
            check: format!("spectra/{}", c.check),
            point: None,
            value: Some(Num(c.sample as f64)),
            error: Some(format!("eigenvalues {:?}", c.eigenvalues)),
        });
    }
    let mut monotone = Acc::at_least("ratio_function/monotone", 1.0);
    monotone.push(if report.ratio_monotone { 1.0 } else { 0.0 }, None);
    let mut witness =
        Acc::at_most("boundary_witness/offset", 1e-12).detail(json!({ "spectrum": [4, 1, -5] }));
    witness.push_flag(
        report.boundary_witness_flagged && report.boundary_witness_offset.abs() <= 1e-12,
        report.boundary_witness_offset.abs(),
        None,
    );
    suite.add_all([counter, monotone, witness]);
    Ok(suite.finish(
        "oracle",
        json!({ "samples": n, "seed": params.seed, "threshold": Num(threshold()) }),
    ))
}

fn estimate<F>(
    m: &MetricField,
    integrand: &F,
    n: u64,
    seed: u64,
) -> std::result::Result<QuadratureEstimate, CoreError>
where
    F: Fn(&ChartPoint) -> std::result::Result<f64, CoreError> + Sync,
{
    let blocks = (0..block_count(n))
        .into_par_iter()
        .map(|b| quadrature_block(m, integrand, seed, n, b))
        .collect::<std::result::Result<Vec<_>, _>>()?;
    combine_blocks(&blocks, seed)
}

fn quadrature_check(
    name: &str,
    expected: f64,
    est: std::result::Result<QuadratureEstimate, CoreError>,
    sigmas: f64,
) -> Acc {
    match est {
        Ok(q) => {
            let z = if q.stderr > 0.0 {
                (q.value - expected).abs() / q.stderr
            } else {
                (q.value - expected).abs()
            };
            let mut acc = Acc::at_most(name, sigmas).detail(json!({
                "estimate": Num(q.value),
                "stderr": Num(q.stderr),
                "expected": Num(expected),
                "samples": q.samples,
                "seed": q.seed,
            }));
            acc.push(z, None);
            acc
        }
        Err(e) => {
            let mut acc = Acc::at_most(name, sigmas);
            acc.error(&e, None);
            acc
        }
    }
}

fn quadrature(params: &SuiteParams) -> Result<SuiteOut> {
    let n = params.samples.unwrap_or(DEFAULT_QUADRATURE_SAMPLES);
    let sigmas = params.tol.unwrap_or(3.0);
    let seed = params.seed;
    let s4 = resolve_metric("round_s4")?.metric;
    let fs = resolve_metric("fubini_study")?.metric;
    let s4_est = estimate(&s4, &scalar_curvature_density(&s4), n, seed);
    let sig_est = estimate(&fs, &signature_density(&fs, Orientation::Standard), n, seed);
    let unit_box = (*resolve_metric("flat")?.metric)
        .clone()
        .with_domain(ChartDomain::new([[0.0, 1.0]; 4])?);
    let unit_est = estimate(&unit_box, &|_: &ChartPoint| Ok(1.0), n.min(10_000), seed);
    let mut suite = SuiteBuilder::default();
    suite.add(quadrature_check(
        "round_s4/total_scalar_curvature",
        32.0 * PI * PI,
        s4_est,
        sigmas,
    ));
    suite.add(quadrature_check(
        "fubini_study/signature",
        1.0,
        sig_est,
        sigmas,
    ));
    let mut unit = Acc::at_most("flat/unit_box_volume", 1e-12);
    match unit_est {
        Ok(q) => unit.push((q.value - 1.0).abs(), None),
        Err(e) => unit.error(&e, None),
    }
    suite.add(unit);
    Ok(suite.finish(
        "quadrature",
        json!({ "samples": n, "seed": seed, "stderr_multiple": Num(sigmas) }),
    ))
}

fn pipeline(params: &SuiteParams) -> Result<SuiteOut> {
    let tol = params.tol.unwrap_or(1e-8);
    let opts = pipeline_options(params);
    let direct = metric_list(
        params,
        &[
            "fubini_study",
            "s2xs2",
            "s2xs2_unequal:1:2",
            "fs_perturbed:0.05:7",
        ],
    );
    let mut suite = SuiteBuilder::default();
    for name in &direct {
        let h = resolve_metric(name)?.metric;
        let g = rescale_to_g(h.clone(), &opts);
        let pts = sample_points(&h, params);
        let results = eval_points(&pts, |p| analyze_point(&h, &g, p, &opts));
        let mut af = Acc::at_most(format!("{name}/alpha_g_f"), tol);
        let mut det = Acc::at_least(format!("{name}/det_positive"), 0.0);
        for (p, r) in pts.iter().zip(results) {
            match r {
                Ok(r) => {
                    af.push((r.alpha_g_f - 1.0).abs(), Some(p.0));
                    det.push_flag(
                        r.classification.sign == DeterminantSign::Positive,
                        r.spectrum.det,
                        Some(p.0),
                    );
                }
                Err(e) => af.error(&e, Some(p.0)),
            }
        }
        suite.add_all([af, det]);
    }

    let sources: Vec<String> = match &params.metric {
        Some(m) => vec![m.clone()],
        None => vec![PERTURBED.into(), "s2xs2_unequal:1:2".into()],
    };
    for src in &sources {
        let g0 = resolve_metric(src)?.metric;
        if g0.kahler_form().is_none() {
            continue;
        }
        let label = format!("derdzinski({src})");
        let h = match derdzinski(g0.clone(), DERDZINSKI_SCAN) {
            Ok(h) => Arc::new(h),
            Err(e) => {
                suite.setup_error(&label, &e);
                continue;
            }
        };
        let g = rescale_to_g(h.clone(), &opts);
        let pts = sample_points(&g0, params);
        let results = eval_points(&pts, |p| analyze_point(&h, &g, p, &opts));
        let mut af = Acc::at_most(format!("{label}/alpha_g_f"), tol);
        let mut sg = Acc::at_most(format!("{label}/s_g_over_6alpha_g"), 1e-6);
        let mut kr = Acc::at_most(format!("{label}/kahler_residual"), 1e-6);
        for (p, r) in pts.iter().zip(results) {
            match r {
                Ok(r) => {
                    af.push((r.alpha_g_f - 1.0).abs(), Some(p.0));
                    sg.push(
                        (r.s_g - 6.0 * r.alpha_g).abs() / (6.0 * r.alpha_g).abs(),
                        Some(p.0),
                    );
                    kr.push(r.kahler_residual, Some(p.0));
                }
                Err(e) => af.error(&e, Some(p.0)),
            }
        }
        suite.add_all([af, sg, kr]);
    }
    Ok(suite.finish(
        "pipeline",
        json!({ "metrics": direct, "kahler_sources": sources, "points": params.points, "tolerance": Num(tol) }),
    ))
}

fn roundtrip(params: &SuiteParams) -> Result<SuiteOut> {
    let tol = params.tol.unwrap_or(1e-6);
    let name = params.metric.clone().unwrap_or_else(|| PERTURBED.into());
    let opts = pipeline_options(params);
    let g = resolve_metric(&name)?.metric;
    let mut suite = SuiteBuilder::default();
    let h = match derdzinski(g.clone(), DERDZINSKI_SCAN) {
        Ok(h) => Arc::new(h),
        Err(e) => {
            suite.setup_error(&name, &e);
            return Ok(suite.finish("roundtrip", json!({ "metric": name })));
        }
    };
    let g_prime = rescale_to_g(h.clone(), &opts);
    let expected = roundtrip_ratio();
    let pts = sample_points(&g, params);
    let results = eval_points(&pts, |p| {
        let div = divergence_weyl(&h, p, params.orientation)?;
        let sp = CurvatureJets::at(&h, p, 0, params.orientation)?.spectrum();
        let rt = roundtrip_at(&g, &g_prime, p, &opts)?;
        Ok((div.relative, sp.det, rt))
    });
    let mut div = Acc::at_most(format!("{name}/derdzinski_divergence"), tol);
    let mut det = Acc::at_least(format!("{name}/derdzinski_det_positive"), 0.0);
    let mut ratio = Acc::at_most(format!("{name}/ratio_deviation"), tol)
        .detail(json!({ "expected": Num(expected) }));
    let mut kr = Acc::at_most(format!("{name}/kahler_residual"), tol);
    for (p, r) in pts.iter().zip(results) {
        match r {
            Ok((d, dt, rt)) => {
                div.push(d, Some(p.0));
                det.push_flag(dt > 0.0, dt, Some(p.0));
                ratio.push(
                    (rt.ratio_min - expected)
                        .abs()
                        .max((rt.ratio_max - expected).abs()),
                    Some(p.0),
                );
                kr.push(rt.kahler_residual, Some(p.0));
            }
            Err(e) => ratio.error(&e, Some(p.0)),
        }
    }
    suite.add_all([div, det, ratio, kr]);
    Ok(suite.finish(
        "roundtrip",
        json!({ "metric": name, "points": params.points, "expected_ratio": Num(expected), "tolerance": Num(tol) }),
    ))
}

/// Runs one suite by name.
pub fn run_suite(name: &str, params: &SuiteParams) -> Result<SuiteOut> {
    match name {
        "einstein" => einstein(params),
        "weighted" => weighted(params),
        "weitzenboeck" => weitzenboeck(params),
        "lemmas" => lemmas(params),
        "oracle" => oracle(params),
        "quadrature" => quadrature(params),
        "pipeline" => pipeline(params),
        "roundtrip" => roundtrip(params),
        other => Err(Failure::Input(format!(
            "unknown suite `{other}`; expected one of {SUITES:?} or all"
        ))),
    }
}

/// Runs `suite` (or every suite for `"all"`) and assembles the report.
pub fn verify(suite: &str, params: &SuiteParams) -> Result<VerifyReport> {
    let names: Vec<&str> = if suite == "all" {
        SUITES.to_vec()
    } else {
        vec![suite]
    };
    let suites = names
        .iter()
        .map(|n| run_suite(n, params))
        .collect::<Result<Vec<_>>>()?;
    Ok(VerifyReport {
        schema: SCHEMA,
        tool: TOOL,
        command: "verify",
        conventions: conventions(params.orientation),
        parameters: json!({
            "suite": suite,
            "seed": params.seed,
            "samples": params.samples,
            "tol": params.tol.map(Num),
            "metric": params.metric,
            "points": params.points,
        }),
        pass: suites.iter().all(|s| s.pass),
        suites,
    })
}
