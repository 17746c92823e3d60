use std::sync::Arc;

use weylscope_core::catalog::catalog_get;
use weylscope_core::geometry::{
    conformal_rescale, ChartDomain, ChartPoint, MetricField, ScalarField,
};
use weylscope_core::pipeline::{
    analyze_point, derdzinski, kahler_residual, rescale_to_g, roundtrip, roundtrip_ratio,
    PipelineOptions,
};
use weylscope_core::verify::lemma_suite;
use weylscope_core::weyl::{CurvatureJets, Orientation};
use weylscope_core::Error;

const FACTOR: &str = "1 + 0.1*exp(-(x0^2 + x1^2 + x2^2 + x3^2)) + 0.05*x0*x1";

fn entry(name: &str) -> Arc<MetricField> {
    catalog_get(name).unwrap().metric
}

fn points(n: usize, seed: u64) -> Vec<ChartPoint> {
    ChartDomain::cube(0.8).random_points(n, seed, 0.0)
}

#[test]
fn self_dual_weyl_eigenvalues_scale_with_the_conformal_factor() {
    let h = entry("fs_perturbed:0.03:2");
    let f = ScalarField::parse(FACTOR).unwrap();
    let g = conformal_rescale(h.clone(), f.clone());
    for p in points(10, 21) {
        let fv = f.jets(&p, 0).unwrap().value();
        for orientation in [Orientation::Standard, Orientation::Reversed] {
            let sh = CurvatureJets::at(&h, &p, 0, orientation)
                .unwrap()
                .spectrum();
            let sg = CurvatureJets::at(&g, &p, 0, orientation)
                .unwrap()
                .spectrum();
            let (eh, eg) = (sh.eigenvalues(), sg.eigenvalues());
            for i in 0..3 {
                assert!(
                    (eg[i] - fv * fv * eh[i]).abs() <= 1e-9 * eh[0].abs().max(1.0),
                    "{eg:?} vs f²·{eh:?}"
                );
            }
            assert!((sg.normalized_det() - sh.normalized_det()).abs() <= 1e-9);
        }
    }
}

#[test]
fn rescaling_a_harmonic_metric_gives_a_kahler_metric() {
    let h = Arc::new(derdzinski(entry("fs_perturbed:0.03:2"), 5).unwrap());
    let opts = PipelineOptions::default();
    let g = rescale_to_g(h.clone(), &opts);
    for p in points(3, 22) {
        let r = analyze_point(&h, &g, &p, &opts).unwrap();
        assert!((r.alpha_g_f - 1.0).abs() <= 1e-9, "α_g·f = {}", r.alpha_g_f);
        assert!(r.kahler_residual <= 1e-6, "|∇ω| = {:e}", r.kahler_residual);
        let lemmas = lemma_suite(&g, &p, &opts).unwrap();
        assert!(lemmas.all_pass(), "{lemmas:?}");
    }
}

#[test]
fn roundtrip_of_fubini_study_recovers_a_constant_multiple() {
    let g = entry("fubini_study");
    let report = roundtrip(g, &points(3, 23), 5, &PipelineOptions::default()).unwrap();
    assert!((report.expected - roundtrip_ratio()).abs() == 0.0);
    assert!((roundtrip_ratio() - 6f64.powf(-2.0 / 3.0)).abs() <= 1e-15);
    assert!(
        report.max_deviation <= 1e-8,
        "deviation {:e}",
        report.max_deviation
    );
    assert!(
        report.max_residual <= 1e-6,
        "residual {:e}",
        report.max_residual
    );
}

#[test]
fn derdzinski_rejects_non_positive_scalar_curvature() {
    let g = Arc::new(
        MetricField::from_kahler_potential(
            "bad",
            "x0^2 + x1^2 + x2^2 + x3^2 + (x0^2 + x1^2)^2",
            ChartDomain::cube(1.0),
        )
        .unwrap(),
    );
    let err = derdzinski(g, 5).unwrap_err();
    assert!(matches!(err, Error::NonPositive { .. }), "{err}");
    assert!(err.is_math_domain());
}

#[test]
fn derdzinski_requires_a_kahler_form() {
    let err = derdzinski(entry("round_s4"), 3).unwrap_err();
    assert!(matches!(err, Error::Precondition(_)), "{err}");
}

#[test]
fn non_kahler_metric_has_a_large_residual() {
    let g = MetricField::from_components(
        "warped",
        &[
            "1 + 0.3*x1^2 + 0.2*sin(x2)",
            "0.1*x2*x3",
            "0",
            "0",
            "2 + 0.2*cos(x0*x3)",
            "0",
            "0.1*x0",
            "1 + 0.3*x3^2",
            "0",
            "1.5",
        ],
        ChartDomain::cube(0.5),
    )
    .unwrap();
    let r = kahler_residual(
        &g,
        &ChartPoint([0.1, 0.2, -0.3, 0.25]),
        &PipelineOptions::default(),
    )
    .unwrap();
    assert!(r.norm > 1e-2, "residual {:e}", r.norm);
}

#[test]
fn conformally_flat_metric_has_no_simple_top_eigenvalue() {
    let h = entry("round_s4");
    let opts = PipelineOptions::default();
    let g = rescale_to_g(h.clone(), &opts);
    let err = analyze_point(&h, &g, &ChartPoint([0.1, 0.2, 0.3, 0.4]), &opts).unwrap_err();
    assert!(matches!(err, Error::SpectralGap { .. }));
    assert!(
        err.to_string()
            .starts_with("top eigenvalue not simple: W+ = 0"),
        "{err}"
    );
}
