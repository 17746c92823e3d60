use weylscope_core::catalog::{catalog_get, list_catalog};
use weylscope_core::geometry::{christoffel, covariant_derivative_with, ChartPoint, LocalGeometry};
use weylscope_core::verify::divergence_weyl;
use weylscope_core::weyl::{CurvatureJets, DeterminantSign, Orientation};

const TOL: f64 = 1e-8;

fn points(name: &str, seed: u64) -> Vec<ChartPoint> {
    let entry = catalog_get(name).unwrap();
    entry.metric.domain().random_points(100, seed, 0.0)
}

#[test]
fn constant_curvature_entries_reproduce_their_ground_truth() {
    for entry in list_catalog().unwrap() {
        let truth = &entry.truth;
        let Some(s_true) = truth.s else { continue };
        for p in points(&entry.name, 11) {
            let cj = CurvatureJets::at(&entry.metric, &p, 0, Orientation::Standard).unwrap();
            let s = cj.scalar_curvature().value();
            assert!(
                (s - s_true).abs() <= TOL * s_true.abs().max(1.0),
                "{}: s = {s} at {:?}",
                entry.name,
                p.0
            );
            if let Some(w) = truth.wplus {
                let ev = cj.spectrum().eigenvalues();
                for i in 0..3 {
                    assert!(
                        (ev[i] - w[i]).abs() <= TOL,
                        "{}: W+ {ev:?} vs {w:?}",
                        entry.name
                    );
                }
                let det = ev[0] * ev[1] * ev[2];
                let expected = w[0] * w[1] * w[2];
                assert!(
                    (det - expected).abs() <= TOL,
                    "{}: det {det} vs {expected}",
                    entry.name
                );
            }
        }
    }
}

#[test]
fn einstein_entries_have_constant_ricci_ratio() {
    for entry in list_catalog().unwrap() {
        let Some(lambda) = entry.truth.einstein else {
            continue;
        };
        for p in points(&entry.name, 12) {
            let mj = entry.metric.jets(&p, 2).unwrap();
            let geo = LocalGeometry::new(&mj, 0).unwrap();
            let ric = geo.ricci();
            let g = mj.values();
            let scale = g.iter().flatten().fold(0.0f64, |m, v| m.max(v.abs()));
            for a in 0..4 {
                for b in 0..4 {
                    let dev = (ric[a][b].value() - lambda * g[a][b]).abs();
                    assert!(
                        dev <= TOL * scale.max(1.0),
                        "{}: Ric - λg = {dev:e} at {:?}",
                        entry.name,
                        p.0
                    );
                }
            }
        }
    }
}

#[test]
fn einstein_entries_have_harmonic_self_dual_weyl() {
    for name in ["round_s4", "s2xs2", "fubini_study", "flat"] {
        for p in points(name, 13).into_iter().take(20) {
            let m = catalog_get(name).unwrap().metric;
            let r = divergence_weyl(&m, &p, Orientation::Standard).unwrap();
            assert!(
                r.residual <= TOL * r.scale.max(1.0),
                "{name}: δW+ = {:e}",
                r.residual
            );
        }
    }
}

#[test]
fn kahler_entries_have_parallel_kahler_form() {
    for entry in list_catalog().unwrap() {
        if !entry.truth.kahler {
            continue;
        }
        let form = entry
            .metric
            .kahler_form()
            .expect("Kähler entries carry a form");
        for p in points(&entry.name, 14) {
            let gamma = christoffel(&entry.metric, &p, 0).unwrap();
            let omega = form.jets(&p, 1).unwrap();
            let nabla = covariant_derivative_with(&gamma, &omega);
            let scale = omega.values().iter().fold(0.0f64, |m, v| m.max(v.abs()));
            let worst = nabla.values().iter().fold(0.0f64, |m, v| m.max(v.abs()));
            assert!(
                worst <= TOL * scale.max(1.0),
                "{}: |∇ω| = {worst:e} at {:?}",
                entry.name,
                p.0
            );
        }
    }
}

#[test]
fn determinant_signs_match_ground_truth() {
    for entry in list_catalog().unwrap() {
        for p in points(&entry.name, 15).into_iter().take(25) {
            let cj = CurvatureJets::at(&entry.metric, &p, 0, Orientation::Standard).unwrap();
            let sp = cj.spectrum();
            let band = 1e-9 * cj.operator_scale().max(1.0);
            let sign = if sp.det.abs() <= band.powi(3).max(1e-27) {
                DeterminantSign::ZeroBand
            } else if sp.det > 0.0 {
                DeterminantSign::Positive
            } else {
                DeterminantSign::Negative
            };
            assert_eq!(
                sign, entry.truth.det_sign,
                "{} at {:?}: det = {:e}",
                entry.name, p.0, sp.det
            );
        }
    }
}

#[test]
fn flat_entry_has_no_curvature() {
    let m = catalog_get("flat").unwrap().metric;
    for p in points("flat", 16) {
        let cj = CurvatureJets::at(&m, &p, 0, Orientation::Standard).unwrap();
        assert!(cj.geometry.riemann.values().iter().all(|v| *v == 0.0));
    }
}

#[test]
fn perturbed_entries_validate_parameters() {
    assert!(catalog_get("fs_perturbed:0.2:1").is_err());
    assert!(catalog_get("s2xs2_unequal:0:1").is_err());
    assert!(catalog_get("s2xs2_unequal(-1, 2)").is_err());
    assert!(catalog_get("nosuch").is_err());
    let a = catalog_get("s2xs2_unequal(1, 2)").unwrap();
    let b = catalog_get("s2xs2_unequal:1:2").unwrap();
    assert_eq!(a.name, b.name);
    assert_eq!(a.truth.s, Some(2.5));
    assert_eq!(a.truth.einstein, None);
}

#[test]
fn perturbed_fubini_study_stays_positive_for_every_seed_tried() {
    for seed in 0..4 {
        let e = catalog_get(&format!("fs_perturbed:0.05:{seed}")).unwrap();
        let p = ChartPoint([0.2, -0.3, 0.1, 0.4]);
        let s = CurvatureJets::at(&e.metric, &p, 0, Orientation::Standard)
            .unwrap()
            .scalar_curvature()
            .value();
        assert!(s > 0.0);
    }
}
