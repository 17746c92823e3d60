#![allow(clippy::needless_range_loop)]

use std::sync::Arc;

use weylscope_core::expr::{fd_jet, jet_eval, parse_expression};
use weylscope_core::forms::StarContext;
use weylscope_core::geometry::{
    christoffel, covariant_derivative_with, metric_tensor, packed_index, ChartDomain, ChartPoint,
    LocalGeometry, MetricField, PointCurvature, TensorJet,
};
use weylscope_core::jet::multi_indices;
use weylscope_core::linalg::{mat4j_constant, Mat4};
use weylscope_core::weyl::{
    curvature_symmetry_residual, decompose_curvature, lambda_bases, weyl_spectrum, CurvatureJets,
    Orientation,
};

const COMPONENTS: [&str; 10] = [
    "1 + 0.3*x1^2 + 0.1*sin(x2)",
    "0.1*x2*x3",
    "0.05*exp(x0)",
    "0",
    "2 + 0.2*cos(x0*x3)",
    "0",
    "0.1*x0",
    "1 + 0.1*x3^2",
    "0.2*x1*x0",
    "1.5 + 0.1*atan(x2)",
];

fn generic() -> Arc<MetricField> {
    Arc::new(MetricField::from_components("generic", &COMPONENTS, ChartDomain::cube(0.5)).unwrap())
}

fn sample_points() -> Vec<ChartPoint> {
    ChartDomain::cube(0.5).random_points(8, 3, 0.05)
}

fn max_abs(v: &[f64]) -> f64 {
    v.iter().fold(0.0f64, |m, x| m.max(x.abs()))
}

/// Riemann tensor from central differences of the metric components alone,
/// assembled from Christoffel symbols of the first kind.
fn fd_riemann(p: &[f64; 4]) -> Vec<f64> {
    let exprs: Vec<_> = COMPONENTS
        .iter()
        .map(|s| parse_expression(s).unwrap())
        .collect();
    let g_at = |q: &[f64; 4]| -> Mat4 {
        std::array::from_fn(|a| std::array::from_fn(|b| exprs[packed_index(a, b)].eval(q).unwrap()))
    };
    let h = 1e-3;
    let shift = |q: &[f64; 4], v: usize, d: f64| {
        let mut r = *q;
        r[v] += d;
        r
    };
    let dg = |q: &[f64; 4], e: usize| -> Mat4 {
        let (gp, gm) = (g_at(&shift(q, e, h)), g_at(&shift(q, e, -h)));
        std::array::from_fn(|a| std::array::from_fn(|b| (gp[a][b] - gm[a][b]) / (2.0 * h)))
    };
    let d2g = |e: usize, f: usize| -> Mat4 {
        let (pp, pm) = (shift(&shift(p, e, h), f, h), shift(&shift(p, e, h), f, -h));
        let (mp, mm) = (
            shift(&shift(p, e, -h), f, h),
            shift(&shift(p, e, -h), f, -h),
        );
        let (a1, a2, a3, a4) = (g_at(&pp), g_at(&pm), g_at(&mp), g_at(&mm));
        std::array::from_fn(|a| {
            std::array::from_fn(|b| (a1[a][b] - a2[a][b] - a3[a][b] + a4[a][b]) / (4.0 * h * h))
        })
    };
    let g = g_at(p);
    let ginv = invert(&g);
    let d1: [Mat4; 4] = std::array::from_fn(|e| dg(p, e));
    let first = |d: usize, b: usize, c: usize| 0.5 * (d1[b][d][c] + d1[c][d][b] - d1[d][b][c]);
    let second: Vec<Vec<Mat4>> = (0..4)
        .map(|e| (0..4).map(|f| d2g(e, f)).collect())
        .collect();
    let mut r = vec![0.0; 256];
    for a in 0..4 {
        for b in 0..4 {
            for c in 0..4 {
                for d in 0..4 {
                    let mut v = 0.5
                        * (second[b][c][a][d] + second[a][d][b][c]
                            - second[a][c][b][d]
                            - second[b][d][a][c]);
                    for e in 0..4 {
                        for f in 0..4 {
                            v += ginv[e][f]
                                * (first(e, b, c) * first(f, a, d)
                                    - first(e, b, d) * first(f, a, c));
                        }
                    }
                    r[((a * 4 + b) * 4 + c) * 4 + d] = v;
                }
            }
        }
    }
    r
}

fn invert(m: &Mat4) -> Mat4 {
    let mut a = *m;
    let mut inv: Mat4 =
        std::array::from_fn(|i| std::array::from_fn(|j| if i == j { 1.0 } else { 0.0 }));
    for c in 0..4 {
        let p = (c..4)
            .max_by(|&x, &y| a[x][c].abs().total_cmp(&a[y][c].abs()))
            .unwrap();
        a.swap(c, p);
        inv.swap(c, p);
        let d = a[c][c];
        for k in 0..4 {
            a[c][k] /= d;
            inv[c][k] /= d;
        }
        for r in 0..4 {
            if r != c {
                let f = a[r][c];
                for k in 0..4 {
                    a[r][k] -= f * a[c][k];
                    inv[r][k] -= f * inv[c][k];
                }
            }
        }
    }
    inv
}

#[test]
fn riemann_matches_finite_difference_oracle() {
    let g = generic();
    for p in sample_points() {
        let jet = LocalGeometry::new(&g.jets(&p, 2).unwrap(), 0)
            .unwrap()
            .riemann
            .values();
        let fd = fd_riemann(&p.0);
        let scale = max_abs(&jet);
        let err = jet
            .iter()
            .zip(&fd)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        assert!(
            err <= 1e-5 * scale.max(1.0),
            "fd mismatch {err:e} at {:?}",
            p.0
        );
    }
}

#[test]
fn pointwise_and_jet_curvature_agree() {
    let g = generic();
    for p in sample_points() {
        let jet = LocalGeometry::new(&g.jets(&p, 2).unwrap(), 0)
            .unwrap()
            .riemann
            .values();
        let pc = PointCurvature::at(&g, &p).unwrap();
        let err = jet
            .iter()
            .zip(&pc.riemann)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        assert!(err <= 1e-12 * max_abs(&jet).max(1.0));
        for orientation in [Orientation::Standard, Orientation::Reversed] {
            let a = decompose_curvature(&pc.g, &pc.riemann, orientation).unwrap();
            let b = CurvatureJets::at(&g, &p, 0, orientation)
                .unwrap()
                .decomposition();
            let err = a
                .operator
                .iter()
                .flatten()
                .zip(b.operator.iter().flatten())
                .map(|(x, y)| (x - y).abs());
            assert!(err.fold(0.0, f64::max) <= 1e-12);
            assert!((a.s - b.s).abs() <= 1e-12);
        }
    }
}

#[test]
fn algebraic_symmetries_and_first_bianchi_hold() {
    let g = generic();
    for p in sample_points() {
        let r = LocalGeometry::new(&g.jets(&p, 2).unwrap(), 0)
            .unwrap()
            .riemann
            .values();
        assert!(curvature_symmetry_residual(&r) <= 1e-12);
    }
}

#[test]
fn second_bianchi_identity_holds() {
    let g = generic();
    for p in sample_points().into_iter().take(4) {
        let geo = LocalGeometry::new(&g.jets(&p, 3).unwrap(), 1).unwrap();
        let nabla = geo.covariant_derivative(&geo.riemann);
        let at =
            |e: usize, a: usize, b: usize, c: usize, d: usize| nabla.get(&[e, a, b, c, d]).value();
        let scale = max_abs(&nabla.values());
        let mut worst = 0.0f64;
        for a in 0..4 {
            for b in 0..4 {
                for c in 0..4 {
                    for d in 0..4 {
                        for e in 0..4 {
                            let cyc = at(e, a, b, c, d) + at(c, a, b, d, e) + at(d, a, b, e, c);
                            worst = worst.max(cyc.abs());
                        }
                    }
                }
            }
        }
        assert!(worst <= 1e-11 * scale.max(1.0), "second Bianchi {worst:e}");
    }
}

#[test]
fn metric_is_parallel() {
    let g = generic();
    for p in sample_points() {
        let gamma = christoffel(&g, &p, 0).unwrap();
        let gt = metric_tensor(&g, &p, 1).unwrap();
        let nabla = covariant_derivative_with(&gamma, &gt);
        assert!(max_abs(&nabla.values()) <= 1e-13);
    }
}

#[test]
fn operator_blocks_reassemble_the_curvature() {
    let g = generic();
    let p = ChartPoint([0.1, -0.2, 0.3, 0.05]);
    let pc = PointCurvature::at(&g, &p).unwrap();
    let dec = decompose_curvature(&pc.g, &pc.riemann, Orientation::Standard).unwrap();
    let basis: Vec<&Mat4> = dec
        .lambda_plus
        .iter()
        .chain(dec.lambda_minus.iter())
        .collect();
    let mut worst = 0.0f64;
    for a in 0..4 {
        for b in 0..4 {
            for c in 0..4 {
                for d in 0..4 {
                    let mut v = 0.0;
                    for i in 0..6 {
                        for j in 0..6 {
                            v += dec.operator[i][j] * basis[i][a][b] * basis[j][c][d];
                        }
                    }
                    worst = worst.max((v - pc.riemann[((a * 4 + b) * 4 + c) * 4 + d]).abs());
                }
            }
        }
    }
    assert!(worst <= 1e-12, "reassembly error {worst:e}");
    assert!((dec.s - dec.s_from_blocks).abs() <= 1e-12);
    let minus_trace = dec.operator[3][3] + dec.operator[4][4] + dec.operator[5][5];
    assert!((4.0 * minus_trace - dec.s).abs() <= 1e-12);
}

#[test]
fn reversing_orientation_swaps_the_weyl_halves() {
    let g = generic();
    let p = ChartPoint([0.2, 0.1, -0.1, 0.3]);
    let a = CurvatureJets::at(&g, &p, 0, Orientation::Standard)
        .unwrap()
        .decomposition();
    let b = CurvatureJets::at(&g, &p, 0, Orientation::Reversed)
        .unwrap()
        .decomposition();
    let (sa, sb) = (
        weyl_spectrum(&a.wplus).eigenvalues(),
        weyl_spectrum(&b.wminus).eigenvalues(),
    );
    for i in 0..3 {
        assert!((sa[i] - sb[i]).abs() <= 1e-12);
    }
}

#[test]
fn lambda_plus_forms_are_self_dual_and_orthonormal() {
    let g = generic();
    let p = ChartPoint([0.3, -0.1, 0.2, -0.25]);
    let gv = g.jets(&p, 0).unwrap().values();
    let ginv = invert(&gv);
    let [plus, minus] = lambda_bases(&gv, Orientation::Standard).unwrap();
    let ctx = StarContext::new(&mat4j_constant(&gv, 0), Orientation::Standard).unwrap();
    let as_tensor =
        |m: &Mat4| TensorJet::from_fn(2, |i| weylscope_core::Jet::constant(m[i[0]][i[1]], 0));
    let inner = |x: &Mat4, y: &Mat4| {
        let mut acc = 0.0;
        for a in 0..4 {
            for b in 0..4 {
                for c in 0..4 {
                    for d in 0..4 {
                        acc += 0.5 * x[a][b] * ginv[a][c] * ginv[b][d] * y[c][d];
                    }
                }
            }
        }
        acc
    };
    for (forms, sign) in [(&plus, 1.0), (&minus, -1.0)] {
        for i in 0..3 {
            let star = ctx.star(&as_tensor(&forms[i])).values();
            let flat: Vec<f64> = forms[i].iter().flatten().copied().collect();
            let err = star
                .iter()
                .zip(&flat)
                .map(|(s, f)| (s - sign * f).abs())
                .fold(0.0, f64::max);
            assert!(err <= 1e-12);
            for j in 0..3 {
                let expected = if i == j { 1.0 } else { 0.0 };
                assert!((inner(&forms[i], &forms[j]) - expected).abs() <= 1e-12);
            }
        }
    }
    for i in 0..3 {
        for j in 0..3 {
            assert!(inner(&plus[i], &minus[j]).abs() <= 1e-12);
        }
    }
}

#[test]
fn exact_jets_match_richardson_finite_differences() {
    let sources = [
        "exp(x0*x1) + sin(x2)*cos(x3)",
        "log(2 + x0^2 + x3) * sqrt(1 + x1^2)",
        "atan(x0 - 2*x2) / (1 + x1^2 + x3^2)^(3/2)",
        "(1 + x0 + x1*x2)^(-2) + x3^5",
    ];
    let p = [0.3, -0.4, 0.2, 0.5];
    for src in sources {
        let e = parse_expression(src).unwrap();
        let exact = jet_eval(&e, &p, 2).unwrap();
        let fd = fd_jet(&e, &p, 2, 1e-2).unwrap();
        for m in multi_indices(2) {
            let (a, b) = (exact.partial(m), fd.partial(m));
            assert!(
                (a - b).abs() <= 1e-6 * a.abs().max(1.0),
                "{src}: ∂^{m:?} {a} vs {b}"
            );
        }
    }
}
