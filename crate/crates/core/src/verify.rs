//! Residuals of curvature identities, the pointwise spectral inequalities, a
//! brute-force oracle over random Weyl spectra and Monte Carlo quadrature.
//!
//! Random streams are organized in blocks: block `b` of a run with seed `s`
//! draws from ChaCha8 seeded with `s` on stream `b`. Results therefore do
//! not depend on how blocks are distributed over threads, as long as blocks
//! are combined in index order.

use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

#[allow(unused_imports)] // inherent methods shadow it when std is linked
use num_traits::Float;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::forms::{two_form_norm_sq, StarContext, TwoFormField};
use crate::geometry::{
    covariant_derivative_with, raise_values, ChartDomain, ChartPoint, MetricField, MetricSource,
    PointCurvature, TensorJet,
};
use crate::jet::Jet;
use crate::linalg::{mat3_vec, mat4j_values, Mat3, Mat4};
use crate::pipeline::{kahler_residual, PipelineOptions};
use crate::weyl::{
    classify_determinant, decompose_curvature, megatron, ratio_function, threshold,
    threshold_check, weyl_spectrum, CurvatureJets, DeterminantSign, Orientation, WeylSpectrum,
};

/// Samples per random block.
pub const BLOCK: u64 = 4096;

/// Generator for block `block` of a run seeded with `seed`.
pub fn block_rng(seed: u64, block: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(block);
    rng
}

/// Number of blocks needed for `n` samples.
pub fn block_count(n: u64) -> u64 {
    n.div_ceil(BLOCK)
}

/// Samples in block `block` of a run of `n`.
pub fn block_len(n: u64, block: u64) -> u64 {
    BLOCK.min(n - block * BLOCK)
}

/// Size of an identity's defect at a point.
#[derive(Debug, Clone, PartialEq)]
pub struct ResidualReport {
    pub identity: String,
    pub point: [f64; 4],
    pub residual: f64,
    /// Norm of the largest term, or a characteristic scale of the identity.
    pub scale: f64,
    /// `residual / scale`, or `residual` when `scale = 0`.
    pub relative: f64,
}

impl ResidualReport {
    fn new(identity: &str, p: &ChartPoint, residual: f64, scale: f64) -> ResidualReport {
        ResidualReport {
            identity: identity.to_string(),
            point: p.0,
            residual,
            scale,
            relative: if scale > 0.0 {
                residual / scale
            } else {
                residual
            },
        }
    }
}

fn tensor_norm(t: &TensorJet, ginv: &Mat4) -> f64 {
    t.norm_sq_value(ginv).max(0.0).sqrt()
}

/// `δ(fW⁺)_bcd = −g^{ae} ∇_e (fW⁺)_abcd` for `f` given as a jet of order ≥ 1
/// (or `f = 1`). The relative residual divides by
/// `max(|∇(fW⁺)|, |fW⁺|·|W⁺|^{1/2}, |f|·|R|^{3/2})` with `|R|` the Frobenius
/// norm of the curvature operator, a scale that stays meaningful when `W⁺` is
/// parallel or vanishes.
fn weighted_divergence_impl(
    g: &MetricField,
    f: Option<&Jet>,
    p: &ChartPoint,
    orientation: Orientation,
    name: &str,
) -> Result<ResidualReport> {
    let cj = CurvatureJets::at(g, p, 1, orientation)?;
    let w = cj.wplus_tensor();
    let t = match f {
        Some(f) => w.scale_by(&f.truncate(1)),
        None => w,
    };
    let nabla = covariant_derivative_with(&cj.geometry.gamma, &t);
    let ginv = mat4j_values(&cj.geometry.ginv);
    let mut div = [0.0; 64];
    for b in 0..4 {
        for c in 0..4 {
            for d in 0..4 {
                let mut acc = 0.0;
                for a in 0..4 {
                    for e in 0..4 {
                        acc += ginv[a][e] * nabla.get(&[e, a, b, c, d]).value();
                    }
                }
                div[(b * 4 + c) * 4 + d] = -acc;
            }
        }
    }
    let raised = raise_values(&div, 3, &ginv);
    let residual = div
        .iter()
        .zip(&raised)
        .map(|(a, b)| a * b)
        .sum::<f64>()
        .max(0.0)
        .sqrt();
    let t0 = t.truncate(0);
    let wnorm = cj.spectrum().norm2.sqrt();
    let fv = f.map_or(1.0, |f| f.value().abs());
    let scale = tensor_norm(&nabla, &ginv)
        .max(tensor_norm(&t0, &ginv) * wnorm.sqrt())
        .max(fv * cj.operator_scale().powf(1.5));
    Ok(ResidualReport::new(name, p, residual, scale))
}

/// `δW⁺` of `g` at `p` (metric order 3).
pub fn divergence_weyl(
    g: &MetricField,
    p: &ChartPoint,
    orientation: Orientation,
) -> Result<ResidualReport> {
    weighted_divergence_impl(g, None, p, orientation, "divergence_weyl")
}

/// The conformal factor `f` of a metric built as `g = f⁻²h`.
pub fn conformal_parts(g: &MetricField) -> Result<(&MetricField, &crate::geometry::ScalarField)> {
    match g.source() {
        MetricSource::Conformal { base, factor } => Ok((base, factor)),
        _ => Err(Error::Precondition(format!(
            "`{}` is not a conformal rescaling",
            g.name()
        ))),
    }
}

/// `δ_g(fW⁺_g)` for `g = f⁻²h`.
pub fn weighted_divergence(
    g: &MetricField,
    p: &ChartPoint,
    orientation: Orientation,
) -> Result<ResidualReport> {
    let (_, factor) = conformal_parts(g)?;
    let f = factor.jets(p, 1)?;
    weighted_divergence_impl(g, Some(&f), p, orientation, "weighted_divergence")
}

/// Residual of `(dd* + d*d)ω = ∇*∇ω − 2W⁺(ω) + (s/3)ω` for a self-dual
/// 2-form field (metric and form order 2). With `project` the field is first
/// replaced by its self-dual part; otherwise a field that is not self-dual
/// at `p` is rejected.
pub fn weitzenboeck_form(
    g: &MetricField,
    omega: &TwoFormField,
    p: &ChartPoint,
    project: bool,
    orientation: Orientation,
) -> Result<ResidualReport> {
    let mj = g.jets(p, 2)?;
    let ctx = StarContext::new(&mj.g, orientation)?;
    let raw = omega.jets(p, 2)?;
    let w = if project {
        ctx.self_dual_part(&raw)
    } else {
        let s = ctx.star(&raw);
        let dev = raw
            .values()
            .iter()
            .zip(s.values())
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        let scale = raw.values().iter().fold(0.0f64, |m, v| m.max(v.abs()));
        if dev > 1e-8 * scale.max(1e-300) {
            return Err(Error::InvalidInput(format!(
                "2-form is not self-dual at {:?} (|*w - w| = {dev:e}); request projection",
                p.0
            )));
        }
        raw
    };
    let lhs = ctx.hodge_laplacian(&w);

    let cj = CurvatureJets::from_metric(&mj, 0, orientation)?;
    let ginv = mat4j_values(&cj.geometry.ginv);
    let nabla = covariant_derivative_with(&cj.geometry.gamma, &w);
    let nabla2 = covariant_derivative_with(&cj.geometry.gamma, &nabla);
    let mut rough = [[0.0; 4]; 4];
    for a in 0..4 {
        for b in 0..4 {
            let mut acc = 0.0;
            for e in 0..4 {
                for f in 0..4 {
                    acc += ginv[e][f] * nabla2.get(&[e, f, a, b]).value();
                }
            }
            rough[a][b] = -acc;
        }
    }
    let w0 = w.truncate(0);
    let coeff: [f64; 3] = core::array::from_fn(|i| cj.bases.plus_coefficients(&w0)[i].value());
    let wp: Mat3 = {
        let wj = cj.wplus();
        core::array::from_fn(|i| core::array::from_fn(|j| wj[i][j].value()))
    };
    let wc = mat3_vec(&wp, &coeff);
    let s = cj.scalar_curvature().value();
    let form = |f: &dyn Fn(usize, usize) -> f64| -> Mat4 {
        core::array::from_fn(|a| core::array::from_fn(|b| f(a, b)))
    };
    let plus: [Mat4; 3] =
        core::array::from_fn(|i| form(&|a, b| cj.bases.plus[i].get(&[a, b]).value()));
    let w_of = form(&|a, b| (0..3).map(|i| wc[i] * plus[i][a][b]).sum::<f64>());
    let wv = form(&|a, b| w0.get(&[a, b]).value());
    let lv = form(&|a, b| lhs.get(&[a, b]).value());
    let rhs = form(&|a, b| rough[a][b] - 2.0 * w_of[a][b] + s / 3.0 * wv[a][b]);
    let diff = form(&|a, b| lv[a][b] - rhs[a][b]);
    let n = |m: &Mat4| two_form_norm_sq(m, &ginv).max(0.0).sqrt();
    let scale = n(&lv)
        .max(n(&rough))
        .max(2.0 * n(&w_of))
        .max((s / 3.0).abs() * n(&wv));
    Ok(ResidualReport::new("weitzenboeck_form", p, n(&diff), scale))
}

/// Result of the weighted Weitzenböck identity for `W⁺`.
#[derive(Debug, Clone, PartialEq)]
pub struct WeylWeitzenboeck {
    /// `δ_h W⁺` at the point, checked before the identity itself.
    pub precondition: ResidualReport,
    pub identity: ResidualReport,
}

/// Residual of the trace-free part of
/// `∇*∇(fW⁺) + (s/2) fW⁺ − 6 f W⁺∘W⁺ + 2 f|W⁺|² I` on Λ⁺ for `g = f⁻²h`
/// (metric order 4), after confirming `δ_h W⁺ ≤ precondition_tol`.
pub fn weitzenboeck_weyl(
    g: &MetricField,
    p: &ChartPoint,
    orientation: Orientation,
    precondition_tol: f64,
) -> Result<WeylWeitzenboeck> {
    let (h, factor) = conformal_parts(g)?;
    let pre = divergence_weyl(h, p, orientation)?;
    if !(pre.relative <= precondition_tol) {
        return Err(Error::Precondition(format!(
            "delta W+ of the base metric is {:e} (relative) at {:?}, above {:e}",
            pre.relative, p.0, precondition_tol
        )));
    }
    let f = factor.jets(p, 2)?;
    let cj = CurvatureJets::at(g, p, 2, orientation)?;
    let t = cj.wplus_tensor().scale_by(&f);
    let nabla = covariant_derivative_with(&cj.geometry.gamma, &t);
    let nabla2 = covariant_derivative_with(&cj.geometry.gamma, &nabla);
    let ginv = mat4j_values(&cj.geometry.ginv);
    let mut rough = alloc::vec![0.0; 256];
    for (idx, out) in rough.iter_mut().enumerate() {
        let mut acc = 0.0;
        for e in 0..4 {
            for ff in 0..4 {
                acc += ginv[e][ff] * nabla2.comps()[(e * 4 + ff) * 256 + idx].value();
            }
        }
        *out = -acc;
    }
    let pairs = [(0, 1), (0, 2), (0, 3), (1, 2), (1, 3), (2, 3)];
    let up: [[f64; 16]; 3] = core::array::from_fn(|i| {
        core::array::from_fn(|ab| cj.bases.plus_up[i].comps()[ab].value())
    });
    let lap: Mat3 = core::array::from_fn(|i| {
        core::array::from_fn(|j| {
            let mut acc = 0.0;
            for &(a, b) in &pairs {
                for &(c, d) in &pairs {
                    acc +=
                        rough[((a * 4 + b) * 4 + c) * 4 + d] * up[i][a * 4 + b] * up[j][c * 4 + d];
                }
            }
            acc
        })
    });
    let wj = cj.wplus();
    let w: Mat3 = core::array::from_fn(|i| core::array::from_fn(|j| wj[i][j].value()));
    let fv = f.value();
    let s = cj.scalar_curvature().value();
    let norm2: f64 = w.iter().flatten().map(|x| x * x).sum();
    let w2: Mat3 =
        core::array::from_fn(|i| core::array::from_fn(|j| (0..3).map(|k| w[i][k] * w[k][j]).sum()));
    let eye = |i: usize, j: usize| if i == j { 1.0 } else { 0.0 };
    let terms: [Mat3; 4] = [
        lap,
        core::array::from_fn(|i| core::array::from_fn(|j| 0.5 * s * fv * w[i][j])),
        core::array::from_fn(|i| core::array::from_fn(|j| -6.0 * fv * w2[i][j])),
        core::array::from_fn(|i| core::array::from_fn(|j| 2.0 * fv * norm2 * eye(i, j))),
    ];
    let mut total = [[0.0; 3]; 3];
    for t in &terms {
        for i in 0..3 {
            for j in 0..3 {
                total[i][j] += t[i][j];
            }
        }
    }
    let tr = (total[0][0] + total[1][1] + total[2][2]) / 3.0;
    let frob = |m: &Mat3| m.iter().flatten().map(|x| x * x).sum::<f64>().sqrt();
    let tf: Mat3 = core::array::from_fn(|i| core::array::from_fn(|j| total[i][j] - tr * eye(i, j)));
    let scale = terms.iter().map(frob).fold(0.0, f64::max);
    Ok(WeylWeitzenboeck {
        precondition: pre,
        identity: ResidualReport::new("weitzenboeck_weyl", p, frob(&tf), scale),
    })
}

/// A single inequality or identity check with its slack (non-negative when
/// satisfied).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Check {
    pub pass: bool,
    pub slack: f64,
}

/// Slack below which an inequality counts as violated.
pub const LEMMA_TOL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq)]
pub struct LemmaChecks {
    pub point: [f64; 4],
    /// `W⁺(∇ω,∇ω) ≤ 0`, only evaluated where `det W⁺ > 0`.
    pub negatron: Option<Check>,
    /// `W⁺(∇ω,∇ω) ≤ β|∇ω|²`.
    pub positron: Check,
    /// `|W⁺|² ≥ (3/2)α²`; the slack is `|W⁺|² − (3/2)α²`.
    pub megatron: Check,
    /// `|W⁺|² = (3/2)α² + 2(β + α/2)²`, residual as slack (sign-less).
    pub megatron_identity: Check,
    /// Agreement of both sides of the threshold equivalence (boundary band excluded).
    pub glissando: Check,
    /// `sign(det) = sign(−β)` away from `β = 0`.
    pub sign_rule: Check,
}

impl LemmaChecks {
    pub fn all_pass(&self) -> bool {
        self.negatron.is_none_or(|c| c.pass)
            && self.positron.pass
            && self.megatron.pass
            && self.megatron_identity.pass
            && self.glissando.pass
            && self.sign_rule.pass
    }
}

/// Algebraic checks on a spectrum.
pub fn spectrum_checks(sp: &WeylSpectrum) -> (Check, Check, Check, Check) {
    let (slack, identity) = megatron(sp);
    let scale = sp.norm2.max(f64::MIN_POSITIVE);
    let megatron_check = Check {
        pass: slack >= -1e-12 * scale,
        slack,
    };
    let identity_check = Check {
        pass: identity.abs() <= 1e-12 * scale,
        slack: -identity.abs(),
    };
    let glissando = match threshold_check(sp) {
        Ok(t) => Check {
            pass: t.agree || t.boundary,
            slack: t.ratio - threshold(),
        },
        Err(_) => Check {
            pass: true,
            slack: 0.0,
        },
    };
    let cls = classify_determinant(sp, 1e-9);
    let sign_rule = Check {
        pass: cls.signs_agree || sp.beta.abs() <= 1e-9 * sp.norm2.sqrt(),
        slack: -sp.det * sp.beta,
    };
    (megatron_check, identity_check, glissando, sign_rule)
}

/// Lemma checks for the eigenform field of `g` at `p` (metric order 3).
pub fn lemma_suite(g: &MetricField, p: &ChartPoint, opts: &PipelineOptions) -> Result<LemmaChecks> {
    let kr = kahler_residual(g, p, opts)?;
    let sp = kr.spectrum;
    let (megatron, megatron_identity, glissando, sign_rule) = spectrum_checks(&sp);
    let positive = classify_determinant(&sp, opts.det_tol).sign == DeterminantSign::Positive;
    let negatron = positive.then(|| {
        let slack = -kr.wplus_grad;
        Check {
            pass: slack >= -LEMMA_TOL,
            slack,
        }
    });
    let positron_slack = kr.beta_grad - kr.wplus_grad;
    Ok(LemmaChecks {
        point: p.0,
        negatron,
        positron: Check {
            pass: positron_slack >= -LEMMA_TOL,
            slack: positron_slack,
        },
        megatron,
        megatron_identity,
        glissando,
        sign_rule,
    })
}

/// One failed sample of the spectrum oracle.
#[derive(Debug, Clone, PartialEq)]
pub struct Counterexample {
    pub sample: u64,
    pub check: String,
    pub eigenvalues: [f64; 3],
}

/// Outcome of one block (or a whole run) of the spectrum oracle.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct OracleOutcome {
    pub samples: u64,
    pub boundary_excluded: u64,
    pub counterexamples: Vec<Counterexample>,
}

/// Counterexamples kept per run.
pub const MAX_COUNTEREXAMPLES: usize = 16;

/// Random traceless symmetric matrix with entries of magnitude up to
/// `10^e`, `e ∈ [−3, 3]`.
pub fn random_traceless(rng: &mut ChaCha8Rng) -> Mat3 {
    let mag = 10f64.powf(rng.gen_range(-3.0..3.0));
    let mut m = [[0.0; 3]; 3];
    for i in 0..3 {
        for j in i..3 {
            let v = mag * rng.gen_range(-1.0..1.0);
            m[i][j] = v;
            m[j][i] = v;
        }
    }
    let tr = (m[0][0] + m[1][1] + m[2][2]) / 3.0;
    for (i, row) in m.iter_mut().enumerate() {
        row[i] -= tr;
    }
    m
}

/// Checks one matrix; returns the names of failed checks and whether the
/// sample lies in the threshold boundary band.
pub fn oracle_sample(m: &Mat3) -> (Vec<&'static str>, bool) {
    let sp = weyl_spectrum(m);
    let mut failed = Vec::new();
    let norm = sp.norm2.sqrt();
    if (sp.alpha + sp.beta + sp.gamma).abs() > 1e-10 * norm {
        failed.push("trace");
    }
    let (megatron_check, identity, glissando, sign_rule) = spectrum_checks(&sp);
    if !sign_rule.pass {
        failed.push("sign_rule");
    }
    if !megatron_check.pass || !identity.pass {
        failed.push("megatron");
    }
    let boundary = threshold_check(&sp).map(|t| t.boundary).unwrap_or(false);
    if !glissando.pass {
        failed.push("glissando");
    }
    (failed, boundary)
}

/// Oracle over block `block` of a run of `n` samples.
pub fn oracle_block(seed: u64, n: u64, block: u64) -> OracleOutcome {
    let mut rng = block_rng(seed, block);
    let len = block_len(n, block);
    let mut out = OracleOutcome {
        samples: len,
        ..OracleOutcome::default()
    };
    for i in 0..len {
        let m = random_traceless(&mut rng);
        let (failed, boundary) = oracle_sample(&m);
        if boundary {
            out.boundary_excluded += 1;
        }
        for check in failed {
            if out.counterexamples.len() < MAX_COUNTEREXAMPLES {
                out.counterexamples.push(Counterexample {
                    sample: block * BLOCK + i,
                    check: check.to_string(),
                    eigenvalues: weyl_spectrum(&m).eigenvalues(),
                });
            }
        }
    }
    out
}

/// Merges block outcomes in block order.
pub fn merge_oracle(blocks: impl IntoIterator<Item = OracleOutcome>) -> OracleOutcome {
    let mut out = OracleOutcome::default();
    for b in blocks {
        out.samples += b.samples;
        out.boundary_excluded += b.boundary_excluded;
        for c in b.counterexamples {
            if out.counterexamples.len() < MAX_COUNTEREXAMPLES {
                out.counterexamples.push(c);
            }
        }
    }
    out
}

/// Whether the ratio function decreases strictly on an `n`-point grid of
/// `[−1/2, 1]`.
pub fn ratio_function_monotone(n: usize) -> bool {
    let xs: Vec<f64> = (0..n)
        .map(|i| -0.5 + 1.5 * i as f64 / (n - 1).max(1) as f64)
        .collect();
    xs.windows(2).all(|w| {
        ratio_function(w[1]).unwrap_or(f64::NAN) < ratio_function(w[0]).unwrap_or(f64::NAN)
    })
}

/// Full oracle report.
#[derive(Debug, Clone, PartialEq)]
pub struct OracleReport {
    pub seed: u64,
    pub outcome: OracleOutcome,
    pub ratio_monotone: bool,
    /// `det/|W⁺|³ − threshold` for `diag(4, 1, −5)`.
    pub boundary_witness_offset: f64,
    pub boundary_witness_flagged: bool,
}

impl OracleReport {
    pub fn pass(&self) -> bool {
        self.outcome.counterexamples.is_empty()
            && self.ratio_monotone
            && self.boundary_witness_flagged
    }
}

pub fn oracle_report(seed: u64, outcome: OracleOutcome) -> OracleReport {
    let witness = weyl_spectrum(&[[4.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, -5.0]]);
    let t = threshold_check(&witness).expect("nonzero witness");
    OracleReport {
        seed,
        outcome,
        ratio_monotone: ratio_function_monotone(10_000),
        boundary_witness_offset: t.ratio - threshold(),
        boundary_witness_flagged: t.boundary,
    }
}

/// Brute-force check of the spectral lemmas over `n` random traceless
/// symmetric matrices.
pub fn random_spectrum_oracle(seed: u64, n: u64) -> OracleReport {
    let outcome = merge_oracle((0..block_count(n)).map(|b| oracle_block(seed, n, b)));
    oracle_report(seed, outcome)
}

/// Monte Carlo estimate of `∫ φ dμ_g`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadratureEstimate {
    pub value: f64,
    pub stderr: f64,
    pub samples: u64,
    pub seed: u64,
}

/// Partial sums of one quadrature block.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct BlockSums {
    pub count: u64,
    pub sum: f64,
    pub sum_sq: f64,
    pub max_sq: f64,
}

/// Samples with a coordinate (or radius) beyond this are dropped. For volume
/// densities decaying like `|x|⁻⁸` or faster the neglected tail is below
/// `1e−12` relative, while curvature computed from far-out jets would already
/// suffer cancellation.
pub const CUTOFF: f64 = 1e3;

/// Maps a uniform sample of the unit cube (or ball) onto the domain and
/// returns the point and the Jacobian weight.
///
/// Bounded boxes are sampled uniformly. A chart unbounded in every direction
/// uses the radial map `x = tan(π|y|/2) y/|y|` of the unit ball, whose
/// Jacobian grows like `|x|⁵` and keeps densities decaying like `|x|⁻⁶` or
/// faster bounded. Mixed boxes use `x = tan` per unbounded axis.
fn sample_point(domain: &ChartDomain, rng: &mut ChaCha8Rng) -> (Option<[f64; 4]>, f64) {
    use core::f64::consts::PI;
    let b = domain.bounds;
    let all_infinite = b
        .iter()
        .all(|[lo, hi]| lo.is_infinite() && hi.is_infinite());
    if all_infinite {
        loop {
            let y: [f64; 4] = core::array::from_fn(|_| rng.gen_range(-1.0..1.0));
            let rho = y.iter().map(|v| v * v).sum::<f64>().sqrt();
            if rho >= 1.0 || rho == 0.0 {
                continue;
            }
            let r = (0.5 * PI * rho).tan();
            let weight = 0.5 * PI * PI * 0.5 * PI * (1.0 + r * r) * (r / rho).powi(3);
            if r > CUTOFF {
                return (None, 0.0);
            }
            return (Some(y.map(|v| v * r / rho)), weight);
        }
    }
    let mut x = [0.0; 4];
    let mut weight = 1.0;
    for i in 0..4 {
        let u: f64 = rng.gen_range(0.0..1.0);
        let [lo, hi] = b[i];
        match (lo.is_finite(), hi.is_finite()) {
            (true, true) => {
                x[i] = lo + (hi - lo) * u;
                weight *= hi - lo;
            }
            (true, false) => {
                let t = (0.5 * PI * u).tan();
                x[i] = lo + t;
                weight *= 0.5 * PI * (1.0 + t * t);
            }
            (false, true) => {
                let t = (0.5 * PI * u).tan();
                x[i] = hi - t;
                weight *= 0.5 * PI * (1.0 + t * t);
            }
            (false, false) => {
                let t = (PI * (u - 0.5)).tan();
                x[i] = t;
                weight *= PI * (1.0 + t * t);
            }
        }
        if x[i].abs() > CUTOFF {
            return (None, 0.0);
        }
    }
    (Some(x), weight)
}

/// Quadrature sums over block `block` of an `n`-sample run.
pub fn quadrature_block<F>(
    g: &MetricField,
    integrand: &F,
    seed: u64,
    n: u64,
    block: u64,
) -> Result<BlockSums>
where
    F: Fn(&ChartPoint) -> Result<f64> + ?Sized,
{
    let mut rng = block_rng(seed, block);
    let len = block_len(n, block);
    let mut sums = BlockSums {
        count: len,
        ..BlockSums::default()
    };
    for _ in 0..len {
        let (x, weight) = sample_point(g.domain(), &mut rng);
        let Some(x) = x else { continue };
        let p = ChartPoint(x);
        let det = {
            let gv = g.jets(&p, 0)?.values();
            crate::linalg::det_inverse4(&crate::linalg::mat4j_constant(&gv, 0))?
                .0
                .value()
        };
        let v = integrand(&p)? * det.sqrt() * weight;
        if !v.is_finite() {
            return Err(Error::Domain(format!("integrand not finite at {x:?}")));
        }
        sums.sum += v;
        sums.sum_sq += v * v;
        sums.max_sq = sums.max_sq.max(v * v);
    }
    Ok(sums)
}

/// Combines block sums (in block order) into an estimate. A single sample
/// carrying more than half of the total second moment is taken as a sign of
/// a non-integrable singularity.
pub fn combine_blocks(blocks: &[BlockSums], seed: u64) -> Result<QuadratureEstimate> {
    let n: u64 = blocks.iter().map(|b| b.count).sum();
    let sum = pairwise(&blocks.iter().map(|b| b.sum).collect::<Vec<_>>());
    let sum_sq = pairwise(&blocks.iter().map(|b| b.sum_sq).collect::<Vec<_>>());
    let max_sq = blocks.iter().map(|b| b.max_sq).fold(0.0, f64::max);
    if n == 0 {
        return Ok(QuadratureEstimate {
            value: 0.0,
            stderr: 0.0,
            samples: 0,
            seed,
        });
    }
    if n >= 1000 && max_sq > 0.5 * sum_sq {
        return Err(Error::Domain(
            "integrand appears non-integrable: one sample dominates the variance".to_string(),
        ));
    }
    let nf = n as f64;
    let mean = sum / nf;
    let var = if n > 1 {
        ((sum_sq - nf * mean * mean) / (nf - 1.0)).max(0.0)
    } else {
        0.0
    };
    Ok(QuadratureEstimate {
        value: mean,
        stderr: (var / nf).sqrt(),
        samples: n,
        seed,
    })
}

fn pairwise(xs: &[f64]) -> f64 {
    match xs.len() {
        0 => 0.0,
        1 => xs[0],
        n => pairwise(&xs[..n / 2]) + pairwise(&xs[n / 2..]),
    }
}

/// `∫ φ dμ_g` over the chart domain of `g` by plain Monte Carlo.
pub fn integrate<F>(g: &MetricField, integrand: &F, n: u64, seed: u64) -> Result<QuadratureEstimate>
where
    F: Fn(&ChartPoint) -> Result<f64> + ?Sized,
{
    let blocks = (0..block_count(n))
        .map(|b| quadrature_block(g, integrand, seed, n, b))
        .collect::<Result<Vec<_>>>()?;
    combine_blocks(&blocks, seed)
}

/// Scalar curvature as an integrand.
pub fn scalar_curvature_density(
    g: &MetricField,
) -> impl Fn(&ChartPoint) -> Result<f64> + Sync + '_ {
    move |p| Ok(PointCurvature::at(g, p)?.scalar_curvature())
}

/// Signature density `(|W⁺|² − |W⁻|²)/(48π²)` with tensor norms
/// `|W|² = W_abcd W^abcd` (four times the operator norms).
pub fn signature_density(
    g: &MetricField,
    orientation: Orientation,
) -> impl Fn(&ChartPoint) -> Result<f64> + Sync + '_ {
    move |p| {
        let pc = PointCurvature::at(g, p)?;
        let dec = decompose_curvature(&pc.g, &pc.riemann, orientation)?;
        let n = |m: &Mat3| 4.0 * m.iter().flatten().map(|x| x * x).sum::<f64>();
        Ok((n(&dec.wplus) - n(&dec.wminus))
            / (48.0 * core::f64::consts::PI * core::f64::consts::PI))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::ScalarField;
    use alloc::sync::Arc;

    fn fs() -> Arc<MetricField> {
        Arc::new(
            MetricField::from_kahler_potential(
                "fs",
                "log(1 + x0^2 + x1^2 + x2^2 + x3^2)",
                ChartDomain::whole(),
            )
            .unwrap(),
        )
    }

    #[test]
    fn fubini_study_is_harmonic() {
        let r = divergence_weyl(
            &fs(),
            &ChartPoint([0.3, 0.1, -0.2, 0.4]),
            Orientation::Standard,
        )
        .unwrap();
        assert!(r.relative < 1e-10, "{r:?}");
        assert!(r.scale > 0.0);
    }

    #[test]
    fn weighted_divergence_vanishes_for_rescaled_fubini_study() {
        let h = fs();
        let f = ScalarField::parse("1 + 0.1*exp(-(x0^2 + x1^2 + x2^2 + x3^2))").unwrap();
        let g = crate::geometry::conformal_rescale(h, f);
        let p = ChartPoint([0.3, 0.1, -0.2, 0.4]);
        let r = weighted_divergence(&g, &p, Orientation::Standard).unwrap();
        assert!(r.relative < 1e-9, "{r:?}");
        let plain = divergence_weyl(&g, &p, Orientation::Standard).unwrap();
        assert!(plain.relative > 1e-4, "{plain:?}");
    }

    #[test]
    fn weitzenboeck_on_kahler_form() {
        let g = fs();
        let p = ChartPoint([0.3, 0.1, -0.2, 0.4]);
        let w = g.kahler_form().unwrap().clone();
        let r = weitzenboeck_form(&g, &w, &p, false, Orientation::Standard).unwrap();
        assert!(r.residual < 1e-8, "{r:?}");
        let bumped = w.scaled("1 + x0^2").unwrap();
        let r = weitzenboeck_form(&g, &bumped, &p, true, Orientation::Standard).unwrap();
        assert!(r.relative < 1e-9 && r.scale > 1e-3, "{r:?}");
    }

    #[test]
    fn weyl_weitzenboeck_closes_on_kahler_einstein() {
        let h = fs();
        let g = crate::geometry::conformal_rescale(h, ScalarField::Constant(1.0));
        let r = weitzenboeck_weyl(
            &g,
            &ChartPoint([0.1, 0.2, 0.3, 0.4]),
            Orientation::Standard,
            1e-7,
        )
        .unwrap();
        assert!(r.identity.relative < 1e-9, "{r:?}");
    }

    #[test]
    fn small_oracle_run_passes() {
        let r = random_spectrum_oracle(42, 10_000);
        assert!(r.pass(), "{r:?}");
        assert!(r.boundary_witness_offset.abs() < 1e-12);
        assert_eq!(random_spectrum_oracle(1, 0).outcome.samples, 0);
    }

    #[test]
    fn unit_box_volume() {
        let g = MetricField::from_components(
            "e",
            &["1", "0", "0", "0", "1", "0", "0", "1", "0", "1"],
            ChartDomain::new([[0.0, 1.0]; 4]).unwrap(),
        )
        .unwrap();
        let est = integrate(&g, &|_: &ChartPoint| Ok(1.0), 1000, 3).unwrap();
        assert!((est.value - 1.0).abs() < 1e-12 && est.stderr < 1e-12);
    }
}
