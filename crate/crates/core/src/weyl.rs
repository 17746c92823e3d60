//! Λ² machinery: Λ± bases, the curvature operator in block form, the spectrum
//! of the self-dual Weyl operator and the structures derived from its top
//! eigenvalue.
//!
//! The curvature operator is `ℛ(φ)_ab = ½ R_ab^cd φ_cd`; 2-forms are paired by
//! `⟨φ, ψ⟩ = ½ φ_ab ψ^ab`. In an orthonormal basis adapted to `Λ² = Λ⁺ ⊕ Λ⁻`
//!
//! ```text
//!     ℛ = [ W⁺ + s/12    B         ]
//!         [ Bᵀ           W⁻ + s/12 ]
//! ```
//!
//! where `B` carries the trace-free Ricci tensor. Norms of `W±` are Frobenius
//! norms of the 3×3 blocks; the covariant contraction `W_abcd W^abcd` is four
//! times larger.

use alloc::format;
use alloc::string::ToString;

#[allow(unused_imports)] // inherent methods shadow it when std is linked
use num_traits::Float;

use crate::error::{Error, Result};
use crate::forms::{two_form_norm_sq, StarContext};
use crate::geometry::{ChartPoint, LocalGeometry, MetricField, MetricJets, TensorJet};
use crate::jet::Jet;
use crate::linalg::{
    cross, dot3, mat4j_constant, mat4j_values, sym3_eigen, Mat3, Mat4, Mat4J, Vec3,
};

/// `−(5/21)·√(2/21)`: the critical value of `det W⁺ / |W⁺|³`.
pub fn threshold() -> f64 {
    -(5.0 / 21.0) * (2.0f64 / 21.0).sqrt()
}

/// Default relative spectral-gap tolerance.
pub const DEFAULT_GAP_TOL: f64 = 1e-7;

/// Relative width of the band around the threshold boundary inside which the
/// two sides of the threshold equivalence are not compared.
pub const BOUNDARY_BAND: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Orientation {
    /// `dx⁰∧dx¹∧dx²∧dx³` is positive.
    #[default]
    Standard,
    Reversed,
}

impl Orientation {
    pub fn sign(self) -> f64 {
        match self {
            Orientation::Standard => 1.0,
            Orientation::Reversed => -1.0,
        }
    }

    pub fn flipped(self) -> Orientation {
        match self {
            Orientation::Standard => Orientation::Reversed,
            Orientation::Reversed => Orientation::Standard,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Orientation::Standard => "standard",
            Orientation::Reversed => "reversed",
        }
    }
}

/// Orthonormal bases of Λ⁺ and Λ⁻ with lowered and raised components.
#[derive(Debug, Clone)]
pub struct LambdaBases {
    pub plus: [TensorJet; 3],
    pub minus: [TensorJet; 3],
    pub plus_up: [TensorJet; 3],
    pub minus_up: [TensorJet; 3],
}

impl LambdaBases {
    /// Builds the bases from a Gram–Schmidt frame `e_i` of `∂_0, …, ∂_3`,
    /// which is positively oriented for the chart. For the Euclidean metric
    /// Λ⁺ is spanned by `(e⁰¹ + e²³)/√2`, `(e⁰² + e³¹)/√2`, `(e⁰³ + e¹²)/√2`.
    pub fn new(g: &Mat4J, orientation: Orientation) -> Result<LambdaBases> {
        let order = g[0][0].order();
        let inner = |u: &[Jet; 4], v: &[Jet; 4]| -> Jet {
            let mut acc = Jet::zero(order);
            for a in 0..4 {
                for b in 0..4 {
                    if u[a].taylor_coeffs().iter().all(|c| *c == 0.0) {
                        continue;
                    }
                    let t = &u[a] * &g[a][b];
                    acc.add_product(&t, &v[b]);
                }
            }
            acc
        };
        let mut frame: [[Jet; 4]; 4] =
            core::array::from_fn(|_| core::array::from_fn(|_| Jet::zero(order)));
        for i in 0..4 {
            let mut w: [Jet; 4] =
                core::array::from_fn(|a| Jet::constant(if a == i { 1.0 } else { 0.0 }, order));
            for j in 0..i {
                let c = inner(&w, &frame[j]);
                for a in 0..4 {
                    let t = &c * &frame[j][a];
                    w[a] -= &t;
                }
            }
            let n2 = inner(&w, &w);
            if !(n2.value() > 0.0) {
                return Err(Error::NotPositiveDefinite {
                    minor: i + 1,
                    value: n2.value(),
                });
            }
            let inv = n2.powf(-0.5)?;
            frame[i] = core::array::from_fn(|a| &w[a] * &inv);
        }
        let coframe: [[Jet; 4]; 4] = core::array::from_fn(|i| {
            core::array::from_fn(|a| {
                let mut acc = Jet::zero(order);
                for b in 0..4 {
                    acc.add_product(&g[a][b], &frame[i][b]);
                }
                acc
            })
        });
        let wedge =
            |v: &[[Jet; 4]; 4], i: usize, j: usize, k: usize, l: usize, sign: f64| -> TensorJet {
                let r = core::f64::consts::FRAC_1_SQRT_2;
                TensorJet::from_fn(2, |ab| {
                    let (a, b) = (ab[0], ab[1]);
                    let first = &(&v[i][a] * &v[j][b]) - &(&v[j][a] * &v[i][b]);
                    let second = &(&v[k][a] * &v[l][b]) - &(&v[l][a] * &v[k][b]);
                    (&first + &second.scale(sign)).scale(r)
                })
            };
        let build = |v: &[[Jet; 4]; 4], sign: f64| -> [TensorJet; 3] {
            [
                wedge(v, 0, 1, 2, 3, sign),
                wedge(v, 0, 2, 3, 1, sign),
                wedge(v, 0, 3, 1, 2, sign),
            ]
        };
        let (sp, sm) = match orientation {
            Orientation::Standard => (1.0, -1.0),
            Orientation::Reversed => (-1.0, 1.0),
        };
        Ok(LambdaBases {
            plus: build(&coframe, sp),
            minus: build(&coframe, sm),
            plus_up: build(&frame, sp),
            minus_up: build(&frame, sm),
        })
    }

    fn all_up(&self) -> [&TensorJet; 6] {
        [
            &self.plus_up[0],
            &self.plus_up[1],
            &self.plus_up[2],
            &self.minus_up[0],
            &self.minus_up[1],
            &self.minus_up[2],
        ]
    }

    pub fn order(&self) -> u8 {
        self.plus[0].order()
    }

    /// Coefficients `⟨φ_i, ω⟩` of a 2-form along the Λ⁺ basis.
    pub fn plus_coefficients(&self, omega: &TensorJet) -> [Jet; 3] {
        core::array::from_fn(|i| pair(&self.plus_up[i], omega))
    }

    /// `Σ_i c_i φ⁺_i` as a lowered 2-form.
    pub fn plus_combination(&self, c: &[Jet; 3]) -> TensorJet {
        let order = c
            .iter()
            .map(|x| x.order())
            .min()
            .unwrap_or(0)
            .min(self.order());
        TensorJet::from_fn(2, |ab| {
            let mut acc = Jet::zero(order);
            for i in 0..3 {
                acc.add_product(&c[i], self.plus[i].get(ab));
            }
            acc
        })
    }
}

/// `⟨φ, ψ⟩ = ½ φ^ab ψ_ab` with `φ` given raised.
fn pair(up: &TensorJet, low: &TensorJet) -> Jet {
    let order = up.order().min(low.order());
    let mut acc = Jet::zero(order);
    for a in 0..4 {
        for b in a + 1..4 {
            acc.add_product(up.get(&[a, b]), low.get(&[a, b]));
        }
    }
    acc
}

/// Curvature operator matrix `M_IJ = ⟨φ_I, ℛ φ_J⟩` over the basis
/// `(φ⁺_1, φ⁺_2, φ⁺_3, φ⁻_1, φ⁻_2, φ⁻_3)`.
fn curvature_operator(r: &TensorJet, bases: &LambdaBases) -> [[Jet; 6]; 6] {
    let order = r.order().min(bases.order());
    let up = bases.all_up();
    let pairs = [(0, 1), (0, 2), (0, 3), (1, 2), (1, 3), (2, 3)];
    // (ℛ φ_J)_ab for a < b
    let r_phi: [[Jet; 6]; 6] = core::array::from_fn(|j| {
        core::array::from_fn(|ab| {
            let (a, b) = pairs[ab];
            let mut acc = Jet::zero(order);
            for &(c, d) in &pairs {
                acc.add_product(r.get(&[a, b, c, d]), up[j].get(&[c, d]));
            }
            acc
        })
    });
    let mut m: [[Jet; 6]; 6] = core::array::from_fn(|_| core::array::from_fn(|_| Jet::zero(order)));
    for i in 0..6 {
        for j in i..6 {
            let mut acc = Jet::zero(order);
            for (ab, &(a, b)) in pairs.iter().enumerate() {
                acc.add_product(up[i].get(&[a, b]), &r_phi[j][ab]);
            }
            let sym = if i == j {
                acc
            } else {
                let mut other = Jet::zero(order);
                for (ab, &(a, b)) in pairs.iter().enumerate() {
                    other.add_product(up[j].get(&[a, b]), &r_phi[i][ab]);
                }
                (&acc + &other).scale(0.5)
            };
            m[j][i] = sym.clone();
            m[i][j] = sym;
        }
    }
    m
}

fn trace_free_block(m: &[[Jet; 6]; 6], offset: usize) -> [[Jet; 3]; 3] {
    let tr = (&(&m[offset][offset] + &m[offset + 1][offset + 1]) + &m[offset + 2][offset + 2])
        .scale(1.0 / 3.0);
    core::array::from_fn(|i| {
        core::array::from_fn(|j| {
            let v = m[offset + i][offset + j].clone();
            if i == j {
                &v - &tr
            } else {
                v
            }
        })
    })
}

fn values3(w: &[[Jet; 3]; 3]) -> Mat3 {
    core::array::from_fn(|i| core::array::from_fn(|j| w[i][j].value()))
}

fn tensor_values(t: &TensorJet) -> Mat4 {
    core::array::from_fn(|a| core::array::from_fn(|b| t.get(&[a, b]).value()))
}

/// Curvature and its Λ± blocks at one point, as jets of a common order.
#[derive(Debug, Clone)]
pub struct CurvatureJets {
    pub geometry: LocalGeometry,
    pub bases: LambdaBases,
    pub operator: [[Jet; 6]; 6],
    pub orientation: Orientation,
}

impl CurvatureJets {
    /// Curvature blocks of order `k` from metric jets of order `≥ k + 2`.
    pub fn from_metric(mj: &MetricJets, k: u8, orientation: Orientation) -> Result<CurvatureJets> {
        let geometry = LocalGeometry::new(mj, k)?;
        let bases = LambdaBases::new(&mat4j_truncate_to(&geometry.g, k), orientation)?;
        let operator = curvature_operator(&geometry.riemann, &bases);
        Ok(CurvatureJets {
            geometry,
            bases,
            operator,
            orientation,
        })
    }

    pub fn at(
        g: &MetricField,
        p: &ChartPoint,
        k: u8,
        orientation: Orientation,
    ) -> Result<CurvatureJets> {
        CurvatureJets::from_metric(&g.jets(p, k + 2)?, k, orientation)
    }

    pub fn order(&self) -> u8 {
        self.operator[0][0].order()
    }

    pub fn wplus(&self) -> [[Jet; 3]; 3] {
        trace_free_block(&self.operator, 0)
    }

    pub fn wminus(&self) -> [[Jet; 3]; 3] {
        trace_free_block(&self.operator, 3)
    }

    pub fn scalar_curvature(&self) -> Jet {
        self.geometry.scalar_curvature()
    }

    /// Fully covariant `W⁺_abcd = Σ W_ij φ⁺_i,ab φ⁺_j,cd`.
    pub fn wplus_tensor(&self) -> TensorJet {
        let w = self.wplus();
        let order = self.order();
        let phi = &self.bases.plus;
        TensorJet::from_fn(4, |idx| {
            let mut acc = Jet::zero(order);
            for i in 0..3 {
                let left = phi[i].get(&idx[..2]);
                if left.taylor_coeffs().iter().all(|c| *c == 0.0) {
                    continue;
                }
                let mut inner = Jet::zero(order);
                for j in 0..3 {
                    inner.add_product(&w[i][j], phi[j].get(&idx[2..]));
                }
                acc.add_product(left, &inner);
            }
            acc
        })
    }

    /// Full curvature scale: Frobenius norm of the 6×6 operator at the point.
    pub fn operator_scale(&self) -> f64 {
        self.operator
            .iter()
            .flatten()
            .map(|x| x.value() * x.value())
            .sum::<f64>()
            .sqrt()
    }

    pub fn spectrum(&self) -> WeylSpectrum {
        weyl_spectrum(&values3(&self.wplus()))
    }

    /// Pointwise decomposition at the base point.
    pub fn decomposition(&self) -> CurvatureDecomposition {
        let m: [[f64; 6]; 6] =
            core::array::from_fn(|i| core::array::from_fn(|j| self.operator[i][j].value()));
        let ginv = mat4j_values(&self.geometry.ginv);
        let plus: [Mat4; 3] = core::array::from_fn(|i| tensor_values(&self.bases.plus[i]));
        let minus: [Mat4; 3] = core::array::from_fn(|i| tensor_values(&self.bases.minus[i]));
        CurvatureDecomposition {
            wplus: values3(&self.wplus()),
            wminus: values3(&self.wminus()),
            ricci0: traceless_ricci(&m, &ginv, &plus, &minus),
            s: self.scalar_curvature().value(),
            s_from_blocks: 4.0 * (m[0][0] + m[1][1] + m[2][2]),
            lambda_plus: plus,
            lambda_minus: minus,
            operator: m,
        }
    }

    /// Jets of the simple top eigenvalue of W⁺, its unit eigenvector in the
    /// Λ⁺ basis and the eigenform `ω = √2 Σ v_i φ⁺_i` (so `|ω|² = 2`).
    ///
    /// The eigenvalue jet solves the characteristic polynomial by Newton
    /// iteration in jet arithmetic, starting from the pointwise eigenvalue;
    /// each step doubles the number of correct orders. The eigenvector is
    /// the normalized cross product of two rows of `W⁺ − α`. The sign follows
    /// `anchor` when given (non-negative inner product), otherwise the first
    /// coefficient exceeding `1e−6` in magnitude is made positive.
    pub fn top_eigen(&self, gap_tol: f64, anchor: Option<&Vec3>) -> Result<TopEigenJets> {
        let w = self.wplus();
        let spectrum = weyl_spectrum(&values3(&w));
        check_gap(&spectrum, gap_tol, self.operator_scale())?;
        let k = self.order();

        // λ³ + c1 λ + c0 for traceless W: c1 = −½ tr W², c0 = −det W.
        let mut tr_w2 = Jet::zero(k);
        for i in 0..3 {
            for j in 0..3 {
                tr_w2.add_product(&w[i][j], &w[j][i]);
            }
        }
        let c1 = tr_w2.scale(-0.5);
        let det = det3_jet(&w);
        let c0 = -&det;
        let mut alpha = Jet::constant(spectrum.alpha, k);
        let mut steps = 1;
        while (1u32 << (steps - 1)) < k as u32 + 1 {
            steps += 1;
        }
        for _ in 0..steps {
            let a2 = &alpha * &alpha;
            let p = &(&(&a2 * &alpha) + &(&c1 * &alpha)) + &c0;
            let dp = &a2.scale(3.0) + &c1;
            let step = (&p / &dp)?;
            alpha = &alpha - &step;
        }

        let rows: [[Jet; 3]; 3] = core::array::from_fn(|i| {
            core::array::from_fn(|j| {
                if i == j {
                    &w[i][j] - &alpha
                } else {
                    w[i][j].clone()
                }
            })
        });
        let row_values: [Vec3; 3] =
            core::array::from_fn(|i| core::array::from_fn(|j| rows[i][j].value()));
        let pairs = [(0, 1), (1, 2), (2, 0)];
        let (ri, rj) = *pairs
            .iter()
            .max_by(|x, y| {
                let cx = cross(&row_values[x.0], &row_values[x.1]);
                let cy = cross(&row_values[y.0], &row_values[y.1]);
                dot3(&cx, &cx).total_cmp(&dot3(&cy, &cy))
            })
            .expect("three pairs");
        let c = cross_jet(&rows[ri], &rows[rj]);
        let mut n2 = Jet::zero(k);
        for x in &c {
            n2.add_product(x, x);
        }
        let inv = n2.powf(-0.5)?;
        let mut v: [Jet; 3] = core::array::from_fn(|i| &c[i] * &inv);
        let v0: Vec3 = core::array::from_fn(|i| v[i].value());
        let flip = match anchor {
            Some(a) => dot3(&v0, a) < 0.0,
            None => v0.iter().find(|x| x.abs() > 1e-6).is_some_and(|x| *x < 0.0),
        };
        if flip {
            v = core::array::from_fn(|i| -&v[i]);
        }
        let scaled: [Jet; 3] = core::array::from_fn(|i| v[i].scale(core::f64::consts::SQRT_2));
        let omega = self.bases.plus_combination(&scaled);
        Ok(TopEigenJets {
            alpha,
            vector: v,
            omega,
            spectrum,
        })
    }
}

fn mat4j_truncate_to(g: &Mat4J, k: u8) -> Mat4J {
    core::array::from_fn(|a| core::array::from_fn(|b| g[a][b].truncate(k)))
}

fn det3_jet(m: &[[Jet; 3]; 3]) -> Jet {
    let minor =
        |a: usize, b: usize, c: usize, d: usize| &(&m[1][a] * &m[2][b]) - &(&m[1][c] * &m[2][d]);
    let t0 = &m[0][0] * &minor(1, 2, 2, 1);
    let t1 = &m[0][1] * &minor(0, 2, 2, 0);
    let t2 = &m[0][2] * &minor(0, 1, 1, 0);
    &(&t0 - &t1) + &t2
}

fn cross_jet(a: &[Jet; 3], b: &[Jet; 3]) -> [Jet; 3] {
    [
        &(&a[1] * &b[2]) - &(&a[2] * &b[1]),
        &(&a[2] * &b[0]) - &(&a[0] * &b[2]),
        &(&a[0] * &b[1]) - &(&a[1] * &b[0]),
    ]
}

/// Rejects spectra whose top eigenvalue is not simple: `W⁺` vanishing relative
/// to the full curvature scale, or a relative gap `(α − β)/|W⁺|` at or below
/// `gap_tol`.
pub fn check_gap(sp: &WeylSpectrum, gap_tol: f64, curvature_scale: f64) -> Result<()> {
    let norm = sp.norm2.sqrt();
    if norm <= 1e-10 * curvature_scale || norm == 0.0 {
        return Err(Error::SpectralGap {
            gap: 0.0,
            tolerance: gap_tol,
            detail: "W+ = 0".to_string(),
        });
    }
    let rel = sp.gap / norm;
    if rel <= gap_tol {
        return Err(Error::SpectralGap {
            gap: rel,
            tolerance: gap_tol,
            detail: format!("alpha = {:e}, beta = {:e}", sp.alpha, sp.beta),
        });
    }
    Ok(())
}

/// Top eigen-data of W⁺ as jets.
#[derive(Debug, Clone)]
pub struct TopEigenJets {
    pub alpha: Jet,
    pub vector: [Jet; 3],
    /// Eigenform with lowered indices, `|ω|² = 2`.
    pub omega: TensorJet,
    pub spectrum: WeylSpectrum,
}

/// Pointwise irreducible decomposition of the curvature.
#[derive(Debug, Clone, PartialEq)]
pub struct CurvatureDecomposition {
    pub wplus: Mat3,
    pub wminus: Mat3,
    pub ricci0: Mat4,
    /// Scalar curvature from the direct contraction.
    pub s: f64,
    /// `4 tr(ℛ|Λ⁺)`, equal to `s` for a genuine curvature tensor.
    pub s_from_blocks: f64,
    pub lambda_plus: [Mat4; 3],
    pub lambda_minus: [Mat4; 3],
    pub operator: [[f64; 6]; 6],
}

/// Maximum violation of the algebraic curvature symmetries, relative to the
/// largest component.
pub fn curvature_symmetry_residual(r: &[f64]) -> f64 {
    let at = |a: usize, b: usize, c: usize, d: usize| r[((a * 4 + b) * 4 + c) * 4 + d];
    let scale = r.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    if scale == 0.0 {
        return 0.0;
    }
    let mut worst = 0.0f64;
    for a in 0..4 {
        for b in 0..4 {
            for c in 0..4 {
                for d in 0..4 {
                    let x = at(a, b, c, d);
                    worst = worst
                        .max((x + at(b, a, c, d)).abs())
                        .max((x + at(a, b, d, c)).abs())
                        .max((x - at(c, d, a, b)).abs())
                        .max((x + at(a, c, d, b) + at(a, d, b, c)).abs());
                }
            }
        }
    }
    worst / scale
}

/// Λ± bases at a point in plain floating point: `[plus, minus, plus_up,
/// minus_up]`, built exactly as [`LambdaBases::new`].
fn point_bases(g: &Mat4, orientation: Orientation) -> Result<[[Mat4; 3]; 4]> {
    let inner = |u: &[f64; 4], v: &[f64; 4]| -> f64 {
        let mut acc = 0.0;
        for a in 0..4 {
            for b in 0..4 {
                acc += u[a] * g[a][b] * v[b];
            }
        }
        acc
    };
    let mut frame = [[0.0; 4]; 4];
    for i in 0..4 {
        let mut w: [f64; 4] = core::array::from_fn(|a| if a == i { 1.0 } else { 0.0 });
        for j in 0..i {
            let c = inner(&w, &frame[j]);
            for a in 0..4 {
                w[a] -= c * frame[j][a];
            }
        }
        let n2 = inner(&w, &w);
        if !(n2 > 0.0) {
            return Err(Error::NotPositiveDefinite {
                minor: i + 1,
                value: n2,
            });
        }
        let inv = 1.0 / n2.sqrt();
        frame[i] = w.map(|x| x * inv);
    }
    let coframe: [[f64; 4]; 4] = core::array::from_fn(|i| {
        core::array::from_fn(|a| (0..4).map(|b| g[a][b] * frame[i][b]).sum())
    });
    let wedge = |v: &[[f64; 4]; 4], i: usize, j: usize, k: usize, l: usize, sign: f64| -> Mat4 {
        let r = core::f64::consts::FRAC_1_SQRT_2;
        core::array::from_fn(|a| {
            core::array::from_fn(|b| {
                let first = v[i][a] * v[j][b] - v[j][a] * v[i][b];
                let second = v[k][a] * v[l][b] - v[l][a] * v[k][b];
                (first + sign * second) * r
            })
        })
    };
    let build = |v: &[[f64; 4]; 4], sign: f64| -> [Mat4; 3] {
        [
            wedge(v, 0, 1, 2, 3, sign),
            wedge(v, 0, 2, 3, 1, sign),
            wedge(v, 0, 3, 1, 2, sign),
        ]
    };
    let sp = orientation.sign();
    Ok([
        build(&coframe, sp),
        build(&coframe, -sp),
        build(&frame, sp),
        build(&frame, -sp),
    ])
}

/// Decomposes a curvature tensor `R_abcd` (row-major, 256 entries) at a point
/// with metric `g`.
pub fn decompose_curvature(
    g: &Mat4,
    r: &[f64],
    orientation: Orientation,
) -> Result<CurvatureDecomposition> {
    if r.len() != 256 {
        return Err(Error::InvalidInput(format!(
            "curvature needs 256 components, got {}",
            r.len()
        )));
    }
    let residual = curvature_symmetry_residual(r);
    if residual > 1e-8 {
        return Err(Error::Symmetry { residual });
    }
    let (_, ginv) = crate::linalg::det_inverse4_f64(g)?;
    let [plus, minus, plus_up, minus_up] = point_bases(g, orientation)?;
    let up = [
        &plus_up[0],
        &plus_up[1],
        &plus_up[2],
        &minus_up[0],
        &minus_up[1],
        &minus_up[2],
    ];
    let pairs = [(0, 1), (0, 2), (0, 3), (1, 2), (1, 3), (2, 3)];
    let at = |a: usize, b: usize, c: usize, d: usize| r[((a * 4 + b) * 4 + c) * 4 + d];
    let r_phi: [[f64; 6]; 6] = core::array::from_fn(|j| {
        core::array::from_fn(|ab| {
            let (a, b) = pairs[ab];
            pairs
                .iter()
                .map(|&(c, d)| at(a, b, c, d) * up[j][c][d])
                .sum()
        })
    });
    let raw: [[f64; 6]; 6] = core::array::from_fn(|i| {
        core::array::from_fn(|j| {
            pairs
                .iter()
                .enumerate()
                .map(|(ab, &(a, b))| up[i][a][b] * r_phi[j][ab])
                .sum()
        })
    });
    let m: [[f64; 6]; 6] =
        core::array::from_fn(|i| core::array::from_fn(|j| 0.5 * (raw[i][j] + raw[j][i])));
    let block = |o: usize| -> Mat3 {
        let tr = (m[o][o] + m[o + 1][o + 1] + m[o + 2][o + 2]) / 3.0;
        core::array::from_fn(|i| {
            core::array::from_fn(|j| m[o + i][o + j] - if i == j { tr } else { 0.0 })
        })
    };
    let mut s = 0.0;
    for a in 0..4 {
        for b in 0..4 {
            for c in 0..4 {
                for d in 0..4 {
                    s += ginv[a][c] * ginv[b][d] * at(a, b, c, d);
                }
            }
        }
    }
    Ok(CurvatureDecomposition {
        wplus: block(0),
        wminus: block(3),
        ricci0: traceless_ricci(&m, &ginv, &plus, &minus),
        s,
        s_from_blocks: 4.0 * (m[0][0] + m[1][1] + m[2][2]),
        lambda_plus: plus,
        lambda_minus: minus,
        operator: m,
    })
}

/// Trace-free Ricci tensor reassembled from the off-diagonal block `B` of
/// the curvature operator.
fn traceless_ricci(m: &[[f64; 6]; 6], ginv: &Mat4, plus: &[Mat4; 3], minus: &[Mat4; 3]) -> Mat4 {
    let mut ricci0 = [[0.0; 4]; 4];
    for i in 0..3 {
        for j in 0..3 {
            let bij = m[i][3 + j];
            for b in 0..4 {
                for d in 0..4 {
                    let mut acc = 0.0;
                    for a in 0..4 {
                        for c in 0..4 {
                            acc += ginv[a][c]
                                * (plus[i][a][b] * minus[j][c][d] + minus[j][a][b] * plus[i][c][d]);
                        }
                    }
                    ricci0[b][d] += bij * acc;
                }
            }
        }
    }
    ricci0
}

/// Pointwise decomposition of a metric's curvature.
pub fn decomposition_at(
    g: &MetricField,
    p: &ChartPoint,
    orientation: Orientation,
) -> Result<CurvatureDecomposition> {
    Ok(CurvatureJets::at(g, p, 0, orientation)?.decomposition())
}

/// Orthonormal bases of Λ± at a point (`[plus, minus]`).
pub fn lambda_bases(g: &Mat4, orientation: Orientation) -> Result<[[Mat4; 3]; 2]> {
    let [plus, minus, ..] = point_bases(g, orientation)?;
    Ok([plus, minus])
}

/// Ordered eigen-data of a traceless symmetric 3×3 operator.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WeylSpectrum {
    pub alpha: f64,
    pub beta: f64,
    pub gamma: f64,
    /// Unit eigenvectors for α, β, γ in the Λ⁺ basis.
    pub vectors: [Vec3; 3],
    pub det: f64,
    pub norm2: f64,
    pub gap: f64,
}

impl WeylSpectrum {
    pub fn eigenvalues(&self) -> Vec3 {
        [self.alpha, self.beta, self.gamma]
    }

    /// `det / |W⁺|³`, zero when `W⁺ = 0`.
    pub fn normalized_det(&self) -> f64 {
        if self.norm2 == 0.0 {
            0.0
        } else {
            self.det / self.norm2.powf(1.5)
        }
    }
}

/// Spectrum of a symmetric 3×3 matrix (symmetrized first).
pub fn weyl_spectrum(w: &Mat3) -> WeylSpectrum {
    let sym: Mat3 = core::array::from_fn(|i| core::array::from_fn(|j| 0.5 * (w[i][j] + w[j][i])));
    let (ev, vectors) = sym3_eigen(&sym);
    WeylSpectrum {
        alpha: ev[0],
        beta: ev[1],
        gamma: ev[2],
        vectors,
        det: ev[0] * ev[1] * ev[2],
        norm2: ev[0] * ev[0] + ev[1] * ev[1] + ev[2] * ev[2],
        gap: ev[0] - ev[1],
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DeterminantSign {
    Positive,
    ZeroBand,
    Negative,
}

impl DeterminantSign {
    pub fn as_str(self) -> &'static str {
        match self {
            DeterminantSign::Positive => "positive",
            DeterminantSign::ZeroBand => "zero-band",
            DeterminantSign::Negative => "negative",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DeterminantClass {
    pub sign: DeterminantSign,
    pub det: f64,
    pub beta: f64,
    /// `sign(det) = sign(−β)`, counting zeros as agreeing with zeros.
    pub signs_agree: bool,
}

/// Sign of `det W⁺` read off the middle eigenvalue: positive iff `β < −band`,
/// negative iff `β > band`, with `band = tol·|W⁺|`.
pub fn classify_determinant(sp: &WeylSpectrum, tol: f64) -> DeterminantClass {
    let band = tol * sp.norm2.sqrt();
    let sign = if sp.beta < -band {
        DeterminantSign::Positive
    } else if sp.beta > band {
        DeterminantSign::Negative
    } else {
        DeterminantSign::ZeroBand
    };
    let sgn = |x: f64| {
        if x > 0.0 {
            1
        } else if x < 0.0 {
            -1
        } else {
            0
        }
    };
    DeterminantClass {
        sign,
        det: sp.det,
        beta: sp.beta,
        signs_agree: sgn(sp.det) == sgn(-sp.beta),
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ThresholdRecord {
    /// `β/α`.
    pub x: f64,
    /// `det / |W⁺|³`.
    pub ratio: f64,
    /// `β ≤ α/4`.
    pub lhs: bool,
    /// `det ≥ threshold · |W⁺|³`.
    pub rhs: bool,
    pub agree: bool,
    /// Within [`BOUNDARY_BAND`] of the common boundary.
    pub boundary: bool,
}

/// Evaluates both sides of the equivalence `β ≤ α/4 ⇔ det W⁺ ≥ −(5/21)√(2/21)|W⁺|³`.
pub fn threshold_check(sp: &WeylSpectrum) -> Result<ThresholdRecord> {
    if !(sp.norm2 > 0.0) {
        return Err(Error::Domain("threshold check needs W+ != 0".to_string()));
    }
    let x = sp.beta / sp.alpha;
    let ratio = sp.normalized_det();
    let t = threshold();
    let lhs = sp.beta <= sp.alpha / 4.0;
    let rhs = ratio >= t;
    Ok(ThresholdRecord {
        x,
        ratio,
        lhs,
        rhs,
        agree: lhs == rhs,
        boundary: (x - 0.25).abs() <= BOUNDARY_BAND || (ratio - t).abs() <= BOUNDARY_BAND,
    })
}

/// `r(x) = −(x + x²) / (2^{3/2} (1 + x + x²)^{3/2})`, the value of
/// `det/|W⁺|³` for the spectrum `(1, x, −1 − x)`.
pub fn ratio_function(x: f64) -> Result<f64> {
    if !(-0.5..=1.0).contains(&x) {
        return Err(Error::Domain(format!(
            "ratio function needs x in [-1/2, 1], got {x}"
        )));
    }
    Ok(-(x + x * x) / (2.0f64.powf(1.5) * (1.0 + x + x * x).powf(1.5)))
}

/// `|W⁺|² − (3/2)α²` and the identity residual
/// `|W⁺|² − ((3/2)α² + 2(β + α/2)²)`.
pub fn megatron(sp: &WeylSpectrum) -> (f64, f64) {
    let slack = sp.norm2 - 1.5 * sp.alpha * sp.alpha;
    let identity =
        sp.norm2 - (1.5 * sp.alpha * sp.alpha + 2.0 * (sp.beta + 0.5 * sp.alpha).powi(2));
    (slack, identity)
}

/// `ω = √2 Σ v_i φ⁺_i` for the top eigenvector `v`, sign fixed by `anchor` or
/// by the first-coefficient rule.
pub fn top_eigenform(
    dec: &CurvatureDecomposition,
    sp: &WeylSpectrum,
    gap_tol: f64,
    anchor: Option<&Vec3>,
) -> Result<Mat4> {
    let scale = dec
        .operator
        .iter()
        .flatten()
        .map(|x| x * x)
        .sum::<f64>()
        .sqrt();
    check_gap(sp, gap_tol, scale)?;
    let mut v = sp.vectors[0];
    let flip = match anchor {
        Some(a) => dot3(&v, a) < 0.0,
        None => v.iter().find(|x| x.abs() > 1e-6).is_some_and(|x| *x < 0.0),
    };
    if flip {
        v = v.map(|x| -x);
    }
    let s = core::f64::consts::SQRT_2;
    Ok(core::array::from_fn(|a| {
        core::array::from_fn(|b| s * (0..3).map(|i| v[i] * dec.lambda_plus[i][a][b]).sum::<f64>())
    }))
}

/// Flips `omega` if its Euclidean component inner product with `previous` is
/// negative; returns whether it flipped.
pub fn align_sign(omega: &mut Mat4, previous: &Mat4) -> bool {
    let ip: f64 = (0..4)
        .flat_map(|a| (0..4).map(move |b| (a, b)))
        .map(|(a, b)| omega[a][b] * previous[a][b])
        .sum();
    if ip < 0.0 {
        for row in omega.iter_mut() {
            for x in row.iter_mut() {
                *x = -*x;
            }
        }
        true
    } else {
        false
    }
}

/// `J_a^b = ω_ac g^cb` for a self-dual 2-form with `|ω|² = 2`.
pub fn almost_complex(omega: &Mat4, g: &Mat4, orientation: Orientation) -> Result<Mat4> {
    crate::forms::check_antisymmetric(omega, 1e-12)?;
    let gj = mat4j_constant(g, 0);
    let ctx = StarContext::new(&gj, orientation)?;
    let ginv = mat4j_values(&ctx.ginv);
    let n2 = two_form_norm_sq(omega, &ginv);
    if (n2 - 2.0).abs() > 1e-8 {
        return Err(Error::InvalidInput(format!("|omega|^2 = {n2}, expected 2")));
    }
    let w = TensorJet::from_fn(2, |i| Jet::constant(omega[i[0]][i[1]], 0));
    let star = ctx.star(&w);
    let dev = (0..16)
        .map(|f| (star.comps()[f].value() - w.comps()[f].value()).abs())
        .fold(0.0, f64::max);
    let scale = omega.iter().flatten().fold(0.0f64, |m, v| m.max(v.abs()));
    if dev > 1e-8 * scale {
        return Err(Error::InvalidInput(format!(
            "omega is not self-dual (|*omega - omega| = {dev:e})"
        )));
    }
    Ok(core::array::from_fn(|a| {
        core::array::from_fn(|b| (0..4).map(|c| omega[a][c] * ginv[c][b]).sum())
    }))
}

/// First-order perturbation of a simple top eigenpair: for `W + Σ_e t_e dW_e`,
/// `∂_e α = vᵀ dW_e v` and `∂_e v = Σ_{j≠0} (u_jᵀ dW_e v)/(α − λ_j) u_j`.
pub fn top_eigen_first_order(w: &Mat3, dw: &[Mat3; 4]) -> ([f64; 4], [Vec3; 4]) {
    let sp = weyl_spectrum(w);
    let v = sp.vectors[0];
    let ev = sp.eigenvalues();
    let mut dalpha = [0.0; 4];
    let mut dv = [[0.0; 3]; 4];
    for e in 0..4 {
        let dwv = crate::linalg::mat3_vec(&dw[e], &v);
        dalpha[e] = dot3(&v, &dwv);
        for j in 1..3 {
            let u = sp.vectors[j];
            let c = dot3(&u, &dwv) / (ev[0] - ev[j]);
            for i in 0..3 {
                dv[e][i] += c * u[i];
            }
        }
    }
    (dalpha, dv)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::ChartDomain;
    use approx::assert_abs_diff_eq;

    fn euclid() -> Mat4 {
        core::array::from_fn(|a| core::array::from_fn(|b| if a == b { 1.0 } else { 0.0 }))
    }

    fn fs() -> MetricField {
        MetricField::from_kahler_potential(
            "fs",
            "log(1 + x0^2 + x1^2 + x2^2 + x3^2)",
            ChartDomain::whole(),
        )
        .unwrap()
    }

    #[test]
    fn euclidean_bases_are_standard() {
        let [plus, minus] = lambda_bases(&euclid(), Orientation::Standard).unwrap();
        let r = core::f64::consts::FRAC_1_SQRT_2;
        assert_abs_diff_eq!(plus[0][0][1], r, epsilon = 1e-15);
        assert_abs_diff_eq!(plus[0][2][3], r, epsilon = 1e-15);
        assert_abs_diff_eq!(plus[1][3][1], r, epsilon = 1e-15);
        assert_abs_diff_eq!(plus[2][1][2], r, epsilon = 1e-15);
        assert_abs_diff_eq!(minus[0][2][3], -r, epsilon = 1e-15);
        let [rp, _] = lambda_bases(&euclid(), Orientation::Reversed).unwrap();
        assert_eq!(rp, minus);
    }

    #[test]
    fn spectrum_of_diagonal() {
        let sp = weyl_spectrum(&[[2.0, 0.0, 0.0], [0.0, -1.0, 0.0], [0.0, 0.0, -1.0]]);
        assert_eq!(
            (sp.alpha, sp.beta, sp.gamma, sp.gap),
            (2.0, -1.0, -1.0, 3.0)
        );
        assert_eq!(sp.det, 2.0);
        let z = weyl_spectrum(&[[0.0; 3]; 3]);
        assert_eq!((z.alpha, z.beta, z.gamma, z.gap), (0.0, 0.0, 0.0, 0.0));
    }

    #[test]
    fn classification_examples() {
        let c = |a: f64, b: f64, g: f64| {
            classify_determinant(
                &weyl_spectrum(&[[a, 0.0, 0.0], [0.0, b, 0.0], [0.0, 0.0, g]]),
                1e-9,
            )
        };
        assert_eq!(c(2.0, -1.0, -1.0).sign, DeterminantSign::Positive);
        let n = c(4.0, 3.0, -7.0);
        assert_eq!(n.sign, DeterminantSign::Negative);
        assert_abs_diff_eq!(n.det, -84.0, epsilon = 1e-12);
        assert!(n.signs_agree);
        assert_eq!(c(5.0, -1.0, -4.0).sign, DeterminantSign::Positive);
        assert_eq!(c(1.0, 0.0, -1.0).sign, DeterminantSign::ZeroBand);
    }

    #[test]
    fn threshold_examples() {
        let sp =
            |a: f64, b: f64, g: f64| weyl_spectrum(&[[a, 0.0, 0.0], [0.0, b, 0.0], [0.0, 0.0, g]]);
        let boundary = threshold_check(&sp(4.0, 1.0, -5.0)).unwrap();
        assert!(boundary.boundary && boundary.lhs);
        assert_abs_diff_eq!(boundary.ratio, threshold(), epsilon = 1e-12);
        let kahler = threshold_check(&sp(2.0, -1.0, -1.0)).unwrap();
        assert!(kahler.lhs && kahler.rhs && kahler.agree);
        let neg = threshold_check(&sp(4.0, 3.0, -7.0)).unwrap();
        assert!(!neg.lhs && !neg.rhs);
        assert_abs_diff_eq!(neg.ratio, -84.0 / 74f64.powf(1.5), epsilon = 1e-15);
        assert!(threshold_check(&sp(0.0, 0.0, 0.0)).is_err());
    }

    #[test]
    fn ratio_function_values() {
        assert_eq!(ratio_function(0.0).unwrap(), 0.0);
        assert_abs_diff_eq!(ratio_function(0.25).unwrap(), threshold(), epsilon = 1e-15);
        assert_abs_diff_eq!(
            ratio_function(1.0).unwrap(),
            -1.0 / 54f64.sqrt(),
            epsilon = 1e-15
        );
        assert_abs_diff_eq!(threshold(), -0.0734778, epsilon = 1e-7);
        assert!(ratio_function(1.5).is_err());
    }

    #[test]
    fn fubini_study_spectrum_and_eigenform() {
        let g = fs();
        let p = ChartPoint([0.3, -0.2, 0.1, 0.5]);
        let cj = CurvatureJets::at(&g, &p, 0, Orientation::Standard).unwrap();
        let dec = cj.decomposition();
        let sp = weyl_spectrum(&dec.wplus);
        assert_abs_diff_eq!(sp.alpha, 2.0, epsilon = 1e-10);
        assert_abs_diff_eq!(sp.beta, -1.0, epsilon = 1e-10);
        assert_abs_diff_eq!(dec.s, 12.0, epsilon = 1e-10);
        assert_abs_diff_eq!(dec.s_from_blocks, 12.0, epsilon = 1e-10);
        assert!(dec.ricci0.iter().flatten().all(|x| x.abs() < 1e-10));
        assert!(dec.wminus.iter().flatten().all(|x| x.abs() < 1e-10));
        let omega = top_eigenform(&dec, &sp, DEFAULT_GAP_TOL, None).unwrap();
        let kahler = g.kahler_form().unwrap().values(&p).unwrap();
        let sign = if omega[0][1] * kahler[0][1] > 0.0 {
            1.0
        } else {
            -1.0
        };
        for a in 0..4 {
            for b in 0..4 {
                assert_abs_diff_eq!(omega[a][b], sign * kahler[a][b], epsilon = 1e-10);
            }
        }
        let gv = g.jets(&p, 0).unwrap().values();
        let j = almost_complex(&omega, &gv, Orientation::Standard).unwrap();
        for a in 0..4 {
            for c in 0..4 {
                let jj: f64 = (0..4).map(|b| j[a][b] * j[b][c]).sum();
                assert_abs_diff_eq!(jj, if a == c { -1.0 } else { 0.0 }, epsilon = 1e-10);
            }
        }
        assert_abs_diff_eq!((0..4).map(|a| j[a][a]).sum::<f64>(), 0.0, epsilon = 1e-12);
    }

    #[test]
    fn ricci0_from_blocks_matches_contraction() {
        let g = MetricField::from_components(
            "g",
            &[
                "1 + x1^2",
                "0.1*x2",
                "0",
                "0.2*x0",
                "1 + x2^2",
                "0",
                "0.1*x3",
                "2 + x0*x3",
                "0",
                "1 + x0^2",
            ],
            ChartDomain::cube(1.0),
        )
        .unwrap();
        let p = ChartPoint([0.2, 0.4, -0.3, 0.1]);
        let cj = CurvatureJets::at(&g, &p, 0, Orientation::Standard).unwrap();
        let dec = cj.decomposition();
        let ric = cj.geometry.ricci();
        let gv = mat4j_values(&cj.geometry.g);
        assert_abs_diff_eq!(dec.s, dec.s_from_blocks, epsilon = 1e-10);
        let tr_minus = 4.0 * (dec.operator[3][3] + dec.operator[4][4] + dec.operator[5][5]);
        assert_abs_diff_eq!(dec.s, tr_minus, epsilon = 1e-10);
        for b in 0..4 {
            for d in 0..4 {
                let expect = ric[b][d].value() - dec.s / 4.0 * gv[b][d];
                assert_abs_diff_eq!(dec.ricci0[b][d], expect, epsilon = 1e-10);
            }
        }
        // reassembly of the full curvature tensor from the blocks
        let forms: [Mat4; 6] = core::array::from_fn(|i| {
            if i < 3 {
                dec.lambda_plus[i]
            } else {
                dec.lambda_minus[i - 3]
            }
        });
        for a in 0..4 {
            for b in 0..4 {
                for c in 0..4 {
                    for d in 0..4 {
                        let mut acc = 0.0;
                        for i in 0..6 {
                            for j in 0..6 {
                                acc += dec.operator[i][j] * forms[i][a][b] * forms[j][c][d];
                            }
                        }
                        assert_abs_diff_eq!(
                            acc,
                            cj.geometry.riemann.get(&[a, b, c, d]).value(),
                            epsilon = 1e-9
                        );
                    }
                }
            }
        }
    }

    #[test]
    fn round_sphere_has_no_top_eigenform() {
        let g = MetricField::from_components(
            "s4",
            &[
                "4/(1+x0^2+x1^2+x2^2+x3^2)^2",
                "0",
                "0",
                "0",
                "4/(1+x0^2+x1^2+x2^2+x3^2)^2",
                "0",
                "0",
                "4/(1+x0^2+x1^2+x2^2+x3^2)^2",
                "0",
                "4/(1+x0^2+x1^2+x2^2+x3^2)^2",
            ],
            ChartDomain::whole(),
        )
        .unwrap();
        let cj = CurvatureJets::at(&g, &ChartPoint([0.0; 4]), 0, Orientation::Standard).unwrap();
        let err = cj.top_eigen(DEFAULT_GAP_TOL, None).unwrap_err();
        assert!(
            err.to_string()
                .contains("top eigenvalue not simple: W+ = 0"),
            "{err}"
        );
    }

    #[test]
    fn eigen_jets_match_first_order_perturbation() {
        let g = MetricField::from_components(
            "g",
            &[
                "1 + x1^2 + 0.3*x2",
                "0.1*x2",
                "0",
                "0.2*x0*x1",
                "1 + x2^2",
                "0.05*x3",
                "0.1*x3",
                "2 + x0*x3",
                "0",
                "1 + x0^2 + x2*x3",
            ],
            ChartDomain::cube(1.0),
        )
        .unwrap();
        let p = ChartPoint([0.2, 0.4, -0.3, 0.1]);
        let cj = CurvatureJets::at(&g, &p, 1, Orientation::Standard).unwrap();
        let w = cj.wplus();
        let top = cj.top_eigen(DEFAULT_GAP_TOL, None).unwrap();
        let w0 = values3(&w);
        let dw: [Mat3; 4] = core::array::from_fn(|e| {
            core::array::from_fn(|i| core::array::from_fn(|j| w[i][j].derivative(e).value()))
        });
        let (dalpha, dv) = top_eigen_first_order(&w0, &dw);
        let v0: Vec3 = core::array::from_fn(|i| top.vector[i].value());
        let sign = dot3(&v0, &weyl_spectrum(&w0).vectors[0]).signum();
        for e in 0..4 {
            assert_abs_diff_eq!(top.alpha.derivative(e).value(), dalpha[e], epsilon = 1e-9);
            for i in 0..3 {
                assert_abs_diff_eq!(
                    top.vector[i].derivative(e).value(),
                    sign * dv[e][i],
                    epsilon = 1e-8
                );
            }
        }
    }
}
