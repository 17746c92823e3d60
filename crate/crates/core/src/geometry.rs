//! Metric fields on a chart and the jet-valued Levi-Civita calculus built on
//! them: Christoffel symbols, Riemann curvature, covariant derivatives and
//! conformal rescaling.
//!
//! Conventions: `R(X,Y)Z = ∇_X∇_Y Z − ∇_Y∇_X Z − ∇_[X,Y] Z` with
//! `R(∂_c, ∂_d)∂_b = R^a_{bcd} ∂_a`, `R_abcd = g_ae R^e_{bcd}`,
//! `Ric_bd = g^{ac} R_abcd` and `s = g^{bd} Ric_bd`. The unit round sphere has
//! `R_abcd = g_ac g_bd − g_ad g_bc` and `s = 12`.
//!
//! Order ledger: Christoffel symbols of order `k` consume metric order `k + 1`,
//! curvature of order `k` consumes `k + 2`, and each covariant derivative one
//! more. Requests beyond what a source provides fail with
//! [`Error::OrderExhausted`].

use alloc::boxed::Box;
use alloc::format;
use alloc::string::{String, ToString};
use alloc::sync::Arc;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::expr::{parse_expression, Expression};
use crate::forms::TwoFormField;
use crate::jet::{Jet, MAX_ORDER};
use crate::linalg::{
    check_positive_definite, det_inverse4, mat4j_truncate, mat4j_values, Mat4, Mat4J,
};
use crate::weyl::{CurvatureJets, Orientation};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Half-width used for unbounded chart directions when sampling points.
pub const SAMPLE_EXTENT: f64 = 2.0;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChartPoint(pub [f64; 4]);

impl ChartPoint {
    pub fn new(x: [f64; 4]) -> Result<ChartPoint> {
        if x.iter().all(|v| v.is_finite()) {
            Ok(ChartPoint(x))
        } else {
            Err(Error::InvalidInput(format!("non-finite chart point {x:?}")))
        }
    }

    pub fn coords(&self) -> &[f64; 4] {
        &self.0
    }
}

/// Closed coordinate box; infinite bounds mean the chart extends without limit
/// in that direction.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChartDomain {
    pub bounds: [[f64; 2]; 4],
}

impl ChartDomain {
    pub fn whole() -> ChartDomain {
        ChartDomain {
            bounds: [[f64::NEG_INFINITY, f64::INFINITY]; 4],
        }
    }

    pub fn cube(half_width: f64) -> ChartDomain {
        ChartDomain {
            bounds: [[-half_width, half_width]; 4],
        }
    }

    pub fn new(bounds: [[f64; 2]; 4]) -> Result<ChartDomain> {
        for [lo, hi] in bounds {
            if lo.is_nan() || hi.is_nan() || !(lo < hi) {
                return Err(Error::InvalidInput(format!(
                    "invalid domain interval [{lo}, {hi}]"
                )));
            }
        }
        Ok(ChartDomain { bounds })
    }

    pub fn contains(&self, p: &ChartPoint) -> bool {
        p.0.iter()
            .zip(&self.bounds)
            .all(|(x, [lo, hi])| *x >= *lo && *x <= *hi)
    }

    pub fn is_bounded(&self) -> bool {
        self.bounds
            .iter()
            .all(|[lo, hi]| lo.is_finite() && hi.is_finite())
    }

    /// Finite box used for grids and random points.
    pub fn sampling_bounds(&self) -> [[f64; 2]; 4] {
        self.bounds.map(|[lo, hi]| {
            [
                if lo.is_finite() {
                    lo
                } else {
                    (-SAMPLE_EXTENT).min(hi - 1.0)
                },
                if hi.is_finite() {
                    hi
                } else {
                    SAMPLE_EXTENT.max(lo + 1.0)
                },
            ]
        })
    }

    pub fn center(&self) -> ChartPoint {
        ChartPoint(self.sampling_bounds().map(|[lo, hi]| 0.5 * (lo + hi)))
    }

    /// Grid of `n` points per axis strictly inside the sampling box, shrunk by
    /// `margin` on every side; row-major with `x3` fastest.
    pub fn grid(&self, n: usize, margin: f64) -> Vec<ChartPoint> {
        let b = self.sampling_bounds();
        let axis = |i: usize, j: usize| -> f64 {
            let (lo, hi) = (b[i][0] + margin, b[i][1] - margin);
            if n == 1 {
                0.5 * (lo + hi)
            } else {
                lo + (hi - lo) * j as f64 / (n - 1) as f64
            }
        };
        let mut out = Vec::with_capacity(n.pow(4));
        for i0 in 0..n {
            for i1 in 0..n {
                for i2 in 0..n {
                    for i3 in 0..n {
                        out.push(ChartPoint([
                            axis(0, i0),
                            axis(1, i1),
                            axis(2, i2),
                            axis(3, i3),
                        ]));
                    }
                }
            }
        }
        out
    }

    /// `n` points drawn uniformly from the sampling box shrunk by `margin`,
    /// reproducible from `seed`.
    pub fn random_points(&self, n: usize, seed: u64, margin: f64) -> Vec<ChartPoint> {
        let b = self.sampling_bounds();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..n)
            .map(|_| {
                ChartPoint(core::array::from_fn(|i| {
                    rng.gen_range(b[i][0] + margin..b[i][1] - margin)
                }))
            })
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Provenance {
    ExplicitComponents,
    KahlerPotential,
    ConformalRescale,
    Derdzinski,
}

impl Provenance {
    pub fn as_str(self) -> &'static str {
        match self {
            Provenance::ExplicitComponents => "explicit-components",
            Provenance::KahlerPotential => "kahler-potential",
            Provenance::ConformalRescale => "conformal-rescale",
            Provenance::Derdzinski => "derdzinski",
        }
    }
}

/// Scalar function on the chart, queryable in jets.
#[derive(Debug, Clone)]
pub enum ScalarField {
    Constant(f64),
    Expr(Expression),
    /// Scalar curvature of a metric.
    ScalarCurvature(Arc<MetricField>),
    /// `α^exponent` for the top eigenvalue α of the metric's self-dual Weyl
    /// operator; requires α > 0 and a simple top eigenvalue.
    TopEigenvaluePower {
        metric: Arc<MetricField>,
        exponent: f64,
        orientation: Orientation,
        gap_tol: f64,
    },
}

impl ScalarField {
    pub fn parse(src: &str) -> Result<ScalarField> {
        Ok(ScalarField::Expr(parse_expression(src)?))
    }

    pub fn max_order(&self) -> u8 {
        match self {
            ScalarField::Constant(_) | ScalarField::Expr(_) => MAX_ORDER,
            ScalarField::ScalarCurvature(m) | ScalarField::TopEigenvaluePower { metric: m, .. } => {
                m.max_order().saturating_sub(2)
            }
        }
    }

    fn source_metric(&self) -> Option<&Arc<MetricField>> {
        match self {
            ScalarField::ScalarCurvature(m) | ScalarField::TopEigenvaluePower { metric: m, .. } => {
                Some(m)
            }
            _ => None,
        }
    }

    pub fn jets(&self, p: &ChartPoint, k: u8) -> Result<Jet> {
        match self.source_metric() {
            Some(m) => {
                let mj = m.jets(p, k + 2)?;
                self.jets_from_source(&mj, k)
            }
            None => match self {
                ScalarField::Constant(c) => Ok(Jet::constant(*c, k)),
                ScalarField::Expr(e) => e.jet(&p.0, k),
                _ => unreachable!(),
            },
        }
    }

    /// Evaluates a curvature-derived field from already computed jets of its
    /// source metric (order `k + 2`).
    fn jets_from_source(&self, mj: &MetricJets, k: u8) -> Result<Jet> {
        match self {
            ScalarField::ScalarCurvature(_) => {
                let geo = LocalGeometry::new(mj, k)?;
                Ok(geo.scalar_curvature())
            }
            ScalarField::TopEigenvaluePower {
                exponent,
                orientation,
                gap_tol,
                ..
            } => {
                let cj = CurvatureJets::from_metric(mj, k, *orientation)?;
                let top = cj.top_eigen(*gap_tol, None)?;
                let alpha = top.alpha.value();
                if !(alpha > 0.0) {
                    return Err(Error::NonPositive {
                        what: "top eigenvalue of W+".to_string(),
                        value: alpha,
                    });
                }
                top.alpha.powf(*exponent)
            }
            _ => unreachable!(),
        }
    }
}

#[derive(Debug, Clone)]
pub enum MetricSource {
    /// `g_ab` for `a <= b` in the order 00 01 02 03 11 12 13 22 23 33.
    Components(Box<[Expression; 10]>),
    /// Real part of `i ∂∂̄ φ` with `z¹ = x0 + i x1`, `z² = x2 + i x3`.
    KahlerPotential(Expression),
    /// `g = f⁻² h`.
    Conformal {
        base: Arc<MetricField>,
        factor: ScalarField,
    },
}

/// Index of `(a, b)` in the packed upper triangle.
pub fn packed_index(a: usize, b: usize) -> usize {
    let (a, b) = if a <= b { (a, b) } else { (b, a) };
    [0, 4, 7, 9][a] + (b - a)
}

/// Jets of all metric components at one point.
#[derive(Debug, Clone)]
pub struct MetricJets {
    pub g: Mat4J,
}

impl MetricJets {
    pub fn order(&self) -> u8 {
        self.g[0][0].order()
    }

    pub fn values(&self) -> Mat4 {
        mat4j_values(&self.g)
    }

    pub fn truncate(&self, order: u8) -> MetricJets {
        MetricJets {
            g: mat4j_truncate(&self.g, order),
        }
    }
}

/// Symmetric positive-definite tensor field on a chart.
#[derive(Debug, Clone)]
pub struct MetricField {
    name: String,
    source: MetricSource,
    domain: ChartDomain,
    provenance: Provenance,
    kahler_form: Option<TwoFormField>,
    source_text: Vec<String>,
}

impl MetricField {
    /// Metric from the ten upper-triangle component expressions
    /// (`g00 g01 g02 g03 g11 g12 g13 g22 g23 g33`).
    pub fn from_components(name: &str, exprs: &[&str], domain: ChartDomain) -> Result<MetricField> {
        if exprs.len() != 10 {
            return Err(Error::InvalidInput(format!(
                "expected 10 metric components, got {}",
                exprs.len()
            )));
        }
        let parsed: Vec<Expression> = exprs
            .iter()
            .map(|s| parse_expression(s))
            .collect::<core::result::Result<_, _>>()?;
        let comps: [Expression; 10] = parsed.try_into().expect("length checked");
        let m = MetricField {
            name: name.to_string(),
            source: MetricSource::Components(Box::new(comps)),
            domain,
            provenance: Provenance::ExplicitComponents,
            kahler_form: None,
            source_text: exprs.iter().map(|s| s.to_string()).collect(),
        };
        m.jets(&domain.center(), 0)?;
        Ok(m)
    }

    /// Kähler metric of the potential `phi` for the chart complex structure
    /// `z¹ = x0 + i x1`, `z² = x2 + i x3`.
    pub fn from_kahler_potential(
        name: &str,
        phi: &str,
        domain: ChartDomain,
    ) -> Result<MetricField> {
        let e = parse_expression(phi)?;
        let m = MetricField {
            name: name.to_string(),
            source: MetricSource::KahlerPotential(e.clone()),
            domain,
            provenance: Provenance::KahlerPotential,
            kahler_form: Some(TwoFormField::KahlerForm(e)),
            source_text: alloc::vec![phi.to_string()],
        };
        m.jets(&domain.center(), 0)?;
        Ok(m)
    }

    /// `g = f⁻² h`.
    pub fn conformal(
        name: &str,
        base: Arc<MetricField>,
        factor: ScalarField,
        provenance: Provenance,
    ) -> MetricField {
        MetricField {
            name: name.to_string(),
            domain: base.domain,
            source: MetricSource::Conformal { base, factor },
            provenance,
            kahler_form: None,
            source_text: Vec::new(),
        }
    }

    /// Attaches a known Kähler form (as for flat space given by components).
    pub fn with_kahler_form(mut self, form: TwoFormField) -> MetricField {
        self.kahler_form = Some(form);
        self
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn domain(&self) -> &ChartDomain {
        &self.domain
    }

    pub fn with_domain(mut self, domain: ChartDomain) -> MetricField {
        self.domain = domain;
        self
    }

    pub fn provenance(&self) -> Provenance {
        self.provenance
    }

    pub fn source(&self) -> &MetricSource {
        &self.source
    }

    /// Original source text of the component expressions or the potential.
    pub fn source_text(&self) -> &[String] {
        &self.source_text
    }

    pub fn kahler_form(&self) -> Option<&TwoFormField> {
        self.kahler_form.as_ref()
    }

    /// Highest jet order available for the components.
    pub fn max_order(&self) -> u8 {
        match &self.source {
            MetricSource::Components(_) => MAX_ORDER,
            MetricSource::KahlerPotential(_) => MAX_ORDER - 2,
            MetricSource::Conformal { base, factor } => base.max_order().min(factor.max_order()),
        }
    }

    /// Jets of all components at `p` to order `k`, after checking the order
    /// budget, the chart domain and positive-definiteness at `p`.
    pub fn jets(&self, p: &ChartPoint, k: u8) -> Result<MetricJets> {
        let available = self.max_order();
        if k > available {
            return Err(Error::OrderExhausted {
                needed: k,
                available,
            });
        }
        if !self.domain.contains(p) {
            return Err(Error::OutsideDomain { point: p.0 });
        }
        let mj = self.raw_jets(p, k)?;
        check_positive_definite(&mj.values())?;
        Ok(mj)
    }

    fn raw_jets(&self, p: &ChartPoint, k: u8) -> Result<MetricJets> {
        match &self.source {
            MetricSource::Components(exprs) => {
                let mut packed: Vec<Jet> = Vec::with_capacity(10);
                for (i, e) in exprs.iter().enumerate() {
                    // Repeated components (diagonal metrics) are expanded once.
                    let jet = match exprs[..i].iter().position(|o| o == e) {
                        Some(j) => packed[j].clone(),
                        None => e.jet(&p.0, k)?,
                    };
                    packed.push(jet);
                }
                Ok(MetricJets {
                    g: core::array::from_fn(|a| {
                        core::array::from_fn(|b| packed[packed_index(a, b)].clone())
                    }),
                })
            }
            MetricSource::KahlerPotential(phi) => {
                let hess = potential_hessian(phi, p, k)?;
                Ok(MetricJets {
                    g: kahler_metric_from_hessian(&hess),
                })
            }
            MetricSource::Conformal { base, factor } => {
                let (h, f) = match factor.source_metric() {
                    Some(m) if Arc::ptr_eq(m, base) => {
                        let hj = base.jets(p, k + 2)?;
                        let f = factor.jets_from_source(&hj, k)?;
                        (hj.truncate(k), f)
                    }
                    _ => (base.jets(p, k)?, factor.jets(p, k)?),
                };
                if !(f.value() > 0.0) {
                    return Err(Error::NonPositive {
                        what: "conformal factor f".to_string(),
                        value: f.value(),
                    });
                }
                let w = f.powi(-2)?;
                Ok(MetricJets {
                    g: core::array::from_fn(|a| core::array::from_fn(|b| &h.g[a][b] * &w)),
                })
            }
        }
    }
}

/// Second derivatives `∂_a ∂_b φ` as jets of order `k`.
pub(crate) fn potential_hessian(phi: &Expression, p: &ChartPoint, k: u8) -> Result<Mat4J> {
    if k + 2 > MAX_ORDER {
        return Err(Error::OrderExhausted {
            needed: k + 2,
            available: MAX_ORDER,
        });
    }
    let pj = phi.jet(&p.0, k + 2)?;
    let first: [Jet; 4] = core::array::from_fn(|a| pj.derivative(a));
    Ok(core::array::from_fn(|a| {
        core::array::from_fn(|b| first[a].derivative(b))
    }))
}

/// With `A_jk = φ_{x_j x_k} + φ_{y_j y_k}` and `B_jk = φ_{x_j y_k} − φ_{y_j x_k}`:
/// `g(x_j,x_k) = g(y_j,y_k) = A_jk / 2`, `g(x_j,y_k) = B_jk / 2`.
fn kahler_metric_from_hessian(h: &Mat4J) -> Mat4J {
    let (a, b) = hermitian_parts(h);
    core::array::from_fn(|r| {
        core::array::from_fn(|c| {
            let (j, rj) = (r / 2, r % 2);
            let (k, ck) = (c / 2, c % 2);
            match (rj, ck) {
                (0, 0) | (1, 1) => a[j][k].scale(0.5),
                (0, 1) => b[j][k].scale(0.5),
                _ => b[k][j].scale(0.5),
            }
        })
    })
}

/// Kähler form `ω = g(J·,·)` of the potential: `ω(x_j,x_k) = ω(y_j,y_k) = −B_jk/2`,
/// `ω(x_j,y_k) = A_jk/2`.
pub(crate) fn kahler_form_from_hessian(h: &Mat4J) -> Mat4J {
    let (a, b) = hermitian_parts(h);
    core::array::from_fn(|r| {
        core::array::from_fn(|c| {
            let (j, rj) = (r / 2, r % 2);
            let (k, ck) = (c / 2, c % 2);
            match (rj, ck) {
                (0, 0) | (1, 1) => b[j][k].scale(-0.5),
                (0, 1) => a[j][k].scale(0.5),
                _ => a[j][k].scale(-0.5),
            }
        })
    })
}

type Mat2J = [[Jet; 2]; 2];

fn hermitian_parts(h: &Mat4J) -> (Mat2J, Mat2J) {
    let x = |j: usize| 2 * j;
    let y = |j: usize| 2 * j + 1;
    let a = core::array::from_fn(|j| core::array::from_fn(|k| &h[x(j)][x(k)] + &h[y(j)][y(k)]));
    let b = core::array::from_fn(|j| core::array::from_fn(|k| &h[x(j)][y(k)] - &h[y(j)][x(k)]));
    (a, b)
}

/// Dense component array of a tensor of rank ≤ 6 in four dimensions. Slot
/// variance is a convention of the producer; unless stated otherwise all
/// slots are covariant.
#[derive(Debug, Clone, PartialEq)]
pub struct TensorJet {
    rank: usize,
    comps: Vec<Jet>,
}

impl TensorJet {
    pub fn from_fn(rank: usize, mut f: impl FnMut(&[usize]) -> Jet) -> TensorJet {
        let n = 4usize.pow(rank as u32);
        let mut idx = [0usize; 8];
        let comps = (0..n)
            .map(|flat| {
                unflatten(flat, rank, &mut idx);
                f(&idx[..rank])
            })
            .collect();
        TensorJet { rank, comps }
    }

    pub fn zeros(rank: usize, order: u8) -> TensorJet {
        TensorJet {
            rank,
            comps: alloc::vec![Jet::zero(order); 4usize.pow(rank as u32)],
        }
    }

    pub fn rank(&self) -> usize {
        self.rank
    }

    pub fn order(&self) -> u8 {
        self.comps
            .iter()
            .map(|c| c.order())
            .min()
            .unwrap_or(MAX_ORDER)
    }

    #[inline]
    pub fn flat(idx: &[usize]) -> usize {
        idx.iter().fold(0, |acc, &i| acc * 4 + i)
    }

    #[inline]
    pub fn get(&self, idx: &[usize]) -> &Jet {
        &self.comps[Self::flat(idx)]
    }

    pub fn set(&mut self, idx: &[usize], v: Jet) {
        let f = Self::flat(idx);
        self.comps[f] = v;
    }

    pub fn comps(&self) -> &[Jet] {
        &self.comps
    }

    pub fn values(&self) -> Vec<f64> {
        self.comps.iter().map(|c| c.value()).collect()
    }

    pub fn truncate(&self, order: u8) -> TensorJet {
        TensorJet {
            rank: self.rank,
            comps: self.comps.iter().map(|c| c.truncate(order)).collect(),
        }
    }

    pub fn scale_by(&self, f: &Jet) -> TensorJet {
        TensorJet {
            rank: self.rank,
            comps: self.comps.iter().map(|c| c * f).collect(),
        }
    }

    pub fn map(&self, f: impl Fn(&Jet) -> Jet) -> TensorJet {
        TensorJet {
            rank: self.rank,
            comps: self.comps.iter().map(f).collect(),
        }
    }

    pub fn zip_with(&self, other: &TensorJet, f: impl Fn(&Jet, &Jet) -> Jet) -> TensorJet {
        assert_eq!(self.rank, other.rank);
        TensorJet {
            rank: self.rank,
            comps: self
                .comps
                .iter()
                .zip(&other.comps)
                .map(|(a, b)| f(a, b))
                .collect(),
        }
    }

    /// Raises every slot with `ginv`.
    pub fn raise_all(&self, ginv: &Mat4J) -> TensorJet {
        let mut t = self.clone();
        for slot in 0..self.rank {
            t = t.raise_slot(slot, ginv);
        }
        t
    }

    fn raise_slot(&self, slot: usize, ginv: &Mat4J) -> TensorJet {
        TensorJet::from_fn(self.rank, |idx| {
            let mut j = idx.to_vec();
            let a = idx[slot];
            let order = self.order().min(ginv[0][0].order());
            let mut acc = Jet::zero(order);
            for b in 0..4 {
                j[slot] = b;
                acc.add_product(&ginv[a][b], self.get(&j));
            }
            acc
        })
    }

    /// Full contraction `T_{i..} S^{i..}` where `raised` carries upper indices.
    pub fn contract_full(&self, raised: &TensorJet) -> Jet {
        let order = self.order().min(raised.order());
        let mut acc = Jet::zero(order);
        for (a, b) in self.comps.iter().zip(&raised.comps) {
            acc.add_product(a, b);
        }
        acc
    }

    /// `|T|² = T_{i..} T^{i..}` at the base point.
    pub fn norm_sq_value(&self, ginv: &Mat4) -> f64 {
        let vals = self.values();
        let raised = raise_values(&vals, self.rank, ginv);
        vals.iter().zip(&raised).map(|(a, b)| a * b).sum()
    }
}

fn unflatten(mut flat: usize, rank: usize, idx: &mut [usize; 8]) {
    for s in (0..rank).rev() {
        idx[s] = flat % 4;
        flat /= 4;
    }
}

/// Raises every slot of a plain component array.
pub fn raise_values(vals: &[f64], rank: usize, ginv: &Mat4) -> Vec<f64> {
    let mut cur = vals.to_vec();
    let mut idx = [0usize; 8];
    for slot in 0..rank {
        let stride = 4usize.pow((rank - 1 - slot) as u32);
        let mut next = alloc::vec![0.0; cur.len()];
        for (flat, out) in next.iter_mut().enumerate() {
            unflatten(flat, rank, &mut idx);
            let a = idx[slot];
            let base = flat - a * stride;
            *out = (0..4).map(|b| ginv[a][b] * cur[base + b * stride]).sum();
        }
        cur = next;
    }
    cur
}

/// Metric, inverse, Christoffel symbols and curvature at one point.
///
/// `gamma` is `Γ^a_bc` (first slot contravariant) of order `k + 1`; `riemann`
/// is `R_abcd` of order `k`; `g` and `ginv` keep the order they were built from.
#[derive(Debug, Clone)]
pub struct LocalGeometry {
    pub g: Mat4J,
    pub ginv: Mat4J,
    pub det: Jet,
    pub gamma: TensorJet,
    pub riemann: TensorJet,
}

impl LocalGeometry {
    /// Curvature of order `k` from metric jets of order at least `k + 2`.
    pub fn new(mj: &MetricJets, k: u8) -> Result<LocalGeometry> {
        let available = mj.order();
        if available < k + 2 {
            return Err(Error::OrderExhausted {
                needed: k + 2,
                available,
            });
        }
        let g = mj.truncate(k + 2).g;
        let (det, ginv) = det_inverse4(&g)?;
        let gamma = christoffel_from(&g, &ginv);
        let riemann = riemann_from(&g, &gamma);
        Ok(LocalGeometry {
            g,
            ginv,
            det,
            gamma,
            riemann,
        })
    }

    pub fn order(&self) -> u8 {
        self.riemann.order()
    }

    /// `Ric_bd = g^{ac} R_abcd`.
    pub fn ricci(&self) -> Mat4J {
        let k = self.order();
        core::array::from_fn(|b| {
            core::array::from_fn(|d| {
                let mut acc = Jet::zero(k);
                for a in 0..4 {
                    for c in 0..4 {
                        acc.add_product(&self.ginv[a][c], self.riemann.get(&[a, b, c, d]));
                    }
                }
                acc
            })
        })
    }

    pub fn scalar_curvature(&self) -> Jet {
        let ric = self.ricci();
        let mut s = Jet::zero(self.order());
        for b in 0..4 {
            for d in 0..4 {
                s.add_product(&self.ginv[b][d], &ric[b][d]);
            }
        }
        s
    }

    /// Covariant derivative of an all-covariant tensor of order `≥ m + 1`,
    /// returned at order `m` with the derivative slot first.
    pub fn covariant_derivative(&self, t: &TensorJet) -> TensorJet {
        covariant_derivative_with(&self.gamma, t)
    }
}

/// `Γ^a_bc = ½ g^{ad}(∂_b g_dc + ∂_c g_db − ∂_d g_bc)` at one order below `g`.
fn christoffel_from(g: &Mat4J, ginv: &Mat4J) -> TensorJet {
    let dg: [[[Jet; 4]; 4]; 4] = core::array::from_fn(|e| {
        core::array::from_fn(|a| core::array::from_fn(|b| g[a][b].derivative(e)))
    });
    let mut first = alloc::vec![Jet::zero(0); 64];
    for d in 0..4 {
        for b in 0..4 {
            for c in b..4 {
                let v = (&(&dg[b][d][c] + &dg[c][d][b]) - &dg[d][b][c]).scale(0.5);
                first[d * 16 + b * 4 + c] = v.clone();
                first[d * 16 + c * 4 + b] = v;
            }
        }
    }
    let order = g[0][0].order() - 1;
    let mut out = TensorJet::zeros(3, order);
    for a in 0..4 {
        for b in 0..4 {
            for c in b..4 {
                let mut acc = Jet::zero(order);
                for d in 0..4 {
                    acc.add_product(&ginv[a][d], &first[d * 16 + b * 4 + c]);
                }
                out.set(&[a, c, b], acc.clone());
                out.set(&[a, b, c], acc);
            }
        }
    }
    out
}

/// `R_abcd = g_ae (∂_c Γ^e_db − ∂_d Γ^e_cb + Γ^e_cf Γ^f_db − Γ^e_df Γ^f_cb)`.
fn riemann_from(g: &Mat4J, gamma: &TensorJet) -> TensorJet {
    let k = gamma.order() - 1;
    let mut up = alloc::vec![Jet::zero(k); 256];
    for e in 0..4 {
        for b in 0..4 {
            for c in 0..4 {
                for d in c + 1..4 {
                    let mut acc =
                        &gamma.get(&[e, d, b]).derivative(c) - &gamma.get(&[e, c, b]).derivative(d);
                    for f in 0..4 {
                        acc.add_product(gamma.get(&[e, c, f]), gamma.get(&[f, d, b]));
                        let t = gamma.get(&[e, d, f]) * gamma.get(&[f, c, b]);
                        acc -= &t;
                    }
                    up[TensorJet::flat(&[e, b, c, d])] = acc;
                }
            }
        }
    }
    let mut r = TensorJet::zeros(4, k);
    for a in 0..4 {
        for b in 0..4 {
            for c in 0..4 {
                for d in c + 1..4 {
                    let mut acc = Jet::zero(k);
                    for e in 0..4 {
                        acc.add_product(&g[a][e], &up[TensorJet::flat(&[e, b, c, d])]);
                    }
                    r.set(&[a, b, d, c], -&acc);
                    r.set(&[a, b, c, d], acc);
                }
            }
        }
    }
    r
}

/// Curvature at the base point only, in plain floating point.
#[derive(Debug, Clone, PartialEq)]
pub struct PointCurvature {
    pub g: Mat4,
    pub ginv: Mat4,
    pub det: f64,
    /// `R_abcd` in row-major order, same convention as [`LocalGeometry`].
    pub riemann: Vec<f64>,
}

impl PointCurvature {
    /// `R_abcd = ½(∂_b∂_c g_ad + ∂_a∂_d g_bc − ∂_a∂_c g_bd − ∂_b∂_d g_ac)
    /// + g_ef (Γ^e_bc Γ^f_ad − Γ^e_bd Γ^f_ac)` from metric jets of order ≥ 2.
    pub fn new(mj: &MetricJets) -> Result<PointCurvature> {
        let available = mj.order();
        if available < 2 {
            return Err(Error::OrderExhausted {
                needed: 2,
                available,
            });
        }
        let g = mj.values();
        let (det, ginv) = crate::linalg::det_inverse4_f64(&g)?;
        let d1 = |a: usize, b: usize, e: usize| mj.g[a][b].taylor_coeffs()[1 + e];
        let d2 = |a: usize, b: usize, e: usize, f: usize| {
            let mut m = [0u8; 4];
            m[e] += 1;
            m[f] += 1;
            mj.g[a][b].partial(&m)
        };
        let mut first = [[[0.0; 4]; 4]; 4];
        for d in 0..4 {
            for b in 0..4 {
                for c in 0..4 {
                    first[d][b][c] = 0.5 * (d1(d, c, b) + d1(d, b, c) - d1(b, c, d));
                }
            }
        }
        let mut gamma = [[[0.0; 4]; 4]; 4];
        for a in 0..4 {
            for b in 0..4 {
                for c in 0..4 {
                    gamma[a][b][c] = (0..4).map(|d| ginv[a][d] * first[d][b][c]).sum();
                }
            }
        }
        let mut riemann = alloc::vec![0.0; 256];
        for a in 0..4 {
            for b in 0..4 {
                for c in 0..4 {
                    for d in c + 1..4 {
                        let mut v = 0.5
                            * (d2(a, d, b, c) + d2(b, c, a, d) - d2(b, d, a, c) - d2(a, c, b, d));
                        for e in 0..4 {
                            v += gamma[e][b][c] * first[e][a][d] - gamma[e][b][d] * first[e][a][c];
                        }
                        riemann[TensorJet::flat(&[a, b, c, d])] = v;
                        riemann[TensorJet::flat(&[a, b, d, c])] = -v;
                    }
                }
            }
        }
        Ok(PointCurvature {
            g,
            ginv,
            det,
            riemann,
        })
    }

    pub fn at(g: &MetricField, p: &ChartPoint) -> Result<PointCurvature> {
        PointCurvature::new(&g.jets(p, 2)?)
    }

    pub fn scalar_curvature(&self) -> f64 {
        let mut s = 0.0;
        for a in 0..4 {
            for b in 0..4 {
                for c in 0..4 {
                    for d in 0..4 {
                        s += self.ginv[a][c]
                            * self.ginv[b][d]
                            * self.riemann[TensorJet::flat(&[a, b, c, d])];
                    }
                }
            }
        }
        s
    }
}

/// `(∇T)_{e a₁…a_r} = ∂_e T_{a₁…a_r} − Σ_s Γ^f_{e a_s} T_{…f…}`.
pub fn covariant_derivative_with(gamma: &TensorJet, t: &TensorJet) -> TensorJet {
    let rank = t.rank();
    let order = t.order().saturating_sub(1).min(gamma.order());
    assert!(t.order() > 0, "tensor needs order ≥ 1 to differentiate");
    let mut j = [0usize; 8];
    TensorJet::from_fn(rank + 1, |idx| {
        let e = idx[0];
        let a = &idx[1..];
        let mut acc = t.get(a).derivative(e).truncate(order);
        j[..rank].copy_from_slice(a);
        for s in 0..rank {
            for f in 0..4 {
                let gam = gamma.get(&[f, e, a[s]]);
                if gam.taylor_coeffs().iter().all(|v| *v == 0.0) {
                    continue;
                }
                j[s] = f;
                let prod = gam * t.get(&j[..rank]);
                acc -= &prod;
            }
            j[s] = a[s];
        }
        acc
    })
}

/// Christoffel symbols `Γ^a_bc` of order `k` at `p`.
pub fn christoffel(g: &MetricField, p: &ChartPoint, k: u8) -> Result<TensorJet> {
    let mj = g.jets(p, k + 1)?;
    let (_, ginv) = det_inverse4(&mj.g)?;
    Ok(christoffel_from(&mj.g, &ginv))
}

/// Fully covariant curvature `R_abcd` of order `k` at `p`.
pub fn riemann(g: &MetricField, p: &ChartPoint, k: u8) -> Result<TensorJet> {
    let mj = g.jets(p, k + 2)?;
    Ok(LocalGeometry::new(&mj, k)?.riemann)
}

pub fn scalar_curvature(g: &MetricField, p: &ChartPoint, k: u8) -> Result<Jet> {
    let mj = g.jets(p, k + 2)?;
    Ok(LocalGeometry::new(&mj, k)?.scalar_curvature())
}

/// `∇T` of order `k`; `field` is asked for the covariant tensor at order `k + 1`.
pub fn covariant_derivative(
    g: &MetricField,
    p: &ChartPoint,
    k: u8,
    field: impl FnOnce(u8) -> Result<TensorJet>,
) -> Result<TensorJet> {
    let gamma = christoffel(g, p, k)?;
    let t = field(k + 1)?;
    if t.order() < k + 1 {
        return Err(Error::OrderExhausted {
            needed: k + 1,
            available: t.order(),
        });
    }
    Ok(covariant_derivative_with(&gamma, &t))
}

/// The metric itself as a rank-2 tensor of order `k`.
pub fn metric_tensor(g: &MetricField, p: &ChartPoint, k: u8) -> Result<TensorJet> {
    let mj = g.jets(p, k)?;
    Ok(TensorJet::from_fn(2, |i| mj.g[i[0]][i[1]].clone()))
}

/// `g = f⁻² h`; positivity of `f` is checked whenever the result is evaluated.
pub fn conformal_rescale(h: Arc<MetricField>, f: ScalarField) -> MetricField {
    let name = format!("conformal({})", h.name());
    MetricField::conformal(&name, h, f, Provenance::ConformalRescale)
}

#[cfg(test)]
mod tests {
    use super::*;

    const ROUND_S4: &str = "4/(1 + x0^2 + x1^2 + x2^2 + x3^2)^2";

    fn round_s4() -> MetricField {
        MetricField::from_components(
            "round_s4",
            &[
                ROUND_S4, "0", "0", "0", ROUND_S4, "0", "0", ROUND_S4, "0", ROUND_S4,
            ],
            ChartDomain::whole(),
        )
        .unwrap()
    }

    #[test]
    fn packed_layout() {
        assert_eq!(packed_index(0, 0), 0);
        assert_eq!(packed_index(0, 3), 3);
        assert_eq!(packed_index(1, 1), 4);
        assert_eq!(packed_index(2, 1), 5);
        assert_eq!(packed_index(2, 3), 8);
        assert_eq!(packed_index(3, 3), 9);
    }

    #[test]
    fn signature_violation_is_rejected() {
        let err = MetricField::from_components(
            "bad",
            &["-1", "0", "0", "0", "1", "0", "0", "1", "0", "1"],
            ChartDomain::whole(),
        )
        .unwrap_err();
        assert!(matches!(err, Error::NotPositiveDefinite { minor: 1, .. }));
    }

    #[test]
    fn round_sphere_constant_curvature() {
        let g = round_s4();
        let p = ChartPoint([0.3, -0.2, 0.5, 0.1]);
        let mj = g.jets(&p, 2).unwrap();
        let geo = LocalGeometry::new(&mj, 0).unwrap();
        let gv = mj.values();
        for a in 0..4 {
            for b in 0..4 {
                for c in 0..4 {
                    for d in 0..4 {
                        let expect = gv[a][c] * gv[b][d] - gv[a][d] * gv[b][c];
                        let got = geo.riemann.get(&[a, b, c, d]).value();
                        assert!(
                            (got - expect).abs() < 1e-12,
                            "{a}{b}{c}{d}: {got} vs {expect}"
                        );
                    }
                }
            }
        }
        assert!((geo.scalar_curvature().value() - 12.0).abs() < 1e-11);
    }

    #[test]
    fn christoffel_vanishes_at_sphere_center() {
        let gamma = christoffel(&round_s4(), &ChartPoint([0.0; 4]), 1).unwrap();
        assert!(gamma.values().iter().all(|v| v.abs() < 1e-15));
    }

    #[test]
    fn order_budget_is_enforced() {
        let fs = MetricField::from_kahler_potential(
            "fs",
            "log(1 + x0^2 + x1^2 + x2^2 + x3^2)",
            ChartDomain::whole(),
        )
        .unwrap();
        assert_eq!(fs.max_order(), MAX_ORDER - 2);
        let err = riemann(&fs, &ChartPoint([0.0; 4]), MAX_ORDER - 3).unwrap_err();
        assert!(matches!(err, Error::OrderExhausted { .. }));
    }

    #[test]
    fn outside_domain_is_rejected() {
        let g = MetricField::from_components(
            "flat",
            &["1", "0", "0", "0", "1", "0", "0", "1", "0", "1"],
            ChartDomain::cube(1.0),
        )
        .unwrap();
        assert!(matches!(
            g.jets(&ChartPoint([2.0, 0.0, 0.0, 0.0]), 0),
            Err(Error::OutsideDomain { .. })
        ));
    }

    #[test]
    fn grid_counts_and_margin() {
        let d = ChartDomain::cube(1.0);
        let pts = d.grid(3, 0.1);
        assert_eq!(pts.len(), 81);
        assert_eq!(pts[0].0, [-0.9; 4]);
        assert_eq!(pts[80].0, [0.9; 4]);
        assert!(d.grid(0, 0.0).is_empty());
    }

    #[test]
    fn raise_values_matches_jet_raise() {
        let g = round_s4();
        let p = ChartPoint([0.1, 0.2, 0.3, 0.4]);
        let r = riemann(&g, &p, 0).unwrap();
        let mj = g.jets(&p, 0).unwrap();
        let (_, ginv) = det_inverse4(&mj.g).unwrap();
        let a = r.raise_all(&ginv).values();
        let b = raise_values(&r.values(), 4, &mat4j_values(&ginv));
        for (x, y) in a.iter().zip(&b) {
            assert!((x - y).abs() < 1e-12);
        }
        // |R|² = 2 n(n−1) = 24 on the unit sphere
        assert!((r.norm_sq_value(&mat4j_values(&ginv)) - 24.0).abs() < 1e-10);
    }
}
