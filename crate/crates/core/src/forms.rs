//! Exterior calculus on chart forms in jet arithmetic.
//!
//! A `p`-form is stored as a fully antisymmetric [`TensorJet`] of rank `p`
//! (all index orderings present). Conventions: `|α|² = (1/p!) α_A α^A`,
//! `(⋆α)_B = (1/p!) α^A ε_{AB}` with `ε_{0123} = √det g` for the chart
//! orientation, `(dα)_{a₀…a_p} = Σ_i (−1)^i ∂_{a_i} α_{a₀…â_i…a_p}` and
//! `d* = −⋆d⋆`.

use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::expr::{parse_expression, Expression};
use crate::geometry::{kahler_form_from_hessian, potential_hessian, ChartPoint, TensorJet};
use crate::jet::Jet;
use crate::linalg::{det_inverse4, Mat4, Mat4J};
use crate::weyl::Orientation;

/// Sign of the permutation `idx` of distinct indices, 0 if any repeat.
pub fn permutation_sign(idx: &[usize]) -> f64 {
    let mut sign = 1.0;
    for i in 0..idx.len() {
        for j in i + 1..idx.len() {
            if idx[i] == idx[j] {
                return 0.0;
            }
            if idx[i] > idx[j] {
                sign = -sign;
            }
        }
    }
    sign
}

/// Volume form components `ε_abcd` at the jet order of `det`.
pub fn levi_civita(det: &Jet, orientation: Orientation) -> Result<TensorJet> {
    let vol = det.sqrt()?.scale(orientation.sign());
    Ok(TensorJet::from_fn(4, |i| vol.scale(permutation_sign(i))))
}

/// Metric data needed by the star operator.
#[derive(Debug, Clone)]
pub struct StarContext {
    pub ginv: Mat4J,
    pub eps: TensorJet,
}

impl StarContext {
    pub fn new(g: &Mat4J, orientation: Orientation) -> Result<StarContext> {
        let (det, ginv) = det_inverse4(g)?;
        let eps = levi_civita(&det, orientation)?;
        Ok(StarContext { ginv, eps })
    }

    pub fn order(&self) -> u8 {
        self.eps.order()
    }

    /// Hodge star of a `p`-form; the result has the lower of the two orders.
    pub fn star(&self, alpha: &TensorJet) -> TensorJet {
        let p = alpha.rank();
        let q = 4 - p;
        let raised = alpha.raise_all(&self.ginv);
        let order = raised.order().min(self.order());
        let mut full = [0usize; 4];
        TensorJet::from_fn(q, |b| {
            let mut acc = Jet::zero(order);
            if !distinct(b) {
                return acc;
            }
            // Only the increasing index sets complementary to `b` contribute;
            // each appears p! times in the full contraction.
            let comp: Vec<usize> = (0..4).filter(|i| !b.contains(i)).collect();
            full[..p].copy_from_slice(&comp);
            full[p..].copy_from_slice(b);
            let e = self.eps.get(&full);
            acc.add_product(raised.get(&comp), e);
            acc
        })
    }

    /// `d* = −⋆d⋆` on `p`-forms, `p ≥ 1`; consumes one order of both inputs.
    pub fn codifferential(&self, alpha: &TensorJet) -> TensorJet {
        let s = self.star(alpha);
        let ds = exterior_derivative(&s);
        let low = StarContext {
            ginv: core::array::from_fn(|a| {
                core::array::from_fn(|b| self.ginv[a][b].truncate(ds.order()))
            }),
            eps: self.eps.truncate(ds.order()),
        };
        low.star(&ds).map(|c| -c)
    }

    /// Hodge Laplacian `dd* + d*d` of a 2-form; consumes two orders.
    pub fn hodge_laplacian(&self, alpha: &TensorJet) -> TensorJet {
        let dstar = self.codifferential(alpha);
        let d_dstar = exterior_derivative(&dstar);
        let dalpha = exterior_derivative(alpha);
        let dstar_d = self.codifferential(&dalpha);
        let order = d_dstar.order().min(dstar_d.order());
        d_dstar.zip_with(&dstar_d, |a, b| &a.truncate(order) + &b.truncate(order))
    }

    /// Self-dual part `½(α + ⋆α)` of a 2-form.
    pub fn self_dual_part(&self, alpha: &TensorJet) -> TensorJet {
        let s = self.star(alpha);
        let order = s.order();
        alpha.zip_with(&s, |a, b| (&a.truncate(order) + b).scale(0.5))
    }
}

fn distinct(idx: &[usize]) -> bool {
    permutation_sign(idx) != 0.0
}

/// Exterior derivative of a `p`-form; consumes one order.
pub fn exterior_derivative(alpha: &TensorJet) -> TensorJet {
    let p = alpha.rank();
    let order = alpha.order().saturating_sub(1);
    assert!(alpha.order() > 0, "form needs order ≥ 1 to differentiate");
    let mut rest = [0usize; 4];
    TensorJet::from_fn(p + 1, |a| {
        let mut acc = Jet::zero(order);
        if !distinct(a) {
            return acc;
        }
        for i in 0..=p {
            let mut n = 0;
            for (j, &aj) in a.iter().enumerate() {
                if j != i {
                    rest[n] = aj;
                    n += 1;
                }
            }
            let term = alpha.get(&rest[..p]).derivative(a[i]);
            if i % 2 == 0 {
                acc += &term;
            } else {
                acc -= &term;
            }
        }
        acc
    })
}

/// `|α|²` of a 2-form at the base point.
pub fn two_form_norm_sq(omega: &Mat4, ginv: &Mat4) -> f64 {
    let mut acc = 0.0;
    for a in 0..4 {
        for b in 0..4 {
            for c in 0..4 {
                for d in 0..4 {
                    acc += omega[a][b] * ginv[a][c] * ginv[b][d] * omega[c][d];
                }
            }
        }
    }
    0.5 * acc
}

/// Antisymmetric 2-form built from its upper-triangle components
/// `(01, 02, 03, 12, 13, 23)`.
pub fn two_form_from_upper(order: u8, upper: [Jet; 6]) -> TensorJet {
    let pairs = [(0, 1), (0, 2), (0, 3), (1, 2), (1, 3), (2, 3)];
    let mut t = TensorJet::zeros(2, order);
    for ((a, b), v) in pairs.into_iter().zip(upper) {
        t.set(&[b, a], -&v);
        t.set(&[a, b], v);
    }
    t
}

/// Chart 2-form field queryable in jets.
#[derive(Debug, Clone)]
pub enum TwoFormField {
    /// Kähler form `i∂∂̄φ` of a potential in the chart complex structure.
    KahlerForm(Expression),
    /// Components `(01, 02, 03, 12, 13, 23)`.
    Components(alloc::boxed::Box<[Expression; 6]>),
    /// Scalar multiple of another field.
    Scaled(Expression, alloc::boxed::Box<TwoFormField>),
}

impl TwoFormField {
    /// The constant form `dx⁰∧dx¹ + dx²∧dx³`.
    pub fn standard_kahler() -> TwoFormField {
        let one = Expression::constant(1.0);
        let zero = Expression::constant(0.0);
        TwoFormField::Components(alloc::boxed::Box::new([
            one.clone(),
            zero.clone(),
            zero.clone(),
            zero.clone(),
            zero,
            one,
        ]))
    }

    pub fn from_components(src: &[&str; 6]) -> Result<TwoFormField> {
        let parsed: Vec<Expression> = src
            .iter()
            .map(|s| parse_expression(s))
            .collect::<core::result::Result<_, _>>()?;
        Ok(TwoFormField::Components(alloc::boxed::Box::new(
            parsed.try_into().expect("six components"),
        )))
    }

    pub fn scaled(self, factor: &str) -> Result<TwoFormField> {
        Ok(TwoFormField::Scaled(
            parse_expression(factor)?,
            alloc::boxed::Box::new(self),
        ))
    }

    pub fn jets(&self, p: &ChartPoint, k: u8) -> Result<TensorJet> {
        match self {
            TwoFormField::KahlerForm(phi) => {
                let h = potential_hessian(phi, p, k)?;
                let w = kahler_form_from_hessian(&h);
                Ok(TensorJet::from_fn(2, |i| w[i[0]][i[1]].clone()))
            }
            TwoFormField::Components(c) => {
                let j: Vec<Jet> = c.iter().map(|e| e.jet(&p.0, k)).collect::<Result<_>>()?;
                Ok(two_form_from_upper(
                    k,
                    j.try_into().expect("six components"),
                ))
            }
            TwoFormField::Scaled(f, base) => {
                let fj = f.jet(&p.0, k)?;
                Ok(base.jets(p, k)?.scale_by(&fj))
            }
        }
    }

    pub fn values(&self, p: &ChartPoint) -> Result<Mat4> {
        let t = self.jets(p, 0)?;
        Ok(core::array::from_fn(|a| {
            core::array::from_fn(|b| t.get(&[a, b]).value())
        }))
    }
}

/// Checks that a rank-2 tensor is antisymmetric within `tol`.
pub fn check_antisymmetric(omega: &Mat4, tol: f64) -> Result<()> {
    let scale = omega
        .iter()
        .flatten()
        .fold(0.0f64, |m, v| m.max(v.abs()))
        .max(1.0);
    for a in 0..4 {
        for b in 0..4 {
            let r = (omega[a][b] + omega[b][a]).abs();
            if r > tol * scale {
                return Err(Error::InvalidInput(alloc::format!(
                    "2-form not antisymmetric: ω[{a}][{b}] + ω[{b}][{a}] = {r:e}"
                )));
            }
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{ChartDomain, MetricField};

    fn euclid(order: u8) -> Mat4J {
        core::array::from_fn(|a| {
            core::array::from_fn(|b| Jet::constant(if a == b { 1.0 } else { 0.0 }, order))
        })
    }

    #[test]
    fn permutation_signs() {
        assert_eq!(permutation_sign(&[0, 1, 2, 3]), 1.0);
        assert_eq!(permutation_sign(&[1, 0, 2, 3]), -1.0);
        assert_eq!(permutation_sign(&[2, 3, 0, 1]), 1.0);
        assert_eq!(permutation_sign(&[0, 0, 2, 3]), 0.0);
    }

    #[test]
    fn euclidean_star_on_basis() {
        let ctx = StarContext::new(&euclid(0), Orientation::Standard).unwrap();
        let mut e01 = [
            Jet::zero(0),
            Jet::zero(0),
            Jet::zero(0),
            Jet::zero(0),
            Jet::zero(0),
            Jet::zero(0),
        ];
        e01[0] = Jet::constant(1.0, 0);
        let s = ctx.star(&two_form_from_upper(0, e01));
        assert_eq!(s.get(&[2, 3]).value(), 1.0);
        assert_eq!(s.get(&[3, 2]).value(), -1.0);
        assert_eq!(s.get(&[0, 1]).value(), 0.0);
        let rev = StarContext::new(&euclid(0), Orientation::Reversed).unwrap();
        let ss = rev.star(&s);
        assert_eq!(ss.get(&[0, 1]).value(), -1.0);
    }

    #[test]
    fn star_is_involution_on_two_forms_and_squares_to_minus_one_on_odd() {
        let g = MetricField::from_components(
            "g",
            &[
                "2 + x1^2", "0.3", "0.1*x2", "0", "1.5", "0.2", "0", "1 + x0^2", "0.1", "3",
            ],
            ChartDomain::whole(),
        )
        .unwrap();
        let p = ChartPoint([0.2, -0.3, 0.5, 0.1]);
        let ctx = StarContext::new(&g.jets(&p, 1).unwrap().g, Orientation::Standard).unwrap();
        let w = TwoFormField::from_components(&["x0", "1", "x1*x2", "0.5", "x3", "2"]).unwrap();
        let a = w.jets(&p, 1).unwrap();
        let back = ctx.star(&ctx.star(&a));
        for (x, y) in a.comps().iter().zip(back.comps()) {
            for (u, v) in x.taylor_coeffs().iter().zip(y.taylor_coeffs()) {
                assert!((u - v).abs() < 1e-12);
            }
        }
        let one = TensorJet::from_fn(1, |i| Jet::constant([1.0, -2.0, 0.5, 3.0][i[0]], 1));
        let back = ctx.star(&ctx.star(&one));
        for (x, y) in one.values().iter().zip(back.values()) {
            assert!((x + y).abs() < 1e-12);
        }
    }

    #[test]
    fn d_squared_vanishes() {
        let w = TwoFormField::from_components(&[
            "x0*x1^2", "sin(x2)", "x3*x0", "exp(x1)", "x2^3", "x0*x3",
        ])
        .unwrap();
        let a = w.jets(&ChartPoint([0.1, 0.2, 0.3, 0.4]), 2).unwrap();
        let dd = exterior_derivative(&exterior_derivative(&a));
        assert!(dd.values().iter().all(|v| v.abs() < 1e-13));
    }

    #[test]
    fn flat_codifferential_matches_divergence() {
        // On flat space (d*α)_b = −∂^a α_ab.
        let w =
            TwoFormField::from_components(&["x1*x2", "x0^2", "x3", "x0*x3", "x2^2", "x1"]).unwrap();
        let p = ChartPoint([0.3, -0.1, 0.7, 0.2]);
        let a = w.jets(&p, 1).unwrap();
        let ctx = StarContext::new(&euclid(1), Orientation::Standard).unwrap();
        let ds = ctx.codifferential(&a);
        for b in 0..4 {
            let div: f64 = (0..4).map(|c| a.get(&[c, b]).derivative(c).value()).sum();
            assert!((ds.get(&[b]).value() + div).abs() < 1e-13, "{b}");
        }
    }

    #[test]
    fn kahler_form_of_flat_potential() {
        let w = TwoFormField::KahlerForm(parse_expression("x0^2 + x1^2 + x2^2 + x3^2").unwrap());
        let v = w.values(&ChartPoint([0.0; 4])).unwrap();
        assert_eq!(v[0][1], 2.0);
        assert_eq!(v[2][3], 2.0);
        assert_eq!(v[0][2], 0.0);
        assert_eq!(v[1][0], -2.0);
    }
}
