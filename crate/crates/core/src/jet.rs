//! Truncated multivariate Taylor jets in the four chart variables.
//!
//! A [`Jet`] of order `k` holds the Taylor coefficients `c_m = ∂^m f / m!` of a
//! scalar for every multi-index `m` with `|m| <= k`, stored densely in graded
//! lexicographic order (degree first, then `m0` descending, `m1` descending,
//! ...). Because the ordering is graded, the coefficients of a lower-order
//! truncation are a prefix of the higher-order vector.
//!
//! Binary operations between jets of different orders truncate to the smaller
//! order, which is exactly the information both operands carry.

use alloc::vec;
use alloc::vec::Vec;
use core::ops::{Add, AddAssign, Div, Mul, MulAssign, Neg, Sub, SubAssign};

#[allow(unused_imports)] // inherent methods shadow it when std is linked
use num_traits::Float;
use once_cell::race::OnceBox;
use smallvec::SmallVec;

use crate::error::{Error, Result};

/// Number of chart variables.
pub const DIM: usize = 4;

/// Largest jet order supported by the substrate.
///
/// The deepest chain in the crate (Kähler potential → metric → scalar
/// curvature → conformal metric → top eigenvalue → rescaled metric → ∇ω) needs
/// the potential at order 9.
pub const MAX_ORDER: u8 = 10;

const RADIX: usize = MAX_ORDER as usize + 1;
const CODE_SPACE: usize = RADIX * RADIX * RADIX * RADIX;
const NO_RANK: u16 = u16::MAX;

pub type MultiIndex = [u8; DIM];

struct Tables {
    indices: Vec<MultiIndex>,
    degree: Vec<u8>,
    code: Vec<u16>,
    rank_of_code: Vec<u16>,
    /// `count_upto[d]` = number of multi-indices with degree `<= d`.
    count_upto: [usize; MAX_ORDER as usize + 1],
    /// `m!` for every multi-index.
    factorial: Vec<f64>,
    /// `raise[v][i]` = rank of `indices[i] + e_v`, or `NO_RANK` past `MAX_ORDER`.
    raise: [Vec<u16>; DIM],
}

fn code_of(m: &MultiIndex) -> usize {
    ((m[0] as usize * RADIX + m[1] as usize) * RADIX + m[2] as usize) * RADIX + m[3] as usize
}

fn factorial(n: u8) -> f64 {
    (1..=n as u64).fold(1.0, |acc, v| acc * v as f64)
}

impl Tables {
    fn build() -> Tables {
        let max = MAX_ORDER;
        let mut indices = Vec::new();
        let mut count_upto = [0usize; MAX_ORDER as usize + 1];
        for d in 0..=max {
            for m0 in (0..=d).rev() {
                for m1 in (0..=d - m0).rev() {
                    for m2 in (0..=d - m0 - m1).rev() {
                        indices.push([m0, m1, m2, d - m0 - m1 - m2]);
                    }
                }
            }
            count_upto[d as usize] = indices.len();
        }
        let degree: Vec<u8> = indices.iter().map(|m| m.iter().sum()).collect();
        let code: Vec<u16> = indices.iter().map(|m| code_of(m) as u16).collect();
        let mut rank_of_code = vec![NO_RANK; CODE_SPACE];
        for (rank, c) in code.iter().enumerate() {
            rank_of_code[*c as usize] = rank as u16;
        }
        let factorial = indices
            .iter()
            .map(|m| m.iter().map(|&e| factorial(e)).product())
            .collect();
        let raise = core::array::from_fn(|v| {
            indices
                .iter()
                .map(|m| {
                    let mut up = *m;
                    up[v] += 1;
                    if up.iter().map(|&e| e as u32).sum::<u32>() > max as u32 {
                        NO_RANK
                    } else {
                        rank_of_code[code_of(&up)]
                    }
                })
                .collect()
        });
        Tables {
            indices,
            degree,
            code,
            rank_of_code,
            count_upto,
            factorial,
            raise,
        }
    }
}

fn tables() -> &'static Tables {
    static TABLES: OnceBox<Tables> = OnceBox::new();
    TABLES.get_or_init(|| alloc::boxed::Box::new(Tables::build()))
}

/// Number of coefficients of a jet of order `k`: `binomial(4 + k, 4)`.
pub fn coefficient_count(order: u8) -> usize {
    let k = order as usize;
    (k + 1) * (k + 2) * (k + 3) * (k + 4) / 24
}

/// Multi-indices of degree `<= order` in storage order.
pub fn multi_indices(order: u8) -> &'static [MultiIndex] {
    &tables().indices[..coefficient_count(order)]
}

/// Storage position of a multi-index, or `None` if its degree exceeds [`MAX_ORDER`].
pub fn rank(m: &MultiIndex) -> Option<usize> {
    if m.iter().map(|&e| e as u32).sum::<u32>() > MAX_ORDER as u32 {
        return None;
    }
    Some(tables().rank_of_code[code_of(m)] as usize)
}

/// Multi-index with a single entry.
pub fn unit(var: usize, power: u8) -> MultiIndex {
    let mut m = [0; DIM];
    m[var] = power;
    m
}

/// Truncated Taylor expansion of a scalar at a chart point.
#[derive(Clone, Debug, PartialEq)]
pub struct Jet {
    order: u8,
    coeffs: Coeffs,
}

/// Coefficient storage; jets up to order 2 stay inline.
type Coeffs = SmallVec<[f64; 15]>;

impl Jet {
    pub fn zero(order: u8) -> Jet {
        assert!(order <= MAX_ORDER, "jet order {order} exceeds {MAX_ORDER}");
        Jet {
            order,
            coeffs: SmallVec::from_elem(0.0, coefficient_count(order)),
        }
    }

    pub fn constant(value: f64, order: u8) -> Jet {
        let mut j = Jet::zero(order);
        j.coeffs[0] = value;
        j
    }

    /// The coordinate function `x_var` expanded at a point where it equals `value`.
    pub fn variable(var: usize, value: f64, order: u8) -> Jet {
        let mut j = Jet::constant(value, order);
        if order > 0 {
            j.coeffs[1 + var] = 1.0;
        }
        j
    }

    /// Builds a jet from Taylor coefficients (`∂^m f / m!`) in storage order.
    pub fn from_taylor(order: u8, coeffs: Vec<f64>) -> Jet {
        assert_eq!(coeffs.len(), coefficient_count(order));
        Jet {
            order,
            coeffs: SmallVec::from_vec(coeffs),
        }
    }

    /// Builds a jet from partial derivatives `∂^m f` in storage order.
    pub fn from_partials(order: u8, partials: &[f64]) -> Jet {
        assert_eq!(partials.len(), coefficient_count(order));
        let t = tables();
        let coeffs = partials
            .iter()
            .zip(&t.factorial)
            .map(|(d, f)| d / f)
            .collect();
        Jet { order, coeffs }
    }

    #[inline]
    pub fn order(&self) -> u8 {
        self.order
    }

    #[inline]
    pub fn value(&self) -> f64 {
        self.coeffs[0]
    }

    pub fn taylor_coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    /// Taylor coefficient `∂^m f / m!`; zero beyond the stored order.
    pub fn taylor(&self, m: &MultiIndex) -> f64 {
        match rank(m) {
            Some(r) if r < self.coeffs.len() => self.coeffs[r],
            _ => 0.0,
        }
    }

    /// Partial derivative `∂^m f` at the base point.
    pub fn partial(&self, m: &MultiIndex) -> f64 {
        match rank(m) {
            Some(r) if r < self.coeffs.len() => self.coeffs[r] * tables().factorial[r],
            _ => 0.0,
        }
    }

    /// All partial derivatives in storage order.
    pub fn partials(&self) -> Vec<f64> {
        self.coeffs
            .iter()
            .zip(&tables().factorial)
            .map(|(c, f)| c * f)
            .collect()
    }

    /// First partial derivatives at the base point.
    pub fn gradient(&self) -> [f64; DIM] {
        core::array::from_fn(|v| {
            if self.order > 0 {
                self.coeffs[1 + v]
            } else {
                0.0
            }
        })
    }

    pub fn truncate(&self, order: u8) -> Jet {
        if order >= self.order {
            return self.clone();
        }
        Jet {
            order,
            coeffs: SmallVec::from_slice(&self.coeffs[..coefficient_count(order)]),
        }
    }

    /// `∂f/∂x_var` as a jet of one order less.
    ///
    /// Panics on an order-0 jet: callers budget their orders up front.
    pub fn derivative(&self, var: usize) -> Jet {
        assert!(self.order > 0, "cannot differentiate an order-0 jet");
        let t = tables();
        let order = self.order - 1;
        let n = coefficient_count(order);
        let coeffs = (0..n)
            .map(|i| {
                let up = t.raise[var][i] as usize;
                self.coeffs[up] * (t.indices[i][var] as f64 + 1.0)
            })
            .collect();
        Jet { order, coeffs }
    }

    pub fn scale(&self, s: f64) -> Jet {
        Jet {
            order: self.order,
            coeffs: self.coeffs.iter().map(|c| c * s).collect(),
        }
    }

    pub fn add_scalar(mut self, s: f64) -> Jet {
        self.coeffs[0] += s;
        self
    }

    /// `self += a * b`, truncating to the order of `self`.
    pub fn add_product(&mut self, a: &Jet, b: &Jet) {
        let k = self.order.min(a.order).min(b.order);
        if k < self.order {
            self.truncate_in_place(k);
        }
        mul_acc(&mut self.coeffs, k, &a.coeffs, &b.coeffs);
    }

    fn truncate_in_place(&mut self, order: u8) {
        self.coeffs.truncate(coefficient_count(order));
        self.order = order;
    }

    /// `Σ c_n (self − self(0))^n` for a univariate Taylor series `c` of some
    /// function about `self.value()`.
    pub fn compose(&self, series: &[f64]) -> Jet {
        let k = self.order as usize;
        debug_assert!(series.len() > k);
        let mut delta = self.clone();
        delta.coeffs[0] = 0.0;
        let mut acc = Jet::constant(series[k], self.order);
        for n in (0..k).rev() {
            acc = &acc * &delta;
            acc.coeffs[0] += series[n];
        }
        acc
    }

    pub fn exp(&self) -> Jet {
        let e = self.value().exp();
        let series: Vec<f64> = (0..=self.order).map(|n| e / factorial(n)).collect();
        self.compose(&series)
    }

    pub fn ln(&self) -> Result<Jet> {
        let u = self.value();
        if !(u > 0.0) {
            return Err(Error::Domain(alloc::format!(
                "log of non-positive value {u:e}"
            )));
        }
        let mut series = vec![u.ln()];
        let mut p = 1.0;
        for n in 1..=self.order as i32 {
            p /= u;
            let sign = if n % 2 == 1 { 1.0 } else { -1.0 };
            series.push(sign * p / n as f64);
        }
        Ok(self.compose(&series))
    }

    pub fn sin(&self) -> Jet {
        let (s, c) = (self.value().sin(), self.value().cos());
        let cycle = [s, c, -s, -c];
        let series: Vec<f64> = (0..=self.order)
            .map(|n| cycle[n as usize % 4] / factorial(n))
            .collect();
        self.compose(&series)
    }

    pub fn cos(&self) -> Jet {
        let (s, c) = (self.value().sin(), self.value().cos());
        let cycle = [c, -s, -c, s];
        let series: Vec<f64> = (0..=self.order)
            .map(|n| cycle[n as usize % 4] / factorial(n))
            .collect();
        self.compose(&series)
    }

    /// `self^r` for real `r`; requires a positive base value unless the jet is
    /// order 0 and the power is defined there.
    pub fn powf(&self, r: f64) -> Result<Jet> {
        let u = self.value();
        if !(u > 0.0) {
            if self.order == 0 && u == 0.0 && r > 0.0 {
                return Ok(Jet::constant(0.0, 0));
            }
            return Err(Error::Domain(alloc::format!(
                "non-integer power {r} of non-positive value {u:e}"
            )));
        }
        let mut series = Vec::with_capacity(self.order as usize + 1);
        let mut binom = 1.0;
        for n in 0..=self.order as i32 {
            if n > 0 {
                binom *= (r - (n - 1) as f64) / n as f64;
            }
            series.push(binom * u.powf(r - n as f64));
        }
        Ok(self.compose(&series))
    }

    pub fn sqrt(&self) -> Result<Jet> {
        self.powf(0.5)
    }

    pub fn recip(&self) -> Result<Jet> {
        let u = self.value();
        if u == 0.0 || !u.is_finite() {
            return Err(Error::Domain(alloc::format!("division by {u:e}")));
        }
        let mut series = Vec::with_capacity(self.order as usize + 1);
        let mut p = 1.0 / u;
        for _ in 0..=self.order {
            series.push(p);
            p = -p / u;
        }
        Ok(self.compose(&series))
    }

    /// Integer power by repeated squaring; negative powers need a non-zero value.
    pub fn powi(&self, n: i64) -> Result<Jet> {
        let base = if n < 0 { self.recip()? } else { self.clone() };
        let mut e = n.unsigned_abs();
        let mut acc = Jet::constant(1.0, self.order);
        let mut sq = base;
        while e > 0 {
            if e & 1 == 1 {
                acc = &acc * &sq;
            }
            e >>= 1;
            if e > 0 {
                sq = &sq * &sq;
            }
        }
        Ok(acc)
    }

    pub fn atan(&self) -> Jet {
        let t0 = self.value();
        let k = self.order as usize;
        // Series of 1/(1 + (t0 + τ)²) = 1/(q0 + q1 τ + τ²).
        let q0 = 1.0 + t0 * t0;
        let q1 = 2.0 * t0;
        let mut r = vec![0.0; k.max(1)];
        r[0] = 1.0 / q0;
        for n in 1..k {
            let prev2 = if n >= 2 { r[n - 2] } else { 0.0 };
            r[n] = -(q1 * r[n - 1] + prev2) / q0;
        }
        let mut series = vec![t0.atan()];
        for n in 0..k {
            series.push(r[n] / (n as f64 + 1.0));
        }
        self.compose(&series)
    }
}

fn mul_acc(out: &mut [f64], order: u8, a: &[f64], b: &[f64]) {
    let t = tables();
    let n = coefficient_count(order);
    let k = order as usize;
    for i in 0..n {
        let ai = a[i];
        if ai == 0.0 {
            continue;
        }
        let ci = t.code[i] as usize;
        let lim = t.count_upto[k - t.degree[i] as usize];
        for (j, &bj) in b[..lim].iter().enumerate() {
            let r = t.rank_of_code[ci + t.code[j] as usize] as usize;
            out[r] += ai * bj;
        }
    }
}

impl<'a> Mul<&'a Jet> for &'a Jet {
    type Output = Jet;
    fn mul(self, rhs: &'a Jet) -> Jet {
        let order = self.order.min(rhs.order);
        let mut out = Jet::zero(order);
        mul_acc(&mut out.coeffs, order, &self.coeffs, &rhs.coeffs);
        out
    }
}

impl<'a> Add<&'a Jet> for &'a Jet {
    type Output = Jet;
    fn add(self, rhs: &'a Jet) -> Jet {
        let order = self.order.min(rhs.order);
        let n = coefficient_count(order);
        Jet {
            order,
            coeffs: self.coeffs[..n]
                .iter()
                .zip(&rhs.coeffs[..n])
                .map(|(a, b)| a + b)
                .collect(),
        }
    }
}

impl<'a> Sub<&'a Jet> for &'a Jet {
    type Output = Jet;
    fn sub(self, rhs: &'a Jet) -> Jet {
        let order = self.order.min(rhs.order);
        let n = coefficient_count(order);
        Jet {
            order,
            coeffs: self.coeffs[..n]
                .iter()
                .zip(&rhs.coeffs[..n])
                .map(|(a, b)| a - b)
                .collect(),
        }
    }
}

impl Neg for &Jet {
    type Output = Jet;
    fn neg(self) -> Jet {
        self.scale(-1.0)
    }
}

impl Neg for Jet {
    type Output = Jet;
    fn neg(mut self) -> Jet {
        self.coeffs.iter_mut().for_each(|c| *c = -*c);
        self
    }
}

impl Mul<f64> for &Jet {
    type Output = Jet;
    fn mul(self, rhs: f64) -> Jet {
        self.scale(rhs)
    }
}

impl Mul<f64> for Jet {
    type Output = Jet;
    fn mul(mut self, rhs: f64) -> Jet {
        self *= rhs;
        self
    }
}

impl MulAssign<f64> for Jet {
    fn mul_assign(&mut self, rhs: f64) {
        self.coeffs.iter_mut().for_each(|c| *c *= rhs);
    }
}

impl AddAssign<&Jet> for Jet {
    fn add_assign(&mut self, rhs: &Jet) {
        if rhs.order < self.order {
            self.truncate_in_place(rhs.order);
        }
        for (a, b) in self.coeffs.iter_mut().zip(&rhs.coeffs) {
            *a += b;
        }
    }
}

impl SubAssign<&Jet> for Jet {
    fn sub_assign(&mut self, rhs: &Jet) {
        if rhs.order < self.order {
            self.truncate_in_place(rhs.order);
        }
        for (a, b) in self.coeffs.iter_mut().zip(&rhs.coeffs) {
            *a -= b;
        }
    }
}

macro_rules! owned_binop {
    ($trait:ident, $method:ident) => {
        impl $trait<Jet> for Jet {
            type Output = Jet;
            fn $method(self, rhs: Jet) -> Jet {
                (&self).$method(&rhs)
            }
        }
        impl<'a> $trait<&'a Jet> for Jet {
            type Output = Jet;
            fn $method(self, rhs: &'a Jet) -> Jet {
                (&self).$method(rhs)
            }
        }
        impl<'a> $trait<Jet> for &'a Jet {
            type Output = Jet;
            fn $method(self, rhs: Jet) -> Jet {
                self.$method(&rhs)
            }
        }
    };
}

owned_binop!(Add, add);
owned_binop!(Sub, sub);
owned_binop!(Mul, mul);

impl<'a> Div<&'a Jet> for &'a Jet {
    type Output = Result<Jet>;
    #[allow(clippy::suspicious_arithmetic_impl)]
    fn div(self, rhs: &'a Jet) -> Result<Jet> {
        Ok(self * &rhs.recip()?)
    }
}
