//! Dense multivariate polynomials in the spacetime coordinates (t, x¹, x², x³).
//!
//! Monomials are stored in a graded order shared by every polynomial, so a
//! polynomial of degree `d` occupies exactly the first `count(d)` slots.

use std::ops::{Add, Mul, Neg, Sub};

use once_cell::sync::Lazy;
use rand::Rng;

use crate::scalar::{Coeff, Real, Scalar};

/// Largest total degree the monomial table supports.
pub const MAX_DEGREE: usize = 20;

pub type Exponent = [u8; 4];

pub(crate) struct MonomialTable {
    pub exps: Vec<Exponent>,
    pub degree: Vec<u8>,
    lookup: Vec<u32>,
    pub count: Vec<usize>,
}

const SIDE: usize = MAX_DEGREE + 1;

impl MonomialTable {
    fn build() -> Self {
        let mut exps = Vec::new();
        let mut degree = Vec::new();
        let mut count = Vec::new();
        for d in 0..=MAX_DEGREE {
            for a in (0..=d).rev() {
                for b in (0..=d - a).rev() {
                    for c in (0..=d - a - b).rev() {
                        let e = d - a - b - c;
                        exps.push([a as u8, b as u8, c as u8, e as u8]);
                        degree.push(d as u8);
                    }
                }
            }
            count.push(exps.len());
        }
        let mut lookup = vec![u32::MAX; SIDE * SIDE * SIDE * SIDE];
        for (i, e) in exps.iter().enumerate() {
            lookup[Self::key(e)] = i as u32;
        }
        Self { exps, degree, lookup, count }
    }

    #[inline]
    fn key(e: &Exponent) -> usize {
        ((e[0] as usize * SIDE + e[1] as usize) * SIDE + e[2] as usize) * SIDE + e[3] as usize
    }

    #[inline]
    pub fn index(&self, e: &Exponent) -> usize {
        let d: usize = e.iter().map(|&v| v as usize).sum();
        assert!(d <= MAX_DEGREE, "monomial degree {d} exceeds table limit {MAX_DEGREE}");
        self.lookup[Self::key(e)] as usize
    }
}

pub(crate) static TABLE: Lazy<MonomialTable> = Lazy::new(MonomialTable::build);

/// Number of monomials of total degree ≤ `d`.
pub fn monomial_count(d: usize) -> usize {
    TABLE.count[d]
}

pub fn exponent_of(index: usize) -> Exponent {
    TABLE.exps[index]
}

pub fn index_of(e: &Exponent) -> usize {
    TABLE.index(e)
}

#[derive(Clone, Debug, PartialEq)]
pub struct Poly<C: Coeff> {
    coeffs: Vec<C>,
}

impl<C: Coeff> Default for Poly<C> {
    fn default() -> Self {
        Self::zero()
    }
}

impl<C: Coeff> Poly<C> {
    pub fn zero() -> Self {
        Self { coeffs: Vec::new() }
    }

    pub fn constant(c: C) -> Self {
        let mut p = Self { coeffs: vec![c] };
        p.trim();
        p
    }

    /// The coordinate function x^μ (μ = 0 is t).
    pub fn var(mu: usize) -> Self {
        let mut e = [0u8; 4];
        e[mu] = 1;
        Self::monomial(e, C::one())
    }

    pub fn monomial(e: Exponent, c: C) -> Self {
        let i = TABLE.index(&e);
        let mut coeffs = vec![C::zero(); i + 1];
        coeffs[i] = c;
        let mut p = Self { coeffs };
        p.pad_to_degree_boundary();
        p.trim();
        p
    }

    pub fn from_terms(terms: &[(Exponent, C)]) -> Self {
        let mut p = Self::zero();
        for (e, c) in terms {
            p = p + Self::monomial(*e, c.clone());
        }
        p
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.iter().all(|c| c.is_zero())
    }

    /// Total degree; `None` for the zero polynomial.
    pub fn degree(&self) -> Option<usize> {
        self.coeffs
            .iter()
            .rposition(|c| !c.is_zero())
            .map(|i| TABLE.degree[i] as usize)
    }

    pub fn coeff(&self, e: &Exponent) -> C {
        let i = TABLE.index(e);
        self.coeffs.get(i).cloned().unwrap_or_else(C::zero)
    }

    /// Nonzero terms as (exponent, coefficient).
    pub fn terms(&self) -> impl Iterator<Item = (Exponent, &C)> + '_ {
        self.coeffs
            .iter()
            .enumerate()
            .filter(|(_, c)| !c.is_zero())
            .map(|(i, c)| (TABLE.exps[i], c))
    }

    fn pad_to_degree_boundary(&mut self) {
        if self.coeffs.is_empty() {
            return;
        }
        let d = TABLE.degree[self.coeffs.len() - 1] as usize;
        self.coeffs.resize(TABLE.count[d], C::zero());
    }

    fn trim(&mut self) {
        match self.degree() {
            None => self.coeffs.clear(),
            Some(d) => self.coeffs.truncate(TABLE.count[d]),
        }
    }

    fn with_len(len: usize) -> Vec<C> {
        vec![C::zero(); len]
    }

    pub fn scale(&self, k: &C) -> Self {
        let mut p = Self {
            coeffs: self.coeffs.iter().map(|c| c.clone() * k.clone()).collect(),
        };
        p.trim();
        p
    }

    pub fn scale_i(&self, k: i64) -> Self {
        self.scale(&C::from_i64(k))
    }

    /// Exact partial derivative ∂_μ.
    pub fn deriv(&self, mu: usize) -> Self {
        let Some(d) = self.degree() else {
            return Self::zero();
        };
        if d == 0 {
            return Self::zero();
        }
        let mut out = Self::with_len(TABLE.count[d - 1]);
        for (i, c) in self.coeffs.iter().enumerate() {
            if c.is_zero() {
                continue;
            }
            let mut e = TABLE.exps[i];
            if e[mu] == 0 {
                continue;
            }
            let k = e[mu] as i64;
            e[mu] -= 1;
            let j = TABLE.index(&e);
            out[j] = out[j].clone() + c.clone() * C::from_i64(k);
        }
        let mut p = Self { coeffs: out };
        p.trim();
        p
    }

    /// Directional derivative along the affine vector field
    /// Z^λ = b^λ + Σ_κ a[κ][λ] x^κ, i.e. Z(f) = Z^λ ∂_λ f.
    pub fn affine_directional(&self, b: &[i64; 4], a: &[[i64; 4]; 4]) -> Self {
        let Some(d) = self.degree() else {
            return Self::zero();
        };
        let mut out = Self::with_len(TABLE.count[d]);
        for (i, c) in self.coeffs.iter().enumerate() {
            if c.is_zero() {
                continue;
            }
            let e = TABLE.exps[i];
            for lam in 0..4 {
                if e[lam] == 0 {
                    continue;
                }
                let dc = c.clone() * C::from_i64(e[lam] as i64);
                let mut el = e;
                el[lam] -= 1;
                if b[lam] != 0 {
                    let j = TABLE.index(&el);
                    out[j] = out[j].clone() + dc.clone() * C::from_i64(b[lam]);
                }
                for kap in 0..4 {
                    let k = a[kap][lam];
                    if k != 0 {
                        let mut ek = el;
                        ek[kap] += 1;
                        let j = TABLE.index(&ek);
                        out[j] = out[j].clone() + dc.clone() * C::from_i64(k);
                    }
                }
            }
        }
        let mut p = Self { coeffs: out };
        p.trim();
        p
    }

    /// Exact evaluation in the coefficient ring.
    pub fn eval_exact(&self, x: &[C; 4]) -> C {
        let mut acc = C::zero();
        for (e, c) in self.terms() {
            let mut term = c.clone();
            for mu in 0..4 {
                for _ in 0..e[mu] {
                    term = term * x[mu].clone();
                }
            }
            acc = acc + term;
        }
        acc
    }

    /// Floating-point evaluation.
    pub fn eval(&self, x: &[f64; 4]) -> f64 {
        let Some(d) = self.degree() else {
            return 0.0;
        };
        let mut pw = [[1.0f64; MAX_DEGREE + 1]; 4];
        for mu in 0..4 {
            for k in 1..=d {
                pw[mu][k] = pw[mu][k - 1] * x[mu];
            }
        }
        let mut acc = 0.0;
        for (i, c) in self.coeffs.iter().enumerate() {
            if c.is_zero() {
                continue;
            }
            let e = TABLE.exps[i];
            acc += c.to_f64()
                * pw[0][e[0] as usize]
                * pw[1][e[1] as usize]
                * pw[2][e[2] as usize]
                * pw[3][e[3] as usize];
        }
        acc
    }

    /// Evaluate in any analytic scalar (floats or jets).
    pub fn eval_scalar<S: Scalar>(&self, x: &[S; 4]) -> S {
        let Some(d) = self.degree() else {
            return S::zero();
        };
        let mut pw: Vec<Vec<S>> = Vec::with_capacity(4);
        for xm in x.iter() {
            let mut v = vec![S::one()];
            for k in 1..=d {
                let next = v[k - 1].clone() * xm.clone();
                v.push(next);
            }
            pw.push(v);
        }
        let mut acc = S::zero();
        for (e, c) in self.terms() {
            let mut term = pw[0][e[0] as usize].clone();
            for mu in 1..4 {
                if e[mu] > 0 {
                    term = term * pw[mu][e[mu] as usize].clone();
                }
            }
            acc = acc + term.scale(S::Base::of(c.to_f64()));
        }
        acc
    }

    /// Convert coefficients to another ring through `f64`.
    pub fn map_coeffs<D: Coeff>(&self, f: impl Fn(&C) -> D) -> Poly<D> {
        let mut p = Poly {
            coeffs: self.coeffs.iter().map(f).collect(),
        };
        p.trim();
        p
    }

    pub fn to_f64(&self) -> Poly<f64> {
        self.map_coeffs(|c| c.to_f64())
    }

    /// Random polynomial with integer coefficients in [-amp, amp] and total degree ≤ `deg`.
    pub fn random_int<R: Rng + ?Sized>(rng: &mut R, deg: usize, amp: i64, density: f64) -> Self {
        let n = TABLE.count[deg];
        let mut coeffs = Self::with_len(n);
        for c in coeffs.iter_mut() {
            if rng.gen::<f64>() < density {
                *c = C::from_i64(rng.gen_range(-amp..=amp));
            }
        }
        let mut p = Self { coeffs };
        p.trim();
        p
    }
}

impl<C: Coeff> Add for Poly<C> {
    type Output = Poly<C>;
    fn add(self, rhs: Self) -> Self {
        &self + &rhs
    }
}

impl<C: Coeff> Add for &Poly<C> {
    type Output = Poly<C>;
    fn add(self, rhs: Self) -> Poly<C> {
        let (long, short) = if self.coeffs.len() >= rhs.coeffs.len() {
            (self, rhs)
        } else {
            (rhs, self)
        };
        let mut coeffs = long.coeffs.clone();
        for (a, b) in coeffs.iter_mut().zip(short.coeffs.iter()) {
            *a = a.clone() + b.clone();
        }
        let mut p = Poly { coeffs };
        p.trim();
        p
    }
}

impl<C: Coeff> Sub for Poly<C> {
    type Output = Poly<C>;
    fn sub(self, rhs: Self) -> Self {
        &self - &rhs
    }
}

impl<C: Coeff> Sub for &Poly<C> {
    type Output = Poly<C>;
    fn sub(self, rhs: Self) -> Poly<C> {
        self + &(-rhs)
    }
}

impl<C: Coeff> Neg for &Poly<C> {
    type Output = Poly<C>;
    fn neg(self) -> Poly<C> {
        Poly {
            coeffs: self.coeffs.iter().map(|c| -c.clone()).collect(),
        }
    }
}

impl<C: Coeff> Neg for Poly<C> {
    type Output = Poly<C>;
    fn neg(self) -> Poly<C> {
        -&self
    }
}

impl<C: Coeff> Mul for &Poly<C> {
    type Output = Poly<C>;
    fn mul(self, rhs: Self) -> Poly<C> {
        let (Some(da), Some(db)) = (self.degree(), rhs.degree()) else {
            return Poly::zero();
        };
        let mut out = Poly::<C>::with_len(TABLE.count[da + db]);
        let bnz: Vec<(Exponent, &C)> = rhs.terms().collect();
        for (ea, ca) in self.terms() {
            for (eb, cb) in bnz.iter() {
                let e = [ea[0] + eb[0], ea[1] + eb[1], ea[2] + eb[2], ea[3] + eb[3]];
                let j = TABLE.index(&e);
                out[j] = out[j].clone() + ca.clone() * (*cb).clone();
            }
        }
        let mut p = Poly { coeffs: out };
        p.trim();
        p
    }
}

impl<C: Coeff> Mul for Poly<C> {
    type Output = Poly<C>;
    fn mul(self, rhs: Self) -> Self {
        &self * &rhs
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use num_rational::BigRational;

    type P = Poly<f64>;

    #[test]
    fn table_is_graded_and_invertible() {
        assert_eq!(monomial_count(0), 1);
        assert_eq!(monomial_count(1), 5);
        assert_eq!(monomial_count(2), 15);
        for i in 0..monomial_count(6) {
            assert_eq!(index_of(&exponent_of(i)), i);
        }
    }

    #[test]
    fn derivative_of_product() {
        let tx = &P::var(0) * &P::var(1);
        assert_eq!(tx.deriv(0), P::var(1));
        assert!(tx.deriv(2).is_zero());
        let c = P::constant(3.0);
        assert!(c.deriv(0).is_zero());
    }

    #[test]
    fn exact_rational_eval() {
        let p: Poly<BigRational> = Poly::var(1) * Poly::var(1) - Poly::var(0);
        let half = BigRational::new(1.into(), 2.into());
        let x = [half.clone(), half.clone(), Coeff::from_i64(0), Coeff::from_i64(0)];
        assert_eq!(p.eval_exact(&x), BigRational::new((-1).into(), 4.into()));
    }

    #[test]
    fn affine_directional_matches_definition() {
        // S = t∂t + x∂x acting on t·x¹ gives 2·t·x¹
        let f = &P::var(0) * &P::var(1);
        let mut id = [[0i64; 4]; 4];
        for (k, row) in id.iter_mut().enumerate() {
            row[k] = 1;
        }
        assert_eq!(f.affine_directional(&[0; 4], &id), f.scale_i(2));
    }
}
