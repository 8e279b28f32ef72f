//! Truncated multivariate Taylor jets in (t, x¹, x², x³).
//!
//! A `Jet` stores Taylor coefficients f^(α)(p)/α! for |α| ≤ order around a
//! base point. Arithmetic truncates at the order, so evaluating any smooth
//! formula on jets yields its exact derivatives up to rounding.

use std::ops::{Add, Div, Mul, Neg, Sub};

use crate::poly::{Poly, TABLE};
use crate::scalar::{Coeff, Real, Scalar};

/// Order tag for constants, which combine with jets of any order.
const CONST: usize = usize::MAX;

#[derive(Clone, Debug, PartialEq)]
pub struct Jet<T> {
    order: usize,
    c: Vec<T>,
}

impl<T: Real> Jet<T> {
    pub fn constant(v: T) -> Self {
        Self { order: CONST, c: vec![v] }
    }

    pub fn zeros(order: usize) -> Self {
        Self { order, c: vec![T::zero(); TABLE.count[order]] }
    }

    /// The coordinate x^μ expanded at value `v`.
    pub fn variable(v: T, mu: usize, order: usize) -> Self {
        let mut j = Self::zeros(order);
        j.c[0] = v;
        if order >= 1 {
            j.c[1 + mu] = T::one();
        }
        j
    }

    /// Jets of the four coordinates at point `p`.
    pub fn coordinates(p: [T; 4], order: usize) -> [Self; 4] {
        [
            Self::variable(p[0], 0, order),
            Self::variable(p[1], 1, order),
            Self::variable(p[2], 2, order),
            Self::variable(p[3], 3, order),
        ]
    }

    /// Taylor expansion of a polynomial at `p`, truncated at `order`.
    pub fn from_poly<C: Coeff>(poly: &Poly<C>, p: [T; 4], order: usize) -> Self {
        let mut out = Self::zeros(order);
        let binom = |n: usize, k: usize| -> f64 {
            let mut b = 1.0;
            for i in 0..k {
                b = b * (n - i) as f64 / (i + 1) as f64;
            }
            b
        };
        for (e, c) in poly.terms() {
            let cf = T::of(c.to_f64());
            // expand Π_μ (p_μ + h_μ)^{e_μ}
            let mut parts: Vec<([u8; 4], T)> = vec![([0; 4], cf)];
            for mu in 0..4 {
                let n = e[mu] as usize;
                if n == 0 {
                    continue;
                }
                let mut next = Vec::with_capacity(parts.len() * (n + 1));
                for (ex, v) in parts.iter() {
                    let used: usize = ex.iter().map(|&a| a as usize).sum();
                    for k in 0..=n.min(order.saturating_sub(used)) {
                        let coef = T::of(binom(n, k)) * p[mu].powi((n - k) as i32);
                        let mut ek = *ex;
                        ek[mu] = k as u8;
                        next.push((ek, *v * coef));
                    }
                }
                parts = next;
            }
            for (ex, v) in parts {
                let i = TABLE.index(&ex);
                out.c[i] += v;
            }
        }
        out
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn is_constant(&self) -> bool {
        self.order == CONST
    }

    pub fn value(&self) -> T {
        self.c[0]
    }

    fn len_for(order: usize) -> usize {
        if order == CONST {
            1
        } else {
            TABLE.count[order]
        }
    }

    fn get(&self, i: usize) -> T {
        self.c.get(i).copied().unwrap_or_else(T::zero)
    }

    /// Raw Taylor coefficient f^(α)/α! for exponent α.
    pub fn taylor(&self, alpha: [u8; 4]) -> T {
        let d: usize = alpha.iter().map(|&a| a as usize).sum();
        if self.order != CONST && d > self.order {
            panic!("jet of order {} queried at degree {d}", self.order);
        }
        self.get(TABLE.index(&alpha))
    }

    /// Partial derivative value ∂^α f(p).
    pub fn partial(&self, alpha: [u8; 4]) -> T {
        let mut fact = 1.0;
        for &a in alpha.iter() {
            for k in 2..=a as usize {
                fact *= k as f64;
            }
        }
        self.taylor(alpha) * T::of(fact)
    }

    /// ∂_μ f(p) as a number.
    pub fn d1(&self, mu: usize) -> T {
        let mut a = [0u8; 4];
        a[mu] = 1;
        self.partial(a)
    }

    /// ∂_μ∂_ν f(p) as a number.
    pub fn d2(&self, mu: usize, nu: usize) -> T {
        let mut a = [0u8; 4];
        a[mu] += 1;
        a[nu] += 1;
        self.partial(a)
    }

    /// Derivative jet ∂_μ f, one order lower.
    pub fn deriv(&self, mu: usize) -> Self {
        if self.order == CONST {
            return Self::constant(T::zero());
        }
        assert!(self.order >= 1, "cannot differentiate an order-0 jet");
        let order = self.order - 1;
        let mut out = Self::zeros(order);
        for i in 0..out.c.len() {
            let mut e = TABLE.exps[i];
            e[mu] += 1;
            let k = e[mu];
            out.c[i] = self.c[TABLE.index(&e)] * T::of(k as f64);
        }
        out
    }

    /// Multiply by the offset variable h_κ = x^κ − p^κ (order unchanged, top degree dropped).
    fn shift_mul(&self, kappa: usize) -> Self {
        let mut out = Self::zeros(self.order);
        for i in 0..self.c.len() {
            let v = self.c[i];
            if v == T::zero() {
                continue;
            }
            let mut e = TABLE.exps[i];
            if TABLE.degree[i] as usize == self.order {
                continue;
            }
            e[kappa] += 1;
            out.c[TABLE.index(&e)] += v;
        }
        out
    }

    /// Z(f) for the affine field Z^λ = b^λ + Σ_κ a[κ][λ] x^κ expanded at point `p`.
    pub fn affine_directional(&self, p: &[T; 4], b: &[i64; 4], a: &[[i64; 4]; 4]) -> Self {
        if self.order == CONST {
            return Self::constant(T::zero());
        }
        let mut out = Self::zeros(self.order - 1);
        for lam in 0..4 {
            let mut z0 = T::of(b[lam] as f64);
            let mut has_lin = false;
            for kap in 0..4 {
                if a[kap][lam] != 0 {
                    z0 += T::of(a[kap][lam] as f64) * p[kap];
                    has_lin = true;
                }
            }
            if z0 == T::zero() && !has_lin {
                continue;
            }
            let d = self.deriv(lam);
            out = out + d.scale(z0);
            for kap in 0..4 {
                if a[kap][lam] != 0 {
                    out = out + d.shift_mul(kap).scale(T::of(a[kap][lam] as f64));
                }
            }
        }
        out
    }

    /// Truncate to a lower order.
    pub fn truncate(&self, order: usize) -> Self {
        if self.order == CONST || order >= self.order {
            return self.clone();
        }
        Self { order, c: self.c[..TABLE.count[order]].to_vec() }
    }

    fn zip_len(&self, other: &Self) -> usize {
        self.order.min(other.order)
    }

    fn scale_t(&self, k: T) -> Self {
        Self { order: self.order, c: self.c.iter().map(|&v| v * k).collect() }
    }

    /// f(b) where `f_k` are the Taylor coefficients of f at b's value.
    fn compose(&self, f_k: &[T]) -> Self {
        if self.order == CONST {
            return Self::constant(f_k[0]);
        }
        let mut h = self.clone();
        h.c[0] = T::zero();
        let mut acc = Self::constant(f_k[self.order.min(f_k.len() - 1)]);
        for k in (0..self.order.min(f_k.len() - 1)).rev() {
            acc = acc * h.clone();
            acc = acc + Self::constant(f_k[k]);
        }
        // make sure the result carries the jet order even if h vanished
        acc.lift(self.order)
    }

    fn lift(mut self, order: usize) -> Self {
        if self.order == CONST && order != CONST {
            let v = self.c[0];
            self = Self::zeros(order);
            self.c[0] = v;
        }
        self
    }

    fn series_len(&self) -> usize {
        if self.order == CONST {
            1
        } else {
            self.order + 1
        }
    }

    pub fn powf_real(&self, p: f64) -> Self {
        let b0 = self.value();
        let n = self.series_len();
        let mut f = Vec::with_capacity(n);
        let mut binom = 1.0;
        for k in 0..n {
            f.push(T::of(binom) * b0.powf(T::of(p - k as f64)));
            binom = binom * (p - k as f64) / (k as f64 + 1.0);
        }
        self.compose(&f)
    }
}

impl<T: Real> Add for Jet<T> {
    type Output = Jet<T>;
    fn add(self, rhs: Self) -> Self {
        let order = self.zip_len(&rhs);
        let n = Self::len_for(order);
        let c = (0..n).map(|i| self.get(i) + rhs.get(i)).collect();
        Jet { order, c }
    }
}

impl<T: Real> Sub for Jet<T> {
    type Output = Jet<T>;
    fn sub(self, rhs: Self) -> Self {
        let order = self.zip_len(&rhs);
        let n = Self::len_for(order);
        let c = (0..n).map(|i| self.get(i) - rhs.get(i)).collect();
        Jet { order, c }
    }
}

impl<T: Real> Neg for Jet<T> {
    type Output = Jet<T>;
    fn neg(self) -> Self {
        self.scale_t(-T::one())
    }
}

impl<T: Real> Mul for Jet<T> {
    type Output = Jet<T>;
    fn mul(self, rhs: Self) -> Self {
        if self.order == CONST {
            return rhs.scale_t(self.c[0]);
        }
        if rhs.order == CONST {
            return self.scale_t(rhs.c[0]);
        }
        let order = self.zip_len(&rhs);
        let n = TABLE.count[order];
        let mut c = vec![T::zero(); n];
        for i in 0..n {
            let a = self.c[i];
            if a == T::zero() {
                continue;
            }
            let ea = TABLE.exps[i];
            let rest = order - TABLE.degree[i] as usize;
            for j in 0..TABLE.count[rest] {
                let b = rhs.c[j];
                if b == T::zero() {
                    continue;
                }
                let eb = TABLE.exps[j];
                let e = [ea[0] + eb[0], ea[1] + eb[1], ea[2] + eb[2], ea[3] + eb[3]];
                c[TABLE.index(&e)] += a * b;
            }
        }
        Jet { order, c }
    }
}

impl<T: Real> Div for Jet<T> {
    type Output = Jet<T>;
    #[allow(clippy::suspicious_arithmetic_impl)]
    fn div(self, rhs: Self) -> Self {
        self * Scalar::recip(&rhs)
    }
}

impl<T: Real> Scalar for Jet<T> {
    type Base = T;

    fn cst(v: T) -> Self {
        Jet::constant(v)
    }
    fn primal(&self) -> T {
        self.value()
    }
    fn sqrt(&self) -> Self {
        self.powf_real(0.5)
    }
    fn exp(&self) -> Self {
        let e0 = self.value().exp();
        let n = self.series_len();
        let mut f = Vec::with_capacity(n);
        let mut fact = 1.0;
        for k in 0..n {
            if k > 0 {
                fact *= k as f64;
            }
            f.push(e0 / T::of(fact));
        }
        self.compose(&f)
    }
    fn powf(&self, p: f64) -> Self {
        self.powf_real(p)
    }
    fn recip(&self) -> Self {
        let b0 = self.value();
        let n = self.series_len();
        let mut f = Vec::with_capacity(n);
        let mut v = b0.recip();
        for _ in 0..n {
            f.push(v);
            v = -v / b0;
        }
        self.compose(&f)
    }
    fn scale(&self, k: T) -> Self {
        self.scale_t(k)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    type J = Jet<f64>;

    #[test]
    fn product_rule_and_chain_rule() {
        let [t, x, _, _] = J::coordinates([0.5, 2.0, 0.0, 0.0], 3);
        let f = t.clone() * x.clone() * x.clone(); // t x²
        assert_relative_eq!(f.value(), 2.0);
        assert_relative_eq!(f.d1(0), 4.0);
        assert_relative_eq!(f.d1(1), 2.0);
        assert_relative_eq!(f.d2(1, 1), 1.0);
        assert_relative_eq!(f.d2(0, 1), 4.0);
        let g = Scalar::exp(&(t * x));
        assert_relative_eq!(g.d1(1), 0.5 * 1.0f64.exp(), epsilon = 1e-14);
        assert_relative_eq!(g.d2(1, 1), 0.25 * 1.0f64.exp(), epsilon = 1e-14);
    }

    #[test]
    fn sqrt_and_recip() {
        let [_, x, y, z] = J::coordinates([0.0, 1.0, 2.0, 2.0], 2);
        let r = (x.clone() * x.clone() + y.clone() * y + z.clone() * z).sqrt();
        assert_relative_eq!(r.value(), 3.0, epsilon = 1e-15);
        assert_relative_eq!(r.d1(1), 1.0 / 3.0, epsilon = 1e-15);
        // ∂²r/∂x² = (r² − x²)/r³
        assert_relative_eq!(r.d2(1, 1), 8.0 / 27.0, epsilon = 1e-14);
        let inv = J::constant(1.0) / r;
        assert_relative_eq!(inv.d1(1), -1.0 / 27.0, epsilon = 1e-15);
    }

    #[test]
    fn polynomial_expansion_matches_direct_eval() {
        let p: Poly<f64> = Poly::var(0) * Poly::var(1) * Poly::var(1) + Poly::var(3);
        let j = J::from_poly(&p, [0.5, 2.0, 0.0, 1.0], 3);
        assert_relative_eq!(j.value(), 3.0);
        assert_relative_eq!(j.d2(0, 1), 4.0);
        assert_relative_eq!(j.d1(3), 1.0);
    }
}
