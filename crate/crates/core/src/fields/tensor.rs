//! Rank ≤ 2 tensor fields with pluggable component representation.
//!
//! `PolyField<C>` stores exact polynomials, `JetField<T>` stores Taylor jets
//! around a base point. Both share the index bookkeeping and the Lie
//! derivative code through [`FieldElem`].

use rand::Rng;

use crate::error::{Error, Result};
use crate::geometry::{CoordTensor, Variance};
use crate::jet::Jet;
use crate::poly::Poly;
use crate::scalar::{Coeff, Real, Scalar};
use crate::vecfields::AffineField;

/// Component type of a tensor field.
pub trait FieldElem: Clone + Send + Sync {
    /// Extra data needed to differentiate (the base point for jets).
    type Ctx: Clone + Send + Sync;

    fn zero_like(&self) -> Self;
    fn is_zero_elem(&self) -> bool;
    fn add(&self, o: &Self) -> Self;
    fn sub(&self, o: &Self) -> Self;
    fn mul(&self, o: &Self) -> Self;
    fn scale_i(&self, k: i64) -> Self;
    fn deriv(&self, mu: usize) -> Self;
    /// Z(f) = Z^λ ∂_λ f for an affine vector field Z.
    fn directional(&self, z: &AffineField, ctx: &Self::Ctx) -> Self;
}

impl<C: Coeff> FieldElem for Poly<C> {
    type Ctx = ();
    fn zero_like(&self) -> Self {
        Poly::zero()
    }
    fn is_zero_elem(&self) -> bool {
        self.is_zero()
    }
    fn add(&self, o: &Self) -> Self {
        self + o
    }
    fn sub(&self, o: &Self) -> Self {
        self - o
    }
    fn mul(&self, o: &Self) -> Self {
        self * o
    }
    fn scale_i(&self, k: i64) -> Self {
        Poly::scale_i(self, k)
    }
    fn deriv(&self, mu: usize) -> Self {
        Poly::deriv(self, mu)
    }
    fn directional(&self, z: &AffineField, _: &()) -> Self {
        self.affine_directional(&z.b, &z.a)
    }
}

impl<T: Real> FieldElem for Jet<T> {
    type Ctx = [T; 4];
    fn zero_like(&self) -> Self {
        Jet::constant(T::zero())
    }
    fn is_zero_elem(&self) -> bool {
        false
    }
    fn add(&self, o: &Self) -> Self {
        self.clone() + o.clone()
    }
    fn sub(&self, o: &Self) -> Self {
        self.clone() - o.clone()
    }
    fn mul(&self, o: &Self) -> Self {
        self.clone() * o.clone()
    }
    fn scale_i(&self, k: i64) -> Self {
        self.scale(T::of(k as f64))
    }
    fn deriv(&self, mu: usize) -> Self {
        Jet::deriv(self, mu)
    }
    fn directional(&self, z: &AffineField, ctx: &[T; 4]) -> Self {
        self.affine_directional(ctx, &z.b, &z.a)
    }
}

/// Tensor field of rank ≤ 2 (rank 3 is allowed internally for gradients).
#[derive(Clone, Debug, PartialEq)]
pub struct Tensor<E> {
    rank: usize,
    variance: [Variance; 3],
    channels: usize,
    comps: Vec<E>,
}

pub type PolyField<C> = Tensor<Poly<C>>;
pub type JetField<T> = Tensor<Jet<T>>;

fn slots(rank: usize) -> usize {
    4usize.pow(rank as u32)
}

/// Decompose a flat slot number into coordinate indices.
pub fn unflatten(rank: usize, mut flat: usize) -> [usize; 3] {
    let mut idx = [0usize; 3];
    for k in (0..rank).rev() {
        idx[k] = flat % 4;
        flat /= 4;
    }
    idx
}

pub fn flatten(idx: &[usize]) -> usize {
    idx.iter().fold(0, |acc, &i| acc * 4 + i)
}

impl<E: FieldElem> Tensor<E> {
    pub fn from_components(rank: usize, variance: &[Variance], channels: usize, comps: Vec<E>) -> Self {
        assert!(rank <= 3 && channels > 0);
        assert_eq!(comps.len(), slots(rank) * channels, "component count");
        let mut v = [Variance::Co; 3];
        for (k, var) in variance.iter().take(rank).enumerate() {
            v[k] = *var;
        }
        Self { rank, variance: v, channels, comps }
    }

    pub fn scalar(f: E) -> Self {
        Self::from_components(0, &[], 1, vec![f])
    }

    pub fn scalar_channels(fs: Vec<E>) -> Self {
        let n = fs.len();
        Self::from_components(0, &[], n, fs)
    }

    pub fn rank(&self) -> usize {
        self.rank
    }
    pub fn channels(&self) -> usize {
        self.channels
    }
    pub fn variance(&self) -> &[Variance] {
        &self.variance[..self.rank]
    }
    pub fn components(&self) -> &[E] {
        &self.comps
    }

    pub fn get(&self, idx: &[usize], ch: usize) -> &E {
        &self.comps[flatten(idx) * self.channels + ch]
    }

    pub fn get_mut(&mut self, idx: &[usize], ch: usize) -> &mut E {
        let o = flatten(idx) * self.channels + ch;
        &mut self.comps[o]
    }

    pub fn map(&self, f: impl Fn(&E) -> E) -> Self {
        Self { comps: self.comps.iter().map(f).collect(), ..self.clone_shape() }
    }

    fn clone_shape(&self) -> Self {
        Self { rank: self.rank, variance: self.variance, channels: self.channels, comps: Vec::new() }
    }

    pub fn same_shape(&self, o: &Self) -> bool {
        self.rank == o.rank && self.channels == o.channels && self.variance() == o.variance()
    }

    pub fn try_add(&self, o: &Self) -> Result<Self> {
        if !self.same_shape(o) {
            return Err(Error::DomainMismatch("tensor shapes differ".into()));
        }
        Ok(Self {
            comps: self.comps.iter().zip(o.comps.iter()).map(|(a, b)| a.add(b)).collect(),
            ..self.clone_shape()
        })
    }

    pub fn add(&self, o: &Self) -> Self {
        self.try_add(o).expect("tensor shapes differ")
    }

    pub fn sub(&self, o: &Self) -> Self {
        assert!(self.same_shape(o), "tensor shapes differ");
        Self {
            comps: self.comps.iter().zip(o.comps.iter()).map(|(a, b)| a.sub(b)).collect(),
            ..self.clone_shape()
        }
    }

    pub fn scale_i(&self, k: i64) -> Self {
        self.map(|c| c.scale_i(k))
    }

    /// Multiply every component by a scalar function.
    pub fn mul_elem(&self, f: &E) -> Self {
        self.map(|c| c.mul(f))
    }

    /// Componentwise partial derivative ∂_μ.
    pub fn partial(&self, mu: usize) -> Self {
        self.map(|c| c.deriv(mu))
    }

    /// Gradient with the derivative index prepended as a covariant slot.
    pub fn gradient(&self) -> Self {
        assert!(self.rank < 3);
        let n = slots(self.rank) * self.channels;
        let mut comps = Vec::with_capacity(4 * n);
        for mu in 0..4 {
            comps.extend(self.comps.iter().map(|c| c.deriv(mu)));
        }
        let mut variance = [Variance::Co; 3];
        variance[1..(self.rank + 1)].copy_from_slice(&self.variance[..self.rank]);
        Self { rank: self.rank + 1, variance, channels: self.channels, comps }
    }

    /// Flip every slot's variance with m (sign change per time index).
    pub fn toggle_all(&self) -> Self {
        let mut out = self.clone();
        for k in 0..self.rank {
            out.variance[k] = match self.variance[k] {
                Variance::Co => Variance::Contra,
                Variance::Contra => Variance::Co,
            };
        }
        for flat in 0..slots(self.rank) {
            let idx = unflatten(self.rank, flat);
            let flips = idx[..self.rank].iter().filter(|&&i| i == 0).count();
            if flips % 2 == 1 {
                for c in 0..self.channels {
                    let o = flat * self.channels + c;
                    out.comps[o] = self.comps[o].scale_i(-1);
                }
            }
        }
        out
    }

    /// Same tensor with every slot covariant.
    pub fn lowered(&self) -> Self {
        self.with_variance(Variance::Co)
    }

    /// Same tensor with every slot contravariant.
    pub fn raised(&self) -> Self {
        self.with_variance(Variance::Contra)
    }

    fn with_variance(&self, target: Variance) -> Self {
        let mut out = self.clone();
        for k in 0..self.rank {
            out.variance[k] = target;
        }
        for flat in 0..slots(self.rank) {
            let idx = unflatten(self.rank, flat);
            let flips = (0..self.rank).filter(|&k| idx[k] == 0 && self.variance[k] != target).count();
            if flips % 2 == 1 {
                for c in 0..self.channels {
                    let o = flat * self.channels + c;
                    out.comps[o] = self.comps[o].scale_i(-1);
                }
            }
        }
        out
    }

    /// Extract one channel as a single-channel tensor.
    pub fn channel(&self, ch: usize) -> Self {
        let comps = (0..slots(self.rank)).map(|f| self.comps[f * self.channels + ch].clone()).collect();
        Self { rank: self.rank, variance: self.variance, channels: 1, comps }
    }

    /// Wave operator g^{αβ}∂_α∂_β applied slotwise, with g⁻¹ = m⁻¹ + H and
    /// H given as a contravariant symmetric rank-2 field (single channel).
    pub fn wave_operator(&self, h: Option<&Self>) -> Self {
        let eta = [-1i64, 1, 1, 1];
        let d: Vec<Self> = (0..4).map(|mu| self.partial(mu)).collect();
        let mut acc: Option<Self> = None;
        for a in 0..4 {
            for b in 0..4 {
                let dd = d[a].partial(b);
                let mut term: Option<Self> = None;
                if a == b {
                    term = Some(dd.scale_i(eta[a]));
                }
                if let Some(h) = h {
                    let hab = h.get(&[a, b], 0);
                    if !hab.is_zero_elem() {
                        let ht = dd.mul_elem(hab);
                        term = Some(match term {
                            Some(t) => t.add(&ht),
                            None => ht,
                        });
                    }
                }
                if let Some(t) = term {
                    acc = Some(match acc {
                        Some(s) => s.add(&t),
                        None => t,
                    });
                }
            }
        }
        acc.unwrap_or_else(|| self.scale_i(0))
    }
}

impl<C: Coeff> PolyField<C> {
    pub fn zeros(rank: usize, variance: &[Variance], channels: usize) -> Self {
        Self::from_components(rank, variance, channels, vec![Poly::zero(); slots(rank) * channels])
    }

    /// Constant single-channel rank-2 field with integer entries.
    pub fn constant_matrix(m: [[i64; 4]; 4], variance: Variance) -> Self {
        let comps = (0..16).map(|f| Poly::constant(C::from_i64(m[f / 4][f % 4]))).collect();
        Self::from_components(2, &[variance, variance], 1, comps)
    }

    pub fn minkowski() -> Self {
        Self::constant_matrix(ETA_I, Variance::Co)
    }

    pub fn minkowski_inverse() -> Self {
        Self::constant_matrix(ETA_I, Variance::Contra)
    }

    /// Random field with integer coefficients; `symmetric` mirrors rank-2 slots.
    pub fn random<R: Rng + ?Sized>(
        rng: &mut R,
        rank: usize,
        variance: &[Variance],
        channels: usize,
        degree: usize,
        amp: i64,
        symmetric: bool,
    ) -> Self {
        let mut f = Self::zeros(rank, variance, channels);
        for flat in 0..slots(rank) {
            let idx = unflatten(rank, flat);
            if symmetric && rank == 2 && idx[0] > idx[1] {
                continue;
            }
            for ch in 0..channels {
                let p = Poly::random_int(rng, degree, amp, 0.6);
                *f.get_mut(&idx[..rank], ch) = p.clone();
                if symmetric && rank == 2 {
                    *f.get_mut(&[idx[1], idx[0]], ch) = p;
                }
            }
        }
        f
    }

    /// Evaluate at a point.
    pub fn eval(&self, x: &[f64; 4]) -> CoordTensor<f64> {
        assert!(self.rank <= 2);
        let data = self.comps.iter().map(|p| p.eval(x)).collect();
        CoordTensor::from_data(self.rank, [self.variance[0], self.variance[1]], self.channels, data)
    }

    /// Taylor jets of every component at `p`.
    pub fn jets<T: Real>(&self, p: [T; 4], order: usize) -> JetField<T> {
        let comps = self.comps.iter().map(|c| Jet::from_poly(c, p, order)).collect();
        Tensor { rank: self.rank, variance: self.variance, channels: self.channels, comps }
    }

    pub fn to_f64(&self) -> PolyField<f64> {
        Tensor {
            rank: self.rank,
            variance: self.variance,
            channels: self.channels,
            comps: self.comps.iter().map(|p| p.to_f64()).collect(),
        }
    }

    pub fn max_degree(&self) -> usize {
        self.comps.iter().filter_map(|p| p.degree()).max().unwrap_or(0)
    }

    pub fn is_zero(&self) -> bool {
        self.comps.iter().all(|p| p.is_zero())
    }
}

impl<T: Real> JetField<T> {
    /// Component values at the base point.
    pub fn values(&self) -> CoordTensor<T> {
        assert!(self.rank <= 2);
        let data = self.comps.iter().map(|j| j.value()).collect();
        CoordTensor::from_data(self.rank, [self.variance[0], self.variance[1]], self.channels, data)
    }

    /// Frobenius norm of the values at the base point.
    pub fn value_norm(&self) -> T {
        self.comps.iter().map(|j| j.value() * j.value()).sum::<T>().sqrt()
    }

    /// Frobenius norm of the gradient at the base point.
    pub fn gradient_norm(&self) -> T {
        let mut s = T::zero();
        for j in self.comps.iter() {
            for mu in 0..4 {
                let d = j.d1(mu);
                s += d * d;
            }
        }
        s.sqrt()
    }

    /// Build from analytic component jets.
    pub fn from_jets(rank: usize, variance: &[Variance], channels: usize, comps: Vec<Jet<T>>) -> Self {
        Self::from_components(rank, variance, channels, comps)
    }

    /// Contract every slot with a jet-valued vector, giving per-channel scalar jets.
    /// Contravariant slots are lowered first.
    pub fn contract(&self, vecs: &[[Jet<T>; 4]]) -> Result<Vec<Jet<T>>> {
        if vecs.len() != self.rank {
            return Err(Error::RankMismatch { expected: self.rank, got: vecs.len() });
        }
        let lowered: Vec<[Jet<T>; 4]> = vecs
            .iter()
            .enumerate()
            .map(|(k, v)| match self.variance[k] {
                Variance::Co => v.clone(),
                Variance::Contra => crate::geometry::lower(v),
            })
            .collect();
        let mut out: Vec<Jet<T>> = vec![Jet::constant(T::zero()); self.channels];
        for flat in 0..slots(self.rank) {
            let idx = unflatten(self.rank, flat);
            let mut w = Jet::constant(T::one());
            for k in 0..self.rank {
                w = w * lowered[k][idx[k]].clone();
            }
            for (c, o) in out.iter_mut().enumerate() {
                *o = o.clone() + w.clone() * self.comps[flat * self.channels + c].clone();
            }
        }
        Ok(out)
    }
}

const ETA_I: [[i64; 4]; 4] = [[-1, 0, 0, 0], [0, 1, 0, 0], [0, 0, 1, 0], [0, 0, 0, 1]];

#[cfg(test)]
mod tests {
    use super::*;

    type PF = PolyField<f64>;

    #[test]
    fn partial_of_tx() {
        let f = PF::scalar(Poly::var(0) * Poly::var(1));
        assert_eq!(f.partial(0), PF::scalar(Poly::var(1)));
    }

    #[test]
    fn wave_operator_examples() {
        let t2 = PF::scalar(Poly::var(0) * Poly::var(0));
        assert_eq!(t2.wave_operator(None), PF::scalar(Poly::constant(-2.0)));
        let x2 = PF::scalar(Poly::var(1) * Poly::var(1));
        assert_eq!(x2.wave_operator(None), PF::scalar(Poly::constant(2.0)));
        // H^{tt} = ε
        let mut h = PF::zeros(2, &[Variance::Contra; 2], 1);
        *h.get_mut(&[0, 0], 0) = Poly::constant(0.25);
        assert_eq!(t2.wave_operator(Some(&h)), PF::scalar(Poly::constant(-1.5)));
    }

    #[test]
    fn lowering_round_trip() {
        let m = PF::minkowski_inverse();
        assert_eq!(m.lowered(), PF::minkowski());
        assert_eq!(m.lowered().raised(), m);
    }
}
