//! Minkowski metric, null frame and coordinate tensors.
//!
//! Coordinates are (t, x¹, x², x³) with m = diag(−1, 1, 1, 1).

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::{Real, Scalar};

/// Diagonal of the Minkowski metric (and of its inverse).
pub const ETA: [f64; 4] = [-1.0, 1.0, 1.0, 1.0];

/// Where the sphere-tangent pair switches to the chart adapted to the x¹ axis.
pub const POLAR_CAP: f64 = 0.9;

pub fn minkowski_cov<T: Real>() -> [[T; 4]; 4] {
    let mut m = [[T::zero(); 4]; 4];
    for (i, row) in m.iter_mut().enumerate() {
        row[i] = T::of(ETA[i]);
    }
    m
}

/// Spacetime event.
#[derive(Clone, Debug, PartialEq)]
pub struct Point<S> {
    pub t: S,
    pub x: [S; 3],
}

impl<S: Scalar> Point<S> {
    pub fn new(t: S, x: [S; 3]) -> Self {
        Self { t, x }
    }

    pub fn from_coords(c: [S; 4]) -> Self {
        let [t, a, b, d] = c;
        Self { t, x: [a, b, d] }
    }

    pub fn coords(&self) -> [S; 4] {
        [self.t.clone(), self.x[0].clone(), self.x[1].clone(), self.x[2].clone()]
    }

    pub fn r(&self) -> S {
        (self.x[0].square() + self.x[1].square() + self.x[2].square()).sqrt()
    }

    /// Retarded parameter q = r − t.
    pub fn q(&self) -> S {
        self.r() - self.t.clone()
    }
}

impl Point<f64> {
    pub fn at(t: f64, x: [f64; 3]) -> Self {
        Self { t, x }
    }
}

/// Members of the null frame.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum FrameVector {
    Lbar,
    L,
    E1,
    E2,
}

impl FrameVector {
    /// 𝒯 = {L, e1, e2}.
    pub const TANGENTIAL: [FrameVector; 3] = [FrameVector::L, FrameVector::E1, FrameVector::E2];
    /// 𝒰 = {L̄, L, e1, e2}.
    pub const FULL: [FrameVector; 4] =
        [FrameVector::Lbar, FrameVector::L, FrameVector::E1, FrameVector::E2];

    pub fn is_tangential(self) -> bool {
        self != FrameVector::Lbar
    }

    pub fn name(self) -> &'static str {
        match self {
            FrameVector::Lbar => "Lbar",
            FrameVector::L => "L",
            FrameVector::E1 => "e1",
            FrameVector::E2 => "e2",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s.trim() {
            "Lbar" | "lbar" | "Lb" => Some(FrameVector::Lbar),
            "L" | "l" => Some(FrameVector::L),
            "e1" | "E1" => Some(FrameVector::E1),
            "e2" | "E2" => Some(FrameVector::E2),
            _ => None,
        }
    }
}

/// Null frame at a point: contravariant components of L, L̄, e1, e2.
#[derive(Clone, Debug)]
pub struct Frame<S> {
    pub l: [S; 4],
    pub lbar: [S; 4],
    pub e: [[S; 4]; 2],
}

fn sphere_pair<S: Scalar>(x: &[S; 3], r: &S, perm: [usize; 3]) -> [[S; 3]; 2] {
    // perm maps chart slots (a, b, c) to coordinate slots; c is the polar axis.
    let a = x[perm[0]].clone();
    let b = x[perm[1]].clone();
    let c = x[perm[2]].clone();
    let rho = (a.square() + b.square()).sqrt();
    let rrho = r.clone() * rho.clone();
    let theta = [
        a.clone() * c.clone() / rrho.clone(),
        b.clone() * c / rrho,
        -(rho.clone() / r.clone()),
    ];
    let phi = [-(b / rho.clone()), a / rho, S::zero()];
    let mut out = [
        [S::zero(), S::zero(), S::zero()],
        [S::zero(), S::zero(), S::zero()],
    ];
    for k in 0..3 {
        out[0][perm[k]] = theta[k].clone();
        out[1][perm[k]] = phi[k].clone();
    }
    out
}

/// Null frame at `p`. The sphere pair uses spherical angles about the x³
/// axis, switching to angles about the x¹ axis inside the polar caps.
pub fn null_frame_at<S: Scalar>(p: &Point<S>) -> Result<Frame<S>> {
    let r = p.r();
    let rv = r.primal().to_f64_lossy();
    if rv == 0.0 {
        return Err(Error::PoleDegenerate);
    }
    let xhat = [
        p.x[0].clone() / r.clone(),
        p.x[1].clone() / r.clone(),
        p.x[2].clone() / r.clone(),
    ];
    let polar = p.x[2].primal().to_f64_lossy().abs() / rv > POLAR_CAP;
    let perm = if polar { [1, 2, 0] } else { [0, 1, 2] };
    let pair = sphere_pair(&p.x, &r, perm);
    let one = S::one();
    let z = S::zero();
    let l = [one.clone(), xhat[0].clone(), xhat[1].clone(), xhat[2].clone()];
    let lbar = [one, -xhat[0].clone(), -xhat[1].clone(), -xhat[2].clone()];
    let e = [
        [z.clone(), pair[0][0].clone(), pair[0][1].clone(), pair[0][2].clone()],
        [z, pair[1][0].clone(), pair[1][1].clone(), pair[1][2].clone()],
    ];
    Ok(Frame { l, lbar, e })
}

impl<S: Scalar> Frame<S> {
    pub fn vector(&self, v: FrameVector) -> &[S; 4] {
        match v {
            FrameVector::Lbar => &self.lbar,
            FrameVector::L => &self.l,
            FrameVector::E1 => &self.e[0],
            FrameVector::E2 => &self.e[1],
        }
    }

    /// Dual covector θ^V with θ^V(W) = δ^V_W on the frame:
    /// θ^L̄ = −½ L♭, θ^L = −½ L̄♭, θ^{e_A} = e_A♭.
    pub fn dual(&self, v: FrameVector) -> [S; 4] {
        let half = S::from_f64(-0.5);
        match v {
            FrameVector::Lbar => lower(&self.l).map(|c| c * half.clone()),
            FrameVector::L => lower(&self.lbar).map(|c| c * half.clone()),
            FrameVector::E1 => lower(&self.e[0]),
            FrameVector::E2 => lower(&self.e[1]),
        }
    }
}

/// m(a, b).
pub fn mdot<S: Scalar>(a: &[S; 4], b: &[S; 4]) -> S {
    -(a[0].clone() * b[0].clone())
        + a[1].clone() * b[1].clone()
        + a[2].clone() * b[2].clone()
        + a[3].clone() * b[3].clone()
}

/// Lower an index with m (time slot flips sign).
pub fn lower<S: Clone + std::ops::Neg<Output = S>>(v: &[S; 4]) -> [S; 4] {
    [-v[0].clone(), v[1].clone(), v[2].clone(), v[3].clone()]
}

/// Raise an index with m.
pub fn raise<S: Clone + std::ops::Neg<Output = S>>(xi: &[S; 4]) -> [S; 4] {
    lower(xi)
}

/// Slot variance of a coordinate tensor.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Variance {
    Co,
    Contra,
}

/// Rank ≤ 2 tensor at a point, each component a multi-channel value.
#[derive(Clone, Debug, PartialEq)]
pub struct CoordTensor<T> {
    rank: usize,
    variance: [Variance; 2],
    channels: usize,
    data: Vec<T>,
}

impl<T: Real> CoordTensor<T> {
    pub fn zeros(rank: usize, variance: [Variance; 2], channels: usize) -> Self {
        assert!(rank <= 2 && channels > 0);
        Self { rank, variance, channels, data: vec![T::zero(); 4usize.pow(rank as u32) * channels] }
    }

    pub fn from_data(rank: usize, variance: [Variance; 2], channels: usize, data: Vec<T>) -> Self {
        assert_eq!(data.len(), 4usize.pow(rank as u32) * channels);
        Self { rank, variance, channels, data }
    }

    pub fn vector(v: [T; 4]) -> Self {
        Self::from_data(1, [Variance::Contra; 2], 1, v.to_vec())
    }

    pub fn covector(v: [T; 4]) -> Self {
        Self::from_data(1, [Variance::Co; 2], 1, v.to_vec())
    }

    /// Single-channel rank-2 tensor from a matrix.
    pub fn matrix(m: [[T; 4]; 4], variance: Variance) -> Self {
        let data = m.iter().flat_map(|r| r.iter().copied()).collect();
        Self::from_data(2, [variance; 2], 1, data)
    }

    /// The Minkowski metric m_{μν}.
    pub fn minkowski() -> Self {
        Self::matrix(minkowski_cov(), Variance::Co)
    }

    /// The inverse metric m^{μν}.
    pub fn minkowski_inverse() -> Self {
        Self::matrix(minkowski_cov(), Variance::Contra)
    }

    pub fn rank(&self) -> usize {
        self.rank
    }
    pub fn channels(&self) -> usize {
        self.channels
    }
    pub fn variance(&self) -> [Variance; 2] {
        self.variance
    }
    pub fn data(&self) -> &[T] {
        &self.data
    }

    fn offset(&self, idx: &[usize]) -> usize {
        idx.iter().fold(0, |acc, &i| acc * 4 + i) * self.channels
    }

    pub fn get(&self, idx: &[usize], ch: usize) -> T {
        self.data[self.offset(idx) + ch]
    }

    pub fn set(&mut self, idx: &[usize], ch: usize, v: T) {
        let o = self.offset(idx) + ch;
        self.data[o] = v;
    }

    /// Full contraction T(V1[, V2]) per channel. Contravariant slots are
    /// lowered with m before contracting.
    pub fn frame_component(&self, vecs: &[[T; 4]]) -> Result<Vec<T>> {
        if vecs.len() != self.rank {
            return Err(Error::RankMismatch { expected: self.rank, got: vecs.len() });
        }
        let slot_vec: Vec<[T; 4]> = vecs
            .iter()
            .enumerate()
            .map(|(k, v)| match self.variance[k] {
                Variance::Co => *v,
                Variance::Contra => lower(v),
            })
            .collect();
        let mut out = vec![T::zero(); self.channels];
        let n = 4usize.pow(self.rank as u32);
        for flat in 0..n {
            let mut w = T::one();
            let mut rem = flat;
            for k in (0..self.rank).rev() {
                w *= slot_vec[k][rem % 4];
                rem /= 4;
            }
            if w == T::zero() {
                continue;
            }
            for (c, o) in out.iter_mut().enumerate() {
                *o += w * self.data[flat * self.channels + c];
            }
        }
        Ok(out)
    }

    /// Flip every slot's variance using m.
    pub fn toggle_all(&self) -> Self {
        let mut out = self.clone();
        for k in 0..self.rank {
            out.variance[k] = match self.variance[k] {
                Variance::Co => Variance::Contra,
                Variance::Contra => Variance::Co,
            };
        }
        let n = 4usize.pow(self.rank as u32);
        for flat in 0..n {
            let mut sign = T::one();
            let mut rem = flat;
            for _ in 0..self.rank {
                if rem % 4 == 0 {
                    sign = -sign;
                }
                rem /= 4;
            }
            for c in 0..self.channels {
                out.data[flat * self.channels + c] = sign * self.data[flat * self.channels + c];
            }
        }
        out
    }

    pub fn frobenius_norm(&self) -> T {
        self.data.iter().map(|&v| v * v).sum::<T>().sqrt()
    }

    pub fn add(&self, other: &Self) -> Self {
        let mut out = self.clone();
        for (a, b) in out.data.iter_mut().zip(other.data.iter()) {
            *a += *b;
        }
        out
    }

    pub fn scale(&self, k: T) -> Self {
        let mut out = self.clone();
        out.data.iter_mut().for_each(|v| *v *= k);
        out
    }
}

/// Raise a covector (free function form).
pub fn raise_index<T: Real>(xi: &CoordTensor<T>) -> Result<CoordTensor<T>> {
    if xi.rank() != 1 || xi.variance()[0] != Variance::Co {
        return Err(Error::RankMismatch { expected: 1, got: xi.rank() });
    }
    Ok(xi.toggle_all())
}

/// Lower a vector.
pub fn lower_index<T: Real>(v: &CoordTensor<T>) -> Result<CoordTensor<T>> {
    if v.rank() != 1 || v.variance()[0] != Variance::Contra {
        return Err(Error::RankMismatch { expected: 1, got: v.rank() });
    }
    Ok(v.toggle_all())
}

pub fn frobenius_norm<T: Real>(t: &CoordTensor<T>) -> T {
    t.frobenius_norm()
}

/// Euclidean norm of a 4×4 matrix, used for the |H| < 1/3 check.
pub fn matrix_norm(h: &[[f64; 4]; 4]) -> f64 {
    h.iter().flat_map(|r| r.iter()).map(|v| v * v).sum::<f64>().sqrt()
}

/// A prescribed perturbation H^{μν}(t, x) of the inverse Minkowski metric.
pub trait Perturbation: Sync + Send {
    fn h_inv(&self, t: f64, x: [f64; 3]) -> [[f64; 4]; 4];
    /// ∂_λ H^{μν}, indexed `[λ][μ][ν]`.
    fn dh_inv(&self, t: f64, x: [f64; 3]) -> [[[f64; 4]; 4]; 4];
    /// True when H vanishes identically.
    fn is_flat(&self) -> bool {
        false
    }
    /// True when H does not depend on t.
    fn is_static(&self) -> bool {
        false
    }
    /// An a priori bound on sup |H|, when known.
    fn amplitude_bound(&self) -> Option<f64> {
        None
    }
}

/// H = 0.
#[derive(Clone, Copy, Debug, Default)]
pub struct Flat;

impl Perturbation for Flat {
    fn h_inv(&self, _: f64, _: [f64; 3]) -> [[f64; 4]; 4] {
        [[0.0; 4]; 4]
    }
    fn dh_inv(&self, _: f64, _: [f64; 3]) -> [[[f64; 4]; 4]; 4] {
        [[[0.0; 4]; 4]; 4]
    }
    fn is_flat(&self) -> bool {
        true
    }
    fn is_static(&self) -> bool {
        true
    }
    fn amplitude_bound(&self) -> Option<f64> {
        Some(0.0)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn frame_on_x_axis() {
        let f = null_frame_at(&Point::at(0.0, [1.0, 0.0, 0.0])).unwrap();
        assert_eq!(f.l, [1.0, 1.0, 0.0, 0.0]);
        assert_eq!(f.lbar, [1.0, -1.0, 0.0, 0.0]);
    }

    #[test]
    fn origin_rejected() {
        assert_eq!(null_frame_at(&Point::at(1.0, [0.0; 3])).unwrap_err(), Error::PoleDegenerate);
    }

    #[test]
    fn dual_basis_is_dual() {
        let f = null_frame_at(&Point::at(1.0, [0.3, -0.4, 1.2])).unwrap();
        for a in FrameVector::FULL {
            let th = f.dual(a);
            for b in FrameVector::FULL {
                let v = f.vector(b);
                let s: f64 = (0..4).map(|k| th[k] * v[k]).sum();
                assert_relative_eq!(s, if a == b { 1.0 } else { 0.0 }, epsilon = 1e-14);
            }
        }
        // mixed component m^{L̄}_t = θ^{L̄}_t
        assert_relative_eq!(f.dual(FrameVector::Lbar)[0], 0.5);
    }

    #[test]
    fn metric_components() {
        let m = CoordTensor::<f64>::minkowski();
        let f = null_frame_at(&Point::at(0.0, [0.0, 0.0, 2.0])).unwrap();
        assert_eq!(m.frame_component(&[f.l, f.l]).unwrap()[0], 0.0);
        assert_eq!(m.frame_component(&[f.l, f.lbar]).unwrap()[0], -2.0);
        assert_eq!(m.frobenius_norm(), 2.0);
        assert!(m.frame_component(&[f.l]).is_err());
    }

    #[test]
    fn lower_then_raise() {
        let v = CoordTensor::vector([1.0, 0.0, 0.0, 0.0]);
        let lv = lower_index(&v).unwrap();
        assert_eq!(lv.data(), &[-1.0, 0.0, 0.0, 0.0]);
        assert_eq!(raise_index(&lv).unwrap(), v);
    }
}
