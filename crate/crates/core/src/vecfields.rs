//! The Minkowski vector fields: translations, Lorentz rotations/boosts and
//! the scaling field, with Lie derivatives and multi-index bookkeeping.

use std::collections::HashMap;
use std::fmt;
use std::sync::Mutex;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fields::{FieldElem, PolyField, Tensor};
use crate::geometry::{Variance, ETA};
use crate::poly::Poly;
use crate::scalar::{Coeff, Real};

/// Affine vector field Z^λ = b^λ + Σ_κ a[κ][λ] x^κ, so ∂_κ Z^λ = a[κ][λ].
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct AffineField {
    pub b: [i64; 4],
    pub a: [[i64; 4]; 4],
}

impl AffineField {
    pub const ZERO: AffineField = AffineField { b: [0; 4], a: [[0; 4]; 4] };

    /// Components at a point.
    pub fn at<T: Real>(&self, x: &[T; 4]) -> [T; 4] {
        let mut z = [T::zero(); 4];
        for lam in 0..4 {
            let mut v = T::of(self.b[lam] as f64);
            for kap in 0..4 {
                if self.a[kap][lam] != 0 {
                    v += T::of(self.a[kap][lam] as f64) * x[kap];
                }
            }
            z[lam] = v;
        }
        z
    }

    /// Lie bracket [X, Y]^μ = X(Y^μ) − Y(X^μ).
    pub fn bracket(&self, other: &AffineField) -> AffineField {
        let mut out = AffineField::ZERO;
        for mu in 0..4 {
            let mut s = 0;
            for nu in 0..4 {
                s += self.b[nu] * other.a[nu][mu] - other.b[nu] * self.a[nu][mu];
            }
            out.b[mu] = s;
            for kap in 0..4 {
                let mut s = 0;
                for nu in 0..4 {
                    s += self.a[kap][nu] * other.a[nu][mu] - other.a[kap][nu] * self.a[nu][mu];
                }
                out.a[kap][mu] = s;
            }
        }
        out
    }

    pub fn add_scaled(&self, other: &AffineField, k: i64) -> AffineField {
        let mut out = *self;
        for mu in 0..4 {
            out.b[mu] += k * other.b[mu];
            for kap in 0..4 {
                out.a[kap][mu] += k * other.a[kap][mu];
            }
        }
        out
    }
}

/// One of the 11 generators.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum VectorFieldId {
    /// Translation ∂_μ.
    P(u8),
    /// Z_{αβ} = x_β∂_α − x_α∂_β with α < β.
    Z(u8, u8),
    /// Scaling t∂_t + xⁱ∂_i.
    S,
}

impl VectorFieldId {
    pub const ALL: [VectorFieldId; 11] = [
        VectorFieldId::P(0),
        VectorFieldId::P(1),
        VectorFieldId::P(2),
        VectorFieldId::P(3),
        VectorFieldId::Z(0, 1),
        VectorFieldId::Z(0, 2),
        VectorFieldId::Z(0, 3),
        VectorFieldId::Z(1, 2),
        VectorFieldId::Z(1, 3),
        VectorFieldId::Z(2, 3),
        VectorFieldId::S,
    ];

    pub fn index(self) -> usize {
        Self::ALL.iter().position(|&g| g == self).expect("generator")
    }

    /// Killing fields leave m invariant (all but S).
    pub fn is_killing(self) -> bool {
        self != VectorFieldId::S
    }

    pub fn affine(self) -> AffineField {
        let mut f = AffineField::ZERO;
        match self {
            VectorFieldId::P(mu) => f.b[mu as usize] = 1,
            VectorFieldId::Z(al, be) => {
                let (al, be) = (al as usize, be as usize);
                // Z^α = x_β = η_β x^β, Z^β = −x_α = −η_α x^α
                f.a[be][al] = ETA[be] as i64;
                f.a[al][be] = -(ETA[al] as i64);
            }
            VectorFieldId::S => {
                for k in 0..4 {
                    f.a[k][k] = 1;
                }
            }
        }
        f
    }

    pub fn name(self) -> String {
        match self {
            VectorFieldId::P(0) => "P t".to_string(),
            VectorFieldId::P(m) => format!("P x{m}"),
            VectorFieldId::Z(a, b) => format!("Z{a}{b}"),
            VectorFieldId::S => "S".to_string(),
        }
    }

    /// Parse "S", "Z01", "P t", "P x1", "P0", "Pt".
    pub fn parse(s: &str) -> Option<Self> {
        let s: String = s.split_whitespace().collect();
        match s.as_str() {
            "S" => return Some(VectorFieldId::S),
            "Pt" | "P0" => return Some(VectorFieldId::P(0)),
            _ => {}
        }
        if let Some(rest) = s.strip_prefix('P') {
            let d = rest.strip_prefix('x').unwrap_or(rest);
            return match d {
                "1" => Some(VectorFieldId::P(1)),
                "2" => Some(VectorFieldId::P(2)),
                "3" => Some(VectorFieldId::P(3)),
                _ => None,
            };
        }
        if let Some(rest) = s.strip_prefix('Z') {
            let b = rest.as_bytes();
            if b.len() == 2 && b[0].is_ascii_digit() && b[1].is_ascii_digit() {
                let (a, c) = (b[0] - b'0', b[1] - b'0');
                if a < c && c <= 3 {
                    return Some(VectorFieldId::Z(a, c));
                }
            }
        }
        None
    }
}

impl fmt::Display for VectorFieldId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.name())
    }
}

/// The generator as a contravariant polynomial vector field.
pub fn as_field<C: Coeff>(id: VectorFieldId) -> PolyField<C> {
    let z = id.affine();
    let comps = (0..4)
        .map(|lam| {
            let mut p = Poly::constant(C::from_i64(z.b[lam]));
            for kap in 0..4 {
                if z.a[kap][lam] != 0 {
                    p = p + Poly::var(kap).scale_i(z.a[kap][lam]);
                }
            }
            p
        })
        .collect();
    Tensor::from_components(1, &[Variance::Contra], 1, comps)
}

/// Lie derivative along an affine field, exact for polynomial components.
pub fn lie_affine<E: FieldElem>(z: &AffineField, t: &Tensor<E>, ctx: &E::Ctx) -> Tensor<E> {
    let rank = t.rank();
    let ch = t.channels();
    let var: Vec<Variance> = t.variance().to_vec();
    let n = 4usize.pow(rank as u32);
    let mut comps = Vec::with_capacity(n * ch);
    for flat in 0..n {
        let idx = crate::fields::unflatten(rank, flat);
        for c in 0..ch {
            let mut acc = t.get(&idx[..rank], c).directional(z, ctx);
            for s in 0..rank {
                for lam in 0..4 {
                    let k = match var[s] {
                        Variance::Co => z.a[idx[s]][lam],
                        Variance::Contra => -z.a[lam][idx[s]],
                    };
                    if k == 0 {
                        continue;
                    }
                    let mut j = idx;
                    j[s] = lam;
                    acc = acc.add(&t.get(&j[..rank], c).scale_i(k));
                }
            }
            comps.push(acc);
        }
    }
    Tensor::from_components(rank, &var, ch, comps)
}

pub fn lie_derivative<E: FieldElem>(id: VectorFieldId, t: &Tensor<E>, ctx: &E::Ctx) -> Tensor<E> {
    lie_affine(&id.affine(), t, ctx)
}

/// ℒ_{Z^I} T = ℒ_{ι1}(…ℒ_{ιk} T): the rightmost generator acts first.
pub fn lie_multi<E: FieldElem>(i: &MultiIndex, t: &Tensor<E>, ctx: &E::Ctx) -> Tensor<E> {
    let mut out = t.clone();
    for id in i.0.iter().rev() {
        out = lie_derivative(*id, &out, ctx);
    }
    out
}

/// Ordered sequence of generators.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Default, PartialOrd, Ord, Serialize, Deserialize)]
pub struct MultiIndex(pub Vec<VectorFieldId>);

impl MultiIndex {
    pub fn empty() -> Self {
        Self(Vec::new())
    }

    pub fn order(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// (|K| − 1)₊.
    pub fn reduced_order(&self) -> usize {
        self.0.len().saturating_sub(1)
    }

    /// Comma-separated generator names, e.g. "S,Z01,P t". Empty string is ∅.
    pub fn parse(s: &str) -> Result<Self> {
        let s = s.trim();
        if s.is_empty() || s == "∅" {
            return Ok(Self::empty());
        }
        s.split(',')
            .map(|g| {
                VectorFieldId::parse(g)
                    .ok_or_else(|| Error::Invalid(format!("unknown generator '{}'", g.trim())))
            })
            .collect::<Result<Vec<_>>>()
            .map(MultiIndex)
    }

    /// Subsequence picked by a bit mask over positions.
    pub fn subsequence(&self, mask: u32) -> Self {
        Self(self.0.iter().enumerate().filter(|(k, _)| mask >> k & 1 == 1).map(|(_, g)| *g).collect())
    }

    /// All ordered splittings I₁ + I₂ = I (each position goes to exactly one side).
    pub fn splittings(&self) -> Vec<(MultiIndex, MultiIndex)> {
        let k = self.order();
        let full = (1u32 << k) - 1;
        (0..=full).map(|m| (self.subsequence(m), self.subsequence(full ^ m))).collect()
    }

    /// All ordered splittings into `parts` subsequences, as label vectors.
    pub fn labelings(&self, parts: usize) -> Vec<Vec<usize>> {
        let k = self.order();
        let mut out = Vec::new();
        let total = parts.pow(k as u32);
        for mut code in 0..total {
            let mut lab = Vec::with_capacity(k);
            for _ in 0..k {
                lab.push(code % parts);
                code /= parts;
            }
            out.push(lab);
        }
        out
    }

    /// Subsequence with the given label.
    pub fn part(&self, labels: &[usize], which: usize) -> Self {
        Self(self.0.iter().zip(labels).filter(|(_, &l)| l == which).map(|(g, _)| *g).collect())
    }

    /// Every multi-index of length ≤ `max_order`, in length-then-lexicographic order.
    pub fn all_up_to(max_order: usize) -> Vec<MultiIndex> {
        let mut out = vec![MultiIndex::empty()];
        let mut layer = vec![MultiIndex::empty()];
        for _ in 0..max_order {
            let mut next = Vec::with_capacity(layer.len() * 11);
            for m in layer.iter() {
                for g in VectorFieldId::ALL {
                    let mut v = m.0.clone();
                    v.push(g);
                    next.push(MultiIndex(v));
                }
            }
            out.extend(next.iter().cloned());
            layer = next;
        }
        out
    }

    /// Drop the leftmost generator.
    pub fn tail(&self) -> Self {
        Self(self.0[1..].to_vec())
    }
}

impl fmt::Display for MultiIndex {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.0.is_empty() {
            return f.write_str("∅");
        }
        let names: Vec<String> = self.0.iter().map(|g| g.name()).collect();
        f.write_str(&names.join(","))
    }
}

/// Linear combination of generators with integer coefficients.
pub type Combination = Vec<(VectorFieldId, i64)>;

/// Decompose an affine field over the generators.
pub fn decompose(z: &AffineField) -> Result<Combination> {
    let mut out = Vec::new();
    let mut rebuilt = AffineField::ZERO;
    for mu in 0..4 {
        if z.b[mu] != 0 {
            out.push((VectorFieldId::P(mu as u8), z.b[mu]));
        }
    }
    let s = z.a[0][0];
    let push = |id: VectorFieldId, k: i64, out: &mut Combination| {
        if k != 0 {
            out.push((id, k));
        }
    };
    for j in 1..4u8 {
        push(VectorFieldId::Z(0, j), z.a[j as usize][0], &mut out);
    }
    for i in 1..4u8 {
        for j in (i + 1)..4u8 {
            push(VectorFieldId::Z(i, j), z.a[j as usize][i as usize], &mut out);
        }
    }
    push(VectorFieldId::S, s, &mut out);
    for (id, k) in out.iter() {
        rebuilt = rebuilt.add_scaled(&id.affine(), *k);
    }
    if rebuilt != *z {
        return Err(Error::NotInSpan);
    }
    out.sort();
    Ok(out)
}

/// Structure constants: [Z1, Z2] as a combination of generators.
pub fn commutator(z1: VectorFieldId, z2: VectorFieldId) -> Combination {
    decompose(&z1.affine().bracket(&z2.affine())).expect("the generators close under brackets")
}

fn combination_field(c: &Combination) -> AffineField {
    c.iter().fold(AffineField::ZERO, |acc, (id, k)| acc.add_scaled(&id.affine(), *k))
}

/// Jacobi identity [X,[Y,Z]] + [Y,[Z,X]] + [Z,[X,Y]] = 0 through the structure constants.
pub fn jacobi_defect(x: VectorFieldId, y: VectorFieldId, z: VectorFieldId) -> AffineField {
    let br = |a: &AffineField, c: &Combination| a.bracket(&combination_field(c));
    let t1 = br(&x.affine(), &commutator(y, z));
    let t2 = br(&y.affine(), &commutator(z, x));
    let t3 = br(&z.affine(), &commutator(x, y));
    t1.add_scaled(&t2, 1).add_scaled(&t3, 1)
}

/// ∂̸_i in terms of rotations and boosts at a point.
#[derive(Clone, Debug, PartialEq)]
pub struct RestrictedDerivative {
    /// ∂̸_i = Σ_j rot[j] Z_{ij}, with rot[j] = x^j / r² (Z_{ij} = −Z_{ji}).
    pub rotation: Option<[f64; 3]>,
    /// ∂̸_i = Σ_j boost[j] Z_{0j}, with boost[j] = (δ_ij − x̂_i x̂_j)/t.
    pub boost: Option<[f64; 3]>,
}

/// Coefficients of ∂̸_i = ∂_i − (x_i/r)∂_r in terms of Z_{ij} and Z_{0j}.
pub fn restricted_derivative_as_z(i: usize, p: &crate::geometry::Point<f64>) -> Result<RestrictedDerivative> {
    assert!((1..=3).contains(&i), "spatial index 1..3");
    let r = p.r();
    if r == 0.0 {
        return Err(Error::PoleDegenerate);
    }
    if p.t == 0.0 {
        return Err(Error::TimeZero);
    }
    let x = p.x;
    let rot = [x[0] / (r * r), x[1] / (r * r), x[2] / (r * r)];
    let xi = x[i - 1] / r;
    let mut boost = [0.0; 3];
    for j in 0..3 {
        let delta = if j == i - 1 { 1.0 } else { 0.0 };
        boost[j] = (delta - xi * x[j] / r) / p.t;
    }
    Ok(RestrictedDerivative { rotation: Some(rot), boost: Some(boost) })
}

/// Generator Z_{ij} for any ordered pair, with its sign (Z_{ji} = −Z_{ij}).
pub fn z_signed(i: usize, j: usize) -> Option<(VectorFieldId, i64)> {
    use std::cmp::Ordering;
    match i.cmp(&j) {
        Ordering::Less => Some((VectorFieldId::Z(i as u8, j as u8), 1)),
        Ordering::Greater => Some((VectorFieldId::Z(j as u8, i as u8), -1)),
        Ordering::Equal => None,
    }
}

/// ĉ(I): the factor with ℒ_{Z^I} m⁻¹ = ĉ(I) m⁻¹, computed from the Lie
/// derivative itself and cached.
#[derive(Default)]
pub struct CHatTable {
    cache: Mutex<HashMap<MultiIndex, i64>>,
}

impl CHatTable {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn get(&self, i: &MultiIndex) -> Result<i64> {
        if let Some(v) = self.cache.lock().expect("cache lock").get(i) {
            return Ok(*v);
        }
        let m = PolyField::<i64>::minkowski_inverse();
        let l = lie_multi(i, &m, &());
        let v = proportionality(&l, &m)?;
        self.cache.lock().expect("cache lock").insert(i.clone(), v);
        Ok(v)
    }
}

/// c with a = c·b exactly, for constant rank-2 fields.
fn proportionality(a: &PolyField<i64>, b: &PolyField<i64>) -> Result<i64> {
    let mut factor: Option<i64> = None;
    for (pa, pb) in a.components().iter().zip(b.components()) {
        if pb.is_zero() {
            if !pa.is_zero() {
                return Err(Error::NotProportional("support differs".into()));
            }
            continue;
        }
        if pb.degree() != Some(0) || pa.degree().unwrap_or(0) != 0 {
            return Err(Error::NotProportional("non-constant component".into()));
        }
        let cb = pb.coeff(&[0; 4]);
        let ca = pa.coeff(&[0; 4]);
        if ca % cb != 0 {
            return Err(Error::NotProportional("non-integer ratio".into()));
        }
        let f = ca / cb;
        match factor {
            None => factor = Some(f),
            Some(g) if g != f => return Err(Error::NotProportional(format!("{g} vs {f}"))),
            _ => {}
        }
    }
    Ok(factor.unwrap_or(0))
}

#[cfg(test)]
mod tests {
    use super::*;

    type PF = PolyField<f64>;

    fn p(mu: usize) -> Poly<f64> {
        Poly::var(mu)
    }

    #[test]
    fn generator_components() {
        let s = as_field::<f64>(VectorFieldId::S);
        for mu in 0..4 {
            assert_eq!(s.get(&[mu], 0), &p(mu));
        }
        let z12 = as_field::<f64>(VectorFieldId::Z(1, 2));
        assert!(z12.get(&[0], 0).is_zero());
        assert_eq!(z12.get(&[1], 0), &p(2));
        assert_eq!(z12.get(&[2], 0), &p(2 - 1).scale_i(-1));
        let z01 = as_field::<f64>(VectorFieldId::Z(0, 1));
        assert_eq!(z01.get(&[0], 0), &p(1));
        assert_eq!(z01.get(&[1], 0), &p(0));
    }

    #[test]
    fn lie_of_metric() {
        let m = PF::minkowski();
        assert_eq!(lie_derivative(VectorFieldId::S, &m, &()), m.scale_i(2));
        assert!(lie_derivative(VectorFieldId::Z(1, 2), &m, &()).is_zero());
        assert!(lie_derivative(VectorFieldId::Z(0, 3), &m, &()).is_zero());
    }

    #[test]
    fn lie_multi_scaling() {
        let f = PF::scalar(p(0) * p(1));
        let i = MultiIndex(vec![VectorFieldId::S, VectorFieldId::S]);
        assert_eq!(lie_multi(&i, &f, &()), f.scale_i(4));
        assert_eq!(lie_multi(&MultiIndex::empty(), &f, &()), f);
    }

    #[test]
    fn c_hat_values() {
        let tab = CHatTable::new();
        assert_eq!(tab.get(&MultiIndex::empty()).unwrap(), 1);
        assert_eq!(tab.get(&MultiIndex(vec![VectorFieldId::S])).unwrap(), -2);
        assert_eq!(tab.get(&MultiIndex(vec![VectorFieldId::S; 2])).unwrap(), 4);
        assert_eq!(tab.get(&MultiIndex(vec![VectorFieldId::Z(0, 2)])).unwrap(), 0);
    }

    #[test]
    fn parse_literals() {
        let i = MultiIndex::parse("S,Z01,P t").unwrap();
        assert_eq!(i.0, vec![VectorFieldId::S, VectorFieldId::Z(0, 1), VectorFieldId::P(0)]);
        assert_eq!(MultiIndex::parse(&i.to_string()).unwrap(), i);
        assert!(MultiIndex::parse("Z10").is_err());
        assert_eq!(MultiIndex::parse("").unwrap(), MultiIndex::empty());
    }

    #[test]
    fn splitting_counts() {
        let i = MultiIndex::parse("S,Z01,P t").unwrap();
        assert_eq!(i.splittings().len(), 8);
        assert_eq!(i.labelings(4).len(), 64);
        assert_eq!(MultiIndex::all_up_to(2).len(), 1 + 11 + 121);
    }
}
