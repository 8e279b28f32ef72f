//! Exact expansion of ℒ_{Z^I}(g∂∂Φ) − g∂∂(ℒ_{Z^I}Φ) on polynomial fields.
//!
//! The coordinate form is compared exactly. The H-contractions are then
//! rewritten in the null frame and compared pointwise after contraction of
//! the free index with a frame vector U.

use std::collections::HashMap;
use std::sync::Arc;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fields::{FieldElem, PolyField, Tensor};
use crate::poly::Poly;
use crate::geometry::{null_frame_at, CoordTensor, Frame, FrameVector, Point, Variance};
use crate::vecfields::{lie_derivative, CHatTable, MultiIndex};

/// Memoized ℒ_{Z^K}T, built by recursion on the tail of K.
pub struct LieCache<E: FieldElem> {
    base: Arc<Tensor<E>>,
    ctx: E::Ctx,
    map: HashMap<MultiIndex, Arc<Tensor<E>>>,
}

impl<E: FieldElem> LieCache<E> {
    pub fn new(base: Tensor<E>, ctx: E::Ctx) -> Self {
        Self { base: Arc::new(base), ctx, map: HashMap::new() }
    }

    pub fn base(&self) -> &Tensor<E> {
        &self.base
    }

    pub fn get(&mut self, k: &MultiIndex) -> Arc<Tensor<E>> {
        if k.is_empty() {
            return self.base.clone();
        }
        if let Some(v) = self.map.get(k) {
            return v.clone();
        }
        let inner = self.get(&k.tail());
        let v = Arc::new(lie_derivative(k.0[0], &inner, &self.ctx));
        self.map.insert(k.clone(), v.clone());
        v
    }
}

/// One group of H-terms sharing the same I₂: Σ ĉ(I₅)ĉ(I₆)(ℒ_{I₄}H)^{λμ}.
#[derive(Clone, Debug)]
pub struct HGroup {
    pub i2: MultiIndex,
    pub coefficient: PolyField<i64>,
}

/// The terms of the expansion for one multi-index.
#[derive(Clone, Debug)]
pub struct Expansion {
    pub i: MultiIndex,
    /// ℒ_{Z^I}(g∂∂Φ) − g∂∂(ℒ_{Z^I}Φ), computed directly.
    pub lhs: PolyField<i64>,
    /// (I₂, ĉ(I₁)) for the flat wave terms.
    pub flat: Vec<(MultiIndex, i64)>,
    pub groups: Vec<HGroup>,
}

type Hessian<T> = [[T; 4]; 4];

/// Exact commutator calculus for one pair (H, Φ). H is a contravariant
/// symmetric rank-2 field and Φ any covariant field of rank ≤ 1.
pub struct CommutatorEngine<'a> {
    h: PolyField<i64>,
    h_low: LieCache<Poly<i64>>,
    phi: LieCache<Poly<i64>>,
    wave_phi: LieCache<Poly<i64>>,
    raised: HashMap<MultiIndex, Arc<PolyField<i64>>>,
    hessians: HashMap<MultiIndex, Arc<Hessian<PolyField<i64>>>>,
    chat: &'a CHatTable,
}

impl<'a> CommutatorEngine<'a> {
    pub fn new(h: PolyField<i64>, phi: PolyField<i64>, chat: &'a CHatTable) -> Result<Self> {
        if h.rank() != 2 || h.variance() != [Variance::Contra; 2] {
            return Err(Error::RankMismatch { expected: 2, got: h.rank() });
        }
        let wave = phi.wave_operator(Some(&h));
        Ok(Self {
            h_low: LieCache::new(h.lowered(), ()),
            h,
            phi: LieCache::new(phi, ()),
            wave_phi: LieCache::new(wave, ()),
            raised: HashMap::new(),
            hessians: HashMap::new(),
            chat,
        })
    }

    pub fn h(&self) -> &PolyField<i64> {
        &self.h
    }

    pub fn phi(&mut self, k: &MultiIndex) -> Arc<PolyField<i64>> {
        self.phi.get(k)
    }

    /// ∂_λ∂_μ ℒ_{Z^K}Φ for all λ, μ.
    fn hessian(&mut self, k: &MultiIndex) -> Arc<Hessian<PolyField<i64>>> {
        if let Some(v) = self.hessians.get(k) {
            return v.clone();
        }
        let f = self.phi.get(k);
        let d: Vec<PolyField<i64>> = (0..4).map(|a| f.partial(a)).collect();
        let mut hs: Hessian<PolyField<i64>> = std::array::from_fn(|_| std::array::from_fn(|_| f.scale_i(0)));
        for a in 0..4 {
            for b in a..4 {
                let v = d[a].partial(b);
                hs[b][a] = v.clone();
                hs[a][b] = v;
            }
        }
        let v = Arc::new(hs);
        self.hessians.insert(k.clone(), v.clone());
        v
    }

    /// (ℒ_{Z^K}H)^{λμ} := m^{λα}m^{μβ}ℒ_{Z^K}(H_{αβ}).
    pub fn lie_h_raised(&mut self, k: &MultiIndex) -> Arc<PolyField<i64>> {
        if let Some(v) = self.raised.get(k) {
            return v.clone();
        }
        let v = Arc::new(self.h_low.get(k).raised());
        self.raised.insert(k.clone(), v.clone());
        v
    }

    /// m^{λμ}∂_λ∂_μ ℒ_{Z^K}Φ.
    fn flat_wave(&mut self, k: &MultiIndex) -> PolyField<i64> {
        let hs = self.hessian(k);
        hs[1][1].add(&hs[2][2]).add(&hs[3][3]).sub(&hs[0][0])
    }

    /// Σ K^{λμ}∂_λ∂_μ ℒ_{Z^K}Φ for a contravariant coefficient K.
    fn contracted(&mut self, coeff: &PolyField<i64>, k: &MultiIndex) -> PolyField<i64> {
        let hs = self.hessian(k);
        let mut acc = hs[0][0].scale_i(0);
        for a in 0..4 {
            for b in 0..4 {
                let c = coeff.get(&[a, b], 0);
                if !c.is_zero() {
                    acc = acc.add(&hs[a][b].mul_elem(c));
                }
            }
        }
        acc
    }

    /// ℒ_{Z^I}(g∂∂Φ) − g∂∂(ℒ_{Z^I}Φ), computed directly.
    pub fn exact_lhs(&mut self, i: &MultiIndex) -> PolyField<i64> {
        let a = self.wave_phi.get(i);
        let h = self.h.clone();
        let b = self.flat_wave(i).add(&self.contracted(&h, i));
        a.sub(&b)
    }

    /// (I₂, ĉ(I₁)) over I₁+I₂ = I with I₂ ≠ I and ĉ(I₁) ≠ 0.
    pub fn flat_terms(&self, i: &MultiIndex) -> Result<Vec<(MultiIndex, i64)>> {
        let mut out = Vec::new();
        for labels in i.labelings(2) {
            let i1 = i.part(&labels, 0);
            if i1.is_empty() {
                continue;
            }
            let c = self.chat.get(&i1)?;
            if c != 0 {
                out.push((i.part(&labels, 1), c));
            }
        }
        Ok(out)
    }

    /// H-term coefficients grouped by I₂, over all I₂+I₄+I₅+I₆ = I with I₂ ≠ I.
    pub fn h_groups(&mut self, i: &MultiIndex) -> Result<Vec<HGroup>> {
        let mut groups: HashMap<Vec<bool>, HGroup> = HashMap::new();
        for labels in i.labelings(4) {
            // labels: 0 → I₂, 1 → I₄, 2 → I₅, 3 → I₆
            if labels.iter().all(|&l| l == 0) {
                continue;
            }
            let c5 = self.chat.get(&i.part(&labels, 2))?;
            if c5 == 0 {
                continue;
            }
            let c6 = self.chat.get(&i.part(&labels, 3))?;
            if c6 == 0 {
                continue;
            }
            let term = self.lie_h_raised(&i.part(&labels, 1)).scale_i(c5 * c6);
            let key: Vec<bool> = labels.iter().map(|&l| l == 0).collect();
            let i2 = i.part(&labels, 0);
            groups
                .entry(key)
                .and_modify(|g| g.coefficient = g.coefficient.add(&term))
                .or_insert(HGroup { i2, coefficient: term });
        }
        let mut v: Vec<HGroup> = groups.into_values().filter(|g| !g.coefficient.is_zero()).collect();
        v.sort_by(|a, b| a.i2.cmp(&b.i2));
        Ok(v)
    }

    pub fn expansion(&mut self, i: &MultiIndex) -> Result<Expansion> {
        Ok(Expansion { i: i.clone(), lhs: self.exact_lhs(i), flat: self.flat_terms(i)?, groups: self.h_groups(i)? })
    }

    /// Right side of the expansion in coordinates.
    pub fn identity_rhs(&mut self, i: &MultiIndex) -> Result<PolyField<i64>> {
        let e = self.expansion(i)?;
        Ok(self.rhs_of(&e))
    }

    pub fn rhs_of(&mut self, e: &Expansion) -> PolyField<i64> {
        let mut acc = e.lhs.scale_i(0);
        for (i2, c) in &e.flat {
            acc = acc.add(&self.flat_wave(i2).scale_i(*c));
        }
        for g in &e.groups {
            acc = acc.add(&self.contracted(&g.coefficient, &g.i2));
        }
        acc
    }

    /// Pointwise check of the null-frame form, contracted with every U ∈ 𝒰
    /// (or directly for scalars). Returns the largest relative defect.
    pub fn null_frame_residual(&mut self, e: &Expansion, p: [f64; 4]) -> Result<f64> {
        let frame = null_frame_at(&Point::from_coords(p))?;
        let rank = e.lhs.rank();
        let channels = e.lhs.channels();
        let lhs_vals = e.lhs.to_f64().eval(&p);
        // ∂∂ of every ℒ_{I₂}Φ that occurs, as numbers
        let mut dd: HashMap<MultiIndex, Hessian<CoordTensor<f64>>> = HashMap::new();
        for i2 in e.flat.iter().map(|f| &f.0).chain(e.groups.iter().map(|g| &g.i2)) {
            if !dd.contains_key(i2) {
                let hs = self.hessian(i2);
                dd.insert(i2.clone(), std::array::from_fn(|a| std::array::from_fn(|b| hs[a][b].to_f64().eval(&p))));
            }
        }
        let coeffs: Vec<CoordTensor<f64>> = e.groups.iter().map(|g| g.coefficient.lowered().to_f64().eval(&p)).collect();
        let us: Vec<Option<FrameVector>> =
            if rank == 0 { vec![None] } else { FrameVector::FULL.iter().map(|&u| Some(u)).collect() };
        let mut worst: f64 = 0.0;
        for u in us {
            let contract = |t: &CoordTensor<f64>, c: usize| -> f64 {
                match u {
                    None => t.get(&[], c),
                    Some(u) => {
                        let uv = frame.vector(u);
                        (0..4).map(|nu| t.get(&[nu], c) * uv[nu]).sum()
                    }
                }
            };
            for c in 0..channels {
                let l = contract(&lhs_vals, c);
                let mut r = 0.0;
                let mut scale = l.abs();
                for (i2, k) in &e.flat {
                    let h = &dd[i2];
                    let w = contract(&h[1][1], c) + contract(&h[2][2], c) + contract(&h[3][3], c) - contract(&h[0][0], c);
                    let v = *k as f64 * w;
                    r += v;
                    scale = scale.max(v.abs());
                }
                for (g, k_low) in e.groups.iter().zip(&coeffs) {
                    let h = &dd[&g.i2];
                    let d: [[f64; 4]; 4] = std::array::from_fn(|a| std::array::from_fn(|b| contract(&h[a][b], c)));
                    let hl = |a: usize, b: usize| k_low.get(&[a, b], 0);
                    for t in null_frame_terms(&hl, &d, &frame) {
                        r += t;
                        scale = scale.max(t.abs());
                    }
                }
                let diff = (l - r).abs();
                worst = worst.max(if scale > 0.0 { diff / scale } else { diff });
            }
        }
        Ok(worst)
    }
}

fn pair(m: &[[f64; 4]; 4], v: &[f64; 4], w: &[f64; 4]) -> f64 {
    let mut s = 0.0;
    for a in 0..4 {
        for b in 0..4 {
            s += v[a] * w[b] * m[a][b];
        }
    }
    s
}

/// The five null-frame terms replacing K^{λμ}D_{λμ}, given K lowered.
pub fn null_frame_terms(hl: &dyn Fn(usize, usize) -> f64, d: &[[f64; 4]; 4], frame: &Frame<f64>) -> [f64; 5] {
    let mut h = [[0.0; 4]; 4];
    for a in 0..4 {
        for b in 0..4 {
            h[a][b] = hl(a, b);
        }
    }
    let l = frame.vector(FrameVector::L);
    let lb = frame.vector(FrameVector::Lbar);
    let es = [frame.vector(FrameVector::E1), frame.vector(FrameVector::E2)];
    let eta = [-1.0, 1.0, 1.0, 1.0];
    // m^{μβ} X_β Y_μ for X_β = V^α h_{αβ}, Y_μ = W^λ D_{λμ}
    let contracted = |v: &[f64; 4], w: &[f64; 4]| -> f64 {
        let mut s = 0.0;
        for mu in 0..4 {
            let x: f64 = (0..4).map(|a| v[a] * h[a][mu]).sum();
            let y: f64 = (0..4).map(|lam| w[lam] * d[lam][mu]).sum();
            s += eta[mu] * x * y;
        }
        s
    };
    let t1 = 0.25 * pair(&h, l, l) * pair(d, lb, lb);
    let t2 = 0.25 * pair(&h, l, lb) * pair(d, lb, l);
    let t3 = -0.5 * es.iter().map(|e| pair(&h, l, e) * pair(d, lb, e)).sum::<f64>();
    let t4 = -0.5 * contracted(lb, l);
    let t5 = es.iter().map(|e| contracted(e, e)).sum::<f64>();
    [t1, t2, t3, t4, t5]
}

/// Summary of the exact identity over a set of multi-indices.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct IdentitySummary {
    pub pairs: usize,
    pub indices: usize,
    /// Multi-indices where the coordinate form failed to match exactly.
    pub exact_failures: Vec<String>,
    /// Largest relative pointwise defect of the null-frame form.
    pub max_relative_residual: f64,
}

/// Random test pair: H of degree ≤ `deg_h`, Φ covariant rank 1 of degree ≤ `deg_phi`.
pub fn random_pair<R: Rng + ?Sized>(rng: &mut R, deg_h: usize, deg_phi: usize, amp: i64) -> (PolyField<i64>, PolyField<i64>) {
    let h = PolyField::<i64>::random(rng, 2, &[Variance::Contra; 2], 1, deg_h, amp, true);
    let phi = PolyField::<i64>::random(rng, 1, &[Variance::Co], 1, deg_phi, amp, false);
    (h, phi)
}

/// Check the identity for one pair over the given multi-indices and points.
pub fn check_pair(
    h: PolyField<i64>,
    phi: PolyField<i64>,
    indices: &[MultiIndex],
    points: &[[f64; 4]],
    chat: &CHatTable,
) -> Result<IdentitySummary> {
    let mut eng = CommutatorEngine::new(h, phi, chat)?;
    let mut s = IdentitySummary { pairs: 1, indices: indices.len(), ..Default::default() };
    for i in indices {
        let e = eng.expansion(i)?;
        if !e.lhs.sub(&eng.rhs_of(&e)).is_zero() {
            s.exact_failures.push(i.to_string());
        }
        for p in points {
            s.max_relative_residual = s.max_relative_residual.max(eng.null_frame_residual(&e, *p)?);
        }
    }
    Ok(s)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::vecfields::VectorFieldId;
    use rand::SeedableRng;

    #[test]
    fn empty_index_gives_zero() {
        let chat = CHatTable::new();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(1);
        let (h, phi) = random_pair(&mut rng, 2, 3, 3);
        let mut e = CommutatorEngine::new(h, phi, &chat).unwrap();
        assert!(e.exact_lhs(&MultiIndex::empty()).is_zero());
        assert!(e.identity_rhs(&MultiIndex::empty()).unwrap().is_zero());
    }

    #[test]
    fn killing_fields_commute_with_flat_wave() {
        let chat = CHatTable::new();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(2);
        let (_, phi) = random_pair(&mut rng, 2, 3, 3);
        let h = PolyField::<i64>::zeros(2, &[Variance::Contra; 2], 1);
        let mut e = CommutatorEngine::new(h, phi, &chat).unwrap();
        let i = MultiIndex(vec![VectorFieldId::Z(0, 1), VectorFieldId::P(2), VectorFieldId::Z(1, 3)]);
        assert!(e.exact_lhs(&i).is_zero());
        assert!(e.identity_rhs(&i).unwrap().is_zero());
    }

    #[test]
    fn scaling_on_t2x1() {
        // Φ = t²x¹, H = 0, I = (S): ℒ_S(m∂∂Φ) − m∂∂(ℒ_SΦ) = −2·m∂∂Φ = 4x¹
        let chat = CHatTable::new();
        let phi = PolyField::scalar(Poly::<i64>::from_terms(&[([2, 1, 0, 0], 1)]));
        let h = PolyField::<i64>::zeros(2, &[Variance::Contra; 2], 1);
        let mut e = CommutatorEngine::new(h, phi, &chat).unwrap();
        let i = MultiIndex(vec![VectorFieldId::S]);
        let expected = PolyField::scalar(Poly::<i64>::var(1).scale_i(4));
        assert_eq!(e.exact_lhs(&i), expected);
        assert_eq!(e.identity_rhs(&i).unwrap(), expected);
    }

    #[test]
    fn double_scaling_coefficient() {
        // ℒ_Sℒ_S m⁻¹ = 4 m⁻¹
        let chat = CHatTable::new();
        assert_eq!(chat.get(&MultiIndex(vec![VectorFieldId::S, VectorFieldId::S])).unwrap(), 4);
    }

    #[test]
    fn small_random_identity() {
        let chat = CHatTable::new();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        let (h, phi) = random_pair(&mut rng, 2, 3, 3);
        let idx = MultiIndex::all_up_to(2);
        let s = check_pair(h, phi, &idx, &[[0.7, 0.3, -0.5, 0.9]], &chat).unwrap();
        assert!(s.exact_failures.is_empty(), "{:?}", s.exact_failures);
        assert!(s.max_relative_residual < 1e-12, "{}", s.max_relative_residual);
    }
}
