//! The decoupled commutator bound, evaluated pointwise from jets.
//!
//! For a frame component Φ_V the exact commutator
//! ℒ_{Z^I}(g∂∂Φ_V) − g∂∂(ℒ_{Z^I}Φ_V) is compared with three term families:
//! lower-order wave terms, H-terms with the good factor (1+t+|q|)⁻¹, and
//! H_LL-terms with the bad factor (1+|q|)⁻¹ that only see frame components
//! from the chosen set.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimates::commutator::LieCache;
use crate::estimates::family::{JetSource, LbarPerturbed};
use crate::fields::{JetField, Tensor};
use crate::geometry::{null_frame_at, Frame, FrameVector, Point};
use crate::jet::Jet;
use crate::vecfields::{lie_multi, MultiIndex, VectorFieldId};

/// Which frame components may appear in the bad-factor terms.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FrameSet {
    /// {L, e1, e2}
    Tangential,
    /// {L̄, L, e1, e2}
    Full,
}

impl FrameSet {
    pub fn vectors(self) -> &'static [FrameVector] {
        match self {
            FrameSet::Tangential => &FrameVector::TANGENTIAL,
            FrameSet::Full => &FrameVector::FULL,
        }
    }

    pub fn contains(self, v: FrameVector) -> bool {
        self.vectors().contains(&v)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Factor {
    One,
    /// (1 + t + |q|)⁻¹
    Good,
    /// (1 + |q|)⁻¹
    Bad,
}

impl Factor {
    pub fn value(self, t: f64, q: f64) -> f64 {
        match self {
            Factor::One => 1.0,
            Factor::Good => 1.0 / (1.0 + t + q.abs()),
            Factor::Bad => 1.0 / (1.0 + q.abs()),
        }
    }
}

/// Quantity a bound term is built from.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Operand {
    /// |ℒ_J H|
    H,
    /// |(ℒ_J H)_LL|
    HLL,
    /// |∂ℒ_K Φ| over all components
    GradPhi,
    /// Σ_{V′} |∂ℒ_K Φ_{V′}| for V′ in the set
    GradPhiComponents(FrameSet),
    /// |g∂∂ℒ_K Φ_V| for |K| < |I|
    WaveComponent,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoundTerm {
    pub id: &'static str,
    pub factor: Factor,
    pub operands: Vec<Operand>,
}

pub const LOWER_ORDER_ID: &str = "lower_order_wave";
pub const GOOD_ID: &str = "good_factor_H_dPhi";
pub const BAD_ID: &str = "bad_factor_HLL_dPhi_frame";

/// The term families of the bound, in evaluation order.
pub fn bound_terms(set: FrameSet) -> Vec<BoundTerm> {
    vec![
        BoundTerm { id: LOWER_ORDER_ID, factor: Factor::One, operands: vec![Operand::WaveComponent] },
        BoundTerm { id: GOOD_ID, factor: Factor::Good, operands: vec![Operand::H, Operand::GradPhi] },
        BoundTerm { id: BAD_ID, factor: Factor::Bad, operands: vec![Operand::HLL, Operand::GradPhiComponents(set)] },
    ]
}

/// True when every bad-factor term only involves H_LL and components in `set`.
pub fn bad_terms_decoupled(terms: &[BoundTerm], set: FrameSet) -> bool {
    terms.iter().filter(|t| t.factor == Factor::Bad).all(|t| {
        t.operands.iter().all(|o| match o {
            Operand::HLL => true,
            Operand::GradPhiComponents(s) => s.vectors().iter().all(|v| set.contains(*v)),
            _ => false,
        })
    })
}

/// Evaluation at one point.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CommutatorSample {
    pub point: [f64; 4],
    pub lhs: f64,
    /// Term family values, in the order of [`bound_terms`].
    pub terms: [f64; 3],
    pub bound: f64,
}

fn generators_upto(n: usize) -> Vec<Vec<MultiIndex>> {
    let mut by_len: Vec<Vec<MultiIndex>> = vec![vec![MultiIndex::empty()]];
    for l in 1..=n {
        let prev = &by_len[l - 1];
        let next = prev
            .iter()
            .flat_map(|k| {
                VectorFieldId::ALL.iter().map(move |z| {
                    let mut v = vec![*z];
                    v.extend(k.0.iter().copied());
                    MultiIndex(v)
                })
            })
            .collect();
        by_len.push(next);
    }
    by_len
}

fn frame_jets(p: [f64; 4], order: usize) -> Result<Frame<Jet<f64>>> {
    null_frame_at(&Point::from_coords(Jet::coordinates(p, order)))
}

fn component(f: &JetField<f64>, v: &[Jet<f64>; 4]) -> Result<JetField<f64>> {
    Ok(Tensor::scalar(f.contract(&[v.clone()])?[0].clone()))
}

fn scalar_value(f: &JetField<f64>) -> f64 {
    f.components()[0].value()
}

/// Lower-order, good and bad term families at `p`, together with the exact left side.
pub fn commutator_at(
    h: &dyn JetSource,
    phi: &dyn JetSource,
    i: &MultiIndex,
    v: FrameVector,
    set: FrameSet,
    p: [f64; 4],
) -> Result<CommutatorSample> {
    if !set.contains(v) {
        return Err(Error::FrameMismatch(format!("{} is not in the tangential set", v.name())));
    }
    let k = i.order();
    let order = k + 2;
    let frame = frame_jets(p, order)?;
    let hj = h.jets(p, order);
    let phij = phi.jets(p, order);
    let wave = |f: &JetField<f64>| f.wave_operator(Some(&hj));

    // exact left side
    let phi_v = component(&phij, frame.vector(v))?;
    let lhs = scalar_value(&lie_multi(i, &wave(&phi_v), &p)) - scalar_value(&wave(&lie_multi(i, &phi_v, &p)));

    let by_len = generators_upto(k);
    let mut phi_cache = LieCache::new(phij.clone(), p);
    let mut phi_v_cache = LieCache::new(phi_v, p);
    let mut h_cache = LieCache::new(hj.clone(), p);
    let mut comp_caches: Vec<LieCache<Jet<f64>>> = set
        .vectors()
        .iter()
        .map(|w| Ok(LieCache::new(component(&phij, frame.vector(*w))?, p)))
        .collect::<Result<_>>()?;
    let l = frame.l.clone();

    let mut lower = 0.0;
    let mut grad_phi = vec![0.0; k + 1];
    let mut grad_comp = vec![0.0; k + 1];
    let mut h_norm = vec![0.0; k + 1];
    let mut hll = vec![0.0; k + 1];
    for (len, ks) in by_len.iter().enumerate() {
        for kk in ks {
            if len < k {
                lower += scalar_value(&wave(&phi_v_cache.get(kk))).abs();
            }
            grad_phi[len] += phi_cache.get(kk).gradient_norm();
            for c in comp_caches.iter_mut() {
                grad_comp[len] += c.get(kk).gradient_norm();
            }
            let lh = h_cache.get(kk);
            h_norm[len] += lh.value_norm();
            hll[len] += lh.contract(&[l.clone(), l.clone()])?[0].value().abs();
        }
    }
    let prefix = |v: &[f64]| -> Vec<f64> {
        v.iter()
            .scan(0.0, |s, x| {
                *s += x;
                Some(*s)
            })
            .collect()
    };
    let h_cum = prefix(&h_norm);
    let hll_cum = prefix(&hll);
    let mut good = 0.0;
    let mut bad = 0.0;
    for len in 0..=k {
        let jmax = k - len.saturating_sub(1);
        good += grad_phi[len] * h_cum[jmax];
        bad += grad_comp[len] * hll_cum[jmax];
    }
    let t = p[0];
    let q = (p[1] * p[1] + p[2] * p[2] + p[3] * p[3]).sqrt() - t;
    let terms = [lower, good * Factor::Good.value(t, q), bad * Factor::Bad.value(t, q)];
    Ok(CommutatorSample { point: p, lhs: lhs.abs(), terms, bound: terms.iter().sum() })
}

/// Supremum of lhs/bound over a point set, with norms of the left side.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoundStudy {
    pub samples: usize,
    pub lhs_sup: f64,
    /// Root mean square of the left side over the samples.
    pub lhs_rms: f64,
    pub bound_sup: f64,
    /// Sup of each term family.
    pub term_sup: [f64; 3],
    pub constant: f64,
}

pub fn measure_bound(
    h: &dyn JetSource,
    phi: &dyn JetSource,
    i: &MultiIndex,
    v: FrameVector,
    set: FrameSet,
    points: &[[f64; 4]],
) -> Result<BoundStudy> {
    if points.is_empty() {
        return Err(Error::EmptyRegion);
    }
    let samples: Vec<CommutatorSample> =
        points.par_iter().map(|p| commutator_at(h, phi, i, v, set, *p)).collect::<Result<_>>()?;
    Ok(summarize(&samples))
}

/// Like [`measure_bound`], then a compass search from the `polish` best
/// lattice points, staying inside `region`.
#[allow(clippy::too_many_arguments)]
pub fn measure_bound_polished(
    h: &dyn JetSource,
    phi: &dyn JetSource,
    i: &MultiIndex,
    v: FrameVector,
    set: FrameSet,
    points: &[[f64; 4]],
    polish: usize,
    region: &(dyn Fn(&[f64; 4]) -> bool + Sync),
) -> Result<BoundStudy> {
    if points.is_empty() {
        return Err(Error::EmptyRegion);
    }
    let mut samples: Vec<CommutatorSample> =
        points.par_iter().map(|p| commutator_at(h, phi, i, v, set, *p)).collect::<Result<_>>()?;
    let floor = 1e-12 * samples.iter().map(|s| s.bound).fold(0.0, f64::max);
    let ratio = |s: &CommutatorSample| if s.bound > floor && s.bound > 0.0 { s.lhs / s.bound } else { 0.0 };
    let mut order: Vec<usize> = (0..samples.len()).collect();
    order.sort_by(|&a, &b| ratio(&samples[b]).total_cmp(&ratio(&samples[a])));
    let starts: Vec<CommutatorSample> = order.iter().take(polish).map(|&k| samples[k].clone()).collect();
    for start in starts {
        let mut best = start;
        let mut step = 0.1;
        while step > 1e-3 {
            let mut moved = false;
            let base = to_polar(&best.point);
            for axis in 0..4 {
                for sign in [-1.0, 1.0] {
                    let mut c = base;
                    c[axis] += sign * step;
                    let p = from_polar(&c);
                    if !region(&p) {
                        continue;
                    }
                    let s = commutator_at(h, phi, i, v, set, p)?;
                    if ratio(&s) > ratio(&best) {
                        best = s;
                        moved = true;
                    }
                }
            }
            if !moved {
                step *= 0.5;
            }
        }
        samples.push(best);
    }
    Ok(summarize(&samples))
}

/// (t, r, θ, φ) from Cartesian coordinates.
fn to_polar(p: &[f64; 4]) -> [f64; 4] {
    let r = (p[1] * p[1] + p[2] * p[2] + p[3] * p[3]).sqrt();
    [p[0], r, (p[3] / r).clamp(-1.0, 1.0).acos(), p[2].atan2(p[1])]
}

fn from_polar(c: &[f64; 4]) -> [f64; 4] {
    let (s, z) = c[2].sin_cos();
    [c[0], c[1] * s * c[3].cos(), c[1] * s * c[3].sin(), c[1] * z]
}

/// The sample region of [`crate::estimates::exterior_lattice`].
pub fn in_exterior_set(p: &[f64; 4]) -> bool {
    let r = (p[1] * p[1] + p[2] * p[2] + p[3] * p[3]).sqrt();
    (1.0..=3.0).contains(&p[0]) && r >= (p[0] - 1.0).max(0.5) && r <= p[0] + 2.0
}

pub fn summarize(samples: &[CommutatorSample]) -> BoundStudy {
    let bound_sup = samples.iter().map(|s| s.bound).fold(0.0, f64::max);
    let floor = 1e-12 * bound_sup;
    let mut constant: f64 = 0.0;
    let mut term_sup = [0.0f64; 3];
    for s in samples {
        if s.bound > floor && s.bound > 0.0 {
            constant = constant.max(s.lhs / s.bound);
        }
        for (a, b) in term_sup.iter_mut().zip(s.terms) {
            *a = a.max(b);
        }
    }
    BoundStudy {
        samples: samples.len(),
        lhs_sup: samples.iter().map(|s| s.lhs).fold(0.0, f64::max),
        lhs_rms: (samples.iter().map(|s| s.lhs * s.lhs).sum::<f64>() / samples.len() as f64).sqrt(),
        bound_sup,
        term_sup,
        constant,
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LhsNorm {
    pub sup: f64,
    /// Root mean square over the sample set.
    pub l2: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TermValue {
    pub id: String,
    pub factor: Factor,
    /// Sup of the term family over the samples.
    pub value: f64,
}

/// Summary of the commutator checks for one (I, V).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct CommutatorReport {
    pub multi_index: String,
    pub component: String,
    pub frame_set: FrameSet,
    pub samples: usize,
    pub lhs_norm: LhsNorm,
    /// Largest relative defect of the exact expansion on polynomial inputs.
    pub identity_residual: f64,
    /// Sup of the bound over the samples.
    pub bound_value: f64,
    /// sup lhs/bound.
    pub implied_constant: f64,
    pub terms: Vec<TermValue>,
}

impl CommutatorReport {
    pub fn new(i: &MultiIndex, v: FrameVector, set: FrameSet, study: &BoundStudy, identity_residual: f64) -> Self {
        let terms = bound_terms(set)
            .iter()
            .zip(study.term_sup)
            .map(|(t, value)| TermValue { id: t.id.to_string(), factor: t.factor, value })
            .collect();
        Self {
            multi_index: i.to_string(),
            component: v.name().to_string(),
            frame_set: set,
            samples: study.samples,
            lhs_norm: LhsNorm { sup: study.lhs_sup, l2: study.lhs_rms },
            identity_residual,
            bound_value: study.bound_sup,
            implied_constant: study.constant,
            terms,
        }
    }
}

/// Largest relative change of the (1+|q|)⁻¹ term family when Φ is replaced
/// by Φ + ψ·θ^{L̄}.
#[allow(clippy::too_many_arguments)]
pub fn lbar_decoupling_defect(
    h: &dyn JetSource,
    phi: &dyn JetSource,
    psi: &dyn JetSource,
    i: &MultiIndex,
    v: FrameVector,
    set: FrameSet,
    points: &[[f64; 4]],
) -> Result<f64> {
    let pert = LbarPerturbed { base: phi, psi };
    let defects: Vec<f64> = points
        .par_iter()
        .map(|p| {
            let a = commutator_at(h, phi, i, v, set, *p)?;
            let b = commutator_at(h, &pert, i, v, set, *p)?;
            Ok((a.terms[2] - b.terms[2]).abs() / a.terms[2].abs().max(f64::MIN_POSITIVE))
        })
        .collect::<Result<_>>()?;
    Ok(defects.into_iter().fold(0.0, f64::max))
}

/// Sup over `points` of |∂Ψ_UV| divided by
/// Σ_{|I|≤1}(1+t+|q|)⁻¹|ℒ_IΨ| + Σ_{U′∈𝒰,V′∈𝒯}Σ_{|I|≤1}(1+|q|)⁻¹|ℒ_I(Ψ_{U′V′})|.
pub fn gradient_frame_bound_check(
    psi: &dyn JetSource,
    u: FrameVector,
    v: FrameVector,
    points: &[[f64; 4]],
) -> Result<f64> {
    if !v.is_tangential() {
        return Err(Error::FrameMismatch(format!("{} is not tangential", v.name())));
    }
    let ratios: Vec<f64> = points
        .par_iter()
        .map(|&p| -> Result<f64> {
            let frame = frame_jets(p, 1)?;
            let psi_j = psi.jets(p, 1);
            if psi_j.rank() != 2 {
                return Err(Error::RankMismatch { expected: 2, got: psi_j.rank() });
            }
            let pair = |a: FrameVector, b: FrameVector| -> Result<JetField<f64>> {
                Ok(Tensor::scalar(psi_j.contract(&[frame.vector(a).clone(), frame.vector(b).clone()])?[0].clone()))
            };
            let lhs = pair(u, v)?.gradient_norm();
            let gens: Vec<MultiIndex> = std::iter::once(MultiIndex::empty())
                .chain(VectorFieldId::ALL.iter().map(|z| MultiIndex(vec![*z])))
                .collect();
            let mut full = 0.0;
            for g in &gens {
                full += lie_multi(g, &psi_j, &p).value_norm();
            }
            let mut comps = 0.0;
            for a in FrameVector::FULL {
                for b in FrameVector::TANGENTIAL {
                    let s = pair(a, b)?;
                    for g in &gens {
                        comps += scalar_value(&lie_multi(g, &s, &p)).abs();
                    }
                }
            }
            let t = p[0];
            let q = (p[1] * p[1] + p[2] * p[2] + p[3] * p[3]).sqrt() - t;
            let rhs = Factor::Good.value(t, q) * full + Factor::Bad.value(t, q) * comps;
            Ok(if rhs > 0.0 { lhs / rhs } else { 0.0 })
        })
        .collect::<Result<_>>()?;
    Ok(ratios.into_iter().fold(0.0, f64::max))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::estimates::family::{exterior_lattice, Enveloped, LbarPerturbed};
    use crate::fields::PolyField;
    use crate::geometry::Variance;
    use rand::SeedableRng;

    fn family(seed: u64) -> (Enveloped, Enveloped) {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let h = Enveloped::random(&mut rng, 2, &[Variance::Contra; 2], 2, 0.05, 2.0, true);
        let phi = Enveloped::random(&mut rng, 1, &[Variance::Co], 2, 1.0, 2.0, false);
        (h, phi)
    }

    #[test]
    fn lbar_rejected_for_tangential_set() {
        let (h, phi) = family(1);
        let i = MultiIndex(vec![VectorFieldId::S]);
        let e = commutator_at(&h, &phi, &i, FrameVector::Lbar, FrameSet::Tangential, [1.0, 1.0, 0.5, 0.2]);
        assert!(matches!(e, Err(Error::FrameMismatch(_))));
        assert!(commutator_at(&h, &phi, &i, FrameVector::Lbar, FrameSet::Full, [1.0, 1.0, 0.5, 0.2]).is_ok());
    }

    #[test]
    fn zero_h_leaves_lower_order_terms() {
        let (_, phi) = family(2);
        let h = Enveloped::new(PolyField::zeros(2, &[Variance::Contra; 2], 1), 0.0, 2.0);
        let i = MultiIndex(vec![VectorFieldId::S, VectorFieldId::Z(0, 1)]);
        let s = commutator_at(&h, &phi, &i, FrameVector::L, FrameSet::Tangential, [1.5, 0.3, 1.2, -0.4]).unwrap();
        assert_eq!(s.terms[1], 0.0);
        assert_eq!(s.terms[2], 0.0);
        // only the ĉ-weighted flat terms survive, and |ĉ| ≤ 4 for |I| ≤ 2
        assert!(s.lhs <= 4.0 * s.terms[0] * (1.0 + 1e-12));
    }

    #[test]
    fn zero_phi_gives_zero() {
        let (h, _) = family(3);
        let phi = Enveloped::new(PolyField::zeros(1, &[Variance::Co], 1), 1.0, 2.0);
        let i = MultiIndex(vec![VectorFieldId::P(1)]);
        let s = commutator_at(&h, &phi, &i, FrameVector::E1, FrameSet::Tangential, [1.2, 0.5, 0.5, 0.5]).unwrap();
        assert_eq!(s.bound, 0.0);
        assert_eq!(s.lhs, 0.0);
    }

    #[test]
    fn term_table_is_decoupled() {
        assert!(bad_terms_decoupled(&bound_terms(FrameSet::Tangential), FrameSet::Tangential));
        assert!(!bad_terms_decoupled(&bound_terms(FrameSet::Full), FrameSet::Tangential));
    }

    #[test]
    fn lbar_perturbation_keeps_bad_family() {
        let (h, phi) = family(4);
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(40);
        let psi = Enveloped::random(&mut rng, 0, &[], 2, 1.0, 2.0, false);
        let pert = LbarPerturbed { base: &phi, psi: &psi };
        let i = MultiIndex(vec![VectorFieldId::Z(0, 2), VectorFieldId::S]);
        for p in exterior_lattice(2).into_iter().take(8) {
            let a = commutator_at(&h, &phi, &i, FrameVector::E2, FrameSet::Tangential, p).unwrap();
            let b = commutator_at(&h, &pert, &i, FrameVector::E2, FrameSet::Tangential, p).unwrap();
            assert!((a.terms[2] - b.terms[2]).abs() <= 1e-12 * a.terms[2].abs().max(1e-300));
            assert!((a.terms[1] - b.terms[1]).abs() > 1e-6 * a.terms[1]);
        }
    }

    #[test]
    fn bound_holds_with_finite_constant() {
        let (h, phi) = family(5);
        let i = MultiIndex(vec![VectorFieldId::S]);
        let st = measure_bound(&h, &phi, &i, FrameVector::L, FrameSet::Tangential, &exterior_lattice(3)).unwrap();
        assert!(st.constant.is_finite() && st.constant > 0.0);
    }

    #[test]
    fn gradient_frame_trivial_cases() {
        let pts = exterior_lattice(2);
        let zero = Enveloped::new(PolyField::zeros(2, &[Variance::Co; 2], 1), 1.0, 2.0);
        assert_eq!(gradient_frame_bound_check(&zero, FrameVector::L, FrameVector::E1, &pts).unwrap(), 0.0);
        // a constant m: amplitude 1, infinite envelope width
        let m = Enveloped::new(PolyField::<i64>::minkowski().to_f64(), 1.0, 1e12);
        let c = gradient_frame_bound_check(&m, FrameVector::Lbar, FrameVector::L, &pts).unwrap();
        assert!(c < 1e-9, "{c}");
    }
}
