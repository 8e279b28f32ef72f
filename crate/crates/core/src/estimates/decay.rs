//! Measured constants for the two weighted decay inequalities
//! (1+|q|)|∂ℒ_IΦ| ≲ Σ_{|J|≤|I|+1}|ℒ_JΦ| and (1+t+|q|)|∇̸ℒ_IΦ| ≲ Σ_{|J|≤|I|+1}|ℒ_JΦ|.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimates::commutator::LieCache;
use crate::estimates::family::JetSource;
use crate::geometry::{null_frame_at, FrameVector, Point};
use crate::vecfields::{MultiIndex, VectorFieldId};

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct DecayConstants {
    /// sup (1+|q|)|∂ℒ_IΦ| / Σ|ℒ_JΦ|
    pub transversal: f64,
    /// sup (1+t+|q|)|∇̸ℒ_IΦ| / Σ|ℒ_JΦ|
    pub tangential: f64,
    pub samples: usize,
}

impl DecayConstants {
    fn merge(self, o: Self) -> Self {
        Self {
            transversal: self.transversal.max(o.transversal),
            tangential: self.tangential.max(o.tangential),
            samples: self.samples + o.samples,
        }
    }
}

fn by_length(n: usize) -> Vec<Vec<MultiIndex>> {
    let mut out = vec![vec![MultiIndex::empty()]];
    for l in 1..=n {
        let next = out[l - 1]
            .iter()
            .flat_map(|k| {
                VectorFieldId::ALL.iter().map(move |z| {
                    let mut v = vec![*z];
                    v.extend(k.0.iter().copied());
                    MultiIndex(v)
                })
            })
            .collect();
        out.push(next);
    }
    out
}

/// Constants over all |I| ≤ `max_order` at the given points (each needs r > 0).
pub fn decay_constants(phi: &dyn JetSource, max_order: usize, points: &[[f64; 4]]) -> Result<DecayConstants> {
    if points.is_empty() {
        return Err(Error::EmptyRegion);
    }
    let lists = by_length(max_order + 1);
    let per_point: Vec<DecayConstants> = points
        .par_iter()
        .map(|&p| -> Result<DecayConstants> {
            let frame = null_frame_at(&Point::at(p[0], [p[1], p[2], p[3]]))?;
            let mut cache = LieCache::new(phi.jets(p, max_order + 1), p);
            let mut sums = vec![0.0; max_order + 2];
            for (l, ks) in lists.iter().enumerate() {
                for k in ks {
                    sums[l] += cache.get(k).value_norm();
                }
            }
            let t = p[0];
            let q = (p[1] * p[1] + p[2] * p[2] + p[3] * p[3]).sqrt() - t;
            let mut out = DecayConstants { samples: 1, ..Default::default() };
            for (l, ks) in lists.iter().enumerate().take(max_order + 1) {
                let rhs: f64 = sums[..=l + 1].iter().sum();
                if rhs <= 0.0 {
                    continue;
                }
                for k in ks {
                    let f = cache.get(k);
                    let grad = f.gradient_norm();
                    let mut tan2 = 0.0;
                    for c in f.components() {
                        for v in FrameVector::TANGENTIAL {
                            let u = frame.vector(v);
                            let d: f64 = (0..4).map(|mu| u[mu] * c.d1(mu)).sum();
                            tan2 += d * d;
                        }
                    }
                    out.transversal = out.transversal.max((1.0 + q.abs()) * grad / rhs);
                    out.tangential = out.tangential.max((1.0 + t + q.abs()) * tan2.sqrt() / rhs);
                }
            }
            Ok(out)
        })
        .collect::<Result<_>>()?;
    Ok(per_point.into_iter().fold(DecayConstants::default(), DecayConstants::merge))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::estimates::family::{decay_lattice, Enveloped};
    use crate::geometry::Variance;
    use rand::SeedableRng;

    #[test]
    fn constants_are_moderate() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(9);
        let phi = Enveloped::random(&mut rng, 1, &[Variance::Co], 2, 1.0, 2.0, false);
        let c = decay_constants(&phi, 1, &decay_lattice(3)).unwrap();
        assert!(c.transversal > 0.0 && c.transversal < 10.0, "{c:?}");
        assert!(c.tangential > 0.0 && c.tangential < 10.0, "{c:?}");
    }
}
