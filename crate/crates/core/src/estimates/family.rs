//! Smooth test fields for the inequality checks: random polynomials times a
//! spatial Gaussian, evaluated as jets at sample points.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::fields::{JetField, PolyField, Tensor};
use crate::geometry::{null_frame_at, FrameVector, Point, Variance};
use crate::jet::Jet;
use crate::scalar::Scalar;

/// Anything that can produce a jet expansion of a tensor field at a point.
pub trait JetSource: Sync {
    fn jets(&self, p: [f64; 4], order: usize) -> JetField<f64>;
}

/// amplitude · P(t, x) · exp(−|x|²/σ²) componentwise.
#[derive(Clone, Debug)]
pub struct Enveloped {
    pub field: PolyField<f64>,
    pub amplitude: f64,
    pub sigma: f64,
}

impl Enveloped {
    pub fn new(field: PolyField<f64>, amplitude: f64, sigma: f64) -> Self {
        Self { field, amplitude, sigma }
    }

    /// Random integer polynomial components of degree ≤ `degree`.
    #[allow(clippy::too_many_arguments)]
    pub fn random<R: Rng + ?Sized>(
        rng: &mut R,
        rank: usize,
        variance: &[Variance],
        degree: usize,
        amplitude: f64,
        sigma: f64,
        symmetric: bool,
    ) -> Self {
        let f = PolyField::<i64>::random(rng, rank, variance, 1, degree, 3, symmetric).to_f64();
        Self::new(f, amplitude, sigma)
    }

    fn envelope(&self, p: [f64; 4], order: usize) -> Jet<f64> {
        let x = Jet::coordinates(p, order);
        let r2 = x[1].clone() * x[1].clone() + x[2].clone() * x[2].clone() + x[3].clone() * x[3].clone();
        (r2 * Jet::constant(-1.0 / (self.sigma * self.sigma))).exp() * Jet::constant(self.amplitude)
    }
}

impl JetSource for Enveloped {
    fn jets(&self, p: [f64; 4], order: usize) -> JetField<f64> {
        let env = self.envelope(p, order);
        let comps = self.field.components().iter().map(|c| Jet::from_poly(c, p, order) * env.clone()).collect();
        Tensor::from_jets(self.field.rank(), self.field.variance(), self.field.channels(), comps)
    }
}

/// Seeded (H, Φ) pair: H symmetric contravariant rank 2, Φ a covector.
pub fn enveloped_pair(seed: u64, degree: usize, h_amplitude: f64, phi_amplitude: f64, sigma: f64) -> (Enveloped, Enveloped) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let h = Enveloped::random(&mut rng, 2, &[Variance::Contra; 2], degree, h_amplitude, sigma, true);
    let phi = Enveloped::random(&mut rng, 1, &[Variance::Co], degree, phi_amplitude, sigma, false);
    (h, phi)
}

/// Φ + ψ·θ^{L̄}: changes only the L̄ component of a covector field.
pub struct LbarPerturbed<'a> {
    pub base: &'a dyn JetSource,
    pub psi: &'a dyn JetSource,
}

impl JetSource for LbarPerturbed<'_> {
    fn jets(&self, p: [f64; 4], order: usize) -> JetField<f64> {
        let base = self.base.jets(p, order);
        let psi = self.psi.jets(p, order).components()[0].clone();
        let x = Jet::coordinates(p, order);
        let frame = null_frame_at(&Point::from_coords(x)).expect("perturbation needs r > 0");
        let theta = frame.dual(FrameVector::Lbar);
        let comps = base
            .components()
            .iter()
            .enumerate()
            .map(|(mu, c)| c.clone() + psi.clone() * theta[mu].clone())
            .collect();
        Tensor::from_jets(1, &[Variance::Co], 1, comps)
    }
}

impl<T: JetSource + ?Sized> JetSource for &T {
    fn jets(&self, p: [f64; 4], order: usize) -> JetField<f64> {
        (**self).jets(p, order)
    }
}

/// Points with t ∈ [1, 3] and max(0.5, t − 1) ≤ r ≤ t + 2, on an n-level lattice.
pub fn exterior_lattice(n: usize) -> Vec<[f64; 4]> {
    let n = n.max(2);
    let dirs = sphere_directions(2 * n);
    let mut out = Vec::new();
    for i in 0..n {
        let t = 1.0 + 2.0 * i as f64 / (n - 1) as f64;
        let (r0, r1) = ((t - 1.0).max(0.5), t + 2.0);
        for j in 0..n {
            let r = r0 + (r1 - r0) * j as f64 / (n - 1) as f64;
            for d in &dirs {
                out.push([t, r * d[0], r * d[1], r * d[2]]);
            }
        }
    }
    out
}

/// Points with t ∈ [0, 3], 0.1 ≤ r ≤ 4, kept when t ≥ 1 or r ≥ 1.
pub fn decay_lattice(n: usize) -> Vec<[f64; 4]> {
    let n = n.max(2);
    let dirs = sphere_directions(2 * n);
    let mut out = Vec::new();
    for i in 0..n {
        let t = 3.0 * i as f64 / (n - 1) as f64;
        for j in 0..n {
            let r = 0.1 + 3.9 * j as f64 / (n - 1) as f64;
            if t < 1.0 && r < 1.0 {
                continue;
            }
            for d in &dirs {
                out.push([t, r * d[0], r * d[1], r * d[2]]);
            }
        }
    }
    out
}

/// Fibonacci points on the unit sphere.
pub fn sphere_directions(n: usize) -> Vec<[f64; 3]> {
    let golden = std::f64::consts::PI * (3.0 - 5f64.sqrt());
    (0..n)
        .map(|k| {
            let z = 1.0 - 2.0 * (k as f64 + 0.5) / n as f64;
            let s = (1.0 - z * z).sqrt();
            let a = golden * k as f64;
            [s * a.cos(), s * a.sin(), z]
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;

    #[test]
    fn perturbation_only_moves_lbar_component() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        let phi = Enveloped::random(&mut rng, 1, &[Variance::Co], 2, 1.0, 2.0, false);
        let psi = Enveloped::random(&mut rng, 0, &[], 2, 1.0, 2.0, false);
        let pert = LbarPerturbed { base: &phi, psi: &psi };
        let p = [1.5, 0.4, -1.1, 0.7];
        let x = Jet::coordinates(p, 2);
        let frame = null_frame_at(&Point::from_coords(x)).unwrap();
        let a = phi.jets(p, 2);
        let b = pert.jets(p, 2);
        for v in FrameVector::TANGENTIAL {
            let da = a.contract(&[frame.vector(v).clone()]).unwrap()[0].clone();
            let db = b.contract(&[frame.vector(v).clone()]).unwrap()[0].clone();
            assert!((da.value() - db.value()).abs() < 1e-13);
            assert!((da.d1(2) - db.d1(2)).abs() < 1e-13);
        }
        let da = a.contract(&[frame.lbar.clone()]).unwrap()[0].value();
        let db = b.contract(&[frame.lbar.clone()]).unwrap()[0].value();
        let psi0 = psi.jets(p, 0).components()[0].value();
        assert!((db - da - psi0).abs() < 1e-13);
    }

    #[test]
    fn lattices_respect_regions() {
        for p in exterior_lattice(4) {
            let r = (p[1] * p[1] + p[2] * p[2] + p[3] * p[3]).sqrt();
            assert!(p[0] >= 1.0 && r >= (p[0] - 1.0).max(0.5) - 1e-12);
        }
        for p in decay_lattice(5) {
            let r = (p[1] * p[1] + p[2] * p[2] + p[3] * p[3]).sqrt();
            assert!(p[0] >= 1.0 || r >= 1.0 - 1e-12);
        }
    }
}
