//! The exact-identity suite: every check evaluates both sides of an identity
//! on random exact inputs and reports the largest residual.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::energy::{gradient_decomposition, tt_plus_rt_coordinate, tt_plus_rt_direct, tt_plus_rt_nullframe, StressInput};
use crate::error::Result;
use crate::estimates::commutator::{check_pair, random_pair};
use crate::geometry::{null_frame_at, FrameVector, Point};
use crate::jet::Jet;
use crate::poly::Poly;
use crate::scalar::Scalar;
use crate::vecfields::{jacobi_defect, restricted_derivative_as_z, z_signed, CHatTable, MultiIndex, VectorFieldId};
use crate::weights::{self, WeightParams};
use crate::fields::PolyField;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CheckResult {
    pub id: String,
    pub description: String,
    pub samples: usize,
    pub max_residual: f64,
    pub tolerance: f64,
    pub passed: bool,
}

impl CheckResult {
    fn new(id: &str, description: &str, samples: usize, max_residual: f64, tolerance: f64) -> Self {
        Self {
            id: id.into(),
            description: description.into(),
            samples,
            max_residual,
            tolerance,
            passed: max_residual <= tolerance,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CertificationReport {
    pub seed: u64,
    pub checks: Vec<CheckResult>,
    pub passed: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CertifyOptions {
    /// Random (H, Φ) pairs for the commutator expansion.
    pub commutator_pairs: usize,
    pub commutator_max_order: usize,
    pub frame_samples: usize,
    pub point_samples: usize,
    pub weight_samples: usize,
}

impl Default for CertifyOptions {
    fn default() -> Self {
        Self { commutator_pairs: 50, commutator_max_order: 3, frame_samples: 200, point_samples: 1000, weight_samples: 10_000 }
    }
}

/// Random point with t ∈ ±[0.25, 3] and 0.1 ≤ r ≤ 3.
pub fn random_point<R: Rng + ?Sized>(rng: &mut R) -> [f64; 4] {
    loop {
        let x: [f64; 3] = std::array::from_fn(|_| rng.gen_range(-3.0..3.0));
        let r = (x[0] * x[0] + x[1] * x[1] + x[2] * x[2]).sqrt();
        if !(0.1..=3.0).contains(&r) {
            continue;
        }
        let t = rng.gen_range(0.25..3.0) * if rng.gen::<bool>() { 1.0 } else { -1.0 };
        return [t, x[0], x[1], x[2]];
    }
}

fn rel(a: f64, b: f64, scale: f64) -> f64 {
    (a - b).abs() / scale.max(1.0)
}

fn poly_gradient(f: &Poly<i64>, p: [f64; 4]) -> [f64; 4] {
    let j = Jet::from_poly(f, p, 1);
    std::array::from_fn(|mu| j.d1(mu))
}

/// Σ|∂̸Ψ|² + |∂_rΨ|² = δ^{ij}∂_iΨ∂_jΨ and |(∂t+∂r)Ψ|² + Σ|∂̸Ψ|² = |∂Ψ|² + 2⟨∂tΨ,∂rΨ⟩.
pub fn check_gradient_decomposition<R: Rng + ?Sized>(rng: &mut R, n: usize) -> Result<CheckResult> {
    let mut worst: f64 = 0.0;
    for _ in 0..n {
        let f = PolyField::<i64>::random(rng, 0, &[], 2, 3, 4, false);
        let p = random_point(rng);
        let grad: Vec<[f64; 4]> = f.components().iter().map(|c| poly_gradient(c, p)).collect();
        let d = gradient_decomposition(&grad, &[p[1], p[2], p[3]])?;
        worst = worst.max(rel(d.spatial, d.restricted_plus_radial, d.spatial));
        worst = worst.max(rel(d.null_plus_restricted, d.full_plus_cross, d.full_plus_cross.abs()));
    }
    Ok(CheckResult::new("gradient_decomposition", "spatial and null-plus-restricted gradient splittings", n, worst, 1e-12))
}

/// T_tt + T_rt: direct contraction, coordinate form and null-frame form agree.
pub fn check_null_frame_rewriting<R: Rng + ?Sized>(rng: &mut R, n: usize) -> Result<CheckResult> {
    let mut worst: f64 = 0.0;
    for _ in 0..n {
        // dyadic entries, |H| kept below 1/3
        let mut h = [[0.0; 4]; 4];
        for a in 0..4 {
            for b in a..4 {
                let v = rng.gen_range(-8..=8) as f64 / 128.0;
                h[a][b] = v;
                h[b][a] = v;
            }
        }
        let grad: Vec<[f64; 4]> =
            (0..2).map(|_| std::array::from_fn(|_| rng.gen_range(-16..=16) as f64 / 8.0)).collect();
        let p = random_point(rng);
        let x = [p[1], p[2], p[3]];
        let input = StressInput::new(h, grad);
        let direct = tt_plus_rt_direct(&input, &x)?;
        let coord = tt_plus_rt_coordinate(&input, &x)?;
        let frame = tt_plus_rt_nullframe(&input, &Point::from_coords(p))?;
        let scale = direct.abs().max(input.grad_sq());
        worst = worst.max(rel(direct, coord, scale)).max(rel(direct, frame, scale));
    }
    Ok(CheckResult::new("null_frame_rewriting", "T_tt + T_rt in coordinate and null-frame form", n, worst, 1e-12))
}

/// ∂̸_i f = Σ_j (x^j/r²) Z_{ij} f = Σ_j ((δ_ij − x̂_i x̂_j)/t) Z_{0j} f.
pub fn check_restricted_as_z<R: Rng + ?Sized>(rng: &mut R, n: usize) -> Result<CheckResult> {
    let mut worst: f64 = 0.0;
    for _ in 0..n {
        let f = Poly::<i64>::random_int(rng, 3, 4, 0.6);
        let p = random_point(rng);
        let g = poly_gradient(&f, p);
        let point = Point::from_coords(p);
        let r = point.r();
        let xhat = [p[1] / r, p[2] / r, p[3] / r];
        let dr: f64 = (0..3).map(|k| xhat[k] * g[k + 1]).sum();
        let zf = |id: VectorFieldId| -> f64 {
            let z = id.affine().at(&p);
            (0..4).map(|mu| z[mu] * g[mu]).sum()
        };
        let scale = g.iter().map(|v| v.abs()).fold(0.0, f64::max);
        for i in 1..=3 {
            let direct = g[i] - xhat[i - 1] * dr;
            let c = restricted_derivative_as_z(i, &point)?;
            let rot = c.rotation.expect("r > 0");
            let boost = c.boost.expect("t ≠ 0");
            let mut via_rot = 0.0;
            let mut via_boost = 0.0;
            for j in 1..=3 {
                if let Some((id, s)) = z_signed(i, j) {
                    via_rot += rot[j - 1] * s as f64 * zf(id);
                }
                via_boost += boost[j - 1] * zf(VectorFieldId::Z(0, j as u8));
            }
            worst = worst.max(rel(direct, via_rot, scale)).max(rel(direct, via_boost, scale));
        }
    }
    Ok(CheckResult::new("restricted_derivative_as_z", "restricted partials through rotations and boosts", n, worst, 1e-10))
}

/// L̄(x^j/r) = 0, differentiating the jet of x^j/r.
pub fn check_lbar_of_xhat<R: Rng + ?Sized>(rng: &mut R, n: usize) -> Result<CheckResult> {
    let mut worst: f64 = 0.0;
    for _ in 0..n {
        let p = random_point(rng);
        let x = Jet::coordinates(p, 1);
        let r = (x[1].clone() * x[1].clone() + x[2].clone() * x[2].clone() + x[3].clone() * x[3].clone()).sqrt();
        let rv = r.value();
        for j in 1..=3 {
            let xh = x[j].clone() / r.clone();
            let lbar = xh.d1(0) - (0..3).map(|k| p[k + 1] / rv * xh.d1(k + 1)).sum::<f64>();
            worst = worst.max(lbar.abs());
        }
    }
    Ok(CheckResult::new("lbar_of_xhat", "derivative of x^j/r along L̄ vanishes", n, worst, 1e-12))
}

/// e_A f = (1/r) C^{ij}_A Z_{ij} f with C^{ij}_A = e_A^i x^j, and e_A f = (1/t) e_A^j Z_{0j} f.
pub fn check_sphere_frame_as_z<R: Rng + ?Sized>(rng: &mut R, n: usize) -> Result<CheckResult> {
    let mut worst: f64 = 0.0;
    for _ in 0..n {
        let f = Poly::<i64>::random_int(rng, 3, 4, 0.6);
        let p = random_point(rng);
        let g = poly_gradient(&f, p);
        let point = Point::from_coords(p);
        let frame = null_frame_at(&point)?;
        let r = point.r();
        let zf = |id: VectorFieldId| -> f64 {
            let z = id.affine().at(&p);
            (0..4).map(|mu| z[mu] * g[mu]).sum()
        };
        let scale = g.iter().map(|v| v.abs()).fold(0.0, f64::max);
        for a in [FrameVector::E1, FrameVector::E2] {
            let e = frame.vector(a);
            let direct: f64 = (0..4).map(|mu| e[mu] * g[mu]).sum();
            let mut via_rot = 0.0;
            let mut via_boost = 0.0;
            for i in 1..=3 {
                for j in 1..=3 {
                    if let Some((id, s)) = z_signed(i, j) {
                        via_rot += e[i] * p[j] / r * s as f64 * zf(id);
                    }
                }
                via_boost += e[i] * zf(VectorFieldId::Z(0, i as u8));
            }
            worst = worst.max(rel(direct, via_rot / r, scale)).max(rel(direct, via_boost / p[0], scale));
        }
    }
    Ok(CheckResult::new("sphere_frame_as_z", "e_A through rotations over r and boosts over t", n, worst, 1e-10))
}

/// Jacobi identity for all ordered triples of generators.
pub fn check_jacobi() -> CheckResult {
    let mut worst: i64 = 0;
    let mut count = 0;
    for x in VectorFieldId::ALL {
        for y in VectorFieldId::ALL {
            for z in VectorFieldId::ALL {
                let d = jacobi_defect(x, y, z);
                let m = d.b.iter().chain(d.a.iter().flatten()).map(|v| v.abs()).max().unwrap_or(0);
                worst = worst.max(m);
                count += 1;
            }
        }
    }
    CheckResult::new("jacobi", "Jacobi identity of the generator brackets", count, worst as f64, 0.0)
}

/// ŵ′(1+|q|)/ŵ between min and max of (1+2γ, −2μ), and w ≤ w̃ ≤ 2w.
pub fn check_weights<R: Rng + ?Sized>(rng: &mut R, n: usize) -> Result<CheckResult> {
    let gammas = [0.05, 0.25, 0.5, 1.0, 2.0];
    let mus = [-0.05, -0.25, -0.5, -1.0, -2.0];
    let mut worst: f64 = 0.0;
    let per = n.div_ceil(gammas.len() * mus.len());
    let mut count = 0;
    for &g in &gammas {
        for &m in &mus {
            let params = WeightParams::new(g, m)?;
            let (lo, hi) = params.log_slope_bounds();
            for _ in 0..per {
                let q: f64 = rng.gen_range(-50.0..50.0);
                if q == 0.0 {
                    continue;
                }
                let ratio = weights::w_hat_prime(q, &params)? * (1.0 + q.abs()) / weights::w_hat(q, &params);
                let excess = (lo - ratio).max(ratio - hi).max(0.0) / hi;
                let w = weights::w(q, &params);
                let wt = weights::w_tilde(q, &params);
                let excess_w = ((w - wt).max(wt - 2.0 * w)).max(0.0) / w;
                worst = worst.max(excess).max(excess_w);
                count += 1;
            }
        }
    }
    Ok(CheckResult::new("weight_bounds", "log-slope of ŵ and w ≤ w̃ ≤ 2w", count, worst, 1e-12))
}

/// Coordinate and null-frame forms of the commutator expansion on random pairs.
pub fn check_commutator_identity<R: Rng + ?Sized>(rng: &mut R, pairs: usize, max_order: usize) -> Result<CheckResult> {
    let chat = CHatTable::new();
    let indices = MultiIndex::all_up_to(max_order);
    let mut worst: f64 = 0.0;
    for _ in 0..pairs {
        let (h, phi) = random_pair(rng, 2, 3, 3);
        let p = random_point(rng);
        let s = check_pair(h, phi, &indices, &[p], &chat)?;
        if !s.exact_failures.is_empty() {
            worst = f64::INFINITY;
        }
        worst = worst.max(s.max_relative_residual);
    }
    Ok(CheckResult::new(
        "commutator_expansion",
        "commutator expansion, exact in coordinates and pointwise in the null frame",
        pairs * indices.len(),
        worst,
        1e-10,
    ))
}

/// ĉ(S) = −2, ĉ(S,S) = 4, and Killing-only indices give 0.
pub fn check_c_hat() -> Result<CheckResult> {
    let chat = CHatTable::new();
    let s = VectorFieldId::S;
    let cases = [
        (MultiIndex(vec![s]), -2),
        (MultiIndex(vec![s, s]), 4),
        (MultiIndex(vec![VectorFieldId::Z(0, 1), VectorFieldId::P(2)]), 0),
        (MultiIndex::empty(), 1),
    ];
    let mut worst = 0i64;
    for (i, want) in &cases {
        worst = worst.max((chat.get(i)? - want).abs());
    }
    Ok(CheckResult::new("c_hat", "proportionality factors of Lie derivatives of m⁻¹", cases.len(), worst as f64, 0.0))
}

/// Run every check with one seed.
pub fn certify(seed: u64, opts: &CertifyOptions) -> Result<CertificationReport> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let checks = vec![
        check_gradient_decomposition(&mut rng, opts.point_samples)?,
        check_null_frame_rewriting(&mut rng, opts.frame_samples)?,
        check_restricted_as_z(&mut rng, opts.point_samples)?,
        check_lbar_of_xhat(&mut rng, opts.point_samples)?,
        check_sphere_frame_as_z(&mut rng, opts.point_samples)?,
        check_jacobi(),
        check_c_hat()?,
        check_weights(&mut rng, opts.weight_samples)?,
        check_commutator_identity(&mut rng, opts.commutator_pairs, opts.commutator_max_order)?,
    ];
    let passed = checks.iter().all(|c| c.passed);
    Ok(CertificationReport { seed, checks, passed })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::Variance;

    #[test]
    fn small_suite_passes() {
        let opts = CertifyOptions {
            commutator_pairs: 2,
            commutator_max_order: 2,
            frame_samples: 20,
            point_samples: 50,
            weight_samples: 500,
        };
        let r = certify(1, &opts).unwrap();
        for c in &r.checks {
            assert!(c.passed, "{c:?}");
        }
    }

    #[test]
    fn variance_of_random_pair() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let (h, phi) = random_pair(&mut rng, 2, 3, 3);
        assert_eq!(h.variance(), [Variance::Contra; 2]);
        assert_eq!(phi.variance(), [Variance::Co]);
    }
}
