//! The non-symmetric stress tensor of the wave operator, its t-column
//! combinations and divergence, and weighted slice/cone integrals on grids.
//!
//! Ψ is always handled as a list of scalar channels; a tensor field is
//! flattened over (slot, channel) and paired with the Euclidean product.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fields::quadrature::{integrate_uniform, quadrature_slice};
use crate::fields::{ExteriorRegion, Grid, GridField, PolyField, SphericalRule};
use crate::geometry::{matrix_norm, null_frame_at, FrameVector, Perturbation, Point, ETA};
use crate::poly::Poly;
use crate::scalar::{Coeff, Real, Scalar};
use crate::vecfields::MultiIndex;
use crate::weights::{self, WeightKind, WeightParams};

/// Pointwise stress data: H^{μν} and ∂_μΨ for each channel.
#[derive(Clone, Debug, PartialEq)]
pub struct StressInput<T> {
    pub h: [[T; 4]; 4],
    pub grad: Vec<[T; 4]>,
}

impl<T: Real> StressInput<T> {
    pub fn new(h: [[T; 4]; 4], grad: Vec<[T; 4]>) -> Self {
        Self { h, grad }
    }

    pub fn flat(grad: Vec<[T; 4]>) -> Self {
        Self { h: [[T::zero(); 4]; 4], grad }
    }

    /// G_{αβ} = ⟨∂_αΨ, ∂_βΨ⟩.
    pub fn gram(&self) -> [[T; 4]; 4] {
        gram(&self.grad)
    }

    /// g^{μν} = m^{μν} + H^{μν}.
    pub fn g_inv(&self) -> [[T; 4]; 4] {
        let mut g = self.h;
        for (mu, row) in g.iter_mut().enumerate() {
            row[mu] += T::of(ETA[mu]);
        }
        g
    }

    /// Frobenius |H|.
    pub fn h_norm(&self) -> T {
        self.h.iter().flat_map(|r| r.iter()).map(|v| *v * *v).sum::<T>().sqrt()
    }

    /// |H| < 1/3, the smallness hypothesis of the energy estimate.
    pub fn small_perturbation(&self) -> bool {
        self.h_norm() < T::of(1.0 / 3.0)
    }

    /// |∂Ψ|² summed over all slots and channels.
    pub fn grad_sq(&self) -> T {
        self.grad.iter().flat_map(|g| g.iter()).map(|v| *v * *v).sum()
    }
}

pub fn gram<T: Real>(grad: &[[T; 4]]) -> [[T; 4]; 4] {
    let mut g = [[T::zero(); 4]; 4];
    for d in grad {
        for a in 0..4 {
            for b in 0..4 {
                g[a][b] += d[a] * d[b];
            }
        }
    }
    g
}

/// T^μ_ν = g^{μα}G_{αν} − ½ δ^μ_ν g^{αβ}G_{αβ}.
pub fn stress_mixed<T: Real>(input: &StressInput<T>, mu: usize, nu: usize) -> T {
    stress_matrix(input)[mu][nu]
}

/// All components T^μ_ν, indexed `[μ][ν]`.
pub fn stress_matrix<T: Real>(input: &StressInput<T>) -> [[T; 4]; 4] {
    let g = input.g_inv();
    let gr = input.gram();
    let mut trace = T::zero();
    for a in 0..4 {
        for b in 0..4 {
            trace += g[a][b] * gr[a][b];
        }
    }
    let mut out = [[T::zero(); 4]; 4];
    for mu in 0..4 {
        for nu in 0..4 {
            let mut s = T::zero();
            for a in 0..4 {
                s += g[mu][a] * gr[a][nu];
            }
            if mu == nu {
                s -= T::of(0.5) * trace;
            }
            out[mu][nu] = s;
        }
    }
    out
}

/// T_{μν} = m_{μλ}T^λ_ν.
pub fn stress_lowered<T: Real>(input: &StressInput<T>) -> [[T; 4]; 4] {
    let mut t = stress_matrix(input);
    for v in t[0].iter_mut() {
        *v = -*v;
    }
    t
}

fn unit<T: Real>(x: &[T; 3]) -> Result<([T; 3], T)> {
    let r = (x[0] * x[0] + x[1] * x[1] + x[2] * x[2]).sqrt();
    if r == T::zero() {
        return Err(Error::PoleDegenerate);
    }
    Ok(([x[0] / r, x[1] / r, x[2] / r], r))
}

/// T_tt + T_rt from the stress tensor directly: T_tt + x̂^j T_jt.
pub fn tt_plus_rt_direct<T: Real>(input: &StressInput<T>, x: &[T; 3]) -> Result<T> {
    let (n, _) = unit(x)?;
    let t = stress_lowered(input);
    Ok(t[0][0] + n[0] * t[1][0] + n[1] * t[2][0] + n[2] * t[3][0])
}

/// Coordinate form: ½(|(∂t+∂r)Ψ|² + Σ_i|∂̸_iΨ|²) − ½H^{tt}|∂tΨ|² + ½H^{ij}G_ij
/// + H^{rt}|∂tΨ|² + H^{rj}G_jt.
pub fn tt_plus_rt_coordinate<T: Real>(input: &StressInput<T>, x: &[T; 3]) -> Result<T> {
    let (n, _) = unit(x)?;
    let g = input.gram();
    let h = &input.h;
    let half = T::of(0.5);
    let flat = half * tangential_density_unit(&input.grad, &n);
    let mut s = flat - half * h[0][0] * g[0][0];
    for i in 1..4 {
        for j in 1..4 {
            s += half * h[j][i] * g[j][i];
        }
    }
    let mut hrt = T::zero();
    for j in 1..4 {
        hrt += n[j - 1] * h[j][0];
    }
    s += hrt * g[0][0];
    for j in 1..4 {
        let mut hrj = T::zero();
        for i in 1..4 {
            hrj += n[i - 1] * h[i][j];
        }
        s += hrj * g[j][0];
    }
    Ok(s)
}

/// Null-frame form: the same flat part, then −2H^{L̄α}G_{αt} + ½H^{αβ}G_{αβ}
/// where H^{L̄α} = θ^{L̄}_μ H^{μα}.
pub fn tt_plus_rt_nullframe<T: Real + Scalar>(input: &StressInput<T>, p: &Point<T>) -> Result<T> {
    let frame = null_frame_at(p)?;
    let (n, _) = unit(&p.x)?;
    let g = input.gram();
    let h = &input.h;
    let theta = frame.dual(FrameVector::Lbar);
    let mut s = T::of(0.5) * tangential_density_unit(&input.grad, &n);
    for a in 0..4 {
        let mut hla = <T as num_traits::Zero>::zero();
        for mu in 0..4 {
            hla += theta[mu] * h[mu][a];
        }
        s -= T::of(2.0) * hla * g[a][0];
        for b in 0..4 {
            s += T::of(0.5) * h[a][b] * g[a][b];
        }
    }
    Ok(s)
}

/// |(∂t+∂r)Ψ|² + Σ_i|(∂_i − x̂_i∂_r)Ψ|², summed over channels.
fn tangential_density_unit<T: Real>(grad: &[[T; 4]], n: &[T; 3]) -> T {
    let mut s = T::zero();
    for d in grad {
        let dr = n[0] * d[1] + n[1] * d[2] + n[2] * d[3];
        let l = d[0] + dr;
        s += l * l;
        for i in 0..3 {
            let a = d[i + 1] - n[i] * dr;
            s += a * a;
        }
    }
    s
}

/// ½(|(∂t+∂r)Ψ|² + Σ_i|∂̸_iΨ|²), the integrand of the tangential flux.
pub fn tangential_density<T: Real>(grad: &[[T; 4]], x: &[T; 3]) -> Result<T> {
    let (n, _) = unit(x)?;
    Ok(T::of(0.5) * tangential_density_unit(grad, &n))
}

/// |∇̸Ψ| = √(Σ_{U∈{L,e1,e2}} |U^μ∂_μΨ|²) from pointwise gradients.
pub fn tangential_gradient_norm<T: Real + Scalar>(grad: &[[T; 4]], p: &Point<T>) -> Result<T> {
    let f = null_frame_at(p)?;
    let mut s = <T as num_traits::Zero>::zero();
    for v in FrameVector::TANGENTIAL {
        let u = f.vector(v);
        for d in grad {
            let c = u[0] * d[0] + u[1] * d[1] + u[2] * d[2] + u[3] * d[3];
            s += c * c;
        }
    }
    Ok(s.sqrt())
}

/// Both sides of the two gradient-decomposition equalities.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GradientDecomposition<T> {
    /// δ^{ij}G_ij.
    pub spatial: T,
    /// Σ|∂̸Ψ|² + |∂_rΨ|².
    pub restricted_plus_radial: T,
    /// |(∂t+∂r)Ψ|² + Σ|∂̸Ψ|².
    pub null_plus_restricted: T,
    /// |∂Ψ|² + 2⟨∂tΨ, ∂rΨ⟩.
    pub full_plus_cross: T,
}

pub fn gradient_decomposition<T: Real>(grad: &[[T; 4]], x: &[T; 3]) -> Result<GradientDecomposition<T>> {
    let (n, _) = unit(x)?;
    let mut out = GradientDecomposition {
        spatial: T::zero(),
        restricted_plus_radial: T::zero(),
        null_plus_restricted: T::zero(),
        full_plus_cross: T::zero(),
    };
    for d in grad {
        let dr = n[0] * d[1] + n[1] * d[2] + n[2] * d[3];
        let mut restricted = T::zero();
        for i in 0..3 {
            let a = d[i + 1] - n[i] * dr;
            restricted += a * a;
        }
        let spatial = d[1] * d[1] + d[2] * d[2] + d[3] * d[3];
        out.spatial += spatial;
        out.restricted_plus_radial += restricted + dr * dr;
        out.null_plus_restricted += (d[0] + dr) * (d[0] + dr) + restricted;
        out.full_plus_cross += d[0] * d[0] + spatial + T::of(2.0) * d[0] * dr;
    }
    Ok(out)
}

/// ∂^μT_{μν} = ⟨g∂∂Ψ, ∂_νΨ⟩ + (∂_μH^{μα})G_{αν} − ½(∂_νH^{αβ})G_{αβ},
/// with `wave[c]` = g^{αβ}∂_α∂_βΨ_c and `dh[λ][μ][ν]` = ∂_λH^{μν}.
pub fn divergence<T: Real>(input: &StressInput<T>, wave: &[T], dh: &[[[T; 4]; 4]; 4], nu: usize) -> T {
    let g = input.gram();
    let mut s = T::zero();
    for (w, d) in wave.iter().zip(input.grad.iter()) {
        s += *w * d[nu];
    }
    for a in 0..4 {
        let mut div_h = T::zero();
        for mu in 0..4 {
            div_h += dh[mu][mu][a];
        }
        s += div_h * g[a][nu];
        for b in 0..4 {
            s -= T::of(0.5) * dh[nu][a][b] * g[a][b];
        }
    }
    s
}

/// Bounds (λ_min, λ_max) with λ_min|ξ|² ≤ −g^{tt}ξ_t² + g^{ij}ξ_iξ_j ≤ λ_max|ξ|².
pub fn norm_equivalence_bounds(h: &[[f64; 4]; 4]) -> (f64, f64) {
    let mut q = nalgebra::Matrix4::<f64>::zeros();
    q[(0, 0)] = 1.0 - h[0][0];
    for i in 1..4 {
        for j in 1..4 {
            q[(i, j)] = if i == j { 1.0 } else { 0.0 } + 0.5 * (h[i][j] + h[j][i]);
        }
    }
    let e = nalgebra::SymmetricEigen::new(q).eigenvalues;
    (e.min(), e.max())
}

fn psi_grad_polys<C: Coeff>(psi: &PolyField<C>) -> Vec<[Poly<C>; 4]> {
    psi.components()
        .iter()
        .map(|p| [p.deriv(0), p.deriv(1), p.deriv(2), p.deriv(3)])
        .collect()
}

fn g_inv_polys<C: Coeff>(h: Option<&PolyField<C>>) -> [[Poly<C>; 4]; 4] {
    std::array::from_fn(|a| {
        std::array::from_fn(|b| {
            let m = if a == b { Poly::constant(C::from_i64(ETA[a] as i64)) } else { Poly::zero() };
            match h {
                Some(h) => m + h.get(&[a, b], 0).clone(),
                None => m,
            }
        })
    })
}

fn gram_polys<C: Coeff>(d: &[[Poly<C>; 4]]) -> [[Poly<C>; 4]; 4] {
    std::array::from_fn(|a| {
        std::array::from_fn(|b| d.iter().fold(Poly::zero(), |acc, g| acc + &g[a] * &g[b]))
    })
}

/// 2T^μ_ν as exact polynomials (doubling keeps integer coefficients integral).
pub fn stress_mixed_poly_doubled<C: Coeff>(h: Option<&PolyField<C>>, psi: &PolyField<C>) -> [[Poly<C>; 4]; 4] {
    let g = g_inv_polys(h);
    let gr = gram_polys(&psi_grad_polys(psi));
    let mut trace = Poly::zero();
    for a in 0..4 {
        for b in 0..4 {
            trace = trace + &g[a][b] * &gr[a][b];
        }
    }
    std::array::from_fn(|mu| {
        std::array::from_fn(|nu| {
            let mut s = Poly::zero();
            for a in 0..4 {
                s = s + &g[mu][a] * &gr[a][nu];
            }
            s = s.scale_i(2);
            if mu == nu {
                s = s - trace.clone();
            }
            s
        })
    })
}

/// Twice the divergence formula, as an exact polynomial.
pub fn divergence_poly_doubled<C: Coeff>(h: Option<&PolyField<C>>, psi: &PolyField<C>, nu: usize) -> Poly<C> {
    let g = g_inv_polys(h);
    let d = psi_grad_polys(psi);
    let gr = gram_polys(&d);
    let mut s = Poly::zero();
    for (c, p) in psi.components().iter().enumerate() {
        let mut wave = Poly::zero();
        for a in 0..4 {
            for b in 0..4 {
                wave = wave + &g[a][b] * &p.deriv(a).deriv(b);
            }
        }
        s = s + (&wave * &d[c][nu]).scale_i(2);
    }
    if let Some(h) = h {
        for a in 0..4 {
            let mut div_h = Poly::zero();
            for mu in 0..4 {
                div_h = div_h + h.get(&[mu, a], 0).deriv(mu);
            }
            s = s + (&div_h * &gr[a][nu]).scale_i(2);
            for b in 0..4 {
                s = s - &h.get(&[a, b], 0).deriv(nu) * &gr[a][b];
            }
        }
    }
    s
}

/// Gradient and wave-operator arrays of Ψ on one slice, flattened over channels.
#[derive(Clone, Debug)]
pub struct SliceFields {
    pub grid: Grid,
    pub t: f64,
    /// `grad[c][μ]`: nodal ∂_μΨ_c.
    pub grad: Vec<[Vec<f64>; 4]>,
    /// `wave[c]`: nodal g^{αβ}∂_α∂_βΨ_c.
    pub wave: Vec<Vec<f64>>,
}

/// Which field a slice carries: ℒ_{Z^I}Φ, optionally projected on a frame vector.
#[derive(Clone, Debug, PartialEq, Default)]
pub struct ComponentSpec {
    pub index: MultiIndex,
    pub component: Option<FrameVector>,
}

impl SliceFields {
    /// Build from Φ, its time derivative Π, and optionally the source
    /// S = g∂∂Φ. Ghosts of Φ and Π must be valid.
    ///
    /// |I| = 1 needs second time derivatives, taken from the equation; the
    /// wave operator of ℒ_ZΦ is then known only for a flat source-free run.
    pub fn build(
        phi: &GridField<f64>,
        pi: &GridField<f64>,
        source: Option<&GridField<f64>>,
        background: &dyn Perturbation,
        spec: &ComponentSpec,
    ) -> Result<Self> {
        let g = *phi.grid();
        let t = phi.time();
        let rank = phi.rank();
        let nch = phi.channels();
        if spec.component.is_some() && rank != 1 {
            return Err(Error::RankMismatch { expected: 1, got: rank });
        }
        if spec.index.order() > 1 {
            return Err(Error::Unsupported("grid slices support multi-indices of length at most 1".into()));
        }
        let slots = phi.slots();
        // first derivatives: d1[a][μ] for array a
        let dphi: Vec<GridField<f64>> = (1..4).map(|i| phi.partial(i)).collect::<Result<_>>()?;
        let narr = slots * nch;
        let d1 = |a: usize, mu: usize, o: usize| -> f64 {
            if mu == 0 {
                pi.arrays()[a][o]
            } else {
                dphi[mu - 1].arrays()[a][o]
            }
        };
        let src = |a: usize, o: usize| -> f64 { source.map_or(0.0, |s| s.arrays()[a][o]) };
        // Ψ arrays before projection: grad_full[a][μ], wave_full[a]
        let mut grad_full: Vec<[Vec<f64>; 4]> = Vec::with_capacity(narr);
        let mut wave_full: Vec<Vec<f64>> = Vec::with_capacity(narr);
        match spec.index.0.first() {
            None => {
                for a in 0..narr {
                    grad_full.push(std::array::from_fn(|mu| {
                        let mut v = vec![0.0; g.len()];
                        g.for_each_interior(|o, _| v[o] = d1(a, mu, o));
                        v
                    }));
                    let mut w = vec![0.0; g.len()];
                    g.for_each_interior(|o, _| w[o] = src(a, o));
                    wave_full.push(w);
                }
            }
            Some(&z) => {
                if source.is_some() || !background.is_flat() {
                    return Err(Error::Unsupported(
                        "Lie-differentiated slices need a flat, source-free run".into(),
                    ));
                }
                let aff = z.affine();
                let d2: Vec<Vec<GridField<f64>>> = (1..4)
                    .map(|i| (1..4).map(|j| phi.second(i, j)).collect::<Result<Vec<_>>>())
                    .collect::<Result<_>>()?;
                let dpi: Vec<GridField<f64>> = (1..4).map(|i| pi.partial(i)).collect::<Result<_>>()?;
                let second = |a: usize, k: usize, l: usize, o: usize| -> f64 {
                    match (k, l) {
                        // flat equation: ∂t²Φ = ΔΦ
                        (0, 0) => (0..3).map(|i| d2[i][i].arrays()[a][o]).sum(),
                        (0, i) | (i, 0) => dpi[i - 1].arrays()[a][o],
                        (i, j) => d2[i - 1][j - 1].arrays()[a][o],
                    }
                };
                for ch in 0..nch {
                    for s in 0..slots {
                        let a = s * nch + ch;
                        let grad: [Vec<f64>; 4] = std::array::from_fn(|kappa| {
                            let mut v = vec![0.0; g.len()];
                            g.for_each_interior(|o, x| {
                                let coords = [t, x[0], x[1], x[2]];
                                let zv = aff.at(&coords);
                                let mut acc = 0.0;
                                for lam in 0..4 {
                                    acc += aff.a[kappa][lam] as f64 * d1(a, lam, o);
                                    acc += zv[lam] * second(a, kappa, lam, o);
                                }
                                if rank == 1 {
                                    for lam in 0..4 {
                                        let b = lam * nch + ch;
                                        acc += aff.a[s][lam] as f64 * d1(b, kappa, o);
                                    }
                                }
                                v[o] = acc;
                            });
                            v
                        });
                        grad_full.push(grad);
                        wave_full.push(vec![0.0; g.len()]);
                    }
                }
            }
        }
        let (grad, wave) = match spec.component {
            None => (grad_full, wave_full),
            Some(vf) => {
                let mut grad = Vec::with_capacity(nch);
                let mut wave = Vec::with_capacity(nch);
                for ch in 0..nch {
                    let mut gc: [Vec<f64>; 4] = std::array::from_fn(|_| vec![0.0; g.len()]);
                    let mut wc = vec![0.0; g.len()];
                    let mut err = None;
                    g.for_each_interior(|o, x| {
                        let frame = match null_frame_at(&Point::at(t, x)) {
                            Ok(f) => f,
                            Err(e) => {
                                err = Some(e);
                                return;
                            }
                        };
                        let v = frame.vector(vf);
                        for s in 0..4 {
                            let a = s * nch + ch;
                            for mu in 0..4 {
                                gc[mu][o] += grad_full[a][mu][o] * v[s];
                            }
                            wc[o] += wave_full[a][o] * v[s];
                        }
                    });
                    if let Some(e) = err {
                        return Err(e);
                    }
                    grad.push(gc);
                    wave.push(wc);
                }
                (grad, wave)
            }
        };
        Ok(Self { grid: g, t, grad, wave })
    }

    pub fn channels(&self) -> usize {
        self.grad.len()
    }

    fn arrays(&self) -> Vec<&[f64]> {
        let mut v: Vec<&[f64]> = Vec::new();
        for g in &self.grad {
            for a in g {
                v.push(a);
            }
        }
        for w in &self.wave {
            v.push(w);
        }
        v
    }

    /// Nodal |∂Ψ|²·weight(q) as a scalar grid field.
    pub fn weighted_energy_density(&self, params: &WeightParams, kind: WeightKind) -> GridField<f64> {
        let g = self.grid;
        let mut arr = vec![0.0; g.len()];
        g.for_each_interior(|o, x| {
            let r = (x[0] * x[0] + x[1] * x[1] + x[2] * x[2]).sqrt();
            let mut s = 0.0;
            for c in &self.grad {
                for a in c {
                    s += a[o] * a[o];
                }
            }
            arr[o] = s * weights::weight(kind, r - self.t, params);
        });
        GridField::from_arrays(g, 0, 1, self.t, vec![arr]).expect("layout")
    }
}

/// Interpolated data at one quadrature point.
pub struct PointSample<'a> {
    pub t: f64,
    pub x: [f64; 3],
    pub r: f64,
    pub q: f64,
    pub grad: &'a [[f64; 4]],
    pub wave: &'a [f64],
    pub h: [[f64; 4]; 4],
    pub dh: [[[f64; 4]; 4]; 4],
}

impl PointSample<'_> {
    pub fn stress(&self) -> StressInput<f64> {
        StressInput::new(self.h, self.grad.to_vec())
    }
}

/// A slice with its background, ready for integration.
pub struct Slice<'a> {
    pub fields: &'a SliceFields,
    pub background: &'a dyn Perturbation,
    pub rule: SphericalRule,
}

impl<'a> Slice<'a> {
    pub fn new(fields: &'a SliceFields, background: &'a dyn Perturbation) -> Self {
        let g = fields.grid;
        let rule = SphericalRule::for_grid(&g, Self::outer_radius_of(&g));
        Self { fields, background, rule }
    }

    fn outer_radius_of(g: &Grid) -> f64 {
        g.extent - 2.0 * g.dx()
    }

    /// Largest radius whose sphere stays inside the interior nodes.
    pub fn outer_radius(&self) -> f64 {
        Self::outer_radius_of(&self.fields.grid)
    }

    fn sample(&self, x: [f64; 3], vals: &[f64], grad: &mut Vec<[f64; 4]>, f: impl FnOnce(&PointSample<'_>)) {
        let nch = self.fields.channels();
        grad.clear();
        for c in 0..nch {
            grad.push([vals[4 * c], vals[4 * c + 1], vals[4 * c + 2], vals[4 * c + 3]]);
        }
        let wave = &vals[4 * nch..];
        let t = self.fields.t;
        let r = (x[0] * x[0] + x[1] * x[1] + x[2] * x[2]).sqrt();
        let (h, dh) = if self.background.is_flat() {
            ([[0.0; 4]; 4], [[[0.0; 4]; 4]; 4])
        } else {
            (self.background.h_inv(t, x), self.background.dh_inv(t, x))
        };
        let p = PointSample { t, x, r, q: r - t, grad, wave, h, dh };
        f(&p)
    }

    /// ∫ density d³x over the exterior region of this slice, truncated at the
    /// outer radius. Panels break at q = 0 so weight kinks are resolved.
    pub fn integrate(
        &self,
        region: &ExteriorRegion,
        n_out: usize,
        density: impl Fn(&PointSample<'_>, &mut [f64]) + Sync,
    ) -> Result<Vec<f64>> {
        let t = self.fields.t;
        let r_min = region.inner_radius(t);
        let r_max = self.outer_radius();
        if r_min >= r_max {
            return Err(Error::EmptyRegion);
        }
        let arrays = self.fields.arrays();
        let g = self.fields.grid;
        self.rule.shell_map(&g, &arrays, r_min, r_max, &[t], n_out, |x, vals, out| {
            let mut grad = Vec::new();
            self.sample(x, vals, &mut grad, |p| density(p, out));
        })
    }

    /// ∫_{S²} density · r² dω on the sphere of the given radius.
    pub fn integrate_sphere(
        &self,
        radius: f64,
        n_out: usize,
        density: impl Fn(&PointSample<'_>, &mut [f64]) + Sync,
    ) -> Vec<f64> {
        let arrays = self.fields.arrays();
        let g = self.fields.grid;
        let v = self.rule.sphere_map(&g, &arrays, radius, n_out, |x, vals, out| {
            let mut grad = Vec::new();
            self.sample(x, vals, &mut grad, |p| density(p, out));
        });
        v.into_iter().map(|s| s * radius * radius).collect()
    }
}

/// Slice integrals entering the weighted conservation law and the energy estimate.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SliceTerms {
    pub t: f64,
    /// ∫ T_tt w̃.
    pub t_tt_w_tilde: f64,
    /// ∫ (T_tt + T_rt) w̃′.
    pub lt_w_tilde_prime: f64,
    /// ∫ (∂^μT_{μt}) w̃.
    pub div_w_tilde: f64,
    /// ∫ |∂Ψ|² w.
    pub energy_w: f64,
    /// ∫ |∂Ψ|² w̃.
    pub energy_w_tilde: f64,
    /// ∫ ½(|(∂t+∂r)Ψ|² + Σ|∂̸Ψ|²) ŵ′.
    pub tangential_w_hat_prime: f64,
    /// Inner-boundary flux density ∫_{S²} r² T_{Nt} w̃ dω: N = ∂t+∂r on the
    /// cone r = t + q0, or N = ∂r on the origin ball when the cone lies inside it.
    pub boundary: f64,
}

fn weight_prime_or_zero(kind: WeightKind, q: f64, p: &WeightParams) -> f64 {
    // q = 0 is a measure-zero set; panels never put nodes there
    weights::weight_prime(kind, q, p).unwrap_or(0.0)
}

/// Evaluate all slice integrals in one pass.
pub fn slice_terms(slice: &Slice<'_>, region: &ExteriorRegion, params: &WeightParams) -> Result<SliceTerms> {
    let t = slice.fields.t;
    let v = slice.integrate(region, 7, |p, out| {
        let inp = p.stress();
        let tl = stress_lowered(&inp);
        let wt = weights::w_tilde(p.q, params);
        let wtp = weight_prime_or_zero(WeightKind::WTilde, p.q, params);
        let whp = weight_prime_or_zero(WeightKind::WHat, p.q, params);
        let lt = tt_plus_rt_direct(&inp, &p.x).unwrap_or(0.0);
        let g2 = inp.grad_sq();
        out[0] = tl[0][0] * wt;
        out[1] = lt * wtp;
        out[2] = divergence(&inp, p.wave, &p.dh, 0) * wt;
        out[3] = g2 * weights::w(p.q, params);
        out[4] = g2 * wt;
        out[5] = tangential_density(p.grad, &p.x).unwrap_or(0.0) * whp;
        out[6] = 0.0;
    })?;
    let cone_r = t + region.q0;
    let on_cone = cone_r >= region.origin_ball_radius;
    let radius = region.inner_radius(t);
    let boundary = slice.integrate_sphere(radius, 1, |p, out| {
        let inp = p.stress();
        let tl = stress_lowered(&inp);
        let n = [p.x[0] / p.r, p.x[1] / p.r, p.x[2] / p.r];
        let trt = n[0] * tl[1][0] + n[1] * tl[2][0] + n[2] * tl[3][0];
        let tn = if on_cone { tl[0][0] + trt } else { trt };
        out[0] = tn * weights::w_tilde(p.q, params);
    })[0];
    Ok(SliceTerms {
        t,
        t_tt_w_tilde: v[0],
        lt_w_tilde_prime: v[1],
        div_w_tilde: v[2],
        energy_w: v[3],
        energy_w_tilde: v[4],
        tangential_w_hat_prime: v[5],
        boundary,
    })
}

/// ∫|∂Ψ|²·weight(q) over the region by the node-based midpoint rule.
pub fn exterior_energy(
    fields: &SliceFields,
    region: &ExteriorRegion,
    params: &WeightParams,
    kind: WeightKind,
) -> Result<f64> {
    let dens = fields.weighted_energy_density(params, kind);
    quadrature_slice(&dens, region, fields.t)
}

/// Terms of the weighted conservation law over [t1, t2].
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BudgetReport {
    pub t1: f64,
    pub t2: f64,
    /// ∫_{Σ_t1} T_tt w̃.
    pub slice_t1: f64,
    /// ∫_{Σ_t2} T_tt w̃.
    pub slice_t2: f64,
    /// Boundary flux ∫ T_{L̂t} w̃ over the truncated cone.
    pub cone_flux: f64,
    /// ∫∫ (T_tt + T_rt) w̃′.
    pub weight_derivative: f64,
    /// ∫∫ (∂^μT_{μt}) w̃.
    pub divergence: f64,
    /// |slice_t2 + cone_flux − slice_t1 + weight_derivative + divergence|.
    pub residual: f64,
    /// residual / slice_t1.
    pub relative_residual: f64,
}

impl BudgetReport {
    /// (term, value) pairs in a fixed order.
    pub fn rows(&self) -> Vec<(&'static str, f64)> {
        vec![
            ("slice_t1", self.slice_t1),
            ("slice_t2", self.slice_t2),
            ("cone_flux", self.cone_flux),
            ("weight_derivative", self.weight_derivative),
            ("divergence", self.divergence),
            ("residual", self.residual),
            ("relative_residual", self.relative_residual),
        ]
    }
}

/// Slice terms at equally spaced times.
#[derive(Clone, Debug, Default, Serialize, Deserialize)]
pub struct EnergySeries {
    pub terms: Vec<SliceTerms>,
}

impl EnergySeries {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, s: SliceTerms) {
        self.terms.push(s);
    }

    fn locate(&self, t: f64) -> Option<usize> {
        self.terms.iter().position(|s| (s.t - t).abs() < 1e-9 * (1.0 + t.abs()))
    }

    /// Samples from t1 to t2 inclusive, with their spacing.
    pub fn window(&self, t1: f64, t2: f64) -> Result<(&[SliceTerms], f64)> {
        let missing = || Error::HistoryMissing { t1, t2 };
        if !(t2 > t1) {
            return Err(missing());
        }
        let i1 = self.locate(t1).ok_or_else(missing)?;
        let i2 = self.locate(t2).ok_or_else(missing)?;
        if i2 <= i1 {
            return Err(missing());
        }
        let w = &self.terms[i1..=i2];
        let dt = (t2 - t1) / (i2 - i1) as f64;
        for (k, s) in w.iter().enumerate() {
            if (s.t - (t1 + k as f64 * dt)).abs() > 1e-9 * (1.0 + t2.abs()) {
                return Err(missing());
            }
        }
        Ok((w, dt))
    }

    fn time_integral(&self, t1: f64, t2: f64, f: impl Fn(&SliceTerms) -> f64) -> Result<f64> {
        let (w, dt) = self.window(t1, t2)?;
        let v: Vec<f64> = w.iter().map(f).collect();
        Ok(integrate_uniform(&v, dt))
    }

    pub fn at(&self, t: f64) -> Result<&SliceTerms> {
        self.locate(t).map(|i| &self.terms[i]).ok_or(Error::HistoryMissing { t1: t, t2: t })
    }

    /// ∫∫ ½(|(∂t+∂r)Ψ|² + Σ|∂̸Ψ|²) ŵ′ dτ.
    pub fn tangential_flux_integral(&self, t1: f64, t2: f64) -> Result<f64> {
        self.time_integral(t1, t2, |s| s.tangential_w_hat_prime)
    }

    /// ∫ T_{L̂t} w̃ over the boundary between t1 and t2.
    pub fn cone_flux(&self, t1: f64, t2: f64) -> Result<f64> {
        self.time_integral(t1, t2, |s| s.boundary)
    }

    /// Largest step-to-step growth of ∫ T_tt w̃, relative to the earlier value.
    /// Zero or negative for a non-increasing series.
    pub fn max_relative_increase(&self) -> f64 {
        self.terms
            .windows(2)
            .map(|w| {
                let (a, b) = (w[0].t_tt_w_tilde, w[1].t_tt_w_tilde);
                if a == 0.0 && b == 0.0 {
                    0.0
                } else {
                    (b - a) / a.abs().max(f64::MIN_POSITIVE)
                }
            })
            .fold(f64::NEG_INFINITY, f64::max)
            .max(0.0)
    }

    pub fn budget(&self, t1: f64, t2: f64) -> Result<BudgetReport> {
        self.window(t1, t2)?;
        let s1 = self.at(t1)?.t_tt_w_tilde;
        let s2 = self.at(t2)?.t_tt_w_tilde;
        let cone = self.cone_flux(t1, t2)?;
        let wd = self.time_integral(t1, t2, |s| s.lt_w_tilde_prime)?;
        let div = self.time_integral(t1, t2, |s| s.div_w_tilde)?;
        let residual = (s2 + cone - s1 + wd + div).abs();
        Ok(BudgetReport {
            t1,
            t2,
            slice_t1: s1,
            slice_t2: s2,
            cone_flux: cone,
            weight_derivative: wd,
            divergence: div,
            residual,
            relative_residual: residual / s1.abs().max(f64::MIN_POSITIVE),
        })
    }
}

/// Check the smallness flag of a perturbation at a point.
pub fn perturbation_small(bg: &dyn Perturbation, t: f64, x: [f64; 3]) -> bool {
    matrix_norm(&bg.h_inv(t, x)) < 1.0 / 3.0
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn time_derivative_only() {
        let inp = StressInput::flat(vec![[3.0, 0.0, 0.0, 0.0]]);
        assert_eq!(stress_mixed(&inp, 0, 0), -4.5);
        assert_eq!(stress_lowered(&inp)[0][0], 4.5);
        let z = StressInput::flat(vec![[0.0; 4]]);
        assert_eq!(stress_matrix(&z), [[0.0; 4]; 4]);
    }

    #[test]
    fn tt_plus_rt_examples() {
        let x = [0.3, -0.4, 1.2];
        let inp = StressInput::flat(vec![[1.0, 0.0, 0.0, 0.0]]);
        assert!((tt_plus_rt_coordinate::<f64>(&inp, &x).unwrap() - 0.5).abs() < 1e-15);
        // outgoing null profile f(r − t): ∂Ψ = f′(−1, x̂)
        let r = (0.09f64 + 0.16 + 1.44).sqrt();
        let inp = StressInput::flat(vec![[-1.0, x[0] / r, x[1] / r, x[2] / r]]);
        assert!(tt_plus_rt_coordinate(&inp, &x).unwrap().abs() < 1e-15);
        assert_eq!(tt_plus_rt_coordinate(&inp, &[0.0; 3]).unwrap_err(), Error::PoleDegenerate);
    }

    #[test]
    fn norm_bounds_flat() {
        let (lo, hi) = norm_equivalence_bounds(&[[0.0; 4]; 4]);
        assert!((lo - 1.0).abs() < 1e-14 && (hi - 1.0).abs() < 1e-14);
    }

    #[test]
    fn budget_needs_history() {
        let s = EnergySeries::new();
        assert_eq!(s.budget(0.0, 1.0).unwrap_err(), Error::HistoryMissing { t1: 0.0, t2: 1.0 });
    }
}
