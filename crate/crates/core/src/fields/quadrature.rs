//! Slice and volume quadratures over exterior regions of a grid.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::grid::{Grid, GridField, GHOST};
use crate::error::{Error, Result};
use crate::scalar::Real;

/// The part of a constant-t slice with q ≥ q0, minus a ball around the origin.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExteriorRegion {
    pub q0: f64,
    pub origin_ball_radius: f64,
}

impl ExteriorRegion {
    pub fn new(q0: f64, origin_ball_radius: f64) -> Self {
        Self { q0, origin_ball_radius }
    }

    /// Whole slice minus the origin ball.
    pub fn everything(origin_ball_radius: f64) -> Self {
        Self { q0: f64::NEG_INFINITY, origin_ball_radius }
    }

    /// Origin ball of two grid spacings.
    pub fn for_grid(q0: f64, grid: &Grid) -> Self {
        Self { q0, origin_ball_radius: 2.0 * grid.dx() }
    }

    pub fn contains(&self, t: f64, r: f64) -> bool {
        r >= self.origin_ball_radius && r - t >= self.q0
    }

    /// Inner radius of the region on the slice at time t.
    pub fn inner_radius(&self, t: f64) -> f64 {
        self.origin_ball_radius.max(t + self.q0)
    }
}

/// Node-based midpoint rule: Σ F·Δx³ over interior nodes inside the region.
pub fn quadrature_slice<T: Real>(f: &GridField<T>, region: &ExteriorRegion, t: f64) -> Result<f64> {
    if f.rank() != 0 || f.channels() != 1 {
        return Err(Error::RankMismatch { expected: 0, got: f.rank() });
    }
    let g = *f.grid();
    let data = f.comp(0, 0);
    let p = g.padded();
    let (sum, count) = (GHOST..GHOST + g.n)
        .into_par_iter()
        .map(|i| {
            let mut s = 0.0;
            let mut c = 0usize;
            for j in g.interior() {
                for k in g.interior() {
                    let x = g.position(i, j, k);
                    let r = (x[0] * x[0] + x[1] * x[1] + x[2] * x[2]).sqrt();
                    if region.contains(t, r) {
                        s += data[(i * p + j) * p + k].to_f64_lossy();
                        c += 1;
                    }
                }
            }
            (s, c)
        })
        .reduce(|| (0.0, 0), |a, b| (a.0 + b.0, a.1 + b.1));
    if count == 0 {
        return Err(Error::EmptyRegion);
    }
    Ok(sum * g.dx().powi(3))
}

/// Gauss–Legendre nodes and weights on [−1, 1].
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    for i in 0..(n + 1) / 2 {
        let mut z = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, z);
            for k in 2..=n {
                let p2 = ((2 * k - 1) as f64 * z * p1 - (k - 1) as f64 * p0) / k as f64;
                p0 = p1;
                p1 = p2;
            }
            dp = n as f64 * (z * p1 - p0) / (z * z - 1.0);
            let dz = p1 / dp;
            z -= dz;
            if dz.abs() < 1e-16 {
                break;
            }
        }
        x[i] = -z;
        x[n - 1 - i] = z;
        w[i] = 2.0 / ((1.0 - z * z) * dp * dp);
        w[n - 1 - i] = w[i];
    }
    (x, w)
}

/// Cubic Lagrange stencil (start index, four weights) for coordinate `x`.
#[inline]
fn cubic_stencil(g: &Grid, x: f64) -> (usize, [f64; 4]) {
    let s = (x + g.extent) / g.dx() - 0.5 + GHOST as f64;
    let base = (s.floor() as isize - 1).clamp(0, g.padded() as isize - 4) as usize;
    let u = s - base as f64; // in [1, 2) for interior points
    let l0 = -(u - 1.0) * (u - 2.0) * (u - 3.0) / 6.0;
    let l1 = u * (u - 2.0) * (u - 3.0) / 2.0;
    let l2 = -u * (u - 1.0) * (u - 3.0) / 2.0;
    let l3 = u * (u - 1.0) * (u - 2.0) / 6.0;
    (base, [l0, l1, l2, l3])
}

/// Tricubic interpolation of several padded arrays at one point.
pub fn interpolate<T: Real>(g: &Grid, arrays: &[&[T]], x: [f64; 3], out: &mut [f64]) {
    let (bi, wi) = cubic_stencil(g, x[0]);
    let (bj, wj) = cubic_stencil(g, x[1]);
    let (bk, wk) = cubic_stencil(g, x[2]);
    for v in out.iter_mut() {
        *v = 0.0;
    }
    for (a, wa) in wi.iter().enumerate() {
        for (b, wb) in wj.iter().enumerate() {
            let wab = wa * wb;
            let row = g.at(bi + a, bj + b, bk);
            for (f, arr) in arrays.iter().enumerate() {
                let s = wk[0] * arr[row].to_f64_lossy()
                    + wk[1] * arr[row + 1].to_f64_lossy()
                    + wk[2] * arr[row + 2].to_f64_lossy()
                    + wk[3] * arr[row + 3].to_f64_lossy();
                out[f] += wab * s;
            }
        }
    }
}

/// Spherical product rule (Gauss in cos θ, trapezoid in φ) combined with
/// composite Gauss panels in r. Integrands are tricubic interpolants of nodal
/// data multiplied by analytic radial factors, so kinks in q are resolved by
/// panel breaks rather than smeared across cells.
#[derive(Clone, Debug)]
pub struct SphericalRule {
    mu: Vec<f64>,
    mu_w: Vec<f64>,
    n_phi: usize,
    radial_order: usize,
}

impl SphericalRule {
    pub fn new(n_theta: usize, n_phi: usize, radial_order: usize) -> Self {
        let (mu, mu_w) = gauss_legendre(n_theta);
        Self { mu, mu_w, n_phi, radial_order }
    }

    /// Resolution matched to a grid: about one angular sample per cell at the outer radius.
    pub fn for_grid(g: &Grid, r_max: f64) -> Self {
        let n_theta = ((std::f64::consts::PI * r_max / g.dx()).ceil() as usize).clamp(16, 160);
        Self::new(n_theta, 2 * n_theta, 3)
    }

    fn directions(&self) -> Vec<([f64; 3], f64)> {
        let dphi = 2.0 * std::f64::consts::PI / self.n_phi as f64;
        let mut out = Vec::with_capacity(self.mu.len() * self.n_phi);
        for (m, wm) in self.mu.iter().zip(self.mu_w.iter()) {
            let s = (1.0 - m * m).sqrt();
            for k in 0..self.n_phi {
                let phi = (k as f64 + 0.5) * dphi;
                out.push(([s * phi.cos(), s * phi.sin(), *m], wm * dphi));
            }
        }
        out
    }

    /// ∫_{S²} f(Rω) dω for each array (no r² factor).
    pub fn sphere<T: Real>(&self, g: &Grid, arrays: &[&[T]], radius: f64) -> Vec<f64> {
        let nf = arrays.len();
        self.sphere_map(g, arrays, radius, nf, |_, vals, out| out.copy_from_slice(vals))
    }

    /// ∫_{S²} density(x, interpolated values) dω at radius R; the density
    /// writes `n_out` values.
    pub fn sphere_map<T: Real>(
        &self,
        g: &Grid,
        arrays: &[&[T]],
        radius: f64,
        n_out: usize,
        density: impl Fn([f64; 3], &[f64], &mut [f64]) + Sync,
    ) -> Vec<f64> {
        let dirs = self.directions();
        let nf = arrays.len();
        dirs.par_iter()
            .fold(
                || (vec![0.0; n_out], vec![0.0; nf], vec![0.0; n_out]),
                |(mut acc, mut buf, mut out), (w, wt)| {
                    let x = [radius * w[0], radius * w[1], radius * w[2]];
                    interpolate(g, arrays, x, &mut buf);
                    density(x, &buf, &mut out);
                    for (a, o) in acc.iter_mut().zip(out.iter()) {
                        *a += wt * o;
                    }
                    (acc, buf, out)
                },
            )
            .map(|(acc, _, _)| acc)
            .reduce(|| vec![0.0; n_out], add_vecs)
    }

    /// ∫ f_k(x)·radial(k, |x|) d³x over r_min ≤ |x| ≤ r_max.
    pub fn shell<T: Real>(
        &self,
        g: &Grid,
        arrays: &[&[T]],
        r_min: f64,
        r_max: f64,
        breaks: &[f64],
        radial: impl Fn(usize, f64) -> f64 + Sync,
    ) -> Result<Vec<f64>> {
        let nf = arrays.len();
        self.shell_map(g, arrays, r_min, r_max, breaks, nf, |x, vals, out| {
            let r = (x[0] * x[0] + x[1] * x[1] + x[2] * x[2]).sqrt();
            for (k, o) in out.iter_mut().enumerate() {
                *o = vals[k] * radial(k, r);
            }
        })
    }

    /// Radial nodes and weights: composite Gauss panels about one grid
    /// spacing wide, never straddling an entry of `breaks`.
    fn radial_nodes(&self, g: &Grid, r_min: f64, r_max: f64, breaks: &[f64]) -> Vec<(f64, f64)> {
        let mut edges = vec![r_min, r_max];
        edges.extend(breaks.iter().copied().filter(|b| *b > r_min && *b < r_max));
        edges.sort_by(|a, b| a.partial_cmp(b).unwrap());
        edges.dedup_by(|a, b| (*a - *b).abs() < 1e-14);
        let (gx, gw) = gauss_legendre(self.radial_order);
        let mut radii = Vec::new();
        for win in edges.windows(2) {
            let panels = ((win[1] - win[0]) / g.dx()).ceil().max(1.0) as usize;
            let hp = (win[1] - win[0]) / panels as f64;
            for p in 0..panels {
                let a = win[0] + p as f64 * hp;
                for (x, w) in gx.iter().zip(gw.iter()) {
                    radii.push((a + 0.5 * hp * (1.0 + x), 0.5 * hp * w));
                }
            }
        }
        radii
    }

    /// ∫ density(x, interpolated values) d³x over the shell r_min ≤ |x| ≤ r_max.
    #[allow(clippy::too_many_arguments)]
    pub fn shell_map<T: Real>(
        &self,
        g: &Grid,
        arrays: &[&[T]],
        r_min: f64,
        r_max: f64,
        breaks: &[f64],
        n_out: usize,
        density: impl Fn([f64; 3], &[f64], &mut [f64]) + Sync,
    ) -> Result<Vec<f64>> {
        if !(r_max > r_min) {
            return Err(Error::EmptyRegion);
        }
        let radii = self.radial_nodes(g, r_min, r_max, breaks);
        let dirs = self.directions();
        let nf = arrays.len();
        let total = radii
            .par_iter()
            .map(|&(r, wr)| {
                let mut acc = vec![0.0; n_out];
                let mut buf = vec![0.0; nf];
                let mut out = vec![0.0; n_out];
                for (w, wt) in dirs.iter() {
                    let x = [r * w[0], r * w[1], r * w[2]];
                    interpolate(g, arrays, x, &mut buf);
                    density(x, &buf, &mut out);
                    for (a, o) in acc.iter_mut().zip(out.iter()) {
                        *a += wt * o;
                    }
                }
                let jac = wr * r * r;
                acc.iter().map(|a| a * jac).collect::<Vec<f64>>()
            })
            .reduce(|| vec![0.0; n_out], add_vecs);
        Ok(total)
    }
}

fn add_vecs(a: Vec<f64>, b: Vec<f64>) -> Vec<f64> {
    a.iter().zip(b.iter()).map(|(x, y)| x + y).collect()
}

/// Composite Simpson on equally spaced samples (odd count), else trapezoid.
pub fn integrate_uniform(values: &[f64], dt: f64) -> f64 {
    let n = values.len();
    if n < 2 {
        return 0.0;
    }
    if n % 2 == 1 && n >= 3 {
        let mut s = values[0] + values[n - 1];
        for (i, v) in values.iter().enumerate().take(n - 1).skip(1) {
            s += if i % 2 == 1 { 4.0 * v } else { 2.0 * v };
        }
        s * dt / 3.0
    } else {
        let inner: f64 = values[1..n - 1].iter().sum();
        (0.5 * (values[0] + values[n - 1]) + inner) * dt
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gauss_legendre_integrates_polynomials() {
        let (x, w) = gauss_legendre(5);
        let s: f64 = x.iter().zip(w.iter()).map(|(x, w)| w * x.powi(8)).sum();
        assert!((s - 2.0 / 9.0).abs() < 1e-14);
        let (x, w) = gauss_legendre(1);
        assert_eq!((x[0], w[0]), (0.0, 2.0));
    }

    #[test]
    fn cubic_interpolation_is_exact_on_cubics() {
        let g = Grid::new(10, 1.0).unwrap();
        let f: Vec<f64> = g.sample(|x| x[0].powi(3) - x[1] * x[2] + 2.0);
        let mut out = [0.0];
        interpolate(&g, &[&f], [0.123, -0.4, 0.77], &mut out);
        assert!((out[0] - (0.123f64.powi(3) + 0.4 * 0.77 + 2.0)).abs() < 1e-12);
    }

    #[test]
    fn shell_volume() {
        let g = Grid::new(16, 2.0).unwrap();
        let one: Vec<f64> = vec![1.0; g.len()];
        let rule = SphericalRule::for_grid(&g, 1.5);
        let v = rule.shell(&g, &[&one], 0.5, 1.5, &[1.0], |_, _| 1.0).unwrap();
        let exact = 4.0 / 3.0 * std::f64::consts::PI * (1.5f64.powi(3) - 0.5f64.powi(3));
        assert!((v[0] - exact).abs() < 1e-10 * exact);
    }

    #[test]
    fn simpson_exact_on_cubics() {
        let v: Vec<f64> = (0..5).map(|i| (i as f64 * 0.5).powi(3)).collect();
        assert!((integrate_uniform(&v, 0.5) - 4.0).abs() < 1e-14);
    }
}
