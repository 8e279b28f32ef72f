//! Uniform cell-centred grids on [−X, X]³ with two ghost layers and
//! fourth-order finite differences.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::scalar::Real;

/// Ghost layer width.
pub const GHOST: usize = 2;

/// Node layout shared by all fields on the same grid.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Grid {
    /// Interior nodes per axis.
    pub n: usize,
    /// Half extent X.
    pub extent: f64,
}

impl Grid {
    pub fn new(n: usize, extent: f64) -> Result<Self> {
        if n < 6 {
            return Err(Error::Invalid(format!("grid needs at least 6 nodes per axis, got {n}")));
        }
        if !(extent > 0.0) {
            return Err(Error::Invalid("grid extent must be positive".into()));
        }
        Ok(Self { n, extent })
    }

    /// Spacing Δx = 2X/N.
    pub fn dx(&self) -> f64 {
        2.0 * self.extent / self.n as f64
    }

    /// Padded points per axis.
    pub fn padded(&self) -> usize {
        self.n + 2 * GHOST
    }

    pub fn len(&self) -> usize {
        self.padded().pow(3)
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Coordinate of padded index `i` along any axis.
    pub fn coord(&self, i: usize) -> f64 {
        -self.extent + (i as f64 - GHOST as f64 + 0.5) * self.dx()
    }

    /// Flat offset of padded indices.
    #[inline]
    pub fn at(&self, i: usize, j: usize, k: usize) -> usize {
        let p = self.padded();
        (i * p + j) * p + k
    }

    /// Spatial position of padded indices.
    pub fn position(&self, i: usize, j: usize, k: usize) -> [f64; 3] {
        [self.coord(i), self.coord(j), self.coord(k)]
    }

    /// Padded index range of interior nodes.
    pub fn interior(&self) -> std::ops::Range<usize> {
        GHOST..GHOST + self.n
    }

    pub fn stride(&self, axis: usize) -> usize {
        let p = self.padded();
        match axis {
            1 => p * p,
            2 => p,
            3 => 1,
            _ => panic!("spatial axis must be 1, 2 or 3"),
        }
    }

    /// Visit every interior node with its flat offset and position.
    pub fn for_each_interior(&self, mut f: impl FnMut(usize, [f64; 3])) {
        for i in self.interior() {
            for j in self.interior() {
                for k in self.interior() {
                    f(self.at(i, j, k), self.position(i, j, k));
                }
            }
        }
    }

    /// Build a padded array from a function of position; ghosts included.
    pub fn sample<T: Real>(&self, f: impl Fn([f64; 3]) -> f64 + Sync) -> Vec<T> {
        let p = self.padded();
        let mut out = vec![T::zero(); self.len()];
        out.par_chunks_mut(p * p).enumerate().for_each(|(i, plane)| {
            for j in 0..p {
                for k in 0..p {
                    plane[j * p + k] = T::of(f(self.position(i, j, k)));
                }
            }
        });
        out
    }
}

const D1: [f64; 5] = [1.0 / 12.0, -8.0 / 12.0, 0.0, 8.0 / 12.0, -1.0 / 12.0];
const D2: [f64; 5] = [-1.0 / 12.0, 16.0 / 12.0, -30.0 / 12.0, 16.0 / 12.0, -1.0 / 12.0];

/// Apply a 5-point stencil along `axis` on interior nodes; other entries are zero.
fn stencil_axis<T: Real>(grid: &Grid, src: &[T], axis: usize, coef: &[f64; 5], scale: f64) -> Vec<T> {
    let p = grid.padded();
    let s = grid.stride(axis) as isize;
    let c: Vec<T> = coef.iter().map(|&c| T::of(c * scale)).collect();
    let mut out = vec![T::zero(); grid.len()];
    let lo = GHOST;
    let hi = GHOST + grid.n;
    out.par_chunks_mut(p * p).enumerate().for_each(|(i, plane)| {
        if i < lo || i >= hi {
            return;
        }
        for j in lo..hi {
            for k in lo..hi {
                let o = grid.at(i, j, k) as isize;
                let mut acc = T::zero();
                for (m, cm) in c.iter().enumerate() {
                    if coef[m] != 0.0 {
                        acc += *cm * src[(o + (m as isize - 2) * s) as usize];
                    }
                }
                plane[j * p + k] = acc;
            }
        }
    });
    out
}

/// Mixed second derivative along two distinct axes.
fn stencil_mixed<T: Real>(grid: &Grid, src: &[T], a: usize, b: usize) -> Vec<T> {
    let h = grid.dx();
    let p = grid.padded();
    let sa = grid.stride(a) as isize;
    let sb = grid.stride(b) as isize;
    let c: Vec<T> = D1.iter().map(|&c| T::of(c / h)).collect();
    let mut out = vec![T::zero(); grid.len()];
    let lo = GHOST;
    let hi = GHOST + grid.n;
    out.par_chunks_mut(p * p).enumerate().for_each(|(i, plane)| {
        if i < lo || i >= hi {
            return;
        }
        for j in lo..hi {
            for k in lo..hi {
                let o = grid.at(i, j, k) as isize;
                let mut acc = T::zero();
                for ma in [0usize, 1, 3, 4] {
                    let mut inner = T::zero();
                    for mb in [0usize, 1, 3, 4] {
                        inner += c[mb] * src[(o + (ma as isize - 2) * sa + (mb as isize - 2) * sb) as usize];
                    }
                    acc += c[ma] * inner;
                }
                plane[j * p + k] = acc;
            }
        }
    });
    out
}

/// Tensor field of rank ≤ 2 sampled on a grid at one time.
///
/// Storage is one padded array per (coordinate slot, channel) pair, slot-major.
#[derive(Clone, Debug)]
pub struct GridField<T> {
    grid: Grid,
    rank: usize,
    channels: usize,
    t: f64,
    comps: Vec<Vec<T>>,
    ghosts_valid: bool,
}

impl<T: Real> GridField<T> {
    pub fn zeros(grid: Grid, rank: usize, channels: usize, t: f64) -> Self {
        assert!(rank <= 2 && channels > 0);
        let n = 4usize.pow(rank as u32) * channels;
        Self { grid, rank, channels, t, comps: vec![vec![T::zero(); grid.len()]; n], ghosts_valid: true }
    }

    /// Sample an analytic field; `f(slot, channel, position)` must be valid on ghosts too.
    pub fn from_fn(
        grid: Grid,
        rank: usize,
        channels: usize,
        t: f64,
        f: impl Fn(usize, usize, [f64; 3]) -> f64 + Sync,
    ) -> Self {
        let n = 4usize.pow(rank as u32);
        let mut comps = Vec::with_capacity(n * channels);
        for slot in 0..n {
            for ch in 0..channels {
                comps.push(grid.sample(|x| f(slot, ch, x)));
            }
        }
        Self { grid, rank, channels, t, comps, ghosts_valid: true }
    }

    /// Build from padded arrays; ghosts are marked stale.
    pub fn from_arrays(grid: Grid, rank: usize, channels: usize, t: f64, comps: Vec<Vec<T>>) -> Result<Self> {
        let n = 4usize.pow(rank as u32) * channels;
        if comps.len() != n || comps.iter().any(|c| c.len() != grid.len()) {
            return Err(Error::DomainMismatch("array layout does not match the grid".into()));
        }
        Ok(Self { grid, rank, channels, t, comps, ghosts_valid: false })
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }
    pub fn rank(&self) -> usize {
        self.rank
    }
    pub fn channels(&self) -> usize {
        self.channels
    }
    pub fn time(&self) -> f64 {
        self.t
    }
    pub fn set_time(&mut self, t: f64) {
        self.t = t;
    }
    pub fn ghosts_valid(&self) -> bool {
        self.ghosts_valid
    }
    pub fn slots(&self) -> usize {
        4usize.pow(self.rank as u32)
    }

    /// Array index of (flat slot, channel).
    pub fn comp_index(&self, slot: usize, ch: usize) -> usize {
        slot * self.channels + ch
    }

    pub fn comp(&self, slot: usize, ch: usize) -> &[T] {
        &self.comps[self.comp_index(slot, ch)]
    }

    pub fn arrays(&self) -> &[Vec<T>] {
        &self.comps
    }

    /// Whole-field update; marks ghosts stale.
    pub fn arrays_mut(&mut self) -> &mut [Vec<T>] {
        self.ghosts_valid = false;
        &mut self.comps
    }

    /// Value at padded node offset.
    pub fn value(&self, slot: usize, ch: usize, offset: usize) -> T {
        self.comps[slot * self.channels + ch][offset]
    }

    /// Fill ghosts by degree-4 polynomial extrapolation along each axis.
    pub fn fill_ghosts_extrapolate(&mut self) {
        let g = self.grid;
        for c in self.comps.iter_mut() {
            extrapolate(&g, c);
        }
        self.ghosts_valid = true;
    }

    /// Fill ghosts periodically with period 2X.
    pub fn fill_ghosts_periodic(&mut self) {
        let g = self.grid;
        for c in self.comps.iter_mut() {
            periodic(&g, c);
        }
        self.ghosts_valid = true;
    }

    /// Fill ghosts from an analytic function `f(slot, channel, position)`.
    pub fn fill_ghosts_with(&mut self, f: impl Fn(usize, usize, [f64; 3]) -> f64) {
        let g = self.grid;
        let p = g.padded();
        let ch = self.channels;
        for (idx, c) in self.comps.iter_mut().enumerate() {
            let (slot, chan) = (idx / ch, idx % ch);
            for i in 0..p {
                for j in 0..p {
                    for k in 0..p {
                        let inside = g.interior().contains(&i) && g.interior().contains(&j) && g.interior().contains(&k);
                        if !inside {
                            c[g.at(i, j, k)] = T::of(f(slot, chan, g.position(i, j, k)));
                        }
                    }
                }
            }
        }
        self.ghosts_valid = true;
    }

    fn require_ghosts(&self) -> Result<()> {
        if self.ghosts_valid {
            Ok(())
        } else {
            Err(Error::GhostInvalid)
        }
    }

    fn map_comps(&self, f: impl Fn(&[T]) -> Vec<T> + Sync) -> Self {
        let comps: Vec<Vec<T>> = self.comps.iter().map(|c| f(c)).collect();
        Self { grid: self.grid, rank: self.rank, channels: self.channels, t: self.t, comps, ghosts_valid: false }
    }

    /// Spatial partial derivative ∂_axis (axis ∈ {1,2,3}), fourth order.
    pub fn partial(&self, axis: usize) -> Result<Self> {
        if !(1..=3).contains(&axis) {
            return Err(Error::Unsupported(
                "time derivatives are not stored on a single slice; use the evolved rate field".into(),
            ));
        }
        self.require_ghosts()?;
        let h = self.grid.dx();
        let g = self.grid;
        Ok(self.map_comps(|c| stencil_axis(&g, c, axis, &D1, 1.0 / h)))
    }

    /// Spatial second derivative ∂_a∂_b, fourth order.
    pub fn second(&self, a: usize, b: usize) -> Result<Self> {
        if !(1..=3).contains(&a) || !(1..=3).contains(&b) {
            return Err(Error::Unsupported("second derivatives are spatial only".into()));
        }
        self.require_ghosts()?;
        let h = self.grid.dx();
        let g = self.grid;
        Ok(if a == b {
            self.map_comps(|c| stencil_axis(&g, c, a, &D2, 1.0 / (h * h)))
        } else {
            self.map_comps(|c| stencil_mixed(&g, c, a, b))
        })
    }

    /// Flat Laplacian Σ_i ∂_i∂_i.
    pub fn laplacian(&self) -> Result<Self> {
        self.require_ghosts()?;
        let h = self.grid.dx();
        let g = self.grid;
        Ok(self.map_comps(|c| {
            let mut acc = stencil_axis(&g, c, 1, &D2, 1.0 / (h * h));
            for axis in 2..=3 {
                let d = stencil_axis(&g, c, axis, &D2, 1.0 / (h * h));
                acc.par_iter_mut().zip(d.par_iter()).for_each(|(a, b)| *a += *b);
            }
            acc
        }))
    }

    /// Scalar field built from one (slot, channel) array.
    pub fn component_field(&self, slot: usize, ch: usize) -> Self {
        Self {
            grid: self.grid,
            rank: 0,
            channels: 1,
            t: self.t,
            comps: vec![self.comp(slot, ch).to_vec()],
            ghosts_valid: self.ghosts_valid,
        }
    }

    /// Discrete L² norm over interior nodes of the difference to an analytic field.
    pub fn l2_error(&self, exact: impl Fn(usize, usize, [f64; 3]) -> f64) -> (f64, f64) {
        let g = self.grid;
        let mut err = 0.0;
        let mut norm = 0.0;
        for slot in 0..self.slots() {
            for ch in 0..self.channels {
                let c = self.comp(slot, ch);
                g.for_each_interior(|o, x| {
                    let e = exact(slot, ch, x);
                    let d = c[o].to_f64_lossy() - e;
                    err += d * d;
                    norm += e * e;
                });
            }
        }
        let w = g.dx().powi(3);
        ((err * w).sqrt(), (norm * w).sqrt())
    }

    /// Largest absolute interior value.
    pub fn max_abs(&self) -> f64 {
        let g = self.grid;
        let mut m = 0.0f64;
        for c in self.comps.iter() {
            g.for_each_interior(|o, _| m = m.max(c[o].to_f64_lossy().abs()));
        }
        m
    }
}

fn extrapolate<T: Real>(g: &Grid, c: &mut [T]) {
    let p = g.padded();
    let n = g.n;
    let k5 = [T::of(5.0), T::of(-10.0), T::of(10.0), T::of(-5.0), T::of(1.0)];
    for axis in 1..=3 {
        let s = g.stride(axis);
        // lines along `axis`: iterate over the other two padded indices
        for u in 0..p {
            for v in 0..p {
                let base = match axis {
                    1 => g.at(0, u, v),
                    2 => g.at(u, 0, v),
                    _ => g.at(u, v, 0),
                };
                let idx = |m: usize| base + m * s;
                let mut line = |dst: usize, src: [usize; 5]| {
                    let mut acc = T::zero();
                    for (kk, sm) in k5.iter().zip(src.iter()) {
                        acc += *kk * c[idx(*sm)];
                    }
                    c[idx(dst)] = acc;
                };
                line(1, [2, 3, 4, 5, 6]);
                line(0, [1, 2, 3, 4, 5]);
                let last = n + 1; // last interior padded index
                line(last + 1, [last, last - 1, last - 2, last - 3, last - 4]);
                line(last + 2, [last + 1, last, last - 1, last - 2, last - 3]);
            }
        }
    }
}

fn periodic<T: Real>(g: &Grid, c: &mut [T]) {
    let p = g.padded();
    let n = g.n;
    let wrap = |i: usize| -> usize {
        if i < GHOST {
            i + n
        } else if i >= GHOST + n {
            i - n
        } else {
            i
        }
    };
    for i in 0..p {
        for j in 0..p {
            for k in 0..p {
                let (a, b, d) = (wrap(i), wrap(j), wrap(k));
                if (a, b, d) != (i, j, k) {
                    c[g.at(i, j, k)] = c[g.at(a, b, d)];
                }
            }
        }
    }
}

/// Fourth-order one-sided derivative weights at node `m` of five consecutive nodes.
pub fn one_sided_d1(m: usize) -> [f64; 5] {
    match m {
        0 => [-25.0 / 12.0, 4.0, -3.0, 4.0 / 3.0, -0.25],
        1 => [-0.25, -5.0 / 6.0, 1.5, -0.5, 1.0 / 12.0],
        2 => D1,
        3 => [-1.0 / 12.0, 0.5, -1.5, 5.0 / 6.0, 0.25],
        4 => [0.25, -4.0 / 3.0, 3.0, -4.0, 25.0 / 12.0],
        _ => panic!("stencil position out of range"),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cubic_is_differentiated_exactly() {
        let g = Grid::new(12, 1.0).unwrap();
        let mut f = GridField::<f64>::from_fn(g, 0, 1, 0.0, |_, _, x| x[0].powi(3) - 2.0 * x[0] * x[1] + x[2]);
        f.fill_ghosts_extrapolate();
        let d = f.partial(1).unwrap();
        let dd = f.second(1, 2).unwrap();
        g.for_each_interior(|o, x| {
            assert!((d.comp(0, 0)[o] - (3.0 * x[0] * x[0] - 2.0 * x[1])).abs() < 1e-10);
            assert!((dd.comp(0, 0)[o] + 2.0).abs() < 1e-10);
        });
    }

    #[test]
    fn stale_ghosts_rejected() {
        let g = Grid::new(8, 1.0).unwrap();
        let mut f = GridField::<f64>::zeros(g, 0, 1, 0.0);
        f.arrays_mut()[0][0] = 1.0;
        assert_eq!(f.partial(1).unwrap_err(), Error::GhostInvalid);
    }

    #[test]
    fn periodic_ghosts_wrap() {
        let g = Grid::new(16, 1.0).unwrap();
        let mut f = GridField::<f64>::from_fn(g, 0, 1, 0.0, |_, _, x| (std::f64::consts::PI * x[0]).sin());
        f.arrays_mut();
        f.fill_ghosts_periodic();
        let d = f.partial(1).unwrap();
        let mut worst: f64 = 0.0;
        g.for_each_interior(|o, x| {
            worst = worst.max((d.comp(0, 0)[o] - std::f64::consts::PI * (std::f64::consts::PI * x[0]).cos()).abs())
        });
        assert!(worst < 5e-3);
    }
}
