//! Manufactured solutions: a prescribed Φ* and the source S = g^{αβ}∂_α∂_βΦ*
//! that makes it an exact solution of the forced equation.

use serde::{Deserialize, Serialize};

use super::solver::Forcing;
use crate::error::{Error, Result};
use crate::fields::{Grid, GridField, PolyField};
use crate::geometry::Perturbation;
use crate::jet::Jet;
use crate::poly::Poly;
use crate::scalar::Scalar;

fn default_omega() -> f64 {
    2.0
}
fn default_sigma() -> f64 {
    0.35
}
fn default_channels() -> usize {
    1
}
fn default_profile() -> Vec<(f64, [u8; 3])> {
    vec![(1.0, [0, 0, 0]), (0.5, [1, 0, 0]), (-0.25, [0, 1, 1])]
}

/// Enveloped target Φ*_a = cos(ωt + 0.3a)·exp(−|x|²/σ²)·P(x), one array a per
/// (slot, channel).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ManufacturedConfig {
    #[serde(default = "default_omega")]
    pub omega: f64,
    #[serde(default = "default_sigma")]
    pub sigma: f64,
    #[serde(default)]
    pub rank: usize,
    #[serde(default = "default_channels")]
    pub channels: usize,
    /// Spatial polynomial P as (coefficient, exponents of x¹, x², x³).
    #[serde(default = "default_profile")]
    pub profile: Vec<(f64, [u8; 3])>,
}

impl Default for ManufacturedConfig {
    fn default() -> Self {
        Self { omega: default_omega(), sigma: default_sigma(), rank: 0, channels: 1, profile: default_profile() }
    }
}

impl ManufacturedConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.sigma > 0.0) {
            return Err(Error::Invalid("manufactured sigma must be > 0".into()));
        }
        if self.rank > 1 || self.channels == 0 {
            return Err(Error::Invalid("manufactured targets support rank 0 or 1 with >= 1 channel".into()));
        }
        Ok(())
    }
}

/// Second-order jet in t of cos(ωt + φ) at t0.
fn time_factor(omega: f64, phi: f64, t0: f64) -> Jet<f64> {
    let (s, c) = (omega * t0 + phi).sin_cos();
    let tau = Jet::variable(0.0, 0, 2);
    Jet::constant(c) + tau.clone() * Jet::constant(-omega * s) + tau.clone() * tau * Jet::constant(-0.5 * omega * omega * c)
}

/// Target Φ*.
#[derive(Clone, Debug)]
pub enum Target {
    Enveloped { omega: f64, sigma: f64, rank: usize, channels: usize, profile: Poly<f64> },
    /// Polynomial in (t, x); one component per (slot, channel).
    Polynomial(PolyField<f64>),
}

impl Target {
    pub fn from_config(c: &ManufacturedConfig) -> Result<Self> {
        c.validate()?;
        let terms: Vec<([u8; 4], f64)> = c.profile.iter().map(|(v, e)| ([0, e[0], e[1], e[2]], *v)).collect();
        Ok(Target::Enveloped {
            omega: c.omega,
            sigma: c.sigma,
            rank: c.rank,
            channels: c.channels,
            profile: Poly::from_terms(&terms),
        })
    }

    pub fn rank(&self) -> usize {
        match self {
            Target::Enveloped { rank, .. } => *rank,
            Target::Polynomial(f) => f.rank(),
        }
    }

    pub fn channels(&self) -> usize {
        match self {
            Target::Enveloped { channels, .. } => *channels,
            Target::Polynomial(f) => f.channels(),
        }
    }

    fn arrays(&self) -> usize {
        4usize.pow(self.rank() as u32) * self.channels()
    }

    /// Jet of component `a` at (t, x) to second order.
    pub fn jet(&self, a: usize, t: f64, x: [f64; 3]) -> Jet<f64> {
        let p = [t, x[0], x[1], x[2]];
        match self {
            Target::Enveloped { omega, sigma, profile, .. } => {
                let c = Jet::coordinates(p, 2);
                let r2 = c[1].clone() * c[1].clone() + c[2].clone() * c[2].clone() + c[3].clone() * c[3].clone();
                let env = (r2 * Jet::constant(-1.0 / (sigma * sigma))).exp();
                let phase = time_factor(*omega, 0.3 * a as f64, t);
                phase * env * Jet::from_poly(profile, p, 2)
            }
            Target::Polynomial(f) => Jet::from_poly(&f.components()[a], p, 2),
        }
    }

    /// [Φ*, ∂tΦ*] of component (slot, channel).
    pub fn value(&self, t: f64, slot: usize, ch: usize, x: [f64; 3]) -> [f64; 2] {
        let j = self.jet(slot * self.channels() + ch, t, x);
        [j.value(), j.d1(0)]
    }

    /// Initial data (Φ*, ∂tΦ*) at time t on a grid, ghosts included.
    pub fn initial_data(&self, grid: Grid, t: f64) -> (GridField<f64>, GridField<f64>) {
        let phi = GridField::from_fn(grid, self.rank(), self.channels(), t, |s, c, x| self.value(t, s, c, x)[0]);
        let pi = GridField::from_fn(grid, self.rank(), self.channels(), t, |s, c, x| self.value(t, s, c, x)[1]);
        (phi, pi)
    }

    /// g^{αβ}∂_α∂_βΦ* of component a.
    pub fn source_value(&self, bg: &dyn Perturbation, a: usize, t: f64, x: [f64; 3]) -> f64 {
        let j = self.jet(a, t, x);
        let h = bg.h_inv(t, x);
        let eta = [-1.0, 1.0, 1.0, 1.0];
        let mut s = 0.0;
        for al in 0..4 {
            for be in 0..4 {
                let g = h[al][be] + if al == be { eta[al] } else { 0.0 };
                if g != 0.0 {
                    s += g * j.d2(al, be);
                }
            }
        }
        s
    }
}

/// Forcing for a manufactured target. Enveloped targets separate into a time
/// factor and a spatial factor whose derivatives are cached per node.
pub struct ManufacturedSource {
    pub target: Target,
    grid: Grid,
    /// Per array: u, ∂_i u, ∂_{ij} u (11, 12, 13, 22, 23, 33).
    cache: Option<Vec<Vec<[f64; 10]>>>,
}

const PAIRS: [(usize, usize); 6] = [(1, 1), (1, 2), (1, 3), (2, 2), (2, 3), (3, 3)];

impl ManufacturedSource {
    pub fn new(target: Target, grid: Grid) -> Self {
        let cache = match &target {
            Target::Enveloped { sigma, profile, .. } => {
                // spatial factor is the same for every component
                let mut spatial = vec![[0.0; 10]; grid.len()];
                grid.for_each_interior(|o, x| {
                    let p = [0.0, x[0], x[1], x[2]];
                    let c = Jet::coordinates(p, 2);
                    let r2 = c[1].clone() * c[1].clone() + c[2].clone() * c[2].clone() + c[3].clone() * c[3].clone();
                    let u = (r2 * Jet::constant(-1.0 / (sigma * sigma))).exp() * Jet::from_poly(profile, p, 2);
                    let mut v = [0.0; 10];
                    v[0] = u.value();
                    for i in 1..4 {
                        v[i] = u.d1(i);
                    }
                    for (k, &(a, b)) in PAIRS.iter().enumerate() {
                        v[4 + k] = u.d2(a, b);
                    }
                    spatial[o] = v;
                });
                Some(vec![spatial; 1])
            }
            Target::Polynomial(_) => None,
        };
        Self { target, grid, cache }
    }

    /// S on the grid at time t (interior only).
    pub fn arrays_at(&self, bg: &dyn Perturbation, t: f64) -> Vec<Vec<f64>> {
        let g = self.grid;
        let n = self.target.arrays();
        let mut out = vec![vec![0.0; g.len()]; n];
        match (&self.target, &self.cache) {
            (Target::Enveloped { omega, .. }, Some(cache)) => {
                let spatial = &cache[0];
                let flat = bg.is_flat();
                for (a, arr) in out.iter_mut().enumerate() {
                    let ph = omega * t + 0.3 * a as f64;
                    let (c0, c1, c2) = (ph.cos(), -omega * ph.sin(), -omega * omega * ph.cos());
                    g.for_each_interior(|o, x| {
                        let u = &spatial[o];
                        let lap = u[4] + u[7] + u[9];
                        if flat {
                            arr[o] = -c2 * u[0] + c0 * lap;
                            return;
                        }
                        let h = bg.h_inv(t, x);
                        let mut s = (h[0][0] - 1.0) * c2 * u[0] + c0 * lap;
                        for i in 1..4 {
                            s += 2.0 * h[0][i] * c1 * u[i];
                        }
                        for (k, &(p, q)) in PAIRS.iter().enumerate() {
                            let w = if p == q { 1.0 } else { 2.0 };
                            s += w * h[p][q] * c0 * u[4 + k];
                        }
                        arr[o] = s;
                    });
                }
            }
            _ => {
                for (a, arr) in out.iter_mut().enumerate() {
                    g.for_each_interior(|o, x| arr[o] = self.target.source_value(bg, a, t, x));
                }
            }
        }
        out
    }
}

impl Forcing for ManufacturedSource {
    fn source(&self, phi: &GridField<f64>, _: &GridField<f64>, bg: &dyn Perturbation) -> Result<Option<Vec<Vec<f64>>>> {
        if phi.grid() != &self.grid {
            return Err(Error::DomainMismatch("manufactured source built for another grid".into()));
        }
        if phi.rank() != self.target.rank() || phi.channels() != self.target.channels() {
            return Err(Error::RankMismatch { expected: self.target.rank(), got: phi.rank() });
        }
        Ok(Some(self.arrays_at(bg, phi.time())))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::evolve::background::BackgroundFamily;
    use crate::geometry::Flat;

    #[test]
    fn cached_source_matches_jets() {
        let grid = Grid::new(8, 1.0).unwrap();
        let target = Target::from_config(&ManufacturedConfig { channels: 2, ..Default::default() }).unwrap();
        let bg = BackgroundFamily::static_bump(0.2).build().unwrap();
        let src = ManufacturedSource::new(target.clone(), grid);
        for b in [&bg as &dyn Perturbation, &Flat] {
            let s = src.arrays_at(b, 0.4);
            let o = grid.at(4, 5, 3);
            let x = grid.position(4, 5, 3);
            for a in 0..2 {
                let direct = target.source_value(b, a, 0.4, x);
                assert!((s[a][o] - direct).abs() < 1e-12 * (1.0 + direct.abs()));
            }
        }
    }

    #[test]
    fn polynomial_target_source() {
        // flat wave operator of t² − |x|² is −2 − 6
        let p = Poly::from_terms(&[([2, 0, 0, 0], 1.0), ([0, 2, 0, 0], -1.0), ([0, 0, 2, 0], -1.0), ([0, 0, 0, 2], -1.0)]);
        let t = Target::Polynomial(PolyField::scalar(p));
        assert!((t.source_value(&Flat, 0, 0.3, [0.1, 0.2, 0.3]) - (-2.0 - 6.0)).abs() < 1e-12);
    }
}
