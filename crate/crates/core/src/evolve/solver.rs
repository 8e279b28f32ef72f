//! Method-of-lines solver for g^{αβ}∂_α∂_βΦ = S with classical RK4.
//!
//! The state is (Φ, Π = ∂tΦ). Interior derivatives are fourth order; with the
//! outgoing closure the outer two interior layers instead obey
//! ∂t u = −x̂·∇u − u/r, discretized with second-order central differences.

use serde::{Deserialize, Serialize};

use super::source::{build_source, SourceSpec};
use crate::error::{Error, Result};
use crate::fields::{Grid, GridField};
use crate::geometry::{matrix_norm, Perturbation};

pub const CFL_LIMIT: f64 = 0.5;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Boundary {
    /// Outgoing radiation condition on the outer two interior layers.
    #[default]
    Sommerfeld,
    /// Period 2X in every axis.
    Periodic,
    /// Ghosts filled from a known solution.
    Exact,
}

/// Exact solution `(t, slot, channel, x) -> [Φ, ∂tΦ]`.
pub type ExactSolution = dyn Fn(f64, usize, usize, [f64; 3]) -> [f64; 2] + Sync;

/// Right-hand side source of the evolution.
pub trait Forcing: Sync {
    /// S at the time of `phi`; ghosts of `phi` and `pi` are valid.
    /// `None` means S = 0.
    fn source(&self, phi: &GridField<f64>, pi: &GridField<f64>, bg: &dyn Perturbation) -> Result<Option<Vec<Vec<f64>>>>;
}

/// S = 0.
pub struct NoForcing;

impl Forcing for NoForcing {
    fn source(&self, _: &GridField<f64>, _: &GridField<f64>, _: &dyn Perturbation) -> Result<Option<Vec<Vec<f64>>>> {
        Ok(None)
    }
}

impl Forcing for SourceSpec {
    fn source(&self, phi: &GridField<f64>, pi: &GridField<f64>, bg: &dyn Perturbation) -> Result<Option<Vec<Vec<f64>>>> {
        if self.is_empty() {
            return Ok(None);
        }
        let s = build_source(self, phi, pi, bg)?;
        Ok(Some(s.arrays().to_vec()))
    }
}

/// Evolution state: Φ and Π at a common time. Ghosts may be stale.
#[derive(Clone, Debug)]
pub struct RunState {
    pub phi: GridField<f64>,
    pub pi: GridField<f64>,
    pub step: usize,
}

impl RunState {
    pub fn new(phi: GridField<f64>, pi: GridField<f64>) -> Result<Self> {
        if phi.grid() != pi.grid() || phi.rank() != pi.rank() || phi.channels() != pi.channels() {
            return Err(Error::DomainMismatch("Φ and Π layouts differ".into()));
        }
        Ok(Self { phi, pi, step: 0 })
    }

    pub fn zeros(grid: Grid, rank: usize, channels: usize, t: f64) -> Self {
        Self { phi: GridField::zeros(grid, rank, channels, t), pi: GridField::zeros(grid, rank, channels, t), step: 0 }
    }

    pub fn time(&self) -> f64 {
        self.phi.time()
    }

    pub fn grid(&self) -> &Grid {
        self.phi.grid()
    }
}

/// g^{tt}, g^{t1..3}, g^{11,12,13,22,23,33} at every node.
struct MetricArrays {
    t: f64,
    g: Vec<[f64; 10]>,
}

const PAIRS: [(usize, usize); 6] = [(1, 1), (1, 2), (1, 3), (2, 2), (2, 3), (3, 3)];

fn metric_arrays(grid: &Grid, bg: &dyn Perturbation, t: f64) -> MetricArrays {
    let mut g = vec![[0.0; 10]; grid.len()];
    grid.for_each_interior(|o, x| {
        let h = bg.h_inv(t, x);
        let mut v = [0.0; 10];
        v[0] = -1.0 + h[0][0];
        for i in 1..4 {
            v[i] = h[0][i];
        }
        for (k, &(a, b)) in PAIRS.iter().enumerate() {
            v[4 + k] = h[a][b] + if a == b { 1.0 } else { 0.0 };
        }
        g[o] = v;
    });
    MetricArrays { t, g }
}

pub struct Solver<'a> {
    pub grid: Grid,
    pub background: &'a dyn Perturbation,
    pub forcing: &'a dyn Forcing,
    pub boundary: Boundary,
    pub exact: Option<&'a ExactSolution>,
    static_metric: Option<MetricArrays>,
    static_speed: Option<f64>,
}

impl<'a> Solver<'a> {
    pub fn new(
        grid: Grid,
        background: &'a dyn Perturbation,
        forcing: &'a dyn Forcing,
        boundary: Boundary,
        exact: Option<&'a ExactSolution>,
    ) -> Result<Self> {
        if boundary == Boundary::Exact && exact.is_none() {
            return Err(Error::Invalid("exact boundary needs an exact solution".into()));
        }
        let static_metric =
            (!background.is_flat() && background.is_static()).then(|| metric_arrays(&grid, background, 0.0));
        let mut s = Self { grid, background, forcing, boundary, exact, static_metric, static_speed: None };
        if background.is_static() || background.amplitude_bound().is_some() {
            s.static_speed = Some(s.speed_at(0.0)?);
        }
        Ok(s)
    }

    /// sup |H| over the interior nodes at time t.
    pub fn sampled_amplitude(&self, t: f64) -> f64 {
        let mut m: f64 = 0.0;
        self.grid.for_each_interior(|_, x| m = m.max(matrix_norm(&self.background.h_inv(t, x))));
        m
    }

    fn speed_at(&self, t: f64) -> Result<f64> {
        let eta = match self.background.amplitude_bound() {
            Some(e) => e,
            None => self.sampled_amplitude(t),
        };
        if eta >= 1.0 / 3.0 {
            return Err(Error::Invalid(format!("|H| = {eta:.4} is not below 1/3")));
        }
        // characteristic speeds of g are bounded by (1 + |H|)/(1 − |H|)
        Ok((1.0 + eta) / (1.0 - eta))
    }

    /// Upper bound on the characteristic speed at time t.
    pub fn max_speed(&self, t: f64) -> Result<f64> {
        match self.static_speed {
            Some(c) => Ok(c),
            None => self.speed_at(t),
        }
    }

    /// Upper bound on the characteristic speed over [t0, t1], sampled at 33
    /// equally spaced times.
    pub fn max_speed_over(&self, t0: f64, t1: f64) -> Result<f64> {
        if let Some(c) = self.static_speed {
            return Ok(c);
        }
        let mut c: f64 = 0.0;
        for k in 0..=32 {
            c = c.max(self.speed_at(t0 + (t1 - t0) * k as f64 / 32.0)?);
        }
        Ok(c)
    }

    /// Largest time step allowed by the CFL limit.
    pub fn max_dt(&self, t: f64) -> Result<f64> {
        Ok(CFL_LIMIT * self.grid.dx() / self.max_speed(t)?)
    }

    pub fn cfl(&self, t: f64, dt: f64) -> Result<f64> {
        Ok(self.max_speed(t)? * dt / self.grid.dx())
    }

    /// Fill ghosts of both fields according to the boundary rule.
    pub fn fill_ghosts(&self, phi: &mut GridField<f64>, pi: &mut GridField<f64>) {
        match self.boundary {
            Boundary::Periodic => {
                phi.fill_ghosts_periodic();
                pi.fill_ghosts_periodic();
            }
            Boundary::Sommerfeld => {
                phi.fill_ghosts_extrapolate();
                pi.fill_ghosts_extrapolate();
            }
            Boundary::Exact => {
                let ex = self.exact.expect("checked in Solver::new");
                let t = phi.time();
                phi.fill_ghosts_with(|s, c, x| ex(t, s, c, x)[0]);
                pi.fill_ghosts_with(|s, c, x| ex(t, s, c, x)[1]);
            }
        }
    }

    /// Copy of the state with valid ghosts, for monitors.
    pub fn prepared(&self, state: &RunState) -> (GridField<f64>, GridField<f64>) {
        let mut phi = state.phi.clone();
        let mut pi = state.pi.clone();
        self.fill_ghosts(&mut phi, &mut pi);
        (phi, pi)
    }

    /// Source S at the state's time, with ghosts filled.
    pub fn source_at(&self, state: &RunState) -> Result<Option<GridField<f64>>> {
        let (phi, pi) = self.prepared(state);
        let s = self.forcing.source(&phi, &pi, self.background)?;
        Ok(match s {
            None => None,
            Some(a) => Some(GridField::from_arrays(self.grid, phi.rank(), phi.channels(), phi.time(), a)?),
        })
    }

    fn rhs(&self, t: f64, phi_a: &[Vec<f64>], pi_a: &[Vec<f64>], rank: usize, nch: usize) -> Result<(Vec<Vec<f64>>, Vec<Vec<f64>>)> {
        let g = self.grid;
        let mut phi = GridField::from_arrays(g, rank, nch, t, phi_a.to_vec())?;
        let mut pi = GridField::from_arrays(g, rank, nch, t, pi_a.to_vec())?;
        self.fill_ghosts(&mut phi, &mut pi);
        let src = self.forcing.source(&phi, &pi, self.background)?;
        let k_phi: Vec<Vec<f64>> = pi.arrays().to_vec();
        let mut k_pi: Vec<Vec<f64>>;
        if self.background.is_flat() {
            k_pi = phi.laplacian()?.arrays().to_vec();
        } else {
            let dynamic;
            let metric = match &self.static_metric {
                Some(m) => m,
                None => {
                    dynamic = metric_arrays(&g, self.background, t);
                    &dynamic
                }
            };
            debug_assert!(self.static_metric.is_some() || metric.t == t);
            let dpi: Vec<GridField<f64>> = (1..4).map(|i| pi.partial(i)).collect::<Result<_>>()?;
            let d2: Vec<GridField<f64>> = PAIRS.iter().map(|&(a, b)| phi.second(a, b)).collect::<Result<_>>()?;
            k_pi = vec![vec![0.0; g.len()]; phi_a.len()];
            for (a, out) in k_pi.iter_mut().enumerate() {
                g.for_each_interior(|o, _| {
                    let m = &metric.g[o];
                    let mut acc = 0.0;
                    for i in 0..3 {
                        acc += 2.0 * m[1 + i] * dpi[i].arrays()[a][o];
                    }
                    for k in 0..6 {
                        let w = if PAIRS[k].0 == PAIRS[k].1 { 1.0 } else { 2.0 };
                        acc += w * m[4 + k] * d2[k].arrays()[a][o];
                    }
                    // g^{tt}∂tΠ = S − acc; the flat part of −acc/g^{tt} is ΔΦ
                    out[o] = -acc / m[0];
                });
            }
        }
        if let Some(s) = &src {
            if self.background.is_flat() {
                for (kp, sa) in k_pi.iter_mut().zip(s) {
                    g.for_each_interior(|o, _| kp[o] -= sa[o]);
                }
            } else {
                let dynamic;
                let metric = match &self.static_metric {
                    Some(m) => m,
                    None => {
                        dynamic = metric_arrays(&g, self.background, t);
                        &dynamic
                    }
                };
                for (kp, sa) in k_pi.iter_mut().zip(s) {
                    g.for_each_interior(|o, _| kp[o] += sa[o] / metric.g[o][0]);
                }
            }
        }
        let mut k_phi = k_phi;
        if self.boundary == Boundary::Sommerfeld {
            self.outgoing_layers(&phi, &pi, &mut k_phi, &mut k_pi);
        }
        Ok((k_phi, k_pi))
    }

    fn outgoing_layers(&self, phi: &GridField<f64>, pi: &GridField<f64>, k_phi: &mut [Vec<f64>], k_pi: &mut [Vec<f64>]) {
        let g = self.grid;
        let p = g.padded();
        let lo = crate::fields::grid::GHOST;
        let hi = lo + g.n - 1;
        let h = g.dx();
        let near = |i: usize| i < lo + 2 || i + 2 > hi;
        g.for_each_interior(|o, x| {
            let (i, j, k) = (o / (p * p), (o / p) % p, o % p);
            if !(near(i) || near(j) || near(k)) {
                return;
            }
            let r = (x[0] * x[0] + x[1] * x[1] + x[2] * x[2]).sqrt();
            for a in 0..k_phi.len() {
                for (field, out) in [(phi, &mut k_phi[a]), (pi, &mut k_pi[a])] {
                    let f = &field.arrays()[a];
                    let mut radial = 0.0;
                    for axis in 1..4 {
                        let s = g.stride(axis);
                        radial += x[axis - 1] / r * (f[o + s] - f[o - s]) / (2.0 * h);
                    }
                    out[o] = -radial - f[o] / r;
                }
            }
        });
    }

    /// One RK4 step of size dt.
    pub fn step(&self, state: &RunState, dt: f64) -> Result<RunState> {
        let t = state.time();
        let cfl = self.cfl(t, dt)?;
        if cfl > CFL_LIMIT * (1.0 + 1e-12) {
            return Err(Error::CflViolation { cfl, limit: CFL_LIMIT });
        }
        let rank = state.phi.rank();
        let nch = state.phi.channels();
        let y_phi = state.phi.arrays();
        let y_pi = state.pi.arrays();
        let axpy = |y: &[Vec<f64>], k: &[Vec<f64>], c: f64| -> Vec<Vec<f64>> {
            y.iter().zip(k).map(|(a, b)| a.iter().zip(b).map(|(u, v)| u + c * v).collect()).collect()
        };
        let (k1p, k1q) = self.rhs(t, y_phi, y_pi, rank, nch)?;
        let (k2p, k2q) = self.rhs(t + 0.5 * dt, &axpy(y_phi, &k1p, 0.5 * dt), &axpy(y_pi, &k1q, 0.5 * dt), rank, nch)?;
        let (k3p, k3q) = self.rhs(t + 0.5 * dt, &axpy(y_phi, &k2p, 0.5 * dt), &axpy(y_pi, &k2q, 0.5 * dt), rank, nch)?;
        let (k4p, k4q) = self.rhs(t + dt, &axpy(y_phi, &k3p, dt), &axpy(y_pi, &k3q, dt), rank, nch)?;
        let combine = |y: &[Vec<f64>], k1: &[Vec<f64>], k2: &[Vec<f64>], k3: &[Vec<f64>], k4: &[Vec<f64>]| {
            (0..y.len())
                .map(|a| {
                    (0..y[a].len())
                        .map(|o| y[a][o] + dt / 6.0 * (k1[a][o] + 2.0 * k2[a][o] + 2.0 * k3[a][o] + k4[a][o]))
                        .collect()
                })
                .collect::<Vec<Vec<f64>>>()
        };
        let phi = GridField::from_arrays(self.grid, rank, nch, t + dt, combine(y_phi, &k1p, &k2p, &k3p, &k4p))?;
        let pi = GridField::from_arrays(self.grid, rank, nch, t + dt, combine(y_pi, &k1q, &k2q, &k3q, &k4q))?;
        Ok(RunState { phi, pi, step: state.step + 1 })
    }

    /// Advance to `t_end` in `steps` equal steps.
    pub fn advance(&self, state: RunState, t_end: f64, steps: usize) -> Result<RunState> {
        let mut s = state;
        if steps == 0 {
            return Ok(s);
        }
        let dt = (t_end - s.time()) / steps as f64;
        for _ in 0..steps {
            s = self.step(&s, dt)?;
        }
        Ok(s)
    }

    /// Smallest step count reaching `t_end` within the CFL limit.
    pub fn steps_for(&self, t0: f64, t_end: f64) -> Result<usize> {
        let dt = CFL_LIMIT * self.grid.dx() / self.max_speed_over(t0, t_end)?;
        Ok(((t_end - t0) / dt - 1e-9).ceil().max(0.0) as usize)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::Flat;

    #[test]
    fn zero_stays_zero() {
        let g = Grid::new(8, 1.0).unwrap();
        let solver = Solver::new(g, &Flat, &NoForcing, Boundary::Sommerfeld, None).unwrap();
        let mut s = RunState::zeros(g, 1, 2, 0.0);
        for _ in 0..3 {
            s = solver.step(&s, 0.05).unwrap();
        }
        assert_eq!(s.phi.max_abs(), 0.0);
        assert_eq!(s.pi.max_abs(), 0.0);
    }

    #[test]
    fn cfl_enforced() {
        let g = Grid::new(8, 1.0).unwrap();
        let solver = Solver::new(g, &Flat, &NoForcing, Boundary::Periodic, None).unwrap();
        let s = RunState::zeros(g, 0, 1, 0.0);
        let err = solver.step(&s, g.dx()).unwrap_err();
        assert!(matches!(err, Error::CflViolation { .. }));
    }
}
