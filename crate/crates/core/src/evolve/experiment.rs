//! Configured runs: initial data, time stepping, per-step monitors, logs and
//! snapshots, plus the convergence studies used for solver verification.

use serde::{Deserialize, Serialize};

use super::background::BackgroundFamily;
use super::manufactured::{ManufacturedConfig, ManufacturedSource, Target};
use super::solver::{Boundary, ExactSolution, Forcing, NoForcing, RunState, Solver, CFL_LIMIT};
use super::source::SourceSpec;
use crate::energy::{slice_terms, ComponentSpec, EnergySeries, Slice, SliceFields};
use crate::error::{Error, Result};
use crate::estimates::energy_estimate::{estimate_slice_terms, EstimateSeries};
use crate::fields::{ExteriorRegion, Grid, GridField};
use crate::geometry::{FrameVector, Perturbation};
use crate::vecfields::MultiIndex;
use crate::weights::WeightParams;

fn one() -> f64 {
    1.0
}
fn one_usize() -> usize {
    1
}
fn default_cfl() -> f64 {
    CFL_LIMIT
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    pub n: usize,
    pub extent: f64,
}

impl GridConfig {
    pub fn build(&self) -> Result<Grid> {
        Grid::new(self.n, self.extent)
    }
}

fn default_width() -> f64 {
    0.3
}
fn default_shell_radius() -> f64 {
    1.2
}
fn default_wavevector() -> [f64; 3] {
    [std::f64::consts::PI, 0.0, 0.0]
}

/// Initial data at t = 0, applied to every component.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize, Default)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum InitialData {
    #[default]
    Zero,
    /// Φ = A exp(−|x − c|²/δ²), ∂tΦ = 0.
    Gaussian {
        #[serde(default = "one")]
        amplitude: f64,
        #[serde(default)]
        center: [f64; 3],
        #[serde(default = "default_width")]
        width: f64,
    },
    /// Outgoing spherical shell (F(r − t) − F(−r − t))/r with
    /// F(s) = A exp(−(s − s0)²/δ²).
    OutgoingShell {
        #[serde(default = "one")]
        amplitude: f64,
        #[serde(default = "default_shell_radius")]
        radius: f64,
        #[serde(default = "default_width")]
        width: f64,
    },
    /// Φ = A sin(k·x − |k|t).
    PlaneWave {
        #[serde(default = "one")]
        amplitude: f64,
        #[serde(default = "default_wavevector")]
        wavevector: [f64; 3],
    },
    /// Manufactured target; the matching source is added automatically.
    Manufactured(ManufacturedConfig),
}

fn shell_value(a: f64, s0: f64, d: f64, t: f64, x: [f64; 3]) -> [f64; 2] {
    let f = |s: f64| a * (-((s - s0) / d).powi(2)).exp();
    let fp = |s: f64| -2.0 * (s - s0) / (d * d) * f(s);
    let r = (x[0] * x[0] + x[1] * x[1] + x[2] * x[2]).sqrt();
    if r < 1e-8 {
        let fpp = |s: f64| (4.0 * (s - s0).powi(2) / d.powi(4) - 2.0 / (d * d)) * f(s);
        return [2.0 * fp(-t), -2.0 * fpp(-t)];
    }
    [(f(r - t) - f(-r - t)) / r, (-fp(r - t) + fp(-r - t)) / r]
}

impl InitialData {
    /// Closed-form solution of the flat source-free equation, when known.
    pub fn flat_solution(&self) -> Option<Box<ExactSolution>> {
        match self.clone() {
            InitialData::Zero => Some(Box::new(|_, _, _, _| [0.0, 0.0])),
            InitialData::OutgoingShell { amplitude, radius, width } => {
                Some(Box::new(move |t, _, _, x| shell_value(amplitude, radius, width, t, x)))
            }
            InitialData::PlaneWave { amplitude, wavevector: k } => {
                let w = (k[0] * k[0] + k[1] * k[1] + k[2] * k[2]).sqrt();
                Some(Box::new(move |t, _, _, x| {
                    let ph = k[0] * x[0] + k[1] * x[1] + k[2] * x[2] - w * t;
                    [amplitude * ph.sin(), -amplitude * w * ph.cos()]
                }))
            }
            _ => None,
        }
    }

    fn validate(&self) -> Result<()> {
        match self {
            InitialData::Gaussian { width, .. } | InitialData::OutgoingShell { width, .. } if !(*width > 0.0) => {
                Err(Error::Invalid("initial data width must be > 0".into()))
            }
            InitialData::Manufactured(m) => m.validate(),
            _ => Ok(()),
        }
    }

    /// (Φ, Π) at t = 0.
    pub fn build(&self, grid: Grid, rank: usize, channels: usize) -> (GridField<f64>, GridField<f64>) {
        let value = |s: usize, c: usize, x: [f64; 3]| -> [f64; 2] {
            match self {
                InitialData::Zero => [0.0, 0.0],
                InitialData::Gaussian { amplitude, center, width } => {
                    let d2: f64 = (0..3).map(|i| (x[i] - center[i]).powi(2)).sum();
                    [amplitude * (-d2 / (width * width)).exp(), 0.0]
                }
                InitialData::OutgoingShell { amplitude, radius, width } => shell_value(*amplitude, *radius, *width, 0.0, x),
                InitialData::PlaneWave { .. } => self.flat_solution().expect("closed form")(0.0, s, c, x),
                InitialData::Manufactured(m) => Target::from_config(m).expect("validated").value(0.0, s, c, x),
            }
        };
        let phi = GridField::from_fn(grid, rank, channels, 0.0, |s, c, x| value(s, c, x)[0]);
        let pi = GridField::from_fn(grid, rank, channels, 0.0, |s, c, x| value(s, c, x)[1]);
        (phi, pi)
    }
}

/// A monitored field given by a multi-index and an optional frame component.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ComponentConfig {
    /// Comma-separated generator names, empty for Φ itself.
    #[serde(default)]
    pub index: String,
    #[serde(default)]
    pub component: Option<String>,
}

impl ComponentConfig {
    pub fn spec(&self) -> Result<ComponentSpec> {
        let index = MultiIndex::parse(&self.index)?;
        let component = match &self.component {
            None => None,
            Some(s) => Some(FrameVector::parse(s).ok_or_else(|| Error::Invalid(format!("unknown frame vector {s:?}")))?),
        };
        Ok(ComponentSpec { index, component })
    }

    pub fn label(&self) -> String {
        let idx = if self.index.is_empty() { "Phi".to_string() } else { format!("L[{}]Phi", self.index) };
        match &self.component {
            None => idx,
            Some(c) => format!("{idx}.{c}"),
        }
    }
}

fn default_q0() -> f64 {
    -2.0
}
fn default_gamma() -> f64 {
    0.5
}
fn default_mu() -> f64 {
    -0.25
}
fn default_ball() -> f64 {
    0.25
}
fn default_components() -> Vec<ComponentConfig> {
    vec![ComponentConfig { index: String::new(), component: None }]
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MonitorConfig {
    /// Inner cone r = t + q0 of the exterior region.
    #[serde(default = "default_q0")]
    pub q0: f64,
    #[serde(default = "default_gamma")]
    pub gamma: f64,
    #[serde(default = "default_mu")]
    pub mu: f64,
    /// Radius of the excised ball around the spatial origin.
    #[serde(default = "default_ball")]
    pub origin_ball_radius: f64,
    #[serde(default = "default_components")]
    pub components: Vec<ComponentConfig>,
    /// Also integrate the energy-estimate terms.
    #[serde(default)]
    pub estimate: bool,
}

impl Default for MonitorConfig {
    fn default() -> Self {
        Self {
            q0: default_q0(),
            gamma: default_gamma(),
            mu: default_mu(),
            origin_ball_radius: default_ball(),
            components: default_components(),
            estimate: false,
        }
    }
}

impl MonitorConfig {
    pub fn weights(&self) -> Result<WeightParams> {
        WeightParams::new(self.gamma, self.mu)
    }

    pub fn region(&self) -> ExteriorRegion {
        ExteriorRegion::new(self.q0, self.origin_ball_radius)
    }
}

/// Full description of one run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub grid: GridConfig,
    #[serde(default)]
    pub rank: usize,
    #[serde(default = "one_usize")]
    pub channels: usize,
    /// Start of the monitored window.
    #[serde(default)]
    pub t1: f64,
    /// End of the run.
    pub t2: f64,
    #[serde(default = "default_cfl")]
    pub cfl: f64,
    #[serde(default)]
    pub background: BackgroundFamily,
    #[serde(default)]
    pub source: SourceSpec,
    #[serde(default)]
    pub initial: InitialData,
    #[serde(default)]
    pub boundary: Boundary,
    #[serde(default)]
    pub monitor: MonitorConfig,
    /// Times at which to keep a copy of (Φ, Π).
    #[serde(default)]
    pub snapshots: Vec<f64>,
}

impl ExperimentConfig {
    pub fn new(grid: GridConfig, t1: f64, t2: f64) -> Self {
        Self {
            grid,
            rank: 0,
            channels: 1,
            t1,
            t2,
            cfl: CFL_LIMIT,
            background: BackgroundFamily::Zero,
            source: SourceSpec::default(),
            initial: InitialData::Zero,
            boundary: Boundary::Sommerfeld,
            monitor: MonitorConfig::default(),
            snapshots: Vec::new(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.grid.build()?;
        if !(self.cfl > 0.0 && self.cfl <= CFL_LIMIT) {
            return Err(Error::Invalid(format!("cfl must be in (0, {CFL_LIMIT}]")));
        }
        if !(self.t1 >= 0.0 && self.t2 > self.t1) {
            return Err(Error::Invalid("times must satisfy 0 <= t1 < t2".into()));
        }
        if self.rank > 1 || self.channels == 0 {
            return Err(Error::Invalid("rank must be 0 or 1 and channels >= 1".into()));
        }
        self.background.validate()?;
        self.initial.validate()?;
        self.monitor.weights()?;
        if !self.source.is_empty() {
            if self.rank != 1 {
                return Err(Error::Invalid("source terms need a rank-1 field".into()));
            }
            self.source.validate(self.channels)?;
        }
        if let InitialData::Manufactured(m) = &self.initial {
            if m.rank != self.rank || m.channels != self.channels {
                return Err(Error::Invalid("manufactured target shape differs from the field shape".into()));
            }
            if !self.source.is_empty() {
                return Err(Error::Invalid("manufactured runs take no extra source terms".into()));
            }
        }
        if self.boundary == Boundary::Exact && self.exact_solution().is_none() {
            return Err(Error::Invalid("exact boundary needs plane-wave, shell, zero or manufactured data".into()));
        }
        for c in &self.monitor.components {
            c.spec()?;
        }
        Ok(())
    }

    /// Known solution of this configuration, if any.
    pub fn exact_solution(&self) -> Option<Box<ExactSolution>> {
        match &self.initial {
            InitialData::Manufactured(m) => {
                let target = Target::from_config(m).ok()?;
                Some(Box::new(move |t, s, c, x| target.value(t, s, c, x)))
            }
            d if self.background == BackgroundFamily::Zero && self.source.is_empty() => d.flat_solution(),
            _ => None,
        }
    }
}

/// One line of the JSON-lines run log.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StepLog {
    pub step: usize,
    pub t: f64,
    pub dt: f64,
    pub cfl: f64,
    pub max_abs_phi: f64,
    /// ∫ T_tt w̃ of each monitored component, when monitored at this step.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub monitors: Option<Vec<f64>>,
}

#[derive(Clone, Debug)]
pub struct MonitorSeries {
    pub label: String,
    pub spec: ComponentSpec,
    pub energy: EnergySeries,
    pub estimate: Option<EstimateSeries>,
}

pub struct ExperimentOutput {
    pub monitors: Vec<MonitorSeries>,
    pub log: Vec<StepLog>,
    pub snapshots: Vec<(RunState, Option<GridField<f64>>)>,
    pub final_state: RunState,
    /// Step sizes before and inside the monitored window.
    pub dt: (f64, f64),
    /// L² error against the known solution at the final time, with the norm of that solution.
    pub final_error: Option<(f64, f64)>,
}

struct Monitors {
    region: ExteriorRegion,
    params: WeightParams,
    series: Vec<MonitorSeries>,
}

impl Monitors {
    fn record(&mut self, solver: &Solver<'_>, state: &RunState, bg: &dyn Perturbation) -> Result<Vec<f64>> {
        let (phi, pi) = solver.prepared(state);
        let source = solver.source_at(state)?;
        let mut out = Vec::new();
        for m in self.series.iter_mut() {
            let fields = SliceFields::build(&phi, &pi, source.as_ref(), bg, &m.spec)?;
            let slice = Slice::new(&fields, bg);
            let terms = slice_terms(&slice, &self.region, &self.params)?;
            out.push(terms.t_tt_w_tilde);
            m.energy.push(terms);
            if let Some(e) = m.estimate.as_mut() {
                e.push(estimate_slice_terms(&slice, &self.region, &self.params)?);
            }
        }
        Ok(out)
    }
}

/// Run a configuration: evolve over [0, t1] freely, then over [t1, t2] with an
/// even number of equal steps, monitoring every step of the window.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ExperimentOutput> {
    cfg.validate()?;
    let grid = cfg.grid.build()?;
    let bg = cfg.background.build()?;
    let exact = cfg.exact_solution();
    let manufactured = match &cfg.initial {
        InitialData::Manufactured(m) => Some(ManufacturedSource::new(Target::from_config(m)?, grid)),
        _ => None,
    };
    let forcing: &dyn Forcing = match &manufactured {
        Some(m) => m,
        None if cfg.source.is_empty() => &NoForcing,
        None => &cfg.source,
    };
    let solver = Solver::new(grid, &bg, forcing, cfg.boundary, exact.as_deref())?;
    let (phi, pi) = cfg.initial.build(grid, cfg.rank, cfg.channels);
    let mut state = RunState::new(phi, pi)?;

    let dt_max = cfg.cfl * grid.dx() / solver.max_speed_over(0.0, cfg.t2)?;
    let n1 = (cfg.t1 / dt_max - 1e-9).ceil().max(0.0) as usize;
    let mut n2 = ((cfg.t2 - cfg.t1) / dt_max - 1e-9).ceil().max(2.0) as usize;
    n2 += n2 % 2;
    let dt1 = if n1 > 0 { cfg.t1 / n1 as f64 } else { 0.0 };
    let dt2 = (cfg.t2 - cfg.t1) / n2 as f64;

    let mut monitors = Monitors {
        region: cfg.monitor.region(),
        params: cfg.monitor.weights()?,
        series: cfg
            .monitor
            .components
            .iter()
            .map(|c| {
                Ok(MonitorSeries {
                    label: c.label(),
                    spec: c.spec()?,
                    energy: EnergySeries::new(),
                    estimate: cfg.monitor.estimate.then(EstimateSeries::default),
                })
            })
            .collect::<Result<_>>()?,
    };
    let mut log = Vec::new();
    let mut snapshots = Vec::new();
    let mut pending: Vec<f64> = cfg.snapshots.clone();
    pending.sort_by(|a, b| a.total_cmp(b));
    let mut take_snapshots = |state: &RunState, snaps: &mut Vec<(RunState, Option<GridField<f64>>)>| -> Result<()> {
        while let Some(&ts) = pending.first() {
            if state.time() + 1e-9 < ts {
                break;
            }
            pending.remove(0);
            snaps.push((state.clone(), solver.source_at(state)?));
        }
        Ok(())
    };

    let push_log = |log: &mut Vec<StepLog>, s: &RunState, dt: f64, mon: Option<Vec<f64>>| -> Result<()> {
        log.push(StepLog {
            step: s.step,
            t: s.time(),
            dt,
            cfl: solver.cfl(s.time(), dt)?,
            max_abs_phi: s.phi.max_abs(),
            monitors: mon,
        });
        Ok(())
    };

    take_snapshots(&state, &mut snapshots)?;
    let mon0 = if n1 == 0 { Some(monitors.record(&solver, &state, &bg)?) } else { None };
    push_log(&mut log, &state, if n1 > 0 { dt1 } else { dt2 }, mon0)?;
    for _ in 0..n1 {
        state = solver.step(&state, dt1)?;
        take_snapshots(&state, &mut snapshots)?;
        push_log(&mut log, &state, dt1, None)?;
    }
    if n1 > 0 {
        // land exactly on t1
        state.phi.set_time(cfg.t1);
        state.pi.set_time(cfg.t1);
        let m = monitors.record(&solver, &state, &bg)?;
        log.last_mut().expect("logged").monitors = Some(m);
    }
    for k in 0..n2 {
        state = solver.step(&state, dt2)?;
        let t = cfg.t1 + (k + 1) as f64 * dt2;
        state.phi.set_time(t);
        state.pi.set_time(t);
        take_snapshots(&state, &mut snapshots)?;
        let m = monitors.record(&solver, &state, &bg)?;
        push_log(&mut log, &state, dt2, Some(m))?;
    }
    let final_error = exact.as_ref().map(|ex| {
        let t = state.time();
        state.phi.l2_error(|s, c, x| ex(t, s, c, x)[0])
    });
    Ok(ExperimentOutput { monitors: monitors.series, log, snapshots, final_state: state, dt: (dt1, dt2), final_error })
}

/// Errors at several resolutions and the orders between consecutive ones.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceReport {
    pub ns: Vec<usize>,
    pub errors: Vec<f64>,
    pub orders: Vec<f64>,
}

impl ConvergenceReport {
    pub fn from_errors(ns: &[usize], errors: Vec<f64>) -> Self {
        let orders = (1..ns.len())
            .map(|i| (errors[i - 1] / errors[i]).ln() / (ns[i] as f64 / ns[i - 1] as f64).ln())
            .collect();
        Self { ns: ns.to_vec(), errors, orders }
    }

    /// Least-squares slope of −log(error) against log(N).
    pub fn fitted_order(&self) -> f64 {
        let xs: Vec<f64> = self.ns.iter().map(|&n| (n as f64).ln()).collect();
        let ys: Vec<f64> = self.errors.iter().map(|e| -e.ln()).collect();
        let n = xs.len() as f64;
        let mx = xs.iter().sum::<f64>() / n;
        let my = ys.iter().sum::<f64>() / n;
        let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
        let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
        sxy / sxx
    }

    pub fn min_order(&self) -> f64 {
        self.orders.iter().cloned().fold(f64::INFINITY, f64::min)
    }
}

/// Plane wave sin(πx − πt) on the periodic cube [−1, 1]³, L² error at `t_end`.
pub fn plane_wave_study(ns: &[usize], t_end: f64) -> Result<ConvergenceReport> {
    let mut errors = Vec::new();
    for &n in ns {
        let mut cfg = ExperimentConfig::new(GridConfig { n, extent: 1.0 }, 0.0, t_end);
        cfg.initial = InitialData::PlaneWave { amplitude: 1.0, wavevector: default_wavevector() };
        cfg.boundary = Boundary::Periodic;
        errors.push(evolve_error(&cfg)?);
    }
    Ok(ConvergenceReport::from_errors(ns, errors))
}

/// Manufactured-solution study on one background; L² error at `t_end`.
pub fn manufactured_study(
    target: &ManufacturedConfig,
    background: &BackgroundFamily,
    extent: f64,
    ns: &[usize],
    t_end: f64,
) -> Result<ConvergenceReport> {
    let mut errors = Vec::new();
    for &n in ns {
        let mut cfg = ExperimentConfig::new(GridConfig { n, extent }, 0.0, t_end);
        cfg.rank = target.rank;
        cfg.channels = target.channels;
        cfg.background = background.clone();
        cfg.initial = InitialData::Manufactured(target.clone());
        cfg.boundary = Boundary::Sommerfeld;
        errors.push(evolve_error(&cfg)?);
    }
    Ok(ConvergenceReport::from_errors(ns, errors))
}

/// Evolve without monitors and return the final L² error.
pub fn evolve_error(cfg: &ExperimentConfig) -> Result<f64> {
    cfg.validate()?;
    let grid = cfg.grid.build()?;
    let bg = cfg.background.build()?;
    let exact = cfg.exact_solution().ok_or_else(|| Error::Invalid("no exact solution for this configuration".into()))?;
    let manufactured = match &cfg.initial {
        InitialData::Manufactured(m) => Some(ManufacturedSource::new(Target::from_config(m)?, grid)),
        _ => None,
    };
    let forcing: &dyn Forcing = match &manufactured {
        Some(m) => m,
        None => &NoForcing,
    };
    let solver = Solver::new(grid, &bg, forcing, cfg.boundary, Some(exact.as_ref()))?;
    let (phi, pi) = cfg.initial.build(grid, cfg.rank, cfg.channels);
    let state = RunState::new(phi, pi)?;
    let dt_max = cfg.cfl * grid.dx() / solver.max_speed_over(0.0, cfg.t2)?;
    let steps = (cfg.t2 / dt_max - 1e-9).ceil().max(1.0) as usize;
    let state = solver.advance(state, cfg.t2, steps)?;
    let t = state.time();
    Ok(state.phi.l2_error(|s, c, x| exact(t, s, c, x)[0]).0)
}
