//! JSON run configuration.
//!
//! Every key is optional except where a mode needs it; unknown keys are
//! rejected. Numeric constraints are checked right after parsing.
//!
//! Multi-index literals (`multi_indices`, `commutator.multi_indices`) are
//! comma-separated generator names, applied so that the leftmost acts last:
//!
//! ```text
//! index     := "" | "∅" | generator ("," generator)*
//! generator := "S"                      scaling
//!            | "P" axis                 translation, axis in t 0 1 2 3 x1 x2 x3
//!            | "Z" digit digit          Lorentz generator Z_ab with a < b <= 3
//! ```
//!
//! Whitespace inside a generator is ignored, so `"P t"` and `"Pt"` agree.
//! Frame components are `L`, `Lbar`, `E1`, `E2`.

use std::path::Path;

use nullframe::certify::CertifyOptions;
use nullframe::evolve::{
    BackgroundFamily, Boundary, ComponentConfig, ExperimentConfig, GridConfig, InitialData, MonitorConfig,
    NoForcing, Solver, SourceSpec, CFL_LIMIT,
};
use nullframe::geometry::FrameVector;
use nullframe::vecfields::MultiIndex;
use serde::{Deserialize, Serialize};

use crate::CliError;

/// Largest background amplitude accepted.
pub const EPSILON_MAX: f64 = 0.3;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    Certify,
    Conserve,
    Evolve,
    Estimate,
    Commutator,
}

impl Mode {
    pub fn name(self) -> &'static str {
        match self {
            Mode::Certify => "certify",
            Mode::Conserve => "conserve",
            Mode::Evolve => "evolve",
            Mode::Estimate => "estimate",
            Mode::Commutator => "commutator",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Times {
    #[serde(default)]
    pub t1: f64,
    #[serde(default = "default_t2")]
    pub t2: f64,
    /// Courant number; the default is the solver limit.
    #[serde(default)]
    pub cfl: Option<f64>,
    /// Fixed step size, converted to a Courant number per resolution.
    #[serde(default)]
    pub dt: Option<f64>,
}

impl Default for Times {
    fn default() -> Self {
        Self { t1: 0.0, t2: default_t2(), cfl: None, dt: None }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Weights {
    #[serde(default = "default_gamma")]
    pub gamma: f64,
    #[serde(default = "default_mu")]
    pub mu: f64,
}

impl Default for Weights {
    fn default() -> Self {
        Self { gamma: default_gamma(), mu: default_mu() }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Region {
    #[serde(default = "default_q0")]
    pub q0: f64,
    #[serde(default = "default_ball")]
    pub origin_ball_radius: f64,
}

impl Default for Region {
    fn default() -> Self {
        Self { q0: default_q0(), origin_ball_radius: default_ball() }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConserveOptions {
    #[serde(default = "default_resolutions")]
    pub resolutions: Vec<usize>,
}

impl Default for ConserveOptions {
    fn default() -> Self {
        Self { resolutions: default_resolutions() }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FrameSetName {
    Tangential,
    Full,
}

/// Test family and sampling for the commutator mode.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CommutatorOptions {
    #[serde(default = "default_commutator_indices")]
    pub multi_indices: Vec<String>,
    /// Components Φ_V to commute; defaults to the frame set.
    #[serde(default)]
    pub components: Vec<String>,
    #[serde(default = "default_frame_set")]
    pub frame_set: FrameSetName,
    /// Angular resolution of the sample lattice.
    #[serde(default = "default_lattice")]
    pub lattice: usize,
    /// Number of lattice maxima refined by local search.
    #[serde(default = "default_polish")]
    pub polish: usize,
    #[serde(default = "default_degree")]
    pub degree: usize,
    #[serde(default = "default_sigma")]
    pub sigma: f64,
    #[serde(default = "default_h_amplitude")]
    pub h_amplitude: f64,
    #[serde(default = "one")]
    pub phi_amplitude: f64,
    /// Random polynomial pairs for the exact-expansion residual.
    #[serde(default = "default_identity_pairs")]
    pub identity_pairs: usize,
}

impl Default for CommutatorOptions {
    fn default() -> Self {
        serde_json::from_str("{}").expect("defaults")
    }
}

/// Full configuration file.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Config {
    #[serde(default)]
    pub mode: Option<Mode>,
    #[serde(default)]
    pub seed: u64,
    /// Output directory, relative to the working directory.
    #[serde(default)]
    pub output: Option<String>,
    #[serde(default = "default_grid")]
    pub grid: GridConfig,
    #[serde(default)]
    pub times: Times,
    #[serde(default)]
    pub weights: Weights,
    #[serde(default)]
    pub region: Region,
    #[serde(default)]
    pub background: BackgroundFamily,
    #[serde(default)]
    pub source: SourceSpec,
    #[serde(default)]
    pub initial: InitialData,
    #[serde(default)]
    pub boundary: Boundary,
    #[serde(default)]
    pub rank: usize,
    #[serde(default = "one_usize")]
    pub channels: usize,
    /// Monitored ℒ_{Z^I} of the field.
    #[serde(default = "default_indices")]
    pub multi_indices: Vec<String>,
    /// Monitored frame components of each ℒ_{Z^I}Φ; empty means the whole field.
    #[serde(default)]
    pub frame_components: Vec<String>,
    #[serde(default)]
    pub snapshots: Vec<f64>,
    #[serde(default)]
    pub certify: CertifyOptions,
    #[serde(default)]
    pub conserve: ConserveOptions,
    #[serde(default)]
    pub commutator: CommutatorOptions,
}

impl Default for Config {
    fn default() -> Self {
        serde_json::from_str("{}").expect("defaults")
    }
}

fn one() -> f64 {
    1.0
}
fn one_usize() -> usize {
    1
}
fn default_t2() -> f64 {
    1.0
}
fn default_gamma() -> f64 {
    MonitorConfig::default().gamma
}
fn default_mu() -> f64 {
    MonitorConfig::default().mu
}
fn default_q0() -> f64 {
    MonitorConfig::default().q0
}
fn default_ball() -> f64 {
    MonitorConfig::default().origin_ball_radius
}
fn default_grid() -> GridConfig {
    GridConfig { n: 32, extent: 4.0 }
}
fn default_resolutions() -> Vec<usize> {
    vec![32, 48, 64]
}
fn default_indices() -> Vec<String> {
    vec![String::new()]
}
fn default_commutator_indices() -> Vec<String> {
    vec!["S".into(), "Z01".into(), "Z01,S".into()]
}
fn default_frame_set() -> FrameSetName {
    FrameSetName::Tangential
}
fn default_lattice() -> usize {
    6
}
fn default_polish() -> usize {
    8
}
fn default_degree() -> usize {
    2
}
fn default_sigma() -> f64 {
    2.0
}
fn default_h_amplitude() -> f64 {
    0.05
}
fn default_identity_pairs() -> usize {
    3
}

fn constraint(msg: impl Into<String>) -> CliError {
    CliError::Constraint(msg.into())
}

/// Parse JSON text; schema errors carry the path of the offending field.
pub fn parse_str(text: &str) -> Result<Config, CliError> {
    let de = &mut serde_json::Deserializer::from_str(text);
    let cfg: Config = serde_path_to_error::deserialize(de).map_err(|e| {
        let path = e.path().to_string();
        CliError::Schema { path, message: e.into_inner().to_string() }
    })?;
    cfg.validate()?;
    Ok(cfg)
}

pub fn parse_config(path: &Path) -> Result<Config, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Schema { path: ".".into(), message: format!("cannot read {}: {e}", path.display()) })?;
    parse_str(&text)
}

impl Config {
    /// Numeric and cross-field constraints.
    pub fn validate(&self) -> Result<(), CliError> {
        let w = &self.weights;
        if !(w.gamma > 0.0) {
            return Err(constraint("gamma must be > 0"));
        }
        if !(w.mu < 0.0) {
            return Err(constraint("mu must be < 0"));
        }
        let eps = self.background.epsilon();
        if !(eps.abs() <= EPSILON_MAX) {
            return Err(constraint(format!("epsilon must be <= {EPSILON_MAX}")));
        }
        match (self.times.cfl, self.times.dt) {
            (Some(_), Some(_)) => return Err(constraint("give either cfl or dt, not both")),
            (Some(c), None) if !(c > 0.0 && c <= CFL_LIMIT) => {
                return Err(constraint(format!("cfl must be in (0, {CFL_LIMIT}]")))
            }
            (None, Some(dt)) if !(dt > 0.0) => return Err(constraint("dt must be > 0")),
            _ => {}
        }
        if !(self.times.t1 >= 0.0 && self.times.t2 > self.times.t1) {
            return Err(constraint("times must satisfy 0 <= t1 < t2"));
        }
        if !(self.region.origin_ball_radius > 0.0) {
            return Err(constraint("origin_ball_radius must be > 0"));
        }
        if self.conserve.resolutions.len() < 2 {
            return Err(constraint("conserve.resolutions needs at least two entries"));
        }
        self.monitor_components()?;
        let c = &self.commutator;
        for s in &c.multi_indices {
            MultiIndex::parse(s).map_err(|e| constraint(format!("commutator.multi_indices: {e}")))?;
        }
        self.commutator_components()?;
        if c.lattice < 2 || !(c.sigma > 0.0) || c.degree == 0 {
            return Err(constraint("commutator needs lattice >= 2, sigma > 0 and degree >= 1"));
        }
        self.experiment(self.grid.n)?.validate().map_err(|e| constraint(e.to_string()))?;
        Ok(())
    }

    fn monitor_components(&self) -> Result<Vec<ComponentConfig>, CliError> {
        let mut out = Vec::new();
        for s in &self.multi_indices {
            MultiIndex::parse(s).map_err(|e| constraint(format!("multi_indices: {e}")))?;
            if self.frame_components.is_empty() {
                out.push(ComponentConfig { index: s.clone(), component: None });
            }
            for v in &self.frame_components {
                FrameVector::parse(v).ok_or_else(|| constraint(format!("unknown frame component {v:?}")))?;
                out.push(ComponentConfig { index: s.clone(), component: Some(v.clone()) });
            }
        }
        if out.is_empty() {
            return Err(constraint("multi_indices must not be empty"));
        }
        Ok(out)
    }

    pub fn frame_set(&self) -> nullframe::estimates::FrameSet {
        match self.commutator.frame_set {
            FrameSetName::Tangential => nullframe::estimates::FrameSet::Tangential,
            FrameSetName::Full => nullframe::estimates::FrameSet::Full,
        }
    }

    /// Components V of the commutator mode, checked against the frame set.
    pub fn commutator_components(&self) -> Result<Vec<FrameVector>, CliError> {
        let set = self.frame_set();
        if self.commutator.components.is_empty() {
            return Ok(set.vectors().to_vec());
        }
        self.commutator
            .components
            .iter()
            .map(|s| {
                let v = FrameVector::parse(s).ok_or_else(|| constraint(format!("unknown frame component {s:?}")))?;
                if !set.contains(v) {
                    return Err(constraint(format!("component {s} is not in the {:?} frame set", set)));
                }
                Ok(v)
            })
            .collect()
    }

    /// The experiment at resolution `n`, with a fixed step converted to a Courant number.
    pub fn experiment(&self, n: usize) -> Result<ExperimentConfig, CliError> {
        let grid = GridConfig { n, extent: self.grid.extent };
        let mut e = ExperimentConfig::new(grid, self.times.t1, self.times.t2);
        e.rank = self.rank;
        e.channels = self.channels;
        e.background = self.background.clone();
        e.source = self.source.clone();
        e.initial = self.initial.clone();
        e.boundary = self.boundary;
        e.snapshots = self.snapshots.clone();
        e.monitor = MonitorConfig {
            q0: self.region.q0,
            gamma: self.weights.gamma,
            mu: self.weights.mu,
            origin_ball_radius: self.region.origin_ball_radius,
            components: self.monitor_components()?,
            estimate: false,
        };
        e.cfl = match (self.times.cfl, self.times.dt) {
            (Some(c), _) => c,
            (None, Some(dt)) => {
                let g = grid.build().map_err(|e| constraint(e.to_string()))?;
                let bg = self.background.build().map_err(|e| constraint(e.to_string()))?;
                let solver = Solver::new(g, &bg, &NoForcing, Boundary::Sommerfeld, None)
                    .map_err(|e| constraint(e.to_string()))?;
                let speed = solver.max_speed_over(0.0, self.times.t2).map_err(|e| constraint(e.to_string()))?;
                let c = dt * speed / g.dx();
                if c > CFL_LIMIT {
                    return Err(constraint(format!("dt = {dt} gives cfl {c:.4} at N = {n}, above {CFL_LIMIT}")));
                }
                c
            }
            (None, None) => CFL_LIMIT,
        };
        Ok(e)
    }
}

/// Resolutions for `--refine K`: N, 1.5N, 2N, ... rounded to even.
pub fn refinement_levels(n: usize, k: usize) -> Vec<usize> {
    (0..k.max(1)).map(|j| ((n * (2 + j)) / 4) * 2).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_config_gets_defaults() {
        let c = parse_str(r#"{"mode":"certify"}"#).unwrap();
        assert_eq!(c.mode, Some(Mode::Certify));
        assert_eq!(c.weights.gamma, 0.5);
        assert_eq!(c.weights.mu, -0.25);
        assert_eq!(c.region.q0, -2.0);
        assert_eq!(c.conserve.resolutions, vec![32, 48, 64]);
    }

    #[test]
    fn constraint_messages() {
        let msg = |s: &str| match parse_str(s) {
            Err(CliError::Constraint(m)) => m,
            other => panic!("expected a constraint error, got {other:?}"),
        };
        assert_eq!(msg(r#"{"weights":{"gamma":-1}}"#), "gamma must be > 0");
        assert_eq!(msg(r#"{"weights":{"mu":0.1}}"#), "mu must be < 0");
        assert!(msg(r#"{"background":{"family":"static_bump","epsilon":0.5}}"#).contains("epsilon"));
        assert!(msg(r#"{"times":{"cfl":0.6}}"#).contains("cfl"));
        assert!(msg(r#"{"multi_indices":["Z10"]}"#).contains("Z10"));
    }

    #[test]
    fn schema_errors_carry_the_path() {
        match parse_str(r#"{"weights":{"gamma":"big"}}"#) {
            Err(CliError::Schema { path, .. }) => assert_eq!(path, "weights.gamma"),
            other => panic!("{other:?}"),
        }
        match parse_str(r#"{"grid":{"n":32,"extent":4,"colour":1}}"#) {
            Err(CliError::Schema { path, .. }) => assert!(path.starts_with("grid"), "{path}"),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn dt_is_converted_to_cfl() {
        let c = parse_str(r#"{"times":{"t2":1,"dt":0.05}}"#).unwrap();
        let e = c.experiment(32).unwrap();
        // flat speed is 1 and dx = 2X/N
        assert!((e.cfl - 0.05 / (8.0 / 32.0)).abs() < 1e-12);
        assert!(parse_str(r#"{"times":{"t2":1,"dt":1.0}}"#).is_err());
    }

    #[test]
    fn refinement_ladder() {
        assert_eq!(refinement_levels(32, 3), vec![32, 48, 64]);
        assert_eq!(refinement_levels(20, 2), vec![20, 30]);
    }
}
