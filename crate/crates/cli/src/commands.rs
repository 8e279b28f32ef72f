//! Mode dispatch. Each mode writes its artifacts and returns a JSON summary.

use std::path::PathBuf;

use nullframe::certify::{certify, random_point};
use nullframe::energy::{BudgetReport, SliceTerms};
use nullframe::estimates::{
    check_pair, decay_constants, decay_lattice, enveloped_pair, exterior_lattice, gradient_frame_bound_check,
    in_exterior_set, lbar_decoupling_defect, measure_bound_polished, random_pair, CommutatorReport, DecayConstants,
    Enveloped, EstimateReport,
};
use nullframe::evolve::{run_experiment, BackgroundFamily, ConvergenceReport, ExperimentOutput, StepLog};
use nullframe::geometry::{FrameVector, Variance};
use nullframe::vecfields::{CHatTable, MultiIndex};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use serde_json::{json, Value};

use crate::config::{refinement_levels, Config, Mode};
use crate::output::{num, OutputDir};
use crate::{CliError, RunOptions};

/// (id, label) of every slice integral, in CSV column order.
pub const SLICE_COLUMNS: [(&str, &str); 7] = [
    ("t_tt_w_tilde", "∫ T_tt w̃ over the exterior slice"),
    ("lt_w_tilde_prime", "∫ (T_tt + T_rt) w̃′ over the exterior slice"),
    ("div_w_tilde", "∫ (∂^μ T_μt) w̃ over the exterior slice"),
    ("energy_w", "∫ |∂Ψ|² w over the exterior slice"),
    ("energy_w_tilde", "∫ |∂Ψ|² w̃ over the exterior slice"),
    ("tangential_w_hat_prime", "∫ |∇̸Ψ|² ŵ′ over the exterior slice"),
    ("boundary", "inner boundary flux density ∫ r² T_Nt w̃ dω"),
];

fn slice_values(s: &SliceTerms) -> [f64; 7] {
    [
        s.t_tt_w_tilde,
        s.lt_w_tilde_prime,
        s.div_w_tilde,
        s.energy_w,
        s.energy_w_tilde,
        s.tangential_w_hat_prime,
        s.boundary,
    ]
}

fn budget_label(id: &str) -> &'static str {
    match id {
        "slice_t1" => "∫ T_tt w̃ on the first slice",
        "slice_t2" => "∫ T_tt w̃ on the last slice",
        "cone_flux" => "∫ T_{L̂t} w̃ over the inner boundary",
        "weight_derivative" => "∫∫ (T_tt + T_rt) w̃′",
        "divergence" => "∫∫ (∂^μ T_μt) w̃",
        "residual" => "|last + flux − first + weight derivative + divergence|",
        "relative_residual" => "residual / first slice",
        _ => "",
    }
}

fn estimate_label<'a>(id: &str, report: &'a EstimateReport) -> &'a str {
    match id {
        "lhs_slice_wtilde" => "∫ |∂Ψ|² w̃ on the last slice",
        "lhs_slice_w" => "∫ |∂Ψ|² w on the last slice",
        "lhs_tangential_flux" => "∫∫ |∇̸Ψ|² ŵ′",
        "lhs" => "left side: last slice plus tangential flux",
        "rhs_total" => "sum of the right-side terms",
        "implied_constant" => "left side / right side",
        _ => report.rhs.iter().find(|l| l.id == id).map(|l| l.label.as_str()).unwrap_or(""),
    }
}

fn term_label(id: &str) -> &'static str {
    match id {
        "lower_order_wave" => "Σ |ℒ_J □Φ_V| over shorter J",
        "good_factor_H_dPhi" => "(1+t+|q|)⁻¹ Σ |ℒ_J H| |∂ℒ_K Φ|",
        "bad_factor_HLL_dPhi_frame" => "(1+|q|)⁻¹ Σ |ℒ_J H_LL| |∂ℒ_K Φ_V′|, V′ in the frame set",
        _ => "",
    }
}

#[derive(Serialize)]
struct Event<'a> {
    event: &'a str,
    #[serde(flatten)]
    data: Value,
}

/// Run the mode with the command-line overrides; returns the summary document.
pub fn run(mode: Mode, cfg: &Config, opts: &RunOptions) -> Result<Value, CliError> {
    if let Some(m) = cfg.mode {
        if m != mode {
            return Err(CliError::Constraint(format!(
                "config mode {} differs from the requested mode {}",
                m.name(),
                mode.name()
            )));
        }
    }
    if opts.refine == Some(0) {
        return Err(CliError::Constraint("refine must be >= 1".into()));
    }
    let seed = opts.seed.unwrap_or(cfg.seed);
    let dir = opts.out.clone().or_else(|| cfg.output.as_ref().map(PathBuf::from)).unwrap_or_else(|| PathBuf::from("out"));
    let mut out = OutputDir::create(&dir)?;
    out.log(&Event { event: "start", data: json!({ "mode": mode.name(), "seed": seed }) })?;
    let result = match mode {
        Mode::Certify => run_certify(cfg, seed, &mut out),
        Mode::Conserve => run_conserve(cfg, seed, opts, &mut out),
        Mode::Evolve => run_evolve(cfg, seed, opts, &mut out),
        Mode::Estimate => run_estimate(cfg, seed, opts, &mut out),
        Mode::Commutator => run_commutator(cfg, seed, opts, &mut out),
    };
    match &result {
        Ok(_) => out.log(&Event { event: "finish", data: json!({ "status": "ok" }) })?,
        Err(e) => {
            let record = e.record(Some(mode));
            out.json("error.json", &record)?;
            out.log(&Event { event: "finish", data: serde_json::to_value(&record).unwrap_or(Value::Null) })?;
        }
    }
    result
}

fn resolutions(cfg: &Config, opts: &RunOptions, default: Vec<usize>) -> Vec<usize> {
    match opts.refine {
        Some(k) => refinement_levels(cfg.grid.n, k),
        None => default,
    }
}

fn run_certify(cfg: &Config, seed: u64, out: &mut OutputDir) -> Result<Value, CliError> {
    let report = certify(seed, &cfg.certify)?;
    out.json("certify.json", &report)?;
    let rows: Vec<Vec<String>> = report
        .checks
        .iter()
        .map(|c| {
            vec![
                c.id.clone(),
                c.description.clone(),
                c.samples.to_string(),
                num(c.max_residual),
                num(c.tolerance),
                c.passed.to_string(),
            ]
        })
        .collect();
    out.csv("certify.csv", &["id", "label", "samples", "max_residual", "tolerance", "passed"], &rows)?;
    for c in &report.checks {
        out.log(&Event { event: "check", data: serde_json::to_value(c).unwrap_or(Value::Null) })?;
    }
    if !report.passed {
        let failed: Vec<&str> = report.checks.iter().filter(|c| !c.passed).map(|c| c.id.as_str()).collect();
        return Err(CliError::Certification(format!("failed checks: {}", failed.join(", "))));
    }
    Ok(serde_json::to_value(&report).unwrap_or(Value::Null))
}

fn evolve_at(cfg: &Config, n: usize, estimate: bool, out: &mut OutputDir) -> Result<ExperimentOutput, CliError> {
    let mut e = cfg.experiment(n)?;
    e.monitor.estimate = estimate;
    out.log(&Event { event: "run", data: json!({ "n": n, "cfl": e.cfl, "t1": e.t1, "t2": e.t2 }) })?;
    let res = run_experiment(&e)?;
    let rows: Vec<Vec<String>> = res
        .monitors
        .iter()
        .flat_map(|m| {
            m.energy.terms.iter().map(move |s| {
                let mut r = vec![num(s.t), m.label.clone()];
                r.extend(slice_values(s).iter().map(|v| num(*v)));
                r
            })
        })
        .collect();
    let mut header = vec!["t", "monitor"];
    header.extend(SLICE_COLUMNS.iter().map(|c| c.0));
    out.csv(&format!("energy_n{n}.csv"), &header, &rows)?;
    let legend: Vec<Vec<String>> = SLICE_COLUMNS.iter().map(|(id, label)| vec![id.to_string(), label.to_string()]).collect();
    out.csv("energy_columns.csv", &["id", "label"], &legend)?;
    out.jsonl::<StepLog>(&format!("steps_n{n}.jsonl"), &res.log)?;
    Ok(res)
}

fn run_conserve(cfg: &Config, seed: u64, opts: &RunOptions, out: &mut OutputDir) -> Result<Value, CliError> {
    let ns = resolutions(cfg, opts, cfg.conserve.resolutions.clone());
    if ns.len() < 2 {
        return Err(CliError::Constraint("conserve needs at least two resolutions".into()));
    }
    let flat = cfg.background == BackgroundFamily::Zero && cfg.source.is_empty();
    let mut per_monitor: Vec<(String, Vec<BudgetReport>, f64)> = Vec::new();
    for &n in &ns {
        let res = evolve_at(cfg, n, false, out)?;
        for (k, m) in res.monitors.iter().enumerate() {
            let b = m.energy.budget(cfg.times.t1, cfg.times.t2)?;
            if per_monitor.len() <= k {
                per_monitor.push((m.label.clone(), Vec::new(), 0.0));
            }
            per_monitor[k].1.push(b);
            per_monitor[k].2 = per_monitor[k].2.max(m.energy.max_relative_increase());
        }
    }
    let mut rows = Vec::new();
    let mut monitors = Vec::new();
    for (label, budgets, growth) in &per_monitor {
        let conv = ConvergenceReport::from_errors(&ns, budgets.iter().map(|b| b.residual).collect());
        for (n, b) in ns.iter().zip(budgets) {
            for (id, v) in b.rows() {
                rows.push(vec![n.to_string(), label.clone(), id.to_string(), budget_label(id).to_string(), num(v)]);
            }
        }
        for (k, o) in conv.orders.iter().enumerate() {
            rows.push(vec![
                ns[k + 1].to_string(),
                label.clone(),
                "residual_order".into(),
                format!("observed order between N = {} and N = {}", ns[k], ns[k + 1]),
                num(*o),
            ]);
        }
        monitors.push(json!({
            "label": label,
            "budgets": budgets,
            "residual_convergence": conv,
            "fitted_order": conv.fitted_order(),
            "min_order": conv.min_order(),
            "flat_max_relative_increase": if flat { Some(*growth) } else { None },
        }));
    }
    out.csv("conserve.csv", &["n", "monitor", "id", "label", "value"], &rows)?;
    let summary = json!({ "seed": seed, "resolutions": ns, "flat_source_free": flat, "monitors": monitors });
    out.json("conserve.json", &summary)?;
    Ok(summary)
}

fn run_evolve(cfg: &Config, seed: u64, opts: &RunOptions, out: &mut OutputDir) -> Result<Value, CliError> {
    let ns = resolutions(cfg, opts, vec![cfg.grid.n]);
    let mut runs = Vec::new();
    for &n in &ns {
        let res = evolve_at(cfg, n, false, out)?;
        for (k, (state, _)) in res.snapshots.iter().enumerate() {
            let path = out.path(&format!("snapshot_n{n}_{k}.bin"));
            nullframe::fields::write_snapshot(&state.phi, &path)?;
        }
        let last = res.log.last();
        runs.push(json!({
            "n": n,
            "steps": last.map(|l| l.step).unwrap_or(0),
            "final_time": res.final_state.time(),
            "dt_before_window": res.dt.0,
            "dt_in_window": res.dt.1,
            "max_abs_phi": res.final_state.phi.max_abs(),
            "final_l2_error": res.final_error.map(|e| e.0),
            "exact_l2_norm": res.final_error.map(|e| e.1),
            "snapshots": res.snapshots.len(),
            "monitors": res.monitors.iter().map(|m| &m.label).collect::<Vec<_>>(),
        }));
    }
    let summary = json!({ "seed": seed, "runs": runs });
    out.json("evolve.json", &summary)?;
    Ok(summary)
}

fn run_estimate(cfg: &Config, seed: u64, opts: &RunOptions, out: &mut OutputDir) -> Result<Value, CliError> {
    let ns = resolutions(cfg, opts, vec![cfg.grid.n]);
    let mut rows = Vec::new();
    let mut constants: Vec<(String, Vec<f64>)> = Vec::new();
    let mut runs = Vec::new();
    for &n in &ns {
        let res = evolve_at(cfg, n, true, out)?;
        let mut reports = Vec::new();
        for (k, m) in res.monitors.iter().enumerate() {
            let series = m.estimate.as_ref().ok_or_else(|| CliError::Runtime("estimate series missing".into()))?;
            let r = series.report(cfg.times.t1, cfg.times.t2)?;
            for (id, v) in r.rows() {
                rows.push(vec![n.to_string(), m.label.clone(), id.clone(), estimate_label(&id, &r).to_string(), num(v)]);
            }
            if constants.len() <= k {
                constants.push((m.label.clone(), Vec::new()));
            }
            constants[k].1.push(r.implied_constant);
            reports.push(json!({ "label": m.label, "report": r }));
        }
        runs.push(json!({ "n": n, "monitors": reports }));
    }
    let variation: Vec<Value> = constants
        .iter()
        .map(|(label, cs)| {
            let lo = cs.iter().cloned().fold(f64::INFINITY, f64::min);
            let hi = cs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            json!({ "label": label, "implied_constants": cs, "relative_spread": (hi - lo) / hi.abs().max(f64::MIN_POSITIVE) })
        })
        .collect();
    out.csv("estimate.csv", &["n", "monitor", "id", "label", "value"], &rows)?;
    let summary = json!({ "seed": seed, "resolutions": ns, "runs": runs, "implied_constant_variation": variation });
    out.json("estimate.json", &summary)?;
    Ok(summary)
}

/// Sup of the exact-expansion residual for `i` over seeded polynomial pairs.
fn identity_residual(i: &MultiIndex, pairs: usize, rng: &mut ChaCha8Rng, chat: &CHatTable) -> Result<f64, CliError> {
    let mut worst: f64 = 0.0;
    for _ in 0..pairs {
        let (h, phi) = random_pair(rng, 2, 3, 3);
        let p = random_point(rng);
        let s = check_pair(h, phi, std::slice::from_ref(i), &[p], chat)?;
        if !s.exact_failures.is_empty() {
            return Ok(f64::INFINITY);
        }
        worst = worst.max(s.max_relative_residual);
    }
    Ok(worst)
}

fn run_commutator(cfg: &Config, seed: u64, opts: &RunOptions, out: &mut OutputDir) -> Result<Value, CliError> {
    let c = &cfg.commutator;
    let set = cfg.frame_set();
    let components = cfg.commutator_components()?;
    let indices: Vec<MultiIndex> =
        c.multi_indices.iter().map(|s| MultiIndex::parse(s)).collect::<Result<_, _>>()?;
    let lattices = match opts.refine {
        Some(k) => refinement_levels(c.lattice, k),
        None => vec![c.lattice],
    };
    let (h, phi) = enveloped_pair(seed, c.degree, c.h_amplitude, c.phi_amplitude, c.sigma);
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed);
    let psi = Enveloped::random(&mut rng, 0, &[], c.degree, c.phi_amplitude, c.sigma, false);
    let chat = CHatTable::new();
    let mut reports: Vec<Value> = Vec::new();
    let mut rows = Vec::new();
    for i in &indices {
        let residual = identity_residual(i, c.identity_pairs, &mut rng, &chat)?;
        for &v in &components {
            let mut levels = Vec::new();
            for &n in &lattices {
                let pts = exterior_lattice(n);
                let study = measure_bound_polished(&h, &phi, i, v, set, &pts, c.polish, &in_exterior_set)?;
                let report = CommutatorReport::new(i, v, set, &study, residual);
                out.log(&Event {
                    event: "commutator",
                    data: json!({ "multi_index": report.multi_index, "component": report.component, "lattice": n, "implied_constant": report.implied_constant }),
                })?;
                let key = |id: &str, label: &str, value: f64| {
                    vec![n.to_string(), report.multi_index.clone(), report.component.clone(), id.to_string(), label.to_string(), num(value)]
                };
                rows.push(key("lhs_sup", "sup |ℒ_I(g∂∂Φ_V) − g∂∂(ℒ_I Φ_V)|", report.lhs_norm.sup));
                rows.push(key("lhs_l2", "root mean square of the commutator", report.lhs_norm.l2));
                rows.push(key("identity_residual", "relative defect of the exact expansion", report.identity_residual));
                for t in &report.terms {
                    rows.push(key(&t.id, term_label(&t.id), t.value));
                }
                rows.push(key("bound_value", "sup of the summed bound", report.bound_value));
                rows.push(key("implied_constant", "sup commutator / bound", report.implied_constant));
                levels.push(json!({ "lattice": n, "report": report }));
            }
            let cs: Vec<f64> = levels.iter().filter_map(|l| l["report"]["impliedConstant"].as_f64()).collect();
            let decoupling = if v == FrameVector::Lbar {
                None
            } else {
                let pts = exterior_lattice(2);
                Some(lbar_decoupling_defect(&h, &phi, &psi, i, v, set, &pts)?)
            };
            reports.push(json!({
                "multiIndex": i.to_string(),
                "component": v.name(),
                "levels": levels,
                "impliedConstants": cs,
                "lbarDecouplingDefect": decoupling,
            }));
        }
    }
    let decay_pts = decay_lattice(lattices[0]);
    let decay: DecayConstants = decay_constants(&phi, 1, &decay_pts)?;
    let grad_psi = Enveloped::random(&mut rng, 2, &[Variance::Co; 2], c.degree, c.phi_amplitude, c.sigma, false);
    let grad_frame = gradient_frame_bound_check(&grad_psi, FrameVector::Lbar, FrameVector::L, &exterior_lattice(lattices[0]))?;
    rows.push(vec![lattices[0].to_string(), String::new(), String::new(), "decay_transversal".into(), "sup (1+|q|)|∂ℒ_IΦ| / Σ|ℒ_JΦ|".into(), num(decay.transversal)]);
    rows.push(vec![lattices[0].to_string(), String::new(), String::new(), "decay_tangential".into(), "sup (1+t+|q|)|∇̸ℒ_IΦ| / Σ|ℒ_JΦ|".into(), num(decay.tangential)]);
    rows.push(vec![lattices[0].to_string(), String::new(), String::new(), "gradient_frame".into(), "sup |∂Ψ_{L̄L}| over the tangential gradient bound".into(), num(grad_frame)]);
    out.csv("commutator.csv", &["lattice", "multi_index", "component", "id", "label", "value"], &rows)?;
    let summary = json!({
        "seed": seed,
        "frameSet": set,
        "family": { "degree": c.degree, "sigma": c.sigma, "hAmplitude": c.h_amplitude, "phiAmplitude": c.phi_amplitude },
        "reports": reports,
        "decay": decay,
        "gradientFrameConstant": grad_frame,
    });
    out.json("commutator.json", &summary)?;
    Ok(summary)
}
