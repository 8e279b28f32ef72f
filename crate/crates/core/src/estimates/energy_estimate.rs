//! Instance check of the weighted energy estimate: the left-hand side and
//! each right-hand term are integrated from a run, and their ratio gives the
//! implied constant.

use serde::{Deserialize, Serialize};

use crate::energy::Slice;
use crate::error::{Error, Result};
use crate::fields::quadrature::integrate_uniform;
use crate::fields::ExteriorRegion;
use crate::geometry::{matrix_norm, null_frame_at, FrameVector, Point};
use crate::weights::{self, WeightKind, WeightParams};

/// Slice integrals for the energy estimate.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct EstimateSliceTerms {
    pub t: f64,
    /// ∫ |∂Ψ|² w.
    pub energy_w: f64,
    /// ∫ |∂Ψ|² w̃.
    pub energy_w_tilde: f64,
    /// ∫ |∇̸Ψ|² ŵ′.
    pub tangential_w_hat_prime: f64,
    /// ∫ |H_LL| |∂Ψ|² w̃′.
    pub hll_dpsi_sq: f64,
    /// ∫ |H| |∇̸Ψ| |∂Ψ| w̃′.
    pub h_dslash_dpsi: f64,
    /// ∫ (|∂H_LL| + |∇̸H|) |∂Ψ|² w̃.
    pub dhll_dslash_h_dpsi_sq: f64,
    /// ∫ |∂H| |∇̸Ψ| |∂Ψ| w̃.
    pub dh_dslash_dpsi: f64,
    /// ∫ |g∂∂Ψ| |∂tΨ| w̃.
    pub wave_dt: f64,
}

fn prime_or_zero(kind: WeightKind, q: f64, p: &WeightParams) -> f64 {
    weights::weight_prime(kind, q, p).unwrap_or(0.0)
}

/// Evaluate all estimate integrands on one slice.
pub fn estimate_slice_terms(slice: &Slice<'_>, region: &ExteriorRegion, params: &WeightParams) -> Result<EstimateSliceTerms> {
    let t = slice.fields.t;
    let v = slice.integrate(region, 8, |p, out| {
        let w = weights::w(p.q, params);
        let wt = weights::w_tilde(p.q, params);
        let wtp = prime_or_zero(WeightKind::WTilde, p.q, params);
        let whp = prime_or_zero(WeightKind::WHat, p.q, params);
        let frame = match null_frame_at(&Point::at(p.t, p.x)) {
            Ok(f) => f,
            Err(_) => {
                out.iter_mut().for_each(|o| *o = 0.0);
                return;
            }
        };
        let mut dpsi2 = 0.0;
        let mut dslash2 = 0.0;
        let mut dt2 = 0.0;
        let mut wave2 = 0.0;
        for (c, g) in p.grad.iter().enumerate() {
            dpsi2 += g.iter().map(|v| v * v).sum::<f64>();
            dt2 += g[0] * g[0];
            wave2 += p.wave[c] * p.wave[c];
            for fv in FrameVector::TANGENTIAL {
                let u = frame.vector(fv);
                let d = u[0] * g[0] + u[1] * g[1] + u[2] * g[2] + u[3] * g[3];
                dslash2 += d * d;
            }
        }
        let dpsi = dpsi2.sqrt();
        let dslash = dslash2.sqrt();
        // L lowered with m: (−1, x̂)
        let l = frame.vector(FrameVector::L);
        let l_low = [-l[0], l[1], l[2], l[3]];
        let contract_ll = |m: &[[f64; 4]; 4]| -> f64 {
            let mut s = 0.0;
            for a in 0..4 {
                for b in 0..4 {
                    s += l_low[a] * l_low[b] * m[a][b];
                }
            }
            s
        };
        let hll = contract_ll(&p.h).abs();
        let h_norm = matrix_norm(&p.h);
        let dhll = (0..4).map(|lam| contract_ll(&p.dh[lam]).powi(2)).sum::<f64>().sqrt();
        let dh = (0..4).map(|lam| matrix_norm(&p.dh[lam]).powi(2)).sum::<f64>().sqrt();
        let mut dslash_h2 = 0.0;
        for fv in FrameVector::TANGENTIAL {
            let u = frame.vector(fv);
            let mut m = [[0.0; 4]; 4];
            for lam in 0..4 {
                for a in 0..4 {
                    for b in 0..4 {
                        m[a][b] += u[lam] * p.dh[lam][a][b];
                    }
                }
            }
            dslash_h2 += matrix_norm(&m).powi(2);
        }
        out[0] = dpsi2 * w;
        out[1] = dpsi2 * wt;
        out[2] = dslash2 * whp;
        out[3] = hll * dpsi2 * wtp;
        out[4] = h_norm * dslash * dpsi * wtp;
        out[5] = (dhll + dslash_h2.sqrt()) * dpsi2 * wt;
        out[6] = dh * dslash * dpsi * wt;
        out[7] = wave2.sqrt() * dt2.sqrt() * wt;
    })?;
    Ok(EstimateSliceTerms {
        t,
        energy_w: v[0],
        energy_w_tilde: v[1],
        tangential_w_hat_prime: v[2],
        hll_dpsi_sq: v[3],
        h_dslash_dpsi: v[4],
        dhll_dslash_h_dpsi_sq: v[5],
        dh_dslash_dpsi: v[6],
        wave_dt: v[7],
    })
}

/// One right-hand term of the estimate.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EstimateLine {
    /// Stable identifier.
    pub id: String,
    /// Human-readable form of the term.
    pub label: String,
    pub value: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EstimateReport {
    pub t1: f64,
    pub t2: f64,
    /// ∫_{Σ_t2} |∂Ψ|² w̃ (used on the left).
    pub slice_t2_w_tilde: f64,
    /// ∫_{Σ_t2} |∂Ψ|² w, reported for comparison.
    pub slice_t2_w: f64,
    /// ∫∫ |∇̸Ψ|² ŵ′.
    pub tangential_flux: f64,
    pub lhs: f64,
    pub rhs: Vec<EstimateLine>,
    pub rhs_total: f64,
    /// lhs / rhs_total; infinite when the right side vanishes.
    pub implied_constant: f64,
}

impl EstimateReport {
    /// (term, value) pairs in a fixed order.
    pub fn rows(&self) -> Vec<(String, f64)> {
        let mut v = vec![
            ("lhs_slice_wtilde".to_string(), self.slice_t2_w_tilde),
            ("lhs_slice_w".to_string(), self.slice_t2_w),
            ("lhs_tangential_flux".to_string(), self.tangential_flux),
            ("lhs".to_string(), self.lhs),
        ];
        v.extend(self.rhs.iter().map(|l| (l.id.clone(), l.value)));
        v.push(("rhs_total".into(), self.rhs_total));
        v.push(("implied_constant".into(), self.implied_constant));
        v
    }
}

/// Estimate slice terms at equally spaced times.
#[derive(Clone, Debug, Default, Serialize, Deserialize)]
pub struct EstimateSeries {
    pub terms: Vec<EstimateSliceTerms>,
}

impl EstimateSeries {
    pub fn push(&mut self, s: EstimateSliceTerms) {
        self.terms.push(s);
    }

    fn locate(&self, t: f64) -> Option<usize> {
        self.terms.iter().position(|s| (s.t - t).abs() < 1e-9 * (1.0 + t.abs()))
    }

    fn window(&self, t1: f64, t2: f64) -> Result<(&[EstimateSliceTerms], f64)> {
        let missing = || Error::HistoryMissing { t1, t2 };
        if !(t2 > t1) {
            return Err(missing());
        }
        let i1 = self.locate(t1).ok_or_else(missing)?;
        let i2 = self.locate(t2).ok_or_else(missing)?;
        if i2 <= i1 {
            return Err(missing());
        }
        Ok((&self.terms[i1..=i2], (t2 - t1) / (i2 - i1) as f64))
    }

    pub fn report(&self, t1: f64, t2: f64) -> Result<EstimateReport> {
        let (w, dt) = self.window(t1, t2)?;
        let int = |f: fn(&EstimateSliceTerms) -> f64| integrate_uniform(&w.iter().map(f).collect::<Vec<_>>(), dt);
        let first = &w[0];
        let last = &w[w.len() - 1];
        let tangential_flux = int(|s| s.tangential_w_hat_prime);
        let lhs = last.energy_w_tilde + tangential_flux;
        let line = |id: &str, label: &str, value: f64| EstimateLine { id: id.into(), label: label.into(), value };
        let rhs = vec![
            line("initial_energy_wtilde", "∫|∂Ψ|² w̃ at t1", first.energy_w_tilde),
            line("HLL_times_dPsi_sq_wtilde_prime", "∫∫|H_LL||∂Ψ|² w̃′", int(|s| s.hll_dpsi_sq)),
            line("H_times_dslashPsi_dPsi_wtilde_prime", "∫∫|H||∇̸Ψ||∂Ψ| w̃′", int(|s| s.h_dslash_dpsi)),
            line(
                "dHLL_dslashH_times_dPsi_sq_wtilde",
                "∫∫(|∂H_LL|+|∇̸H|)|∂Ψ|² w̃",
                int(|s| s.dhll_dslash_h_dpsi_sq),
            ),
            line("dH_times_dslashPsi_dPsi_wtilde", "∫∫|∂H||∇̸Ψ||∂Ψ| w̃", int(|s| s.dh_dslash_dpsi)),
            line("wave_times_dtPsi_wtilde", "∫∫|g∂∂Ψ||∂tΨ| w̃", int(|s| s.wave_dt)),
        ];
        let rhs_total: f64 = rhs.iter().map(|l| l.value).sum();
        let implied_constant = if rhs_total > 0.0 { lhs / rhs_total } else { f64::INFINITY };
        Ok(EstimateReport {
            t1,
            t2,
            slice_t2_w_tilde: last.energy_w_tilde,
            slice_t2_w: last.energy_w,
            tangential_flux,
            lhs,
            rhs,
            rhs_total,
            implied_constant,
        })
    }
}
