//! Schematic nonlinear sources built from A = Φ, ∂A, h and ∂h.
//!
//! Every term is a rank-1 covector S_ν per channel. Frame projections use
//! the null frame at the node; derivatives of frame components are the frame
//! components of the coordinate gradient, e.g. ∂_νA_{e_a} := (∂_νA_μ)e_a^μ.
//! Terms whose natural value is a scalar are written into every declared slot.

use nalgebra::Matrix4;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fields::GridField;
use crate::geometry::{null_frame_at, Frame, Perturbation, Point, ETA};

/// Input of a Big-O factor.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Factor {
    A,
    H,
    DA,
    DH,
}

/// The schematic term families.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TermKind {
    /// Σ_{V∈𝒯} m^{μκ} ∂_ν h_{μV} · V^λ∂_λA_κ
    DhDslashA,
    /// Σ_{V∈𝒯} m^{μκ} V^λ∂_λh_{Vμ} · ∂_νA_κ
    DslashHDa,
    /// Σ_{V∈𝒯} A_V · V^λ∂_λA_ν
    ADslashA,
    /// m^{αβ}∂_νh_{αβ} · m^{μκ}A_μA_κ
    DhA2,
    /// A_ν³ slotwise
    A3,
    /// A_L · ∂_{L̄}A_ν
    ALDa,
    /// Σ_a A_{e_a} · ∂_νA_{e_a}
    AEDaE,
    /// Σ_{T∈𝒯, U∈𝒰} ∂_νh_{TU} · ∂_{L̄}h_{TU}
    DhTuSq,
    /// Σ_a ∂_νA_{e_a} · ∂_{L̄}A_{e_a}
    DeASq,
    /// Π_l λ(K_l)·Σ_{n<D} λ(K_l)ⁿ with λ the signed sum of all components.
    BigO { factors: Vec<Factor>, degree: usize },
}

fn one() -> f64 {
    1.0
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SourceTerm {
    pub kind: TermKind,
    #[serde(default = "one")]
    pub coefficient: f64,
    /// Output slots; all four when absent.
    #[serde(default)]
    pub slots: Option<Vec<usize>>,
    /// Input channel of each A-type factor, left to right; the output
    /// channel is used when absent.
    #[serde(default)]
    pub channels: Option<Vec<usize>>,
}

impl SourceTerm {
    pub fn new(kind: TermKind) -> Self {
        Self { kind, coefficient: 1.0, slots: None, channels: None }
    }
}

#[derive(Clone, Debug, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SourceSpec {
    pub terms: Vec<SourceTerm>,
}

/// Everything a source term may read at one point.
#[derive(Clone, Debug)]
pub struct PointInputs {
    /// A_μ per channel.
    pub a: Vec<[f64; 4]>,
    /// ∂_λA_μ per channel, indexed `[λ][μ]`.
    pub da: Vec<[[f64; 4]; 4]>,
    /// h_{μν}.
    pub h: [[f64; 4]; 4],
    /// ∂_λh_{μν}, indexed `[λ][μ][ν]`.
    pub dh: [[[f64; 4]; 4]; 4],
    pub frame: Frame<f64>,
}

/// h_{μν} = g_{μν} − m_{μν} and its gradient from H^{μν} and ∂H^{μν}.
pub fn covariant_perturbation(
    h_inv: &[[f64; 4]; 4],
    dh_inv: &[[[f64; 4]; 4]; 4],
) -> Result<([[f64; 4]; 4], [[[f64; 4]; 4]; 4])> {
    let ginv = Matrix4::from_fn(|i, j| h_inv[i][j] + if i == j { ETA[i] } else { 0.0 });
    let g = ginv.try_inverse().ok_or_else(|| Error::Invalid("inverse metric is singular".into()))?;
    let h = std::array::from_fn(|i| std::array::from_fn(|j| g[(i, j)] - if i == j { ETA[i] } else { 0.0 }));
    let dh = std::array::from_fn(|l| {
        let d = Matrix4::from_fn(|i, j| dh_inv[l][i][j]);
        let dg = -(g * d * g);
        std::array::from_fn(|i| std::array::from_fn(|j| dg[(i, j)]))
    });
    Ok((h, dh))
}

fn dot(a: &[f64; 4], v: &[f64; 4]) -> f64 {
    a.iter().zip(v).map(|(x, y)| x * y).sum()
}

/// V^λ∂_λA_ν.
fn along(da: &[[f64; 4]; 4], v: &[f64; 4], nu: usize) -> f64 {
    (0..4).map(|l| v[l] * da[l][nu]).sum()
}

/// ∂_λA_V = (∂_λA_μ)V^μ.
fn grad_component(da: &[[f64; 4]; 4], v: &[f64; 4], lam: usize) -> f64 {
    dot(&da[lam], v)
}

fn bilinear(m: &[[f64; 4]; 4], u: &[f64; 4], v: &[f64; 4]) -> f64 {
    let mut s = 0.0;
    for i in 0..4 {
        for j in 0..4 {
            s += m[i][j] * u[i] * v[j];
        }
    }
    s
}

fn signed_sum_1(v: &[f64; 4]) -> f64 {
    (0..4).map(|i| ETA[i] * v[i]).sum()
}

fn signed_sum_2(m: &[[f64; 4]; 4]) -> f64 {
    let mut s = 0.0;
    for i in 0..4 {
        for j in 0..4 {
            s += ETA[i] * ETA[j] * m[i][j];
        }
    }
    s
}

impl SourceTerm {
    fn channel(&self, k: usize, out: usize) -> usize {
        self.channels.as_ref().and_then(|c| c.get(k).copied()).unwrap_or(out)
    }

    /// Value of the term in slot ν for output channel c.
    pub fn value(&self, inp: &PointInputs, c: usize, nu: usize) -> f64 {
        let f = &inp.frame;
        let tang = [f.l, f.e[0], f.e[1]];
        let full = [f.lbar, f.l, f.e[0], f.e[1]];
        let (c0, c1, c2) = (self.channel(0, c), self.channel(1, c), self.channel(2, c));
        let v = match &self.kind {
            TermKind::DhDslashA => {
                let da = &inp.da[c0];
                let mut s = 0.0;
                for vv in &tang {
                    for mu in 0..4 {
                        let h_mu_v: f64 = (0..4).map(|b| inp.dh[nu][mu][b] * vv[b]).sum();
                        s += ETA[mu] * h_mu_v * along(da, vv, mu);
                    }
                }
                s
            }
            TermKind::DslashHDa => {
                let da = &inp.da[c0];
                let mut s = 0.0;
                for vv in &tang {
                    for mu in 0..4 {
                        let mut dvh = 0.0;
                        for l in 0..4 {
                            for a in 0..4 {
                                dvh += vv[l] * inp.dh[l][a][mu] * vv[a];
                            }
                        }
                        s += ETA[mu] * dvh * da[nu][mu];
                    }
                }
                s
            }
            TermKind::ADslashA => tang
                .iter()
                .map(|vv| dot(&inp.a[c0], vv) * along(&inp.da[c1], vv, nu))
                .sum(),
            TermKind::DhA2 => {
                let tr: f64 = (0..4).map(|a| ETA[a] * inp.dh[nu][a][a]).sum();
                let (a, b) = (&inp.a[c0], &inp.a[c1]);
                tr * (0..4).map(|m| ETA[m] * a[m] * b[m]).sum::<f64>()
            }
            TermKind::A3 => inp.a[c0][nu] * inp.a[c1][nu] * inp.a[c2][nu],
            TermKind::ALDa => dot(&inp.a[c0], &f.l) * along(&inp.da[c1], &f.lbar, nu),
            TermKind::AEDaE => f
                .e
                .iter()
                .map(|e| dot(&inp.a[c0], e) * grad_component(&inp.da[c1], e, nu))
                .sum(),
            TermKind::DhTuSq => {
                let mut s = 0.0;
                let dlbar: [[f64; 4]; 4] = std::array::from_fn(|i| {
                    std::array::from_fn(|j| (0..4).map(|l| f.lbar[l] * inp.dh[l][i][j]).sum())
                });
                for tv in &tang {
                    for uv in &full {
                        s += bilinear(&inp.dh[nu], tv, uv) * bilinear(&dlbar, tv, uv);
                    }
                }
                s
            }
            TermKind::DeASq => f
                .e
                .iter()
                .map(|e| {
                    let dlbar: f64 = (0..4).map(|l| f.lbar[l] * grad_component(&inp.da[c1], e, l)).sum();
                    grad_component(&inp.da[c0], e, nu) * dlbar
                })
                .sum(),
            TermKind::BigO { factors, degree } => {
                let mut prod = 1.0;
                let mut k = 0;
                for fac in factors {
                    let lam = match fac {
                        Factor::A => {
                            let ch = self.channel(k, c);
                            k += 1;
                            signed_sum_1(&inp.a[ch])
                        }
                        Factor::DA => {
                            let ch = self.channel(k, c);
                            k += 1;
                            signed_sum_2(&inp.da[ch])
                        }
                        Factor::H => signed_sum_2(&inp.h),
                        Factor::DH => (0..4).map(|l| ETA[l] * signed_sum_2(&inp.dh[l])).sum(),
                    };
                    let series: f64 = (0..*degree).map(|n| lam.powi(n as i32)).sum();
                    prod *= lam * series;
                }
                prod
            }
        };
        self.coefficient * v
    }

    fn writes_slot(&self, nu: usize) -> bool {
        self.slots.as_ref().map_or(true, |s| s.contains(&nu))
    }
}

impl SourceSpec {
    pub fn new(terms: Vec<SourceTerm>) -> Self {
        Self { terms }
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn validate(&self, channels: usize) -> Result<()> {
        for t in &self.terms {
            if let TermKind::BigO { factors, degree } = &t.kind {
                if *degree < 1 {
                    return Err(Error::Invalid("Big-O truncation degree must be >= 1".into()));
                }
                if factors.is_empty() {
                    return Err(Error::Invalid("Big-O term needs at least one factor".into()));
                }
            }
            if let Some(s) = &t.slots {
                if s.iter().any(|&v| v > 3) {
                    return Err(Error::Invalid("source slot out of range".into()));
                }
            }
            if let Some(c) = &t.channels {
                if c.iter().any(|&v| v >= channels) {
                    return Err(Error::Invalid("source channel out of range".into()));
                }
            }
        }
        Ok(())
    }

    /// S at one point, slot-major: `out[ν·channels + c]`.
    pub fn eval_point(&self, inp: &PointInputs, out: &mut [f64]) {
        let nch = inp.a.len();
        out.iter_mut().for_each(|v| *v = 0.0);
        for term in &self.terms {
            for nu in 0..4 {
                if !term.writes_slot(nu) {
                    continue;
                }
                for c in 0..nch {
                    out[nu * nch + c] += term.value(inp, c, nu);
                }
            }
        }
    }
}

/// Assemble S on the grid from Φ (rank 1) and Π = ∂tΦ, both with valid ghosts.
pub fn build_source(
    spec: &SourceSpec,
    phi: &GridField<f64>,
    pi: &GridField<f64>,
    background: &dyn Perturbation,
) -> Result<GridField<f64>> {
    if phi.rank() != 1 {
        return Err(Error::RankMismatch { expected: 1, got: phi.rank() });
    }
    let g = *phi.grid();
    let t = phi.time();
    let nch = phi.channels();
    spec.validate(nch)?;
    if spec.is_empty() {
        return Ok(GridField::zeros(g, 1, nch, t));
    }
    let dphi: Vec<GridField<f64>> = (1..4).map(|i| phi.partial(i)).collect::<Result<_>>()?;
    let mut arrays: Vec<Vec<f64>> = vec![vec![0.0; g.len()]; 4 * nch];
    let mut err = None;
    let mut buf = vec![0.0; 4 * nch];
    g.for_each_interior(|o, x| {
        if err.is_some() {
            return;
        }
        let inp = match point_inputs(phi, pi, &dphi, background, t, x, o) {
            Ok(v) => v,
            Err(e) => {
                err = Some(e);
                return;
            }
        };
        spec.eval_point(&inp, &mut buf);
        for (k, v) in buf.iter().enumerate() {
            arrays[k][o] = *v;
        }
    });
    if let Some(e) = err {
        return Err(e);
    }
    // interior values only; ghosts are stale
    GridField::from_arrays(g, 1, nch, t, arrays)
}

fn point_inputs(
    phi: &GridField<f64>,
    pi: &GridField<f64>,
    dphi: &[GridField<f64>],
    background: &dyn Perturbation,
    t: f64,
    x: [f64; 3],
    o: usize,
) -> Result<PointInputs> {
    let nch = phi.channels();
    let frame = null_frame_at(&Point::at(t, x))?;
    let a = (0..nch).map(|c| std::array::from_fn(|m| phi.value(m, c, o))).collect();
    let da = (0..nch)
        .map(|c| {
            std::array::from_fn(|l| {
                std::array::from_fn(|m| if l == 0 { pi.value(m, c, o) } else { dphi[l - 1].value(m, c, o) })
            })
        })
        .collect();
    let (h, dh) = if background.is_flat() {
        ([[0.0; 4]; 4], [[[0.0; 4]; 4]; 4])
    } else {
        covariant_perturbation(&background.h_inv(t, x), &background.dh_inv(t, x))?
    };
    Ok(PointInputs { a, da, h, dh, frame })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn inputs(a: f64) -> PointInputs {
        PointInputs {
            a: vec![[a; 4]],
            da: vec![[[0.0; 4]; 4]],
            h: [[0.0; 4]; 4],
            dh: [[[0.0; 4]; 4]; 4],
            frame: null_frame_at(&Point::at(0.5, [0.3, 0.4, 1.0])).unwrap(),
        }
    }

    #[test]
    fn cube_of_constant() {
        let spec = SourceSpec::new(vec![SourceTerm::new(TermKind::A3)]);
        let mut out = [0.0; 4];
        spec.eval_point(&inputs(1.5), &mut out);
        assert_eq!(out, [3.375; 4]);
    }

    #[test]
    fn declared_slots_only() {
        let mut term = SourceTerm::new(TermKind::A3);
        term.slots = Some(vec![2]);
        let mut out = [0.0; 4];
        SourceSpec::new(vec![term]).eval_point(&inputs(2.0), &mut out);
        assert_eq!(out, [0.0, 0.0, 8.0, 0.0]);
    }

    #[test]
    fn covariant_perturbation_inverts() {
        let mut hinv = [[0.0; 4]; 4];
        hinv[0][0] = 0.2;
        hinv[1][2] = 0.1;
        hinv[2][1] = 0.1;
        let (h, _) = covariant_perturbation(&hinv, &[[[0.0; 4]; 4]; 4]).unwrap();
        // (m⁻¹ + H)(m + h) = 1
        for i in 0..4 {
            for j in 0..4 {
                let mut s = 0.0;
                for k in 0..4 {
                    let a = hinv[i][k] + if i == k { ETA[i] } else { 0.0 };
                    let b = h[k][j] + if k == j { ETA[k] } else { 0.0 };
                    s += a * b;
                }
                assert!((s - if i == j { 1.0 } else { 0.0 }).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn big_o_degree_checked() {
        let spec = SourceSpec::new(vec![SourceTerm::new(TermKind::BigO { factors: vec![Factor::H], degree: 0 })]);
        assert!(spec.validate(1).is_err());
    }
}
