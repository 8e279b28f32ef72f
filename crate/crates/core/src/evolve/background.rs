//! Prescribed perturbations H^{μν}(t, x) of the inverse Minkowski metric.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fields::PolyField;
use crate::geometry::{matrix_norm, Perturbation, Variance};
use crate::poly::Poly;

/// Symmetric direction of the bump families, |C| = 1 in the Frobenius norm.
pub fn bump_pattern() -> [[f64; 4]; 4] {
    let raw = [
        [1.0, 0.5, 0.25, 0.0],
        [0.5, 1.0, 0.0, 0.25],
        [0.25, 0.0, 1.0, 0.0],
        [0.0, 0.25, 0.0, 1.0],
    ];
    let n = matrix_norm(&raw);
    raw.map(|row| row.map(|v| v / n))
}

/// One polynomial entry H^{μν} = H^{νμ} of a user background.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PolyEntry {
    pub mu: usize,
    pub nu: usize,
    /// (coefficient, exponents of t, x¹, x², x³)
    pub terms: Vec<(f64, [u8; 4])>,
}

fn default_radius() -> f64 {
    1.0
}

/// Analytic background families.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize, Default)]
#[serde(tag = "family", rename_all = "snake_case", deny_unknown_fields)]
pub enum BackgroundFamily {
    #[default]
    Zero,
    /// ε·b(|x − c|²/R²)·C with b(s) = (1 − s)³ on s < 1.
    StaticBump {
        epsilon: f64,
        #[serde(default)]
        center: [f64; 3],
        #[serde(default = "default_radius")]
        radius: f64,
    },
    /// The static bump with center c + v t.
    TravelingBump {
        epsilon: f64,
        #[serde(default)]
        center: [f64; 3],
        #[serde(default = "default_radius")]
        radius: f64,
        velocity: [f64; 3],
    },
    /// ε times a user polynomial tensor.
    Polynomial { epsilon: f64, entries: Vec<PolyEntry> },
}

impl BackgroundFamily {
    pub fn epsilon(&self) -> f64 {
        match self {
            BackgroundFamily::Zero => 0.0,
            BackgroundFamily::StaticBump { epsilon, .. }
            | BackgroundFamily::TravelingBump { epsilon, .. }
            | BackgroundFamily::Polynomial { epsilon, .. } => *epsilon,
        }
    }

    pub fn static_bump(epsilon: f64) -> Self {
        BackgroundFamily::StaticBump { epsilon, center: [0.0; 3], radius: 1.0 }
    }

    pub fn validate(&self) -> Result<()> {
        let eps = self.epsilon();
        if !(0.0..=0.3).contains(&eps) {
            return Err(Error::Invalid("epsilon must be in [0, 0.3]".into()));
        }
        match self {
            BackgroundFamily::StaticBump { radius, .. } | BackgroundFamily::TravelingBump { radius, .. }
                if !(*radius > 0.0) =>
            {
                Err(Error::Invalid("bump radius must be > 0".into()))
            }
            BackgroundFamily::TravelingBump { velocity, .. }
                if velocity.iter().map(|v| v * v).sum::<f64>() >= 1.0 =>
            {
                Err(Error::Invalid("bump speed must be < 1".into()))
            }
            BackgroundFamily::Polynomial { entries, .. }
                if entries.iter().any(|e| e.mu > 3 || e.nu > 3) =>
            {
                Err(Error::Invalid("polynomial entry index out of range".into()))
            }
            _ => Ok(()),
        }
    }

    pub fn build(&self) -> Result<Background> {
        self.validate()?;
        Ok(match self {
            BackgroundFamily::Zero => Background::Zero,
            BackgroundFamily::StaticBump { epsilon, center, radius } => Background::Bump(Bump {
                epsilon: *epsilon,
                center: *center,
                radius: *radius,
                velocity: [0.0; 3],
                pattern: bump_pattern(),
            }),
            BackgroundFamily::TravelingBump { epsilon, center, radius, velocity } => Background::Bump(Bump {
                epsilon: *epsilon,
                center: *center,
                radius: *radius,
                velocity: *velocity,
                pattern: bump_pattern(),
            }),
            BackgroundFamily::Polynomial { epsilon, entries } => {
                let mut h = PolyField::<f64>::zeros(2, &[Variance::Contra; 2], 1);
                for e in entries {
                    let terms: Vec<([u8; 4], f64)> = e.terms.iter().map(|(c, x)| (*x, *c * epsilon)).collect();
                    let p = Poly::from_terms(&terms);
                    *h.get_mut(&[e.mu, e.nu], 0) = p.clone();
                    *h.get_mut(&[e.nu, e.mu], 0) = p;
                }
                let dh = (0..4).map(|l| h.partial(l)).collect();
                Background::Polynomial { h, dh }
            }
        })
    }
}

#[derive(Clone, Debug)]
pub struct Bump {
    pub epsilon: f64,
    pub center: [f64; 3],
    pub radius: f64,
    pub velocity: [f64; 3],
    pub pattern: [[f64; 4]; 4],
}

impl Bump {
    /// Profile value and its (t, x) gradient.
    fn profile(&self, t: f64, x: [f64; 3]) -> (f64, [f64; 4]) {
        let d: [f64; 3] = std::array::from_fn(|i| x[i] - self.center[i] - self.velocity[i] * t);
        let r2 = self.radius * self.radius;
        let s = (d[0] * d[0] + d[1] * d[1] + d[2] * d[2]) / r2;
        if s >= 1.0 {
            return (0.0, [0.0; 4]);
        }
        let b = (1.0 - s).powi(3);
        let db_ds = -3.0 * (1.0 - s).powi(2);
        let mut grad = [0.0; 4];
        for i in 0..3 {
            grad[i + 1] = db_ds * 2.0 * d[i] / r2;
            grad[0] -= db_ds * 2.0 * d[i] * self.velocity[i] / r2;
        }
        (b, grad)
    }
}

/// A background ready for evaluation.
#[derive(Clone, Debug)]
pub enum Background {
    Zero,
    Bump(Bump),
    Polynomial { h: PolyField<f64>, dh: Vec<PolyField<f64>> },
}

impl Perturbation for Background {
    fn h_inv(&self, t: f64, x: [f64; 3]) -> [[f64; 4]; 4] {
        match self {
            Background::Zero => [[0.0; 4]; 4],
            Background::Bump(b) => {
                let (v, _) = b.profile(t, x);
                b.pattern.map(|row| row.map(|c| b.epsilon * v * c))
            }
            Background::Polynomial { h, .. } => {
                let p = [t, x[0], x[1], x[2]];
                std::array::from_fn(|m| std::array::from_fn(|n| h.get(&[m, n], 0).eval(&p)))
            }
        }
    }

    fn dh_inv(&self, t: f64, x: [f64; 3]) -> [[[f64; 4]; 4]; 4] {
        match self {
            Background::Zero => [[[0.0; 4]; 4]; 4],
            Background::Bump(b) => {
                let (_, g) = b.profile(t, x);
                std::array::from_fn(|l| b.pattern.map(|row| row.map(|c| b.epsilon * g[l] * c)))
            }
            Background::Polynomial { dh, .. } => {
                let p = [t, x[0], x[1], x[2]];
                std::array::from_fn(|l| {
                    std::array::from_fn(|m| std::array::from_fn(|n| dh[l].get(&[m, n], 0).eval(&p)))
                })
            }
        }
    }

    fn is_flat(&self) -> bool {
        match self {
            Background::Zero => true,
            Background::Bump(b) => b.epsilon == 0.0,
            Background::Polynomial { h, .. } => h.is_zero(),
        }
    }

    fn is_static(&self) -> bool {
        match self {
            Background::Zero => true,
            Background::Bump(b) => b.velocity == [0.0; 3],
            Background::Polynomial { h, .. } => h.components().iter().all(|p| p.deriv(0).is_zero()),
        }
    }

    fn amplitude_bound(&self) -> Option<f64> {
        match self {
            Background::Zero => Some(0.0),
            Background::Bump(b) => Some(b.epsilon),
            Background::Polynomial { .. } => None,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bump_is_bounded_by_epsilon() {
        let bg = BackgroundFamily::static_bump(0.3).build().unwrap();
        assert!((matrix_norm(&bg.h_inv(0.0, [0.0; 3])) - 0.3).abs() < 1e-14);
        assert_eq!(bg.h_inv(0.0, [1.0, 0.5, 0.0]), [[0.0; 4]; 4]);
        for &x in &[[0.2, 0.1, -0.3], [0.6, 0.0, 0.5]] {
            assert!(matrix_norm(&bg.h_inv(1.0, x)) < 1.0 / 3.0);
        }
    }

    #[test]
    fn bump_derivatives_match_differences() {
        let fam = BackgroundFamily::TravelingBump {
            epsilon: 0.1,
            center: [0.1, 0.0, 0.0],
            radius: 0.9,
            velocity: [0.3, 0.0, -0.2],
        };
        let bg = fam.build().unwrap();
        let (t, x) = (0.4, [0.3, -0.2, 0.1]);
        let dh = bg.dh_inv(t, x);
        let h = 1e-6;
        for l in 0..4 {
            let mut c = [t, x[0], x[1], x[2]];
            c[l] += h;
            let hp = bg.h_inv(c[0], [c[1], c[2], c[3]]);
            c[l] -= 2.0 * h;
            let hm = bg.h_inv(c[0], [c[1], c[2], c[3]]);
            let fd = (hp[0][1] - hm[0][1]) / (2.0 * h);
            assert!((fd - dh[l][0][1]).abs() < 1e-7);
        }
    }

    #[test]
    fn epsilon_limit() {
        assert!(BackgroundFamily::static_bump(0.31).build().is_err());
    }
}
