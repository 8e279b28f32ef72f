//! Weights in the retarded variable q = r − t.
//!
//! w is 1 inside the cone and grows like (1+q)^{1+2γ} outside; ŵ replaces the
//! inner branch by (1+|q|)^{2μ}; w̃ = w + ŵ. Values at q = 0 are taken by
//! continuity, derivatives there are refused.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Real;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct WeightParams {
    pub gamma: f64,
    pub mu: f64,
}

impl Default for WeightParams {
    fn default() -> Self {
        Self { gamma: 0.5, mu: -0.25 }
    }
}

impl WeightParams {
    pub fn new(gamma: f64, mu: f64) -> Result<Self> {
        if !(gamma > 0.0) {
            return Err(Error::Invalid("gamma must be > 0".into()));
        }
        if !(mu < 0.0) {
            return Err(Error::Invalid("mu must be < 0".into()));
        }
        Ok(Self { gamma, mu })
    }

    /// Bounds of ŵ′(1+|q|)/ŵ over q ≠ 0.
    pub fn log_slope_bounds(&self) -> (f64, f64) {
        let a = 1.0 + 2.0 * self.gamma;
        let b = -2.0 * self.mu;
        (a.min(b), a.max(b))
    }
}

/// Which weight to use in a slice integral.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WeightKind {
    W,
    WHat,
    WTilde,
    One,
}

fn outer<T: Real>(q: T, p: &WeightParams) -> T {
    (T::one() + q.abs()).powf(T::of(1.0 + 2.0 * p.gamma))
}

fn outer_prime<T: Real>(q: T, p: &WeightParams) -> T {
    T::of(1.0 + 2.0 * p.gamma) * (T::one() + q.abs()).powf(T::of(2.0 * p.gamma))
}

fn inner_hat<T: Real>(q: T, p: &WeightParams) -> T {
    (T::one() + q.abs()).powf(T::of(2.0 * p.mu))
}

fn inner_hat_prime<T: Real>(q: T, p: &WeightParams) -> T {
    // d/dq (1 − q)^{2μ} for q < 0
    T::of(-2.0 * p.mu) * (T::one() + q.abs()).powf(T::of(2.0 * p.mu - 1.0))
}

fn kink<T: Real>(q: T) -> Result<()> {
    if q == T::zero() {
        Err(Error::KinkPoint)
    } else {
        Ok(())
    }
}

pub fn w<T: Real>(q: T, p: &WeightParams) -> T {
    if q > T::zero() {
        outer(q, p)
    } else {
        T::one()
    }
}

pub fn w_prime<T: Real>(q: T, p: &WeightParams) -> Result<T> {
    kink(q)?;
    Ok(if q > T::zero() { outer_prime(q, p) } else { T::zero() })
}

pub fn w_hat<T: Real>(q: T, p: &WeightParams) -> T {
    if q > T::zero() {
        outer(q, p)
    } else {
        inner_hat(q, p)
    }
}

pub fn w_hat_prime<T: Real>(q: T, p: &WeightParams) -> Result<T> {
    kink(q)?;
    Ok(if q > T::zero() { outer_prime(q, p) } else { inner_hat_prime(q, p) })
}

pub fn w_tilde<T: Real>(q: T, p: &WeightParams) -> T {
    w(q, p) + w_hat(q, p)
}

pub fn w_tilde_prime<T: Real>(q: T, p: &WeightParams) -> Result<T> {
    Ok(w_prime(q, p)? + w_hat_prime(q, p)?)
}

/// Evaluate a weight of the given kind.
pub fn weight<T: Real>(kind: WeightKind, q: T, p: &WeightParams) -> T {
    match kind {
        WeightKind::W => w(q, p),
        WeightKind::WHat => w_hat(q, p),
        WeightKind::WTilde => w_tilde(q, p),
        WeightKind::One => T::one(),
    }
}

/// Derivative of a weight of the given kind.
pub fn weight_prime<T: Real>(kind: WeightKind, q: T, p: &WeightParams) -> Result<T> {
    match kind {
        WeightKind::W => w_prime(q, p),
        WeightKind::WHat => w_hat_prime(q, p),
        WeightKind::WTilde => w_tilde_prime(q, p),
        WeightKind::One => Ok(T::zero()),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn branch_values() {
        let p = WeightParams::default();
        assert_eq!(w(-5.0, &p), 1.0);
        assert_eq!(w(1.0, &p), 4.0);
        assert_eq!(w_prime(-3.0, &p).unwrap(), 0.0);
        assert!((w_hat(-1.0, &p) - 0.5f64.sqrt()).abs() < 1e-15);
        assert_eq!(w_hat(2.0, &p), 9.0);
        assert!((w_tilde(-5.0, &p) - (1.0 + 6f64.powf(-0.5))).abs() < 1e-15);
        assert_eq!(w_tilde(0.0, &p), 2.0);
        assert_eq!(w_prime(0.0f64, &p).unwrap_err(), Error::KinkPoint);
        assert_eq!(w_tilde_prime(0.0f64, &p).unwrap_err(), Error::KinkPoint);
    }

    #[test]
    fn derivatives_match_difference_quotients() {
        let p = WeightParams::new(0.7, -0.4).unwrap();
        for &q in &[-3.0f64, -0.5, 0.25, 2.0] {
            let h = 1e-6;
            let fd = (w_tilde(q + h, &p) - w_tilde(q - h, &p)) / (2.0 * h);
            assert!((fd - w_tilde_prime(q, &p).unwrap()).abs() < 1e-6 * (1.0 + fd.abs()));
        }
    }

    #[test]
    fn parameter_constraints() {
        assert_eq!(WeightParams::new(-1.0, -0.25).unwrap_err(), Error::Invalid("gamma must be > 0".into()));
        assert_eq!(WeightParams::new(0.5, 0.1).unwrap_err(), Error::Invalid("mu must be < 0".into()));
    }
}
