//! Spiking-rate functions.
//!
//! Every supported family vanishes at zero, is non-decreasing and has a
//! finite `∫₀^{2r} φ(u)/u du`, so all of them are admissible rates for the
//! network model.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};

/// Shape of a rate function.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RateKind {
    /// `φ(u) = c·u`
    Linear,
    /// `φ(u) = c·u^p`, `p > 0`
    Power { p: f64 },
    /// `φ(u) = c·min(u, M)`
    Saturating { m: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RateFunction {
    kind: RateKind,
    c: f64,
    r: f64,
}

fn check_positive(name: &str, v: f64) -> Result<()> {
    if v.is_finite() && v > 0.0 {
        Ok(())
    } else {
        Err(invalid(format!("{name} must be finite and > 0, got {v}")))
    }
}

impl RateFunction {
    pub fn new(kind: RateKind, c: f64, r: f64) -> Result<Self> {
        if !(c.is_finite() && c >= 0.0) {
            return Err(invalid(format!("rate slope c must be finite and >= 0, got {c}")));
        }
        check_positive("radius r", r)?;
        match kind {
            RateKind::Linear => {}
            RateKind::Power { p } => {
                if !(p.is_finite() && p > 0.0) {
                    return Err(invalid(format!(
                        "power exponent p must be > 0, got {p}: ∫ c·u^(p-1) du diverges at 0"
                    )));
                }
            }
            RateKind::Saturating { m } => check_positive("saturation level M", m)?,
        }
        Ok(Self { kind, c, r })
    }

    pub fn linear(c: f64, r: f64) -> Result<Self> {
        Self::new(RateKind::Linear, c, r)
    }

    pub fn power(c: f64, p: f64, r: f64) -> Result<Self> {
        Self::new(RateKind::Power { p }, c, r)
    }

    pub fn saturating(c: f64, m: f64, r: f64) -> Result<Self> {
        Self::new(RateKind::Saturating { m }, c, r)
    }

    pub fn kind(&self) -> RateKind {
        self.kind
    }

    pub fn slope(&self) -> f64 {
        self.c
    }

    pub fn radius(&self) -> f64 {
        self.r
    }

    pub fn with_radius(self, r: f64) -> Result<Self> {
        Self::new(self.kind, self.c, r)
    }

    /// Rate at potential `u`. Callers guarantee `u >= 0`; see [`Self::try_eval`].
    #[inline]
    pub fn eval(&self, u: f64) -> f64 {
        debug_assert!(u >= 0.0, "negative potential {u}");
        match self.kind {
            RateKind::Linear => self.c * u,
            RateKind::Power { p } => {
                if u <= 0.0 {
                    0.0
                } else {
                    self.c * u.powf(p)
                }
            }
            RateKind::Saturating { m } => self.c * u.min(m),
        }
    }

    pub fn try_eval(&self, u: f64) -> Result<f64> {
        if !(u >= 0.0) {
            return Err(invalid(format!("rate evaluated at negative potential {u}")));
        }
        Ok(self.eval(u))
    }

    /// Global Lipschitz constant, where one exists.
    pub fn lipschitz_constant(&self) -> Option<f64> {
        match self.kind {
            RateKind::Linear | RateKind::Saturating { .. } => Some(self.c),
            RateKind::Power { p } if p == 1.0 => Some(self.c),
            RateKind::Power { .. } => None,
        }
    }

    /// `∫₀^m φ(u)/u du`, in closed form for every supported kind.
    pub fn integral_over_u(&self, m: f64) -> f64 {
        if m <= 0.0 {
            return 0.0;
        }
        match self.kind {
            RateKind::Linear => self.c * m,
            RateKind::Power { p } => self.c * m.powf(p) / p,
            RateKind::Saturating { m: sat } => {
                if m <= sat {
                    self.c * m
                } else {
                    self.c * sat + self.c * sat * (m / sat).ln()
                }
            }
        }
    }

    /// `∫₀^{2r} φ(u)/u du` for the stored radius.
    pub fn assumption1_integral(&self) -> f64 {
        self.integral_over_u(2.0 * self.r)
    }
}
