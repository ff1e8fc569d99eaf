//! Performance boundaries and barrier error transformations.
//!
//! A performance boundary is a positive, non-increasing function of time that
//! settles to a terminal width after a fixed horizon. Errors normalized by the
//! boundary are pushed through logarithmic barrier maps, so keeping the
//! transformed value bounded keeps the raw error strictly inside its corridor.

use serde::{Deserialize, Serialize};
use std::f64::consts::FRAC_PI_2;
use thiserror::Error;

/// Margin kept between a normalized error and its corridor wall when clamping.
pub const DOMAIN_MARGIN: f64 = 1e-9;

#[derive(Debug, Error, PartialEq)]
pub enum PpcError {
    #[error("invalid performance profile: {0}")]
    InvalidProfile(String),
    #[error("corridor half-widths must stay positive (lower = {lower}, upper = {upper})")]
    BoundaryDomain { lower: f64, upper: f64 },
}

/// Decreasing performance boundary: a cosecant-shaped decay over `[0, horizon]`
/// that is constant `rho_inf` afterwards, capped at `rho_cap` near `t = 0`
/// where the cosecant diverges.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PerformanceProfile {
    rho_inf: f64,
    horizon: f64,
    rho_cap: f64,
}

impl PerformanceProfile {
    pub fn new(rho_inf: f64, horizon: f64, rho_cap: f64) -> Result<Self, PpcError> {
        if !(rho_inf > 0.0) || !rho_inf.is_finite() {
            return Err(PpcError::InvalidProfile(format!(
                "terminal width must be positive, got {rho_inf}"
            )));
        }
        if !(horizon > 0.0) || !horizon.is_finite() {
            return Err(PpcError::InvalidProfile(format!(
                "settling horizon must be positive, got {horizon}"
            )));
        }
        if !(rho_cap > rho_inf) || !rho_cap.is_finite() {
            return Err(PpcError::InvalidProfile(format!(
                "start-up cap must exceed the terminal width, got {rho_cap}"
            )));
        }
        Ok(Self {
            rho_inf,
            horizon,
            rho_cap,
        })
    }

    /// Profile with the default start-up cap of `1e3 * rho_inf`.
    pub fn with_default_cap(rho_inf: f64, horizon: f64) -> Result<Self, PpcError> {
        Self::new(rho_inf, horizon, 1e3 * rho_inf)
    }

    pub fn rho_inf(&self) -> f64 {
        self.rho_inf
    }

    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    pub fn rho_cap(&self) -> f64 {
        self.rho_cap
    }

    /// Largest value the boundary ever takes (the start-up cap).
    pub fn rho_max(&self) -> f64 {
        self.rho_cap
    }

    /// Time at which the cosecant branch drops below the start-up cap.
    pub fn cap_crossover(&self) -> f64 {
        (self.rho_inf / self.rho_cap).asin() * self.horizon / FRAC_PI_2
    }

    /// Boundary value at time `t >= 0`.
    pub fn rho(&self, t: f64) -> f64 {
        if t >= self.horizon {
            return self.rho_inf;
        }
        let s = (FRAC_PI_2 * t / self.horizon).sin();
        if s * self.rho_cap <= self.rho_inf {
            self.rho_cap
        } else {
            self.rho_inf / s
        }
    }

    /// Analytic first and second derivatives of the boundary.
    ///
    /// Both are zero on the cap plateau and on the constant branch; at exactly
    /// `t = horizon` the decaying branch applies, giving a zero slope and a
    /// positive curvature.
    pub fn rho_derivatives(&self, t: f64) -> (f64, f64) {
        if t > self.horizon {
            return (0.0, 0.0);
        }
        let k = FRAC_PI_2 / self.horizon;
        let theta = k * t;
        let (sin, cos) = theta.sin_cos();
        if sin * self.rho_cap <= self.rho_inf {
            return (0.0, 0.0);
        }
        let csc = 1.0 / sin;
        let cot = cos / sin;
        let d1 = -k * self.rho_inf * csc * cot;
        let d2 = k * k * self.rho_inf * (csc * cot * cot + csc * csc * csc);
        (d1, d2)
    }
}

/// Result of a barrier transform: the clamped normalized input, the transformed
/// value, and whether the domain clamp fired.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Transformed {
    /// Normalized error after clamping into the open transform domain.
    pub input: f64,
    /// Transformed (unconstrained) error.
    pub value: f64,
    /// True when the input had to be pulled off a corridor wall.
    pub clamped: bool,
}

/// Symmetric barrier transform `eps = ln((1 + x)/(1 - x)) / 2` on `|x| < 1`.
///
/// Inputs closer than [`DOMAIN_MARGIN`] to a wall are clamped and flagged; the
/// theory guarantees the corridor is never left, so a clamp is a diagnosable
/// red flag rather than a crash.
pub fn transform_sym(x: f64) -> Transformed {
    let limit = 1.0 - DOMAIN_MARGIN;
    let clamped = !(x.abs() < limit);
    let x = x.clamp(-limit, limit);
    Transformed {
        input: x,
        value: x.atanh(),
        clamped,
    }
}

/// Inverse of [`transform_sym`].
pub fn inverse_transform_sym(eps: f64) -> f64 {
    eps.tanh()
}

/// Asymmetric barrier transform `eps = ln((x + lower)/(upper - x)) / 2` on the
/// corridor `-lower < x < upper`.
///
/// `lower` and `upper` are the corridor half-widths; both must be strictly
/// positive (a collapsed corridor means the auxiliary signal has destroyed it).
pub fn transform_asym(x: f64, lower: f64, upper: f64) -> Result<Transformed, PpcError> {
    if !(lower > 0.0) || !(upper > 0.0) {
        return Err(PpcError::BoundaryDomain { lower, upper });
    }
    let lo = -lower + DOMAIN_MARGIN;
    let hi = upper - DOMAIN_MARGIN;
    let clamped = !(x > lo && x < hi);
    let x = x.clamp(lo, hi);
    Ok(Transformed {
        input: x,
        value: 0.5 * ((x + lower) / (upper - x)).ln(),
        clamped,
    })
}

/// Slope of the asymmetric transform with respect to its normalized input:
/// `(1/(x + lower) - 1/(x - upper)) / 2`, strictly positive inside the corridor.
pub fn asym_slope(x: f64, lower: f64, upper: f64) -> f64 {
    0.5 * (1.0 / (x + lower) - 1.0 / (x - upper))
}

/// Factors of the transformed-error rate `eps_dot = r * (raw_dot - gamma * raw)`:
/// `r = 1/(rho (1 + x)(1 - x))` and `gamma = rho_dot / rho`.
pub fn transform_factors(x: f64, profile: &PerformanceProfile, t: f64) -> (f64, f64) {
    let limit = 1.0 - DOMAIN_MARGIN;
    let x = x.clamp(-limit, limit);
    let rho = profile.rho(t);
    let (rho_dot, _) = profile.rho_derivatives(t);
    (1.0 / (rho * (1.0 + x) * (1.0 - x)), rho_dot / rho)
}

/// Symmetric transform of a raw error against a profile at time `t`, bundling
/// the normalized input, transformed value and rate factors.
#[derive(Debug, Clone, Copy)]
pub struct TransformPoint {
    /// Normalized error (raw / rho), clamped into the transform domain.
    pub x: f64,
    /// Transformed error.
    pub eps: f64,
    /// Transform slope factor.
    pub r: f64,
    /// Boundary log-derivative rho_dot / rho.
    pub gamma: f64,
    /// True when the domain clamp fired.
    pub clamped: bool,
}

pub fn transform_point(raw_error: f64, profile: &PerformanceProfile, t: f64) -> TransformPoint {
    let rho = profile.rho(t);
    let (rho_dot, _) = profile.rho_derivatives(t);
    let sym = transform_sym(raw_error / rho);
    TransformPoint {
        x: sym.input,
        eps: sym.value,
        r: 1.0 / (rho * (1.0 + sym.input) * (1.0 - sym.input)),
        gamma: rho_dot / rho,
        clamped: sym.clamped,
    }
}
