//! Problem definition: parameters, forcing, coordinate changes, vector field
//! and energies.
//!
//! Everything downstream works in the transformed coordinates `(q, p)` where
//! `q = x - Kt` is the lifted angle with the mean rotation `K = 2Nπ/T`
//! removed and `p` is the conjugate momentum of the relativistic Lagrangian.
//! In these coordinates the dynamics are
//!
//! ```text
//! q' = p / sqrt(1 + p^2) - K
//! p' = -a sin(q + Kt) + f(t)
//! ```
//!
//! which is smooth on the whole cylinder. Lab-frame solutions are recovered
//! through `x = q + Kt`, `v = p / sqrt(1 + p^2)`.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Truncated Fourier forcing with harmonics of the base frequency `2π/T`.
///
/// There is no constant term, so the zero-mean requirement on the forcing
/// holds structurally rather than by a runtime check. `cos[k]` and `sin[k]`
/// are the coefficients of harmonic `k + 1`.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ForcingSeries {
    pub cos: Vec<f64>,
    pub sin: Vec<f64>,
}

impl ForcingSeries {
    /// The zero forcing `f ≡ 0`.
    pub fn zero() -> Self {
        Self::default()
    }

    /// Single-harmonic forcing `c·cos(2πt/T) + s·sin(2πt/T)`.
    pub fn first_harmonic(c: f64, s: f64) -> Self {
        Self {
            cos: vec![c],
            sin: vec![s],
        }
    }

    pub fn is_zero(&self) -> bool {
        self.cos.iter().chain(&self.sin).all(|&c| c == 0.0)
    }

    /// Evaluates `f(t)` for a forcing of period `period`.
    pub fn eval(&self, t: f64, period: f64) -> f64 {
        let w0 = 2.0 * PI / period;
        let mut sum = 0.0;
        for (k, &c) in self.cos.iter().enumerate() {
            sum += c * ((k + 1) as f64 * w0 * t).cos();
        }
        for (k, &s) in self.sin.iter().enumerate() {
            sum += s * ((k + 1) as f64 * w0 * t).sin();
        }
        sum
    }

    /// Upper bound on `sup_t |f(t)|`: the sum of coefficient magnitudes.
    pub fn sup_norm_bound(&self) -> f64 {
        self.cos.iter().chain(&self.sin).map(|c| c.abs()).sum()
    }

    /// Returns a copy with every coefficient multiplied by `scale`.
    pub fn scaled(&self, scale: f64) -> Self {
        Self {
            cos: self.cos.iter().map(|c| c * scale).collect(),
            sin: self.sin.iter().map(|s| s * scale).collect(),
        }
    }

    fn validate(&self) -> Result<()> {
        if self.cos.iter().chain(&self.sin).any(|c| !c.is_finite()) {
            return Err(Error::InvalidParams(
                "forcing coefficients must be finite".into(),
            ));
        }
        Ok(())
    }
}

/// Point on the lifted cylinder: angle `q` (unbounded real) and conjugate
/// momentum `p`. The induced velocity `p / sqrt(1 + p^2)` is always in (-1, 1).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CylinderState {
    pub q: f64,
    pub p: f64,
}

impl CylinderState {
    pub fn new(q: f64, p: f64) -> Self {
        Self { q, p }
    }

    /// The velocity induced by the momentum, strictly inside (-1, 1).
    pub fn velocity(&self) -> f64 {
        to_velocity(self.p)
    }
}

/// Lab-frame state: pendulum angle `x` and velocity `v = x'` with `|v| < 1`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LabState {
    pub x: f64,
    pub v: f64,
}

impl LabState {
    pub fn new(x: f64, v: f64) -> Self {
        Self { x, v }
    }
}

/// Problem parameters together with the derived drift speed `K = 2Nπ/T`.
#[derive(Debug, Clone, PartialEq)]
pub struct PendulumParams {
    a: f64,
    period: f64,
    winding: i64,
    forcing: ForcingSeries,
    drift: f64,
}

/// JSON schema for parameters:
/// `{"a": .., "T": .., "N": .., "forcing": {"cos": [..], "sin": [..]}}`.
#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ParamsSpec {
    a: f64,
    #[serde(rename = "T")]
    period: f64,
    #[serde(rename = "N")]
    winding: i64,
    #[serde(default)]
    forcing: ForcingSeries,
}

impl Serialize for PendulumParams {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        ParamsSpec {
            a: self.a,
            period: self.period,
            winding: self.winding,
            forcing: self.forcing.clone(),
        }
        .serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for PendulumParams {
    fn deserialize<D: serde::Deserializer<'de>>(
        deserializer: D,
    ) -> std::result::Result<Self, D::Error> {
        let spec = ParamsSpec::deserialize(deserializer)?;
        PendulumParams::new(spec.a, spec.period, spec.winding, spec.forcing)
            .map_err(serde::de::Error::custom)
    }
}

impl PendulumParams {
    /// Builds validated parameters.
    ///
    /// `a = 0` is outside the model's standing assumption `a > 0`; it is
    /// accepted as a degenerate case with closed-form dynamics (useful as a
    /// test oracle) and logged as a warning.
    pub fn new(a: f64, period: f64, winding: i64, forcing: ForcingSeries) -> Result<Self> {
        if !a.is_finite() || a < 0.0 {
            return Err(Error::InvalidParams(format!(
                "gravity coefficient a must be finite and >= 0, got {a}"
            )));
        }
        if !period.is_finite() || period <= 0.0 {
            return Err(Error::InvalidParams(format!(
                "period T must be finite and > 0, got {period}"
            )));
        }
        forcing.validate()?;
        if a == 0.0 {
            log::warn!("a = 0 lies outside the model assumption a > 0; treating as degenerate free rotator");
        }
        let drift = 2.0 * winding as f64 * PI / period;
        Ok(Self {
            a,
            period,
            winding,
            forcing,
            drift,
        })
    }

    /// Unforced parameters with winding 0.
    pub fn autonomous(a: f64, period: f64) -> Result<Self> {
        Self::new(a, period, 0, ForcingSeries::zero())
    }

    pub fn gravity(&self) -> f64 {
        self.a
    }

    pub fn period(&self) -> f64 {
        self.period
    }

    pub fn winding(&self) -> i64 {
        self.winding
    }

    pub fn forcing(&self) -> &ForcingSeries {
        &self.forcing
    }

    /// The drift speed `K = 2Nπ/T` removed by the change of variables.
    pub fn drift_speed(&self) -> f64 {
        self.drift
    }

    /// Necessary condition for winding-`N` solutions: `|2Nπ/T| < 1`, strictly.
    pub fn admissible(&self) -> bool {
        self.drift.abs() < 1.0
    }

    /// Errors with [`Error::Inadmissible`] unless [`Self::admissible`].
    pub fn require_admissible(&self) -> Result<()> {
        if self.admissible() {
            Ok(())
        } else {
            Err(Error::Inadmissible {
                winding: self.winding,
                period: self.period,
                drift: self.drift.abs(),
            })
        }
    }

    /// Forcing value `f(t)`.
    pub fn forcing_at(&self, t: f64) -> f64 {
        self.forcing.eval(t, self.period)
    }

    /// Right-hand side of the transformed system at `(t, s)`:
    /// `(p/sqrt(1+p^2) - K, -a sin(q + Kt) + f(t))`.
    pub fn vector_field(&self, t: f64, s: &CylinderState) -> (f64, f64) {
        (
            to_velocity(s.p) - self.drift,
            -self.a * (s.q + self.drift * t).sin() + self.forcing_at(t),
        )
    }

    /// Hamiltonian `sqrt(p^2+1) - Kp - a cos(q + Kt) - f(t) q`.
    ///
    /// Conserved along the flow exactly when `f ≡ 0` and `N = 0`.
    pub fn hamiltonian(&self, t: f64, s: &CylinderState) -> f64 {
        (s.p * s.p + 1.0).sqrt() - self.drift * s.p - self.a * (s.q + self.drift * t).cos()
            - self.forcing_at(t) * s.q
    }

    /// Lab angle `x = q + Kt`.
    pub fn lab_angle(&self, t: f64, q: f64) -> f64 {
        q + self.drift * t
    }

    /// Parses the JSON document
    /// `{"a": .., "T": .., "N": .., "forcing": {..}}`; a missing `forcing`
    /// means `f ≡ 0`. Unknown keys are rejected.
    pub fn from_json_str(json: &str) -> Result<Self> {
        serde_json::from_str(json)
            .map_err(|e| Error::InvalidParams(format!("bad parameter JSON: {e}")))
    }

    /// Renders the canonical JSON document for these parameters.
    pub fn to_json_string(&self) -> String {
        serde_json::to_string(self).expect("params serialize")
    }
}

/// Legendre change of variables: momentum `p = v / sqrt(1 - v^2)`.
///
/// Errors when `|v| >= 1` (superluminal input).
pub fn to_momentum(v: f64) -> Result<f64> {
    if !v.is_finite() || v.abs() >= 1.0 {
        return Err(Error::Superluminal { v });
    }
    Ok(v / (1.0 - v * v).sqrt())
}

/// Inverse Legendre map: velocity `v = p / sqrt(1 + p^2)`, always in (-1, 1).
pub fn to_velocity(p: f64) -> f64 {
    p / (1.0 + p * p).sqrt()
}

/// First integral of the autonomous pendulum:
/// `E = 1/sqrt(1 - v^2) - a cos x + a`, always `>= 1`.
pub fn energy(a: f64, s: &LabState) -> Result<f64> {
    if !s.v.is_finite() || s.v.abs() >= 1.0 {
        return Err(Error::Superluminal { v: s.v });
    }
    Ok(1.0 / (1.0 - s.v * s.v).sqrt() - a * s.x.cos() + a)
}
