//! Fixed points of the return map: location, index, stability and the
//! degenerate-continuum dichotomy.
//!
//! Under the twist condition the two-dimensional fixed-point problem reduces
//! to one dimension: for each angle `θ` there is a unique momentum `φ(θ)`
//! with `Q(θ, φ(θ)) = θ`, and fixed points are the zeros of
//! `Φ(θ) = P(θ, φ(θ)) - φ(θ)`. The solver scans `Φ` on a grid, bisects its
//! sign changes, polishes with a 2-d Newton step built from the monodromy
//! matrix, and classifies each orbit by trace and fixed-point index. When
//! `Φ` vanishes identically (to tolerance) the fixed points form a curve and
//! the solver reports a degenerate continuum instead of isolated orbits.

use std::io::{self, Write};

use nalgebra::{Matrix2, Vector2};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::integrate::{sample_trajectory, IntegratorConfig, TrajectorySample};
use crate::model::{CylinderState, PendulumParams};
use crate::poincare::{
    poincare_map, poincare_map_with_tangent, strip_bound_with_margin, StripBound,
};
use crate::{fmt::float17, Error, Result};

use std::f64::consts::{PI, TAU};

/// Knobs for the fixed-point machinery.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SolverConfig {
    /// Angles in the Φ scan.
    pub grid_size: usize,
    /// Bisection tolerance in θ for zeros of Φ.
    pub theta_tol: f64,
    /// Bisection tolerance in the momentum for φ(θ).
    pub momentum_tol: f64,
    /// Accepted residual ‖S(z) − z‖ for a reported orbit.
    pub residual_tol: f64,
    /// Below this max|Φ| the fixed-point set is reported as a continuum.
    pub degeneracy_tol: f64,
    /// Orbits closer than this (per coordinate, angle modulo 2π) coincide.
    pub dedup_tol: f64,
    /// Radius of the index circle.
    pub index_radius: f64,
    /// Base sample count on the index circle.
    pub index_samples: usize,
    /// Safety margin added to the strip bound.
    pub margin: f64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            grid_size: 720,
            theta_tol: 1e-12,
            momentum_tol: 1e-12,
            residual_tol: 1e-10,
            degeneracy_tol: 1e-8,
            dedup_tol: 1e-6,
            index_radius: 1e-3,
            index_samples: 256,
            margin: 1.0,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("theta_tol", self.theta_tol),
            ("momentum_tol", self.momentum_tol),
            ("residual_tol", self.residual_tol),
            ("degeneracy_tol", self.degeneracy_tol),
            ("dedup_tol", self.dedup_tol),
            ("index_radius", self.index_radius),
            ("margin", self.margin),
        ];
        for (name, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::InvalidParams(format!(
                    "solver {name} must be positive, got {v}"
                )));
            }
        }
        if self.grid_size < 8 {
            return Err(Error::InvalidParams(format!(
                "solver grid_size must be >= 8, got {}",
                self.grid_size
            )));
        }
        if self.index_samples < 8 {
            return Err(Error::InvalidParams(format!(
                "solver index_samples must be >= 8, got {}",
                self.index_samples
            )));
        }
        Ok(())
    }
}

/// Linear type of a fixed point, read off the monodromy trace.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LinearClass {
    Elliptic,
    Hyperbolic,
    Parabolic,
}

impl LinearClass {
    pub fn as_str(&self) -> &'static str {
        match self {
            LinearClass::Elliptic => "elliptic",
            LinearClass::Hyperbolic => "hyperbolic",
            LinearClass::Parabolic => "parabolic",
        }
    }
}

/// A located T-periodic solution with winding `N`, in transformed
/// coordinates.
#[derive(Debug, Clone, PartialEq)]
pub struct PeriodicOrbit {
    pub q0: f64,
    pub p0: f64,
    /// ‖S(z) − z‖ at the reported point.
    pub residual: f64,
    /// Fixed-point index in {−1, 0, 1}; `None` when it could not be computed.
    pub index: Option<i32>,
    /// Monodromy trace.
    pub trace: f64,
    pub linear_class: LinearClass,
    pub winding: i64,
    /// True when instability is certified (hyperbolic, or isolated with
    /// index ≤ 0). Elliptic points are only ever "linearly stable".
    pub unstable: bool,
}

impl PeriodicOrbit {
    pub fn state(&self) -> CylinderState {
        CylinderState::new(self.q0, self.p0)
    }
}

/// The sampled twist reduction: angles, the momenta `φ(θ)` solving
/// `Q(θ, φ) = θ`, and the displacement `Φ(θ) = P(θ, φ(θ)) − φ(θ)`.
#[derive(Debug, Clone, PartialEq)]
pub struct ReducedCurve {
    pub thetas: Vec<f64>,
    pub phi: Vec<f64>,
    pub big_phi: Vec<f64>,
}

impl ReducedCurve {
    pub fn len(&self) -> usize {
        self.thetas.len()
    }

    pub fn is_empty(&self) -> bool {
        self.thetas.is_empty()
    }

    pub fn max_abs_phi(&self) -> f64 {
        self.big_phi.iter().fold(0.0f64, |m, v| m.max(v.abs()))
    }
}

/// Everything `find_fixed_points` can return: isolated orbits or the
/// analytic-curve degeneracy. The two cases are mutually exclusive by
/// construction.
#[derive(Debug, Clone)]
pub enum FixedPointSet {
    Isolated {
        orbits: Vec<PeriodicOrbit>,
        /// Set when twist failed and the grid/bisection route was replaced
        /// by multi-start Newton; completeness is then not guaranteed.
        no_twist_fallback: bool,
    },
    Continuum { curve: ReducedCurve },
}

impl FixedPointSet {
    pub fn orbits(&self) -> &[PeriodicOrbit] {
        match self {
            FixedPointSet::Isolated { orbits, .. } => orbits,
            FixedPointSet::Continuum { .. } => &[],
        }
    }

    pub fn is_continuum(&self) -> bool {
        matches!(self, FixedPointSet::Continuum { .. })
    }
}

/// Evaluates the return map at `(θ, r)`, giving `(Q, P)`.
fn map_point(
    params: &PendulumParams,
    theta: f64,
    r: f64,
    cfg: &IntegratorConfig,
) -> Result<(f64, f64)> {
    let s = poincare_map(params, &CylinderState::new(theta, r), cfg)?;
    Ok((s.q, s.p))
}

/// Result of one φ(θ) solve.
struct PhiPoint {
    r: f64,
    big_phi: f64,
}

/// Bisection for the unique `r` with `Q(θ, r) = θ` on a sign-bracketing
/// interval. Monotonicity of `r ↦ Q(θ, r)` is monitored along the way; a
/// violation means the twist assumption broke down.
#[allow(clippy::too_many_arguments)]
fn bisect_phi(
    params: &PendulumParams,
    theta: f64,
    mut lo: f64,
    mut hi: f64,
    mut g_lo: f64,
    mut g_hi: f64,
    cfg: &IntegratorConfig,
    tol: f64,
) -> Result<PhiPoint> {
    // Integrator noise allowance for the monotonicity monitor.
    let slack = 1e-9;
    let mut last = (f64::NAN, f64::NAN);
    while hi - lo > tol {
        let mid = 0.5 * (lo + hi);
        let (q_mid, p_mid) = map_point(params, theta, mid, cfg)?;
        let g_mid = q_mid - theta;
        if g_mid < g_lo - slack || g_mid > g_hi + slack {
            return Err(Error::TwistViolation { theta });
        }
        if g_mid >= 0.0 {
            hi = mid;
            g_hi = g_mid;
        } else {
            lo = mid;
            g_lo = g_mid;
        }
        last = (mid, p_mid);
    }
    let r = 0.5 * (lo + hi);
    // Reuse the last map evaluation; it sits within `tol` of `r`.
    let p = if last.0.is_nan() {
        map_point(params, theta, r, cfg)?.1
    } else {
        last.1
    };
    Ok(PhiPoint { r, big_phi: p - r })
}

/// φ(θ) over the full strip `(-p̃, p̃)`; errors if the boundary twist fails
/// at the bracket ends.
fn phi_full_strip(
    params: &PendulumParams,
    theta: f64,
    bound: &StripBound,
    cfg: &IntegratorConfig,
    tol: f64,
) -> Result<PhiPoint> {
    let (lo, hi) = (-bound.p_tilde, bound.p_tilde);
    let (q_lo, _) = map_point(params, theta, lo, cfg)?;
    let g_lo = q_lo - theta;
    if g_lo >= 0.0 {
        return Err(Error::BoundaryTwistViolation {
            q: theta,
            p: lo,
            value: g_lo,
        });
    }
    let (q_hi, _) = map_point(params, theta, hi, cfg)?;
    let g_hi = q_hi - theta;
    if g_hi <= 0.0 {
        return Err(Error::BoundaryTwistViolation {
            q: theta,
            p: hi,
            value: g_hi,
        });
    }
    bisect_phi(params, theta, lo, hi, g_lo, g_hi, cfg, tol)
}

/// φ(θ) starting from a warm bracket, widening toward the strip border
/// until the sign condition holds.
fn phi_warm(
    params: &PendulumParams,
    theta: f64,
    hint_lo: f64,
    hint_hi: f64,
    bound: &StripBound,
    cfg: &IntegratorConfig,
    tol: f64,
) -> Result<PhiPoint> {
    let mut lo = hint_lo.max(-bound.p_tilde);
    let mut hi = hint_hi.min(bound.p_tilde);
    if lo >= hi {
        return phi_full_strip(params, theta, bound, cfg, tol);
    }
    let mut g_lo = map_point(params, theta, lo, cfg)?.0 - theta;
    let mut step = (hi - lo).max(0.05);
    while g_lo >= 0.0 {
        if lo <= -bound.p_tilde {
            return Err(Error::BoundaryTwistViolation {
                q: theta,
                p: lo,
                value: g_lo,
            });
        }
        lo = (lo - step).max(-bound.p_tilde);
        step *= 2.0;
        g_lo = map_point(params, theta, lo, cfg)?.0 - theta;
    }
    let mut g_hi = map_point(params, theta, hi, cfg)?.0 - theta;
    step = (hi - lo).max(0.05);
    while g_hi <= 0.0 {
        if hi >= bound.p_tilde {
            return Err(Error::BoundaryTwistViolation {
                q: theta,
                p: hi,
                value: g_hi,
            });
        }
        hi = (hi + step).min(bound.p_tilde);
        step *= 2.0;
        g_hi = map_point(params, theta, hi, cfg)?.0 - theta;
    }
    bisect_phi(params, theta, lo, hi, g_lo, g_hi, cfg, tol)
}

/// The unique momentum `r = φ(θ)` with `Q(θ, r) = θ` inside the strip,
/// located by bisection to the configured momentum tolerance (1e-12 by
/// default).
pub fn reduced_point(
    params: &PendulumParams,
    theta: f64,
    bound: &StripBound,
    cfg: &IntegratorConfig,
) -> Result<f64> {
    params.require_admissible()?;
    Ok(phi_full_strip(params, theta, bound, cfg, 1e-12)?.r)
}

/// Samples φ and Φ on `m` equispaced angles in `[0, 2π)`.
pub fn build_reduced_curve(
    params: &PendulumParams,
    m: usize,
    bound: &StripBound,
    cfg: &IntegratorConfig,
) -> Result<ReducedCurve> {
    build_reduced_curve_with_tol(params, m, bound, cfg, 1e-12)
}

fn build_reduced_curve_with_tol(
    params: &PendulumParams,
    m: usize,
    bound: &StripBound,
    cfg: &IntegratorConfig,
    tol: f64,
) -> Result<ReducedCurve> {
    params.require_admissible()?;
    if m < 2 {
        return Err(Error::InvalidParams(format!(
            "reduced curve needs at least 2 samples, got {m}"
        )));
    }
    // First pass: a coarse subset solved over the whole strip, in parallel.
    let coarse_stride = (m / 36).max(1);
    let coarse_idx: Vec<usize> = (0..m).step_by(coarse_stride).collect();
    let coarse: Vec<(usize, PhiPoint)> = coarse_idx
        .par_iter()
        .map(|&i| {
            let theta = TAU * i as f64 / m as f64;
            phi_full_strip(params, theta, bound, cfg, tol).map(|p| (i, p))
        })
        .collect::<Result<_>>()?;

    // Second pass: the rest with brackets warmed from the surrounding coarse
    // neighbours. φ is continuous, so a padded bracket almost always holds
    // and `phi_warm` widens it when it does not.
    let mut coarse_r = vec![f64::NAN; m];
    let mut coarse_phi: Vec<Option<PhiPoint>> = (0..m).map(|_| None).collect();
    for (i, p) in coarse {
        coarse_r[i] = p.r;
        coarse_phi[i] = Some(p);
    }
    let points: Vec<PhiPoint> = (0..m)
        .into_par_iter()
        .map(|i| {
            if let Some(p) = &coarse_phi[i] {
                return Ok(PhiPoint {
                    r: p.r,
                    big_phi: p.big_phi,
                });
            }
            let theta = TAU * i as f64 / m as f64;
            let before = (i / coarse_stride) * coarse_stride;
            let after = if before + coarse_stride >= m {
                0
            } else {
                before + coarse_stride
            };
            let (ra, rb) = (coarse_r[before], coarse_r[after]);
            let pad = 0.05 + (ra - rb).abs();
            phi_warm(
                params,
                theta,
                ra.min(rb) - pad,
                ra.max(rb) + pad,
                bound,
                cfg,
                tol,
            )
        })
        .collect::<Result<_>>()?;

    Ok(ReducedCurve {
        thetas: (0..m).map(|i| TAU * i as f64 / m as f64).collect(),
        phi: points.iter().map(|p| p.r).collect(),
        big_phi: points.iter().map(|p| p.big_phi).collect(),
    })
}

/// Central finite-difference slope of Φ at `theta`.
pub fn phi_slope(
    params: &PendulumParams,
    theta: f64,
    bound: &StripBound,
    cfg: &IntegratorConfig,
) -> Result<f64> {
    let h = 1e-4;
    let plus = phi_full_strip(params, theta + h, bound, cfg, 1e-12)?;
    let minus = phi_full_strip(params, theta - h, bound, cfg, 1e-12)?;
    Ok((plus.big_phi - minus.big_phi) / (2.0 * h))
}

/// One candidate fixed point after Newton polishing.
struct Polished {
    state: CylinderState,
    residual: f64,
}

/// Newton iteration on `S(z) - z` with the monodromy as Jacobian. Uses an
/// SVD solve so near-parabolic points do not blow up.
fn newton_polish(
    params: &PendulumParams,
    z0: CylinderState,
    target: f64,
    accept: f64,
    max_iter: usize,
    cfg: &IntegratorConfig,
) -> Result<Option<Polished>> {
    let mut z = z0;
    let mut best: Option<Polished> = None;
    for _ in 0..max_iter {
        let t = poincare_map_with_tangent(params, &z, cfg)?;
        let r = Vector2::new(t.state.q - z.q, t.state.p - z.p);
        let res = r.norm();
        if best.as_ref().is_none_or(|b| res < b.residual) {
            best = Some(Polished { state: z, residual: res });
        }
        if res < target {
            break;
        }
        let jac = t.monodromy - Matrix2::identity();
        let Some(delta) = jac.svd(true, true).solve(&r, 1e-13).ok() else {
            break;
        };
        z = CylinderState::new(z.q - delta[0], z.p - delta[1]);
        if !z.q.is_finite() || !z.p.is_finite() || delta.norm() > 10.0 {
            return Ok(None); // diverged seed
        }
    }
    Ok(best.filter(|b| b.residual < accept))
}

/// Deduplicates states modulo 2π in the angle, then sorts by
/// `(q mod 2π, p)` so the result is deterministic regardless of evaluation
/// order.
fn dedup_states(mut states: Vec<Polished>, tol: f64) -> Vec<Polished> {
    for s in &mut states {
        s.state.q = s.state.q.rem_euclid(TAU);
        // A point a hair below 2π is the same as one a hair above 0; give it
        // the near-zero representative so ordering is stable.
        if s.state.q > TAU - tol {
            s.state.q -= TAU;
        }
    }
    states.sort_by(|a, b| {
        (a.state.q, a.state.p)
            .partial_cmp(&(b.state.q, b.state.p))
            .expect("finite orbit coordinates")
    });
    let mut kept: Vec<Polished> = Vec::new();
    for s in states {
        let dup = kept.iter().any(|k| {
            let dq = (s.state.q - k.state.q).abs();
            let dq = dq.min(TAU - dq);
            dq < tol && (s.state.p - k.state.p).abs() < tol
        });
        if !dup {
            kept.push(s);
        }
    }
    kept
}

/// Finds the T-periodic solutions with the parameters' winding number, or
/// detects the degenerate continuum.
///
/// The primary route scans the twist reduction Φ; if the twist or boundary
/// twist assumptions fail it falls back to multi-start Newton over a 32×32
/// seed grid, flagged in the result since completeness is then heuristic.
pub fn find_fixed_points(
    params: &PendulumParams,
    scfg: &SolverConfig,
    icfg: &IntegratorConfig,
) -> Result<FixedPointSet> {
    params.require_admissible()?;
    scfg.validate()?;
    let bound = strip_bound_with_margin(params, scfg.margin)?;

    let curve = match build_reduced_curve_with_tol(
        params,
        scfg.grid_size,
        &bound,
        icfg,
        scfg.momentum_tol,
    ) {
        Ok(curve) => curve,
        Err(Error::TwistViolation { .. }) | Err(Error::BoundaryTwistViolation { .. }) => {
            let orbits = multistart_orbits(params, &bound, scfg, icfg, false)?;
            return Ok(FixedPointSet::Isolated {
                orbits,
                no_twist_fallback: true,
            });
        }
        Err(e) => return Err(e),
    };

    if curve.max_abs_phi() < scfg.degeneracy_tol {
        return Ok(FixedPointSet::Continuum { curve });
    }

    let m = curve.len();
    let snap = scfg.degeneracy_tol;
    let mut seeds: Vec<CylinderState> = Vec::new();
    for i in 0..m {
        let j = (i + 1) % m;
        let (theta_i, phi_i, f_i) = (curve.thetas[i], curve.phi[i], curve.big_phi[i]);
        let theta_j = curve.thetas[j] + if j == 0 { TAU } else { 0.0 };
        let (phi_j, f_j) = (curve.phi[j], curve.big_phi[j]);
        if f_i.abs() < snap {
            seeds.push(CylinderState::new(theta_i, phi_i));
        } else if f_i * f_j < 0.0 && f_j.abs() >= snap {
            let root = bisect_phi_zero(
                params, theta_i, theta_j, f_i, phi_i, phi_j, &bound, scfg, icfg,
            )?;
            seeds.push(root);
        }
    }

    let sharp = icfg.sharpened(1e-2);
    let target = (scfg.residual_tol * 1e-2).max(1e-13);
    let polished: Vec<Polished> = seeds
        .into_par_iter()
        .map(|z| newton_polish(params, z, target, scfg.residual_tol, 15, &sharp))
        .collect::<Result<Vec<_>>>()?
        .into_iter()
        .flatten()
        .collect();
    let mut states = dedup_states(polished, scfg.dedup_tol);

    if states.len() < 2 {
        // The reduction found fewer zeros than the theory guarantees
        // (possible with even-order contacts); augment from a seed grid.
        let extra = multistart_candidates(params, &bound, scfg, icfg)?;
        states.extend(extra);
        states = dedup_states(states, scfg.dedup_tol);
    }

    let orbits = finalize_orbits(params, states, scfg, icfg, true)?;
    Ok(FixedPointSet::Isolated {
        orbits,
        no_twist_fallback: false,
    })
}

/// Bisection in θ for a sign change of Φ between two grid nodes.
#[allow(clippy::too_many_arguments)]
fn bisect_phi_zero(
    params: &PendulumParams,
    mut theta_lo: f64,
    mut theta_hi: f64,
    f_lo: f64,
    phi_lo: f64,
    phi_hi: f64,
    bound: &StripBound,
    scfg: &SolverConfig,
    icfg: &IntegratorConfig,
) -> Result<CylinderState> {
    // The bracket keeps the sign of Φ(theta_lo) fixed throughout.
    let sign_lo = f_lo.is_sign_positive();
    let pad = 0.05 + (phi_lo - phi_hi).abs();
    let (mut r_lo, mut r_hi) = (phi_lo.min(phi_hi) - pad, phi_lo.max(phi_hi) + pad);
    let mut r_mid = 0.5 * (phi_lo + phi_hi);
    while theta_hi - theta_lo > scfg.theta_tol {
        let theta = 0.5 * (theta_lo + theta_hi);
        let point = phi_warm(params, theta, r_lo, r_hi, bound, icfg, scfg.momentum_tol)?;
        r_mid = point.r;
        r_lo = point.r - 0.1;
        r_hi = point.r + 0.1;
        if point.big_phi.is_sign_positive() == sign_lo {
            theta_lo = theta;
        } else {
            theta_hi = theta;
        }
    }
    Ok(CylinderState::new(0.5 * (theta_lo + theta_hi), r_mid))
}

/// Multi-start Newton candidates over a 32×32 grid of the strip.
fn multistart_candidates(
    params: &PendulumParams,
    bound: &StripBound,
    scfg: &SolverConfig,
    icfg: &IntegratorConfig,
) -> Result<Vec<Polished>> {
    let n = 32usize;
    let seeds: Vec<CylinderState> = (0..n)
        .flat_map(|i| {
            let q = TAU * i as f64 / n as f64;
            (0..n).map(move |j| {
                let p = -bound.p_tilde
                    + 2.0 * bound.p_tilde * j as f64 / (n - 1) as f64;
                CylinderState::new(q, p)
            })
        })
        .collect();
    let sharp = icfg.sharpened(1e-2);
    let target = (scfg.residual_tol * 1e-2).max(1e-13);
    let polished: Vec<Polished> = seeds
        .into_par_iter()
        .map(|z| newton_polish(params, z, target, scfg.residual_tol, 30, &sharp))
        .collect::<Result<Vec<_>>>()?
        .into_iter()
        .flatten()
        .filter(|p| p.state.p.abs() <= bound.p_tilde)
        .collect();
    Ok(polished)
}

/// Multi-start fixed-point search that never assumes twist. This is the
/// fallback route of [`find_fixed_points`], exposed for direct use; the
/// returned set is not guaranteed complete.
pub fn multistart_fixed_points(
    params: &PendulumParams,
    scfg: &SolverConfig,
    icfg: &IntegratorConfig,
) -> Result<FixedPointSet> {
    params.require_admissible()?;
    scfg.validate()?;
    let bound = strip_bound_with_margin(params, scfg.margin)?;
    let orbits = multistart_orbits(params, &bound, scfg, icfg, false)?;
    Ok(FixedPointSet::Isolated {
        orbits,
        no_twist_fallback: true,
    })
}

fn multistart_orbits(
    params: &PendulumParams,
    bound: &StripBound,
    scfg: &SolverConfig,
    icfg: &IntegratorConfig,
    twist_certified: bool,
) -> Result<Vec<PeriodicOrbit>> {
    let candidates = multistart_candidates(params, bound, scfg, icfg)?;
    let states = dedup_states(candidates, scfg.dedup_tol);
    finalize_orbits(params, states, scfg, icfg, twist_certified)
}

/// Computes trace, index and stability for each deduplicated state.
fn finalize_orbits(
    params: &PendulumParams,
    states: Vec<Polished>,
    scfg: &SolverConfig,
    icfg: &IntegratorConfig,
    twist_certified: bool,
) -> Result<Vec<PeriodicOrbit>> {
    let sharp = icfg.sharpened(1e-2);
    states
        .into_iter()
        .map(|s| {
            let tangent = poincare_map_with_tangent(params, &s.state, &sharp)?;
            let trace = tangent.trace();
            let index = match fixed_point_index(
                params,
                &s.state,
                scfg.index_radius,
                scfg.index_samples,
                twist_certified,
                icfg,
            ) {
                Ok(i) => Some(i),
                Err(Error::CircleTooSmall { .. }) => None,
                Err(e) => return Err(e),
            };
            let (linear_class, unstable) = classify_stability(trace, index, true);
            Ok(PeriodicOrbit {
                q0: s.state.q,
                p0: s.state.p,
                residual: s.residual,
                index,
                trace,
                linear_class,
                winding: params.winding(),
                unstable,
            })
        })
        .collect()
}

/// Brouwer index of an isolated fixed point: the winding number of the
/// displacement field `z ↦ S(z) − z` around a circle of radius `radius`.
///
/// Samples are refined adaptively wherever consecutive displacement
/// directions jump by more than π/2. Under a certified twist the result must
/// land in {−1, 0, 1}; anything else is reported as an internal
/// inconsistency.
pub fn fixed_point_index(
    params: &PendulumParams,
    center: &CylinderState,
    radius: f64,
    n_samples: usize,
    twist_certified: bool,
    cfg: &IntegratorConfig,
) -> Result<i32> {
    params.require_admissible()?;
    if !radius.is_finite() || radius <= 0.0 || n_samples < 8 {
        return Err(Error::InvalidParams(format!(
            "index needs radius > 0 and >= 8 samples, got {radius}, {n_samples}"
        )));
    }

    let displacement_angle = |phase: f64| -> Result<f64> {
        let z = CylinderState::new(
            center.q + radius * phase.cos(),
            center.p + radius * phase.sin(),
        );
        let s = poincare_map(params, &z, cfg)?;
        let (wq, wp) = (s.q - z.q, s.p - z.p);
        let norm = (wq * wq + wp * wp).sqrt();
        if norm < 1e-12 {
            return Err(Error::CircleTooSmall {
                sample: (phase / TAU * n_samples as f64) as usize,
                norm,
            });
        }
        Ok(wp.atan2(wq))
    };

    fn wrap(d: f64) -> f64 {
        let mut x = d % TAU;
        if x > PI {
            x -= TAU;
        } else if x < -PI {
            x += TAU;
        }
        x
    }

    fn segment(
        f: &impl Fn(f64) -> Result<f64>,
        a: f64,
        alpha_a: f64,
        b: f64,
        alpha_b: f64,
        depth: u32,
    ) -> Result<f64> {
        let delta = wrap(alpha_b - alpha_a);
        if delta.abs() <= PI / 2.0 {
            return Ok(delta);
        }
        if depth == 0 {
            return Err(Error::Inconsistency(
                "index refinement exhausted: displacement field too wild on the circle".into(),
            ));
        }
        let mid = 0.5 * (a + b);
        let alpha_mid = f(mid)?;
        Ok(segment(f, a, alpha_a, mid, alpha_mid, depth - 1)?
            + segment(f, mid, alpha_mid, b, alpha_b, depth - 1)?)
    }

    let phases: Vec<f64> = (0..=n_samples)
        .map(|i| TAU * i as f64 / n_samples as f64)
        .collect();
    let mut angles = Vec::with_capacity(phases.len());
    for &ph in &phases[..n_samples] {
        angles.push(displacement_angle(ph)?);
    }
    angles.push(angles[0]); // closed loop

    let mut total = 0.0;
    for i in 0..n_samples {
        total += segment(
            &displacement_angle,
            phases[i],
            angles[i],
            phases[i + 1],
            angles[i + 1],
            12,
        )?;
    }

    let turns = total / TAU;
    let index = turns.round() as i32;
    if (turns - index as f64).abs() > 0.25 {
        return Err(Error::Inconsistency(format!(
            "displacement winding {turns} is not close to an integer"
        )));
    }
    if twist_certified && index.abs() > 1 {
        return Err(Error::Inconsistency(format!(
            "index {index} outside {{-1, 0, 1}} despite certified twist"
        )));
    }
    Ok(index)
}

/// Trace-based linear classification plus the licensed instability flag:
/// hyperbolic points are unstable, and an isolated point with index ≤ 0 is
/// unstable.
pub fn classify_stability(
    trace: f64,
    index: Option<i32>,
    isolated: bool,
) -> (LinearClass, bool) {
    let class = if (trace.abs() - 2.0).abs() <= 1e-9 {
        LinearClass::Parabolic
    } else if trace.abs() < 2.0 {
        LinearClass::Elliptic
    } else {
        LinearClass::Hyperbolic
    };
    let unstable = class == LinearClass::Hyperbolic
        || (isolated && matches!(index, Some(i) if i <= 0));
    (class, unstable)
}

/// Reconstructs the lab-frame solution `x(t) = q(t) + Kt` over one period
/// and verifies the winding identity `x(T) = x(0) + 2Nπ` to 1e-8.
pub fn reconstruct_lab_solution(
    params: &PendulumParams,
    orbit: &PeriodicOrbit,
    n_samples: usize,
    cfg: &IntegratorConfig,
) -> Result<Vec<TrajectorySample>> {
    let rows = sample_trajectory(
        params,
        &orbit.state(),
        0.0,
        params.period(),
        n_samples,
        cfg,
    )?;
    let gained = rows[rows.len() - 1].x - rows[0].x;
    let expected = TAU * params.winding() as f64;
    if (gained - expected).abs() > 1e-8 {
        return Err(Error::Inconsistency(format!(
            "winding check failed: x(T) - x(0) = {gained}, expected {expected}"
        )));
    }
    if rows.iter().any(|r| r.v.abs() >= 1.0) {
        return Err(Error::Inconsistency(
            "reconstructed velocity left (-1, 1)".into(),
        ));
    }
    Ok(rows)
}

fn orbit_json_line(o: &PeriodicOrbit) -> String {
    let index = match o.index {
        Some(i) => i.to_string(),
        None => "null".into(),
    };
    format!(
        "{{\"q0\": {}, \"p0\": {}, \"residual\": {}, \"index\": {}, \"trace\": {}, \"class\": \"{}\", \"winding\": {}, \"unstable\": {}}}",
        float17(o.q0),
        float17(o.p0),
        float17(o.residual),
        index,
        float17(o.trace),
        o.linear_class.as_str(),
        o.winding,
        o.unstable
    )
}

/// Emits one JSON object per orbit (JSONL). A continuum is emitted as a
/// single object carrying the curve.
pub fn write_fixed_points_jsonl<W: Write>(w: &mut W, set: &FixedPointSet) -> io::Result<()> {
    match set {
        FixedPointSet::Isolated { orbits, .. } => {
            for o in orbits {
                writeln!(w, "{}", orbit_json_line(o))?;
            }
        }
        FixedPointSet::Continuum { curve } => {
            let body: Vec<String> = curve
                .thetas
                .iter()
                .zip(&curve.phi)
                .map(|(t, p)| format!("[{}, {}]", float17(*t), float17(*p)))
                .collect();
            writeln!(w, "{{\"degenerate\": true, \"curve\": [{}]}}", body.join(", "))?;
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{to_momentum, ForcingSeries};
    use crate::poincare::strip_bound;

    fn autonomous(a: f64) -> PendulumParams {
        PendulumParams::autonomous(a, TAU).unwrap()
    }

    fn forced(a: f64, c1: f64) -> PendulumParams {
        PendulumParams::new(a, TAU, 0, ForcingSeries::first_harmonic(c1, 0.0)).unwrap()
    }

    #[test]
    fn reduced_point_at_the_equilibria() {
        let params = autonomous(0.2);
        let cfg = IntegratorConfig::default();
        let bound = strip_bound(&params).unwrap();
        assert!(reduced_point(&params, 0.0, &bound, &cfg).unwrap().abs() < 1e-10);
        assert!(reduced_point(&params, PI, &bound, &cfg).unwrap().abs() < 1e-10);
    }

    #[test]
    fn reduced_point_agrees_with_multistart_newton() {
        // 2-d Newton from scattered seeds must land on the same Q(θ, r) = θ
        // momentum that the bisection finds.
        let params = forced(0.2, 0.1);
        let cfg = IntegratorConfig::default();
        let bound = strip_bound(&params).unwrap();
        let theta = 1.0;
        let r = reduced_point(&params, theta, &bound, &cfg).unwrap();

        let mut found = Vec::new();
        for k in 0..20 {
            let mut guess = -1.8 + 0.19 * k as f64;
            // 1-d Newton on r ↦ Q(θ, r) - θ with the monodromy derivative.
            for _ in 0..40 {
                let t =
                    poincare_map_with_tangent(&params, &CylinderState::new(theta, guess), &cfg)
                        .unwrap();
                let g = t.state.q - theta;
                if g.abs() < 1e-12 {
                    break;
                }
                guess -= g / t.monodromy[(0, 1)];
                if !guess.is_finite() || guess.abs() > 4.0 {
                    guess = f64::NAN;
                    break;
                }
            }
            if guess.is_finite() && guess.abs() < bound.p_tilde {
                let q = poincare_map(&params, &CylinderState::new(theta, guess), &cfg)
                    .unwrap()
                    .q;
                if (q - theta).abs() < 1e-10 {
                    found.push(guess);
                }
            }
        }
        assert!(!found.is_empty());
        for g in found {
            assert!((g - r).abs() < 1e-9, "Newton {g} vs bisection {r}");
        }
    }

    #[test]
    fn reduced_curve_of_the_free_rotator_is_degenerate() {
        let params = autonomous(0.0);
        let cfg = IntegratorConfig::default();
        let bound = strip_bound(&params).unwrap();
        let curve = build_reduced_curve(&params, 16, &bound, &cfg).unwrap();
        for (&phi, &big) in curve.phi.iter().zip(&curve.big_phi) {
            assert!(phi.abs() < 1e-10);
            assert!(big.abs() < 1e-10);
        }
    }

    #[test]
    fn reduced_curve_samples_satisfy_the_defining_equation() {
        let params = forced(0.2, 0.1);
        let cfg = IntegratorConfig::default();
        let bound = strip_bound(&params).unwrap();
        let curve = build_reduced_curve(&params, 24, &bound, &cfg).unwrap();
        for (&theta, &phi) in curve.thetas.iter().zip(&curve.phi) {
            let q = poincare_map(&params, &CylinderState::new(theta, phi), &cfg)
                .unwrap()
                .q;
            assert!((q - theta).abs() < 1e-10, "residual at θ = {theta}");
        }
    }

    #[test]
    fn autonomous_curve_vanishes_at_the_equilibria() {
        let params = autonomous(0.2);
        let cfg = IntegratorConfig::default();
        let bound = strip_bound(&params).unwrap();
        let curve = build_reduced_curve(&params, 8, &bound, &cfg).unwrap();
        // θ = 0 and θ = π are grid points for m = 8.
        assert!(curve.big_phi[0].abs() < 1e-10);
        assert!(curve.big_phi[4].abs() < 1e-10);
        assert!(curve.max_abs_phi() > 1e-3);
    }

    #[test]
    fn autonomous_fixed_points_are_the_two_equilibria() {
        let params = autonomous(0.2);
        let set =
            find_fixed_points(&params, &SolverConfig::default(), &IntegratorConfig::default())
                .unwrap();
        let FixedPointSet::Isolated { orbits, no_twist_fallback } = set else {
            panic!("expected isolated orbits");
        };
        assert!(!no_twist_fallback);
        assert_eq!(orbits.len(), 2);
        let center = &orbits[0];
        let saddle = &orbits[1];
        assert!(center.q0.abs() < 1e-9 || (center.q0 - TAU).abs() < 1e-9);
        assert!((saddle.q0 - PI).abs() < 1e-9);
        assert!(center.p0.abs() < 1e-9 && saddle.p0.abs() < 1e-9);
        assert!(center.residual < 1e-10 && saddle.residual < 1e-10);

        let sqrt_a = 0.2f64.sqrt();
        assert!((center.trace - 2.0 * (TAU * sqrt_a).cos()).abs() < 1e-5);
        assert!(
            (saddle.trace - 2.0 * (TAU * sqrt_a).cosh()).abs()
                < 1e-4 * saddle.trace.abs()
        );
        assert_eq!(center.linear_class, LinearClass::Elliptic);
        assert_eq!(saddle.linear_class, LinearClass::Hyperbolic);
        assert_eq!(center.index, Some(1));
        assert_eq!(saddle.index, Some(-1));
        assert!(!center.unstable);
        assert!(saddle.unstable);
    }

    #[test]
    fn free_rotator_reports_a_continuum() {
        let params = autonomous(0.0);
        let set =
            find_fixed_points(&params, &SolverConfig::default(), &IntegratorConfig::default())
                .unwrap();
        let FixedPointSet::Continuum { curve } = set else {
            panic!("expected a continuum");
        };
        assert!(curve.phi.iter().all(|p| p.abs() < 1e-10));
    }

    #[test]
    fn forced_run_finds_two_residual_clean_orbits() {
        let params = forced(0.2, 0.1);
        let scfg = SolverConfig {
            grid_size: 180,
            ..Default::default()
        };
        let set = find_fixed_points(&params, &scfg, &IntegratorConfig::default()).unwrap();
        let orbits = set.orbits();
        assert!(orbits.len() >= 2, "found {}", orbits.len());
        for o in orbits {
            assert!(o.residual < 1e-10);
            assert!(matches!(o.index, Some(-1..=1)));
        }
        let sum: i32 = orbits.iter().filter_map(|o| o.index).sum();
        assert_eq!(sum, 0, "index sum over the strip");
        assert!(orbits.iter().any(|o| o.unstable));
    }

    #[test]
    fn index_sign_matches_phi_slope() {
        let params = forced(0.2, 0.1);
        let scfg = SolverConfig {
            grid_size: 180,
            ..Default::default()
        };
        let icfg = IntegratorConfig::default();
        let bound = strip_bound(&params).unwrap();
        let set = find_fixed_points(&params, &scfg, &icfg).unwrap();
        for o in set.orbits() {
            let slope = phi_slope(&params, o.q0, &bound, &icfg).unwrap();
            if slope.abs() > 1e-6 {
                assert_eq!(o.index, Some(-slope.signum() as i32), "at θ = {}", o.q0);
            }
        }
    }

    #[test]
    fn multistart_route_matches_twist_route() {
        let params = forced(0.2, 0.1);
        let scfg = SolverConfig {
            grid_size: 180,
            ..Default::default()
        };
        let icfg = IntegratorConfig::default();
        let twist = find_fixed_points(&params, &scfg, &icfg).unwrap();
        let fallback = multistart_fixed_points(&params, &scfg, &icfg).unwrap();
        let FixedPointSet::Isolated { orbits: a, no_twist_fallback: false } = twist else {
            panic!("twist route failed");
        };
        let FixedPointSet::Isolated { orbits: b, no_twist_fallback: true } = fallback else {
            panic!("fallback route failed");
        };
        assert_eq!(a.len(), b.len());
        for (x, y) in a.iter().zip(&b) {
            assert!((x.q0 - y.q0).abs() < 1e-7 && (x.p0 - y.p0).abs() < 1e-7);
        }
    }

    #[test]
    fn beyond_twist_threshold_multistart_still_works() {
        // a = 0.3 > π²/T²: twist is not guaranteed, the seed-grid route must
        // still recover the two equilibria of the autonomous pendulum.
        let params = autonomous(0.3);
        let set = multistart_fixed_points(
            &params,
            &SolverConfig::default(),
            &IntegratorConfig::default(),
        )
        .unwrap();
        let orbits = set.orbits();
        assert!(orbits.len() >= 2);
        assert!(orbits.iter().any(|o| o.q0.abs() < 1e-8));
        assert!(orbits.iter().any(|o| (o.q0 - PI).abs() < 1e-8));
    }

    #[test]
    fn classify_stability_thresholds() {
        assert_eq!(
            classify_stability(-1.88991, Some(1), true),
            (LinearClass::Elliptic, false)
        );
        assert_eq!(
            classify_stability(16.67, Some(-1), true),
            (LinearClass::Hyperbolic, true)
        );
        assert_eq!(classify_stability(2.0, None, true).0, LinearClass::Parabolic);
        assert_eq!(classify_stability(-2.0, None, true).0, LinearClass::Parabolic);
        // Isolated index-0 points are unstable even when elliptic-looking.
        assert!(classify_stability(1.5, Some(0), true).1);
        assert!(!classify_stability(1.5, Some(0), false).1);
    }

    #[test]
    fn reconstruct_equilibrium_and_running_orbit() {
        let cfg = IntegratorConfig::default();
        // Equilibrium of the forced-free case: x ≡ 0.
        let params = autonomous(0.2);
        let orbit = PeriodicOrbit {
            q0: 0.0,
            p0: 0.0,
            residual: 0.0,
            index: Some(1),
            trace: 0.0,
            linear_class: LinearClass::Elliptic,
            winding: 0,
            unstable: false,
        };
        let rows = reconstruct_lab_solution(&params, &orbit, 33, &cfg).unwrap();
        assert!(rows.iter().all(|r| r.x.abs() < 1e-10 && r.v.abs() < 1e-12));

        // Free running solution with winding 1: x(t) = t/2.
        let params = PendulumParams::new(0.0, 4.0 * PI, 1, ForcingSeries::zero()).unwrap();
        let orbit = PeriodicOrbit {
            q0: 0.0,
            p0: to_momentum(0.5).unwrap(),
            residual: 0.0,
            index: None,
            trace: 2.0,
            linear_class: LinearClass::Parabolic,
            winding: 1,
            unstable: false,
        };
        let rows = reconstruct_lab_solution(&params, &orbit, 9, &cfg).unwrap();
        let gained = rows[rows.len() - 1].x - rows[0].x;
        assert!((gained - TAU).abs() < 1e-8);
        for r in &rows {
            assert!((r.x - 0.5 * r.t).abs() < 1e-9);
        }
    }

    #[test]
    fn winding_mismatch_is_an_error() {
        let params = PendulumParams::new(0.0, 4.0 * PI, 1, ForcingSeries::zero()).unwrap();
        let orbit = PeriodicOrbit {
            q0: 0.0,
            p0: 0.0, // at rest: gains no angle, violating winding 1
            residual: 0.0,
            index: None,
            trace: 2.0,
            linear_class: LinearClass::Parabolic,
            winding: 1,
            unstable: false,
        };
        assert!(matches!(
            reconstruct_lab_solution(&params, &orbit, 9, &IntegratorConfig::default()),
            Err(Error::Inconsistency(_))
        ));
    }

    #[test]
    fn jsonl_shapes() {
        let orbit = PeriodicOrbit {
            q0: 0.25,
            p0: -0.5,
            residual: 1e-12,
            index: Some(-1),
            trace: 3.0,
            linear_class: LinearClass::Hyperbolic,
            winding: 0,
            unstable: true,
        };
        let mut buf = Vec::new();
        write_fixed_points_jsonl(
            &mut buf,
            &FixedPointSet::Isolated {
                orbits: vec![orbit],
                no_twist_fallback: false,
            },
        )
        .unwrap();
        let text = String::from_utf8(buf).unwrap();
        let v: serde_json::Value = serde_json::from_str(text.trim()).unwrap();
        assert_eq!(v["class"], "hyperbolic");
        assert_eq!(v["index"], -1);
        assert_eq!(v["unstable"], true);

        let curve = ReducedCurve {
            thetas: vec![0.0, PI],
            phi: vec![0.0, 0.0],
            big_phi: vec![0.0, 0.0],
        };
        let mut buf = Vec::new();
        write_fixed_points_jsonl(&mut buf, &FixedPointSet::Continuum { curve }).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let v: serde_json::Value = serde_json::from_str(text.trim()).unwrap();
        assert_eq!(v["degenerate"], true);
        assert_eq!(v["curve"].as_array().unwrap().len(), 2);
    }
}
