//! Closed-form and quadrature oracles for the unforced pendulum.
//!
//! With `f ≡ 0` the lab-frame energy `E = 1/sqrt(1 - v^2) - a cos x + a` is a
//! first integral and the phase portrait is fully classified by `E`: the rest
//! point at `E = 1`, librations for `1 < E < 1 + 2a`, the separatrix at
//! `E = 1 + 2a` and running solutions above it. These oracles are used both
//! standalone (the `autonomous` CLI subcommand) and as ground truth for the
//! fixed-point solver.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::integrate::{IntegratorConfig, Stepper};
use crate::model::to_velocity;
use crate::{Error, Result};

use std::f64::consts::TAU;

/// Phase-portrait classification of an energy level.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EnergyClass {
    /// The rest point `(0, 0)` at `E = 1`.
    EquilibriumCenter,
    /// Closed oscillation, `1 < E < 1 + 2a`.
    Libration,
    /// The heteroclinic level `E = 1 + 2a`.
    Separatrix,
    /// Unbounded monotone rotation, `E > 1 + 2a`.
    Running,
}

impl EnergyClass {
    pub fn as_str(&self) -> &'static str {
        match self {
            EnergyClass::EquilibriumCenter => "equilibrium-center",
            EnergyClass::Libration => "libration",
            EnergyClass::Separatrix => "separatrix",
            EnergyClass::Running => "running",
        }
    }
}

/// An energy value with its classification.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EnergyLevel {
    pub e: f64,
    pub class: EnergyClass,
}

/// Classifies an energy level; boundaries are resolved exactly
/// (`E = 1` center, `E = 1 + 2a` separatrix). Errors for `E < 1`, which no
/// state attains.
pub fn classify_energy(a: f64, e: f64) -> Result<EnergyClass> {
    if !e.is_finite() || e < 1.0 {
        return Err(Error::Domain(format!(
            "energy must be >= 1, got {e}"
        )));
    }
    Ok(if e == 1.0 {
        EnergyClass::EquilibriumCenter
    } else if e == 1.0 + 2.0 * a {
        EnergyClass::Separatrix
    } else if e < 1.0 + 2.0 * a {
        EnergyClass::Libration
    } else {
        EnergyClass::Running
    })
}

/// Velocity of the running solution with energy `e` when it passes the angle
/// `x`: `v = sqrt(1 - 1/(E + a cos x - a)^2)`.
pub fn running_velocity(a: f64, e: f64, x: f64) -> Result<f64> {
    check_running(a, e)?;
    let w = e + a * x.cos() - a;
    Ok((1.0 - 1.0 / (w * w)).sqrt())
}

fn check_running(a: f64, e: f64) -> Result<()> {
    if !e.is_finite() || e <= 1.0 + 2.0 * a {
        return Err(Error::Domain(format!(
            "running orbits need E > 1 + 2a = {}, got {e}",
            1.0 + 2.0 * a
        )));
    }
    Ok(())
}

/// Time for the running solution at energy `e` to advance by `2Nπ`:
///
/// ```text
/// T_N(E) = ∫₀^{2Nπ} dx / sqrt(1 - 1/(E + a cos x - a)^2)
/// ```
///
/// evaluated by adaptive quadrature to 1e-10 relative accuracy. The integrand
/// is 2π-periodic, so the integral over one period is scaled by `N`.
/// Strictly decreasing in `E`, diverging at the separatrix and tending to
/// `2Nπ` for large `E`.
pub fn running_time(a: f64, e: f64, n: i64) -> Result<f64> {
    check_running(a, e)?;
    if n < 1 {
        return Err(Error::Domain(format!("winding N must be >= 1, got {n}")));
    }
    let integrand = |x: f64| {
        let w = e + a * x.cos() - a;
        1.0 / (1.0 - 1.0 / (w * w)).sqrt()
    };
    let one_turn = adaptive_simpson(&integrand, 0.0, TAU, 1e-10)?;
    Ok(n as f64 * one_turn)
}

/// The unique energy `E > 1 + 2a` whose running solution is `T`-periodic
/// with winding `N`, found by bisection on `T_N`; the residual satisfies
/// `|T_N(E*) - T| < 1e-9 T`.
pub fn solve_running_energy(a: f64, period: f64, n: i64) -> Result<f64> {
    if n < 1 {
        return Err(Error::Domain(format!("winding N must be >= 1, got {n}")));
    }
    if !period.is_finite() || period <= TAU * n as f64 {
        // T <= 2Nπ would force a superluminal mean speed.
        return Err(Error::NoRunningSolution {
            winding: n,
            period,
        });
    }
    let base = 1.0 + 2.0 * a;

    // Lower end: push toward the separatrix until T_N exceeds the target.
    let mut lo_delta = 1e-6;
    let mut t_lo = running_time(a, base + lo_delta, n)?;
    let mut guard = 0;
    while t_lo < period {
        lo_delta /= 10.0;
        guard += 1;
        if guard > 30 {
            return Err(Error::Inconsistency(format!(
                "failed to bracket the running energy from below for T = {period}"
            )));
        }
        t_lo = running_time(a, base + lo_delta, n)?;
    }

    // Upper end: double the width until T_N falls below the target.
    let mut hi_delta = 1.0;
    guard = 0;
    while running_time(a, base + hi_delta, n)? > period {
        hi_delta *= 2.0;
        guard += 1;
        if guard > 60 {
            return Err(Error::Inconsistency(format!(
                "failed to bracket the running energy from above for T = {period}"
            )));
        }
    }

    let tol = 1e-9 * period;
    let (mut lo, mut hi) = (base + lo_delta, base + hi_delta);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        let t_mid = running_time(a, mid, n)?;
        if (t_mid - period).abs() < tol {
            return Ok(mid);
        }
        if t_mid > period {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Err(Error::Inconsistency(format!(
        "running-energy bisection stalled for T = {period}, N = {n}"
    )))
}

/// Half period of the libration at energy `e`, integrated from the turning
/// point on the chosen side with event detection on the next zero of the
/// velocity (located to 1e-10 in time).
pub fn libration_half_period(
    a: f64,
    e: f64,
    start_negative: bool,
    cfg: &IntegratorConfig,
) -> Result<f64> {
    if !a.is_finite() || a <= 0.0 {
        return Err(Error::Domain(format!("librations need a > 0, got {a}")));
    }
    if !e.is_finite() || e <= 1.0 || e >= 1.0 + 2.0 * a {
        return Err(Error::Domain(format!(
            "libration energies lie strictly in (1, {}), got {e}",
            1.0 + 2.0 * a
        )));
    }
    // Turning point: E + a cos x0 - a = 1 with v = 0.
    let mut x0 = (1.0 - (e - 1.0) / a).acos();
    if start_negative {
        x0 = -x0;
    }

    // Autonomous dynamics in (x, p) with p the conjugate momentum.
    let rhs = |_t: f64, y: &[f64; 2]| [to_velocity(y[1]), -a * y[0].sin()];
    let mut stepper = Stepper::new(&rhs, 0.0, 1e6, [x0, 0.0], cfg)?;
    let mut prev_p = 0.0;
    loop {
        if stepper.done() {
            return Err(Error::Inconsistency(
                "libration event not found within the time horizon".into(),
            ));
        }
        let step = stepper.advance()?;
        let new_p = step.y[1];
        if prev_p != 0.0 && (prev_p * new_p < 0.0 || new_p == 0.0) {
            // Bisect the dense interpolant for p = 0.
            let (mut lo, mut hi) = (step.t_from, step.t_to);
            while hi - lo > 1e-10 {
                let mid = 0.5 * (lo + hi);
                let p_mid = step.interpolate(mid)[1];
                if p_mid == 0.0 {
                    lo = mid;
                    break;
                }
                if (p_mid < 0.0) == (prev_p < 0.0) {
                    lo = mid;
                } else {
                    hi = mid;
                }
            }
            let t_star = 0.5 * (lo + hi);
            let x_star = step.interpolate(t_star)[0];
            // The half turn ends on the opposite side of the well.
            if x_star * x0 < 0.0 {
                return Ok(t_star);
            }
        }
        prev_p = new_p;
    }
}

/// Minimal period of the libration at energy `e` (twice the half period).
pub fn libration_period(a: f64, e: f64, cfg: &IntegratorConfig) -> Result<f64> {
    Ok(2.0 * libration_half_period(a, e, false, cfg)?)
}

/// Log-spaced libration energies used by the period scan, covering
/// `(1, 1 + 2a)` from near the center to near the separatrix.
pub fn libration_energy_grid(a: f64, n_levels: usize) -> Vec<f64> {
    let (lo, hi) = ((1e-4f64).ln(), (1.0 - 1e-3f64).ln());
    (0..n_levels)
        .map(|i| {
            let u = if n_levels == 1 {
                lo
            } else {
                lo + (hi - lo) * i as f64 / (n_levels - 1) as f64
            };
            1.0 + 2.0 * a * u.exp()
        })
        .collect()
}

/// Minimum libration period over `n_levels` energies spanning the libration
/// range. For `a <= 1/4` and `T = 2π` this exceeds `2π`: the autonomous
/// equation has no non-constant 2π-periodic solutions.
pub fn min_libration_period_scan(
    a: f64,
    n_levels: usize,
    cfg: &IntegratorConfig,
) -> Result<f64> {
    if n_levels == 0 {
        return Err(Error::InvalidParams("scan needs at least one level".into()));
    }
    libration_energy_grid(a, n_levels)
        .into_par_iter()
        .map(|e| libration_period(a, e, cfg))
        .try_reduce(|| f64::INFINITY, |x, y| Ok(x.min(y)))
}

/// Adaptive Simpson quadrature with relative tolerance `rel_tol`.
fn adaptive_simpson(f: &impl Fn(f64) -> f64, a: f64, b: f64, rel_tol: f64) -> Result<f64> {
    fn simpson(f: &impl Fn(f64) -> f64, a: f64, fa: f64, b: f64, fb: f64) -> (f64, f64, f64) {
        let m = 0.5 * (a + b);
        let fm = f(m);
        ((b - a) / 6.0 * (fa + 4.0 * fm + fb), m, fm)
    }

    #[allow(clippy::too_many_arguments)]
    fn recurse(
        f: &impl Fn(f64) -> f64,
        a: f64,
        fa: f64,
        b: f64,
        fb: f64,
        whole: f64,
        m: f64,
        fm: f64,
        eps: f64,
        depth: u32,
    ) -> Result<f64> {
        let (left, lm, flm) = simpson(f, a, fa, m, fm);
        let (right, rm, frm) = simpson(f, m, fm, b, fb);
        let delta = left + right - whole;
        if delta.abs() <= 15.0 * eps {
            return Ok(left + right + delta / 15.0);
        }
        if depth == 0 {
            return Err(Error::Inconsistency(
                "adaptive quadrature exceeded its recursion budget".into(),
            ));
        }
        let half = 0.5 * eps;
        Ok(recurse(f, a, fa, m, fm, left, lm, flm, half, depth - 1)?
            + recurse(f, m, fm, b, fb, right, rm, frm, half, depth - 1)?)
    }

    let (fa, fb) = (f(a), f(b));
    let (whole, m, fm) = simpson(f, a, fa, b, fb);
    let eps = rel_tol * whole.abs().max(1e-300);
    recurse(f, a, fa, b, fb, whole, m, fm, eps, 60)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use std::f64::consts::PI;

    #[test]
    fn classify_examples() {
        assert_eq!(
            classify_energy(0.25, 1.0).unwrap(),
            EnergyClass::EquilibriumCenter
        );
        assert_eq!(classify_energy(0.25, 1.2).unwrap(), EnergyClass::Libration);
        assert_eq!(classify_energy(0.25, 1.5).unwrap(), EnergyClass::Separatrix);
        assert_eq!(classify_energy(0.25, 2.0).unwrap(), EnergyClass::Running);
        assert!(classify_energy(0.25, 0.99).is_err());
    }

    #[test]
    fn classify_is_monotone_in_e() {
        let order = |c: EnergyClass| match c {
            EnergyClass::EquilibriumCenter => 0,
            EnergyClass::Libration => 1,
            EnergyClass::Separatrix => 2,
            EnergyClass::Running => 3,
        };
        let mut prev = 0;
        for i in 0..200 {
            let e = 1.0 + 1.2 * i as f64 / 199.0;
            let now = order(classify_energy(0.25, e).unwrap());
            assert!(now >= prev, "classification regressed at E = {e}");
            prev = now;
        }
    }

    #[test]
    fn running_time_free_closed_form() {
        // a = 0: T_N(E) = 2Nπ / sqrt(1 - 1/E^2).
        let t = running_time(0.0, 1.25, 1).unwrap();
        assert_relative_eq!(t, TAU / 0.6, max_relative = 1e-9);
        for &e in &[1.05, 1.5, 3.0, 20.0] {
            let expect = TAU / (1.0f64 - 1.0 / (e * e)).sqrt();
            assert_relative_eq!(running_time(0.0, e, 1).unwrap(), expect, max_relative = 1e-9);
            assert_relative_eq!(
                running_time(0.0, e, 3).unwrap(),
                3.0 * expect,
                max_relative = 1e-9
            );
        }
    }

    #[test]
    fn running_time_large_energy_limit() {
        let t = running_time(0.1, 10.0, 1).unwrap();
        assert!((t - TAU).abs() / TAU < 0.01, "T_1(10) = {t}");
    }

    #[test]
    fn running_time_is_decreasing() {
        let a = 0.1;
        let mut prev = f64::INFINITY;
        for i in 0..50 {
            let e = 1.0 + 2.0 * a + 0.01 + 10.0 * i as f64 / 49.0;
            let t = running_time(a, e, 1).unwrap();
            assert!(t < prev, "T_N not decreasing at E = {e}");
            prev = t;
        }
    }

    #[test]
    fn running_time_matches_ode_event_oracle() {
        // Time for the running orbit (a = 0.1, E = 1.21) to reach x = 2π,
        // measured on a fixed-step RK4 march with endpoint refinement.
        let (a, e) = (0.1, 1.21);
        let predicted = running_time(a, e, 1).unwrap();

        let rhs = |y: &[f64; 2]| [to_velocity(y[1]), -a * y[0].sin()];
        let rk4_step = |y: &[f64; 2], h: f64| {
            let k1 = rhs(y);
            let k2 = rhs(&[y[0] + 0.5 * h * k1[0], y[1] + 0.5 * h * k1[1]]);
            let k3 = rhs(&[y[0] + 0.5 * h * k2[0], y[1] + 0.5 * h * k2[1]]);
            let k4 = rhs(&[y[0] + h * k3[0], y[1] + h * k3[1]]);
            [
                y[0] + h / 6.0 * (k1[0] + 2.0 * k2[0] + 2.0 * k3[0] + k4[0]),
                y[1] + h / 6.0 * (k1[1] + 2.0 * k2[1] + 2.0 * k3[1] + k4[1]),
            ]
        };
        let v0 = running_velocity(a, e, 0.0).unwrap();
        let mut y = [0.0, crate::model::to_momentum(v0).unwrap()];
        let h = 1e-4;
        let mut t = 0.0;
        while y[0] < TAU {
            let next = rk4_step(&y, h);
            if next[0] >= TAU {
                // Refine the crossing inside this step.
                let (mut lo, mut hi) = (0.0, h);
                for _ in 0..60 {
                    let mid = 0.5 * (lo + hi);
                    if rk4_step(&y, mid)[0] < TAU {
                        lo = mid;
                    } else {
                        hi = mid;
                    }
                }
                t += 0.5 * (lo + hi);
                break;
            }
            y = next;
            t += h;
        }
        assert!(
            (predicted - t).abs() < 1e-7,
            "quadrature {predicted} vs event oracle {t}"
        );
    }

    #[test]
    fn solve_running_energy_free_inversions() {
        let e = solve_running_energy(0.0, TAU / 0.6, 1).unwrap();
        assert!((e - 1.25).abs() < 1e-8);
        let e = solve_running_energy(0.0, 4.0 * PI, 1).unwrap();
        assert!((e - 2.0 / 3.0f64.sqrt()).abs() < 1e-8);
    }

    #[test]
    fn solve_running_energy_rejects_short_periods() {
        assert!(matches!(
            solve_running_energy(0.1, TAU, 1),
            Err(Error::NoRunningSolution { .. })
        ));
        assert!(matches!(
            solve_running_energy(0.1, 4.0 * PI, 2),
            Err(Error::NoRunningSolution { .. })
        ));
    }

    #[test]
    fn libration_small_amplitude_matches_linearization() {
        let cfg = IntegratorConfig::default();
        let period = libration_period(0.25, 1.0001, &cfg).unwrap();
        let linear = TAU / 0.25f64.sqrt(); // 4π
        assert!(
            (period - linear).abs() / linear < 0.005,
            "period {period} vs linearized {linear}"
        );
    }

    #[test]
    fn libration_blows_up_near_separatrix() {
        let cfg = IntegratorConfig::default();
        let period = libration_period(0.25, 1.4999, &cfg).unwrap();
        assert!(period > 30.0, "period {period}");
    }

    #[test]
    fn libration_periods_exceed_one_forcing_period() {
        let cfg = IntegratorConfig::default();
        for &e in &[1.01, 1.1, 1.25, 1.4, 1.49] {
            let period = libration_period(0.25, e, &cfg).unwrap();
            assert!(period > TAU, "period {period} at E = {e}");
        }
    }

    #[test]
    fn libration_reflection_symmetry() {
        let cfg = IntegratorConfig::default();
        let fwd = libration_half_period(0.25, 1.3, false, &cfg).unwrap();
        let mirrored = libration_half_period(0.25, 1.3, true, &cfg).unwrap();
        assert!((fwd - mirrored).abs() < 1e-10, "{fwd} vs {mirrored}");
    }

    #[test]
    fn libration_domain_errors() {
        let cfg = IntegratorConfig::default();
        assert!(libration_period(0.25, 1.0, &cfg).is_err());
        assert!(libration_period(0.25, 1.5, &cfg).is_err());
        assert!(libration_period(0.25, 0.5, &cfg).is_err());
        assert!(libration_period(0.0, 1.1, &cfg).is_err());
    }

    #[test]
    fn min_period_exceeds_the_forcing_period_at_a_quarter() {
        let cfg = IntegratorConfig::default();
        let min = min_libration_period_scan(0.25, 50, &cfg).unwrap();
        assert!(min > TAU, "min period {min}");
        // The infimum is the linearized period 4π, approached from above.
        assert!(min < 4.0 * PI * 1.001, "min period {min}");
    }

    #[test]
    fn min_period_scan_tracks_linearization_for_small_a() {
        let cfg = IntegratorConfig::default();
        let min = min_libration_period_scan(0.1, 50, &cfg).unwrap();
        let linear = TAU / 0.1f64.sqrt();
        assert!(min > TAU);
        assert!(min >= linear - 1e-3, "min {min} below linearized bound {linear}");
    }

    #[test]
    fn min_period_scan_detects_short_periods_at_large_a() {
        // Beyond the a <= 1/4 regime the scan must still resolve periods
        // near 2π. Both the anharmonic and the relativistic corrections
        // lengthen the period, so the minimum sits just above
        // 2π/sqrt(a) = 2π rather than below it.
        let cfg = IntegratorConfig::default();
        let min = min_libration_period_scan(1.0, 50, &cfg).unwrap();
        assert!(min > TAU, "min {min}");
        assert!(min < TAU * 1.001, "min {min} should approach 2π");
        let min_small = min_libration_period_scan(0.25, 50, &cfg).unwrap();
        assert!(min < 0.6 * min_small, "scan failed to separate a = 1 from a = 1/4");
    }
}
