//! Runtime invariant suites for the `verify` subcommand.
//!
//! Each suite re-checks one family of structural properties at desk scale
//! (random states, small grids) using the configured integrator, so a
//! degraded configuration (say `rtol = 1e-3`) is caught by the symplecticity
//! suite rather than silently corrupting downstream results. A suite's
//! `worst` is a violation magnitude — smaller is better — and passing means
//! `worst <= threshold`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::autonomous::{
    classify_energy, libration_half_period, running_time, EnergyClass,
};
use crate::integrate::{flow, flow_with_tangent, sample_trajectory, IntegratorConfig};
use crate::model::{
    energy, to_momentum, to_velocity, CylinderState, ForcingSeries, LabState, PendulumParams,
};
use crate::poincare::{
    generating_function, poincare_map, poincare_map_with_tangent, strip_bound, twist_margin,
};
use crate::solver::{find_fixed_points, phi_slope, FixedPointSet, SolverConfig};
use crate::Result;

use std::f64::consts::TAU;

/// Outcome of one invariant suite.
#[derive(Debug, Clone)]
pub struct SuiteReport {
    pub name: &'static str,
    pub passed: bool,
    /// Worst observed violation (smaller is better).
    pub worst: f64,
    /// Allowed violation.
    pub threshold: f64,
    pub detail: String,
}

impl SuiteReport {
    fn measured(name: &'static str, worst: f64, threshold: f64, detail: String) -> Self {
        Self {
            name,
            passed: worst <= threshold,
            worst,
            threshold,
            detail,
        }
    }

    fn failed(name: &'static str, detail: String) -> Self {
        Self {
            name,
            passed: false,
            worst: f64::INFINITY,
            threshold: 0.0,
            detail,
        }
    }
}

/// Configuration for a verify run.
#[derive(Debug, Clone)]
pub struct VerifyOptions {
    pub integrator: IntegratorConfig,
    pub solver: SolverConfig,
    pub seed: u64,
    /// When set, additionally assert a positive twist margin for these
    /// parameters on their strip.
    pub assert_twist: Option<PendulumParams>,
}

impl Default for VerifyOptions {
    fn default() -> Self {
        Self {
            integrator: IntegratorConfig::default(),
            solver: SolverConfig::default(),
            seed: 7,
            assert_twist: None,
        }
    }
}

/// The desk-scale existence grid: a ∈ {0.05, 0.1, 0.2, 0.24}, T = 2π,
/// N = 0, and three forcings (none, one harmonic, two harmonics).
pub fn acceptance_grid() -> Vec<PendulumParams> {
    let forcings = [
        ForcingSeries::zero(),
        ForcingSeries::first_harmonic(0.1, 0.0),
        ForcingSeries {
            cos: vec![0.1],
            sin: vec![0.0, 0.05],
        },
    ];
    [0.05, 0.1, 0.2, 0.24]
        .iter()
        .flat_map(|&a| {
            forcings
                .iter()
                .map(move |f| PendulumParams::new(a, TAU, 0, f.clone()).expect("valid grid params"))
        })
        .collect()
}

/// Runs every invariant suite and returns one report per suite.
pub fn run_all(opts: &VerifyOptions) -> Vec<SuiteReport> {
    let mut reports = vec![
        momentum_round_trip(opts),
        momentum_equation_bound(opts),
        energy_floor(opts),
        forcing_mean(opts),
        admissible_monotone(opts),
        energy_conservation(opts),
        monodromy_determinant(opts),
        tangent_finite_differences(opts),
        reversibility(opts),
        velocity_bound(opts),
        symplectic_determinant(opts),
        generating_periodicity(opts),
        generating_differential(opts),
        equivariance(opts),
        twist_threshold(opts),
    ];
    if let Some(params) = &opts.assert_twist {
        reports.push(twist_asserted(params, opts));
    }
    reports.extend(solver_suites(opts));
    reports.push(running_time_monotone());
    reports.push(running_orbit_consistency(opts));
    reports.push(free_running_closed_form(opts));
    reports.push(libration_symmetry(opts));
    reports.push(classify_boundaries(opts));
    reports
}

fn rng_for(opts: &VerifyOptions, salt: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(opts.seed.wrapping_mul(0x9e3779b97f4a7c15) ^ salt)
}

fn random_forced_params(rng: &mut ChaCha8Rng, max_a: f64, max_f: f64) -> PendulumParams {
    let a = rng.random_range(0.01..max_a);
    let c1 = rng.random_range(-max_f / 2.0..max_f / 2.0);
    let s2 = rng.random_range(-max_f / 2.0..max_f / 2.0);
    PendulumParams::new(
        a,
        TAU,
        0,
        ForcingSeries {
            cos: vec![c1],
            sin: vec![0.0, s2],
        },
    )
    .expect("valid random params")
}

fn momentum_round_trip(opts: &VerifyOptions) -> SuiteReport {
    let mut rng = rng_for(opts, 1);
    let mut worst = 0.0f64;
    for _ in 0..1000 {
        let v = rng.random_range(-0.999..0.999);
        let p = to_momentum(v).expect("subluminal");
        worst = worst.max((to_velocity(p) - v).abs());
    }
    SuiteReport::measured(
        "model/momentum-round-trip",
        worst,
        1e-14,
        "1000 random velocities in (-0.999, 0.999)".into(),
    )
}

fn momentum_equation_bound(opts: &VerifyOptions) -> SuiteReport {
    let mut rng = rng_for(opts, 2);
    let mut worst = 0.0f64;
    for _ in 0..500 {
        let params = random_forced_params(&mut rng, 1.0, 1.0);
        let bound = params.gravity() + params.forcing().sup_norm_bound();
        let t = rng.random_range(0.0..TAU);
        let s = CylinderState::new(rng.random_range(-10.0..10.0), rng.random_range(-5.0..5.0));
        let (_, dp) = params.vector_field(t, &s);
        worst = worst.max(dp.abs() - bound);
    }
    SuiteReport::measured(
        "model/momentum-equation-bound",
        worst,
        1e-12,
        "|p'| <= a + sup|f| on 500 random samples".into(),
    )
}

fn energy_floor(opts: &VerifyOptions) -> SuiteReport {
    let mut rng = rng_for(opts, 3);
    let mut worst = 0.0f64;
    for _ in 0..1000 {
        let a = rng.random_range(0.0..1.0);
        let s = LabState::new(rng.random_range(-10.0..10.0), rng.random_range(-0.99..0.99));
        let e = energy(a, &s).expect("subluminal");
        worst = worst.max(1.0 - e);
    }
    SuiteReport::measured(
        "model/energy-floor",
        worst,
        1e-12,
        "E >= 1 on 1000 random states".into(),
    )
}

fn forcing_mean(opts: &VerifyOptions) -> SuiteReport {
    let mut rng = rng_for(opts, 4);
    let mut worst = 0.0f64;
    for _ in 0..10 {
        let n_harm = rng.random_range(1..6usize);
        let f = ForcingSeries {
            cos: (0..n_harm).map(|_| rng.random_range(-0.5..0.5)).collect(),
            sin: (0..n_harm).map(|_| rng.random_range(-0.5..0.5)).collect(),
        };
        let period = rng.random_range(1.0..20.0);
        let n = 10_000;
        let h = period / n as f64;
        let integral: f64 = (0..n)
            .map(|i| f.eval((i as f64 + 0.5) * h, period) * h)
            .sum();
        worst = worst.max(integral.abs());
    }
    SuiteReport::measured(
        "model/forcing-mean",
        worst,
        1e-12,
        "composite quadrature of f over one period, 10^4 nodes".into(),
    )
}

fn admissible_monotone(opts: &VerifyOptions) -> SuiteReport {
    let mut rng = rng_for(opts, 5);
    let mut violations = 0u32;
    for _ in 0..500 {
        let n = rng.random_range(1..6i64);
        let t1 = rng.random_range(0.5..60.0);
        let t2 = t1 + rng.random_range(0.01..30.0);
        let p1 = PendulumParams::new(0.1, t1, n, ForcingSeries::zero()).expect("params");
        let p2 = PendulumParams::new(0.1, t2, n, ForcingSeries::zero()).expect("params");
        if p1.admissible() && !p2.admissible() {
            violations += 1;
        }
    }
    SuiteReport::measured(
        "model/admissible-monotone",
        violations as f64,
        0.5,
        "admissibility is monotone in T (500 random pairs)".into(),
    )
}

fn energy_conservation(opts: &VerifyOptions) -> SuiteReport {
    let mut rng = rng_for(opts, 6);
    let mut worst = 0.0f64;
    for _ in 0..100 {
        let a = rng.random_range(0.05..1.0);
        let params = PendulumParams::autonomous(a, TAU).expect("params");
        let s0 = CylinderState::new(rng.random_range(0.0..TAU), rng.random_range(-3.0..3.0));
        let e0 = energy(a, &LabState::new(s0.q, s0.velocity())).expect("state");
        match flow(&params, &s0, 0.0, 10.0 * TAU, &opts.integrator) {
            Ok(s1) => {
                let e1 = energy(a, &LabState::new(s1.q, s1.velocity())).expect("state");
                worst = worst.max((e1 - e0).abs());
            }
            Err(e) => return SuiteReport::failed("integrate/energy-conservation", e.to_string()),
        }
    }
    SuiteReport::measured(
        "integrate/energy-conservation",
        worst,
        1e-9,
        "autonomous energy drift over [0, 10T], 100 random states".into(),
    )
}

fn monodromy_determinant(opts: &VerifyOptions) -> SuiteReport {
    let mut rng = rng_for(opts, 7);
    let mut worst = 0.0f64;
    for _ in 0..100 {
        let params = random_forced_params(&mut rng, 1.0, 1.0);
        let s0 = CylinderState::new(rng.random_range(0.0..TAU), rng.random_range(-3.0..3.0));
        match flow_with_tangent(&params, &s0, 0.0, TAU, &opts.integrator) {
            Ok(r) => worst = worst.max((r.det() - 1.0).abs()),
            Err(e) => return SuiteReport::failed("integrate/monodromy-det", e.to_string()),
        }
    }
    SuiteReport::measured(
        "integrate/monodromy-det",
        worst,
        1e-8,
        "|det M - 1| over one period, 100 random cases".into(),
    )
}

fn tangent_finite_differences(opts: &VerifyOptions) -> SuiteReport {
    let mut rng = rng_for(opts, 8);
    let mut worst = 0.0f64;
    let h = 1e-6;
    for _ in 0..100 {
        let params = random_forced_params(&mut rng, 0.5, 0.4);
        let s0 = CylinderState::new(rng.random_range(0.0..TAU), rng.random_range(-2.0..2.0));
        let run = || -> Result<f64> {
            let tang = flow_with_tangent(&params, &s0, 0.0, TAU, &opts.integrator)?;
            let mut dev = 0.0f64;
            for (dq, dp, col) in [(h, 0.0, 0), (0.0, h, 1)] {
                let plus = flow(
                    &params,
                    &CylinderState::new(s0.q + dq, s0.p + dp),
                    0.0,
                    TAU,
                    &opts.integrator,
                )?;
                let minus = flow(
                    &params,
                    &CylinderState::new(s0.q - dq, s0.p - dp),
                    0.0,
                    TAU,
                    &opts.integrator,
                )?;
                dev = dev
                    .max((tang.monodromy[(0, col)] - (plus.q - minus.q) / (2.0 * h)).abs())
                    .max((tang.monodromy[(1, col)] - (plus.p - minus.p) / (2.0 * h)).abs());
            }
            Ok(dev)
        };
        match run() {
            Ok(dev) => worst = worst.max(dev),
            Err(e) => return SuiteReport::failed("integrate/tangent-fd", e.to_string()),
        }
    }
    SuiteReport::measured(
        "integrate/tangent-fd",
        worst,
        1e-5,
        "monodromy columns vs central differences, 100 random cases".into(),
    )
}

fn reversibility(opts: &VerifyOptions) -> SuiteReport {
    let mut rng = rng_for(opts, 9);
    let mut worst = 0.0f64;
    for _ in 0..100 {
        let a = rng.random_range(0.05..1.0);
        let params = PendulumParams::autonomous(a, TAU).expect("params");
        let s0 = CylinderState::new(rng.random_range(0.0..TAU), rng.random_range(-2.0..2.0));
        let run = || -> Result<f64> {
            let s1 = flow(&params, &s0, 0.0, TAU, &opts.integrator)?;
            let s2 = flow(
                &params,
                &CylinderState::new(s1.q, -s1.p),
                0.0,
                TAU,
                &opts.integrator,
            )?;
            Ok((s2.q - s0.q).abs().max((-s2.p - s0.p).abs()))
        };
        match run() {
            Ok(dev) => worst = worst.max(dev),
            Err(e) => return SuiteReport::failed("integrate/reversibility", e.to_string()),
        }
    }
    SuiteReport::measured(
        "integrate/reversibility",
        worst,
        1e-8,
        "R∘S∘R∘S = Id for the time-reversal R(q,p) = (q,-p), 100 cases".into(),
    )
}

fn velocity_bound(opts: &VerifyOptions) -> SuiteReport {
    let mut rng = rng_for(opts, 10);
    // max |v| - 1 over all samples; must stay strictly negative.
    let mut worst = -1.0f64;
    for _ in 0..100 {
        let params = random_forced_params(&mut rng, 1.0, 1.0);
        let s0 = CylinderState::new(rng.random_range(0.0..TAU), rng.random_range(-4.0..4.0));
        match sample_trajectory(&params, &s0, 0.0, TAU, 11, &opts.integrator) {
            Ok(rows) => {
                for r in rows {
                    worst = worst.max(r.v.abs() - 1.0);
                }
            }
            Err(e) => return SuiteReport::failed("integrate/velocity-bound", e.to_string()),
        }
    }
    SuiteReport::measured(
        "integrate/velocity-bound",
        worst,
        -1e-15,
        "sampled |v| < 1 strictly, 100 random trajectories".into(),
    )
}

fn symplectic_determinant(opts: &VerifyOptions) -> SuiteReport {
    let mut rng = rng_for(opts, 11);
    let mut worst = 0.0f64;
    for _ in 0..10 {
        let params = random_forced_params(&mut rng, 0.25, 0.3);
        let bound = match strip_bound(&params) {
            Ok(b) => b,
            Err(e) => return SuiteReport::failed("poincare/symplectic-det", e.to_string()),
        };
        for i in 0..16 {
            for j in 0..16 {
                let q = TAU * i as f64 / 16.0;
                let p = -bound.p_tilde + 2.0 * bound.p_tilde * j as f64 / 15.0;
                match poincare_map_with_tangent(&params, &CylinderState::new(q, p), &opts.integrator)
                {
                    Ok(r) => worst = worst.max((r.det() - 1.0).abs()),
                    Err(e) => {
                        return SuiteReport::failed("poincare/symplectic-det", e.to_string())
                    }
                }
            }
        }
    }
    SuiteReport::measured(
        "poincare/symplectic-det",
        worst,
        1e-8,
        "|det DS - 1| on a 16x16 strip grid, 10 random parameter sets".into(),
    )
}

fn generating_periodicity(opts: &VerifyOptions) -> SuiteReport {
    let params = PendulumParams::new(0.2, TAU, 0, ForcingSeries::first_harmonic(0.1, 0.0))
        .expect("params");
    let mut worst = 0.0f64;
    for i in 0..8 {
        for j in 0..8 {
            let theta = TAU * i as f64 / 8.0;
            let r = -2.0 + 4.0 * j as f64 / 7.0;
            let run = || -> Result<f64> {
                let v1 = generating_function(&params, theta, r, &opts.integrator)?;
                let v2 = generating_function(&params, theta + TAU, r, &opts.integrator)?;
                Ok((v2 - v1).abs())
            };
            match run() {
                Ok(dev) => worst = worst.max(dev),
                Err(e) => return SuiteReport::failed("poincare/generating-periodicity", e.to_string()),
            }
        }
    }
    SuiteReport::measured(
        "poincare/generating-periodicity",
        worst,
        1e-8,
        "V(θ+2π, r) = V(θ, r) on an 8x8 grid".into(),
    )
}

fn generating_differential(opts: &VerifyOptions) -> SuiteReport {
    let params = PendulumParams::new(0.2, TAU, 0, ForcingSeries::first_harmonic(0.1, 0.0))
        .expect("params");
    let h = 1e-5;
    let mut worst = 0.0f64;
    for i in 0..8 {
        for j in 0..8 {
            let theta = TAU * i as f64 / 8.0;
            let r = -1.5 + 3.0 * j as f64 / 7.0;
            let run = || -> Result<f64> {
                let v = |th: f64, rr: f64| generating_function(&params, th, rr, &opts.integrator);
                let v_theta = (v(theta + h, r)? - v(theta - h, r)?) / (2.0 * h);
                let v_r = (v(theta, r + h)? - v(theta, r - h)?) / (2.0 * h);
                let t = poincare_map_with_tangent(
                    &params,
                    &CylinderState::new(theta, r),
                    &opts.integrator,
                )?;
                let expect_theta = t.state.p * t.monodromy[(0, 0)] - r;
                let expect_r = t.state.p * t.monodromy[(0, 1)];
                Ok((v_theta - expect_theta).abs().max((v_r - expect_r).abs()))
            };
            match run() {
                Ok(dev) => worst = worst.max(dev),
                Err(e) => return SuiteReport::failed("poincare/generating-differential", e.to_string()),
            }
        }
    }
    SuiteReport::measured(
        "poincare/generating-differential",
        worst,
        1e-5,
        "finite-difference dV vs p(T)·dq(T) - p dq on an 8x8 grid".into(),
    )
}

fn equivariance(opts: &VerifyOptions) -> SuiteReport {
    let mut rng = rng_for(opts, 12);
    let mut worst = 0.0f64;
    for _ in 0..50 {
        let params = random_forced_params(&mut rng, 1.0, 0.5);
        let s = CylinderState::new(rng.random_range(0.0..TAU), rng.random_range(-2.0..2.0));
        let run = || -> Result<f64> {
            let base = poincare_map(&params, &s, &opts.integrator)?;
            let shifted = poincare_map(
                &params,
                &CylinderState::new(s.q + TAU, s.p),
                &opts.integrator,
            )?;
            Ok((shifted.q - base.q - TAU).abs().max((shifted.p - base.p).abs()))
        };
        match run() {
            Ok(dev) => worst = worst.max(dev),
            Err(e) => return SuiteReport::failed("poincare/equivariance", e.to_string()),
        }
    }
    SuiteReport::measured(
        "poincare/equivariance",
        worst,
        1e-9,
        "S(q+2π, p) = S(q, p) + (2π, 0), 50 random cases".into(),
    )
}

fn twist_threshold(opts: &VerifyOptions) -> SuiteReport {
    let mut min_margin = f64::INFINITY;
    for &a in &[0.05, 0.1, 0.2, 0.24] {
        let params = PendulumParams::autonomous(a, TAU).expect("params");
        match twist_margin(&params, (-2.26, 2.26), 16, &opts.integrator) {
            Ok(m) => min_margin = min_margin.min(m),
            Err(e) => return SuiteReport::failed("poincare/twist-threshold", e.to_string()),
        }
    }
    // Optimality: just above the threshold the twist fails at the origin,
    // where the closed form is sin(T sqrt a)/sqrt a < 0 for a = 0.3, T = 2π.
    let beyond = PendulumParams::autonomous(0.3, TAU).expect("params");
    let counterexample = match twist_margin(&beyond, (0.0, 0.0), 1, &opts.integrator) {
        Ok(m) => m,
        Err(e) => return SuiteReport::failed("poincare/twist-threshold", e.to_string()),
    };
    let expect = (TAU * 0.3f64.sqrt()).sin() / 0.3f64.sqrt();
    let violation = (-min_margin)
        .max(counterexample) // must be negative
        .max((counterexample - expect).abs() - 1e-3);
    SuiteReport::measured(
        "poincare/twist-threshold",
        violation,
        0.0,
        format!(
            "min dQ/dp over a<=0.24 grids {min_margin:.3e}; counterexample at a=0.3: {counterexample:.4}"
        ),
    )
}

fn twist_asserted(params: &PendulumParams, opts: &VerifyOptions) -> SuiteReport {
    let bound = match strip_bound(params) {
        Ok(b) => b,
        Err(e) => return SuiteReport::failed("poincare/twist-asserted", e.to_string()),
    };
    match twist_margin(params, (-bound.p_tilde, bound.p_tilde), 16, &opts.integrator) {
        Ok(m) => SuiteReport::measured(
            "poincare/twist-asserted",
            -m,
            0.0,
            format!("min dQ/dp over the configured strip: {m:.6e}"),
        ),
        Err(e) => SuiteReport::failed("poincare/twist-asserted", e.to_string()),
    }
}

fn solver_suites(opts: &VerifyOptions) -> Vec<SuiteReport> {
    let mut params_list = acceptance_grid();
    params_list.push(PendulumParams::autonomous(0.0, TAU).expect("free rotator"));
    let free_index = params_list.len() - 1;

    let mut outcomes = Vec::new();
    for params in &params_list {
        match find_fixed_points(params, &opts.solver, &opts.integrator) {
            Ok(set) => outcomes.push(set),
            Err(e) => {
                let msg = format!("find_fixed_points failed: {e}");
                return vec![
                    SuiteReport::failed("solver/existence", msg.clone()),
                    SuiteReport::failed("solver/residual-doubled", msg.clone()),
                    SuiteReport::failed("solver/index-range-and-sum", msg.clone()),
                    SuiteReport::failed("solver/instability", msg.clone()),
                    SuiteReport::failed("solver/index-slope", msg.clone()),
                    SuiteReport::failed("solver/degeneracy-exclusive", msg),
                ];
            }
        }
    }

    // Existence: every grid run yields >= 2 orbits or a continuum.
    let mut existence_violation = 0.0f64;
    for (params, set) in params_list.iter().zip(&outcomes) {
        let enough = match set {
            FixedPointSet::Continuum { .. } => true,
            FixedPointSet::Isolated { orbits, .. } => orbits.len() >= 2,
        };
        if !enough {
            existence_violation += 1.0;
            log::warn!(
                "existence shortfall for a = {}, forcing {:?}",
                params.gravity(),
                params.forcing()
            );
        }
    }
    let existence = SuiteReport::measured(
        "solver/existence",
        existence_violation,
        0.5,
        format!("{} parameter sets, two orbits or a continuum each", params_list.len()),
    );

    // Residuals re-evaluated at a hundredfold tighter integrator tolerance.
    let sharp = opts.integrator.sharpened(1e-2);
    let mut worst_residual = 0.0f64;
    'outer: for (params, set) in params_list.iter().zip(&outcomes) {
        for orbit in set.orbits() {
            match poincare_map(params, &orbit.state(), &sharp) {
                Ok(s) => {
                    let res =
                        ((s.q - orbit.q0).powi(2) + (s.p - orbit.p0).powi(2)).sqrt();
                    worst_residual = worst_residual.max(res);
                }
                Err(e) => {
                    worst_residual = f64::INFINITY;
                    log::warn!("residual re-evaluation failed: {e}");
                    break 'outer;
                }
            }
        }
    }
    let residual = SuiteReport::measured(
        "solver/residual-doubled",
        worst_residual,
        1e-10,
        "orbit residuals re-evaluated at 100x tighter tolerances".into(),
    );

    // Indices lie in {-1, 0, 1} and sum to zero per isolated run.
    let mut index_violation = 0.0f64;
    for set in &outcomes {
        if let FixedPointSet::Isolated { orbits, .. } = set {
            let mut sum = 0i32;
            for o in orbits {
                match o.index {
                    Some(i) if (-1..=1).contains(&i) => sum += i,
                    Some(_) => index_violation += 1.0,
                    None => index_violation += 1.0,
                }
            }
            if sum != 0 {
                index_violation += 1.0;
            }
        }
    }
    let index = SuiteReport::measured(
        "solver/index-range-and-sum",
        index_violation,
        0.5,
        "indices in {-1,0,1} with zero sum over each strip".into(),
    );

    // At least one unstable orbit whenever orbits are isolated.
    let mut instability_violation = 0.0f64;
    for set in &outcomes {
        if let FixedPointSet::Isolated { orbits, .. } = set {
            if !orbits.iter().any(|o| o.unstable) {
                instability_violation += 1.0;
            }
        }
    }
    let instability = SuiteReport::measured(
        "solver/instability",
        instability_violation,
        0.5,
        "every isolated run certifies one unstable orbit".into(),
    );

    // Winding index agrees with -sign(Φ') at every transversal zero.
    let mut slope_violation = 0.0f64;
    'slopes: for (params, set) in params_list.iter().zip(&outcomes) {
        if let FixedPointSet::Isolated { orbits, no_twist_fallback: false } = set {
            let bound = match strip_bound(params) {
                Ok(b) => b,
                Err(e) => {
                    log::warn!("strip bound failed in slope check: {e}");
                    slope_violation = f64::INFINITY;
                    break 'slopes;
                }
            };
            for o in orbits {
                match phi_slope(params, o.q0, &bound, &opts.integrator) {
                    Ok(slope) if slope.abs() > 1e-6 => {
                        if o.index != Some(-slope.signum() as i32) {
                            slope_violation += 1.0;
                        }
                    }
                    Ok(_) => {}
                    Err(e) => {
                        log::warn!("phi slope failed: {e}");
                        slope_violation = f64::INFINITY;
                        break 'slopes;
                    }
                }
            }
        }
    }
    let slope = SuiteReport::measured(
        "solver/index-slope",
        slope_violation,
        0.5,
        "index = -sign(Φ') wherever |Φ'| > 1e-6".into(),
    );

    // The free rotator is a continuum, forced runs are not, and each outcome
    // is exclusively one of the two.
    let mut degen_violation = 0.0f64;
    if !outcomes[free_index].is_continuum() {
        degen_violation += 1.0;
    }
    for set in &outcomes[..free_index] {
        if set.is_continuum() {
            degen_violation += 1.0;
        }
    }
    let degeneracy = SuiteReport::measured(
        "solver/degeneracy-exclusive",
        degen_violation,
        0.5,
        "continuum exactly for the free rotator, never alongside orbits".into(),
    );

    vec![existence, residual, index, instability, slope, degeneracy]
}

fn running_time_monotone() -> SuiteReport {
    let a = 0.1;
    let mut prev = f64::INFINITY;
    let mut violation = 0.0f64;
    for i in 0..50 {
        let e = 1.0 + 2.0 * a + 0.01 + 10.0 * i as f64 / 49.0;
        match running_time(a, e, 1) {
            Ok(t) => {
                if t >= prev {
                    violation += 1.0;
                }
                prev = t;
            }
            Err(e) => return SuiteReport::failed("autonomous/tn-monotone", e.to_string()),
        }
    }
    SuiteReport::measured(
        "autonomous/tn-monotone",
        violation,
        0.5,
        "T_N strictly decreasing on 50 increasing energies".into(),
    )
}

fn running_orbit_consistency(opts: &VerifyOptions) -> SuiteReport {
    let a = 0.1;
    let mut worst_time = 0.0f64;
    let mut worst_energy = 0.0f64;
    for &e in &[1.3, 1.5, 2.5] {
        let run = || -> Result<(f64, f64)> {
            let t_pred = running_time(a, e, 1)?;
            let v0 = crate::autonomous::running_velocity(a, e, 0.0)?;
            let p0 = to_momentum(v0)?;
            // Integrate in zero-drift transformed coordinates (q = x here).
            let params = PendulumParams::autonomous(a, TAU)?;
            let rows = sample_trajectory(
                &params,
                &CylinderState::new(0.0, p0),
                0.0,
                t_pred,
                33,
                &opts.integrator,
            )?;
            let angle_gap = (rows[rows.len() - 1].x - TAU).abs();
            let e_drift = rows
                .iter()
                .map(|r| (r.energy - e).abs())
                .fold(0.0f64, f64::max);
            Ok((angle_gap, e_drift))
        };
        match run() {
            Ok((gap, drift)) => {
                worst_time = worst_time.max(gap);
                worst_energy = worst_energy.max(drift);
            }
            Err(err) => return SuiteReport::failed("autonomous/running-consistency", err.to_string()),
        }
    }
    let violation = (worst_time / 1e-7).max(worst_energy / 1e-9);
    SuiteReport::measured(
        "autonomous/running-consistency",
        violation,
        1.0,
        format!(
            "reaches 2π at T_1(E) within {worst_time:.2e}, energy drift {worst_energy:.2e}"
        ),
    )
}

fn free_running_closed_form(opts: &VerifyOptions) -> SuiteReport {
    let mut rng = rng_for(opts, 13);
    let mut worst = 0.0f64;
    for _ in 0..20 {
        let e = rng.random_range(1.05..20.0);
        match running_time(0.0, e, 1) {
            Ok(t) => {
                let expect = TAU / (1.0f64 - 1.0 / (e * e)).sqrt();
                worst = worst.max((t - expect).abs());
            }
            Err(err) => return SuiteReport::failed("autonomous/free-closed-form", err.to_string()),
        }
    }
    SuiteReport::measured(
        "autonomous/free-closed-form",
        worst,
        1e-9,
        "T_1(E) vs 2π/sqrt(1 - 1/E^2) at a = 0, 20 random energies".into(),
    )
}

fn libration_symmetry(opts: &VerifyOptions) -> SuiteReport {
    let a = 0.25;
    let mut worst = 0.0f64;
    for &e in &[1.05, 1.2, 1.3, 1.45] {
        let run = || -> Result<f64> {
            let fwd = libration_half_period(a, e, false, &opts.integrator)?;
            let mirrored = libration_half_period(a, e, true, &opts.integrator)?;
            Ok((fwd - mirrored).abs())
        };
        match run() {
            Ok(dev) => worst = worst.max(dev),
            Err(err) => return SuiteReport::failed("autonomous/libration-symmetry", err.to_string()),
        }
    }
    SuiteReport::measured(
        "autonomous/libration-symmetry",
        worst,
        1e-10,
        "half period from x0 equals half period from -x0".into(),
    )
}

fn classify_boundaries(opts: &VerifyOptions) -> SuiteReport {
    let mut rng = rng_for(opts, 14);
    let mut violation = 0.0f64;
    for _ in 0..100 {
        let a = rng.random_range(0.01..1.0);
        if classify_energy(a, 1.0 + 2.0 * a).ok() != Some(EnergyClass::Separatrix) {
            violation += 1.0;
        }
        if classify_energy(a, 1.0).ok() != Some(EnergyClass::EquilibriumCenter) {
            violation += 1.0;
        }
        // Monotone in E: the class never steps backwards.
        let order = |c: EnergyClass| match c {
            EnergyClass::EquilibriumCenter => 0,
            EnergyClass::Libration => 1,
            EnergyClass::Separatrix => 2,
            EnergyClass::Running => 3,
        };
        let mut prev = 0;
        for i in 0..40 {
            let e = 1.0 + (2.0 * a + 0.5) * i as f64 / 39.0;
            match classify_energy(a, e) {
                Ok(c) => {
                    let now = order(c);
                    if now < prev {
                        violation += 1.0;
                    }
                    prev = now;
                }
                Err(_) => violation += 1.0,
            }
        }
    }
    SuiteReport::measured(
        "autonomous/classify-boundaries",
        violation,
        0.5,
        "exact boundary classes and monotonicity in E, 100 random a".into(),
    )
}
