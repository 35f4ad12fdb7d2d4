//! Acceptance suite: every criterion the artifact must satisfy, one test
//! per criterion, each at its stated tolerance. Run with `--nocapture` to
//! see the per-criterion PASS lines.

use std::f64::consts::{PI, TAU};
use std::process::Command;
use std::sync::OnceLock;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use relpend::autonomous::{min_libration_period_scan, running_time, running_velocity, solve_running_energy};
use relpend::integrate::IntegratorConfig;
use relpend::model::{to_momentum, CylinderState, ForcingSeries, PendulumParams};
use relpend::poincare::{
    curve_intersection_count, generating_function, poincare_map, poincare_map_with_tangent,
    strip_bound, twist_margin, IntersectionOutcome,
};
use relpend::solver::{
    find_fixed_points, phi_slope, reconstruct_lab_solution, FixedPointSet, LinearClass,
    PeriodicOrbit, SolverConfig,
};
use relpend::verify::acceptance_grid;

fn bin() -> &'static str {
    env!("CARGO_BIN_EXE_relpend")
}

fn icfg() -> IntegratorConfig {
    IntegratorConfig::default()
}

struct GridRun {
    params: PendulumParams,
    set: FixedPointSet,
}

struct GridResults {
    /// The 12-case (a, forcing) grid with T = 2π, N = 0.
    runs: Vec<GridRun>,
    /// The a = 0 free-rotator fixture.
    free: FixedPointSet,
    elapsed: Duration,
}

/// Solves the whole existence grid once; shared across criteria.
fn grid_results() -> &'static GridResults {
    static CELL: OnceLock<GridResults> = OnceLock::new();
    CELL.get_or_init(|| {
        let scfg = SolverConfig::default();
        let start = Instant::now();
        let runs: Vec<GridRun> = acceptance_grid()
            .into_iter()
            .map(|params| {
                let set = find_fixed_points(&params, &scfg, &icfg())
                    .unwrap_or_else(|e| panic!("grid solve failed for a = {}: {e}", params.gravity()));
                GridRun { params, set }
            })
            .collect();
        let free_params = PendulumParams::autonomous(0.0, TAU).unwrap();
        let free = find_fixed_points(&free_params, &scfg, &icfg()).expect("free rotator solve");
        GridResults {
            runs,
            free,
            elapsed: start.elapsed(),
        }
    })
}

/// Independent fixed-step RK4 transport of the transformed system.
fn rk4_map(params: &PendulumParams, s0: &CylinderState, steps: usize) -> CylinderState {
    let h = params.period() / steps as f64;
    let f = |t: f64, y: &[f64; 2]| {
        let (dq, dp) = params.vector_field(t, &CylinderState::new(y[0], y[1]));
        [dq, dp]
    };
    let mut y = [s0.q, s0.p];
    for i in 0..steps {
        let t = i as f64 * h;
        let k1 = f(t, &y);
        let k2 = f(t + 0.5 * h, &[y[0] + 0.5 * h * k1[0], y[1] + 0.5 * h * k1[1]]);
        let k3 = f(t + 0.5 * h, &[y[0] + 0.5 * h * k2[0], y[1] + 0.5 * h * k2[1]]);
        let k4 = f(t + h, &[y[0] + h * k3[0], y[1] + h * k3[1]]);
        y[0] += h / 6.0 * (k1[0] + 2.0 * k2[0] + 2.0 * k3[0] + k4[0]);
        y[1] += h / 6.0 * (k1[1] + 2.0 * k2[1] + 2.0 * k3[1] + k4[1]);
    }
    CylinderState::new(y[0], y[1])
}

fn check_exit(dir: &std::path::Path, a: f64, period: f64, winding: i64) -> i32 {
    let config = dir.join(format!("check_{winding}_{period}.json"));
    std::fs::write(
        &config,
        format!(r#"{{"params": {{"a": {a}, "T": {period}, "N": {winding}}}}}"#),
    )
    .unwrap();
    Command::new(bin())
        .args(["check", "--config"])
        .arg(&config)
        .output()
        .expect("run relpend check")
        .status
        .code()
        .expect("exit code")
}

#[test]
fn criterion_1_necessary_condition() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(check_exit(dir.path(), 0.2, TAU, 1), 2, "N=1, T=2π must be rejected");
    assert_eq!(check_exit(dir.path(), 0.2, TAU, 2), 2, "N=2, T=2π must be rejected");
    assert_eq!(check_exit(dir.path(), 0.2, 10.0, 1), 0, "N=1, T=10 must be accepted");

    // Every orbit the solver emits lives on admissible parameters and keeps
    // |x'| < 1 - 1e-6 along the reconstructed solution. Exact, no tolerance.
    let results = grid_results();
    let mut orbits_seen = 0usize;
    for run in &results.runs {
        assert!(run.params.drift_speed().abs() < 1.0);
        for orbit in run.set.orbits() {
            let rows = reconstruct_lab_solution(&run.params, orbit, 256, &icfg()).unwrap();
            let vmax = rows.iter().map(|r| r.v.abs()).fold(0.0f64, f64::max);
            assert!(vmax < 1.0 - 1e-6, "orbit at q0 = {} has vmax = {vmax}", orbit.q0);
            orbits_seen += 1;
        }
    }
    assert!(orbits_seen >= 24, "expected the full grid's orbits, saw {orbits_seen}");
    println!("[acceptance] criterion 1 (necessary condition |2Nπ/T| < 1): PASS");
}

#[test]
fn criterion_2_two_solution_existence() {
    let results = grid_results();
    assert_eq!(results.runs.len(), 12);
    for run in &results.runs {
        match &run.set {
            FixedPointSet::Isolated { orbits, no_twist_fallback } => {
                assert!(!no_twist_fallback, "twist route must succeed on the grid");
                assert!(
                    orbits.len() >= 2,
                    "a = {}, forcing {:?}: found {} orbits",
                    run.params.gravity(),
                    run.params.forcing(),
                    orbits.len()
                );
                for o in orbits {
                    assert!(o.residual < 1e-10, "residual {} at q0 = {}", o.residual, o.q0);
                }
            }
            FixedPointSet::Continuum { .. } => {
                panic!("forced/grid runs must not be degenerate (a = {})", run.params.gravity())
            }
        }
    }
    // The a = 0 fixture degenerates to the free-rotator continuum.
    assert!(results.free.is_continuum(), "a = 0 must yield the continuum");
    assert!(
        results.elapsed < Duration::from_secs(30),
        "existence grid took {:?} (budget 30 s)",
        results.elapsed
    );
    println!(
        "[acceptance] criterion 2 (two solutions on the grid, {:?}): PASS",
        results.elapsed
    );
}

#[test]
fn criterion_3_autonomous_exactness() {
    let params = PendulumParams::autonomous(0.2, TAU).unwrap();
    let set = find_fixed_points(&params, &SolverConfig::default(), &icfg()).unwrap();
    let FixedPointSet::Isolated { orbits, .. } = &set else {
        panic!("autonomous a = 0.2 must have isolated orbits");
    };
    assert_eq!(orbits.len(), 2, "exactly the two equilibria");
    let center = orbits
        .iter()
        .find(|o| o.linear_class == LinearClass::Elliptic)
        .expect("center exists");
    let saddle = orbits
        .iter()
        .find(|o| o.linear_class == LinearClass::Hyperbolic)
        .expect("saddle exists");

    let circ = |q: f64, target: f64| {
        let d = (q - target).rem_euclid(TAU);
        d.min(TAU - d)
    };
    assert!(circ(center.q0, 0.0) < 1e-9 && center.p0.abs() < 1e-9);
    assert!(circ(saddle.q0, PI) < 1e-9 && saddle.p0.abs() < 1e-9);

    let sqrt_a = 0.2f64.sqrt();
    let trace_center = 2.0 * (TAU * sqrt_a).cos();
    let trace_saddle = 2.0 * (TAU * sqrt_a).cosh();
    assert!(
        (center.trace - trace_center).abs() / trace_center.abs() < 1e-5,
        "center trace {} vs {}",
        center.trace,
        trace_center
    );
    assert!(
        (saddle.trace - trace_saddle).abs() / trace_saddle < 1e-5,
        "saddle trace {} vs {}",
        saddle.trace,
        trace_saddle
    );

    let min_period = min_libration_period_scan(0.25, 50, &icfg()).unwrap();
    assert!(min_period > TAU, "min libration period {min_period} must exceed 2π");
    println!("[acceptance] criterion 3 (autonomous equilibria, traces, min period {min_period:.4} > 2π): PASS");
}

#[test]
fn criterion_4_twist_threshold() {
    for run in &grid_results().runs {
        let bound = strip_bound(&run.params).unwrap();
        let margin = twist_margin(
            &run.params,
            (-bound.p_tilde, bound.p_tilde),
            32,
            &icfg(),
        )
        .unwrap();
        assert!(
            margin > 0.0,
            "twist margin {margin} for a = {} must be positive",
            run.params.gravity()
        );
    }

    // Optimality of a <= π²/T²: just beyond it the twist fails at the
    // equilibrium, with the closed-form derivative sin(2π sqrt a)/sqrt a.
    let beyond = PendulumParams::autonomous(0.3, TAU).unwrap();
    let value = twist_margin(&beyond, (0.0, 0.0), 1, &icfg()).unwrap();
    let expect = (TAU * 0.3f64.sqrt()).sin() / 0.3f64.sqrt();
    assert!(
        (value - expect).abs() < 1e-3,
        "counterexample derivative {value} vs closed form {expect}"
    );
    assert!(value < 0.0);

    let boundary = PendulumParams::autonomous(0.25, TAU).unwrap();
    let value = twist_margin(&boundary, (0.0, 0.0), 1, &icfg()).unwrap();
    assert!(value.abs() < 1e-7, "a = π²/T² derivative must vanish, got {value}");
    println!("[acceptance] criterion 4 (twist threshold and optimality): PASS");
}

#[test]
fn criterion_5_exact_symplecticity() {
    let cfg = icfg();
    // det DS = 1 on a 16x16 strip grid for three representative runs.
    for (a, forcing) in [
        (0.05, ForcingSeries::first_harmonic(0.1, 0.0)),
        (0.2, ForcingSeries { cos: vec![0.1], sin: vec![0.0, 0.05] }),
        (0.24, ForcingSeries::zero()),
    ] {
        let params = PendulumParams::new(a, TAU, 0, forcing).unwrap();
        let bound = strip_bound(&params).unwrap();
        for i in 0..16 {
            for j in 0..16 {
                let q = TAU * i as f64 / 16.0;
                let p = -bound.p_tilde + 2.0 * bound.p_tilde * j as f64 / 15.0;
                let t = poincare_map_with_tangent(&params, &CylinderState::new(q, p), &cfg)
                    .unwrap();
                assert!(
                    (t.det() - 1.0).abs() < 1e-8,
                    "det {} at a = {a}, (q, p) = ({q}, {p})",
                    t.det()
                );
            }
        }
    }

    // Generating-function periodicity and differential identity.
    let params =
        PendulumParams::new(0.2, TAU, 0, ForcingSeries::first_harmonic(0.1, 0.0)).unwrap();
    let h = 1e-5;
    for i in 0..8 {
        for j in 0..8 {
            let theta = TAU * i as f64 / 8.0;
            let r = -1.5 + 3.0 * j as f64 / 7.0;
            let v0 = generating_function(&params, theta, r, &cfg).unwrap();
            let v_shift = generating_function(&params, theta + TAU, r, &cfg).unwrap();
            assert!((v_shift - v0).abs() < 1e-8, "V periodicity at ({theta}, {r})");

            let v = |th: f64, rr: f64| generating_function(&params, th, rr, &cfg).unwrap();
            let v_theta = (v(theta + h, r) - v(theta - h, r)) / (2.0 * h);
            let v_r = (v(theta, r + h) - v(theta, r - h)) / (2.0 * h);
            let t = poincare_map_with_tangent(&params, &CylinderState::new(theta, r), &cfg)
                .unwrap();
            let expect_theta = t.state.p * t.monodromy[(0, 0)] - r;
            let expect_r = t.state.p * t.monodromy[(0, 1)];
            assert!((v_theta - expect_theta).abs() < 1e-5, "V_θ at ({theta}, {r})");
            assert!((v_r - expect_r).abs() < 1e-5, "V_r at ({theta}, {r})");
        }
    }

    // Free case: the integrand is constant, V = -T/sqrt(1+r^2).
    let free = PendulumParams::autonomous(0.0, TAU).unwrap();
    for j in 0..8 {
        let r = -2.0 + 4.0 * j as f64 / 7.0;
        let v = generating_function(&free, 0.3, r, &cfg).unwrap();
        let expect = -TAU / (1.0 + r * r).sqrt();
        assert!((v - expect).abs() < 1e-9, "free V at r = {r}: {v} vs {expect}");
    }
    println!("[acceptance] criterion 5 (exact symplecticity and generating function): PASS");
}

#[test]
fn criterion_6_index_and_instability() {
    let results = grid_results();
    for run in &results.runs {
        let FixedPointSet::Isolated { orbits, .. } = &run.set else {
            continue;
        };
        let mut sum = 0i32;
        for o in orbits {
            let idx = o.index.expect("index computed for isolated orbits");
            assert!((-1..=1).contains(&idx), "index {idx} out of range");
            sum += idx;
        }
        assert_eq!(sum, 0, "index sum for a = {}", run.params.gravity());

        if !run.params.forcing().is_zero() {
            assert!(
                orbits.iter().any(|o| o.unstable),
                "forced run a = {} must flag an unstable orbit",
                run.params.gravity()
            );
        }

        let bound = strip_bound(&run.params).unwrap();
        for o in orbits {
            let slope = phi_slope(&run.params, o.q0, &bound, &icfg()).unwrap();
            if slope.abs() > 1e-6 {
                assert_eq!(
                    o.index,
                    Some(-slope.signum() as i32),
                    "index vs Φ' sign at q0 = {} (slope {slope})",
                    o.q0
                );
            }
        }
    }
    println!("[acceptance] criterion 6 (indices in {{-1,0,1}}, zero sum, instability): PASS");
}

#[test]
fn criterion_7_running_solutions() {
    // Free case: solve_running_energy inverts the closed form to 1e-8.
    for &period in &[4.0 * PI, 10.471975511965978, 3.0 * TAU] {
        let e = solve_running_energy(0.0, period, 1).unwrap();
        let k = TAU / period;
        let exact = 1.0 / (1.0 - k * k).sqrt();
        assert!(
            (e - exact).abs() < 1e-8,
            "free inversion at T = {period}: {e} vs {exact}"
        );
    }

    // Relativistic case a = 0.1, N = 1, T = 4π: reconstruct the orbit.
    let (a, n, period) = (0.1, 1i64, 4.0 * PI);
    let e_star = solve_running_energy(a, period, n).unwrap();
    assert!((running_time(a, e_star, n).unwrap() - period).abs() < 1e-9 * period);

    let params = PendulumParams::new(a, period, n, ForcingSeries::zero()).unwrap();
    let v0 = running_velocity(a, e_star, 0.0).unwrap();
    let orbit = PeriodicOrbit {
        q0: 0.0,
        p0: to_momentum(v0).unwrap(),
        residual: 0.0,
        index: None,
        trace: 2.0,
        linear_class: LinearClass::Parabolic,
        winding: n,
        unstable: false,
    };
    // It really is a fixed point of the return map.
    let s = poincare_map(&params, &orbit.state(), &icfg()).unwrap();
    let residual = ((s.q - orbit.q0).powi(2) + (s.p - orbit.p0).powi(2)).sqrt();
    assert!(residual < 1e-8, "running orbit residual {residual}");

    let rows = reconstruct_lab_solution(&params, &orbit, 65, &icfg()).unwrap();
    let gained = rows[rows.len() - 1].x - rows[0].x;
    assert!((gained - TAU).abs() < 1e-8, "winding gain {gained}");
    let drift = rows
        .iter()
        .map(|r| (r.energy - e_star).abs())
        .fold(0.0f64, f64::max);
    assert!(drift < 1e-9, "energy drift {drift}");
    println!("[acceptance] criterion 7 (running solutions, E* = {e_star:.9}): PASS");
}

#[test]
fn criterion_8_intersection_property() {
    let params =
        PendulumParams::new(0.2, TAU, 0, ForcingSeries::first_harmonic(0.1, 0.0)).unwrap();
    let curves: [&dyn Fn(f64) -> f64; 5] = [
        &|q| 0.2 * q.sin(),
        &|_| 0.5,
        &|q| -0.3 + 0.1 * q.cos(),
        &|q| 0.35 * (2.0 * q).sin(),
        &|q| 0.1 * q.cos() + 0.15 * (3.0 * q).sin(),
    ];
    for (k, gamma) in curves.iter().enumerate() {
        let samples: Vec<(f64, f64)> = (0..512)
            .map(|i| {
                let q = TAU * i as f64 / 512.0;
                (q, gamma(q))
            })
            .collect();
        match curve_intersection_count(&params, &samples, &icfg()).unwrap() {
            IntersectionOutcome::Transversal { count } => {
                assert!(count >= 2, "curve {k} crossed its image only {count} times")
            }
            IntersectionOutcome::InvariantCurve { .. } => {}
            IntersectionOutcome::Inconclusive { q } => {
                panic!("curve {k} hit a tangency near q = {q}")
            }
        }
    }
    println!("[acceptance] criterion 8 (strong intersection property on 5 fixtures): PASS");
}

#[test]
fn criterion_9_oracle_equivalence() {
    let mut rng = ChaCha8Rng::seed_from_u64(20260810);
    let mut worst = 0.0f64;
    for case in 0..20 {
        let winding = i64::from(case % 2 == 1);
        let period = if winding == 0 {
            rng.random_range(4.0..10.0)
        } else {
            rng.random_range(8.0..16.0)
        };
        let a = rng.random_range(0.02..0.5);
        let forcing = ForcingSeries {
            cos: vec![rng.random_range(-0.15..0.15)],
            sin: vec![0.0, rng.random_range(-0.15..0.15)],
        };
        let params = PendulumParams::new(a, period, winding, forcing).unwrap();
        assert!(params.admissible());
        let s0 = CylinderState::new(rng.random_range(0.0..TAU), rng.random_range(-2.0..2.0));

        let adaptive = poincare_map(&params, &s0, &icfg()).unwrap();
        let reference = rk4_map(&params, &s0, 1_000_000);
        let dev = (adaptive.q - reference.q)
            .abs()
            .max((adaptive.p - reference.p).abs());
        assert!(
            dev < 1e-8,
            "case {case}: adaptive vs RK4 oracle differ by {dev}"
        );
        worst = worst.max(dev);
    }
    println!("[acceptance] criterion 9 (fixed-step RK4 oracle agreement, worst {worst:.2e}): PASS");
}
