//! Subcommand implementations: thin wrappers over the library with
//! deterministic file emission.

use std::f64::consts::{PI, TAU};
use std::fmt::Write as _;
use std::fs::File;
use std::io::BufReader;

use rayon::prelude::*;

use relpend::autonomous::{libration_energy_grid, libration_period, running_time};
use relpend::fmt::float17;
use relpend::integrate::{sample_trajectory, write_trajectory_csv};
use relpend::model::{CylinderState, PendulumParams};
use relpend::poincare::{
    boundary_twist_check, curve_intersection_count, params_hash, poincare_map, read_curve_csv,
    strip_bound_with_margin, twist_margin, write_twist_report, IntersectionOutcome, TwistReport,
};
use relpend::solver::{find_fixed_points, write_fixed_points_jsonl, FixedPointSet};
use relpend::verify::{run_all, VerifyOptions};

use crate::config::RunConfig;
use crate::output::atomic_write;
use crate::CmdError;

pub fn cmd_check(cfg: &RunConfig) -> Result<(), CmdError> {
    let params = cfg.require_params()?;
    let k = params.drift_speed();
    if !params.admissible() {
        println!(
            "inadmissible: |2Npi/T| = {:.6} >= 1 (N = {}, T = {:.6}); no such periodic solutions exist",
            k.abs(),
            params.winding(),
            params.period()
        );
        return Err(CmdError::silent(2));
    }
    println!("admissible: |2Npi/T| = {:.6} < 1", k.abs());

    let threshold = PI * PI / (params.period() * params.period());
    let a = params.gravity();
    if a < threshold {
        println!("twist threshold: a < pi^2/T^2 ({a} < {threshold}): twist regime");
    } else if a == threshold {
        println!(
            "twist threshold: a = pi^2/T^2 = {threshold}: boundary case (twist unless f is the resonant forcing)"
        );
    } else {
        println!("twist threshold: a > pi^2/T^2 ({a} > {threshold}): twist not guaranteed");
    }

    let bound = strip_bound_with_margin(params, cfg.solver.margin)?;
    println!(
        "strip bound: p_hat = {:.6}, p_tilde = {:.6}",
        bound.p_hat, bound.p_tilde
    );
    Ok(())
}

pub fn cmd_simulate(cfg: &RunConfig) -> Result<(), CmdError> {
    let params = cfg.require_params()?;
    let s = &cfg.simulate;
    let t1 = s.t1.unwrap_or(s.t0 + params.period());
    let rows = sample_trajectory(
        params,
        &CylinderState::new(s.q0, s.p0),
        s.t0,
        t1,
        s.samples,
        &cfg.integrator,
    )?;
    let mut buf = Vec::new();
    write_trajectory_csv(&mut buf, &rows)
        .map_err(|e| CmdError::runtime(format!("csv encode: {e}")))?;
    let path = atomic_write(&cfg.output_dir, "trajectory.csv", &buf)?;
    println!("wrote {} samples to {}", rows.len(), path.display());
    Ok(())
}

pub fn cmd_poincare_grid(cfg: &RunConfig) -> Result<(), CmdError> {
    let params = cfg.require_params()?;
    let g = &cfg.poincare_grid;
    if g.nq == 0 || g.np == 0 || g.iterations == 0 {
        return Err(CmdError::usage(
            "poincare_grid needs nq, np, iterations >= 1".into(),
        ));
    }
    let bound = strip_bound_with_margin(params, cfg.solver.margin)?;
    let p_lo = g.p_min.unwrap_or(-bound.p_tilde);
    let p_hi = g.p_max.unwrap_or(bound.p_tilde);
    if p_lo > p_hi {
        return Err(CmdError::usage("poincare_grid momentum window is empty".into()));
    }

    let seeds: Vec<CylinderState> = (0..g.nq)
        .flat_map(|i| {
            let q = TAU * i as f64 / g.nq as f64;
            (0..g.np).map(move |j| {
                let p = if g.np == 1 {
                    p_lo
                } else {
                    p_lo + (p_hi - p_lo) * j as f64 / (g.np - 1) as f64
                };
                CylinderState::new(q, p)
            })
        })
        .collect();

    let orbits: Vec<Vec<CylinderState>> = seeds
        .par_iter()
        .map(|seed| {
            let mut z = *seed;
            let mut iterates = Vec::with_capacity(g.iterations);
            for _ in 0..g.iterations {
                z = poincare_map(params, &z, &cfg.integrator)?;
                iterates.push(z);
            }
            Ok(iterates)
        })
        .collect::<Result<_, relpend::Error>>()?;

    let mut csv = String::from("q0,p0,iter,q,p\n");
    for (seed, iterates) in seeds.iter().zip(&orbits) {
        for (n, z) in iterates.iter().enumerate() {
            let _ = writeln!(
                csv,
                "{},{},{},{},{}",
                float17(seed.q),
                float17(seed.p),
                n + 1,
                float17(z.q),
                float17(z.p)
            );
        }
    }
    let path = atomic_write(&cfg.output_dir, "poincare_grid.csv", csv.as_bytes())?;
    println!(
        "wrote {} map iterates to {}",
        seeds.len() * g.iterations,
        path.display()
    );
    Ok(())
}

pub fn cmd_find_periodic(cfg: &RunConfig) -> Result<(), CmdError> {
    let params = cfg.require_params()?;
    let set = find_fixed_points(params, &cfg.solver, &cfg.integrator)?;
    let mut buf = Vec::new();
    write_fixed_points_jsonl(&mut buf, &set)
        .map_err(|e| CmdError::runtime(format!("jsonl encode: {e}")))?;
    let path = atomic_write(&cfg.output_dir, "orbits.jsonl", &buf)?;

    match &set {
        FixedPointSet::Isolated {
            orbits,
            no_twist_fallback,
        } => {
            let marker = if *no_twist_fallback {
                " (no-twist fallback: completeness not guaranteed)"
            } else {
                ""
            };
            println!("found {} periodic orbit(s){marker}:", orbits.len());
            for o in orbits {
                println!(
                    "  q0 = {:+.9}, p0 = {:+.9}, {} index {} residual {:.2e}{}",
                    o.q0,
                    o.p0,
                    o.linear_class.as_str(),
                    o.index.map_or("n/a".to_string(), |i| i.to_string()),
                    o.residual,
                    if o.unstable { ", unstable" } else { "" }
                );
            }
        }
        FixedPointSet::Continuum { curve } => {
            println!(
                "degenerate continuum of fixed points ({} curve samples, max|Phi| = {:.2e})",
                curve.len(),
                curve.max_abs_phi()
            );
        }
    }
    println!("orbit data written to {}", path.display());
    Ok(())
}

pub fn cmd_twist_map(cfg: &RunConfig) -> Result<(), CmdError> {
    let params = cfg.require_params()?;
    let t = &cfg.twist;
    let bound = strip_bound_with_margin(params, cfg.solver.margin)?;
    let region = (
        t.p_min.unwrap_or(-bound.p_tilde),
        t.p_max.unwrap_or(bound.p_tilde),
    );
    let min_twist = twist_margin(params, region, t.n_grid, &cfg.integrator)?;
    let report = TwistReport {
        min_twist,
        grid: t.n_grid,
        region,
        params_hash: params_hash(params),
    };
    let mut buf = Vec::new();
    write_twist_report(&mut buf, &report)
        .map_err(|e| CmdError::runtime(format!("report encode: {e}")))?;
    let path = atomic_write(&cfg.output_dir, "twist.json", &buf)?;

    println!(
        "twist margin over [{:.4}, {:.4}] on a {}x{} grid: {:.6e} ({})",
        region.0,
        region.1,
        t.n_grid,
        t.n_grid,
        min_twist,
        if min_twist > 0.0 {
            "twist certified on the sampled grid"
        } else {
            "twist NOT satisfied"
        }
    );

    let (min_up, max_down) = boundary_twist_check(params, &bound, t.boundary_grid, &cfg.integrator)?;
    println!(
        "boundary twist at p = ±{:.4}: min up-displacement {:.6e}, max down-displacement {:.6e}",
        bound.p_tilde, min_up, max_down
    );

    if let Some(curve_path) = &t.curve_csv {
        let file = File::open(curve_path).map_err(|e| {
            CmdError::usage(format!("cannot open curve {}: {e}", curve_path.display()))
        })?;
        let samples = read_curve_csv(BufReader::new(file))?;
        match curve_intersection_count(params, &samples, &cfg.integrator)? {
            IntersectionOutcome::InvariantCurve { max_deviation } => println!(
                "curve intersection: invariant curve (max deviation {max_deviation:.2e})"
            ),
            IntersectionOutcome::Transversal { count } => {
                println!("curve intersection: {count} transversal crossings with the image")
            }
            IntersectionOutcome::Inconclusive { q } => println!(
                "curve intersection: inconclusive, near-tangency around q = {q:.6}"
            ),
        }
    }
    println!("twist report written to {}", path.display());
    Ok(())
}

pub fn cmd_autonomous(cfg: &RunConfig) -> Result<(), CmdError> {
    let params = cfg.require_params()?;
    let a = params.gravity();
    let n = params.winding().abs();
    let sec = &cfg.autonomous;
    if a == 0.0 && n == 0 {
        return Err(CmdError::usage(
            "autonomous scan needs a > 0 (librations) or |N| >= 1 (running orbits)".into(),
        ));
    }

    // (E, class, period-or-T_N column)
    let mut rows: Vec<(f64, &'static str, String)> = Vec::new();
    if a > 0.0 {
        rows.push((1.0, "equilibrium-center", String::new()));
        let libration: Vec<(f64, &'static str, String)> = libration_energy_grid(a, sec.libration_levels)
            .into_par_iter()
            .map(|e| {
                libration_period(a, e, &cfg.integrator)
                    .map(|p| (e, "libration", float17(p)))
            })
            .collect::<Result<_, relpend::Error>>()?;
        rows.extend(libration);
        rows.push((1.0 + 2.0 * a, "separatrix", "inf".to_string()));
    }
    if n >= 1 {
        let base = 1.0 + 2.0 * a;
        let e_max = sec.e_max.unwrap_or(base + 5.0);
        if e_max <= base {
            return Err(CmdError::usage(format!(
                "autonomous e_max must exceed 1 + 2a = {base}"
            )));
        }
        let running: Vec<(f64, &'static str, String)> = (1..=sec.running_levels)
            .into_par_iter()
            .map(|j| {
                let e = base + (e_max - base) * j as f64 / sec.running_levels as f64;
                running_time(a, e, n).map(|t| (e, "running", float17(t)))
            })
            .collect::<Result<_, relpend::Error>>()?;
        rows.extend(running);
    }
    rows.sort_by(|x, y| x.0.total_cmp(&y.0));

    let mut csv = String::from("E,class,period_or_TN\n");
    for (e, class, value) in &rows {
        let _ = writeln!(csv, "{},{},{}", float17(*e), class, value);
    }
    let path = atomic_write(&cfg.output_dir, "autonomous.csv", csv.as_bytes())?;
    println!("wrote {} energy levels to {}", rows.len(), path.display());
    Ok(())
}

struct SweepRow {
    a: f64,
    period: f64,
    winding: i64,
    scale: f64,
    status: String,
    orbits: usize,
    degenerate: bool,
    min_twist: Option<f64>,
    any_unstable: bool,
    max_residual: Option<f64>,
}

pub fn cmd_sweep(cfg: &RunConfig) -> Result<(), CmdError> {
    let base = cfg.require_params()?;
    if cfg.sweep.cases.is_empty() {
        return Err(CmdError::usage("sweep needs a non-empty \"cases\" list".into()));
    }
    let jobs = cfg.sweep.jobs.max(1);
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs)
        .build()
        .map_err(|e| CmdError::runtime(format!("thread pool: {e}")))?;

    let rows: Vec<SweepRow> = pool.install(|| {
        cfg.sweep
            .cases
            .par_iter()
            .map(|case| sweep_one(cfg, base, case))
            .collect()
    });

    let mut rows = rows;
    rows.sort_by(|x, y| {
        (x.a, x.period, x.winding, x.scale)
            .partial_cmp(&(y.a, y.period, y.winding, y.scale))
            .expect("finite sweep keys")
    });

    let cell = |v: Option<f64>| v.map(float17).unwrap_or_default();
    let mut csv =
        String::from("a,T,N,forcing_scale,status,orbits,degenerate,min_twist,any_unstable,max_residual\n");
    for r in &rows {
        let _ = writeln!(
            csv,
            "{},{},{},{},{},{},{},{},{},{}",
            float17(r.a),
            float17(r.period),
            r.winding,
            float17(r.scale),
            r.status,
            r.orbits,
            r.degenerate,
            cell(r.min_twist),
            r.any_unstable,
            cell(r.max_residual)
        );
    }
    let path = atomic_write(&cfg.output_dir, "sweep.csv", csv.as_bytes())?;
    println!("wrote {} sweep rows to {}", rows.len(), path.display());

    let failures: Vec<&SweepRow> = rows.iter().filter(|r| r.status.starts_with("failed")).collect();
    if !failures.is_empty() {
        return Err(CmdError::runtime(format!(
            "{} sweep case(s) failed to converge; see {}",
            failures.len(),
            path.display()
        )));
    }
    Ok(())
}

fn sweep_one(cfg: &RunConfig, base: &PendulumParams, case: &crate::config::SweepCase) -> SweepRow {
    let mut row = SweepRow {
        a: case.a,
        period: case.period,
        winding: case.winding,
        scale: case.forcing_scale,
        status: "ok".into(),
        orbits: 0,
        degenerate: false,
        min_twist: None,
        any_unstable: false,
        max_residual: None,
    };
    let params = match PendulumParams::new(
        case.a,
        case.period,
        case.winding,
        base.forcing().scaled(case.forcing_scale),
    ) {
        Ok(p) => p,
        Err(e) => {
            row.status = format!("failed: {e}");
            return row;
        }
    };
    if !params.admissible() {
        row.status = "inadmissible".into();
        return row;
    }
    match find_fixed_points(&params, &cfg.solver, &cfg.integrator) {
        Ok(FixedPointSet::Isolated { orbits, no_twist_fallback }) => {
            row.orbits = orbits.len();
            row.any_unstable = orbits.iter().any(|o| o.unstable);
            row.max_residual = orbits
                .iter()
                .map(|o| o.residual)
                .fold(None, |m: Option<f64>, r| Some(m.map_or(r, |m| m.max(r))));
            if no_twist_fallback {
                row.status = "ok-no-twist-fallback".into();
            }
        }
        Ok(FixedPointSet::Continuum { .. }) => {
            row.degenerate = true;
        }
        Err(e) => {
            row.status = format!("failed: {e}");
            return row;
        }
    }
    match strip_bound_with_margin(&params, cfg.solver.margin).and_then(|b| {
        twist_margin(
            &params,
            (-b.p_tilde, b.p_tilde),
            cfg.twist.n_grid,
            &cfg.integrator,
        )
    }) {
        Ok(m) => row.min_twist = Some(m),
        Err(e) => {
            row.status = format!("failed: {e}");
        }
    }
    row
}

pub fn cmd_verify(cfg: &RunConfig) -> Result<(), CmdError> {
    let assert_twist = if cfg.verify.assert_twist {
        Some(cfg.require_params()?.clone())
    } else {
        None
    };
    let opts = VerifyOptions {
        integrator: cfg.integrator.clone(),
        solver: cfg.solver.clone(),
        seed: cfg.seed,
        assert_twist,
    };
    let reports = run_all(&opts);
    let mut failed = 0usize;
    for r in &reports {
        println!(
            "{:<35} {} worst {:.3e} (allowed {:.3e}) - {}",
            r.name,
            if r.passed { "PASS" } else { "FAIL" },
            r.worst,
            r.threshold,
            r.detail
        );
        if !r.passed {
            failed += 1;
        }
    }
    println!("{}/{} suites passed", reports.len() - failed, reports.len());
    if failed > 0 {
        let first = reports.iter().find(|r| !r.passed).expect("failure exists");
        return Err(CmdError::verify(format!(
            "{failed} invariant suite(s) failed, first: {}",
            first.name
        )));
    }
    Ok(())
}
