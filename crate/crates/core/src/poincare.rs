//! The time-T return map in transformed coordinates and its diagnostics:
//! exact symplecticity through the generating function, the invariant strip
//! bound, boundary twist, the twist margin and curve intersections.
//!
//! All maps here are lifts: they commute with `q ↦ q + 2π` up to the
//! translation `(2π, 0)`, so angles stay unbounded reals and winding counts
//! survive.

use std::io::{self, BufRead, Write};

use rayon::prelude::*;
use sha2::{Digest, Sha256};

use crate::integrate::{flow, flow_with_tangent, IntegratorConfig, TangentFlowResult};
use crate::model::{CylinderState, PendulumParams};
use crate::{fmt::float17, Error, Result};

use std::f64::consts::TAU;

/// Invariant strip for the boundary twist argument.
///
/// `p_hat` is where the drift cancels the velocity, `|K|/sqrt(1-K^2)`;
/// `p_tilde = p_hat + T(a + sup|f|) + margin` bounds how far the momentum can
/// wander in one period, so the angular displacement has a fixed sign on the
/// circles `p = ±p_tilde`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StripBound {
    pub p_hat: f64,
    pub p_tilde: f64,
    pub margin: f64,
}

/// Strip bound with the default margin 1.
pub fn strip_bound(params: &PendulumParams) -> Result<StripBound> {
    strip_bound_with_margin(params, 1.0)
}

/// Strip bound with an explicit safety margin (must be positive so the
/// boundary inequalities stay strict under integration error).
pub fn strip_bound_with_margin(params: &PendulumParams, margin: f64) -> Result<StripBound> {
    params.require_admissible()?;
    if !(margin > 0.0 && margin.is_finite()) {
        return Err(Error::InvalidParams(format!(
            "strip margin must be positive, got {margin}"
        )));
    }
    let k = params.drift_speed().abs();
    let p_hat = k / (1.0 - k * k).sqrt();
    let p_tilde =
        p_hat + params.period() * (params.gravity() + params.forcing().sup_norm_bound()) + margin;
    Ok(StripBound {
        p_hat,
        p_tilde,
        margin,
    })
}

/// The Poincaré map `S(q0, p0) = (q(T), p(T))` of the transformed system.
pub fn poincare_map(
    params: &PendulumParams,
    s0: &CylinderState,
    cfg: &IntegratorConfig,
) -> Result<CylinderState> {
    params.require_admissible()?;
    flow(params, s0, 0.0, params.period(), cfg)
}

/// The Poincaré map together with its derivative (the monodromy matrix) and
/// the action integral.
pub fn poincare_map_with_tangent(
    params: &PendulumParams,
    s0: &CylinderState,
    cfg: &IntegratorConfig,
) -> Result<TangentFlowResult> {
    params.require_admissible()?;
    flow_with_tangent(params, s0, 0.0, params.period(), cfg)
}

/// Generating function `V(θ, r)` of the return map, computed as the action
/// integral along the trajectory through `(θ, r)`.
///
/// Satisfies `V(θ + 2π, r) = V(θ, r)` and `dV = p₁ dq₁ − p dq`, i.e.
/// `V_θ = p(T) ∂q(T)/∂θ − p(0)` and `V_r = p(T) ∂q(T)/∂r`.
pub fn generating_function(
    params: &PendulumParams,
    theta: f64,
    r: f64,
    cfg: &IntegratorConfig,
) -> Result<f64> {
    Ok(poincare_map_with_tangent(params, &CylinderState::new(theta, r), cfg)?.action)
}

/// Checks the boundary twist condition on the strip border.
///
/// Returns `(min_q Q(q, p̃) − q, max_q Q(q, −p̃) − q)` over an `n_grid`-point
/// angle grid. Errors with the offending angle if the first is not positive
/// or the second not negative; that signals a too-small margin or a bug, not
/// a property of the pendulum.
pub fn boundary_twist_check(
    params: &PendulumParams,
    bound: &StripBound,
    n_grid: usize,
    cfg: &IntegratorConfig,
) -> Result<(f64, f64)> {
    params.require_admissible()?;
    if n_grid == 0 {
        return Err(Error::InvalidParams("boundary grid must be non-empty".into()));
    }
    let rows: Vec<(f64, f64, f64)> = (0..n_grid)
        .into_par_iter()
        .map(|i| {
            let q = TAU * i as f64 / n_grid as f64;
            let up = poincare_map(params, &CylinderState::new(q, bound.p_tilde), cfg)?;
            let down = poincare_map(params, &CylinderState::new(q, -bound.p_tilde), cfg)?;
            Ok((q, up.q - q, down.q - q))
        })
        .collect::<Result<_>>()?;

    let mut min_up = f64::INFINITY;
    let mut min_up_q = 0.0;
    let mut max_down = f64::NEG_INFINITY;
    let mut max_down_q = 0.0;
    for (q, up, down) in rows {
        if up < min_up {
            min_up = up;
            min_up_q = q;
        }
        if down > max_down {
            max_down = down;
            max_down_q = q;
        }
    }
    if min_up <= 0.0 {
        return Err(Error::BoundaryTwistViolation {
            q: min_up_q,
            p: bound.p_tilde,
            value: min_up,
        });
    }
    if max_down >= 0.0 {
        return Err(Error::BoundaryTwistViolation {
            q: max_down_q,
            p: -bound.p_tilde,
            value: max_down,
        });
    }
    Ok((min_up, max_down))
}

/// Minimum of `∂Q/∂p₀` (the monodromy's upper-right entry) over the grid
/// `q ∈ [0, 2π) × p ∈ region`, `n_grid` points per axis.
///
/// A positive return value certifies the twist condition on the sampled
/// grid; a negative value is a valid report, not an error.
pub fn twist_margin(
    params: &PendulumParams,
    region: (f64, f64),
    n_grid: usize,
    cfg: &IntegratorConfig,
) -> Result<f64> {
    params.require_admissible()?;
    let (lo, hi) = region;
    if n_grid == 0 || !lo.is_finite() || !hi.is_finite() || lo > hi {
        return Err(Error::InvalidParams(format!(
            "twist grid needs n >= 1 and an ordered region, got n = {n_grid}, [{lo}, {hi}]"
        )));
    }
    let points: Vec<(f64, f64)> = (0..n_grid)
        .flat_map(|i| {
            let q = TAU * i as f64 / n_grid as f64;
            (0..n_grid).map(move |j| {
                let p = if n_grid == 1 {
                    lo
                } else {
                    lo + (hi - lo) * j as f64 / (n_grid - 1) as f64
                };
                (q, p)
            })
        })
        .collect();
    let min = points
        .into_par_iter()
        .map(|(q, p)| {
            poincare_map_with_tangent(params, &CylinderState::new(q, p), cfg)
                .map(|r| r.monodromy[(0, 1)])
        })
        .try_reduce(|| f64::INFINITY, |a, b| Ok(a.min(b)))?;
    Ok(min)
}

/// Outcome of intersecting a graph curve with its image under the map.
#[derive(Debug, Clone, PartialEq)]
pub enum IntersectionOutcome {
    /// The image coincides with the curve as a set: invariant curve.
    InvariantCurve { max_deviation: f64 },
    /// Transversal polyline crossings on the cylinder.
    Transversal { count: usize },
    /// A contact within tangency tolerance near this angle; the count is not
    /// trustworthy.
    Inconclusive { q: f64 },
}

/// Counts transversal intersections of the closed graph curve `p = γ(q)`
/// (given as samples over one period) with its image under the return map.
///
/// Exact symplecticity forces at least two crossings unless the curve is
/// invariant; this routine reports what the sampled polylines actually do.
pub fn curve_intersection_count(
    params: &PendulumParams,
    samples: &[(f64, f64)],
    cfg: &IntegratorConfig,
) -> Result<IntersectionOutcome> {
    params.require_admissible()?;
    let curve = GraphCurve::new(samples)?;

    let image: Vec<(f64, f64)> = curve
        .points
        .par_iter()
        .map(|&(q, p)| {
            let s = poincare_map(params, &CylinderState::new(q, p), cfg)?;
            Ok((s.q, s.p))
        })
        .collect::<Result<_>>()?;

    // Invariance test: every image point must sit back on the curve.
    let max_dev = image
        .iter()
        .map(|&(q, p)| (p - curve.interpolate(q)).abs())
        .fold(0.0f64, f64::max);
    if max_dev < 1e-9 {
        return Ok(IntersectionOutcome::InvariantCurve { max_deviation: max_dev });
    }

    count_cylinder_crossings(&curve.closed_polyline(), &closed_image(&image))
}

/// Validated samples of a 2π-periodic graph curve.
struct GraphCurve {
    /// Points with q normalized so the first lies in [0, 2π).
    points: Vec<(f64, f64)>,
}

impl GraphCurve {
    fn new(samples: &[(f64, f64)]) -> Result<Self> {
        if samples.len() < 3 {
            return Err(Error::InvalidParams(format!(
                "curve needs at least 3 samples, got {}",
                samples.len()
            )));
        }
        if samples.iter().any(|&(q, p)| !q.is_finite() || !p.is_finite()) {
            return Err(Error::InvalidParams("curve samples must be finite".into()));
        }
        let shift = TAU * (samples[0].0 / TAU).floor();
        let points: Vec<(f64, f64)> = samples.iter().map(|&(q, p)| (q - shift, p)).collect();
        for w in points.windows(2) {
            if w[1].0 <= w[0].0 {
                return Err(Error::InvalidParams(
                    "curve samples must have strictly increasing q".into(),
                ));
            }
        }
        if points[points.len() - 1].0 - points[0].0 >= TAU {
            return Err(Error::InvalidParams(
                "curve samples must cover less than one full period".into(),
            ));
        }
        Ok(Self { points })
    }

    /// Piecewise-linear periodic evaluation at an arbitrary angle.
    fn interpolate(&self, q: f64) -> f64 {
        let q0 = self.points[0].0;
        let mut t = (q - q0).rem_euclid(TAU) + q0;
        if t >= q0 + TAU {
            t = q0;
        }
        let idx = self
            .points
            .partition_point(|&(qq, _)| qq <= t)
            .saturating_sub(1);
        let (qa, pa) = self.points[idx];
        let (qb, pb) = if idx + 1 < self.points.len() {
            self.points[idx + 1]
        } else {
            (self.points[0].0 + TAU, self.points[0].1)
        };
        pa + (pb - pa) * (t - qa) / (qb - qa)
    }

    /// Vertices of the closed polyline, ending on the first point shifted by 2π.
    fn closed_polyline(&self) -> Vec<(f64, f64)> {
        let mut v = self.points.clone();
        v.push((self.points[0].0 + TAU, self.points[0].1));
        v
    }
}

fn closed_image(image: &[(f64, f64)]) -> Vec<(f64, f64)> {
    let mut v = image.to_vec();
    v.push((image[0].0 + TAU, image[0].1));
    v
}

/// Counts proper crossings between two closed polylines on the cylinder,
/// both winding once. The second polyline is tested against all relevant
/// horizontal `2πk` translates of the first.
fn count_cylinder_crossings(
    a: &[(f64, f64)],
    b: &[(f64, f64)],
) -> Result<IntersectionOutcome> {
    // Bucket A segments by angle for pruning.
    let a_lo = a.iter().map(|p| p.0).fold(f64::INFINITY, f64::min);
    let a_hi = a.iter().map(|p| p.0).fold(f64::NEG_INFINITY, f64::max);
    let n_bins = 256usize;
    let width = (a_hi - a_lo).max(1e-12) / n_bins as f64;
    let mut bins: Vec<Vec<usize>> = vec![Vec::new(); n_bins];
    let seg = |poly: &[(f64, f64)], i: usize| (poly[i], poly[i + 1]);
    for i in 0..a.len() - 1 {
        let ((x0, _), (x1, _)) = seg(a, i);
        let (lo, hi) = (x0.min(x1), x0.max(x1));
        let b0 = (((lo - a_lo) / width).floor() as isize).clamp(0, n_bins as isize - 1) as usize;
        let b1 = (((hi - a_lo) / width).floor() as isize).clamp(0, n_bins as isize - 1) as usize;
        for bin in bins.iter_mut().take(b1 + 1).skip(b0) {
            bin.push(i);
        }
    }

    const TANGENCY_TOL: f64 = 1e-10;
    let cross = |o: (f64, f64), u: (f64, f64), v: (f64, f64)| -> f64 {
        (u.0 - o.0) * (v.1 - o.1) - (u.1 - o.1) * (v.0 - o.0)
    };

    let mut count = 0usize;
    for j in 0..b.len() - 1 {
        let ((bx0, by0), (bx1, by1)) = seg(b, j);
        let (blo, bhi) = (bx0.min(bx1), bx0.max(bx1));
        let k_min = ((a_lo - bhi) / TAU).floor() as i64;
        let k_max = ((a_hi - blo) / TAU).ceil() as i64;
        for k in k_min..=k_max {
            let shift = k as f64 * TAU;
            let p0 = (bx0 + shift, by0);
            let p1 = (bx1 + shift, by1);
            let (slo, shi) = (blo + shift, bhi + shift);
            if shi < a_lo || slo > a_hi {
                continue;
            }
            let bin0 = (((slo - a_lo) / width).floor() as isize).clamp(0, n_bins as isize - 1)
                as usize;
            let bin1 = (((shi - a_lo) / width).floor() as isize).clamp(0, n_bins as isize - 1)
                as usize;
            let mut seen_last = usize::MAX;
            for bin in &bins[bin0..=bin1] {
                for &i in bin {
                    if i == seen_last {
                        continue; // segment listed in two adjacent bins
                    }
                    seen_last = i;
                    let (q0, q1) = seg(a, i);
                    // Bounding-box rejection.
                    if q0.0.max(q1.0) < slo
                        || q0.0.min(q1.0) > shi
                        || q0.1.max(q1.1) < by0.min(by1)
                        || q0.1.min(q1.1) > by0.max(by1)
                    {
                        continue;
                    }
                    let len_b = ((p1.0 - p0.0).powi(2) + (p1.1 - p0.1).powi(2)).sqrt();
                    let len_a = ((q1.0 - q0.0).powi(2) + (q1.1 - q0.1).powi(2)).sqrt();
                    if len_a == 0.0 || len_b == 0.0 {
                        continue;
                    }
                    // Signed distances of segment ends to the other segment's line.
                    let d1 = cross(p0, p1, q0) / len_b;
                    let d2 = cross(p0, p1, q1) / len_b;
                    let d3 = cross(q0, q1, p0) / len_a;
                    let d4 = cross(q0, q1, p1) / len_a;
                    let near = d1.abs().min(d2.abs()).min(d3.abs()).min(d4.abs());
                    if d1 * d2 < 0.0 && d3 * d4 < 0.0 {
                        if near < TANGENCY_TOL {
                            return Ok(IntersectionOutcome::Inconclusive { q: q0.0 });
                        }
                        count += 1;
                    } else if near < TANGENCY_TOL {
                        // An endpoint sits on the other segment: grazing contact.
                        return Ok(IntersectionOutcome::Inconclusive { q: q0.0 });
                    }
                }
            }
        }
    }
    Ok(IntersectionOutcome::Transversal { count })
}

/// Short stable identifier of a parameter set: SHA-256 of the canonical JSON
/// document, truncated to 16 hex digits.
pub fn params_hash(params: &PendulumParams) -> String {
    let digest = Sha256::digest(params.to_json_string().as_bytes());
    digest[..8].iter().map(|b| format!("{b:02x}")).collect()
}

/// JSON report emitted by the twist diagnostics.
#[derive(Debug, Clone, PartialEq)]
pub struct TwistReport {
    pub min_twist: f64,
    pub grid: usize,
    pub region: (f64, f64),
    pub params_hash: String,
}

/// Writes the report as a single deterministic JSON object.
pub fn write_twist_report<W: Write>(w: &mut W, report: &TwistReport) -> io::Result<()> {
    writeln!(
        w,
        "{{\"min_twist\": {}, \"grid\": {}, \"region\": [{}, {}], \"params_hash\": \"{}\"}}",
        float17(report.min_twist),
        report.grid,
        float17(report.region.0),
        float17(report.region.1),
        report.params_hash
    )
}

/// Reads curve samples from CSV rows `q,p`; a leading `q,p` header is
/// allowed.
pub fn read_curve_csv<R: BufRead>(reader: R) -> Result<Vec<(f64, f64)>> {
    let mut out = Vec::new();
    for (lineno, line) in reader.lines().enumerate() {
        let line = line.map_err(|e| Error::InvalidParams(format!("curve CSV read: {e}")))?;
        let trimmed = line.trim();
        if trimmed.is_empty() || (lineno == 0 && trimmed.eq_ignore_ascii_case("q,p")) {
            continue;
        }
        let mut parts = trimmed.split(',');
        let parse = |s: Option<&str>| -> Result<f64> {
            s.ok_or_else(|| Error::InvalidParams(format!("curve CSV line {}: missing field", lineno + 1)))?
                .trim()
                .parse::<f64>()
                .map_err(|e| Error::InvalidParams(format!("curve CSV line {}: {e}", lineno + 1)))
        };
        let q = parse(parts.next())?;
        let p = parse(parts.next())?;
        out.push((q, p));
    }
    Ok(out)
}
