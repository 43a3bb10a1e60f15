//! Exponential smoothing: simple smoothing with fitted alpha, and the
//! candidate family {SES, Holt, damped Holt} x {plain, additive seasonal}
//! selected by corrected AIC over a Gaussian one-step likelihood.

use crate::error::{Error, Result};

use super::decompose::additive_offsets;

/// Simple exponential smoothing with the level seeded on the first
/// observation and alpha chosen by in-sample SSE. Returns the final level
/// (the flat forecast) and the fitted alpha.
pub(crate) fn ses_fit(values: &[f64]) -> (f64, f64) {
    let sse = |alpha: f64| -> f64 {
        let mut level = values[0];
        let mut acc = 0.0;
        for &x in &values[1..] {
            let e = x - level;
            acc += e * e;
            level += alpha * e;
        }
        acc
    };
    let mut best_alpha = 0.001;
    let mut best = f64::INFINITY;
    for step in 1..=999 {
        let alpha = step as f64 / 1000.0;
        let s = sse(alpha);
        if s < best {
            best = s;
            best_alpha = alpha;
        }
    }
    let mut level = values[0];
    for &x in &values[1..] {
        level += best_alpha * (x - level);
    }
    (level, best_alpha)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Trend {
    None,
    Holt,
    Damped,
}

#[derive(Debug, Clone, Copy)]
struct Candidate {
    trend: Trend,
    seasonal: bool,
}

impl Candidate {
    fn n_smoothing(&self) -> usize {
        let trend = match self.trend {
            Trend::None => 1,    // alpha
            Trend::Holt => 2,    // alpha, beta
            Trend::Damped => 3,  // alpha, beta, phi
        };
        trend + usize::from(self.seasonal)
    }

    fn n_states(&self, p: usize) -> usize {
        let base = match self.trend {
            Trend::None => 1,
            _ => 2,
        };
        base + if self.seasonal { p - 1 } else { 0 }
    }
}

struct FittedCandidate {
    aicc: f64,
    forecast: Vec<f64>,
}

const PHI_MIN: f64 = 0.8;
const PHI_MAX: f64 = 0.98;
const SMOOTH_MIN: f64 = 1e-4;
const SMOOTH_MAX: f64 = 0.9999;

/// One-step-ahead sum of squared errors for a parameter vector, together
/// with the end states needed to forecast.
struct Pass {
    sse: f64,
    level: f64,
    trend: f64,
    seasonal: Vec<f64>,
}

fn run_recursion(
    values: &[f64],
    cand: Candidate,
    params: &[f64],
    init_level: f64,
    init_trend: f64,
    init_seasonal: &[f64],
) -> Pass {
    let alpha = params[0];
    let (beta, phi, gamma) = match (cand.trend, cand.seasonal) {
        (Trend::None, false) => (0.0, 1.0, 0.0),
        (Trend::None, true) => (0.0, 1.0, params[1]),
        (Trend::Holt, false) => (params[1], 1.0, 0.0),
        (Trend::Holt, true) => (params[1], 1.0, params[2]),
        (Trend::Damped, false) => (params[1], params[2], 0.0),
        (Trend::Damped, true) => (params[1], params[2], params[3]),
    };
    let p = init_seasonal.len().max(1);
    let mut seasonal = if cand.seasonal {
        init_seasonal.to_vec()
    } else {
        vec![0.0; 1]
    };
    let mut level = init_level;
    let mut trend = init_trend;
    let mut sse = 0.0;
    for (t, &x) in values.iter().enumerate() {
        let s_used = if cand.seasonal { seasonal[t % p] } else { 0.0 };
        let base = level + phi * trend;
        let e = x - (base + s_used);
        sse += e * e;
        let new_level = alpha * (x - s_used) + (1.0 - alpha) * base;
        if cand.trend != Trend::None {
            trend = beta * (new_level - level) + (1.0 - beta) * phi * trend;
        }
        if cand.seasonal {
            seasonal[t % p] = gamma * (x - base) + (1.0 - gamma) * s_used;
        }
        level = new_level;
    }
    Pass {
        sse,
        level,
        trend,
        seasonal,
    }
}

fn forecast_from(pass: &Pass, cand: Candidate, params: &[f64], h: usize, l: usize, p: usize) -> Vec<f64> {
    let phi = match cand.trend {
        Trend::Damped => params[2],
        _ => 1.0,
    };
    let mut out = Vec::with_capacity(h);
    let mut damp_sum = 0.0;
    for i in 1..=h {
        damp_sum += phi.powi(i as i32);
        let trend_part = match cand.trend {
            Trend::None => 0.0,
            _ => damp_sum * pass.trend,
        };
        let s = if cand.seasonal {
            pass.seasonal[(l + i - 1) % p]
        } else {
            0.0
        };
        out.push(pass.level + trend_part + s);
    }
    out
}

/// Straight-line least squares over the first `k` points: (intercept, slope).
fn head_ols(values: &[f64], k: usize) -> (f64, f64) {
    let k = k.min(values.len()).max(2);
    let n = k as f64;
    let x_mean = (n - 1.0) / 2.0;
    let y_mean = values[..k].iter().sum::<f64>() / n;
    let mut sxy = 0.0;
    let mut sxx = 0.0;
    for (i, &y) in values[..k].iter().enumerate() {
        let dx = i as f64 - x_mean;
        sxy += dx * (y - y_mean);
        sxx += dx * dx;
    }
    let slope = if sxx > 0.0 { sxy / sxx } else { 0.0 };
    (y_mean - slope * x_mean, slope)
}

fn initial_states(values: &[f64], cand: Candidate, p: usize) -> Result<(f64, f64, Vec<f64>)> {
    let seasonal = if cand.seasonal {
        additive_offsets(values, p)?
    } else {
        vec![0.0]
    };
    let adjusted: Vec<f64> = if cand.seasonal {
        values
            .iter()
            .enumerate()
            .map(|(j, &v)| v - seasonal[j % p])
            .collect()
    } else {
        values.to_vec()
    };
    match cand.trend {
        Trend::None => {
            let k = adjusted.len().min(10);
            let level = adjusted[..k].iter().sum::<f64>() / k as f64;
            Ok((level, 0.0, seasonal))
        }
        _ => {
            let (intercept, slope) = head_ols(&adjusted, 10);
            // States sit just before the first observation.
            Ok((intercept - slope, slope, seasonal))
        }
    }
}

fn param_bounds(cand: Candidate) -> Vec<(f64, f64)> {
    let mut bounds = vec![(SMOOTH_MIN, SMOOTH_MAX)]; // alpha
    match cand.trend {
        Trend::None => {}
        Trend::Holt => bounds.push((SMOOTH_MIN, SMOOTH_MAX)),
        Trend::Damped => {
            bounds.push((SMOOTH_MIN, SMOOTH_MAX));
            bounds.push((PHI_MIN, PHI_MAX));
        }
    }
    if cand.seasonal {
        bounds.push((SMOOTH_MIN, SMOOTH_MAX));
    }
    bounds
}

/// Nelder-Mead with projection onto box bounds; good enough to polish the
/// best grid point.
fn nelder_mead(
    mut f: impl FnMut(&[f64]) -> f64,
    start: &[f64],
    bounds: &[(f64, f64)],
    iterations: usize,
) -> Vec<f64> {
    let n = start.len();
    let project = |x: &mut Vec<f64>| {
        for (v, (lo, hi)) in x.iter_mut().zip(bounds) {
            *v = v.clamp(*lo, *hi);
        }
    };
    let mut simplex: Vec<(Vec<f64>, f64)> = Vec::with_capacity(n + 1);
    let mut first = start.to_vec();
    project(&mut first);
    let fv = f(&first);
    simplex.push((first.clone(), fv));
    for i in 0..n {
        let mut x = first.clone();
        let span = bounds[i].1 - bounds[i].0;
        x[i] = (x[i] + 0.1 * span).min(bounds[i].1);
        if (x[i] - first[i]).abs() < 1e-12 {
            x[i] = (first[i] - 0.1 * span).max(bounds[i].0);
        }
        let fx = f(&x);
        simplex.push((x, fx));
    }
    for _ in 0..iterations {
        simplex.sort_by(|a, b| a.1.partial_cmp(&b.1).unwrap_or(std::cmp::Ordering::Equal));
        let worst = simplex[n].clone();
        let mut centroid = vec![0.0; n];
        for (x, _) in &simplex[..n] {
            for (c, v) in centroid.iter_mut().zip(x) {
                *c += v / n as f64;
            }
        }
        let blend = |t: f64| -> Vec<f64> {
            let mut x: Vec<f64> = centroid
                .iter()
                .zip(&worst.0)
                .map(|(c, w)| c + t * (c - w))
                .collect();
            project(&mut x);
            x
        };
        let reflected = blend(1.0);
        let fr = f(&reflected);
        if fr < simplex[0].1 {
            let expanded = blend(2.0);
            let fe = f(&expanded);
            simplex[n] = if fe < fr { (expanded, fe) } else { (reflected, fr) };
        } else if fr < simplex[n - 1].1 {
            simplex[n] = (reflected, fr);
        } else {
            let contracted = blend(-0.5);
            let fc = f(&contracted);
            if fc < simplex[n].1 {
                simplex[n] = (contracted, fc);
            } else {
                // shrink toward the best point
                let best = simplex[0].0.clone();
                for entry in simplex.iter_mut().skip(1) {
                    for (v, b) in entry.0.iter_mut().zip(&best) {
                        *v = b + 0.5 * (*v - b);
                    }
                    let fx = f(&entry.0);
                    entry.1 = fx;
                }
            }
        }
    }
    simplex.sort_by(|a, b| a.1.partial_cmp(&b.1).unwrap_or(std::cmp::Ordering::Equal));
    simplex[0].0.clone()
}

fn grid_points(bounds: &[(f64, f64)]) -> Vec<Vec<f64>> {
    let levels: Vec<Vec<f64>> = bounds
        .iter()
        .map(|(lo, hi)| {
            [0.1, 0.3, 0.5, 0.7, 0.9]
                .iter()
                .map(|t| lo + t * (hi - lo))
                .collect()
        })
        .collect();
    let mut points = vec![vec![]];
    for axis in levels {
        let mut next = Vec::with_capacity(points.len() * axis.len());
        for p in &points {
            for &v in &axis {
                let mut q = p.clone();
                q.push(v);
                next.push(q);
            }
        }
        points = next;
    }
    points
}

fn fit_candidate(values: &[f64], cand: Candidate, h: usize, p: usize) -> Result<FittedCandidate> {
    let n = values.len();
    let k = cand.n_smoothing() + cand.n_states(p) + 1;
    if n <= k + 1 {
        return Err(Error::Data(format!(
            "ets candidate needs more than {} observations, got {n}",
            k + 1
        )));
    }
    let (l0, b0, s0) = initial_states(values, cand, p)?;
    let bounds = param_bounds(cand);
    let objective = |params: &[f64]| -> f64 {
        let pass = run_recursion(values, cand, params, l0, b0, &s0);
        if pass.sse.is_finite() {
            pass.sse
        } else {
            f64::INFINITY
        }
    };
    let mut best_params = vec![0.5; bounds.len()];
    let mut best_sse = f64::INFINITY;
    for point in grid_points(&bounds) {
        let s = objective(&point);
        if s < best_sse {
            best_sse = s;
            best_params = point;
        }
    }
    let refined = nelder_mead(objective, &best_params, &bounds, 200);
    let refined_sse = objective(&refined);
    let (params, sse) = if refined_sse < best_sse {
        (refined, refined_sse)
    } else {
        (best_params, best_sse)
    };
    if !sse.is_finite() {
        return Err(Error::Numeric("ets optimizer diverged".into()));
    }
    let nf = n as f64;
    let sse_floored = sse.max(f64::MIN_POSITIVE);
    let loglik = -0.5 * nf * ((2.0 * std::f64::consts::PI * sse_floored / nf).ln() + 1.0);
    let kf = k as f64;
    let aicc = -2.0 * loglik + 2.0 * kf * nf / (nf - kf - 1.0);
    let pass = run_recursion(values, cand, &params, l0, b0, &s0);
    let forecast = forecast_from(&pass, cand, &params, h, n, p);
    if forecast.iter().any(|v| !v.is_finite()) {
        return Err(Error::Numeric("ets forecast not finite".into()));
    }
    Ok(FittedCandidate { aicc, forecast })
}

/// Point forecast from the best exponential-smoothing candidate.
pub fn forecast_ets(values: &[f64], h: usize, p: usize) -> Result<Vec<f64>> {
    if values.len() < 4 {
        return Err(Error::Data(format!(
            "ets needs at least 4 observations, got {}",
            values.len()
        )));
    }
    let mut candidates = vec![
        Candidate { trend: Trend::None, seasonal: false },
        Candidate { trend: Trend::Holt, seasonal: false },
        Candidate { trend: Trend::Damped, seasonal: false },
    ];
    if p >= 2 && values.len() >= 2 * p {
        candidates.push(Candidate { trend: Trend::None, seasonal: true });
        candidates.push(Candidate { trend: Trend::Holt, seasonal: true });
        candidates.push(Candidate { trend: Trend::Damped, seasonal: true });
    }
    let mut best: Option<FittedCandidate> = None;
    for cand in candidates {
        match fit_candidate(values, cand, h, p) {
            Ok(fit) => {
                if best.as_ref().is_none_or(|b| fit.aicc < b.aicc) {
                    best = Some(fit);
                }
            }
            Err(_) => continue,
        }
    }
    best.map(|b| b.forecast)
        .ok_or_else(|| Error::Numeric("no ets candidate could be fitted".into()))
}
