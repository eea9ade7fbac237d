use rayon::prelude::*;
use serde::Serialize;

use super::simplex::{golden_max, minimize, SimplexOptions};
use crate::error::{Error, Result};
use crate::metrics::optimal_rate;
use crate::syscore::SensorSystem;

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct FeasibilityConfig {
    pub eta: (f64, f64),
    pub p: (f64, f64),
    pub delta: (f64, f64),
    /// Grid points per axis.
    pub grid_points: usize,
    /// Cap on objective evaluations; the grid alone needs `grid_points³`.
    pub budget: Option<usize>,
    /// Relative margin the best point must clear to count as an improvement.
    pub tol: f64,
    pub restarts: usize,
    pub evals_per_restart: usize,
}

impl Default for FeasibilityConfig {
    fn default() -> Self {
        Self {
            eta: (0.0, 10.0),
            p: (0.0, 1e3),
            delta: (-5.0, 5.0),
            grid_points: 41,
            budget: None,
            tol: 1e-4,
            restarts: 5,
            evals_per_restart: 3000,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct SearchPoint {
    pub eta: f64,
    pub p: f64,
    pub delta: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct TracePoint {
    pub point: SearchPoint,
    /// `None` where the two-drive system is unstable.
    pub rate: Option<f64>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Verdict {
    Improved,
    NotImproved,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct FeasibilityResult {
    /// Best single-drive rate over detuning; `None` if one drive is never stable.
    pub baseline: Option<f64>,
    pub baseline_delta: Option<f64>,
    pub best_found: f64,
    pub argbest: Option<SearchPoint>,
    pub verdict: Verdict,
    pub evaluations: usize,
    pub grid_complete: bool,
    #[serde(skip)]
    pub optimizer_trace: Vec<TracePoint>,
}

/// Best single-drive rate over `delta ∈ [lo, hi]`: a 2001-point scan, then
/// golden-section refinement inside the bracketing cell.
pub fn single_drive_optimum(sys: &SensorSystem, lo: f64, hi: f64) -> Result<Option<(f64, f64)>> {
    let n = 2000;
    let grid: Vec<f64> = (0..=n).map(|i| lo + (hi - lo) * i as f64 / n as f64).collect();
    let rates = grid
        .par_iter()
        .map(|&d| optimal_rate(sys, d, 0.0, 0.0))
        .collect::<Result<Vec<_>>>()?;
    let Some((best, _)) = rates
        .iter()
        .enumerate()
        .filter_map(|(i, r)| r.map(|v| (i, v)))
        .max_by(|a, b| a.1.total_cmp(&b.1))
    else {
        return Ok(None);
    };
    let a = grid[best.saturating_sub(1)];
    let b = grid[(best + 1).min(n)];
    let f = |d: f64| optimal_rate(sys, d, 0.0, 0.0).ok().flatten().unwrap_or(f64::NEG_INFINITY);
    let (d, v) = golden_max(f, a, b, 1e-12);
    let grid_v = rates[best].unwrap_or(f64::NEG_INFINITY);
    Ok(Some(if v >= grid_v { (d, v) } else { (grid[best], grid_v) }))
}

/// Searches `(η, p, Δ)` for a two-drive rate above the best single-drive rate.
pub fn feasibility_search(sys: &SensorSystem, cfg: &FeasibilityConfig) -> Result<FeasibilityResult> {
    for (lo, hi) in [cfg.eta, cfg.p, cfg.delta] {
        if !(lo.is_finite() && hi.is_finite() && lo <= hi) {
            return Err(Error::InvalidArgument(format!("search bounds must be finite and ordered, got [{lo}, {hi}]")));
        }
    }
    if cfg.eta.0 < 0.0 || cfg.p.0 < 0.0 {
        return Err(Error::InvalidArgument("eta and p bounds must be non-negative".into()));
    }
    if cfg.grid_points < 2 {
        return Err(Error::InvalidArgument("grid needs at least two points per axis".into()));
    }

    let baseline_opt = single_drive_optimum(sys, cfg.delta.0, cfg.delta.1)?;
    let axis = |(lo, hi): (f64, f64)| -> Vec<f64> {
        let n = cfg.grid_points - 1;
        (0..=n).map(|i| lo + (hi - lo) * i as f64 / n as f64).collect()
    };
    let (etas, ps, deltas) = (axis(cfg.eta), axis(cfg.p), axis(cfg.delta));
    let mut points = Vec::with_capacity(etas.len() * ps.len() * deltas.len());
    for &eta in &etas {
        for &p in &ps {
            for &delta in &deltas {
                points.push(SearchPoint { eta, p, delta });
            }
        }
    }
    let budget = cfg.budget.unwrap_or(usize::MAX);
    let grid_complete = budget >= points.len();
    let n_grid = points.len().min(budget);

    let rates = points[..n_grid]
        .par_iter()
        .map(|pt| optimal_rate(sys, pt.delta, pt.eta, pt.p))
        .collect::<Result<Vec<_>>>()?;
    let mut trace: Vec<TracePoint> = points[..n_grid]
        .iter()
        .zip(&rates)
        .map(|(&point, &rate)| TracePoint { point, rate })
        .collect();

    let mut result = summarize(baseline_opt, &trace, cfg.tol, grid_complete);
    if !grid_complete {
        return Err(Error::PartialResult {
            budget,
            partial: Box::new(result),
        });
    }

    let mut ranked: Vec<&TracePoint> = trace.iter().filter(|t| t.rate.is_some()).collect();
    ranked.sort_by(|a, b| b.rate.unwrap().total_cmp(&a.rate.unwrap()));
    let starts: Vec<SearchPoint> = ranked.iter().take(cfg.restarts).map(|t| t.point).collect();

    let lower = [cfg.eta.0, cfg.p.0, cfg.delta.0];
    let upper = [cfg.eta.1, cfg.p.1, cfg.delta.1];
    let step: Vec<f64> = (0..3).map(|k| 0.05 * (upper[k] - lower[k])).collect();
    let mut remaining = budget - n_grid;
    for start in starts {
        if remaining == 0 {
            break;
        }
        let opts = SimplexOptions {
            max_evals: cfg.evals_per_restart.min(remaining),
            ..SimplexOptions::default()
        };
        let mut local = Vec::new();
        let objective = |x: &[f64]| {
            let pt = SearchPoint {
                eta: x[0],
                p: x[1],
                delta: x[2],
            };
            let rate = optimal_rate(sys, pt.delta, pt.eta, pt.p).ok().flatten();
            local.push(TracePoint { point: pt, rate });
            rate.map_or(f64::INFINITY, |r| -r)
        };
        let out = minimize(objective, &[start.eta, start.p, start.delta], &step, &lower, &upper, opts);
        remaining -= out.evals.min(remaining);
        trace.extend(local);
    }

    result = summarize(baseline_opt, &trace, cfg.tol, true);
    result.optimizer_trace = trace;
    Ok(result)
}

fn summarize(baseline: Option<(f64, f64)>, trace: &[TracePoint], tol: f64, grid_complete: bool) -> FeasibilityResult {
    let best = trace
        .iter()
        .filter_map(|t| t.rate.map(|r| (t.point, r)))
        .max_by(|a, b| a.1.total_cmp(&b.1));
    let best_found = best.map_or(0.0, |b| b.1);
    let reference = baseline.map_or(0.0, |b| b.1);
    FeasibilityResult {
        baseline: baseline.map(|b| b.1),
        baseline_delta: baseline.map(|b| b.0),
        best_found,
        argbest: best.map(|b| b.0),
        verdict: if best_found > reference * (1.0 + tol) {
            Verdict::Improved
        } else {
            Verdict::NotImproved
        },
        evaluations: trace.len(),
        grid_complete,
        optimizer_trace: trace.to_vec(),
    }
}
