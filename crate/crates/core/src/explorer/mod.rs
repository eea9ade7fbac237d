//! Parameter campaigns: detuning sweeps, the no-gain feasibility search and
//! the bound-attainment convergence study. Everything serializes to CSV.

mod convergence;
mod feasibility;
pub mod simplex;

pub use convergence::{convergence_study, write_convergence_csv, ConvergenceConfig, ConvergenceRow, ConvergenceTable};
pub use feasibility::{
    feasibility_search, single_drive_optimum, FeasibilityConfig, FeasibilityResult, SearchPoint, TracePoint, Verdict,
};

use std::io::{Read, Write};

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::linalg::ComplexMatrix;
use crate::metrics::{check_conditions, min_noise_density, optimal_rate, total_photons, ConditionParams, DOMINANCE_THRESHOLD};
use crate::syscore::{is_stable, transfer_matrix, SensorSystem};

pub const SWEEP_COLUMNS: [&str; 8] = ["delta", "rate_single", "rate_two", "xi", "n_tot", "stable", "cond_chi12", "cond_p"];

/// One detuning point. Quantities that need a stable steady state are
/// `None` (an empty CSV field) where it does not exist.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SweepRow {
    pub delta: f64,
    /// `Γ̄_opt/k₁` with one drive (`p = η = 0`).
    pub rate_single: Option<f64>,
    /// `Γ̄_opt/k₁` at the configured `(η, p)`.
    pub rate_two: Option<f64>,
    pub xi: Option<f64>,
    /// Photons per `β₁²` of the two-drive configuration.
    pub n_tot: Option<f64>,
    /// Stability of the two-drive configuration.
    pub stable: bool,
    pub cond_chi12: Option<bool>,
    pub cond_p: Option<bool>,
}

/// `min + (max − min)·i/n` for `i = 0..=n`, `n = round((max − min)/step)`.
pub fn delta_grid(min: f64, max: f64, step: f64) -> Result<Vec<f64>> {
    if !(min.is_finite() && max.is_finite() && step.is_finite() && step > 0.0 && max >= min) {
        return Err(Error::InvalidArgument(format!(
            "detuning grid needs finite min <= max and step > 0, got [{min}, {max}] step {step}"
        )));
    }
    let n = ((max - min) / step).round() as usize;
    if n == 0 {
        return Ok(vec![min]);
    }
    Ok((0..=n).map(|i| min + (max - min) * i as f64 / n as f64).collect())
}

/// Evaluates the single- and two-drive rates of `sys`'s Hamiltonian along
/// `grid`. Grid points are independent and evaluated in parallel; rows come
/// back sorted by detuning.
pub fn sweep_detuning(sys: &SensorSystem, grid: &[f64], eta: f64, p: f64) -> Result<Vec<SweepRow>> {
    if grid.iter().any(|d| !d.is_finite()) {
        return Err(Error::InvalidArgument("detuning grid must be finite".into()));
    }
    let two = sys.with_drives(eta, 1.0, p)?;
    let mut grid = grid.to_vec();
    grid.sort_by(f64::total_cmp);
    grid.par_iter().map(|&delta| sweep_point(sys, &two, delta, eta, p)).collect()
}

fn sweep_point(sys: &SensorSystem, two: &SensorSystem, delta: f64, eta: f64, p: f64) -> Result<SweepRow> {
    let rate_single = optimal_rate(sys, delta, 0.0, 0.0)?;
    let stable = is_stable(two, delta, 0.0)?.stable;
    if !stable {
        return Ok(SweepRow {
            delta,
            rate_single,
            rate_two: None,
            xi: None,
            n_tot: None,
            stable,
            cond_chi12: None,
            cond_p: None,
        });
    }
    let chi = transfer_matrix(two, delta, 0.0)?;
    let (xi, _) = min_noise_density(&chi, 1.0, eta);
    let (cond_chi12, cond_p) = if chi.rows() == 2 {
        let c = check_conditions(&chi, p, &neutral_conditions(delta, eta));
        (Some(c.cond_chi12.holds), Some(c.cond_p.holds))
    } else {
        (None, None)
    };
    Ok(SweepRow {
        delta,
        rate_single,
        rate_two: optimal_rate(sys, delta, eta, p)?,
        xi: Some(xi),
        n_tot: Some(total_photons(&chi, 1.0, eta, 1.0, p)),
        stable,
        cond_chi12,
        cond_p,
    })
}

/// Only the `χ`-based flags are used from a sweep, so the rate fields are placeholders.
fn neutral_conditions(delta: f64, eta: f64) -> ConditionParams {
    ConditionParams {
        delta,
        k1: 1.0,
        k2: eta,
        gamma1: -1.0,
        gamma2: -eta,
        j: 0.0,
        threshold: DOMINANCE_THRESHOLD,
    }
}

/// Fixed float format: 17 significant digits, so parsing is exact.
pub fn fmt_f64(x: f64) -> String {
    format!("{x:.16e}")
}

fn fmt_opt(x: Option<f64>) -> String {
    x.map(fmt_f64).unwrap_or_default()
}

fn fmt_bool(x: Option<bool>) -> String {
    x.map(|b| b.to_string()).unwrap_or_default()
}

fn csv_err(e: csv::Error) -> Error {
    Error::Csv(e.to_string())
}

pub fn write_sweep_csv<W: Write>(rows: &[SweepRow], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(SWEEP_COLUMNS).map_err(csv_err)?;
    for r in rows {
        w.write_record([
            fmt_f64(r.delta),
            fmt_opt(r.rate_single),
            fmt_opt(r.rate_two),
            fmt_opt(r.xi),
            fmt_opt(r.n_tot),
            r.stable.to_string(),
            fmt_bool(r.cond_chi12),
            fmt_bool(r.cond_p),
        ])
        .map_err(csv_err)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_sweep_csv<R: Read>(input: R) -> Result<Vec<SweepRow>> {
    let mut rd = csv::Reader::from_reader(input);
    let header = rd.headers().map_err(csv_err)?.clone();
    if header.iter().ne(SWEEP_COLUMNS) {
        return Err(Error::Csv(format!("unexpected header {header:?}")));
    }
    let num = |s: &str| -> Result<Option<f64>> {
        if s.is_empty() {
            Ok(None)
        } else {
            s.parse().map(Some).map_err(|_| Error::Csv(format!("bad number `{s}`")))
        }
    };
    let flag = |s: &str| -> Result<Option<bool>> {
        match s {
            "" => Ok(None),
            "true" => Ok(Some(true)),
            "false" => Ok(Some(false)),
            other => Err(Error::Csv(format!("bad flag `{other}`"))),
        }
    };
    let mut rows = Vec::new();
    for rec in rd.records() {
        let rec = rec.map_err(csv_err)?;
        rows.push(SweepRow {
            delta: num(&rec[0])?.ok_or_else(|| Error::Csv("missing delta".into()))?,
            rate_single: num(&rec[1])?,
            rate_two: num(&rec[2])?,
            xi: num(&rec[3])?,
            n_tot: num(&rec[4])?,
            stable: flag(&rec[5])?.ok_or_else(|| Error::Csv("missing stable flag".into()))?,
            cond_chi12: flag(&rec[6])?,
            cond_p: flag(&rec[7])?,
        });
    }
    Ok(rows)
}

/// Smallest `|Δ|` at which a curve drops below half its peak, scanning
/// outward from the peak. Unstable rows count as below.
pub fn half_width(rows: &[SweepRow]) -> Option<f64> {
    let (peak_idx, peak) = rows
        .iter()
        .enumerate()
        .filter_map(|(i, r)| r.rate_two.map(|v| (i, v)))
        .max_by(|a, b| a.1.total_cmp(&b.1))?;
    let below = |r: &SweepRow| r.rate_two.is_none_or(|v| v < 0.5 * peak);
    let right = rows[peak_idx..].iter().find(|r| below(r)).map(|r| r.delta.abs());
    let left = rows[..peak_idx].iter().rev().find(|r| below(r)).map(|r| r.delta.abs());
    match (left, right) {
        (Some(a), Some(b)) => Some(a.min(b)),
        (a, b) => a.or(b),
    }
}

/// `true` if a square matrix is 2×2, which the two-mode formulas require.
pub(crate) fn is_two_mode(m: &ComplexMatrix) -> bool {
    m.rows() == 2 && m.cols() == 2
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::{model_defaults, ModelKind};
    use crate::metrics::measurement_rate;
    use crate::models::build;

    fn preset(kind: ModelKind) -> (SensorSystem, f64, f64) {
        let d = model_defaults(kind);
        (build(d.params, 1.0, d.k2, 1.0, d.p).unwrap(), d.k2, d.p)
    }

    #[test]
    fn grid_spacing() {
        let g = delta_grid(-0.5, 0.5, 0.005).unwrap();
        assert_eq!(g.len(), 201);
        assert_eq!(g[0], -0.5);
        assert_eq!(g[200], 0.5);
        assert_eq!(g[100], 0.0);
        assert_eq!(delta_grid(0.0, 0.0, 1.0).unwrap(), vec![0.0]);
        assert!(delta_grid(1.0, 0.0, 0.1).is_err());
        assert!(delta_grid(0.0, 1.0, 0.0).is_err());
    }

    #[test]
    fn single_point_matches_direct_metrics() {
        let (sys, eta, p) = preset(ModelKind::NonReciprocal);
        let rows = sweep_detuning(&sys, &[0.0], eta, p).unwrap();
        assert_eq!(rows.len(), 1);
        let direct = measurement_rate(&sys, 0.0, None).unwrap();
        assert_eq!(rows[0].rate_two, Some(direct.gamma_opt));
        assert_eq!(rows[0].xi, Some(direct.xi));
        assert_eq!(rows[0].n_tot, Some(direct.n_tot));
    }

    #[test]
    fn fig2_is_peaked_and_single_drive_is_unstable() {
        let (sys, eta, p) = preset(ModelKind::Reciprocal);
        let rows = sweep_detuning(&sys, &[-0.3, 0.0, 0.3], eta, p).unwrap();
        assert!(rows.iter().all(|r| r.rate_single.is_none() && r.stable));
        let centre = rows[1].rate_two.unwrap();
        assert!(centre > rows[0].rate_two.unwrap() && centre > rows[2].rate_two.unwrap());
    }

    #[test]
    fn csv_round_trip_and_format() {
        let (sys, eta, p) = preset(ModelKind::Reciprocal);
        let rows = sweep_detuning(&sys, &delta_grid(-0.1, 0.1, 0.05).unwrap(), eta, p).unwrap();
        let mut buf = Vec::new();
        write_sweep_csv(&rows, &mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("delta,rate_single,rate_two,xi,n_tot,stable,cond_chi12,cond_p\n"));
        // Unstable single drive leaves the field empty rather than zero.
        assert!(text.lines().nth(1).unwrap().split(',').nth(1).unwrap().is_empty());
        assert_eq!(read_sweep_csv(buf.as_slice()).unwrap(), rows);
    }

    #[test]
    fn half_width_scans_outward() {
        let row = |delta: f64, v: Option<f64>| SweepRow {
            delta,
            rate_single: None,
            rate_two: v,
            xi: None,
            n_tot: None,
            stable: v.is_some(),
            cond_chi12: None,
            cond_p: None,
        };
        let rows = vec![row(-0.2, Some(1.0)), row(-0.1, Some(6.0)), row(0.0, Some(10.0)), row(0.1, None), row(0.2, Some(9.0))];
        assert_eq!(half_width(&rows), Some(0.1));
    }
}
