use std::io::Write;

use serde::Serialize;

use super::{fmt_f64, is_two_mode};
use crate::config::ModelKind;
use crate::error::{Error, Result};
use crate::metrics::{check_conditions, optimal_rate, ConditionParams, DOMINANCE_THRESHOLD};
use crate::models::{build, ModelParams, NonReciprocalParams, ReciprocalParams};
use crate::syscore::{is_stable, transfer_matrix};

/// A ladder of two-mode systems approaching the uniform bound `½/η`.
///
/// Rung `i` uses coupling `j_ladder[i]`. If `rate_ladder` is set, the local
/// rates follow it through `kᵢ + γᵢ = rate_ladder[i]`; otherwise `gamma1`
/// and `gamma2` are held fixed. If `p_ladder` is unset, each rung's drive
/// ratio is `p_factor` times the `p ≫ |χ₁₂|³(|χ₁₂| + |χ₂₁|)` threshold.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ConvergenceConfig {
    #[serde(skip)]
    pub model: ModelKind,
    pub gamma1: f64,
    pub gamma2: f64,
    pub nu2: f64,
    pub eta: f64,
    pub delta: f64,
    pub j_ladder: Vec<f64>,
    pub p_ladder: Option<Vec<f64>>,
    pub rate_ladder: Option<Vec<f64>>,
    pub p_factor: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct ConvergenceRow {
    pub j: f64,
    pub p: f64,
    pub gamma1: f64,
    pub gamma2: f64,
    pub stable: bool,
    pub rate: Option<f64>,
    /// `½/η − rate`.
    pub gap: Option<f64>,
    pub rel_gap: Option<f64>,
    pub margin_chi12: Option<f64>,
    pub margin_p: Option<f64>,
    pub cond_chi12: Option<bool>,
    pub cond_p: Option<bool>,
    pub cond_resonant: Option<bool>,
    pub cond_hierarchy: Option<bool>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ConvergenceTable {
    pub target: f64,
    pub rows: Vec<ConvergenceRow>,
    /// Gap never grows between consecutive stable rungs whose margins both grow.
    pub monotone: bool,
}

pub fn convergence_study(cfg: &ConvergenceConfig) -> Result<ConvergenceTable> {
    if !(cfg.eta > 0.0 && cfg.eta.is_finite()) {
        return Err(Error::InvalidArgument("convergence study needs eta > 0".into()));
    }
    let n = cfg.j_ladder.len();
    if n == 0 {
        return Err(Error::InvalidArgument("j ladder is empty".into()));
    }
    for (name, ladder) in [("p", &cfg.p_ladder), ("rate", &cfg.rate_ladder)] {
        if let Some(l) = ladder {
            if l.len() != n {
                return Err(Error::InvalidArgument(format!(
                    "{name} ladder has {} rungs, j ladder has {n}",
                    l.len()
                )));
            }
        }
    }
    let all = cfg
        .j_ladder
        .iter()
        .chain(cfg.p_ladder.iter().flatten())
        .chain(cfg.rate_ladder.iter().flatten());
    if all.clone().any(|x| !x.is_finite()) {
        return Err(Error::InvalidArgument("ladders must be finite".into()));
    }
    let target = 0.5 / cfg.eta;

    let mut rows = Vec::with_capacity(n);
    for i in 0..n {
        let j = cfg.j_ladder[i];
        let (gamma1, gamma2) = match &cfg.rate_ladder {
            Some(r) => (r[i] - 1.0, r[i] - cfg.eta),
            None => (cfg.gamma1, cfg.gamma2),
        };
        let params = match cfg.model {
            ModelKind::Reciprocal => ModelParams::Reciprocal(ReciprocalParams { gamma1, gamma2, j }),
            ModelKind::NonReciprocal => ModelParams::NonReciprocal(NonReciprocalParams {
                gamma1,
                gamma2,
                nu2: cfg.nu2,
                j,
            }),
        };
        let sys = build(params, 1.0, cfg.eta, 1.0, 0.0)?;
        let empty = |p: f64| ConvergenceRow {
            j,
            p,
            gamma1,
            gamma2,
            stable: false,
            rate: None,
            gap: None,
            rel_gap: None,
            margin_chi12: None,
            margin_p: None,
            cond_chi12: None,
            cond_p: None,
            cond_resonant: None,
            cond_hierarchy: None,
        };
        if !is_stable(&sys, cfg.delta, 0.0)?.stable {
            rows.push(empty(cfg.p_ladder.as_ref().map_or(f64::NAN, |l| l[i])));
            continue;
        }
        let chi = transfer_matrix(&sys, cfg.delta, 0.0)?;
        debug_assert!(is_two_mode(&chi));
        let (c12, c21) = (chi[(0, 1)].norm(), chi[(1, 0)].norm());
        let p = match &cfg.p_ladder {
            Some(l) => l[i],
            None => cfg.p_factor * c12.powi(3) * (c12 + c21),
        };
        let cond = check_conditions(
            &chi,
            p,
            &ConditionParams {
                delta: cfg.delta,
                k1: 1.0,
                k2: cfg.eta,
                gamma1,
                gamma2,
                j,
                threshold: DOMINANCE_THRESHOLD,
            },
        );
        let rate = optimal_rate(&sys, cfg.delta, cfg.eta, p)?;
        rows.push(ConvergenceRow {
            stable: true,
            rate,
            gap: rate.map(|r| target - r),
            rel_gap: rate.map(|r| (target - r) / target),
            margin_chi12: Some(cond.cond_chi12.margin),
            margin_p: Some(cond.cond_p.margin),
            cond_chi12: Some(cond.cond_chi12.holds),
            cond_p: Some(cond.cond_p.holds),
            cond_resonant: Some(cond.cond_resonant),
            cond_hierarchy: Some(cond.cond_hierarchy),
            ..empty(p)
        });
    }

    let monotone = rows.windows(2).all(|w| {
        let (a, b) = (&w[0], &w[1]);
        match (a.gap, b.gap, a.margin_chi12, b.margin_chi12, a.margin_p, b.margin_p) {
            (Some(ga), Some(gb), Some(ca), Some(cb), Some(pa), Some(pb)) if cb > ca && pb > pa => {
                gb.abs() <= ga.abs() * (1.0 + 1e-12)
            }
            _ => true,
        }
    });
    Ok(ConvergenceTable { target, rows, monotone })
}

pub const CONVERGENCE_COLUMNS: [&str; 11] = [
    "j",
    "p",
    "stable",
    "rate",
    "gap",
    "rel_gap",
    "margin_chi12",
    "margin_p",
    "cond_chi12",
    "cond_p",
    "cond_hierarchy",
];

pub fn write_convergence_csv<W: Write>(table: &ConvergenceTable, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let err = |e: csv::Error| Error::Csv(e.to_string());
    w.write_record(CONVERGENCE_COLUMNS).map_err(err)?;
    let f = |x: Option<f64>| x.map(fmt_f64).unwrap_or_default();
    let b = |x: Option<bool>| x.map(|v| v.to_string()).unwrap_or_default();
    for r in &table.rows {
        w.write_record([
            fmt_f64(r.j),
            fmt_f64(r.p),
            r.stable.to_string(),
            f(r.rate),
            f(r.gap),
            f(r.rel_gap),
            f(r.margin_chi12),
            f(r.margin_p),
            b(r.cond_chi12),
            b(r.cond_p),
            b(r.cond_hierarchy),
        ])
        .map_err(err)?;
    }
    w.flush()?;
    Ok(())
}
