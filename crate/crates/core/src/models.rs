//! The reciprocal and fully non-reciprocal two-mode sensors, with analytic
//! transfer matrices that serve as an independent check on inversion.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::linalg::{c, ComplexMatrix, I};
use crate::syscore::{SensorSystem, SystemKind};

/// Analytic resolvent denominators below this magnitude are poles.
pub const POLE_TOL: f64 = 1e-14;

/// Negative `gamma` is gain. All values in units of `k₁`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct ReciprocalParams {
    pub gamma1: f64,
    pub gamma2: f64,
    pub j: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct NonReciprocalParams {
    pub gamma1: f64,
    pub gamma2: f64,
    pub nu2: f64,
    pub j: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub enum ModelParams {
    Reciprocal(ReciprocalParams),
    NonReciprocal(NonReciprocalParams),
}

fn check_finite(values: &[f64]) -> Result<()> {
    if values.iter().all(|x| x.is_finite()) {
        Ok(())
    } else {
        Err(Error::InvalidSystem(format!("model parameters must be finite: {values:?}")))
    }
}

/// `h0 = [[−iγ₁/2, J], [J, −iγ₂/2]]`, `V = σₓ/2`.
pub fn build_reciprocal(params: ReciprocalParams, k1: f64, k2: f64, beta1: f64, beta2: f64) -> Result<SensorSystem> {
    check_finite(&[params.gamma1, params.gamma2, params.j])?;
    let h0 = ComplexMatrix::from_rows(&[
        [c(0.0, -0.5 * params.gamma1), c(params.j, 0.0)],
        [c(params.j, 0.0), c(0.0, -0.5 * params.gamma2)],
    ]);
    Ok(SensorSystem::new(h0, ComplexMatrix::half_sigma_x(), k1, k2, beta1, beta2)?.with_kind(SystemKind::Reciprocal))
}

/// `h0 = [[−iγ₁/2, J], [0, ν₂ − iγ₂/2]]`, `V = σₓ/2`.
pub fn build_nonreciprocal(
    params: NonReciprocalParams,
    k1: f64,
    k2: f64,
    beta1: f64,
    beta2: f64,
) -> Result<SensorSystem> {
    check_finite(&[params.gamma1, params.gamma2, params.nu2, params.j])?;
    let h0 = ComplexMatrix::from_rows(&[
        [c(0.0, -0.5 * params.gamma1), c(params.j, 0.0)],
        [c(0.0, 0.0), c(params.nu2, -0.5 * params.gamma2)],
    ]);
    Ok(SensorSystem::new(h0, ComplexMatrix::half_sigma_x(), k1, k2, beta1, beta2)?
        .with_kind(SystemKind::NonReciprocal))
}

pub fn build(model: ModelParams, k1: f64, k2: f64, beta1: f64, beta2: f64) -> Result<SensorSystem> {
    match model {
        ModelParams::Reciprocal(p) => build_reciprocal(p, k1, k2, beta1, beta2),
        ModelParams::NonReciprocal(p) => build_nonreciprocal(p, k1, k2, beta1, beta2),
    }
}

/// Analytic 2×2 transfer matrix. Parameters are in the same units as `k1`.
pub fn closed_form_chi(model: ModelParams, k1: f64, k2: f64, delta: f64) -> Result<ComplexMatrix> {
    let pole = |z: num_complex::Complex64| {
        if z.norm() < POLE_TOL {
            Err(Error::Pole(z.norm()))
        } else {
            Ok(())
        }
    };
    let ik1 = I * k1;
    match model {
        ModelParams::Reciprocal(p) => {
            let a = c(delta, 0.5 * (k1 + p.gamma1));
            let d = c(delta, 0.5 * (k2 + p.gamma2));
            let g = -p.j * p.j + a * d;
            pole(g)?;
            let s = ik1 / g;
            Ok(ComplexMatrix::from_rows(&[[s * d, s * p.j], [s * p.j, s * a]]))
        }
        ModelParams::NonReciprocal(p) => {
            let a = c(delta, 0.5 * (k1 + p.gamma1));
            let d = c(delta - p.nu2, 0.5 * (k2 + p.gamma2));
            pole(a)?;
            pole(d)?;
            Ok(ComplexMatrix::from_rows(&[
                [ik1 / a, ik1 * p.j / (a * d)],
                [c(0.0, 0.0), ik1 / d],
            ]))
        }
    }
}
