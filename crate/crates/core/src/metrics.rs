//! Signal, noise, photon number and measurement rate per photon.
//!
//! Rates are returned as `Γ̄/k₁`. Functions taking `k1` explicitly work in
//! any unit system; systems built by this crate always have `k1 = 1`.

use serde::Serialize;

use crate::bathmod::{
    achieved_noise, gain_projection, loss_projection, positive_part, spectral_decomposition, system_antihermitian,
    xi, BathCoupling,
};
use crate::error::{Error, Result};
use crate::linalg::{ComplexMatrix, C64, I};
use crate::syscore::{is_stable, transfer_matrix, SensorSystem};

/// Default margin ratio for every "much greater than" condition.
pub const DOMINANCE_THRESHOLD: f64 = 10.0;

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Response {
    pub lambda: C64,
    /// Homodyne angle `−arg λ`; 0 when `λ = 0`.
    pub phi: f64,
    pub degenerate: bool,
}

/// `(χVχ)`.
pub fn chi_v_chi(chi: &ComplexMatrix, v: &ComplexMatrix) -> Result<ComplexMatrix> {
    chi.try_mul(v)?.try_mul(chi)
}

/// `λ = i(β₁/k₁)(χVχ)₁₁ + i√(k₂/k₁)(β₂/k₁)(χVχ)₁₂`.
pub fn response_coefficient(
    chi: &ComplexMatrix,
    v: &ComplexMatrix,
    k1: f64,
    k2: f64,
    beta1: f64,
    beta2: f64,
) -> Result<Response> {
    let cvc = chi_v_chi(chi, v)?;
    let mut lambda = I * (beta1 / k1) * cvc[(0, 0)];
    if beta2 != 0.0 && k2 != 0.0 {
        if cvc.cols() < 2 {
            return Err(Error::DimensionMismatch("second drive needs at least two modes".into()));
        }
        lambda += I * (k2 / k1).sqrt() * (beta2 / k1) * cvc[(0, 1)];
    }
    let degenerate = lambda.norm() == 0.0;
    Ok(Response {
        lambda,
        phi: if degenerate { 0.0 } else { -lambda.arg() },
        degenerate,
    })
}

/// `S/(ε²τ²) = 2k₁|λ|²`.
pub fn signal_power_density(lambda: C64, k1: f64) -> f64 {
    2.0 * k1 * lambda.norm_sqr()
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct NoiseDensity {
    /// `(k₁/2)(|1−χ₁₁|² + η|χ₁₂|² + (2/k₁)(P_Y + P_Z))`.
    pub raw: f64,
    /// `(k₁/2)(1 + (4/k₁)P_Y)`.
    pub simplified: f64,
}

pub fn noise_power_density(bath: &BathCoupling, chi: &ComplexMatrix, k1: f64, k2: f64) -> Result<NoiseDensity> {
    let py = gain_projection(bath, chi)?;
    let pz = loss_projection(bath, chi)?;
    let c11 = chi[(0, 0)];
    let c12 = if chi.cols() > 1 { chi[(0, 1)] } else { C64::new(0.0, 0.0) };
    let raw = 0.5 * k1 * ((C64::new(1.0, 0.0) - c11).norm_sqr() + (k2 / k1) * c12.norm_sqr() + 2.0 / k1 * (py + pz));
    Ok(NoiseDensity {
        raw,
        simplified: achieved_noise(bath, chi, k1)?,
    })
}

/// `(Ξ, (k₁/2)(1 + 2ΞΘ(Ξ)))`.
pub fn min_noise_density(chi: &ComplexMatrix, k1: f64, k2: f64) -> (f64, f64) {
    let x = xi(chi, k1, k2);
    (x, 0.5 * k1 * (1.0 + 2.0 * positive_part(x)))
}

/// Steady-state coherent photon number from `χ†χ`.
pub fn total_photons(chi: &ComplexMatrix, k1: f64, k2: f64, beta1: f64, beta2: f64) -> f64 {
    let g = chi.adjoint() * chi;
    let mut n = beta1 * beta1 / k1 * g[(0, 0)].re;
    if beta2 != 0.0 && k2 != 0.0 && g.rows() > 1 {
        n += k2 * beta2 * beta2 / (k1 * k1) * g[(1, 1)].re;
        n += (k1 * k2).sqrt() * beta1 * beta2 / (k1 * k1) * (g[(0, 1)] + g[(1, 0)]).re;
    }
    n
}

/// Every quantity of the general pipeline at one detuning.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct MetricsReport {
    pub lambda_: C64,
    pub phi: f64,
    pub signal_density: f64,
    pub noise_density_raw: f64,
    pub noise_density: f64,
    pub noise_density_min: f64,
    pub xi: f64,
    pub n_tot: f64,
    pub gamma_meas: f64,
    pub gamma_opt: f64,
    pub stable: bool,
    pub phi_degenerate: bool,
}

/// Rate per photon for the system's own drives.
///
/// `bath` defaults to the spectral decomposition of `M`. `λ` and `n_tot`
/// carry the system's `β` values; the rates do not depend on their scale.
pub fn measurement_rate(sys: &SensorSystem, delta: f64, bath: Option<&BathCoupling>) -> Result<MetricsReport> {
    let chi = transfer_matrix(sys, delta, 0.0)?;
    let k1 = sys.k1();
    let n_tot = total_photons(&chi, k1, sys.k2(), sys.beta1(), sys.beta2());
    if n_tot <= 0.0 {
        return Err(Error::ZeroPhotons);
    }
    let resp = response_coefficient(&chi, sys.v(), k1, sys.k2(), sys.beta1(), sys.beta2())?;
    let default_bath;
    let bath = match bath {
        Some(b) => b,
        None => {
            default_bath = spectral_decomposition(&system_antihermitian(sys))?;
            &default_bath
        }
    };
    let noise = noise_power_density(bath, &chi, k1, sys.k2())?;
    let (xi, noise_min) = min_noise_density(&chi, k1, sys.k2());
    let signal = signal_power_density(resp.lambda, k1);
    Ok(MetricsReport {
        lambda_: resp.lambda,
        phi: resp.phi,
        signal_density: signal,
        noise_density_raw: noise.raw,
        noise_density: noise.simplified,
        noise_density_min: noise_min,
        xi,
        n_tot,
        gamma_meas: k1 * signal / (noise.simplified * n_tot),
        gamma_opt: k1 * signal / (noise_min * n_tot),
        stable: true,
        phi_degenerate: resp.degenerate,
    })
}

/// `Γ̄_opt/k₁` for the system's `V` at drive ratio `p` and `η = k₂/k₁`,
/// or `None` when unstable.
pub fn optimal_rate(sys: &SensorSystem, delta: f64, eta: f64, p: f64) -> Result<Option<f64>> {
    let probe = sys.with_drives(eta, 1.0, p)?;
    if !is_stable(&probe, delta, 0.0)?.stable {
        return Ok(None);
    }
    let chi = transfer_matrix(&probe, delta, 0.0)?;
    let resp = response_coefficient(&chi, probe.v(), 1.0, eta, 1.0, p)?;
    let n = total_photons(&chi, 1.0, eta, 1.0, p);
    if n <= 0.0 {
        return Err(Error::ZeroPhotons);
    }
    let (_, noise) = min_noise_density(&chi, 1.0, eta);
    Ok(Some(signal_power_density(resp.lambda, 1.0) / (noise * n)))
}

/// Expanded two-mode rate for `V = σₓ/2`, `β₁ = 1`, `β₂ = p`.
pub fn two_mode_rate(chi: &ComplexMatrix, eta: f64, p: f64, k1: f64) -> f64 {
    let (c11, c12, c21, c22) = entries(chi);
    let s = eta.sqrt() * p;
    let u = c11 * (c12 + c21);
    let w = c12 * c12 + c11 * c22;
    let num = c11.norm_sqr() * (c12 + c21).norm_sqr() + 2.0 * s * (u * w.conj()).re + s * s * w.norm_sqr();
    let den = c11.norm_sqr()
        + c21.norm_sqr()
        + 2.0 * s * (c12 * c11.conj() + c21.conj() * c22).re
        + s * s * (c12.norm_sqr() + c22.norm_sqr());
    num / den * k1 / (1.0 + 2.0 * positive_part(xi(chi, k1, eta * k1)))
}

fn entries(chi: &ComplexMatrix) -> (C64, C64, C64, C64) {
    assert!(chi.rows() == 2 && chi.cols() == 2, "two-mode formula needs a 2x2 chi");
    (chi[(0, 0)], chi[(0, 1)], chi[(1, 0)], chi[(1, 1)])
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct AsymptoticBound {
    /// `lim_{p→∞}` of [`two_mode_rate`].
    pub limit_rate: f64,
    /// `½(k₁/k₂)k₁`; `None` when `η = 0`.
    pub uniform_bound: Option<f64>,
}

pub fn asymptotic_bound(chi: &ComplexMatrix, eta: f64, k1: f64) -> AsymptoticBound {
    let (c11, c12, _, c22) = entries(chi);
    let limit = (c12 * c12 + c11 * c22).norm_sqr() / (c12.norm_sqr() + c22.norm_sqr()) * k1
        / (1.0 + 2.0 * positive_part(xi(chi, k1, eta * k1)));
    AsymptoticBound {
        limit_rate: limit,
        uniform_bound: (eta > 0.0).then(|| 0.5 * k1 / eta),
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Condition {
    pub holds: bool,
    pub margin: f64,
}

impl Condition {
    fn from_margin(margin: f64, threshold: f64) -> Self {
        Self {
            holds: margin > threshold,
            margin,
        }
    }
}

/// Physical rates entering the resonance and hierarchy conditions.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct ConditionParams {
    pub delta: f64,
    pub k1: f64,
    pub k2: f64,
    pub gamma1: f64,
    pub gamma2: f64,
    pub j: f64,
    pub threshold: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct ConditionReport {
    /// `|χ₁₂| ≫ max(|χ₁₁|, |χ₂₂|, 1)`.
    pub cond_chi12: Condition,
    /// `p ≫ |χ₁₂|³(|χ₁₂| + |χ₂₁|)`.
    pub cond_p: Condition,
    /// `Δ → 0` and `kᵢ + γᵢ → 0`, both small against `|J|`.
    pub cond_resonant: bool,
    /// `k₁ ≫ |J| ≫ max(|Δ|, |kᵢ + γᵢ|)`.
    pub cond_hierarchy: bool,
    pub dominance_factor: f64,
}

pub fn check_conditions(chi: &ComplexMatrix, p: f64, params: &ConditionParams) -> ConditionReport {
    let (c11, c12, c21, c22) = entries(chi);
    let a12 = c12.norm();
    let thr = params.threshold;
    let dominance_factor = (a12 / c11.norm()).min(a12 / c22.norm()).min(a12);
    let p_threshold = a12.powi(3) * (a12 + c21.norm());
    let cond_p = if p_threshold > 0.0 {
        Condition::from_margin(p / p_threshold, thr)
    } else {
        Condition::from_margin(f64::INFINITY, thr)
    };
    let small = params
        .delta
        .abs()
        .max((params.k1 + params.gamma1).abs())
        .max((params.k2 + params.gamma2).abs());
    let j = params.j.abs();
    let ratio = |num: f64, den: f64| if den == 0.0 { f64::INFINITY } else { num / den };
    ConditionReport {
        cond_chi12: Condition::from_margin(dominance_factor, thr),
        cond_p,
        cond_resonant: ratio(j, small) > thr,
        cond_hierarchy: ratio(params.k1, j) > thr && ratio(j, small) > thr,
        dominance_factor,
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum DetunedCase {
    /// Drive 1 carries the signal; drive 2 only adds photons.
    One,
    /// Drive 2 carries the signal through mode 2.
    Two,
}

/// `|gap| / max{|Δᵢ|, ‖H̃‖_F, k₁, k₂, √k₁β₁, √k₂β₂}`.
pub fn rwa_ratio(sys: &SensorSystem, delta_i: f64, drive_gap: f64) -> f64 {
    let scale = [
        delta_i.abs(),
        sys.h0().frobenius_norm(),
        sys.k1(),
        sys.k2(),
        sys.k1().sqrt() * sys.beta1(),
        sys.k2().sqrt() * sys.beta2(),
    ]
    .into_iter()
    .fold(0.0, f64::max);
    drive_gap.abs() / scale
}

/// Rate per photon when the drives sit at different frequencies,
/// `drive_gap = ω_dr1 − ω_dr2`. `delta_i` is the detuning of the drive that
/// carries the signal. Homodyne detection is at that drive's frequency.
pub fn detuned_rate(sys: &SensorSystem, delta_i: f64, drive_gap: f64, case: DetunedCase) -> Result<f64> {
    detuned_rate_with(sys, delta_i, drive_gap, case, DOMINANCE_THRESHOLD)
}

pub fn detuned_rate_with(
    sys: &SensorSystem,
    delta_i: f64,
    drive_gap: f64,
    case: DetunedCase,
    threshold: f64,
) -> Result<f64> {
    let ratio = rwa_ratio(sys, delta_i, drive_gap);
    // NaN ratios fail too.
    if ratio.partial_cmp(&threshold) != Some(std::cmp::Ordering::Greater) {
        return Err(Error::RwaInvalid { ratio, threshold });
    }
    if sys.n_modes() < 2 {
        return Err(Error::DimensionMismatch("detuned drives need two ports".into()));
    }
    let (k1, eta) = (sys.k1(), sys.k2() / sys.k1());
    let (b1, b2) = (sys.beta1(), sys.beta2());
    let chi = transfer_matrix(sys, delta_i, 0.0)?;
    let other = match case {
        DetunedCase::One => delta_i - drive_gap,
        DetunedCase::Two => delta_i + drive_gap,
    };
    let chi_other = transfer_matrix(sys, other, 0.0)?;
    let cvc = chi_v_chi(&chi, sys.v())?;
    let g = chi.adjoint() * &chi;
    let g_other = chi_other.adjoint() * &chi_other;
    let excess = 1.0 + 2.0 * positive_part(xi(&chi, k1, sys.k2()));
    let (num, den) = match case {
        DetunedCase::One => (
            4.0 * b1 * b1 * cvc[(0, 0)].norm_sqr(),
            b1 * b1 * g[(0, 0)].re + eta * b2 * b2 * g_other[(1, 1)].re,
        ),
        DetunedCase::Two => (
            4.0 * eta * b2 * b2 * cvc[(0, 1)].norm_sqr(),
            b1 * b1 * g_other[(0, 0)].re + eta * b2 * b2 * g[(1, 1)].re,
        ),
    };
    if den <= 0.0 {
        return Err(Error::ZeroPhotons);
    }
    Ok(k1 * num / (den * excess))
}

/// Single-drive ceiling for case one: `4|(χVχ)₁₁|²/(χ†χ)₁₁ · k₁`.
pub fn case_one_ceiling(sys: &SensorSystem, delta: f64) -> Result<f64> {
    let chi = transfer_matrix(sys, delta, 0.0)?;
    let cvc = chi_v_chi(&chi, sys.v())?;
    let g = chi.adjoint() * &chi;
    Ok(4.0 * cvc[(0, 0)].norm_sqr() / g[(0, 0)].re * sys.k1())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bathmod::{min_noise_decomposition, DEFAULT_MIN_NOISE_TOL};
    use crate::linalg::c;
    use crate::models::{build_nonreciprocal, build_reciprocal, NonReciprocalParams, ReciprocalParams};

    fn rel(a: f64, b: f64) -> f64 {
        (a - b).abs() / b.abs().max(1e-300)
    }

    fn t1(beta1: f64, beta2: f64) -> SensorSystem {
        SensorSystem::new(
            ComplexMatrix::zeros(2, 2),
            ComplexMatrix::half_sigma_x(),
            1.0,
            1.0,
            beta1,
            beta2,
        )
        .unwrap()
    }

    fn t0() -> SensorSystem {
        let h0 = ComplexMatrix::from_diag(&[c(0.0, 0.0), c(0.0, -0.5)]);
        SensorSystem::new(h0, ComplexMatrix::half_sigma_x(), 1.0, 0.0, 1.0, 0.0).unwrap()
    }

    fn fig2() -> SensorSystem {
        let p = ReciprocalParams {
            gamma1: -0.99,
            gamma2: -0.011,
            j: 0.16,
        };
        build_reciprocal(p, 1.0, 0.01, 1.0, 30.0).unwrap()
    }

    fn appendix_cb() -> SensorSystem {
        let p = ReciprocalParams {
            gamma1: 0.0,
            gamma2: 0.2,
            j: 0.2,
        };
        build_reciprocal(p, 1.0, 0.0, 1.0, 0.0).unwrap()
    }

    #[test]
    fn response_examples() {
        let chi = ComplexMatrix::identity(2).scale_re(2.0);
        let v = ComplexMatrix::half_sigma_x();
        let r = response_coefficient(&chi, &v, 1.0, 0.0, 1.0, 0.0).unwrap();
        assert_eq!(r.lambda, c(0.0, 0.0));
        assert!(r.degenerate);
        assert_eq!(r.phi, 0.0);

        let r = response_coefficient(&chi, &v, 1.0, 1.0, 1.0, 1.0).unwrap();
        assert!((r.lambda - c(0.0, 2.0)).norm() < 1e-15);
        assert!((r.phi + std::f64::consts::FRAC_PI_2).abs() < 1e-15);
    }

    #[test]
    fn signal_examples() {
        assert_eq!(signal_power_density(c(0.0, 0.0), 1.0), 0.0);
        assert!((signal_power_density(c(0.0, 2.0), 1.0) - 8.0).abs() < 1e-15);
        let l = c(0.3, -1.2);
        for k in 0..8 {
            let rot = C64::from_polar(1.0, k as f64 * 0.7);
            assert!(rel(signal_power_density(l * rot, 1.0), signal_power_density(l, 1.0)) < 1e-15);
        }
    }

    #[test]
    fn noise_examples() {
        let sys = t0();
        let chi = transfer_matrix(&sys, 0.0, 0.0).unwrap();
        let m = system_antihermitian(&sys);
        let b = min_noise_decomposition(&m, &chi, DEFAULT_MIN_NOISE_TOL).unwrap();
        let n = noise_power_density(&b, &chi, 1.0, 0.0).unwrap();
        assert!((n.raw - 0.5).abs() < 1e-14 && (n.simplified - 0.5).abs() < 1e-14);

        // T1 has h0 = 0, so Y = Z = I is a valid (if wasteful) decomposition.
        let chi = ComplexMatrix::identity(2).scale_re(2.0);
        let b = BathCoupling::new(ComplexMatrix::identity(2), ComplexMatrix::identity(2)).unwrap();
        let n = noise_power_density(&b, &chi, 1.0, 1.0).unwrap();
        assert!((n.raw - 8.5).abs() < 1e-13, "{}", n.raw);
        assert!((n.simplified - 8.5).abs() < 1e-13);
    }

    #[test]
    fn min_noise_examples() {
        let chi = ComplexMatrix::identity(2).scale_re(2.0);
        assert_eq!(min_noise_density(&chi, 1.0, 0.0), (0.0, 0.5));

        let chi = transfer_matrix(&fig2(), 0.0, 0.0).unwrap();
        let (x, d) = min_noise_density(&chi, 1.0, 0.01);
        assert!((x - 0.43015).abs() < 1e-5, "{x}");
        assert!((d - 0.93015).abs() < 1e-5);

        let chi = transfer_matrix(&appendix_cb(), 0.0, 0.0).unwrap();
        let (x, d) = min_noise_density(&chi, 1.0, 0.0);
        assert!((x + 0.988).abs() < 1e-3, "{x}");
        assert_eq!(d, 0.5);
    }

    #[test]
    fn photon_examples() {
        let chi = ComplexMatrix::identity(2).scale_re(2.0);
        assert!((total_photons(&chi, 1.0, 1.0, 1.0, 1.0) - 8.0).abs() < 1e-14);
        let chi = transfer_matrix(&fig2(), 0.2, 0.0).unwrap();
        let g = chi.adjoint() * &chi;
        assert_eq!(total_photons(&chi, 1.0, 0.01, 1.7, 0.0), 1.7 * 1.7 * g[(0, 0)].re);
    }

    #[test]
    fn measurement_rate_examples() {
        let r = measurement_rate(&t1(1.0, 1.0), 0.0, None).unwrap();
        assert!((r.lambda_ - c(0.0, 2.0)).norm() < 1e-14);
        assert!((r.signal_density - 8.0).abs() < 1e-13);
        assert!((r.n_tot - 8.0).abs() < 1e-13);
        // Ξ = −2·2 + 2² + 0 vanishes, so the noise floor is pure shot noise.
        assert!(r.xi.abs() < 1e-13);
        assert!((r.gamma_opt - 2.0).abs() < 1e-13);

        let r = measurement_rate(&t1(1.0, 1e6), 0.0, None).unwrap();
        assert!((r.gamma_opt - 4.0).abs() < 1e-5);

        let r = measurement_rate(&t0(), 0.0, None).unwrap();
        assert_eq!(r.gamma_opt, 0.0);
        assert!(r.phi_degenerate);

        assert!(matches!(measurement_rate(&t1(0.0, 0.0), 0.0, None), Err(Error::ZeroPhotons)));
        let unstable = fig2().with_drives(0.0, 1.0, 0.0).unwrap();
        assert!(matches!(measurement_rate(&unstable, 0.0, None), Err(Error::Unstable { .. })));
    }

    #[test]
    fn fig2_two_drives_at_resonance() {
        let r = measurement_rate(&fig2(), 0.0, None).unwrap();
        assert!((r.gamma_opt - 18.889).abs() < 1e-3, "{}", r.gamma_opt);
        assert!(r.gamma_meas <= r.gamma_opt + 1e-9);
        // The single-drive Fig. 2 system has no stable steady state at all.
        assert_eq!(optimal_rate(&fig2(), 0.0, 0.0, 0.0).unwrap(), None);
    }

    #[test]
    fn two_mode_examples() {
        let chi = transfer_matrix(&appendix_cb(), 0.0, 0.0).unwrap();
        let r = two_mode_rate(&chi, 0.0, 0.0, 1.0);
        assert!((r - 3.951).abs() < 1e-3, "{r}");
        let mut swapped = chi.clone();
        swapped[(0, 1)] = chi[(1, 0)];
        swapped[(1, 0)] = chi[(0, 1)];
        assert!(rel(two_mode_rate(&swapped, 0.0, 0.0, 1.0), r) < 1e-14);

        let chi = ComplexMatrix::identity(2).scale_re(2.0);
        assert!(rel(two_mode_rate(&chi, 1.0, 1e3, 1.0), 4.0) < 1e-3);
    }

    #[test]
    fn two_mode_matches_general_pipeline() {
        for (delta, p) in [(0.0, 30.0), (0.2, 3.0), (-0.3, 0.5)] {
            let sys = fig2().with_drives(0.01, 1.0, p).unwrap();
            let chi = transfer_matrix(&sys, delta, 0.0).unwrap();
            let general = measurement_rate(&sys, delta, None).unwrap().gamma_opt;
            assert!(rel(two_mode_rate(&chi, 0.01, p, 1.0), general) < 1e-9);
        }
    }

    #[test]
    fn asymptotic_examples() {
        let chi = ComplexMatrix::identity(2).scale_re(2.0);
        assert_eq!(asymptotic_bound(&chi, 0.01, 1.0).uniform_bound, Some(50.0));
        assert_eq!(asymptotic_bound(&chi, 1.0, 1.0).uniform_bound, Some(0.5));
        assert_eq!(asymptotic_bound(&chi, 0.0, 1.0).uniform_bound, None);

        let sys = build_nonreciprocal(
            NonReciprocalParams {
                gamma1: 1.0,
                gamma2: 0.5,
                nu2: 0.0,
                j: 1e3,
            },
            1.0,
            1e-3,
            1.0,
            0.0,
        )
        .unwrap();
        let chi = transfer_matrix(&sys, 0.0, 0.0).unwrap();
        let b = asymptotic_bound(&chi, 1e-3, 1.0);
        assert!(rel(b.limit_rate, 500.0) < 0.05, "{}", b.limit_rate);
    }

    #[test]
    fn condition_examples() {
        let sys = fig2();
        let chi = transfer_matrix(&sys, 0.0, 0.0).unwrap();
        let params = ConditionParams {
            delta: 0.0,
            k1: 1.0,
            k2: 0.01,
            gamma1: -0.99,
            gamma2: -0.011,
            j: 0.16,
            threshold: DOMINANCE_THRESHOLD,
        };
        let r = check_conditions(&chi, 30.0, &params);
        // |χ₁₂| ≈ 6.25 dominates |χ₁₁| and |χ₂₂| but is only 6.25× the unit floor.
        assert!((r.dominance_factor - 6.2506).abs() < 1e-3);
        assert!(!r.cond_chi12.holds);
        let loose = ConditionParams { threshold: 5.0, ..params };
        assert!(check_conditions(&chi, 30.0, &loose).cond_chi12.holds);
        assert!(!r.cond_p.holds);
        assert!((r.cond_p.margin * 30f64.recip() - 1.0 / 3052.0).abs() < 1e-5);

        let chi = ComplexMatrix::identity(2).scale_re(2.0);
        assert!(!check_conditions(&chi, 1.0, &params).cond_chi12.holds);
    }

    #[test]
    fn detuned_examples() {
        assert_eq!(
            detuned_rate(&t0().with_drives(0.0, 1e-3, 0.0).unwrap(), 0.0, 1e3, DetunedCase::One).unwrap(),
            0.0
        );

        let sys = fig2().with_drives(0.01, 1.0, 30.0).unwrap();
        let ceiling = case_one_ceiling(&sys, 0.0).unwrap();
        let got = detuned_rate(&sys, 0.0, 1e3, DetunedCase::One).unwrap();
        assert!(got < ceiling);

        let err = detuned_rate(&sys, 0.0, 5.0, DetunedCase::One).unwrap_err();
        assert!(matches!(err, Error::RwaInvalid { .. }));
    }
}
