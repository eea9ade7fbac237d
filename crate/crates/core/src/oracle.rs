//! Time-domain cross-check: mean amplitudes by ODE integration, `λ` by
//! finite differences of the output mean, and homodyne noise by Monte Carlo
//! integration of the Langevin equations with semiclassical vacuum noise.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::Serialize;

use crate::bathmod::BathCoupling;
use crate::error::{Error, Result};
use crate::linalg::{ComplexMatrix, C64, I};
use crate::metrics::response_coefficient;
use crate::syscore::{dynamics_matrix, is_stable, transfer_matrix, SensorSystem};

pub const DEFAULT_EPS_STEP: f64 = 1e-6;
/// `dt · ‖A‖_F` may not exceed this.
pub const MAX_STEP_SCALE: f64 = 0.01;
pub const DEFAULT_BURN_DECAYS: f64 = 20.0;
pub const DEFAULT_TRAJECTORIES: usize = 4000;

/// Weighting of the homodyne current over the record window.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Window {
    /// Plain integral of the current.
    Rectangular,
    /// `√(8/3)·sin²(πt/τ)`, unit mean square; suppresses the edge leakage
    /// that dominates for slowly decaying modes.
    Hann,
}

impl Window {
    fn weight(self, t: f64, tau: f64) -> f64 {
        match self {
            Window::Rectangular => 1.0,
            Window::Hann => {
                let s = (std::f64::consts::PI * t / tau).sin();
                (8.0f64 / 3.0).sqrt() * s * s
            }
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct TrajectoryConfig {
    pub dt: f64,
    pub t_total: f64,
    pub t_burn: f64,
    pub n_traj: usize,
    pub seed: u64,
    pub window: Window,
}

impl TrajectoryConfig {
    /// Finest admissible step, twenty slowest decay times of burn-in and a
    /// record window of length `tau`.
    pub fn for_system(sys: &SensorSystem, delta: f64, tau: f64) -> Result<Self> {
        let slowest = slowest_decay(sys, delta)?;
        let t_burn = DEFAULT_BURN_DECAYS / slowest;
        Ok(Self {
            dt: step_limit(sys, delta),
            t_total: t_burn + tau,
            t_burn,
            n_traj: DEFAULT_TRAJECTORIES,
            seed: 0,
            window: Window::Hann,
        })
    }

    /// Configuration for the deterministic mean integration only: forty
    /// decay times at a step well inside the RK4 stability region.
    pub fn for_means(sys: &SensorSystem, delta: f64) -> Result<Self> {
        let slowest = slowest_decay(sys, delta)?;
        let t_total = 2.0 * DEFAULT_BURN_DECAYS / slowest;
        Ok(Self {
            dt: 0.1 / dynamics_matrix(sys, delta, 0.0).frobenius_norm(),
            t_total,
            t_burn: 0.0,
            n_traj: 1,
            seed: 0,
            window: Window::Hann,
        })
    }

    fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidTrajectoryConfig(m.into()));
        if !(self.dt.is_finite() && self.dt > 0.0) {
            return bad("dt must be positive");
        }
        if !(self.t_total.is_finite() && self.t_burn.is_finite() && self.t_burn >= 0.0) {
            return bad("durations must be finite and non-negative");
        }
        if self.t_burn >= self.t_total {
            return bad("t_burn must be shorter than t_total");
        }
        if self.n_traj == 0 {
            return bad("n_traj must be at least 1");
        }
        Ok(())
    }
}

/// `0.01/‖A‖_F`.
pub fn step_limit(sys: &SensorSystem, delta: f64) -> f64 {
    MAX_STEP_SCALE / dynamics_matrix(sys, delta, 0.0).frobenius_norm()
}

fn slowest_decay(sys: &SensorSystem, delta: f64) -> Result<f64> {
    let report = is_stable(sys, delta, 0.0)?;
    if !report.stable {
        return Err(Error::Unstable {
            max_real: report.max_real,
            margin: crate::syscore::STABILITY_MARGIN,
        });
    }
    Ok(-report.max_real)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct McEstimate {
    /// Sample variance of the integrated homodyne record.
    pub variance: f64,
    pub stderr: f64,
    pub tau: f64,
    pub n_traj: usize,
}

impl McEstimate {
    /// Variance per unit window length, comparable to `N/τ`.
    pub fn density(&self) -> f64 {
        self.variance / self.tau
    }
    pub fn density_stderr(&self) -> f64 {
        self.stderr / self.tau
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct OracleReport {
    pub means_ss: Vec<C64>,
    pub bout_mean: C64,
    pub lambda_fd: C64,
    pub noise_mc: Option<McEstimate>,
    pub n_tot_td: f64,
}

/// Integrates `d⟨a⟩/dt = A⟨a⟩ + b` from rest with classical RK4.
///
/// RK4's fixed point for a linear system is exactly `−A⁻¹b`, so the only
/// error left is the undecayed transient.
pub fn steady_state_means(sys: &SensorSystem, delta: f64, eps: f64, cfg: &TrajectoryConfig) -> Result<Vec<C64>> {
    cfg.validate()?;
    let a = dynamics_matrix(sys, delta, eps);
    let b = sys.drive_vector();
    let n = sys.n_modes();
    let steps = (cfg.t_total / cfg.dt).ceil() as usize;
    let h = cfg.t_total / steps as f64;
    let f = |x: &[C64]| -> Vec<C64> { a.mul_vec(x).iter().zip(&b).map(|(p, q)| p + q).collect() };
    let axpy = |x: &[C64], k: &[C64], s: f64| -> Vec<C64> { x.iter().zip(k).map(|(p, q)| p + q * s).collect() };
    let residual = |x: &[C64]| f(x).iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();

    let mut x = vec![C64::new(0.0, 0.0); n];
    let mut mid_residual = f64::NAN;
    for step in 0..steps {
        let k1 = f(&x);
        let k2 = f(&axpy(&x, &k1, 0.5 * h));
        let k3 = f(&axpy(&x, &k2, 0.5 * h));
        let k4 = f(&axpy(&x, &k3, h));
        for i in 0..n {
            x[i] += (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]) * (h / 6.0);
        }
        if step + 1 == steps / 2 {
            mid_residual = residual(&x);
        }
    }
    let late = residual(&x);
    let scale = b.iter().map(|z| z.norm()).fold(0.0, f64::max);
    let decayed = late <= 1e-12 * scale.max(f64::MIN_POSITIVE) || late < mid_residual;
    if !x.iter().all(|z| z.is_finite()) || (!decayed && steps >= 2) {
        return Err(Error::NonDecayingTransient {
            early: mid_residual,
            late,
        });
    }
    Ok(x)
}

/// `⟨B̂_out⟩ = β₁ − i√k₁⟨a₁⟩`.
pub fn output_mean(sys: &SensorSystem, means: &[C64]) -> C64 {
    C64::new(sys.beta1(), 0.0) - I * sys.k1().sqrt() * means[0]
}

/// Central difference of `⟨B̂_out⟩` over `ε = ±eps_step`.
pub fn lambda_fd(sys: &SensorSystem, delta: f64, cfg: &TrajectoryConfig, eps_step: f64) -> Result<C64> {
    if !(eps_step.is_finite() && eps_step > 0.0) {
        return Err(Error::InvalidArgument(format!("eps_step must be positive, got {eps_step}")));
    }
    for e in [eps_step, -eps_step] {
        let r = is_stable(sys, delta, e)?;
        if !r.stable {
            return Err(Error::Unstable {
                max_real: r.max_real,
                margin: crate::syscore::STABILITY_MARGIN,
            });
        }
    }
    let plus = output_mean(sys, &steady_state_means(sys, delta, eps_step, cfg)?);
    let minus = output_mean(sys, &steady_state_means(sys, delta, -eps_step, cfg)?);
    Ok((plus - minus) / (2.0 * eps_step))
}

/// `Σᵢ |⟨aᵢ⟩|²` from the integrated means.
pub fn photon_number_td(sys: &SensorSystem, delta: f64, cfg: &TrajectoryConfig) -> Result<f64> {
    Ok(steady_state_means(sys, delta, 0.0, cfg)?.iter().map(|z| z.norm_sqr()).sum())
}

/// One complex white-noise input: its kick on the modes and its direct
/// weight in the output field `B̂_out`.
struct Channel {
    kick: Vec<C64>,
    conjugate: bool,
    direct: f64,
}

fn channels(sys: &SensorSystem, bath: &BathCoupling) -> Vec<Channel> {
    let n = sys.n_modes();
    let unit = |i: usize, s: C64| {
        let mut v = vec![C64::new(0.0, 0.0); n];
        v[i] = s;
        v
    };
    let mut out = vec![Channel {
        kick: unit(0, -I * sys.k1().sqrt()),
        conjugate: false,
        direct: 1.0,
    }];
    if n > 1 && sys.k2() > 0.0 {
        out.push(Channel {
            kick: unit(1, -I * sys.k2().sqrt()),
            conjugate: false,
            direct: 0.0,
        });
    }
    let s2 = -I * std::f64::consts::SQRT_2;
    for j in 0..bath.n_gain() {
        out.push(Channel {
            kick: bath.y.column(j).iter().map(|x| x * s2).collect(),
            conjugate: true,
            direct: 0.0,
        });
    }
    for j in 0..bath.n_loss() {
        out.push(Channel {
            kick: bath.z.column(j).iter().map(|x| x * s2).collect(),
            conjugate: false,
            direct: 0.0,
        });
    }
    out
}

/// Variance of the homodyne record `m(τ) = ∫ w(t) I(t) dt` at angle
/// `φ = −arg λ`, with `I = √(k₁/2)(e^{iφ}B̂_out + h.c.)`.
///
/// Only fluctuations are simulated; the means drop out of the variance.
/// Each channel draws `dW` with independent real and imaginary parts of
/// variance `dt/4`. Gain channels kick the modes with `conj(dW)`.
pub fn mc_noise(
    sys: &SensorSystem,
    delta: f64,
    bath: &BathCoupling,
    cfg: &TrajectoryConfig,
    tau: f64,
) -> Result<McEstimate> {
    cfg.validate()?;
    if bath.n_modes() != sys.n_modes() {
        return Err(Error::DimensionMismatch(format!(
            "bath has {} modes, system has {}",
            bath.n_modes(),
            sys.n_modes()
        )));
    }
    if !(tau.is_finite() && tau > 0.0) {
        return Err(Error::InvalidTrajectoryConfig(format!("tau must be positive, got {tau}")));
    }
    if cfg.t_burn + tau > cfg.t_total * (1.0 + 1e-12) {
        return Err(Error::InvalidTrajectoryConfig(format!(
            "t_burn + tau = {} exceeds t_total = {}",
            cfg.t_burn + tau,
            cfg.t_total
        )));
    }
    let limit = step_limit(sys, delta);
    if cfg.dt > limit {
        return Err(Error::StepTooCoarse { dt: cfg.dt, limit });
    }
    let chi = transfer_matrix(sys, delta, 0.0)?;
    let phase = C64::from_polar(1.0, response_coefficient(&chi, sys.v(), sys.k1(), sys.k2(), sys.beta1(), sys.beta2())?.phi);

    let n_burn = (cfg.t_burn / cfg.dt).ceil() as usize;
    let n_rec = (tau / cfg.dt).ceil() as usize;
    let h_burn = if n_burn > 0 { cfg.t_burn / n_burn as f64 } else { 0.0 };
    let h = tau / n_rec as f64;
    let a = dynamics_matrix(sys, delta, 0.0);
    let prop_burn = a.scale_re(h_burn).expm()?;
    let prop = a.scale_re(h).expm()?;
    let chans = channels(sys, bath);
    let k1 = sys.k1();
    let gain = (k1 / 2.0).sqrt();
    let sqrt_k1 = k1.sqrt();
    let window = cfg.window;

    let run = |index: usize| -> f64 {
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        rng.set_stream(index as u64);
        let n = sys.n_modes();
        let mut x = vec![C64::new(0.0, 0.0); n];
        let mut pre = vec![C64::new(0.0, 0.0); n];
        let mut draws = vec![C64::new(0.0, 0.0); chans.len()];
        for _ in 0..n_burn {
            draw_increments(&mut rng, &mut draws, h_burn);
            propagate(&prop_burn, &x, &mut pre);
            kick(&chans, &draws, &pre, &mut x);
        }
        let mut m = 0.0;
        for k in 0..n_rec {
            draw_increments(&mut rng, &mut draws, h);
            propagate(&prop, &x, &mut pre);
            // Trapezoid on the drift path; this step's kick lands at its end.
            let direct: C64 = chans.iter().zip(&draws).map(|(c, d)| d * c.direct).sum();
            let field = direct - I * sqrt_k1 * 0.5 * (x[0] + pre[0]) * h;
            let t_mid = (k as f64 + 0.5) * h;
            m += window.weight(t_mid, tau) * gain * 2.0 * (phase * field).re;
            kick(&chans, &draws, &pre, &mut x);
        }
        m
    };

    let samples: Vec<f64> = (0..cfg.n_traj).into_par_iter().map(run).collect();
    Ok(variance_estimate(&samples, tau))
}

fn draw_increments(rng: &mut ChaCha8Rng, draws: &mut [C64], step: f64) {
    let sd = 0.5 * step.sqrt();
    for d in draws.iter_mut() {
        let re: f64 = StandardNormal.sample(rng);
        let im: f64 = StandardNormal.sample(rng);
        *d = C64::new(re * sd, im * sd);
    }
}

fn propagate(e: &ComplexMatrix, x: &[C64], out: &mut [C64]) {
    for (i, o) in out.iter_mut().enumerate() {
        *o = e.row(i).iter().zip(x).map(|(p, q)| p * q).sum();
    }
}

fn kick(chans: &[Channel], draws: &[C64], pre: &[C64], x: &mut [C64]) {
    x.copy_from_slice(pre);
    for (ch, dw) in chans.iter().zip(draws) {
        let dw = if ch.conjugate { dw.conj() } else { *dw };
        for (xi, g) in x.iter_mut().zip(&ch.kick) {
            *xi += g * dw;
        }
    }
}

fn variance_estimate(samples: &[f64], tau: f64) -> McEstimate {
    let n = samples.len() as f64;
    let mean = samples.iter().sum::<f64>() / n;
    let m2 = samples.iter().map(|s| (s - mean).powi(2)).sum::<f64>() / n;
    let m4 = samples.iter().map(|s| (s - mean).powi(4)).sum::<f64>() / n;
    let variance = if samples.len() > 1 { m2 * n / (n - 1.0) } else { 0.0 };
    McEstimate {
        variance,
        stderr: ((m4 - m2 * m2).max(0.0) / n).sqrt(),
        tau,
        n_traj: samples.len(),
    }
}

/// Means, finite-difference `λ`, photon number and, if `tau` is given, the
/// Monte Carlo noise.
pub fn run_oracle(
    sys: &SensorSystem,
    delta: f64,
    bath: &BathCoupling,
    cfg: &TrajectoryConfig,
    tau: Option<f64>,
) -> Result<OracleReport> {
    let means_cfg = TrajectoryConfig::for_means(sys, delta)?;
    let means_ss = steady_state_means(sys, delta, 0.0, &means_cfg)?;
    let bout_mean = output_mean(sys, &means_ss);
    let lambda_fd = lambda_fd(sys, delta, &means_cfg, DEFAULT_EPS_STEP)?;
    let n_tot_td = means_ss.iter().map(|z| z.norm_sqr()).sum();
    let noise_mc = match tau {
        Some(t) => Some(mc_noise(sys, delta, bath, cfg, t)?),
        None => None,
    };
    Ok(OracleReport {
        means_ss,
        bout_mean,
        lambda_fd,
        noise_mc,
        n_tot_td,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bathmod::{antihermitian_part, spectral_decomposition};
    use crate::linalg::c;

    fn t0() -> SensorSystem {
        let h0 = ComplexMatrix::from_diag(&[c(0.0, 0.0), c(0.0, -0.5)]);
        SensorSystem::new(h0, ComplexMatrix::half_sigma_x(), 1.0, 0.0, 1.0, 0.0).unwrap()
    }

    fn t1() -> SensorSystem {
        SensorSystem::new(ComplexMatrix::zeros(2, 2), ComplexMatrix::half_sigma_x(), 1.0, 1.0, 1.0, 1.0).unwrap()
    }

    #[test]
    fn steady_means_match_closed_form() {
        let cfg = TrajectoryConfig::for_means(&t0(), 0.0).unwrap();
        let x = steady_state_means(&t0(), 0.0, 0.0, &cfg).unwrap();
        assert!((x[0] - c(0.0, -2.0)).norm() < 1e-10 && x[1].norm() < 1e-12, "{x:?}");

        let cfg = TrajectoryConfig::for_means(&t1(), 0.0).unwrap();
        let x = steady_state_means(&t1(), 0.0, 0.0, &cfg).unwrap();
        assert!((x[0] - c(0.0, -2.0)).norm() < 1e-10 && (x[1] - c(0.0, -2.0)).norm() < 1e-10);
        assert!((photon_number_td(&t1(), 0.0, &cfg).unwrap() - 8.0).abs() < 1e-8);
    }

    #[test]
    fn finite_difference_response() {
        let cfg = TrajectoryConfig::for_means(&t0(), 0.0).unwrap();
        assert!(lambda_fd(&t0(), 0.0, &cfg, DEFAULT_EPS_STEP).unwrap().norm() < 1e-10);
        let cfg = TrajectoryConfig::for_means(&t1(), 0.0).unwrap();
        let l = lambda_fd(&t1(), 0.0, &cfg, DEFAULT_EPS_STEP).unwrap();
        assert!((l - c(0.0, 2.0)).norm() / 2.0 < 1e-6, "{l}");
    }

    #[test]
    fn growing_mode_is_rejected() {
        let cfg = TrajectoryConfig::for_means(&t0(), 0.0).unwrap();
        let h0 = ComplexMatrix::from_diag(&[c(0.0, 1.0), c(0.0, -0.5)]);
        let grow = SensorSystem::new(h0, ComplexMatrix::half_sigma_x(), 1.0, 0.0, 1.0, 0.0).unwrap();
        assert!(matches!(
            steady_state_means(&grow, 0.0, 0.0, &cfg),
            Err(Error::NonDecayingTransient { .. })
        ));
    }

    #[test]
    fn coarse_step_is_rejected() {
        let bath = spectral_decomposition(&antihermitian_part(t0().h0()).unwrap()).unwrap();
        let mut cfg = TrajectoryConfig::for_system(&t0(), 0.0, 10.0).unwrap();
        cfg.dt *= 2.0;
        assert!(matches!(
            mc_noise(&t0(), 0.0, &bath, &cfg, 10.0),
            Err(Error::StepTooCoarse { .. })
        ));
    }

    #[test]
    fn seeded_runs_are_reproducible() {
        let bath = spectral_decomposition(&antihermitian_part(t0().h0()).unwrap()).unwrap();
        let mut cfg = TrajectoryConfig::for_system(&t0(), 0.0, 10.0).unwrap();
        cfg.n_traj = 64;
        cfg.seed = 7;
        let a = run_oracle(&t0(), 0.0, &bath, &cfg, Some(10.0)).unwrap();
        let b = run_oracle(&t0(), 0.0, &bath, &cfg, Some(10.0)).unwrap();
        assert_eq!(a, b);
        cfg.seed = 8;
        let c = run_oracle(&t0(), 0.0, &bath, &cfg, Some(10.0)).unwrap();
        assert_ne!(a.noise_mc, c.noise_mc);
    }

    #[test]
    fn shot_noise_calibration() {
        // Only the k₁ port: the record is pure vacuum, variance k₁τ/2.
        let empty = BathCoupling::empty(2);
        let tau = 20.0;
        let mut cfg = TrajectoryConfig::for_system(&t0(), 0.0, tau).unwrap();
        cfg.n_traj = 1000;
        let est = mc_noise(&t0(), 0.0, &empty, &cfg, tau).unwrap();
        assert!((est.variance - 0.5 * tau).abs() < 3.0 * est.stderr, "{est:?}");
    }

    #[test]
    fn halving_the_step_agrees() {
        let bath = spectral_decomposition(&antihermitian_part(t0().h0()).unwrap()).unwrap();
        let tau = 20.0;
        let mut cfg = TrajectoryConfig::for_system(&t0(), 0.0, tau).unwrap();
        cfg.n_traj = 1000;
        let coarse = mc_noise(&t0(), 0.0, &bath, &cfg, tau).unwrap();
        cfg.dt *= 0.5;
        cfg.seed = 1;
        let fine = mc_noise(&t0(), 0.0, &bath, &cfg, tau).unwrap();
        let sigma = coarse.stderr.hypot(fine.stderr);
        assert!((coarse.variance - fine.variance).abs() < 3.0 * sigma, "{coarse:?} {fine:?}");
    }

    #[test]
    fn hann_window_has_unit_mean_square() {
        let n = 100_000;
        let ms: f64 = (0..n)
            .map(|k| Window::Hann.weight((k as f64 + 0.5) / n as f64, 1.0).powi(2))
            .sum::<f64>()
            / n as f64;
        assert!((ms - 1.0).abs() < 1e-9);
    }
}
