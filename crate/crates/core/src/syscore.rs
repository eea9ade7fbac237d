//! Sensor system model: mean-field drift, stability, and the zero-frequency
//! transfer matrix `χ = i k₁ (ΔI − H̃[ε] + iK₁/2 + iK₂/2)⁻¹`.
//!
//! All rates are stored in units of `k₁`, so `k1()` is always 1 once a
//! system has been constructed. Detunings and `ε` passed to the functions in
//! this module are in those same units.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::linalg::{ComplexMatrix, C64, I};

/// Eigenvalues must sit strictly left of `-STABILITY_MARGIN`.
pub const STABILITY_MARGIN: f64 = 1e-10;

/// Structural tag set by the model builders.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum SystemKind {
    Generic,
    Reciprocal,
    NonReciprocal,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SensorSystem {
    h0: ComplexMatrix,
    v: ComplexMatrix,
    k2: f64,
    beta1: f64,
    beta2: f64,
    /// Physical value of k₁ that everything was divided by.
    k1_unit: f64,
    /// Real frequency subtracted from the diagonal of `h0` (units of k₁).
    reference_shift: f64,
    kind: SystemKind,
}

impl SensorSystem {
    /// Validates and normalizes a system given in physical units.
    ///
    /// `h0` and `k2` are divided by `k1`; drive amplitudes by `√k1`. The
    /// perturbation coupling `v` is dimensionless and is left as is. If
    /// `Re h0₁₁ ≠ 0` the real part is removed from the whole diagonal and
    /// recorded as [`SensorSystem::reference_shift`].
    pub fn new(
        h0: ComplexMatrix,
        v: ComplexMatrix,
        k1: f64,
        k2: f64,
        beta1: f64,
        beta2: f64,
    ) -> Result<Self> {
        let bad = |msg: String| Err(Error::InvalidSystem(msg));
        if !h0.is_square() || h0.rows() == 0 {
            return bad(format!("h0 must be square and non-empty, got {}x{}", h0.rows(), h0.cols()));
        }
        if v.rows() != h0.rows() || v.cols() != h0.cols() {
            return bad(format!(
                "v is {}x{} but h0 is {}x{}",
                v.rows(),
                v.cols(),
                h0.rows(),
                h0.cols()
            ));
        }
        if !h0.is_finite() || !v.is_finite() {
            return bad("h0 and v must be finite".into());
        }
        if !(k1.is_finite() && k1 > 0.0) {
            return bad(format!("k1 must be finite and > 0, got {k1}"));
        }
        for (name, x) in [("k2", k2), ("beta1", beta1), ("beta2", beta2)] {
            if !(x.is_finite() && x >= 0.0) {
                return bad(format!("{name} must be finite and >= 0, got {x}"));
            }
        }
        let n = h0.rows();
        if n == 1 && (k2 > 0.0 || beta2 > 0.0) {
            return bad("a single-mode system cannot have a second port (k2, beta2)".into());
        }

        let mut h0 = h0.scale_re(1.0 / k1);
        let shift = h0[(0, 0)].re;
        if shift != 0.0 {
            for i in 0..n {
                h0[(i, i)] -= C64::new(shift, 0.0);
            }
        }
        let sqrt_k1 = k1.sqrt();
        Ok(Self {
            h0,
            v,
            k2: k2 / k1,
            beta1: beta1 / sqrt_k1,
            beta2: beta2 / sqrt_k1,
            k1_unit: k1,
            reference_shift: shift,
            kind: SystemKind::Generic,
        })
    }

    pub(crate) fn with_kind(mut self, kind: SystemKind) -> Self {
        self.kind = kind;
        self
    }

    /// Same Hamiltonian with a different second port and drive amplitudes
    /// (given in units of the normalized system).
    pub fn with_drives(&self, k2: f64, beta1: f64, beta2: f64) -> Result<Self> {
        let mut out = Self::new(self.h0.clone(), self.v.clone(), 1.0, k2, beta1, beta2)?;
        out.k1_unit = self.k1_unit;
        out.reference_shift = self.reference_shift;
        out.kind = self.kind;
        Ok(out)
    }

    /// Same system with a different perturbation coupling.
    pub fn with_coupling(&self, v: ComplexMatrix) -> Result<Self> {
        let mut out = self.clone();
        if v.rows() != self.n_modes() || v.cols() != self.n_modes() || !v.is_finite() {
            return Err(Error::InvalidSystem("perturbation coupling has the wrong shape".into()));
        }
        out.v = v;
        Ok(out)
    }

    pub fn n_modes(&self) -> usize {
        self.h0.rows()
    }
    pub fn h0(&self) -> &ComplexMatrix {
        &self.h0
    }
    pub fn v(&self) -> &ComplexMatrix {
        &self.v
    }
    pub fn k1(&self) -> f64 {
        1.0
    }
    pub fn k2(&self) -> f64 {
        self.k2
    }
    pub fn beta1(&self) -> f64 {
        self.beta1
    }
    pub fn beta2(&self) -> f64 {
        self.beta2
    }
    pub fn k1_unit(&self) -> f64 {
        self.k1_unit
    }
    pub fn reference_shift(&self) -> f64 {
        self.reference_shift
    }
    pub fn kind(&self) -> SystemKind {
        self.kind
    }
    pub fn drive_ratio(&self) -> DriveRatio {
        DriveRatio {
            p: if self.beta1 > 0.0 { self.beta2 / self.beta1 } else { f64::INFINITY },
            eta: self.k2,
        }
    }

    /// `H̃[ε] = H̃[0] + ε V`.
    pub fn hamiltonian(&self, eps: f64) -> ComplexMatrix {
        if eps == 0.0 {
            return self.h0.clone();
        }
        &self.h0 + &self.v.scale_re(eps)
    }

    /// Port damping `K₁/2 + K₂/2` on the diagonal.
    fn half_port_damping(&self, i: usize) -> f64 {
        match i {
            0 => 0.5,
            1 => 0.5 * self.k2,
            _ => 0.0,
        }
    }

    /// Drive vector `b` of the mean equations, `(−i√k₁β₁, −i√k₂β₂, 0, …)`.
    pub fn drive_vector(&self) -> Vec<C64> {
        let mut b = vec![C64::new(0.0, 0.0); self.n_modes()];
        b[0] = -I * self.beta1;
        if self.n_modes() > 1 {
            b[1] = -I * self.k2.sqrt() * self.beta2;
        }
        b
    }
}

/// Ratio parameters of the two-drive problem.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct DriveRatio {
    /// `β₂ / β₁`.
    pub p: f64,
    /// `k₂ / k₁`.
    pub eta: f64,
}

impl DriveRatio {
    pub fn new(p: f64, eta: f64) -> Result<Self> {
        if !(p.is_finite() && p >= 0.0 && eta.is_finite() && eta >= 0.0) {
            return Err(Error::InvalidArgument(format!(
                "drive ratio needs finite p >= 0 and eta >= 0, got p={p}, eta={eta}"
            )));
        }
        Ok(Self { p, eta })
    }

    pub fn single_drive() -> Self {
        Self { p: 0.0, eta: 0.0 }
    }
}

/// Drift matrix `A = iΔI − i(H̃[ε] − iK₁/2 − iK₂/2)` of the mean dynamics.
pub fn dynamics_matrix(sys: &SensorSystem, delta: f64, eps: f64) -> ComplexMatrix {
    let mut a = sys.hamiltonian(eps).scale(-I);
    for i in 0..sys.n_modes() {
        a[(i, i)] -= C64::new(sys.half_port_damping(i), 0.0);
        a[(i, i)] += I * delta;
    }
    a
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct StabilityReport {
    pub stable: bool,
    /// Sorted by real part, largest first.
    pub eigenvalues: Vec<C64>,
    pub max_real: f64,
}

pub fn is_stable(sys: &SensorSystem, delta: f64, eps: f64) -> Result<StabilityReport> {
    is_stable_with_margin(sys, delta, eps, STABILITY_MARGIN)
}

pub fn is_stable_with_margin(
    sys: &SensorSystem,
    delta: f64,
    eps: f64,
    margin: f64,
) -> Result<StabilityReport> {
    let mut eigenvalues = dynamics_matrix(sys, delta, eps).eigenvalues()?;
    eigenvalues.sort_by(|a, b| b.re.total_cmp(&a.re));
    let max_real = eigenvalues.first().map_or(f64::NEG_INFINITY, |z| z.re);
    Ok(StabilityReport {
        stable: max_real < -margin,
        eigenvalues,
        max_real,
    })
}

/// Zero-frequency transfer matrix `χ̃^Δ(ε)`. Refuses unstable systems.
pub fn transfer_matrix(sys: &SensorSystem, delta: f64, eps: f64) -> Result<ComplexMatrix> {
    let report = is_stable(sys, delta, eps)?;
    if !report.stable {
        return Err(Error::Unstable {
            max_real: report.max_real,
            margin: STABILITY_MARGIN,
        });
    }
    transfer_matrix_unchecked(sys, delta, eps)
}

/// Transfer matrix without the stability gate; still fails on a singular resolvent.
pub fn transfer_matrix_unchecked(sys: &SensorSystem, delta: f64, eps: f64) -> Result<ComplexMatrix> {
    Ok(resolvent_operand(sys, delta, eps).inverse()?.scale(I * sys.k1()))
}

/// `ΔI − H̃[ε] + iK₁/2 + iK₂/2`, the matrix inverted by [`transfer_matrix`].
pub fn resolvent_operand(sys: &SensorSystem, delta: f64, eps: f64) -> ComplexMatrix {
    let mut m = sys.hamiltonian(eps).scale_re(-1.0);
    for i in 0..sys.n_modes() {
        m[(i, i)] += C64::new(delta, sys.half_port_damping(i));
    }
    m
}
