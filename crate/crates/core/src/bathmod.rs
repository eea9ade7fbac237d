//! Gain/loss bath couplings `(Y, Z)` realizing the anti-Hermitian part of
//! `H̃[0]`, and the decomposition that attains the minimum homodyne noise.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::linalg::{ComplexMatrix, C64, I};
use crate::syscore::SensorSystem;

/// Eigenvalues of a Gram matrix below this (times its scale) yield no column.
pub const COLUMN_DROP_THRESHOLD: f64 = 1e-12;
pub const DEFAULT_ALPHA_MAX: f64 = 1e6;
pub const DEFAULT_MIN_NOISE_TOL: f64 = 1e-6;
/// Residual bound for [`validate_decomposition`].
pub const VALIDITY_TOL: f64 = 1e-9;

/// Mode-bath couplings. `y` is `N × N_Y` (gain), `z` is `N × N_Z` (loss).
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct BathCoupling {
    pub y: ComplexMatrix,
    pub z: ComplexMatrix,
}

impl BathCoupling {
    pub fn new(y: ComplexMatrix, z: ComplexMatrix) -> Result<Self> {
        if y.rows() != z.rows() {
            return Err(Error::DimensionMismatch(format!(
                "Y has {} rows but Z has {}",
                y.rows(),
                z.rows()
            )));
        }
        Ok(Self { y, z })
    }

    pub fn empty(n: usize) -> Self {
        Self {
            y: ComplexMatrix::zeros(n, 0),
            z: ComplexMatrix::zeros(n, 0),
        }
    }

    pub fn n_modes(&self) -> usize {
        self.y.rows()
    }
    pub fn n_gain(&self) -> usize {
        self.y.cols()
    }
    pub fn n_loss(&self) -> usize {
        self.z.cols()
    }

    pub fn gain_gram(&self) -> ComplexMatrix {
        self.y.gram()
    }
    pub fn loss_gram(&self) -> ComplexMatrix {
        self.z.gram()
    }

    /// `YY† − ZZ†`.
    pub fn antihermitian(&self) -> ComplexMatrix {
        &self.gain_gram() - &self.loss_gram()
    }
}

/// `(χYY†χ†)₁₁`, the gain noise reaching the mode-1 record.
pub fn gain_projection(bath: &BathCoupling, chi: &ComplexMatrix) -> Result<f64> {
    first_row_weight(&bath.y, chi)
}

/// `(χZZ†χ†)₁₁`.
pub fn loss_projection(bath: &BathCoupling, chi: &ComplexMatrix) -> Result<f64> {
    first_row_weight(&bath.z, chi)
}

fn first_row_weight(cols: &ComplexMatrix, chi: &ComplexMatrix) -> Result<f64> {
    if chi.cols() != cols.rows() || chi.rows() == 0 {
        return Err(Error::DimensionMismatch(format!(
            "chi is {}x{} but the bath has {} modes",
            chi.rows(),
            chi.cols(),
            cols.rows()
        )));
    }
    let row = chi.row(0);
    Ok((0..cols.cols())
        .map(|j| {
            row.iter()
                .enumerate()
                .map(|(k, &x)| x * cols[(k, j)])
                .sum::<C64>()
                .norm_sqr()
        })
        .sum())
}

/// Heaviside-weighted excess `Ξ·Θ(Ξ)`; zero at `Ξ = 0` by either convention.
pub fn positive_part(xi: f64) -> f64 {
    if xi > 0.0 {
        xi
    } else {
        0.0
    }
}

/// `Ξ = −2 Re χ₁₁ + |χ₁₁|² + (k₂/k₁)|χ₁₂|²`.
pub fn xi(chi: &ComplexMatrix, k1: f64, k2: f64) -> f64 {
    let c11 = chi[(0, 0)];
    let c12 = if chi.cols() > 1 { chi[(0, 1)] } else { C64::new(0.0, 0.0) };
    -2.0 * c11.re + c11.norm_sqr() + (k2 / k1) * c12.norm_sqr()
}

/// Noise accounting for one concrete decomposition, in units of `τ`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct NoiseBudget {
    pub xi: f64,
    /// `k₁/2`.
    pub shot: f64,
    /// `2ΞΘ(Ξ)`, as a fraction of `shot`.
    pub excess: f64,
    pub achieved: f64,
}

impl NoiseBudget {
    pub fn new(bath: &BathCoupling, chi: &ComplexMatrix, k1: f64, k2: f64) -> Result<Self> {
        let xi = xi(chi, k1, k2);
        Ok(Self {
            xi,
            shot: 0.5 * k1,
            excess: 2.0 * positive_part(xi),
            achieved: achieved_noise(bath, chi, k1)?,
        })
    }

    pub fn minimum(&self) -> f64 {
        self.shot * (1.0 + self.excess)
    }
}

/// `M = (H̃ − H̃†)/(2i)`.
pub fn antihermitian_part(h0: &ComplexMatrix) -> Result<ComplexMatrix> {
    if !h0.is_square() {
        return Err(Error::DimensionMismatch(format!(
            "anti-Hermitian part needs a square matrix, got {}x{}",
            h0.rows(),
            h0.cols()
        )));
    }
    let mut m = h0.try_sub(&h0.adjoint())?.scale(-0.5 * I);
    // Exact Hermiticity: the diagonal of (H − H†)/2i is real.
    for i in 0..m.rows() {
        m[(i, i)].im = 0.0;
        for j in 0..i {
            m[(i, j)] = m[(j, i)].conj();
        }
    }
    Ok(m)
}

/// Factor a PSD Hermitian `G` as `F F†` with one column per significant
/// eigenvalue. Negative eigenvalues beyond the drop threshold are rejected.
pub fn gram_factor(g: &ComplexMatrix) -> Result<ComplexMatrix> {
    let (vals, vecs) = g.hermitian_eigen()?;
    let thr = column_threshold(g);
    let mut cols = Vec::new();
    for (k, &lam) in vals.iter().enumerate() {
        if lam < -thr {
            return Err(Error::InvalidArgument(format!(
                "Gram factor of a matrix with eigenvalue {lam:e}"
            )));
        }
        if lam > thr {
            cols.push(vecs.column(k).iter().map(|x| x * lam.sqrt()).collect());
        }
    }
    Ok(ComplexMatrix::from_columns(g.rows(), &cols))
}

fn column_threshold(g: &ComplexMatrix) -> f64 {
    COLUMN_DROP_THRESHOLD * g.max_abs().max(1.0)
}

/// Split `M` along its eigenvectors: positive eigenvalues become gain
/// columns, negative ones loss columns.
pub fn spectral_decomposition(m: &ComplexMatrix) -> Result<BathCoupling> {
    let (vals, vecs) = m.hermitian_eigen()?;
    let thr = column_threshold(m);
    let n = m.rows();
    let mut gain = Vec::new();
    let mut loss = Vec::new();
    for (k, &lam) in vals.iter().enumerate() {
        let col = vecs.column(k);
        if lam > thr {
            gain.push(col.iter().map(|x| x * lam.sqrt()).collect());
        } else if lam < -thr {
            loss.push(col.iter().map(|x| x * (-lam).sqrt()).collect());
        }
    }
    Ok(BathCoupling {
        y: ComplexMatrix::from_columns(n, &gain),
        z: ComplexMatrix::from_columns(n, &loss),
    })
}

/// Decomposition of `M` whose mode-1 noise equals `(k₁/2)(1 + 2ΞΘ(Ξ))`.
///
/// With `v = χ†e₁` and `s = v†Mv = (k₁/2)Ξ`: for `s ≥ 0` the loss Gram is
/// `αΠ` with `Π` the projector off `v`, so loss noise never reaches the
/// record; for `s < 0` the gain Gram is `αΠ` instead. `α` is the smallest
/// value keeping the other Gram PSD.
pub fn min_noise_decomposition(m: &ComplexMatrix, chi: &ComplexMatrix, tol: f64) -> Result<BathCoupling> {
    min_noise_decomposition_with(m, chi, tol, DEFAULT_ALPHA_MAX)
}

pub fn min_noise_decomposition_with(
    m: &ComplexMatrix,
    chi: &ComplexMatrix,
    tol: f64,
    alpha_max: f64,
) -> Result<BathCoupling> {
    let n = m.rows();
    if !m.is_square() || chi.rows() != n || chi.cols() != n {
        return Err(Error::DimensionMismatch(format!(
            "M is {}x{}, chi is {}x{}",
            m.rows(),
            m.cols(),
            chi.rows(),
            chi.cols()
        )));
    }
    if !m.is_hermitian(1e-10 * (1.0 + m.max_abs())) {
        return Err(Error::NotHermitian(m.hermitian_deviation()));
    }
    let v: Vec<C64> = (0..n).map(|k| chi[(0, k)].conj()).collect();
    let vnorm2: f64 = v.iter().map(|x| x.norm_sqr()).sum();
    if vnorm2 == 0.0 {
        return Err(Error::InvalidArgument("first row of chi vanishes".into()));
    }
    let s = quad_form(m, &v).re;

    let mut proj = ComplexMatrix::identity(n);
    for i in 0..n {
        for j in 0..n {
            proj[(i, j)] -= v[i] * v[j].conj() / vnorm2;
        }
    }
    // Target PSD matrix as a function of α: M + αΠ, or αΠ − M in the mirror branch.
    let base = if s >= 0.0 { m.clone() } else { m.scale_re(-1.0) };
    let psd_tol = 1e-14 * (1.0 + m.max_abs());
    let feasible = |alpha: f64| -> Result<bool> {
        let (vals, _) = base.try_add(&proj.scale_re(alpha))?.hermitian_eigen()?;
        Ok(vals.first().is_none_or(|&l| l >= -psd_tol))
    };

    let alpha = if feasible(0.0)? {
        0.0
    } else {
        let mut hi = 1.0;
        while !feasible(hi)? {
            hi *= 2.0;
            if hi > alpha_max {
                return Err(Error::ConstructionInfeasible { alpha_max });
            }
        }
        let mut lo = if hi > 1.0 { hi / 2.0 } else { 0.0 };
        while hi - lo > 4.0 * f64::EPSILON * hi {
            let mid = 0.5 * (lo + hi);
            if mid <= lo || mid >= hi {
                break;
            }
            if feasible(mid)? {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        hi
    };

    let added = proj.scale_re(alpha);
    let shifted = clamp_psd(&base.try_add(&added)?)?;
    let bath = if s >= 0.0 {
        BathCoupling {
            y: gram_factor(&shifted)?,
            z: gram_factor(&added)?,
        }
    } else {
        BathCoupling {
            y: gram_factor(&added)?,
            z: gram_factor(&shifted)?,
        }
    };

    // The projected channel must not reach the record.
    let blocked = if s >= 0.0 {
        loss_projection(&bath, chi)?
    } else {
        gain_projection(&bath, chi)?
    };
    let open = if s >= 0.0 {
        gain_projection(&bath, chi)?
    } else {
        loss_projection(&bath, chi)?
    };
    if blocked > tol * (1.0 + open) {
        return Err(Error::ConstructionInfeasible { alpha_max });
    }
    Ok(bath)
}

/// Zeroes the eigenvalues a bisection leaves a hair below zero.
fn clamp_psd(g: &ComplexMatrix) -> Result<ComplexMatrix> {
    let (vals, vecs) = g.hermitian_eigen()?;
    let n = g.rows();
    let mut out = ComplexMatrix::zeros(n, n);
    for (k, &lam) in vals.iter().enumerate() {
        let lam = lam.max(0.0);
        if lam == 0.0 {
            continue;
        }
        for i in 0..n {
            for j in 0..n {
                out[(i, j)] += vecs[(i, k)] * vecs[(j, k)].conj() * lam;
            }
        }
    }
    Ok(out)
}

fn quad_form(m: &ComplexMatrix, v: &[C64]) -> C64 {
    let mv = m.mul_vec(v);
    v.iter().zip(&mv).map(|(a, b)| a.conj() * b).sum()
}

/// `N/τ = (k₁/2)(1 + (4/k₁)(χYY†χ†)₁₁)`.
pub fn achieved_noise(bath: &BathCoupling, chi: &ComplexMatrix, k1: f64) -> Result<f64> {
    Ok(0.5 * k1 * (1.0 + 4.0 / k1 * gain_projection(bath, chi)?))
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct ValidationReport {
    /// `‖YY† − ZZ† − M‖_max / (1 + ‖M‖_max)`.
    pub difference_residual: f64,
    /// `|P_Y − P_Z − (k₁/2)Ξ| / (1 + P_Y + P_Z)`.
    pub identity_residual: f64,
    pub valid: bool,
}

pub fn validate_decomposition(
    bath: &BathCoupling,
    m: &ComplexMatrix,
    chi: &ComplexMatrix,
    k1: f64,
    k2: f64,
) -> Result<ValidationReport> {
    let difference_residual = bath.antihermitian().max_abs_diff(m)? / (1.0 + m.max_abs());
    let py = gain_projection(bath, chi)?;
    let pz = loss_projection(bath, chi)?;
    let identity_residual = (py - pz - 0.5 * k1 * xi(chi, k1, k2)).abs() / (1.0 + py + pz);
    Ok(ValidationReport {
        difference_residual,
        identity_residual,
        valid: difference_residual < VALIDITY_TOL && identity_residual < VALIDITY_TOL,
    })
}

/// Convenience: `M` of a system's unperturbed Hamiltonian.
pub fn system_antihermitian(sys: &SensorSystem) -> ComplexMatrix {
    antihermitian_part(sys.h0()).expect("system Hamiltonians are square")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::c;
    use crate::models::{build_reciprocal, ReciprocalParams};
    use crate::syscore::transfer_matrix;

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol
    }

    #[test]
    fn antihermitian_examples() {
        let m = antihermitian_part(&ComplexMatrix::from_diag(&[c(0.0, 0.0), c(0.0, -0.5)])).unwrap();
        assert!(m.max_abs_diff(&ComplexMatrix::from_diag(&[c(0.0, 0.0), c(-0.5, 0.0)])).unwrap() < 1e-15);

        let h = ComplexMatrix::from_rows(&[[c(0.0, 0.495), c(0.16, 0.0)], [c(0.16, 0.0), c(0.0, 0.0055)]]);
        let m = antihermitian_part(&h).unwrap();
        let want = ComplexMatrix::from_diag(&[c(0.495, 0.0), c(0.0055, 0.0)]);
        assert!(m.max_abs_diff(&want).unwrap() < 1e-15);

        // One-way coupling J: M₁₂ = J/(2i), M₂₁ = conj.
        let h = ComplexMatrix::from_rows(&[[c(0.0, -0.5), c(1.5, 0.0)], [c(0.0, 0.0), c(0.0, -0.25)]]);
        let m = antihermitian_part(&h).unwrap();
        let want = ComplexMatrix::from_rows(&[[c(-0.5, 0.0), c(0.0, -0.75)], [c(0.0, 0.75), c(-0.25, 0.0)]]);
        assert!(m.max_abs_diff(&want).unwrap() < 1e-15);

        assert!(antihermitian_part(&ComplexMatrix::zeros(2, 3)).is_err());
    }

    #[test]
    fn spectral_examples() {
        let m = ComplexMatrix::from_diag(&[c(0.495, 0.0), c(0.0055, 0.0)]);
        let b = spectral_decomposition(&m).unwrap();
        assert_eq!((b.n_gain(), b.n_loss()), (2, 0));
        assert!(b.gain_gram().max_abs_diff(&m).unwrap() < 1e-15);

        let b = spectral_decomposition(&ComplexMatrix::zeros(3, 3)).unwrap();
        assert_eq!((b.n_gain(), b.n_loss()), (0, 0));

        let b = spectral_decomposition(&ComplexMatrix::from_diag(&[c(1.0, 0.0), c(-1.0, 0.0)])).unwrap();
        assert_eq!((b.n_gain(), b.n_loss()), (1, 1));
        assert!((b.y[(0, 0)].norm() - 1.0).abs() < 1e-15 && b.y[(1, 0)].norm() < 1e-15);
        assert!((b.z[(1, 0)].norm() - 1.0).abs() < 1e-15 && b.z[(0, 0)].norm() < 1e-15);
    }

    #[test]
    fn spectral_rejects_non_hermitian() {
        let m = ComplexMatrix::from_rows(&[[c(0.0, 0.0), c(1.0, 0.0)], [c(0.0, 0.0), c(0.0, 0.0)]]);
        assert!(matches!(spectral_decomposition(&m), Err(Error::NotHermitian(_))));
    }

    #[test]
    fn min_noise_t0_is_loss_only() {
        let m = antihermitian_part(&ComplexMatrix::from_diag(&[c(0.0, 0.0), c(0.0, -0.5)])).unwrap();
        let chi = ComplexMatrix::identity(2).scale_re(2.0);
        let b = min_noise_decomposition(&m, &chi, DEFAULT_MIN_NOISE_TOL).unwrap();
        assert_eq!(b.n_gain(), 0);
        assert_eq!(b.n_loss(), 1);
        assert!(close(b.z[(1, 0)].norm(), 0.5f64.sqrt(), 1e-12));
        assert!(close(achieved_noise(&b, &chi, 1.0).unwrap(), 0.5, 1e-15));
    }

    #[test]
    fn min_noise_of_zero_matrix_is_empty() {
        let chi = ComplexMatrix::from_rows(&[[c(1.0, 0.3), c(0.0, -2.0)], [c(0.5, 0.0), c(1.0, 1.0)]]);
        let b = min_noise_decomposition(&ComplexMatrix::zeros(2, 2), &chi, DEFAULT_MIN_NOISE_TOL).unwrap();
        assert_eq!((b.n_gain(), b.n_loss()), (0, 0));
        assert_eq!(achieved_noise(&b, &chi, 1.0).unwrap(), 0.5);
    }

    #[test]
    fn min_noise_fig2_attains_bound() {
        let sys = build_reciprocal(
            ReciprocalParams {
                gamma1: -0.99,
                gamma2: -0.011,
                j: 0.16,
            },
            1.0,
            0.01,
            1.0,
            30.0,
        )
        .unwrap();
        let chi = transfer_matrix(&sys, 0.0, 0.0).unwrap();
        let m = system_antihermitian(&sys);
        let b = min_noise_decomposition(&m, &chi, DEFAULT_MIN_NOISE_TOL).unwrap();
        let got = achieved_noise(&b, &chi, 1.0).unwrap();
        assert!(((got / 0.5) - 1.8603).abs() < 1e-4, "{got}");
        let budget = NoiseBudget::new(&b, &chi, 1.0, 0.01).unwrap();
        assert!((budget.achieved / budget.minimum() - 1.0).abs() < 1e-6);
        assert!(validate_decomposition(&b, &m, &chi, 1.0, 0.01).unwrap().valid);
    }

    #[test]
    fn achieved_noise_examples() {
        let chi = ComplexMatrix::identity(2).scale_re(2.0);
        assert_eq!(achieved_noise(&BathCoupling::empty(2), &chi, 1.0).unwrap(), 0.5);
        let b = BathCoupling::new(ComplexMatrix::identity(2), ComplexMatrix::zeros(2, 0)).unwrap();
        assert!(close(achieved_noise(&b, &chi, 1.0).unwrap(), 8.5, 1e-14));
        // A gain column orthogonal to the first row of chi is invisible.
        let b = BathCoupling::new(ComplexMatrix::from_real_rows(&[[0.0], [3.0]]), ComplexMatrix::zeros(2, 0)).unwrap();
        assert_eq!(achieved_noise(&b, &chi, 1.0).unwrap(), 0.5);
        let bad = BathCoupling::empty(3);
        assert!(achieved_noise(&bad, &chi, 1.0).is_err());
    }

    #[test]
    fn perturbed_decomposition_is_invalid() {
        let sys = build_reciprocal(
            ReciprocalParams {
                gamma1: 0.4,
                gamma2: -0.3,
                j: 0.2,
            },
            1.0,
            0.5,
            1.0,
            0.0,
        )
        .unwrap();
        let chi = transfer_matrix(&sys, 0.1, 0.0).unwrap();
        let m = system_antihermitian(&sys);
        let mut b = spectral_decomposition(&m).unwrap();
        assert_eq!((b.n_gain(), b.n_loss()), (1, 1));
        assert!(validate_decomposition(&b, &m, &chi, 1.0, 0.5).unwrap().valid);
        b.y[(0, 0)] += c(1e-3, 0.0);
        let r = validate_decomposition(&b, &m, &chi, 1.0, 0.5).unwrap();
        assert!(!r.valid);
        assert!(r.difference_residual > 1e-4 && r.difference_residual < 1e-2);
    }

    #[test]
    fn gram_factor_reconstructs() {
        let g = ComplexMatrix::from_rows(&[[c(2.0, 0.0), c(0.0, 1.0)], [c(0.0, -1.0), c(2.0, 0.0)]]);
        let f = gram_factor(&g).unwrap();
        assert!(f.gram().max_abs_diff(&g).unwrap() < 1e-14);
        let neg = ComplexMatrix::from_diag(&[c(1.0, 0.0), c(-0.5, 0.0)]);
        assert!(gram_factor(&neg).is_err());
    }
}
