//! Random-system generators shared by the integration suites.
#![allow(dead_code)]

use nhsense::bathmod::{spectral_decomposition, system_antihermitian, BathCoupling};
use nhsense::linalg::{c, ComplexMatrix, C64};
use nhsense::syscore::{is_stable, SensorSystem};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn complex_matrix(rng: &mut impl Rng, rows: usize, cols: usize, scale: f64) -> ComplexMatrix {
    let data = (0..rows * cols)
        .map(|_| c(rng.random_range(-scale..scale), rng.random_range(-scale..scale)))
        .collect();
    ComplexMatrix::from_row_major(rows, cols, data).unwrap()
}

pub fn hermitian(rng: &mut impl Rng, n: usize, scale: f64) -> ComplexMatrix {
    let a = complex_matrix(rng, n, n, scale);
    (&a + &a.adjoint()).scale_re(0.5)
}

/// A stable system with `2 ≤ N ≤ n_max` modes and a detuning at which every
/// eigenvalue of the drift lies left of `−0.05`.
pub fn stable_system(rng: &mut impl Rng, n_max: usize) -> (SensorSystem, f64) {
    loop {
        let n = rng.random_range(2..=n_max);
        let h0 = complex_matrix(rng, n, n, 1.0);
        let v = hermitian(rng, n, 1.0);
        let k2 = rng.random_range(0.05..1.0);
        let b1 = rng.random_range(0.5..2.0);
        let b2 = rng.random_range(0.0..2.0);
        let sys = SensorSystem::new(h0, v, 1.0, k2, b1, b2).unwrap();
        let delta = rng.random_range(-1.0..1.0);
        if is_stable(&sys, delta, 0.0).unwrap().max_real < -0.05 {
            return (sys, delta);
        }
    }
}

/// Spectral decomposition of the system's `M` padded with a random column
/// block `R` on both sides, so `YY† − ZZ†` is unchanged.
pub fn random_decomposition(rng: &mut impl Rng, sys: &SensorSystem) -> BathCoupling {
    let base = spectral_decomposition(&system_antihermitian(sys)).unwrap();
    let n = sys.n_modes();
    let extra = rng.random_range(0..=2);
    let pad: Vec<Vec<C64>> = (0..extra)
        .map(|_| complex_matrix(rng, n, 1, 1.0).column(0))
        .collect();
    let cols = |m: &ComplexMatrix| -> Vec<Vec<C64>> { (0..m.cols()).map(|j| m.column(j)).collect() };
    let mut y = cols(&base.y);
    let mut z = cols(&base.z);
    y.extend(pad.iter().cloned());
    z.extend(pad);
    BathCoupling::new(ComplexMatrix::from_columns(n, &y), ComplexMatrix::from_columns(n, &z)).unwrap()
}

pub fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs().max(1e-300)
}
