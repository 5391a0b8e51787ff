//! Small dense complex matrices (n ≤ 4) on top of nalgebra.

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::error::{Error, Result};

pub type CMat = DMatrix<Complex64>;

/// Largest condition number accepted for a metric matrix.
pub const MAX_CONDITION: f64 = 1e12;

/// Eigenvalues of a Hermitian matrix, ascending.
pub fn hermitian_eigenvalues(m: &CMat) -> Vec<f64> {
    let mut ev: Vec<f64> = m.clone().symmetric_eigenvalues().iter().copied().collect();
    ev.sort_by(f64::total_cmp);
    ev
}

/// Hermitian positive-definiteness and conditioning check.
pub fn check_metric(m: &CMat) -> Result<()> {
    let ev = hermitian_eigenvalues(m);
    let (lo, hi) = (ev[0], ev[ev.len() - 1]);
    if !(lo > 0.0) {
        return Err(Error::NotAMetric(format!("smallest eigenvalue {lo:e}")));
    }
    if hi / lo > MAX_CONDITION {
        return Err(Error::DegenerateMetric(hi / lo));
    }
    Ok(())
}

/// Inverse by LU with partial pivoting.
pub fn inverse(m: &CMat) -> Result<CMat> {
    m.clone()
        .lu()
        .try_inverse()
        .ok_or_else(|| Error::NotAMetric("singular matrix".into()))
}

pub fn max_abs(m: &CMat) -> f64 {
    m.iter().map(|c| c.norm()).fold(0.0, f64::max)
}

/// `⟨v, w⟩_g = Σ g_{αβ̄} v^α conj(w^β)`.
pub fn metric_inner(g: &CMat, v: &[Complex64], w: &[Complex64]) -> Complex64 {
    let n = v.len();
    let mut acc = Complex64::new(0.0, 0.0);
    for a in 0..n {
        for b in 0..n {
            acc += g[(a, b)] * v[a] * w[b].conj();
        }
    }
    acc
}

pub fn metric_norm(g: &CMat, v: &[Complex64]) -> f64 {
    metric_inner(g, v, v).re.max(0.0).sqrt()
}

/// Gauss–Legendre nodes and weights on `[0, 1]` (8 points).
pub fn gauss_legendre_01() -> [(f64, f64); 8] {
    const X: [f64; 4] = [
        0.183_434_642_495_649_8,
        0.525_532_409_916_329_0,
        0.796_666_477_413_626_7,
        0.960_289_856_497_536_3,
    ];
    const W: [f64; 4] = [
        0.362_683_783_378_362_0,
        0.313_706_645_877_887_3,
        0.222_381_034_453_374_5,
        0.101_228_536_290_376_3,
    ];
    let mut out = [(0.0, 0.0); 8];
    for i in 0..4 {
        out[2 * i] = (0.5 * (1.0 - X[i]), 0.5 * W[i]);
        out[2 * i + 1] = (0.5 * (1.0 + X[i]), 0.5 * W[i]);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gauss_legendre_integrates_degree_fifteen() {
        let q = gauss_legendre_01();
        let s: f64 = q.iter().map(|&(x, w)| w * x.powi(15)).sum();
        assert!((s - 1.0 / 16.0).abs() < 1e-15);
        let total: f64 = q.iter().map(|&(_, w)| w).sum();
        assert!((total - 1.0).abs() < 1e-15);
    }

    #[test]
    fn metric_checks() {
        let c = |x: f64| Complex64::new(x, 0.0);
        let good = CMat::from_row_slice(2, 2, &[c(2.0), Complex64::new(0.0, 1.0), Complex64::new(0.0, -1.0), c(2.0)]);
        assert!(check_metric(&good).is_ok());
        let inv = inverse(&good).unwrap();
        assert!(max_abs(&(&good * &inv - CMat::identity(2, 2))) < 1e-15);
        let bad = CMat::from_row_slice(2, 2, &[c(1.0), c(2.0), c(2.0), c(1.0)]);
        assert!(matches!(check_metric(&bad), Err(Error::NotAMetric(_))));
        let thin = CMat::from_row_slice(2, 2, &[c(1.0), c(0.0), c(0.0), c(1e-14)]);
        assert!(matches!(check_metric(&thin), Err(Error::DegenerateMetric(_))));
    }
}
