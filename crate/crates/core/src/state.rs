use ndarray::Array2;
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::linalg::{self, CMatrix};

pub const TRACE_TOL: f64 = 1e-9;
pub const HERMITIAN_TOL: f64 = 1e-10;
pub const POSITIVITY_TOL: f64 = 1e-8;

/// Density matrix on the `2^N` Hilbert space.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityMatrix {
    entries: CMatrix,
}

/// Worst-case deviations from a physical state.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StateDefects {
    pub trace_error: f64,
    pub hermiticity: f64,
    pub min_eigenvalue: f64,
}

impl StateDefects {
    pub fn is_physical(&self) -> bool {
        self.trace_error < TRACE_TOL && self.hermiticity < HERMITIAN_TOL && self.min_eigenvalue >= -POSITIVITY_TOL
    }
}

impl DensityMatrix {
    /// Validates trace, Hermiticity and positivity.
    pub fn new(entries: CMatrix) -> Result<Self> {
        let (r, c) = entries.dim();
        if r != c || r == 0 {
            return Err(Error::DimensionMismatch { expected: r, got: c });
        }
        let rho = DensityMatrix {
            entries: entries.as_standard_layout().into_owned(),
        };
        let d = rho.defects();
        if !d.is_physical() {
            return Err(Error::InvalidState(format!(
                "trace error {:.3e}, hermiticity {:.3e}, min eigenvalue {:.3e}",
                d.trace_error, d.hermiticity, d.min_eigenvalue
            )));
        }
        Ok(rho)
    }

    pub(crate) fn from_parts(entries: CMatrix) -> Self {
        DensityMatrix { entries }
    }

    /// `|ψ⟩⟨ψ|` for a normalized vector.
    pub fn pure(psi: &[Complex64]) -> Result<Self> {
        let norm: f64 = psi.iter().map(|z| z.norm_sqr()).sum();
        if (norm - 1.0).abs() > 1e-12 {
            return Err(Error::InvalidState(format!("state vector norm² = {norm}")));
        }
        let n = psi.len();
        Ok(DensityMatrix {
            entries: Array2::from_shape_fn((n, n), |(i, j)| psi[i] * psi[j].conj()),
        })
    }

    pub fn maximally_mixed(dim: usize) -> Self {
        DensityMatrix {
            entries: linalg::identity(dim) * Complex64::new(1.0 / dim as f64, 0.0),
        }
    }

    /// Diagonal state in the computational basis.
    pub fn diagonal(populations: &[f64]) -> Result<Self> {
        let d = ndarray::Array1::from_iter(populations.iter().map(|&p| Complex64::new(p, 0.0)));
        DensityMatrix::new(Array2::from_diag(&d))
    }

    pub fn dim(&self) -> usize {
        self.entries.nrows()
    }

    pub fn entries(&self) -> &CMatrix {
        &self.entries
    }

    pub fn into_entries(self) -> CMatrix {
        self.entries
    }

    pub fn defects(&self) -> StateDefects {
        let trace_error = (linalg::trace(&self.entries) - Complex64::new(1.0, 0.0)).norm();
        let hermiticity = linalg::hermiticity_defect(&self.entries);
        let min_eigenvalue = linalg::eigvalsh(&self.entries)[0];
        StateDefects {
            trace_error,
            hermiticity,
            min_eigenvalue,
        }
    }

    /// Eigenvalues with slightly negative values clamped to zero and the
    /// set renormalized to unit sum. The state itself is never modified.
    pub fn clamped_eigenvalues(&self) -> Vec<f64> {
        clamp_spectrum(linalg::eigvalsh(&self.entries))
    }
}

/// Random full-rank state `A A† / Tr(A A†)` with entries of `A` uniform
/// in the unit square.
pub fn random_density_matrix<R: rand::Rng + ?Sized>(dim: usize, rng: &mut R) -> DensityMatrix {
    let a = Array2::from_shape_fn((dim, dim), |_| {
        Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))
    });
    let m = a.dot(&linalg::dagger(&a));
    let tr = linalg::trace(&m).re;
    let m = m.mapv(|z| z / tr);
    // Exact Hermiticity; the product leaves rounding-level asymmetry.
    let m = (&m + &linalg::dagger(&m)).mapv(|z| z * 0.5);
    DensityMatrix::from_parts(m)
}

/// Clamp eigenvalues in `(−1e-8, 0)` to zero and renormalize to unit sum.
pub fn clamp_spectrum(mut eigs: Vec<f64>) -> Vec<f64> {
    for v in eigs.iter_mut() {
        if *v < 0.0 && *v > -POSITIVITY_TOL {
            *v = 0.0;
        }
    }
    let sum: f64 = eigs.iter().sum();
    if sum > 0.0 {
        eigs.iter_mut().for_each(|v| *v /= sum);
    }
    eigs
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_non_physical_matrices() {
        assert!(DensityMatrix::diagonal(&[0.6, 0.6]).is_err());
        assert!(DensityMatrix::diagonal(&[1.2, -0.2]).is_err());
        let mut m = DensityMatrix::maximally_mixed(2).into_entries();
        m[[0, 1]] = Complex64::new(0.1, 0.0);
        assert!(DensityMatrix::new(m).is_err());
    }

    #[test]
    fn random_states_are_physical() {
        use rand::SeedableRng;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(1);
        for dim in [2, 4, 8] {
            let rho = random_density_matrix(dim, &mut rng);
            assert!(rho.defects().is_physical());
            assert!(rho.defects().min_eigenvalue > 0.0);
        }
    }

    #[test]
    fn pure_state_is_rank_one() {
        let s = 0.5f64.sqrt();
        let rho = DensityMatrix::pure(&[Complex64::new(s, 0.0), Complex64::new(0.0, s)]).unwrap();
        let r = rho.clamped_eigenvalues();
        assert!(r[0].abs() < 1e-12 && (r[1] - 1.0).abs() < 1e-12);
        assert!(rho.defects().is_physical());
    }
}
