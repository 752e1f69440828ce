//! GKSL master equation: collapse-operator assembly, the right-hand side
//! `−i[H,ρ] + Σ_k Γ_k (L_k ρ L_k† − ½{L_k†L_k, ρ})`, and the vectorized
//! Liouvillian used as an exact small-system oracle.

use std::fmt;
use std::str::FromStr;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{self, CMatrix};
use crate::model::{pauli_site, OperatorMatrix, PauliAxis};
use crate::sparse::{SparseGenerator, SparseMatrix};

/// The superoperator is `dim² × dim²`; beyond this it is refused.
pub const LIOUVILLIAN_MAX_DIM: usize = 64;

/// Local Pauli noise axis: bit-flip (x), bit-phase-flip (y), phase-flip (z).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NoiseAxis {
    X,
    Y,
    Z,
}

impl NoiseAxis {
    pub const ALL: [NoiseAxis; 3] = [NoiseAxis::X, NoiseAxis::Z, NoiseAxis::Y];

    pub fn pauli(self) -> PauliAxis {
        match self {
            NoiseAxis::X => PauliAxis::X,
            NoiseAxis::Y => PauliAxis::Y,
            NoiseAxis::Z => PauliAxis::Z,
        }
    }

    pub fn channel_name(self) -> &'static str {
        match self {
            NoiseAxis::X => "bit-flip",
            NoiseAxis::Y => "bit-phase-flip",
            NoiseAxis::Z => "phase-flip",
        }
    }
}

impl fmt::Display for NoiseAxis {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            NoiseAxis::X => "x",
            NoiseAxis::Y => "y",
            NoiseAxis::Z => "z",
        })
    }
}

impl FromStr for NoiseAxis {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "x" | "bit-flip" | "bit_flip" => Ok(NoiseAxis::X),
            "y" | "bit-phase-flip" | "bit_phase_flip" => Ok(NoiseAxis::Y),
            "z" | "phase-flip" | "phase_flip" => Ok(NoiseAxis::Z),
            other => Err(Error::Domain(format!("unknown noise axis `{other}`"))),
        }
    }
}

/// One local Pauli channel applied on every site at rate `strength` (units of ΔE).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoiseChannel {
    pub axis: NoiseAxis,
    pub strength: f64,
}

impl NoiseChannel {
    pub fn new(axis: NoiseAxis, strength: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&strength) {
            return Err(Error::Domain(format!(
                "noise strength must be in [0, 1], got {strength}"
            )));
        }
        Ok(NoiseChannel { axis, strength })
    }

    pub fn off(axis: NoiseAxis) -> Self {
        NoiseChannel { axis, strength: 0.0 }
    }
}

#[derive(Debug, Clone)]
pub struct CollapseTerm {
    pub rate: f64,
    pub operator: OperatorMatrix,
}

/// Per site: `(Γ₊, σ₊)`, `(Γ₋, σ₋)`, then one `(Γα, σα)` per noise channel.
/// Zero rates are dropped.
pub fn assemble_collapse(
    n_sites: usize,
    gamma_plus: f64,
    gamma_minus: f64,
    noise: &[NoiseChannel],
) -> Result<Vec<CollapseTerm>> {
    let mut rates = vec![(gamma_plus, PauliAxis::Plus), (gamma_minus, PauliAxis::Minus)];
    rates.extend(noise.iter().map(|ch| (ch.strength, ch.axis.pauli())));
    for (rate, axis) in &rates {
        if !rate.is_finite() || *rate < 0.0 {
            return Err(Error::Domain(format!(
                "rate for σ_{axis} must be non-negative, got {rate}"
            )));
        }
    }
    let mut terms = Vec::new();
    for site in 1..=n_sites {
        for &(rate, axis) in &rates {
            if rate > 0.0 {
                terms.push(CollapseTerm {
                    rate,
                    operator: pauli_site(axis, site, n_sites)?,
                });
            }
        }
    }
    Ok(terms)
}

/// A prepared generator for repeated right-hand-side evaluations.
#[derive(Debug, Clone)]
pub struct Generator {
    inner: SparseGenerator,
}

impl Generator {
    pub fn new(h_total: &OperatorMatrix, terms: &[CollapseTerm]) -> Result<Self> {
        let dim = h_total.dim();
        let mut h_eff = h_total.entries().clone();
        let mut jumps = Vec::with_capacity(terms.len());
        for term in terms {
            if term.operator.dim() != dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    got: term.operator.dim(),
                });
            }
            if term.rate < 0.0 {
                return Err(Error::Domain(format!("negative collapse rate {}", term.rate)));
            }
            if term.rate == 0.0 {
                continue;
            }
            let l = term.operator.entries();
            let ldl = linalg::dagger(l).dot(l);
            h_eff.scaled_add(Complex64::new(0.0, -0.5 * term.rate), &ldl);
            jumps.push((term.rate, SparseMatrix::from_dense(l)));
        }
        Ok(Generator {
            inner: SparseGenerator::new(&h_eff, jumps),
        })
    }

    pub fn dim(&self) -> usize {
        self.inner.dim()
    }

    pub fn apply(&self, rho: &CMatrix) -> Result<CMatrix> {
        self.check_dim(rho)?;
        Ok(self.inner.apply(rho))
    }

    pub(crate) fn apply_hermitian_into(&self, rho: &CMatrix, scratch: &mut CMatrix, out: &mut CMatrix) {
        self.inner.apply_hermitian_into(rho, scratch, out)
    }

    fn check_dim(&self, rho: &CMatrix) -> Result<()> {
        let (r, c) = rho.dim();
        if r != self.dim() || c != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                got: if r != self.dim() { r } else { c },
            });
        }
        Ok(())
    }
}

/// `−i[H,ρ] + Σ_k Γ_k (L_k ρ L_k† − ½{L_k†L_k, ρ})` for an arbitrary square `rho`.
pub fn master_rhs(rho: &CMatrix, h_total: &OperatorMatrix, terms: &[CollapseTerm]) -> Result<CMatrix> {
    Generator::new(h_total, terms)?.apply(rho)
}

/// Column-stacking superoperator: `vec(master_rhs(ρ)) = 𝓛 · vec(ρ)`.
pub fn liouvillian_matrix(h_total: &OperatorMatrix, terms: &[CollapseTerm]) -> Result<CMatrix> {
    let dim = h_total.dim();
    if dim > LIOUVILLIAN_MAX_DIM {
        return Err(Error::DimensionCap {
            dim,
            cap: LIOUVILLIAN_MAX_DIM,
        });
    }
    let id = linalg::identity(dim);
    let h = h_total.entries();
    let minus_i = Complex64::new(0.0, -1.0);
    let mut sup = (linalg::kron(&id, h) - linalg::kron(&h.t().to_owned(), &id)) * minus_i;
    for term in terms {
        if term.operator.dim() != dim {
            return Err(Error::DimensionMismatch {
                expected: dim,
                got: term.operator.dim(),
            });
        }
        let l = term.operator.entries();
        let ldl = linalg::dagger(l).dot(l);
        let rate = Complex64::new(term.rate, 0.0);
        let half = Complex64::new(0.5, 0.0);
        let d = linalg::kron(&l.mapv(|z| z.conj()), l)
            - linalg::kron(&id, &ldl) * half
            - linalg::kron(&ldl.t().to_owned(), &id) * half;
        sup.scaled_add(rate, &d);
    }
    Ok(sup)
}

pub fn vectorize(m: &CMatrix) -> Vec<Complex64> {
    // Column stacking: element (i, j) lands at i + j·dim.
    m.t().iter().copied().collect()
}

pub fn unvectorize(v: &[Complex64], dim: usize) -> CMatrix {
    ndarray::Array2::from_shape_fn((dim, dim), |(i, j)| v[i + j * dim])
}

/// `ρ(t) = unvec(exp(𝓛 t) vec(ρ₀))` at every time in `times`.
pub fn expm_propagate(liouvillian: &CMatrix, rho0: &CMatrix, times: &[f64]) -> Vec<CMatrix> {
    let dim = rho0.nrows();
    let v0 = ndarray::Array1::from(vectorize(rho0));
    times
        .iter()
        .map(|&t| {
            let prop = linalg::expm(&(liouvillian * Complex64::new(t, 0.0)));
            let v = prop.dot(&v0);
            unvectorize(v.as_slice().unwrap(), dim)
        })
        .collect()
}

/// The zero operator, for generators without a Hamiltonian part.
pub fn zero_hamiltonian(dim: usize) -> OperatorMatrix {
    OperatorMatrix::from_parts(ndarray::Array2::zeros((dim, dim)), true)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{max_abs, max_abs_diff, trace, ZERO};
    use ndarray::{array, Array2};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn c(x: f64) -> Complex64 {
        Complex64::new(x, 0.0)
    }

    #[test]
    fn assemble_reference_charging_terms() {
        let terms = assemble_collapse(2, 0.01, 0.0, &[NoiseChannel::new(NoiseAxis::Z, 0.06).unwrap()]).unwrap();
        assert_eq!(terms.len(), 4);
        let z1 = pauli_site(PauliAxis::Z, 1, 2).unwrap();
        let p2 = pauli_site(PauliAxis::Plus, 2, 2).unwrap();
        assert_eq!(terms[0].rate, 0.01);
        assert_eq!(terms[1].rate, 0.06);
        assert_eq!(terms[1].operator, z1);
        assert_eq!(terms[2].operator, p2);
    }

    #[test]
    fn assemble_counts() {
        assert!(assemble_collapse(3, 0.0, 0.0, &[NoiseChannel::off(NoiseAxis::X)])
            .unwrap()
            .is_empty());
        let six = assemble_collapse(6, 0.0, 0.01, &[NoiseChannel::new(NoiseAxis::Y, 0.3).unwrap()]).unwrap();
        assert_eq!(six.len(), 12);
        assert!(assemble_collapse(2, -0.1, 0.0, &[]).is_err());
        assert!(NoiseChannel::new(NoiseAxis::X, 1.5).is_err());
    }

    #[test]
    fn single_qubit_dephasing_rhs_by_hand() {
        let gz = 0.37;
        let terms = vec![CollapseTerm {
            rate: gz,
            operator: pauli_site(PauliAxis::Z, 1, 1).unwrap(),
        }];
        let rho = array![[c(0.5), c(0.3)], [c(0.3), c(0.5)]];
        let out = master_rhs(&rho, &zero_hamiltonian(2), &terms).unwrap();
        let expect = array![[ZERO, c(-0.6 * gz)], [c(-0.6 * gz), ZERO]];
        assert!(max_abs_diff(&out, &expect) < 1e-15);
    }

    fn random_hermitian(n: usize, rng: &mut ChaCha8Rng) -> CMatrix {
        let a = Array2::from_shape_fn((n, n), |_| {
            Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))
        });
        &a + &linalg::dagger(&a)
    }

    fn random_terms(n_sites: usize, rng: &mut ChaCha8Rng) -> Vec<CollapseTerm> {
        let axis = NoiseAxis::ALL[rng.random_range(0..3)];
        let noise = NoiseChannel::new(axis, rng.random_range(0.0..0.5)).unwrap();
        assemble_collapse(
            n_sites,
            rng.random_range(0.0..0.5),
            rng.random_range(0.0..0.5),
            &[noise],
        )
        .unwrap()
    }

    #[test]
    fn rhs_is_traceless_and_hermitian_preserving() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for n in 1..=3 {
            let dim = 1 << n;
            let h = OperatorMatrix::new(random_hermitian(dim, &mut rng), true).unwrap();
            let terms = random_terms(n, &mut rng);
            let rho = random_hermitian(dim, &mut rng);
            let out = master_rhs(&rho, &h, &terms).unwrap();
            assert!(trace(&out).norm() < 1e-12);
            assert!(linalg::hermiticity_defect(&out) < 1e-12);
        }
    }

    #[test]
    fn rhs_matches_dense_formula() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let dim = 8;
        let h = OperatorMatrix::new(random_hermitian(dim, &mut rng), true).unwrap();
        let terms = random_terms(3, &mut rng);
        let rho = random_hermitian(dim, &mut rng);
        let hm = h.entries();
        let mut expect = (hm.dot(&rho) - rho.dot(hm)) * Complex64::new(0.0, -1.0);
        for t in &terms {
            let l = t.operator.entries();
            let ld = linalg::dagger(l);
            let ldl = ld.dot(l);
            let d = l.dot(&rho).dot(&ld) - (ldl.dot(&rho) + rho.dot(&ldl)) * c(0.5);
            expect = expect + d * c(t.rate);
        }
        let out = master_rhs(&rho, &h, &terms).unwrap();
        assert!(max_abs_diff(&out, &expect) < 1e-12);
    }

    #[test]
    fn rhs_dimension_mismatch() {
        let terms = assemble_collapse(2, 0.1, 0.0, &[]).unwrap();
        let err = master_rhs(&linalg::identity(2), &zero_hamiltonian(4), &terms);
        assert!(matches!(err, Err(Error::DimensionMismatch { .. })));
        assert!(matches!(
            Generator::new(&zero_hamiltonian(2), &terms),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn liouvillian_examples() {
        assert_eq!(max_abs(&liouvillian_matrix(&zero_hamiltonian(4), &[]).unwrap()), 0.0);

        let gz = 0.2;
        let terms = vec![CollapseTerm {
            rate: gz,
            operator: pauli_site(PauliAxis::Z, 1, 1).unwrap(),
        }];
        let l = liouvillian_matrix(&zero_hamiltonian(2), &terms).unwrap();
        let expect = Array2::from_diag(&ndarray::arr1(&[ZERO, c(-2.0 * gz), c(-2.0 * gz), ZERO]));
        assert!(max_abs_diff(&l, &expect) < 1e-15);

        assert!(matches!(
            liouvillian_matrix(&zero_hamiltonian(128), &[]),
            Err(Error::DimensionCap { .. })
        ));
    }

    #[test]
    fn liouvillian_reproduces_rhs() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        for n in 1..=3 {
            let dim = 1 << n;
            let h = OperatorMatrix::new(random_hermitian(dim, &mut rng), true).unwrap();
            let terms = random_terms(n, &mut rng);
            let rho = Array2::from_shape_fn((dim, dim), |_| Complex64::new(rng.random(), rng.random()));
            let sup = liouvillian_matrix(&h, &terms).unwrap();
            let lhs = unvectorize(
                sup.dot(&ndarray::Array1::from(vectorize(&rho))).as_slice().unwrap(),
                dim,
            );
            let rhs = master_rhs(&rho, &h, &terms).unwrap();
            assert!(max_abs_diff(&lhs, &rhs) < 1e-12);
        }
    }
}
