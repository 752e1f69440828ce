//! Spin-chain battery model: embedded Pauli operators, the XYZ battery
//! Hamiltonian with its spectral normalization, and the transverse
//! charging Hamiltonian.
//!
//! Basis convention: site 1 is the leftmost tensor factor and computational
//! basis states are enumerated by binary index, with `|0⟩` the σ_z = +1
//! state. `σ₊ = |0⟩⟨1|`, so with a positive field σ₊ raises the energy.

use std::fmt;

use ndarray::Array2;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{self, CMatrix, I, ONE, ZERO};
use crate::state::DensityMatrix;

/// Largest chain the dense engine accepts.
pub const MAX_SITES: usize = 12;

/// Relative gap below which two extremal eigenvalues count as degenerate.
const DEGENERACY_TOL: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum PauliAxis {
    X,
    Y,
    Z,
    Plus,
    Minus,
}

impl PauliAxis {
    /// Single-site 2×2 matrix.
    pub fn matrix(self) -> CMatrix {
        let m = match self {
            PauliAxis::X => [[ZERO, ONE], [ONE, ZERO]],
            PauliAxis::Y => [[ZERO, -I], [I, ZERO]],
            PauliAxis::Z => [[ONE, ZERO], [ZERO, -ONE]],
            PauliAxis::Plus => [[ZERO, ONE], [ZERO, ZERO]],
            PauliAxis::Minus => [[ZERO, ZERO], [ONE, ZERO]],
        };
        Array2::from_shape_fn((2, 2), |(i, j)| m[i][j])
    }
}

impl fmt::Display for PauliAxis {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            PauliAxis::X => "x",
            PauliAxis::Y => "y",
            PauliAxis::Z => "z",
            PauliAxis::Plus => "+",
            PauliAxis::Minus => "-",
        };
        f.write_str(s)
    }
}

/// Static parameters of the XYZ chain with uniform couplings.
///
/// `lambda_ratio` is not stored; it is always derived as `J / |h|`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpinChainParams {
    n_sites: usize,
    field_h: f64,
    coupling_j: f64,
    gamma: f64,
    coupling_jz: f64,
}

impl SpinChainParams {
    pub fn new(n_sites: usize, field_h: f64, coupling_j: f64, gamma: f64, coupling_jz: f64) -> Result<Self> {
        if !(2..=MAX_SITES).contains(&n_sites) {
            return Err(Error::Domain(format!(
                "n_sites must be in 2..={MAX_SITES}, got {n_sites}"
            )));
        }
        if !(0.0..=1.0).contains(&gamma) {
            return Err(Error::Domain(format!(
                "anisotropy gamma must be in [0, 1], got {gamma}"
            )));
        }
        for (name, v) in [("h", field_h), ("J", coupling_j), ("J_z", coupling_jz)] {
            if !v.is_finite() {
                return Err(Error::Domain(format!("{name} must be finite")));
            }
        }
        if field_h == 0.0 {
            return Err(Error::Domain("field h must be nonzero (lambda = J/|h|)".into()));
        }
        Ok(SpinChainParams {
            n_sites,
            field_h,
            coupling_j,
            gamma,
            coupling_jz,
        })
    }

    /// Parametrize by `λ = J/|h|` instead of `J`.
    pub fn from_lambda(n_sites: usize, field_h: f64, lambda: f64, gamma: f64, coupling_jz: f64) -> Result<Self> {
        Self::new(n_sites, field_h, lambda * field_h.abs(), gamma, coupling_jz)
    }

    pub fn with_sites(&self, n_sites: usize) -> Result<Self> {
        Self::new(n_sites, self.field_h, self.coupling_j, self.gamma, self.coupling_jz)
    }

    pub fn n_sites(&self) -> usize {
        self.n_sites
    }
    pub fn field_h(&self) -> f64 {
        self.field_h
    }
    pub fn coupling_j(&self) -> f64 {
        self.coupling_j
    }
    pub fn gamma(&self) -> f64 {
        self.gamma
    }
    pub fn coupling_jz(&self) -> f64 {
        self.coupling_jz
    }
    pub fn lambda_ratio(&self) -> f64 {
        self.coupling_j / self.field_h.abs()
    }
    pub fn dim(&self) -> usize {
        1 << self.n_sites
    }
}

/// Dense operator on the `2^N` Hilbert space.
#[derive(Debug, Clone, PartialEq)]
pub struct OperatorMatrix {
    entries: CMatrix,
    hermitian_hint: bool,
}

impl OperatorMatrix {
    pub fn new(entries: CMatrix, hermitian_hint: bool) -> Result<Self> {
        let (r, c) = entries.dim();
        if r != c {
            return Err(Error::DimensionMismatch { expected: r, got: c });
        }
        if !r.is_power_of_two() {
            return Err(Error::Domain(format!("operator dimension {r} is not a power of two")));
        }
        if hermitian_hint && linalg::hermiticity_defect(&entries) >= 1e-12 {
            return Err(Error::Domain("operator flagged Hermitian is not".into()));
        }
        Ok(OperatorMatrix {
            entries: entries.as_standard_layout().into_owned(),
            hermitian_hint,
        })
    }

    pub(crate) fn from_parts(entries: CMatrix, hermitian_hint: bool) -> Self {
        OperatorMatrix {
            entries,
            hermitian_hint,
        }
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
    pub fn is_hermitian(&self) -> bool {
        self.hermitian_hint
    }

    pub fn dot(&self, other: &OperatorMatrix) -> OperatorMatrix {
        OperatorMatrix::from_parts(self.entries.dot(&other.entries), false)
    }

    pub fn add(&self, other: &OperatorMatrix) -> Result<OperatorMatrix> {
        if self.dim() != other.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                got: other.dim(),
            });
        }
        Ok(OperatorMatrix::from_parts(
            &self.entries + &other.entries,
            self.hermitian_hint && other.hermitian_hint,
        ))
    }
}

/// Spectrum of a Hermitian operator.
#[derive(Debug, Clone)]
pub struct SpectrumData {
    pub eigenvalues: Vec<f64>,
    /// Columns paired with `eigenvalues`.
    pub eigenvectors: CMatrix,
    pub e_min: f64,
    pub e_max: f64,
    pub delta_e: f64,
}

impl SpectrumData {
    pub fn of(op: &OperatorMatrix) -> Self {
        let (eigenvalues, eigenvectors) = linalg::eigh(op.entries());
        let e_min = eigenvalues[0];
        let e_max = *eigenvalues.last().expect("non-empty spectrum");
        SpectrumData {
            eigenvalues,
            eigenvectors,
            e_min,
            e_max,
            delta_e: e_max - e_min,
        }
    }

    /// Spectrum after the affine map `E ↦ (E − E_min)/ΔE`; eigenvectors are unchanged.
    pub fn normalized(&self) -> Self {
        let eigenvalues: Vec<f64> = self
            .eigenvalues
            .iter()
            .map(|e| (e - self.e_min) / self.delta_e)
            .collect();
        let e_min = eigenvalues[0];
        let e_max = *eigenvalues.last().unwrap();
        SpectrumData {
            eigenvalues,
            eigenvectors: self.eigenvectors.clone(),
            e_min,
            e_max,
            delta_e: e_max - e_min,
        }
    }
}

/// `I ⊗ … ⊗ σ_axis ⊗ … ⊗ I` with the Pauli factor at 1-based `site`.
pub fn pauli_site(axis: PauliAxis, site: usize, n_sites: usize) -> Result<OperatorMatrix> {
    if n_sites == 0 || n_sites > MAX_SITES {
        return Err(Error::Domain(format!(
            "n_sites must be in 1..={MAX_SITES}, got {n_sites}"
        )));
    }
    if site < 1 || site > n_sites {
        return Err(Error::Domain(format!("site {site} out of range 1..={n_sites}")));
    }
    let local = axis.matrix();
    let dim = 1usize << n_sites;
    // Bit for `site` in the binary basis index; site 1 is the most significant.
    let shift = n_sites - site;
    let mut out = Array2::zeros((dim, dim));
    for row in 0..dim {
        let r_bit = (row >> shift) & 1;
        for c_bit in 0..2 {
            let v = local[[r_bit, c_bit]];
            if v != ZERO {
                let col = (row & !(1 << shift)) | (c_bit << shift);
                out[[row, col]] = v;
            }
        }
    }
    let hermitian = matches!(axis, PauliAxis::X | PauliAxis::Y | PauliAxis::Z);
    Ok(OperatorMatrix::from_parts(out, hermitian))
}

fn site_op(axis: PauliAxis, site: usize, n: usize) -> CMatrix {
    pauli_site(axis, site, n).expect("site in range").into_entries()
}

/// Raw battery Hamiltonian with open boundaries:
/// `(h/2)Σσ_z + (J/2)Σ[(1+γ)σ_xσ_x + (1−γ)σ_yσ_y] + (J_z/4)Σσ_zσ_z`.
pub fn build_h0_raw(params: &SpinChainParams) -> OperatorMatrix {
    let n = params.n_sites();
    let dim = params.dim();
    let mut h = Array2::<Complex64>::zeros((dim, dim));
    let c = |x: f64| Complex64::new(x, 0.0);
    for i in 1..=n {
        h.scaled_add(c(params.field_h() / 2.0), &site_op(PauliAxis::Z, i, n));
    }
    let jx = params.coupling_j() / 2.0 * (1.0 + params.gamma());
    let jy = params.coupling_j() / 2.0 * (1.0 - params.gamma());
    let jz = params.coupling_jz() / 4.0;
    for i in 1..n {
        for (axis, coef) in [(PauliAxis::X, jx), (PauliAxis::Y, jy), (PauliAxis::Z, jz)] {
            if coef != 0.0 {
                let bond = site_op(axis, i, n).dot(&site_op(axis, i + 1, n));
                h.scaled_add(c(coef), &bond);
            }
        }
    }
    OperatorMatrix::from_parts(h, true)
}

/// Map a Hermitian operator onto the unit interval: `(H − E_min I)/(E_max − E_min)`.
///
/// Returns the normalized operator and the spectrum of the *input*.
pub fn normalize_h0(h0: &OperatorMatrix) -> Result<(OperatorMatrix, SpectrumData)> {
    let spectrum = SpectrumData::of(h0);
    let scale = spectrum.e_max.abs().max(spectrum.e_min.abs()).max(1.0);
    if spectrum.delta_e <= f64::EPSILON * scale {
        return Err(Error::DegenerateSpectrum(spectrum.e_min));
    }
    let shifted = h0.entries() - &(linalg::identity(h0.dim()) * Complex64::new(spectrum.e_min, 0.0));
    let normalized = shifted.mapv(|z| z / spectrum.delta_e);
    Ok((OperatorMatrix::from_parts(normalized, h0.is_hermitian()), spectrum))
}

/// Charging Hamiltonian `(ω/2) Σ_i σ_x^i`.
pub fn build_hc(n_sites: usize, omega: f64) -> Result<OperatorMatrix> {
    if !omega.is_finite() || omega < 0.0 {
        return Err(Error::Domain(format!(
            "omega must be finite and non-negative, got {omega}"
        )));
    }
    let first = pauli_site(PauliAxis::X, 1, n_sites)?;
    let dim = first.dim();
    let mut h = Array2::<Complex64>::zeros((dim, dim));
    h += first.entries();
    for i in 2..=n_sites {
        h += &site_op(PauliAxis::X, i, n_sites);
    }
    h.mapv_inplace(|z| z * (omega / 2.0));
    Ok(OperatorMatrix::from_parts(h, true))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Extremal {
    Ground,
    Top,
}

/// Projector onto the lowest or highest eigenvector of `spectrum`.
///
/// The boolean is `true` when the chosen eigenvalue is degenerate; the
/// solver's stable order then decides which eigenvector is used.
pub fn extremal_state(spectrum: &SpectrumData, which: Extremal) -> (DensityMatrix, bool) {
    let n = spectrum.eigenvalues.len();
    let (idx, neighbour) = match which {
        Extremal::Ground => (0, 1.min(n - 1)),
        Extremal::Top => (n - 1, n.saturating_sub(2)),
    };
    let gap = (spectrum.eigenvalues[idx] - spectrum.eigenvalues[neighbour]).abs();
    let degenerate = n > 1 && gap <= DEGENERACY_TOL * spectrum.delta_e.abs().max(1.0);
    let v = spectrum.eigenvectors.column(idx);
    let rho = Array2::from_shape_fn((n, n), |(i, j)| v[i] * v[j].conj());
    (DensityMatrix::from_parts(rho), degenerate)
}
