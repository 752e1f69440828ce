//! Closed-form results for the two-spin battery, used as independent
//! oracles for the general engine.
//!
//! Nothing here calls the eigensolver or [`crate::model::pauli_site`]:
//! matrices are written out entry by entry or built from 2×2 Kronecker
//! products.

use ndarray::{array, Array2};
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::linalg::{self, CMatrix, I, ONE, ZERO};
use crate::model::{OperatorMatrix, SpinChainParams};
use crate::state::DensityMatrix;

fn c(x: f64) -> Complex64 {
    Complex64::new(x, 0.0)
}

/// Two-spin eigensystem in closed form.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TwoSpinEigensystem {
    pub eps0: f64,
    pub eps1: f64,
    pub eps2: f64,
    pub eps3: f64,
    /// `√(h² + κ²)`
    pub eta: f64,
    /// `Jγ`
    pub kappa: f64,
    /// `h − η`
    pub delta_minus: f64,
    /// `h + η`
    pub delta_plus: f64,
    /// `[(δ₋²/κ²) + 1]^{-1/2}`; `NaN` when κ = 0.
    pub norm_minus: f64,
    /// `[(δ₊²/κ²) + 1]^{-1/2}`; `NaN` when κ = 0.
    pub norm_plus: f64,
}

impl TwoSpinEigensystem {
    /// `[ε₀, ε₁, ε₂, ε₃]`; not necessarily ascending.
    pub fn energies(&self) -> [f64; 4] {
        [self.eps0, self.eps1, self.eps2, self.eps3]
    }

    pub fn sorted_energies(&self) -> [f64; 4] {
        let mut e = self.energies();
        e.sort_by(f64::total_cmp);
        e
    }

    /// Eigenvectors `[ψ₀, ψ₁, ψ₂, ψ₃]` in the basis `|00⟩, |01⟩, |10⟩, |11⟩`,
    /// with the `|11⟩` (or `|10⟩`) amplitude non-negative.
    pub fn eigenvectors(&self) -> [[f64; 4]; 4] {
        let s = std::f64::consts::FRAC_1_SQRT_2;
        let outer = |delta: f64| -> [f64; 4] {
            let (a, b) = outer_amplitudes(delta, self.kappa);
            [a, 0.0, 0.0, b]
        };
        [
            outer(self.delta_minus),
            [0.0, -s, s, 0.0],
            [0.0, s, s, 0.0],
            outer(self.delta_plus),
        ]
    }
}

/// Amplitudes `(a₀₀, a₁₁)` of `N(δ/κ |00⟩ + |11⟩)`, routed through the
/// κ → 0 limit when the ratio is singular.
fn outer_amplitudes(delta: f64, kappa: f64) -> (f64, f64) {
    if kappa == 0.0 {
        // δ = 0 leaves |11⟩; any other δ sends δ/κ to infinity and leaves |00⟩.
        return if delta == 0.0 { (0.0, 1.0) } else { (1.0, 0.0) };
    }
    let ratio = delta / kappa;
    let norm = 1.0 / (ratio * ratio + 1.0).sqrt();
    (norm * ratio, norm)
}

fn check_two(params: &SpinChainParams) -> Result<()> {
    if params.n_sites() != 2 {
        return Err(Error::Domain(format!(
            "two-spin closed forms need N = 2, got {}",
            params.n_sites()
        )));
    }
    Ok(())
}

/// The 4×4 raw Hamiltonian written entry by entry.
pub fn analytic_h0_2(params: &SpinChainParams) -> Result<OperatorMatrix> {
    check_two(params)?;
    let (h, j, jz) = (params.field_h(), params.coupling_j(), params.coupling_jz());
    let kappa = j * params.gamma();
    let mu_plus = jz / 4.0 + h;
    let mu_minus = jz / 4.0 - h;
    let m = array![
        [c(mu_plus), ZERO, ZERO, c(kappa)],
        [ZERO, c(-jz / 4.0), c(j), ZERO],
        [ZERO, c(j), c(-jz / 4.0), ZERO],
        [c(kappa), ZERO, ZERO, c(mu_minus)],
    ];
    OperatorMatrix::new(m, true)
}

pub fn analytic_eigs_2(params: &SpinChainParams) -> Result<TwoSpinEigensystem> {
    check_two(params)?;
    let (h, j, jz) = (params.field_h(), params.coupling_j(), params.coupling_jz());
    let kappa = j * params.gamma();
    let eta = (h * h + kappa * kappa).sqrt();
    let delta_minus = h - eta;
    let delta_plus = h + eta;
    let norm = |d: f64| {
        if kappa == 0.0 {
            f64::NAN
        } else {
            ((d * d) / (kappa * kappa) + 1.0).powf(-0.5)
        }
    };
    Ok(TwoSpinEigensystem {
        eps0: jz / 4.0 - eta,
        eps1: -jz / 4.0 - j,
        eps2: -jz / 4.0 + j,
        eps3: jz / 4.0 + eta,
        eta,
        kappa,
        delta_minus,
        delta_plus,
        norm_minus: norm(delta_minus),
        norm_plus: norm(delta_plus),
    })
}

/// Spin orientation of the two-spin initial state.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Polarization {
    /// Built from `δ₊`: the upper outer eigenstate, discharging start.
    Up,
    /// Built from `δ₋`: the ground state, charging start.
    Down,
}

/// The rank-one initial state supported on `|00⟩, |11⟩`:
/// `(00,00) = δ²/(δ²+κ²)`, corners `κδ/(δ²+κ²)`, `(11,11) = κ²/(δ²+κ²)`.
pub fn rho_initial_2(which: Polarization, params: &SpinChainParams) -> Result<DensityMatrix> {
    let eig = analytic_eigs_2(params)?;
    let delta = match which {
        Polarization::Up => eig.delta_plus,
        Polarization::Down => eig.delta_minus,
    };
    let kappa = eig.kappa;
    let (p00, corner, p11) = if kappa == 0.0 {
        let (a, b) = outer_amplitudes(delta, kappa);
        (a * a, a * b, b * b)
    } else {
        let denom = delta * delta + kappa * kappa;
        (delta * delta / denom, kappa * delta / denom, kappa * kappa / denom)
    };
    let mut m = Array2::zeros((4, 4));
    m[[0, 0]] = c(p00);
    m[[0, 3]] = c(corner);
    m[[3, 0]] = c(corner);
    m[[3, 3]] = c(p11);
    DensityMatrix::new(m)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TwoSpinMode {
    Charging,
    Discharging,
}

/// Rates for the explicit two-spin phase-flip generator.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PhaseFlipRates {
    pub omega: f64,
    pub gamma_plus: f64,
    pub gamma_minus: f64,
    pub gamma_z: f64,
}

fn sigma(which: char) -> CMatrix {
    match which {
        'x' => array![[ZERO, ONE], [ONE, ZERO]],
        'z' => array![[ONE, ZERO], [ZERO, -ONE]],
        '+' => array![[ZERO, ONE], [ZERO, ZERO]],
        '-' => array![[ZERO, ZERO], [ONE, ZERO]],
        _ => unreachable!(),
    }
}

/// Normalized two-spin battery Hamiltonian from the closed forms alone.
pub fn analytic_h0_2_normalized(params: &SpinChainParams) -> Result<CMatrix> {
    let raw = analytic_h0_2(params)?;
    let e = analytic_eigs_2(params)?.sorted_energies();
    let (lo, span) = (e[0], e[3] - e[0]);
    Ok((raw.entries() - &(linalg::identity(4) * c(lo))).mapv(|z| z / span))
}

/// The two-spin phase-flip master equation written term by term.
///
/// Charging: `H = H₀ + H_c` with `Γ₊` absorption on both sites.
/// Discharging: `H = H₀` with `Γ₋` relaxation. `Γ_Z` dephasing is active in
/// both. `H₀` is the normalized battery Hamiltonian.
pub fn phase_flip_rhs_2(
    rho: &CMatrix,
    mode: TwoSpinMode,
    params: &SpinChainParams,
    rates: &PhaseFlipRates,
) -> Result<CMatrix> {
    if rho.dim() != (4, 4) {
        return Err(Error::DimensionMismatch {
            expected: 4,
            got: rho.nrows(),
        });
    }
    let id = linalg::identity(2);
    let on1 = |s: char| linalg::kron(&sigma(s), &id);
    let on2 = |s: char| linalg::kron(&id, &sigma(s));
    let h0 = analytic_h0_2_normalized(params)?;

    let (h, gain, gain_op, loss_op) = match mode {
        TwoSpinMode::Charging => {
            let hc = (on1('x') + on2('x')) * c(rates.omega / 2.0);
            (&h0 + &hc, rates.gamma_plus, '+', '-')
        }
        TwoSpinMode::Discharging => (h0, rates.gamma_minus, '-', '+'),
    };
    let anti = |a: &CMatrix, r: &CMatrix| a.dot(r) + r.dot(a);

    // −i[H, ρ]
    let mut out = (h.dot(rho) - rho.dot(&h)) * (-I);

    // Γ [ (σ⊗I)ρ(σ†⊗I) − ½{(σ†⊗I)(σ⊗I), ρ} + (I⊗σ)ρ(I⊗σ†) − ½{(I⊗σ†)(I⊗σ), ρ} ]
    let (l1, l1d) = (on1(gain_op), on1(loss_op));
    let (l2, l2d) = (on2(gain_op), on2(loss_op));
    let bath = l1.dot(rho).dot(&l1d) - anti(&l1d.dot(&l1), rho) * c(0.5) + l2.dot(rho).dot(&l2d)
        - anti(&l2d.dot(&l2), rho) * c(0.5);
    out = out + bath * c(gain);

    // Γ_Z [ (σz⊗I)ρ(σz⊗I) + (I⊗σz)ρ(I⊗σz) − 2ρ ]
    let (z1, z2) = (on1('z'), on2('z'));
    let dephase = z1.dot(rho).dot(&z1) + z2.dot(rho).dot(&z2) - rho * c(2.0);
    out = out + dephase * c(rates.gamma_z);
    Ok(out)
}
