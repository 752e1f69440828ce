//! Figures of merit for a battery state against the normalized battery
//! Hamiltonian (spectrum in [0, 1]).
//!
//! Coherence is measured in the computational (σ_z product) basis, the
//! basis in which the local noise operators are defined.

use num_complex::Complex64;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::linalg::{self, CMatrix};
use crate::model::{OperatorMatrix, SpectrumData};
use crate::state::{clamp_spectrum, DensityMatrix};

/// `E_B` below this makes `𝒲/E_B` undefined.
pub const RATIO_ENERGY_FLOOR: f64 = 1e-9;
/// Denominator floor for the discharge ratio.
pub const DISCHARGE_FLOOR: f64 = 1e-12;

const IMAG_RESIDUE_MAX: f64 = 1e-8;
const ERGOTROPY_NEG_TOL: f64 = 1e-9;

/// One time sample of every metric. Absent values are `None`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MetricsRecord {
    pub t: f64,
    pub energy: f64,
    pub ergotropy: f64,
    pub power_b: f64,
    pub power_w: f64,
    pub purity: f64,
    pub coherence_l1: f64,
    pub trace_distance: Option<f64>,
    pub ratio_w_over_e: Option<f64>,
    /// `E_B(t)/E_B(0)`; only filled during discharging.
    pub discharge_ratio: Option<f64>,
}

fn check_dims(rho: &DensityMatrix, dim: usize) -> Result<()> {
    if rho.dim() != dim {
        return Err(Error::DimensionMismatch {
            expected: dim,
            got: rho.dim(),
        });
    }
    Ok(())
}

/// `Tr[H₀ ρ]`.
pub fn energy(rho: &DensityMatrix, h0_normalized: &OperatorMatrix) -> Result<f64> {
    check_dims(rho, h0_normalized.dim())?;
    let h = h0_normalized.entries();
    let r = rho.entries();
    // Tr[Hρ] = Σ_ij H_ij ρ_ji
    let mut acc = Complex64::new(0.0, 0.0);
    for ((i, j), &hij) in h.indexed_iter() {
        if hij.re != 0.0 || hij.im != 0.0 {
            acc += hij * r[[j, i]];
        }
    }
    if acc.im.abs() >= IMAG_RESIDUE_MAX {
        return Err(Error::NumericalCorruption(format!(
            "Tr[Hρ] has imaginary part {:.3e}",
            acc.im
        )));
    }
    Ok(acc.re)
}

/// `Σ_n r_n ε_n` with state eigenvalues `r` descending and energies `ε` ascending.
pub fn passive_energy(rho: &DensityMatrix, spectrum: &SpectrumData) -> f64 {
    passive_energy_from_eigs(&rho.clamped_eigenvalues(), &spectrum.eigenvalues)
}

/// Passive energy from precomputed state eigenvalues (any order).
pub fn passive_energy_from_eigs(state_eigs: &[f64], energies_ascending: &[f64]) -> f64 {
    let mut r = state_eigs.to_vec();
    r.sort_by(|a, b| b.total_cmp(a));
    r.iter().zip(energies_ascending).map(|(p, e)| p * e).sum()
}

/// `E_B − E_passive`, clamped to zero when it undershoots by less than 1e-9.
pub fn ergotropy(rho: &DensityMatrix, h0_normalized: &OperatorMatrix, spectrum: &SpectrumData) -> Result<f64> {
    let e = energy(rho, h0_normalized)?;
    ergotropy_from_parts(e, &rho.clamped_eigenvalues(), spectrum)
}

fn ergotropy_from_parts(energy: f64, state_eigs: &[f64], spectrum: &SpectrumData) -> Result<f64> {
    let w = energy - passive_energy_from_eigs(state_eigs, &spectrum.eigenvalues);
    if w < -ERGOTROPY_NEG_TOL {
        return Err(Error::NumericalCorruption(format!("negative ergotropy {w:.3e}")));
    }
    Ok(w.max(0.0))
}

/// `(E_B/t, 𝒲/t)`, defined as `(0, 0)` at `t = 0`.
pub fn powers(energy: f64, ergotropy: f64, t: f64) -> (f64, f64) {
    if t > 0.0 {
        (energy / t, ergotropy / t)
    } else {
        (0.0, 0.0)
    }
}

/// `Tr[ρ²]`.
pub fn purity(rho: &DensityMatrix) -> f64 {
    // ρ Hermitian: Tr ρ² = Σ_ij |ρ_ij|².
    rho.entries().iter().map(|z| z.norm_sqr()).sum()
}

/// `Σ_{i≠j} |ρ_ij|` in the computational basis.
pub fn coherence_l1(rho: &DensityMatrix) -> f64 {
    rho.entries()
        .indexed_iter()
        .filter(|((i, j), _)| i != j)
        .map(|(_, z)| z.norm())
        .sum()
}

/// `½‖ρ − σ‖₁`.
pub fn trace_distance(rho: &DensityMatrix, sigma: &DensityMatrix) -> Result<f64> {
    check_dims(sigma, rho.dim())?;
    let diff: CMatrix = rho.entries() - sigma.entries();
    Ok(0.5 * linalg::trace_norm_hermitian(&diff))
}

/// `E_B*(t*)/E_B*(0)`; `None` when the initial energy is below 1e-12.
pub fn discharge_ratio(e_released_t: f64, e_at_discharge_start: f64) -> Option<f64> {
    (e_at_discharge_start > DISCHARGE_FLOOR).then(|| e_released_t / e_at_discharge_start)
}

/// `𝒲/E_B` when `E_B > 1e-9`.
pub fn ratio_w_over_e(energy: f64, ergotropy: f64) -> Option<f64> {
    (energy > RATIO_ENERGY_FLOOR).then(|| (ergotropy / energy).clamp(0.0, 1.0))
}

/// Evaluates a full [`MetricsRecord`] for states along one trajectory.
pub struct MetricsEvaluator<'a> {
    h0_normalized: &'a OperatorMatrix,
    spectrum: &'a SpectrumData,
    reference: Option<DensityMatrix>,
    discharge_start: Option<f64>,
}

impl<'a> MetricsEvaluator<'a> {
    /// `spectrum` must be that of `h0_normalized`.
    pub fn new(h0_normalized: &'a OperatorMatrix, spectrum: &'a SpectrumData) -> Self {
        MetricsEvaluator {
            h0_normalized,
            spectrum,
            reference: None,
            discharge_start: None,
        }
    }

    /// Trace distance is measured against this state.
    pub fn with_reference(mut self, reference: DensityMatrix) -> Self {
        self.reference = Some(reference);
        self
    }

    /// Discharge ratio is measured against this initial energy.
    pub fn with_discharge_start(mut self, e0: f64) -> Self {
        self.discharge_start = Some(e0);
        self
    }

    /// `state_eigs`, if given, must be the eigenvalues of `rho`.
    pub fn record(&self, t: f64, rho: &DensityMatrix, state_eigs: Option<&[f64]>) -> Result<MetricsRecord> {
        let eigs = match state_eigs {
            Some(e) => clamp_spectrum(e.to_vec()),
            None => rho.clamped_eigenvalues(),
        };
        let e = energy(rho, self.h0_normalized)?;
        let w = ergotropy_from_parts(e, &eigs, self.spectrum)?;
        let (power_b, power_w) = powers(e, w, t);
        let trace_distance = match &self.reference {
            Some(r) => Some(trace_distance(rho, r)?),
            None => None,
        };
        Ok(MetricsRecord {
            t,
            energy: e,
            ergotropy: w,
            power_b,
            power_w,
            purity: purity(rho),
            coherence_l1: coherence_l1(rho),
            trace_distance,
            ratio_w_over_e: ratio_w_over_e(e, w),
            discharge_ratio: self.discharge_start.and_then(|e0| discharge_ratio(e, e0)),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{build_h0_raw, extremal_state, normalize_h0, Extremal, SpinChainParams};
    use ndarray::array;

    fn c(x: f64) -> Complex64 {
        Complex64::new(x, 0.0)
    }

    fn reference_pair() -> (OperatorMatrix, SpectrumData) {
        let p = SpinChainParams::new(2, 1.0, 0.5, 0.5, 0.2).unwrap();
        let (hn, _) = normalize_h0(&build_h0_raw(&p)).unwrap();
        let spec = SpectrumData::of(&hn);
        (hn, spec)
    }

    fn two_level() -> (OperatorMatrix, SpectrumData) {
        // Energies (0, 1) with |1⟩ the excited level.
        let h = OperatorMatrix::new(array![[c(0.0), c(0.0)], [c(0.0), c(1.0)]], true).unwrap();
        let spec = SpectrumData::of(&h);
        (h, spec)
    }

    #[test]
    fn extremal_energies() {
        let (hn, spec) = reference_pair();
        let (g, _) = extremal_state(&spec, Extremal::Ground);
        let (top, _) = extremal_state(&spec, Extremal::Top);
        assert!(energy(&g, &hn).unwrap().abs() < 1e-12);
        assert!((energy(&top, &hn).unwrap() - 1.0).abs() < 1e-12);
        assert!((ergotropy(&top, &hn, &spec).unwrap() - 1.0).abs() < 1e-12);
        assert!(passive_energy(&g, &spec).abs() < 1e-12);
    }

    #[test]
    fn maximally_mixed_energy_is_mean_level() {
        let (hn, spec) = reference_pair();
        let eta = 1.0625f64.sqrt();
        let raw = [0.05 - eta, -0.55, 0.45, 0.05 + eta];
        let mean: f64 = raw.iter().map(|e| (e - raw[0]) / (2.0 * eta)).sum::<f64>() / 4.0;
        let mixed = DensityMatrix::maximally_mixed(4);
        assert!((energy(&mixed, &hn).unwrap() - mean).abs() < 1e-12);
        assert!((passive_energy(&mixed, &spec) - mean).abs() < 1e-12);
        assert!(ergotropy(&mixed, &hn, &spec).unwrap().abs() < 1e-12);
    }

    #[test]
    fn inverted_two_level_population() {
        let (h, spec) = two_level();
        let rho = DensityMatrix::diagonal(&[0.2, 0.8]).unwrap();
        assert!((passive_energy(&rho, &spec) - 0.2).abs() < 1e-14);
        assert!((ergotropy(&rho, &h, &spec).unwrap() - 0.6).abs() < 1e-14);
        let passive = DensityMatrix::diagonal(&[0.8, 0.2]).unwrap();
        assert_eq!(ergotropy(&passive, &h, &spec).unwrap(), 0.0);
    }

    #[test]
    fn energy_rejects_complex_trace() {
        let h = OperatorMatrix::from_parts(array![[c(0.0), c(1.0)], [c(0.0), c(0.0)]], false);
        let rho = DensityMatrix::from_parts(array![
            [c(0.5), Complex64::new(0.0, 0.5)],
            [Complex64::new(0.0, -0.5), c(0.5)]
        ]);
        assert!(matches!(energy(&rho, &h), Err(Error::NumericalCorruption(_))));
    }

    #[test]
    fn power_examples() {
        assert_eq!(powers(0.8, 0.6, 4.0), (0.2, 0.15));
        assert_eq!(powers(0.8, 0.6, 0.0), (0.0, 0.0));
    }

    #[test]
    fn purity_examples() {
        assert!((purity(&DensityMatrix::diagonal(&[0.25, 0.75]).unwrap()) - 0.625).abs() < 1e-15);
        assert!((purity(&DensityMatrix::maximally_mixed(8)) - 0.125).abs() < 1e-15);
        let s = 0.5f64.sqrt();
        let plus = DensityMatrix::pure(&[c(s), c(s)]).unwrap();
        assert!((purity(&plus) - 1.0).abs() < 1e-15);
    }

    #[test]
    fn coherence_examples() {
        let s = 0.5f64.sqrt();
        let plus = DensityMatrix::pure(&[c(s), c(s)]).unwrap();
        assert!((coherence_l1(&plus) - 1.0).abs() < 1e-15);
        assert_eq!(
            coherence_l1(&DensityMatrix::diagonal(&[0.1, 0.2, 0.3, 0.4]).unwrap()),
            0.0
        );
    }

    #[test]
    fn two_spin_ground_coherence_closed_form() {
        let (_, spec) = reference_pair();
        let (g, _) = extremal_state(&spec, Extremal::Ground);
        let kappa: f64 = 0.25;
        let delta = 1.0 - (1.0 + kappa * kappa).sqrt();
        let expect = 2.0 * (kappa * delta).abs() / (delta * delta + kappa * kappa);
        assert!((coherence_l1(&g) - expect).abs() < 1e-12);
    }

    #[test]
    fn trace_distance_examples() {
        let a = DensityMatrix::diagonal(&[0.7, 0.3]).unwrap();
        let b = DensityMatrix::diagonal(&[0.5, 0.5]).unwrap();
        assert!((trace_distance(&a, &b).unwrap() - 0.2).abs() < 1e-14);
        assert!(trace_distance(&a, &a).unwrap().abs() < 1e-15);
        let up = DensityMatrix::diagonal(&[1.0, 0.0]).unwrap();
        let down = DensityMatrix::diagonal(&[0.0, 1.0]).unwrap();
        assert!((trace_distance(&up, &down).unwrap() - 1.0).abs() < 1e-14);
    }

    #[test]
    fn discharge_ratio_examples() {
        assert_eq!(discharge_ratio(0.7, 0.7), Some(1.0));
        assert_eq!(discharge_ratio(0.0, 0.7), Some(0.0));
        assert_eq!(discharge_ratio(0.1, 0.0), None);
        let g = 0.01;
        for t in [1.0f64, 10.0, 50.0] {
            let r = discharge_ratio((-g * t).exp(), 1.0).unwrap();
            assert!((r - (-g * t).exp()).abs() < 1e-15);
        }
    }

    #[test]
    fn ratio_floor() {
        assert_eq!(ratio_w_over_e(1e-10, 0.0), None);
        assert_eq!(ratio_w_over_e(0.5, 0.25), Some(0.5));
    }

    #[test]
    fn evaluator_fills_all_fields() {
        let (hn, spec) = reference_pair();
        let (top, _) = extremal_state(&spec, Extremal::Top);
        let ev = MetricsEvaluator::new(&hn, &spec)
            .with_reference(top.clone())
            .with_discharge_start(1.0);
        let rec = ev.record(2.0, &top, None).unwrap();
        assert!((rec.energy - 1.0).abs() < 1e-12);
        assert!((rec.power_b - 0.5).abs() < 1e-12);
        assert!(rec.trace_distance.unwrap() < 1e-7);
        assert!((rec.ratio_w_over_e.unwrap() - 1.0).abs() < 1e-12);
        assert!((rec.discharge_ratio.unwrap() - 1.0).abs() < 1e-12);
        let mixed = MetricsEvaluator::new(&hn, &spec)
            .record(0.0, &DensityMatrix::maximally_mixed(4), None)
            .unwrap();
        assert_eq!(mixed.power_b, 0.0);
        assert_eq!(mixed.trace_distance, None);
        assert_eq!(mixed.discharge_ratio, None);
    }
}
