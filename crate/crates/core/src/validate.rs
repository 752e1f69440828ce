//! Built-in invariant suite: closed forms against the numerical model,
//! the generic engine against the explicit two-spin generator and the
//! matrix-exponential propagator, and exact single-qubit decay laws.

use std::fmt::Write as _;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::Result;
use crate::integrate::{evolve, evolve_with, uniform_grid, IntegratorOptions};
use crate::linalg::{max_abs_diff, trace_norm_hermitian};
use crate::lindblad::{
    assemble_collapse, expm_propagate, liouvillian_matrix, master_rhs, zero_hamiltonian, CollapseTerm, NoiseAxis,
    NoiseChannel,
};
use crate::metrics::trace_distance;
use crate::model::{
    build_h0_raw, build_hc, extremal_state, normalize_h0, pauli_site, Extremal, OperatorMatrix, PauliAxis,
    SpectrumData, SpinChainParams,
};
use crate::state::{random_density_matrix, DensityMatrix};
use crate::two_spin::{analytic_eigs_2, phase_flip_rhs_2, rho_initial_2, PhaseFlipRates, Polarization, TwoSpinMode};

#[derive(Debug, Clone, PartialEq)]
pub struct CheckOutcome {
    pub name: &'static str,
    pub passed: bool,
    /// Largest observed deviation.
    pub worst: f64,
    pub tolerance: f64,
    pub detail: String,
}

impl CheckOutcome {
    fn judge(name: &'static str, worst: f64, tolerance: f64, detail: String) -> Self {
        CheckOutcome {
            name,
            passed: worst <= tolerance,
            worst,
            tolerance,
            detail,
        }
    }

    fn errored(name: &'static str, tolerance: f64, err: crate::Error) -> Self {
        CheckOutcome {
            name,
            passed: false,
            worst: f64::INFINITY,
            tolerance,
            detail: format!("error: {err}"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SuiteOptions {
    pub seed: u64,
    /// Test hook: perturbs the numerical Hamiltonian so the closed-form
    /// comparison must fail.
    pub inject_fault: bool,
}

impl Default for SuiteOptions {
    fn default() -> Self {
        SuiteOptions {
            seed: 7,
            inject_fault: false,
        }
    }
}

pub const EIGENVALUE_TOL: f64 = 1e-10;
pub const PROJECTOR_TOL: f64 = 1e-12;
pub const RHS_TOL: f64 = 1e-12;
pub const ORACLE_TOL: f64 = 1e-6;
pub const DECAY_REL_TOL: f64 = 1e-8;
pub const CONTRACTIVITY_SLACK: f64 = 1e-9;

/// Two-spin parameters with `h ∈ ±[0.2, 2]`, `J, J_z ∈ [−2, 2]`, `γ ∈ [0, 1]`.
pub fn random_two_spin_params(rng: &mut impl Rng) -> SpinChainParams {
    let sign = if rng.random::<bool>() { 1.0 } else { -1.0 };
    SpinChainParams::new(
        2,
        sign * rng.random_range(0.2..2.0),
        rng.random_range(-2.0..2.0),
        rng.random_range(0.0..=1.0),
        rng.random_range(-2.0..2.0),
    )
    .expect("parameters in range")
}

/// Closed-form eigenvalues against the numerical spectrum of the chain builder.
pub fn eigenvalue_closed_forms(rng: &mut impl Rng, draws: usize, inject_fault: bool) -> CheckOutcome {
    const NAME: &str = "two-spin eigenvalues";
    let mut worst = 0.0_f64;
    for _ in 0..draws {
        let p = random_two_spin_params(rng);
        let mut h = build_h0_raw(&p);
        if inject_fault {
            let mut m = h.into_entries();
            m[[0, 0]] += Complex64::new(1e-6, 0.0);
            h = OperatorMatrix::new(m, true).expect("still Hermitian");
        }
        let numeric = SpectrumData::of(&h).eigenvalues;
        let closed = match analytic_eigs_2(&p) {
            Ok(e) => e.sorted_energies(),
            Err(e) => return CheckOutcome::errored(NAME, EIGENVALUE_TOL, e),
        };
        for (a, b) in numeric.iter().zip(closed) {
            worst = worst.max((a - b).abs());
        }
    }
    CheckOutcome::judge(NAME, worst, EIGENVALUE_TOL, format!("{draws} draws"))
}

/// Closed-form extremal states against numerical projectors: the `δ₋`
/// state against the ground projector and the `δ₊` state against the top
/// projector, on draws where those are non-degenerate outer states.
pub fn initial_state_closed_form(rng: &mut impl Rng, draws: usize) -> CheckOutcome {
    const NAME: &str = "two-spin initial states";
    let mut worst = 0.0_f64;
    let mut accepted = 0;
    let mut attempts = 0;
    while accepted < draws && attempts < 100 * draws {
        attempts += 1;
        let p = random_two_spin_params(rng);
        let Ok(eig) = analytic_eigs_2(&p) else { continue };
        if eig.kappa.abs() < 1e-3 {
            continue;
        }
        let e = eig.sorted_energies();
        let ground_is_outer = eig.eps0 == e[0] && e[1] - e[0] > 1e-3;
        let top_is_outer = eig.eps3 == e[3] && e[3] - e[2] > 1e-3;
        if !(ground_is_outer && top_is_outer) {
            continue;
        }
        let spectrum = SpectrumData::of(&build_h0_raw(&p));
        for (pol, which) in [
            (Polarization::Down, Extremal::Ground),
            (Polarization::Up, Extremal::Top),
        ] {
            let closed = match rho_initial_2(pol, &p) {
                Ok(r) => r,
                Err(e) => return CheckOutcome::errored(NAME, PROJECTOR_TOL, e),
            };
            let (numeric, _) = extremal_state(&spectrum, which);
            worst = worst.max(max_abs_diff(closed.entries(), numeric.entries()));
        }
        accepted += 1;
    }
    let mut out = CheckOutcome::judge(NAME, worst, PROJECTOR_TOL, format!("{accepted} draws"));
    if accepted < draws {
        out.passed = false;
        out.detail = format!("only {accepted} of {draws} usable draws");
    }
    out
}

/// Random two-spin phase-flip setup: parameters, rates and a state.
fn random_phase_flip_case(rng: &mut impl Rng) -> (SpinChainParams, PhaseFlipRates, DensityMatrix) {
    let p = random_two_spin_params(rng);
    let rates = PhaseFlipRates {
        omega: rng.random_range(0.0..1.0),
        gamma_plus: rng.random_range(0.0..0.5),
        gamma_minus: rng.random_range(0.0..0.5),
        gamma_z: rng.random_range(0.0..0.5),
    };
    (p, rates, random_density_matrix(4, rng))
}

/// The explicit two-spin generator against the generic engine, entrywise.
pub fn phase_flip_generator(rng: &mut impl Rng, states: usize) -> CheckOutcome {
    const NAME: &str = "two-spin phase-flip generator";
    let run = |rng: &mut _| -> Result<f64> {
        let mut worst = 0.0_f64;
        for _ in 0..states {
            let (p, rates, rho) = random_phase_flip_case(rng);
            let (h0, _) = normalize_h0(&build_h0_raw(&p))?;
            let dephase = [NoiseChannel::new(NoiseAxis::Z, rates.gamma_z)?];
            for mode in [TwoSpinMode::Charging, TwoSpinMode::Discharging] {
                let (h, terms) = match mode {
                    TwoSpinMode::Charging => (
                        h0.add(&build_hc(2, rates.omega)?)?,
                        assemble_collapse(2, rates.gamma_plus, 0.0, &dephase)?,
                    ),
                    TwoSpinMode::Discharging => (h0.clone(), assemble_collapse(2, 0.0, rates.gamma_minus, &dephase)?),
                };
                let engine = master_rhs(rho.entries(), &h, &terms)?;
                let explicit = phase_flip_rhs_2(rho.entries(), mode, &p, &rates)?;
                worst = worst.max(max_abs_diff(&engine, &explicit));
            }
        }
        Ok(worst)
    };
    match run(rng) {
        Ok(w) => CheckOutcome::judge(NAME, w, RHS_TOL, format!("{states} states x 2 modes")),
        Err(e) => CheckOutcome::errored(NAME, RHS_TOL, e),
    }
}

/// A random open-system setup on `n` sites: chain, drive, every kind of
/// collapse term, and a random initial state.
pub fn random_open_system(rng: &mut impl Rng, n: usize) -> Result<(OperatorMatrix, Vec<CollapseTerm>, DensityMatrix)> {
    let sign = if rng.random::<bool>() { 1.0 } else { -1.0 };
    let chain = SpinChainParams::new(
        n,
        sign * rng.random_range(0.2..2.0),
        rng.random_range(-1.5..1.5),
        rng.random_range(0.0..=1.0),
        rng.random_range(-1.0..1.0),
    )?;
    let (h0, _) = normalize_h0(&build_h0_raw(&chain))?;
    let h = h0.add(&build_hc(n, rng.random_range(0.0..1.0))?)?;
    let axis = NoiseAxis::ALL[rng.random_range(0..3)];
    let noise = [NoiseChannel::new(axis, rng.random_range(0.0..0.5))?];
    let terms = assemble_collapse(n, rng.random_range(0.0..0.5), rng.random_range(0.0..0.5), &noise)?;
    Ok((h, terms, random_density_matrix(1 << n, rng)))
}

/// Largest trace-norm gap between `evolve` and the superoperator
/// exponential over `configs` random setups per size, sampled at
/// `t = 0.5, 1.0, …, 5.0`.
pub fn expm_oracle(rng: &mut impl Rng, sizes: &[usize], configs: usize) -> CheckOutcome {
    const NAME: &str = "expm oracle";
    let times: Vec<f64> = (0..=10).map(|k| 0.5 * k as f64).collect();
    let run = |rng: &mut _| -> Result<f64> {
        let mut worst = 0.0_f64;
        for &n in sizes {
            for _ in 0..configs {
                let (h, terms, rho0) = random_open_system(rng, n)?;
                let traj = evolve(&rho0, &h, &terms, &times, &IntegratorOptions::default())?;
                let oracle = expm_propagate(&liouvillian_matrix(&h, &terms)?, rho0.entries(), &times);
                for (a, b) in traj.iter().zip(&oracle).skip(1) {
                    worst = worst.max(trace_norm_hermitian(&(a.entries() - b)));
                }
            }
        }
        Ok(worst)
    };
    match run(rng) {
        Ok(w) => CheckOutcome::judge(
            NAME,
            w,
            ORACLE_TOL,
            format!("N in {sizes:?}, {configs} configs each, 10 times"),
        ),
        Err(e) => CheckOutcome::errored(NAME, ORACLE_TOL, e),
    }
}

/// Single-qubit dephasing and relaxation against their exact solutions
/// at `t ∈ {1, 10, 50}`; returns the worst relative error of each.
pub fn decay_laws(gamma_z: f64, gamma_minus: f64) -> Result<(f64, f64)> {
    let times = [0.0, 1.0, 10.0, 50.0];
    let opts = IntegratorOptions::default();
    let h = zero_hamiltonian(2);

    let z = CollapseTerm {
        rate: gamma_z,
        operator: pauli_site(PauliAxis::Z, 1, 1)?,
    };
    let plus = DensityMatrix::pure(&[Complex64::new(0.5f64.sqrt(), 0.0), Complex64::new(0.5f64.sqrt(), 0.0)])?;
    let traj = evolve(&plus, &h, &[z], &times, &opts)?;
    let dephasing = traj
        .iter()
        .zip(times)
        .skip(1)
        .map(|(r, t)| {
            let exact = 0.5 * (-2.0 * gamma_z * t).exp();
            (r.entries()[[0, 1]].re - exact).abs() / exact
        })
        .fold(0.0, f64::max);

    let minus = CollapseTerm {
        rate: gamma_minus,
        operator: pauli_site(PauliAxis::Minus, 1, 1)?,
    };
    let excited = DensityMatrix::diagonal(&[1.0, 0.0])?;
    let traj = evolve(&excited, &h, &[minus], &times, &opts)?;
    let relaxation = traj
        .iter()
        .zip(times)
        .skip(1)
        .map(|(r, t)| {
            let exact = (-gamma_minus * t).exp();
            (r.entries()[[0, 0]].re - exact).abs() / exact
        })
        .fold(0.0, f64::max);
    Ok((dephasing, relaxation))
}

fn decay_check() -> CheckOutcome {
    const NAME: &str = "single-qubit decay laws";
    match decay_laws(0.06, 0.01) {
        Ok((d, r)) => CheckOutcome::judge(
            NAME,
            d.max(r),
            DECAY_REL_TOL,
            format!("dephasing {d:.2e}, relaxation {r:.2e}"),
        ),
        Err(e) => CheckOutcome::errored(NAME, DECAY_REL_TOL, e),
    }
}

/// Evolve `pairs` random state pairs under one generator and return the
/// largest step-to-step increase of their trace distance.
pub fn contractivity(
    rng: &mut impl Rng,
    h: &OperatorMatrix,
    terms: &[CollapseTerm],
    pairs: usize,
    t_grid: &[f64],
    opts: &IntegratorOptions,
) -> Result<f64> {
    let mut worst = f64::NEG_INFINITY;
    for _ in 0..pairs {
        let rho = random_density_matrix(h.dim(), rng);
        let sigma = random_density_matrix(h.dim(), rng);
        let mut first = Vec::with_capacity(t_grid.len());
        evolve_with(&rho, h, terms, t_grid, opts, |s| {
            first.push(s.rho.clone());
            Ok(())
        })?;
        let mut prev = f64::INFINITY;
        evolve_with(&sigma, h, terms, t_grid, opts, |s| {
            let d = trace_distance(&first[s.index], s.rho)?;
            worst = worst.max(d - prev);
            prev = d;
            Ok(())
        })?;
    }
    Ok(worst)
}

fn contractivity_check(rng: &mut impl Rng) -> CheckOutcome {
    const NAME: &str = "trace-distance contractivity";
    let run = |rng: &mut _| -> Result<f64> {
        let mut worst = f64::NEG_INFINITY;
        for n in [2, 3] {
            let (h, terms, _) = random_open_system(rng, n)?;
            worst = worst.max(contractivity(
                rng,
                &h,
                &terms,
                5,
                &uniform_grid(3.0, 0.25),
                &IntegratorOptions::default(),
            )?);
        }
        Ok(worst)
    };
    match run(rng) {
        Ok(w) => CheckOutcome::judge(NAME, w, CONTRACTIVITY_SLACK, "N in [2, 3], 5 pairs each".into()),
        Err(e) => CheckOutcome::errored(NAME, CONTRACTIVITY_SLACK, e),
    }
}

/// Run every check with one seeded generator.
pub fn run_suite(opts: &SuiteOptions) -> Vec<CheckOutcome> {
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    vec![
        eigenvalue_closed_forms(&mut rng, 200, opts.inject_fault),
        initial_state_closed_form(&mut rng, 200),
        phase_flip_generator(&mut rng, 50),
        expm_oracle(&mut rng, &[2, 3], 5),
        decay_check(),
        contractivity_check(&mut rng),
    ]
}

pub fn render_table(outcomes: &[CheckOutcome]) -> String {
    let width = outcomes.iter().map(|o| o.name.len()).max().unwrap_or(0);
    let mut s = String::new();
    for o in outcomes {
        let _ = writeln!(
            s,
            "{}  {:<width$}  worst {:>9.3e}  tol {:.0e}  {}",
            if o.passed { "PASS" } else { "FAIL" },
            o.name,
            o.worst,
            o.tolerance,
            o.detail,
        );
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn suite_passes_and_is_seeded() {
        let opts = SuiteOptions::default();
        let a = run_suite(&opts);
        for o in &a {
            assert!(o.passed, "{}", render_table(&a));
        }
        assert_eq!(a, run_suite(&opts));
    }

    #[test]
    fn injected_fault_is_caught() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        assert!(!eigenvalue_closed_forms(&mut rng, 5, true).passed);
    }
}
