//! Time integration of the master equation on a caller-supplied grid.
//!
//! The state is the full density matrix; the Liouvillian is never formed.
//! Each grid interval is covered either by equal RK4 steps no longer than
//! `dt`, or by Dormand–Prince 5(4) steps with error control that land
//! exactly on the grid points.

use ndarray::Array2;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{self, CMatrix};
use crate::lindblad::{CollapseTerm, Generator};
use crate::model::OperatorMatrix;
use crate::state::DensityMatrix;

/// Integration aborts when an output sample is less positive than this.
pub const POSITIVITY_FAILURE: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    FixedRk4,
    AdaptiveRk45,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IntegratorOptions {
    pub method: Method,
    /// Step for RK4; initial step guess for RK45.
    pub dt: f64,
    pub rel_tol: f64,
    pub abs_tol: f64,
    /// Consecutive rejected RK45 steps tolerated before giving up.
    pub max_step_shrink: u32,
}

impl Default for IntegratorOptions {
    fn default() -> Self {
        IntegratorOptions {
            method: Method::FixedRk4,
            dt: 0.005,
            rel_tol: 1e-8,
            abs_tol: 1e-10,
            max_step_shrink: 40,
        }
    }
}

impl IntegratorOptions {
    pub fn rk4(dt: f64) -> Self {
        IntegratorOptions {
            dt,
            ..Default::default()
        }
    }

    pub fn rk45(rel_tol: f64, abs_tol: f64) -> Self {
        IntegratorOptions {
            method: Method::AdaptiveRk45,
            rel_tol,
            abs_tol,
            ..Default::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return Err(Error::Domain(format!("dt must be positive, got {}", self.dt)));
        }
        if self.method == Method::AdaptiveRk45 && !(self.rel_tol > 0.0 && self.abs_tol > 0.0) {
            return Err(Error::Domain("tolerances must be positive".into()));
        }
        if self.max_step_shrink == 0 {
            return Err(Error::Domain("max_step_shrink must be at least 1".into()));
        }
        Ok(())
    }
}

/// One output sample handed to the observer.
pub struct Sample<'a> {
    pub index: usize,
    pub t: f64,
    pub rho: &'a DensityMatrix,
    /// Eigenvalues of `rho`, ascending, computed for the positivity check.
    pub eigenvalues: &'a [f64],
}

/// Integrate and collect every grid sample.
///
/// Each sample holds a full `dim × dim` matrix; prefer [`evolve_with`] for
/// long grids at large N.
pub fn evolve(
    rho0: &DensityMatrix,
    h_total: &OperatorMatrix,
    terms: &[CollapseTerm],
    t_grid: &[f64],
    opts: &IntegratorOptions,
) -> Result<Vec<DensityMatrix>> {
    let mut out = Vec::with_capacity(t_grid.len());
    evolve_with(rho0, h_total, terms, t_grid, opts, |s| {
        out.push(s.rho.clone());
        Ok(())
    })?;
    Ok(out)
}

/// Integrate over `t_grid`, calling `observe` at each grid time (including t = 0).
pub fn evolve_with<F>(
    rho0: &DensityMatrix,
    h_total: &OperatorMatrix,
    terms: &[CollapseTerm],
    t_grid: &[f64],
    opts: &IntegratorOptions,
    mut observe: F,
) -> Result<()>
where
    F: FnMut(&Sample<'_>) -> Result<()>,
{
    opts.validate()?;
    check_grid(t_grid)?;
    let generator = Generator::new(h_total, terms)?;
    if rho0.dim() != generator.dim() {
        return Err(Error::DimensionMismatch {
            expected: generator.dim(),
            got: rho0.dim(),
        });
    }
    let mut stepper = Stepper::new(&generator, opts);
    let mut rho = rho0.entries().as_standard_layout().into_owned();
    let mut t = t_grid[0];
    for (index, &target) in t_grid.iter().enumerate() {
        if index > 0 {
            stepper.advance(&mut rho, t, target)?;
            t = target;
        }
        let state = DensityMatrix::from_parts(rho);
        let eigenvalues = check_sample(&state, t)?;
        observe(&Sample {
            index,
            t,
            rho: &state,
            eigenvalues: &eigenvalues,
        })?;
        rho = state.into_entries();
    }
    Ok(())
}

fn check_grid(t_grid: &[f64]) -> Result<()> {
    match t_grid.first() {
        None => return Err(Error::Domain("empty time grid".into())),
        Some(&t0) if t0 != 0.0 => return Err(Error::Domain(format!("time grid must start at 0, got {t0}"))),
        _ => {}
    }
    if t_grid.windows(2).any(|w| !w[1].is_finite() || w[1] <= w[0]) {
        return Err(Error::Domain("time grid must be strictly increasing".into()));
    }
    Ok(())
}

fn check_sample(state: &DensityMatrix, t: f64) -> Result<Vec<f64>> {
    if state.entries().iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
        return Err(Error::Integration {
            t,
            reason: "non-finite entries".into(),
        });
    }
    let eigenvalues = linalg::eigvalsh(state.entries());
    if eigenvalues[0] < -POSITIVITY_FAILURE {
        return Err(Error::Integration {
            t,
            reason: format!("positivity violated: min eigenvalue {:.3e}", eigenvalues[0]),
        });
    }
    Ok(eigenvalues)
}

/// Uniform grid `0, Δ, 2Δ, …` up to and including `t_max` (to rounding).
pub fn uniform_grid(t_max: f64, spacing: f64) -> Vec<f64> {
    let n = (t_max / spacing + 1e-9).floor() as usize;
    (0..=n).map(|k| k as f64 * spacing).collect()
}

struct Stepper<'g> {
    generator: &'g Generator,
    opts: IntegratorOptions,
    k: [CMatrix; 7],
    tmp: CMatrix,
    scratch: CMatrix,
    next_dt: f64,
}

impl<'g> Stepper<'g> {
    fn new(generator: &'g Generator, opts: &IntegratorOptions) -> Self {
        let n = generator.dim();
        let z = || Array2::<Complex64>::zeros((n, n));
        Stepper {
            generator,
            opts: *opts,
            k: [z(), z(), z(), z(), z(), z(), z()],
            tmp: z(),
            scratch: z(),
            next_dt: opts.dt,
        }
    }

    fn advance(&mut self, rho: &mut CMatrix, t0: f64, t1: f64) -> Result<()> {
        match self.opts.method {
            Method::FixedRk4 => {
                let span = t1 - t0;
                let steps = ((span / self.opts.dt) - 1e-9).ceil().max(1.0) as usize;
                let h = span / steps as f64;
                for _ in 0..steps {
                    self.rk4_step(rho, h);
                }
                Ok(())
            }
            Method::AdaptiveRk45 => self.rk45_advance(rho, t0, t1),
        }
    }

    fn eval(&mut self, stage: usize) {
        let (k, tmp, scratch) = (&mut self.k, &self.tmp, &mut self.scratch);
        self.generator.apply_hermitian_into(tmp, scratch, &mut k[stage]);
    }

    /// `tmp = rho + h Σ_j coef_j k_j`
    fn stage_input(&mut self, rho: &CMatrix, h: f64, coefs: &[(usize, f64)]) {
        self.tmp.assign(rho);
        for &(j, c) in coefs {
            if c != 0.0 {
                self.tmp.scaled_add(Complex64::new(h * c, 0.0), &self.k[j]);
            }
        }
    }

    fn rk4_step(&mut self, rho: &mut CMatrix, h: f64) {
        self.stage_input(rho, h, &[]);
        self.eval(0);
        self.stage_input(rho, h, &[(0, 0.5)]);
        self.eval(1);
        self.stage_input(rho, h, &[(1, 0.5)]);
        self.eval(2);
        self.stage_input(rho, h, &[(2, 1.0)]);
        self.eval(3);
        for (j, c) in [(0, 1.0 / 6.0), (1, 1.0 / 3.0), (2, 1.0 / 3.0), (3, 1.0 / 6.0)] {
            rho.scaled_add(Complex64::new(h * c, 0.0), &self.k[j]);
        }
    }

    fn rk45_advance(&mut self, rho: &mut CMatrix, t0: f64, t1: f64) -> Result<()> {
        // Dormand–Prince 5(4) tableau.
        const A: [&[(usize, f64)]; 6] = [
            &[(0, 1.0 / 5.0)],
            &[(0, 3.0 / 40.0), (1, 9.0 / 40.0)],
            &[(0, 44.0 / 45.0), (1, -56.0 / 15.0), (2, 32.0 / 9.0)],
            &[
                (0, 19372.0 / 6561.0),
                (1, -25360.0 / 2187.0),
                (2, 64448.0 / 6561.0),
                (3, -212.0 / 729.0),
            ],
            &[
                (0, 9017.0 / 3168.0),
                (1, -355.0 / 33.0),
                (2, 46732.0 / 5247.0),
                (3, 49.0 / 176.0),
                (4, -5103.0 / 18656.0),
            ],
            &[
                (0, 35.0 / 384.0),
                (2, 500.0 / 1113.0),
                (3, 125.0 / 192.0),
                (4, -2187.0 / 6784.0),
                (5, 11.0 / 84.0),
            ],
        ];
        // Fifth-order minus embedded fourth-order weights.
        const E: [(usize, f64); 6] = [
            (0, 71.0 / 57600.0),
            (2, -71.0 / 16695.0),
            (3, 71.0 / 1920.0),
            (4, -17253.0 / 339200.0),
            (5, 22.0 / 525.0),
            (6, -1.0 / 40.0),
        ];
        let mut t = t0;
        let mut rejections = 0u32;
        let min_step = 1e-12 * t1.abs().max(1.0);
        while t < t1 {
            let remaining = t1 - t;
            let h = self.next_dt.min(remaining);
            if h < min_step {
                return Err(Error::Integration {
                    t,
                    reason: format!("step size underflow (h = {h:.3e})"),
                });
            }
            self.stage_input(rho, h, &[]);
            self.eval(0);
            for (s, coefs) in A.iter().enumerate() {
                self.stage_input(rho, h, coefs);
                self.eval(s + 1);
            }
            // tmp now holds the fifth-order solution; k[6] its derivative (FSAL).
            let mut err = 0.0_f64;
            let k = &self.k;
            for (idx, (y_new, y_old)) in self.tmp.iter().zip(rho.iter()).enumerate() {
                let mut e = Complex64::new(0.0, 0.0);
                for &(j, c) in &E {
                    e += k[j].as_slice().unwrap()[idx] * c;
                }
                let scale = self.opts.abs_tol + self.opts.rel_tol * y_new.norm().max(y_old.norm());
                err = err.max((e * h).norm() / scale);
            }
            if err <= 1.0 {
                rho.assign(&self.tmp);
                t = if h == remaining { t1 } else { t + h };
                rejections = 0;
                let grow = if err == 0.0 {
                    5.0
                } else {
                    (0.9 * err.powf(-0.2)).clamp(0.2, 5.0)
                };
                // A step clipped to the grid point says nothing about the natural step size.
                if h >= self.next_dt {
                    self.next_dt = h * grow;
                }
            } else {
                rejections += 1;
                if rejections > self.opts.max_step_shrink {
                    return Err(Error::Integration {
                        t,
                        reason: format!("step size underflow after {rejections} rejected steps"),
                    });
                }
                self.next_dt = h * (0.9 * err.powf(-0.2)).clamp(0.1, 1.0);
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lindblad::{assemble_collapse, zero_hamiltonian, CollapseTerm, NoiseAxis, NoiseChannel};
    use crate::model::{pauli_site, PauliAxis};

    fn c(x: f64) -> Complex64 {
        Complex64::new(x, 0.0)
    }

    fn plus_state() -> DensityMatrix {
        DensityMatrix::new(ndarray::array![[c(0.5), c(0.5)], [c(0.5), c(0.5)]]).unwrap()
    }

    #[test]
    fn relaxation_decays_excited_population() {
        let terms = assemble_collapse(1, 0.0, 0.01, &[]).unwrap();
        let rho0 = DensityMatrix::diagonal(&[1.0, 0.0]).unwrap();
        let grid = vec![0.0, 1.0, 10.0, 50.0];
        let traj = evolve(
            &rho0,
            &zero_hamiltonian(2),
            &terms,
            &grid,
            &IntegratorOptions::default(),
        )
        .unwrap();
        for (rho, &t) in traj.iter().zip(&grid) {
            let expect = (-0.01 * t).exp();
            assert!((rho.entries()[[0, 0]].re - expect).abs() / expect < 1e-8);
        }
    }

    #[test]
    fn dephasing_decays_coherence() {
        let gz = 0.3;
        let terms = vec![CollapseTerm {
            rate: gz,
            operator: pauli_site(PauliAxis::Z, 1, 1).unwrap(),
        }];
        let grid = uniform_grid(5.0, 0.5);
        for opts in [IntegratorOptions::default(), IntegratorOptions::rk45(1e-10, 1e-12)] {
            let traj = evolve(&plus_state(), &zero_hamiltonian(2), &terms, &grid, &opts).unwrap();
            for (rho, &t) in traj.iter().zip(&grid) {
                let expect = 0.5 * (-2.0 * gz * t).exp();
                assert!(
                    (rho.entries()[[0, 1]].re - expect).abs() < 1e-9 * expect.max(1e-3),
                    "t={t}"
                );
            }
        }
    }

    #[test]
    fn rejects_bad_grids_and_options() {
        let h = zero_hamiltonian(2);
        let rho = plus_state();
        let opts = IntegratorOptions::default();
        assert!(evolve(&rho, &h, &[], &[], &opts).is_err());
        assert!(evolve(&rho, &h, &[], &[0.5, 1.0], &opts).is_err());
        assert!(evolve(&rho, &h, &[], &[0.0, 1.0, 1.0], &opts).is_err());
        assert!(evolve(&rho, &h, &[], &[0.0, 1.0], &IntegratorOptions::rk4(0.0)).is_err());
        assert!(evolve(&rho, &zero_hamiltonian(4), &[], &[0.0, 1.0], &opts).is_err());
    }

    #[test]
    fn rk45_reports_step_underflow() {
        let mut opts = IntegratorOptions::rk45(1e-300, 1e-300);
        opts.max_step_shrink = 3;
        let terms = assemble_collapse(1, 0.0, 0.0, &[NoiseChannel::new(NoiseAxis::X, 0.5).unwrap()]).unwrap();
        let rho0 = DensityMatrix::diagonal(&[1.0, 0.0]).unwrap();
        let err = evolve(&rho0, &zero_hamiltonian(2), &terms, &[0.0, 1.0], &opts).unwrap_err();
        assert!(err.is_integration_failure(), "{err}");
    }

    #[test]
    fn fixed_steps_are_deterministic() {
        let h = OperatorMatrix::new(PauliAxis::X.matrix(), true).unwrap();
        let terms = assemble_collapse(1, 0.1, 0.0, &[NoiseChannel::new(NoiseAxis::Y, 0.2).unwrap()]).unwrap();
        let rho0 = DensityMatrix::diagonal(&[0.0, 1.0]).unwrap();
        let grid = uniform_grid(3.0, 0.25);
        let a = evolve(&rho0, &h, &terms, &grid, &IntegratorOptions::default()).unwrap();
        let b = evolve(&rho0, &h, &terms, &grid, &IntegratorOptions::default()).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn uniform_grid_includes_endpoint() {
        let g = uniform_grid(1.0, 0.1);
        assert_eq!(g.len(), 11);
        assert!((g[10] - 1.0).abs() < 1e-12);
    }
}
