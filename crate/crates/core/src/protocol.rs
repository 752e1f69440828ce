//! Charging and discharging experiments, parameter sweeps and the summary
//! statistics read off each run.

use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::integrate::{evolve_with, uniform_grid, IntegratorOptions};
use crate::lindblad::{assemble_collapse, CollapseTerm, NoiseChannel};
use crate::metrics::{MetricsEvaluator, MetricsRecord};
use crate::model::{
    build_h0_raw, build_hc, extremal_state, normalize_h0, Extremal, OperatorMatrix, SpectrumData, SpinChainParams,
};
use crate::state::{DensityMatrix, StateDefects};

/// Drive strength (units of ΔE) at which the N = 2 reference charging run
/// reaches a ratio maximum of 0.89.
pub const CALIBRATED_OMEGA: f64 = 0.9;

/// Absorption rate used for the charging phase of `end_of_charge` discharges.
pub const DEFAULT_PRECHARGE_GAMMA_PLUS: f64 = 0.01;

/// Plateau window as a fraction of the time span.
pub const PLATEAU_FRACTION: f64 = 0.1;
/// A plateau is flagged stable when its drift is below this.
pub const PLATEAU_MAX_DRIFT: f64 = 0.01;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    Charging,
    Discharging,
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Mode::Charging => "charging",
            Mode::Discharging => "discharging",
        })
    }
}

impl FromStr for Mode {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "charging" | "charge" => Ok(Mode::Charging),
            "discharging" | "discharge" => Ok(Mode::Discharging),
            other => Err(Error::Domain(format!("unknown mode `{other}`"))),
        }
    }
}

/// Initial state of a discharging run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DischargeInit {
    /// Highest eigenstate of the normalized battery Hamiltonian.
    TopEigenstate,
    /// Final state of a charging run with the same chain, drive and noise.
    EndOfCharge,
}

impl fmt::Display for DischargeInit {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            DischargeInit::TopEigenstate => "top_eigenstate",
            DischargeInit::EndOfCharge => "end_of_charge",
        })
    }
}

impl FromStr for DischargeInit {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "top_eigenstate" => Ok(DischargeInit::TopEigenstate),
            "end_of_charge" => Ok(DischargeInit::EndOfCharge),
            other => Err(Error::Domain(format!("unknown discharge_init `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ProtocolConfig {
    pub mode: Mode,
    pub chain: SpinChainParams,
    pub omega: f64,
    pub gamma_plus: f64,
    pub gamma_minus: f64,
    /// Usually one channel; several run simultaneously.
    pub noise: Vec<NoiseChannel>,
    pub t_max: f64,
    pub integrator: IntegratorOptions,
    /// Record every `output_stride`-th integration step.
    pub output_stride: usize,
    pub discharge_init: DischargeInit,
    /// Absorption rate of the charging phase behind `EndOfCharge`.
    pub precharge_gamma_plus: f64,
}

impl ProtocolConfig {
    /// Reference charging setup: λ = 0.5, γ = 0.5, J_z = 0.2 with h = 1,
    /// Γ₊ = 0.01 and phase-flip noise at 0.06.
    pub fn reference_charging(n_sites: usize) -> Result<Self> {
        Ok(ProtocolConfig {
            mode: Mode::Charging,
            chain: SpinChainParams::from_lambda(n_sites, 1.0, 0.5, 0.5, 0.2)?,
            omega: CALIBRATED_OMEGA,
            gamma_plus: 0.01,
            gamma_minus: 0.0,
            noise: vec![NoiseChannel::new(crate::lindblad::NoiseAxis::Z, 0.06)?],
            t_max: 20.0,
            integrator: IntegratorOptions::default(),
            output_stride: 10,
            discharge_init: DischargeInit::TopEigenstate,
            precharge_gamma_plus: DEFAULT_PRECHARGE_GAMMA_PLUS,
        })
    }

    /// Reference discharging setup: Γ₋ = 0.01 from the top eigenstate.
    pub fn reference_discharging(n_sites: usize, noise: NoiseChannel) -> Result<Self> {
        Ok(ProtocolConfig {
            mode: Mode::Discharging,
            gamma_plus: 0.0,
            gamma_minus: 0.01,
            noise: vec![noise],
            ..Self::reference_charging(n_sites)?
        })
    }

    pub fn validate(&self) -> Result<()> {
        match self.mode {
            Mode::Charging if self.gamma_minus != 0.0 => {
                return Err(Error::config("protocol.gamma_minus", "must be 0 when charging"));
            }
            Mode::Discharging if self.gamma_plus != 0.0 => {
                return Err(Error::config("protocol.gamma_plus", "must be 0 when discharging"));
            }
            _ => {}
        }
        for (key, v) in [
            ("protocol.gamma_plus", self.gamma_plus),
            ("protocol.gamma_minus", self.gamma_minus),
            ("protocol.omega", self.omega),
            ("protocol.precharge_gamma_plus", self.precharge_gamma_plus),
        ] {
            if !v.is_finite() || v < 0.0 {
                return Err(Error::config(key, format!("must be finite and non-negative, got {v}")));
            }
        }
        for ch in &self.noise {
            if !(0.0..=1.0).contains(&ch.strength) {
                return Err(Error::config(
                    "protocol.noise_strength",
                    format!("must be in [0, 1], got {}", ch.strength),
                ));
            }
        }
        if !(self.t_max > 0.0 && self.t_max.is_finite()) {
            return Err(Error::config(
                "time.t_max",
                format!("must be positive, got {}", self.t_max),
            ));
        }
        if self.output_stride == 0 {
            return Err(Error::config("time.stride", "must be at least 1"));
        }
        self.integrator
            .validate()
            .map_err(|e| Error::config("integrator", e.to_string()))?;
        Ok(())
    }

    /// Output times: every `output_stride · dt` up to `t_max`.
    pub fn time_grid(&self) -> Vec<f64> {
        uniform_grid(self.t_max, self.integrator.dt * self.output_stride as f64)
    }
}

/// The normalized battery Hamiltonian with its spectra.
#[derive(Debug, Clone)]
pub struct Battery {
    pub n_sites: usize,
    pub h0: OperatorMatrix,
    /// Spectrum of the normalized Hamiltonian.
    pub spectrum: SpectrumData,
    /// Spectrum before normalization (ΔE lives here).
    pub raw_spectrum: SpectrumData,
}

impl Battery {
    pub fn new(chain: &SpinChainParams) -> Result<Self> {
        Self::from_raw(&build_h0_raw(chain), chain.n_sites())
    }

    /// From any raw Hermitian battery Hamiltonian on `n_sites` spins.
    pub fn from_raw(h0_raw: &OperatorMatrix, n_sites: usize) -> Result<Self> {
        if h0_raw.dim() != 1 << n_sites {
            return Err(Error::DimensionMismatch {
                expected: 1 << n_sites,
                got: h0_raw.dim(),
            });
        }
        let (h0, raw_spectrum) = normalize_h0(h0_raw)?;
        let spectrum = raw_spectrum.normalized();
        Ok(Battery {
            n_sites,
            h0,
            spectrum,
            raw_spectrum,
        })
    }

    pub fn ground_state(&self) -> (DensityMatrix, bool) {
        extremal_state(&self.spectrum, Extremal::Ground)
    }

    pub fn top_state(&self) -> (DensityMatrix, bool) {
        extremal_state(&self.spectrum, Extremal::Top)
    }
}

/// Worst state defects seen along a trajectory.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TrajectoryHealth {
    pub max_trace_error: f64,
    pub max_hermiticity: f64,
    pub min_eigenvalue: f64,
}

impl Default for TrajectoryHealth {
    fn default() -> Self {
        TrajectoryHealth {
            max_trace_error: 0.0,
            max_hermiticity: 0.0,
            min_eigenvalue: f64::INFINITY,
        }
    }
}

impl TrajectoryHealth {
    fn absorb(&mut self, rho: &DensityMatrix, eigs: &[f64]) {
        let tr: num_complex::Complex64 = rho.entries().diag().iter().sum();
        self.max_trace_error = self.max_trace_error.max((tr - 1.0).norm());
        self.max_hermiticity = self
            .max_hermiticity
            .max(crate::linalg::hermiticity_defect(rho.entries()));
        self.min_eigenvalue = self.min_eigenvalue.min(eigs[0]);
    }

    pub fn as_defects(&self) -> StateDefects {
        StateDefects {
            trace_error: self.max_trace_error,
            hermiticity: self.max_hermiticity,
            min_eigenvalue: self.min_eigenvalue,
        }
    }
}

/// Output of one run.
#[derive(Debug, Clone)]
pub struct Trajectory {
    pub records: Vec<MetricsRecord>,
    pub health: TrajectoryHealth,
    pub warnings: Vec<String>,
    pub final_state: DensityMatrix,
}

struct Setup {
    battery: Battery,
    h_total: OperatorMatrix,
    rho0: DensityMatrix,
    gamma_plus: f64,
    gamma_minus: f64,
    warnings: Vec<String>,
}

fn with_context(cfg: &ProtocolConfig, err: Error) -> Error {
    let noise: Vec<String> = cfg.noise.iter().map(|c| format!("{}={}", c.axis, c.strength)).collect();
    Error::Run {
        context: format!(
            "{} N={} omega={} gamma_plus={} gamma_minus={} noise=[{}]",
            cfg.mode,
            cfg.chain.n_sites(),
            cfg.omega,
            cfg.gamma_plus,
            cfg.gamma_minus,
            noise.join(",")
        ),
        source: Box::new(err),
    }
}

/// Run the protocol selected by `cfg.mode`.
pub fn run(cfg: &ProtocolConfig) -> Result<Trajectory> {
    match cfg.mode {
        Mode::Charging => run_charging(cfg),
        Mode::Discharging => run_discharging(cfg),
    }
}

/// `H = H₀ + H_c`, ground-state start, `Γ₊ σ₊` plus noise on every site.
pub fn run_charging(cfg: &ProtocolConfig) -> Result<Trajectory> {
    if cfg.mode != Mode::Charging {
        return Err(Error::config("protocol.mode", "run_charging needs mode = charging"));
    }
    cfg.validate()?;
    let battery = Battery::new(&cfg.chain)?;
    charge_battery(cfg, battery, cfg.gamma_plus).map_err(|e| with_context(cfg, e))
}

fn charge_battery(cfg: &ProtocolConfig, battery: Battery, gamma_plus: f64) -> Result<Trajectory> {
    let (rho0, degenerate) = battery.ground_state();
    let mut warnings = Vec::new();
    if degenerate {
        warnings.push("degenerate ground state; eigensolver order picked the initial state".into());
    }
    let h_total = battery.h0.add(&build_hc(battery.n_sites, cfg.omega)?)?;
    let setup = Setup {
        battery,
        h_total,
        rho0,
        gamma_plus,
        gamma_minus: 0.0,
        warnings,
    };
    integrate_setup(cfg, setup, Mode::Charging)
}

/// `H = H₀` alone, `Γ₋ σ₋` plus noise on every site; energy is tracked
/// relative to its initial value.
pub fn run_discharging(cfg: &ProtocolConfig) -> Result<Trajectory> {
    if cfg.mode != Mode::Discharging {
        return Err(Error::config(
            "protocol.mode",
            "run_discharging needs mode = discharging",
        ));
    }
    cfg.validate()?;
    let battery = Battery::new(&cfg.chain)?;
    discharge_battery(cfg, battery).map_err(|e| with_context(cfg, e))
}

/// Discharge an arbitrary battery Hamiltonian; for chains outside
/// [`SpinChainParams`] (e.g. a single spin).
pub fn run_discharging_battery(cfg: &ProtocolConfig, battery: Battery) -> Result<Trajectory> {
    discharge_battery(cfg, battery).map_err(|e| with_context(cfg, e))
}

fn discharge_battery(cfg: &ProtocolConfig, battery: Battery) -> Result<Trajectory> {
    let mut warnings = Vec::new();
    let rho0 = match cfg.discharge_init {
        DischargeInit::TopEigenstate => {
            let (rho, degenerate) = battery.top_state();
            if degenerate {
                warnings.push("degenerate top eigenstate; eigensolver order picked the initial state".into());
            }
            rho
        }
        DischargeInit::EndOfCharge => {
            let charge_cfg = ProtocolConfig {
                mode: Mode::Charging,
                gamma_plus: cfg.precharge_gamma_plus,
                gamma_minus: 0.0,
                ..cfg.clone()
            };
            let charged = charge_battery(&charge_cfg, battery.clone(), cfg.precharge_gamma_plus)?;
            warnings.extend(charged.warnings);
            charged.final_state
        }
    };
    let setup = Setup {
        h_total: battery.h0.clone(),
        battery,
        rho0,
        gamma_plus: 0.0,
        gamma_minus: cfg.gamma_minus,
        warnings,
    };
    integrate_setup(cfg, setup, Mode::Discharging)
}

fn integrate_setup(cfg: &ProtocolConfig, setup: Setup, mode: Mode) -> Result<Trajectory> {
    let Setup {
        battery,
        h_total,
        rho0,
        gamma_plus,
        gamma_minus,
        mut warnings,
    } = setup;
    let terms = assemble_collapse(battery.n_sites, gamma_plus, gamma_minus, &cfg.noise)?;
    let mut evaluator = MetricsEvaluator::new(&battery.h0, &battery.spectrum);
    match mode {
        Mode::Charging => evaluator = evaluator.with_reference(rho0.clone()),
        Mode::Discharging => {
            let e0 = crate::metrics::energy(&rho0, &battery.h0)?;
            evaluator = evaluator.with_discharge_start(e0);
        }
    }
    let grid = cfg.time_grid();
    let mut records = Vec::with_capacity(grid.len());
    let mut health = TrajectoryHealth::default();
    let mut clamped = false;
    let mut final_state = None;
    let last = grid.len() - 1;
    evolve_with(&rho0, &h_total, &terms, &grid, &cfg.integrator, |s| {
        health.absorb(s.rho, s.eigenvalues);
        clamped |= s.eigenvalues[0] < 0.0;
        records.push(evaluator.record(s.t, s.rho, Some(s.eigenvalues))?);
        if s.index == last {
            final_state = Some(s.rho.clone());
        }
        Ok(())
    })?;
    if clamped {
        warnings.push(format!(
            "negative state eigenvalues (min {:.3e}) clamped for metric evaluation",
            health.min_eigenvalue
        ));
    }
    Ok(Trajectory {
        records,
        health,
        warnings,
        final_state: final_state.expect("grid has at least one point"),
    })
}

/// Quantities read off one run.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SummaryStats {
    /// Maximum of `𝒲/E_B` over samples where it is defined.
    pub ratio_max: Option<f64>,
    pub t_ratio_max: Option<f64>,
    /// Mean energy over the final 10% of the time span.
    pub e_plateau: f64,
    pub w_plateau: f64,
    pub p_peak: f64,
    pub t_p_peak: f64,
    /// `|E(t_end) − E(window start)| / |e_plateau|`.
    pub plateau_drift: f64,
}

impl SummaryStats {
    pub fn plateau_stable(&self) -> bool {
        self.plateau_drift < PLATEAU_MAX_DRIFT
    }
}

/// Peak and plateau statistics. Ties in maxima go to the earliest time.
pub fn summarize(records: &[MetricsRecord]) -> Result<SummaryStats> {
    let (first, last) = match (records.first(), records.last()) {
        (Some(f), Some(l)) => (f, l),
        _ => return Err(Error::Domain("cannot summarize an empty trajectory".into())),
    };
    let mut ratio: Option<(f64, f64)> = None;
    let mut peak = (f64::NEG_INFINITY, first.t);
    for r in records {
        if let Some(q) = r.ratio_w_over_e {
            if ratio.is_none_or(|(best, _)| q > best) {
                ratio = Some((q, r.t));
            }
        }
        if r.power_b > peak.0 {
            peak = (r.power_b, r.t);
        }
    }
    let window_start = last.t - PLATEAU_FRACTION * (last.t - first.t);
    let window: Vec<&MetricsRecord> = records.iter().filter(|r| r.t >= window_start - 1e-12).collect();
    let n = window.len() as f64;
    let e_plateau = window.iter().map(|r| r.energy).sum::<f64>() / n;
    let w_plateau = window.iter().map(|r| r.ergotropy).sum::<f64>() / n;
    let drift = (last.energy - window[0].energy).abs();
    let plateau_drift = if e_plateau.abs() > 0.0 {
        drift / e_plateau.abs()
    } else if drift == 0.0 {
        0.0
    } else {
        f64::INFINITY
    };
    Ok(SummaryStats {
        ratio_max: ratio.map(|r| r.0),
        t_ratio_max: ratio.map(|r| r.1),
        e_plateau,
        w_plateau,
        p_peak: peak.0,
        t_p_peak: peak.1,
        plateau_drift,
    })
}

/// Hamiltonian and collapse terms that drive the main phase of `cfg`.
pub fn open_system(cfg: &ProtocolConfig) -> Result<(OperatorMatrix, Vec<CollapseTerm>)> {
    cfg.validate()?;
    let battery = Battery::new(&cfg.chain)?;
    let n = battery.n_sites;
    match cfg.mode {
        Mode::Charging => Ok((
            battery.h0.add(&build_hc(n, cfg.omega)?)?,
            assemble_collapse(n, cfg.gamma_plus, 0.0, &cfg.noise)?,
        )),
        Mode::Discharging => Ok((battery.h0, assemble_collapse(n, 0.0, cfg.gamma_minus, &cfg.noise)?)),
    }
}

/// Drive strength in `(lo, hi)` at which the charging run `base` reaches
/// `target` as its ratio maximum, by bisection on `omega`.
///
/// Assumes the ratio maximum grows with the drive over the bracket.
pub fn calibrate_omega(base: &ProtocolConfig, target: f64, lo: f64, hi: f64, tol: f64) -> Result<f64> {
    let ratio_at = |omega: f64| -> Result<f64> {
        let cfg = ProtocolConfig { omega, ..base.clone() };
        summarize(&run_charging(&cfg)?.records)?
            .ratio_max
            .ok_or_else(|| Error::Domain(format!("no ratio maximum at omega = {omega}")))
    };
    let (mut lo, mut hi) = (lo, hi);
    let (r_lo, r_hi) = (ratio_at(lo)?, ratio_at(hi)?);
    if !(r_lo <= target && target <= r_hi) {
        return Err(Error::Domain(format!(
            "target ratio {target} outside [{r_lo}, {r_hi}] reached on omega in [{lo}, {hi}]"
        )));
    }
    while hi - lo > tol {
        let mid = 0.5 * (lo + hi);
        if ratio_at(mid)? < target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepAxis {
    ChainSize,
    NoiseStrength,
}

impl fmt::Display for SweepAxis {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SweepAxis::ChainSize => "chain_size",
            SweepAxis::NoiseStrength => "noise_strength",
        })
    }
}

impl FromStr for SweepAxis {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "chain_size" => Ok(SweepAxis::ChainSize),
            "noise_strength" => Ok(SweepAxis::NoiseStrength),
            other => Err(Error::Domain(format!("unknown sweep axis `{other}`"))),
        }
    }
}

pub const DEFAULT_NOISE_GRID: [f64; 8] = [0.0, 0.01, 0.03, 0.05, 0.07, 0.1, 0.3, 0.5];
pub const DEFAULT_SIZE_GRID: [f64; 7] = [2.0, 3.0, 4.0, 5.0, 6.0, 7.0, 8.0];

/// One sweep point: the config it ran and its outcome.
#[derive(Debug)]
pub struct SweepEntry {
    pub value: f64,
    pub config: ProtocolConfig,
    pub outcome: Result<(SummaryStats, Trajectory)>,
}

/// Config for one sweep value.
pub fn sweep_point(base: &ProtocolConfig, axis: SweepAxis, value: f64) -> Result<ProtocolConfig> {
    let mut cfg = base.clone();
    match axis {
        SweepAxis::ChainSize => {
            if value.fract() != 0.0 || value < 0.0 {
                return Err(Error::config(
                    "sweep.values",
                    format!("chain size must be an integer, got {value}"),
                ));
            }
            cfg.chain = base
                .chain
                .with_sites(value as usize)
                .map_err(|e| Error::config("sweep.values", e.to_string()))?;
        }
        SweepAxis::NoiseStrength => {
            let ch = cfg
                .noise
                .first_mut()
                .ok_or_else(|| Error::config("protocol.noise_axis", "noise sweep needs a noise channel"))?;
            *ch = NoiseChannel::new(ch.axis, value).map_err(|e| Error::config("sweep.values", e.to_string()))?;
        }
    }
    cfg.validate()?;
    Ok(cfg)
}

/// One independent run per value, fanned out over the rayon pool.
///
/// Values are checked up front; a failing run is recorded in its entry
/// and the rest of the sweep continues. Entries come back in input order.
pub fn sweep(base: &ProtocolConfig, axis: SweepAxis, values: &[f64]) -> Result<Vec<SweepEntry>> {
    if values.is_empty() {
        return Err(Error::config("sweep.values", "no values given"));
    }
    let configs = values
        .iter()
        .map(|&v| sweep_point(base, axis, v))
        .collect::<Result<Vec<_>>>()?;
    let outcomes: Vec<Result<(SummaryStats, Trajectory)>> = configs
        .par_iter()
        .map(|cfg| {
            let traj = run(cfg)?;
            let stats = summarize(&traj.records)?;
            Ok((stats, traj))
        })
        .collect();
    Ok(values
        .iter()
        .zip(configs)
        .zip(outcomes)
        .map(|((&value, config), outcome)| SweepEntry { value, config, outcome })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lindblad::NoiseAxis;
    use crate::model::{pauli_site, PauliAxis};

    fn rec(t: f64, energy: f64, ratio: Option<f64>) -> MetricsRecord {
        let (power_b, _) = crate::metrics::powers(energy, energy, t);
        MetricsRecord {
            t,
            energy,
            ergotropy: energy,
            power_b,
            power_w: power_b,
            purity: 1.0,
            coherence_l1: 0.0,
            trace_distance: None,
            ratio_w_over_e: ratio,
            discharge_ratio: None,
        }
    }

    fn short(mut cfg: ProtocolConfig, t_max: f64) -> ProtocolConfig {
        cfg.t_max = t_max;
        cfg
    }

    #[test]
    fn summarize_monotone_ramp_peaks_at_end() {
        let records: Vec<_> = (0..=10)
            .map(|k| rec(k as f64, k as f64 / 10.0, Some(k as f64 / 10.0)))
            .collect();
        let s = summarize(&records).unwrap();
        assert_eq!(s.ratio_max, Some(1.0));
        assert_eq!(s.t_ratio_max, Some(10.0));
    }

    #[test]
    fn summarize_interior_peak_and_earliest_tie() {
        let ratios = [None, Some(0.2), Some(0.9), Some(0.5), Some(0.9), Some(0.1)];
        let records: Vec<_> = ratios.iter().enumerate().map(|(k, &q)| rec(k as f64, 0.5, q)).collect();
        let s = summarize(&records).unwrap();
        assert_eq!(s.ratio_max, Some(0.9));
        assert_eq!(s.t_ratio_max, Some(2.0));
        // P_B = 0.5/t peaks at the first positive time.
        assert_eq!(s.t_p_peak, 1.0);
        assert!(summarize(&[]).is_err());
    }

    #[test]
    fn summarize_plateau_uses_final_window() {
        let records: Vec<_> = (0..=100)
            .map(|k| rec(k as f64 / 10.0, if k >= 90 { 0.8 } else { 0.1 }, None))
            .collect();
        let s = summarize(&records).unwrap();
        assert!((s.e_plateau - 0.8).abs() < 1e-12);
        assert!(s.plateau_stable());
        assert_eq!(s.ratio_max, None);
    }

    #[test]
    fn config_constraints() {
        let mut cfg = ProtocolConfig::reference_charging(2).unwrap();
        cfg.gamma_minus = 0.01;
        assert!(matches!(cfg.validate(), Err(Error::Config { key, .. }) if key == "protocol.gamma_minus"));
        let mut cfg = ProtocolConfig::reference_discharging(2, NoiseChannel::off(NoiseAxis::Z)).unwrap();
        cfg.gamma_plus = 0.01;
        assert!(cfg.validate().is_err());
        let mut cfg = ProtocolConfig::reference_charging(2).unwrap();
        cfg.output_stride = 0;
        assert!(cfg.validate().is_err());
        cfg.output_stride = 1;
        cfg.t_max = 0.0;
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn idle_charger_keeps_ground_state() {
        let mut cfg = short(ProtocolConfig::reference_charging(3).unwrap(), 2.0);
        cfg.gamma_plus = 0.0;
        cfg.omega = 0.0;
        cfg.noise = vec![NoiseChannel::off(NoiseAxis::Z)];
        let traj = run_charging(&cfg).unwrap();
        for r in &traj.records {
            assert!(r.energy.abs() < 1e-12);
            assert!(r.power_b.abs() < 1e-12 && r.power_w.abs() < 1e-12);
        }
        let s = summarize(&traj.records).unwrap();
        assert!(s.p_peak.abs() < 1e-12);
    }

    #[test]
    fn zero_strength_channel_matches_noiseless_baseline() {
        let base = short(ProtocolConfig::reference_charging(3).unwrap(), 3.0);
        let mut quiet = base.clone();
        quiet.noise.clear();
        let reference = run_charging(&quiet).unwrap();
        for axis in NoiseAxis::ALL {
            let mut cfg = base.clone();
            cfg.noise = vec![NoiseChannel::off(axis)];
            let traj = run_charging(&cfg).unwrap();
            assert_eq!(traj.records, reference.records);
        }
    }

    #[test]
    fn single_spin_discharge_decays_exponentially() {
        let h = pauli_site(PauliAxis::Z, 1, 1).unwrap();
        let battery = Battery::from_raw(&h, 1).unwrap();
        let mut cfg = ProtocolConfig::reference_discharging(2, NoiseChannel::off(NoiseAxis::Z)).unwrap();
        cfg.t_max = 50.0;
        cfg.output_stride = 200;
        let traj = run_discharging_battery(&cfg, battery).unwrap();
        for r in &traj.records {
            let expect = (-0.01 * r.t).exp();
            assert!((r.energy - expect).abs() < 1e-9 * expect);
            assert!((r.discharge_ratio.unwrap() - expect).abs() < 1e-9);
        }
    }

    #[test]
    fn closed_discharge_is_constant() {
        let mut cfg = short(
            ProtocolConfig::reference_discharging(3, NoiseChannel::off(NoiseAxis::X)).unwrap(),
            3.0,
        );
        cfg.gamma_minus = 0.0;
        let traj = run_discharging(&cfg).unwrap();
        for r in &traj.records {
            assert!((r.energy - 1.0).abs() < 1e-10);
            assert_eq!(r.trace_distance, None);
        }
    }

    #[test]
    fn end_of_charge_discharge_starts_from_charged_state() {
        let mut cfg = short(
            ProtocolConfig::reference_discharging(2, NoiseChannel::new(NoiseAxis::Z, 0.06).unwrap()).unwrap(),
            2.0,
        );
        cfg.discharge_init = DischargeInit::EndOfCharge;
        let traj = run_discharging(&cfg).unwrap();
        let mut charge = cfg.clone();
        charge.mode = Mode::Charging;
        charge.gamma_plus = cfg.precharge_gamma_plus;
        charge.gamma_minus = 0.0;
        let charged = run_charging(&charge).unwrap();
        let e_end = charged.records.last().unwrap().energy;
        assert!((traj.records[0].energy - e_end).abs() < 1e-12);
        assert_eq!(traj.records[0].discharge_ratio, Some(1.0));
    }

    #[test]
    fn calibration_hits_the_target_ratio() {
        let base = short(ProtocolConfig::reference_charging(2).unwrap(), 5.0);
        let omega = calibrate_omega(&base, 0.8, 0.3, 0.99, 1e-4).unwrap();
        let cfg = ProtocolConfig { omega, ..base.clone() };
        let q = summarize(&run_charging(&cfg).unwrap().records)
            .unwrap()
            .ratio_max
            .unwrap();
        assert!((q - 0.8).abs() < 2e-3, "{omega} -> {q}");
        assert!(calibrate_omega(&base, 1.5, 0.3, 0.99, 1e-4).is_err());
    }

    #[test]
    fn open_system_matches_mode() {
        let charge = ProtocolConfig::reference_charging(2).unwrap();
        let (h, terms) = open_system(&charge).unwrap();
        assert_eq!(h.dim(), 4);
        assert_eq!(terms.len(), 4);
        let discharge = ProtocolConfig::reference_discharging(2, NoiseChannel::off(NoiseAxis::X)).unwrap();
        let (h, terms) = open_system(&discharge).unwrap();
        assert!(h.is_hermitian());
        assert_eq!(terms.len(), 2);
    }

    #[test]
    fn wrong_mode_is_rejected() {
        let cfg = ProtocolConfig::reference_charging(2).unwrap();
        assert!(run_discharging(&cfg).is_err());
    }

    #[test]
    fn sweep_is_keyed_and_deterministic() {
        let base = short(ProtocolConfig::reference_charging(2).unwrap(), 2.0);
        let entries = sweep(&base, SweepAxis::NoiseStrength, &[0.1, 0.1, 0.1]).unwrap();
        let stats: Vec<SummaryStats> = entries.iter().map(|e| e.outcome.as_ref().unwrap().0).collect();
        assert!(stats.windows(2).all(|w| w[0] == w[1]));
        assert!(sweep(&base, SweepAxis::NoiseStrength, &[]).is_err());
        assert!(sweep(&base, SweepAxis::ChainSize, &[2.5]).is_err());
        assert!(sweep(&base, SweepAxis::NoiseStrength, &[2.0]).is_err());

        let sizes = sweep(&base, SweepAxis::ChainSize, &[3.0, 2.0]).unwrap();
        assert_eq!(sizes[0].config.chain.n_sites(), 3);
        assert_eq!(sizes[1].config.chain.n_sites(), 2);
    }
}
