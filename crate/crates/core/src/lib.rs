//! Open-system simulator for Heisenberg XYZ spin-chain quantum batteries.
//!
//! The battery Hamiltonian is normalized to a unit spectral width, so all
//! energies are in units of ΔE and times in units of ħ/ΔE. Dynamics follow
//! a Markovian master equation with local absorption (σ₊), relaxation (σ₋)
//! and Pauli noise (σ_x, σ_y, σ_z) on every site.
//!
//! Module map:
//! - [`model`]: Pauli embeddings, battery and charging Hamiltonians
//! - [`lindblad`] and [`integrate`]: generator assembly and time evolution
//! - [`metrics`]: energy, ergotropy, powers, purity, coherence, trace distance
//! - [`two_spin`]: closed-form N = 2 oracles
//! - [`protocol`]: charging/discharging runs, sweeps and summaries
//! - [`config`], [`output`], [`validate`]: CLI plumbing

pub mod config;
pub mod error;
pub mod integrate;
pub mod linalg;
pub mod lindblad;
pub mod metrics;
pub mod model;
pub mod output;
pub mod protocol;
mod sparse;
pub mod state;
pub mod two_spin;
pub mod validate;

pub use error::{Error, Result};
pub use integrate::{evolve, evolve_with, IntegratorOptions, Method};
pub use lindblad::{assemble_collapse, liouvillian_matrix, master_rhs, CollapseTerm, NoiseAxis, NoiseChannel};
pub use metrics::MetricsRecord;
pub use model::{
    build_h0_raw, build_hc, extremal_state, normalize_h0, pauli_site, OperatorMatrix, PauliAxis, SpectrumData,
    SpinChainParams,
};
pub use protocol::{
    run_charging, run_discharging, summarize, sweep, Battery, DischargeInit, Mode, ProtocolConfig, SummaryStats,
    SweepAxis, Trajectory,
};

pub use state::DensityMatrix;
