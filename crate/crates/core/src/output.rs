//! CSV tables and run manifests.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use crate::config::to_toml;
use crate::error::{Error, Result};
use crate::metrics::MetricsRecord;
use crate::protocol::{ProtocolConfig, SummaryStats, SweepAxis, SweepEntry};

pub const METRICS_HEADER: [&str; 9] = [
    "t",
    "energy",
    "ergotropy",
    "power_b",
    "power_w",
    "purity",
    "coherence_l1",
    "trace_distance",
    "ratio_w_over_e",
];

pub const DISCHARGE_HEADER: [&str; 4] = ["t", "energy", "ergotropy", "discharge_ratio"];

pub const SUMMARY_HEADER: [&str; 11] = [
    "value",
    "status",
    "ratio_max",
    "t_ratio_max",
    "e_plateau",
    "w_plateau",
    "p_peak",
    "t_p_peak",
    "plateau_drift",
    "plateau_stable",
    "error",
];

/// Number of significant digits in every numeric field.
pub const SIGNIFICANT_DIGITS: usize = 12;

/// Round to 12 significant digits and print the shortest decimal that
/// reads back as the rounded value. Non-finite input is an error.
pub fn format_number(x: f64) -> Result<String> {
    if !x.is_finite() {
        return Err(Error::NumericalCorruption(format!("non-finite output value {x}")));
    }
    if x == 0.0 {
        return Ok("0".into());
    }
    let rounded: f64 = format!("{:.*e}", SIGNIFICANT_DIGITS - 1, x)
        .parse()
        .expect("formatted float parses");
    let exp = rounded.abs().log10().floor() as i32;
    Ok(if (-5..16).contains(&exp) {
        format!("{rounded}")
    } else {
        format!("{rounded:e}")
    })
}

fn opt(x: Option<f64>) -> Result<String> {
    x.map_or(Ok(String::new()), format_number)
}

fn csv_writer(path: &Path) -> Result<csv::Writer<fs::File>> {
    csv::Writer::from_path(path).map_err(csv_err)
}

fn csv_err(e: csv::Error) -> Error {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::Io(io),
        other => Error::Io(std::io::Error::other(format!("{other:?}"))),
    }
}

pub fn write_metrics_csv(path: &Path, records: &[MetricsRecord]) -> Result<()> {
    let mut w = csv_writer(path)?;
    w.write_record(METRICS_HEADER).map_err(csv_err)?;
    for r in records {
        let row = [
            format_number(r.t)?,
            format_number(r.energy)?,
            format_number(r.ergotropy)?,
            format_number(r.power_b)?,
            format_number(r.power_w)?,
            format_number(r.purity)?,
            format_number(r.coherence_l1)?,
            opt(r.trace_distance)?,
            opt(r.ratio_w_over_e)?,
        ];
        w.write_record(&row).map_err(csv_err)?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_discharge_csv(path: &Path, records: &[MetricsRecord]) -> Result<()> {
    let mut w = csv_writer(path)?;
    w.write_record(DISCHARGE_HEADER).map_err(csv_err)?;
    for r in records {
        let row = [
            format_number(r.t)?,
            format_number(r.energy)?,
            format_number(r.ergotropy)?,
            opt(r.discharge_ratio)?,
        ];
        w.write_record(&row).map_err(csv_err)?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_summary_csv(path: &Path, entries: &[SweepEntry]) -> Result<()> {
    let mut w = csv_writer(path)?;
    w.write_record(SUMMARY_HEADER).map_err(csv_err)?;
    for e in entries {
        let value = format_number(e.value)?;
        let row: Vec<String> = match &e.outcome {
            Ok((s, _)) => vec![
                value,
                "ok".into(),
                opt(s.ratio_max)?,
                opt(s.t_ratio_max)?,
                format_number(s.e_plateau)?,
                format_number(s.w_plateau)?,
                format_number(s.p_peak)?,
                format_number(s.t_p_peak)?,
                if s.plateau_drift.is_finite() {
                    format_number(s.plateau_drift)?
                } else {
                    String::new()
                },
                s.plateau_stable().to_string(),
                String::new(),
            ],
            Err(err) => {
                let mut row = vec![value, "failed".into()];
                row.extend(std::iter::repeat_n(String::new(), 8));
                row.push(err.to_string());
                row
            }
        };
        w.write_record(&row).map_err(csv_err)?;
    }
    w.flush()?;
    Ok(())
}

/// Everything needed to reproduce and audit one output directory.
#[derive(Debug, Clone)]
pub struct RunManifest {
    pub config: ProtocolConfig,
    pub tool_version: String,
    pub timestamp: String,
    pub wall_time_s: f64,
    pub outputs: Vec<String>,
    pub warnings: Vec<String>,
    pub summary: Option<SummaryStats>,
}

impl RunManifest {
    pub fn new(config: ProtocolConfig) -> Self {
        RunManifest {
            config,
            tool_version: env!("CARGO_PKG_VERSION").to_string(),
            timestamp: chrono::Utc::now().to_rfc3339_opts(chrono::SecondsFormat::Secs, true),
            wall_time_s: 0.0,
            outputs: Vec::new(),
            warnings: Vec::new(),
            summary: None,
        }
    }

    /// Config sections followed by a `[run]` table; loadable as a config.
    pub fn to_toml(&self) -> String {
        let mut s = to_toml(&self.config);
        let quoted = |v: &[String]| v.iter().map(|x| toml_str(x)).collect::<Vec<_>>().join(", ");
        let _ = writeln!(s, "\n[run]");
        let _ = writeln!(s, "tool_version = {}", toml_str(&self.tool_version));
        let _ = writeln!(s, "timestamp = {}", toml_str(&self.timestamp));
        let _ = writeln!(s, "wall_time_s = {:?}", self.wall_time_s);
        let _ = writeln!(s, "outputs = [{}]", quoted(&self.outputs));
        let _ = writeln!(s, "warnings = [{}]", quoted(&self.warnings));
        if let Some(st) = &self.summary {
            if let (Some(q), Some(t)) = (st.ratio_max, st.t_ratio_max) {
                let _ = writeln!(s, "ratio_max = {q:?}");
                let _ = writeln!(s, "t_ratio_max = {t:?}");
            }
            let _ = writeln!(s, "e_plateau = {:?}", st.e_plateau);
            let _ = writeln!(s, "w_plateau = {:?}", st.w_plateau);
            let _ = writeln!(s, "p_peak = {:?}", st.p_peak);
            let _ = writeln!(s, "t_p_peak = {:?}", st.t_p_peak);
            if st.plateau_drift.is_finite() {
                let _ = writeln!(s, "plateau_drift = {:?}", st.plateau_drift);
            }
        }
        s
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        fs::write(path, self.to_toml())?;
        Ok(())
    }
}

fn toml_str(s: &str) -> String {
    toml::Value::from(s).to_string()
}

pub const MANIFEST_FILE: &str = "manifest.toml";
pub const METRICS_FILE: &str = "metrics.csv";
pub const DISCHARGE_FILE: &str = "discharge.csv";
pub const SUMMARY_FILE: &str = "summary.csv";

/// Subdirectory name of one sweep point, e.g. `noise_strength_0.05`.
pub fn sweep_dir_name(axis: SweepAxis, value: f64) -> Result<String> {
    Ok(format!("{axis}_{}", format_number(value)?))
}

/// Output files of one run inside `dir`, relative names.
pub fn run_outputs(cfg: &ProtocolConfig) -> Vec<String> {
    let mut v = vec![METRICS_FILE.to_string()];
    if cfg.mode == crate::protocol::Mode::Discharging {
        v.push(DISCHARGE_FILE.to_string());
    }
    v
}
