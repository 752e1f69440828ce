//! TOML run configuration.
//!
//! ```toml
//! [chain]
//! n = 6
//! h = 1.0
//! lambda = 0.5    # J = lambda·|h|; or give j directly
//! gamma = 0.5
//! jz = 0.2
//!
//! [protocol]
//! mode = "charging"
//! omega = 0.9
//! gamma_plus = 0.01
//! noise_axis = "z"
//! noise_strength = 0.06
//!
//! [time]
//! t_max = 20.0
//! dt = 0.005
//! stride = 10
//!
//! [integrator]
//! method = "rk4"
//! ```
//!
//! Unknown sections and keys are rejected. A `[run]` section (written into
//! manifests) is accepted and ignored, so a manifest is itself a config.

use std::collections::BTreeSet;
use std::fmt::Write as _;
use std::path::Path;

use toml::{Table, Value};

use crate::error::{Error, Result};
use crate::integrate::{IntegratorOptions, Method};
use crate::lindblad::{NoiseAxis, NoiseChannel};
use crate::model::SpinChainParams;
use crate::protocol::{DischargeInit, Mode, ProtocolConfig, DEFAULT_PRECHARGE_GAMMA_PLUS};

const SECTIONS: [&str; 5] = ["chain", "protocol", "time", "integrator", "run"];

struct Section<'a> {
    name: &'static str,
    table: Option<&'a Table>,
    seen: BTreeSet<&'a str>,
}

impl<'a> Section<'a> {
    fn new(root: &'a Table, name: &'static str) -> Result<Self> {
        let table = match root.get(name) {
            None => None,
            Some(Value::Table(t)) => Some(t),
            Some(_) => return Err(Error::config(name, "expected a table")),
        };
        Ok(Section {
            name,
            table,
            seen: BTreeSet::new(),
        })
    }

    fn path(&self, key: &str) -> String {
        format!("{}.{}", self.name, key)
    }

    fn raw(&mut self, key: &'a str) -> Option<&'a Value> {
        self.seen.insert(key);
        self.table.and_then(|t| t.get(key))
    }

    fn f64_opt(&mut self, key: &'a str) -> Result<Option<f64>> {
        match self.raw(key) {
            None => Ok(None),
            Some(Value::Float(x)) => Ok(Some(*x)),
            Some(Value::Integer(i)) => Ok(Some(*i as f64)),
            Some(v) => Err(Error::config(
                self.path(key),
                format!("expected a number, got {}", v.type_str()),
            )),
        }
    }

    fn f64_or(&mut self, key: &'a str, default: f64) -> Result<f64> {
        Ok(self.f64_opt(key)?.unwrap_or(default))
    }

    fn f64_req(&mut self, key: &'a str) -> Result<f64> {
        self.f64_opt(key)?
            .ok_or_else(|| Error::config(self.path(key), "missing required key"))
    }

    fn int_opt(&mut self, key: &'a str) -> Result<Option<i64>> {
        match self.raw(key) {
            None => Ok(None),
            Some(Value::Integer(i)) => Ok(Some(*i)),
            Some(v) => Err(Error::config(
                self.path(key),
                format!("expected an integer, got {}", v.type_str()),
            )),
        }
    }

    fn usize_opt(&mut self, key: &'a str) -> Result<Option<usize>> {
        match self.int_opt(key)? {
            None => Ok(None),
            Some(i) => usize::try_from(i)
                .map(Some)
                .map_err(|_| Error::config(self.path(key), format!("must be non-negative, got {i}"))),
        }
    }

    fn str_opt(&mut self, key: &'a str) -> Result<Option<&'a str>> {
        match self.raw(key) {
            None => Ok(None),
            Some(Value::String(s)) => Ok(Some(s.as_str())),
            Some(v) => Err(Error::config(
                self.path(key),
                format!("expected a string, got {}", v.type_str()),
            )),
        }
    }

    fn parsed<T: std::str::FromStr<Err = Error>>(&mut self, key: &'a str) -> Result<Option<T>> {
        match self.str_opt(key)? {
            None => Ok(None),
            Some(s) => s
                .parse()
                .map(Some)
                .map_err(|e: Error| Error::config(self.path(key), e.to_string())),
        }
    }

    /// Reject keys that were never asked for.
    fn finish(self) -> Result<()> {
        if let Some(t) = self.table {
            if let Some(k) = t.keys().find(|k| !self.seen.contains(k.as_str())) {
                return Err(Error::config(self.path(k), "unknown key"));
            }
        }
        Ok(())
    }
}

pub fn method_name(m: Method) -> &'static str {
    match m {
        Method::FixedRk4 => "rk4",
        Method::AdaptiveRk45 => "rk45",
    }
}

fn parse_method(s: &str) -> Result<Method> {
    match s {
        "rk4" | "fixed-rk4" => Ok(Method::FixedRk4),
        "rk45" | "adaptive-rk45" | "dopri5" => Ok(Method::AdaptiveRk45),
        other => Err(Error::Domain(format!(
            "unknown method `{other}` (expected rk4 or rk45)"
        ))),
    }
}

/// Parse a configuration document.
pub fn parse_config(text: &str) -> Result<ProtocolConfig> {
    let root: Table = text
        .parse()
        .map_err(|e: toml::de::Error| Error::config("<document>", e.message().to_string()))?;
    if let Some(k) = root.keys().find(|k| !SECTIONS.contains(&k.as_str())) {
        return Err(Error::config(k.as_str(), "unknown section"));
    }

    let mut chain = Section::new(&root, "chain")?;
    let n = chain
        .usize_opt("n")?
        .ok_or_else(|| Error::config("chain.n", "missing required key"))?;
    let h = chain.f64_or("h", 1.0)?;
    let lambda = chain.f64_opt("lambda")?;
    let j = chain.f64_opt("j")?;
    let gamma = chain.f64_req("gamma")?;
    let jz = chain.f64_or("jz", 0.0)?;
    chain.finish()?;
    let chain = match (lambda, j) {
        (Some(l), None) => SpinChainParams::from_lambda(n, h, l, gamma, jz),
        (None, Some(j)) => SpinChainParams::new(n, h, j, gamma, jz),
        (Some(_), Some(_)) => return Err(Error::config("chain.j", "give either lambda or j, not both")),
        (None, None) => return Err(Error::config("chain.lambda", "missing required key")),
    }
    .map_err(|e| Error::config("chain", e.to_string()))?;

    let mut proto = Section::new(&root, "protocol")?;
    let mode: Mode = proto
        .parsed("mode")?
        .ok_or_else(|| Error::config("protocol.mode", "missing required key"))?;
    let omega = match mode {
        Mode::Charging => proto.f64_req("omega")?,
        Mode::Discharging => proto.f64_or("omega", 0.0)?,
    };
    let gamma_plus = proto.f64_or("gamma_plus", 0.0)?;
    let gamma_minus = proto.f64_or("gamma_minus", 0.0)?;
    let axis: Option<NoiseAxis> = proto.parsed("noise_axis")?;
    let strength = proto.f64_opt("noise_strength")?;
    let discharge_init = proto.parsed("discharge_init")?.unwrap_or(DischargeInit::TopEigenstate);
    let precharge_gamma_plus = proto.f64_or("precharge_gamma_plus", DEFAULT_PRECHARGE_GAMMA_PLUS)?;
    proto.finish()?;
    let noise = match (axis, strength) {
        (Some(axis), s) => vec![NoiseChannel::new(axis, s.unwrap_or(0.0))
            .map_err(|e| Error::config("protocol.noise_strength", e.to_string()))?],
        (None, Some(s)) if s != 0.0 => {
            return Err(Error::config(
                "protocol.noise_axis",
                "required when noise_strength is non-zero",
            ));
        }
        (None, _) => Vec::new(),
    };

    let mut time = Section::new(&root, "time")?;
    let t_max = time.f64_or("t_max", 20.0)?;
    let defaults = IntegratorOptions::default();
    let dt = time.f64_or("dt", defaults.dt)?;
    let stride = time.usize_opt("stride")?.unwrap_or(10);
    time.finish()?;

    let mut integ = Section::new(&root, "integrator")?;
    let method = match integ.str_opt("method")? {
        None => defaults.method,
        Some(s) => parse_method(s).map_err(|e| Error::config("integrator.method", e.to_string()))?,
    };
    let integrator = IntegratorOptions {
        method,
        dt,
        rel_tol: integ.f64_or("rel_tol", defaults.rel_tol)?,
        abs_tol: integ.f64_or("abs_tol", defaults.abs_tol)?,
        max_step_shrink: integ
            .usize_opt("max_step_shrink")?
            .map_or(Ok(defaults.max_step_shrink), u32::try_from)
            .map_err(|_| Error::config("integrator.max_step_shrink", "out of range"))?,
    };
    integ.finish()?;
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(Error::config("time.dt", format!("must be positive, got {dt}")));
    }

    let cfg = ProtocolConfig {
        mode,
        chain,
        omega,
        gamma_plus,
        gamma_minus,
        noise,
        t_max,
        integrator,
        output_stride: stride,
        discharge_init,
        precharge_gamma_plus,
    };
    cfg.validate()?;
    Ok(cfg)
}

pub fn load_config(path: &Path) -> Result<ProtocolConfig> {
    let text =
        std::fs::read_to_string(path).map_err(|e| Error::config("<file>", format!("{}: {e}", path.display())))?;
    parse_config(&text)
}

/// Every resolved parameter as a config document. Floats use the shortest
/// round-trip representation, so parsing the output gives back `cfg`.
pub fn to_toml(cfg: &ProtocolConfig) -> String {
    let c = &cfg.chain;
    let mut s = String::new();
    let _ = writeln!(s, "[chain]");
    let _ = writeln!(s, "n = {}", c.n_sites());
    let _ = writeln!(s, "h = {:?}", c.field_h());
    // lambda only when it reproduces J bit for bit.
    if c.lambda_ratio() * c.field_h().abs() == c.coupling_j() {
        let _ = writeln!(s, "lambda = {:?}", c.lambda_ratio());
    } else {
        let _ = writeln!(s, "j = {:?}", c.coupling_j());
    }
    let _ = writeln!(s, "gamma = {:?}", c.gamma());
    let _ = writeln!(s, "jz = {:?}", c.coupling_jz());
    let _ = writeln!(s, "\n[protocol]");
    let _ = writeln!(s, "mode = \"{}\"", cfg.mode);
    let _ = writeln!(s, "omega = {:?}", cfg.omega);
    let _ = writeln!(s, "gamma_plus = {:?}", cfg.gamma_plus);
    let _ = writeln!(s, "gamma_minus = {:?}", cfg.gamma_minus);
    if let Some(ch) = cfg.noise.first() {
        let _ = writeln!(s, "noise_axis = \"{}\"", ch.axis);
        let _ = writeln!(s, "noise_strength = {:?}", ch.strength);
    }
    let _ = writeln!(s, "discharge_init = \"{}\"", cfg.discharge_init);
    let _ = writeln!(s, "precharge_gamma_plus = {:?}", cfg.precharge_gamma_plus);
    let _ = writeln!(s, "\n[time]");
    let _ = writeln!(s, "t_max = {:?}", cfg.t_max);
    let _ = writeln!(s, "dt = {:?}", cfg.integrator.dt);
    let _ = writeln!(s, "stride = {}", cfg.output_stride);
    let _ = writeln!(s, "\n[integrator]");
    let _ = writeln!(s, "method = \"{}\"", method_name(cfg.integrator.method));
    let _ = writeln!(s, "rel_tol = {:?}", cfg.integrator.rel_tol);
    let _ = writeln!(s, "abs_tol = {:?}", cfg.integrator.abs_tol);
    let _ = writeln!(s, "max_step_shrink = {}", cfg.integrator.max_step_shrink);
    s
}
