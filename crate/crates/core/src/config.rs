//! Run configuration shared by the library entry points and the CLI.
//!
//! Every output records the SHA-256 of the canonical JSON form (sorted
//! keys, no whitespace) so results can be traced to the inputs that made
//! them.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::Value;
use sha2::{Digest, Sha256};

use crate::beam::{SurfaceArray, DEFAULT_Q};
use crate::budget::RadioParams;
use crate::cell::CellModel;
use crate::error::{Error, Result};
use crate::lut::{sweep_pattern, voltage_grid, HuygensPattern, ModeTables};
use crate::protocol::ProtocolConfig;
use crate::scenario::Scenario;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepConfig {
    pub v_min: f64,
    pub v_max: f64,
    pub v_step: f64,
    /// Frequencies (Hz) swept in addition to the LUT centre.
    pub extra_freqs: Vec<f64>,
}

impl Default for SweepConfig {
    fn default() -> Self {
        SweepConfig {
            v_min: 0.0,
            v_max: 10.0,
            v_step: 0.1,
            extra_freqs: Vec::new(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LutConfig {
    pub center_freq: f64,
    pub phase_step: f64,
    /// Half-width of the bandwidth check around the centre (Hz).
    pub bandwidth_window: f64,
}

impl Default for LutConfig {
    fn default() -> Self {
        LutConfig {
            center_freq: 24.5e9,
            phase_step: 15.0,
            bandwidth_window: 100e6,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimConfig {
    /// Scenario file; the bundled office floor is used when absent.
    pub scenario_file: Option<PathBuf>,
    pub trials: usize,
    pub seed: u64,
    pub betas: Vec<f64>,
}

impl Default for SimConfig {
    fn default() -> Self {
        SimConfig {
            scenario_file: None,
            trials: 10_000,
            seed: 7,
            betas: vec![0.0, 0.2, 0.4, 0.6, 0.8, 1.0],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub cell: CellModel,
    pub sweep: SweepConfig,
    pub lut: LutConfig,
    pub array: SurfaceArray,
    /// Element-pattern exponent.
    pub q: f64,
    pub radio: RadioParams,
    pub sim: SimConfig,
    pub protocol: ProtocolConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            cell: CellModel::default(),
            sweep: SweepConfig::default(),
            lut: LutConfig::default(),
            array: SurfaceArray::default(),
            q: DEFAULT_Q,
            radio: RadioParams::default(),
            sim: SimConfig::default(),
            protocol: ProtocolConfig::default(),
        }
    }
}

impl RunConfig {
    pub fn from_json(s: &str) -> Result<Self> {
        let cfg: RunConfig = serde_json::from_str(s).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let s = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        Self::from_json(&s)
    }

    pub fn validate(&self) -> Result<()> {
        let cfg = |m: String| Error::Config(m);
        self.cell.validate().map_err(|e| cfg(e.to_string()))?;
        self.array.validate().map_err(|e| cfg(e.to_string()))?;
        let s = &self.sweep;
        if !(s.v_step > 0.0
            && s.v_min >= self.cell.varactor.v_min
            && s.v_max <= self.cell.varactor.v_max
            && s.v_min < s.v_max)
        {
            return Err(cfg(format!(
                "sweep range [{}, {}] step {} is not valid",
                s.v_min, s.v_max, s.v_step
            )));
        }
        if !(self.lut.center_freq > 0.0 && self.lut.bandwidth_window >= 0.0) {
            return Err(cfg("lut frequencies must be positive".into()));
        }
        let bins = 360.0 / self.lut.phase_step;
        if !(self.lut.phase_step > 0.0 && (bins - bins.round()).abs() < 1e-9) {
            return Err(cfg(format!(
                "phase step {} deg does not divide 360",
                self.lut.phase_step
            )));
        }
        if !(self.q > 0.0) {
            return Err(cfg(format!("q = {} must be positive", self.q)));
        }
        if self.sim.betas.iter().any(|b| !(0.0..=1.0).contains(b)) {
            return Err(cfg("blockage probabilities must lie in [0, 1]".into()));
        }
        Ok(())
    }

    /// Canonical JSON: sorted keys, compact.
    pub fn canonical_json(&self) -> String {
        let v = serde_json::to_value(self).expect("config serializes");
        serde_json::to_string(&v).expect("value serializes")
    }

    pub fn hash(&self) -> String {
        hex::encode(Sha256::digest(self.canonical_json().as_bytes()))
    }

    /// Applies `key=value` where `key` is a dotted path into the JSON form
    /// and `value` is parsed as JSON, falling back to a plain string.
    pub fn set(&mut self, assignment: &str) -> Result<()> {
        let (key, raw) = assignment
            .split_once('=')
            .ok_or_else(|| Error::Config(format!("override `{assignment}` is not key=value")))?;
        let value: Value =
            serde_json::from_str(raw).unwrap_or_else(|_| Value::String(raw.to_string()));
        let mut root = serde_json::to_value(&*self).map_err(|e| Error::Config(e.to_string()))?;
        let mut slot = &mut root;
        for part in key.split('.') {
            slot = match slot {
                Value::Object(map) => map
                    .get_mut(part)
                    .ok_or_else(|| Error::Config(format!("unknown config key `{key}`")))?,
                Value::Array(items) => {
                    let i: usize = part.parse().map_err(|_| {
                        Error::Config(format!("`{part}` in `{key}` is not an index"))
                    })?;
                    let n = items.len();
                    items.get_mut(i).ok_or_else(|| {
                        Error::Config(format!("index {i} out of range ({n}) in `{key}`"))
                    })?
                }
                _ => return Err(Error::Config(format!("`{key}` does not name a field"))),
            };
        }
        *slot = value;
        let next: RunConfig =
            serde_json::from_value(root).map_err(|e| Error::Config(format!("{key}: {e}")))?;
        next.validate()?;
        *self = next;
        Ok(())
    }

    pub fn scenario(&self) -> Result<Scenario> {
        match &self.sim.scenario_file {
            None => Ok(Scenario::bundled()),
            Some(p) => {
                let s = std::fs::read_to_string(p)
                    .map_err(|e| Error::Config(format!("{}: {e}", p.display())))?;
                Scenario::from_json(&s).map_err(|e| Error::Config(e.to_string()))
            }
        }
    }

    /// Frequencies swept for the pattern: LUT centre plus extras, sorted.
    pub fn sweep_freqs(&self) -> Vec<f64> {
        let mut f = vec![self.lut.center_freq];
        f.extend(self.sweep.extra_freqs.iter().copied());
        f.sort_by(f64::total_cmp);
        f.dedup();
        f
    }

    pub fn pattern(&self, freqs: &[f64]) -> Result<HuygensPattern> {
        let v = voltage_grid(self.sweep.v_min, self.sweep.v_max, self.sweep.v_step)?;
        sweep_pattern(&self.cell, freqs, &v, &v)
    }

    pub fn tables(&self) -> Result<(HuygensPattern, ModeTables)> {
        let p = self.pattern(&self.sweep_freqs())?;
        let t = ModeTables::build(&p, self.lut.center_freq, self.lut.phase_step)?;
        Ok((p, t))
    }
}
