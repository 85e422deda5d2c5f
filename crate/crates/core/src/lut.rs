//! Control-plane sweeps and the phase-to-voltage lookup table.
//!
//! [`sweep_pattern`] evaluates the cell over a `(u_m, u_e)` grid at each
//! frequency. [`build_lut`] then picks, for every target phase bin, the grid
//! point with the largest transmission (lens) or reflection (mirror)
//! magnitude. Selection is exhaustive and deterministic.

use std::f64::consts::PI;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cell::{CellModel, ScatterCoefficient};
use crate::consts::wrap_deg;
use crate::error::{Error, Result};

/// DAC resolution in bits.
pub const DAC_BITS: u32 = 16;
/// DAC full-scale voltage.
pub const DAC_FULL_SCALE: f64 = 10.0;
/// Candidates below this magnitude never win a bin.
const MIN_CANDIDATE: f64 = 1e-12;
/// Largest tolerated fraction of bins without a candidate.
const MAX_FLAGGED_FRACTION: f64 = 0.25;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Mode {
    Lens,
    Mirror,
}

impl Mode {
    /// The coefficient this mode uses.
    pub fn pick(self, c: &ScatterCoefficient) -> Complex64 {
        match self {
            Mode::Lens => c.t_coef,
            Mode::Mirror => c.gamma_coef,
        }
    }
}

/// Voltage to the nearest DAC code, clamped to the converter range.
pub fn voltage_to_code(v: f64) -> u32 {
    let max = ((1u64 << DAC_BITS) - 1) as f64;
    (v / DAC_FULL_SCALE * max).round().clamp(0.0, max) as u32
}

pub fn code_to_voltage(code: u32) -> f64 {
    let max = ((1u64 << DAC_BITS) - 1) as f64;
    code as f64 * DAC_FULL_SCALE / max
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ControlState {
    pub u_m: f64,
    pub u_e: f64,
    pub dac_code_m: u32,
    pub dac_code_e: u32,
}

impl ControlState {
    pub fn new(u_m: f64, u_e: f64) -> Self {
        ControlState {
            u_m,
            u_e,
            dac_code_m: voltage_to_code(u_m),
            dac_code_e: voltage_to_code(u_e),
        }
    }
}

/// `n` evenly spaced values over `[lo, hi]` computed without accumulation.
pub fn linspace(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    match n {
        0 => vec![],
        1 => vec![lo],
        _ => (0..n)
            .map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64)
            .collect(),
    }
}

/// Voltage grid over `[lo, hi]` with the given step.
pub fn voltage_grid(lo: f64, hi: f64, step: f64) -> Result<Vec<f64>> {
    if !(step > 0.0) || hi < lo {
        return Err(Error::Invalid(format!(
            "voltage grid [{lo}, {hi}] step {step}"
        )));
    }
    let n = ((hi - lo) / step + 1e-9).floor() as usize + 1;
    Ok((0..n).map(|i| lo + step * i as f64).collect())
}

/// Coefficients on a `freq × u_m × u_e` grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HuygensPattern {
    pub freqs: Vec<f64>,
    pub u_m: Vec<f64>,
    pub u_e: Vec<f64>,
    /// Row-major: frequency, then `u_m`, then `u_e`.
    pub coefs: Vec<ScatterCoefficient>,
}

impl HuygensPattern {
    pub fn from_parts(
        freqs: Vec<f64>,
        u_m: Vec<f64>,
        u_e: Vec<f64>,
        coefs: Vec<ScatterCoefficient>,
    ) -> Result<Self> {
        if coefs.len() != freqs.len() * u_m.len() * u_e.len() {
            return Err(Error::Invalid(format!(
                "{} coefficients for a {}x{}x{} grid",
                coefs.len(),
                freqs.len(),
                u_m.len(),
                u_e.len()
            )));
        }
        Ok(HuygensPattern {
            freqs,
            u_m,
            u_e,
            coefs,
        })
    }

    pub fn get(&self, fi: usize, i: usize, j: usize) -> &ScatterCoefficient {
        &self.coefs[(fi * self.u_m.len() + i) * self.u_e.len() + j]
    }

    /// All grid points at one frequency as `(i, j, coefficient)`.
    pub fn slice(&self, fi: usize) -> impl Iterator<Item = (usize, usize, &ScatterCoefficient)> {
        let (nm, ne) = (self.u_m.len(), self.u_e.len());
        let base = fi * nm * ne;
        self.coefs[base..base + nm * ne]
            .iter()
            .enumerate()
            .map(move |(k, c)| (k / ne, k % ne, c))
    }

    pub fn freq_index(&self, freq: f64) -> Result<usize> {
        self.freqs
            .iter()
            .position(|&f| (f - freq).abs() <= 1e-9 * freq.abs())
            .ok_or(Error::FreqNotOnGrid(freq))
    }

    pub fn is_empty(&self) -> bool {
        self.coefs.is_empty()
    }
}

/// Evaluates `model` at every grid point. Grid points are independent and run
/// in parallel; the output order is the grid order.
pub fn sweep_pattern(
    model: &CellModel,
    freqs: &[f64],
    u_m: &[f64],
    u_e: &[f64],
) -> Result<HuygensPattern> {
    if freqs.is_empty() || u_m.is_empty() || u_e.is_empty() {
        return Err(Error::EmptyPattern);
    }
    model.validate()?;
    let (nm, ne) = (u_m.len(), u_e.len());
    let coefs = (0..freqs.len() * nm * ne)
        .into_par_iter()
        .map(|k| {
            let (f, vm, ve) = (freqs[k / (nm * ne)], u_m[(k / ne) % nm], u_e[k % ne]);
            model.coefficient(f, vm, ve).map_err(|e| Error::GridPoint {
                freq: f,
                u_m: vm,
                u_e: ve,
                source: Box::new(e),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    HuygensPattern::from_parts(freqs.to_vec(), u_m.to_vec(), u_e.to_vec(), coefs)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LutEntry {
    /// Bin centre (deg).
    pub target_phase: f64,
    pub control: ControlState,
    pub achieved: ScatterCoefficient,
    /// Set when no grid point fell in the bin and the nearest phase was used.
    pub flagged: bool,
}

impl LutEntry {
    pub fn coefficient(&self, mode: Mode) -> Complex64 {
        mode.pick(&self.achieved)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhaseLookupTable {
    pub mode: Mode,
    pub center_freq: f64,
    pub phase_step: f64,
    pub entries: Vec<LutEntry>,
}

fn bin_count(step: f64) -> Result<usize> {
    if !(step > 0.0) {
        return Err(Error::PhaseStep(step));
    }
    let n = (360.0 / step).round();
    if n < 1.0 || (n * step - 360.0).abs() > 1e-9 {
        return Err(Error::PhaseStep(step));
    }
    Ok(n as usize)
}

/// Bin index of `phase_deg` for bins centred at `-180 + k·step`.
pub fn phase_bin(phase_deg: f64, step: f64, n: usize) -> usize {
    let k = ((phase_deg + 180.0) / step).round() as i64;
    k.rem_euclid(n as i64) as usize
}

fn circ_dist(a: f64, b: f64) -> f64 {
    wrap_deg(a - b).abs()
}

impl PhaseLookupTable {
    pub fn bins(&self) -> usize {
        self.entries.len()
    }

    pub fn bin_of(&self, phase_deg: f64) -> usize {
        phase_bin(phase_deg, self.phase_step, self.entries.len())
    }

    /// Entry whose bin contains `phase_deg`.
    pub fn lookup(&self, phase_deg: f64) -> &LutEntry {
        &self.entries[self.bin_of(phase_deg)]
    }

    pub fn flagged_count(&self) -> usize {
        self.entries.iter().filter(|e| e.flagged).count()
    }

    /// Smallest achieved magnitude over all bins.
    pub fn min_magnitude(&self) -> f64 {
        self.entries
            .iter()
            .map(|e| e.coefficient(self.mode).norm())
            .fold(f64::INFINITY, f64::min)
    }

    /// Serialises the table with units, provenance hash and tool version.
    pub fn to_json(&self, config_hash: &str, tool_version: &str) -> String {
        let entries: Vec<LutFileEntry> = self
            .entries
            .iter()
            .map(|e| {
                let c = e.coefficient(self.mode);
                LutFileEntry {
                    target_phase_deg: e.target_phase,
                    u_m_v: e.control.u_m,
                    u_e_v: e.control.u_e,
                    dac_code_m: e.control.dac_code_m,
                    dac_code_e: e.control.dac_code_e,
                    magnitude: c.norm(),
                    phase_deg: c.arg().to_degrees(),
                    t_re: e.achieved.t_coef.re,
                    t_im: e.achieved.t_coef.im,
                    gamma_re: e.achieved.gamma_coef.re,
                    gamma_im: e.achieved.gamma_coef.im,
                    flagged: e.flagged,
                }
            })
            .collect();
        let file = LutFile {
            tool_version: tool_version.to_string(),
            config_hash: config_hash.to_string(),
            mode: self.mode,
            center_freq_hz: self.center_freq,
            phase_step_deg: self.phase_step,
            dac_bits: DAC_BITS,
            dac_full_scale_v: DAC_FULL_SCALE,
            entries,
        };
        serde_json::to_string_pretty(&file).expect("lookup table serialises")
    }

    /// Reads a table written by [`PhaseLookupTable::to_json`].
    pub fn from_json(s: &str) -> Result<Self> {
        let file: LutFile =
            serde_json::from_str(s).map_err(|e| Error::Config(format!("lookup table: {e}")))?;
        bin_count(file.phase_step_deg)?;
        let entries = file
            .entries
            .iter()
            .map(|e| LutEntry {
                target_phase: e.target_phase_deg,
                control: ControlState {
                    u_m: e.u_m_v,
                    u_e: e.u_e_v,
                    dac_code_m: e.dac_code_m,
                    dac_code_e: e.dac_code_e,
                },
                achieved: ScatterCoefficient {
                    t_coef: Complex64::new(e.t_re, e.t_im),
                    gamma_coef: Complex64::new(e.gamma_re, e.gamma_im),
                    freq: file.center_freq_hz,
                },
                flagged: e.flagged,
            })
            .collect();
        Ok(PhaseLookupTable {
            mode: file.mode,
            center_freq: file.center_freq_hz,
            phase_step: file.phase_step_deg,
            entries,
        })
    }
}

#[derive(Debug, Serialize, Deserialize)]
struct LutFile {
    tool_version: String,
    config_hash: String,
    mode: Mode,
    center_freq_hz: f64,
    phase_step_deg: f64,
    dac_bits: u32,
    dac_full_scale_v: f64,
    entries: Vec<LutFileEntry>,
}

#[derive(Debug, Serialize, Deserialize)]
struct LutFileEntry {
    target_phase_deg: f64,
    u_m_v: f64,
    u_e_v: f64,
    dac_code_m: u32,
    dac_code_e: u32,
    magnitude: f64,
    phase_deg: f64,
    t_re: f64,
    t_im: f64,
    gamma_re: f64,
    gamma_im: f64,
    flagged: bool,
}

/// True when candidate `a` beats `b`: larger magnitude, then lower
/// `u_m + u_e`, then lower `u_m`.
fn better(a: (f64, f64, f64), b: (f64, f64, f64)) -> bool {
    let (ma, ua, va) = a;
    let (mb, ub, vb) = b;
    if ma != mb {
        return ma > mb;
    }
    let (sa, sb) = (ua + va, ub + vb);
    if sa != sb {
        return sa < sb;
    }
    ua < ub
}

/// Builds the table for `mode` at `center_freq` from the pattern slice there.
pub fn build_lut(
    pattern: &HuygensPattern,
    mode: Mode,
    center_freq: f64,
    phase_step: f64,
) -> Result<PhaseLookupTable> {
    if pattern.is_empty() {
        return Err(Error::EmptyPattern);
    }
    let n = bin_count(phase_step)?;
    let fi = pattern.freq_index(center_freq)?;

    let mut best: Vec<Option<(usize, usize)>> = vec![None; n];
    let mut candidates = Vec::new();
    for (i, j, c) in pattern.slice(fi) {
        let z = mode.pick(c);
        let mag = z.norm();
        if !(mag >= MIN_CANDIDATE) {
            continue;
        }
        candidates.push((i, j, z.arg().to_degrees(), mag));
        let k = phase_bin(z.arg().to_degrees(), phase_step, n);
        let key = (mag, pattern.u_m[i], pattern.u_e[j]);
        let replace = match best[k] {
            None => true,
            Some((bi, bj)) => {
                let bm = mode.pick(pattern.get(fi, bi, bj)).norm();
                better(key, (bm, pattern.u_m[bi], pattern.u_e[bj]))
            }
        };
        if replace {
            best[k] = Some((i, j));
        }
    }
    if candidates.is_empty() {
        return Err(Error::Coverage {
            flagged: n,
            bins: n,
        });
    }

    let flagged = best.iter().filter(|b| b.is_none()).count();
    if flagged as f64 > MAX_FLAGGED_FRACTION * n as f64 {
        return Err(Error::Coverage { flagged, bins: n });
    }

    let mut entries = Vec::with_capacity(n);
    for (k, b) in best.iter().enumerate() {
        let target = -180.0 + k as f64 * phase_step;
        let ((i, j), flag) = match b {
            Some(ij) => (*ij, false),
            None => {
                let mut pick = candidates[0];
                for &c in &candidates[1..] {
                    let (dc, dp) = (circ_dist(c.2, target), circ_dist(pick.2, target));
                    if dc < dp
                        || (dc == dp
                            && better(
                                (c.3, pattern.u_m[c.0], pattern.u_e[c.1]),
                                (pick.3, pattern.u_m[pick.0], pattern.u_e[pick.1]),
                            ))
                    {
                        pick = c;
                    }
                }
                ((pick.0, pick.1), true)
            }
        };
        entries.push(LutEntry {
            target_phase: target,
            control: ControlState::new(pattern.u_m[i], pattern.u_e[j]),
            achieved: *pattern.get(fi, i, j),
            flagged: flag,
        });
    }
    Ok(PhaseLookupTable {
        mode,
        center_freq,
        phase_step,
        entries,
    })
}

/// Lens and mirror tables built from the same pattern.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModeTables {
    pub lens: PhaseLookupTable,
    pub mirror: PhaseLookupTable,
}

impl ModeTables {
    pub fn build(pattern: &HuygensPattern, center_freq: f64, phase_step: f64) -> Result<Self> {
        Ok(ModeTables {
            lens: build_lut(pattern, Mode::Lens, center_freq, phase_step)?,
            mirror: build_lut(pattern, Mode::Mirror, center_freq, phase_step)?,
        })
    }

    pub fn get(&self, mode: Mode) -> &PhaseLookupTable {
        match mode {
            Mode::Lens => &self.lens,
            Mode::Mirror => &self.mirror,
        }
    }
}

/// Coherent phase-coverage efficiency `Σ C(φ)·e^{-jφ} / 360` over 1° bins,
/// taking the largest-magnitude coefficient in each bin. Empty bins add 0.
pub fn efficiency(pattern: &HuygensPattern, freq_index: usize, mode: Mode) -> Complex64 {
    let mut best: Vec<Option<Complex64>> = vec![None; 360];
    for (_, _, c) in pattern.slice(freq_index) {
        let z = mode.pick(c);
        if !(z.norm() > 0.0) {
            continue;
        }
        let k = phase_bin(z.arg().to_degrees(), 1.0, 360);
        if best[k].is_none_or(|b| z.norm() > b.norm()) {
            best[k] = Some(z);
        }
    }
    let mut sum = Complex64::new(0.0, 0.0);
    for (k, b) in best.iter().enumerate() {
        if let Some(z) = b {
            let phi = (-180.0 + k as f64) * PI / 180.0;
            sum += z * Complex64::from_polar(1.0, -phi);
        }
    }
    sum / 360.0
}

/// Frequency response of every table entry.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BandwidthProfile {
    pub freqs: Vec<f64>,
    /// One curve per entry, aligned with `freqs`.
    pub curves: Vec<Vec<Complex64>>,
    /// Largest phase deviation from the centre value within the window (deg).
    pub max_phase_dev: Vec<f64>,
    /// Half-width of the deviation window (Hz).
    pub window: f64,
}

impl BandwidthProfile {
    pub fn worst_phase_dev(&self) -> f64 {
        self.max_phase_dev.iter().cloned().fold(0.0, f64::max)
    }
}

/// Re-evaluates each stored control state across `freqs`. Deviation is
/// measured against the stored coefficient within `±window` Hz of centre.
pub fn bandwidth_profile(
    model: &CellModel,
    lut: &PhaseLookupTable,
    freqs: &[f64],
    window: f64,
) -> Result<BandwidthProfile> {
    let mut sorted = freqs.to_vec();
    sorted.sort_by(f64::total_cmp);
    let curves = lut
        .entries
        .par_iter()
        .map(|e| {
            sorted
                .iter()
                .map(|&f| {
                    model
                        .coefficient(f, e.control.u_m, e.control.u_e)
                        .map(|c| lut.mode.pick(&c))
                })
                .collect::<Result<Vec<_>>>()
        })
        .collect::<Result<Vec<_>>>()?;
    let max_phase_dev = lut
        .entries
        .iter()
        .zip(&curves)
        .map(|(e, curve)| {
            let c0 = e.coefficient(lut.mode);
            sorted
                .iter()
                .zip(curve)
                .filter(|(f, _)| (**f - lut.center_freq).abs() <= window * (1.0 + 1e-12))
                .map(|(_, c)| (c / c0).arg().to_degrees().abs())
                .fold(0.0, f64::max)
        })
        .collect();
    Ok(BandwidthProfile {
        freqs: sorted,
        curves,
        max_phase_dev,
        window,
    })
}
