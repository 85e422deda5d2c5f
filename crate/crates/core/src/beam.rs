//! Column phase synthesis and far-field patterns.
//!
//! Angles are in degrees from broadside. Each column (rib) shares one
//! control pair, so steering happens along the column axis only. A command
//! holds the target phase per column and the table entry chosen for it.

use std::f64::consts::PI;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::consts::{wavelength, wrap_deg};
use crate::error::{Error, Result};
use crate::lut::{ControlState, Mode, PhaseLookupTable};

/// Fitted exponent of the element power pattern.
pub const DEFAULT_Q: f64 = 0.5611;
/// Minimum separation between reported peaks (deg).
pub const PEAK_GUARD_DEG: f64 = 5.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SurfaceArray {
    pub n_cols: usize,
    pub m_rows: usize,
    /// Column (horizontal) spacing in metres.
    pub col_spacing: f64,
    /// Row (vertical) spacing in metres.
    pub row_spacing: f64,
    pub center_freq: f64,
}

impl Default for SurfaceArray {
    fn default() -> Self {
        let f = 24.5e9;
        SurfaceArray {
            n_cols: 76,
            m_rows: 28,
            col_spacing: 2.6e-3,
            row_spacing: wavelength(f) / 3.0,
            center_freq: f,
        }
    }
}

impl SurfaceArray {
    pub fn validate(&self) -> Result<()> {
        if self.n_cols == 0 || self.m_rows == 0 {
            return Err(Error::Invalid(
                "array needs at least one row and column".into(),
            ));
        }
        if !(self.col_spacing > 0.0 && self.row_spacing > 0.0 && self.center_freq > 0.0) {
            return Err(Error::Invalid(
                "array spacings and frequency must be positive".into(),
            ));
        }
        Ok(())
    }

    pub fn wavelength(&self) -> f64 {
        wavelength(self.center_freq)
    }

    pub fn wavenumber(&self) -> f64 {
        2.0 * PI / self.wavelength()
    }

    /// Horizontal aperture (m).
    pub fn width(&self) -> f64 {
        self.n_cols as f64 * self.col_spacing
    }

    /// Vertical aperture (m).
    pub fn height(&self) -> f64 {
        self.m_rows as f64 * self.row_spacing
    }

    /// Area of one meta-atom cell.
    pub fn cell_area(&self) -> f64 {
        self.col_spacing * self.row_spacing
    }

    pub fn area(&self) -> f64 {
        self.width() * self.height()
    }

    /// Largest aperture dimension (m).
    pub fn extent(&self) -> f64 {
        self.width().max(self.height())
    }
}

/// Normalised element power pattern `cos^q θ`, zero beyond 90°.
pub fn element_pattern(theta_deg: f64, q: f64) -> f64 {
    if theta_deg.abs() >= 90.0 {
        return 0.0;
    }
    theta_deg.to_radians().cos().powf(q)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Arm {
    pub angle: f64,
    pub weight: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BeamCommand {
    pub mode: Mode,
    pub arms: Vec<Arm>,
    /// Target phase per column (deg, wrapped).
    pub per_column_phase: Vec<f64>,
    pub controls: Vec<ControlState>,
    /// Coefficient the table achieves per column.
    pub coefficients: Vec<Complex64>,
    /// Requested excitation magnitude per column (max 1).
    pub target_magnitude: Vec<f64>,
}

impl BeamCommand {
    /// RMS of `|requested| - |achieved|` over columns.
    pub fn amplitude_error(&self) -> f64 {
        let n = self.coefficients.len().max(1) as f64;
        let s: f64 = self
            .target_magnitude
            .iter()
            .zip(&self.coefficients)
            .map(|(t, c)| (t - c.norm()).powi(2))
            .sum();
        (s / n).sqrt()
    }
}

/// Continuous column phases (deg, unwrapped) steering to `theta_s`.
pub fn steering_phases(array: &SurfaceArray, theta_s: f64) -> Vec<f64> {
    let inc = -360.0 * array.col_spacing / array.wavelength() * theta_s.to_radians().sin();
    (0..array.n_cols).map(|n| n as f64 * inc).collect()
}

fn check_angle(theta: f64) -> Result<()> {
    if !(theta.abs() < 90.0) {
        return Err(Error::Invalid(format!(
            "angle {theta} deg outside (-90, 90)"
        )));
    }
    Ok(())
}

/// Resolves a per-column complex excitation through the table by phase.
pub fn command_from_excitation(
    lut: &PhaseLookupTable,
    arms: Vec<Arm>,
    excitation: &[Complex64],
) -> BeamCommand {
    let peak = excitation.iter().map(|e| e.norm()).fold(0.0, f64::max);
    let scale = if peak > 0.0 { 1.0 / peak } else { 0.0 };
    let mut cmd = BeamCommand {
        mode: lut.mode,
        arms,
        per_column_phase: Vec::with_capacity(excitation.len()),
        controls: Vec::with_capacity(excitation.len()),
        coefficients: Vec::with_capacity(excitation.len()),
        target_magnitude: Vec::with_capacity(excitation.len()),
    };
    for e in excitation {
        let phase = wrap_deg(e.arg().to_degrees());
        let entry = lut.lookup(phase);
        cmd.per_column_phase.push(phase);
        cmd.controls.push(entry.control);
        cmd.coefficients.push(entry.coefficient(lut.mode));
        cmd.target_magnitude.push(e.norm() * scale);
    }
    cmd
}

/// Single pencil beam towards `theta_s`.
pub fn steering_command(
    array: &SurfaceArray,
    lut: &PhaseLookupTable,
    theta_s: f64,
) -> Result<BeamCommand> {
    check_angle(theta_s)?;
    let exc: Vec<Complex64> = steering_phases(array, theta_s)
        .iter()
        .map(|p| Complex64::from_polar(1.0, p.to_radians()))
        .collect();
    let mut cmd = command_from_excitation(
        lut,
        vec![Arm {
            angle: theta_s,
            weight: 1.0,
        }],
        &exc,
    );
    // Use the exactly wrapped linear phase rather than the round trip
    // through arg() so symmetric commands stay exactly symmetric.
    cmd.per_column_phase = steering_phases(array, theta_s)
        .into_iter()
        .map(wrap_deg)
        .collect();
    Ok(cmd)
}

/// Two-armed beam `e_n = α·e^{jφ1,n} + β·e^{jφ2,n}`, rescaled to max |e_n| = 1.
pub fn multibeam_command(
    array: &SurfaceArray,
    lut: &PhaseLookupTable,
    arms: [Arm; 2],
) -> Result<BeamCommand> {
    let [a, b] = arms;
    check_angle(a.angle)?;
    check_angle(b.angle)?;
    if (a.angle - b.angle).abs() < 1e-9 {
        return Err(Error::CoincidentArms(a.angle));
    }
    if !(a.weight >= 0.0 && b.weight >= 0.0) || a.weight + b.weight == 0.0 {
        return Err(Error::Invalid(
            "arm weights must be non-negative and not both zero".into(),
        ));
    }
    let pa = steering_phases(array, a.angle);
    let pb = steering_phases(array, b.angle);
    let exc: Vec<Complex64> = pa
        .iter()
        .zip(&pb)
        .map(|(x, y)| {
            Complex64::from_polar(a.weight, x.to_radians())
                + Complex64::from_polar(b.weight, y.to_radians())
        })
        .collect();
    Ok(command_from_excitation(lut, arms.to_vec(), &exc))
}

/// Complex far field of a column excitation, incident from `theta_i` and
/// observed at `theta`. Symmetric in the two angles.
pub fn array_field(
    array: &SurfaceArray,
    coefs: &[Complex64],
    theta_i: f64,
    theta: f64,
    q: f64,
) -> Complex64 {
    let fi = element_pattern(theta_i, q);
    let fo = element_pattern(theta, q);
    if fi == 0.0 || fo == 0.0 {
        return Complex64::new(0.0, 0.0);
    }
    let psi = array.wavenumber()
        * array.col_spacing
        * (theta_i.to_radians().sin() + theta.to_radians().sin());
    let mut sum = Complex64::new(0.0, 0.0);
    for (n, c) in coefs.iter().enumerate() {
        sum += c * Complex64::from_polar(1.0, psi * n as f64);
    }
    (fi * fo).sqrt() * sum
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RadiationPattern {
    pub angles: Vec<f64>,
    pub field: Vec<Complex64>,
    /// `20·log10|field|` normalised to a 0 dB peak.
    pub power_db: Vec<f64>,
}

impl RadiationPattern {
    pub fn peak_field(&self) -> f64 {
        self.field.iter().map(|f| f.norm()).fold(0.0, f64::max)
    }

    /// Absolute power `20·log10|field|` at index `i`.
    pub fn abs_db(&self, i: usize) -> f64 {
        20.0 * self.field[i].norm().log10()
    }
}

/// Inclusive angle grid from `start` to `stop`.
pub fn angle_grid(start: f64, stop: f64, step: f64) -> Vec<f64> {
    let n = ((stop - start) / step + 1e-9).floor() as usize + 1;
    (0..n).map(|i| start + step * i as f64).collect()
}

/// Far-field pattern over `angles` for the given column coefficients.
pub fn radiation_pattern(
    array: &SurfaceArray,
    coefs: &[Complex64],
    theta_i: f64,
    angles: &[f64],
    q: f64,
) -> RadiationPattern {
    let field: Vec<Complex64> = angles
        .par_iter()
        .map(|&t| array_field(array, coefs, theta_i, t, q))
        .collect();
    let peak = field.iter().map(|f| f.norm()).fold(0.0, f64::max);
    let power_db = field
        .iter()
        .map(|f| {
            if peak > 0.0 {
                20.0 * (f.norm() / peak).log10()
            } else {
                f64::NEG_INFINITY
            }
        })
        .collect();
    RadiationPattern {
        angles: angles.to_vec(),
        field,
        power_db,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Peak {
    pub angle: f64,
    pub power_db: f64,
}

/// Up to `k` local maxima separated by at least [`PEAK_GUARD_DEG`],
/// strongest first.
pub fn peak_detect(pattern: &RadiationPattern, k: usize) -> Vec<Peak> {
    let p = &pattern.power_db;
    let n = p.len();
    let mut cands: Vec<usize> = (0..n)
        .filter(|&i| {
            p[i].is_finite() && (i == 0 || p[i] >= p[i - 1]) && (i + 1 == n || p[i] > p[i + 1])
        })
        .collect();
    cands.sort_by(|&a, &b| p[b].total_cmp(&p[a]).then(a.cmp(&b)));
    let mut out: Vec<Peak> = Vec::new();
    for i in cands {
        if out.len() >= k {
            break;
        }
        let a = pattern.angles[i];
        if out.iter().all(|q| (q.angle - a).abs() >= PEAK_GUARD_DEG) {
            out.push(Peak {
                angle: a,
                power_db: p[i],
            });
        }
    }
    out
}

/// Analytic grating-lobe-free condition for a steered uniform array.
pub fn grating_lobe_free(d_over_lambda: f64, theta_s: f64) -> bool {
    d_over_lambda <= 1.0 / (1.0 + theta_s.to_radians().sin().abs())
}

/// Brute-force scan of the ideal array factor steered to `theta_s`. Returns
/// the angles of secondary maxima within 3 dB of the main beam that lie more
/// than 10° away from it.
pub fn scan_grating_lobes(array: &SurfaceArray, theta_s: f64) -> Vec<f64> {
    let coefs: Vec<Complex64> = steering_phases(array, theta_s)
        .iter()
        .map(|p| Complex64::from_polar(1.0, p.to_radians()))
        .collect();
    let angles = angle_grid(-90.0, 90.0, 0.1);
    // q = 0 removes the element factor: this is the pure array factor.
    let pat = radiation_pattern(array, &coefs, 0.0, &angles, 0.0);
    peak_detect(&pat, usize::MAX)
        .into_iter()
        .filter(|p| p.power_db > -3.0 && (p.angle - theta_s).abs() > 10.0)
        .map(|p| p.angle)
        .collect()
}
