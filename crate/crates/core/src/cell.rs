//! Equivalent-circuit model of one tunable Huygens unit cell.
//!
//! A cell pairs a magnetic loop resonator (shunt admittance `y_m`) with an
//! electric resonator (series impedance `z_e`). Each side is a series LC
//! whose capacitance includes a varactor, so two bias voltages `(u_m, u_e)`
//! move the two resonances independently. The sheet immittances give the
//! complex transmission `T` and reflection `Γ` of a normally incident wave.

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::consts::{EPS0, ETA0, MU0};
use crate::error::{Error, Result};

/// Relative reactance below which the magnetic branch is treated as resonant.
pub const POLE_TOLERANCE: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Side {
    Magnetic,
    Electric,
}

/// Loop geometry of one meta-atom side. All lengths in metres.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct UnitCellGeometry {
    /// Mean loop radius.
    pub r: f64,
    /// Trace width.
    pub w: f64,
    /// Gap length.
    pub g: f64,
    /// Copper thickness.
    pub t: f64,
    /// Substrate relative permittivity.
    pub eps_r: f64,
    pub side: Side,
}

impl UnitCellGeometry {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [("R", self.r), ("w", self.w), ("t", self.t)] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::Geometry(format!("{name} = {v} must be positive")));
            }
        }
        // g = 0 is a closed loop: the gap capacitance diverges and the
        // varactor alone sets C.
        if !(self.g >= 0.0 && self.g.is_finite()) {
            return Err(Error::Geometry(format!(
                "g = {} must be non-negative",
                self.g
            )));
        }
        if self.g >= 2.0 * PI * self.r {
            return Err(Error::Geometry(format!(
                "gap {} m exceeds loop circumference {} m",
                self.g,
                2.0 * PI * self.r
            )));
        }
        if !(self.eps_r >= 1.0) {
            return Err(Error::Geometry(format!("eps_r = {} < 1", self.eps_r)));
        }
        Ok(())
    }
}

/// Junction varactor `C(V) = c_j0 / (1 + V/phi_j)^gamma`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VaractorModel {
    pub c_j0: f64,
    pub phi_j: f64,
    pub gamma: f64,
    pub v_min: f64,
    pub v_max: f64,
}

impl VaractorModel {
    pub fn validate(&self) -> Result<()> {
        if !(self.c_j0 > 0.0 && self.phi_j > 0.0 && self.gamma > 0.0) {
            return Err(Error::Invalid(
                "varactor c_j0, phi_j and gamma must be positive".into(),
            ));
        }
        if !(self.v_min < self.v_max) || self.v_min <= -self.phi_j {
            return Err(Error::Invalid(format!(
                "varactor bias range [{}, {}] is not usable",
                self.v_min, self.v_max
            )));
        }
        Ok(())
    }
}

/// Varactor capacitance (F) at `bias` volts.
pub fn varactor_capacitance(model: &VaractorModel, bias: f64) -> Result<f64> {
    if !(bias >= model.v_min && bias <= model.v_max) {
        return Err(Error::BiasOutOfRange {
            bias,
            min: model.v_min,
            max: model.v_max,
        });
    }
    Ok(model.c_j0 / (1.0 + bias / model.phi_j).powf(model.gamma))
}

/// Intermediate quantities of a side's equivalent circuit.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CircuitParts {
    pub eps_eff: f64,
    pub c_gap: f64,
    pub c_surf: f64,
    /// Gap factor `1 - g/(2πR)`.
    pub p: f64,
    pub l_loop: f64,
    /// Electric side only.
    pub l_curve: Option<f64>,
    /// Electric side only.
    pub l_strip: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CircuitParams {
    pub l: f64,
    pub c: f64,
    pub side: Side,
    pub parts: CircuitParts,
}

/// Quasi-static effective permittivity of a trace of width `w`, thickness `t`.
pub fn effective_permittivity(eps_r: f64, t: f64, w: f64) -> f64 {
    (eps_r + 1.0) / 2.0 + (eps_r - 1.0) / 2.0 / (1.0 + 12.0 * t / w).sqrt()
}

/// Parallel-plate gap capacitance plus fringing.
pub fn gap_capacitance(eps: f64, w: f64, t: f64, g: f64) -> f64 {
    eps * w * t / g + eps * (t + w + g)
}

/// Capacitance contributed by the ring conductor itself.
pub fn surface_capacitance(eps: f64, r: f64, w: f64, t: f64, g: f64) -> f64 {
    2.0 * eps * (t + w) / PI * (4.0 * r / g).ln()
}

/// Self inductance of a circular loop of mean radius `r`.
pub fn loop_inductance(r: f64, t: f64, w: f64) -> Result<f64> {
    let arg = 8.0 * r / (t + w);
    let l = MU0 * r * (arg.ln() - 0.5);
    if !(l > 0.0) {
        return Err(Error::Geometry(format!(
            "loop inductance non-positive (8R/(t+w) = {arg})"
        )));
    }
    Ok(l)
}

/// Self inductance of a flat strip of length `l` and width `w`.
pub fn strip_inductance(l: f64, w: f64) -> f64 {
    let u = l / w;
    MU0 * l / (4.0 * PI)
        * (2.0 * u.asinh() + 2.0 * u * (1.0 / u).asinh()
            - 2.0 * (1.0 + u * u).powf(1.5) / (3.0 * u)
            + 2.0 / 3.0 * u * u
            + 2.0 / (3.0 * u))
}

fn fixed_capacitance(geom: &UnitCellGeometry) -> (f64, f64, f64) {
    let eps_eff = effective_permittivity(geom.eps_r, geom.t, geom.w);
    let eps = EPS0 * eps_eff;
    (
        eps_eff,
        gap_capacitance(eps, geom.w, geom.t, geom.g),
        surface_capacitance(eps, geom.r, geom.w, geom.t, geom.g),
    )
}

fn series(a: f64, b: f64) -> f64 {
    1.0 / (1.0 / a + 1.0 / b)
}

/// Magnetic-side loop resonator.
pub fn magnetic_circuit(geom: &UnitCellGeometry, c_var: f64) -> Result<CircuitParams> {
    if geom.side != Side::Magnetic {
        return Err(Error::Invalid(
            "magnetic_circuit needs a magnetic geometry".into(),
        ));
    }
    geom.validate()?;
    if !(c_var > 0.0) {
        return Err(Error::Invalid(format!("c_var = {c_var} must be positive")));
    }
    let (eps_eff, c_gap, c_surf) = fixed_capacitance(geom);
    let p = 1.0 - geom.g / (2.0 * PI * geom.r);
    let l_loop = loop_inductance(geom.r, geom.t, geom.w)?;
    Ok(CircuitParams {
        l: p * l_loop,
        c: series(c_gap + c_surf, c_var),
        side: Side::Magnetic,
        parts: CircuitParts {
            eps_eff,
            c_gap,
            c_surf,
            p,
            l_loop,
            l_curve: None,
            l_strip: None,
        },
    })
}

/// Electric-side resonator: two half loops joined by a central strip.
pub fn electric_circuit(geom: &UnitCellGeometry, c_var: f64) -> Result<CircuitParams> {
    if geom.side != Side::Electric {
        return Err(Error::Invalid(
            "electric_circuit needs an electric geometry".into(),
        ));
    }
    geom.validate()?;
    if !(c_var > 0.0) {
        return Err(Error::Invalid(format!("c_var = {c_var} must be positive")));
    }
    let (eps_eff, c_gap, c_surf) = fixed_capacitance(geom);
    let p = 1.0 - geom.g / (2.0 * PI * geom.r);
    let l_loop = loop_inductance(geom.r, geom.t, geom.w)?;
    let l_curve = p * l_loop / 2.0;
    let l_strip = strip_inductance(2.0 * geom.r, geom.w);
    Ok(CircuitParams {
        l: l_curve / 2.0 + l_strip,
        c: series(2.0 * (c_gap + c_surf), c_var),
        side: Side::Electric,
        parts: CircuitParts {
            eps_eff,
            c_gap,
            c_surf,
            p,
            l_loop,
            l_curve: Some(l_curve),
            l_strip: Some(l_strip),
        },
    })
}

/// Series LC resonance `1/(2π√(LC))` in Hz.
pub fn resonant_frequency(params: &CircuitParams) -> f64 {
    1.0 / (2.0 * PI * (params.l * params.c).sqrt())
}

/// Which immittance expressions to evaluate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum ImpedanceFormula {
    /// Series-LC impedance and its reciprocal admittance.
    #[default]
    Canonical,
    /// Alternative forms without the dimensional correction, kept for audit.
    Uncorrected,
}

/// Magnetic sheet admittance; `Pole` marks exact series resonance.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Admittance {
    Finite(Complex64),
    Pole,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SurfaceImmittance {
    pub z_e: Complex64,
    pub y_m: Admittance,
    pub eta: f64,
}

/// Sheet impedance of the electric side and admittance of the magnetic side.
pub fn surface_immittance(
    f_op: f64,
    elec: &CircuitParams,
    mag: &CircuitParams,
    mode: ImpedanceFormula,
) -> Result<SurfaceImmittance> {
    if !(f_op > 0.0 && f_op.is_finite()) {
        return Err(Error::Invalid(format!("operating frequency {f_op} Hz")));
    }
    let w = 2.0 * PI * f_op;
    let j = Complex64::i();
    let (z_e, y_m) = match mode {
        ImpedanceFormula::Canonical => {
            let z_e = j * (w * elec.l - 1.0 / (w * elec.c));
            let xl = w * mag.l;
            let xc = 1.0 / (w * mag.c);
            let x = xl - xc;
            let y_m = if x.abs() <= POLE_TOLERANCE * xl.max(xc) {
                Admittance::Pole
            } else {
                Admittance::Finite(Complex64::new(0.0, -1.0 / x))
            };
            (z_e, y_m)
        }
        ImpedanceFormula::Uncorrected => {
            let z_e = j * (w * elec.c - 1.0) / (w * w * elec.l * elec.c);
            let y_m = j * (1.0 - w * w * mag.l * mag.c) / (w * mag.c);
            (z_e, Admittance::Finite(y_m))
        }
    };
    Ok(SurfaceImmittance {
        z_e,
        y_m,
        eta: ETA0,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScatterCoefficient {
    pub t_coef: Complex64,
    pub gamma_coef: Complex64,
    pub freq: f64,
}

/// Transmission and reflection of a sheet with the given immittances.
pub fn scatter_coefficients(imm: &SurfaceImmittance, freq: f64) -> Result<ScatterCoefficient> {
    let y_m = match imm.y_m {
        Admittance::Finite(y) => y,
        Admittance::Pole => return Err(Error::Pole { freq }),
    };
    let eta = imm.eta;
    let z = imm.z_e;
    let den = (2.0 + y_m * eta) * (2.0 + z / eta);
    if den.norm() < 1e-30 {
        return Err(Error::Singular(den.norm()));
    }
    Ok(ScatterCoefficient {
        t_coef: (4.0 - y_m * z) / den,
        gamma_coef: 2.0 * (z / eta - y_m * eta) / den,
        freq,
    })
}

/// A complete two-sided cell with its varactor and evaluation options.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CellModel {
    pub magnetic: UnitCellGeometry,
    pub electric: UnitCellGeometry,
    pub varactor: VaractorModel,
    #[serde(default)]
    pub formula: ImpedanceFormula,
    /// Scattered-to-incident power ratio; 1 is lossless.
    #[serde(default = "unit")]
    pub insertion_efficiency: f64,
}

fn unit() -> f64 {
    1.0
}

impl Default for CellModel {
    fn default() -> Self {
        let t = 35e-6;
        let eps_r = 3.55;
        CellModel {
            magnetic: UnitCellGeometry {
                r: 3.166e-3,
                w: 65e-6,
                g: 150e-6,
                t,
                eps_r,
                side: Side::Magnetic,
            },
            electric: UnitCellGeometry {
                r: 4.410e-3,
                w: 65e-6,
                g: 40e-6,
                t,
                eps_r,
                side: Side::Electric,
            },
            varactor: VaractorModel {
                c_j0: 64e-15,
                phi_j: 1.3,
                gamma: 2.3,
                v_min: 0.0,
                v_max: 10.0,
            },
            formula: ImpedanceFormula::Canonical,
            insertion_efficiency: 1.0,
        }
    }
}

impl CellModel {
    pub fn validate(&self) -> Result<()> {
        if self.magnetic.side != Side::Magnetic || self.electric.side != Side::Electric {
            return Err(Error::Invalid("cell sides are swapped".into()));
        }
        self.magnetic.validate()?;
        self.electric.validate()?;
        self.varactor.validate()?;
        if !(self.insertion_efficiency > 0.0 && self.insertion_efficiency <= 1.0) {
            return Err(Error::Invalid(format!(
                "insertion efficiency {} outside (0, 1]",
                self.insertion_efficiency
            )));
        }
        Ok(())
    }

    pub fn circuits(&self, u_m: f64, u_e: f64) -> Result<(CircuitParams, CircuitParams)> {
        let mag = magnetic_circuit(&self.magnetic, varactor_capacitance(&self.varactor, u_m)?)?;
        let elec = electric_circuit(&self.electric, varactor_capacitance(&self.varactor, u_e)?)?;
        Ok((mag, elec))
    }

    /// Coefficients at one frequency and bias pair.
    pub fn coefficient(&self, freq: f64, u_m: f64, u_e: f64) -> Result<ScatterCoefficient> {
        let (mag, elec) = self.circuits(u_m, u_e)?;
        let imm = surface_immittance(freq, &elec, &mag, self.formula)?;
        let mut sc = scatter_coefficients(&imm, freq)?;
        if self.insertion_efficiency != 1.0 {
            let a = self.insertion_efficiency.sqrt();
            sc.t_coef *= a;
            sc.gamma_coef *= a;
        }
        Ok(sc)
    }

    /// Magnetic and electric resonances (Hz) at the given biases.
    pub fn resonances(&self, u_m: f64, u_e: f64) -> Result<(f64, f64)> {
        let (mag, elec) = self.circuits(u_m, u_e)?;
        Ok((resonant_frequency(&mag), resonant_frequency(&elec)))
    }
}

/// Finds the loop radius at which `side` resonates at `target_freq` for
/// capacitance `c_var`, by bisection over `[r_lo, r_hi]`.
pub fn calibrate_radius(
    geom: &UnitCellGeometry,
    c_var: f64,
    target_freq: f64,
    r_lo: f64,
    r_hi: f64,
) -> Result<f64> {
    let f_at = |r: f64| -> Result<f64> {
        let g = UnitCellGeometry { r, ..*geom };
        let p = match geom.side {
            Side::Magnetic => magnetic_circuit(&g, c_var)?,
            Side::Electric => electric_circuit(&g, c_var)?,
        };
        Ok(resonant_frequency(&p))
    };
    let (mut lo, mut hi) = (r_lo, r_hi);
    let (f_lo, f_hi) = (f_at(lo)?, f_at(hi)?);
    if !(f_lo > target_freq && f_hi < target_freq) {
        return Err(Error::Invalid(format!(
            "target {target_freq} Hz not bracketed by radii [{r_lo}, {r_hi}] m"
        )));
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if f_at(mid)? > target_freq {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo < 1e-15 {
            break;
        }
    }
    Ok(0.5 * (lo + hi))
}
