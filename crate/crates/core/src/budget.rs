//! Link budgets for direct and surface-relayed links.
//!
//! Public functions take and return dB/dBm; internal sums are linear watts.
//! The surface is a grid of meta-atoms, each modelled as an aperture of
//! gain `(4π/λ²)·x·y·F(θ)` that captures and re-radiates power.

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::beam::{element_pattern, SurfaceArray};
use crate::consts::{from_db, to_db, wavelength};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RadioParams {
    pub p_t_dbm: f64,
    pub g_t_dbi: f64,
    pub g_r_dbi: f64,
    pub freq: f64,
    pub noise_floor_dbm: f64,
}

impl Default for RadioParams {
    fn default() -> Self {
        RadioParams {
            p_t_dbm: 6.0,
            g_t_dbi: 25.0,
            g_r_dbi: 15.0,
            freq: 24.5e9,
            noise_floor_dbm: -80.0,
        }
    }
}

impl RadioParams {
    pub fn wavelength(&self) -> f64 {
        wavelength(self.freq)
    }

    pub fn eirp_dbm(&self) -> f64 {
        self.p_t_dbm + self.g_t_dbi
    }

    /// `P_T·G_T·G_R` in watts.
    fn numerator_w(&self) -> f64 {
        from_db(self.p_t_dbm - 30.0 + self.g_t_dbi + self.g_r_dbi)
    }
}

/// Watts to dBm; zero power maps to `-inf`.
pub fn w_to_dbm(p: f64) -> f64 {
    to_db(p) + 30.0
}

/// Direct-path received power (dBm) at distance `d` metres.
pub fn friis(params: &RadioParams, d: f64) -> Result<f64> {
    if !(d > 0.0) {
        return Err(Error::Invalid(format!("distance {d} m must be positive")));
    }
    let a = params.wavelength() / (4.0 * PI * d);
    Ok(w_to_dbm(params.numerator_w() * a * a))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Vec3 {
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

#[allow(clippy::should_implement_trait)]
impl Vec3 {
    pub const fn new(x: f64, y: f64, z: f64) -> Self {
        Vec3 { x, y, z }
    }
    pub fn add(self, o: Vec3) -> Vec3 {
        Vec3::new(self.x + o.x, self.y + o.y, self.z + o.z)
    }
    pub fn sub(self, o: Vec3) -> Vec3 {
        Vec3::new(self.x - o.x, self.y - o.y, self.z - o.z)
    }
    pub fn scale(self, s: f64) -> Vec3 {
        Vec3::new(self.x * s, self.y * s, self.z * s)
    }
    pub fn dot(self, o: Vec3) -> f64 {
        self.x * o.x + self.y * o.y + self.z * o.z
    }
    pub fn cross(self, o: Vec3) -> Vec3 {
        Vec3::new(
            self.y * o.z - self.z * o.y,
            self.z * o.x - self.x * o.z,
            self.x * o.y - self.y * o.x,
        )
    }
    pub fn norm(self) -> f64 {
        self.dot(self).sqrt()
    }
    pub fn unit(self) -> Vec3 {
        self.scale(1.0 / self.norm())
    }
}

/// Surface placement: centre, unit normal and unit column axis.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SurfacePose {
    pub origin: Vec3,
    pub normal: Vec3,
    pub col_axis: Vec3,
}

impl SurfacePose {
    /// Vertical surface in the horizontal plane, facing `normal_deg` (angle
    /// of the normal from the +x axis).
    pub fn planar(x: f64, y: f64, normal_deg: f64) -> Self {
        let a = normal_deg.to_radians();
        let normal = Vec3::new(a.cos(), a.sin(), 0.0);
        SurfacePose {
            origin: Vec3::new(x, y, 0.0),
            normal,
            col_axis: Vec3::new(a.sin(), -a.cos(), 0.0),
        }
    }

    pub fn row_axis(&self) -> Vec3 {
        self.normal.cross(self.col_axis)
    }

    /// Centred element positions, row-major by column then row.
    pub fn element_positions(&self, array: &SurfaceArray) -> Vec<Vec3> {
        let v = self.row_axis();
        let (n0, m0) = (
            (array.n_cols as f64 - 1.0) / 2.0,
            (array.m_rows as f64 - 1.0) / 2.0,
        );
        let mut out = Vec::with_capacity(array.n_cols * array.m_rows);
        for n in 0..array.n_cols {
            for m in 0..array.m_rows {
                out.push(
                    self.origin
                        .add(self.col_axis.scale((n as f64 - n0) * array.col_spacing))
                        .add(v.scale((m as f64 - m0) * array.row_spacing)),
                );
            }
        }
        out
    }

    /// Angle from the normal (deg, unsigned; either face).
    pub fn off_normal_deg(&self, from: Vec3, to: Vec3) -> f64 {
        let d = to.sub(from).unit();
        d.dot(self.normal).abs().min(1.0).acos().to_degrees()
    }

    /// Sine of the direction to `p` projected on the column axis.
    pub fn col_sine(&self, p: Vec3) -> f64 {
        p.sub(self.origin).unit().dot(self.col_axis)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LinkGeometry {
    pub tx: Vec3,
    pub rx: Vec3,
    pub pose: SurfacePose,
}

/// Per-element distances and angles of a relayed link.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ElementLeg {
    pub d_i: f64,
    pub d_s: f64,
    pub theta_i: f64,
    pub theta_s: f64,
}

impl LinkGeometry {
    pub fn legs(&self, array: &SurfaceArray) -> Result<Vec<ElementLeg>> {
        self.pose
            .element_positions(array)
            .into_iter()
            .map(|p| {
                let (d_i, d_s) = (self.tx.sub(p).norm(), self.rx.sub(p).norm());
                if !(d_i > 0.0 && d_s > 0.0) {
                    return Err(Error::Invalid("endpoint coincides with a meta-atom".into()));
                }
                Ok(ElementLeg {
                    d_i,
                    d_s,
                    theta_i: self.pose.off_normal_deg(p, self.tx),
                    theta_s: self.pose.off_normal_deg(p, self.rx),
                })
            })
            .collect()
    }

    pub fn d_i(&self) -> f64 {
        self.tx.sub(self.pose.origin).norm()
    }

    pub fn d_s(&self) -> f64 {
        self.rx.sub(self.pose.origin).norm()
    }

    pub fn theta_i(&self) -> f64 {
        self.pose.off_normal_deg(self.pose.origin, self.tx)
    }

    pub fn theta_s(&self) -> f64 {
        self.pose.off_normal_deg(self.pose.origin, self.rx)
    }
}

fn check_coefs(array: &SurfaceArray, coefs: &[Complex64]) -> Result<()> {
    if coefs.len() != array.n_cols * array.m_rows {
        return Err(Error::Invalid(format!(
            "{} coefficients for a {}x{} array",
            coefs.len(),
            array.n_cols,
            array.m_rows
        )));
    }
    Ok(())
}

/// Expands one coefficient per column to the full grid.
pub fn expand_columns(array: &SurfaceArray, cols: &[Complex64]) -> Vec<Complex64> {
    cols.iter()
        .flat_map(|c| std::iter::repeat_n(*c, array.m_rows))
        .collect()
}

/// Coefficients that cancel each element's geometric phase (focusing).
pub fn matched_coefficients(
    geom: &LinkGeometry,
    array: &SurfaceArray,
    lambda: f64,
) -> Result<Vec<Complex64>> {
    Ok(geom
        .legs(array)?
        .iter()
        .map(|l| Complex64::from_polar(1.0, -2.0 * PI * (l.d_i + l.d_s) / lambda))
        .collect())
}

/// Coherent per-element relay sum (dBm).
pub fn received_power_exact(
    params: &RadioParams,
    geom: &LinkGeometry,
    array: &SurfaceArray,
    coefs: &[Complex64],
    q: f64,
) -> Result<f64> {
    check_coefs(array, coefs)?;
    let lambda = params.wavelength();
    let g0 = 4.0 * PI / (lambda * lambda) * array.cell_area();
    let k = (lambda / (4.0 * PI)).powi(2);
    let mut sum = Complex64::new(0.0, 0.0);
    for (leg, c) in geom.legs(array)?.iter().zip(coefs) {
        let gw_i = g0 * element_pattern(leg.theta_i, q);
        let gw_s = g0 * element_pattern(leg.theta_s, q);
        let amp = k * (gw_i * gw_s).sqrt() / (leg.d_i * leg.d_s);
        let phi = 2.0 * PI * (leg.d_i + leg.d_s) / lambda;
        sum += c * Complex64::from_polar(amp, phi);
    }
    Ok(w_to_dbm(params.numerator_w() * sum.norm_sqr()))
}

/// Plane-wave approximation (dBm). `theta_i`, `theta_s` are signed angles
/// along the column axis; row phases are taken as uniform.
#[allow(clippy::too_many_arguments)]
pub fn received_power_farfield(
    params: &RadioParams,
    d_i: f64,
    d_s: f64,
    theta_i: f64,
    theta_s: f64,
    array: &SurfaceArray,
    coefs: &[Complex64],
    q: f64,
) -> Result<f64> {
    check_coefs(array, coefs)?;
    if !(d_i > 0.0 && d_s > 0.0) {
        return Err(Error::Invalid("distances must be positive".into()));
    }
    let k = 2.0 * PI / params.wavelength();
    let g = theta_i.to_radians().sin() + theta_s.to_radians().sin();
    let n0 = (array.n_cols as f64 - 1.0) / 2.0;
    let mut sum = Complex64::new(0.0, 0.0);
    for (idx, c) in coefs.iter().enumerate() {
        let n = (idx / array.m_rows) as f64 - n0;
        sum += c * Complex64::from_polar(1.0, -k * n * array.col_spacing * g);
    }
    let a = array.cell_area() / (4.0 * PI * (d_i * d_s));
    let f = element_pattern(theta_i, q) * element_pattern(theta_s, q);
    Ok(w_to_dbm(params.numerator_w() * a * a * f * sum.norm_sqr()))
}

/// Path loss (dB, positive) of a correctly reconfigured surface.
pub fn surface_path_loss(
    d_i: f64,
    d_s: f64,
    theta_i: f64,
    theta_s: f64,
    array: &SurfaceArray,
    coefs: &[Complex64],
    q: f64,
) -> Result<f64> {
    check_coefs(array, coefs)?;
    if !(d_i > 0.0 && d_s > 0.0) {
        return Err(Error::Invalid("distances must be positive".into()));
    }
    let a = array.cell_area() / (4.0 * PI * (d_i * d_s));
    let f = element_pattern(theta_i, q) * element_pattern(theta_s, q);
    let s: f64 = coefs.iter().map(|c| c.norm()).sum();
    Ok(-to_db(a * a * f * s * s))
}

/// Maximum gain of an aperture of `area` m² (dBi).
pub fn aperture_capacity(area: f64, lambda: f64) -> Result<f64> {
    if !(area > 0.0 && lambda > 0.0) {
        return Err(Error::Invalid(
            "area and wavelength must be positive".into(),
        ));
    }
    Ok(to_db(4.0 * PI * area / (lambda * lambda)))
}

/// Gain of the synthesised surface towards `theta` (dBi): the element
/// aperture gain times the coherent array gain `|Σ C|² / (N·M)`.
pub fn surface_gain(
    array: &SurfaceArray,
    coefs: &[Complex64],
    theta: f64,
    q: f64,
    lambda: f64,
) -> f64 {
    let s: Complex64 = coefs.iter().sum();
    let g0 = 4.0 * PI / (lambda * lambda) * array.cell_area();
    to_db(g0 * element_pattern(theta, q) * s.norm_sqr() / coefs.len() as f64)
}
