//! Complex field vectors and per-path field synthesis.

use std::f64::consts::PI;
use std::ops::{Add, AddAssign, Mul, Sub};

use num_complex::Complex64;

use crate::antenna::{pattern_gain, polarization_vector, AntennaSpec};
use crate::diffraction::{diffract_field, diffracted_spreading, utd_coefficients, wedge_geometry};
use crate::geometry::{reflect_direction, Vec3};
use crate::materials::fresnel_clamped;
use crate::pathfinder::{InteractionKind, PropPath};

use super::Environment;

/// Speed of light in vacuum, m/s.
pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;

const ZERO: Complex64 = Complex64::new(0.0, 0.0);

pub fn wavenumber(f: f64) -> f64 {
    2.0 * PI * f / SPEED_OF_LIGHT
}

pub fn wavelength(f: f64) -> f64 {
    SPEED_OF_LIGHT / f
}

/// Phasor vector with complex Cartesian components.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CVec3 {
    pub x: Complex64,
    pub y: Complex64,
    pub z: Complex64,
}

impl CVec3 {
    pub const ZERO: CVec3 = CVec3 {
        x: ZERO,
        y: ZERO,
        z: ZERO,
    };

    pub fn from_real(v: Vec3, c: Complex64) -> Self {
        CVec3 {
            x: c * v.x,
            y: c * v.y,
            z: c * v.z,
        }
    }

    /// Bilinear product with a real vector (no conjugation).
    pub fn dot_real(&self, v: Vec3) -> Complex64 {
        self.x * v.x + self.y * v.y + self.z * v.z
    }

    pub fn norm(&self) -> f64 {
        (self.x.norm_sqr() + self.y.norm_sqr() + self.z.norm_sqr()).sqrt()
    }
}

impl Add for CVec3 {
    type Output = CVec3;
    fn add(self, o: CVec3) -> CVec3 {
        CVec3 {
            x: self.x + o.x,
            y: self.y + o.y,
            z: self.z + o.z,
        }
    }
}

impl AddAssign for CVec3 {
    fn add_assign(&mut self, o: CVec3) {
        *self = *self + o;
    }
}

impl Sub for CVec3 {
    type Output = CVec3;
    fn sub(self, o: CVec3) -> CVec3 {
        CVec3 {
            x: self.x - o.x,
            y: self.y - o.y,
            z: self.z - o.z,
        }
    }
}

impl Mul<Complex64> for CVec3 {
    type Output = CVec3;
    fn mul(self, c: Complex64) -> CVec3 {
        CVec3 {
            x: self.x * c,
            y: self.y * c,
            z: self.z * c,
        }
    }
}

impl Mul<f64> for CVec3 {
    type Output = CVec3;
    fn mul(self, c: f64) -> CVec3 {
        CVec3 {
            x: self.x * c,
            y: self.y * c,
            z: self.z * c,
        }
    }
}

/// Perpendicular/parallel basis for a wave travelling along `d` onto a surface with normal `n`.
///
/// Returns `(e_perp, e_par)`; at normal incidence a fixed transverse basis is used.
pub fn reflection_basis(d: Vec3, n: Vec3) -> (Vec3, Vec3) {
    let c = d.cross(n);
    let e_perp = if c.norm() < 1e-9 {
        let helper = if n.x.abs() < 0.9 { Vec3::X } else { Vec3::Y };
        n.cross(helper).normalized()
    } else {
        c.normalized()
    };
    (e_perp, e_perp.cross(d))
}

/// Field of `path` at the receiver for a transmitter fed with unit power.
///
/// Includes the transmit pattern, polarization, interaction coefficients, spreading and
/// the `exp(-j k r)` phase.
pub fn path_field(env: &Environment, path: &PropPath, tx: &AntennaSpec, f: f64) -> CVec3 {
    let dep = path.departure_direction();
    let Some(p) = polarization_vector(tx, dep) else {
        return CVec3::ZERO;
    };
    let k = wavenumber(f);
    let mut e = CVec3::from_real(p, Complex64::new(pattern_gain(tx, dep).sqrt(), 0.0));
    let verts = path.vertices();
    let mut spreading = None;
    for (i, inter) in path.interactions.iter().enumerate() {
        let d_in = (verts[i + 1] - verts[i]).normalized();
        match inter.kind {
            InteractionKind::Reflection(s) => {
                let (n, _) = env.scene.surface_plane(s);
                let d_out = reflect_direction(d_in, n);
                let material = &env.materials[env.scene.surface_material(s).0];
                let gamma = fresnel_clamped(material, -d_in.dot(n), f);
                let (e_perp, e_par_in) = reflection_basis(d_in, n);
                let e_par_out = e_perp.cross(d_out);
                e = CVec3::from_real(e_perp, gamma.gamma_perp * e.dot_real(e_perp))
                    + CVec3::from_real(e_par_out, gamma.gamma_par * e.dot_real(e_par_in));
            }
            InteractionKind::Diffraction(ei) => {
                let edge = &env.edges[ei as usize];
                let d_out = (verts[i + 2] - verts[i + 1]).normalized();
                let s_i: f64 = path.segment_lengths[..=i].iter().sum();
                let s_d: f64 = path.segment_lengths[i + 1..].iter().sum();
                let coeffs = utd_coefficients(&wedge_geometry(edge, d_in, d_out, s_i, s_d), k);
                e = diffract_field(edge, d_in, d_out, &coeffs, &e);
                spreading = Some(diffracted_spreading(s_i, s_d) / s_i);
            }
        }
    }
    let amp = spreading.unwrap_or(1.0 / path.total_length);
    e * Complex64::from_polar(amp, -k * path.total_length)
}

/// Received complex amplitude; `|a|^2` is the power ratio `P_rx / P_tx`.
///
/// The aperture factor uses the reference wavelength `lambda_ref` for every sample
/// frequency, so a single path has the same power across the band.
pub fn path_amplitude(env: &Environment, path: &PropPath, tx: &AntennaSpec, rx: &AntennaSpec, f: f64, lambda_ref: f64) -> Complex64 {
    let e = path_field(env, path, tx, f);
    crate::antenna::effective_receive_projection(rx, path.arrival_direction(), &e) * (lambda_ref / (4.0 * PI))
}
