//! Material models and polarization-resolved reflection coefficients.
//!
//! Coefficients are expressed in the basis used by [`crate::link`]:
//! `e_perp = d x n / |d x n|` and `e_par = e_perp x d` for both the incident and
//! the reflected wave. In that basis a perfect conductor reflects with
//! `gamma_perp = -1` and `gamma_par = +1`, which makes the total tangential field
//! vanish at the surface.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Vacuum permittivity, F/m.
pub const EPSILON_0: f64 = 8.8541878128e-12;

/// Smallest cosine of incidence accepted by [`fresnel`].
pub const GRAZING_CLAMP: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum Material {
    Pec,
    Dielectric { eps_r: f64, sigma: f64 },
}

impl Material {
    /// The warehouse floor concrete.
    pub const CONCRETE: Material = Material::Dielectric {
        eps_r: 7.0,
        sigma: 0.015,
    };

    pub fn is_valid(&self) -> bool {
        match *self {
            Material::Pec => true,
            Material::Dielectric { eps_r, sigma } => {
                eps_r.is_finite() && sigma.is_finite() && eps_r >= 1.0 && sigma >= 0.0
            }
        }
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MaterialError {
    #[error("a perfect conductor has no finite permittivity")]
    PecPermittivity,
    #[error("frequency must be positive, got {0}")]
    NonPositiveFrequency(f64),
    #[error("cosine of incidence {0} is not in (0, 1]")]
    Grazing(f64),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FresnelPair {
    pub gamma_perp: Complex64,
    pub gamma_par: Complex64,
}

/// `eps_r - j sigma / (2 pi f eps0)` under the `exp(j w t)` time convention.
pub fn complex_permittivity(m: &Material, f: f64) -> Result<Complex64, MaterialError> {
    if f <= 0.0 || !f.is_finite() {
        return Err(MaterialError::NonPositiveFrequency(f));
    }
    match *m {
        Material::Pec => Err(MaterialError::PecPermittivity),
        Material::Dielectric { eps_r, sigma } => Ok(Complex64::new(
            eps_r,
            -sigma / (2.0 * std::f64::consts::PI * f * EPSILON_0),
        )),
    }
}

/// Reflection coefficients for a half-space. `cos_theta_i` is measured from the surface normal.
pub fn fresnel(m: &Material, cos_theta_i: f64, f: f64) -> Result<FresnelPair, MaterialError> {
    if !(cos_theta_i > 0.0 && cos_theta_i <= 1.0 + 1e-12) {
        return Err(MaterialError::Grazing(cos_theta_i));
    }
    let c = cos_theta_i.min(1.0);
    match m {
        Material::Pec => Ok(FresnelPair {
            gamma_perp: Complex64::new(-1.0, 0.0),
            gamma_par: Complex64::new(1.0, 0.0),
        }),
        Material::Dielectric { .. } => {
            let eps = complex_permittivity(m, f)?;
            let sin2 = 1.0 - c * c;
            let root = (eps - sin2).sqrt();
            let gamma_perp = (c - root) / (c + root);
            let gamma_par = (eps * c - root) / (eps * c + root);
            Ok(FresnelPair {
                gamma_perp,
                gamma_par,
            })
        }
    }
}

/// [`fresnel`] with the cosine clamped to the grazing limit first.
pub fn fresnel_clamped(m: &Material, cos_theta_i: f64, f: f64) -> FresnelPair {
    fresnel(m, cos_theta_i.clamp(GRAZING_CLAMP, 1.0), f).expect("clamped incidence and positive frequency")
}
