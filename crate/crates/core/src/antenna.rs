//! Rotationally symmetric dipole-like antenna model.
//!
//! Gain follows `G0 * sin(psi)^n`, `psi` being the angle from the dipole axis. The
//! default exponent places the E-plane half-power points 60 degrees apart.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::geometry::Vec3;
use crate::link::CVec3;

/// Peak gain of the warehouse antennas, dBi.
pub const DEFAULT_GAIN_DBI: f64 = 3.0;

/// Directions closer than this to the axis (radians) are treated as the pattern null.
pub const NULL_ANGLE: f64 = 1e-6;

/// Exponent `n` giving `sin(psi)^n = 1/2` at 60 degrees off the axis.
pub fn default_pattern_exponent() -> f64 {
    0.5f64.ln() / (60f64.to_radians().sin()).ln()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Polarization {
    Vertical,
    /// Dipole axis along the warehouse length (x).
    HorizontalLongitudinal,
    /// Dipole axis across the warehouse (y).
    HorizontalTransverse,
}

impl Polarization {
    pub fn axis(self) -> Vec3 {
        match self {
            Polarization::Vertical => Vec3::Z,
            Polarization::HorizontalLongitudinal => Vec3::X,
            Polarization::HorizontalTransverse => Vec3::Y,
        }
    }

    pub fn short_label(self) -> &'static str {
        match self {
            Polarization::Vertical => "V",
            Polarization::HorizontalLongitudinal => "H-long",
            Polarization::HorizontalTransverse => "H-trans",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AntennaSpec {
    pub position: Vec3,
    pub axis: Vec3,
    pub gain_max_dbi: f64,
    pub pattern_exponent: f64,
}

impl AntennaSpec {
    pub fn new(position: Vec3, polarization: Polarization) -> Self {
        AntennaSpec {
            position,
            axis: polarization.axis(),
            gain_max_dbi: DEFAULT_GAIN_DBI,
            pattern_exponent: default_pattern_exponent(),
        }
    }

    pub fn at(mut self, position: Vec3) -> Self {
        self.position = position;
        self
    }

    pub fn peak_gain_linear(&self) -> f64 {
        10f64.powf(self.gain_max_dbi / 10.0)
    }
}

/// Linear gain toward `dir`.
pub fn pattern_gain(a: &AntennaSpec, dir: Vec3) -> f64 {
    let c = dir.dot(a.axis).clamp(-1.0, 1.0);
    let sin2 = (1.0 - c * c).max(0.0);
    a.peak_gain_linear() * sin2.powf(0.5 * a.pattern_exponent)
}

/// Far-field E direction (theta-hat about the dipole axis), or `None` in the axial null.
pub fn polarization_vector(a: &AntennaSpec, dir: Vec3) -> Option<Vec3> {
    let c = dir.dot(a.axis);
    let v = dir * c - a.axis;
    let n = v.norm();
    // |v| = sin(psi)
    if n < NULL_ANGLE.sin() {
        return None;
    }
    Some(v / n)
}

/// Complex voltage-like response `sqrt(G(-dir)) * (E . p(-dir))` for a wave arriving along `dir`.
pub fn effective_receive_projection(a: &AntennaSpec, dir: Vec3, e: &CVec3) -> Complex64 {
    let back = -dir;
    match polarization_vector(a, back) {
        Some(p) => e.dot_real(p) * pattern_gain(a, back).sqrt(),
        None => Complex64::new(0.0, 0.0),
    }
}

/// `(1/4 pi) * integral of G over the sphere`, evaluated in closed form.
pub fn mean_gain(a: &AntennaSpec) -> f64 {
    // (1/2) * G0 * integral_0^pi sin^(n+1) = G0 * sqrt(pi)/2 * Gamma((n+2)/2) / Gamma((n+3)/2)
    let n = a.pattern_exponent;
    a.peak_gain_linear() * 0.5 * std::f64::consts::PI.sqrt() * (ln_gamma((n + 2.0) / 2.0) - ln_gamma((n + 3.0) / 2.0)).exp()
}

/// Caps the peak gain so the pattern does not radiate more than it is fed.
///
/// Returns the applied peak gain in dBi.
pub fn enforce_directivity_bound(a: &mut AntennaSpec) -> f64 {
    let mean = mean_gain(a);
    if mean > 1.0 {
        a.gain_max_dbi -= 10.0 * mean.log10();
    }
    a.gain_max_dbi
}

/// Lanczos approximation (g = 7, 9 terms).
fn ln_gamma(x: f64) -> f64 {
    const G: f64 = 7.0;
    const C: [f64; 9] = [
        0.999_999_999_999_809_9,
        676.520_368_121_885_1,
        -1_259.139_216_722_402_8,
        771.323_428_777_653_1,
        -176.615_029_162_140_6,
        12.507_343_278_686_905,
        -0.138_571_095_265_720_12,
        9.984_369_578_019_572e-6,
        1.505_632_735_149_311_6e-7,
    ];
    if x < 0.5 {
        let pi = std::f64::consts::PI;
        return (pi / (pi * x).sin()).ln() - ln_gamma(1.0 - x);
    }
    let x = x - 1.0;
    let mut acc = C[0];
    for (i, &c) in C.iter().enumerate().skip(1) {
        acc += c / (x + i as f64);
    }
    let t = x + G + 0.5;
    0.5 * (2.0 * std::f64::consts::PI).ln() + (x + 0.5) * t.ln() - t + acc.ln()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn vertical() -> AntennaSpec {
        AntennaSpec::new(Vec3::ZERO, Polarization::Vertical)
    }

    #[test]
    fn broadside_gain_is_three_dbi() {
        let g = pattern_gain(&vertical(), Vec3::X);
        assert!((g - 10f64.powf(0.3)).abs() < 1e-12);
        assert!((g - 1.995).abs() < 1e-3);
    }

    #[test]
    fn axial_null() {
        assert_eq!(pattern_gain(&vertical(), Vec3::Z), 0.0);
        assert!(polarization_vector(&vertical(), -Vec3::Z).is_none());
    }

    #[test]
    fn half_power_at_sixty_degrees() {
        // Bisection on sin(60 deg)^n = 1/2 as an independent solve for n.
        let s = 60f64.to_radians().sin();
        let (mut lo, mut hi) = (1.0, 10.0);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if s.powf(mid) > 0.5 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        let n = default_pattern_exponent();
        assert!((n - lo).abs() < 1e-12);
        assert!((n - 4.819).abs() < 1e-3);
        let a = vertical();
        let dir = Vec3::new(60f64.to_radians().sin(), 0.0, 60f64.to_radians().cos());
        assert!((pattern_gain(&a, dir) - a.peak_gain_linear() / 2.0).abs() < 1e-12);
    }

    #[test]
    fn polarization_examples() {
        let p = polarization_vector(&vertical(), Vec3::X).unwrap();
        assert!((p - Vec3::new(0.0, 0.0, -1.0)).norm() < 1e-15);
        let d = Vec3::new(1.0, 0.0, 1.0).normalized();
        let p = polarization_vector(&vertical(), d).unwrap();
        let expected = Vec3::new(1.0, 0.0, -1.0).normalized();
        assert!((p - expected).norm() < 1e-12 || (p + expected).norm() < 1e-12);
    }

    #[test]
    fn receive_projection_cases() {
        let a = vertical();
        let p = polarization_vector(&a, -Vec3::X).unwrap();
        let matched = CVec3::from_real(p, Complex64::new(2.0, 0.0));
        let full = effective_receive_projection(&a, Vec3::X, &matched);
        assert!((full.norm() - 2.0 * 10f64.powf(0.15)).abs() < 1e-12);
        let cross = CVec3::from_real(Vec3::Y, Complex64::new(2.0, 0.0));
        assert_eq!(effective_receive_projection(&a, Vec3::X, &cross).norm(), 0.0);
        let tilted = CVec3::from_real((p + Vec3::Y).normalized(), Complex64::new(2.0, 0.0));
        let r = effective_receive_projection(&a, Vec3::X, &tilted).norm() / full.norm();
        assert!((r - std::f64::consts::FRAC_1_SQRT_2).abs() < 1e-12);
    }

    #[test]
    fn pattern_radiates_no_more_than_fed() {
        // Midpoint-rule quadrature over the sphere, independent of the closed form.
        let a = vertical();
        let n_theta = 2000;
        let mut acc = 0.0;
        for i in 0..n_theta {
            let th = (i as f64 + 0.5) * std::f64::consts::PI / n_theta as f64;
            let dir = Vec3::new(th.sin(), 0.0, th.cos());
            acc += pattern_gain(&a, dir) * th.sin() * std::f64::consts::PI / n_theta as f64;
        }
        let quad = acc * 2.0 * std::f64::consts::PI / (4.0 * std::f64::consts::PI);
        assert!((quad - mean_gain(&a)).abs() < 1e-6);
        assert!(quad <= 1.0 + 1e-3);
        let mut capped = a;
        assert_eq!(enforce_directivity_bound(&mut capped), DEFAULT_GAIN_DBI);
    }

    #[test]
    fn directivity_cap_applies_when_needed() {
        let mut a = vertical();
        a.gain_max_dbi = 6.0;
        let applied = enforce_directivity_bound(&mut a);
        assert!(applied < 6.0);
        assert!((mean_gain(&a) - 1.0).abs() < 1e-12);
    }

    fn arb_unit() -> impl Strategy<Value = Vec3> {
        (-1.0f64..1.0, -1.0f64..1.0, -1.0f64..1.0)
            .prop_filter("non-degenerate", |(x, y, z)| x * x + y * y + z * z > 1e-3)
            .prop_map(|(x, y, z)| Vec3::new(x, y, z).normalized())
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(1000))]
        #[test]
        fn polarization_is_unit_and_transverse(axis in arb_unit(), dir in arb_unit()) {
            prop_assume!(axis.dot(dir).abs() < 1.0 - 1e-9);
            let a = AntennaSpec { axis, ..vertical() };
            let p = polarization_vector(&a, dir).unwrap();
            prop_assert!((p.norm() - 1.0).abs() < 1e-12);
            prop_assert!(p.dot(dir).abs() < 1e-12);
            // Coplanar with axis and dir.
            prop_assert!(p.dot(axis.cross(dir)).abs() < 1e-9);
        }

        #[test]
        fn gain_symmetries(dir in arb_unit(), angle in 0.0f64..std::f64::consts::TAU) {
            let a = vertical();
            prop_assert!((pattern_gain(&a, dir) - pattern_gain(&a, -dir)).abs() < 1e-12);
            let (s, c) = angle.sin_cos();
            let rotated = Vec3::new(c * dir.x - s * dir.y, s * dir.x + c * dir.y, dir.z);
            prop_assert!((pattern_gain(&a, dir) - pattern_gain(&a, rotated)).abs() < 1e-12);
        }
    }
}
