//! Uniform (UTD) edge-diffraction coefficients for perfectly conducting wedges.
//!
//! The coefficients use the Kouyoumjian-Pathak form with the Fresnel transition
//! function evaluated through the Fresnel integrals (power series for small
//! arguments, continued fraction otherwise). Field mapping uses the ray-fixed
//! edge basis: `beta` components see the soft coefficient, `phi` components the
//! hard one.

use std::f64::consts::PI;

use num_complex::Complex64;

use crate::geometry::{EdgeSpec, Vec3};
use crate::link::CVec3;

const J: Complex64 = Complex64::new(0.0, 1.0);

/// Below this distance from a shadow or reflection boundary (in the cotangent
/// argument) the boundary-limit expression replaces the direct product.
const BOUNDARY_EPSILON: f64 = 1e-7;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WedgeGeometry {
    pub n_wedge: f64,
    pub s_i: f64,
    pub s_d: f64,
    /// Observation azimuth from the o-face, radians.
    pub phi: f64,
    /// Incidence azimuth from the o-face, radians.
    pub phi_prime: f64,
    /// Angle between the incident ray and the edge, radians.
    pub beta0: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DiffractionCoefficients {
    /// Soft coefficient (E parallel to the edge).
    pub d_s: Complex64,
    /// Hard coefficient (E perpendicular to the edge).
    pub d_h: Complex64,
}

/// Fresnel integrals `(C(w), S(w))` with the normalization `C(w) = int_0^w cos(pi t^2 / 2) dt`.
pub fn fresnel_integrals(w: f64) -> (f64, f64) {
    let (c, s) = fresnel_integrals_abs(w.abs());
    if w < 0.0 {
        (-c, -s)
    } else {
        (c, s)
    }
}

/// `(1/2 - C(w)) + j (1/2 - S(w))` for `w >= 0`, without cancellation at large `w`.
fn fresnel_complement(w: f64) -> Complex64 {
    if w < 1.5 {
        let (c, s) = fresnel_integrals_abs(w);
        Complex64::new(0.5 - c, 0.5 - s)
    } else {
        let pix2 = PI * w * w;
        let h = fresnel_continued_fraction(w);
        Complex64::new(0.5, 0.5) * Complex64::from_polar(1.0, 0.5 * pix2) * h
    }
}

fn fresnel_integrals_abs(w: f64) -> (f64, f64) {
    if w < 1.5 {
        fresnel_series(w)
    } else {
        let cs = Complex64::new(0.5, 0.5) - fresnel_complement(w);
        (cs.re, cs.im)
    }
}

fn fresnel_series(w: f64) -> (f64, f64) {
    if w < 1e-150 {
        return (w, 0.0);
    }
    let fact = 0.5 * PI * w * w;
    let mut sum_c = w;
    let mut sum_s = 0.0;
    let mut term = w;
    let mut sign = 1.0;
    let mut n = 3.0;
    // term_k = w * fact^k / k!; odd k feed S, even k feed C, with alternating signs.
    for k in 1..200 {
        term *= fact / k as f64;
        let contribution = term / n;
        if k % 2 == 1 {
            sum_s += sign * contribution;
        } else {
            sign = -sign;
            sum_c += sign * contribution;
        }
        if contribution < 1e-17 * (sum_c.abs() + sum_s.abs()) {
            break;
        }
        n += 2.0;
    }
    (sum_c, sum_s)
}

/// Modified Lentz evaluation of the auxiliary continued fraction, scaled by `(w - j w)`.
fn fresnel_continued_fraction(w: f64) -> Complex64 {
    let pix2 = PI * w * w;
    let one = Complex64::new(1.0, 0.0);
    let mut b = Complex64::new(1.0, -pix2);
    let mut c = Complex64::new(1e300, 0.0);
    let mut d = one / b;
    let mut h = d;
    let mut n = -1.0;
    for _ in 2..500 {
        n += 2.0;
        let a = -n * (n + 1.0);
        b += Complex64::new(4.0, 0.0);
        d = one / (d * a + b);
        c = b + Complex64::new(a, 0.0) / c;
        let del = c * d;
        h *= del;
        if (del.re - 1.0).abs() + del.im.abs() < 1e-16 {
            break;
        }
    }
    Complex64::new(w, -w) * h
}

/// `F(x) = 2 j sqrt(x) exp(j x) int_{sqrt x}^inf exp(-j t^2) dt` for `x >= 0`.
pub fn transition_function(x: f64) -> Complex64 {
    if x <= 0.0 {
        return Complex64::new(0.0, 0.0);
    }
    let u = x.sqrt();
    let w = u * (2.0 / PI).sqrt();
    // int_u^inf exp(-j t^2) dt = sqrt(pi/2) * conj((1/2 - C) + j (1/2 - S))
    let tail = (PI / 2.0).sqrt() * fresnel_complement(w).conj();
    2.0 * J * u * Complex64::from_polar(1.0, x) * tail
}

/// One cotangent-transition product `cot((pi + sign*beta) / 2n) * F(k L a(beta))`.
fn boundary_term(beta: f64, sign: f64, n: f64, kl: f64) -> Complex64 {
    // N is the integer most nearly satisfying 2 pi n N - beta = sign * pi.
    let big_n = ((beta + sign * PI) / (2.0 * n * PI)).round();
    let eps = PI + sign * beta - sign * 2.0 * PI * n * big_n;
    if eps.abs() < BOUNDARY_EPSILON {
        let e = Complex64::from_polar(1.0, PI / 4.0);
        let sgn = if eps >= 0.0 { 1.0 } else { -1.0 };
        return n * ((2.0 * PI * kl).sqrt() * sgn - 2.0 * kl * eps * e) * e;
    }
    let cot = 1.0 / ((PI + sign * beta) / (2.0 * n)).tan();
    let half = (2.0 * PI * n * big_n - beta) / 2.0;
    let a = 2.0 * half.cos().powi(2);
    transition_function(kl * a) * cot
}

/// Soft and hard UTD coefficients for a perfectly conducting wedge.
pub fn utd_coefficients(g: &WedgeGeometry, k: f64) -> DiffractionCoefficients {
    let n = g.n_wedge;
    let sin_b = g.beta0.sin();
    let l = g.s_i * g.s_d / (g.s_i + g.s_d) * sin_b * sin_b;
    let kl = k * l;
    let pref = -Complex64::from_polar(1.0, -PI / 4.0) / (2.0 * n * (2.0 * PI * k).sqrt() * sin_b);
    let minus = g.phi - g.phi_prime;
    let plus = g.phi + g.phi_prime;
    let incident = boundary_term(minus, 1.0, n, kl) + boundary_term(minus, -1.0, n, kl);
    let reflected = boundary_term(plus, 1.0, n, kl) + boundary_term(plus, -1.0, n, kl);
    DiffractionCoefficients {
        d_s: pref * (incident - reflected),
        d_h: pref * (incident + reflected),
    }
}

/// Spherical-wave spreading applied to the field incident at the edge.
pub fn diffracted_spreading(s_i: f64, s_d: f64) -> f64 {
    (s_i / (s_d * (s_i + s_d))).sqrt()
}

/// Azimuth of `v` around the edge, measured from the o-face through the exterior, in `[0, 2 pi)`.
pub fn edge_azimuth(edge: &EdgeSpec, v: Vec3) -> f64 {
    let a = v.dot(edge.n_o).atan2(v.dot(edge.tangent_o()));
    if a < 0.0 {
        a + 2.0 * PI
    } else {
        a
    }
}

/// Whether direction `v` (leaving the edge) lies strictly inside the exterior wedge.
pub fn in_exterior(edge: &EdgeSpec, v: Vec3) -> bool {
    let phi = edge_azimuth(edge, v);
    phi > 1e-9 && phi < edge.wedge_index * PI - 1e-9
}

/// Wedge geometry for a ray arriving along `s_in` and leaving along `s_out`.
pub fn wedge_geometry(edge: &EdgeSpec, s_in: Vec3, s_out: Vec3, s_i: f64, s_d: f64) -> WedgeGeometry {
    let e = edge.direction();
    WedgeGeometry {
        n_wedge: edge.wedge_index,
        s_i,
        s_d,
        phi: edge_azimuth(edge, s_out),
        phi_prime: edge_azimuth(edge, -s_in),
        beta0: s_in.dot(e).clamp(-1.0, 1.0).acos(),
    }
}

/// Diffracted field leaving the edge (before the `exp(-j k s_d)` phase and spreading).
///
/// `e_inc` is the incident field at the diffraction point.
pub fn diffract_field(edge: &EdgeSpec, s_in: Vec3, s_out: Vec3, coeffs: &DiffractionCoefficients, e_inc: &CVec3) -> CVec3 {
    let e = edge.direction();
    let phi_in = -(e.cross(s_in)).normalized();
    let beta_in = s_in.cross(phi_in);
    let phi_out = e.cross(s_out).normalized();
    let beta_out = s_out.cross(phi_out);
    let eb = e_inc.dot_real(beta_in);
    let ep = e_inc.dot_real(phi_in);
    CVec3::from_real(beta_out, -coeffs.d_s * eb) + CVec3::from_real(phi_out, -coeffs.d_h * ep)
}
