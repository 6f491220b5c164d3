//! Built-in oracle suites that check the engine against closed-form results.

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use num_complex::Complex64;
use serde::Serialize;

use crate::antenna::{pattern_gain, AntennaSpec, Polarization};
use crate::diffraction::{diffracted_spreading, fresnel_integrals, utd_coefficients, WedgeGeometry};
use crate::geometry::{Aabb, Floor, FloorRect, MaterialId, Scene, SurfaceId, Vec3};
use crate::link::{
    path_field, point_power, received_power, wavelength, wavenumber, BandConfig, CVec3, Environment, LinkBudget,
};
use crate::materials::{fresnel, Material};
use crate::pathfinder::{image_method_paths, trace_sbr, Interaction, InteractionKind, LaunchConfig, PropPath};

const F0: f64 = 3.994e9;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Suite {
    Friis,
    TwoRay,
    ImageSbr,
    Brewster,
    UtdKnifeEdge,
    PecBoundary,
}

impl Suite {
    pub const ALL: [Suite; 6] = [
        Suite::Friis,
        Suite::TwoRay,
        Suite::ImageSbr,
        Suite::Brewster,
        Suite::UtdKnifeEdge,
        Suite::PecBoundary,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Suite::Friis => "friis",
            Suite::TwoRay => "two-ray",
            Suite::ImageSbr => "image-sbr",
            Suite::Brewster => "brewster",
            Suite::UtdKnifeEdge => "utd-knife-edge",
            Suite::PecBoundary => "pec-boundary",
        }
    }

    pub fn run(self) -> Vec<Check> {
        match self {
            Suite::Friis => friis(),
            Suite::TwoRay => two_ray(),
            Suite::ImageSbr => image_sbr(),
            Suite::Brewster => brewster(),
            Suite::UtdKnifeEdge => knife_edge(),
            Suite::PecBoundary => pec_boundary(),
        }
    }
}

impl fmt::Display for Suite {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Suite {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        Suite::ALL.into_iter().find(|x| x.name() == s).ok_or_else(|| {
            let names: Vec<_> = Suite::ALL.iter().map(|x| x.name()).collect();
            format!("unknown suite `{s}`; expected one of: {}", names.join(", "))
        })
    }
}

/// One measured quantity against its expected value. `pass` means `|measured - expected| <= tolerance`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Check {
    pub suite: &'static str,
    pub name: String,
    pub measured: f64,
    pub expected: f64,
    pub tolerance: f64,
    pub pass: bool,
}

impl Check {
    fn new(suite: Suite, name: impl Into<String>, measured: f64, expected: f64, tolerance: f64) -> Check {
        Check {
            suite: suite.name(),
            name: name.into(),
            measured,
            expected,
            tolerance,
            pass: (measured - expected).abs() <= tolerance,
        }
    }
}

fn friis_dbm(d: f64, g_dbi: f64) -> f64 {
    2.0 * g_dbi + 20.0 * (wavelength(F0) / (4.0 * PI * d)).log10()
}

fn friis() -> Vec<Check> {
    let scene = Scene::empty();
    let env = Environment::new(&scene, &[]);
    let tx = AntennaSpec::new(Vec3::ZERO, Polarization::Vertical);
    let power = |d: f64, band: &BandConfig| {
        let rx = AntennaSpec::new(Vec3::new(d, 0.0, 0.0), Polarization::Vertical);
        let path = PropPath::new(tx.position, rx.position, Vec::new());
        received_power(&env, &[path], &tx, &rx, band, &LinkBudget::default()).p_rx_dbm
    };
    let mut worst: f64 = 0.0;
    for i in 0..=99 {
        let d = 0.5 + 0.5 * i as f64;
        let expected = friis_dbm(d, tx.gain_max_dbi);
        worst = worst.max((power(d, &BandConfig::single(F0)) - expected).abs());
        worst = worst.max((power(d, &BandConfig::default()) - expected).abs());
    }
    vec![
        Check::new(Suite::Friis, "los 1 m", power(1.0, &BandConfig::default()), -38.5, 0.05),
        Check::new(Suite::Friis, "max |error| 0.5-50 m, dB", worst, 0.0, 0.01),
    ]
}

fn gamma_vertical(eps: Complex64, grazing: f64) -> Complex64 {
    let (s, c) = grazing.sin_cos();
    let root = (eps - c * c).sqrt();
    (eps * s - root) / (eps * s + root)
}

/// Closed-form direct plus ground-reflected power for vertical antennas, dBm.
///
/// Returns the two-ray power and the direct-only power.
fn two_ray_closed_form(material: &Material, ht: f64, hr: f64, d: f64, rx: &AntennaSpec) -> (f64, f64) {
    let k = wavenumber(F0);
    let r1 = (d * d + (ht - hr).powi(2)).sqrt();
    let r2 = (d * d + (ht + hr).powi(2)).sqrt();
    let e1 = (ht - hr).atan2(d);
    let e2 = (ht + hr).atan2(d);
    let g = |elev: f64| pattern_gain(rx, Vec3::new(elev.cos(), 0.0, elev.sin()));
    let gamma = match material {
        Material::Pec => Complex64::new(1.0, 0.0),
        Material::Dielectric { eps_r, sigma } => {
            let eps = Complex64::new(*eps_r, -sigma / (2.0 * PI * F0 * 8.8541878128e-12));
            gamma_vertical(eps, e2)
        }
    };
    let direct = Complex64::from_polar(g(e1) / r1, -k * r1);
    let reflected = gamma * Complex64::from_polar(g(e2) / r2, -k * r2);
    let scale = wavelength(F0) / (4.0 * PI);
    let dbm = |a: Complex64| 10.0 * (a * scale).norm_sqr().log10();
    (dbm(direct + reflected), dbm(direct))
}

fn two_ray() -> Vec<Check> {
    let (ht, hr) = (1.5, 0.2);
    let mut checks = Vec::new();
    for (label, material) in [("pec", Material::Pec), ("concrete", Material::CONCRETE)] {
        let floor = Floor {
            extent: FloorRect {
                x_min: -100.0,
                x_max: 100.0,
                y_min: -100.0,
                y_max: 100.0,
            },
            material_id: MaterialId(0),
        };
        let scene = Scene::new(Vec::new(), Some(floor)).expect("open floor");
        let materials = [material];
        let env = Environment::new(&scene, &materials);
        let tx = AntennaSpec::new(Vec3::new(0.0, 0.0, ht), Polarization::Vertical);
        let cfg = LaunchConfig::default();
        let mut worst: f64 = 0.0;
        let mut used = 0;
        for i in 0..=116 {
            let d = 1.0 + 0.25 * i as f64;
            let rx = AntennaSpec::new(Vec3::new(d, 0.0, hr), Polarization::Vertical);
            let (expected, direct) = two_ray_closed_form(&material, ht, hr, d, &rx);
            if expected < direct - 3.0 {
                continue;
            }
            let band = BandConfig::single(F0);
            let Ok(got) = point_power(&env, &tx, &rx, &cfg, &band, &LinkBudget::default()) else {
                worst = f64::INFINITY;
                continue;
            };
            worst = worst.max((got.p_rx_dbm - expected).abs());
            used += 1;
        }
        checks.push(Check::new(
            Suite::TwoRay,
            format!("{label}: max |error| over {used} points in 1-30 m, dB"),
            worst,
            0.0,
            0.5,
        ));
    }
    checks
}

/// Two PEC walls 1.5 m apart with the transmitter and receiver between them.
pub fn two_wall_scene() -> Scene {
    let walls = vec![
        Aabb::new(Vec3::new(-1.0, -100.0, -100.0), Vec3::new(0.0, 100.0, 100.0), MaterialId(0)),
        Aabb::new(Vec3::new(1.5, -100.0, -100.0), Vec3::new(2.5, 100.0, 100.0), MaterialId(0)),
    ];
    Scene::new(walls, None).expect("disjoint walls")
}

fn image_sbr() -> Vec<Check> {
    let scene = two_wall_scene();
    let materials = [Material::Pec];
    let env = Environment::new(&scene, &materials);
    let cfg = LaunchConfig {
        tessellation_order: 5,
        max_reflections: 5,
        enable_diffraction: false,
        ..LaunchConfig::default()
    };
    let mut checks = Vec::new();
    for (i, (a, b)) in [
        (Vec3::new(0.4, 0.0, 0.0), Vec3::new(1.1, 5.0, 0.5)),
        (Vec3::new(0.75, 0.0, 1.5), Vec3::new(0.3, 12.0, 0.2)),
    ]
    .into_iter()
    .enumerate()
    {
        let image = image_method_paths(&scene, a, b, 5).unwrap_or_default();
        let sbr = trace_sbr(&scene, a, b, &cfg).unwrap_or_default();
        let sig = |p: &[PropPath]| p.iter().map(PropPath::signature).collect::<Vec<_>>();
        let same = sig(&image) == sig(&sbr);
        checks.push(Check::new(
            Suite::ImageSbr,
            format!("case {i}: path sets equal ({} image paths)", image.len()),
            f64::from(u8::from(same)),
            1.0,
            0.0,
        ));
        let rel = if same {
            image
                .iter()
                .zip(&sbr)
                .map(|(x, y)| (x.total_length - y.total_length).abs() / x.total_length)
                .fold(0.0, f64::max)
        } else {
            f64::INFINITY
        };
        checks.push(Check::new(Suite::ImageSbr, format!("case {i}: max relative length error"), rel, 0.0, 1e-6));
        let tx = AntennaSpec::new(a, Polarization::Vertical);
        let rx = AntennaSpec::new(b, Polarization::Vertical);
        let band = BandConfig::default();
        let budget = LinkBudget::default();
        let p_image = received_power(&env, &image, &tx, &rx, &band, &budget).p_rx_dbm;
        let p_sbr = received_power(&env, &sbr, &tx, &rx, &band, &budget).p_rx_dbm;
        checks.push(Check::new(Suite::ImageSbr, format!("case {i}: summed power, dBm"), p_sbr, p_image, 0.1));
    }
    checks
}

fn brewster() -> Vec<Check> {
    let eps_r: f64 = 7.0;
    let m = Material::Dielectric { eps_r, sigma: 0.0 };
    let theta = eps_r.sqrt().atan();
    let gamma = fresnel(&m, theta.cos(), F0).map(|g| g.gamma_par.norm()).unwrap_or(f64::INFINITY);
    // Numerical minimum of |Gamma_par| over a fine angle sweep.
    let mut best = (f64::INFINITY, 0.0);
    for i in 0..=90_000 {
        let t = i as f64 * 1e-3 * PI / 180.0;
        if let Ok(g) = fresnel(&m, t.cos(), F0) {
            if g.gamma_par.norm() < best.0 {
                best = (g.gamma_par.norm(), t);
            }
        }
    }
    vec![
        Check::new(Suite::Brewster, "brewster angle, deg", theta.to_degrees(), 69.30, 0.005),
        Check::new(Suite::Brewster, "|gamma_par| at brewster", gamma, 0.0, 1e-9),
        Check::new(Suite::Brewster, "sweep minimum of |gamma_par|, deg", best.1.to_degrees(), theta.to_degrees(), 2e-3),
    ]
}

/// Fresnel-Kirchhoff knife-edge field relative to free space.
pub fn knife_edge_gain(v: f64) -> f64 {
    let (c, s) = fresnel_integrals(v);
    (Complex64::new(0.5, 0.5) * Complex64::new(0.5 - c, -(0.5 - s))).norm()
}

fn knife_edge() -> Vec<Check> {
    let lambda = wavelength(F0);
    let k = wavenumber(F0);
    let (d1, d2) = (50.0, 50.0);
    let mut worst: [f64; 2] = [0.0; 2];
    for i in 0..=40 {
        let v = 1.0 + 0.05 * i as f64;
        let h = v / (2.0 * (d1 + d2) / (lambda * d1 * d2)).sqrt();
        let s_i = (d1 * d1 + h * h).sqrt();
        let s_d = (d2 * d2 + h * h).sqrt();
        let g = WedgeGeometry {
            n_wedge: 2.0,
            s_i,
            s_d,
            phi: 2.0 * PI - d2.atan2(h),
            phi_prime: d1.atan2(h),
            beta0: PI / 2.0,
        };
        let c = utd_coefficients(&g, k);
        let spread = diffracted_spreading(s_i, s_d) / s_i;
        let oracle = 20.0 * knife_edge_gain(v).log10();
        for (w, d) in worst.iter_mut().zip([c.d_s, c.d_h]) {
            let utd = 20.0 * (d.norm() * spread * (d1 + d2)).log10();
            *w = w.max((utd - oracle).abs());
        }
    }
    vec![
        Check::new(Suite::UtdKnifeEdge, "soft: max |error| for v in [1, 3], dB", worst[0], 0.0, 1.5),
        Check::new(Suite::UtdKnifeEdge, "hard: max |error| for v in [1, 3], dB", worst[1], 0.0, 1.5),
    ]
}

/// Largest tangential component of incident plus reflected field at PEC reflection points, relative to `|E_inc|`.
pub fn pec_tangential_residual() -> f64 {
    let floor = Floor {
        extent: FloorRect {
            x_min: -50.0,
            x_max: 50.0,
            y_min: -50.0,
            y_max: 50.0,
        },
        material_id: MaterialId(0),
    };
    let shelf = Aabb::new(Vec3::new(10.0, -5.0, 0.3), Vec3::new(10.5, 5.0, 3.3), MaterialId(0));
    let scene = Scene::new(vec![shelf], Some(floor)).expect("valid scene");
    let materials = [Material::Pec];
    let env = Environment::new(&scene, &materials);
    let k = wavenumber(F0);
    let face_west = SurfaceId::Face { solid: 0, face: 0 };
    let mut worst: f64 = 0.0;
    let cases = [
        (SurfaceId::Floor, Vec3::new(3.0, 1.0, 0.0)),
        (SurfaceId::Floor, Vec3::new(0.5, -0.2, 0.0)),
        (face_west, Vec3::new(10.0, 1.0, 1.0)),
        (face_west, Vec3::new(10.0, -3.0, 2.5)),
    ];
    let (n_floor, _) = scene.surface_plane(SurfaceId::Floor);
    let (n_face, _) = scene.surface_plane(face_west);
    for pol in [Polarization::Vertical, Polarization::HorizontalLongitudinal, Polarization::HorizontalTransverse] {
        let tx = AntennaSpec::new(Vec3::new(0.0, 0.0, 1.5), pol);
        for (surface, q) in cases {
            let n = if surface == SurfaceId::Floor { n_floor } else { n_face };
            let d_in = (q - tx.position).normalized();
            let d_out = d_in - n * (2.0 * d_in.dot(n));
            let rx = q + d_out * 0.25;
            let incident = PropPath::new(tx.position, q, Vec::new());
            let reflected = PropPath::new(
                tx.position,
                rx,
                vec![Interaction {
                    kind: InteractionKind::Reflection(surface),
                    point: q,
                }],
            );
            let e_inc = path_field(&env, &incident, &tx, F0);
            let l1 = incident.total_length;
            let lt = reflected.total_length;
            // Undo the final leg so the reflected field is taken at the reflection point.
            let e_ref = path_field(&env, &reflected, &tx, F0) * Complex64::from_polar(lt / l1, k * (lt - l1));
            let total = e_inc + e_ref;
            let tangential = total - CVec3::from_real(n, total.dot_real(n));
            if e_inc.norm() > 0.0 {
                worst = worst.max(tangential.norm() / e_inc.norm());
            }
        }
    }
    worst
}

fn pec_boundary() -> Vec<Check> {
    vec![Check::new(Suite::PecBoundary, "tangential E / |E_inc| at PEC faces", pec_tangential_residual(), 0.0, 1e-10)]
}

/// Runs the named suites in order.
pub fn run_suites(suites: &[Suite]) -> Vec<Check> {
    suites.iter().flat_map(|s| s.run()).collect()
}
