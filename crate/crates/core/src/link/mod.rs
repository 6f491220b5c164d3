//! Field synthesis, band-averaged received power and coverage maps.

pub mod coverage;
pub mod field;

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::antenna::AntennaSpec;
use crate::exec::Execution;
use crate::geometry::{enumerate_edges, EdgeSpec, Scene, Vec3};
use crate::materials::Material;
use crate::pathfinder::{LaunchConfig, PathError, PathFinder, PropPath, Signature};

pub use coverage::{count_components, coverage_stats, CoverageStats};
pub use field::{path_amplitude, path_field, reflection_basis, wavelength, wavenumber, CVec3, SPEED_OF_LIGHT};

/// Paths whose free-space power bound falls below this (dB relative to TX) are skipped.
pub const PREFILTER_DB: f64 = -250.0;

/// Scene plus the material table its ids refer to and its diffracting edges.
#[derive(Debug)]
pub struct Environment<'a> {
    pub scene: &'a Scene,
    pub materials: &'a [Material],
    pub edges: Vec<EdgeSpec>,
}

impl<'a> Environment<'a> {
    pub fn new(scene: &'a Scene, materials: &'a [Material]) -> Self {
        Environment {
            scene,
            materials,
            edges: enumerate_edges(scene),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Weighting {
    Uniform,
    /// Gaussian spectrum whose full width at half maximum equals the bandwidth.
    Gaussian,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BandConfig {
    #[serde(default = "BandConfig::default_center")]
    pub f_center: f64,
    #[serde(default = "BandConfig::default_bandwidth")]
    pub bandwidth: f64,
    #[serde(default = "BandConfig::default_samples")]
    pub n_freq_samples: usize,
    #[serde(default = "BandConfig::default_weighting")]
    pub weighting: Weighting,
}

impl BandConfig {
    pub const CENTER_HZ: f64 = 3.994e9;
    pub const BANDWIDTH_HZ: f64 = 4.68e8;

    fn default_center() -> f64 {
        Self::CENTER_HZ
    }
    fn default_bandwidth() -> f64 {
        Self::BANDWIDTH_HZ
    }
    fn default_samples() -> usize {
        9
    }
    fn default_weighting() -> Weighting {
        Weighting::Uniform
    }

    /// Center frequency only.
    pub fn single(f: f64) -> Self {
        BandConfig {
            f_center: f,
            bandwidth: 0.0,
            n_freq_samples: 1,
            weighting: Weighting::Uniform,
        }
    }

    pub fn validate(&self) -> Result<(), LinkError> {
        let ok = self.f_center > 0.0
            && self.f_center.is_finite()
            && self.bandwidth >= 0.0
            && self.bandwidth < 2.0 * self.f_center
            && self.n_freq_samples % 2 == 1;
        if ok {
            Ok(())
        } else {
            Err(LinkError::InvalidBand(*self))
        }
    }

    /// Sample frequencies spanning the band inclusively, with weights summing to one.
    pub fn samples(&self) -> Vec<(f64, f64)> {
        let n = self.n_freq_samples.max(1);
        if n == 1 {
            return vec![(self.f_center, 1.0)];
        }
        let step = self.bandwidth / (n - 1) as f64;
        let freqs: Vec<f64> = (0..n)
            .map(|i| self.f_center - 0.5 * self.bandwidth + i as f64 * step)
            .collect();
        let raw: Vec<f64> = freqs
            .iter()
            .map(|&f| match self.weighting {
                Weighting::Uniform => 1.0,
                Weighting::Gaussian => {
                    let u = (f - self.f_center) / self.bandwidth;
                    (-4.0 * 2f64.ln() * u * u).exp()
                }
            })
            .collect();
        let total: f64 = raw.iter().sum();
        freqs.into_iter().zip(raw).map(|(f, w)| (f, w / total)).collect()
    }
}

impl Default for BandConfig {
    fn default() -> Self {
        BandConfig {
            f_center: Self::CENTER_HZ,
            bandwidth: Self::BANDWIDTH_HZ,
            n_freq_samples: Self::default_samples(),
            weighting: Weighting::Uniform,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LinkBudget {
    #[serde(default)]
    pub tx_power_dbm: f64,
    #[serde(default = "LinkBudget::default_sensitivity")]
    pub rx_sensitivity_dbm: f64,
}

impl LinkBudget {
    fn default_sensitivity() -> f64 {
        -106.0
    }

    /// Inclusive threshold.
    pub fn covers(&self, p_dbm: f64) -> bool {
        p_dbm >= self.rx_sensitivity_dbm
    }
}

impl Default for LinkBudget {
    fn default() -> Self {
        LinkBudget {
            tx_power_dbm: 0.0,
            rx_sensitivity_dbm: Self::default_sensitivity(),
        }
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LinkError {
    #[error("invalid band {0:?}: need positive center, bandwidth below twice the center and an odd sample count")]
    InvalidBand(BandConfig),
    #[error("invalid receiver grid {0:?}")]
    InvalidGrid(RxGrid),
    #[error(transparent)]
    Path(#[from] PathError),
}

#[derive(Debug, Clone)]
pub struct PowerResult {
    pub p_rx_dbm: f64,
    /// Per-path complex amplitude at each band sample, in signature order.
    pub per_path: Vec<(Signature, Vec<Complex64>)>,
    pub covered: bool,
}

fn passes_prefilter(path: &PropPath, tx: &AntennaSpec, rx: &AntennaSpec, band: &BandConfig) -> bool {
    let bound = wavelength(band.f_center) / (4.0 * PI * path.total_length);
    let db = 20.0 * bound.log10() + tx.gain_max_dbi + rx.gain_max_dbi;
    db >= PREFILTER_DB
}

/// Band-averaged power ratio `P_rx / P_tx` of paths already sorted by signature.
fn power_ratio(env: &Environment, paths: &[PropPath], tx: &AntennaSpec, rx: &AntennaSpec, band: &BandConfig) -> f64 {
    let samples = band.samples();
    let lambda_ref = wavelength(band.f_center);
    let kept: Vec<&PropPath> = paths.iter().filter(|p| passes_prefilter(p, tx, rx, band)).collect();
    samples
        .iter()
        .map(|&(f, w)| {
            let sum: Complex64 = kept.iter().map(|p| path_amplitude(env, p, tx, rx, f, lambda_ref)).sum();
            w * sum.norm_sqr()
        })
        .sum()
}

fn to_dbm(budget: &LinkBudget, ratio: f64) -> f64 {
    if ratio > 0.0 {
        budget.tx_power_dbm + 10.0 * ratio.log10()
    } else {
        f64::NEG_INFINITY
    }
}

/// Coherent per-frequency sum of path amplitudes, power-averaged over the band.
pub fn received_power(
    env: &Environment,
    paths: &[PropPath],
    tx: &AntennaSpec,
    rx: &AntennaSpec,
    band: &BandConfig,
    budget: &LinkBudget,
) -> PowerResult {
    let mut sorted: Vec<&PropPath> = paths.iter().collect();
    sorted.sort_by_cached_key(|p| p.signature());
    let samples = band.samples();
    let lambda_ref = wavelength(band.f_center);
    let per_path: Vec<(Signature, Vec<Complex64>)> = sorted
        .iter()
        .filter(|p| passes_prefilter(p, tx, rx, band))
        .map(|p| {
            let amps = samples.iter().map(|&(f, _)| path_amplitude(env, p, tx, rx, f, lambda_ref)).collect();
            (p.signature(), amps)
        })
        .collect();
    let ratio: f64 = samples
        .iter()
        .enumerate()
        .map(|(k, &(_, w))| {
            let sum: Complex64 = per_path.iter().map(|(_, a)| a[k]).sum();
            w * sum.norm_sqr()
        })
        .sum();
    let p_rx_dbm = to_dbm(budget, ratio);
    PowerResult {
        p_rx_dbm,
        per_path,
        covered: budget.covers(p_rx_dbm),
    }
}

/// Receiver grid on a horizontal plane; points run from the minimum corner in `spacing` steps.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RxGrid {
    pub x_min: f64,
    pub x_max: f64,
    pub y_min: f64,
    pub y_max: f64,
    pub spacing: f64,
    #[serde(default = "RxGrid::default_height")]
    pub height: f64,
}

impl RxGrid {
    fn default_height() -> f64 {
        0.2
    }

    pub fn is_valid(&self) -> bool {
        self.spacing > 0.0
            && self.spacing.is_finite()
            && self.x_max >= self.x_min
            && self.y_max >= self.y_min
            && [self.x_min, self.x_max, self.y_min, self.y_max, self.height].iter().all(|v| v.is_finite())
    }

    fn count(lo: f64, hi: f64, step: f64) -> usize {
        // Tolerate extents that are a whole number of steps up to rounding.
        ((hi - lo) / step + 1e-9).floor() as usize + 1
    }

    pub fn dims(&self) -> (usize, usize) {
        (
            Self::count(self.x_min, self.x_max, self.spacing),
            Self::count(self.y_min, self.y_max, self.spacing),
        )
    }

    pub fn len(&self) -> usize {
        let (nx, ny) = self.dims();
        nx * ny
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn point(&self, ix: usize, iy: usize) -> Vec3 {
        Vec3::new(
            self.x_min + ix as f64 * self.spacing,
            self.y_min + iy as f64 * self.spacing,
            self.height,
        )
    }

    /// Grid points in row-major order (`y` outer, `x` inner).
    pub fn points(&self) -> Vec<Vec3> {
        let (nx, ny) = self.dims();
        (0..ny).flat_map(|iy| (0..nx).map(move |ix| self.point(ix, iy))).collect()
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct MapMetadata {
    pub scenario_hash: String,
    pub engine: Option<LaunchConfig>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PowerMap {
    pub grid: RxGrid,
    /// Received power in dBm, row-major like [`RxGrid::points`]; `-inf` where no path exists.
    pub values: Vec<f64>,
    /// False for points inside scene geometry.
    pub reachable: Vec<bool>,
    pub metadata: MapMetadata,
}

impl PowerMap {
    pub fn value(&self, ix: usize, iy: usize) -> f64 {
        self.values[iy * self.grid.dims().0 + ix]
    }
}

/// Evaluates received power at every grid point with one ray tree shared by all receivers.
#[allow(clippy::too_many_arguments)]
pub fn evaluate_grid(
    env: &Environment,
    tx: &AntennaSpec,
    rx_template: &AntennaSpec,
    grid: &RxGrid,
    cfg: &LaunchConfig,
    band: &BandConfig,
    budget: &LinkBudget,
    exec: Execution,
) -> Result<PowerMap, LinkError> {
    band.validate()?;
    if !grid.is_valid() {
        return Err(LinkError::InvalidGrid(*grid));
    }
    let finder = PathFinder::new(env.scene, tx.position, *cfg, exec)?.with_receiver_plane(
        grid.height,
        grid.x_min,
        grid.x_max,
        grid.y_min,
        grid.y_max,
    );
    let points = grid.points();
    let results = exec.map_indexed(points.len(), |i| {
        let rx_pos = points[i];
        if env.scene.containing_box(rx_pos).is_some() {
            return Ok((f64::NEG_INFINITY, false));
        }
        let paths = finder.paths_to(rx_pos)?;
        let rx = rx_template.at(rx_pos);
        Ok((to_dbm(budget, power_ratio(env, &paths, tx, &rx, band)), true))
    });
    let mut values = Vec::with_capacity(points.len());
    let mut reachable = Vec::with_capacity(points.len());
    for r in results {
        let (v, ok) = r.map_err(LinkError::Path)?;
        values.push(v);
        reachable.push(ok);
    }
    Ok(PowerMap {
        grid: *grid,
        values,
        reachable,
        metadata: MapMetadata {
            scenario_hash: String::new(),
            engine: Some(*cfg),
        },
    })
}

/// Received power between two antennas using the full path search.
pub fn point_power(
    env: &Environment,
    tx: &AntennaSpec,
    rx: &AntennaSpec,
    cfg: &LaunchConfig,
    band: &BandConfig,
    budget: &LinkBudget,
) -> Result<PowerResult, LinkError> {
    band.validate()?;
    let finder = PathFinder::new(env.scene, tx.position, *cfg, Execution::Sequential)?;
    let paths = finder.paths_to(rx.position)?;
    Ok(received_power(env, &paths, tx, rx, band, budget))
}
