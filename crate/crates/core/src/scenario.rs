//! Declarative scenarios: file format, validation and the warehouse presets.
//!
//! Scenario files are TOML. Lengths are meters, frequencies hertz, powers dBm.
//! Shelves are perfect conductors; the floor material is configurable.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::antenna::{default_pattern_exponent, enforce_directivity_bound, AntennaSpec, Polarization, DEFAULT_GAIN_DBI};
use crate::exec::Execution;
use crate::geometry::{Aabb, Floor, FloorRect, GeometryError, MaterialId, Scene, Vec3};
use crate::link::{evaluate_grid, BandConfig, Environment, LinkBudget, LinkError, PowerMap, RxGrid};
use crate::materials::Material;
use crate::pathfinder::LaunchConfig;

pub const SCHEMA_VERSION: u32 = 1;

pub const FLOOR_MATERIAL: MaterialId = MaterialId(0);
pub const SHELF_MATERIAL: MaterialId = MaterialId(1);

pub const PRESETS: [&str; 12] = [
    "two-shelf-center",
    "two-shelf-end",
    "sixteen-shelf-center",
    "sixteen-shelf-end",
    "four-cluster-center",
    "four-cluster-end",
    "pol-hh",
    "pol-hv",
    "pol-vh",
    "lying-vv",
    "lying-hv-long",
    "lying-hv-trans",
];

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ScenarioError {
    #[error("syntax error at line {line}, column {column}: {message}")]
    Syntax { line: usize, column: usize, message: String },
    #[error("unsupported schema_version {0} (expected {SCHEMA_VERSION})")]
    SchemaVersion(u32),
    #[error("unknown preset '{name}'; valid presets: {}", PRESETS.join(", "))]
    UnknownPreset { name: String },
    #[error("transmitter at {0:?} is inside a shelf")]
    TxInsideGeometry(Vec3),
    #[error("transmitter at {0:?} is outside the floor extent")]
    TxOutsideFloor(Vec3),
    #[error("receiver grid extends outside the floor")]
    GridOutsideFloor,
    #[error("shelf {0} extends outside the floor extent")]
    GeometryOutsideFloor(usize),
    #[error("shelves {0} and {1} overlap")]
    OverlappingBoxes(usize, usize),
    #[error("invalid value: {0}")]
    InvalidValue(String),
}

impl ScenarioError {
    /// Stable machine-readable error code.
    pub fn code(&self) -> &'static str {
        match self {
            ScenarioError::Syntax { .. } => "syntax",
            ScenarioError::SchemaVersion(_) => "schema-version",
            ScenarioError::UnknownPreset { .. } => "unknown-preset",
            ScenarioError::TxInsideGeometry(_) => "tx-inside-geometry",
            ScenarioError::TxOutsideFloor(_) => "tx-outside-floor",
            ScenarioError::GridOutsideFloor => "grid-outside-floor",
            ScenarioError::GeometryOutsideFloor(_) => "geometry-outside-floor",
            ScenarioError::OverlappingBoxes(..) => "overlapping-boxes",
            ScenarioError::InvalidValue(_) => "invalid-value",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FloorSpec {
    pub extent_x: f64,
    pub extent_y: f64,
    #[serde(default = "FloorSpec::default_thickness")]
    pub thickness: f64,
    #[serde(default = "FloorSpec::default_material")]
    pub material: Material,
}

impl FloorSpec {
    fn default_thickness() -> f64 {
        0.3
    }
    fn default_material() -> Material {
        Material::CONCRETE
    }
}

/// Box given by its corners.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BoxSpec {
    pub min: Vec3,
    pub max: Vec3,
}

/// Block of `rows` shelves along x by `cols` shelves along y.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ClusterGenerator {
    pub origin: Vec3,
    pub rows: u32,
    pub cols: u32,
    #[serde(default = "ClusterGenerator::default_shelf")]
    pub shelf: Vec3,
    #[serde(default = "ClusterGenerator::default_gap")]
    pub gap: f64,
    #[serde(default = "ClusterGenerator::default_clearance")]
    pub clearance: f64,
}

impl ClusterGenerator {
    fn default_shelf() -> Vec3 {
        Vec3::new(1.3, 1.3, 2.0)
    }
    fn default_gap() -> f64 {
        0.05
    }
    fn default_clearance() -> f64 {
        0.3
    }

    pub fn new(origin: Vec3, rows: u32, cols: u32) -> Self {
        ClusterGenerator {
            origin,
            rows,
            cols,
            shelf: Self::default_shelf(),
            gap: Self::default_gap(),
            clearance: Self::default_clearance(),
        }
    }

    /// Footprint size `(x, y)` of the whole cluster.
    pub fn footprint(&self) -> (f64, f64) {
        let span = |n: u32, s: f64| n as f64 * s + n.saturating_sub(1) as f64 * self.gap;
        (span(self.rows, self.shelf.x), span(self.cols, self.shelf.y))
    }

    pub fn boxes(&self) -> Vec<BoxSpec> {
        let z0 = self.origin.z + self.clearance;
        let mut out = Vec::with_capacity((self.rows * self.cols) as usize);
        for j in 0..self.cols {
            for i in 0..self.rows {
                let x0 = self.origin.x + i as f64 * (self.shelf.x + self.gap);
                let y0 = self.origin.y + j as f64 * (self.shelf.y + self.gap);
                out.push(BoxSpec {
                    min: Vec3::new(x0, y0, z0),
                    max: Vec3::new(x0 + self.shelf.x, y0 + self.shelf.y, z0 + self.shelf.z),
                });
            }
        }
        out
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ShelvesSpec {
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub boxes: Vec<BoxSpec>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub clusters: Vec<ClusterGenerator>,
}

impl ShelvesSpec {
    /// Explicit boxes first, then generated ones in generator order.
    pub fn expand(&self) -> Vec<BoxSpec> {
        let mut out = self.boxes.clone();
        for c in &self.clusters {
            out.extend(c.boxes());
        }
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AntennaParams {
    #[serde(default = "AntennaParams::default_gain")]
    pub gain_max_dbi: f64,
    #[serde(default = "default_pattern_exponent")]
    pub pattern_exponent: f64,
}

impl AntennaParams {
    fn default_gain() -> f64 {
        DEFAULT_GAIN_DBI
    }
}

impl Default for AntennaParams {
    fn default() -> Self {
        AntennaParams {
            gain_max_dbi: DEFAULT_GAIN_DBI,
            pattern_exponent: default_pattern_exponent(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TxSpec {
    pub position: Vec3,
    pub polarization: Polarization,
    #[serde(default)]
    pub antenna: AntennaParams,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RxSpec {
    pub grid: RxGrid,
    pub polarization: Polarization,
    #[serde(default)]
    pub antenna: AntennaParams,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioSpec {
    pub schema_version: u32,
    #[serde(default)]
    pub name: String,
    pub floor: FloorSpec,
    #[serde(default)]
    pub shelves: ShelvesSpec,
    pub tx: TxSpec,
    pub rx: RxSpec,
    #[serde(default)]
    pub band: BandConfig,
    #[serde(default)]
    pub budget: LinkBudget,
    #[serde(default)]
    pub engine: LaunchConfig,
}

/// Everything needed to evaluate a scenario.
#[derive(Debug, Clone)]
pub struct Simulation {
    pub scene: Scene,
    pub materials: Vec<Material>,
    pub tx: AntennaSpec,
    /// Receiver antenna; its position is set per grid point.
    pub rx: AntennaSpec,
    pub grid: RxGrid,
    pub band: BandConfig,
    pub budget: LinkBudget,
    pub engine: LaunchConfig,
    pub scenario_hash: String,
}

impl Simulation {
    pub fn run(&self, exec: Execution) -> Result<PowerMap, LinkError> {
        let env = Environment::new(&self.scene, &self.materials);
        let mut map = evaluate_grid(&env, &self.tx, &self.rx, &self.grid, &self.engine, &self.band, &self.budget, exec)?;
        map.metadata.scenario_hash = self.scenario_hash.clone();
        Ok(map)
    }
}

fn antenna(position: Vec3, pol: Polarization, p: &AntennaParams) -> AntennaSpec {
    let mut a = AntennaSpec::new(position, pol);
    a.gain_max_dbi = p.gain_max_dbi;
    a.pattern_exponent = p.pattern_exponent;
    enforce_directivity_bound(&mut a);
    a
}

impl ScenarioSpec {
    pub fn floor_rect(&self) -> FloorRect {
        FloorRect {
            x_min: 0.0,
            x_max: self.floor.extent_x,
            y_min: 0.0,
            y_max: self.floor.extent_y,
        }
    }

    /// Hex SHA-256 of the canonical serialization.
    pub fn hash(&self) -> String {
        let digest = Sha256::digest(serialize_scenario(self).as_bytes());
        let mut s = String::with_capacity(64);
        for b in digest {
            let _ = write!(s, "{b:02x}");
        }
        s
    }

    pub fn validate(&self) -> Result<(), ScenarioError> {
        self.build().map(|_| ())
    }

    pub fn build(&self) -> Result<Simulation, ScenarioError> {
        if self.schema_version != SCHEMA_VERSION {
            return Err(ScenarioError::SchemaVersion(self.schema_version));
        }
        let invalid = |what: &str| Err(ScenarioError::InvalidValue(what.to_string()));
        if !(self.floor.extent_x > 0.0 && self.floor.extent_y > 0.0 && self.floor.thickness >= 0.0) {
            return invalid("floor extents must be positive");
        }
        if !self.floor.material.is_valid() {
            return invalid("floor material needs eps_r >= 1 and sigma >= 0");
        }
        for p in [&self.tx.antenna, &self.rx.antenna] {
            if !(p.gain_max_dbi.is_finite() && p.pattern_exponent > 0.0 && p.pattern_exponent.is_finite()) {
                return invalid("antenna gain must be finite and pattern_exponent positive");
            }
        }
        if self.band.validate().is_err() {
            return invalid("band needs f_center > 0, 0 <= bandwidth < 2 f_center and an odd n_freq_samples");
        }
        if !self.rx.grid.is_valid() {
            return invalid("grid needs positive spacing and ordered extents");
        }
        for c in &self.shelves.clusters {
            let ok = c.rows > 0
                && c.cols > 0
                && c.gap >= 0.0
                && c.clearance >= 0.0
                && c.shelf.x > 0.0
                && c.shelf.y > 0.0
                && c.shelf.z > 0.0;
            if !ok {
                return invalid("cluster needs positive counts and shelf size, non-negative gap and clearance");
            }
        }
        let rect = self.floor_rect();
        let boxes: Vec<Aabb> = self
            .shelves
            .expand()
            .iter()
            .map(|b| Aabb::new(b.min, b.max, SHELF_MATERIAL))
            .collect();
        for (i, b) in boxes.iter().enumerate() {
            if !b.is_valid() {
                return Err(ScenarioError::InvalidValue(format!("shelf {i} has min >= max on some axis")));
            }
            let inside = b.min.x >= rect.x_min
                && b.max.x <= rect.x_max
                && b.min.y >= rect.y_min
                && b.max.y <= rect.y_max
                && b.min.z >= 0.0;
            if !inside {
                return Err(ScenarioError::GeometryOutsideFloor(i));
            }
        }
        let scene = Scene::new(
            boxes,
            Some(Floor {
                extent: rect,
                material_id: FLOOR_MATERIAL,
            }),
        )
        .map_err(|e| match e {
            GeometryError::OverlappingBoxes(a, b) => ScenarioError::OverlappingBoxes(a, b),
            other => ScenarioError::InvalidValue(other.to_string()),
        })?;
        let tx = self.tx.position;
        if !(rect.contains_xy(tx, 0.0) && tx.z > 0.0) {
            return Err(ScenarioError::TxOutsideFloor(tx));
        }
        if scene.containing_box(tx).is_some() {
            return Err(ScenarioError::TxInsideGeometry(tx));
        }
        let g = &self.rx.grid;
        let (nx, ny) = g.dims();
        let far = g.point(nx - 1, ny - 1);
        let grid_inside = g.x_min >= rect.x_min
            && far.x <= rect.x_max
            && g.y_min >= rect.y_min
            && far.y <= rect.y_max
            && g.height > 0.0;
        if !grid_inside {
            return Err(ScenarioError::GridOutsideFloor);
        }
        Ok(Simulation {
            scene,
            materials: vec![self.floor.material, Material::Pec],
            tx: antenna(tx, self.tx.polarization, &self.tx.antenna),
            rx: antenna(Vec3::ZERO, self.rx.polarization, &self.rx.antenna),
            grid: *g,
            band: self.band,
            budget: self.budget,
            engine: self.engine,
            scenario_hash: self.hash(),
        })
    }
}

fn line_col(text: &str, offset: usize) -> (usize, usize) {
    let before = &text[..offset.min(text.len())];
    let line = before.matches('\n').count() + 1;
    let column = before.len() - before.rfind('\n').map_or(0, |i| i + 1) + 1;
    (line, column)
}

/// Parses and validates a scenario file.
pub fn parse_scenario(text: &str) -> Result<ScenarioSpec, ScenarioError> {
    let spec: ScenarioSpec = toml::from_str(text).map_err(|e| {
        let (line, column) = e.span().map_or((0, 0), |s| line_col(text, s.start));
        ScenarioError::Syntax {
            line,
            column,
            message: e.message().to_string(),
        }
    })?;
    spec.validate()?;
    Ok(spec)
}

/// Canonical TOML form: fixed key order, generators kept as generators.
pub fn serialize_scenario(s: &ScenarioSpec) -> String {
    toml::to_string(s).expect("scenario types serialize to TOML")
}

const FLOOR_X: f64 = 40.0;
const FLOOR_Y: f64 = 20.0;
const TX_HEIGHT: f64 = 1.5;
const LYING_TX_HEIGHT: f64 = 0.2;
const CLEARANCE: f64 = 0.3;

fn base(name: &str, shelves: ShelvesSpec, tx: Vec3, tx_pol: Polarization, rx_pol: Polarization) -> ScenarioSpec {
    ScenarioSpec {
        schema_version: SCHEMA_VERSION,
        name: name.to_string(),
        floor: FloorSpec {
            extent_x: FLOOR_X,
            extent_y: FLOOR_Y,
            thickness: 0.3,
            material: Material::CONCRETE,
        },
        shelves,
        tx: TxSpec {
            position: tx,
            polarization: tx_pol,
            antenna: AntennaParams::default(),
        },
        rx: RxSpec {
            grid: RxGrid {
                x_min: 0.0,
                x_max: FLOOR_X,
                y_min: 0.0,
                y_max: FLOOR_Y,
                spacing: 0.25,
                height: 0.2,
            },
            polarization: rx_pol,
            antenna: AntennaParams::default(),
        },
        band: BandConfig::default(),
        budget: LinkBudget::default(),
        engine: LaunchConfig::default(),
    }
}

/// Parallel shelves 16 m long, 0.5 m thick and 3 m tall above the air gap, 1.5 m apart,
/// centered on the warehouse.
fn shelf_rows(count: usize) -> ShelvesSpec {
    let pitch = 2.0;
    let first_center = FLOOR_X / 2.0 - pitch * (count as f64 - 1.0) / 2.0;
    let boxes = (0..count)
        .map(|i| {
            let cx = first_center + i as f64 * pitch;
            BoxSpec {
                min: Vec3::new(cx - 0.25, 2.0, CLEARANCE),
                max: Vec3::new(cx + 0.25, 18.0, CLEARANCE + 3.0),
            }
        })
        .collect();
    ShelvesSpec {
        boxes,
        clusters: Vec::new(),
    }
}

/// Four 7 x 2 clusters in a 2 x 2 layout with 1.5 m corridors, symmetric about the warehouse center.
fn four_clusters() -> ShelvesSpec {
    let proto = ClusterGenerator::new(Vec3::ZERO, 7, 2);
    let (w, d) = proto.footprint();
    let corridor = 1.5;
    let xs = [FLOOR_X / 2.0 - corridor / 2.0 - w, FLOOR_X / 2.0 + corridor / 2.0];
    let ys = [FLOOR_Y / 2.0 - corridor / 2.0 - d, FLOOR_Y / 2.0 + corridor / 2.0];
    let clusters = ys
        .iter()
        .flat_map(|&y| xs.iter().map(move |&x| ClusterGenerator::new(Vec3::new(x, y, 0.0), 7, 2)))
        .collect();
    ShelvesSpec {
        boxes: Vec::new(),
        clusters,
    }
}

fn two_shelf_end_tx(shelves: &ShelvesSpec) -> Vec3 {
    let outer = shelves.boxes.iter().map(|b| b.min.x).fold(f64::INFINITY, f64::min);
    Vec3::new(outer - 1.0, FLOOR_Y / 2.0, TX_HEIGHT)
}

fn four_cluster_end_tx(shelves: &ShelvesSpec, z: f64) -> Vec3 {
    let left = shelves.clusters.iter().map(|c| c.origin.x).fold(f64::INFINITY, f64::min);
    Vec3::new(left - 2.0, FLOOR_Y / 2.0, z)
}

pub fn build_preset(name: &str) -> Result<ScenarioSpec, ScenarioError> {
    use Polarization::{HorizontalLongitudinal as HL, HorizontalTransverse as HT, Vertical as V};
    let center = Vec3::new(FLOOR_X / 2.0, FLOOR_Y / 2.0, TX_HEIGHT);
    let spec = match name {
        "two-shelf-center" => base(name, shelf_rows(2), center, V, V),
        "two-shelf-end" => {
            let s = shelf_rows(2);
            let tx = two_shelf_end_tx(&s);
            base(name, s, tx, V, V)
        }
        "sixteen-shelf-center" => base(name, shelf_rows(16), center, V, V),
        "sixteen-shelf-end" => {
            let s = shelf_rows(16);
            let tx = two_shelf_end_tx(&s);
            base(name, s, tx, V, V)
        }
        "four-cluster-center" => base(name, four_clusters(), center, V, V),
        "four-cluster-end" | "pol-hh" | "pol-hv" | "pol-vh" | "lying-vv" | "lying-hv-long" | "lying-hv-trans" => {
            let s = four_clusters();
            let lying = name.starts_with("lying");
            let tx = four_cluster_end_tx(&s, if lying { LYING_TX_HEIGHT } else { TX_HEIGHT });
            let (tp, rp) = match name {
                "pol-hh" => (HT, HT),
                "pol-hv" => (HT, V),
                "pol-vh" => (V, HT),
                "lying-hv-long" => (HL, V),
                "lying-hv-trans" => (HT, V),
                _ => (V, V),
            };
            base(name, s, tx, tp, rp)
        }
        _ => {
            return Err(ScenarioError::UnknownPreset { name: name.to_string() });
        }
    };
    Ok(spec)
}
