//! Propagation path discovery.
//!
//! Specular paths come from shooting-and-bouncing rays ([`sbr`]) and are then
//! refined to exact geometry by the image method over the captured reflection
//! sequence. The same image construction enumerates paths exhaustively
//! ([`image_method_paths`]) for small scenes. Single-diffraction paths are
//! found edge by edge from the Keller condition.

pub mod launch;
pub mod sbr;

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::diffraction::in_exterior;
use crate::exec::Execution;
use crate::geometry::{enumerate_edges, mirror_point, EdgeSpec, Scene, SurfaceId, Vec3};

pub use launch::{launch_directions, LaunchSet};
pub use sbr::{CaptureIndex, RayTree};

/// Tolerance for specular points landing on their surface rectangle.
const ON_SURFACE_TOL: f64 = 1e-9;

/// Upper bound on reflection sequences the exhaustive enumerators will visit.
pub const DEFAULT_SEQUENCE_BUDGET: u64 = 5_000_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum LegReflectors {
    /// Diffraction legs may bounce off the floor only.
    Floor,
    /// Diffraction legs may bounce off any surface (exhaustive, budget-checked).
    All,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LaunchConfig {
    #[serde(default = "defaults::tessellation_order")]
    pub tessellation_order: u32,
    #[serde(default = "defaults::max_reflections")]
    pub max_reflections: u32,
    #[serde(default = "defaults::enable_diffraction")]
    pub enable_diffraction: bool,
    #[serde(default = "defaults::max_reflections_with_diffraction")]
    pub max_reflections_with_diffraction: u32,
    #[serde(default = "defaults::leg_reflectors")]
    pub leg_reflectors: LegReflectors,
}

mod defaults {
    use super::LegReflectors;
    pub fn tessellation_order() -> u32 {
        5
    }
    pub fn max_reflections() -> u32 {
        8
    }
    pub fn enable_diffraction() -> bool {
        true
    }
    pub fn max_reflections_with_diffraction() -> u32 {
        2
    }
    pub fn leg_reflectors() -> LegReflectors {
        LegReflectors::Floor
    }
}

impl Default for LaunchConfig {
    fn default() -> Self {
        LaunchConfig {
            tessellation_order: defaults::tessellation_order(),
            max_reflections: defaults::max_reflections(),
            enable_diffraction: defaults::enable_diffraction(),
            max_reflections_with_diffraction: defaults::max_reflections_with_diffraction(),
            leg_reflectors: defaults::leg_reflectors(),
        }
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PathError {
    #[error("transmitter at {0:?} is inside scene geometry")]
    TxInsideGeometry(Vec3),
    #[error("receiver at {0:?} is inside scene geometry")]
    RxInsideGeometry(Vec3),
    #[error("enumeration needs {needed} reflection sequences, budget is {budget}")]
    Budget { needed: u64, budget: u64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum SigElem {
    Surface(SurfaceId),
    Edge(u32),
}

pub type Signature = Vec<SigElem>;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum InteractionKind {
    Reflection(SurfaceId),
    /// Index into the scene's edge list.
    Diffraction(u32),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Interaction {
    pub kind: InteractionKind,
    pub point: Vec3,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PropPath {
    pub tx: Vec3,
    pub rx: Vec3,
    pub interactions: Vec<Interaction>,
    pub segment_lengths: Vec<f64>,
    pub total_length: f64,
}

impl PropPath {
    pub fn new(tx: Vec3, rx: Vec3, interactions: Vec<Interaction>) -> Self {
        let mut pts = Vec::with_capacity(interactions.len() + 2);
        pts.push(tx);
        pts.extend(interactions.iter().map(|i| i.point));
        pts.push(rx);
        let segment_lengths: Vec<f64> = pts.windows(2).map(|w| w[0].distance(w[1])).collect();
        let total_length = segment_lengths.iter().sum();
        PropPath {
            tx,
            rx,
            interactions,
            segment_lengths,
            total_length,
        }
    }

    /// Transmitter, interaction points, receiver.
    pub fn vertices(&self) -> Vec<Vec3> {
        let mut pts = Vec::with_capacity(self.interactions.len() + 2);
        pts.push(self.tx);
        pts.extend(self.interactions.iter().map(|i| i.point));
        pts.push(self.rx);
        pts
    }

    pub fn departure_direction(&self) -> Vec3 {
        let first = self.interactions.first().map_or(self.rx, |i| i.point);
        (first - self.tx).normalized()
    }

    /// Propagation direction of the last segment (pointing toward the receiver).
    pub fn arrival_direction(&self) -> Vec3 {
        let last = self.interactions.last().map_or(self.tx, |i| i.point);
        (self.rx - last).normalized()
    }

    pub fn signature(&self) -> Signature {
        self.interactions
            .iter()
            .map(|i| match i.kind {
                InteractionKind::Reflection(s) => SigElem::Surface(s),
                InteractionKind::Diffraction(e) => SigElem::Edge(e),
            })
            .collect()
    }

    pub fn diffraction_index(&self) -> Option<usize> {
        self.interactions
            .iter()
            .position(|i| matches!(i.kind, InteractionKind::Diffraction(_)))
    }

    pub fn is_line_of_sight(&self) -> bool {
        self.interactions.is_empty()
    }
}

fn check_endpoints(scene: &Scene, tx: Vec3, rx: Vec3) -> Result<(), PathError> {
    if scene.containing_box(tx).is_some() {
        return Err(PathError::TxInsideGeometry(tx));
    }
    if scene.containing_box(rx).is_some() {
        return Err(PathError::RxInsideGeometry(rx));
    }
    Ok(())
}

/// Image of `source` after mirroring through each surface in order.
fn image_through(scene: &Scene, source: Vec3, surfaces: &[SurfaceId]) -> Vec3 {
    surfaces.iter().fold(source, |p, &s| {
        let (n, p0) = scene.surface_plane(s);
        mirror_point(p, p0, n)
    })
}

/// Specular points of `source -> surfaces... -> target`, validated against surface
/// bounds and front-face orientation. Occlusion is not checked here.
fn specular_chain(scene: &Scene, source: Vec3, surfaces: &[SurfaceId], target: Vec3) -> Option<Vec<Vec3>> {
    let n = surfaces.len();
    let mut images = Vec::with_capacity(n + 1);
    images.push(source);
    for &s in surfaces {
        let (nrm, p0) = scene.surface_plane(s);
        let last = *images.last().expect("non-empty");
        // The source image must sit in front of the next mirror.
        if (last - p0).dot(nrm) <= 0.0 {
            return None;
        }
        images.push(mirror_point(last, p0, nrm));
    }
    let mut points = vec![Vec3::ZERO; n];
    let mut cur = target;
    for k in (0..n).rev() {
        let (nrm, p0) = scene.surface_plane(surfaces[k]);
        let img = images[k + 1];
        let dc = (cur - p0).dot(nrm);
        let di = (img - p0).dot(nrm);
        // cur must be in front, its image target behind.
        if dc <= 0.0 || di >= 0.0 {
            return None;
        }
        let t = dc / (dc - di);
        let p = cur + (img - cur) * t;
        let axis_snap = match surfaces[k] {
            SurfaceId::Floor => p.with_axis(2, 0.0),
            SurfaceId::Face { face, .. } => p.with_axis((face / 2) as usize, p0.axis((face / 2) as usize)),
        };
        if !scene.surface_contains(surfaces[k], axis_snap, ON_SURFACE_TOL) {
            return None;
        }
        points[k] = axis_snap;
        cur = axis_snap;
    }
    Some(points)
}

fn polyline_clear(scene: &Scene, pts: &[Vec3]) -> bool {
    pts.windows(2).all(|w| !scene.occluded(w[0], w[1]))
}

/// Exact specular path for a reflection sequence, if it exists and is unoccluded.
pub fn refine_specular(scene: &Scene, tx: Vec3, rx: Vec3, surfaces: &[SurfaceId]) -> Option<PropPath> {
    let points = specular_chain(scene, tx, surfaces, rx)?;
    let mut pts = Vec::with_capacity(points.len() + 2);
    pts.push(tx);
    pts.extend_from_slice(&points);
    pts.push(rx);
    if pts.windows(2).any(|w| w[0].distance(w[1]) <= 1e-9) {
        return None;
    }
    if !polyline_clear(scene, &pts) {
        return None;
    }
    let interactions = surfaces
        .iter()
        .zip(points)
        .map(|(&s, point)| Interaction {
            kind: InteractionKind::Reflection(s),
            point,
        })
        .collect();
    Some(PropPath::new(tx, rx, interactions))
}

fn sequence_count(surfaces: u64, max_order: u32) -> u64 {
    let mut total: u64 = 1;
    let mut level: u64 = 1;
    for k in 0..max_order {
        let branch = if k == 0 { surfaces } else { surfaces.saturating_sub(1) };
        level = level.saturating_mul(branch);
        total = total.saturating_add(level);
    }
    total
}

/// All reflection sequences up to `max_order` whose successive images stay in front of the next mirror.
fn enumerate_sequences(
    scene: &Scene,
    source: Vec3,
    surfaces: &[SurfaceId],
    max_order: u32,
    budget: u64,
) -> Result<Vec<Vec<SurfaceId>>, PathError> {
    let needed = sequence_count(surfaces.len() as u64, max_order);
    if needed > budget {
        return Err(PathError::Budget { needed, budget });
    }
    let mut out = vec![Vec::new()];
    let mut stack: Vec<(Vec<SurfaceId>, Vec3)> = vec![(Vec::new(), source)];
    while let Some((seq, img)) = stack.pop() {
        if seq.len() as u32 >= max_order {
            continue;
        }
        for &s in surfaces {
            if seq.last() == Some(&s) {
                continue;
            }
            let (n, p0) = scene.surface_plane(s);
            if (img - p0).dot(n) <= 0.0 {
                continue;
            }
            let mut next = seq.clone();
            next.push(s);
            out.push(next.clone());
            stack.push((next, mirror_point(img, p0, n)));
        }
    }
    out.sort();
    Ok(out)
}

/// Exhaustive image-method enumeration of specular paths up to `max_order` reflections.
pub fn image_method_paths(scene: &Scene, tx: Vec3, rx: Vec3, max_order: u32) -> Result<Vec<PropPath>, PathError> {
    image_method_paths_with_budget(scene, tx, rx, max_order, DEFAULT_SEQUENCE_BUDGET)
}

pub fn image_method_paths_with_budget(
    scene: &Scene,
    tx: Vec3,
    rx: Vec3,
    max_order: u32,
    budget: u64,
) -> Result<Vec<PropPath>, PathError> {
    check_endpoints(scene, tx, rx)?;
    let surfaces = scene.surfaces();
    let seqs = enumerate_sequences(scene, tx, &surfaces, max_order, budget)?;
    Ok(seqs
        .iter()
        .filter_map(|seq| refine_specular(scene, tx, rx, seq))
        .collect())
}

/// Specular paths found by shooting and bouncing rays, refined by the image method.
pub fn trace_sbr(scene: &Scene, tx: Vec3, rx: Vec3, cfg: &LaunchConfig) -> Result<Vec<PropPath>, PathError> {
    check_endpoints(scene, tx, rx)?;
    let tree = RayTree::trace(scene, tx, cfg.tessellation_order, cfg.max_reflections, Execution::Sequential);
    Ok(refine_captured(scene, tx, rx, tree.capture(rx)))
}

fn refine_captured(scene: &Scene, tx: Vec3, rx: Vec3, sigs: BTreeSet<Vec<SurfaceId>>) -> Vec<PropPath> {
    // BTreeSet order equals signature order for pure reflection sequences.
    sigs.iter().filter_map(|s| refine_specular(scene, tx, rx, s)).collect()
}

/// Point on the edge minimizing `|p - q| + |q - r|` (closed form by unfolding about the edge).
pub fn keller_point(edge: &EdgeSpec, p: Vec3, r: Vec3) -> Option<(Vec3, f64)> {
    let e = edge.direction();
    let len = edge.length();
    let wp = p - edge.a;
    let wr = r - edge.a;
    let t1 = wp.dot(e);
    let t2 = wr.dot(e);
    let rho1 = (wp - e * t1).norm();
    let rho2 = (wr - e * t2).norm();
    if rho1 + rho2 < 1e-12 {
        return None;
    }
    let t = t1 + (t2 - t1) * rho1 / (rho1 + rho2);
    (t > 0.0 && t < len).then(|| (edge.a + e * t, t))
}

/// Leg reflection sequences (as seen from the leg's free endpoint).
fn leg_sequences(scene: &Scene, source: Vec3, cfg: &LaunchConfig) -> Result<Vec<Vec<SurfaceId>>, PathError> {
    let max = cfg.max_reflections_with_diffraction;
    match cfg.leg_reflectors {
        LegReflectors::Floor => {
            let mut v = vec![Vec::new()];
            if max >= 1 && scene.floor.is_some() && source.z > 0.0 {
                v.push(vec![SurfaceId::Floor]);
            }
            Ok(v)
        }
        LegReflectors::All => enumerate_sequences(scene, source, &scene.surfaces(), max, DEFAULT_SEQUENCE_BUDGET),
    }
}

struct LegSet {
    seqs: Vec<Vec<SurfaceId>>,
    images: Vec<Vec3>,
}

impl LegSet {
    fn new(scene: &Scene, source: Vec3, cfg: &LaunchConfig) -> Result<Self, PathError> {
        let seqs = leg_sequences(scene, source, cfg)?;
        let images = seqs.iter().map(|s| image_through(scene, source, s)).collect();
        Ok(LegSet { seqs, images })
    }
}

fn diffraction_paths_with_legs(
    scene: &Scene,
    edges: &[EdgeSpec],
    tx: Vec3,
    rx: Vec3,
    tx_legs: &LegSet,
    rx_legs: &LegSet,
) -> Vec<PropPath> {
    let mut out = Vec::new();
    for (ei, edge) in edges.iter().enumerate() {
        for (ts, ti) in tx_legs.seqs.iter().zip(&tx_legs.images) {
            for (rs, ri) in rx_legs.seqs.iter().zip(&rx_legs.images) {
                let Some((q, _)) = keller_point(edge, *ti, *ri) else {
                    continue;
                };
                if !in_exterior(edge, *ti - q) || !in_exterior(edge, *ri - q) {
                    continue;
                }
                let Some(tx_pts) = specular_chain(scene, tx, ts, q) else {
                    continue;
                };
                // Receiver leg built backwards from the receiver, then reversed.
                let Some(mut rx_pts) = specular_chain(scene, rx, rs, q) else {
                    continue;
                };
                rx_pts.reverse();
                let prev = tx_pts.last().copied().unwrap_or(tx);
                let next = rx_pts.first().copied().unwrap_or(rx);
                if !in_exterior(edge, prev - q) || !in_exterior(edge, next - q) {
                    continue;
                }
                let mut pts = Vec::with_capacity(tx_pts.len() + rx_pts.len() + 3);
                pts.push(tx);
                pts.extend_from_slice(&tx_pts);
                pts.push(q);
                pts.extend_from_slice(&rx_pts);
                pts.push(rx);
                if pts.windows(2).any(|w| w[0].distance(w[1]) <= 1e-9) || !polyline_clear(scene, &pts) {
                    continue;
                }
                let mut interactions = Vec::with_capacity(pts.len() - 2);
                for (&s, &p) in ts.iter().zip(&tx_pts) {
                    interactions.push(Interaction {
                        kind: InteractionKind::Reflection(s),
                        point: p,
                    });
                }
                interactions.push(Interaction {
                    kind: InteractionKind::Diffraction(ei as u32),
                    point: q,
                });
                // rs lists surfaces from the receiver side; the path visits them in reverse.
                for (&s, &p) in rs.iter().rev().zip(&rx_pts) {
                    interactions.push(Interaction {
                        kind: InteractionKind::Reflection(s),
                        point: p,
                    });
                }
                out.push(PropPath::new(tx, rx, interactions));
            }
        }
    }
    out
}

/// Single-diffraction paths over every scene edge, optionally with reflections on either leg.
pub fn find_diffraction_paths(scene: &Scene, tx: Vec3, rx: Vec3, cfg: &LaunchConfig) -> Result<Vec<PropPath>, PathError> {
    check_endpoints(scene, tx, rx)?;
    if !cfg.enable_diffraction {
        return Ok(Vec::new());
    }
    let edges = enumerate_edges(scene);
    let tx_legs = LegSet::new(scene, tx, cfg)?;
    let rx_legs = LegSet::new(scene, rx, cfg)?;
    let mut paths = diffraction_paths_with_legs(scene, &edges, tx, rx, &tx_legs, &rx_legs);
    sort_and_dedup(&mut paths);
    Ok(paths)
}

fn sort_and_dedup(paths: &mut Vec<PropPath>) {
    let mut keyed: Vec<(Signature, PropPath)> = paths.drain(..).map(|p| (p.signature(), p)).collect();
    keyed.sort_by(|a, b| a.0.cmp(&b.0));
    keyed.dedup_by(|a, b| a.0 == b.0);
    paths.extend(keyed.into_iter().map(|(_, p)| p));
}

/// Per-transmitter path search reused across many receivers.
#[derive(Debug)]
pub struct PathFinder<'a> {
    scene: &'a Scene,
    cfg: LaunchConfig,
    tx: Vec3,
    edges: Vec<EdgeSpec>,
    tree: RayTree,
    index: Option<CaptureIndex>,
    tx_legs: Option<LegSetOwned>,
}

#[derive(Debug)]
struct LegSetOwned {
    seqs: Vec<Vec<SurfaceId>>,
    images: Vec<Vec3>,
}

impl<'a> PathFinder<'a> {
    pub fn new(scene: &'a Scene, tx: Vec3, cfg: LaunchConfig, exec: Execution) -> Result<Self, PathError> {
        if scene.containing_box(tx).is_some() {
            return Err(PathError::TxInsideGeometry(tx));
        }
        let tree = RayTree::trace(scene, tx, cfg.tessellation_order, cfg.max_reflections, exec);
        let tx_legs = if cfg.enable_diffraction {
            let l = LegSet::new(scene, tx, &cfg)?;
            Some(LegSetOwned {
                seqs: l.seqs,
                images: l.images,
            })
        } else {
            None
        };
        Ok(PathFinder {
            scene,
            cfg,
            tx,
            edges: enumerate_edges(scene),
            tree,
            index: None,
            tx_legs,
        })
    }

    /// Enables binned capture for receivers on the plane `z = height` within the rectangle.
    pub fn with_receiver_plane(mut self, height: f64, x0: f64, x1: f64, y0: f64, y1: f64) -> Self {
        self.index = Some(CaptureIndex::build(&self.tree, height, x0, x1, y0, y1, 0.5));
        self
    }

    pub fn tree(&self) -> &RayTree {
        &self.tree
    }

    pub fn edges(&self) -> &[EdgeSpec] {
        &self.edges
    }

    /// Specular and diffracted paths to `rx`, deduplicated and sorted by signature.
    pub fn paths_to(&self, rx: Vec3) -> Result<Vec<PropPath>, PathError> {
        if self.scene.containing_box(rx).is_some() {
            return Err(PathError::RxInsideGeometry(rx));
        }
        let sigs = match &self.index {
            Some(ix) => ix.capture(&self.tree, rx),
            None => self.tree.capture(rx),
        };
        let mut paths = refine_captured(self.scene, self.tx, rx, sigs);
        if let Some(tl) = &self.tx_legs {
            let rx_legs = LegSet::new(self.scene, rx, &self.cfg)?;
            let tx_legs = LegSet {
                seqs: tl.seqs.clone(),
                images: tl.images.clone(),
            };
            paths.extend(diffraction_paths_with_legs(self.scene, &self.edges, self.tx, rx, &tx_legs, &rx_legs));
        }
        sort_and_dedup(&mut paths);
        Ok(paths)
    }
}

#[cfg(test)]
mod tests;
