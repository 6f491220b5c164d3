//! Shooting-and-bouncing rays with reception-sphere capture.
//!
//! Ray trees depend only on the scene and the transmitter, so one tree serves
//! every receiver of a grid. [`CaptureIndex`] bins tree segments over a
//! receiver plane; its results are identical to [`RayTree::capture`].

use std::collections::BTreeSet;

use crate::exec::Execution;
use crate::geometry::{reflect_direction, Ray, Scene, SurfaceId, Vec3};

use super::launch::launch_directions;

/// Ray parameters beyond this are treated as escaped to infinity.
const FAR: f64 = 1e6;

/// Scale on the adjacent-ray radius `theta_sep * L / sqrt(3)`. Rays whose tube is
/// clipped by an edge can leave the nearest same-signature ray up to a full
/// spacing away; refinement discards the extra candidates.
pub const CAPTURE_MARGIN: f64 = 2.0;

#[derive(Debug, Clone, Copy)]
pub struct Segment {
    pub origin: Vec3,
    pub dir: Vec3,
    /// Segment length; `f64::INFINITY` for escaping rays.
    pub len: f64,
    /// Unfolded length from the transmitter to `origin`.
    pub cum: f64,
    pub ray: u32,
    /// Number of reflections before this segment.
    pub depth: u8,
}

#[derive(Debug, Clone)]
pub struct RayTree {
    pub tx: Vec3,
    pub theta_sep: f64,
    pub segments: Vec<Segment>,
    /// Reflection surfaces per ray, in order.
    surfaces: Vec<Vec<SurfaceId>>,
}

impl RayTree {
    pub fn trace(scene: &Scene, tx: Vec3, tessellation_order: u32, max_reflections: u32, exec: Execution) -> RayTree {
        let launch = launch_directions(tessellation_order);
        let per_ray = exec.map_indexed(launch.directions.len(), |i| {
            trace_one(scene, tx, launch.directions[i], i as u32, max_reflections)
        });
        let mut segments = Vec::with_capacity(per_ray.iter().map(|(s, _)| s.len()).sum());
        let mut surfaces = Vec::with_capacity(per_ray.len());
        for (segs, surf) in per_ray {
            segments.extend(segs);
            surfaces.push(surf);
        }
        RayTree {
            tx,
            theta_sep: launch.theta_sep,
            segments,
            surfaces,
        }
    }

    /// Reception-sphere slope: the capture radius at unfolded length `L` is `slope * L`.
    pub fn radius_slope(&self) -> f64 {
        CAPTURE_MARGIN * self.theta_sep / 3f64.sqrt()
    }

    pub fn signature_of(&self, seg: &Segment) -> &[SurfaceId] {
        &self.surfaces[seg.ray as usize][..seg.depth as usize]
    }

    /// Distance test against the forward line of the segment, so a segment cut
    /// short by a hit still captures receivers its tube would have reached.
    #[inline]
    fn captures(&self, seg: &Segment, rx: Vec3) -> bool {
        let w = rx - seg.origin;
        let t = w.dot(seg.dir).max(0.0);
        let dist2 = (w - seg.dir * t).norm_squared();
        let r = self.radius_slope() * (seg.cum + t);
        dist2 < r * r
    }

    /// Distinct reflection sequences of all segments whose reception sphere contains `rx`.
    pub fn capture(&self, rx: Vec3) -> BTreeSet<Vec<SurfaceId>> {
        self.capture_from(self.segments.iter(), rx)
    }

    fn capture_from<'a>(&self, segs: impl Iterator<Item = &'a Segment>, rx: Vec3) -> BTreeSet<Vec<SurfaceId>> {
        let mut out = BTreeSet::new();
        for seg in segs {
            if self.captures(seg, rx) {
                let sig = self.signature_of(seg);
                if !out.contains(sig) {
                    out.insert(sig.to_vec());
                }
            }
        }
        out
    }
}

fn trace_one(scene: &Scene, tx: Vec3, dir: Vec3, ray: u32, max_reflections: u32) -> (Vec<Segment>, Vec<SurfaceId>) {
    let mut segs = Vec::new();
    let mut surfaces = Vec::new();
    let mut r = Ray {
        origin: tx,
        direction: dir,
    };
    let mut cum = 0.0;
    for depth in 0..=max_reflections {
        let hit = scene.intersect(&r);
        let len = hit.map_or(f64::INFINITY, |h| h.t);
        segs.push(Segment {
            origin: r.origin,
            dir: r.direction,
            len,
            cum,
            ray,
            depth: depth as u8,
        });
        match hit {
            Some(h) if depth < max_reflections => {
                cum += h.t;
                surfaces.push(h.surface);
                r = Ray {
                    origin: h.point,
                    direction: reflect_direction(r.direction, h.normal).normalized(),
                };
            }
            _ => break,
        }
    }
    (segs, surfaces)
}

/// Receiver-plane binning of a ray tree's segments.
#[derive(Debug, Clone)]
pub struct CaptureIndex {
    height: f64,
    x0: f64,
    y0: f64,
    x1: f64,
    y1: f64,
    cell: f64,
    nx: usize,
    ny: usize,
    cells: Vec<Vec<u32>>,
}

impl CaptureIndex {
    /// Bins segments that can reach any receiver at `z = height` inside `[x0, x1] x [y0, y1]`.
    pub fn build(tree: &RayTree, height: f64, x0: f64, x1: f64, y0: f64, y1: f64, cell: f64) -> CaptureIndex {
        let nx = (((x1 - x0) / cell).floor() as usize + 1).max(1);
        let ny = (((y1 - y0) / cell).floor() as usize + 1).max(1);
        let mut cells = vec![Vec::new(); nx * ny];
        let s = tree.radius_slope();
        let half_diag = cell * std::f64::consts::FRAC_1_SQRT_2;
        for (idx, seg) in tree.segments.iter().enumerate() {
            let Some((ta, tb)) = relevant_interval(seg, s, height, x0, x1, y0, y1) else {
                continue;
            };
            let r_max = s * (seg.cum + tb);
            let pa = seg.origin + seg.dir * ta;
            let pb = seg.origin + seg.dir * tb;
            let lo_x = pa.x.min(pb.x) - r_max;
            let hi_x = pa.x.max(pb.x) + r_max;
            let lo_y = pa.y.min(pb.y) - r_max;
            let hi_y = pa.y.max(pb.y) + r_max;
            let ix0 = (((lo_x - x0) / cell).floor().max(0.0) as usize).min(nx - 1);
            let ix1 = (((hi_x - x0) / cell).floor().max(0.0) as usize).min(nx - 1);
            let iy0 = (((lo_y - y0) / cell).floor().max(0.0) as usize).min(ny - 1);
            let iy1 = (((hi_y - y0) / cell).floor().max(0.0) as usize).min(ny - 1);
            let reach = r_max + half_diag;
            for iy in iy0..=iy1 {
                for ix in ix0..=ix1 {
                    let c = Vec3::new(x0 + (ix as f64 + 0.5) * cell, y0 + (iy as f64 + 0.5) * cell, 0.0);
                    if distance_xy_to_segment(c, pa, pb) <= reach {
                        cells[iy * nx + ix].push(idx as u32);
                    }
                }
            }
        }
        CaptureIndex {
            height,
            x0,
            y0,
            x1,
            y1,
            cell,
            nx,
            ny,
            cells,
        }
    }

    /// Same result as [`RayTree::capture`] for any receiver.
    pub fn capture(&self, tree: &RayTree, rx: Vec3) -> BTreeSet<Vec<SurfaceId>> {
        let covered = rx.z == self.height && rx.x >= self.x0 && rx.x <= self.x1 && rx.y >= self.y0 && rx.y <= self.y1;
        if !covered {
            return tree.capture(rx);
        }
        let ix = (((rx.x - self.x0) / self.cell).floor() as usize).min(self.nx - 1);
        let iy = (((rx.y - self.y0) / self.cell).floor() as usize).min(self.ny - 1);
        let list = &self.cells[iy * self.nx + ix];
        tree.capture_from(list.iter().map(|&i| &tree.segments[i as usize]), rx)
    }

    pub fn entries(&self) -> usize {
        self.cells.iter().map(Vec::len).sum()
    }
}

/// Parameter range where the segment can lie within its capture radius of the receiver region.
#[allow(clippy::too_many_arguments)]
fn relevant_interval(seg: &Segment, s: f64, h: f64, x0: f64, x1: f64, y0: f64, y1: f64) -> Option<(f64, f64)> {
    let mut lo = 0.0f64;
    let mut hi = FAR;
    let o = seg.origin;
    let d = seg.dir;
    // Each constraint reads `a * t >= b`.
    let constraints = [
        (d.x + s, x0 - s * seg.cum - o.x),
        (-(d.x - s), -(x1 + s * seg.cum - o.x)),
        (d.y + s, y0 - s * seg.cum - o.y),
        (-(d.y - s), -(y1 + s * seg.cum - o.y)),
        (d.z + s, h - s * seg.cum - o.z),
        (-(d.z - s), -(h + s * seg.cum - o.z)),
    ];
    for (a, b) in constraints {
        if a > 0.0 {
            lo = lo.max(b / a);
        } else if a < 0.0 {
            hi = hi.min(b / a);
        } else if b > 0.0 {
            return None;
        }
    }
    // Small slack absorbs rounding in the bound algebra.
    let slack = 1e-9 * (1.0 + hi.abs());
    let lo = (lo - slack).max(0.0);
    let hi = (hi + slack).min(FAR);
    (lo <= hi).then_some((lo, hi))
}

fn distance_xy_to_segment(p: Vec3, a: Vec3, b: Vec3) -> f64 {
    let (ax, ay) = (p.x - a.x, p.y - a.y);
    let (bx, by) = (b.x - a.x, b.y - a.y);
    let len2 = bx * bx + by * by;
    let t = if len2 > 0.0 {
        ((ax * bx + ay * by) / len2).clamp(0.0, 1.0)
    } else {
        0.0
    };
    let (dx, dy) = (ax - t * bx, ay - t * by);
    (dx * dx + dy * dy).sqrt()
}
