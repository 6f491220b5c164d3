//! Vector algebra, ray/box/floor intersection and edge enumeration.
//!
//! Scenes are a (possibly absent) floor plane at `z = 0` plus a list of
//! axis-aligned boxes. All queries resolve to the globally nearest front-face
//! hit; the bounding volume hierarchy used by [`Scene`] returns exactly what a
//! linear scan over the boxes would.

use std::ops::{Add, AddAssign, Div, Mul, Neg, Sub};

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Self-intersection guard on the ray parameter, in meters.
pub const HIT_EPSILON: f64 = 1e-6;

/// Edges shorter than this are not enumerated for diffraction.
pub const MIN_EDGE_LENGTH: f64 = 0.01;

/// Exterior wedge index of a right-angle box edge.
pub const BOX_EDGE_WEDGE_INDEX: f64 = 1.5;

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(from = "[f64; 3]", into = "[f64; 3]")]
pub struct Vec3 {
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl From<[f64; 3]> for Vec3 {
    fn from(v: [f64; 3]) -> Self {
        Vec3::new(v[0], v[1], v[2])
    }
}

impl From<Vec3> for [f64; 3] {
    fn from(v: Vec3) -> Self {
        [v.x, v.y, v.z]
    }
}

impl Vec3 {
    pub const ZERO: Vec3 = Vec3::new(0.0, 0.0, 0.0);
    pub const X: Vec3 = Vec3::new(1.0, 0.0, 0.0);
    pub const Y: Vec3 = Vec3::new(0.0, 1.0, 0.0);
    pub const Z: Vec3 = Vec3::new(0.0, 0.0, 1.0);

    pub const fn new(x: f64, y: f64, z: f64) -> Self {
        Vec3 { x, y, z }
    }

    #[inline]
    pub fn dot(self, o: Vec3) -> f64 {
        self.x * o.x + self.y * o.y + self.z * o.z
    }

    #[inline]
    pub fn cross(self, o: Vec3) -> Vec3 {
        Vec3::new(
            self.y * o.z - self.z * o.y,
            self.z * o.x - self.x * o.z,
            self.x * o.y - self.y * o.x,
        )
    }

    #[inline]
    pub fn norm_squared(self) -> f64 {
        self.dot(self)
    }

    #[inline]
    pub fn norm(self) -> f64 {
        self.norm_squared().sqrt()
    }

    /// Unit vector in the same direction. Zero vectors stay zero.
    #[inline]
    pub fn normalized(self) -> Vec3 {
        let n = self.norm();
        if n > 0.0 {
            self / n
        } else {
            self
        }
    }

    #[inline]
    pub fn axis(self, i: usize) -> f64 {
        match i {
            0 => self.x,
            1 => self.y,
            _ => self.z,
        }
    }

    #[inline]
    pub fn with_axis(mut self, i: usize, v: f64) -> Vec3 {
        match i {
            0 => self.x = v,
            1 => self.y = v,
            _ => self.z = v,
        }
        self
    }

    pub fn min(self, o: Vec3) -> Vec3 {
        Vec3::new(self.x.min(o.x), self.y.min(o.y), self.z.min(o.z))
    }

    pub fn max(self, o: Vec3) -> Vec3 {
        Vec3::new(self.x.max(o.x), self.y.max(o.y), self.z.max(o.z))
    }

    pub fn distance(self, o: Vec3) -> f64 {
        (self - o).norm()
    }

    pub fn is_finite(self) -> bool {
        self.x.is_finite() && self.y.is_finite() && self.z.is_finite()
    }

    /// Angle between two non-zero vectors, in radians.
    pub fn angle_to(self, o: Vec3) -> f64 {
        let c = self.dot(o) / (self.norm() * o.norm());
        c.clamp(-1.0, 1.0).acos()
    }
}

impl Add for Vec3 {
    type Output = Vec3;
    #[inline]
    fn add(self, o: Vec3) -> Vec3 {
        Vec3::new(self.x + o.x, self.y + o.y, self.z + o.z)
    }
}

impl AddAssign for Vec3 {
    #[inline]
    fn add_assign(&mut self, o: Vec3) {
        *self = *self + o;
    }
}

impl Sub for Vec3 {
    type Output = Vec3;
    #[inline]
    fn sub(self, o: Vec3) -> Vec3 {
        Vec3::new(self.x - o.x, self.y - o.y, self.z - o.z)
    }
}

impl Neg for Vec3 {
    type Output = Vec3;
    #[inline]
    fn neg(self) -> Vec3 {
        Vec3::new(-self.x, -self.y, -self.z)
    }
}

impl Mul<f64> for Vec3 {
    type Output = Vec3;
    #[inline]
    fn mul(self, s: f64) -> Vec3 {
        Vec3::new(self.x * s, self.y * s, self.z * s)
    }
}

impl Mul<Vec3> for f64 {
    type Output = Vec3;
    #[inline]
    fn mul(self, v: Vec3) -> Vec3 {
        v * self
    }
}

impl Div<f64> for Vec3 {
    type Output = Vec3;
    #[inline]
    fn div(self, s: f64) -> Vec3 {
        Vec3::new(self.x / s, self.y / s, self.z / s)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Ray {
    pub origin: Vec3,
    pub direction: Vec3,
}

impl Ray {
    /// Builds a ray, normalizing the direction.
    pub fn new(origin: Vec3, direction: Vec3) -> Self {
        Ray {
            origin,
            direction: direction.normalized(),
        }
    }

    #[inline]
    pub fn at(&self, t: f64) -> Vec3 {
        self.origin + self.direction * t
    }
}

/// Index into a scene's material table.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Default)]
pub struct MaterialId(pub usize);

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Aabb {
    pub min: Vec3,
    pub max: Vec3,
    pub material_id: MaterialId,
}

/// Face numbering used by [`SurfaceId::Face`]: `2 * axis + (0 for min side, 1 for max side)`.
pub fn face_normal(face: u8) -> Vec3 {
    let axis = (face / 2) as usize;
    let sign = if face.is_multiple_of(2) { -1.0 } else { 1.0 };
    Vec3::ZERO.with_axis(axis, sign)
}

impl Aabb {
    pub fn new(min: Vec3, max: Vec3, material_id: MaterialId) -> Self {
        Aabb {
            min,
            max,
            material_id,
        }
    }

    pub fn is_valid(&self) -> bool {
        self.min.is_finite()
            && self.max.is_finite()
            && self.min.x < self.max.x
            && self.min.y < self.max.y
            && self.min.z < self.max.z
    }

    pub fn size(&self) -> Vec3 {
        self.max - self.min
    }

    pub fn center(&self) -> Vec3 {
        (self.min + self.max) * 0.5
    }

    /// Closed containment test.
    pub fn contains(&self, p: Vec3) -> bool {
        p.x >= self.min.x
            && p.x <= self.max.x
            && p.y >= self.min.y
            && p.y <= self.max.y
            && p.z >= self.min.z
            && p.z <= self.max.z
    }

    /// True when the open interiors intersect.
    pub fn overlaps(&self, o: &Aabb) -> bool {
        (0..3).all(|i| self.min.axis(i) < o.max.axis(i) && o.min.axis(i) < self.max.axis(i))
    }

    /// Plane offset of a face along its axis.
    pub fn face_offset(&self, face: u8) -> f64 {
        let axis = (face / 2) as usize;
        if face.is_multiple_of(2) {
            self.min.axis(axis)
        } else {
            self.max.axis(axis)
        }
    }

    /// Whether `p` lies within the rectangle of `face` (ignoring the face's own axis).
    pub fn face_contains(&self, face: u8, p: Vec3, tol: f64) -> bool {
        let axis = (face / 2) as usize;
        (0..3).filter(|&i| i != axis).all(|i| {
            p.axis(i) >= self.min.axis(i) - tol && p.axis(i) <= self.max.axis(i) + tol
        })
    }

    /// Slab test returning the entry parameter and face, front faces only.
    ///
    /// Entries within [`HIT_EPSILON`] of an edge or corner resolve to the face
    /// whose normal is most aligned with the ray.
    #[inline]
    #[allow(clippy::needless_range_loop)]
    fn slab_entry(&self, ray: &Ray, t_max: f64) -> Option<(f64, u8)> {
        let mut t_enter = f64::NEG_INFINITY;
        let mut t_exit = f64::INFINITY;
        let mut entries = [f64::NEG_INFINITY; 3];
        for i in 0..3 {
            let o = ray.origin.axis(i);
            let d = ray.direction.axis(i);
            let lo = self.min.axis(i);
            let hi = self.max.axis(i);
            if d == 0.0 {
                if o < lo || o > hi {
                    return None;
                }
                continue;
            }
            let inv = 1.0 / d;
            let (t0, t1) = if inv >= 0.0 {
                ((lo - o) * inv, (hi - o) * inv)
            } else {
                ((hi - o) * inv, (lo - o) * inv)
            };
            entries[i] = t0;
            t_enter = t_enter.max(t0);
            t_exit = t_exit.min(t1);
        }
        if t_enter > t_exit || t_enter <= HIT_EPSILON || t_enter >= t_max {
            return None;
        }
        let mut best_axis = 3;
        let mut best_align = -1.0;
        for (i, &te) in entries.iter().enumerate() {
            if te > f64::NEG_INFINITY && te >= t_enter - HIT_EPSILON {
                let align = ray.direction.axis(i).abs();
                if align > best_align {
                    best_align = align;
                    best_axis = i;
                }
            }
        }
        if best_axis == 3 {
            return None;
        }
        let d = ray.direction.axis(best_axis);
        let face = 2 * best_axis as u8 + u8::from(d < 0.0);
        Some((t_enter, face))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum SurfaceId {
    Floor,
    Face { solid: u32, face: u8 },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HitRecord {
    pub t: f64,
    pub point: Vec3,
    pub normal: Vec3,
    pub surface: SurfaceId,
}

/// Nearest front-face hit of `ray` on `b`, if any.
pub fn intersect_ray_aabb(ray: &Ray, b: &Aabb) -> Option<HitRecord> {
    hit_box(ray, b, 0, f64::INFINITY)
}

#[inline]
fn hit_box(ray: &Ray, b: &Aabb, index: u32, t_max: f64) -> Option<HitRecord> {
    let (t, face) = b.slab_entry(ray, t_max)?;
    let normal = face_normal(face);
    // Snap the hit point onto the face plane.
    let axis = (face / 2) as usize;
    let point = ray.at(t).with_axis(axis, b.face_offset(face));
    Some(HitRecord {
        t,
        point,
        normal,
        surface: SurfaceId::Face { solid: index, face },
    })
}

/// Specular reflection `d - 2 (d.n) n`.
pub fn reflect_direction(d: Vec3, n: Vec3) -> Vec3 {
    d - n * (2.0 * d.dot(n))
}

/// Mirror a point across the plane through `on_plane` with unit normal `n`.
pub fn mirror_point(p: Vec3, on_plane: Vec3, n: Vec3) -> Vec3 {
    p - n * (2.0 * (p - on_plane).dot(n))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FloorRect {
    pub x_min: f64,
    pub x_max: f64,
    pub y_min: f64,
    pub y_max: f64,
}

impl FloorRect {
    pub fn contains_xy(&self, p: Vec3, tol: f64) -> bool {
        p.x >= self.x_min - tol
            && p.x <= self.x_max + tol
            && p.y >= self.y_min - tol
            && p.y <= self.y_max + tol
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Floor {
    pub extent: FloorRect,
    pub material_id: MaterialId,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EdgeSpec {
    pub a: Vec3,
    pub b: Vec3,
    /// Outward normal of the face the wedge angle is measured from.
    pub n_o: Vec3,
    /// Outward normal of the other face.
    pub n_n: Vec3,
    pub wedge_index: f64,
    pub solid: u32,
}

impl EdgeSpec {
    pub fn length(&self) -> f64 {
        self.a.distance(self.b)
    }

    /// Unit edge direction, oriented so that (`tangent_o`, `n_o`, direction) is right-handed.
    pub fn direction(&self) -> Vec3 {
        (self.b - self.a).normalized()
    }

    /// Unit vector lying in the o-face, perpendicular to the edge, pointing into the face.
    pub fn tangent_o(&self) -> Vec3 {
        -self.n_n
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GeometryError {
    #[error("box {0} is degenerate or non-finite")]
    DegenerateBox(usize),
    #[error("boxes {0} and {1} overlap")]
    OverlappingBoxes(usize, usize),
    #[error("box {0} references unknown material {1}")]
    UnknownMaterial(usize, usize),
}

#[derive(Debug, Clone)]
pub struct Scene {
    pub boxes: Vec<Aabb>,
    pub floor: Option<Floor>,
    bvh: Bvh,
}

impl Scene {
    /// Validates the boxes and builds the acceleration structure.
    pub fn new(boxes: Vec<Aabb>, floor: Option<Floor>) -> Result<Self, GeometryError> {
        for (i, b) in boxes.iter().enumerate() {
            if !b.is_valid() {
                return Err(GeometryError::DegenerateBox(i));
            }
        }
        for i in 0..boxes.len() {
            for j in (i + 1)..boxes.len() {
                if boxes[i].overlaps(&boxes[j]) {
                    return Err(GeometryError::OverlappingBoxes(i, j));
                }
            }
        }
        let bvh = Bvh::build(&boxes);
        Ok(Scene { boxes, floor, bvh })
    }

    pub fn empty() -> Self {
        Scene::new(Vec::new(), None).expect("empty scene is valid")
    }

    /// Index of a box containing `p` (closed), if any.
    pub fn containing_box(&self, p: Vec3) -> Option<usize> {
        self.boxes.iter().position(|b| b.contains(p))
    }

    /// Nearest hit among all boxes and the floor. Ties in `t` go to the lowest box index.
    pub fn intersect(&self, ray: &Ray) -> Option<HitRecord> {
        self.intersect_within(ray, f64::INFINITY)
    }

    /// Nearest hit with `t < t_max`.
    pub fn intersect_within(&self, ray: &Ray, t_max: f64) -> Option<HitRecord> {
        let mut best = self.bvh.nearest(&self.boxes, ray, t_max);
        if let Some(fh) = self.floor_hit(ray) {
            let limit = best.map_or(t_max, |h| h.t);
            if fh.t < limit {
                best = Some(fh);
            }
        }
        best
    }

    /// Whether anything blocks the open segment from `a` to `b`.
    pub fn occluded(&self, a: Vec3, b: Vec3) -> bool {
        let delta = b - a;
        let len = delta.norm();
        if len <= 2.0 * HIT_EPSILON {
            return false;
        }
        let ray = Ray {
            origin: a,
            direction: delta / len,
        };
        let t_max = len - HIT_EPSILON;
        if let Some(fh) = self.floor_hit(&ray) {
            if fh.t < t_max {
                return true;
            }
        }
        self.bvh.any_hit(&self.boxes, &ray, t_max)
    }

    fn floor_hit(&self, ray: &Ray) -> Option<HitRecord> {
        let floor = self.floor.as_ref()?;
        let dz = ray.direction.z;
        if dz >= 0.0 || ray.origin.z <= 0.0 {
            return None;
        }
        let t = -ray.origin.z / dz;
        if t <= HIT_EPSILON {
            return None;
        }
        let point = ray.at(t).with_axis(2, 0.0);
        if !floor.extent.contains_xy(point, 0.0) {
            return None;
        }
        Some(HitRecord {
            t,
            point,
            normal: Vec3::Z,
            surface: SurfaceId::Floor,
        })
    }

    /// Outward unit normal and a point on the plane of a surface.
    pub fn surface_plane(&self, s: SurfaceId) -> (Vec3, Vec3) {
        match s {
            SurfaceId::Floor => (Vec3::Z, Vec3::ZERO),
            SurfaceId::Face { solid, face } => {
                let b = &self.boxes[solid as usize];
                let n = face_normal(face);
                let axis = (face / 2) as usize;
                (n, Vec3::ZERO.with_axis(axis, b.face_offset(face)))
            }
        }
    }

    /// Whether `p` (assumed on the surface plane) lies within the surface's bounds.
    pub fn surface_contains(&self, s: SurfaceId, p: Vec3, tol: f64) -> bool {
        match s {
            SurfaceId::Floor => self
                .floor
                .as_ref()
                .is_some_and(|f| f.extent.contains_xy(p, tol)),
            SurfaceId::Face { solid, face } => self.boxes[solid as usize].face_contains(face, p, tol),
        }
    }

    pub fn surface_material(&self, s: SurfaceId) -> MaterialId {
        match s {
            SurfaceId::Floor => self.floor.as_ref().map(|f| f.material_id).unwrap_or_default(),
            SurfaceId::Face { solid, .. } => self.boxes[solid as usize].material_id,
        }
    }

    /// Every reflecting surface in canonical order: floor first, then box faces.
    pub fn surfaces(&self) -> Vec<SurfaceId> {
        let mut v = Vec::with_capacity(1 + 6 * self.boxes.len());
        if self.floor.is_some() {
            v.push(SurfaceId::Floor);
        }
        for solid in 0..self.boxes.len() as u32 {
            for face in 0..6 {
                v.push(SurfaceId::Face { solid, face });
            }
        }
        v
    }

    /// Bounding box of all boxes, or `None` for a box-free scene.
    pub fn boxes_bounds(&self) -> Option<(Vec3, Vec3)> {
        self.boxes.iter().fold(None, |acc, b| match acc {
            None => Some((b.min, b.max)),
            Some((lo, hi)) => Some((lo.min(b.min), hi.max(b.max))),
        })
    }
}

/// All diffracting box edges of the scene.
pub fn enumerate_edges(scene: &Scene) -> Vec<EdgeSpec> {
    let mut edges = Vec::with_capacity(12 * scene.boxes.len());
    for (solid, b) in scene.boxes.iter().enumerate() {
        // An edge parallel to `axis` sits where a face of axis `u` meets a face of axis `v`.
        for axis in 0..3usize {
            let (u, v) = ((axis + 1) % 3, (axis + 2) % 3);
            for su in 0..2u8 {
                for sv in 0..2u8 {
                    let fu = 2 * u as u8 + su;
                    let fv = 2 * v as u8 + sv;
                    let corner = Vec3::ZERO
                        .with_axis(u, b.face_offset(fu))
                        .with_axis(v, b.face_offset(fv));
                    let p0 = corner.with_axis(axis, b.min.axis(axis));
                    let p1 = corner.with_axis(axis, b.max.axis(axis));
                    let n_o = face_normal(fu);
                    let n_n = face_normal(fv);
                    // Orient so that (-n_n) x n_o points from a to b.
                    let dir = (-n_n).cross(n_o);
                    let (a, bb) = if (p1 - p0).dot(dir) > 0.0 {
                        (p0, p1)
                    } else {
                        (p1, p0)
                    };
                    let e = EdgeSpec {
                        a,
                        b: bb,
                        n_o,
                        n_n,
                        wedge_index: BOX_EDGE_WEDGE_INDEX,
                        solid: solid as u32,
                    };
                    if e.length() >= MIN_EDGE_LENGTH {
                        edges.push(e);
                    }
                }
            }
        }
    }
    edges
}

#[derive(Debug, Clone, Copy)]
struct BvhNode {
    min: Vec3,
    max: Vec3,
    /// Leaf: `count > 0`, items `first..first + count` of `order`. Inner: children at `first`, `first + 1`.
    first: u32,
    count: u32,
}

#[derive(Debug, Clone, Default)]
struct Bvh {
    nodes: Vec<BvhNode>,
    order: Vec<u32>,
}

const BVH_LEAF_SIZE: usize = 2;

impl Bvh {
    fn build(boxes: &[Aabb]) -> Bvh {
        let mut bvh = Bvh {
            nodes: Vec::new(),
            order: (0..boxes.len() as u32).collect(),
        };
        if boxes.is_empty() {
            return bvh;
        }
        bvh.nodes.push(BvhNode {
            min: Vec3::ZERO,
            max: Vec3::ZERO,
            first: 0,
            count: 0,
        });
        bvh.split(boxes, 0, 0, boxes.len());
        bvh
    }

    fn split(&mut self, boxes: &[Aabb], node: usize, start: usize, end: usize) {
        let (mut lo, mut hi) = (Vec3::new(f64::MAX, f64::MAX, f64::MAX), Vec3::new(f64::MIN, f64::MIN, f64::MIN));
        for &i in &self.order[start..end] {
            lo = lo.min(boxes[i as usize].min);
            hi = hi.max(boxes[i as usize].max);
        }
        self.nodes[node].min = lo;
        self.nodes[node].max = hi;
        if end - start <= BVH_LEAF_SIZE {
            self.nodes[node].first = start as u32;
            self.nodes[node].count = (end - start) as u32;
            return;
        }
        let ext = hi - lo;
        let axis = if ext.x >= ext.y && ext.x >= ext.z {
            0
        } else if ext.y >= ext.z {
            1
        } else {
            2
        };
        self.order[start..end].sort_by(|&a, &b| {
            let ca = boxes[a as usize].center().axis(axis);
            let cb = boxes[b as usize].center().axis(axis);
            ca.total_cmp(&cb).then(a.cmp(&b))
        });
        let mid = (start + end) / 2;
        let left = self.nodes.len();
        let placeholder = BvhNode {
            min: Vec3::ZERO,
            max: Vec3::ZERO,
            first: 0,
            count: 0,
        };
        self.nodes.push(placeholder);
        self.nodes.push(placeholder);
        self.nodes[node].first = left as u32;
        self.nodes[node].count = 0;
        self.split(boxes, left, start, mid);
        self.split(boxes, left + 1, mid, end);
    }

    /// Entry parameter of the ray into a node's bounds (allowing an origin inside).
    #[inline]
    fn node_entry(n: &BvhNode, ray: &Ray, t_max: f64) -> Option<f64> {
        let mut t0 = 0.0f64;
        let mut t1 = t_max;
        for i in 0..3 {
            let o = ray.origin.axis(i);
            let d = ray.direction.axis(i);
            let lo = n.min.axis(i);
            let hi = n.max.axis(i);
            if d == 0.0 {
                if o < lo || o > hi {
                    return None;
                }
                continue;
            }
            let inv = 1.0 / d;
            let (a, b) = if inv >= 0.0 {
                ((lo - o) * inv, (hi - o) * inv)
            } else {
                ((hi - o) * inv, (lo - o) * inv)
            };
            t0 = t0.max(a);
            t1 = t1.min(b);
            if t0 > t1 {
                return None;
            }
        }
        Some(t0)
    }

    fn nearest(&self, boxes: &[Aabb], ray: &Ray, t_max: f64) -> Option<HitRecord> {
        if self.nodes.is_empty() {
            return None;
        }
        let mut best: Option<HitRecord> = None;
        let mut best_key = (t_max, u32::MAX);
        let mut stack = [0u32; 64];
        let mut sp = 1;
        while sp > 0 {
            sp -= 1;
            let n = &self.nodes[stack[sp] as usize];
            // Inclusive bound so equal-t hits in other subtrees still get the index tie-break.
            let Some(entry) = Self::node_entry(n, ray, best_key.0 + HIT_EPSILON) else {
                continue;
            };
            if entry > best_key.0 {
                continue;
            }
            if n.count > 0 {
                for &i in &self.order[n.first as usize..(n.first + n.count) as usize] {
                    if let Some(h) = hit_box(ray, &boxes[i as usize], i, f64::INFINITY) {
                        if h.t < best_key.0 || (h.t == best_key.0 && i < best_key.1) {
                            best_key = (h.t, i);
                            best = Some(h);
                        }
                    }
                }
            } else {
                stack[sp] = n.first;
                stack[sp + 1] = n.first + 1;
                sp += 2;
            }
        }
        best
    }

    fn any_hit(&self, boxes: &[Aabb], ray: &Ray, t_max: f64) -> bool {
        if self.nodes.is_empty() {
            return false;
        }
        let mut stack = [0u32; 64];
        let mut sp = 1;
        while sp > 0 {
            sp -= 1;
            let n = &self.nodes[stack[sp] as usize];
            if Self::node_entry(n, ray, t_max).is_none() {
                continue;
            }
            if n.count > 0 {
                for &i in &self.order[n.first as usize..(n.first + n.count) as usize] {
                    if boxes[i as usize].slab_entry(ray, t_max).is_some() {
                        return true;
                    }
                }
            } else {
                stack[sp] = n.first;
                stack[sp + 1] = n.first + 1;
                sp += 2;
            }
        }
        false
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn unit_box() -> Aabb {
        Aabb::new(Vec3::ZERO, Vec3::new(1.0, 1.0, 1.0), MaterialId(0))
    }

    /// Brute force: intersect each face rectangle independently.
    fn brute_force_box(ray: &Ray, b: &Aabb) -> Option<(f64, u8)> {
        let mut best: Option<(f64, u8)> = None;
        for face in 0..6u8 {
            let n = face_normal(face);
            let dn = ray.direction.dot(n);
            if dn >= 0.0 {
                continue;
            }
            let axis = (face / 2) as usize;
            let t = (b.face_offset(face) - ray.origin.axis(axis)) / ray.direction.axis(axis);
            if t <= HIT_EPSILON {
                continue;
            }
            let p = ray.at(t);
            if b.face_contains(face, p, 1e-12) && best.is_none_or(|(bt, _)| t < bt) {
                best = Some((t, face));
            }
        }
        best
    }

    fn brute_force_scene(ray: &Ray, scene: &Scene) -> Option<(f64, SurfaceId)> {
        let mut best: Option<(f64, SurfaceId)> = None;
        for (i, b) in scene.boxes.iter().enumerate() {
            if let Some(h) = intersect_ray_aabb(ray, b) {
                if best.is_none_or(|(t, _)| h.t < t) {
                    best = Some((
                        h.t,
                        SurfaceId::Face {
                            solid: i as u32,
                            face: match h.surface {
                                SurfaceId::Face { face, .. } => face,
                                SurfaceId::Floor => unreachable!(),
                            },
                        },
                    ));
                }
            }
        }
        best
    }

    #[test]
    fn axis_aligned_hit() {
        let ray = Ray::new(Vec3::new(-1.0, 0.5, 0.5), Vec3::X);
        let h = intersect_ray_aabb(&ray, &unit_box()).unwrap();
        assert!((h.t - 1.0).abs() < 1e-12);
        assert_eq!(h.point, Vec3::new(0.0, 0.5, 0.5));
        assert_eq!(h.normal, Vec3::new(-1.0, 0.0, 0.0));
    }

    #[test]
    fn pointing_away_misses() {
        let ray = Ray::new(Vec3::new(0.5, 0.5, 2.0), Vec3::Z);
        assert!(intersect_ray_aabb(&ray, &unit_box()).is_none());
    }

    #[test]
    fn origin_on_surface_leaving_misses() {
        let ray = Ray::new(Vec3::new(0.0, 0.5, 0.5), Vec3::new(-1.0, 0.2, 0.0));
        assert!(intersect_ray_aabb(&ray, &unit_box()).is_none());
    }

    #[test]
    fn corner_hit_prefers_most_aligned_face() {
        // Hits the edge x = 0, z = 1 exactly; x is the dominant direction component.
        let ray = Ray::new(Vec3::new(-1.0, 0.5, 1.5), Vec3::new(2.0, 0.0, -1.0));
        let h = intersect_ray_aabb(&ray, &unit_box()).unwrap();
        assert_eq!(h.normal, Vec3::new(-1.0, 0.0, 0.0));
    }

    #[test]
    fn nearer_box_wins() {
        let near = Aabb::new(Vec3::new(2.0, -1.0, -1.0), Vec3::new(3.0, 1.0, 1.0), MaterialId(0));
        let far = Aabb::new(Vec3::new(5.0, -1.0, -1.0), Vec3::new(6.0, 1.0, 1.0), MaterialId(0));
        let scene = Scene::new(vec![far, near], None).unwrap();
        let h = scene.intersect(&Ray::new(Vec3::ZERO, Vec3::X)).unwrap();
        assert!((h.t - 2.0).abs() < 1e-12);
        assert_eq!(h.surface, SurfaceId::Face { solid: 1, face: 0 });
    }

    #[test]
    fn floor_hit_and_extent_clip() {
        let floor = Floor {
            extent: FloorRect {
                x_min: -10.0,
                x_max: 10.0,
                y_min: -10.0,
                y_max: 10.0,
            },
            material_id: MaterialId(0),
        };
        let scene = Scene::new(Vec::new(), Some(floor)).unwrap();
        let h = scene.intersect(&Ray::new(Vec3::new(1.0, 1.0, 1.0), -Vec3::Z)).unwrap();
        assert!((h.t - 1.0).abs() < 1e-12);
        assert_eq!(h.normal, Vec3::Z);
        assert_eq!(h.surface, SurfaceId::Floor);
        let outside = Ray::new(Vec3::new(1.0, 1.0, 1.0), Vec3::new(100.0, 0.0, -1.0));
        assert!(scene.intersect(&outside).is_none());
        // Floor is one-sided.
        assert!(scene.intersect(&Ray::new(Vec3::new(0.0, 0.0, -1.0), Vec3::Z)).is_none());
    }

    #[test]
    fn reflect_examples() {
        assert_eq!(reflect_direction(-Vec3::Z, Vec3::Z), Vec3::Z);
        let s = std::f64::consts::FRAC_1_SQRT_2;
        let r = reflect_direction(Vec3::new(s, 0.0, -s), Vec3::Z);
        assert!((r - Vec3::new(s, 0.0, s)).norm() < 1e-15);
    }

    #[test]
    fn edge_counts() {
        let one = Scene::new(vec![unit_box()], None).unwrap();
        assert_eq!(enumerate_edges(&one).len(), 12);
        let other = Aabb::new(Vec3::new(2.0, 0.0, 0.0), Vec3::new(3.0, 1.0, 1.0), MaterialId(0));
        let two = Scene::new(vec![unit_box(), other], None).unwrap();
        assert_eq!(enumerate_edges(&two).len(), 24);
    }

    #[test]
    fn short_edges_are_skipped() {
        let thin = Aabb::new(Vec3::ZERO, Vec3::new(1.0, 1.0, 0.005), MaterialId(0));
        let scene = Scene::new(vec![thin], None).unwrap();
        assert_eq!(enumerate_edges(&scene).len(), 8);
    }

    #[test]
    fn edges_have_perpendicular_normals_and_orientation() {
        let scene = Scene::new(vec![unit_box()], None).unwrap();
        for e in enumerate_edges(&scene) {
            assert_eq!(e.n_o.dot(e.n_n), 0.0);
            assert_eq!(e.wedge_index, 1.5);
            let frame = e.tangent_o().cross(e.n_o);
            assert!((frame - e.direction()).norm() < 1e-12);
            // Both endpoints lie on both faces.
            for p in [e.a, e.b] {
                assert!(scene.boxes[0].contains(p));
            }
        }
    }

    #[test]
    fn overlapping_boxes_rejected() {
        let b = Aabb::new(Vec3::new(0.5, 0.5, 0.5), Vec3::new(2.0, 2.0, 2.0), MaterialId(0));
        assert_eq!(
            Scene::new(vec![unit_box(), b], None).unwrap_err(),
            GeometryError::OverlappingBoxes(0, 1)
        );
        // Touching boxes do not overlap.
        let touching = Aabb::new(Vec3::new(1.0, 0.0, 0.0), Vec3::new(2.0, 1.0, 1.0), MaterialId(0));
        assert!(Scene::new(vec![unit_box(), touching], None).is_ok());
    }

    fn arb_unit() -> impl Strategy<Value = Vec3> {
        (-1.0f64..1.0, -1.0f64..1.0, -1.0f64..1.0)
            .prop_filter("non-degenerate", |(x, y, z)| x * x + y * y + z * z > 1e-3)
            .prop_map(|(x, y, z)| Vec3::new(x, y, z).normalized())
    }

    fn arb_boxes() -> impl Strategy<Value = Vec<Aabb>> {
        // Cells on a 4x4x2 lattice keep the boxes disjoint.
        proptest::collection::vec((0usize..32, 0.1f64..0.9, 0.1f64..0.9, 0.1f64..0.9), 1..10).prop_map(|cells| {
            let mut used = std::collections::BTreeSet::new();
            cells
                .into_iter()
                .filter(|(c, ..)| used.insert(*c))
                .map(|(c, sx, sy, sz)| {
                    let base = Vec3::new((c % 4) as f64 * 2.0 - 4.0, ((c / 4) % 4) as f64 * 2.0 - 4.0, (c / 16) as f64 * 2.0);
                    Aabb::new(base, base + Vec3::new(2.0 * sx, 2.0 * sy, 2.0 * sz), MaterialId(0))
                })
                .collect()
        })
    }

    proptest! {
        #[test]
        fn ray_box_matches_face_brute_force(o in (-3.0f64..3.0, -3.0f64..3.0, -3.0f64..3.0), d in arb_unit()) {
            let ray = Ray::new(Vec3::new(o.0, o.1, o.2), d);
            let b = unit_box();
            let fast = intersect_ray_aabb(&ray, &b).map(|h| h.t);
            let slow = brute_force_box(&ray, &b).map(|(t, _)| t);
            match (fast, slow) {
                (Some(a), Some(s)) => prop_assert!((a - s).abs() < 1e-9),
                (None, None) => {}
                other => prop_assert!(false, "mismatch {:?}", other),
            }
        }

        #[test]
        fn scene_matches_linear_scan(boxes in arb_boxes(), o in (-6.0f64..6.0, -6.0f64..6.0, -1.0f64..5.0), d in arb_unit()) {
            let origin = Vec3::new(o.0, o.1, o.2);
            prop_assume!(boxes.iter().all(|b| !b.contains(origin)));
            let scene = Scene::new(boxes, None).unwrap();
            let ray = Ray::new(origin, d);
            let fast = scene.intersect(&ray).map(|h| (h.t, h.surface));
            let slow = brute_force_scene(&ray, &scene);
            prop_assert_eq!(fast, slow);
            if let Some(h) = scene.intersect(&ray) {
                let (n, p0) = scene.surface_plane(h.surface);
                prop_assert!((h.point - p0).dot(n).abs() < 1e-9);
                prop_assert!(h.normal.dot(ray.direction) < 0.0);
            }
        }

        #[test]
        fn reflection_involution_and_angle(d in arb_unit(), n in arb_unit()) {
            prop_assume!(d.dot(n) < -1e-3);
            let r = reflect_direction(d, n);
            prop_assert!((r.norm() - 1.0).abs() < 1e-12);
            prop_assert!((d.dot(n) + r.dot(n)).abs() < 1e-12);
            prop_assert!((reflect_direction(r, n) - d).norm() < 1e-12);
        }
    }
}
