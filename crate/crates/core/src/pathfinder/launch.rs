//! Icosphere launch directions.

use std::collections::HashMap;

use crate::geometry::Vec3;

#[derive(Debug, Clone)]
pub struct LaunchSet {
    pub directions: Vec<Vec3>,
    /// Largest angle between adjacent directions, radians.
    pub theta_sep: f64,
}

/// Vertices of the icosphere at subdivision `order` (`10 * 4^order + 2` of them).
pub fn launch_directions(order: u32) -> LaunchSet {
    let (vertices, faces) = icosphere(order);
    let mut theta_sep: f64 = 0.0;
    for f in &faces {
        for k in 0..3 {
            let a = vertices[f[k] as usize];
            let b = vertices[f[(k + 1) % 3] as usize];
            theta_sep = theta_sep.max(a.angle_to(b));
        }
    }
    LaunchSet {
        directions: vertices,
        theta_sep,
    }
}

/// Adjacent vertex pairs of the icosphere, each listed once with the lower index first.
pub fn icosphere_edges(order: u32) -> Vec<(u32, u32)> {
    let (_, faces) = icosphere(order);
    let mut edges: Vec<(u32, u32)> = faces
        .iter()
        .flat_map(|f| (0..3).map(move |k| (f[k].min(f[(k + 1) % 3]), f[k].max(f[(k + 1) % 3]))))
        .collect();
    edges.sort_unstable();
    edges.dedup();
    edges
}

fn icosphere(order: u32) -> (Vec<Vec3>, Vec<[u32; 3]>) {
    let t = (1.0 + 5f64.sqrt()) / 2.0;
    let mut vertices: Vec<Vec3> = [
        (-1.0, t, 0.0),
        (1.0, t, 0.0),
        (-1.0, -t, 0.0),
        (1.0, -t, 0.0),
        (0.0, -1.0, t),
        (0.0, 1.0, t),
        (0.0, -1.0, -t),
        (0.0, 1.0, -t),
        (t, 0.0, -1.0),
        (t, 0.0, 1.0),
        (-t, 0.0, -1.0),
        (-t, 0.0, 1.0),
    ]
    .iter()
    .map(|&(x, y, z)| Vec3::new(x, y, z).normalized())
    .collect();
    let mut faces: Vec<[u32; 3]> = vec![
        [0, 11, 5],
        [0, 5, 1],
        [0, 1, 7],
        [0, 7, 10],
        [0, 10, 11],
        [1, 5, 9],
        [5, 11, 4],
        [11, 10, 2],
        [10, 7, 6],
        [7, 1, 8],
        [3, 9, 4],
        [3, 4, 2],
        [3, 2, 6],
        [3, 6, 8],
        [3, 8, 9],
        [4, 9, 5],
        [2, 4, 11],
        [6, 2, 10],
        [8, 6, 7],
        [9, 8, 1],
    ];
    for _ in 0..order {
        let mut midpoints: HashMap<(u32, u32), u32> = HashMap::new();
        let mut next = Vec::with_capacity(faces.len() * 4);
        for f in &faces {
            let mut mid = [0u32; 3];
            for k in 0..3 {
                let (a, b) = (f[k], f[(k + 1) % 3]);
                let key = (a.min(b), a.max(b));
                mid[k] = *midpoints.entry(key).or_insert_with(|| {
                    vertices.push(((vertices[a as usize] + vertices[b as usize]) * 0.5).normalized());
                    (vertices.len() - 1) as u32
                });
            }
            next.push([f[0], mid[0], mid[2]]);
            next.push([f[1], mid[1], mid[0]]);
            next.push([f[2], mid[2], mid[1]]);
            next.push(mid);
        }
        faces = next;
    }
    (vertices, faces)
}
