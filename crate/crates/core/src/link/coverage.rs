//! Coverage statistics over a power map.

use serde::{Deserialize, Serialize};

use crate::geometry::Vec3;

use super::{LinkBudget, PowerMap};

/// Share of covered points required inside the reliable radius.
pub const RELIABLE_SHARE: f64 = 0.95;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoverageStats {
    pub reachable_points: usize,
    pub covered_points: usize,
    pub covered_fraction: f64,
    /// Largest horizontal radius around the TX within which at least 95% of reachable points are covered.
    pub reliable_range_m: f64,
    pub blind_spots: usize,
}

pub fn coverage_stats(map: &PowerMap, budget: &LinkBudget, tx_position: Vec3) -> CoverageStats {
    let (nx, ny) = map.grid.dims();
    let covered: Vec<bool> = map.values.iter().map(|&p| budget.covers(p)).collect();
    let mut by_distance: Vec<(f64, bool)> = Vec::new();
    for iy in 0..ny {
        for ix in 0..nx {
            let i = iy * nx + ix;
            if map.reachable[i] {
                let p = map.grid.point(ix, iy);
                let d = ((p.x - tx_position.x).powi(2) + (p.y - tx_position.y).powi(2)).sqrt();
                by_distance.push((d, covered[i]));
            }
        }
    }
    let reachable_points = by_distance.len();
    let covered_points = by_distance.iter().filter(|(_, c)| *c).count();
    by_distance.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut reliable_range_m = 0.0;
    let mut seen = 0usize;
    let mut hits = 0usize;
    let mut k = 0;
    while k < by_distance.len() {
        // Points at the same distance enter together.
        let d = by_distance[k].0;
        while k < by_distance.len() && by_distance[k].0 == d {
            seen += 1;
            hits += by_distance[k].1 as usize;
            k += 1;
        }
        if hits as f64 >= RELIABLE_SHARE * seen as f64 {
            reliable_range_m = d;
        }
    }
    let uncovered: Vec<bool> = (0..nx * ny).map(|i| map.reachable[i] && !covered[i]).collect();
    CoverageStats {
        reachable_points,
        covered_points,
        covered_fraction: if reachable_points == 0 {
            0.0
        } else {
            covered_points as f64 / reachable_points as f64
        },
        reliable_range_m,
        blind_spots: count_components(&uncovered, nx, ny),
    }
}

/// 4-connected components of `true` cells in a row-major `nx * ny` mask.
pub fn count_components(mask: &[bool], nx: usize, ny: usize) -> usize {
    let mut label = vec![false; mask.len()];
    let mut count = 0;
    let mut stack = Vec::new();
    for start in 0..mask.len() {
        if !mask[start] || label[start] {
            continue;
        }
        count += 1;
        label[start] = true;
        stack.push(start);
        while let Some(i) = stack.pop() {
            let (x, y) = (i % nx, i / nx);
            let mut visit = |j: usize| {
                if mask[j] && !label[j] {
                    label[j] = true;
                    stack.push(j);
                }
            };
            if x > 0 {
                visit(i - 1);
            }
            if x + 1 < nx {
                visit(i + 1);
            }
            if y > 0 {
                visit(i - nx);
            }
            if y + 1 < ny {
                visit(i + nx);
            }
        }
    }
    count
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::link::{MapMetadata, RxGrid};

    fn map_from(values: Vec<f64>, nx: usize, ny: usize) -> PowerMap {
        let grid = RxGrid {
            x_min: 0.0,
            x_max: (nx - 1) as f64,
            y_min: 0.0,
            y_max: (ny - 1) as f64,
            spacing: 1.0,
            height: 0.2,
        };
        PowerMap {
            grid,
            reachable: vec![true; values.len()],
            values,
            metadata: MapMetadata::default(),
        }
    }

    /// Union-find over the same mask, independent of the flood fill.
    fn union_find_components(mask: &[bool], nx: usize, ny: usize) -> usize {
        let mut parent: Vec<usize> = (0..mask.len()).collect();
        fn find(p: &mut [usize], mut i: usize) -> usize {
            while p[i] != i {
                p[i] = p[p[i]];
                i = p[i];
            }
            i
        }
        for y in 0..ny {
            for x in 0..nx {
                let i = y * nx + x;
                if !mask[i] {
                    continue;
                }
                for j in [(x + 1 < nx).then(|| i + 1), (y + 1 < ny).then(|| i + nx)].into_iter().flatten() {
                    if mask[j] {
                        let (a, b) = (find(&mut parent, i), find(&mut parent, j));
                        parent[a] = b;
                    }
                }
            }
        }
        (0..mask.len()).filter(|&i| mask[i] && find(&mut parent, i) == i).count()
    }

    #[test]
    fn fully_covered_map() {
        let m = map_from(vec![-50.0; 12], 4, 3);
        let s = coverage_stats(&m, &LinkBudget::default(), Vec3::new(0.0, 0.0, 1.5));
        assert_eq!(s.covered_fraction, 1.0);
        assert_eq!(s.blind_spots, 0);
        assert!((s.reliable_range_m - (9.0f64 + 4.0).sqrt()).abs() < 1e-12);
    }

    #[test]
    fn nothing_covered() {
        let m = map_from(vec![-120.0; 12], 4, 3);
        let s = coverage_stats(&m, &LinkBudget::default(), Vec3::new(1.0, 1.0, 1.5));
        assert_eq!(s.covered_fraction, 0.0);
        assert_eq!(s.reliable_range_m, 0.0);
        assert_eq!(s.blind_spots, 1);
    }

    #[test]
    fn checkerboard_blind_spots() {
        let (nx, ny) = (9, 7);
        let values: Vec<f64> = (0..nx * ny)
            .map(|i| if (i % nx + i / nx) % 2 == 0 { -120.0 } else { -60.0 })
            .collect();
        let m = map_from(values.clone(), nx, ny);
        let s = coverage_stats(&m, &LinkBudget::default(), Vec3::ZERO);
        let mask: Vec<bool> = values.iter().map(|&v| v < -106.0).collect();
        assert_eq!(s.blind_spots, union_find_components(&mask, nx, ny));
        assert_eq!(s.blind_spots, 32);
    }

    #[test]
    fn random_masks_match_union_find() {
        let mut seed = 99u64;
        for _ in 0..50 {
            let (nx, ny) = (13, 11);
            let mask: Vec<bool> = (0..nx * ny)
                .map(|_| {
                    seed = seed.wrapping_mul(6364136223846793005).wrapping_add(1);
                    (seed >> 33) % 5 < 2
                })
                .collect();
            assert_eq!(count_components(&mask, nx, ny), union_find_components(&mask, nx, ny));
        }
    }

    #[test]
    fn unreachable_cells_split_blind_spots() {
        let mut m = map_from(vec![-120.0; 9], 3, 3);
        for i in [1, 4, 7] {
            m.reachable[i] = false;
            m.values[i] = f64::NEG_INFINITY;
        }
        let s = coverage_stats(&m, &LinkBudget::default(), Vec3::ZERO);
        assert_eq!(s.reachable_points, 6);
        assert_eq!(s.blind_spots, 2);
    }
}
