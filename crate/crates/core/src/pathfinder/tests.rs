use std::collections::BTreeSet;

use proptest::prelude::*;

use super::*;
use crate::geometry::{reflect_direction, Aabb, Floor, FloorRect, MaterialId};

fn big_floor() -> Floor {
    Floor {
        extent: FloorRect {
            x_min: -1e3,
            x_max: 1e3,
            y_min: -1e3,
            y_max: 1e3,
        },
        material_id: MaterialId(0),
    }
}

/// Two parallel walls with inner faces at x = 0 and x = 1.5.
fn two_walls() -> Scene {
    let boxes = vec![
        Aabb::new(Vec3::new(-1.0, -100.0, -100.0), Vec3::new(0.0, 100.0, 100.0), MaterialId(1)),
        Aabb::new(Vec3::new(1.5, -100.0, -100.0), Vec3::new(2.5, 100.0, 100.0), MaterialId(1)),
    ];
    Scene::new(boxes, None).unwrap()
}

fn cfg(order: u32, reflections: u32) -> LaunchConfig {
    LaunchConfig {
        tessellation_order: order,
        max_reflections: reflections,
        enable_diffraction: false,
        ..LaunchConfig::default()
    }
}

fn signatures(paths: &[PropPath]) -> Vec<Signature> {
    paths.iter().map(PropPath::signature).collect()
}

fn assert_unoccluded(scene: &Scene, p: &PropPath) {
    for w in p.vertices().windows(2) {
        assert!(!scene.occluded(w[0], w[1]), "segment {:?} -> {:?} blocked", w[0], w[1]);
    }
}

#[test]
fn free_space_has_only_line_of_sight() {
    let scene = Scene::empty();
    let (tx, rx) = (Vec3::new(0.0, 0.0, 1.5), Vec3::new(3.0, 4.0, 1.5));
    for order in 0..=3 {
        let paths = trace_sbr(&scene, tx, rx, &cfg(order, 4)).unwrap();
        assert_eq!(paths.len(), 1);
        assert!(paths[0].is_line_of_sight());
        assert!((paths[0].total_length - 5.0).abs() < 1e-12);
    }
}

#[test]
fn pec_floor_gives_direct_and_ground_bounce() {
    let scene = Scene::new(Vec::new(), Some(big_floor())).unwrap();
    let (tx, rx) = (Vec3::new(0.0, 0.0, 1.5), Vec3::new(10.0, 0.0, 0.2));
    let paths = trace_sbr(&scene, tx, rx, &cfg(4, 3)).unwrap();
    assert_eq!(paths.len(), 2);
    let los = (100.0f64 + 1.3 * 1.3).sqrt();
    let bounce = (100.0f64 + 1.7 * 1.7).sqrt();
    assert!((paths[0].total_length - los).abs() < 1e-9);
    assert!((paths[1].total_length - bounce).abs() < 1e-9);
    assert!((los - 10.084).abs() < 1e-3 && (bounce - 10.143).abs() < 1e-3);
    let p = paths[1].interactions[0].point;
    assert!(p.z.abs() < 1e-12);
    // Image of the TX at z = -1.5 lies on the straight line through the bounce point.
    assert!(((p - Vec3::new(0.0, 0.0, -1.5)).normalized() - (rx - p).normalized()).norm() < 1e-12);
}

#[test]
fn single_floor_image_method_order_one() {
    let scene = Scene::new(Vec::new(), Some(big_floor())).unwrap();
    let paths = image_method_paths(&scene, Vec3::new(0.0, 0.0, 1.5), Vec3::new(4.0, 1.0, 0.7), 1).unwrap();
    assert_eq!(paths.len(), 2);
    assert_eq!(paths[1].signature(), vec![SigElem::Surface(SurfaceId::Floor)]);
}

#[test]
fn two_walls_give_alternating_chains() {
    let scene = two_walls();
    let (tx, rx) = (Vec3::new(0.4, 0.0, 0.0), Vec3::new(1.1, 5.0, 0.5));
    for n in 0..=6 {
        let paths = image_method_paths(&scene, tx, rx, n).unwrap();
        assert_eq!(paths.len(), 2 * n as usize + 1, "order {n}");
    }
}

#[test]
fn image_method_obeys_specular_law() {
    let scene = two_walls();
    let (tx, rx) = (Vec3::new(0.4, 0.0, 0.0), Vec3::new(1.1, 5.0, 0.5));
    let paths = image_method_paths(&scene, tx, rx, 5).unwrap();
    for p in &paths {
        let v = p.vertices();
        for (i, inter) in p.interactions.iter().enumerate() {
            let InteractionKind::Reflection(s) = inter.kind else { unreachable!() };
            let (n, p0) = scene.surface_plane(s);
            assert!((inter.point - p0).dot(n).abs() < 1e-9);
            let d_in = (v[i + 1] - v[i]).normalized();
            let d_out = (v[i + 2] - v[i + 1]).normalized();
            assert!((d_in.dot(n) + d_out.dot(n)).abs() < 1e-9);
            assert!((reflect_direction(d_in, n) - d_out).norm() < 1e-9);
        }
        let sum: f64 = p.segment_lengths.iter().sum();
        assert!((sum - p.total_length).abs() < 1e-9);
    }
}

#[test]
fn sbr_matches_image_method_between_walls() {
    let scene = two_walls();
    let (tx, rx) = (Vec3::new(0.4, 0.0, 0.0), Vec3::new(1.1, 5.0, 0.5));
    let oracle = image_method_paths(&scene, tx, rx, 5).unwrap();
    let sbr = trace_sbr(&scene, tx, rx, &cfg(5, 5)).unwrap();
    assert_eq!(signatures(&sbr), signatures(&oracle));
    for (a, b) in sbr.iter().zip(&oracle) {
        assert!((a.total_length - b.total_length).abs() / b.total_length < 1e-6);
    }
}

#[test]
fn capture_is_monotone_in_tessellation_order() {
    let scene = two_walls();
    let (tx, rx) = (Vec3::new(0.3, 0.0, 0.0), Vec3::new(1.2, 3.0, -0.5));
    let mut prev: BTreeSet<Signature> = BTreeSet::new();
    for order in 3..=6 {
        let found: BTreeSet<Signature> = signatures(&trace_sbr(&scene, tx, rx, &cfg(order, 5)).unwrap())
            .into_iter()
            .collect();
        assert!(prev.is_subset(&found), "order {order} lost signatures");
        prev = found;
    }
}

#[test]
fn budget_is_reported_not_truncated() {
    let scene = two_walls();
    let err = image_method_paths_with_budget(&scene, Vec3::new(0.4, 0.0, 0.0), Vec3::new(1.1, 5.0, 0.5), 5, 1000)
        .unwrap_err();
    assert!(matches!(err, PathError::Budget { budget: 1000, .. }));
}

#[test]
fn endpoints_inside_boxes_are_rejected() {
    let scene = two_walls();
    let inside = Vec3::new(-0.5, 0.0, 0.0);
    let ok = Vec3::new(0.7, 0.0, 0.0);
    assert!(matches!(trace_sbr(&scene, inside, ok, &cfg(1, 1)), Err(PathError::TxInsideGeometry(_))));
    assert!(matches!(image_method_paths(&scene, ok, inside, 1), Err(PathError::RxInsideGeometry(_))));
}

/// Golden-section minimization of the tx -> Q(t) -> rx length along the edge.
fn keller_oracle(edge: &EdgeSpec, p: Vec3, r: Vec3) -> f64 {
    let e = edge.direction();
    let f = |t: f64| {
        let q = edge.a + e * t;
        p.distance(q) + q.distance(r)
    };
    let g = (5f64.sqrt() - 1.0) / 2.0;
    let (mut a, mut b) = (-100.0, 100.0);
    for _ in 0..200 {
        let c = b - g * (b - a);
        let d = a + g * (b - a);
        if f(c) < f(d) {
            b = d;
        } else {
            a = c;
        }
    }
    0.5 * (a + b)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn keller_point_matches_minimization(
        px in -5.0..5.0f64, py in -5.0..5.0f64, pz in -5.0..5.0f64,
        rx in -5.0..5.0f64, ry in -5.0..5.0f64, rz in -5.0..5.0f64,
    ) {
        let edge = EdgeSpec {
            a: Vec3::new(0.0, -10.0, 0.0),
            b: Vec3::new(0.0, 10.0, 0.0),
            n_o: Vec3::Z,
            n_n: Vec3::X,
            wedge_index: 1.5,
            solid: 0,
        };
        let (p, r) = (Vec3::new(px, py, pz), Vec3::new(rx, ry, rz));
        let rho = |v: Vec3| (v.x * v.x + v.z * v.z).sqrt();
        prop_assume!(rho(p) > 0.1 && rho(r) > 0.1);
        let (q, t) = keller_point(&edge, p, r).unwrap();
        let t_oracle = keller_oracle(&edge, p, r);
        prop_assert!((t - t_oracle).abs() < 1e-6);
        let e = edge.direction();
        let a_in = (q - p).normalized().dot(e).acos();
        let a_out = (r - q).normalized().dot(e).acos();
        prop_assert!((a_in - a_out).abs() < 1e-6);
    }
}

#[test]
fn symmetric_endpoints_diffract_at_the_foot() {
    let edge = EdgeSpec {
        a: Vec3::new(0.0, -3.0, 2.0),
        b: Vec3::new(0.0, 5.0, 2.0),
        n_o: Vec3::Z,
        n_n: Vec3::X,
        wedge_index: 1.5,
        solid: 0,
    };
    let (q, _) = keller_point(&edge, Vec3::new(-4.0, 1.0, 1.0), Vec3::new(4.0, 1.0, 1.0)).unwrap();
    assert!((q - Vec3::new(0.0, 1.0, 2.0)).norm() < 1e-12);
}

#[test]
fn deep_shadow_finds_top_and_side_edges() {
    let scene = Scene::new(
        vec![Aabb::new(Vec3::new(-0.05, -1.0, 0.0), Vec3::new(0.05, 1.0, 2.0), MaterialId(1))],
        None,
    )
    .unwrap();
    let (tx, rx) = (Vec3::new(-5.0, 1.5, 3.0), Vec3::new(5.0, -1.5, 0.5));
    assert!(scene.occluded(tx, rx));
    let dcfg = LaunchConfig {
        max_reflections_with_diffraction: 0,
        ..LaunchConfig::default()
    };
    let paths = find_diffraction_paths(&scene, tx, rx, &dcfg).unwrap();
    let found: BTreeSet<u32> = paths
        .iter()
        .map(|p| match p.interactions[0].kind {
            InteractionKind::Diffraction(e) => e,
            _ => unreachable!(),
        })
        .collect();
    // Brute force: every edge whose length-minimizing point is interior, in the exterior
    // wedge for both legs and visible from both ends.
    let edges = enumerate_edges(&scene);
    let mut oracle = BTreeSet::new();
    for (i, edge) in edges.iter().enumerate() {
        let t = keller_oracle(edge, tx, rx);
        if t <= 1e-9 || t >= edge.length() - 1e-9 {
            continue;
        }
        let q = edge.a + edge.direction() * t;
        let ext = in_exterior(edge, tx - q) && in_exterior(edge, rx - q);
        if ext && !scene.occluded(tx, q) && !scene.occluded(q, rx) {
            oracle.insert(i as u32);
        }
    }
    assert_eq!(found, oracle);
    let top = edges
        .iter()
        .enumerate()
        .filter(|(i, e)| found.contains(&(*i as u32)) && e.a.z == 2.0 && e.b.z == 2.0)
        .count();
    let sides = edges
        .iter()
        .enumerate()
        .filter(|(i, e)| found.contains(&(*i as u32)) && (e.a.z - e.b.z).abs() > 1.0)
        .count();
    assert!(top >= 1 && sides >= 2, "top {top}, sides {sides}");
    for p in &paths {
        assert_unoccluded(&scene, p);
    }
}

fn warehouse_like() -> Scene {
    let boxes = vec![
        Aabb::new(Vec3::new(3.0, 1.0, 0.3), Vec3::new(3.5, 7.0, 3.3), MaterialId(1)),
        Aabb::new(Vec3::new(5.0, 1.0, 0.3), Vec3::new(5.5, 7.0, 3.3), MaterialId(1)),
        Aabb::new(Vec3::new(7.0, 2.0, 0.3), Vec3::new(8.3, 3.3, 2.3), MaterialId(1)),
    ];
    Scene::new(
        boxes,
        Some(Floor {
            extent: FloorRect {
                x_min: 0.0,
                x_max: 12.0,
                y_min: 0.0,
                y_max: 8.0,
            },
            material_id: MaterialId(0),
        }),
    )
    .unwrap()
}

#[test]
fn finder_paths_are_unique_sorted_and_unoccluded() {
    let scene = warehouse_like();
    let tx = Vec3::new(4.25, 4.0, 1.5);
    let finder = PathFinder::new(&scene, tx, cfg(3, 6), Execution::Sequential).unwrap();
    let dcfg = LaunchConfig {
        tessellation_order: 3,
        max_reflections: 6,
        ..LaunchConfig::default()
    };
    let dfinder = PathFinder::new(&scene, tx, dcfg, Execution::Sequential).unwrap();
    for rx in [Vec3::new(4.2, 0.5, 0.2), Vec3::new(9.0, 6.0, 0.2), Vec3::new(6.2, 2.7, 0.2), Vec3::new(1.0, 4.0, 0.2)] {
        for f in [&finder, &dfinder] {
            let paths = f.paths_to(rx).unwrap();
            let sigs = signatures(&paths);
            let mut sorted = sigs.clone();
            sorted.sort();
            sorted.dedup();
            assert_eq!(sigs, sorted);
            for p in &paths {
                assert_unoccluded(&scene, p);
                for inter in &p.interactions {
                    match inter.kind {
                        InteractionKind::Reflection(s) => assert!(scene.surface_contains(s, inter.point, 1e-6)),
                        InteractionKind::Diffraction(e) => {
                            let edge = &f.edges()[e as usize];
                            let d = edge.direction();
                            let w = inter.point - edge.a;
                            assert!((w - d * w.dot(d)).norm() < 1e-6);
                        }
                    }
                }
            }
        }
    }
}

#[test]
fn finder_is_independent_of_worker_count() {
    let scene = warehouse_like();
    let tx = Vec3::new(4.25, 4.0, 1.5);
    let c = LaunchConfig {
        tessellation_order: 3,
        max_reflections: 6,
        ..LaunchConfig::default()
    };
    let a = PathFinder::new(&scene, tx, c, Execution::Sequential).unwrap();
    let b = PathFinder::new(&scene, tx, c, Execution::Workers(3)).unwrap();
    for rx in [Vec3::new(9.0, 6.0, 0.2), Vec3::new(2.0, 7.5, 0.2)] {
        assert_eq!(a.paths_to(rx).unwrap(), b.paths_to(rx).unwrap());
    }
}

#[test]
fn indexed_finder_matches_unindexed() {
    let scene = warehouse_like();
    let tx = Vec3::new(4.25, 4.0, 1.5);
    let c = cfg(3, 5);
    let plain = PathFinder::new(&scene, tx, c, Execution::Sequential).unwrap();
    let indexed = PathFinder::new(&scene, tx, c, Execution::Sequential)
        .unwrap()
        .with_receiver_plane(0.2, 0.0, 12.0, 0.0, 8.0);
    for ix in 0..12 {
        for iy in 0..8 {
            let rx = Vec3::new(ix as f64 + 0.5, iy as f64 + 0.5, 0.2);
            if scene.containing_box(rx).is_some() {
                continue;
            }
            assert_eq!(plain.paths_to(rx).unwrap(), indexed.paths_to(rx).unwrap());
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn sbr_finds_every_image_path_with_two_planes(
        tx_x in 0.1..1.4f64, tx_z in -1.0..1.0f64,
        rx_x in 0.1..1.4f64, rx_y in -6.0..6.0f64, rx_z in -1.0..1.0f64,
    ) {
        let scene = two_walls();
        let (tx, rx) = (Vec3::new(tx_x, 0.0, tx_z), Vec3::new(rx_x, rx_y, rx_z));
        prop_assume!(tx.distance(rx) > 0.2);
        let oracle = image_method_paths(&scene, tx, rx, 5).unwrap();
        let sbr = trace_sbr(&scene, tx, rx, &cfg(4, 5)).unwrap();
        prop_assert_eq!(signatures(&sbr), signatures(&oracle));
        for (a, b) in sbr.iter().zip(&oracle) {
            prop_assert!((a.total_length - b.total_length).abs() / b.total_length < 1e-6);
        }
    }
}
