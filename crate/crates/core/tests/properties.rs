mod support;

use polemap_core::association::{associate_maps, sub_edge_distance, AssociationParams, SubEdgeFeature};
use polemap_core::extraction::{extract_clusters, ExtractionParams};
use polemap_core::geometry::is_rotation_matrix;
use polemap_core::localization::{Localizer, OdometryIncrement};
use polemap_core::registration::{register_frame, transform_clusters, RegistrationParams};
use polemap_core::relocalization::{estimate_rigid_transform, fine_align, geometric_consistency_filter, RelocParams};
use polemap_core::sim::{quantile, success};
use polemap_core::{Cluster, ClusterId, ClusterMap, Frame, LabeledPoint, MatchPair, Pose, SemanticLabel};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use support::*;

fn point3() -> impl Strategy<Value = [f64; 3]> {
    [-100.0..100.0f64, -100.0..100.0f64, -10.0..10.0f64]
}

fn pose() -> impl Strategy<Value = Pose> {
    (-200.0..200.0f64, -200.0..200.0f64, -5.0..5.0f64, -3.2..3.2f64, -0.3..0.3f64, -0.3..0.3f64).prop_map(
        |(x, y, z, yaw, pitch, roll)| {
            Pose::from_parts(nalgebra::Vector3::new(x, y, z), nalgebra::UnitQuaternion::from_euler_angles(roll, pitch, yaw))
        },
    )
}

fn landmark_label() -> impl Strategy<Value = SemanticLabel> {
    prop_oneof![Just(SemanticLabel::Pole), Just(SemanticLabel::Trunk)]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn rigid_fit_is_a_proper_rotation(src in prop::collection::vec(point3(), 3..30), truth in pose(), noise in prop::collection::vec(point3(), 30)) {
        let dst: Vec<[f64; 3]> = src.iter().zip(&noise).map(|(p, n)| {
            let q = truth.transform_xyz(*p);
            [q[0] + 0.01 * n[0], q[1] + 0.01 * n[1], q[2] + 0.01 * n[2]]
        }).collect();
        if let Ok(fit) = estimate_rigid_transform(&src, &dst) {
            prop_assert!(is_rotation_matrix(&fit.rotation_matrix(), 1e-9));
        }
    }

    #[test]
    fn rigid_fit_exact_recovery(src in prop::collection::vec(point3(), 4..30), truth in pose()) {
        let dst: Vec<[f64; 3]> = src.iter().map(|p| truth.transform_xyz(*p)).collect();
        if let Ok(fit) = estimate_rigid_transform(&src, &dst) {
            for (s, d) in src.iter().zip(&dst) {
                let q = fit.transform_xyz(*s);
                prop_assert!((q[0] - d[0]).abs() < 1e-7 && (q[1] - d[1]).abs() < 1e-7 && (q[2] - d[2]).abs() < 1e-7);
            }
        }
    }

    #[test]
    fn sub_edge_distance_symmetric_and_vector_form(d1 in 0.0..60.0f64, t1 in 0.0..360.0f64, d2 in 0.0..60.0f64, t2 in 0.0..360.0f64) {
        let (a, b) = (SubEdgeFeature::new(d1, t1), SubEdgeFeature::new(d2, t2));
        prop_assert_eq!(sub_edge_distance(&a, &b), sub_edge_distance(&b, &a));
        prop_assert!((sub_edge_distance(&a, &b) - vector_distance((d1, t1), (d2, t2))).abs() < 1e-9);
    }

    #[test]
    fn consistency_filter_ignores_pair_order(seed in 0u64..1000, shuffle_seed in 0u64..1000) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let layout = random_layout(&mut rng, 12, 40.0, 2.0);
        let global = map_from_layout(&layout, 3);
        let truth = random_planar_pose(&mut rng, 180.0, 30.0);
        let keep: Vec<usize> = (0..12).collect();
        let (local, _) = planted_local(&layout, &truth, &keep, 0.3, 3, &mut rng);
        let mut pairs: Vec<MatchPair> = (0..12u64)
            .map(|i| MatchPair { local: ClusterId(i), global: ClusterId((i * 7 + seed) % 12), matched_edges: 5 })
            .collect();
        pairs.extend((0..6u64).map(|i| MatchPair { local: ClusterId(i), global: ClusterId(i), matched_edges: 5 }));
        let a = geometric_consistency_filter(&pairs, &local, &global, 0.5);
        let mut shuffled = pairs.clone();
        use rand::seq::SliceRandom;
        shuffled.shuffle(&mut ChaCha8Rng::seed_from_u64(shuffle_seed));
        prop_assert_eq!(a, geometric_consistency_filter(&shuffled, &local, &global, 0.5));
    }

    #[test]
    fn localizer_output_is_anchor_times_product(anchor in pose(), incs in prop::collection::vec(pose(), 0..300)) {
        let mut loc = Localizer::new(anchor, 0.0);
        let mut product = nalgebra::Matrix4::<f64>::identity();
        for (k, inc) in incs.iter().enumerate() {
            loc.apply_increment(OdometryIncrement { timestamp: (k + 1) as f64, relative_pose: *inc }).unwrap();
            product *= inc.isometry().to_homogeneous();
            prop_assert!(loc.output().is_valid());
        }
        let expected = anchor.isometry().to_homogeneous() * product;
        let got = loc.output().isometry().to_homogeneous();
        let scale = 1.0 + expected.fixed_view::<3, 1>(0, 3).norm();
        prop_assert!((got - expected).abs().max() < 1e-9 * scale);
    }

    #[test]
    fn success_symmetric_and_rigid_invariant(a in point3(), b in point3(), t in pose(), delta in 0.1..50.0f64) {
        prop_assert_eq!(success(a, b, delta), success(b, a, delta));
        let (ta, tb) = (t.transform_xyz(a), t.transform_xyz(b));
        let d = ((a[0]-b[0]).powi(2) + (a[1]-b[1]).powi(2) + (a[2]-b[2]).powi(2)).sqrt();
        // skip razor-thin boundary cases where rounding decides
        if (d - delta).abs() > 1e-9 {
            prop_assert_eq!(success(a, b, delta), success(ta, tb, delta));
        }
    }

    #[test]
    fn quantiles_are_monotone(mut v in prop::collection::vec(prop_oneof![0.0..200.0f64, Just(f64::INFINITY)], 1..80)) {
        v.sort_by(f64::total_cmp);
        let q: Vec<f64> = [0.5, 0.9, 0.95, 0.99].iter().map(|&p| quantile(&v, p)).collect();
        prop_assert!(q.windows(2).all(|w| w[0] <= w[1]));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn map_queries_match_linear_scan(
        ops in prop::collection::vec((0u8..4, -60.0..60.0f64, -60.0..60.0f64, landmark_label()), 1..200),
        q in (-70.0..70.0f64, -70.0..70.0f64, 0.0..40.0f64),
    ) {
        let mut map = ClusterMap::new();
        for (op, x, y, l) in ops {
            let c = pole_cluster(x, y, l, 2);
            match op {
                0 | 1 => { map.insert(c); }
                2 => {
                    if let Some((id, _)) = map.nearest_cluster([x, y]) { map.merge_into(id, &c); }
                }
                _ => {
                    let first = map.ids().next();
                    if let Some(id) = first { map.remove(id); }
                }
            }
        }
        let brute: Vec<ClusterId> = map.iter().filter(|c| {
            let [cx, cy] = c.centroid2d();
            (cx - q.0).powi(2) + (cy - q.1).powi(2) <= q.2 * q.2
        }).map(|c| c.id()).collect();
        prop_assert_eq!(map.radius_search([q.0, q.1], q.2), brute);
        let nearest = map.iter().map(|c| {
            let [cx, cy] = c.centroid2d();
            (c.id(), ((cx - q.0).powi(2) + (cy - q.1).powi(2)).sqrt())
        }).fold(None::<(ClusterId, f64)>, |best, (id, d)| match best {
            Some((_, bd)) if bd <= d => best,
            _ => Some((id, d)),
        });
        prop_assert_eq!(map.nearest_cluster([q.0, q.1]), nearest);
    }

    #[test]
    fn extraction_ignores_point_order(seed in 0u64..10_000) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let layout = random_layout(&mut rng, 8, 20.0, 2.0);
        let mut points: Vec<LabeledPoint> = layout.iter().flat_map(|(p, l)| pole_cluster(p[0], p[1], *l, 15).points().to_vec()).collect();
        points.extend((0..30).map(|k| LabeledPoint::new(k as f64 * 0.7 - 10.0, 3.0, 0.0, SemanticLabel::Other(40))));
        let a = extract_clusters(&Frame::new(0.0, points.clone()), &ExtractionParams::default());
        use rand::seq::SliceRandom;
        points.shuffle(&mut rng);
        let b = extract_clusters(&Frame::new(0.0, points), &ExtractionParams::default());
        prop_assert_eq!(a.len(), 8);
        prop_assert_eq!(a, b);
    }

    #[test]
    fn registration_accounts_for_every_cluster(seed in 0u64..10_000, frames in 1usize..6) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut map = ClusterMap::new();
        for _ in 0..frames {
            let layout = random_layout(&mut rng, 10, 30.0, 1.5);
            let clusters: Vec<Cluster> = layout.iter().map(|(p, l)| pole_cluster(p[0], p[1], *l, 3)).collect();
            let before = map.len();
            let stats = register_frame(&mut map, &clusters, &random_planar_pose(&mut rng, 30.0, 5.0), &RegistrationParams::default()).unwrap();
            prop_assert_eq!(stats.merged + stats.inserted, clusters.len());
            prop_assert_eq!(map.len(), before + stats.inserted);
            prop_assert!(stats.assignments.iter().all(|id| map.contains(*id)));
        }
    }

    #[test]
    fn association_is_rigid_motion_invariant(seed in 0u64..10_000, motion in pose()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let layout = random_layout(&mut rng, 20, 35.0, 2.0);
        let global = map_from_layout(&layout, 3);
        let keep: Vec<usize> = (0..20).filter(|i| i % 4 != 0).collect();
        let (local, _) = planted_local(&layout, &random_planar_pose(&mut rng, 180.0, 40.0), &keep, 0.02, 3, &mut rng);
        let planar = Pose::from_xy_yaw(motion.translation().x, motion.translation().y, motion.yaw());
        let moved = ClusterMap::from_clusters(transform_clusters(&local.iter().cloned().collect::<Vec<_>>(), &planar));
        let params = AssociationParams::default();
        prop_assert_eq!(associate_maps(&local, &global, &params), associate_maps(&moved, &global, &params));
    }

    #[test]
    fn fine_align_never_worse_than_start(seed in 0u64..10_000, dx in -3.0..3.0f64, dy in -3.0..3.0f64, dyaw in -0.2..0.2f64) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let layout = random_layout(&mut rng, 10, 30.0, 3.0);
        let global = map_from_layout(&layout, 12);
        let truth = random_planar_pose(&mut rng, 180.0, 20.0);
        let keep: Vec<usize> = (0..10).collect();
        let (local, _) = planted_local(&layout, &truth, &keep, 0.05, 12, &mut rng);
        let pairs: Vec<MatchPair> = (0..10u64).map(|i| MatchPair { local: ClusterId(i), global: ClusterId(i), matched_edges: 5 }).collect();
        let init = Pose::from_xy_yaw(dx, dy, dyaw).compose(&truth);
        let zero = RelocParams { icp_max_iterations: 1, icp_convergence: f64::INFINITY, ..Default::default() };
        let start = fine_align(&pairs, &local, &global, &init, &RelocParams { icp_max_iterations: 0, ..zero });
        let mut last = start.residual_rms;
        for iters in [1usize, 2, 5, 10, 30] {
            let fit = fine_align(&pairs, &local, &global, &init, &RelocParams { icp_max_iterations: iters, icp_convergence: 0.0, ..Default::default() });
            prop_assert!(fit.residual_rms <= last + 1e-12);
            last = fit.residual_rms;
        }
    }
}
