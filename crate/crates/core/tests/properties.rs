use gftd_core::data::{build_scene_graph, perturb_dataset, wrap_angle, Perturbation, Point, TrajectoryScene};
use gftd_core::math::PcaCodec;
use gftd_core::metrics::{collision_rate, joint_ade, joint_fde, sample_ade};
use gftd_core::schedule::NoiseSchedule;
use proptest::prelude::*;

const T_HIST: usize = 8;
const T_FUT: usize = 12;

fn scene_strategy(max_agents: usize) -> impl Strategy<Value = TrajectoryScene> {
    let track = (
        -20.0..20.0f64,
        -20.0..20.0f64,
        0.05..1.0f64,
        -3.1..3.1f64,
        -0.2..0.2f64,
    );
    prop::collection::vec(track, 1..=max_agents).prop_map(|tracks| {
        let tracks = tracks
            .into_iter()
            .enumerate()
            .map(|(id, (x, y, speed, heading, turn))| {
                let mut p = [x, y];
                let mut h = heading;
                let positions: Vec<Point> = (0..T_HIST + T_FUT)
                    .map(|_| {
                        let out = p;
                        p = [p[0] + speed * h.cos(), p[1] + speed * h.sin()];
                        h += turn;
                        out
                    })
                    .collect();
                (id as i64, positions)
            })
            .collect();
        TrajectoryScene::new("prop", tracks, T_HIST, T_FUT).unwrap()
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn tweedie_inverts_forward_noise(
        t in 1usize..=100,
        x0 in prop::collection::vec(-5.0..5.0f64, 12),
        eps in prop::collection::vec(-3.0..3.0f64, 12),
    ) {
        let sched = NoiseSchedule::default();
        let xt = sched.forward_noise(&x0, t, &eps).unwrap();
        let back = sched.posterior_mean_x0(&xt, t, &eps).unwrap();
        for (a, b) in back.iter().zip(&x0) {
            prop_assert!((a - b).abs() < 1e-10);
        }
    }

    #[test]
    fn scene_graph_is_invariant_to_rigid_motion(
        scene in scene_strategy(4),
        theta in -3.14..3.14f64,
        dx in -100.0..100.0f64,
        dy in -100.0..100.0f64,
    ) {
        let (s, c) = theta.sin_cos();
        let moved = scene.map_positions(|[x, y]| [c * x - s * y + dx, s * x + c * y + dy]);
        let (a, b) = (build_scene_graph(&scene), build_scene_graph(&moved));
        for i in 0..a.num_agents() {
            for (p, q) in a.node_flat(i).iter().zip(b.node_flat(i)) {
                prop_assert!((p - q).abs() < 1e-9);
            }
            for j in 0..a.num_agents() {
                for (k, (p, q)) in a.edge(i, j).iter().zip(b.edge(i, j)).enumerate() {
                    let d = if k == 3 { wrap_angle(p - q).abs() } else { (p - q).abs() };
                    prop_assert!(d < 1e-9, "edge {i}->{j} feature {k}: {p} vs {q}");
                }
            }
        }
    }

    #[test]
    fn local_frame_round_trips(scene in scene_strategy(3), x in -30.0..30.0f64, y in -30.0..30.0f64) {
        let g = build_scene_graph(&scene);
        for i in 0..g.num_agents() {
            let back = g.to_world(i, g.to_local(i, [x, y]));
            prop_assert!((back[0] - x).abs() < 1e-9 && (back[1] - y).abs() < 1e-9);
        }
    }

    #[test]
    fn perturbations_are_reproducible_and_spare_the_future(
        scene in scene_strategy(3),
        sigma in 0.0..0.5f64,
        ratio in 0.0..0.99f64,
        seed in any::<u64>(),
    ) {
        let scenes = vec![scene.clone(), scene];
        for p in [Perturbation::gaussian(sigma, seed).unwrap(), Perturbation::frame_mask(ratio, seed).unwrap()] {
            let once = perturb_dataset(&scenes, &p);
            prop_assert_eq!(&once, &perturb_dataset(&scenes, &p));
            for (out, orig) in once.iter().zip(&scenes) {
                prop_assert!(out.validate().is_ok());
                prop_assert_eq!(out.future(), orig.future());
            }
        }
        let masked = perturb_dataset(&scenes, &Perturbation::frame_mask(ratio, seed).unwrap());
        let hidden = Perturbation::masked_count(ratio, T_HIST);
        for s in &masked {
            for a in &s.agents {
                prop_assert_eq!(a.observed.iter().filter(|o| !**o).count(), hidden);
                prop_assert!(a.observed[T_HIST - 1]);
            }
        }
    }

    #[test]
    fn min_metrics_ignore_sample_order_and_bound_each_sample(
        scene in scene_strategy(3),
        offsets in prop::collection::vec((-2.0..2.0f64, -2.0..2.0f64), 1..8),
    ) {
        let truth = scene.future();
        let pred: Vec<Vec<Vec<Point>>> = offsets
            .iter()
            .map(|&(ox, oy)| truth.iter().map(|a| a.iter().map(|p| [p[0] + ox, p[1] + oy]).collect()).collect())
            .collect();
        let mut reversed = pred.clone();
        reversed.reverse();
        let (ade, _) = joint_ade(&pred, &truth).unwrap();
        prop_assert_eq!(ade, joint_ade(&reversed, &truth).unwrap().0);
        prop_assert_eq!(joint_fde(&pred, &truth).unwrap().0, joint_fde(&reversed, &truth).unwrap().0);
        for s in &pred {
            prop_assert!(ade <= sample_ade(s, &truth));
        }
        // A rigid shift moves every point by the same distance.
        let shortest = offsets.iter().map(|(x, y)| x.hypot(*y)).fold(f64::INFINITY, f64::min);
        prop_assert!((ade - shortest).abs() < 1e-9);
        // Shifting every agent by one vector keeps pairwise distances, so collisions match the truth.
        let truth_rate = collision_rate(&[truth.clone()], 0.2);
        prop_assert_eq!(collision_rate(&pred, 0.2), truth_rate);
    }

    #[test]
    fn pca_reconstructs_points_in_its_span(
        data in prop::collection::vec(prop::collection::vec(-3.0..3.0f64, 6), 8..20),
        coeffs in prop::collection::vec(-2.0..2.0f64, 6),
    ) {
        let codec = PcaCodec::fit(&data, 6).unwrap();
        let x: Vec<f64> = codec.mean().iter().zip(&coeffs).map(|(m, c)| m + c).collect();
        let back = codec.decode(&codec.encode(&x).unwrap()).unwrap();
        for (a, b) in back.iter().zip(&x) {
            prop_assert!((a - b).abs() < 1e-8);
        }
    }
}
