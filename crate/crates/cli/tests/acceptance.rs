//! End-to-end acceptance run: one PASS/FAIL line per criterion.
//!
//! Trains the default model once on synthetic data and reuses it for every
//! sampling criterion. Exits non-zero if any criterion fails.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::Command;
use std::time::Instant;

use gftd_core::data::{build_scene_graph, perturb_dataset, Perturbation, Point, TrajectoryScene};
use gftd_core::denoiser::{
    train, training_loss, training_loss_value, DenoiserModel, LatentSceneState, NetConfig, TrainConfig,
    TrainingExample,
};
use gftd_core::guidance::{guidance_gradient, guidance_loss_and_grad, GuidanceSpec, GuidanceTerm, Observation};
use gftd_core::math::{finite_diff_grad, norm, relative_error, RngStream};
use gftd_core::metrics::{collision_rate, joint_ade, joint_fde, sample_fde, DEFAULT_COLLISION_THRESHOLD};
use gftd_core::sampler::{constant_velocity, predict, PresetConfig, TaskPreset};
use gftd_core::schedule::NoiseSchedule;
use gftd_core::synthgen::{generate, SynthConfig, SynthKind};

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail }
}

// ---------------------------------------------------------------------------
// 1. Diffusion algebra

fn diffusion_algebra() -> Outcome {
    let sched = NoiseSchedule::default();
    let mut rng = RngStream::new(1, 0);
    let mut worst = 0.0f64;
    for t in 1..=sched.steps() {
        let x0 = rng.gaussian_vec(40);
        let eps = rng.gaussian_vec(40);
        let xt = sched.forward_noise(&x0, t, &eps).unwrap();
        let back = sched.posterior_mean_x0(&xt, t, &eps).unwrap();
        for (a, b) in back.iter().zip(&x0) {
            worst = worst.max((a - b).abs());
        }
    }
    let n = 100_000;
    let mut worst_mean = 0.0f64;
    let mut worst_var = 0.0f64;
    for t in [1, 10, 50, sched.steps()] {
        let eps = rng.gaussian_vec(n);
        // x_0 = 5 keeps the mean well above its sampling error even at t = T.
        let draws: Vec<f64> = eps.iter().map(|e| sched.forward_noise(&[5.0], t, &[*e]).unwrap()[0]).collect();
        let mean = draws.iter().sum::<f64>() / n as f64;
        let var = draws.iter().map(|d| (d - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
        let want_mean = 5.0 * sched.alpha_bar(t).sqrt();
        let want_var = 1.0 - sched.alpha_bar(t);
        worst_mean = worst_mean.max((mean - want_mean).abs() / want_mean);
        worst_var = worst_var.max((var - want_var).abs() / want_var);
    }
    outcome(
        worst < 1e-10 && worst_mean < 0.05 && worst_var < 0.05,
        format!("round trip {worst:.1e}; marginal mean rel {worst_mean:.4}, var rel {worst_var:.4}"),
    )
}

// ---------------------------------------------------------------------------
// 2. Gradient correctness

fn micro_model(seed: u64) -> (DenoiserModel, Vec<TrajectoryScene>) {
    let scenes = generate(&SynthConfig {
        n_scenes: 12,
        agents: (2, 2),
        seed,
        ..SynthConfig::default()
    })
    .unwrap();
    let (codec, scale) = DenoiserModel::fit_codec(&scenes, 3).unwrap();
    let cfg = NetConfig {
        latent_dim: 3,
        hidden: 8,
        layers: 3,
        time_embed_dim: 4,
    };
    let mut model = DenoiserModel::new(cfg, codec, scale, 8, 12, seed).unwrap();
    // Random weights everywhere, so no layer is trivially zero.
    let mut rng = RngStream::new(seed, 7);
    let params: Vec<f64> = rng.gaussian_vec(model.net.num_params()).iter().map(|v| 0.5 * v).collect();
    model.net.set_flat_params(&params).unwrap();
    (model, scenes)
}

fn gradient_correctness() -> Outcome {
    let sched = NoiseSchedule::default();
    let (mut worst_train, mut worst_guide) = (0.0f64, 0.0f64);
    for point in 0..100u64 {
        let (model, scenes) = micro_model(point);
        let batch: Vec<TrainingExample> = scenes[..2]
            .iter()
            .map(|s| TrainingExample::from_scene(&model, s).unwrap())
            .collect();
        let rng = RngStream::new(point, 1);
        let (_, grad) = training_loss(&model, &batch, &sched, &mut rng.clone()).unwrap();
        let params = model.net.flat_params();
        let mut probe = model.clone();
        let fd = finite_diff_grad(
            |p| {
                probe.net.set_flat_params(p).unwrap();
                training_loss_value(&probe, &batch, &sched, &mut rng.clone()).unwrap()
            },
            &params,
            1e-6,
        )
        .unwrap();
        worst_train = worst_train.max(relative_error(&grad.flat_params(), &fd));

        let scene = &scenes[2];
        let graph = build_scene_graph(scene);
        let mut r = RngStream::new(point, 2);
        let goals: Vec<Point> = scene.agents.iter().map(|_| [4.0 * r.gaussian(), 4.0 * r.gaussian()]).collect();
        let obs = Observation::from_scene(scene, &graph, Some(goals)).unwrap();
        let spec = GuidanceSpec::new(
            vec![
                (GuidanceTerm::Reconstruction, 1.0),
                (GuidanceTerm::Repeller { radius: 50.0 }, 0.5),
                (GuidanceTerm::Goal, 0.3),
            ],
            1.0,
            &sched,
        )
        .unwrap();
        let state = LatentSceneState {
            nodes: r.gaussian_vec(6),
            num_agents: 2,
            step: 1 + r.below(sched.steps()),
        };
        let out = guidance_gradient(&model, &sched, &state, &graph, &obs, &spec).unwrap();
        let fd = finite_diff_grad(
            |x| {
                let s = LatentSceneState {
                    nodes: x.to_vec(),
                    ..state.clone()
                };
                guidance_loss_and_grad(&model, &sched, &s, &graph, &obs, &spec).unwrap().0
            },
            &state.nodes,
            1e-6,
        )
        .unwrap();
        let scale = (spec.grad_clip / norm(&fd)).min(1.0);
        let expected: Vec<f64> = fd.iter().map(|g| -g * scale).collect();
        worst_guide = worst_guide.max(relative_error(&out.grad, &expected));
    }
    outcome(
        worst_train < 1e-4 && worst_guide < 1e-4,
        format!("worst relative error: training {worst_train:.2e}, guidance {worst_guide:.2e}"),
    )
}

// ---------------------------------------------------------------------------
// 3. Permutation equivariance, 4. rotation invariance

fn crowd_scenes(n: usize, seed: u64) -> Vec<TrajectoryScene> {
    generate(&SynthConfig {
        n_scenes: n,
        agents: (2, 6),
        kinds: vec![SynthKind::ConstantVelocity, SynthKind::SineTurn],
        seed,
        ..SynthConfig::default()
    })
    .unwrap()
}

fn permutation_equivariance(model: &DenoiserModel) -> Outcome {
    let k = model.latent_dim();
    let mut rng = RngStream::new(3, 3);
    let mut worst = 0.0f64;
    let mut sizes = std::collections::BTreeSet::new();
    for scene in crowd_scenes(50, 303) {
        let n = scene.num_agents();
        sizes.insert(n);
        let graph = build_scene_graph(&scene);
        let state = LatentSceneState {
            nodes: rng.gaussian_vec(n * k),
            num_agents: n,
            step: 1 + rng.below(100),
        };
        let mut order: Vec<usize> = (0..n).collect();
        rng.shuffle(&mut order);
        let permuted = scene.permuted(&order);
        let pstate = LatentSceneState {
            nodes: order.iter().flat_map(|&i| state.nodes[i * k..(i + 1) * k].to_vec()).collect(),
            ..state.clone()
        };
        let base = model.predict_noise(&state, &graph).unwrap();
        let perm = model.predict_noise(&pstate, &build_scene_graph(&permuted)).unwrap();
        for (new, &old) in order.iter().enumerate() {
            for c in 0..k {
                worst = worst.max((perm[new * k + c] - base[old * k + c]).abs());
            }
        }
    }
    outcome(
        worst < 1e-6 && sizes.len() == 5,
        format!("max deviation {worst:.2e} over agent counts {sizes:?}"),
    )
}

fn rotation_invariance() -> Outcome {
    let mut rng = RngStream::new(4, 4);
    let mut worst = 0.0f64;
    for scene in crowd_scenes(100, 404) {
        let theta = rng.uniform_range(-std::f64::consts::PI, std::f64::consts::PI);
        let (s, c) = theta.sin_cos();
        let shift = [rng.uniform_range(-50.0, 50.0), rng.uniform_range(-50.0, 50.0)];
        let moved = scene.map_positions(|[x, y]| [c * x - s * y + shift[0], s * x + c * y + shift[1]]);
        let (a, b) = (build_scene_graph(&scene), build_scene_graph(&moved));
        for (na, nb) in a.nodes.iter().zip(&b.nodes) {
            for (p, q) in na.iter().zip(nb) {
                worst = worst.max((p[0] - q[0]).abs()).max((p[1] - q[1]).abs());
            }
        }
        for i in 0..a.num_agents() {
            for j in 0..a.num_agents() {
                for (p, q) in a.edge(i, j).iter().zip(b.edge(i, j)) {
                    // θ lives on a circle; compare modulo 2π.
                    let d = (p - q).abs();
                    worst = worst.max(d.min((d - 2.0 * std::f64::consts::PI).abs()));
                }
            }
        }
    }
    outcome(worst < 1e-9, format!("max feature deviation {worst:.2e}"))
}

// ---------------------------------------------------------------------------
// 5. Training sanity

fn train_default() -> (DenoiserModel, NoiseSchedule, Vec<f64>, Outcome) {
    let t0 = Instant::now();
    let sched = NoiseSchedule::default();
    let scenes = generate(&SynthConfig {
        n_scenes: 500,
        seed: 1,
        ..SynthConfig::default()
    })
    .unwrap();
    let cfg = NetConfig::default();
    let (codec, scale) = DenoiserModel::fit_codec(&scenes, cfg.latent_dim).unwrap();
    let init = DenoiserModel::new(cfg, codec, scale, 8, 12, 0).unwrap();
    let tcfg = TrainConfig::default();
    let (model, history) = train(init.clone(), &scenes, &sched, &tcfg).unwrap();
    let elapsed = t0.elapsed();
    let (_, again) = train(init, &scenes, &sched, &TrainConfig { epochs: 2, ..tcfg }).unwrap();
    let repeatable = again.iter().zip(&history).all(|(a, b)| a.to_bits() == b.to_bits());
    let best = history.iter().copied().fold(f64::INFINITY, f64::min);
    let drop = 1.0 - best / history[0];
    let pass = drop >= 0.5 && repeatable && elapsed.as_secs() < 15 * 60;
    let detail = format!(
        "epoch 1 loss {:.4}, best {best:.4} ({:.1}% lower), repeatable {repeatable}, {:.0} s",
        history[0],
        100.0 * drop,
        elapsed.as_secs_f64()
    );
    (model, sched, history, outcome(pass, detail))
}

// ---------------------------------------------------------------------------
// Sampling helpers

struct Scores {
    jade: f64,
    jfde: f64,
    /// Mean over samples and agents of the endpoint distance to the truth.
    endpoint: f64,
    collision: f64,
}

fn eval_set(
    model: &DenoiserModel,
    sched: &NoiseSchedule,
    observed: &[TrajectoryScene],
    truth: &[TrajectoryScene],
    preset: TaskPreset,
    cfg: &PresetConfig,
    seed: u64,
) -> Scores {
    let mut s = Scores {
        jade: 0.0,
        jfde: 0.0,
        endpoint: 0.0,
        collision: 0.0,
    };
    for (i, (obs, clean)) in observed.iter().zip(truth).enumerate() {
        let future = clean.future();
        let goals = (preset == TaskPreset::Controllable).then(|| future.iter().map(|f| *f.last().unwrap()).collect());
        let set = predict(
            model,
            sched,
            obs,
            20,
            preset,
            cfg,
            RngStream::derive(seed, &[i as u64]).next_u64(),
            goals,
        )
        .unwrap();
        s.jade += joint_ade(&set.samples, &future).unwrap().0;
        s.jfde += joint_fde(&set.samples, &future).unwrap().0;
        s.endpoint += set.samples.iter().map(|x| sample_fde(x, &future)).sum::<f64>() / set.samples.len() as f64;
        s.collision += collision_rate(&set.samples, DEFAULT_COLLISION_THRESHOLD);
    }
    let n = observed.len() as f64;
    s.jade /= n;
    s.jfde /= n;
    s.endpoint /= n;
    s.collision /= n;
    s
}

fn held_out(kinds: Vec<SynthKind>, n: usize, seed: u64) -> Vec<TrajectoryScene> {
    generate(&SynthConfig {
        n_scenes: n,
        kinds,
        seed,
        ..SynthConfig::default()
    })
    .unwrap()
}

// ---------------------------------------------------------------------------
// 6–10. Directional sampling criteria

fn prediction_beats_prior(model: &DenoiserModel, sched: &NoiseSchedule) -> Outcome {
    let scenes = held_out(vec![SynthKind::SineTurn], 20, 77);
    let cfg = PresetConfig::default();
    let guided = eval_set(model, sched, &scenes, &scenes, TaskPreset::Predict, &cfg, 6).jade;
    let cv = scenes
        .iter()
        .map(|s| joint_ade(&[constant_velocity(s)], &s.future()).unwrap().0)
        .sum::<f64>()
        / scenes.len() as f64;
    let ratio = guided / cv;
    outcome(
        ratio <= 0.5,
        format!("sine_turn minJADE {guided:.4} vs constant velocity {cv:.4} (ratio {ratio:.3})"),
    )
}

fn goal_controllability(model: &DenoiserModel, sched: &NoiseSchedule) -> Outcome {
    let scenes = held_out(SynthKind::ALL.to_vec(), 20, 78);
    let cfg = PresetConfig {
        lambda: 3.0,
        ..PresetConfig::default()
    };
    let free = eval_set(model, sched, &scenes, &scenes, TaskPreset::Predict, &cfg, 7);
    let goal = eval_set(model, sched, &scenes, &scenes, TaskPreset::Controllable, &cfg, 7);
    let drop = 1.0 - goal.endpoint / free.endpoint;
    outcome(
        drop >= 0.7,
        format!(
            "mean endpoint error {:.4} -> {:.4} ({:.1}% drop; minJFDE {:.4} -> {:.4})",
            free.endpoint,
            goal.endpoint,
            100.0 * drop,
            free.jfde,
            goal.jfde
        ),
    )
}

fn soft_vs_hard_conditioning(model: &DenoiserModel, sched: &NoiseSchedule) -> Outcome {
    let cfg = PresetConfig::default();
    let (mut dps, mut dps_noisy, mut rp, mut rp_noisy) = (0.0, 0.0, 0.0, 0.0);
    let seeds = 10u64;
    for s in 0..seeds {
        let clean = held_out(SynthKind::ALL.to_vec(), 6, 1000 + s);
        let noisy = perturb_dataset(&clean, &Perturbation::gaussian(0.15, s).unwrap());
        dps += eval_set(model, sched, &clean, &clean, TaskPreset::Predict, &cfg, s).jade;
        dps_noisy += eval_set(model, sched, &noisy, &clean, TaskPreset::Predict, &cfg, s).jade;
        rp += eval_set(model, sched, &clean, &clean, TaskPreset::PredictRepaint, &cfg, s).jade;
        rp_noisy += eval_set(model, sched, &noisy, &clean, TaskPreset::PredictRepaint, &cfg, s).jade;
    }
    let n = seeds as f64;
    let (dps, dps_noisy, rp, rp_noisy) = (dps / n, dps_noisy / n, rp / n, rp_noisy / n);
    let deg_dps = dps_noisy / dps - 1.0;
    let deg_rp = rp_noisy / rp - 1.0;
    let gap = dps.max(rp) / dps.min(rp) - 1.0;
    outcome(
        deg_dps < deg_rp && gap <= 0.1,
        format!(
            "σ=0: DPS {dps:.4}, RePaint {rp:.4} (gap {:.1}%); σ=0.15: DPS {dps_noisy:.4} (+{:.1}%), RePaint {rp_noisy:.4} (+{:.1}%)",
            100.0 * gap,
            100.0 * deg_dps,
            100.0 * deg_rp
        ),
    )
}

fn incomplete_history(model: &DenoiserModel, sched: &NoiseSchedule) -> Outcome {
    let scenes = held_out(SynthKind::ALL.to_vec(), 20, 79);
    let masked = perturb_dataset(&scenes, &Perturbation::frame_mask(0.75, 3).unwrap());
    let cfg = PresetConfig::default();
    let full = eval_set(model, sched, &scenes, &scenes, TaskPreset::Robust, &cfg, 9).jade;
    let partial = eval_set(model, sched, &masked, &scenes, TaskPreset::Robust, &cfg, 9).jade;
    let deg = partial / full - 1.0;
    outcome(
        deg <= 0.25,
        format!("minJADE {full:.4} -> {partial:.4} with 75% of history masked (+{:.1}%)", 100.0 * deg),
    )
}

fn repeller_effect(model: &DenoiserModel, sched: &NoiseSchedule) -> Outcome {
    let scenes = held_out(vec![SynthKind::CrossingPair], 20, 80);
    let off = PresetConfig::default();
    let on = PresetConfig {
        repeller_weight: 0.5,
        repeller_radius: 0.3,
        ..off
    };
    let a = eval_set(model, sched, &scenes, &scenes, TaskPreset::Predict, &off, 10);
    let b = eval_set(model, sched, &scenes, &scenes, TaskPreset::Predict, &on, 10);
    let reduction = 1.0 - b.collision / a.collision;
    let increase = b.jade / a.jade - 1.0;
    outcome(
        reduction >= 0.5 && increase <= 0.2,
        format!(
            "collision rate {:.3} -> {:.3} ({:.1}% lower), minJADE {:.4} -> {:.4} (+{:.1}%)",
            a.collision,
            b.collision,
            100.0 * reduction,
            a.jade,
            b.jade,
            100.0 * increase
        ),
    )
}

// ---------------------------------------------------------------------------
// 11. Metric oracle

fn brute_force(pred: &[Vec<Vec<Point>>], truth: &[Vec<Point>]) -> (f64, f64) {
    let (mut best_ade, mut best_fde) = (f64::INFINITY, f64::INFINITY);
    for sample in pred {
        let (mut ade, mut fde) = (0.0, 0.0);
        for i in 0..truth.len() {
            let t_len = truth[i].len();
            let mut sum = 0.0;
            for t in 0..t_len {
                let dx = sample[i][t][0] - truth[i][t][0];
                let dy = sample[i][t][1] - truth[i][t][1];
                sum += (dx * dx + dy * dy).sqrt();
            }
            ade += sum / t_len as f64;
            let dx = sample[i][t_len - 1][0] - truth[i][t_len - 1][0];
            let dy = sample[i][t_len - 1][1] - truth[i][t_len - 1][1];
            fde += (dx * dx + dy * dy).sqrt();
        }
        best_ade = best_ade.min(ade / truth.len() as f64);
        best_fde = best_fde.min(fde / truth.len() as f64);
    }
    (best_ade, best_fde)
}

fn metric_oracle() -> Outcome {
    let mut rng = RngStream::new(11, 11);
    let mut worst = 0.0f64;
    for _ in 0..1000 {
        let (k, n, t) = (1 + rng.below(20), 1 + rng.below(6), 1 + rng.below(12));
        let traj = |rng: &mut RngStream| -> Vec<Vec<Point>> {
            (0..n)
                .map(|_| (0..t).map(|_| [3.0 * rng.gaussian(), 3.0 * rng.gaussian()]).collect())
                .collect()
        };
        let truth = traj(&mut rng);
        let pred: Vec<_> = (0..k).map(|_| traj(&mut rng)).collect();
        let (ade, fde) = brute_force(&pred, &truth);
        worst = worst
            .max((joint_ade(&pred, &truth).unwrap().0 - ade).abs())
            .max((joint_fde(&pred, &truth).unwrap().0 - fde).abs());
    }
    outcome(worst <= 1e-12, format!("max deviation from brute force {worst:.1e}"))
}

// ---------------------------------------------------------------------------
// 12. CLI determinism

fn snapshot(root: &Path) -> Vec<(PathBuf, Vec<u8>)> {
    let mut out = Vec::new();
    let mut stack = vec![root.to_path_buf()];
    while let Some(dir) = stack.pop() {
        for entry in fs::read_dir(&dir).unwrap() {
            let p = entry.unwrap().path();
            if p.is_dir() {
                stack.push(p);
            } else {
                out.push((p.strip_prefix(root).unwrap().to_path_buf(), fs::read(&p).unwrap()));
            }
        }
    }
    out.sort();
    out
}

fn cli_determinism() -> Outcome {
    let dir = tempfile::TempDir::new().unwrap();
    let d = dir.path();
    let cfg = "[synth]\ntrain_scenes = 60\neval_scenes = 4\n[model]\nhidden = 16\ntime_embed_dim = 8\n[train]\nepochs = 5\n[sample]\nk = 4\n";
    fs::write(d.join("run.cfg"), cfg).unwrap();
    let commands: Vec<Vec<&str>> = vec![
        vec!["synth", "--out", "out/synth"],
        vec!["train", "--out", "out/train"],
        vec!["predict", "--checkpoint", "out/train/model.ckpt", "--out", "out/predict"],
        vec!["predict", "--checkpoint", "out/train/model.ckpt", "--preset", "predict_repaint", "--out", "out/repaint"],
        vec![
            "predict",
            "--checkpoint",
            "out/train/model.ckpt",
            "--preset",
            "robust",
            "--perturb",
            "gaussian:0.15",
            "--jobs",
            "2",
            "--out",
            "out/robust",
        ],
        vec![
            "generate",
            "--checkpoint",
            "out/train/model.ckpt",
            "--goals",
            "out/synth/eval_goals.csv",
            "--out",
            "out/generate",
        ],
        vec!["perturb", "--perturb", "mask:0.75", "--out", "out/perturb"],
        vec!["eval", "--pred", "out/predict/predictions", "--truth", "out/synth/eval", "--out", "out/eval"],
    ];
    let mut runs = Vec::new();
    for _ in 0..2 {
        for args in &commands {
            let status = Command::new(env!("CARGO_BIN_EXE_gftd"))
                .args(args)
                .args(["--config", "run.cfg", "--seed", "5"].iter().filter(|_| args[0] != "eval"))
                .current_dir(d)
                .output()
                .unwrap();
            if !status.status.success() {
                return outcome(
                    false,
                    format!("gftd {args:?} failed: {}", String::from_utf8_lossy(&status.stderr)),
                );
            }
        }
        runs.push(snapshot(&d.join("out")));
        fs::remove_dir_all(d.join("out")).unwrap();
    }
    let same = runs[0] == runs[1];
    let differing: Vec<String> = runs[0]
        .iter()
        .zip(&runs[1])
        .filter(|(a, b)| a != b)
        .map(|(a, _)| a.0.display().to_string())
        .collect();
    outcome(
        same,
        if same {
            format!("{} output files byte-identical across reruns", runs[0].len())
        } else {
            format!("differing outputs: {differing:?}")
        },
    )
}

// ---------------------------------------------------------------------------

fn main() {
    let mut results: Vec<(usize, &str, Outcome, f64)> = Vec::new();
    let mut run = |id: usize, name: &'static str, f: &mut dyn FnMut() -> Outcome| {
        let t0 = Instant::now();
        let o = f();
        let secs = t0.elapsed().as_secs_f64();
        println!(
            "{} criterion {id:>2} ({name}): {} [{secs:.1} s]",
            if o.pass { "PASS" } else { "FAIL" },
            o.detail
        );
        results.push((id, name, o, secs));
    };
    run(1, "diffusion algebra", &mut diffusion_algebra);
    run(2, "gradient correctness", &mut gradient_correctness);
    run(4, "rotation invariance", &mut rotation_invariance);
    run(11, "metric oracle", &mut metric_oracle);
    run(12, "CLI determinism", &mut cli_determinism);
    let mut trained = None;
    run(5, "training sanity", &mut || {
        let (model, sched, _, o) = train_default();
        trained = Some((model, sched));
        o
    });
    let (model, sched) = trained.expect("training ran");
    run(3, "permutation equivariance", &mut || permutation_equivariance(&model));
    run(6, "prediction beats prior", &mut || prediction_beats_prior(&model, &sched));
    run(7, "goal controllability", &mut || goal_controllability(&model, &sched));
    run(8, "soft vs hard conditioning", &mut || soft_vs_hard_conditioning(&model, &sched));
    run(9, "incomplete history", &mut || incomplete_history(&model, &sched));
    run(10, "repeller effect", &mut || repeller_effect(&model, &sched));

    results.sort_by_key(|r| r.0);
    let failed: Vec<usize> = results.iter().filter(|r| !r.2.pass).map(|r| r.0).collect();
    println!("\nsummary:");
    for (id, name, o, _) in &results {
        println!("  {} {id:>2} {name}", if o.pass { "PASS" } else { "FAIL" });
    }
    if failed.is_empty() {
        println!("all {} criteria passed", results.len());
    } else {
        println!("failed criteria: {failed:?}");
        std::process::exit(1);
    }
}
