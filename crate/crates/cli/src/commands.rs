use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use gftd_core::data::{
    load_ethucy, leave_one_out, make_windows, perturb_dataset, read_scene_csv, write_ethucy, write_scene_csv,
    Perturbation, Point, TrajectoryScene,
};
use gftd_core::denoiser::{train, Checkpoint, DenoiserModel, NetConfig, TrainConfig};
use gftd_core::math::RngStream;
use gftd_core::metrics::{score_scene, EvalReport};
use gftd_core::sampler::{
    preset_spec, read_prediction_csv, sample_scene, write_diagnostics_csv, write_prediction_csv, PredictionRequest,
    PresetConfig, SceneSampleSet, TaskPreset,
};
use gftd_core::schedule::{NoiseSchedule, ScheduleKind};
use gftd_core::synthgen::{generate, SynthConfig, SynthKind};
use rayon::prelude::*;
use sha2::{Digest, Sha256};

use crate::config::{ConfigError, RunConfig};

#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Core(gftd_core::Error),
}

impl From<ConfigError> for CliError {
    fn from(e: ConfigError) -> Self {
        CliError::Usage(e.0)
    }
}

impl From<gftd_core::Error> for CliError {
    fn from(e: gftd_core::Error) -> Self {
        CliError::Core(e)
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Core(e.into())
    }
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 1,
            CliError::Core(e) if e.is_numeric() => 3,
            CliError::Core(_) => 2,
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Usage(m) => f.write_str(m),
            CliError::Core(e) => write!(f, "{e}"),
        }
    }
}

pub type Result<T> = std::result::Result<T, CliError>;

fn usage<T>(msg: impl Into<String>) -> Result<T> {
    Err(CliError::Usage(msg.into()))
}

fn data_error(msg: impl Into<String>) -> CliError {
    CliError::Core(gftd_core::Error::InvalidData(msg.into()))
}

// ---------------------------------------------------------------------------
// Config → core types

pub fn schedule(cfg: &RunConfig) -> Result<NoiseSchedule> {
    let kind = match cfg.str("schedule.kind") {
        "linear" => ScheduleKind::Linear {
            beta_start: cfg.get("schedule.beta_start")?,
            beta_end: cfg.get("schedule.beta_end")?,
        },
        "cosine" => ScheduleKind::Cosine,
        other => return usage(format!("unknown schedule kind {other:?}")),
    };
    NoiseSchedule::new(cfg.get("schedule.steps")?, kind, cfg.get("schedule.gamma")?)
        .map_err(|e| CliError::Usage(format!("schedule: {e}")))
}

fn net_config(cfg: &RunConfig) -> Result<NetConfig> {
    Ok(NetConfig {
        latent_dim: cfg.get("model.k")?,
        hidden: cfg.get("model.hidden")?,
        layers: cfg.get("model.layers")?,
        time_embed_dim: cfg.get("model.time_embed_dim")?,
    })
}

fn train_config(cfg: &RunConfig) -> Result<TrainConfig> {
    Ok(TrainConfig {
        batch_size: cfg.get("train.batch")?,
        lr: cfg.get("train.lr")?,
        epochs: cfg.get("train.epochs")?,
        seed: cfg.get("train.seed")?,
    })
}

fn preset_config(cfg: &RunConfig) -> Result<PresetConfig> {
    Ok(PresetConfig {
        lambda: cfg.get("sample.lambda")?,
        reconstruction_weight: cfg.get("sample.reconstruction_weight")?,
        goal_weight: cfg.get("sample.goal_weight")?,
        repeller_weight: cfg.get("sample.repeller_weight")?,
        repeller_radius: cfg.get("sample.repeller_radius")?,
        sigma_ref: cfg.get("sample.sigma_ref")?,
        repaint_resample: cfg.get("sample.repaint_resample")?,
    })
}

fn preset(cfg: &RunConfig) -> Result<TaskPreset> {
    cfg.str("sample.preset")
        .parse()
        .map_err(|_| CliError::Usage(format!("unknown preset {:?}", cfg.str("sample.preset"))))
}

fn synth_config(cfg: &RunConfig, eval: bool) -> Result<SynthConfig> {
    let kinds = cfg
        .str("synth.kinds")
        .split(',')
        .map(|k| k.trim().parse::<SynthKind>())
        .collect::<std::result::Result<Vec<_>, _>>()
        .map_err(|e| CliError::Usage(format!("synth.kinds: {e}")))?;
    let (n_key, seed_key) = if eval {
        ("synth.eval_scenes", "synth.eval_seed")
    } else {
        ("synth.train_scenes", "synth.seed")
    };
    let out = SynthConfig {
        n_scenes: cfg.get(n_key)?,
        agents: (cfg.get("synth.agents_min")?, cfg.get("synth.agents_max")?),
        kinds,
        speed: (cfg.get("synth.speed_min")?, cfg.get("synth.speed_max")?),
        noise: cfg.get("synth.noise")?,
        arena: cfg.get("synth.arena")?,
        t_hist: cfg.get("data.t_hist")?,
        t_fut: cfg.get("data.t_fut")?,
        seed: cfg.get(seed_key)?,
    };
    out.validate().map_err(|e| CliError::Usage(format!("synth: {e}")))?;
    Ok(out)
}

/// Parses `kind:param` into the `perturb.*` keys.
pub fn apply_perturb_flag(cfg: &mut RunConfig, flag: &str) -> Result<()> {
    let Some((kind, param)) = flag.split_once(':') else {
        return usage(format!("--perturb expects kind:param, got {flag:?}"));
    };
    cfg.set("perturb.kind", kind.trim())?;
    cfg.set("perturb.param", param.trim())?;
    perturbation(cfg).map(|_| ())
}

fn perturbation(cfg: &RunConfig) -> Result<Option<Perturbation>> {
    let param: f64 = cfg.get("perturb.param")?;
    let seed: u64 = cfg.get("perturb.seed")?;
    let p = match cfg.str("perturb.kind") {
        "none" => return Ok(None),
        "gaussian" => Perturbation::gaussian(param, seed),
        "mask" => Perturbation::frame_mask(param, seed),
        other => return usage(format!("unknown perturbation {other:?}; expected none, gaussian or mask")),
    };
    p.map(Some).map_err(|e| CliError::Usage(format!("perturb: {e}")))
}

// ---------------------------------------------------------------------------
// Data loading

fn sorted_files(dir: &Path, ext: &str) -> Result<Vec<PathBuf>> {
    let mut files: Vec<PathBuf> = fs::read_dir(dir)
        .map_err(|e| data_error(format!("cannot read directory {}: {e}", dir.display())))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == ext))
        .collect();
    files.sort();
    Ok(files)
}

fn read_text(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| data_error(format!("cannot read {}: {e}", path.display())))
}

fn load_checkpoint(path: &Path) -> Result<Checkpoint> {
    Checkpoint::load(path).map_err(|e| match e {
        gftd_core::Error::Io(io) => data_error(format!("cannot read checkpoint {}: {io}", path.display())),
        other => other.into(),
    })
}

fn stem(path: &Path) -> String {
    path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default()
}

fn data_dir(cfg: &RunConfig, key: &str) -> Result<PathBuf> {
    let dir = cfg.str(key);
    if dir.is_empty() {
        return usage(format!("{key} must be set for data.source = {}", cfg.str("data.source")));
    }
    Ok(PathBuf::from(dir))
}

fn ethucy_scenes(cfg: &RunConfig, eval: bool) -> Result<Vec<TrajectoryScene>> {
    let dir = data_dir(cfg, "data.dir")?;
    let files = sorted_files(&dir, "txt")?;
    let names: Vec<String> = files.iter().map(|p| stem(p)).collect();
    let split = leave_one_out(&names, cfg.str("data.split"))?;
    let wanted: Vec<&String> = if eval { vec![&split.test] } else { split.train.iter().collect() };
    let (t_hist, t_fut, stride) = (cfg.get("data.t_hist")?, cfg.get("data.t_fut")?, cfg.get("data.stride")?);
    let mut scenes = Vec::new();
    for name in wanted {
        let tracks = load_ethucy(dir.join(format!("{name}.txt")))?;
        for mut scene in make_windows(&tracks, t_hist, t_fut, stride) {
            scene.id = format!("{name}_{}", scene.id);
            scenes.push(scene);
        }
    }
    Ok(scenes)
}

pub fn read_scene_dir(dir: &Path) -> Result<Vec<TrajectoryScene>> {
    sorted_files(dir, "csv")?
        .iter()
        .map(|p| {
            let text = read_text(p)?;
            read_scene_csv(&text, stem(p)).map_err(|e| data_error(format!("{}: {e}", p.display())))
        })
        .collect()
}

fn load_scenes(cfg: &RunConfig, eval: bool) -> Result<Vec<TrajectoryScene>> {
    let scenes = match cfg.str("data.source") {
        "synth" => generate(&synth_config(cfg, eval)?)?,
        "ethucy" => ethucy_scenes(cfg, eval)?,
        "scenes" => {
            let key = if eval && !cfg.str("data.eval_dir").is_empty() { "data.eval_dir" } else { "data.dir" };
            read_scene_dir(&data_dir(cfg, key)?)?
        }
        other => return usage(format!("unknown data source {other:?}; expected synth, ethucy or scenes")),
    };
    if scenes.is_empty() {
        return Err(CliError::Core(gftd_core::Error::InsufficientData("no scenes found".into())));
    }
    Ok(scenes)
}

fn eval_scenes(cfg: &RunConfig) -> Result<Vec<TrajectoryScene>> {
    let scenes = load_scenes(cfg, true)?;
    Ok(match perturbation(cfg)? {
        Some(p) => perturb_dataset(&scenes, &p),
        None => scenes,
    })
}

// ---------------------------------------------------------------------------
// Outputs

fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().fold(String::new(), |mut s, b| {
        let _ = write!(s, "{b:02x}");
        s
    })
}

/// Records the command, named input hashes and the resolved config.
fn write_manifest(out: &Path, command: &str, inputs: &[(&str, &Path)], cfg: &RunConfig) -> Result<()> {
    let mut text = format!("command = {command}\nversion = {}\n", env!("CARGO_PKG_VERSION"));
    for (name, path) in inputs {
        let bytes = fs::read(path)?;
        let _ = writeln!(text, "{name} = {}", path.display());
        let _ = writeln!(text, "{name}_sha256 = {}", sha256_hex(&bytes));
    }
    text.push('\n');
    text.push_str(&cfg.render());
    fs::write(out.join("manifest.txt"), text)?;
    Ok(())
}

fn safe_name(id: &str) -> String {
    id.chars()
        .map(|c| if c.is_ascii_alphanumeric() || c == '-' || c == '_' { c } else { '_' })
        .collect()
}

fn with_jobs<T: Send>(jobs: usize, f: impl FnOnce() -> T + Send) -> Result<T> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs)
        .build()
        .map_err(|e| CliError::Usage(format!("cannot start {jobs} worker threads: {e}")))?;
    Ok(pool.install(f))
}

// ---------------------------------------------------------------------------
// Commands

pub fn cmd_train(cfg: &RunConfig, out: &Path, checkpoint: Option<&Path>) -> Result<()> {
    let sched = schedule(cfg)?;
    let net = net_config(cfg)?;
    let tcfg = train_config(cfg)?;
    let scenes = load_scenes(cfg, false)?;
    let (t_hist, t_fut) = (scenes[0].t_hist, scenes[0].t_fut);
    let (codec, scale) = DenoiserModel::fit_codec(&scenes, net.latent_dim)?;
    let model = DenoiserModel::new(net, codec, scale, t_hist, t_fut, cfg.get("model.seed")?)?;
    let (model, history) = train(model, &scenes, &sched, &tcfg)?;

    fs::create_dir_all(out)?;
    let ckpt_path = checkpoint.map(Path::to_path_buf).unwrap_or_else(|| out.join("model.ckpt"));
    Checkpoint { model, schedule: sched }.save(&ckpt_path)?;
    let mut csv = String::from("epoch,loss\n");
    for (e, l) in history.iter().enumerate() {
        let _ = writeln!(csv, "{},{l:?}", e + 1);
    }
    fs::write(out.join("loss_history.csv"), csv)?;
    write_manifest(out, "train", &[("checkpoint", &ckpt_path)], cfg)?;
    if let (Some(first), Some(best)) = (history.first(), history.iter().copied().reduce(f64::min)) {
        println!("trained on {} scenes: epoch 1 loss {first:.5}, best {best:.5}", scenes.len());
    }
    println!("checkpoint written to {}", ckpt_path.display());
    Ok(())
}

fn run_scenes(
    cfg: &RunConfig,
    ckpt: &Checkpoint,
    scenes: &[TrajectoryScene],
    preset: TaskPreset,
    goals: Option<&BTreeMap<String, Vec<Point>>>,
    jobs: usize,
) -> Result<Vec<SceneSampleSet>> {
    let pcfg = preset_config(cfg)?;
    let k: usize = cfg.get("sample.k")?;
    let seed: u64 = cfg.get("sample.seed")?;
    let full_chain = cfg.bool("sample.full_chain")?;
    let sigma_override: Option<f64> = match cfg.str("sample.noise_sigma") {
        "" => None,
        _ => Some(cfg.get("sample.noise_sigma")?),
    };
    let requests = scenes
        .iter()
        .enumerate()
        .map(|(i, scene)| {
            let sigma = sigma_override.unwrap_or(scene.noise_sigma);
            let mut spec = preset_spec(preset, &pcfg, &ckpt.schedule, sigma)?;
            spec.full_chain = full_chain;
            let goals = match goals {
                Some(map) => Some(
                    map.get(&scene.id)
                        .cloned()
                        .ok_or_else(|| data_error(format!("no goal rows for scene {}", scene.id)))?,
                ),
                None => None,
            };
            Ok(PredictionRequest {
                scene: scene.clone(),
                k,
                spec,
                seed: RngStream::derive(seed, &[i as u64]).next_u64(),
                goals,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let sets = with_jobs(jobs, || {
        requests
            .par_iter()
            .map(|req| {
                sample_scene(&ckpt.model, &ckpt.schedule, req).map_err(|e| {
                    if e.is_numeric() {
                        e
                    } else {
                        gftd_core::Error::InvalidData(format!("scene {}: {e}", req.scene.id))
                    }
                })
            })
            .collect::<std::result::Result<Vec<_>, _>>()
    })??;
    Ok(sets)
}

fn write_sets(out: &Path, dir: &str, sets: &[SceneSampleSet]) -> Result<()> {
    let pred_dir = out.join(dir);
    let diag_dir = out.join("diagnostics");
    fs::create_dir_all(&pred_dir)?;
    fs::create_dir_all(&diag_dir)?;
    for set in sets {
        let name = format!("{}.csv", safe_name(&set.scene_id));
        fs::write(pred_dir.join(&name), write_prediction_csv(set))?;
        fs::write(diag_dir.join(&name), write_diagnostics_csv(set))?;
    }
    Ok(())
}

fn score(cfg: &RunConfig, scenes: &[TrajectoryScene], sets: &[SceneSampleSet]) -> Result<EvalReport> {
    let thr: f64 = cfg.get("eval.collision_threshold")?;
    let scores = scenes
        .iter()
        .zip(sets)
        .map(|(s, set)| score_scene(&s.id, &set.samples, &s.future(), thr))
        .collect::<gftd_core::Result<Vec<_>>>()?;
    Ok(EvalReport::from_scores(scores)?)
}

pub fn cmd_predict(cfg: &RunConfig, checkpoint: &Path, out: &Path, jobs: usize) -> Result<()> {
    let ckpt = load_checkpoint(checkpoint)?;
    let preset = preset(cfg)?;
    if preset == TaskPreset::Controllable {
        return usage("the controllable preset needs goals; use the generate command");
    }
    let scenes = eval_scenes(cfg)?;
    let sets = run_scenes(cfg, &ckpt, &scenes, preset, None, jobs)?;
    let report = score(cfg, &scenes, &sets)?;
    fs::create_dir_all(out)?;
    write_sets(out, "predictions", &sets)?;
    fs::write(out.join("report.csv"), report.to_csv())?;
    fs::write(out.join("report.txt"), report.to_table())?;
    write_manifest(out, "predict", &[("checkpoint", checkpoint)], cfg)?;
    print!("{}", report.to_table());
    Ok(())
}

pub const GOALS_CSV_HEADER: &str = "scene,agent,x,y";

/// Goals file: one `(x, y)` world-frame endpoint per agent per scene.
pub fn read_goals(text: &str) -> Result<BTreeMap<String, Vec<Point>>> {
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, h)) if h.trim() == GOALS_CSV_HEADER => {}
        _ => return Err(data_error(format!("goals file must start with {GOALS_CSV_HEADER:?}"))),
    }
    let mut rows: BTreeMap<String, BTreeMap<usize, Point>> = BTreeMap::new();
    for (no, line) in lines {
        if line.trim().is_empty() {
            continue;
        }
        let bad = || data_error(format!("goals line {}: expected scene,agent,x,y", no + 1));
        let f: Vec<&str> = line.split(',').map(str::trim).collect();
        if f.len() != 4 {
            return Err(bad());
        }
        let agent: usize = f[1].parse().map_err(|_| bad())?;
        let p = [f[2].parse().map_err(|_| bad())?, f[3].parse().map_err(|_| bad())?];
        if rows.entry(f[0].to_string()).or_default().insert(agent, p).is_some() {
            return Err(data_error(format!("goals line {}: duplicate agent {agent}", no + 1)));
        }
    }
    rows.into_iter()
        .map(|(scene, agents)| {
            if agents.keys().copied().ne(0..agents.len()) {
                return Err(data_error(format!("goals for scene {scene} must cover agents 0..n")));
            }
            Ok((scene, agents.into_values().collect()))
        })
        .collect()
}

pub fn write_goals(scenes: &[TrajectoryScene]) -> String {
    let mut out = format!("{GOALS_CSV_HEADER}\n");
    for s in scenes {
        for (a, agent) in s.agents.iter().enumerate() {
            let [x, y] = agent.positions[s.t_full() - 1];
            let _ = writeln!(out, "{},{a},{x:?},{y:?}", s.id);
        }
    }
    out
}

/// Mean over samples and agents of the final-position distance to the goal.
pub fn goal_error(set: &SceneSampleSet, goals: &[Point]) -> f64 {
    let total: f64 = set
        .samples
        .iter()
        .flat_map(|s| s.iter().zip(goals))
        .map(|(traj, g)| {
            let p = traj[traj.len() - 1];
            (p[0] - g[0]).hypot(p[1] - g[1])
        })
        .sum();
    total / (set.samples.len() * goals.len()) as f64
}

pub fn cmd_generate(cfg: &RunConfig, checkpoint: &Path, goals_path: &Path, out: &Path, jobs: usize) -> Result<()> {
    let ckpt = load_checkpoint(checkpoint)?;
    let goals = read_goals(&read_text(goals_path)?)?;
    let scenes = eval_scenes(cfg)?;
    for s in &scenes {
        match goals.get(&s.id) {
            Some(g) if g.len() == s.num_agents() => {}
            Some(g) => {
                return Err(data_error(format!(
                    "scene {}: {} goal rows for {} agents",
                    s.id,
                    g.len(),
                    s.num_agents()
                )))
            }
            None => return Err(data_error(format!("no goal rows for scene {}", s.id))),
        }
    }
    let sets = run_scenes(cfg, &ckpt, &scenes, TaskPreset::Controllable, Some(&goals), jobs)?;
    let report = score(cfg, &scenes, &sets)?;
    let mut csv = String::from("scene,jade,jfde,goal_error\n");
    let mut table = format!("{:<24}  {:>8}  {:>8}  {:>10}\n", "scene", "JADE", "JFDE", "goal err.");
    let mut mean_goal = 0.0;
    for (set, sc) in sets.iter().zip(&report.per_scene) {
        let ge = goal_error(set, &goals[&set.scene_id]);
        mean_goal += ge / sets.len() as f64;
        let _ = writeln!(csv, "{},{:?},{:?},{ge:?}", set.scene_id, sc.jade, sc.jfde);
        let _ = writeln!(table, "{:<24}  {:>8.4}  {:>8.4}  {ge:>10.4}", set.scene_id, sc.jade, sc.jfde);
    }
    let _ = writeln!(csv, "ALL,{:?},{:?},{mean_goal:?}", report.jade, report.jfde);
    let _ = writeln!(table, "{:<24}  {:>8.4}  {:>8.4}  {mean_goal:>10.4}", "mean", report.jade, report.jfde);
    fs::create_dir_all(out)?;
    write_sets(out, "generated", &sets)?;
    fs::write(out.join("generate_report.csv"), csv)?;
    write_manifest(out, "generate", &[("checkpoint", checkpoint), ("goals", goals_path)], cfg)?;
    print!("{table}");
    Ok(())
}

/// Pairs prediction and truth files: two files, or two directories matched
/// by file name.
fn eval_pairs(pred: &Path, truth: &Path) -> Result<Vec<(String, PathBuf, PathBuf)>> {
    if pred.is_dir() != truth.is_dir() {
        return usage("--pred and --truth must both be files or both be directories");
    }
    if !pred.is_dir() {
        return Ok(vec![(stem(truth), pred.to_path_buf(), truth.to_path_buf())]);
    }
    let truths = sorted_files(truth, "csv")?;
    if truths.is_empty() {
        return Err(data_error(format!("no truth files in {}", truth.display())));
    }
    truths
        .into_iter()
        .map(|t| {
            let name = t.file_name().expect("listed files have names").to_owned();
            let p = pred.join(&name);
            if !p.is_file() {
                return Err(data_error(format!("no prediction for scene {}", stem(&t))));
            }
            Ok((stem(&t), p, t))
        })
        .collect()
}

pub fn cmd_eval(cfg: &RunConfig, pred: &Path, truth: &Path, out: Option<&Path>) -> Result<()> {
    let thr: f64 = cfg.get("eval.collision_threshold")?;
    let scores = eval_pairs(pred, truth)?
        .into_iter()
        .map(|(id, p, t)| {
            let samples = read_prediction_csv(&read_text(&p)?)
                .map_err(|e| data_error(format!("scene {id}: {}: {e}", p.display())))?;
            let scene = read_scene_csv(&read_text(&t)?, id.clone())
                .map_err(|e| data_error(format!("scene {id}: {}: {e}", t.display())))?;
            Ok(score_scene(&id, &samples, &scene.future(), thr)?)
        })
        .collect::<Result<Vec<_>>>()?;
    let report = EvalReport::from_scores(scores)?;
    if let Some(out) = out {
        fs::create_dir_all(out)?;
        fs::write(out.join("report.csv"), report.to_csv())?;
        fs::write(out.join("report.txt"), report.to_table())?;
    }
    print!("{}", report.to_table());
    Ok(())
}

pub fn cmd_synth(cfg: &RunConfig, out: &Path) -> Result<()> {
    let train_set = generate(&synth_config(cfg, false)?)?;
    let eval_set = generate(&synth_config(cfg, true)?)?;
    for (name, scenes) in [("train", &train_set), ("eval", &eval_set)] {
        let dir = out.join(name);
        fs::create_dir_all(&dir)?;
        for s in scenes.iter() {
            fs::write(dir.join(format!("{}.csv", safe_name(&s.id))), write_scene_csv(s))?;
        }
        fs::write(out.join(format!("{name}.txt")), write_ethucy(scenes))?;
    }
    fs::write(out.join("eval_goals.csv"), write_goals(&eval_set))?;
    write_manifest(out, "synth", &[], cfg)?;
    println!(
        "wrote {} training and {} evaluation scenes to {}",
        train_set.len(),
        eval_set.len(),
        out.display()
    );
    Ok(())
}

pub fn cmd_perturb(cfg: &RunConfig, out: &Path) -> Result<()> {
    if perturbation(cfg)?.is_none() {
        return usage("perturb needs a perturbation, e.g. --perturb gaussian:0.15");
    }
    let scenes = eval_scenes(cfg)?;
    let dir = out.join("scenes");
    fs::create_dir_all(&dir)?;
    for s in &scenes {
        fs::write(dir.join(format!("{}.csv", safe_name(&s.id))), write_scene_csv(s))?;
    }
    write_manifest(out, "perturb", &[], cfg)?;
    println!("wrote {} perturbed scenes to {}", scenes.len(), dir.display());
    Ok(())
}
