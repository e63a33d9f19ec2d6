//! Guided reverse diffusion over whole scenes.

use std::fmt::Write as _;

use rayon::prelude::*;

use crate::data::{build_scene_graph, Point, SceneGraph, TrajectoryScene};
use crate::denoiser::{DenoiserModel, LatentSceneState};
use crate::error::{Error, Result};
use crate::guidance::{guidance_output, GuidanceSpec, GuidanceTerm, Observation, DEFAULT_REPELLER_RADIUS};
use crate::math::RngStream;
use crate::schedule::NoiseSchedule;

#[derive(Debug, Clone, PartialEq)]
pub struct PredictionRequest {
    /// Only the observed history is used; future positions are ignored.
    pub scene: TrajectoryScene,
    pub k: usize,
    pub spec: GuidanceSpec,
    pub seed: u64,
    /// World-frame endpoint targets, required by goal guidance.
    pub goals: Option<Vec<Point>>,
}

/// Guidance losses at the Tweedie estimate of one reverse step.
#[derive(Debug, Clone, PartialEq)]
pub struct StepTrace {
    pub step: usize,
    pub loss: f64,
    pub term_losses: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SceneSampleSet {
    pub scene_id: String,
    pub t_hist: usize,
    /// `K × N × t_fut` world-frame future positions.
    pub samples: Vec<Vec<Vec<Point>>>,
    /// `K × N × (t_hist + t_fut)` world-frame trajectories.
    pub full: Vec<Vec<Vec<Point>>>,
    /// Per sample, one entry per step from `T` down to 1. Empty when the
    /// spec has no terms.
    pub diagnostics: Vec<Vec<StepTrace>>,
    pub term_names: Vec<&'static str>,
}

impl SceneSampleSet {
    pub fn num_samples(&self) -> usize {
        self.samples.len()
    }
}

pub fn term_name(term: &GuidanceTerm) -> &'static str {
    match term {
        GuidanceTerm::Reconstruction => "reconstruction",
        GuidanceTerm::Repeller { .. } => "repeller",
        GuidanceTerm::Goal => "goal",
    }
}

/// Source of the Gaussian blocks consumed by a reverse chain.
pub(crate) trait NoiseSource {
    /// A `rows × cols` block of standard normals, row-major.
    fn block(&mut self, rows: usize, cols: usize) -> Vec<f64>;
}

impl NoiseSource for RngStream {
    fn block(&mut self, rows: usize, cols: usize) -> Vec<f64> {
        self.gaussian_vec(rows * cols)
    }
}

/// Replaces the observed history of every node by the observation noised
/// to diffusion level `level`, then re-encodes.
///
/// The noise is drawn in latent space and decoded, so at `level` the
/// overwritten frames follow the same marginal as a forward-noised trajectory.
fn repaint(
    model: &DenoiserModel,
    sched: &NoiseSchedule,
    nodes: &mut [f64],
    obs: &Observation,
    level: usize,
    latent_noise: &[f64],
) -> Result<()> {
    let k = model.latent_dim();
    let ab = sched.alpha_bar(level);
    let (a, b) = (ab.sqrt(), (1.0 - ab).sqrt());
    let mean = model.codec.mean().to_vec();
    for (i, (hist, mask)) in obs.history.iter().zip(&obs.mask).enumerate() {
        let z = &mut nodes[i * k..(i + 1) * k];
        let mut traj = model.decode_node(z)?;
        let noise = model.decode_node(&latent_noise[i * k..(i + 1) * k])?;
        for (j, (c, &seen)) in hist.iter().zip(mask).enumerate() {
            if !seen {
                continue;
            }
            for d in 0..2 {
                let idx = 2 * j + d;
                traj[idx] = mean[idx] + a * (c[d] - mean[idx]) + b * (noise[idx] - mean[idx]);
            }
        }
        z.copy_from_slice(&model.encode_node(&traj)?);
    }
    Ok(())
}

pub(crate) struct ChainOutput {
    pub x0: Vec<f64>,
    pub trace: Vec<StepTrace>,
}

pub(crate) fn run_chain(
    model: &DenoiserModel,
    sched: &NoiseSchedule,
    graph: &SceneGraph,
    obs: &Observation,
    spec: &GuidanceSpec,
    rng: &mut impl NoiseSource,
) -> std::result::Result<ChainOutput, (usize, Error)> {
    let n = graph.num_agents();
    let k = model.latent_dim();
    let total_steps = sched.steps();
    let guided = !spec.terms.is_empty();
    let mut x = rng.block(n, k);
    let mut trace = Vec::new();
    for t in (1..=total_steps).rev() {
        let passes = if spec.repaint && t > 1 { spec.repaint_resample } else { 1 };
        for u in 0..passes {
            let at = |e: Error| (t, e);
            let state = LatentSceneState {
                nodes: x,
                num_agents: n,
                step: t,
            };
            let pass = model.forward(&state, graph).map_err(at)?;
            let guidance = if guided {
                let out = guidance_output(model, sched, &state, graph, obs, spec, &pass).map_err(at)?;
                if u == 0 {
                    trace.push(StepTrace {
                        step: t,
                        loss: out.loss,
                        term_losses: out.term_losses.clone(),
                    });
                }
                Some(out.grad)
            } else {
                None
            };
            let z = rng.block(n, k);
            let mut next = sched.reverse_step(&state.nodes, t, &pass.eps_hat, &z).map_err(at)?;
            if let Some(g) = guidance {
                let lambda = spec.lambda_at(t);
                next.iter_mut().zip(&g).for_each(|(v, g)| *v += lambda * g);
            }
            if spec.repaint {
                let noise = rng.block(n, k);
                repaint(model, sched, &mut next, obs, t - 1, &noise).map_err(at)?;
            }
            if next.iter().any(|v| !v.is_finite()) {
                return Err((t, Error::numeric("reverse step")));
            }
            if u + 1 < passes {
                // Back to level t for another harmonizing pass.
                let e = rng.block(n, k);
                let (a, b) = (sched.alpha(t).sqrt(), sched.beta(t).sqrt());
                next = next.iter().zip(&e).map(|(v, e)| a * v + b * e).collect();
            }
            x = next;
        }
    }
    Ok(ChainOutput { x0: x, trace })
}

/// Draws `req.k` joint samples for one scene.
///
/// Sample `s` uses the random stream derived from `(seed, s)`, so results
/// do not depend on how samples are scheduled across threads.
pub fn sample_scene(model: &DenoiserModel, sched: &NoiseSchedule, req: &PredictionRequest) -> Result<SceneSampleSet> {
    if req.k == 0 {
        return Err(Error::InvalidData("sample count must be at least 1".into()));
    }
    req.spec.validate()?;
    if req.spec.lambda.len() != sched.steps() {
        return Err(Error::DimensionMismatch {
            expected: sched.steps(),
            got: req.spec.lambda.len(),
        });
    }
    if req.spec.needs_goals() && req.goals.is_none() {
        return Err(Error::MissingGoals);
    }
    let scene = &req.scene;
    scene.validate()?;
    if scene.t_hist != model.t_hist || scene.t_fut != model.t_fut {
        return Err(Error::InvalidData(format!(
            "scene horizon {}+{} differs from model horizon {}+{}",
            scene.t_hist, scene.t_fut, model.t_hist, model.t_fut
        )));
    }
    let graph = build_scene_graph(scene);
    let obs = Observation::from_scene(scene, &graph, req.goals.clone())?;

    let chains: Vec<Result<ChainOutput>> = (0..req.k)
        .into_par_iter()
        .map(|s| {
            let mut rng = RngStream::derive(req.seed, &[s as u64]);
            run_chain(model, sched, &graph, &obs, &req.spec, &mut rng).map_err(|(step, e)| Error::Sampling {
                sample: s,
                step,
                source: Box::new(e),
            })
        })
        .collect();

    let mut full = Vec::with_capacity(req.k);
    let mut samples = Vec::with_capacity(req.k);
    let mut diagnostics = Vec::with_capacity(req.k);
    for chain in chains {
        let chain = chain?;
        let traj: Vec<Vec<Point>> = model
            .decode_state(&chain.x0, graph.num_agents())?
            .iter()
            .enumerate()
            .map(|(i, f)| f.chunks_exact(2).map(|p| graph.to_world(i, [p[0], p[1]])).collect())
            .collect();
        samples.push(traj.iter().map(|t| t[scene.t_hist..].to_vec()).collect());
        full.push(traj);
        diagnostics.push(chain.trace);
    }
    Ok(SceneSampleSet {
        scene_id: scene.id.clone(),
        t_hist: scene.t_hist,
        samples,
        full,
        diagnostics,
        term_names: req.spec.terms.iter().map(|(t, _)| term_name(t)).collect(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TaskPreset {
    Predict,
    PredictRepaint,
    Controllable,
    Robust,
}

impl TaskPreset {
    pub const ALL: [TaskPreset; 4] = [Self::Predict, Self::PredictRepaint, Self::Controllable, Self::Robust];

    pub fn name(self) -> &'static str {
        match self {
            Self::Predict => "predict",
            Self::PredictRepaint => "predict_repaint",
            Self::Controllable => "controllable",
            Self::Robust => "robust",
        }
    }
}

impl std::str::FromStr for TaskPreset {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|p| p.name() == s)
            .ok_or_else(|| Error::InvalidData(format!("unknown preset {s:?}")))
    }
}

/// Guidance strengths shared by the task presets.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PresetConfig {
    /// Base `λ`; the per-step scale is `λ · (1 − ᾱ_t)`.
    pub lambda: f64,
    pub reconstruction_weight: f64,
    pub goal_weight: f64,
    /// Repeller weight, added to any preset; 0 disables it.
    pub repeller_weight: f64,
    pub repeller_radius: f64,
    /// Reference noise level of the robust preset.
    pub sigma_ref: f64,
    /// RePaint passes per step in `predict_repaint`.
    pub repaint_resample: usize,
}

impl Default for PresetConfig {
    fn default() -> Self {
        Self {
            lambda: 1.0,
            reconstruction_weight: 1.0,
            goal_weight: 1.0,
            repeller_weight: 0.0,
            repeller_radius: DEFAULT_REPELLER_RADIUS,
            sigma_ref: 0.05,
            repaint_resample: 3,
        }
    }
}

/// Guidance spec of a preset for observations with noise level `noise_sigma`.
pub fn preset_spec(preset: TaskPreset, cfg: &PresetConfig, sched: &NoiseSchedule, noise_sigma: f64) -> Result<GuidanceSpec> {
    let mut terms = vec![(GuidanceTerm::Reconstruction, cfg.reconstruction_weight)];
    if preset == TaskPreset::Controllable {
        terms.push((GuidanceTerm::Goal, cfg.goal_weight));
    }
    if cfg.repeller_weight > 0.0 {
        terms.push((
            GuidanceTerm::Repeller {
                radius: cfg.repeller_radius,
            },
            cfg.repeller_weight,
        ));
    }
    let lambda = match preset {
        TaskPreset::Robust => cfg.lambda / (1.0 + (noise_sigma / cfg.sigma_ref).powi(2)),
        _ => cfg.lambda,
    };
    let mut spec = GuidanceSpec::new(terms, lambda, sched)?;
    if preset == TaskPreset::PredictRepaint {
        spec = spec.with_repaint(true);
        spec.repaint_resample = cfg.repaint_resample;
        spec.validate()?;
    }
    Ok(spec)
}

/// Runs a task preset on one scene.
pub fn predict(
    model: &DenoiserModel,
    sched: &NoiseSchedule,
    scene: &TrajectoryScene,
    k: usize,
    preset: TaskPreset,
    cfg: &PresetConfig,
    seed: u64,
    goals: Option<Vec<Point>>,
) -> Result<SceneSampleSet> {
    if preset == TaskPreset::Controllable && goals.is_none() {
        return Err(Error::MissingGoals);
    }
    let spec = preset_spec(preset, cfg, sched, scene.noise_sigma)?;
    sample_scene(
        model,
        sched,
        &PredictionRequest {
            scene: scene.clone(),
            k,
            spec,
            seed,
            goals,
        },
    )
}

/// Extrapolates each agent's last observed velocity over the future horizon.
pub fn constant_velocity(scene: &TrajectoryScene) -> Vec<Vec<Point>> {
    let cur = scene.current_index();
    scene
        .agents
        .iter()
        .map(|a| {
            let p = a.positions[cur];
            let v = match (0..cur).rev().find(|&j| a.observed[j]) {
                Some(j) => {
                    let gap = (cur - j) as f64;
                    [(p[0] - a.positions[j][0]) / gap, (p[1] - a.positions[j][1]) / gap]
                }
                None => [0.0, 0.0],
            };
            (1..=scene.t_fut)
                .map(|s| [p[0] + v[0] * s as f64, p[1] + v[1] * s as f64])
                .collect()
        })
        .collect()
}

pub const PREDICTION_CSV_HEADER: &str = "sample,agent,frame,x,y,segment";

/// `frame` is the offset from the current frame, as in scene CSV files.
pub fn write_prediction_csv(set: &SceneSampleSet) -> String {
    let mut out = String::from(PREDICTION_CSV_HEADER);
    out.push('\n');
    for (s, sample) in set.full.iter().enumerate() {
        for (a, traj) in sample.iter().enumerate() {
            for (j, [x, y]) in traj.iter().enumerate() {
                let offset = j as i64 - (set.t_hist as i64 - 1);
                let segment = if offset <= 0 { "history" } else { "future" };
                let _ = writeln!(out, "{s},{a},{offset},{x:?},{y:?},{segment}");
            }
        }
    }
    out
}

/// Parses a prediction CSV into `K × N × t_fut` future positions.
pub fn read_prediction_csv(text: &str) -> Result<Vec<Vec<Vec<Point>>>> {
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, h)) if h.trim() == PREDICTION_CSV_HEADER => {}
        _ => {
            return Err(Error::Parse {
                line: 1,
                msg: format!("expected header {PREDICTION_CSV_HEADER:?}"),
            })
        }
    }
    type Rows = std::collections::BTreeMap<usize, std::collections::BTreeMap<usize, std::collections::BTreeMap<i64, Point>>>;
    let mut rows: Rows = Default::default();
    for (idx, line) in lines {
        if line.trim().is_empty() {
            continue;
        }
        let bad = |msg: &str| Error::Parse {
            line: idx + 1,
            msg: msg.to_string(),
        };
        let f: Vec<&str> = line.split(',').map(str::trim).collect();
        if f.len() != 6 {
            return Err(bad("expected 6 comma-separated fields"));
        }
        let s: usize = f[0].parse().map_err(|_| bad("bad sample index"))?;
        let a: usize = f[1].parse().map_err(|_| bad("bad agent index"))?;
        let frame: i64 = f[2].parse().map_err(|_| bad("bad frame offset"))?;
        let x: f64 = f[3].parse().map_err(|_| bad("bad x"))?;
        let y: f64 = f[4].parse().map_err(|_| bad("bad y"))?;
        let expected = if frame <= 0 { "history" } else { "future" };
        if f[5] != expected {
            return Err(bad("segment does not match frame offset"));
        }
        if frame > 0 && rows.entry(s).or_default().entry(a).or_default().insert(frame, [x, y]).is_some() {
            return Err(bad("duplicate sample/agent/frame row"));
        }
    }
    let mut out = Vec::with_capacity(rows.len());
    let mut shape: Option<(usize, usize)> = None;
    for (i, (s, agents)) in rows.into_iter().enumerate() {
        if s != i {
            return Err(Error::InvalidData(format!("sample indices must be contiguous, missing {i}")));
        }
        let mut sample = Vec::with_capacity(agents.len());
        for (j, (a, frames)) in agents.into_iter().enumerate() {
            if a != j {
                return Err(Error::InvalidData(format!("sample {s}: agent indices must be contiguous")));
            }
            if frames.keys().copied().ne(1..=frames.len() as i64) {
                return Err(Error::InvalidData(format!("sample {s}, agent {a}: future frames not contiguous")));
            }
            sample.push(frames.into_values().collect::<Vec<_>>());
        }
        let this = (sample.len(), sample[0].len());
        if *shape.get_or_insert(this) != this || sample.iter().any(|t| t.len() != this.1) {
            return Err(Error::InvalidData(format!("sample {s} shape differs from sample 0")));
        }
        out.push(sample);
    }
    if out.is_empty() {
        return Err(Error::InvalidData("prediction CSV has no future rows".into()));
    }
    Ok(out)
}

/// One row per sample and step: `sample,step,loss,<term>...`.
pub fn write_diagnostics_csv(set: &SceneSampleSet) -> String {
    let mut out = String::from("sample,step,loss");
    for name in &set.term_names {
        out.push(',');
        out.push_str(name);
    }
    out.push('\n');
    for (s, trace) in set.diagnostics.iter().enumerate() {
        for st in trace {
            let _ = write!(out, "{s},{},{:?}", st.step, st.loss);
            for v in &st.term_losses {
                let _ = write!(out, ",{v:?}");
            }
            out.push('\n');
        }
    }
    out
}
