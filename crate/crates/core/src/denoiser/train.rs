use rayon::prelude::*;

use super::model::{DenoiserModel, LatentSceneState};
use super::net::DenoiserNet;
use crate::data::{build_scene_graph, SceneGraph, TrajectoryScene};
use crate::error::{Error, Result};
use crate::math::RngStream;
use crate::schedule::NoiseSchedule;

/// A scene graph paired with its clean latent nodes `x_0`.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainingExample {
    pub graph: SceneGraph,
    pub x0: LatentSceneState,
}

impl TrainingExample {
    pub fn from_scene(model: &DenoiserModel, scene: &TrajectoryScene) -> Result<Self> {
        let graph = build_scene_graph(scene);
        let x0 = model.encode_graph(&graph)?;
        Ok(Self { graph, x0 })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrainConfig {
    pub batch_size: usize,
    pub lr: f64,
    pub epochs: usize,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            batch_size: 32,
            lr: 1e-3,
            epochs: 100,
            seed: 0,
        }
    }
}

struct Draw {
    t: usize,
    eps: Vec<f64>,
}

fn example_loss(
    model: &DenoiserModel,
    sched: &NoiseSchedule,
    ex: &TrainingExample,
    draw: &Draw,
    grads: Option<&mut DenoiserNet>,
) -> Result<f64> {
    let x_t = sched.forward_noise(&ex.x0.nodes, draw.t, &draw.eps)?;
    let state = LatentSceneState {
        nodes: x_t,
        num_agents: ex.x0.num_agents,
        step: draw.t,
    };
    let pass = model.forward(&state, &ex.graph)?;
    let weight = sched.minsnr_weight(draw.t)?;
    let m = draw.eps.len() as f64;
    let resid: Vec<f64> = pass.eps_hat.iter().zip(&draw.eps).map(|(p, e)| p - e).collect();
    let loss = weight * resid.iter().map(|r| r * r).sum::<f64>() / m;
    if let Some(g) = grads {
        let d_eps: Vec<f64> = resid.iter().map(|r| 2.0 * weight * r / m).collect();
        model.net.backward(&pass, &d_eps, &ex.graph.edges, Some(g));
    }
    Ok(loss)
}

fn draw_batch(batch: &[TrainingExample], sched: &NoiseSchedule, rng: &mut RngStream) -> Vec<Draw> {
    batch
        .iter()
        .map(|ex| {
            let t = 1 + rng.below(sched.steps());
            let eps = rng.gaussian_vec(ex.x0.nodes.len());
            Draw { t, eps }
        })
        .collect()
}

/// Min-SNR weighted denoising loss of a batch and its parameter gradient.
///
/// For each example, in order, a step `t` and noise `ε` are drawn from
/// `rng`; the example loss is `w(t) · mean((ε − ε̂)²)`. The batch loss is
/// the mean over examples.
pub fn training_loss(
    model: &DenoiserModel,
    batch: &[TrainingExample],
    sched: &NoiseSchedule,
    rng: &mut RngStream,
) -> Result<(f64, DenoiserNet)> {
    if batch.is_empty() {
        return Err(Error::EmptyBatch);
    }
    let draws = draw_batch(batch, sched, rng);
    let parts: Vec<Result<(f64, DenoiserNet)>> = batch
        .par_iter()
        .zip(&draws)
        .map(|(ex, d)| {
            let mut g = model.net.zeros_like();
            let loss = example_loss(model, sched, ex, d, Some(&mut g))?;
            Ok((loss, g))
        })
        .collect();
    let scale = 1.0 / batch.len() as f64;
    let mut total = 0.0;
    let mut grad = model.net.zeros_like();
    for part in parts {
        let (loss, g) = part?;
        total += loss * scale;
        for (acc, src) in grad.tensors_mut().into_iter().zip(g.tensors()) {
            acc.iter_mut().zip(src).for_each(|(a, s)| *a += s * scale);
        }
    }
    Ok((total, grad))
}

/// Loss only, with the same draws as [`training_loss`] for the same `rng` state.
pub fn training_loss_value(
    model: &DenoiserModel,
    batch: &[TrainingExample],
    sched: &NoiseSchedule,
    rng: &mut RngStream,
) -> Result<f64> {
    if batch.is_empty() {
        return Err(Error::EmptyBatch);
    }
    let draws = draw_batch(batch, sched, rng);
    let mut total = 0.0;
    for (ex, d) in batch.iter().zip(&draws) {
        total += example_loss(model, sched, ex, d, None)?;
    }
    Ok(total / batch.len() as f64)
}

struct Adam {
    m: Vec<f64>,
    v: Vec<f64>,
    step: i32,
}

impl Adam {
    const BETA1: f64 = 0.9;
    const BETA2: f64 = 0.999;
    const EPS: f64 = 1e-8;

    fn new(n: usize) -> Self {
        Self {
            m: vec![0.0; n],
            v: vec![0.0; n],
            step: 0,
        }
    }

    fn update(&mut self, params: &mut [f64], grad: &[f64], lr: f64) {
        self.step += 1;
        let c1 = 1.0 - Self::BETA1.powi(self.step);
        let c2 = 1.0 - Self::BETA2.powi(self.step);
        for i in 0..params.len() {
            self.m[i] = Self::BETA1 * self.m[i] + (1.0 - Self::BETA1) * grad[i];
            self.v[i] = Self::BETA2 * self.v[i] + (1.0 - Self::BETA2) * grad[i] * grad[i];
            let mh = self.m[i] / c1;
            let vh = self.v[i] / c2;
            params[i] -= lr * mh / (vh.sqrt() + Self::EPS);
        }
    }
}

/// Trains with Adam; returns the updated model and the mean loss of each epoch.
///
/// Epoch `e` shuffles with stream `(seed, 0, e)` and batch `b` draws its
/// noise from stream `(seed, 1, e, b)`, so results depend only on the seed.
pub fn train(
    mut model: DenoiserModel,
    scenes: &[TrajectoryScene],
    sched: &NoiseSchedule,
    config: &TrainConfig,
) -> Result<(DenoiserModel, Vec<f64>)> {
    if scenes.is_empty() {
        return Err(Error::InsufficientData("empty training set".into()));
    }
    if config.batch_size == 0 {
        return Err(Error::InvalidData("batch size must be positive".into()));
    }
    let examples = scenes
        .iter()
        .map(|s| TrainingExample::from_scene(&model, s))
        .collect::<Result<Vec<_>>>()?;
    let mut adam = Adam::new(model.net.num_params());
    let mut history = Vec::with_capacity(config.epochs);
    let mut order: Vec<usize> = (0..examples.len()).collect();
    for epoch in 0..config.epochs {
        RngStream::derive(config.seed, &[0, epoch as u64]).shuffle(&mut order);
        let mut epoch_loss = 0.0;
        for (b, idx) in order.chunks(config.batch_size).enumerate() {
            let batch: Vec<TrainingExample> = idx.iter().map(|&i| examples[i].clone()).collect();
            let mut rng = RngStream::derive(config.seed, &[1, epoch as u64, b as u64]);
            let (loss, grad) = match training_loss(&model, &batch, sched, &mut rng) {
                Ok(v) => v,
                Err(Error::Numeric { .. }) => return Err(Error::Diverged { epoch }),
                Err(e) => return Err(e),
            };
            if !loss.is_finite() {
                return Err(Error::Diverged { epoch });
            }
            epoch_loss += loss * batch.len() as f64;
            let mut params = model.net.flat_params();
            adam.update(&mut params, &grad.flat_params(), config.lr);
            model.net.set_flat_params(&params)?;
        }
        history.push(epoch_loss / examples.len() as f64);
    }
    Ok((model, history))
}
