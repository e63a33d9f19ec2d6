//! Guidance losses on the posterior-mean trajectory and their gradients
//! with respect to the noisy latent sample.
//!
//! Given `x_t`, the network predicts `ε̂ = ε_θ(x_t, t, E)` and the Tweedie
//! estimate `x̂_0 = (x_t − √(1−ᾱ_t) ε̂) / √ᾱ_t` is decoded to agent-local
//! trajectories. Reconstruction is scored in the agent frame; repeller and
//! goal terms are scored after mapping back to world coordinates.

use crate::data::{Point, SceneGraph, TrajectoryScene};
use crate::denoiser::{DenoiserModel, LatentSceneState};
use crate::error::{Error, Result};
use crate::math::norm;
use crate::schedule::NoiseSchedule;

pub const DEFAULT_REPELLER_RADIUS: f64 = 0.4;
pub const DEFAULT_GRAD_CLIP: f64 = 1.0;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum GuidanceTerm {
    Reconstruction,
    Repeller { radius: f64 },
    Goal,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GuidanceSpec {
    pub terms: Vec<(GuidanceTerm, f64)>,
    /// `λ_t` for `t = 1..=T`, stored at index `t − 1`.
    pub lambda: Vec<f64>,
    pub grad_clip: f64,
    pub repaint: bool,
    /// Denoise/re-noise passes per step when RePaint is on; 1 disables resampling.
    pub repaint_resample: usize,
    /// Differentiate through `ε_θ`; when false the network output is
    /// treated as constant in `x_t`.
    pub full_chain: bool,
}

impl GuidanceSpec {
    /// `λ_t = λ · (1 − ᾱ_t)` with default clipping, full chain rule and no RePaint.
    pub fn new(terms: Vec<(GuidanceTerm, f64)>, lambda: f64, sched: &NoiseSchedule) -> Result<Self> {
        let spec = Self {
            terms,
            lambda: scaled_lambda(lambda, sched),
            grad_clip: DEFAULT_GRAD_CLIP,
            repaint: false,
            repaint_resample: 1,
            full_chain: true,
        };
        spec.validate()?;
        Ok(spec)
    }

    /// No guidance terms at all.
    pub fn unguided(sched: &NoiseSchedule) -> Self {
        Self {
            terms: Vec::new(),
            lambda: vec![0.0; sched.steps()],
            grad_clip: DEFAULT_GRAD_CLIP,
            repaint: false,
            repaint_resample: 1,
            full_chain: true,
        }
    }

    pub fn with_repaint(mut self, on: bool) -> Self {
        self.repaint = on;
        self
    }

    pub fn validate(&self) -> Result<()> {
        for (term, w) in &self.terms {
            if !(*w >= 0.0 && w.is_finite()) {
                return Err(Error::InvalidData(format!("guidance weight {w} must be non-negative")));
            }
            if let GuidanceTerm::Repeller { radius } = term {
                if !(*radius > 0.0) {
                    return Err(Error::InvalidData("repeller radius must be positive".into()));
                }
            }
        }
        if self.lambda.iter().any(|l| !(*l >= 0.0 && l.is_finite())) {
            return Err(Error::InvalidData("lambda schedule must be non-negative".into()));
        }
        if self.repaint_resample == 0 {
            return Err(Error::InvalidData("RePaint resample count must be at least 1".into()));
        }
        if !(self.grad_clip > 0.0) {
            return Err(Error::InvalidData("gradient clip must be positive".into()));
        }
        Ok(())
    }

    pub fn needs_goals(&self) -> bool {
        self.terms.iter().any(|(t, w)| matches!(t, GuidanceTerm::Goal) && *w > 0.0)
    }

    pub fn lambda_at(&self, t: usize) -> f64 {
        self.lambda.get(t.wrapping_sub(1)).copied().unwrap_or(0.0)
    }
}

pub fn scaled_lambda(lambda: f64, sched: &NoiseSchedule) -> Vec<f64> {
    (1..=sched.steps()).map(|t| lambda * (1.0 - sched.alpha_bar(t))).collect()
}

/// Conditioning information for one scene.
#[derive(Debug, Clone, PartialEq)]
pub struct Observation {
    /// `N × t_hist` positions in each agent's local frame.
    pub history: Vec<Vec<Point>>,
    pub mask: Vec<Vec<bool>>,
    pub noise_sigma: f64,
    /// World-frame endpoint targets, one per agent.
    pub goals: Option<Vec<Point>>,
}

impl Observation {
    pub fn from_scene(scene: &TrajectoryScene, graph: &SceneGraph, goals: Option<Vec<Point>>) -> Result<Self> {
        let obs = Self {
            history: graph.nodes.iter().map(|n| n[..scene.t_hist].to_vec()).collect(),
            mask: scene.agents.iter().map(|a| a.observed.clone()).collect(),
            noise_sigma: scene.noise_sigma,
            goals,
        };
        obs.validate(scene.num_agents())?;
        Ok(obs)
    }

    pub fn validate(&self, num_agents: usize) -> Result<()> {
        if self.history.len() != num_agents || self.mask.len() != num_agents {
            return Err(Error::DimensionMismatch {
                expected: num_agents,
                got: self.history.len().min(self.mask.len()),
            });
        }
        for (h, m) in self.history.iter().zip(&self.mask) {
            if h.len() != m.len() || m.is_empty() {
                return Err(Error::InvalidData("history and mask lengths differ".into()));
            }
            if !m[m.len() - 1] {
                return Err(Error::InvalidData("current frame must be observed".into()));
            }
        }
        if let Some(g) = &self.goals {
            if g.len() != num_agents {
                return Err(Error::DimensionMismatch {
                    expected: num_agents,
                    got: g.len(),
                });
            }
            if g.iter().flatten().any(|v| !v.is_finite()) {
                return Err(Error::InvalidData("goals must be finite".into()));
            }
        }
        Ok(())
    }
}

/// `‖mask ⊙ (c − φ_his(x̂_0))‖₂` over agent-local trajectories.
pub fn loss_reconstruction(traj: &[Vec<Point>], obs: &Observation) -> f64 {
    reconstruction_with_grad(traj, obs).0
}

/// `(1/N) Σ_{i≠j} Σ_k max(1 − d^{ij}_k / r, 0)` over world-frame trajectories.
pub fn loss_repeller(traj: &[Vec<Point>], radius: f64) -> f64 {
    repeller_with_grad(traj, radius).0
}

/// `Σ_i ‖endpoint_i − g_i‖₂` over world-frame trajectories.
pub fn loss_goal(traj: &[Vec<Point>], goals: &[Point]) -> f64 {
    goal_with_grad(traj, goals).0
}

fn zeros_like(traj: &[Vec<Point>]) -> Vec<Vec<Point>> {
    traj.iter().map(|t| vec![[0.0; 2]; t.len()]).collect()
}

fn reconstruction_with_grad(traj: &[Vec<Point>], obs: &Observation) -> (f64, Vec<Vec<Point>>) {
    let mut grad = zeros_like(traj);
    let mut sq = 0.0;
    for (i, (h, m)) in obs.history.iter().zip(&obs.mask).enumerate() {
        for (j, (c, &seen)) in h.iter().zip(m).enumerate() {
            if seen {
                let r = [traj[i][j][0] - c[0], traj[i][j][1] - c[1]];
                sq += r[0] * r[0] + r[1] * r[1];
                grad[i][j] = r;
            }
        }
    }
    let loss = sq.sqrt();
    if loss > 0.0 {
        grad.iter_mut().flatten().flatten().for_each(|g| *g /= loss);
    } else {
        grad = zeros_like(traj);
    }
    (loss, grad)
}

fn repeller_with_grad(traj: &[Vec<Point>], radius: f64) -> (f64, Vec<Vec<Point>>) {
    let n = traj.len();
    let mut grad = zeros_like(traj);
    let mut loss = 0.0;
    if n < 2 {
        return (0.0, grad);
    }
    let scale = 1.0 / n as f64;
    for i in 0..n {
        for j in i + 1..n {
            for k in 0..traj[i].len().min(traj[j].len()) {
                let dv = [traj[i][k][0] - traj[j][k][0], traj[i][k][1] - traj[j][k][1]];
                let d = dv[0].hypot(dv[1]);
                if d < radius {
                    // (i, j) and (j, i) both contribute.
                    loss += 2.0 * scale * (1.0 - d / radius);
                    if d > 0.0 {
                        let c = -2.0 * scale / (radius * d);
                        for a in 0..2 {
                            grad[i][k][a] += c * dv[a];
                            grad[j][k][a] -= c * dv[a];
                        }
                    }
                }
            }
        }
    }
    (loss, grad)
}

fn goal_with_grad(traj: &[Vec<Point>], goals: &[Point]) -> (f64, Vec<Vec<Point>>) {
    let mut grad = zeros_like(traj);
    let mut loss = 0.0;
    for (i, (t, g)) in traj.iter().zip(goals).enumerate() {
        let Some(end) = t.last() else { continue };
        let r = [end[0] - g[0], end[1] - g[1]];
        let d = r[0].hypot(r[1]);
        loss += d;
        if d > 0.0 {
            let last = t.len() - 1;
            grad[i][last] = [r[0] / d, r[1] / d];
        }
    }
    (loss, grad)
}

/// Loss breakdown and update direction at one diffusion state.
#[derive(Debug, Clone, PartialEq)]
pub struct GuidanceOutput {
    /// `−∇_{x_t} L`, clipped to the spec's norm bound.
    pub grad: Vec<f64>,
    pub loss: f64,
    /// Unweighted value of each spec term, in spec order.
    pub term_losses: Vec<f64>,
    /// Norm of the gradient before clipping.
    pub raw_norm: f64,
}

/// Decoded Tweedie estimate: agent-local and world-frame trajectories.
pub struct DecodedEstimate {
    pub local: Vec<Vec<Point>>,
    pub world: Vec<Vec<Point>>,
}

fn to_points(flat: &[f64]) -> Vec<Point> {
    flat.chunks_exact(2).map(|c| [c[0], c[1]]).collect()
}

pub fn decode_estimate(model: &DenoiserModel, x0: &[f64], graph: &SceneGraph) -> Result<DecodedEstimate> {
    let local: Vec<Vec<Point>> = model
        .decode_state(x0, graph.num_agents())?
        .iter()
        .map(|f| to_points(f))
        .collect();
    let world = local
        .iter()
        .enumerate()
        .map(|(i, t)| t.iter().map(|&p| graph.to_world(i, p)).collect())
        .collect();
    Ok(DecodedEstimate { local, world })
}

/// Total weighted loss at `x_t` and its unclipped gradient `∇_{x_t} L`.
pub fn guidance_loss_and_grad(
    model: &DenoiserModel,
    sched: &NoiseSchedule,
    x_t: &LatentSceneState,
    graph: &SceneGraph,
    obs: &Observation,
    spec: &GuidanceSpec,
) -> Result<(f64, Vec<f64>, Vec<f64>)> {
    let pass = model.forward(x_t, graph)?;
    guidance_from_pass(model, sched, x_t, graph, obs, spec, &pass)
}

pub(crate) fn guidance_from_pass(
    model: &DenoiserModel,
    sched: &NoiseSchedule,
    x_t: &LatentSceneState,
    graph: &SceneGraph,
    obs: &Observation,
    spec: &GuidanceSpec,
    pass: &crate::denoiser::ForwardPass,
) -> Result<(f64, Vec<f64>, Vec<f64>)> {
    let t = x_t.step;
    let x0 = sched.posterior_mean_x0(&x_t.nodes, t, &pass.eps_hat)?;
    let est = decode_estimate(model, &x0, graph)?;
    let n = graph.num_agents();

    let mut total = 0.0;
    let mut term_losses = Vec::with_capacity(spec.terms.len());
    let mut g_local = zeros_like(&est.local);
    let mut g_world = zeros_like(&est.world);
    let accumulate = |dst: &mut Vec<Vec<Point>>, src: &[Vec<Point>], w: f64| {
        for (d, s) in dst.iter_mut().flatten().zip(src.iter().flatten()) {
            d[0] += w * s[0];
            d[1] += w * s[1];
        }
    };
    for (term, w) in &spec.terms {
        let (l, g, local) = match term {
            GuidanceTerm::Reconstruction => {
                let (l, g) = reconstruction_with_grad(&est.local, obs);
                (l, g, true)
            }
            GuidanceTerm::Repeller { radius } => {
                let (l, g) = repeller_with_grad(&est.world, *radius);
                (l, g, false)
            }
            GuidanceTerm::Goal => {
                let goals = obs.goals.as_ref().ok_or(Error::MissingGoals)?;
                let (l, g) = goal_with_grad(&est.world, goals);
                (l, g, false)
            }
        };
        term_losses.push(l);
        total += w * l;
        accumulate(if local { &mut g_local } else { &mut g_world }, &g, *w);
    }

    // World-frame gradients rotate back into each agent's frame.
    for i in 0..n {
        for (gl, gw) in g_local[i].iter_mut().zip(&g_world[i]) {
            let r = graph.direction_to_local(i, *gw);
            gl[0] += r[0];
            gl[1] += r[1];
        }
    }

    let k = model.latent_dim();
    let mut d_x0 = Vec::with_capacity(n * k);
    for g in &g_local {
        let flat: Vec<f64> = g.iter().flatten().copied().collect();
        d_x0.extend(model.decode_pullback(&flat)?);
    }
    let ab = sched.alpha_bar(t);
    let (a, b) = (ab.sqrt(), (1.0 - ab).sqrt());
    let mut grad: Vec<f64> = d_x0.iter().map(|g| g / a).collect();
    if spec.full_chain && d_x0.iter().any(|g| *g != 0.0) {
        let d_eps: Vec<f64> = d_x0.iter().map(|g| -b / a * g).collect();
        let through = model.net.backward(pass, &d_eps, &graph.edges, None);
        grad.iter_mut().zip(&through).for_each(|(g, v)| *g += v);
    }
    if grad.iter().any(|g| !g.is_finite()) || !total.is_finite() {
        return Err(Error::numeric(format!("guidance gradient at step {t}")));
    }
    Ok((total, grad, term_losses))
}

fn clip(mut grad: Vec<f64>, bound: f64) -> (Vec<f64>, f64) {
    let raw = norm(&grad);
    if raw > bound {
        let s = bound / raw;
        grad.iter_mut().for_each(|g| *g *= s);
    }
    (grad, raw)
}

/// `g = −∇_{x_t} L(x̂_0(x_t))`, clipped to norm `spec.grad_clip`.
pub fn guidance_gradient(
    model: &DenoiserModel,
    sched: &NoiseSchedule,
    x_t: &LatentSceneState,
    graph: &SceneGraph,
    obs: &Observation,
    spec: &GuidanceSpec,
) -> Result<GuidanceOutput> {
    let pass = model.forward(x_t, graph)?;
    guidance_output(model, sched, x_t, graph, obs, spec, &pass)
}

pub(crate) fn guidance_output(
    model: &DenoiserModel,
    sched: &NoiseSchedule,
    x_t: &LatentSceneState,
    graph: &SceneGraph,
    obs: &Observation,
    spec: &GuidanceSpec,
    pass: &crate::denoiser::ForwardPass,
) -> Result<GuidanceOutput> {
    let (loss, grad, term_losses) = guidance_from_pass(model, sched, x_t, graph, obs, spec, pass)?;
    let neg: Vec<f64> = grad.iter().map(|g| -g).collect();
    let (grad, raw_norm) = clip(neg, spec.grad_clip);
    Ok(GuidanceOutput {
        grad,
        loss,
        term_losses,
        raw_norm,
    })
}
