use super::net::{DenoiserNet, ForwardPass, NetConfig};
use crate::data::{build_scene_graph, SceneGraph, TrajectoryScene};
use crate::error::{Error, Result};
use crate::math::PcaCodec;

/// Trained noise predictor together with its trajectory codec.
///
/// Latent coordinates are PCA coordinates divided by `latent_scale`, the
/// standard deviation along the leading component, so the diffusion runs
/// on roughly unit-scale data.
#[derive(Debug, Clone, PartialEq)]
pub struct DenoiserModel {
    pub net: DenoiserNet,
    pub codec: PcaCodec,
    pub latent_scale: f64,
    pub t_hist: usize,
    pub t_fut: usize,
}

/// Noisy latent nodes of one scene at diffusion step `step`.
#[derive(Debug, Clone, PartialEq)]
pub struct LatentSceneState {
    /// Row-major `num_agents × latent_dim`.
    pub nodes: Vec<f64>,
    pub num_agents: usize,
    pub step: usize,
}

impl DenoiserModel {
    pub fn new(config: NetConfig, codec: PcaCodec, latent_scale: f64, t_hist: usize, t_fut: usize, seed: u64) -> Result<Self> {
        let model = Self {
            net: DenoiserNet::new(config, seed),
            codec,
            latent_scale,
            t_hist,
            t_fut,
        };
        model.validate()?;
        Ok(model)
    }

    pub fn validate(&self) -> Result<()> {
        if self.codec.latent_dim() != self.net.config.latent_dim {
            return Err(Error::DimensionMismatch {
                expected: self.net.config.latent_dim,
                got: self.codec.latent_dim(),
            });
        }
        if self.codec.ambient_dim() != 2 * (self.t_hist + self.t_fut) {
            return Err(Error::DimensionMismatch {
                expected: 2 * (self.t_hist + self.t_fut),
                got: self.codec.ambient_dim(),
            });
        }
        if !(self.latent_scale > 0.0 && self.latent_scale.is_finite()) {
            return Err(Error::InvalidData("latent scale must be positive".into()));
        }
        if self.net.flat_params().iter().any(|v| !v.is_finite()) {
            return Err(Error::numeric("model parameters"));
        }
        Ok(())
    }

    pub fn latent_dim(&self) -> usize {
        self.net.config.latent_dim
    }

    pub fn t_full(&self) -> usize {
        self.t_hist + self.t_fut
    }

    /// Fits the codec on every agent's normalized full trajectory and
    /// returns it with the matching latent scale.
    pub fn fit_codec(scenes: &[TrajectoryScene], k: usize) -> Result<(PcaCodec, f64)> {
        let samples: Vec<Vec<f64>> = scenes
            .iter()
            .flat_map(|s| {
                let g = build_scene_graph(s);
                (0..g.num_agents()).map(move |i| g.node_flat(i)).collect::<Vec<_>>()
            })
            .collect();
        let codec = PcaCodec::fit(&samples, k)?;
        let scale = codec.explained_variance()[0].sqrt().max(1e-6);
        Ok((codec, scale))
    }

    /// Flat normalized trajectory to latent coordinates.
    pub fn encode_node(&self, traj: &[f64]) -> Result<Vec<f64>> {
        let mut z = self.codec.encode(traj)?;
        z.iter_mut().for_each(|v| *v /= self.latent_scale);
        Ok(z)
    }

    pub fn decode_node(&self, z: &[f64]) -> Result<Vec<f64>> {
        let scaled: Vec<f64> = z.iter().map(|v| v * self.latent_scale).collect();
        self.codec.decode(&scaled)
    }

    /// Gradient w.r.t. a decoded trajectory pulled back to latent coordinates.
    pub fn decode_pullback(&self, grad_traj: &[f64]) -> Result<Vec<f64>> {
        let mut g = self.codec.pullback(grad_traj)?;
        g.iter_mut().for_each(|v| *v *= self.latent_scale);
        Ok(g)
    }

    /// Decodes every node of a latent state; returns `N` flat trajectories.
    pub fn decode_state(&self, nodes: &[f64], num_agents: usize) -> Result<Vec<Vec<f64>>> {
        let k = self.latent_dim();
        (0..num_agents)
            .map(|i| self.decode_node(&nodes[i * k..(i + 1) * k]))
            .collect()
    }

    /// Clean latent state `x_0` of a scene graph.
    pub fn encode_graph(&self, graph: &SceneGraph) -> Result<LatentSceneState> {
        let mut nodes = Vec::with_capacity(graph.num_agents() * self.latent_dim());
        for i in 0..graph.num_agents() {
            nodes.extend(self.encode_node(&graph.node_flat(i))?);
        }
        Ok(LatentSceneState {
            nodes,
            num_agents: graph.num_agents(),
            step: 0,
        })
    }

    /// `ε_θ(x_t, t, E)`
    pub fn predict_noise(&self, state: &LatentSceneState, graph: &SceneGraph) -> Result<Vec<f64>> {
        Ok(self.forward(state, graph)?.eps_hat)
    }

    pub fn forward(&self, state: &LatentSceneState, graph: &SceneGraph) -> Result<ForwardPass> {
        if state.num_agents != graph.num_agents() {
            return Err(Error::DimensionMismatch {
                expected: graph.num_agents(),
                got: state.num_agents,
            });
        }
        self.net.forward(&state.nodes, state.num_agents, state.step, &graph.edges)
    }
}
