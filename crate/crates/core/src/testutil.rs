//! Shared fixtures for unit tests.

use crate::data::TrajectoryScene;
use crate::denoiser::{DenoiserModel, NetConfig};
use crate::math::RngStream;

pub fn micro_config() -> NetConfig {
    NetConfig {
        latent_dim: 3,
        hidden: 8,
        layers: 3,
        time_embed_dim: 4,
    }
}

pub fn random_scene(rng: &mut RngStream, n: usize, t_hist: usize, t_fut: usize) -> TrajectoryScene {
    let tracks = (0..n)
        .map(|a| {
            let mut p = [rng.uniform_range(-3.0, 3.0), rng.uniform_range(-3.0, 3.0)];
            let v = [rng.uniform_range(-0.5, 0.5), rng.uniform_range(-0.5, 0.5)];
            let pts = (0..t_hist + t_fut)
                .map(|_| {
                    p = [p[0] + v[0] + 0.05 * rng.gaussian(), p[1] + v[1] + 0.05 * rng.gaussian()];
                    p
                })
                .collect();
            (a as i64, pts)
        })
        .collect();
    TrajectoryScene::new("s", tracks, t_hist, t_fut).unwrap()
}

/// Micro-model with every parameter randomized, including the decoder.
pub fn micro_model(seed: u64) -> (DenoiserModel, Vec<TrajectoryScene>) {
    let mut rng = RngStream::new(seed, 7);
    let scenes: Vec<_> = (0..6).map(|_| random_scene(&mut rng, 2, 2, 2)).collect();
    let (codec, scale) = DenoiserModel::fit_codec(&scenes, 3).unwrap();
    let mut model = DenoiserModel::new(micro_config(), codec, scale, 2, 2, seed).unwrap();
    let p: Vec<f64> = (0..model.net.num_params()).map(|_| 0.5 * rng.gaussian()).collect();
    model.net.set_flat_params(&p).unwrap();
    (model, scenes)
}
