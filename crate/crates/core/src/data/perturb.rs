use super::TrajectoryScene;
use crate::error::{Error, Result};
use crate::math::RngStream;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum PerturbationKind {
    /// i.i.d. Gaussian noise with this standard deviation (meters) on every
    /// history coordinate, current frame included.
    GaussianNoise { sigma: f64 },
    /// Hides `⌊ratio · (t_hist − 1)⌋` randomly chosen non-current history
    /// frames per agent.
    FrameMask { missing_ratio: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Perturbation {
    pub kind: PerturbationKind,
    pub seed: u64,
}

impl Perturbation {
    pub fn gaussian(sigma: f64, seed: u64) -> Result<Self> {
        if !(sigma >= 0.0) || !sigma.is_finite() {
            return Err(Error::InvalidData(format!("noise sigma {sigma} must be ≥ 0")));
        }
        Ok(Self {
            kind: PerturbationKind::GaussianNoise { sigma },
            seed,
        })
    }

    pub fn frame_mask(missing_ratio: f64, seed: u64) -> Result<Self> {
        if !(0.0..1.0).contains(&missing_ratio) {
            return Err(Error::InvalidData(format!(
                "missing ratio {missing_ratio} must lie in [0, 1)"
            )));
        }
        Ok(Self {
            kind: PerturbationKind::FrameMask { missing_ratio },
            seed,
        })
    }

    /// Number of frames hidden per agent for a history of `t_hist` frames.
    pub fn masked_count(missing_ratio: f64, t_hist: usize) -> usize {
        let eligible = t_hist.saturating_sub(1);
        // The nudge keeps products like 0.7·10 from landing just below an integer.
        ((missing_ratio * eligible as f64) + 1e-9).floor().min(eligible as f64) as usize
    }
}

pub fn apply_perturbation(scene: &TrajectoryScene, p: &Perturbation) -> TrajectoryScene {
    let mut rng = RngStream::derive(p.seed, &[0]);
    perturb_with(scene, p, &mut rng)
}

/// Perturbs every scene with its own stream, keyed by the scene's index.
pub fn perturb_dataset(scenes: &[TrajectoryScene], p: &Perturbation) -> Vec<TrajectoryScene> {
    scenes
        .iter()
        .enumerate()
        .map(|(i, s)| {
            let mut rng = RngStream::derive(p.seed, &[i as u64]);
            perturb_with(s, p, &mut rng)
        })
        .collect()
}

fn perturb_with(scene: &TrajectoryScene, p: &Perturbation, rng: &mut RngStream) -> TrajectoryScene {
    let mut out = scene.clone();
    match p.kind {
        PerturbationKind::GaussianNoise { sigma } => {
            if sigma == 0.0 {
                return out;
            }
            for agent in &mut out.agents {
                for pos in &mut agent.positions[..scene.t_hist] {
                    pos[0] += sigma * rng.gaussian();
                    pos[1] += sigma * rng.gaussian();
                }
            }
            out.noise_sigma = scene.noise_sigma.hypot(sigma);
        }
        PerturbationKind::FrameMask { missing_ratio } => {
            let count = Perturbation::masked_count(missing_ratio, scene.t_hist);
            if count == 0 {
                return out;
            }
            let mut candidates: Vec<usize> = (0..scene.current_index()).collect();
            for agent in &mut out.agents {
                candidates.sort_unstable();
                rng.shuffle(&mut candidates);
                for &j in &candidates[..count] {
                    agent.observed[j] = false;
                }
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn scene() -> TrajectoryScene {
        let tracks = (0..3)
            .map(|a| (a as i64, (0..20).map(|j| [j as f64 * 0.4, a as f64]).collect()))
            .collect();
        TrajectoryScene::new("s", tracks, 8, 12).unwrap()
    }

    #[test]
    fn zero_sigma_and_zero_ratio_are_identity() {
        let s = scene();
        assert_eq!(apply_perturbation(&s, &Perturbation::gaussian(0.0, 1).unwrap()), s);
        assert_eq!(apply_perturbation(&s, &Perturbation::frame_mask(0.0, 1).unwrap()), s);
    }

    #[test]
    fn mask_count_and_current_frame() {
        // ⌊0.75·7⌋ = 5, ⌊0.5·7⌋ = 3, ⌊0.25·7⌋ = 1.
        for (ratio, expect) in [(0.75, 5), (0.5, 3), (0.25, 1)] {
            let out = apply_perturbation(&scene(), &Perturbation::frame_mask(ratio, 3).unwrap());
            for a in &out.agents {
                assert_eq!(a.observed.iter().filter(|o| !**o).count(), expect);
                assert!(a.observed[7]);
            }
            assert_eq!(out.agents[0].positions, scene().agents[0].positions);
        }
    }

    #[test]
    fn noise_touches_history_only_and_is_reproducible() {
        let s = scene();
        let p = Perturbation::gaussian(0.15, 9).unwrap();
        let a = apply_perturbation(&s, &p);
        let b = apply_perturbation(&s, &p);
        assert_eq!(a, b);
        for (pa, ps) in a.agents.iter().zip(&s.agents) {
            assert!(pa.positions[..8].iter().zip(&ps.positions[..8]).all(|(x, y)| x != y));
            assert_eq!(pa.positions[8..], ps.positions[8..]);
        }
        assert_eq!(a.noise_sigma, 0.15);
    }

    #[test]
    fn dataset_streams_differ_per_scene() {
        let s = scene();
        let p = Perturbation::gaussian(0.1, 4).unwrap();
        let out = perturb_dataset(&[s.clone(), s], &p);
        assert_ne!(out[0].agents[0].positions[0], out[1].agents[0].positions[0]);
    }

    #[test]
    fn invalid_parameters_rejected() {
        assert!(Perturbation::gaussian(-1.0, 0).is_err());
        assert!(Perturbation::frame_mask(1.0, 0).is_err());
    }
}
