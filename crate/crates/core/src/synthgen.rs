//! Synthetic pedestrian-like scenes with known ground truth.
//!
//! One frame is taken to be 0.4 s, so speeds are in metres per frame.

use std::f64::consts::PI;

use crate::data::{Point, TrajectoryScene, DEFAULT_T_FUT, DEFAULT_T_HIST};
use crate::error::{Error, Result};
use crate::math::RngStream;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SynthKind {
    /// Straight lines at constant speed.
    ConstantVelocity,
    /// Constant speed with a sinusoidally oscillating heading.
    SineTurn,
    /// Two agents whose straight paths meet at the same frame mid-future.
    CrossingPair,
}

impl SynthKind {
    pub const ALL: [SynthKind; 3] = [Self::ConstantVelocity, Self::SineTurn, Self::CrossingPair];

    pub fn name(self) -> &'static str {
        match self {
            Self::ConstantVelocity => "constant_velocity",
            Self::SineTurn => "sine_turn",
            Self::CrossingPair => "crossing_pair",
        }
    }
}

impl std::str::FromStr for SynthKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| Error::InvalidData(format!("unknown scene kind {s:?}")))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SynthConfig {
    pub n_scenes: usize,
    /// Inclusive agent-count range; crossing pairs always have two agents.
    pub agents: (usize, usize),
    pub kinds: Vec<SynthKind>,
    /// Inclusive speed range, metres per frame.
    pub speed: (f64, f64),
    /// Standard deviation of additive Gaussian position noise, metres.
    pub noise: f64,
    /// Positions stay within `[-arena, arena]²` before noise.
    pub arena: f64,
    pub t_hist: usize,
    pub t_fut: usize,
    pub seed: u64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self {
            n_scenes: 100,
            agents: (1, 3),
            kinds: SynthKind::ALL.to_vec(),
            speed: (0.3, 0.6),
            noise: 0.0,
            arena: 10.0,
            t_hist: DEFAULT_T_HIST,
            t_fut: DEFAULT_T_FUT,
            seed: 0,
        }
    }
}

impl SynthConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidData(m.into()));
        if self.n_scenes == 0 {
            return bad("n_scenes must be at least 1");
        }
        if self.agents.0 == 0 || self.agents.0 > self.agents.1 {
            return bad("agent range must satisfy 1 ≤ min ≤ max");
        }
        if self.kinds.is_empty() {
            return bad("at least one scene kind is required");
        }
        if !(self.speed.0 > 0.0 && self.speed.0 <= self.speed.1 && self.speed.1.is_finite()) {
            return bad("speed range must satisfy 0 < min ≤ max");
        }
        if !(self.noise >= 0.0 && self.noise.is_finite()) {
            return bad("noise must be non-negative");
        }
        if self.t_hist < 2 || self.t_fut < 1 {
            return bad("need t_hist ≥ 2 and t_fut ≥ 1");
        }
        let reach = self.kinds.iter().map(|k| self.reach(*k)).fold(0.0, f64::max);
        if !(self.arena > reach) {
            return Err(Error::InvalidData(format!(
                "arena half-width {} cannot hold tracks reaching {reach} m from their centre",
                self.arena
            )));
        }
        Ok(())
    }

    fn meet_frame(&self) -> usize {
        self.t_hist + self.t_fut / 2
    }

    /// Largest distance of any track point from the point it is placed around.
    fn reach(&self, kind: SynthKind) -> f64 {
        let frames = self.t_hist + self.t_fut;
        match kind {
            SynthKind::CrossingPair => {
                let m = self.meet_frame();
                self.speed.1 * m.max(frames - 1 - m) as f64
            }
            _ => self.speed.1 * frames as f64 / 2.0,
        }
    }
}

/// Generates `config.n_scenes` scenes; scene `i` uses stream `(seed, i)`.
pub fn generate(config: &SynthConfig) -> Result<Vec<TrajectoryScene>> {
    config.validate()?;
    (0..config.n_scenes)
        .map(|i| {
            let mut rng = RngStream::derive(config.seed, &[i as u64]);
            let kind = config.kinds[rng.below(config.kinds.len())];
            generate_scene(config, kind, &format!("synth{i}_{}", kind.name()), &mut rng)
        })
        .collect()
}

fn generate_scene(cfg: &SynthConfig, kind: SynthKind, id: &str, rng: &mut RngStream) -> Result<TrajectoryScene> {
    let frames = cfg.t_hist + cfg.t_fut;
    let margin = cfg.arena - cfg.reach(kind);
    let center = |rng: &mut RngStream| [rng.uniform_range(-margin, margin), rng.uniform_range(-margin, margin)];
    let speed = |rng: &mut RngStream| rng.uniform_range(cfg.speed.0, cfg.speed.1);
    let mut keep_exact = None;
    let tracks: Vec<Vec<Point>> = match kind {
        SynthKind::ConstantVelocity | SynthKind::SineTurn => {
            let n = cfg.agents.0 + rng.below(cfg.agents.1 - cfg.agents.0 + 1);
            (0..n)
                .map(|_| {
                    let c = center(rng);
                    let s = speed(rng);
                    let heading = rng.uniform_range(-PI, PI);
                    let headings: Vec<f64> = if kind == SynthKind::SineTurn {
                        let amp = rng.uniform_range(0.3, 0.8);
                        let period = rng.uniform_range(12.0, 24.0);
                        let phase = rng.uniform_range(0.0, 2.0 * PI);
                        (0..frames)
                            .map(|j| heading + amp * (2.0 * PI * j as f64 / period + phase).sin())
                            .collect()
                    } else {
                        vec![heading; frames]
                    };
                    walk(c, s, &headings)
                })
                .collect()
        }
        SynthKind::CrossingPair => {
            let meet = cfg.meet_frame();
            keep_exact = Some(meet);
            let x = center(rng);
            let h0 = rng.uniform_range(-PI, PI);
            let h1 = h0 + rng.uniform_range(PI / 3.0, PI) * if rng.uniform() < 0.5 { 1.0 } else { -1.0 };
            [h0, h1]
                .iter()
                .map(|&h| {
                    let s = speed(rng);
                    let v = [s * h.cos(), s * h.sin()];
                    (0..frames)
                        .map(|j| {
                            let d = j as f64 - meet as f64;
                            [x[0] + v[0] * d, x[1] + v[1] * d]
                        })
                        .collect()
                })
                .collect()
        }
    };
    let tracks = tracks
        .into_iter()
        .enumerate()
        .map(|(a, mut pts)| {
            if cfg.noise > 0.0 {
                for (j, p) in pts.iter_mut().enumerate() {
                    let (nx, ny) = (rng.gaussian(), rng.gaussian());
                    if Some(j) != keep_exact {
                        p[0] += cfg.noise * nx;
                        p[1] += cfg.noise * ny;
                    }
                }
            }
            (a as i64, pts)
        })
        .collect();
    TrajectoryScene::new(id, tracks, cfg.t_hist, cfg.t_fut)
}

/// Integrates unit steps of length `speed` along `headings`, centred on `center`.
fn walk(center: Point, speed: f64, headings: &[f64]) -> Vec<Point> {
    let mut p = [0.0, 0.0];
    let mut pts = Vec::with_capacity(headings.len());
    for (j, h) in headings.iter().enumerate() {
        if j > 0 {
            p = [p[0] + speed * h.cos(), p[1] + speed * h.sin()];
        }
        pts.push(p);
    }
    let (lo, hi) = pts.iter().fold(([f64::MAX; 2], [f64::MIN; 2]), |(lo, hi), q| {
        ([lo[0].min(q[0]), lo[1].min(q[1])], [hi[0].max(q[0]), hi[1].max(q[1])])
    });
    let mid = [(lo[0] + hi[0]) / 2.0, (lo[1] + hi[1]) / 2.0];
    pts.iter()
        .map(|q| [q[0] - mid[0] + center[0], q[1] - mid[1] + center[1]])
        .collect()
}
