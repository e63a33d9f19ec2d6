//! Trajectory data model, ETH/UCY ingestion, scene graphs and perturbations.
//!
//! A scene stores `t_hist + t_fut` frames per agent. Frame offset `k` runs
//! from `-(t_hist - 1)` to `t_fut`; `k = 0` is the current frame and sits at
//! storage index `t_hist - 1`. History therefore covers `t_hist` frames
//! including the current one.

mod csv;
mod ethucy;
mod graph;
mod perturb;
mod split;

pub use csv::{read_scene_csv, write_scene_csv, SCENE_CSV_HEADER};
pub use ethucy::{load_ethucy, make_windows, parse_ethucy, write_ethucy, RawTrack};
pub use graph::{build_scene_graph, heading_of, wrap_angle, SceneGraph, EDGE_DIM};
pub use perturb::{apply_perturbation, perturb_dataset, Perturbation, PerturbationKind};
pub use split::{leave_one_out, Split, ETH_UCY_SCENES};

use crate::error::{Error, Result};

pub const DEFAULT_T_HIST: usize = 8;
pub const DEFAULT_T_FUT: usize = 12;

pub type Point = [f64; 2];

#[derive(Debug, Clone, PartialEq)]
pub struct AgentTrack {
    pub id: i64,
    /// World-frame positions, one per scene frame.
    pub positions: Vec<Point>,
    /// Observation flags for the `t_hist` history frames.
    pub observed: Vec<bool>,
}

/// One sliding window of a multi-agent scene.
#[derive(Debug, Clone, PartialEq)]
pub struct TrajectoryScene {
    pub id: String,
    pub agents: Vec<AgentTrack>,
    pub t_hist: usize,
    pub t_fut: usize,
    /// Standard deviation of measurement noise already present in the
    /// history, in meters.
    pub noise_sigma: f64,
}

impl TrajectoryScene {
    /// Scene with fully observed history.
    pub fn new(id: impl Into<String>, tracks: Vec<(i64, Vec<Point>)>, t_hist: usize, t_fut: usize) -> Result<Self> {
        let agents = tracks
            .into_iter()
            .map(|(id, positions)| AgentTrack {
                id,
                positions,
                observed: vec![true; t_hist],
            })
            .collect();
        let scene = Self {
            id: id.into(),
            agents,
            t_hist,
            t_fut,
            noise_sigma: 0.0,
        };
        scene.validate()?;
        Ok(scene)
    }

    pub fn validate(&self) -> Result<()> {
        if self.agents.is_empty() {
            return Err(Error::InvalidData(format!("scene {} has no agents", self.id)));
        }
        if self.t_hist < 1 || self.t_fut < 1 {
            return Err(Error::InvalidData("history and future lengths must be positive".into()));
        }
        for a in &self.agents {
            if a.positions.len() != self.t_full() {
                return Err(Error::DimensionMismatch {
                    expected: self.t_full(),
                    got: a.positions.len(),
                });
            }
            if a.observed.len() != self.t_hist {
                return Err(Error::DimensionMismatch {
                    expected: self.t_hist,
                    got: a.observed.len(),
                });
            }
            if !a.observed[self.current_index()] {
                return Err(Error::InvalidData(format!(
                    "agent {} in scene {}: current frame must be observed",
                    a.id, self.id
                )));
            }
            if a.positions.iter().flatten().any(|v| !v.is_finite()) {
                return Err(Error::InvalidData(format!("agent {} has non-finite positions", a.id)));
            }
        }
        Ok(())
    }

    pub fn num_agents(&self) -> usize {
        self.agents.len()
    }

    pub fn t_full(&self) -> usize {
        self.t_hist + self.t_fut
    }

    pub fn current_index(&self) -> usize {
        self.t_hist - 1
    }

    /// Frame offset of storage index `j`.
    pub fn offset_of(&self, j: usize) -> i64 {
        j as i64 - self.current_index() as i64
    }

    /// Ground-truth future, `N × t_fut` points.
    pub fn future(&self) -> Vec<Vec<Point>> {
        self.agents
            .iter()
            .map(|a| a.positions[self.t_hist..].to_vec())
            .collect()
    }

    /// Copy with the given agent order.
    pub fn permuted(&self, order: &[usize]) -> Self {
        let mut s = self.clone();
        s.agents = order.iter().map(|&i| self.agents[i].clone()).collect();
        s
    }

    /// Copy with every position mapped through `f`.
    pub fn map_positions(&self, f: impl Fn(Point) -> Point) -> Self {
        let mut s = self.clone();
        for a in &mut s.agents {
            for p in &mut a.positions {
                *p = f(*p);
            }
        }
        s
    }
}
