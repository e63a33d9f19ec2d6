//! Joint displacement metrics and collision rate.
//!
//! Predictions are `K × N × T × 2` (samples, agents, future frames) and a
//! sample is scored as a whole, so all agents of the best sample come from
//! the same joint draw.

use std::fmt::Write as _;

use crate::data::Point;
use crate::error::{Error, Result};

pub const DEFAULT_COLLISION_THRESHOLD: f64 = 0.2;

fn dist(a: Point, b: Point) -> f64 {
    (a[0] - b[0]).hypot(a[1] - b[1])
}

fn check_shapes(pred: &[Vec<Vec<Point>>], truth: &[Vec<Point>]) -> Result<()> {
    if pred.is_empty() {
        return Err(Error::InvalidData("no samples".into()));
    }
    if truth.is_empty() || truth[0].is_empty() {
        return Err(Error::InvalidData("empty ground truth".into()));
    }
    let t = truth[0].len();
    if truth.iter().any(|a| a.len() != t) {
        return Err(Error::InvalidData("ground truth agents have different lengths".into()));
    }
    for sample in pred {
        if sample.len() != truth.len() {
            return Err(Error::DimensionMismatch {
                expected: truth.len(),
                got: sample.len(),
            });
        }
        if let Some(bad) = sample.iter().find(|a| a.len() != t) {
            return Err(Error::DimensionMismatch {
                expected: t,
                got: bad.len(),
            });
        }
    }
    Ok(())
}

fn argmin(values: impl Iterator<Item = f64>) -> (f64, usize) {
    values
        .enumerate()
        .fold((f64::INFINITY, 0), |best, (i, v)| if v < best.0 { (v, i) } else { best })
}

/// Mean displacement of one joint sample over all agents and frames.
pub fn sample_ade(sample: &[Vec<Point>], truth: &[Vec<Point>]) -> f64 {
    let mut total = 0.0;
    let mut count = 0usize;
    for (p, g) in sample.iter().zip(truth) {
        for (a, b) in p.iter().zip(g) {
            total += dist(*a, *b);
            count += 1;
        }
    }
    total / count as f64
}

/// Mean final-frame displacement of one joint sample.
pub fn sample_fde(sample: &[Vec<Point>], truth: &[Vec<Point>]) -> f64 {
    let total: f64 = sample
        .iter()
        .zip(truth)
        .map(|(p, g)| dist(*p.last().unwrap(), *g.last().unwrap()))
        .sum();
    total / truth.len() as f64
}

/// `(min_k JADE_k, argmin)`.
pub fn joint_ade(pred: &[Vec<Vec<Point>>], truth: &[Vec<Point>]) -> Result<(f64, usize)> {
    check_shapes(pred, truth)?;
    Ok(argmin(pred.iter().map(|s| sample_ade(s, truth))))
}

/// `(min_k JFDE_k, argmin)`, with the standard `1/N` prefactor.
pub fn joint_fde(pred: &[Vec<Vec<Point>>], truth: &[Vec<Point>]) -> Result<(f64, usize)> {
    check_shapes(pred, truth)?;
    Ok(argmin(pred.iter().map(|s| sample_fde(s, truth))))
}

/// True if any two agents come strictly closer than `threshold` at a common frame.
pub fn sample_collides(sample: &[Vec<Point>], threshold: f64) -> bool {
    for i in 0..sample.len() {
        for j in i + 1..sample.len() {
            if sample[i].iter().zip(&sample[j]).any(|(a, b)| dist(*a, *b) < threshold) {
                return true;
            }
        }
    }
    false
}

/// Fraction of samples containing at least one collision.
pub fn collision_rate(pred: &[Vec<Vec<Point>>], threshold: f64) -> f64 {
    if pred.is_empty() {
        return 0.0;
    }
    let hits = pred.iter().filter(|s| sample_collides(s, threshold)).count();
    hits as f64 / pred.len() as f64
}

#[derive(Debug, Clone, PartialEq)]
pub struct SceneScore {
    pub scene_id: String,
    /// Index of the sample with the lowest JADE.
    pub best_sample: usize,
    pub jade: f64,
    pub jfde: f64,
    pub collision_rate: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalReport {
    /// Means over scenes.
    pub jade: f64,
    pub jfde: f64,
    pub collision_rate: f64,
    pub per_scene: Vec<SceneScore>,
}

pub fn score_scene(
    scene_id: &str,
    pred: &[Vec<Vec<Point>>],
    truth: &[Vec<Point>],
    threshold: f64,
) -> Result<SceneScore> {
    let (jade, best_sample) =
        joint_ade(pred, truth).map_err(|e| Error::InvalidData(format!("scene {scene_id}: {e}")))?;
    let (jfde, _) = joint_fde(pred, truth)?;
    Ok(SceneScore {
        scene_id: scene_id.to_string(),
        best_sample,
        jade,
        jfde,
        collision_rate: collision_rate(pred, threshold),
    })
}

impl EvalReport {
    pub fn from_scores(per_scene: Vec<SceneScore>) -> Result<Self> {
        if per_scene.is_empty() {
            return Err(Error::InvalidData("no scenes to evaluate".into()));
        }
        let n = per_scene.len() as f64;
        let mean = |f: fn(&SceneScore) -> f64| per_scene.iter().map(f).sum::<f64>() / n;
        Ok(Self {
            jade: mean(|s| s.jade),
            jfde: mean(|s| s.jfde),
            collision_rate: mean(|s| s.collision_rate),
            per_scene,
        })
    }

    /// One row per scene followed by an `ALL` aggregate row.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("scene,best_sample,jade,jfde,collision_rate\n");
        for s in &self.per_scene {
            let _ = writeln!(out, "{},{},{:?},{:?},{:?}", s.scene_id, s.best_sample, s.jade, s.jfde, s.collision_rate);
        }
        let _ = writeln!(out, "ALL,,{:?},{:?},{:?}", self.jade, self.jfde, self.collision_rate);
        out
    }

    pub fn to_table(&self) -> String {
        let width = self
            .per_scene
            .iter()
            .map(|s| s.scene_id.len())
            .chain([5])
            .max()
            .unwrap_or(5);
        let mut out = format!("{:<width$}  {:>6}  {:>8}  {:>8}  {:>9}\n", "scene", "best", "JADE", "JFDE", "coll.rate");
        for s in &self.per_scene {
            let _ = writeln!(
                out,
                "{:<width$}  {:>6}  {:>8.4}  {:>8.4}  {:>9.4}",
                s.scene_id, s.best_sample, s.jade, s.jfde, s.collision_rate
            );
        }
        let _ = writeln!(
            out,
            "{:<width$}  {:>6}  {:>8.4}  {:>8.4}  {:>9.4}",
            "mean", "", self.jade, self.jfde, self.collision_rate
        );
        out
    }
}
