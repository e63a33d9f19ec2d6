use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt::Write as _;
use std::path::Path;

use super::{Point, TrajectoryScene};
use crate::error::{Error, Result};

/// All annotations of one pedestrian, sorted by frame.
#[derive(Debug, Clone, PartialEq)]
pub struct RawTrack {
    pub pedestrian_id: i64,
    pub frames: Vec<(i64, Point)>,
}

pub fn load_ethucy(path: impl AsRef<Path>) -> Result<Vec<RawTrack>> {
    let text = std::fs::read_to_string(path)?;
    parse_ethucy(&text)
}

/// Parses `frame_id pedestrian_id x y` lines; blank lines and lines
/// starting with `#` are skipped.
pub fn parse_ethucy(text: &str) -> Result<Vec<RawTrack>> {
    let mut by_id: BTreeMap<i64, Vec<(i64, Point)>> = BTreeMap::new();
    for (idx, line) in text.lines().enumerate() {
        let line_no = idx + 1;
        let trimmed = line.trim();
        if trimmed.is_empty() || trimmed.starts_with('#') {
            continue;
        }
        let fields: Vec<&str> = trimmed.split_whitespace().collect();
        if fields.len() != 4 {
            return Err(Error::Parse {
                line: line_no,
                msg: format!("expected 4 fields, found {}", fields.len()),
            });
        }
        let mut vals = [0.0; 4];
        for (v, f) in vals.iter_mut().zip(&fields) {
            *v = f.parse::<f64>().map_err(|_| Error::Parse {
                line: line_no,
                msg: format!("cannot parse {f:?} as a number"),
            })?;
            if !v.is_finite() {
                return Err(Error::Parse {
                    line: line_no,
                    msg: format!("non-finite value {f:?}"),
                });
            }
        }
        let frame = as_integer(vals[0]).ok_or_else(|| Error::Parse {
            line: line_no,
            msg: format!("frame id {} is not an integer", fields[0]),
        })?;
        let ped = as_integer(vals[1]).ok_or_else(|| Error::Parse {
            line: line_no,
            msg: format!("pedestrian id {} is not an integer", fields[1]),
        })?;
        by_id.entry(ped).or_default().push((frame, [vals[2], vals[3]]));
    }

    by_id
        .into_iter()
        .map(|(pedestrian_id, mut frames)| {
            frames.sort_by_key(|f| f.0);
            if frames.windows(2).any(|w| w[0].0 == w[1].0) {
                return Err(Error::InvalidData(format!(
                    "pedestrian {pedestrian_id} has duplicate frame annotations"
                )));
            }
            Ok(RawTrack {
                pedestrian_id,
                frames,
            })
        })
        .collect()
}

fn as_integer(v: f64) -> Option<i64> {
    (v.fract() == 0.0 && v.abs() < 9.0e15).then_some(v as i64)
}

/// Cuts tracks into windows of `t_hist + t_fut` consecutive annotated
/// frames.
///
/// Consecutive means adjacent in the sorted set of frame ids present in
/// the file, so the annotation stride of the source data needs no special
/// handling. A window becomes a scene when at least one pedestrian is
/// annotated at every one of its frames; only such pedestrians are kept.
pub fn make_windows(tracks: &[RawTrack], t_hist: usize, t_fut: usize, stride: usize) -> Vec<TrajectoryScene> {
    let t_full = t_hist + t_fut;
    if t_hist == 0 || t_fut == 0 || stride == 0 {
        return Vec::new();
    }
    let frames: Vec<i64> = tracks
        .iter()
        .flat_map(|t| t.frames.iter().map(|f| f.0))
        .collect::<BTreeSet<_>>()
        .into_iter()
        .collect();
    if frames.len() < t_full {
        return Vec::new();
    }
    let lookup: Vec<HashMap<i64, Point>> = tracks
        .iter()
        .map(|t| t.frames.iter().copied().collect())
        .collect();

    let mut scenes = Vec::new();
    for start in (0..=frames.len() - t_full).step_by(stride) {
        let window = &frames[start..start + t_full];
        let (first, last) = (window[0], window[t_full - 1]);
        let mut agents = Vec::new();
        for (track, map) in tracks.iter().zip(&lookup) {
            let (Some(&(lo, _)), Some(&(hi, _))) = (track.frames.first(), track.frames.last()) else {
                continue;
            };
            if lo > first || hi < last {
                continue;
            }
            let positions: Option<Vec<Point>> = window.iter().map(|f| map.get(f).copied()).collect();
            if let Some(positions) = positions {
                agents.push((track.pedestrian_id, positions));
            }
        }
        if !agents.is_empty() {
            let id = format!("f{first}");
            // Positions are finite and complete by construction.
            if let Ok(scene) = TrajectoryScene::new(id, agents, t_hist, t_fut) {
                scenes.push(scene);
            }
        }
    }
    scenes
}

/// Serializes scenes back into the ETH/UCY text layout.
///
/// Scene `s` frame `j` becomes frame id `10·(s·(t_full + 1) + j)` and every
/// agent receives a fresh pedestrian id, so windowing the output with the
/// same lengths and stride 1 yields the input scenes again.
pub fn write_ethucy(scenes: &[TrajectoryScene]) -> String {
    let mut out = String::new();
    let mut next_id = 1i64;
    for (s, scene) in scenes.iter().enumerate() {
        let base = s * (scene.t_full() + 1);
        let first_id = next_id;
        next_id += scene.num_agents() as i64;
        for j in 0..scene.t_full() {
            let frame = 10 * (base + j) as i64;
            for (a, agent) in scene.agents.iter().enumerate() {
                let [x, y] = agent.positions[j];
                let _ = writeln!(out, "{frame} {} {x:?} {y:?}", first_id + a as i64);
            }
        }
    }
    out
}
