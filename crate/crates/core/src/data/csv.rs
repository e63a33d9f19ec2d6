use std::collections::BTreeMap;
use std::fmt::Write as _;

use super::{AgentTrack, Point, TrajectoryScene};
use crate::error::{Error, Result};

pub const SCENE_CSV_HEADER: &str = "agent,frame,x,y,observed";

/// One row per agent and frame; `frame` is the offset from the current
/// frame and `observed` is 1 for observed history frames, 0 otherwise.
pub fn write_scene_csv(scene: &TrajectoryScene) -> String {
    let mut out = String::from(SCENE_CSV_HEADER);
    out.push('\n');
    for (a, agent) in scene.agents.iter().enumerate() {
        for (j, [x, y]) in agent.positions.iter().enumerate() {
            let observed = j < scene.t_hist && agent.observed[j];
            let _ = writeln!(out, "{a},{},{x:?},{y:?},{}", scene.offset_of(j), u8::from(observed));
        }
    }
    out
}

pub fn read_scene_csv(text: &str, id: impl Into<String>) -> Result<TrajectoryScene> {
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, h)) if h.trim() == SCENE_CSV_HEADER => {}
        _ => {
            return Err(Error::Parse {
                line: 1,
                msg: format!("expected header {SCENE_CSV_HEADER:?}"),
            })
        }
    }
    let mut rows: BTreeMap<usize, BTreeMap<i64, (Point, bool)>> = BTreeMap::new();
    for (idx, line) in lines {
        let line_no = idx + 1;
        if line.trim().is_empty() {
            continue;
        }
        let f: Vec<&str> = line.split(',').map(str::trim).collect();
        let bad = |msg: &str| Error::Parse {
            line: line_no,
            msg: msg.to_string(),
        };
        if f.len() != 5 {
            return Err(bad("expected 5 comma-separated fields"));
        }
        let agent: usize = f[0].parse().map_err(|_| bad("bad agent index"))?;
        let frame: i64 = f[1].parse().map_err(|_| bad("bad frame offset"))?;
        let x: f64 = f[2].parse().map_err(|_| bad("bad x"))?;
        let y: f64 = f[3].parse().map_err(|_| bad("bad y"))?;
        let observed = match f[4] {
            "1" => true,
            "0" => false,
            _ => return Err(bad("observed must be 0 or 1")),
        };
        if rows.entry(agent).or_default().insert(frame, ([x, y], observed)).is_some() {
            return Err(bad("duplicate agent/frame row"));
        }
    }
    let Some(first) = rows.values().next() else {
        return Err(Error::InvalidData("scene CSV has no rows".into()));
    };
    let t_hist = first.keys().filter(|k| **k <= 0).count();
    let t_fut = first.keys().filter(|k| **k > 0).count();
    let expected: Vec<i64> = (-(t_hist as i64) + 1..=t_fut as i64).collect();

    let mut agents = Vec::new();
    for (i, (a, frames)) in rows.into_iter().enumerate() {
        if a != i {
            return Err(Error::InvalidData(format!("agent indices must be contiguous, missing {i}")));
        }
        if frames.keys().copied().collect::<Vec<_>>() != expected {
            return Err(Error::InvalidData(format!("agent {a} frames differ from agent 0")));
        }
        let positions = frames.values().map(|v| v.0).collect();
        let observed = frames.values().take(t_hist).map(|v| v.1).collect();
        agents.push(AgentTrack {
            id: a as i64,
            positions,
            observed,
        });
    }
    let scene = TrajectoryScene {
        id: id.into(),
        agents,
        t_hist,
        t_fut,
        noise_sigma: 0.0,
    };
    scene.validate()?;
    Ok(scene)
}
