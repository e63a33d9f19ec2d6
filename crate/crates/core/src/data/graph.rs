use std::f64::consts::PI;

use super::{Point, TrajectoryScene};

/// Edge feature layout: `[d, r_x, r_y, θ, cos θ, sin θ]`.
pub const EDGE_DIM: usize = 6;

const MIN_DISPLACEMENT: f64 = 1e-6;

/// Agent-centric view of a scene.
///
/// Node `i` is agent `i`'s trajectory translated so its current position is
/// the origin and rotated so its current heading points along `+x`. Edges
/// describe pairwise geometry at the current frame.
#[derive(Debug, Clone, PartialEq)]
pub struct SceneGraph {
    pub nodes: Vec<Vec<Point>>,
    /// Row-major `N × N` edge features.
    pub edges: Vec<[f64; EDGE_DIM]>,
    /// World-frame headings, radians.
    pub headings: Vec<f64>,
    /// World-frame current positions.
    pub origins: Vec<Point>,
    pub t_hist: usize,
    pub t_fut: usize,
}

impl SceneGraph {
    pub fn num_agents(&self) -> usize {
        self.nodes.len()
    }

    pub fn t_full(&self) -> usize {
        self.t_hist + self.t_fut
    }

    pub fn edge(&self, i: usize, j: usize) -> &[f64; EDGE_DIM] {
        &self.edges[i * self.num_agents() + j]
    }

    /// Node trajectory flattened frame-major as `[x_0, y_0, x_1, y_1, …]`.
    pub fn node_flat(&self, i: usize) -> Vec<f64> {
        self.nodes[i].iter().flatten().copied().collect()
    }

    pub fn to_world(&self, i: usize, p: Point) -> Point {
        let (s, c) = self.headings[i].sin_cos();
        let o = self.origins[i];
        [o[0] + c * p[0] - s * p[1], o[1] + s * p[0] + c * p[1]]
    }

    pub fn to_local(&self, i: usize, p: Point) -> Point {
        rotate(sub(p, self.origins[i]), -self.headings[i])
    }

    /// Rotates a world-frame direction (e.g. a gradient) into agent `i`'s frame.
    pub fn direction_to_local(&self, i: usize, v: Point) -> Point {
        rotate(v, -self.headings[i])
    }
}

/// Wraps an angle into `(-π, π]`.
pub fn wrap_angle(a: f64) -> f64 {
    let t = a.rem_euclid(2.0 * PI);
    if t > PI {
        t - 2.0 * PI
    } else {
        t
    }
}

/// Heading of agent `a` at the current frame.
///
/// Direction of the least-squares velocity fitted to the observed history
/// frames, current frame included. With one earlier observed frame this is
/// the chord to it. Zero (world `+x`) when nothing before the current frame
/// is observed or the fitted displacement per frame is below 1 µm.
pub fn heading_of(scene: &TrajectoryScene, a: usize) -> f64 {
    let agent = &scene.agents[a];
    let frames: Vec<usize> = (0..scene.t_hist).filter(|&j| agent.observed[j]).collect();
    if frames.len() < 2 {
        return 0.0;
    }
    let n = frames.len() as f64;
    let k_mean = frames.iter().sum::<usize>() as f64 / n;
    let mut p_mean = [0.0, 0.0];
    for &j in &frames {
        p_mean[0] += agent.positions[j][0] / n;
        p_mean[1] += agent.positions[j][1] / n;
    }
    let (mut v, mut spread) = ([0.0, 0.0], 0.0);
    for &j in &frames {
        let w = j as f64 - k_mean;
        v[0] += w * (agent.positions[j][0] - p_mean[0]);
        v[1] += w * (agent.positions[j][1] - p_mean[1]);
        spread += w * w;
    }
    let v = [v[0] / spread, v[1] / spread];
    if v[0].hypot(v[1]) < MIN_DISPLACEMENT {
        0.0
    } else {
        v[1].atan2(v[0])
    }
}

pub fn build_scene_graph(scene: &TrajectoryScene) -> SceneGraph {
    let n = scene.num_agents();
    let cur = scene.current_index();
    let headings: Vec<f64> = (0..n).map(|a| heading_of(scene, a)).collect();
    let origins: Vec<Point> = scene.agents.iter().map(|a| a.positions[cur]).collect();

    let nodes = scene
        .agents
        .iter()
        .zip(headings.iter().zip(&origins))
        .map(|(agent, (&h, &o))| agent.positions.iter().map(|&p| rotate(sub(p, o), -h)).collect())
        .collect();

    let mut edges = Vec::with_capacity(n * n);
    for i in 0..n {
        for j in 0..n {
            let dv = sub(origins[j], origins[i]);
            let d = dv[0].hypot(dv[1]);
            let r = if d < MIN_DISPLACEMENT {
                [1.0, 0.0]
            } else {
                rotate([dv[0] / d, dv[1] / d], -headings[i])
            };
            let theta = wrap_angle(headings[j] - headings[i]);
            edges.push([d, r[0], r[1], theta, theta.cos(), theta.sin()]);
        }
    }

    SceneGraph {
        nodes,
        edges,
        headings,
        origins,
        t_hist: scene.t_hist,
        t_fut: scene.t_fut,
    }
}

fn sub(a: Point, b: Point) -> Point {
    [a[0] - b[0], a[1] - b[1]]
}

fn rotate(p: Point, angle: f64) -> Point {
    let (s, c) = angle.sin_cos();
    [c * p[0] - s * p[1], s * p[0] + c * p[1]]
}
