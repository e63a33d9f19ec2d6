//! Run configuration: a flat `key = value` file with `[section]` headers.
//!
//! Keys are addressed as `section.key`. Every key has a default, so a run is
//! fully described by the resolved map, which is what the manifest records.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;
use std::str::FromStr;

/// Known keys with their defaults.
const SCHEMA: &[(&str, &str)] = &[
    ("data.source", "synth"),
    ("data.dir", ""),
    ("data.eval_dir", ""),
    ("data.split", "hotel"),
    ("data.stride", "1"),
    ("data.t_hist", "8"),
    ("data.t_fut", "12"),
    ("synth.train_scenes", "500"),
    ("synth.eval_scenes", "50"),
    ("synth.agents_min", "1"),
    ("synth.agents_max", "3"),
    ("synth.kinds", "constant_velocity,sine_turn,crossing_pair"),
    ("synth.speed_min", "0.3"),
    ("synth.speed_max", "0.6"),
    ("synth.noise", "0"),
    ("synth.arena", "10"),
    ("synth.seed", "0"),
    ("synth.eval_seed", "1"),
    ("model.k", "10"),
    ("model.hidden", "128"),
    ("model.layers", "3"),
    ("model.time_embed_dim", "32"),
    ("model.seed", "0"),
    ("schedule.steps", "100"),
    ("schedule.kind", "linear"),
    ("schedule.beta_start", "0.0001"),
    ("schedule.beta_end", "0.07"),
    ("schedule.gamma", "5"),
    ("train.batch", "32"),
    ("train.lr", "0.001"),
    ("train.epochs", "100"),
    ("train.seed", "0"),
    ("sample.k", "20"),
    ("sample.preset", "predict"),
    ("sample.lambda", "1"),
    ("sample.reconstruction_weight", "1"),
    ("sample.goal_weight", "1"),
    ("sample.repeller_weight", "0"),
    ("sample.repeller_radius", "0.4"),
    ("sample.sigma_ref", "0.05"),
    ("sample.repaint_resample", "3"),
    ("sample.full_chain", "true"),
    ("sample.noise_sigma", ""),
    ("sample.seed", "0"),
    ("perturb.kind", "none"),
    ("perturb.param", "0"),
    ("perturb.seed", "0"),
    ("eval.collision_threshold", "0.2"),
];

#[derive(Debug)]
pub struct ConfigError(pub String);

impl std::fmt::Display for ConfigError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for ConfigError {}

type Result<T> = std::result::Result<T, ConfigError>;

fn err<T>(msg: impl Into<String>) -> Result<T> {
    Err(ConfigError(msg.into()))
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    values: BTreeMap<String, String>,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            values: SCHEMA.iter().map(|(k, v)| (k.to_string(), v.to_string())).collect(),
        }
    }
}

impl RunConfig {
    pub fn parse(text: &str) -> Result<Self> {
        let mut cfg = Self::default();
        let mut section = String::new();
        for (no, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            if let Some(name) = line.strip_prefix('[') {
                let Some(name) = name.strip_suffix(']') else {
                    return err(format!("config line {}: unterminated section header", no + 1));
                };
                section = name.trim().to_string();
                continue;
            }
            let Some((key, value)) = line.split_once('=') else {
                return err(format!("config line {}: expected key = value", no + 1));
            };
            let key = key.trim();
            let full = if section.is_empty() || key.contains('.') {
                key.to_string()
            } else {
                format!("{section}.{key}")
            };
            cfg.set(&full, value.trim())
                .map_err(|e| ConfigError(format!("config line {}: {e}", no + 1)))?;
        }
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| ConfigError(format!("cannot read config {}: {e}", path.display())))?;
        Self::parse(&text)
    }

    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        match self.values.get_mut(key) {
            Some(slot) => {
                *slot = value.to_string();
                Ok(())
            }
            None => err(format!("unknown config key {key:?}")),
        }
    }

    /// Applies a `key=value` override.
    pub fn set_pair(&mut self, pair: &str) -> Result<()> {
        let Some((k, v)) = pair.split_once('=') else {
            return err(format!("override {pair:?} is not key=value"));
        };
        self.set(k.trim(), v.trim())
    }

    pub fn str(&self, key: &str) -> &str {
        self.values
            .get(key)
            .unwrap_or_else(|| panic!("config key {key} missing from schema"))
    }

    pub fn get<T: FromStr>(&self, key: &str) -> Result<T> {
        let v = self.str(key);
        v.parse()
            .map_err(|_| ConfigError(format!("invalid value {v:?} for {key}")))
    }

    pub fn bool(&self, key: &str) -> Result<bool> {
        match self.str(key) {
            "true" | "1" | "yes" => Ok(true),
            "false" | "0" | "no" => Ok(false),
            v => err(format!("invalid value {v:?} for {key}; expected true or false")),
        }
    }

    /// Resolved configuration in file syntax, grouped by section.
    pub fn render(&self) -> String {
        let mut out = String::new();
        let mut current = "";
        for (key, value) in &self.values {
            let (section, name) = key.split_once('.').expect("schema keys are sectioned");
            if section != current {
                if !current.is_empty() {
                    out.push('\n');
                }
                let _ = writeln!(out, "[{section}]");
                current = section;
            }
            let _ = writeln!(out, "{name} = {value}");
        }
        out
    }
}
