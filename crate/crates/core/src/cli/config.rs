//! Experiment configuration: flat `key = value` lines, `#` comments, list
//! values given by repeating the key.

use std::path::PathBuf;
use std::str::FromStr;

use crate::base::BaseKind;
use crate::error::{Error, Result};
use crate::eval::{DEFAULT_ALPHA, DEFAULT_EVAL_CHUNK};
use crate::gen::{DriftKind, StreamConfig};
use crate::wrapper::{Strategy, DEFAULT_CHUNK_SIZE};

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub streams: Vec<StreamConfig>,
    pub strategies: Vec<Strategy>,
    pub bases: Vec<BaseKind>,
    /// Evaluation chunk size.
    pub chunk: usize,
    /// Desired size of the initial training chunk.
    pub initial_chunk: usize,
    pub delta: f64,
    pub alpha: f64,
    pub out: Option<PathBuf>,
    pub jobs: Option<usize>,
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        if self.streams.is_empty() || self.strategies.is_empty() || self.bases.is_empty() {
            return Err(Error::Config(
                "streams, strategies and base classifiers must be non-empty".into(),
            ));
        }
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(Error::Config(format!("alpha {} outside (0,1)", self.alpha)));
        }
        if !(self.delta > 0.0 && self.delta < 1.0) {
            return Err(Error::Config(format!("delta {} outside (0,1)", self.delta)));
        }
        if self.chunk == 0 || self.initial_chunk == 0 {
            return Err(Error::Config("chunk sizes must be positive".into()));
        }
        if self.jobs == Some(0) {
            return Err(Error::Config("jobs must be positive".into()));
        }
        for s in &self.streams {
            s.validate()?;
        }
        Ok(())
    }

    /// Replaces every stream seed with `seed`, dropping resulting duplicates.
    pub fn override_seed(&mut self, seed: u64) {
        for s in &mut self.streams {
            s.seed = seed;
        }
        let mut seen = Vec::new();
        self.streams.retain(|s| {
            let key = stream_name(s);
            if seen.contains(&key) {
                false
            } else {
                seen.push(key);
                true
            }
        });
    }
}

/// File stem of a generated stream.
pub fn stream_name(s: &StreamConfig) -> String {
    format!(
        "stream_{}_{}_{}_{}",
        s.kind, s.noise, s.imbalance_ratio, s.seed
    )
}

fn parse_value<T: FromStr>(line: usize, key: &str, value: &str) -> Result<T> {
    value
        .parse()
        .map_err(|_| Error::Config(format!("line {line}: invalid value {value:?} for {key}")))
}

pub fn parse_config(text: &str) -> Result<ExperimentConfig> {
    let base = StreamConfig::default();
    let (mut n, mut dim, mut classes, mut drifts) = (base.n, base.dim, base.classes, base.n_drifts);
    let mut kinds = Vec::new();
    let mut noises = Vec::new();
    let mut imbalances = Vec::new();
    let mut seeds = Vec::new();
    let mut explicit = Vec::new();
    let mut strategies = Vec::new();
    let mut bases = Vec::new();
    let mut chunk = DEFAULT_EVAL_CHUNK;
    let mut initial_chunk = DEFAULT_CHUNK_SIZE;
    let mut delta = crate::adwin::DEFAULT_DELTA;
    let mut alpha = DEFAULT_ALPHA;
    let mut out = None;
    let mut jobs = None;

    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let content = raw.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        let (key, value) = content
            .split_once('=')
            .ok_or_else(|| Error::Config(format!("line {line}: expected key = value")))?;
        let (key, value) = (key.trim(), value.trim());
        match key {
            "n" => n = parse_value(line, key, value)?,
            "dim" => dim = parse_value(line, key, value)?,
            "classes" => classes = parse_value(line, key, value)?,
            "drifts" => drifts = parse_value(line, key, value)?,
            "kind" => kinds.push(value.parse::<DriftKind>()?),
            "noise" => noises.push(parse_value::<f64>(line, key, value)?),
            "imbalance" => imbalances.push(parse_value::<f64>(line, key, value)?),
            "seed" => seeds.push(parse_value::<u64>(line, key, value)?),
            "stream" => {
                let parts: Vec<&str> = value.split(',').map(str::trim).collect();
                if parts.len() != 4 {
                    return Err(Error::Config(format!(
                        "line {line}: stream expects kind,noise,imbalance,seed"
                    )));
                }
                explicit.push((
                    parts[0].parse::<DriftKind>()?,
                    parse_value::<f64>(line, key, parts[1])?,
                    parse_value::<f64>(line, key, parts[2])?,
                    parse_value::<u64>(line, key, parts[3])?,
                ));
            }
            "strategy" => strategies.push(value.parse::<Strategy>()?),
            "base" => bases.push(value.parse::<BaseKind>()?),
            "chunk" => chunk = parse_value(line, key, value)?,
            "initial_chunk" => initial_chunk = parse_value(line, key, value)?,
            "delta" => delta = parse_value(line, key, value)?,
            "alpha" => alpha = parse_value(line, key, value)?,
            "out" => out = Some(PathBuf::from(value)),
            "jobs" => jobs = Some(parse_value(line, key, value)?),
            other => {
                return Err(Error::Config(format!("line {line}: unknown key {other:?}")));
            }
        }
    }

    let make = |kind, noise, imbalance_ratio, seed| StreamConfig {
        n,
        dim,
        classes,
        kind,
        n_drifts: drifts,
        noise,
        imbalance_ratio,
        seed,
    };
    let streams = if explicit.is_empty() {
        if kinds.is_empty() {
            kinds = vec![DriftKind::Sudden, DriftKind::Incremental];
        }
        if noises.is_empty() {
            noises = vec![0.0, 0.1, 0.2];
        }
        if imbalances.is_empty() {
            imbalances = vec![0.0, 2.0, 4.0];
        }
        if seeds.is_empty() {
            seeds = vec![1];
        }
        let mut v = Vec::new();
        for &k in &kinds {
            for &nz in &noises {
                for &im in &imbalances {
                    for &s in &seeds {
                        v.push(make(k, nz, im, s));
                    }
                }
            }
        }
        v
    } else {
        explicit
            .into_iter()
            .map(|(k, nz, im, s)| make(k, nz, im, s))
            .collect()
    };
    if strategies.is_empty() {
        strategies = Strategy::ALL.to_vec();
    }
    if bases.is_empty() {
        bases = BaseKind::ALL.to_vec();
    }
    let cfg = ExperimentConfig {
        streams,
        strategies,
        bases,
        chunk,
        initial_chunk,
        delta,
        alpha,
        out,
        jobs,
    };
    cfg.validate()?;
    Ok(cfg)
}
