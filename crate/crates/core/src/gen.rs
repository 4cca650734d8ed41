//! Synthetic drifting streams.
//!
//! Two latent concepts are drawn per seed. In each concept every class is a
//! mixture of two isotropic unit-variance Gaussians whose means are uniform
//! in `[-5, 5]^d`. The stream moves from one concept to the other at each
//! drift point, either as a step (`sudden`) or by interpolating the
//! component means along a logistic ramp of width `n/10` (`incremental`).

use std::fmt;
use std::fmt::Write as _;
use std::fs;
use std::path::Path;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::data::{write_stream_csv, ClassLabel, Dataset, FeatureVector, LabeledInstance};
use crate::error::{Error, Result};
use crate::wrapper::DEFAULT_CHUNK_SIZE;

const COMPONENTS_PER_CLASS: usize = 2;
const MEAN_RANGE: f64 = 5.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum DriftKind {
    Sudden,
    Incremental,
}

impl DriftKind {
    pub fn tag(self) -> &'static str {
        match self {
            DriftKind::Sudden => "sudden",
            DriftKind::Incremental => "incremental",
        }
    }
}

impl fmt::Display for DriftKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.tag())
    }
}

impl FromStr for DriftKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "sudden" => Ok(DriftKind::Sudden),
            "incremental" => Ok(DriftKind::Incremental),
            other => Err(Error::Config(format!("unknown drift kind {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StreamConfig {
    pub n: usize,
    pub dim: usize,
    pub classes: usize,
    pub kind: DriftKind,
    pub n_drifts: usize,
    /// Probability of replacing a label with a different random label.
    pub noise: f64,
    /// Majority:minority prior ratio is `(r + 1) : 1`.
    pub imbalance_ratio: f64,
    pub seed: u64,
}

impl Default for StreamConfig {
    fn default() -> Self {
        StreamConfig {
            n: 30_000,
            dim: 8,
            classes: 2,
            kind: DriftKind::Sudden,
            n_drifts: 1,
            noise: 0.0,
            imbalance_ratio: 0.0,
            seed: 0,
        }
    }
}

impl StreamConfig {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..0.5).contains(&self.noise) {
            return Err(Error::Config(format!("noise {} outside [0, 0.5)", self.noise)));
        }
        if self.n < 2 * DEFAULT_CHUNK_SIZE {
            return Err(Error::Config(format!(
                "stream length {} below {}",
                self.n,
                2 * DEFAULT_CHUNK_SIZE
            )));
        }
        if self.dim == 0 {
            return Err(Error::Config("dimensionality must be positive".into()));
        }
        if self.classes < 2 {
            return Err(Error::Config("at least two classes are required".into()));
        }
        if !(self.imbalance_ratio >= 0.0 && self.imbalance_ratio.is_finite()) {
            return Err(Error::Config(format!(
                "imbalance ratio {} must be finite and non-negative",
                self.imbalance_ratio
            )));
        }
        Ok(())
    }

    /// Position of the `k`-th drift (1-based), evenly spaced.
    pub fn drift_point(&self, k: usize) -> f64 {
        self.n as f64 * k as f64 / (self.n_drifts + 1) as f64
    }

    pub fn class_priors(&self) -> Vec<f64> {
        let mut w = vec![1.0; self.classes];
        w[0] = self.imbalance_ratio + 1.0;
        let total: f64 = w.iter().sum();
        w.iter().map(|v| v / total).collect()
    }

    /// Weight of the second concept at position `t`.
    pub fn blend(&self, t: usize) -> f64 {
        let t = t as f64;
        let phase: f64 = (1..=self.n_drifts)
            .map(|k| {
                let p = self.drift_point(k);
                match self.kind {
                    DriftKind::Sudden => f64::from(u8::from(t >= p)),
                    DriftKind::Incremental => {
                        // 1%..99% of the ramp spans n/10 positions
                        let scale = self.n as f64 / (20.0 * 99f64.ln());
                        1.0 / (1.0 + (-(t - p) / scale).exp())
                    }
                }
            })
            .sum();
        // concepts alternate: 0 -> 1 -> 0 -> ...
        1.0 - ((phase % 2.0) - 1.0).abs()
    }

    /// Sidecar metadata as `key=value` lines.
    pub fn metadata(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "n={}", self.n);
        let _ = writeln!(s, "dim={}", self.dim);
        let _ = writeln!(s, "classes={}", self.classes);
        let _ = writeln!(s, "kind={}", self.kind);
        let _ = writeln!(s, "drifts={}", self.n_drifts);
        let _ = writeln!(s, "noise={}", self.noise);
        let _ = writeln!(s, "imbalance={}", self.imbalance_ratio);
        let _ = writeln!(s, "seed={}", self.seed);
        s
    }
}

struct Concept {
    /// `means[class][component]`
    means: Vec<Vec<Vec<f64>>>,
}

impl Concept {
    fn draw(rng: &mut ChaCha8Rng, classes: usize, dim: usize) -> Self {
        let means = (0..classes)
            .map(|_| {
                (0..COMPONENTS_PER_CLASS)
                    .map(|_| {
                        (0..dim)
                            .map(|_| rng.random_range(-MEAN_RANGE..=MEAN_RANGE))
                            .collect()
                    })
                    .collect()
            })
            .collect();
        Concept { means }
    }
}

/// Generated stream plus, per instance, whether its label was flipped.
pub struct GeneratedStream {
    pub data: Dataset,
    pub flipped: Vec<bool>,
}

pub fn generate(cfg: &StreamConfig) -> Result<Dataset> {
    Ok(generate_traced(cfg)?.data)
}

pub fn generate_traced(cfg: &StreamConfig) -> Result<GeneratedStream> {
    cfg.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let from = Concept::draw(&mut rng, cfg.classes, cfg.dim);
    let to = Concept::draw(&mut rng, cfg.classes, cfg.dim);
    let priors = cfg.class_priors();

    let mut data = Dataset::new(cfg.dim, cfg.classes);
    data.instances.reserve(cfg.n);
    let mut flipped = Vec::with_capacity(cfg.n);
    for t in 0..cfg.n {
        let w = cfg.blend(t);
        let u: f64 = rng.random();
        let mut class = cfg.classes - 1;
        let mut acc = 0.0;
        for (c, p) in priors.iter().enumerate() {
            acc += p;
            if u < acc {
                class = c;
                break;
            }
        }
        let comp = rng.random_range(0..COMPONENTS_PER_CLASS);
        let x: Vec<f64> = from.means[class][comp]
            .iter()
            .zip(&to.means[class][comp])
            .map(|(a, b)| {
                let z: f64 = rng.sample(StandardNormal);
                (1.0 - w) * a + w * b + z
            })
            .collect();
        let flip = rng.random::<f64>() < cfg.noise;
        let label = if flip {
            let other = rng.random_range(0..cfg.classes - 1);
            if other >= class {
                other + 1
            } else {
                other
            }
        } else {
            class
        };
        flipped.push(flip);
        data.instances.push(LabeledInstance {
            x: FeatureVector::new(x)?,
            label: ClassLabel::from_index(label),
            t: t as u64,
        });
    }
    Ok(GeneratedStream { data, flipped })
}

/// Writes the stream CSV and its `.meta` sidecar next to it.
pub fn write_stream(path: &Path, cfg: &StreamConfig, data: &Dataset) -> Result<()> {
    write_stream_csv(path, data)?;
    let meta = path.with_extension("meta");
    fs::write(&meta, cfg.metadata()).map_err(|e| Error::io(meta, e))
}

#[cfg(test)]
pub(crate) mod test_support {
    use super::*;

    /// Two interleaved 2-D Gaussian clouds centred at `(∓sep/2, 0)`.
    pub fn two_blobs(per_class: usize, sep: f64, seed: u64) -> Dataset {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut ds = Dataset::new(2, 2);
        for i in 0..per_class {
            for c in 0..2 {
                let cx = if c == 0 { -sep / 2.0 } else { sep / 2.0 };
                let x = vec![
                    cx + rng.sample::<f64, _>(StandardNormal),
                    rng.sample::<f64, _>(StandardNormal),
                ];
                ds.instances.push(LabeledInstance {
                    x: FeatureVector::new(x).unwrap(),
                    label: ClassLabel::from_index(c),
                    t: (2 * i + c) as u64,
                });
            }
        }
        ds
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::base::{BaseClassifier, BaseKind};

    fn binomial_within_3_sigma(count: usize, n: usize, p: f64) -> bool {
        let sd = (n as f64 * p * (1.0 - p)).sqrt();
        (count as f64 - n as f64 * p).abs() <= 3.0 * sd
    }

    #[test]
    fn balanced_class_counts() {
        let cfg = StreamConfig {
            n: 1000,
            seed: 5,
            ..StreamConfig::default()
        };
        let ds = generate(&cfg).unwrap();
        assert_eq!(ds.len(), 1000);
        assert!(ds.iter().all(|i| i.x.dim() == 8));
        let counts = ds.class_counts();
        assert!(binomial_within_3_sigma(counts[0], 1000, 0.5), "{counts:?}");
    }

    #[test]
    fn imbalance_ratio_sets_majority_share() {
        let cfg = StreamConfig {
            n: 1000,
            imbalance_ratio: 4.0,
            seed: 6,
            ..StreamConfig::default()
        };
        let counts = generate(&cfg).unwrap().class_counts();
        assert!(binomial_within_3_sigma(counts[0], 1000, 5.0 / 6.0), "{counts:?}");
    }

    #[test]
    fn label_noise_rate() {
        for noise in [0.1, 0.2] {
            let cfg = StreamConfig {
                n: 5000,
                noise,
                seed: 17,
                ..StreamConfig::default()
            };
            let g = generate_traced(&cfg).unwrap();
            let flips = g.flipped.iter().filter(|f| **f).count();
            assert!(binomial_within_3_sigma(flips, 5000, noise), "{flips}");
        }
    }

    #[test]
    fn deterministic_per_seed() {
        let cfg = StreamConfig {
            n: 500,
            kind: DriftKind::Incremental,
            seed: 9,
            ..StreamConfig::default()
        };
        assert_eq!(generate(&cfg).unwrap(), generate(&cfg).unwrap());
        let other = StreamConfig { seed: 10, ..cfg.clone() };
        assert_ne!(generate(&cfg).unwrap(), generate(&other).unwrap());
    }

    #[test]
    fn invalid_configs_are_rejected() {
        let bad = StreamConfig {
            noise: 0.7,
            ..StreamConfig::default()
        };
        assert!(matches!(generate(&bad), Err(Error::Config(_))));
        let short = StreamConfig {
            n: 100,
            ..StreamConfig::default()
        };
        assert!(generate(&short).is_err());
    }

    #[test]
    fn blend_shapes() {
        let sudden = StreamConfig {
            n: 1000,
            ..StreamConfig::default()
        };
        assert_eq!(sudden.blend(499), 0.0);
        assert_eq!(sudden.blend(500), 1.0);
        let inc = StreamConfig {
            kind: DriftKind::Incremental,
            ..sudden.clone()
        };
        assert!((inc.blend(500) - 0.5).abs() < 1e-12);
        assert!(inc.blend(450) > 0.01 && inc.blend(450) < 0.5);
        assert!(inc.blend(300) < 1e-3 && inc.blend(700) > 0.999);
        let two = StreamConfig {
            n_drifts: 2,
            ..sudden
        };
        assert_eq!(two.blend(400), 1.0);
        assert_eq!(two.blend(700), 0.0);
    }

    fn accuracy(train: &[LabeledInstance], test: &[LabeledInstance]) -> f64 {
        let ds = Dataset::from_instances(train.to_vec(), 8, 2).unwrap();
        let m = BaseKind::NaiveBayes.fit(&ds).unwrap();
        let ok = test
            .iter()
            .filter(|i| m.predict(&i.x).unwrap() == i.label)
            .count();
        ok as f64 / test.len() as f64
    }

    #[test]
    fn sudden_drift_is_real() {
        let cfg = StreamConfig {
            n: 4000,
            seed: 42,
            ..StreamConfig::default()
        };
        let ds = generate(&cfg).unwrap();
        let q = cfg.n / 4;
        let first = &ds.instances[..q];
        let second = &ds.instances[q..2 * q];
        let last = &ds.instances[3 * q..];
        let same = accuracy(first, second);
        let across = accuracy(first, last);
        assert!(same > 0.8, "same-concept accuracy {same}");
        assert!((0.25..=0.75).contains(&across), "cross-concept accuracy {across}");
    }
}
