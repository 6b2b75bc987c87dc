//! Scalar distributions used by the generative model and the noise sources
//! that feed them.
//!
//! Three noise sources exist: [`RngNoise`] draws sequentially from a caller
//! rng (planners), [`CrnNoise`] derives every draw from
//! `(seed, stream, site, step)` so that competing policies see identical
//! world noise, [`ScenarioNoise`] does the same more cheaply for
//! determinized search, and [`MeanNoise`] replaces every draw with its mean
//! (certainty-equivalent model).

use rand::rngs::SmallRng;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Dist {
    Constant(f64),
    Normal { mean: f64, std: f64 },
    Uniform { low: f64, high: f64 },
    Discrete { values: Vec<f64>, probs: Vec<f64> },
}

impl std::fmt::Display for Dist {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Dist::Constant(c) => write!(f, "{c}"),
            Dist::Normal { mean, std } => write!(f, "N({mean}, {std})"),
            Dist::Uniform { low, high } => write!(f, "U({low}, {high})"),
            Dist::Discrete { values, probs } => {
                let parts: Vec<String> = values.iter().zip(probs).map(|(v, p)| format!("{v}:{p}")).collect();
                write!(f, "{{{}}}", parts.join(", "))
            }
        }
    }
}

impl Dist {
    pub fn normal(mean: f64, std: f64) -> Self {
        Dist::Normal { mean, std }
    }

    pub fn uniform(low: f64, high: f64) -> Self {
        Dist::Uniform { low, high }
    }

    pub fn mean(&self) -> f64 {
        match self {
            Dist::Constant(c) => *c,
            Dist::Normal { mean, .. } => *mean,
            Dist::Uniform { low, high } => 0.5 * (low + high),
            Dist::Discrete { values, probs } => values.iter().zip(probs).map(|(v, p)| v * p).sum(),
        }
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match self {
            Dist::Constant(c) => *c,
            Dist::Normal { mean, std } => {
                let z: f64 = rng.sample(StandardNormal);
                mean + std * z
            }
            Dist::Uniform { low, high } => low + (high - low) * rng.random::<f64>(),
            Dist::Discrete { values, probs } => {
                let u: f64 = rng.random();
                let mut acc = 0.0;
                for (v, p) in values.iter().zip(probs) {
                    acc += p;
                    if u < acc {
                        return *v;
                    }
                }
                *values.last().unwrap_or(&0.0)
            }
        }
    }

    /// Finite support with probabilities, when the distribution has one.
    pub fn support(&self) -> Option<Vec<(f64, f64)>> {
        match self {
            Dist::Constant(c) => Some(vec![(*c, 1.0)]),
            Dist::Discrete { values, probs } => Some(
                values
                    .iter()
                    .zip(probs)
                    .filter(|(_, p)| **p > 0.0)
                    .map(|(v, p)| (*v, *p))
                    .collect(),
            ),
            Dist::Uniform { low, high } if low == high => Some(vec![(*low, 1.0)]),
            Dist::Normal { mean, std } if *std == 0.0 => Some(vec![(*mean, 1.0)]),
            _ => None,
        }
    }

    /// Problems with the distribution's parameters, if any.
    pub fn check(&self) -> Option<String> {
        match self {
            Dist::Constant(c) if !c.is_finite() => Some("constant must be finite".into()),
            Dist::Normal { mean, std } => {
                if !mean.is_finite() || !std.is_finite() {
                    Some("mean and std must be finite".into())
                } else if *std <= 0.0 {
                    Some(format!("std must be > 0, got {std}"))
                } else {
                    None
                }
            }
            Dist::Uniform { low, high } => {
                if !(low.is_finite() && high.is_finite()) || low > high {
                    Some(format!("uniform bounds must satisfy low <= high, got [{low}, {high}]"))
                } else {
                    None
                }
            }
            Dist::Discrete { values, probs } => {
                if values.is_empty() || values.len() != probs.len() {
                    Some("discrete values and probs must be non-empty and equal length".into())
                } else if probs.iter().any(|p| !(*p >= 0.0)) {
                    Some("discrete probs must be non-negative".into())
                } else if (probs.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
                    Some("discrete probs must sum to 1".into())
                } else {
                    None
                }
            }
            _ => None,
        }
    }
}

/// Independent noise streams of the world model.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Stream {
    Demand,
    Yield,
    Loss,
    Observation,
}

impl Stream {
    fn tag(self) -> u64 {
        match self {
            Stream::Demand => 0x64656d,
            Stream::Yield => 0x79696c,
            Stream::Loss => 0x6c6f73,
            Stream::Observation => 0x6f6273,
        }
    }
}

pub trait Noise {
    fn draw(&mut self, dist: &Dist, stream: Stream, site: usize, t: u32) -> f64;
}

/// Sequential draws from a borrowed rng.
pub struct RngNoise<'a, R: ?Sized>(pub &'a mut R);

impl<R: Rng + ?Sized> Noise for RngNoise<'_, R> {
    fn draw(&mut self, dist: &Dist, _stream: Stream, _site: usize, _t: u32) -> f64 {
        dist.sample(self.0)
    }
}

/// Common-random-numbers world noise keyed by `(seed, stream, site, t)`.
#[derive(Clone, Copy, Debug)]
pub struct CrnNoise {
    pub seed: u64,
}

impl CrnNoise {
    pub fn new(seed: u64) -> Self {
        CrnNoise { seed }
    }
}

impl Noise for CrnNoise {
    fn draw(&mut self, dist: &Dist, stream: Stream, site: usize, t: u32) -> f64 {
        let key = mix_seed(&[self.seed, stream.tag(), site as u64, t as u64]);
        let mut rng = ChaCha8Rng::seed_from_u64(key);
        dist.sample(&mut rng)
    }
}

/// Cheaper keyed noise for search: same keying as [`CrnNoise`] but a
/// small non-cryptographic generator per draw.
#[derive(Clone, Copy, Debug)]
pub struct ScenarioNoise {
    pub seed: u64,
}

impl Noise for ScenarioNoise {
    fn draw(&mut self, dist: &Dist, stream: Stream, site: usize, t: u32) -> f64 {
        let key = mix_seed(&[self.seed, stream.tag(), site as u64, t as u64]);
        let mut rng = SmallRng::seed_from_u64(key);
        dist.sample(&mut rng)
    }
}

/// Every draw replaced by the distribution mean.
#[derive(Clone, Copy, Debug, Default)]
pub struct MeanNoise;

impl Noise for MeanNoise {
    fn draw(&mut self, dist: &Dist, _stream: Stream, _site: usize, _t: u32) -> f64 {
        dist.mean()
    }
}

/// SplitMix64 finalizer.
pub fn splitmix(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9e37_79b9_7f4a_7c15);
    x = (x ^ (x >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    x ^ (x >> 31)
}

/// Order-sensitive hash of several words into one seed.
pub fn mix_seed(parts: &[u64]) -> u64 {
    parts
        .iter()
        .fold(0x243f_6a88_85a3_08d3u64, |acc, &p| splitmix(acc ^ splitmix(p)))
}
