//! Two-dimensional benchmark generators.

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::states::{Convention, DataPoint, Rescaler};
use crate::svm::LabeledSet;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DatasetKind {
    /// Disk inside a ring.
    Concentric,
    /// Two interleaved half-circle arcs.
    Moons,
    /// Four blobs labeled by the sign of `x1 * x2`.
    Xor,
}

impl DatasetKind {
    pub const ALL: [DatasetKind; 3] = [Self::Concentric, Self::Moons, Self::Xor];

    /// Point `k` of `count` in one class.
    fn sample(self, positive: bool, k: usize, count: usize, rng: &mut ChaCha8Rng) -> [f64; 2] {
        let jitter = Normal::new(0.0, self.jitter()).expect("positive width");
        let [x, y] = match self {
            Self::Concentric => {
                // stratified angles keep the ring from bunching on one side
                let theta = 2.0 * PI * (k as f64 + rng.random_range(0.0..1.0)) / count as f64;
                let r = if positive {
                    rng.random_range(0.0..0.5)
                } else {
                    rng.random_range(0.75..1.1)
                };
                [r * theta.cos(), r * theta.sin()]
            }
            Self::Moons => {
                let t = rng.random_range(0.0..PI);
                if positive {
                    [t.cos(), t.sin()]
                } else {
                    [1.0 - t.cos(), 0.5 - t.sin()]
                }
            }
            Self::Xor => {
                let sx: f64 = if rng.random_bool(0.5) { 1.0 } else { -1.0 };
                let sy = if positive { sx } else { -sx };
                [sx, sy]
            }
        };
        [x + jitter.sample(rng), y + jitter.sample(rng)]
    }

    fn jitter(self) -> f64 {
        match self {
            Self::Concentric => 0.1,
            Self::Moons => 0.15,
            Self::Xor => 0.4,
        }
    }
}

impl fmt::Display for DatasetKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Concentric => "concentric",
            Self::Moons => "moons",
            Self::Xor => "xor",
        })
    }
}

impl FromStr for DatasetKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "concentric" => Ok(Self::Concentric),
            "moons" => Ok(Self::Moons),
            "xor" => Ok(Self::Xor),
            other => Err(Error::invalid(format!(
                "unknown dataset '{other}' (expected concentric, moons or xor)"
            ))),
        }
    }
}

/// Train and test splits, rescaled together into one kernel convention.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub kind: DatasetKind,
    pub seed: u64,
    pub train: LabeledSet,
    pub test: LabeledSet,
    pub rescaler: Rescaler,
}

fn draw(kind: DatasetKind, size: usize, rng: &mut ChaCha8Rng) -> Vec<(Vec<f64>, i8)> {
    let positives = size.div_ceil(2);
    (0..size)
        .map(|i| {
            let positive = i < positives;
            let (k, count) = if positive { (i, positives) } else { (i - positives, size - positives) };
            (kind.sample(positive, k, count, rng).to_vec(), if positive { 1 } else { -1 })
        })
        .collect()
}

pub fn generate_dataset(
    kind: DatasetKind,
    seed: u64,
    train_size: usize,
    test_size: usize,
    convention: Convention,
) -> Result<Dataset> {
    if train_size < 2 || test_size < 2 {
        return Err(Error::invalid(format!(
            "train and test sizes must be >= 2 (got {train_size}, {test_size})"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let train_raw = draw(kind, train_size, &mut rng);
    let test_raw = draw(kind, test_size, &mut rng);
    let all: Vec<Vec<f64>> = train_raw.iter().chain(&test_raw).map(|(p, _)| p.clone()).collect();
    let rescaler = Rescaler::fit(&all, convention)?;
    let split = |raw: Vec<(Vec<f64>, i8)>| -> Result<LabeledSet> {
        let (points, labels): (Vec<_>, Vec<_>) = raw.into_iter().unzip();
        let points = points
            .iter()
            .map(|p| rescaler.apply(p))
            .collect::<Result<Vec<DataPoint>>>()?;
        LabeledSet::new(points, labels)
    };
    Ok(Dataset {
        kind,
        seed,
        train: split(train_raw)?,
        test: split(test_raw)?,
        rescaler,
    })
}

/// Best accuracy among `trials` random half-planes, each tried with both orientations.
pub fn best_linear_accuracy(set: &LabeledSet, trials: usize, seed: u64) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = set.len() as f64;
    let mut best: f64 = 0.0;
    for _ in 0..trials {
        let theta = rng.random_range(0.0..2.0 * PI);
        let (w1, w2) = (theta.cos(), theta.sin());
        let proj: Vec<f64> = set.points().iter().map(|p| w1 * p.coords[0] + w2 * p.coords[1]).collect();
        let (lo, hi) = proj.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &v| (a.min(v), b.max(v)));
        let b = rng.random_range(lo..=hi);
        let correct = proj
            .iter()
            .zip(set.labels())
            .filter(|(v, &y)| (**v - b) * f64::from(y) > 0.0)
            .count() as f64;
        best = best.max(correct / n).max(1.0 - correct / n);
    }
    best
}
