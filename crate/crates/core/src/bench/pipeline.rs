//! Gram matrices, test rows and decision grids, exact or with shot noise.

use nalgebra::DMatrix;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::kernels::KernelSpec;
use crate::optics::{sample_kernel, ShotNoiseConfig};
use crate::states::{DataPoint, UPPER_MARGIN};
use crate::svm::{decide, GramMatrix, TrainedModel};

/// Which matrix a sampled entry belongs to; part of its random-stream key.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StreamTag {
    Gram = 0,
    Test = 1,
    Grid = 2,
}

/// Stream key `tag << 56 | i << 28 | j`.
pub fn stream_key(tag: StreamTag, i: usize, j: usize) -> u64 {
    debug_assert!(i < 1 << 28 && j < 1 << 28);
    (tag as u64) << 56 | (i as u64) << 28 | j as u64
}

/// Kernel plus optional shot noise.
#[derive(Debug, Clone, Copy)]
pub struct Measurement<'a> {
    pub kernel: &'a KernelSpec,
    pub noise: Option<&'a ShotNoiseConfig>,
}

impl Measurement<'_> {
    fn measure(&self, x: &DataPoint, xp: &DataPoint, tag: StreamTag, i: usize, j: usize) -> Result<f64> {
        let kappa = self.kernel.evaluate(x, xp)?;
        self.noisy(kappa, tag, i, j)
    }

    fn noisy(&self, kappa: f64, tag: StreamTag, i: usize, j: usize) -> Result<f64> {
        match self.noise {
            None => Ok(kappa),
            Some(cfg) => Ok(sample_kernel(kappa, cfg, stream_key(tag, i, j))?.0),
        }
    }
}

/// Order in which upper-triangle entries are evaluated.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum PairOrder {
    #[default]
    RowMajor,
    Reversed,
    Shuffled(u64),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct GramOptions {
    pub order: PairOrder,
    /// Pin the noisy diagonal to 1 instead of sampling it.
    pub pin_diagonal: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GramRun {
    pub gram: GramMatrix,
    /// Calls to the ideal kernel.
    pub evaluations: usize,
}

pub fn compute_gram(points: &[DataPoint], kernel: &KernelSpec, noise: Option<&ShotNoiseConfig>) -> Result<GramRun> {
    compute_gram_with(points, kernel, noise, &GramOptions::default())
}

/// Evaluates the `M(M-1)/2` upper-triangle pairs and mirrors them.
///
/// The exact diagonal is 1 by normalization. With noise it is sampled from `kappa = 1`
/// unless pinned, so it costs no kernel evaluation either way.
pub fn compute_gram_with(
    points: &[DataPoint],
    kernel: &KernelSpec,
    noise: Option<&ShotNoiseConfig>,
    options: &GramOptions,
) -> Result<GramRun> {
    let m = points.len();
    if m == 0 {
        return Err(Error::invalid("no points for Gram matrix"));
    }
    let meas = Measurement { kernel, noise };
    let mut pairs: Vec<(usize, usize)> = (0..m).flat_map(|i| (i + 1..m).map(move |j| (i, j))).collect();
    match options.order {
        PairOrder::RowMajor => {}
        PairOrder::Reversed => pairs.reverse(),
        PairOrder::Shuffled(seed) => pairs.shuffle(&mut ChaCha8Rng::seed_from_u64(seed)),
    }
    let mut values = DMatrix::identity(m, m);
    for &(i, j) in &pairs {
        let v = meas.measure(&points[i], &points[j], StreamTag::Gram, i, j)?;
        values[(i, j)] = v;
        values[(j, i)] = v;
    }
    let gram = match noise {
        None => GramMatrix::exact(values)?,
        Some(cfg) => {
            if !options.pin_diagonal {
                for i in 0..m {
                    values[(i, i)] = meas.noisy(1.0, StreamTag::Gram, i, i)?;
                }
            }
            GramMatrix::sampled(values, cfg.seed)?
        }
    };
    Ok(GramRun {
        gram,
        evaluations: pairs.len(),
    })
}

/// `rows[r][m] = k(queries[r], train[m])`, sampled under `tag` when noisy.
pub fn kernel_rows(
    queries: &[DataPoint],
    train: &[DataPoint],
    meas: Measurement<'_>,
    tag: StreamTag,
) -> Result<DMatrix<f64>> {
    let mut rows = DMatrix::zeros(queries.len(), train.len());
    for (r, q) in queries.iter().enumerate() {
        for (m, t) in train.iter().enumerate() {
            rows[(r, m)] = meas.measure(q, t, tag, r, m)?;
        }
    }
    Ok(rows)
}

/// Decision scores on a `side x side` lattice; `x1` varies fastest.
#[derive(Debug, Clone, PartialEq)]
pub struct BoundaryGrid {
    pub side: usize,
    pub lo: f64,
    pub hi: f64,
    pub scores: Vec<f64>,
}

impl BoundaryGrid {
    pub fn len(&self) -> usize {
        self.scores.len()
    }

    pub fn is_empty(&self) -> bool {
        self.scores.is_empty()
    }

    pub fn coordinate(&self, k: usize) -> f64 {
        self.lo + (self.hi - self.lo) * k as f64 / (self.side - 1) as f64
    }

    pub fn node(&self, ix: usize, iy: usize) -> (f64, f64) {
        (self.coordinate(ix), self.coordinate(iy))
    }

    pub fn score(&self, ix: usize, iy: usize) -> f64 {
        self.scores[iy * self.side + ix]
    }

    /// Bilinear interpolation, clamped to the grid's extent.
    pub fn interpolate(&self, x1: f64, x2: f64) -> f64 {
        let cell = |x: f64| {
            let mut t = ((x - self.lo) / (self.hi - self.lo)).clamp(0.0, 1.0) * (self.side - 1) as f64;
            // snap round-off so that nodes hit weights of exactly 0 or 1
            if (t - t.round()).abs() < 1e-9 {
                t = t.round();
            }
            let k = (t.floor() as usize).min(self.side - 2);
            (k, t - k as f64)
        };
        let ((ix, tx), (iy, ty)) = (cell(x1), cell(x2));
        let f00 = self.score(ix, iy);
        let f10 = self.score(ix + 1, iy);
        let f01 = self.score(ix, iy + 1);
        let f11 = self.score(ix + 1, iy + 1);
        (1.0 - ty) * ((1.0 - tx) * f00 + tx * f10) + ty * ((1.0 - tx) * f01 + tx * f11)
    }
}

/// Scores `f(x)` over the kernel convention's domain.
///
/// The upper edge sits just inside the half-open domain; the kernels are periodic, so it stands
/// in for the excluded endpoint.
pub fn boundary_grid(
    model: &TrainedModel,
    train: &[DataPoint],
    meas: Measurement<'_>,
    side: usize,
) -> Result<BoundaryGrid> {
    if side < 2 {
        return Err(Error::invalid(format!("grid side must be >= 2, got {side}")));
    }
    if meas.kernel.dim() != 2 {
        return Err(Error::invalid("decision grids are two-dimensional"));
    }
    let (lo, hi) = meas.kernel.convention().bounds();
    let hi = hi - UPPER_MARGIN * (hi - lo);
    let mut grid = BoundaryGrid {
        side,
        lo,
        hi,
        scores: Vec::with_capacity(side * side),
    };
    let nodes: Vec<DataPoint> = (0..side * side)
        .map(|k| {
            let (x1, x2) = grid.node(k % side, k / side);
            DataPoint::new(vec![x1, x2])
        })
        .collect();
    let rows = kernel_rows(&nodes, train, meas, StreamTag::Grid)?;
    for r in 0..nodes.len() {
        let row: Vec<f64> = rows.row(r).iter().copied().collect();
        grid.scores.push(decide(model, &row)?);
    }
    Ok(grid)
}
