//! Amplitude profiles and feature-map embeddings.
//!
//! Two encodings are supported:
//!
//! * interference states, `x -> sum_n sqrt(r_n) exp(2 pi i n x) |n>` for `x` in `[-1/2, 1/2)`,
//!   parameterized by an [`AmplitudeProfile`];
//! * binomial (cosine) states, `x -> sum_k sqrt(C(N, k)) sin^k(x) cos^(N-k)(x) |k>` per
//!   coordinate, for `x` in `[-pi/2, pi/2)`, tensored over the input dimensions.
//!
//! Profiles are stored as weights `r_n`, never as amplitudes, so sign conventions of the
//! underlying amplitudes never leak into kernels.

use std::f64::consts::{FRAC_PI_2, PI};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Tolerance on `sum r_n = 1`.
pub const NORMALIZATION_TOL: f64 = 1e-12;

/// Fraction of the domain width kept free below the upper bound by [`rescale_dataset`].
pub const UPPER_MARGIN: f64 = 1e-9;

/// Nonnegative weights `r_0..r_{L-1}` summing to one.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AmplitudeProfile {
    weights: Vec<f64>,
}

impl AmplitudeProfile {
    /// Validates an already-normalized weight vector.
    pub fn new(weights: Vec<f64>) -> Result<Self> {
        if weights.is_empty() {
            return Err(Error::invalid("profile needs at least one weight"));
        }
        if let Some(w) = weights.iter().find(|w| !w.is_finite() || **w < 0.0) {
            return Err(Error::invalid(format!("profile weight {w} is not a nonnegative number")));
        }
        let total: f64 = weights.iter().sum();
        if (total - 1.0).abs() > NORMALIZATION_TOL {
            return Err(Error::invalid(format!("profile weights sum to {total}, expected 1")));
        }
        Ok(Self { weights })
    }

    /// Rescales arbitrary nonnegative weights to unit sum.
    pub fn normalized(weights: Vec<f64>) -> Result<Self> {
        if let Some(w) = weights.iter().find(|w| !w.is_finite() || **w < 0.0) {
            return Err(Error::invalid(format!("profile weight {w} is not a nonnegative number")));
        }
        let total: f64 = weights.iter().sum();
        if !(total > 0.0) {
            return Err(Error::invalid("profile weights are all zero"));
        }
        Self::new(weights.into_iter().map(|w| w / total).collect())
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// Number of basis states `L`.
    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    /// `R = sum r_n^2`, the integral of the kernel over one period.
    pub fn purity(&self) -> f64 {
        self.weights.iter().map(|w| w * w).sum()
    }

    pub fn reversed(&self) -> Self {
        let mut weights = self.weights.clone();
        weights.reverse();
        Self { weights }
    }
}

/// Equal weights `1/N` over `N` basis states (multi-slit interference).
pub fn msi_profile(n: usize) -> Result<AmplitudeProfile> {
    if n < 2 {
        return Err(Error::invalid(format!("MSI profile needs N >= 2, got {n}")));
    }
    Ok(AmplitudeProfile {
        weights: vec![1.0 / n as f64; n],
    })
}

/// Truncated squeezed-vacuum weights over `len` basis states.
///
/// `r_n` is proportional to `(2n)! tanh^(2n)(zeta) / (4^n (n!)^2)`; the `1/cosh(zeta)` prefactor
/// and the truncation constant cancel under renormalization. The factorial ratio is accumulated
/// in log space through `r_{n+1}/r_n = (2n+1)/(2n+2) tanh^2(zeta)`.
pub fn tsq_profile(len: usize, zeta: f64) -> Result<AmplitudeProfile> {
    if len < 1 {
        return Err(Error::invalid("TSQ profile needs at least one basis state"));
    }
    if !zeta.is_finite() || zeta <= 0.0 {
        return Err(Error::invalid(format!("squeezing factor must be positive and finite, got {zeta}")));
    }
    let log_t2 = 2.0 * zeta.tanh().ln();
    let mut logs = Vec::with_capacity(len);
    let mut acc = 0.0;
    for n in 0..len {
        logs.push(acc);
        let k = n as f64;
        acc += ((2.0 * k + 1.0) / (2.0 * k + 2.0)).ln() + log_t2;
    }
    // logs[0] = 0 is the maximum since every step is negative.
    let weights: Vec<f64> = logs.iter().map(|l| l.exp()).collect();
    AmplitudeProfile::normalized(weights)
}

/// Input-domain convention of a data point.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Convention {
    /// Coordinates in `[-1/2, 1/2)`.
    Interference,
    /// Coordinates in `[-pi/2, pi/2)`.
    Cosine,
}

impl Convention {
    /// Half-open domain `[lo, hi)`.
    pub fn bounds(self) -> (f64, f64) {
        match self {
            Convention::Interference => (-0.5, 0.5),
            Convention::Cosine => (-FRAC_PI_2, FRAC_PI_2),
        }
    }

    pub fn contains(self, v: f64) -> bool {
        let (lo, hi) = self.bounds();
        v >= lo && v < hi
    }
}

/// A data point `x_1..x_D` with optional phase coordinates.
///
/// When present, `phases` has length `D` and `phases[0]` is the fixed reference `y_0 = 0`;
/// `phases[n]` is the phase carried by the `n`-th factor of the phase-augmented map.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DataPoint {
    pub coords: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub phases: Option<Vec<f64>>,
}

impl DataPoint {
    pub fn new(coords: Vec<f64>) -> Self {
        Self { coords, phases: None }
    }

    pub fn with_phases(coords: Vec<f64>, phases: Vec<f64>) -> Self {
        Self {
            coords,
            phases: Some(phases),
        }
    }

    pub fn dim(&self) -> usize {
        self.coords.len()
    }

    pub fn check_convention(&self, convention: Convention) -> Result<()> {
        match self.coords.iter().find(|v| !convention.contains(**v)) {
            Some(v) => {
                let (lo, hi) = convention.bounds();
                Err(Error::domain(format!("coordinate {v} outside [{lo}, {hi})")))
            }
            None => Ok(()),
        }
    }
}

/// Unit-norm complex amplitude vector.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureState {
    amplitudes: Vec<Complex64>,
}

impl FeatureState {
    /// Wraps amplitudes, checking the norm to [`NORMALIZATION_TOL`] scaled by the dimension.
    pub fn new(amplitudes: Vec<Complex64>) -> Result<Self> {
        if amplitudes.is_empty() {
            return Err(Error::invalid("feature state must have positive dimension"));
        }
        let norm: f64 = amplitudes.iter().map(|a| a.norm_sqr()).sum();
        if (norm - 1.0).abs() > NORMALIZATION_TOL * (amplitudes.len() as f64).max(1.0) {
            return Err(Error::invalid(format!("feature state has squared norm {norm}")));
        }
        Ok(Self { amplitudes })
    }

    pub fn amplitudes(&self) -> &[Complex64] {
        &self.amplitudes
    }

    pub fn dim(&self) -> usize {
        self.amplitudes.len()
    }

    pub fn norm_sqr(&self) -> f64 {
        self.amplitudes.iter().map(|a| a.norm_sqr()).sum()
    }

    /// `<self|other>`.
    pub fn inner(&self, other: &FeatureState) -> Result<Complex64> {
        if self.dim() != other.dim() {
            return Err(Error::invalid(format!(
                "state dimensions differ: {} vs {}",
                self.dim(),
                other.dim()
            )));
        }
        Ok(self
            .amplitudes
            .iter()
            .zip(&other.amplitudes)
            .map(|(a, b)| a.conj() * b)
            .sum())
    }

    /// Kronecker product, `self` as the most significant factor.
    pub fn tensor(&self, other: &FeatureState) -> FeatureState {
        FeatureState {
            amplitudes: kron(&self.amplitudes, &other.amplitudes),
        }
    }
}

pub(crate) fn kron(a: &[Complex64], b: &[Complex64]) -> Vec<Complex64> {
    a.iter().flat_map(|x| b.iter().map(move |y| x * y)).collect()
}

/// Raw interference amplitudes `sqrt(r_n) exp(2 pi i n x)` without any domain check.
pub fn interference_amplitudes(x: f64, profile: &AmplitudeProfile) -> Vec<Complex64> {
    profile
        .weights()
        .iter()
        .enumerate()
        .map(|(n, r)| Complex64::from_polar(r.sqrt(), 2.0 * PI * n as f64 * x))
        .collect()
}

pub fn embed_interference(x: f64, profile: &AmplitudeProfile) -> Result<FeatureState> {
    if !Convention::Interference.contains(x) {
        return Err(Error::domain(format!(
            "x = {x} outside [-1/2, 1/2); rescale the data first"
        )));
    }
    FeatureState::new(interference_amplitudes(x, profile))
}

/// `sqrt(C(n, k))` for `k = 0..=n`.
pub(crate) fn sqrt_binomials(n: u32) -> Vec<f64> {
    let mut out = Vec::with_capacity(n as usize + 1);
    let mut c = 1.0_f64;
    for k in 0..=n {
        out.push(c.sqrt());
        c = c * f64::from(n - k) / f64::from(k + 1);
    }
    out
}

/// Binomial amplitudes of one coordinate.
pub(crate) fn binomial_factor(x: f64, n: u32) -> Vec<Complex64> {
    let (s, c) = (x.sin(), x.cos());
    sqrt_binomials(n)
        .into_iter()
        .enumerate()
        .map(|(k, b)| {
            let k = k as i32;
            Complex64::new(b * s.powi(k) * c.powi(n as i32 - k), 0.0)
        })
        .collect()
}

fn check_cosine_point(x: &DataPoint) -> Result<()> {
    if x.coords.is_empty() {
        return Err(Error::invalid("data point has no coordinates"));
    }
    x.check_convention(Convention::Cosine)
}

/// Binomial feature map tensored over all coordinates; dimension `(N+1)^D`.
pub fn embed_cosine(x: &DataPoint, n: u32) -> Result<FeatureState> {
    if n == 0 {
        return Err(Error::invalid("cosine feature map needs N >= 1"));
    }
    check_cosine_point(x)?;
    let amplitudes = x
        .coords
        .iter()
        .map(|&v| binomial_factor(v, n))
        .reduce(|acc, f| kron(&acc, &f))
        .expect("nonempty");
    FeatureState::new(amplitudes)
}

/// Phase-augmented binomial feature map.
///
/// A phase `e^{2 i y}` on a whole tensor factor is a global phase and cannot be seen by an
/// overlap. Physically the phase is read out by interfering the phase-shifted photon with an
/// unshifted reference on a diagonal-basis splitter, so each factor `n >= 1` is paired with a
/// two-mode reference `(|0> + e^{2 i y_n}|1>)/sqrt(2)`. Factor 0 carries `y_0 = 0` and needs none.
/// With all phases zero every reference mode is `|+>` and all overlaps equal those of
/// [`embed_cosine`].
pub fn embed_phase_augmented(x: &DataPoint, n: u32) -> Result<FeatureState> {
    let phases = checked_phases(x)?;
    let base = embed_cosine(x, n)?;
    let reference = phases[1..]
        .iter()
        .map(|&y| phase_reference(y))
        .reduce(|acc, f| kron(&acc, &f));
    let amplitudes = match reference {
        Some(r) => kron(base.amplitudes(), &r),
        None => base.amplitudes,
    };
    FeatureState::new(amplitudes)
}

fn phase_reference(y: f64) -> Vec<Complex64> {
    let h = std::f64::consts::FRAC_1_SQRT_2;
    vec![Complex64::new(h, 0.0), Complex64::from_polar(h, 2.0 * y)]
}

pub(crate) fn checked_phases(x: &DataPoint) -> Result<&[f64]> {
    let phases = x
        .phases
        .as_deref()
        .ok_or_else(|| Error::invalid("phase-augmented map needs phase coordinates"))?;
    if phases.len() != x.dim() {
        return Err(Error::invalid(format!(
            "expected {} phases (y_0 included), got {}",
            x.dim(),
            phases.len()
        )));
    }
    if phases[0] != 0.0 {
        return Err(Error::invalid(format!("reference phase y_0 must be 0, got {}", phases[0])));
    }
    if let Some(y) = phases.iter().find(|y| !y.is_finite()) {
        return Err(Error::invalid(format!("phase {y} is not finite")));
    }
    Ok(phases)
}

/// Per-coordinate affine map from raw data into a convention's domain.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Rescaler {
    pub convention: Convention,
    pub mins: Vec<f64>,
    pub maxs: Vec<f64>,
}

impl Rescaler {
    pub fn fit(points: &[Vec<f64>], convention: Convention) -> Result<Self> {
        let first = points
            .first()
            .ok_or_else(|| Error::DegenerateInput("no points to rescale".into()))?;
        let dim = first.len();
        if dim == 0 {
            return Err(Error::DegenerateInput("points have no coordinates".into()));
        }
        let mut mins = vec![f64::INFINITY; dim];
        let mut maxs = vec![f64::NEG_INFINITY; dim];
        for p in points {
            if p.len() != dim {
                return Err(Error::invalid(format!(
                    "ragged data: expected {dim} coordinates, got {}",
                    p.len()
                )));
            }
            for (i, &v) in p.iter().enumerate() {
                if !v.is_finite() {
                    return Err(Error::invalid(format!("non-finite coordinate {v}")));
                }
                mins[i] = mins[i].min(v);
                maxs[i] = maxs[i].max(v);
            }
        }
        if let Some(i) = (0..dim).find(|&i| !(maxs[i] > mins[i])) {
            return Err(Error::DegenerateInput(format!(
                "coordinate {i} is constant ({})",
                mins[i]
            )));
        }
        Ok(Self {
            convention,
            mins,
            maxs,
        })
    }

    /// Maps one raw point; values beyond the fitted range are clamped into the domain.
    pub fn apply(&self, raw: &[f64]) -> Result<DataPoint> {
        if raw.len() != self.mins.len() {
            return Err(Error::invalid(format!(
                "expected {} coordinates, got {}",
                self.mins.len(),
                raw.len()
            )));
        }
        let (lo, hi) = self.convention.bounds();
        let width = hi - lo;
        let top = hi - UPPER_MARGIN * width;
        let coords = raw
            .iter()
            .zip(self.mins.iter().zip(&self.maxs))
            .map(|(&v, (&min, &max))| {
                let t = (v - min) / (max - min);
                (lo + t * (top - lo)).clamp(lo, top)
            })
            .collect();
        Ok(DataPoint::new(coords))
    }
}

/// Min-max rescaling of every coordinate into the convention's half-open domain.
pub fn rescale_dataset(points: &[Vec<f64>], convention: Convention) -> Result<(Vec<DataPoint>, Rescaler)> {
    let rescaler = Rescaler::fit(points, convention)?;
    let mapped = points
        .iter()
        .map(|p| rescaler.apply(p))
        .collect::<Result<Vec<_>>>()?;
    Ok((mapped, rescaler))
}
