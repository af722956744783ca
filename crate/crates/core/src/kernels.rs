//! Closed-form kernels and the overlap kernel they must agree with.
//!
//! Two input conventions coexist and are never converted implicitly: profile kernels act on
//! interference coordinates (`cos^2(pi dx)` for the two-term profile), cosine-family kernels on
//! cosine coordinates (`cos^2(dx)` per unit power).

use std::f64::consts::PI;
use std::fmt;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::resolution::{optimize_profile, OptimizerConfig};
use crate::states::{
    checked_phases, embed_cosine, embed_interference, embed_phase_augmented, msi_profile,
    tsq_profile, AmplitudeProfile, Convention, DataPoint, FeatureState,
};

/// Round-off below zero that is silently clamped.
const NEGATIVE_SLACK: f64 = 1e-14;

fn clamp_unit(v: f64) -> f64 {
    debug_assert!(v > -NEGATIVE_SLACK && v < 1.0 + 1e-9, "kernel value {v} out of range");
    v.clamp(0.0, 1.0)
}

/// `|sum_n r_n e^{2 pi i n dx}|^2`.
pub fn kernel_profile(dx: f64, profile: &AmplitudeProfile) -> f64 {
    let sum: Complex64 = profile
        .weights()
        .iter()
        .enumerate()
        .map(|(n, r)| Complex64::from_polar(*r, 2.0 * PI * n as f64 * dx))
        .sum();
    clamp_unit(sum.norm_sqr())
}

fn coord_deltas<'a>(x: &'a DataPoint, xp: &'a DataPoint) -> Result<impl Iterator<Item = f64> + 'a> {
    if x.dim() != xp.dim() {
        return Err(Error::invalid(format!(
            "dimension mismatch: {} vs {}",
            x.dim(),
            xp.dim()
        )));
    }
    if x.dim() == 0 {
        return Err(Error::invalid("data points have no coordinates"));
    }
    Ok(x.coords.iter().zip(&xp.coords).map(|(a, b)| b - a))
}

/// Product over coordinates of [`kernel_profile`].
pub fn kernel_profile_nd(x: &DataPoint, xp: &DataPoint, profile: &AmplitudeProfile) -> Result<f64> {
    Ok(coord_deltas(x, xp)?.map(|d| kernel_profile(d, profile)).product())
}

/// `prod_n cos^{2N}(x'_n - x_n)`.
pub fn kernel_cosine(x: &DataPoint, xp: &DataPoint, n: u32) -> Result<f64> {
    if n == 0 {
        return Err(Error::invalid("cosine kernel needs N >= 1"));
    }
    let v: f64 = coord_deltas(x, xp)?.map(|d| d.cos().powi(2 * n as i32)).product();
    Ok(clamp_unit(v))
}

/// Cosine-power kernel times `prod_n cos^2(y'_{n-1} - y_{n-1})`.
pub fn kernel_phase_augmented(x: &DataPoint, xp: &DataPoint, n: u32) -> Result<f64> {
    let base = kernel_cosine(x, xp, n)?;
    let y = checked_phases(x)?;
    let yp = checked_phases(xp)?;
    let phase: f64 = y.iter().zip(yp).map(|(a, b)| (b - a).cos().powi(2)).product();
    Ok(clamp_unit(base * phase))
}

/// `prod_n |cos(x'_n - x_n)|^{2p}` for real `p > 0`; analytic only.
pub fn kernel_fractional(x: &DataPoint, xp: &DataPoint, p: f64) -> Result<f64> {
    if !p.is_finite() || p <= 0.0 {
        return Err(Error::invalid(format!("fractional exponent must be positive, got {p}")));
    }
    let v: f64 = coord_deltas(x, xp)?.map(|d| d.cos().abs().powf(2.0 * p)).product();
    Ok(clamp_unit(v))
}

/// `|<a|b>|^2`.
pub fn overlap_kernel(a: &FeatureState, b: &FeatureState) -> Result<f64> {
    Ok(clamp_unit(a.inner(b)?.norm_sqr()))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum QubitScheme {
    /// Binomial map on `N+1` levels: `ceil(log2(N+1))` qubits.
    Compact,
    /// One qubit per unit of power: `N` qubits.
    Product,
}

/// Qubits per input dimension needed for the cosine kernel of power `N`.
pub fn qubit_count(n: u32, scheme: QubitScheme) -> Result<u32> {
    if n == 0 {
        return Err(Error::invalid("qubit count needs N >= 1"));
    }
    Ok(match scheme {
        QubitScheme::Compact => (u64::from(n) + 1).next_power_of_two().trailing_zeros(),
        QubitScheme::Product => n,
    })
}

/// Which kernel to evaluate, with exactly the parameters that kernel needs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum KernelSpec {
    /// Interference-state kernel applied per coordinate.
    Profile {
        name: String,
        profile: AmplitudeProfile,
        dim: usize,
    },
    CosinePower { n: u32, dim: usize },
    PhaseAugmented { n: u32, dim: usize },
    /// Non-embeddable `|cos|^{2p}` kernel.
    FractionalCosine { p: f64, dim: usize },
}

impl KernelSpec {
    pub fn dim(&self) -> usize {
        match self {
            KernelSpec::Profile { dim, .. }
            | KernelSpec::CosinePower { dim, .. }
            | KernelSpec::PhaseAugmented { dim, .. }
            | KernelSpec::FractionalCosine { dim, .. } => *dim,
        }
    }

    pub fn convention(&self) -> Convention {
        match self {
            KernelSpec::Profile { .. } => Convention::Interference,
            _ => Convention::Cosine,
        }
    }

    pub fn is_embeddable(&self) -> bool {
        !matches!(self, KernelSpec::FractionalCosine { .. })
    }

    fn check_dim(&self, x: &DataPoint) -> Result<()> {
        if x.dim() != self.dim() {
            return Err(Error::invalid(format!(
                "kernel expects {}-dimensional points, got {}",
                self.dim(),
                x.dim()
            )));
        }
        Ok(())
    }

    /// Closed-form kernel value.
    pub fn evaluate(&self, x: &DataPoint, xp: &DataPoint) -> Result<f64> {
        self.check_dim(x)?;
        self.check_dim(xp)?;
        match self {
            KernelSpec::Profile { profile, .. } => kernel_profile_nd(x, xp, profile),
            KernelSpec::CosinePower { n, .. } => kernel_cosine(x, xp, *n),
            KernelSpec::PhaseAugmented { n, .. } => kernel_phase_augmented(x, xp, *n),
            KernelSpec::FractionalCosine { p, .. } => kernel_fractional(x, xp, *p),
        }
    }

    /// Feature state whose overlaps reproduce [`KernelSpec::evaluate`].
    pub fn embed(&self, x: &DataPoint) -> Result<FeatureState> {
        self.check_dim(x)?;
        match self {
            KernelSpec::Profile { profile, .. } => {
                let mut factors = x.coords.iter().map(|&v| embed_interference(v, profile));
                let first = factors.next().expect("dim checked")?;
                factors.try_fold(first, |acc, f| Ok(acc.tensor(&f?)))
            }
            KernelSpec::CosinePower { n, .. } => embed_cosine(x, *n),
            KernelSpec::PhaseAugmented { n, .. } => embed_phase_augmented(x, *n),
            KernelSpec::FractionalCosine { p, .. } => Err(Error::invalid(format!(
                "fractional kernel with p = {p} has no feature map"
            ))),
        }
    }

    /// Parses `cosine:N`, `fractional:P`, `phase:N`, `msi:L`, `tsq:L:ZETA` or `optimized:L`.
    ///
    /// A non-integer cosine power (`cosine:1/2`, `cosine:0.5`) selects the fractional kernel.
    pub fn parse(text: &str, dim: usize) -> Result<Self> {
        if dim == 0 {
            return Err(Error::invalid("kernel dimension must be positive"));
        }
        let parts: Vec<&str> = text.trim().split(':').collect();
        let bad = || Error::Parse(format!("unrecognized kernel '{text}'"));
        let int = |s: &str| s.parse::<u32>().map_err(|_| bad());
        let spec = match parts.as_slice() {
            ["cosine", power] => match power.parse::<u32>() {
                Ok(n) if n >= 1 => KernelSpec::CosinePower { n, dim },
                _ => KernelSpec::FractionalCosine {
                    p: parse_real(power).ok_or_else(bad)?,
                    dim,
                },
            },
            ["fractional", p] => KernelSpec::FractionalCosine {
                p: parse_real(p).ok_or_else(bad)?,
                dim,
            },
            ["phase", n] => KernelSpec::PhaseAugmented { n: int(n)?, dim },
            ["msi", len] => KernelSpec::Profile {
                name: format!("msi:{len}"),
                profile: msi_profile(int(len)? as usize)?,
                dim,
            },
            ["tsq", len, zeta] => KernelSpec::Profile {
                name: format!("tsq:{len}:{zeta}"),
                profile: tsq_profile(int(len)? as usize, parse_real(zeta).ok_or_else(bad)?)?,
                dim,
            },
            ["optimized", len] => KernelSpec::Profile {
                name: format!("optimized:{len}"),
                profile: optimize_profile(int(len)? as usize, &OptimizerConfig::default())?,
                dim,
            },
            _ => return Err(bad()),
        };
        spec.validate()?;
        Ok(spec)
    }

    fn validate(&self) -> Result<()> {
        match self {
            KernelSpec::CosinePower { n: 0, .. } | KernelSpec::PhaseAugmented { n: 0, .. } => {
                Err(Error::invalid("kernel power must be >= 1"))
            }
            KernelSpec::FractionalCosine { p, .. } if !(p.is_finite() && *p > 0.0) => {
                Err(Error::invalid(format!("fractional exponent must be positive, got {p}")))
            }
            _ => Ok(()),
        }
    }
}

impl fmt::Display for KernelSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            KernelSpec::Profile { name, .. } => write!(f, "{name}"),
            KernelSpec::CosinePower { n, .. } => write!(f, "cosine:{n}"),
            KernelSpec::PhaseAugmented { n, .. } => write!(f, "phase:{n}"),
            KernelSpec::FractionalCosine { p, .. } => write!(f, "fractional:{p}"),
        }
    }
}

/// Accepts decimals and simple fractions such as `1/2`.
fn parse_real(s: &str) -> Option<f64> {
    let v = match s.split_once('/') {
        Some((num, den)) => num.trim().parse::<f64>().ok()? / den.trim().parse::<f64>().ok()?,
        None => s.trim().parse::<f64>().ok()?,
    };
    v.is_finite().then_some(v)
}
