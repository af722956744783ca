//! Spatial resolution of interference kernels and its minimization at fixed dimension.
//!
//! For a profile `r` of length `L`, the kernel renormalized over one period is a probability
//! density on `[-1/2, 1/2]`. Its variance is the Rayleigh quotient `r^T K r / r^T r` with
//! `K_nn = 1/12` and `K_nm = (-1)^{|n-m|} / (2 (n-m)^2 pi^2)`.

use std::f64::consts::PI;
use std::fmt;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kernels::kernel_profile;
use crate::states::{msi_profile, tsq_profile, AmplitudeProfile};

/// Default number of Simpson panels for [`resolution_numeric`].
pub const DEFAULT_PANELS: usize = 4096;

/// Variance of the uniform density on a unit cell.
pub const UNIFORM_VARIANCE: f64 = 1.0 / 12.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResolutionReport {
    /// Squared resolution.
    pub variance: f64,
    pub resolution: f64,
    /// `R = sum r_n^2`.
    pub purity: f64,
    pub profile: AmplitudeProfile,
}

/// Symmetric `L x L` matrix of the variance quadratic form.
#[derive(Debug, Clone, PartialEq)]
pub struct ResolutionMatrix {
    entries: DMatrix<f64>,
}

impl ResolutionMatrix {
    pub fn entries(&self) -> &DMatrix<f64> {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Raw quotient `v^T K v / v^T v` for any nonzero vector.
    pub fn rayleigh_quotient(&self, v: &DVector<f64>) -> f64 {
        v.dot(&(&self.entries * v)) / v.norm_squared()
    }
}

pub fn build_resolution_matrix(len: usize) -> Result<ResolutionMatrix> {
    if len == 0 {
        return Err(Error::invalid("resolution matrix needs L >= 1"));
    }
    let entries = DMatrix::from_fn(len, len, |n, m| {
        if n == m {
            UNIFORM_VARIANCE
        } else {
            let d = n.abs_diff(m);
            let sign = if d % 2 == 0 { 1.0 } else { -1.0 };
            sign / (2.0 * (d * d) as f64 * PI * PI)
        }
    });
    Ok(ResolutionMatrix { entries })
}

fn report(profile: &AmplitudeProfile, variance: f64) -> ResolutionReport {
    ResolutionReport {
        variance,
        resolution: variance.max(0.0).sqrt(),
        purity: profile.purity(),
        profile: profile.clone(),
    }
}

/// Variance from the quadratic form.
pub fn resolution_quadratic(profile: &AmplitudeProfile) -> ResolutionReport {
    let k = build_resolution_matrix(profile.len()).expect("profiles are nonempty");
    let r = DVector::from_column_slice(profile.weights());
    report(profile, k.rayleigh_quotient(&r))
}

/// Variance by composite Simpson quadrature of `x^2 kappa(x)` and `kappa(x)` over the cell.
pub fn resolution_numeric(profile: &AmplitudeProfile, panels: usize) -> Result<f64> {
    if panels < 64 || !panels.is_multiple_of(2) {
        return Err(Error::invalid(format!(
            "Simpson quadrature needs an even panel count >= 64, got {panels}"
        )));
    }
    let h = 1.0 / panels as f64;
    let (mut moment, mut mass) = (0.0, 0.0);
    for i in 0..=panels {
        let x = -0.5 + i as f64 * h;
        let w = if i == 0 || i == panels {
            1.0
        } else if i % 2 == 1 {
            4.0
        } else {
            2.0
        };
        let k = kernel_profile(x, profile);
        moment += w * x * x * k;
        mass += w * k;
    }
    Ok(moment / mass)
}

/// `S_1(N) = -(12/pi^2) sum_{j=1}^{N-1} (-1)^j (N-j) / (N j^2)`.
pub fn msi_squeezing_factor(n: usize) -> Result<f64> {
    if n < 2 {
        return Err(Error::invalid(format!("closed form needs N >= 2, got {n}")));
    }
    let nf = n as f64;
    let sum: f64 = (1..n)
        .map(|j| {
            let jf = j as f64;
            let sign = if j % 2 == 0 { 1.0 } else { -1.0 };
            sign * (nf - jf) / (nf * jf * jf)
        })
        .sum();
    Ok(-12.0 / (PI * PI) * sum)
}

/// `(1/12) (1 - S_1(N))`, the variance of the `N`-term equal-weight kernel.
pub fn msi_variance_closed_form(n: usize) -> Result<f64> {
    Ok(UNIFORM_VARIANCE * (1.0 - msi_squeezing_factor(n)?))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OptimizerConfig {
    pub max_iters: usize,
    /// Relative decrease of the quotient below which the iteration may stop.
    pub tolerance: f64,
    /// Bound on the normalized projected-gradient step at termination.
    pub stationarity_tol: f64,
}

impl Default for OptimizerConfig {
    fn default() -> Self {
        Self {
            max_iters: 100_000,
            tolerance: 1e-10,
            stationarity_tol: 1e-9,
        }
    }
}

/// Euclidean projection onto `{r : r >= 0, sum r = 1}`.
pub fn project_to_simplex(v: &DVector<f64>) -> DVector<f64> {
    let mut sorted: Vec<f64> = v.iter().copied().collect();
    sorted.sort_by(|a, b| b.total_cmp(a));
    let mut cumsum = 0.0;
    let mut theta = 0.0;
    for (i, u) in sorted.iter().enumerate() {
        cumsum += u;
        let t = (cumsum - 1.0) / (i + 1) as f64;
        if u - t > 0.0 {
            theta = t;
        }
    }
    v.map(|x| (x - theta).max(0.0))
}

fn quotient_gradient(k: &ResolutionMatrix, r: &DVector<f64>, f: f64) -> DVector<f64> {
    (k.entries() * r - r * f) * (2.0 / r.norm_squared())
}

/// Length of the projected step along `K r - f r` (the gradient scaled by `r^T r / 2`);
/// zero exactly at a first-order stationary point on the simplex.
pub fn stationarity(k: &ResolutionMatrix, r: &DVector<f64>) -> f64 {
    let f = k.rayleigh_quotient(r);
    let g = quotient_gradient(k, r, f) * (0.5 * r.norm_squared());
    (project_to_simplex(&(r - g)) - r).amax()
}

/// Minimizes the kernel variance over nonnegative profiles of length `len`.
///
/// Projected gradient on the simplex with Barzilai-Borwein trial steps and Armijo backtracking,
/// started from the equal-weight profile. Among near-equal minimizers the index-reversal
/// symmetric one is returned.
pub fn optimize_profile(len: usize, config: &OptimizerConfig) -> Result<AmplitudeProfile> {
    if len < 2 {
        return Err(Error::invalid(format!("optimizer needs L >= 2, got {len}")));
    }
    let k = build_resolution_matrix(len)?;
    let mut r = DVector::from_element(len, 1.0 / len as f64);
    let mut f = k.rayleigh_quotient(&r);
    let mut g = quotient_gradient(&k, &r, f);
    let mut step = 1.0 / g.amax().max(f64::MIN_POSITIVE);
    let mut converged = false;

    for _ in 0..config.max_iters {
        let mut t = step;
        let (next, f_next) = loop {
            let candidate = project_to_simplex(&(&r - &g * t));
            let fc = k.rayleigh_quotient(&candidate);
            let decrease = g.dot(&(&r - &candidate));
            if fc <= f - 1e-4 * decrease || t < 1e-30 {
                break (candidate, fc);
            }
            t *= 0.5;
        };
        let g_next = quotient_gradient(&k, &next, f_next);
        let s = &next - &r;
        let y = &g_next - &g;
        let sy = s.dot(&y);
        step = if sy > 0.0 { s.norm_squared() / sy } else { 2.0 * t };

        let rel_decrease = (f - f_next) / f;
        r = next;
        f = f_next.min(f);
        g = g_next;
        if rel_decrease <= config.tolerance && stationarity(&k, &r) <= config.stationarity_tol {
            converged = true;
            break;
        }
    }

    let mirrored = DVector::from_iterator(len, r.iter().rev().copied());
    let symmetric = (&r + &mirrored) * 0.5;
    if k.rayleigh_quotient(&symmetric) <= f * (1.0 + config.tolerance) {
        r = symmetric;
        f = k.rayleigh_quotient(&r);
    }
    let profile = AmplitudeProfile::normalized(r.iter().copied().collect())?;
    if !converged {
        return Err(Error::Convergence {
            iterations: config.max_iters,
            best_variance: f,
            best: Box::new(profile),
        });
    }
    Ok(profile)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum ProfileFamily {
    Msi,
    Tsq { zeta: f64 },
    Optimized,
}

impl ProfileFamily {
    pub fn profile(self, len: usize) -> Result<AmplitudeProfile> {
        match self {
            ProfileFamily::Msi => msi_profile(len),
            ProfileFamily::Tsq { zeta } => tsq_profile(len, zeta),
            ProfileFamily::Optimized => optimize_profile(len, &OptimizerConfig::default()),
        }
    }
}

impl fmt::Display for ProfileFamily {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ProfileFamily::Msi => write!(f, "msi"),
            ProfileFamily::Tsq { zeta } => write!(f, "tsq(zeta={zeta})"),
            ProfileFamily::Optimized => write!(f, "optimized"),
        }
    }
}

/// Parses `msi`, `optimized` or `tsq:ZETA`.
impl std::str::FromStr for ProfileFamily {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.split_once(':') {
            None if s == "msi" => Ok(ProfileFamily::Msi),
            None if s == "optimized" => Ok(ProfileFamily::Optimized),
            Some(("tsq", z)) => {
                let zeta: f64 = z
                    .parse()
                    .map_err(|_| Error::Parse(format!("bad squeezing factor '{z}'")))?;
                if !(zeta > 0.0 && zeta.is_finite()) {
                    return Err(Error::invalid(format!("squeezing factor must be positive, got {zeta}")));
                }
                Ok(ProfileFamily::Tsq { zeta })
            }
            _ => Err(Error::invalid(format!(
                "unknown profile family '{s}' (expected msi, optimized or tsq:ZETA)"
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub family: String,
    pub len: usize,
    pub variance: f64,
    pub resolution: f64,
}

/// Resolution of each family at each length, family-major.
pub fn resolution_sweep(
    lens: impl IntoIterator<Item = usize>,
    families: &[ProfileFamily],
) -> Result<Vec<SweepRow>> {
    let lens: Vec<usize> = lens.into_iter().collect();
    if lens.is_empty() {
        return Err(Error::invalid("resolution sweep needs at least one length"));
    }
    let mut rows = Vec::with_capacity(lens.len() * families.len());
    for family in families {
        for &len in &lens {
            let rep = resolution_quadratic(&family.profile(len)?);
            rows.push(SweepRow {
                family: family.to_string(),
                len,
                variance: rep.variance,
                resolution: rep.resolution,
            });
        }
    }
    Ok(rows)
}

/// CSV with header `family,L,variance,resolution`.
pub fn sweep_to_csv(rows: &[SweepRow]) -> String {
    let mut out = String::from("family,L,variance,resolution\n");
    for row in rows {
        out.push_str(&format!(
            "{},{},{:.16e},{:.16e}\n",
            row.family, row.len, row.variance, row.resolution
        ));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    #[test]
    fn matrix_entries() {
        let k = build_resolution_matrix(5).unwrap();
        let e = k.entries();
        assert_eq!(e[(2, 2)], 1.0 / 12.0);
        assert_abs_diff_eq!(e[(0, 1)], -0.0506606, epsilon = 1e-7);
        assert_eq!(e[(0, 1)], -1.0 / (2.0 * PI * PI));
        assert_eq!(e[(3, 1)], 1.0 / (8.0 * PI * PI));
        assert_eq!(e, &e.transpose());
        assert!(build_resolution_matrix(0).is_err());
    }

    #[test]
    fn known_variances() {
        let single = AmplitudeProfile::new(vec![1.0]).unwrap();
        assert_abs_diff_eq!(resolution_quadratic(&single).variance, 1.0 / 12.0, epsilon = 1e-15);
        let msi2 = resolution_quadratic(&msi_profile(2).unwrap());
        assert_abs_diff_eq!(msi2.variance, (1.0 - 6.0 / (PI * PI)) / 12.0, epsilon = 1e-15);
        assert_abs_diff_eq!(msi2.variance, 0.0326727, epsilon = 1e-7);
        assert_abs_diff_eq!(msi2.purity, 0.5, epsilon = 1e-15);
        // 2 * int x^2 cos^2(pi x) dx over the cell.
        assert_abs_diff_eq!(msi2.variance, 1.0 / 12.0 - 1.0 / (2.0 * PI * PI), epsilon = 1e-15);
    }

    #[test]
    fn quadrature_oracle() {
        let single = AmplitudeProfile::new(vec![1.0]).unwrap();
        assert_abs_diff_eq!(resolution_numeric(&single, 64).unwrap(), 1.0 / 12.0, epsilon = 1e-15);
        let ck = msi_profile(2).unwrap();
        assert_abs_diff_eq!(
            resolution_numeric(&ck, DEFAULT_PANELS).unwrap(),
            1.0 / 12.0 - 1.0 / (2.0 * PI * PI),
            epsilon = 1e-12
        );
        assert!(resolution_numeric(&ck, 32).is_err());
        assert!(resolution_numeric(&ck, 65).is_err());
    }

    #[test]
    fn closed_form_values() {
        assert_abs_diff_eq!(
            msi_variance_closed_form(2).unwrap(),
            (1.0 - 6.0 / (PI * PI)) / 12.0,
            epsilon = 1e-16
        );
        assert_abs_diff_eq!(msi_squeezing_factor(3).unwrap(), 7.0 / (PI * PI), epsilon = 1e-15);
        assert_abs_diff_eq!(
            msi_variance_closed_form(3).unwrap(),
            (1.0 - 7.0 / (PI * PI)) / 12.0,
            epsilon = 1e-16
        );
        assert!(msi_variance_closed_form(1).is_err());
        for n in 2..=64 {
            let q = resolution_quadratic(&msi_profile(n).unwrap()).variance;
            assert_abs_diff_eq!(msi_variance_closed_form(n).unwrap(), q, epsilon = 1e-10);
        }
    }

    #[test]
    fn uniform_bound_holds_for_peaked_families_only() {
        for len in 1..=24 {
            for zeta in [0.3, 1.0, 3.0] {
                let v = resolution_quadratic(&tsq_profile(len, zeta).unwrap()).variance;
                assert!(v <= UNIFORM_VARIANCE + 1e-12);
            }
        }
        for len in 2..=24 {
            assert!(msi_variance_closed_form(len).unwrap() <= UNIFORM_VARIANCE);
        }
        // Weight only on the outer states: the kernel cos^2(2 pi x) peaks at the cell edges too.
        let edge = AmplitudeProfile::new(vec![0.5, 0.0, 0.5]).unwrap();
        let v = resolution_quadratic(&edge).variance;
        assert_abs_diff_eq!(v, UNIFORM_VARIANCE + 1.0 / (8.0 * PI * PI), epsilon = 1e-15);
        assert_abs_diff_eq!(resolution_numeric(&edge, DEFAULT_PANELS).unwrap(), v, epsilon = 1e-12);
    }

    #[test]
    fn closed_form_strictly_decreasing() {
        let v: Vec<f64> = (2..=64).map(|n| msi_variance_closed_form(n).unwrap()).collect();
        assert!(v.windows(2).all(|w| w[1] < w[0]));
    }

    #[test]
    fn simplex_projection() {
        let p = project_to_simplex(&DVector::from_vec(vec![0.2, 0.3, 0.5]));
        assert_abs_diff_eq!(p, DVector::from_vec(vec![0.2, 0.3, 0.5]), epsilon = 1e-15);
        let p = project_to_simplex(&DVector::from_vec(vec![3.0, -1.0, 0.0]));
        assert_eq!(p, DVector::from_vec(vec![1.0, 0.0, 0.0]));
        let p = project_to_simplex(&DVector::from_vec(vec![1.0, 1.0]));
        assert_eq!(p, DVector::from_vec(vec![0.5, 0.5]));
    }

    /// Brute-force scan of the simplex for `L = 2` and `L = 3`.
    fn grid_optimum(len: usize, step: f64) -> Vec<f64> {
        let k = build_resolution_matrix(len).unwrap();
        let steps = (1.0 / step).round() as usize;
        let mut best = (f64::INFINITY, vec![]);
        let mut consider = |r: Vec<f64>| {
            let q = k.rayleigh_quotient(&DVector::from_vec(r.clone()));
            if q < best.0 {
                best = (q, r);
            }
        };
        for i in 0..=steps {
            let a = i as f64 * step;
            if len == 2 {
                consider(vec![a, 1.0 - a]);
            } else {
                for j in 0..=(steps - i) {
                    let b = j as f64 * step;
                    consider(vec![a, b, (1.0 - a - b).max(0.0)]);
                }
            }
        }
        best.1
    }

    #[test]
    fn optimizer_matches_brute_force() {
        for len in [2, 3] {
            let opt = optimize_profile(len, &OptimizerConfig::default()).unwrap();
            let grid = grid_optimum(len, 1e-3);
            for (a, b) in opt.weights().iter().zip(&grid) {
                assert_abs_diff_eq!(a, b, epsilon = 1e-3);
            }
        }
        let two = optimize_profile(2, &OptimizerConfig::default()).unwrap();
        assert_abs_diff_eq!(two.weights()[0], 0.5, epsilon = 1e-12);
        assert!(optimize_profile(1, &OptimizerConfig::default()).is_err());
    }

    #[test]
    fn optimizer_is_stationary_and_symmetric() {
        let cfg = OptimizerConfig::default();
        for len in [4, 9, 14, 32] {
            let p = optimize_profile(len, &cfg).unwrap();
            let k = build_resolution_matrix(len).unwrap();
            let r = DVector::from_column_slice(p.weights());
            assert!(stationarity(&k, &r) < 1e-8, "L={len}");
            for (a, b) in p.weights().iter().zip(p.reversed().weights()) {
                assert_abs_diff_eq!(a, b, epsilon = 1e-6);
            }
        }
    }

    #[test]
    fn optimizer_reports_non_convergence() {
        let cfg = OptimizerConfig {
            max_iters: 2,
            ..OptimizerConfig::default()
        };
        match optimize_profile(24, &cfg) {
            Err(Error::Convergence { best, best_variance, .. }) => {
                assert_eq!(best.len(), 24);
                assert!(best_variance < msi_variance_closed_form(24).unwrap());
            }
            other => panic!("expected convergence error, got {other:?}"),
        }
    }

    #[test]
    fn optimizer_beats_reference_families() {
        for len in 4..=32 {
            let opt = resolution_quadratic(&optimize_profile(len, &OptimizerConfig::default()).unwrap());
            let msi = msi_variance_closed_form(len).unwrap();
            assert!(opt.variance < msi, "L={len}");
            for zeta in [0.5, 1.0, 2.0, 3.0, 4.0] {
                let tsq = resolution_quadratic(&tsq_profile(len, zeta).unwrap()).variance;
                assert!(opt.variance <= tsq, "L={len} zeta={zeta}");
            }
        }
    }

    #[test]
    fn sweep_shape_and_ordering() {
        let fams = [ProfileFamily::Msi, ProfileFamily::Tsq { zeta: 3.0 }, ProfileFamily::Optimized];
        let rows = resolution_sweep(2..=14, &fams).unwrap();
        assert_eq!(rows.len(), 13 * 3);
        let get = |fam: &str, len: usize| {
            rows.iter()
                .find(|r| r.family.starts_with(fam) && r.len == len)
                .unwrap()
                .variance
        };
        assert_abs_diff_eq!(get("msi", 2), get("optimized", 2), epsilon = 1e-14);
        assert!(get("tsq", 14) > get("optimized", 14));
        for len in 2..=14 {
            assert!(get("optimized", len) <= get("msi", len) + 1e-15);
        }
        let csv = sweep_to_csv(&rows);
        assert!(csv.starts_with("family,L,variance,resolution\n"));
        assert_eq!(csv.lines().count(), 40);
        assert!(resolution_sweep(Vec::new(), &fams).is_err());
    }

    proptest! {
        #[test]
        fn quadratic_form_matches_quadrature(w in proptest::collection::vec(0.0f64..1.0, 1..24)) {
            prop_assume!(w.iter().sum::<f64>() > 1e-3);
            let p = AmplitudeProfile::normalized(w).unwrap();
            let q = resolution_quadratic(&p);
            let n = resolution_numeric(&p, DEFAULT_PANELS).unwrap();
            prop_assert!((q.variance - n).abs() < 1e-9);
            prop_assert!((q.purity - p.weights().iter().map(|x| x * x).sum::<f64>()).abs() < 1e-12);
        }

        #[test]
        fn quotient_is_scale_invariant(w in proptest::collection::vec(0.01f64..1.0, 1..16), c in 1e-3f64..1e3) {
            let k = build_resolution_matrix(w.len()).unwrap();
            let v = DVector::from_vec(w);
            let a = k.rayleigh_quotient(&v);
            let b = k.rayleigh_quotient(&(&v * c));
            prop_assert!((a - b).abs() <= 1e-14 * a.abs().max(1e-3));
        }
    }

    #[test]
    fn family_names_parse() {
        assert_eq!("msi".parse::<ProfileFamily>().unwrap(), ProfileFamily::Msi);
        assert_eq!("optimized".parse::<ProfileFamily>().unwrap(), ProfileFamily::Optimized);
        assert_eq!("tsq:3".parse::<ProfileFamily>().unwrap(), ProfileFamily::Tsq { zeta: 3.0 });
        assert!("tsq:-1".parse::<ProfileFamily>().is_err());
        assert!("tsq".parse::<ProfileFamily>().is_err());
        assert!("gauss".parse::<ProfileFamily>().is_err());
    }
}
