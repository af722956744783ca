//! Matrix-level simulation of the two-photon kernel circuit.
//!
//! Each photon lives in a 4-dimensional space spanned by polarization (H/V) and rail
//! (top/bottom), ordered `(HT, HB, VB, VT)`. Starting from `|HB>`, a splitting plate on the
//! bottom rail, a polarizing beam divider and one plate per rail prepare
//!
//! ```text
//! c^3 |HT> + sqrt(3) s c^2 |HB> + sqrt(3) c s^2 |VB> + s^3 |VT>,   c = cos x, s = sin x,
//! ```
//!
//! i.e. the `N = 3` binomial feature state. Two photons carry the two input coordinates.
//! The kernel is the probability of returning to `|HB, HB>` after `U(x)` followed by `U^dagger(x')`.

use std::collections::BTreeMap;
use std::time::Duration;

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Binomial, Distribution};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::states::{checked_phases, Convention, DataPoint};

/// Tolerance on `U^dagger U = I`.
pub const UNITARITY_TOL: f64 = 1e-12;

/// Largest `mu^2 + nu^2` a plate accepts (the `sqrt(2)` / `sqrt(6)` prefactors top out at 2).
const MAX_PLATE_NORM_SQR: f64 = 2.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Polarization {
    H,
    V,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Rail {
    Top,
    Bottom,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct PhotonMode {
    pub polarization: Polarization,
    pub rail: Rail,
}

impl PhotonMode {
    pub const HT: PhotonMode = PhotonMode::new(Polarization::H, Rail::Top);
    pub const HB: PhotonMode = PhotonMode::new(Polarization::H, Rail::Bottom);
    pub const VB: PhotonMode = PhotonMode::new(Polarization::V, Rail::Bottom);
    pub const VT: PhotonMode = PhotonMode::new(Polarization::V, Rail::Top);

    /// Single-photon basis order.
    pub const BASIS: [PhotonMode; 4] = [Self::HT, Self::HB, Self::VB, Self::VT];

    /// Mode every photon is prepared in and post-selected on.
    pub const INPUT: PhotonMode = Self::HB;

    pub const fn new(polarization: Polarization, rail: Rail) -> Self {
        Self { polarization, rail }
    }

    pub fn index(self) -> usize {
        match (self.polarization, self.rail) {
            (Polarization::H, Rail::Top) => 0,
            (Polarization::H, Rail::Bottom) => 1,
            (Polarization::V, Rail::Bottom) => 2,
            (Polarization::V, Rail::Top) => 3,
        }
    }
}

/// A unitary on one photon (4x4) or on several photons (tensor products).
#[derive(Debug, Clone, PartialEq)]
pub struct CircuitUnitary {
    matrix: DMatrix<Complex64>,
}

impl CircuitUnitary {
    pub fn identity(dim: usize) -> Self {
        Self {
            matrix: DMatrix::identity(dim, dim),
        }
    }

    pub fn from_matrix(matrix: DMatrix<Complex64>) -> Result<Self> {
        if !matrix.is_square() {
            return Err(Error::invalid("circuit matrix must be square"));
        }
        let u = Self { matrix };
        let err = u.unitarity_error();
        if !(err <= UNITARITY_TOL) {
            return Err(Error::invalid(format!("matrix is not unitary (error {err:e})")));
        }
        Ok(u)
    }

    pub fn matrix(&self) -> &DMatrix<Complex64> {
        &self.matrix
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    /// `max |U^dagger U - I|`.
    pub fn unitarity_error(&self) -> f64 {
        let n = self.dim();
        let product = self.matrix.adjoint() * &self.matrix;
        (product - DMatrix::<Complex64>::identity(n, n))
            .iter()
            .map(|z| z.norm())
            .fold(0.0, f64::max)
    }

    pub fn adjoint(&self) -> Self {
        Self {
            matrix: self.matrix.adjoint(),
        }
    }

    /// `next * self`: apply `self` first.
    pub fn then(&self, next: &CircuitUnitary) -> Self {
        Self {
            matrix: &next.matrix * &self.matrix,
        }
    }

    pub fn tensor(&self, other: &CircuitUnitary) -> Self {
        Self {
            matrix: self.matrix.kronecker(&other.matrix),
        }
    }

    pub fn apply(&self, state: &[Complex64]) -> Vec<Complex64> {
        let v = nalgebra::DVector::from_column_slice(state);
        (&self.matrix * v).iter().copied().collect()
    }
}

fn real_matrix(rows: [[f64; 4]; 4]) -> DMatrix<Complex64> {
    DMatrix::from_fn(4, 4, |i, j| Complex64::new(rows[i][j], 0.0))
}

/// Wave-plate pair on one rail, rotating that rail's polarization.
///
/// On the top rail `|V> -> (mu |H> + nu |V>) / n`, on the bottom rail
/// `|H> -> (mu |H> + nu |V>) / n`, with `n = sqrt(mu^2 + nu^2)`; the orthogonal input is sent to
/// the orthogonal output so the element is a real rotation. The other rail is untouched.
/// With `mu = nu = 0` no amplitude is routed through the element and it acts as the identity.
pub fn plate_element(mu: f64, nu: f64, rail: Rail) -> Result<CircuitUnitary> {
    if !mu.is_finite() || !nu.is_finite() {
        return Err(Error::invalid(format!("plate parameters must be finite ({mu}, {nu})")));
    }
    let norm_sqr = mu * mu + nu * nu;
    if norm_sqr > MAX_PLATE_NORM_SQR * (1.0 + 1e-12) {
        return Err(Error::invalid(format!(
            "plate parameters ({mu}, {nu}) exceed mu^2 + nu^2 <= 2"
        )));
    }
    if norm_sqr == 0.0 {
        return Ok(CircuitUnitary::identity(4));
    }
    let n = norm_sqr.sqrt();
    let (a, b) = (mu / n, nu / n);
    let (h, v) = match rail {
        Rail::Top => (PhotonMode::HT.index(), PhotonMode::VT.index()),
        Rail::Bottom => (PhotonMode::HB.index(), PhotonMode::VB.index()),
    };
    let mut m = DMatrix::<Complex64>::identity(4, 4);
    let c = |x: f64| Complex64::new(x, 0.0);
    match rail {
        Rail::Top => {
            // column V -> (a, b); column H -> (b, -a)
            m[(h, v)] = c(a);
            m[(v, v)] = c(b);
            m[(h, h)] = c(b);
            m[(v, h)] = c(-a);
        }
        Rail::Bottom => {
            // column H -> (a, b); column V -> (-b, a)
            m[(h, h)] = c(a);
            m[(v, h)] = c(b);
            m[(h, v)] = c(-b);
            m[(v, v)] = c(a);
        }
    }
    CircuitUnitary::from_matrix(m)
}

/// Calcite-style divider: the bottom rail's V component is displaced to the top rail.
pub fn beam_divider() -> CircuitUnitary {
    let mut rows = [[0.0; 4]; 4];
    for mode in PhotonMode::BASIS {
        let target = match mode {
            m if m == PhotonMode::VB => PhotonMode::VT,
            m if m == PhotonMode::VT => PhotonMode::VB,
            m => m,
        };
        rows[target.index()][mode.index()] = 1.0;
    }
    CircuitUnitary {
        matrix: real_matrix(rows),
    }
}

/// `R(y) = e^{2iy}` on both H modes, identity on V.
pub fn phase_shifter(y: f64) -> CircuitUnitary {
    let phase = Complex64::from_polar(1.0, 2.0 * y);
    let mut m = DMatrix::<Complex64>::identity(4, 4);
    m[(PhotonMode::HT.index(), PhotonMode::HT.index())] = phase;
    m[(PhotonMode::HB.index(), PhotonMode::HB.index())] = phase;
    CircuitUnitary { matrix: m }
}

/// Plate settings for one coordinate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PlateSettings {
    pub mu_top: f64,
    pub nu_top: f64,
    pub mu_bottom: f64,
    pub nu_bottom: f64,
}

impl PlateSettings {
    pub fn for_coordinate(x: f64) -> Self {
        let (s, c) = (x.sin(), x.cos());
        let r2 = std::f64::consts::SQRT_2;
        let r6 = 6f64.sqrt();
        Self {
            mu_top: r2 * c * c * c,
            nu_top: r2 * s * s * s,
            mu_bottom: r6 * c * c * s,
            nu_bottom: r6 * c * s * s,
        }
    }

    /// Rail amplitudes `(bottom, top)` the splitting plate must produce, each scaled by `sqrt(2)`.
    fn rail_norms(&self) -> (f64, f64) {
        (
            self.mu_bottom.hypot(self.nu_bottom),
            self.mu_top.hypot(self.nu_top),
        )
    }
}

/// `U(x)` for a single photon: split, divide, then rotate each rail.
pub fn single_photon_unitary(x: f64) -> Result<CircuitUnitary> {
    let p = PlateSettings::for_coordinate(x);
    let (bottom, top) = p.rail_norms();
    // bottom^2 + top^2 = 2 (c^2 + s^2)^3 = 2.
    let split = plate_element(bottom, top, Rail::Bottom)?;
    let top_plate = plate_element(p.mu_top, p.nu_top, Rail::Top)?;
    let bottom_plate = plate_element(p.mu_bottom, p.nu_bottom, Rail::Bottom)?;
    Ok(split
        .then(&beam_divider())
        .then(&top_plate)
        .then(&bottom_plate))
}

fn check_circuit_point(x: &DataPoint) -> Result<()> {
    match x.dim() {
        1 | 2 => x.check_convention(Convention::Cosine),
        d => Err(Error::invalid(format!(
            "the optical circuit encodes 1 or 2 coordinates, got {d}"
        ))),
    }
}

/// `U(x)` on one photon per coordinate.
pub fn build_feature_unitary(x: &DataPoint) -> Result<CircuitUnitary> {
    check_circuit_point(x)?;
    let mut factors = x.coords.iter().map(|&v| single_photon_unitary(v));
    let first = factors.next().expect("dimension checked")?;
    factors.try_fold(first, |acc, u| Ok(acc.tensor(&u?)))
}

/// `|HB>` on each of `photons` photons.
pub fn input_state(photons: usize) -> Vec<Complex64> {
    let mut state = vec![Complex64::new(0.0, 0.0); 4usize.pow(photons as u32)];
    let index = (0..photons).fold(0, |acc, _| acc * 4 + PhotonMode::INPUT.index());
    state[index] = Complex64::new(1.0, 0.0);
    state
}

/// Post-selection amplitude `<in| later^dagger earlier |in>`.
fn return_amplitude(earlier: &CircuitUnitary, later: &CircuitUnitary, photons: usize) -> Complex64 {
    let input = input_state(photons);
    let index = input.iter().position(|a| a.re == 1.0).expect("basis state");
    let column = earlier.then(&later.adjoint()).matrix().column(index).into_owned();
    column[index]
}

/// `|<in| U^dagger(x') U(x) |in>|^2`.
pub fn kernel_circuit(x: &DataPoint, xp: &DataPoint) -> Result<f64> {
    if x.dim() != xp.dim() {
        return Err(Error::invalid(format!(
            "dimension mismatch: {} vs {}",
            x.dim(),
            xp.dim()
        )));
    }
    let u = build_feature_unitary(x)?;
    let up = build_feature_unitary(xp)?;
    Ok(return_amplitude(&u, &up, x.dim()).norm_sqr().clamp(0.0, 1.0))
}

/// Kernel with phase shifts `R(y)` before and `R^dagger(y')` after the feature circuits.
///
/// The phase shifters act on photon `n >= 1` only. The post-selected photon's phase relative to
/// the unshifted reference photon is read out on a diagonal-basis splitter, which transmits with
/// probability `|1 + e^{i theta}|^2 / 4`.
pub fn kernel_circuit_phase(x: &DataPoint, xp: &DataPoint) -> Result<f64> {
    let base = kernel_circuit(x, xp)?;
    let y = checked_phases(x)?;
    let yp = checked_phases(xp)?;
    let input = input_state(1);
    let inp = PhotonMode::INPUT.index();
    let mut transmission = 1.0;
    for (&a, &b) in y.iter().zip(yp).skip(1) {
        let shifted = phase_shifter(a).then(&phase_shifter(b).adjoint()).apply(&input);
        let theta = shifted[inp].arg();
        transmission *= (Complex64::new(1.0, 0.0) + Complex64::from_polar(1.0, theta)).norm_sqr() / 4.0;
    }
    Ok((base * transmission).clamp(0.0, 1.0))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ShotNoiseConfig {
    pub events_per_point: u64,
    pub fidelity: f64,
    pub seed: u64,
    /// Kernel value reported by an event that misses the ideal circuit.
    #[serde(default = "default_background")]
    pub background: f64,
}

fn default_background() -> f64 {
    0.5
}

impl ShotNoiseConfig {
    pub fn new(events_per_point: u64, fidelity: f64, seed: u64) -> Result<Self> {
        let config = Self {
            events_per_point,
            fidelity,
            seed,
            background: default_background(),
        };
        config.validate()?;
        Ok(config)
    }

    pub fn validate(&self) -> Result<()> {
        if self.events_per_point == 0 {
            return Err(Error::invalid("events per point must be >= 1"));
        }
        if !(self.fidelity > 0.0 && self.fidelity <= 1.0) {
            return Err(Error::invalid(format!("fidelity {} outside (0, 1]", self.fidelity)));
        }
        if !(0.0..=1.0).contains(&self.background) {
            return Err(Error::invalid(format!("background {} outside [0, 1]", self.background)));
        }
        Ok(())
    }

    /// Probability that one detection event lands in a post-selected channel.
    pub fn detection_probability(&self, kappa: f64) -> f64 {
        self.fidelity * kappa + (1.0 - self.fidelity) * self.background
    }
}

/// Raw coincidence counts behind one kernel estimate.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CoincidenceRecord {
    pub pairs: BTreeMap<String, u64>,
    pub total: u64,
    pub seed: u64,
}

/// Co-polarized coincidences between the analyzer outputs: the post-selected events.
pub const SIGNAL_PAIRS: [&str; 2] = ["D2H-D3H", "D2V-D3V"];
/// Cross-polarized coincidences: rejected events.
pub const REJECTED_PAIRS: [&str; 2] = ["D2H-D3V", "D2V-D3H"];

impl CoincidenceRecord {
    pub fn signal(&self) -> u64 {
        SIGNAL_PAIRS.iter().filter_map(|k| self.pairs.get(*k)).sum()
    }

    /// Fraction of coincidences in the post-selected channels.
    pub fn estimate(&self) -> f64 {
        if self.total == 0 {
            return 0.0;
        }
        self.signal() as f64 / self.total as f64
    }
}

/// Random stream for one kernel measurement, independent of evaluation order.
pub fn measurement_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Draws a coincidence record for a pair whose ideal kernel value is `true_kappa`.
pub fn sample_kernel(true_kappa: f64, config: &ShotNoiseConfig, stream: u64) -> Result<(f64, CoincidenceRecord)> {
    config.validate()?;
    if !(0.0..=1.0).contains(&true_kappa) {
        return Err(Error::invalid(format!("kernel value {true_kappa} outside [0, 1]")));
    }
    let mut rng = measurement_rng(config.seed, stream);
    let n = config.events_per_point;
    let p = config.detection_probability(true_kappa).clamp(0.0, 1.0);
    let binomial = |n: u64, p: f64| Binomial::new(n, p).map_err(|e| Error::invalid(e.to_string()));
    let signal = binomial(n, p)?.sample(&mut rng);
    let rejected = n - signal;
    let signal_h = binomial(signal, 0.5)?.sample(&mut rng);
    let rejected_h = binomial(rejected, 0.5)?.sample(&mut rng);
    let pairs = BTreeMap::from([
        (SIGNAL_PAIRS[0].to_string(), signal_h),
        (SIGNAL_PAIRS[1].to_string(), signal - signal_h),
        (REJECTED_PAIRS[0].to_string(), rejected_h),
        (REJECTED_PAIRS[1].to_string(), rejected - rejected_h),
    ]);
    let record = CoincidenceRecord {
        pairs,
        total: n,
        seed: config.seed,
    };
    Ok((record.estimate(), record))
}

/// Wall-clock estimate for measuring `pairs` kernel entries at a given coincidence rate.
pub fn coincidence_rate_budget(pairs: u64, rate_cps: f64, events_needed: u64) -> Result<Duration> {
    if !(rate_cps > 0.0 && rate_cps.is_finite()) {
        return Err(Error::invalid(format!("coincidence rate must be positive, got {rate_cps}")));
    }
    Ok(Duration::from_secs_f64(pairs as f64 * events_needed as f64 / rate_cps))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernels::kernel_cosine;
    use crate::states::embed_cosine;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;
    use std::f64::consts::{FRAC_PI_2, FRAC_PI_4, FRAC_PI_6};

    fn pt(c: &[f64]) -> DataPoint {
        DataPoint::new(c.to_vec())
    }

    #[test]
    fn plate_endpoints() {
        let top = plate_element(1.0, 0.0, Rail::Top).unwrap();
        let out = top.apply(&unit(PhotonMode::VT));
        assert_abs_diff_eq!(out[PhotonMode::HT.index()].re, 1.0, epsilon = 1e-15);
        let bottom = plate_element(1.0, 0.0, Rail::Bottom).unwrap();
        let out = bottom.apply(&unit(PhotonMode::HB));
        assert_abs_diff_eq!(out[PhotonMode::HB.index()].re, 1.0, epsilon = 1e-15);
        assert!(plate_element(1.2, 1.0, Rail::Top).is_err());
        assert!(plate_element(f64::NAN, 0.0, Rail::Top).is_err());
        assert_eq!(plate_element(0.0, 0.0, Rail::Top).unwrap(), CircuitUnitary::identity(4));
    }

    #[test]
    fn plate_parameters_at_symmetry_point() {
        let p = PlateSettings::for_coordinate(FRAC_PI_4);
        assert_abs_diff_eq!(p.mu_top, 0.5, epsilon = 1e-15);
        assert_abs_diff_eq!(p.nu_top, 0.5, epsilon = 1e-15);
    }

    fn unit(mode: PhotonMode) -> Vec<Complex64> {
        let mut v = vec![Complex64::new(0.0, 0.0); 4];
        v[mode.index()] = Complex64::new(1.0, 0.0);
        v
    }

    #[test]
    fn feature_state_at_origin_is_top_h() {
        let u = single_photon_unitary(0.0).unwrap();
        let out = u.apply(&input_state(1));
        assert_abs_diff_eq!(out[PhotonMode::HT.index()].re, 1.0, epsilon = 1e-15);
        assert_abs_diff_eq!(out.iter().map(|a| a.norm_sqr()).sum::<f64>(), 1.0, epsilon = 1e-15);
    }

    #[test]
    fn feature_state_at_symmetry_point() {
        let out = single_photon_unitary(FRAC_PI_4).unwrap().apply(&input_state(1));
        let a = 1.0 / (2.0 * 2f64.sqrt());
        let b = 3f64.sqrt() * a;
        for (got, want) in out.iter().zip([a, b, b, a]) {
            assert_abs_diff_eq!(got.re, want, epsilon = 1e-15);
            assert_abs_diff_eq!(got.im, 0.0, epsilon = 1e-15);
        }
    }

    #[test]
    fn circuit_kernel_examples() {
        assert_abs_diff_eq!(kernel_circuit(&pt(&[0.4, -0.2]), &pt(&[0.4, -0.2])).unwrap(), 1.0, epsilon = 1e-14);
        assert_abs_diff_eq!(
            kernel_circuit(&pt(&[0.0]), &pt(&[FRAC_PI_6])).unwrap(),
            27.0 / 64.0,
            epsilon = 1e-14
        );
        let v = kernel_circuit(&pt(&[-FRAC_PI_2 + 0.1, 0.3]), &pt(&[0.1, -1.2])).unwrap();
        assert_abs_diff_eq!(v, 0.0, epsilon = 1e-14);
        assert!(kernel_circuit(&pt(&[0.1, 0.2, 0.3]), &pt(&[0.1, 0.2, 0.3])).is_err());
        assert!(matches!(kernel_circuit(&pt(&[2.0]), &pt(&[0.0])), Err(Error::Domain(_))));
        assert!(kernel_circuit(&pt(&[0.0]), &pt(&[0.0, 0.0])).is_err());
    }

    #[test]
    fn phase_circuit_examples() {
        let x = DataPoint::with_phases(vec![0.3, 0.2], vec![0.0, 0.4]);
        let xp = DataPoint::with_phases(vec![-0.5, 0.9], vec![0.0, 0.4]);
        assert_abs_diff_eq!(
            kernel_circuit_phase(&x, &xp).unwrap(),
            kernel_circuit(&x, &xp).unwrap(),
            epsilon = 1e-14
        );
        let same = DataPoint::with_phases(vec![0.3, 0.2], vec![0.0, 0.4 + FRAC_PI_2]);
        assert_abs_diff_eq!(kernel_circuit_phase(&x, &same).unwrap(), 0.0, epsilon = 1e-14);
        let quarter = DataPoint::with_phases(vec![0.3, 0.2], vec![0.0, 0.4 + FRAC_PI_4]);
        assert_abs_diff_eq!(kernel_circuit_phase(&x, &quarter).unwrap(), 0.5, epsilon = 1e-14);
    }

    #[test]
    fn shot_noise_limits_and_determinism() {
        let cfg = ShotNoiseConfig::new(2500, 1.0, 11).unwrap();
        let (est, rec) = sample_kernel(1.0, &cfg, 3).unwrap();
        assert_eq!(est, 1.0);
        assert_eq!(rec.total, 2500);
        assert_eq!(rec.pairs.values().sum::<u64>(), rec.total);
        let again = sample_kernel(0.37, &cfg, 42).unwrap();
        assert_eq!(again, sample_kernel(0.37, &cfg, 42).unwrap());
        assert_ne!(again.1, sample_kernel(0.37, &cfg, 43).unwrap().1);
        let (est, _) = sample_kernel(0.0, &ShotNoiseConfig::new(100_000, 0.98, 1).unwrap(), 0).unwrap();
        assert_abs_diff_eq!(est, 0.01, epsilon = 2e-3);
        assert!(ShotNoiseConfig::new(0, 1.0, 0).is_err());
        assert!(ShotNoiseConfig::new(10, 0.0, 0).is_err());
        assert!(sample_kernel(1.5, &cfg, 0).is_err());
    }

    fn estimates(kappa: f64, events: u64, trials: u64) -> Vec<f64> {
        let cfg = ShotNoiseConfig::new(events, 1.0, 2024).unwrap();
        (0..trials).map(|t| sample_kernel(kappa, &cfg, t).unwrap().0).collect()
    }

    fn mean_var(v: &[f64]) -> (f64, f64) {
        let n = v.len() as f64;
        let mean = v.iter().sum::<f64>() / n;
        (mean, v.iter().map(|e| (e - mean).powi(2)).sum::<f64>() / (n - 1.0))
    }

    #[test]
    fn binomial_spread_at_half() {
        let (_, var) = mean_var(&estimates(0.5, 2500, 10_000));
        assert!((var.sqrt() - 0.01).abs() < 3e-4, "sd {}", var.sqrt());
    }

    #[test]
    fn estimator_is_unbiased() {
        let kappa = 0.3;
        let trials = 100_000;
        let (mean, _) = mean_var(&estimates(kappa, 200, trials));
        let se = (kappa * (1.0 - kappa) / 200.0 / trials as f64).sqrt();
        assert!((mean - kappa).abs() < 3.0 * se, "mean {mean}");
    }

    #[test]
    fn variance_scales_inversely_with_events() {
        let points: Vec<(f64, f64)> = [100u64, 1_000, 10_000, 100_000]
            .iter()
            .map(|&n| ((n as f64).ln(), mean_var(&estimates(0.4, n, 4000)).1.ln()))
            .collect();
        let mx = points.iter().map(|p| p.0).sum::<f64>() / 4.0;
        let my = points.iter().map(|p| p.1).sum::<f64>() / 4.0;
        let sxy: f64 = points.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
        let sxx: f64 = points.iter().map(|p| (p.0 - mx).powi(2)).sum();
        let slope = sxy / sxx;
        assert!((slope + 1.0).abs() < 0.05, "slope {slope}");
    }

    #[test]
    fn record_json_layout() {
        let cfg = ShotNoiseConfig::new(50, 0.98, 5).unwrap();
        let (_, rec) = sample_kernel(0.5, &cfg, 9).unwrap();
        let value: serde_json::Value = serde_json::to_value(&rec).unwrap();
        assert_eq!(value["total"], 50);
        assert_eq!(value["seed"], 5);
        assert_eq!(value["pairs"].as_object().unwrap().len(), 4);
        let back: CoincidenceRecord = serde_json::from_value(value).unwrap();
        assert_eq!(back, rec);
    }

    #[test]
    fn measurement_budget() {
        let t = coincidence_rate_budget(780, 250.0, 2500).unwrap();
        assert_eq!(t.as_secs(), 7800);
        assert_abs_diff_eq!(t.as_secs_f64() / 3600.0, 2.1667, epsilon = 1e-4);
        assert_eq!(coincidence_rate_budget(1, 250.0, 2500).unwrap().as_secs(), 10);
        assert_eq!(coincidence_rate_budget(0, 250.0, 2500).unwrap(), Duration::ZERO);
        assert!(coincidence_rate_budget(1, 0.0, 1).is_err());
    }

    proptest! {
        #[test]
        fn composed_circuits_are_unitary(a in -FRAC_PI_2..FRAC_PI_2, b in -FRAC_PI_2..FRAC_PI_2) {
            let u = build_feature_unitary(&pt(&[a, b])).unwrap();
            prop_assert!(u.unitarity_error() < UNITARITY_TOL);
        }

        #[test]
        fn circuit_prepares_binomial_state(a in -FRAC_PI_2..FRAC_PI_2, b in -FRAC_PI_2..FRAC_PI_2) {
            let x = pt(&[a, b]);
            let prepared = build_feature_unitary(&x).unwrap().apply(&input_state(2));
            let expected = embed_cosine(&x, 3).unwrap();
            for (p, e) in prepared.iter().zip(expected.amplitudes()) {
                prop_assert!((p - e).norm() < 1e-12);
            }
        }

        #[test]
        fn circuit_kernel_is_cosine_sixth(
            x in proptest::collection::vec(-FRAC_PI_2..FRAC_PI_2, 2),
            xp in proptest::collection::vec(-FRAC_PI_2..FRAC_PI_2, 2),
            y in -3.0f64..3.0,
            yp in -3.0f64..3.0,
        ) {
            let (x, xp) = (pt(&x), pt(&xp));
            let k = kernel_circuit(&x, &xp).unwrap();
            prop_assert!((k - kernel_cosine(&x, &xp, 3).unwrap()).abs() < 1e-10);
            let xa = DataPoint::with_phases(x.coords.clone(), vec![0.0, y]);
            let xb = DataPoint::with_phases(xp.coords.clone(), vec![0.0, yp]);
            let kp = kernel_circuit_phase(&xa, &xb).unwrap();
            prop_assert!((kp - k * (y - yp).cos().powi(2)).abs() < 1e-10);
        }
    }
}
