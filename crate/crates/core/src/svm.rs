//! Kernel classifier `f(x) = sum_m a_m k(x, x_m)` trained on a precomputed Gram matrix.
//!
//! Training minimizes `sum_m a_m^2 + gamma sum_m u_m` subject to `y_i f(x_i) >= 1 - u_i` and
//! `u >= 0`. There is no intercept. The problem is solved through its dual
//!
//! ```text
//! min 1/2 alpha^T Q alpha - 1^T alpha,   0 <= alpha <= gamma,   Q = 1/2 Y G^2 Y,
//! ```
//!
//! with `a = G (alpha * y) / 2`. `G^2` is positive semidefinite for any symmetric `G`, so the
//! dual stays convex even when a sampled Gram matrix is indefinite.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::states::DataPoint;

/// Symmetry tolerance for exact Gram matrices.
pub const SYMMETRY_TOL: f64 = 1e-12;
/// Projected-gradient tolerance at which training stops.
pub const KKT_TOL: f64 = 1e-8;
pub const DEFAULT_GAMMA: f64 = 1.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Provenance {
    Exact,
    Sampled,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GramMatrix {
    values: DMatrix<f64>,
    provenance: Provenance,
    seed: Option<u64>,
}

fn check_entries(values: &DMatrix<f64>) -> Result<()> {
    if !values.is_square() {
        return Err(Error::invalid(format!(
            "Gram matrix must be square, got {}x{}",
            values.nrows(),
            values.ncols()
        )));
    }
    if values.nrows() == 0 {
        return Err(Error::invalid("Gram matrix is empty"));
    }
    if let Some(v) = values.iter().find(|v| !(-SYMMETRY_TOL..=1.0 + SYMMETRY_TOL).contains(*v)) {
        return Err(Error::invalid(format!("kernel value {v} outside [0, 1]")));
    }
    Ok(())
}

impl GramMatrix {
    /// Gram matrix of an exact kernel: symmetric with unit diagonal.
    pub fn exact(values: DMatrix<f64>) -> Result<Self> {
        check_entries(&values)?;
        let m = values.nrows();
        for i in 0..m {
            if (values[(i, i)] - 1.0).abs() > SYMMETRY_TOL {
                return Err(Error::invalid(format!(
                    "exact Gram diagonal entry {i} is {}, expected 1",
                    values[(i, i)]
                )));
            }
            for j in 0..i {
                if (values[(i, j)] - values[(j, i)]).abs() > SYMMETRY_TOL {
                    return Err(Error::invalid(format!("Gram matrix is not symmetric at ({i}, {j})")));
                }
            }
        }
        Ok(Self {
            values,
            provenance: Provenance::Exact,
            seed: None,
        })
    }

    /// Gram matrix estimated from counts; symmetrized as `(G + G^T) / 2`.
    pub fn sampled(values: DMatrix<f64>, seed: u64) -> Result<Self> {
        check_entries(&values)?;
        let sym = (&values + values.transpose()) * 0.5;
        Ok(Self {
            values: sym,
            provenance: Provenance::Sampled,
            seed: Some(seed),
        })
    }

    pub fn values(&self) -> &DMatrix<f64> {
        &self.values
    }

    pub fn provenance(&self) -> Provenance {
        self.provenance
    }

    pub fn seed(&self) -> Option<u64> {
        self.seed
    }

    pub fn len(&self) -> usize {
        self.values.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.values.nrows() == 0
    }

    pub fn min_eigenvalue(&self) -> f64 {
        SymmetricEigen::new(self.values.clone())
            .eigenvalues
            .min()
    }
}

/// Training points ordered with the `+1` class first.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabeledSet {
    points: Vec<DataPoint>,
    labels: Vec<i8>,
}

impl LabeledSet {
    /// Validates labels and stably moves the `+1` points in front of the `-1` points.
    pub fn new(points: Vec<DataPoint>, labels: Vec<i8>) -> Result<Self> {
        if points.len() != labels.len() {
            return Err(Error::invalid(format!(
                "{} points but {} labels",
                points.len(),
                labels.len()
            )));
        }
        check_labels(&labels)?;
        let (pos, neg): (Vec<_>, Vec<_>) = points.into_iter().zip(labels).partition(|(_, y)| *y > 0);
        let (points, labels) = pos.into_iter().chain(neg).unzip();
        Ok(Self { points, labels })
    }

    pub fn from_classes(positive: Vec<DataPoint>, negative: Vec<DataPoint>) -> Result<Self> {
        let labels = std::iter::repeat_n(1, positive.len())
            .chain(std::iter::repeat_n(-1, negative.len()))
            .collect();
        Self::new(positive.into_iter().chain(negative).collect(), labels)
    }

    pub fn points(&self) -> &[DataPoint] {
        &self.points
    }

    pub fn labels(&self) -> &[i8] {
        &self.labels
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Size of the `-1` class.
    pub fn negatives(&self) -> usize {
        self.labels.iter().filter(|&&y| y < 0).count()
    }

    /// Content hash (FNV-1a over coordinates and labels), stable across runs.
    pub fn id(&self) -> String {
        let mut h: u64 = 0xcbf2_9ce4_8422_2325;
        let mut feed = |bytes: &[u8]| {
            for b in bytes {
                h ^= u64::from(*b);
                h = h.wrapping_mul(0x0100_0000_01b3);
            }
        };
        for (p, y) in self.points.iter().zip(&self.labels) {
            for c in &p.coords {
                feed(&c.to_bits().to_le_bytes());
            }
            feed(&[*y as u8]);
        }
        format!("{h:016x}")
    }
}

fn check_labels(labels: &[i8]) -> Result<()> {
    if let Some(y) = labels.iter().find(|y| y.abs() != 1) {
        return Err(Error::invalid(format!("labels must be +1 or -1, got {y}")));
    }
    if !labels.contains(&1) || !labels.contains(&-1) {
        return Err(Error::invalid("both classes must be present"));
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainedModel {
    pub a: Vec<f64>,
    pub gamma: f64,
    pub train_id: String,
}

/// Optimum of the training problem together with its certificates.
#[derive(Debug, Clone, PartialEq)]
pub struct SvmSolution {
    pub model: TrainedModel,
    pub alpha: Vec<f64>,
    pub slack: Vec<f64>,
    /// `y_i f(x_i)` on the training points.
    pub margins: Vec<f64>,
    pub objective: f64,
    pub dual_objective: f64,
    pub kkt_residual: f64,
    pub iterations: usize,
}

impl SvmSolution {
    pub fn total_slack(&self) -> f64 {
        self.slack.iter().sum()
    }
}

/// Primal objective `sum a^2 + gamma sum max(0, 1 - y_i (G a)_i)`.
pub fn primal_objective(gram: &DMatrix<f64>, labels: &[i8], gamma: f64, a: &[f64]) -> f64 {
    let a = DVector::from_column_slice(a);
    let f = gram * &a;
    let hinge: f64 = f
        .iter()
        .zip(labels)
        .map(|(fi, &y)| (1.0 - f64::from(y) * fi).max(0.0))
        .sum();
    a.norm_squared() + gamma * hinge
}

pub fn train(gram: &GramMatrix, labels: &[i8], gamma: f64) -> Result<TrainedModel> {
    Ok(solve(gram, labels, gamma, "")?.model)
}

/// Trains and returns the full solution; `train_id` is copied into the model.
pub fn solve(gram: &GramMatrix, labels: &[i8], gamma: f64, train_id: &str) -> Result<SvmSolution> {
    if !(gamma > 0.0 && gamma.is_finite()) {
        return Err(Error::invalid(format!("gamma must be positive, got {gamma}")));
    }
    let m = gram.len();
    if labels.len() != m {
        return Err(Error::invalid(format!("{} labels for a {m}x{m} Gram matrix", labels.len())));
    }
    if labels.iter().any(|y| y.abs() != 1) {
        return Err(Error::invalid("labels must be +1 or -1"));
    }
    let g = gram.values();
    let y = DVector::from_iterator(m, labels.iter().map(|&v| f64::from(v)));
    let g2 = g * g;
    let q = DMatrix::from_fn(m, m, |i, j| 0.5 * y[i] * y[j] * g2[(i, j)]);

    let (alpha, iterations) = box_qp(&q, gamma)?;
    let grad = &q * &alpha - DVector::repeat(m, 1.0);
    let kkt_residual = projected_residual(&alpha, &grad, gamma);

    let a = g * alpha.component_mul(&y) * 0.5;
    let f = g * &a;
    let margins: Vec<f64> = f.iter().zip(y.iter()).map(|(fi, yi)| fi * yi).collect();
    let slack: Vec<f64> = margins.iter().map(|mg| (1.0 - mg).max(0.0)).collect();
    let objective = a.norm_squared() + gamma * slack.iter().sum::<f64>();
    let dual_objective = alpha.sum() - 0.5 * alpha.dot(&(&q * &alpha));
    Ok(SvmSolution {
        model: TrainedModel {
            a: a.iter().copied().collect(),
            gamma,
            train_id: train_id.to_string(),
        },
        alpha: alpha.iter().copied().collect(),
        slack,
        margins,
        objective,
        dual_objective,
        kkt_residual,
        iterations,
    })
}

fn projected_residual(alpha: &DVector<f64>, grad: &DVector<f64>, upper: f64) -> f64 {
    alpha
        .iter()
        .zip(grad.iter())
        .map(|(a, g)| (a - (a - g).clamp(0.0, upper)).abs())
        .fold(0.0, f64::max)
}

/// Interior-point solve of `min 1/2 x^T Q x - 1^T x` on the box `[0, upper]^m`, then a polish.
///
/// Mehrotra predictor-corrector on the bound complementarity `x z = mu`, `(upper - x) w = mu`.
/// The Newton matrix `Q + Z/X + W/S` is positive definite even when `Q` is singular.
fn box_qp(q: &DMatrix<f64>, upper: f64) -> Result<(DVector<f64>, usize)> {
    const MAX_ITERS: usize = 200;
    let m = q.nrows();
    let ones = DVector::repeat(m, 1.0);
    let mut x = DVector::repeat(m, upper / 2.0);
    let mut z = DVector::repeat(m, 1.0);
    let mut w = DVector::repeat(m, 1.0);
    let residual_at = |x: &DVector<f64>| projected_residual(x, &(q * x - &ones), upper);

    for iter in 0..MAX_ITERS {
        let s = x.map(|v| upper - v);
        let rd = q * &x - &ones - &z + &w;
        let mu = (x.dot(&z) + s.dot(&w)) / (2 * m) as f64;
        if rd.amax() < 1e-12 && mu < 1e-14 * upper.max(1.0) {
            return Ok(polish(q, x, &z, &w, upper, iter));
        }

        let mut h = q.clone();
        for i in 0..m {
            h[(i, i)] += z[i] / x[i] + w[i] / s[i];
        }
        let Some(chol) = h.cholesky() else {
            // Only happens once the barrier terms dwarf Q, i.e. at the end.
            let residual = residual_at(&x);
            if residual <= KKT_TOL {
                return Ok(polish(q, x, &z, &w, upper, iter));
            }
            return Err(Error::SolverStall { iterations: iter, residual });
        };
        let solve = |rl: &DVector<f64>, ru: &DVector<f64>| {
            let rhs = -&rd + rl.component_div(&x) - ru.component_div(&s);
            let dx = chol.solve(&rhs);
            let dz = (rl - z.component_mul(&dx)).component_div(&x);
            let dw = (ru + w.component_mul(&dx)).component_div(&s);
            (dx, dz, dw)
        };
        let step = |dx: &DVector<f64>, dz: &DVector<f64>, dw: &DVector<f64>| {
            let mut t: f64 = 1.0;
            for i in 0..m {
                if dx[i] < 0.0 {
                    t = t.min(-x[i] / dx[i]);
                }
                if dx[i] > 0.0 {
                    t = t.min(s[i] / dx[i]);
                }
                if dz[i] < 0.0 {
                    t = t.min(-z[i] / dz[i]);
                }
                if dw[i] < 0.0 {
                    t = t.min(-w[i] / dw[i]);
                }
            }
            t
        };

        // predictor
        let (ax, az, aw) = solve(&-x.component_mul(&z), &-s.component_mul(&w));
        let ta = step(&ax, &az, &aw);
        let mu_aff = ((&x + &ax * ta).dot(&(&z + &az * ta)) + (&s - &ax * ta).dot(&(&w + &aw * ta))) / (2 * m) as f64;
        let sigma = (mu_aff / mu).powi(3);

        // corrector
        let rl = DVector::from_fn(m, |i, _| sigma * mu - x[i] * z[i] - ax[i] * az[i]);
        let ru = DVector::from_fn(m, |i, _| sigma * mu - s[i] * w[i] + ax[i] * aw[i]);
        let (dx, dz, dw) = solve(&rl, &ru);
        let t = (0.995 * step(&dx, &dz, &dw)).min(1.0);
        x += &dx * t;
        z += &dz * t;
        w += &dw * t;
    }
    let residual = residual_at(&x);
    if residual <= KKT_TOL {
        return Ok(polish(q, x, &z, &w, upper, MAX_ITERS));
    }
    Err(Error::SolverStall {
        iterations: MAX_ITERS,
        residual,
    })
}

/// Snaps variables whose bound multiplier dominates onto the bound and re-solves the free block.
/// Keeps the interior-point iterate if the polished point is infeasible or no better.
fn polish(q: &DMatrix<f64>, x: DVector<f64>, z: &DVector<f64>, w: &DVector<f64>, upper: f64, iters: usize) -> (DVector<f64>, usize) {
    let m = x.len();
    let ones = DVector::repeat(m, 1.0);
    let mut y = x.clone();
    let mut free = Vec::new();
    for i in 0..m {
        if z[i] > x[i] {
            y[i] = 0.0;
        } else if w[i] > upper - x[i] {
            y[i] = upper;
        } else {
            free.push(i);
        }
    }
    if !free.is_empty() {
        let n = free.len();
        let g = q * &y - &ones;
        let qff = DMatrix::from_fn(n, n, |a, b| q[(free[a], free[b])]);
        let gf = DVector::from_iterator(n, free.iter().map(|&i| g[i]));
        let Ok(pinv) = qff.pseudo_inverse(1e-12 * q.amax().max(1.0)) else {
            return (x, iters);
        };
        let d = pinv * -gf;
        for (k, &i) in free.iter().enumerate() {
            y[i] += d[k];
        }
    }
    let feasible = y.iter().all(|v| (0.0..=upper).contains(v));
    let before = projected_residual(&x, &(q * &x - &ones), upper);
    let after = projected_residual(&y, &(q * &y - &ones), upper);
    if feasible && after <= before {
        (y, iters)
    } else {
        (x, iters)
    }
}

pub fn decide(model: &TrainedModel, kernel_row: &[f64]) -> Result<f64> {
    if kernel_row.len() != model.a.len() {
        return Err(Error::invalid(format!(
            "kernel row has {} entries, model has {}",
            kernel_row.len(),
            model.a.len()
        )));
    }
    Ok(model.a.iter().zip(kernel_row).map(|(a, k)| a * k).sum())
}

/// Fraction of rows whose decision sign matches the label; a zero score counts as wrong.
pub fn accuracy(model: &TrainedModel, rows: &DMatrix<f64>, labels: &[i8]) -> Result<f64> {
    if rows.nrows() != labels.len() {
        return Err(Error::invalid(format!("{} rows but {} labels", rows.nrows(), labels.len())));
    }
    if labels.is_empty() {
        return Err(Error::invalid("empty test set"));
    }
    let mut correct = 0usize;
    for (i, &y) in labels.iter().enumerate() {
        let row: Vec<f64> = rows.row(i).iter().copied().collect();
        if decide(model, &row)? * f64::from(y) > 0.0 {
            correct += 1;
        }
    }
    Ok(correct as f64 / labels.len() as f64)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ConditionPolicy {
    None,
    #[default]
    Clip,
    Shift,
}

impl std::str::FromStr for ConditionPolicy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "none" => Ok(Self::None),
            "clip" => Ok(Self::Clip),
            "shift" => Ok(Self::Shift),
            other => Err(Error::invalid(format!("unknown conditioning policy '{other}'"))),
        }
    }
}

/// Makes a Gram matrix positive semidefinite.
///
/// Eigenvalues above `-1e-12 * lambda_max` count as nonnegative and leave the matrix untouched.
/// Conditioned entries may leave `[0, 1]` by up to `|lambda_min|`.
pub fn condition_gram(gram: &GramMatrix, policy: ConditionPolicy) -> GramMatrix {
    if policy == ConditionPolicy::None {
        return gram.clone();
    }
    let eig = SymmetricEigen::new(gram.values.clone());
    let lmin = eig.eigenvalues.min();
    let lmax = eig.eigenvalues.amax();
    if lmin >= -1e-12 * lmax.max(1.0) {
        return gram.clone();
    }
    let values = match policy {
        ConditionPolicy::Clip => {
            let clipped = eig.eigenvalues.map(|l| l.max(0.0));
            let v = &eig.eigenvectors;
            let rebuilt = v * DMatrix::from_diagonal(&clipped) * v.transpose();
            (&rebuilt + rebuilt.transpose()) * 0.5
        }
        ConditionPolicy::Shift => {
            let m = gram.len();
            &gram.values + DMatrix::identity(m, m) * -lmin
        }
        ConditionPolicy::None => unreachable!(),
    };
    GramMatrix {
        values,
        provenance: gram.provenance,
        seed: gram.seed,
    }
}
