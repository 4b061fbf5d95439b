//! Exact Gaussian-process regression on 2-D inputs with a squared-exponential
//! kernel.
//!
//! Each model maps a patient position to one coordinate of the next-step
//! displacement. Hyperparameters are fitted by maximizing the log marginal
//! likelihood with projected gradient ascent in log-space.

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::room::Point2;

const LN_2PI: f64 = 1.837_877_066_409_345_5;

/// Squared-exponential kernel hyperparameters.
///
/// `length_scales` are in meters; the kernel's inverse metric is
/// `diag(1 / length_scale^2)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GpHyperparams {
    pub signal_variance: f64,
    pub length_scales: [f64; 2],
    pub noise_variance: f64,
}

impl Default for GpHyperparams {
    fn default() -> Self {
        Self {
            signal_variance: 1.0,
            length_scales: [1.0, 1.0],
            noise_variance: 0.01,
        }
    }
}

impl GpHyperparams {
    pub fn is_valid(&self) -> bool {
        let pos = |v: f64| v.is_finite() && v > 0.0;
        pos(self.signal_variance) && self.length_scales.iter().all(|l| pos(*l)) && pos(self.noise_variance)
    }

    fn to_log(self) -> [f64; 4] {
        [
            self.signal_variance.ln(),
            self.length_scales[0].ln(),
            self.length_scales[1].ln(),
            self.noise_variance.ln(),
        ]
    }

    fn from_log(t: &[f64; 4]) -> Self {
        Self {
            signal_variance: t[0].exp(),
            length_scales: [t[1].exp(), t[2].exp()],
            noise_variance: t[3].exp(),
        }
    }
}

/// Squared-exponential covariance between two inputs.
pub fn kernel(a: &Point2, b: &Point2, h: &GpHyperparams) -> f64 {
    let dx = (a.x - b.x) / h.length_scales[0];
    let dy = (a.y - b.y) / h.length_scales[1];
    h.signal_variance * (-0.5 * (dx * dx + dy * dy)).exp()
}

/// Univariate normal.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Gaussian1 {
    pub mean: f64,
    pub variance: f64,
}

impl Gaussian1 {
    pub fn std_dev(&self) -> f64 {
        self.variance.max(0.0).sqrt()
    }

    pub fn log_pdf(&self, x: f64) -> f64 {
        let v = self.variance.max(f64::MIN_POSITIVE);
        let r = x - self.mean;
        -0.5 * (LN_2PI + v.ln() + r * r / v)
    }

    pub fn pdf(&self, x: f64) -> f64 {
        self.log_pdf(x).exp()
    }
}

/// Hyperparameter search settings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FitConfig {
    /// Lower box bound for every hyperparameter.
    pub lower: f64,
    /// Upper box bound for every hyperparameter.
    pub upper: f64,
    /// Lower bound on the noise variance (at least `lower`).
    pub noise_floor: f64,
    /// Gradient-ascent iterations per start.
    pub max_iters: usize,
    /// Extra starts derived from the initial guess by rescaling length
    /// scales and noise.
    pub restarts: usize,
    /// Stop when the projected log-space gradient norm drops below this.
    pub grad_tol: f64,
}

impl Default for FitConfig {
    fn default() -> Self {
        Self {
            lower: 1e-4,
            upper: 1e4,
            noise_floor: 1e-4,
            max_iters: 60,
            restarts: 2,
            grad_tol: 1e-5,
        }
    }
}

const JITTER_START: f64 = 1e-8;
const JITTER_MAX: f64 = 1e-2;

/// Lower Cholesky factor of `K + noise * I`, escalating diagonal jitter from
/// `1e-8 * mean(diag)` by tenfold steps up to `1e-2 * mean(diag)` if needed.
fn factorize(mut k: DMatrix<f64>) -> Option<(DMatrix<f64>, f64)> {
    let n = k.nrows();
    let mean_diag = k.diagonal().mean();
    if let Some(c) = k.clone().cholesky() {
        return Some((c.unpack(), 0.0));
    }
    let mut jitter = JITTER_START;
    let mut added = 0.0;
    while jitter <= JITTER_MAX * (1.0 + 1e-12) {
        let extra = jitter * mean_diag - added;
        for i in 0..n {
            k[(i, i)] += extra;
        }
        added = jitter * mean_diag;
        if let Some(c) = k.clone().cholesky() {
            return Some((c.unpack(), added));
        }
        jitter *= 10.0;
    }
    None
}

fn covariance(inputs: &[Point2], h: &GpHyperparams) -> DMatrix<f64> {
    let n = inputs.len();
    let mut k = DMatrix::zeros(n, n);
    for i in 0..n {
        for j in 0..=i {
            let v = kernel(&inputs[i], &inputs[j], h);
            k[(i, j)] = v;
            k[(j, i)] = v;
        }
        k[(i, i)] += h.noise_variance;
    }
    k
}

/// A GP conditioned on training data (or the zero-mean prior when empty).
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(try_from = "RawModel", into = "RawModel")]
pub struct GpModel {
    inputs: Vec<Point2>,
    targets: Vec<f64>,
    hyperparams: GpHyperparams,
    /// Rows of the lower Cholesky factor, packed: row `i` holds `i + 1` entries.
    chol_rows: Vec<f64>,
    /// `(K + noise I)^-1 y`
    weights: Vec<f64>,
    jitter: f64,
}

#[derive(Serialize, Deserialize)]
struct RawModel {
    hyperparams: GpHyperparams,
    inputs: Vec<Point2>,
    targets: Vec<f64>,
}

impl TryFrom<RawModel> for GpModel {
    type Error = Error;
    fn try_from(raw: RawModel) -> Result<Self> {
        GpModel::condition(raw.inputs, raw.targets, raw.hyperparams)
    }
}

impl From<GpModel> for RawModel {
    fn from(m: GpModel) -> Self {
        RawModel {
            hyperparams: m.hyperparams,
            inputs: m.inputs,
            targets: m.targets,
        }
    }
}

impl GpModel {
    /// The untrained prior `N(0, signal_variance)` everywhere.
    pub fn prior(hyperparams: GpHyperparams) -> Self {
        Self {
            inputs: Vec::new(),
            targets: Vec::new(),
            hyperparams,
            chol_rows: Vec::new(),
            weights: Vec::new(),
            jitter: 0.0,
        }
    }

    /// Conditions on data with fixed hyperparameters.
    pub fn condition(inputs: Vec<Point2>, targets: Vec<f64>, hyperparams: GpHyperparams) -> Result<Self> {
        if !hyperparams.is_valid() {
            return Err(Error::TrainingData(format!("invalid hyperparameters {hyperparams:?}")));
        }
        if inputs.len() != targets.len() {
            return Err(Error::TrainingData(format!(
                "{} inputs but {} targets",
                inputs.len(),
                targets.len()
            )));
        }
        if inputs.iter().any(|p| !p.is_finite()) || targets.iter().any(|t| !t.is_finite()) {
            return Err(Error::TrainingData("non-finite training value".into()));
        }
        if inputs.is_empty() {
            return Ok(Self::prior(hyperparams));
        }
        let (l, jitter) =
            factorize(covariance(&inputs, &hyperparams)).ok_or(Error::ModelFit { hyperparams })?;
        let y = DVector::from_column_slice(&targets);
        let z = l.solve_lower_triangular(&y).ok_or(Error::ModelFit { hyperparams })?;
        let weights = l
            .transpose()
            .solve_upper_triangular(&z)
            .ok_or(Error::ModelFit { hyperparams })?;
        let n = inputs.len();
        let mut chol_rows = Vec::with_capacity(n * (n + 1) / 2);
        for i in 0..n {
            chol_rows.extend((0..=i).map(|j| l[(i, j)]));
        }
        Ok(Self {
            inputs,
            targets,
            hyperparams,
            chol_rows,
            weights: weights.as_slice().to_vec(),
            jitter,
        })
    }

    /// Fits hyperparameters by maximizing the log evidence, starting from
    /// `init` and a few rescaled variants of it, and conditions on the data
    /// with the best ones found.
    pub fn fit(inputs: Vec<Point2>, targets: Vec<f64>, init: GpHyperparams, cfg: &FitConfig) -> Result<Self> {
        if inputs.len() < 2 {
            return Err(Error::TrainingData(format!(
                "need at least 2 training pairs, got {}",
                inputs.len()
            )));
        }
        if inputs.len() != targets.len() {
            return Err(Error::TrainingData(format!(
                "{} inputs but {} targets",
                inputs.len(),
                targets.len()
            )));
        }
        if !init.is_valid() {
            return Err(Error::TrainingData(format!("invalid initial hyperparameters {init:?}")));
        }
        let bounds = LogBounds::new(cfg);
        let mut starts = vec![bounds.clamp(init.to_log())];
        let scales = [0.25_f64, 4.0, 0.5, 2.0];
        for s in scales.iter().take(cfg.restarts) {
            let mut t = init.to_log();
            t[1] += s.ln();
            t[2] += s.ln();
            t[3] -= s.ln();
            starts.push(bounds.clamp(t));
        }

        let mut best: Option<([f64; 4], f64)> = None;
        for start in starts {
            if let Some((t, f)) = ascend(&inputs, &targets, start, &bounds, cfg) {
                if best.map_or(true, |(_, bf)| f > bf) {
                    best = Some((t, f));
                }
            }
        }
        let (t, _) = best.ok_or(Error::ModelFit { hyperparams: init })?;
        Self::condition(inputs, targets, GpHyperparams::from_log(&t))
    }

    pub fn hyperparams(&self) -> &GpHyperparams {
        &self.hyperparams
    }

    pub fn inputs(&self) -> &[Point2] {
        &self.inputs
    }

    pub fn targets(&self) -> &[f64] {
        &self.targets
    }

    pub fn len(&self) -> usize {
        self.inputs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.inputs.is_empty()
    }

    /// Diagonal jitter that had to be added to factorize the kernel matrix.
    pub fn jitter(&self) -> f64 {
        self.jitter
    }

    /// `-1/2 y' A^-1 y - 1/2 log|A| - n/2 log 2 pi` with `A = K + noise I`.
    pub fn log_evidence(&self) -> f64 {
        let n = self.inputs.len();
        if n == 0 {
            return 0.0;
        }
        let quad: f64 = self.targets.iter().zip(&self.weights).map(|(y, a)| y * a).sum();
        let log_det: f64 = (0..n).map(|i| self.chol_diag(i).ln()).sum::<f64>() * 2.0;
        -0.5 * quad - 0.5 * log_det - 0.5 * n as f64 * (2.0 * PI).ln()
    }

    fn chol_diag(&self, i: usize) -> f64 {
        self.chol_rows[i * (i + 1) / 2 + i]
    }

    /// Posterior of the latent function at `query` (noise excluded).
    pub fn predict(&self, query: &Point2) -> Gaussian1 {
        let h = &self.hyperparams;
        let prior = h.signal_variance;
        if self.inputs.is_empty() {
            return Gaussian1 { mean: 0.0, variance: prior };
        }
        let n = self.inputs.len();
        let ks: Vec<f64> = self.inputs.iter().map(|x| kernel(x, query, h)).collect();
        let mean = ks.iter().zip(&self.weights).map(|(k, w)| k * w).sum();

        // Forward substitution L v = k*.
        let mut v = vec![0.0; n];
        let mut off = 0;
        let mut vv = 0.0;
        for i in 0..n {
            let row = &self.chol_rows[off..off + i + 1];
            let s: f64 = row[..i].iter().zip(&v[..i]).map(|(l, v)| l * v).sum();
            let vi = (ks[i] - s) / row[i];
            v[i] = vi;
            vv += vi * vi;
            off += i + 1;
        }
        Gaussian1 {
            mean,
            variance: (prior - vv).clamp(0.0, prior),
        }
    }

    /// Predictive distribution of a new noisy observation at `query`.
    pub fn predict_observation(&self, query: &Point2) -> Gaussian1 {
        let g = self.predict(query);
        Gaussian1 {
            mean: g.mean,
            variance: g.variance + self.hyperparams.noise_variance,
        }
    }

    /// Posterior mean only; skips the variance solve.
    pub fn predict_mean(&self, query: &Point2) -> f64 {
        self.inputs
            .iter()
            .zip(&self.weights)
            .map(|(x, w)| kernel(x, query, &self.hyperparams) * w)
            .sum()
    }
}

struct LogBounds {
    lo: [f64; 4],
    hi: [f64; 4],
}

impl LogBounds {
    fn new(cfg: &FitConfig) -> Self {
        let (lo, hi) = (cfg.lower.ln(), cfg.upper.ln());
        Self {
            lo: [lo, lo, lo, cfg.noise_floor.max(cfg.lower).ln()],
            hi: [hi; 4],
        }
    }

    fn clamp(&self, mut t: [f64; 4]) -> [f64; 4] {
        for i in 0..4 {
            t[i] = t[i].clamp(self.lo[i], self.hi[i]);
        }
        t
    }

    /// Zeroes gradient components that push out of the box.
    fn project(&self, t: &[f64; 4], mut g: [f64; 4]) -> [f64; 4] {
        for i in 0..4 {
            if (t[i] <= self.lo[i] && g[i] < 0.0) || (t[i] >= self.hi[i] && g[i] > 0.0) {
                g[i] = 0.0;
            }
        }
        g
    }
}

/// Log evidence and its gradient with respect to the log hyperparameters.
fn evidence_and_grad(inputs: &[Point2], targets: &[f64], t: &[f64; 4]) -> Option<(f64, [f64; 4])> {
    let h = GpHyperparams::from_log(t);
    let n = inputs.len();
    let a = covariance(inputs, &h);
    let (l, _) = factorize(a)?;
    let y = DVector::from_column_slice(targets);
    let z = l.solve_lower_triangular(&y)?;
    let alpha = l.transpose().solve_upper_triangular(&z)?;
    let linv = l.solve_lower_triangular(&DMatrix::identity(n, n))?;
    let ainv = linv.transpose() * &linv;

    let log_det: f64 = l.diagonal().iter().map(|d| d.ln()).sum::<f64>() * 2.0;
    let f = -0.5 * y.dot(&alpha) - 0.5 * log_det - 0.5 * n as f64 * LN_2PI;

    // d/dtheta_j = 1/2 tr((alpha alpha' - A^-1) dA/dtheta_j)
    let mut g = [0.0; 4];
    let inv_l2 = [
        1.0 / (h.length_scales[0] * h.length_scales[0]),
        1.0 / (h.length_scales[1] * h.length_scales[1]),
    ];
    for i in 0..n {
        for j in 0..n {
            let w = alpha[i] * alpha[j] - ainv[(i, j)];
            let dx = inputs[i].x - inputs[j].x;
            let dy = inputs[i].y - inputs[j].y;
            let kf = h.signal_variance * (-0.5 * (dx * dx * inv_l2[0] + dy * dy * inv_l2[1])).exp();
            g[0] += w * kf;
            g[1] += w * kf * dx * dx * inv_l2[0];
            g[2] += w * kf * dy * dy * inv_l2[1];
        }
        g[3] += (alpha[i] * alpha[i] - ainv[(i, i)]) * h.noise_variance;
    }
    for gi in &mut g {
        *gi *= 0.5;
    }
    Some((f, g))
}

fn ascend(
    inputs: &[Point2],
    targets: &[f64],
    start: [f64; 4],
    bounds: &LogBounds,
    cfg: &FitConfig,
) -> Option<([f64; 4], f64)> {
    let (mut f, mut g) = evidence_and_grad(inputs, targets, &start)?;
    let mut t = start;
    let mut step = 0.5;
    for _ in 0..cfg.max_iters {
        let dir = bounds.project(&t, g);
        let norm = dir.iter().map(|d| d * d).sum::<f64>().sqrt();
        if norm < cfg.grad_tol {
            break;
        }
        let mut accepted = false;
        while step > 1e-8 {
            let mut cand = t;
            for i in 0..4 {
                cand[i] += step * dir[i] / norm;
            }
            let cand = bounds.clamp(cand);
            let gain: f64 = (0..4).map(|i| g[i] * (cand[i] - t[i])).sum();
            if let Some((fc, gc)) = evidence_and_grad(inputs, targets, &cand) {
                if fc >= f + 1e-4 * gain && fc > f {
                    t = cand;
                    f = fc;
                    g = gc;
                    step = (step * 2.0).min(2.0);
                    accepted = true;
                    break;
                }
            }
            step *= 0.5;
        }
        if !accepted {
            break;
        }
    }
    Some((t, f))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use rand_distr::StandardNormal;

    fn unit() -> GpHyperparams {
        GpHyperparams {
            signal_variance: 1.0,
            length_scales: [1.0, 1.0],
            noise_variance: 0.01,
        }
    }

    #[test]
    fn kernel_values() {
        let h = unit();
        let a = Point2::new(0.3, -1.2);
        assert_eq!(kernel(&a, &a, &h), 1.0);
        let k = kernel(&Point2::new(0.0, 0.0), &Point2::new(2.0, 0.0), &h);
        assert!((k - (-2.0f64).exp()).abs() < 1e-15);
        assert!((k - 0.1353).abs() < 1e-4);
        let b = Point2::new(1.0, 0.4);
        assert_eq!(kernel(&a, &b, &h), kernel(&b, &a, &h));
    }

    #[test]
    fn empty_model_is_prior() {
        let h = GpHyperparams { signal_variance: 2.5, ..unit() };
        let g = GpModel::prior(h).predict(&Point2::new(1.0, 2.0));
        assert_eq!(g.mean, 0.0);
        assert_eq!(g.variance, 2.5);
    }

    #[test]
    fn single_point_evidence_closed_form() {
        let h = GpHyperparams { signal_variance: 0.7, noise_variance: 0.2, ..unit() };
        let m = GpModel::condition(vec![Point2::new(1.0, 1.0)], vec![0.0], h).unwrap();
        let expected = -0.5 * (0.7f64 + 0.2).ln() - 0.5 * (2.0 * PI).ln();
        assert!((m.log_evidence() - expected).abs() < 1e-14);
    }

    #[test]
    fn single_point_mean_shrinks_toward_target() {
        let y = 0.8;
        for noise in [1e-2, 1e-4, 1e-6] {
            let h = GpHyperparams { noise_variance: noise, ..unit() };
            let m = GpModel::condition(vec![Point2::new(0.5, 0.5)], vec![y], h).unwrap();
            let g = m.predict(&Point2::new(0.5, 0.5));
            assert!((g.mean - y / (1.0 + noise)).abs() < 1e-12);
        }
    }

    #[test]
    fn far_query_reverts_to_prior() {
        let m = GpModel::condition(
            vec![Point2::new(0.0, 0.0), Point2::new(0.5, 0.0)],
            vec![1.0, -1.0],
            unit(),
        )
        .unwrap();
        let g = m.predict(&Point2::new(50.0, 50.0));
        assert!(g.mean.abs() < 1e-12);
        assert!((g.variance - 1.0).abs() < 1e-12);
    }

    #[test]
    fn zero_targets_shrink_noise_to_floor() {
        let inputs: Vec<Point2> = (0..20).map(|i| Point2::new(i as f64 * 0.2, (i % 3) as f64 * 0.3)).collect();
        let cfg = FitConfig::default();
        let m = GpModel::fit(inputs, vec![0.0; 20], unit(), &cfg).unwrap();
        assert!(m.hyperparams().noise_variance < 1e-3, "{:?}", m.hyperparams());
        let g = m.predict(&Point2::new(1.0, 0.3));
        assert_eq!(g.mean, 0.0);
    }

    #[test]
    fn fit_never_loses_evidence() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let inputs: Vec<Point2> = (0..40)
            .map(|_| Point2::new(rng.random_range(0.0..3.0), rng.random_range(0.0..3.0)))
            .collect();
        let targets: Vec<f64> = inputs.iter().map(|p| (p.x * 1.3).sin() + 0.1 * p.y).collect();
        let init = unit();
        let base = GpModel::condition(inputs.clone(), targets.clone(), init).unwrap().log_evidence();
        let fitted = GpModel::fit(inputs.clone(), targets.clone(), init, &FitConfig::default()).unwrap();
        assert!(fitted.log_evidence() >= base - 1e-9);

        // Refitting from the returned point only creeps further uphill.
        let again = GpModel::fit(inputs, targets, *fitted.hyperparams(), &FitConfig::default()).unwrap();
        assert!((again.log_evidence() - fitted.log_evidence()).abs() < 1e-3 * fitted.log_evidence().abs(), "{} vs {}", again.log_evidence(), fitted.log_evidence());
        assert!(again.log_evidence() >= fitted.log_evidence() - 1e-9);
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let inputs: Vec<Point2> = (0..15)
            .map(|_| Point2::new(rng.random_range(0.0..2.0), rng.random_range(0.0..2.0)))
            .collect();
        let targets: Vec<f64> = (0..15).map(|_| rng.random_range(-1.0..1.0)).collect();
        let t = [0.2f64.ln(), 0.7f64.ln(), 1.3f64.ln(), 0.05f64.ln()];
        let (_, g) = evidence_and_grad(&inputs, &targets, &t).unwrap();
        for i in 0..4 {
            let mut tp = t;
            let mut tm = t;
            tp[i] += 1e-5;
            tm[i] -= 1e-5;
            let fd = (evidence_and_grad(&inputs, &targets, &tp).unwrap().0
                - evidence_and_grad(&inputs, &targets, &tm).unwrap().0)
                / 2e-5;
            assert!((fd - g[i]).abs() < 1e-5 * (1.0 + fd.abs()), "dim {i}: fd {fd} vs {}", g[i]);
        }
    }

    #[test]
    fn recovers_generating_hyperparameters() {
        let truth = GpHyperparams {
            signal_variance: 1.0,
            length_scales: [0.5, 0.5],
            noise_variance: 0.01,
        };
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        let inputs: Vec<Point2> = (0..200)
            .map(|_| Point2::new(rng.random_range(0.0..4.0), rng.random_range(0.0..4.0)))
            .collect();
        let l = covariance(&inputs, &truth).cholesky().unwrap().unpack();
        let z = DVector::from_iterator(200, (0..200).map(|_| rng.sample::<f64, _>(StandardNormal)));
        let y = l * z;
        let m = GpModel::fit(inputs, y.as_slice().to_vec(), GpHyperparams::default(), &FitConfig::default()).unwrap();
        let h = m.hyperparams();
        let within = |got: f64, want: f64| got / want < 2.0 && want / got < 2.0;
        assert!(within(h.signal_variance, 1.0), "{h:?}");
        assert!(within(h.length_scales[0], 0.5), "{h:?}");
        assert!(within(h.length_scales[1], 0.5), "{h:?}");
        assert!(within(h.noise_variance, 0.01), "{h:?}");
    }

    #[test]
    fn duplicate_point_barely_moves_prediction() {
        let h = GpHyperparams { noise_variance: 1e-9, ..unit() };
        let inputs: Vec<Point2> = (0..8).map(|i| Point2::new(i as f64 * 0.4, 0.0)).collect();
        let targets: Vec<f64> = inputs.iter().map(|p| p.x.sin()).collect();
        let base = GpModel::condition(inputs.clone(), targets.clone(), h).unwrap();
        let mut inputs2 = inputs.clone();
        let mut targets2 = targets.clone();
        inputs2.push(inputs[3]);
        targets2.push(targets[3]);
        let dup = GpModel::condition(inputs2, targets2, h).unwrap();
        let (a, b) = (base.predict(&inputs[3]), dup.predict(&inputs[3]));
        assert!((a.mean - b.mean).abs() < 1e-6);
        assert!((a.variance - b.variance).abs() < 1e-6);
    }

    #[test]
    fn noise_away_from_optimum_lowers_evidence() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let inputs: Vec<Point2> = (0..60)
            .map(|_| Point2::new(rng.random_range(0.0..3.0), rng.random_range(0.0..3.0)))
            .collect();
        let targets: Vec<f64> = inputs
            .iter()
            .map(|p| (2.0 * p.x).cos() * 0.3 + 0.05 * rng.sample::<f64, _>(StandardNormal))
            .collect();
        let m = GpModel::fit(inputs.clone(), targets.clone(), unit(), &FitConfig::default()).unwrap();
        let h = *m.hyperparams();
        for factor in [0.25, 4.0] {
            let perturbed = GpHyperparams { noise_variance: h.noise_variance * factor, ..h };
            let other = GpModel::condition(inputs.clone(), targets.clone(), perturbed).unwrap();
            assert!(other.log_evidence() < m.log_evidence());
        }
    }

    #[test]
    fn rejects_bad_training_sets() {
        let cfg = FitConfig::default();
        assert!(GpModel::fit(vec![Point2::new(0.0, 0.0)], vec![1.0], unit(), &cfg).is_err());
        assert!(GpModel::fit(vec![Point2::new(0.0, 0.0); 3], vec![1.0; 2], unit(), &cfg).is_err());
        let bad = GpHyperparams { noise_variance: -1.0, ..unit() };
        assert!(GpModel::condition(vec![Point2::new(0.0, 0.0)], vec![1.0], bad).is_err());
    }

    #[test]
    fn serde_round_trip_refactorizes() {
        let m = GpModel::condition(
            vec![Point2::new(0.0, 0.0), Point2::new(1.0, 0.5)],
            vec![0.3, -0.2],
            unit(),
        )
        .unwrap();
        let s = serde_json::to_string(&m).unwrap();
        let back: GpModel = serde_json::from_str(&s).unwrap();
        let q = Point2::new(0.4, 0.1);
        assert_eq!(m.predict(&q), back.predict(&q));
    }
}
