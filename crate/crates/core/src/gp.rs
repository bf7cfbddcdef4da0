//! Gaussian-process regression with a squared-exponential (RBF) kernel.
//!
//! Inputs live in the unit box. Targets are standardized per fit; all
//! posterior quantities are returned in raw target units.

use std::f64::consts::{LN_10, PI};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct KernelParams {
    lengthscales: Vec<f64>,
    signal_variance: f64,
    noise_variance: f64,
    isotropic: bool,
}

impl KernelParams {
    pub fn new(lengthscales: Vec<f64>, signal_variance: f64, noise_variance: f64) -> Result<Self> {
        if lengthscales.is_empty() || lengthscales.iter().any(|l| !(*l > 0.0) || !l.is_finite()) {
            return Err(Error::InvalidParameter(
                "lengthscales must be positive".into(),
            ));
        }
        if !(signal_variance > 0.0) || !signal_variance.is_finite() {
            return Err(Error::InvalidParameter(
                "signal variance must be positive".into(),
            ));
        }
        if !(noise_variance >= 0.0) || !noise_variance.is_finite() {
            return Err(Error::InvalidParameter(
                "noise variance must be non-negative".into(),
            ));
        }
        let isotropic = lengthscales.iter().all(|l| *l == lengthscales[0]);
        Ok(Self {
            lengthscales,
            signal_variance,
            noise_variance,
            isotropic,
        })
    }

    pub fn isotropic(
        dim: usize,
        lengthscale: f64,
        signal_variance: f64,
        noise_variance: f64,
    ) -> Result<Self> {
        Self::new(vec![lengthscale; dim], signal_variance, noise_variance)
    }

    pub fn dim(&self) -> usize {
        self.lengthscales.len()
    }

    pub fn lengthscales(&self) -> &[f64] {
        &self.lengthscales
    }

    pub fn signal_variance(&self) -> f64 {
        self.signal_variance
    }

    pub fn noise_variance(&self) -> f64 {
        self.noise_variance
    }

    fn is_isotropic(&self) -> bool {
        self.isotropic
    }

    fn eval(&self, a: &[f64], b: &[f64]) -> f64 {
        let r2 = if self.is_isotropic() {
            let d2: f64 = a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum();
            d2 / (self.lengthscales[0] * self.lengthscales[0])
        } else {
            a.iter()
                .zip(b)
                .zip(&self.lengthscales)
                .map(|((x, y), l)| ((x - y) / l).powi(2))
                .sum()
        };
        self.signal_variance * (-0.5 * r2).exp()
    }
}

/// `σ_f² · exp(−½ Σ_d ((x1_d − x2_d) / ℓ_d)²)`
pub fn rbf(x1: &[f64], x2: &[f64], params: &KernelParams) -> Result<f64> {
    for x in [x1, x2] {
        if x.len() != params.dim() {
            return Err(Error::Shape {
                expected: params.dim(),
                got: x.len(),
            });
        }
    }
    Ok(params.eval(x1, x2))
}

/// Fitted GP posterior.
#[derive(Debug, Clone)]
pub struct GpModel {
    dim: usize,
    inputs: Vec<f64>,
    targets: Vec<f64>,
    params: KernelParams,
    /// Row-major lower-triangular factor of `K + (σ_n² + jitter) I`.
    factor: Vec<f64>,
    alpha: Vec<f64>,
    jitter: f64,
    y_mean: f64,
    y_scale: f64,
}

const JITTER_STEPS: i32 = 6;

/// In-place Cholesky of a row-major SPD matrix; the strict upper triangle is
/// zeroed. Fails on a non-positive or non-finite pivot.
fn cholesky_in_place(a: &mut [f64], n: usize) -> bool {
    for j in 0..n {
        let mut diag = a[j * n + j];
        for k in 0..j {
            diag -= a[j * n + k] * a[j * n + k];
        }
        if !(diag > 0.0) || !diag.is_finite() {
            return false;
        }
        let pivot = diag.sqrt();
        a[j * n + j] = pivot;
        for i in j + 1..n {
            let mut s = a[i * n + j];
            for k in 0..j {
                s -= a[i * n + k] * a[j * n + k];
            }
            a[i * n + j] = s / pivot;
        }
    }
    for i in 0..n {
        for v in &mut a[i * n + i + 1..(i + 1) * n] {
            *v = 0.0;
        }
    }
    true
}

fn forward_solve(l: &[f64], n: usize, b: &mut [f64]) {
    for i in 0..n {
        let row = &l[i * n..i * n + i];
        let mut s = b[i];
        for (lk, bk) in row.iter().zip(&b[..i]) {
            s -= lk * bk;
        }
        b[i] = s / l[i * n + i];
    }
}

fn backward_solve_transposed(l: &[f64], n: usize, b: &mut [f64]) {
    for i in (0..n).rev() {
        let mut s = b[i];
        for k in i + 1..n {
            s -= l[k * n + i] * b[k];
        }
        b[i] = s / l[i * n + i];
    }
}

fn standardize(y_raw: &[f64]) -> (Vec<f64>, f64, f64) {
    let m = y_raw.len() as f64;
    let mean = y_raw.iter().sum::<f64>() / m;
    let var = y_raw.iter().map(|y| (y - mean).powi(2)).sum::<f64>() / m;
    let std = var.sqrt();
    let scale = if std > 0.0 && std.is_finite() {
        std
    } else {
        1.0
    };
    (
        y_raw.iter().map(|y| (y - mean) / scale).collect(),
        mean,
        scale,
    )
}

fn flatten_inputs(x: &[Vec<f64>], dim: usize) -> Result<Vec<f64>> {
    let mut flat = Vec::with_capacity(x.len() * dim);
    for row in x {
        if row.len() != dim {
            return Err(Error::Shape {
                expected: dim,
                got: row.len(),
            });
        }
        if row.iter().any(|v| !(0.0..=1.0).contains(v)) {
            return Err(Error::InvalidParameter(
                "GP inputs must lie in the unit box".into(),
            ));
        }
        flat.extend_from_slice(row);
    }
    Ok(flat)
}

/// Pairwise squared Euclidean distances, row-major `m × m`.
fn squared_distances(inputs: &[f64], dim: usize) -> Vec<f64> {
    let m = inputs.len() / dim;
    let mut d2 = vec![0.0; m * m];
    for i in 0..m {
        let a = &inputs[i * dim..(i + 1) * dim];
        for j in 0..i {
            let b = &inputs[j * dim..(j + 1) * dim];
            let s: f64 = a.iter().zip(b).map(|(p, q)| (p - q) * (p - q)).sum();
            d2[i * m + j] = s;
            d2[j * m + i] = s;
        }
    }
    d2
}

/// Cholesky of `gram + (noise + jitter) I` into `factor`, escalating the
/// jitter from `1e-10·σ_f²` by decades. Reads only the lower triangle of
/// `gram`. Returns the jitter that succeeded.
fn factorize(gram: &[f64], m: usize, sf2: f64, noise: f64, factor: &mut [f64]) -> Option<f64> {
    for k in 0..=JITTER_STEPS {
        let jitter = 1e-10 * sf2 * 10f64.powi(k);
        for i in 0..m {
            factor[i * m..i * m + i + 1].copy_from_slice(&gram[i * m..i * m + i + 1]);
            factor[i * m + i] += noise + jitter;
        }
        if cholesky_in_place(factor, m) {
            return Some(jitter);
        }
    }
    None
}

/// Scratch buffers for repeated isotropic LML evaluations on one data set.
struct LmlWorkspace<'a> {
    d2: &'a [f64],
    targets: &'a [f64],
    gram: Vec<f64>,
    factor: Vec<f64>,
    solved: Vec<f64>,
}

impl<'a> LmlWorkspace<'a> {
    fn new(d2: &'a [f64], targets: &'a [f64]) -> Self {
        let m = targets.len();
        Self {
            d2,
            targets,
            gram: vec![0.0; m * m],
            factor: vec![0.0; m * m],
            solved: vec![0.0; m],
        }
    }

    /// LML with `σ_f² = 1`; `None` when the factorization fails.
    fn lml(&mut self, lengthscale: f64, noise: f64) -> Option<f64> {
        let m = self.targets.len();
        let inv = -0.5 / (lengthscale * lengthscale);
        for i in 0..m {
            for j in 0..=i {
                self.gram[i * m + j] = (inv * self.d2[i * m + j]).exp();
            }
        }
        factorize(&self.gram, m, 1.0, noise, &mut self.factor)?;
        self.solved.copy_from_slice(self.targets);
        forward_solve(&self.factor, m, &mut self.solved);
        let fit: f64 = self.solved.iter().map(|v| v * v).sum();
        let log_det: f64 = (0..m).map(|i| self.factor[i * m + i].ln()).sum();
        Some(-0.5 * fit - log_det - 0.5 * m as f64 * (2.0 * PI).ln())
    }
}

/// Fits a GP to `(x, y_raw)` under fixed kernel parameters.
pub fn fit(x: &[Vec<f64>], y_raw: &[f64], params: &KernelParams) -> Result<GpModel> {
    if x.is_empty() || x.len() != y_raw.len() {
        return Err(Error::Shape {
            expected: x.len().max(1),
            got: y_raw.len(),
        });
    }
    if y_raw.iter().any(|y| !y.is_finite()) {
        return Err(Error::InvalidParameter("GP targets must be finite".into()));
    }
    let inputs = flatten_inputs(x, params.dim())?;
    let d2 = params
        .is_isotropic()
        .then(|| squared_distances(&inputs, params.dim()));
    fit_flat(inputs, y_raw, params, d2.as_deref())
}

fn fit_flat(
    inputs: Vec<f64>,
    y_raw: &[f64],
    params: &KernelParams,
    d2: Option<&[f64]>,
) -> Result<GpModel> {
    let dim = params.dim();
    let m = y_raw.len();
    let sf2 = params.signal_variance;
    let mut gram = vec![0.0; m * m];
    match d2 {
        Some(d2) => {
            let inv = -0.5 / (params.lengthscales[0] * params.lengthscales[0]);
            for i in 0..m {
                for j in 0..=i {
                    gram[i * m + j] = sf2 * (inv * d2[i * m + j]).exp();
                }
            }
        }
        None => {
            for i in 0..m {
                for j in 0..=i {
                    gram[i * m + j] = params.eval(
                        &inputs[i * dim..(i + 1) * dim],
                        &inputs[j * dim..(j + 1) * dim],
                    );
                }
            }
        }
    }

    let mut factor = vec![0.0; m * m];
    let jitter = factorize(&gram, m, sf2, params.noise_variance, &mut factor)
        .ok_or(Error::IllConditioned)?;

    let (targets, y_mean, y_scale) = standardize(y_raw);
    let mut alpha = targets.clone();
    forward_solve(&factor, m, &mut alpha);
    backward_solve_transposed(&factor, m, &mut alpha);

    Ok(GpModel {
        dim,
        inputs,
        targets,
        params: params.clone(),
        factor,
        alpha,
        jitter,
        y_mean,
        y_scale,
    })
}

impl GpModel {
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.targets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.targets.is_empty()
    }

    pub fn params(&self) -> &KernelParams {
        &self.params
    }

    pub fn jitter(&self) -> f64 {
        self.jitter
    }

    pub fn alpha(&self) -> &[f64] {
        &self.alpha
    }

    pub fn standardized_targets(&self) -> &[f64] {
        &self.targets
    }

    /// `(mean, std)` of the raw targets used for standardization.
    pub fn normalizer(&self) -> (f64, f64) {
        (self.y_mean, self.y_scale)
    }

    pub fn factor(&self) -> &[f64] {
        &self.factor
    }

    fn input(&self, i: usize) -> &[f64] {
        &self.inputs[i * self.dim..(i + 1) * self.dim]
    }

    /// Posterior mean and variance in standardized units; the variance is
    /// not floored.
    pub fn predict_standardized(&self, x: &[f64]) -> (f64, f64) {
        let m = self.len();
        let mut k: Vec<f64> = (0..m).map(|i| self.params.eval(x, self.input(i))).collect();
        let mean = k.iter().zip(&self.alpha).map(|(a, b)| a * b).sum();
        forward_solve(&self.factor, m, &mut k);
        let explained: f64 = k.iter().map(|v| v * v).sum();
        (mean, self.params.signal_variance - explained)
    }

    /// Posterior `(mean, variance)` in raw target units.
    pub fn predict(&self, x: &[f64]) -> (f64, f64) {
        let (mean, var) = self.predict_standardized(x);
        (
            mean * self.y_scale + self.y_mean,
            var.max(0.0) * self.y_scale * self.y_scale,
        )
    }

    /// Log marginal likelihood of the standardized targets.
    pub fn log_marginal_likelihood(&self) -> f64 {
        let m = self.len();
        let fit: f64 = self
            .targets
            .iter()
            .zip(&self.alpha)
            .map(|(a, b)| a * b)
            .sum();
        let log_det: f64 = (0..m).map(|i| self.factor[i * m + i].ln()).sum();
        -0.5 * fit - log_det - 0.5 * m as f64 * (2.0 * PI).ln()
    }
}

pub const FALLBACK_LENGTHSCALE: f64 = 0.3;
pub const FALLBACK_NOISE: f64 = 1e-4;

const RESTART_LENGTHSCALES: [f64; 3] = [0.1, 0.3, 1.0];
const INITIAL_NOISE: f64 = 1e-5;
const LOG_LENGTHSCALE_RANGE: (f64, f64) = (-2.0 * LN_10, LN_10); // ln 0.01, ln 10
const LOG_NOISE_RANGE: (f64, f64) = (-8.0 * LN_10, -2.0 * LN_10); // ln 1e-8, ln 1e-2
const SWEEPS: usize = 2;
const GOLDEN_STEPS: usize = 10;
const BRACKET_HALF_WIDTH: [f64; 2] = [1.5, 2.5];

/// Isotropic kernel parameters maximizing the log marginal likelihood.
///
/// Coordinate-wise golden-section search over `(log ℓ, log σ_n²)` with
/// `σ_f² = 1`, restarted from each of `ℓ ∈ {0.1, 0.3, 1.0}`. Every fitted
/// probe is a candidate; the best one wins, first probe on ties. With fewer
/// than two points, or when every probe is ill-conditioned, returns
/// `ℓ = 0.3, σ_n² = 1e-4`.
pub fn select_hyperparams(x: &[Vec<f64>], y_raw: &[f64]) -> Result<KernelParams> {
    let dim = x.first().map_or(0, Vec::len);
    let fallback = KernelParams::isotropic(dim.max(1), FALLBACK_LENGTHSCALE, 1.0, FALLBACK_NOISE)?;
    if x.len() < 2 {
        return Ok(fallback);
    }
    if x.len() != y_raw.len() {
        return Err(Error::Shape {
            expected: x.len(),
            got: y_raw.len(),
        });
    }
    let inputs = flatten_inputs(x, dim)?;
    let d2 = squared_distances(&inputs, dim);
    let (targets, _, _) = standardize(y_raw);
    let mut workspace = LmlWorkspace::new(&d2, &targets);

    let mut best: Option<([f64; 2], f64)> = None;
    let mut lml = |theta: [f64; 2]| -> f64 {
        let value = workspace
            .lml(theta[0].exp(), theta[1].exp())
            .filter(|v| v.is_finite())
            .unwrap_or(f64::NEG_INFINITY);
        if value.is_finite() && best.is_none_or(|(_, b)| value > b) {
            best = Some((theta, value));
        }
        value
    };

    let ranges = [LOG_LENGTHSCALE_RANGE, LOG_NOISE_RANGE];
    for l0 in RESTART_LENGTHSCALES {
        let mut theta = [l0.ln(), INITIAL_NOISE.ln()];
        let mut current = lml(theta);
        for _ in 0..SWEEPS {
            for c in 0..2 {
                let lo = (theta[c] - BRACKET_HALF_WIDTH[c]).max(ranges[c].0);
                let hi = (theta[c] + BRACKET_HALF_WIDTH[c]).min(ranges[c].1);
                let (arg, value) = golden_section_max(lo, hi, GOLDEN_STEPS, |t| {
                    let mut probe = theta;
                    probe[c] = t;
                    lml(probe)
                });
                if value > current {
                    theta[c] = arg;
                    current = value;
                }
            }
        }
    }

    match best {
        Some((theta, _)) => KernelParams::isotropic(dim, theta[0].exp(), 1.0, theta[1].exp()),
        None => Ok(fallback),
    }
}

/// Golden-section maximization of `f` on `[lo, hi]`; returns the best probe.
fn golden_section_max(lo: f64, hi: f64, steps: usize, mut f: impl FnMut(f64) -> f64) -> (f64, f64) {
    let ratio = (5f64.sqrt() - 1.0) / 2.0;
    let (mut a, mut b) = (lo, hi);
    let mut c = b - ratio * (b - a);
    let mut d = a + ratio * (b - a);
    let mut fc = f(c);
    let mut fd = f(d);
    let mut best = if fd > fc { (d, fd) } else { (c, fc) };
    for _ in 0..steps {
        if fc >= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - ratio * (b - a);
            fc = f(c);
            if fc > best.1 {
                best = (c, fc);
            }
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + ratio * (b - a);
            fd = f(d);
            if fd > best.1 {
                best = (d, fd);
            }
        }
    }
    best
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::RngStream;

    fn iso(dim: usize, l: f64, sn2: f64) -> KernelParams {
        KernelParams::isotropic(dim, l, 1.0, sn2).unwrap()
    }

    #[test]
    fn rbf_examples() {
        let p = KernelParams::isotropic(3, 0.4, 2.5, 0.0).unwrap();
        let a = [0.1, 0.2, 0.3];
        assert_eq!(rbf(&a, &a, &p).unwrap(), 2.5);
        let b = [0.1 + 0.4, 0.2, 0.3];
        assert!((rbf(&a, &b, &p).unwrap() - 2.5 * (-0.5f64).exp()).abs() < 1e-14);
        let mut rng = RngStream::new(1);
        for _ in 0..50 {
            let x = rng.unit_point(3);
            let y = rng.unit_point(3);
            assert_eq!(rbf(&x, &y, &p).unwrap(), rbf(&y, &x, &p).unwrap());
        }
        assert!(matches!(rbf(&a, &[0.0, 0.0], &p), Err(Error::Shape { .. })));
    }

    #[test]
    fn invalid_kernel_params() {
        assert!(KernelParams::isotropic(2, 0.0, 1.0, 0.0).is_err());
        assert!(KernelParams::isotropic(2, 1.0, 0.0, 0.0).is_err());
        assert!(KernelParams::isotropic(2, 1.0, 1.0, -1e-3).is_err());
    }

    #[test]
    fn single_point_interpolates() {
        let x = vec![vec![0.3, 0.7]];
        let model = fit(&x, &[4.2], &iso(2, 0.3, 0.0)).unwrap();
        let (mean, var) = model.predict(&x[0]);
        assert!((mean - 4.2).abs() < 1e-12);
        assert!(var <= 1e-8);
    }

    #[test]
    fn duplicate_points_with_noise() {
        let x = vec![vec![0.5; 3], vec![0.5; 3], vec![0.1; 3]];
        assert!(fit(&x, &[1.0, 1.2, 0.0], &iso(3, 0.3, 1e-3)).is_ok());
        // noiseless duplicates are rescued by the jitter schedule
        let model = fit(&x, &[1.0, 1.0, 0.0], &iso(3, 0.3, 0.0)).unwrap();
        assert!(model.jitter() > 0.0);
    }

    #[test]
    fn constant_targets_use_unit_scale() {
        let x = vec![vec![0.1], vec![0.9]];
        let model = fit(&x, &[3.0, 3.0], &iso(1, 0.2, 1e-6)).unwrap();
        assert_eq!(model.normalizer(), (3.0, 1.0));
        let (mean, _) = model.predict(&[0.5]);
        assert!((mean - 3.0).abs() < 1e-12);
    }

    #[test]
    fn far_point_reverts_to_prior() {
        let x = vec![vec![0.0, 0.0], vec![0.02, 0.01], vec![0.01, 0.03]];
        let y = [1.0, 3.0, 2.0];
        let model = fit(&x, &y, &iso(2, 0.05, 1e-6)).unwrap();
        let (mu, sd) = model.normalizer();
        let (mean, var) = model.predict(&[1.0, 1.0]);
        assert!((mean - mu).abs() <= 1e-3 * sd);
        assert!((var - sd * sd).abs() <= 1e-3 * sd * sd);
    }

    #[test]
    fn factor_residual_is_tiny() {
        let mut rng = RngStream::new(8);
        let x: Vec<Vec<f64>> = (0..20).map(|_| rng.unit_point(4)).collect();
        let y: Vec<f64> = (0..20).map(|_| rng.uniform()).collect();
        let params = iso(4, 0.4, 1e-6);
        let model = fit(&x, &y, &params).unwrap();
        let m = 20;
        let l = model.factor();
        for i in 0..m {
            for j in 0..m {
                let llt: f64 = (0..m).map(|k| l[i * m + k] * l[j * m + k]).sum();
                let mut target = rbf(&x[i], &x[j], &params).unwrap();
                if i == j {
                    target += params.noise_variance() + model.jitter();
                }
                assert!((llt - target).abs() <= 1e-8);
            }
        }
    }

    #[test]
    fn lml_single_point() {
        // standardized single target is 0, k(x,x) = 1, σ_n² = 0
        let model = fit(&[vec![0.5]], &[7.0], &iso(1, 0.3, 0.0)).unwrap();
        let expected = -0.5 * (2.0 * PI).ln();
        assert!((model.log_marginal_likelihood() - expected).abs() < 1e-9);
        assert!((expected + 0.918_938_533).abs() < 1e-9);
    }

    #[test]
    fn golden_section_finds_parabola_peak() {
        let (arg, value) = golden_section_max(-3.0, 5.0, 40, |t| -(t - 1.25).powi(2));
        assert!((arg - 1.25).abs() < 1e-6);
        assert!(value <= 0.0);
    }

    #[test]
    fn hyperparams_are_deterministic_and_bounded() {
        let mut rng = RngStream::new(4);
        let x: Vec<Vec<f64>> = (0..15).map(|_| rng.unit_point(6)).collect();
        let y: Vec<f64> = x
            .iter()
            .map(|p| p.iter().map(|v| (3.0 * v).sin()).sum())
            .collect();
        let a = select_hyperparams(&x, &y).unwrap();
        let b = select_hyperparams(&x, &y).unwrap();
        assert_eq!(a, b);
        let l = a.lengthscales()[0];
        assert!((0.01..=10.0).contains(&l));
        assert!((1e-8..=1e-2 * 1.000_001).contains(&a.noise_variance()));
    }

    #[test]
    fn hyperparams_fallback_for_tiny_sets() {
        let p = select_hyperparams(&[vec![0.2, 0.2]], &[1.0]).unwrap();
        assert_eq!(p.lengthscales(), &[0.3, 0.3]);
        assert_eq!(p.noise_variance(), 1e-4);
    }
}
