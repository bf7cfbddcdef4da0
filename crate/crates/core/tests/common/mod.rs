//! Independent reference implementations shared by the integration tests.
//!
//! Nothing here calls into the library's numerics: the GP oracle solves
//! with nalgebra's LU, the radio oracle builds rotations with nalgebra's
//! Euler-angle constructor, and EI is estimated by sampling.

#![allow(dead_code)]

use nalgebra::{DMatrix, DVector, Rotation3, Vector3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

pub fn rel_err(got: f64, want: f64) -> f64 {
    if got == want {
        0.0
    } else {
        (got - want).abs() / want.abs().max(f64::MIN_POSITIVE)
    }
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

// ---------------------------------------------------------------- GP oracle

pub struct DenseGp {
    x: Vec<Vec<f64>>,
    lengthscales: Vec<f64>,
    sf2: f64,
    a_inv_y: DVector<f64>,
    lu: nalgebra::LU<f64, nalgebra::Dyn, nalgebra::Dyn>,
    pub y_mean: f64,
    pub y_std: f64,
    pub lml: f64,
}

fn kernel(a: &[f64], b: &[f64], ls: &[f64], sf2: f64) -> f64 {
    let mut r2 = 0.0;
    for d in 0..a.len() {
        let t = (a[d] - b[d]) / ls[d];
        r2 += t * t;
    }
    sf2 * (-0.5 * r2).exp()
}

impl DenseGp {
    /// Posterior on `(x, y_raw)` with targets z-scored by the population
    /// standard deviation and `diag` added to the kernel diagonal.
    pub fn new(x: &[Vec<f64>], y_raw: &[f64], lengthscales: &[f64], sf2: f64, diag: f64) -> Self {
        let m = x.len();
        let y_mean = y_raw.iter().sum::<f64>() / m as f64;
        let var = y_raw
            .iter()
            .map(|y| (y - y_mean) * (y - y_mean))
            .sum::<f64>()
            / m as f64;
        let y_std = if var > 0.0 { var.sqrt() } else { 1.0 };
        let y = DVector::from_iterator(m, y_raw.iter().map(|v| (v - y_mean) / y_std));
        let a = DMatrix::from_fn(m, m, |i, j| {
            kernel(&x[i], &x[j], lengthscales, sf2) + if i == j { diag } else { 0.0 }
        });
        let lu = a.clone().lu();
        let a_inv_y = lu.solve(&y).expect("oracle system is singular");
        let det = lu.determinant();
        assert!(det > 0.0, "oracle covariance not positive definite");
        let lml = -0.5 * y.dot(&a_inv_y)
            - 0.5 * det.ln()
            - 0.5 * m as f64 * (2.0 * std::f64::consts::PI).ln();
        Self {
            x: x.to_vec(),
            lengthscales: lengthscales.to_vec(),
            sf2,
            a_inv_y,
            lu,
            y_mean,
            y_std,
            lml,
        }
    }

    /// Standardized posterior `(mean, variance)` at `q`.
    pub fn predict(&self, q: &[f64]) -> (f64, f64) {
        let k = DVector::from_iterator(
            self.x.len(),
            self.x
                .iter()
                .map(|xi| kernel(q, xi, &self.lengthscales, self.sf2)),
        );
        let mean = k.dot(&self.a_inv_y);
        let v = self.lu.solve(&k).expect("oracle system is singular");
        (mean, self.sf2 - k.dot(&v))
    }
}

/// One random GP problem.
pub struct GpInstance {
    pub x: Vec<Vec<f64>>,
    pub y: Vec<f64>,
    pub lengthscales: Vec<f64>,
    pub sf2: f64,
    pub noise: f64,
    pub queries: Vec<Vec<f64>>,
}

/// `m ≤ 30`, `d ≤ 6`, anisotropic lengthscales, raw targets far from zero
/// mean and unit scale.
pub fn gp_instance(r: &mut ChaCha8Rng) -> GpInstance {
    let m = r.random_range(1..=30);
    let d = r.random_range(1..=6);
    let point = |r: &mut ChaCha8Rng| (0..d).map(|_| r.random::<f64>()).collect::<Vec<f64>>();
    let x: Vec<Vec<f64>> = (0..m).map(|_| point(r)).collect();
    let freq: Vec<f64> = (0..d).map(|_| r.random_range(1.0..6.0)).collect();
    let offset = r.random_range(-50.0..50.0);
    let scale = 10f64.powf(r.random_range(-2.0..3.0));
    let y = x
        .iter()
        .map(|p| offset + scale * p.iter().zip(&freq).map(|(a, f)| (a * f).sin()).sum::<f64>())
        .collect();
    GpInstance {
        lengthscales: (0..d)
            .map(|_| 10f64.powf(r.random_range(-1.0..0.3)))
            .collect(),
        sf2: r.random_range(0.5..2.0),
        noise: 10f64.powf(r.random_range(-6.0..-2.0)),
        queries: (0..5).map(|_| point(r)).collect(),
        x,
        y,
    }
}

// ------------------------------------------------------------- EI oracle

pub struct MonteCarloEi {
    pub mean: f64,
    pub std_error: f64,
}

/// `E[max(Y − y_best, 0)]` for `Y ~ N(mean, std²)` from `n` draws.
pub fn monte_carlo_ei(
    mean: f64,
    std: f64,
    y_best: f64,
    n: usize,
    r: &mut ChaCha8Rng,
) -> MonteCarloEi {
    let (mut sum, mut sum_sq) = (0.0f64, 0.0f64);
    for _ in 0..n {
        let z: f64 = r.sample(StandardNormal);
        let g = (mean + std * z - y_best).max(0.0);
        sum += g;
        sum_sq += g * g;
    }
    let nf = n as f64;
    let mu = sum / nf;
    let var = (sum_sq / nf - mu * mu).max(0.0) * nf / (nf - 1.0);
    MonteCarloEi {
        mean: mu,
        std_error: (var / nf).sqrt(),
    }
}

// ----------------------------------------------------------- radio oracle

/// Parameters of the default scene, restated.
pub struct RadioOracle {
    pub side_m: f64,
    pub bs_height_m: f64,
    pub rx_height_m: f64,
    pub bandwidth_hz: f64,
    pub noise_dbm: f64,
    pub grid: usize,
    pub directional: bool,
}

impl RadioOracle {
    pub fn default_scene(grid: usize) -> Self {
        Self {
            side_m: 1000.0,
            bs_height_m: 20.0,
            rx_height_m: 1.5,
            bandwidth_hz: 20e6,
            noise_dbm: -174.0 + 10.0 * 20e6f64.log10() + 7.0,
            grid,
            directional: true,
        }
    }

    fn gain_db(&self, yaw: f64, pitch: f64, roll: f64, dir: Vector3<f64>) -> f64 {
        if !self.directional {
            return 0.0;
        }
        let rot = Rotation3::from_euler_angles(roll, pitch, yaw);
        let local = rot.inverse() * dir;
        let (az, el) = (65f64.to_radians(), 30f64.to_radians());
        let gamma = local.x.clamp(-1.0, 1.0).acos();
        let rho = local.y.hypot(local.z);
        let (theta_az, theta_el) = if rho > 0.0 {
            (gamma * local.y / rho, gamma * local.z / rho)
        } else {
            (gamma, 0.0)
        };
        let att = 12.0 * ((theta_az / az).powi(2) + (theta_el / el).powi(2));
        15.0 - att.min(30.0)
    }

    /// Mean single-station throughput over the cell-center grid.
    pub fn single_station(
        &self,
        x: f64,
        y: f64,
        power_dbm: f64,
        yaw: f64,
        pitch: f64,
        roll: f64,
    ) -> f64 {
        let cell = self.side_m / self.grid as f64;
        let noise_mw = 10f64.powf(self.noise_dbm / 10.0);
        let mut total = 0.0;
        for row in 0..self.grid {
            for col in 0..self.grid {
                let rx = Vector3::new(
                    (col as f64 + 0.5) * cell,
                    (row as f64 + 0.5) * cell,
                    self.rx_height_m,
                );
                let d = rx - Vector3::new(x, y, self.bs_height_m);
                let dist = d.norm();
                let pl = 40.0 + 30.0 * dist.max(1.0).log10();
                let rx_dbm = power_dbm + self.gain_db(yaw, pitch, roll, d / dist) - pl;
                let snr = 10f64.powf(rx_dbm / 10.0) / noise_mw;
                total += self.bandwidth_hz * (1.0 + snr).log2();
            }
        }
        total / (self.grid * self.grid) as f64
    }
}

/// `k` evenly spaced values covering `[lo, hi]` including both ends.
pub fn linspace(lo: f64, hi: f64, k: usize) -> Vec<f64> {
    (0..k)
        .map(|i| lo + (hi - lo) * i as f64 / (k - 1) as f64)
        .collect()
}

/// Best objective over the `5^6` lattice of a single station, plus its
/// argument `[x, y, power, yaw, pitch, roll]`.
pub fn lattice_scan(oracle: &RadioOracle, power: (f64, f64)) -> (f64, [f64; 6]) {
    use std::f64::consts::{FRAC_PI_2, PI};
    let xs = linspace(0.0, oracle.side_m, 5);
    let ps = linspace(power.0, power.1, 5);
    let yaws = linspace(-PI, PI, 5);
    let pitches = linspace(-FRAC_PI_2, FRAC_PI_2, 5);
    let mut best = (f64::NEG_INFINITY, [0.0; 6]);
    for &x in &xs {
        for &y in &xs {
            for &p in &ps {
                for &yaw in &yaws {
                    for &pitch in &pitches {
                        for &roll in &yaws {
                            let v = oracle.single_station(x, y, p, yaw, pitch, roll);
                            if v > best.0 {
                                best = (v, [x, y, p, yaw, pitch, roll]);
                            }
                        }
                    }
                }
            }
        }
    }
    best
}
