//! Expected improvement and its maximization over a seeded candidate set.

use std::f64::consts::{FRAC_1_SQRT_2, PI};

use crate::error::{Error, Result};
use crate::gp::GpModel;
use crate::rng::RngStream;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AcquisitionConfig {
    pub n_candidates: usize,
    pub xi: f64,
}

impl Default for AcquisitionConfig {
    fn default() -> Self {
        Self {
            n_candidates: 2048,
            xi: 0.0,
        }
    }
}

impl AcquisitionConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_candidates == 0 {
            return Err(Error::InvalidParameter(
                "n_candidates must be at least 1".into(),
            ));
        }
        if !(self.xi >= 0.0) {
            return Err(Error::InvalidParameter("xi must be non-negative".into()));
        }
        Ok(())
    }
}

/// Standard normal CDF, `Φ(z) = ½·erfc(−z/√2)`, using the musl `erfc`
/// port from `libm` (absolute error far below 1e-12).
pub fn normal_cdf(z: f64) -> f64 {
    0.5 * libm::erfc(-z * FRAC_1_SQRT_2)
}

pub fn normal_pdf(z: f64) -> f64 {
    (-0.5 * z * z).exp() / (2.0 * PI).sqrt()
}

/// Expected improvement above `y_best + xi` for a maximization problem.
pub fn expected_improvement(mean: f64, std: f64, y_best: f64, xi: f64) -> Result<f64> {
    if !(std >= 0.0) {
        return Err(Error::NegativeStd(std));
    }
    let gap = mean - y_best - xi;
    if std == 0.0 {
        return Ok(gap.max(0.0));
    }
    let z = gap / std;
    Ok((gap * normal_cdf(z) + std * normal_pdf(z)).max(0.0))
}

/// Draws `n_candidates` uniform points in `[0, 1]^dim` and returns the one
/// with the largest EI; ties go to the earliest draw.
pub fn propose_next(
    model: &GpModel,
    y_best: f64,
    cfg: &AcquisitionConfig,
    rng: &mut RngStream,
) -> Vec<f64> {
    let dim = model.dim();
    let mut best_point = Vec::new();
    let mut best_ei = f64::NEG_INFINITY;
    let mut candidate = vec![0.0; dim];
    for _ in 0..cfg.n_candidates.max(1) {
        for v in candidate.iter_mut() {
            *v = rng.uniform();
        }
        let (mean, var) = model.predict(&candidate);
        let ei = expected_improvement(mean, var.sqrt(), y_best, cfg.xi).unwrap_or(0.0);
        if ei > best_ei {
            best_ei = ei;
            best_point.clone_from(&candidate);
        }
    }
    best_point
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gp::{fit, KernelParams};

    #[test]
    fn zero_std_is_plain_improvement() {
        assert_eq!(expected_improvement(1.0, 0.0, 2.0, 0.0).unwrap(), 0.0);
        assert_eq!(expected_improvement(2.0, 0.0, 2.0, 0.0).unwrap(), 0.0);
        assert_eq!(expected_improvement(3.5, 0.0, 2.0, 0.5).unwrap(), 1.0);
    }

    #[test]
    fn negative_std_rejected() {
        assert!(matches!(
            expected_improvement(0.0, -1.0, 0.0, 0.0),
            Err(Error::NegativeStd(_))
        ));
    }

    #[test]
    fn closed_form_values() {
        let at_best = expected_improvement(0.0, 1.0, 0.0, 0.0).unwrap();
        assert!((at_best - 0.398_942_280_401_432_7).abs() < 1e-15);
        let above = expected_improvement(1.0, 1.0, 0.0, 0.0).unwrap();
        assert!((above - 1.083_315_470_587_686_3).abs() < 1e-12);
    }

    #[test]
    fn cdf_reference_values() {
        // Φ(1), Φ(-3), Φ(6) at 30 digits
        assert!((normal_cdf(1.0) - 0.841_344_746_068_542_9).abs() < 1e-15);
        assert!((normal_cdf(-3.0) - 0.001_349_898_031_630_094_5).abs() < 1e-17);
        assert!((normal_cdf(6.0) - 0.999_999_999_013_412_4).abs() < 1e-15);
        assert_eq!(normal_cdf(0.0), 0.5);
    }

    #[test]
    fn continuous_as_std_vanishes() {
        for (mean, best) in [(1.3, 1.0), (0.2, 1.0), (1.0, 1.0)] {
            let tiny = expected_improvement(mean, 1e-9, best, 0.0).unwrap();
            let limit = expected_improvement(mean, 0.0, best, 0.0).unwrap();
            assert!((tiny - limit).abs() <= 1e-6);
        }
    }

    fn toy_model() -> GpModel {
        let x = vec![
            vec![0.1, 0.2],
            vec![0.8, 0.4],
            vec![0.5, 0.9],
            vec![0.3, 0.6],
        ];
        let y = [1.0, 2.0, 0.5, 1.7];
        fit(&x, &y, &KernelParams::isotropic(2, 0.3, 1.0, 1e-6).unwrap()).unwrap()
    }

    #[test]
    fn proposal_is_argmax_of_its_candidates() {
        let model = toy_model();
        let cfg = AcquisitionConfig {
            n_candidates: 300,
            xi: 0.0,
        };
        let rng = RngStream::new(12);
        let picked = propose_next(&model, 2.0, &cfg, &mut rng.clone());
        assert!(picked.iter().all(|v| (0.0..=1.0).contains(v)));
        let ei_at = |p: &[f64]| {
            let (m, v) = model.predict(p);
            expected_improvement(m, v.sqrt(), 2.0, 0.0).unwrap()
        };
        let best = ei_at(&picked);
        let mut replay = rng.clone();
        for _ in 0..cfg.n_candidates {
            let c = replay.unit_point(2);
            assert!(best >= ei_at(&c));
        }
        assert_eq!(picked, propose_next(&model, 2.0, &cfg, &mut rng.clone()));
    }

    #[test]
    fn ties_keep_first_draw() {
        // y_best far above anything reachable: every candidate has EI 0
        let model = toy_model();
        let cfg = AcquisitionConfig {
            n_candidates: 50,
            xi: 0.0,
        };
        let rng = RngStream::new(3);
        let picked = propose_next(&model, 1e9, &cfg, &mut rng.clone());
        assert_eq!(picked, rng.clone().unit_point(2));
    }
}
