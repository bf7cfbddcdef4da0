//! Deployment data types and the unit-box encoding the optimizers work in.
//!
//! One base station is a block of six scalars, always in this order:
//! `[x_m, y_m, power_dbm, yaw, pitch, roll]`. A deployment of `n` stations
//! flattens to `6 * n` entries with block `i` at `[6i, 6i + 6)`.

use std::f64::consts::{FRAC_PI_2, PI};

use crate::error::{Error, Result};

pub const BLOCK_DIM: usize = 6;

const DIM_NAMES: [&str; BLOCK_DIM] = ["x_m", "y_m", "power_dbm", "yaw", "pitch", "roll"];

/// Antenna orientation in radians.
///
/// Yaw and roll are wrapped into `[-π, π]`; pitch is clamped to
/// `[-π/2, π/2]`. Positive pitch tilts the boresight below the horizon.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Orientation {
    yaw: f64,
    pitch: f64,
    roll: f64,
}

fn wrap_angle(a: f64) -> f64 {
    if (-PI..=PI).contains(&a) {
        return a;
    }
    let wrapped = (a + PI).rem_euclid(2.0 * PI) - PI;
    // rem_euclid can round up to exactly 2π
    if wrapped >= PI {
        -PI
    } else {
        wrapped
    }
}

impl Orientation {
    pub fn new(yaw: f64, pitch: f64, roll: f64) -> Self {
        Self {
            yaw: wrap_angle(yaw),
            pitch: pitch.clamp(-FRAC_PI_2, FRAC_PI_2),
            roll: wrap_angle(roll),
        }
    }

    pub fn yaw(&self) -> f64 {
        self.yaw
    }

    pub fn pitch(&self) -> f64 {
        self.pitch
    }

    pub fn roll(&self) -> f64 {
        self.roll
    }
}

/// Configuration of one base station. Height is fixed by the scene.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BsConfig {
    pub x_m: f64,
    pub y_m: f64,
    pub power_dbm: f64,
    pub orientation: Orientation,
}

impl BsConfig {
    pub fn to_block(&self) -> [f64; BLOCK_DIM] {
        let o = &self.orientation;
        [self.x_m, self.y_m, self.power_dbm, o.yaw, o.pitch, o.roll]
    }

    pub fn from_block(block: &[f64; BLOCK_DIM]) -> Self {
        Self {
            x_m: block[0],
            y_m: block[1],
            power_dbm: block[2],
            orientation: Orientation::new(block[3], block[4], block[5]),
        }
    }
}

/// Ordered set of base-station blocks; index `i` is the i-th station.
#[derive(Debug, Clone, PartialEq)]
pub struct Deployment {
    stations: Vec<BsConfig>,
}

impl Deployment {
    pub fn new(stations: Vec<BsConfig>) -> Self {
        Self { stations }
    }

    pub fn stations(&self) -> &[BsConfig] {
        &self.stations
    }

    pub fn len(&self) -> usize {
        self.stations.len()
    }

    pub fn is_empty(&self) -> bool {
        self.stations.is_empty()
    }

    /// Copy of `self` with block `index` replaced.
    pub fn with_station(&self, index: usize, bs: BsConfig) -> Self {
        let mut stations = self.stations.clone();
        stations[index] = bs;
        Self { stations }
    }

    pub fn flatten(&self) -> Vec<f64> {
        self.stations.iter().flat_map(|bs| bs.to_block()).collect()
    }
}

/// Per-dimension box for one station block. All stations share it.
#[derive(Debug, Clone, PartialEq)]
pub struct ParameterBounds {
    lower: [f64; BLOCK_DIM],
    upper: [f64; BLOCK_DIM],
}

impl ParameterBounds {
    pub fn new(lower: [f64; BLOCK_DIM], upper: [f64; BLOCK_DIM]) -> Result<Self> {
        for d in 0..BLOCK_DIM {
            if !(lower[d] < upper[d]) {
                return Err(Error::InvalidParameter(format!(
                    "bounds for {} must satisfy lower < upper (got [{}, {}])",
                    DIM_NAMES[d], lower[d], upper[d]
                )));
            }
        }
        Ok(Self { lower, upper })
    }

    /// Square area `[0, side_m]²`, power `[power_min, power_max]` dBm and the
    /// full angle ranges.
    pub fn for_area(side_m: f64, power_min_dbm: f64, power_max_dbm: f64) -> Result<Self> {
        Self::new(
            [0.0, 0.0, power_min_dbm, -PI, -FRAC_PI_2, -PI],
            [side_m, side_m, power_max_dbm, PI, FRAC_PI_2, PI],
        )
    }

    pub fn lower(&self) -> &[f64; BLOCK_DIM] {
        &self.lower
    }

    pub fn upper(&self) -> &[f64; BLOCK_DIM] {
        &self.upper
    }

    pub fn power_range(&self) -> (f64, f64) {
        (self.lower[2], self.upper[2])
    }

    /// Lower and upper arrays for a full deployment of `n_tx` stations.
    pub fn deployment_box(&self, n_tx: usize) -> (Vec<f64>, Vec<f64>) {
        let lower = (0..n_tx).flat_map(|_| self.lower).collect();
        let upper = (0..n_tx).flat_map(|_| self.upper).collect();
        (lower, upper)
    }

    fn normalize(&self, d: usize, value: f64) -> f64 {
        (value - self.lower[d]) / (self.upper[d] - self.lower[d])
    }

    fn denormalize(&self, d: usize, u: f64) -> f64 {
        self.lower[d] + u * (self.upper[d] - self.lower[d])
    }
}

pub fn encode_block(bs: &BsConfig, bounds: &ParameterBounds) -> Result<[f64; BLOCK_DIM]> {
    let values = bs.to_block();
    let mut out = [0.0; BLOCK_DIM];
    for d in 0..BLOCK_DIM {
        let (lo, hi) = (bounds.lower[d], bounds.upper[d]);
        if !(lo..=hi).contains(&values[d]) {
            return Err(Error::OutOfBounds {
                dim: d,
                name: DIM_NAMES[d],
                value: values[d],
                lower: lo,
                upper: hi,
            });
        }
        out[d] = bounds.normalize(d, values[d]);
    }
    Ok(out)
}

pub fn decode_block(v: &[f64], bounds: &ParameterBounds) -> Result<BsConfig> {
    if v.len() != BLOCK_DIM {
        return Err(Error::Shape {
            expected: BLOCK_DIM,
            got: v.len(),
        });
    }
    let mut block = [0.0; BLOCK_DIM];
    for d in 0..BLOCK_DIM {
        block[d] = bounds.denormalize(d, v[d].clamp(0.0, 1.0));
    }
    Ok(BsConfig::from_block(&block))
}

pub fn encode_deployment(dep: &Deployment, bounds: &ParameterBounds) -> Result<Vec<f64>> {
    let mut out = Vec::with_capacity(BLOCK_DIM * dep.len());
    for bs in dep.stations() {
        out.extend_from_slice(&encode_block(bs, bounds)?);
    }
    Ok(out)
}

pub fn decode_deployment(v: &[f64], n_tx: usize, bounds: &ParameterBounds) -> Result<Deployment> {
    if v.len() != BLOCK_DIM * n_tx {
        return Err(Error::Shape {
            expected: BLOCK_DIM * n_tx,
            got: v.len(),
        });
    }
    let stations = v
        .chunks_exact(BLOCK_DIM)
        .map(|chunk| decode_block(chunk, bounds))
        .collect::<Result<_>>()?;
    Ok(Deployment::new(stations))
}

/// Cell centers of a `√n × √n` lattice over `[0, side_m]²`, row-major in y.
pub fn square_placement(n_tx: usize, side_m: f64) -> Result<Vec<(f64, f64)>> {
    let k = (n_tx as f64).sqrt().round() as usize;
    if n_tx == 0 || k * k != n_tx {
        return Err(Error::NotSquare(n_tx));
    }
    let cell = side_m / k as f64;
    let mut positions = Vec::with_capacity(n_tx);
    for row in 0..k {
        for col in 0..k {
            positions.push(((col as f64 + 0.5) * cell, (row as f64 + 0.5) * cell));
        }
    }
    Ok(positions)
}

/// Evaluation counters for the nested budget loops.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BudgetState {
    t_total: usize,
    total: usize,
    t_sub: usize,
    sub: usize,
    n_init: usize,
}

impl BudgetState {
    pub fn new(total: usize, sub: usize, n_init: usize) -> Result<Self> {
        if n_init >= sub {
            return Err(Error::Budget(format!(
                "N_init ({n_init}) must be smaller than T_sub ({sub})"
            )));
        }
        Ok(Self {
            t_total: 0,
            total,
            t_sub: 0,
            sub,
            n_init,
        })
    }

    pub fn t_total(&self) -> usize {
        self.t_total
    }

    pub fn total(&self) -> usize {
        self.total
    }

    pub fn t_sub(&self) -> usize {
        self.t_sub
    }

    pub fn sub(&self) -> usize {
        self.sub
    }

    pub fn n_init(&self) -> usize {
        self.n_init
    }

    pub fn remaining_total(&self) -> usize {
        self.total - self.t_total
    }

    pub fn total_exhausted(&self) -> bool {
        self.t_total >= self.total
    }

    pub fn sub_exhausted(&self) -> bool {
        self.t_sub >= self.sub || self.total_exhausted()
    }

    pub fn start_subproblem(&mut self) {
        self.t_sub = 0;
    }

    /// Records one evaluation outside any subproblem.
    pub fn consume_total(&mut self) -> bool {
        if self.total_exhausted() {
            return false;
        }
        self.t_total += 1;
        true
    }

    /// Records one evaluation inside the current subproblem.
    pub fn consume_sub(&mut self) -> bool {
        if self.sub_exhausted() {
            return false;
        }
        self.t_sub += 1;
        self.t_total += 1;
        true
    }
}
