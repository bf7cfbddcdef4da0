//! Parametric radio environment used as the black-box objective.
//!
//! Log-distance path loss, a parabolic-in-dB sectored antenna pattern rotated
//! by each station's yaw/pitch/roll, per-station SINR with every other
//! station as an interferer, and Shannon throughput averaged over a uniform
//! receiver grid.

use std::f64::consts::{LN_10, PI};
use std::fmt::Write as _;

use crate::domain::{BsConfig, Deployment, Orientation};
use crate::error::{Error, Result};
use crate::rng::RngStream;

pub type Vec3 = [f64; 3];

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PathLossParams {
    pub pl0_db: f64,
    pub d0_m: f64,
    pub exponent: f64,
}

impl Default for PathLossParams {
    fn default() -> Self {
        Self {
            pl0_db: 40.0,
            d0_m: 1.0,
            exponent: 3.0,
        }
    }
}

impl PathLossParams {
    /// Path loss in dB; distances below `d0_m` are evaluated at `d0_m`.
    pub fn loss_db(&self, distance_m: f64) -> f64 {
        let d = distance_m.max(self.d0_m);
        self.pl0_db + 10.0 * self.exponent * (d / self.d0_m).log10()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AntennaKind {
    Omni,
    Directional,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AntennaPattern {
    pub kind: AntennaKind,
    pub gmax_dbi: f64,
    pub az_3db: f64,
    pub el_3db: f64,
    pub attenuation_max_db: f64,
}

impl Default for AntennaPattern {
    fn default() -> Self {
        Self {
            kind: AntennaKind::Directional,
            gmax_dbi: 15.0,
            az_3db: 65f64.to_radians(),
            el_3db: 30f64.to_radians(),
            attenuation_max_db: 30.0,
        }
    }
}

impl AntennaPattern {
    pub fn with_kind(self, kind: AntennaKind) -> Self {
        Self { kind, ..self }
    }
}

/// Gain toward `local_dir`, a unit vector in the antenna frame (boresight +x).
///
/// The off-boresight angle γ is split along the roll-plane direction ψ into
/// an azimuth part `γ·cos ψ` and an elevation part `γ·sin ψ`.
pub fn antenna_gain_db(pattern: &AntennaPattern, local_dir: &Vec3) -> f64 {
    match pattern.kind {
        AntennaKind::Omni => 0.0,
        AntennaKind::Directional => {
            let [lx, ly, lz] = *local_dir;
            let gamma = lx.clamp(-1.0, 1.0).acos();
            let rho2 = ly * ly + lz * lz;
            let shape = if rho2 > 0.0 {
                (ly * ly / (pattern.az_3db * pattern.az_3db)
                    + lz * lz / (pattern.el_3db * pattern.el_3db))
                    / rho2
            } else {
                1.0 / (pattern.az_3db * pattern.az_3db)
            };
            let attenuation = (12.0 * gamma * gamma * shape).min(pattern.attenuation_max_db);
            pattern.gmax_dbi - attenuation
        }
    }
}

/// Rotation matrix `Rz(yaw)·Ry(pitch)·Rx(roll)` (antenna frame to world).
pub fn rotation_matrix(o: &Orientation) -> [[f64; 3]; 3] {
    let (sy, cy) = o.yaw().sin_cos();
    let (sp, cp) = o.pitch().sin_cos();
    let (sr, cr) = o.roll().sin_cos();
    [
        [cy * cp, cy * sp * sr - sy * cr, cy * sp * cr + sy * sr],
        [sy * cp, sy * sp * sr + cy * cr, sy * sp * cr - cy * sr],
        [-sp, cp * sr, cp * cr],
    ]
}

fn transpose_apply(r: &[[f64; 3]; 3], v: &Vec3) -> Vec3 {
    [
        r[0][0] * v[0] + r[1][0] * v[1] + r[2][0] * v[2],
        r[0][1] * v[0] + r[1][1] * v[1] + r[2][1] * v[2],
        r[0][2] * v[0] + r[1][2] * v[1] + r[2][2] * v[2],
    ]
}

fn check_unit(v: &Vec3) -> Result<()> {
    let norm = (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt();
    if (norm - 1.0).abs() > 1e-9 {
        return Err(Error::NotUnit(norm));
    }
    Ok(())
}

/// Expresses a world-frame unit direction in the antenna frame.
pub fn rotation_apply(orientation: &Orientation, v: &Vec3) -> Result<Vec3> {
    check_unit(v)?;
    Ok(transpose_apply(&rotation_matrix(orientation), v))
}

/// Spatially smooth log-normal shadowing over (station, receiver) positions.
///
/// A sum of random-phase cosines in the 4-D link coordinate, normalized to
/// standard deviation `sigma_db`. Drawn once from the scene seed.
#[derive(Debug, Clone, PartialEq)]
pub struct Shadowing {
    sigma_db: f64,
    correlation_m: f64,
    seed: u64,
    waves: Vec<([f64; 4], f64)>,
}

pub const SHADOWING_COMPONENTS: usize = 32;

impl Shadowing {
    pub fn new(sigma_db: f64, correlation_m: f64, seed: u64) -> Result<Self> {
        if !(sigma_db >= 0.0) || !(correlation_m > 0.0) {
            return Err(Error::InvalidParameter(
                "shadowing needs sigma_db >= 0 and correlation_m > 0".into(),
            ));
        }
        let mut rng = RngStream::new(seed).fork("scene-shadowing", 0);
        let waves = (0..SHADOWING_COMPONENTS)
            .map(|_| {
                let k = 2.0 * PI / correlation_m;
                let mut wave = [0.0; 4];
                for pair in wave.chunks_exact_mut(2) {
                    let angle = 2.0 * PI * rng.uniform();
                    let magnitude = k * (0.5 + rng.uniform());
                    pair[0] = magnitude * angle.cos();
                    pair[1] = magnitude * angle.sin();
                }
                (wave, 2.0 * PI * rng.uniform())
            })
            .collect();
        Ok(Self {
            sigma_db,
            correlation_m,
            seed,
            waves,
        })
    }

    pub fn sigma_db(&self) -> f64 {
        self.sigma_db
    }

    pub fn correlation_m(&self) -> f64 {
        self.correlation_m
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn loss_db(&self, bs: (f64, f64), rx: (f64, f64)) -> f64 {
        let p = [bs.0, bs.1, rx.0, rx.1];
        let sum: f64 = self
            .waves
            .iter()
            .map(|(k, phase)| (k[0] * p[0] + k[1] * p[1] + k[2] * p[2] + k[3] * p[3] + phase).cos())
            .sum();
        self.sigma_db * (2.0 / self.waves.len() as f64).sqrt() * sum
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Scene {
    pub side_m: f64,
    pub bs_height_m: f64,
    pub rx_height_m: f64,
    pub bandwidth_hz: f64,
    pub noise_dbm: f64,
    pub pathloss: PathLossParams,
    pub antenna: AntennaPattern,
    pub grid_resolution: usize,
    pub shadowing: Option<Shadowing>,
}

/// Thermal noise over `bandwidth_hz` plus a receiver noise figure.
pub fn thermal_noise_dbm(bandwidth_hz: f64, noise_figure_db: f64) -> f64 {
    -174.0 + 10.0 * bandwidth_hz.log10() + noise_figure_db
}

pub const DEFAULT_BANDWIDTH_HZ: f64 = 20e6;
pub const DEFAULT_NOISE_FIGURE_DB: f64 = 7.0;

impl Default for Scene {
    fn default() -> Self {
        Self {
            side_m: 1000.0,
            bs_height_m: 20.0,
            rx_height_m: 1.5,
            bandwidth_hz: DEFAULT_BANDWIDTH_HZ,
            noise_dbm: thermal_noise_dbm(DEFAULT_BANDWIDTH_HZ, DEFAULT_NOISE_FIGURE_DB),
            pathloss: PathLossParams::default(),
            antenna: AntennaPattern::default(),
            grid_resolution: 40,
            shadowing: None,
        }
    }
}

impl Scene {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: &str| Err(Error::InvalidParameter(msg.to_string()));
        if !(self.side_m > 0.0) {
            return bad("area side must be positive");
        }
        if !(self.bandwidth_hz > 0.0) {
            return bad("bandwidth must be positive");
        }
        if self.grid_resolution < 2 {
            return bad("grid resolution must be at least 2");
        }
        if !(self.pathloss.d0_m > 0.0) || !(self.pathloss.exponent > 0.0) {
            return bad("path loss needs d0 > 0 and exponent > 0");
        }
        let a = &self.antenna;
        if !(a.az_3db > 0.0 && a.az_3db <= PI && a.el_3db > 0.0 && a.el_3db <= PI) {
            return bad("antenna beamwidths must lie in (0, π]");
        }
        Ok(())
    }

    pub fn with_antenna_kind(&self, kind: AntennaKind) -> Self {
        Self {
            antenna: self.antenna.with_kind(kind),
            ..self.clone()
        }
    }

    /// Receiver positions at the cell centers of a uniform lattice,
    /// row-major with rows along y.
    pub fn receiver_grid(&self) -> ReceiverGrid {
        let n = self.grid_resolution;
        let cell = self.side_m / n as f64;
        let points = (0..n)
            .flat_map(|row| {
                (0..n).map(move |col| ((col as f64 + 0.5) * cell, (row as f64 + 0.5) * cell))
            })
            .collect();
        ReceiverGrid {
            resolution: n,
            points,
        }
    }

    fn noise_mw(&self) -> f64 {
        dbm_to_mw(self.noise_dbm)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReceiverGrid {
    resolution: usize,
    points: Vec<(f64, f64)>,
}

impl ReceiverGrid {
    pub fn resolution(&self) -> usize {
        self.resolution
    }

    pub fn points(&self) -> &[(f64, f64)] {
        &self.points
    }
}

pub fn dbm_to_mw(dbm: f64) -> f64 {
    (dbm * (LN_10 / 10.0)).exp()
}

/// Station state precomputed once per evaluation.
struct Transmitter {
    x: f64,
    y: f64,
    power_dbm: f64,
    rotation: [[f64; 3]; 3],
}

impl Transmitter {
    fn new(bs: &BsConfig) -> Self {
        Self {
            x: bs.x_m,
            y: bs.y_m,
            power_dbm: bs.power_dbm,
            rotation: rotation_matrix(&bs.orientation),
        }
    }

    fn received_dbm(&self, rx: (f64, f64), scene: &Scene) -> f64 {
        let d = [
            rx.0 - self.x,
            rx.1 - self.y,
            scene.rx_height_m - scene.bs_height_m,
        ];
        let dist = (d[0] * d[0] + d[1] * d[1] + d[2] * d[2]).sqrt();
        let gain = match scene.antenna.kind {
            AntennaKind::Omni => 0.0,
            AntennaKind::Directional if dist > 0.0 => {
                let dir = [d[0] / dist, d[1] / dist, d[2] / dist];
                antenna_gain_db(&scene.antenna, &transpose_apply(&self.rotation, &dir))
            }
            AntennaKind::Directional => scene.antenna.gmax_dbi,
        };
        let shadow = scene
            .shadowing
            .as_ref()
            .map_or(0.0, |s| s.loss_db((self.x, self.y), rx));
        self.power_dbm + gain - scene.pathloss.loss_db(dist) - shadow
    }
}

pub fn received_power_dbm(bs: &BsConfig, rx: (f64, f64), scene: &Scene) -> f64 {
    Transmitter::new(bs).received_dbm(rx, scene)
}

/// Linear SINR of station `i` (0-based) at `rx`.
pub fn sinr(i: usize, rx: (f64, f64), dep: &Deployment, scene: &Scene) -> f64 {
    let powers: Vec<f64> = dep
        .stations()
        .iter()
        .map(|bs| dbm_to_mw(received_power_dbm(bs, rx, scene)))
        .collect();
    let interference: f64 = powers
        .iter()
        .enumerate()
        .filter(|&(j, _)| j != i)
        .map(|(_, p)| p)
        .sum();
    powers[i] / (interference + scene.noise_mw())
}

/// Shannon throughput of station `i` at `rx`, in bps.
pub fn throughput(i: usize, rx: (f64, f64), dep: &Deployment, scene: &Scene) -> f64 {
    scene.bandwidth_hz * (1.0 + sinr(i, rx, dep, scene)).log2()
}

/// Row-major `n × n` matrix of total throughput `Σ_i C_i` per grid point.
#[derive(Debug, Clone, PartialEq)]
pub struct Heatmap {
    resolution: usize,
    values: Vec<f64>,
}

impl Heatmap {
    pub fn resolution(&self) -> usize {
        self.resolution
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.values[row * self.resolution + col]
    }

    /// Mean over all points, summed in index order.
    pub fn mean(&self) -> f64 {
        let mut sum = 0.0;
        for v in &self.values {
            sum += v;
        }
        sum / self.values.len() as f64
    }

    /// Comma-separated rows, one per grid line, 6 significant digits.
    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        for row in self.values.chunks_exact(self.resolution) {
            for (k, v) in row.iter().enumerate() {
                if k > 0 {
                    out.push(',');
                }
                let _ = write!(out, "{}", format_sig6(*v));
            }
            out.push('\n');
        }
        out
    }
}

/// Formats with 6 significant digits in scientific notation.
pub fn format_sig6(v: f64) -> String {
    format!("{v:.5e}")
}

pub fn heatmap(dep: &Deployment, scene: &Scene) -> Heatmap {
    let grid = scene.receiver_grid();
    let transmitters: Vec<Transmitter> = dep.stations().iter().map(Transmitter::new).collect();
    let noise = scene.noise_mw();
    let mut powers = vec![0.0; transmitters.len()];
    let values = grid
        .points()
        .iter()
        .map(|&rx| {
            let mut total = 0.0;
            for (p, tx) in powers.iter_mut().zip(&transmitters) {
                *p = dbm_to_mw(tx.received_dbm(rx, scene));
                total += *p;
            }
            let mut capacity = 0.0;
            for p in &powers {
                let interference = (total - p).max(0.0);
                capacity += (1.0 + p / (interference + noise)).log2();
            }
            scene.bandwidth_hz * capacity
        })
        .collect();
    Heatmap {
        resolution: grid.resolution(),
        values,
    }
}

/// Area-averaged total throughput in bps.
pub fn objective(dep: &Deployment, scene: &Scene) -> f64 {
    heatmap(dep, scene).mean()
}
