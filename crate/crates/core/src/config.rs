//! Run configuration: a flat `section.key = value` file plus overrides.
//!
//! ```text
//! # comments run to end of line
//! run.n_tx = 16
//! run.method = bcd-bo
//! scene.grid_resolution = 40
//! ```
//!
//! Unknown keys are rejected. Keys under `result.` are written by runs into
//! their manifest and ignored when read back.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use crate::acquisition::AcquisitionConfig;
use crate::domain::{square_placement, ParameterBounds};
use crate::error::{Error, Result};
use crate::optimizer::{BoSettings, Method, DEFAULT_MAX_GP_POINTS};
use crate::radio::{
    thermal_noise_dbm, AntennaKind, AntennaPattern, PathLossParams, Scene, Shadowing,
    DEFAULT_BANDWIDTH_HZ, DEFAULT_NOISE_FIGURE_DB,
};

pub const DEFAULT_N_TX: usize = 16;

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub side_m: f64,
    pub bs_height_m: f64,
    pub rx_height_m: f64,
    pub bandwidth_hz: f64,
    /// `None` derives thermal noise over the bandwidth with a 7 dB noise figure.
    pub noise_dbm: Option<f64>,
    pub grid_resolution: usize,
    pub pathloss: PathLossParams,
    pub antenna_kind: AntennaKind,
    pub gmax_dbi: f64,
    pub az_3db_deg: f64,
    pub el_3db_deg: f64,
    pub attenuation_max_db: f64,
    /// Zero disables shadowing.
    pub shadowing_sigma_db: f64,
    pub shadowing_correlation_m: f64,
    pub shadowing_seed: u64,
    pub power_min_dbm: f64,
    pub power_max_dbm: f64,
    pub n_tx: usize,
    pub method: Method,
    pub seed: u64,
    /// `None` means `100 · n_tx`.
    pub t_total: Option<usize>,
    pub t_sub: usize,
    pub n_init: usize,
    pub n_init_joint: usize,
    pub acquisition: AcquisitionConfig,
    pub max_gp_points: usize,
    pub out_dir: PathBuf,
}

impl Default for RunConfig {
    fn default() -> Self {
        let scene = Scene::default();
        let antenna = AntennaPattern::default();
        let settings = BoSettings::for_stations(DEFAULT_N_TX);
        Self {
            side_m: scene.side_m,
            bs_height_m: scene.bs_height_m,
            rx_height_m: scene.rx_height_m,
            bandwidth_hz: DEFAULT_BANDWIDTH_HZ,
            noise_dbm: None,
            grid_resolution: scene.grid_resolution,
            pathloss: PathLossParams::default(),
            antenna_kind: antenna.kind,
            gmax_dbi: antenna.gmax_dbi,
            az_3db_deg: 65.0,
            el_3db_deg: 30.0,
            attenuation_max_db: antenna.attenuation_max_db,
            shadowing_sigma_db: 0.0,
            shadowing_correlation_m: 100.0,
            shadowing_seed: 0,
            power_min_dbm: 10.0,
            power_max_dbm: 40.0,
            n_tx: DEFAULT_N_TX,
            method: Method::BcdBo,
            seed: 0,
            t_total: None,
            t_sub: settings.t_sub,
            n_init: settings.n_init,
            n_init_joint: settings.n_init_joint,
            acquisition: settings.acquisition,
            max_gp_points: DEFAULT_MAX_GP_POINTS,
            out_dir: PathBuf::from("out"),
        }
    }
}

/// Every accepted key, in manifest order.
pub const KEYS: &[&str] = &[
    "scene.side_m",
    "scene.bs_height_m",
    "scene.rx_height_m",
    "scene.bandwidth_hz",
    "scene.noise_dbm",
    "scene.grid_resolution",
    "pathloss.pl0_db",
    "pathloss.d0_m",
    "pathloss.exponent",
    "antenna.kind",
    "antenna.gmax_dbi",
    "antenna.az_3db_deg",
    "antenna.el_3db_deg",
    "antenna.attenuation_max_db",
    "shadowing.sigma_db",
    "shadowing.correlation_m",
    "shadowing.seed",
    "bounds.power_min_dbm",
    "bounds.power_max_dbm",
    "run.n_tx",
    "run.method",
    "run.seed",
    "budget.t_total",
    "budget.t_sub",
    "budget.n_init",
    "budget.n_init_joint",
    "acquisition.n_candidates",
    "acquisition.xi",
    "gp.max_points",
    "output.dir",
];

fn parse_value<T: FromStr>(key: &str, raw: &str, expected: &str) -> Result<T> {
    raw.parse()
        .map_err(|_| Error::config(key, format!("expected {expected}, got `{raw}`")))
}

fn parse_f64(key: &str, raw: &str) -> Result<f64> {
    let v: f64 = parse_value(key, raw, "a finite number")?;
    if !v.is_finite() {
        return Err(Error::config(
            key,
            format!("expected a finite number, got `{raw}`"),
        ));
    }
    Ok(v)
}

fn parse_kind(key: &str, raw: &str) -> Result<AntennaKind> {
    match raw {
        "omni" => Ok(AntennaKind::Omni),
        "directional" => Ok(AntennaKind::Directional),
        _ => Err(Error::config(
            key,
            format!("expected `omni` or `directional`, got `{raw}`"),
        )),
    }
}

fn kind_name(kind: AntennaKind) -> &'static str {
    match kind {
        AntennaKind::Omni => "omni",
        AntennaKind::Directional => "directional",
    }
}

/// Splits config text into `key -> value`, rejecting malformed lines and
/// duplicate keys.
fn parse_lines(text: &str) -> Result<BTreeMap<String, String>> {
    let mut entries = BTreeMap::new();
    for (n, line) in text.lines().enumerate() {
        let line = line.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let Some((key, value)) = line.split_once('=') else {
            return Err(Error::config(
                format!("line {}", n + 1),
                "expected `section.key = value`",
            ));
        };
        let key = key.trim();
        let value = value.trim().trim_matches('"');
        if !key.contains('.') {
            return Err(Error::config(key, "keys take the form `section.key`"));
        }
        if entries.insert(key.to_string(), value.to_string()).is_some() {
            return Err(Error::config(key, "set more than once"));
        }
    }
    Ok(entries)
}

impl RunConfig {
    /// Resolves a config from file text, then `overrides` (flag values win),
    /// then defaults.
    pub fn parse(text: &str, overrides: &[(String, String)]) -> Result<Self> {
        let mut entries = parse_lines(text)?;
        for (key, value) in overrides {
            entries.insert(key.clone(), value.clone());
        }
        let mut config = RunConfig::default();
        for (key, value) in &entries {
            config.set(key, value)?;
        }
        config.validate()?;
        Ok(config)
    }

    pub fn from_file(path: &Path, overrides: &[(String, String)]) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text, overrides)
    }

    fn set(&mut self, key: &str, raw: &str) -> Result<()> {
        const COUNT: &str = "a non-negative integer";
        match key {
            "scene.side_m" => self.side_m = parse_f64(key, raw)?,
            "scene.bs_height_m" => self.bs_height_m = parse_f64(key, raw)?,
            "scene.rx_height_m" => self.rx_height_m = parse_f64(key, raw)?,
            "scene.bandwidth_hz" => self.bandwidth_hz = parse_f64(key, raw)?,
            "scene.noise_dbm" => self.noise_dbm = Some(parse_f64(key, raw)?),
            "scene.grid_resolution" => self.grid_resolution = parse_value(key, raw, COUNT)?,
            "pathloss.pl0_db" => self.pathloss.pl0_db = parse_f64(key, raw)?,
            "pathloss.d0_m" => self.pathloss.d0_m = parse_f64(key, raw)?,
            "pathloss.exponent" => self.pathloss.exponent = parse_f64(key, raw)?,
            "antenna.kind" => self.antenna_kind = parse_kind(key, raw)?,
            "antenna.gmax_dbi" => self.gmax_dbi = parse_f64(key, raw)?,
            "antenna.az_3db_deg" => self.az_3db_deg = parse_f64(key, raw)?,
            "antenna.el_3db_deg" => self.el_3db_deg = parse_f64(key, raw)?,
            "antenna.attenuation_max_db" => self.attenuation_max_db = parse_f64(key, raw)?,
            "shadowing.sigma_db" => self.shadowing_sigma_db = parse_f64(key, raw)?,
            "shadowing.correlation_m" => self.shadowing_correlation_m = parse_f64(key, raw)?,
            "shadowing.seed" => self.shadowing_seed = parse_value(key, raw, COUNT)?,
            "bounds.power_min_dbm" => self.power_min_dbm = parse_f64(key, raw)?,
            "bounds.power_max_dbm" => self.power_max_dbm = parse_f64(key, raw)?,
            "run.n_tx" => self.n_tx = parse_value(key, raw, COUNT)?,
            "run.method" => self.method = raw.parse()?,
            "run.seed" => self.seed = parse_value(key, raw, COUNT)?,
            "budget.t_total" => self.t_total = Some(parse_value(key, raw, COUNT)?),
            "budget.t_sub" => self.t_sub = parse_value(key, raw, COUNT)?,
            "budget.n_init" => self.n_init = parse_value(key, raw, COUNT)?,
            "budget.n_init_joint" => self.n_init_joint = parse_value(key, raw, COUNT)?,
            "acquisition.n_candidates" => {
                self.acquisition.n_candidates = parse_value(key, raw, COUNT)?
            }
            "acquisition.xi" => self.acquisition.xi = parse_f64(key, raw)?,
            "gp.max_points" => self.max_gp_points = parse_value(key, raw, COUNT)?,
            "output.dir" => self.out_dir = PathBuf::from(raw),
            _ if key.starts_with("result.") => {}
            _ => return Err(Error::config(key, "unknown key")),
        }
        Ok(())
    }

    pub fn t_total(&self) -> usize {
        self.t_total.unwrap_or(100 * self.n_tx)
    }

    pub fn noise_dbm(&self) -> f64 {
        self.noise_dbm
            .unwrap_or_else(|| thermal_noise_dbm(self.bandwidth_hz, DEFAULT_NOISE_FIGURE_DB))
    }

    pub fn settings(&self) -> BoSettings {
        BoSettings {
            t_total: self.t_total(),
            t_sub: self.t_sub,
            n_init: self.n_init,
            n_init_joint: self.n_init_joint,
            acquisition: self.acquisition,
            max_gp_points: self.max_gp_points,
        }
    }

    pub fn scene(&self) -> Result<Scene> {
        let shadowing = if self.shadowing_sigma_db > 0.0 {
            Some(Shadowing::new(
                self.shadowing_sigma_db,
                self.shadowing_correlation_m,
                self.shadowing_seed,
            )?)
        } else {
            None
        };
        let scene = Scene {
            side_m: self.side_m,
            bs_height_m: self.bs_height_m,
            rx_height_m: self.rx_height_m,
            bandwidth_hz: self.bandwidth_hz,
            noise_dbm: self.noise_dbm(),
            pathloss: self.pathloss,
            antenna: AntennaPattern {
                kind: self.antenna_kind,
                gmax_dbi: self.gmax_dbi,
                az_3db: self.az_3db_deg.to_radians(),
                el_3db: self.el_3db_deg.to_radians(),
                attenuation_max_db: self.attenuation_max_db,
            },
            grid_resolution: self.grid_resolution,
            shadowing,
        };
        scene.validate()?;
        Ok(scene)
    }

    pub fn bounds(&self) -> Result<ParameterBounds> {
        ParameterBounds::for_area(self.side_m, self.power_min_dbm, self.power_max_dbm)
    }

    /// Checks the config as a whole for `method`; errors name the key at
    /// fault.
    pub fn validate_for(&self, method: Method) -> Result<()> {
        if self.n_tx == 0 {
            return Err(Error::config("run.n_tx", "must be at least 1"));
        }
        if method.requires_square() && square_placement(self.n_tx, self.side_m).is_err() {
            return Err(Error::config(
                "run.n_tx",
                format!(
                    "{} needs a perfect-square station count, got {}; use naive-bo or bcd-bo for free placement",
                    method, self.n_tx
                ),
            ));
        }
        let t_total = self.t_total();
        if t_total == 0 {
            return Err(Error::config("budget.t_total", "must be positive"));
        }
        if self.n_init >= self.t_sub {
            return Err(Error::config(
                "budget.n_init",
                "must be smaller than budget.t_sub",
            ));
        }
        if method == Method::BcdBo && t_total < self.t_sub {
            return Err(Error::config(
                "budget.t_total",
                "must be at least budget.t_sub for bcd-bo",
            ));
        }
        if method != Method::BcdBo && self.n_init_joint >= t_total {
            return Err(Error::config(
                "budget.n_init_joint",
                "must be smaller than budget.t_total",
            ));
        }
        if self.acquisition.n_candidates == 0 {
            return Err(Error::config(
                "acquisition.n_candidates",
                "must be at least 1",
            ));
        }
        if self.acquisition.xi < 0.0 {
            return Err(Error::config("acquisition.xi", "must be non-negative"));
        }
        if self.max_gp_points < 2 {
            return Err(Error::config("gp.max_points", "must be at least 2"));
        }
        if !(self.power_min_dbm < self.power_max_dbm) {
            return Err(Error::config(
                "bounds.power_max_dbm",
                "must exceed bounds.power_min_dbm",
            ));
        }
        if self.shadowing_sigma_db < 0.0 {
            return Err(Error::config("shadowing.sigma_db", "must be non-negative"));
        }
        self.scene()
            .map_err(|e| Error::config("scene", e.to_string()))?;
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        self.validate_for(self.method)
    }

    /// `key = value` lines for every setting, in [`KEYS`] order, with
    /// derived defaults written out. Floats use shortest round-trip form.
    pub fn to_manifest(&self) -> String {
        let mut out = String::new();
        for key in KEYS {
            let value = match *key {
                "scene.side_m" => self.side_m.to_string(),
                "scene.bs_height_m" => self.bs_height_m.to_string(),
                "scene.rx_height_m" => self.rx_height_m.to_string(),
                "scene.bandwidth_hz" => self.bandwidth_hz.to_string(),
                "scene.noise_dbm" => self.noise_dbm().to_string(),
                "scene.grid_resolution" => self.grid_resolution.to_string(),
                "pathloss.pl0_db" => self.pathloss.pl0_db.to_string(),
                "pathloss.d0_m" => self.pathloss.d0_m.to_string(),
                "pathloss.exponent" => self.pathloss.exponent.to_string(),
                "antenna.kind" => kind_name(self.antenna_kind).to_string(),
                "antenna.gmax_dbi" => self.gmax_dbi.to_string(),
                "antenna.az_3db_deg" => self.az_3db_deg.to_string(),
                "antenna.el_3db_deg" => self.el_3db_deg.to_string(),
                "antenna.attenuation_max_db" => self.attenuation_max_db.to_string(),
                "shadowing.sigma_db" => self.shadowing_sigma_db.to_string(),
                "shadowing.correlation_m" => self.shadowing_correlation_m.to_string(),
                "shadowing.seed" => self.shadowing_seed.to_string(),
                "bounds.power_min_dbm" => self.power_min_dbm.to_string(),
                "bounds.power_max_dbm" => self.power_max_dbm.to_string(),
                "run.n_tx" => self.n_tx.to_string(),
                "run.method" => self.method.to_string(),
                "run.seed" => self.seed.to_string(),
                "budget.t_total" => self.t_total().to_string(),
                "budget.t_sub" => self.t_sub.to_string(),
                "budget.n_init" => self.n_init.to_string(),
                "budget.n_init_joint" => self.n_init_joint.to_string(),
                "acquisition.n_candidates" => self.acquisition.n_candidates.to_string(),
                "acquisition.xi" => self.acquisition.xi.to_string(),
                "gp.max_points" => self.max_gp_points.to_string(),
                "output.dir" => self.out_dir.display().to_string(),
                _ => unreachable!("every key has a manifest entry"),
            };
            let _ = writeln!(out, "{key} = {value}");
        }
        out
    }
}

/// Parses `key=value` override strings.
pub fn parse_override(s: &str) -> Result<(String, String)> {
    let (k, v) = s
        .split_once('=')
        .ok_or_else(|| Error::config(s, "overrides take the form `section.key=value`"))?;
    Ok((k.trim().to_string(), v.trim().to_string()))
}
