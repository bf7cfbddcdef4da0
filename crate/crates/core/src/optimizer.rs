//! Optimization strategies over deployments.
//!
//! * [`run_bcd_bo`]: block coordinate descent where each block (one base
//!   station) is optimized by a short BO run with every other station held
//!   at the incumbent. Each cycle visits the stations in a fresh random order.
//! * [`run_naive_bo`]: one BO run over all `6·n_tx` dimensions.
//! * [`run_square_baseline`]: stations pinned to a square lattice; joint BO
//!   over power (omni) or power and orientation (directional).
//!
//! Budget accounting: every objective call costs one evaluation of the
//! global budget, and inside a subproblem also one of the subproblem budget.
//! The incumbent injected into a subproblem's observation set is free.

use std::fmt;
use std::ops::Range;
use std::str::FromStr;

use crate::acquisition::{propose_next, AcquisitionConfig};
use crate::domain::{
    decode_block, decode_deployment, encode_block, square_placement, BsConfig, BudgetState,
    Deployment, ParameterBounds, BLOCK_DIM,
};
use crate::error::{Error, Result};
use crate::gp::{fit, select_hyperparams, GpModel, KernelParams};
use crate::radio::{AntennaKind, Scene};
use crate::rng::RngStream;

/// The expensive black box.
pub trait Objective {
    fn evaluate(&mut self, dep: &Deployment) -> f64;
}

impl<F: FnMut(&Deployment) -> f64> Objective for F {
    fn evaluate(&mut self, dep: &Deployment) -> f64 {
        self(dep)
    }
}

/// Wraps an objective and counts calls.
#[derive(Debug)]
pub struct CountingObjective<O> {
    inner: O,
    calls: usize,
}

impl<O: Objective> CountingObjective<O> {
    pub fn new(inner: O) -> Self {
        Self { inner, calls: 0 }
    }

    pub fn calls(&self) -> usize {
        self.calls
    }
}

impl<O: Objective> Objective for CountingObjective<O> {
    fn evaluate(&mut self, dep: &Deployment) -> f64 {
        self.calls += 1;
        self.inner.evaluate(dep)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Method {
    NaiveBo,
    BcdBo,
    SquareOmni,
    SquareDir,
}

impl Method {
    pub const ALL: [Method; 4] = [
        Method::SquareDir,
        Method::SquareOmni,
        Method::NaiveBo,
        Method::BcdBo,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            Method::NaiveBo => "naive-bo",
            Method::BcdBo => "bcd-bo",
            Method::SquareOmni => "square-omni",
            Method::SquareDir => "square-dir",
        }
    }

    pub fn requires_square(&self) -> bool {
        matches!(self, Method::SquareOmni | Method::SquareDir)
    }

    /// Scene the method is evaluated in: the square baselines force their
    /// antenna kind, the free-placement methods use the scene as configured.
    pub fn evaluation_scene(&self, scene: &Scene) -> Scene {
        match self {
            Method::SquareOmni => scene.with_antenna_kind(AntennaKind::Omni),
            Method::SquareDir => scene.with_antenna_kind(AntennaKind::Directional),
            Method::NaiveBo | Method::BcdBo => scene.clone(),
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Method::ALL
            .into_iter()
            .find(|m| m.as_str() == s)
            .ok_or_else(|| Error::config("run.method", format!("unknown method `{s}` (expected naive-bo, bcd-bo, square-omni or square-dir)")))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BoSettings {
    pub t_total: usize,
    pub t_sub: usize,
    pub n_init: usize,
    pub n_init_joint: usize,
    pub acquisition: AcquisitionConfig,
    /// Most observations a surrogate is fitted on; larger joint observation
    /// sets keep the best half and the most recent rest.
    pub max_gp_points: usize,
}

pub const DEFAULT_MAX_GP_POINTS: usize = 50;

impl BoSettings {
    /// `T_total = 100·n_tx`, `T_sub = 25`, `N_init = 10`.
    pub fn for_stations(n_tx: usize) -> Self {
        Self {
            t_total: 100 * n_tx,
            t_sub: 25,
            n_init: 10,
            n_init_joint: 10,
            acquisition: AcquisitionConfig::default(),
            max_gp_points: DEFAULT_MAX_GP_POINTS,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.acquisition.validate()?;
        if self.t_total == 0 {
            return Err(Error::Budget("T_total must be positive".into()));
        }
        if self.n_init >= self.t_sub {
            return Err(Error::Budget(format!(
                "N_init ({}) must be smaller than T_sub ({})",
                self.n_init, self.t_sub
            )));
        }
        if self.max_gp_points < 2 {
            return Err(Error::Budget("max_gp_points must be at least 2".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Incumbent {
    pub deployment: Deployment,
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TraceRecord {
    /// 1-based evaluation index.
    pub t_total: usize,
    pub y: f64,
    pub y_best: f64,
    pub deployment: Deployment,
    /// Station being optimized, for BCD subproblem evaluations.
    pub block: Option<usize>,
}

/// One BCD subproblem: which station, the incumbent it started from, and the
/// trace records it produced.
#[derive(Debug, Clone, PartialEq)]
pub struct Segment {
    pub cycle: usize,
    pub block: usize,
    pub incumbent: Incumbent,
    pub records: Range<usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunTrace {
    pub method: Method,
    pub seed: u64,
    pub settings: BoSettings,
    pub records: Vec<TraceRecord>,
    pub segments: Vec<Segment>,
}

impl RunTrace {
    fn new(method: Method, seed: u64, settings: &BoSettings) -> Self {
        Self {
            method,
            seed,
            settings: settings.clone(),
            records: Vec::with_capacity(settings.t_total),
            segments: Vec::new(),
        }
    }

    pub fn final_best(&self) -> Option<f64> {
        self.records.last().map(|r| r.y_best)
    }

    fn push(&mut self, t_total: usize, y: f64, deployment: Deployment, block: Option<usize>) {
        let y_best = self.final_best().map_or(y, |b| if y > b { y } else { b });
        self.records.push(TraceRecord {
            t_total,
            y,
            y_best,
            deployment,
            block,
        });
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunOutcome {
    pub best: Deployment,
    pub best_y: f64,
    pub trace: RunTrace,
}

/// Uniform random permutation of `0..n` (Fisher–Yates).
pub fn sample_permutation(n: usize, rng: &mut RngStream) -> Vec<usize> {
    let mut order: Vec<usize> = (0..n).collect();
    for i in (1..n).rev() {
        let j = rng.index(i + 1);
        order.swap(i, j);
    }
    order
}

/// Observations fed to the surrogate: all of them when they fit, otherwise
/// the best half plus the most recent.
fn training_window(values: &[f64], cap: usize) -> Vec<usize> {
    let m = values.len();
    if m <= cap {
        return (0..m).collect();
    }
    let mut by_value: Vec<usize> = (0..m).collect();
    by_value.sort_by(|&a, &b| values[b].total_cmp(&values[a]).then(a.cmp(&b)));
    let mut keep = vec![false; m];
    for &i in by_value.iter().take(cap / 2) {
        keep[i] = true;
    }
    let mut kept = cap / 2;
    for i in (0..m).rev() {
        if kept == cap {
            break;
        }
        if !keep[i] {
            keep[i] = true;
            kept += 1;
        }
    }
    (0..m).filter(|&i| keep[i]).collect()
}

/// Fits a surrogate with selected hyperparameters; on an ill-conditioned
/// fit, retries with larger noise.
fn fit_surrogate(points: &[Vec<f64>], values: &[f64], cap: usize) -> Option<GpModel> {
    let window = training_window(values, cap);
    let x: Vec<Vec<f64>> = window.iter().map(|&i| points[i].clone()).collect();
    let y: Vec<f64> = window.iter().map(|&i| values[i]).collect();
    let params = select_hyperparams(&x, &y).ok()?;
    let mut noise = params.noise_variance();
    loop {
        let p = KernelParams::new(
            params.lengthscales().to_vec(),
            params.signal_variance(),
            noise,
        )
        .ok()?;
        match fit(&x, &y, &p) {
            Ok(model) => return Some(model),
            Err(_) if noise < 1.0 => noise = (noise * 100.0).max(1e-6),
            Err(_) => return None,
        }
    }
}

/// Next point to evaluate: the EI maximizer, or a uniform draw when no
/// surrogate could be fitted.
fn next_point(
    points: &[Vec<f64>],
    values: &[f64],
    dim: usize,
    settings: &BoSettings,
    rng: &mut RngStream,
) -> Vec<f64> {
    let y_best = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    match fit_surrogate(points, values, settings.max_gp_points) {
        Some(model) => propose_next(&model, y_best, &settings.acquisition, rng),
        None => rng.unit_point(dim),
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SubproblemOutcome {
    pub block: usize,
    pub best_config: BsConfig,
    pub best_value: f64,
    pub records: Vec<TraceRecord>,
}

/// BO over the parameters of station `block`, all others fixed at the
/// incumbent.
///
/// The observation set starts with the incumbent's block and value, then
/// `N_init` uniform samples, then EI-selected points until the subproblem or
/// global budget runs out.
pub fn run_subproblem_bo(
    block: usize,
    incumbent: &Incumbent,
    objective: &mut dyn Objective,
    bounds: &ParameterBounds,
    budget: &mut BudgetState,
    settings: &BoSettings,
    rng: &RngStream,
) -> Result<SubproblemOutcome> {
    let current = incumbent.deployment.stations()[block];
    let mut configs = vec![current];
    let mut points = vec![encode_block(&current, bounds)?.to_vec()];
    let mut values = vec![incumbent.value];
    let mut records = Vec::new();
    let mut running_best = incumbent.value;

    budget.start_subproblem();
    let mut evaluate = |point: Vec<f64>,
                        budget: &mut BudgetState,
                        configs: &mut Vec<BsConfig>,
                        points: &mut Vec<Vec<f64>>,
                        values: &mut Vec<f64>|
     -> Result<()> {
        let bs = decode_block(&point, bounds)?;
        let dep = incumbent.deployment.with_station(block, bs);
        budget.consume_sub();
        let y = objective.evaluate(&dep);
        if y > running_best {
            running_best = y;
        }
        records.push(TraceRecord {
            t_total: budget.t_total(),
            y,
            y_best: running_best,
            deployment: dep,
            block: Some(block),
        });
        configs.push(bs);
        points.push(point);
        values.push(y);
        Ok(())
    };

    let mut init_rng = rng.fork("init", 0);
    for _ in 0..budget.n_init() {
        if budget.sub_exhausted() {
            break;
        }
        let point = init_rng.unit_point(BLOCK_DIM);
        evaluate(point, budget, &mut configs, &mut points, &mut values)?;
    }
    let mut step = 0;
    while !budget.sub_exhausted() {
        let mut cand_rng = rng.fork("candidates", step);
        let point = next_point(&points, &values, BLOCK_DIM, settings, &mut cand_rng);
        evaluate(point, budget, &mut configs, &mut points, &mut values)?;
        step += 1;
    }

    let mut best = 0;
    for i in 1..values.len() {
        if values[i] > values[best] {
            best = i;
        }
    }
    Ok(SubproblemOutcome {
        block,
        best_config: configs[best],
        best_value: values[best],
        records,
    })
}

fn check_stations(n_tx: usize) -> Result<()> {
    if n_tx == 0 {
        return Err(Error::InvalidParameter("n_tx must be at least 1".into()));
    }
    Ok(())
}

/// Block-coordinate-descent BO.
pub fn run_bcd_bo(
    objective: &mut dyn Objective,
    bounds: &ParameterBounds,
    n_tx: usize,
    settings: &BoSettings,
    rng: &RngStream,
) -> Result<RunOutcome> {
    check_stations(n_tx)?;
    settings.validate()?;
    if settings.t_total < settings.t_sub {
        return Err(Error::Budget(format!(
            "T_total ({}) must be at least T_sub ({})",
            settings.t_total, settings.t_sub
        )));
    }
    let mut budget = BudgetState::new(settings.t_total, settings.t_sub, settings.n_init)?;
    let mut trace = RunTrace::new(Method::BcdBo, rng.seed(), settings);

    let start = rng.fork("incumbent-init", 0).unit_point(BLOCK_DIM * n_tx);
    let deployment = decode_deployment(&start, n_tx, bounds)?;
    budget.consume_total();
    let value = objective.evaluate(&deployment);
    trace.push(budget.t_total(), value, deployment.clone(), None);
    let mut incumbent = Incumbent { deployment, value };

    let mut cycle = 0;
    let mut subproblem = 0;
    while !budget.total_exhausted() {
        let order = sample_permutation(n_tx, &mut rng.fork("permutation", cycle as u64));
        for block in order {
            if budget.total_exhausted() {
                break;
            }
            let outcome = run_subproblem_bo(
                block,
                &incumbent,
                objective,
                bounds,
                &mut budget,
                settings,
                &rng.fork("subproblem", subproblem),
            )?;
            let first = trace.records.len();
            trace.records.extend(outcome.records);
            trace.segments.push(Segment {
                cycle,
                block,
                incumbent: incumbent.clone(),
                records: first..trace.records.len(),
            });
            incumbent = Incumbent {
                deployment: incumbent
                    .deployment
                    .with_station(block, outcome.best_config),
                value: outcome.best_value,
            };
            subproblem += 1;
        }
        cycle += 1;
    }

    Ok(RunOutcome {
        best: incumbent.deployment,
        best_y: incumbent.value,
        trace,
    })
}

/// Search space of a joint BO run, mapping unit-box points to deployments.
#[derive(Debug, Clone)]
pub enum JointSpace {
    /// All `6·n_tx` parameters.
    Full {
        n_tx: usize,
        bounds: ParameterBounds,
    },
    /// Fixed positions; one power per station, orientation zero.
    PowerOnly {
        positions: Vec<(f64, f64)>,
        bounds: ParameterBounds,
    },
    /// Fixed positions; power, yaw, pitch and roll per station.
    PowerAndOrientation {
        positions: Vec<(f64, f64)>,
        bounds: ParameterBounds,
    },
}

impl JointSpace {
    pub fn dim(&self) -> usize {
        match self {
            JointSpace::Full { n_tx, .. } => BLOCK_DIM * n_tx,
            JointSpace::PowerOnly { positions, .. } => positions.len(),
            JointSpace::PowerAndOrientation { positions, .. } => 4 * positions.len(),
        }
    }

    pub fn decode(&self, v: &[f64]) -> Result<Deployment> {
        if v.len() != self.dim() {
            return Err(Error::Shape {
                expected: self.dim(),
                got: v.len(),
            });
        }
        match self {
            JointSpace::Full { n_tx, bounds } => decode_deployment(v, *n_tx, bounds),
            JointSpace::PowerOnly { positions, bounds } => {
                let stations = positions
                    .iter()
                    .zip(v)
                    .map(|(&(x, y), &u)| pinned(bounds, x, y, &[u, 0.5, 0.5, 0.5]))
                    .collect::<Result<_>>()?;
                Ok(Deployment::new(stations))
            }
            JointSpace::PowerAndOrientation { positions, bounds } => {
                let stations = positions
                    .iter()
                    .zip(v.chunks_exact(4))
                    .map(|(&(x, y), u)| pinned(bounds, x, y, u))
                    .collect::<Result<_>>()?;
                Ok(Deployment::new(stations))
            }
        }
    }
}

/// Station at a fixed position with `[power, yaw, pitch, roll]` from the
/// unit box. The angle midpoints are the zero orientation.
fn pinned(bounds: &ParameterBounds, x: f64, y: f64, u: &[f64]) -> Result<BsConfig> {
    let mut block = [0.0; BLOCK_DIM];
    block[2..].copy_from_slice(u);
    let bs = decode_block(&block, bounds)?;
    Ok(BsConfig {
        x_m: x,
        y_m: y,
        power_dbm: bs.power_dbm,
        orientation: bs.orientation,
    })
}

/// BO over a joint space: `n_init_joint` uniform samples, then EI-selected
/// points until `t_total` evaluations have been made.
pub fn run_joint_bo(
    method: Method,
    space: &JointSpace,
    objective: &mut dyn Objective,
    settings: &BoSettings,
    rng: &RngStream,
) -> Result<RunOutcome> {
    settings.validate()?;
    if settings.n_init_joint >= settings.t_total {
        return Err(Error::Budget(format!(
            "N_init_joint ({}) must be smaller than T_total ({})",
            settings.n_init_joint, settings.t_total
        )));
    }
    let dim = space.dim();
    let mut trace = RunTrace::new(method, rng.seed(), settings);
    let mut points: Vec<Vec<f64>> = Vec::with_capacity(settings.t_total);
    let mut values = Vec::with_capacity(settings.t_total);
    let mut deployments = Vec::with_capacity(settings.t_total);

    let mut init_rng = rng.fork("joint-init", 0);
    let mut step = 0;
    while points.len() < settings.t_total {
        let point = if points.len() < settings.n_init_joint {
            init_rng.unit_point(dim)
        } else {
            let mut cand_rng = rng.fork("candidates", step);
            step += 1;
            next_point(&points, &values, dim, settings, &mut cand_rng)
        };
        let dep = space.decode(&point)?;
        let y = objective.evaluate(&dep);
        trace.push(points.len() + 1, y, dep.clone(), None);
        points.push(point);
        values.push(y);
        deployments.push(dep);
    }

    let mut best = 0;
    for i in 1..values.len() {
        if values[i] > values[best] {
            best = i;
        }
    }
    Ok(RunOutcome {
        best: deployments.swap_remove(best),
        best_y: values[best],
        trace,
    })
}

/// Naive BO over all `6·n_tx` parameters.
pub fn run_naive_bo(
    objective: &mut dyn Objective,
    bounds: &ParameterBounds,
    n_tx: usize,
    settings: &BoSettings,
    rng: &RngStream,
) -> Result<RunOutcome> {
    check_stations(n_tx)?;
    let space = JointSpace::Full {
        n_tx,
        bounds: bounds.clone(),
    };
    run_joint_bo(Method::NaiveBo, &space, objective, settings, rng)
}

/// Square-lattice placement with joint BO over the remaining parameters:
/// power only for omni antennas, power and orientation for directional.
pub fn run_square_baseline(
    objective: &mut dyn Objective,
    bounds: &ParameterBounds,
    side_m: f64,
    n_tx: usize,
    antenna: AntennaKind,
    settings: &BoSettings,
    rng: &RngStream,
) -> Result<RunOutcome> {
    let positions = square_placement(n_tx, side_m)?;
    let bounds = bounds.clone();
    let (method, space) = match antenna {
        AntennaKind::Omni => (
            Method::SquareOmni,
            JointSpace::PowerOnly { positions, bounds },
        ),
        AntennaKind::Directional => (
            Method::SquareDir,
            JointSpace::PowerAndOrientation { positions, bounds },
        ),
    };
    run_joint_bo(method, &space, objective, settings, rng)
}

/// Runs `method`; `objective` must evaluate in `method.evaluation_scene(..)`.
pub fn run_method(
    method: Method,
    objective: &mut dyn Objective,
    bounds: &ParameterBounds,
    side_m: f64,
    n_tx: usize,
    settings: &BoSettings,
    seed: u64,
) -> Result<RunOutcome> {
    let rng = RngStream::new(seed);
    match method {
        Method::BcdBo => run_bcd_bo(objective, bounds, n_tx, settings, &rng),
        Method::NaiveBo => run_naive_bo(objective, bounds, n_tx, settings, &rng),
        Method::SquareOmni => run_square_baseline(
            objective,
            bounds,
            side_m,
            n_tx,
            AntennaKind::Omni,
            settings,
            &rng,
        ),
        Method::SquareDir => run_square_baseline(
            objective,
            bounds,
            side_m,
            n_tx,
            AntennaKind::Directional,
            settings,
            &rng,
        ),
    }
}
