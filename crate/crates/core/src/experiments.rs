//! Experiment drivers behind the `ncs-aoi` binary.
//!
//! Each command returns a [`Report`] whose CSV text starts with `#` comment
//! lines recording every setting in use, followed by a fixed header row.
//! Analytic and simulated columns are always emitted side by side. Output
//! depends only on the settings (including the seed), never on the number of
//! worker threads.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::Deserialize;

use crate::analytic::{expected_aoi, expected_f_delta, required_max_delta};
use crate::channel::{TransmissionDistribution, DEFAULT_MASS_FLOOR};
use crate::error::{Error, Result};
use crate::lti::{build_cost_function, parse_matrix, SystemModel};
use crate::policy::{
    continuous_wait, make_policy, MeasSolution, PolicyKind, PolicySpec, WaitingPolicy,
    DEFAULT_EPSILON, DEFAULT_MAX_WAIT,
};
use crate::rng::replication_seed;
use crate::sim::{
    cycle_log_csv, run, run_full_logged, with_pool, SimConfig, SimMode, DEFAULT_CYCLES,
    DEFAULT_DIVERGENCE_THRESHOLD, DEFAULT_WARMUP,
};

pub const TABLE1_HEADER: &str =
    "p,zero_wait_analytic,zero_wait_sim,zero_wait_stderr,meas_beta,meas_analytic,meas_sim,meas_stderr";
pub const MEAS_CURVE_HEADER: &str = "p,y,g_continuous,g_floored";
pub const SWEEP_HEADER: &str = "a,p,policy,spectral_radius,analytic,sim,stderr,status";
pub const SIMULATE_HEADER: &str = "a,dist,policy,mode,cycles,seed,analytic,time_avg_sq_error,stderr,empirical_mean_aoi,expected_aoi,total_slots,total_cycles,status";
pub const ANALYZE_HEADER: &str =
    "a,sigma2,dist,policy,max_wait,mean_y,expected_aoi,expected_f_delta,gamma,meas_beta,meas_iterations,meas_residual";

pub const DEFAULT_TABLE1_P: [f64; 6] = [0.01, 0.05, 0.1, 0.2, 0.4, 0.8];
pub const DEFAULT_CURVE_P: [f64; 4] = [0.1, 0.3, 0.5, 0.7];
pub const DEFAULT_CURVE_Y_MAX: u64 = 10;

/// A plant matrix as given on the command line.
#[derive(Debug, Clone, PartialEq)]
pub enum MatrixSpec {
    Scalar(f64),
    File(PathBuf),
}

impl MatrixSpec {
    pub fn label(&self) -> String {
        match self {
            MatrixSpec::Scalar(a) => format!("{a}"),
            MatrixSpec::File(p) => p.display().to_string(),
        }
    }

    pub fn load(&self, sigma2: f64) -> Result<SystemModel> {
        match self {
            MatrixSpec::Scalar(a) => SystemModel::scalar(*a, sigma2),
            MatrixSpec::File(p) => SystemModel::new(load_matrix(p)?, sigma2),
        }
    }
}

pub fn load_matrix(path: &Path) -> Result<DMatrix<f64>> {
    parse_matrix(&std::fs::read_to_string(path)?)
}

/// Settings shared by all commands. Every field can come from a TOML config
/// file; command-line flags take precedence.
#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Settings {
    pub p: Vec<f64>,
    pub a: Vec<f64>,
    pub a_file: Vec<PathBuf>,
    pub dist_file: Option<PathBuf>,
    pub sigma2: f64,
    pub policy: Vec<String>,
    pub max_wait: u64,
    pub cycles: u64,
    pub warmup: u64,
    pub seed: u64,
    pub mass_floor: f64,
    pub epsilon: f64,
    pub mode: String,
    pub threads: Option<usize>,
    pub y_max: u64,
    pub divergence_threshold: f64,
}

impl Default for Settings {
    fn default() -> Self {
        Self {
            p: Vec::new(),
            a: Vec::new(),
            a_file: Vec::new(),
            dist_file: None,
            sigma2: 1.0,
            policy: Vec::new(),
            max_wait: DEFAULT_MAX_WAIT,
            cycles: DEFAULT_CYCLES,
            warmup: DEFAULT_WARMUP,
            seed: 0,
            mass_floor: DEFAULT_MASS_FLOOR,
            epsilon: DEFAULT_EPSILON,
            mode: "fast".into(),
            threads: None,
            y_max: DEFAULT_CURVE_Y_MAX,
            divergence_threshold: DEFAULT_DIVERGENCE_THRESHOLD,
        }
    }
}

impl Settings {
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Parse {
            line: 0,
            reason: e.to_string(),
        })
    }

    pub fn from_toml_file(path: &Path) -> Result<Self> {
        Self::from_toml(&std::fs::read_to_string(path)?)
    }

    fn p_or(&self, defaults: &[f64]) -> Vec<f64> {
        if self.p.is_empty() {
            defaults.to_vec()
        } else {
            self.p.clone()
        }
    }

    fn matrices_or(&self, default: f64) -> Vec<MatrixSpec> {
        let mut out: Vec<MatrixSpec> = self.a.iter().copied().map(MatrixSpec::Scalar).collect();
        out.extend(self.a_file.iter().cloned().map(MatrixSpec::File));
        if out.is_empty() {
            out.push(MatrixSpec::Scalar(default));
        }
        out
    }

    fn policies_or(&self, default: &[&str]) -> Result<Vec<PolicySpec>> {
        if self.policy.is_empty() {
            default.iter().map(|s| s.parse()).collect()
        } else {
            self.policy.iter().map(|s| s.parse()).collect()
        }
    }

    fn sim_mode(&self) -> Result<SimMode> {
        match self.mode.as_str() {
            "fast" | "renewal" => Ok(SimMode::RenewalFast),
            "full" => Ok(SimMode::FullTrajectory),
            other => Err(Error::invalid(
                "mode",
                format!("expected fast or full, got `{other}`"),
            )),
        }
    }

    fn validate(&self) -> Result<()> {
        if let Some(p) = self.p.iter().find(|&&p| !(p > 0.0 && p <= 1.0)) {
            return Err(Error::invalid("p", format!("must lie in (0, 1], got {p}")));
        }
        if self.sigma2.is_nan() || self.sigma2 <= 0.0 {
            return Err(Error::invalid("sigma2", "must be positive"));
        }
        if self.cycles == 0 {
            return Err(Error::invalid("cycles", "must be at least 1"));
        }
        self.sim_mode()?;
        Ok(())
    }

    fn distribution(&self, p: f64) -> Result<TransmissionDistribution> {
        TransmissionDistribution::geometric(p, self.mass_floor)
    }

    fn header(&self, command: &str) -> String {
        let list = |v: &[f64]| {
            v.iter()
                .map(|x| x.to_string())
                .collect::<Vec<_>>()
                .join(" ")
        };
        let mut h = String::new();
        let _ = writeln!(h, "# command={command}");
        let _ = writeln!(h, "# p={}", list(&self.p));
        let _ = writeln!(h, "# a={}", list(&self.a));
        let files: Vec<String> = self
            .a_file
            .iter()
            .map(|p| p.display().to_string())
            .collect();
        let _ = writeln!(h, "# a_file={}", files.join(" "));
        if let Some(f) = &self.dist_file {
            let _ = writeln!(h, "# dist_file={}", f.display());
        }
        let _ = writeln!(h, "# sigma2={}", self.sigma2);
        let _ = writeln!(h, "# policy={}", self.policy.join(" "));
        let _ = writeln!(h, "# max_wait={}", self.max_wait);
        let _ = writeln!(h, "# cycles={}", self.cycles);
        let _ = writeln!(h, "# warmup={}", self.warmup);
        let _ = writeln!(h, "# seed={}", self.seed);
        let _ = writeln!(h, "# mass_floor={:e}", self.mass_floor);
        let _ = writeln!(h, "# epsilon={:e}", self.epsilon);
        let _ = writeln!(h, "# mode={}", self.mode);
        let _ = writeln!(h, "# divergence_threshold={:e}", self.divergence_threshold);
        h
    }
}

/// Output of one command.
#[derive(Debug, Clone, PartialEq)]
pub struct Report {
    pub csv: String,
    /// Whether any row was flagged as diverged.
    pub diverged: bool,
}

fn num(x: f64) -> String {
    if x.is_finite() {
        format!("{x:.10}")
    } else {
        format!("{x}")
    }
}

fn sci(x: f64) -> String {
    if x.is_finite() {
        format!("{x:.6e}")
    } else {
        format!("{x}")
    }
}

/// Analytic `E[f(Δ)]` with a table sized for the policy.
pub fn analytic_cost(
    model: &SystemModel,
    dist: &TransmissionDistribution,
    policy: &WaitingPolicy,
) -> Result<f64> {
    let cost = build_cost_function(model, required_max_delta(dist, policy))?;
    Ok(expected_f_delta(&cost, dist, policy)?.value)
}

struct Table1Row {
    p: f64,
    zw_analytic: f64,
    zw_sim: f64,
    zw_se: f64,
    meas: MeasSolution,
    meas_analytic: f64,
    meas_sim: f64,
    meas_se: f64,
}

/// Zero-wait versus MEAS for the unit scalar plant over a list of `p`.
/// Simulated columns use the renewal-cycle estimator; both policies in a row
/// share one seed.
pub fn cmd_table1(settings: &Settings) -> Result<Report> {
    settings.validate()?;
    let ps = settings.p_or(&DEFAULT_TABLE1_P);
    let model = SystemModel::scalar(1.0, settings.sigma2)?;
    let rows = with_pool(settings.threads, || {
        ps.par_iter()
            .enumerate()
            .map(|(i, &p)| {
                let dist = settings.distribution(p)?;
                let zw = make_policy(PolicyKind::ZeroWait, &dist, settings.max_wait);
                let (meas, sol) =
                    PolicySpec::Meas.resolve(&dist, settings.max_wait, settings.epsilon)?;
                let seed = replication_seed(settings.seed, i as u64);
                let sim = |policy: &WaitingPolicy| {
                    run(&SimConfig::new(model.clone(), dist.clone(), policy.clone())
                        .cycles(settings.cycles)
                        .warmup(settings.warmup)
                        .seed(seed)
                        .mode(SimMode::RenewalFast))
                };
                let zs = sim(&zw)?;
                let ms = sim(&meas)?;
                Ok(Table1Row {
                    p,
                    zw_analytic: analytic_cost(&model, &dist, &zw)?,
                    zw_sim: zs.time_avg_sq_error,
                    zw_se: zs.stderr_sq_error,
                    meas: sol.expect("meas resolves a solution"),
                    meas_analytic: analytic_cost(&model, &dist, &meas)?,
                    meas_sim: ms.time_avg_sq_error,
                    meas_se: ms.stderr_sq_error,
                })
            })
            .collect::<Result<Vec<_>>>()
    })?;
    let mut csv = settings.header("table1");
    csv.push_str(TABLE1_HEADER);
    csv.push('\n');
    for r in rows {
        let _ = writeln!(
            csv,
            "{},{},{},{},{},{},{},{}",
            r.p,
            num(r.zw_analytic),
            num(r.zw_sim),
            sci(r.zw_se),
            num(r.meas.beta),
            num(r.meas_analytic),
            num(r.meas_sim),
            sci(r.meas_se)
        );
    }
    Ok(Report {
        csv,
        diverged: false,
    })
}

/// MEAS waiting function `g(y)` for `y = 1..=y_max`, continuous and floored.
pub fn cmd_meas_curve(settings: &Settings) -> Result<Report> {
    settings.validate()?;
    let ps = settings.p_or(&DEFAULT_CURVE_P);
    let mut csv = settings.header("meas-curve");
    csv.push_str(MEAS_CURVE_HEADER);
    csv.push('\n');
    for p in ps {
        let dist = settings.distribution(p)?;
        let (policy, sol) = PolicySpec::Meas.resolve(&dist, settings.max_wait, settings.epsilon)?;
        let beta = sol.expect("meas resolves a solution").beta;
        for y in 1..=settings.y_max {
            let _ = writeln!(
                csv,
                "{p},{y},{},{}",
                num(continuous_wait(beta, y)),
                policy.wait(y)
            );
        }
    }
    Ok(Report {
        csv,
        diverged: false,
    })
}

struct SweepCell {
    a: MatrixSpec,
    p: f64,
    policy: PolicySpec,
}

/// One row per `(A, p, policy)`; plants with spectral radius above one are
/// flagged `diverged` instead of evaluated.
pub fn cmd_sweep(settings: &Settings) -> Result<Report> {
    settings.validate()?;
    let mode = settings.sim_mode()?;
    let matrices = settings.matrices_or(1.0);
    let ps = settings.p_or(&DEFAULT_TABLE1_P);
    let policies = settings.policies_or(&["zero-wait", "meas"])?;
    let mut cells = Vec::new();
    for a in &matrices {
        for &p in &ps {
            for &policy in &policies {
                cells.push(SweepCell {
                    a: a.clone(),
                    p,
                    policy,
                });
            }
        }
    }
    let rows = with_pool(settings.threads, || {
        cells
            .par_iter()
            .enumerate()
            .map(|(i, cell)| {
                let model = cell.a.load(settings.sigma2)?;
                let radius = model.spectral_radius();
                let label = format!("{},{},{}", cell.a.label(), cell.p, cell.policy);
                if radius > 1.0 {
                    return Ok((
                        format!("{label},{},inf,inf,NaN,diverged", num(radius)),
                        true,
                    ));
                }
                let dist = settings.distribution(cell.p)?;
                let (policy, _) =
                    cell.policy
                        .resolve(&dist, settings.max_wait, settings.epsilon)?;
                let analytic = match analytic_cost(&model, &dist, &policy) {
                    Ok(v) => v,
                    Err(Error::CostOverflow { .. }) => {
                        return Ok((
                            format!("{label},{},inf,inf,NaN,diverged", num(radius)),
                            true,
                        ))
                    }
                    Err(e) => return Err(e),
                };
                let m = run(&SimConfig::new(model, dist, policy)
                    .cycles(settings.cycles)
                    .warmup(settings.warmup)
                    .seed(replication_seed(settings.seed, i as u64))
                    .mode(mode)
                    .divergence_threshold(settings.divergence_threshold))?;
                let status = if m.diverged() { "diverged" } else { "ok" };
                Ok((
                    format!(
                        "{label},{},{},{},{},{status}",
                        num(radius),
                        num(analytic),
                        num(m.time_avg_sq_error),
                        sci(m.stderr_sq_error)
                    ),
                    m.diverged(),
                ))
            })
            .collect::<Result<Vec<_>>>()
    })?;
    let mut csv = settings.header("sweep");
    csv.push_str(SWEEP_HEADER);
    csv.push('\n');
    let mut diverged = false;
    for (line, flag) in rows {
        csv.push_str(&line);
        csv.push('\n');
        diverged |= flag;
    }
    Ok(Report { csv, diverged })
}

fn single_distribution(settings: &Settings) -> Result<(TransmissionDistribution, String)> {
    match (&settings.dist_file, settings.p.as_slice()) {
        (Some(path), []) => Ok((
            TransmissionDistribution::from_pmf_file(path)?,
            format!("file:{}", path.display()),
        )),
        (None, [p]) => Ok((settings.distribution(*p)?, format!("geometric:{p}"))),
        (None, []) => Err(Error::invalid("p", "one of --p or --dist-file is required")),
        _ => Err(Error::invalid(
            "p",
            "give exactly one --p value or a --dist-file",
        )),
    }
}

fn single_matrix(settings: &Settings) -> Result<MatrixSpec> {
    let all = settings.matrices_or(1.0);
    match all.as_slice() {
        [one] => Ok(one.clone()),
        _ => Err(Error::invalid("a", "give exactly one --a or --a-file")),
    }
}

fn single_policy(settings: &Settings) -> Result<PolicySpec> {
    match settings.policies_or(&["zero-wait"])?.as_slice() {
        [one] => Ok(*one),
        _ => Err(Error::invalid("policy", "give exactly one --policy")),
    }
}

/// One simulation run with its analytic counterpart. When `cycle_log` is
/// given (full mode only) the per-cycle CSV is written there.
pub fn cmd_simulate(settings: &Settings, cycle_log: Option<&Path>) -> Result<Report> {
    settings.validate()?;
    let mode = settings.sim_mode()?;
    let a = single_matrix(settings)?;
    let model = a.load(settings.sigma2)?;
    let (dist, dist_label) = single_distribution(settings)?;
    let spec = single_policy(settings)?;
    let (policy, _) = spec.resolve(&dist, settings.max_wait, settings.epsilon)?;
    let unstable = model.spectral_radius() > 1.0;
    let analytic = if unstable {
        f64::INFINITY
    } else {
        match analytic_cost(&model, &dist, &policy) {
            Ok(v) => v,
            Err(Error::CostOverflow { .. }) => f64::INFINITY,
            Err(e) => return Err(e),
        }
    };
    let aoi = expected_aoi(&dist, &policy)?.value;
    let config = SimConfig::new(model, dist, policy)
        .cycles(settings.cycles)
        .warmup(settings.warmup)
        .seed(settings.seed)
        .mode(mode)
        .divergence_threshold(settings.divergence_threshold);
    let metrics = match (mode, cycle_log) {
        (SimMode::FullTrajectory, Some(path)) => {
            let out = run_full_logged(&config, true, false)?;
            std::fs::write(path, cycle_log_csv(&out.cycles))?;
            out.metrics
        }
        (SimMode::RenewalFast, Some(_)) => {
            return Err(Error::invalid("cycle_log", "cycle logs need --mode full"))
        }
        (_, None) if unstable && mode == SimMode::RenewalFast => {
            return Err(Error::invalid(
                "mode",
                "spectral radius exceeds 1; use --mode full to observe divergence",
            ))
        }
        _ => run(&config)?,
    };
    let diverged = metrics.diverged() || unstable;
    let mut csv = settings.header("simulate");
    csv.push_str(SIMULATE_HEADER);
    csv.push('\n');
    let _ = writeln!(
        csv,
        "{},{dist_label},{spec},{},{},{},{},{},{},{},{},{},{},{}",
        a.label(),
        settings.mode,
        settings.cycles,
        settings.seed,
        num(analytic),
        num(metrics.time_avg_sq_error),
        sci(metrics.stderr_sq_error),
        num(metrics.empirical_mean_aoi),
        num(aoi),
        metrics.total_slots,
        metrics.total_cycles,
        if diverged { "diverged" } else { "ok" }
    );
    Ok(Report { csv, diverged })
}

/// Analytic quantities at a single operating point: `E[Δ]`, `E[f(Δ)]`, `γ`
/// when the cost is linear, and the MEAS solution.
pub fn cmd_analyze(settings: &Settings) -> Result<Report> {
    settings.validate()?;
    let a = single_matrix(settings)?;
    let model = a.load(settings.sigma2)?;
    let (dist, dist_label) = single_distribution(settings)?;
    let spec = single_policy(settings)?;
    let (policy, _) = spec.resolve(&dist, settings.max_wait, settings.epsilon)?;
    let (_, meas) = PolicySpec::Meas.resolve(&dist, settings.max_wait, settings.epsilon)?;
    let meas = meas.expect("meas resolves a solution");
    let aoi = expected_aoi(&dist, &policy)?.value;
    let radius = model.spectral_radius();
    let (f_delta, gamma) = match build_cost_function(&model, required_max_delta(&dist, &policy)) {
        Ok(cost) => (expected_f_delta(&cost, &dist, &policy)?.value, cost.gamma()),
        Err(Error::CostOverflow { .. }) => (f64::INFINITY, None),
        Err(e) => return Err(e),
    };
    let diverged = radius > 1.0 || !f_delta.is_finite();

    let mut csv = settings.header("analyze");
    let _ = writeln!(
        csv,
        "# A = {} (d = {}, spectral radius {})",
        a.label(),
        model.dim(),
        num(radius)
    );
    let _ = writeln!(
        csv,
        "# channel = {dist_label}, E[Y] = {}, E[Y^2] = {}",
        num(dist.mean()),
        num(dist.second_moment())
    );
    let _ = writeln!(csv, "# policy = {spec}, max wait {}", settings.max_wait);
    let _ = writeln!(csv, "# E[AoI] = {}", num(aoi));
    let _ = writeln!(
        csv,
        "# E[f(AoI)] = {}{}",
        num(f_delta),
        if diverged { " (diverged)" } else { "" }
    );
    match gamma {
        Some(g) => {
            let _ = writeln!(
                csv,
                "# linear cost: gamma = {}, E[f(AoI)] = gamma * E[AoI]",
                num(g)
            );
        }
        None => {
            let _ = writeln!(csv, "# cost is not linear in the age");
        }
    }
    let _ = writeln!(
        csv,
        "# MEAS beta = {} ({} iterations, residual {})",
        num(meas.beta),
        meas.iterations,
        sci(meas.residual)
    );
    csv.push_str(ANALYZE_HEADER);
    csv.push('\n');
    let _ = writeln!(
        csv,
        "{},{},{dist_label},{spec},{},{},{},{},{},{},{},{}",
        a.label(),
        settings.sigma2,
        settings.max_wait,
        num(dist.mean()),
        num(aoi),
        num(f_delta),
        gamma.map(num).unwrap_or_default(),
        num(meas.beta),
        meas.iterations,
        sci(meas.residual)
    );
    Ok(Report { csv, diverged })
}
