//! Monte Carlo simulation of the sampling loop.
//!
//! Two estimators of the same limit are provided: [`run_full`] simulates
//! every slot with Gaussian plant noise and measures `‖e_n‖²` directly;
//! [`run_renewal_fast`] samples only `(Y_{k-1}, Y_k)` per cycle and adds the
//! conditional expected cycle cost from the cost table.
//!
//! Timing convention: the first sample is generated at slot 0 and its
//! departure `D_0 = Y_0` is the origin of every metric. Cycle `k` covers the
//! slots `D_{k-1}, …, D_k - 1`.

mod closed_loop;
mod fast;
mod full;

use rayon::prelude::*;

pub use closed_loop::{run_closed_loop_demo, ClosedLoopLog, DemoSlot};
pub use fast::run_renewal_fast;
pub use full::{run_full, run_full_logged, SlotRecord};

use crate::channel::TransmissionDistribution;
use crate::error::{Error, Result};
use crate::lti::SystemModel;
use crate::policy::WaitingPolicy;
use crate::rng::replication_seed;

pub const DEFAULT_CYCLES: u64 = 1_000_000;
pub const DEFAULT_WARMUP: u64 = 1_000;
pub const DEFAULT_BATCHES: usize = 100;
pub const DEFAULT_DIVERGENCE_THRESHOLD: f64 = 1e6;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SimMode {
    FullTrajectory,
    RenewalFast,
}

#[derive(Debug, Clone)]
pub struct SimConfig {
    pub model: SystemModel,
    pub dist: TransmissionDistribution,
    pub policy: WaitingPolicy,
    pub cycles: u64,
    pub seed: u64,
    pub warmup_cycles: u64,
    pub mode: SimMode,
    pub batches: usize,
    /// Running time-average, in units of `Tr(Σ)`, above which a full run
    /// stops and reports divergence.
    pub divergence_threshold: f64,
    /// Optional cap on counted slots; the run ends with the cycle that crosses it.
    pub max_slots: Option<u64>,
}

impl SimConfig {
    pub fn new(model: SystemModel, dist: TransmissionDistribution, policy: WaitingPolicy) -> Self {
        Self {
            model,
            dist,
            policy,
            cycles: DEFAULT_CYCLES,
            seed: 0,
            warmup_cycles: DEFAULT_WARMUP,
            mode: SimMode::FullTrajectory,
            batches: DEFAULT_BATCHES,
            divergence_threshold: DEFAULT_DIVERGENCE_THRESHOLD,
            max_slots: None,
        }
    }

    pub fn cycles(mut self, cycles: u64) -> Self {
        self.cycles = cycles;
        self
    }

    pub fn seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn warmup(mut self, warmup_cycles: u64) -> Self {
        self.warmup_cycles = warmup_cycles;
        self
    }

    pub fn mode(mut self, mode: SimMode) -> Self {
        self.mode = mode;
        self
    }

    pub fn divergence_threshold(mut self, threshold: f64) -> Self {
        self.divergence_threshold = threshold;
        self
    }

    pub fn max_slots(mut self, max_slots: u64) -> Self {
        self.max_slots = Some(max_slots);
        self
    }

    pub(crate) fn validate(&self) -> Result<()> {
        if self.cycles == 0 {
            return Err(Error::invalid(
                "cycles",
                "at least one counted cycle is required",
            ));
        }
        if self.batches == 0 {
            return Err(Error::invalid("batches", "must be at least 1"));
        }
        if self.divergence_threshold.is_nan() || self.divergence_threshold <= 0.0 {
            return Err(Error::invalid("divergence_threshold", "must be positive"));
        }
        Ok(())
    }
}

/// One renewal cycle between consecutive departures.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CycleRecord {
    pub k: u64,
    pub y_prev: u64,
    pub wait: u64,
    pub y_cur: u64,
    /// `ζ_k`, the summed squared error over the cycle.
    pub cycle_error_sum: f64,
    pub cycle_length: u64,
}

pub const CYCLE_LOG_HEADER: &str = "k,y_prev,wait,y_cur,zeta,cycle_len";

impl CycleRecord {
    pub fn csv_row(&self) -> String {
        format!(
            "{},{},{},{},{:.17e},{}",
            self.k, self.y_prev, self.wait, self.y_cur, self.cycle_error_sum, self.cycle_length
        )
    }
}

pub fn cycle_log_csv(records: &[CycleRecord]) -> String {
    let mut out = String::with_capacity(32 * (records.len() + 1));
    out.push_str(CYCLE_LOG_HEADER);
    out.push('\n');
    for r in records {
        out.push_str(&r.csv_row());
        out.push('\n');
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RunMetrics {
    pub time_avg_sq_error: f64,
    pub empirical_mean_aoi: f64,
    pub total_slots: u64,
    pub total_cycles: u64,
    /// Batch-means standard error of `time_avg_sq_error` (NaN with < 2 batches).
    pub stderr_sq_error: f64,
    pub seed: u64,
    /// Slot (counted from `D_0`) at which the running average crossed the
    /// divergence threshold.
    pub diverged_at: Option<u64>,
}

impl RunMetrics {
    pub fn diverged(&self) -> bool {
        self.diverged_at.is_some()
    }
}

/// Accumulates counted cycles into totals and batch-means buckets.
#[derive(Debug)]
pub(crate) struct Accumulator {
    target_cycles: u64,
    batches: usize,
    batch_cost: Vec<f64>,
    batch_slots: Vec<u64>,
    cost: f64,
    aoi: f64,
    slots: u64,
    cycles: u64,
}

impl Accumulator {
    pub(crate) fn new(target_cycles: u64, batches: usize) -> Self {
        let batches = batches.min(target_cycles as usize).max(1);
        Self {
            target_cycles,
            batches,
            batch_cost: vec![0.0; batches],
            batch_slots: vec![0; batches],
            cost: 0.0,
            aoi: 0.0,
            slots: 0,
            cycles: 0,
        }
    }

    pub(crate) fn push(&mut self, cost: f64, aoi_sum: f64, len: u64) {
        let b =
            ((self.cycles as u128 * self.batches as u128) / self.target_cycles as u128) as usize;
        let b = b.min(self.batches - 1);
        self.batch_cost[b] += cost;
        self.batch_slots[b] += len;
        self.cost += cost;
        self.aoi += aoi_sum;
        self.slots += len;
        self.cycles += 1;
    }

    pub(crate) fn running_average(&self) -> f64 {
        if self.slots == 0 {
            0.0
        } else {
            self.cost / self.slots as f64
        }
    }

    pub(crate) fn slots(&self) -> u64 {
        self.slots
    }

    pub(crate) fn finish(&self, seed: u64, diverged_at: Option<u64>) -> Result<RunMetrics> {
        if self.slots == 0 {
            return Err(Error::DegenerateCycle(0.0));
        }
        let ratios: Vec<f64> = self
            .batch_cost
            .iter()
            .zip(&self.batch_slots)
            .filter(|(_, &s)| s > 0)
            .map(|(&c, &s)| c / s as f64)
            .collect();
        let stderr = if ratios.len() < 2 {
            f64::NAN
        } else {
            let n = ratios.len() as f64;
            let mean = ratios.iter().sum::<f64>() / n;
            let var = ratios.iter().map(|r| (r - mean).powi(2)).sum::<f64>() / (n - 1.0);
            (var / n).sqrt()
        };
        Ok(RunMetrics {
            time_avg_sq_error: self.cost / self.slots as f64,
            empirical_mean_aoi: self.aoi / self.slots as f64,
            total_slots: self.slots,
            total_cycles: self.cycles,
            stderr_sq_error: stderr,
            seed,
            diverged_at,
        })
    }
}

/// `Σ_{j=a}^{a+len-1} j`.
pub(crate) fn age_sum(start: u64, len: u64) -> f64 {
    let (a, l) = (start as f64, len as f64);
    l * a + l * (l - 1.0) / 2.0
}

/// Dispatches on [`SimConfig::mode`].
pub fn run(config: &SimConfig) -> Result<RunMetrics> {
    match config.mode {
        SimMode::FullTrajectory => run_full(config),
        SimMode::RenewalFast => run_renewal_fast(config),
    }
}

/// Runs `replications` independent copies of `config` on a pool of `threads`
/// workers (all cores when `None`). Replication `i` is seeded with
/// [`replication_seed`]`(config.seed, i)`; results are returned in index
/// order, so the output does not depend on the worker count.
pub fn run_replications(
    config: &SimConfig,
    replications: usize,
    threads: Option<usize>,
) -> Result<Vec<RunMetrics>> {
    let job = || {
        (0..replications)
            .into_par_iter()
            .map(|i| run(&config.clone().seed(replication_seed(config.seed, i as u64))))
            .collect::<Result<Vec<_>>>()
    };
    with_pool(threads, job)
}

/// Runs `job` inside a rayon pool of the requested size.
pub fn with_pool<T: Send>(threads: Option<usize>, job: impl FnOnce() -> T + Send) -> T {
    match threads {
        None => job(),
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n.max(1))
            .build()
            .expect("thread pool")
            .install(job),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn accumulator_batches_and_totals() {
        let mut acc = Accumulator::new(10, 5);
        for k in 0..10 {
            acc.push(k as f64, 1.0, 2);
        }
        let m = acc.finish(3, None).unwrap();
        assert_eq!(m.total_cycles, 10);
        assert_eq!(m.total_slots, 20);
        assert_eq!(m.time_avg_sq_error, 45.0 / 20.0);
        assert_eq!(acc.batch_slots, vec![4; 5]);
        assert!(m.stderr_sq_error > 0.0);
        assert_eq!(m.seed, 3);
    }

    #[test]
    fn age_sum_matches_enumeration() {
        for a in 0..6 {
            for l in 0..6 {
                assert_eq!(age_sum(a, l), (a..a + l).sum::<u64>() as f64);
            }
        }
    }

    #[test]
    fn cycle_log_header() {
        let rec = CycleRecord {
            k: 1,
            y_prev: 2,
            wait: 0,
            y_cur: 3,
            cycle_error_sum: 1.5,
            cycle_length: 3,
        };
        let csv = cycle_log_csv(&[rec]);
        assert!(csv.starts_with("k,y_prev,wait,y_cur,zeta,cycle_len\n1,2,0,3,"));
    }
}
