use nalgebra::{DMatrix, DVector};

use super::{age_sum, Accumulator, CycleRecord, RunMetrics, SimConfig};
use crate::error::Result;
use crate::lti::draw_noise;
use crate::rng::{stream, StreamPurpose};

/// Per-slot trace entry of a full run.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SlotRecord {
    /// Absolute slot index; the first sample is generated at slot 0.
    pub n: u64,
    pub age: u64,
    pub sq_error: f64,
    /// Whether a packet departed at this slot.
    pub departure: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FullRun {
    pub metrics: RunMetrics,
    pub cycles: Vec<CycleRecord>,
    pub slots: Vec<SlotRecord>,
}

pub fn run_full(config: &SimConfig) -> Result<RunMetrics> {
    Ok(run_full_logged(config, false, false)?.metrics)
}

/// `v ← A v + w`, using `scratch` as the product buffer.
fn propagate(a: &DMatrix<f64>, v: &mut DVector<f64>, w: &DVector<f64>, scratch: &mut DVector<f64>) {
    scratch.gemv(1.0, a, v, 0.0);
    *scratch += w;
    std::mem::swap(v, scratch);
}

/// Slot-by-slot simulation, optionally logging cycles and slots.
///
/// Two error vectors are carried: `e`, the estimator's current error, which
/// evolves as `e ← A e + W_n` while no packet departs, and `inflight`, the
/// error the in-flight sample will carry on delivery, which starts at zero
/// when the sample is generated. At a departure `e` takes the value of
/// `inflight`. This is the noise sum `Σ_{i=1}^{Δ_n} A^{i-1} W_{n-i}` in
/// recursive form.
pub fn run_full_logged(config: &SimConfig, log_cycles: bool, log_slots: bool) -> Result<FullRun> {
    config.validate()?;
    let model = &config.model;
    let a = model.a();
    let d = model.dim();
    let sigma = model.noise_variance().sqrt();
    let mut tx = stream(config.seed, StreamPurpose::Transmission);
    let mut noise_rng = stream(config.seed, StreamPurpose::Noise);

    let mut w = DVector::zeros(d);
    let mut scratch = DVector::zeros(d);
    let mut inflight = DVector::zeros(d);
    let mut n: u64 = 0;

    let mut y_prev = config.dist.sample(&mut tx);
    for _ in 0..y_prev {
        draw_noise(&mut noise_rng, sigma, &mut w);
        propagate(a, &mut inflight, &w, &mut scratch);
        n += 1;
    }
    let mut e = inflight.clone();

    let mut acc = Accumulator::new(config.cycles, config.batches);
    let mut cycles = Vec::new();
    let mut slots = Vec::new();
    let mut diverged_at = None;
    let total = config.warmup_cycles + config.cycles;
    let limit = config.divergence_threshold * config.model.noise_trace();

    for k in 1..=total {
        let counted = k > config.warmup_cycles;
        let wait = config.policy.wait(y_prev);
        let y_cur = config.dist.sample(&mut tx);
        let len = wait + y_cur;
        let mut zeta = 0.0;
        for s in 0..len {
            let sq = e.norm_squared();
            zeta += sq;
            if counted && log_slots {
                slots.push(SlotRecord {
                    n,
                    age: y_prev + s,
                    sq_error: sq,
                    departure: s == 0,
                });
            }
            draw_noise(&mut noise_rng, sigma, &mut w);
            propagate(a, &mut e, &w, &mut scratch);
            if s == wait {
                inflight.fill(0.0);
            }
            if s >= wait {
                propagate(a, &mut inflight, &w, &mut scratch);
            }
            n += 1;
        }
        if y_cur == 0 {
            inflight.fill(0.0);
        }
        std::mem::swap(&mut e, &mut inflight);

        if counted {
            acc.push(zeta, age_sum(y_prev, len), len);
            if log_cycles {
                cycles.push(CycleRecord {
                    k: k - config.warmup_cycles,
                    y_prev,
                    wait,
                    y_cur,
                    cycle_error_sum: zeta,
                    cycle_length: len,
                });
            }
            let avg = acc.running_average();
            if !avg.is_finite() || avg > limit {
                diverged_at = Some(acc.slots());
                break;
            }
            if config.max_slots.is_some_and(|cap| acc.slots() >= cap) {
                break;
            }
        }
        y_prev = y_cur;
    }

    Ok(FullRun {
        metrics: acc.finish(config.seed, diverged_at)?,
        cycles,
        slots,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::analytic::{expected_f_delta, required_max_delta};
    use crate::channel::{TransmissionDistribution, DEFAULT_MASS_FLOOR};
    use crate::lti::{build_cost_function, error_from_noise, NoiseTrace, SystemModel};
    use crate::policy::{make_policy, PolicyKind, PolicySpec};

    fn config(model: SystemModel, dist: TransmissionDistribution, spec: &str) -> SimConfig {
        let policy = spec
            .parse::<PolicySpec>()
            .unwrap()
            .resolve(&dist, 100, 1e-9)
            .unwrap()
            .0;
        SimConfig::new(model, dist, policy)
    }

    #[test]
    fn deterministic_two_slot_channel() {
        let dist = TransmissionDistribution::deterministic(2).unwrap();
        let cfg = config(SystemModel::scalar(1.0, 1.0).unwrap(), dist, "zero-wait")
            .cycles(50_000)
            .warmup(10)
            .seed(3);
        let run = run_full_logged(&cfg, true, true).unwrap();
        let m = run.metrics;
        assert_eq!(m.empirical_mean_aoi, 2.5);
        assert!((m.time_avg_sq_error - 2.5).abs() < 5.0 * m.stderr_sq_error);
        let ages: Vec<u64> = run.slots.iter().take(6).map(|s| s.age).collect();
        assert_eq!(ages, vec![2, 3, 2, 3, 2, 3]);
    }

    #[test]
    fn exact_cycle_count_without_warmup() {
        let dist = TransmissionDistribution::geometric(0.3, DEFAULT_MASS_FLOOR).unwrap();
        let cfg = config(SystemModel::scalar(0.9, 1.0).unwrap(), dist, "meas")
            .cycles(1234)
            .warmup(0);
        let run = run_full_logged(&cfg, true, false).unwrap();
        assert_eq!(run.metrics.total_cycles, 1234);
        assert_eq!(run.cycles.len(), 1234);
        let slots: u64 = run.cycles.iter().map(|c| c.cycle_length).sum();
        assert_eq!(run.metrics.total_slots, slots);
        let zeta: f64 = run.cycles.iter().map(|c| c.cycle_error_sum).sum();
        assert!((run.metrics.time_avg_sq_error - zeta / slots as f64).abs() < 1e-12);
        for pair in run.cycles.windows(2) {
            assert_eq!(pair[1].y_prev, pair[0].y_cur);
            assert_eq!(pair[1].wait, cfg.policy.wait(pair[1].y_prev));
            assert_eq!(pair[0].cycle_length, pair[0].wait + pair[0].y_cur);
        }
    }

    #[test]
    fn rejects_zero_cycles() {
        let dist = TransmissionDistribution::deterministic(1).unwrap();
        let cfg = config(SystemModel::scalar(1.0, 1.0).unwrap(), dist, "zero-wait").cycles(0);
        assert!(run_full(&cfg).is_err());
    }

    #[test]
    fn aoi_sample_path_law_and_departures() {
        let dist = TransmissionDistribution::geometric(0.35, DEFAULT_MASS_FLOOR).unwrap();
        let cfg = config(SystemModel::rotation(0.4, 1.0).unwrap(), dist, "meas")
            .cycles(2000)
            .warmup(5)
            .seed(8);
        let run = run_full_logged(&cfg, true, true).unwrap();
        let mut cycle = run.cycles.iter();
        let mut current = cycle.next().unwrap();
        assert!(run.slots[0].departure);
        assert_eq!(run.slots[0].age, current.y_prev);
        for pair in run.slots.windows(2) {
            assert_eq!(pair[1].n, pair[0].n + 1);
            if pair[1].departure {
                current = cycle.next().unwrap();
                assert_eq!(pair[1].age, current.y_prev);
            } else {
                assert_eq!(pair[1].age, pair[0].age + 1);
            }
        }
    }

    #[test]
    fn recursive_error_matches_noise_sum() {
        let model =
            SystemModel::new(DMatrix::from_row_slice(2, 2, &[0.95, 0.4, -0.3, 0.8]), 0.7).unwrap();
        let dist = TransmissionDistribution::geometric(0.25, DEFAULT_MASS_FLOOR).unwrap();
        let cfg = config(model.clone(), dist, "meas")
            .cycles(300)
            .warmup(3)
            .seed(21);
        let run = run_full_logged(&cfg, false, true).unwrap();
        let last = run.slots.last().unwrap().n as usize + 1;
        let trace = NoiseTrace::generate(&model, last, 21);
        for s in &run.slots {
            let e = error_from_noise(&model, &trace, s.age as usize, s.n as usize).unwrap();
            let want = e.norm_squared();
            assert!(
                (s.sq_error - want).abs() <= 1e-9 * want.max(1.0),
                "slot {}",
                s.n
            );
        }
    }

    #[test]
    fn same_seed_same_metrics() {
        let dist = TransmissionDistribution::geometric(0.2, DEFAULT_MASS_FLOOR).unwrap();
        let cfg = config(SystemModel::scalar(0.5, 1.0).unwrap(), dist, "meas")
            .cycles(5000)
            .seed(77);
        assert_eq!(run_full(&cfg).unwrap(), run_full(&cfg).unwrap());
        assert_ne!(
            run_full(&cfg).unwrap(),
            run_full(&cfg.clone().seed(78)).unwrap()
        );
    }

    #[test]
    fn policy_change_keeps_noise_trace() {
        // Same seed, different policy: the first cycle's y_prev is shared.
        let dist = TransmissionDistribution::geometric(0.1, DEFAULT_MASS_FLOOR).unwrap();
        let a = config(
            SystemModel::scalar(1.0, 1.0).unwrap(),
            dist.clone(),
            "zero-wait",
        )
        .cycles(10)
        .warmup(0)
        .seed(5);
        let b = config(SystemModel::scalar(1.0, 1.0).unwrap(), dist, "meas")
            .cycles(10)
            .warmup(0)
            .seed(5);
        let ra = run_full_logged(&a, true, true).unwrap();
        let rb = run_full_logged(&b, true, true).unwrap();
        assert_eq!(ra.cycles[0].y_prev, rb.cycles[0].y_prev);
        assert_eq!(ra.slots[0].sq_error, rb.slots[0].sq_error);
    }

    #[test]
    fn moderate_run_matches_analytic() {
        let model = SystemModel::scalar(0.9, 1.0).unwrap();
        let dist = TransmissionDistribution::geometric(0.4, DEFAULT_MASS_FLOOR).unwrap();
        let policy = make_policy(PolicyKind::ZeroWait, &dist, 100);
        let cost = build_cost_function(&model, required_max_delta(&dist, &policy)).unwrap();
        let want = expected_f_delta(&cost, &dist, &policy).unwrap().value;
        let m = run_full(&SimConfig::new(model, dist, policy).cycles(50_000).seed(4)).unwrap();
        assert!((m.time_avg_sq_error - want).abs() < 5.0 * m.stderr_sq_error);
    }

    #[test]
    fn unstable_plant_is_flagged() {
        let dist = TransmissionDistribution::geometric(0.1, DEFAULT_MASS_FLOOR).unwrap();
        let mut cfg = config(SystemModel::scalar(1.1, 1.0).unwrap(), dist, "zero-wait")
            .cycles(100_000)
            .seed(1);
        cfg.divergence_threshold = 1e6;
        let m = run_full(&cfg).unwrap();
        assert!(m.diverged());
    }
}
