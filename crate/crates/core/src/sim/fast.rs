use super::{age_sum, Accumulator, RunMetrics, SimConfig};
use crate::analytic::required_max_delta;
use crate::error::Result;
use crate::lti::{build_cost_function, AoiCostFunction};
use crate::rng::{stream, StreamPurpose};

/// Renewal-cycle estimator of `E[f(Δ)]`.
///
/// Only transmission times are sampled; each cycle contributes its
/// conditional expected cost `Σ_{j=Y_{k-1}}^{Y_{k-1}+G_k+Y_k-1} f(j)`. The cost
/// table is rebuilt at twice the size whenever a sampled cycle outruns it.
pub fn run_renewal_fast(config: &SimConfig) -> Result<RunMetrics> {
    config.validate()?;
    let mut tx = stream(config.seed, StreamPurpose::Transmission);
    let mut cost = build_cost_function(
        &config.model,
        required_max_delta(&config.dist, &config.policy).max(1),
    )?;
    let mut acc = Accumulator::new(config.cycles, config.batches);
    let mut y_prev = config.dist.sample(&mut tx);
    let total = config.warmup_cycles + config.cycles;

    for k in 1..=total {
        let wait = config.policy.wait(y_prev);
        let y_cur = config.dist.sample(&mut tx);
        let len = wait + y_cur;
        if k > config.warmup_cycles {
            let zeta = cycle_cost(&mut cost, config, y_prev as usize, len as usize)?;
            acc.push(zeta, age_sum(y_prev, len), len);
            if config.max_slots.is_some_and(|cap| acc.slots() >= cap) {
                break;
            }
        }
        y_prev = y_cur;
    }
    acc.finish(config.seed, None)
}

fn cycle_cost(
    cost: &mut AoiCostFunction,
    config: &SimConfig,
    start: usize,
    len: usize,
) -> Result<f64> {
    if let Some(c) = cost.cycle_cost(start, len) {
        return Ok(c);
    }
    let mut size = cost.max_delta();
    while size < start + len {
        size *= 2;
    }
    *cost = build_cost_function(&config.model, size)?;
    Ok(cost.cycle_cost(start, len).expect("table was just grown"))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::analytic::expected_f_delta;
    use crate::channel::{TransmissionDistribution, DEFAULT_MASS_FLOOR};
    use crate::lti::SystemModel;
    use crate::policy::{make_policy, PolicyKind, PolicySpec};
    use crate::sim::{run_full, SimMode};

    #[test]
    fn unit_scalar_zero_wait_converges() {
        let model = SystemModel::scalar(1.0, 1.0).unwrap();
        let dist = TransmissionDistribution::geometric(0.1, DEFAULT_MASS_FLOOR).unwrap();
        let policy = make_policy(PolicyKind::ZeroWait, &dist, 100);
        let cfg = SimConfig::new(model, dist, policy)
            .cycles(1_000_000)
            .seed(12)
            .mode(SimMode::RenewalFast);
        let m = run_renewal_fast(&cfg).unwrap();
        assert!(
            (m.time_avg_sq_error - 19.0).abs() < 3.0 * m.stderr_sq_error,
            "{m:?}"
        );
        assert_eq!(m.total_cycles, 1_000_000);
    }

    #[test]
    fn deterministic_channel_is_exact() {
        let model = SystemModel::scalar(0.7, 2.0).unwrap();
        let dist = TransmissionDistribution::deterministic(3).unwrap();
        let policy = make_policy(PolicyKind::Constant(2), &dist, 100);
        let cost = build_cost_function(&model, required_max_delta(&dist, &policy)).unwrap();
        let want = expected_f_delta(&cost, &dist, &policy).unwrap().value;
        let m = run_renewal_fast(&SimConfig::new(model, dist, policy).cycles(1000)).unwrap();
        assert!((m.time_avg_sq_error - want).abs() <= 1e-12 * want);
        assert!(m.stderr_sq_error <= 1e-12 * want);
    }

    #[test]
    fn agrees_with_full_simulation() {
        let model = SystemModel::scalar(0.5, 1.0).unwrap();
        let dist = TransmissionDistribution::geometric(0.2, DEFAULT_MASS_FLOOR).unwrap();
        let policy = PolicySpec::Meas.resolve(&dist, 100, 1e-9).unwrap().0;
        let cfg = SimConfig::new(model, dist, policy).cycles(100_000).seed(31);
        let full = run_full(&cfg).unwrap();
        let fast = run_renewal_fast(&cfg.clone().seed(32)).unwrap();
        let se = (full.stderr_sq_error.powi(2) + fast.stderr_sq_error.powi(2)).sqrt();
        assert!((full.time_avg_sq_error - fast.time_avg_sq_error).abs() < 5.0 * se);
    }

    #[test]
    fn table_grows_for_long_cycles() {
        let model = SystemModel::scalar(1.0, 1.0).unwrap();
        // A loose mass floor truncates early, so sampled cycles outrun the table.
        let dist = TransmissionDistribution::geometric(0.3, 1e-2).unwrap();
        let policy = make_policy(PolicyKind::ZeroWait, &dist, 0);
        let m =
            run_renewal_fast(&SimConfig::new(model, dist, policy).cycles(100_000).seed(2)).unwrap();
        let want = crate::analytic::zero_wait_geometric_aoi(0.3).unwrap();
        assert!((m.time_avg_sq_error - want).abs() < 5.0 * m.stderr_sq_error);
    }
}
