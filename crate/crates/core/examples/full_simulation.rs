//! Slot-level simulation against the renewal-ratio prediction.

use ncs_aoi::analytic::required_max_delta;
use ncs_aoi::channel::{TransmissionDistribution, DEFAULT_MASS_FLOOR};
use ncs_aoi::sim::run_full_logged;
use ncs_aoi::{build_cost_function, expected_f_delta, PolicySpec, SimConfig, SystemModel};

fn main() -> ncs_aoi::Result<()> {
    let model = SystemModel::rotation(0.7, 1.0)?;
    let dist = TransmissionDistribution::geometric(0.1, DEFAULT_MASS_FLOOR)?;
    for spec in [
        PolicySpec::ZeroWait,
        PolicySpec::Constant(3),
        PolicySpec::Meas,
    ] {
        let (policy, _) = spec.resolve(&dist, 100, 1e-9)?;
        let cost = build_cost_function(&model, required_max_delta(&dist, &policy))?;
        let analytic = expected_f_delta(&cost, &dist, &policy)?.value;
        let config = SimConfig::new(model.clone(), dist.clone(), policy)
            .cycles(50_000)
            .seed(3);
        let out = run_full_logged(&config, true, false)?;
        let m = out.metrics;
        println!(
            "{spec:>9}: analytic {analytic:.4}, simulated {:.4} +- {:.4} over {} slots",
            m.time_avg_sq_error, m.stderr_sq_error, m.total_slots
        );
        let first = &out.cycles[0];
        println!(
            "           first cycle: Y_prev={} wait={} Y={} error sum {:.3}",
            first.y_prev, first.wait, first.y_cur, first.cycle_error_sum
        );
    }
    Ok(())
}
