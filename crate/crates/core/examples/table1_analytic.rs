//! Exact zero-wait vs MEAS error for A = 1, sigma^2 = 1.

use ncs_aoi::analytic::{expected_aoi, required_max_delta, zero_wait_geometric_aoi};
use ncs_aoi::channel::{TransmissionDistribution, DEFAULT_MASS_FLOOR};
use ncs_aoi::policy::{DEFAULT_EPSILON, DEFAULT_MAX_WAIT};
use ncs_aoi::{build_cost_function, expected_f_delta, PolicySpec, SystemModel};

fn main() -> ncs_aoi::Result<()> {
    let model = SystemModel::scalar(1.0, 1.0)?;
    println!(
        "{:>5} {:>12} {:>12} {:>12} {:>8}",
        "p", "closed form", "zero-wait", "MEAS", "beta"
    );
    for p in [0.01, 0.05, 0.1, 0.2, 0.4, 0.8] {
        let dist = TransmissionDistribution::geometric(p, DEFAULT_MASS_FLOOR)?;
        let mut values = Vec::new();
        let mut beta = 0.0;
        for spec in [PolicySpec::ZeroWait, PolicySpec::Meas] {
            let (policy, sol) = spec.resolve(&dist, DEFAULT_MAX_WAIT, DEFAULT_EPSILON)?;
            let cost = build_cost_function(&model, required_max_delta(&dist, &policy))?;
            let f = expected_f_delta(&cost, &dist, &policy)?;
            debug_assert!((f.value - expected_aoi(&dist, &policy)?.value).abs() < 1e-8);
            values.push(f.value);
            if let Some(sol) = sol {
                beta = sol.beta;
            }
        }
        println!(
            "{p:>5} {:>12.6} {:>12.6} {:>12.6} {beta:>8.4}",
            zero_wait_geometric_aoi(p)?,
            values[0],
            values[1]
        );
    }
    Ok(())
}
