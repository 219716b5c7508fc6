//! Fast renewal-cycle estimator and seeded parallel replications.

use std::time::Instant;

use ncs_aoi::channel::{TransmissionDistribution, DEFAULT_MASS_FLOOR};
use ncs_aoi::sim::run_replications;
use ncs_aoi::{make_policy, PolicyKind, SimConfig, SimMode, SystemModel};

fn main() -> ncs_aoi::Result<()> {
    let model = SystemModel::scalar(1.0, 1.0)?;
    let dist = TransmissionDistribution::geometric(0.1, DEFAULT_MASS_FLOOR)?;
    let policy = make_policy(PolicyKind::ZeroWait, &dist, 100);
    let config = SimConfig::new(model, dist, policy)
        .mode(SimMode::RenewalFast)
        .cycles(1_000_000)
        .seed(2024);

    let start = Instant::now();
    let reps = run_replications(&config, 8, None)?;
    println!("8 x 1e6 cycles in {:?}", start.elapsed());
    for (i, m) in reps.iter().enumerate() {
        println!(
            "  rep {i}: {:.4} +- {:.4}",
            m.time_avg_sq_error, m.stderr_sq_error
        );
    }
    let mean = reps.iter().map(|m| m.time_avg_sq_error).sum::<f64>() / reps.len() as f64;
    println!("mean {mean:.4} (exact value 19)");

    let again = run_replications(&config, 8, Some(1))?;
    assert_eq!(reps, again);
    println!("single-threaded rerun is identical");
    Ok(())
}
