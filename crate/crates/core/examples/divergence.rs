//! An unstable plant: the running error average blows up and the run is flagged.

use ncs_aoi::channel::{TransmissionDistribution, DEFAULT_MASS_FLOOR};
use ncs_aoi::{make_policy, run_full, PolicyKind, SimConfig, SystemModel};

fn main() -> ncs_aoi::Result<()> {
    let model = SystemModel::scalar(1.1, 1.0)?;
    let dist = TransmissionDistribution::geometric(0.1, DEFAULT_MASS_FLOOR)?;
    let policy = make_policy(PolicyKind::ZeroWait, &dist, 100);
    for seed in 0..5 {
        let config = SimConfig::new(model.clone(), dist.clone(), policy.clone())
            .seed(seed)
            .max_slots(1_000_000);
        let m = run_full(&config)?;
        match m.diverged_at {
            Some(slot) => println!(
                "seed {seed}: diverged at slot {slot}, running average {:.3e}",
                m.time_avg_sq_error
            ),
            None => println!("seed {seed}: no divergence in {} slots", m.total_slots),
        }
    }
    Ok(())
}
