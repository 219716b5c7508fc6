//! Closed loop with a deadbeat controller: the estimator error still equals
//! the sum of the noise since the last sample.

use nalgebra::DMatrix;
use ncs_aoi::channel::{TransmissionDistribution, DEFAULT_MASS_FLOOR};
use ncs_aoi::sim::run_closed_loop_demo;
use ncs_aoi::{make_policy, PolicyKind, SimConfig, SystemModel};

fn main() -> ncs_aoi::Result<()> {
    let theta: f64 = 0.3;
    let model = SystemModel::rotation(theta, 0.5)?.with_input(DMatrix::identity(2, 2))?;
    let gain = model.a().clone();
    let dist = TransmissionDistribution::geometric(0.3, DEFAULT_MASS_FLOOR)?;
    let policy = make_policy(PolicyKind::ZeroWait, &dist, 100);
    let config = SimConfig::new(model, dist, policy).seed(11);

    let log = run_closed_loop_demo(&config, &gain, 10_000)?;
    for s in log.slots.iter().step_by(2_000) {
        println!(
            "n={:>5} age={:>3} |x|={:.3} |e|={:.3} deviation {:.1e}",
            s.n, s.age, s.state_norm, s.error_norm, s.deviation
        );
    }
    println!(
        "max deviation over {} slots: {:.2e}",
        log.slots.len(),
        log.max_deviation
    );
    Ok(())
}
