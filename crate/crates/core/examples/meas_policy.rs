//! Solve for the MEAS threshold and print the waiting function.

use ncs_aoi::channel::{TransmissionDistribution, DEFAULT_MASS_FLOOR};
use ncs_aoi::policy::{continuous_wait, meas_residual, DEFAULT_EPSILON, DEFAULT_MAX_WAIT};
use ncs_aoi::{make_policy, solve_meas, PolicyKind};

fn main() -> ncs_aoi::Result<()> {
    for p in [0.1, 0.3, 0.5, 0.7] {
        let dist = TransmissionDistribution::geometric(p, DEFAULT_MASS_FLOOR)?;
        let sol = solve_meas(&dist, DEFAULT_MAX_WAIT, DEFAULT_EPSILON)?;
        let policy = make_policy(PolicyKind::Threshold(sol.beta), &dist, DEFAULT_MAX_WAIT);
        println!(
            "p={p}: beta={:.6} after {} steps, residual {:.2e} (recheck {:.2e})",
            sol.beta,
            sol.iterations,
            sol.residual,
            meas_residual(&dist, sol.beta)
        );
        let row: Vec<String> = (1..=10)
            .map(|y| format!("{y}:{:.2}/{}", continuous_wait(sol.beta, y), policy.wait(y)))
            .collect();
        println!("  y:g(y)/G(y)  {}", row.join("  "));
    }
    Ok(())
}
