//! Tabulate the AoI cost f(Δ) for a few plants and show when it is linear.

use ncs_aoi::lti::check_linear_cost;
use ncs_aoi::{build_cost_function, per_slot_error_variance, SystemModel};

fn main() -> ncs_aoi::Result<()> {
    let plants = [
        ("A = 1", SystemModel::scalar(1.0, 1.0)?),
        ("A = 0.5", SystemModel::scalar(0.5, 1.0)?),
        ("rotation 0.7", SystemModel::rotation(0.7, 1.0)?),
        ("A = 1.05", SystemModel::scalar(1.05, 1.0)?),
    ];
    for (name, model) in &plants {
        let cost = build_cost_function(model, 20)?;
        println!("{name}: spectral radius {:.3}", model.spectral_radius());
        for age in [1, 2, 5, 10, 20] {
            println!(
                "  f({age:>2}) = {:>10.4}   E|e|^2 at age {age:>2} = {:>10.4}",
                cost.f(age),
                per_slot_error_variance(model, age)?
            );
        }
        match check_linear_cost(&cost, 1e-10) {
            Some(gamma) => println!("  linear, gamma = {gamma}"),
            None => println!("  not linear in the age"),
        }
    }
    Ok(())
}
