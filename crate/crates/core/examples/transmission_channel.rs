//! Transmission-time laws: truncated geometric, deterministic and a pmf file.

use ncs_aoi::channel::{TransmissionDistribution, DEFAULT_MASS_FLOOR};
use ncs_aoi::rng::{stream, StreamPurpose};

fn main() -> ncs_aoi::Result<()> {
    for p in [0.01, 0.1, 0.5] {
        let d = TransmissionDistribution::geometric(p, DEFAULT_MASS_FLOOR)?;
        println!(
            "geometric p={p}: support 1..={}, E[Y]={:.6}, E[Y^2]={:.6}, dropped tail {:.1e}",
            d.y_max(),
            d.mean(),
            d.second_moment(),
            d.truncation_mass()
        );
    }

    let d = TransmissionDistribution::parse_pmf("# y, probability\n1, 0.5\n3, 0.3\n10, 0.2\n")?;
    println!("empirical: E[Y]={}, E[Y^2]={}", d.mean(), d.second_moment());

    let mut rng = stream(42, StreamPurpose::Transmission);
    let n = 100_000;
    let mean = (0..n).map(|_| d.sample(&mut rng) as f64).sum::<f64>() / n as f64;
    println!("sample mean over {n} draws: {mean:.4}");
    Ok(())
}
