//! Error versus p for several plants, written as CSV to stdout.

use ncs_aoi::experiments::{cmd_sweep, Settings};

fn main() -> ncs_aoi::Result<()> {
    let settings = Settings {
        a: vec![1.0, 0.9, 0.5, 1.1],
        p: vec![0.1, 0.2, 0.4, 0.6, 0.8],
        policy: vec!["zero-wait".into(), "meas".into()],
        cycles: 100_000,
        seed: 5,
        ..Settings::default()
    };
    let report = cmd_sweep(&settings)?;
    print!("{}", report.csv);
    if report.diverged {
        eprintln!("rows with spectral radius above 1 are flagged as diverged");
    }
    Ok(())
}
