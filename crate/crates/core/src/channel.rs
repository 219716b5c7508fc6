//! Discrete i.i.d. transmission-time laws.
//!
//! Geometric laws live on `{1, 2, …}` (number of slot attempts until the first
//! success) and are truncated at the smallest `y_max` whose discarded tail
//! `(1-p)^{y_max}` is below the mass floor. Moments always come from the
//! closed forms; the table only drives expectations of arbitrary functions.

use std::path::Path;

use rand::Rng;

use crate::error::{Error, Result};

/// Default bound on the probability mass dropped by truncation.
pub const DEFAULT_MASS_FLOOR: f64 = 1e-14;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum DistributionKind {
    Geometric { p: f64 },
    Deterministic { value: u64 },
    Empirical,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TransmissionDistribution {
    kind: DistributionKind,
    support: Vec<u64>,
    pmf: Vec<f64>,
    cdf: Vec<f64>,
    mean: f64,
    second_moment: f64,
    truncation_mass: f64,
}

impl TransmissionDistribution {
    pub fn geometric(p: f64, mass_floor: f64) -> Result<Self> {
        if !(p > 0.0 && p <= 1.0) {
            return Err(Error::invalid("p", format!("must lie in (0, 1], got {p}")));
        }
        if !(mass_floor > 0.0 && mass_floor < 1.0) {
            return Err(Error::invalid(
                "mass_floor",
                format!("must lie in (0, 1), got {mass_floor}"),
            ));
        }
        let q = 1.0 - p;
        let y_max = if q == 0.0 {
            1
        } else {
            // ln(1-p) via ln_1p keeps small p accurate.
            let steps = (mass_floor.ln() / (-p).ln_1p()).ceil();
            (steps as u64).max(1)
        };
        let support: Vec<u64> = (1..=y_max).collect();
        let pmf: Vec<f64> = support
            .iter()
            .map(|&y| p * q.powi((y - 1) as i32))
            .collect();
        let truncation_mass = if q == 0.0 { 0.0 } else { q.powi(y_max as i32) };
        Ok(Self::assemble(
            DistributionKind::Geometric { p },
            support,
            pmf,
            1.0 / p,
            (2.0 - p) / (p * p),
            truncation_mass,
        ))
    }

    pub fn deterministic(value: u64) -> Result<Self> {
        if value == 0 {
            return Err(Error::invalid(
                "value",
                "transmission time must be at least 1",
            ));
        }
        let v = value as f64;
        Ok(Self::assemble(
            DistributionKind::Deterministic { value },
            vec![value],
            vec![1.0],
            v,
            v * v,
            0.0,
        ))
    }

    /// Builds a law from `(y, probability)` pairs.
    ///
    /// Probabilities summing to within `1e-9` of one are renormalized; anything
    /// further off is rejected. Zero-probability entries are dropped.
    pub fn empirical(entries: &[(u64, f64)]) -> Result<Self> {
        if entries.is_empty() {
            return Err(Error::invalid("pmf", "no entries"));
        }
        let mut sorted: Vec<(u64, f64)> = entries.to_vec();
        sorted.sort_by_key(|&(y, _)| y);
        if sorted.windows(2).any(|w| w[0].0 == w[1].0) {
            return Err(Error::invalid("pmf", "duplicate support value"));
        }
        if let Some(&(y, prob)) = sorted
            .iter()
            .find(|(_, pr)| !(pr.is_finite() && *pr >= 0.0))
        {
            return Err(Error::invalid(
                "pmf",
                format!("probability at y = {y} is {prob}"),
            ));
        }
        let total: f64 = sorted.iter().map(|(_, pr)| pr).sum();
        if (total - 1.0).abs() > 1e-9 {
            return Err(Error::invalid(
                "pmf",
                format!("probabilities sum to {total}, not 1"),
            ));
        }
        let (support, pmf): (Vec<u64>, Vec<f64>) = sorted
            .into_iter()
            .filter(|&(_, pr)| pr > 0.0)
            .map(|(y, pr)| (y, pr / total))
            .unzip();
        let mean = support.iter().zip(&pmf).map(|(&y, pr)| pr * y as f64).sum();
        let second = support
            .iter()
            .zip(&pmf)
            .map(|(&y, pr)| pr * (y as f64).powi(2))
            .sum();
        Ok(Self::assemble(
            DistributionKind::Empirical,
            support,
            pmf,
            mean,
            second,
            0.0,
        ))
    }

    /// Parses lines of `y probability` (blank lines and `#` comments skipped).
    pub fn parse_pmf(text: &str) -> Result<Self> {
        let mut entries = Vec::new();
        for (lineno, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let fields: Vec<&str> = line
                .split(|c: char| c == ',' || c.is_whitespace())
                .filter(|t| !t.is_empty())
                .collect();
            let parse_err = |reason: String| Error::Parse {
                line: lineno + 1,
                reason,
            };
            if fields.len() != 2 {
                return Err(parse_err(format!("expected `y probability`, got `{line}`")));
            }
            let y = fields[0]
                .parse::<u64>()
                .map_err(|e| parse_err(format!("y `{}`: {e}", fields[0])))?;
            let pr = fields[1]
                .parse::<f64>()
                .map_err(|e| parse_err(format!("probability `{}`: {e}", fields[1])))?;
            entries.push((y, pr));
        }
        Self::empirical(&entries)
    }

    pub fn from_pmf_file(path: impl AsRef<Path>) -> Result<Self> {
        Self::parse_pmf(&std::fs::read_to_string(path)?)
    }

    fn assemble(
        kind: DistributionKind,
        support: Vec<u64>,
        pmf: Vec<f64>,
        mean: f64,
        second_moment: f64,
        truncation_mass: f64,
    ) -> Self {
        let mut acc = 0.0;
        let cdf = pmf
            .iter()
            .map(|pr| {
                acc += pr;
                acc
            })
            .collect();
        Self {
            kind,
            support,
            pmf,
            cdf,
            mean,
            second_moment,
            truncation_mass,
        }
    }

    pub fn kind(&self) -> DistributionKind {
        self.kind
    }

    pub fn support(&self) -> &[u64] {
        &self.support
    }

    pub fn pmf(&self) -> &[f64] {
        &self.pmf
    }

    pub fn mean(&self) -> f64 {
        self.mean
    }

    pub fn second_moment(&self) -> f64 {
        self.second_moment
    }

    pub fn truncation_mass(&self) -> f64 {
        self.truncation_mass
    }

    pub fn y_max(&self) -> u64 {
        *self.support.last().expect("support is never empty")
    }

    /// Pairs `(y, P(Y = y))` over the (truncated) support.
    pub fn iter(&self) -> impl Iterator<Item = (u64, f64)> + '_ {
        self.support.iter().copied().zip(self.pmf.iter().copied())
    }

    /// Draws one transmission time from the untruncated law.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> u64 {
        match self.kind {
            DistributionKind::Deterministic { value } => value,
            DistributionKind::Geometric { p } => {
                if p >= 1.0 {
                    return 1;
                }
                // Inversion: P(Y > y) = (1-p)^y.
                let u: f64 = 1.0 - rng.random::<f64>();
                let y = (u.ln() / (-p).ln_1p()).ceil();
                if y < 1.0 {
                    1
                } else if y >= u64::MAX as f64 {
                    u64::MAX
                } else {
                    y as u64
                }
            }
            DistributionKind::Empirical => {
                let u: f64 = rng.random::<f64>();
                let idx = self.cdf.partition_point(|&c| c <= u);
                self.support[idx.min(self.support.len() - 1)]
            }
        }
    }

    /// `Σ_y P(Y = y) h(y)` over the truncated support.
    ///
    /// When `|h| ≤ H`, the truncation error is at most `H · truncation_mass`.
    pub fn expect_over_y(&self, mut h: impl FnMut(u64) -> f64) -> Result<f64> {
        let mut total = 0.0;
        for (y, pr) in self.iter() {
            let v = h(y);
            if !v.is_finite() {
                return Err(Error::NonFinite { y });
            }
            total += pr * v;
        }
        Ok(total)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{stream, StreamPurpose};
    use approx::assert_relative_eq;
    use statrs::distribution::{ChiSquared, ContinuousCDF};

    #[test]
    fn degenerate_geometric() {
        let d = TransmissionDistribution::geometric(1.0, DEFAULT_MASS_FLOOR).unwrap();
        assert_eq!(d.support(), &[1]);
        assert_eq!(d.mean(), 1.0);
        assert_eq!(d.second_moment(), 1.0);
        assert_eq!(d.truncation_mass(), 0.0);
        let mut rng = stream(1, StreamPurpose::Transmission);
        assert!((0..100).all(|_| d.sample(&mut rng) == 1));
    }

    #[test]
    fn geometric_moments_and_pmf() {
        let d = TransmissionDistribution::geometric(0.1, 1e-12).unwrap();
        assert_relative_eq!(d.mean(), 10.0);
        assert_relative_eq!(d.second_moment(), 190.0, max_relative = 1e-14);
        assert!(d.truncation_mass() <= 1e-12);
        assert_relative_eq!(
            d.pmf().iter().sum::<f64>(),
            1.0 - d.truncation_mass(),
            epsilon = 1e-14
        );
        let h = TransmissionDistribution::geometric(0.5, 1e-12).unwrap();
        assert_eq!(&h.pmf()[..3], &[0.5, 0.25, 0.125]);
    }

    #[test]
    fn truncated_expectations_match_closed_forms() {
        let d = TransmissionDistribution::geometric(0.1, 1e-12).unwrap();
        assert!((d.expect_over_y(|y| y as f64).unwrap() - 10.0).abs() < 1e-9);
        assert!((d.expect_over_y(|y| (y * y) as f64).unwrap() - 190.0).abs() < 1e-7);
        assert_eq!(
            d.expect_over_y(|_| 1.0).unwrap(),
            d.pmf().iter().sum::<f64>()
        );
        for p in [0.01, 0.05, 0.2, 0.4, 0.8] {
            let d = TransmissionDistribution::geometric(p, 1e-12).unwrap();
            let tol = 10.0 * d.truncation_mass() * (d.y_max() as f64).powi(2);
            assert!((d.expect_over_y(|y| y as f64).unwrap() - d.mean()).abs() <= tol);
            assert!(
                (d.expect_over_y(|y| (y * y) as f64).unwrap() - d.second_moment()).abs() <= tol
            );
        }
    }

    #[test]
    fn non_finite_expectation_reports_y() {
        let d = TransmissionDistribution::geometric(0.5, 1e-12).unwrap();
        assert_eq!(
            d.expect_over_y(|y| if y == 3 { f64::NAN } else { 1.0 }),
            Err(Error::NonFinite { y: 3 })
        );
    }

    #[test]
    fn rejects_bad_parameters() {
        assert!(TransmissionDistribution::geometric(0.0, 1e-12).is_err());
        assert!(TransmissionDistribution::geometric(1.5, 1e-12).is_err());
        assert!(TransmissionDistribution::geometric(f64::NAN, 1e-12).is_err());
        assert!(TransmissionDistribution::deterministic(0).is_err());
    }

    #[test]
    fn deterministic_always_same() {
        let d = TransmissionDistribution::deterministic(3).unwrap();
        let mut rng = stream(5, StreamPurpose::Transmission);
        assert!((0..100).all(|_| d.sample(&mut rng) == 3));
        assert_eq!((d.mean(), d.second_moment()), (3.0, 9.0));
    }

    #[test]
    fn cloned_streams_give_identical_samples() {
        let d = TransmissionDistribution::geometric(0.3, 1e-12).unwrap();
        let mut a = stream(99, StreamPurpose::Transmission);
        let mut b = a.clone();
        let xs: Vec<u64> = (0..50).map(|_| d.sample(&mut a)).collect();
        let ys: Vec<u64> = (0..50).map(|_| d.sample(&mut b)).collect();
        assert_eq!(xs, ys);
    }

    #[test]
    fn geometric_sample_mean() {
        let d = TransmissionDistribution::geometric(0.5, 1e-12).unwrap();
        let mut rng = stream(2024, StreamPurpose::Transmission);
        let n = 1_000_000;
        let mean = (0..n).map(|_| d.sample(&mut rng) as f64).sum::<f64>() / n as f64;
        assert!((mean - 2.0).abs() < 0.01, "{mean}");
    }

    fn chi_squared_passes(d: &TransmissionDistribution, seed: u64) -> bool {
        let n = 1_000_000usize;
        let mut rng = stream(seed, StreamPurpose::Transmission);
        // Bins with expected count >= 5; the last bin pools the tail.
        let mut edges = Vec::new();
        let mut tail = 1.0;
        for (y, pr) in d.iter() {
            if tail * n as f64 >= 10.0 && pr * n as f64 >= 5.0 {
                edges.push((y, pr));
                tail -= pr;
            } else {
                break;
            }
        }
        let mut counts = vec![0usize; edges.len() + 1];
        for _ in 0..n {
            let y = d.sample(&mut rng);
            let idx = edges
                .iter()
                .position(|&(e, _)| e == y)
                .unwrap_or(edges.len());
            counts[idx] += 1;
        }
        let mut stat = 0.0;
        for (i, &c) in counts.iter().enumerate() {
            let expected = if i < edges.len() { edges[i].1 } else { tail } * n as f64;
            stat += (c as f64 - expected).powi(2) / expected;
        }
        let dof = (counts.len() - 1) as f64;
        let critical = ChiSquared::new(dof).unwrap().inverse_cdf(1.0 - 1e-3);
        stat < critical
    }

    #[test]
    fn samples_pass_goodness_of_fit() {
        for p in [0.1, 0.5] {
            let d = TransmissionDistribution::geometric(p, 1e-12).unwrap();
            assert!(chi_squared_passes(&d, 17), "p = {p}");
        }
        let e = TransmissionDistribution::empirical(&[(1, 0.2), (2, 0.5), (5, 0.3)]).unwrap();
        assert!(chi_squared_passes(&e, 18));
    }

    #[test]
    fn empirical_parsing() {
        let d = TransmissionDistribution::parse_pmf("# pmf\n2 0.5\n1 0.25\n\n4 0.2500000001\n")
            .unwrap();
        assert_eq!(d.support(), &[1, 2, 4]);
        assert_relative_eq!(d.pmf().iter().sum::<f64>(), 1.0, epsilon = 1e-15);
        assert_relative_eq!(d.mean(), 0.25 + 1.0 + 1.0, epsilon = 1e-9);
        assert!(TransmissionDistribution::parse_pmf("1 0.5\n2 0.4\n").is_err());
        assert!(TransmissionDistribution::parse_pmf("1 0.5\n1 0.5\n").is_err());
        assert!(TransmissionDistribution::parse_pmf("1 0.5 3\n").is_err());
        assert!(TransmissionDistribution::parse_pmf("a 1\n").is_err());
        assert!(TransmissionDistribution::parse_pmf("").is_err());
    }
}
