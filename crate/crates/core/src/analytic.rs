//! Renewal-ratio evaluators.
//!
//! A renewal cycle runs from the departure of packet `k-1` to the departure of
//! packet `k`. Its ages are `Y_{k-1}, Y_{k-1}+1, …, Y_{k-1}+G_k+Y_k-1`, so with
//! `G_k = G(Y_{k-1})` and `Y_{k-1} ⊥ Y_k`,
//!
//! ```text
//! E[f(Δ)] = E[ Σ_{j=Y'}^{Y'+G(Y')+Y-1} f(j) ] / E[G(Y') + Y]
//! ```
//!
//! The inner sum is one lookup in the cost function's double-prefix table,
//! which keeps the numerator at `O(|support|²)`.

use crate::channel::TransmissionDistribution;
use crate::error::{Error, Result};
use crate::lti::AoiCostFunction;
use crate::policy::WaitingPolicy;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RenewalEvaluation {
    pub value: f64,
    pub numerator: f64,
    /// `E[Y + G]`, the mean cycle length.
    pub denominator: f64,
    /// Nominal bound on the error caused by support truncation.
    pub truncation_error_bound: f64,
}

/// Largest cycle end `y_max + G_max + y_max` the cost table must cover.
pub fn required_max_delta(dist: &TransmissionDistribution, policy: &WaitingPolicy) -> usize {
    let largest_wait = dist
        .support()
        .iter()
        .map(|&y| policy.wait(y))
        .max()
        .unwrap_or(0);
    (2 * dist.y_max() + largest_wait) as usize
}

fn mean_cycle_length(dist: &TransmissionDistribution, policy: &WaitingPolicy) -> Result<f64> {
    let mean = dist.mean();
    let den = dist.expect_over_y(|y| mean + policy.wait(y) as f64)?;
    if den.is_nan() || den <= 0.0 {
        return Err(Error::DegenerateCycle(den));
    }
    Ok(den)
}

pub fn expected_f_delta(
    cost: &AoiCostFunction,
    dist: &TransmissionDistribution,
    policy: &WaitingPolicy,
) -> Result<RenewalEvaluation> {
    let required = required_max_delta(dist, policy);
    if cost.max_delta() < required {
        return Err(Error::CostTableTooSmall {
            have: cost.max_delta(),
            required,
        });
    }
    let t = cost.double_prefix();
    let mass: f64 = dist.pmf().iter().sum();
    let numerator = dist.expect_over_y(|y_prev| {
        let base = (y_prev + policy.wait(y_prev)) as usize;
        let reached: f64 = dist.iter().map(|(y, pr)| pr * t[base + y as usize]).sum();
        reached - mass * t[y_prev as usize]
    })?;
    let denominator = mean_cycle_length(dist, policy)?;
    Ok(RenewalEvaluation {
        value: numerator / denominator,
        numerator,
        denominator,
        truncation_error_bound: 2.0 * dist.truncation_mass() * t[required] / denominator,
    })
}

/// `Σ_{j=a}^{b-1} j`.
fn age_run_sum(a: u64, b: u64) -> f64 {
    let (a, b) = (a as f64, b as f64);
    (b * (b - 1.0) - a * (a - 1.0)) / 2.0
}

pub fn expected_aoi(
    dist: &TransmissionDistribution,
    policy: &WaitingPolicy,
) -> Result<RenewalEvaluation> {
    let numerator = dist.expect_over_y(|y_prev| {
        let base = y_prev + policy.wait(y_prev);
        dist.iter()
            .map(|(y, pr)| pr * age_run_sum(y_prev, base + y))
            .sum()
    })?;
    let denominator = mean_cycle_length(dist, policy)?;
    let largest = required_max_delta(dist, policy) as f64;
    Ok(RenewalEvaluation {
        value: numerator / denominator,
        numerator,
        denominator,
        truncation_error_bound: dist.truncation_mass() * largest * largest / denominator,
    })
}

/// Zero-wait expected AoI under a geometric channel, `(4 - p)/(2p) - 1/2`.
pub fn zero_wait_geometric_aoi(p: f64) -> Result<f64> {
    if !(p > 0.0 && p <= 1.0) {
        return Err(Error::invalid("p", format!("must lie in (0, 1], got {p}")));
    }
    Ok((4.0 - p) / (2.0 * p) - 0.5)
}

/// Zero-wait expected AoI for any law, `E[Y²]/(2E[Y]) + E[Y] - 1/2`.
pub fn zero_wait_aoi(dist: &TransmissionDistribution) -> f64 {
    dist.second_moment() / (2.0 * dist.mean()) + dist.mean() - 0.5
}
