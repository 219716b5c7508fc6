//! Stationary waiting policies `y ↦ G`, where `y` is the transmission time
//! of the packet that just departed and `G ∈ {0, …, M}` is the number of idle
//! slots before the next sample is taken.
//!
//! The MEAS threshold policy waits `g_β(y) = max(β - y, 0)` slots, floored
//! and capped at `M`. Its `β` is the root of
//! `o(β) = E[(Y + g_β(Y))²] - 2β E[Y + g_β(Y)]`, found by bisection. `o` is
//! strictly decreasing, positive at `β = 0` and negative once `β ≥ y_max`.

use std::fmt;
use std::str::FromStr;

use crate::channel::TransmissionDistribution;
use crate::error::{Error, Result};

pub const DEFAULT_MAX_WAIT: u64 = 100;
pub const DEFAULT_EPSILON: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum PolicyKind {
    ZeroWait,
    Constant(u64),
    Threshold(f64),
}

impl PolicyKind {
    fn rule(&self, y: u64, max_wait: u64) -> u64 {
        match *self {
            PolicyKind::ZeroWait => 0,
            PolicyKind::Constant(g) => g.min(max_wait),
            PolicyKind::Threshold(beta) => {
                let g = continuous_wait(beta, y).floor();
                if g >= max_wait as f64 {
                    max_wait
                } else {
                    g as u64
                }
            }
        }
    }
}

/// A waiting policy materialized over a channel's support.
#[derive(Debug, Clone, PartialEq)]
pub struct WaitingPolicy {
    kind: PolicyKind,
    max_wait: u64,
    support: Vec<u64>,
    waits: Vec<u64>,
}

impl WaitingPolicy {
    pub fn kind(&self) -> PolicyKind {
        self.kind
    }

    pub fn max_wait(&self) -> u64 {
        self.max_wait
    }

    /// `G(y)` aligned with [`TransmissionDistribution::support`].
    pub fn waits(&self) -> &[u64] {
        &self.waits
    }

    pub fn support(&self) -> &[u64] {
        &self.support
    }

    /// `G(y)` for any `y`, including values beyond the truncated support.
    pub fn wait(&self, y: u64) -> u64 {
        match self.support.binary_search(&y) {
            Ok(i) => self.waits[i],
            Err(_) => self.kind.rule(y, self.max_wait),
        }
    }

    pub fn is_zero_wait(&self) -> bool {
        self.waits.iter().all(|&g| g == 0)
    }

    /// Largest wait over the tabulated support.
    pub fn largest_wait(&self) -> u64 {
        self.waits.iter().copied().max().unwrap_or(0)
    }
}

pub fn make_policy(
    kind: PolicyKind,
    dist: &TransmissionDistribution,
    max_wait: u64,
) -> WaitingPolicy {
    let support = dist.support().to_vec();
    let waits = support.iter().map(|&y| kind.rule(y, max_wait)).collect();
    WaitingPolicy {
        kind,
        max_wait,
        support,
        waits,
    }
}

/// Continuous (unfloored, uncapped) MEAS wait `max(β - y, 0)`.
pub fn continuous_wait(beta: f64, y: u64) -> f64 {
    (beta - y as f64).max(0.0)
}

/// `o(β) = E[(Y + g_β(Y))²] - 2β E[Y + g_β(Y)]` over the truncated support.
pub fn meas_residual(dist: &TransmissionDistribution, beta: f64) -> f64 {
    let mut second = 0.0;
    let mut first = 0.0;
    for (y, pr) in dist.iter() {
        let x = y as f64 + continuous_wait(beta, y);
        second += pr * x * x;
        first += pr * x;
    }
    second - 2.0 * beta * first
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MeasSolution {
    pub beta: f64,
    pub iterations: u32,
    /// `o(β)` at the returned `β`.
    pub residual: f64,
    pub epsilon: f64,
    /// Initial upper end of the bracket.
    pub upper_bound: f64,
}

/// Upper end of the initial bracket, `E[Y²]/E[Y] + 2 (y_max + M)`.
pub fn meas_upper_bound(dist: &TransmissionDistribution, max_wait: u64) -> f64 {
    dist.second_moment() / dist.mean() + 2.0 * (dist.y_max() + max_wait) as f64
}

pub fn solve_meas(
    dist: &TransmissionDistribution,
    max_wait: u64,
    epsilon: f64,
) -> Result<MeasSolution> {
    solve_meas_with_bound(dist, meas_upper_bound(dist, max_wait), epsilon)
}

/// Bisection on `[0, upper]`; `o(upper)` must be non-positive.
pub fn solve_meas_with_bound(
    dist: &TransmissionDistribution,
    upper: f64,
    epsilon: f64,
) -> Result<MeasSolution> {
    if !(epsilon > 0.0 && epsilon.is_finite()) {
        return Err(Error::invalid(
            "epsilon",
            format!("must be positive, got {epsilon}"),
        ));
    }
    if !(upper > 0.0 && upper.is_finite()) {
        return Err(Error::invalid(
            "upper",
            format!("must be positive, got {upper}"),
        ));
    }
    let o_upper = meas_residual(dist, upper);
    if o_upper > 0.0 {
        return Err(Error::UpperBoundTooSmall {
            upper,
            residual: o_upper,
        });
    }
    let (mut lo, mut hi) = (0.0_f64, upper);
    let mut iterations = 0;
    while hi - lo > epsilon {
        let beta = 0.5 * (lo + hi);
        iterations += 1;
        // o = 0 shrinks the upper end.
        if meas_residual(dist, beta) > 0.0 {
            lo = beta;
        } else {
            hi = beta;
        }
    }
    let beta = 0.5 * (lo + hi);
    Ok(MeasSolution {
        beta,
        iterations,
        residual: meas_residual(dist, beta),
        epsilon,
        upper_bound: upper,
    })
}

/// Policy selector as written on the command line.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum PolicySpec {
    ZeroWait,
    Constant(u64),
    Meas,
}

impl PolicySpec {
    /// Materializes the policy; `meas` runs the bisection first.
    pub fn resolve(
        &self,
        dist: &TransmissionDistribution,
        max_wait: u64,
        epsilon: f64,
    ) -> Result<(WaitingPolicy, Option<MeasSolution>)> {
        Ok(match *self {
            PolicySpec::ZeroWait => (make_policy(PolicyKind::ZeroWait, dist, max_wait), None),
            PolicySpec::Constant(g) => (make_policy(PolicyKind::Constant(g), dist, max_wait), None),
            PolicySpec::Meas => {
                let sol = solve_meas(dist, max_wait, epsilon)?;
                (
                    make_policy(PolicyKind::Threshold(sol.beta), dist, max_wait),
                    Some(sol),
                )
            }
        })
    }
}

impl FromStr for PolicySpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "zero-wait" => Ok(PolicySpec::ZeroWait),
            "meas" => Ok(PolicySpec::Meas),
            other => match other.strip_prefix("const:") {
                Some(g) => g.parse().map(PolicySpec::Constant).map_err(|_| {
                    Error::invalid("policy", format!("bad constant wait in `{other}`"))
                }),
                None => Err(Error::invalid(
                    "policy",
                    format!("expected zero-wait, const:<g> or meas, got `{other}`"),
                )),
            },
        }
    }
}

impl fmt::Display for PolicySpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            PolicySpec::ZeroWait => write!(f, "zero-wait"),
            PolicySpec::Constant(g) => write!(f, "const:{g}"),
            PolicySpec::Meas => write!(f, "meas"),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::DEFAULT_MASS_FLOOR;

    fn geo(p: f64) -> TransmissionDistribution {
        TransmissionDistribution::geometric(p, DEFAULT_MASS_FLOOR).unwrap()
    }

    /// Independent root oracle: first point of a uniform grid where
    /// `E[max(b, Y)²] - 2b E[max(b, Y)]` turns non-positive.
    fn grid_root(dist: &TransmissionDistribution, upper: f64, step: f64) -> f64 {
        let o = |b: f64| {
            let mut m2 = 0.0;
            let mut m1 = 0.0;
            for (&y, &pr) in dist.support().iter().zip(dist.pmf()) {
                let x = b.max(y as f64);
                m2 += pr * x * x;
                m1 += pr * x;
            }
            m2 - 2.0 * b * m1
        };
        let n = (upper / step) as usize;
        (0..=n)
            .map(|i| i as f64 * step)
            .find(|&b| o(b) <= 0.0)
            .unwrap()
    }

    /// Independent optimality oracle: grid minimizer of `E[X²] / (2 E[X])`
    /// over `X = max(b, Y)`, i.e. expected AoI under continuous waits up to
    /// the constant `E[Y] - 1/2`.
    fn grid_argmin(dist: &TransmissionDistribution, upper: f64, step: f64) -> f64 {
        let ratio = |b: f64| {
            let (mut m2, mut m1) = (0.0, 0.0);
            for (&y, &pr) in dist.support().iter().zip(dist.pmf()) {
                let x = b.max(y as f64);
                m2 += pr * x * x;
                m1 += pr * x;
            }
            m2 / (2.0 * m1)
        };
        let n = (upper / step) as usize;
        let mut best = (f64::INFINITY, 0.0);
        for i in 0..=n {
            let b = i as f64 * step;
            let r = ratio(b);
            if r < best.0 {
                best = (r, b);
            }
        }
        best.1
    }

    #[test]
    fn deterministic_channel_degenerates_to_zero_wait() {
        for c in [1, 2, 3, 7] {
            let d = TransmissionDistribution::deterministic(c).unwrap();
            let sol = solve_meas(&d, DEFAULT_MAX_WAIT, DEFAULT_EPSILON).unwrap();
            assert!(sol.beta <= c as f64);
            let oracle = grid_root(&d, sol.upper_bound, 1e-3);
            assert!((sol.beta - oracle).abs() < 1e-2, "{} vs {oracle}", sol.beta);
            assert!(make_policy(PolicyKind::Threshold(sol.beta), &d, 100).is_zero_wait());
        }
    }

    #[test]
    fn geometric_solution_matches_grid_oracles() {
        for p in [0.1, 0.3, 0.5] {
            let d = geo(p);
            let sol = solve_meas(&d, DEFAULT_MAX_WAIT, DEFAULT_EPSILON).unwrap();
            let upper = 3.0 * d.second_moment() / d.mean();
            assert!((sol.beta - grid_root(&d, upper, 1e-3)).abs() < 1e-2);
            assert!((sol.beta - grid_argmin(&d, upper, 1e-3)).abs() < 1e-2);
        }
    }

    #[test]
    fn meas_anchor_at_p_one_tenth() {
        let d = geo(0.1);
        let sol = solve_meas(&d, DEFAULT_MAX_WAIT, DEFAULT_EPSILON).unwrap();
        assert!((1..=8).all(|y| continuous_wait(sol.beta, y) > 0.0));
        let policy = make_policy(PolicyKind::Threshold(sol.beta), &d, DEFAULT_MAX_WAIT);
        assert_eq!(policy.wait(1), 7);
    }

    #[test]
    fn bisection_iteration_bound_and_residual() {
        for p in [0.01, 0.1, 0.8] {
            let d = geo(p);
            let sol = solve_meas(&d, DEFAULT_MAX_WAIT, DEFAULT_EPSILON).unwrap();
            let bound = (sol.upper_bound / sol.epsilon).log2().ceil() as u32;
            assert!(sol.iterations <= bound);
            // o has slope -2 E[max(β, Y)], so a bracket of width ε bounds |o|.
            let slope = 2.0 * (sol.beta.max(d.mean()) + d.second_moment());
            assert!(
                sol.residual.abs() <= slope * sol.epsilon,
                "{}",
                sol.residual
            );
        }
    }

    #[test]
    fn residual_shrinks_with_epsilon() {
        let d = geo(0.2);
        for eps in [1e-2, 1e-4, 1e-6, 1e-8] {
            let sol = solve_meas(&d, 100, eps).unwrap();
            let scale = 2.0 * d.expect_over_y(|y| sol.beta.max(y as f64)).unwrap();
            assert!(
                sol.residual.abs() <= scale * eps,
                "eps {eps}: {}",
                sol.residual
            );
        }
    }

    #[test]
    fn bracket_invariant_holds() {
        let d = geo(0.25);
        let sol = solve_meas(&d, 100, 1e-9).unwrap();
        assert!(meas_residual(&d, sol.beta - 1e-6) > 0.0);
        assert!(meas_residual(&d, sol.beta + 1e-6) < 0.0);
    }

    #[test]
    fn beta_decreases_with_p() {
        let ps = [0.05, 0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8];
        let betas: Vec<f64> = ps
            .iter()
            .map(|&p| solve_meas(&geo(p), 100, 1e-9).unwrap().beta)
            .collect();
        assert!(betas.windows(2).all(|w| w[1] <= w[0]), "{betas:?}");
    }

    #[test]
    fn small_upper_bound_is_reported() {
        let d = geo(0.1);
        assert!(matches!(
            solve_meas_with_bound(&d, 1.0, 1e-9),
            Err(Error::UpperBoundTooSmall { .. })
        ));
        assert!(solve_meas_with_bound(&d, 1e6, 0.0).is_err());
    }

    #[test]
    fn threshold_floors_and_caps() {
        let d = geo(0.1);
        let wide = make_policy(PolicyKind::Threshold(8.3), &d, 100);
        assert_eq!(wide.wait(1), 7);
        assert_eq!(wide.wait(8), 0);
        assert_eq!(wide.wait(9), 0);
        let capped = make_policy(PolicyKind::Threshold(8.3), &d, 5);
        assert_eq!(capped.wait(1), 5);
        assert!(capped.waits().iter().all(|&g| g <= 5));
        assert!(make_policy(PolicyKind::ZeroWait, &d, 100).is_zero_wait());
        assert_eq!(make_policy(PolicyKind::Constant(150), &d, 100).wait(3), 100);
    }

    #[test]
    fn wait_lookup_is_pure() {
        let d = geo(0.2);
        let policy = PolicySpec::Meas.resolve(&d, 100, 1e-9).unwrap().0;
        for (&y, &g) in policy.support().iter().zip(policy.waits()) {
            assert_eq!(policy.wait(y), g);
            assert_eq!(policy.wait(y), policy.wait(y));
        }
        assert_eq!(policy.wait(10_000), 0);
    }

    #[test]
    fn spec_strings_round_trip() {
        for s in ["zero-wait", "const:3", "meas"] {
            assert_eq!(s.parse::<PolicySpec>().unwrap().to_string(), s);
        }
        assert!("const:x".parse::<PolicySpec>().is_err());
        assert!("greedy".parse::<PolicySpec>().is_err());
    }

    proptest::proptest! {
        #[test]
        fn threshold_table_is_bounded_and_non_increasing(beta in 0.0f64..500.0, m in 0u64..200, p in 0.02f64..1.0) {
            let d = TransmissionDistribution::geometric(p, 1e-12).unwrap();
            let pol = make_policy(PolicyKind::Threshold(beta), &d, m);
            proptest::prop_assert!(pol.waits().iter().all(|&g| g <= m));
            proptest::prop_assert!(pol.waits().windows(2).all(|w| w[1] <= w[0]));
        }
    }
}
