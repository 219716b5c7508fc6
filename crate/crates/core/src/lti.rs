//! LTI plant model, the AoI cost function and the estimation-error recursion.
//!
//! The plant is `X_{n+1} = A X_n + B U_n + W_n` with `W_n ~ N(0, σ² I)`.
//! When the freshest delivered sample has age `Δ`, the estimation error is
//! the noise accumulated since that sample was taken,
//! `e_n = Σ_{i=1}^{Δ} A^{i-1} W_{n-i}`, and its mean squared norm is
//! `f(Δ) = Σ_{i=0}^{Δ-1} Tr((Aⁱ)ᵀ Aⁱ Σ)`.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::rng::{stream, StreamPurpose};

/// Relative tolerance used when classifying a cost function as linear.
pub const DEFAULT_LINEAR_TOL: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq)]
pub struct SystemModel {
    a: DMatrix<f64>,
    b: Option<DMatrix<f64>>,
    noise_variance: f64,
}

impl SystemModel {
    pub fn new(a: DMatrix<f64>, noise_variance: f64) -> Result<Self> {
        if a.nrows() == 0 || a.nrows() != a.ncols() {
            return Err(Error::Shape(format!(
                "A must be square and non-empty, got {}x{}",
                a.nrows(),
                a.ncols()
            )));
        }
        if a.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid("a_matrix", "entries must be finite"));
        }
        if !(noise_variance > 0.0 && noise_variance.is_finite()) {
            return Err(Error::invalid(
                "noise_variance",
                format!("must be positive and finite, got {noise_variance}"),
            ));
        }
        Ok(Self {
            a,
            b: None,
            noise_variance,
        })
    }

    pub fn scalar(a: f64, noise_variance: f64) -> Result<Self> {
        Self::new(DMatrix::from_element(1, 1, a), noise_variance)
    }

    /// Planar rotation by `theta` radians.
    pub fn rotation(theta: f64, noise_variance: f64) -> Result<Self> {
        let (s, c) = theta.sin_cos();
        Self::new(
            DMatrix::from_row_slice(2, 2, &[c, -s, s, c]),
            noise_variance,
        )
    }

    pub fn with_input(mut self, b: DMatrix<f64>) -> Result<Self> {
        if b.nrows() != self.dim() || b.ncols() == 0 {
            return Err(Error::Shape(format!(
                "B must be {}xq with q >= 1, got {}x{}",
                self.dim(),
                b.nrows(),
                b.ncols()
            )));
        }
        self.b = Some(b);
        Ok(self)
    }

    pub fn dim(&self) -> usize {
        self.a.nrows()
    }

    pub fn a(&self) -> &DMatrix<f64> {
        &self.a
    }

    pub fn b(&self) -> Option<&DMatrix<f64>> {
        self.b.as_ref()
    }

    pub fn noise_variance(&self) -> f64 {
        self.noise_variance
    }

    /// `Tr(Σ) = d σ²`.
    pub fn noise_trace(&self) -> f64 {
        self.dim() as f64 * self.noise_variance
    }

    /// Largest eigenvalue modulus of `A`.
    pub fn spectral_radius(&self) -> f64 {
        self.a
            .complex_eigenvalues()
            .iter()
            .map(|z| z.norm())
            .fold(0.0, f64::max)
    }
}

/// Tabulated `f(Δ)` with single and double prefix sums.
///
/// `prefix[m] = f(m)` and `double_prefix[m] = Σ_{j<m} f(j)`, so the total cost
/// of the ages `a, a+1, …, b-1` in one renewal cycle is
/// `double_prefix[b] - double_prefix[a]`.
#[derive(Debug, Clone, PartialEq)]
pub struct AoiCostFunction {
    coeffs: Vec<f64>,
    prefix: Vec<f64>,
    double_prefix: Vec<f64>,
    gamma: Option<f64>,
}

impl AoiCostFunction {
    pub fn max_delta(&self) -> usize {
        self.coeffs.len()
    }

    /// `c_i = Tr((Aⁱ)ᵀ Aⁱ Σ)` for `i < max_delta`.
    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    pub fn prefix(&self) -> &[f64] {
        &self.prefix
    }

    pub fn double_prefix(&self) -> &[f64] {
        &self.double_prefix
    }

    /// `f(age)`; panics if `age > max_delta`.
    pub fn f(&self, age: usize) -> f64 {
        self.prefix[age]
    }

    /// `Σ_{j=start}^{start+len-1} f(j)`, or `None` if the table is too short.
    pub fn cycle_cost(&self, start: usize, len: usize) -> Option<f64> {
        let end = start.checked_add(len)?;
        if end > self.max_delta() {
            return None;
        }
        Some(self.double_prefix[end] - self.double_prefix[start])
    }

    /// `γ` with `f(j) = γ j`, when the cost is linear.
    pub fn gamma(&self) -> Option<f64> {
        self.gamma
    }
}

pub fn build_cost_function(model: &SystemModel, max_delta: usize) -> Result<AoiCostFunction> {
    if max_delta == 0 {
        return Err(Error::invalid("max_delta", "must be at least 1"));
    }
    let d = model.dim();
    let sigma2 = model.noise_variance();
    let mut coeffs = Vec::with_capacity(max_delta);
    let mut power = DMatrix::<f64>::identity(d, d);
    for i in 0..max_delta {
        if i > 0 {
            power = model.a() * &power;
        }
        // Σ = σ² I, so Tr((Aⁱ)ᵀ Aⁱ Σ) = σ² ‖Aⁱ‖_F².
        let c = sigma2 * power.norm_squared();
        if !c.is_finite() {
            return Err(Error::CostOverflow { index: i });
        }
        coeffs.push(c);
    }

    let mut prefix = Vec::with_capacity(max_delta + 1);
    let mut double_prefix = Vec::with_capacity(max_delta + 1);
    prefix.push(0.0);
    double_prefix.push(0.0);
    for (i, c) in coeffs.iter().enumerate() {
        let s = prefix[i] + c;
        let t = double_prefix[i] + prefix[i];
        if !s.is_finite() || !t.is_finite() {
            return Err(Error::CostOverflow { index: i });
        }
        prefix.push(s);
        double_prefix.push(t);
    }

    let mut cost = AoiCostFunction {
        coeffs,
        prefix,
        double_prefix,
        gamma: None,
    };
    cost.gamma = check_linear_cost(&cost, DEFAULT_LINEAR_TOL);
    Ok(cost)
}

/// Returns `γ = f(1)` if `|f(j) - γ j| ≤ rel_tol·γ·j` for every tabulated `j`.
pub fn check_linear_cost(cost: &AoiCostFunction, rel_tol: f64) -> Option<f64> {
    let gamma = *cost.prefix.get(1)?;
    if gamma <= 0.0 {
        return None;
    }
    cost.prefix
        .iter()
        .enumerate()
        .skip(1)
        .all(|(j, &s)| {
            let linear = gamma * j as f64;
            (s - linear).abs() <= rel_tol * linear
        })
        .then_some(gamma)
}

/// i.i.d. `N(0, σ² I)` plant noise `W_0, …, W_{n-1}`.
#[derive(Debug, Clone, PartialEq)]
pub struct NoiseTrace {
    samples: Vec<DVector<f64>>,
    seed: u64,
}

impl NoiseTrace {
    pub fn generate(model: &SystemModel, len: usize, seed: u64) -> Self {
        let mut rng = stream(seed, StreamPurpose::Noise);
        let sigma = model.noise_variance().sqrt();
        let samples = (0..len)
            .map(|_| {
                let mut w = DVector::zeros(model.dim());
                draw_noise(&mut rng, sigma, &mut w);
                w
            })
            .collect();
        Self { samples, seed }
    }

    /// Wraps explicit noise vectors (seed recorded as 0).
    pub fn from_samples(samples: Vec<DVector<f64>>) -> Self {
        Self { samples, seed: 0 }
    }

    pub fn samples(&self) -> &[DVector<f64>] {
        &self.samples
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }
}

/// Fills `out` with one `N(0, σ² I)` draw. Simulators and [`NoiseTrace`]
/// share this so a seed yields the same noise sequence in both.
pub(crate) fn draw_noise<R: Rng + ?Sized>(rng: &mut R, sigma: f64, out: &mut DVector<f64>) {
    for v in out.iter_mut() {
        let z: f64 = StandardNormal.sample(rng);
        *v = sigma * z;
    }
}

/// `Σ_{i=1}^{age} A^{i-1} W_{n-i}`.
pub fn error_from_noise(
    model: &SystemModel,
    noise: &NoiseTrace,
    age: usize,
    n: usize,
) -> Result<DVector<f64>> {
    if age > n {
        return Err(Error::IndexUnderflow { n, age });
    }
    if age == 0 {
        return Ok(DVector::zeros(model.dim()));
    }
    if n > noise.len() {
        return Err(Error::TraceTooShort {
            needed: n - 1,
            len: noise.len(),
        });
    }
    // Horner from the oldest sample forward.
    let mut acc = DVector::zeros(model.dim());
    for w in &noise.samples[n - age..n] {
        acc = model.a() * acc + w;
    }
    Ok(acc)
}

/// `E‖e_n‖²` at age `age`, summed element by element over the rows of `A^{i-1}`.
///
/// Computes the same quantity as `f(age)` along a different route (row-major
/// scalar loops, right-multiplied powers), which makes it a cross-check for
/// [`build_cost_function`].
pub fn per_slot_error_variance(model: &SystemModel, age: usize) -> Result<f64> {
    if age == 0 {
        return Err(Error::invalid("age", "must be at least 1"));
    }
    let d = model.dim();
    let a: Vec<f64> = (0..d * d).map(|k| model.a()[(k / d, k % d)]).collect();
    let mut power = vec![0.0; d * d];
    for r in 0..d {
        power[r * d + r] = 1.0;
    }
    let mut row_var = vec![0.0; d];
    let mut next = vec![0.0; d * d];
    for i in 1..=age {
        if i > 1 {
            // power ← power · A
            for r in 0..d {
                for c in 0..d {
                    next[r * d + c] = (0..d).map(|k| power[r * d + k] * a[k * d + c]).sum();
                }
            }
            std::mem::swap(&mut power, &mut next);
        }
        for (r, var) in row_var.iter_mut().enumerate() {
            *var += power[r * d..(r + 1) * d].iter().map(|x| x * x).sum::<f64>();
        }
        if row_var.iter().any(|v| !v.is_finite()) {
            return Err(Error::CostOverflow { index: i - 1 });
        }
    }
    let total = model.noise_variance() * row_var.iter().sum::<f64>();
    if !total.is_finite() {
        return Err(Error::CostOverflow { index: age - 1 });
    }
    Ok(total)
}

/// Parses a matrix from whitespace- or comma-separated rows, one row per line.
/// Blank lines and lines starting with `#` are skipped.
pub fn parse_matrix(text: &str) -> Result<DMatrix<f64>> {
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let row = line
            .split(|c: char| c == ',' || c.is_whitespace())
            .filter(|t| !t.is_empty())
            .map(|t| {
                t.parse::<f64>().map_err(|e| Error::Parse {
                    line: lineno + 1,
                    reason: format!("`{t}`: {e}"),
                })
            })
            .collect::<Result<Vec<_>>>()?;
        if let Some(first) = rows.first() {
            if first.len() != row.len() {
                return Err(Error::Parse {
                    line: lineno + 1,
                    reason: format!("expected {} columns, found {}", first.len(), row.len()),
                });
            }
        }
        rows.push(row);
    }
    if rows.is_empty() {
        return Err(Error::Parse {
            line: 0,
            reason: "empty matrix".into(),
        });
    }
    let ncols = rows[0].len();
    let flat: Vec<f64> = rows.iter().flatten().copied().collect();
    Ok(DMatrix::from_row_slice(rows.len(), ncols, &flat))
}
