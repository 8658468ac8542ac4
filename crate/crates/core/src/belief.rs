//! Dirichlet-compound-multinomial agent model.
//!
//! Sampling is fixed so that replays are stable across releases:
//!
//! * `Gamma(a, 1)` for `a >= 1` uses Marsaglia-Tsang squeeze/rejection with
//!   normals from the Marsaglia polar method (the spare normal is discarded).
//! * `Gamma(a, 1)` for `a < 1` uses the boost `Gamma(a+1, 1) * U^(1/a)`,
//!   evaluated in log space so tiny shapes cannot underflow.
//! * `Dirichlet(α)` normalises K gamma variates with a log-sum-exp.
//! * `Categorical(θ)` inverts the CDF with a single uniform.

use serde::{Deserialize, Serialize};

use crate::error::{param, Error, Result};
use crate::rng::RngStream;

/// Smallest admissible Dirichlet parameter.
pub const MIN_ALPHA: f64 = 1e-12;

/// Tolerance on `Σθ = 1`.
pub const SIMPLEX_TOL: f64 = 1e-9;

/// Dirichlet parameters `α` of one agent. Never renormalised.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct BeliefVector(Vec<f64>);

impl BeliefVector {
    pub fn new(entries: Vec<f64>) -> Result<Self> {
        if entries.len() < 2 {
            return param(format!("belief needs K >= 2 entries, got {}", entries.len()));
        }
        if let Some((k, a)) = entries
            .iter()
            .enumerate()
            .find(|(_, a)| !a.is_finite() || **a < MIN_ALPHA)
        {
            return param(format!(
                "belief entry {} is {a}; entries must be finite and >= {MIN_ALPHA}",
                k + 1
            ));
        }
        Ok(Self(entries))
    }

    /// The default shape `(2, 1, ..., 1)` scaled by `scale`.
    pub fn default_shape(k: usize, scale: f64) -> Result<Self> {
        if k < 2 {
            return param(format!("K must be >= 2, got {k}"));
        }
        let mut v = vec![scale; k];
        v[0] = 2.0 * scale;
        Self::new(v)
    }

    pub fn k(&self) -> usize {
        self.0.len()
    }

    pub fn entries(&self) -> &[f64] {
        &self.0
    }

    /// `Σα`
    pub fn total(&self) -> f64 {
        self.0.iter().sum()
    }

    /// Dirichlet mean `α / Σα`.
    pub fn mean(&self) -> Vec<f64> {
        let s = self.total();
        self.0.iter().map(|a| a / s).collect()
    }
}

impl TryFrom<Vec<f64>> for BeliefVector {
    type Error = Error;
    fn try_from(v: Vec<f64>) -> Result<Self> {
        Self::new(v)
    }
}

impl From<BeliefVector> for Vec<f64> {
    fn from(b: BeliefVector) -> Self {
        b.0
    }
}

/// A point on the K-simplex.
#[derive(Clone, Debug, PartialEq)]
pub struct ThetaVector(Vec<f64>);

impl ThetaVector {
    pub fn new(entries: Vec<f64>) -> Result<Self> {
        if entries.is_empty() {
            return param("theta must be non-empty");
        }
        if entries
            .iter()
            .any(|p| !p.is_finite() || *p < 0.0 || *p > 1.0)
        {
            return param("theta entries must lie in [0, 1]");
        }
        let s: f64 = entries.iter().sum();
        if (s - 1.0).abs() > SIMPLEX_TOL {
            return param(format!("theta sums to {s}, not 1"));
        }
        Ok(Self(entries))
    }

    pub fn k(&self) -> usize {
        self.0.len()
    }

    pub fn entries(&self) -> &[f64] {
        &self.0
    }
}

/// Observation counts `c`; integer for categorical answers, real-valued for
/// soft histograms over clustered response types.
#[derive(Clone, Debug, PartialEq)]
pub struct CountVector(Vec<f64>);

impl CountVector {
    pub fn new(entries: Vec<f64>) -> Result<Self> {
        if entries.iter().any(|c| !c.is_finite() || *c < 0.0) {
            return param("counts must be finite and non-negative");
        }
        Ok(Self(entries))
    }

    /// Categorical counts of 1-based answers over `k` options.
    pub fn from_responses<I>(responses: I, k: usize) -> Result<Self>
    where
        I: IntoIterator<Item = usize>,
    {
        let mut c = vec![0.0; k];
        for y in responses {
            if y == 0 || y > k {
                return param(format!("response {y} outside 1..={k}"));
            }
            c[y - 1] += 1.0;
        }
        Ok(Self(c))
    }

    pub fn k(&self) -> usize {
        self.0.len()
    }

    pub fn entries(&self) -> &[f64] {
        &self.0
    }

    pub fn total(&self) -> f64 {
        self.0.iter().sum()
    }
}

/// `θ ~ Dirichlet(α)`. Consumes the gamma draws of K independent variates.
pub fn sample_theta(belief: &BeliefVector, rng: &mut RngStream) -> ThetaVector {
    let logs: Vec<f64> = belief.0.iter().map(|&a| ln_gamma_variate(a, rng)).collect();
    let max = logs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut theta: Vec<f64> = logs.iter().map(|l| (l - max).exp()).collect();
    let s: f64 = theta.iter().sum();
    for t in &mut theta {
        *t /= s;
    }
    ThetaVector(theta)
}

/// `y ~ Categorical(θ)`, returned 1-based. Exactly one uniform draw.
pub fn sample_response(theta: &ThetaVector, rng: &mut RngStream) -> usize {
    let u = rng.uniform();
    let mut acc = 0.0;
    let mut last_positive = 1;
    for (k, &p) in theta.0.iter().enumerate() {
        if p > 0.0 {
            last_positive = k + 1;
            acc += p;
            if u < acc {
                return k + 1;
            }
        }
    }
    // u landed in the rounding gap above the final cumulative sum
    last_positive
}

/// One DCM draw: belief sampling followed by response generation.
pub fn sample_dcm(belief: &BeliefVector, rng: &mut RngStream) -> usize {
    let theta = sample_theta(belief, rng);
    sample_response(&theta, rng)
}

/// `P(y = k | α) = α_k / Σα` for 1-based `k`.
pub fn marginal_belief(belief: &BeliefVector, k: usize) -> Result<f64> {
    if k == 0 || k > belief.k() {
        return param(format!("answer index {k} outside 1..={}", belief.k()));
    }
    Ok(belief.0[k - 1] / belief.total())
}

/// Conjugate update `α + c`. Inputs are left untouched.
pub fn posterior_update(belief: &BeliefVector, counts: &CountVector) -> Result<BeliefVector> {
    if belief.k() != counts.k() {
        return param(format!(
            "dimension mismatch: belief has K={}, counts has K={}",
            belief.k(),
            counts.k()
        ));
    }
    let entries = belief
        .0
        .iter()
        .zip(&counts.0)
        .map(|(a, c)| a + c)
        .collect();
    Ok(BeliefVector(entries))
}

/// Log of a `Gamma(shape, 1)` variate.
fn ln_gamma_variate(shape: f64, rng: &mut RngStream) -> f64 {
    if shape < 1.0 {
        let boosted = ln_gamma_variate(shape + 1.0, rng);
        return boosted + rng.uniform_open0().ln() / shape;
    }
    let d = shape - 1.0 / 3.0;
    let c = 1.0 / (9.0 * d).sqrt();
    loop {
        let x = standard_normal(rng);
        let t = 1.0 + c * x;
        if t <= 0.0 {
            continue;
        }
        let v = t * t * t;
        let u = rng.uniform_open0();
        let x2 = x * x;
        if u < 1.0 - 0.0331 * x2 * x2 || u.ln() < 0.5 * x2 + d * (1.0 - v + v.ln()) {
            return d.ln() + v.ln();
        }
    }
}

fn standard_normal(rng: &mut RngStream) -> f64 {
    loop {
        let a = 2.0 * rng.uniform() - 1.0;
        let b = 2.0 * rng.uniform() - 1.0;
        let s = a * a + b * b;
        if s > 0.0 && s < 1.0 {
            return a * (-2.0 * s.ln() / s).sqrt();
        }
    }
}
