//! Paired loss samples, per-margin order statistics and the tail configuration
//! shared by all estimators.

use serde::Serialize;

use crate::error::{Error, Result};

/// Paired losses `(X_i, Y_i)`: `xs` is the institution, `ys` the system.
#[derive(Debug, Clone, PartialEq)]
pub struct LossPairSample {
    xs: Vec<f64>,
    ys: Vec<f64>,
}

impl LossPairSample {
    pub fn new(xs: Vec<f64>, ys: Vec<f64>) -> Result<Self> {
        if xs.len() != ys.len() {
            return Err(Error::InvalidInput(format!(
                "margins differ in length ({} vs {})",
                xs.len(),
                ys.len()
            )));
        }
        if xs.len() < 2 {
            return Err(Error::InvalidInput(format!(
                "need at least 2 pairs, got {}",
                xs.len()
            )));
        }
        if xs.iter().chain(ys.iter()).any(|v| !v.is_finite()) {
            return Err(Error::InvalidInput("non-finite loss".into()));
        }
        Ok(Self { xs, ys })
    }

    pub fn len(&self) -> usize {
        self.xs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.xs.is_empty()
    }

    pub fn xs(&self) -> &[f64] {
        &self.xs
    }

    pub fn ys(&self) -> &[f64] {
        &self.ys
    }

    /// Apply `f` to the institution margin, keeping the system margin.
    pub fn map_x(&self, f: impl Fn(f64) -> f64) -> Result<Self> {
        Self::new(self.xs.iter().map(|&x| f(x)).collect(), self.ys.clone())
    }

    pub fn map_y(&self, f: impl Fn(f64) -> f64) -> Result<Self> {
        Self::new(self.xs.clone(), self.ys.iter().map(|&y| f(y)).collect())
    }
}

/// Order statistics and ranks of one margin.
///
/// Ranks are 1-based and always a permutation of `1..=n`: tied values are ranked in
/// order of their original index.
#[derive(Debug, Clone, PartialEq)]
pub struct MarginIndex {
    sorted: Vec<f64>,
    ranks: Vec<usize>,
    /// `#{j : x_j <= x_i}`, i.e. `n * F_n(x_i)` with the empirical CDF.
    le_counts: Vec<usize>,
}

impl MarginIndex {
    pub fn new(values: &[f64]) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::InvalidInput("empty margin".into()));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidInput("non-finite value in margin".into()));
        }
        let n = values.len();
        let mut order: Vec<usize> = (0..n).collect();
        // stable: ties keep index order
        order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));

        let sorted: Vec<f64> = order.iter().map(|&i| values[i]).collect();
        let mut ranks = vec![0; n];
        for (pos, &i) in order.iter().enumerate() {
            ranks[i] = pos + 1;
        }
        let le_counts = values
            .iter()
            .map(|&v| sorted.partition_point(|&s| s <= v))
            .collect();
        Ok(Self {
            sorted,
            ranks,
            le_counts,
        })
    }

    pub fn len(&self) -> usize {
        self.sorted.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sorted.is_empty()
    }

    /// Ascending order statistics `X_{1,n} <= ... <= X_{n,n}`.
    pub fn sorted(&self) -> &[f64] {
        &self.sorted
    }

    pub fn ranks(&self) -> &[usize] {
        &self.ranks
    }

    pub fn le_counts(&self) -> &[usize] {
        &self.le_counts
    }

    /// `X_{j,n}`, 1-based.
    pub fn order_stat(&self, j: usize) -> f64 {
        self.sorted[j - 1]
    }
}

/// Non-fatal conditions detected while validating or estimating.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Warning {
    /// `k < n^(2/3)`.
    SmallK { n: usize, k: usize, lower_bound: f64 },
    /// `d = k / (n (1 - tau')) < 1`: the target level is not beyond the intermediate one.
    TargetBelowIntermediate { d: f64 },
    /// The adjustment factor hit the `1/(2k)` floor.
    EtaClamped { variant: u8, raw: f64 },
    /// `gamma1_hat >= 1/2`; the fourth CoES extrapolation loses its limit theory.
    GammaAboveHalf { gamma: f64 },
}

impl Warning {
    pub fn key(&self) -> &'static str {
        match self {
            Warning::SmallK { .. } => "small_k",
            Warning::TargetBelowIntermediate { .. } => "target_below_intermediate",
            Warning::EtaClamped { .. } => "eta_clamped",
            Warning::GammaAboveHalf { .. } => "gamma_above_half",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TailConfig {
    pub n: usize,
    pub k: usize,
    /// `ceil(k^2 / n)`, shared by both tail algorithms.
    pub m: usize,
    pub tau_prime: Option<f64>,
    /// Extrapolation ratio `k / (n (1 - tau'))`.
    pub d: Option<f64>,
}

impl TailConfig {
    pub fn validate(n: usize, k: usize, tau_prime: Option<f64>) -> Result<(Self, Vec<Warning>)> {
        if n < 2 {
            return Err(Error::InvalidConfig(format!("sample size {n} < 2")));
        }
        if k == 0 || k >= n {
            return Err(Error::InvalidConfig(format!(
                "k must satisfy 1 <= k < n (k = {k}, n = {n})"
            )));
        }
        let m = (k * k).div_ceil(n);
        if m < 1 || m > k {
            return Err(Error::InvalidConfig(format!(
                "m = ceil(k^2/n) = {m} outside [1, k]"
            )));
        }
        let mut warnings = Vec::new();
        let lower_bound = (n as f64).powf(2.0 / 3.0);
        if (k as f64) < lower_bound {
            warnings.push(Warning::SmallK { n, k, lower_bound });
        }
        let d = match tau_prime {
            None => None,
            Some(t) => {
                if !(t > 0.0 && t < 1.0) {
                    return Err(Error::InvalidConfig(format!("tau' = {t} outside (0, 1)")));
                }
                let d = k as f64 / (n as f64 * (1.0 - t));
                if d < 1.0 {
                    warnings.push(Warning::TargetBelowIntermediate { d });
                }
                Some(d)
            }
        };
        Ok((
            Self {
                n,
                k,
                m,
                tau_prime,
                d,
            },
            warnings,
        ))
    }
}
