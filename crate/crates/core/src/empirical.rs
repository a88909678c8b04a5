//! Univariate tail machinery: Hill estimator, order-statistic VaR and the
//! diagnostic curves used to pick `k` and check tail dependence.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::sample::{LossPairSample, MarginIndex};

/// Normal 95% quantile, giving two-sided 90% bands.
const BAND_Z: f64 = 1.645;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HillCurve {
    pub ks: Vec<usize>,
    pub gammas: Vec<f64>,
    /// `gamma * (1 -/+ 1.645 / sqrt(k))`.
    pub bands: Vec<(f64, f64)>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TailProbCurve {
    pub taus: Vec<f64>,
    pub p_hat: Vec<f64>,
    /// `(1 - tau)^2`, the joint exceedance probability under independence.
    pub square: Vec<f64>,
}

fn check_k(n: usize, k: usize) -> Result<()> {
    if k == 0 || k >= n {
        return Err(Error::InvalidConfig(format!(
            "k must satisfy 1 <= k < n (k = {k}, n = {n})"
        )));
    }
    Ok(())
}

/// Hill estimator of the extreme value index from the top `k` order statistics.
pub fn hill_estimate(margin: &MarginIndex, k: usize) -> Result<f64> {
    let n = margin.len();
    check_k(n, k)?;
    let sorted = margin.sorted();
    let threshold = sorted[n - k - 1];
    if threshold <= 0.0 {
        return Err(Error::InvalidInput(format!(
            "Hill threshold X_(n-k) = {threshold} is not positive"
        )));
    }
    let sum: f64 = sorted[n - k..].iter().map(|&x| (x / threshold).ln()).sum();
    Ok(sum / k as f64)
}

/// `X_{n-k,n}`, the empirical `VaR(1 - k/n)`.
pub fn empirical_var(margin: &MarginIndex, k: usize) -> Result<f64> {
    let n = margin.len();
    check_k(n, k)?;
    Ok(margin.order_stat(n - k))
}

/// Index `ceil(n * tau)` of the empirical tau-quantile, snapping products that sit
/// within float noise of an integer.
pub(crate) fn quantile_index(n: usize, tau: f64) -> usize {
    let x = n as f64 * tau;
    let r = x.round();
    let j = if (x - r).abs() <= 1e-9 * x.max(1.0) {
        r
    } else {
        x.ceil()
    };
    (j as usize).clamp(1, n)
}

/// Empirical joint exceedance probability `P(X >= VaR_X(tau), Y >= VaR_Y(tau))`
/// over a grid of levels, paired with `(1 - tau)^2`.
pub fn tail_prob_curve(sample: &LossPairSample, taus: &[f64]) -> Result<TailProbCurve> {
    let n = sample.len();
    let mx = MarginIndex::new(sample.xs())?;
    let my = MarginIndex::new(sample.ys())?;
    let mut p_hat = Vec::with_capacity(taus.len());
    let mut square = Vec::with_capacity(taus.len());
    for &tau in taus {
        if !(tau > 0.0 && tau < 1.0) {
            return Err(Error::InvalidInput(format!("tau = {tau} outside (0, 1)")));
        }
        let j = quantile_index(n, tau);
        let vx = mx.order_stat(j);
        let vy = my.order_stat(j);
        let count = sample
            .xs()
            .iter()
            .zip(sample.ys())
            .filter(|(&x, &y)| x >= vx && y >= vy)
            .count();
        p_hat.push(count as f64 / n as f64);
        square.push((1.0 - tau) * (1.0 - tau));
    }
    Ok(TailProbCurve {
        taus: taus.to_vec(),
        p_hat,
        square,
    })
}

/// Hill plot over `k_min..=k_max`.
pub fn hill_curve(margin: &MarginIndex, k_min: usize, k_max: usize) -> Result<HillCurve> {
    let n = margin.len();
    if k_min < 2 || k_min > k_max || k_max + 1 > n {
        return Err(Error::InvalidConfig(format!(
            "Hill range needs 2 <= k_min <= k_max <= n-1 (got {k_min}..={k_max}, n = {n})"
        )));
    }
    let mut curve = HillCurve {
        ks: Vec::new(),
        gammas: Vec::new(),
        bands: Vec::new(),
    };
    for k in k_min..=k_max {
        let g = hill_estimate(margin, k)?;
        let half = BAND_Z / (k as f64).sqrt();
        curve.ks.push(k);
        curve.gammas.push(g);
        curve.bands.push((g * (1.0 - half), g * (1.0 + half)));
    }
    Ok(curve)
}
