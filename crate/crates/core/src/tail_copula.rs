//! Nonparametric tail copula estimators and the adjustment factor `eta`.
//!
//! Two variants are supported throughout:
//!
//! - variant 1 works with the empirical survival `1 - F_n(X_i)` (denominator `n`),
//! - variant 2 works with ranks, thresholding `R_i >= n + 1/2 - k x`.
//!
//! Both are reduced to per-observation *tail scores* on the `x` scale so that
//! `R_hat(x, y) = (1/k) #{i : sx_i <= x, sy_i <= y}`. The scores are exact ratios of
//! small integers, which keeps comparisons with the candidate grid of `eta` exact.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::sample::{LossPairSample, MarginIndex, TailConfig};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Variant {
    /// Empirical-CDF form.
    Empirical,
    /// Rank form.
    Rank,
}

impl Variant {
    pub const ALL: [Variant; 2] = [Variant::Empirical, Variant::Rank];

    pub fn number(self) -> u8 {
        match self {
            Variant::Empirical => 1,
            Variant::Rank => 2,
        }
    }

    pub fn from_number(i: u8) -> Result<Self> {
        match i {
            1 => Ok(Variant::Empirical),
            2 => Ok(Variant::Rank),
            _ => Err(Error::InvalidInput(format!("tail copula variant {i} not in {{1, 2}}"))),
        }
    }
}

fn scores(margin: &MarginIndex, k: usize, variant: Variant) -> Vec<f64> {
    let n = margin.len();
    let kf = k as f64;
    match variant {
        // (n/k) * (1 - F_n(x_i))
        Variant::Empirical => margin
            .le_counts()
            .iter()
            .map(|&c| (n - c) as f64 / kf)
            .collect(),
        // R_i >= n + 1/2 - k x  <=>  (n + 1/2 - R_i) / k <= x
        Variant::Rank => margin
            .ranks()
            .iter()
            .map(|&r| (n as f64 + 0.5 - r as f64) / kf)
            .collect(),
    }
}

/// An evaluable estimate of the tail copula `R`.
#[derive(Debug, Clone, PartialEq)]
pub struct TailCopulaEstimate {
    variant: Variant,
    k: usize,
    sx: Vec<f64>,
    sy: Vec<f64>,
}

impl TailCopulaEstimate {
    pub fn new(sample: &LossPairSample, k: usize, variant: Variant) -> Result<Self> {
        let mx = MarginIndex::new(sample.xs())?;
        let my = MarginIndex::new(sample.ys())?;
        Self::from_margins(&mx, &my, k, variant)
    }

    pub fn from_margins(
        mx: &MarginIndex,
        my: &MarginIndex,
        k: usize,
        variant: Variant,
    ) -> Result<Self> {
        let n = mx.len();
        if k == 0 || k >= n {
            return Err(Error::InvalidConfig(format!(
                "k must satisfy 1 <= k < n (k = {k}, n = {n})"
            )));
        }
        Ok(Self {
            variant,
            k,
            sx: scores(mx, k, variant),
            sy: scores(my, k, variant),
        })
    }

    pub fn variant(&self) -> Variant {
        self.variant
    }

    pub fn k(&self) -> usize {
        self.k
    }

    /// Number of observations jointly in the `(x, y)` tail region.
    pub fn count(&self, x: f64, y: f64) -> usize {
        self.sx
            .iter()
            .zip(&self.sy)
            .filter(|(&a, &b)| a <= x && b <= y)
            .count()
    }

    pub fn eval(&self, x: f64, y: f64) -> Result<f64> {
        if !(x >= 0.0 && y >= 0.0) {
            return Err(Error::InvalidInput(format!(
                "tail copula arguments must be non-negative (got {x}, {y})"
            )));
        }
        Ok(self.count(x, y) as f64 / self.k as f64)
    }
}

/// `R_hat^(variant)(x, y)` with intermediate order `k`.
pub fn r_hat(sample: &LossPairSample, k: usize, variant: Variant, x: f64, y: f64) -> Result<f64> {
    TailCopulaEstimate::new(sample, k, variant)?.eval(x, y)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EtaEstimate {
    pub variant: Variant,
    /// Estimate used downstream, floored at `1/(2k)`.
    pub value: f64,
    /// Output of the order-statistic algorithm before the floor.
    pub raw: f64,
    pub clamped: bool,
}

/// Adjustment factor `eta_hat_{1-k/n}` via the closed-form order-statistic procedure.
pub fn eta_hat(sample: &LossPairSample, k: usize, variant: Variant) -> Result<EtaEstimate> {
    let mx = MarginIndex::new(sample.xs())?;
    let my = MarginIndex::new(sample.ys())?;
    eta_hat_from_margins(&mx, &my, k, variant)
}

pub fn eta_hat_from_margins(
    mx: &MarginIndex,
    my: &MarginIndex,
    k: usize,
    variant: Variant,
) -> Result<EtaEstimate> {
    let n = mx.len();
    let (cfg, _) = TailConfig::validate(n, k, None)?;
    let m = cfg.m;

    let raw = match variant {
        Variant::Empirical => {
            // n * Z = n - #{j : X_j <= X_i}; keep points with Z^Y <= k/n
            let mut zx: Vec<usize> = my
                .le_counts()
                .iter()
                .zip(mx.le_counts())
                .filter(|(&cy, _)| n - cy <= k)
                .map(|(_, &cx)| n - cx)
                .collect();
            if zx.len() < m {
                return Err(Error::SubsampleSize {
                    found: zx.len(),
                    expected: k + 1,
                });
            }
            zx.sort_unstable();
            zx[m - 1] as f64 / k as f64
        }
        Variant::Rank => {
            // R^Y >= n + 1/2 - k  <=>  R^Y >= n - k + 1
            let mut rx: Vec<usize> = my
                .ranks()
                .iter()
                .zip(mx.ranks())
                .filter(|(&ry, _)| ry + k > n)
                .map(|(_, &r)| r)
                .collect();
            if rx.len() != k {
                return Err(Error::SubsampleSize {
                    found: rx.len(),
                    expected: k,
                });
            }
            rx.sort_unstable();
            let r = rx[k - m];
            (n as f64 + 0.5 - r as f64) / k as f64
        }
    };
    if raw > 1.0 {
        return Err(Error::NoTailDependence(format!(
            "eta_hat^({}) = {raw} exceeds 1",
            variant.number()
        )));
    }
    let floor = 1.0 / (2.0 * k as f64);
    let clamped = raw < floor;
    Ok(EtaEstimate {
        variant,
        value: if clamped { floor } else { raw },
        raw,
        clamped,
    })
}

/// `inf { eta in (0, 1] : R_hat(eta, 1) >= k/n }` by scanning the points where
/// `R_hat(., 1)` can jump. Unclamped. Serves as a reference for [`eta_hat`].
pub fn eta_hat_bruteforce(sample: &LossPairSample, k: usize, variant: Variant) -> Result<f64> {
    let n = sample.len();
    TailConfig::validate(n, k, None)?;
    let est = TailCopulaEstimate::new(sample, k, variant)?;
    let level = k as f64 / n as f64;
    let kf = k as f64;
    let candidates: Vec<f64> = match variant {
        Variant::Empirical => (0..=k).map(|j| j as f64 / kf).chain([1.0]).collect(),
        Variant::Rank => (n - k..=n)
            .rev()
            .map(|r| (n as f64 + 0.5 - r as f64) / kf)
            .filter(|&e| e > 0.0 && e <= 1.0)
            .collect(),
    };
    for eta in candidates {
        if est.eval(eta, 1.0)? >= level {
            return Ok(eta);
        }
    }
    Err(Error::NoTailDependence(format!(
        "no eta in (0, 1] reaches R_hat(eta, 1) >= k/n = {level}"
    )))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::seq::SliceRandom;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn pairs(xs: &[f64], ys: &[f64]) -> LossPairSample {
        LossPairSample::new(xs.to_vec(), ys.to_vec()).unwrap()
    }

    fn one_to(n: usize) -> Vec<f64> {
        (1..=n).map(|i| i as f64).collect()
    }

    #[test]
    fn r_hat_examples() {
        let s = pairs(&[1.0, 2.0, 3.0, 4.0], &[1.0, 3.0, 2.0, 4.0]);
        assert_eq!(r_hat(&s, 2, Variant::Empirical, 1.0, 1.0).unwrap(), 1.5);
        assert_eq!(r_hat(&s, 2, Variant::Rank, 1.0, 1.0).unwrap(), 0.5);
        for x in [0.0, 0.3, 1.0, 5.0, 100.0] {
            assert_eq!(r_hat(&s, 2, Variant::Rank, x, 0.0).unwrap(), 0.0);
        }
        assert!(r_hat(&s, 2, Variant::Rank, -1.0, 1.0).is_err());
        assert!(r_hat(&s, 4, Variant::Rank, 1.0, 1.0).is_err());
    }

    #[test]
    fn eta_examples() {
        let v = one_to(8);
        let s = pairs(&v, &v);
        let e1 = eta_hat(&s, 4, Variant::Empirical).unwrap();
        assert_eq!(e1.value, 0.25);
        assert!(!e1.clamped);
        let e2 = eta_hat(&s, 4, Variant::Rank).unwrap();
        assert_eq!(e2.value, 0.375);
        assert_eq!(eta_hat_bruteforce(&s, 4, Variant::Empirical).unwrap(), 0.25);
        assert_eq!(eta_hat_bruteforce(&s, 4, Variant::Rank).unwrap(), 0.375);

        let s = pairs(&[1.0, 2.0, 3.0, 4.0], &[1.0, 3.0, 2.0, 4.0]);
        let e = eta_hat(&s, 2, Variant::Empirical).unwrap();
        assert_eq!(e.raw, 0.0);
        assert_eq!(e.value, 0.25);
        assert!(e.clamped);
        assert_eq!(eta_hat_bruteforce(&s, 2, Variant::Empirical).unwrap(), 0.0);
    }

    #[test]
    fn eta_rejects_absent_dependence() {
        let v = one_to(40);
        let rev: Vec<f64> = v.iter().rev().copied().collect();
        let s = pairs(&v, &rev);
        for var in Variant::ALL {
            assert!(matches!(
                eta_hat(&s, 10, var),
                Err(Error::NoTailDependence(_))
            ));
            assert!(eta_hat_bruteforce(&s, 10, var).is_err());
        }
    }

    #[test]
    fn eta_rank_detects_ties_in_system_margin() {
        // every y tied: the rank tie-break still yields k filtered points
        let s = pairs(&one_to(10), &[1.0; 10]);
        assert!(eta_hat(&s, 3, Variant::Rank).is_ok());
        // empirical form sees all ten points at survival 0
        assert!(eta_hat(&s, 3, Variant::Empirical).is_ok());
    }

    fn random_sample(rng: &mut ChaCha8Rng, n: usize) -> LossPairSample {
        // latent common factor gives tail dependence; permutations keep it tie-free
        let mut xs = Vec::with_capacity(n);
        let mut ys = Vec::with_capacity(n);
        for _ in 0..n {
            let common: f64 = 1.0 / rng.random::<f64>();
            let a: f64 = 1.0 / rng.random::<f64>();
            let b: f64 = 1.0 / rng.random::<f64>();
            let w = rng.random::<f64>();
            xs.push(w * common + a);
            ys.push(common + b);
        }
        LossPairSample::new(xs, ys).unwrap()
    }

    #[test]
    fn algorithm_matches_bruteforce_on_random_samples() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..200 {
            let s = random_sample(&mut rng, 200);
            for var in Variant::ALL {
                match (eta_hat(&s, 30, var), eta_hat_bruteforce(&s, 30, var)) {
                    (Ok(e), Ok(b)) => assert_eq!(e.raw, b),
                    (Err(_), Err(_)) => {}
                    (a, b) => panic!("disagree: {a:?} vs {b:?}"),
                }
            }
        }
    }

    #[test]
    fn inverse_consistency() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..100 {
            let s = random_sample(&mut rng, 150);
            let k = 25;
            let level = k as f64 / 150.0;
            for var in Variant::ALL {
                let Ok(e) = eta_hat(&s, k, var) else { continue };
                let est = TailCopulaEstimate::new(&s, k, var).unwrap();
                assert!(est.eval(e.raw, 1.0).unwrap() >= level);
                if var == Variant::Rank && e.raw > 1.0 / k as f64 {
                    let smaller = e.raw - 1.0 / k as f64;
                    assert!(est.eval(smaller, 1.0).unwrap() < level);
                }
            }
        }
    }

    #[test]
    fn r_hat_monotone_on_grid() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let s = random_sample(&mut rng, 300);
        for var in Variant::ALL {
            let est = TailCopulaEstimate::new(&s, 40, var).unwrap();
            let grid: Vec<f64> = (0..100).map(|i| i as f64 * 0.05).collect();
            for &y in &grid {
                let row: Vec<f64> = grid.iter().map(|&x| est.eval(x, y).unwrap()).collect();
                assert!(row.windows(2).all(|w| w[0] <= w[1]));
            }
            for &x in &grid {
                let col: Vec<f64> = grid.iter().map(|&y| est.eval(x, y).unwrap()).collect();
                assert!(col.windows(2).all(|w| w[0] <= w[1]));
            }
            assert!(est.eval(0.0, 0.0).unwrap() >= 0.0);
            assert!(est.eval(1e9, 1e9).unwrap() <= 300.0 / 40.0);
        }
    }

    proptest! {
        #[test]
        fn rank_invariance(seed in any::<u64>(), shift in -5.0f64..5.0) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let s = random_sample(&mut rng, 120);
            // strictly increasing transforms of each margin
            let t = s.map_x(|x| x.ln() * 3.0 + shift).unwrap().map_y(|y| y.powi(3)).unwrap();
            for var in Variant::ALL {
                for (x, y) in [(1.0, 1.0), (0.5, 2.0), (0.1, 0.3)] {
                    prop_assert_eq!(
                        r_hat(&s, 20, var, x, y).unwrap(),
                        r_hat(&t, 20, var, x, y).unwrap()
                    );
                }
                prop_assert_eq!(eta_hat(&s, 20, var), eta_hat(&t, 20, var));
            }
        }

        #[test]
        fn algorithm_equals_bruteforce_on_permutations(
            px in Just((0..60).collect::<Vec<u32>>()).prop_shuffle(),
            py in Just((0..60).collect::<Vec<u32>>()).prop_shuffle(),
            kf in 0.0f64..1.0,
        ) {
            let xs: Vec<f64> = px.iter().map(|&v| v as f64).collect();
            let ys: Vec<f64> = py.iter().map(|&v| v as f64).collect();
            let s = LossPairSample::new(xs, ys).unwrap();
            let k = 1 + (58.0 * kf) as usize;
            for var in Variant::ALL {
                match (eta_hat(&s, k, var), eta_hat_bruteforce(&s, k, var)) {
                    (Ok(e), Ok(b)) => prop_assert_eq!(e.raw, b),
                    (Err(_), Err(_)) => {}
                    (a, b) => prop_assert!(false, "disagree: {:?} vs {:?}", a, b),
                }
            }
        }
    }

    #[test]
    fn shuffled_rows_give_same_eta() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let s = random_sample(&mut rng, 100);
        let mut idx: Vec<usize> = (0..100).collect();
        idx.shuffle(&mut rng);
        let t = LossPairSample::new(
            idx.iter().map(|&i| s.xs()[i]).collect(),
            idx.iter().map(|&i| s.ys()[i]).collect(),
        )
        .unwrap();
        for var in Variant::ALL {
            assert_eq!(eta_hat(&s, 15, var), eta_hat(&t, 15, var));
        }
    }
}
