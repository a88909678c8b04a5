//! Intermediate-level CoVaR/CoES estimators and their extrapolations to an
//! extreme level `tau'`.

use serde::Serialize;

use crate::empirical::{empirical_var, hill_estimate};
use crate::error::{Error, Result};
use crate::sample::{LossPairSample, MarginIndex, TailConfig, Warning};
use crate::tail_copula::{eta_hat_from_margins, Variant};

/// Every estimator for one sample, `k` and `tau'`.
///
/// The extrapolated families are flattened into `covar1..covar3` and
/// `coes1..coes4` so that the record serializes to one row.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RiskEstimates {
    pub gamma1_hat: f64,
    /// `X_{n-k,n}`.
    pub var_x_hat: f64,
    pub eta_hat_1: f64,
    pub eta_hat_2: f64,
    pub covar_int: f64,
    pub coes_int: f64,
    pub covar1: f64,
    pub covar2: f64,
    pub covar3: f64,
    pub coes1: f64,
    pub coes2: f64,
    pub coes3: f64,
    pub coes4: f64,
    pub warnings: Vec<Warning>,
}

/// Column names of the seven extrapolated estimators, in table order.
pub const ESTIMATORS: [&str; 7] = [
    "covar1", "covar2", "covar3", "coes1", "coes2", "coes3", "coes4",
];

impl RiskEstimates {
    /// Extrapolated CoVaR, `variant` in `1..=3`.
    pub fn covar_ext(&self, variant: u8) -> Option<f64> {
        match variant {
            1 => Some(self.covar1),
            2 => Some(self.covar2),
            3 => Some(self.covar3),
            _ => None,
        }
    }

    /// Extrapolated CoES, `variant` in `1..=4`.
    pub fn coes_ext(&self, variant: u8) -> Option<f64> {
        match variant {
            1 => Some(self.coes1),
            2 => Some(self.coes2),
            3 => Some(self.coes3),
            4 => Some(self.coes4),
            _ => None,
        }
    }

    /// The seven extrapolated values in [`ESTIMATORS`] order.
    pub fn extrapolated(&self) -> [f64; 7] {
        [
            self.covar1,
            self.covar2,
            self.covar3,
            self.coes1,
            self.coes2,
            self.coes3,
            self.coes4,
        ]
    }
}

/// `Y_{n-k,n}` and the X values of the `k + 1` points with `Y_i >= Y_{n-k,n}`.
fn tail_subsample(sample: &LossPairSample, my: &MarginIndex, k: usize) -> Result<(f64, Vec<f64>)> {
    let n = sample.len();
    let var_y = my.order_stat(n - k);
    let xs: Vec<f64> = sample
        .xs()
        .iter()
        .zip(sample.ys())
        .filter(|(_, &y)| y >= var_y)
        .map(|(&x, _)| x)
        .collect();
    if xs.len() != k + 1 {
        return Err(Error::SubsampleSize {
            found: xs.len(),
            expected: k + 1,
        });
    }
    Ok((var_y, xs))
}

fn covar_from_subsample(mut xs: Vec<f64>, k: usize, m: usize) -> f64 {
    xs.sort_unstable_by(f64::total_cmp);
    // (k + 2 - m)-th smallest of k + 1 values
    xs[k + 1 - m]
}

fn coes_from_threshold(sample: &LossPairSample, k: usize, covar: f64, var_y: f64) -> f64 {
    let sum: f64 = sample
        .xs()
        .iter()
        .zip(sample.ys())
        .filter(|(&x, &y)| x >= covar && y >= var_y)
        .map(|(&x, _)| x)
        .sum();
    sample.len() as f64 / (k * k) as f64 * sum
}

/// `CoVaR_hat(1 - k/n)`: the `(k+2-m)`-th smallest X among the points whose Y
/// reaches `Y_{n-k,n}`.
pub fn intermediate_covar(sample: &LossPairSample, k: usize) -> Result<f64> {
    let (cfg, _) = TailConfig::validate(sample.len(), k, None)?;
    let my = MarginIndex::new(sample.ys())?;
    let (_, xs) = tail_subsample(sample, &my, k)?;
    Ok(covar_from_subsample(xs, k, cfg.m))
}

/// `sup { s : C_n(s) >= (k/n)^2 }` with
/// `C_n(s) = #{i : X_i >= s, Y_i >= Y_{n-k,n}} / n`, found by scanning the
/// candidate jump points from the top. Reference for [`intermediate_covar`].
pub fn intermediate_covar_bruteforce(sample: &LossPairSample, k: usize) -> Result<f64> {
    let n = sample.len();
    TailConfig::validate(n, k, None)?;
    let my = MarginIndex::new(sample.ys())?;
    let var_y = my.order_stat(n - k);
    let level = (k * k) as f64 / (n * n) as f64;
    let mut candidates: Vec<f64> = sample
        .xs()
        .iter()
        .zip(sample.ys())
        .filter(|(_, &y)| y >= var_y)
        .map(|(&x, _)| x)
        .collect();
    candidates.sort_unstable_by(|a, b| b.total_cmp(a));
    for &s in &candidates {
        let count = sample
            .xs()
            .iter()
            .zip(sample.ys())
            .filter(|(&x, &y)| x >= s && y >= var_y)
            .count();
        if count as f64 / n as f64 >= level {
            return Ok(s);
        }
    }
    Err(Error::InvalidInput(format!(
        "C_n never reaches (k/n)^2 = {level}"
    )))
}

/// `CoES_hat(1 - k/n) = (n/k^2) sum X_i 1{X_i >= CoVaR_hat, Y_i >= Y_{n-k,n}}`.
pub fn intermediate_coes(sample: &LossPairSample, k: usize) -> Result<f64> {
    let (cfg, _) = TailConfig::validate(sample.len(), k, None)?;
    let my = MarginIndex::new(sample.ys())?;
    let (var_y, xs) = tail_subsample(sample, &my, k)?;
    let covar = covar_from_subsample(xs, k, cfg.m);
    Ok(coes_from_threshold(sample, k, covar, var_y))
}

/// `d^(2 gamma)`, the factor shared by every extrapolation.
pub fn extrapolation_factor(d: f64, gamma: f64) -> f64 {
    d.powf(2.0 * gamma)
}

/// `d^(2 gamma) eta^(-gamma) X_{n-k,n}`.
pub fn covar_from_eta(d: f64, gamma: f64, eta: f64, var_x: f64) -> f64 {
    extrapolation_factor(d, gamma) * eta.powf(-gamma) * var_x
}

/// `(covar, covar / (1 - gamma))`, with `covar` moved by at most a few ulps so
/// that the pair also satisfies `coes * (1 - gamma) == covar` exactly.
pub fn coes_pair(covar: f64, gamma: f64) -> (f64, f64) {
    let scale = 1.0 - gamma;
    let mut up = covar;
    let mut down = covar;
    for _ in 0..16 {
        for c in [up, down] {
            let e = c / scale;
            if e * scale == c {
                return (c, e);
            }
        }
        up = up.next_up();
        down = down.next_down();
    }
    (covar, covar / scale)
}

fn check_gamma(gamma: f64) -> Result<()> {
    if !(gamma > 0.0 && gamma < 1.0) {
        return Err(Error::GammaOutOfRange {
            gamma,
            what: "extrapolation needs gamma1_hat in (0, 1)",
        });
    }
    Ok(())
}

struct Prepared {
    cfg: TailConfig,
    gamma: f64,
    var_x: f64,
    var_y: f64,
    mx: MarginIndex,
    my: MarginIndex,
    covar_int: f64,
    warnings: Vec<Warning>,
}

fn prepare(sample: &LossPairSample, k: usize, tau_prime: f64) -> Result<Prepared> {
    let (cfg, warnings) = TailConfig::validate(sample.len(), k, Some(tau_prime))?;
    let mx = MarginIndex::new(sample.xs())?;
    let my = MarginIndex::new(sample.ys())?;
    let gamma = hill_estimate(&mx, k)?;
    let var_x = empirical_var(&mx, k)?;
    let (var_y, xs) = tail_subsample(sample, &my, k)?;
    let covar_int = covar_from_subsample(xs, k, cfg.m);
    Ok(Prepared {
        cfg,
        gamma,
        var_x,
        var_y,
        mx,
        my,
        covar_int,
        warnings,
    })
}

impl Prepared {
    fn d(&self) -> f64 {
        self.cfg.d.expect("tau' supplied")
    }

    fn covar(&self, variant: u8) -> Result<f64> {
        check_gamma(self.gamma)?;
        match variant {
            1 | 2 => {
                let v = Variant::from_number(variant)?;
                let eta = eta_hat_from_margins(&self.mx, &self.my, self.cfg.k, v)?;
                Ok(covar_from_eta(self.d(), self.gamma, eta.value, self.var_x))
            }
            3 => Ok(extrapolation_factor(self.d(), self.gamma) * self.covar_int),
            other => Err(Error::InvalidInput(format!("CoVaR variant {other} not in 1..=3"))),
        }
    }

    fn coes4(&self, sample: &LossPairSample) -> f64 {
        let coes_int = coes_from_threshold(sample, self.cfg.k, self.covar_int, self.var_y);
        extrapolation_factor(self.d(), self.gamma) * coes_int
    }
}

/// Extrapolated CoVaR at `tau'`; `variant` 1 and 2 use the matching adjustment
/// factor, 3 scales the intermediate estimate.
pub fn extrapolate_covar(
    sample: &LossPairSample,
    k: usize,
    tau_prime: f64,
    variant: u8,
) -> Result<f64> {
    let p = prepare(sample, k, tau_prime)?;
    let covar = p.covar(variant)?;
    Ok(coes_pair(covar, p.gamma).0)
}

/// Extrapolated CoES at `tau'`: variants 1-3 divide the matching CoVaR by
/// `1 - gamma1_hat`, variant 4 scales the intermediate CoES.
pub fn extrapolate_coes(
    sample: &LossPairSample,
    k: usize,
    tau_prime: f64,
    variant: u8,
) -> Result<f64> {
    let p = prepare(sample, k, tau_prime)?;
    match variant {
        1..=3 => Ok(coes_pair(p.covar(variant)?, p.gamma).1),
        4 => Ok(p.coes4(sample)),
        other => Err(Error::InvalidInput(format!("CoES variant {other} not in 1..=4"))),
    }
}

/// All estimators from one pass over the ranks and order statistics.
pub fn estimate_all(sample: &LossPairSample, k: usize, tau_prime: f64) -> Result<RiskEstimates> {
    let p = prepare(sample, k, tau_prime)?;
    check_gamma(p.gamma)?;
    let mut warnings = p.warnings.clone();
    let mut etas = [0.0; 2];
    for (slot, v) in etas.iter_mut().zip([Variant::Empirical, Variant::Rank]) {
        let e = eta_hat_from_margins(&p.mx, &p.my, k, v)?;
        if e.clamped {
            warnings.push(Warning::EtaClamped {
                variant: v.number(),
                raw: e.raw,
            });
        }
        *slot = e.value;
    }
    if p.gamma >= 0.5 {
        warnings.push(Warning::GammaAboveHalf { gamma: p.gamma });
    }
    let d = p.d();
    let (covar1, coes1) = coes_pair(covar_from_eta(d, p.gamma, etas[0], p.var_x), p.gamma);
    let (covar2, coes2) = coes_pair(covar_from_eta(d, p.gamma, etas[1], p.var_x), p.gamma);
    let (covar3, coes3) = coes_pair(extrapolation_factor(d, p.gamma) * p.covar_int, p.gamma);
    let coes_int = coes_from_threshold(sample, k, p.covar_int, p.var_y);
    Ok(RiskEstimates {
        gamma1_hat: p.gamma,
        var_x_hat: p.var_x,
        eta_hat_1: etas[0],
        eta_hat_2: etas[1],
        covar_int: p.covar_int,
        coes_int,
        covar1,
        covar2,
        covar3,
        coes1,
        coes2,
        coes3,
        coes4: extrapolation_factor(d, p.gamma) * coes_int,
        warnings,
    })
}
