//! The four transformed bivariate simulation models: exact samplers, analytic
//! tail copulas and marginal quantiles.
//!
//! Every model has the form `(X, Y) = (|Z1|^p, |Z2|)` for a heavy-tailed pair
//! `(Z1, Z2)`, with `p` chosen so that `X` has extreme value index `1/3`.

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp1, Gamma, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::bisect;
use crate::sample::LossPairSample;
use crate::special::{student_t_cdf, student_t_sf};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Family {
    /// Logistic (Gumbel) dependence with unit Fréchet margins.
    Logistic,
    /// Spherical bivariate Cauchy.
    Cauchy,
    /// Bivariate Pareto of type II.
    Pareto2,
    /// Bivariate Student-t.
    StudentT,
}

impl Family {
    pub const ALL: [Family; 4] = [
        Family::Logistic,
        Family::Cauchy,
        Family::Pareto2,
        Family::StudentT,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Family::Logistic => "logistic",
            Family::Cauchy => "cauchy",
            Family::Pareto2 => "pareto2",
            Family::StudentT => "studentt",
        }
    }

    /// Row label used in MSRE tables.
    pub fn label(self) -> &'static str {
        match self {
            Family::Logistic => "Bi-Logistic",
            Family::Cauchy => "Bi-Cauchy",
            Family::Pareto2 => "Bi-Pareto",
            Family::StudentT => "Bi-Student-t",
        }
    }
}

impl fmt::Display for Family {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Family {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().replace(['-', '_'], "").as_str() {
            "logistic" | "bilogistic" => Ok(Family::Logistic),
            "cauchy" | "bicauchy" => Ok(Family::Cauchy),
            "pareto2" | "pareto" | "bipareto" => Ok(Family::Pareto2),
            "studentt" | "t" | "bistudentt" => Ok(Family::StudentT),
            other => Err(Error::Parse(format!("unknown model family '{other}'"))),
        }
    }
}

/// A fully parameterised simulation model. Parameters a family does not use are zero.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ModelSpec {
    pub family: Family,
    /// Logistic dependence parameter or Pareto shape.
    pub theta: f64,
    pub nu: f64,
    pub rho: f64,
    /// Power applied to `|Z1|`.
    pub x_exponent: f64,
    /// Extreme value index of `X`.
    pub gamma1: f64,
}

/// Config record `{family, theta?, nu?, rho?}`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelConfig {
    pub family: Family,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub theta: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub nu: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rho: Option<f64>,
}

impl ModelSpec {
    pub fn logistic(theta: f64) -> Result<Self> {
        if !(theta > 0.0 && theta <= 1.0) {
            return Err(Error::InvalidConfig(format!(
                "logistic theta must lie in (0, 1], got {theta}"
            )));
        }
        Ok(Self {
            family: Family::Logistic,
            theta,
            nu: 0.0,
            rho: 0.0,
            x_exponent: 1.0 / 3.0,
            gamma1: 1.0 / 3.0,
        })
    }

    pub fn cauchy() -> Self {
        Self {
            family: Family::Cauchy,
            theta: 0.0,
            nu: 1.0,
            rho: 0.0,
            x_exponent: 1.0 / 3.0,
            gamma1: 1.0 / 3.0,
        }
    }

    /// Pareto II with shape `theta`; the first margin is raised to `theta / 3`
    /// so that `gamma1 = 1/3` for any shape.
    pub fn pareto2(theta: f64) -> Result<Self> {
        if !(theta > 0.0 && theta.is_finite()) {
            return Err(Error::InvalidConfig(format!(
                "pareto theta must be positive, got {theta}"
            )));
        }
        Ok(Self {
            family: Family::Pareto2,
            theta,
            nu: 0.0,
            rho: 0.0,
            x_exponent: theta / 3.0,
            gamma1: 1.0 / 3.0,
        })
    }

    /// Student-t with `nu` degrees of freedom and correlation `rho`; the first
    /// margin is raised to `nu / 3`.
    pub fn student_t(nu: f64, rho: f64) -> Result<Self> {
        if !(nu > 0.0 && nu.is_finite()) {
            return Err(Error::InvalidConfig(format!("nu must be positive, got {nu}")));
        }
        if !(rho > 0.0 && rho < 1.0) {
            return Err(Error::InvalidConfig(format!("rho must lie in (0, 1), got {rho}")));
        }
        Ok(Self {
            family: Family::StudentT,
            theta: 0.0,
            nu,
            rho,
            x_exponent: nu / 3.0,
            gamma1: 1.0 / 3.0,
        })
    }

    /// The simulation-study parameterisation of each family.
    pub fn standard(family: Family) -> Self {
        match family {
            Family::Logistic => Self::logistic(0.6).expect("valid"),
            Family::Cauchy => Self::cauchy(),
            Family::Pareto2 => Self::pareto2(0.5).expect("valid"),
            Family::StudentT => Self::student_t(1.5, 0.3).expect("valid"),
        }
    }

    pub fn from_config(cfg: &ModelConfig) -> Result<Self> {
        let reject = |name: &str, v: Option<f64>| -> Result<()> {
            match v {
                Some(_) => Err(Error::InvalidConfig(format!(
                    "parameter '{name}' does not apply to the {} model",
                    cfg.family
                ))),
                None => Ok(()),
            }
        };
        match cfg.family {
            Family::Logistic => {
                reject("nu", cfg.nu)?;
                reject("rho", cfg.rho)?;
                Self::logistic(cfg.theta.unwrap_or(0.6))
            }
            Family::Cauchy => {
                reject("theta", cfg.theta)?;
                reject("nu", cfg.nu)?;
                reject("rho", cfg.rho)?;
                Ok(Self::cauchy())
            }
            Family::Pareto2 => {
                reject("nu", cfg.nu)?;
                reject("rho", cfg.rho)?;
                Self::pareto2(cfg.theta.unwrap_or(0.5))
            }
            Family::StudentT => {
                reject("theta", cfg.theta)?;
                Self::student_t(cfg.nu.unwrap_or(1.5), cfg.rho.unwrap_or(0.3))
            }
        }
    }

    pub fn config(&self) -> ModelConfig {
        let (theta, nu, rho) = match self.family {
            Family::Logistic | Family::Pareto2 => (Some(self.theta), None, None),
            Family::Cauchy => (None, None, None),
            Family::StudentT => (None, Some(self.nu), Some(self.rho)),
        };
        ModelConfig {
            family: self.family,
            theta,
            nu,
            rho,
        }
    }

    /// One draw of the latent pair `(Z1, Z2)`.
    pub fn draw_latent<R: Rng + ?Sized>(&self, rng: &mut R) -> (f64, f64) {
        match self.family {
            Family::Logistic => {
                let s = positive_stable(self.theta, rng);
                let e1: f64 = Exp1.sample(rng);
                let e2: f64 = Exp1.sample(rng);
                ((s / e1).powf(self.theta), (s / e2).powf(self.theta))
            }
            Family::Cauchy => {
                let n0: f64 = StandardNormal.sample(rng);
                let n1: f64 = StandardNormal.sample(rng);
                let n2: f64 = StandardNormal.sample(rng);
                let d = n0.abs();
                (n1 / d, n2 / d)
            }
            Family::Pareto2 => {
                let g = Gamma::new(self.theta, 1.0)
                    .expect("validated shape")
                    .sample(rng);
                let e1: f64 = Exp1.sample(rng);
                let e2: f64 = Exp1.sample(rng);
                (e1 / g, e2 / g)
            }
            Family::StudentT => {
                let n1: f64 = StandardNormal.sample(rng);
                let n2: f64 = StandardNormal.sample(rng);
                let w = Gamma::new(0.5 * self.nu, 2.0)
                    .expect("validated nu")
                    .sample(rng);
                let scale = (w / self.nu).sqrt();
                let z1 = n1;
                let z2 = self.rho * n1 + (1.0 - self.rho * self.rho).sqrt() * n2;
                (z1 / scale, z2 / scale)
            }
        }
    }

    /// One draw of the loss pair `(X, Y)`.
    pub fn draw<R: Rng + ?Sized>(&self, rng: &mut R) -> (f64, f64) {
        let (z1, z2) = self.draw_latent(rng);
        (z1.abs().powf(self.x_exponent), z2.abs())
    }

    /// Survival of `|Z1|` (equivalently of `X` at `s^(1/x_exponent)`).
    pub fn latent_x_survival(&self, z: f64) -> Result<f64> {
        if z <= 0.0 {
            return Ok(1.0);
        }
        Ok(match self.family {
            Family::Logistic => -(-1.0 / z).exp_m1(),
            Family::Cauchy => 2.0 * (1.0 / z).atan() / PI,
            Family::Pareto2 => (1.0 + z).powf(-self.theta),
            Family::StudentT => 2.0 * student_t_sf(z, self.nu)?,
        })
    }

    /// `P(X >= s)`.
    pub fn x_survival(&self, s: f64) -> Result<f64> {
        if s <= 0.0 {
            return Ok(1.0);
        }
        self.latent_x_survival(s.powf(1.0 / self.x_exponent))
    }

    /// `P(Y >= t)`; the same law as `|Z1|` for every family.
    pub fn y_survival(&self, t: f64) -> Result<f64> {
        self.latent_x_survival(t)
    }
}

/// Positive stable variable with Laplace transform `exp(-s^alpha)`, via Kanter's
/// representation.
pub fn positive_stable<R: Rng + ?Sized>(alpha: f64, rng: &mut R) -> f64 {
    if alpha >= 1.0 {
        return 1.0;
    }
    let u: f64 = PI * rng.random::<f64>();
    let e: f64 = Exp1.sample(rng);
    let a = (alpha * u).sin() / u.sin().powf(1.0 / alpha);
    let b = ((1.0 - alpha) * u).sin() / e;
    a * b.powf((1.0 - alpha) / alpha)
}

/// `n` i.i.d. loss pairs from `spec`.
pub fn sample_model(spec: &ModelSpec, n: usize, rng: &mut ChaCha8Rng) -> Result<LossPairSample> {
    let mut xs = Vec::with_capacity(n);
    let mut ys = Vec::with_capacity(n);
    for _ in 0..n {
        let (x, y) = spec.draw(rng);
        xs.push(x);
        ys.push(y);
    }
    LossPairSample::new(xs, ys)
}

/// Upper tail copula of a bivariate t pair `(Z1, Z2)` with correlation `rho`.
pub fn t_upper_tail_copula(nu: f64, rho: f64, x: f64, y: f64) -> Result<f64> {
    if x == 0.0 || y == 0.0 {
        return Ok(0.0);
    }
    let c = ((nu + 1.0) / (1.0 - rho * rho)).sqrt();
    Ok(y * student_t_cdf(c * (rho - (y / x).powf(1.0 / nu)), nu + 1.0)?
        + x * student_t_cdf(c * (rho - (x / y).powf(1.0 / nu)), nu + 1.0)?)
}

/// Analytic tail copula `R(x, y)` of the loss pair `(X, Y)`.
pub fn true_tail_copula(spec: &ModelSpec, x: f64, y: f64) -> Result<f64> {
    if !(x >= 0.0 && y >= 0.0) {
        return Err(Error::InvalidInput(format!(
            "tail copula arguments must be non-negative (got {x}, {y})"
        )));
    }
    if x == 0.0 || y == 0.0 {
        return Ok(0.0);
    }
    Ok(match spec.family {
        Family::Logistic => {
            let t = spec.theta;
            x + y - (x.powf(1.0 / t) + y.powf(1.0 / t)).powf(t)
        }
        Family::Cauchy => x + y - x.hypot(y),
        Family::Pareto2 => {
            let t = spec.theta;
            (x.powf(-1.0 / t) + y.powf(-1.0 / t)).powf(-t)
        }
        // |Z1|, |Z2| exceed together through both the concordant quadrants
        // (correlation rho) and the discordant ones (correlation -rho).
        Family::StudentT => {
            t_upper_tail_copula(spec.nu, spec.rho, x, y)?
                + t_upper_tail_copula(spec.nu, -spec.rho, x, y)?
        }
    })
}

/// Quantile of `|Z|` at level `tau`, where `|Z|` has the common margin of the family.
fn latent_quantile(spec: &ModelSpec, tau: f64) -> Result<f64> {
    Ok(match spec.family {
        Family::Logistic => -1.0 / tau.ln(),
        Family::Cauchy => (0.5 * PI * tau).tan(),
        Family::Pareto2 => (1.0 - tau).powf(-1.0 / spec.theta) - 1.0,
        Family::StudentT => {
            // P(|Z| >= t) = 2 sf(t) = 1 - tau
            let target = 0.5 * (1.0 - tau);
            let mut hi = 1.0;
            let mut guard = 0;
            while student_t_sf(hi, spec.nu)? > target {
                hi *= 2.0;
                guard += 1;
                if guard > 2000 {
                    return Err(Error::Numerical("quantile bracket overflow".into()));
                }
            }
            bisect(
                |t| Ok(student_t_sf(t, spec.nu)? - target),
                0.0,
                hi,
                1e-10,
                200,
            )?
        }
    })
}

/// `(VaR_X(tau), VaR_Y(tau))`.
pub fn marginal_quantiles(spec: &ModelSpec, tau: f64) -> Result<(f64, f64)> {
    if !(tau > 0.0 && tau < 1.0) {
        return Err(Error::InvalidInput(format!("tau = {tau} outside (0, 1)")));
    }
    let q = latent_quantile(spec, tau)?;
    Ok((q.powf(spec.x_exponent), q))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::empirical::hill_estimate;
    use crate::sample::MarginIndex;
    use crate::tail_copula::{r_hat, Variant};
    use rand::SeedableRng;

    fn rng(seed: u64) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(seed)
    }

    #[test]
    fn standard_parameters() {
        let l = ModelSpec::standard(Family::Logistic);
        assert_eq!((l.theta, l.x_exponent), (0.6, 1.0 / 3.0));
        let p = ModelSpec::standard(Family::Pareto2);
        assert_eq!(p.theta, 0.5);
        assert!((p.x_exponent - 1.0 / 6.0).abs() < 1e-16);
        let t = ModelSpec::standard(Family::StudentT);
        assert_eq!((t.nu, t.rho, t.x_exponent), (1.5, 0.3, 0.5));
        assert_eq!(ModelSpec::standard(Family::Cauchy).x_exponent, 1.0 / 3.0);
        for f in Family::ALL {
            assert_eq!(ModelSpec::standard(f).gamma1, 1.0 / 3.0);
        }
    }

    #[test]
    fn config_parsing() {
        let spec: ModelConfig = serde_json::from_str(r#"{"family":"logistic","theta":0.6}"#).unwrap();
        assert_eq!(ModelSpec::from_config(&spec).unwrap(), ModelSpec::standard(Family::Logistic));
        let spec: ModelConfig = serde_json::from_str(r#"{"family":"studentt"}"#).unwrap();
        assert_eq!(ModelSpec::from_config(&spec).unwrap(), ModelSpec::standard(Family::StudentT));
        assert!(serde_json::from_str::<ModelConfig>(r#"{"family":"cauchy","alpha":2}"#).is_err());
        let bad: ModelConfig = serde_json::from_str(r#"{"family":"cauchy","theta":2}"#).unwrap();
        assert!(ModelSpec::from_config(&bad).is_err());
        let bad: ModelConfig = serde_json::from_str(r#"{"family":"logistic","theta":1.5}"#).unwrap();
        assert!(ModelSpec::from_config(&bad).is_err());
        let bad: ModelConfig = serde_json::from_str(r#"{"family":"studentt","rho":1.0}"#).unwrap();
        assert!(ModelSpec::from_config(&bad).is_err());
        for f in Family::ALL {
            let s = ModelSpec::standard(f);
            assert_eq!(ModelSpec::from_config(&s.config()).unwrap(), s);
            assert_eq!(f.name().parse::<Family>().unwrap(), f);
        }
    }

    #[test]
    fn single_draws_are_positive() {
        let mut r = rng(1);
        for f in Family::ALL {
            let (x, y) = ModelSpec::standard(f).draw(&mut r);
            assert!(x > 0.0 && y > 0.0);
        }
        assert!(sample_model(&ModelSpec::cauchy(), 1, &mut r).is_err());
    }

    #[test]
    fn tail_copula_closed_forms() {
        let c = true_tail_copula(&ModelSpec::cauchy(), 1.0, 1.0).unwrap();
        assert!((c - (2.0 - 2f64.sqrt())).abs() < 1e-15);
        assert!((c - 0.58579).abs() < 1e-5);
        let p = true_tail_copula(&ModelSpec::standard(Family::Pareto2), 1.0, 1.0).unwrap();
        assert!((p - 0.5f64.sqrt()).abs() < 1e-15);
        let l = true_tail_copula(&ModelSpec::standard(Family::Logistic), 1.0, 1.0).unwrap();
        assert!((l - (2.0 - 2f64.powf(0.6))).abs() < 1e-15);
        assert!((l - 0.484283).abs() < 1e-6);
        assert!(true_tail_copula(&ModelSpec::cauchy(), -1.0, 1.0).is_err());
        assert_eq!(true_tail_copula(&ModelSpec::cauchy(), 0.0, 0.0).unwrap(), 0.0);
    }

    #[test]
    fn t_copula_reduces_to_cauchy_at_nu_one() {
        // spherical case: R_rho + R_-rho at rho = 0 is the Cauchy copula
        for (x, y) in [(1.0, 1.0), (0.3, 2.0), (5.0, 0.1)] {
            let t = 2.0 * t_upper_tail_copula(1.0, 0.0, x, y).unwrap();
            let c = true_tail_copula(&ModelSpec::cauchy(), x, y).unwrap();
            assert!((t - c).abs() < 1e-13);
        }
    }

    #[test]
    fn tail_copula_homogeneous() {
        let grid: Vec<f64> = (1..=20).map(|i| i as f64 * 0.25).collect();
        for f in Family::ALL {
            let spec = ModelSpec::standard(f);
            for &x in &grid {
                for &y in &grid {
                    let base = true_tail_copula(&spec, x, y).unwrap();
                    for t in [0.01, 0.5, 3.0, 100.0] {
                        let scaled = true_tail_copula(&spec, t * x, t * y).unwrap();
                        assert!((scaled - t * base).abs() <= 1e-10 * (t * base).max(1e-300));
                    }
                }
            }
        }
    }

    #[test]
    fn quantile_examples() {
        let (_, y) = marginal_quantiles(&ModelSpec::standard(Family::Logistic), (-1f64).exp()).unwrap();
        assert!((y - 1.0).abs() < 1e-14);
        let (_, y) = marginal_quantiles(&ModelSpec::cauchy(), 0.5).unwrap();
        assert!((y - 1.0).abs() < 1e-14);
        let (x, y) = marginal_quantiles(&ModelSpec::standard(Family::Pareto2), 0.99).unwrap();
        assert!((y - 9999.0).abs() < 1e-8);
        assert!((x - 9999f64.powf(1.0 / 6.0)).abs() < 1e-10);
        assert!(marginal_quantiles(&ModelSpec::cauchy(), 1.0).is_err());
    }

    #[test]
    fn quantiles_invert_survival() {
        for f in Family::ALL {
            let spec = ModelSpec::standard(f);
            for tau in [0.1, 0.5, 0.9, 0.99, 0.999, 0.9999] {
                let (vx, vy) = marginal_quantiles(&spec, tau).unwrap();
                let sx = spec.x_survival(vx).unwrap();
                let sy = spec.y_survival(vy).unwrap();
                assert!((sx / (1.0 - tau) - 1.0).abs() < 1e-8, "{f} {tau}: {sx}");
                assert!((sy / (1.0 - tau) - 1.0).abs() < 1e-8, "{f} {tau}: {sy}");
            }
        }
    }

    #[test]
    fn stable_laplace_transform() {
        // E exp(-s S) = exp(-s^alpha)
        let alpha = 0.6;
        let mut r = rng(9);
        let draws: Vec<f64> = (0..200_000).map(|_| positive_stable(alpha, &mut r)).collect();
        for s in [0.5, 1.0, 2.0] {
            let mc = draws.iter().map(|&v| (-s * v).exp()).sum::<f64>() / draws.len() as f64;
            let exact = (-s.powf(alpha)).exp();
            assert!((mc - exact).abs() < 4e-3, "s = {s}: {mc} vs {exact}");
        }
    }

    #[test]
    fn empirical_margins() {
        let n = 1_000_000;
        let mut r = rng(2024);
        let p = sample_model(&ModelSpec::standard(Family::Pareto2), n, &mut r).unwrap();
        let frac = p.ys().iter().filter(|&&y| y > 3.0).count() as f64 / n as f64;
        assert!((frac - 0.5).abs() < 0.002, "{frac}");

        let l = sample_model(&ModelSpec::standard(Family::Logistic), n, &mut r).unwrap();
        let frac = l.ys().iter().filter(|&&y| y <= 1.0).count() as f64 / n as f64;
        assert!((frac - (-1f64).exp()).abs() < 0.002, "{frac}");
    }

    #[test]
    fn sampler_matches_tail_copula_and_hill() {
        let n = 100_000;
        let k = 1000;
        for (i, f) in Family::ALL.into_iter().enumerate() {
            let spec = ModelSpec::standard(f);
            let s = sample_model(&spec, n, &mut rng(100 + i as u64)).unwrap();
            let g = hill_estimate(&MarginIndex::new(s.xs()).unwrap(), k).unwrap();
            assert!((g - 1.0 / 3.0).abs() < 0.05, "{f}: gamma {g}");
            let est = r_hat(&s, k, Variant::Rank, 1.0, 1.0).unwrap();
            let truth = true_tail_copula(&spec, 1.0, 1.0).unwrap();
            assert!((est - truth).abs() < 0.05, "{f}: R(1,1) {est} vs {truth}");
        }
    }
}
