//! Student-t distribution functions on top of the regularized incomplete beta.

use statrs::function::beta::beta_reg;
use statrs::function::gamma::ln_gamma;

use crate::error::{Error, Result};

fn check_nu(nu: f64) -> Result<()> {
    if !(nu > 0.0 && nu.is_finite()) {
        return Err(Error::InvalidInput(format!(
            "degrees of freedom must be positive, got {nu}"
        )));
    }
    Ok(())
}

/// `P(T >= |x|)` for `T ~ t_nu`, computed without cancellation.
fn upper_half_tail(x: f64, nu: f64) -> f64 {
    let x2 = x * x;
    if x2 == 0.0 {
        return 0.5;
    }
    // 0.5 * I_{nu / (nu + x^2)}(nu/2, 1/2)
    0.5 * beta_reg(0.5 * nu, 0.5, nu / (nu + x2))
}

/// CDF of the univariate Student-t distribution with `nu` degrees of freedom.
pub fn student_t_cdf(x: f64, nu: f64) -> Result<f64> {
    check_nu(nu)?;
    if x.is_nan() {
        return Err(Error::InvalidInput("NaN argument".into()));
    }
    let t = upper_half_tail(x, nu);
    Ok(if x <= 0.0 { t } else { 1.0 - t })
}

/// Survival function `1 - F(x; nu)`, accurate far in the upper tail.
pub fn student_t_sf(x: f64, nu: f64) -> Result<f64> {
    student_t_cdf(-x, nu)
}

pub fn student_t_pdf(x: f64, nu: f64) -> Result<f64> {
    check_nu(nu)?;
    let log_norm = ln_gamma(0.5 * (nu + 1.0))
        - ln_gamma(0.5 * nu)
        - 0.5 * (nu * std::f64::consts::PI).ln();
    Ok((log_norm - 0.5 * (nu + 1.0) * (x * x / nu).ln_1p()).exp())
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn symmetric_center() {
        for nu in [0.5, 1.0, 1.5, 2.5, 30.0] {
            assert_eq!(student_t_cdf(0.0, nu).unwrap(), 0.5);
        }
    }

    #[test]
    fn closed_forms() {
        assert!((student_t_cdf(1.0, 1.0).unwrap() - 0.75).abs() < 1e-14);
        // nu = 2: F(x) = (1 + x / sqrt(2 + x^2)) / 2
        let x: f64 = 2.0;
        let exact = 0.5 * (1.0 + x / (2.0 + x * x).sqrt());
        assert!((student_t_cdf(x, 2.0).unwrap() - exact).abs() < 1e-14);
        assert!((exact - 0.90825).abs() < 1e-5);
    }

    #[test]
    fn matches_cauchy_arctan() {
        for i in 0..1000 {
            let x = -50.0 + 100.0 * (i as f64 + 0.5) / 1000.0;
            let exact = 0.5 + x.atan() / PI;
            let got = student_t_cdf(x, 1.0).unwrap();
            assert!((got - exact).abs() < 1e-12, "x = {x}: {got} vs {exact}");
        }
    }

    #[test]
    fn far_tail_relative_accuracy() {
        // Cauchy: P(T > x) = atan(1/x) / pi
        for x in [1e2f64, 1e4, 1e7] {
            let exact = (1.0 / x).atan() / PI;
            let got = student_t_sf(x, 1.0).unwrap();
            assert!((got / exact - 1.0).abs() < 1e-10, "x = {x}");
        }
    }

    #[test]
    fn symmetry_and_monotone() {
        let nu = 2.5;
        let mut prev = 0.0;
        for i in -200..=200 {
            let x = i as f64 * 0.1;
            let f = student_t_cdf(x, nu).unwrap();
            let g = student_t_cdf(-x, nu).unwrap();
            assert!((f + g - 1.0).abs() < 1e-14);
            assert!(f > prev);
            assert!(f > 0.0 && f < 1.0);
            prev = f;
        }
    }

    #[test]
    fn pdf_integrates_to_cdf() {
        let nu = 1.5;
        let q = crate::numerics::integrate(
            |t| student_t_pdf(t, nu).unwrap(),
            -1.0,
            2.0,
            crate::numerics::QuadOptions::rel(1e-13),
        )
        .unwrap();
        let diff = student_t_cdf(2.0, nu).unwrap() - student_t_cdf(-1.0, nu).unwrap();
        assert!((q.value - diff).abs() < 1e-12);
        assert!((student_t_pdf(0.0, 1.0).unwrap() - 1.0 / PI).abs() < 1e-15);
    }

    #[test]
    fn rejects_bad_nu() {
        assert!(student_t_cdf(1.0, 0.0).is_err());
        assert!(student_t_cdf(1.0, -2.0).is_err());
        assert!(student_t_pdf(1.0, f64::NAN).is_err());
    }
}
