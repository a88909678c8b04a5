//! Population CoVaR and CoES of the simulation models, used as ground truth.

use std::collections::HashMap;
use std::f64::consts::PI;
use std::sync::{OnceLock, RwLock};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::models::{marginal_quantiles, true_tail_copula, Family, ModelSpec};
use crate::numerics::{bisect, integrate_tail, QuadOptions};
use crate::special::{student_t_pdf, student_t_sf};

const ROOT_REL_TOL: f64 = 1e-9;
const INNER: QuadOptions = QuadOptions {
    abs_tol: 0.0,
    rel_tol: 1e-11,
    max_intervals: 4000,
};
const OUTER: QuadOptions = QuadOptions {
    abs_tol: 0.0,
    rel_tol: 1e-9,
    max_intervals: 4000,
};

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct OracleResult {
    pub tau: f64,
    pub var_x: f64,
    pub var_y: f64,
    pub covar: f64,
    pub coes: f64,
    /// Absolute accuracy of `coes`: root bracket width plus quadrature error.
    pub abs_tol: f64,
}

impl OracleResult {
    pub const TSV_HEADER: &'static str = "family\ttau\tvar_y\tcovar\tcoes\ttol";

    pub fn tsv_row(&self, family: Family) -> String {
        format!(
            "{}\t{}\t{:.10e}\t{:.10e}\t{:.10e}\t{:.3e}",
            family, self.tau, self.var_y, self.covar, self.coes, self.abs_tol
        )
    }

    /// `eta_tau = P(X >= CoVaR) / (1 - tau)`.
    pub fn eta(&self, spec: &ModelSpec) -> Result<f64> {
        Ok(spec.x_survival(self.covar)? / (1.0 - self.tau))
    }
}

fn check_args(s: f64, t: f64) -> Result<()> {
    if !(s >= 0.0 && t >= 0.0) {
        return Err(Error::InvalidInput(format!(
            "survival arguments must be non-negative (got {s}, {t})"
        )));
    }
    Ok(())
}

/// `P(Z1 >= a, Z2 >= b)` for the spherical Cauchy pair, `a, b > 0`, in closed form.
fn cauchy_quadrant(a: f64, b: f64) -> f64 {
    let r = (1.0 + a * a + b * b).sqrt();
    let den = (r + a) * (r + a * b * b);
    // atan(1/a) - atan(q) with q = b (1 + b^2) / den, folded into one atan
    let q = b * (1.0 + b * b) / den;
    let one_minus_aq = (den - a * b * (1.0 + b * b)) / den;
    (one_minus_aq / (a + q)).atan() / (2.0 * PI)
}

/// `P(Z1 >= a, Z2 >= b)` for a standard bivariate t with correlation `rho`,
/// integrating the conditional t law of `Z2` given `Z1`.
fn t_quadrant(nu: f64, rho: f64, a: f64, b: f64) -> Result<f64> {
    let scale = (1.0 - rho * rho) / (nu + 1.0);
    let mut err = None;
    let q = integrate_tail(
        |z| {
            let sd = ((nu + z * z) * scale).sqrt();
            match (student_t_pdf(z, nu), student_t_sf((b - rho * z) / sd, nu + 1.0)) {
                (Ok(f), Ok(g)) => f * g,
                (Err(e), _) | (_, Err(e)) => {
                    err = Some(e);
                    0.0
                }
            }
        },
        a,
        INNER,
    )?;
    match err {
        Some(e) => Err(e),
        None => Ok(q.value),
    }
}

/// `P(X >= s, Y >= t)`.
pub fn joint_survival(spec: &ModelSpec, s: f64, t: f64) -> Result<f64> {
    check_args(s, t)?;
    if s == 0.0 {
        return spec.y_survival(t);
    }
    if t == 0.0 {
        return spec.x_survival(s);
    }
    let a = s.powf(1.0 / spec.x_exponent);
    if a.is_infinite() || t.is_infinite() {
        return Ok(0.0);
    }
    match spec.family {
        Family::Logistic => {
            let th = spec.theta;
            let c = ((1.0 / a).powf(1.0 / th) + (1.0 / t).powf(1.0 / th)).powf(th);
            Ok(-(-1.0 / a).exp_m1() - (-1.0 / t).exp_m1() + (-c).exp_m1())
        }
        Family::Pareto2 => Ok((1.0 + a + t).powf(-spec.theta)),
        // the spherical density is even in each coordinate
        Family::Cauchy => Ok(4.0 * cauchy_quadrant(a, t)),
        // (Z1, -Z2) is a t pair with correlation -rho; central symmetry doubles both
        Family::StudentT => Ok(2.0
            * (t_quadrant(spec.nu, spec.rho, a, t)? + t_quadrant(spec.nu, -spec.rho, a, t)?)),
    }
}

/// Joint density of the latent pair `(Z1, Z2)`.
pub fn latent_density(spec: &ModelSpec, z1: f64, z2: f64) -> f64 {
    match spec.family {
        Family::Logistic => {
            if z1 <= 0.0 || z2 <= 0.0 {
                return 0.0;
            }
            let th = spec.theta;
            let p1 = z1.powf(-1.0 / th);
            let p2 = z2.powf(-1.0 / th);
            let sum = p1 + p2;
            let v = sum.powf(th);
            (-v).exp() * (p1 / z1) * (p2 / z2) * sum.powf(th - 2.0) * (v + (1.0 - th) / th)
        }
        Family::Cauchy => (1.0 + z1 * z1 + z2 * z2).powf(-1.5) / (2.0 * PI),
        Family::Pareto2 => {
            if z1 < 0.0 || z2 < 0.0 {
                return 0.0;
            }
            let th = spec.theta;
            th * (th + 1.0) * (1.0 + z1 + z2).powf(-th - 2.0)
        }
        Family::StudentT => t_density(spec.nu, spec.rho, z1, z2),
    }
}

fn t_density(nu: f64, rho: f64, z1: f64, z2: f64) -> f64 {
    let det = 1.0 - rho * rho;
    let quad = (z1 * z1 - 2.0 * rho * z1 * z2 + z2 * z2) / (nu * det);
    (1.0 + quad).powf(-0.5 * (nu + 2.0)) / (2.0 * PI * det.sqrt())
}

fn quadrant_2d<F: Fn(f64, f64) -> f64>(density: F, a: f64, b: f64) -> Result<f64> {
    let mut err = None;
    let q = integrate_tail(
        |z1| match integrate_tail(|z2| density(z1, z2), b, INNER) {
            Ok(inner) => inner.value,
            Err(e) => {
                err = Some(e);
                0.0
            }
        },
        a,
        OUTER,
    )?;
    match err {
        Some(e) => Err(e),
        None => Ok(q.value),
    }
}

/// `P(X >= s, Y >= t)` by nested quadrature of the latent density, with the
/// same symmetry reductions as [`joint_survival`]. Slow; used to cross-check the
/// closed forms and the one-dimensional Student-t reduction.
pub fn joint_survival_quadrature(spec: &ModelSpec, s: f64, t: f64) -> Result<f64> {
    check_args(s, t)?;
    if s == 0.0 || t == 0.0 {
        return joint_survival(spec, s, t);
    }
    let a = s.powf(1.0 / spec.x_exponent);
    match spec.family {
        Family::Logistic | Family::Pareto2 => quadrant_2d(|u, v| latent_density(spec, u, v), a, t),
        Family::Cauchy => Ok(4.0 * quadrant_2d(|u, v| latent_density(spec, u, v), a, t)?),
        Family::StudentT => {
            let (nu, rho) = (spec.nu, spec.rho);
            Ok(2.0
                * (quadrant_2d(|u, v| t_density(nu, rho, u, v), a, t)?
                    + quadrant_2d(|u, v| t_density(nu, -rho, u, v), a, t)?))
        }
    }
}

/// Population `CoVaR(tau)`: the root `c` of `P(X >= c, Y >= VaR_Y(tau)) = (1 - tau)^2`.
pub fn true_covar(spec: &ModelSpec, tau: f64) -> Result<f64> {
    let (var_x, var_y) = marginal_quantiles(spec, tau)?;
    covar_root(spec, tau, var_x, var_y).map(|(c, _)| c)
}

/// Root and final bracket width.
fn covar_root(spec: &ModelSpec, tau: f64, var_x: f64, var_y: f64) -> Result<(f64, f64)> {
    let target = (1.0 - tau) * (1.0 - tau);
    let excess = |c: f64| -> Result<f64> { Ok(joint_survival(spec, c, var_y)? - target) };
    let mut lo = var_x;
    if excess(lo)? < 0.0 {
        lo = 0.0;
    }
    let mut hi = if var_x > 0.0 { 2.0 * var_x } else { 1.0 };
    let mut doublings = 0;
    while excess(hi)? >= 0.0 {
        lo = hi;
        hi *= 2.0;
        doublings += 1;
        if doublings > 1100 {
            return Err(Error::Numerical(format!(
                "CoVaR bracket did not close at tau = {tau}"
            )));
        }
    }
    let c = bisect(excess, lo, hi, ROOT_REL_TOL, 400)?;
    Ok((c, ROOT_REL_TOL * c))
}

/// Population `CoES(tau) = c + (1 - tau)^(-2) int_c^inf P(X >= s, Y >= VaR_Y) ds`.
pub fn true_coes(spec: &ModelSpec, tau: f64) -> Result<f64> {
    oracle(spec, tau).map(|o| o.coes)
}

/// VaR, CoVaR and CoES of `spec` at `tau` in one computation.
pub fn oracle(spec: &ModelSpec, tau: f64) -> Result<OracleResult> {
    let (var_x, var_y) = marginal_quantiles(spec, tau)?;
    let (covar, root_tol) = covar_root(spec, tau, var_x, var_y)?;
    let mut err = None;
    let q = integrate_tail(
        |s| match joint_survival(spec, s, var_y) {
            Ok(p) => p,
            Err(e) => {
                err = Some(e);
                0.0
            }
        },
        covar,
        OUTER,
    )?;
    if let Some(e) = err {
        return Err(e);
    }
    let norm = 1.0 / ((1.0 - tau) * (1.0 - tau));
    let coes = covar + norm * q.value;
    if !(coes.is_finite() && coes > covar) {
        return Err(Error::Numerical(format!(
            "CoES {coes} not above CoVaR {covar} at tau = {tau}"
        )));
    }
    Ok(OracleResult {
        tau,
        var_x,
        var_y,
        covar,
        coes,
        // d CoES / d c = 1 - 1 = 0 at the root, so the root error only enters
        // through CoVaR itself
        abs_tol: root_tol + norm * q.abs_error,
    })
}

/// `eta*` solving `R(eta, 1) = 1 - tau`.
pub fn eta_star(spec: &ModelSpec, tau: f64) -> Result<f64> {
    let target = 1.0 - tau;
    if true_tail_copula(spec, 1.0, 1.0)? <= target {
        return Err(Error::NoTailDependence(format!(
            "R(1, 1) does not exceed 1 - tau = {target}"
        )));
    }
    bisect(
        |e| Ok(true_tail_copula(spec, e, 1.0)? - target),
        0.0,
        1.0,
        1e-12,
        400,
    )
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
struct OracleKey {
    family: Family,
    params: [u64; 3],
    tau: u64,
}

impl OracleKey {
    fn new(spec: &ModelSpec, tau: f64) -> Self {
        Self {
            family: spec.family,
            params: [spec.theta.to_bits(), spec.nu.to_bits(), spec.rho.to_bits()],
            tau: tau.to_bits(),
        }
    }
}

/// Memo table of oracle values keyed by model and level.
#[derive(Debug, Default)]
pub struct OracleCache {
    table: RwLock<HashMap<OracleKey, OracleResult>>,
}

impl OracleCache {
    pub fn new() -> Self {
        Self::default()
    }

    /// Process-wide cache.
    pub fn global() -> &'static OracleCache {
        static CACHE: OnceLock<OracleCache> = OnceLock::new();
        CACHE.get_or_init(OracleCache::new)
    }

    pub fn get(&self, spec: &ModelSpec, tau: f64) -> Result<OracleResult> {
        let key = OracleKey::new(spec, tau);
        if let Some(hit) = self.table.read().expect("oracle cache poisoned").get(&key) {
            return Ok(*hit);
        }
        let mut table = self.table.write().expect("oracle cache poisoned");
        if let Some(hit) = table.get(&key) {
            return Ok(*hit);
        }
        let value = oracle(spec, tau)?;
        table.insert(key, value);
        Ok(value)
    }

    pub fn len(&self) -> usize {
        self.table.read().expect("oracle cache poisoned").len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Brute-force `(CoVaR, CoES)` from `draws` model draws: the conditional
/// `tau`-quantile of X among draws with `Y >= VaR_Y(tau)`, and the mean of X
/// beyond it.
pub fn monte_carlo_covar_coes(spec: &ModelSpec, tau: f64, draws: u64, seed: u64) -> Result<(f64, f64)> {
    const CHUNK: u64 = 1 << 20;
    let (_, var_y) = marginal_quantiles(spec, tau)?;
    let chunks = draws.div_ceil(CHUNK);
    let mut xs: Vec<f64> = (0..chunks)
        .into_par_iter()
        .map(|c| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(c);
            let len = CHUNK.min(draws - c * CHUNK);
            let mut kept = Vec::new();
            for _ in 0..len {
                let (x, y) = spec.draw(&mut rng);
                if y >= var_y {
                    kept.push(x);
                }
            }
            kept
        })
        .flatten()
        .collect();
    if xs.len() < 10 {
        return Err(Error::Numerical(format!(
            "only {} conditional draws at tau = {tau}",
            xs.len()
        )));
    }
    xs.sort_unstable_by(f64::total_cmp);
    let j = ((xs.len() as f64 * tau).ceil() as usize).clamp(1, xs.len());
    let covar = xs[j - 1];
    let tail = &xs[j - 1..];
    let coes = tail.iter().sum::<f64>() / tail.len() as f64;
    Ok((covar, coes))
}
