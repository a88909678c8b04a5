//! Price-file ingestion, loss construction, k-range averaging, rolling-window
//! estimation and diagnostic exports.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;
use std::str::FromStr;

use chrono::NaiveDate;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::covar_coes::{estimate_all, RiskEstimates};
use crate::empirical::{hill_curve, tail_prob_curve};
use crate::error::{Error, Result};
use crate::sample::{LossPairSample, MarginIndex, TailConfig};
use crate::tail_copula::{TailCopulaEstimate, Variant};

/// A dated price path and its losses `-ln(p[i+1] / p[i])`.
#[derive(Debug, Clone, PartialEq)]
pub struct ReturnSeries {
    timestamps: Vec<NaiveDate>,
    prices: Vec<f64>,
    losses: Vec<f64>,
}

impl ReturnSeries {
    pub fn new(timestamps: Vec<NaiveDate>, prices: Vec<f64>) -> Result<Self> {
        if timestamps.len() != prices.len() {
            return Err(Error::InvalidInput(format!(
                "{} dates for {} prices",
                timestamps.len(),
                prices.len()
            )));
        }
        if prices.len() < 2 {
            return Err(Error::InvalidInput("need at least two prices".into()));
        }
        if let Some(w) = timestamps.windows(2).find(|w| w[0] >= w[1]) {
            return Err(Error::InvalidInput(format!(
                "dates not strictly increasing at {}",
                w[1]
            )));
        }
        if let Some(p) = prices.iter().find(|&&p| !(p > 0.0 && p.is_finite())) {
            return Err(Error::InvalidInput(format!("non-positive price {p}")));
        }
        let losses = prices.windows(2).map(|w| -(w[1] / w[0]).ln()).collect();
        Ok(Self {
            timestamps,
            prices,
            losses,
        })
    }

    pub fn timestamps(&self) -> &[NaiveDate] {
        &self.timestamps
    }

    pub fn prices(&self) -> &[f64] {
        &self.prices
    }

    /// `losses[i]` is realised on `timestamps[i + 1]`.
    pub fn losses(&self) -> &[f64] {
        &self.losses
    }

    /// Dates on which the losses are realised.
    pub fn loss_dates(&self) -> &[NaiveDate] {
        &self.timestamps[1..]
    }
}

#[derive(Debug, Deserialize)]
struct PriceRow {
    date: String,
    price: String,
}

/// Reads a `date,price` file (ISO-8601 dates, one row per date).
pub fn read_prices(path: &Path) -> Result<Vec<(NaiveDate, f64)>> {
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
    let headers = reader.headers()?.clone();
    if headers.iter().collect::<Vec<_>>() != ["date", "price"] {
        return Err(Error::Parse(format!(
            "{}: expected header 'date,price', found '{}'",
            path.display(),
            headers.iter().collect::<Vec<_>>().join(",")
        )));
    }
    let mut rows = Vec::new();
    for (i, record) in reader.deserialize::<PriceRow>().enumerate() {
        let line = i + 2;
        let row = record.map_err(|e| Error::Parse(format!("{}:{line}: {e}", path.display())))?;
        let date = NaiveDate::from_str(&row.date).map_err(|e| {
            Error::Parse(format!("{}:{line}: bad date '{}': {e}", path.display(), row.date))
        })?;
        let price: f64 = row.price.parse().map_err(|_| {
            Error::Parse(format!("{}:{line}: bad price '{}'", path.display(), row.price))
        })?;
        if !(price > 0.0 && price.is_finite()) {
            return Err(Error::InvalidInput(format!(
                "{}:{line}: non-positive price {price}",
                path.display()
            )));
        }
        rows.push((date, price));
    }
    Ok(rows)
}

/// Aligns two price paths on their common dates and builds both loss series.
pub fn align_prices(
    x: &[(NaiveDate, f64)],
    y: &[(NaiveDate, f64)],
) -> Result<(ReturnSeries, ReturnSeries)> {
    let mut x = x.to_vec();
    let mut y = y.to_vec();
    for s in [&mut x, &mut y] {
        s.sort_by_key(|r| r.0);
        if let Some(w) = s.windows(2).find(|w| w[0].0 == w[1].0) {
            return Err(Error::InvalidInput(format!("duplicate date {}", w[0].0)));
        }
    }
    let (mut dates, mut px, mut py) = (Vec::new(), Vec::new(), Vec::new());
    let (mut i, mut j) = (0, 0);
    while i < x.len() && j < y.len() {
        match x[i].0.cmp(&y[j].0) {
            std::cmp::Ordering::Less => i += 1,
            std::cmp::Ordering::Greater => j += 1,
            std::cmp::Ordering::Equal => {
                dates.push(x[i].0);
                px.push(x[i].1);
                py.push(y[j].1);
                i += 1;
                j += 1;
            }
        }
    }
    match dates.len() {
        0 => Err(Error::InvalidInput("empty intersection of dates".into())),
        1 => Err(Error::InvalidInput("only one overlapping date".into())),
        _ => Ok((
            ReturnSeries::new(dates.clone(), px)?,
            ReturnSeries::new(dates, py)?,
        )),
    }
}

pub fn load_pair_series(path_x: &Path, path_y: &Path) -> Result<(ReturnSeries, ReturnSeries)> {
    align_prices(&read_prices(path_x)?, &read_prices(path_y)?)
}

/// A single `k` or an inclusive range `lo:hi` whose estimates are averaged.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct KRange {
    pub lo: usize,
    pub hi: usize,
}

impl KRange {
    pub fn single(k: usize) -> Self {
        Self { lo: k, hi: k }
    }

    pub fn len(&self) -> usize {
        self.hi - self.lo + 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }
}

impl FromStr for KRange {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let parse = |t: &str| {
            t.trim()
                .parse::<usize>()
                .map_err(|_| Error::Parse(format!("bad k '{t}'")))
        };
        let (lo, hi) = match s.split_once(':') {
            Some((a, b)) => (parse(a)?, parse(b)?),
            None => {
                let k = parse(s)?;
                (k, k)
            }
        };
        if lo == 0 || lo > hi {
            return Err(Error::Parse(format!("k range '{s}' must satisfy 1 <= lo <= hi")));
        }
        Ok(Self { lo, hi })
    }
}

/// Average of [`estimate_all`] over every `k` in `ks`; warnings are concatenated.
pub fn estimate_k_range(sample: &LossPairSample, ks: KRange, tau_prime: f64) -> Result<RiskEstimates> {
    let runs = (ks.lo..=ks.hi)
        .map(|k| estimate_all(sample, k, tau_prime))
        .collect::<Result<Vec<_>>>()?;
    if runs.len() == 1 {
        return Ok(runs.into_iter().next().expect("one run"));
    }
    let w = 1.0 / runs.len() as f64;
    let mean = |f: fn(&RiskEstimates) -> f64| runs.iter().map(f).sum::<f64>() * w;
    Ok(RiskEstimates {
        gamma1_hat: mean(|r| r.gamma1_hat),
        var_x_hat: mean(|r| r.var_x_hat),
        eta_hat_1: mean(|r| r.eta_hat_1),
        eta_hat_2: mean(|r| r.eta_hat_2),
        covar_int: mean(|r| r.covar_int),
        coes_int: mean(|r| r.coes_int),
        covar1: mean(|r| r.covar1),
        covar2: mean(|r| r.covar2),
        covar3: mean(|r| r.covar3),
        coes1: mean(|r| r.coes1),
        coes2: mean(|r| r.coes2),
        coes3: mean(|r| r.coes3),
        coes4: mean(|r| r.coes4),
        warnings: runs.into_iter().flat_map(|r| r.warnings).collect(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RollingPlan {
    pub window: usize,
    pub k: KRange,
    pub tau_prime: f64,
    pub step: usize,
}

impl RollingPlan {
    pub fn validate(&self, len: usize) -> Result<()> {
        if self.step == 0 {
            return Err(Error::InvalidConfig("step must be at least 1".into()));
        }
        if self.window > len {
            return Err(Error::InvalidConfig(format!(
                "window {} longer than the {len} available losses",
                self.window
            )));
        }
        TailConfig::validate(self.window, self.k.hi, Some(self.tau_prime))?;
        Ok(())
    }

    /// `floor((len - window) / step) + 1`.
    pub fn window_count(&self, len: usize) -> usize {
        (len - self.window) / self.step + 1
    }
}

/// One window's outcome; failed windows become gaps with a reason.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum WindowOutcome {
    Ok { estimates: RiskEstimates },
    Gap { reason: String },
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct WindowRecord {
    pub end: NaiveDate,
    pub outcome: WindowOutcome,
}

/// Re-estimates over windows of `plan.window` consecutive losses ending at
/// `window, window + step, ...`, in date order.
pub fn rolling_estimates(
    dates: &[NaiveDate],
    xs: &[f64],
    ys: &[f64],
    plan: &RollingPlan,
) -> Result<Vec<WindowRecord>> {
    if dates.len() != xs.len() || xs.len() != ys.len() {
        return Err(Error::InvalidInput("dates and loss series differ in length".into()));
    }
    plan.validate(xs.len())?;
    let count = plan.window_count(xs.len());
    Ok((0..count)
        .into_par_iter()
        .map(|w| {
            let end = plan.window + w * plan.step;
            let start = end - plan.window;
            let outcome = LossPairSample::new(xs[start..end].to_vec(), ys[start..end].to_vec())
                .and_then(|s| estimate_k_range(&s, plan.k, plan.tau_prime));
            WindowRecord {
                end: dates[end - 1],
                outcome: match outcome {
                    Ok(estimates) => WindowOutcome::Ok { estimates },
                    Err(e) => WindowOutcome::Gap {
                        reason: e.to_string(),
                    },
                },
            }
        })
        .collect())
}

const ESTIMATE_COLUMNS: &str = "gamma1_hat\tvar_x_hat\teta_hat_1\teta_hat_2\tcovar_int\tcoes_int\tcovar1\tcovar2\tcovar3\tcoes1\tcoes2\tcoes3\tcoes4";

fn estimate_fields(e: &RiskEstimates) -> [f64; 13] {
    [
        e.gamma1_hat,
        e.var_x_hat,
        e.eta_hat_1,
        e.eta_hat_2,
        e.covar_int,
        e.coes_int,
        e.covar1,
        e.covar2,
        e.covar3,
        e.coes1,
        e.coes2,
        e.coes3,
        e.coes4,
    ]
}

fn tab_escape(s: &str) -> String {
    s.replace(['\t', '\n', '\r'], " ")
}

/// Header plus one row for a single estimate record.
pub fn estimates_tsv(e: &RiskEstimates) -> String {
    let mut out = format!("{ESTIMATE_COLUMNS}\twarnings\n");
    for v in estimate_fields(e) {
        let _ = write!(out, "{v}\t");
    }
    let keys: Vec<&str> = e.warnings.iter().map(|w| w.key()).collect();
    out.push_str(&keys.join(","));
    out.push('\n');
    out
}

/// `date, status, estimates..., note`; gap rows leave the estimate columns empty.
pub fn rolling_tsv(records: &[WindowRecord]) -> String {
    let mut out = format!("date\tstatus\t{ESTIMATE_COLUMNS}\tnote\n");
    for r in records {
        let _ = write!(out, "{}\t", r.end);
        match &r.outcome {
            WindowOutcome::Ok { estimates } => {
                out.push_str("ok");
                for v in estimate_fields(estimates) {
                    let _ = write!(out, "\t{v}");
                }
                let keys: Vec<&str> = estimates.warnings.iter().map(|w| w.key()).collect();
                let _ = write!(out, "\t{}", keys.join(","));
            }
            WindowOutcome::Gap { reason } => {
                out.push_str("gap");
                out.push_str(&"\t".repeat(13));
                let _ = write!(out, "\t{}", tab_escape(reason));
            }
        }
        out.push('\n');
    }
    out
}

/// `(k, R_hat^(1)(1,1), R_hat^(2)(1,1))` for `k_min..=k_max`.
pub fn r11_curve(sample: &LossPairSample, k_min: usize, k_max: usize) -> Result<Vec<(usize, f64, f64)>> {
    if k_min == 0 || k_min > k_max {
        return Err(Error::InvalidConfig(format!(
            "empty k range {k_min}..={k_max}"
        )));
    }
    let mx = MarginIndex::new(sample.xs())?;
    let my = MarginIndex::new(sample.ys())?;
    (k_min..=k_max)
        .map(|k| {
            let r1 = TailCopulaEstimate::from_margins(&mx, &my, k, Variant::Empirical)?.eval(1.0, 1.0)?;
            let r2 = TailCopulaEstimate::from_margins(&mx, &my, k, Variant::Rank)?.eval(1.0, 1.0)?;
            Ok((k, r1, r2))
        })
        .collect()
}

/// Writes `hill.tsv`, `tailprob.tsv` and `r11.tsv` into `dir`.
pub fn diagnostics_export(
    sample: &LossPairSample,
    k_min: usize,
    k_max: usize,
    taus: &[f64],
    dir: &Path,
) -> Result<()> {
    if k_min > k_max {
        return Err(Error::InvalidConfig(format!("empty k range {k_min}..={k_max}")));
    }
    if taus.is_empty() {
        return Err(Error::InvalidConfig("empty tau grid".into()));
    }
    let hill = hill_curve(&MarginIndex::new(sample.xs())?, k_min, k_max)?;
    let tail = tail_prob_curve(sample, taus)?;
    let r11 = r11_curve(sample, k_min, k_max)?;

    let mut h = String::from("k\tgamma\tlo\thi\n");
    for ((k, g), (lo, hi)) in hill.ks.iter().zip(&hill.gammas).zip(&hill.bands) {
        let _ = writeln!(h, "{k}\t{g}\t{lo}\t{hi}");
    }
    let mut t = String::from("tau\tp_hat\tindependence\n");
    for ((tau, p), sq) in tail.taus.iter().zip(&tail.p_hat).zip(&tail.square) {
        let _ = writeln!(t, "{tau}\t{p}\t{sq}");
    }
    let mut r = String::from("k\tr1\tr2\n");
    for (k, r1, r2) in r11 {
        let _ = writeln!(r, "{k}\t{r1}\t{r2}");
    }
    fs::create_dir_all(dir)?;
    fs::write(dir.join("hill.tsv"), h)?;
    fs::write(dir.join("tailprob.tsv"), t)?;
    fs::write(dir.join("r11.tsv"), r)?;
    Ok(())
}

/// Parses `a:b:step` (inclusive) or a comma-separated list of levels.
pub fn parse_tau_grid(s: &str) -> Result<Vec<f64>> {
    let num = |t: &str| {
        t.trim()
            .parse::<f64>()
            .map_err(|_| Error::Parse(format!("bad level '{t}'")))
    };
    let parts: Vec<&str> = s.split(':').collect();
    let taus = match parts.as_slice() {
        [a, b, step] => {
            let (a, b, step) = (num(a)?, num(b)?, num(step)?);
            if step.is_nan() || step <= 0.0 || a > b {
                return Err(Error::Parse(format!("bad grid '{s}'")));
            }
            let count = ((b - a) / step + 1e-9).floor() as usize + 1;
            (0..count).map(|i| a + i as f64 * step).collect()
        }
        [_] => s.split(',').map(num).collect::<Result<Vec<_>>>()?,
        _ => return Err(Error::Parse(format!("bad grid '{s}'"))),
    };
    if taus.is_empty() || taus.iter().any(|&t| !(t > 0.0 && t < 1.0)) {
        return Err(Error::Parse(format!("levels in '{s}' must lie in (0, 1)")));
    }
    Ok(taus)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::{sample_model, Family, ModelSpec};
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn d(s: &str) -> NaiveDate {
        NaiveDate::from_str(s).unwrap()
    }

    fn dates(start: &str, n: usize) -> Vec<NaiveDate> {
        let s = d(start);
        (0..n).map(|i| s + chrono::Days::new(7 * i as u64)).collect()
    }

    #[test]
    fn loss_examples() {
        let s = ReturnSeries::new(dates("2020-01-03", 2), vec![100.0, 90.4837]).unwrap();
        assert!((s.losses()[0] - 0.1).abs() < 1e-6);
        let flat = ReturnSeries::new(dates("2020-01-03", 5), vec![7.0; 5]).unwrap();
        assert!(flat.losses().iter().all(|&l| l == 0.0));
        assert_eq!(flat.loss_dates().len(), 4);
        assert!(ReturnSeries::new(dates("2020-01-03", 2), vec![1.0, 0.0]).is_err());
        let mut back = dates("2020-01-03", 3);
        back.swap(0, 2);
        assert!(ReturnSeries::new(back, vec![1.0; 3]).is_err());
    }

    #[test]
    fn alignment() {
        let x: Vec<(NaiveDate, f64)> = dates("2020-01-03", 6).into_iter().zip([1.0, 2.0, 3.0, 4.0, 5.0, 6.0]).collect();
        let y: Vec<(NaiveDate, f64)> = dates("2020-01-17", 6).into_iter().zip([9.0, 8.0, 7.0, 6.0, 5.0, 4.0]).collect();
        let (sx, sy) = align_prices(&x, &y).unwrap();
        assert_eq!(sx.timestamps(), &dates("2020-01-17", 4)[..]);
        assert_eq!(sx.prices(), &[3.0, 4.0, 5.0, 6.0]);
        assert_eq!(sy.prices(), &[9.0, 8.0, 7.0, 6.0]);
        assert_eq!(sx.timestamps(), sy.timestamps());

        let far: Vec<(NaiveDate, f64)> = dates("2030-01-03", 6).into_iter().map(|t| (t, 1.0)).collect();
        let err = align_prices(&x, &far).unwrap_err();
        assert!(err.to_string().contains("empty intersection"));
    }

    #[test]
    fn k_range_parsing() {
        assert_eq!("80:100".parse::<KRange>().unwrap(), KRange { lo: 80, hi: 100 });
        assert_eq!("90".parse::<KRange>().unwrap(), KRange::single(90));
        assert_eq!(KRange { lo: 80, hi: 100 }.len(), 21);
        assert!("100:80".parse::<KRange>().is_err());
        assert!("0".parse::<KRange>().is_err());
        assert!("a:b".parse::<KRange>().is_err());
    }

    #[test]
    fn k_range_average() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let s = sample_model(&ModelSpec::standard(Family::Cauchy), 1000, &mut rng).unwrap();
        let avg = estimate_k_range(&s, KRange { lo: 80, hi: 82 }, 0.99).unwrap();
        let each: Vec<RiskEstimates> = (80..=82).map(|k| estimate_all(&s, k, 0.99).unwrap()).collect();
        let mean = each.iter().map(|e| e.covar2).sum::<f64>() / 3.0;
        assert!((avg.covar2 - mean).abs() < 1e-12 * mean);
        assert_eq!(estimate_k_range(&s, KRange::single(80), 0.99).unwrap(), each[0]);
    }

    #[test]
    fn rolling_window_counts() {
        let plan = |window, step| RollingPlan {
            window,
            k: KRange::single(20),
            tau_prime: 0.99,
            step,
        };
        assert_eq!(plan(1000, 1).window_count(3821), 2822);
        assert_eq!(plan(3821, 1).window_count(3821), 1);
        assert_eq!(plan(1000, 3821).window_count(3821), 1);
    }

    #[test]
    fn rolling_single_window_matches_whole_sample() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let s = sample_model(&ModelSpec::standard(Family::Logistic), 300, &mut rng).unwrap();
        let ds = dates("2000-01-07", 300);
        let plan = RollingPlan {
            window: 300,
            k: KRange::single(60),
            tau_prime: 0.995,
            step: 1,
        };
        let out = rolling_estimates(&ds, s.xs(), s.ys(), &plan).unwrap();
        assert_eq!(out.len(), 1);
        assert_eq!(out[0].end, ds[299]);
        assert_eq!(
            out[0].outcome,
            WindowOutcome::Ok {
                estimates: estimate_all(&s, 60, 0.995).unwrap()
            }
        );
    }

    #[test]
    fn rolling_gaps_do_not_abort() {
        let n = 120;
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let s = sample_model(&ModelSpec::standard(Family::Cauchy), n, &mut rng).unwrap();
        let mut xs = s.xs().to_vec();
        // a flat stretch makes the Hill estimate of the first windows zero
        for x in xs.iter_mut().take(60) {
            *x = 1.0;
        }
        for x in xs.iter_mut().skip(60) {
            *x += 2.0;
        }
        let plan = RollingPlan {
            window: 50,
            k: KRange::single(10),
            tau_prime: 0.99,
            step: 5,
        };
        let out = rolling_estimates(&dates("2000-01-07", n), &xs, s.ys(), &plan).unwrap();
        assert_eq!(out.len(), plan.window_count(n));
        assert!(matches!(out[0].outcome, WindowOutcome::Gap { .. }));
        assert!(out.iter().any(|r| matches!(r.outcome, WindowOutcome::Ok { .. })));
        let tsv = rolling_tsv(&out);
        let cols = tsv.lines().next().unwrap().split('\t').count();
        assert!(tsv.lines().all(|l| l.split('\t').count() == cols));
        assert!(out.windows(2).all(|w| w[0].end < w[1].end));
    }

    #[test]
    fn rolling_plan_validation() {
        let ds = dates("2000-01-07", 10);
        let v = vec![1.0; 10];
        let mut plan = RollingPlan {
            window: 11,
            k: KRange::single(2),
            tau_prime: 0.99,
            step: 1,
        };
        assert!(rolling_estimates(&ds, &v, &v, &plan).is_err());
        plan.window = 5;
        plan.step = 0;
        assert!(rolling_estimates(&ds, &v, &v, &plan).is_err());
    }

    #[test]
    fn r11_fixtures() {
        let n = 400;
        let v: Vec<f64> = (1..=n).map(|i| i as f64).collect();
        let como = LossPairSample::new(v.clone(), v.clone()).unwrap();
        for (k, r1, r2) in r11_curve(&como, 10, 100).unwrap() {
            assert!(r1 >= 0.9 && r2 >= 0.9, "k = {k}: {r1} {r2}");
        }
        let rev: Vec<f64> = v.iter().rev().copied().collect();
        let anti = LossPairSample::new(v, rev).unwrap();
        for (_, r1, r2) in r11_curve(&anti, 10, n / 4).unwrap() {
            assert!(r1 < 0.05 && r2 < 0.05);
        }
        assert!(r11_curve(&como, 20, 10).is_err());
    }

    #[test]
    fn diagnostics_files() {
        let dir = tempfile::tempdir().unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let s = sample_model(&ModelSpec::standard(Family::Pareto2), 500, &mut rng).unwrap();
        let taus = parse_tau_grid("0.9:0.99:0.01").unwrap();
        assert_eq!(taus.len(), 10);
        diagnostics_export(&s, 10, 50, &taus, dir.path()).unwrap();
        let hill = fs::read_to_string(dir.path().join("hill.tsv")).unwrap();
        assert_eq!(hill.lines().count(), 42);
        let tp = fs::read_to_string(dir.path().join("tailprob.tsv")).unwrap();
        assert_eq!(tp.lines().count(), 11);
        let r = fs::read_to_string(dir.path().join("r11.tsv")).unwrap();
        assert!(r.starts_with("k\tr1\tr2\n"));
        assert!(diagnostics_export(&s, 50, 10, &taus, dir.path()).is_err());
    }

    #[test]
    fn tau_grid_forms() {
        assert_eq!(parse_tau_grid("0.9,0.95").unwrap(), vec![0.9, 0.95]);
        assert!(parse_tau_grid("0.9:0.8:0.01").is_err());
        assert!(parse_tau_grid("1.2").is_err());
    }

    #[test]
    fn price_file_roundtrip() {
        let dir = tempfile::tempdir().unwrap();
        let px = dir.path().join("x.csv");
        fs::write(&px, "date,price\n2020-01-03,100\n2020-01-10,90.4837\n2020-01-17,95\n").unwrap();
        let rows = read_prices(&px).unwrap();
        assert_eq!(rows.len(), 3);
        let bad = dir.path().join("bad.csv");
        fs::write(&bad, "date,price\n2020-01-03,abc\n").unwrap();
        assert!(matches!(read_prices(&bad), Err(Error::Parse(_))));
        fs::write(&bad, "when,price\n2020-01-03,1\n").unwrap();
        assert!(read_prices(&bad).is_err());
        fs::write(&bad, "date,price\n2020-01-03,-1\n").unwrap();
        assert!(read_prices(&bad).is_err());
        let (a, b) = load_pair_series(&px, &px).unwrap();
        assert_eq!(a, b);
        assert!((a.losses()[0] - 0.1).abs() < 1e-6);
    }

    proptest! {
        #[test]
        fn window_arithmetic(len in 2usize..5000, wf in 0.0f64..1.0, step in 1usize..400) {
            let window = 2 + ((len - 2) as f64 * wf) as usize;
            let plan = RollingPlan { window, k: KRange::single(1), tau_prime: 0.99, step };
            let ends: Vec<usize> = (window..=len).step_by(step).collect();
            prop_assert_eq!(plan.window_count(len), ends.len());
            prop_assert_eq!(plan.window_count(len), (len - window) / step + 1);
        }

        #[test]
        fn shifting_dates_changes_nothing(shift in 1u64..3000, seed in any::<u64>()) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let n = 200;
            let px: Vec<f64> = (0..n).map(|_| rand::Rng::random_range(&mut rng, 50.0..150.0)).collect();
            let py: Vec<f64> = (0..n).map(|_| rand::Rng::random_range(&mut rng, 50.0..150.0)).collect();
            let base = dates("2001-01-05", n);
            let moved: Vec<NaiveDate> = base.iter().map(|&t| t + chrono::Days::new(shift)).collect();
            let a = align_prices(
                &base.iter().copied().zip(px.clone()).collect::<Vec<_>>(),
                &base.iter().copied().zip(py.clone()).collect::<Vec<_>>(),
            ).unwrap();
            let b = align_prices(
                &moved.iter().copied().zip(px).collect::<Vec<_>>(),
                &moved.iter().copied().zip(py).collect::<Vec<_>>(),
            ).unwrap();
            prop_assert_eq!(a.0.losses(), b.0.losses());
            prop_assert_eq!(a.1.losses(), b.1.losses());
            let sa = LossPairSample::new(a.0.losses().to_vec(), a.1.losses().to_vec()).unwrap();
            let sb = LossPairSample::new(b.0.losses().to_vec(), b.1.losses().to_vec()).unwrap();
            let ea = estimate_all(&sa, 30, 0.99);
            let eb = estimate_all(&sb, 30, 0.99);
            prop_assert_eq!(format!("{ea:?}"), format!("{eb:?}"));
        }
    }
}
