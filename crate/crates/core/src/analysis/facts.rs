//! Stylized-fact tests on a return series.
//!
//! Each test computes a concrete statistic and compares it with a fixed
//! threshold. Window sizes and lag counts default to the calibrated values
//! and can be overridden through [`FactParams`].

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::stats::{acf, correlation, excess_kurtosis, linear_fit, mean, median, skewness, std_dev};
use crate::error::{Error, Result};

/// Facts implemented here.
pub const FACTS: [u8; 8] = [2, 3, 5, 6, 7, 8, 9, 10];
/// Facts counted by [`six_fact_score`].
pub const SCORED_FACTS: [u8; 6] = [2, 5, 6, 7, 8, 9];

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FactParams {
    /// Window overrides; `None` uses the length-dependent default.
    pub fact2_window: Option<usize>,
    pub fact3_window: Option<usize>,
    pub fact5_window: Option<usize>,
    pub fact7_window: Option<usize>,
    pub fact6_lags: usize,
    pub fact8_lags: Vec<usize>,
    pub fact2_min_kurtosis: f64,
    pub fact2_window_share: f64,
    pub fact5_min_cv: f64,
    pub fact6_acf_lags: usize,
    pub fact7_min_kurtosis: f64,
    pub fact8_beta: (f64, f64),
    pub fact8_max_corr: f64,
    pub fact9_lags: usize,
}

impl Default for FactParams {
    fn default() -> Self {
        FactParams {
            fact2_window: None,
            fact3_window: None,
            fact5_window: None,
            fact7_window: None,
            fact6_lags: 5000,
            fact8_lags: vec![100, 10_000],
            fact2_min_kurtosis: 1.0,
            fact2_window_share: 0.75,
            fact5_min_cv: 0.25,
            fact6_acf_lags: 20,
            fact7_min_kurtosis: 0.5,
            fact8_beta: (0.1, 0.6),
            fact8_max_corr: -0.7,
            fact9_lags: 20,
        }
    }
}

impl FactParams {
    pub fn window2(&self, n: usize) -> usize {
        self.fact2_window.unwrap_or((n / 1000).max(30))
    }
    pub fn window3(&self, n: usize) -> usize {
        self.fact3_window.unwrap_or((n / 1000).max(390))
    }
    pub fn window5(&self, n: usize) -> usize {
        self.fact5_window.unwrap_or((n / 60).max(100))
    }
    pub fn window7(&self, n: usize) -> usize {
        self.fact7_window.unwrap_or((n / 1000).max(30))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FactResult {
    pub fact: u8,
    pub pass: bool,
    /// Too few windows for the statistic to mean much.
    #[serde(default)]
    pub low_power: bool,
    pub statistics: BTreeMap<String, f64>,
    pub params: BTreeMap<String, f64>,
}

impl FactResult {
    fn new(fact: u8, pass: bool) -> Self {
        FactResult { fact, pass, low_power: false, statistics: BTreeMap::new(), params: BTreeMap::new() }
    }

    fn stat(mut self, name: &str, v: f64) -> Self {
        self.statistics.insert(name.into(), v);
        self
    }

    fn param(mut self, name: &str, v: f64) -> Self {
        self.params.insert(name.into(), v);
        self
    }
}

fn insufficient(what: impl Into<String>) -> Error {
    Error::InsufficientData(what.into())
}

fn check_finite(r: &[f64]) -> Result<()> {
    if r.iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(Error::InvalidInput("non-finite return".into()))
    }
}

/// Heavy tails: full-sample excess kurtosis above the threshold and most
/// non-overlapping windows leptokurtic.
pub fn fact2_heavy_tails(r: &[f64], p: &FactParams) -> Result<FactResult> {
    check_finite(r)?;
    let n = r.len();
    let w = p.window2(n);
    if w == 0 || n < 2 * w {
        return Err(insufficient(format!("fact 2 needs {} returns, got {n}", 2 * w.max(1))));
    }
    let k = excess_kurtosis(r).ok_or_else(|| insufficient("fact 2: zero variance"))?;
    let windows: Vec<&[f64]> = r.chunks_exact(w).collect();
    let positive = windows.iter().filter(|c| excess_kurtosis(c).is_some_and(|k| k > 0.0)).count();
    let share = positive as f64 / windows.len() as f64;
    let pass = k > p.fact2_min_kurtosis && share >= p.fact2_window_share;
    Ok(FactResult::new(2, pass)
        .stat("excess_kurtosis", k)
        .stat("positive_window_share", share)
        .stat("windows", windows.len() as f64)
        .param("window", w as f64)
        .param("min_kurtosis", p.fact2_min_kurtosis)
        .param("min_window_share", p.fact2_window_share))
}

/// Gain/loss asymmetry: median windowed skewness is negative.
pub fn fact3_asymmetry(r: &[f64], p: &FactParams) -> Result<FactResult> {
    check_finite(r)?;
    let n = r.len();
    let w = p.window3(n);
    if w == 0 || n < w {
        return Err(insufficient(format!("fact 3 needs {w} returns, got {n}")));
    }
    let skews: Vec<f64> = r.chunks_exact(w).filter_map(skewness).collect();
    if skews.is_empty() {
        return Err(insufficient("fact 3: zero variance in every window"));
    }
    let m = median(&skews);
    let mut res = FactResult::new(3, m < 0.0).stat("median_skewness", m).stat("windows", skews.len() as f64).param("window", w as f64);
    res.low_power = skews.len() < 3;
    Ok(res)
}

/// Intermittency: realized volatility varies strongly between windows.
pub fn fact5_intermittency(r: &[f64], p: &FactParams) -> Result<FactResult> {
    check_finite(r)?;
    let n = r.len();
    let w = p.window5(n);
    if w == 0 || n < w {
        return Err(insufficient(format!("fact 5 needs {w} returns, got {n}")));
    }
    let vols: Vec<f64> = r.chunks_exact(w).map(|c| c.iter().map(|x| x * x).sum::<f64>().sqrt()).collect();
    let m = mean(&vols);
    if m <= 0.0 {
        return Err(insufficient("fact 5: zero variance"));
    }
    let cv = if vols.len() > 1 { std_dev(&vols) / m } else { 0.0 };
    let mut res = FactResult::new(5, cv > p.fact5_min_cv)
        .stat("cv", cv)
        .stat("windows", vols.len() as f64)
        .param("window", w as f64)
        .param("min_cv", p.fact5_min_cv);
    res.low_power = vols.len() < 3;
    Ok(res)
}

/// Volatility clustering: squared returns are positively autocorrelated.
pub fn fact6_vol_clustering(r: &[f64], p: &FactParams) -> Result<FactResult> {
    check_finite(r)?;
    let n = r.len();
    let lags = p.fact6_lags.min(n / 10);
    if lags == 0 {
        return Err(insufficient(format!("fact 6: {n} returns leave no lags")));
    }
    let sq: Vec<f64> = r.iter().map(|x| x * x).collect();
    if std_dev(&sq) == 0.0 {
        return Err(insufficient("fact 6: constant squared returns"));
    }
    let rho = acf(&sq, lags);
    let head = &rho[..p.fact6_acf_lags.min(rho.len())];
    let m = mean(head);
    let threshold = 2.0 / (n as f64).sqrt();
    Ok(FactResult::new(6, m > threshold)
        .stat("mean_acf", m)
        .stat("threshold", threshold)
        .param("lags", lags as f64)
        .param("acf_lags", head.len() as f64))
}

/// Conditional heavy tails: returns scaled by a trailing rolling standard
/// deviation are still leptokurtic.
pub fn fact7_conditional_heavy_tails(r: &[f64], p: &FactParams) -> Result<FactResult> {
    check_finite(r)?;
    let n = r.len();
    let w = p.window7(n);
    if w < 2 || n <= w {
        return Err(insufficient(format!("fact 7 window {w} needs more than {n} returns")));
    }
    // Direct per-window variance; running sums leave residue over flat stretches.
    let mut z = Vec::with_capacity(n - w);
    for t in w..n {
        let var = super::stats::variance(&r[t - w..t]);
        if var > 0.0 {
            z.push(r[t] / var.sqrt());
        }
    }
    let k = if z.len() >= 4 { excess_kurtosis(&z) } else { None };
    let k = k.ok_or_else(|| insufficient("fact 7: no normalized returns with variance"))?;
    Ok(FactResult::new(7, k > p.fact7_min_kurtosis)
        .stat("excess_kurtosis", k)
        .stat("normalized", z.len() as f64)
        .param("window", w as f64)
        .param("min_kurtosis", p.fact7_min_kurtosis))
}

/// Power-law fit of the absolute-return autocorrelation for one lag count.
/// Returns `(beta, corr, points)`.
pub fn acf_power_fit(abs_r: &[f64], lags: usize) -> Option<(f64, f64, usize)> {
    let rho = acf(abs_r, lags);
    let (mut x, mut y) = (Vec::new(), Vec::new());
    for (i, v) in rho.iter().enumerate() {
        if *v > 0.0 {
            x.push(((i + 1) as f64).ln());
            y.push(v.ln());
        }
    }
    if x.len() < 3 {
        return None;
    }
    let (slope, _) = linear_fit(&x, &y);
    let corr = correlation(&x, &y)?;
    Some((-slope, corr, x.len()))
}

/// Slow decay of the absolute-return autocorrelation.
pub fn fact8_slow_acf_decay(r: &[f64], p: &FactParams) -> Result<FactResult> {
    check_finite(r)?;
    let n = r.len();
    let abs: Vec<f64> = r.iter().map(|x| x.abs()).collect();
    if std_dev(&abs) == 0.0 {
        return Err(insufficient("fact 8: constant absolute returns"));
    }
    let mut res = FactResult::new(8, false).param("beta_min", p.fact8_beta.0).param("beta_max", p.fact8_beta.1).param("max_corr", p.fact8_max_corr);
    let mut fitted = false;
    for &l in &p.fact8_lags {
        let lags = l.min(n / 10);
        let Some((beta, corr, points)) = acf_power_fit(&abs, lags) else { continue };
        fitted = true;
        let ok = beta >= p.fact8_beta.0 && beta <= p.fact8_beta.1 && corr <= p.fact8_max_corr;
        res.pass |= ok;
        res = res.stat(&format!("beta_{l}"), beta).stat(&format!("corr_{l}"), corr).stat(&format!("points_{l}"), points as f64).param(&format!("lags_{l}"), lags as f64);
    }
    if !fitted {
        return Err(insufficient("fact 8: too few positive autocorrelations to fit"));
    }
    Ok(res)
}

/// Leverage effect: returns are negatively correlated with later squared returns.
pub fn fact9_leverage(r: &[f64], p: &FactParams) -> Result<FactResult> {
    check_finite(r)?;
    let n = r.len();
    let lags = p.fact9_lags;
    if n < lags + 5 {
        return Err(insufficient(format!("fact 9 needs {} returns, got {n}", lags + 5)));
    }
    let sq: Vec<f64> = r.iter().map(|x| x * x).collect();
    let mut cs = Vec::with_capacity(lags);
    for k in 1..=lags {
        if let Some(c) = correlation(&r[..n - k], &sq[k..]) {
            cs.push(c);
        }
    }
    if cs.is_empty() {
        return Err(insufficient("fact 9: zero variance"));
    }
    let m = mean(&cs);
    Ok(FactResult::new(9, m < 0.0).stat("mean_corr", m).param("lags", lags as f64))
}

/// Volume and volatility move together.
pub fn fact10_volume_volatility(r: &[f64], volumes: &[f64]) -> Result<FactResult> {
    check_finite(r)?;
    check_finite(volumes)?;
    if r.len() != volumes.len() {
        return Err(Error::InvalidInput(format!("{} returns but {} volumes", r.len(), volumes.len())));
    }
    if r.len() < 3 {
        return Err(insufficient("fact 10 needs at least 3 returns"));
    }
    let abs: Vec<f64> = r.iter().map(|x| x.abs()).collect();
    let c = correlation(volumes, &abs).ok_or_else(|| insufficient("fact 10: zero variance"))?;
    Ok(FactResult::new(10, c > 0.0).stat("corr", c))
}

/// Runs one fact by id. Fact 10 needs `volumes`.
pub fn run_fact(fact: u8, r: &[f64], volumes: Option<&[f64]>, p: &FactParams) -> Result<FactResult> {
    match fact {
        2 => fact2_heavy_tails(r, p),
        3 => fact3_asymmetry(r, p),
        5 => fact5_intermittency(r, p),
        6 => fact6_vol_clustering(r, p),
        7 => fact7_conditional_heavy_tails(r, p),
        8 => fact8_slow_acf_decay(r, p),
        9 => fact9_leverage(r, p),
        10 => match volumes {
            Some(v) => fact10_volume_volatility(r, v),
            None => Err(Error::InvalidInput("fact 10 needs volumes".into())),
        },
        _ => Err(Error::InvalidInput(format!("no test for fact {fact}"))),
    }
}

/// Outcome of one fact on one series; errors count as failures.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FactOutcome {
    pub fact: u8,
    pub result: std::result::Result<FactResult, String>,
}

impl FactOutcome {
    pub fn passed(&self) -> bool {
        matches!(&self.result, Ok(r) if r.pass)
    }
}

pub fn run_facts(facts: &[u8], r: &[f64], volumes: Option<&[f64]>, p: &FactParams) -> Vec<FactOutcome> {
    facts.iter().map(|&fact| FactOutcome { fact, result: run_fact(fact, r, volumes, p).map_err(|e| e.to_string()) }).collect()
}

/// Number of scored facts that pass.
pub fn six_fact_score(outcomes: &[FactOutcome]) -> u32 {
    outcomes.iter().filter(|o| SCORED_FACTS.contains(&o.fact) && o.passed()).count() as u32
}
