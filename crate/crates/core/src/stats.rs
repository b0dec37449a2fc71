//! Goodness-of-fit machinery: empirical laws, Pearson chi-square with cell
//! pooling, one-sample Kolmogorov-Smirnov, moment bands and point-process
//! diagnostics.

use std::collections::BTreeMap;

use num_bigint::BigInt;
use num_rational::BigRational;
use serde::Serialize;
use statrs::distribution::{ChiSquared, ContinuousCDF, Normal};

use crate::analytics::{Outcome, PmfRow, PmfTable, Weight};
use crate::{Error, Result};

/// Default significance level for single checks.
pub const ALPHA: f64 = 1e-3;

/// Two-sided tail mass beyond four standard deviations; a `k`-sigma band
/// check passes iff its p-value exceeds this.
pub fn four_sigma_alpha() -> f64 {
    2.0 * std_normal().cdf(-4.0)
}

fn std_normal() -> Normal {
    Normal::new(0.0, 1.0).expect("standard normal")
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GofReport {
    pub name: String,
    pub statistic: f64,
    pub dof: Option<usize>,
    pub n: usize,
    pub p_value: f64,
    pub alpha: f64,
    pub pass: bool,
    pub bins: String,
}

impl GofReport {
    fn new(name: &str, statistic: f64, dof: Option<usize>, n: usize, p_value: f64, alpha: f64, bins: String) -> Self {
        let p_value = p_value.clamp(0.0, 1.0);
        GofReport {
            name: name.to_string(),
            statistic,
            dof,
            n,
            p_value,
            alpha,
            pass: p_value > alpha,
            bins,
        }
    }

    pub fn named(mut self, name: impl Into<String>) -> Self {
        self.name = name.into();
        self
    }
}

/// Relative frequencies with exact rational weights `count / n`.
pub fn empirical_pmf<I, O>(samples: I) -> Result<PmfTable>
where
    I: IntoIterator<Item = O>,
    O: Into<Outcome>,
{
    let mut counts: BTreeMap<Outcome, u64> = BTreeMap::new();
    let mut n = 0u64;
    for s in samples {
        *counts.entry(s.into()).or_default() += 1;
        n += 1;
    }
    if n == 0 {
        return Err(Error::SampleSize { needed: 1, got: 0 });
    }
    let rows = counts
        .into_iter()
        .map(|(value, c)| PmfRow {
            value,
            weight: Weight::Exact(BigRational::new(BigInt::from(c), BigInt::from(n))),
        })
        .collect();
    let mut t = PmfTable::new(rows, 0.0);
    t.sample_size = Some(n);
    Ok(t)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChiSquareOptions {
    /// Cells with expected count below this are pooled into a tail cell.
    pub min_expected: f64,
    pub alpha: f64,
    /// Per-cell allowance, as a probability: each cell's deviation is
    /// shrunk by `slack * n` (never below zero) before squaring. Zero gives
    /// the plain Pearson statistic.
    pub slack: f64,
}

impl Default for ChiSquareOptions {
    fn default() -> Self {
        ChiSquareOptions {
            min_expected: 5.0,
            alpha: ALPHA,
            slack: 0.0,
        }
    }
}

/// Pearson chi-square of an empirical table (with sample size) against an
/// exact law. Cells of the exact table with expected count below
/// `min_expected`, the exact table's unlisted mass and any empirical values
/// it does not list form one tail cell; a tail that is still too small is
/// merged into the smallest kept cell.
pub fn chi_square_gof(empirical: &PmfTable, exact: &PmfTable, opts: ChiSquareOptions) -> Result<GofReport> {
    let n = empirical
        .sample_size
        .ok_or_else(|| Error::Validation("empirical table carries no sample size".into()))? as f64;
    let observed = empirical.as_map();
    let mut cells: Vec<(String, f64, f64)> = Vec::new();
    let (mut kept_p, mut kept_o) = (0.0, 0.0);
    for row in &exact.rows {
        let p = row.weight.to_f64();
        if n * p >= opts.min_expected {
            let o = observed.get(&row.value).copied().unwrap_or(0.0) * n;
            cells.push((row.value.to_string(), o, n * p));
            kept_p += p;
            kept_o += o;
        }
    }
    let mut tail = ((n - kept_o).max(0.0), (n * (1.0 - kept_p)).max(0.0));
    if tail.1 < opts.min_expected {
        if cells.is_empty() {
            return Err(Error::DegenerateBinning("every cell was pooled".into()));
        }
        let smallest = (0..cells.len())
            .min_by(|&a, &b| cells[a].2.total_cmp(&cells[b].2))
            .expect("nonempty");
        cells[smallest].0.push_str("+tail");
        cells[smallest].1 += tail.0;
        cells[smallest].2 += tail.1;
        tail = (0.0, 0.0);
    }
    if tail.1 > 0.0 {
        cells.push(("tail".into(), tail.0, tail.1));
    }
    if cells.len() < 2 {
        return Err(Error::DegenerateBinning(format!("{} cell(s) after pooling", cells.len())));
    }
    let stat: f64 = cells
        .iter()
        .map(|(_, o, e)| {
            let d = ((o - e).abs() - opts.slack * n).max(0.0);
            d * d / e
        })
        .sum();
    let dof = cells.len() - 1;
    let p = ChiSquared::new(dof as f64).expect("dof >= 1").sf(stat);
    let bins = cells.iter().map(|c| c.0.as_str()).collect::<Vec<_>>().join(" ");
    Ok(GofReport::new("chi_square", stat, Some(dof), n as usize, p, opts.alpha, bins))
}

/// Asymptotic Kolmogorov tail `P[K > lambda]`.
pub fn kolmogorov_sf(lambda: f64) -> f64 {
    if lambda <= 0.0 {
        return 1.0;
    }
    if lambda < 0.3 {
        // the alternating series converges slowly here; the tail is 1 to
        // double precision for lambda < 0.3
        return 1.0;
    }
    let mut sum = 0.0;
    for k in 1..=100 {
        let kf = k as f64;
        let term = (-2.0 * kf * kf * lambda * lambda).exp();
        sum += if k % 2 == 1 { term } else { -term };
        if term < 1e-17 {
            break;
        }
    }
    (2.0 * sum).clamp(0.0, 1.0)
}

/// One-sample KS statistic and asymptotic p-value (Stephens' small-sample
/// correction of the argument) against a continuous CDF.
pub fn ks_test<F: Fn(f64) -> f64>(samples: &[f64], cdf: F, alpha: f64) -> Result<GofReport> {
    let n = samples.len();
    if n < 50 {
        return Err(Error::SampleSize { needed: 50, got: n });
    }
    let mut xs = samples.to_vec();
    xs.sort_by(f64::total_cmp);
    let nf = n as f64;
    let mut d: f64 = 0.0;
    for (k, &x) in xs.iter().enumerate() {
        let f = cdf(x);
        d = d.max((k + 1) as f64 / nf - f).max(f - k as f64 / nf);
    }
    let sq = nf.sqrt();
    let p = kolmogorov_sf((sq + 0.12 + 0.11 / sq) * d);
    Ok(GofReport::new("ks", d, None, n, p, alpha, String::new()))
}

/// KS test against the standard exponential.
pub fn ks_test_exp1(samples: &[f64], alpha: f64) -> Result<GofReport> {
    if let Some(bad) = samples.iter().find(|&&x| !(x > 0.0)) {
        return Err(Error::Validation(format!("nonpositive sample {bad}")));
    }
    ks_test(samples, |x| -(-x).exp_m1(), alpha).map(|r| r.named("ks_exp1"))
}

pub fn mean_and_var(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let m = xs.iter().sum::<f64>() / n;
    let v = xs.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (n - 1.0);
    (m, v)
}

/// `|statistic - target| < k * se` as a report (`k = 4` by default through
/// [`four_sigma_alpha`]).
pub fn band_check(name: &str, value: f64, target: f64, se: f64, n: usize) -> GofReport {
    let z = if se > 0.0 {
        (value - target).abs() / se
    } else if value == target {
        0.0
    } else {
        f64::INFINITY
    };
    let p = 2.0 * std_normal().cdf(-z);
    GofReport::new(name, z, None, n, p, four_sigma_alpha(), format!("value={value} target={target} se={se}"))
}

/// Sample mean within four standard errors of `target_mean`; optionally the
/// sample variance within four standard errors of `target_var`, using the
/// fourth central moment for its standard error.
pub fn moment_band(samples: &[f64], target_mean: f64, target_var: Option<f64>) -> Result<GofReport> {
    let n = samples.len();
    if n < 100 {
        return Err(Error::SampleSize { needed: 100, got: n });
    }
    let (m, v) = mean_and_var(samples);
    let nf = n as f64;
    let mean_report = band_check("moment_mean", m, target_mean, (v / nf).sqrt(), n);
    let Some(tv) = target_var else {
        return Ok(mean_report.named("moment_band"));
    };
    let m4 = samples.iter().map(|x| (x - m).powi(4)).sum::<f64>() / nf;
    let var_report = band_check("moment_var", v, tv, ((m4 - v * v) / nf).max(0.0).sqrt(), n);
    let worst = if var_report.p_value < mean_report.p_value {
        &var_report
    } else {
        &mean_report
    };
    Ok(GofReport {
        name: "moment_band".into(),
        bins: format!("{}; {}", mean_report.bins, var_report.bins),
        ..worst.clone()
    })
}

/// Lag-one sample autocorrelation.
pub fn lag1_autocorrelation(xs: &[f64]) -> f64 {
    let n = xs.len();
    let m = xs.iter().sum::<f64>() / n as f64;
    let den: f64 = xs.iter().map(|x| (x - m) * (x - m)).sum();
    let num: f64 = xs.windows(2).map(|w| (w[0] - m) * (w[1] - m)).sum();
    num / den
}

/// Counts of `times` in consecutive windows `[from + k w, from + (k+1) w)`
/// fully inside `[from, to)`.
pub fn window_counts(times: &[f64], from: f64, to: f64, width: f64) -> Vec<u64> {
    let k = ((to - from) / width).floor() as usize;
    let mut counts = vec![0u64; k];
    for &t in times {
        if t >= from {
            let idx = ((t - from) / width).floor() as usize;
            if idx < k {
                counts[idx] += 1;
            }
        }
    }
    counts
}

/// Variance-to-mean ratio of window counts and its standard error under a
/// Poisson null, `sqrt(2 / (windows - 1))`.
pub fn dispersion_index(counts: &[u64]) -> Result<(f64, f64)> {
    if counts.len() < 2 {
        return Err(Error::SampleSize { needed: 2, got: counts.len() });
    }
    let xs: Vec<f64> = counts.iter().map(|&c| c as f64).collect();
    let (m, v) = mean_and_var(&xs);
    if m == 0.0 {
        return Err(Error::Validation("all windows are empty".into()));
    }
    Ok((v / m, (2.0 / (counts.len() - 1) as f64).sqrt()))
}
