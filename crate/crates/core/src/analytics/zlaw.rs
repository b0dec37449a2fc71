//! Law of `Z`, the number of fixation curves alive at a fixed time.
//!
//! `P[Z = z] = 2^z / 3 * p_z` where `p_z` is the elementary symmetric sum of
//! order `z` of `f(l) = 1/((l+2)(l-1))`, `l >= 2`. The power sums
//! `x_k = sum f(l)^k` are available both by direct summation and in closed
//! form through `zeta`; `p_z` both by Newton's recursion and by summation
//! over integer partitions of `z`.

use std::f64::consts::PI;
use std::sync::OnceLock;

use num_rational::BigRational;
use serde::Serialize;

use super::laws::q;
use super::table::{Outcome, PmfTable, Weight};
use crate::{Error, Result};

/// Largest `z` accepted by the partition route.
pub const PARTITION_CAP: u32 = 30;

const ZETA_CUTOFF: u64 = 32;
// B_2, B_4, B_6, B_8 divided by (2k)!
const EM_COEFFS: [f64; 4] = [
    1.0 / 12.0,
    -1.0 / 720.0,
    1.0 / 30240.0,
    -1.0 / 1209600.0,
];

/// Riemann zeta at an integer `s >= 2`.
///
/// Direct summation below a cutoff plus the Euler-Maclaurin tail through the
/// `B_8` term; the neglected remainder is below `1e-16` for every `s >= 2`.
pub fn zeta(s: u32) -> Result<f64> {
    if s < 2 {
        return Err(Error::Domain(format!("zeta needs s >= 2, got {s}")));
    }
    let sf = s as f64;
    let n = ZETA_CUTOFF as f64;
    let mut head = 0.0;
    for m in (1..ZETA_CUTOFF).rev() {
        head += (m as f64).powi(-(s as i32));
    }
    let mut tail = n.powf(1.0 - sf) / (sf - 1.0) + 0.5 * n.powf(-sf);
    // rising factorial s (s+1) ... (s+2k-2)
    let mut rising = sf;
    for (k, c) in EM_COEFFS.iter().enumerate() {
        let order = 2 * k as i32 + 1;
        tail += c * rising * n.powf(-sf - order as f64);
        rising *= (sf + order as f64) * (sf + order as f64 + 1.0);
    }
    Ok(head + tail)
}

/// `b_j = 1 + 2^-j + 3^-j`.
pub fn b_coefficient(j: u32) -> f64 {
    1.0 + 0.5f64.powi(j as i32) + (1.0 / 3.0f64).powi(j as i32)
}

/// `f(l) = 1/((l+2)(l-1))`.
#[inline]
pub fn f_weight(level: u64) -> f64 {
    let l = level as f64;
    1.0 / ((l + 2.0) * (l - 1.0))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PowerSumMethod {
    Series,
    ClosedForm,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SymmetricSumMethod {
    Recursion,
    Partition,
}

/// Value of a truncated series together with a bound on what was left out.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SeriesValue {
    pub value: f64,
    pub tail_bound: f64,
    pub terms: u64,
}

/// `x_k` by direct summation of `f(l)^k`.
///
/// For `k = 1` the series telescopes and its remainder is added exactly; for
/// `k >= 2` the sum stops once `1/((2k-1)(L-1)^(2k-1)) < 1e-12`.
pub fn x_series(k: u32) -> Result<SeriesValue> {
    if k < 1 {
        return Err(Error::Domain("x_k needs k >= 1".into()));
    }
    let target = 1e-12;
    let e = 2 * k as i32 - 1;
    let (last, tail_exact, bound) = if k == 1 {
        let last = 1_000_000u64;
        let lf = last as f64;
        (last, (1.0 / lf + 1.0 / (lf + 1.0) + 1.0 / (lf + 2.0)) / 3.0, 0.0)
    } else {
        let mut last = 8u64;
        let bound = |l: u64| 1.0 / (e as f64 * ((l - 1) as f64).powi(e));
        while bound(last) >= target {
            last *= 2;
        }
        (last, 0.0, bound(last))
    };
    let mut acc = tail_exact;
    for l in (2..=last).rev() {
        acc += f_weight(l).powi(k as i32);
    }
    Ok(SeriesValue {
        value: acc,
        tail_bound: bound,
        terms: last - 1,
    })
}

/// `x_k` through `zeta` and `b_j`.
pub fn x_closed_form(k: u32) -> Result<f64> {
    if k < 1 {
        return Err(Error::Domain("x_k needs k >= 1".into()));
    }
    let mut acc = 0.0;
    for j in 1..=k {
        let mut term = b_coefficient(j);
        if j % 2 == 0 {
            term -= 2.0 * zeta(j)?;
        }
        acc += binomial_f64(2 * k - j - 1, k - j) * 3f64.powi(j as i32 - 1) * term;
    }
    let sign = if k % 2 == 1 { 1.0 } else { -1.0 };
    Ok(sign * acc / 3f64.powi(2 * k as i32 - 1))
}

pub fn x_k(k: u32, method: PowerSumMethod) -> Result<f64> {
    match method {
        PowerSumMethod::Series => x_series(k).map(|s| s.value),
        PowerSumMethod::ClosedForm => x_closed_form(k),
    }
}

fn binomial_f64(n: u32, k: u32) -> f64 {
    (0..k).fold(1.0, |acc, m| acc * (n - m) as f64 / (m + 1) as f64)
}

/// Cached `x_k` and `p_z` for the `Z` law.
///
/// `p_z` here comes from the positive-term product expansion of
/// `prod (1 + u f(l))`: an exact dynamic programme over `l <= HEAD`, then
/// convolution with the symmetric sums of the tail `l > HEAD`, whose power
/// sums are tiny so Newton's identities are stable there. Unlike the
/// alternating recursion this keeps full relative precision for large `z`.
#[derive(Debug, Clone)]
pub struct ZSeries {
    x: Vec<f64>,
    p: Vec<f64>,
}

const HEAD: u64 = 100_000;

impl ZSeries {
    pub fn new(max: u32) -> Self {
        let max = max.max(1);
        let x: Vec<f64> = (1..=max).map(|k| x_closed_form(k).expect("k >= 1")).collect();
        let zmax = max as usize;
        let mut head = vec![0.0; zmax + 1];
        head[0] = 1.0;
        for l in (2..=HEAD).rev() {
            let f = f_weight(l);
            for z in (1..=zmax).rev() {
                head[z] += f * head[z - 1];
            }
        }
        let tail = newton_recursion(&tail_power_sums(zmax), zmax);
        let p = (0..=zmax)
            .map(|z| (0..=z).rev().map(|j| head[z - j] * tail[j]).sum())
            .collect();
        ZSeries { x, p }
    }

    pub fn x(&self, k: u32) -> f64 {
        self.x[k as usize - 1]
    }

    pub fn p(&self, z: u32) -> f64 {
        self.p[z as usize]
    }

    pub fn max(&self) -> u32 {
        self.p.len() as u32 - 1
    }

    pub fn pmf(&self, z: u32) -> f64 {
        2f64.powi(z as i32) / 3.0 * self.p(z)
    }
}

/// Power sums of `f(l)` over `l > HEAD`. The first is exact by telescoping;
/// the next few are summed directly, higher ones are below `1e-40` and set
/// to zero.
fn tail_power_sums(kmax: usize) -> Vec<f64> {
    let h = HEAD as f64;
    let mut out = vec![0.0; kmax];
    out[0] = (1.0 / h + 1.0 / (h + 1.0) + 1.0 / (h + 2.0)) / 3.0;
    let far = 64 * HEAD;
    for (k, slot) in out.iter_mut().enumerate().take(kmax.min(4)).skip(1) {
        let e = 2 * k as i32 + 1;
        let mut acc = 1.0 / (e as f64 * (far as f64).powi(e));
        for l in (HEAD + 1..=far).rev() {
            acc += f_weight(l).powi(k as i32 + 1);
        }
        *slot = acc;
    }
    out
}

fn memo() -> &'static ZSeries {
    static MEMO: OnceLock<ZSeries> = OnceLock::new();
    MEMO.get_or_init(|| ZSeries::new(MEMO_MAX))
}

const MEMO_MAX: u32 = 64;

/// `p_z = (1/z) sum_{j=1}^{z} (-1)^{j-1} p_{z-j} x_j`, `p_0 = 1`.
fn newton_recursion(x: &[f64], max: usize) -> Vec<f64> {
    let mut p = vec![1.0];
    for z in 1..=max {
        let mut acc = 0.0;
        for j in 1..=z {
            let sign = if j % 2 == 1 { 1.0 } else { -1.0 };
            acc += sign * p[z - j] * x[j - 1];
        }
        p.push(acc / z as f64);
    }
    p
}

/// All partitions of `n`, each as a non-decreasing list of parts.
pub fn partitions(n: u32) -> Vec<Vec<u32>> {
    // Kelleher's ascending-composition generator.
    let mut out = Vec::new();
    if n == 0 {
        out.push(Vec::new());
        return out;
    }
    let n = n as usize;
    let mut a = vec![0u32; n + 1];
    let mut k = 1usize;
    a[1] = n as u32;
    while k != 0 {
        let mut y = a[k] - 1;
        k -= 1;
        let x = a[k] + 1;
        while x <= y {
            a[k] = x;
            y -= x;
            k += 1;
        }
        a[k] = x + y;
        out.push(a[..=k].to_vec());
    }
    out
}

fn partition_sum(x: &[f64], z: u32) -> f64 {
    let mut total = 0.0;
    for parts in partitions(z) {
        let mut mult = vec![0u32; z as usize + 1];
        for &p in &parts {
            mult[p as usize] += 1;
        }
        let count: u32 = mult.iter().sum();
        let mut term = if (z + count) % 2 == 0 { 1.0 } else { -1.0 };
        for (j, &a) in mult.iter().enumerate().skip(1) {
            if a == 0 {
                continue;
            }
            let base = x[j - 1] / j as f64;
            term *= base.powi(a as i32) / (1..=a).map(f64::from).product::<f64>();
        }
        total += term;
    }
    total
}

pub fn p_z(z: u32, method: SymmetricSumMethod) -> Result<f64> {
    let x: Vec<f64> = (1..=z.max(1)).map(x_closed_form).collect::<Result<_>>()?;
    match method {
        SymmetricSumMethod::Recursion => Ok(newton_recursion(&x, z as usize)[z as usize]),
        SymmetricSumMethod::Partition => {
            if z > PARTITION_CAP {
                return Err(Error::Domain(format!(
                    "partition route is capped at z = {PARTITION_CAP}"
                )));
            }
            Ok(partition_sum(&x, z))
        }
    }
}

/// `P[Z = z]`.
pub fn pmf_z(z: u32) -> f64 {
    if z <= MEMO_MAX {
        memo().pmf(z)
    } else {
        ZSeries::new(z).pmf(z)
    }
}

/// Probability generating function of `Z` on `[0, 1]`, from the product
/// representation.
pub fn pgf_z(u: f64) -> Result<SeriesValue> {
    if !(0.0..=1.0).contains(&u) {
        return Err(Error::Domain(format!("pgf is evaluated on [0, 1], got {u}")));
    }
    let last = 10_000u64;
    let mut log_sum = 0.0;
    for i in (2..=last).rev() {
        log_sum += (2.0 * u * f_weight(i)).ln_1p();
    }
    // log(1+y) lies in [y - y^2/2, y]; with y = 2u f(i) the tail sits between
    // 2u t1 - 2u^2 t2 and 2u t1, where t1 = sum f(i) telescopes and
    // t2 = sum f(i)^2 <= 1/(3 (last-1)^3).
    let lf = last as f64;
    let t1 = (1.0 / lf + 1.0 / (lf + 1.0) + 1.0 / (lf + 2.0)) / 3.0;
    let t2 = 1.0 / (3.0 * (lf - 1.0).powi(3));
    log_sum += 2.0 * u * t1 - u * u * t2;
    let bound = u * u * t2;
    let value = log_sum.exp() / 3.0;
    Ok(SeriesValue {
        value,
        tail_bound: value * bound * 1.01,
        terms: last - 1,
    })
}

/// `(E[Z], Var[Z]) = (1, 14 - 4 pi^2 / 3)`.
pub fn mean_var_z() -> (f64, f64) {
    (1.0, 14.0 - 4.0 * PI * PI / 3.0)
}

/// Table of `P[Z = z]` for `z <= max`. The first two weights are rational
/// (`x_1 = 11/18`), the rest involve `zeta` and are floats.
pub fn table_z(max: u32) -> PmfTable {
    let series = if max <= MEMO_MAX { memo().clone() } else { ZSeries::new(max) };
    let mut rows: Vec<(Outcome, Weight)> = Vec::new();
    let mut listed = 0.0;
    for z in 0..=max {
        let w = match z {
            0 => Weight::Exact(q(1, 3)),
            1 => Weight::Exact(q(2, 3) * x1_exact()),
            _ => Weight::Float(series.pmf(z)),
        };
        listed += w.to_f64();
        rows.push((Outcome::Int(z as u64), w));
    }
    PmfTable::from_pairs(rows, (1.0 - listed).max(0.0))
}

/// `x_1 = b_1 / 3 = 11/18`.
pub fn x1_exact() -> BigRational {
    (q(1, 1) + q(1, 2) + q(1, 3)) / q(3, 1)
}
