//! Holding times of Kingman's coalescent: `T_k ~ Exp(C(k,2))` and the sums
//! `S_i = sum_{k>i} T_k`, the time to go from infinitely many lineages down
//! to `i`.

use std::f64::consts::PI;

use num_rational::BigRational;
use rand::Rng;
use rand_distr::Exp1;
use serde::Serialize;

use super::laws::{pmf_l, q};
use crate::{choose2, Error, Result};

/// Last exact exponential drawn by [`sample_s`]; the remainder beyond it has
/// variance below `1e-8` and is replaced by its mean.
pub const S_TRUNCATION: u64 = truncation_level(1e-8);

const fn truncation_level(var_bound: f64) -> u64 {
    // Var(sum_{k>K} T_k) <= sum_{k>K} 4/(k-1)^4 <= 4/(3 (K-1)^3)
    let mut k = 3u64;
    loop {
        let m = (k - 1) as f64;
        if 4.0 / (3.0 * m * m * m) < var_bound {
            return k;
        }
        k += 1;
    }
}

fn inv_square_sum(n: u64) -> f64 {
    (1..=n).rev().map(|k| 1.0 / (k as f64 * k as f64)).sum()
}

/// `(E[S_i], Var[S_i])` with `E = 2/i` and
/// `Var = 4 (2 zeta(2) - H2(i-1) - H2(i)) - 8/i`, `H2(n) = sum_{k<=n} 1/k^2`.
pub fn moments_s(i: u64) -> Result<(f64, f64)> {
    if i < 1 {
        return Err(Error::Domain("S_i needs i >= 1".into()));
    }
    let z2 = PI * PI / 6.0;
    let h_prev = inv_square_sum(i - 1);
    let h = h_prev + 1.0 / (i as f64 * i as f64);
    let var = 4.0 * ((z2 - h_prev) + (z2 - h)) - 8.0 / i as f64;
    Ok((2.0 / i as f64, var))
}

/// One draw of `S_i`.
pub fn sample_s<R: Rng + ?Sized>(i: u64, rng: &mut R) -> Result<f64> {
    if i < 1 {
        return Err(Error::Domain("S_i needs i >= 1".into()));
    }
    let last = S_TRUNCATION.max(i);
    let mut acc = 0.0;
    for k in (i + 1)..=last {
        let e: f64 = rng.sample(Exp1);
        acc += e / choose2(k);
    }
    Ok(acc + 2.0 / last as f64)
}

/// Draw from `sum_l P[L = l] law(S_l)`, which is the standard exponential.
pub fn sample_level_mixture<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    let l = super::laws::sample_run_length(rng, None);
    sample_s(l, rng).expect("level >= 1")
}

/// `E[T_c] = 2 pi^2 / 3 - 6`.
pub fn expected_tc() -> f64 {
    2.0 * PI * PI / 3.0 - 6.0
}

/// One component of the law of `T_c`: with probability `weight`, `T_c` is
/// distributed as `S_{start}` where `start = level + 1`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TcComponent {
    pub level: u64,
    #[serde(serialize_with = "ser_ratio")]
    pub weight: BigRational,
    pub start: u64,
    pub component_mean: f64,
    pub component_var: f64,
}

fn ser_ratio<S: serde::Serializer>(r: &BigRational, s: S) -> std::result::Result<S::Ok, S::Error> {
    s.collect_str(&format_args!("{}/{}", r.numer(), r.denom()))
}

/// Mixture description of `T_c` for levels `1..=max`; the weight left out is
/// `2/(max+2)`.
pub fn pmf_tc_mixture(max: u64) -> (Vec<TcComponent>, BigRational) {
    let comps = (1..=max.max(1))
        .map(|l| {
            let (m, v) = moments_s(l + 1).expect("l+1 >= 2");
            TcComponent {
                level: l,
                weight: pmf_l(l).expect("l >= 1"),
                start: l + 1,
                component_mean: m,
                component_var: v,
            }
        })
        .collect();
    (comps, q(2, max.max(1) + 2))
}
