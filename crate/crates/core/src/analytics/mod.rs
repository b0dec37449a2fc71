//! Closed-form laws and the tables built from them.

pub mod holding;
pub mod laws;
pub mod table;
pub mod zlaw;

use num_rational::BigRational;
use num_traits::{One, ToPrimitive, Zero};

pub use holding::{expected_tc, moments_s, pmf_tc_mixture, sample_level_mixture, sample_s, TcComponent};
pub use laws::{
    joint_i, k_forward_marginals, k_marginal, k_transition, pi_lambda, pmf_l, pmf_li, sample_run_length,
    tail_l,
};
pub use table::{Outcome, PmfRow, PmfTable, Weight};
pub use zlaw::{
    mean_var_z, p_z, pgf_z, pmf_z, table_z, x_k, zeta, PowerSumMethod, SeriesValue, SymmetricSumMethod,
    ZSeries,
};

use crate::{Error, Result};

fn exact_table(rows: Vec<(Outcome, BigRational)>) -> PmfTable {
    let listed = rows.iter().fold(BigRational::zero(), |acc, (_, w)| acc + w);
    let tail = (BigRational::one() - listed).to_f64().unwrap_or(0.0).max(0.0);
    PmfTable::from_pairs(rows, tail)
}

/// `P[L = l]` for `l = 1..=max`.
pub fn table_l(max: u64) -> Result<PmfTable> {
    if max < 1 {
        return Err(Error::Domain("table of L needs max >= 1".into()));
    }
    let rows = (1..=max).map(|l| (Outcome::Int(l), pmf_l(l).unwrap())).collect();
    Ok(exact_table(rows))
}

/// `P[L = l, I = i]` for `l <= max_l`, `i <= max_i`, plus the `(1, inf)` cell.
pub fn table_li(max_l: u64, max_i: u64) -> PmfTable {
    let mut rows = vec![(Outcome::pair(1, None), pmf_li(1, None))];
    for l in 2..=max_l {
        for i in 3..=max_i {
            rows.push((Outcome::pair(l, Some(i)), pmf_li(l, Some(i))));
        }
    }
    exact_table(rows)
}

/// Law of `K^j`.
pub fn table_k(j: u64) -> Result<PmfTable> {
    if j < 2 {
        return Err(Error::Domain("K^j is defined for j >= 2".into()));
    }
    let rows = (1..j).map(|k| (Outcome::Int(k), k_marginal(j, k).unwrap())).collect();
    Ok(exact_table(rows))
}

/// Strictly decreasing particle configurations with leader `<= max_lead`
/// and at most `max_z` particles, the empty configuration first.
pub fn enumerate_configs(max_lead: u64, max_z: usize) -> Vec<Vec<u64>> {
    fn rec(prefix: &mut Vec<u64>, below: u64, max_z: usize, out: &mut Vec<Vec<u64>>) {
        out.push(prefix.clone());
        if prefix.len() == max_z {
            return;
        }
        for l in (2..below).rev() {
            prefix.push(l);
            rec(prefix, l, max_z, out);
            prefix.pop();
        }
    }
    let mut out = Vec::new();
    rec(&mut Vec::new(), max_lead + 1, max_z, &mut out);
    out
}

/// Stationary particle law over [`enumerate_configs`].
pub fn table_pi(max_lead: u64, max_z: usize) -> PmfTable {
    let rows = enumerate_configs(max_lead, max_z)
        .into_iter()
        .map(|c| {
            let w = pi_lambda(&c);
            (Outcome::levels(&c), w)
        })
        .collect();
    exact_table(rows)
}

/// Mixture weights of `T_c` over the level `l` (component `S_{l+1}`).
pub fn table_tc(max: u64) -> PmfTable {
    let (comps, tail) = pmf_tc_mixture(max);
    let rows: Vec<(Outcome, Weight)> = comps
        .into_iter()
        .map(|c| (Outcome::Int(c.level), Weight::Exact(c.weight)))
        .collect();
    PmfTable::from_pairs(rows, tail.to_f64().unwrap_or(0.0))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tables_normalise() {
        assert!(table_l(1000).unwrap().normalization_error() < 1e-12);
        assert!(table_li(30, 60).normalization_error() < 1e-12);
        assert!(table_k(50).unwrap().normalization_error() < 1e-15);
        assert!(table_tc(100).normalization_error() < 1e-12);
        let l5: Vec<String> = table_l(5).unwrap().rows.iter().map(|r| r.weight.render()).collect();
        assert_eq!(l5, ["1/3", "1/6", "1/10", "1/15", "1/21"]);
    }

    #[test]
    fn config_enumeration() {
        let c = enumerate_configs(4, 2);
        assert_eq!(
            c,
            vec![vec![], vec![4], vec![4, 3], vec![4, 2], vec![3], vec![3, 2], vec![2]]
        );
        // Leader <= 12 with Z unrestricted (at most 11 particles) is exactly
        // the event {L <= 12}.
        let full = table_pi(12, 11);
        assert!((full.listed_mass() - (1.0 - 2.0 / 14.0)).abs() < 1e-12);
        // Truncating at Z <= 4 loses at most P[Z > 4].
        let t = table_pi(12, 4);
        let z_tail: f64 = 1.0 - (0..=4).map(pmf_z).sum::<f64>();
        let total = t.listed_mass() + z_tail + 2.0 / 14.0;
        assert!(total <= 1.0 + z_tail && total >= 1.0 - 1e-12, "{total}");
    }
}
