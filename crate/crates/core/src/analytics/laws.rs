//! Rational laws: the level `L` of the active fixation curve, the joint law
//! of `(L, I)`, the `I^k` sequence, the `K` chain and the stationary law of
//! the particle configuration.

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Zero};
use rand::Rng;

use crate::{Error, Result};

pub(crate) fn q(n: u64, d: u64) -> BigRational {
    BigRational::new(BigInt::from(n), BigInt::from(d))
}

fn binomial(n: u64, k: u64) -> BigInt {
    let k = k.min(n - k);
    let mut acc = BigInt::one();
    for m in 0..k {
        acc = acc * BigInt::from(n - m) / BigInt::from(m + 1);
    }
    acc
}

fn factorial(n: u64) -> BigInt {
    (1..=n).fold(BigInt::one(), |acc, m| acc * BigInt::from(m))
}

/// `P[L = l] = 2 / ((l+1)(l+2))`.
pub fn pmf_l(level: u64) -> Result<BigRational> {
    if level < 1 {
        return Err(Error::Domain(format!("L is supported on l >= 1, got {level}")));
    }
    Ok(q(2, (level + 1) * (level + 2)))
}

/// `P[L > l] = 2 / (l+2)`; the exact tail of [`pmf_l`].
pub fn tail_l(level: u64) -> BigRational {
    q(2, level + 2)
}

/// Joint law of `(L, I)`; `i = None` is the infinity marker.
///
/// Returns zero off the support, as the closed form does.
pub fn pmf_li(level: u64, i: Option<u64>) -> BigRational {
    match (level, i) {
        (1, None) => q(1, 3),
        (l, Some(i)) if l >= 2 && i >= 3 => {
            BigRational::new(BigInt::from(l - 1), BigInt::from(3u8) * binomial(l + i, l))
        }
        _ => BigRational::zero(),
    }
}

/// `P[I^2 = i_2, ..., I^l = i_l, I^{l+1} = ... = inf]` for strictly
/// increasing `i_2 < ... < i_l`, all greater than 2. The empty tuple is the
/// all-infinite event.
pub fn joint_i(levels: &[u64]) -> Result<BigRational> {
    if levels.iter().any(|&i| i <= 2) {
        return Err(Error::Domain("I^k values must exceed 2".into()));
    }
    if levels.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::Domain("I^k values must be strictly increasing".into()));
    }
    let l = levels.len() as u64 + 1;
    let mut p = BigRational::new(factorial(l) * factorial(l - 1), BigInt::from(3u8));
    for (offset, &i) in levels.iter().enumerate() {
        let m = offset as u64 + 2;
        p /= BigRational::from_integer(BigInt::from((i + m) * (i + m - 1)));
    }
    Ok(p)
}

/// `P[K^{j+1} = k+1 | K^j = k] = C(k+1,2) / C(j+1,2)` for `j > k >= 1`.
pub fn k_transition(j: u64, k: u64) -> Result<BigRational> {
    if k < 1 || j <= k {
        return Err(Error::Domain(format!("K transition needs j > k >= 1, got j={j}, k={k}")));
    }
    Ok(q((k + 1) * k, (j + 1) * j))
}

/// `P[K^j = k] = (j+1)/(j-1) * 2/((k+1)(k+2))` for `j > k >= 1`.
pub fn k_marginal(j: u64, k: u64) -> Result<BigRational> {
    if k < 1 || j <= k {
        return Err(Error::Domain(format!("K marginal needs j > k >= 1, got j={j}, k={k}")));
    }
    Ok(q(j + 1, j - 1) * q(2, (k + 1) * (k + 2)))
}

/// Laws of `K^2, ..., K^{j_max}` obtained by pushing `K^2 = 1` through the
/// transition kernel. Entry `j` holds `P[K^j = k]` at index `k - 1`.
pub fn k_forward_marginals(j_max: u64) -> Vec<Vec<BigRational>> {
    let mut out = vec![Vec::new(), Vec::new(), vec![BigRational::one()]];
    for j in 2..j_max {
        let prev = &out[j as usize];
        let mut next = vec![BigRational::zero(); j as usize];
        for (idx, p) in prev.iter().enumerate() {
            let k = idx as u64 + 1;
            let up = q((k + 1) * k, (j + 1) * j);
            next[idx] += p * (BigRational::one() - &up);
            next[idx + 1] += p * up;
        }
        out.push(next);
    }
    out
}

/// Stationary weight of a particle configuration.
///
/// `levels` lists the active prefix; trailing 1s are accepted. Any
/// configuration that is not strictly decreasing over its active prefix has
/// weight zero.
pub fn pi_lambda(levels: &[u64]) -> BigRational {
    let active = levels.iter().take_while(|&&l| l > 1).count();
    if levels[active..].iter().any(|&l| l != 1) {
        return BigRational::zero();
    }
    let prefix = &levels[..active];
    if prefix.windows(2).any(|w| w[0] <= w[1]) {
        return BigRational::zero();
    }
    prefix.iter().fold(q(1, 3), |acc, &l| acc * q(2, (l + 2) * (l - 1)))
}

/// Draws from `P[R = l] = 2/((l+1)(l+2))`, optionally conditioned on
/// `R < bound` (`bound >= 2`).
pub fn sample_run_length<R: Rng + ?Sized>(rng: &mut R, bound: Option<u64>) -> u64 {
    // P[R > r] = 2/(r+2), so R = ceil(2/U - 2) for U uniform on (0, 1];
    // conditioning on R <= bound - 1 restricts U to [2/(bound+1), 1).
    let lo = bound.map_or(0.0, |b| 2.0 / (b as f64 + 1.0));
    let u = lo + (1.0 - lo) * (1.0 - rng.random::<f64>());
    let raw = (2.0 / u - 2.0).ceil();
    let r = if raw < 1.0 { 1 } else if raw >= 1.8e19 { u64::MAX } else { raw as u64 };
    match bound {
        Some(b) => r.clamp(1, b - 1),
        None => r,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn level_law_values() {
        assert_eq!(pmf_l(1).unwrap(), q(1, 3));
        assert_eq!(pmf_l(2).unwrap(), q(1, 6));
        assert_eq!(pmf_l(5).unwrap(), q(2, 42));
        assert!(pmf_l(0).is_err());
        // telescoping: sum_{l<=n} + tail = 1 exactly
        let n = 200;
        let s = (1..=n).fold(BigRational::zero(), |acc, l| acc + pmf_l(l).unwrap());
        assert_eq!(s + tail_l(n), BigRational::one());
    }

    #[test]
    fn joint_level_and_index() {
        assert_eq!(pmf_li(2, Some(3)), q(1, 30));
        assert_eq!(pmf_li(3, Some(3)), q(1, 30));
        assert_eq!(pmf_li(1, None), q(1, 3));
        assert!(pmf_li(1, Some(4)).is_zero());
        assert!(pmf_li(2, Some(2)).is_zero());
        assert!(pmf_li(2, None).is_zero());
    }

    #[test]
    fn li_marginal_over_i_is_level_law() {
        // Oracle: 1/C(l+i,l) = l!/((i+1)...(i+l)) telescopes, so the tail
        // beyond i = n is (l-1)/3 * l!/((l-1)(n+2)...(n+l)), exactly.
        let n = 300u64;
        for l in 2..9u64 {
            let partial = (3..=n).fold(BigRational::zero(), |acc, i| acc + pmf_li(l, Some(i)));
            let fall = (2..=l).fold(BigInt::one(), |acc, m| acc * BigInt::from(n + m));
            let tail = BigRational::new(factorial(l), BigInt::from(3u8) * fall);
            assert_eq!(partial + tail, pmf_l(l).unwrap(), "l={l}");
        }
    }

    #[test]
    fn joint_i_values_and_marginals() {
        assert_eq!(joint_i(&[]).unwrap(), q(1, 3));
        assert_eq!(joint_i(&[3]).unwrap(), q(1, 30));
        assert!(joint_i(&[4, 4]).is_err());
        assert!(joint_i(&[2]).is_err());
        // sum over i_3 > i_2 of P[I^2=i_2, I^3=i_3, I^4=inf] equals
        // P[L=3, I=i_2]; the i_3 factor 1/((i+3)(i+2)) telescopes to a tail
        // 1/(n+3) beyond n
        let n = 400u64;
        for i2 in 3..9u64 {
            let partial = (i2 + 1..=n).fold(BigRational::zero(), |acc, i3| acc + joint_i(&[i2, i3]).unwrap());
            let tail = joint_i(&[i2]).unwrap() * q(3 * 2, 1) * q(1, n + 3);
            assert_eq!(partial + tail, pmf_li(3, Some(i2)), "i2={i2}");
        }
    }

    #[test]
    fn k_chain() {
        assert_eq!(k_transition(2, 1).unwrap(), q(1, 3));
        assert!(k_transition(2, 2).is_err());
        assert_eq!(k_marginal(3, 1).unwrap(), q(2, 3));
        assert_eq!(k_marginal(3, 2).unwrap(), q(1, 3));
        let fwd = k_forward_marginals(30);
        for j in 2..30u64 {
            for k in 1..j {
                assert_eq!(fwd[j as usize][(k - 1) as usize], k_marginal(j, k).unwrap());
            }
        }
        let far = num_traits::ToPrimitive::to_f64(&k_marginal(1_000_000, 4).unwrap()).unwrap();
        let lim = num_traits::ToPrimitive::to_f64(&pmf_l(4).unwrap()).unwrap();
        assert!((far - lim).abs() < 1e-6 * lim * 3.0);
    }

    #[test]
    fn stationary_particle_law() {
        assert_eq!(pi_lambda(&[]), q(1, 3));
        assert_eq!(pi_lambda(&[1, 1]), q(1, 3));
        assert_eq!(pi_lambda(&[3, 2]), q(1, 30));
        assert!(pi_lambda(&[2, 3]).is_zero());
        assert!(pi_lambda(&[3, 3]).is_zero());
        assert!(pi_lambda(&[3, 1, 2]).is_zero());
        // summing out the lower particles of a leader at l reproduces P[L=l]
        for lead in 2..7u64 {
            let mut total = BigRational::zero();
            let below: Vec<u64> = (2..lead).collect();
            for mask in 0u32..(1 << below.len()) {
                let mut cfg = vec![lead];
                cfg.extend(below.iter().rev().enumerate().filter(|(b, _)| mask >> b & 1 == 1).map(|(_, &l)| l));
                cfg[1..].sort_unstable_by(|a, b| b.cmp(a));
                total += pi_lambda(&cfg);
            }
            assert_eq!(total, pmf_l(lead).unwrap(), "leader {lead}");
        }
    }

    #[test]
    fn run_length_sampler_matches_law() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let n = 200_000;
        let mut counts = [0u64; 6];
        let mut cond = [0u64; 6];
        for _ in 0..n {
            let r = sample_run_length(&mut rng, None);
            if r <= 5 {
                counts[r as usize] += 1;
            }
            let c = sample_run_length(&mut rng, Some(5));
            assert!((1..5).contains(&c));
            cond[c as usize] += 1;
        }
        for l in 1..=5u64 {
            let p = 2.0 / ((l + 1) as f64 * (l + 2) as f64);
            let se = (p * (1.0 - p) / n as f64).sqrt();
            assert!((counts[l as usize] as f64 / n as f64 - p).abs() < 4.0 * se);
        }
        // conditioned on R < 5: normaliser (5-1)/(5+1)
        for l in 1..5u64 {
            let p = 2.0 / ((l + 1) as f64 * (l + 2) as f64) / (4.0 / 6.0);
            let se = (p * (1.0 - p) / n as f64).sqrt();
            assert!((cond[l as usize] as f64 / n as f64 - p).abs() < 4.0 * se);
        }
    }
}
