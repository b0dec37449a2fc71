//! Neutral mutations on the MRCA line.
//!
//! Mutations hit every level at rate `theta/2`. One becomes a substitution
//! exactly when it sits on the ancestral line between two consecutive MRCA
//! birth times, so the substitutions fixed at the MRCA change `E''` number
//! `Poisson(theta/2 * (B'' - B'))`.

use rand::Rng;
use rand_distr::{Distribution, Poisson};
use serde::{Deserialize, Serialize};

use crate::analytics::{expected_tc, sample_run_length, sample_s};
use crate::lookdown::MrcaPair;
use crate::stats;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MutationConfig {
    pub theta: f64,
    pub seed: u64,
}

impl MutationConfig {
    pub fn new(theta: f64, seed: u64) -> Result<Self> {
        let c = MutationConfig { theta, seed };
        c.validate()?;
        Ok(c)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.theta.is_finite() && self.theta > 0.0) {
            return Err(Error::Config(format!("theta = {} must be positive", self.theta)));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SubstitutionEvent {
    #[serde(rename = "E")]
    pub e: f64,
    #[serde(rename = "S")]
    pub s: u64,
}

/// Substitution counts at each MRCA change after the first. The first pair
/// only opens the first gap and never carries an event.
pub fn simulate_substitutions<R: Rng + ?Sized>(
    pairs: &[MrcaPair],
    config: &MutationConfig,
    rng: &mut R,
) -> Result<Vec<SubstitutionEvent>> {
    config.validate()?;
    if pairs.len() < 2 {
        return Err(Error::SampleSize {
            needed: 2,
            got: pairs.len(),
        });
    }
    if let Some(w) = pairs.windows(2).find(|w| !(w[0].e < w[1].e && w[0].b < w[1].b)) {
        return Err(Error::Validation(format!(
            "pairs not sorted by E with increasing B: {:?} then {:?}",
            w[0], w[1]
        )));
    }
    if let Some(p) = pairs.iter().find(|p| !(p.b < p.e)) {
        return Err(Error::Validation(format!("birth not before exit in {p:?}")));
    }
    let half = config.theta / 2.0;
    let mut out = Vec::new();
    for w in pairs.windows(2) {
        let mean = half * (w[1].b - w[0].b);
        let s = Poisson::new(mean)
            .map_err(|e| Error::Domain(format!("Poisson mean {mean}: {e}")))?
            .sample(rng) as u64;
        if s > 0 {
            out.push(SubstitutionEvent { e: w[1].e, s });
        }
    }
    Ok(out)
}

/// Substitutions per unit time expected over the B-span of `pairs`, and its
/// standard error for the realised total, `sqrt((theta/2) / span)`.
pub fn expected_substitution_rate(theta: f64, pairs: &[MrcaPair]) -> (f64, f64) {
    let span = pairs.last().map_or(0.0, |p| p.b) - pairs.first().map_or(0.0, |p| p.b);
    (theta / 2.0, (theta / 2.0 / span).sqrt())
}

/// Coalescence time of two lines sampled right at an MRCA change: the MRCA
/// line level `l` is drawn from `2/((l+1)(l+2))`, then `S_{l+1}`.
pub fn sample_tc<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    let l = sample_run_length(rng, None);
    sample_s(l.saturating_add(1), rng).expect("level >= 2")
}

/// `theta * E[T_c]`: mean number of segregating sites in a sample of two at
/// an MRCA change (`theta` in equilibrium).
pub fn expected_segregating_sites_at_change(theta: f64) -> f64 {
    theta * expected_tc()
}

/// Variance-to-mean ratio of the number of substitutions (each event
/// weighted by its count `S`) in disjoint windows of `window` between the
/// first and last event. Counting events alone hides the clustering: the
/// thinned change times are in fact underdispersed.
pub fn dispersion_of_substitution_times(events: &[SubstitutionEvent], window: f64) -> Result<f64> {
    if events.len() < 100 {
        return Err(Error::SampleSize {
            needed: 100,
            got: events.len(),
        });
    }
    if !(window > 0.0) {
        return Err(Error::Domain(format!("window {window} must be positive")));
    }
    let from = events[0].e;
    let k = ((events[events.len() - 1].e - from) / window).floor() as usize;
    if k < 2 {
        return Err(Error::SampleSize { needed: 2, got: k });
    }
    let mut counts = vec![0.0; k];
    for ev in events {
        let idx = ((ev.e - from) / window).floor() as usize;
        if idx < k {
            counts[idx] += ev.s as f64;
        }
    }
    let (m, v) = stats::mean_and_var(&counts);
    Ok(v / m)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::particles::{simulate_with, ParticleSimConfig};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::Exp;

    fn particle_pairs(horizon: f64, seed: u64) -> Vec<MrcaPair> {
        let mut c = ParticleSimConfig::new(horizon, seed);
        c.particle_cap = 1000;
        simulate_with(&c, &mut ()).unwrap().pairs
    }

    #[test]
    fn validation() {
        let c = MutationConfig::new(1.0, 0).unwrap();
        assert!(MutationConfig::new(0.0, 0).is_err());
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let p = |e, b| MrcaPair { e, b };
        assert!(simulate_substitutions(&[p(2.0, 1.0)], &c, &mut rng).is_err());
        assert!(simulate_substitutions(&[p(3.0, 1.0), p(2.0, 1.5)], &c, &mut rng).is_err());
        assert!(simulate_substitutions(&[p(2.0, 1.5), p(3.0, 1.0)], &c, &mut rng).is_err());
        assert!(simulate_substitutions(&[p(2.0, 1.0), p(3.0, 1.5)], &c, &mut rng).is_ok());
    }

    #[test]
    fn tiny_theta_gives_nothing() {
        let pairs = particle_pairs(500.0, 1);
        let c = MutationConfig::new(1e-9, 2).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        assert!(simulate_substitutions(&pairs, &c, &mut rng).unwrap().is_empty());
    }

    #[test]
    fn mass_rate_and_clustering() {
        let pairs = particle_pairs(12_000.0, 3);
        assert!(pairs.len() > 10_000);
        let c = MutationConfig::new(2.0, 3).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let subs = simulate_substitutions(&pairs, &c, &mut rng).unwrap();
        let total: u64 = subs.iter().map(|s| s.s).sum();
        let span = pairs.last().unwrap().b - pairs[0].b;
        let (rate, se) = expected_substitution_rate(2.0, &pairs);
        assert!((total as f64 / span - rate).abs() < 4.0 * se);
        let mean_s = total as f64 / subs.len() as f64;
        assert!(mean_s > 1.0);
        assert!((subs.len() as f64 / span) < 1.0);
        let es: Vec<f64> = pairs.iter().map(|p| p.e).collect();
        assert!(subs.iter().all(|s| es.binary_search_by(|x| x.total_cmp(&s.e)).is_ok()));
        let d = dispersion_of_substitution_times(&subs, 5.0).unwrap();
        let windows = ((subs.last().unwrap().e - subs[0].e) / 5.0).floor();
        assert!(d - 1.0 > 4.0 * (2.0 / (windows - 1.0)).sqrt(), "{d}");
    }

    #[test]
    fn dispersion_of_poisson_stream() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let e1 = Exp::new(1.0).unwrap();
        let mut t = 0.0;
        let events: Vec<SubstitutionEvent> = (0..50_000)
            .map(|_| {
                t += e1.sample(&mut rng);
                SubstitutionEvent { e: t, s: 1 }
            })
            .collect();
        let d = dispersion_of_substitution_times(&events, 2.0).unwrap();
        let n = ((events.last().unwrap().e - events[0].e) / 2.0).floor();
        assert!((d - 1.0).abs() < 4.0 * (2.0 / n).sqrt(), "{d}");
        // tiny windows: counts are nearly Bernoulli
        let d = dispersion_of_substitution_times(&events, 1e-3).unwrap();
        assert!((d - 1.0).abs() < 0.01);
        assert!(dispersion_of_substitution_times(&events[..10], 1.0).is_err());
    }

    #[test]
    fn tc_draws() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let n = 100_000;
        let xs: Vec<f64> = (0..n).map(|_| sample_tc(&mut rng)).collect();
        assert!(xs.iter().all(|&x| x > 0.0));
        let (m, v) = stats::mean_and_var(&xs);
        assert!((expected_tc() - 0.5797).abs() < 1e-4);
        assert!((m - expected_tc()).abs() < 3.0 * (v / n as f64).sqrt(), "{m}");
        assert!((expected_segregating_sites_at_change(1.0) - 0.58).abs() < 0.01);
    }
}
