use mrca_core::particles::{sample_stationary, step, ParticleConfig, TransitionKind};
use mrca_core::stats::{dispersion_index, kolmogorov_sf, lag1_autocorrelation, window_counts};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

proptest! {
    #[test]
    fn steps_keep_levels_strictly_decreasing(seed in any::<u64>(), cap in 3u64..200, n in 1usize..400) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut state = ParticleConfig::empty();
        let mut now = 0.0;
        for _ in 0..n {
            let before = state.z();
            let (next, ev) = step(&state, now, cap, &mut rng);
            prop_assert!(ev.time > now);
            prop_assert!(next.levels().windows(2).all(|w| w[0] > w[1]));
            prop_assert!(next.levels().iter().all(|&l| l >= 2 && l <= cap));
            match ev.kind {
                TransitionKind::Arrival => prop_assert_eq!(next.z(), before + 1),
                TransitionKind::Push { .. } => prop_assert_eq!(next.z(), before),
                TransitionKind::Exit { .. } => prop_assert!(next.z() <= before),
            }
            prop_assert_eq!(ev.levels.clone(), next.clone());
            now = ev.time;
            state = next;
        }
    }

    #[test]
    fn rates_sum_to_total(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let c = sample_stationary(&mut rng);
        let sum: f64 = c.rates().iter().sum();
        prop_assert!((sum - c.total_rate()).abs() <= 1e-9 * c.total_rate());
        prop_assert!(c.rates().iter().all(|&r| r > 0.0));
    }

    #[test]
    fn config_rejects_bad_levels(mut v in proptest::collection::vec(2u64..50, 1..8)) {
        v.sort_unstable_by(|a, b| b.cmp(a));
        v.dedup();
        prop_assert!(ParticleConfig::new(v.clone()).is_ok());
        let mut padded = v.clone();
        padded.extend([1, 1]);
        let trimmed = ParticleConfig::new(padded).unwrap();
        prop_assert_eq!(trimmed.levels(), &v[..]);
        let mut rev = v.clone();
        rev.reverse();
        prop_assert_eq!(ParticleConfig::new(rev).is_ok(), v.len() == 1);
    }

    #[test]
    fn window_counts_cover_every_time(times in proptest::collection::vec(0.0f64..100.0, 0..300), width in 0.5f64..20.0) {
        let counts = window_counts(&times, 0.0, 100.0, width);
        let k = (100.0 / width).floor() as usize;
        prop_assert_eq!(counts.len(), k);
        let inside = times.iter().filter(|&&t| t < k as f64 * width).count() as u64;
        prop_assert_eq!(counts.iter().sum::<u64>(), inside);
    }

    #[test]
    fn kolmogorov_tail_is_a_survival_function(a in 0.0f64..3.0, b in 0.0f64..3.0) {
        let (lo, hi) = if a < b { (a, b) } else { (b, a) };
        prop_assert!(kolmogorov_sf(lo) >= kolmogorov_sf(hi) - 1e-12);
        prop_assert!((0.0..=1.0).contains(&kolmogorov_sf(a)));
    }
}

#[test]
fn constant_counts_are_underdispersed() {
    let (d, _) = dispersion_index(&[4; 50]).unwrap();
    assert_eq!(d, 0.0);
    assert!(lag1_autocorrelation(&[1.0, -1.0, 1.0, -1.0, 1.0, -1.0]) < -0.5);
}
