//! The fixation-curve particle system.
//!
//! A configuration is a strictly decreasing list of levels `l_1 > ... > l_Z
//! > 1`. Particles `1..k` are pushed up together at rate
//! `C(l_k+1, 2) - C(l_{k+1}+1, 2)` (with `l_{Z+1} = 1`), a new particle enters
//! at level 2 at rate 1 pushing everybody, and the leader leaves once its
//! level passes the cap. Exits form a unit-rate Poisson process in
//! equilibrium.
//!
//! [`simulate`] uses one exponential clock per push class. A transition only
//! changes the rates of the classes it pushed, so untouched clocks keep their
//! absolute times. Between interactions the leader climbs alone and costs one
//! exponential per level.

use std::collections::VecDeque;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::Exp1;
use serde::{Deserialize, Serialize};

use crate::analytics::{sample_run_length, sample_s};
use crate::lookdown::MrcaPair;
use crate::stats::{self, GofReport};
use crate::{choose2, Error, Result};

#[derive(Debug, Clone, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ParticleConfig {
    levels: Vec<u64>,
}

impl ParticleConfig {
    /// Trailing 1s are dropped; the rest must be strictly decreasing.
    pub fn new(mut levels: Vec<u64>) -> Result<Self> {
        while levels.last() == Some(&1) {
            levels.pop();
        }
        if levels.iter().any(|&l| l < 2) {
            return Err(Error::Validation(format!("level below 2 inside the active prefix: {levels:?}")));
        }
        if levels.windows(2).any(|w| w[0] <= w[1]) {
            return Err(Error::Validation(format!("levels not strictly decreasing: {levels:?}")));
        }
        Ok(ParticleConfig { levels })
    }

    pub fn empty() -> Self {
        Self::default()
    }

    pub fn levels(&self) -> &[u64] {
        &self.levels
    }

    /// `l_1`, or 1 for the empty configuration.
    pub fn leader(&self) -> u64 {
        self.levels.first().copied().unwrap_or(1)
    }

    /// Number of particles.
    pub fn z(&self) -> usize {
        self.levels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.levels.is_empty()
    }

    /// `l_k` for 1-based `k`, with the convention `l_k = 1` past the end.
    pub fn level(&self, k: usize) -> u64 {
        self.levels.get(k.wrapping_sub(1)).copied().unwrap_or(1)
    }

    fn class_rate(&self, idx: usize) -> f64 {
        class_rate(&self.levels, idx)
    }

    /// Rates of the push classes `1..=Z` followed by the arrival rate.
    pub fn rates(&self) -> Vec<f64> {
        let mut r: Vec<f64> = (0..self.z()).map(|i| self.class_rate(i)).collect();
        r.push(1.0);
        r
    }

    /// `C(l_1+1, 2)`, or 1 when empty.
    pub fn total_rate(&self) -> f64 {
        if self.is_empty() {
            1.0
        } else {
            choose2(self.leader() + 1)
        }
    }

    fn check(&self) {
        debug_assert!(self.levels.windows(2).all(|w| w[0] > w[1]) && self.levels.iter().all(|&l| l >= 2));
    }
}

#[inline]
fn class_rate(levels: &[u64], idx: usize) -> f64 {
    let below = levels.get(idx + 1).copied().unwrap_or(1);
    choose2(levels[idx] + 1) - choose2(below + 1)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum TransitionKind {
    /// Particles `1..=k` moved up one level.
    Push { k: usize },
    Arrival,
    /// The leader left after the push of `k` particles (or an arrival); the
    /// state shown is after the jump-back.
    Exit { k: usize, arrival: bool },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TransitionEvent {
    pub time: f64,
    #[serde(flatten)]
    pub kind: TransitionKind,
    pub levels: ParticleConfig,
}

#[derive(Clone, Copy)]
enum Move {
    // 0-based class index
    Class(usize),
    Arrival,
}

fn do_move(levels: &mut Vec<u64>, mv: Move) -> (usize, bool) {
    match mv {
        Move::Class(idx) => {
            for l in &mut levels[..=idx] {
                *l += 1;
            }
            (idx + 1, false)
        }
        Move::Arrival => {
            for l in levels.iter_mut() {
                *l += 1;
            }
            levels.push(2);
            (levels.len() - 1, true)
        }
    }
}

/// Jump-back: a leader above `cap` leaves and every index shifts down.
fn exit_rule(levels: &mut Vec<u64>, (k, arrival): (usize, bool), cap: u64) -> TransitionKind {
    if levels[0] > cap {
        levels.remove(0);
        TransitionKind::Exit { k, arrival }
    } else if arrival {
        TransitionKind::Arrival
    } else {
        TransitionKind::Push { k }
    }
}

/// One transition from `state` at time `now`: the holding time is
/// `Exp(total_rate)` and the move is chosen proportionally to the rates. A
/// leader pushed above `cap` leaves in the same transition.
pub fn step<R: Rng + ?Sized>(state: &ParticleConfig, now: f64, cap: u64, rng: &mut R) -> (ParticleConfig, TransitionEvent) {
    let total = state.total_rate();
    let hold: f64 = rng.sample::<f64, _>(Exp1) / total;
    let mut u = rng.random::<f64>() * total;
    let mut mv = Move::Arrival;
    for idx in 0..state.z() {
        let r = state.class_rate(idx);
        if u < r {
            mv = Move::Class(idx);
            break;
        }
        u -= r;
    }
    let mut levels = state.levels.clone();
    let moved = do_move(&mut levels, mv);
    let kind = exit_rule(&mut levels, moved, cap);
    let next = ParticleConfig { levels };
    next.check();
    let ev = TransitionEvent {
        time: now + hold,
        kind,
        levels: next.clone(),
    };
    (next, ev)
}

/// Draw from the stationary law: `L^1` from `2/((l+1)(l+2))`, then each
/// next level from the same law conditioned below the previous one, until a
/// 1 comes up.
pub fn sample_stationary<R: Rng + ?Sized>(rng: &mut R) -> ParticleConfig {
    let mut levels = Vec::new();
    let mut bound = None;
    loop {
        let l = sample_run_length(rng, bound);
        if l == 1 {
            break;
        }
        levels.push(l);
        bound = Some(l);
    }
    ParticleConfig { levels }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub enum Init {
    #[default]
    Empty,
    /// A draw from [`sample_stationary`]; levels above the cap are removed
    /// and counted as initial exits.
    Stationary,
    Given(ParticleConfig),
}

#[derive(Debug, Clone, PartialEq)]
pub struct ParticleSimConfig {
    pub particle_cap: u64,
    pub horizon: f64,
    pub seed: u64,
    pub init: Init,
    /// The chain runs on `[-burn_in, horizon]`; only `[0, horizon]` is
    /// reported.
    pub burn_in: f64,
    /// Delay each exit by an independent draw of the time the leader would
    /// still need to climb from the cap to infinity.
    pub residual: bool,
}

pub const DEFAULT_PARTICLE_CAP: u64 = 10_000;
pub const DEFAULT_PARTICLE_BURN_IN: f64 = 100.0;

impl ParticleSimConfig {
    pub fn new(horizon: f64, seed: u64) -> Self {
        ParticleSimConfig {
            particle_cap: DEFAULT_PARTICLE_CAP,
            horizon,
            seed,
            init: Init::Empty,
            burn_in: DEFAULT_PARTICLE_BURN_IN,
            residual: false,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.particle_cap < 10 {
            return Err(Error::Config(format!("particle cap {} below 10", self.particle_cap)));
        }
        if !(self.horizon.is_finite() && self.horizon > 0.0) {
            return Err(Error::Config(format!("horizon {} must be positive", self.horizon)));
        }
        if !(self.burn_in.is_finite() && self.burn_in >= 0.0) {
            return Err(Error::Config(format!("burn-in {} must be nonnegative", self.burn_in)));
        }
        if let Init::Given(c) = &self.init {
            if c.leader() > self.particle_cap {
                return Err(Error::Config("initial leader above the particle cap".into()));
            }
        }
        Ok(())
    }

    /// Mean time a leader at the cap still needs to reach infinity: the
    /// downward bias of each exit time without the residual correction.
    pub fn truncation_bias(&self) -> f64 {
        2.0 / (self.particle_cap + 1) as f64
    }
}

/// Hooks called for the reported part `[0, horizon]` of a run.
pub trait Observer {
    /// The chain sat in `state` on `[from, to)`.
    fn on_hold(&mut self, _from: f64, _to: f64, _state: &ParticleConfig) {}
    /// A transition at `time` led to `state`.
    fn on_transition(&mut self, _time: f64, _kind: TransitionKind, _state: &ParticleConfig) {}
}

impl Observer for () {}

impl<A: Observer, B: Observer> Observer for (A, B) {
    fn on_hold(&mut self, from: f64, to: f64, state: &ParticleConfig) {
        self.0.on_hold(from, to, state);
        self.1.on_hold(from, to, state);
    }
    fn on_transition(&mut self, time: f64, kind: TransitionKind, state: &ParticleConfig) {
        self.0.on_transition(time, kind, state);
        self.1.on_transition(time, kind, state);
    }
}

/// Keeps every transition.
#[derive(Debug, Default)]
pub struct Recorder {
    pub events: Vec<TransitionEvent>,
}

impl Observer for Recorder {
    fn on_transition(&mut self, time: f64, kind: TransitionKind, state: &ParticleConfig) {
        self.events.push(TransitionEvent {
            time,
            kind,
            levels: state.clone(),
        });
    }
}

/// Snapshots of the configuration at `start, start + spacing, ...`.
#[derive(Debug)]
pub struct GridSampler {
    spacing: f64,
    next: f64,
    pub samples: Vec<ParticleConfig>,
}

impl GridSampler {
    pub fn new(start: f64, spacing: f64) -> Self {
        assert!(spacing > 0.0);
        GridSampler {
            spacing,
            next: start,
            samples: Vec::new(),
        }
    }
}

impl Observer for GridSampler {
    fn on_hold(&mut self, from: f64, to: f64, state: &ParticleConfig) {
        while self.next < to {
            if self.next >= from {
                self.samples.push(state.clone());
            }
            self.next += self.spacing;
        }
    }
}

/// Time spent with each number of particles.
#[derive(Debug, Default)]
pub struct ZOccupation {
    pub time_by_z: Vec<f64>,
}

impl Observer for ZOccupation {
    fn on_hold(&mut self, from: f64, to: f64, state: &ParticleConfig) {
        let z = state.z();
        if self.time_by_z.len() <= z {
            self.time_by_z.resize(z + 1, 0.0);
        }
        self.time_by_z[z] += to - from;
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SimOutput {
    /// Exit times in `[0, horizon]`, increasing.
    pub exits: Vec<f64>,
    /// `(E, B)` for exits of particles that entered during the run.
    pub pairs: Vec<MrcaPair>,
    /// Particles of a stationary start that were already above the cap.
    pub initial_exits: usize,
    pub final_state: ParticleConfig,
    pub transitions: u64,
    pub truncation_bias: f64,
}

struct Clocks {
    class: Vec<f64>,
    arrival: f64,
    // earliest clock other than the leader's, with its move
    other: (f64, Move),
}

impl Clocks {
    fn refresh_other(&mut self) {
        let mut best = (self.arrival, Move::Arrival);
        for (idx, &c) in self.class.iter().enumerate().skip(1) {
            if c < best.0 {
                best = (c, Move::Class(idx));
            }
        }
        self.other = best;
    }
}

#[inline]
fn exp_after<R: Rng>(now: f64, rate: f64, rng: &mut R) -> f64 {
    now + rng.sample::<f64, _>(Exp1) / rate
}

/// Runs the chain to the horizon, reporting to `observer`.
pub fn simulate_with<O: Observer>(config: &ParticleSimConfig, observer: &mut O) -> Result<SimOutput> {
    config.validate()?;
    let cap = config.particle_cap;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut initial_exits = 0;
    let mut state = match &config.init {
        Init::Empty => ParticleConfig::empty(),
        Init::Given(c) => c.clone(),
        Init::Stationary => {
            let mut c = sample_stationary(&mut rng);
            let above = c.levels.partition_point(|&l| l > cap);
            c.levels.drain(..above);
            initial_exits = above;
            c
        }
    };
    let mut now = -config.burn_in;
    let horizon = config.horizon;
    let mut births: VecDeque<Option<f64>> = state.levels.iter().map(|_| None).collect();
    let mut exits = Vec::new();
    let mut pairs = Vec::new();
    let mut transitions = 0u64;

    let mut clocks = Clocks {
        class: (0..state.z()).map(|i| exp_after(now, state.class_rate(i), &mut rng)).collect(),
        arrival: exp_after(now, 1.0, &mut rng),
        other: (f64::INFINITY, Move::Arrival),
    };
    clocks.refresh_other();

    let report = |o: &mut O, from: f64, to: f64, s: &ParticleConfig| {
        if to > 0.0 {
            o.on_hold(from.max(0.0), to, s);
        }
    };

    loop {
        let (t_next, mv) = match clocks.class.first() {
            Some(&c0) if c0 < clocks.other.0 => (c0, Move::Class(0)),
            _ => clocks.other,
        };
        if t_next > horizon {
            report(observer, now, horizon, &state);
            break;
        }
        report(observer, now, t_next, &state);
        now = t_next;
        transitions += 1;

        // the leader climbing alone: only its own clock changes
        if let Move::Class(0) = mv {
            if state.levels[0] < cap {
                state.levels[0] += 1;
                clocks.class[0] = exp_after(now, state.class_rate(0), &mut rng);
                if now >= 0.0 {
                    observer.on_transition(now, TransitionKind::Push { k: 1 }, &state);
                }
                continue;
            }
        }

        let moved = do_move(&mut state.levels, mv);
        let resample = match mv {
            Move::Class(idx) => idx + 1,
            Move::Arrival => {
                births.push_back(Some(now));
                clocks.arrival = exp_after(now, 1.0, &mut rng);
                clocks.class.push(0.0);
                state.z()
            }
        };
        for i in 0..resample {
            clocks.class[i] = exp_after(now, state.class_rate(i), &mut rng);
        }
        let kind = exit_rule(&mut state.levels, moved, cap);
        if let TransitionKind::Exit { .. } = kind {
            clocks.class.remove(0);
            let mut e = now;
            if config.residual {
                e += sample_s(cap + 1, &mut rng)?;
            }
            let b = births.pop_front().expect("every particle has a birth slot");
            if e >= 0.0 {
                exits.push(e);
                if let Some(b) = b {
                    pairs.push(MrcaPair { e, b });
                }
            }
        }
        clocks.refresh_other();
        state.check();
        if now >= 0.0 {
            observer.on_transition(now, kind, &state);
        }
    }

    if config.residual {
        // residual delays may reorder neighbouring exits
        exits.sort_by(f64::total_cmp);
        exits.retain(|&e| e <= horizon);
        pairs.sort_by(|a, b| a.e.total_cmp(&b.e));
        pairs.retain(|p| p.e <= horizon);
    }
    Ok(SimOutput {
        exits,
        pairs,
        initial_exits,
        final_state: state,
        transitions,
        truncation_bias: if config.residual { 0.0 } else { config.truncation_bias() },
    })
}

/// Runs the chain and keeps the full trajectory. Long runs at a large cap
/// produce about `cap` transitions per exit; use [`simulate_with`] with a
/// lighter observer there.
pub fn simulate(config: &ParticleSimConfig) -> Result<(Vec<TransitionEvent>, SimOutput)> {
    let mut rec = Recorder::default();
    let out = simulate_with(config, &mut rec)?;
    Ok((rec.events, out))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GapSummary {
    pub gaps: usize,
    pub mean: f64,
    pub ks: GofReport,
    pub lag1_autocorrelation: f64,
    /// `4 / sqrt(gaps)`.
    pub lag1_band: f64,
    /// Variance-to-mean ratio of unit-window counts between the first and
    /// last exit, with its standard error.
    pub dispersion: f64,
    pub dispersion_se: f64,
}

impl GapSummary {
    pub fn pass(&self) -> bool {
        self.ks.pass
            && self.lag1_autocorrelation.abs() < self.lag1_band
            && (self.dispersion - 1.0).abs() < 4.0 * self.dispersion_se
    }
}

/// Gap statistics of an exit sequence. Only gaps between consecutive exits
/// are used, so the stretch before the first exit is discarded.
pub fn exit_gap_statistics(exits: &[f64]) -> Result<GapSummary> {
    if exits.len() < 100 {
        return Err(Error::SampleSize {
            needed: 100,
            got: exits.len(),
        });
    }
    let gaps: Vec<f64> = exits.windows(2).map(|w| w[1] - w[0]).collect();
    let (mean, _) = stats::mean_and_var(&gaps);
    let ks = stats::ks_test_exp1(&gaps, stats::ALPHA)?;
    let lag1 = stats::lag1_autocorrelation(&gaps);
    let first = exits[0];
    let counts = stats::window_counts(&exits[1..], first, *exits.last().expect("nonempty"), 1.0);
    let (dispersion, dispersion_se) = stats::dispersion_index(&counts)?;
    Ok(GapSummary {
        gaps: gaps.len(),
        mean,
        ks,
        lag1_autocorrelation: lag1,
        lag1_band: 4.0 / (gaps.len() as f64).sqrt(),
        dispersion,
        dispersion_se,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::analytics::{pi_lambda, table_pi, Outcome};
    use crate::stats::{chi_square_gof, empirical_pmf, ChiSquareOptions};
    use num_traits::ToPrimitive;

    fn cfg(levels: &[u64]) -> ParticleConfig {
        ParticleConfig::new(levels.to_vec()).unwrap()
    }

    #[test]
    fn config_validation() {
        assert!(ParticleConfig::new(vec![3, 3]).is_err());
        assert!(ParticleConfig::new(vec![2, 3]).is_err());
        assert_eq!(cfg(&[5, 2, 1, 1]).levels(), &[5, 2]);
        assert_eq!(cfg(&[5, 2]).level(3), 1);
        assert_eq!(ParticleConfig::empty().leader(), 1);
    }

    #[test]
    fn rate_bookkeeping() {
        assert_eq!(cfg(&[2]).rates(), vec![2.0, 1.0]);
        assert_eq!(cfg(&[2]).total_rate(), 3.0);
        assert_eq!(cfg(&[5, 2]).rates(), vec![12.0, 2.0, 1.0]);
        assert_eq!(cfg(&[5, 2]).total_rate(), 15.0);
        assert_eq!(ParticleConfig::empty().rates(), vec![1.0]);
        for c in [cfg(&[9, 7, 3]), cfg(&[40, 2]), cfg(&[4, 3, 2])] {
            let s: f64 = c.rates().iter().sum();
            assert_eq!(s, c.total_rate());
        }
    }

    #[test]
    fn step_from_empty_is_arrival() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let (next, ev) = step(&ParticleConfig::empty(), 0.0, 100, &mut rng);
        assert_eq!(next.levels(), &[2]);
        assert_eq!(ev.kind, TransitionKind::Arrival);
    }

    #[test]
    fn step_frequencies_and_holding_time() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let s = cfg(&[5, 2]);
        let n = 150_000;
        let mut counts = [0usize; 3];
        let mut hold = 0.0;
        for _ in 0..n {
            let (next, ev) = step(&s, 0.0, 100, &mut rng);
            hold += ev.time;
            match (ev.kind, next.levels()) {
                (TransitionKind::Push { k: 1 }, [6, 2]) => counts[0] += 1,
                (TransitionKind::Push { k: 2 }, [6, 3]) => counts[1] += 1,
                (TransitionKind::Arrival, [6, 3, 2]) => counts[2] += 1,
                other => panic!("unexpected {other:?}"),
            }
        }
        for (c, p) in counts.iter().zip([12.0 / 15.0, 2.0 / 15.0, 1.0 / 15.0]) {
            let se = (p * (1.0 - p) / n as f64).sqrt();
            assert!((*c as f64 / n as f64 - p).abs() < 4.0 * se, "{counts:?}");
        }
        let mean = hold / n as f64;
        assert!((mean - 1.0 / 15.0).abs() < 4.0 / 15.0 / (n as f64).sqrt());
    }

    #[test]
    fn step_exit_jumps_back() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let s = cfg(&[10, 4]);
        loop {
            let (next, ev) = step(&s, 0.0, 10, &mut rng);
            match ev.kind {
                TransitionKind::Exit { k: 1, arrival: false } => {
                    assert_eq!(next.levels(), &[4]);
                    break;
                }
                TransitionKind::Exit { k: 2, .. } => assert_eq!(next.levels(), &[5]),
                TransitionKind::Exit { arrival: true, .. } => assert_eq!(next.levels(), &[5, 2]),
                k => panic!("{k:?}"),
            }
        }
    }

    #[test]
    fn stationary_sampler_law() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let n = 200_000;
        let draws: Vec<ParticleConfig> = (0..n).map(|_| sample_stationary(&mut rng)).collect();
        let empty = draws.iter().filter(|c| c.is_empty()).count() as f64 / n as f64;
        assert!((empty - 1.0 / 3.0).abs() < 4.0 * (2.0 / 9.0 / n as f64).sqrt());
        let p32 = draws.iter().filter(|c| c.levels() == [3, 2]).count() as f64 / n as f64;
        assert_eq!(pi_lambda(&[3, 2]).to_f64().unwrap(), 1.0 / 30.0);
        assert!((p32 - 1.0 / 30.0).abs() < 4.0 * (1.0 / 30.0 / n as f64).sqrt());
        let emp = empirical_pmf(draws.iter().map(|c| Outcome::levels(c.levels()))).unwrap();
        let r = chi_square_gof(&emp, &table_pi(10, 3), ChiSquareOptions::default()).unwrap();
        assert!(r.pass, "{r:?}");
    }

    #[test]
    fn simulation_is_deterministic_and_valid() {
        let mut c = ParticleSimConfig::new(50.0, 9);
        c.particle_cap = 200;
        let (traj, out) = simulate(&c).unwrap();
        let (traj2, out2) = simulate(&c).unwrap();
        assert_eq!(traj, traj2);
        assert_eq!(out, out2);
        let mut prev = 0.0;
        for ev in &traj {
            assert!(ev.time >= prev && ev.time <= 50.0);
            prev = ev.time;
            let l = ev.levels.levels();
            assert!(l.windows(2).all(|w| w[0] > w[1]) && l.iter().all(|&x| (2..=200).contains(&x)));
        }
        let exits: Vec<f64> = traj
            .iter()
            .filter(|e| matches!(e.kind, TransitionKind::Exit { .. }))
            .map(|e| e.time)
            .collect();
        assert_eq!(exits, out.exits);
        for p in &out.pairs {
            assert!(p.b < p.e);
        }
        assert!((out.truncation_bias - 2.0 / 201.0).abs() < 1e-15);
        let mut bad = c.clone();
        bad.particle_cap = 5;
        assert!(simulate(&bad).is_err());
    }

    #[test]
    fn replayed_trajectory_matches_rules() {
        let mut c = ParticleSimConfig::new(30.0, 10);
        c.particle_cap = 50;
        c.burn_in = 0.0;
        let (traj, _) = simulate(&c).unwrap();
        let mut state = ParticleConfig::empty();
        for ev in &traj {
            let mut l = state.levels.clone();
            let (k, arrival) = match ev.kind {
                TransitionKind::Push { k } => (k, false),
                TransitionKind::Arrival => (l.len(), true),
                TransitionKind::Exit { k, arrival } => (k, arrival),
            };
            for x in &mut l[..k] {
                *x += 1;
            }
            if arrival {
                l.push(2);
            }
            if matches!(ev.kind, TransitionKind::Exit { .. }) {
                assert_eq!(l[0], 51);
                l.remove(0);
            }
            assert_eq!(l, ev.levels.levels());
            state = ev.levels.clone();
        }
    }

    #[test]
    fn z_occupation_and_exit_rate() {
        let mut c = ParticleSimConfig::new(20_000.0, 11);
        c.particle_cap = 1000;
        let mut occ = ZOccupation::default();
        let out = simulate_with(&c, &mut occ).unwrap();
        let total: f64 = occ.time_by_z.iter().sum();
        assert!((total - 20_000.0).abs() < 1e-6);
        // Z = 0 exactly when the leader is at 1; its time fraction is 1/3
        let f0 = occ.time_by_z[0] / total;
        assert!((f0 - 1.0 / 3.0).abs() < 0.02, "{f0}");
        let rate = out.exits.len() as f64 / 20_000.0;
        assert!((rate - 1.0).abs() < 4.0 * (1.0 / 20_000f64).sqrt() * 1.5, "{rate}");
    }

    #[test]
    fn stationary_start_strips_high_levels() {
        let mut strips = 0;
        for seed in 0..200 {
            let mut c = ParticleSimConfig::new(1.0, seed);
            c.particle_cap = 10;
            c.init = Init::Stationary;
            c.burn_in = 0.0;
            let out = simulate_with(&c, &mut ()).unwrap();
            strips += out.initial_exits;
        }
        // P[L^1 > 10] = 2/12
        assert!(strips > 10 && strips < 70, "{strips}");
    }

    #[test]
    fn residual_mode_shifts_exits() {
        let mut c = ParticleSimConfig::new(200.0, 12);
        c.particle_cap = 20;
        let plain = simulate_with(&c, &mut ()).unwrap();
        c.residual = true;
        let shifted = simulate_with(&c, &mut ()).unwrap();
        assert_eq!(shifted.truncation_bias, 0.0);
        assert!(!shifted.exits.is_empty());
        assert_ne!(plain.exits, shifted.exits);
        assert!(shifted.exits.windows(2).all(|w| w[0] <= w[1]));
    }

    #[test]
    fn gap_statistics() {
        let mut c = ParticleSimConfig::new(3000.0, 13);
        c.particle_cap = 500;
        let out = simulate_with(&c, &mut ()).unwrap();
        let g = exit_gap_statistics(&out.exits).unwrap();
        assert!(g.pass(), "{g:?}");
        assert!((g.mean - 1.0).abs() < 0.1);
        assert!(exit_gap_statistics(&out.exits[..50]).is_err());
    }
}
