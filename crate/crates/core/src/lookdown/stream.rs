use std::cmp::Ordering;
use std::collections::HashMap;
use std::sync::{Arc, RwLock};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::weighted::WeightedAliasIndex;
use rand_distr::{Distribution, Poisson};
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Mean number of events per generated cell.
const CELL_TARGET: f64 = 64.0;
const SLICE_MASK: u64 = (1 << 58) - 1;

/// Parameters of a finite look-down simulation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EngineConfig {
    /// Number of simulated levels `N`; a line pushed beyond `N` is killed.
    pub level_cap: u32,
    pub t_start: f64,
    pub t_end: f64,
    /// Extra history simulated before `t_start`.
    pub burn_in: f64,
    pub seed: u64,
}

impl EngineConfig {
    pub const DEFAULT_BURN_IN: f64 = 20.0;

    pub fn new(level_cap: u32, t_start: f64, t_end: f64, seed: u64) -> Self {
        EngineConfig {
            level_cap,
            t_start,
            t_end,
            burn_in: Self::DEFAULT_BURN_IN,
            seed,
        }
    }

    pub fn with_burn_in(mut self, burn_in: f64) -> Self {
        self.burn_in = burn_in;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.level_cap < 3 {
            return Err(Error::Config(format!("level cap must be >= 3, got {}", self.level_cap)));
        }
        if !(self.t_start.is_finite() && self.t_end.is_finite()) || self.t_end <= self.t_start {
            return Err(Error::Config(format!(
                "empty window [{}, {}]",
                self.t_start, self.t_end
            )));
        }
        if !(self.burn_in >= 0.0 && self.burn_in.is_finite()) {
            return Err(Error::Config(format!("burn-in must be >= 0, got {}", self.burn_in)));
        }
        Ok(())
    }

    /// First simulated time, `t_start - burn_in`.
    pub fn window_start(&self) -> f64 {
        self.t_start - self.burn_in
    }
}

/// A point of `P_ij`: at `time`, level `dst` looks down to `src`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LookdownEvent {
    #[serde(rename = "t")]
    pub time: f64,
    #[serde(rename = "i")]
    pub src: u32,
    #[serde(rename = "j")]
    pub dst: u32,
}

impl LookdownEvent {
    pub fn new(time: f64, src: u32, dst: u32) -> Self {
        LookdownEvent { time, src, dst }
    }

    /// Total order by `(time, src, dst)`.
    pub fn cmp_key(&self, other: &Self) -> Ordering {
        self.time
            .total_cmp(&other.time)
            .then(self.src.cmp(&other.src))
            .then(self.dst.cmp(&other.dst))
    }
}

struct Band {
    lo: u32,
    hi: u32,
    rate: f64,
    width: f64,
    // weights (j - 1) over lo..=hi
    pick: WeightedAliasIndex<f64>,
}

type CellMap = HashMap<(u8, i64), Arc<Vec<LookdownEvent>>>;

/// The realised look-down events of one simulation.
///
/// Events are grouped by target level into bands (`{2}`, `{3,4}`, `{5..8}`,
/// ...) and each band is cut into time slices holding about
/// [`CELL_TARGET`] events. A cell is generated from its own ChaCha stream on
/// first use, so any part of the graph can be examined without simulating
/// the rest, and an evicted cell regenerates identically.
pub struct EventStream {
    config: EngineConfig,
    bands: Vec<Band>,
    explicit: bool,
    cells: RwLock<CellMap>,
}

impl std::fmt::Debug for EventStream {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("EventStream")
            .field("config", &self.config)
            .field("explicit", &self.explicit)
            .finish_non_exhaustive()
    }
}

pub(crate) fn band_of(dst: u32) -> usize {
    (dst - 1).ilog2() as usize
}

fn zigzag(k: i64) -> u64 {
    ((k << 1) ^ (k >> 63)) as u64
}

impl EventStream {
    /// Lazily generated stream. Each pair `i < j <= N` carries an independent
    /// rate-one Poisson process on `[t_start - burn_in, t_end]`.
    pub fn generate(config: EngineConfig) -> Result<Self> {
        config.validate()?;
        let n = config.level_cap;
        let mut bands = Vec::new();
        for b in 0..=band_of(n) {
            let lo = if b == 0 { 2 } else { (1u32 << b) + 1 };
            let hi = (1u32 << (b + 1)).min(n);
            let weights: Vec<f64> = (lo..=hi).map(|j| (j - 1) as f64).collect();
            let rate: f64 = weights.iter().sum();
            bands.push(Band {
                lo,
                hi,
                rate,
                width: CELL_TARGET / rate,
                pick: WeightedAliasIndex::new(weights).map_err(|e| Error::Config(e.to_string()))?,
            });
        }
        Ok(EventStream {
            config,
            bands,
            explicit: false,
            cells: RwLock::new(HashMap::new()),
        })
    }

    /// Stream made of exactly the given events (no randomness).
    pub fn from_events(config: EngineConfig, events: &[LookdownEvent]) -> Result<Self> {
        let mut s = Self::generate(config)?;
        s.explicit = true;
        let n = s.config.level_cap;
        let mut map: CellMap = HashMap::new();
        let mut grouped: HashMap<(u8, i64), Vec<LookdownEvent>> = HashMap::new();
        for e in events {
            if !(1 <= e.src && e.src < e.dst && e.dst <= n) {
                return Err(Error::Validation(format!(
                    "event ({}, {}, {}) violates 1 <= i < j <= {n}",
                    e.time, e.src, e.dst
                )));
            }
            if e.time < s.config.window_start() || e.time > s.config.t_end {
                return Err(Error::Validation(format!("event time {} outside the window", e.time)));
            }
            let b = band_of(e.dst);
            grouped.entry((b as u8, s.slice_of(b, e.time))).or_default().push(*e);
        }
        for (key, mut v) in grouped {
            v.sort_by(|a, b| a.cmp_key(b));
            v.dedup_by(|a, b| a.cmp_key(b) == Ordering::Equal);
            map.insert(key, Arc::new(v));
        }
        s.cells = RwLock::new(map);
        Ok(s)
    }

    pub fn config(&self) -> &EngineConfig {
        &self.config
    }

    pub fn level_cap(&self) -> u32 {
        self.config.level_cap
    }

    pub(crate) fn band_count(&self) -> usize {
        self.bands.len()
    }

    pub(crate) fn slice_of(&self, b: usize, t: f64) -> i64 {
        (t / self.bands[b].width).floor() as i64
    }

    pub(crate) fn slice_start(&self, b: usize, k: i64) -> f64 {
        k as f64 * self.bands[b].width
    }

    pub(crate) fn slice_end(&self, b: usize, k: i64) -> f64 {
        (k + 1) as f64 * self.bands[b].width
    }

    /// Whether `t` lies in the simulated window.
    pub fn covers(&self, t: f64) -> bool {
        t >= self.config.window_start() && t <= self.config.t_end
    }

    pub(crate) fn cell(&self, b: usize, k: i64) -> Arc<Vec<LookdownEvent>> {
        if let Some(c) = self.cells.read().expect("cell cache poisoned").get(&(b as u8, k)) {
            return Arc::clone(c);
        }
        if self.explicit {
            return Arc::new(Vec::new());
        }
        let fresh = Arc::new(self.generate_cell(b, k));
        let mut map = self.cells.write().expect("cell cache poisoned");
        Arc::clone(map.entry((b as u8, k)).or_insert(fresh))
    }

    fn generate_cell(&self, b: usize, k: i64) -> Vec<LookdownEvent> {
        let band = &self.bands[b];
        let start = self.slice_start(b, k);
        let end = self.slice_end(b, k);
        let (w0, w1) = (self.config.window_start(), self.config.t_end);
        if end < w0 || start > w1 {
            return Vec::new();
        }
        let mut rng = ChaCha8Rng::seed_from_u64(self.config.seed);
        rng.set_stream(((b as u64) << 58) | (zigzag(k) & SLICE_MASK));
        let count = Poisson::new(band.rate * band.width)
            .expect("positive mean")
            .sample(&mut rng) as usize;
        let mut out = Vec::with_capacity(count);
        for _ in 0..count {
            let time = start + (end - start) * rng.random::<f64>();
            let dst = band.lo + band.pick.sample(&mut rng) as u32;
            let src = rng.random_range(1..dst);
            if time >= w0 && time <= w1 {
                out.push(LookdownEvent { time, src, dst });
            }
        }
        debug_assert!(out.iter().all(|e| e.dst <= band.hi));
        out.sort_by(|a, b| a.cmp_key(b));
        out.dedup_by(|a, b| a.cmp_key(b) == Ordering::Equal);
        out
    }

    /// Drops cached cells ending before `t`. Purely a memory bound: dropped
    /// cells are regenerated identically if needed again. No-op on explicit
    /// streams.
    pub fn release_before(&self, t: f64) {
        if self.explicit {
            return;
        }
        let widths: Vec<f64> = self.bands.iter().map(|b| b.width).collect();
        self.cells
            .write()
            .expect("cell cache poisoned")
            .retain(|&(b, k), _| (k + 1) as f64 * widths[b as usize] >= t);
    }

    pub fn cached_cells(&self) -> usize {
        self.cells.read().expect("cell cache poisoned").len()
    }

    /// All events with `from < time <= to`, in `(time, src, dst)` order.
    pub fn events_between(&self, from: f64, to: f64) -> Vec<LookdownEvent> {
        let from = from.max(self.config.window_start() - 1.0);
        let to = to.min(self.config.t_end);
        let mut out = Vec::new();
        if to <= from {
            return out;
        }
        for b in 0..self.bands.len() {
            for k in self.slice_of(b, from)..=self.slice_of(b, to) {
                out.extend(self.cell(b, k).iter().filter(|e| e.time > from && e.time <= to));
            }
        }
        out.sort_by(|a, b| a.cmp_key(b));
        out
    }

    /// Calls `f` on every event with `from < time <= to` in order, one slab
    /// of time at a time so memory stays bounded.
    pub fn for_each_event<F: FnMut(&LookdownEvent)>(&self, from: f64, to: f64, mut f: F) {
        let slab = (CELL_TARGET * 64.0 / self.bands.iter().map(|b| b.rate).sum::<f64>()).max(1e-3);
        let mut lo = from;
        while lo < to {
            let hi = (lo + slab).min(to);
            for e in self.events_between(lo, hi) {
                f(&e);
            }
            self.release_before(hi);
            lo = hi;
        }
    }
}
