//! Finite look-down graph and the genealogy read off from it.
//!
//! Levels run from 1 (the immortal line) to `N`. At each point `(t, i, j)`
//! of `P_ij` the individual at level `j` dies and is replaced by a child of
//! level `i`; before that, every line at levels `j..N-1` moves up by one and
//! the line at `N` is killed. Observables follow the right-continuous
//! convention: a quantity "at time `t`" includes the events at `t`.

mod cursor;
mod stream;

use serde::Serialize;

use crate::{Error, Result};
use cursor::Cursor;
pub use stream::{EngineConfig, EventStream, LookdownEvent};

/// Convenience alias for [`EventStream::generate`].
pub fn generate_event_stream(config: EngineConfig) -> Result<EventStream> {
    EventStream::generate(config)
}

/// `C_s^t` as a step function of `s <= t`.
///
/// `jumps` are the event times (decreasing) at which the curve loses one
/// ancestor when followed backwards: `C_s^t = N - #{jumps > s}`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CoalescentCurve {
    pub reference_time: f64,
    pub level_cap: u32,
    pub jumps: Vec<f64>,
    /// The curve stopped before reaching 1 (window start or `s_min` hit).
    pub truncated: bool,
    /// Earliest time at which the curve is known.
    pub floor: f64,
}

impl CoalescentCurve {
    /// `C_s^t`, or `None` outside `[floor, t]`.
    pub fn value_at(&self, s: f64) -> Option<u32> {
        if s > self.reference_time || (self.truncated && s < self.floor) {
            return None;
        }
        let above = self.jumps.partition_point(|&j| j > s);
        Some(self.level_cap - above as u32)
    }

    /// Knots `(time, count)` in decreasing time; `count` holds from the knot
    /// time back to the next knot.
    pub fn knots(&self) -> Vec<(f64, u32)> {
        let mut out = vec![(self.reference_time, self.level_cap)];
        for (k, &t) in self.jumps.iter().enumerate() {
            out.push((t, self.level_cap - 1 - k as u32));
        }
        out
    }

    /// Time when the curve reaches one ancestor, if it does.
    pub fn mrca(&self) -> Option<f64> {
        (!self.truncated).then(|| *self.jumps.last().expect("N >= 3 gives jumps"))
    }
}

/// Level path `F_B` of the line pushed from 2 to 3 at time `B`, minus one.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FixationCurve {
    pub birth: f64,
    /// Time the line is pushed past the level cap; `None` while open.
    pub exit: Option<f64>,
    /// `(time, level)` from `(B, 2)`, one entry per push; empty when the path
    /// was not requested.
    pub path: Vec<(f64, u32)>,
}

impl FixationCurve {
    pub fn is_open(&self) -> bool {
        self.exit.is_none()
    }

    /// `F_B^tau` for `B <= tau < E`.
    pub fn level_at(&self, tau: f64) -> Option<u32> {
        if tau < self.birth || self.exit.is_some_and(|e| tau >= e) {
            return None;
        }
        let k = self.path.partition_point(|&(t, _)| t <= tau);
        (k > 0).then(|| self.path[k - 1].1)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MrcaPair {
    #[serde(rename = "E")]
    pub e: f64,
    #[serde(rename = "B")]
    pub b: f64,
}

/// Establishment and living times of successive MRCAs.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MrcaPointProcess {
    pub pairs: Vec<MrcaPair>,
    /// Curves born in the range but still open at the window end.
    pub open_curves: usize,
}

impl MrcaPointProcess {
    pub fn exits(&self) -> Vec<f64> {
        self.pairs.iter().map(|p| p.e).collect()
    }

    pub fn births(&self) -> Vec<f64> {
        self.pairs.iter().map(|p| p.b).collect()
    }
}

/// `(A_t, L_t, I_t, Z_t)` plus the next MRCA `(E_t, B_t)` when resolvable.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MrcaObservables {
    pub at_time: f64,
    pub a: f64,
    /// First `P_12` point after `A_t`; `None` if beyond the window.
    pub b: Option<f64>,
    /// Exit of the fixation curve started at `B_t`; `None` if beyond the
    /// window.
    pub e: Option<f64>,
    pub l: u32,
    /// `None` is the infinity marker (`B_t > t`).
    pub i: Option<u32>,
    pub z: u32,
    /// `false` when `t` falls inside the burn-in.
    pub stationary: bool,
}

struct BackWalk {
    jumps: Vec<f64>,
    last: Option<LookdownEvent>,
    truncated: bool,
}

impl EventStream {
    fn check_time(&self, t: f64, what: &str) -> Result<()> {
        if self.covers(t) {
            Ok(())
        } else {
            let c = self.config();
            Err(Error::Range(format!(
                "{what} = {t} outside the simulated window [{}, {}]",
                c.window_start(),
                c.t_end
            )))
        }
    }

    /// `X_s^t(j)`: level at time `s` of the ancestor of individual `(t, j)`.
    pub fn backward_level(&self, t: f64, j: u32, s: f64) -> Result<u32> {
        self.check_time(t, "t")?;
        self.check_time(s, "s")?;
        if s > t {
            return Err(Error::Range(format!("s = {s} after t = {t}")));
        }
        if j < 1 || j > self.level_cap() {
            return Err(Error::Range(format!("level {j} outside 1..={}", self.level_cap())));
        }
        let mut level = j;
        let mut cur = Cursor::backward_from(self, t);
        while level > 1 {
            match cur.next(level) {
                Some(e) if e.time > s => {
                    level = if e.dst == level { e.src } else { level - 1 };
                }
                _ => break,
            }
        }
        Ok(level)
    }

    fn walk_back(&self, t: f64, s_min: f64) -> BackWalk {
        let n = self.level_cap();
        let mut c = n;
        let mut jumps = Vec::with_capacity(n as usize);
        let mut cur = Cursor::backward_from(self, t);
        let mut last = None;
        while c > 1 {
            match cur.next(c) {
                Some(e) if e.time > s_min => {
                    jumps.push(e.time);
                    last = Some(e);
                    c -= 1;
                }
                _ => {
                    return BackWalk {
                        jumps,
                        last,
                        truncated: true,
                    }
                }
            }
        }
        BackWalk {
            jumps,
            last,
            truncated: false,
        }
    }

    /// Coalescent curve back from `t`, followed down to one ancestor or to
    /// `s_min`, whichever comes first.
    pub fn coalescent_curve(&self, t: f64, s_min: f64) -> Result<CoalescentCurve> {
        self.check_time(t, "t")?;
        if s_min >= t {
            return Err(Error::Range(format!("s_min = {s_min} not before t = {t}")));
        }
        let floor = s_min.max(self.config().window_start());
        let w = self.walk_back(t, floor);
        Ok(CoalescentCurve {
            reference_time: t,
            level_cap: self.level_cap(),
            jumps: w.jumps,
            truncated: w.truncated,
            floor,
        })
    }

    fn mrca_walk(&self, t: f64) -> Result<(LookdownEvent, BackWalk)> {
        self.check_time(t, "t")?;
        let w = self.walk_back(t, self.config().window_start());
        if w.truncated {
            return Err(Error::InsufficientWindow(format!(
                "coalescent curve back from {t} does not reach one ancestor inside the window"
            )));
        }
        let e = w.last.expect("complete walk has a last event");
        if (e.src, e.dst) != (1, 2) {
            return Err(Error::Validation(format!(
                "MRCA event ({}, {}, {}) is not a point of P_12",
                e.time, e.src, e.dst
            )));
        }
        Ok((e, w))
    }

    /// `A_t`, the time the MRCA of the population at `t` lived.
    pub fn mrca_time(&self, t: f64) -> Result<f64> {
        self.mrca_walk(t).map(|(e, _)| e.time)
    }

    /// Points of `P_12` with `from < time <= to`.
    pub fn p12_points(&self, from: f64, to: f64) -> Vec<LookdownEvent> {
        let mut cur = Cursor::forward_after(self, from);
        let mut out = Vec::new();
        while let Some(e) = cur.next(2) {
            if e.time > to {
                break;
            }
            out.push(e);
        }
        out
    }

    /// Follows the line sitting at level 3 right after the `P_12` event
    /// `start` until it is pushed past the cap (or the window ends).
    pub fn track_fixation_curve(&self, start: LookdownEvent, keep_path: bool) -> FixationCurve {
        let n = self.level_cap();
        let mut line = 3u32;
        let mut path = Vec::new();
        if keep_path {
            path.reserve(n as usize);
            path.push((start.time, 2));
        }
        let mut cur = Cursor::forward_after_event(self, start);
        let exit = loop {
            match cur.next(line) {
                None => break None,
                Some(e) if line == n => break Some(e.time),
                Some(e) => {
                    line += 1;
                    if keep_path {
                        path.push((e.time, line - 1));
                    }
                }
            }
        };
        FixationCurve {
            birth: start.time,
            exit,
            path,
        }
    }

    /// One fixation curve per `P_12` point in `(from, to]`.
    pub fn extract_fixation_curves(&self, from: f64, to: f64, keep_path: bool) -> Result<Vec<FixationCurve>> {
        self.check_time(from, "from")?;
        self.check_time(to, "to")?;
        let births = self.p12_points(from, to);
        Ok(births
            .into_iter()
            .map(|b| self.track_fixation_curve(b, keep_path))
            .collect())
    }

    /// Pairs `(E, B)` for curves born in `(from, to]`; curves still open at
    /// the window end are counted and dropped.
    pub fn mrca_point_process(&self, from: f64, to: f64) -> Result<MrcaPointProcess> {
        let curves = self.extract_fixation_curves(from, to, false)?;
        let open_curves = curves.iter().filter(|c| c.is_open()).count();
        let pairs: Vec<MrcaPair> = curves
            .iter()
            .filter_map(|c| c.exit.map(|e| MrcaPair { e, b: c.birth }))
            .collect();
        if pairs.windows(2).any(|w| w[0].e >= w[1].e || w[0].b >= w[1].b) {
            return Err(Error::Validation("fixation curves exited out of order".into()));
        }
        Ok(MrcaPointProcess { pairs, open_curves })
    }

    /// `(A_t, L_t, I_t, Z_t)` and the next MRCA.
    pub fn observables_at(&self, t: f64) -> Result<MrcaObservables> {
        let (a_event, walk) = self.mrca_walk(t)?;
        let stationary = t >= self.config().t_start;
        let mut p12 = Cursor::forward_after_event(self, a_event);
        let Some(b_event) = p12.next(2) else {
            return Ok(MrcaObservables {
                at_time: t,
                a: a_event.time,
                b: None,
                e: None,
                l: 1,
                i: None,
                z: 0,
                stationary,
            });
        };
        let b = b_event.time;
        if b > t {
            let curve = self.track_fixation_curve(b_event, false);
            return Ok(MrcaObservables {
                at_time: t,
                a: a_event.time,
                b: Some(b),
                e: curve.exit,
                l: 1,
                i: None,
                z: 0,
                stationary,
            });
        }
        let mut z = 1;
        while let Some(e) = p12.next(2) {
            if e.time > t {
                break;
            }
            z += 1;
        }
        let curve = self.track_fixation_curve(b_event, true);
        let l = match curve.level_at(t) {
            Some(l) => l,
            None => {
                return Err(Error::Validation(format!(
                    "fixation curve from {b} exited before {t} although A_{t} precedes it"
                )))
            }
        };
        let above = walk.jumps.partition_point(|&j| j > b);
        Ok(MrcaObservables {
            at_time: t,
            a: a_event.time,
            b: Some(b),
            e: curve.exit,
            l,
            i: Some(self.level_cap() - above as u32),
            z,
            stationary,
        })
    }
}

#[cfg(test)]
mod tests;
