//! Walks through the events of a stream in time order, seeing only events
//! whose target level is at most a bound that the caller may change between
//! steps. Only bands up to the bound are touched, which is what makes deep
//! genealogies at large `N` affordable.

use std::cmp::Ordering;
use std::sync::Arc;

use super::stream::{band_of, EventStream, LookdownEvent};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum Dir {
    Forward,
    Backward,
}

#[derive(Clone)]
struct Lane {
    k: i64,
    // forward: candidate is cell[i]; backward: candidate is cell[i - 1]
    i: usize,
    cell: Arc<Vec<LookdownEvent>>,
    // next event passing the filter, for the bound it was computed with
    memo: Option<(u32, Option<LookdownEvent>)>,
}

pub(crate) struct Cursor<'a> {
    stream: &'a EventStream,
    dir: Dir,
    last: LookdownEvent,
    lanes: Vec<Option<Lane>>,
}

impl<'a> Cursor<'a> {
    /// Forward cursor returning events strictly after time `t` (all events
    /// at `t` are skipped).
    pub fn forward_after(stream: &'a EventStream, t: f64) -> Self {
        Self::new(stream, Dir::Forward, LookdownEvent::new(t, u32::MAX, u32::MAX))
    }

    /// Forward cursor returning events strictly after `e` in key order.
    pub fn forward_after_event(stream: &'a EventStream, e: LookdownEvent) -> Self {
        Self::new(stream, Dir::Forward, e)
    }

    /// Backward cursor returning events at or before time `t`.
    pub fn backward_from(stream: &'a EventStream, t: f64) -> Self {
        Self::new(stream, Dir::Backward, LookdownEvent::new(t, u32::MAX, u32::MAX))
    }

    fn new(stream: &'a EventStream, dir: Dir, last: LookdownEvent) -> Self {
        Cursor {
            stream,
            dir,
            last,
            lanes: vec![None; stream.band_count()],
        }
    }

    fn beyond_last(&self, e: &LookdownEvent) -> bool {
        match self.dir {
            Dir::Forward => e.cmp_key(&self.last) == Ordering::Greater,
            Dir::Backward => e.cmp_key(&self.last) == Ordering::Less,
        }
    }

    fn init_lane(&self, b: usize) -> Lane {
        let k = self.stream.slice_of(b, self.last.time);
        let cell = self.stream.cell(b, k);
        let i = match self.dir {
            Dir::Forward => cell.partition_point(|e| e.cmp_key(&self.last) != Ordering::Greater),
            Dir::Backward => cell.partition_point(|e| e.cmp_key(&self.last) == Ordering::Less),
        };
        Lane { k, i, cell, memo: None }
    }

    /// Current candidate of a lane, moving across cells as needed; `None`
    /// once the lane leaves the simulated window.
    fn peek(stream: &EventStream, dir: Dir, b: usize, lane: &mut Lane) -> Option<LookdownEvent> {
        let cfg = stream.config();
        match dir {
            Dir::Forward => {
                while lane.i == lane.cell.len() {
                    if stream.slice_start(b, lane.k + 1) > cfg.t_end {
                        return None;
                    }
                    lane.k += 1;
                    lane.cell = stream.cell(b, lane.k);
                    lane.i = 0;
                }
                Some(lane.cell[lane.i])
            }
            Dir::Backward => {
                while lane.i == 0 {
                    if stream.slice_end(b, lane.k - 1) < cfg.window_start() {
                        return None;
                    }
                    lane.k -= 1;
                    lane.cell = stream.cell(b, lane.k);
                    lane.i = lane.cell.len();
                }
                Some(lane.cell[lane.i - 1])
            }
        }
    }

    fn advance(dir: Dir, lane: &mut Lane) {
        match dir {
            Dir::Forward => lane.i += 1,
            Dir::Backward => lane.i -= 1,
        }
    }

    fn head(&mut self, b: usize, bound: Option<u32>) -> Option<LookdownEvent> {
        if self.lanes[b].is_none() {
            self.lanes[b] = Some(self.init_lane(b));
        }
        let (stream, dir) = (self.stream, self.dir);
        let mut lane = self.lanes[b].take().expect("initialised");
        // move the base past everything already consumed
        while let Some(e) = Self::peek(stream, dir, b, &mut lane) {
            if self.beyond_last(&e) {
                break;
            }
            Self::advance(dir, &mut lane);
        }
        let out = match bound {
            None => Self::peek(stream, dir, b, &mut lane),
            Some(max) => {
                let cached = match lane.memo {
                    Some((m, Some(e))) if m == max && self.beyond_last(&e) => Some(Some(e)),
                    Some((m, None)) if m == max => Some(None),
                    _ => None,
                };
                match cached {
                    Some(hit) => hit,
                    None => {
                        let mut probe = lane.clone();
                        let found = loop {
                            match Self::peek(stream, dir, b, &mut probe) {
                                Some(e) if e.dst <= max => break Some(e),
                                Some(_) => Self::advance(dir, &mut probe),
                                None => break None,
                            }
                        };
                        lane.memo = Some((max, found));
                        found
                    }
                }
            }
        };
        self.lanes[b] = Some(lane);
        out
    }

    /// Next event (in the cursor's direction) whose target level is at most
    /// `max_dst`, or `None` when the window is exhausted first.
    pub fn next(&mut self, max_dst: u32) -> Option<LookdownEvent> {
        let max_dst = max_dst.min(self.stream.level_cap());
        if max_dst < 2 {
            return None;
        }
        let top = band_of(max_dst);
        let mut best: Option<LookdownEvent> = None;
        for b in 0..=top {
            let bound = if b == top { Some(max_dst) } else { None };
            if let Some(e) = self.head(b, bound) {
                let better = match (&best, self.dir) {
                    (None, _) => true,
                    (Some(cur), Dir::Forward) => e.cmp_key(cur) == Ordering::Less,
                    (Some(cur), Dir::Backward) => e.cmp_key(cur) == Ordering::Greater,
                };
                if better {
                    best = Some(e);
                }
            }
        }
        if let Some(e) = best {
            self.last = e;
        }
        best
    }
}
