//! Plain-text exports. Floats use the shortest representation that reads
//! back to the same value, so files are byte-identical across platforms for
//! identical runs. CSV uses LF line endings.

use std::io::{self, Write};

use serde::Serialize;

use crate::lookdown::{LookdownEvent, MrcaObservables, MrcaPair};
use crate::mutation::SubstitutionEvent;
use crate::particles::{TransitionEvent, TransitionKind};

/// Shortest round-trip rendering of a float. `Display` already prints the
/// shortest string that parses back exactly and never uses exponents.
pub fn fmt_f64(x: f64) -> String {
    if x == 0.0 {
        "0".into()
    } else {
        format!("{x}")
    }
}

fn json_line<W: Write, T: Serialize>(out: &mut W, value: &T) -> io::Result<()> {
    serde_json::to_writer(&mut *out, value)?;
    out.write_all(b"\n")
}

fn csv_writer<W: Write>(out: W) -> csv::Writer<W> {
    csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(out)
}

fn csv_io(e: csv::Error) -> io::Error {
    match e.into_kind() {
        csv::ErrorKind::Io(e) => e,
        other => io::Error::other(format!("{other:?}")),
    }
}

/// One `{"t", "i", "j"}` record per line, in time order.
pub fn write_events_jsonl<W: Write>(events: &[LookdownEvent], mut out: W) -> io::Result<()> {
    for e in events {
        json_line(&mut out, e)?;
    }
    out.flush()
}

fn write_rows<W: Write, const K: usize>(header: [&str; K], rows: impl Iterator<Item = [String; K]>, out: W) -> io::Result<()> {
    let mut w = csv_writer(out);
    w.write_record(header).map_err(csv_io)?;
    for r in rows {
        w.write_record(&r).map_err(csv_io)?;
    }
    w.flush()
}

/// `E,B`.
pub fn write_pairs_csv<W: Write>(pairs: &[MrcaPair], out: W) -> io::Result<()> {
    write_rows(["E", "B"], pairs.iter().map(|p| [fmt_f64(p.e), fmt_f64(p.b)]), out)
}

/// `time,level` knots of a step function.
pub fn write_knots_csv<W: Write, L: ToString>(knots: &[(f64, L)], out: W) -> io::Result<()> {
    write_rows(["time", "level"], knots.iter().map(|(t, l)| [fmt_f64(*t), l.to_string()]), out)
}

/// Single column `E`.
pub fn write_exits_csv<W: Write>(exits: &[f64], out: W) -> io::Result<()> {
    write_rows(["E"], exits.iter().map(|e| [fmt_f64(*e)]), out)
}

/// `E,S`.
pub fn write_substitutions_csv<W: Write>(events: &[SubstitutionEvent], out: W) -> io::Result<()> {
    write_rows(["E", "S"], events.iter().map(|s| [fmt_f64(s.e), s.s.to_string()]), out)
}

/// `t,A,B,E,L,I,Z,stationary`; unresolved times are empty and `I = inf`
/// marks the infinity case.
pub fn write_observables_csv<W: Write>(obs: &[MrcaObservables], out: W) -> io::Result<()> {
    let opt = |x: Option<f64>| x.map(fmt_f64).unwrap_or_default();
    write_rows(
        ["t", "A", "B", "E", "L", "I", "Z", "stationary"],
        obs.iter().map(|o| {
            [
                fmt_f64(o.at_time),
                fmt_f64(o.a),
                opt(o.b),
                opt(o.e),
                o.l.to_string(),
                o.i.map_or_else(|| "inf".to_string(), |i| i.to_string()),
                o.z.to_string(),
                o.stationary.to_string(),
            ]
        }),
        out,
    )
}

#[derive(Serialize)]
struct TrajectoryRecord<'a> {
    t: f64,
    kind: &'static str,
    k: Option<usize>,
    levels: &'a [u64],
}

/// `{"t", "kind", "k", "levels"}` per transition; `k` is null for arrivals
/// and, for exits, counts the particles pushed by the triggering move.
pub fn write_trajectory_jsonl<W: Write>(events: &[TransitionEvent], mut out: W) -> io::Result<()> {
    for ev in events {
        let (kind, k) = match ev.kind {
            TransitionKind::Push { k } => ("push", Some(k)),
            TransitionKind::Arrival => ("arrival", None),
            TransitionKind::Exit { k, .. } => ("exit", Some(k)),
        };
        json_line(
            &mut out,
            &TrajectoryRecord {
                t: ev.time,
                kind,
                k,
                levels: ev.levels.levels(),
            },
        )?;
    }
    out.flush()
}
