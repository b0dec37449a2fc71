//! `mrca`: simulations, exact tables and the verification suite.
//!
//! Exit codes: 0 success, 1 a verification check failed, 2 usage or
//! configuration error, 3 I/O error.

mod manifest;

use std::fs::{self, File};
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::json;

use manifest::Manifest;
use mrca_core::analytics::{self, mean_var_z, pgf_z, PmfTable};
use mrca_core::export;
use mrca_core::lookdown::{EngineConfig, EventStream, MrcaObservables};
use mrca_core::mutation::{simulate_substitutions, MutationConfig};
use mrca_core::particles::{
    exit_gap_statistics, simulate_with, Init, ParticleSimConfig, Recorder, DEFAULT_PARTICLE_BURN_IN, DEFAULT_PARTICLE_CAP,
};
use mrca_core::verify::{Profile, Suite};

#[derive(Parser, Debug)]
#[command(name = "mrca", version, about = "MRCA process of a stationary Kingman coalescent: simulation, exact laws, verification")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Simulate the finite look-down graph and read off the MRCA process.
    SimulateLookdown(LookdownArgs),
    /// Simulate the fixation-curve particle system.
    SimulateParticles(ParticleArgs),
    /// Print exact tables of the closed-form laws.
    Tables(TableArgs),
    /// Run the acceptance suite.
    Verify(VerifyArgs),
    /// Re-run the command recorded in a manifest.
    Rerun(RerunArgs),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum Format {
    Csv,
    Jsonl,
}

#[derive(Args, Debug)]
struct OutArgs {
    /// Output directory.
    #[arg(long, env = "MRCA_OUT_DIR", default_value = "mrca_out")]
    out: PathBuf,
    #[arg(long, value_enum, default_value_t = Format::Csv)]
    format: Format,
    /// Seed of every random draw; drawn from entropy when absent and
    /// recorded in the manifest.
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Args, Debug)]
struct LookdownArgs {
    /// Number of levels N.
    #[arg(long, default_value_t = 1000)]
    levels: u32,
    #[arg(long, default_value_t = 0.0, allow_negative_numbers = true)]
    t_start: f64,
    #[arg(long, default_value_t = 100.0, allow_negative_numbers = true)]
    t_end: f64,
    /// Extra simulated time before t-start available to backward walks.
    #[arg(long, default_value_t = EngineConfig::DEFAULT_BURN_IN)]
    burn_in: f64,
    /// Number of evenly spaced observable samples in [t-start, t-end].
    #[arg(long, default_value_t = 100)]
    samples: usize,
    /// Also export the coalescent curve back from this time.
    #[arg(long, allow_negative_numbers = true)]
    curve_at: Option<f64>,
    /// Add substitutions with this scaled mutation rate.
    #[arg(long)]
    theta: Option<f64>,
    /// Skip the (large) event log.
    #[arg(long)]
    no_events: bool,
    #[command(flatten)]
    out: OutArgs,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum InitArg {
    Empty,
    Stationary,
}

#[derive(Args, Debug)]
struct ParticleArgs {
    /// Exit cap M.
    #[arg(long, default_value_t = DEFAULT_PARTICLE_CAP)]
    cap: u64,
    #[arg(long, default_value_t = 1000.0)]
    horizon: f64,
    #[arg(long, value_enum, default_value_t = InitArg::Empty)]
    init: InitArg,
    #[arg(long, default_value_t = DEFAULT_PARTICLE_BURN_IN)]
    burn_in: f64,
    /// Delay each exit by a sampled residual climb from the cap.
    #[arg(long)]
    residual: bool,
    /// Skip the trajectory (about `cap` transitions per exit).
    #[arg(long)]
    no_trajectory: bool,
    /// Add substitutions with this scaled mutation rate.
    #[arg(long)]
    theta: Option<f64>,
    #[command(flatten)]
    out: OutArgs,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum Which {
    #[value(name = "L")]
    L,
    #[value(name = "LI")]
    Li,
    #[value(name = "K")]
    K,
    #[value(name = "Z")]
    Z,
    #[value(name = "pi")]
    Pi,
    #[value(name = "Tc")]
    Tc,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum TableFormat {
    Csv,
    Json,
}

#[derive(Args, Debug)]
struct TableArgs {
    #[arg(long, value_enum)]
    which: Which,
    /// Largest value listed (level, z, leading level or K index).
    #[arg(long)]
    max: Option<u64>,
    /// Largest I for the joint (L, I) table.
    #[arg(long, default_value_t = 20)]
    max_i: u64,
    /// Largest number of particles for the stationary configuration table.
    #[arg(long, default_value_t = 3)]
    max_z: usize,
    #[arg(long, value_enum, default_value_t = TableFormat::Csv)]
    format: TableFormat,
    /// Also write the table into this directory.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum ProfileArg {
    Quick,
    Full,
}

#[derive(Args, Debug)]
struct VerifyArgs {
    #[arg(long, value_enum, default_value_t = ProfileArg::Quick)]
    profile: ProfileArg,
    #[arg(long, default_value_t = 20_240_601)]
    seed: u64,
    /// Run only these criteria (comma separated ids).
    #[arg(long, value_delimiter = ',')]
    only: Vec<u8>,
    #[arg(long, env = "MRCA_OUT_DIR", default_value = "mrca_out")]
    out: PathBuf,
}

#[derive(Args, Debug)]
struct RerunArgs {
    manifest: PathBuf,
    /// Write into this directory instead of the recorded one.
    #[arg(long)]
    out: Option<PathBuf>,
}

enum Failure {
    Usage(String),
    Io(String),
    Checks,
}

impl From<io::Error> for Failure {
    fn from(e: io::Error) -> Self {
        Failure::Io(e.to_string())
    }
}

impl From<mrca_core::Error> for Failure {
    fn from(e: mrca_core::Error) -> Self {
        Failure::Usage(e.to_string())
    }
}

type CliResult = Result<(), Failure>;

fn main() -> ExitCode {
    let argv: Vec<String> = std::env::args().collect();
    match run(argv) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Checks) => ExitCode::from(1),
        Err(Failure::Usage(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(2)
        }
        Err(Failure::Io(m)) => {
            eprintln!("I/O error: {m}");
            ExitCode::from(3)
        }
    }
}

fn run(argv: Vec<String>) -> CliResult {
    let cli = match Cli::try_parse_from(&argv) {
        Ok(c) => c,
        Err(e) => {
            let code = e.exit_code();
            let _ = e.print();
            if code == 0 {
                return Ok(());
            }
            return Err(Failure::Usage("invalid arguments".into()));
        }
    };
    match cli.command {
        Command::SimulateLookdown(a) => simulate_lookdown(a, &argv),
        Command::SimulateParticles(a) => simulate_particles(a, &argv),
        Command::Tables(a) => tables(a),
        Command::Verify(a) => verify(a),
        Command::Rerun(a) => rerun(a),
    }
}

/// Returns the seed and the argv to record: the drawn seed and the output
/// directory are made explicit so that a rerun reproduces the files.
fn pin_args(argv: &[String], seed: Option<u64>, out: &Path) -> (u64, Vec<String>) {
    let seed = seed.unwrap_or_else(|| rand::rng().random());
    let mut pinned = Vec::with_capacity(argv.len() + 4);
    let mut skip = false;
    for a in argv.iter().skip(1) {
        if skip {
            skip = false;
            continue;
        }
        if a == "--seed" || a == "--out" {
            skip = true;
            continue;
        }
        if a.starts_with("--seed=") || a.starts_with("--out=") {
            continue;
        }
        pinned.push(a.clone());
    }
    pinned.extend(["--seed".into(), seed.to_string(), "--out".into(), out.display().to_string()]);
    (seed, pinned)
}

struct Outputs {
    dir: PathBuf,
    files: Vec<PathBuf>,
}

impl Outputs {
    fn new(dir: &Path) -> Result<Self, Failure> {
        fs::create_dir_all(dir).map_err(|e| Failure::Io(format!("{}: {e}", dir.display())))?;
        Ok(Outputs {
            dir: dir.to_path_buf(),
            files: Vec::new(),
        })
    }

    fn write(&mut self, name: &str, f: impl FnOnce(&mut BufWriter<File>) -> io::Result<()>) -> CliResult {
        let path = self.dir.join(name);
        let file = File::create(&path).map_err(|e| Failure::Io(format!("{}: {e}", path.display())))?;
        let mut w = BufWriter::new(file);
        f(&mut w).and_then(|_| w.flush()).map_err(|e| Failure::Io(format!("{}: {e}", path.display())))?;
        self.files.push(path);
        Ok(())
    }
}

fn write_obs_jsonl<W: Write>(obs: &[MrcaObservables], mut w: W) -> io::Result<()> {
    for o in obs {
        serde_json::to_writer(&mut w, o)?;
        w.write_all(b"\n")?;
    }
    Ok(())
}

fn simulate_lookdown(a: LookdownArgs, argv: &[String]) -> CliResult {
    let started = Instant::now();
    let (seed, pinned) = pin_args(argv, a.out.seed, &a.out.out);
    let cfg = EngineConfig::new(a.levels, a.t_start, a.t_end, seed).with_burn_in(a.burn_in);
    let stream = EventStream::generate(cfg.clone())?;
    if let Some(theta) = a.theta {
        MutationConfig::new(theta, seed)?;
    }
    let mut out = Outputs::new(&a.out.out)?;
    let mut event_count = 0usize;
    if !a.no_events {
        let events = stream.events_between(cfg.window_start() - 1.0, cfg.t_end);
        event_count = events.len();
        match a.out.format {
            Format::Jsonl => out.write("events.jsonl", |w| export::write_events_jsonl(&events, w))?,
            Format::Csv => out.write("events.csv", |w| {
                writeln!(w, "t,i,j")?;
                for e in &events {
                    writeln!(w, "{},{},{}", export::fmt_f64(e.time), e.src, e.dst)?;
                }
                Ok(())
            })?,
        }
    }
    let pp = stream.mrca_point_process(cfg.t_start, cfg.t_end)?;
    out.write("mrca_pairs.csv", |w| export::write_pairs_csv(&pp.pairs, w))?;

    let mut obs = Vec::new();
    let mut unresolved = 0usize;
    let span = cfg.t_end - cfg.t_start;
    for k in 0..a.samples {
        let t = cfg.t_start + span * (k as f64 + 0.5) / a.samples as f64;
        match stream.observables_at(t) {
            Ok(o) => obs.push(o),
            Err(mrca_core::Error::InsufficientWindow(_)) => unresolved += 1,
            Err(e) => return Err(e.into()),
        }
    }
    match a.out.format {
        Format::Csv => out.write("observables.csv", |w| export::write_observables_csv(&obs, w))?,
        Format::Jsonl => out.write("observables.jsonl", |w| write_obs_jsonl(&obs, w))?,
    }
    if let Some(t) = a.curve_at {
        let curve = stream.coalescent_curve(t, cfg.window_start())?;
        out.write("coalescent_curve.csv", |w| export::write_knots_csv(&curve.knots(), w))?;
    }
    let mut substitutions = None;
    if let Some(theta) = a.theta {
        let m = MutationConfig::new(theta, seed)?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5u64.wrapping_mul(0x9E37_79B9_7F4A_7C15));
        if pp.pairs.len() >= 2 {
            let subs = simulate_substitutions(&pp.pairs, &m, &mut rng)?;
            substitutions = Some(subs.iter().map(|s| s.s).sum::<u64>());
            out.write("substitutions.csv", |w| export::write_substitutions_csv(&subs, w))?;
        }
    }
    let summary = json!({
        "levels": a.levels,
        "window": [cfg.window_start(), cfg.t_end],
        "events": event_count,
        "mrca_pairs": pp.pairs.len(),
        "open_curves": pp.open_curves,
        "observable_samples": obs.len(),
        "unresolved_samples": unresolved,
        "substitutions": substitutions,
    });
    println!("{}", serde_json::to_string_pretty(&summary).expect("json"));
    let config = json!({
        "levels": a.levels, "t_start": a.t_start, "t_end": a.t_end, "burn_in": a.burn_in,
        "samples": a.samples, "curve_at": a.curve_at, "theta": a.theta, "no_events": a.no_events,
        "format": format!("{:?}", a.out.format).to_lowercase(),
    });
    Manifest::new("simulate-lookdown", config, seed, pinned, started, &out.files, summary).write(&out.dir)
}

fn simulate_particles(a: ParticleArgs, argv: &[String]) -> CliResult {
    let started = Instant::now();
    let (seed, pinned) = pin_args(argv, a.out.seed, &a.out.out);
    let mut cfg = ParticleSimConfig::new(a.horizon, seed);
    cfg.particle_cap = a.cap;
    cfg.burn_in = a.burn_in;
    cfg.residual = a.residual;
    cfg.init = match a.init {
        InitArg::Empty => Init::Empty,
        InitArg::Stationary => Init::Stationary,
    };
    cfg.validate()?;
    if let Some(theta) = a.theta {
        MutationConfig::new(theta, seed)?;
    }
    let mut out = Outputs::new(&a.out.out)?;
    let (sim, trajectory) = if a.no_trajectory {
        (simulate_with(&cfg, &mut ())?, None)
    } else {
        let mut rec = Recorder::default();
        let sim = simulate_with(&cfg, &mut rec)?;
        (sim, Some(rec.events))
    };
    if let Some(traj) = &trajectory {
        match a.out.format {
            Format::Jsonl | Format::Csv => out.write("trajectory.jsonl", |w| export::write_trajectory_jsonl(traj, w))?,
        }
    }
    out.write("exits.csv", |w| export::write_exits_csv(&sim.exits, w))?;
    out.write("mrca_pairs.csv", |w| export::write_pairs_csv(&sim.pairs, w))?;
    let gaps = exit_gap_statistics(&sim.exits).ok();
    let mut substitutions = None;
    if let Some(theta) = a.theta {
        let m = MutationConfig::new(theta, seed)?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5u64.wrapping_mul(0x9E37_79B9_7F4A_7C15));
        if sim.pairs.len() >= 2 {
            let subs = simulate_substitutions(&sim.pairs, &m, &mut rng)?;
            substitutions = Some(subs.iter().map(|s| s.s).sum::<u64>());
            out.write("substitutions.csv", |w| export::write_substitutions_csv(&subs, w))?;
        }
    }
    let summary = json!({
        "exits": sim.exits.len(),
        "mrca_pairs": sim.pairs.len(),
        "initial_exits": sim.initial_exits,
        "transitions": sim.transitions,
        "final_state": sim.final_state,
        "truncation_bias": sim.truncation_bias,
        "gap_statistics": gaps,
        "substitutions": substitutions,
    });
    if let Some(g) = &gaps {
        out.write("gap_statistics.json", |w| {
            serde_json::to_writer_pretty(&mut *w, g)?;
            w.write_all(b"\n")
        })?;
    }
    println!("{}", serde_json::to_string_pretty(&summary).expect("json"));
    let config = json!({
        "cap": a.cap, "horizon": a.horizon, "init": format!("{:?}", a.init).to_lowercase(),
        "burn_in": a.burn_in, "residual": a.residual, "no_trajectory": a.no_trajectory, "theta": a.theta,
        "format": format!("{:?}", a.out.format).to_lowercase(),
    });
    Manifest::new("simulate-particles", config, seed, pinned, started, &out.files, summary).write(&out.dir)
}

fn table_for(a: &TableArgs) -> Result<PmfTable, Failure> {
    Ok(match a.which {
        Which::L => analytics::table_l(a.max.unwrap_or(20))?,
        Which::Li => analytics::table_li(a.max.unwrap_or(10), a.max_i),
        Which::K => analytics::table_k(a.max.unwrap_or(10))?,
        Which::Z => analytics::table_z(a.max.unwrap_or(20).min(u32::MAX as u64) as u32),
        Which::Pi => analytics::table_pi(a.max.unwrap_or(10), a.max_z),
        Which::Tc => analytics::table_tc(a.max.unwrap_or(20)),
    })
}

fn table_name(w: Which) -> &'static str {
    match w {
        Which::L => "L",
        Which::Li => "LI",
        Which::K => "K",
        Which::Z => "Z",
        Which::Pi => "pi",
        Which::Tc => "Tc",
    }
}

fn render_table(a: &TableArgs, table: &PmfTable) -> Result<Vec<u8>, Failure> {
    let mut buf = Vec::new();
    let pgf: Vec<(f64, f64)> = if a.which == Which::Z {
        [0.0, 0.25, 0.5, 0.75, 1.0]
            .into_iter()
            .map(|u| pgf_z(u).map(|p| (u, p.value)))
            .collect::<Result<_, _>>()?
    } else {
        Vec::new()
    };
    let moments = match a.which {
        Which::Z => Some(mean_var_z()),
        Which::Tc => Some((analytics::expected_tc(), f64::NAN)),
        _ => None,
    };
    match a.format {
        TableFormat::Csv => {
            table.write_csv(&mut buf).map_err(|e| Failure::Io(e.to_string()))?;
            if !pgf.is_empty() {
                buf.extend_from_slice(b"\nu,pgf\n");
                for (u, v) in &pgf {
                    buf.extend_from_slice(format!("{},{}\n", export::fmt_f64(*u), export::fmt_f64(*v)).as_bytes());
                }
            }
            match (a.which, moments) {
                (Which::Z, Some((m, v))) => {
                    buf.extend_from_slice(format!("\nmean,var\n{},{}\n", export::fmt_f64(m), export::fmt_f64(v)).as_bytes())
                }
                (Which::Tc, Some((m, _))) => buf.extend_from_slice(format!("\nmean\n{}\n", export::fmt_f64(m)).as_bytes()),
                _ => {}
            }
        }
        TableFormat::Json => {
            let mut v = json!({ "table": table_name(a.which), "rows": table.rows, "tail_bound": table.tail_bound });
            if !pgf.is_empty() {
                v["pgf"] = json!(pgf.iter().map(|(u, p)| json!({"u": u, "pgf": p})).collect::<Vec<_>>());
            }
            match (a.which, moments) {
                (Which::Z, Some((m, var))) => v["moments"] = json!({"mean": m, "var": var}),
                (Which::Tc, Some((m, _))) => v["moments"] = json!({ "mean": m }),
                _ => {}
            }
            serde_json::to_writer_pretty(&mut buf, &v).expect("json");
            buf.push(b'\n');
        }
    }
    Ok(buf)
}

fn tables(a: TableArgs) -> CliResult {
    let table = table_for(&a)?;
    let bytes = render_table(&a, &table)?;
    io::stdout().write_all(&bytes)?;
    if let Some(dir) = &a.out {
        let mut out = Outputs::new(dir)?;
        let ext = match a.format {
            TableFormat::Csv => "csv",
            TableFormat::Json => "json",
        };
        out.write(&format!("table_{}.{ext}", table_name(a.which)), |w| w.write_all(&bytes))?;
    }
    Ok(())
}

fn verify(a: VerifyArgs) -> CliResult {
    let profile = match a.profile {
        ProfileArg::Quick => Profile::Quick,
        ProfileArg::Full => Profile::Full,
    };
    let suite = Suite::new(profile, a.seed);
    let report = if a.only.is_empty() {
        suite.run_all()
    } else {
        suite.prepare_for(&a.only);
        let criteria: Vec<_> = a.only.iter().map(|&id| suite.run(id)).collect();
        mrca_core::verify::VerifyReport {
            profile,
            seed: a.seed,
            sizes: suite.sizes,
            pass: criteria.iter().all(|c| c.pass),
            criteria,
        }
    };
    for c in &report.criteria {
        println!("{}", c.summary_line());
    }
    let mut out = Outputs::new(&a.out)?;
    out.write("verify_report.json", |w| {
        serde_json::to_writer_pretty(&mut *w, &report)?;
        w.write_all(b"\n")
    })?;
    println!(
        "{} ({} profile, seed {}); report in {}",
        if report.pass { "all criteria pass" } else { "some criteria FAIL" },
        a.profile.to_possible_value().expect("value").get_name(),
        a.seed,
        out.dir.join("verify_report.json").display()
    );
    if report.pass {
        Ok(())
    } else {
        Err(Failure::Checks)
    }
}

fn rerun(a: RerunArgs) -> CliResult {
    let text = fs::read_to_string(&a.manifest).map_err(|e| Failure::Io(format!("{}: {e}", a.manifest.display())))?;
    let m: Manifest = serde_json::from_str(&text).map_err(|e| Failure::Usage(format!("bad manifest: {e}")))?;
    let mut argv = vec!["mrca".to_string()];
    let mut args = m.argv.clone();
    if let Some(dir) = a.out {
        if let Some(pos) = args.iter().position(|x| x == "--out") {
            args[pos + 1] = dir.display().to_string();
        }
    }
    argv.extend(args);
    run(argv)
}
