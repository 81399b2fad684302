//! `deobs`: compress, verify, benchmark and generate observation traces.
//!
//! Exit codes: 0 success, 1 verification failure, 2 usage or input error.

use std::fmt::Write as _;
use std::path::PathBuf;
use std::process::ExitCode;
use std::time::{Duration, Instant};

use clap::{Parser, Subcommand, ValueEnum};
use sha2::{Digest, Sha256};

use deobs_core::analytics::{sweep, AnalyticsReport};
use deobs_core::store::NaiveStore;
use deobs_core::trace_io::{generate, load_buffer, save_buffer, GeneratorKind};
use deobs_core::{
    Batch, GeneratorParams, ObservationStore, ReplayBuffer, StorageMode, StoreConfig, Trace,
};

#[derive(Parser, Debug)]
#[command(name = "deobs", version, about = "Lossless differential compression of image observations")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum Format {
    Human,
    Csv,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum Mode {
    Full,
    Half,
    None,
}

impl From<Mode> for StorageMode {
    fn from(m: Mode) -> Self {
        match m {
            Mode::Full => StorageMode::Full,
            Mode::Half => StorageMode::Half,
            Mode::None => StorageMode::None,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum GenKind {
    Static,
    Drift,
    Noise,
    Episodic,
}

#[derive(clap::Args, Debug)]
struct StoreArgs {
    /// Frame stack length.
    #[arg(long = "f", default_value_t = 4)]
    frame_stack: usize,
    #[arg(long, value_enum, default_value_t = Mode::Full)]
    mode: Mode,
    /// Ring capacity in steps. Defaults to the trace length rounded up to a
    /// multiple of the frame stack, so nothing is evicted.
    #[arg(long)]
    capacity: Option<usize>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Replay a trace into a store, report memory statistics and optionally
    /// write the buffer file.
    Compress {
        trace: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
        #[command(flatten)]
        store: StoreArgs,
        #[arg(long, value_enum, default_value_t = Format::Human)]
        format: Format,
    },
    /// Check that a store (or a saved buffer file) reproduces every state of
    /// the trace bit-exactly.
    Verify {
        trace: PathBuf,
        #[command(flatten)]
        store: StoreArgs,
        /// Verify this buffer file against the trace instead of a fresh store.
        #[arg(long)]
        buffer: Option<PathBuf>,
        #[arg(long, value_enum, default_value_t = Format::Human)]
        format: Format,
    },
    /// Measure append, get and sampling throughput.
    Bench {
        trace: PathBuf,
        #[command(flatten)]
        store: StoreArgs,
        #[arg(long, default_value_t = 32)]
        batch: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Number of sampled transition batches.
        #[arg(long, default_value_t = 200)]
        batches: usize,
        #[arg(long, value_enum, default_value_t = Format::Human)]
        format: Format,
    },
    /// Tabulate the theoretical compression factor over f and phi grids.
    Theory {
        #[arg(long = "f", value_delimiter = ',', num_args = 1.., default_values_t = [1usize, 2, 3, 4, 6, 8, 10])]
        frame_stacks: Vec<usize>,
        #[arg(long, value_delimiter = ',', num_args = 1.., default_values_t = [0.0, 0.05, 0.1, 0.25, 0.5])]
        phi: Vec<f64>,
        #[arg(long, default_value_t = 84)]
        image_side: usize,
        #[arg(long, value_enum, default_value_t = Format::Human)]
        format: Format,
    },
    /// Write a synthetic trace.
    Gen {
        #[arg(value_enum)]
        kind: GenKind,
        /// Frame count (same as --frames).
        #[arg(value_name = "FRAMES")]
        count: Option<usize>,
        #[arg(long)]
        frames: Option<usize>,
        #[arg(long, default_value_t = 84)]
        height: usize,
        #[arg(long, default_value_t = 84)]
        width: usize,
        #[arg(long, default_value_t = 5)]
        blob: usize,
        #[arg(long, default_value_t = 1)]
        velocity: usize,
        /// Per-pixel change probability for noise segments.
        #[arg(long, default_value_t = 0.05)]
        rho: f64,
        #[arg(long, default_value_t = 20)]
        min_len: usize,
        #[arg(long, default_value_t = 200)]
        max_len: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, value_enum, default_value_t = Format::Human)]
        format: Format,
    },
}

#[derive(Debug)]
enum Failure {
    Usage(String),
    Verify(String),
}

impl From<deobs_core::Error> for Failure {
    fn from(e: deobs_core::Error) -> Self {
        Failure::Usage(e.to_string())
    }
}

type CmdResult = Result<(), Failure>;

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Verify(msg)) => {
            eprintln!("deobs: verification failed: {msg}");
            ExitCode::from(1)
        }
        Err(Failure::Usage(msg)) => {
            eprintln!("deobs: {msg}");
            ExitCode::from(2)
        }
    }
}

fn run(command: Command) -> CmdResult {
    match command {
        Command::Compress {
            trace,
            out,
            store,
            format,
        } => compress(&trace, out, &store, format),
        Command::Verify {
            trace,
            store,
            buffer,
            format,
        } => verify(&trace, &store, buffer, format),
        Command::Bench {
            trace,
            store,
            batch,
            seed,
            batches,
            format,
        } => bench(&trace, &store, batch, seed, batches, format),
        Command::Theory {
            frame_stacks,
            phi,
            image_side,
            format,
        } => theory(&frame_stacks, &phi, image_side, format),
        Command::Gen {
            kind,
            count,
            frames,
            height,
            width,
            blob,
            velocity,
            rho,
            min_len,
            max_len,
            seed,
            out,
            format,
        } => {
            let frames = match (count, frames) {
                (Some(a), Some(b)) if a != b => {
                    return Err(Failure::Usage(format!("frame count given twice ({a} and {b})")))
                }
                (a, b) => a.or(b).unwrap_or(1000),
            };
            let kind = match kind {
                GenKind::Static => GeneratorKind::Static,
                GenKind::Drift => GeneratorKind::Drift { blob, velocity },
                GenKind::Noise => GeneratorKind::Noise { rho },
                GenKind::Episodic => GeneratorKind::Episodic {
                    min_len,
                    max_len,
                    blob,
                    velocity,
                    rho,
                },
            };
            let params = GeneratorParams::new(kind, frames).with_size(height, width);
            gen(&params, seed, &out, format)
        }
    }
}

impl StoreArgs {
    /// Validates flags that do not depend on the trace.
    fn check(&self) -> CmdResult {
        if self.frame_stack == 0 {
            return Err(Failure::Usage("--f must be at least 1".into()));
        }
        if let Some(cap) = self.capacity {
            if cap == 0 || cap % self.frame_stack != 0 {
                return Err(Failure::Usage(format!(
                    "--capacity {cap} must be a positive multiple of --f {}",
                    self.frame_stack
                )));
            }
        }
        Ok(())
    }

    fn config(&self, trace: &Trace) -> Result<StoreConfig, Failure> {
        let f = self.frame_stack;
        let capacity = self.capacity.unwrap_or_else(|| trace.len().div_ceil(f) * f);
        Ok(StoreConfig::new(capacity, f, trace.height(), trace.width(), self.mode.into())?)
    }
}

fn load_trace(path: &PathBuf) -> Result<Trace, Failure> {
    Trace::load(path).map_err(|e| Failure::Usage(format!("{}: {e}", path.display())))
}

fn replay(trace: &Trace, config: StoreConfig) -> Result<ReplayBuffer, Failure> {
    let mut buffer = ReplayBuffer::new(config, 1)?;
    trace.replay_into(&mut buffer)?;
    Ok(buffer)
}

fn compress(trace_path: &PathBuf, out: Option<PathBuf>, args: &StoreArgs, format: Format) -> CmdResult {
    args.check()?;
    let trace = load_trace(trace_path)?;
    let buffer = replay(&trace, args.config(&trace)?)?;
    if let Some(out) = out {
        save_buffer(&buffer, &out).map_err(|e| Failure::Usage(format!("{}: {e}", out.display())))?;
    }
    let report = buffer.stats();
    match format {
        Format::Human => println!("{report}"),
        Format::Csv => println!("{}\n{}", AnalyticsReport::CSV_HEADER, report.csv_row()),
    }
    Ok(())
}

fn verify(trace_path: &PathBuf, args: &StoreArgs, buffer_path: Option<PathBuf>, format: Format) -> CmdResult {
    args.check()?;
    let trace = load_trace(trace_path)?;
    let flags = trace.start_flags();

    let (candidate, checked) = match buffer_path {
        Some(path) => {
            // a buffer file that does not parse counts as a failed verification
            let loaded = load_buffer(&path).map_err(|e| Failure::Verify(format!("{}: {e}", path.display())))?;
            let config = loaded.config().clone();
            if loaded.len() != trace.len() as u64 {
                return Err(Failure::Verify(format!(
                    "buffer holds {} steps, trace has {}",
                    loaded.len(),
                    trace.len()
                )));
            }
            let mut naive = NaiveStore::new(StoreConfig { mode: StorageMode::None, ..config })?;
            for (i, frame) in trace.frames().iter().enumerate() {
                naive.append(frame, flags[i])?;
            }
            let checked = compare(loaded.store(), &naive)?;
            (loaded, checked)
        }
        None => {
            let config = args.config(&trace)?;
            let mut store = ReplayBuffer::new(config.clone(), 1)?;
            let mut naive = NaiveStore::new(StoreConfig { mode: StorageMode::None, ..config })?;
            for (i, frame) in trace.frames().iter().enumerate() {
                let next_is_start = flags.get(i + 1).copied().unwrap_or(false);
                let step = store.add(frame, &trace.synthetic_meta(i, next_is_start), flags[i])?;
                naive.append(frame, flags[i])?;
                if naive.valid_range().is_some_and(|(_, hi)| hi == step) {
                    let want = naive.get(step)?;
                    if store.get(step).ok().as_ref() != Some(&want) {
                        return Err(Failure::Verify(format!("state {step} differs right after append")));
                    }
                }
            }
            let checked = compare(store.store(), &naive)?;
            (store, checked)
        }
    };
    let mode = candidate.config().mode;
    match format {
        Format::Human => println!("ok: {checked} states of {} steps match ({mode})", trace.len()),
        Format::Csv => println!("status,mode,steps,states_checked\nok,{mode},{},{checked}", trace.len()),
    }
    Ok(())
}

/// Compares every readable state of `store` against `naive`.
fn compare(store: &dyn ObservationStore, naive: &NaiveStore) -> Result<u64, Failure> {
    let want_range = naive.valid_range();
    if store.valid_range() != want_range {
        return Err(Failure::Verify(format!(
            "valid range {:?}, expected {want_range:?}",
            store.valid_range()
        )));
    }
    let Some((lo, hi)) = want_range else { return Ok(0) };
    for step in lo..=hi {
        let want = naive.get(step)?;
        match store.get(step) {
            Ok(got) if got == want => {}
            Ok(_) => return Err(Failure::Verify(format!("first divergence at step {step}"))),
            Err(e) => return Err(Failure::Verify(format!("step {step} unreadable: {e}"))),
        }
    }
    Ok(hi - lo + 1)
}

fn hash_batch(hasher: &mut Sha256, batch: &Batch) {
    for i in &batch.indices {
        hasher.update(i.to_le_bytes());
    }
    hasher.update(batch.states_contiguous());
    if let Some(next) = batch.next_states_contiguous() {
        hasher.update(next);
    }
    hasher.update(&batch.actions);
    for r in &batch.rewards {
        hasher.update(r.to_bits().to_le_bytes());
    }
    hasher.update(batch.dones.iter().map(|&d| d as u8).collect::<Vec<_>>());
}

fn per_sec(ops: u64, elapsed: Duration) -> f64 {
    ops as f64 / elapsed.as_secs_f64().max(1e-9)
}

fn bench(
    trace_path: &PathBuf,
    args: &StoreArgs,
    batch: usize,
    seed: u64,
    batches: usize,
    format: Format,
) -> CmdResult {
    args.check()?;
    if batch == 0 {
        return Err(Failure::Usage("--batch must be at least 1".into()));
    }
    let trace = load_trace(trace_path)?;
    let config = args.config(&trace)?;
    let mode = config.mode;
    let wall = Instant::now();

    let start = Instant::now();
    let buffer = replay(&trace, config)?;
    let append_rate = per_sec(trace.len() as u64, start.elapsed());

    let start = Instant::now();
    let mut gets = 0u64;
    if let Some((lo, hi)) = buffer.valid_range() {
        for step in lo..=hi {
            std::hint::black_box(buffer.get(step)?);
            gets += 1;
        }
    }
    let get_rate = per_sec(gets, start.elapsed());

    let start = Instant::now();
    let mut hasher = Sha256::new();
    for k in 0..batches as u64 {
        let sampled = buffer.sample_transitions(batch, seed.wrapping_add(k))?;
        hash_batch(&mut hasher, &sampled);
    }
    let batch_rate = per_sec(batches as u64, start.elapsed());
    let wall_secs = wall.elapsed().as_secs_f64();
    let checksum: String = hasher.finalize().iter().fold(String::new(), |mut s, b| {
        let _ = write!(s, "{b:02x}");
        s
    });

    match format {
        Format::Human => {
            println!("mode            {mode}");
            println!("steps           {}", trace.len());
            println!("append ops/s    {append_rate:.1}");
            println!("get ops/s       {get_rate:.1}");
            println!("batches/s       {batch_rate:.1}");
            println!("wall seconds    {wall_secs:.3}");
            println!("checksum        {checksum}");
        }
        Format::Csv => {
            println!("mode,f,steps,batch,batches,seed,append_ops_per_sec,get_ops_per_sec,batches_per_sec,wall_seconds,checksum");
            println!(
                "{mode},{},{},{batch},{batches},{seed},{append_rate:.1},{get_rate:.1},{batch_rate:.1},{wall_secs:.3},{checksum}",
                args.frame_stack,
                trace.len()
            );
        }
    }
    Ok(())
}

fn theory(frame_stacks: &[usize], phi: &[f64], image_side: usize, format: Format) -> CmdResult {
    if image_side == 0 || image_side > 256 {
        return Err(Failure::Usage(format!("--image-side {image_side} outside 1..=256")));
    }
    if frame_stacks.contains(&0) {
        return Err(Failure::Usage("--f values must be at least 1".into()));
    }
    let rows = sweep(frame_stacks, phi, image_side * image_side)?;
    match format {
        Format::Csv => {
            println!("f,phi,factor");
            for r in rows {
                println!("{},{},{:.6}", r.frame_stack, r.phi, r.factor);
            }
        }
        Format::Human => {
            print!("{:>6}", "f \\ phi");
            for p in phi {
                print!(" {p:>9}");
            }
            println!();
            for chunk in rows.chunks(phi.len()) {
                print!("{:>7}", chunk[0].frame_stack);
                for r in chunk {
                    print!(" {:>9.4}", r.factor);
                }
                println!();
            }
        }
    }
    Ok(())
}

/// Mean fraction of pixels that change between consecutive frames of the
/// same episode.
fn measured_density(trace: &Trace) -> Option<f64> {
    let flags = trace.start_flags();
    let frames = trace.frames();
    let (mut changed, mut pairs) = (0u64, 0u64);
    for i in 1..frames.len() {
        if flags[i] {
            continue;
        }
        changed += frames[i - 1]
            .pixels()
            .iter()
            .zip(frames[i].pixels())
            .filter(|(a, b)| a != b)
            .count() as u64;
        pairs += 1;
    }
    (pairs > 0).then(|| changed as f64 / (pairs as f64 * (trace.height() * trace.width()) as f64))
}

fn gen(params: &GeneratorParams, seed: u64, out: &PathBuf, format: Format) -> CmdResult {
    params.validate()?;
    let trace = generate(params, seed)?;
    trace.save(out).map_err(|e| Failure::Usage(format!("{}: {e}", out.display())))?;
    let fmt = |v: Option<f64>| v.map_or_else(|| "n/a".to_string(), |x| format!("{x:.6}"));
    let expected = fmt(params.expected_change_density());
    let measured = fmt(measured_density(&trace));
    match format {
        Format::Human => {
            println!("frames            {}", trace.len());
            println!("episodes          {}", trace.episode_starts().len());
            println!("expected density  {expected}");
            println!("measured density  {measured}");
        }
        Format::Csv => {
            println!("frames,episodes,height,width,expected_density,measured_density");
            println!(
                "{},{},{},{},{expected},{measured}",
                trace.len(),
                trace.episode_starts().len(),
                trace.height(),
                trace.width()
            );
        }
    }
    Ok(())
}
