//! `porepath` command-line interface.

mod error;
mod manifest;

use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use porepath::eval::bench::{self, BenchConfig, BenchReport};
use porepath::eval::metrics::{base_identity, state_accuracy};
use porepath::eval::oracle;
use porepath::eval::sweep::{self, SweepConfig};
use porepath::formats::{self, FastaRecord};
use porepath::pipeline::{run_channels, ChannelConfig, ChannelOutput, ChunkSize, Detector, EventSource, VecSource};
use porepath::{
    load_model, save_model, simulate, synth_model, Cost, KmerModel, SimulationSpec, TransitionKinetics, Variant,
    DEFAULT_LEVEL_SPREAD, DEFAULT_SIGMA_BASE,
};

use error::{CliError, CliResult};
use manifest::RunManifest;

#[derive(Parser)]
#[command(name = "porepath", version, about = "Viterbi detection of nanopore event streams")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate or inspect k-mer models.
    #[command(subcommand)]
    Model(ModelCmd),
    /// Simulate a ground-truthed event stream.
    Simulate(SimulateArgs),
    /// Decode event files into reads.
    Detect(DetectArgs),
    /// Accuracy experiments.
    #[command(subcommand)]
    Eval(EvalCmd),
    /// Measure decode throughput.
    Bench(BenchArgs),
    /// Compare the trellis against exhaustive enumeration.
    Oracle(OracleArgs),
}

#[derive(Subcommand)]
enum ModelCmd {
    /// Write a synthetic model.
    Gen(ModelGenArgs),
    /// Summarize a model file.
    Inspect {
        path: PathBuf,
    },
}

#[derive(Args)]
struct ModelGenArgs {
    #[arg(short, long)]
    k: usize,
    #[arg(long)]
    seed: u64,
    #[arg(long, default_value_t = DEFAULT_LEVEL_SPREAD)]
    spread: f64,
    #[arg(long, default_value_t = DEFAULT_SIGMA_BASE)]
    sigma: f64,
    /// `p_stay,p_step,p_skip`; all three must be positive.
    #[arg(long, value_parser = parse_kinetics)]
    kinetics: Option<TransitionKinetics>,
    #[arg(short, long)]
    output: PathBuf,
}

#[derive(Args)]
struct SimulateArgs {
    #[arg(short, long)]
    model: PathBuf,
    /// Bases in the true sequence.
    #[arg(long = "len")]
    seq_len: usize,
    /// Noise level in dB, or `inf` for noiseless events.
    #[arg(long, value_parser = parse_snr)]
    snr: f64,
    #[arg(long)]
    seed: u64,
    /// Walk kinetics `p_stay,p_step,p_skip`; defaults to the model's.
    #[arg(long, value_parser = parse_kinetics)]
    kinetics: Option<TransitionKinetics>,
    #[arg(long, default_value_t = 0)]
    channel: u32,
    /// Write `<prefix>.txt` text events instead of `<prefix>.ppev`.
    #[arg(long)]
    text: bool,
    /// Output prefix; writes `<prefix>.ppev` and `<prefix>.truth`.
    #[arg(short, long)]
    output: PathBuf,
}

#[derive(Args)]
struct DetectArgs {
    #[arg(short, long)]
    model: PathBuf,
    /// Event files, one channel each.
    #[arg(short, long = "input", required = true, num_args = 1..)]
    inputs: Vec<PathBuf>,
    /// Events per chunk (2..=512) or `inf`.
    #[arg(long, default_value = "512", value_parser = parse_chunk)]
    chunk_len: ChunkSize,
    #[arg(long, default_value = "optimized", value_parser = parse_variant)]
    variant: Variant,
    #[arg(long, default_value_t = 1)]
    workers: usize,
    /// Nominal events per second per channel, for deadline reporting.
    #[arg(long, default_value_t = 450.0)]
    event_rate: f64,
    /// FASTA output.
    #[arg(short, long)]
    output: PathBuf,
    /// Optional state-path TSV.
    #[arg(long)]
    states: Option<PathBuf>,
}

#[derive(Subcommand)]
enum EvalCmd {
    /// Accuracy over an SNR x chunk-size grid.
    Sweep(SweepArgs),
    /// Score a decoded read against a truth sidecar.
    Score(ScoreArgs),
}

#[derive(Args)]
struct SweepArgs {
    #[arg(short, long)]
    model: PathBuf,
    #[arg(long, value_delimiter = ',', default_values = ["0", "3", "6", "9", "12", "15"], value_parser = parse_snr)]
    snr: Vec<f64>,
    #[arg(long, value_delimiter = ',', default_values = ["32", "512", "inf"], value_parser = parse_chunk)]
    chunks: Vec<ChunkSize>,
    #[arg(short = 'n', long, default_value_t = 100)]
    samples: usize,
    #[arg(long = "len", default_value_t = 600)]
    seq_len: usize,
    #[arg(long, value_parser = parse_kinetics)]
    kinetics: Option<TransitionKinetics>,
    #[arg(long, default_value_t = 1)]
    workers: usize,
    #[arg(long)]
    seed: u64,
    /// Print an aligned table with standard errors instead of TSV.
    #[arg(long)]
    table: bool,
    /// TSV output; stdout when absent.
    #[arg(short, long)]
    output: Option<PathBuf>,
}

#[derive(Args)]
struct ScoreArgs {
    #[arg(long)]
    decoded: PathBuf,
    #[arg(long)]
    truth: PathBuf,
    /// State TSV from `detect --states`; without it state accuracy is NA.
    #[arg(long)]
    states: Option<PathBuf>,
}

#[derive(Args)]
struct BenchArgs {
    #[arg(short, long)]
    model: PathBuf,
    #[arg(long, default_value_t = bench::MIN_BENCH_EVENTS)]
    events: usize,
    /// `reference`, `optimized` or `both`.
    #[arg(long, default_value = "optimized")]
    variant: String,
    #[arg(long, value_delimiter = ',', default_values = ["1"])]
    workers: Vec<usize>,
    #[arg(long, default_value_t = 8)]
    channels: usize,
    #[arg(long, default_value_t = 12.0, value_parser = parse_snr)]
    snr: f64,
    #[arg(long)]
    seed: u64,
    #[arg(long)]
    table: bool,
    /// TSV output; stdout when absent.
    #[arg(short, long)]
    output: Option<PathBuf>,
    /// FASTA of the decoded reads (identical for every row).
    #[arg(long)]
    reads: Option<PathBuf>,
}

#[derive(Args)]
struct OracleArgs {
    #[arg(short, long, default_value_t = 2)]
    k: usize,
    #[arg(long, default_value_t = 1000)]
    trials: usize,
    #[arg(long, default_value_t = 6)]
    max_m: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

fn parse_kinetics(s: &str) -> Result<TransitionKinetics, String> {
    let parts: Vec<f64> = s
        .split(',')
        .map(|p| p.trim().parse::<f64>().map_err(|_| format!("not a number: '{p}'")))
        .collect::<Result<_, _>>()?;
    match parts[..] {
        [a, b, c] => TransitionKinetics::new(a, b, c).map_err(|e| e.to_string()),
        _ => Err("expected p_stay,p_step,p_skip".into()),
    }
}

fn parse_snr(s: &str) -> Result<f64, String> {
    match s {
        "inf" | "+inf" => Ok(f64::INFINITY),
        _ => s
            .parse::<f64>()
            .ok()
            .filter(|v| v.is_finite())
            .ok_or_else(|| format!("invalid SNR '{s}' (expected dB value or 'inf')")),
    }
}

fn parse_chunk(s: &str) -> Result<ChunkSize, String> {
    s.parse()
}

fn parse_variant(s: &str) -> Result<Variant, String> {
    s.parse()
}

fn create(path: &Path) -> CliResult<BufWriter<File>> {
    File::create(path)
        .map(BufWriter::new)
        .map_err(|e| CliError::io(format!("{}: {e}", path.display())))
}

fn write_out(path: Option<&Path>, body: impl FnOnce(&mut dyn Write) -> io::Result<()>) -> CliResult {
    match path {
        Some(p) => {
            let mut w = create(p)?;
            body(&mut w)?;
            w.flush()?;
        }
        None => {
            let stdout = io::stdout();
            let mut lock = stdout.lock();
            body(&mut lock)?;
        }
    }
    Ok(())
}

fn with_suffix(prefix: &Path, suffix: &str) -> PathBuf {
    let mut s = prefix.as_os_str().to_owned();
    s.push(suffix);
    PathBuf::from(s)
}

fn cmd_model(cmd: ModelCmd) -> CliResult {
    match cmd {
        ModelCmd::Gen(a) => {
            let mut m = RunManifest::start("model gen");
            m.param("k", a.k).param("spread", a.spread).param("sigma", a.sigma).seed(a.seed);
            let mut model = synth_model(a.k, a.seed, a.spread, a.sigma)?;
            if let Some(kin) = a.kinetics {
                m.param("kinetics", [kin.p_stay, kin.p_step, kin.p_skip]);
                model = KmerModel::new(a.k, model.mu().to_vec(), model.sigma().to_vec(), kin)?;
            }
            save_model(&model, &a.output)?;
            m.output(&a.output).finish(&a.output)
        }
        ModelCmd::Inspect { path } => {
            let model = load_model(&path)?;
            print!("{}", describe_model(&model));
            Ok(())
        }
    }
}

fn describe_model(model: &KmerModel) -> String {
    let range = |v: &[f64]| {
        let lo = v.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        (lo, hi)
    };
    let (mu_lo, mu_hi) = range(model.mu());
    let (s_lo, s_hi) = range(model.sigma());
    let kin = model.kinetics();
    let tc = model.trans_cost();
    format!(
        "k\t{}\nN\t{}\nmu\t{mu_lo} .. {mu_hi}\nmu_std\t{:.6}\nsigma\t{s_lo} .. {s_hi}\nkinetics\tstay={} step={} skip={}\ntrans_cost\tstay={:.6} step={:.6} skip={:.6}\n",
        model.k(),
        model.n_states(),
        model.level_std(),
        kin.p_stay,
        kin.p_step,
        kin.p_skip,
        tc[0],
        tc[1],
        tc[5],
    )
}

fn cmd_simulate(a: SimulateArgs) -> CliResult {
    let model = load_model(&a.model)?;
    let kinetics = a.kinetics.unwrap_or(*model.kinetics());
    let spec = SimulationSpec::new(a.seq_len, kinetics, a.snr, a.seed);
    let truth = simulate(&model, &spec)?;

    let mut m = RunManifest::start("simulate");
    m.param("len", a.seq_len)
        .param("snr_db", if a.snr.is_finite() { a.snr.to_string() } else { "inf".into() })
        .param("kinetics", [kinetics.p_stay, kinetics.p_step, kinetics.p_skip])
        .param("channel", a.channel)
        .seed(a.seed)
        .input(&a.model);

    let events_path = if a.text {
        let p = with_suffix(&a.output, ".txt");
        let mut w = create(&p)?;
        formats::write_events_text(&mut w, &truth.events)?;
        w.flush()?;
        p
    } else {
        let p = with_suffix(&a.output, ".ppev");
        formats::save_events_binary(&p, a.channel, &truth.events)?;
        p
    };
    let truth_path = with_suffix(&a.output, ".truth");
    formats::save_truth(&truth_path, a.channel, &truth)?;
    m.output(&events_path).output(&truth_path).finish(&a.output)
}

fn cmd_detect(a: DetectArgs) -> CliResult {
    let model = load_model(&a.model)?;
    let cfg = ChannelConfig::new(a.inputs.len(), a.event_rate, a.chunk_len)?;
    if a.workers == 0 {
        return Err(CliError::usage("--workers must be at least 1"));
    }
    let mut sources: Vec<Box<dyn EventSource>> = Vec::new();
    for (i, path) in a.inputs.iter().enumerate() {
        let file = formats::load_events(path)?;
        if file.events.is_empty() {
            return Err(CliError::usage(format!("{}: no events", path.display())));
        }
        let channel = if file.channel_id == 0 { i as u32 } else { file.channel_id };
        sources.push(Box::new(VecSource::new(channel, file.events)));
    }
    let k = model.k();
    let detector = Detector::new(model, a.variant)?;
    let mut outputs: Vec<ChannelOutput> = Vec::new();
    let summary = run_channels(sources, &cfg, &detector, a.workers, &mut outputs);

    let reads: Vec<_> = outputs.iter().map(|o| o.read.clone()).collect();
    write_out(Some(&a.output), |w| formats::write_fasta(w, &reads))?;
    if let Some(states) = &a.states {
        write_out(Some(states), |w| {
            for o in &outputs {
                writeln!(w, "# channel {}", o.channel_id)?;
                formats::write_states_tsv(&mut *w, &o.path, k)?;
            }
            Ok(())
        })?;
    }
    eprintln!(
        "decoded {} events in {} chunks from {} channels: {:.0} events/s, deadline ratio {:.2}",
        summary.events,
        summary.chunks,
        summary.channels - summary.failed.len(),
        summary.events_per_second,
        summary.deadline_ratio
    );
    for o in &outputs {
        if o.read.has_junction_break() {
            eprintln!("channel {}: unconnected chunk junctions at {:?}", o.channel_id, o.read.junction_breaks);
        }
    }

    let mut m = RunManifest::start("detect");
    m.param("chunk_len", a.chunk_len.to_string())
        .param("variant", a.variant.label())
        .param("workers", a.workers)
        .param("event_rate", a.event_rate)
        .input(&a.model);
    for p in &a.inputs {
        m.input(p);
    }
    m.output(&a.output);
    if let Some(s) = &a.states {
        m.output(s);
    }
    m.finish(&a.output)?;

    if let Some(f) = summary.failed.first() {
        return Err(CliError::invariant(format!("channel {} failed: {}", f.channel_id, f.message)));
    }
    Ok(())
}

fn cmd_sweep(a: SweepArgs) -> CliResult {
    let model = load_model(&a.model)?;
    let cfg = SweepConfig {
        snr_grid: a.snr.clone(),
        chunk_grid: a.chunks.clone(),
        n_samples: a.samples,
        seq_len: a.seq_len,
        kinetics: a.kinetics,
        workers: a.workers.max(1),
    };
    if let Some(bad) = cfg.chunk_grid.iter().find(|c| matches!(c, ChunkSize::Fixed(m) if !(2..=512).contains(m))) {
        return Err(CliError::usage(format!("chunk length {bad} outside 2..=512")));
    }
    let rows = sweep::sweep_accuracy(&model, &cfg, a.seed)?;
    write_out(a.output.as_deref(), |w| {
        if a.table {
            w.write_all(sweep::format_sweep_table(&rows).as_bytes())
        } else {
            sweep::write_sweep_tsv(&rows, w)
        }
    })?;
    if let Some(out) = &a.output {
        let mut m = RunManifest::start("eval sweep");
        m.param("snr", a.snr.iter().map(|s| s.to_string()).collect::<Vec<_>>())
            .param("chunks", a.chunks.iter().map(|c| c.to_string()).collect::<Vec<_>>())
            .param("samples", a.samples)
            .param("len", a.seq_len)
            .param("workers", a.workers)
            .seed(a.seed)
            .input(&a.model)
            .output(out);
        m.finish(out)?;
    }
    Ok(())
}

fn cmd_score(a: ScoreArgs) -> CliResult {
    let truth = formats::load_truth(&a.truth)?;
    let records = formats::load_fasta(&a.decoded)?;
    let record: &FastaRecord = records
        .iter()
        .find(|r| r.channel_id() == Some(truth.channel_id))
        .or_else(|| records.first())
        .ok_or_else(|| CliError::usage(format!("{}: no FASTA records", a.decoded.display())))?;
    let state_acc = match &a.states {
        Some(p) => {
            let states = formats::load_states_tsv(p)?;
            let acc = state_accuracy(&states, &truth.states).map_err(|e| CliError::usage(e.to_string()))?;
            format!("{acc:.6}")
        }
        None => "NA".into(),
    };
    println!("state_acc\t{state_acc}");
    println!("base_identity\t{:.6}", base_identity(&record.seq, &truth.bases));
    Ok(())
}

fn cmd_bench(a: BenchArgs) -> CliResult {
    let variants: Vec<Variant> = match a.variant.as_str() {
        "both" => vec![Variant::Reference, Variant::Optimized],
        v => vec![v.parse().map_err(CliError::usage)?],
    };
    if a.workers.iter().any(|&w| w == 0) {
        return Err(CliError::usage("--workers entries must be at least 1"));
    }
    if a.events < bench::MIN_BENCH_EVENTS {
        return Err(CliError::usage(format!(
            "--events {} below the minimum of {}",
            a.events,
            bench::MIN_BENCH_EVENTS
        )));
    }
    let model = load_model(&a.model)?;
    let cfg = BenchConfig {
        n_events: a.events,
        channels: a.channels.max(1),
        snr_db: a.snr,
        seed: a.seed,
    };
    let streams = bench::bench_streams(&model, &cfg)?;
    let mut rows: Vec<BenchReport> = Vec::new();
    let mut first: Option<Vec<ChannelOutput>> = None;
    for &variant in &variants {
        for &workers in &a.workers {
            let (report, outputs) = bench::bench_throughput(&model, &streams, variant, workers)?;
            match &first {
                None => first = Some(outputs),
                Some(reference) if *reference != outputs => {
                    return Err(CliError::invariant(format!(
                        "{} with {workers} workers produced different reads",
                        variant.label()
                    )));
                }
                Some(_) => {}
            }
            rows.push(report);
        }
    }
    write_out(a.output.as_deref(), |w| {
        if a.table {
            w.write_all(bench::format_bench_table(&rows).as_bytes())
        } else {
            bench::write_bench_tsv(&rows, w)
        }
    })?;
    if let (Some(path), Some(outputs)) = (&a.reads, &first) {
        let reads: Vec<_> = outputs.iter().map(|o| o.read.clone()).collect();
        write_out(Some(path), |w| formats::write_fasta(w, &reads))?;
    }
    let anchor = a.output.as_ref().or(a.reads.as_ref());
    if let Some(anchor) = anchor {
        let mut m = RunManifest::start("bench");
        m.param("events", a.events)
            .param("variant", &a.variant)
            .param("workers", &a.workers)
            .param("channels", a.channels)
            .param("snr_db", a.snr)
            .seed(a.seed)
            .input(&a.model);
        for p in a.output.iter().chain(a.reads.iter()) {
            m.output(p);
        }
        m.finish(anchor)?;
    }
    Ok(())
}

fn cmd_oracle(a: OracleArgs) -> CliResult {
    porepath::build_table(a.k)?;
    if a.max_m < 1 || a.trials == 0 {
        return Err(CliError::usage("--trials and --max-m must be at least 1"));
    }
    let summary = oracle::run_trials(a.k, a.trials, a.max_m.max(2), a.seed)?;
    println!("{}/{} exact", summary.exact, summary.trials);
    println!("{}/{} unique optima with matching paths", summary.path_matches, summary.unique);
    for f in &summary.failures {
        println!(
            "mismatch: M={} seed={} oracle={} trellis={} normalized={} path_match={:?}",
            f.m_events,
            f.seed,
            f.oracle_cost.to_f64(),
            f.trellis_cost.to_f64(),
            f.normalized_total.to_f64(),
            f.path_match
        );
    }
    if summary.all_passed() {
        Ok(())
    } else {
        Err(CliError::invariant(format!("{} oracle mismatches", summary.failures.len())))
    }
}

fn run(cli: Cli) -> CliResult {
    match cli.command {
        Command::Model(c) => cmd_model(c),
        Command::Simulate(a) => cmd_simulate(a),
        Command::Detect(a) => cmd_detect(a),
        Command::Eval(EvalCmd::Sweep(a)) => cmd_sweep(a),
        Command::Eval(EvalCmd::Score(a)) => cmd_score(a),
        Command::Bench(a) => cmd_bench(a),
        Command::Oracle(a) => cmd_oracle(a),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit as u8)
        }
    }
}
