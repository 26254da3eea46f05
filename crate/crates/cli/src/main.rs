//! `esgrisk` command-line front end.
//!
//! Exit codes: 0 success, 2 usage, 3 data, 4 numeric, 5 io.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use esgrisk::pipeline::{self, RunConfig, SynthSpec};
use esgrisk::sentiment::Sign;
use esgrisk::synth::PlantSchedule;
use esgrisk::{Error, ErrorClass};

#[derive(Parser)]
#[command(name = "esgrisk", version, about = "ESG reputational-risk event detection and event study")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Classify and score messages.
    Classify(RunArgs),
    /// Build daily series and detect risk events.
    Detect(RunArgs),
    /// Run the event study on the kept events.
    Study(RunArgs),
    /// classify, detect and study in sequence.
    Pipeline(RunArgs),
    /// Write a synthetic dataset with planted ground truth.
    Synth(SynthArgs),
    /// Score an events file against a ground-truth file.
    Eval(EvalArgs),
}

#[derive(Args, Default)]
struct RunArgs {
    /// TOML run config; flags below override it.
    #[arg(short, long)]
    config: Option<PathBuf>,
    #[arg(long)]
    messages: Option<PathBuf>,
    #[arg(long)]
    prices: Option<PathBuf>,
    #[arg(long)]
    market: Option<PathBuf>,
    #[arg(long)]
    lexicon: Option<PathBuf>,
    #[arg(long)]
    sentiment_lexicon: Option<PathBuf>,
    #[arg(long)]
    earnings: Option<PathBuf>,
    #[arg(long)]
    controversies: Option<PathBuf>,
    #[arg(long)]
    classified: Option<PathBuf>,
    #[arg(long)]
    events: Option<PathBuf>,
    #[arg(short, long)]
    out_dir: Option<PathBuf>,
    #[arg(long)]
    source_tz: Option<String>,
    #[arg(long)]
    exchange_tz: Option<String>,
    #[arg(long, allow_hyphen_values = true)]
    sentiment_threshold: Option<f64>,
    #[arg(long)]
    threads: Option<usize>,
    #[arg(long)]
    z: Option<f64>,
    #[arg(long)]
    window_len: Option<usize>,
    #[arg(long)]
    min_share: Option<f64>,
    #[arg(long)]
    min_tweets: Option<u32>,
    #[arg(long)]
    gap_days: Option<usize>,
    #[arg(long)]
    exclusion_halfwidth: Option<usize>,
    /// Also flag unusually quiet days.
    #[arg(long)]
    two_sided: bool,
    #[arg(long)]
    est_len: Option<usize>,
    #[arg(long)]
    min_obs: Option<usize>,
    /// Second study with this estimation length (e.g. 90).
    #[arg(long)]
    robustness_est_len: Option<usize>,
    /// Divide summed SARs by sqrt(window length).
    #[arg(long)]
    scar_sqrt_scaling: bool,
    /// Write series.csv with the per-day counts.
    #[arg(long)]
    dump_series: bool,
}

impl RunArgs {
    fn resolve(&self) -> Result<RunConfig, Error> {
        let mut cfg = match &self.config {
            Some(p) => RunConfig::load(p)?,
            None => RunConfig::default(),
        };
        let set = |slot: &mut Option<PathBuf>, v: &Option<PathBuf>| {
            if v.is_some() {
                slot.clone_from(v);
            }
        };
        set(&mut cfg.messages, &self.messages);
        set(&mut cfg.prices, &self.prices);
        set(&mut cfg.market, &self.market);
        set(&mut cfg.lexicon, &self.lexicon);
        set(&mut cfg.sentiment_lexicon, &self.sentiment_lexicon);
        set(&mut cfg.earnings, &self.earnings);
        set(&mut cfg.controversies, &self.controversies);
        set(&mut cfg.classified, &self.classified);
        set(&mut cfg.events, &self.events);
        if let Some(v) = &self.out_dir {
            cfg.out_dir.clone_from(v);
        }
        if let Some(v) = &self.source_tz {
            cfg.source_tz.clone_from(v);
        }
        if let Some(v) = &self.exchange_tz {
            cfg.exchange_tz.clone_from(v);
        }
        if let Some(v) = self.sentiment_threshold {
            cfg.sentiment_threshold = v;
        }
        if let Some(v) = self.threads {
            cfg.threads = v;
        }
        let d = &mut cfg.detection;
        if let Some(v) = self.z {
            d.z = v;
        }
        if let Some(v) = self.window_len {
            d.window_len = v;
        }
        if let Some(v) = self.min_share {
            d.min_share = v;
        }
        if let Some(v) = self.min_tweets {
            d.min_tweets = v;
        }
        if let Some(v) = self.gap_days {
            d.gap_days = v;
        }
        if let Some(v) = self.exclusion_halfwidth {
            d.exclusion_halfwidth = v;
        }
        d.two_sided |= self.two_sided;
        if let Some(n) = self.est_len {
            cfg.estimation = cfg.estimation.with_est_len(n);
        }
        if let Some(v) = self.min_obs {
            cfg.estimation.min_obs = v;
        }
        if self.robustness_est_len.is_some() {
            cfg.robustness_est_len = self.robustness_est_len;
        }
        cfg.estimation.scar_sqrt_scaling |= self.scar_sqrt_scaling;
        cfg.dump_series |= self.dump_series;
        cfg.validate()?;
        Ok(cfg)
    }
}

#[derive(Args)]
struct SynthArgs {
    /// Output directory for the dataset.
    #[arg(short, long)]
    out: PathBuf,
    /// TOML scenario with [synth] and [schedule] tables.
    #[arg(short, long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    firms: Option<usize>,
    #[arg(long)]
    days: Option<usize>,
    #[arg(long)]
    base_rate: Option<f64>,
    #[arg(long)]
    noise_rate: Option<f64>,
    /// Abnormal return injected on planted days.
    #[arg(long, allow_hyphen_values = true)]
    effect: Option<f64>,
    /// Planted events per firm (replaces the scenario's schedule).
    #[arg(long)]
    events_per_firm: Option<usize>,
    #[arg(long)]
    spike: Option<f64>,
    /// Sign of planted sentiment: negative or positive.
    #[arg(long)]
    sign: Option<Sign>,
}

#[derive(Args)]
struct EvalArgs {
    #[command(flatten)]
    run: RunArgs,
    /// Ground-truth file written by `synth`.
    #[arg(long)]
    truth: PathBuf,
    /// Day tolerance when matching events.
    #[arg(long, default_value_t = 1)]
    tolerance: usize,
}

fn synth(args: &SynthArgs) -> Result<(), Error> {
    let mut spec = match &args.config {
        Some(p) => SynthSpec::load(p)?,
        None => SynthSpec { schedule: Some(PlantSchedule::default()), ..Default::default() },
    };
    let s = &mut spec.synth;
    if let Some(v) = args.seed {
        s.seed = v;
    }
    if let Some(v) = args.firms {
        s.n_firms = v;
    }
    if let Some(v) = args.days {
        s.n_days = v;
    }
    if let Some(v) = args.base_rate {
        s.base_rate = v;
    }
    if let Some(v) = args.noise_rate {
        s.noise_rate = v;
    }
    if let Some(v) = args.effect {
        s.injected_ar = v;
    }
    if args.events_per_firm.is_some() || args.spike.is_some() || args.sign.is_some() {
        let sched = spec.schedule.get_or_insert_with(PlantSchedule::default);
        if let Some(v) = args.events_per_firm {
            sched.per_firm = v;
        }
        if let Some(v) = args.spike {
            sched.spike_size = v;
        }
        if let Some(v) = args.sign {
            sched.sign = v;
        }
    }
    let ds = pipeline::cmd_synth(&spec, &args.out)?;
    println!(
        "wrote {} messages, {} firms x {} days, {} planted events to {}",
        ds.messages.len(),
        ds.config.n_firms,
        ds.config.n_days,
        ds.truth.planted.len(),
        args.out.display()
    );
    println!("run: esgrisk pipeline --config {}", args.out.join("config.toml").display());
    Ok(())
}

fn print_classify(s: &pipeline::ClassifySummary) {
    println!(
        "{}: {} rows, {} accepted, {} skipped",
        s.ingest.source,
        s.ingest.rows,
        s.ingest.accepted,
        s.ingest.skipped.len()
    );
    println!("{:<30}{:>10}", "node", "messages");
    for (n, c) in &s.per_node {
        println!("{:<30}{c:>10}", n.label());
    }
}

fn print_detect(s: &pipeline::DetectSummary) {
    println!(
        "events: {} kept, {} positive-sentiment, {} confound-removed ({} messages outside calendar)",
        s.kept, s.positive, s.removed, s.dropped_messages
    );
}

fn print_study(s: &pipeline::StudySummary, out: &Path) {
    println!("{}", esgrisk::report::render_results_aligned(&s.main.results));
    println!("{} events studied, {} dropped; outputs in {}", s.main.abnormals.len(), s.main.dropped.len(), out.display());
}

fn run(cli: Cli) -> Result<(), Error> {
    match cli.command {
        Command::Classify(a) => print_classify(&pipeline::cmd_classify(&a.resolve()?)?),
        Command::Detect(a) => print_detect(&pipeline::cmd_detect(&a.resolve()?)?),
        Command::Study(a) => {
            let cfg = a.resolve()?;
            print_study(&pipeline::cmd_study(&cfg)?, &cfg.out_dir);
        }
        Command::Pipeline(a) => {
            let cfg = a.resolve()?;
            let s = pipeline::cmd_pipeline(&cfg)?;
            print_classify(&s.classify);
            print_detect(&s.detect);
            print_study(&s.study, &cfg.out_dir);
        }
        Command::Synth(a) => synth(&a)?,
        Command::Eval(a) => {
            let cfg = a.run.resolve()?;
            let s = pipeline::cmd_eval(&cfg, &a.truth, a.tolerance)?;
            let na = |x: Option<f64>| x.map_or("n/a".to_string(), |v| format!("{v:.4}"));
            println!(
                "detected {} planted {} | precision {} recall {}",
                s.n_detected,
                s.n_truth,
                na(s.precision),
                na(s.recall)
            );
        }
    }
    Ok(())
}

fn exit_code(class: ErrorClass) -> u8 {
    match class {
        ErrorClass::Usage => 2,
        ErrorClass::Data => 3,
        ErrorClass::Numeric => 4,
        ErrorClass::Io => 5,
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(e.class()))
        }
    }
}
