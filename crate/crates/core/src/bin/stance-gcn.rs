use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Arg, ArgAction, ArgMatches, Args, Command, FromArgMatches, Parser, Subcommand};
use log::info;

use stance_gcn::cli::{cmd_build, cmd_curve, cmd_eval, cmd_ingest, cmd_synth, cmd_train, IngestInputs};
use stance_gcn::config::{RunConfig, KEYS};
use stance_gcn::{Error, Result};

/// Keys handled by the global flags instead of per-command overrides.
const GLOBAL_KEYS: [&str; 3] = ["seed", "threads", "deterministic"];

const BOOL_KEYS: [&str; 5] = ["social", "pathsim", "use_pretrained", "include_layer0", "binary_only"];

/// One `--kebab-name VALUE` flag per configuration key.
#[derive(Debug, Clone, Default)]
struct Overrides(Vec<(String, String)>);

fn flag_name(key: &str) -> String {
    key.replace('_', "-")
}

impl FromArgMatches for Overrides {
    fn from_arg_matches(m: &ArgMatches) -> std::result::Result<Self, clap::Error> {
        let mut out = Vec::new();
        for key in KEYS.iter().filter(|k| !GLOBAL_KEYS.contains(k)) {
            if let Some(v) = m.get_one::<String>(&flag_name(key)) {
                out.push((key.to_string(), v.clone()));
            }
        }
        Ok(Overrides(out))
    }

    fn update_from_arg_matches(&mut self, m: &ArgMatches) -> std::result::Result<(), clap::Error> {
        *self = Self::from_arg_matches(m)?;
        Ok(())
    }
}

impl Args for Overrides {
    fn augment_args(cmd: Command) -> Command {
        KEYS.iter().filter(|k| !GLOBAL_KEYS.contains(k)).fold(cmd, |cmd, key| {
            let mut arg = Arg::new(flag_name(key))
                .long(flag_name(key))
                .value_name("VALUE")
                .help_heading("Config overrides")
                .help(format!("overrides `{key}`"));
            if BOOL_KEYS.contains(key) {
                arg = arg.num_args(0..=1).default_missing_value("true");
            }
            cmd.arg(arg)
        })
    }

    fn augment_args_for_update(cmd: Command) -> Command {
        Self::augment_args(cmd)
    }
}

#[derive(Parser, Debug)]
#[command(name = "stance-gcn", version, about = "Hashtag-based stance inference with graph embeddings")]
struct Cli {
    /// key = value configuration file
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads (0 = all cores)
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Single-threaded, sequential reductions
    #[arg(long, global = true, action = ArgAction::SetTrue)]
    deterministic: bool,
    #[command(subcommand)]
    command: Cmd,
}

#[derive(Subcommand, Debug)]
enum Cmd {
    /// Parse and filter a tweet corpus into interaction counts
    Ingest {
        /// One JSON tweet record per line
        #[arg(long)]
        tweets: PathBuf,
        /// follower<TAB>followee lines
        #[arg(long)]
        follows: Option<PathBuf>,
        /// News outlet account ids, one per line
        #[arg(long)]
        outlets: Option<PathBuf>,
        /// Fail on the first malformed record
        #[arg(long)]
        strict: bool,
        #[arg(long)]
        out: PathBuf,
        #[command(flatten)]
        overrides: Overrides,
    },
    /// Write the normalized bipartite graph and enabled user graphs
    Build {
        #[arg(long)]
        counts: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[command(flatten)]
        overrides: Overrides,
    },
    /// Split, then train one model per fold
    Train {
        #[arg(long)]
        counts: PathBuf,
        #[arg(long)]
        annotations: PathBuf,
        /// Run directory
        #[arg(long)]
        out: PathBuf,
        #[command(flatten)]
        overrides: Overrides,
    },
    /// Score a trained run: report.txt and folds.csv
    Eval {
        /// Run directory written by `train`
        #[arg(long)]
        run: PathBuf,
        #[arg(long)]
        counts: PathBuf,
        #[arg(long)]
        annotations: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[command(flatten)]
        overrides: Overrides,
    },
    /// Holdout accuracy using only the top-x POS and NEG hashtags
    Curve {
        #[arg(long)]
        run: PathBuf,
        #[arg(long)]
        counts: PathBuf,
        #[arg(long)]
        annotations: PathBuf,
        #[arg(long)]
        x_max: usize,
        /// Output CSV file
        #[arg(long)]
        out: PathBuf,
        #[command(flatten)]
        overrides: Overrides,
    },
    /// Generate a planted two-camp dataset
    Synth {
        #[arg(long)]
        out: PathBuf,
        #[command(flatten)]
        overrides: Overrides,
    },
}

impl Cmd {
    fn overrides(&self) -> &Overrides {
        match self {
            Cmd::Ingest { overrides, .. }
            | Cmd::Build { overrides, .. }
            | Cmd::Train { overrides, .. }
            | Cmd::Eval { overrides, .. }
            | Cmd::Curve { overrides, .. }
            | Cmd::Synth { overrides, .. } => overrides,
        }
    }
}

/// defaults < run directory config (eval, curve) < --config < flags
fn resolve(cli: &Cli) -> Result<RunConfig> {
    let mut cfg = RunConfig::default();
    if let Cmd::Eval { run, .. } | Cmd::Curve { run, .. } = &cli.command {
        let saved = run.join("config.txt");
        if saved.exists() {
            cfg.apply_file(&saved)?;
        }
    }
    if let Some(path) = &cli.config {
        cfg.apply_file(path)?;
    }
    for (k, v) in &cli.command.overrides().0 {
        cfg.set(k, v)?;
    }
    if let Some(seed) = cli.seed {
        cfg.experiment.seed = seed;
    }
    if let Some(t) = cli.threads {
        cfg.threads = t;
    }
    if cli.deterministic {
        cfg.deterministic = true;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn run(cli: Cli) -> Result<()> {
    let cfg = resolve(&cli)?;
    eprint!("{}", cfg.to_text());
    let threads = if cfg.deterministic { 1 } else { cfg.threads };
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build_global()
        .map_err(|e| Error::Config(format!("thread pool: {e}")))?;

    match &cli.command {
        Cmd::Ingest {
            tweets,
            follows,
            outlets,
            strict,
            out,
            ..
        } => {
            let inputs = IngestInputs {
                tweets,
                follows: follows.as_deref(),
                outlets: outlets.as_deref(),
                strict: *strict,
            };
            cmd_ingest(&inputs, out, &cfg)?;
        }
        Cmd::Build { counts, out, .. } => cmd_build(counts, out, &cfg)?,
        Cmd::Train {
            counts,
            annotations,
            out,
            ..
        } => cmd_train(counts, annotations, out, &cfg)?,
        Cmd::Eval {
            run,
            counts,
            annotations,
            out,
            ..
        } => {
            let report = cmd_eval(run, counts, annotations, out, &cfg)?;
            print!("{}", report.summary_string());
        }
        Cmd::Curve {
            run,
            counts,
            annotations,
            x_max,
            out,
            ..
        } => {
            for (x, acc) in cmd_curve(run, counts, annotations, *x_max, out)? {
                info!("x={x} accuracy={acc:.4}");
            }
        }
        Cmd::Synth { out, .. } => cmd_synth(out, &cfg)?,
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info"))
        .format_timestamp(None)
        .init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let message = e.to_string().replace(['\n', '\r'], " ");
            eprintln!("error kind={} code={} message={message}", e.kind(), e.exit_code());
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
