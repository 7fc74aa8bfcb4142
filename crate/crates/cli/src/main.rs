mod config;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand};

use hardpref_core::analytics;
use hardpref_core::dataset;
use hardpref_core::gap::ComputeOptions;
use hardpref_core::pipeline::{self, Method};
use hardpref_core::{DatasetManifest, Error, ErrorKind, GapCache, PreferencePair, Scorer};

use config::{FileConfig, RunConfig};

/// Rank preference pairs by implicit reward gap and keep the hardest.
#[derive(Parser, Debug)]
#[command(name = "hardpref", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Score every pair into the gap cache.
    Score(RunArgs),
    /// Select the hardest pairs (scoring first if no cache exists).
    Select(RunArgs),
    /// Overlap, length and histogram reports for one or more selections.
    Stats {
        #[command(flatten)]
        run: RunArgs,
        /// Selection files; the first one is treated as "ours".
        selections: Vec<PathBuf>,
        #[arg(long)]
        bins: Option<usize>,
        #[arg(long)]
        report_dir: Option<PathBuf>,
    },
    /// Write one selection per ratio, plus a manifest.
    Sweep {
        #[command(flatten)]
        run: RunArgs,
        #[arg(long, value_delimiter = ',')]
        ratios: Option<Vec<f64>>,
        #[arg(long)]
        out_dir: Option<PathBuf>,
    },
}

#[derive(Args, Debug, Default)]
struct RunArgs {
    /// TOML run configuration; flags override its values.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    input: Option<PathBuf>,
    /// toy[:seed] | toy:<policy corpus>,<reference corpus> | file:<path> | remote:<policy url>,<reference url>
    #[arg(long)]
    backend: Option<String>,
    #[arg(long)]
    beta: Option<f64>,
    #[arg(long, conflicts_with = "tau")]
    ratio: Option<f64>,
    #[arg(long)]
    tau: Option<f64>,
    /// raw | norm
    #[arg(long)]
    variant: Option<String>,
    /// gap | random | compression
    #[arg(long)]
    method: Option<String>,
    #[arg(long)]
    seed: Option<u64>,
    /// Scoring threads (0 = all cores).
    #[arg(long)]
    workers: Option<usize>,
    #[arg(long, overrides_with = "permissive")]
    strict: bool,
    /// Keep going past per-pair scoring failures.
    #[arg(long, overrides_with = "strict")]
    permissive: bool,
    #[arg(long)]
    exclude_inverted: bool,
    #[arg(long)]
    cache: Option<PathBuf>,
    #[arg(long)]
    output: Option<PathBuf>,
}

impl RunArgs {
    fn resolve(self, extra: FileConfig) -> Result<RunConfig> {
        let file = match &self.config {
            Some(path) => FileConfig::load(path)?,
            None => FileConfig::default(),
        };
        let strict = match (self.strict, self.permissive) {
            (true, _) => Some(true),
            (_, true) => Some(false),
            _ => None,
        };
        let flags = FileConfig {
            input: self.input,
            backend: self.backend,
            beta: self.beta,
            ratio: self.ratio,
            tau: self.tau,
            variant: self.variant,
            method: self.method,
            seed: self.seed,
            workers: self.workers,
            strict,
            exclude_inverted: self.exclude_inverted.then_some(true),
            cache: self.cache,
            output: self.output,
            ..extra
        };
        RunConfig::try_from(file.overlay(flags))
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::from(exit_code(&err))
        }
    }
}

fn exit_code(err: &anyhow::Error) -> u8 {
    let kind = err.chain().find_map(|e| e.downcast_ref::<Error>()).map(Error::kind);
    match kind {
        Some(ErrorKind::Config) => 2,
        Some(ErrorKind::Input) => 3,
        Some(ErrorKind::Scorer) | Some(ErrorKind::Numeric) => 4,
        Some(ErrorKind::StaleCache) => 5,
        Some(ErrorKind::Consistency) => 6,
        None => 1,
    }
}

fn run(command: Command) -> Result<()> {
    match command {
        Command::Score(args) => cmd_score(&args.resolve(FileConfig::default())?),
        Command::Select(args) => cmd_select(&args.resolve(FileConfig::default())?),
        Command::Stats {
            run,
            selections,
            bins,
            report_dir,
        } => {
            let extra = FileConfig {
                selections: (!selections.is_empty()).then_some(selections),
                bins,
                report_dir,
                ..Default::default()
            };
            cmd_stats(&run.resolve(extra)?)
        }
        Command::Sweep { run, ratios, out_dir } => {
            let extra = FileConfig {
                ratios,
                out_dir,
                ..Default::default()
            };
            cmd_sweep(&run.resolve(extra)?)
        }
    }
}

fn load_input(cfg: &RunConfig) -> Result<(Vec<PreferencePair>, DatasetManifest)> {
    Ok(dataset::load_pairs(cfg.input()?)?)
}

fn score_options(cfg: &RunConfig) -> ComputeOptions {
    ComputeOptions {
        workers: cfg.workers,
        strict: cfg.strict,
    }
}

fn score_into_cache(
    cfg: &RunConfig,
    pairs: &[PreferencePair],
    manifest: &DatasetManifest,
    scorer: &Scorer,
    cache_path: &Path,
) -> Result<()> {
    let summary = pipeline::score_pairs(pairs, manifest, scorer, cfg.beta, cache_path, score_options(cfg))?;
    println!(
        "scored {} pairs, reused {} cached, {} failed",
        summary.scored,
        summary.reused,
        summary.failures.len()
    );
    println!("{}", summary.calls);
    if !summary.failures.is_empty() {
        println!("failures written to {}", pipeline::errors_path(cache_path).display());
    }
    println!("cache: {}", cache_path.display());
    Ok(())
}

fn cmd_score(cfg: &RunConfig) -> Result<()> {
    let (pairs, manifest) = load_input(cfg)?;
    let scorer = pipeline::build_scorer(&cfg.backend, &pairs, cfg.strict)?;
    score_into_cache(cfg, &pairs, &manifest, &scorer, &cfg.cache_path()?)
}

/// Loads the cache for this run, scoring first if there is none yet.
fn ensure_cache(cfg: &RunConfig, pairs: &[PreferencePair], manifest: &DatasetManifest) -> Result<GapCache> {
    let cache_path = cfg.cache_path()?;
    let scorer = pipeline::build_scorer(&cfg.backend, pairs, cfg.strict)?;
    if !cache_path.exists() {
        score_into_cache(cfg, pairs, manifest, &scorer, &cache_path)?;
    }
    let cache = pipeline::load_cache_for(&cache_path, manifest, cfg.beta, &scorer.fingerprint(), cfg.strict)
        .with_context(|| format!("loading {}", cache_path.display()))?;
    Ok(cache)
}

fn cmd_select(cfg: &RunConfig) -> Result<()> {
    let (pairs, manifest) = load_input(cfg)?;
    let cache = match cfg.method {
        Method::RewardGap => Some(ensure_cache(cfg, &pairs, &manifest)?),
        Method::Random | Method::Compression => None,
    };
    let output = cfg.output_path()?;
    let result = pipeline::select_to_file(
        cfg.input()?,
        &pairs,
        &manifest,
        cache.as_ref(),
        cfg.method,
        &cfg.selection_config(),
        &output,
    )?;
    let tau = match result.tau_effective {
        Some(t) => format!(", tau_effective {t}"),
        None => String::new(),
    };
    println!(
        "{}: selected {} of {} pairs{tau}",
        result.method,
        result.selected_count(),
        result.total_count
    );
    println!("output: {}", output.display());
    Ok(())
}

fn cmd_stats(cfg: &RunConfig) -> Result<()> {
    if cfg.selections.is_empty() {
        return Err(Error::Config("stats needs at least one selection file".into()).into());
    }
    let cache_path = cfg.cache_path()?;
    let cache = GapCache::load(&cache_path)?;
    let selections = cfg
        .selections
        .iter()
        .map(|p| pipeline::read_selection(p).with_context(|| format!("reading {}", p.display())))
        .collect::<Result<Vec<_>>>()?;
    let report = pipeline::stats_to_files(&cache, &selections, cfg.variant, cfg.bins, &cfg.report_dir()?)?;
    print!("{}", report.overlap);
    println!();
    print!("{}", analytics::format_length_table(&report.lengths));
    println!();
    print!("{}", report.histogram);
    for f in &report.files {
        println!("wrote {}", f.display());
    }
    Ok(())
}

fn cmd_sweep(cfg: &RunConfig) -> Result<()> {
    let (pairs, manifest) = load_input(cfg)?;
    let cache = ensure_cache(cfg, &pairs, &manifest)?;
    let out_dir = cfg.out_dir()?;
    let sweep = analytics::sweep(&cache, &pairs, &cfg.ratios, &cfg.selection_config(), &out_dir)?;
    println!("{:>8} {:>8} {:>14}  output", "ratio", "k", "tau_effective");
    for row in &sweep.rows {
        let tau = row.tau_effective.map(|t| format!("{t:.6}")).unwrap_or_else(|| "-".into());
        println!("{:>8} {:>8} {:>14}  {}", row.ratio, row.k, tau, row.output.display());
    }
    println!("manifest: {}", out_dir.join(analytics::SWEEP_MANIFEST_NAME).display());
    Ok(())
}
