//! Run configuration: a TOML file whose every field can be overridden by a
//! command-line flag.

use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use serde::Deserialize;

use hardpref_core::gap::DEFAULT_BETA;
use hardpref_core::pipeline::{self, Method};
use hardpref_core::selector::DEFAULT_RATIO;
use hardpref_core::{BackendSpec, Error, Mode, SelectionConfig, Variant};

pub const DEFAULT_BINS: usize = 20;
pub const DEFAULT_SWEEP_RATIOS: [f64; 6] = [0.05, 0.10, 0.15, 0.20, 0.25, 0.30];

/// Every field is optional so that a file may describe part of a run.
#[derive(Debug, Default, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileConfig {
    pub input: Option<PathBuf>,
    pub backend: Option<String>,
    pub beta: Option<f64>,
    pub ratio: Option<f64>,
    pub tau: Option<f64>,
    pub variant: Option<String>,
    pub method: Option<String>,
    pub seed: Option<u64>,
    pub workers: Option<usize>,
    pub strict: Option<bool>,
    pub exclude_inverted: Option<bool>,
    pub cache: Option<PathBuf>,
    pub output: Option<PathBuf>,
    pub selections: Option<Vec<PathBuf>>,
    pub bins: Option<usize>,
    pub report_dir: Option<PathBuf>,
    pub ratios: Option<Vec<f64>>,
    pub out_dir: Option<PathBuf>,
}

impl FileConfig {
    /// Relative paths in the file are taken relative to the file itself.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        let mut cfg: FileConfig = toml::from_str(&text)
            .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        let base = path.parent().unwrap_or(Path::new(""));
        let rebase = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        for p in [
            &mut cfg.input,
            &mut cfg.cache,
            &mut cfg.output,
            &mut cfg.report_dir,
            &mut cfg.out_dir,
        ]
        .into_iter()
        .flatten()
        {
            rebase(p);
        }
        for p in cfg.selections.iter_mut().flatten() {
            rebase(p);
        }
        if let Some(backend) = &cfg.backend {
            if let Some(rest) = backend.strip_prefix("file:") {
                let mut p = PathBuf::from(rest);
                rebase(&mut p);
                cfg.backend = Some(format!("file:{}", p.display()));
            }
        }
        Ok(cfg)
    }

    /// Fields set in `flags` win; the selection mode is overridden as a unit.
    pub fn overlay(mut self, flags: FileConfig) -> Self {
        macro_rules! take {
            ($($f:ident),*) => { $( if flags.$f.is_some() { self.$f = flags.$f; } )* };
        }
        if flags.ratio.is_some() || flags.tau.is_some() {
            self.ratio = flags.ratio;
            self.tau = flags.tau;
        }
        take!(
            input, backend, beta, variant, method, seed, workers, strict, exclude_inverted, cache,
            output, selections, bins, report_dir, ratios, out_dir
        );
        self
    }
}

/// A fully resolved run.
#[derive(Debug, Clone)]
pub struct RunConfig {
    pub input: Option<PathBuf>,
    pub backend: BackendSpec,
    pub beta: f64,
    pub mode: Mode,
    pub variant: Variant,
    pub method: Method,
    pub seed: u64,
    pub workers: usize,
    pub strict: bool,
    pub exclude_inverted: bool,
    pub cache: Option<PathBuf>,
    pub output: Option<PathBuf>,
    pub selections: Vec<PathBuf>,
    pub bins: usize,
    pub report_dir: Option<PathBuf>,
    pub ratios: Vec<f64>,
    pub out_dir: Option<PathBuf>,
}

impl TryFrom<FileConfig> for RunConfig {
    type Error = anyhow::Error;

    fn try_from(c: FileConfig) -> Result<Self> {
        let mode = match (c.ratio, c.tau) {
            (Some(_), Some(_)) => {
                bail!(Error::Config("ratio and tau are mutually exclusive".into()))
            }
            (Some(rho), None) => Mode::Ratio(rho),
            (None, Some(tau)) => Mode::Threshold(tau),
            (None, None) => Mode::Ratio(DEFAULT_RATIO),
        };
        let backend = c.backend.as_deref().unwrap_or("toy").parse::<BackendSpec>()?;
        let variant = match c.variant.as_deref() {
            Some(v) => v.parse::<Variant>()?,
            None => Variant::Raw,
        };
        let method = match c.method.as_deref() {
            Some(m) => m.parse::<Method>()?,
            None => Method::RewardGap,
        };
        let run = RunConfig {
            input: c.input,
            backend,
            beta: c.beta.unwrap_or(DEFAULT_BETA),
            mode,
            variant,
            method,
            seed: c.seed.unwrap_or(0),
            workers: c.workers.unwrap_or(1),
            strict: c.strict.unwrap_or(true),
            exclude_inverted: c.exclude_inverted.unwrap_or(false),
            cache: c.cache,
            output: c.output,
            selections: c.selections.unwrap_or_default(),
            bins: c.bins.unwrap_or(DEFAULT_BINS),
            report_dir: c.report_dir,
            ratios: c.ratios.unwrap_or_else(|| DEFAULT_SWEEP_RATIOS.to_vec()),
            out_dir: c.out_dir,
        };
        run.selection_config().validate()?;
        Ok(run)
    }
}

impl RunConfig {
    pub fn input(&self) -> Result<&Path> {
        self.input
            .as_deref()
            .ok_or_else(|| Error::Config("no input given (use --input or `input` in the config)".into()))
            .context("resolving run configuration")
    }

    pub fn cache_path(&self) -> Result<PathBuf> {
        match &self.cache {
            Some(p) => Ok(p.clone()),
            None => Ok(pipeline::default_cache_path(self.input()?)),
        }
    }

    pub fn output_path(&self) -> Result<PathBuf> {
        match &self.output {
            Some(p) => Ok(p.clone()),
            None => Ok(with_suffix(self.input()?, ".selected.jsonl")),
        }
    }

    pub fn report_dir(&self) -> Result<PathBuf> {
        match &self.report_dir {
            Some(p) => Ok(p.clone()),
            None => Ok(with_suffix(&self.cache_path()?, ".report")),
        }
    }

    pub fn out_dir(&self) -> Result<PathBuf> {
        match &self.out_dir {
            Some(p) => Ok(p.clone()),
            None => Ok(with_suffix(self.input()?, ".sweep")),
        }
    }

    pub fn selection_config(&self) -> SelectionConfig {
        SelectionConfig {
            beta: self.beta,
            mode: self.mode,
            variant: self.variant,
            seed: self.seed,
            exclude_inverted: self.exclude_inverted,
            ..SelectionConfig::default()
        }
    }
}

fn with_suffix(path: &Path, suffix: &str) -> PathBuf {
    let mut s = path.as_os_str().to_os_string();
    s.push(suffix);
    PathBuf::from(s)
}
