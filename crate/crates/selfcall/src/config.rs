//! Declarative run configuration (TOML).
//!
//! Relative paths are resolved against the directory of the config file.
//! `SELFCALL_QA_URL` and `SELFCALL_MT_URL` override the service endpoints.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use serde::{Deserialize, Serialize};

use selfcall_core::filtering::FilterConfig;
use selfcall_core::prefilter::PrefilterConfig;
use selfcall_core::sampling::SamplingConfig;
use selfcall_core::tools::DEFAULT_LANG_CONFIDENCE;
use selfcall_core::ToolKind;

pub const QA_URL_ENV: &str = "SELFCALL_QA_URL";
pub const MT_URL_ENV: &str = "SELFCALL_MT_URL";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PipelineConfig {
    pub corpus: Vec<PathBuf>,
    pub output_dir: PathBuf,
    #[serde(default = "default_seed")]
    pub seed: u64,
    #[serde(default = "default_workers")]
    pub workers: usize,
    /// Tools to annotate, in output order.
    #[serde(default = "default_tools")]
    pub tools: Vec<ToolKind>,
    #[serde(default)]
    pub lm: LmConfig,
    /// Per-tool overrides of the sampling defaults.
    #[serde(default)]
    pub sampling: BTreeMap<ToolKind, SamplingConfig>,
    #[serde(default)]
    pub prefilter: PrefilterConfig,
    #[serde(default)]
    pub filter: FilterConfig,
    /// Replacement prompt templates, one file per tool.
    #[serde(default)]
    pub prompts: BTreeMap<ToolKind, PathBuf>,
    #[serde(default)]
    pub services: ServicesConfig,
}

fn default_seed() -> u64 {
    0
}

fn default_workers() -> usize {
    1
}

fn default_tools() -> Vec<ToolKind> {
    ToolKind::ALL.to_vec()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LmKind {
    /// n-gram model trained on the corpus and the prompt texts.
    Ngram,
    /// n-gram model loaded from a count-table dump.
    Table,
    /// Scripted model loaded from a JSON spec.
    Scripted,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LmConfig {
    pub kind: LmKind,
    pub order: usize,
    pub alpha: f64,
    pub min_count: usize,
    pub path: Option<PathBuf>,
}

impl Default for LmConfig {
    fn default() -> Self {
        LmConfig {
            kind: LmKind::Ngram,
            order: 3,
            alpha: 0.1,
            min_count: 1,
            path: None,
        }
    }
}

/// An external text service: a live endpoint or a fixture file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ServiceConfig {
    pub url: Option<String>,
    pub fixtures: Option<PathBuf>,
    pub timeout_ms: u64,
    /// Minimum spacing between requests to one endpoint.
    pub min_interval_ms: u64,
}

impl Default for ServiceConfig {
    fn default() -> Self {
        ServiceConfig {
            url: None,
            fixtures: None,
            timeout_ms: 10_000,
            min_interval_ms: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SearchConfig {
    /// Prebuilt index (JSON) or KILT-style pages (JSONL).
    pub index: Option<PathBuf>,
    pub pages: Option<PathBuf>,
    pub snippet_chars: usize,
}

impl Default for SearchConfig {
    fn default() -> Self {
        SearchConfig {
            index: None,
            pages: None,
            snippet_chars: selfcall_core::tools::search::DEFAULT_SNIPPET_CHARS,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ServicesConfig {
    pub qa: ServiceConfig,
    pub mt: ServiceConfig,
    pub search: SearchConfig,
    /// Source-language confidence needed before a translation request.
    pub mt_confidence: f64,
}

impl Default for ServicesConfig {
    fn default() -> Self {
        ServicesConfig {
            qa: ServiceConfig::default(),
            mt: ServiceConfig::default(),
            search: SearchConfig::default(),
            mt_confidence: DEFAULT_LANG_CONFIDENCE,
        }
    }
}

impl PipelineConfig {
    /// A config with defaults for everything but the paths.
    pub fn new(corpus: Vec<PathBuf>, output_dir: PathBuf) -> Self {
        PipelineConfig {
            corpus,
            output_dir,
            seed: default_seed(),
            workers: default_workers(),
            tools: default_tools(),
            lm: LmConfig::default(),
            sampling: BTreeMap::new(),
            prefilter: PrefilterConfig::default(),
            filter: FilterConfig::default(),
            prompts: BTreeMap::new(),
            services: ServicesConfig::default(),
        }
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: PipelineConfig = toml::from_str(text).context("invalid config")?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Reads, resolves relative paths, applies env overrides, validates.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        let mut cfg = Self::from_toml(&text)?;
        if let Some(dir) = path.parent() {
            cfg.resolve_paths(dir);
        }
        cfg.apply_env(|k| std::env::var(k).ok());
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn resolve_paths(&mut self, base: &Path) {
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        self.corpus.iter_mut().for_each(fix);
        fix(&mut self.output_dir);
        self.lm.path.iter_mut().for_each(fix);
        self.prompts.values_mut().for_each(fix);
        self.services.qa.fixtures.iter_mut().for_each(fix);
        self.services.mt.fixtures.iter_mut().for_each(fix);
        self.services.search.index.iter_mut().for_each(fix);
        self.services.search.pages.iter_mut().for_each(fix);
    }

    pub fn apply_env(&mut self, get: impl Fn(&str) -> Option<String>) {
        if let Some(url) = get(QA_URL_ENV).filter(|u| !u.is_empty()) {
            self.services.qa.url = Some(url);
        }
        if let Some(url) = get(MT_URL_ENV).filter(|u| !u.is_empty()) {
            self.services.mt.url = Some(url);
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.workers == 0 {
            bail!("workers must be at least 1");
        }
        if self.lm.order == 0 || !(self.lm.alpha > 0.0) {
            bail!("lm.order must be at least 1 and lm.alpha positive");
        }
        if matches!(self.lm.kind, LmKind::Table | LmKind::Scripted) && self.lm.path.is_none() {
            bail!("lm.path is required for lm.kind = {:?}", self.lm.kind);
        }
        for (tool, s) in &self.sampling {
            if !s.is_valid() {
                bail!("invalid sampling config for {tool}");
            }
        }
        if !self.filter.is_valid() {
            bail!("invalid filter config: thresholds and decay must be positive");
        }
        let mut seen = Vec::new();
        for t in &self.tools {
            if seen.contains(t) {
                bail!("tool {t} listed twice");
            }
            seen.push(*t);
        }
        Ok(())
    }

    pub fn sampling_for(&self, tool: ToolKind) -> SamplingConfig {
        self.sampling.get(&tool).copied().unwrap_or_else(|| SamplingConfig::for_tool(tool))
    }
}
