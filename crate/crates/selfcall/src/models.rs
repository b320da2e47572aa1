//! Loading corpora, prompts, language models, the search index and the
//! tool registry from a [`PipelineConfig`].

use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;
use std::time::Duration;

use anyhow::{anyhow, bail, Context, Result};

use selfcall_core::lm::{CountTable, ScriptSpec};
use selfcall_core::sampling::ToolPrompt;
use selfcall_core::tools::{
    Calculator, Calendar, Page, QuestionAnswering, SearchIndex, TextService, ToolRegistry, Translation,
    TrigramDetector, WikiSearch,
};
use selfcall_core::{Document, LanguageModel, NgramLm, ScriptedLm, ToolKind, WordTokenizer};

use crate::config::{LmConfig, LmKind, PipelineConfig, ServiceConfig, ServicesConfig};
use crate::formats::read_jsonl;
use crate::http::{load_fixtures, HttpService};

/// Reads every corpus file in order. Ids must be unique and texts non-blank.
pub fn read_corpus(paths: &[impl AsRef<Path>]) -> Result<Vec<Document>> {
    let mut docs = Vec::new();
    let mut ids = BTreeSet::new();
    for path in paths {
        let path = path.as_ref();
        for doc in read_jsonl::<Document>(path)? {
            if !doc.is_valid() {
                bail!("{}: document {:?} has an empty id or text", path.display(), doc.id);
            }
            if !ids.insert(doc.id.clone()) {
                bail!("{}: duplicate document id {:?}", path.display(), doc.id);
            }
            docs.push(doc);
        }
    }
    Ok(docs)
}

pub fn load_prompts(cfg: &PipelineConfig) -> Result<BTreeMap<ToolKind, ToolPrompt>> {
    let mut out = BTreeMap::new();
    for tool in ToolKind::ALL {
        let prompt = match cfg.prompts.get(&tool) {
            Some(path) => {
                let text =
                    std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
                ToolPrompt::parse(tool, &text).map_err(|e| anyhow!("{}: {e}", path.display()))?
            }
            None => ToolPrompt::builtin(tool),
        };
        out.insert(tool, prompt);
    }
    Ok(out)
}

/// Builds the scoring and sampling LM. The n-gram kind trains on the corpus
/// and the prompt texts so the call syntax is in its vocabulary.
pub fn load_lm(
    cfg: &LmConfig,
    corpus: &[Document],
    prompts: &BTreeMap<ToolKind, ToolPrompt>,
) -> Result<Box<dyn LanguageModel>> {
    match cfg.kind {
        LmKind::Ngram => {
            let mut texts: Vec<String> = prompts.values().map(|p| format!("{}{}", p.head(), p.tail())).collect();
            texts.extend(corpus.iter().map(|d| d.text.clone()));
            Ok(Box::new(train_ngram(texts.iter().map(String::as_str), cfg)))
        }
        LmKind::Table => {
            let path = cfg.path.as_deref().ok_or_else(|| anyhow!("lm.path missing"))?;
            let table: CountTable = read_json(path)?;
            let lm = NgramLm::from_table(table).map_err(|e| anyhow!("{}: {e}", path.display()))?;
            Ok(Box::new(lm))
        }
        LmKind::Scripted => {
            let path = cfg.path.as_deref().ok_or_else(|| anyhow!("lm.path missing"))?;
            let spec: ScriptSpec = read_json(path)?;
            let lm = ScriptedLm::from_spec(&spec).map_err(|e| anyhow!("{}: {e}", path.display()))?;
            Ok(Box::new(lm))
        }
    }
}

pub fn train_ngram<'a>(texts: impl Iterator<Item = &'a str> + Clone, cfg: &LmConfig) -> NgramLm {
    let tok = WordTokenizer::train(texts.clone(), cfg.min_count);
    let mut lm = NgramLm::new(tok, cfg.order, cfg.alpha);
    for t in texts {
        lm.add_text(t);
    }
    lm
}

pub fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))
}

/// Builds the index from KILT-style pages (JSONL).
pub fn build_index(pages: &Path) -> Result<SearchIndex> {
    let pages: Vec<Page> = read_jsonl(pages)?;
    Ok(SearchIndex::build(&pages))
}

pub fn load_index(services: &ServicesConfig) -> Result<Option<SearchIndex>> {
    if let Some(path) = &services.search.index {
        return Ok(Some(read_json(path)?));
    }
    services.search.pages.as_deref().map(build_index).transpose()
}

fn text_service(cfg: &ServiceConfig) -> Result<Option<Box<dyn TextService>>> {
    if let Some(url) = &cfg.url {
        let svc = HttpService::new(url.clone(), Duration::from_millis(cfg.timeout_ms))
            .with_min_interval(Duration::from_millis(cfg.min_interval_ms));
        return Ok(Some(Box::new(svc)));
    }
    match &cfg.fixtures {
        Some(path) => Ok(Some(Box::new(load_fixtures(path)?))),
        None => Ok(None),
    }
}

/// Calculator and calendar are always present; the other tools only when
/// configured.
pub fn build_registry(services: &ServicesConfig) -> Result<ToolRegistry> {
    let mut reg = ToolRegistry::new().with(Calculator).with(Calendar::default());
    if let Some(index) = load_index(services)? {
        let mut search = WikiSearch::new(index);
        search.snippet_chars = services.search.snippet_chars;
        reg.register(Box::new(search));
    }
    if let Some(service) = text_service(&services.qa)? {
        reg.register(Box::new(QuestionAnswering { service }));
    }
    if let Some(service) = text_service(&services.mt)? {
        reg.register(Box::new(Translation {
            service,
            langid: Box::new(TrigramDetector::default()),
            min_confidence: services.mt_confidence,
        }));
    }
    Ok(reg)
}
