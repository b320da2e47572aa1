use std::io::{self, Read};
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use clap::{Parser, Subcommand};
use serde::Serialize;

use selfcall::config::PipelineConfig;
use selfcall::eval::{render_threshold_table, score_predictions, split_by_calls, threshold_table, today, usage, SystemClock};
use selfcall::formats::{read_jsonl, read_records, write_json, write_jsonl, PredictionRecord, ScoredRecord, TaskRecord};
use selfcall::models::{build_index, build_registry, load_lm, load_prompts, read_corpus};
use selfcall::stages;
use selfcall_core::decoding::{generate, DecodeConfig, DecodeTrace};
use selfcall_core::evalgen::{build_prompt, generate_dateset};
use selfcall_core::tools::CallContext;
use selfcall_core::Date;

#[derive(Parser)]
#[command(name = "selfcall", version, about = "Annotate a corpus with self-supervised tool calls and decode with tools")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Build a BM25 search index from KILT-style pages (JSONL).
    Index {
        #[arg(long)]
        pages: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Sample candidate calls for every document.
    Annotate {
        #[arg(long)]
        config: PathBuf,
    },
    /// Execute candidate calls.
    Execute {
        #[arg(long)]
        config: PathBuf,
        /// Defaults to candidates.jsonl in the output directory.
        #[arg(long)]
        input: Option<PathBuf>,
    },
    /// Score, filter and merge executed calls into the augmented dataset.
    Filter {
        #[arg(long)]
        config: PathBuf,
        /// Defaults to executed.jsonl in the output directory.
        #[arg(long)]
        input: Option<PathBuf>,
    },
    /// annotate, execute and filter in sequence.
    Run {
        #[arg(long)]
        config: PathBuf,
    },
    /// Kept-call counts per tool at each reporting threshold, and call usage
    /// of decoder traces.
    Stats {
        #[arg(long)]
        scored: Option<PathBuf>,
        #[arg(long)]
        traces: Option<PathBuf>,
        #[arg(long)]
        json: bool,
    },
    /// Greedy generation with tool interception.
    Generate {
        #[arg(long)]
        config: PathBuf,
        /// Prompt file; stdin when absent and no --tasks.
        #[arg(long)]
        prompt: Option<PathBuf>,
        /// Benchmark items (JSONL); writes one prediction per item.
        #[arg(long)]
        tasks: Option<PathBuf>,
        #[arg(long, default_value_t = 10)]
        k_api: usize,
        #[arg(long)]
        disable_tools: bool,
        #[arg(long, default_value_t = 1)]
        max_calls: usize,
        #[arg(long, default_value_t = 128)]
        max_tokens: usize,
        /// Current date for the calendar (YYYY-MM-DD); today when absent.
        #[arg(long)]
        date_override: Option<Date>,
        /// Write the trace(s) as JSON here.
        #[arg(long)]
        trace_out: Option<PathBuf>,
        /// Write predictions (with --tasks) here.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Write the temporal question set as JSONL.
    Dateset {
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Accuracy per task family from predictions JSONL.
    Eval {
        #[arg(long)]
        predictions: PathBuf,
    },
}

fn main() -> Result<()> {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    match Cli::parse().command {
        Command::Index { pages, out } => {
            let index = build_index(&pages)?;
            write_json(&out, &index)?;
            println!("indexed {} sections into {}", index.len(), out.display());
        }
        Command::Annotate { config } => {
            let path = stages::run_annotate(&PipelineConfig::load(&config)?)?;
            println!("{}", path.display());
        }
        Command::Execute { config, input } => {
            let path = stages::run_execute(&PipelineConfig::load(&config)?, input.as_deref())?;
            println!("{}", path.display());
        }
        Command::Filter { config, input } => {
            let stats = stages::run_filter_merge(&PipelineConfig::load(&config)?, input.as_deref())?;
            print!("{}", stats.to_table());
        }
        Command::Run { config } => {
            let stats = stages::run_all(&PipelineConfig::load(&config)?)?;
            print!("{}", stats.to_table());
        }
        Command::Stats { scored, traces, json } => stats(scored.as_deref(), traces.as_deref(), json)?,
        Command::Generate {
            config,
            prompt,
            tasks,
            k_api,
            disable_tools,
            max_calls,
            max_tokens,
            date_override,
            trace_out,
            out,
        } => {
            let decode = DecodeConfig {
                k_api,
                max_api_calls: max_calls,
                api_disabled: disable_tools,
                max_tokens,
                ..Default::default()
            };
            let gen = GenerateArgs {
                config: &config,
                decode,
                date: date_override.unwrap_or_else(today),
            };
            match tasks {
                Some(tasks) => gen.tasks(&tasks, out.as_deref(), trace_out.as_deref())?,
                None => gen.single(prompt.as_deref(), trace_out.as_deref())?,
            }
        }
        Command::Dateset { seed, out } => {
            let items = generate_dateset(seed);
            let n = write_jsonl(&out, &items)?;
            println!("wrote {n} items to {}", out.display());
        }
        Command::Eval { predictions } => {
            let preds: Vec<PredictionRecord> = read_jsonl(&predictions)?;
            #[derive(Serialize)]
            struct Report<T, U> {
                families: T,
                calls: U,
            }
            let report = Report {
                families: score_predictions(&preds),
                calls: split_by_calls(&preds),
            };
            println!("{}", serde_json::to_string_pretty(&report)?);
        }
    }
    Ok(())
}

fn stats(scored: Option<&Path>, traces: Option<&Path>, json: bool) -> Result<()> {
    if let Some(path) = scored {
        let records: Vec<ScoredRecord> = read_records(path)?;
        let rows = threshold_table(&records);
        if json {
            println!("{}", serde_json::to_string_pretty(&rows)?);
        } else {
            print!("{}", render_threshold_table(&rows));
        }
    }
    if let Some(path) = traces {
        let traces: Vec<DecodeTrace> = read_jsonl(path)?;
        let report = usage(&traces);
        if json {
            println!("{}", serde_json::to_string_pretty(&report)?);
        } else {
            println!(
                "all {} with_calls {} without_calls {} percent {:.1}",
                report.all, report.with_calls, report.without_calls, report.percent
            );
            for (tool, pct) in &report.per_tool_percent {
                println!("  {tool:<12} {pct:.1}");
            }
        }
    }
    Ok(())
}

struct GenerateArgs<'a> {
    config: &'a Path,
    decode: DecodeConfig,
    date: Date,
}

impl GenerateArgs<'_> {
    fn load(&self) -> Result<(Box<dyn selfcall_core::LanguageModel>, selfcall_core::tools::ToolRegistry)> {
        let cfg = PipelineConfig::load(self.config)?;
        let corpus = read_corpus(&cfg.corpus)?;
        let lm = load_lm(&cfg.lm, &corpus, &load_prompts(&cfg)?)?;
        Ok((lm, build_registry(&cfg.services)?))
    }

    fn single(&self, prompt: Option<&Path>, trace_out: Option<&Path>) -> Result<()> {
        let text = match prompt {
            Some(p) => std::fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?,
            None => {
                let mut s = String::new();
                io::stdin().read_to_string(&mut s)?;
                s
            }
        };
        let text = text.trim_end();
        anyhow::ensure!(!text.is_empty(), "empty prompt");
        let (lm, tools) = self.load()?;
        let ctx = CallContext { date: Some(self.date) };
        let trace = generate(lm.as_ref(), text, &tools, &ctx, &self.decode, &SystemClock::default());
        println!("{}", trace.text);
        if let Some(path) = trace_out {
            write_json(path, &trace)?;
        }
        Ok(())
    }

    fn tasks(&self, tasks: &Path, out: Option<&Path>, trace_out: Option<&Path>) -> Result<()> {
        let items: Vec<TaskRecord> = read_jsonl(tasks)?;
        let (lm, tools) = self.load()?;
        let ctx = CallContext { date: Some(self.date) };
        let clock = SystemClock::default();
        let mut traces = Vec::with_capacity(items.len());
        let mut preds = Vec::with_capacity(items.len());
        for item in &items {
            let prompt = build_prompt(item.family, &item.context, &item.question);
            let trace = generate(lm.as_ref(), &prompt, &tools, &ctx, &self.decode, &clock);
            preds.push(PredictionRecord {
                task_id: item.task_id.clone(),
                family: item.family,
                prediction: trace.text.clone(),
                golds: item.golds.clone(),
                called: !trace.events.is_empty(),
            });
            traces.push(trace);
        }
        match out {
            Some(path) => {
                write_jsonl(path, &preds)?;
            }
            None => {
                for p in &preds {
                    println!("{}", serde_json::to_string(p)?);
                }
            }
        }
        if let Some(path) = trace_out {
            write_jsonl(path, &traces)?;
        }
        Ok(())
    }
}
