use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Context;
use biopatch_core::config::RunConfig;
use clap::{Args, Parser, Subcommand};

mod commands;

#[derive(Parser, Debug)]
#[command(name = "biopatch", version, about = "Synthetic biography corpora, training manifests and evaluation")]
struct Cli {
    /// Run configuration; its values take precedence over flags.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Generate the population and its known/test/unknown pools.
    GenPeople(GenPeople),
    /// Render CPT, SFT and test samples for a generated population.
    BuildCorpus(BuildCorpus),
    /// Sample a subset-balanced external test set into a corpus directory.
    IngestWiki(IngestWiki),
    /// Expand a variant spec into a training manifest.
    Schedule(Schedule),
    /// Exact-match scoring of predictions against a test corpus.
    Score(Score),
    /// Few-shot Known/Unknown categorization (prompt generation or scoring).
    Categorize(Categorize),
    /// Grouped relative-accuracy report over score reports.
    Report(Report),
    /// Entity-attention analysis of attention dumps.
    #[command(subcommand)]
    Attn(Attn),
    /// Contextual similarity between reasoning anchors and task groups.
    Similarity(Similarity),
    /// Run generation, corpus, wiki ingestion and scheduling from a config.
    Pipeline(Pipeline),
}

#[derive(Args, Debug)]
pub struct GenPeople {
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 3000)]
    pub n: usize,
    #[arg(long)]
    pub known: Option<usize>,
    #[arg(long)]
    pub test: Option<usize>,
    #[arg(long)]
    pub unknown: Option<usize>,
    /// Directory with first_female.txt, first_male.txt and surnames.txt.
    #[arg(long)]
    pub names: Option<PathBuf>,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Args, Debug)]
pub struct BuildCorpus {
    /// Directory holding people.jsonl and pools.json.
    #[arg(long)]
    pub people: PathBuf,
    /// Defaults to the seed recorded in pools.json.
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub templates: Option<PathBuf>,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Args, Debug)]
pub struct IngestWiki {
    #[arg(long)]
    pub input: PathBuf,
    /// Corpus directory; wiki.jsonl is written into it.
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, conflicts_with = "total")]
    pub per_subset: Option<usize>,
    #[arg(long)]
    pub total: Option<usize>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

#[derive(Args, Debug)]
pub struct Schedule {
    #[arg(long)]
    pub variant: PathBuf,
    #[arg(long)]
    pub corpus: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Args, Debug)]
pub struct Score {
    /// Corpus directory with test.jsonl (and wiki.jsonl if ingested).
    #[arg(long)]
    pub test: PathBuf,
    #[arg(long)]
    pub pred: PathBuf,
    /// Variant spec to embed, so reports can derive test groups.
    #[arg(long)]
    pub variant: Option<PathBuf>,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Args, Debug)]
pub struct Categorize {
    #[arg(long)]
    pub corpus: PathBuf,
    /// Predictions for the prompts; without it, prompts are written instead.
    #[arg(long)]
    pub pred: Option<PathBuf>,
    #[arg(long, default_value_t = 5)]
    pub k: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Args, Debug)]
pub struct Report {
    #[arg(long)]
    pub baseline: PathBuf,
    #[arg(long, num_args = 1.., required = true)]
    pub variants: Vec<PathBuf>,
    /// `qa`, `reasoning`, `patch`, or a JSON file mapping test set → group.
    #[arg(long)]
    pub grouping: String,
    /// report.json; report.csv is written next to it.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Subcommand, Debug)]
enum Attn {
    /// Per-instance entity attention over a layer window.
    Score(AttnScore),
    /// Per-layer mean and std, plus a selected window.
    Profile(AttnProfile),
    /// Relative change of a variant dump against a baseline dump.
    Delta(AttnDelta),
}

#[derive(Args, Debug)]
pub struct AttnScore {
    #[arg(long)]
    pub dump: PathBuf,
    #[arg(long, default_value = "12:24")]
    pub window: String,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct AttnProfile {
    #[arg(long)]
    pub dump: PathBuf,
    #[arg(long, default_value_t = 0.5)]
    pub threshold: f64,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct AttnDelta {
    #[arg(long)]
    pub base: PathBuf,
    #[arg(long)]
    pub variant: PathBuf,
    #[arg(long, default_value = "12:24")]
    pub window: String,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct Similarity {
    #[arg(long)]
    pub corpus: PathBuf,
    /// A reasoning task such as `M_SR`, or `all` for the 12 reasoning tasks.
    #[arg(long, default_value = "all")]
    pub anchor: String,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct Pipeline {
    #[arg(long)]
    pub out: Option<PathBuf>,
}

fn init_threads() -> anyhow::Result<()> {
    if let Ok(v) = std::env::var("BIOPATCH_THREADS") {
        let n: usize = v.parse().with_context(|| format!("BIOPATCH_THREADS={v} is not a number"))?;
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .context("configuring the thread pool")?;
    }
    Ok(())
}

fn run(cli: Cli) -> anyhow::Result<()> {
    init_threads()?;
    let cfg = cli.config.as_deref().map(RunConfig::load).transpose()?;
    let cfg = cfg.as_ref();
    match cli.command {
        Command::GenPeople(a) => commands::gen_people(a, cfg),
        Command::BuildCorpus(a) => commands::build_corpus(a, cfg),
        Command::IngestWiki(a) => commands::ingest_wiki(a, cfg),
        Command::Schedule(a) => commands::schedule(a),
        Command::Score(a) => commands::score(a),
        Command::Categorize(a) => commands::categorize(a),
        Command::Report(a) => commands::report(a),
        Command::Attn(Attn::Score(a)) => commands::attn_score(a),
        Command::Attn(Attn::Profile(a)) => commands::attn_profile(a),
        Command::Attn(Attn::Delta(a)) => commands::attn_delta(a),
        Command::Similarity(a) => commands::similarity(a),
        Command::Pipeline(a) => commands::pipeline(a, cfg),
    }
}

/// 2 for I/O failures anywhere in the cause chain, 1 for everything else.
fn exit_code(err: &anyhow::Error) -> u8 {
    let io = err.chain().any(|e| {
        e.downcast_ref::<std::io::Error>().is_some()
            || e.downcast_ref::<biopatch_core::Error>().is_some_and(biopatch_core::Error::is_io)
    });
    if io {
        2
    } else {
        1
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let line = serde_json::json!({ "level": "error", "message": format!("{e:#}") });
            eprintln!("{line}");
            ExitCode::from(exit_code(&e))
        }
    }
}
