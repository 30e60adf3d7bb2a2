use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use periomap_core::pipeline::{
    generate_synthetic_corpus, run_pipeline_with, RunOptions, RunSummary, SchemeKind, SynthSpec,
};
use periomap_core::{Error, PipelineConfig, Result};

#[derive(Parser)]
#[command(name = "periomap", version, about = "Citation-derived periodical classification schemes")]
struct Cli {
    #[command(flatten)]
    global: Global,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Global {
    /// Pipeline configuration (TOML). Missing keys take their defaults.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Overrides the global seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Overrides the output directory.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Recompute stages even when their cache key matches.
    #[arg(long, global = true)]
    force: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Read papers, citations, abstracts and subject areas.
    Ingest,
    /// Build citation and co-citation matrices.
    Matrices,
    /// Generate citation trails and node2vec walks.
    Walks,
    /// Train skip-gram embeddings.
    Embed,
    /// Cluster periodicals into schemes.
    Cluster,
    /// Cross-validate the abstract classifier against every scheme.
    Classify,
    /// Fit the topic model.
    Topics,
    /// Compare schemes with each other and with topics.
    Agreement,
    /// Write flow tables or similarity maps.
    Export {
        #[command(subcommand)]
        what: ExportKind,
    },
    /// Write a planted-partition corpus and a config that runs on it.
    Synth(SynthArgs),
    /// Run the pipeline, optionally stopping after a stage.
    Run {
        #[arg(long)]
        stage: Option<String>,
    },
}

#[derive(Subcommand)]
enum ExportKind {
    /// Label flows between scheme pairs.
    Sankey(PairArgs),
    /// Element-centric similarity maps with IDW grids.
    Map(PairArgs),
}

#[derive(Args)]
struct PairArgs {
    /// Scheme pair as `a:b`; repeat for several. Defaults to the configured pairs.
    #[arg(long = "pair", value_parser = parse_pair)]
    pairs: Vec<[SchemeKind; 2]>,
}

#[derive(Args)]
struct SynthArgs {
    /// Corpus parameters (TOML); missing keys take their defaults.
    #[arg(long)]
    spec: Option<PathBuf>,
    #[arg(long)]
    communities: Option<usize>,
    #[arg(long)]
    papers_per_community: Option<usize>,
    #[arg(long)]
    intra_rate: Option<f64>,
}

fn parse_pair(s: &str) -> std::result::Result<[SchemeKind; 2], String> {
    let (a, b) = s.split_once(':').ok_or("expected `a:b`")?;
    let parse = |x: &str| SchemeKind::parse(x).ok_or_else(|| format!("unknown scheme `{x}`"));
    Ok([parse(a)?, parse(b)?])
}

fn load_config(g: &Global) -> Result<PipelineConfig> {
    let mut cfg = match &g.config {
        Some(path) => PipelineConfig::load(path)?,
        None => PipelineConfig::default(),
    };
    if let Some(seed) = g.seed {
        cfg.seed = seed;
    }
    if let Some(out) = &g.out {
        cfg.output_dir = out.clone();
    }
    Ok(cfg)
}

fn run_until(g: &Global, cfg: &PipelineConfig, stage: Option<&str>) -> Result<RunSummary> {
    let summary = run_pipeline_with(cfg, &RunOptions { until: stage.map(str::to_string), force: g.force })?;
    for s in &summary.stages {
        println!("{:<10} {}", s.name, if s.cached { "cached" } else { "computed" });
    }
    println!("outputs in {}", summary.output_dir.display());
    Ok(summary)
}

fn list_files(dir: &Path, suffix: &str) -> Result<()> {
    let mut files: Vec<PathBuf> = std::fs::read_dir(dir)
        .map_err(|e| Error::InvalidInput(format!("{}: {e}", dir.display())))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.to_string_lossy().ends_with(suffix))
        .collect();
    files.sort();
    for f in files {
        println!("{}", f.display());
    }
    Ok(())
}

fn export(g: &Global, what: &ExportKind) -> Result<()> {
    let mut cfg = load_config(g)?;
    let (args, sub, suffix) = match what {
        ExportKind::Sankey(a) => (a, "sankey", ".filtered.tsv"),
        ExportKind::Map(a) => {
            cfg.export.maps = true;
            (a, "map", ".grid.tsv")
        }
    };
    if !args.pairs.is_empty() {
        cfg.export.pairs = Some(args.pairs.clone());
    }
    let summary = run_until(g, &cfg, Some("export"))?;
    list_files(&summary.output_dir.join("export").join(sub), suffix)
}

fn synth(g: &Global, args: &SynthArgs) -> Result<()> {
    let mut spec = match &args.spec {
        Some(path) => {
            let text =
                std::fs::read_to_string(path).map_err(|e| Error::InvalidInput(format!("{}: {e}", path.display())))?;
            toml::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?
        }
        None => SynthSpec::default(),
    };
    if let Some(v) = args.communities {
        spec.communities = v;
    }
    if let Some(v) = args.papers_per_community {
        spec.papers_per_community = v;
    }
    if let Some(v) = args.intra_rate {
        spec.intra_rate = v;
    }
    if let Some(seed) = g.seed {
        spec.seed = seed;
    }
    let dir = g.out.clone().unwrap_or_else(|| PathBuf::from("synthetic"));
    let files = generate_synthetic_corpus(&spec, &dir)?;
    // Paths in a config resolve against its own directory.
    let local = |p: &Path| PathBuf::from(p.file_name().unwrap_or_default());
    let mut cfg = PipelineConfig { output_dir: PathBuf::from("out"), ..Default::default() };
    cfg.input.papers = local(&files.papers);
    cfg.input.citations = local(&files.citations);
    cfg.input.abstracts = local(&files.abstracts);
    cfg.input.scopus = Some(local(&files.scopus));
    cfg.kmeans.k = spec.communities;
    let config_path = dir.join("config.toml");
    std::fs::write(&config_path, cfg.to_toml_string()?)
        .map_err(|e| Error::InvalidInput(format!("{}: {e}", config_path.display())))?;
    println!("corpus written to {}", dir.display());
    println!("run it with: periomap --config {} run", config_path.display());
    Ok(())
}

fn dispatch(cli: &Cli) -> Result<()> {
    let g = &cli.global;
    let stage = match &cli.command {
        Command::Synth(args) => return synth(g, args),
        Command::Export { what } => return export(g, what),
        Command::Run { stage } => stage.as_deref(),
        Command::Ingest => Some("ingest"),
        Command::Matrices => Some("matrices"),
        Command::Walks => Some("walks"),
        Command::Embed => Some("embed"),
        Command::Cluster => Some("cluster"),
        Command::Classify => Some("classify"),
        Command::Topics => Some("topics"),
        Command::Agreement => Some("agreement"),
    };
    run_until(g, &load_config(g)?, stage).map(|_| ())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    match dispatch(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_validation() { 2 } else { 1 })
        }
    }
}
