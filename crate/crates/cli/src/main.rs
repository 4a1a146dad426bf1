use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use etlinks::config::{resolve_config, Overrides};
use etlinks::error::CliError;
use etlinks::stages::run_stage;

/// Link technology and company rosters through pretrained entity
/// embeddings: align, rank linkages, cluster, map, and validate against
/// patent counts.
#[derive(Parser)]
#[command(name = "etlinks", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Crawl a MediaWiki category tree into a candidate technology roster.
    Harvest(StageArgs),
    /// Parse embeddings and resolve both rosters to vectors.
    Resolve(StageArgs),
    /// Fit the orthogonal map from company space to technology space.
    Align(StageArgs),
    /// Compute the technology × company similarity matrix.
    Link(StageArgs),
    /// Hierarchically cluster the joint vector set.
    Cluster(StageArgs),
    /// Project the joint set to 2D map coordinates.
    Project(StageArgs),
    /// Correlate similarities against patent counts.
    Validate(StageArgs),
    /// Render the landscape map SVG.
    Render(StageArgs),
    /// Write the report and the canonical model JSON.
    Report(StageArgs),
    /// Run every configured stage in order.
    All(StageArgs),
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::Harvest(_) => "harvest",
            Command::Resolve(_) => "resolve",
            Command::Align(_) => "align",
            Command::Link(_) => "link",
            Command::Cluster(_) => "cluster",
            Command::Project(_) => "project",
            Command::Validate(_) => "validate",
            Command::Render(_) => "render",
            Command::Report(_) => "report",
            Command::All(_) => "all",
        }
    }

    fn args(&self) -> &StageArgs {
        match self {
            Command::Harvest(a)
            | Command::Resolve(a)
            | Command::Align(a)
            | Command::Link(a)
            | Command::Cluster(a)
            | Command::Project(a)
            | Command::Validate(a)
            | Command::Render(a)
            | Command::Report(a)
            | Command::All(a) => a,
        }
    }
}

#[derive(Args)]
struct StageArgs {
    /// TOML config file; every key can be overridden by the flag of the
    /// same name.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    embeddings: Option<PathBuf>,
    /// Embedding file format.
    #[arg(long, value_parser = ["text", "binary"])]
    format: Option<String>,
    #[arg(long)]
    companies: Option<PathBuf>,
    #[arg(long)]
    technologies: Option<PathBuf>,
    #[arg(long)]
    patents: Option<PathBuf>,
    #[arg(long)]
    anchors: Option<PathBuf>,
    /// Output directory for artifacts.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Number of clusters to cut the dendrogram into.
    #[arg(long)]
    clusters: Option<usize>,
    /// Neighbors per entity in linkage tables.
    #[arg(long = "top-k")]
    top_k: Option<usize>,
    /// One-sided significance level for the patent validation.
    #[arg(long)]
    alpha: Option<f64>,
    /// Seed for randomized options (permutation test).
    #[arg(long)]
    seed: Option<u64>,
    /// Drop zero-count companies from each technology's patent sample.
    #[arg(long)]
    exclude_zero: bool,
    /// Correlate raw patent counts instead of log1p counts.
    #[arg(long)]
    raw_counts: bool,
    /// Also compute seeded permutation p-values (10,000 shuffles).
    #[arg(long)]
    permutation: bool,
    /// How anchor pairs are obtained.
    #[arg(long = "anchor-mode", value_parser = ["supplied", "mutual-nn"])]
    anchor_mode: Option<String>,
    /// Mutual-NN refinement rounds.
    #[arg(long = "refine-rounds")]
    refine_rounds: Option<usize>,
    /// Prefix mangled onto wiki titles when looking up embedding keys.
    #[arg(long = "entity-prefix")]
    entity_prefix: Option<String>,
    /// Label the top-m spenders on the map.
    #[arg(long = "label-top-m")]
    label_top_m: Option<usize>,
    /// MediaWiki API endpoint (harvest).
    #[arg(long)]
    endpoint: Option<String>,
    /// Root category to crawl (harvest).
    #[arg(long = "root-category")]
    root_category: Option<String>,
    /// Maximum subcategory depth (harvest).
    #[arg(long = "max-depth")]
    max_depth: Option<usize>,
    /// Response cache directory (harvest).
    #[arg(long = "cache-dir")]
    cache_dir: Option<PathBuf>,
}

impl StageArgs {
    fn overrides(&self) -> Overrides {
        Overrides {
            embeddings: self.embeddings.clone(),
            format: self.format.clone(),
            companies: self.companies.clone(),
            technologies: self.technologies.clone(),
            patents: self.patents.clone(),
            anchors: self.anchors.clone(),
            out: self.out.clone(),
            anchor_mode: self.anchor_mode.clone(),
            refine_rounds: self.refine_rounds,
            clusters: self.clusters,
            top_k: self.top_k,
            alpha: self.alpha,
            seed: self.seed,
            exclude_zero: self.exclude_zero,
            raw_counts: self.raw_counts,
            permutation: self.permutation,
            entity_prefix: self.entity_prefix.clone(),
            label_top_m: self.label_top_m,
            endpoint: self.endpoint.clone(),
            root_category: self.root_category.clone(),
            max_depth: self.max_depth,
            cache_dir: self.cache_dir.clone(),
        }
    }
}

fn run(cli: &Cli) -> Result<(), CliError> {
    let args = cli.command.args();
    let config = resolve_config(args.config.as_deref(), &args.overrides())?;
    run_stage(cli.command.name(), &config)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = std::panic::catch_unwind(|| run(&cli));
    match outcome {
        Ok(Ok(())) => ExitCode::SUCCESS,
        Ok(Err(e)) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
        Err(panic) => {
            let message = panic
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| panic.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "unexpected panic".to_string());
            eprintln!("internal error: {message}");
            ExitCode::from(2)
        }
    }
}
