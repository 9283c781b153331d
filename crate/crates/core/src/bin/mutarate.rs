use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::Context;
use chrono::NaiveDate;
use clap::{Args, Parser, Subcommand};
use log::error;

use mutarate::distance::DistanceMatrix;
use mutarate::distance::DistanceMethod;
use mutarate::phylo::{neighbor_joining, to_newick};
use mutarate::pipeline::{self, PipelineConfig};
use mutarate::simulate::SimulationConfig;
use mutarate::{Error, ErrorKind};

/// Mutation-rate estimation from year-tagged nucleotide sequences.
#[derive(Parser)]
#[command(name = "mutarate", version)]
struct Cli {
    /// Log filter (error, warn, info, debug).
    #[arg(long, global = true, default_value = "info")]
    log: String,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run every stage in order.
    Pipeline {
        #[arg(long)]
        config: PathBuf,
        #[command(flatten)]
        o: Overrides,
    },
    /// Load the dataset, downloading missing accessions if an endpoint is set.
    Fetch(StageArgs),
    /// Align each year group and resolve ambiguity codes.
    Align(StageArgs),
    /// Train one profile HMM per year.
    Train(StageArgs),
    /// Score every sequence under its year's model.
    Score(StageArgs),
    /// Choose the best-scoring sequence of each year.
    Select(StageArgs),
    /// Pairwise distances between representatives.
    Distances {
        #[command(flatten)]
        s: StageArgs,
        /// Compute only this method (jc, kimura, p-distance).
        #[arg(long)]
        method: Option<DistanceMethod>,
        /// FASTA to use instead of the representatives artifact.
        #[arg(long)]
        input: Option<PathBuf>,
        /// Where to write the matrix (default: out dir).
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Neighbor-joining tree and its rerooted copy.
    Tree {
        #[command(flatten)]
        s: StageArgs,
        /// Distance matrix TSV to use instead of the distances artifact.
        #[arg(long)]
        input: Option<PathBuf>,
        /// Where to write the Newick tree when --input is given.
        #[arg(long)]
        output: Option<PathBuf>,
        /// Leaf to reroot at when --input is given.
        #[arg(long)]
        reroot: Option<String>,
    },
    /// Distance-versus-time observations and the clock fit.
    Rate {
        #[command(flatten)]
        s: StageArgs,
        /// Observations CSV to fit instead of building them.
        #[arg(long)]
        observations: Option<PathBuf>,
    },
    /// Collect the artifacts into report.json.
    Report(StageArgs),
}

#[derive(Args)]
struct StageArgs {
    /// JSON config; flags override its fields.
    #[arg(long)]
    config: Option<PathBuf>,
    #[command(flatten)]
    o: Overrides,
}

#[derive(Args, Default)]
struct Overrides {
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    /// Manifest TSV (label, accession, year, optional date).
    #[arg(long)]
    manifest: Option<PathBuf>,
    /// Use the bundled NS5B accession list.
    #[arg(long)]
    bundled_manifest: bool,
    /// FASTA input; repeatable.
    #[arg(long)]
    fasta: Vec<PathBuf>,
    #[arg(long)]
    snapshot_dir: Option<PathBuf>,
    /// efetch endpoint for accessions not found locally.
    #[arg(long)]
    fetch_endpoint: Option<String>,
    /// Generate a synthetic dataset from the seed.
    #[arg(long)]
    synthetic: bool,
    #[arg(long)]
    reference_year: Option<i32>,
    #[arg(long)]
    reference_date: Option<NaiveDate>,
    #[arg(long = "match", allow_negative_numbers = true)]
    match_score: Option<i32>,
    #[arg(long, allow_negative_numbers = true)]
    mismatch: Option<i32>,
    #[arg(long, allow_negative_numbers = true)]
    gap_open: Option<i32>,
    #[arg(long, allow_negative_numbers = true)]
    gap_extend: Option<i32>,
    #[arg(long)]
    pseudocount: Option<f64>,
    #[arg(long)]
    max_iterations: Option<usize>,
    #[arg(long)]
    ll_tolerance: Option<f64>,
    #[arg(long)]
    gap_threshold: Option<f64>,
    /// Extra model lengths to score, comma separated.
    #[arg(long, value_delimiter = ',')]
    sweep_lengths: Option<Vec<usize>>,
    #[arg(long)]
    tree_distance: Option<DistanceMethod>,
    #[arg(long)]
    rate_distance: Option<DistanceMethod>,
    /// Polynomial degree of the clock fit.
    #[arg(long)]
    degree: Option<usize>,
    /// Leave the reference year's (0, 0) point out of the fit.
    #[arg(long)]
    exclude_reference_point: bool,
}

impl Overrides {
    fn apply(self, cfg: &mut PipelineConfig) {
        macro_rules! set {
            ($field:expr, $value:expr) => {
                if let Some(v) = $value {
                    $field = v;
                }
            };
        }
        set!(cfg.out_dir, self.out);
        set!(cfg.seed, self.seed);
        if self.manifest.is_some() {
            cfg.manifest = self.manifest;
        }
        cfg.bundled_manifest |= self.bundled_manifest;
        if !self.fasta.is_empty() {
            cfg.fasta = self.fasta;
        }
        if self.snapshot_dir.is_some() {
            cfg.snapshot_dir = self.snapshot_dir;
        }
        if self.fetch_endpoint.is_some() {
            cfg.fetch_endpoint = self.fetch_endpoint;
        }
        if self.synthetic && cfg.synthetic.is_none() {
            cfg.synthetic = Some(SimulationConfig::default());
        }
        if self.reference_year.is_some() {
            cfg.reference_year = self.reference_year;
        }
        if self.reference_date.is_some() {
            cfg.reference_date = self.reference_date;
        }
        set!(cfg.scoring.match_score, self.match_score);
        set!(cfg.scoring.mismatch, self.mismatch);
        set!(cfg.scoring.gap_open, self.gap_open);
        set!(cfg.scoring.gap_extend, self.gap_extend);
        set!(cfg.training.pseudocount, self.pseudocount);
        set!(cfg.training.max_iterations, self.max_iterations);
        set!(cfg.training.ll_tolerance, self.ll_tolerance);
        set!(cfg.training.gap_threshold, self.gap_threshold);
        set!(cfg.sweep_lengths, self.sweep_lengths);
        set!(cfg.tree_distance, self.tree_distance);
        set!(cfg.rate_distance, self.rate_distance);
        set!(cfg.degree, self.degree);
        if self.exclude_reference_point {
            cfg.include_reference_point = false;
        }
    }
}

fn config(path: Option<&Path>, o: Overrides) -> anyhow::Result<PipelineConfig> {
    let mut cfg = match path {
        Some(p) => PipelineConfig::load(p)?,
        None => PipelineConfig::default(),
    };
    o.apply(&mut cfg);
    cfg.scoring.validate()?;
    cfg.training.validate()?;
    Ok(cfg)
}

fn write(path: &Path, text: &str) -> anyhow::Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir)?;
    }
    fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

fn run(command: Command) -> anyhow::Result<ExitCode> {
    match command {
        Command::Pipeline { config: path, o } => {
            let cfg = config(Some(&path), o)?;
            let report = pipeline::run_pipeline(&cfg)?;
            println!(
                "rate {:.6e} per day ({:.6e} per year); artifacts in {}",
                report.fit.rate_per_day,
                report.fit.rate_per_year,
                cfg.out_dir.display()
            );
        }
        Command::Fetch(s) => {
            let cfg = config(s.config.as_deref(), s.o)?;
            cfg.validate()?;
            let summary = pipeline::stage_fetch(&cfg)?;
            if !summary.fetch_misses.is_empty() {
                eprintln!("accessions not found: {}", summary.fetch_misses.join(", "));
                return Ok(ExitCode::from(3));
            }
        }
        Command::Align(s) => pipeline::stage_align(&config(s.config.as_deref(), s.o)?).map(drop)?,
        Command::Train(s) => pipeline::stage_train(&config(s.config.as_deref(), s.o)?).map(drop)?,
        Command::Score(s) => pipeline::stage_score(&config(s.config.as_deref(), s.o)?)?,
        Command::Select(s) => pipeline::stage_select(&config(s.config.as_deref(), s.o)?).map(drop)?,
        Command::Distances {
            s,
            method,
            input,
            output,
        } => {
            let cfg = config(s.config.as_deref(), s.o)?;
            if method.is_none() && input.is_none() && output.is_none() {
                pipeline::stage_distances(&cfg)?;
            } else {
                let method = method.unwrap_or(cfg.tree_distance);
                let path = input.unwrap_or_else(|| cfg.layout().representatives_fasta());
                let text = fs::read_to_string(&path).map_err(|_| Error::MissingArtifact(path.clone()))?;
                let d = pipeline::distances_from_fasta(&text, method, &cfg.scoring)?;
                let out = output.unwrap_or_else(|| cfg.layout().distances(method));
                write(&out, &d.to_tsv())?;
            }
        }
        Command::Tree {
            s,
            input,
            output,
            reroot,
        } => {
            let cfg = config(s.config.as_deref(), s.o)?;
            match input {
                None => pipeline::stage_tree(&cfg).map(drop)?,
                Some(path) => {
                    let text = fs::read_to_string(&path).map_err(|_| Error::MissingArtifact(path.clone()))?;
                    let mut t = neighbor_joining(&DistanceMatrix::from_tsv(&text)?)?;
                    if let Some(leaf) = reroot {
                        t = t.reroot(&leaf)?;
                    }
                    let out = output.unwrap_or_else(|| cfg.layout().tree());
                    write(&out, &(to_newick(&t) + "\n"))?;
                }
            }
        }
        Command::Rate { s, observations } => {
            let cfg = config(s.config.as_deref(), s.o)?;
            match observations {
                None => pipeline::stage_rate(&cfg).map(drop)?,
                Some(path) => {
                    let csv = fs::read_to_string(&path).map_err(|_| Error::MissingArtifact(path.clone()))?;
                    let (doc, svg) = pipeline::fit_observations(&csv, cfg.degree)?;
                    let l = cfg.layout();
                    write(&l.fit_json(), &(serde_json::to_string_pretty(&doc)? + "\n"))?;
                    write(&l.fit_svg(), &svg)?;
                    println!("rate {:.6e} per day ({:.6e} per year)", doc.rate_per_day, doc.rate_per_year);
                }
            }
        }
        Command::Report(s) => pipeline::stage_report(&config(s.config.as_deref(), s.o)?).map(drop)?,
    }
    Ok(ExitCode::SUCCESS)
}

fn exit_code(err: &anyhow::Error) -> u8 {
    let kind = err
        .chain()
        .find_map(|e| e.downcast_ref::<Error>())
        .map(Error::kind)
        .unwrap_or(ErrorKind::Data);
    kind.exit_code() as u8
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(&cli.log)).init();
    match run(cli.command) {
        Ok(code) => code,
        Err(e) => {
            // library errors already embed their causes
            if e.downcast_ref::<Error>().is_some() {
                error!("{e}");
            } else {
                error!("{e:#}");
            }
            ExitCode::from(exit_code(&e))
        }
    }
}
