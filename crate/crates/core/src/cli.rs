//! Command-line front end. [`run`] executes one parsed command and returns
//! the text destined for stdout; `main` turns errors into `E:<code>:<detail>`.

use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};

use crate::classifier::{EmbeddingTable, PromptParams, SampleSet, DEFAULT_TAU};
use crate::error::{Error, Result};
use crate::io;
use crate::metrics::{self, DEFAULT_CUTS_PER_BETA};
use crate::rng::Rng64;
use crate::synth::{gen_synth, SynthConfig};
use crate::taxonomy::TaxonomyTree;
use crate::trainer::{train, TrainConfig};
use crate::treecut::{build_matrices, sample_distinct};

#[derive(Debug, Parser)]
#[command(
    name = "hiertune",
    version,
    about = "Hierarchically consistent prompt-surrogate tuning"
)]
pub struct CommandSpec {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Check a tree document and print its node counts.
    Validate {
        #[arg(long)]
        tree: PathBuf,
    },
    /// Print distinct treecuts drawn at one dropout rate.
    SampleCuts {
        #[arg(long)]
        tree: PathBuf,
        #[arg(long, default_value_t = 0.1)]
        beta: f64,
        #[arg(long, default_value_t = 1)]
        count: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Write the listing here instead of stdout.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Fit the prompt surrogate and write a params file plus a TSV log.
    Train(TrainArgs),
    /// Compute leaf accuracy, HCA and MTA.
    Eval(EvalArgs),
    /// Write a seeded synthetic fixture (tree, embeddings, train and test samples).
    GenSynth(SynthArgs),
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    #[arg(long)]
    pub tree: PathBuf,
    #[arg(long)]
    pub emb: PathBuf,
    #[arg(long)]
    pub samples: PathBuf,
    /// Params output path; the log goes to `<out>.log.tsv`.
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value_t = 0.5)]
    pub lambda: f64,
    #[arg(long, default_value_t = 0.1)]
    pub beta: f64,
    #[arg(long, default_value_t = 200)]
    pub epochs: usize,
    #[arg(long = "batch-size", default_value_t = 32)]
    pub batch_size: usize,
    #[arg(long, default_value_t = 0.02)]
    pub lr: f64,
    #[arg(long, default_value_t = DEFAULT_TAU)]
    pub tau: f64,
    #[arg(long)]
    pub shots: Option<usize>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    #[arg(long)]
    pub tree: PathBuf,
    #[arg(long)]
    pub emb: PathBuf,
    #[arg(long)]
    pub samples: PathBuf,
    /// Trained params; identity (zero-shot) params when omitted.
    #[arg(long)]
    pub params: Option<PathBuf>,
    /// Report path; per-cut detail goes to `<out>.cuts.tsv`.
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, value_delimiter = ',', default_value = "0.1,0.3,0.5,0.7,0.9")]
    pub betas: Vec<f64>,
    #[arg(long = "T", default_value_t = DEFAULT_CUTS_PER_BETA)]
    pub t: usize,
    /// Temperature for identity params (ignored with --params).
    #[arg(long, default_value_t = DEFAULT_TAU)]
    pub tau: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    /// Output directory for tree.tsv, emb.tsv, train.tsv and test.tsv.
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value_t = 27)]
    pub leaves: usize,
    #[arg(long, default_value_t = 3)]
    pub depth: usize,
    #[arg(long, default_value_t = 64)]
    pub dim: usize,
    #[arg(long = "per-leaf", default_value_t = 30)]
    pub per_leaf: usize,
    /// Test samples per leaf (defaults to --per-leaf).
    #[arg(long = "test-per-leaf")]
    pub test_per_leaf: Option<usize>,
    #[arg(long, default_value_t = 0.6)]
    pub noise: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

fn load_tree(path: &Path) -> Result<TaxonomyTree> {
    TaxonomyTree::from_document(&io::read_text(path)?)
}

fn load_inputs(
    tree: &Path,
    emb: &Path,
    samples: &Path,
) -> Result<(TaxonomyTree, EmbeddingTable, SampleSet)> {
    let tree = load_tree(tree)?;
    let emb = io::parse_embeddings(&tree, &io::read_text(emb)?)?;
    let samples = io::parse_samples(&tree, &io::read_text(samples)?)?;
    if samples.dim() != emb.dim() {
        return Err(Error::DimensionMismatch {
            expected: emb.dim(),
            got: samples.dim(),
        });
    }
    Ok((tree, emb, samples))
}

/// Appends `suffix` to the full file name of `path`.
pub fn sibling(path: &Path, suffix: &str) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(suffix);
    PathBuf::from(s)
}

pub fn run(spec: &CommandSpec) -> Result<String> {
    match &spec.command {
        Command::Validate { tree } => {
            let tree = load_tree(tree)?;
            Ok(format!(
                "{} nodes, {} leaves, {} internal, depth {}\n",
                tree.len(),
                tree.leaves().len(),
                tree.internal_nodes().len(),
                tree.max_depth()
            ))
        }
        Command::SampleCuts {
            tree,
            beta,
            count,
            seed,
            out,
        } => {
            let tree = load_tree(tree)?;
            let bundle = build_matrices(&tree)?;
            let drawn = sample_distinct(&tree, &bundle, *beta, *count, &mut Rng64::new(*seed))?;
            let text = io::format_cuts(&tree, &drawn.cuts, *beta, *seed);
            match out {
                Some(path) => {
                    io::write_text(path, &text)?;
                    Ok(String::new())
                }
                None => Ok(text),
            }
        }
        Command::Train(args) => {
            let (tree, emb, samples) = load_inputs(&args.tree, &args.emb, &args.samples)?;
            let config = TrainConfig {
                epochs: args.epochs,
                batch_size: args.batch_size,
                base_lr: args.lr,
                lambda: args.lambda,
                beta: args.beta,
                seed: args.seed,
                tau: args.tau,
                shots: args.shots,
            };
            let (params, log) = train(&config, &tree, &emb, &samples)?;
            let header = format!(
                "train seed={} lambda={} beta={} epochs={} batch_size={} lr={} tau={} shots={}",
                config.seed,
                config.lambda,
                config.beta,
                config.epochs,
                config.batch_size,
                config.base_lr,
                config.tau,
                config.shots.map_or("all".to_string(), |k| k.to_string())
            );
            io::write_text(&args.out, &io::format_params(&params, Some(&header)))?;
            let log_path = sibling(&args.out, ".log.tsv");
            io::write_text(&log_path, &io::format_train_log(&log, Some(&header)))?;
            let last = log.records.last().expect("at least one iteration");
            Ok(format!(
                "iterations\t{}\nfinal_total\t{}\nparams\t{}\nlog\t{}\nparams_sha256\t{}\n",
                log.records.len(),
                last.total,
                args.out.display(),
                log_path.display(),
                log.params_digest
            ))
        }
        Command::Eval(args) => {
            let (tree, emb, samples) = load_inputs(&args.tree, &args.emb, &args.samples)?;
            let params = match &args.params {
                Some(p) => io::parse_params(&io::read_text(p)?)?,
                None => PromptParams::identity(emb.dim(), args.tau)?,
            };
            let report = metrics::evaluate(
                &tree,
                &params,
                &emb,
                &samples,
                &args.betas,
                args.t,
                args.seed,
            )?;
            let text = io::format_report(&report);
            io::write_text(&args.out, &text)?;
            io::write_text(
                &sibling(&args.out, ".cuts.tsv"),
                &io::format_cut_detail(&report),
            )?;
            Ok(text)
        }
        Command::GenSynth(args) => {
            let config = SynthConfig {
                leaves: args.leaves,
                depth: args.depth,
                dim: args.dim,
                per_leaf_train: args.per_leaf,
                per_leaf_test: args.test_per_leaf.unwrap_or(args.per_leaf),
                noise: args.noise,
                seed: args.seed,
            };
            let fixture = gen_synth(&config)?;
            let header = config.header();
            let tree_doc = format!("# {header}\n{}", fixture.tree.to_document());
            io::write_text(&args.out.join("tree.tsv"), &tree_doc)?;
            io::write_text(
                &args.out.join("emb.tsv"),
                &io::format_embeddings(&fixture.tree, &fixture.emb, Some(&header)),
            )?;
            io::write_text(
                &args.out.join("train.tsv"),
                &io::format_samples(&fixture.tree, &fixture.train, Some(&header)),
            )?;
            io::write_text(
                &args.out.join("test.tsv"),
                &io::format_samples(&fixture.tree, &fixture.test, Some(&header)),
            )?;
            Ok(format!(
                "{} nodes, {} leaves, {} train, {} test, seed {}\n",
                fixture.tree.len(),
                fixture.tree.leaves().len(),
                fixture.train.len(),
                fixture.test.len(),
                config.seed
            ))
        }
    }
}

/// The single-line error form printed by the binary.
pub fn error_line(err: &Error) -> String {
    let detail = err.to_string().replace('\n', " ");
    format!("E:{}:{}", err.code(), detail)
}
