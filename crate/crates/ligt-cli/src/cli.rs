//! Command-line interface definition.

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use ligt_core::synth::TaskKind;

/// Batch tooling for layout-hashed document QA: hash boxes into quadrant
/// letters, annotate and align datasets, synthesize receipts, train and
/// evaluate the toy layout-aware model. Set RUST_LOG to control verbosity.
#[derive(Debug, Parser)]
#[command(name = "ligt", version, about)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Hash every document's boxes into per-token letter codes.
    Hash {
        #[arg(long)]
        documents: PathBuf,
        /// Output file of {id, codes} records.
        #[arg(long)]
        output: PathBuf,
        /// Hashing levels (1..=6).
        #[arg(long, default_value_t = 4)]
        levels: usize,
        /// Re-serialize tokens into reading order first.
        #[arg(long)]
        reading_order: bool,
    },
    /// Fill in question_type and answer_type for every sample.
    Classify {
        #[arg(long)]
        samples: PathBuf,
        #[arg(long)]
        output: PathBuf,
    },
    /// Locate every answer in its document and add the span field.
    Align {
        #[arg(long)]
        documents: PathBuf,
        #[arg(long)]
        samples: PathBuf,
        #[arg(long)]
        output: PathBuf,
        /// Re-serialize tokens into reading order first.
        #[arg(long)]
        reading_order: bool,
    },
    /// Score predictions against gold answers (ANLS / F1 / Accuracy).
    Eval {
        /// Line-delimited {prediction} records, aligned with the gold file.
        #[arg(long)]
        predictions: PathBuf,
        #[arg(long)]
        gold: PathBuf,
        /// ANLS threshold.
        #[arg(long, default_value_t = 0.5)]
        tau: f64,
        /// Score raw strings without lowercasing/whitespace collapsing.
        #[arg(long)]
        no_normalize: bool,
    },
    /// Generate synthetic receipt documents and QA samples.
    Synth {
        #[arg(long)]
        out_documents: PathBuf,
        #[arg(long)]
        out_samples: PathBuf,
        /// Number of documents.
        #[arg(long, default_value_t = 100)]
        docs: usize,
        #[arg(long, default_value = "right-neighbor")]
        task: TaskKind,
        #[arg(long, default_value_t = 4)]
        rows: usize,
        #[arg(long, default_value_t = 4)]
        cols: usize,
        #[arg(long, default_value_t = 40)]
        vocab_size: usize,
        #[arg(long, default_value_t = 0.0)]
        duplicate_fraction: f64,
        /// Store tokens in a random order instead of reading order.
        #[arg(long)]
        shuffle: bool,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// First document index (documents are deterministic per index).
        #[arg(long, default_value_t = 0)]
        start_index: u64,
    },
    /// Train the toy model and write a checkpoint.
    Train(TrainArgs),
    /// Generate answers for samples with a trained checkpoint.
    Infer {
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long)]
        documents: PathBuf,
        #[arg(long)]
        samples: PathBuf,
        /// Output file of {document_id, question, prediction} records.
        #[arg(long)]
        output: PathBuf,
        #[arg(long, default_value_t = 16)]
        max_answer_len: usize,
        /// Re-serialize tokens into reading order first.
        #[arg(long)]
        reading_order: bool,
    },
    /// Verify analytic gradients against central finite differences.
    Gradcheck {
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Finite-difference step.
        #[arg(long, default_value_t = 1e-5)]
        h: f64,
        /// Maximum tolerated relative error.
        #[arg(long, default_value_t = 1e-4)]
        threshold: f64,
        #[arg(long, default_value_t = 8)]
        d_model: usize,
        #[arg(long, default_value_t = 4)]
        levels: usize,
    },
    /// Train and evaluate across hashing levels, with and without the
    /// learnable ratio; prints one row per cell.
    Ablate(AblateArgs),
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    #[arg(long)]
    pub documents: PathBuf,
    #[arg(long)]
    pub samples: PathBuf,
    /// Where to write the checkpoint.
    #[arg(long)]
    pub checkpoint: PathBuf,
    #[arg(long, default_value_t = 4)]
    pub levels: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 2000)]
    pub steps: usize,
    #[arg(long, default_value_t = 32)]
    pub batch_size: usize,
    #[arg(long, default_value_t = 1e-3)]
    pub lr: f64,
    #[arg(long, default_value_t = 100)]
    pub warmup: usize,
    #[arg(long, default_value_t = 32)]
    pub d_model: usize,
    #[arg(long, default_value_t = 2)]
    pub heads: usize,
    #[arg(long, default_value_t = 64)]
    pub ff_dim: usize,
    #[arg(long, default_value_t = 2)]
    pub enc_layers: usize,
    #[arg(long, default_value_t = 2)]
    pub dec_layers: usize,
    #[arg(long, default_value_t = 180)]
    pub max_input_len: usize,
    #[arg(long, default_value_t = 24)]
    pub max_target_len: usize,
    #[arg(long, default_value_t = 0.5)]
    pub rho_init: f64,
    /// Sever the layout channel entirely.
    #[arg(long, conflicts_with = "no_ratio")]
    pub text_only: bool,
    /// Keep the layout channel but drop the learnable ratio (ω ≡ 1).
    #[arg(long)]
    pub no_ratio: bool,
    /// Experimental per-dimension ratio vector.
    #[arg(long)]
    pub per_dim_ratio: bool,
    /// Re-serialize tokens into reading order first.
    #[arg(long)]
    pub reading_order: bool,
}

#[derive(Debug, Args)]
pub struct AblateArgs {
    #[arg(long)]
    pub train_documents: PathBuf,
    #[arg(long)]
    pub train_samples: PathBuf,
    #[arg(long)]
    pub test_documents: PathBuf,
    #[arg(long)]
    pub test_samples: PathBuf,
    /// Comma-separated hashing levels to sweep.
    #[arg(long, value_delimiter = ',', default_value = "2,3,4,5")]
    pub levels: Vec<usize>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 600)]
    pub steps: usize,
    #[arg(long, default_value_t = 32)]
    pub batch_size: usize,
    #[arg(long, default_value_t = 1e-3)]
    pub lr: f64,
    #[arg(long, default_value_t = 100)]
    pub warmup: usize,
    #[arg(long, default_value_t = 32)]
    pub d_model: usize,
    #[arg(long, default_value_t = 2)]
    pub heads: usize,
    #[arg(long, default_value_t = 64)]
    pub ff_dim: usize,
    #[arg(long, default_value_t = 2)]
    pub enc_layers: usize,
    #[arg(long, default_value_t = 2)]
    pub dec_layers: usize,
    #[arg(long, default_value_t = 180)]
    pub max_input_len: usize,
    #[arg(long, default_value_t = 24)]
    pub max_target_len: usize,
    #[arg(long, default_value_t = 0.5)]
    pub rho_init: f64,
    #[arg(long, default_value_t = 0.5)]
    pub tau: f64,
    #[arg(long, default_value_t = 16)]
    pub max_answer_len: usize,
    /// Where to write the report records (one JSON row per cell).
    #[arg(long)]
    pub output: Option<PathBuf>,
}
