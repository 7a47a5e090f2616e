//! Library side of the `ligt` binary: clap definitions, command
//! implementations, and the error-to-exit-code mapping. Tests and the
//! acceptance suite drive commands through this crate directly.

pub mod cli;
pub mod commands;
pub mod error;

pub use cli::{Cli, Command};
pub use error::CliError;

use ligt_core::synth::SynthConfig;

/// Execute a parsed command.
pub fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Hash {
            documents,
            output,
            levels,
            reading_order,
        } => commands::annotate::run_hash(&documents, &output, levels, reading_order),
        Command::Classify { samples, output } => {
            commands::annotate::run_classify(&samples, &output)
        }
        Command::Align {
            documents,
            samples,
            output,
            reading_order,
        } => commands::annotate::run_align(&documents, &samples, &output, reading_order),
        Command::Eval {
            predictions,
            gold,
            tau,
            no_normalize,
        } => commands::eval::run_eval(&predictions, &gold, tau, no_normalize),
        Command::Synth {
            out_documents,
            out_samples,
            docs,
            task,
            rows,
            cols,
            vocab_size,
            duplicate_fraction,
            shuffle,
            seed,
            start_index,
        } => commands::synth::run_synth(
            &out_documents,
            &out_samples,
            docs,
            SynthConfig {
                seed,
                rows,
                cols,
                vocab_size,
                duplicate_fraction,
                task,
                shuffle,
            },
            start_index,
        ),
        Command::Train(args) => commands::modeling::run_train(&args),
        Command::Infer {
            checkpoint,
            documents,
            samples,
            output,
            max_answer_len,
            reading_order,
        } => commands::modeling::run_infer(
            &checkpoint,
            &documents,
            &samples,
            &output,
            max_answer_len,
            reading_order,
        ),
        Command::Gradcheck {
            seed,
            h,
            threshold,
            d_model,
            levels,
        } => commands::modeling::run_gradcheck(seed, h, threshold, d_model, levels),
        Command::Ablate(args) => commands::ablate::run_ablate(&args),
    }
}
