//! `ablate` command: the level × ratio experiment grid.

use ligt_core::metrics::{evaluate, AnswerPair, EvalConfig};
use ligt_core::model::{LayoutMode, ModelConfig, TrainConfig};
use ligt_core::{load_dataset, Dataset};
use serde::Serialize;

use super::modeling::{fit, predict_dataset};
use super::pct;
use crate::cli::AblateArgs;
use crate::error::CliError;

/// One cell of the sweep: a hashing depth trained with or without the
/// learnable ratio, scored on the held-out split.
#[derive(Debug, Clone, Serialize)]
pub struct SweepRow {
    pub levels: usize,
    pub ratio: bool,
    pub anls: f64,
    pub f1: f64,
    pub accuracy: f64,
    /// Trained gate value σ(ρ); exactly 1 for the no-ratio variant.
    pub omega: f64,
}

pub struct SweepConfig {
    pub levels: Vec<usize>,
    pub base_model: ModelConfig,
    pub train: TrainConfig,
    pub eval: EvalConfig,
    pub max_answer_len: usize,
}

/// Train one model per (level, ratio-mode) cell and evaluate it.
pub fn run_level_sweep(
    train_data: &Dataset,
    test_data: &Dataset,
    sweep: &SweepConfig,
) -> Result<Vec<SweepRow>, CliError> {
    let mut rows = Vec::with_capacity(sweep.levels.len() * 2);
    for &levels in &sweep.levels {
        for mode in [LayoutMode::Ratio, LayoutMode::NoRatio] {
            let model_config = ModelConfig {
                levels,
                layout_mode: mode,
                ..sweep.base_model.clone()
            };
            let (vocab, params, (_, _, omega)) = fit(train_data, &model_config, &sweep.train)?;
            let predictions = predict_dataset(&params, &vocab, test_data, sweep.max_answer_len)?;
            let pairs: Vec<AnswerPair> = predictions
                .into_iter()
                .zip(&test_data.samples)
                .map(|(p, s)| AnswerPair::new(p, s.qa.answer.clone()))
                .collect();
            let report = evaluate(&pairs, &sweep.eval);
            rows.push(SweepRow {
                levels,
                ratio: mode == LayoutMode::Ratio,
                anls: pct(report.anls),
                f1: pct(report.f1),
                accuracy: pct(report.accuracy),
                omega,
            });
            log::info!(
                "level {levels} ratio={} done: accuracy {:.2}",
                mode == LayoutMode::Ratio,
                pct(report.accuracy)
            );
        }
    }
    Ok(rows)
}

pub fn print_sweep_table(rows: &[SweepRow]) {
    println!("levels  ratio     anls      f1  accuracy   omega");
    for row in rows {
        println!(
            "{:>6}  {:>5}  {:>7.2} {:>7.2}  {:>8.2}  {:>6.4}",
            row.levels,
            if row.ratio { "yes" } else { "no" },
            row.anls,
            row.f1,
            row.accuracy,
            row.omega
        );
    }
}

pub fn run_ablate(args: &AblateArgs) -> Result<(), CliError> {
    let train_data = load_dataset(&args.train_documents, &args.train_samples)?;
    let test_data = load_dataset(&args.test_documents, &args.test_samples)?;
    let sweep = SweepConfig {
        levels: args.levels.clone(),
        base_model: ModelConfig {
            d_model: args.d_model,
            n_heads: args.heads,
            ff_dim: args.ff_dim,
            n_enc_layers: args.enc_layers,
            n_dec_layers: args.dec_layers,
            levels: 4,
            max_input_len: args.max_input_len,
            max_target_len: args.max_target_len,
            layout_mode: LayoutMode::Ratio,
            per_dim_ratio: false,
            rho_init: args.rho_init,
        },
        train: TrainConfig {
            steps: args.steps,
            batch_size: args.batch_size,
            lr: args.lr,
            warmup_steps: args.warmup,
            seed: args.seed,
            log_every: 0,
        },
        eval: EvalConfig {
            tau: args.tau,
            normalize_text: true,
        },
        max_answer_len: args.max_answer_len,
    };
    let rows = run_level_sweep(&train_data, &test_data, &sweep)?;
    for row in &rows {
        println!(
            "{}",
            serde_json::to_string(row).map_err(|e| CliError::Invalid(e.to_string()))?
        );
    }
    print_sweep_table(&rows);
    if let Some(path) = &args.output {
        super::write_records(path, &rows)?;
    }
    Ok(())
}
