//! `train`, `infer`, and `gradcheck` commands.

use std::path::Path;

use ligt_core::model::{
    generate, grad_check, tokenize, train, Checkpoint, LayoutMode, ModelConfig, ModelParams,
    TrainConfig,
};
use ligt_core::synth::{gen_dataset, SynthConfig, TaskKind};
use ligt_core::{load_dataset, Dataset, Sample, Vocabulary};
use serde::Serialize;

use super::{apply_reading_order, build_vocab, prepare_examples, write_records};
use crate::cli::TrainArgs;
use crate::error::CliError;

pub fn layout_mode(text_only: bool, no_ratio: bool) -> LayoutMode {
    match (text_only, no_ratio) {
        (true, _) => LayoutMode::TextOnly,
        (false, true) => LayoutMode::NoRatio,
        (false, false) => LayoutMode::Ratio,
    }
}

pub fn run_train(args: &TrainArgs) -> Result<(), CliError> {
    let mut dataset = load_dataset(&args.documents, &args.samples)?;
    if args.reading_order {
        apply_reading_order(&mut dataset);
    }
    let model_config = ModelConfig {
        d_model: args.d_model,
        n_heads: args.heads,
        ff_dim: args.ff_dim,
        n_enc_layers: args.enc_layers,
        n_dec_layers: args.dec_layers,
        levels: args.levels,
        max_input_len: args.max_input_len,
        max_target_len: args.max_target_len,
        layout_mode: layout_mode(args.text_only, args.no_ratio),
        per_dim_ratio: args.per_dim_ratio,
        rho_init: args.rho_init,
    };
    let train_config = TrainConfig {
        steps: args.steps,
        batch_size: args.batch_size,
        lr: args.lr,
        warmup_steps: args.warmup,
        seed: args.seed,
        log_every: 100,
    };
    let (vocab, params, report) = fit(&dataset, &model_config, &train_config)?;
    Checkpoint::new(vocab, params).save(&args.checkpoint)?;
    println!(
        "{}",
        serde_json::json!({
            "final_loss": report.0,
            "steps": report.1,
            "omega": report.2,
            "checkpoint": args.checkpoint.display().to_string(),
        })
    );
    Ok(())
}

/// Build a vocabulary, tokenize, and train; shared with the ablation sweep.
pub fn fit(
    dataset: &Dataset,
    model_config: &ModelConfig,
    train_config: &TrainConfig,
) -> Result<(Vocabulary, ModelParams, (f64, usize, f64)), CliError> {
    let vocab = build_vocab(dataset);
    let examples = prepare_examples(
        dataset,
        &vocab,
        model_config.levels,
        model_config.max_input_len,
        model_config.max_target_len,
    )?;
    let mut params = ModelParams::init(model_config, vocab.len(), train_config.seed)?;
    let report = train(&mut params, &vocab, &examples, train_config)?;
    let omega = params.omega();
    Ok((vocab, params, (report.final_loss, report.steps, omega)))
}

#[derive(Serialize)]
struct Prediction {
    document_id: String,
    question: String,
    prediction: String,
}

/// Greedy predictions for every sample, in file order.
pub fn predict_dataset(
    params: &ModelParams,
    vocab: &Vocabulary,
    dataset: &Dataset,
    max_answer_len: usize,
) -> Result<Vec<String>, CliError> {
    let index = dataset.document_index();
    let mut out = Vec::with_capacity(dataset.samples.len());
    for Sample { document_id, qa } in &dataset.samples {
        let doc = index
            .get(document_id.as_str())
            .expect("load_dataset verifies ids");
        let input = tokenize(
            &qa.question,
            doc,
            vocab,
            params.config.levels,
            params.config.max_input_len,
        )?;
        out.push(generate(params, vocab, &input, max_answer_len)?);
    }
    Ok(out)
}

#[allow(clippy::too_many_arguments)]
pub fn run_infer(
    checkpoint: &Path,
    documents: &Path,
    samples: &Path,
    output: &Path,
    max_answer_len: usize,
    reading_order: bool,
) -> Result<(), CliError> {
    let ckpt = Checkpoint::load(checkpoint)?;
    let mut dataset = load_dataset(documents, samples)?;
    if reading_order {
        apply_reading_order(&mut dataset);
    }
    let predictions = predict_dataset(&ckpt.params, &ckpt.vocab, &dataset, max_answer_len)?;
    let records: Vec<Prediction> = dataset
        .samples
        .iter()
        .zip(predictions)
        .map(|(s, prediction)| Prediction {
            document_id: s.document_id.clone(),
            question: s.qa.question.clone(),
            prediction,
        })
        .collect();
    write_records(output, &records)?;
    log::info!("wrote {} predictions", records.len());
    Ok(())
}

pub fn run_gradcheck(
    seed: u64,
    h: f64,
    threshold: f64,
    d_model: usize,
    levels: usize,
) -> Result<(), CliError> {
    let synth_config = SynthConfig {
        seed,
        rows: 2,
        cols: 2,
        vocab_size: 8,
        duplicate_fraction: 0.0,
        task: TaskKind::RightNeighbor,
        shuffle: true,
    };
    let dataset = gen_dataset(&synth_config, 0, 3);
    let vocab = build_vocab(&dataset);
    let model_config = ModelConfig {
        d_model,
        n_heads: 2,
        ff_dim: 2 * d_model,
        n_enc_layers: 1,
        n_dec_layers: 1,
        levels,
        max_input_len: 16,
        max_target_len: 6,
        layout_mode: LayoutMode::Ratio,
        per_dim_ratio: false,
        rho_init: 0.5,
    };
    let examples = prepare_examples(
        &dataset,
        &vocab,
        model_config.levels,
        model_config.max_input_len,
        model_config.max_target_len,
    )?;
    let params = ModelParams::init(&model_config, vocab.len(), seed)?;
    let report = grad_check(&params, &vocab, &examples, h)?;
    for (name, err) in &report.per_tensor {
        println!("{name:<22} {err:.3e}");
    }
    let verdict = if report.max_rel_err < threshold {
        "PASS"
    } else {
        "FAIL"
    };
    println!(
        "max relative error {:.3e} in {} ({} parameters): {verdict}",
        report.max_rel_err,
        report.worst_tensor,
        params.num_params()
    );
    if verdict == "FAIL" {
        return Err(CliError::Invalid(format!(
            "gradient check failed: {:.3e} >= {threshold:.1e}",
            report.max_rel_err
        )));
    }
    Ok(())
}
