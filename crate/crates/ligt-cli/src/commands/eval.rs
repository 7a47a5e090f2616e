//! `eval` command: score a predictions file against gold samples.

use std::fs::File;
use std::io::{BufRead, BufReader};
use std::path::Path;

use ligt_core::metrics::{evaluate, AnswerPair, EvalConfig};
use ligt_core::load_samples;
use serde::Deserialize;

use super::pct;
use crate::error::CliError;

#[derive(Deserialize)]
struct PredictionRecord {
    prediction: String,
}

pub fn load_predictions(path: &Path) -> Result<Vec<String>, CliError> {
    let file = File::open(path).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
    let mut out = Vec::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let record: PredictionRecord = serde_json::from_str(&line)
            .map_err(|e| CliError::Schema(format!("{}:{}: {e}", path.display(), i + 1)))?;
        out.push(record.prediction);
    }
    Ok(out)
}

pub fn run_eval(
    predictions: &Path,
    gold: &Path,
    tau: f64,
    no_normalize: bool,
) -> Result<(), CliError> {
    if !(0.0..=1.0).contains(&tau) {
        return Err(CliError::Invalid(format!("tau {tau} outside [0, 1]")));
    }
    let predictions = load_predictions(predictions)?;
    let gold = load_samples(gold)?;
    if predictions.len() != gold.len() {
        return Err(CliError::Schema(format!(
            "{} predictions for {} gold samples",
            predictions.len(),
            gold.len()
        )));
    }
    let pairs: Vec<AnswerPair> = predictions
        .into_iter()
        .zip(&gold)
        .map(|(p, g)| AnswerPair::new(p, g.qa.answer.clone()))
        .collect();
    let config = EvalConfig {
        tau,
        normalize_text: !no_normalize,
    };
    let report = evaluate(&pairs, &config);
    println!(
        "{}",
        serde_json::json!({
            "anls": pct(report.anls),
            "f1": pct(report.f1),
            "accuracy": pct(report.accuracy),
            "n": report.n,
        })
    );
    println!("metric     score");
    println!("anls      {:>6.2}", pct(report.anls));
    println!("f1        {:>6.2}", pct(report.f1));
    println!("accuracy  {:>6.2}", pct(report.accuracy));
    println!("n         {:>6}", report.n);
    Ok(())
}
