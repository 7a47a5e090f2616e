//! Command implementations, shared by the binary and the test suites.

pub mod ablate;
pub mod annotate;
pub mod eval;
pub mod modeling;
pub mod synth;

use std::collections::BTreeSet;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use ligt_core::model::{tokenize, tokenize_answer, Example, ModelError};
use ligt_core::{serialize_reading_order, Dataset, Vocabulary};
use serde::Serialize;

use crate::error::CliError;

/// Write one JSON record per line.
pub fn write_records<T: Serialize>(path: &Path, records: &[T]) -> Result<(), CliError> {
    let mut w = BufWriter::new(File::create(path)?);
    for record in records {
        serde_json::to_writer(&mut w, record)
            .map_err(|e| CliError::Invalid(format!("serialize record: {e}")))?;
        w.write_all(b"\n")?;
    }
    w.flush()?;
    Ok(())
}

/// Word-level vocabulary over OCR texts, questions, and answers.
pub fn build_vocab(dataset: &Dataset) -> Vocabulary {
    let mut words: BTreeSet<String> = BTreeSet::new();
    for doc in &dataset.documents {
        for token in &doc.tokens {
            words.insert(token.text.clone());
        }
    }
    for sample in &dataset.samples {
        words.extend(sample.qa.question.split_whitespace().map(str::to_string));
        words.extend(sample.qa.answer.split_whitespace().map(str::to_string));
    }
    Vocabulary::build(words)
}

/// Reorder every document's tokens into reading order.
pub fn apply_reading_order(dataset: &mut Dataset) {
    for doc in &mut dataset.documents {
        doc.tokens = serialize_reading_order(&doc.tokens);
    }
}

/// Tokenized training examples for every sample in the dataset.
pub fn prepare_examples(
    dataset: &Dataset,
    vocab: &Vocabulary,
    levels: usize,
    max_input_len: usize,
    max_target_len: usize,
) -> Result<Vec<Example>, ModelError> {
    let index = dataset.document_index();
    let mut examples = Vec::with_capacity(dataset.samples.len());
    for sample in &dataset.samples {
        let doc = index
            .get(sample.document_id.as_str())
            .expect("dataset loaders verify document ids");
        let input = tokenize(&sample.qa.question, doc, vocab, levels, max_input_len)?;
        let mut target = tokenize_answer(&sample.qa.answer, vocab);
        target.truncate(max_target_len.saturating_sub(1));
        target.push(vocab.eos_id());
        examples.push(Example { input, target });
    }
    Ok(examples)
}

/// Percentage with two decimals, the convention of every report.
pub fn pct(x: f64) -> f64 {
    (x * 10_000.0).round() / 100.0
}
