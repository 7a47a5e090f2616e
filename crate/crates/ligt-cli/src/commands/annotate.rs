//! `hash`, `classify`, and `align` commands.

use std::path::Path;

use ligt_core::annotate::{align_answer, classify_answer_type, classify_question, coverage_stats, SerializedContext};
use ligt_core::{layout_hash, load_dataset, load_documents, load_samples, save_samples};
use serde::Serialize;

use super::{apply_reading_order, write_records};
use crate::error::CliError;

#[derive(Serialize)]
struct HashRecord {
    id: String,
    /// One letter string per token, level 1 first (e.g. "AEIM").
    codes: Vec<String>,
}

pub fn run_hash(
    documents: &Path,
    output: &Path,
    levels: usize,
    reading_order: bool,
) -> Result<(), CliError> {
    let mut docs = load_documents(documents)?;
    if reading_order {
        for doc in &mut docs {
            doc.tokens = ligt_core::serialize_reading_order(&doc.tokens);
        }
    }
    let mut records = Vec::with_capacity(docs.len());
    for doc in &docs {
        let codes = if doc.tokens.is_empty() {
            Vec::new()
        } else {
            let boxes: Vec<_> = doc.tokens.iter().map(|t| t.bbox).collect();
            let grid = layout_hash(&boxes, levels)?;
            grid.codes
                .iter()
                .map(|c| c.letters().map_err(CliError::from))
                .collect::<Result<_, _>>()?
        };
        records.push(HashRecord {
            id: doc.id.clone(),
            codes,
        });
    }
    write_records(output, &records)?;
    log::info!("hashed {} documents at {} levels", records.len(), levels);
    Ok(())
}

pub fn run_classify(samples: &Path, output: &Path) -> Result<(), CliError> {
    let mut samples = load_samples(samples)?;
    for sample in &mut samples {
        sample.qa.question_type = Some(classify_question(&sample.qa.question));
        sample.qa.answer_type = Some(classify_answer_type(&sample.qa.answer));
    }
    save_samples(output, &samples)?;
    log::info!("classified {} samples", samples.len());
    Ok(())
}

pub fn run_align(
    documents: &Path,
    samples: &Path,
    output: &Path,
    reading_order: bool,
) -> Result<(), CliError> {
    let mut dataset = load_dataset(documents, samples)?;
    if reading_order {
        apply_reading_order(&mut dataset);
    }
    let index = dataset.document_index();
    let mut contexts = std::collections::HashMap::new();
    let mut annotated = dataset.samples.clone();
    for sample in &mut annotated {
        let doc = index
            .get(sample.document_id.as_str())
            .expect("load_dataset verifies ids");
        let ctx = contexts
            .entry(sample.document_id.clone())
            .or_insert_with(|| SerializedContext::from_tokens(&doc.tokens));
        sample.qa.span = Some(align_answer(&sample.qa.answer, ctx));
    }
    save_samples(output, &annotated)?;
    let stats = coverage_stats(&dataset);
    println!(
        "{}",
        serde_json::json!({
            "fully_matched": super::pct(stats.fully_matched),
            "with_deletion": super::pct(stats.with_deletion),
            "n": stats.n,
        })
    );
    Ok(())
}
