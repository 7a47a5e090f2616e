//! `synth` command: write generated documents and samples.

use std::path::Path;

use ligt_core::synth::{gen_dataset, SynthConfig};
use ligt_core::save_dataset;

use crate::error::CliError;

#[allow(clippy::too_many_arguments)]
pub fn run_synth(
    out_documents: &Path,
    out_samples: &Path,
    docs: usize,
    config: SynthConfig,
    start_index: u64,
) -> Result<(), CliError> {
    config.validate().map_err(CliError::Invalid)?;
    let dataset = gen_dataset(&config, start_index, docs);
    save_dataset(out_documents, out_samples, &dataset)?;
    log::info!(
        "wrote {} documents and {} samples",
        dataset.documents.len(),
        dataset.samples.len()
    );
    println!(
        "{}",
        serde_json::json!({
            "documents": dataset.documents.len(),
            "samples": dataset.samples.len(),
        })
    );
    Ok(())
}
