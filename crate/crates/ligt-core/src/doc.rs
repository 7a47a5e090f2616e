//! Documents, OCR tokens, QA samples, and their line-delimited JSON files.
//!
//! Two file kinds make up a dataset:
//!
//! * documents: one `{"id", "tokens": [{"text", "box": [x0,y0,x1,y1]}]}`
//!   record per line,
//! * samples: one `{"document_id", "question", "answer", ...}` record per
//!   line, with optional `question_type`, `answer_type` and `span` fields
//!   filled in by the annotation commands.
//!
//! All text is UTF-8 and normalized to NFC on load. List answers separate
//! items with the literal token `<sep>`.

use std::collections::{HashMap, HashSet};
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;
use unicode_normalization::UnicodeNormalization;

use crate::annotate::{AnswerType, QuestionType, SpanAlignment};
use crate::layout_hash::BoundingBox;

/// Literal separator between items of a list answer.
pub const SEP_TOKEN: &str = "<sep>";

#[derive(Debug, Error)]
pub enum DatasetError {
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
    #[error("{path}:{line}: {msg}")]
    Malformed {
        path: String,
        line: usize,
        msg: String,
    },
}

impl DatasetError {
    fn malformed(path: &Path, line: usize, msg: impl Into<String>) -> Self {
        DatasetError::Malformed {
            path: path.display().to_string(),
            line,
            msg: msg.into(),
        }
    }
}

/// One recognized word with its box.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OcrToken {
    pub text: String,
    #[serde(rename = "box")]
    pub bbox: BoundingBox,
}

impl OcrToken {
    pub fn new(text: impl Into<String>, bbox: BoundingBox) -> Self {
        OcrToken {
            text: text.into(),
            bbox,
        }
    }

    fn validate(&self) -> Result<(), String> {
        if self.text.is_empty() {
            return Err("token field \"text\" is empty".into());
        }
        if self.text.contains('\n') || self.text.contains('\r') {
            return Err("token field \"text\" contains a line break".into());
        }
        Ok(())
    }
}

/// One page worth of OCR tokens. The stored token order is the order fed to
/// downstream consumers; [`serialize_reading_order`] produces it for raw OCR.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Document {
    pub id: String,
    pub tokens: Vec<OcrToken>,
}

/// A question with its verbatim-span answer and optional annotations.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QAPair {
    pub question: String,
    pub answer: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub question_type: Option<QuestionType>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub answer_type: Option<AnswerType>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub span: Option<SpanAlignment>,
}

impl QAPair {
    pub fn new(question: impl Into<String>, answer: impl Into<String>) -> Self {
        QAPair {
            question: question.into(),
            answer: answer.into(),
            question_type: None,
            answer_type: None,
            span: None,
        }
    }
}

/// A QA pair tied to the document it was asked about.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Sample {
    pub document_id: String,
    #[serde(flatten)]
    pub qa: QAPair,
}

/// Documents plus samples, with samples resolvable by document id.
#[derive(Debug, Clone, Default)]
pub struct Dataset {
    pub documents: Vec<Document>,
    pub samples: Vec<Sample>,
}

impl Dataset {
    pub fn document(&self, id: &str) -> Option<&Document> {
        self.documents.iter().find(|d| d.id == id)
    }

    /// Id-to-document map for repeated lookups.
    pub fn document_index(&self) -> HashMap<&str, &Document> {
        self.documents.iter().map(|d| (d.id.as_str(), d)).collect()
    }
}

fn nfc(s: &str) -> String {
    s.nfc().collect()
}

/// Group tokens into lines and order them top-to-bottom, left-to-right.
///
/// Two tokens share a line when their vertical centers differ by at most
/// half the median box height. The sweep walks tokens in ascending center-y
/// order and appends to the current line while that holds against the line's
/// running mean, so the result is idempotent and a pure permutation.
pub fn serialize_reading_order(tokens: &[OcrToken]) -> Vec<OcrToken> {
    reading_order(tokens).into_iter().map(|i| tokens[i].clone()).collect()
}

/// Permutation behind [`serialize_reading_order`].
pub fn reading_order(tokens: &[OcrToken]) -> Vec<usize> {
    if tokens.is_empty() {
        return Vec::new();
    }
    let center_y = |t: &OcrToken| t.bbox.y_min + (t.bbox.y_max - t.bbox.y_min) / 2.0;

    let mut heights: Vec<f64> = tokens.iter().map(|t| t.bbox.y_max - t.bbox.y_min).collect();
    heights.sort_by(f64::total_cmp);
    let median_height = if heights.len() % 2 == 1 {
        heights[heights.len() / 2]
    } else {
        let hi = heights.len() / 2;
        (heights[hi - 1] + heights[hi]) / 2.0
    };
    let threshold = 0.5 * median_height;

    let mut by_y: Vec<usize> = (0..tokens.len()).collect();
    by_y.sort_by(|&a, &b| center_y(&tokens[a]).total_cmp(&center_y(&tokens[b])));

    struct Line {
        members: Vec<usize>,
        sum_y: f64,
    }
    let mut lines: Vec<Line> = Vec::new();
    for i in by_y {
        let y = center_y(&tokens[i]);
        match lines.last_mut() {
            Some(line) if y - line.sum_y / line.members.len() as f64 <= threshold => {
                line.members.push(i);
                line.sum_y += y;
            }
            _ => lines.push(Line {
                members: vec![i],
                sum_y: y,
            }),
        }
    }

    lines.sort_by(|a, b| {
        (a.sum_y / a.members.len() as f64).total_cmp(&(b.sum_y / b.members.len() as f64))
    });
    let mut order = Vec::with_capacity(tokens.len());
    for line in &mut lines {
        line.members
            .sort_by(|&a, &b| tokens[a].bbox.x_min.total_cmp(&tokens[b].bbox.x_min));
        order.extend_from_slice(&line.members);
    }
    order
}

fn read_lines(path: &Path) -> Result<Vec<(usize, String)>, DatasetError> {
    let file = File::open(path)?;
    let mut out = Vec::new();
    for (idx, line) in BufReader::new(file).lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        out.push((idx + 1, line));
    }
    Ok(out)
}

pub fn load_documents(path: impl AsRef<Path>) -> Result<Vec<Document>, DatasetError> {
    let path = path.as_ref();
    let mut docs = Vec::new();
    let mut seen = HashSet::new();
    for (line_no, line) in read_lines(path)? {
        let mut doc: Document = serde_json::from_str(&line)
            .map_err(|e| DatasetError::malformed(path, line_no, e.to_string()))?;
        if !seen.insert(doc.id.clone()) {
            return Err(DatasetError::malformed(
                path,
                line_no,
                format!("duplicate document id \"{}\"", doc.id),
            ));
        }
        for token in &mut doc.tokens {
            token.text = nfc(&token.text);
            token
                .validate()
                .map_err(|msg| DatasetError::malformed(path, line_no, msg))?;
        }
        docs.push(doc);
    }
    Ok(docs)
}

pub fn save_documents(path: impl AsRef<Path>, docs: &[Document]) -> Result<(), DatasetError> {
    let mut w = BufWriter::new(File::create(path.as_ref())?);
    for doc in docs {
        serde_json::to_writer(&mut w, doc).map_err(io_from_serde)?;
        w.write_all(b"\n")?;
    }
    w.flush()?;
    Ok(())
}

pub fn load_samples(path: impl AsRef<Path>) -> Result<Vec<Sample>, DatasetError> {
    let path = path.as_ref();
    let mut samples = Vec::new();
    for (line_no, line) in read_lines(path)? {
        let mut sample: Sample = serde_json::from_str(&line)
            .map_err(|e| DatasetError::malformed(path, line_no, e.to_string()))?;
        sample.qa.question = nfc(&sample.qa.question);
        sample.qa.answer = nfc(&sample.qa.answer);
        if sample.qa.answer.is_empty() {
            return Err(DatasetError::malformed(path, line_no, "field \"answer\" is empty"));
        }
        samples.push(sample);
    }
    Ok(samples)
}

pub fn save_samples(path: impl AsRef<Path>, samples: &[Sample]) -> Result<(), DatasetError> {
    let mut w = BufWriter::new(File::create(path.as_ref())?);
    for sample in samples {
        serde_json::to_writer(&mut w, sample).map_err(io_from_serde)?;
        w.write_all(b"\n")?;
    }
    w.flush()?;
    Ok(())
}

/// Load both files and check that every sample's document id resolves.
pub fn load_dataset(
    documents_path: impl AsRef<Path>,
    samples_path: impl AsRef<Path>,
) -> Result<Dataset, DatasetError> {
    let documents = load_documents(&documents_path)?;
    let samples = load_samples(&samples_path)?;
    let ids: HashSet<&str> = documents.iter().map(|d| d.id.as_str()).collect();
    for (i, sample) in samples.iter().enumerate() {
        if !ids.contains(sample.document_id.as_str()) {
            return Err(DatasetError::malformed(
                samples_path.as_ref(),
                i + 1,
                format!("unknown document_id \"{}\"", sample.document_id),
            ));
        }
    }
    Ok(Dataset { documents, samples })
}

pub fn save_dataset(
    documents_path: impl AsRef<Path>,
    samples_path: impl AsRef<Path>,
    dataset: &Dataset,
) -> Result<(), DatasetError> {
    save_documents(documents_path, &dataset.documents)?;
    save_samples(samples_path, &dataset.samples)
}

fn io_from_serde(e: serde_json::Error) -> DatasetError {
    DatasetError::Io(std::io::Error::new(std::io::ErrorKind::InvalidData, e))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn tok(text: &str, x: f64, y: f64, w: f64, h: f64) -> OcrToken {
        OcrToken::new(text, BoundingBox::new(x, y, x + w, y + h).unwrap())
    }

    #[test]
    fn stacked_tokens_order_top_first() {
        let tokens = vec![tok("bottom", 0.0, 100.0, 10.0, 5.0), tok("top", 0.0, 0.0, 10.0, 5.0)];
        let ordered = serialize_reading_order(&tokens);
        assert_eq!(ordered[0].text, "top");
        assert_eq!(ordered[1].text, "bottom");
    }

    #[test]
    fn same_line_orders_left_first() {
        let tokens = vec![tok("right", 50.0, 0.0, 10.0, 5.0), tok("left", 0.0, 1.0, 10.0, 5.0)];
        let ordered = serialize_reading_order(&tokens);
        assert_eq!(ordered[0].text, "left");
        assert_eq!(ordered[1].text, "right");
    }

    #[test]
    fn grid_orders_row_major() {
        // Known gold order: rows are far apart, columns jitter slightly in y.
        let mut tokens = Vec::new();
        let mut gold = Vec::new();
        for r in 0..5 {
            for c in 0..4 {
                let name = format!("r{r}c{c}");
                gold.push(name.clone());
                let jitter = (c as f64) * 0.3;
                tokens.push(tok(&name, c as f64 * 30.0, r as f64 * 40.0 + jitter, 20.0, 8.0));
            }
        }
        // Shuffle deterministically, then restore by reading order.
        tokens.reverse();
        let ordered = serialize_reading_order(&tokens);
        let texts: Vec<&str> = ordered.iter().map(|t| t.text.as_str()).collect();
        assert_eq!(texts, gold.iter().map(String::as_str).collect::<Vec<_>>());
    }

    #[test]
    fn round_trip_preserves_dataset() {
        let dir = tempfile::tempdir().unwrap();
        let docs_path = dir.path().join("docs.jsonl");
        let samples_path = dir.path().join("samples.jsonl");
        let dataset = Dataset {
            documents: vec![Document {
                id: "d0".into(),
                tokens: vec![tok("tổng", 0.0, 0.0, 10.0, 5.0), tok("50.000", 12.0, 0.0, 10.0, 5.0)],
            }],
            samples: vec![Sample {
                document_id: "d0".into(),
                qa: QAPair::new("tổng bao nhiêu", "50.000"),
            }],
        };
        save_dataset(&docs_path, &samples_path, &dataset).unwrap();
        let loaded = load_dataset(&docs_path, &samples_path).unwrap();
        assert_eq!(loaded.documents, dataset.documents);
        assert_eq!(loaded.samples, dataset.samples);
    }

    #[test]
    fn empty_files_load_empty() {
        let dir = tempfile::tempdir().unwrap();
        let docs_path = dir.path().join("docs.jsonl");
        let samples_path = dir.path().join("samples.jsonl");
        std::fs::write(&docs_path, "").unwrap();
        std::fs::write(&samples_path, "").unwrap();
        let loaded = load_dataset(&docs_path, &samples_path).unwrap();
        assert!(loaded.documents.is_empty());
        assert!(loaded.samples.is_empty());
    }

    #[test]
    fn missing_answer_field_names_line() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("samples.jsonl");
        std::fs::write(
            &path,
            "{\"document_id\":\"d0\",\"question\":\"q\",\"answer\":\"a\"}\n{\"document_id\":\"d0\",\"question\":\"q\"}\n",
        )
        .unwrap();
        let err = load_samples(&path).unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains(":2:"), "line number missing in {msg}");
        assert!(msg.contains("answer"), "field name missing in {msg}");
    }

    #[test]
    fn duplicate_document_id_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("docs.jsonl");
        std::fs::write(
            &path,
            "{\"id\":\"d0\",\"tokens\":[]}\n{\"id\":\"d0\",\"tokens\":[]}\n",
        )
        .unwrap();
        let err = load_documents(&path).unwrap_err();
        assert!(err.to_string().contains("duplicate document id"));
    }

    #[test]
    fn malformed_box_is_schema_error() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("docs.jsonl");
        std::fs::write(
            &path,
            "{\"id\":\"d0\",\"tokens\":[{\"text\":\"x\",\"box\":[5.0,0.0,1.0,1.0]}]}\n",
        )
        .unwrap();
        let err = load_documents(&path).unwrap_err();
        assert!(matches!(err, DatasetError::Malformed { line: 1, .. }), "{err}");
    }

    fn arb_tokens() -> impl Strategy<Value = Vec<OcrToken>> {
        let token = (0.0f64..500.0, 0.0f64..500.0, 1.0f64..40.0, 4.0f64..14.0, "[a-z]{1,6}")
            .prop_map(|(x, y, w, h, text)| tok(&text, x, y, w, h));
        proptest::collection::vec(token, 0..60)
    }

    proptest! {
        #[test]
        fn reading_order_is_permutation(tokens in arb_tokens()) {
            let mut order = reading_order(&tokens);
            order.sort_unstable();
            prop_assert_eq!(order, (0..tokens.len()).collect::<Vec<_>>());
        }

        #[test]
        fn reading_order_is_idempotent(tokens in arb_tokens()) {
            let once = serialize_reading_order(&tokens);
            let twice = serialize_reading_order(&once);
            prop_assert_eq!(once, twice);
        }
    }
}
