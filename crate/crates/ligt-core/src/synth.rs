//! Deterministic generator of receipt-like documents and position-dependent
//! QA tasks.
//!
//! Tokens sit on a `rows × cols` grid. Box centers jitter by at most 20% of
//! a cell (10% vertically, so line grouping keeps rows intact), and the
//! corner boxes are pinned to the grid bounds so the fitted root rectangle
//! equals the grid exactly; at matching hashing depths a token's letters
//! then identify its cell regardless of jitter.
//!
//! The `right-neighbor` task plants one duplicated key word twice, once in
//! the top half and once in the bottom half of the page, and puts a fresh
//! "value" word in the cell right of each. The question names the
//! duplicated word; the gold answer is the value beside the *top* instance.
//! With shuffled serialization the text stream carries no positional
//! signal, so no text-only reader can beat a coin flip between the two
//! candidate values, while the layout letters decide it exactly.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::doc::{Dataset, Document, OcrToken, QAPair, Sample, SEP_TOKEN};
use crate::layout_hash::{layout_hash, BoundingBox};

pub const CELL_SIZE: f64 = 100.0;
/// Horizontal center jitter as a fraction of the cell size; small enough
/// that codes at the grid's own depth never cross a cell boundary.
pub const JITTER_X_FRACTION: f64 = 0.2;
/// Vertical jitter stays within half the box height so line grouping can
/// never split a grid row.
pub const JITTER_Y_FRACTION: f64 = 0.1;
const BOX_WIDTH: f64 = 60.0;
const BOX_HEIGHT: f64 = 40.0;

/// Text-only Bayes-optimal accuracy on the right-neighbor task: the two
/// planted value words are the only members of the value vocabulary in the
/// document and the generator assigns them to the top/bottom slots
/// uniformly, so conditioned on everything a text-only reader sees the gold
/// answer is a fair coin between them.
pub const RIGHT_NEIGHBOR_CHANCE: f64 = 0.5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TaskKind {
    QuadrantLookup,
    RightNeighbor,
    RegionValue,
}

impl std::str::FromStr for TaskKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "quadrant-lookup" => Ok(TaskKind::QuadrantLookup),
            "right-neighbor" => Ok(TaskKind::RightNeighbor),
            "region-value" => Ok(TaskKind::RegionValue),
            other => Err(format!(
                "unknown task \"{other}\" (expected quadrant-lookup, right-neighbor, or region-value)"
            )),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthConfig {
    pub seed: u64,
    pub rows: usize,
    pub cols: usize,
    /// Size of the key-word pool (the value pool has the same size).
    pub vocab_size: usize,
    pub duplicate_fraction: f64,
    pub task: TaskKind,
    /// Store tokens in a random order instead of reading order.
    pub shuffle: bool,
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig {
            seed: 0,
            rows: 4,
            cols: 4,
            vocab_size: 40,
            duplicate_fraction: 0.0,
            task: TaskKind::RightNeighbor,
            shuffle: true,
        }
    }
}

impl SynthConfig {
    pub fn validate(&self) -> Result<(), String> {
        if self.rows * self.cols < 4 {
            return Err("grid needs at least 4 cells".into());
        }
        if !(0.0..=1.0).contains(&self.duplicate_fraction) {
            return Err("duplicate fraction must be in [0, 1]".into());
        }
        if self.vocab_size == 0 {
            return Err("vocab size must be positive".into());
        }
        if self.task == TaskKind::RightNeighbor {
            if self.rows < 2 || self.cols < 2 {
                return Err("right-neighbor needs at least a 2×2 grid".into());
            }
            if self.vocab_size < self.rows * self.cols {
                return Err("right-neighbor needs vocab size >= grid cells".into());
            }
        }
        Ok(())
    }
}

fn doc_rng(config: &SynthConfig, index: u64) -> ChaCha8Rng {
    let mixed = config
        .seed
        .wrapping_mul(0x9E37_79B9_7F4A_7C15)
        .wrapping_add(index.wrapping_mul(0xBF58_476D_1CE4_E5B9).wrapping_add(1));
    ChaCha8Rng::seed_from_u64(mixed)
}

fn key_word(i: usize) -> String {
    format!("tok{i:03}")
}

fn value_word(i: usize) -> String {
    format!("val{i:03}")
}

/// Jittered boxes in row-major grid order, envelope pinned to the grid.
fn place_boxes(rows: usize, cols: usize, rng: &mut ChaCha8Rng) -> Vec<BoundingBox> {
    let jitter_x = JITTER_X_FRACTION * CELL_SIZE;
    let jitter_y = JITTER_Y_FRACTION * CELL_SIZE;
    let mut boxes = Vec::with_capacity(rows * cols);
    for r in 0..rows {
        for c in 0..cols {
            let cx = (c as f64 + 0.5) * CELL_SIZE + rng.gen_range(-jitter_x..jitter_x);
            let cy = (r as f64 + 0.5) * CELL_SIZE + rng.gen_range(-jitter_y..jitter_y);
            boxes.push(
                BoundingBox::new(
                    cx - BOX_WIDTH / 2.0,
                    cy - BOX_HEIGHT / 2.0,
                    cx + BOX_WIDTH / 2.0,
                    cy + BOX_HEIGHT / 2.0,
                )
                .expect("generated box is well-formed"),
            );
        }
    }
    boxes[0].x_min = 0.0;
    boxes[0].y_min = 0.0;
    let last = boxes.len() - 1;
    boxes[last].x_max = cols as f64 * CELL_SIZE;
    boxes[last].y_max = rows as f64 * CELL_SIZE;
    boxes
}

/// Overwrite enough of `positions` so at least `ceil(p·n)` tokens share
/// their text with another token.
fn apply_duplicates(texts: &mut [String], positions: &[usize], p: f64, rng: &mut ChaCha8Rng) {
    let n = texts.len();
    let m = ((p * n as f64).ceil() as usize).min(positions.len());
    if m == 0 {
        return;
    }
    let mut order = positions.to_vec();
    order.shuffle(rng);
    let (targets, sources) = order.split_at(m);
    if sources.is_empty() {
        let base = texts[targets[0]].clone();
        for &t in targets {
            texts[t] = base.clone();
        }
    } else {
        for &t in targets {
            let src = sources[rng.gen_range(0..sources.len())];
            texts[t] = texts[src].clone();
        }
    }
}

struct RightNeighborPlan {
    /// Grid cells (row, col) of the two instances of the duplicated word.
    top: (usize, usize),
    bottom: (usize, usize),
    x_word: String,
    v_top: String,
    v_bottom: String,
}

impl RightNeighborPlan {
    fn cells(&self, cols: usize) -> [usize; 4] {
        let idx = |(r, c): (usize, usize)| r * cols + c;
        [
            idx(self.top),
            idx((self.top.0, self.top.1 + 1)),
            idx(self.bottom),
            idx((self.bottom.0, self.bottom.1 + 1)),
        ]
    }
}

fn sample_right_neighbor_plan(config: &SynthConfig, rng: &mut ChaCha8Rng) -> RightNeighborPlan {
    let top_rows = config.rows / 2;
    let bottom_start = config.rows - config.rows / 2;
    let top = (rng.gen_range(0..top_rows), rng.gen_range(0..config.cols - 1));
    let bottom = (
        rng.gen_range(bottom_start..config.rows),
        rng.gen_range(0..config.cols - 1),
    );
    let x_word = key_word(rng.gen_range(0..config.vocab_size));
    let v_a = rng.gen_range(0..config.vocab_size);
    let v_b = (v_a + 1 + rng.gen_range(0..config.vocab_size - 1)) % config.vocab_size;
    RightNeighborPlan {
        top,
        bottom,
        x_word,
        v_top: value_word(v_a),
        v_bottom: value_word(v_b),
    }
}

fn right_neighbor_texts(
    config: &SynthConfig,
    plan: &RightNeighborPlan,
    rng: &mut ChaCha8Rng,
) -> Vec<String> {
    let n = config.rows * config.cols;
    let special = plan.cells(config.cols);
    // Distinct filler keys distinct from the duplicated word.
    let mut pool: Vec<usize> = (0..config.vocab_size).collect();
    pool.shuffle(rng);
    let mut pool = pool
        .into_iter()
        .map(key_word)
        .filter(|w| *w != plan.x_word);
    let mut texts: Vec<String> = Vec::with_capacity(n);
    for i in 0..n {
        if special.contains(&i) {
            texts.push(String::new());
        } else {
            texts.push(pool.next().expect("validated pool size"));
        }
    }
    texts[special[0]] = plan.x_word.clone();
    texts[special[1]] = plan.v_top.clone();
    texts[special[2]] = plan.x_word.clone();
    texts[special[3]] = plan.v_bottom.clone();
    if config.duplicate_fraction > 0.0 {
        let fillers: Vec<usize> = (0..n).filter(|i| !special.contains(i)).collect();
        apply_duplicates(&mut texts, &fillers, config.duplicate_fraction, rng);
    }
    texts
}

struct Generated {
    document: Document,
    qas: Vec<QAPair>,
    /// Serialized position of every grid cell (row-major index).
    cell_to_serial: Vec<usize>,
}

fn generate_one(config: &SynthConfig, index: u64) -> Generated {
    debug_assert!(config.validate().is_ok(), "invalid synth config");
    let mut rng = doc_rng(config, index);
    let (rows, cols) = (config.rows, config.cols);
    let n = rows * cols;
    let boxes = place_boxes(rows, cols, &mut rng);

    let (texts, qas): (Vec<String>, Vec<QAPair>) = match config.task {
        TaskKind::RightNeighbor => {
            let plan = sample_right_neighbor_plan(config, &mut rng);
            let texts = right_neighbor_texts(config, &plan, &mut rng);
            let qa = QAPair::new(format!("right of {}", plan.x_word), plan.v_top.clone());
            (texts, vec![qa])
        }
        TaskKind::QuadrantLookup | TaskKind::RegionValue => {
            let mut pool: Vec<usize> = (0..config.vocab_size).collect();
            pool.shuffle(&mut rng);
            let mut texts: Vec<String> = (0..n)
                .map(|i| {
                    if config.vocab_size >= n {
                        key_word(pool[i])
                    } else {
                        key_word(rng.gen_range(0..config.vocab_size))
                    }
                })
                .collect();
            let all: Vec<usize> = (0..n).collect();
            apply_duplicates(&mut texts, &all, config.duplicate_fraction, &mut rng);
            (texts, Vec::new())
        }
    };

    // Serialization order: reading order, or a seeded permutation of it.
    let mut serial_of_cell: Vec<usize> = (0..n).collect();
    if config.shuffle {
        let mut placement: Vec<usize> = (0..n).collect();
        placement.shuffle(&mut rng);
        for (serial, &cell) in placement.iter().enumerate() {
            serial_of_cell[cell] = serial;
        }
    }
    let mut tokens = vec![None; n];
    for cell in 0..n {
        tokens[serial_of_cell[cell]] = Some(OcrToken::new(texts[cell].clone(), boxes[cell]));
    }
    let document = Document {
        id: format!("synth-{index:06}"),
        tokens: tokens.into_iter().map(Option::unwrap).collect(),
    };

    // Grid-truth QA pairs for the remaining tasks need the final boxes.
    let qas = match config.task {
        TaskKind::RightNeighbor => qas,
        TaskKind::QuadrantLookup => {
            let grid = layout_hash(&boxes, 1).expect("nonempty grid");
            let mut out = Vec::new();
            for q in 1..=4u8 {
                let members: Vec<usize> = (0..n)
                    .filter(|&i| grid.codes[i].symbols[0].quadrant == q)
                    .collect();
                if let [only] = members.as_slice() {
                    out.push(QAPair::new(
                        format!("which token lies in q{q}"),
                        texts[*only].clone(),
                    ));
                }
            }
            out
        }
        TaskKind::RegionValue => {
            let mut out = Vec::new();
            for r in 0..rows {
                let cells: Vec<usize> = (0..cols).map(|c| r * cols + c).collect();
                if cells.is_empty() {
                    continue;
                }
                // Emit only when the region is one contiguous run of the
                // serialized context, so the answer stays a literal span.
                let serials: Vec<usize> = cells.iter().map(|&c| serial_of_cell[c]).collect();
                let contiguous = serials.windows(2).all(|w| w[1] == w[0] + 1);
                if !contiguous {
                    continue;
                }
                let answer = cells
                    .iter()
                    .map(|&c| texts[c].as_str())
                    .collect::<Vec<_>>()
                    .join(&format!(" {SEP_TOKEN} "));
                out.push(QAPair::new(format!("list row r{r}"), answer));
            }
            out
        }
    };

    Generated {
        document,
        qas,
        cell_to_serial: serial_of_cell,
    }
}

/// Deterministic document for `(config, index)`.
pub fn gen_receipt(config: &SynthConfig, index: u64) -> Document {
    generate_one(config, index).document
}

/// Document plus, for each serialized position, its row-major grid rank
/// (the gold reading order).
pub fn gen_receipt_with_order(config: &SynthConfig, index: u64) -> (Document, Vec<usize>) {
    let generated = generate_one(config, index);
    let n = generated.cell_to_serial.len();
    let mut rank_of_serial = vec![0usize; n];
    for (cell, &serial) in generated.cell_to_serial.iter().enumerate() {
        rank_of_serial[serial] = cell;
    }
    (generated.document, rank_of_serial)
}

/// QA pairs for a document produced by [`gen_receipt`] under the same
/// config. Re-derives the generator state from the document id.
pub fn gen_qa(config: &SynthConfig, document: &Document) -> Vec<QAPair> {
    let index = document
        .id
        .strip_prefix("synth-")
        .and_then(|s| s.parse::<u64>().ok())
        .expect("document must come from gen_receipt");
    let generated = generate_one(config, index);
    assert_eq!(
        generated.document, *document,
        "document does not match this synth config"
    );
    generated.qas
}

/// Generate `n_docs` documents with their samples.
pub fn gen_dataset(config: &SynthConfig, first_index: u64, n_docs: usize) -> Dataset {
    let mut documents = Vec::with_capacity(n_docs);
    let mut samples = Vec::new();
    for i in 0..n_docs {
        let generated = generate_one(config, first_index + i as u64);
        for qa in generated.qas {
            samples.push(Sample {
                document_id: generated.document.id.clone(),
                qa,
            });
        }
        documents.push(generated.document);
    }
    Dataset { documents, samples }
}

/// Corrupt a `fraction` of single-word answers by inserting one `.` so they
/// stop matching exactly but still match after one deletion. Returns how
/// many answers were planted.
pub fn plant_deletion_gap(dataset: &mut Dataset, fraction: f64, seed: u64) -> usize {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let eligible: Vec<usize> = dataset
        .samples
        .iter()
        .enumerate()
        .filter(|(_, s)| !s.qa.answer.contains(char::is_whitespace))
        .map(|(i, _)| i)
        .collect();
    let m = ((fraction * dataset.samples.len() as f64).ceil() as usize).min(eligible.len());
    let mut order = eligible;
    order.shuffle(&mut rng);
    for &i in order.iter().take(m) {
        let answer = &mut dataset.samples[i].qa.answer;
        let chars: Vec<char> = answer.chars().collect();
        let at = rng.gen_range(0..=chars.len());
        let mut corrupted = String::with_capacity(answer.len() + 1);
        corrupted.extend(&chars[..at]);
        corrupted.push('.');
        corrupted.extend(&chars[at..]);
        *answer = corrupted;
    }
    m
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::annotate::coverage_stats;
    use crate::doc::serialize_reading_order;

    fn config(task: TaskKind) -> SynthConfig {
        SynthConfig {
            task,
            ..SynthConfig::default()
        }
    }

    #[test]
    fn generation_is_deterministic() {
        let cfg = config(TaskKind::RightNeighbor);
        let a = gen_dataset(&cfg, 0, 5);
        let b = gen_dataset(&cfg, 0, 5);
        assert_eq!(a.documents, b.documents);
        assert_eq!(a.samples, b.samples);
        let c = gen_dataset(&SynthConfig { seed: 1, ..cfg }, 0, 5);
        assert_ne!(a.documents, c.documents);
    }

    #[test]
    fn two_by_two_has_one_token_per_quadrant() {
        let cfg = SynthConfig {
            rows: 2,
            cols: 2,
            task: TaskKind::QuadrantLookup,
            shuffle: false,
            duplicate_fraction: 0.0,
            ..SynthConfig::default()
        };
        let doc = gen_receipt(&cfg, 3);
        assert_eq!(doc.tokens.len(), 4);
        let boxes: Vec<_> = doc.tokens.iter().map(|t| t.bbox).collect();
        let grid = layout_hash(&boxes, 1).unwrap();
        let mut quadrants: Vec<u8> = grid.codes.iter().map(|c| c.symbols[0].quadrant).collect();
        quadrants.sort_unstable();
        assert_eq!(quadrants, vec![1, 2, 3, 4]);
        let qas = gen_qa(&cfg, &doc);
        assert_eq!(qas.len(), 4);
        for (q, qa) in qas.iter().enumerate() {
            assert_eq!(qa.question, format!("which token lies in q{}", q + 1));
        }
    }

    #[test]
    fn all_texts_identical_at_full_duplication_with_unit_vocab() {
        let cfg = SynthConfig {
            vocab_size: 1,
            duplicate_fraction: 1.0,
            task: TaskKind::QuadrantLookup,
            ..SynthConfig::default()
        };
        let doc = gen_receipt(&cfg, 0);
        let first = &doc.tokens[0].text;
        assert!(doc.tokens.iter().all(|t| t.text == *first));
    }

    #[test]
    fn duplicate_fraction_shares_texts() {
        let cfg = SynthConfig {
            duplicate_fraction: 0.5,
            task: TaskKind::QuadrantLookup,
            ..SynthConfig::default()
        };
        let doc = gen_receipt(&cfg, 1);
        let n = doc.tokens.len();
        let shared = doc
            .tokens
            .iter()
            .filter(|t| doc.tokens.iter().filter(|u| u.text == t.text).count() >= 2)
            .count();
        assert!(shared >= n / 2, "only {shared} of {n} tokens share text");
    }

    #[test]
    fn unshuffled_documents_are_in_reading_order() {
        let cfg = SynthConfig {
            shuffle: false,
            task: TaskKind::QuadrantLookup,
            ..SynthConfig::default()
        };
        let (doc, order) = gen_receipt_with_order(&cfg, 7);
        assert_eq!(order, (0..16).collect::<Vec<_>>());
        let reordered = serialize_reading_order(&doc.tokens);
        assert_eq!(reordered, doc.tokens);
    }

    #[test]
    fn shuffled_documents_restore_under_reading_order() {
        let cfg = config(TaskKind::RightNeighbor);
        let (doc, rank_of_serial) = gen_receipt_with_order(&cfg, 9);
        let restored = serialize_reading_order(&doc.tokens);
        let mut gold: Vec<(usize, &OcrToken)> =
            rank_of_serial.iter().copied().zip(doc.tokens.iter()).collect();
        gold.sort_by_key(|(rank, _)| *rank);
        let gold_tokens: Vec<OcrToken> = gold.into_iter().map(|(_, t)| t.clone()).collect();
        assert_eq!(restored, gold_tokens);
    }

    #[test]
    fn right_neighbor_answers_are_spatially_determined() {
        let cfg = config(TaskKind::RightNeighbor);
        for index in 0..50 {
            let doc = gen_receipt(&cfg, index);
            let qas = gen_qa(&cfg, &doc);
            assert_eq!(qas.len(), 1);
            let qa = &qas[0];
            let x_word = qa.question.strip_prefix("right of ").unwrap();
            // The named word occurs exactly twice, values exactly once each.
            let occurrences = doc.tokens.iter().filter(|t| t.text == x_word).count();
            assert_eq!(occurrences, 2, "doc {index}");
            let values: Vec<&OcrToken> = doc
                .tokens
                .iter()
                .filter(|t| t.text.starts_with("val"))
                .collect();
            assert_eq!(values.len(), 2, "doc {index}");
            assert_ne!(values[0].text, values[1].text, "doc {index}");
            assert!(values.iter().any(|t| t.text == qa.answer));
            // Gold value sits in the top half, beside the top instance.
            let gold = values.iter().find(|t| t.text == qa.answer).unwrap();
            let page_mid = cfg.rows as f64 * CELL_SIZE / 2.0;
            let cy = (gold.bbox.y_min + gold.bbox.y_max) / 2.0;
            assert!(cy < page_mid, "gold value must be in the top half");
            let other = values.iter().find(|t| t.text != qa.answer).unwrap();
            let ocy = (other.bbox.y_min + other.bbox.y_max) / 2.0;
            assert!(ocy > page_mid, "distractor value must be in the bottom half");
        }
    }

    /// Exhaustive enumeration at a small size: over every placement of the
    /// duplicated word and both value assignments, each bag of texts yields
    /// gold = v1 and gold = v2 equally often, so no reader of the shuffled
    /// text stream can beat [`RIGHT_NEIGHBOR_CHANCE`].
    #[test]
    fn right_neighbor_bayes_chance_by_enumeration() {
        let cfg = SynthConfig {
            rows: 2,
            cols: 3,
            vocab_size: 6,
            ..config(TaskKind::RightNeighbor)
        };
        let mut gold_counts = std::collections::HashMap::<String, (usize, usize)>::new();
        let mut outcomes = 0;
        for top_col in 0..cfg.cols - 1 {
            for bottom_col in 0..cfg.cols - 1 {
                for swap in [false, true] {
                    let (v_top, v_bottom) = if swap {
                        ("val001", "val000")
                    } else {
                        ("val000", "val001")
                    };
                    let plan = RightNeighborPlan {
                        top: (0, top_col),
                        bottom: (1, bottom_col),
                        x_word: key_word(0),
                        v_top: v_top.into(),
                        v_bottom: v_bottom.into(),
                    };
                    let mut rng = ChaCha8Rng::seed_from_u64(0);
                    let texts = right_neighbor_texts(&cfg, &plan, &mut rng);
                    let mut bag = texts.clone();
                    bag.sort();
                    let key = bag.join(" ");
                    let entry = gold_counts.entry(key).or_insert((0, 0));
                    if plan.v_top == "val000" {
                        entry.0 += 1;
                    } else {
                        entry.1 += 1;
                    }
                    outcomes += 1;
                }
            }
        }
        assert!(outcomes > 0);
        for (bag, (a, b)) in gold_counts {
            assert_eq!(a, b, "bag {bag} does not hide the gold value");
        }
    }

    #[test]
    fn region_value_lists_rows_with_sep() {
        let cfg = SynthConfig {
            rows: 2,
            cols: 2,
            task: TaskKind::RegionValue,
            shuffle: false,
            ..SynthConfig::default()
        };
        let doc = gen_receipt(&cfg, 4);
        let qas = gen_qa(&cfg, &doc);
        assert_eq!(qas.len(), 2);
        let expected = format!("{} {SEP_TOKEN} {}", doc.tokens[0].text, doc.tokens[1].text);
        assert_eq!(qas[0].answer, expected);
    }

    #[test]
    fn shuffled_region_value_skips_non_contiguous_rows() {
        let cfg = SynthConfig {
            task: TaskKind::RegionValue,
            shuffle: true,
            ..SynthConfig::default()
        };
        // Most shuffles break every row; whatever survives must still be a
        // literal span of the serialized context.
        let dataset = gen_dataset(&cfg, 0, 30);
        let stats = coverage_stats(&dataset);
        if stats.n > 0 {
            assert_eq!(stats.fully_matched, 1.0);
        }
    }

    #[test]
    fn every_generated_answer_is_a_literal_span() {
        for task in [TaskKind::QuadrantLookup, TaskKind::RightNeighbor, TaskKind::RegionValue] {
            for shuffle in [false, true] {
                let cfg = SynthConfig {
                    task,
                    shuffle,
                    rows: 2,
                    cols: 2,
                    ..SynthConfig::default()
                };
                let dataset = gen_dataset(&cfg, 0, 20);
                if dataset.samples.is_empty() {
                    continue;
                }
                let stats = coverage_stats(&dataset);
                assert_eq!(stats.fully_matched, 1.0, "{task:?} shuffle={shuffle}");
                assert_eq!(stats.with_deletion, 1.0);
            }
        }
    }

    #[test]
    fn planted_deletions_open_an_exact_gap() {
        let cfg = config(TaskKind::RightNeighbor);
        let mut dataset = gen_dataset(&cfg, 0, 40);
        let n = dataset.samples.len();
        let planted = plant_deletion_gap(&mut dataset, 0.1, 123);
        assert_eq!(planted, (0.1f64 * n as f64).ceil() as usize);
        let stats = coverage_stats(&dataset);
        assert_eq!(stats.with_deletion, 1.0);
        let gap = stats.with_deletion - stats.fully_matched;
        assert!((gap - planted as f64 / n as f64).abs() < 1e-12);
    }

    #[test]
    fn codes_are_stable_per_cell_under_jitter() {
        // At the grid's own depth (4×4 -> 2 levels), all jittered copies of
        // a cell share the same code prefix.
        let cfg = SynthConfig {
            shuffle: false,
            task: TaskKind::QuadrantLookup,
            ..SynthConfig::default()
        };
        let mut seen: Vec<Option<Vec<u8>>> = vec![None; 16];
        for index in 0..25 {
            let doc = gen_receipt(&cfg, index);
            let boxes: Vec<_> = doc.tokens.iter().map(|t| t.bbox).collect();
            let grid = layout_hash(&boxes, 2).unwrap();
            for (cell, code) in grid.codes.iter().enumerate() {
                let quadrants = code.quadrants();
                match &seen[cell] {
                    None => seen[cell] = Some(quadrants),
                    Some(prev) => assert_eq!(prev, &quadrants, "cell {cell} drifted"),
                }
            }
        }
    }
}
