//! Question/context tokenization and layout embedding integration.

use super::mat::Mat;
use super::{LayoutMode, ModelError};
use crate::doc::Document;
use crate::layout_hash::{layout_hash, question_symbol};
use crate::vocab::Vocabulary;

/// Token ids aligned with one layout letter per hashing level.
///
/// Question tokens come first and carry `'0'` at every level; OCR tokens
/// follow in document order and carry the letters of their box's code.
#[derive(Debug, Clone, PartialEq)]
pub struct TokenizedInput {
    pub ids: Vec<u32>,
    /// `levels × len` grid of layout letters.
    pub letters: Vec<Vec<char>>,
    pub question_len: usize,
}

impl TokenizedInput {
    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }
}

/// Tokenize a question plus a document already in its serialized order.
///
/// Boxes are hashed over the whole document first; truncation to
/// `max_input_len` drops the OCR tail afterwards, so the kept letters are
/// those of the full-page hash. Unknown words map to the UNK id.
pub fn tokenize(
    question: &str,
    document: &Document,
    vocab: &Vocabulary,
    levels: usize,
    max_input_len: usize,
) -> Result<TokenizedInput, ModelError> {
    let question_words: Vec<&str> = question.split_whitespace().collect();
    let mut ids: Vec<u32> = question_words.iter().map(|w| vocab.id_or_unk(w)).collect();
    let question_len = ids.len().min(max_input_len);

    let mut letter_columns: Vec<String> = Vec::new();
    if !document.tokens.is_empty() {
        let boxes: Vec<_> = document.tokens.iter().map(|t| t.bbox).collect();
        let grid = layout_hash(&boxes, levels)?;
        for (token, code) in document.tokens.iter().zip(&grid.codes) {
            ids.push(vocab.id_or_unk(&token.text));
            letter_columns.push(code.letters()?);
        }
    }
    ids.truncate(max_input_len);

    let len = ids.len();
    let mut letters = vec![vec![question_symbol(); len]; levels];
    for (col, letter_string) in letter_columns.iter().enumerate() {
        let t = question_len + col;
        if t >= len {
            break;
        }
        for (level, ch) in letter_string.chars().enumerate() {
            letters[level][t] = ch;
        }
    }
    Ok(TokenizedInput {
        ids,
        letters,
        question_len,
    })
}

/// Word-level target tokenization; `<sep>` is a single token.
pub fn tokenize_answer(answer: &str, vocab: &Vocabulary) -> Vec<u32> {
    answer.split_whitespace().map(|w| vocab.id_or_unk(w)).collect()
}

/// Letter ids (`levels × len`) and per-position mean letter embedding.
pub(super) fn layout_terms(
    letters: &[Vec<char>],
    table: &Mat,
    vocab: &Vocabulary,
) -> Result<(Vec<Vec<u32>>, Mat), ModelError> {
    let levels = letters.len();
    let len = letters.first().map_or(0, Vec::len);
    let d = table.cols;
    let mut ids = vec![vec![0u32; len]; levels];
    let mut mean = Mat::zeros(len, d);
    let inv_levels = 1.0 / levels as f64;
    for (level, row) in letters.iter().enumerate() {
        for (t, &ch) in row.iter().enumerate() {
            let id = vocab.letter_id(ch).ok_or(ModelError::UnknownLetter(ch))?;
            ids[level][t] = id;
            let emb = table.row(id as usize);
            let out = mean.row_mut(t);
            for (o, &e) in out.iter_mut().zip(emb) {
                *o += e * inv_levels;
            }
        }
    }
    Ok((ids, mean))
}

pub(super) fn omega_vector(rho: &[f64], mode: LayoutMode, d: usize) -> Vec<f64> {
    match mode {
        LayoutMode::TextOnly => vec![0.0; d],
        LayoutMode::NoRatio => vec![1.0; d],
        LayoutMode::Ratio => {
            if rho.len() == 1 {
                vec![super::sigmoid(rho[0]); d]
            } else {
                rho.iter().map(|&r| super::sigmoid(r)).collect()
            }
        }
    }
}

/// Combine semantic and layout embeddings into the input embedding:
/// the per-position mean of the letter embeddings is gated by `ω = σ(ρ)`
/// and added onto the semantic rows.
pub fn integrate_layout(
    e_semantic: &Mat,
    letters: &[Vec<char>],
    rho: &[f64],
    table: &Mat,
    vocab: &Vocabulary,
    mode: LayoutMode,
) -> Result<Mat, ModelError> {
    let mut out = e_semantic.clone();
    if mode == LayoutMode::TextOnly {
        return Ok(out);
    }
    let (_ids, mean) = layout_terms(letters, table, vocab)?;
    let omega = omega_vector(rho, mode, table.cols);
    for t in 0..out.rows {
        let row = out.row_mut(t);
        let m = mean.row(t);
        match mode {
            LayoutMode::NoRatio => {
                for (o, &mv) in row.iter_mut().zip(m) {
                    *o += mv;
                }
            }
            _ => {
                for ((o, &mv), &w) in row.iter_mut().zip(m).zip(&omega) {
                    *o += w * mv;
                }
            }
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::doc::OcrToken;
    use crate::layout_hash::BoundingBox;

    fn doc(tokens: &[(&str, [f64; 4])]) -> Document {
        Document {
            id: "d".into(),
            tokens: tokens
                .iter()
                .map(|(text, b)| {
                    OcrToken::new(*text, BoundingBox::new(b[0], b[1], b[2], b[3]).unwrap())
                })
                .collect(),
        }
    }

    #[test]
    fn empty_document_letters_are_all_zero() {
        let vocab = Vocabulary::build(["what", "is", "this"]);
        let input = tokenize("what is this", &doc(&[]), &vocab, 4, 180).unwrap();
        assert_eq!(input.len(), 3);
        assert_eq!(input.question_len, 3);
        assert_eq!(input.letters.len(), 4);
        for row in &input.letters {
            assert!(row.iter().all(|&c| c == '0'));
        }
    }

    #[test]
    fn truncation_drops_ocr_tail() {
        let tokens: Vec<(String, [f64; 4])> = (0..195)
            .map(|i| {
                let x = (i % 20) as f64 * 10.0;
                let y = (i / 20) as f64 * 10.0;
                (format!("w{i}"), [x, y, x + 8.0, y + 8.0])
            })
            .collect();
        let token_refs: Vec<(&str, [f64; 4])> =
            tokens.iter().map(|(t, b)| (t.as_str(), *b)).collect();
        let document = doc(&token_refs);
        let vocab = Vocabulary::build(tokens.iter().map(|(t, _)| t.clone()).chain(["q".into()]));
        let input = tokenize("q q q q q", &document, &vocab, 4, 180).unwrap();
        assert_eq!(input.len(), 180);
        assert_eq!(input.question_len, 5);
        // First OCR column carries real letters, not the question symbol.
        assert_ne!(input.letters[0][5], '0');
        for row in &input.letters {
            assert_eq!(row.len(), 180);
        }
    }

    #[test]
    fn corner_box_letter_column() {
        // Two boxes at opposite corners: the first hashes to quadrant 1 at
        // every level, giving the letter column A, E, I, M.
        let document = doc(&[
            ("a", [0.0, 0.0, 1.0, 1.0]),
            ("b", [9.0, 9.0, 10.0, 10.0]),
        ]);
        let vocab = Vocabulary::build(["a", "b", "q"]);
        let input = tokenize("q", &document, &vocab, 4, 180).unwrap();
        let column: Vec<char> = (0..4).map(|l| input.letters[l][1]).collect();
        assert_eq!(column, vec!['A', 'E', 'I', 'M']);
    }

    #[test]
    fn unknown_words_become_unk() {
        let vocab = Vocabulary::build(["known"]);
        let document = doc(&[("mystery", [0.0, 0.0, 1.0, 1.0])]);
        let input = tokenize("known unknown", &document, &vocab, 2, 180).unwrap();
        assert_eq!(input.ids[0], vocab.id("known").unwrap());
        assert_eq!(input.ids[1], vocab.unk_id());
        assert_eq!(input.ids[2], vocab.unk_id());
    }

    #[test]
    fn integrate_identical_letters_use_that_row() {
        let vocab = Vocabulary::build::<[&str; 0], &str>([]);
        let d = 3;
        let table = Mat::from_fn(vocab.len(), d, |r, c| (r * d + c) as f64 * 0.01);
        let e_sem = Mat::zeros(1, d);
        let letters = vec![vec!['B']; 4];
        let rho = [0.0];
        let out = integrate_layout(&e_sem, &letters, &rho, &table, &vocab, LayoutMode::Ratio)
            .unwrap();
        let b_row = table.row(vocab.letter_id('B').unwrap() as usize);
        // σ(0) = 0.5 exactly, and the mean of four identical rows is the row.
        for (got, &want) in out.row(0).iter().zip(b_row) {
            assert!((got - 0.5 * want).abs() < 1e-15);
        }
    }

    #[test]
    fn integrate_zero_table_is_identity() {
        let vocab = Vocabulary::build::<[&str; 0], &str>([]);
        let table = Mat::zeros(vocab.len(), 4);
        let e_sem = Mat::from_fn(2, 4, |r, c| (r + c) as f64);
        let letters = vec![vec!['A', '0']; 3];
        let out = integrate_layout(&e_sem, &letters, &[1.3], &table, &vocab, LayoutMode::Ratio)
            .unwrap();
        assert_eq!(out, e_sem);
    }

    #[test]
    fn unknown_letter_is_an_error() {
        let vocab = Vocabulary::build::<[&str; 0], &str>([]);
        let table = Mat::zeros(vocab.len(), 2);
        let e_sem = Mat::zeros(1, 2);
        let letters = vec![vec!['?']];
        let err = integrate_layout(&e_sem, &letters, &[0.0], &table, &vocab, LayoutMode::Ratio);
        assert!(matches!(err, Err(ModelError::UnknownLetter('?'))));
    }
}
