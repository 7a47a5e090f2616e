//! Rule-based annotation tools: Vietnamese question-type classification,
//! answer-type classification, and extractive answer-span alignment.
//!
//! Question classification matches interrogative keywords on
//! whitespace-delimited syllables after NFC normalization, lowercasing, and
//! punctuation removal. Multi-syllable keywords are matched first and
//! consume their syllables, so a single-syllable keyword absorbed into a
//! longer one (e.g. `nào` inside `ngày nào`) cannot fire on its own. A
//! question that matches no class, or more than one distinct class, falls
//! into `Other`.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};
use unicode_normalization::UnicodeNormalization;
use unicode_properties::{GeneralCategory, GeneralCategoryGroup, UnicodeGeneralCategory};

use crate::doc::{Dataset, OcrToken, SEP_TOKEN};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum QuestionType {
    Location,
    Object,
    Quantity,
    Time,
    Reason,
    Manner,
    Person,
    Other,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AnswerType {
    Numeric,
    NonNumeric,
    Hybrid,
}

/// Keyword lists per class. Single-syllable keywords of Object and Quantity
/// conflict with longer Time/Manner keywords that contain the same syllable;
/// the multi-syllable forms take priority.
pub struct KeywordTable {
    multi: Vec<(QuestionType, Vec<String>)>,
    single: Vec<(QuestionType, String)>,
}

const LOCATION_KEYWORDS: &[&str] = &["đâu"];
const OBJECT_KEYWORDS: &[&str] = &["gì", "nào"];
const QUANTITY_KEYWORDS: &[&str] = &["mấy", "nhiêu"];
const TIME_KEYWORDS: &[&str] = &[
    "khi nào",
    "lúc nào",
    "thời gian nào",
    "ngày nào",
    "ngày mấy",
    "ngày bao nhiêu",
    "mùng nào",
    "mùng mấy",
    "tháng nào",
    "tháng mấy",
    "giờ nào",
    "mấy giờ",
    "năm nào",
    "thứ mấy",
];
const REASON_KEYWORDS: &[&str] = &["vì sao", "tại sao", "để làm gì"];
const MANNER_KEYWORDS: &[&str] = &["thế nào", "bằng cách nào", "làm cách nào", "làm sao", "như nào"];
const PERSON_KEYWORDS: &[&str] = &["ai"];

impl KeywordTable {
    pub fn new() -> Self {
        let classes: &[(QuestionType, &[&str])] = &[
            (QuestionType::Location, LOCATION_KEYWORDS),
            (QuestionType::Object, OBJECT_KEYWORDS),
            (QuestionType::Quantity, QUANTITY_KEYWORDS),
            (QuestionType::Time, TIME_KEYWORDS),
            (QuestionType::Reason, REASON_KEYWORDS),
            (QuestionType::Manner, MANNER_KEYWORDS),
            (QuestionType::Person, PERSON_KEYWORDS),
        ];
        let mut multi = Vec::new();
        let mut single = Vec::new();
        for &(class, keywords) in classes {
            for kw in keywords {
                let syllables: Vec<String> = kw.split_whitespace().map(|s| s.nfc().collect()).collect();
                if syllables.len() > 1 {
                    multi.push((class, syllables));
                } else {
                    single.push((class, syllables.into_iter().next().unwrap()));
                }
            }
        }
        // Longest first so a longer keyword consumes its syllables before a
        // shorter one embedded in it can match.
        multi.sort_by(|a, b| b.1.len().cmp(&a.1.len()));
        KeywordTable { multi, single }
    }

    /// Syllables that change class when absorbed into a longer keyword.
    pub fn conflict_singles(&self) -> Vec<&str> {
        ["gì", "nào", "mấy", "nhiêu"].to_vec()
    }
}

impl Default for KeywordTable {
    fn default() -> Self {
        KeywordTable::new()
    }
}

fn is_punct_or_symbol(c: char) -> bool {
    matches!(
        c.general_category_group(),
        GeneralCategoryGroup::Punctuation | GeneralCategoryGroup::Symbol
    )
}

fn is_decimal_digit(c: char) -> bool {
    c.general_category() == GeneralCategory::DecimalNumber
}

fn question_syllables(question: &str) -> Vec<String> {
    let normalized: String = question
        .nfc()
        .collect::<String>()
        .to_lowercase()
        .chars()
        .map(|c| if is_punct_or_symbol(c) { ' ' } else { c })
        .collect();
    normalized.split_whitespace().map(str::to_string).collect()
}

/// Classify a question into one of eight interrogative classes.
pub fn classify_question(question: &str) -> QuestionType {
    classify_question_with(&KeywordTable::new(), question)
}

pub fn classify_question_with(table: &KeywordTable, question: &str) -> QuestionType {
    let syllables = question_syllables(question);
    let mut consumed = vec![false; syllables.len()];
    let mut matched: Vec<QuestionType> = Vec::new();

    for (class, keyword) in &table.multi {
        let k = keyword.len();
        if syllables.len() < k {
            continue;
        }
        let mut i = 0;
        while i + k <= syllables.len() {
            let free = (i..i + k).all(|j| !consumed[j]);
            if free && (0..k).all(|j| syllables[i + j] == keyword[j]) {
                consumed[i..i + k].iter_mut().for_each(|c| *c = true);
                matched.push(*class);
                i += k;
            } else {
                i += 1;
            }
        }
    }
    for (i, syllable) in syllables.iter().enumerate() {
        if consumed[i] {
            continue;
        }
        for (class, keyword) in &table.single {
            if syllable == keyword {
                matched.push(*class);
            }
        }
    }

    matched.sort_by_key(|c| *c as u8);
    matched.dedup();
    match matched.as_slice() {
        [single] => *single,
        _ => QuestionType::Other,
    }
}

/// Classify an answer by its characters once punctuation, symbols, and
/// whitespace are stripped: all digits, no digits, or a mix.
pub fn classify_answer_type(answer: &str) -> AnswerType {
    let residue: Vec<char> = answer
        .nfc()
        .filter(|&c| !is_punct_or_symbol(c) && !c.is_whitespace())
        .collect();
    if residue.is_empty() {
        return AnswerType::NonNumeric;
    }
    let digits = residue.iter().filter(|&&c| is_decimal_digit(c)).count();
    if digits == residue.len() {
        AnswerType::Numeric
    } else if digits == 0 {
        AnswerType::NonNumeric
    } else {
        AnswerType::Hybrid
    }
}

/// Answer span over the serialized OCR context, counted in token positions
/// starting at 1; position 0 is the unanswerable sentinel.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SpanAlignment {
    pub start_token: usize,
    pub end_token: usize,
}

impl SpanAlignment {
    /// Sentinel for answers that cannot be located in the context.
    pub const CLS: SpanAlignment = SpanAlignment {
        start_token: 0,
        end_token: 0,
    };

    pub fn new(start_token: usize, end_token: usize) -> Self {
        assert!(start_token >= 1 && start_token <= end_token);
        SpanAlignment {
            start_token,
            end_token,
        }
    }

    pub fn is_cls(&self) -> bool {
        *self == Self::CLS
    }
}

/// Space-joined OCR texts with the character range of every token.
#[derive(Debug, Clone)]
pub struct SerializedContext {
    chars: Vec<char>,
    token_spans: Vec<(usize, usize)>,
}

impl SerializedContext {
    pub fn from_tokens(tokens: &[OcrToken]) -> Self {
        Self::from_texts(tokens.iter().map(|t| t.text.as_str()))
    }

    pub fn from_texts<'a>(texts: impl IntoIterator<Item = &'a str>) -> Self {
        let mut chars = Vec::new();
        let mut token_spans = Vec::new();
        for text in texts {
            if !chars.is_empty() {
                chars.push(' ');
            }
            let start = chars.len();
            chars.extend(text.nfc());
            token_spans.push((start, chars.len()));
        }
        SerializedContext { chars, token_spans }
    }

    pub fn text(&self) -> String {
        self.chars.iter().collect()
    }

    pub fn token_count(&self) -> usize {
        self.token_spans.len()
    }

    fn span_for_char_range(&self, start: usize, end: usize) -> SpanAlignment {
        let mut first = None;
        let mut last = None;
        for (i, &(s, e)) in self.token_spans.iter().enumerate() {
            if s < end && e > start {
                first.get_or_insert(i);
                last = Some(i);
            }
        }
        match (first, last) {
            (Some(f), Some(l)) => SpanAlignment::new(f + 1, l + 1),
            _ => SpanAlignment::CLS,
        }
    }
}

fn find_chars(haystack: &[char], needle: &[char]) -> Option<usize> {
    if needle.is_empty() || needle.len() > haystack.len() {
        return None;
    }
    (0..=haystack.len() - needle.len()).find(|&i| haystack[i..i + needle.len()] == *needle)
}

/// Answer string as matched against the context: NFC, trimmed, inner
/// whitespace runs collapsed, and list separators flattened to spaces so a
/// multi-item answer can match its items in sequence.
fn prepare_answer(answer: &str) -> Vec<char> {
    let normalized: String = answer.nfc().collect();
    let mut words: Vec<&str> = Vec::new();
    for w in normalized.split_whitespace() {
        if w == SEP_TOKEN {
            continue;
        }
        words.push(w);
    }
    words.join(" ").chars().collect()
}

/// Locate an answer in the serialized context.
///
/// Rule 1 takes the first exact occurrence. Rule 2, for answers of at least
/// two characters, tries every single-character deletion of the answer and
/// takes the earliest occurrence (ties broken by the smallest deletion
/// index). Anything else maps to the sentinel.
pub fn align_answer(answer: &str, context: &SerializedContext) -> SpanAlignment {
    let needle = prepare_answer(answer);
    if needle.is_empty() {
        return SpanAlignment::CLS;
    }
    if let Some(pos) = find_chars(&context.chars, &needle) {
        return context.span_for_char_range(pos, pos + needle.len());
    }
    if needle.len() >= 2 {
        let mut best: Option<(usize, usize)> = None;
        for del in 0..needle.len() {
            let mut variant = needle.clone();
            variant.remove(del);
            if let Some(pos) = find_chars(&context.chars, &variant) {
                if best.map_or(true, |(p, _)| pos < p) {
                    best = Some((pos, del));
                }
            }
        }
        if let Some((pos, _)) = best {
            return context.span_for_char_range(pos, pos + needle.len() - 1);
        }
    }
    SpanAlignment::CLS
}

/// Coverage of the two alignment rules over a dataset.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CoverageStats {
    /// Fraction of answers locatable by exact match alone.
    pub fully_matched: f64,
    /// Fraction locatable once single-character deletions are allowed.
    pub with_deletion: f64,
    pub n: usize,
}

pub fn coverage_stats(dataset: &Dataset) -> CoverageStats {
    let index = dataset.document_index();
    let mut contexts: HashMap<&str, SerializedContext> = HashMap::new();
    let mut exact = 0usize;
    let mut with_del = 0usize;
    let mut n = 0usize;
    for sample in &dataset.samples {
        let Some(doc) = index.get(sample.document_id.as_str()) else {
            continue;
        };
        let ctx = contexts
            .entry(sample.document_id.as_str())
            .or_insert_with(|| SerializedContext::from_tokens(&doc.tokens));
        n += 1;
        let needle = prepare_answer(&sample.qa.answer);
        if find_chars(&ctx.chars, &needle).is_some() {
            exact += 1;
            with_del += 1;
        } else if !align_answer(&sample.qa.answer, ctx).is_cls() {
            with_del += 1;
        }
    }
    if n == 0 {
        return CoverageStats {
            fully_matched: 0.0,
            with_deletion: 0.0,
            n: 0,
        };
    }
    CoverageStats {
        fully_matched: exact as f64 / n as f64,
        with_deletion: with_del as f64 / n as f64,
        n,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::doc::{Document, QAPair, Sample};
    use crate::layout_hash::BoundingBox;
    use proptest::prelude::*;

    #[test]
    fn paper_quoted_questions() {
        assert_eq!(classify_question("Khách hàng đã mua gì?"), QuestionType::Object);
        assert_eq!(
            classify_question("Ai là nhân viên phụ trách hóa đơn này?"),
            QuestionType::Person
        );
        assert_eq!(
            classify_question(
                "Sản phẩm đầu tiên trong hóa đơn này có tên là gì và số lượng mua bao nhiêu?"
            ),
            QuestionType::Other
        );
        assert_eq!(classify_question("Hóa đơn in vào ngày nào?"), QuestionType::Time);
    }

    #[test]
    fn no_keyword_falls_to_other() {
        assert_eq!(
            classify_question("Số tham chiếu của hóa đơn này là?"),
            QuestionType::Other
        );
        assert_eq!(classify_question(""), QuestionType::Other);
    }

    #[test]
    fn more_classifier_cases() {
        assert_eq!(classify_question("Cửa hàng nằm ở đâu?"), QuestionType::Location);
        assert_eq!(classify_question("Khách mua mấy món?"), QuestionType::Quantity);
        assert_eq!(classify_question("Tổng cộng bao nhiêu tiền?"), QuestionType::Quantity);
        assert_eq!(classify_question("Vì sao hóa đơn bị hủy?"), QuestionType::Reason);
        assert_eq!(
            classify_question("Thanh toán bằng cách nào?"),
            QuestionType::Manner
        );
        assert_eq!(classify_question("Hóa đơn in lúc mấy giờ?"), QuestionType::Time);
        // Two keywords of the same class stay in that class.
        assert_eq!(
            classify_question("Hóa đơn in ngày nào và lúc mấy giờ?"),
            QuestionType::Time
        );
    }

    #[test]
    fn decomposed_input_still_matches() {
        // "gì" typed as g + i + combining grave accent.
        let decomposed = "Kh\u{00e1}ch h\u{00e0}ng mua gi\u{0300}?";
        assert_eq!(classify_question(decomposed), QuestionType::Object);
    }

    #[test]
    fn conflict_priority_consumes_single_syllable() {
        let table = KeywordTable::new();
        for kw_list in [TIME_KEYWORDS, MANNER_KEYWORDS, REASON_KEYWORDS] {
            for kw in kw_list {
                let has_conflict = kw
                    .split_whitespace()
                    .any(|s| table.conflict_singles().contains(&s));
                if !has_conflict {
                    continue;
                }
                let question = format!("Hóa đơn {kw}?");
                let got = classify_question(&question);
                assert!(
                    got != QuestionType::Object && got != QuestionType::Quantity,
                    "{kw} leaked a conflict single: {got:?}"
                );
            }
        }
    }

    #[test]
    fn paper_quoted_answers() {
        assert_eq!(classify_answer_type("50 000"), AnswerType::Numeric);
        assert_eq!(classify_answer_type("50.000"), AnswerType::Numeric);
        assert_eq!(classify_answer_type("30/04/2024"), AnswerType::Numeric);
        assert_eq!(classify_answer_type("tiền mặt"), AnswerType::NonNumeric);
        assert_eq!(classify_answer_type("Trà đào (L)"), AnswerType::NonNumeric);
        assert_eq!(classify_answer_type("50.000 VND"), AnswerType::Hybrid);
        assert_eq!(classify_answer_type("24/12/2022(Thứ bảy)"), AnswerType::Hybrid);
    }

    #[test]
    fn punctuation_only_answer_is_non_numeric() {
        assert_eq!(classify_answer_type("..!?"), AnswerType::NonNumeric);
        assert_eq!(classify_answer_type(""), AnswerType::NonNumeric);
    }

    fn ctx(texts: &[&str]) -> SerializedContext {
        SerializedContext::from_texts(texts.iter().copied())
    }

    #[test]
    fn align_exact_span() {
        let context = ctx(&["tổng", "cộng", "50.000", "vnd"]);
        assert_eq!(align_answer("50.000", &context), SpanAlignment::new(3, 3));
        assert_eq!(align_answer("tổng cộng", &context), SpanAlignment::new(1, 2));
        // First occurrence wins.
        let repeated = ctx(&["a", "b", "a"]);
        assert_eq!(align_answer("a", &repeated), SpanAlignment::new(1, 1));
    }

    #[test]
    fn align_one_deletion() {
        let context = ctx(&["tạm", "tính", "50000", "đ"]);
        let got = align_answer("50.000", &context);
        assert_eq!(got, SpanAlignment::new(3, 3));
    }

    #[test]
    fn align_unanswerable_is_cls() {
        let context = ctx(&["không", "liên", "quan"]);
        assert_eq!(align_answer("50.000", &context), SpanAlignment::CLS);
        assert!(align_answer("50.000", &context).is_cls());
    }

    #[test]
    fn one_char_answers_never_use_deletion() {
        // "x" absent: deleting its only character would leave an empty
        // needle, so the rule must not fire.
        let context = ctx(&["a", "b"]);
        assert_eq!(align_answer("x", &context), SpanAlignment::CLS);
    }

    #[test]
    fn deletion_tie_breaks_on_earliest_occurrence() {
        // Answer "xab": deleting 'x' matches at 0, deleting 'b' ("xa") does
        // not occur; earliest context position wins.
        let context = ctx(&["ab", "xa"]);
        let got = align_answer("xab", &context);
        assert_eq!(got, SpanAlignment::new(1, 1));
    }

    #[test]
    fn list_answer_matches_adjacent_items() {
        let context = ctx(&["trà", "đào", "cam"]);
        let got = align_answer("trà <sep> đào", &context);
        assert_eq!(got, SpanAlignment::new(1, 2));
    }

    fn mini_dataset(answers: &[&str]) -> Dataset {
        let bbox = |i: usize| {
            BoundingBox::new(i as f64 * 10.0, 0.0, i as f64 * 10.0 + 8.0, 5.0).unwrap()
        };
        let doc = Document {
            id: "d0".into(),
            tokens: ["alpha", "beta", "gamma", "delta"]
                .iter()
                .enumerate()
                .map(|(i, t)| OcrToken::new(*t, bbox(i)))
                .collect(),
        };
        let samples = answers
            .iter()
            .map(|a| Sample {
                document_id: "d0".into(),
                qa: QAPair::new("q", *a),
            })
            .collect();
        Dataset {
            documents: vec![doc],
            samples,
        }
    }

    #[test]
    fn coverage_fractions() {
        let dataset = mini_dataset(&["alpha", "be.ta", "zzz"]);
        let stats = coverage_stats(&dataset);
        assert_eq!(stats.n, 3);
        assert!((stats.fully_matched - 1.0 / 3.0).abs() < 1e-12);
        assert!((stats.with_deletion - 2.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn coverage_extremes() {
        let all = coverage_stats(&mini_dataset(&["alpha", "beta"]));
        assert_eq!((all.fully_matched, all.with_deletion), (1.0, 1.0));
        let none = coverage_stats(&mini_dataset(&["zzz", "yyy"]));
        assert_eq!((none.fully_matched, none.with_deletion), (0.0, 0.0));
    }

    proptest! {
        #[test]
        fn answer_type_ignores_punctuation(core in "[a-z0-9]{0,8}", punct in proptest::collection::vec(prop_oneof![Just('.'), Just(','), Just('!'), Just('('), Just('/')], 0..6)) {
            let mut decorated = String::new();
            let mut chars = core.chars();
            for p in &punct {
                decorated.push(*p);
                if let Some(c) = chars.next() {
                    decorated.push(c);
                }
            }
            decorated.extend(chars);
            prop_assert_eq!(classify_answer_type(&decorated), classify_answer_type(&core));
        }

        #[test]
        fn with_deletion_never_below_fully_matched(answers in proptest::collection::vec("[a-z.]{1,8}", 1..10)) {
            let refs: Vec<&str> = answers.iter().map(String::as_str).collect();
            let stats = coverage_stats(&mini_dataset(&refs));
            prop_assert!(stats.with_deletion >= stats.fully_matched);
        }
    }
}
