//! Layout-hashed document QA at desk scale.
//!
//! The library turns OCR bounding boxes into hierarchical quadrant letters,
//! folds those letters into the token embeddings of a small encoder-decoder
//! transformer through a shared embedding table, and ships the surrounding
//! tooling: reading-order serialization, dataset files, evaluation metrics
//! (F1 / accuracy / ANLS), rule-based Vietnamese question and answer
//! classifiers, extractive span alignment, and a synthetic receipt
//! generator whose tasks are only solvable with the layout channel.

pub mod annotate;
pub mod doc;
pub mod layout_hash;
pub mod metrics;
pub mod model;
pub mod synth;
pub mod vocab;

pub use annotate::{
    align_answer, classify_answer_type, classify_question, coverage_stats, AnswerType,
    CoverageStats, QuestionType, SerializedContext, SpanAlignment,
};
pub use doc::{
    load_dataset, load_documents, load_samples, save_dataset, save_documents, save_samples,
    serialize_reading_order, Dataset, DatasetError, Document, OcrToken, QAPair, Sample, SEP_TOKEN,
};
pub use layout_hash::{
    assign_quadrant, bounding_rect, layout_hash, question_symbol, symbol_to_letter, BoundingBox,
    HashGrid, LayoutCode, LayoutHashError, QuadSymbol, Rect,
};
pub use metrics::{evaluate, AnswerPair, EvalConfig, EvalReport};
pub use model::{
    forward, generate, grad_check, integrate_layout, tokenize, train, Checkpoint, LayoutMode,
    ModelConfig, ModelError, ModelParams, TokenizedInput, TrainConfig,
};
pub use synth::{gen_dataset, gen_qa, gen_receipt, SynthConfig, TaskKind};
pub use vocab::Vocabulary;
