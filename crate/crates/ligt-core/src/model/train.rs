//! Cross-entropy loss, Adam training loop, greedy decoding, and the
//! finite-difference gradient checker.

use log::info;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::input::TokenizedInput;
use super::mat::Mat;
use super::net::{backward, forward};
use super::{ModelError, ModelParams};
use crate::vocab::Vocabulary;

/// One training example: tokenized encoder input and the target ids,
/// which already end with EOS.
#[derive(Debug, Clone)]
pub struct Example {
    pub input: TokenizedInput,
    pub target: Vec<u32>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub steps: usize,
    pub batch_size: usize,
    pub lr: f64,
    pub warmup_steps: usize,
    pub seed: u64,
    pub log_every: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            steps: 2000,
            batch_size: 32,
            lr: 1e-3,
            warmup_steps: 100,
            seed: 0,
            log_every: 200,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrainReport {
    pub final_loss: f64,
    pub steps: usize,
}

/// Summed cross entropy over decoder steps plus `softmax - onehot`
/// gradients (unscaled; the caller divides by the position count).
pub fn cross_entropy_loss(logits: &Mat, targets: &[u32]) -> (f64, Mat) {
    assert_eq!(logits.rows, targets.len(), "one target per decoder step");
    let mut d_logits = Mat::zeros(logits.rows, logits.cols);
    let mut loss = 0.0;
    for (r, &target) in targets.iter().enumerate() {
        let row = logits.row(r);
        let max = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let mut sum = 0.0;
        for &v in row {
            sum += (v - max).exp();
        }
        let log_z = max + sum.ln();
        loss += log_z - row[target as usize];
        let d_row = d_logits.row_mut(r);
        for (c, &v) in row.iter().enumerate() {
            d_row[c] = (v - log_z).exp();
        }
        d_row[target as usize] -= 1.0;
    }
    (loss, d_logits)
}

fn decoder_prefix(target: &[u32], bos: u32) -> Vec<u32> {
    let mut prefix = Vec::with_capacity(target.len());
    prefix.push(bos);
    prefix.extend_from_slice(&target[..target.len() - 1]);
    prefix
}

/// Mean loss of a set of examples under fixed parameters.
pub fn batch_loss(
    params: &ModelParams,
    vocab: &Vocabulary,
    examples: &[Example],
) -> Result<f64, ModelError> {
    let npos: usize = examples.iter().map(|e| e.target.len()).sum();
    if npos == 0 {
        return Ok(0.0);
    }
    let mut total = 0.0;
    for ex in examples {
        let prefix = decoder_prefix(&ex.target, vocab.bos_id());
        let (logits, _) = forward(params, vocab, &ex.input, &prefix)?;
        let (loss, _) = cross_entropy_loss(&logits, &ex.target);
        total += loss;
    }
    Ok(total / npos as f64)
}

/// Mean loss plus summed gradients for one batch.
fn batch_backward(
    params: &ModelParams,
    vocab: &Vocabulary,
    examples: &[&Example],
    grads: &mut ModelParams,
) -> Result<f64, ModelError> {
    let npos: usize = examples.iter().map(|e| e.target.len()).sum();
    let inv = 1.0 / npos as f64;
    let mut total = 0.0;
    for ex in examples {
        let prefix = decoder_prefix(&ex.target, vocab.bos_id());
        let (logits, cache) = forward(params, vocab, &ex.input, &prefix)?;
        let (loss, mut d_logits) = cross_entropy_loss(&logits, &ex.target);
        total += loss;
        for v in &mut d_logits.data {
            *v *= inv;
        }
        backward(params, &cache, &d_logits, grads);
    }
    Ok(total * inv)
}

struct Adam {
    m: Vec<Vec<f64>>,
    v: Vec<Vec<f64>>,
    beta1: f64,
    beta2: f64,
    eps: f64,
    t: usize,
}

impl Adam {
    fn new(params: &ModelParams) -> Self {
        let shapes: Vec<usize> = params.tensors().iter().map(|(_, t)| t.len()).collect();
        Adam {
            m: shapes.iter().map(|&n| vec![0.0; n]).collect(),
            v: shapes.iter().map(|&n| vec![0.0; n]).collect(),
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            t: 0,
        }
    }

    fn step(&mut self, params: &mut ModelParams, grads: &ModelParams, lr: f64) {
        self.t += 1;
        let bc1 = 1.0 - self.beta1.powi(self.t as i32);
        let bc2 = 1.0 - self.beta2.powi(self.t as i32);
        let grad_tensors = grads.tensors();
        for (ti, (_, tensor)) in params.tensors_mut().into_iter().enumerate() {
            let g = grad_tensors[ti].1;
            let m = &mut self.m[ti];
            let v = &mut self.v[ti];
            for i in 0..tensor.len() {
                m[i] = self.beta1 * m[i] + (1.0 - self.beta1) * g[i];
                v[i] = self.beta2 * v[i] + (1.0 - self.beta2) * g[i] * g[i];
                let m_hat = m[i] / bc1;
                let v_hat = v[i] / bc2;
                tensor[i] -= lr * m_hat / (v_hat.sqrt() + self.eps);
            }
        }
    }
}

fn zero_grads(grads: &mut ModelParams) {
    for (_, t) in grads.tensors_mut() {
        t.iter_mut().for_each(|v| *v = 0.0);
    }
}

/// Adam with linear warmup. Deterministic for a fixed seed; aborts if the
/// loss stops being finite.
pub fn train(
    params: &mut ModelParams,
    vocab: &Vocabulary,
    examples: &[Example],
    cfg: &TrainConfig,
) -> Result<TrainReport, ModelError> {
    if examples.is_empty() {
        return Err(ModelError::Config("empty training set".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut order: Vec<usize> = (0..examples.len()).collect();
    let mut cursor = order.len();
    let mut adam = Adam::new(params);
    let mut grads = params.zeros_like();
    let mut last_loss = f64::NAN;
    let batch_size = cfg.batch_size.max(1).min(examples.len());

    for step in 0..cfg.steps {
        let mut batch: Vec<&Example> = Vec::with_capacity(batch_size);
        while batch.len() < batch_size {
            if cursor == order.len() {
                order.shuffle(&mut rng);
                cursor = 0;
            }
            batch.push(&examples[order[cursor]]);
            cursor += 1;
        }
        zero_grads(&mut grads);
        let loss = batch_backward(params, vocab, &batch, &mut grads)?;
        if !loss.is_finite() {
            return Err(ModelError::NonFiniteLoss { step, loss });
        }
        let warm = if cfg.warmup_steps > 0 {
            ((step + 1) as f64 / cfg.warmup_steps as f64).min(1.0)
        } else {
            1.0
        };
        adam.step(params, &grads, cfg.lr * warm);
        last_loss = loss;
        if cfg.log_every > 0 && (step + 1) % cfg.log_every == 0 {
            info!("step {}/{} loss {:.6}", step + 1, cfg.steps, loss);
        }
    }
    Ok(TrainReport {
        final_loss: last_loss,
        steps: cfg.steps,
    })
}

/// Greedy decode until EOS or `max_len` tokens; PAD and BOS are never
/// emitted. Tokens are joined with single spaces, so `<sep>` survives
/// verbatim.
pub fn generate(
    params: &ModelParams,
    vocab: &Vocabulary,
    input: &TokenizedInput,
    max_len: usize,
) -> Result<String, ModelError> {
    let mut prefix = vec![vocab.bos_id()];
    let mut words: Vec<String> = Vec::new();
    for _ in 0..max_len {
        if prefix.len() > params.config.max_positions() {
            break;
        }
        let (logits, _) = forward(params, vocab, input, &prefix)?;
        let row = logits.row(logits.rows - 1);
        let mut best = (f64::NEG_INFINITY, 0u32);
        for (id, &score) in row.iter().enumerate() {
            let id = id as u32;
            if id == vocab.pad_id() || id == vocab.bos_id() {
                continue;
            }
            if score > best.0 {
                best = (score, id);
            }
        }
        if best.1 == vocab.eos_id() {
            break;
        }
        words.push(vocab.token(best.1).to_string());
        prefix.push(best.1);
    }
    Ok(words.join(" "))
}

#[derive(Debug, Clone)]
pub struct GradCheckReport {
    pub max_rel_err: f64,
    pub worst_tensor: String,
    pub per_tensor: Vec<(String, f64)>,
}

fn rel_err(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(1e-6)
}

/// Compare analytic gradients against central finite differences for every
/// parameter, including `rho`. The batch loss is recomputed from scratch at
/// each perturbed point, so only the backward pass is under test.
pub fn grad_check(
    params: &ModelParams,
    vocab: &Vocabulary,
    examples: &[Example],
    h: f64,
) -> Result<GradCheckReport, ModelError> {
    let npos: usize = examples.iter().map(|e| e.target.len()).sum();
    if npos == 0 {
        return Err(ModelError::Config("empty gradient-check batch".into()));
    }
    let mut grads = params.zeros_like();
    let refs: Vec<&Example> = examples.iter().collect();
    batch_backward(params, vocab, &refs, &mut grads)?;

    let mut work = params.clone();
    let n_tensors = work.tensors().len();
    let mut per_tensor = Vec::with_capacity(n_tensors);
    let mut max_rel = 0.0;
    let mut worst = String::new();
    for ti in 0..n_tensors {
        let (name, len) = {
            let t = params.tensors();
            (t[ti].0.clone(), t[ti].1.len())
        };
        let mut tensor_max = 0.0f64;
        for i in 0..len {
            let original = params.tensors()[ti].1[i];
            work.tensors_mut()[ti].1[i] = original + h;
            let loss_plus = batch_loss(&work, vocab, examples)?;
            work.tensors_mut()[ti].1[i] = original - h;
            let loss_minus = batch_loss(&work, vocab, examples)?;
            work.tensors_mut()[ti].1[i] = original;
            let numeric = (loss_plus - loss_minus) / (2.0 * h);
            let analytic = grads.tensors()[ti].1[i];
            tensor_max = tensor_max.max(rel_err(analytic, numeric));
        }
        if tensor_max > max_rel {
            max_rel = tensor_max;
            worst = name.clone();
        }
        per_tensor.push((name, tensor_max));
    }
    Ok(GradCheckReport {
        max_rel_err: max_rel,
        worst_tensor: worst,
        per_tensor,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::doc::{Document, OcrToken};
    use crate::layout_hash::BoundingBox;
    use crate::model::{tokenize, LayoutMode, ModelConfig};

    fn toy_doc() -> Document {
        let boxes = [
            (0.0, 0.0),
            (60.0, 0.0),
            (0.0, 40.0),
            (60.0, 40.0),
        ];
        Document {
            id: "d".into(),
            tokens: boxes
                .iter()
                .enumerate()
                .map(|(i, &(x, y))| {
                    OcrToken::new(
                        format!("w{i}"),
                        BoundingBox::new(x, y, x + 20.0, y + 10.0).unwrap(),
                    )
                })
                .collect(),
        }
    }

    fn toy_setup(mode: LayoutMode) -> (ModelParams, Vocabulary, Vec<Example>) {
        let doc = toy_doc();
        let vocab = Vocabulary::build(["w0", "w1", "w2", "w3", "ask"]);
        let cfg = ModelConfig {
            d_model: 8,
            n_heads: 2,
            ff_dim: 16,
            n_enc_layers: 1,
            n_dec_layers: 1,
            levels: 4,
            max_input_len: 16,
            max_target_len: 6,
            layout_mode: mode,
            per_dim_ratio: false,
            rho_init: 0.5,
        };
        let params = ModelParams::init(&cfg, vocab.len(), 11).unwrap();
        let input = tokenize("ask w2", &doc, &vocab, cfg.levels, cfg.max_input_len).unwrap();
        let examples = vec![
            Example {
                input: input.clone(),
                target: vec![vocab.id_or_unk("w3"), vocab.eos_id()],
            },
            Example {
                input,
                target: vec![vocab.id_or_unk("w1"), vocab.eos_id()],
            },
        ];
        (params, vocab, examples)
    }

    #[test]
    fn uniform_logits_loss_is_ln_k() {
        let logits = Mat::zeros(3, 7);
        let (loss, d) = cross_entropy_loss(&logits, &[1, 2, 3]);
        assert!((loss / 3.0 - (7.0f64).ln()).abs() < 1e-12);
        // Gradient rows sum to zero.
        for r in 0..3 {
            let s: f64 = d.row(r).iter().sum();
            assert!(s.abs() < 1e-12);
        }
    }

    #[test]
    fn gradients_match_finite_differences() {
        let (params, vocab, examples) = toy_setup(LayoutMode::Ratio);
        let report = grad_check(&params, &vocab, &examples, 1e-5).unwrap();
        assert!(
            report.max_rel_err < 1e-4,
            "max rel err {} in {}",
            report.max_rel_err,
            report.worst_tensor
        );
        // rho must actually receive gradient signal.
        let rho_err = report
            .per_tensor
            .iter()
            .find(|(n, _)| n == "rho")
            .map(|(_, e)| *e)
            .unwrap();
        assert!(rho_err < 1e-4);
    }

    #[test]
    fn gradients_match_for_per_dim_ratio_and_ablations() {
        for mode in [LayoutMode::NoRatio, LayoutMode::TextOnly] {
            let (params, vocab, examples) = toy_setup(mode);
            let report = grad_check(&params, &vocab, &examples, 1e-5).unwrap();
            assert!(report.max_rel_err < 1e-4, "{mode:?}: {}", report.max_rel_err);
        }
        let (mut params, vocab, examples) = toy_setup(LayoutMode::Ratio);
        params.config.per_dim_ratio = true;
        params.rho = vec![0.5; params.config.d_model];
        let report = grad_check(&params, &vocab, &examples, 1e-5).unwrap();
        assert!(report.max_rel_err < 1e-4, "per-dim: {}", report.max_rel_err);
    }

    #[test]
    fn rho_gradient_is_nonzero_with_live_layout() {
        let (params, vocab, examples) = toy_setup(LayoutMode::Ratio);
        let mut grads = params.zeros_like();
        let refs: Vec<&Example> = examples.iter().collect();
        batch_backward(&params, &vocab, &refs, &mut grads).unwrap();
        assert!(grads.rho[0].abs() > 0.0);
    }

    #[test]
    fn memorizes_single_example() {
        let (mut params, vocab, examples) = toy_setup(LayoutMode::Ratio);
        let one = vec![examples[0].clone()];
        let cfg = TrainConfig {
            steps: 500,
            batch_size: 1,
            lr: 5e-3,
            warmup_steps: 10,
            seed: 5,
            log_every: 0,
        };
        let report = train(&mut params, &vocab, &one, &cfg).unwrap();
        assert!(report.final_loss < 0.01, "loss {}", report.final_loss);
        let answer = generate(&params, &vocab, &one[0].input, 4).unwrap();
        assert_eq!(answer, "w3");
    }

    #[test]
    fn training_is_seed_deterministic() {
        let make = || {
            let (mut params, vocab, examples) = toy_setup(LayoutMode::Ratio);
            let cfg = TrainConfig {
                steps: 40,
                batch_size: 2,
                lr: 1e-3,
                warmup_steps: 10,
                seed: 9,
                log_every: 0,
            };
            train(&mut params, &vocab, &examples, &cfg).unwrap();
            params
        };
        let a = make();
        let b = make();
        assert_eq!(a, b);
    }

    #[test]
    fn generate_never_emits_pad_or_bos() {
        let (params, vocab, examples) = toy_setup(LayoutMode::Ratio);
        let text = generate(&params, &vocab, &examples[0].input, 8).unwrap();
        assert!(!text.contains("<pad>"));
        assert!(!text.contains("<bos>"));
    }
}
