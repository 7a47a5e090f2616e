//! Forward pass and handwritten backpropagation.
//!
//! Pre-norm transformer blocks: `x + attn(ln(x))` then `x + ff(ln(x))`,
//! with a final layer norm on each stack and a tanh feed-forward. The
//! decoder adds causal masking and cross-attention over the encoder
//! output. Backward mirrors forward block by block; gradients accumulate
//! into a zeroed [`ModelParams`] so batches are plain sums.

use super::input::{layout_terms, omega_vector, TokenizedInput};
use super::mat::Mat;
use super::{Attention, FeedForward, LayerNorm, LayoutMode, ModelError, ModelParams};
use crate::vocab::Vocabulary;

const LN_EPS: f64 = 1e-5;

pub fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

#[inline]
fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn add_rows(x: &mut Mat, delta: &Mat) {
    debug_assert_eq!(x.shape(), delta.shape());
    for (o, d) in x.data.iter_mut().zip(&delta.data) {
        *o += d;
    }
}

struct LnCache {
    x_hat: Mat,
    inv_std: Vec<f64>,
}

fn layer_norm(x: &Mat, ln: &LayerNorm) -> (Mat, LnCache) {
    let (rows, d) = x.shape();
    let mut out = Mat::zeros(rows, d);
    let mut x_hat = Mat::zeros(rows, d);
    let mut inv_std = vec![0.0; rows];
    for r in 0..rows {
        let row = x.row(r);
        let mean = row.iter().sum::<f64>() / d as f64;
        let var = row.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / d as f64;
        let inv = 1.0 / (var + LN_EPS).sqrt();
        inv_std[r] = inv;
        for c in 0..d {
            let xh = (row[c] - mean) * inv;
            x_hat.data[r * d + c] = xh;
            out.data[r * d + c] = ln.gamma[c] * xh + ln.beta[c];
        }
    }
    (out, LnCache { x_hat, inv_std })
}

fn layer_norm_backward(
    d_out: &Mat,
    cache: &LnCache,
    ln: &LayerNorm,
    g_ln: &mut LayerNorm,
    dx: &mut Mat,
) {
    let (rows, d) = d_out.shape();
    for r in 0..rows {
        let dy = d_out.row(r);
        let xh = cache.x_hat.row(r);
        let inv = cache.inv_std[r];
        let mut mean_dxh = 0.0;
        let mut mean_dxh_xh = 0.0;
        for c in 0..d {
            g_ln.gamma[c] += dy[c] * xh[c];
            g_ln.beta[c] += dy[c];
            let dxh = dy[c] * ln.gamma[c];
            mean_dxh += dxh;
            mean_dxh_xh += dxh * xh[c];
        }
        mean_dxh /= d as f64;
        mean_dxh_xh /= d as f64;
        let dx_row = dx.row_mut(r);
        for c in 0..d {
            let dxh = dy[c] * ln.gamma[c];
            dx_row[c] += inv * (dxh - mean_dxh - xh[c] * mean_dxh_xh);
        }
    }
}

struct AttnCache {
    input_normed: Mat,
    /// Key/value source when it differs from the query input (cross
    /// attention); self attention reads keys from `input_normed`.
    keys_src: Option<Mat>,
    q: Mat,
    k: Mat,
    v: Mat,
    probs: Vec<Mat>,
    ctx: Mat,
}

impl AttnCache {
    fn keys(&self) -> &Mat {
        self.keys_src.as_ref().unwrap_or(&self.input_normed)
    }
}

fn attention(
    params: &Attention,
    n_heads: usize,
    input_normed: Mat,
    keys_src: Option<Mat>,
    causal: bool,
) -> (Mat, AttnCache) {
    let d = params.wq.cols;
    let dh = d / n_heads;
    let scale = 1.0 / (dh as f64).sqrt();
    let keys_ref = keys_src.as_ref().unwrap_or(&input_normed);
    let q = input_normed.matmul(&params.wq);
    let k = keys_ref.matmul(&params.wk);
    let v = keys_ref.matmul(&params.wv);
    let (tq, tk) = (q.rows, k.rows);
    let mut ctx = Mat::zeros(tq, d);
    let mut probs = Vec::with_capacity(n_heads);
    let mut scores = vec![0.0f64; tk];
    for h in 0..n_heads {
        let c0 = h * dh;
        let mut p = Mat::zeros(tq, tk);
        for i in 0..tq {
            let limit = if causal { (i + 1).min(tk) } else { tk };
            if limit == 0 {
                continue;
            }
            let qi = &q.row(i)[c0..c0 + dh];
            let mut max_s = f64::NEG_INFINITY;
            for (j, slot) in scores.iter_mut().enumerate().take(limit) {
                let s = dot(qi, &k.row(j)[c0..c0 + dh]) * scale;
                *slot = s;
                max_s = max_s.max(s);
            }
            let mut sum = 0.0;
            for slot in scores.iter_mut().take(limit) {
                *slot = (*slot - max_s).exp();
                sum += *slot;
            }
            let p_row = p.row_mut(i);
            for j in 0..limit {
                p_row[j] = scores[j] / sum;
            }
            let ctx_row = ctx.row_mut(i);
            for (j, &pj) in p_row.iter().enumerate().take(limit) {
                if pj == 0.0 {
                    continue;
                }
                let vj = &v.row(j)[c0..c0 + dh];
                for m in 0..dh {
                    ctx_row[c0 + m] += pj * vj[m];
                }
            }
        }
        probs.push(p);
    }
    let out = ctx.matmul(&params.wo);
    (
        out,
        AttnCache {
            input_normed,
            keys_src,
            q,
            k,
            v,
            probs,
            ctx,
        },
    )
}

/// Returns gradients w.r.t. the query input and the key/value source.
fn attention_backward(
    d_out: &Mat,
    cache: &AttnCache,
    params: &Attention,
    n_heads: usize,
    g: &mut Attention,
) -> (Mat, Mat) {
    let d = params.wo.rows;
    let dh = d / n_heads;
    let scale = 1.0 / (dh as f64).sqrt();
    cache.ctx.transpose_matmul_into(d_out, &mut g.wo);
    let dctx = d_out.matmul_transpose(&params.wo);
    let (tq, tk) = (dctx.rows, cache.k.rows);
    let mut dq = Mat::zeros(tq, d);
    let mut dk = Mat::zeros(tk, d);
    let mut dv = Mat::zeros(tk, d);
    let mut dp = vec![0.0f64; tk];
    for h in 0..n_heads {
        let c0 = h * dh;
        let p = &cache.probs[h];
        for i in 0..tq {
            let dctx_i = &dctx.row(i)[c0..c0 + dh];
            let p_row = p.row(i);
            let mut dot_pp = 0.0;
            for j in 0..tk {
                let pj = p_row[j];
                if pj == 0.0 {
                    dp[j] = 0.0;
                    continue;
                }
                let vj = &cache.v.row(j)[c0..c0 + dh];
                let acc = dot(dctx_i, vj);
                dp[j] = acc;
                dot_pp += acc * pj;
            }
            for j in 0..tk {
                let pj = p_row[j];
                if pj == 0.0 {
                    continue;
                }
                let ds = pj * (dp[j] - dot_pp) * scale;
                let qi = &cache.q.row(i)[c0..c0 + dh];
                let kj = &cache.k.row(j)[c0..c0 + dh];
                {
                    let dq_i = &mut dq.row_mut(i)[c0..c0 + dh];
                    for m in 0..dh {
                        dq_i[m] += ds * kj[m];
                    }
                }
                {
                    let dk_j = &mut dk.row_mut(j)[c0..c0 + dh];
                    for m in 0..dh {
                        dk_j[m] += ds * qi[m];
                    }
                }
                let dv_j = &mut dv.row_mut(j)[c0..c0 + dh];
                for m in 0..dh {
                    dv_j[m] += pj * dctx_i[m];
                }
            }
        }
    }
    cache.input_normed.transpose_matmul_into(&dq, &mut g.wq);
    cache.keys().transpose_matmul_into(&dk, &mut g.wk);
    cache.keys().transpose_matmul_into(&dv, &mut g.wv);
    let d_input = dq.matmul_transpose(&params.wq);
    let mut d_keys = dk.matmul_transpose(&params.wk);
    add_rows(&mut d_keys, &dv.matmul_transpose(&params.wv));
    (d_input, d_keys)
}

struct FfCache {
    input_normed: Mat,
    h_act: Mat,
}

fn feed_forward(params: &FeedForward, input_normed: Mat) -> (Mat, FfCache) {
    let mut h = input_normed.matmul(&params.w1);
    for r in 0..h.rows {
        let row = h.row_mut(r);
        for (v, &b) in row.iter_mut().zip(&params.b1) {
            *v = (*v + b).tanh();
        }
    }
    let mut out = h.matmul(&params.w2);
    for r in 0..out.rows {
        let row = out.row_mut(r);
        for (v, &b) in row.iter_mut().zip(&params.b2) {
            *v += b;
        }
    }
    (
        out,
        FfCache {
            input_normed,
            h_act: h,
        },
    )
}

fn feed_forward_backward(
    d_out: &Mat,
    cache: &FfCache,
    params: &FeedForward,
    g: &mut FeedForward,
) -> Mat {
    for r in 0..d_out.rows {
        for (gb, &dv) in g.b2.iter_mut().zip(d_out.row(r)) {
            *gb += dv;
        }
    }
    cache.h_act.transpose_matmul_into(d_out, &mut g.w2);
    let mut dh = d_out.matmul_transpose(&params.w2);
    for r in 0..dh.rows {
        let h_row = cache.h_act.row(r);
        let dh_row = dh.row_mut(r);
        for (dv, &hv) in dh_row.iter_mut().zip(h_row) {
            *dv *= 1.0 - hv * hv;
        }
        for (gb, &dv) in g.b1.iter_mut().zip(&*dh_row) {
            *gb += dv;
        }
    }
    cache.input_normed.transpose_matmul_into(&dh, &mut g.w1);
    dh.matmul_transpose(&params.w1)
}

struct EncLayerCache {
    ln_attn: LnCache,
    attn: AttnCache,
    ln_ff: LnCache,
    ff: FfCache,
}

struct DecLayerCache {
    ln_self: LnCache,
    self_attn: AttnCache,
    ln_cross: LnCache,
    cross_attn: AttnCache,
    ln_ff: LnCache,
    ff: FfCache,
}

/// Everything backward needs from one sample's forward pass.
pub struct SampleCache {
    enc_ids: Vec<u32>,
    letter_ids: Vec<Vec<u32>>,
    letter_mean: Mat,
    enc_layers: Vec<EncLayerCache>,
    enc_norm: LnCache,
    dec_ids: Vec<u32>,
    dec_layers: Vec<DecLayerCache>,
    dec_norm: LnCache,
    dec_out: Mat,
}

/// Run the full encoder-decoder stack; `prefix` is the decoder input
/// (BOS followed by the already-emitted target tokens). Returns per-step
/// logits over the vocabulary.
pub fn forward(
    params: &ModelParams,
    vocab: &Vocabulary,
    input: &TokenizedInput,
    prefix: &[u32],
) -> Result<(Mat, SampleCache), ModelError> {
    let cfg = &params.config;
    let d = cfg.d_model;
    let t_len = input.len();
    if t_len > params.pos.rows || prefix.len() > params.pos.rows {
        return Err(ModelError::Config(format!(
            "sequence length {} exceeds position table {}",
            t_len.max(prefix.len()),
            params.pos.rows
        )));
    }
    if prefix.is_empty() {
        return Err(ModelError::Config("empty decoder prefix".into()));
    }

    // Encoder input: semantic + gated letter mean + position.
    let (letter_ids, letter_mean) = if cfg.layout_mode == LayoutMode::TextOnly {
        (Vec::new(), Mat::zeros(t_len, d))
    } else {
        layout_terms(&input.letters, &params.embed, vocab)?
    };
    let omega = omega_vector(&params.rho, cfg.layout_mode, d);
    let mut x = Mat::zeros(t_len, d);
    for t in 0..t_len {
        let row = x.row_mut(t);
        let emb = params.embed.row(input.ids[t] as usize);
        let pos = params.pos.row(t);
        let m = letter_mean.row(t);
        match cfg.layout_mode {
            LayoutMode::TextOnly => {
                for c in 0..d {
                    row[c] = emb[c] + pos[c];
                }
            }
            LayoutMode::NoRatio => {
                for c in 0..d {
                    row[c] = emb[c] + m[c] + pos[c];
                }
            }
            LayoutMode::Ratio => {
                for c in 0..d {
                    row[c] = emb[c] + omega[c] * m[c] + pos[c];
                }
            }
        }
    }

    let mut enc_layers = Vec::with_capacity(cfg.n_enc_layers);
    for layer in &params.enc_layers {
        let (normed, ln_attn) = layer_norm(&x, &layer.ln_attn);
        let (attn_out, attn) = attention(&layer.attn, cfg.n_heads, normed, None, false);
        add_rows(&mut x, &attn_out);
        let (normed, ln_ff) = layer_norm(&x, &layer.ln_ff);
        let (ff_out, ff) = feed_forward(&layer.ff, normed);
        add_rows(&mut x, &ff_out);
        enc_layers.push(EncLayerCache {
            ln_attn,
            attn,
            ln_ff,
            ff,
        });
    }
    let (enc_out, enc_norm) = layer_norm(&x, &params.enc_norm);

    // Decoder.
    let s_len = prefix.len();
    let mut y = Mat::zeros(s_len, d);
    for s in 0..s_len {
        let row = y.row_mut(s);
        let emb = params.embed.row(prefix[s] as usize);
        let pos = params.pos.row(s);
        for c in 0..d {
            row[c] = emb[c] + pos[c];
        }
    }
    let mut dec_layers = Vec::with_capacity(cfg.n_dec_layers);
    for layer in &params.dec_layers {
        let (normed, ln_self) = layer_norm(&y, &layer.ln_self);
        let (attn_out, self_attn) = attention(&layer.self_attn, cfg.n_heads, normed, None, true);
        add_rows(&mut y, &attn_out);
        let (normed, ln_cross) = layer_norm(&y, &layer.ln_cross);
        let (cross_out, cross_attn) =
            attention(&layer.cross_attn, cfg.n_heads, normed, Some(enc_out.clone()), false);
        add_rows(&mut y, &cross_out);
        let (normed, ln_ff) = layer_norm(&y, &layer.ln_ff);
        let (ff_out, ff) = feed_forward(&layer.ff, normed);
        add_rows(&mut y, &ff_out);
        dec_layers.push(DecLayerCache {
            ln_self,
            self_attn,
            ln_cross,
            cross_attn,
            ln_ff,
            ff,
        });
    }
    let (dec_out, dec_norm) = layer_norm(&y, &params.dec_norm);

    let mut logits = dec_out.matmul(&params.out_w);
    for r in 0..logits.rows {
        let row = logits.row_mut(r);
        for (v, &b) in row.iter_mut().zip(&params.out_b) {
            *v += b;
        }
    }

    Ok((
        logits,
        SampleCache {
            enc_ids: input.ids.clone(),
            letter_ids,
            letter_mean,
            enc_layers,
            enc_norm,
            dec_ids: prefix.to_vec(),
            dec_layers,
            dec_norm,
            dec_out,
        },
    ))
}

/// Accumulate gradients for one sample into `grads` (a zeroed or partially
/// accumulated [`ModelParams::zeros_like`] container).
pub(super) fn backward(
    params: &ModelParams,
    cache: &SampleCache,
    d_logits: &Mat,
    grads: &mut ModelParams,
) {
    let cfg = &params.config;
    let d = cfg.d_model;
    let t_len = cache.enc_ids.len();
    let s_len = cache.dec_ids.len();

    // Output projection.
    cache.dec_out.transpose_matmul_into(d_logits, &mut grads.out_w);
    for r in 0..d_logits.rows {
        for (gb, &dv) in grads.out_b.iter_mut().zip(d_logits.row(r)) {
            *gb += dv;
        }
    }
    let dy_post = d_logits.matmul_transpose(&params.out_w);
    let mut dy = Mat::zeros(s_len, d);
    layer_norm_backward(&dy_post, &cache.dec_norm, &params.dec_norm, &mut grads.dec_norm, &mut dy);

    let mut d_enc_out = Mat::zeros(t_len, d);
    for li in (0..params.dec_layers.len()).rev() {
        let layer = &params.dec_layers[li];
        let lcache = &cache.dec_layers[li];
        let glayer = &mut grads.dec_layers[li];

        let d_normed = feed_forward_backward(&dy, &lcache.ff, &layer.ff, &mut glayer.ff);
        layer_norm_backward(&d_normed, &lcache.ln_ff, &layer.ln_ff, &mut glayer.ln_ff, &mut dy);

        let (d_normed_q, d_keys) = attention_backward(
            &dy,
            &lcache.cross_attn,
            &layer.cross_attn,
            cfg.n_heads,
            &mut glayer.cross_attn,
        );
        add_rows(&mut d_enc_out, &d_keys);
        layer_norm_backward(
            &d_normed_q,
            &lcache.ln_cross,
            &layer.ln_cross,
            &mut glayer.ln_cross,
            &mut dy,
        );

        let (d_normed_q, d_keys) = attention_backward(
            &dy,
            &lcache.self_attn,
            &layer.self_attn,
            cfg.n_heads,
            &mut glayer.self_attn,
        );
        let mut d_normed_total = d_normed_q;
        add_rows(&mut d_normed_total, &d_keys);
        layer_norm_backward(
            &d_normed_total,
            &lcache.ln_self,
            &layer.ln_self,
            &mut glayer.ln_self,
            &mut dy,
        );
    }
    for s in 0..s_len {
        let dvec = dy.row(s);
        let erow = grads.embed.row_mut(cache.dec_ids[s] as usize);
        for c in 0..d {
            erow[c] += dvec[c];
        }
        let prow = grads.pos.row_mut(s);
        for c in 0..d {
            prow[c] += dvec[c];
        }
    }

    // Encoder stack, seeded by the cross-attention key/value gradients.
    let mut dx = Mat::zeros(t_len, d);
    layer_norm_backward(&d_enc_out, &cache.enc_norm, &params.enc_norm, &mut grads.enc_norm, &mut dx);
    for li in (0..params.enc_layers.len()).rev() {
        let layer = &params.enc_layers[li];
        let lcache = &cache.enc_layers[li];
        let glayer = &mut grads.enc_layers[li];

        let d_normed = feed_forward_backward(&dx, &lcache.ff, &layer.ff, &mut glayer.ff);
        layer_norm_backward(&d_normed, &lcache.ln_ff, &layer.ln_ff, &mut glayer.ln_ff, &mut dx);

        let (d_normed_q, d_keys) = attention_backward(
            &dx,
            &lcache.attn,
            &layer.attn,
            cfg.n_heads,
            &mut glayer.attn,
        );
        let mut d_normed_total = d_normed_q;
        add_rows(&mut d_normed_total, &d_keys);
        layer_norm_backward(
            &d_normed_total,
            &lcache.ln_attn,
            &layer.ln_attn,
            &mut glayer.ln_attn,
            &mut dx,
        );
    }

    // Encoder input: semantic rows, positions, and the layout channel.
    for t in 0..t_len {
        let dvec = dx.row(t);
        let erow = grads.embed.row_mut(cache.enc_ids[t] as usize);
        for c in 0..d {
            erow[c] += dvec[c];
        }
        let prow = grads.pos.row_mut(t);
        for c in 0..d {
            prow[c] += dvec[c];
        }
    }
    match cfg.layout_mode {
        LayoutMode::TextOnly => {}
        LayoutMode::NoRatio => {
            let inv_levels = 1.0 / cache.letter_ids.len() as f64;
            for level in &cache.letter_ids {
                for t in 0..t_len {
                    let dvec = dx.row(t);
                    let erow = grads.embed.row_mut(level[t] as usize);
                    for c in 0..d {
                        erow[c] += dvec[c] * inv_levels;
                    }
                }
            }
        }
        LayoutMode::Ratio => {
            let omega = omega_vector(&params.rho, LayoutMode::Ratio, d);
            if params.rho.len() == 1 {
                let w = omega[0];
                let mut d_omega = 0.0;
                for t in 0..t_len {
                    d_omega += dot(dx.row(t), cache.letter_mean.row(t));
                }
                grads.rho[0] += w * (1.0 - w) * d_omega;
            } else {
                for c in 0..d {
                    let mut d_omega_c = 0.0;
                    for t in 0..t_len {
                        d_omega_c += dx.at(t, c) * cache.letter_mean.at(t, c);
                    }
                    let w = omega[c];
                    grads.rho[c] += w * (1.0 - w) * d_omega_c;
                }
            }
            let inv_levels = 1.0 / cache.letter_ids.len() as f64;
            for level in &cache.letter_ids {
                for t in 0..t_len {
                    let dvec = dx.row(t);
                    let erow = grads.embed.row_mut(level[t] as usize);
                    for c in 0..d {
                        erow[c] += dvec[c] * omega[c] * inv_levels;
                    }
                }
            }
        }
    }
}
