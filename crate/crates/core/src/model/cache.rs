//! Incremental decoding with per-layer key/value caches.
//!
//! A session holds the attention keys and values of every position pushed so
//! far, so appending one token costs one position of compute. Causality
//! makes the per-step hidden states identical to a full forward pass over
//! the same prefix, which the tests check directly.

use super::forward::{gelu, layer_norm};
use super::scalar::Scalar;
use super::tensor::{add_assign, dot, softmax_in_place, Mat};
use super::{LayerNormParams, WasaModel};
use crate::error::{Error, Result};

#[derive(Debug, Clone)]
pub struct DecodeSession<'m, S: Scalar> {
    model: &'m WasaModel<S>,
    /// Per layer: rows 0..len hold the E-wide key vectors.
    keys: Vec<Mat<S>>,
    vals: Vec<Mat<S>>,
    ids: Vec<u32>,
    last_hidden: Vec<S>,
}

fn ln_row<S: Scalar>(x: &[S], params: &LayerNormParams<S>) -> Vec<S> {
    let m = Mat::from_vec(1, x.len(), x.to_vec());
    let mut out = Mat::zeros(1, x.len());
    let mut means = Vec::new();
    let mut rstds = Vec::new();
    layer_norm(&m, params, &mut out, &mut means, &mut rstds);
    out.row(0).to_vec()
}

/// out = bias + xᵀ·w for a single row vector.
fn matvec<S: Scalar>(x: &[S], w: &Mat<S>, bias: &[S]) -> Vec<S> {
    let mut out = bias.to_vec();
    for (i, &xi) in x.iter().enumerate() {
        for (o, &wij) in out.iter_mut().zip(w.row(i)) {
            *o += xi * wij;
        }
    }
    out
}

impl<'m, S: Scalar> DecodeSession<'m, S> {
    pub fn new(model: &'m WasaModel<S>) -> Self {
        let k = model.config.block_size;
        let e = model.config.embed;
        Self {
            model,
            keys: (0..model.config.layers).map(|_| Mat::zeros(k, e)).collect(),
            vals: (0..model.config.layers).map(|_| Mat::zeros(k, e)).collect(),
            ids: Vec::with_capacity(k),
            last_hidden: vec![S::zero(); e],
        }
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    pub fn ids(&self) -> &[u32] {
        &self.ids
    }

    /// Remaining capacity before the positional table runs out.
    pub fn remaining(&self) -> usize {
        self.model.config.block_size - self.len()
    }

    pub fn push(&mut self, id: u32) -> Result<()> {
        let cfg = &self.model.config;
        if id as usize >= cfg.total_vocab() {
            return Err(Error::InvalidId(id));
        }
        let t = self.ids.len();
        if t >= cfg.block_size {
            return Err(Error::ShapeMismatch(format!(
                "decode session at capacity {}",
                cfg.block_size
            )));
        }
        let e = cfg.embed;
        let heads = cfg.heads;
        let d = cfg.head_dim();
        let scale = S::from_f64(1.0 / (d as f64).sqrt());
        let params = &self.model.params;

        let mut x: Vec<S> = params
            .wte
            .row(id as usize)
            .iter()
            .zip(params.wpe.row(t))
            .map(|(&w, &p)| w + p)
            .collect();

        for (li, layer) in params.layers.iter().enumerate() {
            let a = ln_row(&x, &layer.ln1);
            let qkv = matvec(&a, &layer.qkv_w, &layer.qkv_b);
            self.keys[li].row_mut(t).copy_from_slice(&qkv[e..2 * e]);
            self.vals[li].row_mut(t).copy_from_slice(&qkv[2 * e..]);

            let mut ctx = vec![S::zero(); e];
            for h in 0..heads {
                let off = h * d;
                let q = &qkv[off..off + d];
                let mut att: Vec<S> = (0..=t)
                    .map(|s| dot(q, &self.keys[li].row(s)[off..off + d]) * scale)
                    .collect();
                softmax_in_place(&mut att);
                let ctx_h = &mut ctx[off..off + d];
                for (s, &w) in att.iter().enumerate() {
                    for (c, &v) in ctx_h.iter_mut().zip(&self.vals[li].row(s)[off..off + d]) {
                        *c += w * v;
                    }
                }
            }

            let proj = matvec(&ctx, &layer.proj_w, &layer.proj_b);
            add_assign(&mut x, &proj);

            let a2 = ln_row(&x, &layer.ln2);
            let mut f1 = matvec(&a2, &layer.fc1_w, &layer.fc1_b);
            for f in f1.iter_mut() {
                *f = gelu(*f);
            }
            let f2 = matvec(&f1, &layer.fc2_w, &layer.fc2_b);
            add_assign(&mut x, &f2);
        }

        self.last_hidden = ln_row(&x, &params.lnf);
        self.ids.push(id);
        Ok(())
    }

    pub fn prime(&mut self, ids: &[u32]) -> Result<()> {
        for &id in ids {
            self.push(id)?;
        }
        Ok(())
    }

    /// Drops everything but the most recent `keep_last` ids and replays them
    /// from position zero.
    pub fn reanchor(&mut self, keep_last: usize) -> Result<()> {
        let tail: Vec<u32> = self.ids[self.ids.len().saturating_sub(keep_last)..].to_vec();
        self.ids.clear();
        self.last_hidden.fill(S::zero());
        self.prime(&tail)
    }

    /// Word-head logits (length V) at the last pushed position.
    pub fn word_logits(&self) -> Vec<S> {
        let v = self.model.config.vocab_words;
        (0..v)
            .map(|r| dot(&self.last_hidden, self.model.params.wte.row(r)))
            .collect()
    }

    /// Watermark-head logits (length V') at the last pushed position.
    pub fn watermark_logits(&self) -> Vec<S> {
        let v = self.model.config.vocab_words;
        let vw = self.model.config.vocab_watermarks;
        (v..v + vw)
            .map(|r| dot(&self.last_hidden, self.model.params.wte.row(r)))
            .collect()
    }

    /// Log-softmax of the watermark head, in f64 for stable beam scores.
    pub fn watermark_log_probs(&self) -> Vec<f64> {
        let logits: Vec<f64> = self.watermark_logits().iter().map(|&v| Scalar::to_f64(v)).collect();
        let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let log_sum = logits.iter().map(|z| (z - max).exp()).sum::<f64>().ln() + max;
        logits.iter().map(|z| z - log_sum).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::ModelConfig;
    use crate::tokenizer::{Block, TokenKind};

    #[test]
    fn incremental_hidden_matches_full_forward() {
        let cfg = ModelConfig {
            vocab_words: 10,
            vocab_watermarks: 4,
            embed: 16,
            layers: 2,
            heads: 2,
            block_size: 12,
            frozen_layers: 0,
            seed: 21,
        };
        let model: WasaModel<f64> = WasaModel::init(cfg).unwrap();
        let ids = vec![4u32, 5, 6, 3, 10, 11, 7];
        let kinds = ids
            .iter()
            .map(|&i| if i < 10 { TokenKind::Word } else { TokenKind::Watermark })
            .collect();
        let block = Block { ids: ids.clone(), kinds };
        let trace = model.forward(&block).unwrap();

        let mut session = DecodeSession::new(&model);
        for (t, &id) in ids.iter().enumerate() {
            session.push(id).unwrap();
            for (a, b) in session.last_hidden.iter().zip(trace.hidden.row(t)) {
                assert!((a - b).abs() < 1e-10, "position {t}");
            }
        }
    }

    #[test]
    fn reanchor_equals_fresh_session_on_suffix() {
        let cfg = ModelConfig {
            vocab_words: 10,
            vocab_watermarks: 4,
            embed: 16,
            layers: 1,
            heads: 2,
            block_size: 8,
            frozen_layers: 0,
            seed: 2,
        };
        let model: WasaModel<f64> = WasaModel::init(cfg).unwrap();
        let mut s = DecodeSession::new(&model);
        s.prime(&[4, 5, 6, 7, 8, 9]).unwrap();
        s.reanchor(3).unwrap();

        let mut fresh = DecodeSession::new(&model);
        fresh.prime(&[7, 8, 9]).unwrap();
        assert_eq!(s.ids(), fresh.ids());
        for (a, b) in s.last_hidden.iter().zip(&fresh.last_hidden) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn session_capacity_is_enforced() {
        let cfg = ModelConfig {
            vocab_words: 6,
            vocab_watermarks: 2,
            embed: 8,
            layers: 1,
            heads: 1,
            block_size: 4,
            frozen_layers: 0,
            seed: 2,
        };
        let model: WasaModel<f32> = WasaModel::init(cfg).unwrap();
        let mut s = DecodeSession::new(&model);
        s.prime(&[4, 5, 4, 5]).unwrap();
        assert!(s.push(4).is_err());
        assert_eq!(s.remaining(), 0);
    }
}
