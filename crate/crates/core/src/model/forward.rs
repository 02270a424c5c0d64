//! Forward pass: causal pre-norm decoder layers, final layer norm, then
//! per-position logits routed by the kind of the target token.

use super::scalar::Scalar;
use super::tensor::{add_bias, dot, matmul, softmax_in_place, Mat};
use super::{LayerNormParams, WasaModel, LN_EPS};
use crate::error::{Error, Result};
use crate::tokenizer::{Block, PAD};

/// Per-position output routed to the word head (V-way) or the watermark
/// head (V'-way); `Pad` where the target is `[PAD]`.
#[derive(Debug, Clone, PartialEq)]
pub enum Routed<S> {
    Pad,
    Word(Vec<S>),
    Wtm(Vec<S>),
}

impl<S> Routed<S> {
    pub fn values(&self) -> Option<&[S]> {
        match self {
            Routed::Pad => None,
            Routed::Word(v) | Routed::Wtm(v) => Some(v),
        }
    }
}

#[derive(Debug, Clone)]
pub(super) struct LayerTrace<S> {
    pub ln1_out: Mat<S>,
    pub ln1_mean: Vec<S>,
    pub ln1_rstd: Vec<S>,
    pub qkv: Mat<S>,
    /// Per head: T×T lower-triangular attention probabilities.
    pub att: Vec<Mat<S>>,
    /// Concatenated per-head context vectors, T×E.
    pub ctx: Mat<S>,
    /// Residual stream after the attention block.
    pub x_mid: Mat<S>,
    pub ln2_out: Mat<S>,
    pub ln2_mean: Vec<S>,
    pub ln2_rstd: Vec<S>,
    pub fc1: Mat<S>,
    pub gelu: Mat<S>,
    /// Residual stream after the feed-forward block (layer output).
    pub x_out: Mat<S>,
}

/// Activations of one forward pass, kept for the backward pass.
#[derive(Debug, Clone)]
pub struct ForwardTrace<S> {
    pub(super) x0: Mat<S>,
    pub(super) layers: Vec<LayerTrace<S>>,
    pub(super) lnf_mean: Vec<S>,
    pub(super) lnf_rstd: Vec<S>,
    /// Final hidden states after the last layer norm, T×E.
    pub hidden: Mat<S>,
    /// Entry `p` is the prediction for the target at position `p+1`.
    pub logits: Vec<Routed<S>>,
    /// Softmax of `logits`, same routing.
    pub probs: Vec<Routed<S>>,
}

/// Separated losses of one block: mean cross-entropy per routed family.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Losses {
    pub lm: f64,
    pub wtm: f64,
    pub total: f64,
    pub word_targets: usize,
    pub wtm_targets: usize,
}

pub(super) fn layer_norm<S: Scalar>(
    x: &Mat<S>,
    params: &LayerNormParams<S>,
    out: &mut Mat<S>,
    means: &mut Vec<S>,
    rstds: &mut Vec<S>,
) {
    let e = x.cols();
    let inv_e = S::from_f64(1.0 / e as f64);
    let eps = S::from_f64(LN_EPS);
    means.clear();
    rstds.clear();
    for t in 0..x.rows() {
        let row = x.row(t);
        let mean = row.iter().copied().sum::<S>() * inv_e;
        let var = row.iter().map(|&v| (v - mean) * (v - mean)).sum::<S>() * inv_e;
        let rstd = (var + eps).sqrt().recip();
        let o = out.row_mut(t);
        for ((o, &v), (&g, &b)) in o.iter_mut().zip(row).zip(params.gain.iter().zip(&params.bias)) {
            *o = (v - mean) * rstd * g + b;
        }
        means.push(mean);
        rstds.push(rstd);
    }
}

pub(super) fn gelu<S: Scalar>(x: S) -> S {
    let c = S::from_f64((2.0 / std::f64::consts::PI).sqrt());
    let k = S::from_f64(0.044715);
    let half = S::from_f64(0.5);
    let inner = c * (x + k * x * x * x);
    half * x * (S::one() + inner.tanh())
}

pub(super) fn gelu_grad<S: Scalar>(x: S) -> S {
    let c = S::from_f64((2.0 / std::f64::consts::PI).sqrt());
    let k = S::from_f64(0.044715);
    let half = S::from_f64(0.5);
    let three = S::from_f64(3.0);
    let inner = c * (x + k * x * x * x);
    let t = inner.tanh();
    half * (S::one() + t) + half * x * (S::one() - t * t) * c * (S::one() + three * k * x * x)
}

impl<S: Scalar> WasaModel<S> {
    fn check_block(&self, block: &Block) -> Result<()> {
        if block.len() > self.config.block_size {
            return Err(Error::ShapeMismatch(format!(
                "block of {} tokens exceeds context {}",
                block.len(),
                self.config.block_size
            )));
        }
        if let Some(&id) = block.ids.iter().find(|&&id| id as usize >= self.config.total_vocab()) {
            return Err(Error::ShapeMismatch(format!(
                "token id {id} outside vocabulary of {}",
                self.config.total_vocab()
            )));
        }
        Ok(())
    }

    /// Runs the block through the network and routes every position's
    /// prediction by the kind of its target token.
    pub fn forward(&self, block: &Block) -> Result<ForwardTrace<S>> {
        self.check_block(block)?;
        let cfg = &self.config;
        let t_len = block.len();
        let e = cfg.embed;
        let heads = cfg.heads;
        let d = cfg.head_dim();
        let scale = S::from_f64(1.0 / (d as f64).sqrt());

        let mut x = Mat::zeros(t_len, e);
        for (t, &id) in block.ids.iter().enumerate() {
            let row = x.row_mut(t);
            for ((r, &w), &p) in row
                .iter_mut()
                .zip(self.params.wte.row(id as usize))
                .zip(self.params.wpe.row(t))
            {
                *r = w + p;
            }
        }
        let x0 = x.clone();

        let mut layers = Vec::with_capacity(cfg.layers);
        for layer in &self.params.layers {
            let mut ln1_out = Mat::zeros(t_len, e);
            let mut ln1_mean = Vec::new();
            let mut ln1_rstd = Vec::new();
            layer_norm(&x, &layer.ln1, &mut ln1_out, &mut ln1_mean, &mut ln1_rstd);

            let mut qkv = Mat::zeros(t_len, 3 * e);
            matmul(&ln1_out, &layer.qkv_w, &mut qkv);
            add_bias(&mut qkv, &layer.qkv_b);

            let mut att: Vec<Mat<S>> = Vec::with_capacity(heads);
            let mut ctx = Mat::zeros(t_len, e);
            for h in 0..heads {
                let q_off = h * d;
                let k_off = e + h * d;
                let v_off = 2 * e + h * d;
                let mut probs = Mat::zeros(t_len, t_len);
                for t in 0..t_len {
                    let q = &qkv.row(t)[q_off..q_off + d];
                    let row = probs.row_mut(t);
                    for s in 0..=t {
                        row[s] = dot(q, &qkv.row(s)[k_off..k_off + d]) * scale;
                    }
                    softmax_in_place(&mut row[..=t]);
                    let (head_ctx, weights) = (&mut ctx.row_mut(t)[q_off..q_off + d], row);
                    for s in 0..=t {
                        let v = &qkv.row(s)[v_off..v_off + d];
                        let w = weights[s];
                        for (c, &vv) in head_ctx.iter_mut().zip(v) {
                            *c += w * vv;
                        }
                    }
                }
                att.push(probs);
            }

            let mut proj = Mat::zeros(t_len, e);
            matmul(&ctx, &layer.proj_w, &mut proj);
            add_bias(&mut proj, &layer.proj_b);
            let mut x_mid = x.clone();
            for t in 0..t_len {
                super::tensor::add_assign(x_mid.row_mut(t), proj.row(t));
            }

            let mut ln2_out = Mat::zeros(t_len, e);
            let mut ln2_mean = Vec::new();
            let mut ln2_rstd = Vec::new();
            layer_norm(&x_mid, &layer.ln2, &mut ln2_out, &mut ln2_mean, &mut ln2_rstd);

            let mut fc1 = Mat::zeros(t_len, 4 * e);
            matmul(&ln2_out, &layer.fc1_w, &mut fc1);
            add_bias(&mut fc1, &layer.fc1_b);
            let mut act = Mat::zeros(t_len, 4 * e);
            for (a, &f) in act.data_mut().iter_mut().zip(fc1.data()) {
                *a = gelu(f);
            }
            let mut fc2 = Mat::zeros(t_len, e);
            matmul(&act, &layer.fc2_w, &mut fc2);
            add_bias(&mut fc2, &layer.fc2_b);

            let mut x_out = x_mid.clone();
            for t in 0..t_len {
                super::tensor::add_assign(x_out.row_mut(t), fc2.row(t));
            }

            layers.push(LayerTrace {
                ln1_out,
                ln1_mean,
                ln1_rstd,
                qkv,
                att,
                ctx,
                x_mid,
                ln2_out,
                ln2_mean,
                ln2_rstd,
                fc1,
                gelu: act,
                x_out,
            });
            x = layers.last().unwrap().x_out.clone();
        }

        let mut hidden = Mat::zeros(t_len, e);
        let mut lnf_mean = Vec::new();
        let mut lnf_rstd = Vec::new();
        layer_norm(&x, &self.params.lnf, &mut hidden, &mut lnf_mean, &mut lnf_rstd);

        let v = cfg.vocab_words;
        let v_w = cfg.vocab_watermarks;
        let mut logits = Vec::with_capacity(t_len.saturating_sub(1));
        let mut probs = Vec::with_capacity(t_len.saturating_sub(1));
        for p in 0..t_len.saturating_sub(1) {
            let target = block.ids[p + 1];
            if target == PAD {
                logits.push(Routed::Pad);
                probs.push(Routed::Pad);
                continue;
            }
            let h = hidden.row(p);
            if (target as usize) < v {
                let z: Vec<S> = (0..v).map(|r| dot(h, self.params.wte.row(r))).collect();
                let mut p_u = z.clone();
                softmax_in_place(&mut p_u);
                logits.push(Routed::Word(z));
                probs.push(Routed::Word(p_u));
            } else {
                let z: Vec<S> = (v..v + v_w).map(|r| dot(h, self.params.wte.row(r))).collect();
                let mut p_w = z.clone();
                softmax_in_place(&mut p_w);
                logits.push(Routed::Wtm(z));
                probs.push(Routed::Wtm(p_w));
            }
        }

        Ok(ForwardTrace {
            x0,
            layers,
            lnf_mean,
            lnf_rstd,
            hidden,
            logits,
            probs,
        })
    }

    /// Mean cross-entropy per routed family; `total = lm + wtm`. Positions
    /// whose target is `[PAD]` contribute to neither.
    pub fn loss(&self, trace: &ForwardTrace<S>, block: &Block) -> Losses {
        let v = self.config.vocab_words;
        let mut lm_sum = 0.0;
        let mut lm_n = 0usize;
        let mut wtm_sum = 0.0;
        let mut wtm_n = 0usize;
        for (p, routed) in trace.probs.iter().enumerate() {
            let target = block.ids[p + 1] as usize;
            match routed {
                Routed::Pad => {}
                Routed::Word(probs) => {
                    lm_sum += -(probs[target].to_f64().max(f64::MIN_POSITIVE)).ln();
                    lm_n += 1;
                }
                Routed::Wtm(probs) => {
                    wtm_sum += -(probs[target - v].to_f64().max(f64::MIN_POSITIVE)).ln();
                    wtm_n += 1;
                }
            }
        }
        let lm = if lm_n > 0 { lm_sum / lm_n as f64 } else { 0.0 };
        let wtm = if wtm_n > 0 { wtm_sum / wtm_n as f64 } else { 0.0 };
        Losses {
            lm,
            wtm,
            total: lm + wtm,
            word_targets: lm_n,
            wtm_targets: wtm_n,
        }
    }

    /// Total loss of a block, for finite-difference checks and perplexity.
    pub fn loss_of_block(&self, block: &Block) -> Result<Losses> {
        let trace = self.forward(block)?;
        Ok(self.loss(&trace, block))
    }
}
