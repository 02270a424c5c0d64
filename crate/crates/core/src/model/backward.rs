//! Analytic backward pass.
//!
//! The output-side gradient at every position is assembled as one
//! (V+V')-dimensional vector that is exactly zero outside the routed head:
//! `[∇zu, 0]` for word targets and `[0, ∇zw]` for watermark targets. The
//! embedding matrix accumulates this vector's outer product with the hidden
//! state (the tied-projection path) plus the usual input-embedding path.

use super::forward::{Losses, Routed};
use super::scalar::Scalar;
use super::tensor::{accumulate_outer, add_assign, dot, matmul_transposed, Mat};
use super::{LayerNormParams, Parameters, WasaModel};
use crate::error::Result;
use crate::tokenizer::Block;

/// The padded output-side gradient of one position.
#[derive(Debug, Clone)]
pub struct DzRow<S> {
    pub position: usize,
    /// Length V+V'; exactly zero outside the target's head.
    pub dz: Vec<S>,
}

fn layer_norm_backward<S: Scalar>(
    x: &Mat<S>,
    means: &[S],
    rstds: &[S],
    params: &LayerNormParams<S>,
    dy: &Mat<S>,
    dparams: &mut LayerNormParams<S>,
    dx: &mut Mat<S>,
) {
    let e = x.cols();
    let inv_e = S::from_f64(1.0 / e as f64);
    for t in 0..x.rows() {
        let row = x.row(t);
        let dy_row = dy.row(t);
        let mean = means[t];
        let rstd = rstds[t];

        let mut sum_dxhat = S::zero();
        let mut sum_dxhat_xhat = S::zero();
        for i in 0..e {
            let xhat = (row[i] - mean) * rstd;
            let dxhat = dy_row[i] * params.gain[i];
            dparams.gain[i] += dy_row[i] * xhat;
            dparams.bias[i] += dy_row[i];
            sum_dxhat += dxhat;
            sum_dxhat_xhat += dxhat * xhat;
        }
        let mean_dxhat = sum_dxhat * inv_e;
        let mean_dxhat_xhat = sum_dxhat_xhat * inv_e;
        let dx_row = dx.row_mut(t);
        for i in 0..e {
            let xhat = (row[i] - mean) * rstd;
            let dxhat = dy_row[i] * params.gain[i];
            dx_row[i] += rstd * (dxhat - mean_dxhat - xhat * mean_dxhat_xhat);
        }
    }
}

fn bias_grad<S: Scalar>(dy: &Mat<S>, db: &mut [S]) {
    for t in 0..dy.rows() {
        add_assign(db, dy.row(t));
    }
}

impl<S: Scalar> WasaModel<S> {
    /// Forward plus backward on one block. Returns the losses and the
    /// gradients of `total` with respect to every parameter; layers below
    /// `frozen_layers` have their gradients zeroed.
    pub fn backward(&self, block: &Block) -> Result<(Losses, Parameters<S>)> {
        let (losses, grads, _) = self.backward_inner(block, false)?;
        Ok((losses, grads))
    }

    /// Like [`Self::backward`], additionally materializing the padded
    /// per-position output gradients for inspection.
    pub fn backward_traced(&self, block: &Block) -> Result<(Losses, Parameters<S>, Vec<DzRow<S>>)> {
        self.backward_inner(block, true)
    }

    fn backward_inner(
        &self,
        block: &Block,
        keep_dz: bool,
    ) -> Result<(Losses, Parameters<S>, Vec<DzRow<S>>)> {
        let trace = self.forward(block)?;
        let losses = self.loss(&trace, block);
        let cfg = &self.config;
        let t_len = block.len();
        let e = cfg.embed;
        let v = cfg.vocab_words;
        let v_total = cfg.total_vocab();
        let heads = cfg.heads;
        let d = cfg.head_dim();
        let scale = S::from_f64(1.0 / (d as f64).sqrt());

        let mut grads = Parameters::zeros(cfg);
        let mut dz_rows = Vec::new();

        // Output heads: build the padded gradient, accumulate the tied
        // projection into wte, and seed the hidden-state gradient.
        let mut dhidden = Mat::zeros(t_len, e);
        let inv_lm = if losses.word_targets > 0 {
            1.0 / losses.word_targets as f64
        } else {
            0.0
        };
        let inv_wtm = if losses.wtm_targets > 0 {
            1.0 / losses.wtm_targets as f64
        } else {
            0.0
        };
        for (p, routed) in trace.probs.iter().enumerate() {
            let target = block.ids[p + 1] as usize;
            let (offset, probs, inv_n) = match routed {
                Routed::Pad => continue,
                Routed::Word(probs) => (0usize, probs, inv_lm),
                Routed::Wtm(probs) => (v, probs, inv_wtm),
            };
            let mut dz = vec![S::zero(); v_total];
            for (c, &prob) in probs.iter().enumerate() {
                let indicator = if offset + c == target { S::one() } else { S::zero() };
                dz[offset + c] = (prob - indicator) * S::from_f64(inv_n);
            }
            let h = trace.hidden.row(p);
            let dh = dhidden.row_mut(p);
            for c in offset..offset + probs.len() {
                let g = dz[c];
                let wte_row = self.params.wte.row(c);
                let dwte_row = grads.wte.row_mut(c);
                for i in 0..e {
                    dwte_row[i] += g * h[i];
                    dh[i] += g * wte_row[i];
                }
            }
            if keep_dz {
                dz_rows.push(DzRow { position: p, dz });
            }
        }

        // Final layer norm.
        let x_last = if cfg.layers == 0 {
            &trace.x0
        } else {
            &trace.layers[cfg.layers - 1].x_out
        };
        let mut dx = Mat::zeros(t_len, e);
        layer_norm_backward(
            x_last,
            &trace.lnf_mean,
            &trace.lnf_rstd,
            &self.params.lnf,
            &dhidden,
            &mut grads.lnf,
            &mut dx,
        );

        // Decoder layers in reverse.
        for li in (0..cfg.layers).rev() {
            let layer = &self.params.layers[li];
            let lt = &trace.layers[li];
            let dlayer = &mut grads.layers[li];
            let x_in = if li == 0 { &trace.x0 } else { &trace.layers[li - 1].x_out };

            // x_out = x_mid + fc2(gelu(fc1(ln2(x_mid))))
            let dfc2 = &dx; // gradient flowing into the mlp output
            bias_grad(dfc2, &mut dlayer.fc2_b);
            accumulate_outer(&lt.gelu, dfc2, &mut dlayer.fc2_w);
            let mut dgelu = Mat::zeros(t_len, 4 * e);
            matmul_transposed(dfc2, &layer.fc2_w, &mut dgelu);

            let mut dfc1 = dgelu;
            for (g, &f) in dfc1.data_mut().iter_mut().zip(lt.fc1.data()) {
                *g *= super::forward::gelu_grad(f);
            }
            bias_grad(&dfc1, &mut dlayer.fc1_b);
            accumulate_outer(&lt.ln2_out, &dfc1, &mut dlayer.fc1_w);
            let mut dln2 = Mat::zeros(t_len, e);
            matmul_transposed(&dfc1, &layer.fc1_w, &mut dln2);

            // dx currently holds d(x_out); residual passes it to x_mid, and
            // the ln2 branch adds its share.
            let mut dx_mid = dx;
            layer_norm_backward(
                &lt.x_mid,
                &lt.ln2_mean,
                &lt.ln2_rstd,
                &layer.ln2,
                &dln2,
                &mut dlayer.ln2,
                &mut dx_mid,
            );

            // x_mid = x_in + proj(ctx)
            let dproj = &dx_mid;
            bias_grad(dproj, &mut dlayer.proj_b);
            accumulate_outer(&lt.ctx, dproj, &mut dlayer.proj_w);
            let mut dctx = Mat::zeros(t_len, e);
            matmul_transposed(dproj, &layer.proj_w, &mut dctx);

            // Attention per head.
            let mut dqkv = Mat::zeros(t_len, 3 * e);
            for h in 0..heads {
                let q_off = h * d;
                let k_off = e + h * d;
                let v_off = 2 * e + h * d;
                let att = &lt.att[h];
                for t in 0..t_len {
                    let dctx_h = &dctx.row(t)[q_off..q_off + d];
                    // datt and softmax backward over the causal row
                    let mut datt = vec![S::zero(); t + 1];
                    for s in 0..=t {
                        datt[s] = dot(dctx_h, &lt.qkv.row(s)[v_off..v_off + d]);
                    }
                    let att_row = &att.row(t)[..=t];
                    let inner: S = att_row.iter().zip(&datt).map(|(&a, &g)| a * g).sum();
                    for s in 0..=t {
                        let ds = att_row[s] * (datt[s] - inner);
                        let w = att_row[s];
                        {
                            let k = &lt.qkv.row(s)[k_off..k_off + d];
                            let dq = &mut dqkv.row_mut(t)[q_off..q_off + d];
                            for (dqi, &ki) in dq.iter_mut().zip(k.iter()) {
                                *dqi += ds * ki * scale;
                            }
                        }
                        {
                            let q = &lt.qkv.row(t)[q_off..q_off + d];
                            let dk = &mut dqkv.row_mut(s)[k_off..k_off + d];
                            for (dki, &qi) in dk.iter_mut().zip(q.iter()) {
                                *dki += ds * qi * scale;
                            }
                        }
                        let dv = &mut dqkv.row_mut(s)[v_off..v_off + d];
                        for (dvi, &ci) in dv.iter_mut().zip(dctx_h.iter()) {
                            *dvi += w * ci;
                        }
                    }
                }
            }

            bias_grad(&dqkv, &mut dlayer.qkv_b);
            accumulate_outer(&lt.ln1_out, &dqkv, &mut dlayer.qkv_w);
            let mut dln1 = Mat::zeros(t_len, e);
            matmul_transposed(&dqkv, &layer.qkv_w, &mut dln1);

            layer_norm_backward(
                x_in,
                &lt.ln1_mean,
                &lt.ln1_rstd,
                &layer.ln1,
                &dln1,
                &mut dlayer.ln1,
                &mut dx_mid,
            );
            dx = dx_mid;
        }

        // Embedding path.
        for (t, &id) in block.ids.iter().enumerate() {
            add_assign(grads.wte.row_mut(id as usize), dx.row(t));
            add_assign(grads.wpe.row_mut(t), dx.row(t));
        }

        grads.zero_layers_below(cfg.frozen_layers);
        Ok((losses, grads, dz_rows))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::ModelConfig;
    use crate::tokenizer::{Block, TokenKind};

    fn config(v: usize, vw: usize, seed: u64) -> ModelConfig {
        ModelConfig {
            vocab_words: v,
            vocab_watermarks: vw,
            embed: 16,
            layers: 2,
            heads: 2,
            block_size: 16,
            frozen_layers: 0,
            seed,
        }
    }

    fn block_of(ids: Vec<u32>, v: usize) -> Block {
        let kinds = ids
            .iter()
            .map(|&id| if (id as usize) < v { TokenKind::Word } else { TokenKind::Watermark })
            .collect();
        Block { ids, kinds }
    }

    fn mixed_block(v: usize) -> Block {
        // words, [WTM], 4 watermark chars, words, PAD tail
        let mut ids = vec![4, 5, 6, 3];
        ids.extend([v as u32, v as u32 + 1, v as u32 + 2, v as u32 + 1]);
        ids.extend([7, 8, 2, 2]);
        block_of(ids, v)
    }

    #[test]
    fn output_gradient_is_block_structured() {
        let v = 12;
        let model: WasaModel<f64> = WasaModel::init(config(v, 6, 3)).unwrap();
        let block = mixed_block(v);
        let (_, _, dz_rows) = model.backward_traced(&block).unwrap();
        assert!(!dz_rows.is_empty());
        let mut saw_word = false;
        let mut saw_wtm = false;
        for row in &dz_rows {
            let target = block.ids[row.position + 1] as usize;
            assert_eq!(row.dz.len(), v + 6);
            if target < v {
                saw_word = true;
                assert!(row.dz[v..].iter().all(|&x| x == 0.0), "watermark entries must be exactly zero");
                assert!(row.dz[..v].iter().any(|&x| x != 0.0));
            } else {
                saw_wtm = true;
                assert!(row.dz[..v].iter().all(|&x| x == 0.0), "word entries must be exactly zero");
                assert!(row.dz[v..].iter().any(|&x| x != 0.0));
            }
            // softmax gradient sums to zero over the routed head
            let sum: f64 = row.dz.iter().sum();
            assert!(sum.abs() < 1e-12);
        }
        assert!(saw_word && saw_wtm);
    }

    /// Central finite differences through the model's own loss.
    fn finite_difference_gradient(model: &WasaModel<f64>, block: &Block, h: f64) -> Vec<f64> {
        let mut m = model.clone();
        let mut out = Vec::new();
        let n_tensors = m.params.tensors().len();
        for ti in 0..n_tensors {
            let len = m.params.tensors()[ti].len();
            for i in 0..len {
                let orig = m.params.tensors()[ti][i];
                m.params.tensors_mut()[ti][i] = orig + h;
                let up = m.loss_of_block(block).unwrap().total;
                m.params.tensors_mut()[ti][i] = orig - h;
                let down = m.loss_of_block(block).unwrap().total;
                m.params.tensors_mut()[ti][i] = orig;
                out.push((up - down) / (2.0 * h));
            }
        }
        out
    }

    #[test]
    fn analytic_gradient_matches_finite_differences() {
        let v = 10;
        let model: WasaModel<f64> = WasaModel::init(config(v, 4, 11)).unwrap();
        let mut ids = vec![4, 5, 3];
        ids.extend([10, 11, 12]);
        ids.extend([6, 7]);
        let block = block_of(ids, v);

        let (_, grads) = model.backward(&block).unwrap();
        let analytic: Vec<f64> = grads.tensors().into_iter().flatten().copied().collect();
        let numeric = finite_difference_gradient(&model, &block, 1e-5);
        assert_eq!(analytic.len(), numeric.len());

        let norm_a: f64 = analytic.iter().map(|x| x * x).sum::<f64>().sqrt();
        let norm_n: f64 = numeric.iter().map(|x| x * x).sum::<f64>().sqrt();
        let diff: f64 = analytic
            .iter()
            .zip(&numeric)
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            .sqrt();
        let rel = diff / norm_a.max(norm_n);
        assert!(rel < 1e-6, "relative error {rel}");
    }

    #[test]
    fn frozen_layers_receive_zero_gradient() {
        let v = 10;
        let cfg = ModelConfig { frozen_layers: 2, ..config(v, 4, 11) };
        let model: WasaModel<f64> = WasaModel::init(cfg).unwrap();
        let block = block_of(vec![4, 5, 6, 7, 8], v);
        let (_, grads) = model.backward(&block).unwrap();
        for layer in &grads.layers {
            assert!(layer.qkv_w.data().iter().all(|&x| x == 0.0));
            assert!(layer.fc1_w.data().iter().all(|&x| x == 0.0));
            assert!(layer.ln1.gain.iter().all(|&x| x == 0.0));
        }
        // embeddings and final norm still learn
        assert!(grads.wte.data().iter().any(|&x| x != 0.0));
        assert!(grads.wpe.data().iter().any(|&x| x != 0.0));
        assert!(grads.lnf.gain.iter().any(|&x| x != 0.0));
    }

    #[test]
    fn f32_path_has_same_block_structure() {
        let v = 12;
        let model: WasaModel<f32> = WasaModel::init(config(v, 6, 3)).unwrap();
        let block = mixed_block(v);
        let (_, _, dz_rows) = model.backward_traced(&block).unwrap();
        for row in &dz_rows {
            let target = block.ids[row.position + 1] as usize;
            if target < v {
                assert!(row.dz[v..].iter().all(|&x| x == 0.0));
            } else {
                assert!(row.dz[..v].iter().all(|&x| x == 0.0));
            }
        }
    }
}
