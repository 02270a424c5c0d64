//! Training loop: Adam on the summed word/watermark loss with seeded
//! shuffling, micro-batch gradient accumulation, and per-step loss logging.

use std::fs;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use rand::seq::SliceRandom;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{Parameters, WasaModel};
use crate::seed::rng_for;
use crate::tokenizer::Block;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TrainConfig {
    /// Step size. Desk-scale default 5e-4; 5e-5 mirrors full-scale training.
    pub learning_rate: f64,
    pub epochs: usize,
    pub batch_size: usize,
    /// Micro-batches summed before each optimizer step.
    pub grad_accumulation: usize,
    pub seed: u64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            learning_rate: 5e-4,
            epochs: 1,
            batch_size: 8,
            grad_accumulation: 1,
            seed: 0,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

impl TrainConfig {
    fn validate(&self) -> Result<()> {
        if self.learning_rate <= 0.0 {
            return Err(Error::InvalidConfig("learning rate must be positive".into()));
        }
        if self.batch_size == 0 || self.grad_accumulation == 0 {
            return Err(Error::InvalidConfig("batch size and accumulation must be at least 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StepRecord {
    pub step: usize,
    pub loss_lm: f64,
    pub loss_wtm: f64,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct TrainLog {
    pub records: Vec<StepRecord>,
}

impl TrainLog {
    pub fn save_jsonl(&self, path: &Path) -> Result<()> {
        let mut f = fs::File::create(path).map_err(Error::io(path))?;
        for r in &self.records {
            let line = serde_json::to_string(r).expect("step record serialization");
            writeln!(f, "{line}").map_err(Error::io(path))?;
        }
        Ok(())
    }

    pub fn load_jsonl(path: &Path) -> Result<TrainLog> {
        let f = fs::File::open(path).map_err(Error::io(path))?;
        let mut records = Vec::new();
        for (lineno, line) in BufReader::new(f).lines().enumerate() {
            let line = line.map_err(Error::io(path))?;
            if line.trim().is_empty() {
                continue;
            }
            records.push(
                serde_json::from_str(&line)
                    .map_err(|e| Error::format("train log", format!("line {}: {e}", lineno + 1)))?,
            );
        }
        Ok(TrainLog { records })
    }
}

struct Adam {
    m: Parameters<f32>,
    v: Parameters<f32>,
    t: u64,
}

impl Adam {
    fn new(model: &WasaModel<f32>) -> Self {
        Self {
            m: Parameters::zeros(&model.config),
            v: Parameters::zeros(&model.config),
            t: 0,
        }
    }

    fn step(&mut self, params: &mut Parameters<f32>, grads: &Parameters<f32>, cfg: &TrainConfig) {
        self.t += 1;
        let bc1 = 1.0 - cfg.beta1.powi(self.t as i32);
        let bc2 = 1.0 - cfg.beta2.powi(self.t as i32);
        let lr = cfg.learning_rate;
        let (b1, b2, eps) = (cfg.beta1 as f32, cfg.beta2 as f32, cfg.eps as f32);

        let mut p = params.tensors_mut();
        let mut m = self.m.tensors_mut();
        let mut v = self.v.tensors_mut();
        let g = grads.tensors();
        for i in 0..p.len() {
            let (pt, mt, vt, gt) = (&mut p[i], &mut m[i], &mut v[i], &g[i]);
            for j in 0..pt.len() {
                let grad = gt[j];
                mt[j] = b1 * mt[j] + (1.0 - b1) * grad;
                vt[j] = b2 * vt[j] + (1.0 - b2) * grad * grad;
                let m_hat = mt[j] as f64 / bc1;
                let v_hat = vt[j] as f64 / bc2;
                pt[j] -= (lr * m_hat / (v_hat.sqrt() + eps as f64)) as f32;
            }
        }
    }
}

/// Trains in place. Each step averages gradients over
/// `batch_size × grad_accumulation` blocks; block order is reshuffled per
/// epoch from the seed; micro-batch losses and gradients are reduced in a
/// fixed order so thread count never changes the result.
pub fn train(model: &mut WasaModel<f32>, blocks: &[Block], config: &TrainConfig) -> Result<TrainLog> {
    train_with_progress(model, blocks, config, |_| {})
}

pub fn train_with_progress(
    model: &mut WasaModel<f32>,
    blocks: &[Block],
    config: &TrainConfig,
    mut on_step: impl FnMut(&StepRecord),
) -> Result<TrainLog> {
    config.validate()?;
    if blocks.is_empty() {
        return Err(Error::EmptyInput);
    }

    let mut adam = Adam::new(model);
    let mut log = TrainLog::default();
    let mut step = 0usize;
    let per_step = config.batch_size * config.grad_accumulation;

    for epoch in 0..config.epochs {
        let mut order: Vec<usize> = (0..blocks.len()).collect();
        order.shuffle(&mut rng_for(config.seed, &["train-epoch", &epoch.to_string()]));

        for chunk in order.chunks(per_step) {
            // Fan out micro-batch blocks, then reduce in index order.
            let results: Vec<Result<_>> = chunk
                .par_iter()
                .map(|&bi| model.backward(&blocks[bi]))
                .collect();

            let mut total = Parameters::<f32>::zeros(&model.config);
            let mut lm_sum = 0.0;
            let mut wtm_sum = 0.0;
            let mut lm_blocks = 0usize;
            let mut wtm_blocks = 0usize;
            for r in results {
                let (losses, grads) = r?;
                if !losses.total.is_finite() {
                    return Err(Error::NonFiniteLoss { step });
                }
                total.add_assign(&grads);
                if losses.word_targets > 0 {
                    lm_sum += losses.lm;
                    lm_blocks += 1;
                }
                if losses.wtm_targets > 0 {
                    wtm_sum += losses.wtm;
                    wtm_blocks += 1;
                }
            }
            total.scale(1.0 / chunk.len() as f32);
            adam.step(&mut model.params, &total, config);

            let record = StepRecord {
                step,
                loss_lm: if lm_blocks > 0 { lm_sum / lm_blocks as f64 } else { 0.0 },
                loss_wtm: if wtm_blocks > 0 { wtm_sum / wtm_blocks as f64 } else { 0.0 },
            };
            on_step(&record);
            log.records.push(record);
            step += 1;
        }
    }
    Ok(log)
}

/// exp(mean cross-entropy) over word-target positions only; watermark and
/// `[PAD]` targets are excluded.
pub fn perplexity(model: &WasaModel<f32>, blocks: &[Block]) -> Result<f64> {
    let sums: Vec<Result<(f64, usize)>> = blocks
        .par_iter()
        .map(|b| {
            let losses = model.loss_of_block(b)?;
            Ok((losses.lm * losses.word_targets as f64, losses.word_targets))
        })
        .collect();
    let mut ce = 0.0;
    let mut n = 0usize;
    for s in sums {
        let (c, k) = s?;
        ce += c;
        n += k;
    }
    if n == 0 {
        return Ok(1.0);
    }
    Ok((ce / n as f64).exp())
}
