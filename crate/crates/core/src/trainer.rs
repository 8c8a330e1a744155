//! Minibatch gradient descent on the prompt surrogate.
//!
//! Every iteration draws one treecut shared by the whole batch, evaluates
//! `DTL + λ·NCL` and takes a plain SGD step with a cosine-decayed learning
//! rate. Embeddings and sample features are never modified.

use rand::seq::SliceRandom;
use sha2::{Digest, Sha256};

use crate::classifier::{EmbeddingTable, PromptParams, SampleSet, DEFAULT_TAU};
use crate::error::{Error, Result};
use crate::io;
use crate::objectives::total_loss_and_grad;
use crate::rng::Rng64;
use crate::taxonomy::TaxonomyTree;
use crate::treecut::{build_matrices, sample_treecut};

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub base_lr: f64,
    pub lambda: f64,
    pub beta: f64,
    pub seed: u64,
    pub tau: f64,
    /// Keep only the first `shots` samples of each leaf.
    pub shots: Option<usize>,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            epochs: 200,
            batch_size: 32,
            base_lr: 0.02,
            lambda: 0.5,
            beta: 0.1,
            seed: 0,
            tau: DEFAULT_TAU,
            shots: None,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidParameter(msg));
        if self.epochs == 0 {
            return bad("epochs must be positive".into());
        }
        if self.batch_size == 0 {
            return bad("batch size must be positive".into());
        }
        if !(self.base_lr > 0.0 && self.base_lr.is_finite()) {
            return bad(format!("learning rate {} must be positive", self.base_lr));
        }
        if !(self.lambda >= 0.0 && self.lambda.is_finite()) {
            return bad(format!("lambda {} must be >= 0", self.lambda));
        }
        if !(0.0..=1.0).contains(&self.beta) {
            return bad(format!("beta {} outside [0, 1]", self.beta));
        }
        if !(self.tau > 0.0 && self.tau.is_finite()) {
            return bad(format!("tau {} must be positive", self.tau));
        }
        if self.shots == Some(0) {
            return bad("shots must be positive".into());
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct IterationRecord {
    pub iteration: usize,
    pub epoch: usize,
    pub lr: f64,
    pub cut_size: usize,
    pub dtl: f64,
    pub ncl: f64,
    pub total: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainLog {
    pub records: Vec<IterationRecord>,
    /// SHA-256 of the serialized final parameters.
    pub params_digest: String,
}

/// `base_lr · ½ · (1 + cos(π · step / total_steps))`.
pub fn cosine_lr(step: usize, total_steps: usize, base_lr: f64) -> Result<f64> {
    if total_steps == 0 {
        return Err(Error::InvalidParameter(
            "total_steps must be positive".to_string(),
        ));
    }
    if step >= total_steps {
        return Err(Error::InvalidParameter(format!(
            "step {step} outside [0, {total_steps})"
        )));
    }
    let progress = step as f64 / total_steps as f64;
    Ok(base_lr * 0.5 * (1.0 + (std::f64::consts::PI * progress).cos()))
}

pub fn params_digest(params: &PromptParams) -> String {
    hex::encode(Sha256::digest(io::format_params(params, None).as_bytes()))
}

/// Shuffle stream for `epoch`; kept apart from the treecut stream (index 0).
fn shuffle_rng(seed: u64, epoch: usize) -> Rng64 {
    Rng64::stream(seed, (epoch as u64 + 1) << 32)
}

pub fn train(
    config: &TrainConfig,
    tree: &TaxonomyTree,
    emb: &EmbeddingTable,
    data: &SampleSet,
) -> Result<(PromptParams, TrainLog)> {
    config.validate()?;
    let data = match config.shots {
        Some(k) => data.first_k_per_leaf(k),
        None => data.clone(),
    };
    if data.is_empty() {
        return Err(Error::EmptyData);
    }
    if data.dim() != emb.dim() {
        return Err(Error::DimensionMismatch {
            expected: emb.dim(),
            got: data.dim(),
        });
    }

    let bundle = build_matrices(tree)?;
    let mut params = PromptParams::identity(emb.dim(), config.tau)?;
    let n = data.len();
    let per_epoch = n.div_ceil(config.batch_size);
    let total_steps = config.epochs * per_epoch;
    let mut cut_rng = Rng64::stream(config.seed, 0);
    let mut records = Vec::with_capacity(total_steps);

    let mut step = 0;
    for epoch in 0..config.epochs {
        let mut order: Vec<usize> = (0..n).collect();
        order.shuffle(&mut shuffle_rng(config.seed, epoch));
        for chunk in order.chunks(config.batch_size) {
            let batch = data.select(chunk);
            let cut = sample_treecut(tree, &bundle, config.beta, &mut cut_rng)?;
            let loss = total_loss_and_grad(&batch, &cut, config.lambda, &params, emb, tree)?;
            if !loss.total.is_finite() {
                return Err(Error::NonFinite {
                    iteration: step,
                    detail: format!(
                        "dtl={} ncl={} total={}",
                        loss.dtl.value, loss.ncl.value, loss.total.value
                    ),
                });
            }
            let lr = cosine_lr(step, total_steps, config.base_lr)?;
            for (p, g) in params.a.iter_mut().zip(&loss.total.grad_a) {
                *p -= lr * g;
            }
            for (p, g) in params.c.iter_mut().zip(&loss.total.grad_c) {
                *p -= lr * g;
            }
            records.push(IterationRecord {
                iteration: step,
                epoch,
                lr,
                cut_size: cut.len(),
                dtl: loss.dtl.value,
                ncl: loss.ncl.value,
                total: loss.total.value,
            });
            step += 1;
        }
    }
    params.validate().map_err(|e| Error::NonFinite {
        iteration: step,
        detail: e.to_string(),
    })?;

    let params_digest = params_digest(&params);
    Ok((
        params,
        TrainLog {
            records,
            params_digest,
        },
    ))
}
