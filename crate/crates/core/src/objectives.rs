//! Cross-entropy objectives over label sets and their analytic gradients
//! with respect to the prompt surrogate `(A, c)`.
//!
//! For one sample with feature `v` and a label set `Y`, the logits are
//! `s_y = cos(w_y, v) / τ` with `w_y = A·e_y + c`. The chain rule gives
//!
//! ```text
//! ∂L/∂s_y   = p_y − 1[y = target]
//! ∂cos/∂w_y = v / (|w_y| |v|) − cos(w_y, v) · w_y / |w_y|²
//! ∂L/∂A     = Σ_y ∂L/∂w_y · e_yᵀ        ∂L/∂c = Σ_y ∂L/∂w_y
//! ```
//!
//! Gradients are accumulated per node first and pushed through the affine
//! map once per loss.

use crate::classifier::{dot, ClassWeights, EmbeddingTable, PromptParams, SampleSet};
use crate::error::{Error, Result};
use crate::rng::Rng64;
use crate::taxonomy::{LabelSet, TaxonomyTree};

/// Central-difference step used by [`finite_diff_check`].
pub const FD_STEP: f64 = 1e-5;

/// A loss value with its gradient.
#[derive(Debug, Clone, PartialEq)]
pub struct LossValue {
    pub value: f64,
    pub grad_a: Vec<f64>,
    pub grad_c: Vec<f64>,
    pub n_contributing: usize,
}

impl LossValue {
    pub fn zero(dim: usize) -> Self {
        LossValue {
            value: 0.0,
            grad_a: vec![0.0; dim * dim],
            grad_c: vec![0.0; dim],
            n_contributing: 0,
        }
    }

    /// `primary + lambda · secondary`, elementwise on the gradients.
    pub fn combine(primary: &LossValue, secondary: &LossValue, lambda: f64) -> LossValue {
        LossValue {
            value: primary.value + lambda * secondary.value,
            grad_a: primary
                .grad_a
                .iter()
                .zip(&secondary.grad_a)
                .map(|(a, b)| a + lambda * b)
                .collect(),
            grad_c: primary
                .grad_c
                .iter()
                .zip(&secondary.grad_c)
                .map(|(a, b)| a + lambda * b)
                .collect(),
            n_contributing: primary.n_contributing.max(secondary.n_contributing),
        }
    }

    pub fn is_finite(&self) -> bool {
        self.value.is_finite()
            && self.grad_a.iter().all(|x| x.is_finite())
            && self.grad_c.iter().all(|x| x.is_finite())
    }
}

/// The three parts of the combined objective.
#[derive(Debug, Clone, PartialEq)]
pub struct TotalLoss {
    pub dtl: LossValue,
    pub ncl: LossValue,
    pub total: LossValue,
}

/// Weights and per-sample cosines for one batch under fixed parameters.
struct Forward<'a> {
    params: &'a PromptParams,
    emb: &'a EmbeddingTable,
    batch: &'a SampleSet,
    weights: ClassWeights,
    cos: Vec<Vec<f64>>,
    feature_norms: Vec<f64>,
}

impl<'a> Forward<'a> {
    fn new(
        params: &'a PromptParams,
        emb: &'a EmbeddingTable,
        batch: &'a SampleSet,
    ) -> Result<Self> {
        if batch.is_empty() {
            return Err(Error::EmptyData);
        }
        if batch.dim() != params.dim {
            return Err(Error::DimensionMismatch {
                expected: params.dim,
                got: batch.dim(),
            });
        }
        let weights = ClassWeights::compute(params, emb)?;
        let mut cos = Vec::with_capacity(batch.len());
        let mut feature_norms = Vec::with_capacity(batch.len());
        for i in 0..batch.len() {
            let v = batch.feature(i);
            cos.push(weights.cosines(v)?);
            feature_norms.push(dot(v, v).sqrt());
        }
        Ok(Forward {
            params,
            emb,
            batch,
            weights,
            cos,
            feature_norms,
        })
    }

    fn node_grad_buffer(&self) -> Vec<Vec<f64>> {
        vec![Vec::new(); self.emb.len()]
    }

    /// Mean cross-entropy of `labels` over contributing samples. Adds
    /// `scale · ∂(mean)/∂w` into `grad_w` and marks contributing samples.
    fn cross_entropy(
        &self,
        tree: &TaxonomyTree,
        labels: &LabelSet,
        scale: f64,
        grad_w: &mut [Vec<f64>],
        contributed: &mut [bool],
    ) -> Result<(f64, usize)> {
        let members = labels.members();
        let mut targets = Vec::with_capacity(self.batch.len());
        for i in 0..self.batch.len() {
            if let Some(t) = tree.target_in(self.batch.leaf(i), labels)? {
                let pos = members.binary_search(&t).expect("target is a member");
                targets.push((i, pos));
            }
        }
        let n = targets.len();
        if n == 0 {
            return Ok((0.0, 0));
        }
        let tau = self.params.tau;
        let weight = scale / n as f64;
        let mut total = 0.0;
        let mut logits = vec![0.0; members.len()];
        for &(i, target) in &targets {
            contributed[i] = true;
            let cos = &self.cos[i];
            for (s, &m) in logits.iter_mut().zip(members) {
                *s = cos[m] / tau;
            }
            let max = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let exps: Vec<f64> = logits.iter().map(|&s| (s - max).exp()).collect();
            let z: f64 = exps.iter().sum();
            total += max + z.ln() - logits[target];

            let v = self.batch.feature(i);
            let v_norm = self.feature_norms[i];
            for (pos, &m) in members.iter().enumerate() {
                let p = exps[pos] / z;
                let dlogit = if pos == target { p - 1.0 } else { p };
                if dlogit == 0.0 {
                    continue;
                }
                let coeff = weight * dlogit / tau;
                let w = self.weights.row(m);
                let w_norm = self.weights.norm(m);
                let along_v = coeff / (w_norm * v_norm);
                let along_w = -coeff * cos[m] / (w_norm * w_norm);
                let g = &mut grad_w[m];
                if g.is_empty() {
                    g.resize(self.params.dim, 0.0);
                }
                for ((gk, &vk), &wk) in g.iter_mut().zip(v).zip(w) {
                    *gk += along_v * vk + along_w * wk;
                }
            }
        }
        Ok((total / n as f64, n))
    }

    /// Pushes per-node weight gradients through `w = A·e + c`.
    fn backprop(&self, grad_w: &[Vec<f64>]) -> (Vec<f64>, Vec<f64>) {
        let d = self.params.dim;
        let mut grad_a = vec![0.0; d * d];
        let mut grad_c = vec![0.0; d];
        for (node, g) in grad_w.iter().enumerate() {
            if g.is_empty() {
                continue;
            }
            let e = self.emb.vector(node);
            for (r, &gr) in g.iter().enumerate() {
                grad_c[r] += gr;
                for (slot, &ek) in grad_a[r * d..(r + 1) * d].iter_mut().zip(e) {
                    *slot += gr * ek;
                }
            }
        }
        (grad_a, grad_c)
    }

    fn ce(&self, tree: &TaxonomyTree, labels: &LabelSet) -> Result<LossValue> {
        if labels.len() < 2 {
            return Err(Error::InvalidParameter(format!(
                "label set needs at least 2 members, has {}",
                labels.len()
            )));
        }
        let mut grad_w = self.node_grad_buffer();
        let mut contributed = vec![false; self.batch.len()];
        let (value, n) = self.cross_entropy(tree, labels, 1.0, &mut grad_w, &mut contributed)?;
        let (grad_a, grad_c) = self.backprop(&grad_w);
        Ok(LossValue {
            value,
            grad_a,
            grad_c,
            n_contributing: n,
        })
    }

    /// Treecut cross-entropy. A single-member cut (root with one child)
    /// is a degenerate softmax and contributes 0.
    fn dtl(&self, tree: &TaxonomyTree, cut: &LabelSet) -> Result<LossValue> {
        if cut.len() < 2 {
            let mut zero = LossValue::zero(self.params.dim);
            zero.n_contributing = self.batch.len();
            return Ok(zero);
        }
        self.ce(tree, cut)
    }

    fn ncl(&self, tree: &TaxonomyTree) -> Result<LossValue> {
        let internal = tree.internal_nodes();
        if internal.is_empty() {
            return Err(Error::InvalidParameter(
                "tree has no internal node".to_string(),
            ));
        }
        let scale = 1.0 / internal.len() as f64;
        let mut grad_w = self.node_grad_buffer();
        let mut contributed = vec![false; self.batch.len()];
        let mut value = 0.0;
        for &n in internal {
            if tree.children(n).len() < 2 {
                continue;
            }
            let labels = tree.node_label_set(n)?;
            let (term, _) =
                self.cross_entropy(tree, &labels, scale, &mut grad_w, &mut contributed)?;
            value += term;
        }
        let (grad_a, grad_c) = self.backprop(&grad_w);
        Ok(LossValue {
            value: value * scale,
            grad_a,
            grad_c,
            n_contributing: contributed.iter().filter(|&&c| c).count(),
        })
    }
}

/// Mean cross-entropy over samples whose leaf projects into `labels`.
pub fn ce_loss_and_grad(
    batch: &SampleSet,
    labels: &LabelSet,
    params: &PromptParams,
    emb: &EmbeddingTable,
    tree: &TaxonomyTree,
) -> Result<LossValue> {
    Forward::new(params, emb, batch)?.ce(tree, labels)
}

/// Node-centric loss: cross-entropy averaged over every `Chd(n)`, `n` internal.
/// Only samples under `n` feed the node-`n` term; single-child nodes add 0
/// but still count in the average.
pub fn ncl_loss_and_grad(
    batch: &SampleSet,
    tree: &TaxonomyTree,
    params: &PromptParams,
    emb: &EmbeddingTable,
) -> Result<LossValue> {
    Forward::new(params, emb, batch)?.ncl(tree)
}

/// Cross-entropy on a sampled treecut.
pub fn dtl_loss_and_grad(
    batch: &SampleSet,
    cut: &LabelSet,
    params: &PromptParams,
    emb: &EmbeddingTable,
    tree: &TaxonomyTree,
) -> Result<LossValue> {
    tree.check_treecut(cut)?;
    Forward::new(params, emb, batch)?.dtl(tree, cut)
}

/// `DTL + λ·NCL`, with both parts reported.
pub fn total_loss_and_grad(
    batch: &SampleSet,
    cut: &LabelSet,
    lambda: f64,
    params: &PromptParams,
    emb: &EmbeddingTable,
    tree: &TaxonomyTree,
) -> Result<TotalLoss> {
    if !(lambda >= 0.0 && lambda.is_finite()) {
        return Err(Error::InvalidParameter(format!(
            "lambda {lambda} must be >= 0"
        )));
    }
    tree.check_treecut(cut)?;
    let fwd = Forward::new(params, emb, batch)?;
    let dtl = fwd.dtl(tree, cut)?;
    let ncl = fwd.ncl(tree)?;
    let total = LossValue::combine(&dtl, &ncl, lambda);
    Ok(TotalLoss { dtl, ncl, total })
}

/// Largest `|analytic − numeric| / max(1, |numeric|)` over parameter entries,
/// with central differences of step [`FD_STEP`]. Every entry of `A` and `c`
/// is checked when there are at most 1056 of them (d ≤ 32); otherwise a
/// seeded subset of 128 entries.
#[allow(clippy::too_many_arguments)]
pub fn finite_diff_check(
    batch: &SampleSet,
    cut: &LabelSet,
    lambda: f64,
    params: &PromptParams,
    emb: &EmbeddingTable,
    tree: &TaxonomyTree,
    seed: u64,
) -> Result<f64> {
    let analytic = total_loss_and_grad(batch, cut, lambda, params, emb, tree)?.total;
    let d = params.dim;
    let n_entries = d * d + d;
    let entries: Vec<usize> = if n_entries <= 1056 {
        (0..n_entries).collect()
    } else {
        let mut rng = Rng64::new(seed);
        (0..128)
            .map(|_| (rng.next_u64() % n_entries as u64) as usize)
            .collect()
    };

    let loss_at = |p: &PromptParams| -> Result<f64> {
        Ok(total_loss_and_grad(batch, cut, lambda, p, emb, tree)?
            .total
            .value)
    };
    let dd = d * d;
    let mut worst: f64 = 0.0;
    let mut probe = params.clone();
    for idx in entries {
        let analytic_entry = if idx < dd {
            analytic.grad_a[idx]
        } else {
            analytic.grad_c[idx - dd]
        };
        let orig = *entry_mut(&mut probe, idx);
        *entry_mut(&mut probe, idx) = orig + FD_STEP;
        let plus = loss_at(&probe)?;
        *entry_mut(&mut probe, idx) = orig - FD_STEP;
        let minus = loss_at(&probe)?;
        *entry_mut(&mut probe, idx) = orig;
        let numeric = (plus - minus) / (2.0 * FD_STEP);
        worst = worst.max((analytic_entry - numeric).abs() / numeric.abs().max(1.0));
    }
    Ok(worst)
}

fn entry_mut(p: &mut PromptParams, idx: usize) -> &mut f64 {
    let dd = p.dim * p.dim;
    if idx < dd {
        &mut p.a[idx]
    } else {
        &mut p.c[idx - dd]
    }
}
