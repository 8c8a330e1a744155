//! Leaf accuracy, hierarchical consistent accuracy (HCA) and mean treecut
//! accuracy (MTA).
//!
//! Predictions under a non-leaf label set are scored against the projection
//! of the true leaf onto that set ([`TaxonomyTree::target_in`]).

use crate::classifier::{argmax_member, ClassWeights, EmbeddingTable, PromptParams, SampleSet};
use crate::error::{Error, Result};
use crate::rng::Rng64;
use crate::taxonomy::{LabelSet, TaxonomyTree};
use crate::treecut::{build_matrices, sample_distinct};

/// Dropout rates used for MTA unless overridden.
pub const DEFAULT_BETAS: [f64; 5] = [0.1, 0.3, 0.5, 0.7, 0.9];
/// Cuts drawn per dropout rate unless overridden.
pub const DEFAULT_CUTS_PER_BETA: usize = 5;

#[derive(Debug, Clone, PartialEq)]
pub struct CutAccuracy {
    pub beta: f64,
    pub members: Vec<usize>,
    pub accuracy: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BetaSummary {
    pub beta: f64,
    pub mta: f64,
    pub cuts: usize,
    /// How many of the requested cuts could not be drawn distinct.
    pub shortfall: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MtaResult {
    /// Unweighted mean over every cut drawn, pooled across rates.
    pub mta: f64,
    pub per_beta: Vec<BetaSummary>,
    pub cuts: Vec<CutAccuracy>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MetricsReport {
    pub n_samples: usize,
    pub leaf_acc: f64,
    pub hca: f64,
    pub mta: MtaResult,
    pub seed: u64,
    pub cuts_per_beta: usize,
}

/// Per-sample cosines against every node, reused across label sets.
pub struct ScoreTable {
    leaves: Vec<usize>,
    cosines: Vec<Vec<f64>>,
}

impl ScoreTable {
    pub fn new(params: &PromptParams, emb: &EmbeddingTable, data: &SampleSet) -> Result<Self> {
        if data.is_empty() {
            return Err(Error::EmptyData);
        }
        if data.dim() != params.dim {
            return Err(Error::DimensionMismatch {
                expected: params.dim,
                got: data.dim(),
            });
        }
        let weights = ClassWeights::compute(params, emb)?;
        let cosines = (0..data.len())
            .map(|i| weights.cosines(data.feature(i)))
            .collect::<Result<_>>()?;
        Ok(ScoreTable {
            leaves: (0..data.len()).map(|i| data.leaf(i)).collect(),
            cosines,
        })
    }

    pub fn len(&self) -> usize {
        self.leaves.len()
    }

    pub fn is_empty(&self) -> bool {
        self.leaves.is_empty()
    }

    pub fn leaf(&self, sample: usize) -> usize {
        self.leaves[sample]
    }

    pub fn predict(&self, sample: usize, labels: &LabelSet) -> usize {
        argmax_member(&self.cosines[sample], labels)
    }
}

/// Anything that can name a prediction for a sample under a label set.
pub trait Predictor {
    fn len(&self) -> usize;
    fn leaf(&self, sample: usize) -> usize;
    fn predict(&self, sample: usize, labels: &LabelSet) -> usize;

    fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

impl Predictor for ScoreTable {
    fn len(&self) -> usize {
        ScoreTable::len(self)
    }

    fn leaf(&self, sample: usize) -> usize {
        ScoreTable::leaf(self, sample)
    }

    fn predict(&self, sample: usize, labels: &LabelSet) -> usize {
        ScoreTable::predict(self, sample, labels)
    }
}

fn fraction(hits: usize, total: usize) -> f64 {
    hits as f64 / total as f64
}

pub fn leaf_accuracy_of(tree: &TaxonomyTree, pred: &impl Predictor) -> Result<f64> {
    if pred.is_empty() {
        return Err(Error::EmptyData);
    }
    let leaf_set = tree.leaf_label_set();
    let hits = (0..pred.len())
        .filter(|&i| pred.predict(i, &leaf_set) == pred.leaf(i))
        .count();
    Ok(fraction(hits, pred.len()))
}

pub fn hca_of(tree: &TaxonomyTree, pred: &impl Predictor) -> Result<f64> {
    if pred.is_empty() {
        return Err(Error::EmptyData);
    }
    let leaf_set = tree.leaf_label_set();
    let node_sets = tree
        .internal_nodes()
        .iter()
        .map(|&n| Ok((n, tree.node_label_set(n)?)))
        .collect::<Result<std::collections::HashMap<_, _>>>()?;
    let mut hits = 0;
    for i in 0..pred.len() {
        let leaf = pred.leaf(i);
        if pred.predict(i, &leaf_set) != leaf {
            continue;
        }
        let path = tree.ancestors(leaf)?;
        let consistent = path.iter().all(|n| {
            let p = pred.predict(i, &node_sets[n]);
            p == leaf || path.contains(&p)
        });
        if consistent {
            hits += 1;
        }
    }
    Ok(fraction(hits, pred.len()))
}

/// Fraction of samples whose prediction under `cut` equals the projection
/// of their leaf onto `cut`.
pub fn cut_accuracy(tree: &TaxonomyTree, pred: &impl Predictor, cut: &LabelSet) -> Result<f64> {
    if pred.is_empty() {
        return Err(Error::EmptyData);
    }
    Ok(fraction(cut_hits(tree, pred, cut)?, pred.len()))
}

fn cut_hits(tree: &TaxonomyTree, pred: &impl Predictor, cut: &LabelSet) -> Result<usize> {
    let mut hits = 0;
    for i in 0..pred.len() {
        let target = tree
            .target_in(pred.leaf(i), cut)?
            .ok_or_else(|| Error::InvalidCut("cut does not cover every leaf".to_string()))?;
        if pred.predict(i, cut) == target {
            hits += 1;
        }
    }
    Ok(hits)
}

/// MTA over up to `cuts_per_beta` distinct cuts per rate. Rate `k` (0-based)
/// draws from stream `seed ^ (k + 1)`.
pub fn mta_of(
    tree: &TaxonomyTree,
    pred: &impl Predictor,
    betas: &[f64],
    cuts_per_beta: usize,
    seed: u64,
) -> Result<MtaResult> {
    if pred.is_empty() {
        return Err(Error::EmptyData);
    }
    if betas.is_empty() {
        return Err(Error::InvalidParameter(
            "at least one beta is required".to_string(),
        ));
    }
    if cuts_per_beta == 0 {
        return Err(Error::InvalidParameter("T must be at least 1".to_string()));
    }
    let bundle = build_matrices(tree)?;
    let mut per_beta = Vec::with_capacity(betas.len());
    let mut cuts = Vec::new();
    // Every cut scores the same samples, so pooling hit counts equals the
    // mean of per-cut accuracies without summation error.
    let mut total_hits = 0;
    for (k, &beta) in betas.iter().enumerate() {
        let mut rng = Rng64::stream(seed, k as u64 + 1);
        let drawn = sample_distinct(tree, &bundle, beta, cuts_per_beta, &mut rng)?;
        let mut beta_hits = 0;
        for cut in &drawn.cuts {
            let hits = cut_hits(tree, pred, cut)?;
            let accuracy = fraction(hits, pred.len());
            beta_hits += hits;
            total_hits += hits;
            cuts.push(CutAccuracy {
                beta,
                members: cut.members().to_vec(),
                accuracy,
            });
        }
        per_beta.push(BetaSummary {
            beta,
            mta: fraction(beta_hits, drawn.cuts.len() * pred.len()),
            cuts: drawn.cuts.len(),
            shortfall: drawn.shortfall(),
        });
    }
    let mta = fraction(total_hits, cuts.len() * pred.len());
    Ok(MtaResult {
        mta,
        per_beta,
        cuts,
    })
}

pub fn leaf_accuracy(
    tree: &TaxonomyTree,
    params: &PromptParams,
    emb: &EmbeddingTable,
    data: &SampleSet,
) -> Result<f64> {
    leaf_accuracy_of(tree, &ScoreTable::new(params, emb, data)?)
}

pub fn hca(
    tree: &TaxonomyTree,
    params: &PromptParams,
    emb: &EmbeddingTable,
    data: &SampleSet,
) -> Result<f64> {
    hca_of(tree, &ScoreTable::new(params, emb, data)?)
}

pub fn mta(
    tree: &TaxonomyTree,
    params: &PromptParams,
    emb: &EmbeddingTable,
    data: &SampleSet,
    betas: &[f64],
    cuts_per_beta: usize,
    seed: u64,
) -> Result<MtaResult> {
    mta_of(
        tree,
        &ScoreTable::new(params, emb, data)?,
        betas,
        cuts_per_beta,
        seed,
    )
}

/// All three metrics from one pass of cosine scoring.
pub fn evaluate(
    tree: &TaxonomyTree,
    params: &PromptParams,
    emb: &EmbeddingTable,
    data: &SampleSet,
    betas: &[f64],
    cuts_per_beta: usize,
    seed: u64,
) -> Result<MetricsReport> {
    let scores = ScoreTable::new(params, emb, data)?;
    Ok(MetricsReport {
        n_samples: data.len(),
        leaf_acc: leaf_accuracy_of(tree, &scores)?,
        hca: hca_of(tree, &scores)?,
        mta: mta_of(tree, &scores, betas, cuts_per_beta, seed)?,
        seed,
        cuts_per_beta,
    })
}
