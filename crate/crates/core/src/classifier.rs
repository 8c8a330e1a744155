//! Cosine-softmax classification over arbitrary label sets.
//!
//! Class weights come from frozen node embeddings passed through a shared
//! affine prompt surrogate, `w_y = A·e_y + c`. With `A = I` and `c = 0` the
//! classifier is the plain zero-shot one.

use crate::error::{Error, Result};
use crate::taxonomy::{LabelSet, TaxonomyTree};

/// Default softmax temperature.
pub const DEFAULT_TAU: f64 = 0.07;

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub(crate) fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

fn check_dim(expected: usize, got: usize) -> Result<()> {
    if expected == got {
        Ok(())
    } else {
        Err(Error::DimensionMismatch { expected, got })
    }
}

fn check_vector(label: &str, v: &[f64]) -> Result<()> {
    if v.iter().any(|x| !x.is_finite()) {
        return Err(Error::InvalidParameter(format!(
            "non-finite value in {label:?}"
        )));
    }
    if v.iter().all(|&x| x == 0.0) {
        return Err(Error::ZeroVector(label.to_string()));
    }
    Ok(())
}

/// Frozen per-node embeddings, indexed by node. The root has no vector.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingTable {
    dim: usize,
    vectors: Vec<Vec<f64>>,
}

impl EmbeddingTable {
    /// Builds the table from `(name, vector)` pairs. Every non-root node
    /// needs exactly one non-zero vector of length `dim`.
    pub fn from_named(
        tree: &TaxonomyTree,
        dim: usize,
        entries: impl IntoIterator<Item = (String, Vec<f64>)>,
    ) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidParameter("dim must be positive".to_string()));
        }
        let mut vectors: Vec<Option<Vec<f64>>> = vec![None; tree.len()];
        for (name, v) in entries {
            let idx = tree.index_of(&name)?;
            if idx == tree.root() {
                return Err(Error::InvalidParameter(format!(
                    "root {name:?} cannot carry an embedding"
                )));
            }
            check_dim(dim, v.len())?;
            check_vector(&name, &v)?;
            if vectors[idx].replace(v).is_some() {
                return Err(Error::DuplicateName(name));
            }
        }
        let mut out = Vec::with_capacity(tree.len());
        for (idx, v) in vectors.into_iter().enumerate() {
            match v {
                Some(v) => out.push(v),
                None if idx == tree.root() => out.push(Vec::new()),
                None => return Err(Error::MissingEmbedding(tree.name(idx).to_string())),
            }
        }
        Ok(EmbeddingTable { dim, vectors: out })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn vector(&self, node: usize) -> &[f64] {
        &self.vectors[node]
    }

    pub fn len(&self) -> usize {
        self.vectors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vectors.is_empty()
    }
}

/// Learnable surrogate prompt: `A` (d×d, row-major), offset `c`, temperature `tau`.
#[derive(Debug, Clone, PartialEq)]
pub struct PromptParams {
    pub dim: usize,
    pub a: Vec<f64>,
    pub c: Vec<f64>,
    pub tau: f64,
}

impl PromptParams {
    pub fn identity(dim: usize, tau: f64) -> Result<Self> {
        let mut a = vec![0.0; dim * dim];
        for i in 0..dim {
            a[i * dim + i] = 1.0;
        }
        Self::new(dim, a, vec![0.0; dim], tau)
    }

    pub fn new(dim: usize, a: Vec<f64>, c: Vec<f64>, tau: f64) -> Result<Self> {
        let p = PromptParams { dim, a, c, tau };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if self.dim == 0 {
            return Err(Error::InvalidParameter("dim must be positive".to_string()));
        }
        check_dim(self.dim * self.dim, self.a.len())?;
        check_dim(self.dim, self.c.len())?;
        if !(self.tau > 0.0 && self.tau.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "tau {} must be positive",
                self.tau
            )));
        }
        if self.a.iter().chain(&self.c).any(|x| !x.is_finite()) {
            return Err(Error::InvalidParameter(
                "non-finite prompt parameter".to_string(),
            ));
        }
        Ok(())
    }

    /// `A·e + c`.
    pub fn transform(&self, e: &[f64]) -> Vec<f64> {
        self.a
            .chunks_exact(self.dim)
            .zip(&self.c)
            .map(|(row, ci)| dot(row, e) + ci)
            .collect()
    }
}

/// Evaluation samples: a string id, the true leaf and a feature vector.
#[derive(Debug, Clone, PartialEq)]
pub struct SampleSet {
    dim: usize,
    ids: Vec<String>,
    leaf_labels: Vec<usize>,
    features: Vec<Vec<f64>>,
}

impl SampleSet {
    pub fn new(
        tree: &TaxonomyTree,
        dim: usize,
        ids: Vec<String>,
        leaf_labels: Vec<usize>,
        features: Vec<Vec<f64>>,
    ) -> Result<Self> {
        check_dim(ids.len(), leaf_labels.len())?;
        check_dim(ids.len(), features.len())?;
        for ((id, &leaf), f) in ids.iter().zip(&leaf_labels).zip(&features) {
            tree.check_index(leaf)?;
            if !tree.is_leaf(leaf) {
                return Err(Error::NotLeaf(tree.name(leaf).to_string()));
            }
            check_dim(dim, f.len())?;
            check_vector(id, f)?;
        }
        Ok(SampleSet {
            dim,
            ids,
            leaf_labels,
            features,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    pub fn id(&self, i: usize) -> &str {
        &self.ids[i]
    }

    pub fn leaf(&self, i: usize) -> usize {
        self.leaf_labels[i]
    }

    pub fn feature(&self, i: usize) -> &[f64] {
        &self.features[i]
    }

    /// The samples at `indices`, in that order.
    pub fn select(&self, indices: &[usize]) -> SampleSet {
        SampleSet {
            dim: self.dim,
            ids: indices.iter().map(|&i| self.ids[i].clone()).collect(),
            leaf_labels: indices.iter().map(|&i| self.leaf_labels[i]).collect(),
            features: indices.iter().map(|&i| self.features[i].clone()).collect(),
        }
    }

    /// First `shots` samples of every leaf, in file order.
    pub fn first_k_per_leaf(&self, shots: usize) -> SampleSet {
        let mut taken = std::collections::HashMap::new();
        let keep: Vec<usize> = (0..self.len())
            .filter(|&i| {
                let n = taken.entry(self.leaf_labels[i]).or_insert(0usize);
                *n += 1;
                *n <= shots
            })
            .collect();
        self.select(&keep)
    }
}

/// Transformed class weights for every non-root node, with their norms.
#[derive(Debug, Clone)]
pub struct ClassWeights {
    rows: Vec<Vec<f64>>,
    norms: Vec<f64>,
    tau: f64,
}

impl ClassWeights {
    pub fn compute(params: &PromptParams, emb: &EmbeddingTable) -> Result<Self> {
        check_dim(params.dim, emb.dim())?;
        let mut rows = Vec::with_capacity(emb.len());
        let mut norms = Vec::with_capacity(emb.len());
        for node in 0..emb.len() {
            let e = emb.vector(node);
            if e.is_empty() {
                rows.push(Vec::new());
                norms.push(0.0);
            } else {
                let w = params.transform(e);
                norms.push(norm(&w));
                rows.push(w);
            }
        }
        Ok(ClassWeights {
            rows,
            norms,
            tau: params.tau,
        })
    }

    pub fn row(&self, node: usize) -> &[f64] {
        &self.rows[node]
    }

    pub fn norm(&self, node: usize) -> f64 {
        self.norms[node]
    }

    pub fn tau(&self) -> f64 {
        self.tau
    }

    fn cosine(&self, node: usize, v: &[f64], v_norm: f64) -> Result<f64> {
        let wn = self.norms[node];
        if wn == 0.0 || !wn.is_finite() {
            return Err(Error::ZeroVector(format!("weight of node {node}")));
        }
        Ok(dot(&self.rows[node], v) / (wn * v_norm))
    }

    /// `cos(w_n, v)` for every node (root entry is 0).
    pub fn cosines(&self, v: &[f64]) -> Result<Vec<f64>> {
        let vn = feature_norm(v)?;
        let mut out = vec![0.0; self.rows.len()];
        for (node, slot) in out.iter_mut().enumerate() {
            if !self.rows[node].is_empty() {
                *slot = self.cosine(node, v, vn)?;
            }
        }
        Ok(out)
    }

    /// Cosines restricted to `labels`, in member order.
    pub fn label_cosines(&self, v: &[f64], labels: &LabelSet) -> Result<Vec<f64>> {
        let vn = feature_norm(v)?;
        labels
            .members()
            .iter()
            .map(|&m| {
                if self.rows.get(m).is_none_or(|r| r.is_empty()) {
                    Err(Error::MissingEmbedding(format!("node {m}")))
                } else {
                    self.cosine(m, v, vn)
                }
            })
            .collect()
    }
}

fn feature_norm(v: &[f64]) -> Result<f64> {
    let vn = norm(v);
    if vn == 0.0 || !vn.is_finite() {
        return Err(Error::ZeroVector("feature".to_string()));
    }
    Ok(vn)
}

/// Softmax of `cos / tau`, shifted by the maximum for stability.
pub fn softmax_scaled(cosines: &[f64], tau: f64) -> Vec<f64> {
    let max = cosines.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = cosines.iter().map(|&c| ((c - max) / tau).exp()).collect();
    let z: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / z).collect()
}

/// Member of `labels` with the largest score, ties to the smallest node index.
pub fn argmax_member(scores_by_node: &[f64], labels: &LabelSet) -> usize {
    let mut best = labels.members()[0];
    for &m in &labels.members()[1..] {
        if scores_by_node[m] > scores_by_node[best] {
            best = m;
        }
    }
    best
}

/// Weight rows `A·e_y + c` for every member of `labels`.
pub fn node_weights(
    params: &PromptParams,
    emb: &EmbeddingTable,
    labels: &LabelSet,
) -> Result<Vec<Vec<f64>>> {
    check_dim(params.dim, emb.dim())?;
    labels
        .members()
        .iter()
        .map(|&m| match emb.vectors.get(m) {
            Some(e) if !e.is_empty() => Ok(params.transform(e)),
            _ => Err(Error::MissingEmbedding(format!("node {m}"))),
        })
        .collect()
}

fn check_labels(labels: &LabelSet) -> Result<()> {
    if labels.len() < 2 {
        return Err(Error::InvalidParameter(format!(
            "label set needs at least 2 members, has {}",
            labels.len()
        )));
    }
    Ok(())
}

/// Class posterior over `labels` for feature `v`.
pub fn posterior(
    params: &PromptParams,
    v: &[f64],
    labels: &LabelSet,
    emb: &EmbeddingTable,
) -> Result<Vec<f64>> {
    check_labels(labels)?;
    check_dim(params.dim, v.len())?;
    let weights = ClassWeights::compute(params, emb)?;
    let cos = weights.label_cosines(v, labels)?;
    Ok(softmax_scaled(&cos, params.tau))
}

/// The most probable member of `labels`; ties go to the smallest node index.
pub fn predict(
    params: &PromptParams,
    v: &[f64],
    labels: &LabelSet,
    emb: &EmbeddingTable,
) -> Result<usize> {
    check_labels(labels)?;
    check_dim(params.dim, v.len())?;
    let weights = ClassWeights::compute(params, emb)?;
    let cos = weights.label_cosines(v, labels)?;
    let mut best = 0;
    for i in 1..cos.len() {
        if cos[i] > cos[best] {
            best = i;
        }
    }
    Ok(labels.members()[best])
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;
    use crate::taxonomy::tests::t6;
    use crate::taxonomy::LabelSetKind;

    /// T6 with orthonormal leaf embeddings and normalized-mean internal ones.
    pub(crate) fn t6_embeddings() -> (TaxonomyTree, EmbeddingTable) {
        let tree = t6();
        let dim = 4;
        let unit = |k: usize| {
            let mut v = vec![0.0; dim];
            v[k] = 1.0;
            v
        };
        let s2 = 0.5f64.sqrt();
        let s3 = (1.0f64 / 3.0).sqrt();
        let entries = vec![
            ("n1".to_string(), vec![s3, s3, s3, 0.0]),
            ("n2".to_string(), vec![0.0, s2, s2, 0.0]),
            ("n3".to_string(), unit(0)),
            ("n4".to_string(), unit(1)),
            ("n5".to_string(), unit(2)),
            ("n6".to_string(), unit(3)),
        ];
        let emb = EmbeddingTable::from_named(&tree, dim, entries).unwrap();
        (tree, emb)
    }

    fn two_label_setup(e1: Vec<f64>, e2: Vec<f64>) -> (TaxonomyTree, EmbeddingTable, LabelSet) {
        let tree = TaxonomyTree::from_document("r\t-\na\tr\nb\tr\n").unwrap();
        let emb = EmbeddingTable::from_named(
            &tree,
            e1.len(),
            vec![("a".to_string(), e1), ("b".to_string(), e2)],
        )
        .unwrap();
        let labels = tree.leaf_label_set();
        (tree, emb, labels)
    }

    #[test]
    fn identity_weights_are_embeddings() {
        let (tree, emb) = t6_embeddings();
        let p = PromptParams::identity(4, 1.0).unwrap();
        let labels = tree.leaf_label_set();
        let w = node_weights(&p, &emb, &labels).unwrap();
        for (row, &m) in w.iter().zip(labels.members()) {
            assert_eq!(row.as_slice(), emb.vector(m));
        }
    }

    #[test]
    fn zero_embedding_rejected() {
        let tree = TaxonomyTree::from_document("r\t-\na\tr\nb\tr\n").unwrap();
        let err = EmbeddingTable::from_named(
            &tree,
            2,
            vec![
                ("a".to_string(), vec![0.0, 0.0]),
                ("b".to_string(), vec![1.0, 0.0]),
            ],
        )
        .unwrap_err();
        assert!(matches!(err, Error::ZeroVector(_)));
        let err = EmbeddingTable::from_named(&tree, 2, vec![("a".to_string(), vec![1.0, 0.0])])
            .unwrap_err();
        assert!(matches!(err, Error::MissingEmbedding(_)));
    }

    #[test]
    fn scaled_a_keeps_posteriors() {
        let (tree, emb) = t6_embeddings();
        let p1 = PromptParams::identity(4, 0.5).unwrap();
        let mut p2 = p1.clone();
        p2.a.iter_mut().for_each(|x| *x *= 2.0);
        let labels = tree.leaf_label_set();
        let w1 = node_weights(&p1, &emb, &labels).unwrap();
        let w2 = node_weights(&p2, &emb, &labels).unwrap();
        assert_eq!(w2[0], w1[0].iter().map(|x| 2.0 * x).collect::<Vec<_>>());
        let v = [0.3, 0.9, -0.2, 0.4];
        let a = posterior(&p1, &v, &labels, &emb).unwrap();
        let b = posterior(&p2, &v, &labels, &emb).unwrap();
        for (x, y) in a.iter().zip(&b) {
            assert!((x - y).abs() < 1e-15);
        }
    }

    #[test]
    fn closed_form_two_way_softmax() {
        let (_, emb, labels) = two_label_setup(vec![1.0, 0.0], vec![0.0, 1.0]);
        let p = PromptParams::identity(2, 1.0).unwrap();
        let post = posterior(&p, &[1.0, 0.0], &labels, &emb).unwrap();
        let e = std::f64::consts::E;
        assert!((post[0] - e / (e + 1.0)).abs() < 1e-15);
        assert!((post[1] - 1.0 / (e + 1.0)).abs() < 1e-15);
        assert!((post[0] - 0.731059).abs() < 1e-6);
    }

    #[test]
    fn symmetric_weights_split_evenly() {
        let (_, emb, labels) = two_label_setup(vec![1.0, 1.0], vec![1.0, 1.0]);
        let p = PromptParams::identity(2, 0.07).unwrap();
        let post = posterior(&p, &[0.2, 0.7], &labels, &emb).unwrap();
        assert_eq!(post, vec![0.5, 0.5]);
        assert_eq!(predict(&p, &[0.2, 0.7], &labels, &emb).unwrap(), 1);
    }

    #[test]
    fn huge_temperature_flattens() {
        let (tree, emb) = t6_embeddings();
        let p = PromptParams::identity(4, 1e6).unwrap();
        let labels = tree.leaf_label_set();
        let post = posterior(&p, &[0.1, 1.0, 0.3, 0.0], &labels, &emb).unwrap();
        for x in post {
            assert!((x - 0.25).abs() < 1e-5);
        }
    }

    #[test]
    fn predictions() {
        let (_, emb, labels) = two_label_setup(vec![0.9, 0.4359], vec![0.1, 0.995]);
        let p = PromptParams::identity(2, 0.07).unwrap();
        assert_eq!(predict(&p, &[1.0, 0.0], &labels, &emb).unwrap(), 1);

        let (tree, emb) = t6_embeddings();
        let p = PromptParams::identity(4, 0.07).unwrap();
        let v = emb.vector(4).to_vec();
        assert_eq!(predict(&p, &v, &tree.leaf_label_set(), &emb).unwrap(), 4);
    }

    #[test]
    fn posterior_preconditions() {
        let (tree, emb) = t6_embeddings();
        let p = PromptParams::identity(4, 0.07).unwrap();
        let single = LabelSet::custom(&tree, vec![3], LabelSetKind::Leaf).unwrap();
        assert!(posterior(&p, &[1.0, 0.0, 0.0, 0.0], &single, &emb).is_err());
        let labels = tree.leaf_label_set();
        assert!(matches!(
            posterior(&p, &[0.0; 4], &labels, &emb),
            Err(Error::ZeroVector(_))
        ));
        let mut zero_a = p.clone();
        zero_a.a.iter_mut().for_each(|x| *x = 0.0);
        assert!(matches!(
            posterior(&zero_a, &[1.0, 0.0, 0.0, 0.0], &labels, &emb),
            Err(Error::ZeroVector(_))
        ));
        assert!(PromptParams::identity(4, 0.0).is_err());
    }

    #[test]
    fn k_shot_takes_first_per_leaf() {
        let tree = TaxonomyTree::from_document("r\t-\na\tr\nb\tr\n").unwrap();
        let ids: Vec<String> = (0..5).map(|i| format!("s{i}")).collect();
        let leaves = vec![1, 2, 1, 1, 2];
        let feats = vec![vec![1.0]; 5];
        let set = SampleSet::new(&tree, 1, ids, leaves, feats).unwrap();
        let k = set.first_k_per_leaf(1);
        assert_eq!(k.len(), 2);
        assert_eq!(k.id(0), "s0");
        assert_eq!(k.id(1), "s1");
        assert_eq!(set.first_k_per_leaf(2).len(), 4);
    }
}
