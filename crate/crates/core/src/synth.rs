//! Seeded synthetic fixtures: a balanced tree, orthonormal leaf embeddings,
//! superclass embeddings at the normalized mean of their leaves, and
//! Gaussian sample clouds around each leaf.

use std::collections::VecDeque;

use rand_distr::{Distribution, StandardNormal};

use crate::classifier::{norm, EmbeddingTable, SampleSet};
use crate::error::{Error, Result};
use crate::rng::Rng64;
use crate::taxonomy::TaxonomyTree;

#[derive(Debug, Clone, PartialEq)]
pub struct SynthConfig {
    pub leaves: usize,
    pub depth: usize,
    pub dim: usize,
    pub per_leaf_train: usize,
    pub per_leaf_test: usize,
    /// Standard deviation of the per-coordinate sample noise.
    pub noise: f64,
    pub seed: u64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig {
            leaves: 27,
            depth: 3,
            dim: 64,
            per_leaf_train: 30,
            per_leaf_test: 30,
            noise: 0.6,
            seed: 0,
        }
    }
}

impl SynthConfig {
    pub fn header(&self) -> String {
        format!(
            "gen-synth seed={} leaves={} depth={} dim={} per_leaf_train={} per_leaf_test={} noise={}",
            self.seed,
            self.leaves,
            self.depth,
            self.dim,
            self.per_leaf_train,
            self.per_leaf_test,
            self.noise
        )
    }
}

#[derive(Debug, Clone)]
pub struct Fixture {
    pub tree: TaxonomyTree,
    pub emb: EmbeddingTable,
    pub train: SampleSet,
    pub test: SampleSet,
}

const EMBEDDING_STREAM: u64 = 1 << 40;
const TRAIN_STREAM: u64 = 2 << 40;
const TEST_STREAM: u64 = 3 << 40;

/// Smallest branching factor `b ≥ 2` with `b^levels ≥ count`, capped at `count`.
fn branching(count: usize, levels: usize) -> usize {
    let mut b = 2usize;
    while b < count && b.checked_pow(levels as u32).is_some_and(|p| p < count) {
        b += 1;
    }
    b.min(count)
}

/// Balanced tree with `leaves` leaves, all at depth `depth`, in breadth-first order.
pub fn balanced_tree(leaves: usize, depth: usize) -> Result<TaxonomyTree> {
    if leaves < 2 {
        return Err(Error::InvalidParameter(
            "need at least 2 leaves".to_string(),
        ));
    }
    if depth == 0 {
        return Err(Error::InvalidParameter(
            "depth must be at least 1".to_string(),
        ));
    }
    let mut edges: Vec<(String, Option<String>)> = vec![("root".to_string(), None)];
    let mut queue = VecDeque::from([("root".to_string(), leaves, depth)]);
    let mut leaf_id = 0;
    let mut group_ids = vec![0usize; depth + 1];
    while let Some((name, count, levels)) = queue.pop_front() {
        if levels == 1 {
            for _ in 0..count {
                edges.push((format!("c{leaf_id:03}"), Some(name.clone())));
                leaf_id += 1;
            }
            continue;
        }
        let b = branching(count, levels);
        let level = depth - levels + 1;
        for g in 0..b {
            let size = count / b + usize::from(g < count % b);
            let child = format!("g{level}_{}", group_ids[level]);
            group_ids[level] += 1;
            edges.push((child.clone(), Some(name.clone())));
            queue.push_back((child, size, levels - 1));
        }
    }
    TaxonomyTree::from_edges(edges)
}

fn gaussian(rng: &mut Rng64) -> f64 {
    StandardNormal.sample(rng)
}

/// `count` random orthonormal vectors in `dim` dimensions (Gram–Schmidt on
/// Gaussian draws).
fn orthonormal_basis(count: usize, dim: usize, rng: &mut Rng64) -> Vec<Vec<f64>> {
    let mut basis: Vec<Vec<f64>> = Vec::with_capacity(count);
    while basis.len() < count {
        let mut v: Vec<f64> = (0..dim).map(|_| gaussian(rng)).collect();
        // Two passes of modified Gram-Schmidt keep the basis orthogonal to
        // machine precision.
        for _ in 0..2 {
            for u in &basis {
                let proj: f64 = v.iter().zip(u).map(|(a, b)| a * b).sum();
                for (vi, ui) in v.iter_mut().zip(u) {
                    *vi -= proj * ui;
                }
            }
        }
        let n = norm(&v);
        if n > 1e-8 {
            basis.push(v.into_iter().map(|x| x / n).collect());
        }
    }
    basis
}

fn fixture_embeddings(tree: &TaxonomyTree, dim: usize, rng: &mut Rng64) -> Result<EmbeddingTable> {
    let basis = orthonormal_basis(tree.leaves().len(), dim, rng);
    let mut sums = vec![vec![0.0; dim]; tree.len()];
    for (&leaf, e) in tree.leaves().iter().zip(&basis) {
        let mut cur = Some(leaf);
        while let Some(n) = cur {
            for (s, x) in sums[n].iter_mut().zip(e) {
                *s += x;
            }
            cur = tree.parent(n);
        }
    }
    let entries = (1..tree.len()).map(|n| {
        let v = &sums[n];
        let len = norm(v);
        (
            tree.name(n).to_string(),
            v.iter().map(|x| x / len).collect(),
        )
    });
    EmbeddingTable::from_named(tree, dim, entries)
}

fn fixture_samples(
    tree: &TaxonomyTree,
    emb: &EmbeddingTable,
    per_leaf: usize,
    noise: f64,
    prefix: &str,
    rng: &mut Rng64,
) -> Result<SampleSet> {
    let n = per_leaf * tree.leaves().len();
    let mut ids = Vec::with_capacity(n);
    let mut leaves = Vec::with_capacity(n);
    let mut features = Vec::with_capacity(n);
    for &leaf in tree.leaves() {
        for k in 0..per_leaf {
            ids.push(format!("{prefix}_{}_{k}", tree.name(leaf)));
            leaves.push(leaf);
            features.push(
                emb.vector(leaf)
                    .iter()
                    .map(|x| x + noise * gaussian(rng))
                    .collect(),
            );
        }
    }
    SampleSet::new(tree, emb.dim(), ids, leaves, features)
}

pub fn gen_synth(config: &SynthConfig) -> Result<Fixture> {
    if config.dim < config.leaves {
        return Err(Error::InvalidParameter(format!(
            "dim {} < leaves {}: leaf embeddings cannot be orthogonal",
            config.dim, config.leaves
        )));
    }
    if !(config.noise >= 0.0 && config.noise.is_finite()) {
        return Err(Error::InvalidParameter(format!(
            "noise {} must be >= 0",
            config.noise
        )));
    }
    let tree = balanced_tree(config.leaves, config.depth)?;
    let emb = fixture_embeddings(
        &tree,
        config.dim,
        &mut Rng64::stream(config.seed, EMBEDDING_STREAM),
    )?;
    let train = fixture_samples(
        &tree,
        &emb,
        config.per_leaf_train,
        config.noise,
        "train",
        &mut Rng64::stream(config.seed, TRAIN_STREAM),
    )?;
    let test = fixture_samples(
        &tree,
        &emb,
        config.per_leaf_test,
        config.noise,
        "test",
        &mut Rng64::stream(config.seed, TEST_STREAM),
    )?;
    Ok(Fixture {
        tree,
        emb,
        train,
        test,
    })
}
