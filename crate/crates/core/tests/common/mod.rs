#![allow(dead_code)]

use hiertune::{EmbeddingTable, Rng64, SampleSet, TaxonomyTree};
use rand_distr::{Distribution, StandardNormal};

pub const T6: &str = "n0\t-\nn1\tn0\nn2\tn1\nn3\tn1\nn4\tn2\nn5\tn2\nn6\tn0\n";

pub fn t6() -> TaxonomyTree {
    TaxonomyTree::from_document(T6).unwrap()
}

/// Random tree with at most `max_nodes` nodes, at most `max_internal`
/// internal nodes and at least two leaves.
pub fn random_tree(rng: &mut Rng64, max_nodes: usize, max_internal: usize) -> TaxonomyTree {
    loop {
        let n = 3 + (rng.next_u64() % (max_nodes as u64 - 2)) as usize;
        let mut parents: Vec<Option<usize>> = vec![None];
        let mut is_internal = vec![false];
        let mut internal = 0;
        for i in 1..n {
            let candidates: Vec<usize> = (0..i)
                .filter(|&j| is_internal[j] || internal < max_internal)
                .collect();
            let p = candidates[(rng.next_u64() % candidates.len() as u64) as usize];
            if !is_internal[p] {
                is_internal[p] = true;
                internal += 1;
            }
            parents.push(Some(p));
            is_internal.push(false);
        }
        let edges = parents
            .iter()
            .enumerate()
            .map(|(i, p)| (format!("v{i}"), p.map(|p| format!("v{p}"))))
            .collect();
        let tree = TaxonomyTree::from_edges(edges).unwrap();
        if tree.leaves().len() >= 2 {
            return tree;
        }
    }
}

pub fn gaussian(rng: &mut Rng64) -> f64 {
    StandardNormal.sample(rng)
}

pub fn random_embeddings(tree: &TaxonomyTree, dim: usize, rng: &mut Rng64) -> EmbeddingTable {
    let entries: Vec<(String, Vec<f64>)> = (1..tree.len())
        .map(|n| {
            (
                tree.name(n).to_string(),
                (0..dim).map(|_| gaussian(rng)).collect(),
            )
        })
        .collect();
    EmbeddingTable::from_named(tree, dim, entries).unwrap()
}

/// `count` samples on random leaves, each near its leaf embedding.
pub fn random_samples(
    tree: &TaxonomyTree,
    emb: &EmbeddingTable,
    count: usize,
    noise: f64,
    rng: &mut Rng64,
) -> SampleSet {
    let leaves = tree.leaves();
    let mut ids = Vec::new();
    let mut labels = Vec::new();
    let mut feats = Vec::new();
    for i in 0..count {
        let leaf = leaves[(rng.next_u64() % leaves.len() as u64) as usize];
        ids.push(format!("s{i}"));
        labels.push(leaf);
        feats.push(
            emb.vector(leaf)
                .iter()
                .map(|x| x + noise * gaussian(rng))
                .collect(),
        );
    }
    SampleSet::new(tree, emb.dim(), ids, labels, feats).unwrap()
}
