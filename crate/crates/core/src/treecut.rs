//! Matrix-based treecut sampling.
//!
//! A treecut is a pruned subtree that contains the root; its leaves form a
//! label set that is an antichain covering every leaf of the full tree.
//! Sampling works on precomputed dense matrices:
//!
//! * `D` (K×K): `D[i][j] = 1` iff internal node `j` is `i` or an ancestor of `i`.
//! * `B` (K×L): `1` if label `j` is internal node `i` or one of its ancestors,
//!   `0` if `j` is a strict descendant of `i`, `-1` otherwise.
//! * `B̄ = 1 − |B|`.
//!
//! Raw keep flags `p` are made consistent with `p̃ = p ⊙ 1[Dp = D·1]`, and the
//! blocked-label count is `b = max(B, 0)ᵀ p̃ + B̄ᵀ (1 − p̃)`. Labels with
//! `b_j = 0` form the sampled set. A kept node blocks itself and its
//! ancestors; a pruned node blocks its strict descendants.

use std::collections::{BTreeSet, HashSet};

use crate::error::{Error, Result};
use crate::rng::Rng64;
use crate::taxonomy::{LabelSet, LabelSetKind, TaxonomyTree};

/// Largest internal-node count accepted by [`enumerate_treecuts`].
pub const MAX_ENUMERATION_INTERNAL: usize = 20;

#[derive(Debug, Clone, PartialEq)]
pub struct MatrixBundle {
    k: usize,
    l: usize,
    d: Vec<u8>,
    d1: Vec<u32>,
    b: Vec<i8>,
    bbar: Vec<u8>,
    internal_order: Vec<usize>,
    label_order: Vec<usize>,
}

impl MatrixBundle {
    /// Number of internal nodes (rows).
    pub fn k(&self) -> usize {
        self.k
    }

    /// Number of candidate labels (columns): every node but the root.
    pub fn l(&self) -> usize {
        self.l
    }

    pub fn d(&self, i: usize, j: usize) -> u8 {
        self.d[i * self.k + j]
    }

    pub fn d1(&self) -> &[u32] {
        &self.d1
    }

    pub fn b(&self, i: usize, j: usize) -> i8 {
        self.b[i * self.l + j]
    }

    pub fn bbar(&self, i: usize, j: usize) -> u8 {
        self.bbar[i * self.l + j]
    }

    pub fn d_row(&self, i: usize) -> &[u8] {
        &self.d[i * self.k..(i + 1) * self.k]
    }

    pub fn b_row(&self, i: usize) -> &[i8] {
        &self.b[i * self.l..(i + 1) * self.l]
    }

    pub fn bbar_row(&self, i: usize) -> &[u8] {
        &self.bbar[i * self.l..(i + 1) * self.l]
    }

    pub fn internal_order(&self) -> &[usize] {
        &self.internal_order
    }

    pub fn label_order(&self) -> &[usize] {
        &self.label_order
    }
}

/// Precomputes `D`, `D·1`, `B` and `B̄` for `tree`.
pub fn build_matrices(tree: &TaxonomyTree) -> Result<MatrixBundle> {
    if tree.leaves().len() < 2 {
        return Err(Error::InvalidParameter(
            "treecut sampling needs at least two leaves".to_string(),
        ));
    }
    let internal_order = tree.internal_nodes().to_vec();
    let label_order: Vec<usize> = (1..tree.len()).collect();
    let k = internal_order.len();
    let l = label_order.len();

    let mut d = vec![0u8; k * k];
    let mut d1 = vec![0u32; k];
    for (i, &ni) in internal_order.iter().enumerate() {
        for (j, &nj) in internal_order.iter().enumerate() {
            if tree.is_ancestor_or_self(nj, ni) {
                d[i * k + j] = 1;
                d1[i] += 1;
            }
        }
    }

    let mut b = vec![0i8; k * l];
    let mut bbar = vec![0u8; k * l];
    for (i, &ni) in internal_order.iter().enumerate() {
        for (j, &nj) in label_order.iter().enumerate() {
            let v = if tree.is_ancestor_or_self(nj, ni) {
                1
            } else if tree.is_ancestor_or_self(ni, nj) {
                0
            } else {
                -1
            };
            b[i * l + j] = v;
            bbar[i * l + j] = 1 - v.unsigned_abs();
        }
    }

    Ok(MatrixBundle {
        k,
        l,
        d,
        d1,
        b,
        bbar,
        internal_order,
        label_order,
    })
}

/// Keep flags over internal nodes, in `internal_order`. `1` keeps (expands)
/// a node, `0` prunes its subtree.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct KeepFlags {
    p: Vec<u8>,
    corrected: bool,
}

impl KeepFlags {
    /// Raw, uncorrected flags. The root position (index 0) must be set.
    pub fn raw(p: Vec<u8>) -> Result<Self> {
        if p.first() != Some(&1) {
            return Err(Error::InvalidParameter(
                "the root keep flag must be 1".to_string(),
            ));
        }
        if p.iter().any(|&x| x > 1) {
            return Err(Error::InvalidParameter(
                "keep flags must be 0 or 1".to_string(),
            ));
        }
        Ok(KeepFlags {
            p,
            corrected: false,
        })
    }

    pub fn flags(&self) -> &[u8] {
        &self.p
    }

    pub fn is_corrected(&self) -> bool {
        self.corrected
    }

    pub fn kept_count(&self) -> usize {
        self.p.iter().filter(|&&x| x == 1).count()
    }
}

fn check_len(expected: usize, got: usize) -> Result<()> {
    if expected == got {
        Ok(())
    } else {
        Err(Error::DimensionMismatch { expected, got })
    }
}

/// `p̃ = p ⊙ 1[Dp = D·1]`: a node stays kept only if every internal ancestor is kept.
pub fn correct_flags(p: &KeepFlags, bundle: &MatrixBundle) -> Result<KeepFlags> {
    check_len(bundle.k, p.p.len())?;
    let corrected = (0..bundle.k)
        .map(|i| {
            let dp: u32 = bundle
                .d_row(i)
                .iter()
                .zip(&p.p)
                .map(|(&dij, &pj)| u32::from(dij * pj))
                .sum();
            p.p[i] * u8::from(dp == bundle.d1[i])
        })
        .collect();
    Ok(KeepFlags {
        p: corrected,
        corrected: true,
    })
}

/// Blocked-label counts `b` over `label_order`; zero entries are available labels.
pub fn blocked_mask(ptilde: &KeepFlags, bundle: &MatrixBundle) -> Result<Vec<i64>> {
    check_len(bundle.k, ptilde.p.len())?;
    if !ptilde.corrected {
        return Err(Error::InvalidParameter(
            "blocked_mask expects corrected flags".to_string(),
        ));
    }
    let mut b = vec![0i64; bundle.l];
    for (i, &keep) in ptilde.p.iter().enumerate() {
        if keep == 1 {
            for (acc, &bij) in b.iter_mut().zip(bundle.b_row(i)) {
                *acc += i64::from(bij.max(0));
            }
        } else {
            for (acc, &bbij) in b.iter_mut().zip(bundle.bbar_row(i)) {
                *acc += i64::from(bbij);
            }
        }
    }
    Ok(b)
}

/// Collects the zero positions of a blocked mask as a treecut label set.
pub fn label_set_from_mask(mask: &[i64], bundle: &MatrixBundle) -> LabelSet {
    let members = mask
        .iter()
        .zip(&bundle.label_order)
        .filter(|(&b, _)| b == 0)
        .map(|(_, &node)| node)
        .collect();
    LabelSet::new_unchecked(members, LabelSetKind::Treecut)
}

/// Runs correction and masking on raw flags.
pub fn cut_from_flags(p: &KeepFlags, bundle: &MatrixBundle) -> Result<LabelSet> {
    let ptilde = correct_flags(p, bundle)?;
    let mask = blocked_mask(&ptilde, bundle)?;
    Ok(label_set_from_mask(&mask, bundle))
}

fn check_beta(beta: f64) -> Result<()> {
    if (0.0..=1.0).contains(&beta) {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!(
            "beta {beta} outside [0, 1]"
        )))
    }
}

/// Draws raw keep flags: the root is always kept, every other internal node
/// (in `internal_order`) is kept iff a uniform draw is `>= beta`.
pub fn draw_flags(bundle: &MatrixBundle, beta: f64, rng: &mut Rng64) -> Result<KeepFlags> {
    check_beta(beta)?;
    let mut p = Vec::with_capacity(bundle.k);
    p.push(1);
    for _ in 1..bundle.k {
        p.push(u8::from(rng.next_unit() >= beta));
    }
    Ok(KeepFlags {
        p,
        corrected: false,
    })
}

/// Samples one treecut label set with tree-dropout rate `beta`.
pub fn sample_treecut(
    tree: &TaxonomyTree,
    bundle: &MatrixBundle,
    beta: f64,
    rng: &mut Rng64,
) -> Result<LabelSet> {
    check_len(tree.internal_nodes().len(), bundle.k)?;
    let p = draw_flags(bundle, beta, rng)?;
    cut_from_flags(&p, bundle)
}

/// Result of [`sample_distinct`].
#[derive(Debug, Clone, PartialEq)]
pub struct DistinctCuts {
    pub cuts: Vec<LabelSet>,
    pub requested: usize,
    pub draws: usize,
}

impl DistinctCuts {
    pub fn shortfall(&self) -> usize {
        self.requested - self.cuts.len()
    }
}

/// Up to `count` pairwise-distinct treecuts by rejection sampling, capped
/// at `100 · count` draws. Order of first appearance is preserved.
pub fn sample_distinct(
    tree: &TaxonomyTree,
    bundle: &MatrixBundle,
    beta: f64,
    count: usize,
    rng: &mut Rng64,
) -> Result<DistinctCuts> {
    if count == 0 {
        return Err(Error::InvalidParameter(
            "cut count must be at least 1".to_string(),
        ));
    }
    let cap = count.saturating_mul(100);
    let mut seen = HashSet::new();
    let mut cuts = Vec::with_capacity(count);
    let mut draws = 0;
    while cuts.len() < count && draws < cap {
        let cut = sample_treecut(tree, bundle, beta, rng)?;
        draws += 1;
        if seen.insert(cut.members().to_vec()) {
            cuts.push(cut);
        }
    }
    Ok(DistinctCuts {
        cuts,
        requested: count,
        draws,
    })
}

/// Every treecut of `tree`, by direct recursion: each non-root internal
/// node is either cut (becomes a label) or expanded into its children.
pub fn enumerate_treecuts(tree: &TaxonomyTree) -> Result<BTreeSet<Vec<usize>>> {
    let k = tree.internal_nodes().len();
    if k > MAX_ENUMERATION_INTERNAL {
        return Err(Error::TooLarge(k));
    }
    fn expand(tree: &TaxonomyTree, node: usize) -> Vec<Vec<usize>> {
        let mut acc: Vec<Vec<usize>> = vec![Vec::new()];
        for &child in tree.children(node) {
            let options = options(tree, child);
            let mut next = Vec::with_capacity(acc.len() * options.len());
            for prefix in &acc {
                for opt in &options {
                    let mut v = prefix.clone();
                    v.extend_from_slice(opt);
                    next.push(v);
                }
            }
            acc = next;
        }
        acc
    }
    fn options(tree: &TaxonomyTree, node: usize) -> Vec<Vec<usize>> {
        let mut out = vec![vec![node]];
        if !tree.is_leaf(node) {
            out.extend(expand(tree, node));
        }
        out
    }
    Ok(expand(tree, tree.root())
        .into_iter()
        .map(|mut v| {
            v.sort_unstable();
            v
        })
        .collect())
}
