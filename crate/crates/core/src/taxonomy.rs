//! Class hierarchy: loading, validation and ancestor queries.
//!
//! Nodes are identified by their index in file order. The document format
//! requires parents to appear before their children, so index order is a
//! topological order and the root is always node 0.

use std::collections::HashMap;
use std::fmt::Write as _;

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct Node {
    pub name: String,
    pub parent: Option<usize>,
}

/// Immutable rooted tree of named class nodes.
#[derive(Debug, Clone, PartialEq)]
pub struct TaxonomyTree {
    nodes: Vec<Node>,
    children: Vec<Vec<usize>>,
    depth: Vec<usize>,
    leaves: Vec<usize>,
    internal: Vec<usize>,
    by_name: HashMap<String, usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum LabelSetKind {
    Leaf,
    NodeCentric(usize),
    Treecut,
}

/// An ordered set of non-root nodes used as a classification vocabulary.
/// Members are kept in ascending node-index order.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct LabelSet {
    members: Vec<usize>,
    kind: LabelSetKind,
}

impl LabelSet {
    pub(crate) fn new_unchecked(mut members: Vec<usize>, kind: LabelSetKind) -> Self {
        members.sort_unstable();
        members.dedup();
        LabelSet { members, kind }
    }

    /// Builds a treecut label set after checking antichain and full-cover
    /// against `tree`.
    pub fn treecut(tree: &TaxonomyTree, members: Vec<usize>) -> Result<Self> {
        let set = Self::new_unchecked(members, LabelSetKind::Treecut);
        tree.check_treecut(&set)?;
        Ok(set)
    }

    /// An arbitrary vocabulary (no structural guarantees beyond excluding the root).
    pub fn custom(tree: &TaxonomyTree, members: Vec<usize>, kind: LabelSetKind) -> Result<Self> {
        for &m in &members {
            tree.check_index(m)?;
            if m == tree.root() {
                return Err(Error::InvalidParameter(
                    "the root cannot be a label".to_string(),
                ));
            }
        }
        Ok(Self::new_unchecked(members, kind))
    }

    pub fn members(&self) -> &[usize] {
        &self.members
    }

    pub fn kind(&self) -> LabelSetKind {
        self.kind
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    pub fn contains(&self, node: usize) -> bool {
        self.members.binary_search(&node).is_ok()
    }

    pub fn names<'a>(&self, tree: &'a TaxonomyTree) -> Vec<&'a str> {
        self.members.iter().map(|&m| tree.name(m)).collect()
    }
}

impl TaxonomyTree {
    /// Parses the tab-separated `name<TAB>parent` document. The root line
    /// uses `-` as its parent; `#` lines and blank lines are skipped.
    pub fn from_document(document: &str) -> Result<Self> {
        let mut edges = Vec::new();
        for (lineno, raw) in document.lines().enumerate() {
            let line = raw.trim_end_matches('\r');
            if line.trim().is_empty() || line.starts_with('#') {
                continue;
            }
            let mut fields = line.split('\t');
            let name = fields.next().unwrap_or("").trim();
            let parent = fields
                .next()
                .ok_or_else(|| Error::parse(lineno + 1, "expected `name<TAB>parent`"))?
                .trim();
            if fields.next().is_some() {
                return Err(Error::parse(lineno + 1, "too many fields"));
            }
            if name.is_empty() {
                return Err(Error::parse(lineno + 1, "empty node name"));
            }
            if parent.is_empty() {
                return Err(Error::parse(lineno + 1, "empty parent field"));
            }
            let parent = (parent != "-").then(|| parent.to_string());
            edges.push((name.to_string(), parent));
        }
        Self::from_edges(edges)
    }

    /// Builds a tree from `(name, parent name)` pairs in topological order.
    pub fn from_edges(edges: Vec<(String, Option<String>)>) -> Result<Self> {
        if edges.is_empty() {
            return Err(Error::EmptyDocument);
        }
        let mut by_name: HashMap<String, usize> = HashMap::with_capacity(edges.len());
        let mut nodes = Vec::with_capacity(edges.len());
        let mut roots = 0usize;
        for (index, (name, parent)) in edges.into_iter().enumerate() {
            if by_name.contains_key(&name) {
                return Err(Error::DuplicateName(name));
            }
            let parent = match parent {
                None => {
                    roots += 1;
                    None
                }
                Some(p) if p == name => return Err(Error::Cycle(name)),
                Some(p) => match by_name.get(&p) {
                    Some(&pi) => Some(pi),
                    None => {
                        return Err(Error::UnknownParent {
                            node: name,
                            parent: p,
                        })
                    }
                },
            };
            by_name.insert(name.clone(), index);
            nodes.push(Node { name, parent });
        }
        // The first record can never reference an earlier line, so a single
        // root is necessarily node 0.
        if roots != 1 {
            return Err(Error::RootCount(roots));
        }
        if nodes.len() == 1 {
            return Err(Error::RootOnly);
        }

        let n = nodes.len();
        let mut children = vec![Vec::new(); n];
        let mut depth = vec![0usize; n];
        for (i, node) in nodes.iter().enumerate().skip(1) {
            let p = node.parent.expect("non-root nodes have parents");
            children[p].push(i);
            depth[i] = depth[p] + 1;
        }
        let (leaves, internal): (Vec<usize>, Vec<usize>) =
            (0..n).partition(|&i| children[i].is_empty());

        Ok(TaxonomyTree {
            nodes,
            children,
            depth,
            leaves,
            internal,
            by_name,
        })
    }

    pub fn to_document(&self) -> String {
        let mut out = String::new();
        for node in &self.nodes {
            let parent = node.parent.map_or("-", |p| self.nodes[p].name.as_str());
            let _ = writeln!(out, "{}\t{}", node.name, parent);
        }
        out
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn root(&self) -> usize {
        0
    }

    pub fn nodes(&self) -> &[Node] {
        &self.nodes
    }

    pub fn name(&self, node: usize) -> &str {
        &self.nodes[node].name
    }

    pub fn index_of(&self, name: &str) -> Result<usize> {
        self.by_name
            .get(name)
            .copied()
            .ok_or_else(|| Error::UnknownName(name.to_string()))
    }

    pub fn parent(&self, node: usize) -> Option<usize> {
        self.nodes[node].parent
    }

    pub fn children(&self, node: usize) -> &[usize] {
        &self.children[node]
    }

    pub fn depth(&self, node: usize) -> usize {
        self.depth[node]
    }

    pub fn max_depth(&self) -> usize {
        self.leaves
            .iter()
            .map(|&l| self.depth[l])
            .max()
            .unwrap_or(0)
    }

    pub fn is_leaf(&self, node: usize) -> bool {
        self.children[node].is_empty()
    }

    /// Leaf nodes in ascending index order.
    pub fn leaves(&self) -> &[usize] {
        &self.leaves
    }

    /// Internal nodes in ascending index order (the root first).
    pub fn internal_nodes(&self) -> &[usize] {
        &self.internal
    }

    pub(crate) fn check_index(&self, node: usize) -> Result<()> {
        if node < self.nodes.len() {
            Ok(())
        } else {
            Err(Error::IndexOutOfRange {
                index: node,
                len: self.nodes.len(),
            })
        }
    }

    /// Ancestors of `node` from its parent up to the root.
    pub fn ancestors(&self, node: usize) -> Result<Vec<usize>> {
        self.check_index(node)?;
        let mut out = Vec::with_capacity(self.depth[node]);
        let mut cur = self.nodes[node].parent;
        while let Some(p) = cur {
            out.push(p);
            cur = self.nodes[p].parent;
        }
        Ok(out)
    }

    /// True when `candidate` is `node` or one of its ancestors.
    pub fn is_ancestor_or_self(&self, candidate: usize, node: usize) -> bool {
        let target_depth = self.depth[candidate];
        if self.depth[node] < target_depth {
            return false;
        }
        let mut cur = node;
        while self.depth[cur] > target_depth {
            cur = self.nodes[cur].parent.expect("depth > 0 implies a parent");
        }
        cur == candidate
    }

    /// The unique member of `labels` lying on the path from `leaf` to the
    /// root (the leaf itself included), or `None` if no member does.
    pub fn target_in(&self, leaf: usize, labels: &LabelSet) -> Result<Option<usize>> {
        self.check_index(leaf)?;
        if !self.is_leaf(leaf) {
            return Err(Error::NotLeaf(self.name(leaf).to_string()));
        }
        let mut found = None;
        let mut count = 0usize;
        let mut cur = Some(leaf);
        while let Some(n) = cur {
            if labels.contains(n) {
                count += 1;
                found.get_or_insert(n);
            }
            cur = self.nodes[n].parent;
        }
        if count > 1 {
            return Err(Error::Antichain {
                leaf: self.name(leaf).to_string(),
                count,
            });
        }
        Ok(found)
    }

    /// The node-centric vocabulary `Chd(n)`.
    pub fn node_label_set(&self, n: usize) -> Result<LabelSet> {
        self.check_index(n)?;
        if self.is_leaf(n) {
            return Err(Error::NotInternal(self.name(n).to_string()));
        }
        Ok(LabelSet::new_unchecked(
            self.children[n].clone(),
            LabelSetKind::NodeCentric(n),
        ))
    }

    pub fn leaf_label_set(&self) -> LabelSet {
        LabelSet::new_unchecked(self.leaves.clone(), LabelSetKind::Leaf)
    }

    /// Verifies the treecut invariants: no root, antichain, full leaf cover.
    pub fn check_treecut(&self, labels: &LabelSet) -> Result<()> {
        for &m in labels.members() {
            self.check_index(m)?;
            if m == self.root() {
                return Err(Error::InvalidCut("contains the root".to_string()));
            }
        }
        for &leaf in &self.leaves {
            match self.target_in(leaf, labels) {
                Ok(Some(_)) => {}
                Ok(None) => {
                    return Err(Error::InvalidCut(format!(
                        "leaf {:?} is not covered",
                        self.name(leaf)
                    )))
                }
                Err(e) => return Err(Error::InvalidCut(e.to_string())),
            }
        }
        // Every member must sit above at least one leaf, which holds for any
        // tree node; members that are ancestors of one another were caught
        // by target_in above.
        Ok(())
    }
}
