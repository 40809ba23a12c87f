//! Bottom-up tree hashing with canonical ordering of commutative children.
//!
//! Nodes are visited in postorder. A leaf's hash is its initial hash; a
//! function node's hash combines its children's hashes with its own initial
//! hash. Children of commutative nodes are first sorted by hash value and
//! their subarrays are physically reordered, so isomorphic trees end up with
//! identical node arrays and identical hash sequences.

use std::fmt;
use std::str::FromStr;
use std::sync::atomic::{AtomicUsize, Ordering};

use serde::{Deserialize, Serialize};
use xxhash_rust::xxh3::xxh3_64_with_seed;

use crate::expr::{ExpressionTree, Node, NodeKind, Violation};

/// Default seed of the node hash function.
pub const DEFAULT_SEED: u64 = 0x9e37_79b9_7f4a_7c15;

/// How constant leaves contribute to hashes.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum HashMode {
    /// Constants are hashed by the full bit pattern of their value.
    #[default]
    Strict,
    /// All constants share one hash; only the tree shape and variables count.
    Structural,
}

impl fmt::Display for HashMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            HashMode::Strict => "strict",
            HashMode::Structural => "structural",
        })
    }
}

impl FromStr for HashMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "strict" => Ok(HashMode::Strict),
            "structural" => Ok(HashMode::Structural),
            other => Err(format!("unknown hash mode '{other}' (expected strict|structural)")),
        }
    }
}

/// Per-node hash values aligned with the canonical postorder array.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct HashSequence(Vec<u64>);

impl HashSequence {
    pub fn values(&self) -> &[u64] {
        &self.0
    }

    pub fn into_values(self) -> Vec<u64> {
        self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn root(&self) -> u64 {
        *self.0.last().expect("hash sequence is non-empty")
    }
}

/// Hashes trees with a fixed mode and seed.
///
/// Counts how many trees it has hashed, which lets callers verify that
/// batch operations hash each input exactly once.
#[derive(Debug)]
pub struct TreeHasher {
    mode: HashMode,
    seed: u64,
    function_hashes: [u64; 11],
    structural_constant: u64,
    calls: AtomicUsize,
}

impl Clone for TreeHasher {
    fn clone(&self) -> Self {
        TreeHasher::with_seed(self.mode, self.seed)
    }
}

impl Default for TreeHasher {
    fn default() -> Self {
        TreeHasher::new(HashMode::default())
    }
}

impl TreeHasher {
    pub fn new(mode: HashMode) -> Self {
        Self::with_seed(mode, DEFAULT_SEED)
    }

    pub fn with_seed(mode: HashMode, seed: u64) -> Self {
        let mut function_hashes = [0u64; 11];
        for kind in NodeKind::ALL {
            function_hashes[kind.tag() as usize] = xxh3_64_with_seed(&[kind.tag()], seed);
        }
        TreeHasher {
            mode,
            seed,
            function_hashes,
            structural_constant: xxh3_64_with_seed(&[NodeKind::Constant.tag()], seed),
            calls: AtomicUsize::new(0),
        }
    }

    pub fn mode(&self) -> HashMode {
        self.mode
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// Number of trees hashed so far.
    pub fn calls(&self) -> usize {
        self.calls.load(Ordering::Relaxed)
    }

    pub fn reset_calls(&self) {
        self.calls.store(0, Ordering::Relaxed);
    }

    /// Initial hash of a node: kind tag plus its mode-dependent payload.
    pub fn initial_hash(&self, node: &Node) -> u64 {
        match node.kind {
            NodeKind::Variable => {
                let mut bytes = [0u8; 5];
                bytes[0] = node.kind.tag();
                bytes[1..].copy_from_slice(&node.variable.to_le_bytes());
                xxh3_64_with_seed(&bytes, self.seed)
            }
            NodeKind::Constant => match self.mode {
                HashMode::Structural => self.structural_constant,
                HashMode::Strict => {
                    let mut bytes = [0u8; 9];
                    bytes[0] = node.kind.tag();
                    bytes[1..].copy_from_slice(&node.value.to_bits().to_le_bytes());
                    xxh3_64_with_seed(&bytes, self.seed)
                }
            },
            kind => self.function_hashes[kind.tag() as usize],
        }
    }

    /// Returns the canonical tree and its aligned hash sequence. The input is
    /// not modified.
    pub fn hash_tree(
        &self,
        tree: &ExpressionTree,
    ) -> Result<(ExpressionTree, HashSequence), Violation> {
        tree.validate()?;
        self.calls.fetch_add(1, Ordering::Relaxed);
        let mut nodes = tree.nodes().to_vec();
        let hashes = self.canonicalize(&mut nodes);
        Ok((
            ExpressionTree::from_nodes_unchecked(nodes),
            HashSequence(hashes),
        ))
    }

    pub fn root_hash(&self, tree: &ExpressionTree) -> Result<u64, Violation> {
        Ok(self.hash_tree(tree)?.1.root())
    }

    /// Sorts commutative children in place and returns the hash of every node.
    fn canonicalize(&self, nodes: &mut [Node]) -> Vec<u64> {
        let n = nodes.len();
        let mut hashes = vec![0u64; n];
        let mut children: Vec<usize> = Vec::new();
        let mut order: Vec<usize> = Vec::new();
        let mut node_buf: Vec<Node> = Vec::new();
        let mut hash_buf: Vec<u64> = Vec::new();
        let mut bytes: Vec<u8> = Vec::new();

        for i in 0..n {
            let node = nodes[i];
            let own = self.initial_hash(&node);
            let arity = node.arity as usize;
            if arity == 0 {
                hashes[i] = own;
                continue;
            }
            let start = i + 1 - node.len();

            if node.kind.is_commutative() {
                if node.len() == arity + 1 {
                    // leaf children: stable insertion sort without a buffer
                    for a in start + 1..i {
                        let mut b = a;
                        while b > start && hashes[b - 1] > hashes[b] {
                            hashes.swap(b - 1, b);
                            nodes.swap(b - 1, b);
                            b -= 1;
                        }
                    }
                } else {
                    collect_children(nodes, i, &mut children);
                    order.clear();
                    order.extend(0..children.len());
                    order.sort_by_key(|&k| hashes[children[k]]);
                    if order.iter().enumerate().any(|(a, &b)| a != b) {
                        node_buf.clear();
                        hash_buf.clear();
                        for &k in &order {
                            let root = children[k];
                            let first = root + 1 - nodes[root].len();
                            node_buf.extend_from_slice(&nodes[first..=root]);
                            hash_buf.extend_from_slice(&hashes[first..=root]);
                        }
                        nodes[start..i].copy_from_slice(&node_buf);
                        hashes[start..i].copy_from_slice(&hash_buf);
                    }
                }
            }

            collect_children(nodes, i, &mut children);
            bytes.clear();
            for &c in &children {
                bytes.extend_from_slice(&hashes[c].to_le_bytes());
            }
            bytes.extend_from_slice(&own.to_le_bytes());
            hashes[i] = xxh3_64_with_seed(&bytes, self.seed);
        }
        hashes
    }
}

/// Child roots of `index` in array order.
fn collect_children(nodes: &[Node], index: usize, out: &mut Vec<usize>) {
    out.clear();
    let mut j = index;
    for _ in 0..nodes[index].arity {
        j -= 1;
        out.push(j);
        j = j + 1 - nodes[j].len();
    }
    out.reverse();
}

/// Canonical tree and hash sequence using the default seed.
pub fn hash_tree(
    tree: &ExpressionTree,
    mode: HashMode,
) -> Result<(ExpressionTree, HashSequence), Violation> {
    TreeHasher::new(mode).hash_tree(tree)
}

/// Root hash using the default seed.
pub fn root_hash(tree: &ExpressionTree, mode: HashMode) -> Result<u64, Violation> {
    TreeHasher::new(mode).root_hash(tree)
}
