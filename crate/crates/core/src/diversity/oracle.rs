//! Hash-free reference distance.
//!
//! Every subtree is rebuilt as an explicit recursive shape, commutative
//! children are sorted by a total structural order, and the multisets of
//! subtree shapes of two trees are intersected by comparison. This is far
//! slower than the hash-based path and exists to check it.

use std::cmp::Ordering;

use crate::expr::{ExpressionTree, NodeKind};
use crate::hash::HashMode;
use crate::par;

use super::DistanceMatrix;

#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub struct Shape {
    tag: u8,
    payload: u64,
    children: Vec<Shape>,
}

/// Canonical shape of every subtree, indexed by postorder position.
pub fn subtree_shapes(tree: &ExpressionTree, mode: HashMode) -> Vec<Shape> {
    let nodes = tree.nodes();
    let mut shapes: Vec<Shape> = Vec::with_capacity(nodes.len());
    let mut stack: Vec<Shape> = Vec::new();
    for node in nodes {
        let payload = match node.kind {
            NodeKind::Variable => node.variable as u64,
            NodeKind::Constant if mode == HashMode::Strict => node.value.to_bits(),
            _ => 0,
        };
        let mut children = stack.split_off(stack.len() - node.arity as usize);
        if node.kind.is_commutative() {
            children.sort();
        }
        let shape = Shape {
            tag: node.kind.tag(),
            payload,
            children,
        };
        shapes.push(shape.clone());
        stack.push(shape);
    }
    shapes
}

/// Canonical shape of the whole tree.
pub fn canonical_shape(tree: &ExpressionTree, mode: HashMode) -> Shape {
    subtree_shapes(tree, mode).pop().expect("tree is non-empty")
}

/// `1 - dice` over the multisets of canonical subtree shapes.
pub fn bottom_up_distance(a: &ExpressionTree, b: &ExpressionTree, mode: HashMode) -> f64 {
    let mut sa = subtree_shapes(a, mode);
    let mut sb = subtree_shapes(b, mode);
    sa.sort();
    sb.sort();
    let (mut i, mut j, mut common) = (0, 0, 0usize);
    while i < sa.len() && j < sb.len() {
        match sa[i].cmp(&sb[j]) {
            Ordering::Less => i += 1,
            Ordering::Greater => j += 1,
            Ordering::Equal => {
                common += 1;
                i += 1;
                j += 1;
            }
        }
    }
    let total = sa.len() + sb.len();
    if total == 0 {
        return 0.0;
    }
    1.0 - (2 * common) as f64 / total as f64
}

/// Population matrix computed pair by pair with [`bottom_up_distance`].
pub fn bottom_up_matrix(population: &[ExpressionTree], mode: HashMode) -> DistanceMatrix {
    let n = population.len();
    let upper = par::map_range(n, |i| {
        (i + 1..n)
            .map(|j| bottom_up_distance(&population[i], &population[j], mode))
            .collect::<Vec<_>>()
    });
    super::mirror(n, upper)
}
