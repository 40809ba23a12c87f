#![allow(dead_code)]

use hashgp::expr::{ptc2, ExpressionTree, Grammar, Node};
use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// PTC2 tree with a uniform target length in `1..=max_len`.
pub fn random_tree<R: Rng>(rng: &mut R, grammar: &Grammar, max_len: usize) -> ExpressionTree {
    let target = rng.random_range(1..=max_len);
    ptc2(rng, grammar, target, 12).unwrap()
}

pub fn random_trees(seed: u64, n: usize, variables: usize, max_len: usize) -> Vec<ExpressionTree> {
    let grammar = Grammar::new(variables);
    let mut r = rng(seed);
    (0..n).map(|_| random_tree(&mut r, &grammar, max_len)).collect()
}

pub fn random_data<R: Rng>(rng: &mut R, rows: usize, cols: usize, lo: f64, hi: f64) -> Array2<f64> {
    Array2::from_shape_fn((rows, cols), |_| rng.random_range(lo..hi))
}

/// Rebuilds `tree` with the children of every commutative node shuffled.
pub fn permute_commutative<R: Rng>(rng: &mut R, tree: &ExpressionTree) -> ExpressionTree {
    fn emit<R: Rng>(rng: &mut R, tree: &ExpressionTree, i: usize, out: &mut Vec<Node>) {
        let node = tree.nodes()[i];
        let mut kids = tree.children(i);
        if node.kind.is_commutative() {
            for k in (1..kids.len()).rev() {
                kids.swap(k, rng.random_range(0..=k));
            }
        }
        for c in kids {
            emit(rng, tree, c, out);
        }
        out.push(node);
    }
    let mut out = Vec::with_capacity(tree.len());
    emit(rng, tree, tree.len() - 1, &mut out);
    ExpressionTree::new(out).unwrap()
}

/// Distance in units in the last place; `0` for identical bit patterns
/// (including equal infinities and any pair of NaNs).
pub fn ulps(a: f64, b: f64) -> u64 {
    if a.is_nan() && b.is_nan() {
        return 0;
    }
    if a == b {
        return 0;
    }
    if a.is_nan() || b.is_nan() || a.is_infinite() || b.is_infinite() {
        return u64::MAX;
    }
    let key = |x: f64| {
        let bits = x.to_bits() as i64;
        if bits < 0 { i64::MIN - bits } else { bits }
    };
    key(a).abs_diff(key(b))
}
