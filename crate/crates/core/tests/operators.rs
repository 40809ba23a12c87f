mod common;

use common::{random_tree, rng};
use hashgp::evolve::{mutate, mutate_with, subtree_crossover, Limits, MutationKind, MutationWeights};
use hashgp::expr::{ExpressionTree, Grammar, Node, NodeKind};
use rand::Rng;

const LIMITS: Limits = Limits {
    max_length: 50,
    max_depth: 12,
};

fn check(t: &ExpressionTree, vars: usize) {
    t.validate().unwrap();
    assert!(LIMITS.admits(t), "len {} depth {}", t.len(), t.depth());
    assert!(t.max_variable().is_none_or(|v| v < vars));
    for n in t.nodes() {
        assert!(n.kind.accepts_arity(n.arity as usize), "{n:?}");
        if n.kind == NodeKind::Constant {
            assert!(n.value.is_finite());
        }
    }
}

#[test]
fn mutation_keeps_trees_valid_and_bounded() {
    let grammar = Grammar::new(3);
    let weights = MutationWeights::default();
    let mut r = rng(30);
    for _ in 0..10_000 {
        let t = random_tree(&mut r, &grammar, 49);
        let m = mutate(&mut r, &t, &grammar, LIMITS, &weights);
        check(&m, 3);
    }
}

#[test]
fn each_mutation_kind_behaves() {
    let grammar = Grammar::new(3);
    let mut r = rng(31);
    let mut changed = [0usize; 4];
    for _ in 0..2000 {
        let t = random_tree(&mut r, &grammar, 49);
        for (k, kind) in MutationKind::ALL.into_iter().enumerate() {
            let m = mutate_with(&mut r, &t, &grammar, LIMITS, kind);
            check(&m, 3);
            changed[k] += (m != t) as usize;
            match kind {
                MutationKind::RemoveBranch => assert!(m.len() <= t.len()),
                MutationKind::ChangeNodeType | MutationKind::OnePoint => {
                    // same shape, one node differs at most
                    assert_eq!(m.len(), t.len());
                    let diffs = t
                        .nodes()
                        .iter()
                        .zip(m.nodes())
                        .filter(|(a, b)| !a.same_symbol(b))
                        .count();
                    assert!(diffs <= 1);
                    for (a, b) in t.nodes().iter().zip(m.nodes()) {
                        assert_eq!(a.arity, b.arity);
                        if kind == MutationKind::OnePoint {
                            assert_eq!(a.kind, b.kind);
                        }
                    }
                }
                _ => {}
            }
        }
    }
    for c in changed {
        assert!(c > 1000, "{changed:?}");
    }
}

fn is_splice(a: &ExpressionTree, b: &ExpressionTree, child: &ExpressionTree) -> bool {
    let (an, bn) = (a.nodes(), b.nodes());
    (0..a.len()).any(|i| {
        let start = i + 1 - an[i].len();
        (0..b.len()).any(|j| {
            let bs = j + 1 - bn[j].len();
            let nodes: Vec<Node> = an[..start]
                .iter()
                .chain(&bn[bs..=j])
                .chain(&an[i + 1..])
                .copied()
                .collect();
            nodes.len() == child.len()
                && nodes.iter().zip(child.nodes()).all(|(x, y)| x.same_symbol(y))
        })
    })
}

#[test]
fn crossover_children_are_splices_within_limits() {
    let grammar = Grammar::new(3);
    let mut r = rng(32);
    for _ in 0..1000 {
        let a = random_tree(&mut r, &grammar, 49);
        let b = random_tree(&mut r, &grammar, 49);
        let child = subtree_crossover(&mut r, &a, &b, LIMITS);
        check(&child, 3);
        assert!(child == a || is_splice(&a, &b, &child));
    }
}

#[test]
fn crossover_falls_back_to_the_first_parent() {
    let grammar = Grammar::new(2);
    let mut r = rng(33);
    let tight = Limits {
        max_length: 5,
        max_depth: 12,
    };
    for _ in 0..200 {
        let a = hashgp::expr::ptc2(&mut r, &grammar, 5, 12).unwrap();
        let a = if a.len() > 5 { ExpressionTree::leaf(Node::variable(0)) } else { a };
        let size = r.random_range(30..40);
        let b = hashgp::expr::ptc2(&mut r, &grammar, size, 12).unwrap();
        let child = subtree_crossover(&mut r, &a, &b, tight);
        assert!(tight.admits(&child));
    }
}
