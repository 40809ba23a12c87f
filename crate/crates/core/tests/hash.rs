mod common;

use std::collections::HashMap;

use common::{permute_commutative, random_data, random_trees, rng, ulps};
use hashgp::expr::{evaluate, parse_infix, ExpressionTree, Node, NodeKind};
use hashgp::hash::{hash_tree, root_hash, HashMode, TreeHasher};
use hashgp::simplify::Simplifier;
use proptest::prelude::*;

const MODES: [HashMode; 2] = [HashMode::Strict, HashMode::Structural];

/// Every binary tree with exactly `size` nodes over {Add, Mul, Sub} and `leaves`.
fn enumerate(size: usize, leaves: &[Node]) -> Vec<Vec<Node>> {
    if size == 1 {
        return leaves.iter().map(|&l| vec![l]).collect();
    }
    let mut out = Vec::new();
    for left in (1..size - 1).step_by(2) {
        let right = size - 1 - left;
        let (ls, rs) = (enumerate(left, leaves), enumerate(right, leaves));
        for l in &ls {
            for r in &rs {
                for kind in [NodeKind::Add, NodeKind::Mul, NodeKind::Sub] {
                    let mut nodes = l.clone();
                    nodes.extend_from_slice(r);
                    nodes.push(Node::function(kind));
                    out.push(nodes);
                }
            }
        }
    }
    out
}

/// Canonical text: commutative operands sorted as strings.
fn canonical(t: &ExpressionTree, i: usize, mode: HashMode) -> String {
    let n = t.nodes()[i];
    match n.kind {
        NodeKind::Variable => format!("x{}", n.variable),
        NodeKind::Constant => match mode {
            HashMode::Strict => format!("c{:x}", n.value.to_bits()),
            HashMode::Structural => "c".into(),
        },
        kind => {
            let mut kids: Vec<String> = t.children(i).into_iter().map(|c| canonical(t, c, mode)).collect();
            if kind.is_commutative() {
                kids.sort();
            }
            format!("{}({})", kind.name(), kids.join(","))
        }
    }
}

fn census(max_size: usize, leaves: &[Node], mode: HashMode) -> usize {
    let hasher = TreeHasher::new(mode);
    let mut by_hash: HashMap<u64, String> = HashMap::new();
    let mut by_form: HashMap<String, u64> = HashMap::new();
    let mut total = 0;
    for size in (1..=max_size).step_by(2) {
        for nodes in enumerate(size, leaves) {
            let t = ExpressionTree::new(nodes).unwrap();
            let h = hasher.root_hash(&t).unwrap();
            let form = canonical(&t, t.len() - 1, mode);
            if let Some(prev) = by_hash.insert(h, form.clone()) {
                assert_eq!(prev, form, "collision");
            }
            if let Some(prev) = by_form.insert(form.clone(), h) {
                assert_eq!(prev, h, "{form} hashed two ways");
            }
            total += 1;
        }
    }
    total
}

#[test]
fn census_up_to_seven_nodes() {
    let leaves = [Node::variable(0), Node::variable(1), Node::constant(1.5)];
    assert_eq!(census(7, &leaves, HashMode::Structural), 3 + 27 + 486 + 10_935);
    let strict = [Node::variable(0), Node::constant(1.5), Node::constant(-2.0)];
    census(5, &strict, HashMode::Strict);
    // constants collapse in structural mode only
    let a = parse_infix("x0 + 1.0", &["x0"]).unwrap();
    let b = parse_infix("x0 + 2.0", &["x0"]).unwrap();
    assert_eq!(root_hash(&a, HashMode::Structural), root_hash(&b, HashMode::Structural));
    assert_ne!(root_hash(&a, HashMode::Strict), root_hash(&b, HashMode::Strict));
}

fn corpus() -> Vec<ExpressionTree> {
    let mut trees = random_trees(21, 2000, 3, 60);
    let s = Simplifier::default();
    let simplified: Vec<_> = trees.iter().take(1000).map(|t| s.simplify(t).0).collect();
    trees.extend(simplified);
    trees
}

#[test]
fn canonical_form_is_a_fixed_point() {
    for mode in MODES {
        for t in corpus() {
            let (canon, seq) = hash_tree(&t, mode).unwrap();
            let (again, seq2) = hash_tree(&canon, mode).unwrap();
            assert_eq!(canon, again);
            assert_eq!(seq, seq2);
            assert_eq!(seq.len(), t.len());
        }
    }
}

#[test]
fn canonical_form_keeps_predictions() {
    let data = random_data(&mut rng(5), 100, 3, -5.0, 5.0);
    let mut worst = 0;
    // Binary nodes only: reordering a longer n-ary chain reassociates it.
    for t in random_trees(21, 2000, 3, 60) {
        let (canon, _) = hash_tree(&t, HashMode::Strict).unwrap();
        let a = evaluate(&t, data.view()).unwrap();
        let b = evaluate(&canon, data.view()).unwrap();
        for (x, y) in a.iter().zip(&b) {
            worst = worst.max(ulps(*x, *y));
            assert!(ulps(*x, *y) <= 4, "{x:?} vs {y:?}\n{t}\n{canon}");
        }
    }
    assert!(worst <= 4);
}

#[test]
fn commutative_permutations_share_a_hash() {
    let mut r = rng(8);
    for mode in MODES {
        let hasher = TreeHasher::new(mode);
        for t in random_trees(9, 10_000, 3, 50) {
            let p = permute_commutative(&mut r, &t);
            assert_eq!(hasher.root_hash(&t), hasher.root_hash(&p), "{t} / {p}");
        }
    }
}

#[test]
fn order_matters_for_non_commutative_nodes() {
    let names = ["x0", "x1"];
    let a = parse_infix("x0 - x1", &names).unwrap();
    let b = parse_infix("x1 - x0", &names).unwrap();
    assert_ne!(root_hash(&a, HashMode::Strict), root_hash(&b, HashMode::Strict));
    let c = parse_infix("x0 + x1 + x0", &names).unwrap();
    let d = parse_infix("x0 + x0 + x1", &names).unwrap();
    assert_eq!(root_hash(&c, HashMode::Strict), root_hash(&d, HashMode::Strict));
}

#[test]
fn hashes_depend_on_seed_only() {
    let trees = random_trees(10, 200, 3, 40);
    let a = TreeHasher::new(HashMode::Strict);
    let b = TreeHasher::new(HashMode::Strict);
    let other = TreeHasher::with_seed(HashMode::Strict, 7);
    let mut differs = 0;
    for t in &trees {
        let copy = ExpressionTree::new(t.nodes().to_vec()).unwrap();
        assert_eq!(a.hash_tree(t).unwrap(), b.hash_tree(&copy).unwrap());
        differs += (a.root_hash(t) != other.root_hash(t)) as usize;
    }
    assert_eq!(differs, trees.len());
    assert_eq!(a.calls(), trees.len() * 2);
}

#[test]
fn hashing_leaves_the_input_alone() {
    for t in random_trees(12, 200, 3, 40) {
        let before = t.clone();
        hash_tree(&t, HashMode::Structural).unwrap();
        assert_eq!(t, before);
    }
}

proptest! {
    #[test]
    fn permutation_invariance_prop(seed in any::<u64>(), len in 1usize..80) {
        let mut r = rng(seed);
        let t = hashgp::expr::ptc2(&mut r, &hashgp::expr::Grammar::new(2), len, 14).unwrap();
        let t = Simplifier::default().simplify(&t).0;
        let p = permute_commutative(&mut r, &t);
        for mode in MODES {
            prop_assert_eq!(root_hash(&t, mode), root_hash(&p, mode));
        }
    }
}
