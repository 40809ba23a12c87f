mod common;

use common::{random_data, random_trees, rng};
use hashgp::expr::{evaluate, parse_infix};
use hashgp::simplify::{Rule, Simplifier, SimplifyOptions};

fn relative(a: f64, b: f64) -> f64 {
    if a == b {
        0.0
    } else {
        (a - b).abs() / a.abs().max(b.abs())
    }
}

#[test]
fn idempotent_and_never_longer() {
    let s = Simplifier::default();
    for (k, t) in random_trees(6, 1000, 3, 50).iter().enumerate() {
        let (u, report) = s.simplify(t);
        assert!(u.len() <= t.len(), "tree {k}");
        assert_eq!(report.simplified_length, u.len());
        assert!(s.is_simplified(&u), "tree {k}: {u}");
        assert_eq!(s.simplify(&u).0, u, "tree {k}");
    }
}

// Folding and left-spine flattening keep the evaluation order, so they must
// be bit-exact.
#[test]
fn rewrites_without_merges_are_exact() {
    let data = random_data(&mut rng(7), 100, 3, -5.0, 5.0);
    let s = Simplifier::default();
    let mut checked = 0;
    for (k, t) in random_trees(6, 1000, 3, 50).iter().enumerate() {
        let (u, report) = s.simplify(t);
        let merged = report
            .rules_applied
            .iter()
            .any(|(r, _)| matches!(r, Rule::AdditiveMerge | Rule::MultiplicativeMerge));
        if merged {
            continue;
        }
        checked += 1;
        let a = evaluate(t, data.view()).unwrap();
        let b = evaluate(&u, data.view()).unwrap();
        for (row, (x, y)) in a.iter().zip(&b).enumerate() {
            assert!(
                x.to_bits() == y.to_bits() || (x.is_nan() && y.is_nan()),
                "tree {k} row {row}: {x:?} vs {y:?}\n{t}\n{u}"
            );
        }
    }
    assert!(checked > 500, "{checked}");
}

// Arithmetic-only trees have no chaotic outer functions to amplify the
// rounding of a merge.
#[test]
fn arithmetic_trees_keep_predictions() {
    use hashgp::expr::{Grammar, NodeKind};
    let grammar = Grammar::new(3).with_functions(&[NodeKind::Add, NodeKind::Sub, NodeKind::Mul]);
    let mut r = rng(11);
    let data = random_data(&mut r, 100, 3, -5.0, 5.0);
    let s = Simplifier::default();
    for k in 0..1000 {
        let t = common::random_tree(&mut r, &grammar, 50);
        let u = s.simplify(&t).0;
        let a = evaluate(&t, data.view()).unwrap();
        let b = evaluate(&u, data.view()).unwrap();
        for (x, y) in a.iter().zip(&b) {
            if x.is_finite() && y.is_finite() {
                assert!(relative(*x, *y) <= 1e-9, "tree {k}: {x:?} vs {y:?}\n{t}\n{u}");
            }
        }
    }
}

#[test]
fn like_terms_merge_coefficients() {
    let t = parse_infix("2.5 * x0 + 1.5 * x1 * x2 + 4.0 * x0", &["x0", "x1", "x2"]).unwrap();
    assert_eq!(t.len(), 11);
    let (u, report) = Simplifier::default().simplify(&t);
    assert_eq!(u.len(), 8);
    assert_eq!(report.original_length, 11);
    let text = u.to_infix();
    assert!(text.contains("6.5"), "{text}");

    let additive = Simplifier::new(SimplifyOptions::additive_only()).simplify(&t).0;
    assert_eq!(additive.len(), 8);
}
