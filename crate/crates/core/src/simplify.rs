//! Hash-based algebraic simplification.
//!
//! Operands of `+` and `*` chains are compared through subtree hashes.
//! Operands that are the same subtree up to a constant coefficient are merged
//! (`c1·S + c2·S → (c1+c2)·S`), repeated factors become squares
//! (`S·S → square(S)`), constant operands are combined, and functions applied
//! to constants are folded. Passes repeat until nothing changes.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::expr::{apply_binary, apply_unary, ExpressionTree, Node, NodeKind};
use crate::hash::{HashMode, TreeHasher};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Rule {
    /// `k1·S + k2·S → (k1+k2)·S`, and constant terms of a sum are added up.
    AdditiveMerge,
    /// `S·S → square(S)`, and constant factors of a product are multiplied.
    MultiplicativeMerge,
    /// A function of constants is replaced by its finite value.
    ConstantFold,
    /// Nested `+` (or `*`) nodes are merged into a single n-ary node.
    Flatten,
}

impl Rule {
    pub fn name(self) -> &'static str {
        match self {
            Rule::AdditiveMerge => "additive-merge",
            Rule::MultiplicativeMerge => "multiplicative-merge",
            Rule::ConstantFold => "constant-fold",
            Rule::Flatten => "flatten",
        }
    }
}

impl fmt::Display for Rule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Which rules are enabled.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct SimplifyOptions {
    pub additive_merge: bool,
    pub multiplicative_merge: bool,
    pub constant_fold: bool,
    /// Rebuild merged chains as one n-ary node instead of left-deep binary
    /// nodes.
    pub flatten: bool,
}

impl Default for SimplifyOptions {
    fn default() -> Self {
        SimplifyOptions {
            additive_merge: true,
            multiplicative_merge: true,
            constant_fold: true,
            flatten: true,
        }
    }
}

impl SimplifyOptions {
    /// Additive merging of isomorphic terms only, on binary trees.
    pub fn additive_only() -> Self {
        SimplifyOptions {
            additive_merge: true,
            multiplicative_merge: false,
            constant_fold: false,
            flatten: false,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SimplifyReport {
    pub original_length: usize,
    pub simplified_length: usize,
    /// Rule and the postorder index of the node it fired on, in the tree as
    /// it was at the start of that pass.
    pub rules_applied: Vec<(Rule, usize)>,
}

impl fmt::Display for SimplifyReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(
            f,
            "length: {} -> {}",
            self.original_length, self.simplified_length
        )?;
        for (rule, index) in &self.rules_applied {
            writeln!(f, "  {rule} at node {index}")?;
        }
        Ok(())
    }
}

/// Recursive working form of a tree.
#[derive(Clone, Debug)]
enum Term {
    Leaf(Node),
    Op(NodeKind, Vec<Term>),
}

impl Term {
    fn from_tree(tree: &ExpressionTree) -> Term {
        let mut stack: Vec<Term> = Vec::new();
        for node in tree.nodes() {
            if node.is_leaf() {
                stack.push(Term::Leaf(*node));
            } else {
                let children = stack.split_off(stack.len() - node.arity as usize);
                stack.push(Term::Op(node.kind, children));
            }
        }
        stack.pop().expect("tree is non-empty")
    }

    fn write(&self, out: &mut Vec<Node>) {
        match self {
            Term::Leaf(node) => out.push(*node),
            Term::Op(kind, children) => {
                for c in children {
                    c.write(out);
                }
                out.push(Node::function_with_arity(*kind, children.len()));
            }
        }
    }

    fn to_tree(&self) -> ExpressionTree {
        let mut nodes = Vec::new();
        self.write(&mut nodes);
        ExpressionTree::new(nodes).expect("simplifier keeps trees well-formed")
    }

    fn size(&self) -> usize {
        match self {
            Term::Leaf(_) => 1,
            Term::Op(_, children) => 1 + children.iter().map(Term::size).sum::<usize>(),
        }
    }

    fn constant(&self) -> Option<f64> {
        match self {
            Term::Leaf(n) if n.kind == NodeKind::Constant => Some(n.value),
            _ => None,
        }
    }

    fn is_op(&self, kind: NodeKind) -> bool {
        matches!(self, Term::Op(k, _) if *k == kind)
    }
}

/// Operands of a chain of `kind` nodes, looking through nested nodes of the
/// same kind.
fn chain_operands(kind: NodeKind, children: Vec<Term>, out: &mut Vec<Term>) -> bool {
    let mut nested = false;
    for c in children {
        match c {
            Term::Op(k, grand) if k == kind => {
                nested = true;
                chain_operands(kind, grand, out);
            }
            other => out.push(other),
        }
    }
    nested
}

fn splice_left_spine(kind: NodeKind, children: &[Term]) -> Option<Vec<Term>> {
    match children.first() {
        Some(Term::Op(k, grand)) if *k == kind => {
            let mut out = splice_left_spine(kind, grand).unwrap_or_else(|| grand.clone());
            out.extend_from_slice(&children[1..]);
            Some(out)
        }
        _ => None,
    }
}

fn build_chain(kind: NodeKind, mut operands: Vec<Term>, flatten: bool) -> Term {
    if operands.len() == 1 {
        return operands.pop().expect("one operand");
    }
    if flatten {
        return Term::Op(kind, operands);
    }
    let mut it = operands.into_iter();
    let mut acc = it.next().expect("non-empty chain");
    for t in it {
        acc = Term::Op(kind, vec![acc, t]);
    }
    acc
}

fn fold(kind: NodeKind, values: &[f64]) -> f64 {
    match kind {
        NodeKind::Add | NodeKind::Mul | NodeKind::Sub | NodeKind::Div => values[1..]
            .iter()
            .fold(values[0], |acc, &v| apply_binary(kind, acc, v)),
        k => apply_unary(k, values[0]),
    }
}

/// Simplifies trees with a fixed rule set.
#[derive(Clone, Debug)]
pub struct Simplifier {
    options: SimplifyOptions,
    hasher: TreeHasher,
}

impl Default for Simplifier {
    fn default() -> Self {
        Simplifier::new(SimplifyOptions::default())
    }
}

const MAX_PASSES: usize = 64;

impl Simplifier {
    pub fn new(options: SimplifyOptions) -> Self {
        Simplifier {
            options,
            // identity checks need constants compared by value
            hasher: TreeHasher::new(HashMode::Strict),
        }
    }

    pub fn options(&self) -> SimplifyOptions {
        self.options
    }

    pub fn simplify(&self, tree: &ExpressionTree) -> (ExpressionTree, SimplifyReport) {
        let mut report = SimplifyReport {
            original_length: tree.len(),
            simplified_length: tree.len(),
            rules_applied: Vec::new(),
        };
        let mut current = tree.clone();
        for _ in 0..MAX_PASSES {
            let mut applied = Vec::new();
            let term = Term::from_tree(&current);
            let out = self.pass(term, 0, &mut applied);
            if applied.is_empty() {
                break;
            }
            report.rules_applied.append(&mut applied);
            current = out.to_tree();
        }
        report.simplified_length = current.len();
        (current, report)
    }

    pub fn is_simplified(&self, tree: &ExpressionTree) -> bool {
        let mut applied = Vec::new();
        self.pass(Term::from_tree(tree), 0, &mut applied);
        applied.is_empty()
    }

    fn hash(&self, term: &Term) -> u64 {
        self.hasher
            .root_hash(&term.to_tree())
            .expect("terms are well-formed")
    }

    /// One bottom-up pass over the subtree starting at postorder offset
    /// `start`.
    fn pass(&self, term: Term, start: usize, applied: &mut Vec<(Rule, usize)>) -> Term {
        let (kind, children) = match term {
            Term::Leaf(_) => return term,
            Term::Op(kind, children) => (kind, children),
        };
        let index = start + children.iter().map(Term::size).sum::<usize>();
        let mut offset = start;
        let children: Vec<Term> = children
            .into_iter()
            .map(|c| {
                let size = c.size();
                let out = self.pass(c, offset, applied);
                offset += size;
                out
            })
            .collect();

        let term = match kind {
            NodeKind::Add | NodeKind::Mul => self.chain(kind, children, index, applied),
            _ => Term::Op(kind, children),
        };
        self.constant_fold(term, index, applied)
    }

    fn chain(
        &self,
        kind: NodeKind,
        children: Vec<Term>,
        index: usize,
        applied: &mut Vec<(Rule, usize)>,
    ) -> Term {
        let flatten = self.options.flatten;
        let mut operands = Vec::with_capacity(children.len());
        let nested = chain_operands(kind, children.clone(), &mut operands);
        let before = operands.len();

        let merged = match kind {
            NodeKind::Add if self.options.additive_merge => {
                self.merge_sum(&mut operands, index, applied)
            }
            NodeKind::Mul if self.options.multiplicative_merge => {
                self.merge_product(&mut operands, index, applied)
            }
            _ => false,
        };

        if merged || operands.len() != before {
            if flatten && nested {
                applied.push((Rule::Flatten, index));
            }
            return build_chain(kind, operands, flatten);
        }
        // Without a merge only the left spine is spliced in: `(a + b) + c`
        // folds in the same order as `a + b + c`, while `a + (b + c)` would
        // be reassociated.
        if flatten {
            if let Some(spliced) = splice_left_spine(kind, &children) {
                applied.push((Rule::Flatten, index));
                return Term::Op(kind, spliced);
            }
        }
        Term::Op(kind, children)
    }

    /// Adds up constant terms and merges terms that share a non-constant
    /// part. A merge is skipped when it would make the tree larger.
    fn merge_sum(
        &self,
        operands: &mut Vec<Term>,
        index: usize,
        applied: &mut Vec<(Rule, usize)>,
    ) -> bool {
        let mut changed = false;
        let constants: Vec<usize> = (0..operands.len())
            .filter(|&i| operands[i].constant().is_some())
            .collect();
        if constants.len() >= 2 {
            let sum = constants
                .iter()
                .map(|&i| operands[i].constant().expect("constant"))
                .fold(0.0, |a, b| a + b);
            if sum.is_finite() {
                let first = constants[0];
                operands[first] = Term::Leaf(Node::constant(sum));
                for &i in constants[1..].iter().rev() {
                    operands.remove(i);
                }
                applied.push((Rule::AdditiveMerge, index));
                changed = true;
            }
        }

        // (coefficient, non-constant part, hash of that part) per operand
        let mut terms: Vec<Option<(f64, Term, u64)>> = operands
            .iter()
            .map(|op| {
                let (k, rest) = split_coefficient(op)?;
                let h = self.hash(&rest);
                Some((k, rest, h))
            })
            .collect();

        let mut i = 0;
        while i < operands.len() {
            let Some((_, _, h)) = &terms[i] else {
                i += 1;
                continue;
            };
            let h = *h;
            let group: Vec<usize> = (i..operands.len())
                .filter(|&j| matches!(&terms[j], Some((_, _, hj)) if *hj == h))
                .collect();
            if group.len() < 2 {
                i += 1;
                continue;
            }
            let k: f64 = group
                .iter()
                .map(|&j| terms[j].as_ref().expect("grouped").0)
                .fold(0.0, |a, b| a + b);
            let rest = terms[i].as_ref().expect("grouped").1.clone();
            let replacement = with_coefficient(k, rest, self.options.flatten);
            let old: usize = group.iter().map(|&j| operands[j].size()).sum();
            let remaining = operands.len() - group.len() + 1;
            let saved_nodes = if self.options.flatten {
                usize::from(remaining == 1)
            } else {
                group.len() - 1
            };
            if !k.is_finite() || replacement.size() > old + saved_nodes {
                // mark as seen so the group is not reconsidered
                for &j in &group {
                    terms[j] = None;
                }
                i += 1;
                continue;
            }
            operands[i] = replacement;
            terms[i] = None;
            for &j in group[1..].iter().rev() {
                operands.remove(j);
                terms.remove(j);
            }
            applied.push((Rule::AdditiveMerge, index));
            changed = true;
            i += 1;
        }
        changed
    }

    /// Multiplies constant factors together and turns repeated factors into
    /// squares.
    fn merge_product(
        &self,
        operands: &mut Vec<Term>,
        index: usize,
        applied: &mut Vec<(Rule, usize)>,
    ) -> bool {
        let mut changed = false;
        let constants: Vec<usize> = (0..operands.len())
            .filter(|&i| operands[i].constant().is_some())
            .collect();
        if constants.len() >= 2 {
            let product = constants
                .iter()
                .map(|&i| operands[i].constant().expect("constant"))
                .fold(1.0, |a, b| a * b);
            if product.is_finite() {
                operands[constants[0]] = Term::Leaf(Node::constant(product));
                for &i in constants[1..].iter().rev() {
                    operands.remove(i);
                }
                applied.push((Rule::MultiplicativeMerge, index));
                changed = true;
            }
        }

        let mut hashes: Vec<Option<u64>> = operands
            .iter()
            .map(|op| op.constant().is_none().then(|| self.hash(op)))
            .collect();
        let mut i = 0;
        while i < operands.len() {
            let Some(h) = hashes[i] else {
                i += 1;
                continue;
            };
            if let Some(j) = (i + 1..operands.len()).find(|&j| hashes[j] == Some(h)) {
                let base = operands.remove(j);
                hashes.remove(j);
                operands[i] = Term::Op(NodeKind::Square, vec![base]);
                hashes[i] = None;
                applied.push((Rule::MultiplicativeMerge, index));
                changed = true;
            }
            i += 1;
        }
        changed
    }

    fn constant_fold(&self, term: Term, index: usize, applied: &mut Vec<(Rule, usize)>) -> Term {
        if !self.options.constant_fold {
            return term;
        }
        let Term::Op(kind, children) = &term else {
            return term;
        };
        let values: Option<Vec<f64>> = children.iter().map(Term::constant).collect();
        let Some(values) = values else {
            return term;
        };
        let v = fold(*kind, &values);
        if !v.is_finite() {
            return term;
        }
        applied.push((Rule::ConstantFold, index));
        Term::Leaf(Node::constant(v))
    }
}

/// Splits a sum operand into `(k, S)` with `operand = k·S`. Constants have no
/// non-constant part and return `None`.
fn split_coefficient(operand: &Term) -> Option<(f64, Term)> {
    if operand.constant().is_some() {
        return None;
    }
    if !operand.is_op(NodeKind::Mul) {
        return Some((1.0, operand.clone()));
    }
    let Term::Op(_, children) = operand else {
        unreachable!()
    };
    let mut factors = Vec::new();
    chain_operands(NodeKind::Mul, children.clone(), &mut factors);
    let (consts, mut rest): (Vec<Term>, Vec<Term>) =
        factors.into_iter().partition(|t| t.constant().is_some());
    if rest.is_empty() {
        return None;
    }
    let k = consts
        .iter()
        .map(|t| t.constant().expect("constant"))
        .fold(1.0, |a, b| a * b);
    if !k.is_finite() {
        return Some((1.0, operand.clone()));
    }
    let rest = if rest.len() == 1 {
        rest.pop().expect("one factor")
    } else {
        Term::Op(NodeKind::Mul, rest)
    };
    Some((k, rest))
}

fn with_coefficient(k: f64, rest: Term, flatten: bool) -> Term {
    if k == 1.0 {
        return rest;
    }
    let c = Term::Leaf(Node::constant(k));
    match rest {
        Term::Op(NodeKind::Mul, factors) if flatten => {
            let mut all = Vec::with_capacity(factors.len() + 1);
            all.push(c);
            all.extend(factors);
            Term::Op(NodeKind::Mul, all)
        }
        rest => Term::Op(NodeKind::Mul, vec![c, rest]),
    }
}

/// Simplifies with every rule enabled.
pub fn simplify(tree: &ExpressionTree) -> (ExpressionTree, SimplifyReport) {
    Simplifier::default().simplify(tree)
}

/// True when [`simplify`] would apply no rule.
pub fn is_simplified(tree: &ExpressionTree) -> bool {
    Simplifier::default().is_simplified(tree)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::{evaluate_row, parse_infix};

    fn p(s: &str) -> ExpressionTree {
        s.parse().unwrap()
    }

    #[test]
    fn isomorphic_terms_merge() {
        let names = ["x", "y", "z"];
        let t = parse_infix("2 * x + 3 * y * z + 5 * x", &names).unwrap();
        assert_eq!(t.len(), 11);
        let (s, report) = simplify(&t);
        assert_eq!(s.len(), 8);
        assert_eq!(s.to_infix_with(&names), "((7.0 * x) + (3.0 * y * z))");
        assert_eq!(report.original_length, 11);
        assert_eq!(report.simplified_length, 8);
        assert_eq!(report.rules_applied, vec![(Rule::AdditiveMerge, 10)]);
    }

    #[test]
    fn leaf_is_a_fixpoint() {
        let (s, report) = simplify(&p("x0"));
        assert_eq!(s, p("x0"));
        assert!(report.rules_applied.is_empty());
    }

    #[test]
    fn constant_arguments_fold() {
        let (s, _) = simplify(&p("(2 + 3) * x0"));
        assert_eq!(s.to_infix(), "(5.0 * x0)");
        let (s, r) = simplify(&p("log(-1.0) * x0"));
        assert_eq!(s, p("log(-1.0) * x0"));
        assert!(r.rules_applied.is_empty());
    }

    #[test]
    fn repeated_factor_becomes_square() {
        let t = p("x0 * x0");
        let (s, _) = simplify(&t);
        assert_eq!(s.to_infix(), "square(x0)");
        for x in [-2.5, 0.0, 1.0, 3.75] {
            assert_eq!(evaluate_row(&s, &[x]).unwrap(), evaluate_row(&t, &[x]).unwrap());
        }
    }

    #[test]
    fn is_simplified_examples() {
        assert!(!is_simplified(&p("x0 + x0")));
        assert!(is_simplified(&p("sin(x0)")));
        let (s, _) = simplify(&p("x0 + x0"));
        assert_eq!(s.to_infix(), "(2.0 * x0)");
        assert!(is_simplified(&s));
    }

    #[test]
    fn coefficients_that_differ_only_inside_s_do_not_merge() {
        // same shape, different constants inside the shared part
        let t = p("2 * (x0 + 1) + 3 * (x0 + 2)");
        let (s, r) = simplify(&t);
        assert!(r.rules_applied.is_empty(), "{:?}", r.rules_applied);
        assert_eq!(s, t);
    }

    #[test]
    fn growth_is_refused() {
        // merging two bare leaves inside a wider sum would add a node
        let t = p("x0 + x0 + x1");
        let (s, _) = simplify(&t);
        assert!(s.len() <= t.len());
    }

    #[test]
    fn nested_chains_flatten() {
        let t = p("((x0 + x1) + x2) + sin(x0)");
        let (s, r) = simplify(&t);
        assert_eq!(s.to_infix(), "(x0 + x1 + x2 + sin(x0))");
        assert!(r.rules_applied.iter().all(|(rule, _)| *rule == Rule::Flatten));
    }

    #[test]
    fn additive_only_keeps_binary_layout() {
        let s = Simplifier::new(SimplifyOptions::additive_only());
        let t = p("((2.0 * x0) + x1) + (3.0 * x0)");
        let (out, r) = s.simplify(&t);
        assert_eq!(out.to_infix(), "((5.0 * x0) + x1)");
        assert_eq!(r.rules_applied.len(), 1);
        assert!(out.nodes().iter().all(|n| n.arity <= 2));
    }

    #[test]
    fn squares_chain_to_fixpoint() {
        let (s, _) = simplify(&p("x0 * x0 * x0 * x0"));
        assert_eq!(s.to_infix(), "square(square(x0))");
        let (s, _) = simplify(&p("2.0 * x0 * 3.0"));
        assert_eq!(s.to_infix(), "(6.0 * x0)");
    }

    #[test]
    fn constant_sums_collapse() {
        let (s, _) = simplify(&p("(x0 + 2.0) + 3.0"));
        assert_eq!(s.to_infix(), "(x0 + 5.0)");
        let (s, _) = simplify(&p("x0 - x0 * 1.0 + x0"));
        assert!(is_simplified(&s));
    }
}
