//! Probabilistic tree creation (PTC2).
//!
//! Grows a tree from the root by repeatedly expanding a randomly chosen open
//! child slot with a function symbol until the number of placed nodes plus open
//! slots reaches the requested length, then closes every remaining slot with a
//! terminal.

use rand::distr::{weighted::WeightedIndex, Distribution};
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{ExpressionTree, Node, NodeKind};

#[derive(Clone, Debug, PartialEq, thiserror::Error)]
pub enum GrammarError {
    #[error("grammar has no terminal symbols")]
    NoTerminal,
    #[error("grammar has no function symbols")]
    NoFunction,
    #[error("invalid symbol weight {0}")]
    BadWeight(f64),
    #[error("target length must be at least 1")]
    ZeroLength,
    #[error("cannot build a tree of {target} nodes within depth {max_depth}")]
    Infeasible { target: usize, max_depth: usize },
}

/// Symbol set with sampling frequencies.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Grammar {
    functions: Vec<(NodeKind, f64)>,
    variable_weight: f64,
    constant_weight: f64,
    variables: usize,
    constant_range: (f64, f64),
}

impl Grammar {
    /// Full function set with uniform weights over `variables` input columns.
    pub fn new(variables: usize) -> Self {
        Grammar {
            functions: NodeKind::BINARY
                .iter()
                .chain(NodeKind::UNARY.iter())
                .map(|&k| (k, 1.0))
                .collect(),
            variable_weight: 1.0,
            constant_weight: 1.0,
            variables,
            constant_range: (-5.0, 5.0),
        }
    }

    /// Restricts the function set to `kinds`, each with weight 1.
    pub fn with_functions(mut self, kinds: &[NodeKind]) -> Self {
        self.functions = kinds
            .iter()
            .filter(|k| k.is_function())
            .map(|&k| (k, 1.0))
            .collect();
        self
    }

    /// Sets the sampling weight of a symbol; zero removes it.
    pub fn with_weight(mut self, kind: NodeKind, weight: f64) -> Result<Self, GrammarError> {
        if !(weight.is_finite() && weight >= 0.0) {
            return Err(GrammarError::BadWeight(weight));
        }
        match kind {
            NodeKind::Variable => self.variable_weight = weight,
            NodeKind::Constant => self.constant_weight = weight,
            k => {
                self.functions.retain(|(f, _)| *f != k);
                if weight > 0.0 {
                    self.functions.push((k, weight));
                }
            }
        }
        Ok(self)
    }

    pub fn with_constant_range(mut self, lo: f64, hi: f64) -> Self {
        self.constant_range = (lo.min(hi), lo.max(hi));
        self
    }

    pub fn variables(&self) -> usize {
        self.variables
    }

    pub fn constant_range(&self) -> (f64, f64) {
        self.constant_range
    }

    pub fn functions(&self) -> impl Iterator<Item = NodeKind> + '_ {
        self.functions.iter().map(|(k, _)| *k)
    }

    pub fn max_arity(&self) -> usize {
        self.functions().map(NodeKind::arity).max().unwrap_or(0)
    }

    fn has_variables(&self) -> bool {
        self.variables > 0 && self.variable_weight > 0.0
    }

    fn has_constants(&self) -> bool {
        self.constant_weight > 0.0
    }

    pub fn check(&self) -> Result<(), GrammarError> {
        if !self.has_variables() && !self.has_constants() {
            return Err(GrammarError::NoTerminal);
        }
        if self.functions.is_empty() {
            return Err(GrammarError::NoFunction);
        }
        Ok(())
    }

    pub fn sample_terminal<R: Rng + ?Sized>(&self, rng: &mut R) -> Node {
        let wv = if self.has_variables() { self.variable_weight } else { 0.0 };
        let wc = if self.has_constants() { self.constant_weight } else { 0.0 };
        if rng.random::<f64>() * (wv + wc) < wv {
            self.sample_variable(rng)
        } else {
            self.sample_constant(rng)
        }
    }

    pub fn sample_variable<R: Rng + ?Sized>(&self, rng: &mut R) -> Node {
        Node::variable(rng.random_range(0..self.variables.max(1)))
    }

    pub fn sample_constant<R: Rng + ?Sized>(&self, rng: &mut R) -> Node {
        let (lo, hi) = self.constant_range;
        let value = if hi > lo { rng.random_range(lo..hi) } else { lo };
        Node::constant(value)
    }

    pub fn sample_function<R: Rng + ?Sized>(&self, rng: &mut R) -> NodeKind {
        let dist = WeightedIndex::new(self.functions.iter().map(|(_, w)| *w))
            .expect("grammar has positive function weights");
        self.functions[dist.sample(rng)].0
    }
}

/// Largest node count reachable within `max_depth` levels.
fn capacity(max_arity: usize, max_depth: usize) -> usize {
    let mut total = 0usize;
    let mut level = 1usize;
    for _ in 0..max_depth {
        total = total.saturating_add(level);
        level = level.saturating_mul(max_arity);
    }
    total
}

const ATTEMPTS: usize = 100;

/// Creates a random tree with between `target_length` and
/// `target_length + max_arity - 1` nodes and depth at most `max_depth`.
pub fn ptc2<R: Rng + ?Sized>(
    rng: &mut R,
    grammar: &Grammar,
    target_length: usize,
    max_depth: usize,
) -> Result<ExpressionTree, GrammarError> {
    grammar.check()?;
    if target_length == 0 {
        return Err(GrammarError::ZeroLength);
    }
    if target_length == 1 {
        return Ok(ExpressionTree::leaf(grammar.sample_terminal(rng)));
    }
    let infeasible = GrammarError::Infeasible {
        target: target_length,
        max_depth,
    };
    if max_depth < 2 || capacity(grammar.max_arity(), max_depth) < target_length {
        return Err(infeasible);
    }
    for _ in 0..ATTEMPTS {
        if let Some(tree) = grow(rng, grammar, target_length, max_depth) {
            return Ok(tree);
        }
    }
    Err(infeasible)
}

struct Slot {
    parent: usize,
    depth: usize,
}

fn grow<R: Rng + ?Sized>(
    rng: &mut R,
    grammar: &Grammar,
    target: usize,
    max_depth: usize,
) -> Option<ExpressionTree> {
    // arena of (node, children) in creation order
    let mut arena: Vec<(Node, Vec<usize>)> = Vec::with_capacity(target + grammar.max_arity());
    let mut open: Vec<Slot> = Vec::new();

    let root = grammar.sample_function(rng);
    arena.push((Node::function(root), Vec::new()));
    open.extend((0..root.arity()).map(|_| Slot { parent: 0, depth: 2 }));

    let mut expandable: Vec<usize> = Vec::new();
    while arena.len() + open.len() < target {
        expandable.clear();
        expandable.extend((0..open.len()).filter(|&i| open[i].depth < max_depth));
        if expandable.is_empty() {
            return None;
        }
        let slot = open.swap_remove(expandable[rng.random_range(0..expandable.len())]);
        let kind = grammar.sample_function(rng);
        let id = arena.len();
        arena.push((Node::function(kind), Vec::new()));
        arena[slot.parent].1.push(id);
        open.extend((0..kind.arity()).map(|_| Slot {
            parent: id,
            depth: slot.depth + 1,
        }));
    }
    for slot in open.drain(..) {
        let id = arena.len();
        arena.push((grammar.sample_terminal(rng), Vec::new()));
        arena[slot.parent].1.push(id);
    }

    // postorder linearization
    let mut nodes = Vec::with_capacity(arena.len());
    let mut stack = vec![(0usize, false)];
    while let Some((id, expanded)) = stack.pop() {
        if expanded {
            nodes.push(arena[id].0);
        } else {
            stack.push((id, true));
            for &c in arena[id].1.iter().rev() {
                stack.push((c, false));
            }
        }
    }
    Some(ExpressionTree::new(nodes).expect("ptc2 builds consistent arities"))
}

#[cfg(test)]
mod tests {
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    use super::*;

    #[test]
    fn unit_target_gives_terminal() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let t = ptc2(&mut rng, &Grammar::new(2), 1, 12).unwrap();
        assert_eq!(t.len(), 1);
        assert!(t.root().kind.is_terminal());
    }

    #[test]
    fn size_and_depth_bounds_hold() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let g = Grammar::new(3);
        for _ in 0..1000 {
            let t = ptc2(&mut rng, &g, 50, 12).unwrap();
            t.validate().unwrap();
            assert!((50..=51).contains(&t.len()), "{}", t.len());
            assert!(t.depth() <= 12);
        }
    }

    #[test]
    fn same_seed_same_tree() {
        let g = Grammar::new(4);
        let a = ptc2(&mut ChaCha8Rng::seed_from_u64(99), &g, 20, 8).unwrap();
        let b = ptc2(&mut ChaCha8Rng::seed_from_u64(99), &g, 20, 8).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn impossible_limits_are_rejected() {
        let g = Grammar::new(1).with_functions(&[NodeKind::Add, NodeKind::Mul]);
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        assert!(matches!(
            ptc2(&mut rng, &g, 2, 1),
            Err(GrammarError::Infeasible { .. })
        ));
        assert!(matches!(
            ptc2(&mut rng, &g, 20, 3),
            Err(GrammarError::Infeasible { .. })
        ));
        assert_eq!(ptc2(&mut rng, &g, 0, 3), Err(GrammarError::ZeroLength));
        let g = Grammar::new(0).with_weight(NodeKind::Constant, 0.0).unwrap();
        assert_eq!(ptc2(&mut rng, &g, 3, 3), Err(GrammarError::NoTerminal));
        let g = Grammar::new(1).with_functions(&[]);
        assert_eq!(ptc2(&mut rng, &g, 3, 3), Err(GrammarError::NoFunction));
    }

    #[test]
    fn constants_stay_in_range() {
        let g = Grammar::new(0).with_constant_range(-1.0, 2.0);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..200 {
            let t = ptc2(&mut rng, &g, 9, 6).unwrap();
            for n in t.nodes().iter().filter(|n| n.kind == NodeKind::Constant) {
                assert!((-1.0..2.0).contains(&n.value));
            }
        }
    }
}
