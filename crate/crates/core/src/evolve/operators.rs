use rand::distr::{weighted::WeightedIndex, Distribution};
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::expr::{ptc2, ExpressionTree, Grammar, Node, NodeKind};

use super::ConfigError;

/// Size and depth bounds every offspring must respect.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Limits {
    pub max_length: usize,
    pub max_depth: usize,
}

impl Limits {
    pub fn admits(&self, tree: &ExpressionTree) -> bool {
        tree.len() <= self.max_length && tree.depth() <= self.max_depth
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum MutationKind {
    RemoveBranch,
    ReplaceBranch,
    ChangeNodeType,
    OnePoint,
}

impl MutationKind {
    pub const ALL: [MutationKind; 4] = [
        MutationKind::RemoveBranch,
        MutationKind::ReplaceBranch,
        MutationKind::ChangeNodeType,
        MutationKind::OnePoint,
    ];
}

/// Relative frequency of each mutation operator once mutation fires.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MutationWeights {
    pub remove_branch: f64,
    pub replace_branch: f64,
    pub change_node_type: f64,
    pub one_point: f64,
}

impl Default for MutationWeights {
    fn default() -> Self {
        MutationWeights {
            remove_branch: 1.0,
            replace_branch: 1.0,
            change_node_type: 1.0,
            one_point: 1.0,
        }
    }
}

impl MutationWeights {
    fn as_array(&self) -> [f64; 4] {
        [
            self.remove_branch,
            self.replace_branch,
            self.change_node_type,
            self.one_point,
        ]
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let w = self.as_array();
        if w.iter().any(|v| !v.is_finite() || *v < 0.0) || w.iter().sum::<f64>() <= 0.0 {
            return Err(ConfigError::NotPositive("mutation_weights"));
        }
        Ok(())
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> MutationKind {
        let dist = WeightedIndex::new(self.as_array()).expect("validated weights");
        MutationKind::ALL[dist.sample(rng)]
    }
}

const CROSSOVER_ATTEMPTS: usize = 16;

/// Replaces the subtree at `index` of `tree` with `insert`.
fn splice(tree: &ExpressionTree, index: usize, insert: &[Node]) -> ExpressionTree {
    let nodes = tree.nodes();
    let start = index + 1 - nodes[index].len();
    let mut out = Vec::with_capacity(nodes.len() - (index + 1 - start) + insert.len());
    out.extend_from_slice(&nodes[..start]);
    out.extend_from_slice(insert);
    out.extend_from_slice(&nodes[index + 1..]);
    ExpressionTree::new(out).expect("splicing whole subtrees keeps the tree valid")
}

/// Swaps a random subtree of a copy of `a` for a random subtree of `b`,
/// retrying until the child fits `limits`; falls back to a copy of `a`.
pub fn subtree_crossover<R: Rng + ?Sized>(
    rng: &mut R,
    a: &ExpressionTree,
    b: &ExpressionTree,
    limits: Limits,
) -> ExpressionTree {
    for _ in 0..CROSSOVER_ATTEMPTS {
        let i = rng.random_range(0..a.len());
        let j = rng.random_range(0..b.len());
        let removed = a.nodes()[i].len();
        let inserted = b.nodes()[j].len();
        if a.len() - removed + inserted > limits.max_length {
            continue;
        }
        let (start, end) = b.subtree_bounds(j).expect("index in range");
        let child = splice(a, i, &b.nodes()[start..=end]);
        if child.depth() <= limits.max_depth {
            return child;
        }
    }
    a.clone()
}

/// PTC2 that shrinks its target until the depth bound is satisfiable.
pub(crate) fn ptc2_within<R: Rng + ?Sized>(
    rng: &mut R,
    grammar: &Grammar,
    target: usize,
    max_depth: usize,
) -> ExpressionTree {
    let mut target = target.max(1);
    loop {
        match ptc2(rng, grammar, target, max_depth) {
            Ok(t) => return t,
            Err(_) if target > 1 => target = (target / 2).max(1),
            Err(e) => panic!("grammar cannot build a single terminal: {e}"),
        }
    }
}

/// Applies one mutation operator, chosen by `weights`.
pub fn mutate<R: Rng + ?Sized>(
    rng: &mut R,
    tree: &ExpressionTree,
    grammar: &Grammar,
    limits: Limits,
    weights: &MutationWeights,
) -> ExpressionTree {
    let kind = weights.sample(rng);
    mutate_with(rng, tree, grammar, limits, kind)
}

pub fn mutate_with<R: Rng + ?Sized>(
    rng: &mut R,
    tree: &ExpressionTree,
    grammar: &Grammar,
    limits: Limits,
    kind: MutationKind,
) -> ExpressionTree {
    if tree.len() == 1 && matches!(kind, MutationKind::RemoveBranch | MutationKind::ReplaceBranch)
    {
        return ExpressionTree::leaf(grammar.sample_terminal(rng));
    }
    match kind {
        MutationKind::RemoveBranch => {
            let i = rng.random_range(0..tree.len() - 1);
            splice(tree, i, &[grammar.sample_terminal(rng)])
        }
        MutationKind::ReplaceBranch => replace_branch(rng, tree, grammar, limits),
        MutationKind::ChangeNodeType => change_node_type(rng, tree, grammar),
        MutationKind::OnePoint => one_point(rng, tree, grammar),
    }
}

fn replace_branch<R: Rng + ?Sized>(
    rng: &mut R,
    tree: &ExpressionTree,
    grammar: &Grammar,
    limits: Limits,
) -> ExpressionTree {
    let i = rng.random_range(0..tree.len());
    let level = tree.levels()[i];
    let room_len = limits.max_length.saturating_sub(tree.len() - tree.nodes()[i].len());
    let room_depth = limits.max_depth.saturating_sub(level - 1);
    let slack = grammar.max_arity().saturating_sub(1);
    let top = room_len.saturating_sub(slack).max(1);
    let target = if room_depth < 2 { 1 } else { rng.random_range(1..=top) };
    let fresh = ptc2_within(rng, grammar, target, room_depth.max(1));
    splice(tree, i, fresh.nodes())
}

fn change_node_type<R: Rng + ?Sized>(
    rng: &mut R,
    tree: &ExpressionTree,
    grammar: &Grammar,
) -> ExpressionTree {
    let i = rng.random_range(0..tree.len());
    let node = tree.nodes()[i];
    let mut nodes = tree.nodes().to_vec();
    if node.is_leaf() {
        nodes[i] = grammar.sample_terminal(rng);
    } else {
        let arity = node.arity as usize;
        let options: Vec<NodeKind> = grammar
            .functions()
            .filter(|k| *k != node.kind && k.accepts_arity(arity))
            .collect();
        if options.is_empty() {
            return tree.clone();
        }
        let kind = options[rng.random_range(0..options.len())];
        nodes[i] = Node::function_with_arity(kind, arity);
    }
    ExpressionTree::new(nodes).expect("arity is preserved")
}

fn one_point<R: Rng + ?Sized>(rng: &mut R, tree: &ExpressionTree, grammar: &Grammar) -> ExpressionTree {
    let leaves: Vec<usize> = (0..tree.len()).filter(|&i| tree.nodes()[i].is_leaf()).collect();
    let i = leaves[rng.random_range(0..leaves.len())];
    let mut nodes = tree.nodes().to_vec();
    let node = nodes[i];
    nodes[i] = match node.kind {
        NodeKind::Constant => {
            let noise: f64 = StandardNormal.sample(rng);
            Node::constant(node.value + noise)
        }
        _ => grammar.sample_variable(rng),
    };
    ExpressionTree::new(nodes).expect("leaf swap keeps the shape")
}

#[cfg(test)]
mod tests {
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    use super::*;

    const LIMITS: Limits = Limits {
        max_length: 50,
        max_depth: 12,
    };

    fn p(s: &str) -> ExpressionTree {
        s.parse().unwrap()
    }

    #[test]
    fn leaf_crossover_yields_a_parent_leaf() {
        let (a, b) = (p("x0"), p("3.5"));
        for seed in 0..20 {
            let c = subtree_crossover(&mut ChaCha8Rng::seed_from_u64(seed), &a, &b, LIMITS);
            assert!(c == a || c == b);
        }
    }

    #[test]
    fn crossover_respects_limits_and_falls_back() {
        let a = p("x0 + x1");
        let b = p("sin(x0 * x1 + x0) - x1");
        let tight = Limits {
            max_length: 3,
            max_depth: 2,
        };
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..200 {
            let c = subtree_crossover(&mut rng, &a, &b, tight);
            assert!(tight.admits(&c), "{c}");
        }
    }

    #[test]
    fn change_node_type_keeps_arity() {
        let g = Grammar::new(2);
        let t = p("x0 + x1");
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let mut seen = Vec::new();
        for _ in 0..200 {
            let m = mutate_with(&mut rng, &t, &g, LIMITS, MutationKind::ChangeNodeType);
            let root = m.root().kind;
            assert_eq!(m.len(), 3);
            if root != NodeKind::Add {
                assert!(matches!(root, NodeKind::Sub | NodeKind::Mul | NodeKind::Div));
                seen.push(root);
            }
        }
        for k in [NodeKind::Sub, NodeKind::Mul, NodeKind::Div] {
            assert!(seen.contains(&k));
        }
    }

    #[test]
    fn single_leaf_degenerates_to_terminal() {
        let g = Grammar::new(3);
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for kind in MutationKind::ALL {
            for _ in 0..50 {
                let m = mutate_with(&mut rng, &p("x2"), &g, LIMITS, kind);
                assert_eq!(m.len(), 1);
                assert!(m.validate().is_ok());
            }
        }
    }

    #[test]
    fn one_point_moves_a_constant() {
        let g = Grammar::new(1);
        let t = p("2.0 * 3.0");
        let m = mutate_with(&mut ChaCha8Rng::seed_from_u64(0), &t, &g, LIMITS, MutationKind::OnePoint);
        assert_eq!(m.len(), 3);
        assert_ne!(m, t);
        assert_eq!(m.root().kind, NodeKind::Mul);
    }

    #[test]
    fn mutation_is_reproducible() {
        let g = Grammar::new(2);
        let t = p("sin(x0) * (x1 + 1.5)");
        let w = MutationWeights::default();
        let a = mutate(&mut ChaCha8Rng::seed_from_u64(8), &t, &g, LIMITS, &w);
        let b = mutate(&mut ChaCha8Rng::seed_from_u64(8), &t, &g, LIMITS, &w);
        assert_eq!(a, b);
    }
}
