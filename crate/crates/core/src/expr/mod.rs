//! Postorder-linearized expression trees.
//!
//! A tree is stored as a flat array of [`Node`]s in postorder: children come
//! before their parent and the root is the last element. Each node records the
//! length of the subtree it roots, so every subtree is the contiguous range
//! `[i + 1 - length, i]`.

mod eval;
mod infix;
mod ptc2;

use std::fmt;

use serde::{Deserialize, Serialize};

pub use eval::{apply_binary, apply_unary, evaluate, evaluate_row, EvalError};
pub use infix::{identifiers, parse_infix, ParseError};
pub use ptc2::{ptc2, Grammar, GrammarError};

/// Operation or terminal type of a node.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NodeKind {
    Add,
    Sub,
    Mul,
    Div,
    Exp,
    Log,
    Sin,
    Cos,
    Square,
    Variable,
    Constant,
}

impl NodeKind {
    pub const ALL: [NodeKind; 11] = [
        NodeKind::Add,
        NodeKind::Sub,
        NodeKind::Mul,
        NodeKind::Div,
        NodeKind::Exp,
        NodeKind::Log,
        NodeKind::Sin,
        NodeKind::Cos,
        NodeKind::Square,
        NodeKind::Variable,
        NodeKind::Constant,
    ];

    pub const BINARY: [NodeKind; 4] = [NodeKind::Add, NodeKind::Sub, NodeKind::Mul, NodeKind::Div];

    pub const UNARY: [NodeKind; 5] = [
        NodeKind::Exp,
        NodeKind::Log,
        NodeKind::Sin,
        NodeKind::Cos,
        NodeKind::Square,
    ];

    /// Default arity. `Add` and `Mul` also accept more than two children.
    pub fn arity(self) -> usize {
        match self {
            NodeKind::Add | NodeKind::Sub | NodeKind::Mul | NodeKind::Div => 2,
            NodeKind::Exp | NodeKind::Log | NodeKind::Sin | NodeKind::Cos | NodeKind::Square => 1,
            NodeKind::Variable | NodeKind::Constant => 0,
        }
    }

    pub fn accepts_arity(self, arity: usize) -> bool {
        if self.is_commutative() {
            arity >= 2
        } else {
            arity == self.arity()
        }
    }

    pub fn is_commutative(self) -> bool {
        matches!(self, NodeKind::Add | NodeKind::Mul)
    }

    pub fn is_terminal(self) -> bool {
        matches!(self, NodeKind::Variable | NodeKind::Constant)
    }

    pub fn is_function(self) -> bool {
        !self.is_terminal()
    }

    /// Stable numeric tag, used as hashing input.
    pub fn tag(self) -> u8 {
        self as u8
    }

    pub fn name(self) -> &'static str {
        match self {
            NodeKind::Add => "+",
            NodeKind::Sub => "-",
            NodeKind::Mul => "*",
            NodeKind::Div => "/",
            NodeKind::Exp => "exp",
            NodeKind::Log => "log",
            NodeKind::Sin => "sin",
            NodeKind::Cos => "cos",
            NodeKind::Square => "square",
            NodeKind::Variable => "var",
            NodeKind::Constant => "const",
        }
    }
}

impl fmt::Display for NodeKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// A single node of a linearized tree.
///
/// `variable` is meaningful only for [`NodeKind::Variable`] and `value` only
/// for [`NodeKind::Constant`]; both are zero otherwise.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Node {
    pub kind: NodeKind,
    pub arity: u16,
    pub length: u32,
    pub variable: u32,
    pub value: f64,
}

impl Node {
    pub fn variable(index: usize) -> Self {
        Node {
            kind: NodeKind::Variable,
            arity: 0,
            length: 1,
            variable: index as u32,
            value: 0.0,
        }
    }

    pub fn constant(value: f64) -> Self {
        Node {
            kind: NodeKind::Constant,
            arity: 0,
            length: 1,
            variable: 0,
            value,
        }
    }

    /// A function node with its default arity. The length is a placeholder
    /// until the surrounding tree recomputes it.
    pub fn function(kind: NodeKind) -> Self {
        Self::function_with_arity(kind, kind.arity())
    }

    pub fn function_with_arity(kind: NodeKind, arity: usize) -> Self {
        debug_assert!(kind.is_function());
        Node {
            kind,
            arity: arity as u16,
            length: 1,
            variable: 0,
            value: 0.0,
        }
    }

    pub fn is_leaf(&self) -> bool {
        self.arity == 0
    }

    pub fn len(&self) -> usize {
        self.length as usize
    }

    /// Equality on kind and payload, ignoring subtree bookkeeping.
    pub fn same_symbol(&self, other: &Node) -> bool {
        self.kind == other.kind
            && self.arity == other.arity
            && match self.kind {
                NodeKind::Variable => self.variable == other.variable,
                NodeKind::Constant => self.value.to_bits() == other.value.to_bits(),
                _ => true,
            }
    }
}

/// First structural defect found by [`ExpressionTree::validate`].
#[derive(Clone, Debug, PartialEq, Eq, thiserror::Error)]
#[error("node {index}: {message}")]
pub struct Violation {
    pub index: usize,
    pub message: String,
}

#[derive(Clone, Debug, PartialEq, Eq, thiserror::Error)]
pub enum TreeError {
    #[error("invalid tree: {0}")]
    Invalid(#[from] Violation),
    #[error("node index {index} out of range for tree of {len} nodes")]
    IndexOutOfRange { index: usize, len: usize },
}

/// An expression tree in postorder layout.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExpressionTree {
    nodes: Vec<Node>,
}

impl ExpressionTree {
    /// Builds a tree from postorder nodes, recomputing subtree lengths from
    /// the arities and then validating.
    pub fn new(mut nodes: Vec<Node>) -> Result<Self, TreeError> {
        recompute_lengths(&mut nodes)?;
        let tree = ExpressionTree { nodes };
        tree.validate()?;
        Ok(tree)
    }

    /// Wraps nodes as-is. Lengths are trusted; call [`validate`](Self::validate)
    /// when the origin is untrusted.
    pub fn from_nodes_unchecked(nodes: Vec<Node>) -> Self {
        ExpressionTree { nodes }
    }

    pub fn leaf(node: Node) -> Self {
        debug_assert!(node.is_leaf());
        ExpressionTree { nodes: vec![node] }
    }

    pub fn nodes(&self) -> &[Node] {
        &self.nodes
    }

    pub fn into_nodes(self) -> Vec<Node> {
        self.nodes
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn root(&self) -> &Node {
        self.nodes.last().expect("tree is non-empty")
    }

    /// Checks every structural invariant in a single pass.
    pub fn validate(&self) -> Result<(), Violation> {
        validate_nodes(&self.nodes)
    }

    /// Inclusive index range `(start, end)` of the subtree rooted at `index`.
    pub fn subtree_bounds(&self, index: usize) -> Result<(usize, usize), TreeError> {
        let node = self.nodes.get(index).ok_or(TreeError::IndexOutOfRange {
            index,
            len: self.nodes.len(),
        })?;
        Ok((index + 1 - node.len(), index))
    }

    /// Copies the subtree rooted at `index` into a standalone tree.
    pub fn subtree(&self, index: usize) -> Result<ExpressionTree, TreeError> {
        let (start, end) = self.subtree_bounds(index)?;
        Ok(ExpressionTree {
            nodes: self.nodes[start..=end].to_vec(),
        })
    }

    /// Postorder indices of the children of `index`, in array order
    /// (leftmost operand first).
    pub fn children(&self, index: usize) -> Vec<usize> {
        children_of(&self.nodes, index)
    }

    /// Number of levels; a single leaf has depth 1.
    pub fn depth(&self) -> usize {
        let mut stack: Vec<usize> = Vec::with_capacity(self.nodes.len());
        for node in &self.nodes {
            let mut d = 0;
            for _ in 0..node.arity {
                d = d.max(stack.pop().expect("valid tree"));
            }
            stack.push(d + 1);
        }
        stack.pop().unwrap_or(0)
    }

    /// Level of every node, the root being at level 1.
    pub fn levels(&self) -> Vec<usize> {
        let n = self.nodes.len();
        let mut levels = vec![0; n];
        if n == 0 {
            return levels;
        }
        levels[n - 1] = 1;
        for i in (0..n).rev() {
            let level = levels[i];
            for c in children_of(&self.nodes, i) {
                levels[c] = level + 1;
            }
        }
        levels
    }

    /// Largest variable index referenced, if any.
    pub fn max_variable(&self) -> Option<usize> {
        self.nodes
            .iter()
            .filter(|n| n.kind == NodeKind::Variable)
            .map(|n| n.variable as usize)
            .max()
    }

    /// Renders infix text using `x0, x1, ...` as variable names.
    pub fn to_infix(&self) -> String {
        infix::to_infix(self, &[] as &[&str])
    }

    /// Renders infix text with the given variable names; indices beyond the
    /// list fall back to `x<i>`.
    pub fn to_infix_with<S: AsRef<str>>(&self, names: &[S]) -> String {
        infix::to_infix(self, names)
    }
}

impl std::str::FromStr for ExpressionTree {
    type Err = ParseError;

    /// Parses infix text with `x0, x1, ...` variable names.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        parse_infix(s, &[] as &[&str])
    }
}

impl fmt::Display for ExpressionTree {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_infix())
    }
}

pub(crate) fn children_of(nodes: &[Node], index: usize) -> Vec<usize> {
    let arity = nodes[index].arity as usize;
    let mut children = Vec::with_capacity(arity);
    let mut j = index;
    for _ in 0..arity {
        j -= 1;
        children.push(j);
        j = j + 1 - nodes[j].len();
    }
    children.reverse();
    children
}

/// Recomputes every `length` field from arities. Fails if the arities do not
/// describe exactly one tree.
pub fn recompute_lengths(nodes: &mut [Node]) -> Result<(), Violation> {
    let mut stack: Vec<u32> = Vec::with_capacity(nodes.len());
    for (i, node) in nodes.iter_mut().enumerate() {
        let arity = node.arity as usize;
        if stack.len() < arity {
            return Err(arity_violation(i, arity, stack.len()));
        }
        let len = 1 + stack.drain(stack.len() - arity..).sum::<u32>();
        node.length = len;
        stack.push(len);
    }
    match stack.len() {
        1 => Ok(()),
        0 => Err(Violation {
            index: 0,
            message: "empty tree".into(),
        }),
        k => Err(Violation {
            index: nodes.len() - 1,
            message: format!("{k} disconnected subtrees"),
        }),
    }
}

fn arity_violation(index: usize, arity: usize, available: usize) -> Violation {
    let noun = if available == 1 { "child" } else { "children" };
    Violation {
        index,
        message: format!("arity {arity} but {available} {noun}"),
    }
}

fn validate_nodes(nodes: &[Node]) -> Result<(), Violation> {
    if nodes.is_empty() {
        return Err(Violation {
            index: 0,
            message: "empty tree".into(),
        });
    }
    let mut stack: Vec<usize> = Vec::with_capacity(nodes.len());
    for (i, node) in nodes.iter().enumerate() {
        let arity = node.arity as usize;
        if !node.kind.accepts_arity(arity) {
            return Err(Violation {
                index: i,
                message: format!("{} cannot have arity {arity}", node.kind),
            });
        }
        if node.kind != NodeKind::Variable && node.variable != 0 {
            return Err(Violation {
                index: i,
                message: "variable index set on non-variable node".into(),
            });
        }
        if stack.len() < arity {
            return Err(arity_violation(i, arity, stack.len()));
        }
        let expected = 1 + stack.drain(stack.len() - arity..).sum::<usize>();
        if node.len() != expected {
            return Err(Violation {
                index: i,
                message: format!("length {} but subtree has {expected} nodes", node.length),
            });
        }
        stack.push(expected);
    }
    if stack.len() != 1 {
        return Err(Violation {
            index: nodes.len() - 1,
            message: format!("{} disconnected subtrees", stack.len()),
        });
    }
    Ok(())
}
