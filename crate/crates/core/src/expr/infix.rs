//! Infix text format.
//!
//! Binary and n-ary operators are always parenthesized on output, so the
//! printed form re-parses into the identical node sequence. Constants are
//! printed with the shortest representation that round-trips exactly.

use std::fmt::Write as _;

use super::{children_of, ExpressionTree, Node, NodeKind};

#[derive(Clone, Debug, PartialEq, Eq, thiserror::Error)]
#[error("parse error at offset {position}: {message}")]
pub struct ParseError {
    pub position: usize,
    pub message: String,
}

pub(super) fn to_infix<S: AsRef<str>>(tree: &ExpressionTree, names: &[S]) -> String {
    let mut out = String::with_capacity(tree.len() * 4);
    write_node(tree.nodes(), tree.len() - 1, names, &mut out);
    out
}

fn write_node<S: AsRef<str>>(nodes: &[Node], i: usize, names: &[S], out: &mut String) {
    let node = &nodes[i];
    match node.kind {
        NodeKind::Constant => write_constant(node.value, out),
        NodeKind::Variable => match names.get(node.variable as usize) {
            Some(name) => out.push_str(name.as_ref()),
            None => {
                let _ = write!(out, "x{}", node.variable);
            }
        },
        NodeKind::Add | NodeKind::Sub | NodeKind::Mul | NodeKind::Div => {
            out.push('(');
            for (k, c) in children_of(nodes, i).into_iter().enumerate() {
                if k > 0 {
                    let _ = write!(out, " {} ", node.kind.name());
                }
                write_node(nodes, c, names, out);
            }
            out.push(')');
        }
        kind => {
            out.push_str(kind.name());
            out.push('(');
            write_node(nodes, i - 1, names, out);
            out.push(')');
        }
    }
}

fn write_constant(value: f64, out: &mut String) {
    // `{:?}` is the shortest exact round-trip form and keeps a decimal point
    // on integral values.
    let _ = write!(out, "{value:?}");
}

#[derive(Clone, Debug, PartialEq)]
enum Token {
    Number(f64),
    Ident(String),
    Op(char),
    LParen,
    RParen,
    End,
}

struct Lexer<'a> {
    src: &'a str,
    pos: usize,
}

impl<'a> Lexer<'a> {
    fn tokens(src: &'a str) -> Result<Vec<(usize, Token)>, ParseError> {
        let mut lexer = Lexer { src, pos: 0 };
        let mut out = Vec::new();
        loop {
            let tok = lexer.next()?;
            let done = tok.1 == Token::End;
            out.push(tok);
            if done {
                return Ok(out);
            }
        }
    }

    fn peek_byte(&self, offset: usize) -> Option<u8> {
        self.src.as_bytes().get(self.pos + offset).copied()
    }

    fn next(&mut self) -> Result<(usize, Token), ParseError> {
        while self.peek_byte(0).is_some_and(|b| b.is_ascii_whitespace()) {
            self.pos += 1;
        }
        let start = self.pos;
        let Some(b) = self.peek_byte(0) else {
            return Ok((start, Token::End));
        };
        let tok = match b {
            b'(' => {
                self.pos += 1;
                Token::LParen
            }
            b')' => {
                self.pos += 1;
                Token::RParen
            }
            b'+' | b'-' | b'*' | b'/' => {
                self.pos += 1;
                Token::Op(b as char)
            }
            b'0'..=b'9' | b'.' => self.number(start)?,
            b if b.is_ascii_alphabetic() || b == b'_' => {
                while self
                    .peek_byte(0)
                    .is_some_and(|b| b.is_ascii_alphanumeric() || b == b'_')
                {
                    self.pos += 1;
                }
                Token::Ident(self.src[start..self.pos].to_string())
            }
            _ => {
                let ch = self.src[start..].chars().next().unwrap_or('?');
                return Err(ParseError {
                    position: start,
                    message: format!("unexpected character '{ch}'"),
                });
            }
        };
        Ok((start, tok))
    }

    fn number(&mut self, start: usize) -> Result<Token, ParseError> {
        while self.peek_byte(0).is_some_and(|b| b.is_ascii_digit() || b == b'.') {
            self.pos += 1;
        }
        if matches!(self.peek_byte(0), Some(b'e' | b'E')) {
            let signed = matches!(self.peek_byte(1), Some(b'+' | b'-'));
            let digit_at = if signed { 2 } else { 1 };
            if self.peek_byte(digit_at).is_some_and(|b| b.is_ascii_digit()) {
                self.pos += digit_at;
                while self.peek_byte(0).is_some_and(|b| b.is_ascii_digit()) {
                    self.pos += 1;
                }
            }
        }
        let text = &self.src[start..self.pos];
        text.parse::<f64>().map(Token::Number).map_err(|_| ParseError {
            position: start,
            message: format!("malformed number '{text}'"),
        })
    }
}

/// Parsed expression before linearization.
enum Ast {
    Leaf(Node),
    Op(NodeKind, Vec<Ast>),
}

struct Parser<'a, S> {
    tokens: Vec<(usize, Token)>,
    pos: usize,
    names: &'a [S],
}

/// Parses infix text. Variables are resolved against `names`; when `names`
/// is empty, identifiers of the form `x<digits>` are accepted.
///
/// Unparenthesized chains of `+` or `*` become a single n-ary node, so
/// `a + b + c` has one addition node with three children while
/// `(a + b) + c` nests.
pub fn parse_infix<S: AsRef<str>>(text: &str, names: &[S]) -> Result<ExpressionTree, ParseError> {
    let tokens = Lexer::tokens(text)?;
    let mut parser = Parser {
        tokens,
        pos: 0,
        names,
    };
    let ast = parser.expr()?;
    let (at, tok) = parser.peek().clone();
    if tok != Token::End {
        return Err(ParseError {
            position: at,
            message: "unexpected trailing input".into(),
        });
    }
    let mut nodes = Vec::new();
    linearize(ast, &mut nodes);
    Ok(ExpressionTree::new(nodes).expect("parser produces well-formed trees"))
}

/// Identifiers in `text` that would be read as variables, in order of first
/// appearance and without repeats.
pub fn identifiers(text: &str) -> Result<Vec<String>, ParseError> {
    let mut out: Vec<String> = Vec::new();
    for (_, tok) in Lexer::tokens(text)? {
        if let Token::Ident(name) = tok {
            let reserved = function_by_name(&name).is_some() || matches!(name.as_str(), "inf" | "NaN" | "nan");
            if !reserved && !out.contains(&name) {
                out.push(name);
            }
        }
    }
    Ok(out)
}

fn linearize(ast: Ast, out: &mut Vec<Node>) {
    match ast {
        Ast::Leaf(node) => out.push(node),
        Ast::Op(kind, children) => {
            let arity = children.len();
            for c in children {
                linearize(c, out);
            }
            out.push(Node::function_with_arity(kind, arity));
        }
    }
}

impl<S: AsRef<str>> Parser<'_, S> {
    fn peek(&self) -> &(usize, Token) {
        &self.tokens[self.pos]
    }

    fn bump(&mut self) -> (usize, Token) {
        let t = self.tokens[self.pos].clone();
        if t.1 != Token::End {
            self.pos += 1;
        }
        t
    }

    fn error<T>(&self, at: usize, message: impl Into<String>) -> Result<T, ParseError> {
        Err(ParseError {
            position: at,
            message: message.into(),
        })
    }

    fn expr(&mut self) -> Result<Ast, ParseError> {
        self.chain(Self::term, '+', '-', NodeKind::Add, NodeKind::Sub)
    }

    fn term(&mut self) -> Result<Ast, ParseError> {
        self.chain(Self::unary, '*', '/', NodeKind::Mul, NodeKind::Div)
    }

    /// Left-associative chain where `assoc` extends an open n-ary node and
    /// `other` always nests.
    fn chain(
        &mut self,
        operand: fn(&mut Self) -> Result<Ast, ParseError>,
        assoc: char,
        other: char,
        assoc_kind: NodeKind,
        other_kind: NodeKind,
    ) -> Result<Ast, ParseError> {
        let mut lhs = operand(self)?;
        let mut open = false;
        loop {
            let op = match self.peek().1 {
                Token::Op(c) if c == assoc || c == other => c,
                _ => return Ok(lhs),
            };
            self.bump();
            let rhs = operand(self)?;
            if op == assoc {
                match (&mut lhs, open) {
                    (Ast::Op(_, children), true) => children.push(rhs),
                    _ => {
                        lhs = Ast::Op(assoc_kind, vec![lhs, rhs]);
                        open = true;
                    }
                }
            } else {
                lhs = Ast::Op(other_kind, vec![lhs, rhs]);
                open = false;
            }
        }
    }

    fn unary(&mut self) -> Result<Ast, ParseError> {
        if self.peek().1 == Token::Op('-') {
            self.bump();
            match &self.peek().1 {
                Token::Number(v) => {
                    let v = *v;
                    self.bump();
                    return Ok(Ast::Leaf(Node::constant(-v)));
                }
                Token::Ident(name) if name == "inf" => {
                    self.bump();
                    return Ok(Ast::Leaf(Node::constant(f64::NEG_INFINITY)));
                }
                _ => {}
            }
            let operand = self.unary()?;
            return Ok(Ast::Op(
                NodeKind::Mul,
                vec![Ast::Leaf(Node::constant(-1.0)), operand],
            ));
        }
        self.primary()
    }

    fn primary(&mut self) -> Result<Ast, ParseError> {
        let (at, tok) = self.bump();
        match tok {
            Token::Number(v) => Ok(Ast::Leaf(Node::constant(v))),
            Token::LParen => {
                let inner = self.expr()?;
                self.expect_rparen()?;
                Ok(inner)
            }
            Token::Ident(name) => {
                if let Some(kind) = function_by_name(&name) {
                    let (lp, t) = self.bump();
                    if t != Token::LParen {
                        return self.error(lp, format!("expected '(' after {name}"));
                    }
                    let arg = self.expr()?;
                    self.expect_rparen()?;
                    return Ok(Ast::Op(kind, vec![arg]));
                }
                match name.as_str() {
                    "inf" => return Ok(Ast::Leaf(Node::constant(f64::INFINITY))),
                    "NaN" | "nan" => return Ok(Ast::Leaf(Node::constant(f64::NAN))),
                    _ => {}
                }
                match self.variable_index(&name) {
                    Some(index) => Ok(Ast::Leaf(Node::variable(index))),
                    None => self.error(at, format!("unknown identifier '{name}'")),
                }
            }
            Token::End => self.error(at, "unexpected end of input"),
            Token::RParen => self.error(at, "unexpected ')'"),
            Token::Op(c) => self.error(at, format!("unexpected operator '{c}'")),
        }
    }

    fn expect_rparen(&mut self) -> Result<(), ParseError> {
        let (at, tok) = self.bump();
        match tok {
            Token::RParen => Ok(()),
            Token::End => self.error(at, "unexpected end of input, expected ')'"),
            _ => self.error(at, "expected ')'"),
        }
    }

    fn variable_index(&self, name: &str) -> Option<usize> {
        if self.names.is_empty() {
            let digits = name.strip_prefix('x')?;
            if digits.is_empty() || !digits.bytes().all(|b| b.is_ascii_digit()) {
                return None;
            }
            return digits.parse().ok();
        }
        self.names.iter().position(|n| n.as_ref() == name)
    }
}

fn function_by_name(name: &str) -> Option<NodeKind> {
    Some(match name {
        "exp" => NodeKind::Exp,
        "log" => NodeKind::Log,
        "sin" => NodeKind::Sin,
        "cos" => NodeKind::Cos,
        "square" => NodeKind::Square,
        _ => return None,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn p(s: &str) -> ExpressionTree {
        parse_infix(s, &[] as &[&str]).unwrap()
    }

    #[test]
    fn product_prints_parenthesized() {
        let t = ExpressionTree::new(vec![
            Node::constant(2.5),
            Node::variable(0),
            Node::function(NodeKind::Mul),
        ])
        .unwrap();
        assert_eq!(t.to_infix(), "(2.5 * x0)");
        assert_eq!(p("(2.5 * x0)"), t);
    }

    #[test]
    fn sum_with_function_has_four_nodes() {
        let t = p("(x1 + sin(x0))");
        assert_eq!(t.len(), 4);
        assert_eq!(t.root().kind, NodeKind::Add);
    }

    #[test]
    fn unclosed_call_reports_offset() {
        let err = parse_infix("log(", &[] as &[&str]).unwrap_err();
        assert_eq!(err.position, 4);
    }

    #[test]
    fn other_errors_carry_positions() {
        let names = ["x", "y"];
        assert_eq!(parse_infix("x + w", &names).unwrap_err().position, 4);
        assert_eq!(parse_infix("x + ", &names).unwrap_err().position, 4);
        assert_eq!(parse_infix("x ) ", &names).unwrap_err().position, 2);
        assert_eq!(parse_infix("x $ y", &names).unwrap_err().position, 2);
        assert!(parse_infix("sin x", &names).is_err());
        assert!(parse_infix("x0", &names).is_err());
        assert_eq!(identifiers("sin(b) + a * b - exp(inf)").unwrap(), vec!["b", "a"]);
    }

    #[test]
    fn chains_flatten_only_when_unparenthesized() {
        let t = p("x0 + x1 + x2");
        assert_eq!(t.len(), 4);
        assert_eq!(t.root().arity, 3);
        let t = p("(x0 + x1) + x2");
        assert_eq!(t.len(), 5);
        let t = p("x0 * x1 * x2 + x3");
        assert_eq!(t.root().kind, NodeKind::Add);
        assert_eq!(t.nodes()[3].arity, 3);
    }

    #[test]
    fn subtraction_is_left_associative() {
        let t = p("x0 - x1 - x2");
        assert_eq!(t.to_infix(), "((x0 - x1) - x2)");
        let t = p("x0 + x1 - x2 + x3");
        assert_eq!(t.to_infix(), "(((x0 + x1) - x2) + x3)");
    }

    #[test]
    fn negation_and_exponents() {
        let t = p("-2.5e-3 * x0");
        assert_eq!(t.nodes()[0].value, -2.5e-3);
        let t = p("-x0");
        assert_eq!(t.to_infix(), "(-1.0 * x0)");
        let t = p("exp(-(x0 - 1))");
        assert_eq!(t.len(), 6);
    }

    #[test]
    fn named_variables() {
        let t = parse_infix("x * y + z", &["x", "y", "z"]).unwrap();
        assert_eq!(t.to_infix_with(&["x", "y", "z"]), "((x * y) + z)");
        assert_eq!(t.to_infix(), "((x0 * x1) + x2)");
    }

    #[test]
    fn awkward_constants_round_trip() {
        for v in [0.1, -0.0, 1e300, 5e-324, -7.25, f64::INFINITY, f64::NEG_INFINITY, 123456789.0] {
            let t = ExpressionTree::leaf(Node::constant(v));
            let back = p(&t.to_infix());
            assert_eq!(back.nodes()[0].value.to_bits(), v.to_bits(), "{v}");
        }
        let t = ExpressionTree::leaf(Node::constant(f64::NAN));
        assert!(p(&t.to_infix()).nodes()[0].value.is_nan());
    }
}
