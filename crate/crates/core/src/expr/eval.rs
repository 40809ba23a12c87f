use ndarray::ArrayView2;

use super::{children_of, ExpressionTree, NodeKind};

#[derive(Clone, Debug, PartialEq, Eq, thiserror::Error)]
pub enum EvalError {
    #[error("variable index {index} out of bounds for {columns} columns")]
    VariableOutOfBounds { index: usize, columns: usize },
}

const BATCH: usize = 64;

/// Applies a unary function. No protection: out-of-domain inputs produce
/// non-finite values.
#[inline]
pub fn apply_unary(kind: NodeKind, a: f64) -> f64 {
    match kind {
        NodeKind::Exp => a.exp(),
        NodeKind::Log => a.ln(),
        NodeKind::Sin => a.sin(),
        NodeKind::Cos => a.cos(),
        NodeKind::Square => a * a,
        _ => unreachable!("{kind} is not unary"),
    }
}

#[inline]
pub fn apply_binary(kind: NodeKind, a: f64, b: f64) -> f64 {
    match kind {
        NodeKind::Add => a + b,
        NodeKind::Sub => a - b,
        NodeKind::Mul => a * b,
        NodeKind::Div => a / b,
        _ => unreachable!("{kind} is not binary"),
    }
}

/// Evaluates `tree` on every row of `data` (row-major, one column per
/// variable). Returns one prediction per row.
pub fn evaluate(tree: &ExpressionTree, data: ArrayView2<'_, f64>) -> Result<Vec<f64>, EvalError> {
    let columns = data.ncols();
    if let Some(index) = tree.max_variable() {
        if index >= columns {
            return Err(EvalError::VariableOutOfBounds { index, columns });
        }
    }
    let nodes = tree.nodes();
    let n = nodes.len();
    let rows = data.nrows();
    let children: Vec<Vec<usize>> = (0..n).map(|i| children_of(nodes, i)).collect();

    let mut out = Vec::with_capacity(rows);
    let mut buf = vec![0.0f64; n * BATCH];
    let mut start = 0;
    while start < rows {
        let m = BATCH.min(rows - start);
        for (i, node) in nodes.iter().enumerate() {
            let (done, rest) = buf.split_at_mut(i * BATCH);
            let dst = &mut rest[..m];
            let child = |c: usize| &done[c * BATCH..c * BATCH + m];
            match node.kind {
                NodeKind::Constant => dst.fill(node.value),
                NodeKind::Variable => {
                    let col = data.column(node.variable as usize);
                    for (r, d) in dst.iter_mut().enumerate() {
                        *d = col[start + r];
                    }
                }
                NodeKind::Add | NodeKind::Mul | NodeKind::Sub | NodeKind::Div => {
                    let cs = &children[i];
                    dst.copy_from_slice(child(cs[0]));
                    for &c in &cs[1..] {
                        for (d, &v) in dst.iter_mut().zip(child(c)) {
                            *d = apply_binary(node.kind, *d, v);
                        }
                    }
                }
                kind => {
                    let src = child(children[i][0]);
                    for (d, &v) in dst.iter_mut().zip(src) {
                        *d = apply_unary(kind, v);
                    }
                }
            }
        }
        out.extend_from_slice(&buf[(n - 1) * BATCH..(n - 1) * BATCH + m]);
        start += m;
    }
    Ok(out)
}

/// Evaluates a single row; convenient for small inputs and tests.
pub fn evaluate_row(tree: &ExpressionTree, row: &[f64]) -> Result<f64, EvalError> {
    let view = ArrayView2::from_shape((1, row.len()), row).expect("row is contiguous");
    Ok(evaluate(tree, view)?[0])
}
