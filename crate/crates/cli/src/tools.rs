//! Single-shot utilities: hash, simplify, distance and the distance
//! benchmark.

use std::io::Write;
use std::path::Path;
use std::time::Instant;

use hashgp::diversity::oracle::bottom_up_matrix;
use hashgp::diversity::{distance_matrix, DistanceMatrix};
use hashgp::expr::{identifiers, parse_infix, ptc2, ExpressionTree, Grammar, Node, NodeKind};
use hashgp::hash::{HashMode, TreeHasher};
use hashgp::simplify::{SimplifyOptions, Simplifier};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::CliError;

fn io(e: std::io::Error) -> CliError {
    CliError::runtime(e)
}

/// Parses with `x0, x1, ...` when every variable has that form, otherwise
/// numbers variables by first appearance and returns their names.
fn parse(text: &str) -> Result<(ExpressionTree, Vec<String>), CliError> {
    let names = identifiers(text).map_err(CliError::usage)?;
    let indexed = names.iter().all(|n| {
        n.strip_prefix('x')
            .is_some_and(|d| !d.is_empty() && d.bytes().all(|b| b.is_ascii_digit()))
    });
    if indexed {
        let tree = parse_infix::<&str>(text, &[]).map_err(CliError::usage)?;
        let width = tree.max_variable().map_or(0, |m| m + 1);
        Ok((tree, (0..width).map(|i| format!("x{i}")).collect()))
    } else {
        let tree = parse_infix(text, &names).map_err(CliError::usage)?;
        Ok((tree, names))
    }
}

fn label(node: &Node, names: &[String]) -> String {
    match node.kind {
        NodeKind::Variable => names[node.variable as usize].clone(),
        NodeKind::Constant => format!("{:?}", node.value),
        k if node.arity as usize != k.arity() => format!("{k}/{}", node.arity),
        k => k.to_string(),
    }
}

/// Prints the canonical form, the root hash and the postorder hash table.
pub fn cmd_hash(expression: &str, mode: HashMode, out: &mut dyn Write) -> Result<u64, CliError> {
    let (tree, names) = parse(expression)?;
    let (canonical, hashes) = TreeHasher::new(mode)
        .hash_tree(&tree)
        .map_err(CliError::usage)?;
    writeln!(out, "canonical: {}", canonical.to_infix_with(&names)).map_err(io)?;
    writeln!(out, "mode: {mode}").map_err(io)?;
    writeln!(out, "root hash: {:#018x}", hashes.root()).map_err(io)?;
    writeln!(out, "{:>5}  {:<24} {:>6}  hash", "index", "node", "length").map_err(io)?;
    for (i, (node, h)) in canonical.nodes().iter().zip(hashes.values()).enumerate() {
        writeln!(out, "{i:>5}  {:<24} {:>6}  {h:#018x}", label(node, &names), node.length).map_err(io)?;
    }
    Ok(hashes.root())
}

/// Prints the simplified expression and which rules fired.
pub fn cmd_simplify(
    expression: &str,
    options: SimplifyOptions,
    out: &mut dyn Write,
) -> Result<ExpressionTree, CliError> {
    let (tree, names) = parse(expression)?;
    let (simplified, report) = Simplifier::new(options).simplify(&tree);
    writeln!(out, "{}", simplified.to_infix_with(&names)).map_err(io)?;
    writeln!(out, "{report}").map_err(io)?;
    Ok(simplified)
}

/// Reads one expression per non-blank line.
pub fn read_expressions(path: &Path) -> Result<Vec<ExpressionTree>, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::usage(format!("cannot read {}: {e}", path.display())))?;
    let mut trees = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let tree = line
            .parse::<ExpressionTree>()
            .map_err(|e| CliError::usage(format!("line {}: {e}", i + 1)))?;
        trees.push(tree);
    }
    if trees.is_empty() {
        return Err(CliError::usage(format!("{} holds no expressions", path.display())));
    }
    Ok(trees)
}

/// Writes the distance matrix as CSV (to `out_dir/distance.csv` when
/// given, else to `out`) followed by the diversity vector.
pub fn cmd_distance(
    path: &Path,
    mode: HashMode,
    out_dir: Option<&Path>,
    out: &mut dyn Write,
) -> Result<DistanceMatrix, CliError> {
    let trees = read_expressions(path)?;
    let matrix = distance_matrix(&TreeHasher::new(mode), &trees);
    match out_dir {
        Some(dir) => {
            std::fs::create_dir_all(dir).map_err(io)?;
            let file = std::fs::File::create(dir.join("distance.csv")).map_err(io)?;
            matrix.write_csv(file).map_err(CliError::runtime)?;
            let mut w = csv::Writer::from_path(dir.join("diversity.csv")).map_err(CliError::runtime)?;
            w.write_record(["index", "diversity"]).map_err(CliError::runtime)?;
            for (i, d) in matrix.diversity().iter().enumerate() {
                w.write_record([i.to_string(), format!("{d:?}")])
                    .map_err(CliError::runtime)?;
            }
            w.flush().map_err(io)?;
        }
        None => {
            matrix.write_csv(&mut *out).map_err(CliError::runtime)?;
            let d: Vec<String> = matrix.diversity().iter().map(|v| format!("{v:?}")).collect();
            writeln!(out, "diversity: {}", d.join(",")).map_err(io)?;
        }
    }
    writeln!(out, "average diversity: {:?}", matrix.average_diversity()).map_err(io)?;
    Ok(matrix)
}

#[derive(Clone, Debug, Serialize)]
pub struct BenchReport {
    pub trees: usize,
    pub target_length: usize,
    pub mean_length: f64,
    pub seed: u64,
    pub threads: usize,
    pub hash_seconds: f64,
    pub oracle_seconds: f64,
    pub speedup: f64,
    pub max_abs_difference: f64,
}

/// Random trees for benchmarking: PTC2 over five inputs with the full
/// function set.
pub fn random_population(n: usize, target_length: usize, seed: u64) -> Vec<ExpressionTree> {
    let grammar = Grammar::new(5);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|_| ptc2(&mut rng, &grammar, target_length, 12).expect("feasible size"))
        .collect()
}

/// Times the hash-based matrix against the bottom-up oracle on the same
/// random population.
pub fn cmd_bench_distance(
    n: usize,
    target_length: usize,
    seed: u64,
    mode: HashMode,
    out: &mut dyn Write,
) -> Result<BenchReport, CliError> {
    if n < 2 {
        return Err(CliError::usage("bench-distance needs at least 2 trees"));
    }
    if target_length == 0 || target_length > 2000 {
        return Err(CliError::usage("tree size must be in 1..=2000"));
    }
    let population = random_population(n, target_length, seed);
    let hasher = TreeHasher::new(mode);

    let t = Instant::now();
    let fast = distance_matrix(&hasher, &population);
    let hash_seconds = t.elapsed().as_secs_f64();

    let t = Instant::now();
    let slow = bottom_up_matrix(&population, mode);
    let oracle_seconds = t.elapsed().as_secs_f64();

    let max_abs_difference = fast
        .entries()
        .iter()
        .zip(slow.entries())
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max);
    let report = BenchReport {
        trees: n,
        target_length,
        mean_length: population.iter().map(|t| t.len()).sum::<usize>() as f64 / n as f64,
        seed,
        threads: hashgp::par::threads(),
        hash_seconds,
        oracle_seconds,
        speedup: oracle_seconds / hash_seconds.max(1e-9),
        max_abs_difference,
    };
    writeln!(
        out,
        "trees: {}  mean length: {:.1}  threads: {}",
        report.trees, report.mean_length, report.threads
    )
    .map_err(io)?;
    writeln!(out, "hash-based: {:.6} s", report.hash_seconds).map_err(io)?;
    writeln!(out, "bottom-up:  {:.6} s", report.oracle_seconds).map_err(io)?;
    writeln!(out, "speedup:    {:.1}x", report.speedup).map_err(io)?;
    writeln!(out, "max |difference|: {:e}", report.max_abs_difference).map_err(io)?;
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn text(f: impl FnOnce(&mut Vec<u8>)) -> String {
        let mut buf = Vec::new();
        f(&mut buf);
        String::from_utf8(buf).unwrap()
    }

    #[test]
    fn hash_of_commuted_sums_is_equal() {
        let mut sink = Vec::new();
        let a = cmd_hash("x0 + x1", HashMode::Strict, &mut sink).unwrap();
        let b = cmd_hash("x1 + x0", HashMode::Strict, &mut sink).unwrap();
        assert_eq!(a, b);
    }

    fn product_hashes(out: &str) -> Vec<String> {
        out.lines()
            .filter(|l| l.split_whitespace().nth(1) == Some("*"))
            .map(|l| l.split_whitespace().last().unwrap().to_string())
            .collect()
    }

    #[test]
    fn hash_table_shows_equal_products_in_structural_mode() {
        let s = text(|b| {
            cmd_hash("2.0*x0 + 3.0*x0", HashMode::Structural, b).unwrap();
        });
        let p = product_hashes(&s);
        assert_eq!(p.len(), 2);
        assert_eq!(p[0], p[1], "{s}");
        let s = text(|b| {
            cmd_hash("2.0*x0 + 3.0*x0", HashMode::Strict, b).unwrap();
        });
        let p = product_hashes(&s);
        assert_ne!(p[0], p[1], "{s}");
    }

    #[test]
    fn parse_errors_are_usage_errors() {
        let err = cmd_hash("log(", HashMode::Strict, &mut Vec::new()).unwrap_err();
        assert_eq!(err.exit_code(), 1);
    }

    #[test]
    fn distance_file_errors_carry_line_numbers() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("e.txt");
        std::fs::write(&path, "x0 + x1\n\nsin(\n").unwrap();
        let err = cmd_distance(&path, HashMode::Strict, None, &mut Vec::new()).unwrap_err();
        assert!(err.to_string().starts_with("line 3:"), "{err}");
    }

    #[test]
    fn distance_of_duplicates_and_disjoint_trees() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("e.txt");
        std::fs::write(&path, "x0 * x1\nx0 * x1\n").unwrap();
        let out = text(|b| {
            cmd_distance(&path, HashMode::Strict, None, b).unwrap();
        });
        assert!(out.starts_with("0,1\n0.0,0.0\n0.0,0.0\n"), "{out}");
        std::fs::write(&path, "sin(x0)\nexp(x1)\nlog(2.0)\n").unwrap();
        let m = cmd_distance(&path, HashMode::Strict, Some(dir.path()), &mut Vec::new()).unwrap();
        for i in 0..3 {
            for j in 0..3 {
                assert_eq!(m.get(i, j), if i == j { 0.0 } else { 1.0 });
            }
        }
        assert!(dir.path().join("distance.csv").exists());
    }

    #[test]
    fn bench_on_two_trees_agrees() {
        let r = cmd_bench_distance(2, 20, 1, HashMode::Strict, &mut Vec::new()).unwrap();
        assert_eq!(r.max_abs_difference, 0.0);
        assert!(cmd_bench_distance(1, 20, 1, HashMode::Strict, &mut Vec::new()).is_err());
    }

    #[test]
    fn simplify_prints_merged_terms() {
        let out = text(|b| {
            cmd_simplify("2.0*x0 + 3.0*x1*x2 + 5.0*x0", SimplifyOptions::default(), b).unwrap();
        });
        assert!(out.starts_with("((7.0 * x0) + (3.0 * x1 * x2))\n"), "{out}");
        let out = text(|b| {
            cmd_simplify("2.0*x + 3.0*y*z + 5.0*x", SimplifyOptions::default(), b).unwrap();
        });
        assert!(out.starts_with("((7.0 * x) + (3.0 * y * z))\n"), "{out}");
    }
}
