//! Per-generation medians across the runs of one experiment.

use std::io::Write;
use std::path::{Path, PathBuf};

use hashgp::evolve::median;

use crate::CliError;

/// One parsed `generations.csv`.
#[derive(Clone, Debug, PartialEq)]
pub struct Trace {
    pub path: PathBuf,
    pub best_fitness: Vec<f64>,
    pub average_diversity: Vec<f64>,
    pub average_length: Vec<f64>,
}

fn read_trace(path: &Path) -> Result<Trace, CliError> {
    let bad = |m: String| CliError::runtime(format!("{}: {m}", path.display()));
    let mut r = csv::Reader::from_path(path).map_err(|e| bad(e.to_string()))?;
    let headers = r.headers().map_err(|e| bad(e.to_string()))?.clone();
    let col = |name: &str| {
        headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| bad(format!("missing column `{name}`")))
    };
    let (g, f, d, l) = (
        col("generation")?,
        col("best_fitness")?,
        col("average_diversity")?,
        col("average_length")?,
    );
    let mut trace = Trace {
        path: path.to_path_buf(),
        best_fitness: Vec::new(),
        average_diversity: Vec::new(),
        average_length: Vec::new(),
    };
    for (i, rec) in r.records().enumerate() {
        let rec = rec.map_err(|e| bad(e.to_string()))?;
        let num = |c: usize| -> Result<f64, CliError> {
            rec.get(c)
                .and_then(|s| s.parse().ok())
                .ok_or_else(|| bad(format!("row {}: bad number", i + 2)))
        };
        if num(g)? as usize != i {
            return Err(bad(format!("row {}: generations out of order", i + 2)));
        }
        trace.best_fitness.push(num(f)?);
        trace.average_diversity.push(num(d)?);
        trace.average_length.push(num(l)?);
    }
    Ok(trace)
}

/// Every `*/generations.csv` directly below `dir`, in path order.
pub fn find_traces(dir: &Path) -> Result<Vec<Trace>, CliError> {
    let entries = std::fs::read_dir(dir)
        .map_err(|e| CliError::usage(format!("cannot read {}: {e}", dir.display())))?;
    let mut paths: Vec<PathBuf> = entries
        .filter_map(|e| e.ok())
        .map(|e| e.path().join("generations.csv"))
        .filter(|p| p.is_file())
        .collect();
    paths.sort();
    if paths.is_empty() {
        return Err(CliError::usage(format!("no run directories in {}", dir.display())));
    }
    paths.iter().map(|p| read_trace(p)).collect()
}

/// Writes generation-indexed medians of average diversity, average length
/// and best fitness.
pub fn cmd_plotdata(dir: &Path, out: &mut dyn Write) -> Result<usize, CliError> {
    let traces = find_traces(dir)?;
    let generations = traces[0].best_fitness.len();
    if let Some(t) = traces.iter().find(|t| t.best_fitness.len() != generations) {
        return Err(CliError::runtime(format!(
            "{} has {} generations, expected {generations}",
            t.path.display(),
            t.best_fitness.len()
        )));
    }
    let mut w = csv::Writer::from_writer(out);
    let runtime = |e: csv::Error| CliError::runtime(e);
    w.write_record([
        "generation",
        "runs",
        "median_average_diversity",
        "median_average_length",
        "median_best_fitness",
    ])
    .map_err(runtime)?;
    for g in 0..generations {
        let at = |f: fn(&Trace) -> &Vec<f64>| traces.iter().map(|t| f(t)[g]).collect::<Vec<_>>();
        w.write_record([
            g.to_string(),
            traces.len().to_string(),
            format!("{:?}", median(&at(|t| &t.average_diversity))),
            format!("{:?}", median(&at(|t| &t.average_length))),
            format!("{:?}", median(&at(|t| &t.best_fitness))),
        ])
        .map_err(runtime)?;
    }
    w.flush().map_err(CliError::runtime)?;
    Ok(generations)
}
