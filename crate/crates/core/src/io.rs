//! Text formats for solutions, partitions and embeddings.
//!
//! Solutions are edit scripts with one operation per line:
//!
//! ```text
//! + u v      add edge (u, v)
//! - u v      delete edge (u, v)
//! seed u     seed node u
//! ```
//!
//! Node tokens are the labels used in the network's edge list.

use std::collections::HashMap;
use std::io::Write;
use std::path::Path;

use ndarray::Array2;

use crate::community::Partition;
use crate::error::{Error, Result};
use crate::evo::Genome;
use crate::graph::{Edge, EditSet};

/// A parsed edit script.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Solution {
    Edits(EditSet),
    Seeds(Vec<usize>),
}

pub fn write_solution<W: Write>(genome: &Genome, labels: &[String], mut out: W) -> Result<()> {
    let mut s = String::new();
    for e in genome.additions() {
        s.push_str(&format!("+ {} {}\n", labels[e.0], labels[e.1]));
    }
    for e in genome.deletions() {
        s.push_str(&format!("- {} {}\n", labels[e.0], labels[e.1]));
    }
    for &v in genome.seeds() {
        s.push_str(&format!("seed {}\n", labels[v]));
    }
    out.write_all(s.as_bytes())
        .map_err(|e| Error::io("<solution>", e))
}

/// Parses an edit script against the network's labels. An empty script is
/// an empty edit set. Mixing edge operations with seeds is an error.
pub fn parse_solution(text: &str, labels: &[String], origin: &Path) -> Result<Solution> {
    let ids: HashMap<&str, usize> = labels
        .iter()
        .enumerate()
        .map(|(i, l)| (l.as_str(), i))
        .collect();
    let mut adds = Vec::new();
    let mut dels = Vec::new();
    let mut seeds = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let bad = |message: String| Error::Parse {
            path: origin.to_path_buf(),
            line: lineno + 1,
            message,
        };
        let node = |tok: &str| {
            ids.get(tok)
                .copied()
                .ok_or_else(|| bad(format!("unknown node `{tok}`")))
        };
        let tokens: Vec<&str> = line.split_whitespace().collect();
        match tokens.as_slice() {
            ["+", a, b] => adds.push(Edge::new(node(a)?, node(b)?)),
            ["-", a, b] => dels.push(Edge::new(node(a)?, node(b)?)),
            ["seed", a] => seeds.push(node(a)?),
            _ => return Err(bad(format!("cannot parse `{line}`"))),
        }
    }
    match (adds.is_empty() && dels.is_empty(), seeds.is_empty()) {
        (_, true) => Ok(Solution::Edits(EditSet::new(adds, dels))),
        (true, false) => Ok(Solution::Seeds(seeds)),
        (false, false) => Err(Error::Parse {
            path: origin.to_path_buf(),
            line: 0,
            message: "script mixes edge operations and seeds".into(),
        }),
    }
}

pub fn read_solution(path: impl AsRef<Path>, labels: &[String]) -> Result<Solution> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_solution(&text, labels, path)
}

pub fn write_partition_csv<W: Write>(p: &Partition, labels: &[String], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["node", "community"])?;
    for (v, c) in p.assignment().iter().enumerate() {
        w.write_record([labels[v].clone(), c.to_string()])?;
    }
    w.flush().map_err(|e| Error::io("<csv>", e))?;
    Ok(())
}

pub fn write_embeddings_csv<W: Write>(z: &Array2<f64>, labels: &[String], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let mut header = vec!["node_id".to_string()];
    header.extend((1..=z.ncols()).map(|i| format!("e_{i}")));
    w.write_record(&header)?;
    for (v, row) in z.rows().into_iter().enumerate() {
        let mut rec = vec![labels[v].clone()];
        rec.extend(row.iter().map(|x| x.to_string()));
        w.write_record(&rec)?;
    }
    w.flush().map_err(|e| Error::io("<csv>", e))?;
    Ok(())
}

/// Reads embeddings written by [`write_embeddings_csv`], rows in file order.
pub fn read_embeddings_csv(path: impl AsRef<Path>) -> Result<(Vec<String>, Array2<f64>)> {
    let path = path.as_ref();
    let mut r = csv::Reader::from_path(path)?;
    let mut labels = Vec::new();
    let mut data = Vec::new();
    let mut cols = None;
    for (i, rec) in r.records().enumerate() {
        let rec = rec?;
        let values: Vec<f64> = rec
            .iter()
            .skip(1)
            .map(|t| t.parse::<f64>())
            .collect::<std::result::Result<_, _>>()
            .map_err(|e| Error::Parse {
                path: path.to_path_buf(),
                line: i + 2,
                message: e.to_string(),
            })?;
        if *cols.get_or_insert(values.len()) != values.len() {
            return Err(Error::Parse {
                path: path.to_path_buf(),
                line: i + 2,
                message: "ragged row".into(),
            });
        }
        labels.push(rec.get(0).unwrap_or_default().to_string());
        data.extend(values);
    }
    let cols = cols.unwrap_or(0);
    let z = Array2::from_shape_vec((labels.len(), cols), data)
        .map_err(|e| Error::Shape(e.to_string()))?;
    Ok((labels, z))
}

/// Creates a file, or fails with the path in the error.
pub fn create_file(path: impl AsRef<Path>) -> Result<std::io::BufWriter<std::fs::File>> {
    let path = path.as_ref();
    std::fs::File::create(path)
        .map(std::io::BufWriter::new)
        .map_err(|e| Error::io(path, e))
}
