//! Reading and writing matrices and graph batches.
//!
//! Two on-disk formats are supported:
//!
//! * **dense-csv**: one row per line, comma-separated decimals. Values are
//!   written with Rust's shortest round-trip formatting, so a save/load cycle
//!   is bit-exact.
//! * **edge-list**: whitespace-separated `i j` or `i j w` lines with 0-based
//!   vertex indices; `#` starts a comment. Undirected lists are closed
//!   symmetrically.
//!
//! A batch is read from a directory (every regular file, sorted by name), from
//! a `.manifest` file listing one graph path per line (relative paths resolve
//! against the manifest's directory), or from a single graph file.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{AdjacencyMatrix, GraphBatch};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Format {
    DenseCsv,
    EdgeList,
}

impl FromStr for Format {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "dense-csv" | "csv" => Ok(Format::DenseCsv),
            "edge-list" | "edges" => Ok(Format::EdgeList),
            other => Err(Error::invalid(format!("unknown matrix format '{other}'"))),
        }
    }
}

/// How edge values are interpreted on load.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Binarization {
    /// Entries must already be 0 or 1.
    #[default]
    Require,
    /// Any positive weight becomes an edge.
    PositiveAsEdge,
    /// Keep weights as they are.
    Weighted,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct LoadOptions {
    pub format: Format,
    pub directed: bool,
    pub binarization: Binarization,
    /// Vertex count for edge lists; inferred from the largest index if absent.
    pub n: Option<usize>,
}

impl Default for LoadOptions {
    fn default() -> Self {
        LoadOptions { format: Format::DenseCsv, directed: false, binarization: Binarization::Require, n: None }
    }
}

fn parse_err(path: &Path, line: usize, message: impl Into<String>) -> Error {
    Error::Parse { path: path.to_path_buf(), line, message: message.into() }
}

fn parse_value(path: &Path, line: usize, field: &str) -> Result<f64> {
    let v: f64 = field
        .trim()
        .parse()
        .map_err(|_| parse_err(path, line, format!("cannot parse '{}' as a number", field.trim())))?;
    if !v.is_finite() {
        return Err(parse_err(path, line, format!("non-finite value '{}'", field.trim())));
    }
    Ok(v)
}

/// Reads a rectangular real matrix from dense CSV text.
pub fn parse_dense_csv(path: &Path, text: &str) -> Result<Array2<f64>> {
    let mut values = Vec::new();
    let mut cols = None;
    let mut rows = 0;
    for (idx, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let row: Vec<f64> = line
            .split(',')
            .map(|f| parse_value(path, idx + 1, f))
            .collect::<Result<_>>()?;
        match cols {
            None => cols = Some(row.len()),
            Some(c) if c != row.len() => {
                return Err(parse_err(path, idx + 1, format!("ragged row: {} fields, expected {c}", row.len())))
            }
            _ => {}
        }
        values.extend(row);
        rows += 1;
    }
    let cols = cols.unwrap_or(0);
    Array2::from_shape_vec((rows, cols), values).map_err(|e| parse_err(path, 0, e.to_string()))
}

/// Reads an edge list into a dense `n x n` matrix.
pub fn parse_edge_list(path: &Path, text: &str, n: Option<usize>, directed: bool) -> Result<Array2<f64>> {
    let mut edges = Vec::new();
    for (idx, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split_whitespace().collect();
        if fields.len() != 2 && fields.len() != 3 {
            return Err(parse_err(path, idx + 1, "expected 'i j' or 'i j w'"));
        }
        let index = |f: &str| {
            f.parse::<usize>()
                .map_err(|_| parse_err(path, idx + 1, format!("bad vertex index '{f}'")))
        };
        let (i, j) = (index(fields[0])?, index(fields[1])?);
        let w = match fields.get(2) {
            Some(f) => parse_value(path, idx + 1, f)?,
            None => 1.0,
        };
        if i == j {
            return Err(parse_err(path, idx + 1, format!("self-loop at vertex {i}")));
        }
        edges.push((idx + 1, i, j, w));
    }
    let n = match n {
        Some(n) => n,
        None => edges.iter().map(|&(_, i, j, _)| i.max(j) + 1).max().unwrap_or(0),
    };
    let mut data = Array2::zeros((n, n));
    for (line, i, j, w) in edges {
        if i >= n || j >= n {
            return Err(parse_err(path, line, format!("vertex index out of range for n = {n}")));
        }
        data[[i, j]] = w;
        if !directed {
            data[[j, i]] = w;
        }
    }
    Ok(data)
}

fn read_text(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

/// Reads a general real matrix (dense CSV only).
pub fn load_dense(path: &Path) -> Result<Array2<f64>> {
    parse_dense_csv(path, &read_text(path)?)
}

/// Reads one graph and validates it according to `opts`.
pub fn load_graph(path: &Path, opts: &LoadOptions) -> Result<AdjacencyMatrix> {
    let text = read_text(path)?;
    let data = match opts.format {
        Format::DenseCsv => parse_dense_csv(path, &text)?,
        Format::EdgeList => parse_edge_list(path, &text, opts.n, opts.directed)?,
    };
    let graph = AdjacencyMatrix::new(data, opts.directed)?;
    match opts.binarization {
        Binarization::Require => {
            graph.require_binary()?;
            Ok(graph)
        }
        Binarization::PositiveAsEdge => Ok(graph.binarized()),
        Binarization::Weighted => Ok(graph),
    }
}

fn batch_paths(path: &Path) -> Result<Vec<PathBuf>> {
    if path.is_dir() {
        let mut files = Vec::new();
        for entry in fs::read_dir(path).map_err(|e| Error::io(path, e))? {
            let entry = entry.map_err(|e| Error::io(path, e))?;
            let p = entry.path();
            let hidden = p.file_name().and_then(|s| s.to_str()).is_some_and(|s| s.starts_with('.'));
            let manifest = p.extension().is_some_and(|e| e == "json");
            if p.is_file() && !hidden && !manifest {
                files.push(p);
            }
        }
        files.sort();
        return Ok(files);
    }
    if path.extension().is_some_and(|e| e == "manifest") {
        let base = path.parent().unwrap_or(Path::new("."));
        return Ok(read_text(path)?
            .lines()
            .map(|l| l.split('#').next().unwrap_or("").trim())
            .filter(|l| !l.is_empty())
            .map(|l| {
                let p = PathBuf::from(l);
                if p.is_absolute() {
                    p
                } else {
                    base.join(p)
                }
            })
            .collect());
    }
    Ok(vec![path.to_path_buf()])
}

/// Loads a batch from a directory, a `.manifest` file or a single graph.
pub fn load_batch(path: &Path, opts: &LoadOptions) -> Result<GraphBatch> {
    let paths = batch_paths(path)?;
    let mut graphs = Vec::with_capacity(paths.len());
    for p in &paths {
        graphs.push(load_graph(p, opts)?);
    }
    let sources = paths.iter().map(|p| p.display().to_string()).collect();
    GraphBatch::with_sources(graphs, sources)
}

/// Dense CSV text with shortest round-trip formatting.
pub fn dense_csv_string(m: &Array2<f64>) -> String {
    let mut out = String::with_capacity(m.len() * 8);
    for row in m.rows() {
        for (k, v) in row.iter().enumerate() {
            if k > 0 {
                out.push(',');
            }
            write!(out, "{v}").unwrap();
        }
        out.push('\n');
    }
    out
}

/// Edge-list text; undirected matrices emit each pair once (`i < j`).
pub fn edge_list_string(m: &Array2<f64>, directed: bool) -> String {
    let mut out = String::new();
    let binary = m.iter().all(|&v| v == 0.0 || v == 1.0);
    for ((i, j), &v) in m.indexed_iter() {
        if v == 0.0 || (!directed && j <= i) {
            continue;
        }
        if binary {
            writeln!(out, "{i} {j}").unwrap();
        } else {
            writeln!(out, "{i} {j} {v}").unwrap();
        }
    }
    out
}

pub fn write_text(path: &Path, text: &str) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

pub fn save_matrix(m: &Array2<f64>, path: &Path, format: Format) -> Result<()> {
    let text = match format {
        Format::DenseCsv => dense_csv_string(m),
        Format::EdgeList => {
            let directed = crate::graph::max_asymmetry(&m.view()).2 > 0.0;
            edge_list_string(m, directed)
        }
    };
    write_text(path, &text)
}

/// Reads `vertex,label` lines (header optional) into labels ordered by vertex.
pub fn load_labels(path: &Path) -> Result<Vec<String>> {
    let text = read_text(path)?;
    let mut entries = Vec::new();
    for (idx, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let mut fields = line.splitn(2, ',');
        let vertex = fields.next().unwrap_or("").trim();
        let label = fields.next().map(str::trim);
        match (vertex.parse::<usize>(), label) {
            (Ok(v), Some(l)) if !l.is_empty() => entries.push((v, l.to_string())),
            (Err(_), _) if entries.is_empty() => continue, // header
            _ => return Err(parse_err(path, idx + 1, "expected 'vertex,label'")),
        }
    }
    entries.sort_by_key(|e| e.0);
    for (k, (v, _)) in entries.iter().enumerate() {
        if *v != k {
            return Err(parse_err(path, 0, format!("labels must cover vertices 0..n exactly once (missing {k})")));
        }
    }
    Ok(entries.into_iter().map(|(_, l)| l).collect())
}
