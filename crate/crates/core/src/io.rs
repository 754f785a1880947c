//! Text formats: whitespace separated edge lists, node label files and seed files.
//!
//! Edge list lines are `i j` or `i j w`; label and seed lines are `node label`.
//! Blank lines and anything after `#` are ignored.

use std::collections::HashMap;
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::graph::Graph;
use crate::region_force::{BenchmarkSets, Origin};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EdgeFormat {
    /// `i j`; every edge gets weight 1 until an affinity is assigned.
    EdgeList,
    /// `i j w`
    WeightedEdgeList,
}

/// Class assignment for every node plus the external name of each class.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Labels {
    pub classes: Vec<usize>,
    pub names: Vec<String>,
}

impl Labels {
    pub fn class_count(&self) -> usize {
        self.names.len()
    }
}

fn read(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

fn data_lines(text: &str) -> impl Iterator<Item = (usize, Vec<&str>)> {
    text.lines().enumerate().filter_map(|(i, line)| {
        let line = line.split('#').next().unwrap_or("");
        let fields: Vec<&str> = line.split_whitespace().collect();
        (!fields.is_empty()).then_some((i + 1, fields))
    })
}

pub fn load_graph(path: impl AsRef<Path>, format: EdgeFormat) -> Result<Graph> {
    let path = path.as_ref();
    parse_graph(&read(path)?, format, path)
}

pub fn parse_graph(text: &str, format: EdgeFormat, path: &Path) -> Result<Graph> {
    let parse_err = |line: usize, msg: String| Error::Parse {
        path: path.to_path_buf(),
        line,
        msg,
    };
    let expected = match format {
        EdgeFormat::EdgeList => 2,
        EdgeFormat::WeightedEdgeList => 3,
    };
    let mut edges = Vec::new();
    for (line, fields) in data_lines(text) {
        if fields.len() != expected {
            return Err(parse_err(
                line,
                format!("expected {expected} fields, found {}", fields.len()),
            ));
        }
        let node = |s: &str| {
            s.parse::<u64>()
                .map_err(|_| parse_err(line, format!("invalid node id '{s}'")))
        };
        let a = node(fields[0])?;
        let b = node(fields[1])?;
        let w = match fields.get(2) {
            Some(s) => s
                .parse::<f64>()
                .map_err(|_| parse_err(line, format!("invalid weight '{s}'")))?,
            None => 1.0,
        };
        edges.push((a, b, w));
    }
    Graph::from_id_edges(edges)
}

/// Writes `i j w` lines using external ids and 17 significant digits, which
/// reproduces every weight exactly on reload.
pub fn write_graph(g: &Graph, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let mut out = String::new();
    for e in g.edges() {
        let _ = writeln!(
            out,
            "{} {} {:.16e}",
            g.external_id(e.tail),
            g.external_id(e.head),
            e.weight
        );
    }
    fs::write(path, out).map_err(|e| Error::io(path, e))
}

/// Unweighted edge list in external ids.
pub fn write_edge_list(g: &Graph, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let mut out = String::new();
    for e in g.edges() {
        let _ = writeln!(out, "{} {}", g.external_id(e.tail), g.external_id(e.head));
    }
    fs::write(path, out).map_err(|e| Error::io(path, e))
}

fn parse_node_label_pairs<'a>(
    text: &'a str,
    g: &Graph,
    path: &Path,
) -> Result<Vec<(usize, &'a str)>> {
    let mut pairs = Vec::new();
    for (line, fields) in data_lines(text) {
        if fields.len() != 2 {
            return Err(Error::Parse {
                path: path.to_path_buf(),
                line,
                msg: format!("expected 'node label', found {} fields", fields.len()),
            });
        }
        let id: u64 = fields[0].parse().map_err(|_| Error::Parse {
            path: path.to_path_buf(),
            line,
            msg: format!("invalid node id '{}'", fields[0]),
        })?;
        let node = g.index_of(id).ok_or(Error::UnknownNode(id))?;
        pairs.push((node, fields[1]));
    }
    Ok(pairs)
}

/// Remaps label tokens to `0..K` in order of first appearance.
fn intern<'a>(
    names: &mut Vec<String>,
    lookup: &mut HashMap<&'a str, usize>,
    tok: &'a str,
) -> usize {
    *lookup.entry(tok).or_insert_with(|| {
        names.push(tok.to_string());
        names.len() - 1
    })
}

/// Ground truth labels covering every node of `g`.
pub fn load_labels(path: impl AsRef<Path>, g: &Graph) -> Result<Labels> {
    let path = path.as_ref();
    parse_labels(&read(path)?, g, path)
}

pub fn parse_labels(text: &str, g: &Graph, path: &Path) -> Result<Labels> {
    let mut classes = vec![usize::MAX; g.node_count()];
    let mut names = Vec::new();
    let mut lookup = HashMap::new();
    for (node, tok) in parse_node_label_pairs(text, g, path)? {
        if classes[node] != usize::MAX {
            return Err(Error::Parse {
                path: path.to_path_buf(),
                line: 0,
                msg: format!("node {} labelled twice", g.external_id(node)),
            });
        }
        classes[node] = intern(&mut names, &mut lookup, tok);
    }
    if let Some(node) = classes.iter().position(|&c| c == usize::MAX) {
        return Err(Error::MissingLabel(g.external_id(node)));
    }
    Ok(Labels { classes, names })
}

/// Seed (benchmark) file. With `class_names` the seed labels must be among
/// them; otherwise classes are numbered by first appearance.
pub fn load_seeds(
    path: impl AsRef<Path>,
    g: &Graph,
    class_names: Option<&[String]>,
) -> Result<(BenchmarkSets, Vec<String>)> {
    let path = path.as_ref();
    parse_seeds(&read(path)?, g, class_names, path)
}

pub fn parse_seeds(
    text: &str,
    g: &Graph,
    class_names: Option<&[String]>,
    path: &Path,
) -> Result<(BenchmarkSets, Vec<String>)> {
    let pairs = parse_node_label_pairs(text, g, path)?;
    let mut names: Vec<String> = Vec::new();
    let mut lookup = HashMap::new();
    let mut assigned = Vec::with_capacity(pairs.len());
    for (node, tok) in pairs {
        let class = match class_names {
            Some(known) => known
                .iter()
                .position(|n| n == tok)
                .ok_or_else(|| Error::Parse {
                    path: path.to_path_buf(),
                    line: 0,
                    msg: format!("seed label '{tok}' not present in the ground truth"),
                })?,
            None => intern(&mut names, &mut lookup, tok),
        };
        assigned.push((node, class));
    }
    let names = class_names.map(<[String]>::to_vec).unwrap_or(names);
    let mut sets = BenchmarkSets::new(g.node_count(), names.len());
    for (node, class) in assigned {
        sets.insert(node, class, Origin::Initial)?;
    }
    Ok((sets, names))
}

/// `node,label` CSV in external ids and label names.
pub fn labels_csv(g: &Graph, labels: &[usize], names: &[String]) -> String {
    let mut out = String::from("node,label\n");
    for (i, &c) in labels.iter().enumerate() {
        let name = names.get(c).map(String::as_str).unwrap_or("?");
        let _ = writeln!(out, "{},{}", g.external_id(i), name);
    }
    out
}

fn round_floats(v: &mut serde_json::Value) {
    match v {
        serde_json::Value::Number(num) if num.is_f64() => {
            if let Some(x) = num
                .as_f64()
                .and_then(|x| serde_json::Number::from_f64(crate::round_sig(x)))
            {
                *num = x;
            }
        }
        serde_json::Value::Array(items) => items.iter_mut().for_each(round_floats),
        serde_json::Value::Object(map) => map.values_mut().for_each(round_floats),
        _ => {}
    }
}

/// Pretty JSON with every float rounded to 6 significant digits.
pub fn report_json<T: serde::Serialize>(value: &T) -> Result<String> {
    let mut v = serde_json::to_value(value)?;
    round_floats(&mut v);
    Ok(serde_json::to_string_pretty(&v)?)
}
