//! Text formats: edge lists, multigraphs, real-valued multiplicity maps,
//! operator triplets and the per-node CSV files (features, labels, split).
//!
//! Every `parse_*` takes the file contents so that parsing can be tested and
//! fuzzed without touching the filesystem; `load_*`/`save_*` wrap them.

use std::collections::{BTreeMap, HashMap};
use std::fmt::Write as _;
use std::path::Path;

use crate::error::{Error, Result};
use crate::graph::{MultiGraph, MultiplicityMap, SimpleGraph};
use crate::linalg::{CsrMatrix, DenseMatrix};

pub fn read_to_string(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

pub fn write_string(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

/// Non-empty, non-comment lines with their 1-based line numbers.
fn content_lines(text: &str) -> impl Iterator<Item = (usize, &str)> {
    text.lines()
        .enumerate()
        .map(|(n, l)| (n + 1, l.trim()))
        .filter(|(_, l)| !l.is_empty() && !l.starts_with('#'))
}

/// Upper bound on a declared node count, so a corrupt header cannot request
/// an arbitrarily large allocation.
pub const MAX_NODES: usize = 1 << 22;

fn parse_header<'a, I>(lines: &mut I) -> Result<usize>
where
    I: Iterator<Item = (usize, &'a str)>,
{
    let (line, text) = lines
        .next()
        .ok_or_else(|| Error::parse(1, "missing `nodes <N>` header"))?;
    let mut tok = text.split_whitespace();
    match (tok.next(), tok.next(), tok.next()) {
        (Some("nodes"), Some(n), None) => match n.parse() {
            Ok(v) if v <= MAX_NODES => Ok(v),
            _ => Err(Error::parse(line, format!("bad node count `{n}`"))),
        },
        _ => Err(Error::parse(line, "expected `nodes <N>` header")),
    }
}

fn parse_node(tok: &str, line: usize, num_nodes: usize) -> Result<usize> {
    let v: usize = tok
        .parse()
        .map_err(|_| Error::parse(line, format!("bad node id `{tok}`")))?;
    if v >= num_nodes {
        return Err(Error::Index {
            index: v,
            num_nodes,
        });
    }
    Ok(v)
}

/// Splits a record into exactly `n` whitespace-separated fields.
fn fields<const N: usize>(text: &str, line: usize) -> Result<[&str; N]> {
    let toks: Vec<&str> = text.split_whitespace().collect();
    toks.try_into().map_err(|t: Vec<&str>| {
        Error::parse(line, format!("expected {N} fields, found {}", t.len()))
    })
}

/// Parses the `nodes <N>` + `i j` edge-list format. Self-loops and repeated
/// unordered pairs are rejected together, listing every offending line.
pub fn parse_edge_list(text: &str) -> Result<SimpleGraph> {
    let mut lines = content_lines(text);
    let num_nodes = parse_header(&mut lines)?;
    let mut records = Vec::new();
    for (line, rec) in lines {
        let [a, b] = fields::<2>(rec, line)?;
        records.push((
            line,
            parse_node(a, line, num_nodes)?,
            parse_node(b, line, num_nodes)?,
        ));
    }
    validated_graph(num_nodes, records)
}

fn validated_graph(num_nodes: usize, records: Vec<(usize, usize, usize)>) -> Result<SimpleGraph> {
    let mut seen: HashMap<(usize, usize), usize> = HashMap::new();
    let mut loops = Vec::new();
    let mut dups = Vec::new();
    for (line, i, j) in records {
        if i == j {
            loops.push(line);
            continue;
        }
        let key = (i.min(j), i.max(j));
        if let Some(&first) = seen.get(&key) {
            dups.push(first);
            dups.push(line);
        } else {
            seen.insert(key, line);
        }
    }
    if !loops.is_empty() || !dups.is_empty() {
        let mut parts = Vec::new();
        if !loops.is_empty() {
            parts.push(format!("{} self-loop row(s)", loops.len()));
        }
        if !dups.is_empty() {
            parts.push("duplicate unordered pair(s)".to_string());
        }
        let mut lines: Vec<usize> = loops.into_iter().chain(dups).collect();
        lines.sort_unstable();
        lines.dedup();
        return Err(Error::Validation {
            msg: parts.join(" and "),
            lines,
        });
    }
    let mut edges: Vec<_> = seen.into_keys().collect();
    edges.sort_unstable();
    Ok(SimpleGraph::from_sorted_unique(num_nodes, edges))
}

pub fn write_edge_list(g: &SimpleGraph) -> String {
    let mut out = format!("nodes {}\n", g.num_nodes());
    for &(i, j) in g.edges() {
        writeln!(out, "{i} {j}").unwrap();
    }
    out
}

pub fn load_simple_graph(path: &Path) -> Result<SimpleGraph> {
    parse_edge_list(&read_to_string(path)?)
}

pub fn save_simple_graph(path: &Path, g: &SimpleGraph) -> Result<()> {
    write_string(path, &write_edge_list(g))
}

/// Dense relabeling of arbitrary node tokens, in order of first appearance.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct IdMap {
    ids: Vec<String>,
    index: HashMap<String, usize>,
}

impl IdMap {
    pub fn intern(&mut self, id: &str) -> usize {
        if let Some(&i) = self.index.get(id) {
            return i;
        }
        let i = self.ids.len();
        self.ids.push(id.to_string());
        self.index.insert(id.to_string(), i);
        i
    }

    pub fn get(&self, id: &str) -> Option<usize> {
        self.index.get(id).copied()
    }

    pub fn original(&self, i: usize) -> &str {
        &self.ids[i]
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    /// `node,original_id` CSV.
    pub fn to_csv(&self) -> String {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(["node", "original_id"]).unwrap();
        for (i, id) in self.ids.iter().enumerate() {
            w.write_record([i.to_string().as_str(), id]).unwrap();
        }
        String::from_utf8(w.into_inner().unwrap()).unwrap()
    }
}

/// Edge list without a header whose node ids are arbitrary tokens (sparse
/// integers, strings). Repeated pairs and self-loops are rejected as in
/// [`parse_edge_list`].
pub fn parse_labeled_edge_list(text: &str) -> Result<(SimpleGraph, IdMap)> {
    let mut ids = IdMap::default();
    let mut records = Vec::new();
    for (line, rec) in content_lines(text) {
        let [a, b] = fields::<2>(rec, line)?;
        records.push((line, ids.intern(a), ids.intern(b)));
    }
    validated_graph(ids.len(), records).map(|g| (g, ids))
}

/// `nodes <N>` then `i j mult` lines with `mult ≥ 1`; `i == j` is a self-loop count.
pub fn parse_multigraph(text: &str) -> Result<MultiGraph> {
    let mut lines = content_lines(text);
    let num_nodes = parse_header(&mut lines)?;
    let mut mg = MultiGraph::new(num_nodes);
    let mut seen = HashMap::new();
    for (line, rec) in lines {
        let [a, b, m] = fields::<3>(rec, line)?;
        let i = parse_node(a, line, num_nodes)?;
        let j = parse_node(b, line, num_nodes)?;
        let m: u32 = m
            .parse()
            .map_err(|_| Error::parse(line, format!("bad multiplicity `{m}`")))?;
        if m == 0 {
            return Err(Error::parse(line, "multiplicity must be positive"));
        }
        if let Some(first) = seen.insert((i.min(j), i.max(j)), line) {
            return Err(Error::Validation {
                msg: "duplicate pair".into(),
                lines: vec![first, line],
            });
        }
        mg.add(i, j, m);
    }
    Ok(mg)
}

pub fn write_multigraph(mg: &MultiGraph) -> String {
    let mut out = format!("nodes {}\n", mg.num_nodes());
    for ((i, j), m) in mg.iter() {
        writeln!(out, "{i} {j} {m}").unwrap();
    }
    out
}

/// Real-valued variant of the multigraph format (`i j mean`), used for
/// posterior means. Values must be finite and non-negative.
pub fn parse_multiplicity_map(text: &str) -> Result<MultiplicityMap> {
    let mut lines = content_lines(text);
    let num_nodes = parse_header(&mut lines)?;
    let mut map = MultiplicityMap::new(num_nodes);
    let mut seen = HashMap::new();
    for (line, rec) in lines {
        let [a, b, v] = fields::<3>(rec, line)?;
        let i = parse_node(a, line, num_nodes)?;
        let j = parse_node(b, line, num_nodes)?;
        let v: f64 = v
            .parse()
            .map_err(|_| Error::parse(line, format!("bad value `{v}`")))?;
        if !v.is_finite() || v < 0.0 {
            return Err(Error::parse(line, "value must be finite and non-negative"));
        }
        if let Some(first) = seen.insert((i.min(j), i.max(j)), line) {
            return Err(Error::Validation {
                msg: "duplicate pair".into(),
                lines: vec![first, line],
            });
        }
        map.set(i, j, v);
    }
    Ok(map)
}

pub fn write_multiplicity_map(map: &MultiplicityMap) -> String {
    let mut out = format!("nodes {}\n", map.num_nodes());
    for ((i, j), v) in map.iter() {
        writeln!(out, "{i} {j} {v}").unwrap();
    }
    out
}

/// `i j value` triplets of a sparse operator, one stored entry per line.
pub fn write_triplets(m: &CsrMatrix) -> String {
    let mut out = format!("%% {} {} {}\n", m.dim(), m.dim(), m.nnz());
    for (i, j, v) in m.triplets() {
        writeln!(out, "{i} {j} {v}").unwrap();
    }
    out
}

fn csv_reader(text: &str) -> csv::Reader<&[u8]> {
    csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .comment(Some(b'#'))
        .from_reader(text.as_bytes())
}

fn csv_line(e: &csv::Error) -> usize {
    e.position().map(|p| p.line() as usize).unwrap_or(0)
}

fn csv_err(e: csv::Error) -> Error {
    Error::parse(csv_line(&e), e.to_string())
}

fn record_line(rec: &csv::StringRecord) -> usize {
    rec.position().map(|p| p.line() as usize).unwrap_or(0)
}

fn check_header(r: &mut csv::Reader<&[u8]>, expected: &[&str]) -> Result<csv::StringRecord> {
    let header = r.headers().map_err(csv_err)?.clone();
    if header.len() < expected.len() || header.iter().zip(expected).any(|(h, e)| h != *e) {
        return Err(Error::parse(
            1,
            format!("expected header starting `{}`", expected.join(",")),
        ));
    }
    Ok(header)
}

/// Reads `node,<value>` rows into a map that must cover `0..num_nodes` exactly once.
fn per_node<T>(
    text: &str,
    header: &[&str],
    num_nodes: usize,
    mut value: impl FnMut(&str, usize) -> Result<T>,
) -> Result<Vec<T>> {
    let mut r = csv_reader(text);
    check_header(&mut r, header)?;
    let mut out: BTreeMap<usize, T> = BTreeMap::new();
    for rec in r.records() {
        let rec = rec.map_err(csv_err)?;
        let line = record_line(&rec);
        if rec.len() != 2 {
            return Err(Error::parse(
                line,
                format!("expected 2 fields, found {}", rec.len()),
            ));
        }
        let node = parse_node(&rec[0], line, num_nodes)?;
        let v = value(&rec[1], line)?;
        if out.insert(node, v).is_some() {
            return Err(Error::Validation {
                msg: format!("node {node} listed twice"),
                lines: vec![line],
            });
        }
    }
    if out.len() != num_nodes {
        let missing = (0..num_nodes).find(|n| !out.contains_key(n)).unwrap();
        return Err(Error::Validation {
            msg: format!("node {missing} has no entry"),
            lines: Vec::new(),
        });
    }
    Ok(out.into_values().collect())
}

/// Feature CSV with header `node,f0,..,f{m-1}`; rows may come in any order.
pub fn parse_features(text: &str, num_nodes: usize) -> Result<DenseMatrix> {
    let mut r = csv_reader(text);
    let header = check_header(&mut r, &["node"])?;
    let m = header.len() - 1;
    for (c, h) in header.iter().skip(1).enumerate() {
        if h != format!("f{c}") {
            return Err(Error::parse(
                1,
                format!("feature column {c} is named `{h}`"),
            ));
        }
    }
    let mut out = DenseMatrix::zeros(num_nodes, m);
    let mut filled = vec![false; num_nodes];
    for rec in r.records() {
        let rec = rec.map_err(csv_err)?;
        let line = record_line(&rec);
        if rec.len() != m + 1 {
            return Err(Error::parse(
                line,
                format!("expected {} fields, found {}", m + 1, rec.len()),
            ));
        }
        let node = parse_node(&rec[0], line, num_nodes)?;
        if std::mem::replace(&mut filled[node], true) {
            return Err(Error::Validation {
                msg: format!("node {node} listed twice"),
                lines: vec![line],
            });
        }
        let row = out.row_mut(node);
        for (slot, tok) in row.iter_mut().zip(rec.iter().skip(1)) {
            let v: f64 = tok
                .parse()
                .map_err(|_| Error::parse(line, format!("bad feature value `{tok}`")))?;
            if !v.is_finite() {
                return Err(Error::parse(line, "non-finite feature value"));
            }
            *slot = v;
        }
    }
    if let Some(missing) = filled.iter().position(|f| !f) {
        return Err(Error::Validation {
            msg: format!("node {missing} has no feature row"),
            lines: Vec::new(),
        });
    }
    Ok(out)
}

pub fn write_features(x: &DenseMatrix) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    let mut header = vec!["node".to_string()];
    header.extend((0..x.cols()).map(|c| format!("f{c}")));
    w.write_record(&header).unwrap();
    for r in 0..x.rows() {
        let mut rec = vec![r.to_string()];
        rec.extend(x.row(r).iter().map(|v| v.to_string()));
        w.write_record(&rec).unwrap();
    }
    String::from_utf8(w.into_inner().unwrap()).unwrap()
}

/// `node,class` CSV; classes are non-negative integers.
pub fn parse_labels(text: &str, num_nodes: usize) -> Result<Vec<usize>> {
    per_node(text, &["node", "class"], num_nodes, |tok, line| {
        tok.parse()
            .map_err(|_| Error::parse(line, format!("bad class `{tok}`")))
    })
}

pub fn write_labels(y: &[usize]) -> String {
    let mut out = String::from("node,class\n");
    for (i, c) in y.iter().enumerate() {
        writeln!(out, "{i},{c}").unwrap();
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Split {
    Train,
    Test,
    /// Optional held-out nodes for early stopping.
    Val,
}

impl Split {
    pub fn name(&self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::Test => "test",
            Split::Val => "val",
        }
    }
}

/// `node,split` CSV with split in `{train, test, val}`.
pub fn parse_split(text: &str, num_nodes: usize) -> Result<Vec<Split>> {
    per_node(text, &["node", "split"], num_nodes, |tok, line| match tok {
        "train" => Ok(Split::Train),
        "test" => Ok(Split::Test),
        "val" => Ok(Split::Val),
        _ => Err(Error::parse(line, format!("unknown split `{tok}`"))),
    })
}

pub fn write_split(split: &[Split]) -> String {
    let mut out = String::from("node,split\n");
    for (i, s) in split.iter().enumerate() {
        writeln!(out, "{i},{}", s.name()).unwrap();
    }
    out
}

/// One row of a snapshot archive's `index.csv`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SnapshotEntry {
    pub epoch: usize,
    /// Multigraph file name inside the archive directory.
    pub file: String,
}

pub const SNAPSHOT_INDEX: &str = "index.csv";

/// `snapshot,epoch,file` rows, numbered `0, 1, ...` in order. File names
/// must be plain names inside the archive directory.
pub fn parse_snapshot_index(text: &str) -> Result<Vec<SnapshotEntry>> {
    let mut r = csv_reader(text);
    check_header(&mut r, &["snapshot", "epoch", "file"])?;
    let mut out = Vec::new();
    for rec in r.records() {
        let rec = rec.map_err(csv_err)?;
        let line = record_line(&rec);
        if rec.len() != 3 {
            return Err(Error::parse(
                line,
                format!("expected 3 fields, found {}", rec.len()),
            ));
        }
        if rec[0].parse::<usize>().ok() != Some(out.len()) {
            return Err(Error::parse(
                line,
                format!(
                    "expected snapshot number {}, found `{}`",
                    out.len(),
                    &rec[0]
                ),
            ));
        }
        let epoch = rec[1]
            .parse()
            .map_err(|_| Error::parse(line, format!("bad epoch `{}`", &rec[1])))?;
        let file = &rec[2];
        if file.is_empty() || file.contains(['/', '\\']) || file == "." || file == ".." {
            return Err(Error::parse(
                line,
                format!("bad snapshot file name `{file}`"),
            ));
        }
        out.push(SnapshotEntry {
            epoch,
            file: file.to_string(),
        });
    }
    Ok(out)
}

pub fn write_snapshot_index(entries: &[SnapshotEntry]) -> String {
    let mut out = String::from("snapshot,epoch,file\n");
    for (n, e) in entries.iter().enumerate() {
        writeln!(out, "{n},{},{}", e.epoch, e.file).unwrap();
    }
    out
}

/// Writes `index.csv` plus one multigraph file per snapshot into `dir`,
/// returning the file names written (index last).
pub fn save_snapshot_archive(dir: &Path, snapshots: &[(usize, MultiGraph)]) -> Result<Vec<String>> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let mut entries = Vec::with_capacity(snapshots.len());
    for (n, (epoch, mg)) in snapshots.iter().enumerate() {
        let file = format!("snapshot_{n:06}.txt");
        write_string(&dir.join(&file), &write_multigraph(mg))?;
        entries.push(SnapshotEntry {
            epoch: *epoch,
            file,
        });
    }
    write_string(&dir.join(SNAPSHOT_INDEX), &write_snapshot_index(&entries))?;
    let mut names: Vec<String> = entries.into_iter().map(|e| e.file).collect();
    names.push(SNAPSHOT_INDEX.to_string());
    Ok(names)
}

/// Reads an archive written by [`save_snapshot_archive`]. A missing index
/// is a missing artifact rather than an I/O error.
pub fn load_snapshot_archive(dir: &Path) -> Result<Vec<(usize, MultiGraph)>> {
    let index = dir.join(SNAPSHOT_INDEX);
    if !index.is_file() {
        return Err(Error::MissingArtifact(format!(
            "no snapshot index at {}",
            index.display()
        )));
    }
    let entries = parse_snapshot_index(&read_to_string(&index)?)?;
    if entries.is_empty() {
        return Err(Error::EmptyTrace);
    }
    entries
        .into_iter()
        .map(|e| {
            Ok((
                e.epoch,
                parse_multigraph(&read_to_string(&dir.join(&e.file))?)?,
            ))
        })
        .collect()
}
