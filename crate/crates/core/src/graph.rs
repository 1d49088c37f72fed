//! Sparse undirected weighted graphs, the modularity set function and the
//! threshold sweep that extracts a node set from a continuous vector.

use std::fmt;
use std::fs;
use std::path::Path;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum GraphError {
    #[error("failed to read {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("negative weight {weight} ({context})")]
    NegativeWeight { context: String, weight: f64 },
    #[error("graph has zero volume")]
    EmptyGraph,
    #[error("node index {index} out of range for {n} nodes")]
    IndexOutOfRange { index: usize, n: usize },
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("invalid box bounds a = {a}, b = {b}: both must be positive and finite")]
    InvalidBox { a: f64, b: f64 },
}

/// Input file format for [`load_graph`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GraphFormat {
    /// Pick by file extension (`.mtx` / `.mm` means Matrix Market), falling
    /// back to a content sniff for the `%%MatrixMarket` banner.
    Auto,
    /// Whitespace-separated `u v [w]` lines; `#` and `%` start comments.
    EdgeList,
    /// Matrix Market coordinate format (pattern, real or integer).
    MatrixMarket,
}

/// Node-id convention of the input file.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Indexing {
    /// Zero-based if any node id 0 appears, one-based otherwise.
    Auto,
    ZeroBased,
    OneBased,
}

/// Indexing actually applied while loading (reported back to callers that
/// need to write node ids in the input convention).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ResolvedIndexing {
    ZeroBased,
    OneBased,
}

impl ResolvedIndexing {
    /// Offset to add to an internal zero-based node id for output.
    pub fn output_offset(self) -> usize {
        match self {
            ResolvedIndexing::ZeroBased => 0,
            ResolvedIndexing::OneBased => 1,
        }
    }
}

/// Details of a completed load, alongside the graph itself.
#[derive(Debug, Clone)]
pub struct LoadReport {
    pub indexing: ResolvedIndexing,
    pub format: ResolvedFormat,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ResolvedFormat {
    EdgeList,
    MatrixMarket,
}

/// Immutable sparse undirected weighted graph.
///
/// Adjacency is stored as per-node sorted neighbor lists (CSR layout) with
/// both directions of every edge present; self-loops are stored once. All
/// stored weights are strictly positive, `degree(i)` is the sum of the
/// weights incident to `i` (a self-loop counts once) and `volume` is the sum
/// of all degrees.
#[derive(Debug, Clone)]
pub struct Graph {
    n: usize,
    offsets: Vec<usize>,
    neighbors: Vec<u32>,
    weights: Vec<f64>,
    degrees: Vec<f64>,
    volume: f64,
    edge_count: usize,
}

impl Graph {
    /// Builds a graph from undirected edges `(u, v, w)` on `n` nodes.
    ///
    /// Duplicate edges (in either orientation) have their weights summed;
    /// zero-weight edges are dropped after summation; self-loops are kept.
    pub fn from_edges(n: usize, edges: &[(usize, usize, f64)]) -> Result<Graph, GraphError> {
        let mut directed: Vec<(u32, u32, f64)> = Vec::with_capacity(edges.len() * 2);
        for &(u, v, w) in edges {
            if u >= n {
                return Err(GraphError::IndexOutOfRange { index: u, n });
            }
            if v >= n {
                return Err(GraphError::IndexOutOfRange { index: v, n });
            }
            if !w.is_finite() || w < 0.0 {
                return Err(GraphError::NegativeWeight {
                    context: format!("edge ({u}, {v})"),
                    weight: w,
                });
            }
            directed.push((u as u32, v as u32, w));
            if u != v {
                directed.push((v as u32, u as u32, w));
            }
        }
        directed.sort_unstable_by_key(|e| (e.0, e.1));

        // Merge duplicates, drop zero-weight entries.
        let mut merged: Vec<(u32, u32, f64)> = Vec::with_capacity(directed.len());
        for (u, v, w) in directed {
            match merged.last_mut() {
                Some(last) if last.0 == u && last.1 == v => last.2 += w,
                _ => merged.push((u, v, w)),
            }
        }
        merged.retain(|e| e.2 > 0.0);

        let mut offsets = vec![0usize; n + 1];
        for &(u, _, _) in &merged {
            offsets[u as usize + 1] += 1;
        }
        for i in 0..n {
            offsets[i + 1] += offsets[i];
        }
        let mut neighbors = Vec::with_capacity(merged.len());
        let mut weights = Vec::with_capacity(merged.len());
        let mut edge_count = 0usize;
        for &(u, v, w) in &merged {
            neighbors.push(v);
            weights.push(w);
            if v as usize >= u as usize {
                edge_count += 1;
            }
        }
        let mut degrees = vec![0.0f64; n];
        for i in 0..n {
            degrees[i] = weights[offsets[i]..offsets[i + 1]].iter().sum();
        }
        let volume: f64 = degrees.iter().sum();
        if volume <= 0.0 || volume.is_nan() {
            return Err(GraphError::EmptyGraph);
        }
        Ok(Graph {
            n,
            offsets,
            neighbors,
            weights,
            degrees,
            volume,
            edge_count,
        })
    }

    pub fn node_count(&self) -> usize {
        self.n
    }

    /// Number of undirected edges (self-loops count once).
    pub fn edge_count(&self) -> usize {
        self.edge_count
    }

    pub fn degree(&self, i: usize) -> f64 {
        self.degrees[i]
    }

    pub fn degrees(&self) -> &[f64] {
        &self.degrees
    }

    pub fn volume(&self) -> f64 {
        self.volume
    }

    /// Sorted neighbors of `i` with edge weights.
    pub fn neighbors(&self, i: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let range = self.offsets[i]..self.offsets[i + 1];
        self.neighbors[range.clone()]
            .iter()
            .zip(&self.weights[range])
            .map(|(&j, &w)| (j as usize, w))
    }

    /// Weight of edge `(i, j)`, or 0 when absent.
    pub fn weight(&self, i: usize, j: usize) -> f64 {
        let range = self.offsets[i]..self.offsets[i + 1];
        match self.neighbors[range.clone()].binary_search(&(j as u32)) {
            Ok(pos) => self.weights[range.start + pos],
            Err(_) => 0.0,
        }
    }
}

/// Subset of the nodes of a graph, with constant-time membership tests.
#[derive(Debug, Clone, PartialEq)]
pub struct NodeSet {
    n: usize,
    mask: Vec<bool>,
    members: Vec<usize>,
}

impl NodeSet {
    pub fn empty(n: usize) -> NodeSet {
        NodeSet {
            n,
            mask: vec![false; n],
            members: Vec::new(),
        }
    }

    pub fn full(n: usize) -> NodeSet {
        NodeSet {
            n,
            mask: vec![true; n],
            members: (0..n).collect(),
        }
    }

    pub fn from_indices(n: usize, indices: &[usize]) -> Result<NodeSet, GraphError> {
        let mut mask = vec![false; n];
        for &i in indices {
            if i >= n {
                return Err(GraphError::IndexOutOfRange { index: i, n });
            }
            mask[i] = true;
        }
        Ok(NodeSet::from_mask(mask))
    }

    pub fn from_mask(mask: Vec<bool>) -> NodeSet {
        let members = mask
            .iter()
            .enumerate()
            .filter_map(|(i, &m)| m.then_some(i))
            .collect();
        NodeSet {
            n: mask.len(),
            mask,
            members,
        }
    }

    pub fn universe_len(&self) -> usize {
        self.n
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    pub fn contains(&self, i: usize) -> bool {
        self.mask[i]
    }

    /// Member node ids in ascending order.
    pub fn indices(&self) -> &[usize] {
        &self.members
    }

    pub fn complement(&self) -> NodeSet {
        NodeSet::from_mask(self.mask.iter().map(|&m| !m).collect())
    }

    /// Signed indicator `b` on members, `-a` elsewhere.
    pub fn signed_indicator(&self, a: f64, b: f64) -> Vec<f64> {
        self.mask.iter().map(|&m| if m { b } else { -a }).collect()
    }
}

impl fmt::Display for NodeSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{{")?;
        for (k, i) in self.members.iter().enumerate() {
            if k > 0 {
                write!(f, ", ")?;
            }
            write!(f, "{i}")?;
        }
        write!(f, "}}")
    }
}

/// The feasible box `[-a, b]^n` with `a, b > 0`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoxSpec {
    a: f64,
    b: f64,
}

impl BoxSpec {
    pub fn new(a: f64, b: f64) -> Result<BoxSpec, GraphError> {
        if !(a > 0.0 && b > 0.0 && a.is_finite() && b.is_finite()) {
            return Err(GraphError::InvalidBox { a, b });
        }
        Ok(BoxSpec { a, b })
    }

    pub fn unit() -> BoxSpec {
        BoxSpec { a: 1.0, b: 1.0 }
    }

    pub fn a(&self) -> f64 {
        self.a
    }

    pub fn b(&self) -> f64 {
        self.b
    }

    pub fn lower(&self) -> f64 {
        -self.a
    }

    pub fn upper(&self) -> f64 {
        self.b
    }

    pub fn clamp(&self, v: f64) -> f64 {
        v.clamp(-self.a, self.b)
    }

    pub fn contains(&self, v: f64) -> bool {
        (-self.a..=self.b).contains(&v)
    }
}

/// Modularity of `s`: actual minus expected edge weight inside the set,
/// normalized by the graph volume. `Q(V) = Q(∅) = 0` and `Q(S̄) = Q(S)`.
pub fn modularity(g: &Graph, s: &NodeSet) -> f64 {
    debug_assert_eq!(s.universe_len(), g.node_count());
    let vol = g.volume();
    let mut inside = 0.0;
    let mut deg_sum = 0.0;
    for &i in s.indices() {
        deg_sum += g.degree(i);
        for (j, w) in g.neighbors(i) {
            if s.contains(j) {
                inside += w;
            }
        }
    }
    (inside - deg_sum * deg_sum / vol) / vol
}

/// Sorted order of `0..n` by ascending `x` value, ties by node index.
fn ascending_order(x: &[f64]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..x.len()).collect();
    order.sort_by(|&i, &j| x[i].total_cmp(&x[j]).then(i.cmp(&j)));
    order
}

/// Modularity of every suffix of `order`: entry `t` is `Q` of the set made of
/// nodes at sorted positions `t..n`. Computed incrementally in `O(m + n)`.
fn suffix_modularities(g: &Graph, order: &[usize]) -> Vec<f64> {
    let n = order.len();
    let vol = g.volume();
    let mut in_set = vec![false; n];
    let mut inside = 0.0;
    let mut deg_sum = 0.0;
    let mut q = vec![0.0; n];
    for t in (0..n).rev() {
        let v = order[t];
        for (j, w) in g.neighbors(v) {
            if in_set[j] {
                inside += 2.0 * w;
            } else if j == v {
                inside += w;
            }
        }
        deg_sum += g.degree(v);
        in_set[v] = true;
        q[t] = (inside - deg_sum * deg_sum / vol) / vol;
    }
    q
}

/// Best level set of `x` by modularity.
///
/// Sorts `x` ascending (stable, ties by node index) and evaluates the level
/// sets `C_i = {k : x_k >= x_i}` for the sorted positions `i = 2..n`,
/// returning the one with maximal `Q` together with that value. Equal-`Q`
/// ties resolve toward the smaller set. Runs in `O(m + n log n)`.
pub fn threshold_sweep(g: &Graph, x: &[f64]) -> Result<(NodeSet, f64), GraphError> {
    let n = g.node_count();
    if x.len() != n {
        return Err(GraphError::DimensionMismatch {
            expected: n,
            got: x.len(),
        });
    }
    if n == 1 {
        return Ok((NodeSet::full(1), 0.0));
    }
    let order = ascending_order(x);
    let suffix_q = suffix_modularities(g, &order);

    // Level sets of positions 2..n collapse onto suffixes that start where a
    // new value begins; a tie with position 1 makes the whole node set a
    // candidate as well.
    let mut candidate_starts: Vec<usize> = Vec::new();
    let mut run_start = 0usize;
    for t in 1..n {
        if x[order[t]] > x[order[run_start]] {
            run_start = t;
        }
        if candidate_starts.last() != Some(&run_start) {
            candidate_starts.push(run_start);
        }
    }

    // Scan smallest set first so that ties keep the smaller set.
    let mut best_start = *candidate_starts.last().expect("n >= 2");
    let mut best_q = suffix_q[best_start];
    for &start in candidate_starts.iter().rev().skip(1) {
        if suffix_q[start] > best_q {
            best_q = suffix_q[start];
            best_start = start;
        }
    }
    let set = NodeSet::from_indices(n, &order[best_start..])?;
    Ok((set, best_q))
}

/// Loads a graph from `path`.
pub fn load_graph(
    path: impl AsRef<Path>,
    format: GraphFormat,
    indexing: Indexing,
) -> Result<Graph, GraphError> {
    load_graph_detailed(path, format, indexing).map(|(g, _)| g)
}

/// Loads a graph and reports the resolved format and indexing.
pub fn load_graph_detailed(
    path: impl AsRef<Path>,
    format: GraphFormat,
    indexing: Indexing,
) -> Result<(Graph, LoadReport), GraphError> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|source| GraphError::Io {
        path: path.display().to_string(),
        source,
    })?;
    let format = match format {
        GraphFormat::Auto => {
            let by_ext = path
                .extension()
                .and_then(|e| e.to_str())
                .map(|e| e.eq_ignore_ascii_case("mtx") || e.eq_ignore_ascii_case("mm"))
                .unwrap_or(false);
            if by_ext || text.trim_start().starts_with("%%MatrixMarket") {
                ResolvedFormat::MatrixMarket
            } else {
                ResolvedFormat::EdgeList
            }
        }
        GraphFormat::EdgeList => ResolvedFormat::EdgeList,
        GraphFormat::MatrixMarket => ResolvedFormat::MatrixMarket,
    };
    match format {
        ResolvedFormat::EdgeList => parse_edge_list(&text, indexing).map(|(g, ix)| {
            (
                g,
                LoadReport {
                    indexing: ix,
                    format,
                },
            )
        }),
        ResolvedFormat::MatrixMarket => parse_matrix_market(&text, indexing).map(|(g, ix)| {
            (
                g,
                LoadReport {
                    indexing: ix,
                    format,
                },
            )
        }),
    }
}

fn parse_weight(tok: &str, line: usize) -> Result<f64, GraphError> {
    let w: f64 = tok.parse().map_err(|_| GraphError::Parse {
        line,
        msg: format!("invalid weight '{tok}'"),
    })?;
    if !w.is_finite() {
        return Err(GraphError::Parse {
            line,
            msg: format!("non-finite weight '{tok}'"),
        });
    }
    if w < 0.0 {
        return Err(GraphError::NegativeWeight {
            context: format!("line {line}"),
            weight: w,
        });
    }
    Ok(w)
}

fn parse_node_id(tok: &str, line: usize) -> Result<usize, GraphError> {
    tok.parse().map_err(|_| GraphError::Parse {
        line,
        msg: format!("invalid node id '{tok}'"),
    })
}

/// Edge list: `u v [w]` per line, `#` / `%` comments, weight defaults to 1.
fn parse_edge_list(
    text: &str,
    indexing: Indexing,
) -> Result<(Graph, ResolvedIndexing), GraphError> {
    let mut raw: Vec<(usize, usize, f64)> = Vec::new();
    let mut min_id = usize::MAX;
    let mut max_id = 0usize;
    for (lineno, line) in text.lines().enumerate() {
        let line_num = lineno + 1;
        let trimmed = line.trim();
        if trimmed.is_empty() || trimmed.starts_with('#') || trimmed.starts_with('%') {
            continue;
        }
        let toks: Vec<&str> = trimmed.split_whitespace().collect();
        if toks.len() != 2 && toks.len() != 3 {
            return Err(GraphError::Parse {
                line: line_num,
                msg: format!("expected 'u v [w]', found {} fields", toks.len()),
            });
        }
        let u = parse_node_id(toks[0], line_num)?;
        let v = parse_node_id(toks[1], line_num)?;
        let w = if toks.len() == 3 {
            parse_weight(toks[2], line_num)?
        } else {
            1.0
        };
        min_id = min_id.min(u).min(v);
        max_id = max_id.max(u).max(v);
        raw.push((u, v, w));
    }
    if raw.is_empty() {
        return Err(GraphError::EmptyGraph);
    }
    let resolved = match indexing {
        Indexing::ZeroBased => ResolvedIndexing::ZeroBased,
        Indexing::OneBased => ResolvedIndexing::OneBased,
        Indexing::Auto => {
            if min_id == 0 {
                ResolvedIndexing::ZeroBased
            } else {
                ResolvedIndexing::OneBased
            }
        }
    };
    let shift = resolved.output_offset();
    if shift == 1 && min_id == 0 {
        return Err(GraphError::Parse {
            line: 0,
            msg: "node id 0 found in a one-based file".into(),
        });
    }
    let n = max_id + 1 - shift;
    let edges: Vec<(usize, usize, f64)> = raw
        .into_iter()
        .map(|(u, v, w)| (u - shift, v - shift, w))
        .collect();
    Ok((Graph::from_edges(n, &edges)?, resolved))
}

/// Matrix Market coordinate reader (pattern, real or integer fields;
/// symmetric or general symmetry). Indices are one-based per the format
/// unless explicitly overridden.
fn parse_matrix_market(
    text: &str,
    indexing: Indexing,
) -> Result<(Graph, ResolvedIndexing), GraphError> {
    let mut lines = text.lines().enumerate();
    let (_, header) = lines.next().ok_or(GraphError::Parse {
        line: 1,
        msg: "empty file".into(),
    })?;
    let head: Vec<String> = header.split_whitespace().map(|t| t.to_lowercase()).collect();
    if head.len() < 5 || !head[0].starts_with("%%matrixmarket") {
        return Err(GraphError::Parse {
            line: 1,
            msg: "missing %%MatrixMarket header".into(),
        });
    }
    if head[1] != "matrix" || head[2] != "coordinate" {
        return Err(GraphError::Parse {
            line: 1,
            msg: format!("unsupported layout '{} {}' (need matrix coordinate)", head[1], head[2]),
        });
    }
    let field = head[3].as_str();
    if !matches!(field, "real" | "integer" | "pattern") {
        return Err(GraphError::Parse {
            line: 1,
            msg: format!("unsupported field '{field}'"),
        });
    }
    if !matches!(head[4].as_str(), "symmetric" | "general") {
        return Err(GraphError::Parse {
            line: 1,
            msg: format!("unsupported symmetry '{}'", head[4]),
        });
    }

    let mut size: Option<(usize, usize, usize)> = None;
    let mut entries: Vec<(usize, usize, f64)> = Vec::new();
    for (lineno, line) in lines {
        let line_num = lineno + 1;
        let trimmed = line.trim();
        if trimmed.is_empty() || trimmed.starts_with('%') {
            continue;
        }
        let toks: Vec<&str> = trimmed.split_whitespace().collect();
        if size.is_none() {
            if toks.len() != 3 {
                return Err(GraphError::Parse {
                    line: line_num,
                    msg: "expected size line 'rows cols nnz'".into(),
                });
            }
            let rows = parse_node_id(toks[0], line_num)?;
            let cols = parse_node_id(toks[1], line_num)?;
            let nnz = parse_node_id(toks[2], line_num)?;
            if rows != cols {
                return Err(GraphError::Parse {
                    line: line_num,
                    msg: format!("matrix must be square, got {rows}x{cols}"),
                });
            }
            size = Some((rows, cols, nnz));
            entries.reserve(nnz);
            continue;
        }
        let expected = if field == "pattern" { 2 } else { 3 };
        if toks.len() != expected {
            return Err(GraphError::Parse {
                line: line_num,
                msg: format!("expected {expected} fields, found {}", toks.len()),
            });
        }
        let i = parse_node_id(toks[0], line_num)?;
        let j = parse_node_id(toks[1], line_num)?;
        let w = if field == "pattern" {
            1.0
        } else {
            parse_weight(toks[2], line_num)?
        };
        entries.push((i, j, w));
    }
    let (n, _, nnz) = size.ok_or(GraphError::Parse {
        line: 0,
        msg: "missing size line".into(),
    })?;
    if entries.len() != nnz {
        return Err(GraphError::Parse {
            line: 0,
            msg: format!("expected {nnz} entries, found {}", entries.len()),
        });
    }
    let resolved = match indexing {
        Indexing::ZeroBased => ResolvedIndexing::ZeroBased,
        _ => ResolvedIndexing::OneBased,
    };
    let shift = resolved.output_offset();
    let mut edges = Vec::with_capacity(entries.len());
    for (i, j, w) in entries {
        if i < shift || j < shift {
            return Err(GraphError::Parse {
                line: 0,
                msg: format!("node id below {shift} in a {resolved:?} file"),
            });
        }
        let (u, v) = (i - shift, j - shift);
        if u >= n || v >= n {
            return Err(GraphError::IndexOutOfRange {
                index: u.max(v),
                n,
            });
        }
        edges.push((u, v, w));
    }
    Ok((Graph::from_edges(n, &edges)?, resolved))
}
