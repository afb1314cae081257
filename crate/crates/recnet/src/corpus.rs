//! Article graph, texts, and edit-history ingestion from flat TSV files,
//! plus graph cleaning (redirect resolution, category filtering) and
//! degree/diameter statistics.

use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet, VecDeque};
use std::fmt;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

use crate::binio;
use crate::error::{Error, Result};

/// Stable article identifier, unique across the whole pipeline.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct ArticleId(pub u64);

impl fmt::Display for ArticleId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.0.fmt(f)
    }
}

impl From<u64> for ArticleId {
    fn from(v: u64) -> Self {
        ArticleId(v)
    }
}

/// Directed link graph over article ids.
///
/// Invariants enforced at construction: no self-loops, no duplicate edges,
/// every edge endpoint present as a node. Adjacency lists are sorted, so
/// iteration order is deterministic.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ArticleGraph {
    out_edges: BTreeMap<ArticleId, Vec<ArticleId>>,
}

impl ArticleGraph {
    pub fn new() -> Self {
        ArticleGraph {
            out_edges: BTreeMap::new(),
        }
    }

    /// Builds a graph from directed edges, dropping self-loops and duplicates.
    /// Nodes are the union of all endpoints plus `extra_nodes`.
    pub fn from_edges(
        edges: impl IntoIterator<Item = (ArticleId, ArticleId)>,
        extra_nodes: impl IntoIterator<Item = ArticleId>,
    ) -> Self {
        let mut out: BTreeMap<ArticleId, BTreeSet<ArticleId>> = BTreeMap::new();
        let mut nodes: BTreeSet<ArticleId> = extra_nodes.into_iter().collect();
        for (src, dst) in edges {
            nodes.insert(src);
            nodes.insert(dst);
            if src != dst {
                out.entry(src).or_default().insert(dst);
            }
        }
        let mut out_edges: BTreeMap<ArticleId, Vec<ArticleId>> = BTreeMap::new();
        for node in nodes {
            let list = out
                .remove(&node)
                .map(|set| set.into_iter().collect())
                .unwrap_or_default();
            out_edges.insert(node, list);
        }
        ArticleGraph { out_edges }
    }

    pub fn node_count(&self) -> usize {
        self.out_edges.len()
    }

    pub fn edge_count(&self) -> usize {
        self.out_edges.values().map(Vec::len).sum()
    }

    pub fn contains_node(&self, id: ArticleId) -> bool {
        self.out_edges.contains_key(&id)
    }

    /// Node ids in ascending order.
    pub fn nodes(&self) -> impl Iterator<Item = ArticleId> + '_ {
        self.out_edges.keys().copied()
    }

    pub fn out_neighbors(&self, id: ArticleId) -> &[ArticleId] {
        self.out_edges.get(&id).map(Vec::as_slice).unwrap_or(&[])
    }

    /// Directed edges in (src, dst) ascending order.
    pub fn edges(&self) -> impl Iterator<Item = (ArticleId, ArticleId)> + '_ {
        self.out_edges
            .iter()
            .flat_map(|(&src, dsts)| dsts.iter().map(move |&dst| (src, dst)))
    }

    /// Neighbor lists of the undirected view (in- and out-neighbors merged,
    /// each undirected edge counted once per endpoint).
    pub fn undirected_neighbors(&self) -> BTreeMap<ArticleId, Vec<ArticleId>> {
        let mut sets: BTreeMap<ArticleId, BTreeSet<ArticleId>> = BTreeMap::new();
        for &node in self.out_edges.keys() {
            sets.insert(node, BTreeSet::new());
        }
        for (&src, dsts) in &self.out_edges {
            for &dst in dsts {
                sets.get_mut(&src).unwrap().insert(dst);
                sets.get_mut(&dst).unwrap().insert(src);
            }
        }
        sets.into_iter()
            .map(|(node, set)| (node, set.into_iter().collect()))
            .collect()
    }

    pub fn write_to(&self, path: &Path) -> Result<()> {
        let mut w = BufWriter::new(File::create(path)?);
        w.write_all(b"GRF1")?;
        binio::write_u64(&mut w, self.node_count() as u64)?;
        binio::write_u64(&mut w, self.edge_count() as u64)?;
        for node in self.nodes() {
            binio::write_u64(&mut w, node.0)?;
        }
        for (src, dst) in self.edges() {
            binio::write_u64(&mut w, src.0)?;
            binio::write_u64(&mut w, dst.0)?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn read_from(path: &Path) -> Result<Self> {
        let mut r = BufReader::new(File::open(path)?);
        Self::read(&mut r)
    }

    pub fn read<R: Read>(r: &mut R) -> Result<Self> {
        binio::expect_magic(r, b"GRF1")?;
        let node_count = binio::read_u64(r, "node count")? as usize;
        let edge_count = binio::read_u64(r, "edge count")? as usize;
        let mut nodes = Vec::with_capacity(node_count);
        for _ in 0..node_count {
            nodes.push(ArticleId(binio::read_u64(r, "node id")?));
        }
        let mut edges = Vec::with_capacity(edge_count);
        for _ in 0..edge_count {
            let src = ArticleId(binio::read_u64(r, "edge src")?);
            let dst = ArticleId(binio::read_u64(r, "edge dst")?);
            edges.push((src, dst));
        }
        binio::expect_eof(r)?;
        Ok(ArticleGraph::from_edges(edges, nodes))
    }
}

impl Default for ArticleGraph {
    fn default() -> Self {
        Self::new()
    }
}

/// Redirect source -> destination mapping, validated acyclic before use.
#[derive(Debug, Clone, Default)]
pub struct RedirectMap {
    mapping: BTreeMap<ArticleId, ArticleId>,
}

impl RedirectMap {
    pub fn new(mapping: BTreeMap<ArticleId, ArticleId>) -> Self {
        RedirectMap { mapping }
    }

    pub fn len(&self) -> usize {
        self.mapping.len()
    }

    pub fn is_empty(&self) -> bool {
        self.mapping.is_empty()
    }

    pub fn is_redirect(&self, id: ArticleId) -> bool {
        self.mapping.contains_key(&id)
    }

    /// Follows a redirect chain to its final destination.
    /// Errors with the offending cycle if one is found.
    pub fn resolve(&self, id: ArticleId) -> Result<ArticleId> {
        let mut seen = vec![id];
        let mut current = id;
        while let Some(&next) = self.mapping.get(&current) {
            if seen.contains(&next) {
                seen.push(next);
                return Err(Error::RedirectCycle(seen));
            }
            seen.push(next);
            current = next;
        }
        Ok(current)
    }

    /// Checks every chain terminates; returns one cycle if not.
    pub fn validate(&self) -> Result<()> {
        for &src in self.mapping.keys() {
            self.resolve(src)?;
        }
        Ok(())
    }
}

/// Degree and diameter statistics over the undirected view of the graph.
///
/// `edge_count` is the directed edge count as stored; mean and median degree
/// are computed on the undirected view, where each undirected edge
/// contributes one to the degree of both endpoints.
#[derive(Debug, Clone, PartialEq)]
pub struct GraphStats {
    pub vertex_count: usize,
    pub edge_count: usize,
    pub mean_degree: f64,
    pub median_degree: f64,
    pub pseudo_diameter: usize,
}

/// Per-user time-ordered edit events.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EditHistory {
    pub user_id: u64,
    /// (article, unix timestamp), sorted ascending by timestamp.
    pub events: Vec<(ArticleId, i64)>,
}

impl EditHistory {
    pub fn distinct_articles(&self) -> usize {
        let set: HashSet<ArticleId> = self.events.iter().map(|&(a, _)| a).collect();
        set.len()
    }

    /// Articles in order of first edit, duplicates collapsed.
    pub fn distinct_sequence(&self) -> Vec<ArticleId> {
        let mut seen = HashSet::new();
        let mut seq = Vec::new();
        for &(article, _) in &self.events {
            if seen.insert(article) {
                seq.push(article);
            }
        }
        seq
    }
}

fn split_fields(line: &str) -> Vec<&str> {
    line.split('\t').collect()
}

fn parse_id(field: &str, path: &Path, line_no: usize, what: &str) -> Result<ArticleId> {
    field
        .parse::<u64>()
        .map(ArticleId)
        .map_err(|_| Error::parse(path, line_no, format!("invalid {what} id: {field:?}")))
}

/// Loads a directed edge list from a TSV of `src<TAB>dst` pairs.
/// Duplicate edges and self-loops are dropped; an empty file yields an
/// empty graph.
pub fn load_edge_list(path: &Path) -> Result<ArticleGraph> {
    let reader = BufReader::new(File::open(path)?);
    let mut edges = Vec::new();
    for (idx, line) in reader.lines().enumerate() {
        let line = line?;
        let line_no = idx + 1;
        if line.is_empty() {
            continue;
        }
        let fields = split_fields(&line);
        if fields.len() != 2 {
            return Err(Error::parse(
                path,
                line_no,
                format!("expected 2 tab-separated fields, got {}", fields.len()),
            ));
        }
        let src = parse_id(fields[0], path, line_no, "source")?;
        let dst = parse_id(fields[1], path, line_no, "destination")?;
        edges.push((src, dst));
    }
    Ok(ArticleGraph::from_edges(edges, []))
}

/// Loads a redirect map from a TSV of `source<TAB>destination` pairs.
pub fn load_redirects(path: &Path) -> Result<RedirectMap> {
    let reader = BufReader::new(File::open(path)?);
    let mut mapping = BTreeMap::new();
    for (idx, line) in reader.lines().enumerate() {
        let line = line?;
        let line_no = idx + 1;
        if line.is_empty() {
            continue;
        }
        let fields = split_fields(&line);
        if fields.len() != 2 {
            return Err(Error::parse(
                path,
                line_no,
                format!("expected 2 tab-separated fields, got {}", fields.len()),
            ));
        }
        let src = parse_id(fields[0], path, line_no, "redirect source")?;
        let dst = parse_id(fields[1], path, line_no, "redirect destination")?;
        mapping.insert(src, dst);
    }
    Ok(RedirectMap::new(mapping))
}

/// Loads a set of article ids, one decimal id per line.
pub fn load_id_set(path: &Path) -> Result<BTreeSet<ArticleId>> {
    let reader = BufReader::new(File::open(path)?);
    let mut ids = BTreeSet::new();
    for (idx, line) in reader.lines().enumerate() {
        let line = line?;
        let line_no = idx + 1;
        if line.is_empty() {
            continue;
        }
        ids.insert(parse_id(line.trim(), path, line_no, "article")?);
    }
    Ok(ids)
}

/// Rewrites edges whose destination is a redirect source to the chain's
/// final destination, removes redirect-source nodes, and re-deduplicates.
pub fn resolve_redirects(graph: &ArticleGraph, redirects: &RedirectMap) -> Result<ArticleGraph> {
    redirects.validate()?;
    let mut edges = Vec::new();
    let mut kept_nodes = Vec::new();
    for node in graph.nodes() {
        if redirects.is_redirect(node) {
            continue;
        }
        kept_nodes.push(node);
        for &dst in graph.out_neighbors(node) {
            edges.push((node, redirects.resolve(dst)?));
        }
    }
    Ok(ArticleGraph::from_edges(edges, kept_nodes))
}

/// Removes the listed nodes and their incident edges. Ids absent from the
/// graph are ignored.
pub fn filter_category_nodes(
    graph: &ArticleGraph,
    category_ids: &BTreeSet<ArticleId>,
) -> ArticleGraph {
    let nodes: Vec<ArticleId> = graph
        .nodes()
        .filter(|id| !category_ids.contains(id))
        .collect();
    let edges: Vec<(ArticleId, ArticleId)> = graph
        .edges()
        .filter(|(src, dst)| !category_ids.contains(src) && !category_ids.contains(dst))
        .collect();
    ArticleGraph::from_edges(edges, nodes)
}

fn bfs_farthest(
    start: ArticleId,
    neighbors: &BTreeMap<ArticleId, Vec<ArticleId>>,
) -> (ArticleId, usize) {
    let mut dist: HashMap<ArticleId, usize> = HashMap::new();
    dist.insert(start, 0);
    let mut queue = VecDeque::new();
    queue.push_back(start);
    let mut farthest = (start, 0);
    while let Some(node) = queue.pop_front() {
        let d = dist[&node];
        // ties broken by ascending id: adjacency lists are sorted
        if d > farthest.1 {
            farthest = (node, d);
        }
        for &next in &neighbors[&node] {
            if !dist.contains_key(&next) {
                dist.insert(next, d + 1);
                queue.push_back(next);
            }
        }
    }
    farthest
}

/// Degree statistics on the undirected view, plus a double-sweep BFS
/// pseudo-diameter (a lower bound on the true diameter) started from the
/// highest-degree node.
pub fn graph_stats(graph: &ArticleGraph) -> GraphStats {
    let vertex_count = graph.node_count();
    let edge_count = graph.edge_count();
    if vertex_count == 0 {
        return GraphStats {
            vertex_count: 0,
            edge_count: 0,
            mean_degree: 0.0,
            median_degree: 0.0,
            pseudo_diameter: 0,
        };
    }
    let neighbors = graph.undirected_neighbors();
    let mut degrees: Vec<usize> = neighbors.values().map(Vec::len).collect();
    let degree_sum: usize = degrees.iter().sum();
    let mean_degree = degree_sum as f64 / vertex_count as f64;
    degrees.sort_unstable();
    let median_degree = if vertex_count % 2 == 1 {
        degrees[vertex_count / 2] as f64
    } else {
        (degrees[vertex_count / 2 - 1] + degrees[vertex_count / 2]) as f64 / 2.0
    };

    // double sweep: BFS from the highest-degree node, then from the farthest
    // node found; ties on degree broken by ascending id
    let start = neighbors
        .iter()
        .max_by(|a, b| a.1.len().cmp(&b.1.len()).then(b.0.cmp(a.0)))
        .map(|(&id, _)| id)
        .unwrap();
    let (turn, _) = bfs_farthest(start, &neighbors);
    let (_, pseudo_diameter) = bfs_farthest(turn, &neighbors);

    GraphStats {
        vertex_count,
        edge_count,
        mean_degree,
        median_degree,
        pseudo_diameter,
    }
}

/// Loads `user<TAB>article<TAB>timestamp` events, drops events before
/// `cutoff_timestamp`, drops users with fewer than `min_distinct_articles`
/// distinct articles, and sorts each user's events by timestamp.
/// Users are returned in ascending user-id order.
pub fn load_edit_history(
    path: &Path,
    min_distinct_articles: usize,
    cutoff_timestamp: i64,
) -> Result<Vec<EditHistory>> {
    let reader = BufReader::new(File::open(path)?);
    let mut per_user: BTreeMap<u64, Vec<(ArticleId, i64)>> = BTreeMap::new();
    for (idx, line) in reader.lines().enumerate() {
        let line = line?;
        let line_no = idx + 1;
        if line.is_empty() {
            continue;
        }
        let fields = split_fields(&line);
        if fields.len() != 3 {
            return Err(Error::parse(
                path,
                line_no,
                format!("expected 3 tab-separated fields, got {}", fields.len()),
            ));
        }
        let user: u64 = fields[0]
            .parse()
            .map_err(|_| Error::parse(path, line_no, format!("invalid user id: {:?}", fields[0])))?;
        let article = parse_id(fields[1], path, line_no, "article")?;
        let ts: i64 = fields[2].parse().map_err(|_| {
            Error::parse(path, line_no, format!("invalid timestamp: {:?}", fields[2]))
        })?;
        if ts < cutoff_timestamp {
            continue;
        }
        per_user.entry(user).or_default().push((article, ts));
    }

    let mut histories = Vec::new();
    for (user_id, mut events) in per_user {
        events.sort_by_key(|&(_, ts)| ts);
        let history = EditHistory { user_id, events };
        if history.distinct_articles() >= min_distinct_articles {
            histories.push(history);
        }
    }
    Ok(histories)
}

fn unescape_text(field: &str, path: &Path, line_no: usize) -> Result<String> {
    let mut out = String::with_capacity(field.len());
    let mut chars = field.chars();
    while let Some(c) = chars.next() {
        if c != '\\' {
            out.push(c);
            continue;
        }
        match chars.next() {
            Some('t') => out.push('\t'),
            Some('n') => out.push('\n'),
            Some('\\') => out.push('\\'),
            Some(other) => {
                return Err(Error::parse(
                    path,
                    line_no,
                    format!("unknown escape sequence \\{other}"),
                ))
            }
            None => {
                return Err(Error::parse(path, line_no, "dangling backslash at end of text"))
            }
        }
    }
    Ok(out)
}

/// Loads article texts from a TSV of `id<TAB>escaped_text` with `\t`, `\n`,
/// and `\\` escapes. Duplicate ids are an error. Rows come out in file order.
pub fn load_corpus(path: &Path) -> Result<Vec<(ArticleId, String)>> {
    let bytes = std::fs::read(path)?;
    let text = String::from_utf8(bytes)
        .map_err(|e| Error::Format(format!("{}: invalid UTF-8: {e}", path.display())))?;
    let mut seen = HashSet::new();
    let mut out = Vec::new();
    for (idx, line) in text.lines().enumerate() {
        let line_no = idx + 1;
        if line.is_empty() {
            continue;
        }
        let (id_field, text_field) = match line.split_once('\t') {
            Some(parts) => parts,
            None => {
                return Err(Error::parse(
                    path,
                    line_no,
                    "expected `id<TAB>text`, no tab found",
                ))
            }
        };
        let id = parse_id(id_field, path, line_no, "article")?;
        if !seen.insert(id) {
            return Err(Error::parse(
                path,
                line_no,
                format!("duplicate article id {id}"),
            ));
        }
        out.push((id, unescape_text(text_field, path, line_no)?));
    }
    Ok(out)
}
