//! Finite graphs describing coupled-resonator arrays.
//!
//! A [`Graph`] is a simple, undirected, connected graph stored as a dense
//! adjacency matrix. Graph sizes here never exceed a handful of nodes, so the
//! dense layout keeps lookups trivial and relabeling cheap.
//!
//! The module also enumerates every connected graph on `L <= 6` nodes up to
//! isomorphism, computes the cut-based connectivity of node partitions, and
//! reads/writes the plain-text graph file format:
//!
//! ```text
//! # comment
//! L=4
//! 0 1
//! 1 2
//! partition left: 0,1
//! ```

use std::collections::{BTreeSet, VecDeque};
use std::fmt;

use num_rational::Ratio;
use thiserror::Error;

/// Largest node count accepted by [`enumerate_connected_graphs`].
pub const MAX_CATALOG_SITES: usize = 6;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum GraphError {
    #[error("node index {index} out of range for a graph with {sites} nodes")]
    IndexOutOfRange { index: usize, sites: usize },
    #[error("self-loop on node {0}")]
    SelfLoop(usize),
    #[error("graph is disconnected ({reached} of {sites} nodes reachable from node 0)")]
    Disconnected { reached: usize, sites: usize },
    #[error("graph must have at least one node")]
    Empty,
    #[error("catalog enumeration supports 2..={max} nodes, got {sites}")]
    LTooLarge { sites: usize, max: usize },
    #[error("partition `{0}` is empty")]
    EmptyPartition(String),
    #[error("graph file line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("reference array check failed: {0}")]
    Reference(String),
}

/// Simple undirected connected graph.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Graph {
    sites: usize,
    adjacency: Vec<bool>,
    labels: Option<Vec<String>>,
}

impl Graph {
    pub fn sites(&self) -> usize {
        self.sites
    }

    pub fn is_adjacent(&self, i: usize, j: usize) -> bool {
        self.adjacency[i * self.sites + j]
    }

    /// Adjacency matrix as 0/1 rows.
    pub fn adjacency_matrix(&self) -> Vec<Vec<u8>> {
        (0..self.sites)
            .map(|i| (0..self.sites).map(|j| self.is_adjacent(i, j) as u8).collect())
            .collect()
    }

    /// Edges as `(i, j)` pairs with `i < j`, in row-major order.
    pub fn edges(&self) -> Vec<(usize, usize)> {
        let mut out = Vec::new();
        for i in 0..self.sites {
            for j in (i + 1)..self.sites {
                if self.is_adjacent(i, j) {
                    out.push((i, j));
                }
            }
        }
        out
    }

    pub fn edge_count(&self) -> usize {
        self.adjacency.iter().filter(|&&a| a).count() / 2
    }

    /// Per-site connectivity `k_i = sum_j A_ij`.
    pub fn connectivity(&self) -> Vec<usize> {
        (0..self.sites)
            .map(|i| (0..self.sites).filter(|&j| self.is_adjacent(i, j)).count())
            .collect()
    }

    pub fn mean_connectivity(&self) -> f64 {
        2.0 * self.edge_count() as f64 / self.sites as f64
    }

    pub fn neighbors(&self, i: usize) -> impl Iterator<Item = usize> + '_ {
        (0..self.sites).filter(move |&j| self.is_adjacent(i, j))
    }

    pub fn labels(&self) -> Option<&[String]> {
        self.labels.as_deref()
    }

    pub fn with_labels(mut self, labels: Vec<String>) -> Self {
        assert_eq!(labels.len(), self.sites, "one label per node");
        self.labels = Some(labels);
        self
    }

    /// Graph with node `i` renamed to `perm[i]`.
    pub fn relabel(&self, perm: &[usize]) -> Graph {
        assert_eq!(perm.len(), self.sites);
        let n = self.sites;
        let mut adjacency = vec![false; n * n];
        for (i, j) in self.edges() {
            adjacency[perm[i] * n + perm[j]] = true;
            adjacency[perm[j] * n + perm[i]] = true;
        }
        let labels = self.labels.as_ref().map(|old| {
            let mut new = old.clone();
            for (i, &p) in perm.iter().enumerate() {
                new[p] = old[i].clone();
            }
            new
        });
        Graph {
            sites: n,
            adjacency,
            labels,
        }
    }

    fn reachable_from_zero(&self) -> usize {
        let mut seen = vec![false; self.sites];
        let mut queue = VecDeque::from([0]);
        seen[0] = true;
        let mut count = 1;
        while let Some(i) = queue.pop_front() {
            for j in self.neighbors(i) {
                if !seen[j] {
                    seen[j] = true;
                    count += 1;
                    queue.push_back(j);
                }
            }
        }
        count
    }

    /// Bit code of the upper triangle, pair `(0,1)` most significant.
    fn code_under(&self, perm: &[usize]) -> u64 {
        let n = self.sites;
        let mut relabeled = vec![false; n * n];
        for (i, j) in self.edges() {
            relabeled[perm[i] * n + perm[j]] = true;
            relabeled[perm[j] * n + perm[i]] = true;
        }
        let mut code = 0u64;
        for a in 0..n {
            for b in (a + 1)..n {
                code = (code << 1) | relabeled[a * n + b] as u64;
            }
        }
        code
    }

    /// Isomorphism-invariant code: the largest adjacency code over all
    /// relabelings, together with the relabeling that attains it.
    pub fn canonical_form(&self) -> (u64, Vec<usize>) {
        let mut best = (0u64, (0..self.sites).collect::<Vec<_>>());
        let mut first = true;
        for perm in permutations(self.sites) {
            let code = self.code_under(&perm);
            if first || code > best.0 {
                best = (code, perm);
                first = false;
            }
        }
        best
    }

    pub fn is_isomorphic(&self, other: &Graph) -> bool {
        self.sites == other.sites
            && self.edge_count() == other.edge_count()
            && self.canonical_form().0 == other.canonical_form().0
    }
}

impl fmt::Display for Graph {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let edges: Vec<String> = self.edges().iter().map(|(i, j)| format!("{i}-{j}")).collect();
        write!(f, "L={} [{}]", self.sites, edges.join(" "))
    }
}

/// Build a connected graph from an edge list. Duplicate edges (in either
/// orientation) are ignored.
pub fn build_graph(edges: &[(usize, usize)], sites: usize) -> Result<Graph, GraphError> {
    if sites == 0 {
        return Err(GraphError::Empty);
    }
    let mut adjacency = vec![false; sites * sites];
    for &(i, j) in edges {
        for index in [i, j] {
            if index >= sites {
                return Err(GraphError::IndexOutOfRange { index, sites });
            }
        }
        if i == j {
            return Err(GraphError::SelfLoop(i));
        }
        adjacency[i * sites + j] = true;
        adjacency[j * sites + i] = true;
    }
    let graph = Graph {
        sites,
        adjacency,
        labels: None,
    };
    let reached = graph.reachable_from_zero();
    if reached != sites {
        return Err(GraphError::Disconnected { reached, sites });
    }
    Ok(graph)
}

/// All permutations of `0..n` in lexicographic order.
pub fn permutations(n: usize) -> Vec<Vec<usize>> {
    fn extend(prefix: &mut Vec<usize>, used: &mut [bool], out: &mut Vec<Vec<usize>>) {
        if prefix.len() == used.len() {
            out.push(prefix.clone());
            return;
        }
        for k in 0..used.len() {
            if !used[k] {
                used[k] = true;
                prefix.push(k);
                extend(prefix, used, out);
                prefix.pop();
                used[k] = false;
            }
        }
    }
    let mut out = Vec::new();
    extend(&mut Vec::with_capacity(n), &mut vec![false; n], &mut out);
    out
}

/// One isomorphism class in a graph catalog.
#[derive(Debug, Clone, PartialEq)]
pub struct GraphCatalogEntry {
    /// Stable identifier, `n<L>-<position>`.
    pub id: String,
    pub graph: Graph,
    /// `k_i` in node order of `graph`.
    pub connectivity: Vec<usize>,
    pub edge_count: usize,
    pub canonical_code: u64,
}

impl GraphCatalogEntry {
    /// Connectivity list sorted ascending, e.g. `[1, 1, 1, 3]` for the star.
    pub fn descriptor(&self) -> Vec<usize> {
        let mut d = self.connectivity.clone();
        d.sort_unstable();
        d
    }

    pub fn descriptor_string(&self) -> String {
        self.descriptor()
            .iter()
            .map(|k| k.to_string())
            .collect::<Vec<_>>()
            .join("-")
    }
}

/// One representative per isomorphism class of connected simple graphs on
/// `sites` nodes, ordered by edge count, then ascending sorted degree
/// sequence, then canonical code. Each representative is stored in its
/// canonical labeling.
pub fn enumerate_connected_graphs(sites: usize) -> Result<Vec<GraphCatalogEntry>, GraphError> {
    if !(2..=MAX_CATALOG_SITES).contains(&sites) {
        return Err(GraphError::LTooLarge {
            sites,
            max: MAX_CATALOG_SITES,
        });
    }
    let pairs: Vec<(usize, usize)> = (0..sites).flat_map(|i| ((i + 1)..sites).map(move |j| (i, j))).collect();
    let perms = permutations(sites);
    let mut classes: BTreeSet<(usize, Vec<usize>, u64)> = BTreeSet::new();
    for mask in 0u64..(1 << pairs.len()) {
        if (mask.count_ones() as usize) < sites - 1 {
            continue;
        }
        let edges: Vec<(usize, usize)> = pairs
            .iter()
            .enumerate()
            .filter(|(b, _)| mask >> b & 1 == 1)
            .map(|(_, &p)| p)
            .collect();
        let Ok(graph) = build_graph(&edges, sites) else {
            continue;
        };
        let code = perms
            .iter()
            .map(|p| graph.code_under(p))
            .max()
            .expect("at least one permutation");
        let mut degrees = graph.connectivity();
        degrees.sort_unstable();
        classes.insert((graph.edge_count(), degrees, code));
    }
    let entries = classes
        .into_iter()
        .enumerate()
        .map(|(position, (edge_count, _, code))| {
            let graph = graph_from_code(code, sites);
            GraphCatalogEntry {
                id: format!("n{sites}-{position:02}"),
                connectivity: graph.connectivity(),
                edge_count,
                canonical_code: code,
                graph,
            }
        })
        .collect();
    Ok(entries)
}

fn graph_from_code(code: u64, sites: usize) -> Graph {
    let total = sites * (sites - 1) / 2;
    let mut edges = Vec::new();
    let mut k = 0;
    for a in 0..sites {
        for b in (a + 1)..sites {
            if code >> (total - 1 - k) & 1 == 1 {
                edges.push((a, b));
            }
            k += 1;
        }
    }
    build_graph(&edges, sites).expect("canonical codes come from connected graphs")
}

/// Named subset of graph nodes.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Partition {
    pub name: String,
    members: Vec<usize>,
}

impl Partition {
    /// Members are sorted and deduplicated.
    pub fn new(name: impl Into<String>, members: &[usize], sites: usize) -> Result<Self, GraphError> {
        let name = name.into();
        if members.is_empty() {
            return Err(GraphError::EmptyPartition(name));
        }
        if let Some(&index) = members.iter().find(|&&m| m >= sites) {
            return Err(GraphError::IndexOutOfRange { index, sites });
        }
        let members: BTreeSet<usize> = members.iter().copied().collect();
        Ok(Partition {
            name,
            members: members.into_iter().collect(),
        })
    }

    pub fn members(&self) -> &[usize] {
        &self.members
    }

    pub fn contains(&self, i: usize) -> bool {
        self.members.binary_search(&i).is_ok()
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    /// Nodes of a `sites`-node graph outside this partition.
    pub fn complement(&self, sites: usize) -> Result<Partition, GraphError> {
        let rest: Vec<usize> = (0..sites).filter(|&i| !self.contains(i)).collect();
        Partition::new(format!("{}^c", self.name), &rest, sites)
    }
}

/// Number of edges with exactly one endpoint in `p`.
pub fn cut_size(graph: &Graph, p: &Partition) -> usize {
    graph
        .edges()
        .iter()
        .filter(|(i, j)| p.contains(*i) != p.contains(*j))
        .count()
}

/// External links of the partition divided by its size, as an exact ratio.
pub fn partition_connectivity(graph: &Graph, p: &Partition) -> Result<Ratio<usize>, GraphError> {
    if p.is_empty() {
        return Err(GraphError::EmptyPartition(p.name.clone()));
    }
    if let Some(&index) = p.members().iter().find(|&&m| m >= graph.sites()) {
        return Err(GraphError::IndexOutOfRange {
            index,
            sites: graph.sites(),
        });
    }
    Ok(Ratio::new(cut_size(graph, p), p.len()))
}

/// Contents of a graph file.
#[derive(Debug, Clone, PartialEq)]
pub struct GraphFile {
    pub graph: Graph,
    pub partitions: Vec<Partition>,
}

impl GraphFile {
    pub fn partition(&self, name: &str) -> Option<&Partition> {
        self.partitions.iter().find(|p| p.name == name)
    }
}

pub fn parse_graph_file(text: &str) -> Result<GraphFile, GraphError> {
    let err = |line: usize, message: String| GraphError::Parse { line, message };
    let mut sites: Option<usize> = None;
    let mut edges = Vec::new();
    let mut raw_partitions: Vec<(usize, String, Vec<usize>)> = Vec::new();
    for (n, raw) in text.lines().enumerate() {
        let line_no = n + 1;
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        if let Some(value) = line.strip_prefix("L=") {
            if sites.is_some() {
                return Err(err(line_no, "duplicate L= line".into()));
            }
            let l = value
                .trim()
                .parse()
                .map_err(|e| err(line_no, format!("bad node count: {e}")))?;
            sites = Some(l);
            continue;
        }
        if sites.is_none() {
            return Err(err(line_no, "first entry must be L=<int>".into()));
        }
        if let Some(rest) = line.strip_prefix("partition ") {
            let (name, list) = rest
                .split_once(':')
                .ok_or_else(|| err(line_no, "expected `partition <name>: i,j,...`".into()))?;
            let members = list
                .split(',')
                .map(|s| s.trim().parse::<usize>())
                .collect::<Result<Vec<_>, _>>()
                .map_err(|e| err(line_no, format!("bad partition member: {e}")))?;
            raw_partitions.push((line_no, name.trim().to_string(), members));
            continue;
        }
        let fields: Vec<&str> = line.split_whitespace().collect();
        if fields.len() != 2 {
            return Err(err(line_no, format!("expected `i j`, got `{line}`")));
        }
        let parse = |s: &str| {
            s.parse::<usize>()
                .map_err(|e| err(line_no, format!("bad node index `{s}`: {e}")))
        };
        edges.push((parse(fields[0])?, parse(fields[1])?));
    }
    let sites = sites.ok_or_else(|| err(0, "missing L=<int> line".into()))?;
    let graph = build_graph(&edges, sites)?;
    let partitions = raw_partitions
        .into_iter()
        .map(|(line, name, members)| Partition::new(name, &members, sites).map_err(|e| err(line, e.to_string())))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(GraphFile { graph, partitions })
}

pub fn format_graph_file(file: &GraphFile) -> String {
    let mut out = format!("L={}\n", file.graph.sites());
    for (i, j) in file.graph.edges() {
        out.push_str(&format!("{i} {j}\n"));
    }
    for p in &file.partitions {
        let members: Vec<String> = p.members().iter().map(|m| m.to_string()).collect();
        out.push_str(&format!("partition {}: {}\n", p.name, members.join(",")));
    }
    out
}

/// Small graphs referred to by name in configs and on the command line.
pub fn named_graph(name: &str) -> Option<Graph> {
    let (edges, sites): (&[(usize, usize)], usize) = match name {
        "dimer" => (&[(0, 1)], 2),
        "chain3" => (&[(0, 1), (1, 2)], 3),
        "triangle" => (&[(0, 1), (1, 2), (0, 2)], 3),
        "path4" => (&[(0, 1), (1, 2), (2, 3)], 4),
        "star4" => (&[(0, 3), (1, 3), (2, 3)], 4),
        "cycle4" => (&[(0, 1), (1, 2), (2, 3), (0, 3)], 4),
        "complete4" => (&[(0, 1), (0, 2), (0, 3), (1, 2), (1, 3), (2, 3)], 4),
        "table1" => return Some(table1_array().graph),
        _ => return None,
    };
    build_graph(edges, sites).ok()
}

pub const NAMED_GRAPHS: [&str; 8] = [
    "dimer",
    "chain3",
    "triangle",
    "path4",
    "star4",
    "cycle4",
    "complete4",
    "table1",
];

/// Text of the partitioned reference array used by the bipartite study.
///
/// Node 0 is a hub carrying two leaves (2, 3) and the chain 0-1-4. The five
/// partitions have cut sizes 3, 2, 2, 2, 1 over sizes 2, 2, 2, 3, 3; M2 and
/// M3 are exchanged by the automorphism swapping nodes 2 and 3.
pub const TABLE1_GRAPH_FILE: &str = "\
# Partitioned five-resonator reference array.
L=5
0 1
0 2
0 3
1 4
partition M1: 0,1
partition M2: 2,4
partition M3: 3,4
partition M4: 0,1,4
partition M5: 0,2,3
";

/// Expected partition connectivities of the reference array, M1..M5.
pub const TABLE1_CONNECTIVITY: [(usize, usize); 5] = [(3, 2), (2, 2), (2, 2), (2, 3), (1, 3)];

pub fn table1_array() -> GraphFile {
    parse_graph_file(TABLE1_GRAPH_FILE).expect("built-in reference array parses")
}

/// Check that `file` carries partitions M1..M5 whose connectivities match the
/// reference table exactly.
pub fn validate_table1(file: &GraphFile) -> Result<(), GraphError> {
    for (k, &(cut, size)) in TABLE1_CONNECTIVITY.iter().enumerate() {
        let name = format!("M{}", k + 1);
        let p = file
            .partition(&name)
            .ok_or_else(|| GraphError::Reference(format!("missing partition {name}")))?;
        if p.len() != size {
            return Err(GraphError::Reference(format!(
                "{name} has {} nodes, expected {size}",
                p.len()
            )));
        }
        let got = partition_connectivity(&file.graph, p)?;
        if got != Ratio::new(cut, size) {
            return Err(GraphError::Reference(format!(
                "{name} connectivity {got}, expected {cut}/{size}"
            )));
        }
    }
    Ok(())
}
