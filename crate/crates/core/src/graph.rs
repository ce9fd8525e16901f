//! Immutable undirected simple graph with edge-list ingestion.
//!
//! Nodes are stored under dense internal ids `0..N` with a compressed
//! adjacency layout. The external ids found in the input are kept in a
//! sorted remap table so every output can be written back in the caller's
//! id space.

use std::io::{BufRead, Write};

use crate::error::{Error, Result};

/// Options controlling how an edge list is parsed.
#[derive(Debug, Clone)]
pub struct LoadOptions {
    /// Token separator. `None` splits on any run of whitespace.
    pub delimiter: Option<char>,
    /// Lines starting with this prefix are skipped.
    pub comment_prefix: String,
    /// Ids in the file start at 1. Only meaningful together with `node_count`.
    pub one_based: bool,
    /// Declared node count. When set, ids are taken as-is (minus the base)
    /// and nodes that never appear in an edge are kept as isolated nodes.
    pub node_count: Option<usize>,
}

impl Default for LoadOptions {
    fn default() -> Self {
        Self {
            delimiter: None,
            comment_prefix: "#".to_string(),
            one_based: false,
            node_count: None,
        }
    }
}

/// Counters collected while loading an edge list.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct LoadStats {
    pub edge_lines: usize,
    pub duplicates_dropped: usize,
    pub self_loops_dropped: usize,
}

/// Undirected, unweighted simple graph.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Graph {
    offsets: Vec<usize>,
    targets: Vec<usize>,
    external: Vec<u64>,
    edge_count: usize,
}

impl Graph {
    /// Builds a graph on `node_count` nodes whose external ids equal the
    /// internal ones. Self-loops and repeated edges are dropped.
    pub fn from_edges(node_count: usize, edges: &[(usize, usize)]) -> Result<Self> {
        for &(u, v) in edges {
            for id in [u, v] {
                if id >= node_count {
                    return Err(Error::NodeOutOfRange { id, node_count });
                }
            }
        }
        let external = (0..node_count as u64).collect();
        let (graph, _) = Self::assemble(external, edges.iter().copied());
        Ok(graph)
    }

    /// Reads a whitespace- or delimiter-separated edge list.
    ///
    /// Without a declared node count, the node set is the union of the
    /// endpoints of the retained edges and internal ids follow ascending
    /// external id order.
    pub fn load_edge_list<R: BufRead>(reader: R, opts: &LoadOptions) -> Result<(Self, LoadStats)> {
        let mut raw: Vec<(u64, u64)> = Vec::new();
        let mut self_loops = 0;
        for (idx, line) in reader.lines().enumerate() {
            let line = line?;
            let lineno = idx + 1;
            let trimmed = line.trim();
            if trimmed.is_empty()
                || (!opts.comment_prefix.is_empty() && trimmed.starts_with(&opts.comment_prefix))
            {
                continue;
            }
            let tokens: Vec<&str> = match opts.delimiter {
                Some(d) => trimmed.split(d).map(str::trim).collect(),
                None => trimmed.split_whitespace().collect(),
            };
            if tokens.len() != 2 {
                return Err(Error::Parse {
                    line: lineno,
                    message: format!("expected 2 node ids, found {} tokens", tokens.len()),
                });
            }
            let parse = |tok: &str| {
                tok.parse::<u64>().map_err(|_| Error::Parse {
                    line: lineno,
                    message: format!("invalid node id {tok:?}"),
                })
            };
            let (u, v) = (parse(tokens[0])?, parse(tokens[1])?);
            if u == v {
                self_loops += 1;
                continue;
            }
            raw.push((u, v));
        }

        let (external, edges): (Vec<u64>, Vec<(usize, usize)>) = match opts.node_count {
            Some(n) => {
                let base = u64::from(opts.one_based);
                let to_internal = |id: u64| -> Result<usize> {
                    if id < base || id - base >= n as u64 {
                        return Err(Error::NodeOutOfRange {
                            id: id as usize,
                            node_count: n,
                        });
                    }
                    Ok((id - base) as usize)
                };
                let edges = raw
                    .iter()
                    .map(|&(u, v)| Ok((to_internal(u)?, to_internal(v)?)))
                    .collect::<Result<Vec<_>>>()?;
                ((base..base + n as u64).collect(), edges)
            }
            None => {
                let mut ids: Vec<u64> = raw.iter().flat_map(|&(u, v)| [u, v]).collect();
                ids.sort_unstable();
                ids.dedup();
                let lookup = |id: u64| ids.binary_search(&id).expect("id collected above");
                let edges = raw.iter().map(|&(u, v)| (lookup(u), lookup(v))).collect();
                (ids, edges)
            }
        };
        if external.is_empty() {
            return Err(Error::EmptyGraph);
        }

        let (graph, duplicates) = Self::assemble(external, edges.into_iter());
        let stats = LoadStats {
            edge_lines: raw.len() + self_loops,
            duplicates_dropped: duplicates,
            self_loops_dropped: self_loops,
        };
        if stats.duplicates_dropped > 0 || stats.self_loops_dropped > 0 {
            log::warn!(
                "dropped {} duplicate edges and {} self-loops",
                stats.duplicates_dropped,
                stats.self_loops_dropped
            );
        }
        Ok((graph, stats))
    }

    fn assemble(external: Vec<u64>, edges: impl Iterator<Item = (usize, usize)>) -> (Self, usize) {
        let n = external.len();
        let mut pairs: Vec<(usize, usize)> = edges
            .filter(|(u, v)| u != v)
            .map(|(u, v)| (u.min(v), u.max(v)))
            .collect();
        let before = pairs.len();
        pairs.sort_unstable();
        pairs.dedup();
        let duplicates = before - pairs.len();

        let mut degree = vec![0usize; n];
        for &(u, v) in &pairs {
            degree[u] += 1;
            degree[v] += 1;
        }
        let mut offsets = Vec::with_capacity(n + 1);
        offsets.push(0);
        for d in &degree {
            offsets.push(offsets.last().unwrap() + d);
        }
        let mut cursor = offsets[..n].to_vec();
        let mut targets = vec![0usize; 2 * pairs.len()];
        for &(u, v) in &pairs {
            targets[cursor[u]] = v;
            cursor[u] += 1;
            targets[cursor[v]] = u;
            cursor[v] += 1;
        }
        for v in 0..n {
            targets[offsets[v]..offsets[v + 1]].sort_unstable();
        }
        let graph = Self {
            offsets,
            targets,
            external,
            edge_count: pairs.len(),
        };
        (graph, duplicates)
    }

    pub fn node_count(&self) -> usize {
        self.external.len()
    }

    pub fn edge_count(&self) -> usize {
        self.edge_count
    }

    /// Degree of `v`, or an error when `v` is not a node.
    pub fn degree(&self, v: usize) -> Result<usize> {
        if v >= self.node_count() {
            return Err(Error::NodeOutOfRange {
                id: v,
                node_count: self.node_count(),
            });
        }
        Ok(self.deg(v))
    }

    /// Unchecked degree; panics when `v` is out of range.
    #[inline]
    pub fn deg(&self, v: usize) -> usize {
        self.offsets[v + 1] - self.offsets[v]
    }

    /// Sorted neighbor list of `v`. Panics when `v` is out of range.
    #[inline]
    pub fn neighbors(&self, v: usize) -> &[usize] {
        &self.targets[self.offsets[v]..self.offsets[v + 1]]
    }

    pub fn has_edge(&self, u: usize, v: usize) -> bool {
        self.neighbors(u).binary_search(&v).is_ok()
    }

    pub fn max_degree(&self) -> usize {
        (0..self.node_count()).map(|v| self.deg(v)).max().unwrap_or(0)
    }

    /// Every edge once, as `(u, v)` with `u < v`.
    pub fn edges(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        (0..self.node_count()).flat_map(move |u| {
            self.neighbors(u)
                .iter()
                .filter(move |&&v| v > u)
                .map(move |&v| (u, v))
        })
    }

    pub fn external_id(&self, v: usize) -> u64 {
        self.external[v]
    }

    pub fn external_ids(&self) -> &[u64] {
        &self.external
    }

    pub fn internal_id(&self, external: u64) -> Option<usize> {
        self.external.binary_search(&external).ok()
    }

    /// Writes the edges in external ids, one `u v` pair per line.
    pub fn write_edge_list<W: Write>(&self, mut out: W) -> Result<()> {
        for (u, v) in self.edges() {
            writeln!(out, "{} {}", self.external[u], self.external[v])?;
        }
        Ok(())
    }

    /// Writes the `external_id,internal_id` remap table.
    pub fn write_remap_csv<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "external_id,internal_id")?;
        for (internal, external) in self.external.iter().enumerate() {
            writeln!(out, "{external},{internal}")?;
        }
        Ok(())
    }
}
