//! Partition quality measures.
//!
//! All functions take a per-node community assignment (`labels[v]`). Label
//! values are arbitrary; they are compacted internally.

use std::collections::HashMap;
use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::Graph;
use crate::propagation::Labeling;

/// Maps labels to `0..C` by first occurrence.
pub fn compact_labels(labels: &[usize]) -> (Vec<usize>, usize) {
    let mut map = HashMap::new();
    let dense = labels
        .iter()
        .map(|&l| {
            let next = map.len();
            *map.entry(l).or_insert(next)
        })
        .collect();
    (dense, map.len())
}

fn check_cover(graph: &Graph, labels: &[usize]) -> Result<()> {
    if labels.len() != graph.node_count() {
        return Err(Error::PartitionSize {
            expected: graph.node_count(),
            got: labels.len(),
        });
    }
    Ok(())
}

/// Newman modularity `Q = sum_c [m_c / M - (d_c / 2M)^2]`.
pub fn modularity(graph: &Graph, labels: &[usize]) -> Result<f64> {
    check_cover(graph, labels)?;
    let m = graph.edge_count();
    if m == 0 {
        return Err(Error::EmptyGraph);
    }
    let (comm, c) = compact_labels(labels);
    let mut internal = vec![0usize; c];
    let mut degree = vec![0usize; c];
    for (u, v) in graph.edges() {
        if comm[u] == comm[v] {
            internal[comm[u]] += 1;
        }
    }
    for (v, &cv) in comm.iter().enumerate() {
        degree[cv] += graph.deg(v);
    }
    let m = m as f64;
    Ok(internal
        .iter()
        .zip(&degree)
        .map(|(&mi, &di)| {
            let share = di as f64 / (2.0 * m);
            mi as f64 / m - share * share
        })
        .sum())
}

fn entropy(counts: &[usize], n: f64) -> f64 {
    let mut terms: Vec<f64> = counts
        .iter()
        .filter(|&&c| c > 0)
        .map(|&c| {
            let p = c as f64 / n;
            -p * p.ln()
        })
        .collect();
    terms.sort_by(f64::total_cmp);
    terms.iter().sum()
}

/// Normalized mutual information `2 I(A;B) / (H(A) + H(B))`, natural logs.
///
/// Two all-in-one partitions score 1; when exactly one side has zero
/// entropy the score is 0.
pub fn nmi(a: &[usize], b: &[usize]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::PartitionSize {
            expected: a.len(),
            got: b.len(),
        });
    }
    if a.is_empty() {
        return Err(Error::EmptyGraph);
    }
    let n = a.len() as f64;
    let (da, ca) = compact_labels(a);
    let (db, cb) = compact_labels(b);
    if da == db {
        return Ok(1.0);
    }
    let mut count_a = vec![0usize; ca];
    let mut count_b = vec![0usize; cb];
    let mut joint: HashMap<(usize, usize), usize> = HashMap::new();
    for (&x, &y) in da.iter().zip(&db) {
        count_a[x] += 1;
        count_b[y] += 1;
        *joint.entry((x, y)).or_insert(0) += 1;
    }
    let ha = entropy(&count_a, n);
    let hb = entropy(&count_b, n);
    if ha == 0.0 && hb == 0.0 {
        return Ok(1.0);
    }
    if ha == 0.0 || hb == 0.0 {
        return Ok(0.0);
    }
    // Terms are summed in value order so the result does not depend on
    // argument order or label naming.
    let mut terms: Vec<f64> = joint
        .into_iter()
        .map(|((x, y), nxy)| {
            let pxy = nxy as f64 / n;
            pxy * (nxy as f64 * n / (count_a[x] as f64 * count_b[y] as f64)).ln()
        })
        .collect();
    terms.sort_by(f64::total_cmp);
    let mutual: f64 = terms.iter().sum();
    Ok((2.0 * mutual / (ha + hb)).clamp(0.0, 1.0))
}

/// Links from `v` into its own community and the largest link count into
/// any single other community.
fn inside_and_best_outside(graph: &Graph, comm: &[usize], v: usize, buf: &mut Vec<usize>) -> (usize, usize) {
    buf.clear();
    buf.extend(graph.neighbors(v).iter().map(|&u| comm[u]));
    buf.sort_unstable();
    let own = comm[v];
    let mut inside = 0;
    let mut outside = 0;
    for chunk in buf.chunk_by(|x, y| x == y) {
        if chunk[0] == own {
            inside = chunk.len();
        } else {
            outside = outside.max(chunk.len());
        }
    }
    (inside, outside)
}

/// Nodes with strictly more neighbors in some other community than in
/// their own.
pub fn dissatisfied_count(graph: &Graph, labels: &[usize]) -> Result<usize> {
    check_cover(graph, labels)?;
    let mut buf = Vec::new();
    Ok((0..graph.node_count())
        .filter(|&v| {
            let (inside, outside) = inside_and_best_outside(graph, labels, v, &mut buf);
            outside > inside
        })
        .count())
}

/// Strong and weak community flags, indexed by community in order of first
/// occurrence.
///
/// Strong: every member has more links inside than outside. Weak: the
/// community's summed inside degree exceeds its summed outside degree.
pub fn strong_weak_flags(graph: &Graph, labels: &[usize]) -> Result<(Vec<bool>, Vec<bool>)> {
    check_cover(graph, labels)?;
    let (comm, c) = compact_labels(labels);
    let mut strong = vec![true; c];
    let mut d_in = vec![0usize; c];
    let mut d_out = vec![0usize; c];
    for v in 0..graph.node_count() {
        let cv = comm[v];
        let inside = graph.neighbors(v).iter().filter(|&&u| comm[u] == cv).count();
        let outside = graph.deg(v) - inside;
        if inside <= outside {
            strong[cv] = false;
        }
        d_in[cv] += inside;
        d_out[cv] += outside;
    }
    let weak = d_in.iter().zip(&d_out).map(|(i, o)| i > o).collect();
    Ok((strong, weak))
}

/// The LPA objective `H = sum_ij sum_k M_ik M_jk A_ij`, i.e. twice the
/// number of intra-community edges.
pub fn lpa_objective(graph: &Graph, labels: &[usize]) -> Result<u64> {
    check_cover(graph, labels)?;
    let intra = graph.edges().filter(|&(u, v)| labels[u] == labels[v]).count();
    Ok(2 * intra as u64)
}

/// Global and per-community summary of a partition.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CommunityReport {
    pub community_count: usize,
    pub sizes: Vec<usize>,
    pub modularity: f64,
    pub dissatisfied_count: usize,
    pub strong_flags: Vec<bool>,
    pub weak_flags: Vec<bool>,
    pub objective_h: u64,
}

impl CommunityReport {
    /// Communities are indexed in order of first occurrence.
    pub fn compute(graph: &Graph, labels: &[usize]) -> Result<Self> {
        let (comm, c) = compact_labels(labels);
        let mut sizes = vec![0; c];
        for &l in &comm {
            sizes[l] += 1;
        }
        let (strong_flags, weak_flags) = strong_weak_flags(graph, &comm)?;
        Ok(Self {
            community_count: c,
            sizes,
            modularity: modularity(graph, &comm)?,
            dissatisfied_count: dissatisfied_count(graph, &comm)?,
            strong_flags,
            weak_flags,
            objective_h: lpa_objective(graph, &comm)?,
        })
    }
}

/// A ground-truth partition read from a community file.
#[derive(Debug, Clone)]
pub struct GroundTruth {
    pub labeling: Labeling,
    /// Nodes listed in more than one community; the first listing wins.
    pub multi_assigned: usize,
    /// Graph nodes absent from the file; each becomes its own community.
    pub unassigned: usize,
    /// Ids in the file that are not nodes of the graph; ignored.
    pub unknown_ids: usize,
}

/// Reads a community file: one community per line, whitespace-separated
/// external node ids.
pub fn load_ground_truth<R: BufRead>(reader: R, graph: &Graph) -> Result<GroundTruth> {
    let n = graph.node_count();
    let mut assigned: Vec<Option<usize>> = vec![None; n];
    let mut multi = 0;
    let mut unknown = 0;
    let mut community = 0;
    for (idx, line) in reader.lines().enumerate() {
        let line = line?;
        let trimmed = line.trim();
        if trimmed.is_empty() || trimmed.starts_with('#') {
            continue;
        }
        for tok in trimmed.split_whitespace() {
            let ext: u64 = tok.parse().map_err(|_| Error::Parse {
                line: idx + 1,
                message: format!("invalid node id {tok:?}"),
            })?;
            match graph.internal_id(ext) {
                None => unknown += 1,
                Some(v) => match assigned[v] {
                    Some(c) if c != community => multi += 1,
                    Some(_) => {}
                    None => assigned[v] = Some(community),
                },
            }
        }
        community += 1;
    }
    let mut unassigned = 0;
    let labels = assigned
        .into_iter()
        .map(|a| {
            a.unwrap_or_else(|| {
                unassigned += 1;
                community += 1;
                community - 1
            })
        })
        .collect();
    if multi > 0 || unassigned > 0 || unknown > 0 {
        log::warn!(
            "ground truth: {multi} multi-assigned, {unassigned} unassigned, {unknown} unknown ids"
        );
    }
    Ok(GroundTruth {
        labeling: Labeling::from_labels(labels).to_dense(),
        multi_assigned: multi,
        unassigned,
        unknown_ids: unknown,
    })
}

/// Writes a partition as a community file in external ids.
pub fn write_ground_truth<W: Write>(graph: &Graph, labels: &[usize], mut out: W) -> Result<()> {
    let (comm, c) = compact_labels(labels);
    let mut members: Vec<Vec<u64>> = vec![Vec::new(); c];
    for (v, &cv) in comm.iter().enumerate() {
        members[cv].push(graph.external_id(v));
    }
    for m in members {
        let line: Vec<String> = m.iter().map(u64::to_string).collect();
        writeln!(out, "{}", line.join(" "))?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn two_triangles_bridge() -> Graph {
        Graph::from_edges(6, &[(0, 1), (1, 2), (0, 2), (3, 4), (4, 5), (3, 5), (2, 3)]).unwrap()
    }

    #[test]
    fn modularity_single_community_is_zero() {
        let g = two_triangles_bridge();
        assert_eq!(modularity(&g, &[7; 6]).unwrap(), 0.0);
    }

    #[test]
    fn modularity_two_triangles() {
        let g = two_triangles_bridge();
        let q = modularity(&g, &[0, 0, 0, 1, 1, 1]).unwrap();
        assert!((q - 5.0 / 14.0).abs() < 1e-12);
    }

    #[test]
    fn modularity_k4_pairs() {
        let g = Graph::from_edges(4, &[(0, 1), (0, 2), (0, 3), (1, 2), (1, 3), (2, 3)]).unwrap();
        let q = modularity(&g, &[0, 0, 1, 1]).unwrap();
        assert!((q + 1.0 / 6.0).abs() < 1e-12);
    }

    #[test]
    fn modularity_errors() {
        let g = Graph::from_edges(2, &[]).unwrap();
        assert!(matches!(modularity(&g, &[0, 1]), Err(Error::EmptyGraph)));
        let g = two_triangles_bridge();
        assert!(matches!(modularity(&g, &[0, 1]), Err(Error::PartitionSize { .. })));
    }

    #[test]
    fn nmi_examples() {
        assert_eq!(nmi(&[0, 0, 1, 1], &[5, 5, 9, 9]).unwrap(), 1.0);
        assert!(nmi(&[0, 0, 1, 1], &[0, 1, 0, 1]).unwrap().abs() < 1e-15);
        // B refines A: I = H(A) = ln 2, H(B) = 1.5 ln 2.
        let v = nmi(&[0, 0, 1, 1], &[0, 0, 1, 2]).unwrap();
        assert!((v - 0.8).abs() < 1e-12, "{v}");
    }

    #[test]
    fn nmi_degenerate_conventions() {
        assert_eq!(nmi(&[0, 0, 0], &[1, 1, 1]).unwrap(), 1.0);
        assert_eq!(nmi(&[0, 0, 0], &[0, 1, 1]).unwrap(), 0.0);
        assert_eq!(nmi(&[0, 1, 1], &[0, 0, 0]).unwrap(), 0.0);
        assert!(nmi(&[0, 1], &[0, 1, 2]).is_err());
    }

    #[test]
    fn dissatisfied_examples() {
        // node 0: 2 links to its community {0,1,2}, 3 links to {3,4,5}
        let g = Graph::from_edges(6, &[(0, 1), (0, 2), (0, 3), (0, 4), (0, 5), (3, 4), (4, 5)]).unwrap();
        assert_eq!(dissatisfied_count(&g, &[0, 0, 0, 1, 1, 1]).unwrap(), 1);

        let g = Graph::from_edges(6, &[(0, 1), (1, 2), (0, 2), (3, 4), (4, 5), (3, 5)]).unwrap();
        assert_eq!(dissatisfied_count(&g, &[0, 0, 0, 1, 1, 1]).unwrap(), 0);
    }

    #[test]
    fn equal_split_is_not_dissatisfied() {
        let g = Graph::from_edges(4, &[(0, 1), (0, 2), (2, 3)]).unwrap();
        assert_eq!(dissatisfied_count(&g, &[0, 0, 1, 1]).unwrap(), 0);
    }

    #[test]
    fn strong_weak_examples() {
        let tri = Graph::from_edges(3, &[(0, 1), (1, 2), (0, 2)]).unwrap();
        assert_eq!(strong_weak_flags(&tri, &[0, 0, 0]).unwrap(), (vec![true], vec![true]));

        let g = two_triangles_bridge();
        let (strong, weak) = strong_weak_flags(&g, &[0, 0, 0, 1, 1, 1]).unwrap();
        assert_eq!(strong, vec![true, true]);
        assert_eq!(weak, vec![true, true]);

        // node 2 alone: d_in = 0, d_out = 3
        let (strong, _) = strong_weak_flags(&g, &[0, 0, 1, 2, 2, 2]).unwrap();
        assert!(!strong[1]);
    }

    #[test]
    fn objective_examples() {
        let g = two_triangles_bridge();
        assert_eq!(lpa_objective(&g, &[0; 6]).unwrap(), 14);
        assert_eq!(lpa_objective(&g, &[0, 1, 2, 3, 4, 5]).unwrap(), 0);
        assert_eq!(lpa_objective(&g, &[0, 0, 0, 1, 1, 1]).unwrap(), 12);
    }

    #[test]
    fn report_serializes() {
        let g = two_triangles_bridge();
        let report = CommunityReport::compute(&g, &[4, 4, 4, 2, 2, 2]).unwrap();
        assert_eq!(report.community_count, 2);
        assert_eq!(report.sizes, vec![3, 3]);
        assert_eq!(report.objective_h, 12);
        let json = serde_json::to_string(&report).unwrap();
        let back: CommunityReport = serde_json::from_str(&json).unwrap();
        assert_eq!(back, report);
    }

    #[test]
    fn ground_truth_first_membership_wins() {
        let (g, _) = Graph::load_edge_list(
            "10 20\n20 30\n30 40\n40 50\n".as_bytes(),
            &crate::graph::LoadOptions::default(),
        )
        .unwrap();
        let gt = load_ground_truth("10 20 30\n30 40\n99\n".as_bytes(), &g).unwrap();
        assert_eq!(gt.multi_assigned, 1);
        assert_eq!(gt.unknown_ids, 1);
        assert_eq!(gt.unassigned, 1);
        assert_eq!(gt.labeling.labels(), &[0, 0, 0, 1, 2]);

        let mut out = Vec::new();
        write_ground_truth(&g, gt.labeling.labels(), &mut out).unwrap();
        assert_eq!(String::from_utf8(out).unwrap(), "10 20 30\n40\n50\n");
    }
}
