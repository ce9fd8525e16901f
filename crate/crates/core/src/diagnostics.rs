//! Flood-fill risk analysis based on attraction power.
//!
//! The attraction power of `u` is the expected number of nodes that adopt
//! `u`'s initial label after one synchronous round, `A(u) = sum_{v in N(u)} 1/d_v`.
//! A wide spread of `A` means a few labels start with a large head start.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::graph::Graph;

#[derive(Debug, Clone, PartialEq)]
pub struct AttractionProfile {
    pub values: Vec<f64>,
    /// Population variance over all nodes.
    pub variance: f64,
    /// Node ids by descending attraction power, ties by ascending id.
    pub sorted_descending: Vec<usize>,
}

impl AttractionProfile {
    /// Writes `rank,external_id,attraction_power` in descending order.
    pub fn write_csv<W: Write>(&self, graph: &Graph, mut out: W) -> Result<()> {
        writeln!(out, "rank,external_id,attraction_power")?;
        for (rank, &v) in self.sorted_descending.iter().enumerate() {
            writeln!(out, "{},{},{}", rank + 1, graph.external_id(v), self.values[v])?;
        }
        Ok(())
    }
}

pub fn attraction_power(graph: &Graph) -> AttractionProfile {
    let n = graph.node_count();
    let inv_degree: Vec<f64> = (0..n)
        .map(|v| match graph.deg(v) {
            0 => 0.0,
            d => 1.0 / d as f64,
        })
        .collect();
    let values: Vec<f64> = (0..n)
        .map(|u| graph.neighbors(u).iter().map(|&v| inv_degree[v]).sum())
        .collect();
    let variance = if n == 0 {
        0.0
    } else {
        let mean = values.iter().sum::<f64>() / n as f64;
        values.iter().map(|a| (a - mean) * (a - mean)).sum::<f64>() / n as f64
    };
    let mut sorted_descending: Vec<usize> = (0..n).collect();
    sorted_descending.sort_by(|&a, &b| values[b].total_cmp(&values[a]).then(a.cmp(&b)));
    AttractionProfile {
        values,
        variance,
        sorted_descending,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Risk {
    Low,
    Elevated,
    High,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FloodFillThresholds {
    /// Attraction variance above which the risk is at least elevated.
    pub variance_warn: f64,
    /// A hub is a node adjacent to more than this fraction of the network.
    pub hub_degree_fraction: f64,
    /// Risk is high when the variance warns and the hub fraction exceeds this.
    pub hub_fraction_level: f64,
}

impl Default for FloodFillThresholds {
    fn default() -> Self {
        Self {
            variance_warn: 5.0,
            hub_degree_fraction: 0.1,
            hub_fraction_level: 0.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TopNode {
    pub external_id: u64,
    pub attraction_power: f64,
    pub degree: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FloodFillReport {
    pub node_count: usize,
    pub edge_count: usize,
    pub attraction_variance: f64,
    pub top_nodes: Vec<TopNode>,
    pub hub_count: usize,
    /// Fraction of nodes adjacent to more than `hub_degree_fraction` of the network.
    pub hub_fraction: f64,
    /// Largest degree divided by `N - 1`.
    pub max_neighborhood_fraction: f64,
    pub thresholds: FloodFillThresholds,
    pub risk: Risk,
}

pub fn flood_fill_report(graph: &Graph, thresholds: &FloodFillThresholds) -> FloodFillReport {
    let profile = attraction_power(graph);
    let n = graph.node_count();
    let hub_cut = thresholds.hub_degree_fraction * n as f64;
    let hub_count = (0..n).filter(|&v| graph.deg(v) as f64 > hub_cut).count();
    let hub_fraction = if n == 0 { 0.0 } else { hub_count as f64 / n as f64 };
    let max_neighborhood_fraction = if n > 1 {
        graph.max_degree() as f64 / (n - 1) as f64
    } else {
        0.0
    };
    let risk = if profile.variance <= thresholds.variance_warn {
        Risk::Low
    } else if hub_fraction > thresholds.hub_fraction_level {
        Risk::High
    } else {
        Risk::Elevated
    };
    let top_nodes = profile
        .sorted_descending
        .iter()
        .take(10)
        .map(|&v| TopNode {
            external_id: graph.external_id(v),
            attraction_power: profile.values[v],
            degree: graph.deg(v),
        })
        .collect();
    FloodFillReport {
        node_count: n,
        edge_count: graph.edge_count(),
        attraction_variance: profile.variance,
        top_nodes,
        hub_count,
        hub_fraction,
        max_neighborhood_fraction,
        thresholds: *thresholds,
        risk,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn star(leaves: usize) -> Graph {
        let edges: Vec<_> = (1..=leaves).map(|u| (0, u)).collect();
        Graph::from_edges(leaves + 1, &edges).unwrap()
    }

    #[test]
    fn regular_graph_is_uniform() {
        let cycle = Graph::from_edges(5, &[(0, 1), (1, 2), (2, 3), (3, 4), (4, 0)]).unwrap();
        let p = attraction_power(&cycle);
        assert!(p.values.iter().all(|&a| (a - 1.0).abs() < 1e-15));
        assert_eq!(p.variance, 0.0);
    }

    #[test]
    fn star_values() {
        let p = attraction_power(&star(5));
        assert!((p.values[0] - 5.0).abs() < 1e-15);
        for leaf in 1..=5 {
            assert!((p.values[leaf] - 0.2).abs() < 1e-15);
        }
        assert_eq!(p.sorted_descending[0], 0);
    }

    #[test]
    fn path_values() {
        let g = Graph::from_edges(3, &[(0, 1), (1, 2)]).unwrap();
        let p = attraction_power(&g);
        assert_eq!(p.values, vec![0.5, 2.0, 0.5]);
        assert_eq!(p.sorted_descending, vec![1, 0, 2]);
    }

    #[test]
    fn isolated_nodes_have_zero_power() {
        let g = Graph::from_edges(3, &[(0, 1)]).unwrap();
        assert_eq!(attraction_power(&g).values, vec![1.0, 1.0, 0.0]);
    }

    #[test]
    fn star_is_high_risk() {
        let g = star(100);
        let r = flood_fill_report(&g, &FloodFillThresholds::default());
        assert_eq!(r.hub_count, 1);
        assert!((r.hub_fraction - 1.0 / 101.0).abs() < 1e-12);
        assert_eq!(r.max_neighborhood_fraction, 1.0);
        assert!(r.attraction_variance > 5.0);
        assert_eq!(r.risk, Risk::High);
        assert_eq!(r.top_nodes[0].external_id, 0);
        assert_eq!(r.top_nodes.len(), 10);
    }

    #[test]
    fn disjoint_triangles_low_risk() {
        let g = Graph::from_edges(6, &[(0, 1), (1, 2), (0, 2), (3, 4), (4, 5), (3, 5)]).unwrap();
        let r = flood_fill_report(&g, &FloodFillThresholds::default());
        assert_eq!(r.attraction_variance, 0.0);
        assert_eq!(r.risk, Risk::Low);
    }

    #[test]
    fn profile_csv() {
        let g = Graph::from_edges(3, &[(0, 1), (1, 2)]).unwrap();
        let mut out = Vec::new();
        attraction_power(&g).write_csv(&g, &mut out).unwrap();
        assert_eq!(
            String::from_utf8(out).unwrap(),
            "rank,external_id,attraction_power\n1,1,2\n2,0,0.5\n3,2,0.5\n"
        );
    }
}
