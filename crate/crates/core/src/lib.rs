//! Label propagation community detection.
//!
//! The crate provides classic label propagation, the hop-attenuation /
//! node-preference variant, and controlled label propagation (CLPA), where
//! every label has a capacity that grows over `k` cycles so that no single
//! label can flood the graph before weaker communities have formed cores.
//!
//! Around the engine sit partition metrics ([`metrics`]), attraction-power
//! diagnostics for anticipating flood-fills ([`diagnostics`]), and a
//! planted-partition generator with a mixing-parameter sweep ([`benchgen`]).

pub mod benchgen;
pub mod diagnostics;
pub mod error;
pub mod graph;
pub mod metrics;
pub mod propagation;

pub use benchgen::{generate, sweep, BenchmarkSpec, PlantedGraph, SweepResult, SweepRow};
pub use diagnostics::{attraction_power, flood_fill_report, AttractionProfile, FloodFillReport, FloodFillThresholds, Risk};
pub use error::{Error, Result};
pub use graph::{Graph, LoadOptions, LoadStats};
pub use metrics::CommunityReport;
pub use propagation::{run, Anneal, Labeling, Mode, PropagationConfig, Propagator, RunTrace, Variant};
