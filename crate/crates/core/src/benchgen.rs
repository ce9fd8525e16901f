//! Planted-partition benchmark graphs and the mixing-parameter sweep.
//!
//! The generator is a simplified LFR-style model: power-law degrees,
//! uniformly sized communities, and a per-node split of stubs into
//! `round(mu * d)` external and the rest internal, wired by configuration
//! model matching. There is no community-size power law and no overlap.

use std::collections::HashSet;
use std::io::Write;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::Graph;
use crate::metrics;
use crate::propagation::{self, Labeling, PropagationConfig};

/// Short description stored alongside generated graphs.
pub const MODEL_NOTE: &str =
    "simplified planted partition: power-law degrees, uniform community sizes, no overlap";

const MAX_WIRING_ROUNDS: usize = 50;
const SWAP_ATTEMPTS: usize = 50;
const MAX_DROPPED_FRACTION: f64 = 0.1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchmarkSpec {
    pub node_count: usize,
    pub mean_degree: f64,
    pub max_degree: usize,
    pub mu: f64,
    pub community_size_range: (usize, usize),
    pub degree_exponent: f64,
    pub seed: u64,
}

impl Default for BenchmarkSpec {
    fn default() -> Self {
        Self {
            node_count: 1000,
            mean_degree: 20.0,
            max_degree: 100,
            mu: 0.3,
            community_size_range: (20, 100),
            degree_exponent: 2.5,
            seed: 0,
        }
    }
}

impl BenchmarkSpec {
    pub fn with_mu(mut self, mu: f64) -> Self {
        self.mu = mu;
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn validate(&self) -> Result<()> {
        let fail = |m: String| Err(Error::Config(m));
        let (lo, hi) = self.community_size_range;
        if self.node_count < 2 {
            return fail(format!("N = {} is too small", self.node_count));
        }
        if !(0.0..1.0).contains(&self.mu) {
            return fail(format!("mu {} outside [0, 1)", self.mu));
        }
        if !(self.mean_degree >= 1.0) {
            return fail(format!("mean degree {} below 1", self.mean_degree));
        }
        if self.mean_degree > self.max_degree as f64 {
            return fail(format!(
                "mean degree {} exceeds max degree {}",
                self.mean_degree, self.max_degree
            ));
        }
        if self.max_degree >= self.node_count {
            return fail(format!(
                "max degree {} must be below N = {}",
                self.max_degree, self.node_count
            ));
        }
        if lo < 2 || lo > hi {
            return fail(format!("invalid community size range {lo}..={hi}"));
        }
        if lo > self.node_count {
            return fail(format!("minimum community size {lo} exceeds N"));
        }
        if !self.degree_exponent.is_finite() || self.degree_exponent < 0.0 {
            return fail(format!("invalid degree exponent {}", self.degree_exponent));
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct PlantedGraph {
    pub graph: Graph,
    pub ground_truth: Labeling,
    /// Fraction of edges joining different planted communities.
    pub realized_mu: f64,
    pub realized_mean_degree: f64,
    pub community_sizes: Vec<usize>,
    /// Stubs that could not be matched and were discarded.
    pub dropped_stubs: usize,
}

/// Metadata written next to a generated graph.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenerationMetadata {
    pub model: String,
    pub spec: BenchmarkSpec,
    pub node_count: usize,
    pub edge_count: usize,
    pub community_count: usize,
    pub realized_mu: f64,
    pub realized_mean_degree: f64,
    pub dropped_stubs: usize,
}

impl PlantedGraph {
    pub fn metadata(&self, spec: &BenchmarkSpec) -> GenerationMetadata {
        GenerationMetadata {
            model: MODEL_NOTE.to_string(),
            spec: spec.clone(),
            node_count: self.graph.node_count(),
            edge_count: self.graph.edge_count(),
            community_count: self.community_sizes.len(),
            realized_mu: self.realized_mu,
            realized_mean_degree: self.realized_mean_degree,
            dropped_stubs: self.dropped_stubs,
        }
    }
}

/// Mean of a continuous power law `x^-tau` truncated to `[a, b]`.
fn truncated_power_mean(a: f64, b: f64, tau: f64) -> f64 {
    // integral of x^(1 - s) over [a, b]
    let moment = |s: f64| {
        let e = 1.0 - s;
        if e.abs() < 1e-12 {
            (b / a).ln()
        } else {
            (b.powf(e) - a.powf(e)) / e
        }
    };
    moment(tau - 1.0) / moment(tau)
}

fn sample_power_law<R: Rng>(rng: &mut R, a: f64, b: f64, tau: f64) -> f64 {
    let u: f64 = rng.gen();
    let e = 1.0 - tau;
    if e.abs() < 1e-12 {
        a * (b / a).powf(u)
    } else {
        (a.powf(e) + u * (b.powf(e) - a.powf(e))).powf(1.0 / e)
    }
}

/// Lower cutoff of the power law whose mean equals `mean`.
fn solve_min_degree(mean: f64, max_degree: f64, tau: f64) -> Result<f64> {
    if (mean - max_degree).abs() < 1e-9 {
        return Ok(max_degree);
    }
    let mut lo = 1.0;
    let mut hi = max_degree;
    if truncated_power_mean(lo, hi, tau) > mean {
        return Err(Error::Generation(format!(
            "mean degree {mean} is unreachable with max degree {max_degree} and exponent {tau}"
        )));
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if truncated_power_mean(mid, max_degree, tau) < mean {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

fn draw_degrees<R: Rng>(spec: &BenchmarkSpec, rng: &mut R) -> Result<Vec<usize>> {
    let dmax = spec.max_degree as f64;
    let xmin = solve_min_degree(spec.mean_degree, dmax, spec.degree_exponent)?;
    Ok((0..spec.node_count)
        .map(|_| {
            let x = sample_power_law(rng, xmin, dmax, spec.degree_exponent);
            (x.round() as usize).clamp(1, spec.max_degree)
        })
        .collect())
}

fn draw_community_sizes<R: Rng>(spec: &BenchmarkSpec, rng: &mut R) -> Result<Vec<usize>> {
    let n = spec.node_count;
    let (lo, hi) = spec.community_size_range;
    let mut sizes = Vec::new();
    let mut total = 0;
    while total < n {
        let s = rng.gen_range(lo..=hi);
        let remaining = n - total;
        if s <= remaining {
            sizes.push(s);
            total += s;
        } else if remaining >= lo {
            sizes.push(remaining);
            total = n;
        } else {
            // Spread the remainder over communities that still have room.
            for _ in 0..remaining {
                let open: Vec<usize> = (0..sizes.len()).filter(|&i| sizes[i] < hi).collect();
                let Some(&i) = open.choose(rng) else {
                    return Err(Error::Generation(format!(
                        "cannot tile N = {n} with community sizes {lo}..={hi}"
                    )));
                };
                sizes[i] += 1;
            }
            total = n;
        }
    }
    Ok(sizes)
}

/// Number of external stubs for a node of degree `d`; halves round toward
/// internal links.
fn external_stubs(mu: f64, degree: usize) -> usize {
    let x = mu * degree as f64;
    ((x - 0.5).ceil().max(0.0) as usize).min(degree)
}

struct Wiring<'a> {
    edges: HashSet<(usize, usize)>,
    community: &'a [usize],
}

impl Wiring<'_> {
    fn key(u: usize, v: usize) -> (usize, usize) {
        (u.min(v), u.max(v))
    }

    fn admissible(&self, u: usize, v: usize, internal: bool) -> bool {
        u != v
            && (self.community[u] == self.community[v]) == internal
            && !self.edges.contains(&Self::key(u, v))
    }

    /// Pairs stubs at random. Rejected pairs are retried, then resolved by
    /// swapping with an existing edge of the same pool. Returns the number
    /// of stubs left unmatched.
    fn wire<R: Rng>(&mut self, mut pool: Vec<usize>, internal: bool, rng: &mut R, out: &mut Vec<(usize, usize)>) -> usize {
        let mut placed: Vec<(usize, usize)> = Vec::with_capacity(pool.len() / 2);
        for _ in 0..MAX_WIRING_ROUNDS {
            if pool.len() < 2 {
                break;
            }
            pool.shuffle(rng);
            let mut leftover = Vec::new();
            let mut progress = false;
            for pair in pool.chunks(2) {
                let &[u, v] = pair else {
                    leftover.push(pair[0]);
                    continue;
                };
                if self.admissible(u, v, internal) {
                    self.edges.insert(Self::key(u, v));
                    placed.push((u, v));
                    progress = true;
                } else if self.swap_in(u, v, internal, &mut placed, rng) {
                    progress = true;
                } else {
                    leftover.extend_from_slice(pair);
                }
            }
            pool = leftover;
            if !progress {
                break;
            }
        }
        out.extend_from_slice(&placed);
        pool.len()
    }

    /// Replaces a placed edge `(x, y)` by `(u, x)` and `(v, y)`.
    fn swap_in<R: Rng>(&mut self, u: usize, v: usize, internal: bool, placed: &mut Vec<(usize, usize)>, rng: &mut R) -> bool {
        if placed.is_empty() {
            return false;
        }
        for _ in 0..SWAP_ATTEMPTS {
            let idx = rng.gen_range(0..placed.len());
            let (mut x, mut y) = placed[idx];
            if rng.gen_bool(0.5) {
                std::mem::swap(&mut x, &mut y);
            }
            let distinct = Self::key(u, x) != Self::key(v, y);
            if distinct && self.admissible(u, x, internal) && self.admissible(v, y, internal) {
                self.edges.remove(&Self::key(x, y));
                placed.swap_remove(idx);
                self.edges.insert(Self::key(u, x));
                self.edges.insert(Self::key(v, y));
                placed.push((u, x));
                placed.push((v, y));
                return true;
            }
        }
        false
    }
}

/// Generates one planted-partition graph.
pub fn generate(spec: &BenchmarkSpec) -> Result<PlantedGraph> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let n = spec.node_count;
    let degrees = draw_degrees(spec, &mut rng)?;
    let sizes = draw_community_sizes(spec, &mut rng)?;

    let mut external: Vec<usize> = degrees.iter().map(|&d| external_stubs(spec.mu, d)).collect();
    let mut internal: Vec<usize> = degrees.iter().zip(&external).map(|(d, e)| d - e).collect();

    // Place nodes with the most internal stubs first, each into a random
    // community that still has room and is large enough to hold its links.
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut rng);
    order.sort_by(|&a, &b| internal[b].cmp(&internal[a]));
    let mut free = sizes.clone();
    let mut community = vec![0usize; n];
    for &v in &order {
        let fits: Vec<usize> = (0..sizes.len())
            .filter(|&c| free[c] > 0 && sizes[c] > internal[v])
            .collect();
        let c = match fits.choose(&mut rng) {
            Some(&c) => c,
            None => {
                let c = (0..sizes.len())
                    .filter(|&c| free[c] > 0)
                    .max_by_key(|&c| (sizes[c], std::cmp::Reverse(c)))
                    .expect("sizes sum to N");
                let excess = internal[v] - (sizes[c] - 1);
                internal[v] -= excess;
                external[v] += excess;
                c
            }
        };
        community[v] = c;
        free[c] -= 1;
    }

    let mut wiring = Wiring {
        edges: HashSet::new(),
        community: &community,
    };
    let mut edges = Vec::new();
    let mut dropped = 0;
    let mut members: Vec<Vec<usize>> = vec![Vec::new(); sizes.len()];
    for v in 0..n {
        members[community[v]].push(v);
    }
    for group in &members {
        let stubs: Vec<usize> = group
            .iter()
            .flat_map(|&v| std::iter::repeat_n(v, internal[v]))
            .collect();
        dropped += wiring.wire(stubs, true, &mut rng, &mut edges);
    }
    let stubs: Vec<usize> = (0..n)
        .flat_map(|v| std::iter::repeat_n(v, external[v]))
        .collect();
    dropped += wiring.wire(stubs, false, &mut rng, &mut edges);

    let total_stubs: usize = degrees.iter().sum();
    if dropped as f64 > MAX_DROPPED_FRACTION * total_stubs as f64 {
        return Err(Error::Generation(format!(
            "{dropped} of {total_stubs} stubs could not be matched"
        )));
    }

    let graph = Graph::from_edges(n, &edges)?;
    let m = graph.edge_count();
    if m == 0 {
        return Err(Error::Generation("no edges generated".into()));
    }
    let crossing = graph.edges().filter(|&(u, v)| community[u] != community[v]).count();
    Ok(PlantedGraph {
        realized_mu: crossing as f64 / m as f64,
        realized_mean_degree: 2.0 * m as f64 / n as f64,
        ground_truth: Labeling::from_labels(community),
        community_sizes: sizes,
        dropped_stubs: dropped,
        graph,
    })
}

/// Mixes a base seed with cell coordinates into an independent stream seed.
pub fn derive_seed(base: u64, salt: &[u64]) -> u64 {
    fn splitmix(mut z: u64) -> u64 {
        z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
        z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
        z ^ (z >> 31)
    }
    salt.iter().fold(splitmix(base), |acc, &s| splitmix(acc ^ splitmix(s)))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub mu: f64,
    /// Seed of the generated graph.
    pub seed: u64,
    pub algorithm: String,
    pub nmi: f64,
    pub modularity: f64,
    pub communities: usize,
    pub iterations: usize,
    pub gt_dissatisfied: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepSummary {
    pub mu: f64,
    pub algorithm: String,
    pub runs: usize,
    pub mean_nmi: f64,
    pub mean_modularity: f64,
    pub mean_communities: f64,
    pub mean_iterations: f64,
    pub mean_gt_dissatisfied: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepResult {
    pub rows: Vec<SweepRow>,
    pub summary: Vec<SweepSummary>,
}

impl SweepResult {
    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "mu,seed,algorithm,nmi,modularity,communities,iterations,gt_dissatisfied")?;
        for r in &self.rows {
            writeln!(
                out,
                "{},{},{},{},{},{},{},{}",
                r.mu, r.seed, r.algorithm, r.nmi, r.modularity, r.communities, r.iterations, r.gt_dissatisfied
            )?;
        }
        Ok(())
    }

    pub fn write_summary_csv<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(
            out,
            "mu,algorithm,runs,mean_nmi,mean_modularity,mean_communities,mean_iterations,mean_gt_dissatisfied"
        )?;
        for s in &self.summary {
            writeln!(
                out,
                "{},{},{},{},{},{},{},{}",
                s.mu,
                s.algorithm,
                s.runs,
                s.mean_nmi,
                s.mean_modularity,
                s.mean_communities,
                s.mean_iterations,
                s.mean_gt_dissatisfied
            )?;
        }
        Ok(())
    }

    /// Summary entry for one `(mu, algorithm)` point.
    pub fn point(&self, mu: f64, algorithm: &str) -> Option<&SweepSummary> {
        self.summary.iter().find(|s| s.mu == mu && s.algorithm == algorithm)
    }
}

/// Runs every algorithm on `seeds_per_point` graphs per mixing value.
///
/// Cells run on a pool of `jobs` threads (all cores when `None`); output
/// order and content do not depend on the thread count.
pub fn sweep(
    base: &BenchmarkSpec,
    mu_values: &[f64],
    seeds_per_point: usize,
    algorithms: &[PropagationConfig],
    jobs: Option<usize>,
) -> Result<SweepResult> {
    if mu_values.is_empty() || algorithms.is_empty() || seeds_per_point == 0 {
        return Err(Error::Config(
            "sweep needs at least one mu value, seed and algorithm".into(),
        ));
    }
    for &mu in mu_values {
        base.clone().with_mu(mu).validate()?;
    }
    for cfg in algorithms {
        cfg.validate()?;
    }

    let cells: Vec<(usize, usize)> = (0..mu_values.len())
        .flat_map(|i| (0..seeds_per_point).map(move |s| (i, s)))
        .collect();
    let run_cell = |&(mu_idx, seed_idx): &(usize, usize)| -> Result<Vec<SweepRow>> {
        let mu = mu_values[mu_idx];
        let graph_seed = derive_seed(base.seed, &[mu_idx as u64, seed_idx as u64]);
        let spec = base.clone().with_mu(mu).with_seed(graph_seed);
        let planted = generate(&spec)?;
        let truth = planted.ground_truth.labels();
        let gt_dissatisfied = metrics::dissatisfied_count(&planted.graph, truth)?;
        algorithms
            .iter()
            .enumerate()
            .map(|(a, cfg)| {
                let cfg = cfg
                    .clone()
                    .with_seed(derive_seed(cfg.seed, &[mu_idx as u64, seed_idx as u64, a as u64]));
                let (labeling, trace) = propagation::run(&planted.graph, &cfg)?;
                Ok(SweepRow {
                    mu,
                    seed: graph_seed,
                    algorithm: cfg.variant.name().to_string(),
                    nmi: metrics::nmi(labeling.labels(), truth)?,
                    modularity: metrics::modularity(&planted.graph, labeling.labels())?,
                    communities: labeling.community_count(),
                    iterations: trace.iterations_used,
                    gt_dissatisfied,
                })
            })
            .collect()
    };

    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(j) = jobs {
        builder = builder.num_threads(j.max(1));
    }
    let pool = builder
        .build()
        .map_err(|e| Error::Config(format!("thread pool: {e}")))?;
    let per_cell: Vec<Vec<SweepRow>> =
        pool.install(|| cells.par_iter().map(run_cell).collect::<Result<_>>())?;
    let rows: Vec<SweepRow> = per_cell.into_iter().flatten().collect();

    let mut summary = Vec::new();
    for &mu in mu_values {
        let mut names: Vec<&str> = Vec::new();
        for cfg in algorithms {
            if !names.contains(&cfg.variant.name()) {
                names.push(cfg.variant.name());
            }
        }
        for name in names {
            let point: Vec<&SweepRow> = rows
                .iter()
                .filter(|r| r.mu == mu && r.algorithm == name)
                .collect();
            let k = point.len() as f64;
            let mean = |f: &dyn Fn(&SweepRow) -> f64| point.iter().map(|r| f(r)).sum::<f64>() / k;
            summary.push(SweepSummary {
                mu,
                algorithm: name.to_string(),
                runs: point.len(),
                mean_nmi: mean(&|r| r.nmi),
                mean_modularity: mean(&|r| r.modularity),
                mean_communities: mean(&|r| r.communities as f64),
                mean_iterations: mean(&|r| r.iterations as f64),
                mean_gt_dissatisfied: mean(&|r| r.gt_dissatisfied as f64),
            });
        }
    }
    Ok(SweepResult { rows, summary })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn power_mean_matches_quadrature() {
        let (a, b, tau) = (3.0, 50.0, 2.5);
        let steps = 200_000;
        let h = (b - a) / steps as f64;
        let (mut num, mut den) = (0.0, 0.0);
        for i in 0..steps {
            let x = a + (i as f64 + 0.5) * h;
            num += x * x.powf(-tau) * h;
            den += x.powf(-tau) * h;
        }
        assert!((truncated_power_mean(a, b, tau) - num / den).abs() < 1e-6);
        assert!((truncated_power_mean(a, b, 1.0) - (b - a) / (b / a).ln()).abs() < 1e-9);
    }

    #[test]
    fn min_degree_solution_hits_mean() {
        let xmin = solve_min_degree(20.0, 100.0, 2.5).unwrap();
        assert!((truncated_power_mean(xmin, 100.0, 2.5) - 20.0).abs() < 1e-9);
        assert!(solve_min_degree(1.01, 100.0, 2.5).is_err());
    }

    #[test]
    fn external_stub_rounding() {
        assert_eq!(external_stubs(0.0, 17), 0);
        assert_eq!(external_stubs(0.5, 9), 4);
        assert_eq!(external_stubs(0.5, 10), 5);
        assert_eq!(external_stubs(0.3, 10), 3);
        assert_eq!(external_stubs(0.34, 10), 3);
        assert_eq!(external_stubs(0.36, 10), 4);
    }

    #[test]
    fn community_sizes_tile_n() {
        let spec = BenchmarkSpec {
            node_count: 537,
            community_size_range: (20, 60),
            ..Default::default()
        };
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..50 {
            let sizes = draw_community_sizes(&spec, &mut rng).unwrap();
            assert_eq!(sizes.iter().sum::<usize>(), 537);
            assert!(sizes.iter().all(|&s| (20..=60).contains(&s)));
        }
    }

    #[test]
    fn zero_mixing_has_no_external_edges() {
        let spec = BenchmarkSpec {
            node_count: 300,
            mean_degree: 10.0,
            max_degree: 30,
            mu: 0.0,
            ..Default::default()
        };
        let pg = generate(&spec).unwrap();
        assert_eq!(pg.realized_mu, 0.0);
        let (strong, _) = metrics::strong_weak_flags(&pg.graph, pg.ground_truth.labels()).unwrap();
        assert!(strong.iter().all(|&s| s));
    }

    #[test]
    fn infeasible_specs() {
        let spec = BenchmarkSpec {
            node_count: 100,
            mean_degree: 50.0,
            max_degree: 30,
            ..Default::default()
        };
        assert!(matches!(generate(&spec), Err(Error::Config(_))));
        assert!(generate(&BenchmarkSpec::default().with_mu(1.0)).is_err());
        let tiny = BenchmarkSpec {
            community_size_range: (1, 10),
            ..Default::default()
        };
        assert!(tiny.validate().is_err());
    }

    #[test]
    fn generation_is_deterministic() {
        let spec = BenchmarkSpec {
            node_count: 400,
            ..Default::default()
        }
        .with_seed(11);
        let a = generate(&spec).unwrap();
        let b = generate(&spec).unwrap();
        assert_eq!(a.graph, b.graph);
        assert_eq!(a.ground_truth, b.ground_truth);
    }

    #[test]
    fn derived_seeds_differ() {
        let s: HashSet<u64> = (0..100).map(|i| derive_seed(0, &[i])).collect();
        assert_eq!(s.len(), 100);
        assert_ne!(derive_seed(0, &[1, 2]), derive_seed(0, &[2, 1]));
    }

    #[test]
    fn sweep_rejects_bad_input() {
        let base = BenchmarkSpec::default();
        let algos = [PropagationConfig::classic()];
        assert!(sweep(&base, &[], 1, &algos, Some(1)).is_err());
        assert!(sweep(&base, &[1.0], 1, &algos, Some(1)).is_err());
        assert!(sweep(&base, &[0.1], 0, &algos, Some(1)).is_err());
        assert!(sweep(&base, &[0.1], 1, &[], Some(1)).is_err());
    }
}
