//! Label propagation engine.
//!
//! Three update rules share one driver:
//!
//! * `Classic`: adopt the most frequent neighbor label.
//! * `Leung`: score labels by `S_u * d_u^m` and attenuate label strength by
//!   `delta` per hop.
//! * `Clpa`: classic rule restricted to labels whose population is below a
//!   capacity that grows stepwise over `k` cycles, with an annealed
//!   probability of hopping between equally good labels.
//!
//! Runs are deterministic for a given graph and [`PropagationConfig`].

use std::io::Write;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::Graph;

/// Relative tolerance used when comparing weighted label scores.
const SCORE_EPS: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Variant {
    Classic,
    Leung,
    Clpa,
}

impl Variant {
    pub fn name(self) -> &'static str {
        match self {
            Variant::Classic => "classic",
            Variant::Leung => "leung",
            Variant::Clpa => "clpa",
        }
    }
}

impl std::str::FromStr for Variant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "classic" | "lpa" => Ok(Variant::Classic),
            "leung" => Ok(Variant::Leung),
            "clpa" => Ok(Variant::Clpa),
            other => Err(Error::Config(format!("unknown algorithm {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    Synchronous,
    Asynchronous,
}

/// Tie-hopping schedule for CLPA.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Anneal {
    /// `p(t) = 1 - t / (T - 1)`.
    Linear,
    /// `p(t) = 0`: always keep the current label when it is among the best.
    Off,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PropagationConfig {
    pub variant: Variant,
    pub mode: Mode,
    /// Maximum number of rounds `T`.
    pub max_iterations: usize,
    /// Number of capacity cycles `k` (clpa only).
    pub cycles: usize,
    /// Hop attenuation `delta` (leung only).
    pub delta: f64,
    /// Node preference exponent `m` (leung only).
    pub pref_exponent: f64,
    /// Tie-hopping schedule (clpa only).
    pub anneal: Anneal,
    pub seed: u64,
}

impl PropagationConfig {
    pub const DEFAULT_MAX_ITERATIONS: usize = 100;
    pub const ROUNDS_PER_CYCLE: usize = 5;
    pub const DEFAULT_DELTA: f64 = 0.1;
    pub const DEFAULT_PREF_EXPONENT: f64 = 0.1;

    pub fn classic() -> Self {
        Self {
            variant: Variant::Classic,
            mode: Mode::Asynchronous,
            max_iterations: Self::DEFAULT_MAX_ITERATIONS,
            cycles: 1,
            delta: Self::DEFAULT_DELTA,
            pref_exponent: Self::DEFAULT_PREF_EXPONENT,
            anneal: Anneal::Off,
            seed: 0,
        }
    }

    pub fn leung() -> Self {
        Self {
            variant: Variant::Leung,
            ..Self::classic()
        }
    }

    /// CLPA with `k` cycles and the default horizon of five rounds per cycle.
    pub fn clpa(cycles: usize) -> Self {
        Self {
            variant: Variant::Clpa,
            max_iterations: Self::ROUNDS_PER_CYCLE * cycles,
            cycles,
            anneal: Anneal::Linear,
            ..Self::classic()
        }
    }

    /// Default configuration for a variant.
    pub fn for_variant(variant: Variant, cycles: usize) -> Self {
        match variant {
            Variant::Classic => Self::classic(),
            Variant::Leung => Self::leung(),
            Variant::Clpa => Self::clpa(cycles),
        }
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn with_mode(mut self, mode: Mode) -> Self {
        self.mode = mode;
        self
    }

    pub fn with_max_iterations(mut self, max_iterations: usize) -> Self {
        self.max_iterations = max_iterations;
        self
    }

    pub fn with_anneal(mut self, anneal: Anneal) -> Self {
        self.anneal = anneal;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.max_iterations == 0 {
            return Err(Error::Config("T must be positive".into()));
        }
        if self.variant == Variant::Clpa {
            if self.cycles == 0 {
                return Err(Error::Config("k must be positive".into()));
            }
            if self.cycles > self.max_iterations {
                return Err(Error::Config(format!(
                    "k exceeds T ({} > {})",
                    self.cycles, self.max_iterations
                )));
            }
        }
        if !(0.0..=1.0).contains(&self.delta) {
            return Err(Error::Config(format!("delta {} outside [0, 1]", self.delta)));
        }
        if !self.pref_exponent.is_finite() {
            return Err(Error::Config("preference exponent must be finite".into()));
        }
        Ok(())
    }
}

/// Capacity of every label at round `t`: `ceil((floor(k t / T) + 1) N / k)`,
/// clamped to `N`.
pub fn capacity(t: usize, max_iterations: usize, cycles: usize, node_count: usize) -> Result<usize> {
    if cycles == 0 || cycles > max_iterations {
        return Err(Error::Config(format!(
            "k exceeds T ({cycles} > {max_iterations})"
        )));
    }
    if t >= max_iterations {
        return Err(Error::Config(format!(
            "iteration {t} outside 0..{max_iterations}"
        )));
    }
    if node_count == 0 {
        return Err(Error::EmptyGraph);
    }
    let cycle = cycles * t / max_iterations + 1;
    Ok((cycle * node_count).div_ceil(cycles).min(node_count))
}

/// Linear annealing schedule `p(t) = 1 - t / (T - 1)`.
///
/// A single-round run has no room to anneal and gets `p = 0`.
pub fn anneal_probability(t: usize, max_iterations: usize) -> f64 {
    if max_iterations <= 1 {
        return 0.0;
    }
    let last = (max_iterations - 1) as f64;
    (1.0 - t as f64 / last).clamp(0.0, 1.0)
}

/// Node labels with incrementally maintained label populations.
#[derive(Debug, Clone, PartialEq)]
pub struct Labeling {
    label_of: Vec<usize>,
    population: Vec<usize>,
    strength: Vec<f64>,
    distinct: usize,
}

impl Labeling {
    /// Every node carries its own id as label, with strength 1.
    pub fn singletons(node_count: usize) -> Self {
        Self {
            label_of: (0..node_count).collect(),
            population: vec![1; node_count],
            strength: vec![1.0; node_count],
            distinct: node_count,
        }
    }

    /// Wraps an arbitrary assignment. Label ids index the population table,
    /// so they should be reasonably dense.
    pub fn from_labels(labels: Vec<usize>) -> Self {
        let size = labels.iter().max().map_or(0, |m| m + 1).max(labels.len());
        let mut population = vec![0; size];
        for &l in &labels {
            population[l] += 1;
        }
        let distinct = population.iter().filter(|&&p| p > 0).count();
        let strength = vec![1.0; labels.len()];
        Self {
            label_of: labels,
            population,
            strength,
            distinct,
        }
    }

    pub fn node_count(&self) -> usize {
        self.label_of.len()
    }

    #[inline]
    pub fn label(&self, v: usize) -> usize {
        self.label_of[v]
    }

    pub fn labels(&self) -> &[usize] {
        &self.label_of
    }

    #[inline]
    pub fn population(&self, label: usize) -> usize {
        self.population.get(label).copied().unwrap_or(0)
    }

    #[inline]
    pub fn strength(&self, v: usize) -> f64 {
        self.strength[v]
    }

    pub fn set_strength(&mut self, v: usize, strength: f64) {
        self.strength[v] = strength.clamp(0.0, 1.0);
    }

    /// Number of labels held by at least one node.
    pub fn community_count(&self) -> usize {
        self.distinct
    }

    /// Largest label population.
    pub fn largest_population(&self) -> usize {
        self.population.iter().copied().max().unwrap_or(0)
    }

    /// Moves `v` to `label`, keeping populations in sync.
    pub fn assign(&mut self, v: usize, label: usize) {
        let old = self.label_of[v];
        if old == label {
            return;
        }
        if label >= self.population.len() {
            self.population.resize(label + 1, 0);
        }
        self.population[old] -= 1;
        if self.population[old] == 0 {
            self.distinct -= 1;
        }
        if self.population[label] == 0 {
            self.distinct += 1;
        }
        self.population[label] += 1;
        self.label_of[v] = label;
    }

    /// Relabels communities to `0..C` in order of first occurrence.
    pub fn to_dense(&self) -> Self {
        let mut map = vec![usize::MAX; self.population.len()];
        let mut next = 0;
        let labels: Vec<usize> = self
            .label_of
            .iter()
            .map(|&l| {
                if map[l] == usize::MAX {
                    map[l] = next;
                    next += 1;
                }
                map[l]
            })
            .collect();
        let mut dense = Self::from_labels(labels);
        dense.strength.clone_from(&self.strength);
        dense
    }

    /// Populations recomputed from scratch equal the maintained counters.
    pub fn populations_consistent(&self) -> bool {
        let mut counts = vec![0usize; self.population.len()];
        for &l in &self.label_of {
            counts[l] += 1;
        }
        counts == self.population && counts.iter().filter(|&&c| c > 0).count() == self.distinct
    }

    /// Writes `external_node_id,community_id` rows in internal node order.
    pub fn write_csv<W: Write>(&self, graph: &Graph, mut out: W) -> Result<()> {
        writeln!(out, "external_node_id,community_id")?;
        for (v, &l) in self.label_of.iter().enumerate() {
            writeln!(out, "{},{}", graph.external_id(v), l)?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct IterationRecord {
    pub iteration: usize,
    pub changes: usize,
    pub labels: usize,
    pub capacity: usize,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct RunTrace {
    pub iterations_used: usize,
    pub converged: bool,
    pub per_iteration: Vec<IterationRecord>,
}

impl RunTrace {
    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "iteration,changes,labels,capacity")?;
        for r in &self.per_iteration {
            writeln!(out, "{},{},{},{}", r.iteration, r.changes, r.labels, r.capacity)?;
        }
        Ok(())
    }
}

/// Picks among the labels with maximal score.
///
/// With probability `p` the pick is uniform over `best`. Otherwise the
/// current label is kept when it is among the best, and a uniform pick is
/// made when it is not.
fn choose_best<R: Rng + ?Sized>(best: &[usize], current: usize, p: f64, rng: &mut R) -> usize {
    debug_assert!(!best.is_empty());
    if best.len() == 1 {
        return best[0];
    }
    let hop = p >= 1.0 || (p > 0.0 && rng.gen_bool(p));
    if !hop && best.contains(&current) {
        return current;
    }
    best[rng.gen_range(0..best.len())]
}

/// Sorted `(label, count)` pairs over the neighborhood of `v`.
fn tally(graph: &Graph, lab: &Labeling, v: usize, scratch: &mut Scratch) {
    let (labels, buf) = (&mut scratch.labels, &mut scratch.counts);
    labels.clear();
    labels.extend(graph.neighbors(v).iter().map(|&u| lab.label(u)));
    labels.sort_unstable();
    buf.clear();
    for &l in labels.iter() {
        match buf.last_mut() {
            Some((last, count)) if *last == l => *count += 1,
            _ => buf.push((l, 1)),
        }
    }
}

fn best_by_count(candidates: &[(usize, usize)], best: &mut Vec<usize>) {
    best.clear();
    let top = candidates.iter().map(|&(_, c)| c).max().unwrap_or(0);
    best.extend(candidates.iter().filter(|&&(_, c)| c == top).map(|&(l, _)| l));
}

#[derive(Default)]
struct Scratch {
    labels: Vec<usize>,
    counts: Vec<(usize, usize)>,
    best: Vec<usize>,
}

fn classic_update<R: Rng + ?Sized>(
    graph: &Graph,
    lab: &Labeling,
    v: usize,
    p: f64,
    rng: &mut R,
    scratch: &mut Scratch,
) -> usize {
    let current = lab.label(v);
    if graph.deg(v) == 0 {
        return current;
    }
    tally(graph, lab, v, scratch);
    best_by_count(&scratch.counts, &mut scratch.best);
    choose_best(&scratch.best, current, p, rng)
}

fn clpa_update<R: Rng + ?Sized>(
    graph: &Graph,
    lab: &Labeling,
    v: usize,
    cap: usize,
    p: f64,
    rng: &mut R,
    scratch: &mut Scratch,
) -> usize {
    let current = lab.label(v);
    if graph.deg(v) == 0 {
        return current;
    }
    tally(graph, lab, v, scratch);
    scratch
        .counts
        .retain(|&(l, _)| l == current || lab.population(l) < cap);
    if !scratch.counts.iter().any(|&(l, _)| l == current) {
        scratch.counts.push((current, 0));
    }
    best_by_count(&scratch.counts, &mut scratch.best);
    choose_best(&scratch.best, current, p, rng)
}

fn leung_update<R: Rng + ?Sized>(
    graph: &Graph,
    lab: &Labeling,
    v: usize,
    delta: f64,
    m: f64,
    rng: &mut R,
) -> (usize, f64) {
    let current = lab.label(v);
    if graph.deg(v) == 0 {
        return (current, lab.strength(v));
    }
    // (label, score, max holder strength)
    let mut entries: Vec<(usize, f64, f64)> = graph
        .neighbors(v)
        .iter()
        .map(|&u| {
            let s = lab.strength(u);
            (lab.label(u), s * (graph.deg(u) as f64).powf(m), s)
        })
        .collect();
    entries.sort_by_key(|e| e.0);
    let mut scores: Vec<(usize, f64, f64)> = Vec::with_capacity(entries.len());
    for (l, score, s) in entries {
        match scores.last_mut() {
            Some(last) if last.0 == l => {
                last.1 += score;
                last.2 = last.2.max(s);
            }
            _ => scores.push((l, score, s)),
        }
    }
    let top = scores.iter().map(|e| e.1).fold(f64::NEG_INFINITY, f64::max);
    let tol = SCORE_EPS * top.abs().max(1.0);
    let best: Vec<usize> = scores
        .iter()
        .filter(|e| e.1 >= top - tol)
        .map(|e| e.0)
        .collect();
    let label = choose_best(&best, current, 0.0, rng);
    let holder_strength = scores
        .iter()
        .find(|e| e.0 == label)
        .map_or(0.0, |e| e.2);
    (label, (holder_strength - delta).max(0.0))
}

/// Classic majority update for a single node. Isolated nodes keep their label.
pub fn update_label_classic<R: Rng + ?Sized>(
    graph: &Graph,
    lab: &Labeling,
    v: usize,
    rng: &mut R,
    p: f64,
) -> usize {
    classic_update(graph, lab, v, p, rng, &mut Scratch::default())
}

/// Hop-attenuated, degree-preferring update. Returns the new label and its
/// strength at `v`.
pub fn update_label_leung<R: Rng + ?Sized>(
    graph: &Graph,
    lab: &Labeling,
    v: usize,
    delta: f64,
    m: f64,
    rng: &mut R,
) -> (usize, f64) {
    leung_update(graph, lab, v, delta, m, rng)
}

/// Capacity-constrained update: neighbor labels whose population has
/// reached `cap` are not admissible, except the node's own label.
pub fn update_label_clpa<R: Rng + ?Sized>(
    graph: &Graph,
    lab: &Labeling,
    v: usize,
    cap: usize,
    rng: &mut R,
    p: f64,
) -> usize {
    clpa_update(graph, lab, v, cap, p, rng, &mut Scratch::default())
}

/// Round-by-round driver for a single propagation run.
pub struct Propagator<'g> {
    graph: &'g Graph,
    cfg: PropagationConfig,
    rng: ChaCha8Rng,
    labeling: Labeling,
    order: Vec<usize>,
    scratch: Scratch,
    trace: RunTrace,
    updates: u64,
}

impl<'g> Propagator<'g> {
    pub fn new(graph: &'g Graph, cfg: &PropagationConfig) -> Result<Self> {
        cfg.validate()?;
        if graph.node_count() == 0 {
            return Err(Error::EmptyGraph);
        }
        Ok(Self {
            graph,
            cfg: cfg.clone(),
            rng: ChaCha8Rng::seed_from_u64(cfg.seed),
            labeling: Labeling::singletons(graph.node_count()),
            order: (0..graph.node_count()).collect(),
            scratch: Scratch::default(),
            trace: RunTrace::default(),
            updates: 0,
        })
    }

    pub fn labeling(&self) -> &Labeling {
        &self.labeling
    }

    pub fn trace(&self) -> &RunTrace {
        &self.trace
    }

    pub fn is_finished(&self) -> bool {
        self.trace.converged || self.trace.iterations_used >= self.cfg.max_iterations
    }

    fn schedule(&self, t: usize) -> Result<(usize, f64)> {
        let n = self.graph.node_count();
        match self.cfg.variant {
            Variant::Clpa => {
                let cap = capacity(t, self.cfg.max_iterations, self.cfg.cycles, n)?;
                let p = match self.cfg.anneal {
                    Anneal::Linear => anneal_probability(t, self.cfg.max_iterations),
                    Anneal::Off => 0.0,
                };
                Ok((cap, p))
            }
            _ => Ok((n, 0.0)),
        }
    }

    fn propose(&mut self, v: usize, cap: usize, p: f64) -> (usize, f64) {
        let (g, lab) = (self.graph, &self.labeling);
        match self.cfg.variant {
            Variant::Classic => (
                classic_update(g, lab, v, p, &mut self.rng, &mut self.scratch),
                lab.strength(v),
            ),
            Variant::Clpa => (
                clpa_update(g, lab, v, cap, p, &mut self.rng, &mut self.scratch),
                lab.strength(v),
            ),
            Variant::Leung => leung_update(
                g,
                lab,
                v,
                self.cfg.delta,
                self.cfg.pref_exponent,
                &mut self.rng,
            ),
        }
    }

    /// Applies an update, enforcing the capacity rule. Returns whether the
    /// label changed.
    fn apply(&mut self, v: usize, label: usize, strength: f64, cap: usize) -> Result<bool> {
        let old = self.labeling.label(v);
        if self.cfg.variant == Variant::Leung {
            self.labeling.set_strength(v, strength);
        }
        if label == old {
            return Ok(false);
        }
        if self.cfg.variant == Variant::Clpa && self.labeling.population(label) >= cap {
            return Err(Error::Invariant(format!(
                "node {v} joined label {label} at capacity {cap}"
            )));
        }
        self.labeling.assign(v, label);
        self.updates += 1;
        if cfg!(debug_assertions) && self.updates % 1000 == 0 && !self.labeling.populations_consistent() {
            return Err(Error::Invariant("label populations out of sync".into()));
        }
        Ok(true)
    }

    /// Runs one round. Returns `None` once the run has finished.
    pub fn step(&mut self) -> Result<Option<IterationRecord>> {
        if self.is_finished() {
            return Ok(None);
        }
        let t = self.trace.iterations_used;
        let (cap, p) = self.schedule(t)?;
        let mut changes = 0;
        match self.cfg.mode {
            Mode::Asynchronous => {
                let mut order = std::mem::take(&mut self.order);
                order.shuffle(&mut self.rng);
                for &v in &order {
                    let (label, strength) = self.propose(v, cap, p);
                    changes += usize::from(self.apply(v, label, strength, cap)?);
                }
                self.order = order;
            }
            Mode::Synchronous => {
                let proposals: Vec<(usize, f64)> = (0..self.graph.node_count())
                    .map(|v| self.propose(v, cap, p))
                    .collect();
                for (v, (label, strength)) in proposals.into_iter().enumerate() {
                    // Simultaneous joins are admitted in node order until the
                    // target label is full.
                    let admissible = self.cfg.variant != Variant::Clpa
                        || label == self.labeling.label(v)
                        || self.labeling.population(label) < cap;
                    if admissible {
                        changes += usize::from(self.apply(v, label, strength, cap)?);
                    }
                }
            }
        }
        let record = IterationRecord {
            iteration: t,
            changes,
            labels: self.labeling.community_count(),
            capacity: cap,
        };
        self.trace.per_iteration.push(record);
        self.trace.iterations_used += 1;
        if changes == 0 && cap >= self.graph.node_count() {
            self.trace.converged = true;
        }
        Ok(Some(record))
    }

    /// Runs to completion and returns densely relabeled communities.
    pub fn finish(mut self) -> Result<(Labeling, RunTrace)> {
        while self.step()?.is_some() {}
        Ok((self.labeling.to_dense(), self.trace))
    }
}

/// Runs label propagation from unique initial labels.
pub fn run(graph: &Graph, cfg: &PropagationConfig) -> Result<(Labeling, RunTrace)> {
    Propagator::new(graph, cfg)?.finish()
}

/// Whether `v`'s label is among the most frequent labels of its
/// neighborhood. Isolated nodes trivially qualify.
pub fn holds_majority_label(graph: &Graph, labels: &[usize], v: usize) -> bool {
    let nbrs = graph.neighbors(v);
    if nbrs.is_empty() {
        return true;
    }
    let mut ls: Vec<usize> = nbrs.iter().map(|&u| labels[u]).collect();
    ls.sort_unstable();
    let mut top = 0;
    let mut own = 0;
    for chunk in ls.chunk_by(|a, b| a == b) {
        top = top.max(chunk.len());
        if chunk[0] == labels[v] {
            own = chunk.len();
        }
    }
    own == top
}
