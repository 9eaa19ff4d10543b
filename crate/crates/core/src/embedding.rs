//! Minor embedding of logical graphs into Chimera hardware.
//!
//! An embedding maps each logical vertex to a *chain* of physical qubits such
//! that chains are pairwise disjoint, each chain is connected in the hardware
//! graph, and every logical edge is realised by at least one hardware coupler
//! between the two chains.
//!
//! [`find_embedding`] is a randomized chain-growth heuristic. Vertices are
//! placed in descending-degree order, grown outward so that each new vertex
//! has as many placed neighbours as possible. A vertex's chain starts at the
//! root qubit that minimises the summed node-weighted shortest-path distance to
//! the chains of its placed neighbours, and then adds one shortest path per
//! neighbour. Qubit weights grow exponentially with the number of chains
//! already using them, so overlaps are allowed at first and priced out over
//! successive tear-up passes in which every chain is removed and re-routed.
//! Qubits that stay overused also accumulate a history penalty, which breaks
//! the symmetric standoffs where two chains keep claiming the same qubit.
//! Once the chains are disjoint, a few passes re-route each chain through
//! free qubits and keep it when it gets shorter.
//!
//! An attempt that stops reducing overlaps, or still has some after
//! `max_passes`, is abandoned and the search restarts from a fresh derived
//! seed, up to `max_attempts` times.

use std::cmp::{Ordering, Reverse};
use std::collections::{BTreeSet, BinaryHeap, VecDeque};
use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use rand::seq::SliceRandom;
use rand::Rng as _;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::clock::{ClockMode, CostModel};
use crate::graphs::WeightedGraph;
use crate::hardware::ChimeraGraph;
use crate::qubo::{Assignment, QuboKind, QuboMatrix};
use crate::seed;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EmbedError {
    #[error("no embedding found after {attempts} attempt(s): {reason}")]
    NotFound { attempts: usize, reason: String },
    #[error("physical graph has no active qubits")]
    EmptyTarget,
    #[error("QUBO dimension {got} does not match {expected} logical vertices")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("embedding is invalid: {0:?}")]
    Invalid(Vec<Violation>),
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
}

/// One broken minor-embedding condition.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum Violation {
    ChainCount { expected: usize, got: usize },
    EmptyChain { vertex: usize },
    InactiveQubit { vertex: usize, qubit: usize },
    /// Condition (i): two chains share a qubit.
    Overlap { qubit: usize, first: usize, second: usize },
    /// Condition (ii): a chain is not connected in the hardware graph.
    Disconnected { vertex: usize },
    /// Condition (iii): no coupler joins the chains of a logical edge.
    MissingCoupler { u: usize, v: usize },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::ChainCount { expected, got } => write!(f, "expected {expected} chains, got {got}"),
            Violation::EmptyChain { vertex } => write!(f, "chain of vertex {vertex} is empty"),
            Violation::InactiveQubit { vertex, qubit } => {
                write!(f, "chain of vertex {vertex} uses inactive qubit {qubit}")
            }
            Violation::Overlap { qubit, first, second } => {
                write!(f, "(i) qubit {qubit} shared by chains {first} and {second}")
            }
            Violation::Disconnected { vertex } => write!(f, "(ii) chain of vertex {vertex} is disconnected"),
            Violation::MissingCoupler { u, v } => write!(f, "(iii) no coupler between chains {u} and {v}"),
        }
    }
}

/// Logical vertex → chain of physical qubits (sorted, ascending).
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Embedding {
    chains: Vec<Vec<usize>>,
}

impl Embedding {
    /// Wraps explicit chains; each chain is sorted and deduplicated.
    pub fn from_chains(chains: Vec<Vec<usize>>) -> Self {
        let chains = chains
            .into_iter()
            .map(|c| c.into_iter().collect::<BTreeSet<_>>().into_iter().collect())
            .collect();
        Embedding { chains }
    }

    pub fn chains(&self) -> &[Vec<usize>] {
        &self.chains
    }

    pub fn chain(&self, v: usize) -> &[usize] {
        &self.chains[v]
    }

    pub fn logical_count(&self) -> usize {
        self.chains.len()
    }

    /// All qubits used by some chain, ascending. Embedded QUBOs index their
    /// variables by position in this list.
    pub fn qubits(&self) -> Vec<usize> {
        self.chains.iter().flatten().copied().collect::<BTreeSet<_>>().into_iter().collect()
    }

    pub fn max_chain_len(&self) -> usize {
        self.chains.iter().map(Vec::len).max().unwrap_or(0)
    }

    pub fn mean_chain_len(&self) -> f64 {
        if self.chains.is_empty() {
            return 0.0;
        }
        self.chains.iter().map(Vec::len).sum::<usize>() as f64 / self.chains.len() as f64
    }

    /// Lines `chain <v>: <q1> <q2> ...`.
    pub fn render(&self) -> String {
        let mut out = String::new();
        for (v, chain) in self.chains.iter().enumerate() {
            out.push_str(&format!("chain {v}:"));
            for q in chain {
                out.push_str(&format!(" {q}"));
            }
            out.push('\n');
        }
        out
    }

    pub fn parse(text: &str) -> Result<Self, EmbedError> {
        let err = |line: usize, message: String| EmbedError::Parse { line, message };
        let mut chains: Vec<Option<Vec<usize>>> = Vec::new();
        for (idx, raw) in text.lines().enumerate() {
            let line_no = idx + 1;
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let rest = line
                .strip_prefix("chain ")
                .ok_or_else(|| err(line_no, "expected `chain <v>: ...`".into()))?;
            let (v, qubits) = rest
                .split_once(':')
                .ok_or_else(|| err(line_no, "missing `:`".into()))?;
            let v: usize = v.trim().parse().map_err(|e| err(line_no, format!("bad vertex: {e}")))?;
            let qubits = qubits
                .split_whitespace()
                .map(|t| t.parse::<usize>().map_err(|e| err(line_no, format!("bad qubit `{t}`: {e}"))))
                .collect::<Result<Vec<_>, _>>()?;
            if chains.len() <= v {
                chains.resize(v + 1, None);
            }
            if chains[v].replace(qubits).is_some() {
                return Err(err(line_no, format!("duplicate chain for vertex {v}")));
            }
        }
        let chains = chains
            .into_iter()
            .enumerate()
            .map(|(v, c)| c.ok_or_else(|| err(0, format!("missing chain for vertex {v}"))))
            .collect::<Result<Vec<_>, _>>()?;
        Ok(Embedding::from_chains(chains))
    }
}

/// Checks conditions (i)–(iii) plus basic shape; returns every violation found.
pub fn verify_embedding(
    e: &Embedding,
    logical: &WeightedGraph,
    physical: &ChimeraGraph,
) -> Result<(), Vec<Violation>> {
    let mut violations = Vec::new();
    if e.chains.len() != logical.n() {
        violations.push(Violation::ChainCount { expected: logical.n(), got: e.chains.len() });
        return Err(violations);
    }
    let mut owner: Vec<Option<usize>> = vec![None; physical.num_qubits()];
    for (v, chain) in e.chains.iter().enumerate() {
        if chain.is_empty() {
            violations.push(Violation::EmptyChain { vertex: v });
        }
        for &q in chain {
            if !physical.is_active(q) {
                violations.push(Violation::InactiveQubit { vertex: v, qubit: q });
                continue;
            }
            match owner[q] {
                Some(first) => violations.push(Violation::Overlap { qubit: q, first, second: v }),
                None => owner[q] = Some(v),
            }
        }
    }
    for (v, chain) in e.chains.iter().enumerate() {
        if !chain.is_empty() && !chain_connected(chain, physical) {
            violations.push(Violation::Disconnected { vertex: v });
        }
    }
    for &(u, v) in logical.edges() {
        if representative_coupler(e.chain(u), e.chain(v), physical).is_none() {
            violations.push(Violation::MissingCoupler { u, v });
        }
    }
    if violations.is_empty() {
        Ok(())
    } else {
        Err(violations)
    }
}

fn chain_connected(chain: &[usize], physical: &ChimeraGraph) -> bool {
    let mut seen = BTreeSet::from([chain[0]]);
    let mut queue = VecDeque::from([chain[0]]);
    while let Some(q) = queue.pop_front() {
        for &n in physical.neighbors(q) {
            if chain.binary_search(&n).is_ok() && seen.insert(n) {
                queue.push_back(n);
            }
        }
    }
    seen.len() == chain.len()
}

/// Smallest hardware coupler `(a, b)` (canonical order) joining two chains.
fn representative_coupler(a: &[usize], b: &[usize], physical: &ChimeraGraph) -> Option<(usize, usize)> {
    let mut best: Option<(usize, usize)> = None;
    for &p in a {
        for &q in physical.neighbors(p) {
            if b.binary_search(&q).is_ok() {
                let e = (p.min(q), p.max(q));
                best = Some(best.map_or(e, |b| b.min(e)));
            }
        }
    }
    best
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EmbedOptions {
    pub max_attempts: usize,
    /// Tear-up passes per attempt before giving up on it.
    pub max_passes: usize,
    /// Successful attempts to collect; the one with the shortest longest chain wins.
    pub keep_best_of: usize,
}

impl Default for EmbedOptions {
    fn default() -> Self {
        EmbedOptions { max_attempts: 32, max_passes: 64, keep_best_of: 1 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmbeddingStats {
    pub qubits_used: usize,
    pub max_chain_len: usize,
    pub mean_chain_len: f64,
    pub wall_ms: f64,
    /// Deterministic work counter: Dijkstra pops plus relaxations.
    pub work_ops: u64,
    pub attempts: usize,
}

impl EmbeddingStats {
    /// t_embed under the chosen clock.
    pub fn t_embed_ms(&self, clock: ClockMode, cost: &CostModel) -> f64 {
        match clock {
            ClockMode::Counted => CostModel::ms(self.work_ops, cost.embed_ns_per_op),
            ClockMode::Measured => self.wall_ms,
        }
    }
}

#[derive(Clone, Copy, PartialEq)]
struct Cost(f64);

impl Eq for Cost {}

impl PartialOrd for Cost {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Cost {
    fn cmp(&self, other: &Self) -> Ordering {
        self.0.total_cmp(&other.0)
    }
}

/// Overlap price at the start of an attempt, its growth per tear-up pass, and
/// its ceiling. The ceiling keeps a single crossing cheaper than a detour
/// across the whole chip.
const BASE_START: f64 = 2.0;
const BASE_GROWTH: f64 = 1.5;
const BASE_CAP: f64 = 32.0;
/// History added per pass to every qubit that is still overused.
const HISTORY_STEP: f64 = 1.0;
/// Tear-up passes without fewer overused qubits before an attempt is dropped.
const STALL_PASSES: usize = 10;
/// Re-routing passes once the chains are disjoint.
const REFINE_PASSES: usize = 4;

struct Router<'a> {
    logical: &'a WeightedGraph,
    physical: &'a ChimeraGraph,
    chains: Vec<Vec<usize>>,
    usage: Vec<u32>,
    /// accumulated penalty on qubits that stayed overused
    history: Vec<f64>,
    base: f64,
    ops: u64,
}

impl<'a> Router<'a> {
    fn new(logical: &'a WeightedGraph, physical: &'a ChimeraGraph) -> Self {
        Router {
            logical,
            physical,
            chains: vec![Vec::new(); logical.n()],
            usage: vec![0; physical.num_qubits()],
            history: vec![0.0; physical.num_qubits()],
            base: BASE_START,
            ops: 0,
        }
    }

    /// Congestion-priced qubit weights; overlaps allowed.
    fn weights(&self) -> Vec<f64> {
        (0..self.physical.num_qubits())
            .map(|q| {
                if self.physical.is_active(q) {
                    (1.0 + self.history[q]) * self.base.powi(self.usage[q] as i32)
                } else {
                    f64::INFINITY
                }
            })
            .collect()
    }

    /// Unit weights on free qubits; used qubits are walls.
    fn free_weights(&self) -> Vec<f64> {
        (0..self.physical.num_qubits())
            .map(|q| if self.physical.is_active(q) && self.usage[q] == 0 { 1.0 } else { f64::INFINITY })
            .collect()
    }

    fn end_pass(&mut self) {
        for (h, &u) in self.history.iter_mut().zip(&self.usage) {
            if u > 1 {
                *h += HISTORY_STEP;
            }
        }
        self.base = (self.base * BASE_GROWTH).min(BASE_CAP);
    }

    fn overlap_count(&self) -> usize {
        self.usage.iter().filter(|&&u| u > 1).count()
    }

    fn unplace(&mut self, v: usize) -> Vec<usize> {
        let old = std::mem::take(&mut self.chains[v]);
        for &q in &old {
            self.usage[q] -= 1;
        }
        old
    }

    fn commit(&mut self, v: usize, chain: Vec<usize>) {
        for &q in &chain {
            self.usage[q] += 1;
        }
        self.chains[v] = chain;
    }

    /// Node-weighted multi-source Dijkstra from a chain. `dist[q]` includes the
    /// weight of `q` itself and is zero on the sources.
    fn dijkstra(&mut self, sources: &[usize], w: &[f64]) -> (Vec<f64>, Vec<usize>) {
        let nq = w.len();
        let mut dist = vec![f64::INFINITY; nq];
        let mut prev = vec![usize::MAX; nq];
        let mut heap = BinaryHeap::new();
        for &s in sources {
            dist[s] = 0.0;
            heap.push(Reverse((Cost(0.0), s)));
        }
        while let Some(Reverse((Cost(d), q))) = heap.pop() {
            self.ops += 1;
            if d > dist[q] {
                continue;
            }
            for &n in self.physical.neighbors(q) {
                self.ops += 1;
                let nd = d + w[n];
                if nd < dist[n] {
                    dist[n] = nd;
                    prev[n] = q;
                    heap.push(Reverse((Cost(nd), n)));
                }
            }
        }
        (dist, prev)
    }

    /// Cheapest chain for `v` under weights `w`: the root minimising the summed
    /// distance to the placed neighbour chains, then one path per neighbour,
    /// nearest first, each starting from the chain grown so far. `None` when
    /// some neighbour is unreachable.
    fn route(&mut self, v: usize, w: &[f64], rng: &mut seed::Rng) -> Option<Vec<usize>> {
        let placed: Vec<usize> =
            self.logical.neighbors(v).iter().copied().filter(|&u| !self.chains[u].is_empty()).collect();
        let nq = w.len();
        let mut total = vec![0.0; nq];
        let mut trees = Vec::with_capacity(placed.len());
        for &u in &placed {
            let sources = self.chains[u].clone();
            let (dist, prev) = self.dijkstra(&sources, w);
            for (t, &d) in total.iter_mut().zip(&dist) {
                *t += d;
            }
            trees.push((dist, prev));
        }
        // a root inside a neighbour's chain has distance 0 there but still
        // pays its own weight once
        let mut best = f64::INFINITY;
        let mut roots = Vec::new();
        for q in 0..nq {
            if !w[q].is_finite() {
                continue;
            }
            let inside = trees.is_empty() || trees.iter().any(|(d, _)| d[q] == 0.0);
            let t = total[q] + if inside { w[q] } else { 0.0 };
            match t.partial_cmp(&best) {
                Some(Ordering::Less) => {
                    best = t;
                    roots.clear();
                    roots.push(q);
                }
                Some(Ordering::Equal) => roots.push(q),
                _ => {}
            }
        }
        if !best.is_finite() {
            return None;
        }
        let root = roots[rng.random_range(0..roots.len())];
        let mut chain = BTreeSet::from([root]);
        let mut pending: Vec<usize> = (0..placed.len()).collect();
        pending.sort_by(|&a, &b| trees[a].0[root].total_cmp(&trees[b].0[root]));
        for (i, &k) in pending.iter().enumerate() {
            let target = &self.chains[placed[k]];
            let touches = chain
                .iter()
                .any(|&q| target.contains(&q) || self.physical.neighbors(q).iter().any(|n| target.contains(n)));
            if touches {
                continue;
            }
            let (dist, prev) = if i == 0 {
                trees[k].clone()
            } else {
                let sources = target.clone();
                self.dijkstra(&sources, w)
            };
            let mut q = *chain.iter().min_by(|&&a, &&b| dist[a].total_cmp(&dist[b])).expect("nonempty chain");
            if !dist[q].is_finite() {
                return None;
            }
            while dist[q] > 0.0 {
                chain.insert(q);
                q = prev[q];
            }
        }
        Some(chain.into_iter().collect())
    }

    fn place(&mut self, v: usize, rng: &mut seed::Rng) {
        let w = self.weights();
        let chain = self.route(v, &w, rng).expect("every active qubit is reachable at a finite price");
        self.commit(v, chain);
    }

    /// Re-routes `v` through free qubits only and keeps the result when it is
    /// shorter than the current chain.
    fn shorten(&mut self, v: usize, rng: &mut seed::Rng) -> bool {
        let old = self.unplace(v);
        let w = self.free_weights();
        match self.route(v, &w, rng) {
            Some(chain) if chain.len() < old.len() => {
                self.commit(v, chain);
                true
            }
            _ => {
                self.commit(v, old);
                false
            }
        }
    }
}

/// Searches for a minor embedding of `logical` into `physical`.
///
/// Deterministic for a given seed. Attempt `a` uses the seed
/// `derive(seed, EMBED, a)`.
pub fn find_embedding(
    logical: &WeightedGraph,
    physical: &ChimeraGraph,
    seed: u64,
    options: &EmbedOptions,
) -> Result<(Embedding, EmbeddingStats), EmbedError> {
    let start = Instant::now();
    let active = physical.active_count();
    if active == 0 {
        return Err(EmbedError::EmptyTarget);
    }
    if logical.n() > active {
        return Err(EmbedError::NotFound {
            attempts: 0,
            reason: format!("{} logical vertices cannot fit in {active} active qubits", logical.n()),
        });
    }

    let mut work_ops = 0u64;
    let mut best: Option<Embedding> = None;
    let mut successes = 0;
    let mut attempts = 0;
    for attempt in 0..options.max_attempts.max(1) {
        attempts += 1;
        let mut rng = seed::rng(seed::derive(seed, seed::tag::EMBED, attempt as u64));
        let (found, ops) = embed_attempt(logical, physical, options.max_passes, &mut rng);
        work_ops += ops;
        if let Some(e) = found {
            successes += 1;
            if best.as_ref().is_none_or(|b| e.max_chain_len() < b.max_chain_len()) {
                best = Some(e);
            }
            if successes >= options.keep_best_of.max(1) {
                break;
            }
        }
    }
    let embedding = best.ok_or_else(|| EmbedError::NotFound {
        attempts,
        reason: "chains still overlap after every tear-up pass".into(),
    })?;
    let stats = EmbeddingStats {
        qubits_used: embedding.qubits().len(),
        max_chain_len: embedding.max_chain_len(),
        mean_chain_len: embedding.mean_chain_len(),
        wall_ms: start.elapsed().as_secs_f64() * 1e3,
        work_ops: work_ops.max(1),
        attempts,
    };
    Ok((embedding, stats))
}

/// Descending degree, grown outward: after the first (highest-degree) vertex,
/// each step takes the unplaced vertex with the most placed neighbours, ties
/// broken by degree and then by a random shuffle. Placing a vertex far from all
/// of its neighbours' future chains would force long bridging chains later.
fn placement_order(logical: &WeightedGraph, rng: &mut seed::Rng) -> Vec<usize> {
    let n = logical.n();
    let mut shuffled: Vec<usize> = (0..n).collect();
    shuffled.shuffle(rng);
    let mut rank = vec![0; n];
    for (i, &v) in shuffled.iter().enumerate() {
        rank[v] = i;
    }
    let mut done = vec![false; n];
    let mut touching = vec![0usize; n];
    let mut order = Vec::with_capacity(n);
    for _ in 0..n {
        let v = (0..n)
            .filter(|&v| !done[v])
            .max_by_key(|&v| (touching[v], logical.degree(v), Reverse(rank[v])))
            .expect("unplaced vertex");
        done[v] = true;
        order.push(v);
        for &u in logical.neighbors(v) {
            touching[u] += 1;
        }
    }
    order
}

fn embed_attempt(
    logical: &WeightedGraph,
    physical: &ChimeraGraph,
    max_passes: usize,
    rng: &mut seed::Rng,
) -> (Option<Embedding>, u64) {
    let mut router = Router::new(logical, physical);
    let mut order = placement_order(logical, rng);
    for &v in &order {
        router.place(v, rng);
    }

    let mut best_overlap = usize::MAX;
    let mut stalled = 0;
    for pass in 0..=max_passes {
        let overlap = router.overlap_count();
        if overlap == 0 {
            for _ in 0..REFINE_PASSES {
                order.shuffle(rng);
                let mut improved = false;
                for &v in &order {
                    improved |= router.shorten(v, rng);
                }
                if !improved {
                    break;
                }
            }
            let e = Embedding::from_chains(router.chains.clone());
            let ok = verify_embedding(&e, logical, physical).is_ok();
            return (ok.then_some(e), router.ops);
        }
        if overlap < best_overlap {
            best_overlap = overlap;
            stalled = 0;
        } else {
            stalled += 1;
        }
        if pass == max_passes || stalled > STALL_PASSES {
            break;
        }
        router.end_pass();
        order.shuffle(rng);
        for &v in &order {
            router.unplace(v);
            router.place(v, rng);
        }
    }
    (None, router.ops)
}

/// File cache for embeddings keyed by (logical hash, physical hash, seed).
#[derive(Debug, Clone)]
pub struct EmbeddingCache {
    dir: PathBuf,
}

impl EmbeddingCache {
    pub fn new(dir: impl Into<PathBuf>) -> Self {
        EmbeddingCache { dir: dir.into() }
    }

    pub fn path_for(&self, logical: &WeightedGraph, physical: &ChimeraGraph, seed: u64) -> PathBuf {
        let key = format!(
            "{}-{}-{seed}.chains",
            &logical.structure_hash()[..16],
            &physical.structure_hash()[..16]
        );
        self.dir.join(key)
    }

    /// Cached embedding, if present and still valid for these graphs.
    pub fn load(&self, logical: &WeightedGraph, physical: &ChimeraGraph, seed: u64) -> Option<Embedding> {
        let text = fs::read_to_string(self.path_for(logical, physical, seed)).ok()?;
        let e = Embedding::parse(&text).ok()?;
        verify_embedding(&e, logical, physical).ok()?;
        Some(e)
    }

    pub fn store(
        &self,
        logical: &WeightedGraph,
        physical: &ChimeraGraph,
        seed: u64,
        e: &Embedding,
    ) -> std::io::Result<PathBuf> {
        fs::create_dir_all(&self.dir)?;
        let path = self.path_for(logical, physical, seed);
        let header = format!(
            "# embedding logical={} physical={} seed={seed}\n",
            logical.structure_hash(),
            physical.structure_hash()
        );
        fs::write(&path, header + &e.render())?;
        Ok(path)
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }
}

/// Fixed part of an embedded QUBO: logical couplers on representative
/// hardware edges plus chain gadgets. Only the diagonal changes per weight
/// vector, which is what lets one embedding serve every weight assignment.
#[derive(Debug, Clone)]
pub struct EmbeddedTemplate {
    base: QuboMatrix,
    /// compact index of every qubit, grouped by logical vertex
    chain_slots: Vec<Vec<usize>>,
    qubits: Vec<usize>,
    chain_strength: f64,
}

impl EmbeddedTemplate {
    /// Builds the template from the off-diagonal part of `logical_q`.
    pub fn new(
        logical_q: &QuboMatrix,
        e: &Embedding,
        physical: &ChimeraGraph,
        chain_strength: f64,
    ) -> Result<Self, EmbedError> {
        if logical_q.dim() != e.logical_count() {
            return Err(EmbedError::DimensionMismatch { expected: e.logical_count(), got: logical_q.dim() });
        }
        let qubits = e.qubits();
        let slot = |q: usize| qubits.binary_search(&q).expect("qubit belongs to a chain");
        let mut base = QuboMatrix::new(qubits.len(), QuboKind::Embedded);

        for chain in e.chains() {
            for &a in chain {
                for &b in physical.neighbors(a) {
                    if a < b && chain.binary_search(&b).is_ok() {
                        let (sa, sb) = (slot(a), slot(b));
                        base.add(sa, sa, chain_strength);
                        base.add(sb, sb, chain_strength);
                        base.add(sa, sb, -2.0 * chain_strength);
                    }
                }
            }
        }
        for (u, v, value) in logical_q.entries() {
            if u == v {
                continue;
            }
            let (a, b) = representative_coupler(e.chain(u), e.chain(v), physical).ok_or_else(|| {
                EmbedError::Invalid(vec![Violation::MissingCoupler { u, v }])
            })?;
            base.add(slot(a), slot(b), value);
        }
        let chain_slots = e.chains().iter().map(|c| c.iter().map(|&q| slot(q)).collect()).collect();
        Ok(EmbeddedTemplate { base, chain_slots, qubits, chain_strength })
    }

    /// Embedded QUBO for the given logical diagonal, split evenly over each chain.
    pub fn with_diagonal(&self, diagonal: &[f64]) -> QuboMatrix {
        let mut q = self.base.clone();
        for (v, slots) in self.chain_slots.iter().enumerate() {
            let share = diagonal[v] / slots.len() as f64;
            for &s in slots {
                q.add(s, s, share);
            }
        }
        q
    }

    /// Embedded MWIS QUBO for a weight vector (`Q(v,v) = -w(v)`).
    pub fn with_weights(&self, weights: &[f64]) -> QuboMatrix {
        let diag: Vec<f64> = weights.iter().map(|w| -w).collect();
        self.with_diagonal(&diag)
    }

    pub fn qubits(&self) -> &[usize] {
        &self.qubits
    }

    pub fn chain_strength(&self) -> f64 {
        self.chain_strength
    }
}

/// `2 (S + W)` with `S` the largest off-diagonal magnitude and `W` the largest
/// diagonal magnitude of the logical QUBO.
pub fn default_chain_strength(logical_q: &QuboMatrix) -> f64 {
    let (mut s, mut w) = (0.0_f64, 0.0_f64);
    for (i, j, v) in logical_q.entries() {
        if i == j {
            w = w.max(v.abs());
        } else {
            s = s.max(v.abs());
        }
    }
    2.0 * (s + w)
}

/// Physical QUBO for a logical QUBO under an embedding.
///
/// Variables are indexed by position in [`Embedding::qubits`].
pub fn embed_qubo(
    logical_q: &QuboMatrix,
    e: &Embedding,
    logical: &WeightedGraph,
    physical: &ChimeraGraph,
    chain_strength: Option<f64>,
) -> Result<QuboMatrix, EmbedError> {
    if logical_q.dim() != logical.n() {
        return Err(EmbedError::DimensionMismatch { expected: logical.n(), got: logical_q.dim() });
    }
    verify_embedding(e, logical, physical).map_err(EmbedError::Invalid)?;
    let strength = chain_strength.unwrap_or_else(|| default_chain_strength(logical_q));
    let template = EmbeddedTemplate::new(logical_q, e, physical, strength)?;
    let diag: Vec<f64> = (0..logical_q.dim()).map(|v| logical_q.get(v, v)).collect();
    Ok(template.with_diagonal(&diag))
}

/// Majority vote per chain (ties go to 0) followed by independence repair.
///
/// Repair walks the logical edges in canonical order and, for every edge with
/// both endpoints set, clears the lighter endpoint (the higher index on equal
/// weights). Returns the logical assignment and the number of chains whose
/// qubits disagreed.
pub fn unembed_sample(
    x_phys: &Assignment,
    e: &Embedding,
    graph: &WeightedGraph,
) -> Result<(Assignment, usize), EmbedError> {
    let qubits = e.qubits();
    if x_phys.len() != qubits.len() {
        return Err(EmbedError::DimensionMismatch { expected: qubits.len(), got: x_phys.len() });
    }
    if graph.n() != e.logical_count() {
        return Err(EmbedError::DimensionMismatch { expected: e.logical_count(), got: graph.n() });
    }
    let mut broken = 0;
    let mut bits = Vec::with_capacity(e.logical_count());
    for chain in e.chains() {
        let ones = chain
            .iter()
            .filter(|&&q| x_phys.get(qubits.binary_search(&q).expect("chain qubit")))
            .count();
        if ones != 0 && ones != chain.len() {
            broken += 1;
        }
        bits.push(2 * ones > chain.len());
    }
    for &(u, v) in graph.edges() {
        if bits[u] && bits[v] {
            let drop = if graph.weight(u) < graph.weight(v) {
                u
            } else if graph.weight(v) < graph.weight(u) {
                v
            } else {
                v.max(u)
            };
            bits[drop] = false;
        }
    }
    Ok((Assignment(bits), broken))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graphs::GraphFamily;
    use crate::hardware::build_chimera;
    use crate::qubo::{brute_force_qubo, mwis_to_qubo};

    #[test]
    fn k44_into_single_cell() {
        let g = GraphFamily::Bipartite { left: 4, right: 4 }.generate().unwrap();
        let c1 = build_chimera(1, &[]).unwrap();
        let (e, stats) = find_embedding(&g, &c1, 1, &EmbedOptions::default()).unwrap();
        assert_eq!(e.max_chain_len(), 1);
        assert_eq!(stats.qubits_used, 8);
        assert!(verify_embedding(&e, &g, &c1).is_ok());
    }

    #[test]
    fn k5_into_single_cell() {
        let g = GraphFamily::Complete(5).generate().unwrap();
        let c1 = build_chimera(1, &[]).unwrap();
        let (e, stats) = find_embedding(&g, &c1, 3, &EmbedOptions::default()).unwrap();
        assert!(verify_embedding(&e, &g, &c1).is_ok());
        assert_eq!(e.max_chain_len(), 2);
        assert!(stats.attempts >= 1 && stats.qubits_used >= 5);
    }

    #[test]
    fn pigeonhole_failure() {
        let g = GraphFamily::Complete(50).generate().unwrap();
        let c2 = build_chimera(2, &[]).unwrap();
        assert!(matches!(
            find_embedding(&g, &c2, 0, &EmbedOptions::default()),
            Err(EmbedError::NotFound { .. })
        ));
    }

    #[test]
    fn deterministic_given_seed() {
        let g = GraphFamily::Complete(8).generate().unwrap();
        let c = build_chimera(4, &[]).unwrap();
        let a = find_embedding(&g, &c, 9, &EmbedOptions::default()).unwrap();
        let b = find_embedding(&g, &c, 9, &EmbedOptions::default()).unwrap();
        assert_eq!(a.0, b.0);
        assert_eq!(a.1.work_ops, b.1.work_ops);
    }

    #[test]
    fn verifier_reports_each_condition() {
        let g = WeightedGraph::unit(3, [(0, 1), (1, 2)]).unwrap();
        let c = build_chimera(2, &[]).unwrap();
        // qubits 0 and 4 share a coupler inside cell (0,0); 8 is in cell (0,1).
        let shared = Embedding::from_chains(vec![vec![0], vec![0, 4], vec![5]]);
        let v = verify_embedding(&shared, &g, &c).unwrap_err();
        assert!(v.contains(&Violation::Overlap { qubit: 0, first: 0, second: 1 }));

        let split = Embedding::from_chains(vec![vec![4], vec![0, 1], vec![5]]);
        let v = verify_embedding(&split, &g, &c).unwrap_err();
        assert!(v.contains(&Violation::Disconnected { vertex: 1 }));

        let uncovered = Embedding::from_chains(vec![vec![4], vec![0], vec![1]]);
        let v = verify_embedding(&uncovered, &g, &c).unwrap_err();
        assert_eq!(v, vec![Violation::MissingCoupler { u: 1, v: 2 }]);

        let ok = Embedding::from_chains(vec![vec![4], vec![0], vec![5]]);
        assert!(verify_embedding(&ok, &g, &c).is_ok());

        let inactive = build_chimera(2, &[5]).unwrap();
        assert!(verify_embedding(&ok, &g, &inactive)
            .unwrap_err()
            .contains(&Violation::InactiveQubit { vertex: 2, qubit: 5 }));
    }

    #[test]
    fn identity_embedding_relabels() {
        let g = WeightedGraph::new(2, [(0, 1)], vec![0.3, 0.7]).unwrap();
        let c = build_chimera(1, &[]).unwrap();
        // logical 0 -> qubit 4 (right side), logical 1 -> qubit 0 (left side)
        let e = Embedding::from_chains(vec![vec![4], vec![0]]);
        let q = mwis_to_qubo(&g, Some(1.7)).unwrap();
        let pq = embed_qubo(&q, &e, &g, &c, None).unwrap();
        assert_eq!(pq.kind(), QuboKind::Embedded);
        assert_eq!(pq.dim(), 2);
        // compact index 0 is qubit 0 (logical 1), index 1 is qubit 4 (logical 0)
        assert_eq!(pq.get(0, 0), -0.7);
        assert_eq!(pq.get(1, 1), -0.3);
        assert_eq!(pq.get(0, 1), 1.7);
        assert_eq!(pq.len(), q.len());
    }

    #[test]
    fn two_qubit_chain_gadget() {
        let g = WeightedGraph::new(1, [], vec![1.0]).unwrap();
        let c = build_chimera(1, &[]).unwrap();
        let e = Embedding::from_chains(vec![vec![0, 4]]);
        let q = mwis_to_qubo(&g, None).unwrap();
        let strength = 5.0;
        let pq = embed_qubo(&q, &e, &g, &c, Some(strength)).unwrap();
        assert_eq!(pq.get(0, 0), strength - 0.5);
        assert_eq!(pq.get(1, 1), strength - 0.5);
        assert_eq!(pq.get(0, 1), -2.0 * strength);
        // Oracle: enumerate the four chain states.
        let energy = |bits: &str| pq.evaluate(&Assignment::from_bits(bits).unwrap()).unwrap();
        assert_eq!(energy("00"), 0.0);
        assert_eq!(energy("11"), -1.0);
        assert_eq!(energy("10"), strength - 0.5);
        assert_eq!(energy("01"), strength - 0.5);
        // each broken state can descend by flipping one bit to a unanimous state
        assert!(energy("10") > energy("00") && energy("10") > energy("11"));
    }

    #[test]
    fn embedded_edge_graph_decodes_to_logical_argmin() {
        let g = WeightedGraph::new(2, [(0, 1)], vec![0.3, 0.7]).unwrap();
        let c = build_chimera(2, &[]).unwrap();
        // chain 0 is two qubits joined by an intra-cell coupler
        let e = Embedding::from_chains(vec![vec![0, 4], vec![1]]);
        verify_embedding(&e, &g, &c).unwrap();
        let q = mwis_to_qubo(&g, Some(1.7)).unwrap();
        let pq = embed_qubo(&q, &e, &g, &c, None).unwrap();
        let (x, _) = brute_force_qubo(&pq, 24).unwrap();
        let (logical, broken) = unembed_sample(&x, &e, &g).unwrap();
        assert_eq!(broken, 0);
        assert_eq!(logical.bits(), "01");
    }

    #[test]
    fn unembed_majority_and_repair() {
        let g = WeightedGraph::new(3, [(0, 1), (1, 2)], vec![0.5, 0.9, 0.5]).unwrap();
        let e = Embedding::from_chains(vec![vec![0, 1, 2], vec![3], vec![10, 11]]);
        // qubit order 0 1 2 3 10 11
        let (x, broken) = unembed_sample(&Assignment::from_bits("110000").unwrap(), &e, &g).unwrap();
        assert_eq!((x.bits().as_str(), broken), ("100", 1));
        // tie in a 2-chain votes 0
        let (x, broken) = unembed_sample(&Assignment::from_bits("000010").unwrap(), &e, &g).unwrap();
        assert_eq!((x.bits().as_str(), broken), ("000", 1));
        // unanimous, all on: repair drops the lighter endpoints
        let (x, broken) = unembed_sample(&Assignment::from_bits("111111").unwrap(), &e, &g).unwrap();
        assert_eq!(broken, 0);
        assert_eq!(x.bits(), "010");
        assert!(g.is_independent(&x.ones()));
        // equal weights: the higher index goes
        let eq = WeightedGraph::new(3, [(0, 1), (1, 2)], vec![1.0, 1.0, 1.0]).unwrap();
        let (x, _) = unembed_sample(&Assignment::from_bits("111111").unwrap(), &e, &eq).unwrap();
        assert_eq!(x.bits(), "101");
        assert!(unembed_sample(&Assignment::zeros(5), &e, &g).is_err());
    }

    #[test]
    fn chain_file_round_trip_and_cache() {
        let g = GraphFamily::Cycle(6).generate().unwrap();
        let c = build_chimera(3, &[2]).unwrap();
        let (e, _) = find_embedding(&g, &c, 4, &EmbedOptions::default()).unwrap();
        assert_eq!(Embedding::parse(&e.render()).unwrap(), e);
        assert!(Embedding::parse("chain 0: 1\nchain 0: 2").is_err());
        assert!(Embedding::parse("chain 1: 1").is_err());

        let dir = tempfile::tempdir().unwrap();
        let cache = EmbeddingCache::new(dir.path());
        assert!(cache.load(&g, &c, 4).is_none());
        cache.store(&g, &c, 4, &e).unwrap();
        assert_eq!(cache.load(&g, &c, 4), Some(e));
        assert!(cache.load(&g, &c, 5).is_none());
    }
}
