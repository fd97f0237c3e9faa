//! Produce-Plentiful-Node: the augmenting-path and label-update engine,
//! in a round-by-round reference form and a heap-accelerated fast form.
//!
//! Both engines share the state predicates (Q, S̄, the tight component S
//! containing the sink, candidate selection, path search) and the anchor
//! target chooser, so they produce the same sequence of augmentation
//! events and the same final pair. They differ in the label-update
//! machinery: the reference form rescales S one event at a time,
//! recomputing the sets each round; the fast form freezes the phase,
//! advances a clock over an addressable min-heap of entry bounds, and
//! writes all labels once per phase.
//!
//! Label updates only ever divide labels inside S by a common factor, so
//! the stored relabelled flow never changes there; augmentations move
//! single units along tight residual paths.

use std::collections::{BTreeMap, VecDeque};

use num::{One, Signed, Zero};
use thiserror::Error;

use crate::model::{plenty_value, ArcIdx, Instance, LabelVector, NodeId, RelabeledFlow};
use crate::netflow::is_safe_labelling;
use crate::rational::{Int, Rational};
use crate::stats::{CheckMode, Stats};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PpnMode {
    Reference,
    Fast,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum TraceEvent {
    Path {
        start: NodeId,
        end: NodeId,
        /// (arc index, forward?) along the augmenting path.
        arcs: Vec<(ArcIdx, bool)>,
    },
    Null {
        node: NodeId,
    },
}

impl TraceEvent {
    pub fn to_line(&self) -> String {
        match self {
            TraceEvent::Path { start, end, arcs } => {
                let steps: Vec<String> = arcs
                    .iter()
                    .map(|(e, fwd)| format!("{}{}", if *fwd { '+' } else { '-' }, e))
                    .collect();
                format!("aug path {} {} {}", start, end, steps.join(","))
            }
            TraceEvent::Null { node } => format!("aug null {}", node),
        }
    }
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum PpnError {
    #[error("no node with nonzero demand: subroutine precondition violated")]
    NoImbalance,
    #[error("label update factor is not strictly greater than one or not finite")]
    AlphaStuck,
    #[error("iteration cap exceeded in produce-plentiful-node ({0})")]
    IterationCap(String),
    #[error("invariant violated: {0}")]
    Invariant(String),
}

#[derive(Debug, Error, PartialEq, Eq)]
#[error("no anchor multiple of 1/(4n^2) in the target window")]
pub struct NoAnchorInWindow;

/// Choose α in [lo, hi) such that μ/α is an integer multiple of 1/(4n²):
/// the smallest admissible anchor value for μ/α. `lo` may be +∞-free; the
/// window must be nonempty.
pub fn select_anchor_alpha(
    lo: &Rational,
    hi: &Rational,
    mu: &Rational,
    n: usize,
) -> Result<Rational, NoAnchorInWindow> {
    debug_assert!(lo < hi && lo.is_positive());
    let d = Rational::from_integer(Int::from(4 * (n as i64) * (n as i64)));
    // μ/α ∈ (μ/hi, μ/lo]; take the smallest grid multiple inside.
    let low_open = mu / hi;
    let high_closed = mu / lo;
    let k = (&low_open * &d).floor() + Rational::one();
    let target = k / &d;
    if target <= high_closed {
        debug_assert!(target > low_open);
        Ok(mu / target)
    } else {
        Err(NoAnchorInWindow)
    }
}

/// The α_i window for i ∈ S∩V⁻: post-update excess lands in [1, 2).
pub fn alpha_window_vminus(net: &Rational, bmu: &Rational) -> (Rational, Rational) {
    debug_assert!(bmu.is_negative());
    let lo = (Rational::one() - net) / -bmu;
    let hi = (Rational::from_integer(Int::from(2)) - net) / -bmu;
    (lo, hi)
}

/// The α_i window for i ∈ S∩V⁺: post-update b^μ lands in [plenty, plenty+1).
pub fn alpha_window_vplus(bmu: &Rational, plenty: &Int) -> (Rational, Rational) {
    debug_assert!(bmu.is_positive());
    let p = Rational::from_integer(plenty.clone());
    let lo = &p / bmu;
    let hi = (p + Rational::one()) / bmu;
    (lo, hi)
}

pub struct PpnConfig {
    pub mode: PpnMode,
    pub anchors: bool,
    pub checks: CheckMode,
    /// Node count of the instance this Algorithm-1 run started from;
    /// fixes the plenty thresholds, the anchor grid 1/(4n²), and the
    /// potential bounds for the whole run.
    pub n_run: usize,
}

/// Committed label target for a node in S: the label value at which its
/// stopping event fires.
#[derive(Debug, Clone)]
struct Commit {
    target: Rational,
    fallback: bool,
}

struct Engine<'a> {
    inst: &'a Instance,
    cfg: &'a PpnConfig,
    nodes: Vec<NodeId>,
    sink: usize,
    demand: Vec<Rational>,
    sign: Vec<i8>,
    tail: Vec<usize>,
    head: Vec<usize>,
    gain: Vec<Rational>,
    in_arcs: Vec<Vec<ArcIdx>>,
    out_arcs: Vec<Vec<ArcIdx>>,
    plenty: Vec<Int>,
    mu: Vec<Rational>,
    flow: Vec<Int>,
    net: Vec<Int>,
    /// Label untouched since the call started.
    pristine: Vec<bool>,
    /// Last label write for this node fired a fallback (non-anchor)
    /// committed target.
    fallback_ok: Vec<bool>,
    /// Within-call Lemma-11 persistence: V⁻ nodes seen non-deficient.
    nondeficit_seen: Vec<bool>,
    psi_last: Rational,
    psi_start: Rational,
    augs_this_call: u64,
    phases_since_aug: u64,
    segment_ops: u64,
    trace: Vec<TraceEvent>,
    alphas: Vec<Rational>,
    stats: Stats,
}

struct PhaseSets {
    q: Vec<bool>,
    sbar: Vec<bool>,
    /// Next hop toward Q: (arc, forward, next node).
    parent: Vec<Option<(ArcIdx, bool, usize)>>,
    /// Component id within S̄ under undirected tight adjacency.
    comp: Vec<usize>,
    /// The component of the sink.
    s: Vec<bool>,
}

struct UnionFind {
    parent: Vec<usize>,
}

impl UnionFind {
    fn new(n: usize) -> Self {
        UnionFind { parent: (0..n).collect() }
    }
    fn find(&mut self, x: usize) -> usize {
        if self.parent[x] != x {
            let r = self.find(self.parent[x]);
            self.parent[x] = r;
        }
        self.parent[x]
    }
    fn union(&mut self, a: usize, b: usize) {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra != rb {
            self.parent[ra.max(rb)] = ra.min(rb);
        }
    }
}

/// Addressable min-heap keyed by rational entry bounds, node-id ties.
struct MinHeap {
    key: Vec<Option<Rational>>,
    heap: Vec<usize>,
    pos: Vec<usize>,
}

impl MinHeap {
    fn new(n: usize) -> Self {
        MinHeap { key: vec![None; n], heap: Vec::new(), pos: vec![usize::MAX; n] }
    }
    fn less(&self, a: usize, b: usize) -> bool {
        let (ka, kb) = (self.key[a].as_ref().unwrap(), self.key[b].as_ref().unwrap());
        ka < kb || (ka == kb && a < b)
    }
    fn sift_up(&mut self, mut i: usize) {
        while i > 0 {
            let p = (i - 1) / 2;
            if self.less(self.heap[i], self.heap[p]) {
                self.heap.swap(i, p);
                self.pos[self.heap[i]] = i;
                self.pos[self.heap[p]] = p;
                i = p;
            } else {
                break;
            }
        }
    }
    fn sift_down(&mut self, mut i: usize) {
        loop {
            let (l, r) = (2 * i + 1, 2 * i + 2);
            let mut best = i;
            if l < self.heap.len() && self.less(self.heap[l], self.heap[best]) {
                best = l;
            }
            if r < self.heap.len() && self.less(self.heap[r], self.heap[best]) {
                best = r;
            }
            if best == i {
                return;
            }
            self.heap.swap(i, best);
            self.pos[self.heap[i]] = i;
            self.pos[self.heap[best]] = best;
            i = best;
        }
    }
    /// Insert or decrease the key of `v`.
    fn relax(&mut self, v: usize, key: Rational) -> bool {
        match &self.key[v] {
            Some(old) if *old <= key => false,
            Some(_) => {
                self.key[v] = Some(key);
                self.sift_up(self.pos[v]);
                true
            }
            None => {
                self.key[v] = Some(key);
                self.pos[v] = self.heap.len();
                self.heap.push(v);
                self.sift_up(self.pos[v]);
                true
            }
        }
    }
    fn peek(&self) -> Option<(&Rational, usize)> {
        self.heap.first().map(|&v| (self.key[v].as_ref().unwrap(), v))
    }
    fn pop(&mut self) -> Option<(Rational, usize)> {
        let v = *self.heap.first()?;
        let last = self.heap.pop().unwrap();
        if last != v {
            self.heap[0] = last;
            self.pos[last] = 0;
            self.sift_down(0);
        }
        self.pos[v] = usize::MAX;
        Some((self.key[v].take().unwrap(), v))
    }
}

pub struct PpnReport {
    pub plentiful: NodeId,
    pub trace: Vec<TraceEvent>,
    pub stats: Stats,
    /// Applied update factors (per round in reference mode, per phase in
    /// fast mode); exposed for tests.
    pub alphas: Vec<Rational>,
}

/// Run Produce-Plentiful-Node until some node satisfies |b^μ_i| ≥
/// plenty(i). Mutates the labels and the relabelled flow in place.
pub fn produce_plentiful_node(
    inst: &Instance,
    mu: &mut LabelVector,
    flow: &mut RelabeledFlow,
    cfg: &PpnConfig,
) -> Result<PpnReport, PpnError> {
    let mut eng = Engine::new(inst, mu, flow, cfg)?;
    let plentiful = eng.run()?;
    for (k, &i) in eng.nodes.clone().iter().enumerate() {
        mu.set(i, eng.mu[k].clone());
    }
    flow.values = eng.flow.clone();
    Ok(PpnReport {
        plentiful: eng.nodes[plentiful],
        trace: std::mem::take(&mut eng.trace),
        stats: std::mem::take(&mut eng.stats),
        alphas: std::mem::take(&mut eng.alphas),
    })
}

impl<'a> Engine<'a> {
    fn new(
        inst: &'a Instance,
        mu: &LabelVector,
        flow: &RelabeledFlow,
        cfg: &'a PpnConfig,
    ) -> Result<Self, PpnError> {
        let nodes: Vec<NodeId> = inst.nodes().to_vec();
        let idx: BTreeMap<NodeId, usize> =
            nodes.iter().enumerate().map(|(k, &i)| (i, k)).collect();
        let n = nodes.len();
        let sink = idx[&inst.sink()];
        let mut demand = vec![Rational::zero(); n];
        let mut sign = vec![0i8; n];
        for (k, &i) in nodes.iter().enumerate() {
            demand[k] = inst.demand(i);
            sign[k] = if demand[k].is_negative() {
                -1
            } else if demand[k].is_positive() {
                1
            } else {
                0
            };
        }
        if !sign.iter().any(|&s| s != 0) {
            return Err(PpnError::NoImbalance);
        }
        let m = inst.arc_count();
        let mut tail = vec![0usize; m];
        let mut head = vec![0usize; m];
        let mut gain = Vec::with_capacity(m);
        let mut in_arcs = vec![Vec::new(); n];
        let mut out_arcs = vec![Vec::new(); n];
        for (e, a) in inst.arcs().iter().enumerate() {
            tail[e] = idx[&a.tail];
            head[e] = idx[&a.head];
            gain.push(a.gain.clone());
            out_arcs[tail[e]].push(e);
            in_arcs[head[e]].push(e);
        }
        let plenty = (0..n)
            .map(|k| plenty_value(cfg.n_run, in_arcs[k].len() + out_arcs[k].len()))
            .collect();
        let mu_dense: Vec<Rational> = nodes.iter().map(|&i| mu.get(i).clone()).collect();
        let flow_dense = flow.values.clone();
        let mut net = vec![Int::zero(); n];
        for e in 0..m {
            if flow_dense[e].is_positive() {
                net[head[e]] += &flow_dense[e];
                net[tail[e]] -= &flow_dense[e];
            }
        }
        let mut eng = Engine {
            inst,
            cfg,
            nodes,
            sink,
            demand,
            sign,
            tail,
            head,
            gain,
            in_arcs,
            out_arcs,
            plenty,
            mu: mu_dense,
            flow: flow_dense,
            net,
            pristine: vec![true; n],
            fallback_ok: vec![false; n],
            nondeficit_seen: vec![false; n],
            psi_last: Rational::zero(),
            psi_start: Rational::zero(),
            augs_this_call: 0,
            phases_since_aug: 0,
            segment_ops: 0,
            trace: Vec::new(),
            alphas: Vec::new(),
            stats: Stats::default(),
        };
        eng.psi_start = eng.psi();
        eng.psi_last = eng.psi_start.clone();
        eng.check_state("call entry")?;
        Ok(eng)
    }

    fn n(&self) -> usize {
        self.nodes.len()
    }

    fn bmu(&self, k: usize) -> Rational {
        &self.demand[k] / &self.mu[k]
    }

    fn excess(&self, k: usize) -> Rational {
        Rational::from_integer(self.net[k].clone()) - self.bmu(k)
    }

    fn is_deficit(&self, k: usize) -> bool {
        Rational::from_integer(self.net[k].clone()) < self.bmu(k)
    }

    fn relabeled_gain(&self, e: ArcIdx) -> Rational {
        &self.gain[e] * &self.mu[self.tail[e]] / &self.mu[self.head[e]]
    }

    fn is_tight(&self, e: ArcIdx) -> bool {
        self.relabeled_gain(e).is_one()
    }

    fn psi(&self) -> Rational {
        let mut psi = Rational::zero();
        for k in 0..self.n() {
            if self.sign[k] < 0 {
                psi -= self.bmu(k);
            }
        }
        psi
    }

    fn is_anchor(&self, k: usize) -> bool {
        let d = Rational::from_integer(Int::from(
            4 * (self.cfg.n_run as i64) * (self.cfg.n_run as i64),
        ));
        (&self.mu[k] * d).is_integer()
    }

    fn admissible(&self, k: usize) -> bool {
        !self.cfg.anchors || self.pristine[k] || self.fallback_ok[k] || self.is_anchor(k)
    }

    fn is_plentiful(&self, k: usize) -> bool {
        if k == self.sink || self.sign[k] == 0 {
            return false;
        }
        self.bmu(k).abs() >= Rational::from_integer(self.plenty[k].clone())
    }

    fn admissible_plentiful(&mut self) -> Option<usize> {
        let mut fallback = None;
        for k in 0..self.n() {
            if self.is_plentiful(k) {
                if self.admissible(k) {
                    return Some(k);
                }
                fallback = Some(k);
            }
        }
        if fallback.is_some() {
            // Keep scaling until the plentiful node's own event anchors
            // it; counted so the acceptance stats surface how often the
            // discipline delays a return.
            self.stats.nonanchor_returns += 1;
        }
        None
    }

    fn compute_sets(&mut self) -> PhaseSets {
        let n = self.n();
        let m = self.gain.len();
        let mut q = vec![false; n];
        q[self.sink] = true;
        for k in 0..n {
            if k != self.sink && self.is_deficit(k) {
                q[k] = true;
            }
        }
        // Backward BFS from Q over tight residual arcs.
        let mut sbar = q.clone();
        let mut parent: Vec<Option<(ArcIdx, bool, usize)>> = vec![None; n];
        let mut queue: VecDeque<usize> = (0..n).filter(|&k| q[k]).collect();
        while let Some(w) = queue.pop_front() {
            self.segment_ops += self.in_arcs[w].len() as u64 + self.out_arcs[w].len() as u64;
            for &e in &self.in_arcs[w] {
                let x = self.tail[e];
                if !sbar[x] && self.is_tight(e) {
                    sbar[x] = true;
                    parent[x] = Some((e, true, w));
                    queue.push_back(x);
                }
            }
            for &e in &self.out_arcs[w] {
                let x = self.head[e];
                if !sbar[x] && self.flow[e].is_positive() {
                    sbar[x] = true;
                    parent[x] = Some((e, false, w));
                    queue.push_back(x);
                }
            }
        }
        // Undirected tight components within S̄.
        let mut uf = UnionFind::new(n);
        for e in 0..m {
            if sbar[self.tail[e]] && sbar[self.head[e]] && self.is_tight(e) {
                uf.union(self.tail[e], self.head[e]);
                self.segment_ops += 1;
            }
        }
        let comp: Vec<usize> = (0..n)
            .map(|k| if sbar[k] { uf.find(k) } else { usize::MAX })
            .collect();
        let sink_comp = comp[self.sink];
        let s: Vec<bool> = (0..n).map(|k| sbar[k] && comp[k] == sink_comp).collect();
        if self.cfg.checks == CheckMode::Full {
            for e in 0..m {
                if s[self.tail[e]] && !s[self.head[e]] {
                    assert!(
                        self.flow[e].is_zero(),
                        "flow leaves S on arc {e}: tight reverse arc would enter S"
                    );
                }
            }
        }
        PhaseSets { q, sbar, parent, comp, s }
    }

    /// Lowest-id admissible start node for a path augmentation.
    fn pick_candidate(&self, sets: &PhaseSets) -> Option<usize> {
        let one = Rational::one();
        (0..self.n())
            .find(|&k| {
                self.sign[k] < 0
                    && sets.sbar[k]
                    && self.excess(k) >= one
                    && self.admissible(k)
            })
    }

    fn augment(&mut self, start: usize, sets: &PhaseSets) -> Result<(), PpnError> {
        let mut path = Vec::new();
        let mut v = start;
        while !sets.q[v] {
            let (e, fwd, next) = sets.parent[v].expect("S̄ member has a hop toward Q");
            path.push((e, fwd));
            if fwd {
                self.flow[e] += 1;
            } else {
                self.flow[e] -= 1;
                if self.flow[e].is_negative() {
                    return Err(PpnError::Invariant(format!(
                        "negative flow on arc {e} after reverse augmentation"
                    )));
                }
            }
            v = next;
        }
        let end = v;
        self.net[start] -= 1;
        self.net[end] += 1;
        self.stats.path_augmentations += 1;
        if self.sign[end] < 0 {
            self.stats.unhelpful_augmentations += 1;
        } else {
            self.stats.helpful_augmentations += 1;
        }
        self.trace.push(TraceEvent::Path {
            start: self.nodes[start],
            end: self.nodes[end],
            arcs: path,
        });
        self.augs_this_call += 1;
        self.end_segment();
        self.observe_labels();
        self.check_state("after path augmentation")?;
        Ok(())
    }

    fn end_segment(&mut self) {
        self.phases_since_aug = 0;
        if self.cfg.mode == PpnMode::Fast {
            if self.segment_ops > self.stats.max_ops_per_segment {
                self.stats.max_ops_per_segment = self.segment_ops;
            }
        }
        self.segment_ops = 0;
    }

    fn observe_labels(&mut self) {
        for k in 0..self.n() {
            let mu = self.mu[k].clone();
            self.stats.observe_label(&mu);
        }
    }

    /// Committed target label for a node entering the scaled set, chosen
    /// from its stopping window; `special` marks a non-admissible node
    /// that already has excess ≥ 1 and only needs re-anchoring.
    fn choose_commit(&mut self, k: usize) -> Option<Commit> {
        let bmu = self.bmu(k);
        let net = Rational::from_integer(self.net[k].clone());
        if self.sign[k] < 0 {
            let excess = &net - &bmu;
            if excess >= Rational::one() {
                if self.admissible(k) {
                    // Ready to augment as-is; the phase stops at its
                    // entry and the outer loop drains it.
                    return None;
                }
                // Deferred candidate: re-anchor strictly below the
                // current label while keeping the excess under 2.
                let hi = (Rational::from_integer(Int::from(2)) - &net) / -&bmu;
                debug_assert!(hi > Rational::one());
                match select_anchor_alpha(&Rational::one(), &hi, &self.mu[k], self.cfg.n_run)
                {
                    Ok(alpha) => {
                        let target = &self.mu[k] / alpha;
                        if target < self.mu[k] {
                            return Some(Commit { target, fallback: false });
                        }
                        // α = 1 would not move the label; treat as fired.
                        self.stats.anchor_fallbacks += 1;
                        self.fallback_ok[k] = true;
                        None
                    }
                    Err(NoAnchorInWindow) => {
                        self.stats.anchor_fallbacks += 1;
                        self.fallback_ok[k] = true;
                        None
                    }
                }
            } else {
                let (lo, hi) = alpha_window_vminus(&net, &bmu);
                Some(self.commit_in_window(k, lo, hi))
            }
        } else if self.sign[k] > 0 {
            let (lo, hi) = alpha_window_vplus(&bmu, &self.plenty[k].clone());
            Some(self.commit_in_window(k, lo, hi))
        } else {
            None
        }
    }

    fn commit_in_window(&mut self, k: usize, lo: Rational, hi: Rational) -> Commit {
        debug_assert!(lo > Rational::one(), "window low end must exceed 1");
        if self.cfg.anchors {
            match select_anchor_alpha(&lo, &hi, &self.mu[k], self.cfg.n_run) {
                Ok(alpha) => {
                    return Commit { target: &self.mu[k] / alpha, fallback: false };
                }
                Err(NoAnchorInWindow) => {
                    self.stats.anchor_fallbacks += 1;
                }
            }
        }
        Commit { target: &self.mu[k] / lo, fallback: true }
    }

    /// One reference-mode label-update phase: apply rounds α = min(α_0,
    /// committed events, null crossings) until a stopping event fires.
    fn scale_reference(&mut self) -> Result<(), PpnError> {
        let mut commits: BTreeMap<usize, Commit> = BTreeMap::new();
        let mut scaled_this_phase = vec![false; self.n()];
        let mut rounds = 0usize;
        loop {
            rounds += 1;
            if rounds > self.n() + 2 {
                return Err(PpnError::IterationCap(
                    "label-update rounds exceeded n + 2 within one phase".into(),
                ));
            }
            let sets = self.compute_sets();
            for k in 0..self.n() {
                if sets.s[k] && !commits.contains_key(&k) {
                    if let Some(c) = self.choose_commit(k) {
                        commits.insert(k, c);
                    }
                }
            }
            // A node whose label is still at its phase-entry value and
            // that can start an augmentation stops the phase right at
            // its entry; the outer loop drains it. Nodes whose excess
            // crossed 1 while being rescaled instead wait for their
            // committed stopping event.
            let one = Rational::one();
            let entry_candidate = (0..self.n()).any(|k| {
                self.sign[k] < 0
                    && sets.sbar[k]
                    && !scaled_this_phase[k]
                    && !commits.contains_key(&k)
                    && self.excess(k) >= one
                    && self.admissible(k)
            });
            if entry_candidate {
                return Ok(());
            }
            // α_0: first entering arc to become tight.
            let mut alpha0: Option<Rational> = None;
            for e in 0..self.gain.len() {
                if sets.s[self.head[e]] && !sets.s[self.tail[e]] {
                    let inv = Rational::one() / self.relabeled_gain(e);
                    if alpha0.as_ref().map_or(true, |a| inv < *a) {
                        alpha0 = Some(inv);
                    }
                }
            }
            // Stopping candidates: committed targets and null crossings.
            let mut stop: Option<Rational> = None;
            let consider = |cand: Rational, stop: &mut Option<Rational>| {
                if stop.as_ref().map_or(true, |s| cand < *s) {
                    *stop = Some(cand);
                }
            };
            for (&k, c) in &commits {
                if sets.s[k] {
                    consider(&self.mu[k] / &c.target, &mut stop);
                }
            }
            for k in 0..self.n() {
                if sets.s[k] && self.sign[k] < 0 && self.is_deficit(k) {
                    let r = Rational::from_integer(self.net[k].clone()) / self.bmu(k);
                    consider(r, &mut stop);
                }
            }
            let alpha = match (&alpha0, &stop) {
                (Some(a0), Some(st)) => a0.min(st).clone(),
                (Some(a0), None) => a0.clone(),
                (None, Some(st)) => st.clone(),
                (None, None) => return Err(PpnError::AlphaStuck),
            };
            if alpha <= Rational::one() {
                return Err(PpnError::AlphaStuck);
            }
            let stopped = stop.as_ref() == Some(&alpha);

            // Record pre-scale deficits for null detection.
            let deficits: Vec<usize> = (0..self.n())
                .filter(|&k| sets.s[k] && self.sign[k] < 0 && self.is_deficit(k))
                .collect();
            for k in 0..self.n() {
                if sets.s[k] {
                    self.mu[k] /= &alpha;
                    self.pristine[k] = false;
                    self.fallback_ok[k] = false;
                    scaled_this_phase[k] = true;
                }
            }
            self.alphas.push(alpha.clone());
            self.stats.label_updates += 1;

            // Fired commitments re-arm admissibility for fallbacks.
            for (&k, c) in &commits {
                if sets.s[k] && self.mu[k] == c.target {
                    if c.fallback {
                        self.fallback_ok[k] = true;
                    } else {
                        debug_assert!(self.is_anchor(k));
                    }
                }
            }
            let mut crossed: Vec<usize> = deficits
                .into_iter()
                .filter(|&k| !self.is_deficit(k))
                .collect();
            crossed.sort_unstable();
            for k in crossed {
                self.nondeficit_seen[k] = true;
                self.stats.null_augmentations += 1;
                self.stats.unhelpful_augmentations += 1;
                self.trace.push(TraceEvent::Null { node: self.nodes[k] });
                self.augs_this_call += 1;
                self.end_segment();
            }
            self.check_label_update(&sets.s, "reference label update")?;
            if stopped {
                return Ok(());
            }
        }
    }

    /// One fast-mode phase: freeze the labels, advance the clock through
    /// entry events on the heap until the earliest stopping event λ, then
    /// write all labels once.
    fn scale_fast(&mut self, sets: &PhaseSets) -> Result<(), PpnError> {
        let n = self.n();
        // Entry clock per node; finite for members of the scaled set.
        let mut beta: Vec<Option<Rational>> = (0..n)
            .map(|k| if sets.s[k] { Some(Rational::one()) } else { None })
            .collect();
        let mut in_s: Vec<bool> = sets.s.clone();
        let mut commits: BTreeMap<usize, (Commit, Rational)> = BTreeMap::new(); // + stop clock
        let mut nulls: BTreeMap<usize, Rational> = BTreeMap::new(); // crossing clocks
        let mut lambda: Option<Rational> = None;
        let mut entry_candidate_stop: Option<Rational> = None;

        let note_stop = |cand: Rational, lambda: &mut Option<Rational>| {
            if lambda.as_ref().map_or(true, |l| cand < *l) {
                *lambda = Some(cand);
            }
        };

        // Seed commitments and null clocks for initial members of S.
        let members: Vec<usize> = (0..n).filter(|&k| in_s[k]).collect();
        for k in members {
            self.segment_ops += 1;
            if let Some(c) = self.choose_commit(k) {
                let clock = &self.mu[k] / &c.target;
                note_stop(clock.clone(), &mut lambda);
                commits.insert(k, (c, clock));
            } else if self.sign[k] < 0 && self.excess(k) >= Rational::one() {
                // Deferred candidate that became admissible on the spot.
                note_stop(Rational::one(), &mut entry_candidate_stop);
            }
            if self.sign[k] < 0 && self.is_deficit(k) {
                let clock = Rational::from_integer(self.net[k].clone()) / self.bmu(k);
                note_stop(clock.clone(), &mut lambda);
                nulls.insert(k, clock);
            }
        }

        let mut heap = MinHeap::new(n);
        for e in 0..self.gain.len() {
            self.segment_ops += 1;
            if in_s[self.head[e]] && !in_s[self.tail[e]] {
                let g = self.relabeled_gain(e);
                debug_assert!(g < Rational::one(), "tight arc entering S");
                heap.relax(self.tail[e], Rational::one() / g);
            }
        }

        let effective_lambda = |lambda: &Option<Rational>, ecs: &Option<Rational>| {
            match (lambda, ecs) {
                (Some(l), Some(e)) => Some(l.min(e).clone()),
                (Some(l), None) => Some(l.clone()),
                (None, Some(e)) => Some(e.clone()),
                (None, None) => None,
            }
        };

        let clock_limit;
        loop {
            let lam = effective_lambda(&lambda, &entry_candidate_stop);
            match heap.peek() {
                None => {
                    clock_limit = lam.ok_or(PpnError::AlphaStuck)?;
                    break;
                }
                Some((key, _)) => {
                    if let Some(l) = &lam {
                        if key > l {
                            clock_limit = l.clone();
                            break;
                        }
                    }
                }
            }
            let (clock, k) = heap.pop().unwrap();
            self.segment_ops += 1;
            // Wholesale entry of k's undirected tight component of S̄.
            let group: Vec<usize> = if sets.sbar[k] {
                (0..n).filter(|&x| !in_s[x] && sets.comp[x] == sets.comp[k]).collect()
            } else {
                vec![k]
            };
            for &x in &group {
                self.segment_ops += 1;
                in_s[x] = true;
                beta[x] = Some(clock.clone());
                if let Some(c) = self.choose_commit(x) {
                    let stop_clock = &clock * &self.mu[x] / &c.target;
                    note_stop(stop_clock.clone(), &mut lambda);
                    commits.insert(x, (c, stop_clock));
                } else if self.sign[x] < 0
                    && self.excess(x) >= Rational::one()
                {
                    // Entering admissible candidate: stop at its entry.
                    note_stop(clock.clone(), &mut entry_candidate_stop);
                }
                if self.sign[x] < 0 && self.is_deficit(x) {
                    let cross =
                        &clock * Rational::from_integer(self.net[x].clone()) / self.bmu(x);
                    note_stop(cross.clone(), &mut lambda);
                    nulls.insert(x, cross);
                }
            }
            for &x in &group {
                for &e in &self.in_arcs[x] {
                    self.segment_ops += 1;
                    let i = self.tail[e];
                    if !in_s[i] {
                        let cand = &clock / self.relabeled_gain(e);
                        heap.relax(i, cand);
                    }
                }
                if self.cfg.checks == CheckMode::Full {
                    for &e in &self.out_arcs[x] {
                        assert!(
                            in_s[self.head[e]] || self.flow[e].is_zero(),
                            "flow leaves the scaled set"
                        );
                    }
                }
            }
        }

        if clock_limit <= Rational::one() {
            // A pending admissible candidate at entry clock 1 means the
            // phase does no scaling; the next phase drains it.
            if entry_candidate_stop.as_ref() == Some(&Rational::one()) {
                return Ok(());
            }
            return Err(PpnError::AlphaStuck);
        }

        // Write the labels once: each member spent clock/β inside.
        let mut scaled = vec![false; n];
        for k in 0..n {
            if let Some(b) = &beta[k] {
                if *b < clock_limit {
                    self.mu[k] = &self.mu[k] * b / &clock_limit;
                    self.pristine[k] = false;
                    self.fallback_ok[k] = false;
                    scaled[k] = true;
                }
            }
        }
        self.alphas.push(clock_limit.clone());
        self.stats.label_updates += 1;

        for (&k, (c, stop_clock)) in &commits {
            if *stop_clock == clock_limit {
                debug_assert_eq!(self.mu[k], c.target);
                if c.fallback {
                    self.fallback_ok[k] = true;
                } else {
                    debug_assert!(self.is_anchor(k));
                }
            }
        }
        let mut crossed: Vec<usize> = nulls
            .iter()
            .filter(|(_, clock)| **clock == clock_limit)
            .map(|(&k, _)| k)
            .collect();
        crossed.sort_unstable();
        for k in crossed {
            debug_assert!(!self.is_deficit(k));
            self.nondeficit_seen[k] = true;
            self.stats.null_augmentations += 1;
            self.stats.unhelpful_augmentations += 1;
            self.trace.push(TraceEvent::Null { node: self.nodes[k] });
            self.augs_this_call += 1;
            self.end_segment();
        }
        self.check_label_update(&scaled, "fast label update")?;
        Ok(())
    }

    fn run(&mut self) -> Result<usize, PpnError> {
        let n = self.n();
        let m = self.gain.len().max(1);
        let aug_cap = 10 * (3 * n * 2 * m + 3 * n * n + 3 * n) as u64 + 40 * n as u64 + 100;
        loop {
            if self.augs_this_call > aug_cap {
                return Err(PpnError::IterationCap(format!(
                    "more than {aug_cap} augmentations in one call"
                )));
            }
            if self.phases_since_aug > 6 * n as u64 + 20 {
                return Err(PpnError::IterationCap(
                    "label-update phases between augmentations exceeded 6n + 20".into(),
                ));
            }
            if let Some(p) = self.admissible_plentiful() {
                self.observe_labels();
                self.end_segment();
                self.check_return()?;
                return Ok(p);
            }
            self.phases_since_aug += 1;
            let sets = self.compute_sets();
            if let Some(k) = self.pick_candidate(&sets) {
                self.augment(k, &sets)?;
                continue;
            }
            match self.cfg.mode {
                PpnMode::Reference => self.scale_reference()?,
                PpnMode::Fast => self.scale_fast(&sets)?,
            }
        }
    }

    fn check_return(&mut self) -> Result<(), PpnError> {
        if self.cfg.checks != CheckMode::Full {
            return Ok(());
        }
        let psi_now = self.psi();
        let delta = &psi_now - &self.psi_start;
        let floor = Rational::from_integer(Int::from(self.augs_this_call as i64))
            - Rational::from_integer(Int::from(4 * self.cfg.n_run as i64));
        if delta < floor.clone().min(Rational::zero()) {
            return Err(PpnError::Invariant(format!(
                "Psi increase {delta} below min(r - 4n, 0) = {}",
                floor.min(Rational::zero())
            )));
        }
        // Lemma 13's per-call bound concerns the state the subroutine
        // produced; a void call (plentiful node already present) passes
        // the input through unchanged.
        if self.stats.label_updates == 0 && self.augs_this_call == 0 {
            return Ok(());
        }
        let n_run = self.cfg.n_run as i64;
        for k in 0..self.n() {
            if self.sign[k] < 0 {
                let bound = Rational::from_integer(Int::from(
                    3 * n_run * (self.in_arcs[k].len() + self.out_arcs[k].len()) as i64
                        + 3 * n_run
                        + 3,
                ));
                if self.bmu(k).abs() >= bound {
                    return Err(PpnError::Invariant(format!(
                        "|b^mu| of node {} reached {} >= 3nd+3n+3",
                        self.nodes[k],
                        self.bmu(k).abs()
                    )));
                }
            }
        }
        Ok(())
    }

    fn check_label_update(&mut self, scaled: &[bool], what: &str) -> Result<(), PpnError> {
        if self.cfg.checks != CheckMode::Full {
            return Ok(());
        }
        // Excess of scaled V⁻ nodes stays at most 2 after the update.
        let two = Rational::from_integer(Int::from(2));
        for k in 0..self.n() {
            if scaled[k] && self.sign[k] < 0 && self.excess(k) > two {
                return Err(PpnError::Invariant(format!(
                    "{what}: excess of node {} above 2",
                    self.nodes[k]
                )));
            }
        }
        // Safety must survive every label update.
        let mu = self.labels_view();
        if is_safe_labelling(self.inst, &mu).is_err() {
            return Err(PpnError::Invariant(format!(
                "{what}: labelling became unsafe"
            )));
        }
        self.check_state(what)
    }

    fn labels_view(&self) -> LabelVector {
        LabelVector::from_map(
            self.nodes
                .iter()
                .enumerate()
                .map(|(k, &i)| (i, self.mu[k].clone()))
                .collect(),
        )
    }

    fn check_state(&mut self, what: &str) -> Result<(), PpnError> {
        if self.cfg.checks != CheckMode::Full {
            return Ok(());
        }
        let fail = |msg: String| Err(PpnError::Invariant(format!("{what}: {msg}")));
        // Fitting pair and integral nonnegative relabelled flow.
        for e in 0..self.gain.len() {
            if self.flow[e].is_negative() {
                return fail(format!("negative relabelled flow on arc {e}"));
            }
            let g = self.relabeled_gain(e);
            if g > Rational::one() {
                return fail(format!("dual infeasible on arc {e}"));
            }
            if self.flow[e].is_positive() && !g.is_one() {
                return fail(format!("flow on non-tight arc {e}"));
            }
        }
        let n_run = self.cfg.n_run as i64;
        let (mut xi, mut phi) = (Rational::zero(), Rational::zero());
        let two = Rational::from_integer(Int::from(2));
        for k in 0..self.n() {
            if k == self.sink {
                continue;
            }
            let excess = self.excess(k);
            xi += if excess > two { excess.clone() } else { two.clone() };
            if self.sign[k] < 0 {
                phi += &excess;
                // Lemma 11: net flow stays above b^μ − 1, and once a V⁻
                // node is non-deficient it stays so for the whole call.
                if excess <= -Rational::one() {
                    return fail(format!("node {} fell to excess ≤ −1", self.nodes[k]));
                }
                if self.nondeficit_seen[k] && self.is_deficit(k) {
                    return fail(format!("node {} regressed into deficit", self.nodes[k]));
                }
                if !self.is_deficit(k) {
                    self.nondeficit_seen[k] = true;
                }
            }
        }
        if xi >= Rational::from_integer(Int::from(2 * n_run - 1)) {
            return fail(format!("Xi = {xi} not below 2n−1"));
        }
        if phi >= Rational::from_integer(Int::from(2 * n_run))
            || phi <= -Rational::from_integer(Int::from(n_run))
        {
            return fail(format!("Phi = {phi} outside (−n, 2n)"));
        }
        let psi = self.psi();
        if psi < self.psi_last {
            return fail(format!("Psi decreased from {} to {psi}", self.psi_last));
        }
        self.psi_last = psi.clone();
        self.stats.psi_trace.push(psi);
        self.stats.xi_trace.push(xi);
        Ok(())
    }
}
