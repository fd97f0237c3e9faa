//! Domain types for generalized flow instances: the instance itself,
//! dual labels, relabelled flows, potentials, and the fitting-pair
//! predicates the algorithm maintains.

use std::collections::{BTreeMap, BTreeSet, VecDeque};
use std::fmt::Write as _;

use num::{One, Signed, Zero};
use thiserror::Error;

use crate::rational::{big, Int, Rational};

/// External 1-based node identifier, stable across contractions.
pub type NodeId = u32;
/// Index into an instance's arc list.
pub type ArcIdx = usize;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Arc {
    pub tail: NodeId,
    pub head: NodeId,
    pub gain: Rational,
    /// Arc index in the instance this run started from; carried through
    /// contraction remappings.
    pub origin: ArcIdx,
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum ParseError {
    #[error("line {0}: malformed: {1}")]
    Malformed(usize, String),
    #[error("line {0}: nonpositive gain")]
    NonpositiveGain(usize),
    #[error("line {0}: parallel arc {1}->{2}")]
    ParallelArc(usize, NodeId, NodeId),
    #[error("line {0}: self-loop at node {1}")]
    SelfLoop(usize, NodeId),
    #[error("line {0}: demand on sink node {1}")]
    DemandOnSink(usize, NodeId),
    #[error("graph is not connected (node {0} unreachable in the undirected sense)")]
    Disconnected(NodeId),
    #[error("missing problem line")]
    MissingHeader,
    #[error("missing sink line")]
    MissingSink,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Instance {
    nodes: Vec<NodeId>,
    sink: NodeId,
    arcs: Vec<Arc>,
    /// Nonzero demands only; integral at parse time, possibly rational
    /// after demand merges during contraction.
    demands: BTreeMap<NodeId, Rational>,
    /// Strict upper bound on |b_i| and on reduced gain numerators and
    /// denominators of the instance as constructed.
    pub bound_b: Int,
}

impl Instance {
    /// Build and validate an instance from parts. Demands may be rational
    /// (contracted instances); parse-time construction checks integrality
    /// separately.
    pub fn from_parts(
        nodes: Vec<NodeId>,
        sink: NodeId,
        arcs: Vec<Arc>,
        demands: BTreeMap<NodeId, Rational>,
    ) -> Self {
        debug_assert!(nodes.contains(&sink));
        let mut seen = BTreeSet::new();
        for a in &arcs {
            assert!(a.tail != a.head, "self-loop");
            assert!(seen.insert((a.tail, a.head)), "parallel arc");
            assert!(a.gain.is_positive(), "nonpositive gain");
        }
        let demands: BTreeMap<NodeId, Rational> =
            demands.into_iter().filter(|(_, b)| !b.is_zero()).collect();
        assert!(!demands.contains_key(&sink), "demand on sink");
        let bound_b = compute_bound(&arcs, &demands);
        Instance {
            nodes,
            sink,
            arcs,
            demands,
            bound_b,
        }
    }

    /// Convenience constructor for tests: arcs as (tail, head, num, den),
    /// demands as (node, b).
    pub fn build(
        n: u32,
        sink: NodeId,
        arcs: &[(NodeId, NodeId, i64, i64)],
        demands: &[(NodeId, i64)],
    ) -> Self {
        let nodes: Vec<NodeId> = (1..=n).collect();
        let arcs = arcs
            .iter()
            .enumerate()
            .map(|(k, &(t, h, p, q))| Arc {
                tail: t,
                head: h,
                gain: Rational::new(big(p), big(q)),
                origin: k,
            })
            .collect();
        let demands = demands
            .iter()
            .map(|&(i, b)| (i, Rational::from_integer(big(b))))
            .collect();
        Instance::from_parts(nodes, sink, arcs, demands)
    }

    pub fn nodes(&self) -> &[NodeId] {
        &self.nodes
    }

    pub fn sink(&self) -> NodeId {
        self.sink
    }

    pub fn set_sink(&mut self, t: NodeId) {
        debug_assert!(self.nodes.contains(&t));
        self.sink = t;
    }

    pub fn arcs(&self) -> &[Arc] {
        &self.arcs
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn arc_count(&self) -> usize {
        self.arcs.len()
    }

    pub fn demand(&self, i: NodeId) -> Rational {
        self.demands.get(&i).cloned().unwrap_or_else(Rational::zero)
    }

    pub fn demands(&self) -> &BTreeMap<NodeId, Rational> {
        &self.demands
    }

    /// Total degree |δ⁻(i) ∪ δ⁺(i)|.
    pub fn degree(&self, i: NodeId) -> usize {
        self.arcs
            .iter()
            .filter(|a| a.tail == i || a.head == i)
            .count()
    }

    /// Sign partition of V ∖ {t} by current demand.
    pub fn vsign(&self) -> VSign {
        let mut s = VSign::default();
        for &i in &self.nodes {
            if i == self.sink {
                continue;
            }
            let b = self.demand(i);
            if b.is_negative() {
                s.v_minus.insert(i);
            } else if b.is_positive() {
                s.v_plus.insert(i);
            } else {
                s.v_zero.insert(i);
            }
        }
        s
    }

    /// Plentifulness threshold 3·n·(d_i + 1) taken from this instance.
    pub fn plenty_threshold(&self, i: NodeId) -> Int {
        debug_assert!(i != self.sink);
        plenty_value(self.node_count(), self.degree(i))
    }

    /// Serialize in the input file format.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        writeln!(out, "p genflow {} {}", self.node_count(), self.arc_count()).unwrap();
        writeln!(out, "t {}", self.sink).unwrap();
        for (&i, b) in &self.demands {
            writeln!(out, "n {} {}", i, b.numer()).unwrap();
        }
        for a in &self.arcs {
            writeln!(out, "a {} {} {} {}", a.tail, a.head, a.gain.numer(), a.gain.denom()).unwrap();
        }
        out
    }
}

pub fn plenty_value(n: usize, degree: usize) -> Int {
    big(3) * big(n as i64) * big(degree as i64 + 1)
}

fn compute_bound(arcs: &[Arc], demands: &BTreeMap<NodeId, Rational>) -> Int {
    let mut m = Int::one();
    for a in arcs {
        let num = a.gain.numer().abs();
        if num > m {
            m = num;
        }
        if a.gain.denom() > &m {
            m = a.gain.denom().clone();
        }
    }
    for b in demands.values() {
        // Demands are integral on parsed and phase instances; ceil covers
        // the rational demands of contracted instances.
        let v = b.abs().ceil().to_integer();
        if v > m {
            m = v;
        }
    }
    m + Int::one()
}

#[derive(Debug, Clone, Default)]
pub struct VSign {
    pub v_minus: BTreeSet<NodeId>,
    pub v_zero: BTreeSet<NodeId>,
    pub v_plus: BTreeSet<NodeId>,
}

/// Per-node dual labels μ. `infinite` is used only when assembling the
/// final dual output; during the algorithm every label is finite.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LabelVector {
    mu: BTreeMap<NodeId, Rational>,
    pub infinite: BTreeSet<NodeId>,
}

impl LabelVector {
    pub fn uniform(nodes: &[NodeId], value: Rational) -> Self {
        LabelVector {
            mu: nodes.iter().map(|&i| (i, value.clone())).collect(),
            infinite: BTreeSet::new(),
        }
    }

    pub fn from_map(mu: BTreeMap<NodeId, Rational>) -> Self {
        debug_assert!(mu.values().all(|v| v.is_positive()));
        LabelVector {
            mu,
            infinite: BTreeSet::new(),
        }
    }

    pub fn get(&self, i: NodeId) -> &Rational {
        &self.mu[&i]
    }

    pub fn set(&mut self, i: NodeId, v: Rational) {
        debug_assert!(v.is_positive());
        self.mu.insert(i, v);
    }

    pub fn remove(&mut self, i: NodeId) {
        self.mu.remove(&i);
    }

    pub fn is_infinite(&self, i: NodeId) -> bool {
        self.infinite.contains(&i)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&NodeId, &Rational)> {
        self.mu.iter()
    }

    /// Relabelled demand b_i / μ_i.
    pub fn relabeled_demand(&self, inst: &Instance, i: NodeId) -> Rational {
        inst.demand(i) / self.get(i)
    }
}

/// Relabelled gain γ_e · μ_tail / μ_head.
pub fn relabeled_gain(inst: &Instance, mu: &LabelVector, e: ArcIdx) -> Rational {
    let a = &inst.arcs()[e];
    &a.gain * mu.get(a.tail) / mu.get(a.head)
}

pub fn is_tight(inst: &Instance, mu: &LabelVector, e: ArcIdx) -> bool {
    relabeled_gain(inst, mu, e).is_one()
}

/// Integer relabelled flow f^μ, stored arc-aligned with the instance.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RelabeledFlow {
    pub values: Vec<Int>,
}

impl RelabeledFlow {
    pub fn zero(inst: &Instance) -> Self {
        RelabeledFlow {
            values: vec![Int::zero(); inst.arc_count()],
        }
    }

    pub fn from_values(values: Vec<Int>) -> Self {
        RelabeledFlow { values }
    }

    pub fn is_nonnegative(&self) -> bool {
        self.values.iter().all(|v| !v.is_negative())
    }

    /// True flow value f_e = f^μ_e · μ_tail(e).
    pub fn true_flow(&self, inst: &Instance, mu: &LabelVector, e: ArcIdx) -> Rational {
        Rational::from_integer(self.values[e].clone()) * mu.get(inst.arcs()[e].tail)
    }
}

/// Relabelled net flow ∇f^μ_i = Σ_in γ^μ_e f^μ_e − Σ_out f^μ_e for every
/// node. Exact for arbitrary labels; integral whenever the pair fits.
pub fn net_flows(inst: &Instance, mu: &LabelVector, flow: &RelabeledFlow) -> BTreeMap<NodeId, Rational> {
    let mut net: BTreeMap<NodeId, Rational> =
        inst.nodes().iter().map(|&i| (i, Rational::zero())).collect();
    for (e, a) in inst.arcs().iter().enumerate() {
        let v = &flow.values[e];
        if v.is_zero() {
            continue;
        }
        let vr = Rational::from_integer(v.clone());
        let g = relabeled_gain(inst, mu, e);
        *net.get_mut(&a.head).unwrap() += g * &vr;
        *net.get_mut(&a.tail).unwrap() -= vr;
    }
    net
}

/// Exact net flow of a true (unrelabelled, possibly rational) flow vector.
pub fn net_flows_true(inst: &Instance, flow: &[Rational]) -> BTreeMap<NodeId, Rational> {
    let mut net: BTreeMap<NodeId, Rational> =
        inst.nodes().iter().map(|&i| (i, Rational::zero())).collect();
    for (e, a) in inst.arcs().iter().enumerate() {
        let v = &flow[e];
        if v.is_zero() {
            continue;
        }
        *net.get_mut(&a.head).unwrap() += &a.gain * v;
        *net.get_mut(&a.tail).unwrap() -= v;
    }
    net
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Potentials {
    pub ex: Rational,
    pub deficit: Rational,
    pub xi: Rational,
    pub psi: Rational,
    pub phi: Rational,
}

/// Ex, Deficit, Ξ, Ψ, Φ of the current fitting pair.
pub fn potentials(inst: &Instance, mu: &LabelVector, flow: &RelabeledFlow) -> Potentials {
    let net = net_flows(inst, mu, flow);
    let two = Rational::from_integer(big(2));
    let mut p = Potentials {
        ex: Rational::zero(),
        deficit: Rational::zero(),
        xi: Rational::zero(),
        psi: Rational::zero(),
        phi: Rational::zero(),
    };
    for &i in inst.nodes() {
        if i == inst.sink() {
            continue;
        }
        let bmu = mu.relabeled_demand(inst, i);
        let excess = &net[&i] - &bmu;
        if excess.is_positive() {
            p.ex += &excess;
        } else if excess.is_negative() {
            p.deficit -= &excess;
        }
        p.xi += if excess > two { excess.clone() } else { two.clone() };
        if bmu.is_negative() {
            p.psi -= &bmu;
            p.phi += &excess;
        }
    }
    p
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum FittingViolation {
    /// Some arc has γ^μ_e > 1.
    DualInfeasible(ArcIdx),
    /// Some arc carries flow but is not tight.
    NontightSupport(ArcIdx),
}

/// Check that μ is feasible for the dual and that the support of f^μ is
/// tight; on failure names the violating arc.
pub fn is_fitting_pair(
    inst: &Instance,
    mu: &LabelVector,
    flow: &RelabeledFlow,
) -> Result<(), FittingViolation> {
    for e in 0..inst.arc_count() {
        let g = relabeled_gain(inst, mu, e);
        if g > Rational::one() {
            return Err(FittingViolation::DualInfeasible(e));
        }
        if flow.values[e].is_positive() && !g.is_one() {
            return Err(FittingViolation::NontightSupport(e));
        }
    }
    Ok(())
}

/// Parse the line-oriented instance format. `#` starts a comment.
pub fn parse_instance(text: &str) -> Result<Instance, ParseError> {
    let mut n: Option<usize> = None;
    let mut m: Option<usize> = None;
    let mut sink: Option<NodeId> = None;
    let mut demands: BTreeMap<NodeId, Rational> = BTreeMap::new();
    let mut demand_lines: BTreeSet<NodeId> = BTreeSet::new();
    let mut arcs: Vec<Arc> = Vec::new();
    let mut arc_set: BTreeSet<(NodeId, NodeId)> = BTreeSet::new();

    for (lineno, raw) in text.lines().enumerate() {
        let lineno = lineno + 1;
        let line = match raw.find('#') {
            Some(pos) => &raw[..pos],
            None => raw,
        };
        let toks: Vec<&str> = line.split_whitespace().collect();
        if toks.is_empty() {
            continue;
        }
        let malformed = |msg: &str| ParseError::Malformed(lineno, msg.to_string());
        match toks[0] {
            "p" => {
                if n.is_some() {
                    return Err(malformed("duplicate problem line"));
                }
                if toks.len() != 4 || toks[1] != "genflow" {
                    return Err(malformed("expected `p genflow <n> <m>`"));
                }
                n = Some(toks[2].parse().map_err(|_| malformed("bad node count"))?);
                m = Some(toks[3].parse().map_err(|_| malformed("bad arc count"))?);
                if n == Some(0) {
                    return Err(malformed("node count must be positive"));
                }
            }
            "t" => {
                if sink.is_some() {
                    return Err(malformed("duplicate sink line"));
                }
                let t: NodeId = toks
                    .get(1)
                    .and_then(|s| s.parse().ok())
                    .ok_or_else(|| malformed("expected `t <sink_id>`"))?;
                sink = Some(t);
            }
            "n" => {
                if toks.len() != 3 {
                    return Err(malformed("expected `n <node_id> <b>`"));
                }
                let i: NodeId = toks[1].parse().map_err(|_| malformed("bad node id"))?;
                let b: Int = toks[2].parse().map_err(|_| malformed("bad demand"))?;
                if !demand_lines.insert(i) {
                    return Err(malformed("duplicate demand line"));
                }
                if !b.is_zero() {
                    demands.insert(i, Rational::from_integer(b));
                }
            }
            "a" => {
                if toks.len() != 5 {
                    return Err(malformed("expected `a <tail> <head> <gain_num> <gain_den>`"));
                }
                let tail: NodeId = toks[1].parse().map_err(|_| malformed("bad tail id"))?;
                let head: NodeId = toks[2].parse().map_err(|_| malformed("bad head id"))?;
                let num: Int = toks[3].parse().map_err(|_| malformed("bad gain numerator"))?;
                let den: Int = toks[4].parse().map_err(|_| malformed("bad gain denominator"))?;
                if !num.is_positive() || !den.is_positive() {
                    return Err(ParseError::NonpositiveGain(lineno));
                }
                if tail == head {
                    return Err(ParseError::SelfLoop(lineno, tail));
                }
                if !arc_set.insert((tail, head)) {
                    return Err(ParseError::ParallelArc(lineno, tail, head));
                }
                arcs.push(Arc {
                    tail,
                    head,
                    gain: Rational::new(num, den),
                    origin: arcs.len(),
                });
            }
            other => {
                return Err(malformed(&format!("unknown record `{other}`")));
            }
        }
    }

    let n = n.ok_or(ParseError::MissingHeader)?;
    let m = m.unwrap_or(0);
    let sink = sink.ok_or(ParseError::MissingSink)?;
    let in_range = |i: NodeId| i >= 1 && (i as usize) <= n;
    if !in_range(sink) {
        return Err(ParseError::Malformed(0, format!("sink id {sink} out of range")));
    }
    if arcs.len() != m {
        return Err(ParseError::Malformed(
            0,
            format!("arc count mismatch: header says {m}, found {}", arcs.len()),
        ));
    }
    for a in &arcs {
        if !in_range(a.tail) || !in_range(a.head) {
            return Err(ParseError::Malformed(0, "arc endpoint out of range".into()));
        }
    }
    for (&i, _) in &demands {
        if !in_range(i) {
            return Err(ParseError::Malformed(0, format!("demand node {i} out of range")));
        }
        if i == sink {
            return Err(ParseError::DemandOnSink(0, i));
        }
    }
    if demand_lines.contains(&sink) {
        return Err(ParseError::DemandOnSink(0, sink));
    }

    // Undirected connectivity.
    let nodes: Vec<NodeId> = (1..=n as NodeId).collect();
    if n > 1 {
        let mut adj: BTreeMap<NodeId, Vec<NodeId>> = BTreeMap::new();
        for a in &arcs {
            adj.entry(a.tail).or_default().push(a.head);
            adj.entry(a.head).or_default().push(a.tail);
        }
        let mut seen = BTreeSet::new();
        let mut queue = VecDeque::new();
        seen.insert(sink);
        queue.push_back(sink);
        while let Some(u) = queue.pop_front() {
            for &v in adj.get(&u).into_iter().flatten() {
                if seen.insert(v) {
                    queue.push_back(v);
                }
            }
        }
        for &i in &nodes {
            if !seen.contains(&i) {
                return Err(ParseError::Disconnected(i));
            }
        }
    }

    Ok(Instance::from_parts(nodes, sink, arcs, demands))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rational::{rat, rat_int};

    #[test]
    fn parse_two_node_example() {
        let inst = parse_instance("p genflow 2 1\nt 1\nn 2 -100\na 2 1 1 1\n").unwrap();
        assert_eq!(inst.nodes(), &[1, 2]);
        assert_eq!(inst.sink(), 1);
        assert_eq!(inst.demand(2), rat_int(-100));
        assert_eq!(inst.arc_count(), 1);
        assert_eq!(inst.arcs()[0].gain, rat_int(1));
        assert_eq!(inst.bound_b, big(101));
    }

    #[test]
    fn parse_rejects_parallel_arc() {
        let err = parse_instance("p genflow 2 2\nt 1\na 1 2 1 1\na 1 2 2 1\n").unwrap_err();
        assert!(matches!(err, ParseError::ParallelArc(..)));
    }

    #[test]
    fn parse_rejects_nonpositive_gain() {
        let err = parse_instance("p genflow 2 1\nt 1\na 1 2 0 1\n").unwrap_err();
        assert!(matches!(err, ParseError::NonpositiveGain(..)));
    }

    #[test]
    fn parse_rejects_self_loop_sink_demand_disconnection() {
        let err = parse_instance("p genflow 2 1\nt 1\na 2 2 1 1\n").unwrap_err();
        assert!(matches!(err, ParseError::SelfLoop(..)));
        let err = parse_instance("p genflow 2 1\nt 1\nn 1 5\na 2 1 1 1\n").unwrap_err();
        assert!(matches!(err, ParseError::DemandOnSink(..)));
        let err = parse_instance("p genflow 3 1\nt 1\na 2 1 1 1\n").unwrap_err();
        assert!(matches!(err, ParseError::Disconnected(3)));
        let err = parse_instance("p genflow 2 1\nt 1\na 2 1 1\n").unwrap_err();
        assert!(matches!(err, ParseError::Malformed(..)));
    }

    #[test]
    fn parse_allows_comments_and_blank_lines() {
        let inst =
            parse_instance("# header\np genflow 2 1 # trailing\n\nt 1\na 2 1 3 2\n").unwrap();
        assert_eq!(inst.arcs()[0].gain, rat(3, 2));
    }

    #[test]
    fn roundtrip_text() {
        let text = "p genflow 3 3\nt 3\nn 1 -4\nn 2 7\na 1 2 2 3\na 2 3 1 1\na 3 1 5 4\n";
        let inst = parse_instance(text).unwrap();
        let printed = inst.to_text();
        let reparsed = parse_instance(&printed).unwrap();
        assert_eq!(inst, reparsed);
    }

    #[test]
    fn relabeled_gain_cases() {
        let inst = Instance::build(2, 1, &[(2, 1, 3, 1)], &[]);
        // γ=3, μ_tail=1, μ_head=3 → tight.
        let mut mu = LabelVector::uniform(inst.nodes(), rat_int(1));
        mu.set(1, rat_int(3));
        assert!(relabeled_gain(&inst, &mu, 0).is_one());
        // Unit labels leave gains unchanged.
        let unit = LabelVector::uniform(inst.nodes(), rat_int(1));
        assert_eq!(relabeled_gain(&inst, &unit, 0), rat_int(3));
        // Appendix two-node instance: γ_ts = 1/M under unit labels.
        let app = Instance::build(2, 1, &[(2, 1, 1, 1), (1, 2, 1, 1000)], &[(2, 1)]);
        let unit = LabelVector::uniform(app.nodes(), rat_int(1));
        assert_eq!(relabeled_gain(&app, &unit, 1), rat(1, 1000));
    }

    #[test]
    fn potentials_examples() {
        // Single non-sink node with b^μ = −1 under zero flow.
        let inst = Instance::build(2, 1, &[(2, 1, 1, 1)], &[(2, -1)]);
        let mu = LabelVector::uniform(inst.nodes(), rat_int(1));
        let p = potentials(&inst, &mu, &RelabeledFlow::zero(&inst));
        assert_eq!(p.ex, rat_int(1));
        assert_eq!(p.deficit, rat_int(0));
        assert_eq!(p.xi, rat_int(2));
        assert_eq!(p.psi, rat_int(1));
        assert_eq!(p.phi, rat_int(1));

        // b^μ = 3: pure deficit.
        let inst = Instance::build(2, 1, &[(2, 1, 1, 1)], &[(2, 3)]);
        let mu = LabelVector::uniform(inst.nodes(), rat_int(1));
        let p = potentials(&inst, &mu, &RelabeledFlow::zero(&inst));
        assert_eq!(p.ex, rat_int(0));
        assert_eq!(p.deficit, rat_int(3));
        assert_eq!(p.xi, rat_int(2));
        assert_eq!(p.psi, rat_int(0));
        assert_eq!(p.phi, rat_int(0));
    }

    #[test]
    fn potentials_balanced_flow_has_xi_two_per_node() {
        // Chain 3→2→1 with unit gains, b_3=−1, b_2=1; flow 3→2 of 1 balances.
        let inst = Instance::build(3, 1, &[(3, 2, 1, 1), (2, 1, 1, 1)], &[(3, -1), (2, 1)]);
        let mu = LabelVector::uniform(inst.nodes(), rat_int(1));
        let flow = RelabeledFlow::from_values(vec![big(1), big(0)]);
        let p = potentials(&inst, &mu, &flow);
        assert_eq!(p.ex, rat_int(0));
        assert_eq!(p.deficit, rat_int(0));
        assert_eq!(p.xi, rat_int(4));
    }

    #[test]
    fn plenty_threshold_values() {
        let inst = Instance::build(2, 1, &[(2, 1, 1, 1)], &[(2, -100)]);
        assert_eq!(inst.plenty_threshold(2), big(12));
        let inst4 = Instance::build(
            4,
            1,
            &[(2, 1, 1, 1), (3, 2, 1, 1), (4, 3, 1, 1)],
            &[],
        );
        // node 3 has degree 2 in a 4-node graph.
        assert_eq!(inst4.plenty_threshold(3), big(36));
    }

    // Theorem-5 / Lemma-13 arithmetic behind the adopted threshold
    // 3n(d+1): with Ex < 2n and Deficit < n−1 the chain
    //   3n(d+1) − Ex > 3n·d  and  Ex + Deficit < 3n − 1 < 3n
    // must hold for every n ≥ 1 and d ≤ n−1.
    #[test]
    fn plenty_constant_satisfies_progress_inequalities() {
        for n in 1usize..=64 {
            let nn = big(n as i64);
            // Ex + Deficit < 2n + (n−1) = 3n − 1 < 3n, the margin needed for
            // the contraction criterion g^μ_e > Ex + Deficit once g^μ_e > 3n.
            assert!(&nn * 2 + (&nn - 1) < &nn * 3);
            for d in 0..n {
                let plenty = plenty_value(n, d);
                // Even with Ex arbitrarily close to 2n, some outgoing arc
                // carries more than 3n·d_i ≥ 3n·|δ⁺(i)| units.
                assert!(&plenty - &nn * 2 > &nn * 3 * big(d as i64), "n={n} d={d}");
                // Lemma 13's bound is the threshold plus the final +3 slack.
                assert_eq!(&nn * 3 * big(d as i64) + &nn * 3 + 3, plenty + 3);
            }
        }
    }

    #[test]
    fn plenty_is_strict_at_threshold_minus_one() {
        let inst = Instance::build(2, 1, &[(2, 1, 1, 1)], &[(2, -11)]);
        let mu = LabelVector::uniform(inst.nodes(), rat_int(1));
        let bmu = mu.relabeled_demand(&inst, 2).abs();
        assert!(bmu < Rational::from_integer(inst.plenty_threshold(2)));
    }

    #[test]
    fn fitting_pair_cases() {
        let inst = Instance::build(2, 1, &[(2, 1, 2, 1)], &[(2, -1)]);
        let mut mu = LabelVector::uniform(inst.nodes(), rat_int(1));
        mu.set(1, rat_int(2));
        // Zero flow with feasible labels fits.
        assert!(is_fitting_pair(&inst, &mu, &RelabeledFlow::zero(&inst)).is_ok());
        // Flow on a non-tight arc is a violation.
        let mut mu2 = LabelVector::uniform(inst.nodes(), rat_int(1));
        mu2.set(1, rat_int(4));
        let flow = RelabeledFlow::from_values(vec![big(1)]);
        assert_eq!(
            is_fitting_pair(&inst, &mu2, &flow),
            Err(FittingViolation::NontightSupport(0))
        );
        // Dual infeasibility is caught even with zero flow.
        let unit = LabelVector::uniform(inst.nodes(), rat_int(1));
        assert_eq!(
            is_fitting_pair(&inst, &unit, &RelabeledFlow::zero(&inst)),
            Err(FittingViolation::DualInfeasible(0))
        );
    }

    #[test]
    fn vsign_partitions_nonsink_nodes() {
        let inst = Instance::build(
            4,
            1,
            &[(2, 1, 1, 1), (3, 1, 1, 1), (4, 1, 1, 1)],
            &[(2, -1), (3, 2)],
        );
        let s = inst.vsign();
        assert!(s.v_minus.contains(&2));
        assert!(s.v_plus.contains(&3));
        assert!(s.v_zero.contains(&4));
        assert_eq!(s.v_minus.len() + s.v_zero.len() + s.v_plus.len(), 3);
    }
}
