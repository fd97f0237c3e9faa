//! Arc contraction: the Reduce subroutine with full bookkeeping, exact
//! uncontraction of dual labels, and the final primal computation.

use std::collections::{BTreeMap, BTreeSet};

use num::{One, Zero};
use thiserror::Error;

use crate::model::{
    is_tight, potentials, Arc, ArcIdx, Instance, LabelVector, NodeId, RelabeledFlow,
};
use crate::netflow::{repair_flow, Cap, CirculationProblem};
use crate::rational::{Int, Rational};

#[derive(Debug, Clone, PartialEq)]
pub struct ContractionRecord {
    /// Removed node (tail of the contracted arc).
    pub p: NodeId,
    /// Surviving node the arc pointed into.
    pub q: NodeId,
    /// γ_pq at contraction time; uncontraction sets μ_p = μ_q / γ_pq.
    pub gain: Rational,
    /// Origin id of the contracted arc in the run instance.
    pub origin: ArcIdx,
}

/// Ordered record of contractions. Replaying the records forward with
/// `contract_arc` reproduces the contracted instance exactly; replaying
/// backward restores dual labels on all original nodes.
#[derive(Debug, Clone, Default)]
pub struct ContractionLog {
    pub records: Vec<ContractionRecord>,
    /// Preimage Γ_i of every surviving node; a partition of the run
    /// instance's node set.
    pub preimages: BTreeMap<NodeId, BTreeSet<NodeId>>,
    /// Human-readable event lines for tracing and replay diffs.
    pub events: Vec<String>,
}

impl ContractionLog {
    pub fn new(inst: &Instance) -> Self {
        ContractionLog {
            records: Vec::new(),
            preimages: inst
                .nodes()
                .iter()
                .map(|&i| (i, BTreeSet::from([i])))
                .collect(),
            events: Vec::new(),
        }
    }

    pub fn to_trace(&self) -> String {
        self.events.join("\n")
    }
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum ReduceError {
    #[error("labelling became unsafe: repair circulation infeasible at cut {0:?}")]
    UnsafeLabelling(BTreeSet<NodeId>),
    #[error("no contractible arc found despite a plentiful node")]
    NoContractibleArc,
}

/// Contract arc `e = pq` into `q`: remap p's arcs with the gain rewrites
/// γ_iq = γ_ip·γ_pq and γ_qi = γ_pi/γ_pq, merge demands, prune parallel
/// bundles to the highest gain, drop self-loops, and carry the
/// relabelled flow over. Returns the contracted instance and flow.
pub fn contract_arc(
    inst: &Instance,
    flow: &RelabeledFlow,
    e: ArcIdx,
    log: &mut ContractionLog,
) -> (Instance, RelabeledFlow) {
    let arc = &inst.arcs()[e];
    let (p, q) = (arc.tail, arc.head);
    let gamma_pq = arc.gain.clone();
    log.events.push(format!("contract {}->{} gain {}/{} origin {}",
        p, q, gamma_pq.numer(), gamma_pq.denom(), arc.origin));

    let mut new_arcs: Vec<Arc> = Vec::new();
    let mut new_flow: Vec<Int> = Vec::new();
    let mut pos: BTreeMap<(NodeId, NodeId), usize> = BTreeMap::new();
    for (k, a) in inst.arcs().iter().enumerate() {
        if k == e {
            continue;
        }
        let mut tail = a.tail;
        let mut head = a.head;
        let mut gain = a.gain.clone();
        if head == p {
            head = q;
            gain *= &gamma_pq;
            log.events.push(format!("remap origin {} head {}->{}", a.origin, p, q));
        }
        if tail == p {
            tail = q;
            gain /= &gamma_pq;
            log.events.push(format!("remap origin {} tail {}->{}", a.origin, p, q));
        }
        if tail == head {
            // Opposite pair collapsed onto the merged node; a tight pair
            // multiplies to gain one and carries no net flow.
            assert!(
                flow.values[k].is_zero() || gain.is_one(),
                "self-loop with flow has gain {gain}"
            );
            log.events.push(format!("drop self-loop origin {}", a.origin));
            continue;
        }
        match pos.get(&(tail, head)) {
            None => {
                pos.insert((tail, head), new_arcs.len());
                new_arcs.push(Arc { tail, head, gain, origin: a.origin });
                new_flow.push(flow.values[k].clone());
            }
            Some(&at) => {
                // Parallel bundle: keep only the highest gain factor.
                let incumbent = &new_arcs[at];
                if gain > incumbent.gain {
                    assert!(
                        new_flow[at].is_zero(),
                        "pruned parallel arc carries flow"
                    );
                    log.events.push(format!(
                        "prune parallel origin {} (kept origin {})",
                        incumbent.origin, a.origin
                    ));
                    new_arcs[at] = Arc { tail, head, gain, origin: a.origin };
                    new_flow[at] = flow.values[k].clone();
                } else if gain == incumbent.gain {
                    log.events.push(format!(
                        "merge parallel origin {} into origin {}",
                        a.origin, incumbent.origin
                    ));
                    new_flow[at] += &flow.values[k];
                } else {
                    assert!(
                        flow.values[k].is_zero(),
                        "pruned parallel arc carries flow"
                    );
                    log.events.push(format!(
                        "prune parallel origin {} (kept origin {})",
                        a.origin, incumbent.origin
                    ));
                }
            }
        }
    }

    let mut demands = inst.demands().clone();
    let mut sink = inst.sink();
    if sink != p && sink != q {
        let merged = demands.remove(&q).unwrap_or_else(Rational::zero)
            + &gamma_pq * demands.get(&p).cloned().unwrap_or_else(Rational::zero);
        if !merged.is_zero() {
            demands.insert(q, merged.clone());
        }
        log.events.push(format!("demand {} <- {}/{}", q, merged.numer(), merged.denom()));
    }
    demands.remove(&p);
    if sink == p {
        demands.remove(&q);
        sink = q;
        log.events.push(format!("rename sink {} -> {}", p, q));
    }
    let nodes: Vec<NodeId> = inst.nodes().iter().copied().filter(|&i| i != p).collect();

    log.records.push(ContractionRecord { p, q, gain: gamma_pq, origin: arc.origin });
    let gamma_p = log.preimages.remove(&p).expect("preimage of removed node");
    log.preimages.get_mut(&q).expect("preimage of target").extend(gamma_p);

    (
        Instance::from_parts(nodes, sink, new_arcs, demands),
        RelabeledFlow::from_values(new_flow),
    )
}

/// The Reduce subroutine: repair the flow, then contract arcs while one
/// exceeds Ex + Deficit. At least one contraction must occur.
pub fn reduce(
    inst: &Instance,
    mu: &LabelVector,
    flow: &RelabeledFlow,
    log: &mut ContractionLog,
    checks: bool,
) -> Result<(Instance, LabelVector, RelabeledFlow, usize), ReduceError> {
    let mut g = repair_flow(inst, mu, flow)
        .map_err(|w| ReduceError::UnsafeLabelling(w.cut))?;
    let mut inst = inst.clone();
    let mut mu = mu.clone();
    let mut contractions = 0;
    loop {
        let pot = potentials(&inst, &mu, &g);
        let threshold = &pot.ex + &pot.deficit;
        let mut best: Option<ArcIdx> = None;
        for e in 0..inst.arc_count() {
            let v = Rational::from_integer(g.values[e].clone());
            if v > threshold {
                let better = match best {
                    None => true,
                    Some(b) => g.values[e] > g.values[b],
                };
                if better {
                    best = Some(e);
                }
            }
        }
        let Some(e) = best else { break };
        let xi_before = pot.xi;
        let p = inst.arcs()[e].tail;
        let (next_inst, next_flow) = contract_arc(&inst, &g, e, log);
        mu.remove(p);
        inst = next_inst;
        g = next_flow;
        contractions += 1;
        if checks {
            let after = potentials(&inst, &mu, &g);
            assert!(after.xi <= xi_before, "Xi increased across a contraction");
        }
    }
    if contractions == 0 {
        return Err(ReduceError::NoContractibleArc);
    }
    Ok((inst, mu, g, contractions))
}

/// Revert all contractions, newest first, defining μ_p = μ_q / γ_pq so
/// that every uncontracted arc is tight.
pub fn expand_to_original(mu: &LabelVector, log: &ContractionLog) -> LabelVector {
    let mut mu = mu.clone();
    for rec in log.records.iter().rev() {
        let label = mu.get(rec.q) / &rec.gain;
        mu.set(rec.p, label);
        debug_assert_eq!(mu.get(rec.p) * &rec.gain, mu.get(rec.q).clone());
    }
    mu
}

#[derive(Debug, Error, PartialEq, Eq)]
#[error("primal circulation infeasible: labels are not optimal (cut {cut:?})")]
pub struct PrimalInfeasible {
    pub cut: BTreeSet<NodeId>,
}

/// Compute an optimal primal flow from finite optimal labels by solving
/// the exact-demand circulation on the tight arcs: b'_i = b^μ_i off the
/// sink and b'_t = −Σ b^μ_i. Returns the true (unrelabelled) flow.
pub fn compute_primal(
    inst: &Instance,
    mu: &LabelVector,
) -> Result<Vec<Rational>, PrimalInfeasible> {
    let index: BTreeMap<NodeId, usize> = inst
        .nodes()
        .iter()
        .enumerate()
        .map(|(k, &i)| (i, k))
        .collect();
    let n = inst.node_count();
    let mut target = vec![Rational::zero(); n];
    let mut total = Rational::zero();
    for &i in inst.nodes() {
        if i == inst.sink() {
            continue;
        }
        let bmu = mu.relabeled_demand(inst, i);
        total += &bmu;
        target[index[&i]] = bmu;
    }
    target[index[&inst.sink()]] = -total;

    let mut arcs = Vec::new();
    let mut arc_pos = Vec::new();
    for (e, a) in inst.arcs().iter().enumerate() {
        if is_tight(inst, mu, e) {
            arc_pos.push(e);
            arcs.push((index[&a.tail], index[&a.head], Cap::Inf));
        }
    }
    let problem = CirculationProblem {
        node_count: n,
        arcs,
        lo: target.iter().map(|x| Some(x.clone())).collect(),
        hi: target.iter().map(|x| Some(x.clone())).collect(),
    };
    let sol = problem.solve().map_err(|cut| PrimalInfeasible {
        cut: cut.nodes.iter().map(|&k| inst.nodes()[k]).collect(),
    })?;
    let mut flow = vec![Rational::zero(); inst.arc_count()];
    for (k, &e) in arc_pos.iter().enumerate() {
        flow[e] = &sol[k] * mu.get(inst.arcs()[e].tail);
    }
    Ok(flow)
}
