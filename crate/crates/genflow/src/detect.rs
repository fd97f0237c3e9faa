//! Flow-generating-cycle detection and flooded-set computation.
//!
//! A multiplicative Bellman–Ford over exact rationals maintains, per
//! node, the best walk gain seen so far; comparisons are exact and no
//! logarithms are involved. An update in round n certifies a cycle with
//! gain above one, which is extracted by predecessor walking. Peeling
//! the set reachable from each found cycle and repeating yields the
//! flooded set and initial dual labels on its complement.

use std::collections::{BTreeMap, BTreeSet, VecDeque};

use num::One;

use crate::model::{ArcIdx, Instance, NodeId};
use crate::rational::Rational;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CycleWitness {
    /// Arc indices forming a simple directed cycle.
    pub arcs: Vec<ArcIdx>,
    /// γ(C), always > 1.
    pub gain: Rational,
}

impl CycleWitness {
    /// Node sequence of the cycle, aligned with `arcs` (tail of each arc).
    pub fn nodes(&self, inst: &Instance) -> Vec<NodeId> {
        self.arcs.iter().map(|&e| inst.arcs()[e].tail).collect()
    }

    /// Rotate the arc list so the cycle starts at `start`.
    pub fn rotated_at(&self, inst: &Instance, start: NodeId) -> Vec<ArcIdx> {
        let pos = self
            .arcs
            .iter()
            .position(|&e| inst.arcs()[e].tail == start)
            .expect("start node not on cycle");
        let mut arcs = self.arcs[pos..].to_vec();
        arcs.extend_from_slice(&self.arcs[..pos]);
        arcs
    }
}

#[derive(Debug, Clone)]
pub enum CycleOrLabels {
    Cycle(CycleWitness),
    /// Dual-feasible labels μ_i ≤ 1 on the searched subgraph, attaining
    /// μ_i = min over directed walks P from i of 1/γ(P).
    Labels(BTreeMap<NodeId, Rational>),
}

/// Detect a flow-generating cycle in the subgraph induced by `active`,
/// or return feasible labels if none exists.
pub fn find_flow_generating_cycle(inst: &Instance, active: &BTreeSet<NodeId>) -> CycleOrLabels {
    let n = active.len();
    if n == 0 {
        return CycleOrLabels::Labels(BTreeMap::new());
    }
    // best[i] = largest walk gain from i found so far; empty walk = 1.
    let mut best: BTreeMap<NodeId, Rational> =
        active.iter().map(|&i| (i, Rational::one())).collect();
    let mut succ: BTreeMap<NodeId, ArcIdx> = BTreeMap::new();

    let mut last_updated: Option<NodeId> = None;
    for round in 1..=n {
        let mut updated = false;
        for (e, a) in inst.arcs().iter().enumerate() {
            if !active.contains(&a.tail) || !active.contains(&a.head) {
                continue;
            }
            let cand = &a.gain * &best[&a.head];
            if cand > best[&a.tail] {
                best.insert(a.tail, cand);
                succ.insert(a.tail, e);
                updated = true;
                last_updated = Some(a.tail);
            }
        }
        if !updated {
            return CycleOrLabels::Labels(
                best.into_iter().map(|(i, b)| (i, Rational::one() / b)).collect(),
            );
        }
        if round == n {
            break;
        }
    }

    // An update in round n: the successor graph contains a gainy cycle.
    let mut v = last_updated.expect("round-n update without a node");
    for _ in 0..n {
        v = inst.arcs()[succ[&v]].head;
    }
    let mut arcs = Vec::new();
    let start = v;
    loop {
        let e = succ[&v];
        arcs.push(e);
        v = inst.arcs()[e].head;
        if v == start {
            break;
        }
    }
    let gain: Rational = arcs.iter().map(|&e| inst.arcs()[e].gain.clone()).product();
    assert!(gain > Rational::one(), "extracted cycle is not flow generating");
    CycleOrLabels::Cycle(CycleWitness { arcs, gain })
}

/// How a flooded node is supplied: pump around `cycle`, then route along
/// `path` from `entry` (a cycle node) to the target.
#[derive(Debug, Clone)]
pub struct PumpWitness {
    pub cycle: CycleWitness,
    pub entry: NodeId,
    /// Arcs from `entry` to the target; empty when the target lies on the
    /// cycle itself.
    pub path: Vec<ArcIdx>,
}

#[derive(Debug, Clone)]
pub struct FloodedSet {
    pub z: BTreeSet<NodeId>,
    /// Initial labels on V ∖ Z, dual feasible there with μ_i ≤ 1.
    pub labels: BTreeMap<NodeId, Rational>,
    pub witnesses: BTreeMap<NodeId, PumpWitness>,
}

/// Compute the flooded set Z (nodes reachable from a flow-generating
/// cycle) by iterated peeling, with per-node pump witnesses and initial
/// labels on the remainder.
pub fn flooded_set(inst: &Instance) -> FloodedSet {
    let mut active: BTreeSet<NodeId> = inst.nodes().iter().copied().collect();
    let mut z = BTreeSet::new();
    let mut witnesses = BTreeMap::new();

    loop {
        match find_flow_generating_cycle(inst, &active) {
            CycleOrLabels::Labels(labels) => {
                return FloodedSet { z, labels, witnesses };
            }
            CycleOrLabels::Cycle(cycle) => {
                // Forward reachability from the cycle within the active set.
                let cycle_nodes: Vec<NodeId> = cycle.nodes(inst);
                let mut parent: BTreeMap<NodeId, ArcIdx> = BTreeMap::new();
                let mut reached: BTreeSet<NodeId> = cycle_nodes.iter().copied().collect();
                let mut queue: VecDeque<NodeId> = cycle_nodes.iter().copied().collect();
                while let Some(u) = queue.pop_front() {
                    for (e, a) in inst.arcs().iter().enumerate() {
                        if a.tail == u && active.contains(&a.head) && !reached.contains(&a.head) {
                            reached.insert(a.head);
                            parent.insert(a.head, e);
                            queue.push_back(a.head);
                        }
                    }
                }
                for &i in &reached {
                    let mut path = Vec::new();
                    let mut v = i;
                    while let Some(&e) = parent.get(&v) {
                        path.push(e);
                        v = inst.arcs()[e].tail;
                    }
                    path.reverse();
                    witnesses.insert(
                        i,
                        PumpWitness { cycle: cycle.clone(), entry: v, path },
                    );
                    active.remove(&i);
                    z.insert(i);
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::relabeled_gain;
    use crate::model::LabelVector;
    use crate::rational::{rat, rat_int};

    #[test]
    fn no_cycle_when_gains_at_most_one() {
        let inst = Instance::build(3, 1, &[(3, 2, 1, 2), (2, 1, 1, 1)], &[]);
        let active = inst.nodes().iter().copied().collect();
        match find_flow_generating_cycle(&inst, &active) {
            CycleOrLabels::Labels(mu) => {
                assert_eq!(mu[&1], rat_int(1));
                assert_eq!(mu[&2], rat_int(1));
                assert_eq!(mu[&3], rat_int(1));
            }
            CycleOrLabels::Cycle(_) => panic!("no cycle expected"),
        }
    }

    #[test]
    fn two_cycle_with_gain_three_halves() {
        let inst = Instance::build(3, 3, &[(1, 2, 3, 1), (2, 1, 1, 2), (2, 3, 1, 1)], &[]);
        let active = inst.nodes().iter().copied().collect();
        match find_flow_generating_cycle(&inst, &active) {
            CycleOrLabels::Cycle(c) => {
                assert_eq!(c.gain, rat(3, 2));
                assert_eq!(c.arcs.len(), 2);
            }
            CycleOrLabels::Labels(_) => panic!("cycle expected"),
        }
    }

    #[test]
    fn path_labels_match_walk_enumeration() {
        // a=2 → b=3 → t=1 with gains 2 and 3.
        let inst = Instance::build(3, 1, &[(2, 3, 2, 1), (3, 1, 3, 1)], &[]);
        let active = inst.nodes().iter().copied().collect();
        match find_flow_generating_cycle(&inst, &active) {
            CycleOrLabels::Labels(mu) => {
                assert_eq!(mu[&2], rat(1, 6));
                assert_eq!(mu[&3], rat(1, 3));
                assert_eq!(mu[&1], rat_int(1));
            }
            CycleOrLabels::Cycle(_) => panic!("no cycle expected"),
        }
    }

    #[test]
    fn flooded_set_examples() {
        // No gainy cycle anywhere.
        let inst = Instance::build(3, 1, &[(3, 2, 1, 2), (2, 1, 1, 1)], &[]);
        assert!(flooded_set(&inst).z.is_empty());

        // Gainy 2-cycle {2,3} with arc 3→4; sink 1 attached upstream only.
        let inst = Instance::build(
            4,
            1,
            &[(2, 3, 3, 1), (3, 2, 1, 2), (3, 4, 1, 1), (1, 2, 1, 1)],
            &[],
        );
        let fs = flooded_set(&inst);
        assert_eq!(fs.z, BTreeSet::from([2, 3, 4]));
        assert!(fs.labels.contains_key(&1));

        // Cycle reaching the sink floods it.
        let inst = Instance::build(3, 1, &[(2, 3, 3, 1), (3, 2, 1, 2), (3, 1, 1, 1)], &[]);
        let fs = flooded_set(&inst);
        assert!(fs.z.contains(&1));
    }

    #[test]
    fn labels_are_dual_feasible_on_remainder() {
        let inst = Instance::build(
            5,
            1,
            &[(2, 3, 3, 1), (3, 2, 1, 2), (3, 4, 1, 1), (4, 5, 2, 1), (5, 1, 1, 3), (1, 4, 1, 1)],
            &[],
        );
        let fs = flooded_set(&inst);
        let rest: Vec<NodeId> = inst
            .nodes()
            .iter()
            .copied()
            .filter(|i| !fs.z.contains(i))
            .collect();
        let mu = LabelVector::from_map(
            rest.iter().map(|&i| (i, fs.labels[&i].clone())).collect(),
        );
        for (e, a) in inst.arcs().iter().enumerate() {
            if rest.contains(&a.tail) && rest.contains(&a.head) {
                assert!(relabeled_gain(&inst, &mu, e) <= rat_int(1));
            }
        }
        for &i in &rest {
            assert!(fs.labels[&i] <= rat_int(1));
        }
    }

    #[test]
    fn witnesses_replay() {
        let inst = Instance::build(
            4,
            1,
            &[(2, 3, 3, 1), (3, 2, 1, 2), (3, 4, 1, 1), (1, 2, 1, 1)],
            &[],
        );
        let fs = flooded_set(&inst);
        for (&target, w) in &fs.witnesses {
            assert!(w.cycle.gain > rat_int(1));
            // The path chains from the entry node to the target.
            let mut v = w.entry;
            for &e in &w.path {
                assert_eq!(inst.arcs()[e].tail, v);
                v = inst.arcs()[e].head;
            }
            assert_eq!(v, target);
            // Entry lies on the cycle; rotation must succeed.
            let rotated = w.cycle.rotated_at(&inst, w.entry);
            assert_eq!(rotated.len(), w.cycle.arcs.len());
        }
    }

    /// Brute force: enumerate all simple directed cycles, keep the gainy
    /// ones, take forward reachability.
    fn flooded_brute(inst: &Instance) -> BTreeSet<NodeId> {
        let nodes: Vec<NodeId> = inst.nodes().to_vec();
        let mut gainy_nodes: BTreeSet<NodeId> = BTreeSet::new();
        // DFS enumeration of simple cycles starting at each minimal node.
        fn dfs(
            inst: &Instance,
            start: NodeId,
            v: NodeId,
            gain: Rational,
            visited: &mut Vec<NodeId>,
            out: &mut BTreeSet<NodeId>,
        ) {
            for a in inst.arcs() {
                if a.tail != v {
                    continue;
                }
                if a.head == start {
                    if gain.clone() * &a.gain > Rational::one() {
                        out.extend(visited.iter().copied());
                    }
                } else if a.head > start && !visited.contains(&a.head) {
                    visited.push(a.head);
                    dfs(inst, start, a.head, gain.clone() * &a.gain, visited, out);
                    visited.pop();
                }
            }
        }
        for &s in &nodes {
            let mut visited = vec![s];
            dfs(inst, s, s, Rational::one(), &mut visited, &mut gainy_nodes);
        }
        // Forward closure.
        let mut z = gainy_nodes.clone();
        let mut changed = true;
        while changed {
            changed = false;
            for a in inst.arcs() {
                if z.contains(&a.tail) && !z.contains(&a.head) {
                    z.insert(a.head);
                    changed = true;
                }
            }
        }
        z
    }

    #[test]
    fn flooded_agrees_with_brute_force() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(37);
        for round in 0..120 {
            let n = rng.gen_range(2..=8u32);
            let mut arcs = Vec::new();
            for u in 1..=n {
                for v in 1..=n {
                    if u != v && rng.gen_bool(0.35) {
                        arcs.push((u, v, rng.gen_range(1..5), rng.gen_range(1..5)));
                    }
                }
            }
            if arcs.is_empty() {
                continue;
            }
            let inst = Instance::build(n, 1, &arcs, &[]);
            let got = flooded_set(&inst).z;
            let want = flooded_brute(&inst);
            assert_eq!(got, want, "round {round}, instance:\n{}", inst.to_text());
        }
    }
}
