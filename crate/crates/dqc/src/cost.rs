//! Ebit cost model.
//!
//! The cost of a distribution is the number of entangled pairs the built
//! circuit consumes. Each cut hyperedge is walked along its root's timeline:
//! distributing a gate to an unlinked module activates the edges of the
//! hyperedge's Steiner tree on the path from the nearest linked vertex, one
//! ebit per edge. An embedding unit carrying a CZ keeps only the CZ partner's
//! link alive (linking that module first if needed, so the correction gates
//! land locally) and ends every other link; a unit with no CZ needs only
//! per-link H/Z corrections, which are local everywhere, so it passes every
//! live link through untouched. Inert hyperedges (all members on the root's
//! module) cost nothing.

use crate::distribution::{hyperedge_events, Distribution, HedgeEvent, Hypergraph, Vertex};
use crate::Result;
use std::collections::BTreeSet;

/// Ebits consumed by hyperedge `h` alone.
pub fn hyperedge_cost(dist: &Distribution, h: usize) -> Result<usize> {
    let events = hyperedge_events(dist, h)?;
    if events.is_empty() {
        return Ok(0);
    }
    let he = &dist.hypergraph.hyperedges[h];
    let home = dist.phi_qubits[he.root];
    // the tree spans every module the protocol touches: the root's module,
    // member modules, and the remote module of each embedding unit
    let mut terminals: BTreeSet<usize> = BTreeSet::from([home]);
    for ev in &events {
        match ev {
            HedgeEvent::Distribute { module, .. } => {
                terminals.insert(*module);
            }
            HedgeEvent::Unit(u) => {
                terminals.extend(u.remote);
            }
        }
    }
    let tree = dist.network.steiner_tree(&terminals.iter().copied().collect::<Vec<_>>())?;

    let mut ebits = 0usize;
    // modules holding a live link, root's module excluded (always available)
    let mut linked: BTreeSet<usize> = BTreeSet::new();
    for ev in &events {
        match ev {
            HedgeEvent::Distribute { module, .. } => {
                let m = *module;
                if m == home || linked.contains(&m) {
                    continue;
                }
                let mut from: BTreeSet<usize> = linked.clone();
                from.insert(home);
                let path = tree.path_from_set(&from, m)?;
                ebits += path.len() - 1;
                linked.extend(path.into_iter().filter(|&v| v != home));
            }
            HedgeEvent::Unit(u) => {
                // wildcard units need no links and end none
                let Some(b) = u.remote else { continue };
                if !linked.contains(&b) {
                    let mut from: BTreeSet<usize> = linked.clone();
                    from.insert(home);
                    let path = tree.path_from_set(&from, b)?;
                    ebits += path.len() - 1;
                }
                // teardown: every link but the CZ partner's ends here
                linked.clear();
                linked.insert(b);
            }
        }
    }
    Ok(ebits)
}

#[derive(Debug, Clone)]
pub struct CostBreakdown {
    pub per_hyperedge: Vec<usize>,
    pub total: usize,
}

pub fn cost_breakdown(dist: &Distribution) -> Result<CostBreakdown> {
    let mut per = Vec::with_capacity(dist.hypergraph.hyperedges.len());
    for h in 0..dist.hypergraph.hyperedges.len() {
        per.push(hyperedge_cost(dist, h)?);
    }
    let total = per.iter().sum();
    Ok(CostBreakdown { per_hyperedge: per, total })
}

/// Total ebits consumed by the distribution.
pub fn total_cost(dist: &Distribution) -> Result<usize> {
    Ok(cost_breakdown(dist)?.total)
}

/// Incidence structure for fast gain evaluation.
#[derive(Debug, Clone)]
pub struct Incidence {
    /// Hyperedges rooted at each qubit.
    pub of_qubit: Vec<Vec<usize>>,
    /// Hyperedges containing each gate-vertex as a member.
    pub of_gate: Vec<Vec<usize>>,
    /// Qubits sharing a two-qubit gate with each qubit.
    pub partners: Vec<BTreeSet<usize>>,
}

impl Incidence {
    pub fn new(hg: &Hypergraph) -> Self {
        let mut of_qubit = vec![Vec::new(); hg.qubits];
        let mut of_gate = vec![Vec::new(); hg.gate_vertices.len()];
        for (i, h) in hg.hyperedges.iter().enumerate() {
            of_qubit[h.root].push(i);
            for &g in &h.members {
                of_gate[g].push(i);
            }
        }
        let mut partners = vec![BTreeSet::new(); hg.qubits];
        for gv in &hg.gate_vertices {
            partners[gv.q0].insert(gv.q1);
            partners[gv.q1].insert(gv.q0);
        }
        Incidence { of_qubit, of_gate, partners }
    }

    /// Hyperedges whose cost can change when `v` moves. For a qubit this
    /// includes hyperedges rooted at its gate partners, whose embedding units
    /// resolve their remote module from the qubit's allocation.
    pub fn affected(&self, v: Vertex) -> BTreeSet<usize> {
        match v {
            Vertex::Gate(g) => self.of_gate[g].iter().copied().collect(),
            Vertex::Qubit(q) => {
                let mut s: BTreeSet<usize> = self.of_qubit[q].iter().copied().collect();
                for &p in &self.partners[q] {
                    s.extend(self.of_qubit[p].iter().copied());
                }
                s
            }
        }
    }
}

pub fn apply_move(dist: &mut Distribution, v: Vertex, target: usize) {
    match v {
        Vertex::Qubit(q) => dist.phi_qubits[q] = target,
        Vertex::Gate(g) => dist.phi_gates[g] = target,
    }
}

/// Change in total ebit cost if `v` moved to `target`; positive is an
/// improvement. Only the affected hyperedges are re-walked.
pub fn ebit_gain(
    dist: &mut Distribution,
    inc: &Incidence,
    v: Vertex,
    target: usize,
) -> Result<isize> {
    let affected = inc.affected(v);
    let mut before = 0usize;
    for &h in &affected {
        before += hyperedge_cost(dist, h)?;
    }
    let old = dist.module_of(v);
    apply_move(dist, v, target);
    let mut after = 0usize;
    let mut res = Ok(());
    for &h in &affected {
        match hyperedge_cost(dist, h) {
            Ok(c) => after += c,
            Err(e) => {
                res = Err(e);
                break;
            }
        }
    }
    apply_move(dist, v, old);
    res.map(|()| before as isize - after as isize)
}

/// Change in the connectivity metric if `v` moved to `target`; positive is an
/// improvement. Never fails: the metric ignores walkability.
pub fn connectivity_gain(
    dist: &mut Distribution,
    inc: &Incidence,
    v: Vertex,
    target: usize,
) -> isize {
    let affected = inc.affected(v);
    let before: usize = affected.iter().map(|&h| dist.hyperedge_modules(h).len() - 1).sum();
    let old = dist.module_of(v);
    apply_move(dist, v, target);
    let after: usize = affected.iter().map(|&h| dist.hyperedge_modules(h).len() - 1).sum();
    apply_move(dist, v, old);
    before as isize - after as isize
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::circuit::{Circuit, Gate};
    use crate::distribution::{build_hypergraph, Hyperedge};
    use crate::network::Network;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use std::sync::Arc;

    fn fig2() -> Arc<Circuit> {
        Arc::new(
            Circuit::with_gates(
                4,
                vec![
                    Gate::CRz { q0: 0, q1: 2, phase: 0.3 },
                    Gate::CRz { q0: 1, q1: 2, phase: 0.7 },
                    Gate::H { q: 2 },
                    Gate::H { q: 1 },
                    Gate::CRz { q0: 2, q1: 3, phase: 1.3 },
                    Gate::H { q: 2 },
                    Gate::CRz { q0: 1, q1: 2, phase: 0.9 },
                    Gate::H { q: 3 },
                    Gate::CRz { q0: 1, q1: 3, phase: 1.7 },
                ],
            )
            .unwrap(),
        )
    }

    fn complete(names: &[&str], cap: u32) -> Arc<Network> {
        let mods: Vec<(String, u32, Option<u32>)> =
            names.iter().map(|n| (n.to_string(), cap, None)).collect();
        let mut edges = Vec::new();
        for i in 0..names.len() {
            for j in i + 1..names.len() {
                edges.push((names[i].to_string(), names[j].to_string()));
            }
        }
        Arc::new(Network::new(mods, edges).unwrap())
    }

    #[test]
    fn fig2_costs_two_ebits() {
        let d = Distribution::new(fig2(), complete(&["A", "B"], 2), vec![0, 0, 1, 1], vec![0, 0, 1, 1, 1])
            .unwrap();
        assert_eq!(total_cost(&d).unwrap(), 2);
        assert_eq!(d.connectivity_cost(), 2);
    }

    #[test]
    fn cost_equals_connectivity_on_complete_networks() {
        // ebits == connectivity metric for vanilla hypergraphs on complete
        // networks, for any allocation and any walk order
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..60 {
            let qubits = rng.gen_range(2..7);
            let mut c = Circuit::new(qubits);
            for _ in 0..rng.gen_range(1..25) {
                if rng.gen_bool(0.35) {
                    c.push(Gate::H { q: rng.gen_range(0..qubits) });
                } else {
                    let q0 = rng.gen_range(0..qubits);
                    let mut q1 = rng.gen_range(0..qubits);
                    while q1 == q0 {
                        q1 = rng.gen_range(0..qubits);
                    }
                    c.push(Gate::CRz { q0, q1, phase: rng.gen_range(0.0..2.0) });
                }
            }
            let nm = rng.gen_range(2..5);
            let names: Vec<String> = (0..nm).map(|i| format!("M{i}")).collect();
            let net = complete(&names.iter().map(|s| s.as_str()).collect::<Vec<_>>(), 16);
            let hg = build_hypergraph(&c).unwrap();
            let phi_q: Vec<usize> = (0..qubits).map(|_| rng.gen_range(0..nm)).collect();
            let phi_g: Vec<usize> =
                (0..hg.gate_vertices.len()).map(|_| rng.gen_range(0..nm)).collect();
            let d = Distribution::new(Arc::new(c), net, phi_q, phi_g).unwrap();
            assert_eq!(total_cost(&d).unwrap(), d.connectivity_cost());
        }
    }

    #[test]
    fn line_and_star_routing_costs() {
        // root in A, two members in C
        let c = Arc::new(
            Circuit::with_gates(
                2,
                vec![
                    Gate::CRz { q0: 0, q1: 1, phase: 0.5 },
                    Gate::CRz { q0: 0, q1: 1, phase: 0.25 },
                ],
            )
            .unwrap(),
        );
        let line = Arc::new(
            Network::new(
                vec![("A".into(), 2, None), ("B".into(), 2, None), ("C".into(), 2, None)],
                vec![("A".into(), "B".into()), ("B".into(), "C".into())],
            )
            .unwrap(),
        );
        let d = Distribution::new(Arc::clone(&c), line, vec![0, 2], vec![2, 2]).unwrap();
        // one chain A-B-C activated once, reused by the second gate
        assert_eq!(total_cost(&d).unwrap(), 2);

        // root in A, members in B and C, star through hub D
        let c2 = Arc::new(
            Circuit::with_gates(
                3,
                vec![
                    Gate::CRz { q0: 0, q1: 1, phase: 0.5 },
                    Gate::CRz { q0: 0, q1: 2, phase: 0.25 },
                ],
            )
            .unwrap(),
        );
        let star = Arc::new(
            Network::new(
                vec![
                    ("A".into(), 2, None),
                    ("B".into(), 2, None),
                    ("C".into(), 2, None),
                    ("D".into(), 2, None),
                ],
                vec![
                    ("A".into(), "D".into()),
                    ("B".into(), "D".into()),
                    ("C".into(), "D".into()),
                ],
            )
            .unwrap(),
        );
        let d2 = Distribution::new(c2, star, vec![0, 1, 2], vec![1, 2]).unwrap();
        // A-D-B costs 2, then D is linked so D-C costs 1
        assert_eq!(total_cost(&d2).unwrap(), 3);
    }

    #[test]
    fn embedding_unit_reuses_link() {
        // CRz(B), H, CZ(B), H, CRz(B) merged into one hyperedge: 1 ebit
        let c = Arc::new(
            Circuit::with_gates(
                3,
                vec![
                    Gate::CRz { q0: 0, q1: 1, phase: 0.5 },
                    Gate::H { q: 0 },
                    Gate::CRz { q0: 0, q1: 2, phase: 1.0 },
                    Gate::H { q: 0 },
                    Gate::CRz { q0: 0, q1: 1, phase: 0.25 },
                ],
            )
            .unwrap(),
        );
        let net = complete(&["A", "B"], 3);
        let mut hg = build_hypergraph(&c).unwrap();
        hg.hyperedges.retain(|h| h.root != 0 || h.members == vec![1]);
        hg.hyperedges.push(Hyperedge { root: 0, members: vec![0, 2] });
        hg.canonicalize();
        let d =
            Distribution::with_hypergraph(Arc::clone(&c), Arc::clone(&net), hg, vec![0, 1, 1], vec![1, 1, 1])
                .unwrap();
        let merged = d
            .hypergraph
            .hyperedges
            .iter()
            .position(|h| h.root == 0 && h.members.len() == 2)
            .unwrap();
        assert_eq!(hyperedge_cost(&d, merged).unwrap(), 1);
        // without the merge the two hyperedges cost 1 each
        let d2 = Distribution::new(c, net, vec![0, 1, 1], vec![1, 1, 1]).unwrap();
        assert_eq!(total_cost(&d2).unwrap(), 3);
    }

    #[test]
    fn unit_teardown_forces_relink() {
        // members on C, then a unit remote to B, then members on C again
        let c = Arc::new(
            Circuit::with_gates(
                3,
                vec![
                    Gate::CRz { q0: 0, q1: 2, phase: 0.5 },
                    Gate::H { q: 0 },
                    Gate::CRz { q0: 0, q1: 1, phase: 1.0 },
                    Gate::H { q: 0 },
                    Gate::CRz { q0: 0, q1: 2, phase: 0.25 },
                ],
            )
            .unwrap(),
        );
        let net = complete(&["A", "B", "C"], 3);
        let mut hg = build_hypergraph(&c).unwrap();
        hg.hyperedges.retain(|h| h.root != 0);
        hg.hyperedges.push(Hyperedge { root: 0, members: vec![0, 2] });
        hg.canonicalize();
        // q0 -> A, q1 -> B, q2 -> C, both members -> C
        let d = Distribution::with_hypergraph(c, net, hg, vec![0, 1, 2], vec![2, 2, 2]).unwrap();
        let merged = d
            .hypergraph
            .hyperedges
            .iter()
            .position(|h| h.root == 0 && h.members.len() == 2)
            .unwrap();
        // link C (1), link B for the unit (1) ending C, relink C (1)
        assert_eq!(hyperedge_cost(&d, merged).unwrap(), 3);
    }

    #[test]
    fn gains_match_recomputation() {
        let mut rng = ChaCha8Rng::seed_from_u64(23);
        for _ in 0..40 {
            let qubits = rng.gen_range(2..6);
            let mut c = Circuit::new(qubits);
            for _ in 0..rng.gen_range(1..20) {
                if rng.gen_bool(0.3) {
                    c.push(Gate::H { q: rng.gen_range(0..qubits) });
                } else {
                    let q0 = rng.gen_range(0..qubits);
                    let mut q1 = rng.gen_range(0..qubits);
                    while q1 == q0 {
                        q1 = rng.gen_range(0..qubits);
                    }
                    c.push(Gate::CRz { q0, q1, phase: rng.gen_range(0.0..2.0) });
                }
            }
            let net = complete(&["A", "B", "C"], 16);
            let hg = build_hypergraph(&c).unwrap();
            let ngates = hg.gate_vertices.len();
            let phi_q: Vec<usize> = (0..qubits).map(|_| rng.gen_range(0..3)).collect();
            let phi_g: Vec<usize> = (0..ngates).map(|_| rng.gen_range(0..3)).collect();
            let mut d = Distribution::new(Arc::new(c), net, phi_q, phi_g).unwrap();
            let inc = Incidence::new(&d.hypergraph);
            let before_cost = total_cost(&d).unwrap();
            let before_conn = d.connectivity_cost() as isize;
            for _ in 0..10 {
                let v = if ngates > 0 && rng.gen_bool(0.5) {
                    Vertex::Gate(rng.gen_range(0..ngates))
                } else {
                    Vertex::Qubit(rng.gen_range(0..qubits))
                };
                let target = rng.gen_range(0..3);
                let g_ebit = ebit_gain(&mut d, &inc, v, target).unwrap();
                let g_conn = connectivity_gain(&mut d, &inc, v, target);
                let old = d.module_of(v);
                apply_move(&mut d, v, target);
                assert_eq!(g_ebit, before_cost as isize - total_cost(&d).unwrap() as isize);
                assert_eq!(g_conn, before_conn - d.connectivity_cost() as isize);
                apply_move(&mut d, v, old);
            }
        }
    }

    #[test]
    fn inert_hyperedges_cost_nothing() {
        let d = Distribution::new(fig2(), complete(&["A", "B"], 4), vec![0; 4], vec![0; 5]).unwrap();
        assert_eq!(total_cost(&d).unwrap(), 0);
    }
}
