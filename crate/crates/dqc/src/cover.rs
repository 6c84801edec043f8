//! Vertex-cover distribution of non-local gates.
//!
//! Every non-local `CRz` belongs to exactly two distributable packets, one
//! per endpoint, so the packets form a graph whose edges are the gates and
//! a vertex cover of it is a set of protocols implementing every non-local
//! gate. The graph is bipartite (each component splits by root side within
//! one module pair), so a minimum cover comes from a maximum matching. The
//! chosen packets' required embeddings may conflict — two units on
//! different roots claiming the same `CZ` — and the smallest set of
//! embeddings to give up is again a minimum cover, this time of the
//! conflict graph; each abandoned embedding splits its packet in two.
//! Several randomized covers are scored by the cost engine and the
//! cheapest distribution wins.

use crate::circuit::Circuit;
use crate::cost::total_cost;
use crate::distribution::{build_hypergraph, Distribution, Hyperedge};
use crate::network::Network;
use crate::packing::{
    h_positions, identify_embedding_units, identify_packets, merge_packets, window_of,
    EmbeddingUnit, Merged, Packet,
};
use crate::{Error, Result};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::collections::{BTreeMap, BTreeSet};
use std::sync::Arc;

/// Distinct randomized covers scored per distribution attempt.
pub const COVER_ATTEMPTS: usize = 8;

/// Packets as vertices, non-local gates as edges.
#[derive(Debug, Clone)]
pub struct PacketGraph {
    pub vertices: usize,
    pub edges: Vec<PacketEdge>,
}

#[derive(Debug, Clone)]
pub struct PacketEdge {
    pub a: usize,
    pub b: usize,
    /// Circuit positions of the gates shared by the two packets.
    pub gates: Vec<usize>,
}

/// Build the packet graph: one edge per pair of packets sharing gates.
/// Every non-local `CRz` connects the two packets holding it.
pub fn packet_graph(packets: &[Packet]) -> PacketGraph {
    let mut holder: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    for (i, p) in packets.iter().enumerate() {
        for &g in &p.members {
            holder.entry(g).or_default().push(i);
        }
    }
    let mut edges: BTreeMap<(usize, usize), Vec<usize>> = BTreeMap::new();
    for (g, holders) in holder {
        debug_assert_eq!(holders.len(), 2, "gate {g} must sit in exactly two packets");
        let (a, b) = (holders[0].min(holders[1]), holders[0].max(holders[1]));
        edges.entry((a, b)).or_default().push(g);
    }
    PacketGraph {
        vertices: packets.len(),
        edges: edges.into_iter().map(|((a, b), gates)| PacketEdge { a, b, gates }).collect(),
    }
}

/// Minimum vertex cover of a bipartite graph via maximum matching: match
/// with augmenting paths, then take the unmatched left vertices' alternating
/// reachability `Z` and return `(L \ Z) ∪ (R ∩ Z)`. The traversal order is
/// randomized so repeated calls explore distinct minimum covers.
pub fn min_vertex_cover_bipartite(
    vertices: usize,
    edges: &[(usize, usize)],
    rng: &mut impl Rng,
) -> Result<Vec<usize>> {
    let mut adj: Vec<Vec<usize>> = vec![Vec::new(); vertices];
    for &(a, b) in edges {
        adj[a].push(b);
        adj[b].push(a);
    }
    // two-colour each component
    let mut side: Vec<Option<bool>> = vec![None; vertices];
    for s in 0..vertices {
        if side[s].is_some() || adj[s].is_empty() {
            continue;
        }
        side[s] = Some(false);
        let mut queue = vec![s];
        while let Some(v) = queue.pop() {
            let c = side[v].unwrap();
            for &n in &adj[v] {
                match side[n] {
                    None => {
                        side[n] = Some(!c);
                        queue.push(n);
                    }
                    Some(nc) if nc == c => {
                        return Err(Error::NotBipartite(format!(
                            "odd cycle through vertex {n}"
                        )));
                    }
                    _ => {}
                }
            }
        }
    }
    for a in &mut adj {
        a.shuffle(rng);
    }
    let mut left: Vec<usize> = (0..vertices).filter(|&v| side[v] == Some(false)).collect();
    left.shuffle(rng);

    // Kuhn's augmenting-path matching from the left side
    let mut matched: Vec<Option<usize>> = vec![None; vertices];
    fn augment(
        v: usize,
        adj: &[Vec<usize>],
        matched: &mut [Option<usize>],
        visited: &mut [bool],
    ) -> bool {
        for &n in &adj[v] {
            if visited[n] {
                continue;
            }
            visited[n] = true;
            let free = match matched[n] {
                None => true,
                Some(m) => augment(m, adj, matched, visited),
            };
            if free {
                matched[n] = Some(v);
                matched[v] = Some(n);
                return true;
            }
        }
        false
    }
    for &v in &left {
        if matched[v].is_none() {
            let mut visited = vec![false; vertices];
            augment(v, &adj, &mut matched, &mut visited);
        }
    }
    let matching = left.iter().filter(|&&v| matched[v].is_some()).count();

    // alternating reachability from unmatched left vertices
    let mut z = vec![false; vertices];
    let mut queue: Vec<usize> =
        left.iter().copied().filter(|&v| matched[v].is_none()).collect();
    for &v in &queue {
        z[v] = true;
    }
    while let Some(v) = queue.pop() {
        if side[v] == Some(false) {
            for &n in &adj[v] {
                if matched[v] != Some(n) && !z[n] {
                    z[n] = true;
                    queue.push(n);
                }
            }
        } else if let Some(m) = matched[v] {
            if !z[m] {
                z[m] = true;
                queue.push(m);
            }
        }
    }
    let mut cover: Vec<usize> = (0..vertices)
        .filter(|&v| match side[v] {
            Some(false) => !z[v],
            Some(true) => z[v],
            None => false,
        })
        .collect();
    debug_assert_eq!(cover.len(), matching, "König: cover size equals matching size");
    cover.shuffle(rng);
    Ok(cover)
}

/// Split `packet` by abandoning the units in `dropped`: members before each
/// abandoned span go to one segment, members after to the next; kept units
/// stay with the segment whose members straddle them, and units left with
/// members on only one side are no longer required at all.
fn split_packet(packet: &Packet, units: &[EmbeddingUnit], dropped: &BTreeSet<usize>) -> Vec<Packet> {
    let mut cuts: Vec<(usize, usize)> =
        dropped.iter().map(|&u| (units[u].open, units[u].close)).collect();
    cuts.sort_unstable();
    let mut segments: Vec<Vec<usize>> = vec![Vec::new()];
    let mut next_cut = 0usize;
    for &g in &packet.members {
        while next_cut < cuts.len() && g > cuts[next_cut].1 {
            next_cut += 1;
            segments.push(Vec::new());
        }
        segments.last_mut().unwrap().push(g);
    }
    segments.retain(|s| !s.is_empty());
    segments
        .into_iter()
        .map(|members| {
            let (lo, hi) = (members[0], *members.last().unwrap());
            let embeddings = packet
                .embeddings
                .iter()
                .copied()
                .filter(|u| !dropped.contains(u) && lo < units[*u].open && units[*u].close < hi)
                .collect();
            Packet { root: packet.root, remote: packet.remote, members, embeddings }
        })
        .collect()
}

/// Outcome of one cover attempt: the final packet table (chosen packets may
/// have been split) and the chosen packet indices in cover order.
#[derive(Debug, Clone)]
pub struct CoverOutcome {
    pub packets: Vec<Packet>,
    pub chosen: Vec<usize>,
}

/// Resolve embedding conflicts among the chosen packets: cover the conflict
/// subgraph induced by their embeddings, abandon the covered embeddings, and
/// split the owning packets. Errors with `ConflictDetected` if two chosen
/// packets on different roots still embed the same gate afterwards.
pub fn resolve_conflicts(
    merged: &Merged,
    cover: &[usize],
    rng: &mut impl Rng,
) -> Result<CoverOutcome> {
    let chosen_set: BTreeSet<usize> = cover.iter().copied().collect();
    let kappa: Vec<usize> = (0..merged.conflicts.uses.len())
        .filter(|&u| chosen_set.contains(&merged.conflicts.uses[u].packet))
        .collect();
    let index_of: BTreeMap<usize, usize> =
        kappa.iter().enumerate().map(|(i, &u)| (u, i)).collect();
    let edges: Vec<(usize, usize)> = merged
        .conflicts
        .edges
        .iter()
        .filter_map(|e| Some((*index_of.get(&e.a)?, *index_of.get(&e.b)?)))
        .collect();
    let give_up = min_vertex_cover_bipartite(kappa.len(), &edges, rng)?;

    let mut drops: BTreeMap<usize, BTreeSet<usize>> = BTreeMap::new();
    for &k in &give_up {
        let u = merged.conflicts.uses[kappa[k]];
        drops.entry(u.packet).or_default().insert(u.unit);
    }

    let mut packets = Vec::new();
    let mut chosen = Vec::new();
    let mut replacement: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    for (i, p) in merged.packets.iter().enumerate() {
        match drops.get(&i) {
            Some(dropped) => {
                let segments = split_packet(p, &merged.units, dropped);
                let ids: Vec<usize> = (packets.len()..packets.len() + segments.len()).collect();
                packets.extend(segments);
                replacement.insert(i, ids);
            }
            None => {
                replacement.insert(i, vec![packets.len()]);
                packets.push(p.clone());
            }
        }
    }
    for &c in cover {
        chosen.extend(replacement[&c].iter().copied());
    }

    // defensive: no gate may stay embedded from both of its roots
    let mut claimed: BTreeMap<usize, usize> = BTreeMap::new();
    for &c in &chosen {
        for &u in &packets[c].embeddings {
            for &g in &merged.units[u].inner {
                if let Some(&root) = claimed.get(&g) {
                    if root != packets[c].root {
                        return Err(Error::ConflictDetected(format!(
                            "gate at {g} embedded from q{root} and q{}",
                            packets[c].root
                        )));
                    }
                } else {
                    claimed.insert(g, packets[c].root);
                }
            }
        }
    }
    Ok(CoverOutcome { packets, chosen })
}

/// Turn a cover outcome into a full distribution: allocate every covered
/// gate to its first chosen packet's remote module, local gates to their
/// common module, and rebuild the hypergraph so each root's hyperedges are
/// its final packets plus per-window groups of its local gates.
pub fn realize(
    circuit: &Arc<Circuit>,
    network: &Arc<Network>,
    phi_q: &[usize],
    outcome: &CoverOutcome,
) -> Result<Distribution> {
    let base = build_hypergraph(circuit)?;
    let gate_at = base.pos_to_gate();
    let mut phi_gates: Vec<Option<usize>> = vec![None; base.gate_vertices.len()];
    for (i, gv) in base.gate_vertices.iter().enumerate() {
        if phi_q[gv.q0] == phi_q[gv.q1] {
            phi_gates[i] = Some(phi_q[gv.q0]);
        }
    }
    for &c in &outcome.chosen {
        let p = &outcome.packets[c];
        for &g in &p.members {
            let i = gate_at[&g];
            if phi_gates[i].is_none() {
                phi_gates[i] = Some(p.remote);
            }
        }
    }
    let phi_gates: Vec<usize> = phi_gates
        .into_iter()
        .enumerate()
        .map(|(i, m)| {
            m.ok_or_else(|| {
                Error::Infeasible(format!(
                    "non-local gate at position {} left uncovered",
                    base.gate_vertices[i].pos
                ))
            })
        })
        .collect::<Result<_>>()?;

    let mut hyperedges: Vec<Hyperedge> = Vec::new();
    for p in &outcome.packets {
        let members = p.members.iter().map(|&g| gate_at[&g]).collect();
        hyperedges.push(Hyperedge { root: p.root, members });
    }
    let hs: Vec<Vec<usize>> = (0..circuit.qubits).map(|q| h_positions(circuit, q)).collect();
    let mut local: BTreeMap<(usize, usize), Vec<usize>> = BTreeMap::new();
    for (i, gv) in base.gate_vertices.iter().enumerate() {
        if phi_q[gv.q0] == phi_q[gv.q1] {
            for q in [gv.q0, gv.q1] {
                local.entry((q, window_of(&hs[q], gv.pos))).or_default().push(i);
            }
        }
    }
    for ((root, _), members) in local {
        hyperedges.push(Hyperedge { root, members });
    }
    let mut hg = crate::distribution::Hypergraph {
        qubits: base.qubits,
        gate_vertices: base.gate_vertices,
        hyperedges,
    };
    hg.canonicalize();
    Distribution::with_hypergraph(
        Arc::clone(circuit),
        Arc::clone(network),
        hg,
        phi_q.to_vec(),
        phi_gates,
    )
}

/// Distribute a circuit's non-local gates by vertex cover with embedding:
/// identify and merge packets, then try several randomized minimum covers,
/// resolving conflicts in each, and keep the cheapest valid distribution.
pub fn distribute_by_cover(
    circuit: &Arc<Circuit>,
    network: &Arc<Network>,
    phi_q: &[usize],
    seed: u64,
) -> Result<Distribution> {
    let packets = identify_packets(circuit, phi_q);
    let units = identify_embedding_units(circuit, phi_q);
    let merged = merge_packets(circuit, &packets, &units, &BTreeSet::new())?;
    let graph = packet_graph(&merged.packets);
    let edge_pairs: Vec<(usize, usize)> = graph.edges.iter().map(|e| (e.a, e.b)).collect();

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut best: Option<(usize, Distribution)> = None;
    let mut seen: BTreeSet<Vec<usize>> = BTreeSet::new();
    for _ in 0..COVER_ATTEMPTS {
        let cover = min_vertex_cover_bipartite(graph.vertices, &edge_pairs, &mut rng)?;
        let outcome = resolve_conflicts(&merged, &cover, &mut rng)?;
        let mut key: Vec<usize> = outcome.chosen.clone();
        key.sort_unstable();
        if !seen.insert(key) {
            continue;
        }
        let dist = realize(circuit, network, phi_q, &outcome)?;
        let cost = total_cost(&dist)?;
        if best.as_ref().is_none_or(|(c, _)| cost < *c) {
            best = Some((cost, dist));
        }
    }
    Ok(best.expect("at least one cover attempt").1)
}
