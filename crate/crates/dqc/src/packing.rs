//! Distributable packets and embedding units.
//!
//! A packet groups the non-local `CRz` gates sharing a root qubit and a
//! remote module that one gate-teleportation protocol can serve. With no
//! embedding, a packet cannot cross an `H` on the root, so the finest
//! packets live inside the windows delimited by the root's `H` gates.
//! An embedding unit is the span between two consecutive `H` gates that a
//! protocol may pass through at the price of local corrections; merging
//! chains packets across units, and two units on different roots claiming
//! the same `CZ` form an embedding conflict that the cover pass resolves.

use crate::circuit::{Circuit, Gate};
use crate::{phase_eq, Error, Result};
use serde_json::json;
use std::collections::{BTreeMap, BTreeSet};

/// A distributable packet: non-local `CRz` gates on `root` whose partners
/// live on `remote`, implementable by one protocol. `members` are circuit
/// positions in order. After merging, `embeddings` lists the units (indices
/// into the unit table) the protocol must embed to span its members.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Packet {
    pub root: usize,
    pub remote: usize,
    pub members: Vec<usize>,
    pub embeddings: Vec<usize>,
}

/// An embedding unit on `root`: the span between the `H` at position `open`
/// and the next `H` at `close` (consecutive on the root's timeline).
/// `remote` is the module the inner `CZ` partners live on, or `None` when
/// the unit holds no `CZ` and so embeds into a protocol toward any module.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EmbeddingUnit {
    pub root: usize,
    pub remote: Option<usize>,
    pub open: usize,
    pub close: usize,
    /// Index of the opening `H` among the root's `H` gates.
    pub hpair: usize,
    /// Positions of the embedded `CZ` gates acting on the root.
    pub inner: Vec<usize>,
    /// True when the unit's `Rz` run squashes to `Z`.
    pub z_flag: bool,
}

/// One packet embedding one unit.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub struct EmbeddingUse {
    pub packet: usize,
    pub unit: usize,
}

/// An embedding conflict: two uses on different roots embed the same `CZ`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Conflict {
    pub a: usize,
    pub b: usize,
    /// Positions of the `CZ` gates claimed by both.
    pub gates: Vec<usize>,
}

/// Conflicts among the embedding uses of a merged packing.
#[derive(Debug, Clone, Default)]
pub struct ConflictGraph {
    pub uses: Vec<EmbeddingUse>,
    pub edges: Vec<Conflict>,
}

/// Result of merging packets through embedding units.
#[derive(Debug, Clone)]
pub struct Merged {
    pub packets: Vec<Packet>,
    pub units: Vec<EmbeddingUnit>,
    pub conflicts: ConflictGraph,
}

/// Positions of the `H` gates on `q`, in circuit order.
pub fn h_positions(circuit: &Circuit, q: usize) -> Vec<usize> {
    circuit
        .timeline(q)
        .into_iter()
        .filter(|&p| matches!(circuit.gates[p], Gate::H { .. }))
        .collect()
}

/// Window index of position `pos` on a qubit with `H` gates at `hs`:
/// the number of `H` gates before it.
pub fn window_of(hs: &[usize], pos: usize) -> usize {
    hs.partition_point(|&h| h < pos)
}

/// The finest distributable packets of a rebased circuit under the qubit
/// allocation `phi_q`: one packet per (root, remote module, window) holding
/// that window's non-local `CRz` gates on the root. Every non-local `CRz`
/// lands in exactly two packets, one per endpoint.
pub fn identify_packets(circuit: &Circuit, phi_q: &[usize]) -> Vec<Packet> {
    let mut groups: BTreeMap<(usize, usize, usize), Vec<usize>> = BTreeMap::new();
    let hs: Vec<Vec<usize>> = (0..circuit.qubits).map(|q| h_positions(circuit, q)).collect();
    for (pos, gate) in circuit.gates.iter().enumerate() {
        if let Gate::CRz { q0, q1, .. } = *gate {
            for (root, partner) in [(q0, q1), (q1, q0)] {
                let b = phi_q[partner];
                if b != phi_q[root] {
                    let w = window_of(&hs[root], pos);
                    groups.entry((root, b, w)).or_default().push(pos);
                }
            }
        }
    }
    groups
        .into_iter()
        .map(|((root, remote, _), members)| Packet { root, remote, members, embeddings: Vec::new() })
        .collect()
}

/// All valid embedding units of a rebased circuit under `phi_q`: for every
/// pair of consecutive `H` gates on a qubit, the span qualifies when every
/// inner `CRz` on the root is a `CZ` whose partner sits on one common module
/// other than the root's, and the inner `Rz` run squashes to identity or `Z`.
pub fn identify_embedding_units(circuit: &Circuit, phi_q: &[usize]) -> Vec<EmbeddingUnit> {
    let mut units = Vec::new();
    for q in 0..circuit.qubits {
        let timeline = circuit.timeline(q);
        let hs: Vec<usize> =
            timeline.iter().copied().filter(|&p| matches!(circuit.gates[p], Gate::H { .. })).collect();
        for i in 0..hs.len().saturating_sub(1) {
            let (open, close) = (hs[i], hs[i + 1]);
            let mut inner = Vec::new();
            let mut remote = None;
            let mut rz_sum = 0.0f64;
            let mut ok = true;
            for &p in timeline.iter().filter(|&&p| p > open && p < close) {
                match circuit.gates[p] {
                    Gate::Rz { phase, .. } => rz_sum += phase,
                    Gate::CRz { q0, q1, phase } => {
                        let partner = if q0 == q { q1 } else { q0 };
                        let b = phi_q[partner];
                        if !phase_eq(phase, 1.0) || b == phi_q[q] || remote.is_some_and(|r| r != b) {
                            ok = false;
                            break;
                        }
                        remote = Some(b);
                        inner.push(p);
                    }
                    _ => unreachable!("consecutive H gates bound the span"),
                }
            }
            if !ok {
                continue;
            }
            let z_flag = if phase_eq(rz_sum, 0.0) {
                false
            } else if phase_eq(rz_sum, 1.0) {
                true
            } else {
                continue;
            };
            units.push(EmbeddingUnit { root: q, remote, open, close, hpair: i, inner, z_flag });
        }
    }
    units
}

/// Merge packets sharing a (root, remote) pair through the embedding units
/// between them, greedily and maximally: scan each pair's packets in window
/// order, absorbing every later packet reachable from the chain's end by
/// embedding whole units (an even count of `H` gates, each consecutive pair
/// a valid unit compatible with the chain's remote and free of `detached`
/// gates). Records every embedding in use and the conflict graph among uses
/// on different roots claiming the same `CZ`.
pub fn merge_packets(
    circuit: &Circuit,
    packets: &[Packet],
    units: &[EmbeddingUnit],
    detached: &BTreeSet<usize>,
) -> Result<Merged> {
    let hs: Vec<Vec<usize>> = (0..circuit.qubits).map(|q| h_positions(circuit, q)).collect();
    // unit lookup by (root, hpair)
    let by_span: BTreeMap<(usize, usize), usize> =
        units.iter().enumerate().map(|(i, u)| ((u.root, u.hpair), i)).collect();

    // group packet indices per (root, remote), ordered by window
    let mut families: BTreeMap<(usize, usize), Vec<(usize, usize)>> = BTreeMap::new();
    for (i, p) in packets.iter().enumerate() {
        let w = window_of(&hs[p.root], p.members[0]);
        families.entry((p.root, p.remote)).or_default().push((w, i));
    }

    let mut merged: Vec<Packet> = Vec::new();
    for ((root, remote), mut family) in families {
        family.sort_unstable();
        let mut consumed = vec![false; family.len()];
        for start in 0..family.len() {
            if consumed[start] {
                continue;
            }
            consumed[start] = true;
            let (mut end_w, first) = family[start];
            let mut chain = packets[first].clone();
            for later in start + 1..family.len() {
                if consumed[later] {
                    continue;
                }
                let (w, pk) = family[later];
                if (w - end_w) % 2 != 0 {
                    continue;
                }
                let gap: Option<Vec<usize>> = (end_w..w)
                    .step_by(2)
                    .map(|h| {
                        by_span.get(&(root, h)).copied().filter(|&u| {
                            (units[u].remote.is_none() || units[u].remote == Some(remote))
                                && units[u].inner.iter().all(|g| !detached.contains(g))
                        })
                    })
                    .collect();
                let Some(gap) = gap else { continue };
                consumed[later] = true;
                chain.members.extend_from_slice(&packets[pk].members);
                chain.embeddings.extend(gap);
                end_w = w;
            }
            chain.members.sort_unstable();
            merged.push(chain);
        }
    }

    // conflict graph over embedding uses
    let mut uses: Vec<EmbeddingUse> = Vec::new();
    let mut claimed: BTreeMap<usize, Vec<usize>> = BTreeMap::new(); // gate pos -> use ids
    for (pi, p) in merged.iter().enumerate() {
        for &u in &p.embeddings {
            let id = uses.len();
            uses.push(EmbeddingUse { packet: pi, unit: u });
            for &g in &units[u].inner {
                claimed.entry(g).or_default().push(id);
            }
        }
    }
    let mut edge_gates: BTreeMap<(usize, usize), Vec<usize>> = BTreeMap::new();
    for (g, ids) in &claimed {
        for (i, &a) in ids.iter().enumerate() {
            for &b in &ids[i + 1..] {
                if merged[uses[a].packet].root != merged[uses[b].packet].root {
                    let key = (a.min(b), a.max(b));
                    edge_gates.entry(key).or_default().push(*g);
                }
            }
        }
    }
    let edges: Vec<Conflict> =
        edge_gates.into_iter().map(|((a, b), gates)| Conflict { a, b, gates }).collect();

    // conflicts are bipartite per module pair; verify rather than assume
    let mut colour: Vec<Option<bool>> = vec![None; uses.len()];
    let mut adj: Vec<Vec<usize>> = vec![Vec::new(); uses.len()];
    for e in &edges {
        adj[e.a].push(e.b);
        adj[e.b].push(e.a);
    }
    for s in 0..uses.len() {
        if colour[s].is_some() {
            continue;
        }
        colour[s] = Some(false);
        let mut queue = vec![s];
        while let Some(v) = queue.pop() {
            let c = colour[v].unwrap();
            for &n in &adj[v] {
                match colour[n] {
                    None => {
                        colour[n] = Some(!c);
                        queue.push(n);
                    }
                    Some(nc) if nc == c => {
                        return Err(Error::NonBipartiteConflict(format!(
                            "odd conflict cycle through units on q{}",
                            merged[uses[n].packet].root
                        )));
                    }
                    _ => {}
                }
            }
        }
    }

    Ok(Merged { packets: merged, units: units.to_vec(), conflicts: ConflictGraph { uses, edges } })
}

impl Merged {
    /// Debug dump of the packets, units in use, and conflicts.
    pub fn to_json(&self) -> serde_json::Value {
        json!({
            "packets": self.packets.iter().map(|p| json!({
                "root": p.root,
                "remote": p.remote,
                "members": p.members,
                "embeddings": p.embeddings,
            })).collect::<Vec<_>>(),
            "units": self.units.iter().map(|u| json!({
                "root": u.root,
                "remote": u.remote,
                "span": [u.open, u.close],
                "inner": u.inner,
                "z": u.z_flag,
            })).collect::<Vec<_>>(),
            "conflicts": self.conflicts.edges.iter().map(|e| json!({
                "uses": [
                    [self.conflicts.uses[e.a].packet, self.conflicts.uses[e.a].unit],
                    [self.conflicts.uses[e.b].packet, self.conflicts.uses[e.b].unit],
                ],
                "gates": e.gates,
            })).collect::<Vec<_>>(),
        })
    }
}
