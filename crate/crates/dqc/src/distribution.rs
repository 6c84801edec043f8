//! Hypergraph intermediate representation and distributions.
//!
//! Each qubit is a qubit-vertex and each `CRz` a gate-vertex. A hyperedge
//! groups one root qubit-vertex with gate-vertices acting on it; `H` gates
//! close hyperedges at build time, `Rz` gates never do. A [`Distribution`]
//! adds an allocation of every vertex to a network module. The connectivity
//! metric counts, per hyperedge, the modules it spans beyond the first; on
//! fully connected networks this equals the ebit count of the built circuit.

use crate::circuit::{Circuit, Gate};
use crate::network::Network;
use crate::{phase_eq, Error, Result};
use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::sync::Arc;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Vertex {
    Qubit(usize),
    Gate(usize),
}

impl fmt::Display for Vertex {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Vertex::Qubit(q) => write!(f, "q{q}"),
            Vertex::Gate(g) => write!(f, "g{g}"),
        }
    }
}

impl std::str::FromStr for Vertex {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        let (tag, idx) = s.split_at(1);
        let idx: usize = idx.parse().map_err(|_| Error::UnknownVertex(s.into()))?;
        match tag {
            "q" => Ok(Vertex::Qubit(idx)),
            "g" => Ok(Vertex::Gate(idx)),
            _ => Err(Error::UnknownVertex(s.into())),
        }
    }
}

/// A two-qubit gate vertex: its circuit position, qubits and phase.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GateVertex {
    pub pos: usize,
    pub q0: usize,
    pub q1: usize,
    pub phase: f64,
}

impl GateVertex {
    pub fn other_qubit(&self, q: usize) -> usize {
        if self.q0 == q {
            self.q1
        } else {
            self.q0
        }
    }

    pub fn acts_on(&self, q: usize) -> bool {
        self.q0 == q || self.q1 == q
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Hyperedge {
    pub root: usize,
    /// Gate-vertex ids, sorted by circuit position.
    pub members: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Hypergraph {
    pub qubits: usize,
    pub gate_vertices: Vec<GateVertex>,
    pub hyperedges: Vec<Hyperedge>,
}

impl Hypergraph {
    pub fn vertex_count(&self) -> usize {
        self.qubits + self.gate_vertices.len()
    }

    /// Map circuit position -> gate-vertex id.
    pub fn pos_to_gate(&self) -> BTreeMap<usize, usize> {
        self.gate_vertices.iter().enumerate().map(|(i, g)| (g.pos, i)).collect()
    }

    /// Hyperedge ids containing gate-vertex `g`.
    pub fn hyperedges_of_gate(&self, g: usize) -> Vec<usize> {
        self.hyperedges
            .iter()
            .enumerate()
            .filter(|(_, h)| h.members.binary_search_by_key(&self.gate_vertices[g].pos, |&m| self.gate_vertices[*&m].pos).is_ok() && h.members.contains(&g))
            .map(|(i, _)| i)
            .collect()
    }

    /// Sort hyperedges canonically: by (root, position of first member).
    pub fn canonicalize(&mut self) {
        for h in &mut self.hyperedges {
            h.members.sort_by_key(|&g| self.gate_vertices[g].pos);
            h.members.dedup();
        }
        self.hyperedges.retain(|h| !h.members.is_empty());
        let gv = &self.gate_vertices;
        self.hyperedges
            .sort_by_key(|h| (h.root, gv[h.members[0]].pos));
    }

    /// Structural audit: every gate-vertex appears in exactly two hyperedges,
    /// rooted at its two qubits.
    pub fn audit(&self) -> Result<()> {
        let mut seen: Vec<Vec<usize>> = vec![Vec::new(); self.gate_vertices.len()];
        for (i, h) in self.hyperedges.iter().enumerate() {
            if h.root >= self.qubits {
                return Err(Error::UnknownVertex(format!("q{}", h.root)));
            }
            for &g in &h.members {
                if g >= self.gate_vertices.len() {
                    return Err(Error::UnknownVertex(format!("g{g}")));
                }
                if !self.gate_vertices[g].acts_on(h.root) {
                    return Err(Error::InvalidHyperedge(format!(
                        "g{g} does not act on root q{}",
                        h.root
                    )));
                }
                seen[g].push(i);
            }
        }
        for (g, hs) in seen.iter().enumerate() {
            if hs.len() != 2 {
                return Err(Error::InvalidHyperedge(format!(
                    "g{g} appears in {} hyperedges, expected 2",
                    hs.len()
                )));
            }
            let roots: BTreeSet<usize> = hs.iter().map(|&h| self.hyperedges[h].root).collect();
            let want: BTreeSet<usize> =
                [self.gate_vertices[g].q0, self.gate_vertices[g].q1].into_iter().collect();
            if roots != want {
                return Err(Error::InvalidHyperedge(format!(
                    "g{g} is rooted at {roots:?}, expected {want:?}"
                )));
            }
        }
        Ok(())
    }
}

/// Build the hypergraph of a rebased circuit: scan each qubit's timeline,
/// collecting `CRz` gate-vertices into a growing hyperedge that an `H` closes.
/// Hyperedges without gate-vertices are dropped.
pub fn build_hypergraph(circuit: &Circuit) -> Result<Hypergraph> {
    let mut gate_vertices = Vec::new();
    let mut pos_to_gv = BTreeMap::new();
    for (pos, g) in circuit.gates.iter().enumerate() {
        match *g {
            Gate::CRz { q0, q1, phase } => {
                pos_to_gv.insert(pos, gate_vertices.len());
                gate_vertices.push(GateVertex { pos, q0, q1, phase });
            }
            Gate::H { .. } | Gate::Rz { .. } => {}
            other => return Err(Error::NotRebased(other.name().into())),
        }
    }
    let mut hyperedges = Vec::new();
    for q in 0..circuit.qubits {
        let mut current: Vec<usize> = Vec::new();
        for pos in circuit.timeline(q) {
            match circuit.gates[pos] {
                Gate::H { .. } => {
                    if !current.is_empty() {
                        hyperedges.push(Hyperedge { root: q, members: std::mem::take(&mut current) });
                    }
                }
                Gate::CRz { .. } => current.push(pos_to_gv[&pos]),
                Gate::Rz { .. } => {}
                _ => unreachable!("checked rebased above"),
            }
        }
        if !current.is_empty() {
            hyperedges.push(Hyperedge { root: q, members: current });
        }
    }
    let mut hg = Hypergraph { qubits: circuit.qubits, gate_vertices, hyperedges };
    hg.canonicalize();
    Ok(hg)
}

/// A hypergraph with every vertex allocated to a module of a network.
#[derive(Debug, Clone)]
pub struct Distribution {
    pub circuit: Arc<Circuit>,
    pub network: Arc<Network>,
    pub hypergraph: Hypergraph,
    /// Module of each qubit-vertex.
    pub phi_qubits: Vec<usize>,
    /// Module of each gate-vertex.
    pub phi_gates: Vec<usize>,
}

impl Distribution {
    pub fn new(
        circuit: Arc<Circuit>,
        network: Arc<Network>,
        phi_qubits: Vec<usize>,
        phi_gates: Vec<usize>,
    ) -> Result<Self> {
        let hypergraph = build_hypergraph(&circuit)?;
        Self::with_hypergraph(circuit, network, hypergraph, phi_qubits, phi_gates)
    }

    pub fn with_hypergraph(
        circuit: Arc<Circuit>,
        network: Arc<Network>,
        hypergraph: Hypergraph,
        phi_qubits: Vec<usize>,
        phi_gates: Vec<usize>,
    ) -> Result<Self> {
        if phi_qubits.len() != circuit.qubits {
            return Err(Error::InvalidParams(format!(
                "phi covers {} qubits, circuit has {}",
                phi_qubits.len(),
                circuit.qubits
            )));
        }
        if phi_gates.len() != hypergraph.gate_vertices.len() {
            return Err(Error::InvalidParams(format!(
                "phi covers {} gate-vertices, hypergraph has {}",
                phi_gates.len(),
                hypergraph.gate_vertices.len()
            )));
        }
        let nm = network.module_count();
        for &m in phi_qubits.iter().chain(phi_gates.iter()) {
            if m >= nm {
                return Err(Error::UnknownModule(format!("module index {m}")));
            }
        }
        Ok(Distribution { circuit, network, hypergraph, phi_qubits, phi_gates })
    }

    pub fn module_of(&self, v: Vertex) -> usize {
        match v {
            Vertex::Qubit(q) => self.phi_qubits[q],
            Vertex::Gate(g) => self.phi_gates[g],
        }
    }

    /// Distinct modules spanned by hyperedge `h` (root plus gate-vertices).
    pub fn hyperedge_modules(&self, h: usize) -> BTreeSet<usize> {
        let he = &self.hypergraph.hyperedges[h];
        let mut s = BTreeSet::from([self.phi_qubits[he.root]]);
        s.extend(he.members.iter().map(|&g| self.phi_gates[g]));
        s
    }

    pub fn is_cut(&self, h: usize) -> bool {
        self.hyperedge_modules(h).len() > 1
    }

    /// Sum over hyperedges of (modules spanned - 1).
    pub fn connectivity_cost(&self) -> usize {
        (0..self.hypergraph.hyperedges.len())
            .map(|h| self.hyperedge_modules(h).len() - 1)
            .sum()
    }

    /// Qubits allocated to each module.
    pub fn occupancy(&self) -> Vec<usize> {
        let mut occ = vec![0usize; self.network.module_count()];
        for &m in &self.phi_qubits {
            occ[m] += 1;
        }
        occ
    }

    /// True when a non-local gate's vertex sits on neither of its qubits' modules.
    pub fn is_detached(&self, g: usize) -> bool {
        let gv = &self.hypergraph.gate_vertices[g];
        let m = self.phi_gates[g];
        m != self.phi_qubits[gv.q0] && m != self.phi_qubits[gv.q1]
    }

    pub fn detached_count(&self) -> usize {
        (0..self.phi_gates.len()).filter(|&g| self.is_detached(g)).count()
    }

    pub fn non_local_count(&self) -> usize {
        self.hypergraph
            .gate_vertices
            .iter()
            .filter(|gv| self.phi_qubits[gv.q0] != self.phi_qubits[gv.q1])
            .count()
    }

    /// Full validity check: structural audit, capacity constraints and
    /// hyperedge walkability (every gate distributable or embeddable).
    pub fn check_validity(&self) -> ValidityReport {
        let mut violations = Vec::new();
        if let Err(e) = self.hypergraph.audit() {
            violations.push(e.to_string());
        }
        let occ = self.occupancy();
        for m in 0..self.network.module_count() {
            if occ[m] > self.network.comp_capacity(m) as usize {
                violations.push(format!(
                    "module {} holds {} qubits, capacity {}",
                    self.network.name(m),
                    occ[m],
                    self.network.comp_capacity(m)
                ));
            }
        }
        for h in 0..self.hypergraph.hyperedges.len() {
            if let Err(e) = hyperedge_events(self, h) {
                violations.push(format!("hyperedge {h}: {e}"));
            }
        }
        ValidityReport { violations }
    }

    /// Circuit positions of gates embedded inside some active hyperedge's
    /// embedding unit. These may not be reallocated by the detached-gate
    /// refiner and refuse further embedding.
    pub fn embedded_gate_positions(&self) -> BTreeSet<usize> {
        let mut out = BTreeSet::new();
        for h in 0..self.hypergraph.hyperedges.len() {
            if let Ok(events) = hyperedge_events(self, h) {
                for ev in events {
                    if let HedgeEvent::Unit(u) = ev {
                        out.extend(u.inner_czs.iter().copied());
                    }
                }
            }
        }
        out
    }

    pub fn to_json_value(&self, ebits: usize) -> serde_json::Value {
        let mut phi = serde_json::Map::new();
        for (q, &m) in self.phi_qubits.iter().enumerate() {
            phi.insert(format!("q{q}"), self.network.name(m).into());
        }
        for (g, &m) in self.phi_gates.iter().enumerate() {
            phi.insert(format!("g{g}"), self.network.name(m).into());
        }
        let hyperedges: Vec<Vec<String>> = self
            .hypergraph
            .hyperedges
            .iter()
            .map(|h| {
                std::iter::once(format!("q{}", h.root))
                    .chain(h.members.iter().map(|g| format!("g{g}")))
                    .collect()
            })
            .collect();
        let modules: Vec<Vec<String>> = (0..self.hypergraph.hyperedges.len())
            .map(|h| {
                self.hyperedge_modules(h)
                    .into_iter()
                    .map(|m| self.network.name(m).to_string())
                    .collect()
            })
            .collect();
        serde_json::json!({
            "phi": phi,
            "hyperedges": hyperedges,
            "hyperedge_modules": modules,
            "ebits": ebits,
        })
    }

    pub fn to_json(&self, ebits: usize) -> String {
        serde_json::to_string_pretty(&self.to_json_value(ebits)).expect("distribution serialises")
    }

    pub fn from_json_value(
        v: &serde_json::Value,
        circuit: Arc<Circuit>,
        network: Arc<Network>,
    ) -> Result<Self> {
        let base = build_hypergraph(&circuit)?;
        let phi = v["phi"]
            .as_object()
            .ok_or_else(|| Error::Parse("distribution JSON needs a phi object".into()))?;
        let mut phi_qubits = vec![usize::MAX; circuit.qubits];
        let mut phi_gates = vec![usize::MAX; base.gate_vertices.len()];
        for (key, val) in phi {
            let vertex: Vertex = key.parse()?;
            let name = val
                .as_str()
                .ok_or_else(|| Error::Parse(format!("phi[{key}] must be a module name")))?;
            let m = network.index_of(name)?;
            match vertex {
                Vertex::Qubit(q) if q < phi_qubits.len() => phi_qubits[q] = m,
                Vertex::Gate(g) if g < phi_gates.len() => phi_gates[g] = m,
                other => return Err(Error::UnknownVertex(other.to_string())),
            }
        }
        if phi_qubits.iter().chain(phi_gates.iter()).any(|&m| m == usize::MAX) {
            return Err(Error::Parse("phi does not cover every vertex".into()));
        }
        let hedges = v["hyperedges"]
            .as_array()
            .ok_or_else(|| Error::Parse("distribution JSON needs hyperedges".into()))?;
        let mut hyperedges = Vec::new();
        for he in hedges {
            let items = he
                .as_array()
                .ok_or_else(|| Error::Parse("hyperedge must be an array".into()))?;
            let mut root = None;
            let mut members = Vec::new();
            for item in items {
                let s = item
                    .as_str()
                    .ok_or_else(|| Error::Parse("hyperedge entries are vertex names".into()))?;
                match s.parse::<Vertex>()? {
                    Vertex::Qubit(q) => {
                        if root.replace(q).is_some() {
                            return Err(Error::InvalidHyperedge(
                                "hyperedge lists two qubit-vertices".into(),
                            ));
                        }
                    }
                    Vertex::Gate(g) => members.push(g),
                }
            }
            let root = root
                .ok_or_else(|| Error::InvalidHyperedge("hyperedge lacks a qubit-vertex".into()))?;
            hyperedges.push(Hyperedge { root, members });
        }
        let mut hg = Hypergraph {
            qubits: circuit.qubits,
            gate_vertices: base.gate_vertices,
            hyperedges,
        };
        hg.canonicalize();
        hg.audit()?;
        Distribution::with_hypergraph(circuit, network, hg, phi_qubits, phi_gates)
    }
}

#[derive(Debug, Clone)]
pub struct ValidityReport {
    pub violations: Vec<String>,
}

impl ValidityReport {
    pub fn is_ok(&self) -> bool {
        self.violations.is_empty()
    }
}

// --- hyperedge walk ----------------------------------------------------------

/// An embedding unit inside a hyperedge: the span between two consecutive `H`
/// gates on the root qubit, everything inside commuting into the protocol with
/// local corrections on the linked modules.
#[derive(Debug, Clone, PartialEq)]
pub struct UnitInfo {
    /// Circuit position of the opening `H` on the root qubit.
    pub open: usize,
    /// Circuit position of the closing `H`.
    pub close: usize,
    /// Module whose link must survive the unit so that the embedded `CZ`
    /// corrections stay local. `None` when the unit holds no `CZ`: such a
    /// unit is a wildcard — its `H`/`Z` corrections are local on any link,
    /// so every live link passes through untouched.
    pub remote: Option<usize>,
    /// Circuit positions of embedded `CRz` gates acting on the root.
    pub inner_czs: Vec<usize>,
    /// True when the unit's squashed `Rz` run equals `Z` (needs a correction).
    pub z_correction: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub enum HedgeEvent {
    /// A member gate-vertex to implement at its allocated module.
    Distribute { gate: usize, pos: usize, module: usize },
    /// An embedding unit to pass through.
    Unit(UnitInfo),
}

/// Walk hyperedge `h` along its root qubit's timeline, from first to last
/// member, yielding distribute events and embedding units. Errors describe
/// why the hyperedge is invalid. Hyperedges whose members all sit on the
/// root's module are inert: no protocol runs, so no events are produced.
pub fn hyperedge_events(dist: &Distribution, h: usize) -> Result<Vec<HedgeEvent>> {
    let hg = &dist.hypergraph;
    let he = &hg.hyperedges[h];
    let root = he.root;
    let home = dist.phi_qubits[root];
    if he.members.is_empty() {
        return Ok(Vec::new());
    }
    if !he.members.iter().any(|&g| dist.phi_gates[g] != home) {
        return Ok(Vec::new());
    }
    let member_pos: BTreeMap<usize, usize> =
        he.members.iter().map(|&g| (hg.gate_vertices[g].pos, g)).collect();
    let first = *member_pos.keys().next().unwrap();
    let last = *member_pos.keys().next_back().unwrap();
    let timeline: Vec<usize> = dist
        .circuit
        .timeline(root)
        .into_iter()
        .filter(|&p| p >= first && p <= last)
        .collect();

    let mut events = Vec::new();
    let mut i = 0usize;
    while i < timeline.len() {
        let pos = timeline[i];
        if let Some(&g) = member_pos.get(&pos) {
            events.push(HedgeEvent::Distribute { gate: g, pos, module: dist.phi_gates[g] });
            i += 1;
            continue;
        }
        match dist.circuit.gates[pos] {
            Gate::Rz { .. } | Gate::CRz { .. } => {
                // diagonal on the root: commutes with the protocol
                i += 1;
            }
            Gate::H { .. } => {
                // embedding unit: runs to the next H on the root's timeline
                let mut j = i + 1;
                let mut close = None;
                while j < timeline.len() {
                    let p = timeline[j];
                    if member_pos.contains_key(&p) {
                        return Err(Error::InvalidHyperedge(format!(
                            "member gate at position {p} inside an embedding unit of q{root}"
                        )));
                    }
                    if matches!(dist.circuit.gates[p], Gate::H { .. }) {
                        close = Some(j);
                        break;
                    }
                    j += 1;
                }
                let close_idx = close.ok_or_else(|| {
                    Error::InvalidHyperedge(format!(
                        "unpaired H at position {pos} on q{root} cannot be embedded"
                    ))
                })?;
                let mut inner_czs = Vec::new();
                let mut remote: Option<usize> = None;
                let mut rz_sum = 0.0f64;
                for &p in &timeline[i + 1..close_idx] {
                    match dist.circuit.gates[p] {
                        Gate::Rz { phase, .. } => rz_sum += phase,
                        Gate::CRz { q0, q1, phase } => {
                            if !phase_eq(phase, 1.0) {
                                return Err(Error::InvalidHyperedge(format!(
                                    "CRz at position {p} inside a unit of q{root} has phase {phase}, needs pi"
                                )));
                            }
                            let partner = if q0 == root { q1 } else { q0 };
                            let pm = dist.phi_qubits[partner];
                            if pm == home {
                                return Err(Error::InvalidHyperedge(format!(
                                    "CRz at position {p} inside a unit of q{root} is local to its module"
                                )));
                            }
                            if let Some(b) = remote {
                                if b != pm {
                                    return Err(Error::InvalidHyperedge(format!(
                                        "unit on q{root} mixes remote modules {} and {}",
                                        dist.network.name(b),
                                        dist.network.name(pm)
                                    )));
                                }
                            }
                            remote = Some(pm);
                            inner_czs.push(p);
                        }
                        Gate::H { .. } => unreachable!("closing H found above"),
                        _ => {}
                    }
                }
                let z_correction = if phase_eq(rz_sum, 0.0) {
                    false
                } else if phase_eq(rz_sum, 1.0) {
                    true
                } else {
                    return Err(Error::InvalidHyperedge(format!(
                        "Rz run inside a unit of q{root} squashes to {rz_sum} half-turns, needs 0 or 1"
                    )));
                };
                events.push(HedgeEvent::Unit(UnitInfo {
                    open: pos,
                    close: timeline[close_idx],
                    remote,
                    inner_czs,
                    z_correction,
                }));
                i = close_idx + 1;
            }
            _ => return Err(Error::NotRebased(dist.circuit.gates[pos].name().into())),
        }
    }
    Ok(events)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::circuit::Gate;

    /// Four-qubit fixture: two-module optimum cuts exactly two hyperedges.
    pub fn fig2_circuit() -> Circuit {
        Circuit::with_gates(
            4,
            vec![
                Gate::CRz { q0: 0, q1: 2, phase: 0.3 },  // alpha
                Gate::CRz { q0: 1, q1: 2, phase: 0.7 },  // beta
                Gate::H { q: 2 },
                Gate::H { q: 1 },
                Gate::CRz { q0: 2, q1: 3, phase: 1.3 },  // gamma
                Gate::H { q: 2 },
                Gate::CRz { q0: 1, q1: 2, phase: 0.9 },  // delta
                Gate::H { q: 3 },
                Gate::CRz { q0: 1, q1: 3, phase: 1.7 },  // epsilon
            ],
        )
        .unwrap()
    }

    #[test]
    fn hypergraph_of_fig2() {
        let hg = build_hypergraph(&fig2_circuit()).unwrap();
        assert_eq!(hg.qubits, 4);
        assert_eq!(hg.gate_vertices.len(), 5);
        let sets: Vec<(usize, Vec<usize>)> =
            hg.hyperedges.iter().map(|h| (h.root, h.members.clone())).collect();
        assert_eq!(
            sets,
            vec![
                (0, vec![0]),       // {q0, alpha}
                (1, vec![1]),       // {q1, beta}
                (1, vec![3, 4]),    // {q1, delta, epsilon}
                (2, vec![0, 1]),    // {q2, alpha, beta}
                (2, vec![2]),       // {q2, gamma}
                (2, vec![3]),       // {q2, delta}
                (3, vec![2]),       // {q3, gamma}
                (3, vec![4]),       // {q3, epsilon}
            ]
        );
        hg.audit().unwrap();
    }

    #[test]
    fn no_crz_means_no_hyperedges() {
        let c = Circuit::with_gates(
            3,
            vec![Gate::H { q: 0 }, Gate::Rz { q: 1, phase: 0.5 }, Gate::H { q: 2 }],
        )
        .unwrap();
        let hg = build_hypergraph(&c).unwrap();
        assert_eq!(hg.hyperedges.len(), 0);
        assert_eq!(hg.vertex_count(), 3);
    }

    #[test]
    fn rz_does_not_close_hyperedges() {
        let c = Circuit::with_gates(
            2,
            vec![
                Gate::CRz { q0: 0, q1: 1, phase: 0.5 },
                Gate::Rz { q: 0, phase: 0.25 },
                Gate::CRz { q0: 0, q1: 1, phase: 0.5 },
            ],
        )
        .unwrap();
        let hg = build_hypergraph(&c).unwrap();
        assert_eq!(hg.hyperedges.len(), 2);
        assert_eq!(hg.hyperedges[0].members, vec![0, 1]);
        assert_eq!(hg.hyperedges[1].members, vec![0, 1]);
    }

    #[test]
    fn build_rejects_unrebased() {
        let c = Circuit::with_gates(2, vec![Gate::CX { q0: 0, q1: 1 }]).unwrap();
        assert!(matches!(build_hypergraph(&c), Err(Error::NotRebased(_))));
    }

    fn two_modules() -> Arc<Network> {
        Arc::new(
            Network::new(
                vec![("A".into(), 2, None), ("B".into(), 2, None)],
                vec![("A".into(), "B".into())],
            )
            .unwrap(),
        )
    }

    #[test]
    fn fig2_optimal_partition_costs_two() {
        let c = Arc::new(fig2_circuit());
        let net = two_modules();
        // q0,q1 -> A; q2,q3 -> B; alpha,beta -> A; gamma,delta,epsilon -> B
        let d = Distribution::new(c, net, vec![0, 0, 1, 1], vec![0, 0, 1, 1, 1]).unwrap();
        assert_eq!(d.connectivity_cost(), 2);
        assert!(d.check_validity().is_ok());
        assert_eq!(d.non_local_count(), 4); // gamma acts within module B
        assert_eq!(d.detached_count(), 0);
    }

    #[test]
    fn connectivity_matches_naive_recount() {
        use rand::{Rng, SeedableRng};
        use rand_chacha::ChaCha8Rng;
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..50 {
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
            let net = Arc::new(
                Network::new(
                    vec![
                        ("A".into(), 8, None),
                        ("B".into(), 8, None),
                        ("C".into(), 8, None),
                    ],
                    vec![
                        ("A".into(), "B".into()),
                        ("B".into(), "C".into()),
                        ("A".into(), "C".into()),
                    ],
                )
                .unwrap(),
            );
            let hg = build_hypergraph(&c).unwrap();
            let phi_q: Vec<usize> = (0..qubits).map(|_| rng.gen_range(0..3)).collect();
            let phi_g: Vec<usize> =
                (0..hg.gate_vertices.len()).map(|_| rng.gen_range(0..3)).collect();
            let d = Distribution::new(Arc::new(c), net, phi_q, phi_g).unwrap();
            // independent recount: per hyperedge, set of module names
            let mut expect = 0usize;
            for h in &d.hypergraph.hyperedges {
                let mut names: BTreeSet<String> =
                    BTreeSet::from([d.network.name(d.phi_qubits[h.root]).to_string()]);
                for &g in &h.members {
                    names.insert(d.network.name(d.phi_gates[g]).to_string());
                }
                expect += names.len() - 1;
            }
            assert_eq!(d.connectivity_cost(), expect);
        }
    }

    #[test]
    fn walker_reports_units() {
        // CRz(B), H, CZ(partner on B), H, CRz(B): one unit embedding the CZ
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
        let net = two_modules();
        let mut hg = build_hypergraph(&c).unwrap();
        // merge q0's two outer hyperedges: members g0 and g2 rooted at q0
        hg.hyperedges.retain(|h| h.root != 0 || h.members == vec![1]);
        hg.hyperedges.push(Hyperedge { root: 0, members: vec![0, 2] });
        hg.canonicalize();
        // q0 -> A, q1,q2 -> B; all gates -> B
        let d = Distribution::with_hypergraph(c, net, hg, vec![0, 1, 1], vec![1, 1, 1]).unwrap();
        let h = d
            .hypergraph
            .hyperedges
            .iter()
            .position(|h| h.root == 0 && h.members.len() == 2)
            .unwrap();
        let events = hyperedge_events(&d, h).unwrap();
        assert_eq!(events.len(), 3);
        match &events[1] {
            HedgeEvent::Unit(u) => {
                assert_eq!(u.open, 1);
                assert_eq!(u.close, 3);
                assert_eq!(u.remote, Some(1));
                assert_eq!(u.inner_czs, vec![2]);
                assert!(!u.z_correction);
            }
            other => panic!("expected a unit, got {other:?}"),
        }
        assert!(d.check_validity().is_ok());
    }

    #[test]
    fn walker_rejects_non_pi_embedded_crz() {
        let c = Arc::new(
            Circuit::with_gates(
                3,
                vec![
                    Gate::CRz { q0: 0, q1: 1, phase: 0.5 },
                    Gate::H { q: 0 },
                    Gate::CRz { q0: 0, q1: 2, phase: 0.5 },
                    Gate::H { q: 0 },
                    Gate::CRz { q0: 0, q1: 1, phase: 0.25 },
                ],
            )
            .unwrap(),
        );
        let net = two_modules();
        let mut hg = build_hypergraph(&c).unwrap();
        hg.hyperedges.retain(|h| h.root != 0 || h.members == vec![1]);
        hg.hyperedges.push(Hyperedge { root: 0, members: vec![0, 2] });
        hg.canonicalize();
        let d = Distribution::with_hypergraph(c, net, hg, vec![0, 1, 1], vec![1, 1, 1]).unwrap();
        let h = d
            .hypergraph
            .hyperedges
            .iter()
            .position(|h| h.root == 0 && h.members.len() == 2)
            .unwrap();
        assert!(matches!(hyperedge_events(&d, h), Err(Error::InvalidHyperedge(_))));
        assert!(!d.check_validity().is_ok());
    }

    #[test]
    fn walker_accepts_squashed_z_run() {
        // H, Rz(0.5), Rz(0.5), H between two members squashes to Z
        let c = Arc::new(
            Circuit::with_gates(
                2,
                vec![
                    Gate::CRz { q0: 0, q1: 1, phase: 0.5 },
                    Gate::H { q: 0 },
                    Gate::Rz { q: 0, phase: 0.5 },
                    Gate::Rz { q: 0, phase: 0.5 },
                    Gate::H { q: 0 },
                    Gate::CRz { q0: 0, q1: 1, phase: 0.25 },
                ],
            )
            .unwrap(),
        );
        let net = two_modules();
        let mut hg = build_hypergraph(&c).unwrap();
        hg.hyperedges.retain(|h| h.root != 0);
        hg.hyperedges.push(Hyperedge { root: 0, members: vec![0, 1] });
        hg.canonicalize();
        let d = Distribution::with_hypergraph(c, net, hg, vec![0, 1], vec![1, 1]).unwrap();
        let h = d.hypergraph.hyperedges.iter().position(|h| h.root == 0).unwrap();
        let events = hyperedge_events(&d, h).unwrap();
        match &events[1] {
            HedgeEvent::Unit(u) => {
                assert!(u.z_correction);
                assert_eq!(u.remote, None, "a unit with no CZ is a wildcard");
            }
            other => panic!("expected a unit, got {other:?}"),
        }
    }

    #[test]
    fn walker_rejects_half_rz_unit() {
        let c = Arc::new(
            Circuit::with_gates(
                2,
                vec![
                    Gate::CRz { q0: 0, q1: 1, phase: 0.5 },
                    Gate::H { q: 0 },
                    Gate::Rz { q: 0, phase: 0.5 },
                    Gate::H { q: 0 },
                    Gate::CRz { q0: 0, q1: 1, phase: 0.25 },
                ],
            )
            .unwrap(),
        );
        let net = two_modules();
        let mut hg = build_hypergraph(&c).unwrap();
        hg.hyperedges.retain(|h| h.root != 0);
        hg.hyperedges.push(Hyperedge { root: 0, members: vec![0, 1] });
        hg.canonicalize();
        let d = Distribution::with_hypergraph(c, net, hg, vec![0, 1], vec![1, 1]).unwrap();
        let h = d.hypergraph.hyperedges.iter().position(|h| h.root == 0).unwrap();
        assert!(matches!(hyperedge_events(&d, h), Err(Error::InvalidHyperedge(_))));
    }

    #[test]
    fn inert_hyperedges_skip_unit_checks() {
        // all members on the root's module: no protocol, so the odd H is fine
        let c = Arc::new(
            Circuit::with_gates(
                2,
                vec![
                    Gate::CRz { q0: 0, q1: 1, phase: 0.5 },
                    Gate::H { q: 0 },
                    Gate::Rz { q: 0, phase: 0.5 },
                    Gate::H { q: 0 },
                    Gate::CRz { q0: 0, q1: 1, phase: 0.25 },
                ],
            )
            .unwrap(),
        );
        let net = two_modules();
        let mut hg = build_hypergraph(&c).unwrap();
        hg.hyperedges.retain(|h| h.root != 0);
        hg.hyperedges.push(Hyperedge { root: 0, members: vec![0, 1] });
        hg.canonicalize();
        let d = Distribution::with_hypergraph(c, net, hg, vec![0, 1], vec![0, 0]).unwrap();
        let h = d.hypergraph.hyperedges.iter().position(|h| h.root == 0).unwrap();
        assert_eq!(hyperedge_events(&d, h).unwrap(), Vec::new());
    }

    #[test]
    fn distribution_json_round_trip() {
        let c = Arc::new(fig2_circuit());
        let net = two_modules();
        let d =
            Distribution::new(Arc::clone(&c), Arc::clone(&net), vec![0, 0, 1, 1], vec![0, 0, 1, 1, 1])
                .unwrap();
        let v = d.to_json_value(2);
        assert_eq!(v["phi"]["q0"], "A");
        assert_eq!(v["phi"]["g4"], "B");
        assert_eq!(v["ebits"], 2);
        let back = Distribution::from_json_value(&v, c, net).unwrap();
        assert_eq!(back.phi_qubits, d.phi_qubits);
        assert_eq!(back.phi_gates, d.phi_gates);
        assert_eq!(back.hypergraph, d.hypergraph);
    }

    #[test]
    fn capacity_violation_reported() {
        let c = Arc::new(fig2_circuit());
        let net = two_modules(); // capacity 2 each
        let d = Distribution::new(c, net, vec![0, 0, 0, 1], vec![0, 0, 0, 0, 0]).unwrap();
        let report = d.check_validity();
        assert!(!report.is_ok());
        assert!(report.violations[0].contains("capacity"));
    }
}
