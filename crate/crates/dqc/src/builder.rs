//! Distributed-circuit generation: rewrite a `Distribution` into an explicit
//! circuit over module-local wires, link qubits and classical corrections.
//!
//! Each non-inert hyperedge is lowered independently by replaying the same
//! event walk that prices it (see [`crate::cost::hyperedge_cost`]): every
//! Steiner-tree hop becomes a starting process (ebit + local CX + measurement
//! + conditional X), embedding units become local corrections on the live
//! links, and links are torn down by ending processes (H + measurement +
//! conditional Z) as soon as their last use has passed. The two walks share
//! their state machine, so `ebit_count` equals the priced cost by
//! construction.
//!
//! Anchors: protocol ops attach to circuit positions with a sub-slot (before
//! the gate, the gate itself, after the gate), so output order is stable.

use crate::circuit::Gate;
use crate::cost::total_cost;
use crate::distribution::{Distribution, HedgeEvent};
use crate::{Error, Result};
use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, BTreeSet};

/// A link-register slot: `index` within `module`'s pool. Slots are reused
/// (lowest free index first) once their ending process has run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct LinkId {
    pub module: usize,
    pub index: usize,
}

/// Target of an op: a computation wire (original circuit qubit) or a link
/// qubit in some module's pool.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Operand {
    #[serde(rename = "wire")]
    Wire(usize),
    #[serde(rename = "link_qubit")]
    Link(LinkId),
}

/// Ops of the distributed circuit. `EbitPrepare` is the only cross-module
/// op: it creates the Bell pair `|00> + |11>` on `(a, b)`. Everything else
/// is local to one module or purely classical conditioning.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind")]
pub enum DOp {
    H { t: Operand },
    Rz { t: Operand, phase: f64 },
    CRz { a: Operand, b: Operand, phase: f64 },
    CX { c: Operand, t: Operand },
    #[serde(rename = "ebit_prepare")]
    EbitPrepare { a: LinkId, b: LinkId },
    #[serde(rename = "measure")]
    Measure { t: LinkId, bit: usize },
    #[serde(rename = "cond_x")]
    CondX { bit: usize, targets: Vec<Operand> },
    #[serde(rename = "cond_z")]
    CondZ { bit: usize, targets: Vec<Operand> },
}

/// Why an op is in the stream; kept out of the serialized format.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Role {
    /// Part of a starting process (ebit, copy CX, measure, conditional X).
    Start,
    /// Local CX correcting a starting process embedded in another packet's
    /// unit (intertwined packets).
    Mirror,
    /// A gate of the input circuit.
    Original,
    /// Embedding-unit correction (H / Z / CZ on live links).
    Correction,
    /// Part of an ending process.
    End,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct OpMeta {
    /// Circuit position the op is anchored at.
    pub pos: usize,
    /// Hyperedge the op belongs to; `None` for original gates.
    pub hedge: Option<usize>,
    pub role: Role,
}

#[derive(Debug, Clone)]
pub struct DistributedCircuit {
    pub qubits: usize,
    /// Module of each computation wire.
    pub qubit_module: Vec<usize>,
    pub module_names: Vec<String>,
    pub ops: Vec<DOp>,
    /// One entry per op; empty for circuits loaded from JSON.
    pub meta: Vec<OpMeta>,
    /// Number of classical bits (one per measurement).
    pub bits: usize,
    pub ebit_count: usize,
    /// Pool high-water per module: wires needed to simulate, including the
    /// transient source halves of ebits.
    pub link_wires: Vec<usize>,
    /// Peak simultaneous *persistent* links per module (the halves that
    /// survive their starting process); this is what link bounds constrain.
    pub link_peak: Vec<usize>,
    pub non_local_gates: usize,
    pub detached_gates: usize,
    /// Hyperedges that actually ran a protocol (non-inert).
    pub hyperedge_count: usize,
}

#[derive(Debug, Clone, Serialize)]
pub struct Stats {
    pub qubits: usize,
    pub modules: usize,
    pub ops: usize,
    pub bits: usize,
    pub ebits: usize,
    pub non_local_gates: usize,
    pub detached_gates: usize,
    pub hyperedges: usize,
    pub link_peak: BTreeMap<String, usize>,
}

// --- planning ---------------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
enum Slot {
    Pre,
    Post,
}

#[derive(Debug, Clone)]
enum ItemKind {
    /// Create a link in `to`, copying from the root wire (`from: None`) or
    /// from the live link in `from`.
    Start { from: Option<usize>, to: usize },
    /// End the live link in `module`.
    End { module: usize },
    /// H on every live link (embedded H on the root).
    HCorr,
    /// Z on every live link (embedded Rz run squashing to Z).
    ZCorr,
    /// CZ from every live link onto the embedded gate's partner wire.
    CzCorr,
}

#[derive(Debug, Clone)]
struct PlanItem {
    pos: usize,
    slot: Slot,
    kind: ItemKind,
}

#[derive(Debug, Clone)]
struct HedgePlan {
    root: usize,
    home: usize,
    items: Vec<PlanItem>,
    /// Position -> module, for members implemented away from home.
    member_use: BTreeMap<usize, usize>,
    /// Embedding-unit spans `(open, close)`, H positions on the root.
    unit_spans: Vec<(usize, usize)>,
}

/// Replay of `hyperedge_cost`'s walk, recording protocol items instead of
/// counting ebits. Returns `None` for inert hyperedges.
fn plan_hedge(dist: &Distribution, h: usize) -> Result<Option<HedgePlan>> {
    let events = hyperedge_events_of(dist, h)?;
    if events.is_empty() {
        return Ok(None);
    }
    let he = &dist.hypergraph.hyperedges[h];
    let home = dist.phi_qubits[he.root];
    let mut terminals: BTreeSet<usize> = BTreeSet::from([home]);
    for ev in &events {
        match ev {
            HedgeEvent::Distribute { module, .. } => {
                terminals.insert(*module);
            }
            HedgeEvent::Unit(u) => terminals.extend(u.remote),
        }
    }
    let tree = dist.network.steiner_tree(&terminals.iter().copied().collect::<Vec<_>>())?;

    let mut plan = HedgePlan {
        root: he.root,
        home,
        items: Vec::new(),
        member_use: BTreeMap::new(),
        unit_spans: Vec::new(),
    };
    let mut linked: BTreeSet<usize> = BTreeSet::new();
    let mut last_pos = 0usize;

    // chain of starting processes bringing a link to `target`
    let ensure = |plan: &mut HedgePlan, linked: &mut BTreeSet<usize>, target: usize, pos: usize| -> Result<()> {
        let mut from: BTreeSet<usize> = linked.clone();
        from.insert(home);
        let path = tree.path_from_set(&from, target)?;
        for hop in path.windows(2) {
            let src = if hop[0] == home { None } else { Some(hop[0]) };
            plan.items.push(PlanItem { pos, slot: Slot::Pre, kind: ItemKind::Start { from: src, to: hop[1] } });
        }
        linked.extend(path.into_iter().filter(|&v| v != home));
        Ok(())
    };

    for ev in &events {
        match ev {
            HedgeEvent::Distribute { pos, module, .. } => {
                let m = *module;
                last_pos = *pos;
                if m == home {
                    continue;
                }
                if !linked.contains(&m) {
                    ensure(&mut plan, &mut linked, m, *pos)?;
                }
                plan.member_use.insert(*pos, m);
            }
            HedgeEvent::Unit(u) => {
                plan.unit_spans.push((u.open, u.close));
                if let Some(b) = u.remote {
                    if !linked.contains(&b) {
                        ensure(&mut plan, &mut linked, b, u.open)?;
                    }
                    // teardown: only the CZ partner's link survives the unit
                    for &v in linked.iter().filter(|&&v| v != b) {
                        plan.items.push(PlanItem { pos: u.open, slot: Slot::Pre, kind: ItemKind::End { module: v } });
                    }
                    linked.clear();
                    linked.insert(b);
                }
                plan.items.push(PlanItem { pos: u.open, slot: Slot::Post, kind: ItemKind::HCorr });
                for &p in &u.inner_czs {
                    plan.items.push(PlanItem { pos: p, slot: Slot::Post, kind: ItemKind::CzCorr });
                }
                if u.z_correction {
                    plan.items.push(PlanItem { pos: u.close, slot: Slot::Post, kind: ItemKind::ZCorr });
                }
                plan.items.push(PlanItem { pos: u.close, slot: Slot::Post, kind: ItemKind::HCorr });
            }
        }
    }
    for &v in &linked {
        plan.items.push(PlanItem { pos: last_pos, slot: Slot::Post, kind: ItemKind::End { module: v } });
    }
    Ok(Some(plan))
}

fn hyperedge_events_of(dist: &Distribution, h: usize) -> Result<Vec<HedgeEvent>> {
    crate::distribution::hyperedge_events(dist, h)
}

// --- assembly ---------------------------------------------------------------

struct Pools {
    free: Vec<BTreeSet<usize>>,
    high: Vec<usize>,
    persistent: Vec<usize>,
    peak: Vec<usize>,
}

impl Pools {
    fn new(modules: usize) -> Self {
        Pools {
            free: vec![BTreeSet::new(); modules],
            high: vec![0; modules],
            persistent: vec![0; modules],
            peak: vec![0; modules],
        }
    }

    fn alloc(&mut self, m: usize) -> LinkId {
        let index = match self.free[m].pop_first() {
            Some(i) => i,
            None => {
                let i = self.high[m];
                self.high[m] += 1;
                i
            }
        };
        LinkId { module: m, index }
    }

    fn alloc_persistent(&mut self, m: usize) -> LinkId {
        let l = self.alloc(m);
        self.persistent[m] += 1;
        self.peak[m] = self.peak[m].max(self.persistent[m]);
        l
    }

    fn release(&mut self, l: LinkId) {
        self.free[l.module].insert(l.index);
    }

    fn release_persistent(&mut self, l: LinkId) {
        self.persistent[l.module] -= 1;
        self.release(l);
    }
}

struct Assembler<'a> {
    dist: &'a Distribution,
    plans: Vec<Option<HedgePlan>>,
    /// (hyperedge, module) -> live link.
    live: BTreeMap<(usize, usize), LinkId>,
    pools: Pools,
    ops: Vec<DOp>,
    meta: Vec<OpMeta>,
    bits: usize,
    ebits: usize,
    /// Mirror debt: links born from the root wire inside another packet's
    /// unit hold the XOR of the wire and that packet's links; until a root H
    /// re-syncs them, their ending must also target the peers' links.
    debt: BTreeMap<LinkId, (usize, Vec<usize>)>,
    /// H positions on each root qubit (for the debt window test).
    root_hs: BTreeMap<usize, Vec<usize>>,
    /// Gate-vertex -> hyperedge per endpoint side (0 = q0, 1 = q1).
    side: BTreeMap<(usize, usize), usize>,
}

/// Is the anchor `(pos, slot)` strictly inside the unit `(open, close)`,
/// i.e. after the opening H and before the closing H?
fn inside_unit(span: (usize, usize), pos: usize, slot: Slot) -> bool {
    match slot {
        Slot::Pre => span.0 < pos && pos <= span.1,
        Slot::Post => span.0 <= pos && pos < span.1,
    }
}

impl<'a> Assembler<'a> {
    fn push(&mut self, op: DOp, pos: usize, hedge: Option<usize>, role: Role) {
        self.ops.push(op);
        self.meta.push(OpMeta { pos, hedge, role });
    }

    fn live_links_of(&self, h: usize) -> Vec<LinkId> {
        self.live
            .range((h, 0)..=(h, usize::MAX))
            .map(|(_, &l)| l)
            .collect()
    }

    /// Same-root hyperedges (other than `h`) with an embedding unit open at
    /// the anchor: their live links receive mirror corrections.
    fn open_peers(&self, h: usize, pos: usize, slot: Slot) -> Vec<usize> {
        let root = self.plans[h].as_ref().unwrap().root;
        self.plans
            .iter()
            .enumerate()
            .filter_map(|(k, p)| p.as_ref().map(|p| (k, p)))
            .filter(|&(k, p)| k != h && p.root == root)
            .filter(|(_, p)| p.unit_spans.iter().any(|&s| inside_unit(s, pos, slot)))
            .map(|(k, _)| k)
            .collect()
    }

    /// Has an H on the root wire fired between a link's mirror birth at
    /// `(birth, Pre)` and a death anchor at `(pos, slot)`?
    fn root_h_fired(&self, root: usize, birth: usize, pos: usize, slot: Slot) -> bool {
        self.root_hs.get(&root).is_some_and(|hs| {
            hs.iter().any(|&hp| hp >= birth && (hp < pos || (hp == pos && slot == Slot::Post)))
        })
    }

    /// Does the root-side packet of the gate at `pos` start a link from the
    /// wire at this very position?
    fn root_side_starts_here(&self, root: usize, pos: usize) -> bool {
        let Some(&g) = self.dist.hypergraph.pos_to_gate().get(&pos) else { return false };
        let gv = &self.dist.hypergraph.gate_vertices[g];
        let s = if gv.q0 == root { 0 } else { 1 };
        let Some(&x) = self.side.get(&(g, s)) else { return false };
        let Some(xp) = self.plans[x].as_ref() else { return false };
        xp.items
            .iter()
            .any(|it| it.pos == pos && matches!(it.kind, ItemKind::Start { from: None, .. }))
    }

    fn run_item(&mut self, h: usize, item: &PlanItem) -> Result<()> {
        let (root, home) = {
            let p = self.plans[h].as_ref().unwrap();
            (p.root, p.home)
        };
        match item.kind {
            ItemKind::Start { from, to } => {
                let src_link = match from {
                    None => None,
                    Some(v) => Some(*self.live.get(&(h, v)).ok_or_else(|| {
                        Error::InvalidHyperedge(format!("no live link in module {v} to extend from"))
                    })?),
                };
                let src_op = match src_link {
                    None => Operand::Wire(root),
                    Some(l) => Operand::Link(l),
                };
                let src_mod = from.unwrap_or(home);
                let e = self.pools.alloc(src_mod);
                let l = self.pools.alloc_persistent(to);
                let bit = self.bits;
                self.bits += 1;
                self.push(DOp::EbitPrepare { a: e, b: l }, item.pos, Some(h), Role::Start);
                self.push(DOp::CX { c: src_op, t: Operand::Link(e) }, item.pos, Some(h), Role::Start);
                self.push(DOp::Measure { t: e, bit }, item.pos, Some(h), Role::Start);
                self.push(DOp::CondX { bit, targets: vec![Operand::Link(l)] }, item.pos, Some(h), Role::Start);
                self.pools.release(e);
                self.live.insert((h, to), l);
                self.ebits += 1;
                self.debt.remove(&l);
                match src_link {
                    // A starting process copying from the root wire inside
                    // another packet's unit behaves as an embedded CX:
                    // correct it with a CX from that packet's live links.
                    // The new link then carries the XOR of the wire and the
                    // peer links (mirror debt) until a root H re-syncs it.
                    None => {
                        let peers = self.open_peers(h, item.pos, item.slot);
                        for &peer in &peers {
                            for pl in self.live_links_of(peer) {
                                if pl.module != l.module {
                                    return Err(Error::ConflictDetected(format!(
                                        "mirror correction between modules {} and {} for the starting \
                                         process at position {} would be non-local",
                                        pl.module, l.module, item.pos
                                    )));
                                }
                                self.push(
                                    DOp::CX { c: Operand::Link(pl), t: Operand::Link(l) },
                                    item.pos,
                                    Some(h),
                                    Role::Mirror,
                                );
                            }
                        }
                        if !peers.is_empty() {
                            self.debt.insert(l, (item.pos, peers));
                        }
                    }
                    // extending a chain copies the source link, debt included
                    Some(src) => {
                        if let Some((birth, peers)) = self.debt.get(&src).cloned() {
                            if !self.root_h_fired(root, birth, item.pos, Slot::Pre) {
                                self.debt.insert(l, (birth, peers));
                            }
                        }
                    }
                }
            }
            ItemKind::End { module } => {
                let l = self.live.remove(&(h, module)).ok_or_else(|| {
                    Error::InvalidHyperedge(format!("ending a link in module {module} that is not live"))
                })?;
                let bit = self.bits;
                self.bits += 1;
                self.push(DOp::H { t: Operand::Link(l) }, item.pos, Some(h), Role::End);
                self.push(DOp::Measure { t: l, bit }, item.pos, Some(h), Role::End);
                // The conditional Z lands on the Steiner root (the wire). A
                // link still carrying mirror debt equals the XOR of the wire
                // and the mirror sources, so its ending Z must hit those
                // links too; once a root H has fired since the mirror, the
                // link is back in step with the wire and the root suffices.
                let mut targets = vec![Operand::Wire(root)];
                if let Some((birth, peers)) = self.debt.remove(&l) {
                    if !self.root_h_fired(root, birth, item.pos, item.slot) {
                        for peer in peers {
                            targets.extend(self.live_links_of(peer).into_iter().map(Operand::Link));
                        }
                    }
                }
                self.push(DOp::CondZ { bit, targets }, item.pos, Some(h), Role::End);
                self.pools.release_persistent(l);
            }
            ItemKind::HCorr => {
                for l in self.live_links_of(h) {
                    self.push(DOp::H { t: Operand::Link(l) }, item.pos, Some(h), Role::Correction);
                }
            }
            ItemKind::ZCorr => {
                for l in self.live_links_of(h) {
                    self.push(DOp::Rz { t: Operand::Link(l), phase: 1.0 }, item.pos, Some(h), Role::Correction);
                }
            }
            ItemKind::CzCorr => {
                let partner = match self.dist.circuit.gates[item.pos] {
                    Gate::CRz { q0, q1, .. } => {
                        if q0 == root {
                            q1
                        } else {
                            q0
                        }
                    }
                    ref g => {
                        return Err(Error::InvalidHyperedge(format!(
                            "embedded gate at position {} is {}, expected CRz",
                            item.pos,
                            g.name()
                        )))
                    }
                };
                // When the gate's own root-side packet starts a link from
                // the wire at this very position, the mirror CX emitted by
                // that start already folds this correction in (commuting
                // the CZ past the mirror reproduces it); emitting it again
                // would double-count.
                if self.root_side_starts_here(root, item.pos) {
                    return Ok(());
                }
                for l in self.live_links_of(h) {
                    self.push(
                        DOp::CRz { a: Operand::Link(l), b: Operand::Wire(partner), phase: 1.0 },
                        item.pos,
                        Some(h),
                        Role::Correction,
                    );
                }
            }
        }
        Ok(())
    }

    fn emit_original(&mut self, pos: usize) -> Result<()> {
        match self.dist.circuit.gates[pos] {
            Gate::H { q } => self.push(DOp::H { t: Operand::Wire(q) }, pos, None, Role::Original),
            Gate::Rz { q, phase } => self.push(DOp::Rz { t: Operand::Wire(q), phase }, pos, None, Role::Original),
            Gate::CRz { q0, q1, phase } => {
                let g = *self.dist.hypergraph.pos_to_gate().get(&pos).ok_or_else(|| {
                    Error::InvalidHyperedge(format!("CRz at position {pos} has no gate-vertex"))
                })?;
                let a = self.resolve(self.side.get(&(g, 0)).copied(), q0, pos)?;
                let b = self.resolve(self.side.get(&(g, 1)).copied(), q1, pos)?;
                self.push(DOp::CRz { a, b, phase }, pos, None, Role::Original);
            }
            ref g => return Err(Error::NotRebased(g.name().into())),
        }
        Ok(())
    }

    /// Wire operand unless the endpoint's hyperedge implements this member
    /// through a link.
    fn resolve(&self, hedge: Option<usize>, q: usize, pos: usize) -> Result<Operand> {
        let Some(h) = hedge else { return Ok(Operand::Wire(q)) };
        let Some(plan) = self.plans[h].as_ref() else { return Ok(Operand::Wire(q)) };
        match plan.member_use.get(&pos) {
            None => Ok(Operand::Wire(q)),
            Some(&m) => {
                let l = self.live.get(&(h, m)).ok_or_else(|| {
                    Error::InvalidHyperedge(format!(
                        "member at position {pos} expects a live link in module {m}"
                    ))
                })?;
                Ok(Operand::Link(*l))
            }
        }
    }
}

/// Lower a distribution to its explicit distributed circuit.
pub fn build(dist: &Distribution) -> Result<DistributedCircuit> {
    let modules = dist.network.module_count();
    let mut plans = Vec::with_capacity(dist.hypergraph.hyperedges.len());
    for h in 0..dist.hypergraph.hyperedges.len() {
        plans.push(plan_hedge(dist, h)?);
    }
    let hyperedge_count = plans.iter().filter(|p| p.is_some()).count();

    // gate-vertex -> hyperedge, per endpoint side
    let mut side: BTreeMap<(usize, usize), usize> = BTreeMap::new();
    for (hid, he) in dist.hypergraph.hyperedges.iter().enumerate() {
        for &g in &he.members {
            let gv = &dist.hypergraph.gate_vertices[g];
            let s = if gv.q0 == he.root { 0 } else { 1 };
            side.insert((g, s), hid);
        }
    }

    // items bucketed by anchor; within a bucket, hyperedge id then plan order
    let mut buckets: BTreeMap<(usize, Slot), Vec<(usize, PlanItem)>> = BTreeMap::new();
    for (h, plan) in plans.iter().enumerate() {
        let Some(plan) = plan else { continue };
        for item in &plan.items {
            buckets.entry((item.pos, item.slot)).or_default().push((h, item.clone()));
        }
    }

    let mut root_hs: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    for (pos, gate) in dist.circuit.gates.iter().enumerate() {
        if let Gate::H { q } = gate {
            root_hs.entry(*q).or_default().push(pos);
        }
    }

    let mut asm = Assembler {
        dist,
        plans,
        live: BTreeMap::new(),
        pools: Pools::new(modules),
        ops: Vec::new(),
        meta: Vec::new(),
        bits: 0,
        ebits: 0,
        debt: BTreeMap::new(),
        root_hs,
        side,
    };

    for pos in 0..dist.circuit.gates.len() {
        // starting processes before ending processes: an ensure-chain may
        // route through a link that the same anchor tears down
        if let Some(items) = buckets.get(&(pos, Slot::Pre)) {
            let (starts, rest): (Vec<_>, Vec<_>) =
                items.iter().partition(|(_, it)| matches!(it.kind, ItemKind::Start { .. }));
            for (h, item) in starts.iter().chain(rest.iter()) {
                asm.run_item(*h, item)?;
            }
        }
        asm.emit_original(pos)?;
        if let Some(items) = buckets.get(&(pos, Slot::Post)) {
            for (h, item) in items.clone() {
                asm.run_item(h, &item)?;
            }
        }
    }

    if !asm.live.is_empty() {
        return Err(Error::InvalidHyperedge(format!(
            "{} link(s) still live after assembly",
            asm.live.len()
        )));
    }

    let expected = total_cost(dist)?;
    if asm.ebits != expected {
        return Err(Error::InvalidHyperedge(format!(
            "builder consumed {} ebits, cost model prices {expected}",
            asm.ebits
        )));
    }

    Ok(DistributedCircuit {
        qubits: dist.circuit.qubits,
        qubit_module: dist.phi_qubits.clone(),
        module_names: (0..modules).map(|m| dist.network.name(m).to_string()).collect(),
        ops: asm.ops,
        meta: asm.meta,
        bits: asm.bits,
        ebit_count: asm.ebits,
        link_wires: asm.pools.high,
        link_peak: asm.pools.peak,
        non_local_gates: dist.non_local_count(),
        detached_gates: dist.detached_count(),
        hyperedge_count,
    })
}

// --- link-bound enforcement ---------------------------------------------------

/// First op where a module's persistent link usage exceeds its bound,
/// together with the hyperedges holding a live link there at that moment.
fn first_violation(built: &DistributedCircuit, bounds: &[Option<u32>]) -> Option<(usize, usize, Vec<usize>)> {
    let mut owner: BTreeMap<LinkId, usize> = BTreeMap::new();
    let mut counts = vec![0usize; bounds.len()];
    for (op, meta) in built.ops.iter().zip(&built.meta) {
        match op {
            DOp::EbitPrepare { b, .. } => {
                owner.insert(*b, meta.hedge.expect("starting process belongs to a hyperedge"));
                counts[b.module] += 1;
                if let Some(eps) = bounds[b.module] {
                    if counts[b.module] > eps as usize {
                        let hedges: BTreeSet<usize> = owner
                            .iter()
                            .filter(|(l, _)| l.module == b.module)
                            .map(|(_, &h)| h)
                            .collect();
                        return Some((b.module, meta.pos, hedges.into_iter().collect()));
                    }
                }
            }
            DOp::Measure { t, .. } => {
                if owner.remove(t).is_some() {
                    counts[t.module] -= 1;
                }
            }
            _ => {}
        }
    }
    None
}

/// Split hyperedges until every module's peak link usage fits its bound.
///
/// At each violation, among hyperedges holding a live link in the module,
/// the one whose surrounding members are furthest apart in the circuit is
/// split there (ties to the lower hyperedge id). Splitting trades idle link
/// time for extra ebits; when no candidate has members on both sides of the
/// violation, the bound is infeasible.
pub fn enforce_link_bound(
    dist: &Distribution,
    built: DistributedCircuit,
) -> Result<(Distribution, DistributedCircuit)> {
    let bounds: Vec<Option<u32>> =
        (0..dist.network.module_count()).map(|m| dist.network.link_capacity(m)).collect();
    let mut cur = dist.clone();
    let mut built = built;
    loop {
        let Some((module, gpos, candidates)) = first_violation(&built, &bounds) else {
            return Ok((cur, built));
        };
        let mut best: Option<(usize, usize)> = None; // (gap, hedge)
        for &h in &candidates {
            let members = &cur.hypergraph.hyperedges[h].members;
            let prev = members
                .iter()
                .map(|&g| cur.hypergraph.gate_vertices[g].pos)
                .filter(|&p| p < gpos)
                .max();
            let next = members
                .iter()
                .map(|&g| cur.hypergraph.gate_vertices[g].pos)
                .filter(|&p| p >= gpos)
                .min();
            if let (Some(p), Some(n)) = (prev, next) {
                let gap = n - p;
                if best.map_or(true, |(bg, bh)| gap > bg || (gap == bg && h < bh)) {
                    best = Some((gap, h));
                }
            }
        }
        let Some((_, h)) = best else {
            return Err(Error::InfeasibleBound(format!(
                "module {} needs more than {:?} link qubit(s) at position {gpos} and no hyperedge can be split",
                cur.network.name(module),
                bounds[module],
            )));
        };
        let mut hg = cur.hypergraph.clone();
        let members = std::mem::take(&mut hg.hyperedges[h].members);
        let (left, right): (Vec<usize>, Vec<usize>) =
            members.into_iter().partition(|&g| hg.gate_vertices[g].pos < gpos);
        let root = hg.hyperedges[h].root;
        hg.hyperedges[h].members = left;
        hg.hyperedges.push(crate::distribution::Hyperedge { root, members: right });
        hg.canonicalize();
        cur = Distribution::with_hypergraph(
            cur.circuit.clone(),
            cur.network.clone(),
            hg,
            cur.phi_qubits.clone(),
            cur.phi_gates.clone(),
        )?;
        built = build(&cur)?;
    }
}

// --- readouts & export --------------------------------------------------------

impl DistributedCircuit {
    pub fn stats(&self) -> Stats {
        Stats {
            qubits: self.qubits,
            modules: self.module_names.len(),
            ops: self.ops.len(),
            bits: self.bits,
            ebits: self.ebit_count,
            non_local_gates: self.non_local_gates,
            detached_gates: self.detached_gates,
            hyperedges: self.hyperedge_count,
            link_peak: self
                .module_names
                .iter()
                .cloned()
                .zip(self.link_peak.iter().copied())
                .collect(),
        }
    }

    /// Module an operand lives in.
    pub fn operand_module(&self, op: &Operand) -> usize {
        match *op {
            Operand::Wire(q) => self.qubit_module[q],
            Operand::Link(l) => l.module,
        }
    }

    /// Two-qubit ops acting across modules. Only `EbitPrepare` may (and
    /// must, when its halves differ) appear here: everything else is LOCC.
    pub fn locality_violations(&self) -> usize {
        self.ops
            .iter()
            .filter(|op| match op {
                DOp::CRz { a, b, .. } => self.operand_module(a) != self.operand_module(b),
                DOp::CX { c, t } => self.operand_module(c) != self.operand_module(t),
                _ => false,
            })
            .count()
    }

    /// Total wires a statevector simulation needs.
    pub fn total_wires(&self) -> usize {
        self.qubits + self.link_wires.iter().sum::<usize>()
    }

    /// Flatten link slots after the computation wires, module by module.
    pub fn wire_layout(&self) -> BTreeMap<LinkId, usize> {
        let mut layout = BTreeMap::new();
        let mut next = self.qubits;
        for (m, &n) in self.link_wires.iter().enumerate() {
            for i in 0..n {
                layout.insert(LinkId { module: m, index: i }, next);
                next += 1;
            }
        }
        layout
    }

    pub fn to_json(&self) -> serde_json::Value {
        serde_json::json!({
            "qubits": self.qubits,
            "modules": self.module_names,
            "qubit_module": self.qubit_module.iter().map(|&m| self.module_names[m].clone()).collect::<Vec<_>>(),
            "bits": self.bits,
            "ebits": self.ebit_count,
            "link_wires": self.link_wires,
            "link_peak": self.link_peak,
            "non_local_gates": self.non_local_gates,
            "detached_gates": self.detached_gates,
            "hyperedges": self.hyperedge_count,
            "ops": self.ops,
        })
    }

    pub fn to_json_string(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(&self.to_json())?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        #[derive(Deserialize)]
        struct Raw {
            qubits: usize,
            modules: Vec<String>,
            qubit_module: Vec<String>,
            bits: usize,
            ebits: usize,
            link_wires: Vec<usize>,
            link_peak: Vec<usize>,
            #[serde(default)]
            non_local_gates: usize,
            #[serde(default)]
            detached_gates: usize,
            #[serde(default)]
            hyperedges: usize,
            ops: Vec<DOp>,
        }
        let raw: Raw = serde_json::from_str(text)?;
        let index: BTreeMap<&str, usize> =
            raw.modules.iter().enumerate().map(|(i, n)| (n.as_str(), i)).collect();
        let qubit_module = raw
            .qubit_module
            .iter()
            .map(|n| index.get(n.as_str()).copied().ok_or_else(|| Error::UnknownModule(n.clone())))
            .collect::<Result<Vec<_>>>()?;
        Ok(DistributedCircuit {
            qubits: raw.qubits,
            qubit_module,
            module_names: raw.modules,
            ops: raw.ops,
            meta: Vec::new(),
            bits: raw.bits,
            ebit_count: raw.ebits,
            link_wires: raw.link_wires,
            link_peak: raw.link_peak,
            non_local_gates: raw.non_local_gates,
            detached_gates: raw.detached_gates,
            hyperedge_count: raw.hyperedges,
        })
    }

    /// OpenQASM 2 with classical conditions. Ebit preparation is spelled as
    /// `h` + `cx` on the link wires (the one non-local pair); every other op
    /// is module-local. One creg per measurement keeps conditions 1-bit.
    pub fn to_qasm(&self) -> String {
        let layout = self.wire_layout();
        let wire = |op: &Operand| -> usize {
            match *op {
                Operand::Wire(q) => q,
                Operand::Link(l) => layout[&l],
            }
        };
        let mut out = String::from("OPENQASM 2.0;\ninclude \"qelib1.inc\";\n");
        out.push_str(&format!("qreg q[{}];\n", self.total_wires().max(1)));
        for b in 0..self.bits {
            out.push_str(&format!("creg c{b}[1];\n"));
        }
        for (m, name) in self.module_names.iter().enumerate() {
            let wires: Vec<String> = (0..self.qubits)
                .filter(|&q| self.qubit_module[q] == m)
                .map(|q| format!("q[{q}]"))
                .chain((0..self.link_wires[m]).map(|i| format!("q[{}]", layout[&LinkId { module: m, index: i }])))
                .collect();
            out.push_str(&format!("// module {name}: {}\n", wires.join(" ")));
        }
        for op in &self.ops {
            match op {
                DOp::H { t } => out.push_str(&format!("h q[{}];\n", wire(t))),
                DOp::Rz { t, phase } => out.push_str(&format!("rz({phase}*pi) q[{}];\n", wire(t))),
                DOp::CRz { a, b, phase } => {
                    out.push_str(&format!("crz({phase}*pi) q[{}],q[{}];\n", wire(a), wire(b)))
                }
                DOp::CX { c, t } => out.push_str(&format!("cx q[{}],q[{}];\n", wire(c), wire(t))),
                DOp::EbitPrepare { a, b } => {
                    let (wa, wb) = (layout[a], layout[b]);
                    out.push_str(&format!("h q[{wa}];\ncx q[{wa}],q[{wb}];\n"));
                }
                DOp::Measure { t, bit } => {
                    out.push_str(&format!("measure q[{}] -> c{bit}[0];\n", layout[t]))
                }
                DOp::CondX { bit, targets } => {
                    for t in targets {
                        out.push_str(&format!("if(c{bit}==1) x q[{}];\n", wire(t)));
                    }
                }
                DOp::CondZ { bit, targets } => {
                    for t in targets {
                        out.push_str(&format!("if(c{bit}==1) z q[{}];\n", wire(t)));
                    }
                }
            }
        }
        out
    }
}
