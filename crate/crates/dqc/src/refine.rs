//! Refinement passes: Distribution-to-Distribution rewrites that merge
//! hyperedges or reallocate gate-vertices without ever increasing the ebit
//! cost. Each candidate rewrite is validated by the hyperedge walker and
//! committed only when the cost engine reports a non-positive delta, so
//! every pass is monotone by construction and composable with the others.

use crate::allocate::{boundary_pass, BoundaryOpts};
use crate::cost::hyperedge_cost;
use crate::distribution::{hyperedge_events, Distribution, HedgeEvent};
use crate::{Error, Result};
use std::collections::BTreeSet;
use std::str::FromStr;

/// Named refinement passes, in the order the CLI exposes them.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RefinePass {
    /// Gate-vertex boundary reallocation; finds detached implementations.
    Detached,
    /// Merge packets through embedding units wherever conflict-free.
    EagerH,
    /// Merge hyperedges whose boundary gates sit side by side.
    DtypeNeighbouring,
    /// Merge hyperedges whose member gates interleave.
    DtypeIntertwined,
}

impl FromStr for RefinePass {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "detached" => Ok(RefinePass::Detached),
            "eager-h" => Ok(RefinePass::EagerH),
            "dtype-n" => Ok(RefinePass::DtypeNeighbouring),
            "dtype-i" => Ok(RefinePass::DtypeIntertwined),
            other => Err(Error::InvalidParams(format!(
                "unknown refine pass {other:?}; expected detached, eager-h, dtype-n or dtype-i"
            ))),
        }
    }
}

/// Run a sequence of passes `repeat` times over.
pub fn run_passes(
    dist: &Distribution,
    passes: &[RefinePass],
    repeat: usize,
    seed: u64,
) -> Result<Distribution> {
    let mut d = dist.clone();
    for round in 0..repeat.max(1) {
        for (k, pass) in passes.iter().enumerate() {
            d = match pass {
                RefinePass::Detached => {
                    refine_detached(&d, seed.wrapping_add((round * passes.len() + k) as u64))?
                }
                RefinePass::EagerH => refine_eager_h_merge(&d)?,
                RefinePass::DtypeNeighbouring => refine_dtype_neighbouring(&d)?,
                RefinePass::DtypeIntertwined => refine_dtype_intertwined(&d)?,
            };
        }
    }
    Ok(d)
}

/// Detached-gate identification: boundary reallocation restricted to
/// gate-vertices. Qubit-vertices are frozen so the set of non-local gates
/// cannot change, and embedded gates are frozen because the cost walker
/// cannot price an embedded detached gate.
pub fn refine_detached(dist: &Distribution, seed: u64) -> Result<Distribution> {
    let pos_to_gate = dist.hypergraph.pos_to_gate();
    let frozen_gates: BTreeSet<usize> = dist
        .embedded_gate_positions()
        .iter()
        .map(|p| pos_to_gate[p])
        .collect();
    boundary_pass(
        dist,
        &BoundaryOpts { max_rounds: 10_000, move_qubits: false, frozen_gates, seed },
    )
}

/// First and last circuit positions spanned by a hyperedge's members.
fn span(d: &Distribution, h: usize) -> (usize, usize) {
    let he = &d.hypergraph.hyperedges[h];
    let mut lo = usize::MAX;
    let mut hi = 0usize;
    for &g in &he.members {
        let p = d.hypergraph.gate_vertices[g].pos;
        lo = lo.min(p);
        hi = hi.max(p);
    }
    (lo, hi)
}

/// Hyperedges rooted at `q` that distribute at least one gate away from
/// home, ordered by first member position. Inert hyperedges are not
/// packets and take no part in merging.
fn active_hedges(d: &Distribution, q: usize) -> Vec<usize> {
    let home = d.phi_qubits[q];
    let mut out: Vec<usize> = (0..d.hypergraph.hyperedges.len())
        .filter(|&h| {
            let he = &d.hypergraph.hyperedges[h];
            he.root == q
                && !he.members.is_empty()
                && he.members.iter().any(|&g| d.phi_gates[g] != home)
        })
        .collect();
    out.sort_by_key(|&h| span(d, h).0);
    out
}

/// Count of H gates on `q`'s wire strictly between two circuit positions.
fn h_between(d: &Distribution, q: usize, lo: usize, hi: usize) -> usize {
    d.circuit
        .timeline(q)
        .into_iter()
        .filter(|&p| {
            p > lo && p < hi && matches!(d.circuit.gates[p], crate::circuit::Gate::H { .. })
        })
        .count()
}

/// Clone with hyperedges `i` and `j` (same root) merged; returns the probe
/// and the merged hyperedge's index in it.
fn probe_merge(d: &Distribution, i: usize, j: usize) -> (Distribution, usize) {
    let mut p = d.clone();
    let mut members = p.hypergraph.hyperedges[i].members.clone();
    members.extend(p.hypergraph.hyperedges[j].members.iter().copied());
    members.sort_unstable();
    members.dedup();
    p.hypergraph.hyperedges[i].members = members;
    p.hypergraph.hyperedges.remove(j);
    (p, if j < i { i - 1 } else { i })
}

/// Circuit positions embedded inside hyperedge `h`'s units.
fn embedded_inner(d: &Distribution, h: usize) -> BTreeSet<usize> {
    let mut out = BTreeSet::new();
    if let Ok(events) = hyperedge_events(d, h) {
        for ev in events {
            if let HedgeEvent::Unit(u) = ev {
                out.extend(u.inner_czs.iter().copied());
            }
        }
    }
    out
}

/// Eager H-type merging: scan qubit by qubit, packet by packet, and merge
/// a packet with a later one whenever the span between them forms valid
/// embedding units, none of the newly embedded gates is detached or
/// already embedded by a protocol on another qubit, and the cost delta is
/// non-positive.
pub fn refine_eager_h_merge(dist: &Distribution) -> Result<Distribution> {
    let mut d = dist.clone();
    let pos_to_gate = d.hypergraph.pos_to_gate();
    'fixpoint: loop {
        for q in 0..d.hypergraph.qubits {
            let hedges = active_hedges(&d, q);
            for (a, &i) in hedges.iter().enumerate() {
                for &j in &hedges[a + 1..] {
                    let (_, i_hi) = span(&d, i);
                    let (j_lo, _) = span(&d, j);
                    if i_hi >= j_lo || h_between(&d, q, i_hi, j_lo) == 0 {
                        continue; // overlapping or H-free seams are not embeddings
                    }
                    let (probe, m) = probe_merge(&d, i, j);
                    let Ok(merged_cost) = hyperedge_cost(&probe, m) else { continue };
                    let mut new_inner = embedded_inner(&probe, m);
                    for p in embedded_inner(&d, i).union(&embedded_inner(&d, j)) {
                        new_inner.remove(p);
                    }
                    let detached =
                        new_inner.iter().any(|p| d.is_detached(pos_to_gate[p]));
                    if detached {
                        continue;
                    }
                    let conflicted = (0..d.hypergraph.hyperedges.len()).any(|h| {
                        h != i
                            && h != j
                            && d.hypergraph.hyperedges[h].root != q
                            && !embedded_inner(&d, h).is_disjoint(&new_inner)
                    });
                    if conflicted {
                        continue;
                    }
                    let old = hyperedge_cost(&d, i)? + hyperedge_cost(&d, j)?;
                    if merged_cost > old {
                        continue;
                    }
                    d = probe;
                    continue 'fixpoint;
                }
            }
        }
        return Ok(d);
    }
}

/// D-type merging: join two hyperedges on the same qubit when a member
/// gate of each acts consecutively on that qubit with no H between, so the
/// merged protocol needs no additional embedding. The neighbouring variant
/// joins hyperedges whose spans are disjoint at the seam; the intertwined
/// variant joins hyperedges whose members interleave.
fn refine_dtype(dist: &Distribution, intertwined: bool) -> Result<Distribution> {
    let mut d = dist.clone();
    'fixpoint: loop {
        for q in 0..d.hypergraph.qubits {
            let hedges = active_hedges(&d, q);
            for (a, &i) in hedges.iter().enumerate() {
                for &j in &hedges[a + 1..] {
                    let (i_lo, i_hi) = span(&d, i);
                    let (j_lo, j_hi) = span(&d, j);
                    let overlap = i_hi > j_lo && j_hi > i_lo;
                    if overlap != intertwined {
                        continue;
                    }
                    let adjacent = if intertwined {
                        let a_pos: Vec<usize> = d.hypergraph.hyperedges[i]
                            .members
                            .iter()
                            .map(|&g| d.hypergraph.gate_vertices[g].pos)
                            .collect();
                        let b_pos: Vec<usize> = d.hypergraph.hyperedges[j]
                            .members
                            .iter()
                            .map(|&g| d.hypergraph.gate_vertices[g].pos)
                            .collect();
                        a_pos.iter().any(|&pa| {
                            b_pos.iter().any(|&pb| {
                                h_between(&d, q, pa.min(pb), pa.max(pb)) == 0
                            })
                        })
                    } else {
                        h_between(&d, q, i_hi, j_lo) == 0
                    };
                    if !adjacent {
                        continue;
                    }
                    let (probe, m) = probe_merge(&d, i, j);
                    let Ok(merged_cost) = hyperedge_cost(&probe, m) else { continue };
                    let old = hyperedge_cost(&d, i)? + hyperedge_cost(&d, j)?;
                    if merged_cost > old {
                        continue;
                    }
                    d = probe;
                    continue 'fixpoint;
                }
            }
        }
        return Ok(d);
    }
}

/// Merge hyperedges whose seams are adjacent; see [`refine_dtype`].
pub fn refine_dtype_neighbouring(dist: &Distribution) -> Result<Distribution> {
    refine_dtype(dist, false)
}

/// Merge hyperedges whose members interleave; see [`refine_dtype`].
pub fn refine_dtype_intertwined(dist: &Distribution) -> Result<Distribution> {
    refine_dtype(dist, true)
}
