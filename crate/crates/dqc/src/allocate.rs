//! Allocation search: initial partitioning, simulated annealing, and
//! boundary reallocation.
//!
//! The initial partitioner runs several greedy-growth starts followed by
//! Fiduccia–Mattheyses-style passes on the connectivity metric, which on
//! fully-connected networks equals the ebit cost exactly. Annealing and
//! boundary reallocation then work against the full Steiner-aware cost.

use crate::cost::{apply_move, connectivity_gain, ebit_gain, hyperedge_cost, Incidence};
use crate::distribution::{Distribution, Vertex};
use crate::{Error, Result};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::collections::BTreeSet;

/// Simulated-annealing schedule.
#[derive(Debug, Clone)]
pub struct AnnealParams {
    pub iterations: usize,
    /// Starting temperature; probed from random moves when absent.
    pub initial_temperature: Option<f64>,
    /// Geometric cooling factor per iteration, in (0, 1).
    pub cooling: f64,
    pub seed: u64,
}

impl Default for AnnealParams {
    fn default() -> Self {
        AnnealParams { iterations: 10_000, initial_temperature: None, cooling: 0.995, seed: 0 }
    }
}

/// A proposed reallocation of one vertex, with an optional displaced qubit
/// swapped back to the source when the target module is full.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Move {
    pub vertex: Vertex,
    pub target: usize,
    pub swap_with: Option<usize>,
}

/// Gain of a move, swapping the displaced qubit if present. Temporarily
/// applies the move, re-walks the affected hyperedges, and restores.
fn move_gain(dist: &mut Distribution, inc: &Incidence, mv: &Move) -> Result<isize> {
    match mv.swap_with {
        None => ebit_gain(dist, inc, mv.vertex, mv.target),
        Some(partner) => {
            let mut affected = inc.affected(mv.vertex);
            affected.extend(inc.affected(Vertex::Qubit(partner)));
            let source = dist.module_of(mv.vertex);
            let mut before = 0usize;
            for &h in &affected {
                before += hyperedge_cost(dist, h)?;
            }
            apply_move(dist, mv.vertex, mv.target);
            apply_move(dist, Vertex::Qubit(partner), source);
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
            apply_move(dist, Vertex::Qubit(partner), mv.target);
            apply_move(dist, mv.vertex, source);
            res.map(|()| before as isize - after as isize)
        }
    }
}

fn commit(dist: &mut Distribution, mv: &Move) {
    let source = dist.module_of(mv.vertex);
    apply_move(dist, mv.vertex, mv.target);
    if let Some(partner) = mv.swap_with {
        apply_move(dist, Vertex::Qubit(partner), source);
    }
}

/// Multi-start initial partitioner: greedy growth orders the qubits
/// randomly and places each with its already-placed gate partners when
/// capacity allows, then an FM-style pass walks the best single-vertex
/// moves (locking each mover, accepting downhill steps) and keeps the best
/// prefix. Gate-vertices live on whichever endpoint module costs less.
/// The best of eight starts by connectivity wins.
pub fn initial_partition(dist: &Distribution, seed: u64) -> Result<Distribution> {
    let network = &dist.network;
    let modules = network.module_count();
    let qubits = dist.hypergraph.qubits;
    let capacity: Vec<usize> = (0..modules).map(|m| network.comp_capacity(m) as usize).collect();
    if capacity.iter().sum::<usize>() < qubits {
        return Err(Error::Infeasible(format!(
            "{qubits} qubits exceed total capacity {}",
            capacity.iter().sum::<usize>()
        )));
    }
    let inc = Incidence::new(&dist.hypergraph);
    let mut best: Option<(usize, Distribution)> = None;
    for start in 0..8u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_mul(8).wrapping_add(start));
        let mut d = dist.clone();

        // greedy growth: place qubits in random order, following partners
        let mut order: Vec<usize> = (0..qubits).collect();
        order.shuffle(&mut rng);
        let mut count = vec![0usize; modules];
        let mut placed = vec![false; qubits];
        for &q in &order {
            let mut scores = vec![0usize; modules];
            for &p in &inc.partners[q] {
                if placed[p] {
                    scores[d.phi_qubits[p]] += 1;
                }
            }
            let open: Vec<usize> = (0..modules).filter(|&m| count[m] < capacity[m]).collect();
            let top = open.iter().map(|&m| scores[m]).max().unwrap();
            let ties: Vec<usize> = open.into_iter().filter(|&m| scores[m] == top).collect();
            let m = *ties.choose(&mut rng).unwrap();
            d.phi_qubits[q] = m;
            count[m] += 1;
            placed[q] = true;
        }
        // gates to their cheaper endpoint
        for g in 0..d.hypergraph.gate_vertices.len() {
            let gv = &d.hypergraph.gate_vertices[g];
            d.phi_gates[g] = d.phi_qubits[gv.q0];
            let other = d.phi_qubits[gv.q1];
            if connectivity_gain(&mut d, &inc, Vertex::Gate(g), other) > 0 {
                d.phi_gates[g] = other;
            }
        }

        fm_pass(&mut d, &inc, &capacity, &mut rng);
        let cost = d.connectivity_cost();
        if best.as_ref().is_none_or(|(c, _)| cost < *c) {
            best = Some((cost, d));
        }
    }
    Ok(best.expect("at least one start").1)
}

/// FM-style improvement on the connectivity metric: repeatedly apply the
/// best available move (qubits to modules with spare capacity, gates to
/// either endpoint), even a worsening one, locking each moved vertex; the
/// pass then rolls back to its best prefix. Passes repeat while they help.
fn fm_pass(
    d: &mut Distribution,
    inc: &Incidence,
    capacity: &[usize],
    rng: &mut ChaCha8Rng,
) {
    let modules = d.network.module_count();
    let qubits = d.hypergraph.qubits;
    let gates = d.hypergraph.gate_vertices.len();
    loop {
        let mut locked: BTreeSet<Vertex> = BTreeSet::new();
        let mut trail: Vec<(Vertex, usize)> = Vec::new(); // (vertex, previous module)
        let mut running = 0isize;
        let mut best_prefix = (0isize, 0usize); // (gain, trail length)
        loop {
            let mut count = vec![0usize; modules];
            for &m in &d.phi_qubits {
                count[m] += 1;
            }
            let mut candidates: Vec<(isize, Move)> = Vec::new();
            for q in 0..qubits {
                let v = Vertex::Qubit(q);
                if locked.contains(&v) {
                    continue;
                }
                for m in 0..modules {
                    if m == d.phi_qubits[q] || count[m] >= capacity[m] {
                        continue;
                    }
                    let gain = connectivity_gain(d, inc, v, m);
                    candidates.push((gain, Move { vertex: v, target: m, swap_with: None }));
                }
            }
            for g in 0..gates {
                let v = Vertex::Gate(g);
                if locked.contains(&v) {
                    continue;
                }
                let gv = &d.hypergraph.gate_vertices[g];
                for m in [d.phi_qubits[gv.q0], d.phi_qubits[gv.q1]] {
                    if m == d.phi_gates[g] {
                        continue;
                    }
                    let gain = connectivity_gain(d, inc, v, m);
                    candidates.push((gain, Move { vertex: v, target: m, swap_with: None }));
                }
            }
            let Some(top) = candidates.iter().map(|(g, _)| *g).max() else { break };
            let ties: Vec<&(isize, Move)> =
                candidates.iter().filter(|(g, _)| *g == top).collect();
            let (gain, mv) = *ties.choose(rng).unwrap();
            trail.push((mv.vertex, d.module_of(mv.vertex)));
            commit(d, &mv);
            locked.insert(mv.vertex);
            running += gain;
            if running > best_prefix.0 {
                best_prefix = (running, trail.len());
            }
        }
        // roll back past the best prefix
        for &(v, old) in trail[best_prefix.1..].iter().rev() {
            apply_move(d, v, old);
        }
        if best_prefix.0 <= 0 {
            break;
        }
    }
}

/// Simulated annealing over single-vertex moves: a random vertex goes to a
/// random module (displacing a random qubit when the target is full),
/// accepted when the Steiner-aware gain is non-negative or with probability
/// `exp(gain / T)` otherwise; the temperature decays geometrically and the
/// best distribution seen is returned.
pub fn anneal(dist: &Distribution, params: &AnnealParams) -> Result<Distribution> {
    if !(params.cooling > 0.0 && params.cooling < 1.0) {
        return Err(Error::InvalidParams(format!(
            "cooling rate {} outside (0, 1)",
            params.cooling
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    let mut d = dist.clone();
    let inc = Incidence::new(&d.hypergraph);
    if params.iterations == 0 {
        return Ok(d);
    }

    let propose = |d: &Distribution, rng: &mut ChaCha8Rng| -> Option<Move> {
        let qubits = d.hypergraph.qubits;
        let gates = d.hypergraph.gate_vertices.len();
        let pick = rng.gen_range(0..qubits + gates);
        let modules = d.network.module_count();
        if modules < 2 {
            return None;
        }
        if pick < qubits {
            let q = pick;
            let mut m = rng.gen_range(0..modules);
            while m == d.phi_qubits[q] {
                m = rng.gen_range(0..modules);
            }
            let full = d.occupancy()[m] >= d.network.comp_capacity(m) as usize;
            let swap_with = if full {
                let residents: Vec<usize> =
                    (0..qubits).filter(|&p| p != q && d.phi_qubits[p] == m).collect();
                Some(*residents.choose(rng)?)
            } else {
                None
            };
            Some(Move { vertex: Vertex::Qubit(q), target: m, swap_with })
        } else {
            let g = pick - qubits;
            let mut m = rng.gen_range(0..modules);
            while m == d.phi_gates[g] {
                m = rng.gen_range(0..modules);
            }
            Some(Move { vertex: Vertex::Gate(g), target: m, swap_with: None })
        }
    };

    let mut temperature = match params.initial_temperature {
        Some(t) => t,
        None => {
            let mut sum = 0.0;
            let mut n = 0usize;
            for _ in 0..50 {
                if let Some(mv) = propose(&d, &mut rng) {
                    if let Ok(g) = move_gain(&mut d, &inc, &mv) {
                        sum += g.unsigned_abs() as f64;
                        n += 1;
                    }
                }
            }
            if n == 0 || sum == 0.0 {
                1.0
            } else {
                sum / n as f64
            }
        }
    };

    let mut best = d.clone();
    let mut best_cost = crate::cost::total_cost(&best)?;
    let mut cost = best_cost;
    for _ in 0..params.iterations {
        if let Some(mv) = propose(&d, &mut rng) {
            if let Ok(gain) = move_gain(&mut d, &inc, &mv) {
                let accept = gain >= 0 || rng.gen_bool((gain as f64 / temperature).exp().min(1.0));
                if accept {
                    commit(&mut d, &mv);
                    cost = (cost as isize - gain) as usize;
                    if cost < best_cost {
                        best_cost = cost;
                        best = d.clone();
                    }
                }
            }
        }
        temperature *= params.cooling;
    }
    Ok(best)
}

/// Options for a boundary-reallocation run.
#[derive(Debug, Clone)]
pub struct BoundaryOpts {
    pub max_rounds: usize,
    /// When false only gate-vertices move (detached-gate refinement).
    pub move_qubits: bool,
    /// Gate-vertices that must stay put.
    pub frozen_gates: BTreeSet<usize>,
    pub seed: u64,
}

impl Default for BoundaryOpts {
    fn default() -> Self {
        BoundaryOpts { max_rounds: 1000, move_qubits: true, frozen_gates: BTreeSet::new(), seed: 0 }
    }
}

/// Boundary reallocation: each round gathers the vertices of cut
/// hyperedges, evaluates their moves to the modules their hyperedges touch
/// (including Steiner-tree interior modules, where a gate may sit detached
/// from both its qubits), and applies the single best non-negative move,
/// ties broken randomly. Stops on a zero-improvement round. The cost never
/// increases.
pub fn boundary_pass(dist: &Distribution, opts: &BoundaryOpts) -> Result<Distribution> {
    let mut d = dist.clone();
    let inc = Incidence::new(&d.hypergraph);
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    for _ in 0..opts.max_rounds {
        let mut boundary: BTreeSet<Vertex> = BTreeSet::new();
        let mut targets: BTreeSet<usize> = BTreeSet::new();
        for h in 0..d.hypergraph.hyperedges.len() {
            let modules = d.hyperedge_modules(h);
            if modules.len() < 2 {
                continue;
            }
            let he = &d.hypergraph.hyperedges[h];
            boundary.insert(Vertex::Qubit(he.root));
            for &g in &he.members {
                boundary.insert(Vertex::Gate(g));
            }
            let terminals: Vec<usize> = modules.iter().copied().collect();
            targets.extend(d.network.steiner_tree(&terminals)?.vertices());
        }
        let mut best: Vec<(isize, Move)> = Vec::new(); // all moves tied at the top gain
        for &v in &boundary {
            match v {
                Vertex::Qubit(_) if !opts.move_qubits => continue,
                Vertex::Gate(g) if opts.frozen_gates.contains(&g) => continue,
                _ => {}
            }
            for &m in &targets {
                if m == d.module_of(v) {
                    continue;
                }
                let mv = match v {
                    Vertex::Gate(_) => Move { vertex: v, target: m, swap_with: None },
                    Vertex::Qubit(q) => {
                        let full = d.occupancy()[m] >= d.network.comp_capacity(m) as usize;
                        if full {
                            // profitable swaps only: try the best partner
                            let residents: Vec<usize> = (0..d.hypergraph.qubits)
                                .filter(|&p| p != q && d.phi_qubits[p] == m)
                                .collect();
                            let mut sub: Option<(isize, Move)> = None;
                            for p in residents {
                                let mv =
                                    Move { vertex: v, target: m, swap_with: Some(p) };
                                if let Ok(gain) = move_gain(&mut d, &inc, &mv) {
                                    if sub.as_ref().is_none_or(|(g, _)| gain > *g) {
                                        sub = Some((gain, mv));
                                    }
                                }
                            }
                            match sub {
                                Some((_, mv)) => mv,
                                None => continue,
                            }
                        } else {
                            Move { vertex: v, target: m, swap_with: None }
                        }
                    }
                };
                if let Ok(gain) = move_gain(&mut d, &inc, &mv) {
                    match best.first() {
                        Some(&(top, _)) if gain < top => {}
                        Some(&(top, _)) if gain == top => best.push((gain, mv)),
                        _ => best = vec![(gain, mv)],
                    }
                }
            }
        }
        let Some(&(gain, _)) = best.first() else { break };
        if gain < 0 {
            break;
        }
        let (_, mv) = best.choose(&mut rng).unwrap();
        commit(&mut d, mv);
        if gain == 0 {
            break;
        }
    }
    Ok(d)
}

/// Boundary reallocation over all vertices; see [`boundary_pass`].
pub fn boundary_reallocate(dist: &Distribution, max_rounds: usize, seed: u64) -> Result<Distribution> {
    boundary_pass(dist, &BoundaryOpts { max_rounds, seed, ..BoundaryOpts::default() })
}
