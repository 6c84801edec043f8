//! Desk-scale equivalence checking between an input circuit and its
//! distributed form.
//!
//! The distributed circuit is simulated with measurements deferred: each
//! measurement plus its conditional correction becomes a coherent CX/CZ from
//! the measured wire, after which that wire is deterministically in `|+>`
//! (the protocol's determinism) and an H resets it to `|0>` so the link slot
//! can be reused. For every computational-basis input the full output column
//! must factorize as `U|x> ⊗ |eta>` with a single `|eta>` and global phase
//! across all columns.
//!
//! A second, stochastic checker actually samples measurement outcomes and
//! confirms the result agrees with `U|psi>` on random states regardless of
//! the branch taken.

use crate::builder::{DOp, DistributedCircuit, LinkId, Operand};
use crate::circuit::{Circuit, Gate};
use crate::{Error, Result};
use num_complex::Complex64;
use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};
use rayon::prelude::*;
use std::collections::BTreeMap;
use std::f64::consts::PI;

/// Largest residual accepted by the factorization check.
pub const VERIFY_TOL: f64 = 1e-8;
/// Statevector size cap: computation wires plus link wires.
pub const MAX_SIM_WIRES: usize = 14;

// --- statevector kernels ------------------------------------------------------
// wire q is bit q of the state index (little-endian)

fn phase_factor(phase: f64) -> Complex64 {
    Complex64::from_polar(1.0, PI * phase)
}

fn apply_h(state: &mut [Complex64], q: usize) {
    let mask = 1usize << q;
    let s = std::f64::consts::FRAC_1_SQRT_2;
    for idx in 0..state.len() {
        if idx & mask == 0 {
            let a = state[idx];
            let b = state[idx | mask];
            state[idx] = (a + b) * s;
            state[idx | mask] = (a - b) * s;
        }
    }
}

fn apply_rz(state: &mut [Complex64], q: usize, phase: f64) {
    let mask = 1usize << q;
    let f = phase_factor(phase);
    for (idx, amp) in state.iter_mut().enumerate() {
        if idx & mask != 0 {
            *amp *= f;
        }
    }
}

fn apply_crz(state: &mut [Complex64], a: usize, b: usize, phase: f64) {
    let mask = (1usize << a) | (1usize << b);
    let f = phase_factor(phase);
    for (idx, amp) in state.iter_mut().enumerate() {
        if idx & mask == mask {
            *amp *= f;
        }
    }
}

fn apply_cx(state: &mut [Complex64], c: usize, t: usize) {
    let cm = 1usize << c;
    let tm = 1usize << t;
    for idx in 0..state.len() {
        if idx & cm != 0 && idx & tm == 0 {
            state.swap(idx, idx | tm);
        }
    }
}

fn apply_x(state: &mut [Complex64], q: usize) {
    let mask = 1usize << q;
    for idx in 0..state.len() {
        if idx & mask == 0 {
            state.swap(idx, idx | mask);
        }
    }
}

fn apply_gate(state: &mut [Complex64], gate: &Gate) -> Result<()> {
    match *gate {
        Gate::H { q } => apply_h(state, q),
        Gate::Rz { q, phase } => apply_rz(state, q, phase),
        Gate::CRz { q0, q1, phase } => apply_crz(state, q0, q1, phase),
        ref g => return Err(Error::NotRebased(g.name().into())),
    }
    Ok(())
}

fn basis_state(wires: usize, x: usize) -> Vec<Complex64> {
    let mut state = vec![Complex64::new(0.0, 0.0); 1 << wires];
    state[x] = Complex64::new(1.0, 0.0);
    state
}

/// Run the (rebased) circuit on basis input `x`.
fn run_original(circuit: &Circuit, x: usize) -> Result<Vec<Complex64>> {
    let mut state = basis_state(circuit.qubits, x);
    for g in &circuit.gates {
        apply_gate(&mut state, g)?;
    }
    Ok(state)
}

// --- dense unitary --------------------------------------------------------------

/// Dense complex matrix, column-major.
#[derive(Debug, Clone, PartialEq)]
pub struct Unitary {
    pub dim: usize,
    data: Vec<Complex64>,
}

impl Unitary {
    pub fn at(&self, row: usize, col: usize) -> Complex64 {
        self.data[col * self.dim + row]
    }

    pub fn column(&self, col: usize) -> &[Complex64] {
        &self.data[col * self.dim..(col + 1) * self.dim]
    }

    /// Build a matrix from an entry function; handy for analytic oracles.
    pub fn from_fn(dim: usize, f: impl Fn(usize, usize) -> Complex64) -> Unitary {
        let mut data = Vec::with_capacity(dim * dim);
        for col in 0..dim {
            for row in 0..dim {
                data.push(f(row, col));
            }
        }
        Unitary { dim, data }
    }

    /// Largest entry-wise difference, minimized over a global phase.
    pub fn distance_up_to_phase(&self, other: &Unitary) -> f64 {
        assert_eq!(self.dim, other.dim);
        // align on the largest entry of self
        let (mut best, mut best_mag) = (0, 0.0f64);
        for (i, v) in self.data.iter().enumerate() {
            if v.norm() > best_mag {
                best_mag = v.norm();
                best = i;
            }
        }
        if best_mag == 0.0 {
            return other.data.iter().map(|v| v.norm()).fold(0.0, f64::max);
        }
        let phase = other.data[best] / self.data[best];
        let phase = if phase.norm() == 0.0 { Complex64::new(1.0, 0.0) } else { phase / phase.norm() };
        self.data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| (a * phase - b).norm())
            .fold(0.0, f64::max)
    }
}

/// Exact unitary of a rebased circuit; `TooLarge` beyond [`MAX_SIM_WIRES`].
pub fn unitary_of(circuit: &Circuit) -> Result<Unitary> {
    if circuit.qubits > MAX_SIM_WIRES {
        return Err(Error::TooLarge(format!(
            "{} qubits exceeds the {MAX_SIM_WIRES}-wire simulation cap",
            circuit.qubits
        )));
    }
    let dim = 1usize << circuit.qubits;
    let columns: Result<Vec<Vec<Complex64>>> =
        (0..dim).into_par_iter().map(|x| run_original(circuit, x)).collect();
    let mut data = Vec::with_capacity(dim * dim);
    for col in columns? {
        data.extend(col);
    }
    Ok(Unitary { dim, data })
}

// --- deferred-measurement simulation of the distributed circuit ---------------

struct Wires {
    qubits: usize,
    total: usize,
    layout: BTreeMap<LinkId, usize>,
}

impl Wires {
    fn of(built: &DistributedCircuit) -> Result<Self> {
        let total = built.total_wires();
        if total > MAX_SIM_WIRES {
            return Err(Error::TooLarge(format!(
                "{total} wires ({} computation + {} link) exceed the {MAX_SIM_WIRES}-wire cap",
                built.qubits,
                total - built.qubits
            )));
        }
        Ok(Wires { qubits: built.qubits, total, layout: built.wire_layout() })
    }

    fn operand(&self, op: &Operand) -> usize {
        match *op {
            Operand::Wire(q) => q,
            Operand::Link(l) => self.layout[&l],
        }
    }

    fn link(&self, l: &LinkId) -> usize {
        self.layout[l]
    }
}

/// Apply the distributed ops to `state`, deferring measurements: the
/// conditional correction becomes a coherent CX/CZ from the measured wire,
/// then an H returns that wire to `|0>` (it is `|+>` by protocol
/// determinism), keeping later reuses of the slot sound.
fn run_deferred(built: &DistributedCircuit, wires: &Wires, state: &mut [Complex64]) -> Result<()> {
    let mut pending: BTreeMap<usize, usize> = BTreeMap::new();
    for op in &built.ops {
        match op {
            DOp::H { t } => apply_h(state, wires.operand(t)),
            DOp::Rz { t, phase } => apply_rz(state, wires.operand(t), *phase),
            DOp::CRz { a, b, phase } => {
                apply_crz(state, wires.operand(a), wires.operand(b), *phase)
            }
            DOp::CX { c, t } => apply_cx(state, wires.operand(c), wires.operand(t)),
            DOp::EbitPrepare { a, b } => {
                apply_h(state, wires.link(a));
                apply_cx(state, wires.link(a), wires.link(b));
            }
            DOp::Measure { t, bit } => {
                if pending.insert(*bit, wires.link(t)).is_some() {
                    return Err(Error::InvalidParams(format!("bit {bit} measured twice")));
                }
            }
            DOp::CondX { bit, targets } => {
                let w = pending.remove(bit).ok_or_else(|| {
                    Error::InvalidParams(format!("conditional on unmeasured bit {bit}"))
                })?;
                for t in targets {
                    apply_cx(state, w, wires.operand(t));
                }
                apply_h(state, w);
            }
            DOp::CondZ { bit, targets } => {
                let w = pending.remove(bit).ok_or_else(|| {
                    Error::InvalidParams(format!("conditional on unmeasured bit {bit}"))
                })?;
                for t in targets {
                    apply_crz(state, w, wires.operand(t), 1.0);
                }
                apply_h(state, w);
            }
        }
    }
    if !pending.is_empty() {
        return Err(Error::InvalidParams(format!(
            "{} measurement(s) never consumed by a correction",
            pending.len()
        )));
    }
    Ok(())
}

fn deferred_column(built: &DistributedCircuit, wires: &Wires, x: usize) -> Result<Vec<Complex64>> {
    let mut state = basis_state(wires.total, x);
    run_deferred(built, wires, &mut state)?;
    Ok(state)
}

#[derive(Debug, Clone)]
pub struct VerifyReport {
    /// Largest deviation from the factorized form over all columns.
    pub max_residual: f64,
    /// Basis inputs checked (2^qubits).
    pub columns: usize,
    /// Wires simulated.
    pub wires: usize,
}

/// Check that the distributed circuit implements `original` exactly (up to a
/// global phase), leaving every link wire disentangled.
pub fn verify_equivalence(original: &Circuit, built: &DistributedCircuit) -> Result<VerifyReport> {
    if original.qubits != built.qubits {
        return Err(Error::InvalidParams(format!(
            "original has {} qubits, distributed circuit has {}",
            original.qubits, built.qubits
        )));
    }
    let original = original.rebase();
    let wires = Wires::of(built)?;
    let n = wires.qubits;
    let dim = 1usize << n;
    let link_dim = 1usize << (wires.total - n);

    // pass 1: locate the globally largest amplitude
    let maxes: Result<Vec<(f64, usize)>> = (0..dim)
        .into_par_iter()
        .map(|x| {
            let col = deferred_column(built, &wires, x)?;
            let (idx, mag) = col
                .iter()
                .enumerate()
                .map(|(i, v)| (i, v.norm()))
                .max_by(|a, b| a.1.total_cmp(&b.1))
                .expect("nonempty state");
            Ok((mag, x * col.len() + idx))
        })
        .collect();
    let (_, flat) = maxes?
        .into_iter()
        .max_by(|a, b| a.0.total_cmp(&b.0))
        .expect("at least one column");
    let (x_star, idx_star) = (flat / (dim * link_dim), flat % (dim * link_dim));
    let i_star = idx_star & (dim - 1);

    // extract |eta> (global phase folded in) from that column
    let u_star = run_original(&original, x_star)?;
    if u_star[i_star].norm() < 1e-12 {
        return Err(Error::NonFactorizable(format!(
            "largest amplitude sits at computation index {i_star} of column {x_star}, \
             where the original circuit has none"
        )));
    }
    let psi_star = deferred_column(built, &wires, x_star)?;
    let eta: Vec<Complex64> =
        (0..link_dim).map(|l| psi_star[i_star + (l << n)] / u_star[i_star]).collect();

    // pass 2: residuals of psi_x[(i,l)] = U[i,x] * eta[l]
    let max_residual = (0..dim)
        .into_par_iter()
        .map(|x| -> Result<f64> {
            let u = run_original(&original, x)?;
            let psi = deferred_column(built, &wires, x)?;
            let mut worst = 0.0f64;
            for l in 0..link_dim {
                for i in 0..dim {
                    let want = u[i] * eta[l];
                    let got = psi[i + (l << n)];
                    worst = worst.max((want - got).norm());
                }
            }
            Ok(worst)
        })
        .try_reduce(|| 0.0, |a, b| Ok(a.max(b)))?;

    if max_residual > VERIFY_TOL {
        return Err(Error::NonFactorizable(format!(
            "distributed circuit deviates from U ⊗ |eta> by {max_residual:.3e} \
             (tolerance {VERIFY_TOL:.0e})"
        )));
    }
    Ok(VerifyReport { max_residual, columns: dim, wires: wires.total })
}

/// Sample measurement outcomes on random input states and check the result
/// equals `U|psi>` with the links returned to `|0>`, whatever branch was
/// taken. Returns the worst fidelity seen.
pub fn verify_stochastic(
    original: &Circuit,
    built: &DistributedCircuit,
    samples: usize,
    seed: u64,
) -> Result<f64> {
    if original.qubits != built.qubits {
        return Err(Error::InvalidParams(format!(
            "original has {} qubits, distributed circuit has {}",
            original.qubits, built.qubits
        )));
    }
    let original = original.rebase();
    let wires = Wires::of(built)?;
    let n = wires.qubits;
    let dim = 1usize << n;
    let mut rng = StdRng::seed_from_u64(seed);
    let mut worst: f64 = 1.0;

    for _ in 0..samples.max(1) {
        // random input on the computation wires, links |0>
        let mut input = vec![Complex64::new(0.0, 0.0); dim];
        let mut norm = 0.0;
        for amp in input.iter_mut() {
            *amp = Complex64::new(rng.gen::<f64>() - 0.5, rng.gen::<f64>() - 0.5);
            norm += amp.norm_sqr();
        }
        let norm = norm.sqrt();
        for amp in input.iter_mut() {
            *amp /= norm;
        }

        let mut expected = input.clone();
        for g in &original.gates {
            apply_gate(&mut expected, g)?;
        }

        let mut state = vec![Complex64::new(0.0, 0.0); 1 << wires.total];
        state[..dim].copy_from_slice(&input);
        let mut bits: Vec<bool> = Vec::new();
        for op in &built.ops {
            match op {
                DOp::H { t } => apply_h(&mut state, wires.operand(t)),
                DOp::Rz { t, phase } => apply_rz(&mut state, wires.operand(t), *phase),
                DOp::CRz { a, b, phase } => {
                    apply_crz(&mut state, wires.operand(a), wires.operand(b), *phase)
                }
                DOp::CX { c, t } => apply_cx(&mut state, wires.operand(c), wires.operand(t)),
                DOp::EbitPrepare { a, b } => {
                    apply_h(&mut state, wires.link(a));
                    apply_cx(&mut state, wires.link(a), wires.link(b));
                }
                DOp::Measure { t, bit } => {
                    let w = wires.link(t);
                    let outcome = sample_and_reset(&mut state, w, &mut rng);
                    if *bit != bits.len() {
                        return Err(Error::InvalidParams(format!(
                            "bit {bit} measured out of order"
                        )));
                    }
                    bits.push(outcome);
                }
                DOp::CondX { bit, targets } => {
                    if bits[*bit] {
                        for t in targets {
                            apply_x(&mut state, wires.operand(t));
                        }
                    }
                }
                DOp::CondZ { bit, targets } => {
                    if bits[*bit] {
                        for t in targets {
                            apply_rz(&mut state, wires.operand(t), 1.0);
                        }
                    }
                }
            }
        }

        // all links ended |0>: the state must live in the first block
        let mut overlap = Complex64::new(0.0, 0.0);
        for (i, e) in expected.iter().enumerate() {
            overlap += e.conj() * state[i];
        }
        let leak: f64 = state[dim..].iter().map(|v| v.norm_sqr()).sum();
        let fidelity = overlap.norm();
        worst = worst.min(fidelity - leak);
        if fidelity < 1.0 - VERIFY_TOL || leak > VERIFY_TOL {
            return Err(Error::NonFactorizable(format!(
                "sampled branch disagrees with the original: fidelity {fidelity:.12}, \
                 leakage {leak:.3e}"
            )));
        }
    }
    Ok(worst)
}

/// Measure wire `w` in the computational basis: project onto the sampled
/// outcome, renormalize, and relabel so the wire ends in `|0>`.
fn sample_and_reset(state: &mut [Complex64], w: usize, rng: &mut StdRng) -> bool {
    let mask = 1usize << w;
    let p1: f64 = state
        .iter()
        .enumerate()
        .filter(|(idx, _)| idx & mask != 0)
        .map(|(_, v)| v.norm_sqr())
        .sum();
    let outcome = rng.gen::<f64>() < p1;
    let keep = if outcome { mask } else { 0 };
    let p = if outcome { p1 } else { 1.0 - p1 };
    let scale = 1.0 / p.sqrt();
    for idx in 0..state.len() {
        if idx & mask == 0 {
            let src = idx | keep;
            state[idx] = state[src] * scale;
        }
    }
    for (idx, amp) in state.iter_mut().enumerate() {
        if idx & mask != 0 {
            *amp = Complex64::new(0.0, 0.0);
        }
    }
    outcome
}
