//! Named end-to-end distribution workflows. Each one takes a rebased
//! circuit and a network, performs qubit allocation, non-local gate
//! distribution and an optional stack of refinement passes, and returns a
//! valid [`Distribution`]. The two base strategies are hypergraph
//! partitioning (Steiner-aware but embedding-blind) and vertex-cover
//! packing (embedding-aware but pair-local); the remaining workflows are
//! the documented refinement stacks over those.

use crate::allocate::{anneal, boundary_reallocate, initial_partition, AnnealParams};
use crate::circuit::Circuit;
use crate::cover::distribute_by_cover;
use crate::distribution::Distribution;
use crate::network::Network;
use crate::refine::{
    refine_detached, refine_dtype_intertwined, refine_dtype_neighbouring, refine_eager_h_merge,
};
use crate::{Error, Result};
use serde::{Deserialize, Serialize};
use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

/// The named workflows, in the order the CLI lists them.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Workflow {
    /// Simulated annealing over the full hypergraph: heterogeneous
    /// networks, Steiner trees and detached gates, but no embedding.
    Annealing,
    /// Multi-start greedy + FM partitioning on the connectivity metric.
    Partition,
    /// Partition, then Steiner-aware boundary reallocation.
    PartitionHetero,
    /// PartitionHetero, then eager H-type packet merging.
    PartitionHeteroEmbed,
    /// Partition, then eager H-type packet merging (connectivity only).
    PartitionEmbed,
    /// Vertex-cover packing with embedding over a partitioned allocation.
    Embed,
    /// Embed, then D-type merges so chains share Steiner-tree links.
    EmbedSteiner,
    /// EmbedSteiner, then detached-gate reallocation.
    EmbedSteinerDetach,
}

impl Workflow {
    pub const ALL: [Workflow; 8] = [
        Workflow::Annealing,
        Workflow::Partition,
        Workflow::PartitionHetero,
        Workflow::PartitionHeteroEmbed,
        Workflow::PartitionEmbed,
        Workflow::Embed,
        Workflow::EmbedSteiner,
        Workflow::EmbedSteinerDetach,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Workflow::Annealing => "annealing",
            Workflow::Partition => "partition",
            Workflow::PartitionHetero => "partition-hetero",
            Workflow::PartitionHeteroEmbed => "partition-hetero-embed",
            Workflow::PartitionEmbed => "partition-embed",
            Workflow::Embed => "embed",
            Workflow::EmbedSteiner => "embed-steiner",
            Workflow::EmbedSteinerDetach => "embed-steiner-detach",
        }
    }
}

impl fmt::Display for Workflow {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Workflow {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Workflow::ALL
            .into_iter()
            .find(|w| w.name() == s)
            .ok_or_else(|| {
                let names: Vec<&str> = Workflow::ALL.iter().map(|w| w.name()).collect();
                Error::InvalidParams(format!(
                    "unknown workflow {s:?}; expected one of {}",
                    names.join(", ")
                ))
            })
    }
}

/// Tuning knobs shared by the workflows.
#[derive(Debug, Clone)]
pub struct WorkflowOpts {
    pub seed: u64,
    /// Annealing schedule (`annealing` only).
    pub anneal: AnnealParams,
    /// Boundary-reallocation round cap (`partition-hetero*` only).
    pub rounds: usize,
}

impl Default for WorkflowOpts {
    fn default() -> Self {
        WorkflowOpts { seed: 0, anneal: AnnealParams::default(), rounds: 1_000 }
    }
}

/// Round-robin starting allocation: qubits spread over modules by
/// remaining computation capacity, gate-vertices to their first qubit.
fn seed_distribution(circuit: &Arc<Circuit>, network: &Arc<Network>) -> Result<Distribution> {
    let modules = network.module_count();
    let mut remaining: Vec<usize> =
        (0..modules).map(|m| network.comp_capacity(m) as usize).collect();
    if remaining.iter().sum::<usize>() < circuit.qubits {
        return Err(Error::Infeasible(format!(
            "{} qubits exceed total capacity {}",
            circuit.qubits,
            remaining.iter().sum::<usize>()
        )));
    }
    let mut phi_q = Vec::with_capacity(circuit.qubits);
    let mut next = 0usize;
    for _ in 0..circuit.qubits {
        while remaining[next % modules] == 0 {
            next += 1;
        }
        let m = next % modules;
        remaining[m] -= 1;
        next += 1;
        phi_q.push(m);
    }
    let phi_g: Vec<usize> = circuit
        .gates
        .iter()
        .filter_map(|g| match g {
            crate::circuit::Gate::CRz { q0, .. } => Some(phi_q[*q0]),
            _ => None,
        })
        .collect();
    Distribution::new(Arc::clone(circuit), Arc::clone(network), phi_q, phi_g)
}

/// Run a named workflow against a rebased circuit. The circuit must
/// already be in the {H, Rz, CRz} gateset (`NotRebased` otherwise).
pub fn distribute(
    circuit: &Arc<Circuit>,
    network: &Arc<Network>,
    workflow: Workflow,
    opts: &WorkflowOpts,
) -> Result<Distribution> {
    if let Some(g) = circuit.gates.iter().find(|g| !g.is_rebased()) {
        return Err(Error::NotRebased(g.name().into()));
    }
    match workflow {
        Workflow::Annealing => {
            let d = seed_distribution(circuit, network)?;
            let params = AnnealParams { seed: opts.seed, ..opts.anneal.clone() };
            anneal(&d, &params)
        }
        Workflow::Partition => {
            let d = seed_distribution(circuit, network)?;
            initial_partition(&d, opts.seed)
        }
        Workflow::PartitionHetero => {
            let d = distribute(circuit, network, Workflow::Partition, opts)?;
            boundary_reallocate(&d, opts.rounds, opts.seed)
        }
        Workflow::PartitionHeteroEmbed => {
            let d = distribute(circuit, network, Workflow::PartitionHetero, opts)?;
            refine_eager_h_merge(&d)
        }
        Workflow::PartitionEmbed => {
            let d = distribute(circuit, network, Workflow::Partition, opts)?;
            refine_eager_h_merge(&d)
        }
        Workflow::Embed => {
            let d = distribute(circuit, network, Workflow::Partition, opts)?;
            distribute_by_cover(circuit, network, &d.phi_qubits, opts.seed)
        }
        Workflow::EmbedSteiner => {
            let d = distribute(circuit, network, Workflow::Embed, opts)?;
            refine_dtype_neighbouring(&refine_dtype_intertwined(&d)?)
        }
        Workflow::EmbedSteinerDetach => {
            let d = distribute(circuit, network, Workflow::EmbedSteiner, opts)?;
            refine_detached(&d, opts.seed)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::builder::build;
    use crate::circuit::Gate;
    use crate::cost::total_cost;
    use crate::verify::verify_equivalence;
    use rand::rngs::StdRng;
    use rand::{Rng, SeedableRng};

    fn crz(q0: usize, q1: usize, phase: f64) -> Gate {
        Gate::CRz { q0, q1, phase }
    }

    fn complete(names: &[&str], cap: u32) -> Arc<Network> {
        let mods: Vec<(String, u32, Option<u32>)> =
            names.iter().map(|n| (n.to_string(), cap, None)).collect();
        let mut links = Vec::new();
        for i in 0..names.len() {
            for j in i + 1..names.len() {
                links.push((names[i].to_string(), names[j].to_string()));
            }
        }
        Arc::new(Network::new(mods, links).unwrap())
    }

    fn random_circuit(rng: &mut StdRng, qubits: usize, len: usize) -> Arc<Circuit> {
        let mut gates = Vec::new();
        for _ in 0..len {
            match rng.gen_range(0..4) {
                0 => gates.push(Gate::H { q: rng.gen_range(0..qubits) }),
                1 => gates.push(Gate::Rz { q: rng.gen_range(0..qubits), phase: rng.gen() }),
                _ => {
                    let q0 = rng.gen_range(0..qubits);
                    let mut q1 = rng.gen_range(0..qubits);
                    while q1 == q0 {
                        q1 = rng.gen_range(0..qubits);
                    }
                    let phase = if rng.gen_bool(0.5) { 1.0 } else { rng.gen() };
                    gates.push(crz(q0, q1, phase));
                }
            }
        }
        Arc::new(Circuit::with_gates(qubits, gates).unwrap())
    }

    #[test]
    fn names_round_trip() {
        for w in Workflow::ALL {
            assert_eq!(w.name().parse::<Workflow>().unwrap(), w);
            assert_eq!(w.to_string(), w.name());
        }
        assert!("steiner-first".parse::<Workflow>().is_err());
    }

    #[test]
    fn local_circuit_costs_nothing_everywhere() {
        let c = Arc::new(
            Circuit::with_gates(2, vec![crz(0, 1, 0.5), Gate::H { q: 0 }, crz(0, 1, 1.0)])
                .unwrap(),
        );
        let net = complete(&["A", "B"], 2);
        for w in Workflow::ALL {
            let d = distribute(&c, &net, w, &WorkflowOpts::default()).unwrap();
            assert_eq!(total_cost(&d).unwrap(), 0, "{w}");
        }
    }

    #[test]
    fn unrebased_input_is_rejected() {
        let c = Arc::new(Circuit::with_gates(2, vec![Gate::CX { q0: 0, q1: 1 }]).unwrap());
        let net = complete(&["A", "B"], 2);
        let err = distribute(&c, &net, Workflow::Partition, &WorkflowOpts::default());
        assert!(matches!(err, Err(Error::NotRebased(_))));
    }

    #[test]
    fn every_workflow_yields_valid_buildable_distributions() {
        let mut rng = StdRng::seed_from_u64(41);
        let opts = WorkflowOpts {
            anneal: AnnealParams { iterations: 300, ..AnnealParams::default() },
            ..WorkflowOpts::default()
        };
        for trial in 0..6 {
            let qubits = rng.gen_range(3..=5);
            let len = rng.gen_range(5..=15);
            let c = random_circuit(&mut rng, qubits, len);
            let names: Vec<String> = (0..rng.gen_range(2..=3)).map(|m| format!("M{m}")).collect();
            let refs: Vec<&str> = names.iter().map(|s| s.as_str()).collect();
            let net = complete(&refs, qubits as u32);
            for w in Workflow::ALL {
                let opts = WorkflowOpts { seed: trial, ..opts.clone() };
                let d = distribute(&c, &net, w, &opts).unwrap();
                assert!(d.check_validity().is_ok(), "trial {trial} {w}");
                let built = build(&d).unwrap();
                assert_eq!(built.ebit_count, total_cost(&d).unwrap(), "trial {trial} {w}");
                verify_equivalence(&c, &built).unwrap_or_else(|e| {
                    panic!("trial {trial} {w}: {e}");
                });
            }
        }
    }

    #[test]
    fn refinement_stacks_never_cost_more_than_their_base() {
        let mut rng = StdRng::seed_from_u64(4242);
        for trial in 0..8 {
            let qubits = rng.gen_range(4..=7);
            let len = rng.gen_range(10..=25);
            let c = random_circuit(&mut rng, qubits, len);
            let names: Vec<String> = (0..rng.gen_range(2..=4)).map(|m| format!("M{m}")).collect();
            let refs: Vec<&str> = names.iter().map(|s| s.as_str()).collect();
            let net = complete(&refs, qubits as u32);
            let opts = WorkflowOpts { seed: trial, ..WorkflowOpts::default() };
            let cost = |w: Workflow| {
                let d = distribute(&c, &net, w, &opts).unwrap();
                total_cost(&d).unwrap()
            };
            let embed = cost(Workflow::Embed);
            let steiner = cost(Workflow::EmbedSteiner);
            let detach = cost(Workflow::EmbedSteinerDetach);
            assert!(steiner <= embed, "trial {trial}: {steiner} > {embed}");
            assert!(detach <= steiner, "trial {trial}: {detach} > {steiner}");
            let partition = cost(Workflow::Partition);
            let hetero = cost(Workflow::PartitionHetero);
            let hetero_embed = cost(Workflow::PartitionHeteroEmbed);
            let part_embed = cost(Workflow::PartitionEmbed);
            assert!(hetero <= partition, "trial {trial}: {hetero} > {partition}");
            assert!(hetero_embed <= hetero, "trial {trial}: {hetero_embed} > {hetero}");
            assert!(part_embed <= partition, "trial {trial}: {part_embed} > {partition}");
        }
    }

    #[test]
    fn workflows_are_deterministic_given_a_seed() {
        let mut rng = StdRng::seed_from_u64(7);
        let c = random_circuit(&mut rng, 5, 18);
        let net = complete(&["A", "B", "C"], 5);
        let opts = WorkflowOpts {
            seed: 11,
            anneal: AnnealParams { iterations: 200, ..AnnealParams::default() },
            ..WorkflowOpts::default()
        };
        for w in Workflow::ALL {
            let a = distribute(&c, &net, w, &opts).unwrap();
            let b = distribute(&c, &net, w, &opts).unwrap();
            assert_eq!(a.phi_qubits, b.phi_qubits, "{w}");
            assert_eq!(a.phi_gates, b.phi_gates, "{w}");
            assert_eq!(total_cost(&a).unwrap(), total_cost(&b).unwrap(), "{w}");
        }
    }

    #[test]
    fn capacity_bound_is_respected() {
        let mut rng = StdRng::seed_from_u64(99);
        // 6 qubits, modules of capacity 2: every allocation is tight
        let c = random_circuit(&mut rng, 6, 20);
        let net = complete(&["A", "B", "C"], 2);
        for w in Workflow::ALL {
            let opts = WorkflowOpts {
                anneal: AnnealParams { iterations: 200, ..AnnealParams::default() },
                ..WorkflowOpts::default()
            };
            let d = distribute(&c, &net, w, &opts).unwrap();
            let occ = d.occupancy();
            for m in 0..3 {
                assert!(occ[m] <= 2, "{w}: module {m} holds {}", occ[m]);
            }
        }
    }

    #[test]
    fn infeasible_capacity_is_reported() {
        let c = Arc::new(Circuit::with_gates(5, vec![crz(0, 1, 0.5)]).unwrap());
        let net = complete(&["A", "B"], 2);
        let err = distribute(&c, &net, Workflow::Partition, &WorkflowOpts::default());
        assert!(matches!(err, Err(Error::Infeasible(_))));
    }
}
