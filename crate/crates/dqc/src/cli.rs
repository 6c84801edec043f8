//! Command-line surface. One thin binary dispatches here; every subcommand
//! is plumbing around the library: load files, seed the RNG, call one
//! pipeline stage, write files. Exit codes: 0 success, 1 domain error,
//! 2 usage error (clap's default). Log level comes from `DQC_LOG`.

use crate::bench::{rows_to_csv, rows_to_json, run_experiment, BenchConfig};
use crate::builder::{build, enforce_link_bound, DistributedCircuit};
use crate::circuit::{parse_qasm, write_qasm, Circuit};
use crate::cost::total_cost;
use crate::distribution::Distribution;
use crate::network::{gen_network, Network, NetworkKind};
use crate::refine::{run_passes, RefinePass};
use crate::verify::{verify_equivalence, verify_stochastic};
use crate::workflow::{distribute, Workflow, WorkflowOpts};
use crate::{Error, Result};
use clap::{Parser, Subcommand};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;

#[derive(Parser)]
#[command(
    name = "dqc",
    version,
    about = "Distribute quantum circuits over networks of quantum modules"
)]
struct Cli {
    /// Worker threads for parallel stages (default: one per core)
    #[arg(long, global = true)]
    jobs: Option<usize>,
    #[command(subcommand)]
    cmd: Cmd,
}

fn parse_workflow(s: &str) -> std::result::Result<Workflow, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

fn parse_kind(s: &str) -> std::result::Result<NetworkKind, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

fn parse_pass(s: &str) -> std::result::Result<RefinePass, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

#[derive(Subcommand)]
enum Cmd {
    /// Lower a circuit into the {H, Rz, CRz} gateset
    Rebase {
        /// Input circuit (.json or .qasm)
        #[arg(long)]
        circuit: PathBuf,
        /// Output circuit (.json or .qasm by extension)
        #[arg(long)]
        out: PathBuf,
    },
    /// Run a named workflow and write the distribution bundle
    Distribute {
        /// One of: annealing, partition, partition-hetero,
        /// partition-hetero-embed, partition-embed, embed, embed-steiner,
        /// embed-steiner-detach
        #[arg(long, value_parser = parse_workflow)]
        workflow: Workflow,
        /// Input circuit (.json or .qasm)
        #[arg(long)]
        circuit: PathBuf,
        /// Network description (.json)
        #[arg(long)]
        network: PathBuf,
        /// Output bundle: circuit + network + distribution + built circuit + stats
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Skip the equivalence check of the built circuit
        #[arg(long)]
        no_verify: bool,
    },
    /// Re-run refinement passes over a distribution bundle
    Refine {
        /// Input bundle from `distribute`
        #[arg(long)]
        dist: PathBuf,
        /// Comma-separated: detached, eager-h, dtype-n, dtype-i
        #[arg(long, value_delimiter = ',', required = true, value_parser = parse_pass)]
        passes: Vec<RefinePass>,
        /// Times to repeat the whole pass list
        #[arg(long, default_value_t = 1)]
        repeat: usize,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Report the ebit cost of a distribution bundle
    Cost {
        #[arg(long)]
        dist: PathBuf,
    },
    /// Check a distributed circuit against the original
    Verify {
        /// Original circuit (.json or .qasm)
        #[arg(long)]
        original: PathBuf,
        /// Bundle from `distribute`
        #[arg(long)]
        distributed: PathBuf,
        /// Sample this many random states instead of the exact check
        #[arg(long)]
        stochastic: Option<usize>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Print the stats block of a distribution bundle
    Stats {
        #[arg(long)]
        dist: PathBuf,
    },
    /// Generate a benchmark circuit
    GenCircuit {
        /// One of: cz-fraction, quantum-volume, pauli-gadget
        #[arg(long)]
        family: String,
        #[arg(long)]
        qubits: usize,
        /// Layers; defaults to the qubit count
        #[arg(long)]
        depth: Option<usize>,
        /// CZ probability for cz-fraction
        #[arg(long, default_value_t = 0.5)]
        prob: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Output circuit (.json or .qasm by extension)
        #[arg(long)]
        out: PathBuf,
    },
    /// Generate a module network
    GenNetwork {
        /// One of: homogeneous, unstructured, scale-free, small-world
        #[arg(long, value_parser = parse_kind)]
        kind: NetworkKind,
        #[arg(long)]
        modules: usize,
        #[arg(long)]
        qubits: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Run an experiment config and write a CSV report
    Bench {
        /// Experiment config (.json): circuits x networks x workflows x seeds
        #[arg(long)]
        config: PathBuf,
        /// CSV output path
        #[arg(long)]
        out: PathBuf,
        /// Also write the rows as JSON
        #[arg(long)]
        json: Option<PathBuf>,
    },
}

pub fn main() -> ExitCode {
    let _ = env_logger::Builder::from_env(
        env_logger::Env::new().filter_or("DQC_LOG", "warn"),
    )
    .format_timestamp(None)
    .try_init();
    let cli = Cli::parse();
    if let Some(jobs) = cli.jobs {
        let _ = rayon::ThreadPoolBuilder::new().num_threads(jobs).build_global();
    }
    match run(cli.cmd) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}

fn read_text(path: &Path) -> Result<String> {
    std::fs::read_to_string(path)
        .map_err(|e| std::io::Error::new(e.kind(), format!("{}: {e}", path.display())).into())
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    let mut text = text.to_string();
    if !text.ends_with('\n') {
        text.push('\n');
    }
    std::fs::write(path, text)
        .map_err(|e| std::io::Error::new(e.kind(), format!("{}: {e}", path.display())).into())
}

fn load_circuit(path: &Path) -> Result<Circuit> {
    let text = read_text(path)?;
    if path.extension().is_some_and(|e| e == "qasm") {
        parse_qasm(&text)
    } else {
        Circuit::from_json(&text)
    }
}

fn save_circuit(path: &Path, c: &Circuit) -> Result<()> {
    if path.extension().is_some_and(|e| e == "qasm") {
        write_text(path, &write_qasm(c)?)
    } else {
        write_text(path, &c.to_json())
    }
}

fn write_bundle(
    path: &Path,
    circuit: &Circuit,
    network: &Network,
    dist: &Distribution,
    built: &DistributedCircuit,
) -> Result<()> {
    let bundle = serde_json::json!({
        "circuit": serde_json::to_value(circuit)?,
        "network": serde_json::from_str::<serde_json::Value>(&network.to_json())?,
        "distribution": dist.to_json_value(built.ebit_count),
        "built": built.to_json(),
        "stats": serde_json::to_value(built.stats())?,
    });
    write_text(path, &serde_json::to_string_pretty(&bundle)?)
}

type Bundle = (Arc<Circuit>, Arc<Network>, Distribution, DistributedCircuit);

fn read_bundle(path: &Path) -> Result<Bundle> {
    let v: serde_json::Value = serde_json::from_str(&read_text(path)?)?;
    let circuit: Arc<Circuit> = Arc::new(serde_json::from_value(v["circuit"].clone())?);
    let network = Arc::new(Network::from_json(&v["network"].to_string())?);
    let dist =
        Distribution::from_json_value(&v["distribution"], circuit.clone(), network.clone())?;
    let built = DistributedCircuit::from_json(&v["built"].to_string())?;
    Ok((circuit, network, dist, built))
}

/// `partition-embed` ignores network structure, so it is only advertised
/// for networks where structure cannot matter.
fn is_homogeneous(net: &Network) -> bool {
    let n = net.module_count();
    let cap0 = net.comp_capacity(0);
    (0..n).all(|m| net.comp_capacity(m) == cap0 && net.link_capacity(m).is_none())
        && (0..n).all(|a| (a + 1..n).all(|b| net.has_edge(a, b)))
}

fn print_summary(workflow: Option<Workflow>, built: &DistributedCircuit) {
    if let Some(w) = workflow {
        println!("workflow: {w}");
    }
    let stats = built.stats();
    println!("ebits: {}", stats.ebits);
    println!("non-local gates: {}", stats.non_local_gates);
    println!("detached gates: {}", stats.detached_gates);
    println!("hyperedges: {}", stats.hyperedges);
    let peaks: Vec<String> =
        stats.link_peak.iter().map(|(m, p)| format!("{m}={p}")).collect();
    println!("peak links: {}", peaks.join(" "));
}

fn run(cmd: Cmd) -> Result<()> {
    match cmd {
        Cmd::Rebase { circuit, out } => {
            let c = load_circuit(&circuit)?;
            let r = c.rebase();
            save_circuit(&out, &r)?;
            println!(
                "rebased {} gates on {} qubits into {} gates ({} CRz)",
                c.gates.len(),
                c.qubits,
                r.gates.len(),
                r.crz_count()
            );
            Ok(())
        }
        Cmd::Distribute { workflow, circuit, network, out, seed, no_verify } => {
            let c = Arc::new(load_circuit(&circuit)?.rebase());
            let n = Arc::new(Network::from_json(&read_text(&network)?)?);
            if workflow == Workflow::PartitionEmbed && !is_homogeneous(&n) {
                log::warn!(
                    "partition-embed ignores network structure; results on this \
                     heterogeneous network may be poor"
                );
            }
            let opts = WorkflowOpts { seed, ..WorkflowOpts::default() };
            let dist = distribute(&c, &n, workflow, &opts)?;
            let built = build(&dist)?;
            let (dist, built) = enforce_link_bound(&dist, built)?;
            if !no_verify {
                match verify_equivalence(&c, &built) {
                    Ok(report) => println!(
                        "verified: residual {:.1e} over {} columns",
                        report.max_residual, report.columns
                    ),
                    Err(Error::TooLarge(msg)) => {
                        log::warn!("skipping verification, instance too large: {msg}");
                    }
                    Err(e) => return Err(e),
                }
            }
            write_bundle(&out, &c, &n, &dist, &built)?;
            print_summary(Some(workflow), &built);
            println!("wrote {}", out.display());
            Ok(())
        }
        Cmd::Refine { dist, passes, repeat, out, seed } => {
            let (circuit, network, d, _) = read_bundle(&dist)?;
            let before = total_cost(&d)?;
            let refined = run_passes(&d, &passes, repeat, seed)?;
            let built = build(&refined)?;
            let (refined, built) = enforce_link_bound(&refined, built)?;
            write_bundle(&out, &circuit, &network, &refined, &built)?;
            println!("cost: {before} -> {}", built.ebit_count);
            println!("wrote {}", out.display());
            Ok(())
        }
        Cmd::Cost { dist } => {
            let (_, _, d, _) = read_bundle(&dist)?;
            println!("ebits: {}", total_cost(&d)?);
            println!("hyperedges: {}", d.hypergraph.hyperedges.len());
            Ok(())
        }
        Cmd::Verify { original, distributed, stochastic, seed } => {
            let c = load_circuit(&original)?;
            let (_, _, _, built) = read_bundle(&distributed)?;
            match stochastic {
                None => {
                    let report = verify_equivalence(&c, &built)?;
                    println!(
                        "equivalent: residual {:.1e} over {} columns ({} wires)",
                        report.max_residual, report.columns, report.wires
                    );
                }
                Some(samples) => {
                    let fidelity = verify_stochastic(&c, &built, samples, seed)?;
                    println!("equivalent: worst fidelity {fidelity:.12} over {samples} samples");
                }
            }
            Ok(())
        }
        Cmd::Stats { dist } => {
            let (_, _, _, built) = read_bundle(&dist)?;
            println!("{}", serde_json::to_string_pretty(&built.stats())?);
            Ok(())
        }
        Cmd::GenCircuit { family, qubits, depth, prob, seed, out } => {
            let d = depth.unwrap_or(qubits);
            let c = match family.as_str() {
                "cz-fraction" => crate::bench::gen_cz_fraction(qubits, d, prob, seed)?,
                "quantum-volume" => crate::bench::gen_quantum_volume(qubits, d, seed)?,
                "pauli-gadget" => crate::bench::gen_pauli_gadget(qubits, d, seed)?,
                other => {
                    return Err(Error::InvalidParams(format!(
                        "unknown family {other}; expected cz-fraction, quantum-volume or pauli-gadget"
                    )))
                }
            };
            save_circuit(&out, &c)?;
            println!(
                "{} qubits, {} layers, {} gates ({} CRz)",
                c.qubits,
                d,
                c.gates.len(),
                c.crz_count()
            );
            Ok(())
        }
        Cmd::GenNetwork { kind, modules, qubits, seed, out } => {
            let net = gen_network(kind, modules, qubits, seed)?;
            write_text(&out, &net.to_json())?;
            println!("{} modules, {} edges", net.module_count(), net.edges().count());
            Ok(())
        }
        Cmd::Bench { config, out, json } => {
            let cfg = BenchConfig::from_json(&read_text(&config)?)?;
            let rows = run_experiment(&cfg);
            write_text(&out, &rows_to_csv(&rows))?;
            if let Some(jpath) = json {
                write_text(&jpath, &rows_to_json(&rows)?)?;
            }
            let failed = rows.iter().filter(|r| r.error.is_some()).count();
            println!("{} rows ({failed} failed)", rows.len());
            println!("wrote {}", out.display());
            Ok(())
        }
    }
}
