//! Command-line front end: topology and tree generation, rule compilation,
//! failure injection, the failure/latency/throughput analyses, cost
//! comparisons, and the flow-level simulator. Artifacts go to stdout (or
//! `--out`, written atomically); diagnostics go to stderr.

use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use shufflecast::control::{recovery_cast, GroupMembership, NetworkState, ReachScratch};
use shufflecast::cost::{
    build_minimal_layer_core, capital_cost, count_ports, insertion_loss_db, power_per_tree,
    write_cost_csv, ArchSpec, ComponentCatalog, CostRow,
};
use shufflecast::fault::{
    failure_impact_distribution, post_recovery_hop_cdf, throughput_degradation,
    write_degradation_csv, DegradationReport,
};
use shufflecast::flowsim::{run_flow_simulation, CapacityModel, FlowSpec, Scheduling};
use shufflecast::routing::{multicast_tree, route, write_route_csv};
use shufflecast::topology::{Params, Topology};
use shufflecast::Result;

#[derive(Parser)]
#[command(
    name = "shufflecast",
    version,
    about = "Generate, analyze and simulate p,k-Shufflecast optical multicast fabrics"
)]
struct Cli {
    /// Worker threads for the analyses (default: all cores).
    #[arg(long, global = true)]
    jobs: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct FabricArgs {
    /// Splitter fanout p (>= 2).
    #[arg(long)]
    p: usize,

    /// Logical column count k (>= 2).
    #[arg(long)]
    k: usize,
}

impl FabricArgs {
    fn topology(&self) -> Result<Topology> {
        Ok(Topology::new(Params::new(self.p, self.k)?))
    }
}

#[derive(Args)]
struct OutArgs {
    /// Write the artifact to this file (atomically) instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Emit the fabric as JSON: ids, row digits and splitter adjacency.
    Topo {
        #[command(flatten)]
        fabric: FabricArgs,
        #[command(flatten)]
        out: OutArgs,
    },
    /// Relay route between two ToRs as CSV rows src,dst,hop_index,tor.
    Route {
        #[command(flatten)]
        fabric: FabricArgs,
        #[arg(long)]
        src: usize,
        #[arg(long)]
        dst: usize,
        #[command(flatten)]
        out: OutArgs,
    },
    /// One-to-all multicast tree of a source as JSON.
    Tree {
        #[command(flatten)]
        fabric: FabricArgs,
        #[arg(long)]
        src: usize,
        #[command(flatten)]
        out: OutArgs,
    },
    /// Static relaying rule tables as CSV rows owner,source,active.
    Rules {
        #[command(flatten)]
        fabric: FabricArgs,
        #[command(flatten)]
        out: OutArgs,
    },
    /// Inject a single relay failure; report the rule delta and the
    /// resulting reachability as JSON.
    Fail {
        #[command(flatten)]
        fabric: FabricArgs,
        /// Linear id of the failed relay ToR.
        #[arg(long)]
        relay: usize,
        /// Leave the failure unrecovered to study its raw impact.
        #[arg(long)]
        no_recovery: bool,
        #[command(flatten)]
        out: OutArgs,
    },
    /// Failure-impact, latency and throughput analyses (CSV).
    #[command(subcommand)]
    Analyze(AnalyzeCommand),
    /// Port, power and capital-cost comparisons.
    #[command(subcommand)]
    Cost(CostCommand),
    /// Run the flow-level fair-share simulator over a JSON schedule.
    Sim {
        #[command(flatten)]
        fabric: FabricArgs,
        /// JSON array of flow specs.
        #[arg(long)]
        schedule: PathBuf,
        /// Optional JSON array of group memberships to apply first.
        #[arg(long)]
        groups: Option<PathBuf>,
        /// Fail this relay and recover before simulating.
        #[arg(long)]
        fail_relay: Option<usize>,
        #[arg(long, default_value_t = 10.0)]
        line_rate_gbps: f64,
        /// Serialize overlapping flows by arrival instead of sharing.
        #[arg(long)]
        fcfs: bool,
        /// Where to write the per-flow completion summary CSV.
        #[arg(long)]
        summary_out: Option<PathBuf>,
        #[command(flatten)]
        out: OutArgs,
    },
}

#[derive(Subcommand)]
enum AnalyzeCommand {
    /// Impact histogram of an unrecovered relay failure: CSV loss,count.
    Reachability {
        #[command(flatten)]
        fabric: FabricArgs,
        #[arg(long, default_value_t = 0)]
        relay: usize,
        #[command(flatten)]
        out: OutArgs,
    },
    /// Post-recovery max-hop CDF: CSV max_hop,fraction.
    Hops {
        #[command(flatten)]
        fabric: FabricArgs,
        #[arg(long, default_value_t = 0)]
        relay: usize,
        #[command(flatten)]
        out: OutArgs,
    },
    /// Sampled throughput degradation after recovery:
    /// CSV fraction_active,mean_degradation.
    Degradation {
        #[command(flatten)]
        fabric: FabricArgs,
        /// Fractions of active sources to evaluate.
        #[arg(long, value_delimiter = ',', default_values_t = vec![0.25, 0.5, 0.75, 1.0])]
        fractions: Vec<f64>,
        #[arg(long, default_value_t = 1000)]
        samples: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[command(flatten)]
        out: OutArgs,
    },
}

#[derive(Subcommand)]
enum CostCommand {
    /// Active ports and watts per one-to-all tree for all three
    /// architectures: CSV architecture,N,rate,ports,watts,usd.
    Power {
        #[command(flatten)]
        fabric: FabricArgs,
        /// Switch radix of the packet-switched multicast core.
        #[arg(long)]
        radix: usize,
        /// Component catalog JSON.
        #[arg(long)]
        catalog: PathBuf,
        #[arg(long, default_value = "10G")]
        rate: String,
        #[command(flatten)]
        out: OutArgs,
    },
    /// Capital cost per tree vs IP-multicast, plus the improvement ratio.
    Capital {
        #[command(flatten)]
        fabric: FabricArgs,
        #[arg(long)]
        radix: usize,
        #[arg(long)]
        catalog: PathBuf,
        #[arg(long, default_value = "10G")]
        rate: String,
        /// Fiber run length in meters.
        #[arg(long, default_value_t = 100.0)]
        fiber_m: f64,
        #[command(flatten)]
        out: OutArgs,
    },
    /// Minimal-layer packet-switched core for N ToRs (JSON).
    Core {
        #[arg(long)]
        n: usize,
        #[arg(long)]
        radix: usize,
        #[command(flatten)]
        out: OutArgs,
    },
    /// Splitter insertion loss in dB for a fanout.
    Loss {
        #[arg(long)]
        fanout: usize,
        #[command(flatten)]
        out: OutArgs,
    },
}

#[derive(Serialize)]
struct FailReport {
    p: usize,
    k: usize,
    failed: usize,
    recovered: bool,
    cast: Option<shufflecast::control::RecoveryCast>,
    delta: Option<shufflecast::control::RuleDelta>,
    reachability: ReachReport,
}

#[derive(Serialize)]
struct ReachReport {
    total_tors: usize,
    sources: usize,
    fully_reachable_sources: usize,
    min_reachable: usize,
    max_hop: usize,
}

fn emit(out: &OutArgs, bytes: &[u8]) -> Result<()> {
    match &out.out {
        None => {
            std::io::stdout().write_all(bytes)?;
            Ok(())
        }
        Some(path) => write_atomic(path, bytes),
    }
}

fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let tmp = path.with_file_name(format!(
        "{}.tmp{}",
        path.file_name().and_then(|f| f.to_str()).unwrap_or("out"),
        std::process::id()
    ));
    std::fs::write(&tmp, bytes)?;
    std::fs::rename(&tmp, path)?;
    Ok(())
}

fn json_bytes<T: Serialize>(value: &T) -> Result<Vec<u8>> {
    let mut bytes = serde_json::to_vec_pretty(value)?;
    bytes.push(b'\n');
    Ok(bytes)
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Topo { fabric, out } => {
            let topo = fabric.topology()?;
            emit(&out, &json_bytes(&topo.export())?)
        }
        Command::Route {
            fabric,
            src,
            dst,
            out,
        } => {
            let topo = fabric.topology()?;
            let r = route(&topo, src, dst)?;
            let mut buf = Vec::new();
            write_route_csv(&mut buf, &r)?;
            emit(&out, &buf)
        }
        Command::Tree { fabric, src, out } => {
            let topo = fabric.topology()?;
            let tree = multicast_tree(&topo, src)?;
            emit(&out, &json_bytes(&tree.export())?)
        }
        Command::Rules { fabric, out } => {
            let topo = fabric.topology()?;
            let state = NetworkState::new(topo)?;
            let mut buf = Vec::new();
            state.rule_tables().write_csv(&mut buf)?;
            emit(&out, &buf)
        }
        Command::Fail {
            fabric,
            relay,
            no_recovery,
            out,
        } => {
            let topo = fabric.topology()?;
            let mut state = NetworkState::new(topo)?;
            let (cast, delta) = if no_recovery {
                state.fail_without_recovery(relay)?;
                (None, None)
            } else {
                let delta = state.recover_single_failure(relay)?;
                (Some(recovery_cast(state.topology(), relay)?), Some(delta))
            };

            let n = state.topology().n();
            let mut scratch = ReachScratch::default();
            let mut fully = 0usize;
            let mut min_reachable = usize::MAX;
            let mut max_hop = 0usize;
            let mut sources = 0usize;
            for src in 0..n {
                if src == relay {
                    continue;
                }
                sources += 1;
                let stats = state.reachable_stats(src, &mut scratch)?;
                if stats.reached == n {
                    fully += 1;
                }
                min_reachable = min_reachable.min(stats.reached);
                max_hop = max_hop.max(stats.max_hop);
            }
            let report = FailReport {
                p: state.topology().p(),
                k: state.topology().k(),
                failed: relay,
                recovered: !no_recovery,
                cast,
                delta,
                reachability: ReachReport {
                    total_tors: n,
                    sources,
                    fully_reachable_sources: fully,
                    min_reachable,
                    max_hop,
                },
            };
            emit(&out, &json_bytes(&report)?)
        }
        Command::Analyze(cmd) => run_analyze(cmd),
        Command::Cost(cmd) => run_cost(cmd),
        Command::Sim {
            fabric,
            schedule,
            groups,
            fail_relay,
            line_rate_gbps,
            fcfs,
            summary_out,
            out,
        } => {
            let topo = fabric.topology()?;
            let mut state = NetworkState::new(topo)?;
            if let Some(path) = groups {
                let memberships: Vec<GroupMembership> =
                    serde_json::from_str(&std::fs::read_to_string(path)?)?;
                for m in memberships {
                    state.apply_group_membership(m)?;
                }
            }
            if let Some(relay) = fail_relay {
                state.recover_single_failure(relay)?;
            }
            let schedule: Vec<FlowSpec> =
                serde_json::from_str(&std::fs::read_to_string(schedule)?)?;
            let cap = CapacityModel::new(line_rate_gbps * 1e9)?;
            let mode = if fcfs {
                Scheduling::Fcfs
            } else {
                Scheduling::MaxMin
            };
            let trace = run_flow_simulation(&schedule, &cap, &state, mode)?;

            let mut buf = Vec::new();
            trace.write_trace_csv(&mut buf)?;
            emit(&out, &buf)?;
            if let Some(path) = summary_out {
                let mut buf = Vec::new();
                trace.write_summary_csv(&mut buf)?;
                write_atomic(&path, &buf)?;
            }
            Ok(())
        }
    }
}

fn run_analyze(cmd: AnalyzeCommand) -> Result<()> {
    match cmd {
        AnalyzeCommand::Reachability { fabric, relay, out } => {
            let topo = fabric.topology()?;
            let hist = failure_impact_distribution(&topo, relay)?;
            let mut buf = Vec::new();
            hist.write_csv(&mut buf)?;
            emit(&out, &buf)
        }
        AnalyzeCommand::Hops { fabric, relay, out } => {
            let topo = fabric.topology()?;
            let cdf = post_recovery_hop_cdf(&topo, relay)?;
            eprintln!(
                "max hop unchanged for {:.1}% of sources",
                cdf.unchanged_fraction * 100.0
            );
            let mut buf = Vec::new();
            cdf.write_csv(&mut buf)?;
            emit(&out, &buf)
        }
        AnalyzeCommand::Degradation {
            fabric,
            fractions,
            samples,
            seed,
            out,
        } => {
            let topo = fabric.topology()?;
            let reports: Vec<DegradationReport> = fractions
                .iter()
                .map(|&f| throughput_degradation(&topo, f, samples, seed))
                .collect::<Result<_>>()?;
            let mut buf = Vec::new();
            write_degradation_csv(&mut buf, &reports)?;
            emit(&out, &buf)
        }
    }
}

fn run_cost(cmd: CostCommand) -> Result<()> {
    match cmd {
        CostCommand::Power {
            fabric,
            radix,
            catalog,
            rate,
            out,
        } => {
            let params = Params::new(fabric.p, fabric.k)?;
            let catalog = ComponentCatalog::from_json(&std::fs::read_to_string(catalog)?)?;
            let specs = [
                ArchSpec::Shufflecast(params),
                ArchSpec::P2pChain { n: params.n() },
                ArchSpec::IpMulticast {
                    n: params.n(),
                    radix,
                },
            ];
            let mut rows = Vec::new();
            for spec in &specs {
                let ports = count_ports(spec)?;
                rows.push(CostRow {
                    architecture: ports.architecture.as_str().to_string(),
                    n: params.n(),
                    rate: rate.clone(),
                    ports: ports.switch_ports,
                    watts: Some(power_per_tree(&catalog, &rate, &ports)?),
                    usd: None,
                });
            }
            let mut buf = Vec::new();
            write_cost_csv(&mut buf, &rows)?;
            emit(&out, &buf)
        }
        CostCommand::Capital {
            fabric,
            radix,
            catalog,
            rate,
            fiber_m,
            out,
        } => {
            let params = Params::new(fabric.p, fabric.k)?;
            let catalog = ComponentCatalog::from_json(&std::fs::read_to_string(catalog)?)?;
            let cc = capital_cost(&catalog, &rate, &params, radix, fiber_m)?;
            eprintln!(
                "improvement {:.3}x, per-ToR deployment {:.2} USD",
                cc.improvement, cc.shufflecast_per_tor_usd
            );
            let rows = vec![
                CostRow {
                    architecture: "shufflecast".into(),
                    n: params.n(),
                    rate: rate.clone(),
                    ports: cc.shufflecast_ports,
                    watts: None,
                    usd: Some(cc.shufflecast_tree_usd),
                },
                CostRow {
                    architecture: "ip_multicast".into(),
                    n: params.n(),
                    rate: rate.clone(),
                    ports: cc.ip_multicast_ports,
                    watts: None,
                    usd: Some(cc.ip_multicast_tree_usd),
                },
                CostRow {
                    architecture: "improvement".into(),
                    n: params.n(),
                    rate,
                    ports: 0,
                    watts: None,
                    usd: Some(cc.improvement),
                },
            ];
            let mut buf = Vec::new();
            write_cost_csv(&mut buf, &rows)?;
            emit(&out, &buf)
        }
        CostCommand::Core { n, radix, out } => {
            let core = build_minimal_layer_core(n, radix)?;
            emit(&out, &json_bytes(&core)?)
        }
        CostCommand::Loss { fanout, out } => {
            let db = insertion_loss_db(fanout)?;
            emit(&out, format!("{db}\n").as_bytes())
        }
    }
}

fn main() {
    let cli = Cli::parse();
    if let Some(jobs) = cli.jobs {
        if let Err(e) = rayon::ThreadPoolBuilder::new()
            .num_threads(jobs)
            .build_global()
        {
            eprintln!("error: could not configure {jobs} worker threads: {e}");
            std::process::exit(2);
        }
    }
    match std::panic::catch_unwind(std::panic::AssertUnwindSafe(|| run(cli))) {
        Ok(Ok(())) => {}
        Ok(Err(e)) => {
            eprintln!("error: {e}");
            std::process::exit(2);
        }
        Err(_) => {
            // The panic hook has already printed the assertion message.
            std::process::exit(1);
        }
    }
}
