// SPDX-License-Identifier: Apache-2.0
//! `floodsim`: run flood-routing scenarios from the command line.
//!
//! Exit status is 0 on success, 1 for bad input (arguments, topology,
//! scenario) and 2 when a run finishes with consistency-audit failures.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use floodroute::config::{parse_scenario, Scenario};
use floodroute::engine::{SimTime, Simulation, TrafficModel};
use floodroute::fabric::{builtin, load_topology, LinkId, Topology, BUILTIN_NAMES};
use floodroute::metrics::{summary, write_outputs};
use floodroute::oracle::{brute_force_flood, min_hops, BRUTE_FORCE_MAX_NODES};
use floodroute::wire::render_golden_vectors;

#[derive(Parser)]
#[command(name = "floodsim", version, about = "Flood routing connection-establishment simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct TopologyArg {
    /// Topology file, or a builtin name such as paper_sim, fig6, ring:6
    #[arg(long, short)]
    topology: String,
}

#[derive(Subcommand)]
enum Command {
    /// Run a scenario and write its CSV/JSON outputs
    Run {
        #[command(flatten)]
        topo: TopologyArg,
        /// Scenario file; defaults apply when omitted
        #[arg(long, short)]
        scenario: Option<PathBuf>,
        /// Overrides the scenario's seed
        #[arg(long)]
        seed: Option<u64>,
        /// Output directory
        #[arg(long, short)]
        out: Option<PathBuf>,
        /// Also write trace.jsonl
        #[arg(long)]
        trace: bool,
        /// Take a link down: <link-id>@<seconds>
        #[arg(long = "fail-link", value_parser = parse_link_event)]
        fail_link: Vec<(LinkId, SimTime)>,
        /// Bring a link back up: <link-id>@<seconds>
        #[arg(long = "restore-link", value_parser = parse_link_event)]
        restore_link: Vec<(LinkId, SimTime)>,
    },
    /// Minimum hop count and single-flood replay between two nodes
    Oracle {
        #[command(flatten)]
        topo: TopologyArg,
        #[arg(long)]
        from: String,
        #[arg(long)]
        to: String,
        /// Minimum spare bandwidth a link needs, in kbps
        #[arg(long, default_value_t = 0)]
        bw: u32,
    },
    /// Check a topology (and optionally a scenario) without running
    Validate {
        #[command(flatten)]
        topo: TopologyArg,
        #[arg(long, short)]
        scenario: Option<PathBuf>,
    },
    /// Print the signalling-cell golden vectors
    Vectors,
}

fn parse_link_event(s: &str) -> Result<(LinkId, SimTime), String> {
    let (id, at) = s.split_once('@').ok_or("expected <link-id>@<seconds>")?;
    let id: usize = id.parse().map_err(|_| format!("bad link id {id:?}"))?;
    let at: f64 = at.parse().map_err(|_| format!("bad time {at:?}"))?;
    if !at.is_finite() || at < 0.0 {
        return Err(format!("bad time {at}"));
    }
    Ok((LinkId(id), SimTime::from_secs_f64(at)))
}

fn load_topo(arg: &str) -> Result<Topology, String> {
    let path = Path::new(arg);
    if path.is_file() {
        let text = std::fs::read_to_string(path).map_err(|e| format!("{arg}: {e}"))?;
        load_topology(&text).map_err(|e| format!("{arg}: {e}"))
    } else {
        builtin(arg).map_err(|e| format!("{e} (builtins: {})", BUILTIN_NAMES.join(", ")))
    }
}

fn load_scenario(path: Option<&Path>) -> Result<Scenario, String> {
    match path {
        None => Ok(Scenario::default()),
        Some(p) => {
            let text = std::fs::read_to_string(p).map_err(|e| format!("{}: {e}", p.display()))?;
            parse_scenario(&text).map_err(|e| format!("{}: {e}", p.display()))
        }
    }
}

enum Failure {
    Input(String),
    Audit(usize),
}

impl From<String> for Failure {
    fn from(s: String) -> Self {
        Failure::Input(s)
    }
}

fn node(topo: &Topology, name: &str) -> Result<floodroute::fabric::NodeId, String> {
    topo.node_by_name(name).ok_or_else(|| format!("no node named {name:?}"))
}

fn execute(cmd: Command) -> Result<(), Failure> {
    match cmd {
        Command::Run {
            topo,
            scenario,
            seed,
            out,
            trace,
            fail_link,
            restore_link,
        } => {
            let topology = load_topo(&topo.topology)?;
            let mut sc = load_scenario(scenario.as_deref())?;
            if let Some(s) = seed {
                sc.sim.seed = s;
            }
            sc.sim.trace = trace;
            let mut sim = Simulation::new(topology, TrafficModel::Poisson(sc.traffic), sc.sim)
                .map_err(|e| e.to_string())?;
            for (events, up) in [(fail_link, false), (restore_link, true)] {
                for (link, at) in events {
                    sim.schedule_link_change(at, link, up).map_err(|e| e.to_string())?;
                }
            }
            let report = sim.finish();
            if let Some(dir) = out {
                write_outputs(&report, &dir).map_err(|e| format!("{}: {e}", dir.display()))?;
            }
            let s = summary(&report);
            println!(
                "connections {} established {} degraded {} failed {} floods {} mean_router_creqs {} audit_failures {}",
                s.connections, s.established, s.degraded, s.failed, s.floods, s.mean_router_creqs_per_flood, s.audit_failures
            );
            println!("csv_digest {}", s.csv_digest);
            for f in &report.audit.failures {
                eprintln!("audit {}: {}", f.at, f.message);
            }
            if s.audit_failures > 0 {
                return Err(Failure::Audit(s.audit_failures));
            }
            Ok(())
        }
        Command::Oracle { topo, from, to, bw } => {
            let t = load_topo(&topo.topology)?;
            let (a, b) = (node(&t, &from)?, node(&t, &to)?);
            match min_hops(&t, a, b, bw) {
                Some(h) => println!("min_hops {h}"),
                None => println!("min_hops unreachable"),
            }
            match brute_force_flood(&t, a, b, bw) {
                Ok(f) => {
                    let cdm = f.min_cdm.map_or("unreachable".to_string(), |c| c.to_string());
                    println!("flood min_cdm {cdm}");
                    println!("flood transmissions {} router {}", f.total_transmissions, f.router_transmissions);
                }
                Err(_) => println!("flood skipped (more than {BRUTE_FORCE_MAX_NODES} nodes)"),
            }
            Ok(())
        }
        Command::Validate { topo, scenario } => {
            let t = load_topo(&topo.topology)?;
            load_scenario(scenario.as_deref())?;
            println!(
                "ok: {} routers, {} hosts, {} links, diameter {} hops",
                t.routers().count(),
                t.hosts().count(),
                t.links().len(),
                t.diameter_hops()
            );
            Ok(())
        }
        Command::Vectors => {
            print!("{}", render_golden_vectors());
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match execute(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Input(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
        Err(Failure::Audit(n)) => {
            eprintln!("error: {n} audit failures");
            ExitCode::from(2)
        }
    }
}
