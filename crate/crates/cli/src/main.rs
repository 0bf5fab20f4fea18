use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use scot_core::graph::connectivity_bounds;
use scot_core::scenario::{self, compare_runs, prepare, run_batch, run_scenario, ScenarioConfig};
use scot_core::scot::{self, BrokerClass, ScotTopology};
use scot_core::sim::{trace_to_jsonl, RoutingMode};

#[derive(Parser)]
#[command(
    name = "scot",
    version,
    about = "Run pub/sub routing scenarios on structured cyclic overlays"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one scenario and write its CSV metrics.
    Run(RunArgs),
    /// Run one scenario under two routing modes and compare them.
    Compare(CompareArgs),
    /// Describe an overlay built from a preset or two factor files.
    TopologyInfo(TopologyArgs),
    /// Check a scenario file without running it.
    Validate {
        #[arg(short, long)]
        config: PathBuf,
    },
}

#[derive(Args)]
struct RunArgs {
    #[arg(short, long)]
    config: PathBuf,
    /// Overrides the seed in the scenario file.
    #[arg(long)]
    seed: Option<u64>,
    /// Overrides the routing mode (snr, idr, tid-static).
    #[arg(long)]
    routing: Option<RoutingMode>,
    #[arg(short, long, default_value = "out")]
    out: PathBuf,
    /// Also write trace.jsonl with one record per event.
    #[arg(long)]
    trace: bool,
}

#[derive(Args)]
struct CompareArgs {
    #[arg(short, long)]
    config: PathBuf,
    #[arg(long, default_value = "snr")]
    a: RoutingMode,
    #[arg(long, default_value = "idr")]
    b: RoutingMode,
    #[arg(long)]
    seed: Option<u64>,
    /// Comparison CSV path; each run's metrics go in sibling directories.
    #[arg(short, long, default_value = "out/compare.csv")]
    out: PathBuf,
}

#[derive(Args)]
struct TopologyArgs {
    #[arg(long, conflicts_with_all = ["af", "cf"], required_unless_present_all = ["af", "cf"])]
    preset: Option<String>,
    /// Edge list of the tree factor.
    #[arg(long, requires = "cf")]
    af: Option<PathBuf>,
    /// Edge list of the complete factor, vertices labelled 0..n-1.
    #[arg(long, requires = "af")]
    cf: Option<PathBuf>,
}

fn load(path: &Path, seed: Option<u64>) -> Result<ScenarioConfig> {
    let mut cfg =
        ScenarioConfig::load(path).with_context(|| format!("loading {}", path.display()))?;
    if let Some(s) = seed {
        cfg.seed = s;
    }
    Ok(cfg)
}

fn cmd_run(args: RunArgs) -> Result<()> {
    let mut cfg = load(&args.config, args.seed)?;
    if let Some(r) = args.routing {
        cfg.routing = r;
    }
    let run = run_scenario(&cfg, args.trace)?;
    let report = run.report();
    report
        .write_csv(&run.topology, &args.out)
        .with_context(|| format!("writing {}", args.out.display()))?;
    if args.trace {
        fs::write(
            args.out.join("trace.jsonl"),
            trace_to_jsonl(&run.output.trace),
        )?;
    }
    for (k, v) in report.summary_rows() {
        println!("{k:<28} {v}");
    }
    if let Some(b) = &run.burst {
        println!("{:<28} {}", "burst_host", run.topology.label(b.host));
        println!(
            "{:<28} {}",
            "burst_host_max_queue",
            report.max_queue_at(b.host)
        );
    }
    println!("wrote {}", args.out.display());
    Ok(())
}

fn cmd_compare(args: CompareArgs) -> Result<()> {
    if args.a == args.b {
        bail!("--a and --b name the same routing mode");
    }
    let base = load(&args.config, args.seed)?;
    let cfgs: Vec<ScenarioConfig> = [args.a, args.b]
        .into_iter()
        .map(|r| ScenarioConfig {
            routing: r,
            ..base.clone()
        })
        .collect();
    let mut runs = run_batch(&cfgs).into_iter();
    let (ra, rb) = (
        runs.next().expect("two runs")?,
        runs.next().expect("two runs")?,
    );
    let focus = ra.burst.as_ref().map(|b| b.host);
    let rows = compare_runs(ra.report(), rb.report(), focus)?;

    let dir = args
        .out
        .parent()
        .filter(|p| !p.as_os_str().is_empty())
        .unwrap_or(Path::new("."));
    for run in [&ra, &rb] {
        let sub = dir.join(&run.report().routing);
        run.report().write_csv(&run.topology, &sub)?;
    }
    scenario::write_comparison(&rows, &args.out)
        .with_context(|| format!("writing {}", args.out.display()))?;
    println!(
        "{:<28} {:>14} {:>14}",
        "metric",
        args.a.name(),
        args.b.name()
    );
    for r in &rows {
        println!("{:<28} {:>14} {:>14}", r.metric, r.a, r.b);
    }
    println!("wrote {}", args.out.display());
    Ok(())
}

fn describe(t: &ScotTopology) -> Result<()> {
    let inner = t
        .brokers()
        .filter(|&b| matches!(t.neighbours(b).map(|n| n.class), Ok(BrokerClass::Inner)))
        .count();
    let bounds = connectivity_bounds(t.g_af(), t.g_cf())?;
    let rows = [
        ("brokers", t.broker_count().to_string()),
        ("links", t.graph().size().to_string()),
        ("clusters", t.cluster_count().to_string()),
        ("regions", t.region_count().to_string()),
        ("alinks", t.alinks().len().to_string()),
        ("ilinks", t.ilinks().len().to_string()),
        ("inner_brokers", inner.to_string()),
        ("edge_brokers", (t.broker_count() - inner).to_string()),
        ("tree_diameter", t.diam_af().to_string()),
        ("overlay_diameter", t.graph().diameter()?.to_string()),
        ("min_degree", t.graph().min_degree().to_string()),
        ("vertex_connectivity", bounds.kappa.to_string()),
        ("edge_connectivity", bounds.lambda.to_string()),
    ];
    for (k, v) in rows {
        println!("{k:<20} {v}");
    }
    Ok(())
}

fn cmd_topology(args: TopologyArgs) -> Result<()> {
    let topo = match (args.preset, args.af, args.cf) {
        (Some(p), _, _) => scot::preset(&p)?,
        (None, Some(af), Some(cf)) => {
            let read = |p: &PathBuf| {
                fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))
            };
            scot::scot_from_text(&read(&af)?, &read(&cf)?)?
        }
        _ => bail!("give --preset or both --af and --cf"),
    };
    describe(&topo)
}

fn cmd_validate(path: &Path) -> Result<()> {
    let cfg = load(path, None)?;
    let p = prepare(&cfg)?;
    println!(
        "ok: {} brokers, {} clients, {} actions, routing {}, workload {}",
        p.topology.broker_count(),
        p.workload.clients.len(),
        p.workload.actions.len(),
        cfg.routing.name(),
        &p.workload.fingerprint()[..12]
    );
    Ok(())
}

fn main() -> Result<()> {
    match Cli::parse().command {
        Command::Run(a) => cmd_run(a),
        Command::Compare(a) => cmd_compare(a),
        Command::TopologyInfo(a) => cmd_topology(a),
        Command::Validate { config } => cmd_validate(&config),
    }
}
