//! `housekit` command line: generation, solving, verification, reductions,
//! protocol simulation, and benchmarking for housing allocation and housing
//! market problems.

mod stats;

use std::fs;
use std::io::Read;
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{anyhow, bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};

use housekit_core::cycles::{
    run_deterministic_cycles, run_las_vegas_cycles, CycleRun, DetectVariant, RunOptions,
};
use housekit_core::dttc::run_distributed_ttc;
use housekit_core::gen::{generate_cycle_graph, generate_instance};
use housekit_core::instance::{AgentId, Instance, InstanceKind};
use housekit_core::io as fmt;
use housekit_core::lfmm::{greedy_lfmm, reduce_allocation_to_lfmm, reduce_lfmm_to_market};
use housekit_core::solve::{
    serial_dictatorship, solve_core_ttc, solve_irpo_market, solve_max_pareto,
};
use housekit_core::verify::brute::find_coalition_brute;
use housekit_core::verify::{verify_core, verify_ir, verify_pareto, VerifyError};
use housekit_oracles::{is_pareto_optimal_brute, EnumerationBudget};

use stats::StatsRecord;

#[derive(Parser)]
#[command(name = "housekit", version, about = "one-sided matching toolkit")]
struct Cli {
    #[command(subcommand)]
    command: Command,

    /// Seed for anything randomized.
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,

    /// Write the primary output here instead of standard output.
    #[arg(long, global = true)]
    out: Option<PathBuf>,

    /// Write run statistics (JSON records) here; `-` for standard output.
    #[arg(long, global = true)]
    stats: Option<PathBuf>,

    /// Write the message delivery trace here.
    #[arg(long, global = true)]
    trace: Option<PathBuf>,

    /// Chatty diagnostics on standard error.
    #[arg(long, global = true)]
    verbose: bool,

    /// Override the simulator round cap.
    #[arg(long, global = true)]
    round_cap: Option<u64>,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a random instance.
    Gen(GenArgs),
    /// Run a sequential solver on an instance file.
    Solve(SolveArgs),
    /// Verify a property of a matching against an instance.
    Verify(VerifyArgs),
    /// Greedy lex-first maximal matching of an ordered graph.
    Lfmm { graph: PathBuf },
    /// Reductions between problem encodings.
    Reduce(ReduceArgs),
    /// Run a distributed protocol on the synchronous simulator.
    Simulate(SimulateArgs),
    /// Repeated simulation runs with statistics summaries.
    Bench(BenchArgs),
}

#[derive(Args)]
struct GenArgs {
    #[arg(long, value_enum)]
    kind: KindArg,
    #[arg(long)]
    agents: usize,
    /// House count; defaults to the agent count.
    #[arg(long)]
    houses: Option<usize>,
    /// Upper bound on allocation preference list lengths.
    #[arg(long, default_value_t = 10)]
    list_len: usize,
}

#[derive(Clone, Copy, ValueEnum)]
enum KindArg {
    Market,
    Allocation,
}

#[derive(Args)]
struct SolveArgs {
    #[arg(long, value_enum)]
    algo: SolveAlgo,
    instance: PathBuf,
    /// Agent order for serial dictatorship, e.g. `2,0,1`; defaults to id order.
    #[arg(long)]
    order: Option<String>,
}

#[derive(Clone, Copy, ValueEnum)]
enum SolveAlgo {
    /// Serial dictatorship.
    Sd,
    /// Top trading cycle (the core of a market).
    Ttc,
    /// Individually rational Pareto optimal matching of a market.
    Irpo,
    /// Maximum-cardinality Pareto optimal matching of an allocation.
    Maxpom,
}

#[derive(Args)]
struct VerifyArgs {
    #[arg(long, value_enum)]
    property: Property,
    instance: PathBuf,
    #[arg(long)]
    matching: PathBuf,
    /// Check by exhaustive search instead of the digraph construction
    /// (small instances only).
    #[arg(long)]
    brute_force: bool,
}

#[derive(Clone, Copy, ValueEnum)]
enum Property {
    Ir,
    Pareto,
    Core,
}

#[derive(Args)]
struct ReduceArgs {
    #[arg(long, value_enum)]
    from: ReduceFrom,
    #[arg(long, value_enum)]
    to: ReduceTo,
    input: PathBuf,
}

#[derive(Clone, Copy, ValueEnum)]
enum ReduceFrom {
    Allocation,
    Lfmm,
}

#[derive(Clone, Copy, ValueEnum)]
enum ReduceTo {
    Lfmm,
    Market,
}

#[derive(Args)]
struct SimulateArgs {
    #[arg(long, value_enum)]
    algo: SimAlgo,
    /// Functional graph file (cycle algorithms).
    #[arg(long)]
    graph: Option<PathBuf>,
    /// Market instance file (distributed top trading cycle).
    #[arg(long)]
    instance: Option<PathBuf>,
    /// Cycle-detection subroutine for the distributed top trading cycle.
    #[arg(long, value_enum, default_value_t = VariantArg::Lv)]
    variant: VariantArg,
}

#[derive(Clone, Copy, ValueEnum)]
enum SimAlgo {
    LvCycles,
    DetCycles,
    Dttc,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum VariantArg {
    Lv,
    Det,
}

impl From<VariantArg> for DetectVariant {
    fn from(v: VariantArg) -> Self {
        match v {
            VariantArg::Lv => DetectVariant::LasVegas,
            VariantArg::Det => DetectVariant::Deterministic,
        }
    }
}

#[derive(Args)]
struct BenchArgs {
    #[arg(long, value_enum)]
    algo: SimAlgo,
    /// Comma-separated problem sizes (cycle length or agent count).
    #[arg(long, value_delimiter = ',')]
    sizes: Vec<usize>,
    #[arg(long, default_value_t = 10)]
    trials: usize,
    #[arg(long, value_enum, default_value_t = VariantArg::Lv)]
    variant: VariantArg,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}

fn read_input(path: &PathBuf) -> Result<String> {
    if path.as_os_str() == "-" {
        let mut buf = String::new();
        std::io::stdin().read_to_string(&mut buf)?;
        Ok(buf)
    } else {
        fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))
    }
}

fn write_output(out: &Option<PathBuf>, text: &str) -> Result<()> {
    match out {
        Some(path) if path.as_os_str() != "-" => {
            fs::write(path, text).with_context(|| format!("writing {}", path.display()))
        }
        _ => {
            print!("{text}");
            Ok(())
        }
    }
}

fn load_instance(path: &PathBuf) -> Result<Instance> {
    fmt::parse_instance(&read_input(path)?).map_err(|e| anyhow!("{}: {e}", path.display()))
}

fn dispatch(cli: Cli) -> Result<ExitCode> {
    let opts = RunOptions {
        round_cap: cli.round_cap,
        record_trace: cli.trace.is_some(),
    };
    match &cli.command {
        Command::Gen(args) => {
            let kind = match args.kind {
                KindArg::Market => InstanceKind::Market,
                KindArg::Allocation => InstanceKind::Allocation,
            };
            if args.agents == 0 {
                bail!("--agents must be positive");
            }
            let houses = args.houses.unwrap_or(args.agents);
            let inst = generate_instance(kind, args.agents, houses, args.list_len, cli.seed)?;
            write_output(&cli.out, &fmt::serialize_instance(&inst))?;
            Ok(ExitCode::SUCCESS)
        }

        Command::Solve(args) => {
            let inst = load_instance(&args.instance)?;
            let matching = match args.algo {
                SolveAlgo::Sd => {
                    let order = match &args.order {
                        Some(text) => parse_order(text, inst.n_agents())?,
                        None => inst.agents().collect(),
                    };
                    serial_dictatorship(&inst, &order)?
                }
                SolveAlgo::Ttc => {
                    let out = solve_core_ttc(&inst)?;
                    if cli.verbose {
                        for (s, cycles) in out.stages.iter().enumerate() {
                            eprintln!("stage {s}: {}", format_cycles(cycles));
                        }
                    }
                    out.matching
                }
                SolveAlgo::Irpo => solve_irpo_market(&inst)?,
                SolveAlgo::Maxpom => solve_max_pareto(&inst)?,
            };
            write_output(&cli.out, &fmt::serialize_matching(&matching))?;
            Ok(ExitCode::SUCCESS)
        }

        Command::Verify(args) => {
            let inst = load_instance(&args.instance)?;
            let matching = fmt::parse_matching(&read_input(&args.matching)?, inst.n_agents())
                .map_err(|e| anyhow!("{}: {e}", args.matching.display()))?;
            matching.validate(&inst).map_err(|e| anyhow!("{e}"))?;
            let holds = match (args.property, args.brute_force) {
                (Property::Ir, _) => verify_ir(&inst, &matching).map_err(input_error)?,
                (Property::Pareto, false) => {
                    let (ok, witness) = verify_pareto(&inst, &matching).map_err(input_error)?;
                    if let Some(w) = witness {
                        println!("not pareto optimal: {w:?}");
                    }
                    ok
                }
                (Property::Pareto, true) => {
                    let ok =
                        is_pareto_optimal_brute(&inst, &matching, &EnumerationBudget::default())?;
                    if !ok {
                        println!("not pareto optimal (exhaustive search found a dominator)");
                    }
                    ok
                }
                (Property::Core, false) => {
                    let (ok, cert) = verify_core(&inst, &matching).map_err(input_error)?;
                    if let Some(c) = cert {
                        println!(
                            "coalition: {}",
                            c.cycle
                                .iter()
                                .map(|a| a.to_string())
                                .collect::<Vec<_>>()
                                .join(" ")
                        );
                    }
                    ok
                }
                (Property::Core, true) => {
                    let coalition =
                        find_coalition_brute(&inst, &matching).map_err(input_error)?;
                    match coalition {
                        Some(c) => {
                            println!(
                                "coalition: {}",
                                c.agents
                                    .iter()
                                    .map(|a| a.to_string())
                                    .collect::<Vec<_>>()
                                    .join(" ")
                            );
                            false
                        }
                        None => true,
                    }
                }
            };
            if holds {
                println!("ok");
                Ok(ExitCode::SUCCESS)
            } else {
                Ok(ExitCode::from(1))
            }
        }

        Command::Lfmm { graph } => {
            let g = fmt::parse_ordered_graph(&read_input(graph)?)?;
            let run = greedy_lfmm(&g);
            let mut text = String::new();
            for &pos in &run.matching.chosen {
                let (u, v) = g.endpoints(pos);
                text.push_str(&format!("edge {u} {v}\n"));
            }
            if cli.verbose {
                for (s, added) in run.stages.iter().enumerate() {
                    eprintln!(
                        "stage {s}: positions {}",
                        added
                            .iter()
                            .map(|p| p.to_string())
                            .collect::<Vec<_>>()
                            .join(" ")
                    );
                }
            }
            write_output(&cli.out, &text)?;
            Ok(ExitCode::SUCCESS)
        }

        Command::Reduce(args) => match (args.from, args.to) {
            (ReduceFrom::Allocation, ReduceTo::Lfmm) => {
                let inst = load_instance(&args.input)?;
                if inst.kind() != InstanceKind::Allocation {
                    bail!("reduce --from allocation expects an allocation instance");
                }
                let red = reduce_allocation_to_lfmm(&inst);
                if cli.verbose {
                    for (pos, (a, h)) in red.pairs.iter().enumerate() {
                        eprintln!("position {pos}: agent {} house {}", a.0, h.0);
                    }
                }
                write_output(&cli.out, &fmt::serialize_ordered_graph(&red.graph))?;
                Ok(ExitCode::SUCCESS)
            }
            (ReduceFrom::Lfmm, ReduceTo::Market) => {
                let g = fmt::parse_ordered_graph(&read_input(&args.input)?)?;
                let inst = reduce_lfmm_to_market(&g);
                write_output(&cli.out, &fmt::serialize_instance(&inst))?;
                Ok(ExitCode::SUCCESS)
            }
            _ => bail!("unsupported reduction; use --from allocation --to lfmm or --from lfmm --to market"),
        },

        Command::Simulate(args) => {
            let (record, output) = simulate(&cli, args, &opts)?;
            write_output(&cli.out, &output)?;
            emit_stats(&cli.stats, std::slice::from_ref(&record))?;
            Ok(ExitCode::SUCCESS)
        }

        Command::Bench(args) => {
            if args.sizes.is_empty() {
                bail!("--sizes must name at least one size");
            }
            if args.trials == 0 {
                bail!("--trials must be at least 1");
            }
            let records = bench(&cli, args, &opts)?;
            emit_stats(&cli.stats, &records)?;
            for &size in &args.sizes {
                let rounds: Vec<u64> = records
                    .iter()
                    .filter(|r| r.n == size)
                    .map(|r| r.rounds)
                    .collect();
                let messages: Vec<u64> = records
                    .iter()
                    .filter(|r| r.n == size)
                    .map(|r| r.messages)
                    .collect();
                eprintln!(
                    "n={size}: median rounds {}, median messages {}",
                    median(&rounds),
                    median(&messages)
                );
            }
            Ok(ExitCode::SUCCESS)
        }
    }
}

fn input_error(e: VerifyError) -> anyhow::Error {
    anyhow!("{e}")
}

fn parse_order(text: &str, n: usize) -> Result<Vec<AgentId>> {
    let order: Vec<AgentId> = text
        .split(',')
        .map(|tok| {
            tok.trim()
                .parse::<u32>()
                .map(AgentId)
                .map_err(|_| anyhow!("bad agent id `{tok}` in --order"))
        })
        .collect::<Result<_>>()?;
    if order.len() != n {
        bail!("--order must list all {n} agents");
    }
    Ok(order)
}

fn format_cycles(cycles: &[Vec<AgentId>]) -> String {
    cycles
        .iter()
        .map(|c| {
            format!(
                "({})",
                c.iter()
                    .map(|a| a.0.to_string())
                    .collect::<Vec<_>>()
                    .join(" ")
            )
        })
        .collect::<Vec<_>>()
        .join(" ")
}

fn write_trace(path: &Option<PathBuf>, trace: Option<&[String]>) -> Result<()> {
    if let (Some(path), Some(lines)) = (path, trace) {
        fs::write(path, lines.join("\n") + "\n")
            .with_context(|| format!("writing {}", path.display()))?;
    }
    Ok(())
}

fn cycle_run_output(run: &CycleRun) -> String {
    let mut text = String::new();
    for cycle in &run.report.cycles {
        let nodes: Vec<String> = cycle.iter().map(|n| n.0.to_string()).collect();
        text.push_str(&format!("cycle {}\n", nodes.join(" ")));
    }
    text
}

fn simulate(cli: &Cli, args: &SimulateArgs, opts: &RunOptions) -> Result<(StatsRecord, String)> {
    let started = std::time::Instant::now();
    match args.algo {
        SimAlgo::LvCycles | SimAlgo::DetCycles => {
            let path = args
                .graph
                .as_ref()
                .ok_or_else(|| anyhow!("--graph is required for cycle algorithms"))?;
            let g = fmt::parse_functional_graph(&read_input(path)?)?;
            let run = match args.algo {
                SimAlgo::LvCycles => run_las_vegas_cycles(&g, cli.seed, opts)?,
                _ => run_deterministic_cycles(&g, opts)?,
            };
            write_trace(&cli.trace, run.trace.as_deref())?;
            let name = match args.algo {
                SimAlgo::LvCycles => "lv-cycles",
                _ => "det-cycles",
            };
            let record = StatsRecord::new(
                name,
                g.len(),
                cli.seed,
                &run.stats,
                run.trace_digest,
                started.elapsed(),
            );
            Ok((record, cycle_run_output(&run)))
        }
        SimAlgo::Dttc => {
            let path = args
                .instance
                .as_ref()
                .ok_or_else(|| anyhow!("--instance is required for dttc"))?;
            let inst = load_instance(path)?;
            let run = run_distributed_ttc(&inst, args.variant.into(), cli.seed, opts)?;
            write_trace(&cli.trace, run.trace.as_deref())?;
            let record = StatsRecord::new(
                "dttc",
                inst.n_agents(),
                cli.seed,
                &run.stats,
                run.trace_digest,
                started.elapsed(),
            );
            Ok((record, fmt::serialize_matching(&run.matching)))
        }
    }
}

fn bench(cli: &Cli, args: &BenchArgs, opts: &RunOptions) -> Result<Vec<StatsRecord>> {
    let mut records = Vec::new();
    for &size in &args.sizes {
        for trial in 0..args.trials {
            let seed = cli
                .seed
                .wrapping_add((trial as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15))
                .wrapping_add(size as u64);
            let started = std::time::Instant::now();
            let record = match args.algo {
                SimAlgo::LvCycles | SimAlgo::DetCycles => {
                    // Single-cycle graphs isolate the dependence on cycle length.
                    let g = generate_cycle_graph(size, seed ^ 0x477);
                    let run = match args.algo {
                        SimAlgo::LvCycles => run_las_vegas_cycles(&g, seed, opts)?,
                        _ => run_deterministic_cycles(&g, opts)?,
                    };
                    let name = match args.algo {
                        SimAlgo::LvCycles => "lv-cycles",
                        _ => "det-cycles",
                    };
                    StatsRecord::new(
                        name,
                        size,
                        seed,
                        &run.stats,
                        run.trace_digest,
                        started.elapsed(),
                    )
                }
                SimAlgo::Dttc => {
                    let inst =
                        generate_instance(InstanceKind::Market, size, size, size, seed ^ 0x915)?;
                    let run = run_distributed_ttc(&inst, args.variant.into(), seed, opts)?;
                    StatsRecord::new(
                        "dttc",
                        size,
                        seed,
                        &run.stats,
                        run.trace_digest,
                        started.elapsed(),
                    )
                }
            };
            records.push(record);
        }
    }
    Ok(records)
}

fn emit_stats(path: &Option<PathBuf>, records: &[StatsRecord]) -> Result<()> {
    let Some(path) = path else { return Ok(()) };
    let mut text = String::new();
    for r in records {
        text.push_str(&serde_json::to_string(r)?);
        text.push('\n');
    }
    if path.as_os_str() == "-" {
        print!("{text}");
    } else {
        fs::write(path, text).with_context(|| format!("writing {}", path.display()))?;
    }
    Ok(())
}

fn median(xs: &[u64]) -> u64 {
    if xs.is_empty() {
        return 0;
    }
    let mut v = xs.to_vec();
    v.sort_unstable();
    v[v.len() / 2]
}
