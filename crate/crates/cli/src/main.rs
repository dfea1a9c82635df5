use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand};

use byzgather::exploration::{benchmark_families, cache_path, ExplorationSequence};
use byzgather::harness::{
    load_scenario, run_scenario, run_suite, MatrixSpec, Outcome, SequenceStore, CSV_HEADER,
};
use byzgather::ScenarioConfig;

#[derive(Parser)]
#[command(
    name = "byzgather",
    version,
    about = "Simulate and check Byzantine-tolerant gathering"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,

    /// Directory for traces, reports and sequence caches.
    #[arg(long, global = true)]
    out: Option<PathBuf>,

    /// Round cap overriding the scenario default.
    #[arg(long, global = true)]
    cap: Option<u64>,

    /// Print CSV rows instead of the human-readable report.
    #[arg(long, global = true)]
    csv: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Run one scenario file and check the outcome.
    Run { scenario: PathBuf },
    /// Run every scenario of a matrix file.
    Suite { matrix: PathBuf },
    /// Build an exploration sequence and certify it on the benchmark graphs.
    Certify {
        #[arg(long)]
        n: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Re-run the scenario embedded in a trace file and compare.
    Replay { trace: PathBuf },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Run { scenario } => cmd_run(&cli, scenario),
        Command::Suite { matrix } => cmd_suite(&cli, matrix),
        Command::Certify { n, seed } => cmd_certify(&cli, *n, *seed),
        Command::Replay { trace } => cmd_replay(&cli, trace),
    };
    match result {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}

fn store(cli: &Cli) -> SequenceStore {
    match &cli.out {
        Some(dir) => SequenceStore::with_dir(dir.join("sequences")),
        None => SequenceStore::new(),
    }
}

fn cmd_run(cli: &Cli, path: &Path) -> Result<bool> {
    let mut config = load_scenario(path)?;
    if config.name.is_empty() {
        config.name = path
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_default();
    }
    if let Some(cap) = cli.cap {
        config.round_cap = Some(cap);
    }
    let (outcome, trace) = run_scenario(&config, &store(cli))?;
    if cli.csv {
        println!("{CSV_HEADER}\n{}", outcome.csv_row());
    } else {
        print!("{}", report(&outcome));
    }
    if let Some(dir) = &cli.out {
        fs::create_dir_all(dir)?;
        let file = dir.join(format!("{}.trace", config.name));
        fs::write(&file, trace.export(&config.to_toml_string()))
            .with_context(|| format!("writing {}", file.display()))?;
        eprintln!("trace written to {}", file.display());
    }
    Ok(outcome.verdict.passed())
}

fn report(o: &Outcome) -> String {
    let v = &o.verdict;
    let yes = |b: bool| if b { "yes" } else { "no" };
    let mut s = format!(
        "scenario {} ({} variant, n={} N={} k={} f={}, {} / {})\n",
        o.config.name,
        o.config.variant,
        o.config.n,
        o.config.bound_n(),
        o.config.k,
        o.config.f,
        o.config.strategy,
        o.config.wake_policy
    );
    s += &format!("  X_N {}\n", o.x_n);
    s += &format!(
        "  gathered {}  same node {}",
        yes(v.gathered),
        yes(v.same_node)
    );
    if let Some(r) = v.same_round {
        s += &format!("  same round {}", yes(r));
    }
    s += "\n";
    s += &format!(
        "  rounds {} of bound {} (ns {}, sim {})  within bound {}\n",
        o.rounds,
        o.bound,
        v.bound_ns,
        v.bound_sim,
        yes(v.bound_satisfied)
    );
    let m = &v.metrics;
    s += &format!(
        "  mgst phases {}  group round {}  blacklist insertions {} (witnessed {}, max {})\n",
        m.mgst_phases,
        m.group_round.map_or("-".into(), |r| r.to_string()),
        m.blacklist_insertions,
        m.witnessed_blacklists,
        m.max_blacklist
    );
    for (p, r) in &v.properties {
        match r {
            Ok(()) => s += &format!("  ok   {}\n", p.name()),
            Err(why) => s += &format!("  FAIL {}: {why}\n", p.name()),
        }
    }
    for n in &v.notes {
        s += &format!("  note {n}\n");
    }
    s += if v.passed() { "PASS\n" } else { "FAIL\n" };
    s
}

fn cmd_suite(cli: &Cli, path: &Path) -> Result<bool> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let mut matrix = MatrixSpec::from_toml_str(&text)?;
    if let Some(cap) = cli.cap {
        matrix.round_cap = Some(cap);
    }
    let report = run_suite(&matrix, &store(cli))?;
    if cli.csv {
        print!("{}", report.csv());
    } else {
        print!("{}", report.summary());
    }
    if let Some(dir) = &cli.out {
        fs::create_dir_all(dir)?;
        let stem = if matrix.name.is_empty() {
            "suite"
        } else {
            matrix.name.as_str()
        };
        fs::write(dir.join(format!("{stem}.csv")), report.csv())?;
        fs::write(dir.join(format!("{stem}.txt")), report.summary())?;
    }
    Ok(report.passed() == report.outcomes.len())
}

fn cmd_certify(cli: &Cli, n: usize, seed: u64) -> Result<bool> {
    let families = benchmark_families(n);
    let graphs: Vec<_> = families
        .iter()
        .map(|f| f.generate())
        .collect::<Result<_, _>>()?;
    let seq = ExplorationSequence::build(n, seed, &graphs)?;
    let mut all = true;
    if cli.csv {
        println!("family,nodes,graph_seed,certified");
    }
    for (fam, g) in families.iter().zip(&graphs) {
        let ok = seq.certify(g).passed();
        all &= ok;
        if cli.csv {
            println!("{},{},{},{}", fam.kind, fam.nodes, fam.seed, ok);
        }
    }
    if !cli.csv {
        println!("N {n} seed {seed}: X_N = {}", seq.x_n());
        println!(
            "certified on {} benchmark graphs: {}",
            graphs.len(),
            if all { "yes" } else { "no" }
        );
    }
    if let Some(dir) = &cli.out {
        let file = cache_path(dir, n, seed);
        seq.save(&file)?;
        eprintln!("sequence written to {}", file.display());
    }
    Ok(all)
}

fn cmd_replay(cli: &Cli, path: &Path) -> Result<bool> {
    let recorded =
        fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let header: String = recorded
        .lines()
        .map_while(|l| l.strip_prefix('#'))
        .map(|l| format!("{}\n", l.strip_prefix(' ').unwrap_or(l)))
        .collect();
    if header.is_empty() {
        bail!("{} has no scenario header", path.display());
    }
    let config = ScenarioConfig::from_toml_str(&header).context("scenario header")?;
    let (outcome, trace) = run_scenario(&config, &store(cli))?;
    let fresh = trace.export(&config.to_toml_string());
    if cli.csv {
        println!("{CSV_HEADER}\n{}", outcome.csv_row());
    }
    match fresh
        .lines()
        .zip(recorded.lines())
        .position(|(a, b)| a != b)
    {
        None if fresh.lines().count() == recorded.lines().count() => {
            if !cli.csv {
                println!("replay identical: {} lines", fresh.lines().count());
            }
            Ok(true)
        }
        None => {
            println!(
                "replay differs in length: {} lines recorded, {} replayed",
                recorded.lines().count(),
                fresh.lines().count()
            );
            Ok(false)
        }
        Some(i) => {
            println!("replay differs at line {}", i + 1);
            println!("  recorded: {}", recorded.lines().nth(i).unwrap_or(""));
            println!("  replayed: {}", fresh.lines().nth(i).unwrap_or(""));
            Ok(false)
        }
    }
}
