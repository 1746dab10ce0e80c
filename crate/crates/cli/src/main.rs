use std::fs;
use std::io::{self, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use netcournot_cli::region::RegionReport;
use netcournot_cli::report::{to_json, SolveDocument, VerifyDocument};
use netcournot_cli::sweep::{run_sweep, write_csv, write_gnuplot, SweepSpec};
use netcournot_cli::Instance;
use netcournot_core::equilibrium::{gne_search, search_box, verify_gne, GneStatus, Profile, SearchConfig};
use netcournot_core::twonode::{classify_existence, TwoNodeParams};
use netcournot_core::Objective;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Equilibria of networked Cournot markets with a strategic market maker.
#[derive(Parser)]
#[command(name = "netcournot", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run best-response search and print the result document.
    ///
    /// Exit status 0 when converged, 2 on a cycle or the iteration limit.
    Solve(SolveArgs),
    /// Sweep the line capacity of a two-node instance and write CSV.
    Sweep(SweepArgs),
    /// Print thresholds and the existence partition of a two-node instance.
    Region(RegionArgs),
    /// Check whether a profile is an equilibrium.
    ///
    /// Exit status 0 when it is, 2 when it is not.
    Verify(VerifyArgs),
}

#[derive(Args)]
struct InstanceArg {
    /// Instance JSON file.
    #[arg(value_name = "INSTANCE")]
    path: Option<PathBuf>,
    /// Instance JSON file (alternative to the positional argument).
    #[arg(long = "instance", value_name = "PATH", conflicts_with = "path")]
    flag: Option<PathBuf>,
}

impl InstanceArg {
    fn load(&self) -> Result<Instance> {
        let Some(path) = self.path.as_ref().or(self.flag.as_ref()) else {
            bail!("no instance file given");
        };
        Instance::load(path).with_context(|| format!("loading {}", path.display()))
    }
}

#[derive(Args)]
struct SolveArgs {
    #[command(flatten)]
    instance: InstanceArg,
    #[arg(long, default_value = "soc")]
    objective: Objective,
    /// Also write the result document here.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Verification tolerance.
    #[arg(long, default_value_t = 1e-7)]
    tol: f64,
    #[arg(long, default_value_t = 10_000)]
    max_iter: usize,
    /// Draw the initial production uniformly from the search box.
    #[arg(long)]
    seed: Option<u64>,
    /// Initial production, comma separated.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    init_q: Option<Vec<f64>>,
    /// Initial re-balancing, comma separated.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    init_r: Option<Vec<f64>>,
}

#[derive(Args)]
struct SweepArgs {
    #[command(flatten)]
    instance: InstanceArg,
    /// Objectives to sweep; all three by default.
    #[arg(long, value_delimiter = ',')]
    objective: Vec<Objective>,
    #[arg(long)]
    from: Option<f64>,
    #[arg(long)]
    to: Option<f64>,
    /// Number of capacities, both ends included.
    #[arg(long, default_value_t = 151)]
    steps: usize,
    #[arg(long, default_value_t = 10_000)]
    max_iter: usize,
    /// Output file; standard output when absent.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Write gnuplot blocks instead of CSV.
    #[arg(long)]
    gnuplot: bool,
}

#[derive(Args)]
struct RegionArgs {
    /// Instance JSON file; alternatively give all of --a, --b1, --b2, --c.
    #[arg(value_name = "INSTANCE")]
    path: Option<PathBuf>,
    #[arg(long = "instance", value_name = "PATH", conflicts_with = "path")]
    flag: Option<PathBuf>,
    #[arg(long, requires_all = ["b1", "b2", "c"], conflicts_with_all = ["path", "flag"])]
    a: Option<f64>,
    #[arg(long)]
    b1: Option<f64>,
    #[arg(long)]
    b2: Option<f64>,
    #[arg(long)]
    c: Option<f64>,
    #[arg(long)]
    from: Option<f64>,
    #[arg(long)]
    to: Option<f64>,
    /// Print JSON instead of text.
    #[arg(long)]
    json: bool,
}

#[derive(Args)]
struct VerifyArgs {
    #[command(flatten)]
    instance: InstanceArg,
    #[arg(long, default_value = "soc")]
    objective: Objective,
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true, required = true)]
    q: Vec<f64>,
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true, required = true)]
    r: Vec<f64>,
    #[arg(long, default_value_t = 1e-7)]
    tol: f64,
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(code) => code,
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::from(1)
        }
    }
}

fn run(cli: Cli) -> Result<ExitCode> {
    match cli.command {
        Command::Solve(args) => solve(args),
        Command::Sweep(args) => sweep(args),
        Command::Region(args) => region(args),
        Command::Verify(args) => verify(args),
    }
}

fn solve(args: SolveArgs) -> Result<ExitCode> {
    let inst = args.instance.load()?;
    let n = inst.network.nodes();
    let config = SearchConfig {
        max_iter: args.max_iter,
        verify_tol: args.tol,
        ..SearchConfig::default()
    };
    let q0 = match (args.init_q, args.seed) {
        (Some(q), _) => q,
        (None, Some(seed)) => {
            let upper = search_box(&inst.network, &inst.market)?;
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            upper.iter().map(|u| rng.gen_range(0.0..=*u)).collect()
        }
        (None, None) => vec![0.0; n],
    };
    let r0 = args.init_r.unwrap_or_else(|| vec![0.0; n]);
    let result = gne_search(&inst.network, &inst.market, args.objective, &Profile::new(q0, r0), &config)?;
    if result.status == GneStatus::Infeasible {
        bail!("initial production must be finite and nonnegative");
    }
    let analytic = inst
        .two_node_params()
        .filter(|_| args.objective == Objective::ConsumerSurplus)
        .map(|p| classify_existence(&p));
    let status = result.status;
    let doc = SolveDocument {
        objective: args.objective,
        analytic,
        result,
    };
    let text = to_json(&doc)?;
    println!("{text}");
    if let Some(out) = args.out {
        fs::write(&out, format!("{text}\n")).with_context(|| format!("writing {}", out.display()))?;
    }
    Ok(match status {
        GneStatus::Converged => ExitCode::SUCCESS,
        _ => ExitCode::from(2),
    })
}

fn sweep(args: SweepArgs) -> Result<ExitCode> {
    let inst = args.instance.load()?;
    let (lo, hi) = SweepSpec::default_range(&inst);
    let objectives = if args.objective.is_empty() {
        Objective::ALL.to_vec()
    } else {
        args.objective
    };
    let spec = SweepSpec {
        from: args.from.unwrap_or(lo),
        to: args.to.unwrap_or(hi),
        steps: args.steps,
        objectives,
        config: SearchConfig {
            max_iter: args.max_iter,
            ..SearchConfig::default()
        },
    };
    let records = run_sweep(&inst, &spec)?;
    let mut out: Box<dyn Write> = match &args.out {
        Some(path) => Box::new(io::BufWriter::new(
            fs::File::create(path).with_context(|| format!("creating {}", path.display()))?,
        )),
        None => Box::new(io::stdout().lock()),
    };
    if args.gnuplot {
        write_gnuplot(&mut out, &records, &spec.objectives)?;
    } else {
        let (a, b, c) = (inst.market.intercepts(), inst.market.slopes(), inst.market.costs());
        let comments = vec![
            format!("a = {a:?}, b = {b:?}, c = {c:?}"),
            format!(
                "f12 from {} to {} in {} points (default range 0 to 1.5 a2/(b2 + 2 c2) = {hi})",
                spec.from, spec.to, spec.steps
            ),
            "status: exists | no-gne | limit; value fields empty without an equilibrium".to_string(),
        ];
        write_csv(&mut out, &comments, &records)?;
    }
    out.flush()?;
    Ok(ExitCode::SUCCESS)
}

fn region(args: RegionArgs) -> Result<ExitCode> {
    let params = match (args.a, args.path.as_ref().or(args.flag.as_ref())) {
        (Some(a), _) => TwoNodeParams::new(a, args.b1.unwrap(), args.b2.unwrap(), args.c.unwrap(), None)?,
        (None, Some(path)) => {
            let inst = Instance::load(path).with_context(|| format!("loading {}", path.display()))?;
            match inst.two_node_params() {
                Some(p) => p.with_capacity(None)?,
                None => bail!("instance is not a two-node network with equal intercepts and costs and 1 < b1/b2 <= 3"),
            }
        }
        (None, None) => bail!("give an instance file or --a, --b1, --b2 and --c"),
    };
    let (lo, hi) = RegionReport::default_range(&params);
    let report = RegionReport::new(&params, args.from.unwrap_or(lo), args.to.unwrap_or(hi))?;
    if args.json {
        println!("{}", to_json(&report)?);
    } else {
        print!("{report}");
    }
    Ok(ExitCode::SUCCESS)
}

fn verify(args: VerifyArgs) -> Result<ExitCode> {
    let inst = args.instance.load()?;
    let certificate = verify_gne(&inst.network, &inst.market, args.objective, &args.q, &args.r, args.tol)?;
    let is_gne = certificate.is_gne;
    let doc = VerifyDocument {
        objective: args.objective,
        q: args.q,
        r: args.r,
        tol: args.tol,
        certificate,
    };
    println!("{}", to_json(&doc)?);
    Ok(if is_gne { ExitCode::SUCCESS } else { ExitCode::from(2) })
}
