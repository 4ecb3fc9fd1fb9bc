use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use topocbt_core::engine::{recover, Wal};
use topocbt_core::harness::fit::{compare_shapes, complexity_fit, FIT_TOLERANCE};
use topocbt_core::harness::{
    betti_report, builtin, compare, run_scenario, run_until_crash, Protocol, RunOptions, Scenario,
};
use topocbt_core::simplicial::text::{read_complex, write_complex};
use topocbt_core::simplicial::SimplicialComplex;

#[derive(Parser)]
#[command(name = "topocbt", version, about = "Simulate and audit cross-chain transactions")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a scenario and write its CSV report.
    Run {
        /// Scenario file, or a built-in name such as `car-trading`.
        #[arg(long)]
        scenario: String,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        /// Run every transaction under this protocol.
        #[arg(long)]
        protocol: Option<String>,
        /// CSV destination; stdout if omitted.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Also write the final WAL here.
        #[arg(long)]
        wal_out: Option<PathBuf>,
    },
    /// Print the Betti numbers of a scenario's complex or of a complex file.
    Betti {
        #[arg(long, conflicts_with = "complex", required_unless_present = "complex")]
        scenario: Option<String>,
        /// Number of transactions in flight; all of them if omitted.
        #[arg(long)]
        at: Option<usize>,
        #[arg(long)]
        complex: Option<PathBuf>,
        /// Write the complex here, and its tags to `<out>.tags`.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run scenarios under all three protocols and tabulate the outcomes.
    Compare {
        /// Directory of `.scn` files; the built-in failure suite if omitted.
        #[arg(long)]
        scenario_dir: Option<PathBuf>,
        #[arg(long, value_delimiter = ',', default_value = "1")]
        seeds: Vec<u64>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Fit primitive-op counts over a grid of chain and face counts.
    Fit {
        /// `nmax,mmax`: n runs over 2..=nmax, m over 1..=mmax.
        #[arg(long, default_value = "6,4")]
        grid: String,
    },
    /// Crash a scenario, save its WAL, then recover from the saved file.
    Recover {
        #[arg(long)]
        wal: PathBuf,
        #[arg(long)]
        scenario: String,
        #[arg(long, default_value_t = 1)]
        seed: u64,
    },
}

struct Failure {
    kind: &'static str,
    location: Option<(usize, String)>,
    message: String,
}

impl Failure {
    fn new(kind: &'static str, message: impl ToString) -> Self {
        Self { kind, location: None, message: message.to_string() }
    }

    fn print(&self) {
        let loc = match &self.location {
            Some((line, field)) => format!(" line={line} field={field}"),
            None => String::new(),
        };
        eprintln!("error: kind={}{loc} msg={}", self.kind, self.message.replace('\n', " "));
    }
}

type Outcome = Result<ExitCode, Failure>;

fn read(path: &Path) -> Result<String, Failure> {
    fs::read_to_string(path).map_err(|e| Failure::new("io", format!("{}: {e}", path.display())))
}

fn write(path: &Path, contents: impl AsRef<[u8]>) -> Result<(), Failure> {
    fs::write(path, contents).map_err(|e| Failure::new("io", format!("{}: {e}", path.display())))
}

fn load_scenario(arg: &str) -> Result<Scenario, Failure> {
    let text = match builtin::source(arg) {
        Some(t) if !Path::new(arg).exists() => t.to_string(),
        _ => read(Path::new(arg))?,
    };
    Scenario::parse(&text).map_err(|e| Failure {
        kind: "parse",
        location: Some((e.line, e.field.clone())),
        message: e.message,
    })
}

fn parse_protocol(s: &str) -> Result<Protocol, Failure> {
    s.parse().map_err(|e: String| Failure::new("usage", e))
}

fn cmd_run(scenario: &str, seed: u64, protocol: Option<String>, out: Option<PathBuf>, wal_out: Option<PathBuf>) -> Outcome {
    let scenario = load_scenario(scenario)?;
    let protocol = protocol.as_deref().map(parse_protocol).transpose()?;
    let report = run_scenario(&scenario, seed, RunOptions { protocol }).map_err(|e| Failure::new("run", e))?;
    let csv = report.to_csv();
    match out {
        Some(p) => write(&p, csv)?,
        None => print!("{csv}"),
    }
    if let Some(p) = wal_out {
        write(&p, &report.wal)?;
    }
    for v in &report.violations {
        Failure::new("invariant", v).print();
    }
    Ok(if report.is_ok() { ExitCode::SUCCESS } else { ExitCode::FAILURE })
}

fn print_betti(complex: &SimplicialComplex) {
    let counts: Vec<String> = (0..=complex.dimension().max(-1))
        .map(|k| complex.count_of_dim(k as usize).to_string())
        .collect();
    println!("betti={}", complex.betti_numbers());
    println!("euler={}", complex.euler_characteristic());
    println!("simplices={}", counts.join(";"));
}

fn cmd_betti(scenario: Option<String>, at: Option<usize>, complex: Option<PathBuf>, out: Option<PathBuf>) -> Outcome {
    if let Some(path) = complex {
        let text = read(&path)?;
        let c = read_complex(&text).map_err(|e| Failure {
            kind: "parse",
            location: Some((e.line(), "simplex".into())),
            message: e.to_string(),
        })?;
        print_betti(&c);
        if let Some(p) = out {
            write(&p, write_complex(&c))?;
        }
        return Ok(ExitCode::SUCCESS);
    }
    let scenario = load_scenario(scenario.as_deref().expect("clap requires one source"))?;
    let at = at.unwrap_or(scenario.txns.len());
    let tagged = betti_report(&scenario, at).map_err(|e| Failure::new("run", e))?;
    print_betti(&tagged.complex);
    if let Some(p) = out {
        write(&p, write_complex(&tagged.complex))?;
        let mut tags = p.into_os_string();
        tags.push(".tags");
        write(Path::new(&tags), tagged.tag_lines())?;
    }
    Ok(ExitCode::SUCCESS)
}

fn cmd_compare(dir: Option<PathBuf>, seeds: Vec<u64>, out: Option<PathBuf>) -> Outcome {
    let scenarios = match dir {
        None => builtin::suite(),
        Some(dir) => {
            let entries = fs::read_dir(&dir).map_err(|e| Failure::new("io", format!("{}: {e}", dir.display())))?;
            let mut paths: Vec<PathBuf> = entries
                .filter_map(|e| e.ok().map(|e| e.path()))
                .filter(|p| p.extension().is_some_and(|x| x == "scn"))
                .collect();
            paths.sort();
            if paths.is_empty() {
                return Err(Failure::new("usage", format!("{}: no .scn files", dir.display())));
            }
            paths
                .iter()
                .map(|p| load_scenario(&p.to_string_lossy()))
                .collect::<Result<Vec<_>, _>>()?
        }
    };
    let report = compare(&scenarios, &seeds).map_err(|e| Failure::new("run", e))?;
    if let Some(p) = out {
        write(&p, report.to_csv())?;
    }
    print!("{}", report.summary());
    for v in &report.violations {
        Failure::new("invariant", v).print();
    }
    Ok(if report.violations.is_empty() { ExitCode::SUCCESS } else { ExitCode::FAILURE })
}

fn cmd_fit(grid: &str) -> Outcome {
    let bad = || Failure::new("usage", format!("--grid expects nmax,mmax, got `{grid}`"));
    let (n, m) = grid.split_once(',').ok_or_else(bad)?;
    let nmax: usize = n.trim().parse().map_err(|_| bad())?;
    let mmax: usize = m.trim().parse().map_err(|_| bad())?;
    let fit = complexity_fit(nmax, mmax).map_err(|e| Failure::new("fit", e))?;
    let c = &fit.fit.coefficients;
    println!("topocbt ops ~ {:.4}*n^2 + {:.4}*n*m + {:.4}", c[0], c[1], c[2]);
    println!("residual_ratio={:.6} tolerance={FIT_TOLERANCE}", fit.fit.residual_ratio);
    println!("non_negative={} n2_dominates={}", fit.non_negative, fit.quadratic_dominates);
    let shapes = compare_shapes(Protocol::Ac2s, nmax, mmax).map_err(|e| Failure::new("fit", e))?;
    println!("ac2s residual m*n^2={:.6} n^2+n*m={:.6}", shapes.cubic, shapes.quadratic);
    let pass = fit.pass && shapes.prefers_cubic();
    println!("verdict={}", if pass { "PASS" } else { "FAIL" });
    Ok(if pass { ExitCode::SUCCESS } else { ExitCode::FAILURE })
}

fn cmd_recover(wal_path: &Path, scenario: &str, seed: u64) -> Outcome {
    let scenario = load_scenario(scenario)?;
    let Some(crash) = run_until_crash(&scenario, seed).map_err(|e| Failure::new("run", e))? else {
        println!("no crash in this scenario; nothing to recover");
        return Ok(ExitCode::SUCCESS);
    };
    println!("crashed txn={} after_step={}", crash.txn, crash.step);
    write(wal_path, crash.wal.encode())?;
    let bytes = fs::read(wal_path).map_err(|e| Failure::new("io", format!("{}: {e}", wal_path.display())))?;
    let mut wal = Wal::decode(&bytes).map_err(|e| Failure::new("wal", e))?;
    let mut fed = crash.federation;
    let first = recover(&mut fed, &mut wal).map_err(|e| Failure::new("recover", e))?;
    let rolled: Vec<String> = first.rolled_back.iter().map(ToString::to_string).collect();
    let committed: Vec<String> = first.committed.iter().map(ToString::to_string).collect();
    println!(
        "recovered rolled_back={} committed={} compensations={} aborts_written={} locks_cleared={}",
        rolled.join(";"),
        committed.join(";"),
        first.compensations,
        first.aborts_written,
        first.locks_cleared
    );
    let second = recover(&mut fed, &mut wal).map_err(|e| Failure::new("recover", e))?;
    println!("second_pass_noop={}", second.is_noop());
    println!("digest_before={}", crash.digest_before.to_hex());
    println!("digest_after={}", fed.state_digest().to_hex());
    write(wal_path, wal.encode())?;
    Ok(ExitCode::SUCCESS)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter("TOPOCBT_LOG")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if !e.use_stderr() => {
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            let msg = e.to_string();
            Failure::new("usage", msg.lines().next().unwrap_or("invalid arguments").trim_start_matches("error: ")).print();
            return ExitCode::from(2);
        }
    };
    let result = match cli.command {
        Command::Run { scenario, seed, protocol, out, wal_out } => cmd_run(&scenario, seed, protocol, out, wal_out),
        Command::Betti { scenario, at, complex, out } => cmd_betti(scenario, at, complex, out),
        Command::Compare { scenario_dir, seeds, out } => cmd_compare(scenario_dir, seeds, out),
        Command::Fit { grid } => cmd_fit(&grid),
        Command::Recover { wal, scenario, seed } => cmd_recover(&wal, &scenario, seed),
    };
    result.unwrap_or_else(|f| {
        f.print();
        ExitCode::FAILURE
    })
}
