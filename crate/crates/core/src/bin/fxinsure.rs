//! Command-line interface: closed-form solves, Monte Carlo simulation,
//! verification and reproduction of the numerical-example tables.

use std::cmp::Ordering;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use fxinsure::analysis::{compare_markets, fmt_sig, reproduce_figures, run_verify_suite};
use fxinsure::closed_form::{ClosedFormSolution, DEFAULT_GRID_POINTS};
use fxinsure::market::{MarketKind, OuParams, ParamFile};
use fxinsure::mc::{estimate_utility, simulate_path_trace, SimConfig, StrategySpec};
use fxinsure::Error;

#[derive(Parser)]
#[command(name = "fxinsure", about = "Optimal insurer investment across two currency markets")]
struct Cli {
    /// Flat JSON parameter file; defaults to the Table 1 parameter set.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Number of grid points for coefficient tables and curve output.
    #[arg(long, global = true)]
    grid: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum MarketArg {
    Ou,
    Gbm,
    Domestic,
}

impl From<MarketArg> for MarketKind {
    fn from(m: MarketArg) -> MarketKind {
        match m {
            MarketArg::Ou => MarketKind::ForeignOu,
            MarketArg::Gbm => MarketKind::ForeignGbm,
            MarketArg::Domestic => MarketKind::DomesticOnly,
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Emit t,K,L,J,h,pi_star,V as CSV at the grid points.
    Solve {
        #[arg(long, value_enum, default_value = "gbm")]
        market: MarketArg,
        /// Surplus at which the value function is evaluated (default x0).
        #[arg(long)]
        x: Option<f64>,
        /// Drift deviation at which curves are evaluated (default m0).
        #[arg(long)]
        m: Option<f64>,
    },
    /// Monte Carlo estimate of the expected terminal utility.
    Simulate {
        #[arg(long, value_enum, default_value = "gbm")]
        market: MarketArg,
        /// optimal | scaled:<f> | constant:<v> | zero
        #[arg(long, default_value = "optimal")]
        strategy: String,
        #[arg(long, default_value_t = 10_000)]
        paths: u64,
        #[arg(long, default_value_t = 200)]
        steps: usize,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        /// Also emit per-path CSV (path,t,X,m,Q,Sf) for the first k paths.
        #[arg(long)]
        dump_paths: Option<u64>,
        /// Destination for the per-path CSV; stdout when omitted.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run the verification suite; exit code 2 if any check fails.
    Verify,
    /// Compare the foreign and domestic-only markets.
    Compare,
    /// Write figure-data CSVs for one of the parameter tables.
    Reproduce {
        #[arg(long)]
        table: u8,
        #[arg(long)]
        out: PathBuf,
        /// Switch the foreign curves to the full solution: alpha,beta,m0.
        #[arg(long)]
        ou: Option<String>,
    },
}

fn parse_ou(spec: &str) -> Result<OuParams, Error> {
    let parts: Vec<&str> = spec.split(',').collect();
    if parts.len() != 3 {
        return Err(Error::Validation(format!("--ou expects alpha,beta,m0, got '{spec}'")));
    }
    let vals: Result<Vec<f64>, _> = parts.iter().map(|p| p.trim().parse::<f64>()).collect();
    let vals = vals.map_err(|_| Error::Validation(format!("bad --ou value in '{spec}'")))?;
    Ok(OuParams { alpha: vals[0], beta: vals[1], m0: vals[2] })
}

fn ordering_word(o: Ordering) -> &'static str {
    match o {
        Ordering::Greater => "foreign above domestic",
        Ordering::Less => "domestic above foreign",
        Ordering::Equal => "curves coincide",
    }
}

fn run(cli: Cli) -> Result<i32, Error> {
    let pf = match &cli.config {
        Some(path) => ParamFile::from_path(path)?,
        None => ParamFile::table1(),
    };

    match cli.command {
        Command::Solve { market, x, m } => {
            let kind: MarketKind = market.into();
            let cfg = pf.validated(kind)?;
            let n = cli.grid.unwrap_or(DEFAULT_GRID_POINTS);
            let sol = ClosedFormSolution::new(&cfg, n)?;
            let x = x.unwrap_or(pf.x0);
            let m = m.unwrap_or(cfg.ou().m0);
            let grid = fxinsure::closed_form::uniform_grid(pf.t, n);
            println!("t,K,L,J,h,pi_star,V");
            for &t in &grid {
                let (k, l, j) = match sol.table() {
                    Some(tab) => (tab.k_at(t), tab.l_at(t), tab.j_at(t)),
                    None => (0.0, 0.0, sol.h(t, m)?),
                };
                let row = [t, k, l, j, sol.h(t, m)?, sol.strategy(t, m)?, sol.value(t, x, m)?];
                let cells: Vec<String> = row.iter().map(|&v| fmt_sig(v)).collect();
                println!("{}", cells.join(","));
            }
            Ok(0)
        }
        Command::Simulate { market, strategy, paths, steps, seed, dump_paths, out } => {
            let kind: MarketKind = market.into();
            let cfg = pf.validated(kind)?;
            let sol = ClosedFormSolution::new(&cfg, cli.grid.unwrap_or(DEFAULT_GRID_POINTS))?;
            let strategy: StrategySpec = strategy.parse()?;
            let sim = SimConfig { paths, steps, seed, strategy };
            let result = estimate_utility(&cfg, &sol, &sim)?;
            println!("{}", serde_json::to_string(&result)?);
            if let Some(k) = dump_paths {
                let mut csv = String::from("path,t,X,m,Q,Sf\n");
                for i in 0..k.min(paths) {
                    for s in simulate_path_trace(&cfg, &sol, &sim, i)? {
                        csv.push_str(&format!(
                            "{i},{},{},{},{},{}\n",
                            fmt_sig(s.t),
                            fmt_sig(s.x),
                            fmt_sig(s.m),
                            fmt_sig(s.q),
                            fmt_sig(s.sf)
                        ));
                    }
                }
                match out {
                    Some(path) => std::fs::write(path, csv)?,
                    None => print!("{csv}"),
                }
            }
            Ok(0)
        }
        Command::Verify => {
            let report = run_verify_suite(&pf, cli.grid.unwrap_or(DEFAULT_GRID_POINTS))?;
            print!("{}", report.render());
            if report.all_passed() {
                Ok(0)
            } else {
                Ok(2)
            }
        }
        Command::Compare => {
            let r = compare_markets(&pf, cli.grid.unwrap_or(400))?;
            println!("A_1 = u_f + u_Q - r_d = {}", r.drift_sum_foreign - pf.r_d);
            println!(
                "condition sigma_d^2*A_1 = {} vs (sigma_f^2+sigma_Q^2)(u_d-r_d) = {}",
                r.cross_foreign, r.cross_domestic
            );
            println!(
                "condition u_f+u_Q = {} vs u_d = {}",
                r.drift_sum_foreign, r.drift_domestic
            );
            println!(
                "squared Sharpe terms: foreign {} vs domestic {}",
                r.sharpe_sq_foreign, r.sharpe_sq_domestic
            );
            println!("value curves on t < T: {}", ordering_word(r.value_ordering));
            println!("strategy curves on t < T: {}", ordering_word(r.strategy_ordering));
            println!(
                "value ordering matches Sharpe ordering: {}",
                if r.sharpe_sign_consistent { "holds" } else { "VIOLATED" }
            );
            println!(
                "V_foreign(0,x0) = {}  V_domestic(0,x0) = {}",
                fmt_sig(r.v_foreign[0]),
                fmt_sig(r.v_domestic[0])
            );
            println!(
                "pi_foreign(0) = {}  pi_domestic(0) = {}",
                fmt_sig(r.pi_foreign[0]),
                fmt_sig(r.pi_domestic[0])
            );
            if r.sharpe_sign_consistent {
                Ok(0)
            } else {
                Ok(2)
            }
        }
        Command::Reproduce { table, out, ou } => {
            let ou = match ou {
                Some(spec) => Some(parse_ou(&spec)?),
                None => None,
            };
            let files = reproduce_figures(table, &out, ou, 400)?;
            for f in files {
                println!("{}", f.display());
            }
            Ok(0)
        }
    }
}

fn main() -> ExitCode {
    // die silently on a closed pipe (e.g. `fxinsure solve | head`)
    #[cfg(unix)]
    unsafe {
        libc::signal(libc::SIGPIPE, libc::SIG_DFL);
    }
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => ExitCode::from(code as u8),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}
