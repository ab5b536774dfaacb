//! Command-line front end: scenario generation, single runs with full
//! traces, figure-data experiments, and stability verification.
//!
//! Exit codes: 0 on success, 1 on validation or I/O problems, 2 when the
//! price iteration or the swap loop fails to settle (partial traces are
//! still written).

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use upn_market::error::Error;
use upn_market::harness::{
    self, grid_results_csv, level_results_csv, monte_carlo, price_grid, ExperimentSpec,
};
use upn_market::matching::{self, MarketEnv};
use upn_market::scenario::{generate_scenario, Scenario, ScenarioParams};

#[derive(Parser)]
#[command(
    name = "upn-market",
    about = "Simulator for an operator-supervised leftover-data trading market",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum OutputFormat {
    Csv,
    Json,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Figure {
    Fig3,
    Fig4,
    Fig5,
    Fig6,
    Fig7,
    Fig8,
    Fig9,
}

impl Figure {
    fn default_spec(self) -> &'static str {
        match self {
            Figure::Fig3 => include_str!("../../../experiments/fig3.json"),
            Figure::Fig4 => include_str!("../../../experiments/fig4.json"),
            Figure::Fig5 => include_str!("../../../experiments/fig5.json"),
            Figure::Fig6 => include_str!("../../../experiments/fig6.json"),
            Figure::Fig7 => include_str!("../../../experiments/fig7.json"),
            Figure::Fig8 => include_str!("../../../experiments/fig8.json"),
            Figure::Fig9 => include_str!("../../../experiments/fig9.json"),
        }
    }

    fn name(self) -> &'static str {
        match self {
            Figure::Fig3 => "fig3",
            Figure::Fig4 => "fig4",
            Figure::Fig5 => "fig5",
            Figure::Fig6 => "fig6",
            Figure::Fig7 => "fig7",
            Figure::Fig8 => "fig8",
            Figure::Fig9 => "fig9",
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Generate a scenario deterministically from a seed.
    GenScenario {
        #[arg(long)]
        seed: u64,
        #[arg(long)]
        buyers: usize,
        #[arg(long)]
        sellers: usize,
        /// JSON file overriding generator parameters (all fields optional).
        #[arg(long)]
        params: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Run the two-stage trading algorithm on one scenario and write
    /// matching.json, prices.csv, metrics.json and trading_matrix.csv.
    Run {
        #[arg(long)]
        scenario: PathBuf,
        /// Output directory (created if missing).
        #[arg(long)]
        out: PathBuf,
    },
    /// Produce figure data: runs the shipped (or a custom) experiment spec.
    Experiment {
        figure: Figure,
        /// Override the number of runs per level.
        #[arg(long)]
        runs: Option<usize>,
        /// Override the base seed.
        #[arg(long)]
        seed: Option<u64>,
        /// Custom experiment spec JSON replacing the shipped one.
        #[arg(long)]
        spec: Option<PathBuf>,
        /// Output file (defaults to <figure>.<format>).
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long, value_enum, default_value = "csv")]
        format: OutputFormat,
    },
    /// Run the algorithm and verify the result is swap-stable; on small
    /// instances also cross-check against exhaustive enumeration.
    VerifyStability {
        #[arg(long)]
        scenario: PathBuf,
    },
    /// Run the algorithm and export each seller's last price-adjustment
    /// trace as CSV.
    PriceTrace {
        #[arg(long)]
        scenario: PathBuf,
        /// Output directory (created if missing).
        #[arg(long)]
        out: PathBuf,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err}");
            match err {
                Error::NonConvergence { .. } | Error::CycleGuard { .. } => ExitCode::from(2),
                _ => ExitCode::FAILURE,
            }
        }
    }
}

fn dispatch(command: Command) -> Result<(), Error> {
    match command {
        Command::GenScenario {
            seed,
            buyers,
            sellers,
            params,
            out,
        } => gen_scenario(seed, buyers, sellers, params.as_deref(), &out),
        Command::Run { scenario, out } => run(&scenario, &out),
        Command::Experiment {
            figure,
            runs,
            seed,
            spec,
            out,
            format,
        } => experiment(figure, runs, seed, spec.as_deref(), out, format),
        Command::VerifyStability { scenario } => verify_stability(&scenario),
        Command::PriceTrace { scenario, out } => price_trace(&scenario, &out),
    }
}

fn load_scenario(path: &Path) -> Result<Scenario, Error> {
    let text = fs::read_to_string(path).map_err(|e| {
        Error::validation("scenario", format!("cannot read {}: {e}", path.display()))
    })?;
    Scenario::from_json(&text)
}

fn gen_scenario(
    seed: u64,
    buyers: usize,
    sellers: usize,
    params_path: Option<&Path>,
    out: &Path,
) -> Result<(), Error> {
    let params = match params_path {
        Some(path) => {
            let text = fs::read_to_string(path).map_err(|e| {
                Error::validation("params", format!("cannot read {}: {e}", path.display()))
            })?;
            serde_json::from_str::<ScenarioParams>(&text)?
        }
        None => ScenarioParams::default(),
    };
    let scenario = generate_scenario(seed, buyers, sellers, &params)?;
    fs::write(out, scenario.to_json()?)?;
    println!(
        "wrote {} ({} buyers, {} sellers, seed {seed})",
        out.display(),
        buyers,
        sellers
    );
    Ok(())
}

fn run(scenario_path: &Path, out: &Path) -> Result<(), Error> {
    let scenario = load_scenario(scenario_path)?;
    fs::create_dir_all(out)?;
    match harness::run_data_trading(&scenario) {
        Ok(outcome) => {
            fs::write(
                out.join("matching.json"),
                serde_json::to_string_pretty(&outcome.matching)?,
            )?;
            fs::write(out.join("trading_matrix.csv"), outcome.matching.matrix_csv(&scenario))?;
            fs::write(out.join("prices.csv"), outcome.market.prices_csv())?;
            fs::write(
                out.join("metrics.json"),
                serde_json::to_string_pretty(&outcome.metrics)?,
            )?;
            println!(
                "stable after {} swap rounds, {} price steps; {} of {} buyers on the macro cell",
                outcome.metrics.stage1_iterations,
                outcome.metrics.stage2_iterations,
                outcome.metrics.n_buyers_at_bs,
                scenario.buyers.len()
            );
            Ok(())
        }
        Err(Error::CycleGuard {
            rounds,
            swaps_applied,
            matching,
            market,
        }) => {
            // partial results so the abort can be diagnosed
            fs::write(
                out.join("matching.json"),
                serde_json::to_string_pretty(matching.as_ref())?,
            )?;
            fs::write(out.join("trading_matrix.csv"), matching.matrix_csv(&scenario))?;
            fs::write(out.join("prices.csv"), market.prices_csv())?;
            for (seller, trace) in &market.traces {
                fs::write(out.join(format!("seller_{seller}_trace.csv")), trace.to_csv())?;
            }
            Err(Error::CycleGuard {
                rounds,
                swaps_applied,
                matching,
                market,
            })
        }
        Err(Error::NonConvergence {
            iterations,
            last_price,
            last_step,
            trace,
        }) => {
            fs::write(out.join("failed_price_trace.csv"), trace.to_csv())?;
            Err(Error::NonConvergence {
                iterations,
                last_price,
                last_step,
                trace,
            })
        }
        Err(other) => Err(other),
    }
}

fn experiment(
    figure: Figure,
    runs: Option<usize>,
    seed: Option<u64>,
    spec_path: Option<&Path>,
    out: Option<PathBuf>,
    format: OutputFormat,
) -> Result<(), Error> {
    let text = match spec_path {
        Some(path) => fs::read_to_string(path).map_err(|e| {
            Error::validation("spec", format!("cannot read {}: {e}", path.display()))
        })?,
        None => figure.default_spec().to_string(),
    };
    let mut spec = ExperimentSpec::from_json(&text)?;
    if let ExperimentSpec::MonteCarlo(mc) = &mut spec {
        if let Some(runs) = runs {
            mc.runs = runs;
        }
        if let Some(seed) = seed {
            mc.base_seed = seed;
        }
    }

    let extension = match format {
        OutputFormat::Csv => "csv",
        OutputFormat::Json => "json",
    };
    let out = out.unwrap_or_else(|| PathBuf::from(format!("{}.{extension}", figure.name())));

    let body = match &spec {
        ExperimentSpec::MonteCarlo(mc) => {
            let results = monte_carlo(mc)?;
            match format {
                OutputFormat::Csv => level_results_csv(&results)?,
                OutputFormat::Json => serde_json::to_string_pretty(&results)?,
            }
        }
        ExperimentSpec::PriceGrid(grid) => {
            let results = price_grid(grid)?;
            match format {
                OutputFormat::Csv => grid_results_csv(&results)?,
                OutputFormat::Json => serde_json::to_string_pretty(&results)?,
            }
        }
    };
    fs::write(&out, body)?;
    println!("wrote {} ({})", out.display(), spec.name());
    Ok(())
}

fn verify_stability(scenario_path: &Path) -> Result<(), Error> {
    let scenario = load_scenario(scenario_path)?;
    let outcome = harness::run_data_trading(&scenario)?;
    let env = MarketEnv::new(&scenario);
    let report = matching::is_stable(&outcome.matching, &outcome.market, &env)?;
    if !report.stable {
        return Err(Error::Domain {
            op: "verify-stability",
            message: format!("{} blocking swaps found: {:?}", report.blocking.len(), report.blocking),
        });
    }
    match matching::enumerate_matchings_oracle(&scenario, &outcome.market) {
        Ok(entries) => {
            let in_stable_set = matching::stable_set(&entries)
                .iter()
                .any(|e| e.matching == outcome.matching);
            if in_stable_set {
                println!("STABLE, oracle-confirmed");
                Ok(())
            } else {
                Err(Error::Domain {
                    op: "verify-stability",
                    message: "result missing from the enumeration oracle's stable set".into(),
                })
            }
        }
        Err(Error::SizeGuard { .. }) => {
            println!("STABLE (instance too large for the enumeration oracle)");
            Ok(())
        }
        Err(other) => Err(other),
    }
}

fn price_trace(scenario_path: &Path, out: &Path) -> Result<(), Error> {
    let scenario = load_scenario(scenario_path)?;
    fs::create_dir_all(out)?;
    match harness::run_data_trading(&scenario) {
        Ok(outcome) => {
            let mut written = 0;
            for (seller, trace) in &outcome.market.traces {
                fs::write(out.join(format!("seller_{seller}_trace.csv")), trace.to_csv())?;
                written += 1;
            }
            println!("wrote {written} trace files to {}", out.display());
            Ok(())
        }
        Err(Error::NonConvergence {
            iterations,
            last_price,
            last_step,
            trace,
        }) => {
            fs::write(out.join("failed_price_trace.csv"), trace.to_csv())?;
            Err(Error::NonConvergence {
                iterations,
                last_price,
                last_step,
                trace,
            })
        }
        Err(Error::CycleGuard {
            rounds,
            swaps_applied,
            matching,
            market,
        }) => {
            for (seller, trace) in &market.traces {
                fs::write(out.join(format!("seller_{seller}_trace.csv")), trace.to_csv())?;
            }
            Err(Error::CycleGuard {
                rounds,
                swaps_applied,
                matching,
                market,
            })
        }
        Err(other) => Err(other),
    }
}
