use std::ops::RangeInclusive;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use sensorco::ipo::open_ipo;
use sensorco::ledger::HolderId;
use sensorco::pricing::{optimize_all, optimize_price, Objective, ServiceSpec};
use sensorco::scenario::{
    emit_report, emit_scenario_echo, load_curve, load_instance, load_scenario, to_json_bytes, ReportFormat,
    ScenarioFile, ScenarioOverrides,
};
use sensorco::sim::{break_even_sweep, run_with_break_even, DEFAULT_SWEEP_USERS};
use sensorco::valuation::{appreciation_over_preipo, market_valuation, pe_from_apr, preipo_apr, proposer_reward};
use sensorco::virtualizer::{brute_force_portfolio, optimize_portfolio, PortfolioProblem, SolveOptions};
use sensorco::{Error, Money, Result};

#[derive(Parser)]
#[command(name = "sensorco", version, about = "Sensor micro-company simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a scenario and write metrics, statements and a break-even sweep.
    Simulate {
        #[arg(long)]
        scenario: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, value_enum, default_value_t = Format::All)]
        format: Format,
        #[command(flatten)]
        overrides: Overrides,
    },
    /// First-year profit over a range of user counts.
    Sweep {
        #[arg(long)]
        scenario: PathBuf,
        /// Inclusive user range, `a..b` or `a..=b`.
        #[arg(long, default_value = "0..100", value_parser = parse_range)]
        range: RangeInclusive<u64>,
        #[arg(long)]
        out: PathBuf,
        #[command(flatten)]
        overrides: Overrides,
    },
    /// Group companies into virtual entities.
    Virtualize {
        #[arg(long)]
        instance: PathBuf,
        /// Writes assignment.json here instead of stdout.
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 8)]
        restarts: usize,
        /// Use the relaxation even for small instances.
        #[arg(long)]
        heuristic: bool,
    },
    /// P/E, market value, pre-IPO APR and appreciation for given inputs.
    Valuate(ValuateArgs),
    /// Optimal unit price for a curve, or for every service of a scenario.
    Price {
        #[arg(long, conflicts_with = "scenario", required_unless_present = "scenario")]
        curve: Option<PathBuf>,
        #[arg(long)]
        scenario: Option<PathBuf>,
        #[arg(long, default_value_t = 1)]
        users: u64,
        #[arg(long, value_enum)]
        objective: Option<ObjectiveArg>,
        /// Marginal cost per use, in dollars.
        #[arg(long, default_value = "0")]
        marginal_cost: Money,
        /// Service fixed cost per month, in dollars.
        #[arg(long, default_value = "0")]
        fixed_cost: Money,
    },
    /// Collect a scenario's pledges and settle its offering.
    IpoSettle {
        #[arg(long)]
        scenario: PathBuf,
        /// Settlement month; defaults to the close of the window.
        #[arg(long)]
        month: Option<u32>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Args, Default)]
struct Overrides {
    #[arg(long)]
    users: Option<u64>,
    #[arg(long)]
    months: Option<u32>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    pe: Option<f64>,
    #[arg(long)]
    apr: Option<f64>,
}

#[derive(Args)]
struct ValuateArgs {
    #[arg(long)]
    apr: Option<f64>,
    #[arg(long)]
    pe: Option<f64>,
    /// Annual income in dollars.
    #[arg(long)]
    income: Option<Money>,
    /// Market value in dollars, when not derived from income.
    #[arg(long)]
    market_value: Option<Money>,
    /// Pre-IPO value (startup cost) in dollars.
    #[arg(long)]
    ipo_value: Option<Money>,
    #[arg(long, default_value_t = 12)]
    months_to_steady: u32,
    #[arg(long)]
    esop: Option<f64>,
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Json,
    Csv,
    All,
}

#[derive(Clone, Copy, ValueEnum)]
enum ObjectiveArg {
    Revenue,
    Profit,
}

impl From<ObjectiveArg> for Objective {
    fn from(o: ObjectiveArg) -> Self {
        match o {
            ObjectiveArg::Revenue => Objective::Revenue,
            ObjectiveArg::Profit => Objective::Profit,
        }
    }
}

fn parse_range(s: &str) -> std::result::Result<RangeInclusive<u64>, String> {
    let (a, b) = s.split_once("..=").or_else(|| s.split_once("..")).ok_or("expected a..b")?;
    let a: u64 = a.trim().parse().map_err(|e| format!("{a}: {e}"))?;
    let b: u64 = b.trim().parse().map_err(|e| format!("{b}: {e}"))?;
    if a > b {
        return Err(format!("empty range {s}"));
    }
    Ok(a..=b)
}

fn scenario_with(path: &PathBuf, o: &Overrides) -> Result<ScenarioFile> {
    let overrides = ScenarioOverrides { users: o.users, months: o.months, seed: o.seed, pe: o.pe, apr: o.apr };
    overrides.apply(&load_scenario(path)?)
}

fn write_out(out: &Option<PathBuf>, name: &str, bytes: &[u8]) -> Result<()> {
    match out {
        Some(dir) => {
            std::fs::create_dir_all(dir).map_err(|source| Error::Io { path: dir.clone(), source })?;
            let path = dir.join(name);
            std::fs::write(&path, bytes).map_err(|source| Error::Io { path, source })
        }
        None => {
            print!("{}", String::from_utf8_lossy(bytes));
            Ok(())
        }
    }
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Simulate { scenario, out, format, overrides } => {
            let scenario = scenario_with(&scenario, &overrides)?;
            let (report, sweep) = run_with_break_even(&scenario, DEFAULT_SWEEP_USERS)?;
            let formats: &[ReportFormat] = match format {
                Format::Json => &[ReportFormat::Json],
                Format::Csv => &[ReportFormat::Csv],
                Format::All => &[ReportFormat::Json, ReportFormat::Csv],
            };
            for f in formats {
                emit_report(Some(&report), sweep.as_ref(), *f, &out)?;
            }
            emit_scenario_echo(&scenario, &out)?;
            let m = &report.metrics;
            println!("state: {:?}", m.final_state);
            println!("market value: {}", m.market_value_cents);
            match m.break_even_users {
                Some(u) => println!("break-even: {u}"),
                None => println!("break-even: none"),
            }
            for n in &m.notes {
                eprintln!("note [{}]: {}", n.code, n.message);
            }
        }
        Command::Sweep { scenario, range, out, overrides } => {
            let scenario = scenario_with(&scenario, &overrides)?;
            let sweep = break_even_sweep(&scenario, range)?;
            emit_report(None, Some(&sweep), ReportFormat::Csv, &out)?;
            match sweep.break_even_users {
                Some(u) => println!("break-even: {u}"),
                None => println!("break-even: none"),
            }
        }
        Command::Virtualize { instance, out, seed, restarts, heuristic } => {
            let problem = PortfolioProblem::from_instance(load_instance(&instance)?)?;
            let options = SolveOptions { force_heuristic: heuristic, seed, restarts, ..SolveOptions::default() };
            let assignment = optimize_portfolio(&problem, &options)?;
            write_out(&out, "assignment.json", &to_json_bytes(&assignment))?;
            println!("objective: {}", assignment.objective);
            if problem.is_exhaustive() {
                let oracle = brute_force_portfolio(&problem)?;
                println!("oracle objective: {}", oracle.objective);
                println!("optimality gap: {:?}", oracle.objective - assignment.objective);
            }
        }
        Command::Valuate(a) => valuate(&a)?,
        Command::Price { curve, scenario, users, objective, marginal_cost, fixed_cost } => {
            let services = match (curve, scenario) {
                (Some(path), _) => vec![ServiceSpec {
                    id: "service".into(),
                    name: path.display().to_string(),
                    unit_price: Money::ZERO,
                    marginal_cost,
                    fixed_cost,
                    curve: load_curve(&path)?,
                }],
                (None, Some(path)) => load_scenario(&path)?.services(),
                (None, None) => unreachable!("clap requires one of --curve or --scenario"),
            };
            let objective = objective.map(Objective::from).unwrap_or_default();
            for s in &services {
                let choice = optimize_price(s, users, objective)?;
                let label = if objective == Objective::Profit { "profit" } else { "revenue" };
                println!("{}: {} (expected monthly {label} {})", s.id, choice.price, choice.expected_monthly_value);
            }
            if services.len() > 1 {
                let priced = optimize_all(&services, objective)?;
                println!("revenue per user per year: {}", sensorco::pricing::annual_revenue_per_user(&priced));
            }
        }
        Command::IpoSettle { scenario, month, out } => {
            let scenario = load_scenario(&scenario)?;
            let mut round = open_ipo(scenario.proposal(scenario.services()), 0)?;
            let mut pledges = scenario.ipo.pledges.clone();
            pledges.sort_by_key(|p| p.month);
            for p in &pledges {
                round.pledge(HolderId::new(p.investor.clone()), p.amount_cents, p.month)?;
            }
            let settlement = round.settle(month.unwrap_or(round.closes_at()))?;
            write_out(&out, "settlement.json", &to_json_bytes(&settlement))?;
            if out.is_some() {
                println!("pledged: {}", round.total_pledged());
                println!("retained: {}", settlement.retained());
                println!("refunded: {}", settlement.total_refunded());
            }
        }
    }
    Ok(())
}

fn valuate(a: &ValuateArgs) -> Result<()> {
    if a.apr.is_none() && a.pe.is_none() && a.market_value.is_none() {
        return Err(Error::validation("apr", "give --apr, --pe or --market-value"));
    }
    for (name, v) in [("apr", a.apr), ("pe", a.pe)] {
        if v.is_some_and(|x| !(x.is_finite() && x > 0.0)) {
            return Err(Error::validation(name, "must be positive"));
        }
    }
    if a.esop.is_some_and(|f| !(0.0..1.0).contains(&f)) {
        return Err(Error::validation("esop", "must lie in [0, 1)"));
    }
    let derived = a.apr.map(pe_from_apr).transpose()?;
    if let Some(pe) = derived {
        println!("P/E {pe:.2}");
    }
    let pe = a.pe.or(derived);
    if let (Some(pe), Some(_)) = (a.pe, derived) {
        println!("using P/E {pe:.2}");
    }
    let market = match (a.market_value, a.income, pe) {
        (Some(v), _, _) => Some(v),
        (None, Some(income), Some(pe)) => Some(market_valuation(income, pe)?),
        _ => None,
    };
    if let Some(v) = market {
        println!("market value {v}");
    }
    if let Some(ipo) = a.ipo_value {
        if let (Some(income), Some(pe)) = (a.income, pe) {
            match preipo_apr(pe, income, ipo, a.months_to_steady) {
                Ok(r) => println!("pre-IPO APR {:.2}%", r * 100.0),
                Err(e) => eprintln!("pre-IPO APR undefined: {e}"),
            }
        }
        if let Some(v) = market {
            println!("return over pre-IPO {:.2}%", appreciation_over_preipo(v, ipo)?);
        }
    }
    if let (Some(f), Some(v)) = (a.esop, market) {
        println!("proposer reward {}", proposer_reward(v, f)?);
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
