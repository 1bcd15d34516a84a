//! Scenario and curve files, validation with field paths, and report output.
//!
//! Scenarios are JSON. Services reference their demand curve either by a
//! path relative to the scenario file or inline; loading resolves every
//! reference so a loaded scenario is self-contained and can be echoed back.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{de::DeserializeOwned, Deserialize, Serialize};

use crate::error::{Error, FieldError, Result};
use crate::ipo::{IpoProposal, DEFAULT_SHARE_PRICE, DEFAULT_WINDOW_MONTHS};
use crate::ledger::HolderId;
use crate::money::Money;
use crate::pricing::{CostStructure, CurvePoint, Objective, PriceUsageCurve, ServiceSpec, DEFAULT_INCENTIVE_RATE};
use crate::sim::{SimulationReport, Sweep, DEFAULT_STEADY_MONTHS};
use crate::valuation::{ValuationParams, DEFAULT_TARGET_APR};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioFile {
    pub name: String,
    pub company: CompanyBlock,
    pub ipo: IpoBlock,
    pub simulation: SimulationBlock,
    #[serde(default)]
    pub valuation: ValuationBlock,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CompanyBlock {
    pub id: String,
    pub proposer: String,
    pub esop_fraction: f64,
    #[serde(default = "default_share_price")]
    pub share_price_cents: Money,
    pub startup: StartupBlock,
    pub costs: CostsBlock,
    #[serde(default)]
    pub price_objective: Objective,
    pub services: Vec<ServiceBlock>,
}

fn default_share_price() -> Money {
    DEFAULT_SHARE_PRICE
}

/// Startup capital. The offering goal (and pre-IPO value) is the sum.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StartupBlock {
    /// Depreciable hardware.
    pub hardware_cents: Money,
    #[serde(default)]
    pub installation_cents: Money,
    pub working_capital_cents: Money,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CostsBlock {
    pub maintenance_hours_per_month: f64,
    pub maintenance_hourly_rate_cents: Money,
    #[serde(default)]
    pub admin_fees_cents_per_month: Money,
    #[serde(default = "default_incentive")]
    pub incentive_rate: f64,
}

fn default_incentive() -> f64 {
    DEFAULT_INCENTIVE_RATE
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ServiceBlock {
    pub id: String,
    pub name: String,
    #[serde(default)]
    pub marginal_cost_cents: Money,
    #[serde(default)]
    pub fixed_cost_cents_per_month: Money,
    /// Fixed price; when absent the optimizer picks one.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub unit_price_cents: Option<Money>,
    pub curve: CurveSource,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum CurveSource {
    Path(String),
    Inline(PriceUsageCurve),
}

/// A curve file is either `{points, zero_pay_fraction}` or a bare points array.
#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(untagged)]
enum CurveFile {
    Full(PriceUsageCurve),
    Points(Vec<CurvePoint>),
}

impl From<CurveFile> for PriceUsageCurve {
    fn from(f: CurveFile) -> Self {
        match f {
            CurveFile::Full(c) => c,
            CurveFile::Points(points) => {
                PriceUsageCurve { points, zero_pay_fraction: crate::pricing::DEFAULT_ZERO_PAY_FRACTION }
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IpoBlock {
    #[serde(default = "default_window")]
    pub window_months: u32,
    pub pledges: Vec<PledgeEntry>,
}

fn default_window() -> u32 {
    DEFAULT_WINDOW_MONTHS
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PledgeEntry {
    pub month: u32,
    pub investor: String,
    pub amount_cents: Money,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulationBlock {
    #[serde(default = "default_months")]
    pub months: u32,
    pub users: UsersSpec,
    #[serde(default)]
    pub uptime: UptimeSpec,
    #[serde(default = "default_reserve_rate")]
    pub reserve_rate: f64,
    #[serde(default = "default_steady_k")]
    pub steady_k: u32,
    #[serde(default)]
    pub seed: u64,
}

fn default_months() -> u32 {
    12
}

fn default_reserve_rate() -> f64 {
    0.10
}

fn default_steady_k() -> u32 {
    DEFAULT_STEADY_MONTHS
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum UsersSpec {
    Constant(u64),
    /// Users per operating month, starting at month 1.
    Schedule(Vec<u64>),
}

impl UsersSpec {
    pub fn at(&self, month: u32) -> u64 {
        match self {
            UsersSpec::Constant(u) => *u,
            UsersSpec::Schedule(s) => s.get(month.saturating_sub(1) as usize).or(s.last()).copied().unwrap_or(0),
        }
    }

    pub fn constant(&self) -> Option<u64> {
        match self {
            UsersSpec::Constant(u) => Some(*u),
            UsersSpec::Schedule(_) => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case", deny_unknown_fields)]
pub enum UptimeSpec {
    #[default]
    Always,
    Schedule {
        down_months: Vec<u32>,
    },
    /// Each month is up with probability `p_up`, drawn from the scenario seed.
    Bernoulli {
        p_up: f64,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ValuationBlock {
    #[serde(default = "default_apr")]
    pub target_apr: f64,
    /// Overrides `1 / target_apr` when present.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pe_ratio: Option<f64>,
    #[serde(default = "default_months")]
    pub months_to_steady: u32,
    /// Published annual income to value against instead of simulated profit.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reference_income_cents: Option<Money>,
    /// Published market value, compared against `income × P/E`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reference_market_value_cents: Option<Money>,
}

fn default_apr() -> f64 {
    DEFAULT_TARGET_APR
}

impl Default for ValuationBlock {
    fn default() -> Self {
        Self {
            target_apr: DEFAULT_TARGET_APR,
            pe_ratio: None,
            months_to_steady: 12,
            reference_income_cents: None,
            reference_market_value_cents: None,
        }
    }
}

impl ScenarioFile {
    pub fn funding_goal(&self) -> Money {
        let s = &self.company.startup;
        s.hardware_cents + s.installation_cents + s.working_capital_cents
    }

    pub fn cost_structure(&self) -> CostStructure {
        let c = &self.company.costs;
        CostStructure {
            admin_fees: c.admin_fees_cents_per_month,
            maintenance_hours_per_month: c.maintenance_hours_per_month,
            maintenance_hourly_rate: c.maintenance_hourly_rate_cents,
            incentive_rate: c.incentive_rate,
        }
    }

    /// Services with their resolved curves. Unit prices are the fixed price
    /// when given, otherwise zero until optimized.
    ///
    /// Panics if a curve is still a file reference; use [`load_scenario`] or
    /// [`ScenarioFile::resolve_curves`] first.
    pub fn services(&self) -> Vec<ServiceSpec> {
        self.company
            .services
            .iter()
            .map(|b| ServiceSpec {
                id: b.id.clone(),
                name: b.name.clone(),
                unit_price: b.unit_price_cents.unwrap_or(Money::ZERO),
                marginal_cost: b.marginal_cost_cents,
                fixed_cost: b.fixed_cost_cents_per_month,
                curve: match &b.curve {
                    CurveSource::Inline(c) => c.clone(),
                    CurveSource::Path(p) => panic!("curve {p} was not resolved"),
                },
            })
            .collect()
    }

    pub fn proposal(&self, services: Vec<ServiceSpec>) -> IpoProposal {
        IpoProposal {
            company_id: self.company.id.clone(),
            funding_goal: self.funding_goal(),
            share_price: self.company.share_price_cents,
            window_months: self.ipo.window_months,
            esop_fraction: self.company.esop_fraction,
            proposer_id: HolderId::new(self.company.proposer.clone()),
            cost_plan: self.cost_structure(),
            service_plan: services,
        }
    }

    pub fn valuation_params(&self) -> Result<ValuationParams> {
        let v = &self.valuation;
        let params = ValuationParams {
            target_apr: v.target_apr,
            pe_ratio: v.pe_ratio.unwrap_or(1.0 / v.target_apr),
            months_to_steady: v.months_to_steady,
        };
        params.validate()?;
        Ok(params)
    }

    /// Replaces curve file references with their contents.
    pub fn resolve_curves(&mut self, base: &Path) -> Vec<FieldError> {
        let mut errors = Vec::new();
        for (i, s) in self.company.services.iter_mut().enumerate() {
            if let CurveSource::Path(rel) = &s.curve {
                let path = base.join(rel);
                let field = format!("company.services[{i}].curve");
                match fs::read_to_string(&path) {
                    Ok(text) => match parse_json::<CurveFile>(&text) {
                        Ok(c) => s.curve = CurveSource::Inline(c.into()),
                        Err(msg) => errors.push(FieldError::new(field, format!("{}: {msg}", path.display()))),
                    },
                    Err(e) => errors.push(FieldError::new(field, format!("cannot read {}: {e}", path.display()))),
                }
            }
        }
        errors
    }

    /// Every invariant violation, not just the first.
    pub fn validation_errors(&self) -> Vec<FieldError> {
        let mut errors = Vec::new();
        let mut curve_errors = Vec::new();
        let mut push = |path: &str, msg: &str| errors.push(FieldError::new(path, msg));
        if self.name.trim().is_empty() {
            push("name", "must not be empty");
        }
        let c = &self.company;
        if c.id.trim().is_empty() {
            push("company.id", "must not be empty");
        }
        if c.proposer.trim().is_empty() {
            push("company.proposer", "must not be empty");
        }
        if !(0.0..1.0).contains(&c.esop_fraction) {
            push("company.esop_fraction", "must lie in [0, 1)");
        }
        if !c.share_price_cents.is_positive() {
            push("company.share_price_cents", "must be positive");
        }
        for (name, v) in [
            ("company.startup.hardware_cents", c.startup.hardware_cents),
            ("company.startup.installation_cents", c.startup.installation_cents),
            ("company.startup.working_capital_cents", c.startup.working_capital_cents),
        ] {
            if v.is_negative() {
                push(name, "must be non-negative");
            }
        }
        let goal = self.funding_goal();
        if !goal.is_positive() {
            push("company.startup", "startup total (the offering goal) must be positive");
        } else if c.share_price_cents.is_positive() && goal.cents() % c.share_price_cents.cents() != 0 {
            push("company.startup", "startup total must be a whole number of shares");
        }
        let costs = &c.costs;
        if !(costs.maintenance_hours_per_month >= 0.0 && costs.maintenance_hours_per_month.is_finite()) {
            push("company.costs.maintenance_hours_per_month", "must be non-negative");
        }
        if costs.maintenance_hourly_rate_cents.is_negative() {
            push("company.costs.maintenance_hourly_rate_cents", "must be non-negative");
        }
        if costs.admin_fees_cents_per_month.is_negative() {
            push("company.costs.admin_fees_cents_per_month", "must be non-negative");
        }
        if !(0.0..=1.0).contains(&costs.incentive_rate) {
            push("company.costs.incentive_rate", "must lie in [0, 1]");
        }
        let mut ids = std::collections::BTreeSet::new();
        for (i, s) in c.services.iter().enumerate() {
            let p = format!("company.services[{i}]");
            if !ids.insert(s.id.as_str()) {
                push(&format!("{p}.id"), "duplicate service id");
            }
            if s.marginal_cost_cents.is_negative() {
                push(&format!("{p}.marginal_cost_cents"), "must be non-negative");
            }
            if s.fixed_cost_cents_per_month.is_negative() {
                push(&format!("{p}.fixed_cost_cents_per_month"), "must be non-negative");
            }
            if s.unit_price_cents.is_some_and(Money::is_negative) {
                push(&format!("{p}.unit_price_cents"), "must be non-negative");
            }
            if let CurveSource::Inline(curve) = &s.curve {
                curve_errors.extend(curve.validation_errors(&format!("{p}.curve")));
            }
        }

        errors.extend(curve_errors);
        let mut push = |path: String, msg: &str| errors.push(FieldError::new(path, msg));
        if self.ipo.window_months < 1 {
            push("ipo.window_months".into(), "must be at least 1");
        }
        for (i, p) in self.ipo.pledges.iter().enumerate() {
            if p.investor.trim().is_empty() {
                push(format!("ipo.pledges[{i}].investor"), "must not be empty");
            }
            if p.month >= self.ipo.window_months {
                push(format!("ipo.pledges[{i}].month"), "must fall inside the funding window");
            }
            let price = c.share_price_cents;
            if !p.amount_cents.is_positive() || (price.is_positive() && p.amount_cents.cents() % price.cents() != 0) {
                push(format!("ipo.pledges[{i}].amount_cents"), "must be a positive whole number of shares");
            }
        }

        let sim = &self.simulation;
        if sim.months < 1 {
            push("simulation.months".into(), "must be at least 1");
        }
        if let UsersSpec::Schedule(s) = &sim.users {
            if s.len() < sim.months as usize {
                push("simulation.users.schedule".into(), "must list users for every simulated month");
            }
        }
        match &sim.uptime {
            UptimeSpec::Always => {}
            UptimeSpec::Schedule { down_months } => {
                if down_months.iter().any(|&m| m < 1 || m > sim.months) {
                    push("simulation.uptime.down_months".into(), "months must lie in 1..=simulation.months");
                }
            }
            UptimeSpec::Bernoulli { p_up } => {
                if !(0.0..=1.0).contains(p_up) {
                    push("simulation.uptime.p_up".into(), "must lie in [0, 1]");
                }
            }
        }
        if !(0.0..=1.0).contains(&sim.reserve_rate) {
            push("simulation.reserve_rate".into(), "must lie in [0, 1]");
        }
        if sim.steady_k < 1 {
            push("simulation.steady_k".into(), "must be at least 1");
        }

        let v = &self.valuation;
        if !(v.target_apr > 0.0 && v.target_apr.is_finite()) {
            push("valuation.target_apr".into(), "must be positive");
        }
        if v.pe_ratio.is_some_and(|x| !(x > 0.0 && x.is_finite())) {
            push("valuation.pe_ratio".into(), "must be positive");
        }
        if v.months_to_steady < 1 {
            push("valuation.months_to_steady".into(), "must be at least 1");
        }
        if v.reference_income_cents.is_some_and(Money::is_negative) {
            push("valuation.reference_income_cents".into(), "must be non-negative");
        }
        if v.reference_market_value_cents.is_some_and(Money::is_negative) {
            push("valuation.reference_market_value_cents".into(), "must be non-negative");
        }
        errors
    }

    pub fn validate(&self) -> Result<()> {
        let errors = self.validation_errors();
        if errors.is_empty() {
            Ok(())
        } else {
            Err(Error::Validation(errors))
        }
    }
}

fn parse_json<T: DeserializeOwned>(text: &str) -> std::result::Result<T, String> {
    let de = &mut serde_json::Deserializer::from_str(text);
    serde_path_to_error::deserialize(de).map_err(|e| {
        let path = e.path().to_string();
        if path == "." {
            e.inner().to_string()
        } else {
            format!("{path}: {}", e.inner())
        }
    })
}

fn read(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|source| Error::Io { path: path.to_path_buf(), source })
}

/// Loads, resolves and validates a scenario file.
pub fn load_scenario(path: impl AsRef<Path>) -> Result<ScenarioFile> {
    let path = path.as_ref();
    let text = read(path)?;
    let mut scenario: ScenarioFile =
        parse_json(&text).map_err(|message| Error::Parse { path: path.to_path_buf(), message })?;
    let base = path.parent().unwrap_or(Path::new("."));
    let mut errors = scenario.resolve_curves(base);
    errors.extend(scenario.validation_errors());
    if !errors.is_empty() {
        return Err(Error::Validation(errors));
    }
    Ok(scenario)
}

pub fn load_curve(path: impl AsRef<Path>) -> Result<PriceUsageCurve> {
    let path = path.as_ref();
    let curve: PriceUsageCurve = parse_json::<CurveFile>(&read(path)?)
        .map_err(|message| Error::Parse { path: path.to_path_buf(), message })?
        .into();
    curve.validate()?;
    Ok(curve)
}

pub fn load_instance(path: impl AsRef<Path>) -> Result<crate::virtualizer::InstanceFile> {
    let path = path.as_ref();
    parse_json(&read(path)?).map_err(|message| Error::Parse { path: path.to_path_buf(), message })
}

/// Command-line style overrides, checked by the same validation as the file.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ScenarioOverrides {
    pub users: Option<u64>,
    pub months: Option<u32>,
    pub seed: Option<u64>,
    pub pe: Option<f64>,
    pub apr: Option<f64>,
}

impl ScenarioOverrides {
    pub fn apply(&self, scenario: &ScenarioFile) -> Result<ScenarioFile> {
        let mut s = scenario.clone();
        if let Some(u) = self.users {
            s.simulation.users = UsersSpec::Constant(u);
        }
        if let Some(m) = self.months {
            s.simulation.months = m;
        }
        if let Some(seed) = self.seed {
            s.simulation.seed = seed;
        }
        if let Some(apr) = self.apr {
            s.valuation.target_apr = apr;
            s.valuation.pe_ratio = None;
        }
        if let Some(pe) = self.pe {
            s.valuation.pe_ratio = Some(pe);
        }
        s.validate()?;
        Ok(s)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReportFormat {
    Json,
    Csv,
}

fn write(path: PathBuf, contents: &[u8]) -> Result<PathBuf> {
    fs::write(&path, contents).map_err(|source| Error::Io { path: path.clone(), source })?;
    Ok(path)
}

pub fn to_json_bytes<T: Serialize>(value: &T) -> Vec<u8> {
    let mut bytes = serde_json::to_vec_pretty(value).expect("report types serialize infallibly");
    bytes.push(b'\n');
    bytes
}

fn csv_bytes<I, R>(header: &[&str], rows: I) -> Result<Vec<u8>>
where
    I: IntoIterator<Item = R>,
    R: IntoIterator<Item = String>,
{
    let mut w = csv::Writer::from_writer(Vec::new());
    let io = |e: csv::Error| Error::Parse { path: PathBuf::from("<csv>"), message: e.to_string() };
    w.write_record(header).map_err(io)?;
    for row in rows {
        w.write_record(row).map_err(io)?;
    }
    w.into_inner().map_err(|e| Error::Parse { path: PathBuf::from("<csv>"), message: e.to_string() })
}

pub const SWEEP_HEADER: [&str; 4] = ["users", "annual_revenue_cents", "annual_cost_cents", "profit_cents"];

pub const STATEMENT_HEADER: [&str; 14] = [
    "month",
    "active_users",
    "revenue_cents",
    "marginal_costs_cents",
    "fixed_costs_cents",
    "maintenance_pay_cents",
    "incentive_pay_cents",
    "depreciation_cents",
    "profit_cents",
    "dividend_paid_cents",
    "reserve_delta_cents",
    "opening_cash_cents",
    "closing_cash_cents",
    "shortfall_cents",
];

pub fn sweep_csv(sweep: &Sweep) -> Result<Vec<u8>> {
    csv_bytes(
        &SWEEP_HEADER,
        sweep.rows.iter().map(|r| {
            [
                r.users.to_string(),
                r.annual_revenue.cents().to_string(),
                r.annual_cost.cents().to_string(),
                r.profit.cents().to_string(),
            ]
        }),
    )
}

pub fn statements_csv(report: &SimulationReport) -> Result<Vec<u8>> {
    csv_bytes(
        &STATEMENT_HEADER,
        report.statements.iter().map(|s| {
            [
                s.month.to_string(),
                s.active_users.to_string(),
                s.revenue().cents().to_string(),
                s.marginal_costs.cents().to_string(),
                s.fixed_costs.cents().to_string(),
                s.maintenance_pay.cents().to_string(),
                s.incentive_pay.cents().to_string(),
                s.depreciation.cents().to_string(),
                s.profit.cents().to_string(),
                s.dividend_paid.cents().to_string(),
                s.reserve_delta.cents().to_string(),
                s.opening_cash.cents().to_string(),
                s.closing_cash.cents().to_string(),
                s.shortfall.cents().to_string(),
            ]
        }),
    )
}

/// Writes report files into `out_dir` (created if missing).
///
/// JSON: `metrics.json` and `report.json`. CSV: `statements.csv` and, when a
/// sweep is given, `sweep.csv`.
pub fn emit_report(
    report: Option<&SimulationReport>,
    sweep: Option<&Sweep>,
    format: ReportFormat,
    out_dir: impl AsRef<Path>,
) -> Result<Vec<PathBuf>> {
    let dir = out_dir.as_ref();
    fs::create_dir_all(dir).map_err(|source| Error::Io { path: dir.to_path_buf(), source })?;
    let mut written = Vec::new();
    match format {
        ReportFormat::Json => {
            if let Some(r) = report {
                written.push(write(dir.join("metrics.json"), &to_json_bytes(&r.metrics))?);
                written.push(write(dir.join("report.json"), &to_json_bytes(r))?);
            }
        }
        ReportFormat::Csv => {
            if let Some(r) = report {
                written.push(write(dir.join("statements.csv"), &statements_csv(r)?)?);
            }
            if let Some(s) = sweep {
                written.push(write(dir.join("sweep.csv"), &sweep_csv(s)?)?);
            }
        }
    }
    Ok(written)
}

/// Writes the resolved scenario (curves inlined) as `scenario.json`.
pub fn emit_scenario_echo(scenario: &ScenarioFile, out_dir: impl AsRef<Path>) -> Result<PathBuf> {
    let dir = out_dir.as_ref();
    fs::create_dir_all(dir).map_err(|source| Error::Io { path: dir.to_path_buf(), source })?;
    write(dir.join("scenario.json"), &to_json_bytes(scenario))
}
