//! Monthly simulation of one sensor company from proposal to steady profit
//! or bankruptcy.
//!
//! Cash accounting per month: `profit + depreciation` is the operating cash
//! flow (depreciation is a non-cash expense, the hardware was paid for out
//! of the offering). Losses draw on the reserve fund before cash. A month
//! whose obligations exceed cash plus reserve is left unpaid and recorded as
//! a shortfall, after which the lifecycle step liquidates the company.

use std::collections::BTreeMap;
use std::ops::RangeInclusive;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ipo::{grant_esop, open_ipo, EsopPlan, Settlement};
use crate::ledger::{
    depreciate, depreciation_charge, distribute_dividend, liquidate, AccountId, CapTable, HolderId, ReserveFund,
    Transaction,
};
use crate::money::Money;
use crate::pricing::{annual_revenue_per_user, optimize_all, CostStructure, ServiceSpec};
use crate::scenario::{ScenarioFile, UptimeSpec};
use crate::valuation::{
    appreciation_over_preipo, market_valuation, preipo_apr, proposer_reward, ValuationParams, ValuationState,
};

pub const DEFAULT_STEADY_MONTHS: u32 = 3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CompanyState {
    Proposed,
    Funding,
    Operating,
    SteadyProfit,
    Bankrupt,
    Terminated,
}

impl CompanyState {
    pub fn can_transition_to(self, next: CompanyState) -> bool {
        use CompanyState::*;
        matches!(
            (self, next),
            (Proposed, Funding)
                | (Funding, Operating)
                | (Funding, Terminated)
                | (Operating, SteadyProfit)
                | (Operating, Bankrupt)
                | (SteadyProfit, Bankrupt)
        )
    }

    pub fn is_operating(self) -> bool {
        matches!(self, CompanyState::Operating | CompanyState::SteadyProfit)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Liquidation {
    pub month: u32,
    pub cash: Money,
    pub reserve: Money,
    pub asset_value: Money,
    pub payouts: BTreeMap<HolderId, Money>,
}

impl Liquidation {
    pub fn pool(&self) -> Money {
        self.cash + self.reserve + self.asset_value
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SensorCompany {
    pub id: String,
    state: CompanyState,
    pub cap_table: CapTable,
    pub cash: Money,
    pub reserve: ReserveFund,
    pub services: Vec<ServiceSpec>,
    pub costs: CostStructure,
    pub purchase_price: Money,
    pub founding_month: u32,
    pub pre_ipo_value: Money,
    pub valuation: ValuationState,
    pub esop: EsopPlan,
    months_operated: u32,
    pub liquidation: Option<Liquidation>,
}

impl SensorCompany {
    /// A freshly proposed company. `services` should already carry their
    /// chosen unit prices.
    #[allow(clippy::too_many_arguments)]
    pub fn propose(
        id: impl Into<String>,
        services: Vec<ServiceSpec>,
        costs: CostStructure,
        purchase_price: Money,
        pre_ipo_value: Money,
        reserve: ReserveFund,
        esop: EsopPlan,
        founding_month: u32,
    ) -> Self {
        Self {
            id: id.into(),
            state: CompanyState::Proposed,
            cap_table: CapTable::new(),
            cash: Money::ZERO,
            reserve,
            services,
            costs,
            purchase_price,
            founding_month,
            pre_ipo_value,
            valuation: ValuationState::at_founding(pre_ipo_value),
            esop,
            months_operated: 0,
            liquidation: None,
        }
    }

    pub fn state(&self) -> CompanyState {
        self.state
    }

    pub fn months_operated(&self) -> u32 {
        self.months_operated
    }

    fn transition(&mut self, next: CompanyState) -> Result<()> {
        if !self.state.can_transition_to(next) {
            return Err(Error::InvalidState {
                expected: "a legal lifecycle transition",
                found: format!("{:?} -> {:?}", self.state, next),
            });
        }
        self.state = next;
        Ok(())
    }

    pub fn start_funding(&mut self) -> Result<()> {
        self.transition(CompanyState::Funding)
    }

    /// Applies an offering outcome. On success the startup spend (hardware
    /// and installation) leaves the raised cash immediately.
    pub fn apply_settlement(&mut self, settlement: &Settlement, startup_spend: Money) -> Result<()> {
        match settlement {
            Settlement::Funded { cap_table, cash, .. } => {
                if startup_spend > *cash {
                    return Err(Error::validation("startup", "startup spend exceeds the funds raised"));
                }
                self.transition(CompanyState::Operating)?;
                self.cap_table = cap_table.clone();
                self.cash = *cash - startup_spend;
            }
            Settlement::Terminated { .. } => self.transition(CompanyState::Terminated)?,
        }
        Ok(())
    }

    pub fn book_value(&self) -> Money {
        depreciate(self.purchase_price, self.months_operated)
    }

    /// A funded company with the given holders, for tests and examples.
    pub fn operating(mut self, cap_table: CapTable, cash: Money) -> Self {
        self.state = CompanyState::Operating;
        self.cap_table = cap_table;
        self.cash = cash;
        self
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ScenarioMonth {
    pub month: u32,
    pub active_users: u64,
    pub uptime_ok: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MonthlyStatement {
    pub month: u32,
    pub active_users: u64,
    pub revenue_by_service: Vec<Money>,
    pub marginal_costs: Money,
    /// Per-service fixed costs plus administrative fees.
    pub fixed_costs: Money,
    pub maintenance_pay: Money,
    pub incentive_pay: Money,
    pub depreciation: Money,
    pub profit: Money,
    pub dividend_paid: Money,
    pub dividends: BTreeMap<HolderId, Money>,
    /// Positive when money went into the reserve, negative when drawn.
    pub reserve_delta: Money,
    pub opening_cash: Money,
    pub closing_cash: Money,
    /// Cash obligations left unpaid because cash and reserve ran out.
    pub shortfall: Money,
}

impl MonthlyStatement {
    pub fn revenue(&self) -> Money {
        self.revenue_by_service.iter().sum()
    }

    pub fn total_cost(&self) -> Money {
        self.marginal_costs + self.fixed_costs + self.maintenance_pay + self.incentive_pay + self.depreciation
    }

    /// Profit identity and cash continuity.
    pub fn is_consistent(&self) -> bool {
        self.profit == self.revenue() - self.total_cost()
            && self.closing_cash
                == self.opening_cash + self.profit + self.depreciation - self.dividend_paid - self.reserve_delta
                    + self.shortfall
            && self.dividend_paid == self.dividends.values().sum()
    }
}

/// Runs one operating month: revenue at the company's unit prices, costs,
/// and either a dividend (steady companies with positive profit) or a loss
/// drawn from reserve and cash.
pub fn step_month(company: &SensorCompany, month: &ScenarioMonth) -> Result<(SensorCompany, MonthlyStatement)> {
    if !company.state.is_operating() {
        return Err(Error::InvalidState {
            expected: "operating or steady-profit company",
            found: format!("{:?}", company.state),
        });
    }
    let mut next = company.clone();
    next.months_operated += 1;
    let users = month.active_users as f64;

    let mut revenue_by_service = Vec::with_capacity(company.services.len());
    let mut marginal = Money::ZERO;
    for s in &company.services {
        let paid_uses = s.paying_usage_per_user() * users;
        revenue_by_service.push(Money::round_cents(s.unit_price.cents() as f64 * paid_uses));
        marginal += Money::round_cents(s.marginal_cost.cents() as f64 * paid_uses);
    }
    let revenue: Money = revenue_by_service.iter().sum();
    let fixed_costs = company.services.iter().map(|s| s.fixed_cost).sum::<Money>() + company.costs.admin_fees;
    let maintenance_pay = company.costs.maintenance_pay();
    let incentive_pay = if month.uptime_ok { revenue.mul_round(company.costs.incentive_rate) } else { Money::ZERO };
    let depreciation = depreciation_charge(company.purchase_price, next.months_operated);
    let profit = revenue - (marginal + fixed_costs + maintenance_pay + incentive_pay + depreciation);

    let opening_cash = company.cash;
    let cash_flow = profit + depreciation;
    let mut dividend_paid = Money::ZERO;
    let mut dividends = BTreeMap::new();
    let mut reserve_delta = Money::ZERO;
    let mut shortfall = Money::ZERO;

    if !cash_flow.is_negative() {
        next.cash += cash_flow;
        if company.state == CompanyState::SteadyProfit && profit.is_positive() {
            let out = distribute_dividend(&company.cap_table, profit, company.reserve)?;
            dividend_paid = out.total_paid();
            reserve_delta = out.reserve_delta();
            next.cash -= dividend_paid + reserve_delta;
            next.reserve = out.reserve;
            dividends = out.payouts;
        }
    } else {
        let need = -cash_flow;
        if need <= next.cash + next.reserve.balance() {
            let drawn = next.reserve.draw(need);
            next.cash -= need - drawn;
            reserve_delta = -drawn;
        } else {
            shortfall = need;
        }
    }

    let statement = MonthlyStatement {
        month: next.months_operated,
        active_users: month.active_users,
        revenue_by_service,
        marginal_costs: marginal,
        fixed_costs,
        maintenance_pay,
        incentive_pay,
        depreciation,
        profit,
        dividend_paid,
        dividends,
        reserve_delta,
        opening_cash,
        closing_cash: next.cash,
        shortfall,
    };
    debug_assert!(statement.is_consistent());
    debug_assert!(!next.cash.is_negative());
    Ok((next, statement))
}

#[derive(Debug, Clone, PartialEq)]
pub struct LifecycleParams {
    pub steady_months: u32,
    pub pe_ratio: f64,
}

impl Default for LifecycleParams {
    fn default() -> Self {
        Self { steady_months: DEFAULT_STEADY_MONTHS, pe_ratio: ValuationParams::default().pe_ratio }
    }
}

/// Annualized earnings over the last (up to) twelve statements.
pub fn trailing_annual_earnings(history: &[MonthlyStatement]) -> Money {
    let window = &history[history.len().saturating_sub(12)..];
    if window.is_empty() {
        return Money::ZERO;
    }
    let sum: Money = window.iter().map(|s| s.profit).sum();
    sum.mul_round(12.0 / window.len() as f64)
}

/// Applies end-of-month state changes: liquidation after an unpaid month,
/// promotion to steady profit after `k` profitable months in a row (which
/// switches to market valuation and grants the ESOP), and market revaluation
/// while steady.
pub fn lifecycle_transition(
    company: &SensorCompany,
    history: &[MonthlyStatement],
    params: &LifecycleParams,
) -> Result<SensorCompany> {
    let mut next = company.clone();
    if !company.state.is_operating() {
        return Ok(next);
    }
    let Some(last) = history.last() else {
        return Ok(next);
    };

    if last.shortfall.is_positive() {
        next.transition(CompanyState::Bankrupt)?;
        let asset_value = next.book_value();
        let reserve = next.reserve.draw(next.reserve.balance());
        let cash = next.cash;
        let pool = cash + reserve + asset_value;
        let payouts = liquidate(&next.cap_table, pool)?;
        next.cash = Money::ZERO;
        next.valuation.current_value = Money::ZERO;
        next.liquidation = Some(Liquidation { month: last.month, cash, reserve, asset_value, payouts });
        return Ok(next);
    }

    let k = params.steady_months as usize;
    if company.state == CompanyState::Operating
        && k > 0
        && history.len() >= k
        && history[history.len() - k..].iter().all(|s| s.profit.is_positive())
    {
        next.transition(CompanyState::SteadyProfit)?;
        next.cap_table = grant_esop(&mut next.esop, &next.cap_table)?;
    }
    if next.state == CompanyState::SteadyProfit {
        let earnings = trailing_annual_earnings(history).max(Money::ZERO);
        next.valuation = next.valuation.to_market(earnings, params.pe_ratio)?;
    }
    Ok(next)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PricedService {
    pub id: String,
    pub name: String,
    pub unit_price_cents: Money,
    pub paying_usages_per_user_per_month: f64,
    pub annual_revenue_per_user_cents: Money,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StateChange {
    /// Months since the proposal; operating month `k` is `settled_month + k`.
    pub month: u32,
    pub from: CompanyState,
    pub to: CompanyState,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Note {
    pub code: String,
    pub message: String,
}

/// The table-style figures reported for a run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FinancialMetrics {
    pub scenario: String,
    pub users: Option<u64>,
    pub ipo_startup_cents: Money,
    pub ipo_working_capital_cents: Money,
    pub ipo_value_cents: Money,
    pub annual_revenue_per_user_cents: Money,
    pub simulated_income_per_year_cents: Money,
    pub income_per_year_cents: Money,
    pub income_source: String,
    pub pe_ratio: f64,
    pub market_value_cents: Money,
    pub reference_market_value_cents: Option<Money>,
    pub implied_pe_ratio: Option<f64>,
    pub break_even_users: Option<u64>,
    pub return_over_preipo_percent: f64,
    pub reference_return_over_preipo_percent: Option<f64>,
    pub preipo_apr: Option<f64>,
    pub proposer_reward_cents: Money,
    pub reference_proposer_reward_cents: Option<Money>,
    pub admin_hourly_rate_cents: Money,
    pub admin_hours_per_year: f64,
    pub final_state: CompanyState,
    pub notes: Vec<Note>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IpoSummary {
    pub goal: Money,
    pub total_pledged: Money,
    pub settled_month: u32,
    pub settlement: Settlement,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulationReport {
    pub scenario: String,
    pub ipo: IpoSummary,
    pub prices: Vec<PricedService>,
    pub annual_revenue_per_user: Money,
    pub statements: Vec<MonthlyStatement>,
    pub state_history: Vec<StateChange>,
    pub final_state: CompanyState,
    pub final_cash: Money,
    pub final_reserve: Money,
    pub final_cap_table: CapTable,
    pub valuation: ValuationState,
    pub liquidation: Option<Liquidation>,
    pub journal: Vec<Transaction>,
    pub metrics: FinancialMetrics,
}

impl SimulationReport {
    pub fn total_revenue(&self) -> Money {
        self.statements.iter().map(MonthlyStatement::revenue).sum()
    }

    pub fn total_cost(&self) -> Money {
        self.statements.iter().map(MonthlyStatement::total_cost).sum()
    }

    pub fn cumulative_profit(&self) -> Money {
        self.statements.iter().map(|s| s.profit).sum()
    }
}

/// Month-by-month users and uptime for a scenario.
pub fn scenario_months(scenario: &ScenarioFile) -> Vec<ScenarioMonth> {
    let sim = &scenario.simulation;
    let mut rng = ChaCha8Rng::seed_from_u64(sim.seed);
    (1..=sim.months)
        .map(|month| {
            let uptime_ok = match &sim.uptime {
                UptimeSpec::Always => true,
                UptimeSpec::Schedule { down_months } => !down_months.contains(&month),
                UptimeSpec::Bernoulli { p_up } => rng.gen_bool(*p_up),
            };
            ScenarioMonth { month, active_users: sim.users.at(month), uptime_ok }
        })
        .collect()
}

fn journal_entry(
    journal: &mut Vec<Transaction>,
    debits: Vec<(AccountId, Money)>,
    credits: Vec<(AccountId, Money)>,
    memo: &str,
    month: u32,
) -> Result<()> {
    let debits: Vec<_> = debits.into_iter().filter(|(_, m)| !m.is_negative() && m.cents() != 0).collect();
    let credits: Vec<_> = credits.into_iter().filter(|(_, m)| !m.is_negative() && m.cents() != 0).collect();
    if debits.is_empty() && credits.is_empty() {
        return Ok(());
    }
    journal.push(Transaction::new(debits, credits, memo, month)?);
    Ok(())
}

/// Runs the offering and then the operating months of a validated scenario.
pub fn run_scenario(scenario: &ScenarioFile) -> Result<SimulationReport> {
    let params = scenario.valuation_params()?;
    let services = optimize_all(&scenario.services(), scenario.company.price_objective)?;
    let services: Vec<ServiceSpec> = scenario
        .company
        .services
        .iter()
        .zip(services)
        .map(|(block, optimized)| match block.unit_price_cents {
            Some(p) => ServiceSpec { unit_price: p, ..optimized },
            None => optimized,
        })
        .collect();

    let proposal = scenario.proposal(services.clone());
    let startup = &scenario.company.startup;
    let mut company = SensorCompany::propose(
        scenario.company.id.clone(),
        services.clone(),
        scenario.cost_structure(),
        startup.hardware_cents,
        proposal.funding_goal,
        ReserveFund::new(scenario.simulation.reserve_rate)?,
        EsopPlan::new(proposal.proposer_id.clone(), proposal.esop_fraction),
        proposal.window_months,
    );
    let mut state_history = Vec::new();
    let mut record = |month: u32, from: CompanyState, to: CompanyState| {
        if from != to {
            state_history.push(StateChange { month, from, to });
        }
    };
    let mut journal = Vec::new();

    let from = company.state();
    company.start_funding()?;
    record(0, from, company.state());
    let mut round = open_ipo(proposal.clone(), 0)?;
    let mut pledges = scenario.ipo.pledges.clone();
    pledges.sort_by_key(|p| p.month);
    for p in &pledges {
        round.pledge(HolderId::new(p.investor.clone()), p.amount_cents, p.month)?;
    }
    let settled_month = round.closes_at();
    let settlement = round.settle(settled_month)?;
    let from = company.state();
    let startup_spend = startup.hardware_cents + startup.installation_cents;
    company.apply_settlement(&settlement, startup_spend)?;
    record(settled_month, from, company.state());

    let mut pledged: BTreeMap<HolderId, Money> = BTreeMap::new();
    for p in round.pledges() {
        *pledged.entry(p.investor.clone()).or_insert(Money::ZERO) += p.amount;
    }
    journal_entry(
        &mut journal,
        vec![(AccountId::new("escrow"), round.total_pledged())],
        pledged.iter().map(|(h, m)| (AccountId::holder(h), *m)).collect(),
        "pledges received",
        settled_month,
    )?;
    let mut credits: Vec<(AccountId, Money)> =
        settlement.refunds().iter().map(|(h, m)| (AccountId::holder(h), *m)).collect();
    credits.push((AccountId::new("cash"), settlement.retained()));
    journal_entry(
        &mut journal,
        vec![(AccountId::new("escrow"), round.total_pledged())],
        credits,
        "offering settled",
        settled_month,
    )?;
    if company.state() == CompanyState::Operating {
        journal_entry(
            &mut journal,
            vec![
                (AccountId::new("equipment"), startup.hardware_cents),
                (AccountId::new("installation"), startup.installation_cents),
            ],
            vec![(AccountId::new("cash"), startup_spend)],
            "startup spend",
            settled_month,
        )?;
    }

    let lifecycle = LifecycleParams { steady_months: scenario.simulation.steady_k, pe_ratio: params.pe_ratio };
    let mut statements: Vec<MonthlyStatement> = Vec::new();
    if company.state().is_operating() {
        for month in scenario_months(scenario) {
            let (stepped, statement) = step_month(&company, &month)?;
            let operating_month = settled_month + statement.month;
            if statement.dividend_paid.is_positive() || statement.reserve_delta.is_positive() {
                let mut credits: Vec<(AccountId, Money)> =
                    statement.dividends.iter().map(|(h, m)| (AccountId::holder(h), *m)).collect();
                credits.push((AccountId::new("reserve"), statement.reserve_delta));
                journal_entry(
                    &mut journal,
                    vec![(AccountId::new("retained_earnings"), statement.profit)],
                    credits,
                    "dividend",
                    operating_month,
                )?;
            }
            statements.push(statement);
            let from = stepped.state();
            company = lifecycle_transition(&stepped, &statements, &lifecycle)?;
            record(operating_month, from, company.state());
            if let Some(l) = company.liquidation.as_ref().filter(|_| company.state() == CompanyState::Bankrupt) {
                journal_entry(
                    &mut journal,
                    vec![
                        (AccountId::new("cash"), l.cash),
                        (AccountId::new("reserve"), l.reserve),
                        (AccountId::new("equipment"), l.asset_value),
                    ],
                    l.payouts.iter().map(|(h, m)| (AccountId::holder(h), *m)).collect(),
                    "liquidation",
                    operating_month,
                )?;
                break;
            }
        }
    }

    let prices = services
        .iter()
        .map(|s| PricedService {
            id: s.id.clone(),
            name: s.name.clone(),
            unit_price_cents: s.unit_price,
            paying_usages_per_user_per_month: s.paying_usage_per_user(),
            annual_revenue_per_user_cents: annual_revenue_per_user(std::slice::from_ref(s)),
        })
        .collect();
    let annual_revenue = annual_revenue_per_user(&services);

    let mut report = SimulationReport {
        scenario: scenario.name.clone(),
        ipo: IpoSummary {
            goal: proposal.funding_goal,
            total_pledged: round.total_pledged(),
            settled_month,
            settlement,
        },
        prices,
        annual_revenue_per_user: annual_revenue,
        statements,
        state_history,
        final_state: company.state(),
        final_cash: company.cash,
        final_reserve: company.reserve.balance(),
        final_cap_table: company.cap_table.clone(),
        valuation: company.valuation.clone(),
        liquidation: company.liquidation.clone(),
        journal,
        metrics: empty_metrics(),
    };
    report.metrics = financial_metrics(scenario, &report, &params)?;
    Ok(report)
}

fn empty_metrics() -> FinancialMetrics {
    FinancialMetrics {
        scenario: String::new(),
        users: None,
        ipo_startup_cents: Money::ZERO,
        ipo_working_capital_cents: Money::ZERO,
        ipo_value_cents: Money::ZERO,
        annual_revenue_per_user_cents: Money::ZERO,
        simulated_income_per_year_cents: Money::ZERO,
        income_per_year_cents: Money::ZERO,
        income_source: String::new(),
        pe_ratio: 0.0,
        market_value_cents: Money::ZERO,
        reference_market_value_cents: None,
        implied_pe_ratio: None,
        break_even_users: None,
        return_over_preipo_percent: 0.0,
        reference_return_over_preipo_percent: None,
        preipo_apr: None,
        proposer_reward_cents: Money::ZERO,
        reference_proposer_reward_cents: None,
        admin_hourly_rate_cents: Money::ZERO,
        admin_hours_per_year: 0.0,
        final_state: CompanyState::Proposed,
        notes: Vec::new(),
    }
}

/// Relative gap above which a reference market value is flagged.
const MARKET_VALUE_FLAG_TOLERANCE: f64 = 0.01;

fn financial_metrics(
    scenario: &ScenarioFile,
    report: &SimulationReport,
    params: &ValuationParams,
) -> Result<FinancialMetrics> {
    let startup = &scenario.company.startup;
    let val = &scenario.valuation;
    let ipo_value = report.ipo.goal;
    let first_year = &report.statements[..report.statements.len().min(12)];
    let simulated_income = if first_year.is_empty() {
        Money::ZERO
    } else {
        first_year.iter().map(|s| s.profit).sum::<Money>().mul_round(12.0 / first_year.len() as f64)
    };
    let (income, income_source) = match val.reference_income_cents {
        Some(r) => (r, "reference"),
        None => (simulated_income, "simulated"),
    };
    let pe = params.pe_ratio;
    let market_value = market_valuation(income, pe)?.max(Money::ZERO);
    let esop = scenario.company.esop_fraction;
    let mut notes = Vec::new();

    let implied_pe = val
        .reference_market_value_cents
        .filter(|_| income.is_positive())
        .map(|r| r.cents() as f64 / income.cents() as f64);
    if let Some(reference) = val.reference_market_value_cents {
        let gap = (market_value - reference).abs().cents() as f64;
        if gap > MARKET_VALUE_FLAG_TOLERANCE * reference.cents().max(1) as f64 {
            notes.push(Note {
                code: "market_value_mismatch".into(),
                message: format!(
                    "income {income}/yr x P/E {pe:.2} = {market_value}, but the reference market value is {reference} (implied P/E {})",
                    implied_pe.map_or_else(|| "n/a".to_string(), |p| format!("{p:.2}"))
                ),
            });
        }
    }
    if income_source == "reference" && income != simulated_income {
        notes.push(Note {
            code: "income_not_simulated".into(),
            message: format!(
                "reference income {income}/yr differs from the simulated first-year profit {simulated_income}"
            ),
        });
    }
    let preipo = match preipo_apr(pe, income, ipo_value, params.months_to_steady) {
        Ok(a) => Some(a),
        Err(e) => {
            notes.push(Note { code: "preipo_apr_undefined".into(), message: e.to_string() });
            None
        }
    };
    if report.final_state == CompanyState::Terminated {
        notes.push(Note {
            code: "ipo_undersubscribed".into(),
            message: "offering did not reach its goal; all pledges refunded".into(),
        });
    }
    let pct = |v: Money| if ipo_value.is_positive() { appreciation_over_preipo(v, ipo_value).ok() } else { None };

    Ok(FinancialMetrics {
        scenario: scenario.name.clone(),
        users: scenario.simulation.users.constant(),
        ipo_startup_cents: startup.hardware_cents + startup.installation_cents,
        ipo_working_capital_cents: startup.working_capital_cents,
        ipo_value_cents: ipo_value,
        annual_revenue_per_user_cents: report.annual_revenue_per_user,
        simulated_income_per_year_cents: simulated_income,
        income_per_year_cents: income,
        income_source: income_source.into(),
        pe_ratio: pe,
        market_value_cents: market_value,
        reference_market_value_cents: val.reference_market_value_cents,
        implied_pe_ratio: implied_pe,
        break_even_users: None,
        return_over_preipo_percent: pct(market_value).unwrap_or(0.0),
        reference_return_over_preipo_percent: val.reference_market_value_cents.and_then(pct),
        preipo_apr: preipo,
        proposer_reward_cents: proposer_reward(market_value, esop)?,
        reference_proposer_reward_cents: val
            .reference_market_value_cents
            .map(|r| proposer_reward(r, esop))
            .transpose()?,
        admin_hourly_rate_cents: scenario.company.costs.maintenance_hourly_rate_cents,
        admin_hours_per_year: scenario.company.costs.maintenance_hours_per_month * 12.0,
        final_state: report.final_state,
        notes,
    })
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SweepRow {
    pub users: u64,
    pub annual_revenue: Money,
    pub annual_cost: Money,
    pub profit: Money,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Sweep {
    pub rows: Vec<SweepRow>,
    pub break_even_users: Option<u64>,
}

/// One first-year simulation per user count; break-even is the smallest
/// count whose cumulative profit is non-negative.
pub fn break_even_sweep(scenario: &ScenarioFile, users: RangeInclusive<u64>) -> Result<Sweep> {
    if users.is_empty() {
        return Err(Error::validation("users", "sweep range is empty"));
    }
    let mut rows = Vec::new();
    for u in users {
        let mut s = scenario.clone();
        s.simulation.users = crate::scenario::UsersSpec::Constant(u);
        s.simulation.months = 12;
        let report = run_scenario(&s)?;
        if report.final_state == CompanyState::Terminated {
            return Err(Error::validation("ipo.pledges", "offering does not reach its goal, nothing to sweep"));
        }
        let annual_revenue = report.total_revenue();
        let annual_cost = report.total_cost();
        rows.push(SweepRow { users: u, annual_revenue, annual_cost, profit: annual_revenue - annual_cost });
    }
    let break_even_users = rows.iter().find(|r| !r.profit.is_negative()).map(|r| r.users);
    Ok(Sweep { rows, break_even_users })
}

/// User counts swept when a run reports its break-even point.
pub const DEFAULT_SWEEP_USERS: RangeInclusive<u64> = 0..=100;

/// [`run_scenario`] plus a first-year sweep over `users`, with the
/// break-even count copied into the metrics. Undersubscribed offerings have
/// no sweep.
pub fn run_with_break_even(
    scenario: &ScenarioFile,
    users: RangeInclusive<u64>,
) -> Result<(SimulationReport, Option<Sweep>)> {
    let mut report = run_scenario(scenario)?;
    if report.final_state == CompanyState::Terminated {
        return Ok((report, None));
    }
    let sweep = break_even_sweep(scenario, users)?;
    report.metrics.break_even_users = sweep.break_even_users;
    Ok((report, Some(sweep)))
}
