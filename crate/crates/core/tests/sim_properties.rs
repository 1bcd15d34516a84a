use proptest::prelude::*;

use sensorco::scenario::{load_scenario, ScenarioFile, UptimeSpec, UsersSpec};
use sensorco::sim::{break_even_sweep, run_scenario, CompanyState};

fn bundled(name: &str) -> ScenarioFile {
    load_scenario(format!("{}/scenarios/{name}.scenario.json", env!("CARGO_MANIFEST_DIR"))).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn statements_are_consistent(users in prop::collection::vec(0u64..400, 24), down in prop::collection::vec(1u32..=24, 0..6), parking in any::<bool>()) {
        let mut s = bundled(if parking { "parking" } else { "air" });
        s.simulation.months = 24;
        s.simulation.users = UsersSpec::Schedule(users);
        s.simulation.uptime = UptimeSpec::Schedule { down_months: down.clone() };
        let report = run_scenario(&s).unwrap();
        prop_assert_eq!(report.statements.len(), 24);
        let mut cash = None;
        for st in &report.statements {
            prop_assert!(st.is_consistent(), "{:?}", st);
            prop_assert_eq!(st.profit, st.revenue() - st.total_cost());
            if down.contains(&st.month) {
                prop_assert!(st.incentive_pay.cents() == 0);
            }
            if let Some(c) = cash {
                prop_assert_eq!(st.opening_cash, c);
            }
            cash = Some(st.closing_cash);
            prop_assert!(!st.closing_cash.is_negative());
        }
        for t in &report.journal {
            let d: i64 = t.debits().iter().map(|(_, m)| m.cents()).sum();
            let c: i64 = t.credits().iter().map(|(_, m)| m.cents()).sum();
            prop_assert_eq!(d, c);
        }
    }

    #[test]
    fn revenue_grows_with_users(a in 0u64..2_000, b in 0u64..2_000) {
        let mut s = bundled("air");
        let (lo, hi) = (a.min(b), a.max(b));
        s.simulation.users = UsersSpec::Constant(lo);
        let rlo = run_scenario(&s).unwrap().total_revenue();
        s.simulation.users = UsersSpec::Constant(hi);
        let rhi = run_scenario(&s).unwrap().total_revenue();
        prop_assert!(rlo <= rhi);
    }
}

#[test]
fn sweep_is_nearly_linear() {
    for name in ["air", "parking"] {
        let sweep = break_even_sweep(&bundled(name), 0..=100).unwrap();
        for w in sweep.rows.windows(3) {
            let second = w[2].profit.cents() - 2 * w[1].profit.cents() + w[0].profit.cents();
            // per-month cent rounding of revenue and incentive, twelve months
            assert!(second.abs() <= 48, "{name}: {second} at {} users", w[1].users);
        }
        let be = sweep.break_even_users.unwrap();
        let row = |u: u64| sweep.rows.iter().find(|r| r.users == u).unwrap();
        assert!(!row(be).profit.is_negative());
        assert!(row(be - 1).profit.is_negative());
    }
}

#[test]
fn runs_are_deterministic() {
    for name in ["air", "parking"] {
        let mut s = bundled(name);
        s.simulation.months = 36;
        s.simulation.uptime = UptimeSpec::Bernoulli { p_up: 0.7 };
        s.simulation.users = UsersSpec::Constant(400);
        assert_eq!(run_scenario(&s).unwrap(), run_scenario(&s).unwrap());
    }
}

#[test]
fn profitable_company_reaches_steady_profit_and_pays_dividends() {
    let mut s = bundled("air");
    s.simulation.users = UsersSpec::Constant(400);
    s.simulation.months = 12;
    let report = run_scenario(&s).unwrap();
    assert_eq!(report.final_state, CompanyState::SteadyProfit);
    let steady = report.state_history.iter().find(|c| c.to == CompanyState::SteadyProfit).unwrap();
    for st in &report.statements {
        if report.ipo.settled_month + st.month <= steady.month {
            assert_eq!(st.dividend_paid.cents(), 0, "month {}", st.month);
        }
    }
    assert!(report.statements.iter().any(|st| st.dividend_paid.is_positive()));
    let esop = s.company.esop_fraction;
    let proposer = report.final_cap_table.fraction_of(&sensorco::ledger::HolderId::new("proposer"));
    assert!(proposer >= esop - 0.01);
}

#[test]
fn zero_users_is_all_cost() {
    let mut s = bundled("parking");
    s.simulation.users = UsersSpec::Constant(0);
    let report = run_scenario(&s).unwrap();
    assert_eq!(report.total_revenue().cents(), 0);
    assert!(report.statements.iter().all(|st| st.profit.is_negative()));
}

#[test]
fn undersubscribed_offering_terminates() {
    let mut s = bundled("air");
    s.ipo.pledges.truncate(2);
    let report = run_scenario(&s).unwrap();
    assert_eq!(report.final_state, CompanyState::Terminated);
    assert!(report.statements.is_empty());
    assert_eq!(report.ipo.settlement.total_refunded(), report.ipo.total_pledged);
    assert!(report.metrics.notes.iter().any(|n| n.code == "ipo_undersubscribed"));
}

#[test]
fn sustained_losses_end_in_bankruptcy_with_full_liquidation() {
    let mut s = bundled("air");
    s.simulation.users = UsersSpec::Constant(0);
    s.simulation.months = 60;
    s.company.costs.maintenance_hourly_rate_cents = sensorco::Money::from_cents(5_000);
    let report = run_scenario(&s).unwrap();
    assert_eq!(report.final_state, CompanyState::Bankrupt);
    let liq = report.liquidation.as_ref().unwrap();
    assert_eq!(liq.payouts.values().copied().sum::<sensorco::Money>(), liq.pool());
    let last = report.statements.last().unwrap();
    assert!(last.shortfall.is_positive());
}
