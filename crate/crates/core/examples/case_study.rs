//! Runs a bundled case study for one year and prints the monthly statements
//! and the table-style metrics.
//!
//! ```text
//! cargo run --example case_study -- air
//! cargo run --example case_study -- parking
//! ```

use sensorco::scenario::load_scenario;
use sensorco::sim::run_scenario;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let which = std::env::args().nth(1).unwrap_or_else(|| "air".into());
    let path = format!("{}/scenarios/{which}.scenario.json", env!("CARGO_MANIFEST_DIR"));
    let scenario = load_scenario(&path)?;
    let report = run_scenario(&scenario)?;

    println!("{} ({} users)", report.scenario, scenario.simulation.users.at(1));
    for p in &report.prices {
        println!("  {:<12} {:>8}", p.id, p.unit_price_cents.to_string());
    }
    println!("  revenue per user per year: {}", report.annual_revenue_per_user);
    println!();
    println!("{:>5} {:>10} {:>10} {:>10} {:>10} {:>10}", "month", "revenue", "cost", "profit", "dividend", "cash");
    for s in &report.statements {
        println!(
            "{:>5} {:>10} {:>10} {:>10} {:>10} {:>10}",
            s.month,
            s.revenue().to_string(),
            s.total_cost().to_string(),
            s.profit.to_string(),
            s.dividend_paid.to_string(),
            s.closing_cash.to_string()
        );
    }
    println!();
    for c in &report.state_history {
        println!("month {:>2}: {:?} -> {:?}", c.month, c.from, c.to);
    }
    let m = &report.metrics;
    println!();
    println!("IPO value          {}", m.ipo_value_cents);
    println!("income / yr        {} ({})", m.income_per_year_cents, m.income_source);
    println!("market value       {}", m.market_value_cents);
    println!("return over IPO    {:.0}%", m.return_over_preipo_percent);
    println!("proposer reward    {}", m.proposer_reward_cents);
    for n in &m.notes {
        println!("note [{}] {}", n.code, n.message);
    }
    Ok(())
}
