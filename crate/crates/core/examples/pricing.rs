//! Picks a per-use price from a surveyed demand curve.
//!
//! ```text
//! cargo run --example pricing
//! ```

use sensorco::money::Money;
use sensorco::pricing::{
    annual_revenue_per_user, interpolate_usage, optimize_all, optimize_price, price_objective, Objective,
    PriceUsageCurve, ServiceSpec, DEFAULT_ZERO_PAY_FRACTION,
};

fn main() -> sensorco::Result<()> {
    // usages per user per month at each surveyed price
    let curve = PriceUsageCurve::new(
        vec![
            (Money::from_cents(0), 4.0),
            (Money::from_cents(5), 3.4),
            (Money::from_cents(25), 1.2),
            (Money::from_cents(100), 0.25),
            (Money::from_cents(500), 0.0),
        ],
        DEFAULT_ZERO_PAY_FRACTION,
    )?;
    for cents in [0, 3, 5, 15, 60, 500, 501] {
        println!(
            "n({:>5}) = {:.3}",
            Money::from_cents(cents).to_string(),
            interpolate_usage(&curve, Money::from_cents(cents))?
        );
    }

    let service = ServiceSpec {
        id: "report".into(),
        name: "Hourly report".into(),
        unit_price: Money::ZERO,
        marginal_cost: Money::from_cents(2),
        fixed_cost: Money::ZERO,
        curve,
    };
    for objective in [Objective::Revenue, Objective::Profit] {
        let choice = optimize_price(&service, 100, objective)?;
        println!("{objective:?}: charge {} for {} a month from 100 users", choice.price, choice.expected_monthly_value);
    }

    println!();
    println!("{:>6} {:>10}", "price", "revenue");
    for cents in (0..=60).step_by(10) {
        let v = price_objective(&service, Money::from_cents(cents), 100, Objective::Revenue);
        println!("{:>6} {:>10.2}", Money::from_cents(cents).to_string(), v / 100.0);
    }

    let priced = optimize_all(std::slice::from_ref(&service), Objective::Revenue)?;
    println!("revenue per user per year: {}", annual_revenue_per_user(&priced));
    Ok(())
}
