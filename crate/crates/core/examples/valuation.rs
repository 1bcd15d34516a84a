//! Earnings-multiple valuation and investor returns for the two case studies.
//!
//! ```text
//! cargo run --example valuation
//! ```

use sensorco::money::Money;
use sensorco::valuation::{
    appreciation_over_preipo, asset_valuation, market_valuation, pe_from_apr, preipo_apr, proposer_reward,
};

fn main() -> sensorco::Result<()> {
    let pe = pe_from_apr(0.041)?;
    println!("target APR 4.1% -> P/E {pe:.2}");
    println!();

    let rows = [
        ("air", Money::from_cents(17_900), Money::from_cents(11_600), Money::from_cents(16_800), 0.10),
        ("parking", Money::from_cents(3_900), Money::ZERO, Money::from_cents(2_375), 0.20),
    ];
    println!(
        "{:<8} {:>9} {:>9} {:>10} {:>8} {:>9} {:>9}",
        "", "IPO", "income", "market", "return", "APR(12m)", "proposer"
    );
    for (name, hw, inst, income, esop) in rows {
        let ipo = asset_valuation(hw, inst, Money::from_cents(20_000))?;
        let market = market_valuation(income, 24.4)?;
        let apr = preipo_apr(24.4, income, ipo, 12).map_or("n/a".to_string(), |r| format!("{:.0}%", 100.0 * r));
        println!(
            "{name:<8} {:>9} {:>9} {:>10} {:>7.0}% {:>9} {:>9}",
            ipo.to_string(),
            income.to_string(),
            market.to_string(),
            appreciation_over_preipo(market, ipo)?,
            apr,
            proposer_reward(market, esop)?.to_string()
        );
    }

    // valued below its startup cost, with a horizon that doesn't divide a year
    match preipo_apr(24.4, Money::from_cents(500), Money::from_cents(49_500), 5) {
        Ok(r) => println!("loss-making APR {r:.3}"),
        Err(e) => println!("loss-making company: {e}"),
    }
    Ok(())
}
