//! Cap table operations, a dividend with a reserve fund, and a liquidation.
//!
//! ```text
//! cargo run --example dividends
//! ```

use sensorco::ledger::{
    depreciate, distribute_dividend, issue_equity, liquidate, transfer_shares, CapTable, HolderId, ReserveFund,
};
use sensorco::money::Money;

fn main() -> sensorco::Result<()> {
    let (a, b, c) = (HolderId::new("ana"), HolderId::new("ben"), HolderId::new("cho"));
    let mut table = CapTable::new();
    table = issue_equity(&table, &a, 150)?;
    table = issue_equity(&table, &b, 60)?;
    table = issue_equity(&table, &c, 29)?;
    table = transfer_shares(&table, &a, &b, 20)?;
    for (h, s) in table.entries() {
        println!("{h:<4} {s:>4} shares ({:.1}%)", 100.0 * table.fraction_of(h));
    }

    let out = distribute_dividend(&table, Money::from_cents(13_337), ReserveFund::new(0.10)?)?;
    println!();
    println!(
        "profit $133.37: reserve takes {}, {} left over from rounding",
        out.reserve_contribution, out.rounding_remainder
    );
    for (h, paid) in &out.payouts {
        println!("  {h:<4} {paid}");
    }
    println!("  paid {} + reserve {} = $133.37", out.total_paid(), out.reserve_delta());

    println!();
    println!("sensor book value over its life:");
    let price = Money::from_cents(17_900);
    for m in [0, 1, 5, 9, 10, 12] {
        println!("  month {m:>2}: {}", depreciate(price, m));
    }

    let pool = Money::from_cents(20_001);
    println!();
    println!("liquidating {pool}:");
    for (h, paid) in liquidate(&table, pool)? {
        println!("  {h:<4} {paid}");
    }
    Ok(())
}
