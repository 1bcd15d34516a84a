//! An all-or-nothing offering: one undersubscribed, one oversubscribed, then
//! the proposer's equity grant.
//!
//! ```text
//! cargo run --example ipo
//! ```

use sensorco::ipo::{grant_esop, open_ipo, EsopPlan, IpoProposal, Settlement};
use sensorco::ledger::HolderId;
use sensorco::money::Money;
use sensorco::pricing::CostStructure;

fn proposal() -> IpoProposal {
    IpoProposal {
        company_id: "parking-001".into(),
        funding_goal: Money::from_cents(23_900),
        share_price: Money::from_cents(100),
        window_months: 3,
        esop_fraction: 0.20,
        proposer_id: HolderId::new("proposer"),
        cost_plan: CostStructure::default(),
        service_plan: vec![],
    }
}

fn show(s: &Settlement) {
    match s {
        Settlement::Funded { cap_table, cash, refunds } => {
            println!("funded with {cash}");
            for (h, n) in cap_table.entries() {
                println!("  {h:<10} {n:>4} shares");
            }
            for (h, m) in refunds {
                println!("  refund {h:<10} {m}");
            }
        }
        Settlement::Terminated { refunds } => {
            println!("terminated; everyone refunded");
            for (h, m) in refunds {
                println!("  refund {h:<10} {m}");
            }
        }
    }
}

fn main() -> sensorco::Result<()> {
    let mut thin = open_ipo(proposal(), 0)?;
    thin.pledge(HolderId::new("proposer"), Money::from_cents(3_000), 0)?;
    thin.pledge(HolderId::new("restaurant"), Money::from_cents(10_000), 1)?;
    if let Err(e) = thin.settle(1) {
        println!("settling early: {e}");
    }
    show(&thin.settle(3)?);

    println!();
    let mut busy = open_ipo(proposal(), 0)?;
    for (who, cents, month) in [
        ("proposer", 3_000, 0),
        ("restaurant", 10_000, 0),
        ("erin", 8_000, 1),
        ("frank", 6_000, 2),
        ("grace", 3_000, 2),
    ] {
        busy.pledge(HolderId::new(who), Money::from_cents(cents), month)?;
    }
    println!("pledged {} against a goal of {}", busy.total_pledged(), busy.proposal().funding_goal);
    let settled = busy.settle(3)?;
    show(&settled);

    if let Settlement::Funded { cap_table, .. } = settled {
        let mut plan = EsopPlan::new(HolderId::new("proposer"), 0.20);
        let after = grant_esop(&mut plan, &cap_table)?;
        let p = HolderId::new("proposer");
        println!();
        println!(
            "ESOP: proposer {} -> {} of {} shares ({:.1}%)",
            cap_table.shares_of(&p),
            after.shares_of(&p),
            after.total_shares(),
            100.0 * after.fraction_of(&p)
        );
        println!("second grant: {}", grant_esop(&mut plan, &after).unwrap_err());
    }
    Ok(())
}
