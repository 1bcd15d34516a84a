//! First-year revenue and cost against user count for both case studies,
//! with the break-even point.
//!
//! ```text
//! cargo run --example break_even
//! ```

use sensorco::scenario::load_scenario;
use sensorco::sim::break_even_sweep;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    for name in ["air", "parking"] {
        let scenario = load_scenario(format!("{}/scenarios/{name}.scenario.json", env!("CARGO_MANIFEST_DIR")))?;
        let sweep = break_even_sweep(&scenario, 0..=100)?;
        println!("{name}");
        println!("{:>6} {:>10} {:>10} {:>10}", "users", "revenue", "cost", "profit");
        for row in sweep.rows.iter().step_by(10) {
            println!(
                "{:>6} {:>10} {:>10} {:>10}",
                row.users,
                row.annual_revenue.to_string(),
                row.annual_cost.to_string(),
                row.profit.to_string()
            );
        }
        match sweep.break_even_users {
            Some(u) => println!("break-even at {u} users\n"),
            None => println!("no break-even within 100 users\n"),
        }
    }
    Ok(())
}
