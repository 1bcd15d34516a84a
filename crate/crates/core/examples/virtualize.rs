//! Groups nearby companies into shared virtual entities, comparing the
//! relaxation heuristic with exhaustive search.
//!
//! ```text
//! cargo run --example virtualize
//! cargo run --release --example virtualize -- 40
//! ```

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use sensorco::money::Money;
use sensorco::virtualizer::{brute_force_portfolio, optimize_portfolio, CompanySite, PortfolioProblem, SolveOptions};

fn main() -> sensorco::Result<()> {
    let m: usize = std::env::args().nth(1).and_then(|a| a.parse().ok()).unwrap_or(10);
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    // three neighbourhoods a couple of km apart
    let centers = [(0.0, 0.0), (2_000.0, 500.0), (800.0, 2_500.0)];
    let sites: Vec<CompanySite> = (0..m)
        .map(|i| {
            let (cx, cy) = centers[i % 3];
            CompanySite::new(
                format!("s{i:02}"),
                Money::from_cents(rng.gen_range(20_000..60_000)),
                cx + rng.gen_range(-150.0..150.0),
                cy + rng.gen_range(-150.0..150.0),
            )
        })
        .collect();
    let total: Money = sites.iter().map(|s| s.valuation).sum();
    let problem = PortfolioProblem::new(sites, 3, Money::from_cents(total.cents() * 2 / 5))?;
    println!("{m} companies worth {total}, 3 entities capped at {}", problem.threshold());

    let heuristic = optimize_portfolio(&problem, &SolveOptions { force_heuristic: true, ..SolveOptions::default() })?;
    println!("relaxation objective {:.1}", heuristic.objective);
    for (id, entity) in heuristic.by_company() {
        print!("{id}:{entity} ");
    }
    println!();

    if problem.is_exhaustive() {
        let exact = brute_force_portfolio(&problem)?;
        println!("exhaustive objective {:.1}, gap {:.3}", exact.objective, exact.objective - heuristic.objective);
    } else {
        println!("{} assignments: too many to enumerate", problem.search_space());
    }
    Ok(())
}
