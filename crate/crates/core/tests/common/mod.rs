//! Independent oracles and random generators shared by the property tests
//! and the acceptance runner.
#![allow(dead_code)]

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use sensorco::ledger::{issue_equity, transfer_shares, CapTable, HolderId};
use sensorco::money::Money;
use sensorco::pricing::{Objective, PriceUsageCurve};
use sensorco::virtualizer::CompanySite;

/// Plain linear scan over segments, no binary search.
pub fn oracle_usage(points: &[(i64, f64)], price: i64) -> f64 {
    if price <= points[0].0 {
        return points[0].1;
    }
    for w in points.windows(2) {
        let ((p0, u0), (p1, u1)) = (w[0], w[1]);
        if price <= p1 {
            let t = (price - p0) as f64 / (p1 - p0) as f64;
            return u0 + (u1 - u0) * t;
        }
    }
    0.0
}

/// Every cent from 0 to one past the last price; first strict best wins.
pub fn oracle_best_price(points: &[(i64, f64)], zero_pay: f64, users: u64, marginal: i64, objective: Objective) -> i64 {
    let last = points[points.len() - 1].0;
    let paying = 1.0 - zero_pay;
    let mut best = (0i64, f64::NEG_INFINITY);
    for p in 0..=last + 1 {
        let margin = match objective {
            Objective::Revenue => p,
            Objective::Profit => p - marginal,
        };
        let v = margin as f64 * oracle_usage(points, p) * users as f64 * paying;
        if v > best.1 + 1e-9 {
            best = (p, v);
        }
    }
    best.0
}

pub fn random_points(rng: &mut ChaCha8Rng) -> Vec<(i64, f64)> {
    let n = rng.gen_range(2..=8);
    let mut price = rng.gen_range(0..20i64);
    let mut usage = rng.gen_range(0.0..50.0f64);
    let mut pts = Vec::with_capacity(n);
    for _ in 0..n {
        pts.push((price, usage));
        price += rng.gen_range(1..150);
        usage = (usage - rng.gen_range(0.0..usage.max(1e-3))).max(0.0);
        if rng.gen_bool(0.2) {
            usage = pts.last().unwrap().1;
        }
    }
    pts
}

pub fn curve_from(points: &[(i64, f64)], zero_pay: f64) -> PriceUsageCurve {
    PriceUsageCurve::new(points.iter().map(|&(p, u)| (Money::from_cents(p), u)).collect(), zero_pay)
        .expect("generated curves are valid")
}

/// Best objective over all `N^M` labelings (not just canonical ones) with
/// the per-entity cap and optional floor; ties prefer fewer nonempty entities.
pub fn oracle_portfolio(sites: &[CompanySite], n: usize, cap: i64, floor: Option<i64>) -> Option<(f64, usize)> {
    let m = sites.len();
    let mut labels = vec![0usize; m];
    let mut best: Option<(f64, usize)> = None;
    loop {
        let mut loads = vec![0i64; n];
        for (i, &j) in labels.iter().enumerate() {
            loads[j] += sites[i].valuation.cents();
        }
        let ok = loads.iter().all(|&l| l <= cap && floor.is_none_or(|f| l == 0 || l >= f));
        if ok {
            let mut total = 0.0;
            for j in 0..n {
                let members: Vec<&CompanySite> =
                    sites.iter().zip(&labels).filter(|(_, &l)| l == j).map(|(s, _)| s).collect();
                let mut sum = 0.0;
                let mut pairs = 0;
                for a in 0..members.len() {
                    for b in a + 1..members.len() {
                        let (p, q) = (members[a], members[b]);
                        sum += ((p.x_m - q.x_m).powi(2) + (p.y_m - q.y_m).powi(2)).sqrt();
                        pairs += 1;
                    }
                }
                if pairs > 0 {
                    total -= sum / pairs as f64;
                }
            }
            let used = loads.iter().filter(|&&l| l > 0).count();
            best = match best {
                None => Some((total, used)),
                Some((b, u)) if total > b + 1e-9 || ((total - b).abs() <= 1e-9 && used < u) => Some((total, used)),
                keep => keep,
            };
        }
        // odometer increment
        let mut i = m;
        loop {
            if i == 0 {
                return best;
            }
            i -= 1;
            labels[i] += 1;
            if labels[i] < n {
                break;
            }
            labels[i] = 0;
        }
    }
}

/// Clustered points so that grouping matters.
pub fn random_sites(rng: &mut ChaCha8Rng, m: usize) -> Vec<CompanySite> {
    let clusters = rng.gen_range(1..=3);
    let centers: Vec<(f64, f64)> =
        (0..clusters).map(|_| (rng.gen_range(0.0..2000.0), rng.gen_range(0.0..2000.0))).collect();
    (0..m)
        .map(|i| {
            let (cx, cy) = centers[rng.gen_range(0..clusters)];
            CompanySite::new(
                format!("c{i}"),
                Money::from_cents(rng.gen_range(1_000..50_000)),
                cx + rng.gen_range(-100.0..100.0),
                cy + rng.gen_range(-100.0..100.0),
            )
        })
        .collect()
}

/// A cap between the largest company and the total, so it sometimes binds
/// and is sometimes infeasible.
pub fn random_cap(rng: &mut ChaCha8Rng, sites: &[CompanySite]) -> i64 {
    let max = sites.iter().map(|s| s.valuation.cents()).max().unwrap();
    let total: i64 = sites.iter().map(|s| s.valuation.cents()).sum();
    rng.gen_range(max..=total)
}

/// Draws instances until one has a feasible assignment.
pub fn feasible_instance(
    rng: &mut ChaCha8Rng,
    m_range: std::ops::RangeInclusive<usize>,
    n_max: usize,
) -> (Vec<CompanySite>, usize, i64) {
    loop {
        let m = rng.gen_range(m_range.clone());
        let n = rng.gen_range(1..=n_max);
        let sites = random_sites(rng, m);
        let cap = random_cap(rng, &sites);
        if oracle_portfolio(&sites, n, cap, None).is_some() {
            return (sites, n, cap);
        }
    }
}

pub fn random_cap_table(rng: &mut ChaCha8Rng, max_holders: usize) -> CapTable {
    let holders = rng.gen_range(1..=max_holders);
    let mut table = CapTable::new();
    for h in 0..holders {
        table = issue_equity(&table, &HolderId::new(format!("h{h}")), rng.gen_range(1..10_000u64)).unwrap();
    }
    // a holder who sold out keeps a zero entry
    if holders > 1 && rng.gen_bool(0.2) {
        let (from, to) = (HolderId::new("h1"), HolderId::new("h0"));
        table = transfer_shares(&table, &from, &to, table.shares_of(&from)).unwrap();
    }
    table
}
