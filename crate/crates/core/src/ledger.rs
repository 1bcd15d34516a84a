//! Exact-money accounting: cap tables, balanced transactions, dividend
//! distribution into a reserve fund, liquidation and straight-line
//! depreciation.
//!
//! Every operation here works in whole cents. Where a pro-rata split leaves
//! fractional cents, holders are rounded down and the remainder is routed
//! somewhere explicit (the reserve fund for dividends, largest remainders for
//! liquidation), so the totals always reconcile exactly.

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, FieldError, Result};
use crate::money::Money;

/// Monthly straight-line depreciation, in percent of purchase price.
pub const DEPRECIATION_PERCENT_PER_MONTH: i64 = 10;

/// Months after which an asset is fully written off.
pub const DEPRECIATION_LIFETIME_MONTHS: u32 = (100 / DEPRECIATION_PERCENT_PER_MONTH) as u32;

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct HolderId(String);

impl HolderId {
    pub fn new(id: impl Into<String>) -> Self {
        HolderId(id.into())
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl From<&str> for HolderId {
    fn from(s: &str) -> Self {
        HolderId(s.to_string())
    }
}

impl From<String> for HolderId {
    fn from(s: String) -> Self {
        HolderId(s)
    }
}

impl fmt::Display for HolderId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

/// Share register. Holders that sold out keep a zero entry.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct CapTable {
    entries: BTreeMap<HolderId, u64>,
    total_shares: u64,
}

impl CapTable {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn total_shares(&self) -> u64 {
        self.total_shares
    }

    pub fn shares_of(&self, holder: &HolderId) -> u64 {
        self.entries.get(holder).copied().unwrap_or(0)
    }

    pub fn entries(&self) -> impl Iterator<Item = (&HolderId, u64)> {
        self.entries.iter().map(|(h, &s)| (h, s))
    }

    pub fn is_empty(&self) -> bool {
        self.total_shares == 0
    }

    pub fn fraction_of(&self, holder: &HolderId) -> f64 {
        if self.total_shares == 0 {
            return 0.0;
        }
        self.shares_of(holder) as f64 / self.total_shares as f64
    }

    fn check_invariants(&self) -> bool {
        self.entries.values().sum::<u64>() == self.total_shares
    }
}

/// Issues new shares to `holder`, returning the updated table.
pub fn issue_equity(table: &CapTable, holder: &HolderId, shares: u64) -> Result<CapTable> {
    if shares == 0 {
        return Err(Error::validation("shares", "must be positive"));
    }
    let mut next = table.clone();
    *next.entries.entry(holder.clone()).or_insert(0) += shares;
    next.total_shares += shares;
    debug_assert!(next.check_invariants());
    Ok(next)
}

pub fn transfer_shares(table: &CapTable, from: &HolderId, to: &HolderId, shares: u64) -> Result<CapTable> {
    if shares == 0 {
        return Err(Error::validation("shares", "must be positive"));
    }
    let held = table.shares_of(from);
    if held < shares {
        return Err(Error::InsufficientShares { holder: from.to_string(), held, requested: shares });
    }
    let mut next = table.clone();
    *next.entries.get_mut(from).expect("holder checked above") -= shares;
    *next.entries.entry(to.clone()).or_insert(0) += shares;
    debug_assert!(next.check_invariants());
    Ok(next)
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct AccountId(String);

impl AccountId {
    pub fn new(id: impl Into<String>) -> Self {
        AccountId(id.into())
    }

    pub fn holder(holder: &HolderId) -> Self {
        AccountId(format!("holder:{holder}"))
    }
}

impl From<&str> for AccountId {
    fn from(s: &str) -> Self {
        AccountId(s.to_string())
    }
}

/// A balanced journal entry. Construction fails unless debits equal credits.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Transaction {
    debits: Vec<(AccountId, Money)>,
    credits: Vec<(AccountId, Money)>,
    memo: String,
    month: u32,
}

impl Transaction {
    pub fn new(
        debits: Vec<(AccountId, Money)>,
        credits: Vec<(AccountId, Money)>,
        memo: impl Into<String>,
        month: u32,
    ) -> Result<Self> {
        let d: Money = debits.iter().map(|(_, m)| *m).sum();
        let c: Money = credits.iter().map(|(_, m)| *m).sum();
        if d != c {
            return Err(Error::Unbalanced { debits: d, credits: c });
        }
        Ok(Self { debits, credits, memo: memo.into(), month })
    }

    pub fn debits(&self) -> &[(AccountId, Money)] {
        &self.debits
    }

    pub fn credits(&self) -> &[(AccountId, Money)] {
        &self.credits
    }

    pub fn memo(&self) -> &str {
        &self.memo
    }

    pub fn month(&self) -> u32 {
        self.month
    }

    pub fn amount(&self) -> Money {
        self.debits.iter().map(|(_, m)| *m).sum()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ReserveFund {
    balance: Money,
    contribution_rate: f64,
}

impl ReserveFund {
    pub fn new(contribution_rate: f64) -> Result<Self> {
        Self::with_balance(Money::ZERO, contribution_rate)
    }

    pub fn with_balance(balance: Money, contribution_rate: f64) -> Result<Self> {
        let mut errors = Vec::new();
        if balance.is_negative() {
            errors.push(FieldError::new("reserve.balance", "must be non-negative"));
        }
        if !(0.0..=1.0).contains(&contribution_rate) {
            errors.push(FieldError::new("reserve.contribution_rate", "must lie in [0, 1]"));
        }
        if !errors.is_empty() {
            return Err(Error::Validation(errors));
        }
        Ok(Self { balance, contribution_rate })
    }

    pub fn balance(&self) -> Money {
        self.balance
    }

    pub fn contribution_rate(&self) -> f64 {
        self.contribution_rate
    }

    pub fn deposit(&mut self, amount: Money) {
        debug_assert!(!amount.is_negative());
        self.balance += amount;
    }

    /// Withdraws up to `amount`; returns what was actually drawn.
    pub fn draw(&mut self, amount: Money) -> Money {
        let drawn = amount.max(Money::ZERO).min(self.balance);
        self.balance -= drawn;
        drawn
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DividendOutcome {
    pub payouts: BTreeMap<HolderId, Money>,
    /// `floor(profit × rate)`.
    pub reserve_contribution: Money,
    /// Cents left over after rounding each payout down.
    pub rounding_remainder: Money,
    pub reserve: ReserveFund,
}

impl DividendOutcome {
    pub fn total_paid(&self) -> Money {
        self.payouts.values().sum()
    }

    /// Everything that went into the reserve fund this distribution.
    pub fn reserve_delta(&self) -> Money {
        self.reserve_contribution + self.rounding_remainder
    }
}

/// Splits a period's profit: the reserve takes its contribution first, the
/// rest goes pro-rata to holders rounded down, and leftover cents go back to
/// the reserve.
pub fn distribute_dividend(table: &CapTable, profit: Money, reserve: ReserveFund) -> Result<DividendOutcome> {
    if table.is_empty() {
        return Err(Error::EmptyCapTable);
    }
    if profit.is_negative() {
        return Err(Error::validation("profit", "dividends require non-negative profit"));
    }
    let contribution = profit.mul_floor(reserve.contribution_rate).min(profit);
    let distributable = profit - contribution;
    let total = table.total_shares as i128;
    let payouts: BTreeMap<HolderId, Money> = table
        .entries
        .iter()
        .map(|(h, &s)| {
            let cents = (distributable.cents() as i128 * s as i128) / total;
            (h.clone(), Money::from_cents(cents as i64))
        })
        .collect();
    let paid: Money = payouts.values().sum();
    let remainder = distributable - paid;
    let mut reserve = reserve;
    reserve.deposit(contribution + remainder);
    Ok(DividendOutcome { payouts, reserve_contribution: contribution, rounding_remainder: remainder, reserve })
}

/// Pro-rata split of a liquidation pool using largest remainders, so the
/// payouts sum to `pool` exactly. Ties go to the larger holder, then to the
/// lower holder id.
pub fn liquidate(table: &CapTable, pool: Money) -> Result<BTreeMap<HolderId, Money>> {
    if table.is_empty() {
        return Err(Error::EmptyCapTable);
    }
    if pool.is_negative() {
        return Err(Error::validation("pool", "must be non-negative"));
    }
    let total = table.total_shares as i128;
    let mut parts: Vec<(HolderId, u64, i64, i128)> = table
        .entries
        .iter()
        .map(|(h, &s)| {
            let num = pool.cents() as i128 * s as i128;
            (h.clone(), s, (num / total) as i64, num % total)
        })
        .collect();
    let mut left = pool.cents() - parts.iter().map(|p| p.2).sum::<i64>();
    let mut order: Vec<usize> = (0..parts.len()).collect();
    order.sort_by(|&a, &b| {
        parts[b].3.cmp(&parts[a].3).then(parts[b].1.cmp(&parts[a].1)).then(parts[a].0.cmp(&parts[b].0))
    });
    for idx in order {
        if left == 0 {
            break;
        }
        if parts[idx].3 > 0 {
            parts[idx].2 += 1;
            left -= 1;
        }
    }
    debug_assert_eq!(left, 0);
    Ok(parts.into_iter().map(|(h, _, c, _)| (h, Money::from_cents(c))).collect())
}

/// Straight-line book value: 10% of the purchase price per month, written
/// off completely once the asset lifetime is reached.
pub fn depreciate(purchase_price: Money, months_elapsed: u32) -> Money {
    if months_elapsed >= DEPRECIATION_LIFETIME_MONTHS {
        return Money::ZERO;
    }
    let step = purchase_price.cents() * DEPRECIATION_PERCENT_PER_MONTH / 100;
    (purchase_price - Money::from_cents(step * months_elapsed as i64)).max(Money::ZERO)
}

/// Depreciation expense booked in operating month `month` (1-based).
pub fn depreciation_charge(purchase_price: Money, month: u32) -> Money {
    if month == 0 {
        return Money::ZERO;
    }
    depreciate(purchase_price, month - 1) - depreciate(purchase_price, month)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn h(s: &str) -> HolderId {
        HolderId::from(s)
    }

    fn table(entries: &[(&str, u64)]) -> CapTable {
        entries.iter().fold(CapTable::new(), |t, (holder, n)| issue_equity(&t, &h(holder), *n).unwrap())
    }

    #[test]
    fn issue_into_empty_table() {
        let t = issue_equity(&CapTable::new(), &h("A"), 100).unwrap();
        assert_eq!(t.shares_of(&h("A")), 100);
        assert_eq!(t.total_shares(), 100);
    }

    #[test]
    fn issue_to_second_holder() {
        let t = issue_equity(&table(&[("A", 100)]), &h("B"), 25).unwrap();
        assert_eq!(t.shares_of(&h("A")), 100);
        assert_eq!(t.shares_of(&h("B")), 25);
        assert_eq!(t.total_shares(), 125);
    }

    #[test]
    fn issue_zero_is_rejected() {
        assert!(matches!(issue_equity(&CapTable::new(), &h("A"), 0), Err(Error::Validation(_))));
    }

    #[test]
    fn transfer_full_position() {
        let t = transfer_shares(&table(&[("A", 100)]), &h("A"), &h("B"), 100).unwrap();
        assert_eq!(t.shares_of(&h("A")), 0);
        assert_eq!(t.shares_of(&h("B")), 100);
        assert_eq!(t.total_shares(), 100);
    }

    #[test]
    fn transfer_overdraw_fails() {
        let err = transfer_shares(&table(&[("A", 10)]), &h("A"), &h("B"), 11).unwrap_err();
        assert!(matches!(err, Error::InsufficientShares { held: 10, requested: 11, .. }));
    }

    #[test]
    fn transfer_back_to_majority_holder() {
        let t = transfer_shares(&table(&[("A", 60), ("B", 40)]), &h("B"), &h("A"), 40).unwrap();
        assert_eq!(t.shares_of(&h("A")), 100);
        assert_eq!(t.shares_of(&h("B")), 0);
    }

    #[test]
    fn dividend_single_holder() {
        let out = distribute_dividend(&table(&[("A", 3)]), Money::from_cents(10000), ReserveFund::new(0.10).unwrap())
            .unwrap();
        assert_eq!(out.reserve_contribution, Money::from_cents(1000));
        assert_eq!(out.payouts[&h("A")], Money::from_cents(9000));
        assert_eq!(out.reserve.balance(), Money::from_cents(1000));
    }

    #[test]
    fn dividend_exact_thirds() {
        let out = distribute_dividend(
            &table(&[("A", 2), ("B", 1)]),
            Money::from_cents(10000),
            ReserveFund::new(0.10).unwrap(),
        )
        .unwrap();
        assert_eq!(out.payouts[&h("A")], Money::from_cents(6000));
        assert_eq!(out.payouts[&h("B")], Money::from_cents(3000));
        assert_eq!(out.reserve_delta(), Money::from_cents(1000));
    }

    #[test]
    fn dividend_remainder_goes_to_reserve() {
        let out = distribute_dividend(
            &table(&[("A", 1), ("B", 1), ("C", 1)]),
            Money::from_cents(100),
            ReserveFund::new(0.0).unwrap(),
        )
        .unwrap();
        for holder in ["A", "B", "C"] {
            assert_eq!(out.payouts[&h(holder)], Money::from_cents(33));
        }
        assert_eq!(out.reserve_delta(), Money::from_cents(1));
        // brute-force cent count: hand out one cent at a time round-robin
        // until nobody can take another without exceeding the floor share
        let mut counted = 0;
        let mut given = [0i64; 3];
        for cent in 0..100 {
            let i = cent % 3;
            if given[i] < 100 / 3 {
                given[i] += 1;
                counted += 1;
            }
        }
        assert_eq!(counted + out.reserve_delta().cents(), 100);
    }

    #[test]
    fn dividend_on_empty_table_fails() {
        let err = distribute_dividend(&CapTable::new(), Money::from_cents(100), ReserveFund::new(0.1).unwrap());
        assert!(matches!(err, Err(Error::EmptyCapTable)));
    }

    #[test]
    fn liquidation_uses_largest_remainders() {
        let payouts = liquidate(&table(&[("A", 1), ("B", 1), ("C", 1)]), Money::from_cents(100)).unwrap();
        let total: Money = payouts.values().sum();
        assert_eq!(total, Money::from_cents(100));
        assert_eq!(payouts[&h("A")], Money::from_cents(34));
        assert_eq!(payouts[&h("B")], Money::from_cents(33));
    }

    #[test]
    fn depreciation_examples() {
        assert_eq!(depreciate(Money::from_dollars(179), 1), Money::from_cents(16110));
        assert_eq!(depreciate(Money::from_dollars(179), 0), Money::from_dollars(179));
        assert_eq!(depreciate(Money::from_dollars(39), 10), Money::ZERO);
    }

    #[test]
    fn depreciation_writes_off_odd_cents_at_lifetime() {
        let price = Money::from_cents(17901);
        assert_eq!(depreciate(price, 9), Money::from_cents(17901 - 9 * 1790));
        assert_eq!(depreciate(price, 10), Money::ZERO);
        let charged: Money = (1..=12).map(|m| depreciation_charge(price, m)).sum();
        assert_eq!(charged, price);
    }

    #[test]
    fn unbalanced_transaction_rejected() {
        let err = Transaction::new(
            vec![("cash".into(), Money::from_cents(100))],
            vec![("equity".into(), Money::from_cents(99))],
            "bad",
            0,
        );
        assert!(matches!(err, Err(Error::Unbalanced { .. })));
    }

    #[test]
    fn reserve_rate_bounds() {
        assert!(ReserveFund::new(1.5).is_err());
        assert!(ReserveFund::with_balance(Money::from_cents(-1), 0.1).is_err());
    }
}
