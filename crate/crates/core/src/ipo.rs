//! All-or-nothing initial offerings.
//!
//! A round collects pledges for `window_months`. At settlement it either
//! keeps exactly the funding goal (issuing shares first-come-first-served and
//! refunding the excess) or keeps nothing and refunds every pledge.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, FieldError, Result};
use crate::ledger::{issue_equity, CapTable, HolderId};
use crate::money::Money;
use crate::pricing::{CostStructure, ServiceSpec};

pub const DEFAULT_SHARE_PRICE: Money = Money::from_cents(100);
pub const DEFAULT_WINDOW_MONTHS: u32 = 3;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IpoProposal {
    pub company_id: String,
    pub funding_goal: Money,
    pub share_price: Money,
    pub window_months: u32,
    pub esop_fraction: f64,
    pub proposer_id: HolderId,
    pub cost_plan: CostStructure,
    pub service_plan: Vec<ServiceSpec>,
}

impl IpoProposal {
    pub fn validation_errors(&self) -> Vec<FieldError> {
        let mut errors = Vec::new();
        if !self.funding_goal.is_positive() {
            errors.push(FieldError::new("funding_goal", "must be positive"));
        }
        if !self.share_price.is_positive() {
            errors.push(FieldError::new("share_price", "must be positive"));
        } else if self.funding_goal.is_positive() && self.funding_goal.cents() % self.share_price.cents() != 0 {
            errors.push(FieldError::new(
                "funding_goal",
                format!("{} is not a whole number of shares at {}", self.funding_goal, self.share_price),
            ));
        }
        if self.window_months < 1 {
            errors.push(FieldError::new("window_months", "must be at least 1"));
        }
        if !(0.0..1.0).contains(&self.esop_fraction) {
            errors.push(FieldError::new("esop_fraction", "must lie in [0, 1)"));
        }
        errors.extend(self.cost_plan.validation_errors("cost_plan"));
        for (i, s) in self.service_plan.iter().enumerate() {
            errors.extend(s.validation_errors(&format!("service_plan[{i}]")));
        }
        errors
    }

    pub fn goal_shares(&self) -> u64 {
        (self.funding_goal.cents() / self.share_price.cents()) as u64
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Pledge {
    pub investor: HolderId,
    pub amount: Money,
    pub month: u32,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RoundState {
    Open,
    Funded,
    Terminated,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "outcome", rename_all = "snake_case")]
pub enum Settlement {
    Funded { cap_table: CapTable, cash: Money, refunds: BTreeMap<HolderId, Money> },
    Terminated { refunds: BTreeMap<HolderId, Money> },
}

impl Settlement {
    pub fn retained(&self) -> Money {
        match self {
            Settlement::Funded { cash, .. } => *cash,
            Settlement::Terminated { .. } => Money::ZERO,
        }
    }

    pub fn refunds(&self) -> &BTreeMap<HolderId, Money> {
        match self {
            Settlement::Funded { refunds, .. } | Settlement::Terminated { refunds } => refunds,
        }
    }

    pub fn total_refunded(&self) -> Money {
        self.refunds().values().sum()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FundingRound {
    proposal: IpoProposal,
    opened_month: u32,
    pledges: Vec<Pledge>,
    state: RoundState,
}

/// Opens a round for a validated proposal.
pub fn open_ipo(proposal: IpoProposal, opened_month: u32) -> Result<FundingRound> {
    let errors = proposal.validation_errors();
    if !errors.is_empty() {
        return Err(Error::Validation(errors));
    }
    Ok(FundingRound { proposal, opened_month, pledges: Vec::new(), state: RoundState::Open })
}

impl FundingRound {
    pub fn proposal(&self) -> &IpoProposal {
        &self.proposal
    }

    pub fn state(&self) -> RoundState {
        self.state
    }

    pub fn pledges(&self) -> &[Pledge] {
        &self.pledges
    }

    pub fn total_pledged(&self) -> Money {
        self.pledges.iter().map(|p| p.amount).sum()
    }

    /// First month at which the round may be settled.
    pub fn closes_at(&self) -> u32 {
        self.opened_month + self.proposal.window_months
    }

    pub fn pledge(&mut self, investor: HolderId, amount: Money, month: u32) -> Result<()> {
        if self.state != RoundState::Open {
            return Err(Error::InvalidState { expected: "open round", found: format!("{:?}", self.state) });
        }
        if month < self.opened_month || month >= self.closes_at() {
            return Err(Error::validation(
                "pledge.month",
                format!("month {month} outside window [{}, {})", self.opened_month, self.closes_at()),
            ));
        }
        let price = self.proposal.share_price;
        if !amount.is_positive() || amount.cents() % price.cents() != 0 {
            return Err(Error::validation(
                "pledge.amount",
                format!("{amount} is not a positive whole number of shares at {price}"),
            ));
        }
        self.pledges.push(Pledge { investor, amount, month });
        Ok(())
    }

    /// Settles the round at `month`, which must be at or after the window close.
    pub fn settle(&mut self, month: u32) -> Result<Settlement> {
        if self.state != RoundState::Open {
            return Err(Error::AlreadySettled);
        }
        if month < self.closes_at() {
            return Err(Error::WindowOpen { closes: self.closes_at() });
        }
        let goal = self.proposal.funding_goal;
        let mut refunds: BTreeMap<HolderId, Money> = BTreeMap::new();
        let settlement = if self.total_pledged() >= goal {
            let price = self.proposal.share_price;
            let mut remaining = goal;
            let mut table = CapTable::new();
            for p in &self.pledges {
                let take = p.amount.min(remaining);
                if take.is_positive() {
                    table = issue_equity(&table, &p.investor, (take.cents() / price.cents()) as u64)?;
                    remaining -= take;
                }
                let excess = p.amount - take;
                if excess.is_positive() {
                    *refunds.entry(p.investor.clone()).or_insert(Money::ZERO) += excess;
                }
            }
            debug_assert_eq!(remaining, Money::ZERO);
            self.state = RoundState::Funded;
            Settlement::Funded { cap_table: table, cash: goal, refunds }
        } else {
            for p in &self.pledges {
                *refunds.entry(p.investor.clone()).or_insert(Money::ZERO) += p.amount;
            }
            self.state = RoundState::Terminated;
            Settlement::Terminated { refunds }
        };
        debug_assert_eq!(settlement.retained() + settlement.total_refunded(), self.total_pledged());
        Ok(settlement)
    }
}

/// Equity promised to the proposer once the company turns steadily profitable.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EsopPlan {
    pub proposer: HolderId,
    pub fraction: f64,
    pub granted: bool,
}

impl EsopPlan {
    pub fn new(proposer: HolderId, fraction: f64) -> Self {
        Self { proposer, fraction, granted: false }
    }
}

/// Issues new shares so the proposer ends up holding `fraction` of the
/// enlarged total, to the nearest share. Existing holders are diluted, never
/// reduced.
pub fn grant_esop(plan: &mut EsopPlan, table: &CapTable) -> Result<CapTable> {
    if plan.granted {
        return Err(Error::EsopAlreadyGranted);
    }
    if !(0.0..1.0).contains(&plan.fraction) {
        return Err(Error::validation("esop_fraction", "must lie in [0, 1)"));
    }
    plan.granted = true;
    if plan.fraction == 0.0 {
        return Ok(table.clone());
    }
    // solve (held + s) / (total + s) = f for s
    let total = table.total_shares() as f64;
    let held = table.shares_of(&plan.proposer) as f64;
    let shares = ((plan.fraction * total - held) / (1.0 - plan.fraction)).round();
    if shares < 1.0 {
        return Ok(table.clone());
    }
    issue_equity(table, &plan.proposer, shares as u64)
}
