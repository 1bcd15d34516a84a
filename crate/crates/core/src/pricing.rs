//! Survey-derived demand curves, monthly profit and per-service price
//! selection.
//!
//! Services are priced per use with a flat unit price; nothing here charges
//! by data volume. Demand between surveyed price points is linear, constant
//! below the cheapest point, and zero above the most expensive one.

use serde::{Deserialize, Serialize};

use crate::error::{Error, FieldError, Result};
use crate::money::Money;

/// Share of surveyed users that only use free services.
pub const DEFAULT_ZERO_PAY_FRACTION: f64 = 99.0 / 350.0;

pub const DEFAULT_INCENTIVE_RATE: f64 = 0.05;

/// Objective values closer than this are treated as ties.
pub const TIE_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CurvePoint {
    pub price_cents: Money,
    pub usages_per_user_per_month: f64,
}

impl CurvePoint {
    pub fn new(price: Money, usages: f64) -> Self {
        Self { price_cents: price, usages_per_user_per_month: usages }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PriceUsageCurve {
    pub points: Vec<CurvePoint>,
    #[serde(default = "default_zero_pay")]
    pub zero_pay_fraction: f64,
}

fn default_zero_pay() -> f64 {
    DEFAULT_ZERO_PAY_FRACTION
}

impl PriceUsageCurve {
    /// Builds and validates a curve from `(price, usages)` pairs.
    pub fn new(points: Vec<(Money, f64)>, zero_pay_fraction: f64) -> Result<Self> {
        let curve =
            Self { points: points.into_iter().map(|(p, u)| CurvePoint::new(p, u)).collect(), zero_pay_fraction };
        curve.validate()?;
        Ok(curve)
    }

    pub fn validate(&self) -> Result<()> {
        let errors = self.validation_errors("curve");
        if errors.is_empty() {
            Ok(())
        } else {
            Err(Error::Validation(errors))
        }
    }

    pub fn validation_errors(&self, path: &str) -> Vec<FieldError> {
        let mut errors = Vec::new();
        if self.points.len() < 2 {
            errors.push(FieldError::new(format!("{path}.points"), "a demand curve needs at least 2 points"));
        }
        if !(0.0..=1.0).contains(&self.zero_pay_fraction) {
            errors.push(FieldError::new(format!("{path}.zero_pay_fraction"), "must lie in [0, 1]"));
        }
        for (i, p) in self.points.iter().enumerate() {
            if p.price_cents.is_negative() {
                errors.push(FieldError::new(format!("{path}.points[{i}].price_cents"), "must be non-negative"));
            }
            let u = p.usages_per_user_per_month;
            if !u.is_finite() || u < 0.0 {
                errors.push(FieldError::new(
                    format!("{path}.points[{i}].usages_per_user_per_month"),
                    "must be a finite non-negative number",
                ));
            }
        }
        for (i, w) in self.points.windows(2).enumerate() {
            if w[1].price_cents <= w[0].price_cents {
                errors.push(FieldError::new(
                    format!("{path}.points[{}].price_cents", i + 1),
                    "unit prices must be strictly increasing",
                ));
            }
            if w[1].usages_per_user_per_month > w[0].usages_per_user_per_month {
                errors.push(FieldError::new(
                    format!("{path}.points[{}].usages_per_user_per_month", i + 1),
                    "usages must be non-increasing in price",
                ));
            }
        }
        errors
    }

    pub fn first_price(&self) -> Money {
        self.points[0].price_cents
    }

    pub fn last_price(&self) -> Money {
        self.points[self.points.len() - 1].price_cents
    }

    /// Paying share of users, `1 − zero_pay_fraction`.
    pub fn paying_fraction(&self) -> f64 {
        1.0 - self.zero_pay_fraction
    }

    fn usage_at(&self, price: Money) -> f64 {
        let pts = &self.points;
        if price <= pts[0].price_cents {
            return pts[0].usages_per_user_per_month;
        }
        if price > self.last_price() {
            return 0.0;
        }
        // first point with price >= target; exists because price <= last
        let hi = pts.partition_point(|p| p.price_cents < price);
        let (a, b) = (pts[hi - 1], pts[hi]);
        let t = (price - a.price_cents).cents() as f64 / (b.price_cents - a.price_cents).cents() as f64;
        a.usages_per_user_per_month + (b.usages_per_user_per_month - a.usages_per_user_per_month) * t
    }
}

/// Expected usages per user per month at `price`.
pub fn interpolate_usage(curve: &PriceUsageCurve, price: Money) -> Result<f64> {
    curve.validate()?;
    if price.is_negative() {
        return Err(Error::validation("price", "must be non-negative"));
    }
    Ok(curve.usage_at(price))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ServiceSpec {
    pub id: String,
    pub name: String,
    pub unit_price: Money,
    pub marginal_cost: Money,
    /// Per-month fixed cost of running this service.
    pub fixed_cost: Money,
    pub curve: PriceUsageCurve,
}

impl ServiceSpec {
    pub fn validation_errors(&self, path: &str) -> Vec<FieldError> {
        let mut errors = Vec::new();
        if self.unit_price.is_negative() {
            errors.push(FieldError::new(format!("{path}.unit_price_cents"), "must be non-negative"));
        }
        if self.marginal_cost.is_negative() {
            errors.push(FieldError::new(format!("{path}.marginal_cost_cents"), "must be non-negative"));
        }
        if self.fixed_cost.is_negative() {
            errors.push(FieldError::new(format!("{path}.fixed_cost_cents"), "must be non-negative"));
        }
        errors.extend(self.curve.validation_errors(&format!("{path}.curve")));
        errors
    }

    /// Paying usages per user per month at the current unit price.
    pub fn paying_usage_per_user(&self) -> f64 {
        self.curve.usage_at(self.unit_price) * self.curve.paying_fraction()
    }
}

/// Company-level monthly costs. Depreciation is supplied per month by the
/// caller since it depends on the asset's age.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CostStructure {
    pub admin_fees: Money,
    pub maintenance_hours_per_month: f64,
    pub maintenance_hourly_rate: Money,
    pub incentive_rate: f64,
}

impl Default for CostStructure {
    fn default() -> Self {
        Self {
            admin_fees: Money::ZERO,
            maintenance_hours_per_month: 0.0,
            maintenance_hourly_rate: Money::ZERO,
            incentive_rate: DEFAULT_INCENTIVE_RATE,
        }
    }
}

impl CostStructure {
    pub fn validation_errors(&self, path: &str) -> Vec<FieldError> {
        let mut errors = Vec::new();
        if self.admin_fees.is_negative() {
            errors.push(FieldError::new(format!("{path}.admin_fees_cents"), "must be non-negative"));
        }
        if !(self.maintenance_hours_per_month >= 0.0 && self.maintenance_hours_per_month.is_finite()) {
            errors.push(FieldError::new(format!("{path}.maintenance_hours_per_month"), "must be non-negative"));
        }
        if self.maintenance_hourly_rate.is_negative() {
            errors.push(FieldError::new(format!("{path}.maintenance_hourly_rate"), "must be non-negative"));
        }
        if !(0.0..=1.0).contains(&self.incentive_rate) {
            errors.push(FieldError::new(format!("{path}.incentive_rate"), "must lie in [0, 1]"));
        }
        errors
    }

    pub fn maintenance_pay(&self) -> Money {
        self.maintenance_hourly_rate.mul_round(self.maintenance_hours_per_month)
    }

    /// The company-wide fixed cost F for a month with the given depreciation.
    pub fn company_fixed_cost(&self, depreciation: Money) -> Money {
        depreciation + self.maintenance_pay() + self.admin_fees
    }
}

/// `Σ ((φ_i − ψ_i)·n_i − f_i) − F`, truncated to cents only at the end.
pub fn monthly_profit(services: &[ServiceSpec], usages: &[f64], company_fixed: Money) -> Result<Money> {
    if services.len() != usages.len() {
        return Err(Error::LengthMismatch { services: services.len(), usages: usages.len() });
    }
    if let Some(i) = usages.iter().position(|n| n.is_nan() || *n < 0.0) {
        return Err(Error::validation(format!("usages[{i}]"), "must be non-negative"));
    }
    let cents: f64 = services
        .iter()
        .zip(usages)
        .map(|(s, n)| (s.unit_price - s.marginal_cost).cents() as f64 * n - s.fixed_cost.cents() as f64)
        .sum::<f64>()
        - company_fixed.cents() as f64;
    Ok(Money::trunc_cents(cents))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Objective {
    #[default]
    Revenue,
    Profit,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PriceChoice {
    pub price: Money,
    pub expected_monthly_value: Money,
    /// Unrounded objective value in cents.
    pub objective_cents: f64,
}

/// Objective in cents for one price; exposed so callers can compare grids.
pub fn price_objective(service: &ServiceSpec, price: Money, user_count: u64, objective: Objective) -> f64 {
    let margin = match objective {
        Objective::Revenue => price,
        Objective::Profit => price - service.marginal_cost,
    };
    margin.cents() as f64 * service.curve.usage_at(price) * user_count as f64 * service.curve.paying_fraction()
}

/// Scans every cent from $0 up to one cent past the last surveyed price and
/// keeps the best objective, breaking ties toward the lowest price.
pub fn optimize_price(service: &ServiceSpec, user_count: u64, objective: Objective) -> Result<PriceChoice> {
    service.curve.validate()?;
    let hi = service.curve.last_price().cents() + 1;
    let mut best_price = Money::ZERO;
    let mut best = f64::NEG_INFINITY;
    for cents in 0..=hi {
        let price = Money::from_cents(cents);
        let v = price_objective(service, price, user_count, objective);
        if v > best + TIE_TOLERANCE {
            best = v;
            best_price = price;
        }
    }
    Ok(PriceChoice { price: best_price, expected_monthly_value: Money::round_cents(best), objective_cents: best })
}

/// Returns copies of `services` with each unit price set to its optimum.
pub fn optimize_all(services: &[ServiceSpec], objective: Objective) -> Result<Vec<ServiceSpec>> {
    services
        .iter()
        .map(|s| {
            let choice = optimize_price(s, 1, objective)?;
            Ok(ServiceSpec { unit_price: choice.price, ..s.clone() })
        })
        .collect()
}

/// `12 × Σ φ_i · n_i(φ_i)` for a single user, with the zero-pay share removed.
pub fn annual_revenue_per_user(services: &[ServiceSpec]) -> Money {
    let monthly: f64 = services.iter().map(|s| s.unit_price.cents() as f64 * s.paying_usage_per_user()).sum();
    Money::round_cents(12.0 * monthly)
}
