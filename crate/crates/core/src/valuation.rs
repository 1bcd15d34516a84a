//! Company valuation: the asset approach for young companies, the
//! earnings-multiple approach once profits are steady, and the return
//! figures reported to early investors and the proposer.

use serde::{Deserialize, Serialize};

use crate::error::{Error, FieldError, Result};
use crate::money::Money;

/// Annual return comparable to utility stocks.
pub const DEFAULT_TARGET_APR: f64 = 0.041;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValuationParams {
    pub target_apr: f64,
    pub pe_ratio: f64,
    pub months_to_steady: u32,
}

impl ValuationParams {
    pub fn from_apr(target_apr: f64, months_to_steady: u32) -> Result<Self> {
        let params = Self { target_apr, pe_ratio: pe_from_apr(target_apr)?, months_to_steady };
        params.validate()?;
        Ok(params)
    }

    pub fn validate(&self) -> Result<()> {
        let mut errors = Vec::new();
        if self.target_apr.is_nan() || self.target_apr <= 0.0 {
            errors.push(FieldError::new("valuation.target_apr", "must be positive"));
        }
        if !(self.pe_ratio > 0.0 && self.pe_ratio.is_finite()) {
            errors.push(FieldError::new("valuation.pe_ratio", "must be positive"));
        }
        if self.months_to_steady < 1 {
            errors.push(FieldError::new("valuation.months_to_steady", "must be at least 1"));
        }
        if errors.is_empty() {
            Ok(())
        } else {
            Err(Error::Validation(errors))
        }
    }
}

impl Default for ValuationParams {
    fn default() -> Self {
        Self { target_apr: DEFAULT_TARGET_APR, pe_ratio: 1.0 / DEFAULT_TARGET_APR, months_to_steady: 12 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ValuationMethod {
    AssetApproach,
    MarketApproach,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ValuationState {
    pub method: ValuationMethod,
    pub current_value: Money,
    pub pre_ipo_value: Money,
}

impl ValuationState {
    pub fn at_founding(pre_ipo_value: Money) -> Self {
        Self { method: ValuationMethod::AssetApproach, current_value: pre_ipo_value, pre_ipo_value }
    }

    /// Switches to the earnings multiple. The pre-IPO value never changes.
    pub fn to_market(&self, annual_earnings: Money, pe: f64) -> Result<Self> {
        Ok(Self {
            method: ValuationMethod::MarketApproach,
            current_value: market_valuation(annual_earnings, pe)?,
            pre_ipo_value: self.pre_ipo_value,
        })
    }
}

/// With all profit paid out, the dividend yield is `1 / (P/E)`.
pub fn pe_from_apr(apr: f64) -> Result<f64> {
    if apr.is_nan() || apr <= 0.0 {
        return Err(Error::Domain(format!("APR must be positive, got {apr}")));
    }
    Ok(1.0 / apr)
}

pub fn apr_from_pe(pe: f64) -> Result<f64> {
    if pe.is_nan() || pe <= 0.0 {
        return Err(Error::Domain(format!("P/E must be positive, got {pe}")));
    }
    Ok(1.0 / pe)
}

pub fn market_valuation(annual_earnings: Money, pe: f64) -> Result<Money> {
    if pe.is_nan() || pe <= 0.0 {
        return Err(Error::Domain(format!("P/E must be positive, got {pe}")));
    }
    Ok(annual_earnings.mul_round(pe))
}

/// Total cost to start the business.
pub fn asset_valuation(hardware: Money, installation: Money, other_startup: Money) -> Result<Money> {
    let mut errors = Vec::new();
    for (name, v) in [("hardware", hardware), ("installation", installation), ("other_startup", other_startup)] {
        if v.is_negative() {
            errors.push(FieldError::new(name, "must be non-negative"));
        }
    }
    if !errors.is_empty() {
        return Err(Error::Validation(errors));
    }
    Ok(hardware + installation + other_startup)
}

/// Annualized return of a pre-IPO stake that is valued at `pe × P` after
/// `z` months: `((x·P − I) / I)^(12/z) − 1`.
pub fn preipo_apr(pe: f64, steady_annual_profit: Money, pre_ipo_value: Money, months_to_steady: u32) -> Result<f64> {
    if !pre_ipo_value.is_positive() {
        return Err(Error::Domain(format!("pre-IPO value must be positive, got {pre_ipo_value}")));
    }
    if months_to_steady < 1 {
        return Err(Error::Domain("months to steady revenue must be at least 1".into()));
    }
    let market = pe * steady_annual_profit.cents() as f64;
    if market.is_nan() || market <= 0.0 {
        return Err(Error::Domain(format!("P/E × annual profit must be positive, got ${:.2}", market / 100.0)));
    }
    let invested = pre_ipo_value.cents() as f64;
    let base = (market - invested) / invested;
    let exponent = 12.0 / months_to_steady as f64;
    if base < 0.0 {
        if 12 % months_to_steady != 0 {
            return Err(Error::Domain(format!(
                "market value ${:.2} is below the pre-IPO value {} and exponent 12/{} is fractional; no real APR",
                market / 100.0,
                pre_ipo_value,
                months_to_steady
            )));
        }
        return Ok(base.powi((12 / months_to_steady) as i32) - 1.0);
    }
    Ok(base.powf(exponent) - 1.0)
}

/// Market value as a percentage of the pre-IPO value (100% means no gain).
pub fn appreciation_over_preipo(market_value: Money, pre_ipo_value: Money) -> Result<f64> {
    if !pre_ipo_value.is_positive() {
        return Err(Error::Domain(format!("pre-IPO value must be positive, got {pre_ipo_value}")));
    }
    Ok(100.0 * market_value.cents() as f64 / pre_ipo_value.cents() as f64)
}

pub fn proposer_reward(market_value: Money, esop_fraction: f64) -> Result<Money> {
    if !(0.0..=1.0).contains(&esop_fraction) {
        return Err(Error::Domain(format!("ESOP fraction must lie in [0, 1], got {esop_fraction}")));
    }
    Ok(market_value.mul_round(esop_fraction))
}
