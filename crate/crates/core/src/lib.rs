//! Economics of single-sensor micro-companies.
//!
//! A sensor is proposed, funded through an all-or-nothing offering, sells
//! per-use services priced against survey demand curves, pays its costs and
//! (once steadily profitable) distributes its profit as dividends. The crate
//! covers each piece separately and ties them together in a deterministic
//! monthly simulation:
//!
//! - [`ledger`]: integer-cent cap tables, dividends, liquidation, depreciation
//! - [`pricing`]: demand curves, monthly profit, revenue-maximizing prices
//! - [`valuation`]: asset and earnings-multiple valuation, investor returns
//! - [`ipo`]: funding rounds and the proposer's equity grant
//! - [`virtualizer`]: grouping companies into shared virtual entities
//! - [`sim`]: the monthly company simulation and break-even sweeps
//! - [`scenario`]: scenario/curve files and report output

pub mod error;
pub mod ipo;
pub mod ledger;
pub mod money;
pub mod pricing;
pub mod scenario;
pub mod sim;
pub mod valuation;
pub mod virtualizer;

pub use error::{Error, FieldError, Result};
pub use money::Money;
