//! Stackelberg pricing equilibria for a dual-channel closed-loop supply chain
//! with trade-in subsidies, evaluated in closed form and checked numerically.

pub mod analysis;
pub mod audit;
pub mod closed_form;
pub mod error;
pub mod market;
pub mod oracle;
pub mod params;

pub use closed_form::{equilibrium, Equilibrium, Provenance};
pub use error::{Error, Result};
pub use market::{DemandForm, DemandOptions, DemandProfile, ProfitProfile, ValidityReport};
pub use params::{decision_fields, validate_params, DecisionSet, Field, ModelId, Params};
