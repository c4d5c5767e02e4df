//! Fuel-code taxonomy: emission categories and the contiguous-U.S. filter.

use serde::{Deserialize, Serialize};

/// Reporting category for a fuel code. Every code with a positive emission
/// factor lands in coal, gas, or oil, so the three-way split conserves the
/// national total by construction.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FuelCategory {
    Coal,
    Gas,
    Oil,
    ZeroEmission,
}

const COAL_CODES: &[&str] = &["ANT", "BIT", "LIG", "SUB", "WC", "RC", "SC", "SGC"];

const GAS_CODES: &[&str] = &["NG", "OG", "BFG"];

/// Codes that carry no CO2 in this accounting: renewables, nuclear, and
/// biogenic fuels (biogenic carbon is excluded by convention), plus
/// non-combustion placeholders.
const ZERO_EMISSION_CODES: &[&str] = &[
    "SUN", "WND", "WAT", "NUC", "GEO", "AB", "BLQ", "LFG", "MSB", "OBG", "OBL", "OBS", "SLW",
    "WDL", "WDS", "WH", "PUR", "MWH",
];

impl FuelCategory {
    /// Classifies a fuel code. Unlisted codes are treated as petroleum
    /// liquids or coke, the catch-all fossil family.
    pub fn of(code: &str) -> FuelCategory {
        if COAL_CODES.contains(&code) {
            FuelCategory::Coal
        } else if GAS_CODES.contains(&code) {
            FuelCategory::Gas
        } else if ZERO_EMISSION_CODES.contains(&code) {
            FuelCategory::ZeroEmission
        } else {
            FuelCategory::Oil
        }
    }

    pub fn is_fossil(&self) -> bool {
        !matches!(self, FuelCategory::ZeroEmission)
    }
}

/// The 48 contiguous states plus the District of Columbia, by postal code.
const CONTIGUOUS: &[&str] = &[
    "AL", "AZ", "AR", "CA", "CO", "CT", "DC", "DE", "FL", "GA", "ID", "IL", "IN", "IA", "KS",
    "KY", "LA", "ME", "MD", "MA", "MI", "MN", "MS", "MO", "MT", "NE", "NV", "NH", "NJ", "NM",
    "NY", "NC", "ND", "OH", "OK", "OR", "PA", "RI", "SC", "SD", "TN", "TX", "UT", "VT", "VA",
    "WA", "WV", "WI", "WY",
];

pub fn is_contiguous_state(state: &str) -> bool {
    CONTIGUOUS.contains(&state)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn classification() {
        assert_eq!(FuelCategory::of("BIT"), FuelCategory::Coal);
        assert_eq!(FuelCategory::of("NG"), FuelCategory::Gas);
        assert_eq!(FuelCategory::of("DFO"), FuelCategory::Oil);
        assert_eq!(FuelCategory::of("PC"), FuelCategory::Oil);
        assert_eq!(FuelCategory::of("WND"), FuelCategory::ZeroEmission);
        assert!(!FuelCategory::of("NUC").is_fossil());
    }

    #[test]
    fn contiguous_filter() {
        assert!(is_contiguous_state("TX"));
        assert!(is_contiguous_state("DC"));
        assert!(!is_contiguous_state("AK"));
        assert!(!is_contiguous_state("HI"));
        assert!(!is_contiguous_state("PR"));
        assert_eq!(CONTIGUOUS.len(), 49);
    }
}
