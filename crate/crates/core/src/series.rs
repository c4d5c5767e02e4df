//! Month-indexed data series and the bundle format that moves between
//! pipeline stages.

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::month::{MonthRange, YearMonth};

/// The quantities tracked per month by the emissions pipeline.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SeriesLabel {
    /// CO2 emissions, annualized, MMT/yr.
    Emissions,
    /// Electricity generation, annualized, TWh/yr.
    Generation,
    /// Carbon intensity, kg CO2 per MWh.
    Intensity,
    /// Population-weighted heating degree days.
    Hdd,
    /// Population-weighted cooling degree days.
    Cdd,
    /// Coal-attributed CO2 emissions, annualized, MMT/yr.
    EmissionsCoal,
    /// Gas-attributed CO2 emissions, annualized, MMT/yr.
    EmissionsGas,
    /// Oil-attributed CO2 emissions, annualized, MMT/yr.
    EmissionsOil,
}

impl SeriesLabel {
    pub fn as_str(&self) -> &'static str {
        match self {
            SeriesLabel::Emissions => "emissions",
            SeriesLabel::Generation => "generation",
            SeriesLabel::Intensity => "intensity",
            SeriesLabel::Hdd => "hdd",
            SeriesLabel::Cdd => "cdd",
            SeriesLabel::EmissionsCoal => "emissions_coal",
            SeriesLabel::EmissionsGas => "emissions_gas",
            SeriesLabel::EmissionsOil => "emissions_oil",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "emissions" => Some(SeriesLabel::Emissions),
            "generation" => Some(SeriesLabel::Generation),
            "intensity" => Some(SeriesLabel::Intensity),
            "hdd" => Some(SeriesLabel::Hdd),
            "cdd" => Some(SeriesLabel::Cdd),
            "emissions_coal" => Some(SeriesLabel::EmissionsCoal),
            "emissions_gas" => Some(SeriesLabel::EmissionsGas),
            "emissions_oil" => Some(SeriesLabel::EmissionsOil),
            _ => None,
        }
    }
}

impl fmt::Display for SeriesLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Error)]
pub enum SeriesError {
    #[error("series {label} has a gap at {month}")]
    Gap { label: String, month: YearMonth },
    #[error("series {label} is empty")]
    Empty { label: String },
    #[error("series {label} missing requested range {requested} (have {available})")]
    Coverage {
        label: String,
        requested: MonthRange,
        available: MonthRange,
    },
    #[error("value for {month} in series {label} is not finite: {value}")]
    NotFinite {
        label: String,
        month: YearMonth,
        value: f64,
    },
}

/// A contiguous month-indexed series of f64 values.
///
/// Construction enforces contiguity and finiteness, so downstream code can
/// index by month offset without re-checking.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MonthlySeries {
    label: String,
    start: YearMonth,
    values: Vec<f64>,
}

impl MonthlySeries {
    pub fn new(
        label: impl Into<String>,
        start: YearMonth,
        values: Vec<f64>,
    ) -> Result<Self, SeriesError> {
        let label = label.into();
        if values.is_empty() {
            return Err(SeriesError::Empty { label });
        }
        for (i, &v) in values.iter().enumerate() {
            if !v.is_finite() {
                return Err(SeriesError::NotFinite {
                    label,
                    month: start.plus_months(i as i64),
                    value: v,
                });
            }
        }
        Ok(Self { label, start, values })
    }

    /// Builds a series from scattered (month, value) observations, rejecting
    /// duplicate months implicitly (last write wins in the map) and any gap
    /// in coverage explicitly.
    pub fn from_map(
        label: impl Into<String>,
        map: &BTreeMap<YearMonth, f64>,
    ) -> Result<Self, SeriesError> {
        let label = label.into();
        let (&start, _) = map.iter().next().ok_or(SeriesError::Empty { label: label.clone() })?;
        let (&end, _) = map.iter().next_back().expect("non-empty");
        let range = MonthRange::new(start, end);
        let mut values = Vec::with_capacity(range.len());
        for ym in range.iter() {
            match map.get(&ym) {
                Some(&v) => values.push(v),
                None => return Err(SeriesError::Gap { label, month: ym }),
            }
        }
        Self::new(label, start, values)
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn start(&self) -> YearMonth {
        self.start
    }

    pub fn end(&self) -> YearMonth {
        self.start.plus_months(self.values.len() as i64 - 1)
    }

    pub fn range(&self) -> MonthRange {
        MonthRange::new(self.start(), self.end())
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn get(&self, ym: YearMonth) -> Option<f64> {
        self.range().index_of(ym).map(|i| self.values[i])
    }

    pub fn iter(&self) -> impl Iterator<Item = (YearMonth, f64)> + '_ {
        let start = self.start;
        self.values
            .iter()
            .enumerate()
            .map(move |(i, &v)| (start.plus_months(i as i64), v))
    }

    /// The sub-series covering `range`, or a coverage error naming what is
    /// actually available.
    pub fn slice(&self, range: MonthRange) -> Result<MonthlySeries, SeriesError> {
        if !self.range().contains_range(&range) {
            return Err(SeriesError::Coverage {
                label: self.label.clone(),
                requested: range,
                available: self.range(),
            });
        }
        let lo = self.range().index_of(range.start).expect("checked");
        let hi = self.range().index_of(range.end).expect("checked");
        Ok(MonthlySeries {
            label: self.label.clone(),
            start: range.start,
            values: self.values[lo..=hi].to_vec(),
        })
    }

    pub fn mean(&self) -> f64 {
        self.values.iter().sum::<f64>() / self.values.len() as f64
    }
}

/// A set of aligned monthly series plus run provenance, the on-disk handoff
/// between the ingest stage and the modeling stages.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SeriesBundle {
    /// SHA-256 of the run configuration that produced this bundle.
    pub config_sha256: String,
    /// RNG seed of the producing run.
    pub seed: u64,
    pub series: BTreeMap<String, MonthlySeries>,
}

impl SeriesBundle {
    pub fn new(config_sha256: impl Into<String>, seed: u64) -> Self {
        Self {
            config_sha256: config_sha256.into(),
            seed,
            series: BTreeMap::new(),
        }
    }

    pub fn insert(&mut self, series: MonthlySeries) {
        self.series.insert(series.label().to_string(), series);
    }

    pub fn get(&self, label: SeriesLabel) -> Option<&MonthlySeries> {
        self.series.get(label.as_str())
    }

    pub fn require(&self, label: SeriesLabel) -> Result<&MonthlySeries, SeriesError> {
        self.series.get(label.as_str()).ok_or(SeriesError::Empty {
            label: label.as_str().to_string(),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn from_map_rejects_gaps() {
        let mut m = BTreeMap::new();
        m.insert(YearMonth::of(2020, 1), 1.0);
        m.insert(YearMonth::of(2020, 3), 3.0);
        let err = MonthlySeries::from_map("x", &m).unwrap_err();
        assert!(matches!(err, SeriesError::Gap { month, .. } if month == YearMonth::of(2020, 2)));
    }

    #[test]
    fn from_map_contiguous() {
        let mut m = BTreeMap::new();
        for i in 0..5 {
            m.insert(YearMonth::of(2020, 1).plus_months(i), i as f64);
        }
        let s = MonthlySeries::from_map("x", &m).unwrap();
        assert_eq!(s.len(), 5);
        assert_eq!(s.get(YearMonth::of(2020, 4)), Some(3.0));
        assert_eq!(s.end(), YearMonth::of(2020, 5));
    }

    #[test]
    fn rejects_non_finite() {
        let err = MonthlySeries::new("x", YearMonth::of(2020, 1), vec![1.0, f64::NAN]).unwrap_err();
        assert!(matches!(err, SeriesError::NotFinite { .. }));
    }

    #[test]
    fn slice_reports_available_range() {
        let s = MonthlySeries::new("x", YearMonth::of(2020, 1), vec![1.0, 2.0, 3.0]).unwrap();
        let want = MonthRange::new(YearMonth::of(2019, 12), YearMonth::of(2020, 2));
        let err = s.slice(want).unwrap_err();
        match err {
            SeriesError::Coverage { available, .. } => {
                assert_eq!(available.start, YearMonth::of(2020, 1));
            }
            other => panic!("unexpected error {other:?}"),
        }
        let ok = s
            .slice(MonthRange::new(YearMonth::of(2020, 2), YearMonth::of(2020, 3)))
            .unwrap();
        assert_eq!(ok.values(), &[2.0, 3.0]);
    }

    #[test]
    fn bundle_round_trips_through_json() {
        let mut b = SeriesBundle::new("abc", 7);
        b.insert(MonthlySeries::new("emissions", YearMonth::of(2020, 1), vec![1.0, 2.0]).unwrap());
        let text = serde_json::to_string(&b).unwrap();
        let back: SeriesBundle = serde_json::from_str(&text).unwrap();
        assert_eq!(back.seed, 7);
        let s = back.get(SeriesLabel::Emissions).unwrap();
        assert_eq!(s.values(), &[1.0, 2.0]);
    }
}
