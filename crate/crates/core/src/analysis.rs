//! Tree statistics and day-over-day land usage coverage.

use std::collections::{BTreeMap, BTreeSet};

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::augment::AugmentedPoint;
use crate::cluster::ContextNode;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TreeStats {
    pub total_nodes: usize,
    pub leaf_nodes: usize,
    /// Time ranges summed over the leaves, counting repeats.
    pub time_periods: usize,
}

pub fn tree_stats(root: &ContextNode) -> TreeStats {
    let mut s = TreeStats { total_nodes: 0, leaf_nodes: 0, time_periods: 0 };
    for n in root.walk() {
        s.total_nodes += 1;
        if n.is_leaf() {
            s.leaf_nodes += 1;
            s.time_periods += n.times.len();
        }
    }
    s
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum CoverageError {
    #[error("test day has no element ids")]
    EmptyTestDay,
    #[error("need at least two days of data, got {0}")]
    TooFewDays(usize),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CoverageMode {
    /// Train on the first day only.
    Fixed,
    /// Train on every day before the test day.
    Retrained,
}

/// Percentage of the distinct test ids that also occur in training.
pub fn coverage<'a, 'b>(
    train: impl IntoIterator<Item = &'a str>,
    test: impl IntoIterator<Item = &'b str>,
) -> Result<f64, CoverageError> {
    let train: BTreeSet<&str> = train.into_iter().collect();
    let test: BTreeSet<&str> = test.into_iter().collect();
    if test.is_empty() {
        return Err(CoverageError::EmptyTestDay);
    }
    let seen = test.iter().filter(|id| train.contains(*id)).count();
    Ok(seen as f64 / test.len() as f64 * 100.0)
}

/// Element ids per UTC calendar day, in date order.
pub fn ids_by_day(points: &[AugmentedPoint]) -> Vec<(NaiveDate, BTreeSet<String>)> {
    let mut days: BTreeMap<NaiveDate, BTreeSet<String>> = BTreeMap::new();
    for p in points {
        days.entry(p.point.timestamp.date_naive()).or_default().extend(p.element_ids.iter().cloned());
    }
    days.into_iter().collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoverageRow {
    pub test_day: NaiveDate,
    pub fixed: f64,
    pub retrained: f64,
}

/// One row per day after the first, testing that day against day 0
/// (fixed) and against all earlier days (retrained).
pub fn coverage_series(days: &[(NaiveDate, BTreeSet<String>)]) -> Result<Vec<CoverageRow>, CoverageError> {
    if days.len() < 2 {
        return Err(CoverageError::TooFewDays(days.len()));
    }
    let mut rows = Vec::with_capacity(days.len() - 1);
    for n in 1..days.len() {
        let test = days[n].1.iter().map(String::as_str);
        let fixed = coverage(days[0].1.iter().map(String::as_str), test.clone())?;
        let retrained = coverage(days[..n].iter().flat_map(|(_, ids)| ids.iter().map(String::as_str)), test)?;
        rows.push(CoverageRow { test_day: days[n].0, fixed, retrained });
    }
    Ok(rows)
}

pub fn write_coverage_csv(rows: &[CoverageRow]) -> String {
    let mut out = String::from("test_day,fixed,retrained\n");
    for r in rows {
        out.push_str(&format!("{},{},{}\n", r.test_day, r.fixed, r.retrained));
    }
    out
}
