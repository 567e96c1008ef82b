//! Temporal-buffer noise filter over augmented points.
//!
//! Each point under consideration is scored against the points within
//! `delta` seconds on either side. An element's score sums, over the points
//! listing it, the point's inverse accuracy weighted by temporal proximity,
//! and is then multiplied by the number of such points. Scores are
//! normalised by the buffer maximum and thresholded.

use std::collections::{BTreeMap, BTreeSet, VecDeque};

use thiserror::Error;

use crate::augment::AugmentedPoint;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FilterParams {
    /// Buffer half-width in seconds.
    pub delta: f64,
    /// Selection threshold on normalised scores.
    pub t: f64,
    /// Also emit the leading and trailing points using partial windows.
    pub edge_windows: bool,
}

impl Default for FilterParams {
    fn default() -> Self {
        Self { delta: 1200.0, t: 0.8, edge_windows: false }
    }
}

impl FilterParams {
    pub fn new(delta: f64, t: f64) -> Result<Self, FilterError> {
        if !(delta > 0.0 && delta.is_finite()) {
            return Err(FilterError::InvalidDelta(delta));
        }
        if !(0.0..=1.0).contains(&t) {
            return Err(FilterError::InvalidThreshold(t));
        }
        Ok(Self { delta, t, edge_windows: false })
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum FilterError {
    #[error("no element in the window has a positive score")]
    AllZero,
    #[error("delta must be positive, got {0}")]
    InvalidDelta(f64),
    #[error("threshold must lie in [0, 1], got {0}")]
    InvalidThreshold(f64),
}

/// A buffer of points and the position of the point under consideration.
#[derive(Debug, Clone, Copy)]
pub struct BufferWindow<'a> {
    pub points: &'a [AugmentedPoint],
    pub index: usize,
}

fn seconds_between(a: &AugmentedPoint, b: &AugmentedPoint) -> f64 {
    (b.point.timestamp - a.point.timestamp).num_milliseconds().abs() as f64 / 1000.0
}

pub fn score_elements(w: &BufferWindow<'_>, delta: f64) -> BTreeMap<String, f64> {
    let centre = &w.points[w.index];
    let mut acc: BTreeMap<&str, (f64, usize)> = BTreeMap::new();
    for p in w.points {
        let weight = (1.0 / p.point.accuracy) * (1.0 - seconds_between(p, centre) / delta);
        for id in &p.element_ids {
            let entry = acc.entry(id.as_str()).or_insert((0.0, 0));
            entry.0 += weight;
            entry.1 += 1;
        }
    }
    acc.into_iter().map(|(id, (sum, n))| (id.to_string(), sum * n as f64)).collect()
}

/// Divides every score by the maximum.
pub fn normalise_scores(scores: &BTreeMap<String, f64>) -> Result<BTreeMap<String, f64>, FilterError> {
    let max = scores.values().copied().fold(f64::NEG_INFINITY, f64::max);
    if max.is_nan() || max <= 0.0 {
        return Err(FilterError::AllZero);
    }
    Ok(scores.iter().map(|(id, s)| (id.clone(), s / max)).collect())
}

/// Elements whose normalised score is strictly above `t`.
pub fn select_elements(norm: &BTreeMap<String, f64>, t: f64) -> BTreeSet<String> {
    norm.iter().filter(|(_, &s)| s > t).map(|(id, _)| id.clone()).collect()
}

fn filter_window(w: &BufferWindow<'_>, params: &FilterParams) -> AugmentedPoint {
    let scores = score_elements(w, params.delta);
    let element_ids = match normalise_scores(&scores) {
        Ok(norm) => select_elements(&norm, params.t),
        Err(FilterError::AllZero) => BTreeSet::new(),
        Err(e) => unreachable!("normalise_scores only fails with AllZero: {e}"),
    };
    AugmentedPoint { point: w.points[w.index].point.clone(), element_ids }
}

/// Runs the buffer walk over a time-sorted augmented trajectory.
///
/// Points at the start of the trajectory only serve as context, and the walk
/// stops once the input is exhausted, so boundary points are not emitted
/// unless `params.edge_windows` is set.
pub fn filter_trajectory(aug: &[AugmentedPoint], params: &FilterParams) -> Vec<AugmentedPoint> {
    if params.edge_windows {
        return filter_all_points(aug, params);
    }
    buffer_walk(aug, params.delta)
        .into_iter()
        .map(|(buffer, index)| {
            let window = BufferWindow { points: &aug[buffer.clone()], index: index - buffer.start };
            filter_window(&window, params)
        })
        .collect()
}

/// The buffer walk itself: yields `(buffer range, absolute index of the
/// point under consideration)` for every emitted point.
pub fn buffer_walk(aug: &[AugmentedPoint], delta: f64) -> Vec<(std::ops::Range<usize>, usize)> {
    let mut out = Vec::new();
    if aug.is_empty() {
        return out;
    }
    let gap = |i: usize, j: usize| seconds_between(&aug[i], &aug[j]);

    // Positions into `aug`; the buffer is always a contiguous run.
    let mut pending: VecDeque<usize> = (1..aug.len()).collect();
    let mut buffer: VecDeque<usize> = VecDeque::from([0]);
    let mut index: Option<usize> = None;

    while let Some(&next) = pending.front() {
        match index {
            None if gap(buffer[0], next) > delta => index = Some(buffer.len() - 1),
            Some(i) if gap(buffer[i], next) > delta => break,
            _ => buffer.push_back(pending.pop_front().expect("front checked")),
        }
    }
    let Some(mut index) = index else {
        return out;
    };

    while !pending.is_empty() {
        out.push((buffer[0]..buffer[buffer.len() - 1] + 1, buffer[index]));
        index += 1;
        if index == buffer.len() {
            buffer.push_back(pending.pop_front().expect("loop guard"));
        }
        while gap(buffer[0], buffer[index]) > delta {
            buffer.pop_front();
            index -= 1;
        }
        while let Some(&next) = pending.front() {
            if gap(buffer[index], next) > delta {
                break;
            }
            buffer.push_back(pending.pop_front().expect("front checked"));
        }
    }
    out
}

/// Every point filtered against all points within `delta` of it.
fn filter_all_points(aug: &[AugmentedPoint], params: &FilterParams) -> Vec<AugmentedPoint> {
    let mut lo = 0;
    let mut hi = 0;
    let mut out = Vec::with_capacity(aug.len());
    for i in 0..aug.len() {
        while seconds_between(&aug[lo], &aug[i]) > params.delta {
            lo += 1;
        }
        if hi < i {
            hi = i;
        }
        while hi + 1 < aug.len() && seconds_between(&aug[i], &aug[hi + 1]) <= params.delta {
            hi += 1;
        }
        let window = BufferWindow { points: &aug[lo..=hi], index: i - lo };
        out.push(filter_window(&window, params));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::TrajectoryPoint;
    use chrono::{DateTime, Utc};

    fn ap(secs: i64, acc: f64, ids: &[&str]) -> AugmentedPoint {
        let t = DateTime::<Utc>::from_timestamp(1_383_919_791 + secs, 0).unwrap();
        AugmentedPoint {
            point: TrajectoryPoint::new(t, 52.38, -1.56, acc).unwrap(),
            element_ids: ids.iter().map(|s| s.to_string()).collect(),
        }
    }

    #[test]
    fn score_of_centre_only_element() {
        let pts = [ap(0, 10.0, &["e"])];
        let s = score_elements(&BufferWindow { points: &pts, index: 0 }, 1200.0);
        assert!((s["e"] - 0.1).abs() < 1e-12);
    }

    #[test]
    fn score_with_second_point() {
        let pts = [ap(0, 10.0, &["e"]), ap(600, 20.0, &["e"])];
        let s = score_elements(&BufferWindow { points: &pts, index: 0 }, 1200.0);
        // (0.1 + 0.05 * 0.5) * 2
        assert!((s["e"] - 0.25).abs() < 1e-12);
    }

    #[test]
    fn score_vanishes_at_delta() {
        let pts = [ap(0, 10.0, &["c"]), ap(1200, 10.0, &["e"])];
        let s = score_elements(&BufferWindow { points: &pts, index: 0 }, 1200.0);
        assert_eq!(s["e"], 0.0);
    }

    #[test]
    fn normalisation() {
        let scores: BTreeMap<String, f64> = [("a".into(), 2.0), ("b".into(), 1.0)].into_iter().collect();
        let n = normalise_scores(&scores).unwrap();
        assert_eq!(n["a"], 1.0);
        assert_eq!(n["b"], 0.5);
        let single: BTreeMap<String, f64> = [("e".into(), 0.3)].into_iter().collect();
        assert_eq!(normalise_scores(&single).unwrap()["e"], 1.0);
        let zero: BTreeMap<String, f64> = [("e".into(), 0.0)].into_iter().collect();
        assert_eq!(normalise_scores(&zero), Err(FilterError::AllZero));
        assert_eq!(normalise_scores(&BTreeMap::new()), Err(FilterError::AllZero));
    }

    #[test]
    fn selection_is_strict() {
        let norm: BTreeMap<String, f64> =
            [("a".into(), 1.0), ("b".into(), 0.8), ("c".into(), 0.81)].into_iter().collect();
        let got: Vec<String> = select_elements(&norm, 0.8).into_iter().collect();
        assert_eq!(got, vec!["a", "c"]);
        assert!(select_elements(&norm, 1.0).is_empty());
        let with_zero: BTreeMap<String, f64> = [("a".into(), 1.0), ("z".into(), 0.0)].into_iter().collect();
        assert_eq!(select_elements(&with_zero, 0.0).len(), 1);
    }

    #[test]
    fn short_inputs_emit_nothing() {
        let p = FilterParams::default();
        assert!(filter_trajectory(&[], &p).is_empty());
        assert!(filter_trajectory(&[ap(0, 10.0, &["e"])], &p).is_empty());
        // everything inside one buffer width: the walk never finds a second half
        let close: Vec<_> = (0..5).map(|i| ap(i * 60, 10.0, &["e"])).collect();
        assert!(filter_trajectory(&close, &p).is_empty());
    }

    #[test]
    fn walk_by_hand() {
        // points every 100 s, delta 250: the first half is {0,100,200},
        // so the first point considered is at 200 s.
        let pts: Vec<_> = (0..8).map(|i| ap(i * 100, 10.0, &["e"])).collect();
        let walk = buffer_walk(&pts, 250.0);
        let centres: Vec<usize> = walk.iter().map(|w| w.1).collect();
        // the walk ends as soon as the last point has been pulled in, so
        // centres 5, 6 and 7 are never considered
        assert_eq!(centres, vec![2, 3, 4]);
        assert_eq!(walk[0].0, 0..5);
        assert_eq!(walk[1].0, 1..6);
        assert_eq!(walk[2].0, 2..7);
    }

    #[test]
    fn walk_windows_are_exact_delta_neighbourhoods() {
        // irregular sampling with duplicate timestamps
        let secs = [0, 5, 5, 40, 200, 210, 700, 705, 705, 900, 1500, 1510, 2600, 2601, 2900, 4000];
        let pts: Vec<_> = secs.iter().map(|&s| ap(s, 10.0, &["e"])).collect();
        for delta in [10.0, 100.0, 300.0, 600.0, 1200.0] {
            for (range, centre) in buffer_walk(&pts, delta) {
                let expect: Vec<usize> =
                    (0..pts.len()).filter(|&j| seconds_between(&pts[j], &pts[centre]) <= delta).collect();
                let got: Vec<usize> = range.collect();
                assert_eq!(got, expect, "delta {delta}, centre {centre}");
            }
        }
    }

    #[test]
    fn edge_windows_agree_on_interior_points() {
        let pts: Vec<_> = (0..60)
            .map(|i| {
                let ids: &[&str] = if i % 3 == 0 { &["a", "b"] } else { &["a", "c"] };
                ap(i * 45 + (i % 7) * 3, 5.0 + (i % 4) as f64 * 10.0, ids)
            })
            .collect();
        let strict = FilterParams { delta: 300.0, t: 0.5, edge_windows: false };
        let loose = FilterParams { edge_windows: true, ..strict };
        let walked = filter_trajectory(&pts, &strict);
        let all = filter_trajectory(&pts, &loose);
        assert_eq!(all.len(), pts.len());
        let centres: Vec<usize> = buffer_walk(&pts, strict.delta).into_iter().map(|w| w.1).collect();
        assert_eq!(walked.len(), centres.len());
        for (w, c) in walked.iter().zip(centres) {
            assert_eq!(w, &all[c]);
        }
    }

    #[test]
    fn shared_element_always_kept() {
        let pts: Vec<_> = (0..50).map(|i| ap(i * 120, 10.0 + i as f64, &["shared", &format!("x{}", i % 5)])).collect();
        let out = filter_trajectory(&pts, &FilterParams::default());
        assert!(!out.is_empty());
        for p in out {
            assert!(p.element_ids.contains("shared"));
        }
    }
}
