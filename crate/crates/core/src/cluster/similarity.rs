use std::collections::BTreeSet;

use super::{ClusterError, ContextNode, FeatureBinning, TagSimMode};
use crate::geo::{area_m2, min_vertex_distance_m};
use crate::ingest::Taxonomy;
use crate::model::{Tag, TagSet};

/// Wu-Palmer similarity. Words missing from the taxonomy only match
/// themselves.
pub fn wup_similarity(tax: &Taxonomy, a: &str, b: &str) -> f64 {
    match (tax.depth(a), tax.depth(b)) {
        (Some(da), Some(db)) => {
            let lcs = tax.lowest_common_subsumer(a, b).expect("single-rooted taxonomy");
            let dl = tax.depth(lcs).expect("lcs is in the taxonomy");
            2.0 * dl as f64 / (da + db) as f64
        }
        _ => {
            if a.eq_ignore_ascii_case(b) || a.to_lowercase() == b.to_lowercase() {
                1.0
            } else {
                0.0
            }
        }
    }
}

fn tokens(s: &str) -> Vec<&str> {
    s.split(|c: char| c == '_' || c.is_whitespace()).filter(|t| !t.is_empty()).collect()
}

/// Best Wu-Palmer score over the token pairs of two multi-word strings.
pub fn word_similarity(tax: &Taxonomy, a: &str, b: &str) -> f64 {
    let (ta, tb) = (tokens(a), tokens(b));
    if ta.is_empty() || tb.is_empty() {
        return if ta.is_empty() && tb.is_empty() { 1.0 } else { 0.0 };
    }
    let mut best = 0.0f64;
    for x in &ta {
        for y in &tb {
            best = best.max(wup_similarity(tax, x, y));
            if best == 1.0 {
                return best;
            }
        }
    }
    best
}

pub fn tag_pair_similarity(tax: &Taxonomy, a: &Tag, b: &Tag, mode: TagSimMode) -> f64 {
    match mode {
        TagSimMode::Keys => word_similarity(tax, a.key(), b.key()),
        TagSimMode::Values => word_similarity(tax, a.value(), b.value()),
        TagSimMode::Combined => {
            0.5 * word_similarity(tax, a.key(), b.key()) + 0.5 * word_similarity(tax, a.value(), b.value())
        }
    }
}

/// Directed tag-set similarity: each tag of `t1` takes its best match in
/// `t2`, averaged over `t1`.
pub fn tag_sim(t1: &TagSet, t2: &TagSet, tax: &Taxonomy, mode: TagSimMode) -> Result<f64, ClusterError> {
    if t1.is_empty() {
        return Err(ClusterError::EmptyTagSet);
    }
    let total: f64 = t1
        .iter()
        .map(|a| t2.iter().map(|b| tag_pair_similarity(tax, a, b, mode)).fold(0.0, f64::max))
        .sum();
    Ok(total / t1.len() as f64)
}

/// The larger of the two directed tag similarities; tagless clusters score 0.
pub fn semantic_similarity(c1: &ContextNode, c2: &ContextNode, tax: &Taxonomy, mode: TagSimMode) -> f64 {
    if c1.tags.is_empty() || c2.tags.is_empty() {
        return 0.0;
    }
    let ab = tag_sim(&c1.tags, &c2.tags, tax, mode).expect("non-empty");
    let ba = tag_sim(&c2.tags, &c1.tags, tax, mode).expect("non-empty");
    ab.max(ba)
}

/// `floor(log_base(x))` for `x >= 1`, corrected against rounding in `ln`.
pub(crate) fn floor_log(x: f64, base: f64) -> i64 {
    let mut k = (x.ln() / base.ln()).floor() as i64;
    while base.powi(k as i32 + 1) <= x {
        k += 1;
    }
    while base.powi(k as i32) > x {
        k -= 1;
    }
    k
}

/// The four discretised interaction features of a cluster.
pub fn feature_strings(c: &ContextNode, b: &FeatureBinning) -> BTreeSet<String> {
    let n = c.times.len();
    let mean_minutes = if n == 0 {
        0.0
    } else {
        c.times.iter().map(|t| t.duration_secs()).sum::<f64>() / n as f64 / 60.0
    };
    let duration = floor_log(mean_minutes.max(1.0), b.duration_log_base);

    let bins = (24 / b.time_of_day_hours).max(1) as usize + usize::from(24 % b.time_of_day_hours != 0);
    let mut counts = vec![0usize; bins];
    for t in &c.times {
        use chrono::Timelike;
        counts[(t.begin().hour() / b.time_of_day_hours) as usize] += 1;
    }
    let time_of_day = if n == 0 {
        "timeofday_none".to_string()
    } else {
        // max_by_key keeps the last maximum, so scan in reverse for the earliest
        let (bin, _) = counts.iter().enumerate().rev().max_by_key(|(_, c)| **c).expect("bins > 0");
        format!("timeofday_{}", bin as u32 * b.time_of_day_hours)
    };

    let count = floor_log((n as f64).max(1.0), b.count_log_base);

    let area: f64 = c.coordsets.iter().map(area_m2).sum();
    let area_label = if area > 0.0 {
        format!("area_log{}_{}", b.area_log_base, floor_log(area, b.area_log_base))
    } else {
        format!("area_log{}_none", b.area_log_base)
    };

    [
        format!("duration_log{}m_{}", b.duration_log_base, duration),
        time_of_day,
        format!("count_log{}_{}", b.count_log_base, count),
        area_label,
    ]
    .into_iter()
    .collect()
}

/// Jaccard index of two feature sets.
pub fn jaccard(f1: &BTreeSet<String>, f2: &BTreeSet<String>) -> f64 {
    let union = f1.union(f2).count();
    if union == 0 {
        return 1.0;
    }
    f1.intersection(f2).count() as f64 / union as f64
}

pub fn feature_similarity(c1: &ContextNode, c2: &ContextNode, b: &FeatureBinning) -> f64 {
    jaccard(&feature_strings(c1, b), &feature_strings(c2, b))
}

/// Minimum haversine distance between any two vertices of the clusters.
pub fn geographical_distance(c1: &ContextNode, c2: &ContextNode) -> f64 {
    min_vertex_distance_m(
        c1.coordsets.iter().flat_map(|s| s.points.iter()),
        c2.coordsets.iter().flat_map(|s| s.points.iter()),
    )
}

pub(crate) fn blend(lambda: f64, semantic: f64, feature: f64) -> f64 {
    (1.0 - (lambda * semantic + (1.0 - lambda) * feature)).clamp(0.0, 1.0)
}

/// Hybrid contextual distance: one minus the lambda-weighted blend of
/// semantic and feature similarity.
pub fn hcd(
    c1: &ContextNode,
    c2: &ContextNode,
    lambda: f64,
    tax: &Taxonomy,
    b: &FeatureBinning,
    mode: TagSimMode,
) -> f64 {
    blend(lambda, semantic_similarity(c1, c2, tax, mode), feature_similarity(c1, c2, b))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ingest::parse_taxonomy_str;
    use crate::model::{CoordinateSet, LatLng};
    use crate::time::TimeRange;
    use chrono::{DateTime, TimeZone, Utc};

    const TEN: &str = "entity structure\nentity place\nstructure building\nbuilding house\nbuilding university\n\
                       building office\nplace park\nplace shop\nshop bakery\n";

    fn tax() -> Taxonomy {
        parse_taxonomy_str(TEN).unwrap()
    }

    fn tags(pairs: &[(&str, &str)]) -> TagSet {
        pairs.iter().map(|(k, v)| Tag::new(k, v).unwrap()).collect()
    }

    fn at(h: u32, m: u32) -> DateTime<Utc> {
        Utc.with_ymd_and_hms(2020, 3, 2, h, m, 0).unwrap()
    }

    fn node(t: TagSet, times: Vec<TimeRange>, coordsets: Vec<CoordinateSet>) -> ContextNode {
        ContextNode { id: 0, tags: t, times, coordsets, leaf_element_id: Some("x".into()), children: vec![] }
    }

    fn point_set() -> CoordinateSet {
        CoordinateSet::open(vec![LatLng::new(0.0, 0.0)]).unwrap()
    }

    #[test]
    fn wu_palmer_by_hand() {
        let t = tax();
        assert_eq!(t.len(), 10);
        assert_eq!(wup_similarity(&t, "house", "house"), 1.0);
        // lcs building at depth 3, both words at depth 4
        assert_eq!(wup_similarity(&t, "house", "university"), 2.0 * 3.0 / 8.0);
        // lcs entity at depth 1; house depth 4, park depth 3
        assert_eq!(wup_similarity(&t, "house", "park"), 2.0 / 7.0);
        assert_eq!(wup_similarity(&t, "bakery", "shop"), 2.0 * 3.0 / 7.0);
        assert_eq!(wup_similarity(&t, "entity", "entity"), 1.0);
        assert_eq!(wup_similarity(&t, "spaceship", "house"), 0.0);
        assert_eq!(wup_similarity(&t, "spaceship", "Spaceship"), 1.0);
    }

    #[test]
    fn toy_taxonomy_two_thirds() {
        let t = parse_taxonomy_str("entity building\nbuilding house\nbuilding university\n").unwrap();
        assert_eq!(wup_similarity(&t, "house", "university"), 2.0 / 3.0);
        let s = tag_sim(&tags(&[("building", "house")]), &tags(&[("building", "university")]), &t, TagSimMode::Combined)
            .unwrap();
        assert!((s - 5.0 / 6.0).abs() < 1e-15);
        let keys = tag_sim(&tags(&[("building", "house")]), &tags(&[("building", "university")]), &t, TagSimMode::Keys)
            .unwrap();
        assert_eq!(keys, 1.0);
    }

    #[test]
    fn tag_sim_averages_over_first_set() {
        let t = tax();
        let a = tags(&[("building", "house"), ("zzz", "qqq")]);
        let b = tags(&[("building", "house")]);
        assert_eq!(tag_sim(&a, &b, &t, TagSimMode::Combined).unwrap(), 0.5);
        assert_eq!(tag_sim(&b, &a, &t, TagSimMode::Combined).unwrap(), 1.0);
        assert_eq!(tag_sim(&a, &a, &t, TagSimMode::Combined).unwrap(), 1.0);
        assert_eq!(tag_sim(&TagSet::new(), &a, &t, TagSimMode::Combined), Err(ClusterError::EmptyTagSet));
    }

    #[test]
    fn multi_token_values_use_best_token() {
        let t = tax();
        assert_eq!(word_similarity(&t, "bakery_shop", "shop"), 1.0);
        assert_eq!(word_similarity(&t, "bus_stop", "bus stop"), 1.0);
        assert_eq!(word_similarity(&t, "", ""), 1.0);
        assert_eq!(word_similarity(&t, "", "x"), 0.0);
    }

    #[test]
    fn semantic_similarity_cases() {
        let t = tax();
        let a = node(tags(&[("building", "house")]), vec![], vec![point_set()]);
        let b = node(tags(&[("building", "house"), ("shop", "bakery")]), vec![], vec![point_set()]);
        let c = node(tags(&[("aaa", "bbb")]), vec![], vec![point_set()]);
        let m = TagSimMode::Combined;
        assert_eq!(semantic_similarity(&a, &a, &t, m), 1.0);
        assert_eq!(semantic_similarity(&a, &b, &t, m), semantic_similarity(&b, &a, &t, m));
        assert_eq!(semantic_similarity(&a, &c, &t, m), 0.0);
        let empty = node(TagSet::new(), vec![], vec![point_set()]);
        assert_eq!(semantic_similarity(&empty, &a, &t, m), 0.0);
    }

    #[test]
    fn feature_strings_examples() {
        let b = FeatureBinning::default();
        let lunch = node(TagSet::new(), vec![TimeRange::new(at(12, 30), at(13, 30)).unwrap()], vec![point_set()]);
        let f = feature_strings(&lunch, &b);
        assert!(f.contains("timeofday_12"));
        // 60 minutes: floor(log2 60) = 5
        assert!(f.contains("duration_log2m_5"));
        assert!(f.contains("count_log2_0"));
        assert!(f.contains("area_log10_none"));

        let blip = node(TagSet::new(), vec![TimeRange::instant(at(3, 0))], vec![point_set()]);
        let f = feature_strings(&blip, &b);
        assert!(f.contains("duration_log2m_0"));
        assert!(f.contains("count_log2_0"));
        assert!(f.contains("timeofday_0"));
        assert_eq!(f.len(), 4);
    }

    #[test]
    fn modal_time_of_day_tie_goes_early() {
        let b = FeatureBinning::default();
        let n = node(
            TagSet::new(),
            vec![TimeRange::instant(at(17, 0)), TimeRange::instant(at(9, 0))],
            vec![point_set()],
        );
        assert!(feature_strings(&n, &b).contains("timeofday_8"));
    }

    #[test]
    fn floor_log_is_exact_at_powers() {
        assert_eq!(floor_log(1000.0, 10.0), 3);
        assert_eq!(floor_log(999.999, 10.0), 2);
        assert_eq!(floor_log(8.0, 2.0), 3);
        assert_eq!(floor_log(1.0, 2.0), 0);
        assert_eq!(floor_log(0.5, 10.0), -1);
    }

    #[test]
    fn jaccard_over_four_features() {
        let s = |v: &[&str]| v.iter().map(|x| x.to_string()).collect::<BTreeSet<_>>();
        let a = s(&["a", "b", "c", "d"]);
        assert_eq!(jaccard(&a, &a), 1.0);
        assert_eq!(jaccard(&a, &s(&["a", "b", "c", "x"])), 3.0 / 5.0);
        assert_eq!(jaccard(&a, &s(&["a", "b", "y", "x"])), 1.0 / 3.0);
        assert_eq!(jaccard(&a, &s(&["a", "z", "y", "x"])), 1.0 / 7.0);
        assert_eq!(jaccard(&a, &s(&["w", "z", "y", "x"])), 0.0);
    }

    #[test]
    fn geographical_distance_cases() {
        let p = |lat: f64, lng: f64| CoordinateSet::open(vec![LatLng::new(lat, lng)]).unwrap();
        let a = node(TagSet::new(), vec![], vec![p(0.0, 0.0), p(5.0, 5.0)]);
        let b = node(TagSet::new(), vec![], vec![p(0.0, 1.0)]);
        assert!((geographical_distance(&a, &b) - 111_194.9).abs() < 0.1);
        assert_eq!(geographical_distance(&a, &a), 0.0);
    }

    #[test]
    fn hcd_reductions() {
        let t = parse_taxonomy_str("entity building\nbuilding house\nbuilding university\n").unwrap();
        let b = FeatureBinning::default();
        let m = TagSimMode::Combined;
        let x = node(tags(&[("building", "house")]), vec![TimeRange::new(at(12, 30), at(13, 30)).unwrap()], vec![point_set()]);
        assert_eq!(hcd(&x, &x, 0.5, &t, &b, m), 0.0);
        let y = node(
            tags(&[("building", "university")]),
            vec![TimeRange::new(at(12, 40), at(12, 41)).unwrap(), TimeRange::new(at(20, 0), at(20, 1)).unwrap()],
            vec![point_set()],
        );
        let sem = semantic_similarity(&x, &y, &t, m);
        assert!((hcd(&x, &y, 1.0, &t, &b, m) - (1.0 - sem)).abs() < 1e-15);
        // x: {duration 5, tod 12, count 0, none}; y: {duration 0, tod 12, count 1, none}
        // two shared -> Jaccard 1/3
        assert!((feature_similarity(&x, &y, &b) - 1.0 / 3.0).abs() < 1e-15);
        // 1 - (0.6 * 5/6 + 0.4 * 1/3)
        assert!((hcd(&x, &y, 0.6, &t, &b, m) - 0.366_666_666_666_666_7).abs() < 1e-9);
        assert_eq!(hcd(&x, &y, 0.6, &t, &b, m), hcd(&y, &x, 0.6, &t, &b, m));
    }
}
