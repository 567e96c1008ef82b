//! Cost/benefit pruning of a context tree.
//!
//! Information mixes units (seconds, square meters and a tag count), so on
//! real data large areas and long durations dominate the score.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::cluster::{ContextNode, ContextTree, HcdModel};
use crate::geo::area_m2;
use crate::ingest::Taxonomy;
use crate::model::{CoordinateSet, LatLng};
use crate::time::{total_duration_secs, TimeRange};

/// Coordinate tolerance for matching points and coordinate sets, in degrees.
pub const COORD_TOLERANCE_DEG: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum PruneError {
    #[error("theta must be a finite number >= 0, got {0}")]
    InvalidTheta(f64),
    #[error("xi must be a finite number > 0, got {0}")]
    InvalidXi(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PruneParams {
    pub theta: f64,
    pub xi: f64,
}

impl Default for PruneParams {
    fn default() -> Self {
        Self { theta: 0.2, xi: 1.0 }
    }
}

impl PruneParams {
    pub fn new(theta: f64, xi: f64) -> Result<Self, PruneError> {
        let p = Self { theta, xi };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<(), PruneError> {
        if !(self.theta.is_finite() && self.theta >= 0.0) {
            return Err(PruneError::InvalidTheta(self.theta));
        }
        if !(self.xi.is_finite() && self.xi > 0.0) {
            return Err(PruneError::InvalidXi(self.xi));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PruneReport {
    pub theta: f64,
    pub xi: f64,
    pub unpruned_count: usize,
    pub pruned_count: usize,
    /// Sum of [`information`] over every surviving node.
    pub total_information: f64,
    /// Mean pairwise HCD over the leaves of the pruned tree.
    pub avg_leaf_hcd: f64,
}

fn points_of(c: &ContextNode) -> Vec<LatLng> {
    let mut pts: Vec<LatLng> = c.coordsets.iter().flat_map(|s| s.points.iter().copied()).collect();
    pts.sort_by(|a, b| a.lat.total_cmp(&b.lat).then(a.lng.total_cmp(&b.lng)));
    pts.dedup();
    pts
}

/// `pool` must be sorted by latitude.
fn pool_contains(pool: &[LatLng], p: &LatLng) -> bool {
    let start = pool.partition_point(|q| q.lat < p.lat - COORD_TOLERANCE_DEG);
    pool[start..]
        .iter()
        .take_while(|q| q.lat <= p.lat + COORD_TOLERANCE_DEG)
        .any(|q| q.approx_eq(p, COORD_TOLERANCE_DEG))
}

fn times_missing(c: &[TimeRange], p: &[TimeRange]) -> usize {
    c.iter().filter(|r| !p.contains(r)).count()
}

fn coordsets_missing(c: &[CoordinateSet], p: &[CoordinateSet]) -> usize {
    c.iter().filter(|s| !p.iter().any(|q| s.approx_eq(q, COORD_TOLERANCE_DEG))).count()
}

/// Storage cost of keeping `c` given its parent `p`: the penalty `xi` plus
/// one unit per time range, coordinate set and point that `p` lacks.
pub fn cost(c: &ContextNode, p: &ContextNode, xi: f64) -> f64 {
    let pool = points_of(p);
    let points = points_of(c).iter().filter(|q| !pool_contains(&pool, q)).count();
    xi + (times_missing(&c.times, &p.times) + coordsets_missing(&c.coordsets, &p.coordsets) + points) as f64
}

fn total_area(c: &ContextNode) -> f64 {
    c.coordsets.iter().map(area_m2).sum()
}

pub fn information(c: &ContextNode) -> f64 {
    total_duration_secs(&c.times) + total_area(c) + c.tags.len() as f64
}

fn ratio(num: f64, den: f64) -> f64 {
    if den == 0.0 {
        1.0
    } else {
        num / den
    }
}

/// How much of the parent's information `c` does not already repeat:
/// 0 when they match, approaching 1 when `c` is a small fraction of `p`.
pub fn utility(c: &ContextNode, p: &ContextNode) -> f64 {
    let share = (ratio(total_duration_secs(&c.times), total_duration_secs(&p.times))
        + ratio(total_area(c), total_area(p))
        + ratio(c.tags.len() as f64, p.tags.len() as f64))
        / 3.0;
    (1.0 - share).clamp(0.0, 1.0)
}

pub fn cost_benefit(c: &ContextNode, p: &ContextNode, xi: f64) -> f64 {
    utility(c, p) / cost(c, p, xi)
}

/// Returns `None` when `node` is pruned.
fn prune_node(node: &ContextNode, parent: Option<&ContextNode>, params: &PruneParams) -> Option<ContextNode> {
    let children: Vec<ContextNode> =
        node.children.iter().filter_map(|c| prune_node(c, Some(node), params)).collect();
    if let Some(p) = parent {
        if children.is_empty() && cost_benefit(node, p, params.xi) < params.theta {
            return None;
        }
    }
    Some(ContextNode {
        id: node.id,
        tags: node.tags.clone(),
        times: node.times.clone(),
        coordsets: node.coordsets.clone(),
        leaf_element_id: node.leaf_element_id.clone(),
        children,
    })
}

/// Prunes depth-first: a node other than the root goes when none of its
/// children survive and its cost/benefit score against its parent is below
/// `theta`. The taxonomy is needed for the report's average HCD.
pub fn prune_tree(
    tree: &ContextTree,
    params: &PruneParams,
    tax: &Taxonomy,
) -> Result<(ContextTree, PruneReport), PruneError> {
    params.validate()?;
    let root = prune_node(&tree.root, None, params).expect("the root is never pruned");
    let pruned = ContextTree { params: tree.params, root };
    let unpruned_count = pruned.root.node_count();
    let report = PruneReport {
        theta: params.theta,
        xi: params.xi,
        unpruned_count,
        pruned_count: tree.root.node_count() - unpruned_count,
        total_information: pruned.root.walk().map(information).sum(),
        avg_leaf_hcd: average_leaf_hcd(&pruned, tax),
    };
    Ok((pruned, report))
}

/// Mean pairwise HCD over the tree's leaves; 0 with fewer than two leaves.
pub fn average_leaf_hcd(tree: &ContextTree, tax: &Taxonomy) -> f64 {
    let leaves: Vec<&ContextNode> = tree.root.leaves().collect();
    HcdModel::new(leaves.iter().copied(), tree.params, tax).mean_pairwise(&leaves)
}

pub fn write_report_json(reports: &[PruneReport]) -> String {
    serde_json::to_string_pretty(reports).expect("reports serialise")
}

/// Plot-ready rows: `theta,xi,unpruned,avg_hcd,information`.
pub fn write_report_csv(reports: &[PruneReport]) -> String {
    let mut out = String::from("theta,xi,unpruned,avg_hcd,information\n");
    for r in reports {
        writeln!(out, "{},{},{},{},{}", r.theta, r.xi, r.unpruned_count, r.avg_leaf_hcd, r.total_information).unwrap();
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cluster::{build_context_tree, merge_clusters, ClusterParams};
    use crate::geo::METERS_PER_DEGREE;
    use crate::ingest::parse_taxonomy_str;
    use crate::model::{LandUsageElement, Tag, TagSet};
    use crate::summarise::ElementInteraction;
    use approx::assert_relative_eq;
    use chrono::{DateTime, Duration, Utc};
    use proptest::prelude::*;

    fn at(s: i64) -> DateTime<Utc> {
        DateTime::<Utc>::from_timestamp(1_600_000_000 + s, 0).unwrap()
    }

    fn range(a: i64, b: i64) -> TimeRange {
        TimeRange::new(at(a), at(b)).unwrap()
    }

    fn square(lat: f64, lng: f64, side_m: f64) -> CoordinateSet {
        let d = side_m / METERS_PER_DEGREE;
        CoordinateSet::polygon(vec![
            LatLng::new(lat, lng),
            LatLng::new(lat, lng + d),
            LatLng::new(lat + d, lng + d),
            LatLng::new(lat + d, lng),
        ])
        .unwrap()
    }

    fn node(id: u64, tags: &[(&str, &str)], times: Vec<TimeRange>, coordsets: Vec<CoordinateSet>) -> ContextNode {
        ContextNode {
            id,
            tags: tags.iter().map(|(k, v)| Tag::new(k, v).unwrap()).collect(),
            times,
            coordsets,
            leaf_element_id: Some(format!("e{id}")),
            children: vec![],
        }
    }

    fn tax() -> Taxonomy {
        parse_taxonomy_str("entity building\nentity amenity\nbuilding house\nbuilding office\namenity cafe\n").unwrap()
    }

    #[test]
    fn cost_counts_what_the_parent_lacks() {
        let a = node(0, &[("building", "house")], vec![range(0, 300)], vec![square(0.0, 0.0, 10.0)]);
        let b = node(1, &[("amenity", "cafe")], vec![range(1000, 1300)], vec![square(1.0, 1.0, 10.0)]);
        let p = merge_clusters(vec![a.clone(), b], 2);
        assert_eq!(cost(&a, &p, 0.7), 0.7);

        // a's range swallowed into a wider one, its square hulled with an overlapping one
        let c = node(3, &[], vec![range(200, 600)], vec![square(5.0 / METERS_PER_DEGREE, 5.0 / METERS_PER_DEGREE, 10.0)]);
        let q = merge_clusters(vec![a.clone(), c], 4);
        assert_eq!(q.times, vec![range(0, 600)]);
        assert_eq!(q.coordsets.len(), 1);
        let pool = &q.coordsets[0].points;
        let absent = a.coordsets[0].points.iter().filter(|p| !pool.iter().any(|x| x.approx_eq(p, 1e-9))).count();
        assert_eq!(cost(&a, &q, 1.0), 1.0 + 1.0 + 1.0 + absent as f64);
    }

    #[test]
    fn information_adds_components() {
        let c = node(0, &[("building", "house"), ("name", "x")], vec![range(0, 3600)], vec![CoordinateSet::open(vec![LatLng::new(0.0, 0.0)]).unwrap()]);
        assert_eq!(information(&c), 3602.0);
        let empty = ContextNode { tags: TagSet::new(), times: vec![], coordsets: vec![], ..c.clone() };
        assert_eq!(information(&empty), 0.0);
        let sq = node(1, &[], vec![], vec![square(0.0, 0.0, 100.0)]);
        assert_relative_eq!(information(&sq), 10_000.0, max_relative = 1e-3);
    }

    #[test]
    fn utility_cases() {
        let p = node(0, &[("a", "1"), ("b", "2")], vec![range(0, 200)], vec![square(0.0, 0.0, 100.0)]);
        assert_eq!(utility(&p, &p), 0.0);
        assert_eq!(cost_benefit(&p, &p, 1.0), 0.0);
        let half_side = 100.0 / 2f64.sqrt();
        let c = node(1, &[("a", "1")], vec![range(0, 100)], vec![square(0.0, 0.0, half_side)]);
        assert_relative_eq!(utility(&c, &p), 0.5, epsilon = 1e-3);
        let tiny = node(2, &[], vec![range(0, 0)], vec![CoordinateSet::open(vec![LatLng::new(0.0, 0.0)]).unwrap()]);
        assert_eq!(utility(&tiny, &p), 1.0);
        // zero-denominator ratios count as fully shared
        let flat = node(3, &[], vec![], vec![]);
        assert_eq!(utility(&flat, &flat), 0.0);
    }

    #[test]
    fn cost_benefit_scales_inversely_with_xi() {
        let a = node(0, &[("building", "house")], vec![range(0, 300)], vec![square(0.0, 0.0, 10.0)]);
        let b = node(1, &[("amenity", "cafe")], vec![range(1000, 1300)], vec![square(1.0, 1.0, 10.0)]);
        let p = merge_clusters(vec![a.clone(), b], 2);
        let u = utility(&a, &p);
        for xi in [0.5, 1.0, 2.0, 4.0] {
            assert_relative_eq!(cost_benefit(&a, &p, xi), u / xi, epsilon = 1e-15);
        }
    }

    fn sample_tree(n: usize) -> ContextTree {
        let kinds = [("building", "house"), ("building", "office"), ("amenity", "cafe")];
        let leaves: Vec<ElementInteraction> = (0..n)
            .map(|i| {
                let (k, v) = kinds[i % 3];
                let tags: TagSet = [Tag::new(k, v).unwrap()].into_iter().collect();
                let el = LandUsageElement::new(format!("e{i}"), tags, vec![square(i as f64 * 0.001, 0.0, 20.0 + i as f64)], None).unwrap();
                let t0 = at(i as i64 * 5000);
                ElementInteraction { element: el, times: vec![TimeRange::new(t0, t0 + Duration::seconds(60 * (i as i64 + 1))).unwrap()] }
            })
            .collect();
        build_context_tree(&leaves, ClusterParams::default(), &tax()).unwrap()
    }

    #[test]
    fn theta_zero_prunes_nothing() {
        let tree = sample_tree(9);
        let (pruned, report) = prune_tree(&tree, &PruneParams::new(0.0, 1.0).unwrap(), &tax()).unwrap();
        assert_eq!(pruned, tree);
        assert_eq!(report.pruned_count, 0);
        assert_eq!(report.unpruned_count, tree.root.node_count());
    }

    #[test]
    fn identical_child_is_pruned() {
        let leaf = node(0, &[("building", "house")], vec![range(0, 60)], vec![square(0.0, 0.0, 10.0)]);
        let twin = ContextNode { id: 1, ..leaf.clone() };
        let root = merge_clusters(vec![leaf, twin], 2);
        let tree = ContextTree { params: ClusterParams::default(), root };
        let (pruned, report) = prune_tree(&tree, &PruneParams::new(1e-6, 1.0).unwrap(), &tax()).unwrap();
        assert!(pruned.root.is_leaf());
        assert_eq!(report.pruned_count, 2);
        assert_eq!(report.avg_leaf_hcd, 0.0);
    }

    #[test]
    fn bad_params_rejected() {
        assert!(PruneParams::new(-0.1, 1.0).is_err());
        assert!(PruneParams::new(0.1, 0.0).is_err());
        assert!(PruneParams::new(f64::NAN, 1.0).is_err());
    }

    #[test]
    fn csv_has_header_and_rows() {
        let tree = sample_tree(5);
        let reports: Vec<PruneReport> = [0.0, 0.5]
            .iter()
            .map(|&th| prune_tree(&tree, &PruneParams::new(th, 1.0).unwrap(), &tax()).unwrap().1)
            .collect();
        let csv = write_report_csv(&reports);
        assert_eq!(csv.lines().count(), 3);
        assert!(csv.starts_with("theta,xi,unpruned,avg_hcd,information\n0,1,9,"));
        let back: Vec<PruneReport> = serde_json::from_str(&write_report_json(&reports)).unwrap();
        assert_eq!(back, reports);
    }

    fn ids(n: &ContextNode) -> std::collections::BTreeSet<u64> {
        n.walk().map(|x| x.id).collect()
    }

    fn parents(n: &ContextNode, out: &mut std::collections::BTreeMap<u64, u64>) {
        for c in &n.children {
            out.insert(c.id, n.id);
            parents(c, out);
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]
        #[test]
        fn survivors_upward_closed_and_monotone(n in 2usize..14, th in 0.0f64..1.0, xi in 0.1f64..3.0) {
            let tree = sample_tree(n);
            let tax = tax();
            let before: f64 = tree.root.walk().map(information).sum();
            let (lo, rl) = prune_tree(&tree, &PruneParams::new(th, xi).unwrap(), &tax).unwrap();
            let (hi, rh) = prune_tree(&tree, &PruneParams::new(th + 0.1, xi).unwrap(), &tax).unwrap();
            let (hx, _) = prune_tree(&tree, &PruneParams::new(th, xi * 1.5).unwrap(), &tax).unwrap();
            prop_assert!(ids(&hi.root).is_subset(&ids(&lo.root)));
            prop_assert!(ids(&hx.root).is_subset(&ids(&lo.root)));
            prop_assert!(rh.total_information <= rl.total_information);
            prop_assert!(rl.total_information <= before);
            prop_assert_eq!(rl.total_information == before, rl.pruned_count == 0);
            prop_assert_eq!(rl.pruned_count + rl.unpruned_count, tree.root.node_count());
            let mut par = std::collections::BTreeMap::new();
            parents(&tree.root, &mut par);
            let kept = ids(&lo.root);
            for id in &kept {
                if let Some(p) = par.get(id) {
                    prop_assert!(kept.contains(p));
                }
            }
        }
    }
}
