use super::ContextNode;
use crate::geo::{convex_hull, coordsets_intersect};
use crate::model::{CoordinateSet, LatLng, TagSet};
use crate::time::normalise_ranges;

/// Merges a group of clusters into a new parent with id `id`.
///
/// Times are unioned and coalesced, tags unioned (a key may carry several
/// values), and coordinate sets kept apart unless they intersect, in which
/// case they are replaced by the convex hull of their combined points until
/// no two remaining sets intersect.
pub fn merge_clusters(group: Vec<ContextNode>, id: u64) -> ContextNode {
    assert!(group.len() >= 2, "a merge needs at least two clusters");
    let times = normalise_ranges(group.iter().flat_map(|c| c.times.iter().copied()));
    let tags: TagSet = group.iter().flat_map(|c| c.tags.iter().cloned()).collect();
    let coordsets = merge_coordsets(group.iter().flat_map(|c| c.coordsets.iter()));
    ContextNode { id, tags, times, coordsets, leaf_element_id: None, children: group }
}

/// Keeps the output pairwise non-intersecting: each incoming set absorbs
/// every set it touches before being added.
pub(crate) fn merge_coordsets<'a>(sets: impl IntoIterator<Item = &'a CoordinateSet>) -> Vec<CoordinateSet> {
    let mut out: Vec<CoordinateSet> = Vec::new();
    for s in sets {
        let mut cur = s.clone();
        while let Some(pos) = out.iter().position(|o| coordsets_intersect(o, &cur)) {
            let other = out.remove(pos);
            let pts: Vec<LatLng> = other.points.iter().chain(&cur.points).copied().collect();
            cur = convex_hull(&pts);
        }
        out.push(cur);
    }
    out
}
