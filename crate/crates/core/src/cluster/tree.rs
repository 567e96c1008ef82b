use std::collections::{BTreeSet, HashMap};

use rayon::prelude::*;

use super::merge::merge_clusters;
use super::similarity::{blend, feature_strings, jaccard, tag_pair_similarity};
use super::{ClusterError, ClusterParams, ContextNode, ContextTree};
use crate::ingest::Taxonomy;
use crate::model::Tag;
use crate::summarise::ElementInteraction;

/// Distances within this much of the round minimum count as ties.
pub const TIE_EPSILON: f64 = 1e-9;

/// Hybrid contextual distance with tag-pair similarities precomputed over
/// a fixed tag vocabulary. Gives the same values as [`super::hcd`].
pub struct HcdModel<'a> {
    tax: &'a Taxonomy,
    params: ClusterParams,
    vocab: Vec<Tag>,
    vocab_sim: Vec<f64>,
}

/// A cluster's tag ids and feature strings, ready for [`HcdModel::distance`].
pub struct Prepared {
    tag_ids: Vec<usize>,
    features: BTreeSet<String>,
}

impl<'a> HcdModel<'a> {
    /// The vocabulary is every tag carried by `nodes`; only clusters whose
    /// tags come from that vocabulary can be prepared.
    pub fn new<'n>(nodes: impl IntoIterator<Item = &'n ContextNode>, params: ClusterParams, tax: &'a Taxonomy) -> Self {
        let vocab: Vec<Tag> = nodes.into_iter().flat_map(|n| n.tags.iter().cloned()).collect::<BTreeSet<_>>().into_iter().collect();
        let v = vocab.len();
        let vocab_sim: Vec<f64> = (0..v * v)
            .into_par_iter()
            .map(|k| tag_pair_similarity(tax, &vocab[k / v], &vocab[k % v], params.tag_sim_mode))
            .collect();
        Self { tax, params, vocab, vocab_sim }
    }

    pub fn prepare(&self, node: &ContextNode) -> Prepared {
        let tag_ids = node
            .tags
            .iter()
            .map(|t| self.vocab.binary_search(t).expect("tag outside the model vocabulary"))
            .collect();
        Prepared { tag_ids, features: feature_strings(node, &self.params.binning) }
    }

    fn directed(&self, from: &[usize], to: &[usize]) -> f64 {
        let v = self.vocab.len();
        let total: f64 = from
            .iter()
            .map(|&i| to.iter().map(|&j| self.vocab_sim[i * v + j]).fold(0.0, f64::max))
            .sum();
        total / from.len() as f64
    }

    pub fn distance(&self, a: &Prepared, b: &Prepared) -> f64 {
        let semantic = if a.tag_ids.is_empty() || b.tag_ids.is_empty() {
            0.0
        } else {
            self.directed(&a.tag_ids, &b.tag_ids).max(self.directed(&b.tag_ids, &a.tag_ids))
        };
        blend(self.params.lambda, semantic, jaccard(&a.features, &b.features))
    }

    /// Mean HCD over all unordered pairs; 0 with fewer than two clusters.
    pub fn mean_pairwise(&self, nodes: &[&ContextNode]) -> f64 {
        let prepared: Vec<Prepared> = nodes.par_iter().map(|n| self.prepare(n)).collect();
        let n = prepared.len();
        if n < 2 {
            return 0.0;
        }
        let total: f64 = (0..n)
            .into_par_iter()
            .map(|i| (i + 1..n).map(|j| self.distance(&prepared[i], &prepared[j])).sum::<f64>())
            .collect::<Vec<f64>>()
            .into_iter()
            .sum();
        total / (n * (n - 1) / 2) as f64
    }

    pub fn taxonomy(&self) -> &Taxonomy {
        self.tax
    }
}

struct Active {
    node: ContextNode,
    prepared: Prepared,
}

/// Greedy agglomerative clustering, one round at a time.
///
/// Each round finds the smallest pairwise distance, takes every pair within
/// [`TIE_EPSILON`] of it, joins pairs that share a cluster into groups, and
/// merges each group into a new parent. Distances between clusters that
/// survive a round are reused rather than recomputed.
pub struct Agglomerator<'a> {
    model: HcdModel<'a>,
    active: Vec<Active>,
    distances: HashMap<(u64, u64), f64>,
    next_id: u64,
}

impl<'a> Agglomerator<'a> {
    pub fn new(leaves: Vec<ContextNode>, params: ClusterParams, tax: &'a Taxonomy) -> Result<Self, ClusterError> {
        params.validate()?;
        if leaves.is_empty() {
            return Err(ClusterError::NoLeaves);
        }
        let model = HcdModel::new(&leaves, params, tax);
        let next_id = leaves.iter().map(|n| n.id).max().map_or(0, |m| m + 1);
        let active = leaves
            .into_iter()
            .map(|node| Active { prepared: model.prepare(&node), node })
            .collect();
        Ok(Self { model, active, distances: HashMap::new(), next_id })
    }

    pub fn is_done(&self) -> bool {
        self.active.len() <= 1
    }

    pub fn clusters(&self) -> impl Iterator<Item = &ContextNode> {
        self.active.iter().map(|a| &a.node)
    }

    fn fill_distances(&mut self) {
        let n = self.active.len();
        let missing: Vec<(usize, usize)> = (0..n)
            .flat_map(|i| (i + 1..n).map(move |j| (i, j)))
            .filter(|&(i, j)| !self.distances.contains_key(&(self.active[i].node.id, self.active[j].node.id)))
            .collect();
        let computed: Vec<((u64, u64), f64)> = missing
            .par_iter()
            .map(|&(i, j)| {
                let (a, b) = (&self.active[i], &self.active[j]);
                ((a.node.id, b.node.id), self.model.distance(&a.prepared, &b.prepared))
            })
            .collect();
        self.distances.extend(computed);
    }

    /// Runs one round and returns the child ids of each group merged, in
    /// merge order. Returns nothing once a single cluster remains.
    pub fn round(&mut self) -> Vec<Vec<u64>> {
        if self.is_done() {
            return Vec::new();
        }
        self.fill_distances();
        let n = self.active.len();
        let dist = |i: usize, j: usize| self.distances[&(self.active[i].node.id, self.active[j].node.id)];

        let mut best = f64::INFINITY;
        for i in 0..n {
            for j in i + 1..n {
                best = best.min(dist(i, j));
            }
        }

        let mut parent: Vec<usize> = (0..n).collect();
        fn find(p: &mut [usize], mut x: usize) -> usize {
            while p[x] != x {
                p[x] = p[p[x]];
                x = p[x];
            }
            x
        }
        for i in 0..n {
            for j in i + 1..n {
                if dist(i, j) <= best + TIE_EPSILON {
                    let (ri, rj) = (find(&mut parent, i), find(&mut parent, j));
                    if ri != rj {
                        parent[ri.max(rj)] = ri.min(rj);
                    }
                }
            }
        }

        // Active clusters are kept in increasing id order, so grouping by
        // root in index order yields groups ordered by their smallest id.
        let mut by_root: Vec<Vec<usize>> = vec![Vec::new(); n];
        for i in 0..n {
            let r = find(&mut parent, i);
            by_root[r].push(i);
        }
        let groups: Vec<Vec<usize>> = by_root.into_iter().filter(|g| g.len() >= 2).collect();

        let mut slots: Vec<Option<Active>> = std::mem::take(&mut self.active).into_iter().map(Some).collect();
        let mut merged_ids = Vec::with_capacity(groups.len());
        let mut created = Vec::with_capacity(groups.len());
        for g in &groups {
            let members: Vec<ContextNode> =
                g.iter().map(|&i| slots[i].take().expect("each cluster joins one group").node).collect();
            merged_ids.push(members.iter().map(|m| m.id).collect::<Vec<_>>());
            let id = self.next_id;
            self.next_id += 1;
            created.push(merge_clusters(members, id));
        }
        self.active = slots.into_iter().flatten().collect();
        for node in created {
            let prepared = self.model.prepare(&node);
            self.active.push(Active { node, prepared });
        }

        let live: BTreeSet<u64> = self.active.iter().map(|a| a.node.id).collect();
        self.distances.retain(|(a, b), _| live.contains(a) && live.contains(b));
        merged_ids
    }

    pub fn finish(mut self) -> ContextTree {
        while !self.is_done() {
            self.round();
        }
        let root = self.active.pop().expect("at least one cluster").node;
        ContextTree { params: self.model.params, root }
    }
}

/// Builds the context tree over the given interactions. Leaves get ids
/// `0..n` in input order; merged clusters continue from `n`.
pub fn build_context_tree(
    leaves: &[ElementInteraction],
    params: ClusterParams,
    tax: &Taxonomy,
) -> Result<ContextTree, ClusterError> {
    let nodes = leaves.iter().enumerate().map(|(i, l)| ContextNode::leaf(i as u64, l)).collect();
    Ok(Agglomerator::new(nodes, params, tax)?.finish())
}
