//! Context-tree construction: cluster merging, contextual distance, and
//! greedy agglomerative clustering.

mod export;
mod merge;
mod similarity;
mod tree;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{CoordinateSet, TagSet};
use crate::summarise::ElementInteraction;
use crate::time::{normalise_ranges, TimeRange};

pub use export::{read_tree_json, to_dot, write_tree_json};
pub use merge::merge_clusters;
pub use similarity::{
    feature_similarity, feature_strings, geographical_distance, hcd, jaccard, semantic_similarity, tag_pair_similarity,
    tag_sim, word_similarity, wup_similarity,
};
pub use tree::{build_context_tree, Agglomerator, HcdModel, Prepared, TIE_EPSILON};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ClusterError {
    #[error("tag set is empty")]
    EmptyTagSet,
    #[error("cannot build a tree from zero leaves")]
    NoLeaves,
    #[error("lambda must lie in [0, 1], got {0}")]
    InvalidLambda(f64),
    #[error("feature binning parameters must be positive")]
    InvalidBinning,
}

/// One cluster of the tree. Leaves wrap a single element interaction.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContextNode {
    pub id: u64,
    pub tags: TagSet,
    pub times: Vec<TimeRange>,
    pub coordsets: Vec<CoordinateSet>,
    #[serde(default)]
    pub leaf_element_id: Option<String>,
    #[serde(default)]
    pub children: Vec<ContextNode>,
}

impl ContextNode {
    pub fn leaf(id: u64, interaction: &ElementInteraction) -> Self {
        Self {
            id,
            tags: interaction.element.tags.clone(),
            times: normalise_ranges(interaction.times.iter().copied()),
            coordsets: interaction.element.coordsets.clone(),
            leaf_element_id: Some(interaction.element.id.clone()),
            children: Vec::new(),
        }
    }

    pub fn is_leaf(&self) -> bool {
        self.children.is_empty()
    }

    /// Pre-order traversal.
    pub fn walk(&self) -> impl Iterator<Item = &ContextNode> {
        let mut stack = vec![self];
        std::iter::from_fn(move || {
            let n = stack.pop()?;
            stack.extend(n.children.iter().rev());
            Some(n)
        })
    }

    pub fn leaves(&self) -> impl Iterator<Item = &ContextNode> {
        self.walk().filter(|n| n.is_leaf())
    }

    pub fn node_count(&self) -> usize {
        self.walk().count()
    }
}

/// How the similarity of two tags is derived from their parts.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TagSimMode {
    Keys,
    Values,
    #[default]
    Combined,
}

impl std::str::FromStr for TagSimMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "keys" => Ok(Self::Keys),
            "values" => Ok(Self::Values),
            "combined" => Ok(Self::Combined),
            other => Err(format!("unknown tag similarity mode '{other}'")),
        }
    }
}

/// Discretisation of the interaction features into strings.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FeatureBinning {
    /// Width of a time-of-day bin in hours.
    pub time_of_day_hours: u32,
    /// Log base for mean interaction duration in minutes.
    pub duration_log_base: f64,
    /// Log base for the number of interactions.
    pub count_log_base: f64,
    /// Log base for covered area in square meters.
    pub area_log_base: f64,
}

impl Default for FeatureBinning {
    fn default() -> Self {
        Self { time_of_day_hours: 4, duration_log_base: 2.0, count_log_base: 2.0, area_log_base: 10.0 }
    }
}

impl FeatureBinning {
    pub fn validate(&self) -> Result<(), ClusterError> {
        let ok = self.time_of_day_hours > 0
            && self.time_of_day_hours <= 24
            && [self.duration_log_base, self.count_log_base, self.area_log_base].iter().all(|b| *b > 1.0);
        if ok {
            Ok(())
        } else {
            Err(ClusterError::InvalidBinning)
        }
    }
}

/// Parameters of the contextual distance.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClusterParams {
    pub lambda: f64,
    pub binning: FeatureBinning,
    pub tag_sim_mode: TagSimMode,
}

impl Default for ClusterParams {
    fn default() -> Self {
        Self { lambda: 0.5, binning: FeatureBinning::default(), tag_sim_mode: TagSimMode::Combined }
    }
}

impl ClusterParams {
    pub fn validate(&self) -> Result<(), ClusterError> {
        if !(0.0..=1.0).contains(&self.lambda) {
            return Err(ClusterError::InvalidLambda(self.lambda));
        }
        self.binning.validate()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContextTree {
    pub params: ClusterParams,
    pub root: ContextNode,
}
