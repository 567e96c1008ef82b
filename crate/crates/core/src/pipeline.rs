//! End-to-end run: augment, filter, summarise, cluster, and optionally prune.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::augment::{augment_trajectory, write_augmented_jsonl, AugmentedPoint, SpatialIndex, DEFAULT_CELL_SIZE_M};
use crate::cluster::{build_context_tree, to_dot, write_tree_json, ClusterError, ClusterParams, ContextTree, FeatureBinning, TagSimMode};
use crate::filter::{filter_trajectory, FilterError, FilterParams};
use crate::ingest::{
    parse_land_usage, parse_taxonomy, parse_trajectory, ElementStore, IngestError, Taxonomy, DEFAULT_ACCURACY_M,
};
use crate::model::Trajectory;
use crate::prune::{prune_tree, write_report_json, PruneError, PruneParams, PruneReport};
use crate::summarise::{summarise, write_summary_json, ElementInteraction, SummariseError, DEFAULT_T_MAX};

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error(transparent)]
    Ingest(#[from] IngestError),
    #[error(transparent)]
    Filter(#[from] FilterError),
    #[error(transparent)]
    Summarise(#[from] SummariseError),
    #[error(transparent)]
    Cluster(#[from] ClusterError),
    #[error(transparent)]
    Prune(#[from] PruneError),
    #[error("missing input path: {0}")]
    MissingInput(&'static str),
}

/// Every knob of a run. Missing JSON fields take their defaults.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    pub delta: f64,
    pub t: f64,
    pub edge_windows: bool,
    pub t_max: f64,
    pub lambda: f64,
    pub tag_sim_mode: TagSimMode,
    pub binning: FeatureBinning,
    pub prune: bool,
    pub theta: f64,
    pub xi: f64,
    pub cell_size_m: f64,
    pub default_accuracy_m: f64,
    pub trajectory: Option<PathBuf>,
    pub land_usage: Option<PathBuf>,
    pub taxonomy: Option<PathBuf>,
    /// When set, every intermediate is written here.
    pub output_dir: Option<PathBuf>,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        let f = FilterParams::default();
        let c = ClusterParams::default();
        let p = PruneParams::default();
        Self {
            delta: f.delta,
            t: f.t,
            edge_windows: f.edge_windows,
            t_max: DEFAULT_T_MAX,
            lambda: c.lambda,
            tag_sim_mode: c.tag_sim_mode,
            binning: c.binning,
            prune: false,
            theta: p.theta,
            xi: p.xi,
            cell_size_m: DEFAULT_CELL_SIZE_M,
            default_accuracy_m: DEFAULT_ACCURACY_M,
            trajectory: None,
            land_usage: None,
            taxonomy: None,
            output_dir: None,
        }
    }
}

impl PipelineConfig {
    pub fn filter_params(&self) -> Result<FilterParams, FilterError> {
        Ok(FilterParams { edge_windows: self.edge_windows, ..FilterParams::new(self.delta, self.t)? })
    }

    pub fn cluster_params(&self) -> Result<ClusterParams, ClusterError> {
        let p = ClusterParams { lambda: self.lambda, binning: self.binning, tag_sim_mode: self.tag_sim_mode };
        p.validate()?;
        Ok(p)
    }

    pub fn prune_params(&self) -> Result<PruneParams, PruneError> {
        PruneParams::new(self.theta, self.xi)
    }
}

pub struct PipelineOutput {
    pub augmented: Vec<AugmentedPoint>,
    pub filtered: Vec<AugmentedPoint>,
    pub summary: Vec<ElementInteraction>,
    pub tree: ContextTree,
    pub pruned: Option<(ContextTree, PruneReport)>,
}

/// Runs every stage on already-loaded inputs.
pub fn run_stages(
    config: &PipelineConfig,
    trajectory: &Trajectory,
    store: &ElementStore,
    tax: &Taxonomy,
) -> Result<PipelineOutput, PipelineError> {
    let filter_params = config.filter_params()?;
    let cluster_params = config.cluster_params()?;
    let prune_params = if config.prune { Some(config.prune_params()?) } else { None };

    let index = SpatialIndex::with_cell_size(store, config.cell_size_m);
    let augmented = augment_trajectory(trajectory, &index, store);
    log::info!("augmented {} points", augmented.len());
    let filtered = filter_trajectory(&augmented, &filter_params);
    let summary = summarise(&filtered, |id| store.get(id).cloned(), config.t_max)?;
    log::info!("{} interacted elements", summary.len());
    let tree = build_context_tree(&summary, cluster_params, tax)?;
    let pruned = prune_params.map(|p| prune_tree(&tree, &p, tax)).transpose()?;
    Ok(PipelineOutput { augmented, filtered, summary, tree, pruned })
}

fn require<'a>(p: &'a Option<PathBuf>, name: &'static str) -> Result<&'a Path, PipelineError> {
    p.as_deref().ok_or(PipelineError::MissingInput(name))
}

/// Loads the configured input files and runs every stage, writing the
/// intermediates when `output_dir` is set.
pub fn run_pipeline(config: &PipelineConfig) -> Result<PipelineOutput, PipelineError> {
    let trajectory = parse_trajectory(require(&config.trajectory, "trajectory")?, config.default_accuracy_m)?;
    let store = parse_land_usage(require(&config.land_usage, "land_usage")?)?;
    let tax = parse_taxonomy(require(&config.taxonomy, "taxonomy")?)?;
    let out = run_stages(config, &trajectory, &store, &tax)?;
    if let Some(dir) = &config.output_dir {
        write_outputs(&out, dir)?;
    }
    Ok(out)
}

/// File names used by [`write_outputs`].
pub const AUGMENTED_FILE: &str = "augmented.jsonl";
pub const FILTERED_FILE: &str = "filtered.jsonl";
pub const SUMMARY_FILE: &str = "summary.json";
pub const TREE_FILE: &str = "tree.json";
pub const DOT_FILE: &str = "tree.dot";
pub const PRUNED_TREE_FILE: &str = "pruned_tree.json";
pub const PRUNED_DOT_FILE: &str = "pruned_tree.dot";
pub const PRUNE_REPORT_FILE: &str = "prune_report.json";

pub fn write_file(path: &Path, body: &str) -> Result<(), IngestError> {
    std::fs::write(path, body).map_err(|source| IngestError::Io { path: path.display().to_string(), source })
}

pub fn write_outputs(out: &PipelineOutput, dir: &Path) -> Result<(), IngestError> {
    std::fs::create_dir_all(dir).map_err(|source| IngestError::Io { path: dir.display().to_string(), source })?;
    write_file(&dir.join(AUGMENTED_FILE), &write_augmented_jsonl(&out.augmented))?;
    write_file(&dir.join(FILTERED_FILE), &write_augmented_jsonl(&out.filtered))?;
    write_file(&dir.join(SUMMARY_FILE), &write_summary_json(&out.summary))?;
    write_file(&dir.join(TREE_FILE), &write_tree_json(&out.tree))?;
    write_file(&dir.join(DOT_FILE), &to_dot(&out.tree))?;
    if let Some((tree, report)) = &out.pruned {
        write_file(&dir.join(PRUNED_TREE_FILE), &write_tree_json(tree))?;
        write_file(&dir.join(PRUNED_DOT_FILE), &to_dot(tree))?;
        write_file(&dir.join(PRUNE_REPORT_FILE), &write_report_json(std::slice::from_ref(report)))?;
    }
    Ok(())
}
