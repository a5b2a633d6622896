//! Run configuration. Every field has a default; a JSON file may set any
//! subset and command-line flags override both.

use std::path::{Path, PathBuf};

use searchrec_core::catalog::CategoricalWeighting;
use searchrec_core::counterfactual::{CounterfactualConfig, Scenario};
use searchrec_core::policy::{EstimatorConfig, Method};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Paths {
    pub catalog: Option<PathBuf>,
    /// Column mapping for the catalog CSV; identity when absent.
    pub mapping: Option<PathBuf>,
    pub clickstream: Option<PathBuf>,
    pub outputs: Option<PathBuf>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CatalogSettings {
    pub margin_rate: f64,
    /// Market-value percentile band kept for margin statistics.
    pub trim: (f64, f64),
    pub weighting: CategoricalWeighting,
}

impl Default for CatalogSettings {
    fn default() -> Self {
        CatalogSettings { margin_rate: 0.3, trim: (1.0, 99.0), weighting: CategoricalWeighting::InverseLevels }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ClusteringSettings {
    pub k_min: usize,
    pub k_max: usize,
    pub max_iter: usize,
    pub ward_max_points: Option<usize>,
}

impl Default for ClusteringSettings {
    fn default() -> Self {
        ClusteringSettings { k_min: 3, k_max: 10, max_iter: 300, ward_max_points: Some(2500) }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EstimationSettings {
    pub methods: Vec<Method>,
    /// Numbers of clusters to estimate on. Empty means the silhouette-best K.
    pub k_candidates: Vec<usize>,
    pub holdout: f64,
    /// Hyperparameter blocks are replaced whole.
    pub hyper: EstimatorConfig,
}

impl Default for EstimationSettings {
    fn default() -> Self {
        EstimationSettings {
            methods: vec![Method::Logit, Method::Forest, Method::Boost],
            k_candidates: Vec::new(),
            holdout: 0.2,
            hyper: EstimatorConfig::default(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DpSettings {
    pub horizon: usize,
    pub grid: u32,
}

impl Default for DpSettings {
    fn default() -> Self {
        // G = 4 exceeds the decision-table limit at K = 5; G = 3 fits up to K = 5.
        DpSettings { horizon: searchrec_core::DEFAULT_HORIZON, grid: 3 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CounterfactualSettings {
    pub scenarios: Vec<Scenario>,
    pub bootstrap: usize,
    pub planner: CounterfactualConfig,
}

impl Default for CounterfactualSettings {
    fn default() -> Self {
        CounterfactualSettings { scenarios: Scenario::ALL.to_vec(), bootstrap: 0, planner: CounterfactualConfig::default() }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub paths: Paths,
    pub catalog: CatalogSettings,
    pub clustering: ClusteringSettings,
    pub estimation: EstimationSettings,
    pub dp: DpSettings,
    pub counterfactual: CounterfactualSettings,
    pub seed: Option<u64>,
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self> {
        crate::formats::read_json(path)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Validation(m));
        let c = &self.catalog;
        if !(c.margin_rate > 0.0 && c.margin_rate < 1.0) {
            return bad(format!("catalog.margin_rate must lie in (0, 1), got {}", c.margin_rate));
        }
        if !(0.0 <= c.trim.0 && c.trim.0 < c.trim.1 && c.trim.1 <= 100.0) {
            return bad("catalog.trim must satisfy 0 <= low < high <= 100".into());
        }
        let k = &self.clustering;
        if k.k_min < 2 || k.k_min > k.k_max {
            return bad(format!("clustering needs 2 <= k_min <= k_max, got {}..{}", k.k_min, k.k_max));
        }
        if k.max_iter == 0 {
            return bad("clustering.max_iter must be positive".into());
        }
        let e = &self.estimation;
        if !(e.holdout > 0.0 && e.holdout < 1.0) {
            return bad(format!("estimation.holdout must lie in (0, 1), got {}", e.holdout));
        }
        if e.methods.is_empty() {
            return bad("estimation.methods is empty".into());
        }
        if let Some(&kc) = e.k_candidates.iter().find(|&&kc| kc < k.k_min || kc > k.k_max) {
            return bad(format!("estimation.k_candidates contains {kc}, outside {}..={}", k.k_min, k.k_max));
        }
        if self.dp.horizon < 1 {
            return bad("dp.horizon must be at least 1".into());
        }
        if self.dp.grid < 1 {
            return bad("dp.grid must be at least 1".into());
        }
        if self.counterfactual.bootstrap == 1 {
            return bad("counterfactual.bootstrap must be 0 (off) or at least 2".into());
        }
        Ok(())
    }

    /// Output root: explicit value, else the config's, else `searchrec-out`.
    pub fn output_root(&self) -> PathBuf {
        self.paths.outputs.clone().unwrap_or_else(|| PathBuf::from("searchrec-out"))
    }
}
