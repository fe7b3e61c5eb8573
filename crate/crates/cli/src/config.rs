//! Run configuration: JSON schema, validation and canonical hashing.

use std::path::Path;

use qghom_core::graph_model::{validate_cell, CellGraph, CheckedCell, EdgeKind, PhaseWeight};
use qghom_core::numerics::C;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::CliError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub cell: CellConfig,
    #[serde(default)]
    pub weights: WeightConfig,
    #[serde(default)]
    pub job: JobConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CellConfig {
    pub vertices: Vec<String>,
    pub edges: Vec<EdgeConfig>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum KindConfig {
    Soft,
    Stiff,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EdgeConfig {
    pub id: String,
    pub tail: String,
    pub head: String,
    pub length: f64,
    pub kind: KindConfig,
    /// Required for stiff edges, absent for soft ones.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub a: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum WeightMode {
    /// Phase lists of the two-vertex example (requires that cell shape).
    #[default]
    Example,
    Trivial,
    Explicit,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WeightConfig {
    #[serde(default)]
    pub mode: WeightMode,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub entries: Vec<WeightEntry>,
}

/// w_V(e) = coeff·e^{i·p·τ}.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WeightEntry {
    pub vertex: String,
    pub edge: String,
    pub p: f64,
    /// [re, im]; defaults to 1.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub coeff: Option<[f64; 2]>,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct JobConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub epsilon: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub epsilons: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tau: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tau_grid: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bands: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub z: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub z_max: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub series_terms: Option<usize>,
    /// Stops the kernel series when a term drops below this.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub series_tolerance: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub trials: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub out: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub svg: Option<String>,
}

fn schema(msg: impl Into<String>) -> CliError {
    CliError::Schema(msg.into())
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| schema(format!("{}: {e}", path.display())))?;
        Self::parse(&text)
    }

    pub fn parse(text: &str) -> Result<Self, CliError> {
        let cfg: RunConfig = serde_json::from_str(text).map_err(|e| schema(e.to_string()))?;
        cfg.check()?;
        Ok(cfg)
    }

    fn check(&self) -> Result<(), CliError> {
        let positive = |name: &str, x: Option<f64>| match x {
            Some(v) if !(v > 0.0 && v.is_finite()) => Err(schema(format!("job.{name} must be positive"))),
            _ => Ok(()),
        };
        positive("epsilon", self.job.epsilon)?;
        positive("z_max", self.job.z_max)?;
        positive("series_tolerance", self.job.series_tolerance)?;
        for e in self.job.epsilons.iter().flatten() {
            positive("epsilons", Some(*e))?;
        }
        for (name, v) in [("tau_grid", self.job.tau_grid), ("bands", self.job.bands), ("series_terms", self.job.series_terms), ("trials", self.job.trials)] {
            if v == Some(0) {
                return Err(schema(format!("job.{name} must be at least 1")));
            }
        }
        for e in &self.cell.edges {
            match (e.kind, e.a) {
                (KindConfig::Stiff, None) => return Err(schema(format!("stiff edge {} needs `a`", e.id))),
                (KindConfig::Soft, Some(_)) => return Err(schema(format!("soft edge {} takes no `a`", e.id))),
                _ => {}
            }
        }
        if self.weights.mode != WeightMode::Explicit && !self.weights.entries.is_empty() {
            return Err(schema("weights.entries is only allowed in explicit mode"));
        }
        Ok(())
    }

    /// Stable serialisation: fixed field order, absent options omitted.
    pub fn canonical(&self) -> String {
        serde_json::to_string(self).expect("config serialises")
    }

    pub fn hash(&self) -> String {
        let digest = Sha256::digest(self.canonical().as_bytes());
        digest.iter().map(|b| format!("{b:02x}")).collect()
    }

    /// Builds and validates the cell under `mode`.
    pub fn build_cell(&self, mode: WeightMode) -> Result<CheckedCell, CliError> {
        let mut g = CellGraph::new(self.cell.vertices.iter().cloned());
        for e in &self.cell.edges {
            let kind = match e.kind {
                KindConfig::Soft => EdgeKind::Soft,
                KindConfig::Stiff => EdgeKind::Stiff { a: e.a.unwrap_or(f64::NAN) },
            };
            g.add_edge(&e.id, &e.tail, &e.head, e.length, kind).map_err(|e| schema(e.to_string()))?;
        }
        match mode {
            WeightMode::Trivial => {}
            WeightMode::Example => {
                let shape = g.vertices == ["V1", "V2"]
                    && g.edges.len() == 3
                    && [("e1", 1, 0, false), ("e2", 0, 1, true), ("e3", 0, 1, false)]
                        .iter()
                        .zip(&g.edges)
                        .all(|(&(id, t, h, soft), e)| e.id == id && e.tail == t && e.head == h && e.is_soft() == soft);
                if !shape {
                    return Err(schema("weights.mode = example needs the two-vertex example cell (V1, V2; e1: V2→V1 stiff, e2: V1→V2 soft, e3: V1→V2 stiff)"));
                }
                let (l2, l3) = (g.edges[1].length, g.edges[2].length);
                g.set_weight("V1", "e3", PhaseWeight::phase(l2 - l3)).map_err(|e| schema(e.to_string()))?;
                g.set_weight("V2", "e1", PhaseWeight::phase(l3)).map_err(|e| schema(e.to_string()))?;
            }
            WeightMode::Explicit => {
                for w in &self.weights.entries {
                    let c = w.coeff.map_or(C::new(1.0, 0.0), |[re, im]| C::new(re, im));
                    g.set_weight(&w.vertex, &w.edge, PhaseWeight { coeff: c, rate: w.p })
                        .map_err(|e| schema(e.to_string()))?;
                }
            }
        }
        validate_cell(g).map_err(|e| schema(e.to_string()))
    }
}
