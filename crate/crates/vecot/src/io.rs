//! JSON file schemas: instances, demand targets, measure pairs and labels.
//!
//! An instance is `{"points": [[..]], "weights": [..], "densities": [[..]]}`
//! with optional `"costs"` (one row per agent) and, for serialized
//! witnesses, a `"witness"` block. All numbers are finite doubles; the
//! usual measure validation runs on load.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::counterexample::WitnessInstance;
use crate::measure::{CostField, LayeredMeasure, MeasureError};
use crate::partition::{Assignment, DemandMatrix, PartitionError};

#[derive(Debug, Error)]
pub enum IoError {
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Measure(#[from] MeasureError),
    #[error(transparent)]
    Partition(#[from] PartitionError),
    #[error("{0}")]
    Invalid(String),
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct WitnessBlock {
    pub boundary_indices: Vec<usize>,
    pub adversarial: Vec<f64>,
    pub designated_pair: (usize, usize),
    pub designated_labels: Vec<usize>,
    pub base_prices: Vec<Vec<f64>>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct InstanceFile {
    pub points: Vec<Vec<f64>>,
    pub weights: Vec<f64>,
    pub densities: Vec<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub costs: Option<Vec<Vec<f64>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub witness: Option<WitnessBlock>,
}

impl InstanceFile {
    pub fn from_json(text: &str) -> Result<Self, IoError> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("instance serializes");
        s.push('\n');
        s
    }

    pub fn measure(&self) -> Result<LayeredMeasure, IoError> {
        Ok(LayeredMeasure::build(
            self.points.clone(),
            self.weights.clone(),
            self.densities.clone(),
        )?)
    }

    pub fn cost_field(&self, m: &LayeredMeasure) -> Result<Option<CostField>, IoError> {
        match &self.costs {
            None => Ok(None),
            Some(rows) => {
                let c = CostField::new(rows.clone())?;
                c.matches(m)?;
                Ok(Some(c))
            }
        }
    }

    pub fn of_measure(m: &LayeredMeasure, costs: Option<&CostField>) -> Self {
        InstanceFile {
            points: m.points().to_vec(),
            weights: m.weights().to_vec(),
            densities: m.densities().to_vec(),
            costs: costs.map(|c| c.rows().to_vec()),
            witness: None,
        }
    }

    pub fn of_witness(wit: &WitnessInstance) -> Self {
        let mut file = Self::of_measure(&wit.measure, Some(&wit.cost));
        file.witness = Some(WitnessBlock {
            boundary_indices: wit.boundary_indices.clone(),
            adversarial: wit.adversarial.clone(),
            designated_pair: wit.designated_pair,
            designated_labels: wit.designated.labels().to_vec(),
            base_prices: (0..wit.base_prices.agents())
                .map(|i| wit.base_prices.row(i).to_vec())
                .collect(),
        });
        file
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct TargetFile {
    pub demand: Vec<Vec<f64>>,
}

impl TargetFile {
    pub fn from_json(text: &str) -> Result<Self, IoError> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("target serializes");
        s.push('\n');
        s
    }

    pub fn of_demand(d: &DemandMatrix) -> Self {
        TargetFile {
            demand: (0..d.agents()).map(|i| d.row(i).to_vec()).collect(),
        }
    }

    pub fn demand_matrix(&self) -> Result<DemandMatrix, IoError> {
        Ok(DemandMatrix::from_rows(&self.demand)?)
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct PairFile {
    pub x: InstanceFile,
    pub y: InstanceFile,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pair_cost: Option<Vec<Vec<f64>>>,
}

impl PairFile {
    pub fn from_json(text: &str) -> Result<Self, IoError> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("pair serializes");
        s.push('\n');
        s
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct LabelsFile {
    pub labels: Vec<usize>,
}

impl LabelsFile {
    pub fn from_json(text: &str) -> Result<Self, IoError> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("labels serialize");
        s.push('\n');
        s
    }

    pub fn of_assignment(a: &Assignment) -> Self {
        LabelsFile {
            labels: a.labels().to_vec(),
        }
    }
}

/// Stable machine-readable kind for an error, used by the CLI's error
/// objects (e.g. `"NonSimplexRow"` for a bad density row).
pub fn error_kind(err: &IoError) -> &'static str {
    match err {
        IoError::Json(_) => "Json",
        IoError::Measure(MeasureError::NonSimplexRow { .. }) => "NonSimplexRow",
        IoError::Measure(MeasureError::DuplicatePoint { .. }) => "DuplicatePoint",
        IoError::Measure(MeasureError::EmptyMeasure) => "EmptyMeasure",
        IoError::Measure(MeasureError::NonPositiveWeight { .. }) => "NonPositiveWeight",
        IoError::Measure(MeasureError::DimensionMismatch(_)) => "DimensionMismatch",
        IoError::Measure(MeasureError::NonFinite(_)) => "NonFinite",
        IoError::Partition(_) => "Partition",
        IoError::Invalid(_) => "Invalid",
    }
}
