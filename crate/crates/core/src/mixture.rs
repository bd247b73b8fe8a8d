//! Mixture models over the closed family registry.

use serde::{Deserialize, Serialize};
use std::fmt;
use std::str::FromStr;

use crate::{Error, Result};

/// Base distributions supported by the samplers and testers.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FamilyId {
    Gaussian,
    Cauchy,
    Logistic,
    Laplace,
    Gumbel,
    Exponential,
}

impl FamilyId {
    pub const ALL: [FamilyId; 6] = [
        FamilyId::Gaussian,
        FamilyId::Cauchy,
        FamilyId::Logistic,
        FamilyId::Laplace,
        FamilyId::Gumbel,
        FamilyId::Exponential,
    ];

    pub fn name(self) -> &'static str {
        match self {
            FamilyId::Gaussian => "gaussian",
            FamilyId::Cauchy => "cauchy",
            FamilyId::Logistic => "logistic",
            FamilyId::Laplace => "laplace",
            FamilyId::Gumbel => "gumbel",
            FamilyId::Exponential => "exponential",
        }
    }

    /// Only the Gaussian family is supported for d > 1.
    pub fn supports_dim(self, d: usize) -> bool {
        d == 1 || self == FamilyId::Gaussian
    }
}

impl fmt::Display for FamilyId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for FamilyId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        FamilyId::ALL
            .into_iter()
            .find(|f| f.name() == s.to_ascii_lowercase())
            .ok_or_else(|| Error::UnknownFamily(s.to_string()))
    }
}

/// A uniform-weight mixture of k translates of a base family in R^d.
///
/// For the exponential family each stored "mean" is ln λ of a rate-λ component.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawModel")]
pub struct MixtureModel {
    pub family: FamilyId,
    pub d: usize,
    pub k: usize,
    pub means: Vec<Vec<f64>>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawModel {
    family: FamilyId,
    d: usize,
    k: usize,
    means: Vec<Vec<f64>>,
}

impl TryFrom<RawModel> for MixtureModel {
    type Error = Error;

    fn try_from(raw: RawModel) -> Result<Self> {
        let model = MixtureModel::new(raw.family, raw.means)?;
        if model.d != raw.d || model.k != raw.k {
            return Err(Error::InvalidModel(format!(
                "declared (d={}, k={}) but means give (d={}, k={})",
                raw.d, raw.k, model.d, model.k
            )));
        }
        Ok(model)
    }
}

impl MixtureModel {
    /// Builds a model, inferring d and k from `means`.
    pub fn new(family: FamilyId, means: Vec<Vec<f64>>) -> Result<Self> {
        let k = means.len();
        if k == 0 {
            return Err(Error::InvalidModel("at least one component required".into()));
        }
        let d = means[0].len();
        if d == 0 {
            return Err(Error::InvalidModel("dimension must be positive".into()));
        }
        if let Some(bad) = means.iter().find(|m| m.len() != d) {
            return Err(Error::DimensionMismatch { expected: d, found: bad.len() });
        }
        if means.iter().flatten().any(|x| !x.is_finite()) {
            return Err(Error::InvalidModel("non-finite mean".into()));
        }
        if !family.supports_dim(d) {
            return Err(Error::InvalidModel(format!("family {family} requires d = 1, got {d}")));
        }
        Ok(Self { family, d, k, means })
    }

    /// One-dimensional convenience constructor.
    pub fn new_1d(family: FamilyId, locations: &[f64]) -> Result<Self> {
        Self::new(family, locations.iter().map(|&x| vec![x]).collect())
    }

    pub fn separation(&self) -> f64 {
        crate::geometry::separation(&self.means).expect("validated dimensions")
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("model serializes")
    }

    pub fn from_json(s: &str) -> Result<Self> {
        serde_json::from_str(s).map_err(|e| Error::InvalidModel(e.to_string()))
    }
}
