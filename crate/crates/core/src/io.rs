//! Versioned JSON files for models, task outputs and simulation truth.

use std::fs;
use std::path::Path;
use std::sync::Arc;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::decomposition::{FsvdComponent, FsvdModel};
use crate::error::{FsvdError, Result};
use crate::selection::CvResult;
use crate::simlab::ScenarioTruth;
use crate::spline::{SplineBasis, SplineFunction};
use crate::tasks::factor::FactorSummary;
use crate::tasks::regression::RegressionSummary;
use crate::tasks::ClusterModel;

pub const MODEL_SCHEMA: &str = "fsvd-model/1";
pub const CLUSTER_SCHEMA: &str = "fsvd-cluster/1";
pub const REGRESS_SCHEMA: &str = "fsvd-regress/1";
pub const FACTOR_SCHEMA: &str = "fsvd-factor/1";
pub const TRUTH_SCHEMA: &str = "fsvd-truth/1";

/// Accept `name/1` and `name/1.x`; reject other names and majors.
pub fn check_schema(found: &str, expected: &str) -> Result<()> {
    let err = || FsvdError::UnsupportedSchema {
        found: found.to_string(),
        expected: expected.to_string(),
    };
    let (name, ver) = expected.split_once('/').expect("schema constants have a version");
    let (fname, fver) = found.split_once('/').ok_or_else(err)?;
    let major = fver.split('.').next().unwrap_or("");
    if fname != name || major != ver {
        return Err(err());
    }
    Ok(())
}

/// JSON has no infinities: store non-finite entries as null, read null as +inf.
pub(crate) mod nonfinite_vec {
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    pub fn serialize<S: Serializer>(v: &[f64], s: S) -> Result<S::Ok, S::Error> {
        v.iter()
            .map(|x| x.is_finite().then_some(*x))
            .collect::<Vec<Option<f64>>>()
            .serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<f64>, D::Error> {
        let v = Vec::<Option<f64>>::deserialize(d)?;
        Ok(v.into_iter().map(|x| x.unwrap_or(f64::INFINITY)).collect())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ComponentFile {
    pub rho: f64,
    pub a: Vec<f64>,
    pub phi_values: Vec<f64>,
    pub nu: f64,
    pub iterations_used: usize,
    pub converged: bool,
    pub objective_trace: Vec<f64>,
    pub cv: Option<CvResult>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelFile {
    pub schema: String,
    pub subject_ids: Vec<String>,
    pub knots: Vec<f64>,
    pub tau: f64,
    pub max_iter: usize,
    pub seed: u64,
    pub components: Vec<ComponentFile>,
    pub warnings: Vec<String>,
}

impl ModelFile {
    pub fn from_model(m: &FsvdModel) -> Self {
        ModelFile {
            schema: MODEL_SCHEMA.to_string(),
            subject_ids: m.subject_ids.clone(),
            knots: m.basis.knots().to_vec(),
            tau: m.tau,
            max_iter: m.max_iter,
            seed: m.seed,
            components: m
                .components
                .iter()
                .enumerate()
                .map(|(r, c)| ComponentFile {
                    rho: c.rho,
                    a: c.a.clone(),
                    phi_values: c.phi.values().to_vec(),
                    nu: m.nus[r],
                    iterations_used: c.iterations_used,
                    converged: c.converged,
                    objective_trace: c.objective_trace.clone(),
                    cv: m.cv.get(r).cloned().flatten(),
                })
                .collect(),
            warnings: m.warnings.clone(),
        }
    }

    pub fn into_model(self) -> Result<FsvdModel> {
        check_schema(&self.schema, MODEL_SCHEMA)?;
        let n = self.subject_ids.len();
        let basis = Arc::new(SplineBasis::new(self.knots)?);
        let mut components = Vec::with_capacity(self.components.len());
        let mut nus = Vec::new();
        let mut cv = Vec::new();
        for c in self.components {
            if c.a.len() != n {
                return Err(FsvdError::DimensionMismatch(format!(
                    "component vector has length {}, model has {n} subjects",
                    c.a.len()
                )));
            }
            components.push(FsvdComponent {
                rho: c.rho,
                a: c.a,
                phi: SplineFunction::from_values(Arc::clone(&basis), c.phi_values)?,
                iterations_used: c.iterations_used,
                converged: c.converged,
                objective_trace: c.objective_trace,
            });
            nus.push(c.nu);
            cv.push(c.cv);
        }
        Ok(FsvdModel {
            basis,
            components,
            nus,
            subject_ids: self.subject_ids,
            tau: self.tau,
            max_iter: self.max_iter,
            seed: self.seed,
            cv,
            warnings: self.warnings,
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClusterFile {
    pub schema: String,
    pub subject_ids: Vec<String>,
    #[serde(flatten)]
    pub model: ClusterModel,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct RegressFile {
    pub schema: String,
    pub subject_ids: Vec<String>,
    pub r_use: usize,
    #[serde(flatten)]
    pub model: RegressionSummary,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct FactorFile {
    pub schema: String,
    pub subject_ids: Vec<String>,
    #[serde(flatten)]
    pub model: FactorSummary,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TruthFile {
    pub schema: String,
    #[serde(flatten)]
    pub truth: ScenarioTruth,
}

#[derive(Deserialize)]
struct SchemaOnly {
    schema: String,
}

pub fn to_json<T: Serialize>(v: &T) -> Result<String> {
    let mut s = serde_json::to_string_pretty(v)?;
    s.push('\n');
    Ok(s)
}

/// Parse `text` after checking its `schema` field against `expected`.
pub fn from_json<T: DeserializeOwned>(text: &str, expected: &str) -> Result<T> {
    let head: SchemaOnly = serde_json::from_str(text)?;
    check_schema(&head.schema, expected)?;
    Ok(serde_json::from_str(text)?)
}

pub fn model_to_json(m: &FsvdModel) -> Result<String> {
    to_json(&ModelFile::from_model(m))
}

pub fn model_from_json(text: &str) -> Result<FsvdModel> {
    from_json::<ModelFile>(text, MODEL_SCHEMA)?.into_model()
}

pub fn save_model(m: &FsvdModel, path: impl AsRef<Path>) -> Result<()> {
    fs::write(path, model_to_json(m)?)?;
    Ok(())
}

pub fn load_model(path: impl AsRef<Path>) -> Result<FsvdModel> {
    model_from_json(&fs::read_to_string(path)?)
}

pub fn truth_to_json(t: &ScenarioTruth) -> Result<String> {
    to_json(&TruthFile {
        schema: TRUTH_SCHEMA.to_string(),
        truth: t.clone(),
    })
}

pub fn truth_from_json(text: &str) -> Result<ScenarioTruth> {
    Ok(from_json::<TruthFile>(text, TRUTH_SCHEMA)?.truth)
}
