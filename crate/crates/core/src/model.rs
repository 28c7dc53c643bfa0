//! Linear Gaussian model: scalar agents with Gaussian priors observed through
//! noisy linear combinations `y_n = Σ_i A_{n,i} x_i + z_n`.
//!
//! [`ModelSpec`] is the raw, serializable form (the JSON model file).
//! [`LinearGaussianModel`] is only obtainable through [`validate_model`] and
//! therefore always satisfies the model invariants: positive prior and noise
//! variances, nonzero finite coefficients, no dangling or duplicate references.

use std::collections::HashMap;
use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};

/// One variable entry of a model file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VariableSpec {
    pub id: String,
    pub prior_var: f64,
}

/// One factor (local observation) entry of a model file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FactorSpec {
    pub id: String,
    /// Coefficients keyed by variable id, in file order. Duplicates are kept
    /// so that validation can reject them.
    #[serde(with = "coeff_map")]
    pub coeffs: Vec<(String, f64)>,
    pub noise_var: f64,
    pub obs: f64,
}

/// Unvalidated model, exactly as read from or written to a model file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelSpec {
    pub variables: Vec<VariableSpec>,
    pub factors: Vec<FactorSpec>,
}

impl ModelSpec {
    pub fn from_json_str(text: &str) -> Result<Self, ModelError> {
        serde_json::from_str(text).map_err(ModelError::from_json)
    }

    pub fn to_json_string(&self) -> String {
        // Serializing plain strings and finite floats cannot fail.
        serde_json::to_string_pretty(self).expect("model spec serializes")
    }
}

/// A validated scalar variable.
#[derive(Debug, Clone, PartialEq)]
pub struct Variable {
    id: String,
    prior_var: f64,
}

impl Variable {
    pub fn id(&self) -> &str {
        &self.id
    }

    /// Prior variance `W_i`.
    pub fn prior_var(&self) -> f64 {
        self.prior_var
    }

    /// Prior precision `W_i⁻¹`.
    pub fn prior_precision(&self) -> f64 {
        1.0 / self.prior_var
    }
}

/// A validated factor. Coefficients are sorted by variable index.
#[derive(Debug, Clone, PartialEq)]
pub struct Factor {
    id: String,
    coeffs: Vec<(usize, f64)>,
    noise_var: f64,
    obs: f64,
}

impl Factor {
    pub fn id(&self) -> &str {
        &self.id
    }

    /// `(variable index, A_{n,i})` pairs in ascending variable order.
    pub fn coeffs(&self) -> &[(usize, f64)] {
        &self.coeffs
    }

    /// Noise variance `R_n`.
    pub fn noise_var(&self) -> f64 {
        self.noise_var
    }

    /// Observation `y_n`.
    pub fn obs(&self) -> f64 {
        self.obs
    }
}

/// A linear Gaussian model that has passed validation.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearGaussianModel {
    variables: Vec<Variable>,
    factors: Vec<Factor>,
}

impl LinearGaussianModel {
    pub fn variables(&self) -> &[Variable] {
        &self.variables
    }

    pub fn factors(&self) -> &[Factor] {
        &self.factors
    }

    pub fn num_variables(&self) -> usize {
        self.variables.len()
    }

    pub fn num_factors(&self) -> usize {
        self.factors.len()
    }

    /// Number of stored (nonzero) coefficients.
    pub fn num_coefficients(&self) -> usize {
        self.factors.iter().map(|f| f.coeffs.len()).sum()
    }

    pub fn variable_index(&self, id: &str) -> Option<usize> {
        self.variables.iter().position(|v| v.id == id)
    }

    /// Builds a model from a dense coefficient matrix (one row per factor).
    /// Zero entries are treated as absent edges. Ids are `x1..xM` and `f1..fN`.
    pub fn from_dense(
        coefficients: &[Vec<f64>],
        prior_vars: &[f64],
        noise_vars: &[f64],
        obs: &[f64],
    ) -> Result<Self, ModelError> {
        if coefficients.len() != noise_vars.len() || coefficients.len() != obs.len() {
            return Err(ModelError::Shape(format!(
                "{} coefficient rows, {} noise variances, {} observations",
                coefficients.len(),
                noise_vars.len(),
                obs.len()
            )));
        }
        if let Some(row) = coefficients.iter().find(|r| r.len() != prior_vars.len()) {
            return Err(ModelError::Shape(format!(
                "coefficient row has {} entries but there are {} variables",
                row.len(),
                prior_vars.len()
            )));
        }
        let variables = prior_vars
            .iter()
            .enumerate()
            .map(|(i, &w)| VariableSpec {
                id: format!("x{}", i + 1),
                prior_var: w,
            })
            .collect();
        let factors = coefficients
            .iter()
            .enumerate()
            .map(|(n, row)| FactorSpec {
                id: format!("f{}", n + 1),
                coeffs: row
                    .iter()
                    .enumerate()
                    .filter(|(_, &a)| a != 0.0)
                    .map(|(i, &a)| (format!("x{}", i + 1), a))
                    .collect(),
                noise_var: noise_vars[n],
                obs: obs[n],
            })
            .collect();
        validate_model(ModelSpec { variables, factors }).map_err(ModelError::Invalid)
    }

    /// Same structure and variances with a new observation vector.
    pub fn with_observations(&self, obs: &[f64]) -> Result<Self, ModelError> {
        if obs.len() != self.factors.len() {
            return Err(ModelError::Shape(format!(
                "{} observations for {} factors",
                obs.len(),
                self.factors.len()
            )));
        }
        let mut spec = self.to_spec();
        for (f, &y) in spec.factors.iter_mut().zip(obs) {
            f.obs = y;
        }
        validate_model(spec).map_err(ModelError::Invalid)
    }

    /// Converts back to the file representation.
    pub fn to_spec(&self) -> ModelSpec {
        ModelSpec {
            variables: self
                .variables
                .iter()
                .map(|v| VariableSpec {
                    id: v.id.clone(),
                    prior_var: v.prior_var,
                })
                .collect(),
            factors: self
                .factors
                .iter()
                .map(|f| FactorSpec {
                    id: f.id.clone(),
                    coeffs: f
                        .coeffs
                        .iter()
                        .map(|&(i, a)| (self.variables[i].id.clone(), a))
                        .collect(),
                    noise_var: f.noise_var,
                    obs: f.obs,
                })
                .collect(),
        }
    }

    pub fn from_json_str(text: &str) -> Result<Self, ModelError> {
        validate_model(ModelSpec::from_json_str(text)?).map_err(ModelError::Invalid)
    }

    pub fn to_json_string(&self) -> String {
        self.to_spec().to_json_string()
    }

    pub fn read_file(path: impl AsRef<Path>) -> Result<Self, ModelError> {
        let text = std::fs::read_to_string(path)?;
        Self::from_json_str(&text)
    }

    pub fn write_file(&self, path: impl AsRef<Path>) -> Result<(), ModelError> {
        std::fs::write(path, self.to_json_string())?;
        Ok(())
    }
}

impl TryFrom<ModelSpec> for LinearGaussianModel {
    type Error = ValidationReport;

    fn try_from(spec: ModelSpec) -> Result<Self, Self::Error> {
        validate_model(spec)
    }
}

/// What is wrong with one field of a model.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ViolationKind {
    NonPositivePriorVariance,
    NonPositiveNoiseVariance,
    NonFiniteValue,
    ZeroCoefficient,
    DanglingReference,
    DuplicateCoefficient,
    DuplicateVariableId,
    DuplicateFactorId,
    EmptyFactor,
}

impl fmt::Display for ViolationKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let text = match self {
            ViolationKind::NonPositivePriorVariance => "prior_var must be positive",
            ViolationKind::NonPositiveNoiseVariance => "noise_var must be positive",
            ViolationKind::NonFiniteValue => "value must be finite",
            ViolationKind::ZeroCoefficient => "zero coefficient must not be stored",
            ViolationKind::DanglingReference => "dangling reference to unknown variable",
            ViolationKind::DuplicateCoefficient => "duplicate coefficient entry",
            ViolationKind::DuplicateVariableId => "duplicate variable id",
            ViolationKind::DuplicateFactorId => "duplicate factor id",
            ViolationKind::EmptyFactor => "factor has no coefficients",
        };
        f.write_str(text)
    }
}

/// A single invariant violation, located by field and id.
#[derive(Debug, Clone, PartialEq)]
pub struct Violation {
    pub kind: ViolationKind,
    /// e.g. `variables[0]` or `factors[2].coeffs`.
    pub field: String,
    /// The variable or factor id the violation is attached to.
    pub id: String,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} (id {:?}): {}", self.field, self.id, self.kind)
    }
}

/// All violations found in a model, in file order.
#[derive(Debug, Clone, PartialEq)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn contains(&self, kind: ViolationKind) -> bool {
        self.violations.iter().any(|v| v.kind == kind)
    }
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} model violation(s)", self.violations.len())?;
        for v in &self.violations {
            write!(f, "\n  {v}")?;
        }
        Ok(())
    }
}

impl std::error::Error for ValidationReport {}

#[derive(Debug, thiserror::Error)]
pub enum ModelError {
    #[error("parse error at line {line}, column {column}: {message}")]
    Parse {
        line: usize,
        column: usize,
        message: String,
    },
    #[error("invalid model: {0}")]
    Invalid(ValidationReport),
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl ModelError {
    fn from_json(err: serde_json::Error) -> Self {
        let full = err.to_string();
        let suffix = format!(" at line {} column {}", err.line(), err.column());
        ModelError::Parse {
            line: err.line(),
            column: err.column(),
            message: full.strip_suffix(&suffix).unwrap_or(&full).to_string(),
        }
    }
}

/// Checks every model invariant and returns the validated model, or the full
/// list of violations.
pub fn validate_model(spec: ModelSpec) -> Result<LinearGaussianModel, ValidationReport> {
    let mut violations = Vec::new();
    let mut push = |kind, field: String, id: &str| {
        violations.push(Violation {
            kind,
            field,
            id: id.to_string(),
        })
    };

    let mut index: HashMap<&str, usize> = HashMap::with_capacity(spec.variables.len());
    for (i, v) in spec.variables.iter().enumerate() {
        let field = format!("variables[{i}]");
        if index.insert(v.id.as_str(), i).is_some() {
            push(ViolationKind::DuplicateVariableId, field.clone(), &v.id);
        }
        if !v.prior_var.is_finite() {
            push(ViolationKind::NonFiniteValue, format!("{field}.prior_var"), &v.id);
        } else if v.prior_var <= 0.0 {
            push(
                ViolationKind::NonPositivePriorVariance,
                format!("{field}.prior_var"),
                &v.id,
            );
        }
    }

    let mut factor_ids: HashMap<&str, usize> = HashMap::with_capacity(spec.factors.len());
    let mut factors = Vec::with_capacity(spec.factors.len());
    for (n, f) in spec.factors.iter().enumerate() {
        let field = format!("factors[{n}]");
        if factor_ids.insert(f.id.as_str(), n).is_some() {
            push(ViolationKind::DuplicateFactorId, field.clone(), &f.id);
        }
        if !f.noise_var.is_finite() {
            push(ViolationKind::NonFiniteValue, format!("{field}.noise_var"), &f.id);
        } else if f.noise_var <= 0.0 {
            push(
                ViolationKind::NonPositiveNoiseVariance,
                format!("{field}.noise_var"),
                &f.id,
            );
        }
        if !f.obs.is_finite() {
            push(ViolationKind::NonFiniteValue, format!("{field}.obs"), &f.id);
        }
        if f.coeffs.is_empty() {
            push(ViolationKind::EmptyFactor, format!("{field}.coeffs"), &f.id);
        }
        let mut coeffs = Vec::with_capacity(f.coeffs.len());
        for (var_id, a) in &f.coeffs {
            let cfield = format!("{field}.coeffs[{var_id:?}]");
            match index.get(var_id.as_str()) {
                None => push(ViolationKind::DanglingReference, cfield.clone(), var_id),
                Some(&i) => {
                    if coeffs.iter().any(|&(j, _)| j == i) {
                        push(ViolationKind::DuplicateCoefficient, cfield.clone(), var_id);
                    }
                    coeffs.push((i, *a));
                }
            }
            if !a.is_finite() {
                push(ViolationKind::NonFiniteValue, cfield, var_id);
            } else if *a == 0.0 {
                push(ViolationKind::ZeroCoefficient, cfield, var_id);
            }
        }
        coeffs.sort_by_key(|&(i, _)| i);
        factors.push(Factor {
            id: f.id.clone(),
            coeffs,
            noise_var: f.noise_var,
            obs: f.obs,
        });
    }

    if !violations.is_empty() {
        return Err(ValidationReport { violations });
    }
    let variables = spec
        .variables
        .into_iter()
        .map(|v| Variable {
            id: v.id,
            prior_var: v.prior_var,
        })
        .collect();
    Ok(LinearGaussianModel { variables, factors })
}

/// Serializes coefficient lists as JSON objects while keeping file order and
/// duplicate keys on the way in.
mod coeff_map {
    use std::fmt;

    use serde::de::{MapAccess, Visitor};
    use serde::ser::SerializeMap;
    use serde::{Deserializer, Serializer};

    pub fn serialize<S: Serializer>(coeffs: &[(String, f64)], ser: S) -> Result<S::Ok, S::Error> {
        let mut map = ser.serialize_map(Some(coeffs.len()))?;
        for (k, v) in coeffs {
            map.serialize_entry(k, v)?;
        }
        map.end()
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(de: D) -> Result<Vec<(String, f64)>, D::Error> {
        struct PairVisitor;

        impl<'de> Visitor<'de> for PairVisitor {
            type Value = Vec<(String, f64)>;

            fn expecting(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str("an object mapping variable ids to coefficients")
            }

            fn visit_map<M: MapAccess<'de>>(self, mut access: M) -> Result<Self::Value, M::Error> {
                let mut out = Vec::with_capacity(access.size_hint().unwrap_or(0));
                while let Some((k, v)) = access.next_entry::<String, f64>()? {
                    out.push((k, v));
                }
                Ok(out)
            }
        }

        de.deserialize_map(PairVisitor)
    }
}
