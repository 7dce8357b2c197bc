//! Typed, possibly hierarchical design spaces.
//!
//! A [`DesignSpace`] is an ordered list of [`Variable`]s plus a set of
//! [`DecreedRule`]s. A rule says that a *decreed* variable only acts when its
//! *meta* variable takes one of a set of values. Variables that are neither
//! targeted by a rule nor used as a meta variable are *neutral*.
//!
//! Values are stored as `f64` in a per-kind representation: the real value for
//! `Float`, the integer value for `Integer`, and the level index for `Ordinal`
//! and `Categorical` variables. Labels only appear at I/O boundaries.

mod document;

pub use document::{RuleDocument, SpaceDocument, ValueRef, VarRef, VariableDocument};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Domain of a single design variable.
#[derive(Debug, Clone, PartialEq)]
pub enum VariableKind {
    Float { lower: f64, upper: f64 },
    Integer { lower: i64, upper: i64 },
    /// Ordered levels, stored by rank.
    Ordinal { levels: Vec<f64> },
    /// Unordered levels, stored by index.
    Categorical { levels: Vec<String> },
}

impl VariableKind {
    pub fn is_categorical(&self) -> bool {
        matches!(self, VariableKind::Categorical { .. })
    }

    /// Float, Integer and Ordinal variables share the quantitative kernels.
    pub fn is_quantitative(&self) -> bool {
        !self.is_categorical()
    }

    pub fn is_float(&self) -> bool {
        matches!(self, VariableKind::Float { .. })
    }

    pub fn n_levels(&self) -> Option<usize> {
        match self {
            VariableKind::Ordinal { levels } => Some(levels.len()),
            VariableKind::Categorical { levels } => Some(levels.len()),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Variable {
    pub name: String,
    pub kind: VariableKind,
}

impl Variable {
    pub fn float(name: impl Into<String>, lower: f64, upper: f64) -> Self {
        Self {
            name: name.into(),
            kind: VariableKind::Float { lower, upper },
        }
    }

    pub fn integer(name: impl Into<String>, lower: i64, upper: i64) -> Self {
        Self {
            name: name.into(),
            kind: VariableKind::Integer { lower, upper },
        }
    }

    pub fn ordinal(name: impl Into<String>, levels: Vec<f64>) -> Self {
        Self {
            name: name.into(),
            kind: VariableKind::Ordinal { levels },
        }
    }

    pub fn categorical<S: Into<String>>(
        name: impl Into<String>,
        levels: impl IntoIterator<Item = S>,
    ) -> Self {
        Self {
            name: name.into(),
            kind: VariableKind::Categorical {
                levels: levels.into_iter().map(Into::into).collect(),
            },
        }
    }

    fn check(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidSpace(format!("variable '{}': {msg}", self.name)));
        match &self.kind {
            VariableKind::Float { lower, upper } => {
                if !(lower.is_finite() && upper.is_finite()) || lower >= upper {
                    return bad(format!("bounds [{lower}, {upper}] must be finite with lower < upper"));
                }
            }
            VariableKind::Integer { lower, upper } => {
                if lower >= upper {
                    return bad(format!("bounds [{lower}, {upper}] must satisfy lower < upper"));
                }
            }
            VariableKind::Ordinal { levels } => {
                if levels.len() < 2 {
                    return bad("needs at least 2 levels".into());
                }
                if levels.iter().any(|l| !l.is_finite()) {
                    return bad("levels must be finite".into());
                }
                for (i, a) in levels.iter().enumerate() {
                    if levels[..i].contains(a) {
                        return bad(format!("duplicate level {a}"));
                    }
                }
            }
            VariableKind::Categorical { levels } => {
                if levels.len() < 2 {
                    return bad("needs at least 2 levels".into());
                }
                for (i, a) in levels.iter().enumerate() {
                    if levels[..i].contains(a) {
                        return bad(format!("duplicate level '{a}'"));
                    }
                }
            }
        }
        Ok(())
    }

    /// Whether `value` is a valid stored value for this variable.
    pub fn contains(&self, value: f64) -> bool {
        if !value.is_finite() {
            return false;
        }
        match &self.kind {
            VariableKind::Float { lower, upper } => *lower <= value && value <= *upper,
            VariableKind::Integer { lower, upper } => {
                value.fract() == 0.0 && *lower as f64 <= value && value <= *upper as f64
            }
            VariableKind::Ordinal { levels } => index_in_range(value, levels.len()),
            VariableKind::Categorical { levels } => index_in_range(value, levels.len()),
        }
    }

    /// Snaps an arbitrary real to a valid stored value.
    ///
    /// Floats are clipped, integers clipped then floored, level indices snapped
    /// to the nearest index with ties going to the lower one.
    pub fn correct_value(&self, raw: f64) -> f64 {
        match &self.kind {
            VariableKind::Float { lower, upper } => raw.clamp(*lower, *upper),
            VariableKind::Integer { lower, upper } => {
                raw.clamp(*lower as f64, *upper as f64).floor()
            }
            VariableKind::Ordinal { levels } => snap_index(raw, levels.len()),
            VariableKind::Categorical { levels } => snap_index(raw, levels.len()),
        }
    }

    /// Maps a stored value to `[0, 1]`; categorical indices pass through.
    pub fn normalize_value(&self, value: f64) -> f64 {
        match &self.kind {
            VariableKind::Float { lower, upper } => (value - lower) / (upper - lower),
            VariableKind::Integer { lower, upper } => {
                (value - *lower as f64) / (*upper - *lower) as f64
            }
            VariableKind::Ordinal { levels } => value / (levels.len() - 1) as f64,
            VariableKind::Categorical { .. } => value,
        }
    }

    /// Maps a unit-interval coordinate to a raw value such that, after
    /// correction, every integer value or level is drawn with equal width.
    pub fn unit_to_raw(&self, u: f64) -> f64 {
        match &self.kind {
            VariableKind::Float { lower, upper } => lower + u * (upper - lower),
            VariableKind::Integer { lower, upper } => {
                *lower as f64 + u * ((*upper - *lower + 1) as f64)
            }
            VariableKind::Ordinal { levels } => u * levels.len() as f64 - 0.5,
            VariableKind::Categorical { levels } => u * levels.len() as f64 - 0.5,
        }
    }

    fn impute_value(&self, policy: ImputationPolicy) -> f64 {
        match (&self.kind, policy) {
            (VariableKind::Float { lower, upper }, _) => 0.5 * (lower + upper),
            (VariableKind::Integer { lower, .. }, ImputationPolicy::Default) => *lower as f64,
            (VariableKind::Integer { lower, upper }, ImputationPolicy::Mean) => {
                (0.5 * (*lower + *upper) as f64).floor()
            }
            (_, ImputationPolicy::Default) => 0.0,
            (kind, ImputationPolicy::Mean) => {
                let n = kind.n_levels().unwrap_or(1);
                (0.5 * (n - 1) as f64).floor()
            }
        }
    }

    /// Human-readable form of a stored value (labels for categorical levels,
    /// level values for ordinals).
    pub fn format_value(&self, value: f64) -> String {
        match &self.kind {
            VariableKind::Float { .. } => format!("{value}"),
            VariableKind::Integer { .. } => format!("{}", value as i64),
            VariableKind::Ordinal { levels } => levels
                .get(value as usize)
                .map(|l| format!("{l}"))
                .unwrap_or_else(|| format!("{value}")),
            VariableKind::Categorical { levels } => levels
                .get(value as usize)
                .cloned()
                .unwrap_or_else(|| format!("{value}")),
        }
    }

    /// Inverse of [`Variable::format_value`].
    pub fn parse_value(&self, text: &str) -> Result<f64> {
        let text = text.trim();
        let err = || {
            Error::InvalidInput(format!("'{text}' is not a value of variable '{}'", self.name))
        };
        match &self.kind {
            VariableKind::Float { .. } | VariableKind::Integer { .. } => {
                text.parse::<f64>().map_err(|_| err())
            }
            VariableKind::Ordinal { levels } => {
                let v: f64 = text.parse().map_err(|_| err())?;
                levels.iter().position(|l| *l == v).map(|i| i as f64).ok_or_else(err)
            }
            VariableKind::Categorical { levels } => levels
                .iter()
                .position(|l| l == text)
                .map(|i| i as f64)
                .ok_or_else(err),
        }
    }
}

fn index_in_range(value: f64, n: usize) -> bool {
    value.fract() == 0.0 && value >= 0.0 && value < n as f64
}

fn snap_index(raw: f64, n: usize) -> f64 {
    let clipped = raw.clamp(0.0, (n - 1) as f64);
    // nearest, ties to the lower index
    (clipped - 0.5).ceil().max(0.0)
}

/// Role of a variable in the hierarchy.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Role {
    Neutral,
    Meta,
    Decreed,
}

/// `decreed` acts only when `meta` is acting and its value is in `values`.
#[derive(Debug, Clone, PartialEq)]
pub struct DecreedRule {
    pub decreed: usize,
    pub meta: usize,
    /// Activating values in the meta variable's stored representation.
    pub values: Vec<f64>,
}

/// How non-acting variables are filled in.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum ImputationPolicy {
    /// Lowest value (level 0) for discrete variables, mid-bounds for floats.
    #[default]
    Default,
    /// Mean of the bounds, floored for discrete variables.
    Mean,
}

/// A design vector with its acting mask.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DesignPoint {
    pub values: Vec<f64>,
    pub acting: Vec<bool>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "SpaceDocument", into = "SpaceDocument")]
pub struct DesignSpace {
    variables: Vec<Variable>,
    rules: Vec<DecreedRule>,
    /// Index into `rules` of the rule decreeing each variable.
    decreed_by: Vec<Option<usize>>,
}

impl DesignSpace {
    pub fn new(variables: Vec<Variable>) -> Result<Self> {
        if variables.is_empty() {
            return Err(Error::InvalidSpace("no variables".into()));
        }
        for v in &variables {
            v.check()?;
        }
        let n = variables.len();
        Ok(Self {
            variables,
            rules: Vec::new(),
            decreed_by: vec![None; n],
        })
    }

    /// Declares `decreed` as acting only when `meta` takes one of `values`.
    ///
    /// Fails on out-of-range indices, values outside the meta domain, a
    /// continuous meta variable, a variable decreed twice, or a rule that
    /// would close an activation cycle.
    pub fn declare_decreed_var(&mut self, decreed: usize, meta: usize, values: &[f64]) -> Result<()> {
        let n = self.variables.len();
        if decreed >= n || meta >= n {
            return Err(Error::InvalidSpace(format!(
                "rule indices ({decreed}, {meta}) out of range for {n} variables"
            )));
        }
        if decreed == meta {
            return Err(Error::InvalidSpace(format!(
                "variable {decreed} cannot decree itself (activation cycle)"
            )));
        }
        if self.decreed_by[decreed].is_some() {
            return Err(Error::InvalidSpace(format!(
                "variable {decreed} is already decreed by another rule"
            )));
        }
        let meta_var = &self.variables[meta];
        if meta_var.kind.is_float() {
            return Err(Error::InvalidSpace(format!(
                "meta variable '{}' must be discrete",
                meta_var.name
            )));
        }
        if values.is_empty() {
            return Err(Error::InvalidSpace("a rule needs at least one activating value".into()));
        }
        if let Some(v) = values.iter().find(|v| !meta_var.contains(**v)) {
            return Err(Error::InvalidSpace(format!(
                "activating value {v} is outside the domain of '{}'",
                meta_var.name
            )));
        }
        // walk up from the meta variable; reaching `decreed` means a cycle
        let mut cursor = Some(meta);
        while let Some(i) = cursor {
            if i == decreed {
                return Err(Error::InvalidSpace(format!(
                    "rule {decreed} <- {meta} closes an activation cycle"
                )));
            }
            cursor = self.decreed_by[i].map(|r| self.rules[r].meta);
        }
        self.decreed_by[decreed] = Some(self.rules.len());
        self.rules.push(DecreedRule {
            decreed,
            meta,
            values: values.to_vec(),
        });
        Ok(())
    }

    pub fn n_vars(&self) -> usize {
        self.variables.len()
    }

    pub fn variables(&self) -> &[Variable] {
        &self.variables
    }

    pub fn rules(&self) -> &[DecreedRule] {
        &self.rules
    }

    pub fn is_hierarchical(&self) -> bool {
        !self.rules.is_empty()
    }

    pub fn role(&self, i: usize) -> Role {
        if self.decreed_by[i].is_some() {
            Role::Decreed
        } else if self.rules.iter().any(|r| r.meta == i) {
            Role::Meta
        } else {
            Role::Neutral
        }
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.variables.iter().position(|v| v.name == name)
    }

    fn check_len(&self, len: usize) -> Result<()> {
        if len != self.variables.len() {
            return Err(Error::DimensionMismatch {
                expected: self.variables.len(),
                got: len,
            });
        }
        Ok(())
    }

    /// Acting mask of a vector whose meta values are already valid.
    pub fn activity_mask(&self, values: &[f64]) -> Result<Vec<bool>> {
        self.check_len(values.len())?;
        let mut mask: Vec<Option<bool>> = vec![None; values.len()];
        for i in 0..values.len() {
            self.resolve_acting(i, values, &mut mask)?;
        }
        Ok(mask.into_iter().map(|m| m.unwrap_or(true)).collect())
    }

    fn resolve_acting(&self, i: usize, values: &[f64], mask: &mut [Option<bool>]) -> Result<bool> {
        if let Some(known) = mask[i] {
            return Ok(known);
        }
        let acting = match self.decreed_by[i] {
            None => true,
            Some(r) => {
                let rule = &self.rules[r];
                let meta_value = values[rule.meta];
                if !self.variables[rule.meta].contains(meta_value) {
                    return Err(Error::InvalidInput(format!(
                        "meta variable '{}' has value {meta_value} outside its domain",
                        self.variables[rule.meta].name
                    )));
                }
                self.resolve_acting(rule.meta, values, mask)? && rule.values.contains(&meta_value)
            }
        };
        mask[i] = Some(acting);
        Ok(acting)
    }

    /// Corrects a raw vector, computes its acting mask and imputes the
    /// non-acting entries with the default policy.
    pub fn correct(&self, raw: &[f64]) -> Result<DesignPoint> {
        self.correct_with(raw, ImputationPolicy::Default)
    }

    pub fn correct_with(&self, raw: &[f64], policy: ImputationPolicy) -> Result<DesignPoint> {
        self.check_len(raw.len())?;
        if let Some(i) = raw.iter().position(|v| !v.is_finite()) {
            return Err(Error::InvalidInput(format!(
                "non-numeric value {} for variable '{}'",
                raw[i], self.variables[i].name
            )));
        }
        let values: Vec<f64> = self
            .variables
            .iter()
            .zip(raw)
            .map(|(var, &x)| var.correct_value(x))
            .collect();
        let acting = self.activity_mask(&values)?;
        Ok(self.impute(DesignPoint { values, acting }, policy))
    }

    /// Replaces non-acting entries by their imputation value.
    pub fn impute(&self, mut point: DesignPoint, policy: ImputationPolicy) -> DesignPoint {
        for ((value, &acting), var) in point.values.iter_mut().zip(&point.acting).zip(&self.variables) {
            if !acting {
                *value = var.impute_value(policy);
            }
        }
        point
    }

    /// Maps a corrected point to the unit hypercube (categorical indices pass through).
    pub fn normalize(&self, point: &DesignPoint) -> Vec<f64> {
        self.variables
            .iter()
            .zip(&point.values)
            .map(|(var, &v)| var.normalize_value(v))
            .collect()
    }

    /// Maps a unit-hypercube row to raw values ready for [`DesignSpace::correct`].
    pub fn unit_to_raw(&self, unit: &[f64]) -> Result<Vec<f64>> {
        self.check_len(unit.len())?;
        Ok(self
            .variables
            .iter()
            .zip(unit)
            .map(|(var, &u)| var.unit_to_raw(u))
            .collect())
    }

    /// Checks every [`DesignPoint`] invariant: the mask matches the meta
    /// values and every acting value lies in its domain.
    pub fn validate(&self, point: &DesignPoint) -> Result<()> {
        self.check_len(point.values.len())?;
        self.check_len(point.acting.len())?;
        let mask = self.activity_mask(&point.values)?;
        if mask != point.acting {
            return Err(Error::InvalidInput("acting mask is inconsistent with meta values".into()));
        }
        for (i, var) in self.variables.iter().enumerate() {
            if point.acting[i] && !var.contains(point.values[i]) {
                return Err(Error::InvalidInput(format!(
                    "value {} is outside the domain of '{}'",
                    point.values[i], var.name
                )));
            }
        }
        Ok(())
    }

    pub fn is_valid(&self, point: &DesignPoint) -> bool {
        self.validate(point).is_ok()
    }

    /// Formats a point for CSV output.
    pub fn format_point(&self, values: &[f64]) -> Vec<String> {
        self.variables
            .iter()
            .zip(values)
            .map(|(var, &v)| var.format_value(v))
            .collect()
    }

    /// Parses a CSV row (labels for categorical levels) into stored values.
    pub fn parse_point(&self, fields: &[&str]) -> Result<Vec<f64>> {
        self.check_len(fields.len())?;
        self.variables
            .iter()
            .zip(fields)
            .map(|(var, f)| var.parse_value(f))
            .collect()
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }
}
