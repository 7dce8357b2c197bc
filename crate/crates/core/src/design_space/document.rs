//! JSON form of a design space.
//!
//! ```json
//! {"format_version": 1,
//!  "variables": [{"name": "l", "kind": "integer", "lower": 1, "upper": 3},
//!                {"name": "a", "kind": "categorical", "levels": ["ReLU", "Tanh"]}],
//!  "rules": [{"decreed": 1, "meta": "l", "values": [2, 3]}]}
//! ```
//!
//! Rule values use the meta variable's natural form: integer values, ordinal
//! level values, or categorical labels (level indices are also accepted).

use serde::{Deserialize, Serialize};

use super::{DesignSpace, Variable, VariableKind};
use crate::error::Error;

pub const SPACE_FORMAT_VERSION: u32 = 1;

fn format_version() -> u32 {
    SPACE_FORMAT_VERSION
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SpaceDocument {
    #[serde(default = "format_version")]
    pub format_version: u32,
    pub variables: Vec<VariableDocument>,
    #[serde(default)]
    pub rules: Vec<RuleDocument>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum VariableDocument {
    Float { name: String, lower: f64, upper: f64 },
    Integer { name: String, lower: i64, upper: i64 },
    Ordinal { name: String, levels: Vec<f64> },
    Categorical { name: String, levels: Vec<String> },
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(untagged)]
pub enum VarRef {
    Index(usize),
    Name(String),
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ValueRef {
    Number(f64),
    Label(String),
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RuleDocument {
    pub decreed: VarRef,
    pub meta: VarRef,
    pub values: Vec<ValueRef>,
}

impl From<VariableDocument> for Variable {
    fn from(doc: VariableDocument) -> Self {
        match doc {
            VariableDocument::Float { name, lower, upper } => Variable::float(name, lower, upper),
            VariableDocument::Integer { name, lower, upper } => Variable::integer(name, lower, upper),
            VariableDocument::Ordinal { name, levels } => Variable::ordinal(name, levels),
            VariableDocument::Categorical { name, levels } => Variable::categorical(name, levels),
        }
    }
}

impl From<&Variable> for VariableDocument {
    fn from(var: &Variable) -> Self {
        let name = var.name.clone();
        match &var.kind {
            VariableKind::Float { lower, upper } => VariableDocument::Float {
                name,
                lower: *lower,
                upper: *upper,
            },
            VariableKind::Integer { lower, upper } => VariableDocument::Integer {
                name,
                lower: *lower,
                upper: *upper,
            },
            VariableKind::Ordinal { levels } => VariableDocument::Ordinal {
                name,
                levels: levels.clone(),
            },
            VariableKind::Categorical { levels } => VariableDocument::Categorical {
                name,
                levels: levels.clone(),
            },
        }
    }
}

fn resolve_var(space: &DesignSpace, r: &VarRef) -> Result<usize, Error> {
    match r {
        VarRef::Index(i) => Ok(*i),
        VarRef::Name(name) => space
            .index_of(name)
            .ok_or_else(|| Error::InvalidSpace(format!("unknown variable '{name}' in rule"))),
    }
}

fn resolve_value(var: &Variable, v: &ValueRef) -> Result<f64, Error> {
    let unknown = || Error::InvalidSpace(format!("activating value {v:?} not in domain of '{}'", var.name));
    match (&var.kind, v) {
        (VariableKind::Ordinal { levels }, ValueRef::Number(x)) => levels
            .iter()
            .position(|l| l == x)
            .map(|i| i as f64)
            .ok_or_else(unknown),
        (VariableKind::Categorical { levels }, ValueRef::Label(s)) => levels
            .iter()
            .position(|l| l == s)
            .map(|i| i as f64)
            .ok_or_else(unknown),
        (_, ValueRef::Number(x)) => Ok(*x),
        (_, ValueRef::Label(s)) => var.parse_value(s).map_err(|_| unknown()),
    }
}

impl TryFrom<SpaceDocument> for DesignSpace {
    type Error = Error;

    fn try_from(doc: SpaceDocument) -> Result<Self, Error> {
        if doc.format_version != SPACE_FORMAT_VERSION {
            return Err(Error::InvalidSpace(format!(
                "unsupported format_version {}",
                doc.format_version
            )));
        }
        let mut space = DesignSpace::new(doc.variables.into_iter().map(Variable::from).collect())?;
        for rule in &doc.rules {
            let decreed = resolve_var(&space, &rule.decreed)?;
            let meta = resolve_var(&space, &rule.meta)?;
            let meta_var = space
                .variables()
                .get(meta)
                .ok_or_else(|| Error::InvalidSpace(format!("meta index {meta} out of range")))?;
            let values = rule
                .values
                .iter()
                .map(|v| resolve_value(meta_var, v))
                .collect::<Result<Vec<_>, _>>()?;
            space.declare_decreed_var(decreed, meta, &values)?;
        }
        Ok(space)
    }
}

impl From<DesignSpace> for SpaceDocument {
    fn from(space: DesignSpace) -> Self {
        let rules = space
            .rules()
            .iter()
            .map(|rule| {
                let meta = &space.variables()[rule.meta];
                let values = rule
                    .values
                    .iter()
                    .map(|&v| match &meta.kind {
                        VariableKind::Categorical { levels } => ValueRef::Label(levels[v as usize].clone()),
                        VariableKind::Ordinal { levels } => ValueRef::Number(levels[v as usize]),
                        _ => ValueRef::Number(v),
                    })
                    .collect();
                RuleDocument {
                    decreed: VarRef::Index(rule.decreed),
                    meta: VarRef::Index(rule.meta),
                    values,
                }
            })
            .collect();
        SpaceDocument {
            format_version: SPACE_FORMAT_VERSION,
            variables: space.variables().iter().map(VariableDocument::from).collect(),
            rules,
        }
    }
}
