//! JSON model files.
//!
//! ```json
//! {
//!   "variables": [
//!     {"name": "X", "cardinality": 2, "kind": "endogenous"},
//!     {"name": "U", "cardinality": 2, "kind": "exogenous"}
//!   ],
//!   "equations": [{"child": "X", "parents": ["U"], "table": [0, 1]}],
//!   "pmfs": {"U": [0.3, 0.7]}
//! }
//! ```
//!
//! Tables list the child state for each parent configuration, first parent
//! most significant. An equation may set `"conservative": true` instead of a
//! table when its last parent is an exogenous variable whose states enumerate
//! every map from the other parents to the child. `pmfs` is optional.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scm::{conservative_table, Pmf, Scm, ScmBuilder, Variable};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EquationSpec {
    pub child: String,
    pub parents: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub table: Option<Vec<usize>>,
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub conservative: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelFile {
    pub variables: Vec<Variable>,
    pub equations: Vec<EquationSpec>,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub pmfs: BTreeMap<String, Vec<f64>>,
}

impl ModelFile {
    pub fn from_model(model: &Scm) -> Self {
        ModelFile {
            variables: model.variables().to_vec(),
            equations: model
                .endogenous()
                .into_iter()
                .map(|x| {
                    let eq = model.equation(x).expect("endogenous");
                    EquationSpec {
                        child: model.name(x).to_string(),
                        parents: eq.parents.iter().map(|p| model.name(*p).to_string()).collect(),
                        table: Some(eq.table.clone()),
                        conservative: false,
                    }
                })
                .collect(),
            pmfs: model
                .exogenous()
                .into_iter()
                .filter_map(|u| model.pmf(u).map(|p| (model.name(u).to_string(), p.values().to_vec())))
                .collect(),
        }
    }

    pub fn to_model(&self) -> Result<Scm> {
        let mut b = ScmBuilder::new();
        let mut ids = BTreeMap::new();
        for v in &self.variables {
            ids.insert(v.name.clone(), b.variable(v.clone()));
        }
        let id = |name: &str| ids.get(name).copied().ok_or_else(|| Error::UnknownVariable(name.into()));
        for eq in &self.equations {
            let child = id(&eq.child)?;
            let parents = eq.parents.iter().map(|p| id(p)).collect::<Result<Vec<_>>>()?;
            let table = match (&eq.table, eq.conservative) {
                (Some(t), false) => t.clone(),
                (None, true) => {
                    let (u, endo) = parents.split_last().ok_or_else(|| {
                        Error::Model(format!("conservative `{}` needs an exogenous parent", eq.child))
                    })?;
                    let cards: Vec<usize> = endo.iter().map(|p| b.card(*p)).collect();
                    let se = conservative_table(b.card(child), &cards)?;
                    if b.card(*u) != se.exo_cardinality {
                        return Err(Error::Model(format!(
                            "conservative `{}` needs `{}` with {} states",
                            eq.child,
                            b.name(*u),
                            se.exo_cardinality
                        )));
                    }
                    se.table
                }
                _ => {
                    return Err(Error::Model(format!(
                        "equation of `{}` needs exactly one of `table` and `conservative`",
                        eq.child
                    )))
                }
            };
            b.equation(child, &parents, table);
        }
        for (name, values) in &self.pmfs {
            b.pmf(id(name)?, Pmf::new(values.clone())?);
        }
        b.build()
    }
}

pub fn read_model(json: &str) -> Result<Scm> {
    serde_json::from_str::<ModelFile>(json)?.to_model()
}

pub fn load_model(path: impl AsRef<Path>) -> Result<Scm> {
    read_model(&std::fs::read_to_string(path)?)
}

pub fn model_to_json(model: &Scm) -> Result<String> {
    Ok(serde_json::to_string_pretty(&ModelFile::from_model(model))?)
}
