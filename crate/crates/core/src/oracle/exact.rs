//! Exact counterfactual bounds for models with one exogenous variable per
//! c-component.

use std::collections::BTreeSet;

use rayon::prelude::*;
use serde::Serialize;

use crate::data::Dataset;
use crate::error::{check_cap, size_cap, Error, Result};
use crate::factor::Outcome;
use crate::graph::{c_components, markovianity_class, Markovianity};
use crate::likelihood::empirical_frequencies;
use crate::query::{evaluate, QueryDescriptor};
use crate::scm::{MixedRadix, Pmf, Scm, VarId};

use super::constraints::constraint_system;
use super::vertex::vertices;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExactBounds {
    pub lower: f64,
    pub upper: f64,
    /// Vertex count of each component polytope.
    pub vertex_counts: Vec<usize>,
    pub evaluations: usize,
    /// Vertex combinations where the query evidence had probability zero.
    pub unsupported: usize,
}

fn ancestors(model: &Scm, vars: impl IntoIterator<Item = VarId>) -> BTreeSet<VarId> {
    let mut seen = BTreeSet::new();
    let mut stack: Vec<VarId> = vars.into_iter().collect();
    while let Some(v) = stack.pop() {
        if seen.insert(v) {
            stack.extend_from_slice(model.parents(v));
        }
    }
    seen
}

/// Minimum and maximum of the query over every combination of vertices of
/// the per-variable compatibility polytopes. The query is multilinear in the
/// exogenous PMFs, so the extrema are attained at such combinations.
pub fn exact_bounds(model: &Scm, data: &Dataset, query: &QueryDescriptor) -> Result<ExactBounds> {
    let comps = c_components(model);
    if markovianity_class(&comps) == Markovianity::General {
        return Err(Error::Unsupported(
            "exact bounds need at most one exogenous variable per c-component".into(),
        ));
    }
    let r = query.resolve(model)?;
    let tables = empirical_frequencies(model, data, &comps)?;
    let system = constraint_system(model, &tables)?;
    if !system.is_consistent() {
        return Err(Error::Incompatible);
    }
    let cap = size_cap();
    let relevant = ancestors(model, [r.x, r.y].into_iter().chain(r.evidence.keys().copied()));
    let mut choices: Vec<(VarId, Vec<Vec<f64>>)> = Vec::new();
    for c in &system.components {
        let Some(&u) = c.exogenous.first() else {
            continue;
        };
        let v = vertices(c, cap)?;
        if v.is_empty() {
            return Err(Error::Incompatible);
        }
        choices.push((u, v));
    }
    let vertex_counts: Vec<usize> = choices.iter().map(|(_, v)| v.len()).collect();
    // irrelevant variables are pinned to their first vertex
    let radix_cards: Vec<usize> = choices
        .iter()
        .map(|(u, v)| if relevant.contains(u) { v.len() } else { 1 })
        .collect();
    let total: u128 = radix_cards.iter().map(|c| *c as u128).product();
    check_cap("vertex combinations for exact bounds (use EMCC bounds instead)", total, cap)?;
    let radix = MixedRadix::new(radix_cards);
    let outcomes = (0..radix.size())
        .into_par_iter()
        .map(|i| {
            let pick = radix.states(i);
            let pmfs = choices
                .iter()
                .zip(&pick)
                .map(|((u, v), k)| Ok((*u, Pmf::from_weights(v[*k].clone())?)))
                .collect::<Result<Vec<_>>>()?;
            evaluate(&model.with_pmfs(pmfs)?, query)
        })
        .collect::<Result<Vec<_>>>()?;
    let values: Vec<f64> = outcomes.iter().filter_map(|o| o.clone().value()).collect();
    let unsupported = outcomes
        .iter()
        .filter(|o| matches!(o, Outcome::UnsupportedEvidence))
        .count();
    let lower = values.iter().copied().fold(f64::INFINITY, f64::min);
    let upper = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if values.is_empty() {
        return Err(Error::Query("query evidence has probability zero at every vertex".into()));
    }
    Ok(ExactBounds {
        lower,
        upper,
        vertex_counts,
        evaluations: outcomes.len(),
        unsupported,
    })
}
