//! Linear compatibility constraints on the exogenous PMFs.

use serde::Serialize;

use crate::error::{size_cap, Error, Result};
use crate::graph::{c_components, CComponent};
use crate::likelihood::{context_support, exogenous_ones, EmpiricalTables};
use crate::scm::{MixedRadix, Scm, VarId};

use super::linalg::RowSpace;
use super::vertex::vertices;

/// Tolerance of the rank and consistency tests.
pub const RANK_TOL: f64 = 1e-9;

/// `Σ_{u ∈ support} P(u) = rhs` over the joint exogenous states of a component.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Constraint {
    /// Configuration of the component context.
    pub context: Vec<usize>,
    /// Joint exogenous indices, last exogenous variable fastest.
    pub support: Vec<usize>,
    pub rhs: f64,
    /// Not implied by the simplex constraint and earlier rows.
    pub independent: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ComponentSystem {
    pub exogenous: Vec<VarId>,
    pub cards: Vec<usize>,
    pub context: Vec<VarId>,
    pub rows: Vec<Constraint>,
    /// Context configurations skipped because some conditional is undefined.
    pub omitted: Vec<Vec<usize>>,
    /// The equalities, together with the simplex constraint, have a solution.
    pub consistent: bool,
}

impl ComponentSystem {
    pub fn joint_size(&self) -> usize {
        self.cards.iter().product()
    }

    /// The simplex row followed by the independent constraints, as dense
    /// coefficient rows and right-hand sides.
    pub fn independent_rows(&self) -> (Vec<Vec<f64>>, Vec<f64>) {
        let k = self.joint_size();
        let mut a = vec![vec![1.0; k]];
        let mut b = vec![1.0];
        for r in self.rows.iter().filter(|r| r.independent) {
            a.push(dense(&r.support, k));
            b.push(r.rhs);
        }
        (a, b)
    }

    /// Largest absolute row violation of a joint distribution.
    pub fn residual_joint(&self, joint: &[f64]) -> f64 {
        let simplex = (joint.iter().sum::<f64>() - 1.0).abs();
        self.rows
            .iter()
            .map(|r| (r.support.iter().map(|i| joint[*i]).sum::<f64>() - r.rhs).abs())
            .fold(simplex, f64::max)
    }

    /// Largest absolute row violation of independent per-variable PMFs.
    pub fn residual(&self, pmfs: &[&[f64]]) -> f64 {
        self.residual_joint(&product_joint(&self.cards, pmfs))
    }
}

fn dense(support: &[usize], k: usize) -> Vec<f64> {
    let mut row = vec![0.0; k];
    for i in support {
        row[*i] = 1.0;
    }
    row
}

/// Joint distribution of independent variables, last variable fastest.
pub fn product_joint(cards: &[usize], pmfs: &[&[f64]]) -> Vec<f64> {
    let radix = MixedRadix::new(cards.to_vec());
    let mut digits = vec![0; cards.len()];
    (0..radix.size())
        .map(|i| {
            radix.decode(i, &mut digits);
            digits.iter().zip(pmfs).map(|(d, p)| p[*d]).product()
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConstraintSystem {
    pub components: Vec<ComponentSystem>,
}

impl ConstraintSystem {
    /// Equalities consistent in every component.
    pub fn is_consistent(&self) -> bool {
        self.components.iter().all(|c| c.consistent)
    }

    /// Some nonnegative joint distribution satisfies every component. For
    /// components with several exogenous variables this checks the linear
    /// relaxation over the joint, without the product-form requirement.
    pub fn is_feasible(&self) -> Result<bool> {
        for c in &self.components {
            if !c.consistent || vertices(c, size_cap())?.is_empty() {
                return Ok(false);
            }
        }
        Ok(true)
    }

    /// Largest row violation of the exogenous PMFs of a fully specified model.
    pub fn max_residual(&self, model: &Scm) -> Result<f64> {
        model.require_fully_specified()?;
        let mut worst: f64 = 0.0;
        for c in &self.components {
            let pmfs: Vec<&[f64]> = c
                .exogenous
                .iter()
                .map(|u| model.pmf(*u).expect("fully specified").values())
                .collect();
            worst = worst.max(c.residual(&pmfs));
        }
        Ok(worst)
    }
}

fn component_system(
    model: &Scm,
    comp: &CComponent,
    tables: &crate::likelihood::ComponentTables,
    cap: u64,
) -> Result<ComponentSystem> {
    let ones = exogenous_ones(model, comp, cap)?;
    let k = ones.values().len();
    let ctx_cards: Vec<usize> = comp.context.iter().map(|v| model.card(*v)).collect();
    let ctx_radix = MixedRadix::new(ctx_cards);
    let mut space = RowSpace::new(k, RANK_TOL);
    let mut consistent = space.insert(&vec![1.0; k], 1.0).is_some();
    let mut rows = Vec::new();
    let mut omitted = Vec::new();
    // position of each family's variable and context inside the component context
    let layout: Vec<(usize, Vec<usize>)> = tables
        .families
        .iter()
        .map(|f| {
            let at = |v: &VarId| comp.context.iter().position(|c| c == v).unwrap();
            (at(&f.variable), f.context.iter().map(at).collect())
        })
        .collect();
    for config in ctx_radix.iter() {
        let mut rhs = Some(1.0);
        for (f, (x_at, ctx_at)) in tables.families.iter().zip(&layout) {
            let ctx: Vec<usize> = ctx_at.iter().map(|i| config[*i]).collect();
            rhs = rhs.and_then(|r| f.probability(config[*x_at], &ctx).map(|p| r * p));
        }
        let Some(rhs) = rhs else {
            omitted.push(config);
            continue;
        };
        let support = context_support(model, comp, &config, &ones);
        let independent = match space.insert(&dense(&support, k), rhs) {
            Some(added) => added,
            None => {
                consistent = false;
                false
            }
        };
        rows.push(Constraint {
            context: config,
            support,
            rhs,
            independent,
        });
    }
    Ok(ComponentSystem {
        exogenous: comp.exogenous.clone(),
        cards: ones.cards().to_vec(),
        context: comp.context.clone(),
        rows,
        omitted,
        consistent,
    })
}

/// One equality per component context configuration, with right-hand side
/// the product of the empirical conditionals of the component's variables.
pub fn constraint_system(model: &Scm, tables: &EmpiricalTables) -> Result<ConstraintSystem> {
    let comps = c_components(model);
    if comps.components.len() != tables.components.len() {
        return Err(Error::Model("tables were built for a different model".into()));
    }
    let cap = size_cap();
    let components = comps
        .components
        .iter()
        .zip(&tables.components)
        .map(|(c, t)| component_system(model, c, t, cap))
        .collect::<Result<Vec<_>>>()?;
    Ok(ConstraintSystem { components })
}
