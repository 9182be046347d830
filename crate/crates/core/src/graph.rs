//! Graph-level analysis: c-components of the reduced graph, their contexts,
//! and counterfactual (twin) graphs with interventional surgery.

use std::collections::BTreeMap;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::scm::{Scm, ScmBuilder, StructuralEquation, VarId, Variable};

/// One connected component of the graph obtained by dropping every arc
/// between endogenous variables.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CComponent {
    /// Exogenous members.
    pub exogenous: Vec<VarId>,
    /// Endogenous members, in topological order.
    pub endogenous: Vec<VarId>,
    /// Endogenous members plus their endogenous parents, in topological order.
    pub context: Vec<VarId>,
    /// For each endogenous member, the context with the member itself and
    /// every node following it topologically removed.
    pub per_var_context: Vec<(VarId, Vec<VarId>)>,
}

impl CComponent {
    pub fn context_of(&self, x: VarId) -> &[VarId] {
        self.per_var_context
            .iter()
            .find(|(v, _)| *v == x)
            .map(|(_, c)| c.as_slice())
            .expect("variable belongs to component")
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CComponents {
    pub components: Vec<CComponent>,
    /// Topological order used for the "topologically following" test.
    pub order: Vec<VarId>,
}

impl CComponents {
    pub fn of_exogenous(&self, u: VarId) -> Option<usize> {
        self.components.iter().position(|c| c.exogenous.contains(&u))
    }

    pub fn of_endogenous(&self, x: VarId) -> Option<usize> {
        self.components.iter().position(|c| c.endogenous.contains(&x))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Markovianity {
    Markovian,
    QuasiMarkovian,
    General,
}

struct UnionFind(Vec<usize>);

impl UnionFind {
    fn find(&mut self, i: usize) -> usize {
        let mut root = i;
        while self.0[root] != root {
            root = self.0[root];
        }
        let mut cur = i;
        while self.0[cur] != root {
            let next = self.0[cur];
            self.0[cur] = root;
            cur = next;
        }
        root
    }

    fn union(&mut self, a: usize, b: usize) {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra != rb {
            self.0[ra.max(rb)] = ra.min(rb);
        }
    }
}

pub fn c_components(model: &Scm) -> CComponents {
    let n = model.variables().len();
    let order = model.topological_order().to_vec();
    let mut position = vec![0; n];
    for (i, v) in order.iter().enumerate() {
        position[v.0] = i;
    }
    let mut uf = UnionFind((0..n).collect());
    for x in model.endogenous() {
        for p in model.parents(x) {
            if model.is_exogenous(*p) {
                uf.union(p.0, x.0);
            }
        }
    }
    let mut groups: BTreeMap<usize, (Vec<VarId>, Vec<VarId>)> = BTreeMap::new();
    for &v in &order {
        let entry = groups.entry(uf.find(v.0)).or_default();
        if model.is_exogenous(v) {
            entry.0.push(v);
        } else {
            entry.1.push(v);
        }
    }
    let mut components: Vec<CComponent> = groups
        .into_values()
        .filter(|(_, endo)| !endo.is_empty())
        .map(|(mut exo, endo)| {
            exo.sort();
            let mut context: Vec<VarId> = endo.clone();
            for x in &endo {
                for p in model.parents(*x) {
                    if !model.is_exogenous(*p) && !context.contains(p) {
                        context.push(*p);
                    }
                }
            }
            context.sort_by_key(|v| position[v.0]);
            let per_var_context = endo
                .iter()
                .map(|x| {
                    let ctx = context
                        .iter()
                        .copied()
                        .filter(|v| position[v.0] < position[x.0])
                        .collect();
                    (*x, ctx)
                })
                .collect();
            CComponent {
                exogenous: exo,
                endogenous: endo,
                context,
                per_var_context,
            }
        })
        .collect();
    components.sort_by_key(|c| position[c.endogenous[0].0]);
    CComponents { components, order }
}

pub fn markovianity_class(components: &CComponents) -> Markovianity {
    let cs = &components.components;
    if cs.iter().all(|c| c.exogenous.len() == 1 && c.endogenous.len() == 1) {
        Markovianity::Markovian
    } else if cs.iter().all(|c| c.exogenous.len() == 1) {
        Markovianity::QuasiMarkovian
    } else {
        Markovianity::General
    }
}

/// A copy of the endogenous structure, optionally under an intervention.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct World {
    pub intervention: BTreeMap<VarId, usize>,
}

impl World {
    pub fn observational() -> Self {
        World::default()
    }

    pub fn with_do(intervention: impl IntoIterator<Item = (VarId, usize)>) -> Self {
        World {
            intervention: intervention.into_iter().collect(),
        }
    }
}

/// Name given to the copy of `name` living in world `world`.
pub fn world_name(name: &str, world: usize) -> String {
    format!("{name}#{world}")
}

fn check_intervention(model: &Scm, intervention: &BTreeMap<VarId, usize>) -> Result<()> {
    for (&x, &state) in intervention {
        if x.0 >= model.variables().len() {
            return Err(Error::Query(format!("unknown variable id {}", x.0)));
        }
        if model.is_exogenous(x) {
            return Err(Error::Query(format!(
                "cannot intervene on exogenous `{}`",
                model.name(x)
            )));
        }
        if state >= model.card(x) {
            return Err(Error::Query(format!(
                "state {state} outside the domain of `{}`",
                model.name(x)
            )));
        }
    }
    Ok(())
}

/// Builds the counterfactual graph: one copy of every endogenous variable per
/// world, all sharing the exogenous variables. An intervened copy loses all
/// incoming arcs and becomes a constant; exogenous variables left without
/// children are dropped. Endogenous copies are named `X#w`, and the result's
/// variables are laid out as surviving exogenous variables first, then each
/// world's endogenous copies in the input's declaration order.
pub fn twin_graph(model: &Scm, worlds: &[World]) -> Result<Scm> {
    if worlds.is_empty() {
        return Err(Error::Query("at least one world is required".into()));
    }
    for w in worlds {
        check_intervention(model, &w.intervention)?;
    }
    build_worlds(model, worlds, |name, w| world_name(name, w))
}

/// Single-world surgery keeping the original variable names.
pub(crate) fn surgery(model: &Scm, intervention: &BTreeMap<VarId, usize>) -> Result<Scm> {
    check_intervention(model, intervention)?;
    let world = World {
        intervention: intervention.clone(),
    };
    build_worlds(model, std::slice::from_ref(&world), |name, _| name.to_string())
}

fn build_worlds(
    model: &Scm,
    worlds: &[World],
    rename: impl Fn(&str, usize) -> String,
) -> Result<Scm> {
    let endo = model.endogenous();
    let exo = model.exogenous();
    let used: Vec<VarId> = exo
        .iter()
        .copied()
        .filter(|u| {
            worlds.iter().any(|w| {
                model
                    .children(*u)
                    .iter()
                    .any(|c| !w.intervention.contains_key(c))
            })
        })
        .collect();

    let mut b = ScmBuilder::new();
    let mut exo_map = BTreeMap::new();
    for &u in &used {
        let id = b.variable(model.var(u).clone());
        if let Some(p) = model.pmf(u) {
            b.pmf(id, p.clone());
        }
        exo_map.insert(u, id);
    }
    let mut copies: Vec<BTreeMap<VarId, VarId>> = Vec::with_capacity(worlds.len());
    for w in 0..worlds.len() {
        let mut map = BTreeMap::new();
        for &x in &endo {
            let var = model.var(x);
            let id = b.variable(Variable {
                name: rename(&var.name, w),
                ..var.clone()
            });
            map.insert(x, id);
        }
        copies.push(map);
    }
    for (w, world) in worlds.iter().enumerate() {
        for &x in &endo {
            let child = copies[w][&x];
            let eq = match world.intervention.get(&x) {
                Some(&state) => StructuralEquation::constant(child, state),
                None => {
                    let orig = model.equation(x).unwrap();
                    StructuralEquation {
                        child,
                        parents: orig
                            .parents
                            .iter()
                            .map(|p| {
                                if model.is_exogenous(*p) {
                                    exo_map[p]
                                } else {
                                    copies[w][p]
                                }
                            })
                            .collect(),
                        table: orig.table.clone(),
                    }
                }
            };
            b.equation(child, &eq.parents, eq.table);
        }
    }
    b.build()
}
