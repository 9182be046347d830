//! Structural causal model data types.
//!
//! Variables carry integer states `0..cardinality`. Every endogenous variable
//! owns a tabular structural equation whose table is laid out over its parent
//! configurations in lexicographic order, the first parent varying slowest.
//! Exogenous variables are roots and may carry a PMF; a model where every
//! exogenous variable has one is fully specified.

use std::collections::{BTreeMap, HashMap};

use serde::{Deserialize, Serialize};

use crate::error::{check_cap, size_cap, Error, Result};

/// Tolerance on PMF normalisation.
pub const PMF_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct VarId(pub usize);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum VarKind {
    Endogenous,
    Exogenous,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Variable {
    pub name: String,
    pub cardinality: usize,
    pub kind: VarKind,
    /// Optional external labels for the states.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub labels: Option<Vec<String>>,
}

impl Variable {
    pub fn endogenous(name: impl Into<String>, cardinality: usize) -> Self {
        Variable {
            name: name.into(),
            cardinality,
            kind: VarKind::Endogenous,
            labels: None,
        }
    }

    pub fn exogenous(name: impl Into<String>, cardinality: usize) -> Self {
        Variable {
            name: name.into(),
            cardinality,
            kind: VarKind::Exogenous,
            labels: None,
        }
    }

    pub fn is_exogenous(&self) -> bool {
        self.kind == VarKind::Exogenous
    }
}

/// Row-major index arithmetic over a product of finite domains.
///
/// The first coordinate is the most significant, which matches the
/// lexicographic ordering used for equation tables.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MixedRadix {
    cards: Vec<usize>,
}

impl MixedRadix {
    pub fn new(cards: Vec<usize>) -> Self {
        MixedRadix { cards }
    }

    pub fn cards(&self) -> &[usize] {
        &self.cards
    }

    pub fn size(&self) -> usize {
        self.cards.iter().product()
    }

    pub fn index(&self, states: &[usize]) -> usize {
        debug_assert_eq!(states.len(), self.cards.len());
        states
            .iter()
            .zip(&self.cards)
            .fold(0, |acc, (&s, &c)| acc * c + s)
    }

    pub fn decode(&self, mut index: usize, out: &mut [usize]) {
        for (slot, &c) in out.iter_mut().zip(&self.cards).rev() {
            *slot = index % c;
            index /= c;
        }
    }

    pub fn states(&self, index: usize) -> Vec<usize> {
        let mut out = vec![0; self.cards.len()];
        self.decode(index, &mut out);
        out
    }

    /// Iterates every configuration in lexicographic order.
    pub fn iter(&self) -> impl Iterator<Item = Vec<usize>> + '_ {
        (0..self.size()).map(move |i| self.states(i))
    }
}

/// Deterministic map from parent configurations to a child state.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StructuralEquation {
    pub child: VarId,
    pub parents: Vec<VarId>,
    /// One child state per parent configuration, lexicographic parent order.
    pub table: Vec<usize>,
}

impl StructuralEquation {
    pub fn constant(child: VarId, state: usize) -> Self {
        StructuralEquation {
            child,
            parents: Vec::new(),
            table: vec![state],
        }
    }
}

/// Probability mass function over the states of one variable.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Pmf(Vec<f64>);

impl Pmf {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::Model("empty PMF".into()));
        }
        if values.iter().any(|v| !v.is_finite() || *v < 0.0) {
            return Err(Error::Model(format!("PMF has negative or non-finite entries: {values:?}")));
        }
        let total: f64 = values.iter().sum();
        if (total - 1.0).abs() > PMF_TOLERANCE {
            return Err(Error::Model(format!("PMF sums to {total}, not 1")));
        }
        Ok(Pmf(values))
    }

    /// Builds a PMF by normalising nonnegative weights.
    pub fn from_weights(weights: Vec<f64>) -> Result<Self> {
        let total: f64 = weights.iter().sum();
        if !(total > 0.0) || weights.iter().any(|w| *w < 0.0) {
            return Err(Error::Model("weights must be nonnegative with positive sum".into()));
        }
        Ok(Pmf(weights.into_iter().map(|w| w / total).collect()))
    }

    pub fn uniform(n: usize) -> Self {
        Pmf(vec![1.0 / n as f64; n])
    }

    pub fn values(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.0
    }
}

impl std::ops::Index<usize> for Pmf {
    type Output = f64;
    fn index(&self, i: usize) -> &f64 {
        &self.0[i]
    }
}

/// A structural causal model over categorical variables.
///
/// Immutable once built. Use [`ScmBuilder`] to construct one.
#[derive(Debug, Clone, PartialEq)]
pub struct Scm {
    variables: Vec<Variable>,
    equations: Vec<Option<StructuralEquation>>,
    pmfs: Vec<Option<Pmf>>,
    children: Vec<Vec<VarId>>,
    topo: Vec<VarId>,
    by_name: HashMap<String, VarId>,
}

impl Scm {
    pub fn variables(&self) -> &[Variable] {
        &self.variables
    }

    pub fn var(&self, id: VarId) -> &Variable {
        &self.variables[id.0]
    }

    pub fn name(&self, id: VarId) -> &str {
        &self.variables[id.0].name
    }

    pub fn card(&self, id: VarId) -> usize {
        self.variables[id.0].cardinality
    }

    pub fn id(&self, name: &str) -> Result<VarId> {
        self.by_name
            .get(name)
            .copied()
            .ok_or_else(|| Error::UnknownVariable(name.to_string()))
    }

    pub fn ids(&self) -> impl Iterator<Item = VarId> + '_ {
        (0..self.variables.len()).map(VarId)
    }

    pub fn endogenous(&self) -> Vec<VarId> {
        self.ids().filter(|v| !self.var(*v).is_exogenous()).collect()
    }

    pub fn exogenous(&self) -> Vec<VarId> {
        self.ids().filter(|v| self.var(*v).is_exogenous()).collect()
    }

    pub fn is_exogenous(&self, id: VarId) -> bool {
        self.var(id).is_exogenous()
    }

    pub fn equation(&self, id: VarId) -> Option<&StructuralEquation> {
        self.equations[id.0].as_ref()
    }

    pub fn parents(&self, id: VarId) -> &[VarId] {
        self.equations[id.0]
            .as_ref()
            .map(|e| e.parents.as_slice())
            .unwrap_or(&[])
    }

    pub fn children(&self, id: VarId) -> &[VarId] {
        &self.children[id.0]
    }

    /// All parent→child arcs, ordered by child then parent position.
    pub fn edges(&self) -> Vec<(VarId, VarId)> {
        self.equations
            .iter()
            .flatten()
            .flat_map(|eq| eq.parents.iter().map(move |p| (*p, eq.child)))
            .collect()
    }

    /// Topological order; ties broken by declaration order.
    pub fn topological_order(&self) -> &[VarId] {
        &self.topo
    }

    pub fn pmf(&self, id: VarId) -> Option<&Pmf> {
        self.pmfs[id.0].as_ref()
    }

    /// True when every exogenous variable has a PMF.
    pub fn is_fully_specified(&self) -> bool {
        self.exogenous().iter().all(|u| self.pmfs[u.0].is_some())
    }

    pub fn require_fully_specified(&self) -> Result<()> {
        match self.exogenous().into_iter().find(|u| self.pmfs[u.0].is_none()) {
            Some(u) => Err(Error::MissingPmf(self.name(u).to_string())),
            None => Ok(()),
        }
    }

    /// Child state selected by the equation of `id` under a full assignment
    /// indexed by variable id.
    pub fn apply(&self, id: VarId, assignment: &[usize]) -> usize {
        let eq = self.equations[id.0].as_ref().expect("endogenous variable");
        let idx = eq
            .parents
            .iter()
            .fold(0, |acc, p| acc * self.card(*p) + assignment[p.0]);
        eq.table[idx]
    }

    /// Fills in endogenous states of `assignment` from its exogenous entries.
    pub fn propagate(&self, assignment: &mut [usize]) {
        for &v in &self.topo {
            if !self.is_exogenous(v) {
                assignment[v.0] = self.apply(v, assignment);
            }
        }
    }

    /// Same model with the given exogenous PMFs attached (replacing any present).
    pub fn with_pmfs(&self, pmfs: impl IntoIterator<Item = (VarId, Pmf)>) -> Result<Scm> {
        let mut out = self.clone();
        for (u, pmf) in pmfs {
            if !out.is_exogenous(u) {
                return Err(Error::Model(format!("`{}` is not exogenous", out.name(u))));
            }
            if pmf.len() != out.card(u) {
                return Err(Error::Model(format!(
                    "PMF for `{}` has {} entries, expected {}",
                    out.name(u),
                    pmf.len(),
                    out.card(u)
                )));
            }
            out.pmfs[u.0] = Some(pmf);
        }
        Ok(out)
    }

    /// Same model with all exogenous PMFs removed.
    pub fn without_pmfs(&self) -> Scm {
        let mut out = self.clone();
        out.pmfs.iter_mut().for_each(|p| *p = None);
        out
    }

    /// Size of the joint exogenous state space.
    pub fn exogenous_space(&self) -> u128 {
        self.exogenous()
            .iter()
            .map(|u| self.card(*u) as u128)
            .product()
    }

    /// Rebuilds a builder holding the same declarations.
    pub fn to_builder(&self) -> ScmBuilder {
        ScmBuilder {
            variables: self.variables.clone(),
            equations: self.equations.clone(),
            pmfs: self.pmfs.clone(),
        }
    }
}

/// Incremental constructor for [`Scm`]; variable ids follow declaration order.
#[derive(Debug, Clone, Default)]
pub struct ScmBuilder {
    variables: Vec<Variable>,
    equations: Vec<Option<StructuralEquation>>,
    pmfs: Vec<Option<Pmf>>,
}

impl ScmBuilder {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn variable(&mut self, var: Variable) -> VarId {
        self.variables.push(var);
        self.equations.push(None);
        self.pmfs.push(None);
        VarId(self.variables.len() - 1)
    }

    pub fn endogenous(&mut self, name: impl Into<String>, cardinality: usize) -> VarId {
        self.variable(Variable::endogenous(name, cardinality))
    }

    pub fn exogenous(&mut self, name: impl Into<String>, cardinality: usize) -> VarId {
        self.variable(Variable::exogenous(name, cardinality))
    }

    pub fn equation(&mut self, child: VarId, parents: &[VarId], table: Vec<usize>) -> &mut Self {
        self.equations[child.0] = Some(StructuralEquation {
            child,
            parents: parents.to_vec(),
            table,
        });
        self
    }

    pub fn pmf(&mut self, var: VarId, pmf: Pmf) -> &mut Self {
        self.pmfs[var.0] = Some(pmf);
        self
    }

    pub fn card(&self, id: VarId) -> usize {
        self.variables[id.0].cardinality
    }

    pub fn name(&self, id: VarId) -> &str {
        &self.variables[id.0].name
    }

    /// Declares a fresh exogenous parent for `child` whose states enumerate
    /// every deterministic map from `endo_parents` to `child`.
    pub fn conservative(
        &mut self,
        child: VarId,
        endo_parents: &[VarId],
        exo_name: impl Into<String>,
    ) -> Result<VarId> {
        let parent_cards: Vec<usize> = endo_parents.iter().map(|p| self.card(*p)).collect();
        let se = conservative_table(self.card(child), &parent_cards)?;
        let u = self.exogenous(exo_name, se.exo_cardinality);
        let mut parents = endo_parents.to_vec();
        parents.push(u);
        self.equation(child, &parents, se.table);
        Ok(u)
    }

    pub fn build(self) -> Result<Scm> {
        let n = self.variables.len();
        let mut by_name = HashMap::with_capacity(n);
        for (i, v) in self.variables.iter().enumerate() {
            if by_name.insert(v.name.clone(), VarId(i)).is_some() {
                return Err(Error::Model(format!("duplicate variable `{}`", v.name)));
            }
            let min = if v.is_exogenous() { 1 } else { 2 };
            if v.cardinality < min {
                return Err(Error::Model(format!(
                    "`{}` has cardinality {}, need at least {min}",
                    v.name, v.cardinality
                )));
            }
            if let Some(labels) = &v.labels {
                if labels.len() != v.cardinality {
                    return Err(Error::Model(format!("`{}` has {} labels", v.name, labels.len())));
                }
            }
        }
        let mut children = vec![Vec::new(); n];
        for (i, v) in self.variables.iter().enumerate() {
            match (&self.equations[i], v.is_exogenous()) {
                (Some(_), true) => {
                    return Err(Error::Model(format!("exogenous `{}` must be a root", v.name)))
                }
                (None, false) => {
                    return Err(Error::Model(format!("no structural equation for `{}`", v.name)))
                }
                (Some(eq), false) => {
                    if eq.child.0 != i {
                        return Err(Error::Model(format!("equation misfiled for `{}`", v.name)));
                    }
                    let mut size: u128 = 1;
                    for (k, p) in eq.parents.iter().enumerate() {
                        if p.0 >= n {
                            return Err(Error::Model(format!("`{}` has an undeclared parent", v.name)));
                        }
                        if eq.parents[..k].contains(p) || *p == eq.child {
                            return Err(Error::Model(format!("`{}` has repeated parents", v.name)));
                        }
                        size *= self.variables[p.0].cardinality as u128;
                        children[p.0].push(VarId(i));
                    }
                    check_cap(format!("equation table of `{}`", v.name), size, size_cap())?;
                    if eq.table.len() as u128 != size {
                        return Err(Error::Model(format!(
                            "equation of `{}` has {} rows, expected {size}",
                            v.name,
                            eq.table.len()
                        )));
                    }
                    if let Some(s) = eq.table.iter().find(|s| **s >= v.cardinality) {
                        return Err(Error::Model(format!("equation of `{}` yields state {s}", v.name)));
                    }
                }
                (None, true) => {}
            }
        }
        for (i, pmf) in self.pmfs.iter().enumerate() {
            if let Some(p) = pmf {
                let v = &self.variables[i];
                if !v.is_exogenous() {
                    return Err(Error::Model(format!("PMF given for endogenous `{}`", v.name)));
                }
                if p.len() != v.cardinality {
                    return Err(Error::Model(format!("PMF of `{}` has wrong length", v.name)));
                }
            }
        }
        let topo = topological_sort(n, &self.equations)
            .ok_or_else(|| Error::Model("graph has a directed cycle".into()))?;
        Ok(Scm {
            variables: self.variables,
            equations: self.equations,
            pmfs: self.pmfs,
            children,
            topo,
            by_name,
        })
    }
}

fn topological_sort(n: usize, equations: &[Option<StructuralEquation>]) -> Option<Vec<VarId>> {
    let mut indegree = vec![0usize; n];
    let mut children = vec![Vec::new(); n];
    for eq in equations.iter().flatten() {
        indegree[eq.child.0] = eq.parents.len();
        for p in &eq.parents {
            children[p.0].push(eq.child.0);
        }
    }
    // Smallest ready index first keeps the order stable under declaration order.
    let mut ready: std::collections::BTreeSet<usize> =
        (0..n).filter(|i| indegree[*i] == 0).collect();
    let mut order = Vec::with_capacity(n);
    while let Some(&v) = ready.iter().next() {
        ready.remove(&v);
        order.push(VarId(v));
        for &c in &children[v] {
            indegree[c] -= 1;
            if indegree[c] == 0 {
                ready.insert(c);
            }
        }
    }
    (order.len() == n).then_some(order)
}

/// Table and exogenous size of a conservative structural equation.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConservativeSe {
    pub exo_cardinality: usize,
    /// Laid out over `(endo parents..., U)`, with `U` varying fastest.
    pub table: Vec<usize>,
}

/// Enumerates every deterministic map from the endogenous parent
/// configurations to the child.
///
/// Exogenous state `u` encodes function number `u`: parent configurations are
/// taken in lexicographic order and `u`, read little-endian in base
/// `child_card`, gives the child state of configuration `k` as its `k`-th digit.
pub fn conservative_table(child_card: usize, parent_cards: &[usize]) -> Result<ConservativeSe> {
    let configs: u128 = parent_cards.iter().map(|c| *c as u128).product();
    let exo = (child_card as f64).powf(configs as f64);
    let cap = size_cap();
    if configs > 64 || exo > cap as f64 {
        return Err(Error::SizeCap {
            what: "conservative exogenous domain".into(),
            size: if exo.is_finite() && exo < u128::MAX as f64 { exo as u128 } else { u128::MAX },
            cap,
        });
    }
    let configs = configs as usize;
    let exo_cardinality = child_card.pow(configs as u32);
    let mut table = Vec::with_capacity(configs * exo_cardinality);
    for k in 0..configs {
        for u in 0..exo_cardinality {
            table.push(conservative_digit(u, k, child_card));
        }
    }
    Ok(ConservativeSe {
        exo_cardinality,
        table,
    })
}

/// Child state that conservative function `u` assigns to parent configuration `k`.
pub fn conservative_digit(u: usize, k: usize, child_card: usize) -> usize {
    (u / child_card.pow(k as u32)) % child_card
}

/// Index of the conservative function mapping configuration `k` to `states[k]`.
pub fn conservative_index(states: &[usize], child_card: usize) -> usize {
    states.iter().rev().fold(0, |acc, s| acc * child_card + s)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Violation {
    /// Some child state is never produced by the equation.
    NotSurjective { variable: String, missing: Vec<usize> },
    /// No exogenous configuration realises this endogenous configuration.
    NotJointlySurjective { configuration: BTreeMap<String, usize> },
    /// An attached PMF does not sum to one within tolerance.
    Unnormalised { variable: String, total: String },
}

impl std::fmt::Display for Violation {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Violation::NotSurjective { variable, missing } => {
                write!(f, "f_{variable} not surjective (missing states {missing:?})")
            }
            Violation::NotJointlySurjective { configuration } => {
                write!(f, "endogenous configuration {configuration:?} is unreachable")
            }
            Violation::Unnormalised { variable, total } => {
                write!(f, "PMF of {variable} sums to {total}")
            }
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn is_valid(&self) -> bool {
        self.violations.is_empty()
    }

    pub fn surjectivity_violations(&self) -> impl Iterator<Item = &Violation> {
        self.violations.iter().filter(|v| {
            matches!(
                v,
                Violation::NotSurjective { .. } | Violation::NotJointlySurjective { .. }
            )
        })
    }
}

/// Checks surjectivity of each equation and of the whole model, plus PMF
/// normalisation. Joint surjectivity is decided by enumerating the exogenous
/// state space, which fails with a size error above the cap.
pub fn validate_scm(model: &Scm) -> Result<ValidationReport> {
    validate_scm_with_cap(model, size_cap())
}

pub fn validate_scm_with_cap(model: &Scm, cap: u64) -> Result<ValidationReport> {
    let mut report = ValidationReport::default();
    for x in model.endogenous() {
        let eq = model.equation(x).expect("endogenous");
        let mut seen = vec![false; model.card(x)];
        eq.table.iter().for_each(|s| seen[*s] = true);
        let missing: Vec<usize> = (0..seen.len()).filter(|s| !seen[*s]).collect();
        if !missing.is_empty() {
            report.violations.push(Violation::NotSurjective {
                variable: model.name(x).to_string(),
                missing,
            });
        }
    }
    for u in model.exogenous() {
        if let Some(p) = model.pmf(u) {
            let total: f64 = p.values().iter().sum();
            if (total - 1.0).abs() > PMF_TOLERANCE {
                report.violations.push(Violation::Unnormalised {
                    variable: model.name(u).to_string(),
                    total: total.to_string(),
                });
            }
        }
    }

    let exo = model.exogenous();
    let endo = model.endogenous();
    check_cap("exogenous joint space", model.exogenous_space(), cap)?;
    let endo_radix = MixedRadix::new(endo.iter().map(|x| model.card(*x)).collect());
    check_cap("endogenous joint space", endo_radix.size() as u128, cap)?;
    let exo_radix = MixedRadix::new(exo.iter().map(|u| model.card(*u)).collect());
    let mut reached = vec![false; endo_radix.size()];
    let mut remaining = reached.len();
    let mut assignment = vec![0; model.variables().len()];
    let mut exo_states = vec![0; exo.len()];
    let mut endo_states = vec![0; endo.len()];
    for i in 0..exo_radix.size() {
        exo_radix.decode(i, &mut exo_states);
        for (u, s) in exo.iter().zip(&exo_states) {
            assignment[u.0] = *s;
        }
        model.propagate(&mut assignment);
        for (slot, x) in endo_states.iter_mut().zip(&endo) {
            *slot = assignment[x.0];
        }
        let j = endo_radix.index(&endo_states);
        if !reached[j] {
            reached[j] = true;
            remaining -= 1;
            if remaining == 0 {
                break;
            }
        }
    }
    for (j, hit) in reached.iter().enumerate() {
        if !hit {
            let states = endo_radix.states(j);
            report.violations.push(Violation::NotJointlySurjective {
                configuration: endo
                    .iter()
                    .zip(states)
                    .map(|(x, s)| (model.name(*x).to_string(), s))
                    .collect(),
            });
        }
    }
    Ok(report)
}

/// Keeps only the listed states of some exogenous variables.
///
/// Retained states are re-indexed densely in the order given, and every
/// equation reading a restricted variable is rewritten accordingly. PMFs of
/// restricted variables are conditioned on the retained states (dropped if
/// they give those states no mass). Fails if the result breaks per-variable
/// or joint surjectivity.
pub fn restrict_model(model: &Scm, allowed: &BTreeMap<VarId, Vec<usize>>) -> Result<Scm> {
    for (u, states) in allowed {
        if !model.is_exogenous(*u) {
            return Err(Error::Restriction(format!("`{}` is not exogenous", model.name(*u))));
        }
        if states.is_empty() {
            return Err(Error::Restriction(format!("empty state set for `{}`", model.name(*u))));
        }
        let mut sorted = states.clone();
        sorted.sort_unstable();
        sorted.dedup();
        if sorted.len() != states.len() || *sorted.last().unwrap() >= model.card(*u) {
            return Err(Error::Restriction(format!(
                "invalid state set {states:?} for `{}`",
                model.name(*u)
            )));
        }
    }
    let mut builder = model.to_builder();
    for (u, states) in allowed {
        builder.variables[u.0].cardinality = states.len();
        if let Some(labels) = &model.var(*u).labels {
            builder.variables[u.0].labels = Some(states.iter().map(|s| labels[*s].clone()).collect());
        }
        builder.pmfs[u.0] = model.pmf(*u).and_then(|p| {
            let w: Vec<f64> = states.iter().map(|s| p[*s]).collect();
            Pmf::from_weights(w).ok()
        });
    }
    for x in model.endogenous() {
        let eq = model.equation(x).unwrap();
        if !eq.parents.iter().any(|p| allowed.contains_key(p)) {
            continue;
        }
        let old = MixedRadix::new(eq.parents.iter().map(|p| model.card(*p)).collect());
        let new = MixedRadix::new(
            eq.parents
                .iter()
                .map(|p| allowed.get(p).map_or(model.card(*p), Vec::len))
                .collect(),
        );
        let mut table = Vec::with_capacity(new.size());
        for mut states in new.iter() {
            for (s, p) in states.iter_mut().zip(&eq.parents) {
                if let Some(keep) = allowed.get(p) {
                    *s = keep[*s];
                }
            }
            table.push(eq.table[old.index(&states)]);
        }
        builder.equations[x.0] = Some(StructuralEquation {
            child: x,
            parents: eq.parents.clone(),
            table,
        });
    }
    let restricted = builder.build()?;
    let report = validate_scm(&restricted)?;
    let broken: Vec<String> = report.surjectivity_violations().map(|v| v.to_string()).collect();
    if !broken.is_empty() {
        return Err(Error::Restriction(broken.join("; ")));
    }
    Ok(restricted)
}
