//! Exact inference on fully specified models by variable elimination.
//!
//! A fully specified model is a Bayesian network whose endogenous tables are
//! degenerate. Structural equations stay as index maps; a dense factor is only
//! built for an equation after evidence has been applied to it.

use std::collections::{BTreeMap, BTreeSet};

use crate::error::{check_cap, size_cap, Error, Result};
use crate::scm::{MixedRadix, Scm, VarId};

/// Nonnegative table over the joint states of an ordered scope.
#[derive(Debug, Clone, PartialEq)]
pub struct Factor {
    scope: Vec<VarId>,
    cards: Vec<usize>,
    values: Vec<f64>,
}

impl Factor {
    pub fn new(scope: Vec<VarId>, cards: Vec<usize>, values: Vec<f64>) -> Result<Self> {
        if scope.len() != cards.len() {
            return Err(Error::Model("factor scope and cardinalities differ in length".into()));
        }
        let size: usize = cards.iter().product();
        if values.len() != size {
            return Err(Error::Model(format!(
                "factor table has {} entries, expected {size}",
                values.len()
            )));
        }
        if values.iter().any(|v| *v < 0.0 || v.is_nan()) {
            return Err(Error::Model("factor entries must be nonnegative".into()));
        }
        Ok(Factor {
            scope,
            cards,
            values,
        })
    }

    pub fn scalar(value: f64) -> Self {
        Factor {
            scope: Vec::new(),
            cards: Vec::new(),
            values: vec![value],
        }
    }

    pub fn scope(&self) -> &[VarId] {
        &self.scope
    }

    pub fn cards(&self) -> &[usize] {
        &self.cards
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn total(&self) -> f64 {
        self.values.iter().sum()
    }

    pub fn value(&self, states: &[usize]) -> f64 {
        self.values[MixedRadix::new(self.cards.clone()).index(states)]
    }

    /// Value at an assignment given as a map over (a superset of) the scope.
    pub fn value_at(&self, assignment: &BTreeMap<VarId, usize>) -> f64 {
        let states: Vec<usize> = self.scope.iter().map(|v| assignment[v]).collect();
        self.value(&states)
    }

    fn strides(&self) -> Vec<usize> {
        let mut strides = vec![1; self.cards.len()];
        for i in (0..self.cards.len().saturating_sub(1)).rev() {
            strides[i] = strides[i + 1] * self.cards[i + 1];
        }
        strides
    }

    pub fn product(&self, other: &Factor) -> Factor {
        let mut scope = self.scope.clone();
        let mut cards = self.cards.clone();
        for (v, c) in other.scope.iter().zip(&other.cards) {
            if !scope.contains(v) {
                scope.push(*v);
                cards.push(*c);
            }
        }
        let radix = MixedRadix::new(cards.clone());
        let size = radix.size();
        let map_a = self.stride_map(&scope);
        let map_b = other.stride_map(&scope);
        let mut values = Vec::with_capacity(size);
        let mut states = vec![0usize; scope.len()];
        let (mut ia, mut ib) = (0usize, 0usize);
        for _ in 0..size {
            values.push(self.values[ia] * other.values[ib]);
            // odometer increment, last coordinate fastest
            for k in (0..states.len()).rev() {
                states[k] += 1;
                ia += map_a[k];
                ib += map_b[k];
                if states[k] < cards[k] {
                    break;
                }
                ia -= map_a[k] * cards[k];
                ib -= map_b[k] * cards[k];
                states[k] = 0;
            }
        }
        Factor {
            scope,
            cards,
            values,
        }
    }

    /// Stride of each variable of `scope` within this factor (0 if absent).
    fn stride_map(&self, scope: &[VarId]) -> Vec<usize> {
        let strides = self.strides();
        scope
            .iter()
            .map(|v| {
                self.scope
                    .iter()
                    .position(|s| s == v)
                    .map_or(0, |i| strides[i])
            })
            .collect()
    }

    /// Sums out one variable.
    pub fn sum_out(&self, var: VarId) -> Factor {
        let Some(pos) = self.scope.iter().position(|v| *v == var) else {
            return self.clone();
        };
        let card = self.cards[pos];
        let inner: usize = self.cards[pos + 1..].iter().product();
        let outer: usize = self.cards[..pos].iter().product();
        let mut values = vec![0.0; outer * inner];
        for o in 0..outer {
            for s in 0..card {
                let base = (o * card + s) * inner;
                for i in 0..inner {
                    values[o * inner + i] += self.values[base + i];
                }
            }
        }
        let mut scope = self.scope.clone();
        let mut cards = self.cards.clone();
        scope.remove(pos);
        cards.remove(pos);
        Factor {
            scope,
            cards,
            values,
        }
    }

    /// Marginal over `keep`, in the order given.
    pub fn marginal(&self, keep: &[VarId]) -> Factor {
        let mut f = self.clone();
        for v in self.scope.iter().filter(|v| !keep.contains(v)) {
            f = f.sum_out(*v);
        }
        f.reorder(keep)
    }

    /// Permutes the scope into `order`, which must be a permutation of it.
    pub fn reorder(&self, order: &[VarId]) -> Factor {
        if order == self.scope.as_slice() {
            return self.clone();
        }
        assert_eq!(order.len(), self.scope.len(), "reorder needs a permutation");
        let cards: Vec<usize> = order
            .iter()
            .map(|v| self.cards[self.scope.iter().position(|s| s == v).expect("in scope")])
            .collect();
        let map = self.stride_map(order);
        let radix = MixedRadix::new(cards.clone());
        let mut states = vec![0; order.len()];
        let values = (0..radix.size())
            .map(|i| {
                radix.decode(i, &mut states);
                let j: usize = states.iter().zip(&map).map(|(s, m)| s * m).sum();
                self.values[j]
            })
            .collect();
        Factor {
            scope: order.to_vec(),
            cards,
            values,
        }
    }

    /// Restricts a variable to one state and drops it from the scope.
    pub fn reduce(&self, var: VarId, state: usize) -> Factor {
        let Some(pos) = self.scope.iter().position(|v| *v == var) else {
            return self.clone();
        };
        let card = self.cards[pos];
        let inner: usize = self.cards[pos + 1..].iter().product();
        let outer: usize = self.cards[..pos].iter().product();
        let mut values = Vec::with_capacity(outer * inner);
        for o in 0..outer {
            let base = (o * card + state) * inner;
            values.extend_from_slice(&self.values[base..base + inner]);
        }
        let mut scope = self.scope.clone();
        let mut cards = self.cards.clone();
        scope.remove(pos);
        cards.remove(pos);
        Factor {
            scope,
            cards,
            values,
        }
    }

    /// Scales the table to sum to one; `None` if it has no mass.
    pub fn normalized(&self) -> Option<Factor> {
        let total = self.total();
        (total > 0.0).then(|| Factor {
            scope: self.scope.clone(),
            cards: self.cards.clone(),
            values: self.values.iter().map(|v| v / total).collect(),
        })
    }

    pub fn scale_in_place(&mut self, k: f64) {
        self.values.iter_mut().for_each(|v| *v *= k);
    }
}

/// Result of a query whose evidence may have probability zero.
#[derive(Debug, Clone, PartialEq)]
pub enum Outcome<T> {
    Value(T),
    UnsupportedEvidence,
}

impl<T> Outcome<T> {
    pub fn value(self) -> Option<T> {
        match self {
            Outcome::Value(v) => Some(v),
            Outcome::UnsupportedEvidence => None,
        }
    }

    pub fn map<U>(self, f: impl FnOnce(T) -> U) -> Outcome<U> {
        match self {
            Outcome::Value(v) => Outcome::Value(f(v)),
            Outcome::UnsupportedEvidence => Outcome::UnsupportedEvidence,
        }
    }

    pub fn is_supported(&self) -> bool {
        matches!(self, Outcome::Value(_))
    }
}

/// Dense factor for the equation of `x` with evidence already applied: observed
/// variables leave the scope and rows inconsistent with the evidence vanish.
pub fn equation_factor(model: &Scm, x: VarId, evidence: &BTreeMap<VarId, usize>) -> Factor {
    let eq = model.equation(x).expect("endogenous variable");
    let free_parents: Vec<VarId> = eq
        .parents
        .iter()
        .copied()
        .filter(|p| !evidence.contains_key(p))
        .collect();
    let child_state = evidence.get(&x).copied();
    let mut scope = free_parents.clone();
    let mut cards: Vec<usize> = free_parents.iter().map(|p| model.card(*p)).collect();
    if child_state.is_none() {
        scope.push(x);
        cards.push(model.card(x));
    }
    let free_radix = MixedRadix::new(free_parents.iter().map(|p| model.card(*p)).collect());
    let full_radix = MixedRadix::new(eq.parents.iter().map(|p| model.card(*p)).collect());
    let child_card = model.card(x);
    let mut values = vec![0.0; free_radix.size() * if child_state.is_none() { child_card } else { 1 }];
    let mut free_states = vec![0; free_parents.len()];
    let mut full_states: Vec<usize> = eq
        .parents
        .iter()
        .map(|p| evidence.get(p).copied().unwrap_or(0))
        .collect();
    let free_pos: Vec<usize> = free_parents
        .iter()
        .map(|p| eq.parents.iter().position(|q| q == p).unwrap())
        .collect();
    for i in 0..free_radix.size() {
        free_radix.decode(i, &mut free_states);
        for (k, s) in free_pos.iter().zip(&free_states) {
            full_states[*k] = *s;
        }
        let y = eq.table[full_radix.index(&full_states)];
        match child_state {
            Some(obs) => values[i] = if y == obs { 1.0 } else { 0.0 },
            None => values[i * child_card + y] = 1.0,
        }
    }
    Factor {
        scope,
        cards,
        values,
    }
}

fn prior_factor(model: &Scm, u: VarId, evidence: &BTreeMap<VarId, usize>) -> Result<Factor> {
    let pmf = model
        .pmf(u)
        .ok_or_else(|| Error::MissingPmf(model.name(u).to_string()))?;
    let f = Factor {
        scope: vec![u],
        cards: vec![model.card(u)],
        values: pmf.values().to_vec(),
    };
    Ok(match evidence.get(&u) {
        Some(s) => f.reduce(u, *s),
        None => f,
    })
}

/// Min-fill elimination order over the interaction graph of `factors`,
/// skipping `keep`. Ties go to the smallest variable id.
pub fn min_fill_order(factors: &[Factor], keep: &[VarId]) -> Vec<VarId> {
    let mut adj: BTreeMap<VarId, BTreeSet<VarId>> = BTreeMap::new();
    for f in factors {
        for a in f.scope() {
            let entry = adj.entry(*a).or_default();
            for b in f.scope() {
                if a != b {
                    entry.insert(*b);
                }
            }
        }
    }
    let mut remaining: BTreeSet<VarId> = adj.keys().copied().filter(|v| !keep.contains(v)).collect();
    let mut order = Vec::with_capacity(remaining.len());
    while !remaining.is_empty() {
        let best = remaining
            .iter()
            .copied()
            .min_by_key(|v| {
                let nb: Vec<VarId> = adj[v].iter().copied().collect();
                let mut fill = 0usize;
                for i in 0..nb.len() {
                    for j in i + 1..nb.len() {
                        if !adj[&nb[i]].contains(&nb[j]) {
                            fill += 1;
                        }
                    }
                }
                (fill, *v)
            })
            .unwrap();
        let nb: Vec<VarId> = adj[&best].iter().copied().collect();
        for i in 0..nb.len() {
            for j in 0..nb.len() {
                if i != j {
                    adj.get_mut(&nb[i]).unwrap().insert(nb[j]);
                }
            }
        }
        for n in &nb {
            adj.get_mut(n).unwrap().remove(&best);
        }
        adj.remove(&best);
        remaining.remove(&best);
        order.push(best);
    }
    order
}

/// Sum-product elimination of every variable outside `keep`; returns the
/// unnormalised joint factor over `keep`, in that order.
pub fn eliminate(factors: Vec<Factor>, keep: &[VarId], cap: u64) -> Result<Factor> {
    let order = min_fill_order(&factors, keep);
    let mut pool = factors;
    for var in order {
        let (with, without): (Vec<Factor>, Vec<Factor>) =
            pool.into_iter().partition(|f| f.scope().contains(&var));
        pool = without;
        if with.is_empty() {
            continue;
        }
        let mut scope: BTreeSet<VarId> = BTreeSet::new();
        let mut size: u128 = 1;
        for f in &with {
            for (v, c) in f.scope().iter().zip(f.cards()) {
                if scope.insert(*v) {
                    size *= *c as u128;
                }
            }
        }
        check_cap("intermediate factor", size, cap)?;
        let psi = with
            .into_iter()
            .reduce(|acc, f| acc.product(&f))
            .expect("non-empty");
        pool.push(psi.sum_out(var));
    }
    let joint = pool
        .into_iter()
        .fold(Factor::scalar(1.0), |acc, f| acc.product(&f));
    // keep variables absent from every factor contribute a uniform ones table
    let missing: Vec<VarId> = keep.iter().copied().filter(|v| !joint.scope().contains(v)).collect();
    if !missing.is_empty() {
        return Err(Error::Query(format!(
            "query variables {missing:?} do not appear in the model"
        )));
    }
    Ok(joint.reorder(keep))
}

/// Ancestral closure of `vars`; everything else is barren for the query.
fn relevant(model: &Scm, vars: impl IntoIterator<Item = VarId>) -> Vec<bool> {
    let mut keep = vec![false; model.variables().len()];
    let mut stack: Vec<VarId> = vars.into_iter().collect();
    while let Some(v) = stack.pop() {
        if keep[v.0] {
            continue;
        }
        keep[v.0] = true;
        stack.extend_from_slice(model.parents(v));
    }
    keep
}

/// Joint probability of a full assignment indexed by variable id.
pub fn joint_probability(model: &Scm, assignment: &[usize]) -> Result<f64> {
    model.require_fully_specified()?;
    if assignment.len() != model.variables().len() {
        return Err(Error::Query("assignment must cover every variable".into()));
    }
    let mut p = 1.0;
    for v in model.ids() {
        if assignment[v.0] >= model.card(v) {
            return Err(Error::Query(format!("state out of range for `{}`", model.name(v))));
        }
        if model.is_exogenous(v) {
            p *= model.pmf(v).unwrap()[assignment[v.0]];
        } else if model.apply(v, assignment) != assignment[v.0] {
            return Ok(0.0);
        }
    }
    Ok(p)
}

/// Posterior `P(targets | evidence)` as a normalised factor over `targets`.
pub fn query(
    model: &Scm,
    targets: &[VarId],
    evidence: &BTreeMap<VarId, usize>,
) -> Result<Outcome<Factor>> {
    query_with_cap(model, targets, evidence, size_cap())
}

pub fn query_with_cap(
    model: &Scm,
    targets: &[VarId],
    evidence: &BTreeMap<VarId, usize>,
    cap: u64,
) -> Result<Outcome<Factor>> {
    Ok(match unnormalized(model, targets, evidence, cap)?.normalized() {
        Some(f) => Outcome::Value(f),
        None => Outcome::UnsupportedEvidence,
    })
}

/// Joint `P(targets, evidence)` (unnormalised posterior).
pub fn unnormalized(
    model: &Scm,
    targets: &[VarId],
    evidence: &BTreeMap<VarId, usize>,
    cap: u64,
) -> Result<Factor> {
    model.require_fully_specified()?;
    for t in targets {
        if evidence.contains_key(t) {
            return Err(Error::Query(format!(
                "`{}` is both a target and evidence",
                model.name(*t)
            )));
        }
    }
    for (v, s) in evidence {
        if *s >= model.card(*v) {
            return Err(Error::Query(format!("evidence state out of range for `{}`", model.name(*v))));
        }
    }
    let keep = relevant(model, targets.iter().chain(evidence.keys()).copied());
    let mut factors = Vec::new();
    for v in model.ids().filter(|v| keep[v.0]) {
        factors.push(if model.is_exogenous(v) {
            prior_factor(model, v, evidence)?
        } else {
            equation_factor(model, v, evidence)
        });
    }
    eliminate(factors, targets, cap)
}
