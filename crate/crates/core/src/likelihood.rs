//! Empirical tables, log-likelihoods and the compatibility test.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::em::{em_runs, EmConfig};
use crate::error::{check_cap, size_cap, Error, Result};
use crate::factor::{equation_factor, Factor};
use crate::graph::{c_components, CComponent, CComponents};
use crate::scm::{MixedRadix, Scm, VarId};

/// Counts of one endogenous variable against its component context.
#[derive(Debug, Clone, PartialEq)]
pub struct FamilyTable {
    pub variable: VarId,
    pub cardinality: usize,
    pub context: Vec<VarId>,
    /// Context configuration to per-state counts; absent keys have no data.
    pub counts: BTreeMap<Vec<usize>, Vec<u64>>,
}

impl FamilyTable {
    pub fn context_count(&self, ctx: &[usize]) -> u64 {
        self.counts.get(ctx).map_or(0, |c| c.iter().sum())
    }

    /// `P̂(x | ctx)` as a slice over the states of the variable, or `None`
    /// when the context was never observed.
    pub fn conditional(&self, ctx: &[usize]) -> Option<Vec<f64>> {
        let c = self.counts.get(ctx)?;
        let n: u64 = c.iter().sum();
        (n > 0).then(|| c.iter().map(|k| *k as f64 / n as f64).collect())
    }

    pub fn probability(&self, state: usize, ctx: &[usize]) -> Option<f64> {
        self.conditional(ctx).map(|p| p[state])
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ComponentTables {
    pub context: Vec<VarId>,
    pub context_counts: BTreeMap<Vec<usize>, u64>,
    pub families: Vec<FamilyTable>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EmpiricalTables {
    pub components: Vec<ComponentTables>,
    pub total: u64,
}

impl EmpiricalTables {
    pub fn family(&self, x: VarId) -> Option<&FamilyTable> {
        self.components
            .iter()
            .flat_map(|c| &c.families)
            .find(|f| f.variable == x)
    }
}

pub fn empirical_frequencies(
    model: &Scm,
    data: &Dataset,
    components: &CComponents,
) -> Result<EmpiricalTables> {
    data.check(model)?;
    let mut out = Vec::with_capacity(components.components.len());
    for comp in &components.components {
        let pos = data.positions(model, &comp.context)?;
        let context_counts = data.project(&pos);
        let mut families = Vec::with_capacity(comp.endogenous.len());
        for &x in &comp.endogenous {
            let ctx = comp.context_of(x).to_vec();
            let ctx_pos = data.positions(model, &ctx)?;
            let x_pos = data.positions(model, &[x])?[0];
            let card = model.card(x);
            let mut counts: BTreeMap<Vec<usize>, Vec<u64>> = BTreeMap::new();
            for (row, n) in data.counts() {
                let key: Vec<usize> = ctx_pos.iter().map(|p| row[*p]).collect();
                counts.entry(key).or_insert_with(|| vec![0; card])[row[x_pos]] += n;
            }
            families.push(FamilyTable {
                variable: x,
                cardinality: card,
                context: ctx,
                counts,
            });
        }
        out.push(ComponentTables {
            context: comp.context.clone(),
            context_counts,
            families,
        });
    }
    Ok(EmpiricalTables {
        components: out,
        total: data.total(),
    })
}

fn xlogy_ratio(n: u64, d: u64) -> f64 {
    if n == 0 {
        0.0
    } else {
        n as f64 * (n as f64 / d as f64).ln()
    }
}

/// Maximum of the endogenous log-likelihood, attained at the empirical
/// frequencies.
pub fn ll_star(tables: &EmpiricalTables) -> f64 {
    tables
        .components
        .iter()
        .flat_map(|c| &c.families)
        .flat_map(|f| f.counts.values())
        .map(|c| {
            let n: u64 = c.iter().sum();
            c.iter().map(|k| xlogy_ratio(*k, n)).sum::<f64>()
        })
        .sum()
}

/// Log-likelihood value where `−∞` is an explicit flag.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "kind", content = "value")]
pub enum LogLik {
    Finite(f64),
    NegInfinity,
}

impl LogLik {
    pub fn value(self) -> Option<f64> {
        match self {
            LogLik::Finite(v) => Some(v),
            LogLik::NegInfinity => None,
        }
    }

    pub fn is_finite(self) -> bool {
        matches!(self, LogLik::Finite(_))
    }

    fn add(self, other: LogLik) -> LogLik {
        match (self, other) {
            (LogLik::Finite(a), LogLik::Finite(b)) => LogLik::Finite(a + b),
            _ => LogLik::NegInfinity,
        }
    }
}

/// One observed component context with the joint exogenous states that
/// reproduce it.
#[derive(Debug, Clone)]
pub(crate) struct ContextSupport {
    pub count: u64,
    /// Flattened exogenous states, `exogenous.len()` digits per entry.
    pub states: Vec<u32>,
    pub entries: usize,
}

/// Data-reduced structural indicators of one c-component.
#[derive(Debug, Clone)]
pub(crate) struct ComponentEvidence {
    pub exogenous: Vec<VarId>,
    pub cards: Vec<usize>,
    pub contexts: Vec<ContextSupport>,
    pub total: u64,
}

impl ComponentEvidence {
    /// Probability of one context under per-variable PMFs.
    pub fn context_mass(&self, ctx: &ContextSupport, pmfs: &[Vec<f64>]) -> f64 {
        let w = self.exogenous.len();
        if w == 0 {
            return ctx.entries as f64;
        }
        ctx.states
            .chunks_exact(w)
            .map(|s| s.iter().zip(pmfs).map(|(u, p)| p[*u as usize]).product::<f64>())
            .sum()
    }

    pub fn log_likelihood(&self, pmfs: &[Vec<f64>]) -> LogLik {
        let mut ll = 0.0;
        for ctx in &self.contexts {
            let z = self.context_mass(ctx, pmfs);
            if z <= 0.0 {
                return LogLik::NegInfinity;
            }
            ll += ctx.count as f64 * z.ln();
        }
        LogLik::Finite(ll)
    }
}

/// Joint exogenous states of `comp` (indices over its exogenous variables,
/// last fastest) that produce the context configuration `config`.
pub(crate) fn context_support(
    model: &Scm,
    comp: &CComponent,
    config: &[usize],
    ones: &Factor,
) -> Vec<usize> {
    let evidence: BTreeMap<VarId, usize> =
        comp.context.iter().copied().zip(config.iter().copied()).collect();
    let indicator = comp
        .endogenous
        .iter()
        .map(|x| equation_factor(model, *x, &evidence))
        .fold(ones.clone(), |acc, f| acc.product(&f))
        .reorder(&comp.exogenous);
    indicator
        .values()
        .iter()
        .enumerate()
        .filter(|(_, v)| **v > 0.0)
        .map(|(i, _)| i)
        .collect()
}

/// Factor of ones over the exogenous variables of `comp`, after a size check.
pub(crate) fn exogenous_ones(model: &Scm, comp: &CComponent, cap: u64) -> Result<Factor> {
    let cards: Vec<usize> = comp.exogenous.iter().map(|u| model.card(*u)).collect();
    let joint: u128 = cards.iter().map(|c| *c as u128).product();
    check_cap("joint exogenous space of a c-component", joint, cap)?;
    Factor::new(comp.exogenous.clone(), cards, vec![1.0; joint as usize])
}

pub(crate) fn component_evidence(
    model: &Scm,
    comp: &CComponent,
    data: &Dataset,
    cap: u64,
) -> Result<ComponentEvidence> {
    let ones = exogenous_ones(model, comp, cap)?;
    let cards = ones.cards().to_vec();
    let pos = data.positions(model, &comp.context)?;
    let radix = MixedRadix::new(cards.clone());
    let mut digits = vec![0usize; cards.len()];
    let mut contexts = Vec::new();
    for (config, count) in data.project(&pos) {
        let support = context_support(model, comp, &config, &ones);
        let mut states = Vec::with_capacity(support.len() * cards.len());
        for i in &support {
            radix.decode(*i, &mut digits);
            states.extend(digits.iter().map(|d| *d as u32));
        }
        contexts.push(ContextSupport {
            count,
            states,
            entries: support.len(),
        });
    }
    Ok(ComponentEvidence {
        exogenous: comp.exogenous.clone(),
        cards,
        contexts,
        total: data.total(),
    })
}

pub(crate) fn all_component_evidence(
    model: &Scm,
    components: &CComponents,
    data: &Dataset,
) -> Result<Vec<ComponentEvidence>> {
    data.check(model)?;
    let cap = size_cap();
    components
        .components
        .iter()
        .map(|c| component_evidence(model, c, data, cap))
        .collect()
}

/// Marginal log-likelihood of a fully specified model, summed over
/// c-components.
pub fn marginal_ll(model: &Scm, data: &Dataset) -> Result<LogLik> {
    model.require_fully_specified()?;
    let comps = c_components(model);
    let evidence = all_component_evidence(model, &comps, data)?;
    let mut total = LogLik::Finite(0.0);
    for ev in &evidence {
        let pmfs: Vec<Vec<f64>> = ev
            .exogenous
            .iter()
            .map(|u| model.pmf(*u).expect("fully specified").values().to_vec())
            .collect();
        total = total.add(ev.log_likelihood(&pmfs));
    }
    Ok(total)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Verdict {
    Compatible,
    Incompatible,
    Inconclusive,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompatibilityReport {
    pub verdict: Verdict,
    pub ll_star: f64,
    /// Highest finite marginal log-likelihood over the runs.
    pub best_ll: Option<f64>,
    /// `ll_star − best_ll`.
    pub gap: Option<f64>,
    pub tol: f64,
    pub runs: usize,
    pub converged_runs: usize,
    pub seeds: Vec<u64>,
}

/// Default absolute tolerance, in nats, for the compatibility verdict.
pub const DEFAULT_COMPAT_TOL: f64 = 1e-3;

pub fn compatibility_test(
    model: &Scm,
    data: &Dataset,
    seeds: &[u64],
    tol: f64,
    config: &EmConfig,
) -> Result<CompatibilityReport> {
    if seeds.is_empty() {
        return Err(Error::Domain("compatibility test needs at least one run".into()));
    }
    if !(tol > 0.0) {
        return Err(Error::Domain("tolerance must be positive".into()));
    }
    let comps = c_components(model);
    let tables = empirical_frequencies(model, data, &comps)?;
    let star = ll_star(&tables);
    let runs = em_runs(model, data, seeds, config)?;
    let best_ll = runs
        .iter()
        .filter_map(|r| r.log_likelihood.value())
        .fold(None, |acc: Option<f64>, v| Some(acc.map_or(v, |a| a.max(v))));
    let converged_runs = runs.iter().filter(|r| r.converged).count();
    let verdict = match best_ll {
        Some(b) if b >= star - tol => Verdict::Compatible,
        _ if converged_runs == runs.len() => Verdict::Incompatible,
        _ => Verdict::Inconclusive,
    };
    Ok(CompatibilityReport {
        verdict,
        ll_star: star,
        best_ll,
        gap: best_ll.map(|b| star - b),
        tol,
        runs: runs.len(),
        converged_runs,
        seeds: seeds.to_vec(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scm::{Pmf, ScmBuilder};

    fn chain() -> Scm {
        let mut b = ScmBuilder::new();
        let x = b.endogenous("X", 2);
        let y = b.endogenous("Y", 2);
        b.conservative(x, &[], "U").unwrap();
        b.conservative(y, &[x], "V").unwrap();
        b.build().unwrap()
    }

    fn data(m: &Scm, rows: &[([usize; 2], u64)]) -> Dataset {
        Dataset::from_counts(
            vec!["X".into(), "Y".into()],
            rows.iter().map(|(r, n)| (r.to_vec(), *n)),
        )
        .map(|d| {
            d.check(m).unwrap();
            d
        })
        .unwrap()
    }

    #[test]
    fn identical_rows_give_zero_ll_star() {
        let m = chain();
        let d = data(&m, &[([1, 0], 17)]);
        let t = empirical_frequencies(&m, &d, &c_components(&m)).unwrap();
        assert_eq!(ll_star(&t), 0.0);
    }

    #[test]
    fn uniform_data_gives_uniform_slices() {
        let m = chain();
        let d = data(&m, &[([0, 0], 5), ([0, 1], 5), ([1, 0], 5), ([1, 1], 5)]);
        let t = empirical_frequencies(&m, &d, &c_components(&m)).unwrap();
        let y = t.family(m.id("Y").unwrap()).unwrap();
        assert_eq!(y.conditional(&[0]).unwrap(), vec![0.5, 0.5]);
        assert_eq!(y.conditional(&[1]).unwrap(), vec![0.5, 0.5]);
    }

    #[test]
    fn unobserved_context_is_undefined() {
        let m = chain();
        let d = data(&m, &[([0, 0], 3), ([0, 1], 1)]);
        let t = empirical_frequencies(&m, &d, &c_components(&m)).unwrap();
        let y = t.family(m.id("Y").unwrap()).unwrap();
        assert!(y.conditional(&[1]).is_none());
        assert_eq!(y.context_count(&[0]), 4);
    }

    #[test]
    fn deterministic_model_single_row_has_zero_ll() {
        let m = chain();
        let (u, v) = (m.id("U").unwrap(), m.id("V").unwrap());
        let fscm = m
            .with_pmfs([
                (u, Pmf::new(vec![0.0, 1.0]).unwrap()),
                (v, Pmf::new(vec![0.0, 0.0, 1.0, 0.0]).unwrap()),
            ])
            .unwrap();
        let d = data(&m, &[([1, 1], 4)]);
        assert_eq!(marginal_ll(&fscm, &d).unwrap(), LogLik::Finite(0.0));
        let d = data(&m, &[([1, 0], 1)]);
        assert_eq!(marginal_ll(&fscm, &d).unwrap(), LogLik::NegInfinity);
    }

    #[test]
    fn marginal_ll_bounded_by_ll_star() {
        let m = chain();
        let d = data(&m, &[([0, 0], 3), ([0, 1], 9), ([1, 0], 4), ([1, 1], 1)]);
        let t = empirical_frequencies(&m, &d, &c_components(&m)).unwrap();
        let (u, v) = (m.id("U").unwrap(), m.id("V").unwrap());
        let fscm = m
            .with_pmfs([(u, Pmf::uniform(2)), (v, Pmf::uniform(4))])
            .unwrap();
        let ll = marginal_ll(&fscm, &d).unwrap().value().unwrap();
        assert!(ll <= ll_star(&t) + 1e-9);
        assert!((ll - 17.0 * 0.25f64.ln()).abs() < 1e-12);
    }
}
