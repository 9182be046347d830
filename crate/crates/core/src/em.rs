//! Causal expectation-maximisation over the exogenous PMFs of a partially
//! specified model, and the multi-run bounds driver built on it.

use std::collections::BTreeMap;
use std::io::Write;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::Exp1;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::credible::{credible_interval, CredibleInterval};
use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::factor::Outcome;
use crate::graph::c_components;
use crate::likelihood::{all_component_evidence, ComponentEvidence, LogLik};
use crate::query::{evaluate, QueryDescriptor};
use crate::scm::{Pmf, Scm};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmConfig {
    /// Threshold on the summed KL divergence between successive iterates.
    pub epsilon: f64,
    pub max_iter: usize,
    /// Re-initialisations allowed per component after a context loses all
    /// model mass.
    pub max_retries: usize,
    /// Keep per-iteration log-likelihood and KL traces.
    pub record_trace: bool,
}

impl Default for EmConfig {
    fn default() -> Self {
        EmConfig {
            epsilon: 2.0 * f64::EPSILON,
            max_iter: 10_000,
            max_retries: 5,
            record_trace: false,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RunFlag {
    NotConverged,
    UnsupportedContext,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComponentTrace {
    pub exogenous: Vec<String>,
    pub iterations: usize,
    pub converged: bool,
    pub restarts: usize,
    /// Marginal log-likelihood of the component at each iterate `P_t`.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub log_likelihood: Vec<f64>,
    /// KL divergence between `P_{t+1}` and `P_t`.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub delta: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmRun {
    pub seed: u64,
    pub pmfs: BTreeMap<String, Pmf>,
    pub iterations: Vec<usize>,
    pub log_likelihood: LogLik,
    pub converged: bool,
    pub flag: Option<RunFlag>,
    pub components: Vec<ComponentTrace>,
}

impl EmRun {
    /// The input model completed with this run's exogenous PMFs.
    pub fn model(&self, model: &Scm) -> Result<Scm> {
        let pmfs = self
            .pmfs
            .iter()
            .map(|(name, p)| Ok((model.id(name)?, p.clone())))
            .collect::<Result<Vec<_>>>()?;
        model.with_pmfs(pmfs)
    }
}

struct ComponentResult {
    pmfs: Vec<Vec<f64>>,
    ll: LogLik,
    trace: ComponentTrace,
    flag: Option<RunFlag>,
}

fn dirichlet_one(rng: &mut ChaCha8Rng, k: usize) -> Vec<f64> {
    if k == 1 {
        return vec![1.0];
    }
    let draws: Vec<f64> = (0..k).map(|_| rng.sample::<f64, _>(Exp1)).collect();
    let total: f64 = draws.iter().sum();
    draws.into_iter().map(|d| d / total).collect()
}

fn kl(p: &[f64], q: &[f64]) -> f64 {
    p.iter()
        .zip(q)
        .filter(|(a, _)| **a > 0.0)
        .map(|(a, b)| if *b > 0.0 { a * (a / b).ln() } else { f64::INFINITY })
        .sum()
}

fn em_component(
    ev: &ComponentEvidence,
    names: Vec<String>,
    seed: u64,
    index: usize,
    cfg: &EmConfig,
) -> ComponentResult {
    let width = ev.exogenous.len();
    let mut trace = ComponentTrace {
        exogenous: names,
        iterations: 0,
        converged: false,
        restarts: 0,
        log_likelihood: Vec::new(),
        delta: Vec::new(),
    };
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut init = |retry: usize| {
        rng.set_stream((index * (cfg.max_retries + 1) + retry) as u64);
        rng.set_word_pos(0);
        ev.cards
            .iter()
            .map(|c| dirichlet_one(&mut rng, *c))
            .collect::<Vec<_>>()
    };
    let mut p = init(0);
    if ev.contexts.iter().any(|c| c.entries == 0) {
        return ComponentResult {
            ll: ev.log_likelihood(&p),
            pmfs: p,
            trace,
            flag: Some(RunFlag::UnsupportedContext),
        };
    }
    if width == 0 {
        trace.converged = true;
        return ComponentResult {
            ll: ev.log_likelihood(&p),
            pmfs: p,
            trace,
            flag: None,
        };
    }
    let n = ev.total as f64;
    let mut next: Vec<Vec<f64>> = ev.cards.iter().map(|c| vec![0.0; *c]).collect();
    let mut weights: Vec<f64> = Vec::new();
    let mut t = 0;
    'outer: while t < cfg.max_iter {
        next.iter_mut().for_each(|v| v.fill(0.0));
        let mut ll = 0.0;
        for ctx in &ev.contexts {
            weights.clear();
            weights.extend(
                ctx.states.chunks_exact(width).map(|s| {
                    s.iter()
                        .zip(&p)
                        .map(|(u, q)| q[*u as usize])
                        .product::<f64>()
                }),
            );
            let z: f64 = weights.iter().sum();
            if !(z > 0.0) {
                if trace.restarts >= cfg.max_retries {
                    return ComponentResult {
                        ll: LogLik::NegInfinity,
                        pmfs: p,
                        trace,
                        flag: Some(RunFlag::UnsupportedContext),
                    };
                }
                trace.restarts += 1;
                p = init(trace.restarts);
                trace.log_likelihood.clear();
                trace.delta.clear();
                t = 0;
                continue 'outer;
            }
            ll += ctx.count as f64 * z.ln();
            let scale = ctx.count as f64 / (n * z);
            for (s, w) in ctx.states.chunks_exact(width).zip(&weights) {
                for (k, u) in s.iter().enumerate() {
                    next[k][*u as usize] += scale * w;
                }
            }
        }
        let delta: f64 = next.iter().zip(&p).map(|(a, b)| kl(a, b)).sum();
        if cfg.record_trace {
            trace.log_likelihood.push(ll);
            trace.delta.push(delta);
        }
        std::mem::swap(&mut p, &mut next);
        t += 1;
        trace.iterations = t;
        if delta <= cfg.epsilon {
            trace.converged = true;
            break;
        }
    }
    ComponentResult {
        ll: ev.log_likelihood(&p),
        pmfs: p,
        flag: (!trace.converged).then_some(RunFlag::NotConverged),
        trace,
    }
}

fn run_prepared(model: &Scm, evidence: &[ComponentEvidence], seed: u64, cfg: &EmConfig) -> EmRun {
    let results: Vec<ComponentResult> = evidence
        .par_iter()
        .enumerate()
        .map(|(i, ev)| {
            let names = ev.exogenous.iter().map(|u| model.name(*u).to_string()).collect();
            em_component(ev, names, seed, i, cfg)
        })
        .collect();
    let mut pmfs = BTreeMap::new();
    let mut ll = LogLik::Finite(0.0);
    let mut flag = None;
    for (ev, r) in evidence.iter().zip(&results) {
        for (u, p) in ev.exogenous.iter().zip(&r.pmfs) {
            let pmf = Pmf::from_weights(p.clone()).unwrap_or_else(|_| Pmf::uniform(p.len()));
            pmfs.insert(model.name(*u).to_string(), pmf);
        }
        ll = match (ll, r.ll) {
            (LogLik::Finite(a), LogLik::Finite(b)) => LogLik::Finite(a + b),
            _ => LogLik::NegInfinity,
        };
        flag = match (flag, r.flag) {
            (Some(RunFlag::UnsupportedContext), _) | (_, Some(RunFlag::UnsupportedContext)) => {
                Some(RunFlag::UnsupportedContext)
            }
            (a, b) => a.or(b),
        };
    }
    // exogenous variables outside every component have no data to fit
    for u in model.exogenous() {
        pmfs.entry(model.name(u).to_string())
            .or_insert_with(|| Pmf::uniform(model.card(u)));
    }
    EmRun {
        seed,
        pmfs,
        iterations: results.iter().map(|r| r.trace.iterations).collect(),
        log_likelihood: ll,
        converged: flag.is_none(),
        flag,
        components: results.into_iter().map(|r| r.trace).collect(),
    }
}

fn check_config(cfg: &EmConfig) -> Result<()> {
    if !(cfg.epsilon > 0.0) {
        return Err(Error::Domain("epsilon must be positive".into()));
    }
    if cfg.max_iter == 0 {
        return Err(Error::Domain("max_iter must be at least 1".into()));
    }
    Ok(())
}

/// One EM run from a Dirichlet(1) initialisation drawn with `seed`.
pub fn em_run(model: &Scm, data: &Dataset, seed: u64, cfg: &EmConfig) -> Result<EmRun> {
    Ok(em_runs(model, data, &[seed], cfg)?.remove(0))
}

/// Independent runs, one per seed, returned in seed order.
pub fn em_runs(model: &Scm, data: &Dataset, seeds: &[u64], cfg: &EmConfig) -> Result<Vec<EmRun>> {
    check_config(cfg)?;
    let comps = c_components(model);
    let evidence = all_component_evidence(model, &comps, data)?;
    Ok(seeds
        .par_iter()
        .map(|s| run_prepared(model, &evidence, *s, cfg))
        .collect())
}

/// `n` consecutive seeds starting at `base`.
pub fn seed_sequence(base: u64, n: usize) -> Vec<u64> {
    (0..n as u64).map(|i| base.wrapping_add(i)).collect()
}

/// Default relative half-width used for the credibility report.
pub const DEFAULT_CREDIBILITY_EPSILON: f64 = 0.17;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub value: Option<f64>,
    pub excluded: Option<String>,
    pub run: EmRun,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CredibilityReport {
    pub runs: usize,
    pub width: f64,
    pub epsilon_rel: f64,
    pub delta: f64,
    pub probability: Option<f64>,
    pub raw: Option<f64>,
    pub clamped: bool,
    pub note: Option<String>,
    pub assumptions: String,
}

const ASSUMPTIONS: &str = "run values uniform on the exact interval; uniform prior on the \
distances of the exact bounds from the observed ones";

impl CredibilityReport {
    pub fn new(values: &[f64], epsilon_rel: f64) -> Self {
        let n = values.len();
        let (a, b) = min_max(values).unwrap_or((0.0, 0.0));
        let width = b - a;
        let delta = 2.0 * epsilon_rel * width;
        let mut report = CredibilityReport {
            runs: n,
            width,
            epsilon_rel,
            delta,
            probability: None,
            raw: None,
            clamped: false,
            note: None,
            assumptions: ASSUMPTIONS.into(),
        };
        match credible_interval(n, width, delta) {
            Ok(CredibleInterval {
                probability,
                raw,
                clamped,
            }) => {
                report.probability = Some(probability);
                report.raw = Some(raw);
                report.clamped = clamped;
                if clamped {
                    report.note = Some(format!("closed form gave {raw}, clamped to [0, 1]"));
                }
            }
            Err(e) => report.note = Some(e.to_string()),
        }
        report
    }
}

fn min_max(values: &[f64]) -> Option<(f64, f64)> {
    values.iter().fold(None, |acc, v| match acc {
        None => Some((*v, *v)),
        Some((a, b)) => Some((a.min(*v), b.max(*v))),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundsResult {
    pub query: QueryDescriptor,
    pub values: Vec<f64>,
    pub lower: f64,
    pub upper: f64,
    pub runs: Vec<RunRecord>,
    pub excluded: Vec<u64>,
    pub credibility: CredibilityReport,
}

impl BoundsResult {
    fn assemble(query: QueryDescriptor, runs: Vec<RunRecord>, epsilon_rel: f64) -> Result<Self> {
        let values: Vec<f64> = runs.iter().filter_map(|r| r.value).collect();
        let excluded = runs
            .iter()
            .filter(|r| r.value.is_none())
            .map(|r| r.run.seed)
            .collect();
        let (lower, upper) = min_max(&values).ok_or(Error::NoValidRuns(runs.len()))?;
        Ok(BoundsResult {
            query,
            credibility: CredibilityReport::new(&values, epsilon_rel),
            values,
            lower,
            upper,
            runs,
            excluded,
        })
    }

    /// Rebuilds every derived field from the per-run records.
    pub fn recompute(&self) -> Result<Self> {
        Self::assemble(self.query.clone(), self.runs.clone(), self.credibility.epsilon_rel)
    }

    pub fn width(&self) -> f64 {
        self.upper - self.lower
    }

    /// Writes one JSON object per run.
    pub fn write_trace<W: Write>(&self, mut w: W) -> Result<()> {
        for r in &self.runs {
            serde_json::to_writer(&mut w, &r.run)?;
            writeln!(w)?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BoundsOptions {
    pub em: EmConfig,
    pub credibility_epsilon: f64,
}

impl Default for BoundsOptions {
    fn default() -> Self {
        BoundsOptions {
            em: EmConfig::default(),
            credibility_epsilon: DEFAULT_CREDIBILITY_EPSILON,
        }
    }
}

/// Runs EM once per seed, evaluates the query on each completed model and
/// reports the interval spanned by the valid runs.
pub fn bounds(
    model: &Scm,
    data: &Dataset,
    query: &QueryDescriptor,
    seeds: &[u64],
    options: &BoundsOptions,
) -> Result<BoundsResult> {
    if seeds.is_empty() {
        return Err(Error::Domain("bounds need at least one run".into()));
    }
    query.resolve(model)?;
    let runs = em_runs(model, data, seeds, &options.em)?;
    let records = runs
        .into_par_iter()
        .map(|run| {
            if let Some(flag) = run.flag {
                let reason = serde_json::to_value(flag)?.as_str().unwrap_or_default().to_string();
                return Ok(RunRecord {
                    value: None,
                    excluded: Some(reason),
                    run,
                });
            }
            let fscm = run.model(model)?;
            Ok(match evaluate(&fscm, query)? {
                Outcome::Value(v) => RunRecord {
                    value: Some(v),
                    excluded: None,
                    run,
                },
                Outcome::UnsupportedEvidence => RunRecord {
                    value: None,
                    excluded: Some("unsupported-evidence".into()),
                    run,
                },
            })
        })
        .collect::<Result<Vec<_>>>()?;
    BoundsResult::assemble(query.clone(), records, options.credibility_epsilon)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scm::ScmBuilder;

    fn single(table: Vec<usize>) -> Scm {
        let mut b = ScmBuilder::new();
        let x = b.endogenous("X", 3);
        let u = b.exogenous("U", 3);
        b.equation(x, &[u], table);
        b.build().unwrap()
    }

    fn counts(n: [u64; 3]) -> Dataset {
        Dataset::from_counts(vec!["X".into()], (0..3).map(|i| (vec![i], n[i]))).unwrap()
    }

    #[test]
    fn identity_equation_reaches_frequencies_in_one_step() {
        let m = single(vec![0, 1, 2]);
        let d = counts([2, 5, 3]);
        let cfg = EmConfig {
            record_trace: true,
            ..EmConfig::default()
        };
        let run = em_run(&m, &d, 7, &cfg).unwrap();
        let p = run.pmfs["U"].values().to_vec();
        for (a, b) in p.iter().zip([0.2, 0.5, 0.3]) {
            assert!((a - b).abs() < 1e-15);
        }
        assert!(run.converged);
        assert_eq!(run.iterations, vec![2]);
        assert_eq!(run.components[0].delta[1], 0.0);
    }

    #[test]
    fn same_seed_same_run() {
        let mut b = ScmBuilder::new();
        let x = b.endogenous("X", 2);
        let y = b.endogenous("Y", 2);
        b.conservative(x, &[], "U").unwrap();
        b.conservative(y, &[x], "V").unwrap();
        let m = b.build().unwrap();
        let d = Dataset::from_counts(
            vec!["X".into(), "Y".into()],
            [(vec![0, 0], 3), (vec![0, 1], 1), (vec![1, 1], 4)],
        )
        .unwrap();
        let cfg = EmConfig::default();
        assert_eq!(em_run(&m, &d, 3, &cfg).unwrap(), em_run(&m, &d, 3, &cfg).unwrap());
        assert_ne!(
            em_run(&m, &d, 3, &cfg).unwrap().pmfs["V"],
            em_run(&m, &d, 4, &cfg).unwrap().pmfs["V"]
        );
    }

    #[test]
    fn impossible_data_is_flagged() {
        let mut b = ScmBuilder::new();
        let x = b.endogenous("X", 2);
        let y = b.endogenous("Y", 2);
        b.conservative(x, &[], "U").unwrap();
        let v = b.exogenous("V", 1);
        b.equation(y, &[x, v], vec![0, 1]);
        let m = b.build().unwrap();
        let d = Dataset::from_counts(vec!["X".into(), "Y".into()], [(vec![0, 1], 3)]).unwrap();
        let run = em_run(&m, &d, 0, &EmConfig::default()).unwrap();
        assert_eq!(run.flag, Some(RunFlag::UnsupportedContext));
        assert_eq!(run.log_likelihood, LogLik::NegInfinity);
    }

    #[test]
    fn bad_config_rejected() {
        let m = single(vec![0, 1, 2]);
        let d = counts([1, 1, 1]);
        let cfg = EmConfig {
            epsilon: 0.0,
            ..EmConfig::default()
        };
        assert!(em_run(&m, &d, 0, &cfg).is_err());
    }
}
