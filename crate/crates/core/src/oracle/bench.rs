//! Random chain benchmarks: generator, sampler and accuracy measurement.

use std::fmt;
use std::str::FromStr;
use std::time::Instant;

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::Exp1;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::em::{em_runs, seed_sequence, EmConfig};
use crate::error::{Error, Result};
use crate::factor::Outcome;
use crate::query::{evaluate, QueryDescriptor, Target};
use crate::scm::{conservative_digit, conservative_table, Pmf, Scm, ScmBuilder, VarId};

use super::exact::exact_bounds;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BenchClass {
    Markovian,
    QuasiMarkovian,
    General,
}

impl fmt::Display for BenchClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            BenchClass::Markovian => "markovian",
            BenchClass::QuasiMarkovian => "quasi-markovian",
            BenchClass::General => "general",
        })
    }
}

impl FromStr for BenchClass {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "markovian" => Ok(BenchClass::Markovian),
            "quasi-markovian" | "quasi" => Ok(BenchClass::QuasiMarkovian),
            "general" | "non-quasi-markovian" => Ok(BenchClass::General),
            _ => Err(Error::Domain(format!("unknown model class `{s}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct BenchmarkSpec {
    pub m: usize,
    pub class: BenchClass,
    pub seed: u64,
    pub samples: u64,
}

impl BenchmarkSpec {
    pub fn new(m: usize, class: BenchClass, seed: u64) -> Self {
        BenchmarkSpec {
            m,
            class,
            seed,
            samples: 1000,
        }
    }
}

#[derive(Debug, Clone)]
pub struct Benchmark {
    pub spec: BenchmarkSpec,
    pub truth: Scm,
    pub observable: Scm,
    /// Endogenous names grouped by shared exogenous parents.
    pub groups: Vec<Vec<String>>,
    /// PNS of the first chain node on the last one.
    pub query: QueryDescriptor,
}

fn dirichlet(rng: &mut ChaCha8Rng, k: usize) -> Result<Pmf> {
    Pmf::from_weights((0..k).map(|_| rng.sample::<f64, _>(Exp1)).collect())
}

/// Disjoint pairs at chain distance one or two, drawn uniformly among the
/// still uncovered pairs until none is left; the rest stay singletons.
fn draw_groups(m: usize, rng: &mut ChaCha8Rng) -> Vec<Vec<usize>> {
    let mut covered = vec![false; m];
    let mut groups = Vec::new();
    loop {
        let candidates: Vec<(usize, usize)> = (0..m)
            .flat_map(|i| [(i, i + 1), (i, i + 2)])
            .filter(|(i, j)| *j < m && !covered[*i] && !covered[*j])
            .collect();
        let Some(&(i, j)) = candidates.choose(rng) else {
            break;
        };
        covered[i] = true;
        covered[j] = true;
        groups.push(vec![i, j]);
    }
    groups.extend((0..m).filter(|i| !covered[*i]).map(|i| vec![i]));
    groups.sort();
    groups
}

/// Boolean chain `X1 -> ... -> Xm` with exogenous parents by class:
/// one conservative `U` per node (markovian); one `U` shared by each drawn
/// pair and jointly conservative for both (quasi-markovian); per pair
/// `(i, j)` a conservative `U` for `Xi` that also perturbs `Xj` through a
/// random bit map, plus a conservative `U` for `Xj` (general).
pub fn generate_benchmark(spec: &BenchmarkSpec) -> Result<Benchmark> {
    if spec.m < 2 {
        return Err(Error::Domain("benchmark chains need m >= 2".into()));
    }
    if spec.samples == 0 {
        return Err(Error::Domain("benchmark sample size must be positive".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let m = spec.m;
    let mut b = ScmBuilder::new();
    let xs: Vec<VarId> = (1..=m).map(|i| b.endogenous(format!("X{i}"), 2)).collect();
    let pa = |i: usize| if i == 0 { vec![] } else { vec![xs[i - 1]] };
    let groups = match spec.class {
        BenchClass::Markovian => (0..m).map(|i| vec![i]).collect(),
        _ => draw_groups(m, &mut rng),
    };
    let mut exo = Vec::new();
    let mut next_u = 1;
    let mut fresh = |b: &mut ScmBuilder, card: usize| {
        let u = b.exogenous(format!("U{next_u}"), card);
        next_u += 1;
        u
    };
    for g in &groups {
        match (g.as_slice(), spec.class) {
            (&[i], _) => {
                let se = conservative_table(2, &vec![2; pa(i).len()])?;
                let u = fresh(&mut b, se.exo_cardinality);
                let mut parents = pa(i);
                parents.push(u);
                b.equation(xs[i], &parents, se.table);
                exo.push(u);
            }
            (&[i, j], BenchClass::QuasiMarkovian) => {
                let ci = 1usize << (1 << pa(i).len());
                let cj = 4;
                let u = fresh(&mut b, ci * cj);
                let mut table_i = Vec::new();
                for k in 0..(1 << pa(i).len()) {
                    table_i.extend((0..ci * cj).map(|u| conservative_digit(u % ci, k, 2)));
                }
                let mut parents = pa(i);
                parents.push(u);
                b.equation(xs[i], &parents, table_i);
                let mut table_j = Vec::new();
                for k in 0..2 {
                    table_j.extend((0..ci * cj).map(|u| conservative_digit(u / ci, k, 2)));
                }
                b.equation(xs[j], &[xs[j - 1], u], table_j);
                exo.push(u);
            }
            (&[i, j], _) => {
                let ci = 1usize << (1 << pa(i).len());
                let ua = fresh(&mut b, ci);
                let ub = fresh(&mut b, 4);
                let se = conservative_table(2, &vec![2; pa(i).len()])?;
                let mut parents = pa(i);
                parents.push(ua);
                b.equation(xs[i], &parents, se.table);
                let h: Vec<usize> = loop {
                    let h: Vec<usize> = (0..ci).map(|_| rng.random_range(0..2)).collect();
                    if h.contains(&0) && h.contains(&1) {
                        break h;
                    }
                };
                let mut table_j = Vec::with_capacity(2 * ci * 4);
                for k in 0..2 {
                    for a in 0..ci {
                        table_j.extend((0..4).map(|u| conservative_digit(u, k, 2) ^ h[a]));
                    }
                }
                b.equation(xs[j], &[xs[j - 1], ua, ub], table_j);
                exo.push(ua);
                exo.push(ub);
            }
            _ => unreachable!("groups have one or two members"),
        }
    }
    let observable = b.build()?;
    let pmfs = exo
        .iter()
        .map(|u| Ok((*u, dirichlet(&mut rng, observable.card(*u))?)))
        .collect::<Result<Vec<_>>>()?;
    let truth = observable.with_pmfs(pmfs)?;
    let names = |g: &Vec<usize>| g.iter().map(|i| format!("X{}", i + 1)).collect();
    Ok(Benchmark {
        spec: *spec,
        groups: groups.iter().map(names).collect(),
        query: QueryDescriptor::pns(Target::binary("X1"), Target::binary(format!("X{m}"))),
        truth,
        observable,
    })
}

/// `n` ancestral samples of the endogenous variables.
pub fn sample_dataset(truth: &Scm, n: u64, seed: u64) -> Result<Dataset> {
    if n == 0 {
        return Err(Error::Domain("sample size must be positive".into()));
    }
    truth.require_fully_specified()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let exo = truth.exogenous();
    let endo = truth.endogenous();
    let samplers = exo
        .iter()
        .map(|u| {
            WeightedIndex::new(truth.pmf(*u).expect("fully specified").values())
                .map_err(|e| Error::Model(format!("bad PMF for `{}`: {e}", truth.name(*u))))
        })
        .collect::<Result<Vec<_>>>()?;
    let mut data = Dataset::for_model(truth);
    let mut assignment = vec![0; truth.variables().len()];
    for _ in 0..n {
        for (u, s) in exo.iter().zip(&samplers) {
            assignment[u.0] = s.sample(&mut rng);
        }
        truth.propagate(&mut assignment);
        data.add(endo.iter().map(|x| assignment[x.0]).collect(), 1)?;
    }
    Ok(data)
}

/// Root mean squared distance between the endpoints of two intervals.
pub fn rmse(approx: (f64, f64), exact: (f64, f64)) -> f64 {
    (((exact.0 - approx.0).powi(2) + (exact.1 - approx.1).powi(2)) / 2.0).sqrt()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Baseline {
    /// Vertex enumeration of the compatibility polytopes.
    Exact,
    /// Interval from a large number of EM runs; approximate.
    EmReference,
}

/// Accuracy of the first `n` EM runs on one instance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchRow {
    pub instance: usize,
    pub seed: u64,
    pub class: BenchClass,
    pub m: usize,
    /// Endogenous groups sharing exogenous parents, e.g. `X1+X3 X2 X4+X5`.
    pub topology: String,
    pub n: usize,
    pub a: Option<f64>,
    pub b: Option<f64>,
    pub a_star: f64,
    pub b_star: f64,
    pub rmse: Option<f64>,
    /// Summed wall-clock time of the first `n` runs, in seconds.
    pub wall_time_s: f64,
    pub baseline: Baseline,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BenchOptions {
    pub runs: usize,
    pub reference_runs: usize,
    pub em: EmConfig,
}

impl Default for BenchOptions {
    fn default() -> Self {
        BenchOptions {
            runs: 20,
            reference_runs: 1000,
            em: EmConfig::default(),
        }
    }
}

/// Seed of the dataset drawn for a benchmark instance.
pub fn data_seed(spec: &BenchmarkSpec) -> u64 {
    spec.seed ^ 0xDA7A_5EED
}

/// First EM seed used on a benchmark instance.
pub fn em_seed(spec: &BenchmarkSpec) -> u64 {
    spec.seed.wrapping_mul(0x9E37_79B9_7F4A_7C15)
}

/// Query value of each EM run in seed order, `None` for flagged runs.
fn run_values(
    bench: &Benchmark,
    data: &Dataset,
    seeds: &[u64],
    em: &EmConfig,
) -> Result<Vec<(Option<f64>, f64)>> {
    seeds
        .par_iter()
        .map(|s| {
            let start = Instant::now();
            let run = em_runs(&bench.observable, data, &[*s], em)?.remove(0);
            let value = if run.converged {
                match evaluate(&run.model(&bench.observable)?, &bench.query)? {
                    Outcome::Value(v) => Some(v),
                    Outcome::UnsupportedEvidence => None,
                }
            } else {
                None
            };
            Ok((value, start.elapsed().as_secs_f64()))
        })
        .collect()
}

/// One row per `n = 1..=runs` comparing the first `n` runs with the
/// baseline interval. The baseline is the exact interval when available, and
/// otherwise the interval of the reference runs, which include the first
/// `runs` seeds: always for general models, and for quasi-markovian ones
/// whose sampled data are incompatible with the model.
pub fn run_instance(instance: usize, spec: &BenchmarkSpec, opts: &BenchOptions) -> Result<Vec<BenchRow>> {
    let bench = generate_benchmark(spec)?;
    let data = sample_dataset(&bench.truth, spec.samples, data_seed(spec))?;
    let seeds = seed_sequence(em_seed(spec), opts.runs.max(opts.reference_runs));
    let exact = match spec.class {
        BenchClass::General => None,
        _ => match exact_bounds(&bench.observable, &data, &bench.query) {
            Ok(e) => Some((e.lower, e.upper)),
            Err(Error::Incompatible) => None,
            Err(e) => return Err(e),
        },
    };
    let (baseline, reference) = match exact {
        Some(_) => (Baseline::Exact, opts.runs),
        None => (Baseline::EmReference, opts.reference_runs.max(opts.runs)),
    };
    let values = run_values(&bench, &data, &seeds[..reference], &opts.em)?;
    let (a_star, b_star) = match exact {
        Some(e) => e,
        None => {
            let valid: Vec<f64> = values.iter().filter_map(|v| v.0).collect();
            if valid.is_empty() {
                return Err(Error::NoValidRuns(values.len()));
            }
            (
                valid.iter().copied().fold(f64::INFINITY, f64::min),
                valid.iter().copied().fold(f64::NEG_INFINITY, f64::max),
            )
        }
    };
    let topology = bench.groups.iter().map(|g| g.join("+")).collect::<Vec<_>>().join(" ");
    let mut rows = Vec::with_capacity(opts.runs);
    let mut interval: Option<(f64, f64)> = None;
    let mut elapsed = 0.0;
    for (n, (value, secs)) in values.iter().take(opts.runs).enumerate() {
        elapsed += secs;
        if let Some(v) = value {
            interval = Some(interval.map_or((*v, *v), |(a, b)| (a.min(*v), b.max(*v))));
        }
        rows.push(BenchRow {
            instance,
            seed: spec.seed,
            class: spec.class,
            m: spec.m,
            topology: topology.clone(),
            n: n + 1,
            a: interval.map(|i| i.0),
            b: interval.map(|i| i.1),
            a_star,
            b_star,
            rmse: interval.map(|i| rmse(i, (a_star, b_star))),
            wall_time_s: elapsed,
            baseline,
        });
    }
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{c_components, markovianity_class, Markovianity};
    use crate::scm::validate_scm;

    #[test]
    fn node_counts_and_classes() {
        for seed in 0..10 {
            let m = generate_benchmark(&BenchmarkSpec::new(5, BenchClass::Markovian, seed)).unwrap();
            assert_eq!(m.truth.variables().len(), 10);
            assert_eq!(markovianity_class(&c_components(&m.truth)), Markovianity::Markovian);
            let q = generate_benchmark(&BenchmarkSpec::new(5, BenchClass::QuasiMarkovian, seed)).unwrap();
            let n = q.truth.variables().len();
            assert!((7..=8).contains(&n), "{n}");
            assert_eq!(markovianity_class(&c_components(&q.truth)), Markovianity::QuasiMarkovian);
            let g = generate_benchmark(&BenchmarkSpec::new(5, BenchClass::General, seed)).unwrap();
            assert_eq!(markovianity_class(&c_components(&g.truth)), Markovianity::General);
            for b in [&m, &q, &g] {
                assert!(validate_scm(&b.observable).unwrap().is_valid());
                assert!(b.truth.is_fully_specified() && !b.observable.is_fully_specified());
            }
        }
    }

    #[test]
    fn deterministic_in_seed() {
        let s = BenchmarkSpec::new(6, BenchClass::General, 42);
        let (a, b) = (generate_benchmark(&s).unwrap(), generate_benchmark(&s).unwrap());
        assert_eq!(a.truth, b.truth);
        assert_eq!(a.groups, b.groups);
        let d1 = sample_dataset(&a.truth, 100, 1).unwrap();
        assert_eq!(d1, sample_dataset(&b.truth, 100, 1).unwrap());
    }

    #[test]
    fn rmse_arithmetic() {
        assert_eq!(rmse((0.2, 0.4), (0.2, 0.4)), 0.0);
        assert!((rmse((0.1, 0.3), (0.0, 0.4)) - 0.1).abs() < 1e-15);
        assert!((rmse((0.5, 0.6), (0.25, 0.85)) - 0.25).abs() < 1e-15);
    }

    #[test]
    fn zero_samples_rejected() {
        let b = generate_benchmark(&BenchmarkSpec::new(3, BenchClass::Markovian, 0)).unwrap();
        assert!(sample_dataset(&b.truth, 0, 0).is_err());
    }
}
