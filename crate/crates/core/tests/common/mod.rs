#![allow(dead_code)]

use std::collections::BTreeMap;

use emcc_core::data::Dataset;
use emcc_core::scm::{MixedRadix, Pmf, Scm, ScmBuilder, VarId};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn random_pmf(rng: &mut ChaCha8Rng, k: usize) -> Pmf {
    Pmf::from_weights((0..k).map(|_| rng.random::<f64>() + 0.01).collect()).unwrap()
}

/// Random fully specified model: up to four endogenous variables of
/// cardinality 2 or 3 with random tables, up to three exogenous roots shared
/// round-robin between them.
pub fn random_fscm(rng: &mut ChaCha8Rng) -> Scm {
    let mut b = ScmBuilder::new();
    let n_endo = rng.random_range(2..=4);
    let n_exo = rng.random_range(1..=n_endo.min(3));
    let endo: Vec<VarId> = (0..n_endo)
        .map(|i| b.endogenous(format!("X{i}"), rng.random_range(2..=3)))
        .collect();
    let exo: Vec<VarId> = (0..n_exo)
        .map(|i| b.exogenous(format!("U{i}"), rng.random_range(2..=3)))
        .collect();
    for (i, x) in endo.iter().enumerate() {
        let mut parents: Vec<VarId> = endo[..i].iter().copied().filter(|_| rng.random_bool(0.5)).collect();
        let u = i % n_exo;
        parents.push(exo[u]);
        if n_exo > 1 && rng.random_bool(0.3) {
            parents.push(exo[(u + 1) % n_exo]);
        }
        let rows: usize = parents.iter().map(|p| b.card(*p)).product();
        let card = b.card(*x);
        let table = (0..rows).map(|_| rng.random_range(0..card)).collect();
        b.equation(*x, &parents, table);
    }
    let pmfs: Vec<(VarId, Pmf)> = exo.iter().map(|u| (*u, random_pmf(rng, b.card(*u)))).collect();
    for (u, p) in pmfs {
        b.pmf(u, p);
    }
    b.build().unwrap()
}

/// Random conservative markovian model over binary variables, each with at
/// most two endogenous parents.
pub fn random_conservative(rng: &mut ChaCha8Rng, m: usize) -> Scm {
    let mut b = ScmBuilder::new();
    let xs: Vec<VarId> = (0..m).map(|i| b.endogenous(format!("X{}", i + 1), 2)).collect();
    for i in 0..m {
        let mut pool: Vec<VarId> = xs[..i].to_vec();
        pool.shuffle(rng);
        pool.truncate(rng.random_range(0..=i.min(2)));
        pool.sort();
        b.conservative(xs[i], &pool, format!("U{}", i + 1)).unwrap();
    }
    b.build().unwrap()
}

/// Random counts over the endogenous configurations, some cells empty.
pub fn random_dataset(model: &Scm, rng: &mut ChaCha8Rng) -> Dataset {
    let endo = model.endogenous();
    let radix = MixedRadix::new(endo.iter().map(|x| model.card(*x)).collect());
    let mut d = Dataset::for_model(model);
    for row in radix.iter() {
        if rng.random_bool(0.8) {
            d.add(row, rng.random_range(1..50)).unwrap();
        }
    }
    if d.is_empty() {
        d.add(vec![0; endo.len()], 1).unwrap();
    }
    d
}

/// Every joint exogenous state with its probability, as full assignments
/// indexed by variable id.
pub fn exogenous_states(model: &Scm) -> Vec<(Vec<usize>, f64)> {
    let exo = model.exogenous();
    let radix = MixedRadix::new(exo.iter().map(|u| model.card(*u)).collect());
    radix
        .iter()
        .map(|states| {
            let mut a = vec![0; model.variables().len()];
            let mut p = 1.0;
            for (u, s) in exo.iter().zip(&states) {
                a[u.0] = *s;
                p *= model.pmf(*u).unwrap()[*s];
            }
            (a, p)
        })
        .collect()
}

/// Endogenous states under `u` with the variables in `fixed` held constant.
pub fn solve(model: &Scm, u: &[usize], fixed: &BTreeMap<VarId, usize>) -> Vec<usize> {
    let mut a = u.to_vec();
    for &v in model.topological_order() {
        if model.is_exogenous(v) {
            continue;
        }
        a[v.0] = match fixed.get(&v) {
            Some(s) => *s,
            None => model.apply(v, &a),
        };
    }
    a
}

/// `Σ_u P(u) f(u)` over the exogenous states.
pub fn expect(model: &Scm, f: impl Fn(&[usize]) -> bool) -> f64 {
    exogenous_states(model)
        .iter()
        .filter(|(a, _)| f(a))
        .map(|(_, p)| p)
        .sum()
}

pub fn id(model: &Scm, name: &str) -> VarId {
    model.id(name).unwrap()
}
