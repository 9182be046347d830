//! Counterfactual and interventional queries on fully specified models.
//!
//! Query strings:
//!
//! ```text
//! pns(X, Y)                 P(Y_{X=1}=1, Y_{X=0}=0)
//! pns(X=a/b, Y=c/d)         P(Y_{X=a}=c, Y_{X=b}=d)
//! pn(X=1, Y=1)              P(Y_{X=0}=0 | X=1, Y=1)
//! ps(X=1, Y=1)              P(Y_{X=1}=1 | X=0, Y=0)
//! effect(do X=1; Y=1)       P(Y_{X=1}=1)
//! cond(Y=1 | X=1, Z=0)      P(Y=1 | X=1, Z=0)
//! ```
//!
//! `pns`, `pn`, `ps` and `effect` accept trailing factual evidence after `|`,
//! e.g. `pns(X, Y | Z=0)`. A bare variable means states 1/0; `X=a` alone means
//! `a` against `1 - a` for binary variables and against 0 (or 1) otherwise.
//! States are indices or, when the model defines labels, label strings.

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::factor::{query, Outcome};
use crate::graph::{surgery, twin_graph, world_name, World};
use crate::scm::{Scm, VarId};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum QueryKind {
    Pns,
    Pn,
    Ps,
    CausalEffect,
    Conditional,
}

/// A variable with a distinguished "true" state and a contrasting one.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Target {
    pub var: String,
    pub on: usize,
    pub off: usize,
}

impl Target {
    pub fn new(var: impl Into<String>, on: usize, off: usize) -> Self {
        Target {
            var: var.into(),
            on,
            off,
        }
    }

    pub fn binary(var: impl Into<String>) -> Self {
        Target::new(var, 1, 0)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct QueryDescriptor {
    pub kind: QueryKind,
    pub cause: Target,
    pub effect: Target,
    #[serde(default)]
    pub evidence: BTreeMap<String, usize>,
}

impl QueryDescriptor {
    pub fn pns(cause: Target, effect: Target) -> Self {
        Self::of(QueryKind::Pns, cause, effect)
    }

    pub fn pn(cause: Target, effect: Target) -> Self {
        Self::of(QueryKind::Pn, cause, effect)
    }

    pub fn ps(cause: Target, effect: Target) -> Self {
        Self::of(QueryKind::Ps, cause, effect)
    }

    pub fn effect(cause: Target, effect: Target) -> Self {
        Self::of(QueryKind::CausalEffect, cause, effect)
    }

    pub fn conditional(cause: Target, effect: Target) -> Self {
        Self::of(QueryKind::Conditional, cause, effect)
    }

    fn of(kind: QueryKind, cause: Target, effect: Target) -> Self {
        QueryDescriptor {
            kind,
            cause,
            effect,
            evidence: BTreeMap::new(),
        }
    }

    pub fn with_evidence(mut self, var: impl Into<String>, state: usize) -> Self {
        self.evidence.insert(var.into(), state);
        self
    }

    /// Checks the descriptor against a model and maps names to ids.
    pub fn resolve(&self, model: &Scm) -> Result<Resolved> {
        let endo = |name: &str| -> Result<VarId> {
            let id = model.id(name)?;
            if model.is_exogenous(id) {
                return Err(Error::Query(format!("`{name}` is exogenous")));
            }
            Ok(id)
        };
        let state = |id: VarId, s: usize| -> Result<usize> {
            if s < model.card(id) {
                Ok(s)
            } else {
                Err(Error::Query(format!(
                    "state {s} outside the domain of `{}`",
                    model.name(id)
                )))
            }
        };
        let x = endo(&self.cause.var)?;
        let y = endo(&self.effect.var)?;
        if x == y {
            return Err(Error::Query("cause and effect must differ".into()));
        }
        let mut evidence = BTreeMap::new();
        for (name, s) in &self.evidence {
            let id = endo(name)?;
            if self.kind != QueryKind::Pns && (id == x || id == y) {
                return Err(Error::Query(format!(
                    "`{name}` is already fixed by the query and cannot be evidence"
                )));
            }
            evidence.insert(id, state(id, *s)?);
        }
        Ok(Resolved {
            x,
            x_on: state(x, self.cause.on)?,
            x_off: state(x, self.cause.off)?,
            y,
            y_on: state(y, self.effect.on)?,
            y_off: state(y, self.effect.off)?,
            evidence,
        })
    }
}

/// A descriptor bound to variable ids of one model.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Resolved {
    pub x: VarId,
    pub x_on: usize,
    pub x_off: usize,
    pub y: VarId,
    pub y_on: usize,
    pub y_off: usize,
    pub evidence: BTreeMap<VarId, usize>,
}

/// Single-world surgery: intervened variables become constants and lose
/// their parents; exogenous variables left without children are dropped.
pub fn intervene(model: &Scm, intervention: &BTreeMap<VarId, usize>) -> Result<Scm> {
    surgery(model, intervention)
}

fn copy(twin: &Scm, model: &Scm, v: VarId, world: usize) -> VarId {
    twin.id(&world_name(model.name(v), world))
        .expect("every endogenous variable has a copy in every world")
}

fn world_evidence(
    twin: &Scm,
    model: &Scm,
    world: usize,
    evidence: &BTreeMap<VarId, usize>,
) -> BTreeMap<VarId, usize> {
    evidence
        .iter()
        .map(|(v, s)| (copy(twin, model, *v, world), *s))
        .collect()
}

/// `P(targets = states | evidence)` on an arbitrary model.
fn probability(
    model: &Scm,
    targets: &[(VarId, usize)],
    evidence: &BTreeMap<VarId, usize>,
) -> Result<Outcome<f64>> {
    let vars: Vec<VarId> = targets.iter().map(|t| t.0).collect();
    let states: Vec<usize> = targets.iter().map(|t| t.1).collect();
    Ok(query(model, &vars, evidence)?.map(|f| f.value(&states)))
}

fn pns_resolved(model: &Scm, r: &Resolved) -> Result<Outcome<f64>> {
    let mut worlds = vec![
        World::with_do([(r.x, r.x_on)]),
        World::with_do([(r.x, r.x_off)]),
    ];
    if !r.evidence.is_empty() {
        worlds.push(World::observational());
    }
    let twin = twin_graph(model, &worlds)?;
    let ev = world_evidence(&twin, model, 2, &r.evidence);
    probability(
        &twin,
        &[
            (copy(&twin, model, r.y, 0), r.y_on),
            (copy(&twin, model, r.y, 1), r.y_off),
        ],
        &ev,
    )
}

/// Factual world 0 carries `x = fact_x, y = fact_y` plus the extra evidence;
/// world 1 is intervened with `do(x = cf_x)`.
fn two_world(
    model: &Scm,
    r: &Resolved,
    fact: (usize, usize),
    cf_x: usize,
    cf_y: usize,
) -> Result<Outcome<f64>> {
    let twin = twin_graph(
        model,
        &[World::observational(), World::with_do([(r.x, cf_x)])],
    )?;
    let mut ev = world_evidence(&twin, model, 0, &r.evidence);
    ev.insert(copy(&twin, model, r.x, 0), fact.0);
    ev.insert(copy(&twin, model, r.y, 0), fact.1);
    probability(&twin, &[(copy(&twin, model, r.y, 1), cf_y)], &ev)
}

fn effect_resolved(model: &Scm, r: &Resolved) -> Result<Outcome<f64>> {
    if r.evidence.is_empty() {
        let m = intervene(model, &BTreeMap::from([(r.x, r.x_on)]))?;
        let y = m.id(model.name(r.y))?;
        return probability(&m, &[(y, r.y_on)], &BTreeMap::new());
    }
    let twin = twin_graph(
        model,
        &[World::with_do([(r.x, r.x_on)]), World::observational()],
    )?;
    let ev = world_evidence(&twin, model, 1, &r.evidence);
    probability(&twin, &[(copy(&twin, model, r.y, 0), r.y_on)], &ev)
}

/// `P(Y_{X=on} = on, Y_{X=off} = off)` over a two-world counterfactual graph.
pub fn pns(model: &Scm, cause: &Target, effect: &Target) -> Result<f64> {
    let q = QueryDescriptor::pns(cause.clone(), effect.clone());
    pns_resolved(model, &q.resolve(model)?)?
        .value()
        .ok_or_else(|| Error::Query("unreachable: PNS has no evidence".into()))
}

/// `P(Y_{X=off} = off | X = on, Y = on, evidence)`.
pub fn pn(model: &Scm, cause: &Target, effect: &Target) -> Result<Outcome<f64>> {
    evaluate(model, &QueryDescriptor::pn(cause.clone(), effect.clone()))
}

/// `P(Y_{X=on} = on | X = off, Y = off, evidence)`.
pub fn ps(model: &Scm, cause: &Target, effect: &Target) -> Result<Outcome<f64>> {
    evaluate(model, &QueryDescriptor::ps(cause.clone(), effect.clone()))
}

pub fn evaluate(model: &Scm, q: &QueryDescriptor) -> Result<Outcome<f64>> {
    let r = q.resolve(model)?;
    match q.kind {
        QueryKind::Pns => pns_resolved(model, &r),
        QueryKind::Pn => two_world(model, &r, (r.x_on, r.y_on), r.x_off, r.y_off),
        QueryKind::Ps => two_world(model, &r, (r.x_off, r.y_off), r.x_on, r.y_on),
        QueryKind::CausalEffect => effect_resolved(model, &r),
        QueryKind::Conditional => {
            let mut ev = r.evidence.clone();
            ev.insert(r.x, r.x_on);
            probability(model, &[(r.y, r.y_on)], &ev)
        }
    }
}

impl fmt::Display for QueryDescriptor {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let t = |t: &Target| format!("{}={}/{}", t.var, t.on, t.off);
        let ev = |sep: &str| -> String {
            if self.evidence.is_empty() {
                String::new()
            } else {
                let parts: Vec<String> =
                    self.evidence.iter().map(|(k, v)| format!("{k}={v}")).collect();
                format!("{sep}{}", parts.join(", "))
            }
        };
        match self.kind {
            QueryKind::Pns | QueryKind::Pn | QueryKind::Ps => {
                let name = match self.kind {
                    QueryKind::Pns => "pns",
                    QueryKind::Pn => "pn",
                    _ => "ps",
                };
                write!(f, "{name}({}, {}{})", t(&self.cause), t(&self.effect), ev(" | "))
            }
            QueryKind::CausalEffect => write!(
                f,
                "effect(do {}={}; {}{})",
                self.cause.var,
                self.cause.on,
                t(&self.effect),
                ev(" | ")
            ),
            QueryKind::Conditional => write!(
                f,
                "cond({} | {}={}{})",
                t(&self.effect),
                self.cause.var,
                self.cause.on,
                ev(", ")
            ),
        }
    }
}

fn parse_state(token: &str, var: &str, model: Option<&Scm>) -> Result<usize> {
    if let Ok(s) = token.parse::<usize>() {
        return Ok(s);
    }
    let labels = model
        .and_then(|m| m.id(var).ok().map(|id| m.var(id)))
        .and_then(|v| v.labels.as_ref());
    labels
        .and_then(|l| l.iter().position(|x| x == token))
        .ok_or_else(|| Error::Query(format!("unknown state `{token}` for `{var}`")))
}

fn card_of(var: &str, model: Option<&Scm>) -> Option<usize> {
    model.and_then(|m| m.id(var).ok().map(|id| m.card(id)))
}

fn check_name(name: &str) -> Result<&str> {
    if name.is_empty() || name.contains(|c: char| c.is_whitespace() || "=/|;,()".contains(c)) {
        Err(Error::Query(format!("invalid variable name `{name}`")))
    } else {
        Ok(name)
    }
}

fn parse_target(text: &str, model: Option<&Scm>) -> Result<Target> {
    let text = text.trim();
    let Some((name, states)) = text.split_once('=') else {
        return Ok(Target::binary(check_name(text)?));
    };
    let name = check_name(name.trim())?;
    match states.split_once('/') {
        Some((on, off)) => Ok(Target::new(
            name,
            parse_state(on.trim(), name, model)?,
            parse_state(off.trim(), name, model)?,
        )),
        None => {
            let on = parse_state(states.trim(), name, model)?;
            let off = match (card_of(name, model), on) {
                (Some(2) | None, 0) => 1,
                (Some(2) | None, 1) => 0,
                (_, 0) => 1,
                _ => 0,
            };
            Ok(Target::new(name, on, off))
        }
    }
}

fn parse_assignment(text: &str, model: Option<&Scm>) -> Result<(String, usize)> {
    let (name, state) = text
        .split_once('=')
        .ok_or_else(|| Error::Query(format!("expected VAR=STATE, got `{}`", text.trim())))?;
    let name = check_name(name.trim())?;
    Ok((name.to_string(), parse_state(state.trim(), name, model)?))
}

fn parse_assignments(text: &str, model: Option<&Scm>) -> Result<Vec<(String, usize)>> {
    let mut out: Vec<(String, usize)> = Vec::new();
    for part in text.split(',') {
        let (k, v) = parse_assignment(part, model)?;
        if out.iter().any(|(n, _)| *n == k) {
            return Err(Error::Query(format!("`{k}` assigned twice")));
        }
        out.push((k, v));
    }
    Ok(out)
}

/// Parses a query string; `model` resolves state labels and the default
/// contrasting state of non-binary variables.
pub fn parse_query(text: &str, model: Option<&Scm>) -> Result<QueryDescriptor> {
    let text = text.trim();
    let open = text
        .find('(')
        .ok_or_else(|| Error::Query(format!("expected KIND(...), got `{text}`")))?;
    if !text.ends_with(')') {
        return Err(Error::Query("query must end with `)`".into()));
    }
    let kind = text[..open].trim().to_ascii_lowercase();
    let body = &text[open + 1..text.len() - 1];
    let (main, evidence) = match body.split_once('|') {
        Some((m, e)) => (m, Some(e)),
        None => (body, None),
    };
    let mut q = match kind.as_str() {
        "pns" | "pn" | "ps" => {
            let args: Vec<&str> = main.split(',').collect();
            if args.len() != 2 {
                return Err(Error::Query(format!("`{kind}` takes a cause and an effect")));
            }
            let cause = parse_target(args[0], model)?;
            let effect = parse_target(args[1], model)?;
            match kind.as_str() {
                "pns" => QueryDescriptor::pns(cause, effect),
                "pn" => QueryDescriptor::pn(cause, effect),
                _ => QueryDescriptor::ps(cause, effect),
            }
        }
        "effect" => {
            let (intervention, target) = main
                .split_once(';')
                .ok_or_else(|| Error::Query("expected `effect(do X=x; Y)`".into()))?;
            let intervention = intervention
                .trim()
                .strip_prefix("do")
                .filter(|s| s.starts_with(char::is_whitespace))
                .ok_or_else(|| Error::Query("intervention must start with `do`".into()))?;
            let (x, state) = parse_assignment(intervention, model)?;
            let cause = Target::new(x, state, state);
            QueryDescriptor::effect(cause, parse_target(target, model)?)
        }
        "cond" => {
            let effect = parse_target(main, model)?;
            let mut given = parse_assignments(
                evidence.ok_or_else(|| Error::Query("`cond` needs `| X=x`".into()))?,
                model,
            )?;
            let (first, state) = given.remove(0);
            let mut q = QueryDescriptor::conditional(Target::new(first, state, state), effect);
            q.evidence = given.into_iter().collect();
            return Ok(q);
        }
        _ => return Err(Error::Query(format!("unknown query kind `{kind}`"))),
    };
    if let Some(e) = evidence {
        q.evidence = parse_assignments(e, model)?.into_iter().collect();
    }
    Ok(q)
}

impl std::str::FromStr for QueryDescriptor {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        parse_query(s, None)
    }
}
