//! Constructive compatible quantification of conservative Markovian models.

use crate::error::{Error, Result};
use crate::graph::{c_components, markovianity_class, Markovianity};
use crate::likelihood::EmpiricalTables;
use crate::scm::{conservative_index, conservative_table, MixedRadix, Pmf, Scm, VarId};

/// Exogenous PMFs reproducing the empirical conditionals exactly.
///
/// For each endogenous variable, the cumulative vectors of its conditionals
/// split `[0, 1]` into a least common partition; each cell picks one child
/// state per parent configuration, that is one conservative function, and
/// receives the cell's width. Unobserved parent configurations use uniform
/// conditionals.
pub fn compatible_quantification(model: &Scm, tables: &EmpiricalTables) -> Result<Vec<(VarId, Pmf)>> {
    let comps = c_components(model);
    if markovianity_class(&comps) != Markovianity::Markovian {
        return Err(Error::Unsupported("compatible quantification needs a Markovian model".into()));
    }
    let mut out = Vec::new();
    for comp in &comps.components {
        let [u] = comp.exogenous[..] else {
            return Err(Error::Unsupported("component without an exogenous variable".into()));
        };
        let x = comp.endogenous[0];
        let eq = model.equation(x).expect("endogenous");
        let (&last, endo) = eq.parents.split_last().expect("has exogenous parent");
        let endo_cards: Vec<usize> = endo.iter().map(|p| model.card(*p)).collect();
        let card = model.card(x);
        let expected = conservative_table(card, &endo_cards)?;
        if last != u || model.card(u) != expected.exo_cardinality || eq.table != expected.table {
            return Err(Error::Unsupported(format!(
                "equation of `{}` is not conservative",
                model.name(x)
            )));
        }
        let family = tables
            .family(x)
            .ok_or_else(|| Error::Model("tables were built for a different model".into()))?;
        let ctx_at: Vec<usize> = family
            .context
            .iter()
            .map(|v| endo.iter().position(|p| p == v).expect("context is the parent set"))
            .collect();
        let configs = MixedRadix::new(endo_cards);
        let cumulative: Vec<Vec<f64>> = configs
            .iter()
            .map(|cfg| {
                let ctx: Vec<usize> = ctx_at.iter().map(|i| cfg[*i]).collect();
                let p = family.conditional(&ctx).unwrap_or_else(|| vec![1.0 / card as f64; card]);
                let mut h = vec![0.0];
                let mut acc = 0.0;
                for v in &p[..card - 1] {
                    acc += v;
                    h.push(acc);
                }
                h.push(1.0);
                h
            })
            .collect();
        let mut points: Vec<f64> = cumulative.iter().flatten().copied().collect();
        points.sort_by(f64::total_cmp);
        points.dedup();
        let mut pmf = vec![0.0; expected.exo_cardinality];
        for w in points.windows(2) {
            let width = w[1] - w[0];
            if width <= 0.0 {
                continue;
            }
            let mid = 0.5 * (w[0] + w[1]);
            let states: Vec<usize> = cumulative
                .iter()
                .map(|h| (0..card).find(|s| h[s + 1] > mid).unwrap_or(card - 1))
                .collect();
            pmf[conservative_index(&states, card)] += width;
        }
        out.push((u, Pmf::from_weights(pmf)?));
    }
    Ok(out)
}
