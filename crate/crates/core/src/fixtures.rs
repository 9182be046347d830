//! Small reference models and data.
//!
//! The gender/treatment/recovery study: `Z` (female), `X` (treated) and `Y`
//! (recovered), all binary, 700 records. The reference model has
//! `Z <- W`, `X <- {Z, U}` and `Y <- {X, Z, V}`, every equation conservative.

use std::collections::BTreeMap;

use crate::data::Dataset;
use crate::error::Result;
use crate::scm::{restrict_model, Pmf, Scm, ScmBuilder};

/// Counts of the study, rows `(Z, X, Y)`.
pub const STUDY_COUNTS: [([usize; 3], u64); 8] = [
    ([0, 0, 0], 2),
    ([0, 0, 1], 114),
    ([0, 1, 0], 41),
    ([0, 1, 1], 313),
    ([1, 0, 0], 107),
    ([1, 0, 1], 13),
    ([1, 1, 0], 109),
    ([1, 1, 1], 1),
];

pub fn study_data() -> Dataset {
    Dataset::from_counts(
        vec!["Z".into(), "X".into(), "Y".into()],
        STUDY_COUNTS.iter().map(|(r, n)| (r.to_vec(), *n)),
    )
    .expect("three columns")
}

/// Conservative model of the study, no PMFs. `U` states: const 0, not Z, Z,
/// const 1.
pub fn study_model() -> Scm {
    let mut b = ScmBuilder::new();
    let z = b.endogenous("Z", 2);
    let x = b.endogenous("X", 2);
    let y = b.endogenous("Y", 2);
    b.conservative(z, &[], "W").expect("small");
    b.conservative(x, &[z], "U").expect("small");
    b.conservative(y, &[x, z], "V").expect("small");
    b.build().expect("valid")
}

/// Study model without the `U` state making `X` constantly 1.
pub fn study_model_without_always_treat() -> Scm {
    let m = study_model();
    let u = m.id("U").expect("U");
    restrict_model(&m, &BTreeMap::from([(u, vec![0, 1, 2])])).expect("surjective")
}

/// Fully specified submodel of the study model: `U` in {const 0, not Z, Z} and
/// `V` in {not X and Z, not X or not Z, X or not Z}.
pub fn study_submodel() -> Result<Scm> {
    let m = study_model();
    let (u, v, w) = (m.id("U")?, m.id("V")?, m.id("W")?);
    let r = restrict_model(&m, &BTreeMap::from([(u, vec![0, 1, 2]), (v, vec![2, 7, 13])]))?;
    r.with_pmfs([
        (u, Pmf::new(vec![0.0, 0.677, 0.323])?),
        (v, Pmf::new(vec![0.091, 0.439, 0.47])?),
        (w, Pmf::new(vec![470.0 / 700.0, 230.0 / 700.0])?),
    ])
}
