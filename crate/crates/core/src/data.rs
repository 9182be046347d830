//! Complete endogenous observations stored as configuration counts.

use std::collections::BTreeMap;
use std::io::Read;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scm::{Scm, VarId};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Dataset {
    columns: Vec<String>,
    counts: BTreeMap<Vec<usize>, u64>,
    total: u64,
}

impl Dataset {
    pub fn new(columns: Vec<String>) -> Self {
        Dataset {
            columns,
            counts: BTreeMap::new(),
            total: 0,
        }
    }

    /// Dataset whose columns are the endogenous variables of `model`.
    pub fn for_model(model: &Scm) -> Self {
        Self::new(
            model
                .endogenous()
                .into_iter()
                .map(|v| model.name(v).to_string())
                .collect(),
        )
    }

    pub fn from_counts(
        columns: Vec<String>,
        counts: impl IntoIterator<Item = (Vec<usize>, u64)>,
    ) -> Result<Self> {
        let mut d = Self::new(columns);
        for (row, n) in counts {
            d.add(row, n)?;
        }
        Ok(d)
    }

    pub fn add(&mut self, row: Vec<usize>, count: u64) -> Result<()> {
        if row.len() != self.columns.len() {
            return Err(Error::Data(format!(
                "row has {} values for {} columns",
                row.len(),
                self.columns.len()
            )));
        }
        if count > 0 {
            *self.counts.entry(row).or_insert(0) += count;
            self.total += count;
        }
        Ok(())
    }

    pub fn columns(&self) -> &[String] {
        &self.columns
    }

    pub fn counts(&self) -> &BTreeMap<Vec<usize>, u64> {
        &self.counts
    }

    pub fn total(&self) -> u64 {
        self.total
    }

    pub fn is_empty(&self) -> bool {
        self.total == 0
    }

    pub fn count(&self, row: &[usize]) -> u64 {
        self.counts.get(row).copied().unwrap_or(0)
    }

    /// Column position of each model variable in `vars`.
    pub fn positions(&self, model: &Scm, vars: &[VarId]) -> Result<Vec<usize>> {
        vars.iter()
            .map(|v| {
                let name = model.name(*v);
                self.columns
                    .iter()
                    .position(|c| c == name)
                    .ok_or_else(|| Error::Data(format!("no column for variable `{name}`")))
            })
            .collect()
    }

    /// Counts of the marginal configurations over the given column positions.
    pub fn project(&self, positions: &[usize]) -> BTreeMap<Vec<usize>, u64> {
        let mut out = BTreeMap::new();
        for (row, n) in &self.counts {
            let key: Vec<usize> = positions.iter().map(|p| row[*p]).collect();
            *out.entry(key).or_insert(0) += n;
        }
        out
    }

    /// Checks the dataset against `model`: every endogenous variable has a
    /// column, every column is endogenous and every state is in range.
    pub fn check(&self, model: &Scm) -> Result<()> {
        if self.is_empty() {
            return Err(Error::Data("dataset is empty".into()));
        }
        let mut cards = Vec::with_capacity(self.columns.len());
        for c in &self.columns {
            let id = model
                .id(c)
                .map_err(|_| Error::Data(format!("column `{c}` is not a model variable")))?;
            if model.is_exogenous(id) {
                return Err(Error::Data(format!("column `{c}` is exogenous")));
            }
            cards.push(model.card(id));
        }
        self.positions(model, &model.endogenous())?;
        for row in self.counts.keys() {
            for (i, (s, c)) in row.iter().zip(&cards).enumerate() {
                if s >= c {
                    return Err(Error::Data(format!(
                        "state {s} out of range for column `{}`",
                        self.columns[i]
                    )));
                }
            }
        }
        Ok(())
    }

    /// Reads CSV with a header row naming endogenous variables. An optional
    /// `count` column aggregates identical rows. Values are state indices or,
    /// for variables with labels, label strings.
    pub fn read_csv<R: Read>(reader: R, model: &Scm) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
        let header: Vec<String> = rdr.headers()?.iter().map(str::to_string).collect();
        let count_col = header.iter().position(|h| h == "count");
        let mut columns = Vec::new();
        let mut vars = Vec::new();
        for (i, h) in header.iter().enumerate() {
            if Some(i) == count_col {
                continue;
            }
            let id = model
                .id(h)
                .map_err(|_| Error::Data(format!("column `{h}` is not a model variable")))?;
            columns.push(h.clone());
            vars.push((i, id));
        }
        let mut data = Dataset::new(columns);
        for (line, record) in rdr.records().enumerate() {
            let record = record?;
            let row = vars
                .iter()
                .map(|(i, id)| parse_state(model, *id, &record[*i]))
                .collect::<Result<Vec<usize>>>()
                .map_err(|e| Error::Data(format!("record {}: {e}", line + 1)))?;
            let count = match count_col {
                Some(c) => record[c]
                    .parse::<u64>()
                    .map_err(|_| Error::Data(format!("record {}: bad count", line + 1)))?,
                None => 1,
            };
            data.add(row, count)?;
        }
        data.check(model)?;
        Ok(data)
    }

    pub fn load_csv(path: impl AsRef<Path>, model: &Scm) -> Result<Self> {
        Self::read_csv(std::fs::File::open(path)?, model)
    }

    /// Writes the aggregated form, one row per distinct configuration.
    pub fn write_csv<W: std::io::Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        let mut header = self.columns.clone();
        header.push("count".into());
        w.write_record(&header)?;
        for (row, n) in &self.counts {
            let mut rec: Vec<String> = row.iter().map(usize::to_string).collect();
            rec.push(n.to_string());
            w.write_record(&rec)?;
        }
        w.flush()?;
        Ok(())
    }
}

fn parse_state(model: &Scm, id: VarId, text: &str) -> Result<usize> {
    let var = model.var(id);
    let state = match &var.labels {
        Some(labels) => labels.iter().position(|l| l == text).or_else(|| text.parse().ok()),
        None => text.parse().ok(),
    };
    match state {
        Some(s) if s < var.cardinality => Ok(s),
        _ => Err(Error::Data(format!("invalid state `{text}` for `{}`", var.name))),
    }
}
