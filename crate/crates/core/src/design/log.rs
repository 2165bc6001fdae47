use std::io::{Read, Write};
use std::path::Path;

use crate::design::{Config, FactorSpace};
use crate::error::{Error, Result};

/// One observed run: configuration, response, nonnegative weight and seed tag.
#[derive(Debug, Clone, PartialEq)]
pub struct Record {
    pub config: Config,
    pub response: f64,
    pub weight: f64,
    pub seed: i64,
}

impl Record {
    pub fn new(config: Config, response: f64) -> Self {
        Self {
            config,
            response,
            weight: 1.0,
            seed: 0,
        }
    }

    pub fn with_weight(mut self, weight: f64) -> Self {
        self.weight = weight;
        self
    }

    pub fn with_seed(mut self, seed: i64) -> Self {
        self.seed = seed;
        self
    }
}

/// Weighted observations bound to a factor space.
#[derive(Debug, Clone, PartialEq)]
pub struct RunLog {
    dim: usize,
    records: Vec<Record>,
}

impl RunLog {
    pub fn new(space: &FactorSpace, records: Vec<Record>) -> Result<Self> {
        for r in &records {
            space.check(&r.config)?;
            if !(r.weight >= 0.0) || !r.weight.is_finite() {
                return Err(Error::InvalidParameter(format!(
                    "weight {} is not a nonnegative number",
                    r.weight
                )));
            }
            if !r.response.is_finite() {
                return Err(Error::InvalidParameter(format!(
                    "response {} is not finite",
                    r.response
                )));
            }
        }
        if records.is_empty() {
            return Err(Error::EmptyLog);
        }
        if !records.iter().any(|r| r.weight > 0.0) {
            return Err(Error::ZeroWeight);
        }
        Ok(Self {
            dim: space.dim(),
            records,
        })
    }

    /// Unit-weight log from parallel configuration and response sequences.
    pub fn from_pairs(space: &FactorSpace, configs: &[Config], responses: &[f64]) -> Result<Self> {
        if configs.len() != responses.len() {
            return Err(Error::LengthMismatch(configs.len(), responses.len()));
        }
        Self::new(
            space,
            configs
                .iter()
                .zip(responses)
                .map(|(c, &f)| Record::new(c.clone(), f))
                .collect(),
        )
    }

    pub fn records(&self) -> &[Record] {
        &self.records
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn total_weight(&self) -> f64 {
        self.records.iter().map(|r| r.weight).sum()
    }

    /// α_i = w_i / Σ w.
    pub fn normalized_weights(&self) -> Vec<f64> {
        let total = self.total_weight();
        self.records.iter().map(|r| r.weight / total).collect()
    }

    pub fn max_abs_response(&self) -> f64 {
        self.records
            .iter()
            .fold(0.0, |m, r| m.max(r.response.abs()))
    }

    /// Reads the run-log CSV schema: one column per factor, `response`, and
    /// optional `weight` and `seed`. Lines starting with `#` are ignored.
    pub fn read_csv<R: Read>(space: &FactorSpace, reader: R) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new()
            .comment(Some(b'#'))
            .trim(csv::Trim::All)
            .from_reader(reader);
        let headers = rdr.headers()?.clone();
        let mut factor_cols = vec![None; space.dim()];
        let (mut response_col, mut weight_col, mut seed_col) = (None, None, None);
        for (c, h) in headers.iter().enumerate() {
            match h {
                "response" => response_col = Some(c),
                "weight" => weight_col = Some(c),
                "seed" => seed_col = Some(c),
                name => match space.factor_index(name) {
                    Some(j) => factor_cols[j] = Some(c),
                    None => return Err(Error::UnknownColumn(name.to_string())),
                },
            }
        }
        let response_col = response_col.ok_or_else(|| Error::MissingColumn("response".into()))?;
        let factor_cols = factor_cols
            .into_iter()
            .enumerate()
            .map(|(j, c)| c.ok_or_else(|| Error::MissingColumn(space.name(j).to_string())))
            .collect::<Result<Vec<_>>>()?;

        let mut records = Vec::new();
        for row in rdr.records() {
            let row = row?;
            let line = row.position().map(|p| p.line() as usize).unwrap_or(0);
            let field = |c: usize| row.get(c).unwrap_or("");
            let mut levels = Vec::with_capacity(space.dim());
            for (j, &c) in factor_cols.iter().enumerate() {
                let label = field(c);
                let l = space
                    .level_index(j, label)
                    .ok_or_else(|| Error::UnknownLevel {
                        row: line,
                        column: space.name(j).to_string(),
                        level: label.to_string(),
                    })?;
                levels.push(l);
            }
            let response: f64 = field(response_col).parse().map_err(|_| Error::Ingest {
                row: line,
                message: format!("non-numeric response `{}`", field(response_col)),
            })?;
            let weight = match weight_col {
                Some(c) if !field(c).is_empty() => field(c).parse().map_err(|_| Error::Ingest {
                    row: line,
                    message: format!("non-numeric weight `{}`", field(c)),
                })?,
                _ => 1.0,
            };
            let seed = match seed_col {
                Some(c) if !field(c).is_empty() => field(c).parse().map_err(|_| Error::Ingest {
                    row: line,
                    message: format!("non-integer seed `{}`", field(c)),
                })?,
                _ => 0,
            };
            records.push(Record {
                config: Config(levels),
                response,
                weight,
                seed,
            });
        }
        Self::new(space, records)
    }

    pub fn read_csv_path(space: &FactorSpace, path: impl AsRef<Path>) -> Result<Self> {
        Self::read_csv(space, std::fs::File::open(path)?)
    }

    /// Writes the run-log CSV schema; floats use the shortest round-trip form.
    pub fn write_csv<W: Write>(&self, space: &FactorSpace, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        let mut header: Vec<&str> = space.factors().iter().map(|f| f.name.as_str()).collect();
        header.extend(["response", "weight", "seed"]);
        w.write_record(&header)?;
        for r in &self.records {
            let mut row: Vec<String> = r
                .config
                .iter()
                .enumerate()
                .map(|(j, &l)| space.label(j, l).to_string())
                .collect();
            row.push(format!("{:?}", r.response));
            row.push(format!("{:?}", r.weight));
            row.push(r.seed.to_string());
            w.write_record(&row)?;
        }
        w.flush()?;
        Ok(())
    }
}
