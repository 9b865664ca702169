//! CSV iterate logs.

use std::path::Path;

use vssqn::solvers::IterateRecord;

use crate::HarnessError;

pub const HEADER: [&str; 8] = [
    "k",
    "samples_cum",
    "grad_evals_cum",
    "fval",
    "gap",
    "grad_norm",
    "step_norm",
    "wall_ms",
];

pub const PARAMS_HEADER: [&str; 5] = ["k", "batch", "gamma", "mu", "eta"];

#[derive(Debug, Clone, PartialEq)]
pub struct CsvRow {
    pub k: u64,
    pub samples_cum: u64,
    pub grad_evals_cum: u64,
    pub fval: Option<f64>,
    pub gap: Option<f64>,
    pub grad_norm: Option<f64>,
    pub step_norm: f64,
    pub wall_ms: f64,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct CsvLog {
    pub rows: Vec<CsvRow>,
}

// Display for f64 is the shortest string that parses back to the same value.
fn num(v: f64) -> String {
    format!("{v}")
}

fn opt(v: Option<f64>) -> String {
    v.map(num).unwrap_or_default()
}

fn parse_opt(s: &str) -> Result<Option<f64>, HarnessError> {
    if s.is_empty() {
        Ok(None)
    } else {
        s.parse().map(Some).map_err(|_| HarnessError::Csv(format!("bad number `{s}`")))
    }
}

fn parse_num<T: std::str::FromStr>(s: &str) -> Result<T, HarnessError> {
    s.parse().map_err(|_| HarnessError::Csv(format!("bad number `{s}`")))
}

impl CsvLog {
    pub fn from_records(records: &[IterateRecord]) -> Self {
        Self {
            rows: records
                .iter()
                .map(|r| CsvRow {
                    k: r.k,
                    samples_cum: r.samples_cum,
                    grad_evals_cum: r.grad_evals_cum,
                    fval: r.fval,
                    gap: r.gap,
                    grad_norm: r.grad_norm,
                    step_norm: r.step_norm,
                    wall_ms: r.wall_ms,
                })
                .collect(),
        }
    }

    pub fn to_csv_string(&self) -> Result<String, HarnessError> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(HEADER).map_err(|e| HarnessError::Csv(e.to_string()))?;
        for r in &self.rows {
            w.write_record([
                r.k.to_string(),
                r.samples_cum.to_string(),
                r.grad_evals_cum.to_string(),
                opt(r.fval),
                opt(r.gap),
                opt(r.grad_norm),
                num(r.step_norm),
                format!("{:.3}", r.wall_ms),
            ])
            .map_err(|e| HarnessError::Csv(e.to_string()))?;
        }
        let bytes = w.into_inner().map_err(|e| HarnessError::Csv(e.to_string()))?;
        Ok(String::from_utf8(bytes).expect("ascii output"))
    }

    pub fn write(&self, path: &Path) -> Result<(), HarnessError> {
        std::fs::write(path, self.to_csv_string()?)?;
        Ok(())
    }

    pub fn parse(text: &str) -> Result<Self, HarnessError> {
        let mut rd = csv::Reader::from_reader(text.as_bytes());
        let header = rd.headers().map_err(|e| HarnessError::Csv(e.to_string()))?;
        if header.iter().ne(HEADER) {
            return Err(HarnessError::Csv(format!("unexpected header {:?}", header)));
        }
        let mut rows = Vec::new();
        for rec in rd.records() {
            let rec = rec.map_err(|e| HarnessError::Csv(e.to_string()))?;
            rows.push(CsvRow {
                k: parse_num(&rec[0])?,
                samples_cum: parse_num(&rec[1])?,
                grad_evals_cum: parse_num(&rec[2])?,
                fval: parse_opt(&rec[3])?,
                gap: parse_opt(&rec[4])?,
                grad_norm: parse_opt(&rec[5])?,
                step_norm: parse_num(&rec[6])?,
                wall_ms: parse_num(&rec[7])?,
            });
        }
        Ok(Self { rows })
    }

    pub fn read(path: &Path) -> Result<Self, HarnessError> {
        Self::parse(&std::fs::read_to_string(path)?)
    }
}

/// Per-iteration parameters `k,batch,gamma,mu,eta`.
pub fn params_csv(records: &[IterateRecord]) -> Result<String, HarnessError> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(PARAMS_HEADER).map_err(|e| HarnessError::Csv(e.to_string()))?;
    for r in records.iter().filter(|r| r.batch.is_some()) {
        w.write_record([
            r.k.to_string(),
            r.batch.map(|b| b.to_string()).unwrap_or_default(),
            opt(r.gamma),
            opt(r.mu),
            opt(r.eta),
        ])
        .map_err(|e| HarnessError::Csv(e.to_string()))?;
    }
    let bytes = w.into_inner().map_err(|e| HarnessError::Csv(e.to_string()))?;
    Ok(String::from_utf8(bytes).expect("ascii output"))
}
