use std::io::{Read, Write};

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum TraceError {
    #[error("trace is empty")]
    Empty,
    #[error("row {row}: {message}")]
    Row { row: usize, message: String },
    #[error("times must be strictly increasing (row {0})")]
    NotIncreasing(usize),
    #[error("trace file: {0}")]
    Format(String),
}

/// A sampled simulation trace: continuous signals plus one discrete column.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimTrace {
    signal_names: Vec<String>,
    discrete_name: String,
    times: Vec<f64>,
    states: Vec<Vec<f64>>,
    discrete: Vec<String>,
}

impl SimTrace {
    pub fn new(signal_names: Vec<String>, discrete_name: impl Into<String>) -> Self {
        Self {
            signal_names,
            discrete_name: discrete_name.into(),
            times: Vec::new(),
            states: Vec::new(),
            discrete: Vec::new(),
        }
    }

    pub fn push(&mut self, time: f64, state: Vec<f64>, token: impl Into<String>) -> Result<(), TraceError> {
        let row = self.times.len();
        if state.len() != self.signal_names.len() {
            return Err(TraceError::Row {
                row,
                message: format!("expected {} signals, got {}", self.signal_names.len(), state.len()),
            });
        }
        if !time.is_finite() || state.iter().any(|v| !v.is_finite()) {
            return Err(TraceError::Row {
                row,
                message: "non-finite value".into(),
            });
        }
        if self.times.last().is_some_and(|&t| time <= t) {
            return Err(TraceError::NotIncreasing(row));
        }
        self.times.push(time);
        self.states.push(state);
        self.discrete.push(token.into());
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn end_time(&self) -> Option<f64> {
        self.times.last().copied()
    }

    pub fn signal_names(&self) -> &[String] {
        &self.signal_names
    }

    pub fn discrete_name(&self) -> &str {
        &self.discrete_name
    }

    pub fn signal_index(&self, name: &str) -> Option<usize> {
        self.signal_names.iter().position(|s| s == name)
    }

    pub fn state(&self, k: usize) -> &[f64] {
        &self.states[k]
    }

    /// The values of one signal over time.
    pub fn signal(&self, index: usize) -> impl ExactSizeIterator<Item = f64> + '_ {
        self.states.iter().map(move |s| s[index])
    }

    pub fn discrete(&self) -> &[String] {
        &self.discrete
    }

    /// Keep only the samples with time `<= t_end`.
    pub fn truncated(&self, t_end: f64) -> SimTrace {
        let keep = self.times.partition_point(|&t| t <= t_end);
        SimTrace {
            signal_names: self.signal_names.clone(),
            discrete_name: self.discrete_name.clone(),
            times: self.times[..keep].to_vec(),
            states: self.states[..keep].to_vec(),
            discrete: self.discrete[..keep].to_vec(),
        }
    }

    /// CSV with header `time,<signals...>,@<discrete>`.
    pub fn write_csv<W: Write>(&self, w: W) -> Result<(), TraceError> {
        let fmt = |e: csv::Error| TraceError::Format(e.to_string());
        let mut out = csv::Writer::from_writer(w);
        let mut header = vec!["time".to_string()];
        header.extend(self.signal_names.iter().cloned());
        header.push(format!("@{}", self.discrete_name));
        out.write_record(&header).map_err(fmt)?;
        for k in 0..self.len() {
            let mut rec = vec![format!("{:?}", self.times[k])];
            rec.extend(self.states[k].iter().map(|v| format!("{v:?}")));
            rec.push(self.discrete[k].clone());
            out.write_record(&rec).map_err(fmt)?;
        }
        out.flush().map_err(|e| TraceError::Format(e.to_string()))
    }

    pub fn read_csv<R: Read>(r: R) -> Result<Self, TraceError> {
        let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(r);
        let header = rdr.headers().map_err(|e| TraceError::Format(e.to_string()))?.clone();
        let cols: Vec<&str> = header.iter().collect();
        if cols.first() != Some(&"time") {
            return Err(TraceError::Format("first column must be `time`".into()));
        }
        let discrete: Vec<usize> = (0..cols.len()).filter(|&i| cols[i].starts_with('@')).collect();
        let &[dcol] = discrete.as_slice() else {
            return Err(TraceError::Format("exactly one `@name` discrete column is required".into()));
        };
        let signals: Vec<usize> = (1..cols.len()).filter(|&i| i != dcol).collect();
        let mut trace = SimTrace::new(
            signals.iter().map(|&i| cols[i].to_string()).collect(),
            &cols[dcol][1..],
        );
        for (row, rec) in rdr.records().enumerate() {
            let rec = rec.map_err(|e| TraceError::Row {
                row,
                message: e.to_string(),
            })?;
            let num = |i: usize| -> Result<f64, TraceError> {
                rec[i].parse::<f64>().map_err(|e| TraceError::Row {
                    row,
                    message: format!("column {}: {e}", cols[i]),
                })
            };
            let time = num(0)?;
            let state = signals.iter().map(|&i| num(i)).collect::<Result<Vec<_>, _>>()?;
            trace.push(time, state, &rec[dcol])?;
        }
        if trace.is_empty() {
            return Err(TraceError::Empty);
        }
        Ok(trace)
    }
}
