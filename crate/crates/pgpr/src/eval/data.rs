//! CSV datasets. Training files have columns `x1..xd,y`; test files may
//! omit `y`.

use std::io::{Read, Write};
use std::path::Path;

use pgpr_core::{Dataset, InputPoint};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::EvalError;

/// Rows of a CSV file: inputs and, when the file has a `y` column, outputs.
#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub inputs: Vec<Vec<f64>>,
    pub outputs: Option<Vec<f64>>,
}

impl Table {
    pub fn len(&self) -> usize {
        self.inputs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.inputs.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.inputs.first().map_or(0, Vec::len)
    }

    /// Input points with ids `first_id, first_id+1, ...` in row order.
    pub fn points(&self, first_id: u64) -> Vec<InputPoint> {
        self.inputs
            .iter()
            .enumerate()
            .map(|(i, x)| InputPoint::new(first_id + i as u64, x.clone()))
            .collect()
    }

    pub fn dataset(&self, first_id: u64, prior_mean: f64) -> Result<Dataset, EvalError> {
        let y = self
            .outputs
            .clone()
            .ok_or_else(|| EvalError::Data("training data needs a y column".into()))?;
        Ok(Dataset::new(self.points(first_id), y, prior_mean)?)
    }
}

pub fn read_table(r: impl Read) -> Result<Table, EvalError> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(r);
    let header = rdr.headers()?.clone();
    let names: Vec<&str> = header.iter().collect();
    let has_y = names.last() == Some(&"y");
    let d = names.len() - usize::from(has_y);
    if d == 0 {
        return Err(EvalError::Data("no input columns".into()));
    }
    for (i, name) in names[..d].iter().enumerate() {
        if *name != format!("x{}", i + 1) {
            return Err(EvalError::Data(format!("column {} should be x{}, found {name:?}", i + 1, i + 1)));
        }
    }
    let mut inputs = Vec::new();
    let mut outputs = has_y.then(Vec::new);
    for (row, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let vals = rec
            .iter()
            .map(|f| f.parse::<f64>())
            .collect::<Result<Vec<_>, _>>()
            .map_err(|e| EvalError::Data(format!("row {}: {e}", row + 1)))?;
        if vals.iter().any(|v| !v.is_finite()) {
            return Err(EvalError::Data(format!("row {}: non-finite value", row + 1)));
        }
        inputs.push(vals[..d].to_vec());
        if let Some(out) = outputs.as_mut() {
            out.push(vals[d]);
        }
    }
    Ok(Table { inputs, outputs })
}

pub fn load_table(path: &Path) -> Result<Table, EvalError> {
    let f = std::fs::File::open(path).map_err(|e| EvalError::Data(format!("{}: {e}", path.display())))?;
    read_table(f)
}

pub fn write_table(w: impl Write, table: &Table) -> Result<(), EvalError> {
    let mut wtr = csv::Writer::from_writer(w);
    let d = table.dim();
    let mut header: Vec<String> = (1..=d).map(|i| format!("x{i}")).collect();
    if table.outputs.is_some() {
        header.push("y".into());
    }
    wtr.write_record(&header)?;
    for (i, x) in table.inputs.iter().enumerate() {
        let mut row: Vec<String> = x.iter().map(f64::to_string).collect();
        if let Some(y) = &table.outputs {
            row.push(y[i].to_string());
        }
        wtr.write_record(&row)?;
    }
    wtr.flush()?;
    Ok(())
}

/// Seeded uniform split holding out `max(1, round(n/10))` rows as test data.
/// Both parts keep the original row order.
pub fn split_test(table: &Table, seed: u64) -> Result<(Table, Table), EvalError> {
    let n = table.len();
    if n < 2 {
        return Err(EvalError::Data(format!("{n} rows are too few to split")));
    }
    let n_test = ((n as f64 / 10.0).round() as usize).max(1);
    let mut idx: Vec<usize> = (0..n).collect();
    idx.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let mut test_mask = vec![false; n];
    for &i in &idx[..n_test] {
        test_mask[i] = true;
    }
    let pick = |want: bool| Table {
        inputs: (0..n).filter(|&i| test_mask[i] == want).map(|i| table.inputs[i].clone()).collect(),
        outputs: table
            .outputs
            .as_ref()
            .map(|y| (0..n).filter(|&i| test_mask[i] == want).map(|i| y[i]).collect()),
    };
    Ok((pick(false), pick(true)))
}
