//! Point-set, weight and plan files, and 12-significant-digit formatting.
//!
//! Point files are CSV with header `label,f0,...,f{d-1}`: a class label
//! (an integer by convention) followed by `d` real features. Weight files
//! hold one real per line.

use std::io::{Read, Write};
use std::path::Path;

use ndarray::Array2;

use crate::cpcc::ClassBatch;
use crate::error::{Error, Result};
use crate::measures::{FlowPlan, WeightedPointSet};

/// Significant digits used for all numeric output.
pub const OUTPUT_DIGITS: usize = 12;

/// Formats `x` with [`OUTPUT_DIGITS`] significant digits, dropping trailing
/// zeros; switches to scientific notation for very large or small values.
pub fn format_sig(x: f64) -> String {
    if !x.is_finite() {
        return x.to_string();
    }
    if x == 0.0 {
        return "0".to_string();
    }
    let sci = format!("{:.*e}", OUTPUT_DIGITS - 1, x);
    let (mantissa, exp) = sci.split_once('e').expect("exponent present");
    let exp: i32 = exp.parse().expect("integer exponent");
    if (-5..OUTPUT_DIGITS as i32).contains(&exp) {
        let decimals = (OUTPUT_DIGITS as i32 - 1 - exp).max(0) as usize;
        trim_zeros(&format!("{x:.decimals$}")).to_string()
    } else {
        format!("{}e{}", trim_zeros(mantissa), exp)
    }
}

fn trim_zeros(s: &str) -> &str {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.')
    } else {
        s
    }
}

/// Rows of a point file.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledPoints {
    pub labels: Vec<String>,
    pub features: Array2<f64>,
}

impl LabeledPoints {
    /// All rows as one measure, with uniform weights unless given.
    pub fn to_point_set(&self, weights: Option<Vec<f64>>) -> Result<WeightedPointSet> {
        match weights {
            Some(w) => WeightedPointSet::new(self.features.clone(), w),
            None => WeightedPointSet::uniform(self.features.clone()),
        }
    }

    pub fn to_batch(&self) -> Result<ClassBatch> {
        ClassBatch::from_labeled_rows(&self.labels, &self.features)
    }
}

pub fn read_points<R: Read>(reader: R) -> Result<LabeledPoints> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(reader);
    let header = rdr.headers()?.clone();
    let d = header.len().saturating_sub(1);
    let expected: Vec<String> = std::iter::once("label".to_string())
        .chain((0..d).map(|k| format!("f{k}")))
        .collect();
    if d == 0 || header.iter().ne(expected.iter().map(String::as_str)) {
        return Err(Error::Parse(format!(
            "point file header must be `label,f0,...,f{{d-1}}`, got `{}`",
            header.iter().collect::<Vec<_>>().join(",")
        )));
    }
    let mut labels = Vec::new();
    let mut values = Vec::new();
    for (row, record) in rdr.records().enumerate() {
        let record = record?;
        let label = &record[0];
        if label.is_empty() {
            return Err(Error::Parse(format!("row {}: empty class label", row + 1)));
        }
        labels.push(label.to_string());
        for (col, field) in record.iter().skip(1).enumerate() {
            let x: f64 = field.parse().map_err(|_| {
                Error::Parse(format!(
                    "row {}, column f{col}: `{field}` is not a number",
                    row + 1
                ))
            })?;
            if !x.is_finite() {
                return Err(Error::NonFinite { row, col });
            }
            values.push(x);
        }
    }
    if labels.is_empty() {
        return Err(Error::Empty("point file"));
    }
    let features = Array2::from_shape_vec((labels.len(), d), values)
        .map_err(|e| Error::Parse(e.to_string()))?;
    Ok(LabeledPoints { labels, features })
}

pub fn read_points_file(path: impl AsRef<Path>) -> Result<LabeledPoints> {
    read_points(std::fs::File::open(path)?)
}

pub fn write_points<W: Write>(writer: W, labels: &[String], features: &Array2<f64>) -> Result<()> {
    if labels.len() != features.nrows() {
        return Err(Error::DimensionMismatch(labels.len(), features.nrows()));
    }
    let mut w = csv::Writer::from_writer(writer);
    let mut header = vec!["label".to_string()];
    header.extend((0..features.ncols()).map(|k| format!("f{k}")));
    w.write_record(&header)?;
    for (label, row) in labels.iter().zip(features.rows()) {
        let mut rec = vec![label.clone()];
        rec.extend(row.iter().map(|x| format!("{x:?}")));
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}

/// One weight per non-empty line.
pub fn read_weights<R: Read>(mut reader: R) -> Result<Vec<f64>> {
    let mut text = String::new();
    reader.read_to_string(&mut text)?;
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| {
            l.trim().parse::<f64>().map_err(|_| {
                Error::Parse(format!(
                    "weight line {}: `{}` is not a number",
                    i + 1,
                    l.trim()
                ))
            })
        })
        .collect()
}

pub fn read_weights_file(path: impl AsRef<Path>) -> Result<Vec<f64>> {
    read_weights(std::fs::File::open(path)?)
}

/// Triplet CSV with header `i,j,mass`.
pub fn write_plan<W: Write>(writer: W, plan: &FlowPlan) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["i", "j", "mass"])?;
    for &(i, j, m) in plan.entries() {
        w.write_record([i.to_string(), j.to_string(), format_sig(m)])?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_plan<R: Read>(reader: R, shape: (usize, usize)) -> Result<FlowPlan> {
    let mut rdr = csv::Reader::from_reader(reader);
    let mut entries = Vec::new();
    for record in rdr.deserialize() {
        let (i, j, m): (usize, usize, f64) = record?;
        entries.push((i, j, m));
    }
    FlowPlan::new(shape, entries)
}
