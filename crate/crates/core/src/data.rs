//! Shared data model: feature vectors, labels, supports and datasets, plus
//! the CSV stream format used by every command-line tool.
//!
//! Class labels are 1-based (`1..=M`) at every external surface. Internally
//! they are converted to 0-based indices with [`ClassLabel::index`].

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use crate::error::{Error, Result};

/// A point in feature space. All coordinates are finite.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureVector(Vec<f64>);

impl FeatureVector {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if let Some(v) = values.iter().find(|v| !v.is_finite()) {
            return Err(Error::Domain(format!("non-finite feature value {v}")));
        }
        Ok(FeatureVector(values))
    }

    pub fn values(&self) -> &[f64] {
        &self.0
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn check_dim(&self, expected: usize) -> Result<()> {
        if self.0.len() != expected {
            return Err(Error::DimensionMismatch {
                expected,
                got: self.0.len(),
            });
        }
        Ok(())
    }
}

impl From<FeatureVector> for Vec<f64> {
    fn from(x: FeatureVector) -> Self {
        x.0
    }
}

/// Squared Euclidean distance. Every neighbour search in the crate goes
/// through this one function so that ties compare bit-for-bit.
#[inline]
pub fn squared_distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// A class number in `1..=M`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct ClassLabel(usize);

impl ClassLabel {
    pub fn new(label: usize, classes: usize) -> Result<Self> {
        if label == 0 || label > classes {
            return Err(Error::LabelOutOfRange { label, classes });
        }
        Ok(ClassLabel(label))
    }

    /// Builds a label from a 0-based class index.
    pub fn from_index(index: usize) -> Self {
        ClassLabel(index + 1)
    }

    /// The 1-based class number.
    pub fn get(self) -> usize {
        self.0
    }

    /// The 0-based class index.
    pub fn index(self) -> usize {
        self.0 - 1
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LabeledInstance {
    pub x: FeatureVector,
    pub label: ClassLabel,
    /// Arrival index within the stream.
    pub t: u64,
}

/// Normalized classification supports `g_1..g_M`.
#[derive(Debug, Clone, PartialEq)]
pub struct SupportVector(Vec<f64>);

pub const SUPPORT_SUM_TOL: f64 = 1e-9;

impl SupportVector {
    /// Validates that every entry is in `[0, 1]` and the entries sum to one.
    pub fn new(supports: Vec<f64>) -> Result<Self> {
        if supports.is_empty() {
            return Err(Error::InvalidSupport("empty".into()));
        }
        if supports
            .iter()
            .any(|g| !g.is_finite() || *g < 0.0 || *g > 1.0)
        {
            return Err(Error::InvalidSupport(format!(
                "entries outside [0,1]: {supports:?}"
            )));
        }
        let sum: f64 = supports.iter().sum();
        if (sum - 1.0).abs() > SUPPORT_SUM_TOL {
            return Err(Error::InvalidSupport(format!("sum {sum} != 1")));
        }
        Ok(SupportVector(supports))
    }

    /// Normalizes non-negative weights into a support vector. A zero or
    /// non-finite total yields the uniform vector.
    pub fn from_weights(mut weights: Vec<f64>) -> Self {
        let total: f64 = weights.iter().sum();
        if total > 0.0 && total.is_finite() {
            for w in &mut weights {
                *w = (*w / total).clamp(0.0, 1.0);
            }
        } else {
            let m = weights.len() as f64;
            weights.iter_mut().for_each(|w| *w = 1.0 / m);
        }
        SupportVector(weights)
    }

    /// Softmax of arbitrary real scores.
    pub fn softmax(scores: &[f64]) -> Self {
        let max = scores.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let weights = scores.iter().map(|s| (s - max).exp()).collect();
        Self::from_weights(weights)
    }

    pub fn uniform(classes: usize) -> Self {
        SupportVector(vec![1.0 / classes as f64; classes])
    }

    pub fn values(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// Maximum support rule with ties resolved to the lowest class.
    pub fn argmax(&self) -> ClassLabel {
        argmax_with_tie_break(&self.0)
    }
}

/// Values closer than this to the maximum count as tied with it.
pub const TIE_TOLERANCE: f64 = 1e-12;

/// Index of the maximum value, lowest index on ties, as a class label.
pub fn argmax_with_tie_break(values: &[f64]) -> ClassLabel {
    let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let best = values
        .iter()
        .position(|v| *v >= max - TIE_TOLERANCE)
        .unwrap_or(0);
    ClassLabel::from_index(best)
}

/// An ordered collection of instances sharing one dimensionality and class
/// count.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub instances: Vec<LabeledInstance>,
    pub dim: usize,
    pub classes: usize,
}

impl Dataset {
    pub fn new(dim: usize, classes: usize) -> Self {
        Dataset {
            instances: Vec::new(),
            dim,
            classes,
        }
    }

    pub fn from_instances(
        instances: Vec<LabeledInstance>,
        dim: usize,
        classes: usize,
    ) -> Result<Self> {
        for inst in &instances {
            inst.x.check_dim(dim)?;
            if inst.label.get() > classes {
                return Err(Error::LabelOutOfRange {
                    label: inst.label.get(),
                    classes,
                });
            }
        }
        Ok(Dataset {
            instances,
            dim,
            classes,
        })
    }

    /// Appends an instance, validating dimensionality and label range.
    pub fn push(&mut self, inst: LabeledInstance) -> Result<()> {
        inst.x.check_dim(self.dim)?;
        if inst.label.get() > self.classes {
            return Err(Error::LabelOutOfRange {
                label: inst.label.get(),
                classes: self.classes,
            });
        }
        self.instances.push(inst);
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.instances.len()
    }

    pub fn is_empty(&self) -> bool {
        self.instances.is_empty()
    }

    pub fn iter(&self) -> std::slice::Iter<'_, LabeledInstance> {
        self.instances.iter()
    }

    pub fn class_counts(&self) -> Vec<usize> {
        let mut counts = vec![0; self.classes];
        for inst in &self.instances {
            counts[inst.label.index()] += 1;
        }
        counts
    }
}

fn header(dim: usize) -> String {
    let mut h = String::new();
    for i in 1..=dim {
        let _ = write!(h, "f{i},");
    }
    h.push_str("label");
    h
}

/// Parses the CSV stream format from a string. A leading `f1,...,fd,label`
/// header is skipped when present; data rows are numbered from 1.
pub fn parse_stream_csv(text: &str, dim: usize, classes: usize) -> Result<Dataset> {
    let expected_header = header(dim);
    let mut lines = text.lines().peekable();
    if lines.peek().map(|l| l.trim()) == Some(expected_header.as_str()) {
        lines.next();
    }
    let mut ds = Dataset::new(dim, classes);
    for (i, line) in lines.enumerate() {
        let row = i + 1;
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').map(str::trim).collect();
        if fields.len() != dim + 1 {
            return Err(Error::Parse {
                row,
                msg: format!("expected {} fields, found {}", dim + 1, fields.len()),
            });
        }
        let mut values = Vec::with_capacity(dim);
        for f in &fields[..dim] {
            let v: f64 = f.parse().map_err(|_| Error::Parse {
                row,
                msg: format!("non-numeric field {f:?}"),
            })?;
            if !v.is_finite() {
                return Err(Error::Parse {
                    row,
                    msg: format!("non-finite field {f:?}"),
                });
            }
            values.push(v);
        }
        let label: usize = fields[dim].parse().map_err(|_| Error::Parse {
            row,
            msg: format!("invalid label {:?}", fields[dim]),
        })?;
        let label = ClassLabel::new(label, classes).map_err(|e| Error::Parse {
            row,
            msg: e.to_string(),
        })?;
        let t = ds.instances.len() as u64;
        ds.instances.push(LabeledInstance {
            x: FeatureVector(values),
            label,
            t,
        });
    }
    Ok(ds)
}

pub fn read_stream_csv(path: impl AsRef<Path>, dim: usize, classes: usize) -> Result<Dataset> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_stream_csv(&text, dim, classes)
}

/// Canonical text form: header line, eight decimals per feature, `\n` endings.
pub fn format_stream_csv(ds: &Dataset) -> String {
    let mut out = header(ds.dim);
    out.push('\n');
    for inst in &ds.instances {
        for v in inst.x.values() {
            let _ = write!(out, "{v:.8},");
        }
        let _ = writeln!(out, "{}", inst.label.get());
    }
    out
}

pub fn write_stream_csv(path: impl AsRef<Path>, ds: &Dataset) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, format_stream_csv(ds)).map_err(|e| Error::io(path, e))
}
