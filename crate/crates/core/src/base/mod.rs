//! Batch-trainable base classifiers exposing normalized supports, each with
//! a per-instance incremental update.

mod knn;
mod nb;
mod sgd;

use std::fmt;
use std::str::FromStr;

pub use knn::KnnClassifier;
pub use nb::{Bandwidth, NaiveBayesKde};
pub use sgd::{SgdClassifier, SgdParams};

use crate::data::{ClassLabel, Dataset, FeatureVector, LabeledInstance, SupportVector};
use crate::error::{Error, Result};

pub trait BaseClassifier {
    fn classes(&self) -> usize;
    fn dim(&self) -> usize;
    fn supports(&self, x: &FeatureVector) -> Result<SupportVector>;
    fn update(&mut self, inst: &LabeledInstance) -> Result<()>;

    fn predict(&self, x: &FeatureVector) -> Result<ClassLabel> {
        Ok(self.supports(x)?.argmax())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum BaseKind {
    NaiveBayes,
    Knn,
    Sgd,
}

impl BaseKind {
    pub const ALL: [BaseKind; 3] = [BaseKind::NaiveBayes, BaseKind::Knn, BaseKind::Sgd];

    pub fn tag(self) -> &'static str {
        match self {
            BaseKind::NaiveBayes => "NB",
            BaseKind::Knn => "KNN",
            BaseKind::Sgd => "SGD",
        }
    }

    pub fn fit(self, train: &Dataset) -> Result<BaseModel> {
        Ok(match self {
            BaseKind::NaiveBayes => BaseModel::NaiveBayes(NaiveBayesKde::fit(train)?),
            BaseKind::Knn => BaseModel::Knn(KnnClassifier::fit(train)?),
            BaseKind::Sgd => BaseModel::Sgd(SgdClassifier::fit(train)?),
        })
    }
}

impl fmt::Display for BaseKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.tag())
    }
}

impl FromStr for BaseKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_uppercase().as_str() {
            "NB" => Ok(BaseKind::NaiveBayes),
            "KNN" => Ok(BaseKind::Knn),
            "SGD" => Ok(BaseKind::Sgd),
            other => Err(Error::Config(format!("unknown base classifier {other:?}"))),
        }
    }
}

#[derive(Debug, Clone)]
pub enum BaseModel {
    NaiveBayes(NaiveBayesKde),
    Knn(KnnClassifier),
    Sgd(SgdClassifier),
}

impl BaseModel {
    fn inner(&self) -> &dyn BaseClassifier {
        match self {
            BaseModel::NaiveBayes(m) => m,
            BaseModel::Knn(m) => m,
            BaseModel::Sgd(m) => m,
        }
    }
}

impl BaseClassifier for BaseModel {
    fn classes(&self) -> usize {
        self.inner().classes()
    }

    fn dim(&self) -> usize {
        self.inner().dim()
    }

    fn supports(&self, x: &FeatureVector) -> Result<SupportVector> {
        self.inner().supports(x)
    }

    fn update(&mut self, inst: &LabeledInstance) -> Result<()> {
        match self {
            BaseModel::NaiveBayes(m) => m.update(inst),
            BaseModel::Knn(m) => m.update(inst),
            BaseModel::Sgd(m) => m.update(inst),
        }
    }
}

pub(crate) fn check_instance(inst: &LabeledInstance, dim: usize, classes: usize) -> Result<()> {
    inst.x.check_dim(dim)?;
    if inst.label.get() > classes {
        return Err(Error::LabelOutOfRange {
            label: inst.label.get(),
            classes,
        });
    }
    Ok(())
}
