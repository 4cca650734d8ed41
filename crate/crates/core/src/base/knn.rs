use super::{check_instance, BaseClassifier};
use crate::data::{ClassLabel, Dataset, FeatureVector, LabeledInstance, SupportVector};
use crate::error::{Error, Result};
use crate::kdtree::{KdIndex, Neighbor};

pub const DEFAULT_K: usize = 10;

/// Unweighted k-nearest-neighbour vote with Laplace-smoothed supports
/// `(count_i + 1) / (k + M)`.
#[derive(Debug, Clone)]
pub struct KnnClassifier {
    k: usize,
    classes: usize,
    index: KdIndex,
    labels: Vec<ClassLabel>,
}

impl KnnClassifier {
    pub fn new(dim: usize, classes: usize, k: usize) -> Self {
        assert!(k > 0, "k must be positive");
        KnnClassifier {
            k,
            classes,
            index: KdIndex::new(dim),
            labels: Vec::new(),
        }
    }

    pub fn fit(train: &Dataset) -> Result<Self> {
        Self::fit_with_k(train, DEFAULT_K)
    }

    pub fn fit_with_k(train: &Dataset, k: usize) -> Result<Self> {
        if train.is_empty() {
            return Err(Error::EmptyTraining);
        }
        let mut model = Self::new(train.dim, train.classes, k);
        model.index = KdIndex::from_points(train.dim, train.iter().map(|i| i.x.values()));
        model.labels = train.iter().map(|i| i.label).collect();
        Ok(model)
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn neighbors(&self, x: &FeatureVector) -> Vec<Neighbor> {
        self.index.knn(x.values(), self.k)
    }

    pub fn label_at(&self, pos: usize) -> ClassLabel {
        self.labels[pos]
    }
}

impl BaseClassifier for KnnClassifier {
    fn classes(&self) -> usize {
        self.classes
    }

    fn dim(&self) -> usize {
        self.index.dim()
    }

    fn supports(&self, x: &FeatureVector) -> Result<SupportVector> {
        x.check_dim(self.index.dim())?;
        if self.labels.is_empty() {
            return Err(Error::Untrained);
        }
        let mut counts = vec![1.0; self.classes];
        for n in self.neighbors(x) {
            counts[self.labels[n.pos].index()] += 1.0;
        }
        Ok(SupportVector::from_weights(counts))
    }

    fn update(&mut self, inst: &LabeledInstance) -> Result<()> {
        check_instance(inst, self.index.dim(), self.classes)?;
        self.index.push(inst.x.values());
        self.labels.push(inst.label);
        Ok(())
    }
}
