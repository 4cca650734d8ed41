use super::{check_instance, BaseClassifier};
use crate::data::{Dataset, FeatureVector, LabeledInstance, SupportVector};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SgdParams {
    pub lambda: f64,
    pub epochs: usize,
}

impl Default for SgdParams {
    fn default() -> Self {
        SgdParams {
            lambda: 1e-4,
            epochs: 5,
        }
    }
}

/// One-vs-rest linear SVM trained by stochastic gradient descent on the
/// L2-regularized hinge loss. Supports are the softmax of the class margins.
#[derive(Debug, Clone)]
pub struct SgdClassifier {
    params: SgdParams,
    weights: Vec<Vec<f64>>,
    bias: Vec<f64>,
    steps: u64,
}

impl SgdClassifier {
    pub fn zeroed(dim: usize, classes: usize, params: SgdParams) -> Self {
        SgdClassifier {
            params,
            weights: vec![vec![0.0; dim]; classes],
            bias: vec![0.0; classes],
            steps: 0,
        }
    }

    pub fn fit(train: &Dataset) -> Result<Self> {
        Self::fit_with(train, SgdParams::default())
    }

    pub fn fit_with(train: &Dataset, params: SgdParams) -> Result<Self> {
        if train.is_empty() {
            return Err(Error::EmptyTraining);
        }
        let mut model = Self::zeroed(train.dim, train.classes, params);
        for _ in 0..params.epochs {
            for inst in train.iter() {
                model.update(inst)?;
            }
        }
        Ok(model)
    }

    pub fn weights(&self) -> &[Vec<f64>] {
        &self.weights
    }

    pub fn bias(&self) -> &[f64] {
        &self.bias
    }

    /// Step size `1 / (lambda * (t + t0))` with `t0 = 1 / (lambda * 0.1)`.
    fn learning_rate(&self) -> f64 {
        let lambda = self.params.lambda;
        let t0 = 1.0 / (lambda * 0.1);
        1.0 / (lambda * (self.steps as f64 + t0))
    }

    pub fn margins(&self, x: &[f64]) -> Vec<f64> {
        self.weights
            .iter()
            .zip(&self.bias)
            .map(|(w, b)| w.iter().zip(x).map(|(a, v)| a * v).sum::<f64>() + b)
            .collect()
    }
}

impl BaseClassifier for SgdClassifier {
    fn classes(&self) -> usize {
        self.weights.len()
    }

    fn dim(&self) -> usize {
        self.weights.first().map_or(0, Vec::len)
    }

    fn supports(&self, x: &FeatureVector) -> Result<SupportVector> {
        x.check_dim(self.dim())?;
        Ok(SupportVector::softmax(&self.margins(x.values())))
    }

    fn update(&mut self, inst: &LabeledInstance) -> Result<()> {
        check_instance(inst, self.dim(), self.classes())?;
        let eta = self.learning_rate();
        let shrink = 1.0 - eta * self.params.lambda;
        let x = inst.x.values();
        let margins = self.margins(x);
        for (c, (w, b)) in self.weights.iter_mut().zip(&mut self.bias).enumerate() {
            let y = if c == inst.label.index() { 1.0 } else { -1.0 };
            w.iter_mut().for_each(|a| *a *= shrink);
            if y * margins[c] < 1.0 {
                for (a, v) in w.iter_mut().zip(x) {
                    *a += eta * y * v;
                }
                *b += eta * y;
            }
        }
        self.steps += 1;
        Ok(())
    }
}
