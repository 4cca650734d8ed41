use super::{check_instance, BaseClassifier};
use crate::data::{Dataset, FeatureVector, LabeledInstance, SupportVector};
use crate::error::{Error, Result};

const BANDWIDTH_FLOOR: f64 = 1e-6;
/// Log-likelihood offset given to classes with no training data, relative to
/// the least likely observed class.
const ABSENT_CLASS_LOG_PENALTY: f64 = 20.0;
const LN_SQRT_2PI: f64 = 0.918_938_533_204_672_8;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Bandwidth {
    /// `1.06 * sigma * n^(-1/5)`, floored at 1e-6.
    Silverman,
    Fixed(f64),
}

#[derive(Debug, Clone, Default)]
struct ClassKde {
    /// Kernel centers stored feature-major: `centers[f][i]`.
    centers: Vec<Vec<f64>>,
    count: usize,
    sum: Vec<f64>,
    sum_sq: Vec<f64>,
}

impl ClassKde {
    fn new(dim: usize) -> Self {
        ClassKde {
            centers: vec![Vec::new(); dim],
            count: 0,
            sum: vec![0.0; dim],
            sum_sq: vec![0.0; dim],
        }
    }

    fn add(&mut self, x: &[f64]) {
        for (f, v) in x.iter().enumerate() {
            self.centers[f].push(*v);
            self.sum[f] += v;
            self.sum_sq[f] += v * v;
        }
        self.count += 1;
    }

    fn std_dev(&self, f: usize) -> f64 {
        if self.count < 2 {
            return 0.0;
        }
        let n = self.count as f64;
        let var = (self.sum_sq[f] - self.sum[f] * self.sum[f] / n) / (n - 1.0);
        var.max(0.0).sqrt()
    }

    fn bandwidth(&self, f: usize, rule: Bandwidth) -> f64 {
        match rule {
            Bandwidth::Fixed(h) => h,
            Bandwidth::Silverman => {
                let n = self.count as f64;
                (1.06 * self.std_dev(f) * n.powf(-0.2)).max(BANDWIDTH_FLOOR)
            }
        }
    }

    fn log_likelihood(&self, x: &[f64], rule: Bandwidth) -> f64 {
        let n = self.count as f64;
        let mut total = 0.0;
        for (f, v) in x.iter().enumerate() {
            let h = self.bandwidth(f, rule);
            let centers = &self.centers[f];
            let mut min_z2 = f64::INFINITY;
            for c in centers {
                let z = (v - c) / h;
                min_z2 = min_z2.min(z * z);
            }
            let mut acc = 0.0;
            for c in centers {
                let z = (v - c) / h;
                acc += (-(z * z - min_z2) * 0.5).exp();
            }
            total += -0.5 * min_z2 + acc.ln() - LN_SQRT_2PI - (n * h).ln();
        }
        total
    }
}

/// Naive Bayes with one Gaussian kernel density estimate per class and
/// feature, and Laplace-smoothed class priors.
#[derive(Debug, Clone)]
pub struct NaiveBayesKde {
    dim: usize,
    classes: Vec<ClassKde>,
    total: usize,
    bandwidth: Bandwidth,
}

impl NaiveBayesKde {
    pub fn new(dim: usize, classes: usize, bandwidth: Bandwidth) -> Self {
        NaiveBayesKde {
            dim,
            classes: vec![ClassKde::new(dim); classes],
            total: 0,
            bandwidth,
        }
    }

    pub fn fit(train: &Dataset) -> Result<Self> {
        Self::fit_with(train, Bandwidth::Silverman)
    }

    pub fn fit_with(train: &Dataset, bandwidth: Bandwidth) -> Result<Self> {
        if train.is_empty() {
            return Err(Error::EmptyTraining);
        }
        let mut model = Self::new(train.dim, train.classes, bandwidth);
        for inst in train.iter() {
            model.update(inst)?;
        }
        Ok(model)
    }

    pub fn bandwidth_of(&self, class: usize, feature: usize) -> f64 {
        self.classes[class].bandwidth(feature, self.bandwidth)
    }
}

impl BaseClassifier for NaiveBayesKde {
    fn classes(&self) -> usize {
        self.classes.len()
    }

    fn dim(&self) -> usize {
        self.dim
    }

    fn supports(&self, x: &FeatureVector) -> Result<SupportVector> {
        x.check_dim(self.dim)?;
        if self.total == 0 {
            return Err(Error::Untrained);
        }
        let m = self.classes.len() as f64;
        let n = self.total as f64;
        let mut scores: Vec<Option<f64>> = self
            .classes
            .iter()
            .map(|c| (c.count > 0).then(|| c.log_likelihood(x.values(), self.bandwidth)))
            .collect();
        let floor = scores
            .iter()
            .flatten()
            .copied()
            .fold(f64::INFINITY, f64::min)
            - ABSENT_CLASS_LOG_PENALTY;
        let log_post: Vec<f64> = scores
            .iter_mut()
            .zip(&self.classes)
            .map(|(s, c)| {
                let prior = ((c.count as f64 + 1.0) / (n + m)).ln();
                prior + s.unwrap_or(floor)
            })
            .collect();
        Ok(SupportVector::softmax(&log_post))
    }

    fn update(&mut self, inst: &LabeledInstance) -> Result<()> {
        check_instance(inst, self.dim, self.classes.len())?;
        self.classes[inst.label.index()].add(inst.x.values());
        self.total += 1;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::ClassLabel;
    use crate::gen::test_support::two_blobs;

    fn inst(x: Vec<f64>, label: usize, t: u64) -> LabeledInstance {
        LabeledInstance {
            x: FeatureVector::new(x).unwrap(),
            label: ClassLabel::new(label, 2).unwrap(),
            t,
        }
    }

    #[test]
    fn separable_blobs_fit_well() {
        let ds = two_blobs(100, 4.0, 42);
        let nb = NaiveBayesKde::fit(&ds).unwrap();
        let correct = ds
            .iter()
            .filter(|i| nb.predict(&i.x).unwrap() == i.label)
            .count();
        assert!(correct as f64 / ds.len() as f64 > 0.95);
    }

    #[test]
    fn symmetric_midpoint_is_even() {
        let mut ds = Dataset::new(1, 2);
        for (i, v) in [-3.0, -2.0, -1.5].iter().enumerate() {
            ds.push(inst(vec![*v], 1, i as u64)).unwrap();
            ds.push(inst(vec![-v], 2, 10 + i as u64)).unwrap();
        }
        let nb = NaiveBayesKde::fit(&ds).unwrap();
        let g = nb.supports(&FeatureVector::new(vec![0.0]).unwrap()).unwrap();
        assert!((g.values()[0] - 0.5).abs() < 1e-6);
    }

    #[test]
    fn update_matches_refit() {
        let ds = two_blobs(40, 1.0, 3);
        let z = inst(vec![0.3, -0.2], 2, 1000);
        let mut inc = NaiveBayesKde::fit(&ds).unwrap();
        inc.update(&z).unwrap();
        let mut augmented = ds.clone();
        augmented.push(z).unwrap();
        let refit = NaiveBayesKde::fit(&augmented).unwrap();
        for q in two_blobs(10, 1.0, 9).iter() {
            let a = inc.supports(&q.x).unwrap();
            let b = refit.supports(&q.x).unwrap();
            for (x, y) in a.values().iter().zip(b.values()) {
                assert!((x - y).abs() <= 1e-9);
            }
        }
    }

    #[test]
    fn single_center_reduces_to_gaussian_nb() {
        // One kernel center per class with the bandwidth forced to the
        // class-feature standard deviation is exactly a Gaussian NB.
        let sd = 0.8;
        let mut ds = Dataset::new(2, 2);
        ds.push(inst(vec![-1.0, 0.5], 1, 0)).unwrap();
        ds.push(inst(vec![1.5, -0.5], 2, 1)).unwrap();
        let nb = NaiveBayesKde::fit_with(&ds, Bandwidth::Fixed(sd)).unwrap();
        let gauss = |x: f64, mu: f64| {
            (-(x - mu) * (x - mu) / (2.0 * sd * sd)).exp() / (sd * (2.0 * std::f64::consts::PI).sqrt())
        };
        for q in [[0.0, 0.0], [0.7, -1.1], [-2.0, 2.0]] {
            let l1 = 0.5 * gauss(q[0], -1.0) * gauss(q[1], 0.5);
            let l2 = 0.5 * gauss(q[0], 1.5) * gauss(q[1], -0.5);
            let expected = l1 / (l1 + l2);
            let g = nb.supports(&FeatureVector::new(q.to_vec()).unwrap()).unwrap();
            assert!((g.values()[0] - expected).abs() < 1e-12, "{g:?} vs {expected}");
        }
    }

    #[test]
    fn silverman_bandwidth_has_floor() {
        let mut ds = Dataset::new(1, 2);
        ds.push(inst(vec![1.0], 1, 0)).unwrap();
        ds.push(inst(vec![1.0], 1, 1)).unwrap();
        let nb = NaiveBayesKde::fit(&ds).unwrap();
        assert_eq!(nb.bandwidth_of(0, 0), 1e-6);
    }
}
