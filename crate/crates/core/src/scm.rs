//! Soft confusion matrix correction.
//!
//! A query `x` is corrected in three steps:
//!
//! 1. the base classifier's supports are turned into decision probabilities
//!    `P(i|x)` by the randomized reference classifier;
//! 2. the validation objects among the `K` nearest neighbours of `x` are
//!    weighted by a Gaussian membership `exp(-β‖x - x_V‖²)` (strictly inside
//!    the distance to the `K`-th neighbour) and combined into a local soft
//!    confusion matrix `ε[j][i]` (rows: true class, columns: decision);
//! 3. `P(j|x) = Σ_i P(i|x) · P(j|i,x)` with `P(j|i,x)` the column-normalized
//!    confusion matrix.
//!
//! The validation set is built by three-fold cross-validation so every
//! training instance also serves as a validation object.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::base::{BaseClassifier, BaseKind, BaseModel};
use crate::data::{ClassLabel, Dataset, FeatureVector, LabeledInstance, SupportVector};
use crate::error::{Error, Result};
use crate::kdtree::{KdIndex, Neighbor};
use crate::rrc::{rrc_probabilities, RrcProbabilities};

pub const CV_FOLDS: usize = 3;

/// A labelled point together with the decision memberships `P(i|x_V)` of
/// the classifier that did not see it during training.
#[derive(Debug, Clone, PartialEq)]
pub struct ValidationObject {
    pub x: FeatureVector,
    pub label: ClassLabel,
    pub memberships: Vec<f64>,
    pub t: u64,
}

/// Arrival-ordered validation objects with a kd-tree over their features.
#[derive(Debug, Clone)]
pub struct ValidationSet {
    classes: usize,
    objects: Vec<ValidationObject>,
    index: KdIndex,
}

impl ValidationSet {
    pub fn new(dim: usize, classes: usize) -> Self {
        ValidationSet {
            classes,
            objects: Vec::new(),
            index: KdIndex::new(dim),
        }
    }

    pub fn from_objects(dim: usize, classes: usize, objects: Vec<ValidationObject>) -> Self {
        let index = KdIndex::from_points(dim, objects.iter().map(|o| o.x.values()));
        ValidationSet {
            classes,
            objects,
            index,
        }
    }

    pub fn len(&self) -> usize {
        self.objects.len()
    }

    pub fn is_empty(&self) -> bool {
        self.objects.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.index.dim()
    }

    pub fn classes(&self) -> usize {
        self.classes
    }

    pub fn objects(&self) -> &[ValidationObject] {
        &self.objects
    }

    pub fn push(&mut self, obj: ValidationObject) {
        debug_assert!(self.objects.last().is_none_or(|last| last.t < obj.t));
        self.index.push(obj.x.values());
        self.objects.push(obj);
    }

    /// Keeps only the `keep` newest objects.
    pub fn retain_newest(&mut self, keep: usize) {
        let drop = self.objects.len().saturating_sub(keep);
        if drop > 0 {
            self.objects.drain(..drop);
            self.index.drop_front(drop);
        }
    }

    pub fn clear(&mut self) {
        self.retain_newest(0);
    }

    pub fn nearest(&self, x: &[f64], k: usize) -> Vec<Neighbor> {
        self.index.knn(x, k)
    }

    /// Verifies the spatial index mirrors the object list.
    pub fn audit(&self) -> bool {
        self.index.len() == self.objects.len()
            && self.index.audit()
            && self
                .objects
                .iter()
                .enumerate()
                .all(|(i, o)| self.index.point(i) == o.x.values())
            && self.objects.windows(2).all(|w| w[0].t < w[1].t)
    }
}

/// Number of neighbours for a validation set of `v_count` objects:
/// `ceil(sqrt(|V|))`, bumped by one when it divides `M`, capped at `|V|`.
pub fn neighbourhood_size(v_count: usize, classes: usize) -> usize {
    assert!(v_count >= 1, "neighbourhood of an empty validation set");
    let mut k = (v_count as f64).sqrt().ceil() as usize;
    while k * k < v_count {
        k += 1;
    }
    while k > 1 && (k - 1) * (k - 1) >= v_count {
        k -= 1;
    }
    if classes.is_multiple_of(k) {
        k += 1;
    }
    k.min(v_count)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NeighbourhoodParams {
    /// Width of the Gaussian membership.
    pub beta: f64,
    /// Scale of the membership; cancels in every ratio.
    pub c: f64,
}

impl Default for NeighbourhoodParams {
    fn default() -> Self {
        NeighbourhoodParams { beta: 1.0, c: 1.0 }
    }
}

/// Fuzzy neighbourhood memberships as `(position in V, μ_N)` pairs, nearest
/// first. Objects at exactly the `K`-th neighbour distance are excluded.
pub fn neighbourhood_memberships(
    x: &FeatureVector,
    v: &ValidationSet,
    k: usize,
    params: NeighbourhoodParams,
) -> Result<Vec<(usize, f64)>> {
    if v.is_empty() {
        return Err(Error::EmptyValidation);
    }
    x.check_dim(v.dim())?;
    let k = k.clamp(1, v.len());
    let nn = v.nearest(x.values(), k);
    let radius2 = nn[k - 1].dist2;
    Ok(nn
        .iter()
        .filter(|n| n.dist2 < radius2)
        .map(|n| (n.pos, params.c * (-params.beta * n.dist2).exp()))
        .collect())
}

/// Local soft confusion matrix; `eps[j][i]` is the fuzzy share of true
/// class `j` neighbours that the base classifier would assign to class `i`.
#[derive(Debug, Clone, PartialEq)]
pub struct SoftConfusionMatrix {
    pub eps: Vec<Vec<f64>>,
    /// Rows whose class has no neighbourhood mass.
    pub flagged: Vec<bool>,
}

impl SoftConfusionMatrix {
    /// Builds the matrix from membership pairs over the given objects.
    pub fn from_memberships(
        objects: &[ValidationObject],
        classes: usize,
        memberships: &[(usize, f64)],
    ) -> Self {
        let mut num = vec![vec![0.0; classes]; classes];
        let mut den = vec![0.0; classes];
        for &(pos, mu) in memberships {
            let obj = &objects[pos];
            let j = obj.label.index();
            den[j] += mu;
            for (i, d) in obj.memberships.iter().enumerate() {
                num[j][i] += d * mu;
            }
        }
        let mut flagged = vec![false; classes];
        for j in 0..classes {
            if den[j] > 0.0 {
                for cell in &mut num[j] {
                    *cell = (*cell / den[j]).clamp(0.0, 1.0);
                }
            } else {
                flagged[j] = true;
                num[j].iter_mut().for_each(|c| *c = 0.0);
            }
        }
        SoftConfusionMatrix { eps: num, flagged }
    }

    pub fn classes(&self) -> usize {
        self.eps.len()
    }

    /// `P(j|i,x)` as `cond[j][i]`: each column normalized over true classes,
    /// with empty columns replaced by the identity column.
    pub fn conditional(&self) -> Vec<Vec<f64>> {
        let m = self.classes();
        let mut cond = vec![vec![0.0; m]; m];
        for i in 0..m {
            let norm: f64 = (0..m).map(|j| self.eps[j][i]).sum();
            for (j, row) in cond.iter_mut().enumerate() {
                row[i] = if norm > 0.0 {
                    self.eps[j][i] / norm
                } else if i == j {
                    1.0
                } else {
                    0.0
                };
            }
        }
        cond
    }

    /// `P(j|x) = Σ_i P(i|x) P(j|i,x)`, renormalized.
    pub fn correct(&self, decision: &[f64]) -> SupportVector {
        let cond = self.conditional();
        let out = cond
            .iter()
            .map(|row| row.iter().zip(decision).map(|(c, p)| c * p).sum::<f64>().max(0.0))
            .collect();
        SupportVector::from_weights(out)
    }
}

pub fn soft_confusion_matrix(
    x: &FeatureVector,
    v: &ValidationSet,
    k: usize,
    params: NeighbourhoodParams,
) -> Result<SoftConfusionMatrix> {
    let mu = neighbourhood_memberships(x, v, k, params)?;
    Ok(SoftConfusionMatrix::from_memberships(
        v.objects(),
        v.classes(),
        &mu,
    ))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScmConfig {
    pub neighbourhood: NeighbourhoodParams,
    /// Seed for the stratified fold assignment.
    pub fold_seed: u64,
}

impl Default for ScmConfig {
    fn default() -> Self {
        ScmConfig {
            neighbourhood: NeighbourhoodParams::default(),
            fold_seed: 0x5eed,
        }
    }
}

/// The wrapping classifier: a base model, its validation set and the
/// neighbourhood parameters.
#[derive(Debug, Clone)]
pub struct ScmClassifier {
    base: BaseModel,
    validation: ValidationSet,
    params: NeighbourhoodParams,
    degraded: bool,
}

/// Corrected supports together with the randomized decision probabilities
/// they were derived from.
#[derive(Debug, Clone)]
pub struct Correction {
    pub supports: SupportVector,
    pub decision: RrcProbabilities,
}

impl ScmClassifier {
    pub fn new(base: BaseModel, validation: ValidationSet, params: NeighbourhoodParams) -> Self {
        assert_eq!(base.classes(), validation.classes(), "class count mismatch");
        ScmClassifier {
            base,
            validation,
            params,
            degraded: false,
        }
    }

    pub fn base(&self) -> &BaseModel {
        &self.base
    }

    pub fn validation(&self) -> &ValidationSet {
        &self.validation
    }

    pub fn validation_mut(&mut self) -> &mut ValidationSet {
        &mut self.validation
    }

    pub fn params(&self) -> NeighbourhoodParams {
        self.params
    }

    /// Set when the training set was too small for cross-validation.
    pub fn is_degraded(&self) -> bool {
        self.degraded
    }

    pub fn decision_probabilities(&self, x: &FeatureVector) -> Result<RrcProbabilities> {
        Ok(rrc_probabilities(&self.base.supports(x)?))
    }

    pub fn local_confusion(&self, x: &FeatureVector) -> Result<SoftConfusionMatrix> {
        let k = neighbourhood_size(self.validation.len(), self.validation.classes());
        soft_confusion_matrix(x, &self.validation, k, self.params)
    }

    pub fn correct(&self, x: &FeatureVector) -> Result<Correction> {
        let decision = self.decision_probabilities(x)?;
        let supports = if self.validation.is_empty() {
            SupportVector::from_weights(decision.values().to_vec())
        } else {
            self.local_confusion(x)?.correct(decision.values())
        };
        Ok(Correction { supports, decision })
    }

    pub fn correct_supports(&self, x: &FeatureVector) -> Result<SupportVector> {
        Ok(self.correct(x)?.supports)
    }

    pub fn predict(&self, x: &FeatureVector) -> Result<ClassLabel> {
        Ok(self.correct_supports(x)?.argmax())
    }
}

/// Stratified assignment of instances to folds: each class is shuffled and
/// dealt round-robin, continuing the count across classes.
fn stratified_folds(train: &Dataset, folds: usize, seed: u64) -> Vec<usize> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut by_class: Vec<Vec<usize>> = vec![Vec::new(); train.classes];
    for (i, inst) in train.iter().enumerate() {
        by_class[inst.label.index()].push(i);
    }
    let mut assignment = vec![0; train.len()];
    let mut dealt = 0;
    for members in &mut by_class {
        members.shuffle(&mut rng);
        for &i in members.iter() {
            assignment[i] = dealt % folds;
            dealt += 1;
        }
    }
    assignment
}

fn validation_object(inst: &LabeledInstance, memberships: Vec<f64>) -> ValidationObject {
    ValidationObject {
        x: inst.x.clone(),
        label: inst.label,
        memberships,
        t: inst.t,
    }
}

/// Trains the wrapping classifier on `train`: three-fold cross-validation
/// produces the validation set, then the base model is refitted on all data.
/// Fewer than three instances fall back to in-sample validation and mark
/// the classifier as degraded.
pub fn train_scm(kind: BaseKind, train: &Dataset, cfg: &ScmConfig) -> Result<ScmClassifier> {
    if train.is_empty() {
        return Err(Error::EmptyTraining);
    }
    let base = kind.fit(train)?;
    if train.len() < CV_FOLDS {
        let objects = train
            .iter()
            .map(|inst| {
                let p = rrc_probabilities(&base.supports(&inst.x)?);
                Ok(validation_object(inst, p.into_vec()))
            })
            .collect::<Result<Vec<_>>>()?;
        let v = ValidationSet::from_objects(train.dim, train.classes, objects);
        let mut scm = ScmClassifier::new(base, v, cfg.neighbourhood);
        scm.degraded = true;
        return Ok(scm);
    }

    let folds = stratified_folds(train, CV_FOLDS, cfg.fold_seed);
    let mut memberships: Vec<Option<Vec<f64>>> = vec![None; train.len()];
    for fold in 0..CV_FOLDS {
        let part: Vec<LabeledInstance> = train
            .iter()
            .zip(&folds)
            .filter(|(_, f)| **f != fold)
            .map(|(inst, _)| inst.clone())
            .collect();
        let part = Dataset::from_instances(part, train.dim, train.classes)?;
        let model = kind.fit(&part)?;
        for (i, inst) in train.iter().enumerate() {
            if folds[i] == fold {
                let p = rrc_probabilities(&model.supports(&inst.x)?);
                memberships[i] = Some(p.into_vec());
            }
        }
    }
    let mut objects: Vec<ValidationObject> = train
        .iter()
        .zip(memberships)
        .map(|(inst, mu)| validation_object(inst, mu.expect("every instance is held out once")))
        .collect();
    objects.sort_by_key(|o| o.t);
    let v = ValidationSet::from_objects(train.dim, train.classes, objects);
    Ok(ScmClassifier::new(base, v, cfg.neighbourhood))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gen::test_support::two_blobs;

    fn fv(v: &[f64]) -> FeatureVector {
        FeatureVector::new(v.to_vec()).unwrap()
    }

    fn obj(x: &[f64], label: usize, mu: &[f64], t: u64) -> ValidationObject {
        ValidationObject {
            x: fv(x),
            label: ClassLabel::from_index(label - 1),
            memberships: mu.to_vec(),
            t,
        }
    }

    #[test]
    fn neighbourhood_size_examples() {
        assert_eq!(neighbourhood_size(100, 3), 10);
        assert_eq!(neighbourhood_size(9, 3), 4);
        assert_eq!(neighbourhood_size(1, 2), 1);
        assert_eq!(neighbourhood_size(10, 2), 4);
        assert_eq!(neighbourhood_size(4, 2), 3);
    }

    #[test]
    fn membership_examples() {
        let v = ValidationSet::from_objects(
            2,
            2,
            vec![
                obj(&[1.0, 0.0], 1, &[1.0, 0.0], 0),
                obj(&[0.0, 2.0], 2, &[0.0, 1.0], 1),
            ],
        );
        let mu = neighbourhood_memberships(&fv(&[0.0, 0.0]), &v, 2, NeighbourhoodParams::default())
            .unwrap();
        assert_eq!(mu, vec![(0, (-1.0f64).exp())]);

        let mu = neighbourhood_memberships(&fv(&[1.0, 0.0]), &v, 2, NeighbourhoodParams::default())
            .unwrap();
        assert_eq!(mu, vec![(0, 1.0)]);

        let empty = ValidationSet::new(2, 2);
        assert!(matches!(
            neighbourhood_memberships(&fv(&[0.0, 0.0]), &empty, 1, NeighbourhoodParams::default()),
            Err(Error::EmptyValidation)
        ));
    }

    #[test]
    fn single_neighbour_confusion_row() {
        let objects = vec![obj(&[0.0], 1, &[0.7, 0.3], 0)];
        let scm = SoftConfusionMatrix::from_memberships(&objects, 2, &[(0, 0.4)]);
        assert!((scm.eps[0][0] - 0.7).abs() < 1e-15);
        assert!((scm.eps[0][1] - 0.3).abs() < 1e-15);
        assert_eq!(scm.eps[1], vec![0.0, 0.0]);
        assert_eq!(scm.flagged, vec![false, true]);
    }

    #[test]
    fn identity_and_degenerate_corrections() {
        let identity = SoftConfusionMatrix {
            eps: vec![vec![1.0, 0.0], vec![0.0, 1.0]],
            flagged: vec![false, false],
        };
        let corrected = identity.correct(&[0.8, 0.2]);
        assert!((corrected.values()[0] - 0.8).abs() < 1e-15);

        let empty = SoftConfusionMatrix::from_memberships(&[], 3, &[]);
        assert_eq!(empty.flagged, vec![true; 3]);
        let corrected = empty.correct(&[0.2, 0.5, 0.3]);
        assert_eq!(corrected.values(), &[0.2, 0.5, 0.3]);
    }

    #[test]
    fn column_normalized_product() {
        // cond[j][i]: column 1 = (0.6, 0.4), column 2 = (0.1, 0.9).
        let scm = SoftConfusionMatrix {
            eps: vec![vec![0.6, 0.1], vec![0.4, 0.9]],
            flagged: vec![false, false],
        };
        let cond = scm.conditional();
        assert!((cond[0][0] - 0.6).abs() < 1e-15 && (cond[1][1] - 0.9).abs() < 1e-15);
        let out = scm.correct(&[0.8, 0.2]);
        // 0.8*0.6 + 0.2*0.1 = 0.5, 0.8*0.4 + 0.2*0.9 = 0.5
        assert!((out.values()[0] - 0.5).abs() < 1e-12);
        assert!((out.values()[1] - 0.5).abs() < 1e-12);
        assert_eq!(out.argmax().get(), 1);
    }

    #[test]
    fn scale_constant_cancels() {
        let ds = two_blobs(40, 1.0, 5);
        let scm = train_scm(BaseKind::NaiveBayes, &ds, &ScmConfig::default()).unwrap();
        let q = fv(&[0.1, 0.2]);
        let k = neighbourhood_size(scm.validation().len(), 2);
        let a = soft_confusion_matrix(&q, scm.validation(), k, NeighbourhoodParams { beta: 1.0, c: 1.0 })
            .unwrap();
        let b = soft_confusion_matrix(&q, scm.validation(), k, NeighbourhoodParams { beta: 1.0, c: 7.5 })
            .unwrap();
        for (ra, rb) in a.eps.iter().zip(&b.eps) {
            for (x, y) in ra.iter().zip(rb) {
                assert!((x - y).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn cross_validation_covers_every_instance_once() {
        let ds = two_blobs(150, 2.0, 8);
        let scm = train_scm(BaseKind::Knn, &ds, &ScmConfig::default()).unwrap();
        let v = scm.validation();
        assert_eq!(v.len(), 300);
        let ts: Vec<u64> = v.objects().iter().map(|o| o.t).collect();
        assert_eq!(ts, (0..300).collect::<Vec<_>>());
        assert!(v.audit());
        assert!(!scm.is_degraded());
        for o in v.objects() {
            let s: f64 = o.memberships.iter().sum();
            assert!((s - 1.0).abs() < 1e-6);
        }
    }

    #[test]
    fn separable_data_gives_near_identity_confusion() {
        let ds = two_blobs(60, 8.0, 21);
        let scm = train_scm(BaseKind::NaiveBayes, &ds, &ScmConfig::default()).unwrap();
        for o in scm.validation().objects() {
            assert!(o.memberships[o.label.index()] > 0.9);
        }
        for inst in ds.iter().take(20) {
            let eps = scm.local_confusion(&inst.x).unwrap();
            let j = inst.label.index();
            assert!(!eps.flagged[j]);
            assert!(eps.eps[j][j] > 0.9, "{eps:?}");
        }
    }

    #[test]
    fn tiny_training_set_is_degraded() {
        let ds = two_blobs(1, 2.0, 1);
        let scm = train_scm(BaseKind::NaiveBayes, &ds, &ScmConfig::default()).unwrap();
        assert!(scm.is_degraded());
        assert_eq!(scm.validation().len(), 2);
    }

    #[test]
    fn fold_seed_is_deterministic() {
        let ds = two_blobs(50, 1.0, 2);
        let cfg = ScmConfig::default();
        let a = train_scm(BaseKind::Sgd, &ds, &cfg).unwrap();
        let b = train_scm(BaseKind::Sgd, &ds, &cfg).unwrap();
        assert_eq!(a.validation().objects(), b.validation().objects());
    }

    #[test]
    fn corrected_supports_are_valid() {
        let ds = two_blobs(50, 1.0, 4);
        let scm = train_scm(BaseKind::NaiveBayes, &ds, &ScmConfig::default()).unwrap();
        for q in two_blobs(20, 1.0, 99).iter() {
            let g = scm.correct_supports(&q.x).unwrap();
            assert!(SupportVector::new(g.values().to_vec()).is_ok());
        }
        // far away: every neighbour weight underflows and the correction
        // degrades to the randomized decision probabilities
        let far = fv(&[1e3, -1e3]);
        let c = scm.correct(&far).unwrap();
        for (a, b) in c.supports.values().iter().zip(c.decision.values()) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn retain_newest_keeps_suffix() {
        let mut v = ValidationSet::new(1, 2);
        for t in 0..200u64 {
            v.push(obj(&[t as f64], 1 + (t % 2) as usize, &[0.5, 0.5], t));
        }
        v.retain_newest(37);
        assert_eq!(v.len(), 37);
        assert_eq!(v.objects()[0].t, 163);
        assert!(v.audit());
        let nn = v.nearest(&[170.2], 1);
        assert_eq!(v.objects()[nn[0].pos].t, 170);
    }
}
