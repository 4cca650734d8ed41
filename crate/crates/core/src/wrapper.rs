//! Stream classifiers built around a batch base classifier.
//!
//! All four strategies start by collecting an initial chunk; until it is
//! full, predictions follow the Laplace-smoothed class frequencies of the
//! partial chunk. Afterwards:
//!
//! * `B`: the base model is updated on every instance; on drift it is refit
//!   on the instances still inside the detector window.
//! * `nB`: as `B` without incremental updates.
//! * `S`: the SCM wrapper. The base model is trained once; new instances
//!   enter the validation set, whose length is kept equal to the detector
//!   window.
//! * `nS`: the SCM wrapper with a frozen validation set, retrained from the
//!   detector window on drift.

use std::cell::RefCell;
use std::collections::VecDeque;
use std::fmt;
use std::str::FromStr;

use crate::adwin::{AdwinDetector, DEFAULT_DELTA};
use crate::base::{BaseClassifier, BaseKind, BaseModel};
use crate::data::{argmax_with_tie_break, ClassLabel, Dataset, FeatureVector, LabeledInstance};
use crate::error::{Error, Result};
use crate::rrc::RrcProbabilities;
use crate::scm::{train_scm, ScmClassifier, ScmConfig, ValidationObject};

pub const DEFAULT_CHUNK_SIZE: usize = 200;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Strategy {
    Base,
    NoUpdateBase,
    Scm,
    NoUpdateScm,
}

impl Strategy {
    pub const ALL: [Strategy; 4] = [
        Strategy::Base,
        Strategy::NoUpdateBase,
        Strategy::Scm,
        Strategy::NoUpdateScm,
    ];

    pub fn tag(self) -> &'static str {
        match self {
            Strategy::Base => "B",
            Strategy::NoUpdateBase => "nB",
            Strategy::Scm => "S",
            Strategy::NoUpdateScm => "nS",
        }
    }
}

impl fmt::Display for Strategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.tag())
    }
}

impl FromStr for Strategy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "B" => Ok(Strategy::Base),
            "nB" => Ok(Strategy::NoUpdateBase),
            "S" => Ok(Strategy::Scm),
            "nS" => Ok(Strategy::NoUpdateScm),
            other => Err(Error::Config(format!("unknown strategy {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Event {
    Trained,
    Drift,
}

impl Event {
    pub fn tag(self) -> &'static str {
        match self {
            Event::Trained => "trained",
            Event::Drift => "drift",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WrapperConfig {
    /// Desired size of the initial chunk.
    pub chunk_size: usize,
    pub delta: f64,
    pub scm: ScmConfig,
}

impl Default for WrapperConfig {
    fn default() -> Self {
        WrapperConfig {
            chunk_size: DEFAULT_CHUNK_SIZE,
            delta: DEFAULT_DELTA,
            scm: ScmConfig::default(),
        }
    }
}

/// Instances collected before the first model is trained.
#[derive(Debug, Clone)]
pub struct InitialChunk {
    pub instances: Dataset,
    pub desired_size: usize,
}

impl InitialChunk {
    fn is_full(&self) -> bool {
        self.instances.len() >= self.desired_size
    }

    fn take(&mut self) -> Dataset {
        let empty = Dataset::new(self.instances.dim, self.instances.classes);
        std::mem::replace(&mut self.instances, empty)
    }
}

#[derive(Debug, Clone)]
enum Model {
    Base(BaseModel),
    Scm(ScmClassifier),
}

/// Anything that can be evaluated prequentially.
pub trait OnlineClassifier {
    fn predict(&self, x: &FeatureVector) -> Result<ClassLabel>;
    fn observe(&mut self, inst: &LabeledInstance) -> Result<Option<Event>>;
}

#[derive(Debug, Clone)]
pub struct StreamClassifier {
    strategy: Strategy,
    base: BaseKind,
    cfg: WrapperConfig,
    chunk: InitialChunk,
    model: Option<Model>,
    detector: AdwinDetector,
    /// Instances whose correctness bits are inside the detector window
    /// (all strategies except `S`, whose validation set plays this role).
    window: VecDeque<LabeledInstance>,
    /// Outcome of the latest `predict`, reused by the following `observe`
    /// of the same instance. Cleared whenever the model changes.
    last: RefCell<Option<CachedPrediction>>,
}

#[derive(Debug, Clone)]
struct CachedPrediction {
    x: FeatureVector,
    label: ClassLabel,
    decision: Option<RrcProbabilities>,
}

impl StreamClassifier {
    pub fn new(
        strategy: Strategy,
        base: BaseKind,
        dim: usize,
        classes: usize,
        cfg: WrapperConfig,
    ) -> Self {
        assert!(cfg.chunk_size > 0, "chunk size must be positive");
        StreamClassifier {
            strategy,
            base,
            cfg,
            chunk: InitialChunk {
                instances: Dataset::new(dim, classes),
                desired_size: cfg.chunk_size,
            },
            model: None,
            detector: AdwinDetector::new(cfg.delta),
            window: VecDeque::new(),
            last: RefCell::new(None),
        }
    }

    pub fn strategy(&self) -> Strategy {
        self.strategy
    }

    pub fn is_trained(&self) -> bool {
        self.model.is_some()
    }

    pub fn chunk_len(&self) -> usize {
        self.chunk.instances.len()
    }

    pub fn detector(&self) -> &AdwinDetector {
        &self.detector
    }

    pub fn scm(&self) -> Option<&ScmClassifier> {
        match &self.model {
            Some(Model::Scm(s)) => Some(s),
            _ => None,
        }
    }

    pub fn validation_len(&self) -> usize {
        self.scm().map_or(0, |s| s.validation().len())
    }

    pub fn window_len(&self) -> usize {
        self.window.len()
    }

    fn classes(&self) -> usize {
        self.chunk.instances.classes
    }

    fn dim(&self) -> usize {
        self.chunk.instances.dim
    }

    fn prior_prediction(&self) -> ClassLabel {
        let counts: Vec<f64> = self
            .chunk
            .instances
            .class_counts()
            .into_iter()
            .map(|c| c as f64 + 1.0)
            .collect();
        argmax_with_tie_break(&counts)
    }

    fn train_initial(&mut self) -> Result<()> {
        let data = self.chunk.take();
        self.detector.reset();
        self.window.clear();
        match self.strategy {
            Strategy::Base | Strategy::NoUpdateBase => {
                self.model = Some(Model::Base(self.base.fit(&data)?));
            }
            Strategy::NoUpdateScm => {
                self.model = Some(Model::Scm(train_scm(self.base, &data, &self.cfg.scm)?));
            }
            Strategy::Scm => {
                let mut scm = train_scm(self.base, &data, &self.cfg.scm)?;
                let replay: Vec<ValidationObject> = scm.validation().objects().to_vec();
                scm.validation_mut().clear();
                self.model = Some(Model::Scm(scm));
                // Reconstruction pass: drifts raised here are not reported.
                for obj in replay {
                    self.replay_validation(obj)?;
                }
            }
        }
        Ok(())
    }

    fn scm_mut(&mut self) -> Result<&mut ScmClassifier> {
        match &mut self.model {
            Some(Model::Scm(s)) => Ok(s),
            _ => Err(Error::Untrained),
        }
    }

    /// Feeds one correctness bit to the detector and trims the validation
    /// set so that after appending the new object it matches the window.
    fn track_validation(&mut self, correct: bool) -> Result<bool> {
        let drift = self.detector.add_element(if correct { 1.0 } else { 0.0 })?;
        if drift {
            let keep = self.detector.window_size() - 1;
            self.scm_mut()?.validation_mut().retain_newest(keep);
        }
        Ok(drift)
    }

    fn replay_validation(&mut self, obj: ValidationObject) -> Result<bool> {
        let predicted = self.scm_mut()?.predict(&obj.x)?;
        let drift = self.track_validation(predicted == obj.label)?;
        self.scm_mut()?.validation_mut().push(obj);
        debug_assert_eq!(self.validation_len(), self.detector.window_size());
        Ok(drift)
    }

    /// Validation-set update: predict with the corrected classifier, feed the
    /// outcome to the detector, forget the old part of the set on drift and
    /// append the instance with its decision memberships.
    pub fn update_validation(&mut self, inst: &LabeledInstance) -> Result<bool> {
        let (label, decision) = match self.take_cached(&inst.x) {
            Some(CachedPrediction {
                label,
                decision: Some(d),
                ..
            }) => (label, d),
            _ => {
                let c = self.scm_mut()?.correct(&inst.x)?;
                (c.supports.argmax(), c.decision)
            }
        };
        let drift = self.track_validation(label == inst.label)?;
        self.scm_mut()?.validation_mut().push(ValidationObject {
            x: inst.x.clone(),
            label: inst.label,
            memberships: decision.into_vec(),
            t: inst.t,
        });
        debug_assert_eq!(self.validation_len(), self.detector.window_size());
        Ok(drift)
    }

    /// Records a correctness bit for the window-buffer strategies and keeps
    /// the buffer aligned with the detector.
    fn track_window(&mut self, inst: &LabeledInstance, correct: bool) -> Result<bool> {
        let drift = self.detector.add_element(if correct { 1.0 } else { 0.0 })?;
        self.window.push_back(inst.clone());
        while self.window.len() > self.detector.window_size() {
            self.window.pop_front();
        }
        Ok(drift)
    }

    fn take_cached(&self, x: &FeatureVector) -> Option<CachedPrediction> {
        self.last.take().filter(|c| c.x == *x)
    }

    /// Label for `x` under the current model, reusing the cached prediction.
    fn current_prediction(&self, x: &FeatureVector) -> Result<ClassLabel> {
        match self.take_cached(x) {
            Some(c) => Ok(c.label),
            None => self.predict(x),
        }
    }

    fn window_dataset(&self) -> Dataset {
        Dataset {
            instances: self.window.iter().cloned().collect(),
            dim: self.dim(),
            classes: self.classes(),
        }
    }
}

impl OnlineClassifier for StreamClassifier {
    fn predict(&self, x: &FeatureVector) -> Result<ClassLabel> {
        x.check_dim(self.dim())?;
        let (label, decision) = match &self.model {
            None => return Ok(self.prior_prediction()),
            Some(Model::Base(m)) => (m.predict(x)?, None),
            Some(Model::Scm(s)) => {
                let c = s.correct(x)?;
                (c.supports.argmax(), Some(c.decision))
            }
        };
        *self.last.borrow_mut() = Some(CachedPrediction {
            x: x.clone(),
            label,
            decision,
        });
        Ok(label)
    }

    fn observe(&mut self, inst: &LabeledInstance) -> Result<Option<Event>> {
        let outcome = self.observe_inner(inst);
        self.last.replace(None);
        outcome
    }
}

impl StreamClassifier {
    fn observe_inner(&mut self, inst: &LabeledInstance) -> Result<Option<Event>> {
        if self.model.is_none() {
            self.chunk.instances.push(inst.clone())?;
            if self.chunk.is_full() {
                self.train_initial()?;
                return Ok(Some(Event::Trained));
            }
            return Ok(None);
        }
        let drift = match self.strategy {
            Strategy::Scm => self.update_validation(inst)?,
            Strategy::NoUpdateScm => {
                let correct = self.current_prediction(&inst.x)? == inst.label;
                let drift = self.track_window(inst, correct)?;
                if drift {
                    let data = self.window_dataset();
                    self.model = Some(Model::Scm(train_scm(self.base, &data, &self.cfg.scm)?));
                }
                drift
            }
            Strategy::Base | Strategy::NoUpdateBase => {
                let correct = self.current_prediction(&inst.x)? == inst.label;
                let drift = self.track_window(inst, correct)?;
                if drift {
                    let data = self.window_dataset();
                    self.model = Some(Model::Base(self.base.fit(&data)?));
                } else if self.strategy == Strategy::Base {
                    if let Some(Model::Base(m)) = &mut self.model {
                        m.update(inst)?;
                    }
                }
                drift
            }
        };
        Ok(drift.then_some(Event::Drift))
    }
}
