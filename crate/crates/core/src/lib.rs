//! Dependency parsing of symbolic music.
//!
//! A sequence of notes or chords is encoded into categorical features,
//! scored by a transformer arc scorer and decoded into a dependency tree
//! over its elements. Trees convert to and from binary constituent trees.

pub mod autograd;
pub mod decoder;
pub mod features;
pub mod io;
pub mod metrics;
pub mod scorer;
pub mod synthetic;
pub mod training;
pub mod tree;

use thiserror::Error;

pub use decoder::{decode, Decoded, DecoderMode};
pub use features::{DurationVocab, EventSequence, FeatureExtractor, SequenceKind};
pub use metrics::MetricReport;
pub use scorer::{ArcScores, ModelConfig, ModelParams, PotentialArcMask, Scorer};
pub use training::{fit, LossMode, TrainConfig};
pub use tree::{ConstituentNode, ConstituentTree, DependencyTree, Head, HeadSequence, Side};

#[derive(Debug, Error)]
pub enum Error {
    #[error(transparent)]
    Tree(#[from] tree::TreeError),
    #[error(transparent)]
    Feature(#[from] features::FeatureError),
    #[error(transparent)]
    Scorer(#[from] scorer::ScorerError),
    #[error(transparent)]
    Decode(#[from] decoder::DecodeError),
    #[error(transparent)]
    Train(#[from] training::TrainError),
    #[error(transparent)]
    Metric(#[from] metrics::MetricError),
    #[error("sequence kind {found:?} does not match model kind {expected:?}")]
    KindMismatch {
        expected: SequenceKind,
        found: SequenceKind,
    },
}

/// A trained parser: scorer parameters plus the corpus state needed to
/// featurize new input.
#[derive(Clone, Debug, PartialEq)]
pub struct Model {
    pub config: ModelConfig,
    pub params: ModelParams,
    pub kind: SequenceKind,
    pub vocab: DurationVocab,
}

impl Model {
    pub fn extractor(&self, strict: bool) -> FeatureExtractor {
        FeatureExtractor::new(self.vocab.clone()).strict(strict)
    }

    /// Evaluation-mode arc scores for `seq`.
    pub fn scores(&self, seq: &EventSequence, strict: bool) -> Result<ArcScores, Error> {
        if seq.kind() != self.kind {
            return Err(Error::KindMismatch {
                expected: self.kind,
                found: seq.kind(),
            });
        }
        let x = self.extractor(strict).extract(seq)?;
        let mask = PotentialArcMask::new(&seq.rests());
        let scorer = Scorer::new(self.config.clone(), self.params.clone());
        Ok(scorer.forward(&x, &mask)?)
    }

    pub fn parse(
        &self,
        seq: &EventSequence,
        mode: DecoderMode,
        strict: bool,
    ) -> Result<Decoded, Error> {
        let s = self.scores(seq, strict)?;
        Ok(decode(&s, mode)?)
    }
}
