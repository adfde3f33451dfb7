//! Component selection by name. Classical components need no groundtruth;
//! oracle variants require it (the runner re-renders the scene to get it).

use std::sync::Arc;

use thiserror::Error;

use tracksep_core::estimators::{
    oracle_estimators, ClusteredEnvelopeEstimator, EnvelopeEstimator, Extractor,
    OracleCorruption, PseudoIntensityTracker, RefinementExtractor, SceneGroundtruth,
    SteeredExtractor, SteeredRefiner, Tracker,
};
use tracksep_core::pipeline::Components;

#[derive(Debug, Error)]
pub enum RegistryError {
    #[error("unknown component set '{0}' (known: classical, oracle, oracle-noisy)")]
    UnknownComponent(String),
    #[error("component set '{0}' requires groundtruth, which is unavailable here")]
    NeedsGroundtruth(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ComponentChoice {
    /// Clustered envelopes, pseudo-intensity tracking, steered extraction.
    Classical,
    /// Exact groundtruth-backed components.
    Oracle,
    /// Groundtruth with fixed corruption (20°/10° jitter, 20 % leakage).
    OracleNoisy,
}

impl ComponentChoice {
    pub fn parse(name: &str) -> Result<Self, RegistryError> {
        match name {
            "classical" => Ok(Self::Classical),
            "oracle" => Ok(Self::Oracle),
            "oracle-noisy" => Ok(Self::OracleNoisy),
            other => Err(RegistryError::UnknownComponent(other.to_string())),
        }
    }

    pub fn needs_groundtruth(&self) -> bool {
        !matches!(self, Self::Classical)
    }
}

enum Built {
    Classical {
        envelope: ClusteredEnvelopeEstimator,
        tracker: PseudoIntensityTracker,
        extractor: SteeredExtractor,
        refiner: SteeredRefiner,
    },
    Oracle(tracksep_core::estimators::OracleSet),
}

/// Owned component set, borrowed into the pipeline per scene.
pub struct BuiltComponents {
    inner: Built,
}

impl BuiltComponents {
    pub fn components(&self) -> Components<'_> {
        match &self.inner {
            Built::Classical { envelope, tracker, extractor, refiner } => Components {
                envelope: envelope as &dyn EnvelopeEstimator,
                tracker: tracker as &dyn Tracker,
                extractor: extractor as &dyn Extractor,
                refiner: refiner as &dyn RefinementExtractor,
            },
            Built::Oracle(set) => set.components(),
        }
    }
}

pub fn build_components(
    choice: ComponentChoice,
    groundtruth: Option<Arc<SceneGroundtruth>>,
    seed: u64,
) -> Result<BuiltComponents, RegistryError> {
    let inner = match choice {
        ComponentChoice::Classical => Built::Classical {
            envelope: ClusteredEnvelopeEstimator::default(),
            tracker: PseudoIntensityTracker::default(),
            extractor: SteeredExtractor,
            refiner: SteeredRefiner,
        },
        ComponentChoice::Oracle | ComponentChoice::OracleNoisy => {
            let gt = groundtruth
                .ok_or_else(|| RegistryError::NeedsGroundtruth(format!("{choice:?}")))?;
            let corruption = match choice {
                ComponentChoice::Oracle => OracleCorruption { seed, ..Default::default() },
                _ => OracleCorruption {
                    tracker_jitter_deg: 20.0,
                    tracker_jitter_separated_deg: Some(10.0),
                    extractor_leakage: 0.2,
                    refiner_leakage: 0.1,
                    seed,
                    ..Default::default()
                },
            };
            Built::Oracle(oracle_estimators(gt, corruption))
        }
    };
    Ok(BuiltComponents { inner })
}
