use std::fmt;

use serde::{Deserialize, Serialize};

use super::{
    Cusum, Decusum, Detector, DetectorError, DetectorParams, Fractional, Gcusum, Gdecusum,
};
use crate::distributions::{Density, FamilySpec, PostChange};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DetectorKind {
    Cusum,
    Decusum,
    Gcusum,
    Gdecusum,
    Fractional,
}

impl DetectorKind {
    /// Whether the detector can skip observations based on the data.
    pub fn is_data_efficient(self) -> bool {
        matches!(self, DetectorKind::Decusum | DetectorKind::Gdecusum)
    }

    /// Whether the detector maximizes over the whole post-change family.
    pub fn is_composite(self) -> bool {
        matches!(
            self,
            DetectorKind::Gcusum | DetectorKind::Gdecusum | DetectorKind::Fractional
        )
    }
}

impl fmt::Display for DetectorKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            DetectorKind::Cusum => "cusum",
            DetectorKind::Decusum => "decusum",
            DetectorKind::Gcusum => "gcusum",
            DetectorKind::Gdecusum => "gdecusum",
            DetectorKind::Fractional => "fractional",
        })
    }
}

/// Everything needed to build a fresh detector for one trial.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DetectorSpec {
    pub kind: DetectorKind,
    pub params: DetectorParams,
    /// Alternative tested by `cusum` and `decusum`; defaults to the family's control density.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub target: Option<Density>,
}

impl DetectorSpec {
    pub fn new(kind: DetectorKind, params: DetectorParams) -> Self {
        DetectorSpec {
            kind,
            params,
            target: None,
        }
    }

    pub fn with_target(mut self, target: Density) -> Self {
        self.target = Some(target);
        self
    }

    pub fn with_threshold(mut self, threshold: f64) -> Self {
        self.params.threshold = threshold;
        self
    }

    pub fn is_data_efficient(&self) -> bool {
        self.kind.is_data_efficient()
    }

    /// Builds a detector in its initial state. `coin_seed` feeds the
    /// Bernoulli pattern of the fractional detector and is otherwise unused.
    pub fn build(
        &self,
        family: &FamilySpec,
        coin_seed: (u64, u64),
    ) -> Result<Box<dyn Detector + Send>, DetectorError> {
        let target = self.target.unwrap_or(*family.control());
        let p = &self.params;
        Ok(match self.kind {
            DetectorKind::Cusum => Box::new(Cusum::new(&target, family.pre(), p)?),
            DetectorKind::Decusum => Box::new(Decusum::new(&target, family.pre(), p)?),
            DetectorKind::Gcusum => Box::new(glr_cusum(family, p)?),
            DetectorKind::Gdecusum => Box::new(Gdecusum::new(family, p)?),
            DetectorKind::Fractional => Box::new(Fractional::new(
                glr_cusum(family, p)?,
                p.skip_pattern.unwrap_or_default(),
                coin_seed,
            )?),
        })
    }
}

fn glr_cusum(family: &FamilySpec, params: &DetectorParams) -> Result<Gcusum, DetectorError> {
    match family.post() {
        PostChange::Finite { members } => Gcusum::finite(members, family.pre(), params),
        PostChange::Exponential(fam) => Gcusum::exponential(fam, params),
    }
}
