//! TOML pipeline configuration. Unknown keys are rejected and every omitted
//! value falls back to its default.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::labelgen::LabelGenConfig;
use crate::segment::SegmentationConfig;
use crate::synth::SynthConfig;
use crate::track::TrackingConfig;

/// Pipeline stages in execution order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Stage {
    Synth,
    Labelgen,
    Segment,
    Track,
    Score,
}

impl Stage {
    pub const ALL: [Stage; 5] = [
        Stage::Synth,
        Stage::Labelgen,
        Stage::Segment,
        Stage::Track,
        Stage::Score,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Stage::Synth => "synth",
            Stage::Labelgen => "labelgen",
            Stage::Segment => "segment",
            Stage::Track => "track",
            Stage::Score => "score",
        }
    }
}

/// Input directories for stages whose producer does not run. Unset entries
/// default to the matching subdirectory of the output directory.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct InputPaths {
    /// Ground truth: `maskTTT.tif` and `man_track.txt`.
    pub gt: Option<PathBuf>,
    /// Raw frames `tTTT.tif`; defaults to the ground-truth directory.
    pub raw: Option<PathBuf>,
    /// Predictions `cellTTT.tif` and `neighborTTT.tif`.
    pub maps: Option<PathBuf>,
    /// Segmentation `maskTTT.tif`.
    pub seg: Option<PathBuf>,
    /// Tracking result `maskTTT.tif` and `res_track.txt`.
    pub res: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PipelineConfig {
    pub output: PathBuf,
    pub stages: Vec<Stage>,
    pub inputs: InputPaths,
    pub synth: SynthConfig,
    pub labelgen: LabelGenConfig,
    pub segmentation: SegmentationConfig,
    pub tracking: TrackingConfig,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            output: PathBuf::from("out"),
            stages: Stage::ALL.to_vec(),
            inputs: InputPaths::default(),
            synth: SynthConfig::default(),
            labelgen: LabelGenConfig::default(),
            segmentation: SegmentationConfig::default(),
            tracking: TrackingConfig::default(),
        }
    }
}

impl PipelineConfig {
    pub fn from_toml(text: &str) -> Result<PipelineConfig> {
        let cfg: PipelineConfig = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<PipelineConfig> {
        if !path.is_file() {
            return Err(Error::MissingInput(path.to_path_buf()));
        }
        Self::from_toml(&std::fs::read_to_string(path)?)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config is always serializable")
    }

    pub fn validate(&self) -> Result<()> {
        if self.stages.is_empty() {
            return Err(Error::Config("no stages selected".into()));
        }
        if self.stages.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::Config(
                "stages must be unique and in the order synth, labelgen, segment, track, score"
                    .into(),
            ));
        }
        let wrap = |r: Result<()>| r.map_err(|e| Error::Config(e.to_string()));
        if self.stages.contains(&Stage::Synth) {
            wrap(self.synth.validate())?;
        }
        wrap(self.segmentation.validate())?;
        wrap(self.tracking.validate())?;
        Ok(())
    }

    pub fn runs(&self, stage: Stage) -> bool {
        self.stages.contains(&stage)
    }

    fn dir(&self, produced_by: Stage, given: &Option<PathBuf>, sub: &str) -> PathBuf {
        match given {
            Some(p) if !self.runs(produced_by) => p.clone(),
            _ => self.output.join(sub),
        }
    }

    pub fn gt_dir(&self) -> PathBuf {
        self.dir(Stage::Synth, &self.inputs.gt, "gt")
    }

    pub fn raw_dir(&self) -> PathBuf {
        self.inputs.raw.clone().unwrap_or_else(|| self.gt_dir())
    }

    pub fn maps_dir(&self) -> PathBuf {
        self.dir(Stage::Labelgen, &self.inputs.maps, "maps")
    }

    pub fn seg_dir(&self) -> PathBuf {
        self.dir(Stage::Segment, &self.inputs.seg, "seg")
    }

    pub fn res_dir(&self) -> PathBuf {
        self.dir(Stage::Track, &self.inputs.res, "res")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_round_trip() {
        let cfg = PipelineConfig::default();
        assert_eq!(PipelineConfig::from_toml(&cfg.to_toml()).unwrap(), cfg);
        assert_eq!(PipelineConfig::from_toml("").unwrap(), cfg);
    }

    #[test]
    fn documented_defaults() {
        let cfg = PipelineConfig::default();
        assert_eq!(cfg.segmentation.rho_mask, 0.09);
        assert_eq!(cfg.segmentation.rho_seed, 0.5);
        assert_eq!(cfg.segmentation.sigma_for(2).unwrap(), vec![1.5, 1.5]);
        assert_eq!(cfg.tracking.delta_t, 3);
        assert_eq!((cfg.tracking.alpha, cfg.tracking.beta), (0.5, 1.2));
        assert_eq!(cfg.tracking.disappearance_cost(2).unwrap(), 150.0);
        assert_eq!(cfg.tracking.disappearance_cost(3).unwrap(), 100.0);
    }

    #[test]
    fn unknown_keys_are_rejected() {
        assert!(matches!(
            PipelineConfig::from_toml("colour = 1"),
            Err(Error::Config(_))
        ));
        assert!(matches!(
            PipelineConfig::from_toml("[tracking]\ndelta = 2"),
            Err(Error::Config(_))
        ));
    }

    #[test]
    fn stage_order_is_enforced() {
        assert!(PipelineConfig::from_toml("stages = [\"track\", \"segment\"]").is_err());
        assert!(PipelineConfig::from_toml("stages = [\"segment\", \"segment\"]").is_err());
        let cfg =
            PipelineConfig::from_toml("stages = [\"segment\", \"track\"]\n[inputs]\nmaps = \"m\"")
                .unwrap();
        assert_eq!(cfg.maps_dir(), PathBuf::from("m"));
        assert_eq!(cfg.seg_dir(), PathBuf::from("out/seg"));
    }

    #[test]
    fn invalid_values_are_config_errors() {
        assert!(matches!(
            PipelineConfig::from_toml("[segmentation]\nrho_mask = 1.5"),
            Err(Error::Config(_))
        ));
    }
}
