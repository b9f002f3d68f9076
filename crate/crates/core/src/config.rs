//! Declarative pipeline configuration, read from TOML.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::dataset::BoxClassConfig;
use crate::error::{Error, Result};
use crate::geometry::{BorderMode, Intrinsics, MotionConfig};
use crate::metrics::EvalConfig;
use crate::representation::TbrConfig;
use crate::scalar::Scalar;
use crate::simulator::SimConfig;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CameraConfig {
    /// Focal length in pixels; the image width when unset.
    pub focal: Option<f64>,
    pub plane_depth: f64,
    pub border: BorderMode,
}

impl Default for CameraConfig {
    fn default() -> Self {
        Self { focal: None, plane_depth: 1.0, border: BorderMode::Mirrored }
    }
}

impl CameraConfig {
    /// Principal point at the image center.
    pub fn intrinsics<T: Scalar>(&self, width: u32, height: u32) -> Result<Intrinsics<T>> {
        let focal = self.focal.unwrap_or(width as f64);
        Intrinsics::new(
            T::of(focal),
            T::of(width as f64 / 2.0),
            T::of(height as f64 / 2.0),
            width,
            height,
        )
    }
}

/// Everything one pipeline run needs.
///
/// The motion seed is not read from the file: each image is simulated with
/// `seed ^ fnv1a64(image_id)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    pub seed: u64,
    /// One TBR frame per stream, with `delta_t = ceil(duration / n_bits)`.
    pub single_frame: bool,
    pub split_ratio: f64,
    /// Optional `[width, height]` for exported frames.
    pub resize: Option<[u32; 2]>,
    #[serde(with = "motion_serde")]
    pub motion: MotionConfig,
    pub camera: CameraConfig,
    pub sim: SimConfig,
    pub tbr: TbrConfig,
    pub boxes: BoxClassConfig,
    pub eval: EvalConfig,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            seed: 42,
            single_frame: true,
            split_ratio: 0.8,
            resize: None,
            motion: MotionConfig::default(),
            camera: CameraConfig::default(),
            sim: SimConfig::default(),
            tbr: TbrConfig::default(),
            boxes: BoxClassConfig::default(),
            eval: EvalConfig::default(),
        }
    }
}

impl PipelineConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_toml(&std::fs::read_to_string(path)?)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string_pretty(self).expect("config is always serializable")
    }

    pub fn validate(&self) -> Result<()> {
        self.motion.validate()?;
        self.sim.validate()?;
        self.tbr.validate()?;
        self.boxes.validate()?;
        self.eval.validate()?;
        if !(self.split_ratio > 0.0 && self.split_ratio < 1.0) {
            return Err(Error::Config(format!("split_ratio {} outside (0, 1)", self.split_ratio)));
        }
        if !(self.camera.plane_depth > 0.0) {
            return Err(Error::Config("plane_depth must be positive".into()));
        }
        if let Some(f) = self.camera.focal {
            if !(f > 0.0) {
                return Err(Error::Config(format!("focal {f} must be positive")));
            }
        }
        if let BorderMode::Constant(c) = self.camera.border {
            if !(0.0..=1.0).contains(&c) {
                return Err(Error::Config(format!("constant border {c} outside [0, 1]")));
            }
        }
        if let Some([w, h]) = self.resize {
            if w == 0 || h == 0 {
                return Err(Error::Config("resize dimensions must be positive".into()));
            }
        }
        Ok(())
    }

    /// Motion parameters with the per-image seed filled in.
    pub fn motion_for(&self, sample_seed: u64) -> MotionConfig {
        MotionConfig { seed: sample_seed, ..self.motion.clone() }
    }

    /// Window configuration for a stream of the given duration.
    pub fn tbr_for(&self, duration_us: u64) -> TbrConfig {
        if self.single_frame {
            self.tbr.single_frame(duration_us)
        } else {
            self.tbr
        }
    }
}

/// `[motion]` without the seed field.
mod motion_serde {
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    use crate::geometry::MotionConfig;

    #[derive(Serialize, Deserialize)]
    #[serde(default, deny_unknown_fields)]
    struct Motion {
        pause_probability: f64,
        max_frames: usize,
        step_std: [f64; 6],
        amplitude_clamp: [f64; 6],
    }

    impl Default for Motion {
        fn default() -> Self {
            let m = MotionConfig::default();
            Self {
                pause_probability: m.pause_probability,
                max_frames: m.max_frames,
                step_std: m.step_std,
                amplitude_clamp: m.amplitude_clamp,
            }
        }
    }

    pub fn serialize<S: Serializer>(m: &MotionConfig, s: S) -> Result<S::Ok, S::Error> {
        Motion {
            pause_probability: m.pause_probability,
            max_frames: m.max_frames,
            step_std: m.step_std,
            amplitude_clamp: m.amplitude_clamp,
        }
        .serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<MotionConfig, D::Error> {
        let m = Motion::deserialize(d)?;
        Ok(MotionConfig {
            pause_probability: m.pause_probability,
            max_frames: m.max_frames,
            step_std: m.step_std,
            amplitude_clamp: m.amplitude_clamp,
            ..MotionConfig::default()
        })
    }
}
