use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::degrade::{GapSpec, OlderSpec, Orientation, RrmKind};
use crate::error::{Error, Result};
use crate::fourier::CutoffSpec;
use crate::metrics::EvalRegion;

/// The six imputation methods of the factorial.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Method {
    A1,
    A2,
    A3,
    B,
    C,
    C1,
}

impl Method {
    pub const ALL: [Method; 6] = [
        Method::A1,
        Method::A2,
        Method::A3,
        Method::B,
        Method::C,
        Method::C1,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            Method::A1 => "A1",
            Method::A2 => "A2",
            Method::A3 => "A3",
            Method::B => "B",
            Method::C => "C",
            Method::C1 => "C1",
        }
    }

    /// Cutoff fraction for the Fourier variants.
    pub fn cutoff(&self) -> Option<CutoffSpec> {
        match self {
            Method::A1 => Some(CutoffSpec::A1),
            Method::A2 => Some(CutoffSpec::A2),
            Method::A3 => Some(CutoffSpec::A3),
            _ => None,
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Method::ALL
            .into_iter()
            .find(|m| m.as_str().eq_ignore_ascii_case(s.trim()))
            .ok_or_else(|| {
                Error::Config(format!(
                    "unknown method {s:?} (expected A1, A2, A3, B, C or C1)"
                ))
            })
    }
}

/// Experiment parameters. Every key of the config file maps onto one field;
/// keys left out take the desk-scale defaults.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    /// Where the dataset, results and summaries are written.
    pub output_dir: PathBuf,
    /// BRAW scenes to crop. When empty, `images` synthetic scenes are used.
    pub inputs: Vec<PathBuf>,
    pub images: usize,
    /// Must be a perfect square; sub-images tile the scene.
    pub subimages_per_image: usize,
    pub subimage_size: usize,
    /// Band count of synthetic scenes.
    pub bands: usize,
    pub n_z: usize,
    pub gap_fraction: f64,
    pub strip_width: usize,
    pub strip_period: usize,
    pub orientation: String,
    pub methods: Vec<String>,
    pub rrms: Vec<u8>,
    pub rrm2_shift_rows: usize,
    pub rrm2_shift_cols: usize,
    pub k_classes: usize,
    pub sample_window: usize,
    pub q_window: usize,
    pub region: String,
    pub seed: u64,
    pub older_gain: f64,
    pub older_bias: f64,
    pub older_noise: f64,
    pub older_patch_rate: f64,
    /// Worker threads; 0 picks one per core.
    pub threads: usize,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            output_dir: PathBuf::from("gapfill-out"),
            inputs: Vec::new(),
            images: 4,
            subimages_per_image: 4,
            subimage_size: 250,
            bands: 3,
            n_z: 5,
            gap_fraction: 0.26,
            strip_width: 14,
            strip_period: 54,
            orientation: "horizontal".into(),
            methods: Method::ALL.iter().map(|m| m.as_str().to_string()).collect(),
            rrms: vec![0, 1, 2],
            rrm2_shift_rows: 3,
            rrm2_shift_cols: 2,
            k_classes: 5,
            sample_window: 3,
            q_window: 8,
            region: "gap".into(),
            seed: 2024,
            older_gain: 0.9,
            older_bias: 12.0,
            older_noise: 4.0,
            older_patch_rate: 0.25,
            threads: 0,
        }
    }
}

impl ExperimentConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_toml_str(&text)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    /// Hex SHA-256 of the canonical TOML form. The output directory and the
    /// thread count do not affect results and are excluded.
    pub fn hash(&self) -> String {
        let mut canonical = self.clone();
        canonical.output_dir = PathBuf::new();
        canonical.threads = 0;
        hex::encode(Sha256::digest(canonical.to_toml_string().as_bytes()))
    }

    pub fn method_list(&self) -> Result<Vec<Method>> {
        self.methods.iter().map(|m| m.parse()).collect()
    }

    pub fn rrm_list(&self) -> Result<Vec<RrmKind>> {
        self.rrms
            .iter()
            .map(|&id| match id {
                0 => Ok(RrmKind::BlockAverage),
                1 => Ok(RrmKind::SmoothResample),
                2 => Ok(RrmKind::ShiftedAverage {
                    rows: self.rrm2_shift_rows,
                    cols: self.rrm2_shift_cols,
                }),
                other => Err(Error::Config(format!(
                    "unknown rrm {other} (expected 0, 1 or 2)"
                ))),
            })
            .collect()
    }

    pub fn eval_region(&self) -> Result<EvalRegion> {
        self.region
            .parse()
            .map_err(|_| Error::Config(format!("unknown region {:?}", self.region)))
    }

    /// `None` when the gap fraction is zero: sub-images stay undamaged.
    pub fn gap_spec(&self) -> Result<Option<GapSpec>> {
        if self.gap_fraction == 0.0 {
            return Ok(None);
        }
        let orientation: Orientation = self
            .orientation
            .parse()
            .map_err(|e: Error| Error::Config(e.to_string()))?;
        let spec = GapSpec {
            strip_width: self.strip_width,
            period: self.strip_period,
            orientation,
            target_fraction: self.gap_fraction,
        };
        spec.validate().map_err(|e| Error::Config(e.to_string()))?;
        Ok(Some(spec))
    }

    pub fn older_spec(&self) -> OlderSpec {
        OlderSpec {
            gain: self.older_gain,
            bias: self.older_bias,
            noise_sigma: self.older_noise,
            patch_rate: self.older_patch_rate,
        }
    }

    /// Sub-images per scene side.
    pub fn grid_side(&self) -> usize {
        (self.subimages_per_image as f64).sqrt().round() as usize
    }

    pub fn image_count(&self) -> usize {
        if self.inputs.is_empty() {
            self.images
        } else {
            self.inputs.len()
        }
    }

    /// Rough work estimate: true above 1e9 pixel-band-cells.
    pub fn is_long_running(&self) -> bool {
        let cells =
            self.image_count() * self.subimages_per_image * self.methods.len() * self.rrms.len();
        let work = cells as f64 * (self.subimage_size * self.subimage_size * self.bands) as f64;
        work > 1e9
    }

    pub fn validate(&self) -> Result<()> {
        let fail = |msg: String| Err(Error::Config(msg));
        if self.methods.is_empty() {
            return fail("method list is empty".into());
        }
        if self.rrms.is_empty() {
            return fail("rrm list is empty".into());
        }
        let methods = self.method_list()?;
        let rrms = self.rrm_list()?;
        for (i, m) in methods.iter().enumerate() {
            if methods[..i].contains(m) {
                return fail(format!("method {m} listed twice"));
            }
        }
        for (i, r) in rrms.iter().enumerate() {
            if rrms[..i].iter().any(|o| o.id() == r.id()) {
                return fail(format!("rrm {} listed twice", r.id()));
            }
        }
        if self.image_count() == 0 {
            return fail("no images".into());
        }
        let side = self.grid_side();
        if self.subimages_per_image == 0 || side * side != self.subimages_per_image {
            return fail(format!(
                "subimages_per_image {} is not a positive perfect square",
                self.subimages_per_image
            ));
        }
        if self.n_z == 0 || self.subimage_size == 0 || !self.subimage_size.is_multiple_of(self.n_z)
        {
            return fail(format!(
                "subimage_size {} is not a positive multiple of n_z {}",
                self.subimage_size, self.n_z
            ));
        }
        if self.bands == 0 || self.bands > 255 {
            return fail(format!("bands {} outside 1..=255", self.bands));
        }
        if self.k_classes < 1 || self.k_classes > u16::MAX as usize {
            return fail(format!("k_classes {} out of range", self.k_classes));
        }
        if self.sample_window == 0 {
            return fail("sample_window must be >= 1".into());
        }
        if self.q_window < 2 {
            return fail("q_window must be >= 2".into());
        }
        if self.q_window > self.subimage_size {
            return fail(format!("q_window {} exceeds subimage_size", self.q_window));
        }
        if self.rrm2_shift_rows >= self.subimage_size || self.rrm2_shift_cols >= self.subimage_size
        {
            return fail("rrm2 shift exceeds subimage_size".into());
        }
        self.eval_region()?;
        if let Some(spec) = self.gap_spec()? {
            if spec.period > self.subimage_size {
                return fail(format!(
                    "strip_period {} exceeds subimage_size",
                    spec.period
                ));
            }
        }
        if !(self.older_gain > 0.0
            && self.older_noise >= 0.0
            && (0.0..=0.5).contains(&self.older_patch_rate))
        {
            return fail("older image parameters out of range".into());
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_validate() {
        let cfg = ExperimentConfig::default();
        cfg.validate().unwrap();
        assert_eq!(cfg.method_list().unwrap(), Method::ALL);
        assert!(!cfg.is_long_running());
    }

    #[test]
    fn shipped_config_matches_defaults() {
        let text = include_str!("../../config/desk.toml");
        assert_eq!(
            ExperimentConfig::from_toml_str(text).unwrap(),
            ExperimentConfig::default()
        );
    }

    #[test]
    fn partial_file_and_overrides() {
        let cfg =
            ExperimentConfig::from_toml_str("images = 1\nmethods = [\"b\"]\nrrms = [0]\n").unwrap();
        assert_eq!(cfg.images, 1);
        assert_eq!(cfg.method_list().unwrap(), vec![Method::B]);
        assert_eq!(cfg.subimage_size, 250);
        assert!(ExperimentConfig::from_toml_str("bogus = 3").is_err());
    }

    #[test]
    fn invalid_configs() {
        let base = ExperimentConfig::default();
        for cfg in [
            ExperimentConfig {
                methods: vec![],
                ..base.clone()
            },
            ExperimentConfig {
                rrms: vec![],
                ..base.clone()
            },
            ExperimentConfig {
                rrms: vec![3],
                ..base.clone()
            },
            ExperimentConfig {
                subimage_size: 251,
                ..base.clone()
            },
            ExperimentConfig {
                subimages_per_image: 3,
                ..base.clone()
            },
            ExperimentConfig {
                q_window: 1,
                ..base.clone()
            },
            ExperimentConfig {
                methods: vec!["D".into()],
                ..base.clone()
            },
            ExperimentConfig {
                methods: vec!["B".into(), "b".into()],
                ..base.clone()
            },
        ] {
            assert!(matches!(cfg.validate(), Err(Error::Config(_))), "{cfg:?}");
        }
    }

    #[test]
    fn full_scale_flagged() {
        let cfg = ExperimentConfig {
            subimages_per_image: 16,
            subimage_size: 1250,
            bands: 6,
            n_z: 5,
            ..ExperimentConfig::default()
        };
        cfg.validate().unwrap();
        assert!(cfg.is_long_running());
    }

    #[test]
    fn hash_ignores_output_dir() {
        let a = ExperimentConfig::default();
        let b = ExperimentConfig {
            output_dir: "elsewhere".into(),
            ..a.clone()
        };
        let c = ExperimentConfig {
            seed: 7,
            ..a.clone()
        };
        let d = ExperimentConfig {
            threads: 2,
            ..a.clone()
        };
        assert_eq!(a.hash(), b.hash());
        assert_eq!(a.hash(), d.hash());
        assert_ne!(a.hash(), c.hash());
        assert_eq!(a.hash().len(), 64);
    }
}
