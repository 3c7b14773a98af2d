use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use sha2::{Digest, Sha256};

use super::config::ExperimentConfig;
use super::scene::SceneModel;
use crate::degrade::{apply_gap, make_gap_mask, synth_older};
use crate::error::{Error, Result};
use crate::io::{encode_braw, read_raster};
use crate::raster::{crop, GapMask, Raster};

pub const MANIFEST_NAME: &str = "manifest.csv";
const MANIFEST_HEADER: [&str; 6] = ["role", "image", "subimage", "rrm", "path", "sha256"];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Role {
    Truth,
    Damaged,
    Older,
    LowRes,
}

impl Role {
    pub fn as_str(&self) -> &'static str {
        match self {
            Role::Truth => "truth",
            Role::Damaged => "damaged",
            Role::Older => "older",
            Role::LowRes => "lowres",
        }
    }
}

impl fmt::Display for Role {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Role {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "truth" => Ok(Role::Truth),
            "damaged" => Ok(Role::Damaged),
            "older" => Ok(Role::Older),
            "lowres" => Ok(Role::LowRes),
            _ => Err(Error::Config(format!("unknown manifest role {s:?}"))),
        }
    }
}

/// One generated raster. `path` is relative to the manifest's directory.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ManifestEntry {
    pub role: Role,
    pub image: usize,
    pub subimage: usize,
    pub rrm: Option<u8>,
    pub path: PathBuf,
    pub sha256: String,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Manifest {
    pub dir: PathBuf,
    pub entries: Vec<ManifestEntry>,
}

impl Manifest {
    pub fn path(&self) -> PathBuf {
        self.dir.join(MANIFEST_NAME)
    }

    pub fn find(
        &self,
        role: Role,
        image: usize,
        subimage: usize,
        rrm: Option<u8>,
    ) -> Option<&ManifestEntry> {
        self.entries
            .iter()
            .find(|e| e.role == role && e.image == image && e.subimage == subimage && e.rrm == rrm)
    }

    pub fn count(&self, role: Role) -> usize {
        self.entries.iter().filter(|e| e.role == role).count()
    }

    /// Reads a raster and checks it against its recorded digest.
    pub fn load(
        &self,
        role: Role,
        image: usize,
        subimage: usize,
        rrm: Option<u8>,
    ) -> Result<Raster<u8>> {
        let entry = self.find(role, image, subimage, rrm).ok_or_else(|| {
            Error::MissingDataset(format!(
                "{} has no {role} raster for image {image}, subimage {subimage}{}",
                self.path().display(),
                rrm.map(|r| format!(", rrm {r}")).unwrap_or_default()
            ))
        })?;
        let path = self.dir.join(&entry.path);
        let bytes = fs::read(&path)?;
        let digest = hex::encode(Sha256::digest(&bytes));
        if digest != entry.sha256 {
            return Err(Error::MissingDataset(format!(
                "{} does not match the checksum in {}",
                path.display(),
                self.path().display()
            )));
        }
        crate::io::decode_braw(&bytes)
    }

    pub fn read(dir: impl AsRef<Path>) -> Result<Self> {
        let dir = dir.as_ref().to_path_buf();
        let path = dir.join(MANIFEST_NAME);
        if !path.is_file() {
            return Err(Error::MissingDataset(format!(
                "manifest {} not found",
                path.display()
            )));
        }
        let bad = |msg: String| Error::MissingDataset(format!("{}: {msg}", path.display()));
        let mut reader = csv::Reader::from_path(&path).map_err(|e| bad(e.to_string()))?;
        let header = reader.headers().map_err(|e| bad(e.to_string()))?;
        if header.iter().ne(MANIFEST_HEADER) {
            return Err(bad(format!("unexpected header {header:?}")));
        }
        let mut entries = Vec::new();
        for row in reader.records() {
            let row = row.map_err(|e| bad(e.to_string()))?;
            let num = |i: usize| {
                row[i]
                    .parse::<usize>()
                    .map_err(|e| bad(format!("{}: {e}", &row[i])))
            };
            entries.push(ManifestEntry {
                role: row[0].parse()?,
                image: num(1)?,
                subimage: num(2)?,
                rrm: if row[3].is_empty() {
                    None
                } else {
                    Some(
                        row[3]
                            .parse()
                            .map_err(|e| bad(format!("{}: {e}", &row[3])))?,
                    )
                },
                path: PathBuf::from(&row[4]),
                sha256: row[5].to_string(),
            });
        }
        Ok(Self { dir, entries })
    }

    fn write(&self) -> Result<()> {
        let mut w = csv::Writer::from_path(self.path()).map_err(|e| Error::Io(e.into()))?;
        let io = |e: csv::Error| Error::Io(e.into());
        w.write_record(MANIFEST_HEADER).map_err(io)?;
        for e in &self.entries {
            let rrm = e.rrm.map(|r| r.to_string()).unwrap_or_default();
            let image = e.image.to_string();
            let sub = e.subimage.to_string();
            let path = e.path.to_string_lossy();
            w.write_record([e.role.as_str(), &image, &sub, &rrm, &path, &e.sha256])
                .map_err(io)?;
        }
        w.flush()?;
        Ok(())
    }
}

pub fn data_dir(cfg: &ExperimentConfig) -> PathBuf {
    cfg.output_dir.join("data")
}

/// Seed for one purpose of one sub-image, stable across platforms.
pub fn derive_seed(master: u64, purpose: &str, image: usize, subimage: usize) -> u64 {
    let mut h = Sha256::new();
    h.update(master.to_le_bytes());
    h.update(purpose.as_bytes());
    h.update((image as u64).to_le_bytes());
    h.update((subimage as u64).to_le_bytes());
    u64::from_le_bytes(h.finalize()[..8].try_into().expect("8 bytes"))
}

/// The gap mask shared by every sub-image; regenerated from the config.
pub fn gap_mask(cfg: &ExperimentConfig) -> Result<GapMask> {
    let size = cfg.subimage_size;
    match cfg.gap_spec()? {
        Some(spec) => make_gap_mask(&spec, size, size),
        None => Ok(GapMask::empty(size, size)),
    }
}

/// Scene `image` and the epoch its older companion is derived from.
fn scene_pair(cfg: &ExperimentConfig, image: usize) -> Result<(Raster<u8>, Raster<u8>)> {
    let side = cfg.grid_side() * cfg.subimage_size;
    if let Some(path) = cfg.inputs.get(image) {
        let scene = read_raster(path)?;
        if scene.width() < side || scene.height() < side {
            return Err(Error::Config(format!(
                "{} is {}x{}, smaller than the {side}x{side} sub-image grid",
                path.display(),
                scene.width(),
                scene.height()
            )));
        }
        return Ok((scene.clone(), scene));
    }
    let model = SceneModel::new(
        side,
        side,
        cfg.bands,
        derive_seed(cfg.seed, "scene", image, 0),
    );
    Ok((model.render(0)?, model.render(1)?))
}

/// Generates truths, damaged versions, older images and one low-resolution
/// companion per RRM for every sub-image, then writes the manifest.
pub fn build_database(cfg: &ExperimentConfig) -> Result<Manifest> {
    cfg.validate()?;
    if cfg.is_long_running() {
        log::warn!("configuration is full-scale; expect a long run");
    }
    let dir = data_dir(cfg);
    fs::create_dir_all(&dir)?;
    let mask = gap_mask(cfg)?;
    let rrms = cfg.rrm_list()?;
    let side = cfg.grid_side();
    let size = cfg.subimage_size;
    let mut entries = Vec::new();

    for image in 0..cfg.image_count() {
        let (scene, older_scene) = scene_pair(cfg, image)?;
        for subimage in 0..cfg.subimages_per_image {
            let origin = ((subimage / side) * size, (subimage % side) * size);
            let truth = crop(&scene, origin, (size, size))?;
            let older_src = crop(&older_scene, origin, (size, size))?;
            let older = synth_older(
                &older_src,
                derive_seed(cfg.seed, "older", image, subimage),
                &cfg.older_spec(),
            )?;
            let damaged = apply_gap(&truth, &mask, 0)?;

            let sub_dir = PathBuf::from(format!("img{image}")).join(format!("sub{subimage}"));
            fs::create_dir_all(dir.join(&sub_dir))?;
            let mut put =
                |role: Role, rrm: Option<u8>, name: String, raster: &Raster<u8>| -> Result<()> {
                    let bytes = encode_braw(raster);
                    let rel = sub_dir.join(name);
                    fs::write(dir.join(&rel), &bytes)?;
                    entries.push(ManifestEntry {
                        role,
                        image,
                        subimage,
                        rrm,
                        path: rel,
                        sha256: hex::encode(Sha256::digest(&bytes)),
                    });
                    Ok(())
                };
            put(Role::Truth, None, "truth.braw".into(), &truth)?;
            put(Role::Damaged, None, "damaged.braw".into(), &damaged)?;
            put(Role::Older, None, "older.braw".into(), &older)?;
            for rrm in &rrms {
                let z = rrm.reduce(&truth, cfg.n_z)?.to_u8();
                put(
                    Role::LowRes,
                    Some(rrm.id()),
                    format!("z{}.braw", rrm.id()),
                    &z,
                )?;
            }
        }
    }
    let manifest = Manifest { dir, entries };
    manifest.write()?;
    Ok(manifest)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small(dir: &Path) -> ExperimentConfig {
        ExperimentConfig {
            output_dir: dir.to_path_buf(),
            images: 1,
            subimage_size: 60,
            strip_period: 30,
            strip_width: 8,
            ..ExperimentConfig::default()
        }
    }

    #[test]
    fn counts_and_roundtrip() {
        let tmp = tempfile::tempdir().unwrap();
        let cfg = small(tmp.path());
        let m = build_database(&cfg).unwrap();
        assert_eq!(m.count(Role::Truth), 4);
        assert_eq!(m.count(Role::Damaged), 4);
        assert_eq!(m.count(Role::Older), 4);
        assert_eq!(m.count(Role::LowRes), 12);
        let read = Manifest::read(data_dir(&cfg)).unwrap();
        assert_eq!(read, m);
        let z = read.load(Role::LowRes, 0, 3, Some(2)).unwrap();
        assert_eq!((z.width(), z.height(), z.bands()), (12, 12, 3));
        let truth = read.load(Role::Truth, 0, 1, None).unwrap();
        let damaged = read.load(Role::Damaged, 0, 1, None).unwrap();
        let mask = gap_mask(&cfg).unwrap();
        for i in 0..truth.pixels() {
            let expect = if mask.is_missing_index(i) {
                0
            } else {
                truth.band(0)[i]
            };
            assert_eq!(damaged.band(0)[i], expect);
        }
    }

    #[test]
    fn corrupted_file_detected() {
        let tmp = tempfile::tempdir().unwrap();
        let cfg = small(tmp.path());
        let m = build_database(&cfg).unwrap();
        let entry = m.find(Role::Older, 0, 0, None).unwrap();
        let path = m.dir.join(&entry.path);
        let mut bytes = fs::read(&path).unwrap();
        *bytes.last_mut().unwrap() ^= 1;
        fs::write(&path, bytes).unwrap();
        assert!(matches!(
            m.load(Role::Older, 0, 0, None),
            Err(Error::MissingDataset(_))
        ));
        assert!(matches!(
            m.load(Role::LowRes, 0, 0, Some(7)),
            Err(Error::MissingDataset(_))
        ));
    }

    #[test]
    fn missing_manifest_named() {
        let tmp = tempfile::tempdir().unwrap();
        match Manifest::read(tmp.path()) {
            Err(Error::MissingDataset(msg)) => assert!(msg.contains(MANIFEST_NAME)),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn seeds_differ_by_purpose() {
        assert_ne!(derive_seed(1, "older", 0, 0), derive_seed(1, "scene", 0, 0));
        assert_ne!(derive_seed(1, "older", 0, 0), derive_seed(1, "older", 0, 1));
        assert_eq!(derive_seed(1, "older", 2, 3), derive_seed(1, "older", 2, 3));
    }
}
