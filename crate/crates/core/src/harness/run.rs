use std::collections::BTreeMap;
use std::fs;
use std::io::{Read, Write};
use std::path::Path;

use rayon::prelude::*;

use super::config::{ExperimentConfig, Method};
use super::dataset::{data_dir, gap_mask, Manifest, Role};
use crate::classmap::{kmeans_segment, method_c_with_model, ClassMapOptions, KMeansModel};
use crate::degrade::RrmKind;
use crate::error::{Error, Result};
use crate::fourier::{calibrate_columns, method_a};
use crate::metrics::{
    align_labels, confusion, kappa, match_labels, overall_accuracy, q_index, rmse, EvalRegion,
    MeasureRecord,
};
use crate::raster::{expand_lowres, ClassMap, GapMask, Raster};
use crate::regression::method_b;

pub const RESULTS_HEADER: &str = "method,rrm,image,subimage,region,rmse,q,kappa,oa";
pub const RESULTS_NAME: &str = "results.csv";
pub const PROVENANCE_NAME: &str = "provenance.txt";

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Provenance {
    pub config_hash: String,
    pub seed: u64,
    pub version: String,
}

impl Provenance {
    pub fn of(cfg: &ExperimentConfig) -> Self {
        Self {
            config_hash: cfg.hash(),
            seed: cfg.seed,
            version: env!("CARGO_PKG_VERSION").to_string(),
        }
    }

    pub fn render(&self) -> String {
        format!(
            "config_hash={}\nseed={}\nversion={}\n",
            self.config_hash, self.seed, self.version
        )
    }
}

/// Records in key order plus the provenance of the run that produced them.
#[derive(Debug, Clone, PartialEq)]
pub struct ResultTable {
    pub records: Vec<MeasureRecord>,
    pub provenance: Provenance,
}

fn fmt_measure(v: Option<f64>) -> String {
    v.map_or_else(|| "NA".to_string(), |x| x.to_string())
}

pub fn write_records(records: &[MeasureRecord], mut w: impl Write) -> Result<()> {
    writeln!(w, "{RESULTS_HEADER}")?;
    for r in records {
        writeln!(
            w,
            "{},{},{},{},{},{},{},{},{}",
            r.method,
            r.rrm,
            r.image,
            r.subimage,
            r.region,
            fmt_measure(r.rmse),
            fmt_measure(r.q),
            fmt_measure(r.kappa),
            fmt_measure(r.oa)
        )?;
    }
    Ok(())
}

pub fn read_records(reader: impl Read) -> Result<Vec<MeasureRecord>> {
    let bad = |msg: String| Error::InvalidArgument(format!("results table: {msg}"));
    let mut rdr = csv::Reader::from_reader(reader);
    let header = rdr.headers().map_err(|e| bad(e.to_string()))?;
    if header.iter().ne(RESULTS_HEADER.split(',')) {
        return Err(bad(format!("unexpected header {header:?}")));
    }
    let measure = |s: &str| -> Result<Option<f64>> {
        if s == "NA" {
            Ok(None)
        } else {
            s.parse()
                .map(Some)
                .map_err(|_| bad(format!("bad measure {s:?}")))
        }
    };
    let mut out = Vec::new();
    for row in rdr.records() {
        let row = row.map_err(|e| bad(e.to_string()))?;
        let int = |i: usize| {
            row[i]
                .parse::<usize>()
                .map_err(|_| bad(format!("bad integer {:?}", &row[i])))
        };
        out.push(MeasureRecord {
            method: row[0].to_string(),
            rrm: row[1]
                .parse()
                .map_err(|_| bad(format!("bad rrm {:?}", &row[1])))?,
            image: int(2)?,
            subimage: int(3)?,
            region: row[4].parse()?,
            rmse: measure(&row[5])?,
            q: measure(&row[6])?,
            kappa: measure(&row[7])?,
            oa: measure(&row[8])?,
        });
    }
    Ok(out)
}

impl ResultTable {
    pub fn to_csv_string(&self) -> String {
        let mut buf = Vec::new();
        write_records(&self.records, &mut buf).expect("writing to memory");
        String::from_utf8(buf).expect("ascii output")
    }

    /// Writes the results CSV and the provenance sidecar into `dir`.
    pub fn save(&self, dir: impl AsRef<Path>) -> Result<()> {
        let dir = dir.as_ref();
        fs::create_dir_all(dir)?;
        fs::write(dir.join(RESULTS_NAME), self.to_csv_string())?;
        fs::write(dir.join(PROVENANCE_NAME), self.provenance.render())?;
        Ok(())
    }
}

/// Inputs shared by every cell of one sub-image.
struct Context {
    truth: Raster<u8>,
    damaged: Raster<u8>,
    older_cal: Option<Raster<f64>>,
    low_res: BTreeMap<u8, Raster<u8>>,
    truth_model: KMeansModel,
    damaged_model: Option<KMeansModel>,
}

fn load_context(
    cfg: &ExperimentConfig,
    manifest: &Manifest,
    mask: &GapMask,
    methods: &[Method],
    rrms: &[RrmKind],
    image: usize,
    subimage: usize,
) -> Result<Context> {
    let truth = manifest.load(Role::Truth, image, subimage, None)?;
    let damaged = manifest.load(Role::Damaged, image, subimage, None)?;
    let mut low_res = BTreeMap::new();
    for rrm in rrms {
        low_res.insert(
            rrm.id(),
            manifest.load(Role::LowRes, image, subimage, Some(rrm.id()))?,
        );
    }
    let older_cal = if methods.iter().any(|m| m.cutoff().is_some()) && !mask.is_empty() {
        let older = manifest.load(Role::Older, image, subimage, None)?;
        Some(calibrate_columns(&older, &damaged, mask)?)
    } else {
        None
    };
    let truth_model = kmeans_segment(
        &truth,
        &GapMask::empty(truth.width(), truth.height()),
        cfg.k_classes,
        cfg.seed,
    )?;
    let damaged_model =
        if methods.iter().any(|m| matches!(m, Method::C | Method::C1)) && !mask.is_empty() {
            Some(kmeans_segment(&damaged, mask, cfg.k_classes, cfg.seed)?)
        } else {
            None
        };
    Ok(Context {
        truth,
        damaged,
        older_cal,
        low_res,
        truth_model,
        damaged_model,
    })
}

struct Measures {
    rmse: Option<f64>,
    q: Option<f64>,
    kappa: Option<f64>,
    oa: Option<f64>,
}

fn keep(what: &str, r: Result<f64>) -> Option<f64> {
    r.map_err(|e| log::warn!("{what}: {e}")).ok()
}

fn impute(
    cfg: &ExperimentConfig,
    ctx: &Context,
    mask: &GapMask,
    method: Method,
    rrm: u8,
) -> Result<(Raster<u8>, ClassMap)> {
    let z = &ctx.low_res[&rrm];
    match method {
        Method::A1 | Method::A2 | Method::A3 => {
            let older = ctx
                .older_cal
                .as_ref()
                .expect("calibrated when A is requested");
            let cutoff = method.cutoff().expect("Fourier method");
            let fill = method_a(
                &ctx.damaged,
                mask,
                &expand_lowres(z, cfg.n_z)?,
                older,
                cutoff,
            )?;
            let classes = align_labels(&ctx.truth_model, &fill)?;
            Ok((fill, classes))
        }
        Method::B => {
            let fill = method_b(&ctx.damaged, mask, z, cfg.n_z)?;
            let classes = align_labels(&ctx.truth_model, &fill)?;
            Ok((fill, classes))
        }
        Method::C | Method::C1 => {
            let opts = ClassMapOptions {
                k: cfg.k_classes,
                seed: cfg.seed,
                enhance: method == Method::C,
                window: cfg.sample_window,
            };
            let model = ctx
                .damaged_model
                .clone()
                .expect("segmented when C is requested");
            let out = method_c_with_model(
                &ctx.damaged,
                mask,
                &expand_lowres(z, cfg.n_z)?,
                model,
                &opts,
            )?;
            let map = match_labels(&ctx.truth_model, &out.model)?;
            Ok((out.raster, out.classes.relabel(&map)?))
        }
    }
}

fn evaluate_cell(
    cfg: &ExperimentConfig,
    ctx: &Context,
    mask: &GapMask,
    region: EvalRegion,
    method: Method,
    rrm: u8,
) -> Result<Measures> {
    if mask.is_empty() {
        return Ok(Measures {
            rmse: Some(0.0),
            q: Some(1.0),
            kappa: Some(1.0),
            oa: Some(1.0),
        });
    }
    let (fill, classes) = impute(cfg, ctx, mask, method, rrm)?;
    let reg = region.region(mask);
    let truth_classes = &ctx.truth_model.assignments;
    let label = format!("{method} rrm {rrm}");
    let (kappa_v, oa_v) = match confusion(truth_classes, &classes, reg) {
        Ok(m) => (keep(&label, kappa(&m)), keep(&label, overall_accuracy(&m))),
        Err(e) => {
            log::warn!("{label}: {e}");
            (None, None)
        }
    };
    Ok(Measures {
        rmse: keep(&label, rmse(&ctx.truth, &fill, reg)),
        q: keep(&label, q_index(&ctx.truth, &fill, cfg.q_window, reg)),
        kappa: kappa_v,
        oa: oa_v,
    })
}

/// Runs every (method, rrm, image, subimage) cell over a built dataset.
/// Failed cells are kept as records with missing measures.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ResultTable> {
    cfg.validate()?;
    let manifest = Manifest::read(data_dir(cfg))?;
    let methods = cfg.method_list()?;
    let rrms = cfg.rrm_list()?;
    let region = cfg.eval_region()?;
    let mask = gap_mask(cfg)?;

    let subimages: Vec<(usize, usize)> = (0..cfg.image_count())
        .flat_map(|i| (0..cfg.subimages_per_image).map(move |j| (i, j)))
        .collect();
    let cells: Vec<(Method, u8)> = methods
        .iter()
        .flat_map(|&m| rrms.iter().map(move |r| (m, r.id())))
        .collect();

    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.threads)
        .build()
        .map_err(|e| Error::Config(e.to_string()))?;
    let mut records: Vec<MeasureRecord> = pool.install(|| {
        subimages
            .par_iter()
            .flat_map_iter(|&(image, subimage)| {
                let ctx = load_context(cfg, &manifest, &mask, &methods, &rrms, image, subimage);
                if let Err(e) = &ctx {
                    log::warn!("image {image} subimage {subimage}: {e}");
                }
                let cells_out: Vec<MeasureRecord> = cells
                    .par_iter()
                    .map(|&(method, rrm)| {
                        let measures = match &ctx {
                            Ok(ctx) => evaluate_cell(cfg, ctx, &mask, region, method, rrm),
                            Err(e) => Err(Error::InvalidArgument(e.to_string())),
                        };
                        let measures = measures.unwrap_or_else(|e| {
                            log::warn!("{method} rrm {rrm} image {image} subimage {subimage}: {e}");
                            Measures {
                                rmse: None,
                                q: None,
                                kappa: None,
                                oa: None,
                            }
                        });
                        MeasureRecord {
                            method: method.to_string(),
                            rrm,
                            image,
                            subimage,
                            region,
                            rmse: measures.rmse,
                            q: measures.q,
                            kappa: measures.kappa,
                            oa: measures.oa,
                        }
                    })
                    .collect();
                cells_out
            })
            .collect()
    });

    let order = |name: &str| methods.iter().position(|m| m.as_str() == name);
    records.sort_by(|a, b| {
        (order(&a.method), a.rrm, a.image, a.subimage).cmp(&(
            order(&b.method),
            b.rrm,
            b.image,
            b.subimage,
        ))
    });
    Ok(ResultTable {
        records,
        provenance: Provenance::of(cfg),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn record(method: &str, rmse: Option<f64>) -> MeasureRecord {
        MeasureRecord {
            method: method.into(),
            rrm: 2,
            image: 1,
            subimage: 3,
            region: EvalRegion::Gap,
            rmse,
            q: Some(0.1 + 0.2),
            kappa: Some(-0.25),
            oa: None,
        }
    }

    #[test]
    fn csv_roundtrip_is_exact() {
        let records = vec![record("B", Some(18.09)), record("C1", None)];
        let mut buf = Vec::new();
        write_records(&records, &mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("method,rrm,image,subimage,region,rmse,q,kappa,oa\n"));
        assert!(text.contains("B,2,1,3,gap,18.09,0.30000000000000004,-0.25,NA\n"));
        assert_eq!(read_records(buf.as_slice()).unwrap(), records);
    }

    #[test]
    fn bad_header_rejected() {
        assert!(read_records("method,rrm\nB,0\n".as_bytes()).is_err());
    }
}
