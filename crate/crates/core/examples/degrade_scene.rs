//! Simulate the inputs of a gap-filling study from one ground-truth scene:
//! strip gaps, an older acquisition and three low-resolution companions.
//!
//! ```text
//! cargo run --example degrade_scene [output-dir]
//! ```
//!
//! Writes band 0 of every product as PGM for quick inspection.

use std::path::Path;

use gapfill::degrade::{apply_gap, make_gap_mask, synth_older, GapSpec, OlderSpec, RrmKind};
use gapfill::harness::SceneModel;
use gapfill::io::{mask_to_raster, write_pgm};
use gapfill::{expand_lowres, Result};

pub fn run(out: &Path) -> Result<()> {
    std::fs::create_dir_all(out)?;
    let truth = SceneModel::new(200, 200, 3, 11).render(0)?;
    let mask = make_gap_mask(&GapSpec::default(), 200, 200)?;
    let damaged = apply_gap(&truth, &mask, 0)?;
    let older = synth_older(
        &truth,
        5,
        &OlderSpec {
            gain: 0.9,
            bias: 12.0,
            noise_sigma: 4.0,
            patch_rate: 0.25,
        },
    )?;
    println!("gap fraction {:.3}", mask.gap_fraction());

    write_pgm(&truth, 0, out.join("truth.pgm"))?;
    write_pgm(&damaged, 0, out.join("damaged.pgm"))?;
    write_pgm(&older, 0, out.join("older.pgm"))?;
    write_pgm(&mask_to_raster(&mask), 0, out.join("mask.pgm"))?;

    for rrm in [
        RrmKind::BlockAverage,
        RrmKind::SmoothResample,
        RrmKind::ShiftedAverage { rows: 3, cols: 2 },
    ] {
        let z = rrm.reduce(&truth, 5)?;
        println!(
            "rrm {}: {}x{} low-resolution pixels",
            rrm.id(),
            z.width(),
            z.height()
        );
        write_pgm(
            &expand_lowres(&z.to_u8(), 5)?,
            0,
            out.join(format!("z{}.pgm", rrm.id())),
        )?;
    }
    Ok(())
}

fn main() {
    let out = std::env::args()
        .nth(1)
        .unwrap_or_else(|| "degrade-out".into());
    if let Err(e) = run(Path::new(&out)) {
        eprintln!("error: {e}");
        std::process::exit(1);
    }
}
