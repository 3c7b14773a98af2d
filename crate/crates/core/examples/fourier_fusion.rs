//! Fourier fusion: low frequencies from the low-resolution companion, high
//! frequencies from a calibrated older image.

use gapfill::degrade::{apply_gap, make_gap_mask, rrm0_block_average, GapSpec};
use gapfill::fourier::{calibrate_columns, ideal_filters, method_a, CutoffSpec};
use gapfill::harness::SceneModel;
use gapfill::metrics::{rmse, Region};
use gapfill::{expand_lowres, Result};

pub fn run() -> Result<()> {
    let scene = SceneModel::new(160, 160, 3, 4);
    let truth = scene.render(0)?;
    // A later epoch of the same scene stands in for the older acquisition.
    let older = scene.render(1)?;
    let mask = make_gap_mask(&GapSpec::default(), 160, 160)?;
    let damaged = apply_gap(&truth, &mask, 0)?;
    let z = expand_lowres(&rrm0_block_average(&truth, 5)?, 5)?;
    let older_cal = calibrate_columns(&older, &damaged, &mask)?;

    let band: Vec<f64> = truth.to_real().band(0).to_vec();
    let (low, high) = ideal_filters(&band, 160, 160, CutoffSpec::A2)?;
    let worst = band
        .iter()
        .zip(low.data.iter().zip(&high.data))
        .map(|(x, (l, h))| (x - l - h).abs())
        .fold(0.0, f64::max);
    println!("low + high reconstructs band 0 within {worst:.2e}");

    for (name, cutoff) in [
        ("A1", CutoffSpec::A1),
        ("A2", CutoffSpec::A2),
        ("A3", CutoffSpec::A3),
    ] {
        let filled = method_a(&damaged, &mask, &z, &older_cal, cutoff)?;
        let err = rmse(&truth, &filled, Region::Gap(&mask))?;
        println!("{name} (cutoff {}): gap RMSE {err:.2}", cutoff.fraction());
    }
    Ok(())
}

fn main() {
    if let Err(e) = run() {
        eprintln!("error: {e}");
        std::process::exit(1);
    }
}
