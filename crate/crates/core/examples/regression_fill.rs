//! Per-offset regression of the damaged image on its low-resolution
//! companion, fitted over blocks untouched by the gap.

use gapfill::degrade::{apply_gap, make_gap_mask, GapSpec, RrmKind};
use gapfill::harness::SceneModel;
use gapfill::metrics::{rmse, Region};
use gapfill::regression::{apply_field, fit_field};
use gapfill::Result;

pub fn run() -> Result<()> {
    let truth = SceneModel::new(200, 200, 3, 8).render(0)?;
    let mask = make_gap_mask(&GapSpec::default(), 200, 200)?;
    let damaged = apply_gap(&truth, &mask, 0)?;

    for rrm in [
        RrmKind::BlockAverage,
        RrmKind::SmoothResample,
        RrmKind::ShiftedAverage { rows: 3, cols: 2 },
    ] {
        let z = rrm.reduce(&truth, 5)?;
        let field = fit_field(&damaged, &mask, &z, 5)?;
        let centre = field.get(0, 2, 2);
        let corner = field.get(0, 0, 0);
        let filled = apply_field(&damaged, &mask, &z, &field)?;
        println!(
            "rrm {}: {} valid blocks, centre {:.3}z{:+.1}, corner {:.3}z{:+.1}, gap RMSE {:.2}",
            rrm.id(),
            centre.n_valid,
            centre.alpha,
            centre.beta,
            corner.alpha,
            corner.beta,
            rmse(&truth, &filled, Region::Gap(&mask))?
        );
    }
    Ok(())
}

fn main() {
    if let Err(e) = run() {
        eprintln!("error: {e}");
        std::process::exit(1);
    }
}
