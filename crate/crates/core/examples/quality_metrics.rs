//! The four performance measures on small hand-made inputs.

use gapfill::metrics::{kappa, overall_accuracy, q_index_detail, rmse, ConfusionMatrix, Region};
use gapfill::{GapMask, Raster, Result};

pub fn run() -> Result<()> {
    let y = Raster::from_fn(16, 16, 2, |b, r, c| (40 + 10 * b + 3 * r + 2 * c) as u8)?;
    let w = Raster::from_fn(16, 16, 2, |b, r, c| {
        (42 + 10 * b + 3 * r + 2 * c - (r % 3)) as u8
    })?;
    let gap = GapMask::from_fn(16, 16, |r, _| (4..8).contains(&r));

    println!(
        "RMSE full {:.3}, gap {:.3}",
        rmse(&y, &w, Region::Full)?,
        rmse(&y, &w, Region::Gap(&gap))?
    );
    let q = q_index_detail(&y, &w, 8, Region::Full)?;
    println!(
        "Q {:.4} over {} windows ({} degenerate)",
        q.q, q.windows, q.degenerate
    );
    println!(
        "Q of an image with itself: {}",
        q_index_detail(&y, &y, 8, Region::Full)?.q
    );

    let m = ConfusionMatrix::from_counts(vec![vec![40, 10], vec![10, 40]])?;
    println!("OA {:.2}, kappa {:.2}", overall_accuracy(&m)?, kappa(&m)?);
    Ok(())
}

fn main() {
    if let Err(e) = run() {
        eprintln!("error: {e}");
        std::process::exit(1);
    }
}
