//! Class-map imputation: segment the damaged image, clean the map, label
//! the gap from the low-resolution companion and resample radiometry from
//! same-class neighbours.

use gapfill::classmap::{enhance_with_sets, kmeans_segment, method_c_with_model, ClassMapOptions};
use gapfill::degrade::{apply_gap, make_gap_mask, rrm0_block_average, GapSpec};
use gapfill::harness::SceneModel;
use gapfill::metrics::{confusion, kappa, match_labels, overall_accuracy, rmse, Region};
use gapfill::{expand_lowres, GapMask, Result};

pub fn run() -> Result<()> {
    let truth = SceneModel::new(150, 150, 3, 21).render(0)?;
    let mask = make_gap_mask(&GapSpec::default(), 150, 150)?;
    let damaged = apply_gap(&truth, &mask, 0)?;
    let z = expand_lowres(&rrm0_block_average(&truth, 5)?, 5)?;

    let reference = kmeans_segment(&truth, &GapMask::empty(150, 150), 5, 1)?;
    let model = kmeans_segment(&damaged, &mask, 5, 1)?;
    let (_, sets) = enhance_with_sets(&model.assignments, &damaged, &mask)?;
    println!(
        "k-means: {} iterations, {} lonely pixels, {} mode disagreements",
        model.iterations_run,
        sets.n_g.len(),
        sets.n_m.len()
    );

    for enhance in [true, false] {
        let opts = ClassMapOptions {
            k: 5,
            seed: 1,
            enhance,
            window: 3,
        };
        let out = method_c_with_model(&damaged, &mask, &z, model.clone(), &opts)?;
        let classes = out
            .classes
            .relabel(&match_labels(&reference, &out.model)?)?;
        let m = confusion(&reference.assignments, &classes, Region::Gap(&mask))?;
        println!(
            "{}: gap RMSE {:.2}, OA {:.3}, kappa {:.3}",
            if enhance { "C " } else { "C1" },
            rmse(&truth, &out.raster, Region::Gap(&mask))?,
            overall_accuracy(&m)?,
            kappa(&m)?
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
