//! Imputation of large gaps in multi-band raster imagery.
//!
//! Three methods fill a damaged image `x_d` given a co-registered,
//! temporally accurate lower-resolution image `z`:
//!
//! * [`fourier::method_a`]: low frequencies of `z` fused with high
//!   frequencies of a calibrated older image.
//! * [`regression::method_b`]: per within-block position least squares of
//!   `x_d` on `z` over undamaged blocks.
//! * [`classmap::method_c`]: K-means class map, class-zero labeling from
//!   `z`, and radiometry sampled from same-class neighbors.
//!
//! [`degrade`] simulates the study inputs, [`metrics`] scores
//! reconstructions and [`harness`] runs the full factorial experiment.

pub mod classmap;
pub mod cli;
pub mod degrade;
pub mod error;
pub mod fourier;
pub mod harness;
pub mod io;
pub mod metrics;
pub mod raster;
pub mod regression;

pub use error::{Error, Result};
pub use raster::{crop, expand_lowres, quantize, BlockGrid, ClassMap, GapMask, Raster, Sample};
