//! Lung lesion segmentation post-processing, evaluation, radiomic feature
//! extraction and survival classification on volumetric CT data.

pub mod config;
pub mod error;
pub mod learn;
pub mod maskio;
pub mod radiomics;
pub mod segeval;
pub mod segpost;
pub mod synth;
pub mod volgrid;

pub use error::{Error, Result};
pub use volgrid::{DiscretizedRoi, Grid, LabelMask, ProbabilityMap, Volume3D, VoxelGeometry};
