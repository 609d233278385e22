//! Samples, disk IO, synthetic scenes, morphology, augmentation and mask pyramids.

mod augment;
mod io;
mod morphology;
mod plane;
mod pyramid;
mod sample;
mod synth;

pub use augment::{
    apply_geometric, apply_photometric, augment, augment_with, hflip, rotate, sample_rng, AugmentDraw, AugmentSpec,
};
pub use io::{
    list_stems, load_dataset, load_split, read_gray, read_manifest, read_rgb, write_contours, write_gray16,
    write_gray8, write_manifest, write_rgb8, write_split, DepthNorm, LoadOptions, SynthManifest, CONTOUR_DIR,
    DEPTH_DIR, GT_DIR, MANIFEST_FILE, RGB_DIR,
};
pub use morphology::{depth_contour_gt, dilate, erode, StructuringElement, DEFAULT_CONTOUR_WINDOW};
pub use plane::{Plane, RgbImage};
pub use pyramid::{area_downsample, gt_pyramid, mean_pyramid};
pub use sample::{Batch, RgbdSample};
pub use synth::{gen_synth, gen_synth_sample, synth_id, SynthSpec};
