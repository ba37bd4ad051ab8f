//! Simulated prosthetic vision toolkit.
//!
//! The crate turns video frames into electrode amplitudes through four scene
//! simplification strategies, renders what an implant user would see with the
//! axon-map phosphene model, and analyzes detection experiments run on the
//! rendered clips.
//!
//! - [`retina`]: retinal geometry and nerve-fiber-bundle trajectories
//! - [`render`]: electrode grids, brute-force and precomputed phosphene renderers
//! - [`scene`]: saliency / depth / segmentation / combination strategies and amplitude encoding
//! - [`netpbm`]: PGM, PPM and PFM frame files
//! - [`dataset`]: stimulus catalogs and the synthetic clip generator
//! - [`psych`]: session design, signal-detection metrics, bootstrap and FDR statistics
//! - [`exec`]: sequential / data-parallel loop dispatch

pub mod dataset;
pub mod exec;
pub mod render;
pub mod netpbm;
pub mod psych;
pub mod retina;
pub mod scene;

pub use exec::Exec;
