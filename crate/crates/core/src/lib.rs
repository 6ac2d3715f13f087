//! Fuzzy C-Means image segmentation.
//!
//! Two interchangeable engines are provided:
//!
//! * [`fcm`] is the sequential reference. Every sum is accumulated in pixel
//!   index order, which makes it the correctness oracle for everything else.
//! * [`parallel`] decomposes one iteration into per-pixel map kernels and a
//!   block-structured tree reduction that is executed on a rayon pool. The
//!   reduction tree is fixed by the block grid, not by the scheduler, so the
//!   results are bit-identical for any worker count.
//!
//! [`metrics`] evaluates segmentations with the Dice similarity coefficient and
//! [`imgio`] reads and writes PGM rasters, ground-truth masks and enlarged
//! benchmark datasets.
//!
//! ```
//! use pfcm_core::{fcm, FcmConfig, GrayImage};
//!
//! let mut pixels = vec![10.0; 50];
//! pixels.extend(std::iter::repeat(200.0).take(50));
//! let img = GrayImage::new(10, 10, pixels).unwrap();
//! let cfg = FcmConfig { clusters: 2, ..FcmConfig::default() };
//! let result = fcm::run_fcm_sequential(&img, &cfg).unwrap();
//! assert!(result.converged);
//! ```

pub mod error;
pub mod fcm;
pub mod imgio;
pub mod metrics;
pub mod parallel;
mod types;

pub use error::{Error, Result};
pub use types::{ClusterCenters, FcmConfig, FcmResult, GrayImage, LabelMap, MembershipMatrix};
