//! Synthetic mmWave SAR sensing and multi-object point-cloud reconstruction.
//!
//! The crate covers the whole chain: mesh scenes, FMCW SAR simulation with
//! hover vibration, depth rendering and segmentation, point-cloud
//! utilities, Chamfer / EMD metrics, a small trainable refiner, and the two
//! end-to-end pipelines (joint vs. segment-then-merge).
//!
//! ```
//! use mmrecon::metrics::chamfer;
//! use mmrecon::pointcloud::PointCloud;
//! use mmrecon::geometry::Vec3;
//!
//! let a = PointCloud::new(vec![Vec3::new(0.0, 0.0, 0.0), Vec3::new(1.0, 0.0, 0.0)]);
//! let b = PointCloud::new(vec![Vec3::new(0.0, 0.0, 0.0), Vec3::new(0.0, 1.0, 0.0)]);
//! assert_eq!(chamfer(&a, &b).unwrap(), 1.0);
//! ```

pub mod error;
pub mod geometry;
pub mod imaging;
pub mod metrics;
pub mod pipeline;
pub mod ply;
pub mod pointcloud;
pub mod radar;
pub mod raycast;
pub mod reconstruct;
pub mod scene;
pub mod seed;
pub mod spatial;

pub use error::{Error, Result};
