//! The guide's chapters, compiled so that their snippets run as doc-tests.

#[doc = include_str!("../../../book/src/introduction.md")]
pub mod ch01_introduction {}
#[doc = include_str!("../../../book/src/radar.md")]
pub mod ch02_radar {}
#[doc = include_str!("../../../book/src/imaging.md")]
pub mod ch03_imaging {}
#[doc = include_str!("../../../book/src/pointclouds.md")]
pub mod ch04_pointclouds {}
#[doc = include_str!("../../../book/src/metrics.md")]
pub mod ch05_metrics {}
#[doc = include_str!("../../../book/src/refiner.md")]
pub mod ch06_refiner {}
#[doc = include_str!("../../../book/src/experiments.md")]
pub mod ch07_experiments {}
