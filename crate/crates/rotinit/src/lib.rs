//! Rotation-first visual-inertial initialization.
//!
//! This crate estimates the two rotation-related unknowns that make or break
//! a visual-inertial odometry start-up — the gyroscope bias and the
//! camera-IMU extrinsic orientation — directly from gyroscope measurements
//! and bearing-vector correspondences, without waiting for translation
//! parallax. The building blocks:
//!
//! - [`manifold`]: SO(3) exp/log maps, right Jacobians, boxplus/boxminus.
//! - [`preintegration`]: gyroscope-only rotation preintegration with bias
//!   Jacobians and noise covariance, in the IMU and camera frames.
//! - [`epipolar`]: bearing vectors with unscented-transform covariance,
//!   epipolar-plane normals, and the minimum-eigenvalue machinery.
//! - [`solver`]: the joint bias/extrinsic estimator — weighted IRLS over
//!   per-pair minimum-eigenvalue residuals with chi-square gating, failure
//!   detection, and a Fisher-information covariance.
//! - [`refiner`]: sliding-window MAP refinement via an iterated error-state
//!   Kalman update that accumulates rotation information before translation
//!   excitation arrives.
//! - [`sim`] and [`dataset`]: a deterministic synthetic sensor world plus
//!   on-disk dataset formats (and EuRoC-style ingestion).
//! - [`window`]: assembly of solver-ready window problems from datasets.
//!
//! See the mdBook guide under `book/` for a narrative walkthrough; its code
//! snippets are compiled as doc-tests.

pub mod dataset;
pub mod epipolar;
pub mod kv;
pub mod manifold;
pub mod preintegration;
pub mod refiner;
pub mod sim;
pub mod solver;
pub mod stats;
pub mod window;

pub use manifold::Rotation;
