//! Conditioning-triplet factory for proportion (bounding-box) and
//! perspective (vanishing-line) ControlNets.
//!
//! The crate is organised as the stages of the factory:
//!
//! - [`geometry`]: vanishing-point hypotheses, Manhattan frames, perspective
//!   classification and the strong-perspective filter.
//! - [`segment_detection`]: region-growing line segment detector.
//! - [`conditioning`]: box and vanishing-line rasterization plus the
//!   scene-spec authoring format.
//! - [`model_clients`]: HTTP clients for the aesthetic, caption and grounding
//!   services, and a scripted mock server.
//! - [`pipeline`]: checkpointed, resumable corpus processing and statistics.
//! - [`flow_matching`]: a small, exactly checkable conditional flow-matching
//!   objective with a linear velocity model.

pub mod geometry;
pub mod raster;
pub mod segment_detection;
pub mod synth;
pub mod conditioning;
pub mod model_clients;
pub mod pipeline;
pub mod flow_matching;
