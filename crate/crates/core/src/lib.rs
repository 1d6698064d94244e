//! Closed loop bipedal gait control: a central pattern generator, fused
//! angle feedback, feed-forward actuator compensation and LQR gain tuning,
//! with deterministic desk-scale plants to exercise them.
//!
//! Every numeric type is generic over [`scalar::Real`] (`f32` or `f64`);
//! the aliases below fix the scalar to `f64`.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod actuator_ff;
pub mod cpg;
pub mod error;
pub mod estimation;
pub mod feedback;
pub mod filters;
pub mod geometry;
pub mod pose_spaces;
pub mod scalar;
pub mod sim_harness;
pub mod tuning;

pub use error::{Error, Result};
pub use scalar::Real;

pub type Vec3 = geometry::Vec3<f64>;
pub type Mat3 = geometry::Mat3<f64>;
pub type Quat = geometry::Quat<f64>;
pub type SoftBounds = filters::SoftBounds<f64>;
pub type WlbfFilter = filters::WlbfFilter<f64>;
pub type EwIntegrator = filters::EwIntegrator<f64>;
pub type JointPose = pose_spaces::JointPose<f64>;
pub type AbstractPose = pose_spaces::AbstractPose<f64>;
pub type InversePose = pose_spaces::InversePose<f64>;
pub type KinematicConfig = pose_spaces::KinematicConfig<f64>;
pub type GaitConfig = cpg::GaitConfig<f64>;
pub type Cpg = cpg::Cpg<f64>;
pub type FusedAngles = estimation::FusedAngles<f64>;
pub type FeedbackConfig = feedback::FeedbackConfig<f64>;
pub type FeedbackPipeline = feedback::FeedbackPipeline<f64>;
pub type GainsMatrix = feedback::GainsMatrix<f64>;
pub type ServoModel = actuator_ff::ServoModel<f64>;
pub type RigidBodyModel = actuator_ff::RigidBodyModel<f64>;
pub type StateSpaceModel = tuning::StateSpaceModel<f64>;
pub type LqrWeights = tuning::LqrWeights<f64>;
pub type SimConfig = sim_harness::SimConfig<f64>;
pub type Plants = sim_harness::Plants<f64>;

/// Single precision aliases.
pub mod f32 {
    use super::*;

    pub type Vec3 = geometry::Vec3<f32>;
    pub type Quat = geometry::Quat<f32>;
    pub type AbstractPose = pose_spaces::AbstractPose<f32>;
    pub type JointPose = pose_spaces::JointPose<f32>;
    pub type FusedAngles = estimation::FusedAngles<f32>;
    pub type FeedbackPipeline = feedback::FeedbackPipeline<f32>;
    pub type StateSpaceModel = tuning::StateSpaceModel<f32>;
    pub type SimConfig = sim_harness::SimConfig<f32>;
}
