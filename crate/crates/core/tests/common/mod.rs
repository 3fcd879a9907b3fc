#![allow(dead_code)]

use iernn::harness::{SchemeConfig, TrackingConfig};
use iernn::paths::{PathShape, PathSpec, Timing};
use iernn::robot::{forward_kinematics, preset};
use iernn::schemes::{HybridTorqueParams, RepetitiveMotionParams};
use iernn::{NoiseModel, Variant};
use nalgebra::{dvector, DVector};

pub const PERIOD: f64 = 8.0;

fn anchored(shape: PathShape, start: &DVector<f64>, scale: f64, period: f64) -> PathSpec {
    let (e1, e2) = if start.len() == 3 {
        (dvector![1.0, 0.0, 0.0], dvector![0.0, 1.0, 0.0])
    } else {
        (dvector![1.0, 0.0], dvector![0.0, 1.0])
    };
    PathSpec::anchored(shape, start, scale, period, Timing::Smoothstart, e1, e2).unwrap()
}

fn finish(scheme: SchemeConfig, variant: Variant, noisy: bool) -> TrackingConfig {
    let dim = scheme.chain().n_joints() + scheme.chain().task_dim();
    let mut cfg = TrackingConfig::new(scheme);
    cfg.solver.variant = variant;
    if noisy {
        cfg.noise = NoiseModel::paper_sinusoid(cfg.duration, dim, false);
    }
    cfg
}

/// Repetitive motion on the six-joint arm along a 0.1 m starfish.
pub fn starfish_rm(variant: Variant, noisy: bool) -> TrackingConfig {
    let chain = preset("spatial6").unwrap();
    let theta0 = dvector![1.675, 2.843, -3.216, 4.187, -1.710, -2.650];
    let path = anchored(PathShape::starfish(), &forward_kinematics(&chain, &theta0), 0.1, PERIOD);
    let mut params = RepetitiveMotionParams::new(chain, path, theta0);
    params.feedback_gain = 1.2;
    finish(SchemeConfig::RepetitiveMotion(params), variant, noisy)
}

/// Hybrid torque on the planar three-link arm along a 0.3 m butterfly.
pub fn butterfly_ht(variant: Variant, noisy: bool) -> TrackingConfig {
    let chain = preset("planar3").unwrap();
    let theta0 = dvector![0.6, 1.0, 0.9];
    let path = anchored(PathShape::Butterfly, &forward_kinematics(&chain, &theta0), 0.3, PERIOD);
    let mut params = HybridTorqueParams::new(chain, path, theta0);
    params.alpha = 2.0;
    params.beta = 1.0;
    finish(SchemeConfig::HybridTorque(params), variant, noisy)
}

/// Repetitive motion on the planar three-link arm along a 0.3 m circle.
pub fn circle_rm(variant: Variant, period: f64) -> TrackingConfig {
    let chain = preset("planar3").unwrap();
    let theta0 = dvector![0.4, 0.9, 0.7];
    let path = anchored(PathShape::Circle, &forward_kinematics(&chain, &theta0), 0.3, period);
    finish(
        SchemeConfig::RepetitiveMotion(RepetitiveMotionParams::new(chain, path, theta0)),
        variant,
        false,
    )
}

/// `min ½‖x‖²` subject to `x₁ + x₂ = 2`; KKT solution `(1, 1, −1)`.
pub fn constant_qp() -> iernn::FnQp {
    use nalgebra::dmatrix;
    iernn::FnQp::constant(
        dmatrix![1.0, 0.0; 0.0, 1.0],
        dvector![0.0, 0.0],
        dmatrix![1.0, 1.0],
        dvector![2.0],
    )
}
