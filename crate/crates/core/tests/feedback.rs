mod common;

use fused_gait::cpg::{generate_pose, update_phase, GaitCommand, GaitConfig};
use fused_gait::estimation::{expected_attitude, AxisCycle};
use fused_gait::estimation::FusedAngles;
use fused_gait::feedback::{
    activations, apply_corrective_actions, support_foot_weight, timing_feedback, virtual_slope_angle, ActionConfig,
    ActivationVector, FeatureToggles, FeedbackConfig, FeedbackPipeline, FeedbackVector, GainsMatrix, PlanePair, TimingGains,
    VirtualSlopeGains,
};
use fused_gait::geometry::Vec3;
use fused_gait::pose_spaces::Side;
use proptest::prelude::*;
use std::f64::consts::PI;

fn gains_strategy() -> impl Strategy<Value = GainsMatrix<f64>> {
    prop::array::uniform5(prop::array::uniform6(-2.0f64..2.0)).prop_map(GainsMatrix)
}

fn vector_strategy() -> impl Strategy<Value = FeedbackVector<f64>> {
    prop::array::uniform6(-1.0f64..1.0).prop_map(FeedbackVector)
}

fn limit_cycle_config() -> FeedbackConfig<f64> {
    let mut cfg = FeedbackConfig::<f64> { gains_matrix: GainsMatrix([[1.0; 6]; 5]), ..Default::default() };
    cfg.limit_cycle.roll = AxisCycle { offset: 0.0, amplitude: 0.04, phase_shift: 0.3 };
    cfg.limit_cycle.pitch = AxisCycle { offset: 0.02, amplitude: 0.01, phase_shift: -0.2 };
    cfg
}

#[test]
fn pipeline_is_silent_on_the_limit_cycle() {
    let cfg = limit_cycle_config();
    let model = cfg.limit_cycle;
    let mut p = FeedbackPipeline::new(cfg, FeatureToggles::default(), 0.01).unwrap();
    let mut mu = 0.0;
    for i in 0..300 {
        let e = expected_attitude(mu, &model);
        let fused = FusedAngles { pitch: e.pitch, roll: e.roll, ..Default::default() };
        let out = p.tick(&fused, mu, i as f64 * 0.01, 2.0, 3.0, 0.2).unwrap();
        assert_eq!(out.e.0, [0.0; 6]);
        assert!(out.u.is_zero());
        assert_eq!(out.f_g, 2.0);
        mu = update_phase(mu, 2.0, 0.01);
    }
}

#[test]
fn pipeline_is_quadratically_small_inside_deadbands() {
    let mut cfg = limit_cycle_config();
    cfg.gains.ki = PlanePair::splat(0.0);
    let model = cfg.limit_cycle;
    let g = cfg.gains;
    let toggles = FeatureToggles { timing: false, virtual_slope: false, ..FeatureToggles::default() };
    let mut p = FeedbackPipeline::new(cfg, toggles, 0.01).unwrap();
    let mut mu = 0.0;
    let amp = 0.005;
    for i in 0..300 {
        let t = i as f64 * 0.01;
        let small = amp * (t * 3.0).sin();
        let e = expected_attitude(mu, &model);
        let fused = FusedAngles { pitch: e.pitch + small, roll: e.roll - small, ..Default::default() };
        let out = p.tick(&fused, mu, t, 2.0, 3.0, 0.2).unwrap();
        // deviation and its slope stay below twice the radii, so only the quadratic branch applies
        let p_bound = g.kp.x * amp * amp / (4.0 * g.deadband_p.x);
        let d_bound = g.kd.x * (3.0 * amp).powi(2) / (4.0 * g.deadband_d.x);
        assert!(out.e.proportional().x.abs() <= p_bound && out.e.proportional().y.abs() <= p_bound);
        assert!(out.e.derivative().x.abs() <= 1.5 * d_bound && out.e.derivative().y.abs() <= 1.5 * d_bound);
        mu = update_phase(mu, 2.0, 0.01);
    }
}

#[test]
fn pipeline_responds_outside_deadband() {
    let cfg = FeedbackConfig::<f64> { gains_matrix: GainsMatrix([[1.0; 6]; 5]), ..Default::default() };
    let toggles = FeatureToggles { timing: false, virtual_slope: false, ..FeatureToggles::default() };
    let mut p = FeedbackPipeline::new(cfg, toggles, 0.01).unwrap();
    let fused = FusedAngles { pitch: 0.1, ..Default::default() };
    let mut last = None;
    for i in 0..20 {
        last = Some(p.tick(&fused, 0.0, i as f64 * 0.01, 2.0, 3.0, 0.2).unwrap());
    }
    let out = last.unwrap();
    assert!((out.e.proportional().y - 0.09).abs() < 1e-12);
    assert_eq!(out.e.proportional().x, 0.0);
    assert!(out.e.integral().y > 0.0);
}

#[test]
fn support_foot_fade_is_exclusive() {
    let n = 100_000;
    for i in 0..n {
        let mu = -PI + 2.0 * PI * i as f64 / n as f64;
        let l = support_foot_weight(mu, Side::Left, 0.2, PI * 0.1);
        let r = support_foot_weight(mu, Side::Right, 0.2, PI * 0.1);
        assert!(l * r == 0.0, "both feet active at {mu}");
        assert!((0.0..=1.0).contains(&l) && (0.0..=1.0).contains(&r));
    }
    assert_eq!(support_foot_weight(PI / 2.0, Side::Right, 0.2, PI * 0.1), 1.0);
}

#[test]
fn virtual_slope_scales_by_direction() {
    let g = VirtualSlopeGains::<f64> { deadband: 0.02, scale_with: 1.0, scale_against: 0.25, gain: 1.0 };
    assert_eq!(virtual_slope_angle(0.01, 1.0, &g), 0.0);
    assert!((virtual_slope_angle(0.12, 1.0, &g) - 0.1).abs() < 1e-12);
    assert!((virtual_slope_angle(-0.12, 1.0, &g) + 0.025).abs() < 1e-12);
    assert!((virtual_slope_angle(-0.12, -1.0, &g) + 0.1).abs() < 1e-12);
}

proptest! {
    #[test]
    fn activation_is_linear(k in gains_strategy(), a in vector_strategy(), b in vector_strategy(), s in -3.0f64..3.0) {
        let combo = FeedbackVector(std::array::from_fn(|j| a.0[j] + s * b.0[j]));
        let ua = activations(&k, &a);
        let ub = activations(&k, &b);
        let uc = activations(&k, &combo);
        for i in 0..5 {
            prop_assert!((uc.combined[i] - (ua.combined[i] + s * ub.combined[i])).abs() < 1e-12);
            prop_assert!((uc.lateral[i] + uc.sagittal[i] - uc.combined[i]).abs() < 1e-12);
            let direct: f64 = (0..6).map(|j| k.0[i][j] * a.0[j]).sum();
            prop_assert!((ua.combined[i] - direct).abs() < 1e-12);
        }
    }

    #[test]
    fn corrected_outputs_stay_inside_bounds(
        lat in prop::array::uniform5(-100.0f64..100.0),
        sag in prop::array::uniform5(-100.0f64..100.0),
        mu in -PI..PI, vx in -1.0f64..1.0,
    ) {
        let gait_cfg = GaitConfig::default();
        let cmd = GaitCommand { velocity: Vec3::new(vx, 0.0, 0.0), ..Default::default() };
        let gait = generate_pose(&cmd, mu, &gait_cfg);
        let u = ActivationVector { combined: [0.0; 5], lateral: lat, sagittal: sag };
        let a = ActionConfig::default();
        let adj = apply_corrective_actions(&gait, &u, mu, gait_cfg.mu_ds, &a);
        let inside = |v: f64, b: &fused_gait::SoftBounds| v > b.min() && v < b.max();
        for side in [Side::Left, Side::Right] {
            let leg = adj.pose.leg(side);
            let arm = match side { Side::Left => adj.pose.left_arm, Side::Right => adj.pose.right_arm };
            prop_assert!(inside(leg.angle_x, &a.leg_angle_bounds) && inside(leg.angle_y, &a.leg_angle_bounds));
            prop_assert!(inside(leg.foot_angle_x, &a.foot_angle_bounds) && inside(leg.foot_angle_y, &a.foot_angle_bounds));
            prop_assert!(inside(arm.angle_x, &a.arm_angle_bounds) && inside(arm.angle_y, &a.arm_angle_bounds));
            prop_assert!((0.0..=1.0).contains(&leg.extension));
        }
        prop_assert!(inside(adj.com_shift.x, &a.com_shift_bounds) && inside(adj.com_shift.y, &a.com_shift_bounds));
    }

    #[test]
    fn timing_frequency_in_range(d in -1.0f64..1.0, mu in -PI..PI, k_tw in 1.0f64..5.0) {
        let g = TimingGains { k_tw, ..TimingGains::default() };
        let f = timing_feedback(d, mu, &g, 2.0, 3.0, 0.2).unwrap();
        prop_assert!((0.0..=3.0).contains(&f));
        if d == 0.0 {
            prop_assert_eq!(f, 2.0);
        }
    }
}
