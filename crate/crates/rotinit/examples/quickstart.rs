//! Minimal end-to-end run: synthesize a scene, deform the calibration,
//! solve one window, then refine across the pure-rotation phase.
//!
//! cargo run --release -p rotinit --example quickstart

use nalgebra::Vector3;
use rotinit::manifold;
use rotinit::refiner::{run_sequence, SequenceConfig};
use rotinit::sim::{generate, ScenarioConfig};
use rotinit::solver::{solve, CalibState, SolverConfig};
use rotinit::window::{assemble_window, WindowConfig};

fn main() {
    let scenario = ScenarioConfig {
        seed: 7,
        duration: 50.0,
        pure_rotation_prefix: 25.0,
        pixel_noise: 0.5,
        gyro_bias: Vector3::new(0.02, -0.01, 0.015),
        ..Default::default()
    };
    let dataset = generate(&scenario).expect("scene generation");

    let axis = Vector3::new(-1.0, 0.5, 2.0).normalize();
    let stale = manifold::boxplus(&dataset.extrinsic, &(axis * 10f64.to_radians()));

    let mut window = assemble_window(&dataset, &WindowConfig::new(0, 10)).unwrap();
    let report = solve(
        &mut window,
        CalibState::new(Vector3::zeros(), stale),
        &SolverConfig::default(),
    );
    println!(
        "initial solve: success={} pass_rate={:.3} extrinsic_err={:.3} deg bias_err={:.2e} rad/s ({:.1} ms)",
        report.success,
        report.pass_rate,
        report.state.extrinsic.angle_to(&dataset.extrinsic).to_degrees(),
        (report.state.gyro_bias - scenario.gyro_bias).norm(),
        report.timing.total_ms,
    );

    let records = run_sequence(&dataset, 0, &report, &SequenceConfig::default()).unwrap();
    let last = records.last().unwrap();
    println!(
        "after {} refinement windows (stopped at t={:.2} s on {:.2} deg parallax):",
        records.len(),
        last.t,
        last.parallax_deg,
    );
    println!(
        "  extrinsic_err={:.4} deg bias_err={:.2e} rad/s",
        last.extrinsic_error_deg.unwrap(),
        last.bias_error.unwrap().norm(),
    );
}
