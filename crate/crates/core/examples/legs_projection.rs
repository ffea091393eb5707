//! Compress a signal online into LegS coefficients, then rebuild it.
//!
//! The reconstruction error shrinks as the number of coefficients grows.

use hippo_gp::hippo::{evolve_coefficients, reconstruct_signal, CoefficientState, HippoOperator, Scheme};

fn main() -> hippo_gp::Result<()> {
    let dt = 1e-3;
    let steps = 2000;
    let f = |t: f64| (3.0 * t).sin() + 0.4 * (11.0 * t).cos();
    let signal: Vec<f64> = (1..=steps).map(|k| f(k as f64 * dt)).collect();
    let grid: Vec<f64> = (0..=200).map(|i| i as f64 * 0.01).collect();

    println!("{:>6} {:>12}", "order", "rms error");
    for order in [4, 8, 16, 32] {
        let op = HippoOperator::new(order, Scheme::Bilinear, dt)?;
        let start = CoefficientState::initial(order, 1, dt, signal[0]);
        let state = evolve_coefficients(&op, &signal, 1, 1, &start.c)?;
        let rebuilt = reconstruct_signal(&state, &grid)?;
        let mse = grid.iter().zip(&rebuilt).map(|(t, r)| (f(*t) - r).powi(2)).sum::<f64>() / grid.len() as f64;
        println!("{order:>6} {:>12.3e}", mse.sqrt());
    }
    Ok(())
}
