//! Follow K_uu from its own matrix ODE and from RFF features over a long
//! horizon, for both time discretizations.

use hippo_gp::harness::stability::{stability_report, StabilityOptions};
use hippo_gp::hippo::Scheme;

fn main() -> hippo_gp::Result<()> {
    for (scheme, dt) in [(Scheme::Bilinear, 1e-3), (Scheme::ForwardEuler, 0.05)] {
        let opts = StabilityOptions {
            scheme,
            dt,
            horizon: 5.0,
            every: 1.0,
            ..StabilityOptions::default()
        };
        let report = stability_report(&opts)?;
        println!("{scheme:?}, dt = {dt}");
        for p in &report.trajectory {
            let direct = p.direct.map_or("diverged".to_string(), |v| format!("{v:.3e}"));
            println!("  t = {:>5.2}  direct {direct:>10}  rff {:.3e}", p.t, p.rff);
        }
        if let Some(d) = &report.direct_divergence {
            println!("  direct path left the bound at t = {:.3}", d.t);
        }
    }
    Ok(())
}
