//! Integrate the cart-pole plant directly: energy drift of the two
//! integrators over 1000 unforced steps, and one step against a fine
//! reference.
//!
//!     cargo run --example cartpole_physics

use rwrl::envs::cartpole::{integrate, mechanical_energy, Integrator};
use rwrl::envs::{CartPoleParams, CartPoleState};

fn main() -> rwrl::Result<()> {
    let params = CartPoleParams { mu_track: 0.0, ..CartPoleParams::default() };
    let start = CartPoleState::new(0.0, 0.3, 0.4, -0.5);

    for (name, integrator) in [("rk4", Integrator::Rk4), ("semi-implicit euler", Integrator::SemiImplicitEuler)] {
        let mut s = start;
        let e0 = mechanical_energy(&s, &params);
        let mut worst: f64 = 0.0;
        for _ in 0..1000 {
            let before = mechanical_energy(&s, &params);
            s = integrate(&s, 0.0, &params, integrator, 4)?;
            let after = mechanical_energy(&s, &params);
            worst = worst.max(((after - before) / before.abs().max(1e-12)).abs());
        }
        let e1 = mechanical_energy(&s, &params);
        println!("{name:>20}: worst per-step relative energy change {worst:.3e}, total drift {:.3e}", (e1 - e0) / e0.abs());
    }

    // one macro step with many small RK4 substeps as the reference
    let coarse = integrate(&start, 5.0, &params, Integrator::Rk4, 4)?;
    let fine = integrate(&start, 5.0, &params, Integrator::Rk4, 1000)?;
    let gap = coarse
        .as_array()
        .iter()
        .zip(fine.as_array())
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max);
    println!("one 20 ms step with force 5 N: max component gap to dt/1000 reference {gap:.3e}");
    Ok(())
}
