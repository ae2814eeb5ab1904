//! Open-loop simulation of the cart with double pendulum under a sinusoidal
//! push. Prints the state every half second.

use fimax::model::{CartDoublePendulum, PlantModel};
use fimax::numkit::{DenseTrajectory, IntegratorConfig};
use fimax::sensitivity::simulate;
use nalgebra::DVector;

fn main() -> fimax::Result<()> {
    let model = CartDoublePendulum::default();
    let theta = model.nominal_theta();
    let u = DenseTrajectory::sample_uniform(0.0, 5.0, 0.01, |t| {
        DVector::from_element(1, 0.1 * (std::f64::consts::TAU * 0.5 * t).sin())
    })?;
    let x0 = DVector::zeros(model.dims().n);
    let x = simulate(&model, &x0, &u, &theta, &IntegratorConfig::default())?;

    println!("{} adaptive knots", x.len());
    println!("{:>5} {}", "t", model.state_names().iter().map(|s| format!("{s:>12}")).collect::<String>());
    for k in 0..=10 {
        let t = 0.5 * k as f64;
        let row: String = x.at(t).iter().map(|v| format!("{v:>12.4e}")).collect();
        println!("{t:>5.1} {row}");
    }
    Ok(())
}
