//! Forward sensitivities `dx/dtheta` compared with a central difference of
//! two perturbed simulations.

use fimax::model::{CartDoublePendulum, PlantModel};
use fimax::numkit::{DenseTrajectory, IntegratorConfig};
use fimax::sensitivity::{propagate, simulate};
use nalgebra::DVector;

fn main() -> fimax::Result<()> {
    let model = CartDoublePendulum::default();
    let theta = model.nominal_theta();
    let cfg = IntegratorConfig { rel_tol: 1e-10, abs_tol: 1e-12, ..Default::default() };
    let u = DenseTrajectory::sample_uniform(0.0, 3.0, 0.01, |t| DVector::from_element(1, 0.2 * (3.0 * t).sin()))?;
    let x0 = DVector::zeros(model.dims().n);

    let bundle = propagate(&model, &x0, &u, &theta, true, &cfg)?;
    let psi = bundle.psi_at(3.0);
    println!("psi(3) =\n{psi:.6e}");

    let h = 1e-6;
    for j in 0..theta.len() {
        let mut tp = theta.clone();
        let mut tm = theta.clone();
        tp[j] += h;
        tm[j] -= h;
        let fd = (simulate(&model, &x0, &u, &tp, &cfg)?.at(3.0) - simulate(&model, &x0, &u, &tm, &cfg)?.at(3.0)) / (2.0 * h);
        let gap = (fd - psi.column(j)).amax() / psi.column(j).amax();
        println!("{}: relative gap to finite differences {gap:.2e}", model.parameter_names()[j]);
    }
    if let Some(omega) = bundle.omega_at(3.0) {
        println!("d2(phi1)/dm1^2 at t = 3: {:.4e}", omega.get(1, 0, 0));
    }
    Ok(())
}
