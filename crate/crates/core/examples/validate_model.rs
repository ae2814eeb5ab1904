//! Checks every analytic derivative of the cart model against finite
//! differences at random points.

use fimax::model::{validate_derivatives, CartDoublePendulum, CartParameterization};

fn main() -> fimax::Result<()> {
    for param in [CartParameterization::MassDamping, CartParameterization::TwoMassesUndamped] {
        let model = CartDoublePendulum::new(Default::default(), param);
        let report = validate_derivatives(&model, 20, 7)?;
        println!("{param:?}: {} samples", report.samples);
        for e in &report.entries {
            println!("  {:<14} max scaled error {:.2e}", e.name, e.max_error);
        }
    }
    Ok(())
}
