//! Smooth 1-D reconstruction: synthesize the Fourier coefficients of
//! x·eˣ + sin 8x, fit an order-10 spline on a 0.1 knot grid by matching
//! the coefficients in least squares, and show the residual decay.

use fourfit::fourier::{coeffs_from_function, lookup};
use fourfit::reconstruct::fit_smooth;
use fourfit::spline::SplineSpace;

fn main() -> fourfit::Result<()> {
    let f = lookup("smooth1d").expect("registry function");
    let m = 19;
    let table = coeffs_from_function(f, m, 256)?;
    let space = SplineSpace::new(10, 10, 1)?;
    let (model, report) = fit_smooth(&table, space, m)?;

    println!("fit of {} over n = 0..={m}", f.id);
    println!("  unknowns            {}", model.space().dim());
    println!("  objective           {:.3e}", report.objective);
    println!("  residual reduction  {:.2} orders of magnitude", report.reduction_orders);
    println!("  condition estimate  {:.3e}", report.solve.condition);
    println!();
    println!("  n   |f^_n|        |f^_n - S^_n|");
    for (idx, resid) in &report.residuals {
        let data = table.get(*idx).unwrap().norm();
        println!("  {:>2}  {:.6e}  {:.6e}", idx[0], data, resid);
    }

    let mut sup = 0.0f64;
    for i in 0..=1000 {
        let x = i as f64 / 1000.0;
        sup = sup.max((model.eval(&[x])? - (f.eval)(&[x])).abs());
    }
    println!();
    println!("  sup |f - S| on a 1001-point grid: {sup:.3e}");
    Ok(())
}
