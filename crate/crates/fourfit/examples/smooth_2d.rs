//! Smooth 2-D reconstruction: fit a tensor-product spline to the Fourier
//! coefficients of a smooth function of two variables over the full
//! symmetric frequency box.

use fourfit::fourier::{coeffs_from_function, lookup};
use fourfit::reconstruct::fit_smooth;
use fourfit::spline::SplineSpace;

fn main() -> fourfit::Result<()> {
    let f = lookup("smooth2d").expect("registry function");
    let m = 12;
    let table = coeffs_from_function(f, m, 128)?;
    let space = SplineSpace::new(6, 5, 2)?;
    let (model, report) = fit_smooth(&table, space, m)?;

    println!("fit of {} over the |n| <= {m} box ({} coefficients)", f.id, (2 * m + 1).pow(2));
    println!("  unknowns            {}", model.space().dim());
    println!("  objective           {:.3e}", report.objective);
    println!("  residual reduction  {:.2} orders of magnitude", report.reduction_orders);
    println!("  condition estimate  {:.3e} (rank {})", report.solve.condition, report.solve.rank);
    println!(
        "  refinement          {} iterations, final relative residual {:.3e}",
        report.solve.iterations, report.solve.final_relative_residual
    );

    let mut sup = 0.0f64;
    let mut rms = 0.0f64;
    let g = 100;
    for i in 0..g {
        for j in 0..g {
            let p = [(i as f64 + 0.5) / g as f64, (j as f64 + 0.5) / g as f64];
            let e = model.eval(&p)? - (f.eval)(&p);
            sup = sup.max(e.abs());
            rms += e * e;
        }
    }
    rms = (rms / (g * g) as f64).sqrt();
    println!("  grid error          sup {sup:.3e}, rms {rms:.3e}");
    Ok(())
}
