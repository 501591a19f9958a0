//! Piecewise-smooth 2-D reconstruction end to end: seed the singularity
//! curve from scan lines, then fit two spline pieces separated by a spline
//! level set, refining the level-set coefficients by quasi-Newton steps on
//! the coefficient-matching objective.
//!
//! This example runs a deliberately small configuration; the pw2d presets
//! of the command-line tool run the same pipeline at full size.

use fourfit::detect::{fit_initial_levelset, scanline_points_2d, signed_net, OrientationRule};
use fourfit::fourier::{coeffs_from_function, lookup};
use fourfit::reconstruct::fit_piecewise_2d;
use fourfit::spline::SplineSpace;

fn main() -> fourfit::Result<()> {
    let f = lookup("pw2d").expect("registry function");
    let table = coeffs_from_function(f, 50, 512)?;

    let points = scanline_points_2d(&table, 40, 400)?;
    let q0 = signed_net(&points, 11, OrientationRule::RayParity)?;
    let seed_space = SplineSpace::new(4, 3, 2)?;
    let seed = fit_initial_levelset(&points, &q0, seed_space)?;
    println!("seeded the curve from {} scan points", points.len());

    let space = SplineSpace::new(6, 5, 2)?;
    let (model, report) = fit_piecewise_2d(&table, space, 12, seed.space, &seed.coefficients, 2)?;

    println!("piecewise fit over the |n| <= 12 box");
    println!("  objective history   {:?}", report.objective_history);
    println!("  residual reduction  {:.2} orders of magnitude", report.reduction_orders);

    // Pointwise errors away from the curve.
    let ls = model.levelset()?;
    let mut sup = 0.0f64;
    let g = 60;
    for i in 0..g {
        for j in 0..g {
            let (x, y) = ((i as f64 + 0.5) / g as f64, (j as f64 + 0.5) / g as f64);
            if ((x * x + y * y).sqrt() - 0.5f64.sqrt()).abs() < 0.1 {
                continue;
            }
            sup = sup.max((model.eval(&ls, x, y)? - (f.eval)(&[x, y])).abs());
        }
    }
    println!("  sup |f - S| off a 0.1 strip around the curve: {sup:.3e}");
    Ok(())
}
