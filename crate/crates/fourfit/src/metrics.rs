//! Small geometric/error metrics used by reports and tests.

/// Symmetric Hausdorff distance between two point sets (brute force).
///
/// Returns `f64::INFINITY` if either set is empty.
pub fn hausdorff_distance(a: &[[f64; 2]], b: &[[f64; 2]]) -> f64 {
    if a.is_empty() || b.is_empty() {
        return f64::INFINITY;
    }
    directed_hausdorff(a, b).max(directed_hausdorff(b, a))
}

fn directed_hausdorff(a: &[[f64; 2]], b: &[[f64; 2]]) -> f64 {
    a.iter()
        .map(|p| {
            b.iter()
                .map(|q| ((p[0] - q[0]).powi(2) + (p[1] - q[1]).powi(2)).sqrt())
                .fold(f64::INFINITY, f64::min)
        })
        .fold(0.0, f64::max)
}

/// Sup and root-mean-square of a slice of absolute errors.
pub fn sup_and_rms(errors: &[f64]) -> (f64, f64) {
    if errors.is_empty() {
        return (0.0, 0.0);
    }
    let sup = errors.iter().fold(0.0f64, |m, &e| m.max(e.abs()));
    let rms = (errors.iter().map(|e| e * e).sum::<f64>() / errors.len() as f64).sqrt();
    (sup, rms)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hausdorff_of_shifted_sets() {
        let a: Vec<[f64; 2]> = (0..10).map(|i| [i as f64 / 9.0, 0.0]).collect();
        let b: Vec<[f64; 2]> = (0..10).map(|i| [i as f64 / 9.0, 0.25]).collect();
        assert!((hausdorff_distance(&a, &b) - 0.25).abs() < 1e-15);
        assert_eq!(hausdorff_distance(&a, &a), 0.0);
        assert_eq!(hausdorff_distance(&a, &[]), f64::INFINITY);
    }

    #[test]
    fn hausdorff_is_symmetric_and_detects_outliers() {
        let a = vec![[0.0, 0.0], [1.0, 0.0]];
        let b = vec![[0.0, 0.0], [1.0, 0.0], [0.5, 0.5]];
        let d = hausdorff_distance(&a, &b);
        assert_eq!(d, hausdorff_distance(&b, &a));
        // The outlier (0.5, 0.5) is 1/√2 from the nearest point of `a`.
        assert!((d - 0.5f64.hypot(0.5)).abs() < 1e-15);
    }

    #[test]
    fn sup_and_rms_basics() {
        let (sup, rms) = sup_and_rms(&[3.0, -4.0]);
        assert_eq!(sup, 4.0);
        assert!((rms - (12.5f64).sqrt()).abs() < 1e-15);
        assert_eq!(sup_and_rms(&[]), (0.0, 0.0));
    }
}
