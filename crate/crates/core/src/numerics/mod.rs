//! Numerical kernels shared by the fitting, estimation and simulation code.

pub mod lm;
pub mod quadric;
pub mod sampling;

pub use lm::{lm_fit, LmFit, LmProblem};
pub use quadric::{solve_ellipse_pair, AxisQuadric, ComplexPoint, ComplexRootPair};
pub use sampling::{derive_seed, rng_for, sample_lognormal, sample_student_t, StudentT};

/// Arithmetic mean by incremental update. A run of identical values returns
/// that value exactly.
pub fn mean<'a, I: IntoIterator<Item = &'a f64>>(values: I) -> f64 {
    let mut m = 0.0;
    let mut k = 0.0;
    for &v in values {
        k += 1.0;
        m += (v - m) / k;
    }
    if k == 0.0 {
        f64::NAN
    } else {
        m
    }
}

#[cfg(test)]
mod tests {
    use super::mean;

    #[test]
    fn mean_of_constant_run_is_exact() {
        assert_eq!(mean(&[0.1; 50]), 0.1);
        assert_eq!(mean(&[0.1; 7]), 0.1);
        assert!((mean(&[1.0, 2.0, 3.0, 4.0]) - 2.5).abs() < 1e-15);
        assert!(mean(&[]).is_nan());
    }
}
