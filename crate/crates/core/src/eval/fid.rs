use nalgebra::{DMatrix, DVector};

use super::EvalError;

/// Ridge added to both covariances when a set has no more samples than dimensions.
pub const FID_RIDGE: f64 = 1e-6;

fn moments(xs: &[Vec<f64>], d: usize) -> (DVector<f64>, DMatrix<f64>) {
    let n = xs.len();
    let mut mu = DVector::zeros(d);
    for x in xs {
        mu += DVector::from_column_slice(x);
    }
    mu /= n as f64;
    let mut cov = DMatrix::zeros(d, d);
    for x in xs {
        let c = DVector::from_column_slice(x) - &mu;
        cov += &c * c.transpose();
    }
    cov /= (n - 1) as f64;
    (mu, cov)
}

fn sym_sqrt(m: &DMatrix<f64>) -> DMatrix<f64> {
    let sym = (m + m.transpose()) * 0.5;
    let eig = sym.symmetric_eigen();
    let vals = eig.eigenvalues.map(|v| v.max(0.0).sqrt());
    &eig.eigenvectors * DMatrix::from_diagonal(&vals) * eig.eigenvectors.transpose()
}

/// Fréchet distance between Gaussians fitted to two feature sets.
pub fn fid(a: &[Vec<f64>], b: &[Vec<f64>]) -> Result<f64, EvalError> {
    if a.len() < 2 || b.len() < 2 {
        return Err(EvalError::TooFewSamples(a.len().min(b.len())));
    }
    let d = a[0].len();
    if d == 0 || a.iter().chain(b).any(|x| x.len() != d) {
        return Err(EvalError::DimensionMismatch);
    }
    if a.iter().chain(b).flatten().any(|v| !v.is_finite()) {
        return Err(EvalError::NonFinite);
    }
    let (mu_a, mut cov_a) = moments(a, d);
    let (mu_b, mut cov_b) = moments(b, d);
    if a.len() <= d || b.len() <= d {
        let ridge = DMatrix::identity(d, d) * FID_RIDGE;
        cov_a += &ridge;
        cov_b += &ridge;
    }
    let root_a = sym_sqrt(&cov_a);
    let inner = &root_a * &cov_b * &root_a;
    let inner = (&inner + inner.transpose()) * 0.5;
    let tr_cross: f64 = inner
        .symmetric_eigenvalues()
        .iter()
        .map(|v| v.max(0.0).sqrt())
        .sum();
    let diff = mu_a - mu_b;
    let value = diff.dot(&diff) + cov_a.trace() + cov_b.trace() - 2.0 * tr_cross;
    Ok(value.max(0.0))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn closed_form_two_point_sets() {
        // {0,2} has mean 1, var 2; {5,9} has mean 7, var 8.
        let a = vec![vec![0.0], vec![2.0]];
        let b = vec![vec![5.0], vec![9.0]];
        let expect = 36.0 + (2f64.sqrt() - 8f64.sqrt()).powi(2);
        assert!((fid(&a, &b).unwrap() - expect).abs() < 1e-9);
    }

    #[test]
    fn diagonal_covariances_match_per_axis_formula() {
        let a: Vec<Vec<f64>> = (0..4)
            .map(|i| vec![[-1.0, 1.0][i % 2], [-2.0, 2.0][i / 2]])
            .collect();
        let b: Vec<Vec<f64>> = a.iter().map(|x| vec![x[0] * 3.0 + 1.0, x[1]]).collect();
        // sample variances: a = (4/3, 16/3), b = (12, 16/3)
        let expect = 1.0 + (12f64.sqrt() - (4f64 / 3.0).sqrt()).powi(2);
        assert!((fid(&a, &b).unwrap() - expect).abs() < 1e-9);
    }

    #[test]
    fn errors() {
        assert!(matches!(fid(&[vec![1.0]], &[vec![1.0], vec![2.0]]), Err(EvalError::TooFewSamples(1))));
        assert!(fid(&[vec![1.0], vec![2.0]], &[vec![1.0, 2.0], vec![2.0, 1.0]]).is_err());
    }
}
