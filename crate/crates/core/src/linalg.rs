//! Dense stationary-vector solves for the small chains in this crate.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Solves `π Q = 0`, `π 1 = 1` for a generator `Q` (rows sum to zero) by
/// replacing the last balance equation with the normalization.
///
/// Returns the vector and the residual `‖π Q‖∞`.
pub(crate) fn stationary_of_generator(q: &DMatrix<f64>) -> Result<(Vec<f64>, f64)> {
    let n = q.nrows();
    debug_assert_eq!(n, q.ncols());
    if n == 1 {
        return Ok((vec![1.0], 0.0));
    }
    let mut a = q.transpose();
    for c in 0..n {
        a[(n - 1, c)] = 1.0;
    }
    let mut b = DVector::zeros(n);
    b[n - 1] = 1.0;

    let lu = a.lu();
    let x = lu.solve(&b).ok_or_else(|| {
        Error::Numerical(format!(
            "singular {n}x{n} balance system (generator is reducible or rates underflow)"
        ))
    })?;
    if x.iter().any(|v| !v.is_finite()) {
        return Err(Error::Numerical(format!(
            "non-finite stationary vector for {n} states; balance system is ill-conditioned"
        )));
    }

    // Round-off can leave tiny negatives; anything larger is a real failure.
    let mut pi: Vec<f64> = x.iter().copied().collect();
    for (i, v) in pi.iter_mut().enumerate() {
        if *v < 0.0 {
            if *v < -1e-12 {
                return Err(Error::Numerical(format!(
                    "stationary probability of state {i} is {v}; system is ill-conditioned"
                )));
            }
            *v = 0.0;
        }
    }
    let total: f64 = pi.iter().sum();
    pi.iter_mut().for_each(|v| *v /= total);

    let row = DVector::from_vec(pi.clone()).transpose() * q;
    let residual = row.amax();
    Ok((pi, residual))
}

/// Stationary vector of a row-stochastic matrix, via the generator `P - I`.
pub(crate) fn stationary_of_stochastic(p: &DMatrix<f64>) -> Result<(Vec<f64>, f64)> {
    let n = p.nrows();
    let q = p - DMatrix::<f64>::identity(n, n);
    stationary_of_generator(&q)
}
