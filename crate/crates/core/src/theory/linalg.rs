//! Small dense helpers: column stacking, the trace identity and eigenvalue
//! queries. Nonsymmetric spectra go through faer, whose QR iteration
//! converges on the combiner-shaped matrices where nalgebra's Schur stalls.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// `vec(X)`: stacks the columns of `x` into one vector.
pub fn vec(x: &DMatrix<f64>) -> DVector<f64> {
    DVector::from_column_slice(x.as_slice())
}

/// Inverse of [`vec`] for a square `n x n` matrix.
pub fn unvec(v: &DVector<f64>, n: usize) -> Result<DMatrix<f64>> {
    if v.len() != n * n {
        return Err(Error::DimensionMismatch {
            what: "vec length",
            expected: n * n,
            got: v.len(),
        });
    }
    Ok(DMatrix::from_column_slice(n, n, v.as_slice()))
}

/// `Tr(X Y)` evaluated as `vec(Xᵀ)ᵀ vec(Y)`.
///
/// For symmetric `X` (the identity in every use inside this crate) this is
/// the plain inner product `vec(X)ᵀ vec(Y)`.
pub fn trace_via_vec(x: &DMatrix<f64>, y: &DMatrix<f64>) -> Result<f64> {
    if !x.is_square() || x.shape() != (y.ncols(), y.nrows()) {
        return Err(Error::DimensionMismatch {
            what: "trace_via_vec operands",
            expected: x.nrows(),
            got: y.ncols(),
        });
    }
    Ok(vec(&x.transpose()).dot(&vec(y)))
}

/// Eigenvalues of a general real square matrix as `(re, im)` pairs.
pub fn eigenvalues(m: &DMatrix<f64>) -> Result<Vec<(f64, f64)>> {
    ensure_finite(m, "eigenvalue input")?;
    let f = faer::Mat::<f64>::from_fn(m.nrows(), m.ncols(), |i, j| m[(i, j)]);
    let eig = f.eigenvalues().map_err(|_| Error::NonFinite("eigenvalue iteration did not converge"))?;
    Ok(eig.iter().map(|z| (z.re, z.im)).collect())
}

/// Largest `|lambda|` over the (complex) eigenvalues of a square matrix.
pub fn spectral_radius(m: &DMatrix<f64>) -> Result<f64> {
    Ok(eigenvalues(m)?.iter().map(|&(re, im)| re.hypot(im)).fold(0.0, f64::max))
}

/// Eigenvalues whose imaginary part is at most `1e-9` times the spectral
/// radius, returned as reals.
pub fn real_eigenvalues(m: &DMatrix<f64>) -> Result<Vec<f64>> {
    let eig = eigenvalues(m)?;
    let radius = eig.iter().map(|&(re, im)| re.hypot(im)).fold(0.0, f64::max);
    let tol = 1e-9 * radius;
    Ok(eig.iter().filter(|z| z.1.abs() <= tol).map(|z| z.0).collect())
}

/// Largest eigenvalue of a symmetric matrix.
pub fn symmetric_max_eigenvalue(m: &DMatrix<f64>) -> f64 {
    let sym = (m + m.transpose()) * 0.5;
    sym.symmetric_eigenvalues().iter().copied().fold(f64::NEG_INFINITY, f64::max)
}

pub(crate) fn ensure_finite(m: &DMatrix<f64>, what: &'static str) -> Result<()> {
    if m.iter().all(|x| x.is_finite()) {
        Ok(())
    } else {
        Err(Error::NonFinite(what))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn vec_is_column_major() {
        let m = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 3.0, 4.0]);
        assert_eq!(vec(&m).as_slice(), &[1.0, 3.0, 2.0, 4.0]);
        assert_eq!(unvec(&vec(&m), 2).unwrap(), m);
        assert!(unvec(&vec(&m), 3).is_err());
    }

    #[test]
    fn trace_identities() {
        let i2 = DMatrix::<f64>::identity(2, 2);
        assert_eq!(trace_via_vec(&i2, &i2).unwrap(), 2.0);
        let y = DMatrix::from_row_slice(2, 2, &[1.5, -2.0, 7.0, 0.25]);
        assert_eq!(trace_via_vec(&i2, &y).unwrap(), y.trace());
        assert!(trace_via_vec(&i2, &DMatrix::zeros(3, 3)).is_err());
    }

    #[test]
    fn eigen_helpers() {
        // rotation by 90 degrees scaled by 2: eigenvalues +-2i
        let r = DMatrix::from_row_slice(2, 2, &[0.0, -2.0, 2.0, 0.0]);
        assert!((spectral_radius(&r).unwrap() - 2.0).abs() < 1e-12);
        assert!(real_eigenvalues(&r).unwrap().is_empty());
        let d = DMatrix::from_diagonal(&DVector::from_vec(vec![0.5, -3.0, 2.0]));
        let mut re = real_eigenvalues(&d).unwrap();
        re.sort_by(f64::total_cmp);
        assert_eq!(re.len(), 3);
        for (x, y) in re.iter().zip([-3.0, 0.5, 2.0]) {
            assert!((x - y).abs() < 1e-14);
        }
        assert_eq!(symmetric_max_eigenvalue(&d), 2.0);
    }
}
