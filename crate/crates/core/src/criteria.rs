//! Entanglement tests for two-mode Gaussian states.

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::gaussian::{
    check_square_even, check_symmetric, max_abs, spectrum_tolerance, symplectic_eigenvalues,
};
use crate::scalar::{half, lit, Real};

/// Default slack on the PPT verdict.
pub const PPT_TOL: f64 = 1e-9;
/// Pattern tolerance for [`extract_standard_form`].
pub const STANDARD_FORM_TOL: f64 = 1e-9;

/// Parameters of the covariance matrix
/// `[[n_A I, diag(c, −c)], [diag(c, −c), n_B I]]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StandardFormParams<T> {
    pub n_a: T,
    pub n_b: T,
    pub c: T,
}

impl<T: Real> StandardFormParams<T> {
    pub fn to_cov(&self) -> DMatrix<T> {
        let z = T::zero();
        let (a, b, c) = (self.n_a, self.n_b, self.c);
        #[rustfmt::skip]
        let m = DMatrix::from_row_slice(4, 4, &[
            a, z, c, z,
            z, a, z, -c,
            c, z, b, z,
            z, -c, z, b,
        ]);
        m
    }

    /// Same parameters with the two parties exchanged.
    pub fn swapped(&self) -> Self {
        Self {
            n_a: self.n_b,
            n_b: self.n_a,
            c: self.c,
        }
    }
}

fn check_two_mode<T: Real>(cov: &DMatrix<T>) -> Result<()> {
    if check_square_even(cov)? != 2 {
        return Err(Error::DimensionMismatch {
            expected: 4,
            found: cov.nrows(),
        });
    }
    check_symmetric(cov)
}

/// Read `(n_A, n_B, c)` off a covariance matrix already in standard form.
/// The sign of the correlation is dropped: `c → −c` is a local π rotation.
pub fn extract_standard_form<T: Real>(cov: &DMatrix<T>) -> Result<StandardFormParams<T>> {
    check_two_mode(cov)?;
    let n_a = cov[(0, 0)];
    let n_b = cov[(2, 2)];
    let c = cov[(0, 2)];
    let expected = StandardFormParams { n_a, n_b, c }.to_cov();
    let tol = T::tol(STANDARD_FORM_TOL) * T::one().max(max_abs(cov));
    if max_abs(&(cov - expected)) > tol {
        return Err(Error::NotStandardForm);
    }
    Ok(StandardFormParams {
        n_a,
        n_b,
        c: c.abs(),
    })
}

/// Left-hand side of the variance inequality for the standard form,
/// `2a²n_A + 2n_B/a² − 4c − a² − 1/a²` with `a² = √((2n_B − 1)/(2n_A − 1))`.
/// Negative means entangled.
///
/// Entries are taken in the vacuum-is-`1/2` units used throughout the crate;
/// no factor-of-two rescaling is applied.
pub fn duan_value<T: Real>(p: &StandardFormParams<T>) -> Result<T> {
    let two = lit::<T>(2.0);
    let da = two * p.n_a - T::one();
    let db = two * p.n_b - T::one();
    if !(da > T::zero() && db > T::zero()) {
        return Err(Error::DegenerateMarginal {
            n_a: p.n_a.as_f64(),
            n_b: p.n_b.as_f64(),
        });
    }
    let a2 = (db / da).sqrt();
    Ok(two * a2 * p.n_a + two * p.n_b / a2 - lit::<T>(4.0) * p.c - a2 - T::one() / a2)
}

/// Transpose of party B: flips the sign of `p_B`.
pub fn partial_transpose<T: Real>(cov: &DMatrix<T>) -> Result<DMatrix<T>> {
    check_two_mode(cov)?;
    let mut pt = cov.clone();
    for k in 0..4 {
        if k != 3 {
            pt[(3, k)] = -pt[(3, k)];
            pt[(k, 3)] = -pt[(k, 3)];
        }
    }
    Ok(pt)
}

/// Outcome of the partial-transpose test.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PptReport<T> {
    pub separable: bool,
    /// Smallest symplectic eigenvalue of the partial transpose.
    pub min_pt_eigenvalue: T,
    /// `min_pt_eigenvalue − 1/2`; negative means entangled.
    pub margin: T,
}

fn min_pt_eigenvalue<T: Real>(cov: &DMatrix<T>) -> Result<T> {
    check_two_mode(cov)?;
    let nu = symplectic_eigenvalues(cov).map_err(|e| match e {
        Error::NotPositiveDefinite => Error::Unphysical(f64::NAN),
        e => e,
    })?;
    if nu[0] < half::<T>() - spectrum_tolerance(cov) {
        return Err(Error::Unphysical(nu[0].as_f64()));
    }
    Ok(symplectic_eigenvalues(&partial_transpose(cov)?)?[0])
}

/// Positivity of the partial transpose, which decides separability of
/// two-mode Gaussian states.
pub fn ppt_separable<T: Real>(cov: &DMatrix<T>, tol: T) -> Result<PptReport<T>> {
    let nu = min_pt_eigenvalue(cov)?;
    let margin = nu - half::<T>();
    Ok(PptReport {
        separable: margin >= -tol,
        min_pt_eigenvalue: nu,
        margin,
    })
}

/// `max(0, −ln 2ν̃₋)` with `ν̃₋` the smallest symplectic eigenvalue of the
/// partial transpose.
pub fn log_negativity<T: Real>(cov: &DMatrix<T>) -> Result<T> {
    let nu = min_pt_eigenvalue(cov)?;
    Ok((-(lit::<T>(2.0) * nu).ln()).max(T::zero()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gaussian::{random_pure_state, two_mode_squeezed_vacuum, vacuum_state};
    use approx::assert_relative_eq;

    #[test]
    fn standard_form_extraction() {
        let r = 0.8f64;
        let p = extract_standard_form(two_mode_squeezed_vacuum(r).unwrap().cov()).unwrap();
        assert_relative_eq!(p.n_a, (2.0 * r).cosh() / 2.0, epsilon = 1e-13);
        assert_relative_eq!(p.n_b, (2.0 * r).cosh() / 2.0, epsilon = 1e-13);
        assert_relative_eq!(p.c, (2.0 * r).sinh() / 2.0, epsilon = 1e-13);

        let v = extract_standard_form(vacuum_state::<f64>(2).unwrap().cov()).unwrap();
        assert_eq!((v.n_a, v.n_b, v.c), (0.5, 0.5, 0.0));

        let rand = random_pure_state::<f64>(2, 3, 1.0).unwrap();
        assert_eq!(
            extract_standard_form(rand.cov()),
            Err(Error::NotStandardForm)
        );
    }

    #[test]
    fn duan_reference_value() {
        let p = extract_standard_form(two_mode_squeezed_vacuum(1.0f64).unwrap().cov()).unwrap();
        let d = duan_value(&p).unwrap();
        assert_relative_eq!(d, 2.0 * (-2.0f64).exp() - 2.0, epsilon = 1e-12);
        assert!((d - -1.7293294).abs() < 1e-6);

        let vac = StandardFormParams {
            n_a: 0.5,
            n_b: 0.5,
            c: 0.0,
        };
        assert!(matches!(
            duan_value(&vac),
            Err(Error::DegenerateMarginal { .. })
        ));
    }

    #[test]
    fn ppt_on_reference_states() {
        let vac = vacuum_state::<f64>(2).unwrap();
        assert!(ppt_separable(vac.cov(), 1e-9).unwrap().separable);

        let tmsv = two_mode_squeezed_vacuum(1.0f64).unwrap();
        let rep = ppt_separable(tmsv.cov(), 1e-9).unwrap();
        assert!(!rep.separable);
        assert_relative_eq!(
            rep.min_pt_eigenvalue,
            (-2.0f64).exp() / 2.0,
            epsilon = 1e-12
        );
        assert_relative_eq!(rep.min_pt_eigenvalue, 0.0676676, epsilon = 1e-7);

        let bad = DMatrix::<f64>::identity(4, 4) * 0.3;
        assert!(matches!(
            ppt_separable(&bad, 1e-9),
            Err(Error::Unphysical(_))
        ));
        assert!(ppt_separable(&DMatrix::<f64>::identity(2, 2), 1e-9).is_err());
    }

    #[test]
    fn log_negativity_values() {
        for r in [0.1, 0.5, 1.0, 2.0, 3.0] {
            let t = two_mode_squeezed_vacuum::<f64>(r).unwrap();
            assert!(
                (log_negativity(t.cov()).unwrap() - 2.0 * r).abs() < 1e-9,
                "r = {r}"
            );
        }
        assert_eq!(
            log_negativity(vacuum_state::<f64>(2).unwrap().cov()).unwrap(),
            0.0
        );
        let thermal =
            DMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![1.2, 1.2, 0.7, 0.7]));
        assert_eq!(log_negativity(&thermal).unwrap(), 0.0);
    }

    #[test]
    fn swapped_params() {
        let p = StandardFormParams {
            n_a: 1.0,
            n_b: 2.0,
            c: 0.5,
        };
        assert_eq!(p.swapped().to_cov(), {
            let q = StandardFormParams {
                n_a: 2.0,
                n_b: 1.0,
                c: 0.5,
            };
            q.to_cov()
        });
    }
}
