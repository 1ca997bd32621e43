//! Gaussian states in the covariance-matrix picture.
//!
//! Quadratures are ordered `(x1, p1, x2, p2, ...)` and the vacuum has
//! covariance `I / 2`. A state is physical when every symplectic eigenvalue
//! is at least `1/2`.

use nalgebra::{Cholesky, DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::scalar::{half, lit, Real};

/// Absolute symmetry tolerance, scaled by the largest entry for big matrices.
pub const SYMMETRY_TOL: f64 = 1e-12;
/// Slack allowed below `1/2` on the smallest symplectic eigenvalue of a
/// well-conditioned covariance.
pub const PHYSICAL_TOL: f64 = 1e-10;

/// The standard symplectic form on `m` modes: `m` copies of `[[0, 1], [-1, 0]]`.
pub fn symplectic_form<T: Real>(m: usize) -> DMatrix<T> {
    let mut omega = DMatrix::zeros(2 * m, 2 * m);
    for k in 0..m {
        omega[(2 * k, 2 * k + 1)] = T::one();
        omega[(2 * k + 1, 2 * k)] = -T::one();
    }
    omega
}

pub(crate) fn max_abs<T: Real>(m: &DMatrix<T>) -> T {
    m.iter().fold(T::zero(), |acc, v| acc.max(v.abs()))
}

pub(crate) fn symmetrize<T: Real>(m: &DMatrix<T>) -> DMatrix<T> {
    (m + m.transpose()) * half::<T>()
}

pub(crate) fn check_square_even<T: Real>(m: &DMatrix<T>) -> Result<usize> {
    if m.nrows() != m.ncols() {
        return Err(Error::DimensionMismatch {
            expected: m.nrows(),
            found: m.ncols(),
        });
    }
    if m.nrows() == 0 || !m.nrows().is_multiple_of(2) {
        return Err(Error::InvalidArgument(format!(
            "covariance must be 2m x 2m with m >= 1, got {} rows",
            m.nrows()
        )));
    }
    Ok(m.nrows() / 2)
}

pub(crate) fn check_symmetric<T: Real>(m: &DMatrix<T>) -> Result<()> {
    let asym = max_abs(&(m - m.transpose()));
    let scale = T::one().max(max_abs(m));
    if asym > T::tol(SYMMETRY_TOL) * scale {
        return Err(Error::NotSymmetric(asym.as_f64()));
    }
    Ok(())
}

/// Quadrature indices `(2k, 2k+1)` of the listed modes, in order.
pub(crate) fn quadrature_indices(modes: &[usize]) -> Vec<usize> {
    modes.iter().flat_map(|&k| [2 * k, 2 * k + 1]).collect()
}

/// Symplectic eigenvalues of a covariance matrix, ascending.
///
/// Computed from the Cholesky factor `V = L Lᵀ`: the antisymmetric matrix
/// `Lᵀ Ω L` is similar to `Ω V`, so its singular values are the symplectic
/// eigenvalues, each appearing twice.
pub fn symplectic_eigenvalues<T: Real>(cov: &DMatrix<T>) -> Result<Vec<T>> {
    let m = check_square_even(cov)?;
    check_symmetric(cov)?;
    let chol = Cholesky::new(symmetrize(cov)).ok_or(Error::NotPositiveDefinite)?;
    let l = chol.l();
    let k = l.transpose() * symplectic_form::<T>(m) * &l;
    let mut sv: Vec<T> = k.singular_values().iter().copied().collect();
    sv.sort_by(|a, b| a.partial_cmp(b).expect("finite singular values"));
    Ok(sv.into_iter().step_by(2).collect())
}

/// [`PHYSICAL_TOL`] widened to the accuracy the symplectic spectrum of `cov`
/// can be computed to, which degrades with the condition number.
pub(crate) fn spectrum_tolerance<T: Real>(cov: &DMatrix<T>) -> T {
    let ev = symmetrize(cov).symmetric_eigenvalues();
    let (lo, hi) = ev
        .iter()
        .fold((T::max_value().unwrap(), T::zero()), |(lo, hi), &v| {
            (lo.min(v.abs()), hi.max(v.abs()))
        });
    let cond = if lo > T::zero() {
        hi / lo
    } else {
        T::max_value().unwrap()
    };
    T::tol(PHYSICAL_TOL).max(lit::<T>(64.0 * T::EPSILON_F64) * cond)
}

/// Whether `cov` satisfies the uncertainty principle `V + iΩ/2 ≥ 0`.
pub fn is_physical<T: Real>(cov: &DMatrix<T>) -> Result<bool> {
    check_square_even(cov)?;
    check_symmetric(cov)?;
    match symplectic_eigenvalues(cov) {
        Ok(nu) => Ok(nu[0] >= half::<T>() - spectrum_tolerance(cov)),
        Err(Error::NotPositiveDefinite) => Ok(false),
        Err(e) => Err(e),
    }
}

/// A Gaussian state on `m` modes: covariance matrix plus mean vector.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussianState<T: Real> {
    cov: DMatrix<T>,
    mean: DVector<T>,
}

impl<T: Real> GaussianState<T> {
    /// Validated constructor with zero mean.
    pub fn from_cov(cov: DMatrix<T>) -> Result<Self> {
        let m = check_square_even(&cov)?;
        Self::new(cov, DVector::zeros(2 * m))
    }

    pub fn new(cov: DMatrix<T>, mean: DVector<T>) -> Result<Self> {
        check_square_even(&cov)?;
        if mean.len() != cov.nrows() {
            return Err(Error::DimensionMismatch {
                expected: cov.nrows(),
                found: mean.len(),
            });
        }
        check_symmetric(&cov)?;
        let cov = symmetrize(&cov);
        let nu = symplectic_eigenvalues(&cov).map_err(|e| match e {
            Error::NotPositiveDefinite => Error::Unphysical(f64::NAN),
            e => e,
        })?;
        if nu[0] < half::<T>() - spectrum_tolerance(&cov) {
            return Err(Error::Unphysical(nu[0].as_f64()));
        }
        Ok(Self { cov, mean })
    }

    /// Skips validation; callers guarantee physicality.
    pub(crate) fn from_parts_unchecked(cov: DMatrix<T>, mean: DVector<T>) -> Self {
        Self {
            cov: symmetrize(&cov),
            mean,
        }
    }

    pub fn num_modes(&self) -> usize {
        self.cov.nrows() / 2
    }

    pub fn cov(&self) -> &DMatrix<T> {
        &self.cov
    }

    pub fn mean(&self) -> &DVector<T> {
        &self.mean
    }

    pub fn symplectic_eigenvalues(&self) -> Vec<T> {
        symplectic_eigenvalues(&self.cov).expect("validated state")
    }

    /// Marginal state on the listed modes, in the given order.
    pub fn reduced(&self, modes: &[usize]) -> Result<Self> {
        let m = self.num_modes();
        if let Some(&bad) = modes.iter().find(|&&k| k >= m) {
            return Err(Error::ModeIndex {
                index: bad,
                modes: m,
            });
        }
        let idx = quadrature_indices(modes);
        let cov = self.cov.select_rows(&idx).select_columns(&idx);
        let mean = self.mean.select_rows(&idx);
        Ok(Self { cov, mean })
    }

    /// Product state `self ⊗ other`, modes of `self` first.
    pub fn tensor(&self, other: &Self) -> Self {
        let (n1, n2) = (self.cov.nrows(), other.cov.nrows());
        let mut cov = DMatrix::zeros(n1 + n2, n1 + n2);
        cov.view_mut((0, 0), (n1, n1)).copy_from(&self.cov);
        cov.view_mut((n1, n1), (n2, n2)).copy_from(&other.cov);
        let mut mean = DVector::zeros(n1 + n2);
        mean.rows_mut(0, n1).copy_from(&self.mean);
        mean.rows_mut(n1, n2).copy_from(&other.mean);
        Self { cov, mean }
    }
}

/// A real matrix `S` with `S Ω Sᵀ = Ω`.
#[derive(Debug, Clone, PartialEq)]
pub struct SymplecticMatrix<T: Real> {
    matrix: DMatrix<T>,
}

/// Frobenius tolerance on `S Ω Sᵀ - Ω`.
pub const SYMPLECTIC_TOL: f64 = 1e-10;

impl<T: Real> SymplecticMatrix<T> {
    pub fn new(matrix: DMatrix<T>) -> Result<Self> {
        let m = check_square_even(&matrix)?;
        let omega = symplectic_form::<T>(m);
        let defect = (&matrix * &omega * matrix.transpose() - &omega).norm();
        let scale = T::one().max(matrix.norm() * matrix.norm());
        if defect > T::tol(SYMPLECTIC_TOL) * scale {
            return Err(Error::InvalidArgument(format!(
                "matrix is not symplectic (defect {defect})"
            )));
        }
        Ok(Self { matrix })
    }

    pub(crate) fn from_matrix_unchecked(matrix: DMatrix<T>) -> Self {
        Self { matrix }
    }

    pub fn identity(m: usize) -> Self {
        Self {
            matrix: DMatrix::identity(2 * m, 2 * m),
        }
    }

    pub fn num_modes(&self) -> usize {
        self.matrix.nrows() / 2
    }

    pub fn matrix(&self) -> &DMatrix<T> {
        &self.matrix
    }

    /// `after · self`: apply `self` first.
    pub fn then(&self, after: &Self) -> Result<Self> {
        if self.matrix.nrows() != after.matrix.nrows() {
            return Err(Error::DimensionMismatch {
                expected: self.matrix.nrows(),
                found: after.matrix.nrows(),
            });
        }
        Ok(Self {
            matrix: &after.matrix * &self.matrix,
        })
    }

    /// `S⁻¹ = -Ω Sᵀ Ω`.
    pub fn inverse(&self) -> Self {
        let omega = symplectic_form::<T>(self.num_modes());
        Self {
            matrix: -(&omega * self.matrix.transpose() * &omega),
        }
    }

    /// Embed a `k`-mode symplectic onto `modes` of an `m`-mode system.
    pub fn embed(&self, modes: &[usize], m: usize) -> Result<Self> {
        if modes.len() != self.num_modes() {
            return Err(Error::DimensionMismatch {
                expected: self.num_modes(),
                found: modes.len(),
            });
        }
        check_modes(modes, m)?;
        let idx = quadrature_indices(modes);
        let mut out = DMatrix::identity(2 * m, 2 * m);
        for (a, &i) in idx.iter().enumerate() {
            for (b, &j) in idx.iter().enumerate() {
                out[(i, j)] = self.matrix[(a, b)];
            }
        }
        Ok(Self { matrix: out })
    }

    /// Phase rotation `x → cos θ x − sin θ p`, `p → sin θ x + cos θ p`.
    pub fn rotation(theta: T) -> Self {
        let (s, c) = theta.sin_cos();
        Self {
            matrix: DMatrix::from_row_slice(2, 2, &[c, -s, s, c]),
        }
    }

    /// Single-mode squeezer `diag(e^{-z}, e^{z})`.
    pub fn squeezer(z: T) -> Self {
        Self {
            matrix: DMatrix::from_row_slice(2, 2, &[(-z).exp(), T::zero(), T::zero(), z.exp()]),
        }
    }

    /// Two-mode squeezer; acting on vacuum it prepares the two-mode squeezed vacuum.
    pub fn two_mode_squeezer(r: T) -> Self {
        let (c, s) = (r.cosh(), r.sinh());
        let z = T::zero();
        #[rustfmt::skip]
        let matrix = DMatrix::from_row_slice(4, 4, &[
            c, z, s, z,
            z, c, z, -s,
            s, z, c, z,
            z, -s, z, c,
        ]);
        Self { matrix }
    }
}

fn check_modes(modes: &[usize], m: usize) -> Result<()> {
    for (i, &k) in modes.iter().enumerate() {
        if k >= m {
            return Err(Error::ModeIndex { index: k, modes: m });
        }
        if modes[..i].contains(&k) {
            return Err(Error::InvalidArgument(format!("mode {k} listed twice")));
        }
    }
    Ok(())
}

/// Beamsplitter of reflectivity `l` on the ordered mode pair `(a, e)` of an
/// `m`-mode system: `a → √(1−l) a + √l e`, `e → √(1−l) e − √l a`.
pub fn beamsplitter<T: Real>(l: T, modes: (usize, usize), m: usize) -> Result<SymplecticMatrix<T>> {
    if !(l >= T::zero() && l <= T::one()) {
        return Err(Error::InvalidArgument(format!(
            "beamsplitter reflectivity {l} outside [0, 1]"
        )));
    }
    let t = (T::one() - l).sqrt();
    let r = l.sqrt();
    let z = T::zero();
    #[rustfmt::skip]
    let block = DMatrix::from_row_slice(4, 4, &[
        t, z, r, z,
        z, t, z, r,
        -r, z, t, z,
        z, -r, z, t,
    ]);
    SymplecticMatrix::from_matrix_unchecked(block).embed(&[modes.0, modes.1], m)
}

/// `m`-mode vacuum: covariance `I/2`, zero mean.
pub fn vacuum_state<T: Real>(m: usize) -> Result<GaussianState<T>> {
    if m == 0 {
        return Err(Error::InvalidArgument(
            "vacuum needs at least one mode".into(),
        ));
    }
    Ok(GaussianState::from_parts_unchecked(
        DMatrix::identity(2 * m, 2 * m) * half::<T>(),
        DVector::zeros(2 * m),
    ))
}

/// Thermal single-mode state `diag(ν, ν)` with `ν ≥ 1/2`.
pub fn thermal_state<T: Real>(nu: T) -> Result<GaussianState<T>> {
    GaussianState::from_cov(DMatrix::identity(2, 2) * nu)
}

/// Two-mode squeezed vacuum with squeezing `r ≥ 0`.
pub fn two_mode_squeezed_vacuum<T: Real>(r: T) -> Result<GaussianState<T>> {
    if !(r >= T::zero()) || !r.is_finite() {
        return Err(Error::InvalidArgument(format!(
            "squeezing r = {r} must be >= 0"
        )));
    }
    let vac = vacuum_state::<T>(2)?;
    apply_symplectic(&vac, &SymplecticMatrix::two_mode_squeezer(r))
}

/// `V → S V Sᵀ`, `mean → S mean`.
pub fn apply_symplectic<T: Real>(
    state: &GaussianState<T>,
    s: &SymplecticMatrix<T>,
) -> Result<GaussianState<T>> {
    if s.matrix.nrows() != state.cov.nrows() {
        return Err(Error::DimensionMismatch {
            expected: state.cov.nrows(),
            found: s.matrix.nrows(),
        });
    }
    let cov = &s.matrix * &state.cov * s.matrix.transpose();
    let mean = &s.matrix * &state.mean;
    Ok(GaussianState::from_parts_unchecked(cov, mean))
}

/// Random passive (photon-number preserving) symplectic: rotations on every
/// mode and a beamsplitter on every pair.
fn random_passive<T: Real>(rng: &mut ChaCha8Rng, m: usize) -> SymplecticMatrix<T> {
    let mut s = SymplecticMatrix::identity(m);
    for k in 0..m {
        let rot = SymplecticMatrix::rotation(lit(rng.random_range(0.0..std::f64::consts::TAU)))
            .embed(&[k], m)
            .expect("valid mode");
        s = s.then(&rot).expect("same size");
    }
    for i in 0..m {
        for j in (i + 1)..m {
            let bs = beamsplitter(lit(rng.random_range(0.0..=1.0)), (i, j), m).expect("valid pair");
            let rot = SymplecticMatrix::rotation(lit(rng.random_range(0.0..std::f64::consts::TAU)))
                .embed(&[j], m)
                .expect("valid mode");
            s = s.then(&bs).and_then(|s| s.then(&rot)).expect("same size");
        }
    }
    s
}

/// Deterministic random pure Gaussian state: passive · squeezers · passive
/// applied to vacuum, with every squeezing magnitude at most `z_max`.
pub fn random_pure_state<T: Real>(m: usize, seed: u64, z_max: T) -> Result<GaussianState<T>> {
    if m == 0 {
        return Err(Error::InvalidArgument("need at least one mode".into()));
    }
    if !(z_max >= T::zero()) || !z_max.is_finite() {
        return Err(Error::InvalidArgument(format!(
            "z_max = {z_max} must be >= 0"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let zm = z_max.as_f64();
    let mut s = random_passive::<T>(&mut rng, m);
    for k in 0..m {
        let z: f64 = if zm > 0.0 {
            rng.random_range(-zm..=zm)
        } else {
            0.0
        };
        let sq = SymplecticMatrix::squeezer(lit(z)).embed(&[k], m)?;
        s = s.then(&sq)?;
    }
    s = s.then(&random_passive(&mut rng, m))?;
    apply_symplectic(&vacuum_state(m)?, &s)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn omega_defect(s: &SymplecticMatrix<f64>) -> f64 {
        let o = symplectic_form::<f64>(s.num_modes());
        (s.matrix() * &o * s.matrix().transpose() - &o).norm()
    }

    #[test]
    fn vacuum_covariances() {
        let v1 = vacuum_state::<f64>(1).unwrap();
        assert_eq!(v1.cov(), &DMatrix::from_diagonal_element(2, 2, 0.5));
        let v2 = vacuum_state::<f64>(2).unwrap();
        assert_eq!(v2.cov(), &(DMatrix::identity(4, 4) * 0.5));
        assert!(v2.mean().iter().all(|&x| x == 0.0));
        assert!(matches!(
            vacuum_state::<f64>(0),
            Err(Error::InvalidArgument(_))
        ));
    }

    #[test]
    fn tmsv_entries() {
        let s = two_mode_squeezed_vacuum(0.0f64).unwrap();
        assert_relative_eq!(
            s.cov().clone(),
            DMatrix::identity(4, 4) * 0.5,
            epsilon = 1e-15
        );

        let s = two_mode_squeezed_vacuum(1.0f64).unwrap();
        let v = s.cov();
        for i in 0..4 {
            assert!((v[(i, i)] - 1.8810978455418157).abs() < 1e-12);
        }
        assert!((v[(0, 2)] - 1.8134302039235093).abs() < 1e-12);
        assert!((v[(1, 3)] + 1.8134302039235093).abs() < 1e-12);
        let nu = s.symplectic_eigenvalues();
        assert!(nu.iter().all(|x| (x - 0.5).abs() < 1e-10));
        assert_relative_eq!(v.determinant(), 0.0625, max_relative = 1e-9);

        assert!(two_mode_squeezed_vacuum(-0.1f64).is_err());
    }

    #[test]
    fn tmsv_purity_over_r() {
        for r in [0.0, 0.3, 1.0, 2.0] {
            let s = two_mode_squeezed_vacuum::<f64>(r).unwrap();
            assert_relative_eq!(s.cov().determinant(), 0.0625, max_relative = 1e-9);
            assert!(is_physical(s.cov()).unwrap());
        }
    }

    #[test]
    fn beamsplitter_limits() {
        let id = beamsplitter(0.0f64, (0, 1), 2).unwrap();
        assert_eq!(id.matrix(), &DMatrix::identity(4, 4));
        let full = beamsplitter(1.0f64, (0, 1), 2).unwrap();
        // a → e, e → −a
        assert_eq!(full.matrix()[(0, 2)], 1.0);
        assert_eq!(full.matrix()[(2, 0)], -1.0);
        assert_eq!(full.matrix()[(0, 0)], 0.0);
        assert!(beamsplitter(1.5f64, (0, 1), 2).is_err());
        assert!(beamsplitter(-0.1f64, (0, 1), 2).is_err());
        assert!(beamsplitter(0.5f64, (0, 0), 2).is_err());
    }

    #[test]
    fn beamsplitter_is_symplectic_on_grid() {
        for k in 0..=10 {
            let bs = beamsplitter(k as f64 / 10.0, (0, 1), 2).unwrap();
            assert!(omega_defect(&bs) < 1e-12);
        }
    }

    #[test]
    fn vacuum_is_beamsplitter_invariant() {
        let vac = vacuum_state::<f64>(2).unwrap();
        let out = apply_symplectic(&vac, &beamsplitter(0.5, (0, 1), 2).unwrap()).unwrap();
        assert_relative_eq!(out.cov().clone(), vac.cov().clone(), epsilon = 1e-15);
        let same = apply_symplectic(&vac, &SymplecticMatrix::identity(2)).unwrap();
        assert_eq!(same, vac);
    }

    #[test]
    fn symplectic_spectra() {
        let vac = vacuum_state::<f64>(1).unwrap();
        assert!((symplectic_eigenvalues(vac.cov()).unwrap()[0] - 0.5).abs() < 1e-14);
        let th = thermal_state(1.3f64).unwrap();
        assert!((symplectic_eigenvalues(th.cov()).unwrap()[0] - 1.3).abs() < 1e-14);

        let asym = DMatrix::from_row_slice(2, 2, &[1.0, 0.2, 0.0, 1.0]);
        assert!(matches!(
            symplectic_eigenvalues(&asym),
            Err(Error::NotSymmetric(_))
        ));
        let indef = DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, -1.0]);
        assert_eq!(
            symplectic_eigenvalues(&indef),
            Err(Error::NotPositiveDefinite)
        );
    }

    #[test]
    fn physicality() {
        assert!(is_physical(&DMatrix::from_diagonal_element(2, 2, 0.5f64)).unwrap());
        assert!(!is_physical(&DMatrix::from_diagonal_element(2, 2, 0.4f64)).unwrap());
        let e = (-2.0f64).exp() / 2.0;
        let sq = DMatrix::from_row_slice(2, 2, &[e, 0.0, 0.0, 0.25 / e]);
        assert!(is_physical(&sq).unwrap());
        assert!(is_physical(&DMatrix::<f64>::identity(3, 3)).is_err());
        assert!(GaussianState::from_cov(DMatrix::from_diagonal_element(2, 2, 0.4f64)).is_err());
    }

    #[test]
    fn random_pure_states() {
        for seed in 0..20 {
            let s = random_pure_state::<f64>(2, seed, 2.0).unwrap();
            assert!(is_physical(s.cov()).unwrap());
            assert!(s
                .symplectic_eigenvalues()
                .iter()
                .all(|x| (x - 0.5).abs() < 1e-9));
        }
        let passive = random_pure_state::<f64>(3, 9, 0.0).unwrap();
        assert_relative_eq!(
            passive.cov().clone(),
            DMatrix::identity(6, 6) * 0.5,
            epsilon = 1e-12
        );
        let a = random_pure_state::<f64>(2, 42, 1.5).unwrap();
        let b = random_pure_state::<f64>(2, 42, 1.5).unwrap();
        assert_eq!(a.cov().as_slice(), b.cov().as_slice());
        assert!(random_pure_state::<f64>(2, 1, -1.0).is_err());
    }

    #[test]
    fn inverse_and_embedding() {
        let s = SymplecticMatrix::two_mode_squeezer(0.7f64)
            .then(&beamsplitter(0.3, (0, 1), 2).unwrap())
            .unwrap();
        let prod = s.then(&s.inverse()).unwrap();
        assert_relative_eq!(
            prod.matrix().clone(),
            DMatrix::identity(4, 4),
            epsilon = 1e-12
        );
        let e = SymplecticMatrix::squeezer(0.4f64).embed(&[2], 3).unwrap();
        assert!(omega_defect(&e) < 1e-12);
        assert!(SymplecticMatrix::squeezer(0.4f64).embed(&[3], 3).is_err());
        assert!(SymplecticMatrix::new(DMatrix::from_diagonal_element(2, 2, 2.0f64)).is_err());
    }

    #[test]
    fn reduced_and_tensor() {
        let s = two_mode_squeezed_vacuum(1.0f64).unwrap();
        let a = s.reduced(&[0]).unwrap();
        assert!((a.cov()[(0, 0)] - 1.8810978455418157).abs() < 1e-12);
        let t = a.tensor(&vacuum_state(1).unwrap());
        assert_eq!(t.num_modes(), 2);
        assert_eq!(t.cov()[(2, 2)], 0.5);
        assert!(s.reduced(&[2]).is_err());
    }

    #[test]
    fn works_in_single_precision() {
        let s = two_mode_squeezed_vacuum(0.5f32).unwrap();
        let nu = s.symplectic_eigenvalues();
        assert!(nu.iter().all(|x| (x - 0.5).abs() < 1e-4));
        assert!(is_physical(s.cov()).unwrap());
    }
}
