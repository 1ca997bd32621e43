//! Noiseless Gaussian measurements: a Gaussian unitary followed by homodyne
//! (`x`) or heterodyne detection on each measured mode.

use std::f64::consts::FRAC_PI_2;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gaussian::{
    apply_symplectic, beamsplitter, quadrature_indices, symmetrize, vacuum_state, GaussianState,
    SymplecticMatrix,
};
use crate::scalar::{half, lit, Real};

/// Singular values of the projected measured block below this are dropped.
pub const PINV_TOL: f64 = 1e-12;
/// Default squeezing used to regularize improper homodyne projectors.
pub const DEFAULT_R_REG: f64 = 5.0;

/// What happens to one mode after the measurement unitary.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Outcome {
    HomodyneX,
    Heterodyne,
    Keep,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MeasurementSpec<T: Real> {
    symplectic: SymplecticMatrix<T>,
    pattern: Vec<Outcome>,
}

impl<T: Real> MeasurementSpec<T> {
    pub fn new(symplectic: SymplecticMatrix<T>, pattern: Vec<Outcome>) -> Result<Self> {
        if pattern.len() != symplectic.num_modes() {
            return Err(Error::DimensionMismatch {
                expected: symplectic.num_modes(),
                found: pattern.len(),
            });
        }
        if pattern.iter().all(|&o| o == Outcome::Keep) {
            return Err(Error::InvalidArgument(
                "measurement measures no mode".into(),
            ));
        }
        Ok(Self {
            symplectic,
            pattern,
        })
    }

    pub fn num_modes(&self) -> usize {
        self.pattern.len()
    }

    pub fn symplectic(&self) -> &SymplecticMatrix<T> {
        &self.symplectic
    }

    pub fn pattern(&self) -> &[Outcome] {
        &self.pattern
    }

    pub fn homodyne_count(&self) -> usize {
        self.pattern
            .iter()
            .filter(|&&o| o == Outcome::HomodyneX)
            .count()
    }
}

/// Continuous-variable Bell measurement on modes `(A, B)`: balanced
/// beamsplitter, then `x` on the first output and `p` on the second. The `p`
/// readout is a `−π/2` rotation folded into the unitary followed by `x`
/// homodyne.
///
/// With this orientation, swapping two-mode squeezed vacua through the
/// measurement leaves the outer modes with correlations `+c` on `x` and `−c`
/// on `p`.
pub fn cv_bell<T: Real>() -> MeasurementSpec<T> {
    let bs = beamsplitter(half::<T>(), (1, 0), 2).expect("valid beamsplitter");
    let rot = SymplecticMatrix::rotation(lit::<T>(-FRAC_PI_2))
        .embed(&[1], 2)
        .expect("valid mode");
    MeasurementSpec {
        symplectic: bs.then(&rot).expect("same size"),
        pattern: vec![Outcome::HomodyneX, Outcome::HomodyneX],
    }
}

/// Heterodyne on each of `m` modes with no preceding unitary: a measurement
/// whose POVM elements are product coherent-state projectors.
pub fn heterodyne_product<T: Real>(m: usize) -> MeasurementSpec<T> {
    MeasurementSpec {
        symplectic: SymplecticMatrix::identity(m),
        pattern: vec![Outcome::Heterodyne; m],
    }
}

/// Covariance of the unmeasured modes after the measurement.
///
/// `spec` acts on `measured_modes` of `state` (in that order). With the
/// post-unitary covariance partitioned into kept block `A`, cross block `B`
/// and measured block `C`, the result is `A − B (Π C' Π)⁺ Bᵀ` where `C'` adds
/// vacuum noise `I/2` on heterodyned modes and `Π` keeps the `x` row of
/// homodyned modes and both rows of heterodyned ones. It does not depend on
/// the measurement outcome, so means are dropped.
pub fn condition_on_measurement<T: Real>(
    state: &GaussianState<T>,
    spec: &MeasurementSpec<T>,
    measured_modes: &[usize],
) -> Result<GaussianState<T>> {
    let m = state.num_modes();
    if measured_modes.len() != spec.num_modes() {
        return Err(Error::DimensionMismatch {
            expected: spec.num_modes(),
            found: measured_modes.len(),
        });
    }
    let s = spec.symplectic.embed(measured_modes, m)?;
    let rotated = apply_symplectic(state, &s)?;
    let cov = rotated.cov();

    let measured: Vec<(usize, Outcome)> = measured_modes
        .iter()
        .zip(&spec.pattern)
        .filter(|(_, &o)| o != Outcome::Keep)
        .map(|(&k, &o)| (k, o))
        .collect();
    let kept: Vec<usize> = (0..m)
        .filter(|k| !measured.iter().any(|(j, _)| j == k))
        .collect();
    if kept.is_empty() {
        return Err(Error::InvalidArgument("measurement leaves no mode".into()));
    }

    let kept_idx = quadrature_indices(&kept);
    let meas_idx = quadrature_indices(&measured.iter().map(|(k, _)| *k).collect::<Vec<_>>());
    let a = cov.select_rows(&kept_idx).select_columns(&kept_idx);
    let b = cov.select_rows(&kept_idx).select_columns(&meas_idx);
    let mut c = cov.select_rows(&meas_idx).select_columns(&meas_idx);

    let n = meas_idx.len();
    let mut proj = DMatrix::<T>::zeros(n, n);
    for (i, (_, outcome)) in measured.iter().enumerate() {
        match outcome {
            Outcome::HomodyneX => proj[(2 * i, 2 * i)] = T::one(),
            Outcome::Heterodyne => {
                for q in [2 * i, 2 * i + 1] {
                    proj[(q, q)] = T::one();
                    c[(q, q)] += half::<T>();
                }
            }
            Outcome::Keep => unreachable!(),
        }
    }
    let projected = &proj * c * &proj;
    let pinv = projected
        .pseudo_inverse(T::tol(PINV_TOL))
        .map_err(|_| Error::Singular("measured block"))?;
    let out = a - &b * pinv * b.transpose();
    Ok(GaussianState::from_parts_unchecked(
        symmetrize(&out),
        nalgebra::DVector::zeros(kept_idx.len()),
    ))
}

/// A POVM element of a Gaussian measurement, regularized into a pure
/// Gaussian state.
#[derive(Debug, Clone, PartialEq)]
pub struct PovmElementState<T: Real> {
    pub state: GaussianState<T>,
    pub r_reg: T,
}

/// The element at outcome zero: per-mode seeds (`x`-squeezed vacuum
/// `diag(e^{−2r}/2, e^{2r}/2)` for homodyne, vacuum for heterodyne) pulled
/// back through the measurement unitary, `S⁻¹ V_seed S⁻ᵀ`.
pub fn povm_element_state<T: Real>(
    spec: &MeasurementSpec<T>,
    r_reg: T,
) -> Result<PovmElementState<T>> {
    if !(r_reg > T::zero()) || !r_reg.is_finite() {
        return Err(Error::InvalidArgument(format!(
            "r_reg = {r_reg} must be > 0"
        )));
    }
    if spec.pattern.contains(&Outcome::Keep) {
        return Err(Error::InvalidArgument(
            "POVM element needs every mode measured".into(),
        ));
    }
    let m = spec.num_modes();
    let mut seed = vacuum_state::<T>(m)?;
    for (k, &o) in spec.pattern.iter().enumerate() {
        if o == Outcome::HomodyneX {
            let sq = SymplecticMatrix::squeezer(r_reg).embed(&[k], m)?;
            seed = apply_symplectic(&seed, &sq)?;
        }
    }
    let state = apply_symplectic(&seed, &spec.symplectic.inverse())?;
    Ok(PovmElementState { state, r_reg })
}
