//! Gaussian channels as affine maps on covariance matrices, `V ↦ X V Xᵀ + Y`.
//!
//! Single-mode primitives (loss, amplification, added noise, single-quadrature
//! noise, rotations and squeezers) compose into [`GaussianChannel`]s. Every
//! channel built from a [`ChannelSpec`] remembers that spec, which is what
//! the dual map and the amplification-then-loss reparameterization work from.

use std::fmt;
use std::str::FromStr;

use nalgebra::{DMatrix, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gaussian::{
    check_square_even, check_symmetric, max_abs, quadrature_indices, symmetrize, symplectic_form,
    GaussianState, SymplecticMatrix,
};
use crate::scalar::{half, lit, Real};

/// Slack on positivity of `Y` and of the complete-positivity matrix.
pub const CP_TOL: f64 = 1e-10;
/// Tolerance for matrix-shape tests (determinants, isotropy, rank).
pub const SHAPE_TOL: f64 = 1e-12;
/// Reparameterized losses within this distance of `[0, 1]` are clamped.
pub const CLAMP_TOL: f64 = 1e-12;
/// Reparameterized losses further than this outside `[0, 1]` are a bug.
pub const CLAMP_HARD_TOL: f64 = 1e-9;

/// Which quadrature a single-quadrature noise channel acts on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Quadrature {
    X,
    P,
}

/// One single-mode channel or unitary.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "op", rename_all = "lowercase", deny_unknown_fields)]
pub enum Primitive {
    Loss { l: f64 },
    Amp { a: f64 },
    Noise { n: f64 },
    B1 { eps: f64, quad: Quadrature },
    Rotate { theta: f64 },
    Squeeze { z: f64 },
}

impl Primitive {
    pub fn validate(&self) -> Result<()> {
        let bad = |what: &str| Err(Error::InvalidArgument(what.to_string()));
        match *self {
            Primitive::Loss { l } if !(0.0..=1.0).contains(&l) => bad("loss l must be in [0, 1]"),
            Primitive::Amp { a } if !(a >= 1.0 && a.is_finite()) => {
                bad("amplification a must be finite and >= 1")
            }
            Primitive::Noise { n } if !(n >= 0.0 && n.is_finite()) => {
                bad("noise n must be finite and >= 0")
            }
            Primitive::B1 { eps, .. } if !(eps > 0.0 && eps.is_finite()) => {
                bad("b1 eps must be finite and > 0")
            }
            Primitive::Rotate { theta } if !theta.is_finite() => {
                bad("rotation angle must be finite")
            }
            Primitive::Squeeze { z } if !z.is_finite() => bad("squeezing must be finite"),
            _ => Ok(()),
        }
    }

    fn matrices<T: Real>(&self) -> (DMatrix<T>, DMatrix<T>) {
        let id = DMatrix::<T>::identity(2, 2);
        let zero = DMatrix::<T>::zeros(2, 2);
        match *self {
            Primitive::Loss { l } => {
                let l = lit::<T>(l);
                (id.clone() * (T::one() - l).sqrt(), id * (l * half::<T>()))
            }
            Primitive::Amp { a } => {
                let a = lit::<T>(a);
                (id.clone() * a.sqrt(), id * ((a - T::one()) * half::<T>()))
            }
            Primitive::Noise { n } => (id.clone(), id * lit::<T>(n)),
            Primitive::B1 { eps, quad } => {
                let mut y = zero;
                let k = match quad {
                    Quadrature::X => 0,
                    Quadrature::P => 1,
                };
                y[(k, k)] = lit(eps);
                (id, y)
            }
            Primitive::Rotate { theta } => (
                SymplecticMatrix::rotation(lit::<T>(theta)).matrix().clone(),
                zero,
            ),
            Primitive::Squeeze { z } => (
                SymplecticMatrix::squeezer(lit::<T>(z)).matrix().clone(),
                zero,
            ),
        }
    }
}

impl fmt::Display for Primitive {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match *self {
            Primitive::Loss { l } => write!(f, "loss:{l}"),
            Primitive::Amp { a } => write!(f, "amp:{a}"),
            Primitive::Noise { n } => write!(f, "noise:{n}"),
            Primitive::B1 { eps, quad } => {
                let q = if quad == Quadrature::X { "x" } else { "p" };
                write!(f, "b1:{eps}:{q}")
            }
            Primitive::Rotate { theta } => write!(f, "rotate:{theta}"),
            Primitive::Squeeze { z } => write!(f, "squeeze:{z}"),
        }
    }
}

impl FromStr for Primitive {
    type Err = Error;

    /// `op:param[:param]`, e.g. `loss:0.3` or `b1:0.4:x`.
    fn from_str(s: &str) -> Result<Self> {
        let parts: Vec<&str> = s.trim().split(':').map(str::trim).collect();
        let num = |i: usize| -> Result<f64> {
            let raw = parts
                .get(i)
                .ok_or_else(|| Error::Parse(format!("`{s}`: missing parameter")))?;
            raw.parse::<f64>()
                .map_err(|_| Error::Parse(format!("`{s}`: `{raw}` is not a number")))
        };
        let arity = |n: usize| -> Result<()> {
            if parts.len() != n + 1 {
                return Err(Error::Parse(format!("`{s}`: expected {n} parameter(s)")));
            }
            Ok(())
        };
        let prim = match parts[0] {
            "loss" => arity(1).and_then(|_| Ok(Primitive::Loss { l: num(1)? }))?,
            "amp" => arity(1).and_then(|_| Ok(Primitive::Amp { a: num(1)? }))?,
            "noise" => arity(1).and_then(|_| Ok(Primitive::Noise { n: num(1)? }))?,
            "rotate" => arity(1).and_then(|_| Ok(Primitive::Rotate { theta: num(1)? }))?,
            "squeeze" => arity(1).and_then(|_| Ok(Primitive::Squeeze { z: num(1)? }))?,
            "b1" => {
                arity(2)?;
                let quad = match parts[2] {
                    "x" => Quadrature::X,
                    "p" => Quadrature::P,
                    q => return Err(Error::Parse(format!("`{s}`: unknown quadrature `{q}`"))),
                };
                Primitive::B1 { eps: num(1)?, quad }
            }
            op => return Err(Error::Parse(format!("unknown channel op `{op}`"))),
        };
        prim.validate()?;
        Ok(prim)
    }
}

/// Ordered list of primitives; the first entry acts first.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ChannelSpec(pub Vec<Primitive>);

impl ChannelSpec {
    pub fn new(prims: Vec<Primitive>) -> Result<Self> {
        let spec = Self(prims);
        spec.validate()?;
        Ok(spec)
    }

    pub fn identity() -> Self {
        Self(Vec::new())
    }

    pub fn primitives(&self) -> &[Primitive] {
        &self.0
    }

    pub fn validate(&self) -> Result<()> {
        self.0.iter().try_for_each(Primitive::validate)
    }

    /// Compose the primitives into a single-mode channel.
    pub fn build<T: Real>(&self) -> Result<GaussianChannel<T>> {
        self.validate()?;
        let mut x = DMatrix::<T>::identity(2, 2);
        let mut y = DMatrix::<T>::zeros(2, 2);
        for p in &self.0 {
            let (px, py) = p.matrices::<T>();
            y = &px * &y * px.transpose() + py;
            x = px * x;
        }
        Ok(GaussianChannel {
            x,
            y: symmetrize(&y),
            provenance: Some(self.clone()),
        })
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let spec: Self = serde_json::from_str(s).map_err(|e| Error::Parse(e.to_string()))?;
        spec.validate()?;
        Ok(spec)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("spec serializes")
    }
}

impl fmt::Display for ChannelSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.0.is_empty() {
            return f.write_str("identity");
        }
        for (i, p) in self.0.iter().enumerate() {
            if i > 0 {
                f.write_str(",")?;
            }
            write!(f, "{p}")?;
        }
        Ok(())
    }
}

impl FromStr for ChannelSpec {
    type Err = Error;

    /// Comma-separated primitives, e.g. `loss:0.3,noise:0.2`. The empty
    /// string and `identity` denote the identity channel.
    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        if s.is_empty() || s == "identity" {
            return Ok(Self::identity());
        }
        s.split(',')
            .map(str::parse)
            .collect::<Result<Vec<_>>>()
            .map(Self)
    }
}

/// A Gaussian channel `V ↦ X V Xᵀ + Y`, ignoring displacements.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussianChannel<T: Real> {
    x: DMatrix<T>,
    y: DMatrix<T>,
    provenance: Option<ChannelSpec>,
}

impl<T: Real> GaussianChannel<T> {
    /// Raw constructor; checks shape, `Y ≥ 0` and complete positivity.
    pub fn new(x: DMatrix<T>, y: DMatrix<T>) -> Result<Self> {
        check_square_even(&x)?;
        if y.shape() != x.shape() {
            return Err(Error::DimensionMismatch {
                expected: x.nrows(),
                found: y.nrows(),
            });
        }
        check_symmetric(&y)?;
        let y = symmetrize(&y);
        let c = Self {
            x,
            y,
            provenance: None,
        };
        if !c.is_completely_positive() {
            return Err(Error::NotCompletelyPositive);
        }
        Ok(c)
    }

    pub fn identity(m: usize) -> Self {
        Self {
            x: DMatrix::identity(2 * m, 2 * m),
            y: DMatrix::zeros(2 * m, 2 * m),
            provenance: (m == 1).then(ChannelSpec::identity),
        }
    }

    pub fn num_modes(&self) -> usize {
        self.x.nrows() / 2
    }

    pub fn x(&self) -> &DMatrix<T> {
        &self.x
    }

    pub fn y(&self) -> &DMatrix<T> {
        &self.y
    }

    pub fn provenance(&self) -> Option<&ChannelSpec> {
        self.provenance.as_ref()
    }

    /// `Y ≥ 0` and `Y + (i/2)(Ω − X Ω Xᵀ) ≥ 0`, the latter through its real
    /// embedding `[[Y, −B], [B, Y]]`.
    pub fn is_completely_positive(&self) -> bool {
        let n = self.x.nrows();
        let omega = symplectic_form::<T>(n / 2);
        let b = (&omega - &self.x * &omega * self.x.transpose()) * half::<T>();
        let mut big = DMatrix::<T>::zeros(2 * n, 2 * n);
        big.view_mut((0, 0), (n, n)).copy_from(&self.y);
        big.view_mut((n, n), (n, n)).copy_from(&self.y);
        big.view_mut((0, n), (n, n)).copy_from(&(-&b));
        big.view_mut((n, 0), (n, n)).copy_from(&b);
        let scale = T::one().max(max_abs(&big));
        let tol = T::tol(CP_TOL) * scale;
        let min_y = SymmetricEigen::new(self.y.clone()).eigenvalues.min();
        let min_big = SymmetricEigen::new(symmetrize(&big)).eigenvalues.min();
        min_y >= -tol && min_big >= -tol
    }

    /// Action on a covariance matrix of the same size.
    pub fn apply_to_cov(&self, cov: &DMatrix<T>) -> Result<DMatrix<T>> {
        if cov.nrows() != self.x.nrows() || cov.ncols() != self.x.nrows() {
            return Err(Error::DimensionMismatch {
                expected: self.x.nrows(),
                found: cov.nrows(),
            });
        }
        Ok(symmetrize(&(&self.x * cov * self.x.transpose() + &self.y)))
    }

    /// `(κ, μ)` when the channel acts as `V ↦ κ R V Rᵀ + μ I` with `R` a
    /// rotation: a phase-insensitive channel up to a trailing phase shift.
    pub fn phase_insensitive_params(&self) -> Option<(T, T)> {
        if self.num_modes() != 1 {
            return None;
        }
        let xxt = &self.x * self.x.transpose();
        let kappa = (xxt[(0, 0)] + xxt[(1, 1)]) * half::<T>();
        let scale = T::one().max(kappa);
        let tol = T::tol(SHAPE_TOL) * scale;
        let iso_x = (xxt[(0, 0)] - xxt[(1, 1)]).abs() <= tol && xxt[(0, 1)].abs() <= tol;
        let orient = self.x.determinant() >= -tol;
        let mu = (self.y[(0, 0)] + self.y[(1, 1)]) * half::<T>();
        let yscale = T::one().max(mu);
        let iso_y = (self.y[(0, 0)] - self.y[(1, 1)]).abs() <= T::tol(SHAPE_TOL) * yscale
            && self.y[(0, 1)].abs() <= T::tol(SHAPE_TOL) * yscale;
        (iso_x && orient && iso_y).then_some((kappa, mu))
    }

    /// `det X = 1` with `Y` of rank one: noise on a single quadrature, up
    /// to Gaussian unitaries.
    fn is_b1_shape(&self) -> bool {
        if self.num_modes() != 1 {
            return false;
        }
        let tol = T::tol(SHAPE_TOL);
        if (self.x.determinant() - T::one()).abs() > tol * T::one().max(self.x.norm_squared()) {
            return false;
        }
        y_rank(&self.y) == 1
    }

    fn is_unitary_shape(&self) -> bool {
        let tol = T::tol(SHAPE_TOL);
        max_abs(&self.y) <= tol
            && SymplecticMatrix::new(self.x.clone()).is_ok()
            && (self.num_modes() != 1 || (self.x.determinant() - T::one()).abs() <= tol)
    }
}

fn y_rank<T: Real>(y: &DMatrix<T>) -> usize {
    let ev = SymmetricEigen::new(y.clone()).eigenvalues;
    let largest = ev.iter().fold(T::zero(), |a, &v| a.max(v.abs()));
    let tol = T::tol(SHAPE_TOL) * T::one().max(largest);
    ev.iter().filter(|v| v.abs() > tol).count()
}

fn single<T: Real>(p: Primitive) -> Result<GaussianChannel<T>> {
    ChannelSpec::new(vec![p])?.build()
}

/// Loss `V ↦ (1−l) V + l I/2`.
pub fn loss<T: Real>(l: f64) -> Result<GaussianChannel<T>> {
    single(Primitive::Loss { l })
}

/// Amplification `V ↦ a V + (a−1) I/2`.
pub fn amp<T: Real>(a: f64) -> Result<GaussianChannel<T>> {
    single(Primitive::Amp { a })
}

/// Added noise `V ↦ V + n I`.
pub fn noise<T: Real>(n: f64) -> Result<GaussianChannel<T>> {
    single(Primitive::Noise { n })
}

/// Noise `eps` added to one quadrature only.
pub fn b1<T: Real>(eps: f64, quad: Quadrature) -> Result<GaussianChannel<T>> {
    single(Primitive::B1 { eps, quad })
}

pub fn rotation<T: Real>(theta: f64) -> Result<GaussianChannel<T>> {
    single(Primitive::Rotate { theta })
}

pub fn squeeze<T: Real>(z: f64) -> Result<GaussianChannel<T>> {
    single(Primitive::Squeeze { z })
}

/// `second ∘ first`: `X = X₂X₁`, `Y = X₂Y₁X₂ᵀ + Y₂`.
pub fn compose<T: Real>(
    second: &GaussianChannel<T>,
    first: &GaussianChannel<T>,
) -> Result<GaussianChannel<T>> {
    if second.x.nrows() != first.x.nrows() {
        return Err(Error::DimensionMismatch {
            expected: first.x.nrows(),
            found: second.x.nrows(),
        });
    }
    let x = &second.x * &first.x;
    let y = symmetrize(&(&second.x * &first.y * second.x.transpose() + &second.y));
    let provenance = match (&first.provenance, &second.provenance) {
        (Some(a), Some(b)) => {
            let mut prims = a.0.clone();
            prims.extend_from_slice(&b.0);
            Some(ChannelSpec(prims))
        }
        _ => None,
    };
    Ok(GaussianChannel { x, y, provenance })
}

/// Apply `c` to the listed modes of `state` (identity elsewhere). Means are
/// mapped by `X` only; channel displacements are not modelled.
pub fn apply_channel<T: Real>(
    c: &GaussianChannel<T>,
    state: &GaussianState<T>,
    target_modes: &[usize],
) -> Result<GaussianState<T>> {
    let m = state.num_modes();
    if target_modes.len() != c.num_modes() {
        return Err(Error::DimensionMismatch {
            expected: c.num_modes(),
            found: target_modes.len(),
        });
    }
    let x_embed = SymplecticMatrix::from_matrix_unchecked(c.x.clone())
        .embed(target_modes, m)?
        .matrix()
        .clone();
    let idx = quadrature_indices(target_modes);
    let mut y_embed = DMatrix::<T>::zeros(2 * m, 2 * m);
    for (a, &i) in idx.iter().enumerate() {
        for (b, &j) in idx.iter().enumerate() {
            y_embed[(i, j)] = c.y[(a, b)];
        }
    }
    let cov = &x_embed * state.cov() * x_embed.transpose() + y_embed;
    let mean = &x_embed * state.mean();
    Ok(GaussianState::from_parts_unchecked(cov, mean))
}

/// Entanglement-breaking test for phase-insensitive single-mode channels:
/// `V ↦ κV + μI` breaks entanglement iff `μ ≥ (1 + κ)/2` (boundary inclusive).
/// Single-quadrature noise channels are never entanglement-breaking.
pub fn is_entanglement_breaking<T: Real>(c: &GaussianChannel<T>) -> Result<bool> {
    if let Some((kappa, mu)) = c.phase_insensitive_params() {
        return Ok(eb_condition(kappa, mu));
    }
    if c.is_b1_shape() {
        return Ok(false);
    }
    Err(Error::UnsupportedChannel(
        "entanglement-breaking test needs a phase-insensitive or single-quadrature-noise channel"
            .into(),
    ))
}

pub(crate) fn eb_condition<T: Real>(kappa: T, mu: T) -> bool {
    mu >= (T::one() + kappa) * half::<T>() - T::tol(SHAPE_TOL)
}

/// Dual spec: the list reversed with loss ↔ amplification swapped
/// (`a* = 1/(1−l)`, `l* = 1 − 1/a`) and unitaries inverted.
pub fn dual_spec(spec: &ChannelSpec) -> Result<ChannelSpec> {
    spec.validate()?;
    spec.0
        .iter()
        .rev()
        .map(|p| match *p {
            Primitive::Loss { l } if l >= 1.0 => Err(Error::NoFiniteDual),
            Primitive::Loss { l } => Ok(Primitive::Amp { a: 1.0 / (1.0 - l) }),
            Primitive::Amp { a } => Ok(Primitive::Loss { l: 1.0 - 1.0 / a }),
            Primitive::Rotate { theta } => Ok(Primitive::Rotate { theta: -theta }),
            Primitive::Squeeze { z } => Ok(Primitive::Squeeze { z: -z }),
            Primitive::Noise { .. } | Primitive::B1 { .. } => Err(Error::UnsupportedChannel(
                format!("no dual for `{p}`; reparameterize as amplification then loss first"),
            )),
        })
        .collect::<Result<Vec<_>>>()
        .map(ChannelSpec)
}

/// Dual channel (up to normalization) of a channel built from a spec.
pub fn dual<T: Real>(c: &GaussianChannel<T>) -> Result<GaussianChannel<T>> {
    let spec = c.provenance.as_ref().ok_or_else(|| {
        Error::UnsupportedChannel("dual needs a channel built from primitives".into())
    })?;
    dual_spec(spec)?.build()
}

/// Unitary-equivalence families of single-mode Gaussian channels.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum HolevoType {
    A,
    B1,
    B2,
    C1,
    C2,
    D,
}

impl fmt::Display for HolevoType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            HolevoType::A => "A",
            HolevoType::B1 => "B1",
            HolevoType::B2 => "B2",
            HolevoType::C1 => "C1",
            HolevoType::C2 => "C2",
            HolevoType::D => "D",
        };
        f.write_str(s)
    }
}

/// Family of a raw single-mode `(X, Y)`. The identity channel (and any
/// Gaussian unitary) lands in `B2` as zero added noise.
pub fn classify_matrices<T: Real>(x: &DMatrix<T>, y: &DMatrix<T>) -> Result<HolevoType> {
    let c = GaussianChannel::new(x.clone(), y.clone())?;
    if c.num_modes() != 1 {
        return Err(Error::UnsupportedChannel(
            "classification is single-mode only".into(),
        ));
    }
    let det = x.determinant();
    let tol = T::tol(SHAPE_TOL) * T::one().max(x.norm_squared());
    Ok(if det.abs() <= tol {
        HolevoType::A
    } else if (det - T::one()).abs() <= tol {
        match y_rank(y) {
            1 => HolevoType::B1,
            _ => HolevoType::B2,
        }
    } else if det < T::zero() {
        HolevoType::D
    } else if det < T::one() {
        HolevoType::C1
    } else {
        HolevoType::C2
    })
}

pub fn classify<T: Real>(spec: &ChannelSpec) -> Result<HolevoType> {
    let c = spec.build::<T>()?;
    classify_matrices(&c.x, &c.y)
}

/// A channel reduced, up to unitary equivalence, to the form the
/// separability decision works with.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum CanonicalForm<T> {
    /// Amplification `a ≥ 1` followed by loss `0 ≤ l ≤ 1`.
    AmpThenLoss {
        a: T,
        l: T,
    },
    /// Noise on a single quadrature; equivalent to identity for separability.
    B1Equivalent,
    EntanglementBreaking,
    Identity,
}

impl<T: Real> CanonicalForm<T> {
    /// Loss parameter entering the `l_A + l_B ≥ 1` test; `None` when the
    /// channel breaks entanglement.
    pub fn effective_loss(&self) -> Option<T> {
        match *self {
            CanonicalForm::AmpThenLoss { l, .. } => Some(l),
            CanonicalForm::B1Equivalent | CanonicalForm::Identity => Some(T::zero()),
            CanonicalForm::EntanglementBreaking => None,
        }
    }

    /// Amplification parameter; `1` for identity-like forms.
    pub fn effective_amp(&self) -> Option<T> {
        match *self {
            CanonicalForm::AmpThenLoss { a, .. } => Some(a),
            CanonicalForm::B1Equivalent | CanonicalForm::Identity => Some(T::one()),
            CanonicalForm::EntanglementBreaking => None,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            CanonicalForm::AmpThenLoss { .. } => "amp_then_loss",
            CanonicalForm::B1Equivalent => "b1_equivalent",
            CanonicalForm::EntanglementBreaking => "entanglement_breaking",
            CanonicalForm::Identity => "identity",
        }
    }
}

/// Amplification-then-loss pair reproducing `V ↦ κV + μI`:
/// `l = (2μ − κ + 1)/2`, `a = κ/(1 − l)`. Caller guarantees the map is CP and
/// not entanglement-breaking.
pub fn amp_loss_from_kappa_mu<T: Real>(kappa: T, mu: T) -> Result<(T, T)> {
    let raw = (lit::<T>(2.0) * mu - kappa + T::one()) * half::<T>();
    let l = clamp_unit(raw)?;
    if l >= T::one() {
        return Err(Error::Consistency(format!(
            "reparameterized loss {raw} reaches 1 for a non-entanglement-breaking channel"
        )));
    }
    let a = kappa / (T::one() - l);
    let a = if a < T::one() && a > T::one() - T::tol(CLAMP_HARD_TOL) {
        T::one()
    } else {
        a
    };
    if a < T::one() {
        return Err(Error::Consistency(format!(
            "reparameterized amplification {a} < 1"
        )));
    }
    Ok((a, l))
}

fn clamp_unit<T: Real>(v: T) -> Result<T> {
    let soft = T::tol(CLAMP_TOL);
    let hard = T::tol(CLAMP_HARD_TOL);
    if v < -hard || v > T::one() + hard {
        return Err(Error::Consistency(format!(
            "loss parameter {v} outside [0, 1]"
        )));
    }
    if v < T::zero() {
        if v < -soft {
            return Err(Error::Consistency(format!("loss parameter {v} below 0")));
        }
        return Ok(T::zero());
    }
    if v > T::one() {
        if v > T::one() + soft {
            return Err(Error::Consistency(format!("loss parameter {v} above 1")));
        }
        return Ok(T::one());
    }
    Ok(v)
}

/// Reduce a spec to amplification followed by loss, up to unitary
/// equivalence. Rotations are stripped; squeezers are accepted only where
/// the result is single-quadrature noise or unitary.
pub fn to_amp_then_loss<T: Real>(spec: &ChannelSpec) -> Result<CanonicalForm<T>> {
    let c = spec.build::<T>()?;
    if let Some((kappa, mu)) = c.phase_insensitive_params() {
        if eb_condition(kappa, mu) {
            return Ok(CanonicalForm::EntanglementBreaking);
        }
        let tol = T::tol(SHAPE_TOL);
        if (kappa - T::one()).abs() <= tol && mu.abs() <= tol {
            return Ok(CanonicalForm::Identity);
        }
        let (a, l) = amp_loss_from_kappa_mu(kappa, mu)?;
        return Ok(CanonicalForm::AmpThenLoss { a, l });
    }
    if c.is_b1_shape() {
        return Ok(CanonicalForm::B1Equivalent);
    }
    if c.is_unitary_shape() {
        return Ok(CanonicalForm::Identity);
    }
    Err(Error::UnsupportedChannel(format!(
        "`{spec}` is neither phase-insensitive nor single-quadrature noise"
    )))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gaussian::{two_mode_squeezed_vacuum, vacuum_state};
    use approx::assert_relative_eq;

    fn spec(s: &str) -> ChannelSpec {
        s.parse().unwrap()
    }

    fn diag(a: f64, b: f64) -> DMatrix<f64> {
        DMatrix::from_row_slice(2, 2, &[a, 0.0, 0.0, b])
    }

    #[test]
    fn loss_limits() {
        let c = loss::<f64>(0.0).unwrap();
        assert_eq!(c.x(), &DMatrix::identity(2, 2));
        assert_eq!(c.y(), &DMatrix::zeros(2, 2));
        let c = loss::<f64>(1.0).unwrap();
        assert_eq!(c.x(), &DMatrix::zeros(2, 2));
        assert_eq!(c.y(), &diag(0.5, 0.5));
        let vac = DMatrix::identity(2, 2) * 0.5;
        assert_relative_eq!(
            loss::<f64>(0.5).unwrap().apply_to_cov(&vac).unwrap(),
            vac.clone()
        );
        assert!(loss::<f64>(1.2).is_err());
        assert!(loss::<f64>(-0.1).is_err());
    }

    #[test]
    fn amp_and_noise_actions() {
        let vac = DMatrix::identity(2, 2) * 0.5;
        assert_eq!(amp::<f64>(1.0).unwrap().x(), &DMatrix::identity(2, 2));
        assert_relative_eq!(
            amp::<f64>(2.0).unwrap().apply_to_cov(&vac).unwrap(),
            diag(1.5, 1.5)
        );
        assert_relative_eq!(
            noise::<f64>(1.0).unwrap().apply_to_cov(&vac).unwrap(),
            diag(1.5, 1.5)
        );
        assert_eq!(noise::<f64>(0.0).unwrap().y(), &DMatrix::zeros(2, 2));
        for a in [1.0, 1.5, 3.0, 40.0] {
            assert!(amp::<f64>(a).unwrap().is_completely_positive());
        }
        assert!(amp::<f64>(0.9).is_err());
        assert!(noise::<f64>(-1.0).is_err());
    }

    #[test]
    fn b1_definition_and_composition() {
        assert_eq!(b1::<f64>(0.3, Quadrature::X).unwrap().y(), &diag(0.3, 0.0));
        assert!(b1::<f64>(0.0, Quadrature::X).is_err());
        let both = compose(
            &b1::<f64>(0.25, Quadrature::P).unwrap(),
            &b1::<f64>(0.25, Quadrature::X).unwrap(),
        )
        .unwrap();
        let n = noise::<f64>(0.25).unwrap();
        assert_relative_eq!(both.x().clone(), n.x().clone());
        assert_relative_eq!(both.y().clone(), n.y().clone());
    }

    #[test]
    fn squeezing_shrinks_single_quadrature_noise() {
        let (eps, z) = (0.3, 0.8f64);
        let c = spec(&format!("squeeze:{},b1:{eps}:x,squeeze:{z}", -z))
            .build::<f64>()
            .unwrap();
        // oracle: conjugate Y = diag(eps, 0) by diag(e^{-z}, e^{z})
        let s = diag((-z).exp(), z.exp());
        let expect_y = &s * diag(eps, 0.0) * s.transpose();
        assert_relative_eq!(c.x().clone(), DMatrix::identity(2, 2), epsilon = 1e-12);
        assert_relative_eq!(c.y().clone(), expect_y, epsilon = 1e-12);
        assert_relative_eq!(c.y()[(0, 0)], eps * (-2.0 * z).exp(), epsilon = 1e-12);
    }

    #[test]
    fn composition_rules() {
        let c = compose(&loss::<f64>(0.25).unwrap(), &amp::<f64>(3.0).unwrap()).unwrap();
        let (a, l) = (3.0f64, 0.25);
        assert_relative_eq!(c.x()[(0, 0)], (a * (1.0 - l)).sqrt(), epsilon = 1e-14);
        assert_relative_eq!(
            c.y()[(0, 0)],
            (a * (1.0 - l) + 2.0 * l - 1.0) / 2.0,
            epsilon = 1e-14
        );

        let id = GaussianChannel::<f64>::identity(1);
        let n = noise::<f64>(0.4).unwrap();
        let back = compose(&id, &n).unwrap();
        assert_eq!(back.x(), n.x());
        assert_eq!(back.y(), n.y());

        // 1 − (1−l)(1−l') from probing with a non-trivial matrix
        let twice = compose(&loss::<f64>(0.5).unwrap(), &loss::<f64>(0.5).unwrap()).unwrap();
        let probe = DMatrix::from_row_slice(2, 2, &[2.0, 0.3, 0.3, 0.9]);
        let want = probe.clone() * 0.25 + DMatrix::identity(2, 2) * (0.75 * 0.5);
        assert_relative_eq!(twice.apply_to_cov(&probe).unwrap(), want, epsilon = 1e-14);
        let l75 = loss::<f64>(0.75).unwrap();
        assert_relative_eq!(twice.x().clone(), l75.x().clone(), epsilon = 1e-14);
    }

    #[test]
    fn apply_channel_on_tmsv() {
        let tmsv = two_mode_squeezed_vacuum(1.0f64).unwrap();
        let id = GaussianChannel::identity(1);
        assert_eq!(apply_channel(&id, &tmsv, &[0]).unwrap().cov(), tmsv.cov());

        let out = apply_channel(&loss::<f64>(1.0).unwrap(), &tmsv, &[1]).unwrap();
        assert_relative_eq!(out.reduced(&[1]).unwrap().cov().clone(), diag(0.5, 0.5));
        assert!(out
            .cov()
            .view((0, 2), (2, 2))
            .iter()
            .all(|v| v.abs() < 1e-15));

        let out = apply_channel(&loss::<f64>(0.3).unwrap(), &tmsv, &[0]).unwrap();
        assert_relative_eq!(out.cov()[(0, 2)], 1.5172245625, epsilon = 1e-9);
        assert_relative_eq!(
            out.cov()[(0, 2)],
            0.7f64.sqrt() * 2.0f64.sinh() / 2.0,
            epsilon = 1e-14
        );
        assert!(apply_channel(&id, &tmsv, &[2]).is_err());
    }

    #[test]
    fn entanglement_breaking_threshold() {
        assert!(is_entanglement_breaking(&noise::<f64>(1.0).unwrap()).unwrap());
        assert!(
            !is_entanglement_breaking(&spec("loss:0.3,noise:0.2").build::<f64>().unwrap()).unwrap()
        );
        assert!(
            is_entanglement_breaking(&spec("loss:0.5,noise:0.5").build::<f64>().unwrap()).unwrap()
        );
        assert!(!is_entanglement_breaking(&b1::<f64>(5.0, Quadrature::X).unwrap()).unwrap());
        let sq = spec("loss:0.3,squeeze:0.4").build::<f64>().unwrap();
        assert!(matches!(
            is_entanglement_breaking(&sq),
            Err(Error::UnsupportedChannel(_))
        ));
    }

    #[test]
    fn eb_grid_matches_loss_plus_noise() {
        for i in 0..=20 {
            for j in 0..=20 {
                let (l, n) = (i as f64 / 20.0, j as f64 / 20.0);
                let c = ChannelSpec(vec![Primitive::Loss { l }, Primitive::Noise { n }]);
                let eb = is_entanglement_breaking(&c.build::<f64>().unwrap()).unwrap();
                assert_eq!(eb, (i + j) >= 20, "l={l} n={n}");
            }
        }
    }

    #[test]
    fn duals() {
        let d = dual(&loss::<f64>(0.5).unwrap()).unwrap();
        assert_eq!(d.provenance().unwrap().0, vec![Primitive::Amp { a: 2.0 }]);
        let d = dual(&amp::<f64>(2.0).unwrap()).unwrap();
        assert_eq!(d.provenance().unwrap().0, vec![Primitive::Loss { l: 0.5 }]);
        let d = dual(&GaussianChannel::<f64>::identity(1)).unwrap();
        assert_eq!(d.x(), &DMatrix::identity(2, 2));
        assert_eq!(dual(&loss::<f64>(1.0).unwrap()), Err(Error::NoFiniteDual));
        assert!(matches!(
            dual(&noise::<f64>(0.1).unwrap()),
            Err(Error::UnsupportedChannel(_))
        ));
        let raw =
            GaussianChannel::<f64>::new(DMatrix::identity(2, 2), DMatrix::zeros(2, 2)).unwrap();
        assert!(dual(&raw).is_err());
        let d = dual_spec(&spec("amp:3,loss:0.2")).unwrap();
        assert_eq!(
            d.0,
            vec![
                Primitive::Amp { a: 1.25 },
                Primitive::Loss { l: 1.0 - 1.0 / 3.0 }
            ]
        );
    }

    #[test]
    fn classification_examples() {
        assert_eq!(classify::<f64>(&spec("loss:0.3")).unwrap(), HolevoType::C1);
        assert_eq!(classify::<f64>(&spec("amp:2")).unwrap(), HolevoType::C2);
        assert_eq!(classify::<f64>(&spec("noise:0.5")).unwrap(), HolevoType::B2);
        assert_eq!(classify::<f64>(&spec("b1:0.2:x")).unwrap(), HolevoType::B1);
        assert_eq!(classify::<f64>(&spec("loss:1")).unwrap(), HolevoType::A);
        assert_eq!(classify::<f64>(&spec("identity")).unwrap(), HolevoType::B2);
        assert_eq!(
            classify::<f64>(&spec("squeeze:0.5,b1:0.2:p,squeeze:-0.5")).unwrap(),
            HolevoType::B1
        );
        // transpose-like map: X = diag(√2, -√2) with enough noise
        let x = diag(2f64.sqrt(), -(2f64.sqrt()));
        assert_eq!(
            classify_matrices(&x, &diag(1.5, 1.5)).unwrap(),
            HolevoType::D
        );
        assert_eq!(
            classify_matrices(
                &(DMatrix::<f64>::identity(2, 2) * 0.5),
                &DMatrix::zeros(2, 2)
            ),
            Err(Error::NotCompletelyPositive)
        );
    }

    #[test]
    fn reparameterization_examples() {
        let check = |s: &str, a: f64, l: f64| match to_amp_then_loss::<f64>(&spec(s)).unwrap() {
            CanonicalForm::AmpThenLoss { a: ga, l: gl } => {
                assert_relative_eq!(ga, a, epsilon = 1e-12);
                assert_relative_eq!(gl, l, epsilon = 1e-12);
            }
            other => panic!("{s}: unexpected {other:?}"),
        };
        check("loss:0.3,noise:0.2", 0.7 / 0.5, 0.5);
        check("noise:0.5", 2.0, 0.5);
        check("amp:1.5,noise:0.2", 1.5 / 0.8, 0.2);
        check("rotate:0.7,loss:0.3,rotate:-2", 1.0, 0.3);
        assert_eq!(
            to_amp_then_loss::<f64>(&spec("noise:1.2")).unwrap(),
            CanonicalForm::EntanglementBreaking
        );
        assert_eq!(
            to_amp_then_loss::<f64>(&spec("b1:0.4:x")).unwrap(),
            CanonicalForm::B1Equivalent
        );
        assert_eq!(
            to_amp_then_loss::<f64>(&spec("identity")).unwrap(),
            CanonicalForm::Identity
        );
        assert_eq!(
            to_amp_then_loss::<f64>(&spec("squeeze:0.3")).unwrap(),
            CanonicalForm::Identity
        );
        assert!(matches!(
            to_amp_then_loss::<f64>(&spec("loss:0.3,squeeze:0.3,noise:0.1")),
            Err(Error::UnsupportedChannel(_))
        ));
    }

    #[test]
    fn clamping() {
        assert_eq!(clamp_unit(-1e-13f64).unwrap(), 0.0);
        assert_eq!(clamp_unit(1.0 + 1e-13f64).unwrap(), 1.0);
        assert!(matches!(clamp_unit(-1e-8f64), Err(Error::Consistency(_))));
    }

    #[test]
    fn spec_parsing_and_json() {
        let s = spec("loss:0.3, noise:0.2");
        assert_eq!(
            s.0,
            vec![Primitive::Loss { l: 0.3 }, Primitive::Noise { n: 0.2 }]
        );
        assert_eq!(
            s.to_json(),
            r#"[{"op":"loss","l":0.3},{"op":"noise","n":0.2}]"#
        );
        assert_eq!(ChannelSpec::from_json(&s.to_json()).unwrap(), s);
        let b = spec("b1:0.4:x");
        assert_eq!(b.to_json(), r#"[{"op":"b1","eps":0.4,"quad":"x"}]"#);
        assert!(ChannelSpec::from_json(r#"[{"op":"loss","l":0.3,"extra":1}]"#).is_err());
        assert!(ChannelSpec::from_json(r#"[{"op":"loss","l":1.3}]"#).is_err());
        for bad in [
            "loss",
            "loss:x",
            "warp:1",
            "b1:0.3",
            "b1:0.3:q",
            "loss:0.2:0.3",
            "amp:0.5",
        ] {
            assert!(bad.parse::<ChannelSpec>().is_err(), "{bad}");
        }
        assert_eq!(spec("").0, vec![]);
        assert_eq!(spec("amp:2,b1:0.1:p").to_string(), "amp:2,b1:0.1:p");
    }

    #[test]
    fn vacuum_through_loss_stays_physical() {
        let v = vacuum_state::<f64>(1).unwrap();
        let out = apply_channel(&loss::<f64>(0.4).unwrap(), &v, &[0]).unwrap();
        assert_eq!(out.cov(), v.cov());
    }
}
