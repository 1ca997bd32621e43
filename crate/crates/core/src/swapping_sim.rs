//! Entanglement swapping between two two-mode squeezed vacua whose inner
//! modes pass through amplification and loss before a joint measurement.
//!
//! Modes are ordered `A′, A, B, B′`. The channels act on `A` and `B`, the
//! measurement on `(A, B)`, and the output is the state of `(A′, B′)`.

use std::io::Write;

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::channels::{
    apply_channel, to_amp_then_loss, CanonicalForm, ChannelSpec, GaussianChannel, Primitive,
};
use crate::criteria::{
    duan_value, extract_standard_form, log_negativity, ppt_separable, PptReport,
    StandardFormParams, PPT_TOL,
};
use crate::decision::{all_measurements_separable, Verdict};
use crate::error::{Error, Result};
use crate::gaussian::{max_abs, two_mode_squeezed_vacuum, GaussianState};
use crate::measurements::{condition_on_measurement, cv_bell, heterodyne_product, MeasurementSpec};
use crate::scalar::{lit, round_significant, Real};

/// Largest squeezing accepted.
pub const MAX_R: f64 = 12.0;
/// Default squeezing for verdict-confirmation runs.
pub const DEFAULT_R: f64 = 5.0;
/// Closed form and simulation must agree to this, relative to the largest
/// output entry when that exceeds one.
pub const CLOSED_FORM_TOL: f64 = 1e-10;
/// Log-negativity above this counts as swapped entanglement.
pub const SWAP_ENTANGLED_TOL: f64 = 1e-6;
/// Log-negativity at or below this counts as no entanglement.
pub const SWAP_SEPARABLE_TOL: f64 = 1e-8;
/// Bound on the log-negativity after a product measurement.
pub const NO_SWAP_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SwapParams<T> {
    pub r: T,
    pub a_a: T,
    pub a_b: T,
    pub l_a: T,
    pub l_b: T,
    pub n_a_noise: T,
    pub n_b_noise: T,
}

impl<T: Real> SwapParams<T> {
    pub fn new(r: T, a_a: T, a_b: T, l_a: T, l_b: T) -> Result<Self> {
        let p = Self {
            r,
            a_a,
            a_b,
            l_a,
            l_b,
            n_a_noise: T::zero(),
            n_b_noise: T::zero(),
        };
        p.validate()?;
        Ok(p)
    }

    pub fn with_noise(mut self, n_a: T, n_b: T) -> Result<Self> {
        self.n_a_noise = n_a;
        self.n_b_noise = n_b;
        self.validate()?;
        Ok(self)
    }

    pub fn validate(&self) -> Result<()> {
        let bad =
            |what: &str, v: T| Err(Error::InvalidArgument(format!("{what} = {v} out of range")));
        if !(self.r >= T::zero() && self.r <= lit(MAX_R)) {
            return bad("r", self.r);
        }
        for (name, a) in [("a_A", self.a_a), ("a_B", self.a_b)] {
            if !(a >= T::one()) || !a.is_finite() {
                return bad(name, a);
            }
        }
        for (name, l) in [("l_A", self.l_a), ("l_B", self.l_b)] {
            if !(l >= T::zero() && l <= T::one()) {
                return bad(name, l);
            }
        }
        for (name, n) in [("n_A_noise", self.n_a_noise), ("n_B_noise", self.n_b_noise)] {
            if !(n >= T::zero()) || !n.is_finite() {
                return bad(name, n);
            }
        }
        Ok(())
    }

    /// Channel specs of the two arms: amplification, loss, then noise.
    pub fn arm_specs(&self) -> [ChannelSpec; 2] {
        let arm = |a: T, l: T, n: T| {
            let mut prims = vec![
                Primitive::Amp { a: a.as_f64() },
                Primitive::Loss { l: l.as_f64() },
            ];
            if n > T::zero() {
                prims.push(Primitive::Noise { n: n.as_f64() });
            }
            ChannelSpec(prims)
        };
        [
            arm(self.a_a, self.l_a, self.n_a_noise),
            arm(self.a_b, self.l_b, self.n_b_noise),
        ]
    }

    /// Amplification and loss of each arm with the noise folded in; `None`
    /// for an arm that breaks entanglement.
    pub fn effective_amp_loss(&self) -> Result<[Option<(T, T)>; 2]> {
        let fold = |a: T, l: T, n: T, spec: &ChannelSpec| -> Result<Option<(T, T)>> {
            if n == T::zero() {
                return Ok(Some((a, l)));
            }
            Ok(match to_amp_then_loss::<T>(spec)? {
                CanonicalForm::AmpThenLoss { a, l } => Some((a, l)),
                CanonicalForm::EntanglementBreaking => None,
                CanonicalForm::Identity | CanonicalForm::B1Equivalent => {
                    Some((T::one(), T::zero()))
                }
            })
        };
        let [sa, sb] = self.arm_specs();
        Ok([
            fold(self.a_a, self.l_a, self.n_a_noise, &sa)?,
            fold(self.a_b, self.l_b, self.n_b_noise, &sb)?,
        ])
    }
}

/// `κ_A, κ_B, η` for amplification/loss pairs.
fn kappas<T: Real>(a_a: T, l_a: T, a_b: T, l_b: T) -> (T, T, T) {
    (
        a_a * (T::one() - l_a),
        a_b * (T::one() - l_b),
        T::one() - l_a - l_b,
    )
}

fn closed_form_from<T: Real>(
    r: T,
    a_a: T,
    l_a: T,
    a_b: T,
    l_b: T,
) -> Result<StandardFormParams<T>> {
    let (ka, kb, eta) = kappas(a_a, l_a, a_b, l_b);
    let two = lit::<T>(2.0);
    let four = lit::<T>(4.0);
    let c2 = (two * r).cosh();
    let c4 = (four * r).cosh();
    let d = ka + kb - two * eta + (ka + kb) * c2;
    if !(d > T::zero()) {
        return Err(Error::Singular("closed-form denominator"));
    }
    let n_a = (two * ka + kb + two * (ka + kb - two * eta) * c2 + kb * c4) / (four * d);
    let n_b = (two * kb + ka + two * (ka + kb - two * eta) * c2 + ka * c4) / (four * d);
    let cs = r.cosh() * r.sinh();
    let c = two * (ka * kb).sqrt() * cs * cs / d;
    Ok(StandardFormParams { n_a, n_b, c })
}

/// Output `(n_A, n_B, c)` in closed form, with noise folded into each arm.
pub fn closed_form_params<T: Real>(p: &SwapParams<T>) -> Result<StandardFormParams<T>> {
    p.validate()?;
    match p.effective_amp_loss()? {
        [Some((a_a, l_a)), Some((a_b, l_b))] => closed_form_from(p.r, a_a, l_a, a_b, l_b),
        _ => Err(Error::UnsupportedChannel(
            "entanglement-breaking arm has no closed form".into(),
        )),
    }
}

/// `−2(1 − l_A − l_B)/√(κ_A κ_B)`, the value the Duan expression approaches
/// as `r → ∞`.
pub fn large_r_duan_limit<T: Real>(p: &SwapParams<T>) -> Result<T> {
    p.validate()?;
    let [Some((a_a, l_a)), Some((a_b, l_b))] = p.effective_amp_loss()? else {
        return Err(Error::UnsupportedChannel(
            "entanglement-breaking arm".into(),
        ));
    };
    let (ka, kb, eta) = kappas(a_a, l_a, a_b, l_b);
    if !(ka * kb > T::zero()) {
        return Err(Error::Singular("kappa_A kappa_B = 0"));
    }
    Ok(-lit::<T>(2.0) * eta / (ka * kb).sqrt())
}

/// Swap two TMSV(r) through `ch_a` on `A`, `ch_b` on `B` and `measurement` on
/// `(A, B)`. Returns the `(A′, B′)` state and its log-negativity.
pub fn simulate_swap_channels<T: Real>(
    r: T,
    ch_a: &GaussianChannel<T>,
    ch_b: &GaussianChannel<T>,
    measurement: &MeasurementSpec<T>,
) -> Result<(GaussianState<T>, T)> {
    if !(r >= T::zero() && r <= lit(MAX_R)) {
        return Err(Error::InvalidArgument(format!("r = {r} out of range")));
    }
    let tmsv = two_mode_squeezed_vacuum(r)?;
    let state = tmsv.tensor(&tmsv);
    let state = apply_channel(ch_a, &state, &[1])?;
    let state = apply_channel(ch_b, &state, &[2])?;
    let out = condition_on_measurement(&state, measurement, &[1, 2])?;
    let logneg = log_negativity(out.cov())?;
    Ok((out, logneg))
}

#[derive(Debug, Clone, PartialEq)]
pub struct SwapResult<T> {
    pub params: SwapParams<T>,
    pub cov_out: DMatrix<T>,
    pub std: StandardFormParams<T>,
    /// `None` when a marginal is pure and the Duan expression is undefined.
    pub duan: Option<T>,
    pub duan_limit: Option<T>,
    pub logneg: T,
    pub ppt: PptReport<T>,
    pub closed_form: Option<StandardFormParams<T>>,
    /// Largest entrywise gap between `cov_out` and the closed form.
    pub closed_form_deviation: Option<T>,
    pub kappa_a: Option<T>,
    pub kappa_b: Option<T>,
    pub eta: Option<T>,
}

fn arm_channels<T: Real>(p: &SwapParams<T>) -> Result<[GaussianChannel<T>; 2]> {
    let eff = p.effective_amp_loss()?;
    let [sa, sb] = p.arm_specs();
    let build = |e: Option<(T, T)>, raw: &ChannelSpec| match e {
        Some((a, l)) => ChannelSpec(vec![
            Primitive::Amp { a: a.as_f64() },
            Primitive::Loss { l: l.as_f64() },
        ])
        .build::<T>(),
        None => raw.build::<T>(),
    };
    Ok([build(eff[0], &sa)?, build(eff[1], &sb)?])
}

fn finish<T: Real>(
    p: &SwapParams<T>,
    out: GaussianState<T>,
    logneg: T,
    closed_form: Option<StandardFormParams<T>>,
) -> Result<SwapResult<T>> {
    let cov_out = out.cov().clone();
    let std = extract_standard_form(&cov_out)?;
    let duan = match duan_value(&std) {
        Ok(d) => Some(d),
        Err(Error::DegenerateMarginal { .. }) => None,
        Err(e) => return Err(e),
    };
    let ppt = ppt_separable(&cov_out, T::tol(PPT_TOL))?;
    let eff = p.effective_amp_loss()?;
    let (kappa_a, kappa_b, eta) = match eff {
        [Some((a_a, l_a)), Some((a_b, l_b))] => {
            let (ka, kb, eta) = kappas(a_a, l_a, a_b, l_b);
            (Some(ka), Some(kb), Some(eta))
        }
        [ea, eb] => (
            ea.map(|(a, l)| a * (T::one() - l)),
            eb.map(|(a, l)| a * (T::one() - l)),
            None,
        ),
    };
    let duan_limit = large_r_duan_limit(p).ok();
    let closed_form_deviation = closed_form.map(|cf| max_abs(&(&cov_out - cf.to_cov())));
    Ok(SwapResult {
        params: *p,
        cov_out,
        std,
        duan,
        duan_limit,
        logneg,
        ppt,
        closed_form,
        closed_form_deviation,
        kappa_a,
        kappa_b,
        eta,
    })
}

/// Swap through the CV Bell measurement and compare with the closed form.
///
/// Fails with [`Error::Consistency`] if simulation and closed form disagree.
pub fn simulate_swap<T: Real>(p: &SwapParams<T>) -> Result<SwapResult<T>> {
    p.validate()?;
    let [ca, cb] = arm_channels(p)?;
    let (out, logneg) = simulate_swap_channels(p.r, &ca, &cb, &cv_bell())?;
    let closed_form = closed_form_params(p).ok();
    let res = finish(p, out, logneg, closed_form)?;
    if let Some(dev) = res.closed_form_deviation {
        let tol = T::tol(CLOSED_FORM_TOL) * T::one().max(max_abs(&res.cov_out));
        if dev > tol {
            return Err(Error::Consistency(format!(
                "closed form deviates from simulation by {dev}"
            )));
        }
    }
    Ok(res)
}

/// The same pipeline with heterodyne on each of `A` and `B` in place of the
/// Bell measurement. Fails with [`Error::Consistency`] if any entanglement
/// appears.
pub fn product_measurement_no_swap<T: Real>(p: &SwapParams<T>) -> Result<SwapResult<T>> {
    p.validate()?;
    let [ca, cb] = arm_channels(p)?;
    let (out, logneg) = simulate_swap_channels(p.r, &ca, &cb, &heterodyne_product(2))?;
    if logneg > T::tol(NO_SWAP_TOL) {
        return Err(Error::Consistency(format!(
            "product measurement produced log-negativity {logneg}"
        )));
    }
    finish(p, out, logneg, None)
}

/// Parameter grid for [`threshold_scan`]; rows run over the Cartesian
/// product with `l_A` slowest and `n_B_noise` fastest.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScanGrid {
    pub l_a: Vec<f64>,
    pub l_b: Vec<f64>,
    pub a_a: Vec<f64>,
    pub a_b: Vec<f64>,
    pub n_a_noise: Vec<f64>,
    pub n_b_noise: Vec<f64>,
    pub r: f64,
}

impl ScanGrid {
    /// Loss-only grid at unit amplification and no noise.
    pub fn losses(l_a: Vec<f64>, l_b: Vec<f64>, r: f64) -> Self {
        Self {
            l_a,
            l_b,
            a_a: vec![1.0],
            a_b: vec![1.0],
            n_a_noise: vec![0.0],
            n_b_noise: vec![0.0],
            r,
        }
    }

    pub fn len(&self) -> usize {
        self.l_a.len()
            * self.l_b.len()
            * self.a_a.len()
            * self.a_b.len()
            * self.n_a_noise.len()
            * self.n_b_noise.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    fn point(&self, mut i: usize) -> SwapParams<f64> {
        let mut take = |axis: &[f64]| {
            let v = axis[i % axis.len()];
            i /= axis.len();
            v
        };
        let n_b_noise = take(&self.n_b_noise);
        let n_a_noise = take(&self.n_a_noise);
        let a_b = take(&self.a_b);
        let a_a = take(&self.a_a);
        let l_b = take(&self.l_b);
        let l_a = take(&self.l_a);
        SwapParams {
            r: self.r,
            a_a,
            a_b,
            l_a,
            l_b,
            n_a_noise,
            n_b_noise,
        }
    }
}

/// Column order of the scan CSV.
pub const SCAN_COLUMNS: [&str; 12] = [
    "l_A",
    "l_B",
    "a_A",
    "a_B",
    "n_A_noise",
    "n_B_noise",
    "r",
    "verdict",
    "threshold_sum",
    "duan",
    "duan_limit",
    "logneg",
];

/// One row of a threshold scan. Field order is the CSV column order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScanRow {
    #[serde(rename = "l_A")]
    pub l_a: f64,
    #[serde(rename = "l_B")]
    pub l_b: f64,
    #[serde(rename = "a_A")]
    pub a_a: f64,
    #[serde(rename = "a_B")]
    pub a_b: f64,
    #[serde(rename = "n_A_noise")]
    pub n_a_noise: f64,
    #[serde(rename = "n_B_noise")]
    pub n_b_noise: f64,
    pub r: f64,
    pub verdict: Verdict,
    pub threshold_sum: Option<f64>,
    pub duan: Option<f64>,
    pub duan_limit: Option<f64>,
    pub logneg: f64,
}

impl ScanRow {
    /// Round every float to 12 significant digits.
    pub fn rounded(mut self) -> Self {
        let r = |x: f64| round_significant(x, 12);
        for v in [
            &mut self.l_a,
            &mut self.l_b,
            &mut self.a_a,
            &mut self.a_b,
            &mut self.n_a_noise,
            &mut self.n_b_noise,
            &mut self.r,
            &mut self.logneg,
        ] {
            *v = r(*v);
        }
        for v in [
            &mut self.threshold_sum,
            &mut self.duan,
            &mut self.duan_limit,
        ] {
            *v = v.map(r);
        }
        self
    }
}

fn scan_point(p: &SwapParams<f64>) -> Result<ScanRow> {
    let [sa, sb] = p.arm_specs();
    let decision = all_measurements_separable::<f64>(&sa, &sb)?;
    let sim = simulate_swap(p)?;
    Ok(ScanRow {
        l_a: p.l_a,
        l_b: p.l_b,
        a_a: p.a_a,
        a_b: p.a_b,
        n_a_noise: p.n_a_noise,
        n_b_noise: p.n_b_noise,
        r: p.r,
        verdict: decision.verdict,
        threshold_sum: decision.threshold_value,
        duan: sim.duan,
        duan_limit: sim.duan_limit,
        logneg: sim.logneg,
    })
}

/// Decision verdict and swap simulation at every grid point, in grid order.
/// Points are evaluated in parallel.
pub fn threshold_scan(grid: &ScanGrid) -> Result<Vec<ScanRow>> {
    if !(grid.r > 0.0 && grid.r <= MAX_R) {
        return Err(Error::InvalidArgument(format!(
            "r = {} out of range",
            grid.r
        )));
    }
    (0..grid.len())
        .into_par_iter()
        .map(|i| {
            let p = grid.point(i);
            p.validate()?;
            scan_point(&p)
        })
        .collect()
}

/// Write rows as CSV with a header, floats rounded to 12 significant digits
/// and absent values left empty.
pub fn write_scan_csv<W: Write>(rows: &[ScanRow], out: W) -> std::io::Result<()> {
    let mut w = csv::WriterBuilder::new()
        .has_headers(false)
        .from_writer(out);
    w.write_record(SCAN_COLUMNS)?;
    for row in rows {
        w.serialize(row.clone().rounded())?;
    }
    w.flush()
}
