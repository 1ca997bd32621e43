//! Deciding whether every joint Gaussian measurement behind a pair of
//! single-mode error channels is separable.
//!
//! The primary route reduces each channel to amplification followed by loss
//! and compares `l_A + l_B` against one. A second route applies the dual
//! channels to the POVM elements of a concrete measurement and tests the
//! result for entanglement; [`decision_consistency`] runs both alongside the
//! swapping simulation.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::channels::{
    apply_channel, dual_spec, to_amp_then_loss, CanonicalForm, ChannelSpec, GaussianChannel,
    Primitive,
};
use crate::criteria::{ppt_separable, PPT_TOL};
use crate::error::{Error, Result};
use crate::measurements::{cv_bell, povm_element_state, MeasurementSpec};
use crate::scalar::{half, round_significant, Real};
use crate::swapping_sim::{simulate_swap_channels, SWAP_ENTANGLED_TOL, SWAP_SEPARABLE_TOL};

/// `|l_A + l_B − 1|` at or below this is reported as the boundary.
pub const BOUNDARY_TOL: f64 = 1e-12;
/// Slack on the inclusive entanglement-annihilation inequality.
pub const ANNIHILATION_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    AllSeparable,
    InseparableExists,
}

impl Verdict {
    pub fn as_str(&self) -> &'static str {
        match self {
            Verdict::AllSeparable => "all_separable",
            Verdict::InseparableExists => "inseparable_exists",
        }
    }
}

impl fmt::Display for Verdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Side {
    A,
    B,
}

impl fmt::Display for Side {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(if *self == Side::A { "A" } else { "B" })
    }
}

/// One step of the decision procedure, in the order it was applied.
#[derive(Debug, Clone, PartialEq)]
pub enum Rule {
    EntanglementBreaking(Side),
    B1AsIdentity(Side),
    Identity(Side),
    Canonical { side: Side, a: f64, l: f64 },
    LossThreshold { sum: f64 },
}

impl fmt::Display for Rule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Rule::EntanglementBreaking(s) => write!(f, "entanglement_breaking:{s}"),
            Rule::B1AsIdentity(s) => write!(f, "b1_as_identity:{s}"),
            Rule::Identity(s) => write!(f, "identity:{s}"),
            Rule::Canonical { side, a, l } => {
                let (a, l) = (round_significant(*a, 12), round_significant(*l, 12));
                write!(f, "amp_then_loss:{side}:a={a}:l={l}")
            }
            Rule::LossThreshold { sum } => {
                write!(f, "loss_threshold:l_A+l_B={}", round_significant(*sum, 12))
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DecisionReport<T> {
    pub verdict: Verdict,
    /// Set when `l_A + l_B` equals one within [`BOUNDARY_TOL`].
    pub boundary: bool,
    pub rule_trace: Vec<Rule>,
    pub canonical: [CanonicalForm<T>; 2],
    /// `l_A' + l_B'`, absent after an entanglement-breaking short-circuit.
    pub threshold_value: Option<T>,
    pub margin: Option<T>,
}

/// Flat, serializable view of a [`DecisionReport`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecisionRecord {
    pub verdict: Verdict,
    pub boundary: bool,
    pub threshold: Option<f64>,
    pub margin: Option<f64>,
    pub form_a: String,
    pub a_prime_a: Option<f64>,
    pub l_prime_a: Option<f64>,
    pub form_b: String,
    pub a_prime_b: Option<f64>,
    pub l_prime_b: Option<f64>,
    pub rule_trace: Vec<String>,
}

impl<T: Real> DecisionReport<T> {
    pub fn to_record(&self) -> DecisionRecord {
        let [fa, fb] = &self.canonical;
        DecisionRecord {
            verdict: self.verdict,
            boundary: self.boundary,
            threshold: self.threshold_value.map(Real::as_f64),
            margin: self.margin.map(Real::as_f64),
            form_a: fa.name().to_string(),
            a_prime_a: fa.effective_amp().map(Real::as_f64),
            l_prime_a: fa.effective_loss().map(Real::as_f64),
            form_b: fb.name().to_string(),
            a_prime_b: fb.effective_amp().map(Real::as_f64),
            l_prime_b: fb.effective_loss().map(Real::as_f64),
            rule_trace: self.rule_trace.iter().map(Rule::to_string).collect(),
        }
    }
}

/// Whether every effective measurement behind the channel pair is separable.
///
/// Either channel entanglement-breaking short-circuits to separable; a
/// single-quadrature-noise channel counts as the identity; otherwise the
/// verdict is `l_A' + l_B' ≥ 1` on the amplification-then-loss parameters.
/// Amplification never enters.
pub fn all_measurements_separable<T: Real>(
    spec_a: &ChannelSpec,
    spec_b: &ChannelSpec,
) -> Result<DecisionReport<T>> {
    let forms = [
        to_amp_then_loss::<T>(spec_a)?,
        to_amp_then_loss::<T>(spec_b)?,
    ];
    let mut trace = Vec::new();
    for (side, form) in [Side::A, Side::B].into_iter().zip(&forms) {
        if *form == CanonicalForm::EntanglementBreaking {
            trace.push(Rule::EntanglementBreaking(side));
        }
    }
    if !trace.is_empty() {
        return Ok(DecisionReport {
            verdict: Verdict::AllSeparable,
            boundary: false,
            rule_trace: trace,
            canonical: forms,
            threshold_value: None,
            margin: None,
        });
    }
    let mut sum = T::zero();
    for (side, form) in [Side::A, Side::B].into_iter().zip(&forms) {
        match *form {
            CanonicalForm::B1Equivalent => trace.push(Rule::B1AsIdentity(side)),
            CanonicalForm::Identity => trace.push(Rule::Identity(side)),
            CanonicalForm::AmpThenLoss { a, l } => trace.push(Rule::Canonical {
                side,
                a: a.as_f64(),
                l: l.as_f64(),
            }),
            CanonicalForm::EntanglementBreaking => unreachable!(),
        }
        sum += form.effective_loss().expect("not entanglement-breaking");
    }
    trace.push(Rule::LossThreshold { sum: sum.as_f64() });
    let margin = sum - T::one();
    let boundary = margin.abs() <= T::tol(BOUNDARY_TOL);
    let verdict = if boundary || margin >= T::zero() {
        Verdict::AllSeparable
    } else {
        Verdict::InseparableExists
    };
    Ok(DecisionReport {
        verdict,
        boundary,
        rule_trace: trace,
        canonical: forms,
        threshold_value: Some(sum),
        margin: Some(margin),
    })
}

/// A phase-insensitive channel `V ↦ κV + μI`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KappaMu<T> {
    pub kappa: T,
    pub mu: T,
}

impl<T: Real> KappaMu<T> {
    /// Checks `κ, μ ≥ 0` and complete positivity `μ ≥ |1 − κ|/2`.
    pub fn new(kappa: T, mu: T) -> Result<Self> {
        if !(kappa >= T::zero() && mu >= T::zero()) || !kappa.is_finite() || !mu.is_finite() {
            return Err(Error::InvalidArgument(format!(
                "kappa = {kappa}, mu = {mu} must be finite and >= 0"
            )));
        }
        if mu < (T::one() - kappa).abs() * half::<T>() - T::tol(1e-12) {
            return Err(Error::NotCompletelyPositive);
        }
        Ok(Self { kappa, mu })
    }

    pub fn to_channel(&self) -> GaussianChannel<T> {
        let id = nalgebra::DMatrix::<T>::identity(2, 2);
        GaussianChannel::new(id.clone() * self.kappa.sqrt(), id * self.mu)
            .expect("validated kappa/mu")
    }

    /// Parameters of a channel that is phase-insensitive up to a rotation.
    pub fn from_channel(c: &GaussianChannel<T>) -> Option<Self> {
        c.phase_insensitive_params()
            .map(|(kappa, mu)| Self { kappa, mu })
    }
}

/// Whether `Φ(κ_A, μ_A) ⊗ Φ(κ_B, μ_B)` maps every two-mode Gaussian state to
/// a separable one: `κ_A μ_B + κ_B μ_A ≥ (κ_A + κ_B)/2`, equality included.
pub fn fz_annihilates<T: Real>(a: &KappaMu<T>, b: &KappaMu<T>) -> bool {
    let lhs = a.kappa * b.mu + b.kappa * a.mu;
    let rhs = (a.kappa + b.kappa) * half::<T>();
    lhs >= rhs - T::tol(ANNIHILATION_TOL) * T::one().max(rhs)
}

/// Amplification `a` then loss `l` as `κ = a(1 − l)`, `μ = κ/2 + l − 1/2`.
pub fn amp_loss_to_kappa_mu<T: Real>(a: T, l: T) -> Result<KappaMu<T>> {
    if !(a >= T::one()) || !a.is_finite() {
        return Err(Error::InvalidArgument(format!(
            "amplification {a} must be >= 1"
        )));
    }
    if !(l >= T::zero() && l < T::one()) {
        return Err(Error::InvalidArgument(format!(
            "loss {l} must be in [0, 1)"
        )));
    }
    let kappa = a * (T::one() - l);
    let mu = (kappa * half::<T>() + l - half::<T>()).max(T::zero());
    KappaMu::new(kappa, mu)
}

/// Result of testing a dual-mapped POVM element for entanglement.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DualCheck<T> {
    pub separable: bool,
    /// PPT margin of the dual-mapped element; absent when a side's dual
    /// maps everything to the identity operator.
    pub margin: Option<T>,
}

enum DualSide<T: Real> {
    Channel(GaussianChannel<T>),
    /// Entanglement-breaking side: its dual sends every operator to one
    /// proportional to a fixed product, so the element becomes separable.
    Trivializing,
}

fn dual_side<T: Real>(spec: &ChannelSpec) -> Result<DualSide<T>> {
    let form = to_amp_then_loss::<T>(spec)?;
    match form {
        CanonicalForm::EntanglementBreaking => Ok(DualSide::Trivializing),
        CanonicalForm::Identity | CanonicalForm::B1Equivalent => {
            Ok(DualSide::Channel(GaussianChannel::identity(1)))
        }
        CanonicalForm::AmpThenLoss { a, l } => {
            let dual = match dual_spec(spec) {
                Ok(d) => d,
                Err(Error::UnsupportedChannel(_)) => dual_spec(&ChannelSpec(vec![
                    Primitive::Amp { a: a.as_f64() },
                    Primitive::Loss { l: l.as_f64() },
                ]))?,
                Err(e) => return Err(e),
            };
            Ok(DualSide::Channel(dual.build()?))
        }
    }
}

/// Apply the dual channels to the regularized outcome-zero POVM element of
/// `measurement` and test the result with PPT.
pub fn dual_povm_check<T: Real>(
    measurement: &MeasurementSpec<T>,
    spec_a: &ChannelSpec,
    spec_b: &ChannelSpec,
    r_reg: T,
) -> Result<DualCheck<T>> {
    if measurement.num_modes() != 2 {
        return Err(Error::DimensionMismatch {
            expected: 2,
            found: measurement.num_modes(),
        });
    }
    let element = povm_element_state(measurement, r_reg)?.state;
    let (da, db) = (dual_side::<T>(spec_a)?, dual_side::<T>(spec_b)?);
    let (ca, cb) = match (da, db) {
        (DualSide::Channel(a), DualSide::Channel(b)) => (a, b),
        _ => {
            return Ok(DualCheck {
                separable: true,
                margin: None,
            })
        }
    };
    let out = apply_channel(&ca, &element, &[0])?;
    let out = apply_channel(&cb, &out, &[1])?;
    let ppt = ppt_separable(out.cov(), T::tol(PPT_TOL))?;
    Ok(DualCheck {
        separable: ppt.separable,
        margin: Some(ppt.margin),
    })
}

/// Three-way cross-check of a decision against the swapping simulation and
/// the dual-channel test.
#[derive(Debug, Clone, PartialEq)]
pub struct ConsistencyReport<T> {
    pub decision: DecisionReport<T>,
    pub swap_logneg: T,
    pub dual: DualCheck<T>,
    pub simulation_agrees: bool,
    pub dual_agrees: bool,
}

impl<T> ConsistencyReport<T> {
    pub fn consistent(&self) -> bool {
        self.simulation_agrees && self.dual_agrees
    }
}

/// Run the decision, a CV Bell swap at squeezing `r`, and the dual check at
/// `r_reg`, and report whether they agree. Single-quadrature-noise sides are
/// rejected: only the decision treats them as the identity.
pub fn decision_consistency<T: Real>(
    spec_a: &ChannelSpec,
    spec_b: &ChannelSpec,
    r: T,
    r_reg: T,
) -> Result<ConsistencyReport<T>> {
    let decision = all_measurements_separable::<T>(spec_a, spec_b)?;
    if decision.canonical.contains(&CanonicalForm::B1Equivalent) {
        return Err(Error::UnsupportedChannel(
            "single-quadrature noise is only decidable, not simulable, at fixed eps".into(),
        ));
    }
    let maps = [spec_a, spec_b].map(|s| {
        s.build::<T>().and_then(|c| {
            KappaMu::from_channel(&c)
                .ok_or_else(|| Error::UnsupportedChannel(format!("`{s}` is not phase-insensitive")))
        })
    });
    let [ka, kb] = maps;
    let (ka, kb) = (ka?, kb?);
    let swap = simulate_swap_channels(r, &ka.to_channel(), &kb.to_channel(), &cv_bell())?;
    let swap_logneg = swap.1;
    let dual = dual_povm_check(&cv_bell(), spec_a, spec_b, r_reg)?;
    let (simulation_agrees, dual_agrees) = match decision.verdict {
        Verdict::InseparableExists => (swap_logneg > T::lit(SWAP_ENTANGLED_TOL), !dual.separable),
        Verdict::AllSeparable => (swap_logneg <= T::lit(SWAP_SEPARABLE_TOL), dual.separable),
    };
    Ok(ConsistencyReport {
        decision,
        swap_logneg,
        dual,
        simulation_agrees,
        dual_agrees,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn spec(s: &str) -> ChannelSpec {
        s.parse().unwrap()
    }

    fn decide(a: &str, b: &str) -> DecisionReport<f64> {
        all_measurements_separable(&spec(a), &spec(b)).unwrap()
    }

    #[test]
    fn loss_pairs() {
        let r = decide("loss:0.6", "loss:0.5");
        assert_eq!(r.verdict, Verdict::AllSeparable);
        assert!((r.threshold_value.unwrap() - 1.1).abs() < 1e-12);
        assert!(!r.boundary);

        let r = decide("amp:3,loss:0.4", "amp:2,loss:0.5");
        assert_eq!(r.verdict, Verdict::InseparableExists);
        assert!((r.threshold_value.unwrap() - 0.9).abs() < 1e-12);
    }

    #[test]
    fn loss_noise_boundary() {
        let r = decide("loss:0.3,noise:0.2", "loss:0.2,noise:0.3");
        assert_eq!(r.verdict, Verdict::AllSeparable);
        assert!(r.boundary);
        assert!((r.threshold_value.unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn b1_counts_as_identity() {
        let r = decide("b1:0.4:x", "loss:0.9");
        assert_eq!(r.verdict, Verdict::InseparableExists);
        assert!((r.threshold_value.unwrap() - 0.9).abs() < 1e-12);
        assert_eq!(r.rule_trace[0], Rule::B1AsIdentity(Side::A));
        assert_eq!(r.rule_trace[0].to_string(), "b1_as_identity:A");
    }

    #[test]
    fn eb_short_circuit() {
        let r = decide("noise:1.2", "loss:0.1");
        assert_eq!(r.verdict, Verdict::AllSeparable);
        assert_eq!(r.rule_trace, vec![Rule::EntanglementBreaking(Side::A)]);
        assert!(r.threshold_value.is_none());
    }

    #[test]
    fn unsupported_spec_propagates() {
        let err = all_measurements_separable::<f64>(
            &spec("loss:0.2,squeeze:0.5,noise:0.1"),
            &spec("loss:0.1"),
        );
        assert!(matches!(err, Err(Error::UnsupportedChannel(_))));
    }

    #[test]
    fn record_is_flat() {
        let rec = decide("loss:0.3,noise:0.2", "amp:2,loss:0.1").to_record();
        assert_eq!(rec.form_a, "amp_then_loss");
        assert!((rec.a_prime_a.unwrap() - 1.4).abs() < 1e-12);
        assert!((rec.l_prime_b.unwrap() - 0.1).abs() < 1e-12);
        assert_eq!(
            rec.rule_trace.last().unwrap().split(':').next(),
            Some("loss_threshold")
        );
    }

    #[test]
    fn annihilation_condition() {
        let km = |k: f64, m: f64| KappaMu::new(k, m).unwrap();
        assert!(fz_annihilates(&km(1.0, 0.5), &km(1.0, 0.5)));
        assert!(!fz_annihilates(&km(1.0, 0.0), &km(1.0, 0.0)));
        let a = amp_loss_to_kappa_mu(2.0f64, 0.3).unwrap();
        let b = amp_loss_to_kappa_mu(2.0f64, 0.7).unwrap();
        assert!(fz_annihilates(&a, &b));
        assert!(KappaMu::new(2.0f64, 0.1).is_err());
        assert!(KappaMu::new(-1.0f64, 1.0).is_err());
    }

    #[test]
    fn kappa_mu_substitution() {
        let check = |a: f64, l: f64, k: f64, m: f64| {
            let km = amp_loss_to_kappa_mu(a, l).unwrap();
            assert!(
                (km.kappa - k).abs() < 1e-15 && (km.mu - m).abs() < 1e-15,
                "{a} {l}"
            );
        };
        check(1.0, 0.0, 1.0, 0.0);
        check(2.0, 0.5, 1.0, 0.5);
        check(1.0, 0.5, 0.5, 0.25);
        assert!(amp_loss_to_kappa_mu(0.5f64, 0.1).is_err());
        assert!(amp_loss_to_kappa_mu(2.0f64, 1.0).is_err());
    }

    #[test]
    fn dual_route_on_bell() {
        let bell = cv_bell::<f64>();
        let c = dual_povm_check(&bell, &spec("loss:0.6"), &spec("loss:0.5"), 5.0).unwrap();
        assert!(c.separable);
        let c = dual_povm_check(&bell, &spec("loss:0.4"), &spec("loss:0.4"), 5.0).unwrap();
        assert!(!c.separable);
        let c = dual_povm_check(&bell, &spec("identity"), &spec("identity"), 5.0).unwrap();
        assert!(!c.separable);
        let c = dual_povm_check(&bell, &spec("loss:1"), &spec("loss:0.2"), 5.0).unwrap();
        assert!(c.separable && c.margin.is_none());
        // noise is dualized through its amplification-then-loss form
        let c = dual_povm_check(&bell, &spec("noise:0.3"), &spec("loss:0.2"), 5.0).unwrap();
        assert!(!c.separable);
    }

    #[test]
    fn dual_margin_grows_with_regularizer() {
        let bell = cv_bell::<f64>();
        let margins: Vec<f64> = [2.0, 3.0, 4.0, 5.0, 6.0]
            .iter()
            .map(|&r| {
                dual_povm_check(&bell, &spec("identity"), &spec("identity"), r)
                    .unwrap()
                    .margin
                    .unwrap()
            })
            .collect();
        assert!(margins.windows(2).all(|w| w[1] < w[0]));
    }

    #[test]
    fn three_way_agreement() {
        let rep =
            decision_consistency::<f64>(&spec("loss:0.45"), &spec("loss:0.45"), 5.0, 5.0).unwrap();
        assert_eq!(rep.decision.verdict, Verdict::InseparableExists);
        assert!(rep.consistent(), "{rep:?}");

        let rep =
            decision_consistency::<f64>(&spec("loss:0.55"), &spec("loss:0.5"), 5.0, 5.0).unwrap();
        assert_eq!(rep.decision.verdict, Verdict::AllSeparable);
        assert!(rep.consistent(), "{rep:?}");

        for r in [1.0, 3.0, 6.0] {
            let rep =
                decision_consistency::<f64>(&spec("loss:0.5"), &spec("loss:0.5"), r, 5.0).unwrap();
            assert!(rep.decision.boundary);
            assert!(rep.swap_logneg <= 1e-8);
            assert!(rep.consistent(), "{rep:?}");
        }

        assert!(
            decision_consistency::<f64>(&spec("b1:0.1:x"), &spec("loss:0.2"), 5.0, 5.0).is_err()
        );
    }
}
