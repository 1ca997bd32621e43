//! Self-check suites run by `cvsep verify`.
//!
//! Each suite evaluates a family of identities over a grid or a seeded
//! random sample and counts the points that fail. Random draws are generated
//! sequentially from the seed and evaluated in parallel, so the report does
//! not depend on the number of worker threads.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::channels::{to_amp_then_loss, CanonicalForm, ChannelSpec, Primitive};
use crate::decision::{amp_loss_to_kappa_mu, decision_consistency, fz_annihilates};
use crate::error::Result;
use crate::swapping_sim::{
    closed_form_params, product_measurement_no_swap, simulate_swap, SwapParams,
};

pub const DEFAULT_SEED: u64 = 2024;
pub const DEFAULT_SAMPLES: usize = 200;

/// Tolerance on reparameterization round-trips (Frobenius, on `X` and `Y`).
pub const ROUND_TRIP_TOL: f64 = 1e-12;
/// Absolute tolerance on closed-form agreement.
pub const CLOSED_FORM_ABS_TOL: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct VerifyConfig {
    pub seed: u64,
    pub samples: usize,
    #[doc(hidden)]
    pub inject_fault: bool,
}

impl Default for VerifyConfig {
    fn default() -> Self {
        Self {
            seed: DEFAULT_SEED,
            samples: DEFAULT_SAMPLES,
            inject_fault: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SuiteReport {
    pub name: &'static str,
    pub checked: usize,
    pub failed: usize,
    /// Description of the first failing point, if any.
    pub first_failure: Option<String>,
}

impl SuiteReport {
    fn from_outcomes(name: &'static str, outcomes: Vec<std::result::Result<(), String>>) -> Self {
        let checked = outcomes.len();
        let mut failed = 0;
        let mut first_failure = None;
        for o in outcomes {
            if let Err(msg) = o {
                failed += 1;
                first_failure.get_or_insert(msg);
            }
        }
        Self {
            name,
            checked,
            failed,
            first_failure,
        }
    }

    pub fn passed(&self) -> bool {
        self.failed == 0
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VerifyReport {
    pub seed: u64,
    pub samples: usize,
    pub suites: Vec<SuiteReport>,
}

impl VerifyReport {
    pub fn passed(&self) -> bool {
        self.suites.iter().all(SuiteReport::passed)
    }
}

fn check(ok: bool, what: impl FnOnce() -> String) -> std::result::Result<(), String> {
    if ok {
        Ok(())
    } else {
        Err(what())
    }
}

fn spec(prims: Vec<Primitive>) -> ChannelSpec {
    ChannelSpec(prims)
}

/// `n` evenly spaced points on `[lo, hi]`.
fn linspace(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    (0..n)
        .map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64)
        .collect()
}

fn round_trip(s: &ChannelSpec) -> std::result::Result<(), String> {
    let err = |e: crate::Error| format!("`{s}`: {e}");
    let orig = s.build::<f64>().map_err(err)?;
    match to_amp_then_loss::<f64>(s).map_err(err)? {
        CanonicalForm::AmpThenLoss { a, l } => {
            let back = spec(vec![Primitive::Amp { a }, Primitive::Loss { l }])
                .build::<f64>()
                .map_err(err)?;
            let dx = (back.x() - orig.x()).norm();
            let dy = (back.y() - orig.y()).norm();
            check(dx <= ROUND_TRIP_TOL && dy <= ROUND_TRIP_TOL, || {
                format!("`{s}`: round-trip error X {dx:e}, Y {dy:e}")
            })
        }
        other => Err(format!(
            "`{s}`: expected amp_then_loss, got {}",
            other.name()
        )),
    }
}

fn expect_eb(s: &ChannelSpec) -> std::result::Result<(), String> {
    match to_amp_then_loss::<f64>(s) {
        Ok(CanonicalForm::EntanglementBreaking) => Ok(()),
        Ok(other) => Err(format!(
            "`{s}`: expected entanglement_breaking, got {}",
            other.name()
        )),
        Err(e) => Err(format!("`{s}`: {e}")),
    }
}

/// Amplification/loss/noise compositions reduce to amplification then loss
/// and rebuild the same map; entanglement-breaking members short-circuit.
pub fn reparameterization_suite() -> SuiteReport {
    use Primitive::{Amp, Loss, Noise};
    let mut specs = Vec::new();
    let mut ebs = Vec::new();
    let grid = 20;
    // steps of 0.05, so l + n ≥ 1 is decided on the indices
    for i in 0..grid {
        for j in 0..grid {
            let s = spec(vec![
                Loss { l: i as f64 * 0.05 },
                Noise { n: j as f64 * 0.05 },
            ]);
            if i + j >= 20 {
                ebs.push(s);
            } else if i + j > 0 {
                specs.push(s);
            }
        }
    }
    for &a in &linspace(1.05, 20.0, grid) {
        for &n in &linspace(0.0, 0.95, grid) {
            specs.push(spec(vec![Amp { a }, Noise { n }]));
        }
    }
    for &a in &linspace(1.05, 20.0, grid) {
        for &l in &linspace(0.0, 0.95, grid) {
            specs.push(spec(vec![Amp { a }, Loss { l }]));
        }
    }
    for &n in &linspace(0.02, 0.95, grid) {
        for &l in &linspace(0.0, 0.95, grid) {
            specs.push(spec(vec![Noise { n }, Loss { l }]));
        }
    }
    for &n in &linspace(1.0, 3.0, grid) {
        ebs.push(spec(vec![Noise { n }]));
    }
    let mut outcomes: Vec<_> = specs.par_iter().map(round_trip).collect();
    outcomes.extend(ebs.par_iter().map(expect_eb).collect::<Vec<_>>());
    SuiteReport::from_outcomes("reparameterization", outcomes)
}

/// Amplification values used by the annihilation-equivalence grid.
pub const FZ_AMP_GRID: [f64; 10] = [1.0, 1.25, 1.5, 2.0, 2.5, 3.0, 4.0, 5.0, 10.0, 20.0];
/// Loss values used by the annihilation-equivalence grid.
pub const FZ_LOSS_GRID: [f64; 10] = [0.0, 0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9];

/// `1/a_A + 1/a_B ≤ 1`, with the same slack as [`fz_annihilates`].
pub fn amp_sum_condition(a_a: f64, a_b: f64) -> bool {
    1.0 / a_a + 1.0 / a_b <= 1.0 + crate::decision::ANNIHILATION_TOL
}

/// The annihilation inequality on `(κ, μ)` agrees with the amplification
/// condition on a 10⁴-point grid of amplification-then-loss pairs.
pub fn annihilation_equivalence_suite() -> SuiteReport {
    let mut points = Vec::with_capacity(10_000);
    for &a_a in &FZ_AMP_GRID {
        for &l_a in &FZ_LOSS_GRID {
            for &a_b in &FZ_AMP_GRID {
                for &l_b in &FZ_LOSS_GRID {
                    points.push((a_a, l_a, a_b, l_b));
                }
            }
        }
    }
    let outcomes = points
        .par_iter()
        .map(|&(a_a, l_a, a_b, l_b)| {
            let ka = amp_loss_to_kappa_mu(a_a, l_a).map_err(|e| e.to_string())?;
            let kb = amp_loss_to_kappa_mu(a_b, l_b).map_err(|e| e.to_string())?;
            let fz = fz_annihilates(&ka, &kb);
            check(fz == amp_sum_condition(a_a, a_b), || {
                format!("a*=({a_a}, {a_b}), l*=({l_a}, {l_b}): inequality {fz}")
            })
        })
        .collect();
    SuiteReport::from_outcomes("annihilation_equivalence", outcomes)
}

/// Uniform random swap parameters with `l ≤ l_max`.
pub fn random_swap_params(
    rng: &mut impl Rng,
    r: (f64, f64),
    l_max: f64,
    a_max: f64,
) -> SwapParams<f64> {
    SwapParams {
        r: rng.random_range(r.0..=r.1),
        a_a: rng.random_range(1.0..=a_max),
        a_b: rng.random_range(1.0..=a_max),
        l_a: rng.random_range(0.0..=l_max),
        l_b: rng.random_range(0.0..=l_max),
        n_a_noise: 0.0,
        n_b_noise: 0.0,
    }
}

fn closed_form_suite(cfg: &VerifyConfig) -> SuiteReport {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let draws: Vec<_> = (0..cfg.samples)
        .map(|_| random_swap_params(&mut rng, (0.1, 6.0), 0.95, 10.0))
        .collect();
    let fault = if cfg.inject_fault { 1e-6 } else { 0.0 };
    let outcomes = draws
        .par_iter()
        .map(|p| {
            let sim = simulate_swap(p).map_err(|e| format!("{p:?}: {e}"))?;
            let cf = closed_form_params(p).map_err(|e| format!("{p:?}: {e}"))?;
            let dev = (sim.std.n_a - cf.n_a)
                .abs()
                .max((sim.std.n_b - cf.n_b).abs())
                .max((sim.std.c + fault - cf.c).abs());
            check(dev <= CLOSED_FORM_ABS_TOL, || {
                format!("{p:?}: deviation {dev:e}")
            })
        })
        .collect();
    SuiteReport::from_outcomes("closed_form", outcomes)
}

fn consistency_suite() -> SuiteReport {
    let ls: Vec<f64> = (0..=10).map(|i| i as f64 / 10.0).collect();
    let mut cells = Vec::new();
    for &l_a in &ls {
        for &l_b in &ls {
            cells.push((l_a, l_b));
        }
    }
    let outcomes = cells
        .par_iter()
        .map(|&(l_a, l_b)| {
            let sa = spec(vec![Primitive::Loss { l: l_a }]);
            let sb = spec(vec![Primitive::Loss { l: l_b }]);
            let rep = decision_consistency::<f64>(&sa, &sb, 5.0, 5.0)
                .map_err(|e| format!("({l_a}, {l_b}): {e}"))?;
            check(rep.consistent(), || {
                format!(
                    "({l_a}, {l_b}): verdict {}, swap log-negativity {:e}, dual separable {}",
                    rep.decision.verdict, rep.swap_logneg, rep.dual.separable
                )
            })
        })
        .collect();
    SuiteReport::from_outcomes("decision_consistency", outcomes)
}

fn no_swap_suite(cfg: &VerifyConfig) -> SuiteReport {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed.wrapping_add(1));
    let draws: Vec<_> = (0..cfg.samples)
        .map(|_| random_swap_params(&mut rng, (0.0, 6.0), 1.0, 10.0))
        .collect();
    let outcomes = draws
        .par_iter()
        .map(|p| {
            product_measurement_no_swap(p)
                .map(|_| ())
                .map_err(|e| format!("{p:?}: {e}"))
        })
        .collect();
    SuiteReport::from_outcomes("no_swap", outcomes)
}

/// Run every suite.
pub fn run_all(cfg: &VerifyConfig) -> Result<VerifyReport> {
    Ok(VerifyReport {
        seed: cfg.seed,
        samples: cfg.samples,
        suites: vec![
            reparameterization_suite(),
            annihilation_equivalence_suite(),
            closed_form_suite(cfg),
            consistency_suite(),
            no_swap_suite(cfg),
        ],
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn suites_pass_on_small_sample() {
        let cfg = VerifyConfig {
            seed: 7,
            samples: 20,
            inject_fault: false,
        };
        let rep = run_all(&cfg).unwrap();
        for s in &rep.suites {
            assert!(s.passed(), "{s:?}");
            assert!(s.checked > 0);
        }
        assert_eq!(rep.suites[1].checked, 10_000);
    }

    #[test]
    fn injected_fault_is_caught() {
        let cfg = VerifyConfig {
            seed: 7,
            samples: 5,
            inject_fault: true,
        };
        let rep = run_all(&cfg).unwrap();
        assert!(!rep.passed());
        assert_eq!(rep.suites[2].failed, 5);
    }

    #[test]
    fn same_seed_same_report() {
        let cfg = VerifyConfig {
            seed: 11,
            samples: 10,
            inject_fault: false,
        };
        assert_eq!(run_all(&cfg).unwrap(), run_all(&cfg).unwrap());
    }
}
