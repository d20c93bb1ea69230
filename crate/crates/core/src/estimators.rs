//! From shot records to published quantities: `⟨Q(t₃)⟩`, contrast, the
//! Leggett-Garg correlation `K` in both forms, witness and significance,
//! with bootstrap and binomial Monte Carlo uncertainties.
//!
//! Removed shots never enter an estimate; `n_shots_used` always counts the
//! post-selected shots.

use rand::Rng;
use rand_distr::{Binomial, Distribution};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::experiment::{derive_aux_seed, Arm, ArmSlot, ProtocolId, ShotRecord};
use crate::protocols::ShotOutcome;
use crate::stats::{clopper_pearson_sigma, fitted_gaussian_sigma, sample_std};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Method {
    Bootstrap,
    MonteCarloCP,
    /// Closed-form binomial error propagation.
    Exact,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EstimateWithError {
    pub value: f64,
    pub sigma: f64,
    pub method: Method,
    pub n_shots_used: u64,
}

/// Outcome counts of one stratum.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct ArmCounts {
    pub d1: u64,
    pub d2: u64,
    pub removed: u64,
}

impl ArmCounts {
    pub fn from_outcomes<'a, I: IntoIterator<Item = &'a ShotOutcome>>(outcomes: I) -> Self {
        let mut c = ArmCounts::default();
        for o in outcomes {
            c.add(*o);
        }
        c
    }

    pub fn from_records(records: &[&ShotRecord]) -> Self {
        Self::from_outcomes(records.iter().map(|r| &r.outcome))
    }

    fn add(&mut self, o: ShotOutcome) {
        match o {
            ShotOutcome::D1 => self.d1 += 1,
            ShotOutcome::D2 => self.d2 += 1,
            ShotOutcome::Removed => self.removed += 1,
        }
    }

    pub fn post_selected(&self) -> u64 {
        self.d1 + self.d2
    }

    pub fn total(&self) -> u64 {
        self.d1 + self.d2 + self.removed
    }

    /// `(n_D1 - n_D2)/(n_D1 + n_D2)`, `None` if nothing survived.
    pub fn mean_q3(&self) -> Option<f64> {
        let n = self.post_selected();
        (n > 0).then(|| (self.d1 as f64 - self.d2 as f64) / n as f64)
    }

    pub fn merged(&self, other: &ArmCounts) -> ArmCounts {
        ArmCounts {
            d1: self.d1 + other.d1,
            d2: self.d2 + other.d2,
            removed: self.removed + other.removed,
        }
    }
}

fn binomial_mean_sigma(c: &ArmCounts) -> f64 {
    let n = c.post_selected() as f64;
    let p = c.d1 as f64 / n;
    2.0 * (p * (1.0 - p) / n).sqrt()
}

/// Mean of `Q(t₃)` over post-selected records (D1 → +1, D2 → −1), with the
/// binomial standard error.
pub fn mean_q3(records: &[&ShotRecord]) -> Result<EstimateWithError> {
    let c = ArmCounts::from_records(records);
    let value = c
        .mean_q3()
        .ok_or_else(|| Error::EmptySelection("mean_q3 input".into()))?;
    Ok(EstimateWithError {
        value,
        sigma: binomial_mean_sigma(&c),
        method: Method::Exact,
        n_shots_used: c.post_selected(),
    })
}

/// `K = 1 + ⟨Q₃⟩_with − ⟨Q₃⟩_without` from already-counted strata.
pub fn k_simplified_from_counts(
    without: &ArmCounts,
    up: &ArmCounts,
    down: &ArmCounts,
) -> Option<f64> {
    Some(1.0 + up.merged(down).mean_q3()? - without.mean_q3()?)
}

/// Simplified Leggett-Garg correlation. The two interception arms are pooled
/// after post-selection.
pub fn estimate_k_simplified(
    without_q2: &[&ShotRecord],
    intercept_up: &[&ShotRecord],
    intercept_down: &[&ShotRecord],
) -> Result<EstimateWithError> {
    let without = ArmCounts::from_records(without_q2);
    let up = ArmCounts::from_records(intercept_up);
    let down = ArmCounts::from_records(intercept_down);
    for (name, c) in [
        ("without_q2", without),
        ("intercept_up", up),
        ("intercept_down", down),
    ] {
        if c.post_selected() == 0 {
            return Err(Error::EmptySelection(name.into()));
        }
    }
    let with = up.merged(&down);
    let value = k_simplified_from_counts(&without, &up, &down).expect("non-empty arms");
    let sigma = binomial_mean_sigma(&with).hypot(binomial_mean_sigma(&without));
    Ok(EstimateWithError {
        value,
        sigma,
        method: Method::Exact,
        n_shots_used: with.post_selected() + without.post_selected(),
    })
}

/// Two-time correlators of the dichotomic protocol.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CorrelationSet {
    pub q2q1: EstimateWithError,
    pub q3q2: EstimateWithError,
    pub q3q1: EstimateWithError,
}

/// `⟨Q₃Q₂⟩` from the two interleaved interception arms: survivors of the
/// `Up` arm carry `Q₂ = −1`, survivors of the `Down` arm `Q₂ = +1`.
pub fn q3q2_from_counts(up: &ArmCounts, down: &ArmCounts) -> Option<f64> {
    let n = up.post_selected() + down.post_selected();
    (n > 0).then(|| {
        let from_down = down.d1 as f64 - down.d2 as f64;
        let from_up = up.d2 as f64 - up.d1 as f64;
        (from_down + from_up) / n as f64
    })
}

/// Groups dichotomic records into the three correlators.
pub fn dichotomic_correlations(records: &[&ShotRecord]) -> Result<CorrelationSet> {
    let counts = |p: ProtocolId, a: Arm| {
        ArmCounts::from_outcomes(
            records
                .iter()
                .filter(|r| r.protocol == p && r.arm == a)
                .map(|r| &r.outcome),
        )
    };
    let q2q1 = counts(ProtocolId::DichQ2Q1, Arm::WithoutQ2);
    let q3q1 = counts(ProtocolId::DichQ3Q1, Arm::WithoutQ2);
    let up = counts(ProtocolId::DichQ3Q2, Arm::InterceptUp);
    let down = counts(ProtocolId::DichQ3Q2, Arm::InterceptDown);
    let plain = |c: &ArmCounts, name: &str| -> Result<EstimateWithError> {
        Ok(EstimateWithError {
            value: c
                .mean_q3()
                .ok_or_else(|| Error::EmptySelection(name.into()))?,
            sigma: binomial_mean_sigma(c),
            method: Method::Exact,
            n_shots_used: c.post_selected(),
        })
    };
    let n32 = up.post_selected() + down.post_selected();
    let v32 =
        q3q2_from_counts(&up, &down).ok_or_else(|| Error::EmptySelection("dich-q3q2".into()))?;
    Ok(CorrelationSet {
        q2q1: plain(&q2q1, "dich-q2q1")?,
        q3q2: EstimateWithError {
            value: v32,
            sigma: ((1.0 - v32 * v32) / n32 as f64).sqrt(),
            method: Method::Exact,
            n_shots_used: n32,
        },
        q3q1: plain(&q3q1, "dich-q3q1")?,
    })
}

/// `K = ⟨Q₂Q₁⟩ + ⟨Q₃Q₂⟩ − ⟨Q₃Q₁⟩`.
pub fn estimate_k_dichotomic(c: &CorrelationSet) -> Result<EstimateWithError> {
    for (name, e) in [("q2q1", c.q2q1), ("q3q2", c.q3q2), ("q3q1", c.q3q1)] {
        if !(-1.0..=1.0).contains(&e.value) || e.n_shots_used == 0 || !(e.sigma >= 0.0) {
            return Err(Error::param(
                "correlators",
                format!("{name} is not a valid correlator estimate"),
            ));
        }
    }
    let method = if c.q2q1.method == c.q3q2.method && c.q3q2.method == c.q3q1.method {
        c.q2q1.method
    } else {
        Method::Exact
    };
    Ok(EstimateWithError {
        value: c.q2q1.value + c.q3q2.value - c.q3q1.value,
        sigma: (c.q2q1.sigma.powi(2) + c.q3q2.sigma.powi(2) + c.q3q1.sigma.powi(2)).sqrt(),
        method,
        n_shots_used: c.q2q1.n_shots_used + c.q3q2.n_shots_used + c.q3q1.n_shots_used,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ContrastEstimate {
    pub estimate: EstimateWithError,
    /// Raw `1 − 2p̂↑` fell outside `[0, 1]`.
    pub clamped: bool,
}

/// `C = 1 − 2 p̂↑` from the calibrated sequence without interception.
pub fn estimate_contrast(records: &[&ShotRecord]) -> Result<ContrastEstimate> {
    let c = ArmCounts::from_records(records);
    let n = c.post_selected();
    if n == 0 {
        return Err(Error::EmptySelection("contrast input".into()));
    }
    Ok(contrast_from_counts(&c))
}

pub fn contrast_from_counts(c: &ArmCounts) -> ContrastEstimate {
    let n = c.post_selected();
    let raw = 1.0 - 2.0 * (c.d1 as f64 / n as f64);
    ContrastEstimate {
        estimate: EstimateWithError {
            value: raw.clamp(0.0, 1.0),
            sigma: binomial_mean_sigma(c),
            method: Method::Exact,
            n_shots_used: n,
        },
        clamped: !(0.0..=1.0).contains(&raw),
    }
}

/// `W = |K − 1|`.
pub fn quantum_witness(k: f64) -> f64 {
    (k - 1.0).abs()
}

/// Distance of `K` above the macro-realistic bound in units of its σ.
pub fn violation_significance(k: &EstimateWithError) -> Result<f64> {
    if !(k.sigma > 0.0) {
        return Err(Error::param(
            "sigma",
            "significance needs a positive uncertainty",
        ));
    }
    Ok((k.value - 1.0) / k.sigma)
}

/// A statistic of per-stratum counts, `None` when undefined (e.g. a stratum
/// without survivors).
pub trait Statistic: Fn(&[ArmCounts]) -> Option<f64> + Sync {}
impl<F: Fn(&[ArmCounts]) -> Option<f64> + Sync> Statistic for F {}

/// Spread of a resampled statistic.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpreadEstimate {
    /// Reported 1σ uncertainty.
    pub sigma: f64,
    /// Plain standard deviation of the resampled values.
    pub sample_std: f64,
    /// Resamples on which the statistic was defined.
    pub n_valid: usize,
}

const BOOTSTRAP_TAG: u64 = 0;
const MONTE_CARLO_TAG: u64 = 1;
pub const MIN_RESAMPLES: usize = 100;
pub const DEFAULT_RESAMPLES: usize = 10_000;

fn check_resamples(n: usize) -> Result<()> {
    if n < MIN_RESAMPLES {
        return Err(Error::param(
            "n_resamples",
            format!("must be >= {MIN_RESAMPLES}, got {n}"),
        ));
    }
    Ok(())
}

fn finish(values: Vec<f64>, fit: bool) -> Result<SpreadEstimate> {
    if values.is_empty() {
        return Err(Error::EmptySelection("every resample".into()));
    }
    let first = values[0];
    if values.iter().all(|v| *v == first) {
        return Ok(SpreadEstimate {
            sigma: 0.0,
            sample_std: 0.0,
            n_valid: values.len(),
        });
    }
    let std = sample_std(&values);
    let sigma = if fit {
        // single-bin or unfittable distributions fall back to the plain spread
        fitted_gaussian_sigma(&values).unwrap_or(std)
    } else {
        std
    };
    Ok(SpreadEstimate {
        sigma,
        sample_std: std,
        n_valid: values.len(),
    })
}

/// Bootstrap uncertainty: each stratum is resampled with replacement on its
/// own, the statistic is recomputed, and a Gaussian is least-squares fitted
/// to the histogram of the resampled values.
pub fn bootstrap_sigma<S: Statistic>(
    strata: &[Vec<ShotOutcome>],
    statistic: S,
    n_resamples: usize,
    seed: u64,
) -> Result<SpreadEstimate> {
    check_resamples(n_resamples)?;
    let values: Vec<f64> = (0..n_resamples as u64)
        .into_par_iter()
        .filter_map(|r| {
            let mut rng = derive_aux_seed(seed, BOOTSTRAP_TAG, r).rng();
            let counts: Vec<ArmCounts> = strata
                .iter()
                .map(|outcomes| {
                    let mut c = ArmCounts::default();
                    if !outcomes.is_empty() {
                        for _ in 0..outcomes.len() {
                            c.add(outcomes[rng.random_range(0..outcomes.len())]);
                        }
                    }
                    c
                })
                .collect();
            statistic(&counts)
        })
        .collect();
    finish(values, true)
}

/// Parametric Monte Carlo uncertainty: each stratum's outcome probabilities
/// are estimated from its counts and synthetic counts are redrawn from the
/// corresponding multinomial law.
pub fn monte_carlo_sigma<S: Statistic>(
    strata: &[Vec<ShotOutcome>],
    statistic: S,
    n_resamples: usize,
    seed: u64,
) -> Result<SpreadEstimate> {
    check_resamples(n_resamples)?;
    let observed: Vec<ArmCounts> = strata.iter().map(ArmCounts::from_outcomes).collect();
    let values: Vec<f64> = (0..n_resamples as u64)
        .into_par_iter()
        .filter_map(|r| {
            let mut rng = derive_aux_seed(seed, MONTE_CARLO_TAG, r).rng();
            let counts: Vec<ArmCounts> = observed.iter().map(|c| redraw(c, &mut rng)).collect();
            statistic(&counts)
        })
        .collect();
    finish(values, false)
}

fn redraw<R: Rng + ?Sized>(c: &ArmCounts, rng: &mut R) -> ArmCounts {
    let n = c.total();
    if n == 0 {
        return ArmCounts::default();
    }
    let nf = n as f64;
    let d1 = draw_binomial(n, c.d1 as f64 / nf, rng);
    let rest = n - d1;
    let p_d2 = if c.d1 == n {
        0.0
    } else {
        c.d2 as f64 / (n - c.d1) as f64
    };
    let d2 = draw_binomial(rest, p_d2, rng);
    ArmCounts {
        d1,
        d2,
        removed: rest - d2,
    }
}

fn draw_binomial<R: Rng + ?Sized>(n: u64, p: f64, rng: &mut R) -> u64 {
    if p <= 0.0 || n == 0 {
        0
    } else if p >= 1.0 {
        n
    } else {
        Binomial::new(n, p).expect("p in (0, 1)").sample(rng)
    }
}

/// Clopper-Pearson 1σ error of each outcome fraction of a stratum, in the
/// order D1, D2, Removed.
pub fn position_distribution_sigmas(c: &ArmCounts) -> Result<[f64; 3]> {
    let n = c.total();
    Ok([
        clopper_pearson_sigma(c.d1, n)?,
        clopper_pearson_sigma(c.d2, n)?,
        clopper_pearson_sigma(c.removed, n)?,
    ])
}

/// Full analysis of one wait time of a Leggett-Garg campaign.
#[derive(Debug, Clone, PartialEq)]
pub struct LgPointSummary {
    pub wait_us: f64,
    pub k: f64,
    pub sigma_bootstrap: f64,
    pub sigma_mc: f64,
    pub contrast: ContrastEstimate,
    pub witness: f64,
    /// `(K − 1)/σ_bootstrap`; `None` when the uncertainty vanishes.
    pub significance: Option<f64>,
    pub mean_with_q2: f64,
    pub mean_without_q2: f64,
    pub counts: [(ArmSlot, ArmCounts); 3],
}

fn outcomes_of(records: &[&ShotRecord], slot: ArmSlot) -> Vec<ShotOutcome> {
    records
        .iter()
        .filter(|r| r.slot() == slot)
        .map(|r| r.outcome)
        .collect()
}

pub fn analyze_lg_point(
    records: &[&ShotRecord],
    n_resamples: usize,
    seed: u64,
) -> Result<LgPointSummary> {
    let wait_us = records
        .first()
        .ok_or_else(|| Error::EmptySelection("wait point".into()))?
        .wait_us;
    let slots = [
        ArmSlot::new(ProtocolId::LeggettGarg, Arm::WithoutQ2),
        ArmSlot::new(ProtocolId::LeggettGarg, Arm::InterceptUp),
        ArmSlot::new(ProtocolId::LeggettGarg, Arm::InterceptDown),
    ];
    let strata: Vec<Vec<ShotOutcome>> = slots.iter().map(|s| outcomes_of(records, *s)).collect();
    let pick = |i: usize| -> Vec<&ShotRecord> {
        records
            .iter()
            .copied()
            .filter(|r| r.slot() == slots[i])
            .collect()
    };
    let (without, up, down) = (pick(0), pick(1), pick(2));
    let k = estimate_k_simplified(&without, &up, &down)?;
    let stat = |c: &[ArmCounts]| k_simplified_from_counts(&c[0], &c[1], &c[2]);
    let boot = bootstrap_sigma(&strata, stat, n_resamples, seed)?;
    let mc = monte_carlo_sigma(&strata, stat, n_resamples, seed)?;
    let counts: Vec<ArmCounts> = strata.iter().map(ArmCounts::from_outcomes).collect();
    let contrast = contrast_from_counts(&counts[0]);
    let with = counts[1]
        .merged(&counts[2])
        .mean_q3()
        .expect("checked above");
    let k_boot = EstimateWithError {
        sigma: boot.sigma,
        method: Method::Bootstrap,
        ..k
    };
    Ok(LgPointSummary {
        wait_us,
        k: k.value,
        sigma_bootstrap: boot.sigma,
        sigma_mc: mc.sigma,
        contrast,
        witness: quantum_witness(k.value),
        significance: violation_significance(&k_boot).ok(),
        mean_with_q2: with,
        mean_without_q2: counts[0].mean_q3().expect("checked above"),
        counts: [
            (slots[0], counts[0]),
            (slots[1], counts[1]),
            (slots[2], counts[2]),
        ],
    })
}

/// Full analysis of one wait time of a dichotomic campaign.
#[derive(Debug, Clone, PartialEq)]
pub struct DichotomicPointSummary {
    pub wait_us: f64,
    pub correlators: CorrelationSet,
    pub k: f64,
    pub sigma_bootstrap: f64,
    pub sigma_mc: f64,
    pub significance: Option<f64>,
    pub counts: [(ArmSlot, ArmCounts); 4],
}

pub fn analyze_dichotomic_point(
    records: &[&ShotRecord],
    n_resamples: usize,
    seed: u64,
) -> Result<DichotomicPointSummary> {
    let wait_us = records
        .first()
        .ok_or_else(|| Error::EmptySelection("wait point".into()))?
        .wait_us;
    let slots = [
        ArmSlot::new(ProtocolId::DichQ2Q1, Arm::WithoutQ2),
        ArmSlot::new(ProtocolId::DichQ3Q1, Arm::WithoutQ2),
        ArmSlot::new(ProtocolId::DichQ3Q2, Arm::InterceptUp),
        ArmSlot::new(ProtocolId::DichQ3Q2, Arm::InterceptDown),
    ];
    let strata: Vec<Vec<ShotOutcome>> = slots.iter().map(|s| outcomes_of(records, *s)).collect();
    let correlators = dichotomic_correlations(records)?;
    let k = estimate_k_dichotomic(&correlators)?;
    let stat =
        |c: &[ArmCounts]| Some(c[0].mean_q3()? + q3q2_from_counts(&c[2], &c[3])? - c[1].mean_q3()?);
    let boot = bootstrap_sigma(&strata, stat, n_resamples, seed)?;
    let mc = monte_carlo_sigma(&strata, stat, n_resamples, seed)?;
    let counts: Vec<ArmCounts> = strata.iter().map(ArmCounts::from_outcomes).collect();
    let k_boot = EstimateWithError {
        sigma: boot.sigma,
        method: Method::Bootstrap,
        ..k
    };
    Ok(DichotomicPointSummary {
        wait_us,
        correlators,
        k: k.value,
        sigma_bootstrap: boot.sigma,
        sigma_mc: mc.sigma,
        significance: violation_significance(&k_boot).ok(),
        counts: [
            (slots[0], counts[0]),
            (slots[1], counts[1]),
            (slots[2], counts[2]),
            (slots[3], counts[3]),
        ],
    })
}
