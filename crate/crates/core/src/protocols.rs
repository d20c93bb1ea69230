//! Experiment sequences composed from the qubit channels.
//!
//! Ramsey sequences (with and without the intermediate ideal negative
//! measurement), the dichotomic π/3 variant, the optical Mach-Zehnder bomb
//! test with repetition, and the Zeno-enhanced bomb test.
//!
//! Readout maps `Up → D1` and `Down → D2`, so `D1` is the dark port of a
//! balanced, unobstructed interferometer.

use std::f64::consts::{FRAC_PI_2, FRAC_PI_3, PI, TAU};

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::qubit::{
    apply_dephasing, apply_rotation, apply_spin_flip, check_t1, check_wait, measure_projective,
    negative_measurement, pure_state, wrap_angle, Branch, CoherenceModel, NegativeOutcome, Pulse,
    QubitState,
};

/// Result of a single interferometer shot.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum ShotOutcome {
    D1,
    D2,
    /// Intercepted at `t₂` and discarded by post-selection.
    Removed,
}

impl ShotOutcome {
    pub fn from_readout(branch: Branch) -> Self {
        match branch {
            Branch::Up => ShotOutcome::D1,
            Branch::Down => ShotOutcome::D2,
        }
    }

    /// `Q(t₃)`: `+1` for D1, `-1` for D2, `None` for removed shots.
    pub fn q_value(self) -> Option<i8> {
        match self {
            ShotOutcome::D1 => Some(1),
            ShotOutcome::D2 => Some(-1),
            ShotOutcome::Removed => None,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            ShotOutcome::D1 => "D1",
            ShotOutcome::D2 => "D2",
            ShotOutcome::Removed => "Removed",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "D1" => Some(ShotOutcome::D1),
            "D2" => Some(ShotOutcome::D2),
            "Removed" => Some(ShotOutcome::Removed),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RamseyConfig {
    /// Rotation angle of both pulses, in `(0, π]`.
    pub pulse_theta: f64,
    /// Phase of the second pulse relative to the first.
    pub pulse_phi: f64,
    /// Uncalibrated phase error added to the second pulse.
    pub phase_offset: f64,
    pub wait_us: f64,
    pub coherence: CoherenceModel,
    /// `f64::INFINITY` disables spin flips.
    pub t1_us: f64,
    /// Branch removed at `t₂`; `None` omits the `Q(t₂)` measurement.
    pub intercept: Option<Branch>,
}

impl RamseyConfig {
    /// π/2 Ramsey sequence with both pulses in phase, no spin flips and no
    /// interception.
    pub fn half_pi(wait_us: f64, coherence: CoherenceModel) -> Self {
        Self {
            pulse_theta: FRAC_PI_2,
            pulse_phi: 0.0,
            phase_offset: 0.0,
            wait_us,
            coherence,
            t1_us: f64::INFINITY,
            intercept: None,
        }
    }

    /// Same as [`RamseyConfig::half_pi`] with π/3 pulses.
    pub fn third_pi(wait_us: f64, coherence: CoherenceModel) -> Self {
        Self {
            pulse_theta: FRAC_PI_3,
            ..Self::half_pi(wait_us, coherence)
        }
    }

    pub fn with_intercept(self, intercept: Option<Branch>) -> Self {
        Self { intercept, ..self }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.pulse_theta > 0.0 && self.pulse_theta <= PI) {
            return Err(Error::param(
                "pulse_theta",
                format!("must lie in (0, pi], got {}", self.pulse_theta),
            ));
        }
        if !self.pulse_phi.is_finite() || !self.phase_offset.is_finite() {
            return Err(Error::param("pulse_phi", "phases must be finite"));
        }
        check_wait(self.wait_us)?;
        check_t1(self.t1_us)?;
        self.coherence.validate()
    }

    fn first_pulse(&self) -> Pulse {
        Pulse::new(self.pulse_theta, 0.0)
    }

    fn second_pulse(&self) -> Pulse {
        Pulse::new(self.pulse_theta, self.pulse_phi + self.phase_offset)
    }

    /// Free evolution between the pulses.
    fn evolve(&self, state: &QubitState) -> QubitState {
        // config is validated by every public entry point
        let dephased =
            apply_dephasing(state, self.wait_us, self.coherence).expect("validated wait");
        apply_spin_flip(&dephased, self.wait_us, self.t1_us).expect("validated T1")
    }
}

/// One Ramsey shot starting from `|↑⟩`.
pub fn run_ramsey<R: Rng + ?Sized>(config: &RamseyConfig, rng: &mut R) -> Result<ShotOutcome> {
    config.validate()?;
    Ok(ramsey_shot_from(config, &pure_state(Branch::Up), rng))
}

/// Ramsey shot from an arbitrary initial state. Draws exactly one variate
/// for the interception (when present) and one for the readout.
pub(crate) fn ramsey_shot_from<R: Rng + ?Sized>(
    config: &RamseyConfig,
    initial: &QubitState,
    rng: &mut R,
) -> ShotOutcome {
    let mut state = apply_rotation(initial, config.first_pulse());
    if let Some(branch) = config.intercept {
        match negative_measurement(&state, branch, rng.random::<f64>()) {
            NegativeOutcome::Removed => return ShotOutcome::Removed,
            NegativeOutcome::Survived(s) => state = s,
        }
    }
    let state = apply_rotation(&config.evolve(&state), config.second_pulse());
    let (branch, _) = measure_projective(&state, rng.random::<f64>());
    ShotOutcome::from_readout(branch)
}

/// Exact outcome probabilities `(p_d1, p_d2, p_removed)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OutcomeDistribution {
    pub p_d1: f64,
    pub p_d2: f64,
    pub p_removed: f64,
}

impl OutcomeDistribution {
    pub fn probability(&self, outcome: ShotOutcome) -> f64 {
        match outcome {
            ShotOutcome::D1 => self.p_d1,
            ShotOutcome::D2 => self.p_d2,
            ShotOutcome::Removed => self.p_removed,
        }
    }

    /// Convex combination `w·self + (1 - w)·other`.
    pub fn mix(&self, other: &OutcomeDistribution, w: f64) -> OutcomeDistribution {
        OutcomeDistribution {
            p_d1: w * self.p_d1 + (1.0 - w) * other.p_d1,
            p_d2: w * self.p_d2 + (1.0 - w) * other.p_d2,
            p_removed: w * self.p_removed + (1.0 - w) * other.p_removed,
        }
    }
}

pub fn ramsey_outcome_distribution(config: &RamseyConfig) -> Result<OutcomeDistribution> {
    config.validate()?;
    Ok(distribution_from(config, &pure_state(Branch::Up)))
}

pub(crate) fn distribution_from(
    config: &RamseyConfig,
    initial: &QubitState,
) -> OutcomeDistribution {
    let mut state = apply_rotation(initial, config.first_pulse());
    let mut p_removed = 0.0;
    if let Some(branch) = config.intercept {
        p_removed = state.population(branch);
        state = pure_state(branch.other());
    }
    let final_state = apply_rotation(&config.evolve(&state), config.second_pulse());
    let survive = 1.0 - p_removed;
    OutcomeDistribution {
        p_d1: survive * final_state.rho_uu(),
        p_d2: survive * final_state.rho_dd(),
        p_removed,
    }
}

/// Which pair of times a dichotomic shot correlates.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum CorrelationPair {
    Q2Q1,
    Q3Q2,
    Q3Q1,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DichotomicShot {
    /// `(q_early, q_late)`, each `±1`.
    Pair(i8, i8),
    Removed,
}

fn require_third_pi(config: &RamseyConfig) -> Result<()> {
    if (config.pulse_theta - FRAC_PI_3).abs() > 1e-12 {
        return Err(Error::param(
            "pulse_theta",
            format!(
                "dichotomic protocol needs pi/3 pulses, got {}",
                config.pulse_theta
            ),
        ));
    }
    Ok(())
}

/// One shot of the dichotomic π/3 protocol. `Q(t₁) = +1` by preparation;
/// `Q(t₂)` for the `Q3Q2` pair comes from a negative measurement whose
/// intercepted branch is drawn 50/50 from the stream.
pub fn run_dichotomic<R: Rng + ?Sized>(
    config: &RamseyConfig,
    pair: CorrelationPair,
    rng: &mut R,
) -> Result<DichotomicShot> {
    require_third_pi(config)?;
    config.validate()?;
    let up = pure_state(Branch::Up);
    let shot = match pair {
        CorrelationPair::Q2Q1 => match first_pulse_shot_from(config, &up, rng).q_value() {
            Some(q2) => DichotomicShot::Pair(1, q2),
            None => DichotomicShot::Removed,
        },
        CorrelationPair::Q3Q1 => {
            let cfg = config.with_intercept(None);
            match ramsey_shot_from(&cfg, &up, rng).q_value() {
                Some(q3) => DichotomicShot::Pair(1, q3),
                None => DichotomicShot::Removed,
            }
        }
        CorrelationPair::Q3Q2 => {
            let intercept = if rng.random::<f64>() < 0.5 {
                Branch::Up
            } else {
                Branch::Down
            };
            let cfg = config.with_intercept(Some(intercept));
            match ramsey_shot_from(&cfg, &up, rng).q_value() {
                Some(q3) => DichotomicShot::Pair(intercept.other().sign(), q3),
                None => DichotomicShot::Removed,
            }
        }
    };
    Ok(shot)
}

/// Readout directly after the first pulse, giving `Q(t₂)` as D1/D2.
pub(crate) fn first_pulse_shot_from<R: Rng + ?Sized>(
    config: &RamseyConfig,
    initial: &QubitState,
    rng: &mut R,
) -> ShotOutcome {
    let state = apply_rotation(initial, config.first_pulse());
    ShotOutcome::from_readout(measure_projective(&state, rng.random::<f64>()).0)
}

pub(crate) fn first_pulse_distribution_from(
    config: &RamseyConfig,
    initial: &QubitState,
) -> OutcomeDistribution {
    let state = apply_rotation(initial, config.first_pulse());
    OutcomeDistribution {
        p_d1: state.rho_uu(),
        p_d2: state.rho_dd(),
        p_removed: 0.0,
    }
}

/// Exact dichotomic correlators `(⟨Q₂Q₁⟩, ⟨Q₃Q₂⟩, ⟨Q₃Q₁⟩)` with the two
/// interception branches interleaved in equal proportion.
pub fn dichotomic_correlators_exact(config: &RamseyConfig) -> Result<(f64, f64, f64)> {
    require_third_pi(config)?;
    config.validate()?;
    let up = pure_state(Branch::Up);
    let single = first_pulse_distribution_from(config, &up);
    let q2q1 = single.p_d1 - single.p_d2;
    let plain = distribution_from(&config.with_intercept(None), &up);
    let q3q1 = plain.p_d1 - plain.p_d2;
    let mut weighted = 0.0;
    let mut survivors = 0.0;
    for intercept in [Branch::Up, Branch::Down] {
        let d = distribution_from(&config.with_intercept(Some(intercept)), &up);
        weighted += f64::from(intercept.other().sign()) * (d.p_d1 - d.p_d2);
        survivors += d.p_d1 + d.p_d2;
    }
    Ok((q2q1, weighted / survivors, q3q1))
}

/// Mach-Zehnder bomb-test parameters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BombTestConfig {
    pub bomb_present: bool,
    /// Probability that the first splitter sends the photon into branch B.
    pub branch_b_probability: f64,
    /// Interferometer coherence when unobstructed.
    pub contrast: f64,
}

impl BombTestConfig {
    pub fn balanced(bomb_present: bool) -> Self {
        Self {
            bomb_present,
            branch_b_probability: 0.5,
            contrast: 1.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let eps = self.branch_b_probability;
        if !(eps > 0.0 && eps < 1.0) {
            return Err(Error::param(
                "branch_b_probability",
                format!("must lie in (0, 1), got {eps}"),
            ));
        }
        if !(0.0..=1.0).contains(&self.contrast) {
            return Err(Error::param(
                "contrast",
                format!("must lie in [0, 1], got {}", self.contrast),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum MzOutcome {
    Exploded,
    D1,
    D2,
}

/// A single photon through the interferometer. With a live bomb in branch B
/// and two identical splitters, a photon that survives in branch A reaches
/// the dark port with probability `ε`.
pub fn run_mz_bomb_test<R: Rng + ?Sized>(
    config: &BombTestConfig,
    rng: &mut R,
) -> Result<MzOutcome> {
    config.validate()?;
    Ok(mz_shot(config, rng))
}

fn mz_shot<R: Rng + ?Sized>(config: &BombTestConfig, rng: &mut R) -> MzOutcome {
    let eps = config.branch_b_probability;
    if config.bomb_present {
        if rng.random::<f64>() < eps {
            return MzOutcome::Exploded;
        }
        if rng.random::<f64>() < eps {
            MzOutcome::D1
        } else {
            MzOutcome::D2
        }
    } else if rng.random::<f64>() < 0.5 * (1.0 - config.contrast) {
        MzOutcome::D1
    } else {
        MzOutcome::D2
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum RepeatedOutcome {
    Rescued,
    Exploded,
    Inconclusive,
}

/// Repeats the test on a live bomb until the dark port clicks, the bomb
/// explodes, or `max_rounds` is used up.
pub fn run_repeated_bomb_test<R: Rng + ?Sized>(
    config: &BombTestConfig,
    max_rounds: u64,
    rng: &mut R,
) -> Result<RepeatedOutcome> {
    config.validate()?;
    if !config.bomb_present {
        return Err(Error::param(
            "bomb_present",
            "repeated rescue needs a live bomb",
        ));
    }
    if max_rounds == 0 {
        return Err(Error::param("max_rounds", "must be >= 1"));
    }
    for _ in 0..max_rounds {
        match mz_shot(config, rng) {
            MzOutcome::D1 => return Ok(RepeatedOutcome::Rescued),
            MzOutcome::Exploded => return Ok(RepeatedOutcome::Exploded),
            MzOutcome::D2 => {}
        }
    }
    Ok(RepeatedOutcome::Inconclusive)
}

/// Live-bomb detection probability of the `N`-cycle Zeno scheme,
/// `cos^{2N}(π/2N)`.
pub fn zeno_success_probability(n_cycles: u32) -> Result<f64> {
    if n_cycles == 0 {
        return Err(Error::param("n_cycles", "must be >= 1"));
    }
    if n_cycles == 1 {
        // cos(π/2) = 0 exactly; avoid the 1e-33 rounding residue
        return Ok(0.0);
    }
    let n = f64::from(n_cycles);
    Ok((PI / (2.0 * n)).cos().powf(2.0 * n))
}

/// One Zeno shot simulated channel by channel: `N` rotations of `π/N` on the
/// Bloch sphere, each followed by interception of the `Down` branch. Returns
/// `true` when the bomb is detected without exploding.
pub fn run_zeno_shot<R: Rng + ?Sized>(n_cycles: u32, rng: &mut R) -> Result<bool> {
    if n_cycles == 0 {
        return Err(Error::param("n_cycles", "must be >= 1"));
    }
    let pulse = Pulse::new(PI / f64::from(n_cycles), 0.0);
    let mut state = pure_state(Branch::Up);
    for _ in 0..n_cycles {
        state = apply_rotation(&state, pulse);
        match negative_measurement(&state, Branch::Down, rng.random::<f64>()) {
            NegativeOutcome::Removed => return Ok(false),
            NegativeOutcome::Survived(s) => state = s,
        }
    }
    let (branch, _) = measure_projective(&state, rng.random::<f64>());
    Ok(branch == Branch::Up)
}

const CALIBRATION_GRID: usize = 1024;

/// Second-pulse phase that minimises the D1 probability of the sequence
/// without interception, in `[0, 2π)`.
pub fn calibrate_phase(config: &RamseyConfig) -> Result<f64> {
    let base = config.with_intercept(None);
    base.validate()?;
    let p_d1 = |phi: f64| {
        let cfg = RamseyConfig {
            pulse_phi: phi,
            ..base
        };
        distribution_from(&cfg, &pure_state(Branch::Up)).p_d1
    };
    let step = TAU / CALIBRATION_GRID as f64;
    let best = (0..CALIBRATION_GRID)
        .map(|k| k as f64 * step)
        .min_by(|a, b| p_d1(*a).total_cmp(&p_d1(*b)))
        .expect("non-empty grid");
    Ok(wrap_angle(golden_section_min(
        p_d1,
        best - step,
        best + step,
        1e-12,
    )))
}

fn golden_section_min<F: Fn(f64) -> f64>(f: F, mut lo: f64, mut hi: f64, tol: f64) -> f64 {
    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    let mut x1 = hi - inv_phi * (hi - lo);
    let mut x2 = lo + inv_phi * (hi - lo);
    let (mut f1, mut f2) = (f(x1), f(x2));
    while hi - lo > tol {
        if f1 <= f2 {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - inv_phi * (hi - lo);
            f1 = f(x1);
        } else {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + inv_phi * (hi - lo);
            f2 = f(x2);
        }
    }
    0.5 * (lo + hi)
}

#[cfg(test)]
mod tests {
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    use super::*;

    fn exp_model(tau: f64) -> CoherenceModel {
        CoherenceModel::exponential(tau).unwrap()
    }

    fn angular_distance(a: f64, b: f64) -> f64 {
        let d = wrap_angle(a - b);
        d.min(TAU - d)
    }

    #[test]
    fn ideal_ramsey_is_dark_at_d1() {
        let d = ramsey_outcome_distribution(&RamseyConfig::half_pi(0.0, exp_model(100.0))).unwrap();
        assert!(d.p_d1.abs() < 1e-15);
        assert!((d.p_d2 - 1.0).abs() < 1e-15);
        assert_eq!(d.p_removed, 0.0);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let cfg = RamseyConfig::half_pi(0.0, exp_model(100.0));
        for _ in 0..1000 {
            assert_eq!(run_ramsey(&cfg, &mut rng).unwrap(), ShotOutcome::D2);
        }
    }

    #[test]
    fn intercepted_ramsey_quarters() {
        for b in [Branch::Up, Branch::Down] {
            let cfg = RamseyConfig::half_pi(0.0, exp_model(100.0)).with_intercept(Some(b));
            let d = ramsey_outcome_distribution(&cfg).unwrap();
            assert!((d.p_d1 - 0.25).abs() < 1e-15);
            assert!((d.p_d2 - 0.25).abs() < 1e-15);
            assert!((d.p_removed - 0.5).abs() < 1e-15);
        }
    }

    #[test]
    fn decohered_dark_port_probability() {
        let d =
            ramsey_outcome_distribution(&RamseyConfig::half_pi(100.0, exp_model(100.0))).unwrap();
        assert!((d.p_d1 - 0.316_060_279_414_278_8).abs() < 1e-12);
        // α = (1 - C)/2 for a generic contrast
        let c = exp_model(70.0).factor(33.0);
        let d = ramsey_outcome_distribution(&RamseyConfig::half_pi(33.0, exp_model(70.0))).unwrap();
        assert!((d.p_d1 - (1.0 - c) / 2.0).abs() < 1e-14);
    }

    #[test]
    fn which_way_erasure_exact() {
        for wait in [0.0, 17.0, 130.0, 900.0] {
            for t1 in [f64::INFINITY, 300.0] {
                for b in [Branch::Up, Branch::Down] {
                    let cfg = RamseyConfig {
                        t1_us: t1,
                        ..RamseyConfig::half_pi(wait, exp_model(90.0))
                    }
                    .with_intercept(Some(b));
                    let d = ramsey_outcome_distribution(&cfg).unwrap();
                    assert!((d.p_d1 - d.p_d2).abs() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn config_validation() {
        let mut cfg = RamseyConfig::half_pi(0.0, exp_model(100.0));
        cfg.pulse_theta = 0.0;
        assert!(ramsey_outcome_distribution(&cfg).is_err());
        cfg.pulse_theta = 4.0;
        assert!(ramsey_outcome_distribution(&cfg).is_err());
        let cfg = RamseyConfig::half_pi(-1.0, exp_model(100.0));
        assert!(run_ramsey(&cfg, &mut ChaCha8Rng::seed_from_u64(0)).is_err());
    }

    #[test]
    fn dichotomic_exact_correlators() {
        let cfg = RamseyConfig::third_pi(0.0, exp_model(100.0));
        let (a, b, c) = dichotomic_correlators_exact(&cfg).unwrap();
        assert!((a - 0.5).abs() < 1e-14);
        assert!((b - 0.5).abs() < 1e-14);
        assert!((c + 0.5).abs() < 1e-14);
        assert!((a + b - c - 1.5).abs() < 1e-14);
        let half = RamseyConfig::half_pi(0.0, exp_model(100.0));
        assert!(dichotomic_correlators_exact(&half).is_err());
        assert!(run_dichotomic(
            &half,
            CorrelationPair::Q2Q1,
            &mut ChaCha8Rng::seed_from_u64(0)
        )
        .is_err());
    }

    #[test]
    fn dichotomic_sampling_matches_exact() {
        let cfg = RamseyConfig::third_pi(0.0, exp_model(100.0));
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        let n = 100_000;
        for (pair, expected) in [
            (CorrelationPair::Q2Q1, 0.5),
            (CorrelationPair::Q3Q2, 0.5),
            (CorrelationPair::Q3Q1, -0.5),
        ] {
            let (mut sum, mut kept) = (0i64, 0i64);
            for _ in 0..n {
                if let DichotomicShot::Pair(a, b) = run_dichotomic(&cfg, pair, &mut rng).unwrap() {
                    assert_eq!(a.abs(), 1);
                    sum += i64::from(a * b);
                    kept += 1;
                }
            }
            let mean = sum as f64 / kept as f64;
            let se = ((1.0 - expected * expected) / kept as f64).sqrt();
            assert!((mean - expected).abs() < 5.0 * se, "{pair:?}: {mean}");
        }
    }

    #[test]
    fn ramsey_sampling_matches_distribution() {
        let cfg = RamseyConfig {
            t1_us: 400.0,
            ..RamseyConfig::half_pi(60.0, exp_model(80.0))
        }
        .with_intercept(Some(Branch::Down));
        let d = ramsey_outcome_distribution(&cfg).unwrap();
        let n = 100_000;
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mut counts = [0usize; 3];
        for _ in 0..n {
            counts[run_ramsey(&cfg, &mut rng).unwrap() as usize] += 1;
        }
        for (outcome, count) in [ShotOutcome::D1, ShotOutcome::D2, ShotOutcome::Removed]
            .iter()
            .zip(counts)
        {
            let p = d.probability(*outcome);
            let se = (p * (1.0 - p) / n as f64).sqrt();
            assert!((count as f64 / n as f64 - p).abs() < 5.0 * se);
        }
    }

    #[test]
    fn bomb_test_config_bounds() {
        let mut cfg = BombTestConfig::balanced(true);
        cfg.branch_b_probability = 0.0;
        assert!(cfg.validate().is_err());
        cfg.branch_b_probability = 0.5;
        cfg.contrast = 1.5;
        assert!(cfg.validate().is_err());
        let dud = BombTestConfig::balanced(false);
        assert!(run_repeated_bomb_test(&dud, 10, &mut ChaCha8Rng::seed_from_u64(0)).is_err());
        let live = BombTestConfig::balanced(true);
        assert!(run_repeated_bomb_test(&live, 0, &mut ChaCha8Rng::seed_from_u64(0)).is_err());
    }

    #[test]
    fn dud_with_full_contrast_never_clicks_d1() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let dud = BombTestConfig::balanced(false);
        for _ in 0..10_000 {
            assert_eq!(run_mz_bomb_test(&dud, &mut rng).unwrap(), MzOutcome::D2);
        }
    }

    #[test]
    fn zeno_values() {
        assert!(zeno_success_probability(0).is_err());
        assert_eq!(zeno_success_probability(1).unwrap(), 0.0);
        assert!((zeno_success_probability(2).unwrap() - 0.25).abs() < 1e-15);
        // numeric evaluation of cos^10(π/10)
        assert!((zeno_success_probability(5).unwrap() - 0.605_429_049_713_106_3).abs() < 1e-12);
        let p100 = zeno_success_probability(100).unwrap();
        assert!((p100 - 0.975_626_914_143_898).abs() < 1e-12);
        // asymptote 1 - π²/4N with O(1/N²) remainder
        assert!((p100 - (1.0 - PI * PI / 400.0)).abs() < 5e-4);
        let mut prev = 0.0;
        for n in 2..500 {
            let p = zeno_success_probability(n).unwrap();
            assert!(p > prev && p < 1.0);
            prev = p;
        }
    }

    #[test]
    fn calibration_finds_in_phase_setting() {
        let cfg = RamseyConfig::half_pi(0.0, exp_model(100.0));
        assert!(angular_distance(calibrate_phase(&cfg).unwrap(), 0.0) < 1e-6);
        let cfg = RamseyConfig::half_pi(100.0, exp_model(100.0));
        assert!(angular_distance(calibrate_phase(&cfg).unwrap(), 0.0) < 1e-6);
    }

    #[test]
    fn calibration_compensates_phase_offset() {
        for delta in [0.3, 1.7, 4.0] {
            let cfg = RamseyConfig {
                phase_offset: delta,
                ..RamseyConfig::half_pi(40.0, exp_model(100.0))
            };
            // grid oracle at 10x the production resolution
            let oracle = (0..10_240)
                .map(|k| k as f64 * TAU / 10_240.0)
                .min_by(|a, b| {
                    let pa = ramsey_outcome_distribution(&RamseyConfig {
                        pulse_phi: *a,
                        ..cfg
                    })
                    .unwrap()
                    .p_d1;
                    let pb = ramsey_outcome_distribution(&RamseyConfig {
                        pulse_phi: *b,
                        ..cfg
                    })
                    .unwrap()
                    .p_d1;
                    pa.total_cmp(&pb)
                })
                .unwrap();
            let phi = calibrate_phase(&cfg).unwrap();
            assert!(angular_distance(phi, -delta) < 1e-6, "delta {delta}: {phi}");
            assert!(angular_distance(phi, oracle) < TAU / 10_240.0);
        }
    }
}
