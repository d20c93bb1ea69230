//! Two-level density operators and the discrete channels that act on them.
//!
//! The basis is `|↑⟩ = +z`, `|↓⟩ = -z`. A [`QubitState`] stores the two
//! populations and the upper off-diagonal element; the lower one is its
//! conjugate. Channels are pure functions of the input state, and every
//! stochastic operation takes its uniform variate from the caller.

use std::f64::consts::TAU;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Slack allowed on trace and positivity checks.
pub const STATE_TOL: f64 = 1e-12;

/// Computational basis label. `Up` and `Down` double as the two
/// interferometer branches.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Branch {
    Up,
    Down,
}

impl Branch {
    pub fn other(self) -> Branch {
        match self {
            Branch::Up => Branch::Down,
            Branch::Down => Branch::Up,
        }
    }

    /// Dichotomic value: `+1` for `Up`, `-1` for `Down`.
    pub fn sign(self) -> i8 {
        match self {
            Branch::Up => 1,
            Branch::Down => -1,
        }
    }
}

/// 2×2 density operator of a pseudo-spin-1/2.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QubitState {
    rho_uu: f64,
    rho_dd: f64,
    rho_ud: Complex64,
}

impl QubitState {
    /// Builds a state from its upper population and coherence, rejecting
    /// anything that is not a valid density operator.
    pub fn new(rho_uu: f64, rho_ud: Complex64) -> Result<Self> {
        if !(rho_uu.is_finite() && (-STATE_TOL..=1.0 + STATE_TOL).contains(&rho_uu)) {
            return Err(Error::param(
                "rho_uu",
                format!("{rho_uu} is not a probability"),
            ));
        }
        let rho_uu = rho_uu.clamp(0.0, 1.0);
        let rho_dd = 1.0 - rho_uu;
        if !(rho_ud.re.is_finite() && rho_ud.im.is_finite())
            || rho_ud.norm_sqr() > rho_uu * rho_dd + STATE_TOL
        {
            return Err(Error::param(
                "rho_ud",
                format!("|{rho_ud}|^2 exceeds rho_uu*rho_dd"),
            ));
        }
        Ok(Self {
            rho_uu,
            rho_dd,
            rho_ud,
        })
    }

    /// Projector onto a basis state.
    pub fn pure(branch: Branch) -> Self {
        let (rho_uu, rho_dd) = match branch {
            Branch::Up => (1.0, 0.0),
            Branch::Down => (0.0, 1.0),
        };
        Self {
            rho_uu,
            rho_dd,
            rho_ud: Complex64::new(0.0, 0.0),
        }
    }

    /// `(|↑⟩ + |↓⟩)/√2`.
    pub fn equal_superposition() -> Self {
        Self {
            rho_uu: 0.5,
            rho_dd: 0.5,
            rho_ud: Complex64::new(0.5, 0.0),
        }
    }

    /// Classical mixture `p_up·|↑⟩⟨↑| + (1 - p_up)·|↓⟩⟨↓|`.
    pub fn mixed(p_up: f64) -> Result<Self> {
        Self::new(p_up, Complex64::new(0.0, 0.0))
    }

    pub fn rho_uu(&self) -> f64 {
        self.rho_uu
    }

    pub fn rho_dd(&self) -> f64 {
        self.rho_dd
    }

    pub fn rho_ud(&self) -> Complex64 {
        self.rho_ud
    }

    pub fn population(&self, branch: Branch) -> f64 {
        match branch {
            Branch::Up => self.rho_uu,
            Branch::Down => self.rho_dd,
        }
    }

    /// `Tr ρ²`.
    pub fn purity(&self) -> f64 {
        self.rho_uu * self.rho_uu + self.rho_dd * self.rho_dd + 2.0 * self.rho_ud.norm_sqr()
    }

    pub fn trace(&self) -> f64 {
        self.rho_uu + self.rho_dd
    }

    /// Largest entry-wise distance between two density matrices.
    pub fn distance(&self, other: &QubitState) -> f64 {
        (self.rho_uu - other.rho_uu)
            .abs()
            .max((self.rho_dd - other.rho_dd).abs())
            .max((self.rho_ud - other.rho_ud).norm())
    }

    fn matrix(&self) -> [[Complex64; 2]; 2] {
        [
            [Complex64::new(self.rho_uu, 0.0), self.rho_ud],
            [self.rho_ud.conj(), Complex64::new(self.rho_dd, 0.0)],
        ]
    }

    fn from_matrix(m: [[Complex64; 2]; 2]) -> Self {
        let trace = m[0][0].re + m[1][1].re;
        Self {
            rho_uu: m[0][0].re / trace,
            rho_dd: m[1][1].re / trace,
            rho_ud: m[0][1] / trace,
        }
    }
}

/// Resonant rotation `R(θ, φ) = exp(-i θ/2 (cos φ σx + sin φ σy))`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Pulse {
    theta: f64,
    phi: f64,
}

impl Pulse {
    /// Angles are reduced into `[0, 2π)`.
    pub fn new(theta: f64, phi: f64) -> Self {
        Self {
            theta: wrap_angle(theta),
            phi: wrap_angle(phi),
        }
    }

    pub fn theta(&self) -> f64 {
        self.theta
    }

    pub fn phi(&self) -> f64 {
        self.phi
    }

    fn unitary(&self) -> [[Complex64; 2]; 2] {
        let (s, c) = (0.5 * self.theta).sin_cos();
        let minus_i = Complex64::new(0.0, -1.0);
        [
            [
                Complex64::new(c, 0.0),
                minus_i * s * Complex64::from_polar(1.0, -self.phi),
            ],
            [
                minus_i * s * Complex64::from_polar(1.0, self.phi),
                Complex64::new(c, 0.0),
            ],
        ]
    }
}

/// Reduces an angle into `[0, 2π)`.
pub fn wrap_angle(angle: f64) -> f64 {
    let wrapped = angle.rem_euclid(TAU);
    // rem_euclid can round up to exactly TAU for tiny negative inputs
    if wrapped >= TAU {
        0.0
    } else {
        wrapped
    }
}

/// Functional form of the coherence decay during free evolution.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum DecayShape {
    #[default]
    Exponential,
    Gaussian,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CoherenceModel {
    #[serde(default)]
    pub shape: DecayShape,
    /// Coherence time in microseconds.
    pub tau_us: f64,
}

impl CoherenceModel {
    pub fn new(shape: DecayShape, tau_us: f64) -> Result<Self> {
        let model = Self { shape, tau_us };
        model.validate()?;
        Ok(model)
    }

    pub fn exponential(tau_us: f64) -> Result<Self> {
        Self::new(DecayShape::Exponential, tau_us)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.tau_us > 0.0) {
            return Err(Error::param(
                "tau_us",
                format!("must be > 0, got {}", self.tau_us),
            ));
        }
        Ok(())
    }

    /// Coherence factor `c(t)` in `[0, 1]`.
    pub fn factor(&self, wait_us: f64) -> f64 {
        let x = wait_us / self.tau_us;
        match self.shape {
            DecayShape::Exponential => (-x).exp(),
            DecayShape::Gaussian => (-x * x).exp(),
        }
    }
}

pub fn pure_state(branch: Branch) -> QubitState {
    QubitState::pure(branch)
}

pub fn apply_rotation(state: &QubitState, pulse: Pulse) -> QubitState {
    let u = pulse.unitary();
    let rho = state.matrix();
    let mut tmp = [[Complex64::new(0.0, 0.0); 2]; 2];
    for i in 0..2 {
        for j in 0..2 {
            tmp[i][j] = u[i][0] * rho[0][j] + u[i][1] * rho[1][j];
        }
    }
    let mut out = [[Complex64::new(0.0, 0.0); 2]; 2];
    for i in 0..2 {
        for j in 0..2 {
            out[i][j] = tmp[i][0] * u[j][0].conj() + tmp[i][1] * u[j][1].conj();
        }
    }
    QubitState::from_matrix(out)
}

/// Scales the coherence by `c(t)`; populations are untouched.
pub fn apply_dephasing(
    state: &QubitState,
    wait_us: f64,
    model: CoherenceModel,
) -> Result<QubitState> {
    check_wait(wait_us)?;
    model.validate()?;
    if wait_us == 0.0 {
        return Ok(*state);
    }
    Ok(QubitState {
        rho_ud: state.rho_ud * model.factor(wait_us),
        ..*state
    })
}

/// Probability that a symmetric spin flip has occurred after `wait_us`.
pub fn spin_flip_probability(wait_us: f64, t1_us: f64) -> f64 {
    if t1_us.is_infinite() || wait_us == 0.0 {
        0.0
    } else {
        -(-wait_us / t1_us).exp_m1()
    }
}

/// Depolarizes toward the equal mixture with probability `1 - exp(-t/T1)`.
/// `t1_us = +∞` disables the channel.
pub fn apply_spin_flip(state: &QubitState, wait_us: f64, t1_us: f64) -> Result<QubitState> {
    check_wait(wait_us)?;
    check_t1(t1_us)?;
    let p = spin_flip_probability(wait_us, t1_us);
    if p == 0.0 {
        return Ok(*state);
    }
    let keep = 1.0 - p;
    let rho_uu = keep * state.rho_uu + 0.5 * p;
    Ok(QubitState {
        rho_uu,
        rho_dd: 1.0 - rho_uu,
        rho_ud: state.rho_ud * keep,
    })
}

/// Projective readout in the z basis (Lüders rule).
pub fn measure_projective(state: &QubitState, rand01: f64) -> (Branch, QubitState) {
    let branch = if rand01 < state.rho_uu {
        Branch::Up
    } else {
        Branch::Down
    };
    (branch, QubitState::pure(branch))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum NegativeOutcome {
    Survived(QubitState),
    Removed,
}

/// Intercepts one branch. The particle is removed with probability equal to
/// that branch's population; otherwise it is found in the other branch.
pub fn negative_measurement(
    state: &QubitState,
    intercepted: Branch,
    rand01: f64,
) -> NegativeOutcome {
    if rand01 < state.population(intercepted) {
        NegativeOutcome::Removed
    } else {
        NegativeOutcome::Survived(QubitState::pure(intercepted.other()))
    }
}

pub fn populations(state: &QubitState) -> (f64, f64) {
    (state.rho_uu, state.rho_dd)
}

pub(crate) fn check_wait(wait_us: f64) -> Result<()> {
    if wait_us.is_nan() || wait_us < 0.0 {
        return Err(Error::param(
            "wait_us",
            format!("must be >= 0, got {wait_us}"),
        ));
    }
    Ok(())
}

pub(crate) fn check_t1(t1_us: f64) -> Result<()> {
    if t1_us.is_nan() || t1_us <= 0.0 {
        return Err(Error::param("t1_us", format!("must be > 0, got {t1_us}")));
    }
    Ok(())
}
