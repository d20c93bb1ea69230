//! Closed-form figures of merit of the Elitzur-Vaidman bomb tester, for two
//! identical splitters that send a photon into branch B with probability `ε`.

use crate::error::{Error, Result};
use crate::protocols::zeno_success_probability;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TestFigures {
    /// Live bomb flagged at the dark port in one trial (`1 − β`).
    pub power: f64,
    /// Dud flagged at the dark port (false positive).
    pub alpha: f64,
    pub explode_prob: f64,
    /// Live bomb, bright-port click.
    pub inconclusive_prob: f64,
}

fn check_split(eps: f64) -> Result<()> {
    if !(eps > 0.0 && eps < 1.0) {
        return Err(Error::param(
            "branch_b_probability",
            format!("must lie in (0, 1), got {eps}"),
        ));
    }
    Ok(())
}

fn check_unit(name: &'static str, x: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&x) {
        return Err(Error::param(name, format!("must lie in [0, 1], got {x}")));
    }
    Ok(())
}

pub fn single_trial_figures(branch_b_probability: f64, contrast: f64) -> Result<TestFigures> {
    check_split(branch_b_probability)?;
    check_unit("contrast", contrast)?;
    let eps = branch_b_probability;
    let power = (1.0 - eps) * eps;
    Ok(TestFigures {
        power,
        alpha: 0.5 * (1.0 - contrast),
        explode_prob: eps,
        inconclusive_prob: (1.0 - eps) * (1.0 - eps),
    })
}

/// Rescue probability when the test may be repeated until it is conclusive,
/// `(1 − ε)/(2 − ε)`. Tends to 1/2 as `ε → 0` without reaching it.
pub fn repeated_trial_power(branch_b_probability: f64) -> Result<f64> {
    check_split(branch_b_probability)?;
    let eps = branch_b_probability;
    Ok((1.0 - eps) / (2.0 - eps))
}

/// Rescue probability with at most `rounds` repetitions.
pub fn finite_round_power(branch_b_probability: f64, rounds: u64) -> Result<f64> {
    let infinite = repeated_trial_power(branch_b_probability)?;
    let again = (1.0 - branch_b_probability).powi(2);
    Ok(infinite * (1.0 - again.powf(rounds as f64)))
}

/// False-positive rate implied by the quantum witness, `(1 − W)/2`.
pub fn alpha_from_witness(w: f64) -> Result<f64> {
    check_unit("witness", w)?;
    Ok(0.5 * (1.0 - w))
}

/// Smallest number of Zeno cycles reaching `target_power`.
pub fn zeno_cycles_for_power(target_power: f64) -> Result<u32> {
    if !(target_power > 0.0 && target_power < 1.0) {
        return Err(Error::param(
            "target_power",
            format!("must lie in (0, 1), got {target_power}"),
        ));
    }
    let reaches = |n: u32| zeno_success_probability(n).map(|p| p >= target_power);
    let mut hi = 2u32;
    while !reaches(hi)? {
        hi = hi
            .checked_mul(2)
            .ok_or_else(|| Error::param("target_power", "too close to 1"))?;
    }
    let mut lo = hi / 2;
    // invariant: reaches(hi) and (lo == 1 or !reaches(lo))
    while hi - lo > 1 {
        let mid = lo + (hi - lo) / 2;
        if reaches(mid)? {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    if lo >= 1 && reaches(lo)? {
        return Ok(lo);
    }
    Ok(hi)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_trial_values() {
        let f = single_trial_figures(0.5, 1.0).unwrap();
        assert_eq!(f.power, 0.25);
        assert_eq!(f.alpha, 0.0);
        assert_eq!(f.explode_prob, 0.5);
        assert_eq!(single_trial_figures(0.5, 0.0).unwrap().alpha, 0.5);
        let f = single_trial_figures(0.1, 1.0).unwrap();
        assert!((f.power - 0.09).abs() < 1e-15);
        assert_eq!(f.explode_prob, 0.1);
        assert!((f.power + f.explode_prob + f.inconclusive_prob - 1.0).abs() < 1e-15);
        assert!(single_trial_figures(0.0, 1.0).is_err());
        assert!(single_trial_figures(0.5, -0.1).is_err());
    }

    #[test]
    fn repeated_power_values() {
        assert!((repeated_trial_power(0.5).unwrap() - 1.0 / 3.0).abs() < 1e-15);
        assert!((repeated_trial_power(0.2).unwrap() - 4.0 / 9.0).abs() < 1e-15);
        assert!((repeated_trial_power(1e-9).unwrap() - 0.5).abs() < 1e-9);
        assert!(repeated_trial_power(1.0).is_err());
        assert!(repeated_trial_power(0.0).is_err());
    }

    #[test]
    fn repeated_power_matches_geometric_series() {
        for eps in [0.05, 0.3, 0.5, 0.8] {
            let single = (1.0 - eps) * eps;
            let again: f64 = (1.0 - eps) * (1.0 - eps);
            let series: f64 = (0..10_000).map(|k| single * again.powi(k)).sum();
            assert!((repeated_trial_power(eps).unwrap() - series).abs() < 1e-12);
            let partial: f64 = (0..7).map(|k| single * again.powi(k)).sum();
            assert!((finite_round_power(eps, 7).unwrap() - partial).abs() < 1e-14);
        }
    }

    #[test]
    fn power_shape() {
        let grid: Vec<f64> = (1..1000).map(|i| i as f64 / 1000.0).collect();
        for w in grid.windows(2) {
            assert!(repeated_trial_power(w[1]).unwrap() < repeated_trial_power(w[0]).unwrap());
        }
        let best = grid
            .iter()
            .copied()
            .max_by(|a, b| {
                let pa = single_trial_figures(*a, 1.0).unwrap().power;
                let pb = single_trial_figures(*b, 1.0).unwrap().power;
                pa.total_cmp(&pb)
            })
            .unwrap();
        assert_eq!(best, 0.5);
    }

    #[test]
    fn witness_alpha_identity() {
        assert_eq!(alpha_from_witness(1.0).unwrap(), 0.0);
        assert_eq!(alpha_from_witness(0.0).unwrap(), 0.5);
        assert!((alpha_from_witness(0.958).unwrap() - 0.021).abs() < 1e-15);
        for i in 0..=100 {
            let k = 1.0 + i as f64 / 100.0;
            let a = alpha_from_witness(crate::estimators::quantum_witness(k)).unwrap();
            assert!((a - (2.0 - k) / 2.0).abs() < 1e-15);
        }
        assert!(alpha_from_witness(1.1).is_err());
    }

    #[test]
    fn zeno_cycle_search() {
        assert_eq!(zeno_cycles_for_power(0.6).unwrap(), 5);
        assert_eq!(zeno_cycles_for_power(0.9).unwrap(), 24);
        assert_eq!(zeno_cycles_for_power(1e-12).unwrap(), 2);
        assert_eq!(zeno_cycles_for_power(0.25).unwrap(), 2);
        assert!(zeno_cycles_for_power(1.0).is_err());
        assert!(zeno_cycles_for_power(0.0).is_err());
        // brute-force oracle over the table
        for target in [0.3, 0.5, 0.75, 0.95, 0.99] {
            let brute = (1..10_000)
                .find(|n| zeno_success_probability(*n).unwrap() >= target)
                .unwrap();
            assert_eq!(zeno_cycles_for_power(target).unwrap(), brute);
        }
    }
}
