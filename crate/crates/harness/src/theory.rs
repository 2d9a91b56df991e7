//! Multi-start convergence arithmetic: the probability that N
//! uniformly seeded searchers cover all l basins, and the smallest N
//! guaranteeing coverage with confidence gamma.

use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum TheoryError {
    #[error("l must be >= 1")]
    BasinCountZero,

    #[error("l = {0} too large: the alternating sum loses all precision past 60")]
    BasinCountTooLarge(u64),

    #[error("N must be >= 1")]
    SampleCountZero,

    #[error("gamma must lie strictly inside (0, 1)")]
    GammaOutOfRange,

    #[error("the asymptotic form needs l >= 2 (at l = 1 the answer is 1)")]
    BasinCountTooSmall,
}

/// Pr{ all l basins hit by N uniform draws } via the alternating
/// inclusion-exclusion sum over missed-basin counts, evaluated with
/// compensated summation and clamped into [0, 1].
pub fn prob_all_found(l: u64, n: u64) -> Result<f64, TheoryError> {
    if l == 0 {
        return Err(TheoryError::BasinCountZero);
    }
    if l > 60 {
        return Err(TheoryError::BasinCountTooLarge(l));
    }
    if n == 0 {
        return Err(TheoryError::SampleCountZero);
    }
    if n < l {
        return Ok(0.0); // fewer draws than basins cannot cover them
    }
    // Kahan summation of sum_p (-1)^p C(l,p) (1 - p/l)^N
    let mut sum = 0.0f64;
    let mut compensation = 0.0f64;
    let mut binom = 1.0f64; // C(l, 0)
    for p in 0..=l {
        let survive = (1.0 - p as f64 / l as f64).powi(n as i32);
        let sign = if p % 2 == 0 { 1.0 } else { -1.0 };
        let term = sign * binom * survive;
        let y = term - compensation;
        let t = sum + y;
        compensation = (t - sum) - y;
        sum = t;
        // C(l, p+1) = C(l, p) * (l - p) / (p + 1)
        binom *= (l - p) as f64 / (p + 1) as f64;
    }
    if sum < 1e-15 {
        if sum < -1e-9 {
            log::debug!("inclusion-exclusion sum clamped from {sum}");
        }
        sum = 0.0;
    }
    if sum > 1.0 {
        log::debug!("inclusion-exclusion sum clamped from {sum}");
        sum = 1.0;
    }
    Ok(sum)
}

/// Asymptotic least sample count, obtained by solving
/// exp(-l exp(-N/l)) = gamma for N:
///     N = l ln(l) - l ln(-ln(gamma)).
/// Grows without bound as gamma approaches 1.
pub fn n_star_asymptotic(l: u64, gamma: f64) -> Result<f64, TheoryError> {
    if l < 2 {
        return Err(TheoryError::BasinCountTooSmall);
    }
    if !(gamma > 0.0 && gamma < 1.0) {
        return Err(TheoryError::GammaOutOfRange);
    }
    let lf = l as f64;
    Ok(lf * lf.ln() - lf * (-gamma.ln()).ln())
}

/// Smallest N with prob_all_found(l, N) >= gamma, by doubling then
/// binary search; the coverage probability is monotone in N.
pub fn n_star_exact(l: u64, gamma: f64) -> Result<u64, TheoryError> {
    if l < 2 {
        return Err(TheoryError::BasinCountTooSmall);
    }
    if !(gamma > 0.0 && gamma < 1.0) {
        return Err(TheoryError::GammaOutOfRange);
    }
    let mut hi = l.max(1);
    while prob_all_found(l, hi)? < gamma {
        hi *= 2;
        // powi takes i32 exponents; past this bound the search is
        // asking for absurd confidence anyway
        if hi > 1 << 30 {
            return Err(TheoryError::GammaOutOfRange);
        }
    }
    let mut lo = l.max(1) / 2;
    while lo + 1 < hi {
        let mid = lo + (hi - lo) / 2;
        if prob_all_found(l, mid)? >= gamma {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(if prob_all_found(l, lo)? >= gamma { lo } else { hi })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_basin_is_always_found() {
        for n in [1u64, 2, 10, 100] {
            assert_eq!(prob_all_found(1, n).unwrap(), 1.0);
        }
    }

    #[test]
    fn two_basins_two_draws_is_exactly_half() {
        // 4 equally likely outcomes, 2 of them split 1-1
        assert_eq!(prob_all_found(2, 2).unwrap(), 0.5);
    }

    #[test]
    fn three_basins_small_cases_match_enumeration() {
        // N=3: 3!/(3^3) = 6/27
        let got = prob_all_found(3, 3).unwrap();
        assert!((got - 6.0 / 27.0).abs() < 1e-12);
        // N=4: surjections(4 -> 3) = 36; 36/81
        let got = prob_all_found(3, 4).unwrap();
        assert!((got - 36.0 / 81.0).abs() < 1e-12);
    }

    #[test]
    fn monotone_in_sample_count() {
        for l in [2u64, 3, 5, 10, 17] {
            let mut previous = 0.0;
            for n in 1..200 {
                let p = prob_all_found(l, n).unwrap();
                assert!(
                    p >= previous - 1e-12,
                    "l={l}: p({n}) = {p} < p({}) = {previous}",
                    n - 1
                );
                previous = p;
            }
        }
    }

    #[test]
    fn exact_search_agrees_with_plugged_back_probability() {
        for (l, gamma) in [(3u64, 0.9), (5, 0.9), (10, 0.99)] {
            let n = n_star_exact(l, gamma).unwrap();
            assert!(prob_all_found(l, n).unwrap() >= gamma);
            assert!(prob_all_found(l, n - 1).unwrap() < gamma);
        }
    }

    #[test]
    fn asymptotic_tracks_exact_within_fifteen_percent() {
        let (l, gamma) = (5u64, 0.9);
        let asymptotic = n_star_asymptotic(l, gamma).unwrap();
        let exact = n_star_exact(l, gamma).unwrap() as f64;
        let rel = (asymptotic - exact).abs() / exact;
        assert!(rel <= 0.15, "asymptotic {asymptotic} vs exact {exact}");
    }

    #[test]
    fn gamma_near_one_diverges_monotonically() {
        let a = n_star_asymptotic(4, 0.9).unwrap();
        let b = n_star_asymptotic(4, 0.99).unwrap();
        let c = n_star_asymptotic(4, 0.999999).unwrap();
        assert!(a < b && b < c);
        assert!(c > 50.0);
    }

    #[test]
    fn domain_errors() {
        assert_eq!(prob_all_found(0, 5), Err(TheoryError::BasinCountZero));
        assert_eq!(prob_all_found(61, 5), Err(TheoryError::BasinCountTooLarge(61)));
        assert_eq!(prob_all_found(3, 0), Err(TheoryError::SampleCountZero));
        assert_eq!(n_star_asymptotic(1, 0.9), Err(TheoryError::BasinCountTooSmall));
        assert_eq!(n_star_asymptotic(3, 1.0), Err(TheoryError::GammaOutOfRange));
    }

    #[test]
    fn plug_back_into_asymptotic_form() {
        // at the exact N for gamma = 0.99, exp(-l exp(-N/l)) clears
        // the confidence level too
        let (l, gamma) = (10u64, 0.99);
        let n = n_star_exact(l, gamma).unwrap() as f64;
        let lf = l as f64;
        let asymptotic_prob = (-lf * (-n / lf).exp()).exp();
        assert!(asymptotic_prob >= gamma - 0.005);
    }
}
