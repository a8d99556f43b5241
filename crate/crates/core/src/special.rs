//! Special functions: log-gamma, digamma, complementary error function.

use crate::scalar::Real;

const STIRLING_SHIFT: f64 = 15.0;
const DIGAMMA_SHIFT: f64 = 10.0;

/// Natural log of the gamma function for `x > 0` (reflection below 1/2).
///
/// Shifts the argument above 15 and applies the Stirling series through the
/// `z^-13` term, which is below double-precision round-off there.
pub fn ln_gamma<T: Real>(x: T) -> T {
    if x.is_nan() {
        return x;
    }
    if x == T::one() || x == T::two() {
        return T::zero();
    }
    if x < T::half() {
        // Γ(x)Γ(1-x) = π / sin(πx)
        let s = (T::PI() * x).sin().abs();
        return T::PI().ln() - s.ln() - ln_gamma(T::one() - x);
    }
    let mut z = x;
    let mut log_prod = T::zero();
    let mut prod = T::one();
    let shift = T::c(STIRLING_SHIFT);
    while z < shift {
        prod = prod * z;
        // keep the running product well inside the exponent range
        if prod > T::c(1e200).min(T::max_value().sqrt()) {
            log_prod = log_prod + prod.ln();
            prod = T::one();
        }
        z = z + T::one();
    }
    log_prod = log_prod + prod.ln();
    stirling(z) - log_prod
}

fn stirling<T: Real>(z: T) -> T {
    let inv = z.recip();
    let inv2 = inv * inv;
    // Bernoulli-number tail of the Stirling series, Horner in 1/z^2
    let series = inv
        * (T::c(1.0 / 12.0)
            + inv2
                * (T::c(-1.0 / 360.0)
                    + inv2
                        * (T::c(1.0 / 1260.0)
                            + inv2
                                * (T::c(-1.0 / 1680.0)
                                    + inv2
                                        * (T::c(1.0 / 1188.0)
                                            + inv2 * (T::c(-691.0 / 360360.0) + inv2 * T::c(1.0 / 156.0)))))));
    (z - T::half()) * z.ln() - z + T::half() * (T::two() * T::PI()).ln() + series
}

/// Digamma function ψ(x) = d/dx ln Γ(x) for `x > 0`.
pub fn digamma<T: Real>(x: T) -> T {
    if x.is_nan() || x <= T::zero() {
        if x == x.floor() {
            return T::nan();
        }
        // ψ(1-x) - ψ(x) = π cot(πx)
        return digamma(T::one() - x) - T::PI() / (T::PI() * x).tan();
    }
    let mut z = x;
    let mut acc = T::zero();
    let shift = T::c(DIGAMMA_SHIFT);
    while z < shift {
        acc = acc - z.recip();
        z = z + T::one();
    }
    let inv2 = (z * z).recip();
    let tail = inv2
        * (T::c(1.0 / 12.0)
            - inv2
                * (T::c(1.0 / 120.0)
                    - inv2
                        * (T::c(1.0 / 252.0)
                            - inv2 * (T::c(1.0 / 240.0) - inv2 * (T::c(1.0 / 132.0) - inv2 * T::c(691.0 / 32760.0))))));
    acc + z.ln() - T::half() / z - tail
}

/// Complementary error function.
pub fn erfc<T: Real>(x: T) -> T {
    if x.is_nan() {
        return x;
    }
    if x < T::zero() {
        return T::two() - erfc(-x);
    }
    if x < T::c(3.0) {
        T::one() - erf_series(x)
    } else {
        erfc_continued_fraction(x)
    }
}

pub fn erf<T: Real>(x: T) -> T {
    if x.abs() < T::c(3.0) {
        if x < T::zero() {
            -erf_series(-x)
        } else {
            erf_series(x)
        }
    } else {
        T::one() - erfc(x)
    }
}

// erf(x) = 2/sqrt(pi) e^{-x^2} sum_n (2x^2)^n x / (1*3*...*(2n+1)); all terms positive.
fn erf_series<T: Real>(x: T) -> T {
    let x2 = x * x;
    let mut term = x;
    let mut sum = x;
    let mut n = 0usize;
    loop {
        n += 1;
        term = term * T::two() * x2 / T::of_usize(2 * n + 1);
        sum = sum + term;
        if term < sum * T::epsilon() * T::c(0.25) || n > 200 {
            break;
        }
    }
    T::two() / T::PI().sqrt() * (-x2).exp() * sum
}

// erfc(x) = e^{-x^2}/sqrt(pi) * 1/(x + (1/2)/(x + 1/(x + (3/2)/(x + ...)))), evaluated backwards.
fn erfc_continued_fraction<T: Real>(x: T) -> T {
    let mut frac = x;
    for n in (1..=80).rev() {
        frac = x + T::c(n as f64 * 0.5) / frac;
    }
    (-x * x).exp() / T::PI().sqrt() / frac
}

/// Standard normal CDF.
pub fn normal_cdf<T: Real>(z: T) -> T {
    T::half() * erfc(-z / T::SQRT_2())
}

/// Standard normal survival function `1 - Φ(z)`, accurate in the upper tail.
pub fn normal_sf<T: Real>(z: T) -> T {
    T::half() * erfc(z / T::SQRT_2())
}

pub fn normal_pdf<T: Real>(z: T) -> T {
    (-(z * z) * T::half()).exp() / (T::two() * T::PI()).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ln_gamma_matches_factorials() {
        let mut fact = 1.0f64;
        for n in 1..40usize {
            // Γ(n+1) = n!
            fact *= n as f64;
            let got = ln_gamma((n + 1) as f64);
            assert!((got - fact.ln()).abs() <= 1e-13 * fact.ln().max(1.0), "n={n}");
        }
        assert!(ln_gamma(1.0f64).abs() < 1e-15);
        assert!(ln_gamma(2.0f64).abs() < 1e-15);
    }

    #[test]
    fn ln_gamma_half_integer() {
        // Γ(1/2) = sqrt(pi), Γ(3/2) = sqrt(pi)/2
        let lp = std::f64::consts::PI.ln() * 0.5;
        assert!((ln_gamma(0.5f64) - lp).abs() < 1e-14);
        assert!((ln_gamma(1.5f64) - (lp - 2f64.ln())).abs() < 1e-14);
    }

    #[test]
    fn digamma_recurrence_values() {
        let euler = 0.577_215_664_901_532_9f64;
        assert!((digamma(1.0f64) + euler).abs() < 1e-14);
        assert!((digamma(2.0f64) - (1.0 - euler)).abs() < 1e-14);
        assert!((digamma(4.0f64) - digamma(2.0f64) - 5.0 / 6.0).abs() < 1e-14);
        assert!((digamma(0.5f64) - (-euler - 2.0 * 2f64.ln())).abs() < 1e-14);
    }

    #[test]
    fn erfc_tails_and_symmetry() {
        assert!((erfc(0.0f64) - 1.0).abs() < 1e-16);
        assert!((erfc(-1.0f64) + erfc(1.0f64) - 2.0).abs() < 1e-15);
        // erfc(1) reference value
        assert!((erfc(1.0f64) - 0.157_299_207_050_285_13).abs() < 1e-15);
        let e5 = 1.537_459_794_428_034_8e-12f64;
        assert!(((erfc(5.0f64) - e5) / e5).abs() < 1e-12);
    }

    #[test]
    fn generic_over_f32() {
        assert!((digamma(4.0f32) - digamma(2.0f32) - 5.0 / 6.0).abs() < 1e-5);
        assert!((ln_gamma(5.0f32) - 24f32.ln()).abs() < 1e-5);
    }
}
