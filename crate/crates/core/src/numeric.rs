//! Exact big-integer helpers and carefully rounded float assembly.
//!
//! Coefficients in the voting math overflow 64-bit integers quickly, so all
//! combinatorial quantities are computed in `BigUint` and only converted to
//! `f64` at the final probability assembly, via a correctly rounded
//! rational-to-double conversion.

use num_bigint::BigUint;
use num_traits::{One, Zero};

/// Binomial coefficient C(n, k), exact.
pub fn binomial(n: u64, k: u64) -> BigUint {
    if k > n {
        return BigUint::zero();
    }
    let k = k.min(n - k);
    let mut acc = BigUint::one();
    for i in 0..k {
        acc = acc * (n - i) / (i + 1);
    }
    acc
}

/// Converts the exact ratio `numer / denom` to the nearest `f64`,
/// round-half-to-even. `denom` must be nonzero.
///
/// Both operands may be arbitrarily large; only the final double rounds.
pub fn ratio_to_f64(numer: &BigUint, denom: &BigUint) -> f64 {
    assert!(!denom.is_zero(), "ratio_to_f64: zero denominator");
    if numer.is_zero() {
        return 0.0;
    }
    let diff = numer.bits() as i64 - denom.bits() as i64;
    // Scale so the integer quotient carries 53 significand bits plus a
    // round bit and room for the leading-bit uncertainty.
    let shift = 55 - diff;
    let (scaled_n, scaled_d) = if shift >= 0 {
        (numer << shift as u64, denom.clone())
    } else {
        (numer.clone(), denom << (-shift) as u64)
    };
    let q = &scaled_n / &scaled_d;
    let r = scaled_n - &q * &scaled_d;

    let qbits = q.bits() as i64; // 55 or 56
    let drop = (qbits - 53).max(0) as u64; // low bits to round away
    let mut mantissa: u64 = {
        let m = &q >> drop;
        m.iter_u64_digits().next().unwrap_or(0)
    };
    let mut exp = drop as i64 - shift;

    if drop > 0 {
        let round_bit = ((&q >> (drop - 1)) & BigUint::one()) == BigUint::one();
        let low_mask = (BigUint::one() << (drop - 1)) - BigUint::one();
        let sticky = !(&q & low_mask).is_zero() || !r.is_zero();
        if round_bit && (sticky || mantissa & 1 == 1) {
            mantissa += 1;
            if mantissa == 1 << 53 {
                mantissa >>= 1;
                exp += 1;
            }
        }
    }

    // Assemble mantissa * 2^exp without intermediate rounding. Values far
    // outside the normal range do not occur in this crate's domain.
    if exp >= -1022 {
        if exp > 1023 {
            return f64::INFINITY;
        }
        (mantissa as f64) * f64_exp2(exp)
    } else {
        // two-step scaling through the subnormal range
        let first = (-1022 - exp).min(1074);
        ((mantissa as f64) * f64_exp2(-first)) * f64_exp2(exp + first)
    }
}

fn f64_exp2(e: i64) -> f64 {
    // exact for the exponent range used here
    if (-1074..=1023).contains(&e) {
        f64::from_bits(if e >= -1022 {
            ((e + 1023) as u64) << 52
        } else {
            1u64 << (e + 1074)
        })
    } else if e > 1023 {
        f64::INFINITY
    } else {
        0.0
    }
}

/// Compensated (Kahan) accumulator for long sums of small positive terms.
#[derive(Debug, Clone, Copy, Default)]
pub struct KahanSum {
    sum: f64,
    carry: f64,
}

impl KahanSum {
    pub fn add(&mut self, x: f64) {
        let y = x - self.carry;
        let t = self.sum + y;
        self.carry = (t - self.sum) - y;
        self.sum = t;
    }

    pub fn value(&self) -> f64 {
        self.sum
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn binomial_values() {
        assert_eq!(binomial(0, 0), BigUint::from(1u32));
        assert_eq!(binomial(5, 2), BigUint::from(10u32));
        assert_eq!(binomial(12, 5), BigUint::from(792u32));
        assert_eq!(binomial(3, 7), BigUint::zero());
        // 64 choose 32, beyond u64
        assert_eq!(
            binomial(64, 32).to_string(),
            "1832624140942590534"
        );
    }

    #[test]
    fn ratio_known_values() {
        let r = |n: u64, d: u64| ratio_to_f64(&BigUint::from(n), &BigUint::from(d));
        assert_eq!(r(0, 3), 0.0);
        assert_eq!(r(1, 3), 1.0 / 3.0);
        assert_eq!(r(2, 3), 2.0 / 3.0);
        assert_eq!(r(1, 10), 0.1);
        assert_eq!(r(7, 7), 1.0);
        assert_eq!(r(1, 1 << 60), 2f64.powi(-60));
    }

    #[test]
    fn ratio_half_even_ties() {
        // (2^53 + 1) / 2 lies exactly between representable doubles
        let n = (BigUint::from(1u64) << 53) + BigUint::one();
        assert_eq!(ratio_to_f64(&n, &BigUint::from(2u32)), 2f64.powi(52));
        let n3 = (BigUint::from(1u64) << 53) + BigUint::from(3u32);
        assert_eq!(
            ratio_to_f64(&n3, &BigUint::from(2u32)),
            2f64.powi(52) + 2.0
        );
    }

    #[test]
    fn ratio_huge_operands() {
        // (2^200 + 2^147) / 2^200 == 1 + 2^-53 -> ties to 1.0
        let n = (BigUint::one() << 200) + (BigUint::one() << 147u32);
        let d = BigUint::one() << 200u32;
        assert_eq!(ratio_to_f64(&n, &d), 1.0);
        // one extra low bit breaks the tie upward
        let n = n + BigUint::one();
        assert_eq!(ratio_to_f64(&n, &d), 1.0 + f64::EPSILON);
    }

    #[test]
    fn kahan_compensates() {
        let mut k = KahanSum::default();
        for _ in 0..10_000_000 {
            k.add(0.1);
        }
        assert!((k.value() - 1_000_000.0).abs() < 1e-9);
    }

    proptest! {
        #[test]
        fn ratio_matches_hardware_division(n in 1u64..(1 << 53), d in 1u64..(1 << 53)) {
            // f64 division of exactly representable operands is correctly
            // rounded, so it is an independent oracle here.
            let got = ratio_to_f64(&BigUint::from(n), &BigUint::from(d));
            prop_assert_eq!(got, n as f64 / d as f64);
        }
    }
}
