//! Double-double arithmetic for the large terms of the discrete energy.
//!
//! At late times `theta(t) f` reaches 1e11 and more while the energy equation is solved to
//! an absolute 1e-4, a few ulps of a plain `f64`. Carrying `theta` and the energies as an
//! unevaluated sum `hi + lo` keeps the residual meaningful there.

use crate::bregman::BregmanParams;

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub(crate) struct Dd {
    pub hi: f64,
    pub lo: f64,
}

fn two_sum(a: f64, b: f64) -> (f64, f64) {
    let s = a + b;
    let bb = s - a;
    (s, (a - (s - bb)) + (b - bb))
}

fn quick_two_sum(a: f64, b: f64) -> Dd {
    let s = a + b;
    Dd {
        hi: s,
        lo: b - (s - a),
    }
}

fn two_prod(a: f64, b: f64) -> (f64, f64) {
    let p = a * b;
    (p, a.mul_add(b, -p))
}

impl Dd {
    pub fn new(hi: f64, lo: f64) -> Dd {
        quick_two_sum(hi, lo)
    }

    pub fn from_f64(x: f64) -> Dd {
        Dd { hi: x, lo: 0.0 }
    }

    pub fn add(self, o: Dd) -> Dd {
        let (s, e) = two_sum(self.hi, o.hi);
        let (t, f) = two_sum(self.lo, o.lo);
        let r = quick_two_sum(s, e + t);
        quick_two_sum(r.hi, r.lo + f)
    }

    pub fn neg(self) -> Dd {
        Dd {
            hi: -self.hi,
            lo: -self.lo,
        }
    }

    pub fn sub(self, o: Dd) -> Dd {
        self.add(o.neg())
    }

    pub fn mul_f64(self, b: f64) -> Dd {
        let (p, e) = two_prod(self.hi, b);
        quick_two_sum(p, e + self.lo * b)
    }

    pub fn mul(self, o: Dd) -> Dd {
        let (p, e) = two_prod(self.hi, o.hi);
        quick_two_sum(p, e + (self.hi * o.lo + self.lo * o.hi))
    }

    pub fn powi(self, mut n: u32) -> Dd {
        let mut base = self;
        let mut acc = Dd::from_f64(1.0);
        while n > 0 {
            if n & 1 == 1 {
                acc = acc.mul(base);
            }
            base = base.mul(base);
            n >>= 1;
        }
        acc
    }

    pub fn to_f64(self) -> f64 {
        self.hi + self.lo
    }
}

fn small_integer(e: f64) -> Option<u32> {
    ((0.0..=4096.0).contains(&e) && e.fract() == 0.0).then_some(e as u32)
}

/// `theta(t) = C p t^((lambda + 1) p - 1)`, to double-double accuracy when the exponent is a
/// small nonnegative integer and to `f64` accuracy (`plain`) otherwise.
pub(crate) fn theta(params: &BregmanParams, t: f64, plain: f64) -> Dd {
    match small_integer((params.lambda + 1.0) * params.p - 1.0) {
        Some(e) => Dd::from_f64(t).powi(e).mul_f64(params.c).mul_f64(params.p),
        None => Dd::from_f64(plain),
    }
}

/// `theta'(t)`, under the same rule as [`theta`].
pub(crate) fn theta_prime(params: &BregmanParams, t: f64, plain: f64) -> Dd {
    let e = (params.lambda + 1.0) * params.p - 1.0;
    match small_integer(e - 1.0) {
        Some(e1) => Dd::from_f64(t)
            .powi(e1)
            .mul_f64(params.c)
            .mul_f64(params.p)
            .mul_f64(e),
        None => Dd::from_f64(plain),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lie::GroupKind;

    #[test]
    fn sums_keep_the_low_part() {
        let a = Dd::from_f64(1e16).add(Dd::from_f64(1.0));
        assert_eq!(a.hi, 1e16);
        assert_eq!(a.lo, 1.0);
        assert_eq!(a.sub(Dd::from_f64(1e16)).to_f64(), 1.0);
    }

    #[test]
    fn powers_are_exact_for_short_mantissas() {
        // 1.5^15 has a 16-bit odd part times a power of two: exactly representable
        let x = Dd::from_f64(1.5).powi(15);
        assert_eq!(x.hi, 1.5f64.powi(15));
        assert_eq!(x.lo, 0.0);
        // (1 + 2^-30)^3 needs 91 bits: hi + lo carries 106
        let y = Dd::from_f64(1.0 + 2f64.powi(-30)).powi(3);
        let exact_tail = 3.0 * 2f64.powi(-60) + 2f64.powi(-90);
        assert_eq!(
            y.sub(Dd::from_f64(1.0 + 3.0 * 2f64.powi(-30))).to_f64(),
            exact_tail
        );
    }

    #[test]
    fn theta_matches_plain_evaluation() {
        let params = BregmanParams::standard(8.0, 1.0, GroupKind::So3).unwrap();
        let t = 4.999_999_7;
        let plain = params.theta(t).unwrap();
        let d = theta(&params, t, plain);
        assert!((d.to_f64() - plain).abs() <= 4.0 * f64::EPSILON * plain);
        let plain = params.theta_prime(t).unwrap();
        let d = theta_prime(&params, t, plain);
        assert!((d.to_f64() - plain).abs() <= 4.0 * f64::EPSILON * plain);
        let params = BregmanParams::standard(2.25, 1.0, GroupKind::So3).unwrap();
        assert_eq!(theta(&params, t, 7.0), Dd::from_f64(7.0));
    }
}
