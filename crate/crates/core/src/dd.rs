//! Double-double arithmetic (about 31 significant decimal digits).
//!
//! Only what the extended-precision Mittag-Leffler route needs: the four
//! operations, `exp`, `ln` and the Gamma function on positive arguments.

use std::ops::{Add, Div, Mul, Neg, Sub};

/// Unevaluated sum `hi + lo` with `|lo| <= ulp(hi) / 2`.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Default)]
pub struct Dd {
    pub hi: f64,
    pub lo: f64,
}

#[inline]
fn two_sum(a: f64, b: f64) -> (f64, f64) {
    let s = a + b;
    let bb = s - a;
    let err = (a - (s - bb)) + (b - bb);
    (s, err)
}

#[inline]
fn quick_two_sum(a: f64, b: f64) -> (f64, f64) {
    let s = a + b;
    (s, b - (s - a))
}

#[inline]
fn two_prod(a: f64, b: f64) -> (f64, f64) {
    let p = a * b;
    (p, a.mul_add(b, -p))
}

pub const LN2: Dd = Dd {
    hi: std::f64::consts::LN_2,
    lo: 2.319_046_813_846_299_6e-17,
};
pub const PI: Dd = Dd {
    hi: std::f64::consts::PI,
    lo: 1.224_646_799_147_353_2e-16,
};
pub const TWO_PI: Dd = Dd {
    hi: 2.0 * std::f64::consts::PI,
    lo: 2.449_293_598_294_706_4e-16,
};

// B_{2k} / (2k (2k - 1)) as exact rationals, k = 1..12.
const STIRLING: [(f64, f64); 12] = [
    (1.0, 12.0),
    (-1.0, 360.0),
    (1.0, 1260.0),
    (-1.0, 1680.0),
    (1.0, 1188.0),
    (-691.0, 360_360.0),
    (1.0, 156.0),
    (-3617.0, 122_400.0),
    (43_867.0, 244_188.0),
    (-174_611.0, 125_400.0),
    (77_683.0, 5_796.0),
    (-236_364_091.0, 1_506_960.0),
];

impl Dd {
    pub const ZERO: Dd = Dd { hi: 0.0, lo: 0.0 };
    pub const ONE: Dd = Dd { hi: 1.0, lo: 0.0 };

    #[inline]
    pub const fn new(hi: f64, lo: f64) -> Self {
        Dd { hi, lo }
    }

    #[inline]
    pub fn to_f64(self) -> f64 {
        self.hi + self.lo
    }

    pub fn is_finite(self) -> bool {
        self.hi.is_finite()
    }

    pub fn abs(self) -> Self {
        if self.hi < 0.0 {
            -self
        } else {
            self
        }
    }

    pub fn mul_f64(self, b: f64) -> Self {
        let (p, e) = two_prod(self.hi, b);
        let e = e + self.lo * b;
        let (hi, lo) = quick_two_sum(p, e);
        Dd { hi, lo }
    }

    pub fn div_f64(self, b: f64) -> Self {
        self / Dd::from(b)
    }

    pub fn ldexp(self, k: i32) -> Self {
        let s = 2f64.powi(k);
        Dd {
            hi: self.hi * s,
            lo: self.lo * s,
        }
    }

    pub fn powi(self, n: u32) -> Self {
        let mut acc = Dd::ONE;
        let mut base = self;
        let mut e = n;
        while e > 0 {
            if e & 1 == 1 {
                acc = acc * base;
            }
            base = base * base;
            e >>= 1;
        }
        acc
    }

    pub fn exp(self) -> Self {
        if self.hi > 709.0 {
            return Dd::new(f64::INFINITY, 0.0);
        }
        if self.hi < -745.0 {
            return Dd::ZERO;
        }
        let k = (self.hi / LN2.hi).round();
        let r = self - LN2.mul_f64(k);
        // r / 2^10, Taylor, then square ten times
        let r = r.ldexp(-10);
        let mut term = r;
        let mut sum = r;
        for i in 2..=14 {
            term = (term * r).div_f64(i as f64);
            sum = sum + term;
            if term.hi.abs() < 1e-34 {
                break;
            }
        }
        // sum = e^r - 1; (1 + s)^2 - 1 = 2s + s^2 keeps precision
        for _ in 0..10 {
            sum = sum.mul_f64(2.0) + sum * sum;
        }
        (sum + Dd::ONE).ldexp(k as i32)
    }

    /// Natural logarithm by Newton's iteration on `exp`.
    pub fn ln(self) -> Self {
        assert!(self.hi > 0.0, "ln of non-positive double-double");
        let mut y = Dd::from(self.hi.ln());
        for _ in 0..2 {
            y = y + self * (-y).exp() - Dd::ONE;
        }
        y
    }

    /// ln Γ(x) for x > 0 via upward shift and Stirling's series.
    pub fn ln_gamma(x: Dd) -> Self {
        assert!(x.hi > 0.0, "ln_gamma requires a positive argument");
        let mut z = x;
        let mut prod = Dd::ONE;
        while z.hi < 40.0 {
            prod = prod * z;
            z = z + Dd::ONE;
        }
        let half_ln_two_pi = TWO_PI.ln().mul_f64(0.5);
        let mut s = (z - Dd::from(0.5)) * z.ln() - z + half_ln_two_pi;
        let zinv = Dd::ONE / z;
        let zinv2 = zinv * zinv;
        let mut zpow = zinv;
        for &(num, den) in STIRLING.iter() {
            s = s + (Dd::from(num) / Dd::from(den)) * zpow;
            zpow = zpow * zinv2;
        }
        s - prod.ln()
    }

    pub fn gamma(x: Dd) -> Self {
        let mut z = x;
        let mut prod = Dd::ONE;
        while z.hi < 40.0 {
            prod = prod * z;
            z = z + Dd::ONE;
        }
        Dd::ln_gamma(z).exp() / prod
    }
}

impl From<f64> for Dd {
    fn from(x: f64) -> Self {
        Dd { hi: x, lo: 0.0 }
    }
}

impl Neg for Dd {
    type Output = Dd;
    fn neg(self) -> Dd {
        Dd {
            hi: -self.hi,
            lo: -self.lo,
        }
    }
}

impl Add for Dd {
    type Output = Dd;
    fn add(self, b: Dd) -> Dd {
        let (s, e) = two_sum(self.hi, b.hi);
        let (t, f) = two_sum(self.lo, b.lo);
        let (s, e) = quick_two_sum(s, e + t);
        let (hi, lo) = quick_two_sum(s, e + f);
        Dd { hi, lo }
    }
}

impl Sub for Dd {
    type Output = Dd;
    fn sub(self, b: Dd) -> Dd {
        self + (-b)
    }
}

impl Mul for Dd {
    type Output = Dd;
    fn mul(self, b: Dd) -> Dd {
        let (p, e) = two_prod(self.hi, b.hi);
        let e = e + (self.hi * b.lo + self.lo * b.hi);
        let (hi, lo) = quick_two_sum(p, e);
        Dd { hi, lo }
    }
}

impl Div for Dd {
    type Output = Dd;
    fn div(self, b: Dd) -> Dd {
        let q1 = self.hi / b.hi;
        let r = self - b.mul_f64(q1);
        let q2 = r.hi / b.hi;
        let r = r - b.mul_f64(q2);
        let q3 = r.hi / b.hi;
        let (hi, lo) = quick_two_sum(q1, q2);
        Dd { hi, lo } + Dd::from(q3)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rel(a: Dd, b: Dd) -> f64 {
        ((a - b).to_f64() / b.to_f64()).abs()
    }

    #[test]
    fn exp_one_matches_e() {
        let e = Dd::new(std::f64::consts::E, 1.445_646_891_729_250_2e-16);
        assert!(rel(Dd::ONE.exp(), e) < 1e-30);
    }

    #[test]
    fn ln_inverts_exp() {
        for &x in &[0.3, 1.0, 7.5, 42.0, -12.25] {
            let y = Dd::from(x).exp().ln();
            assert!((y - Dd::from(x)).to_f64().abs() < 1e-30 * x.abs().max(1.0));
        }
    }

    #[test]
    fn gamma_half_squared_is_pi() {
        let g = Dd::gamma(Dd::from(0.5));
        assert!(rel(g * g, PI) < 1e-29);
    }

    #[test]
    fn gamma_reflection_thirds() {
        // Γ(1/3) Γ(2/3) = 2π / √3
        let third = Dd::ONE / Dd::from(3.0);
        let g = Dd::gamma(third) * Dd::gamma(Dd::ONE - third);
        let sqrt3 = {
            let s = Dd::from(3f64.sqrt());
            // one Newton step in double-double
            (s + Dd::from(3.0) / s).mul_f64(0.5)
        };
        assert!(rel(g, TWO_PI / sqrt3) < 1e-29);
    }

    #[test]
    fn gamma_recurrence() {
        let x = Dd::from(0.37);
        let lhs = Dd::gamma(x + Dd::ONE);
        let rhs = x * Dd::gamma(x);
        assert!(rel(lhs, rhs) < 1e-29);
    }
}
