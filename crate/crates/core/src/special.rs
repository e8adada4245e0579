//! Mittag-Leffler functions and the classical special functions they lean on.
//!
//! With `x = u^m`,
//!
//! ```text
//! E_m(u) = Σ_ν u^ν / Γ(ν/m + 1)
//! F_m(u) = m Σ_ν u^ν / Γ((ν + 1)/m) = E_m'(u)
//! f_m(u) = F_m(u) − m² u^{m−1} e^{x}
//! ```
//!
//! `f_m` is bounded on the positive axis while both terms of its defining
//! difference grow like `e^x`, so the subtraction loses about `x / ln 10`
//! digits. [`f_remainder`] budgets that loss explicitly and escalates to
//! double-double arithmetic; [`f_remainder_complement`] evaluates the same
//! function through the upper incomplete Gamma function without any
//! cancellation and is used for large `x`.

use std::f64::consts::{LN_10, PI};
use std::sync::OnceLock;

use serde::{Deserialize, Serialize};

use crate::dd::Dd;
use crate::error::{Error, Result};
use crate::quadrature::EvalSettings;

/// Order parameter `m ≥ 1` of `E_m` and `F_m`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "u32", into = "u32")]
pub struct MLIndex(u32);

impl MLIndex {
    pub fn new(m: u32) -> Result<Self> {
        if m == 0 {
            return Err(Error::InvalidArgument(
                "Mittag-Leffler index must be at least 1".into(),
            ));
        }
        Ok(MLIndex(m))
    }

    #[inline]
    pub fn get(self) -> u32 {
        self.0
    }
}

impl TryFrom<u32> for MLIndex {
    type Error = Error;
    fn try_from(m: u32) -> Result<Self> {
        MLIndex::new(m)
    }
}

impl From<MLIndex> for u32 {
    fn from(m: MLIndex) -> u32 {
        m.0
    }
}

/// Working precision of the series evaluations.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PrecisionMode {
    /// IEEE double, at least 15 significant digits.
    #[default]
    Standard,
    /// Double-double, at least 30 significant digits.
    Extended,
}

/// Largest `u^m` accepted before `e^{u^m}` leaves the double exponent range.
pub const MAX_EXPONENT: f64 = 700.0;

/// Digit loss above which `f_remainder` switches to double-double.
pub const ESCALATION_DIGITS: f64 = 4.0;

/// Largest `u^m` accepted by the double-double subtraction.
pub const EXTENDED_BUDGET: f64 = 50.0;

/// Significant digits carried by the extended route.
pub const EXTENDED_DIGITS: f64 = 30.0;

/// Fewest significant digits a returned remainder may have.
pub const MIN_DIGITS: f64 = 6.0;

/// Above this `u^m` the integrand helpers switch to the incomplete-Gamma route.
const COMPLEMENT_THRESHOLD: f64 = ESCALATION_DIGITS * LN_10;

const SQRT_PI: f64 = 1.772_453_850_905_516;

// ---------------------------------------------------------------------------
// Gamma and error functions
// ---------------------------------------------------------------------------

const LANCZOS_G: f64 = 7.0;
const LANCZOS: [f64; 9] = [
    0.999_999_999_999_809_9,
    676.520_368_121_885_1,
    -1_259.139_216_722_402_8,
    771.323_428_777_653_1,
    -176.615_029_162_140_6,
    12.507_343_278_686_905,
    -0.138_571_095_265_720_12,
    9.984_369_578_019_572e-6,
    1.505_632_735_149_311_6e-7,
];

// B_{2k} / (2k (2k − 1)), k = 1..8
const STIRLING: [f64; 8] = [
    1.0 / 12.0,
    -1.0 / 360.0,
    1.0 / 1260.0,
    -1.0 / 1680.0,
    1.0 / 1188.0,
    -691.0 / 360_360.0,
    1.0 / 156.0,
    -3617.0 / 122_400.0,
];

fn gamma_lanczos(x: f64) -> f64 {
    let x = x - 1.0;
    let mut a = LANCZOS[0];
    for (i, &c) in LANCZOS.iter().enumerate().skip(1) {
        a += c / (x + i as f64);
    }
    let t = x + LANCZOS_G + 0.5;
    (2.0 * PI).sqrt() * t.powf(x + 0.5) * (-t).exp() * a
}

fn ln_gamma_stirling(z: f64) -> f64 {
    let zinv = 1.0 / z;
    let zinv2 = zinv * zinv;
    let mut series = 0.0;
    let mut p = zinv;
    for &c in STIRLING.iter() {
        series += c * p;
        p *= zinv2;
    }
    (z - 0.5) * z.ln() - z + 0.5 * (2.0 * PI).ln() + series
}

/// `ln Γ(x)` for `x > 0`.
pub fn log_gamma(x: f64) -> Result<f64> {
    if !(x > 0.0) || !x.is_finite() {
        return Err(Error::Domain {
            op: "log_gamma",
            detail: format!("argument must be positive and finite, got {x}"),
        });
    }
    Ok(ln_gamma_pos(x))
}

pub(crate) fn ln_gamma_pos(x: f64) -> f64 {
    if x == 1.0 || x == 2.0 {
        return 0.0;
    }
    if x < 0.5 {
        ln_gamma_pos(x + 1.0) - x.ln()
    } else if x <= 3.0 {
        gamma_lanczos(x).ln()
    } else if x >= 15.0 {
        ln_gamma_stirling(x)
    } else {
        let mut z = x;
        let mut prod = 1.0;
        while z < 15.0 {
            prod *= z;
            z += 1.0;
        }
        ln_gamma_stirling(z) - prod.ln()
    }
}

/// `Γ(x)` for `x > 0`.
pub fn gamma(x: f64) -> Result<f64> {
    if !(x > 0.0) || !x.is_finite() {
        return Err(Error::Domain {
            op: "gamma",
            detail: format!("argument must be positive and finite, got {x}"),
        });
    }
    Ok(gamma_pos(x))
}

pub(crate) fn gamma_pos(x: f64) -> f64 {
    if x.fract() == 0.0 && x <= 171.0 {
        return (2..x as u32).fold(1.0, |acc, k| acc * k as f64);
    }
    if x < 0.5 {
        gamma_lanczos(x + 1.0) / x
    } else if x <= 3.0 {
        gamma_lanczos(x)
    } else {
        ln_gamma_pos(x).exp()
    }
}

/// Error function.
pub fn erf(x: f64) -> f64 {
    if x.is_nan() {
        return f64::NAN;
    }
    if x < 0.0 {
        return -erf(-x);
    }
    if x < 2.0 {
        erf_series(x)
    } else {
        1.0 - erfc_cf(x)
    }
}

/// Complementary error function.
pub fn erfc(x: f64) -> f64 {
    if x.is_nan() {
        return f64::NAN;
    }
    if x < 2.0 {
        1.0 - erf(x)
    } else {
        erfc_cf(x)
    }
}

// erf(x) = 2/√π e^{−x²} Σ 2^n x^{2n+1} / (2n+1)!!, all terms positive
fn erf_series(x: f64) -> f64 {
    let x2 = x * x;
    let mut term = x;
    let mut sum = x;
    let mut n = 0.0;
    loop {
        n += 1.0;
        term *= 2.0 * x2 / (2.0 * n + 1.0);
        sum += term;
        if term <= 1e-17 * sum {
            break;
        }
    }
    2.0 / SQRT_PI * (-x2).exp() * sum
}

// erfc(x) = e^{−x²}/√π · 1/(x + (1/2)/(x + 1/(x + (3/2)/(x + …)))), modified Lentz
fn erfc_cf(x: f64) -> f64 {
    const TINY: f64 = 1e-300;
    let mut f = x;
    let mut c = x;
    let mut d = 0.0;
    for k in 1..500 {
        let a = k as f64 / 2.0;
        d = x + a * d;
        if d.abs() < TINY {
            d = TINY;
        }
        c = x + a / c;
        if c.abs() < TINY {
            c = TINY;
        }
        d = 1.0 / d;
        let delta = c * d;
        f *= delta;
        if (delta - 1.0).abs() < 1e-16 {
            break;
        }
    }
    (-x * x).exp() / SQRT_PI / f
}

/// Continued fraction `h` with `Γ(a, x) = e^{−x} x^a h(a, x)`, valid for `x ≥ a + 1`.
fn upper_gamma_cf(a: f64, x: f64) -> f64 {
    const TINY: f64 = 1e-300;
    let mut b = x + 1.0 - a;
    let mut c = 1.0 / TINY;
    let mut d = 1.0 / b;
    let mut h = d;
    for i in 1..1000 {
        let an = -(i as f64) * (i as f64 - a);
        b += 2.0;
        d = an * d + b;
        if d.abs() < TINY {
            d = TINY;
        }
        c = b + an / c;
        if c.abs() < TINY {
            c = TINY;
        }
        d = 1.0 / d;
        let delta = d * c;
        h *= delta;
        if (delta - 1.0).abs() < 1e-16 {
            break;
        }
    }
    h
}

/// Regularized lower incomplete Gamma `P(a, x)` by its power series (x < a + 1).
fn lower_gamma_series_regularized(a: f64, x: f64) -> f64 {
    let mut term = 1.0 / a;
    let mut sum = term;
    let mut ap = a;
    for _ in 0..2000 {
        ap += 1.0;
        term *= x / ap;
        sum += term;
        if term.abs() < sum.abs() * 1e-17 {
            break;
        }
    }
    (sum.ln() - x + a * x.ln() - ln_gamma_pos(a)).exp()
}

/// `ln Γ(a, x)` (upper incomplete Gamma) for `a > 0`, `x ≥ 0`.
pub fn ln_upper_gamma(a: f64, x: f64) -> f64 {
    if x <= 0.0 {
        return ln_gamma_pos(a);
    }
    if x < a + 1.0 {
        let p = lower_gamma_series_regularized(a, x);
        ln_gamma_pos(a) + (-p).ln_1p()
    } else {
        -x + a * x.ln() + upper_gamma_cf(a, x).ln()
    }
}

// ---------------------------------------------------------------------------
// Mittag-Leffler series
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum SeriesKind {
    E,
    F,
}

/// A truncated positive series together with its certified tail bound.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SeriesSum {
    pub value: f64,
    /// Upper bound of the omitted remainder.
    pub tail_bound: f64,
    /// Number of terms summed.
    pub terms: usize,
}

// Denominator arguments of the first m terms: Γ(b_ν), ν = 0..m−1.
fn base_arguments(m: u32, kind: SeriesKind) -> impl Iterator<Item = f64> {
    let mf = m as f64;
    (0..m).map(move |nu| match kind {
        SeriesKind::E => nu as f64 / mf + 1.0,
        SeriesKind::F => (nu as f64 + 1.0) / mf,
    })
}

// Terms t_ν = u^ν / Γ(b_ν) obey t_{ν+m} = t_ν · u^m / b_ν, and the ratio
// t_{ν+1}/t_ν is non-increasing in ν (log-convexity of Γ). Once it drops
// below 1/2, the remainder after t_ν is at most t_{ν+1} / (1 − ratio).
fn ml_series_f64(m: u32, u: f64, kind: SeriesKind, tol: f64) -> SeriesSum {
    let mi = m as usize;
    let x = u.powi(m as i32);
    let mut args: Vec<f64> = base_arguments(m, kind).collect();
    let mut chain: Vec<f64> = args
        .iter()
        .enumerate()
        .map(|(nu, &b)| u.powi(nu as i32) / gamma_pos(b))
        .collect();
    let mut sum = 0.0;
    let mut nu = 0usize;
    let mut current = chain[0];
    loop {
        sum += current;
        let slot = nu % mi;
        let next_slot = (nu + 1) % mi;
        // advance the chain of the term just consumed
        chain[slot] = current * x / args[slot];
        args[slot] += 1.0;
        let next = chain[next_slot];
        nu += 1;
        if next == 0.0 || current == 0.0 {
            return SeriesSum {
                value: sum,
                tail_bound: 0.0,
                terms: nu,
            };
        }
        let ratio = next / current;
        if ratio < 0.5 {
            let tail = next / (1.0 - ratio);
            if tail <= tol * sum {
                return SeriesSum {
                    value: sum,
                    tail_bound: tail,
                    terms: nu,
                };
            }
        }
        current = next;
    }
}

fn dd_gamma_fractions(m: u32, kind: SeriesKind) -> Vec<Dd> {
    static CACHE_F: OnceLock<Vec<Vec<Dd>>> = OnceLock::new();
    static CACHE_E: OnceLock<Vec<Vec<Dd>>> = OnceLock::new();
    const CACHED: u32 = 8;
    let build = |kind: SeriesKind| -> Vec<Vec<Dd>> {
        (1..=CACHED)
            .map(|m| compute_dd_gamma_fractions(m, kind))
            .collect()
    };
    if m <= CACHED {
        let table = match kind {
            SeriesKind::F => CACHE_F.get_or_init(|| build(SeriesKind::F)),
            SeriesKind::E => CACHE_E.get_or_init(|| build(SeriesKind::E)),
        };
        table[(m - 1) as usize].clone()
    } else {
        compute_dd_gamma_fractions(m, kind)
    }
}

fn compute_dd_gamma_fractions(m: u32, kind: SeriesKind) -> Vec<Dd> {
    let md = Dd::from(m as f64);
    (0..m)
        .map(|nu| {
            let b = match kind {
                SeriesKind::E => Dd::from(nu as f64) / md + Dd::ONE,
                SeriesKind::F => Dd::from(nu as f64 + 1.0) / md,
            };
            Dd::gamma(b)
        })
        .collect()
}

fn ml_series_dd(m: u32, u: f64, kind: SeriesKind, tol: f64) -> (Dd, SeriesSum) {
    let mi = m as usize;
    let ud = Dd::from(u);
    let x = ud.powi(m);
    let gammas = dd_gamma_fractions(m, kind);
    let mf = Dd::from(m as f64);
    let mut args: Vec<Dd> = (0..m)
        .map(|nu| match kind {
            SeriesKind::E => Dd::from(nu as f64) / mf + Dd::ONE,
            SeriesKind::F => Dd::from(nu as f64 + 1.0) / mf,
        })
        .collect();
    let mut chain: Vec<Dd> = gammas
        .iter()
        .enumerate()
        .map(|(nu, &g)| ud.powi(nu as u32) / g)
        .collect();
    let mut sum = Dd::ZERO;
    let mut nu = 0usize;
    let mut current = chain[0];
    loop {
        sum = sum + current;
        let slot = nu % mi;
        let next_slot = (nu + 1) % mi;
        chain[slot] = current * x / args[slot];
        args[slot] = args[slot] + Dd::ONE;
        let next = chain[next_slot];
        nu += 1;
        if next.hi == 0.0 || current.hi == 0.0 {
            let s = SeriesSum {
                value: sum.to_f64(),
                tail_bound: 0.0,
                terms: nu,
            };
            return (sum, s);
        }
        let ratio = next.hi / current.hi;
        if ratio < 0.5 {
            let tail = next.hi / (1.0 - ratio);
            if tail <= tol * sum.hi {
                let s = SeriesSum {
                    value: sum.to_f64(),
                    tail_bound: tail,
                    terms: nu,
                };
                return (sum, s);
            }
        }
        current = next;
    }
}

fn check_argument(op: &'static str, m: MLIndex, u: f64) -> Result<f64> {
    if !(u >= 0.0) || !u.is_finite() {
        return Err(Error::Domain {
            op,
            detail: format!("argument must be finite and non-negative, got {u}"),
        });
    }
    let x = u.powi(m.get() as i32);
    if x > MAX_EXPONENT {
        return Err(Error::Overflow { op, exponent: x });
    }
    Ok(x)
}

fn series_value(
    op: &'static str,
    m: MLIndex,
    u: f64,
    kind: SeriesKind,
    settings: &EvalSettings,
) -> Result<SeriesSum> {
    check_argument(op, m, u)?;
    let scale = match kind {
        SeriesKind::E => 1.0,
        SeriesKind::F => m.get() as f64,
    };
    let mut s = match settings.precision {
        PrecisionMode::Standard => ml_series_f64(m.get(), u, kind, settings.tol),
        PrecisionMode::Extended => ml_series_dd(m.get(), u, kind, settings.tol.min(1e-30)).1,
    };
    s.value *= scale;
    s.tail_bound *= scale;
    if !s.value.is_finite() {
        return Err(Error::Overflow {
            op,
            exponent: u.powi(m.get() as i32),
        });
    }
    Ok(s)
}

/// Mittag-Leffler's function `E_m(u) = Σ u^ν / Γ(ν/m + 1)` for `u ≥ 0`.
pub fn mittag_leffler_e(m: MLIndex, u: f64, settings: &EvalSettings) -> Result<f64> {
    series_value("mittag_leffler_E", m, u, SeriesKind::E, settings).map(|s| s.value)
}

/// `F_m(u) = m Σ u^ν / Γ((ν+1)/m)`, the derivative of `E_m`.
pub fn mittag_leffler_f(m: MLIndex, u: f64, settings: &EvalSettings) -> Result<f64> {
    series_value("mittag_leffler_F", m, u, SeriesKind::F, settings).map(|s| s.value)
}

/// Like [`mittag_leffler_e`] / [`mittag_leffler_f`] but returning the tail bound too.
pub fn mittag_leffler_series(
    m: MLIndex,
    u: f64,
    derivative: bool,
    settings: &EvalSettings,
) -> Result<SeriesSum> {
    let kind = if derivative {
        SeriesKind::F
    } else {
        SeriesKind::E
    };
    series_value("mittag_leffler_series", m, u, kind, settings)
}

/// How a value of `f_m` was obtained.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum RemainderRoute {
    /// `f_1 ≡ 0`.
    Exact,
    Standard,
    Extended,
    Complement,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RemainderValue {
    pub value: f64,
    pub route: RemainderRoute,
    /// Predicted cancellation, in decimal digits.
    pub digits_lost: f64,
}

/// Predicted decimal digits lost by the subtraction defining `f_m(u)`.
///
/// Compares the dominant term `m² u^{m−1} e^{u^m}` with the remainder,
/// which is of order `1 / (1 + u²)`.
pub fn predicted_digit_loss(m: MLIndex, u: f64) -> f64 {
    let mf = m.get() as f64;
    let x = u.powi(m.get() as i32);
    let ln_ratio = x + (mf * mf * u.powi(m.get() as i32 - 1) * (1.0 + u * u)).ln();
    (ln_ratio / LN_10).max(0.0)
}

/// `f_m(u) = F_m(u) − m² u^{m−1} e^{u^m}` for `u ≥ 0`, by subtraction.
///
/// Escalates to double-double when more than [`ESCALATION_DIGITS`] digits
/// would be lost and refuses with [`Error::PrecisionExhausted`] past
/// [`EXTENDED_BUDGET`].
pub fn f_remainder(m: MLIndex, u: f64, settings: &EvalSettings) -> Result<f64> {
    f_remainder_detailed(m, u, settings).map(|r| r.value)
}

pub fn f_remainder_detailed(m: MLIndex, u: f64, settings: &EvalSettings) -> Result<RemainderValue> {
    let x = check_argument("f_remainder", m, u)?;
    let mi = m.get();
    let digits_lost = predicted_digit_loss(m, u);
    if mi == 1 {
        return Ok(RemainderValue {
            value: 0.0,
            route: RemainderRoute::Exact,
            digits_lost,
        });
    }
    if x / LN_10 <= ESCALATION_DIGITS && settings.precision == PrecisionMode::Standard {
        return Ok(RemainderValue {
            value: remainder_f64(mi, u),
            route: RemainderRoute::Standard,
            digits_lost,
        });
    }
    if x > EXTENDED_BUDGET || digits_lost > EXTENDED_DIGITS - MIN_DIGITS {
        return Err(Error::PrecisionExhausted {
            op: "f_remainder",
            exponent: x,
            digits_lost,
        });
    }
    Ok(RemainderValue {
        value: remainder_dd(mi, u),
        route: RemainderRoute::Extended,
        digits_lost,
    })
}

fn remainder_f64(m: u32, u: f64) -> f64 {
    let x = u.powi(m as i32);
    let mf = m as f64;
    let big = ml_series_f64(m, u, SeriesKind::F, 1e-18).value * mf;
    big - mf * mf * u.powi(m as i32 - 1) * x.exp()
}

fn remainder_dd(m: u32, u: f64) -> f64 {
    let ud = Dd::from(u);
    let mf = m as f64;
    let (sum, _) = ml_series_dd(m, u, SeriesKind::F, 1e-33);
    let big = sum.mul_f64(mf);
    let lead = ud.powi(m - 1).mul_f64(mf * mf) * ud.powi(m).exp();
    (big - lead).to_f64()
}

/// `f_m(u)` through the incomplete Gamma function, free of cancellation
/// for large `x = u^m`:
///
/// ```text
/// f_m(u) = m u^{m−1} Σ_{k=1}^{m−1} [x^{a_k−1} − e^x Γ(a_k, x)] / Γ(a_k),  a_k = 1 − k/m
/// ```
///
/// Requires `x ≥ 2`, where the continued fraction for `Γ(a, x)` converges.
pub fn f_remainder_complement(m: MLIndex, u: f64) -> Result<f64> {
    if !(u >= 0.0) || !u.is_finite() {
        return Err(Error::Domain {
            op: "f_remainder_complement",
            detail: format!("argument must be finite and non-negative, got {u}"),
        });
    }
    let mi = m.get();
    if mi == 1 {
        return Ok(0.0);
    }
    let x = u.powi(mi as i32);
    if x < 2.0 {
        return Err(Error::Domain {
            op: "f_remainder_complement",
            detail: format!("requires u^m >= 2, got {x}"),
        });
    }
    Ok(complement_unchecked(mi, u, x))
}

fn complement_unchecked(m: u32, u: f64, x: f64) -> f64 {
    let mf = m as f64;
    let mut s = 0.0;
    for k in 1..m {
        let a = 1.0 - k as f64 / mf;
        // x^{a−1} − x^a h = x^{a−1} (1 − x h)
        let h = upper_gamma_cf(a, x);
        s += x.powf(a - 1.0) * (1.0 - x * h) / gamma_pos(a);
    }
    mf * u.powi(m as i32 - 1) * s
}

/// `f_m(u)` for quadrature integrands: subtraction while at most
/// [`ESCALATION_DIGITS`] digits cancel, the incomplete-Gamma route beyond.
pub(crate) fn remainder_for_integrand(m: u32, u: f64) -> f64 {
    if m == 1 {
        return 0.0;
    }
    let x = u.powi(m as i32);
    if x > COMPLEMENT_THRESHOLD {
        complement_unchecked(m, u, x)
    } else {
        remainder_f64(m, u)
    }
}

/// `e^{−u^m} F_m(u)`, finite for every `u ≥ 0`.
pub(crate) fn scaled_f(m: u32, u: f64) -> f64 {
    if m == 1 {
        return 1.0;
    }
    let x = u.powi(m as i32);
    let mf = m as f64;
    if x > COMPLEMENT_THRESHOLD {
        mf * mf * u.powi(m as i32 - 1) + (-x).exp() * complement_unchecked(m, u, x)
    } else {
        mf * ml_series_f64(m, u, SeriesKind::F, 1e-17).value * (-x).exp()
    }
}

/// `F_m(0) = f_m(0) = m / Γ(1/m)`.
pub fn f_at_zero(m: MLIndex) -> f64 {
    let mf = m.get() as f64;
    if m.get() == 1 {
        1.0
    } else {
        mf / gamma_pos(1.0 / mf)
    }
}

#[cfg(test)]
#[allow(clippy::excessive_precision)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn settings() -> EvalSettings {
        EvalSettings {
            tol: 1e-13,
            ..EvalSettings::default()
        }
    }

    fn extended() -> EvalSettings {
        EvalSettings {
            tol: 1e-13,
            precision: PrecisionMode::Extended,
            ..EvalSettings::default()
        }
    }

    fn ml(m: u32) -> MLIndex {
        MLIndex::new(m).unwrap()
    }

    #[test]
    fn index_zero_rejected() {
        assert!(MLIndex::new(0).is_err());
    }

    // mpmath, 40 digits
    #[test]
    fn log_gamma_reference() {
        let cases = [
            (0.1, 2.252_712_651_734_206),
            (0.5, 0.572_364_942_924_700_1),
            (1.5, -0.120_782_237_635_245_22),
            (2.5, 0.284_682_870_472_919_16),
            (3.7, 1.428_072_326_665_388),
            (10.0, 12.801_827_480_081_47),
            (33.3, 82.603_723_581_654_95),
            (100.0, 359.134_205_369_575_4),
            (200.0, 857.933_669_825_857_4),
        ];
        for (x, want) in cases {
            assert_relative_eq!(log_gamma(x).unwrap(), want, max_relative = 1e-14);
        }
        assert!(log_gamma(1.0).unwrap().abs() < 1e-15);
        assert!(log_gamma(2.0).unwrap().abs() < 1e-15);
    }

    #[test]
    fn log_gamma_domain() {
        assert!(matches!(log_gamma(0.0), Err(Error::Domain { .. })));
        assert!(matches!(log_gamma(-1.5), Err(Error::Domain { .. })));
        assert!(gamma(f64::NAN).is_err());
    }

    #[test]
    fn erf_reference() {
        let cases = [
            (0.1, 0.112_462_916_018_284_89, 0.887_537_083_981_715_1),
            (0.5, 0.520_499_877_813_046_5, 0.479_500_122_186_953_46),
            (1.0, 0.842_700_792_949_714_9, 0.157_299_207_050_285_13),
            (2.0, 0.995_322_265_018_952_7, 4.677_734_981_047_265_8e-3),
            (3.5, 0.999_999_256_901_627_7, 7.430_983_723_414_127e-7),
            (-1.2, -0.910_313_978_229_635_4, 1.910_313_978_229_635_4),
        ];
        for (x, e, ec) in cases {
            assert_relative_eq!(erf(x), e, max_relative = 1e-14);
            assert_relative_eq!(erfc(x), ec, max_relative = 1e-13);
        }
    }

    // erfc(1) against ∫_1^∞ 2/√π e^{−s²} ds by the quadrature engine
    #[test]
    fn erf_cross_checked_by_quadrature() {
        use crate::quadrature::{integrate_semi_infinite, SemiInfiniteIntegrand};
        let f = SemiInfiniteIntegrand::new(
            |s: f64| 2.0 / SQRT_PI * (-(1.0 + s) * (1.0 + s)).exp(),
            2.0,
            0.0,
        )
        .with_envelope(2.0 / SQRT_PI * (-1.0f64).exp(), 0.0);
        let q = integrate_semi_infinite(&f, &settings()).unwrap();
        assert_relative_eq!(1.0 - q.value, erf(1.0), max_relative = 1e-12);
        assert_relative_eq!(erf(1.0), 0.842_700_792_9, max_relative = 1e-10);
    }

    #[test]
    fn e_and_f_trivial_cases() {
        let s = settings();
        assert_relative_eq!(
            mittag_leffler_e(ml(1), 0.7, &s).unwrap(),
            0.7f64.exp(),
            max_relative = 1e-13
        );
        assert_relative_eq!(
            mittag_leffler_e(ml(1), 0.7, &s).unwrap(),
            2.013_752_707_470_476_5,
            max_relative = 1e-13
        );
        assert_eq!(mittag_leffler_e(ml(2), 0.0, &s).unwrap(), 1.0);
        assert_relative_eq!(
            mittag_leffler_f(ml(1), 1.0, &s).unwrap(),
            std::f64::consts::E,
            max_relative = 1e-13
        );
        assert_relative_eq!(
            mittag_leffler_f(ml(2), 0.0, &s).unwrap(),
            2.0 / SQRT_PI,
            max_relative = 1e-15
        );
    }

    // E_2(u) = e^{u²}(1 + erf u): the Taylor coefficients of the right-hand side
    // are 1/Γ(ν/2 + 1), matched here for ν < 10 through the odd/even split
    // e^{u²} erf u = (2/√π) Σ 2^k u^{2k+1}/(2k+1)!!.
    #[test]
    fn e2_erf_identity_coefficients() {
        for nu in 0..10u32 {
            let series_coeff = 1.0 / gamma_pos(nu as f64 / 2.0 + 1.0);
            let closed_coeff = if nu % 2 == 0 {
                // e^{u²}: u^{2k}/k!
                let k = nu / 2;
                1.0 / (1..=k).map(|i| i as f64).product::<f64>()
            } else {
                let k = (nu - 1) / 2;
                let dfact: f64 = (0..=k).map(|i| (2 * i + 1) as f64).product();
                2.0 / SQRT_PI * 2f64.powi(k as i32) / dfact
            };
            assert_relative_eq!(series_coeff, closed_coeff, max_relative = 1e-14);
        }
    }

    #[test]
    fn e2_and_f2_match_erf_closed_forms() {
        let s = settings();
        for i in 0..=22 {
            let u = i as f64 * 0.1;
            let e_closed = (u * u).exp() * (1.0 + erf(u));
            let f_closed = 2.0 * u * e_closed + 2.0 / SQRT_PI;
            assert_relative_eq!(
                mittag_leffler_e(ml(2), u, &s).unwrap(),
                e_closed,
                max_relative = 1e-12
            );
            assert_relative_eq!(
                mittag_leffler_f(ml(2), u, &s).unwrap(),
                f_closed,
                max_relative = 1e-12
            );
        }
        assert_relative_eq!(
            mittag_leffler_e(ml(2), 1.0, &s).unwrap(),
            5.008_98,
            max_relative = 1e-6
        );
        assert_relative_eq!(
            mittag_leffler_f(ml(2), 1.0, &s).unwrap(),
            11.146_34,
            max_relative = 1e-6
        );
    }

    // mpmath reference values (high-precision direct summation)
    #[test]
    fn e_f_reference_values() {
        let s = settings();
        let cases = [
            (3, 0.5, 2.047_195_915_604_590_7, 3.762_975_625_858_101_2),
            (3, 1.5, 87.074_315_908_464_06, 592.194_675_406_152),
            (4, 1.2, 30.732_502_160_214_57, 220.934_869_472_959_15),
            (5, 0.9, 7.027_245_063_732_222, 32.021_131_322_471_05),
        ];
        for (m, u, e, f) in cases {
            assert_relative_eq!(
                mittag_leffler_e(ml(m), u, &s).unwrap(),
                e,
                max_relative = 1e-13
            );
            assert_relative_eq!(
                mittag_leffler_f(ml(m), u, &s).unwrap(),
                f,
                max_relative = 1e-13
            );
            assert_relative_eq!(
                mittag_leffler_f(ml(m), u, &extended()).unwrap(),
                f,
                max_relative = 1e-15
            );
        }
    }

    #[test]
    fn overflow_signalled() {
        assert!(matches!(
            mittag_leffler_f(ml(2), 30.0, &settings()),
            Err(Error::Overflow { .. })
        ));
        assert!(mittag_leffler_e(ml(1), -1.0, &settings()).is_err());
    }

    #[test]
    fn remainder_examples() {
        let s = settings();
        assert_eq!(f_remainder(ml(1), 2.0, &s).unwrap(), 0.0);
        assert_relative_eq!(
            f_remainder(ml(2), 0.0, &s).unwrap(),
            std::f64::consts::FRAC_2_SQRT_PI,
            max_relative = 1e-10
        );
        let closed = 11.146_339_328_620_08 - 4.0 * std::f64::consts::E;
        assert_relative_eq!(
            f_remainder(ml(2), 1.0, &s).unwrap(),
            closed,
            max_relative = 1e-12
        );
        assert_relative_eq!(
            f_remainder(ml(2), 1.0, &s).unwrap(),
            0.273_212,
            max_relative = 1e-5
        );
    }

    #[test]
    fn remainder_escalates_and_stays_accurate() {
        let s = settings();
        // mpmath
        let cases = [
            (2, 4.0, 0.032_383_506_095_021_45),
            (2, 5.0, 0.021_332_789_764_826_31),
            (3, 2.5, 0.152_721_470_070_645_3),
            (3, 25f64.powf(1.0 / 3.0), 0.110_206_047_287_928_34),
        ];
        for (m, u, want) in cases {
            let r = f_remainder_detailed(ml(m), u, &s).unwrap();
            assert_eq!(r.route, RemainderRoute::Extended);
            assert_relative_eq!(r.value, want, max_relative = 1e-10);
        }
    }

    #[test]
    fn remainder_refuses_past_budget() {
        let err = f_remainder(ml(2), 8.0, &settings()).unwrap_err();
        assert!(matches!(err, Error::PrecisionExhausted { .. }));
    }

    #[test]
    fn complement_route_agrees_with_subtraction() {
        let s = settings();
        for m in 2..=5u32 {
            for i in 0..=20 {
                let x = 6.0 + 2.2 * i as f64;
                let u = x.powf(1.0 / m as f64);
                let sub = match f_remainder_detailed(ml(m), u, &s) {
                    Err(Error::PrecisionExhausted { .. }) if x > 25.0 => continue,
                    r => r.unwrap(),
                };
                let comp = f_remainder_complement(ml(m), u).unwrap();
                let carried = match sub.route {
                    RemainderRoute::Standard => 15.0,
                    _ => EXTENDED_DIGITS,
                };
                let tol = 10f64.powf(sub.digits_lost - carried + 1.0).max(1e-12);
                assert_relative_eq!(sub.value, comp, max_relative = tol);
                if sub.route == RemainderRoute::Extended && x <= 25.0 {
                    assert_relative_eq!(sub.value, comp, max_relative = 1e-9);
                }
            }
        }
    }

    #[test]
    fn scaled_f_is_continuous_across_threshold() {
        for m in 2..=4u32 {
            let u_lo = (COMPLEMENT_THRESHOLD * (1.0 - 1e-12)).powf(1.0 / m as f64);
            let u_hi = (COMPLEMENT_THRESHOLD * (1.0 + 1e-12)).powf(1.0 / m as f64);
            assert_relative_eq!(scaled_f(m, u_lo), scaled_f(m, u_hi), max_relative = 1e-10);
        }
    }

    #[test]
    fn tail_bound_dominates_true_remainder() {
        let loose = EvalSettings {
            tol: 1e-6,
            ..EvalSettings::default()
        };
        let tight = EvalSettings {
            tol: 1e-14,
            ..EvalSettings::default()
        };
        for m in 1..=4u32 {
            for &u in &[0.3, 1.0, 1.7, 2.2] {
                for derivative in [false, true] {
                    let a = mittag_leffler_series(ml(m), u, derivative, &loose).unwrap();
                    let b = mittag_leffler_series(ml(m), u, derivative, &tight).unwrap();
                    assert!(b.terms >= a.terms);
                    let true_rem = b.value - a.value;
                    assert!(
                        a.tail_bound >= true_rem * (1.0 - 1e-12) - 1e-14 * b.value,
                        "m={m} u={u}: bound {} < remainder {}",
                        a.tail_bound,
                        true_rem
                    );
                }
            }
        }
    }

    #[test]
    fn extended_reproduces_standard() {
        for m in 1..=4u32 {
            for &u in &[0.0, 0.4, 1.1, 1.9] {
                let a = mittag_leffler_f(ml(m), u, &settings()).unwrap();
                let b = mittag_leffler_f(ml(m), u, &extended()).unwrap();
                assert_relative_eq!(a, b, max_relative = 1e-13);
            }
        }
    }

    #[test]
    fn upper_gamma_half_is_erfc() {
        // Γ(1/2, x) = √π erfc(√x)
        for &x in &[0.3f64, 1.0, 4.0, 9.0, 30.0] {
            let want = (SQRT_PI * erfc(x.sqrt())).ln();
            assert_relative_eq!(
                ln_upper_gamma(0.5, x),
                want,
                max_relative = 1e-12,
                epsilon = 1e-13
            );
        }
        assert_relative_eq!(ln_upper_gamma(3.0, 0.0), 2f64.ln(), max_relative = 1e-14);
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #![proptest_config(ProptestConfig::with_cases(64))]

            #[test]
            fn f_is_derivative_of_e(m in 1u32..=5, u in 0.0f64..3.0) {
                let s = EvalSettings { tol: 1e-15, ..EvalSettings::default() };
                // step shrinks with the local growth rate m u^{m−1}
                let h = 1e-4 / (1.0 + m as f64 * u.powi(m as i32 - 1));
                let lo = (u - h).max(0.0);
                let hi = u + h;
                let fd = (mittag_leffler_e(ml(m), hi, &s).unwrap()
                    - mittag_leffler_e(ml(m), lo, &s).unwrap()) / (hi - lo);
                let f = mittag_leffler_f(ml(m), u, &s).unwrap();
                // E_m is a power series in u; the forward difference near 0 is O(h)
                let allowed = if u < h { 1e-4 } else { 1e-6 * f.max(1.0) };
                prop_assert!((f - fd).abs() <= allowed, "m={} u={} F={} fd={}", m, u, f, fd);
            }
        }
    }
}
