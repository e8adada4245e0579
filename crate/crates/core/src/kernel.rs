//! Diagonal Bergman and Szegő kernels of `E_m`.
//!
//! Two independent evaluators: the multi-index power series and the
//! one-dimensional Mittag-Leffler integral
//!
//! ```text
//! K^B(z) = π^{−n} ∫₀^∞ e^{−τ} ∏_j F_{m_j}(|z_j|² τ^{1/m_j}) τ^{|1/m|} dτ
//! K^S(z) = (2π^n)^{−1} ∫₀^∞ e^{−τ} ∏_j F_{m_j}(|z_j|² τ^{1/m_j}) τ^{|1/m| − 1} dτ
//! ```
//!
//! The integrand is evaluated as `e^{−r(z)τ} ∏ e^{−u_j^{m_j}} F_{m_j}(u_j)`,
//! which never overflows. A brute-force monomial-norm oracle provides the
//! ground truth for the series constant.

use std::cell::RefCell;
use std::f64::consts::PI;

use num_complex::Complex64;
use serde::ser::SerializeStruct;
use serde::{Serialize, Serializer};

use crate::asymptotics::{self, ProfileContext};
use crate::domain::{classify, defining_r, one_based, BoundaryClassification, EggDomain};
use crate::error::{Error, Result};
use crate::quadrature::{
    integrate_semi_infinite, integrate_tanh_sinh, sum_lattice_series, Calibration, EvalSettings,
    SemiInfiniteIntegrand,
};
use crate::special::{ln_gamma_pos, remainder_for_integrand, scaled_f};

/// Smallest `r(z)` accepted by the integral evaluators.
pub const INTEGRAL_MIN_R: f64 = 1e-6;
/// Smallest `r(z)` accepted by the series evaluator.
pub const SERIES_MIN_R: f64 = 1e-4;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum KernelKind {
    Bergman,
    Szego,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Series,
    Integral,
    Oracle,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct KernelValue {
    pub value: f64,
    pub method: Method,
    pub error_estimate: f64,
}

/// One summand `I_K` of the Mittag-Leffler decomposition, `I ⊆ K ⊆ N`.
#[derive(Debug, Clone, PartialEq)]
pub struct IKTerm {
    pub k: Vec<usize>,
    pub value: f64,
    pub error_estimate: f64,
}

impl Serialize for IKTerm {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        let mut st = s.serialize_struct("IKTerm", 3)?;
        st.serialize_field("K", &one_based(&self.k))?;
        st.serialize_field("value", &self.value)?;
        st.serialize_field("error_estimate", &self.error_estimate)?;
        st.end()
    }
}

fn check_point(domain: &EggDomain, z: &[Complex64], min_r: f64, op: &'static str) -> Result<f64> {
    if z.len() != domain.n() {
        return Err(Error::InvalidArgument(format!(
            "z has {} coordinates, domain dimension is {}",
            z.len(),
            domain.n()
        )));
    }
    let r = defining_r(domain, z);
    if !(r >= min_r) {
        return Err(Error::Domain {
            op,
            detail: format!("requires r(z) >= {min_r:e}, got {r:e}"),
        });
    }
    Ok(r)
}

fn squared_moduli(z: &[Complex64]) -> Vec<f64> {
    z.iter().map(|zj| zj.norm_sqr()).collect()
}

/// `π^{−n}` (Bergman) or `(2π^n)^{−1}` (Szegő).
fn prefactor(kind: KernelKind, n: usize) -> f64 {
    let base = PI.powi(-(n as i32));
    match kind {
        KernelKind::Bergman => base,
        KernelKind::Szego => 0.5 * base,
    }
}

fn kernel_integral(
    kind: KernelKind,
    domain: &EggDomain,
    z: &[Complex64],
    settings: &EvalSettings,
) -> Result<KernelValue> {
    let op = match kind {
        KernelKind::Bergman => "bergman_integral",
        KernelKind::Szego => "szego_integral",
    };
    let r = check_point(domain, z, INTEGRAL_MIN_R, op)?;
    let x = squared_moduli(z);
    let m = domain.m().to_vec();
    let power = domain.inverse_sum(&(0..domain.n()).collect::<Vec<_>>())
        - if kind == KernelKind::Szego { 1.0 } else { 0.0 };
    // e^{−u^m} F_m(u) ≤ (m² x^{m−1} + m) τ^{(m−1)/m} for τ ≥ 1
    let envelope: f64 = m
        .iter()
        .zip(&x)
        .map(|(&mj, &xj)| {
            let mf = mj as f64;
            if mj == 1 {
                1.0
            } else {
                mf * mf * xj.powi(mj as i32 - 1) + mf
            }
        })
        .product();
    let envelope_power = power + m.iter().map(|&mj| 1.0 - 1.0 / mj as f64).sum::<f64>();
    let integrand = |tau: f64| {
        let mut v = (-r * tau).exp() * tau.powf(power);
        for (&mj, &xj) in m.iter().zip(&x) {
            if mj != 1 {
                v *= scaled_f(mj, xj * tau.powf(1.0 / mj as f64));
            }
        }
        v
    };
    let f = SemiInfiniteIntegrand::new(integrand, r, envelope_power).with_envelope(envelope, 1.0);
    let q = integrate_semi_infinite(&f, settings)?;
    let c = prefactor(kind, domain.n());
    Ok(KernelValue {
        value: c * q.value,
        method: Method::Integral,
        error_estimate: c * q.error_estimate,
    })
}

/// Bergman kernel on the diagonal by the Mittag-Leffler integral.
pub fn bergman_integral(
    domain: &EggDomain,
    z: &[Complex64],
    settings: &EvalSettings,
) -> Result<KernelValue> {
    kernel_integral(KernelKind::Bergman, domain, z, settings)
}

/// Szegő kernel on the diagonal by the Mittag-Leffler integral.
pub fn szego_integral(
    domain: &EggDomain,
    z: &[Complex64],
    settings: &EvalSettings,
) -> Result<KernelValue> {
    kernel_integral(KernelKind::Szego, domain, z, settings)
}

pub fn kernel_integral_of(
    kind: KernelKind,
    domain: &EggDomain,
    z: &[Complex64],
    settings: &EvalSettings,
) -> Result<KernelValue> {
    kernel_integral(kind, domain, z, settings)
}

/// `(1/2π^n) ∏ m_j`, the series constant before calibration.
pub fn reference_series_constant(domain: &EggDomain) -> f64 {
    let prod: f64 = domain.m().iter().map(|&mj| mj as f64).product();
    prod / (2.0 * PI.powi(domain.n() as i32))
}

/// Natural log of the uncalibrated series coefficient
/// `Γ(Σ(ν_j+1)/m_j + 1) / ∏ Γ((ν_j+1)/m_j)`.
pub fn ln_series_coefficient(domain: &EggDomain, nu: &[usize]) -> f64 {
    let s: f64 = nu
        .iter()
        .zip(domain.m())
        .map(|(&v, &mj)| (v as f64 + 1.0) / mj as f64)
        .sum();
    let denom: f64 = nu
        .iter()
        .zip(domain.m())
        .map(|(&v, &mj)| ln_gamma_pos((v as f64 + 1.0) / mj as f64))
        .sum();
    ln_gamma_pos(s + 1.0) - denom
}

fn gcd(a: u64, b: u64) -> u64 {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}

// ln Γ over the rational grid k / L, filled on demand.
struct LnGammaGrid {
    denominator: f64,
    shift: f64,
    values: RefCell<Vec<f64>>,
}

impl LnGammaGrid {
    fn new(denominator: u64, shift: f64) -> Self {
        LnGammaGrid {
            denominator: denominator as f64,
            shift,
            values: RefCell::new(Vec::new()),
        }
    }

    fn get(&self, numerator: usize) -> f64 {
        let mut v = self.values.borrow_mut();
        while v.len() <= numerator {
            let k = v.len() as f64;
            v.push(ln_gamma_pos(k / self.denominator + self.shift));
        }
        v[numerator]
    }
}

/// Uncalibrated lattice sum `Σ_ν coef(ν) ∏ |z_j|^{2ν_j}`.
fn raw_bergman_series(
    domain: &EggDomain,
    z: &[Complex64],
    settings: &EvalSettings,
) -> Result<crate::quadrature::LatticeSum> {
    let x = squared_moduli(z);
    let ln_x: Vec<f64> = x.iter().map(|&xj| xj.ln()).collect();
    let lcm = domain
        .m()
        .iter()
        .fold(1u64, |acc, &mj| acc / gcd(acc, mj as u64) * mj as u64);
    let weights: Vec<usize> = domain
        .m()
        .iter()
        .map(|&mj| (lcm / mj as u64) as usize)
        .collect();
    let total = LnGammaGrid::new(lcm, 1.0);
    let axes: Vec<LnGammaGrid> = domain
        .m()
        .iter()
        .map(|&mj| LnGammaGrid::new(mj as u64, 0.0))
        .collect();
    let term = |nu: &[usize]| -> f64 {
        let mut numerator = 0usize;
        let mut ln = 0.0;
        for j in 0..nu.len() {
            if nu[j] > 0 && x[j] == 0.0 {
                return 0.0;
            }
            numerator += (nu[j] + 1) * weights[j];
            ln -= axes[j].get(nu[j] + 1);
            if nu[j] > 0 {
                ln += nu[j] as f64 * ln_x[j];
            }
        }
        (ln + total.get(numerator)).exp()
    };
    sum_lattice_series(domain.n(), term, settings)
}

/// Bergman kernel by its power series; needs a calibrated series constant.
pub fn bergman_series(
    domain: &EggDomain,
    z: &[Complex64],
    settings: &EvalSettings,
) -> Result<KernelValue> {
    let cal = settings.calibration("bergman_series")?;
    let r = check_point(domain, z, 0.0, "bergman_series")?;
    if r < SERIES_MIN_R {
        return Err(Error::Divergence {
            op: "bergman_series",
            detail: format!("r(z) = {r:e} is below the series radius {SERIES_MIN_R:e}"),
        });
    }
    let sum = raw_bergman_series(domain, z, settings)?;
    let c = cal.series_constant_ratio * reference_series_constant(domain);
    Ok(KernelValue {
        value: c * sum.value,
        method: Method::Series,
        error_estimate: c * (sum.tail_bound + 4.0 * f64::EPSILON * sum.value),
    })
}

/// `‖z^ν‖²` in `L²(E_m)` by nested radial quadrature:
/// `(2π)^n ∫_{Σ ρ_j^{2m_j} < 1} ∏ ρ_j^{2ν_j+1} dρ`.
pub fn monomial_norm_oracle(
    domain: &EggDomain,
    nu: &[usize],
    settings: &EvalSettings,
) -> Result<f64> {
    if nu.len() != domain.n() {
        return Err(Error::InvalidArgument(format!(
            "multi-index has {} entries, domain dimension is {}",
            nu.len(),
            domain.n()
        )));
    }
    if nu.iter().sum::<usize>() > 12 {
        return Err(Error::InvalidArgument("oracle supports |nu| <= 12".into()));
    }
    let tol = (settings.tol * 1e-3).max(1e-13);
    let inner = radial_layer(domain.m(), nu, 0, 1.0, tol)?;
    Ok((2.0 * PI).powi(domain.n() as i32) * inner)
}

// G_k(R) = ∫_0^{R^{1/2m_k}} ρ^{2ν_k+1} G_{k+1}(R − ρ^{2m_k}) dρ, G_n ≡ 1
fn radial_layer(m: &[u32], nu: &[usize], k: usize, room: f64, tol: f64) -> Result<f64> {
    if k == m.len() {
        return Ok(1.0);
    }
    if room <= 0.0 {
        return Ok(0.0);
    }
    let two_m = 2 * m[k] as i32;
    let upper = room.powf(1.0 / two_m as f64);
    let err = RefCell::new(None);
    let q = integrate_tanh_sinh(
        |rho| {
            let rest = (room - rho.powi(two_m)).max(0.0);
            match radial_layer(m, nu, k + 1, rest, tol) {
                Ok(g) => rho.powi(2 * nu[k] as i32 + 1) * g,
                Err(e) => {
                    err.borrow_mut().get_or_insert(e);
                    0.0
                }
            }
        },
        0.0,
        upper,
        tol,
    )?;
    if let Some(e) = err.into_inner() {
        return Err(e);
    }
    Ok(q.value)
}

/// Enumerates every `K` with `I ⊆ K ⊆ N`, in lexicographic bitmask order.
pub fn admissible_subsets(domain: &EggDomain, cls: &BoundaryClassification) -> Vec<Vec<usize>> {
    let free: Vec<usize> = (0..domain.n()).filter(|j| !cls.i.contains(j)).collect();
    (0u64..(1u64 << free.len()))
        .map(|mask| {
            let mut k: Vec<usize> = cls.i.clone();
            for (b, &j) in free.iter().enumerate() {
                if mask >> b & 1 == 1 {
                    k.push(j);
                }
            }
            k.sort_unstable();
            k
        })
        .collect()
}

/// `∏_{j∈K} m_j² x_j^{m_j−1}` with `x_j = |z_j|²`.
fn dominant_factor(domain: &EggDomain, k: &[usize], x: &[f64]) -> f64 {
    k.iter()
        .map(|&j| {
            let mf = domain.m()[j] as f64;
            mf * mf * x[j].powi(domain.m()[j] as i32 - 1)
        })
        .product()
}

/// ```text
/// I_K = (1/n!) ∏_{K} m_j² |z_j|^{2m_j−2}
///       ∫₀^∞ e^{−(1 − Σ_K |z_j|^{2m_j}) τ} ∏_{N\K} f_{m_j}(|z_j|² τ^{1/m_j}) τ^{|K| + |1/m|_{N\K}} dτ
/// ```
pub fn i_k_term(
    domain: &EggDomain,
    cls: &BoundaryClassification,
    k: &[usize],
    z: &[Complex64],
    settings: &EvalSettings,
) -> Result<IKTerm> {
    check_point(domain, z, INTEGRAL_MIN_R, "i_k_term")?;
    if !cls.i.iter().all(|j| k.contains(j)) || k.iter().any(|&j| j >= domain.n()) {
        return Err(Error::InvalidArgument("K must satisfy I ⊆ K ⊆ N".into()));
    }
    let n = domain.n();
    let x = squared_moduli(z);
    let rest: Vec<usize> = (0..n).filter(|j| !k.contains(j)).collect();
    let factor = dominant_factor(domain, k, &x);
    if factor == 0.0 {
        return Ok(IKTerm {
            k: k.to_vec(),
            value: 0.0,
            error_estimate: 0.0,
        });
    }
    let decay = 1.0 - k.iter().map(|&j| domain.weight(j, z[j])).sum::<f64>();
    let power = k.len() as f64 + domain.inverse_sum(&rest);
    let envelope: f64 = rest.iter().map(|&j| domain.m()[j] as f64).product();
    let m = domain.m();
    let integrand = |tau: f64| {
        let mut v = (-decay * tau).exp() * tau.powf(power);
        for &j in &rest {
            v *= remainder_for_integrand(m[j], x[j] * tau.powf(1.0 / m[j] as f64));
        }
        v
    };
    let f = SemiInfiniteIntegrand::new(integrand, decay, power).with_envelope(envelope, 0.0);
    let q = integrate_semi_infinite(&f, settings)?;
    let c = factor / factorial(n);
    Ok(IKTerm {
        k: k.to_vec(),
        value: c * q.value,
        error_estimate: c * q.error_estimate,
    })
}

pub(crate) fn factorial(n: usize) -> f64 {
    (1..=n).map(|k| k as f64).product()
}

/// All admissible `I_K(z)` for the boundary point of `cls`.
pub fn i_k_decomposition(
    domain: &EggDomain,
    cls: &BoundaryClassification,
    z: &[Complex64],
    settings: &EvalSettings,
) -> Result<Vec<IKTerm>> {
    admissible_subsets(domain, cls)
        .iter()
        .map(|k| i_k_term(domain, cls, k, z, settings))
        .collect()
}

/// The two-sided model `∏_K m_j² |z_j|^{2m_j−2} / (1 − Σ_K |z_j|^{2m_j})^{|K| + |1/m|_{N\K} + 1}`
/// for `I_K`.
pub fn i_k_estimate(domain: &EggDomain, k: &[usize], z: &[Complex64]) -> f64 {
    let x = squared_moduli(z);
    let rest: Vec<usize> = (0..domain.n()).filter(|j| !k.contains(j)).collect();
    let d = 1.0 - k.iter().map(|&j| domain.weight(j, z[j])).sum::<f64>();
    dominant_factor(domain, k, &x) / d.powf(k.len() as f64 + domain.inverse_sum(&rest) + 1.0)
}

/// Split of `(n!/π^n) Σ_K I_K` into the part with `K ⊇ Q` and the rest.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DecompositionSplit {
    pub containing_q: f64,
    pub not_containing_q: f64,
    pub error_estimate: f64,
}

pub fn decomposition_split(
    domain: &EggDomain,
    cls: &BoundaryClassification,
    z: &[Complex64],
    settings: &EvalSettings,
) -> Result<DecompositionSplit> {
    let terms = i_k_decomposition(domain, cls, z, settings)?;
    let c = factorial(domain.n()) / PI.powi(domain.n() as i32);
    let mut out = DecompositionSplit {
        containing_q: 0.0,
        not_containing_q: 0.0,
        error_estimate: 0.0,
    };
    for t in &terms {
        if cls.q.iter().all(|j| t.k.contains(j)) {
            out.containing_q += c * t.value;
        } else {
            out.not_containing_q += c * t.value;
        }
        out.error_estimate += c * t.error_estimate;
    }
    Ok(out)
}

/// Measured constants and the raw ratios they were derived from.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CalibrationReport {
    /// Series constant over `(1/2π^n) ∏ m_j`, from the unit-disc kernel (`m = (3)`).
    pub disc_ratio: f64,
    /// Same ratio from monomial norms of `m = (1,2)`, `|ν| ≤ 4` (mean).
    pub oracle_ratio: f64,
    /// Largest relative deviation among the individual monomial ratios.
    pub oracle_ratio_spread: f64,
    pub series_constant_ratio: f64,
    /// Closed-form Bergman profile factor, measured at `T = 1/4`, `m = (1,2)`.
    pub closed_form_constant: f64,
    /// Closed-form Szegő profile factor, measured at the same point.
    pub closed_form_constant_szego: f64,
    /// Relative difference between the Bergman and Szegő closed-form factors.
    pub closed_form_mismatch: f64,
}

/// Largest relative disagreement tolerated between two measurements of one constant.
pub const CALIBRATION_TOL: f64 = 1e-6;

/// Measures the series constant and the closed-form factors and returns
/// settings carrying them.
pub fn calibrate_constants(settings: &EvalSettings) -> Result<(EvalSettings, CalibrationReport)> {
    settings.validate()?;
    let work = EvalSettings {
        tol: settings.tol.min(1e-10),
        calibration: None,
        ..settings.clone()
    };

    // unit disc: K(z) = (1/π)(1 − |z|²)^{−2}
    let disc = EggDomain::new(vec![3])?;
    let x = 0.5f64;
    let z = [Complex64::new(x.sqrt(), 0.0)];
    let raw = raw_bergman_series(&disc, &z, &work)?;
    let disc_ratio =
        (1.0 / (PI * (1.0 - x).powi(2))) / (reference_series_constant(&disc) * raw.value);

    // m = (1,2): coefficient of |z^ν|² must be 1 / ‖z^ν‖²
    let egg = EggDomain::new(vec![1, 2])?;
    let mut ratios = Vec::new();
    for total in 0..=4usize {
        for a in 0..=total {
            let nu = [a, total - a];
            let norm = monomial_norm_oracle(&egg, &nu, &work)?;
            let coef = reference_series_constant(&egg) * ln_series_coefficient(&egg, &nu).exp();
            ratios.push(1.0 / (norm * coef));
        }
    }
    let oracle_ratio = ratios.iter().sum::<f64>() / ratios.len() as f64;
    let oracle_ratio_spread = ratios
        .iter()
        .map(|r| (r / oracle_ratio - 1.0).abs())
        .fold(0.0, f64::max);
    let rel = (disc_ratio / oracle_ratio - 1.0).abs();
    if rel > CALIBRATION_TOL || oracle_ratio_spread > CALIBRATION_TOL {
        return Err(Error::CalibrationInconsistent {
            first: disc_ratio,
            second: oracle_ratio,
            rel: rel.max(oracle_ratio_spread),
        });
    }

    // closed-form profiles against the profile integrals at T = 1/4
    let cls = classify(&egg, &[Complex64::new(1.0, 0.0), Complex64::new(0.0, 0.0)])?;
    let ctx = ProfileContext::new(&egg, &cls)?;
    let t_power = 0.25f64;
    let t = [t_power.powf(0.25)];
    let phi_b = asymptotics::phi_b(&ctx, &t, &work)?;
    let phi_s = asymptotics::phi_s(&ctx, &t, &work)?;
    let raw_b = asymptotics::closed_form_raw(KernelKind::Bergman, 2, 2, t_power, &work)?;
    let raw_s = asymptotics::closed_form_raw(KernelKind::Szego, 2, 2, t_power, &work)?;
    let closed_form_constant = phi_b / raw_b.value;
    let closed_form_constant_szego = phi_s / raw_s.value;

    let calibration = Calibration {
        series_constant_ratio: disc_ratio,
        closed_form_constant,
        closed_form_constant_szego,
    };
    let report = CalibrationReport {
        disc_ratio,
        oracle_ratio,
        oracle_ratio_spread,
        series_constant_ratio: disc_ratio,
        closed_form_constant,
        closed_form_constant_szego,
        closed_form_mismatch: (closed_form_constant / closed_form_constant_szego - 1.0).abs(),
    };
    let out = EvalSettings {
        calibration: Some(calibration),
        ..settings.clone()
    };
    Ok((out, report))
}

#[cfg(test)]
#[allow(clippy::excessive_precision)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn c(re: f64) -> Complex64 {
        Complex64::new(re, 0.0)
    }

    fn dom(m: &[u32]) -> EggDomain {
        EggDomain::new(m.to_vec()).unwrap()
    }

    fn calibrated() -> EvalSettings {
        EvalSettings {
            calibration: Some(Calibration {
                series_constant_ratio: 2.0,
                closed_form_constant: 0.5,
                closed_form_constant_szego: 1.0,
            }),
            ..EvalSettings::default()
        }
    }

    #[test]
    fn disc_bergman_and_szego() {
        let d = dom(&[3]);
        let s = EvalSettings::default();
        let z = [c(0.5f64.sqrt())];
        assert_relative_eq!(
            bergman_integral(&d, &z, &s).unwrap().value,
            4.0 / PI,
            max_relative = 1e-8
        );
        assert_relative_eq!(
            szego_integral(&d, &z, &s).unwrap().value,
            3.0 / (2.0 * PI) / 0.5,
            max_relative = 1e-8
        );
    }

    #[test]
    fn egg_reduction_on_first_axis() {
        let d = dom(&[1, 2]);
        let s = EvalSettings::default().with_tol(1e-10);
        let z = [c(0.6), c(0.0)];
        // mpmath reference
        assert_relative_eq!(
            bergman_integral(&d, &z, &s).unwrap().value,
            0.463_811_570_628_377_25,
            max_relative = 1e-9
        );
        assert_relative_eq!(
            szego_integral(&d, &z, &s).unwrap().value,
            0.098_946_468_400_720_48,
            max_relative = 1e-9
        );
        let origin = [c(0.0), c(0.0)];
        assert_relative_eq!(
            bergman_integral(&d, &origin, &s).unwrap().value,
            1.5 / (PI * PI),
            max_relative = 1e-9
        );
        assert_relative_eq!(
            szego_integral(&d, &origin, &s).unwrap().value,
            0.5 / (PI * PI),
            max_relative = 1e-9
        );
    }

    #[test]
    fn series_needs_calibration() {
        let d = dom(&[1, 2]);
        let err = bergman_series(&d, &[c(0.0), c(0.0)], &EvalSettings::default()).unwrap_err();
        assert!(matches!(err, Error::NotCalibrated { .. }));
    }

    #[test]
    fn series_disc_and_origin() {
        let s = calibrated();
        let d = dom(&[3]);
        assert_relative_eq!(
            bergman_series(&d, &[c(0.0)], &s).unwrap().value,
            1.0 / PI,
            max_relative = 1e-14
        );
        let v = bergman_series(&d, &[c(0.5f64.sqrt())], &s).unwrap().value;
        assert_relative_eq!(v, 4.0 / PI, max_relative = 1e-8);
        let d = dom(&[1, 2]);
        let a = bergman_series(&d, &[c(0.0), c(0.0)], &s).unwrap().value;
        let b = bergman_integral(&d, &[c(0.0), c(0.0)], &s).unwrap().value;
        assert_relative_eq!(a, b, max_relative = 1e-8);
    }

    #[test]
    fn series_refuses_near_boundary() {
        let d = dom(&[3]);
        let z = [c((1.0 - 5e-5f64).powf(1.0 / 6.0))];
        assert!(matches!(
            bergman_series(&d, &z, &calibrated()),
            Err(Error::Divergence { .. })
        ));
    }

    #[test]
    fn oracle_examples() {
        let s = EvalSettings::default();
        assert_relative_eq!(
            monomial_norm_oracle(&dom(&[3]), &[0], &s).unwrap(),
            PI,
            max_relative = 1e-11
        );
        assert_relative_eq!(
            monomial_norm_oracle(&dom(&[1, 2]), &[0, 0], &s).unwrap(),
            6.579_736_267_392_905_7,
            max_relative = 1e-10
        );
    }

    #[test]
    fn i_k_full_set_is_a_gamma_integral() {
        let d = dom(&[1, 2]);
        let cls = classify(&d, &[c(1.0), c(0.0)]).unwrap();
        let z = [c(0.5), c(0.4)];
        let s = EvalSettings::default();
        let term = i_k_term(&d, &cls, &[0, 1], &z, &s).unwrap();
        let r = defining_r(&d, &z);
        assert_relative_eq!(term.value, 4.0 * 0.16 / r.powi(3), max_relative = 1e-9);
        assert!(i_k_term(&d, &cls, &[1], &z, &s).is_err());
    }

    #[test]
    fn i_k_on_the_q_axis() {
        let d = dom(&[1, 2]);
        let cls = classify(&d, &[c(1.0), c(0.0)]).unwrap();
        let z = [c(0.6), c(0.0)];
        let s = EvalSettings::default();
        let term = i_k_term(&d, &cls, &[0], &z, &s).unwrap();
        // (1/2!)(2/√π) Γ(5/2) (0.64)^{−5/2}
        let want = 0.5 * 2.0 / PI.sqrt() * 0.75 * PI.sqrt() * 0.64f64.powf(-2.5);
        assert_relative_eq!(term.value, want, max_relative = 1e-9);
    }

    #[test]
    fn decomposition_reconstructs_kernel() {
        let s = EvalSettings::default().with_tol(1e-10);
        for (m, z0, z) in [
            (vec![1, 2], vec![1.0, 0.0], vec![0.7, 0.5]),
            (vec![2, 3], vec![0.0, 1.0], vec![0.6, 0.7]),
            (vec![1, 2, 2], vec![1.0, 0.0, 0.0], vec![0.5, 0.5, 0.6]),
        ] {
            let d = dom(&m);
            let z0: Vec<_> = z0.into_iter().map(c).collect();
            let z: Vec<_> = z.into_iter().map(c).collect();
            let cls = classify(&d, &z0).unwrap();
            let split = decomposition_split(&d, &cls, &z, &s).unwrap();
            let k = bergman_integral(&d, &z, &s).unwrap().value;
            assert_relative_eq!(
                split.containing_q + split.not_containing_q,
                k,
                max_relative = 1e-7
            );
        }
    }

    #[test]
    fn admissible_subsets_contain_i() {
        let d = dom(&[1, 2, 2]);
        let cls = classify(&d, &[c(1.0), c(0.0), c(0.0)]).unwrap();
        let ks = admissible_subsets(&d, &cls);
        assert_eq!(ks.len(), 4);
        assert!(ks.iter().all(|k| k.contains(&0)));
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #![proptest_config(ProptestConfig::with_cases(16))]

            #[test]
            fn kernels_depend_only_on_moduli(
                a in 0.0f64..0.7, b in 0.0f64..0.7, p in 0.0f64..std::f64::consts::TAU, q in 0.0f64..std::f64::consts::TAU
            ) {
                let d = dom(&[1, 2]);
                let s = EvalSettings::default();
                let plain = [c(a), c(b)];
                let rotated = [Complex64::from_polar(a, p), Complex64::from_polar(b, q)];
                for kind in [KernelKind::Bergman, KernelKind::Szego] {
                    let x = kernel_integral_of(kind, &d, &plain, &s).unwrap().value;
                    let y = kernel_integral_of(kind, &d, &rotated, &s).unwrap().value;
                    prop_assert!(x > 0.0);
                    prop_assert!((x - y).abs() <= 1e-12 * x);
                }
            }

            #[test]
            fn bergman_times_r_cubed_is_bounded(a in 0.0f64..1.0, rr in 1e-4f64..0.5) {
                // K^B r^{n+1} stays below the unit-ball-like bound along approaches
                let d = dom(&[1, 2]);
                let s = EvalSettings::default().with_tol(1e-7);
                let x1 = a * (1.0 - rr);
                let x2 = ((1.0 - rr) - x1).max(0.0).sqrt();
                let z = [c(x1.sqrt()), c(x2.sqrt())];
                let r = defining_r(&d, &z);
                let k = bergman_integral(&d, &z, &s).unwrap().value;
                prop_assert!(k * r.powi(3) <= 8.0 / (PI * PI) + 1e-6);
            }
        }
    }
}
