//! Boundary behaviour of the kernels in the polar chart of a boundary point.
//!
//! Near `z⁰` the Bergman kernel behaves like
//!
//! ```text
//! (n!/π^n) ∏_{j∈Q} m_j² |z_j|^{2m_j−2} Φ^B(t) / r^{|Q| + |1/m|_P + 1}
//! ```
//!
//! up to a function analytic at `z⁰`. This module evaluates the profiles
//! `Φ^B`, `Φ^S`, their `J_K` decomposition, the closed forms available for
//! `m = (1,…,1,m)`, and the recursive resolution of `Φ` at the frontier of
//! the simplex. Analyticity claims are checked through their observable
//! consequences: bounded residuals and log-log slopes.

use num_complex::Complex64;
use serde::ser::SerializeStruct;
use serde::{Serialize, Serializer};

use crate::domain::{
    from_polar, one_based, simplex_boundary_classify, to_polar, BoundaryClassification, EggDomain,
    PolarPoint, Simplex,
};
use crate::error::{Error, Result};
use crate::kernel::{
    admissible_subsets, factorial, i_k_estimate, i_k_term, kernel_integral_of, KernelKind,
};
use crate::par;
use crate::quadrature::{
    integrate_semi_infinite, sum_lattice_series, EvalSettings, LatticeSum, SemiInfiniteIntegrand,
};
use crate::special::{remainder_for_integrand, scaled_f};

/// Smallest `1 − Σ t^{2m}` at which profiles are evaluated.
pub const PROFILE_MIN_MARGIN: f64 = 1e-4;

/// A boundary point together with its leading exponents.
#[derive(Debug, Clone)]
pub struct ProfileContext {
    pub domain: EggDomain,
    pub cls: BoundaryClassification,
    /// `|Q| + |1/m|_P + 1`.
    pub exponent_b: f64,
    /// `|Q| + |1/m|_P`.
    pub exponent_s: f64,
}

impl ProfileContext {
    pub fn new(domain: &EggDomain, cls: &BoundaryClassification) -> Result<Self> {
        if cls.z0.len() != domain.n() {
            return Err(Error::InvalidArgument(
                "classification does not belong to this domain".into(),
            ));
        }
        let a = cls.q.len() as f64 + domain.inverse_sum(&cls.p);
        Ok(ProfileContext {
            domain: domain.clone(),
            cls: cls.clone(),
            exponent_b: a + 1.0,
            exponent_s: a,
        })
    }

    pub fn exponent(&self, kind: KernelKind) -> f64 {
        match kind {
            KernelKind::Bergman => self.exponent_b,
            KernelKind::Szego => self.exponent_s,
        }
    }

    pub fn simplex(&self) -> Simplex {
        Simplex::for_indices(&self.domain, &self.cls.p)
    }
}

// (1/n!) d^{a+1} ∫ e^{−s} ∏_{P} F(t_j² s^{1/m_j}) s^a ds   (Bergman)
// (1/(n−1)!) d^{a} ∫ e^{−s} ∏_{P} F(t_j² s^{1/m_j}) s^{a−1} ds   (Szegő)
fn profile_integral(
    kind: KernelKind,
    domain: &EggDomain,
    p: &[usize],
    a: f64,
    t: &[f64],
    settings: &EvalSettings,
) -> Result<f64> {
    if t.len() != p.len() {
        return Err(Error::InvalidArgument(format!(
            "t has {} coordinates, |P| = {}",
            t.len(),
            p.len()
        )));
    }
    if p.is_empty() {
        return Ok(1.0);
    }
    let simplex = Simplex::for_indices(domain, p);
    if t.iter().any(|&tj| !(tj >= 0.0)) {
        return Err(Error::Domain {
            op: "profile",
            detail: "angular variables must be >= 0".into(),
        });
    }
    let d = 1.0 - simplex.power_sum(t);
    if !(d >= PROFILE_MIN_MARGIN) {
        return Err(Error::Domain {
            op: "profile",
            detail: format!("1 - sum t^2m = {d:e} is below the margin {PROFILE_MIN_MARGIN:e}"),
        });
    }
    let n = domain.n();
    let (norm, outer, power) = match kind {
        KernelKind::Bergman => (factorial(n), a + 1.0, a),
        KernelKind::Szego => (factorial(n - 1), a, a - 1.0),
    };
    let m: Vec<u32> = simplex.exponents.clone();
    let w: Vec<f64> = t.iter().map(|&tj| tj * tj).collect();
    let envelope: f64 = m
        .iter()
        .zip(&w)
        .map(|(&mj, &wj)| {
            let mf = mj as f64;
            if mj == 1 {
                1.0
            } else {
                mf * mf * wj.powi(mj as i32 - 1) + mf
            }
        })
        .product();
    let envelope_power = power + m.iter().map(|&mj| 1.0 - 1.0 / mj as f64).sum::<f64>();
    let integrand = |s: f64| {
        let mut v = (-d * s).exp() * s.powf(power);
        for (&mj, &wj) in m.iter().zip(&w) {
            if mj != 1 {
                v *= scaled_f(mj, wj * s.powf(1.0 / mj as f64));
            }
        }
        v
    };
    let f = SemiInfiniteIntegrand::new(integrand, d, envelope_power.max(0.0))
        .with_envelope(envelope, 1.0);
    let q = integrate_semi_infinite(&f, settings)?;
    Ok(d.powf(outer) * q.value / norm)
}

/// Bergman profile `Φ^B(t)`, `t ∈ Δ`; identically 1 when `P = ∅`.
pub fn phi_b(ctx: &ProfileContext, t: &[f64], settings: &EvalSettings) -> Result<f64> {
    profile_integral(
        KernelKind::Bergman,
        &ctx.domain,
        &ctx.cls.p,
        ctx.exponent_s,
        t,
        settings,
    )
}

/// Szegő profile `Φ^S(t)`; identically 1 when `P = ∅`.
pub fn phi_s(ctx: &ProfileContext, t: &[f64], settings: &EvalSettings) -> Result<f64> {
    profile_integral(
        KernelKind::Szego,
        &ctx.domain,
        &ctx.cls.p,
        ctx.exponent_s,
        t,
        settings,
    )
}

pub fn phi(
    kind: KernelKind,
    ctx: &ProfileContext,
    t: &[f64],
    settings: &EvalSettings,
) -> Result<f64> {
    match kind {
        KernelKind::Bergman => phi_b(ctx, t, settings),
        KernelKind::Szego => phi_s(ctx, t, settings),
    }
}

/// ```text
/// J_K(t) = ∏_{K} m_j² t_j^{2m_j−2}
///          ∫₀^∞ e^{−(1 − Σ_K t_j^{2m_j}) s} ∏_{P\K} f_{m_j}(t_j² s^{1/m_j}) s^{|Q| + |K| + |1/m|_{P\K}} ds
/// ```
pub fn j_k_term(
    ctx: &ProfileContext,
    k: &[usize],
    t: &[f64],
    settings: &EvalSettings,
) -> Result<f64> {
    let p = &ctx.cls.p;
    if t.len() != p.len() {
        return Err(Error::InvalidArgument(format!(
            "t has {} coordinates, |P| = {}",
            t.len(),
            p.len()
        )));
    }
    if !k.iter().all(|j| p.contains(j)) {
        return Err(Error::InvalidArgument("K must be a subset of P".into()));
    }
    let m = ctx.domain.m();
    let pos = |j: usize| p.iter().position(|&x| x == j).expect("j in P");
    let factor: f64 = k
        .iter()
        .map(|&j| {
            let mf = m[j] as f64;
            mf * mf * t[pos(j)].powi(2 * m[j] as i32 - 2)
        })
        .product();
    if factor == 0.0 {
        return Ok(0.0);
    }
    let decay = 1.0
        - k.iter()
            .map(|&j| t[pos(j)].powi(2 * m[j] as i32))
            .sum::<f64>();
    if !(decay > 0.0) {
        return Err(Error::DecayRateNonPositive(decay));
    }
    let rest: Vec<usize> = p.iter().copied().filter(|j| !k.contains(j)).collect();
    let power = ctx.cls.q.len() as f64 + k.len() as f64 + ctx.domain.inverse_sum(&rest);
    let envelope: f64 = rest.iter().map(|&j| m[j] as f64).product();
    let w: Vec<(u32, f64)> = rest
        .iter()
        .map(|&j| (m[j], t[pos(j)] * t[pos(j)]))
        .collect();
    let integrand = |s: f64| {
        let mut v = (-decay * s).exp() * s.powf(power);
        for &(mj, wj) in &w {
            v *= remainder_for_integrand(mj, wj * s.powf(1.0 / mj as f64));
        }
        v
    };
    let f = SemiInfiniteIntegrand::new(integrand, decay, power).with_envelope(envelope, 0.0);
    Ok(factor * integrate_semi_infinite(&f, settings)?.value)
}

/// All subsets of `P` in bitmask order.
pub fn subsets_of_p(ctx: &ProfileContext) -> Vec<Vec<usize>> {
    let p = &ctx.cls.p;
    (0u64..(1u64 << p.len()))
        .map(|mask| {
            p.iter()
                .enumerate()
                .filter(|(b, _)| mask >> b & 1 == 1)
                .map(|(_, &j)| j)
                .collect()
        })
        .collect()
}

/// `(1/n!) (1 − Σ_P t^{2m})^{|Q|+|1/m|_P+1} Σ_{K⊆P} J_K(t)`, which equals `Φ^B(t)`.
pub fn phi_b_from_j_terms(ctx: &ProfileContext, t: &[f64], settings: &EvalSettings) -> Result<f64> {
    let d = 1.0 - ctx.simplex().power_sum(t);
    let mut sum = 0.0;
    for k in subsets_of_p(ctx) {
        sum += j_k_term(ctx, &k, t, settings)?;
    }
    Ok(d.powf(ctx.exponent_b) * sum / factorial(ctx.domain.n()))
}

/// Model `∏_K m_j² t_j^{2m_j−2} / (1 − Σ_K t^{2m})^{|Q|+|K|+|1/m|_{P\K}+1}` for `J_K`.
pub fn j_k_estimate(ctx: &ProfileContext, k: &[usize], t: &[f64]) -> f64 {
    let p = &ctx.cls.p;
    let m = ctx.domain.m();
    let pos = |j: usize| p.iter().position(|&x| x == j).expect("j in P");
    let rest: Vec<usize> = p.iter().copied().filter(|j| !k.contains(j)).collect();
    let mut factor = 1.0;
    let mut sum = 0.0;
    for &j in k {
        let mf = m[j] as f64;
        let tj = t[pos(j)];
        factor *= mf * mf * tj.powi(2 * m[j] as i32 - 2);
        sum += tj.powi(2 * m[j] as i32);
    }
    let e = ctx.cls.q.len() as f64 + k.len() as f64 + ctx.domain.inverse_sum(&rest) + 1.0;
    factor / (1.0 - sum).powf(e)
}

fn falling_factorial(b: f64, n: usize) -> f64 {
    (0..n).map(|i| b - i as f64).product()
}

/// Uncalibrated closed-form profile for `m = (1,…,1,m)` at `T = t^{2m}`:
///
/// ```text
/// Bergman: m T^{1−1/m} (1−T)^{n+1/m}     dⁿ/dTⁿ      [T^{n−1} / (1 − T^{1/m})]
/// Szegő:   m T^{1−1/m} (1−T)^{n−1+1/m}   d^{n−1}/dT^{n−1} [T^{n−2} / (1 − T^{1/m})]
/// ```
///
/// The derivative is taken term by term in `Σ_k T^{n−1+k/m}` and the
/// `T^{1−1/m}` factor is absorbed into the series, so `T = 0` is regular.
pub fn closed_form_raw(
    kind: KernelKind,
    n: usize,
    m: u32,
    t_power: f64,
    settings: &EvalSettings,
) -> Result<LatticeSum> {
    if n < 2 {
        return Err(Error::InvalidArgument("closed forms need n >= 2".into()));
    }
    if m < 2 {
        return Err(Error::InvalidArgument("closed forms need m >= 2".into()));
    }
    if !(0.0..1.0 - PROFILE_MIN_MARGIN).contains(&t_power) {
        return Err(Error::Domain {
            op: "closed_form",
            detail: format!("T must lie in [0, 1 - 1e-4), got {t_power}"),
        });
    }
    let mf = m as f64;
    let (order, shift, outer) = match kind {
        KernelKind::Bergman => (n, n as f64 - 1.0, n as f64 + 1.0 / mf),
        KernelKind::Szego => (n - 1, n as f64 - 2.0, n as f64 - 1.0 + 1.0 / mf),
    };
    let y = t_power.powf(1.0 / mf);
    let term = |nu: &[usize]| {
        let k = nu[0] as f64 + 1.0;
        falling_factorial(shift + k / mf, order) * y.powi(nu[0] as i32)
    };
    let mut sum = sum_lattice_series(1, term, settings)?;
    let pre = mf * (1.0 - t_power).powf(outer);
    sum.value *= pre;
    sum.tail_bound *= pre;
    Ok(sum)
}

/// Calibrated closed-form `Φ^B` for `m = (1,…,1,m)` at `T = t^{2m}`.
pub fn phi_b_closed_special(
    n: usize,
    m: u32,
    t_power: f64,
    settings: &EvalSettings,
) -> Result<f64> {
    let cal = settings.calibration("phi_b_closed_special")?;
    Ok(cal.closed_form_constant
        * closed_form_raw(KernelKind::Bergman, n, m, t_power, settings)?.value)
}

/// Calibrated closed-form `Φ^S` for `m = (1,…,1,m)` at `T = t^{2m}`.
pub fn phi_s_closed_special(
    n: usize,
    m: u32,
    t_power: f64,
    settings: &EvalSettings,
) -> Result<f64> {
    let cal = settings.calibration("phi_s_closed_special")?;
    Ok(cal.closed_form_constant_szego
        * closed_form_raw(KernelKind::Szego, n, m, t_power, settings)?.value)
}

/// `∏_{j∈Q} m_j² |z_j|^{2m_j−2}`.
fn q_factor(ctx: &ProfileContext, z: &[Complex64]) -> f64 {
    ctx.cls
        .q
        .iter()
        .map(|&j| {
            let mf = ctx.domain.m()[j] as f64;
            mf * mf * ctx.domain.weight(j, z[j]).powf(1.0 - 1.0 / mf)
        })
        .product()
}

/// Leading singular term of the kernel at `z`:
/// `c_n ∏_Q m_j² |z_j|^{2m_j−2} Φ(t(z)) / r(z)^{exponent}` with `c_n = n!/π^n`
/// (Bergman) or `(n−1)!/(2π^n)` (Szegő).
pub fn leading_term(
    ctx: &ProfileContext,
    z: &[Complex64],
    kind: KernelKind,
    settings: &EvalSettings,
) -> Result<f64> {
    let polar = to_polar(&ctx.domain, &ctx.cls, z)?;
    let n = ctx.domain.n();
    let pi_n = std::f64::consts::PI.powi(n as i32);
    let c = match kind {
        KernelKind::Bergman => factorial(n) / pi_n,
        KernelKind::Szego => factorial(n - 1) / (2.0 * pi_n),
    };
    let profile = phi(kind, ctx, &polar.t, settings)?;
    Ok(c * q_factor(ctx, z) * profile / polar.r.powf(ctx.exponent(kind)))
}

/// `C_P^B = (n!/π^n) Φ^B(0) = π^{−n} ∏_{j∈P} (m_j / Γ(1/m_j)) Γ(|Q| + |1/m|_P + 1)`.
pub fn profile_at_origin(ctx: &ProfileContext) -> Result<f64> {
    if ctx.cls.p.is_empty() {
        return Err(Error::InvalidArgument(
            "profile_at_origin needs a weakly pseudoconvex point (P nonempty)".into(),
        ));
    }
    let n = ctx.domain.n();
    let ln: f64 = ctx
        .cls
        .p
        .iter()
        .map(|&j| {
            let mf = ctx.domain.m()[j] as f64;
            mf.ln() - crate::special::ln_gamma_pos(1.0 / mf)
        })
        .sum::<f64>()
        + crate::special::ln_gamma_pos(ctx.exponent_b);
    Ok(ln.exp() / std::f64::consts::PI.powi(n as i32))
}

/// Least-squares slope of `ln y` against `ln x`.
pub fn log_log_slope(x: &[f64], y: &[f64]) -> f64 {
    let pts: Vec<(f64, f64)> = x
        .iter()
        .zip(y)
        .filter(|(a, b)| **a > 0.0 && **b > 0.0)
        .map(|(a, b)| (a.ln(), b.ln()))
        .collect();
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx) * (p.0 - mx)).sum();
    sxy / sxx
}

// Least-squares slope over the points with r within one decade of the smallest.
fn local_slope(r: &[f64], y: &[f64]) -> f64 {
    let r_min = r.iter().copied().fold(f64::INFINITY, f64::min);
    let (rs, ys): (Vec<f64>, Vec<f64>) = r
        .iter()
        .zip(y)
        .filter(|(a, _)| **a <= 10.0 * r_min * (1.0 + 1e-12))
        .map(|(a, b)| (*a, *b))
        .unzip();
    if rs.len() < 2 {
        return log_log_slope(r, y);
    }
    log_log_slope(&rs, &ys)
}

/// Scan toward the boundary with `t` fixed.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AsymptoticReport {
    pub t_fixed: Vec<f64>,
    pub r_grid: Vec<f64>,
    pub kernel_values: Vec<f64>,
    pub leading_values: Vec<f64>,
    pub residuals: Vec<f64>,
    /// Error estimate of each `kernel_values` entry.
    pub error_estimates: Vec<f64>,
    /// Least-squares log-log slope over the whole grid.
    pub slope_fit: f64,
    /// Same fit restricted to the last decade of the grid.
    pub slope_local: f64,
    pub slope_expected: f64,
    /// Largest `|residual|` relative to its value at the first grid point,
    /// after adding the evaluation noise floor.
    pub residual_growth: f64,
    pub bounded: bool,
}

/// Growth allowed for a residual before it counts as unbounded.
pub const RESIDUAL_GROWTH_LIMIT: f64 = 10.0;

fn finish_report(
    t_fixed: Vec<f64>,
    r_grid: Vec<f64>,
    values: Vec<(f64, f64, f64)>,
    slope_expected: f64,
    noise: f64,
) -> AsymptoticReport {
    let kernel_values: Vec<f64> = values.iter().map(|v| v.0).collect();
    let leading_values: Vec<f64> = values.iter().map(|v| v.1).collect();
    let error_estimates: Vec<f64> = values.iter().map(|v| v.2).collect();
    let residuals: Vec<f64> = kernel_values
        .iter()
        .zip(&leading_values)
        .map(|(k, l)| k - l)
        .collect();
    let floor = noise * kernel_values.iter().copied().fold(0.0, f64::max);
    let start = residuals.first().map(|r| r.abs()).unwrap_or(0.0) + floor;
    let max_res = residuals.iter().map(|r| r.abs()).fold(0.0, f64::max);
    let residual_growth = if start > 0.0 { max_res / start } else { 0.0 };
    AsymptoticReport {
        slope_fit: log_log_slope(&r_grid, &kernel_values),
        slope_local: local_slope(&r_grid, &kernel_values),
        slope_expected,
        residual_growth,
        bounded: residual_growth <= RESIDUAL_GROWTH_LIMIT,
        t_fixed,
        r_grid,
        kernel_values,
        leading_values,
        residuals,
        error_estimates,
    }
}

/// Evaluates kernel and leading term along `z(t_fixed, r)`, `r ∈ r_grid`.
///
/// The points come from [`from_polar`]: `Q`-coordinates move radially
/// toward `z⁰`, `P`-coordinates are real and non-negative.
pub fn residual_scan(
    ctx: &ProfileContext,
    t_fixed: &[f64],
    r_grid: &[f64],
    kind: KernelKind,
    settings: &EvalSettings,
) -> Result<AsymptoticReport> {
    if r_grid.len() < 2 {
        return Err(Error::InvalidArgument(
            "r grid needs at least two points".into(),
        ));
    }
    if !ctx.simplex().contains(t_fixed) {
        return Err(Error::Domain {
            op: "residual_scan",
            detail: "t_fixed must lie inside the simplex".into(),
        });
    }
    let profile = phi(kind, ctx, t_fixed, settings)?;
    let n = ctx.domain.n();
    let pi_n = std::f64::consts::PI.powi(n as i32);
    let c = match kind {
        KernelKind::Bergman => factorial(n) / pi_n,
        KernelKind::Szego => factorial(n - 1) / (2.0 * pi_n),
    };
    let exponent = ctx.exponent(kind);
    let rows = par::try_map(
        settings.execution,
        r_grid,
        |&r| -> Result<(f64, f64, f64)> {
            let polar = PolarPoint {
                t: t_fixed.to_vec(),
                r,
            };
            let z = from_polar(&ctx.domain, &ctx.cls, &polar)?;
            let k = kernel_integral_of(kind, &ctx.domain, &z, settings)?;
            let lead = c * q_factor(ctx, &z) * profile / r.powf(exponent);
            Ok((k.value, lead, k.error_estimate))
        },
    )?;
    Ok(finish_report(
        t_fixed.to_vec(),
        r_grid.to_vec(),
        rows,
        -exponent,
        10.0 * settings.tol,
    ))
}

/// Geometric grid from `from` to `to` with `steps` points.
pub fn geometric_grid(from: f64, to: f64, steps: usize) -> Result<Vec<f64>> {
    if !(from > 0.0 && to > 0.0) || steps < 2 {
        return Err(Error::InvalidArgument(
            "grid needs positive endpoints and at least two steps".into(),
        ));
    }
    let ratio = (to / from).ln() / (steps - 1) as f64;
    Ok((0..steps)
        .map(|i| {
            if i + 1 == steps {
                to
            } else {
                from * (ratio * i as f64).exp()
            }
        })
        .collect())
}

/// State of the recursive resolution of the profile at level `k`.
#[derive(Debug, Clone, PartialEq)]
pub struct RecursionState {
    pub level: usize,
    pub p: Vec<usize>,
    pub q: Vec<usize>,
    pub a: f64,
    /// Frontier point of the previous level that produced this state
    /// (empty at level 1).
    pub t0: Vec<f64>,
    pub simplex: Simplex,
    domain: EggDomain,
}

impl Serialize for RecursionState {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        let mut st = s.serialize_struct("RecursionState", 5)?;
        st.serialize_field("level", &self.level)?;
        st.serialize_field("P", &one_based(&self.p))?;
        st.serialize_field("Q", &one_based(&self.q))?;
        st.serialize_field("a", &self.a)?;
        st.serialize_field("t0", &self.t0)?;
        st.end()
    }
}

impl RecursionState {
    /// Level 1: `P_1 = P`, `Q_1 = Q`, `a_1 = |Q| + |1/m|_P`.
    pub fn initial(ctx: &ProfileContext) -> Self {
        RecursionState {
            level: 1,
            p: ctx.cls.p.clone(),
            q: ctx.cls.q.clone(),
            a: ctx.exponent_s,
            t0: Vec::new(),
            simplex: ctx.simplex(),
            domain: ctx.domain.clone(),
        }
    }

    pub fn is_terminal(&self) -> bool {
        self.p.is_empty()
    }
}

/// Descends one level at the frontier point `t0 ∈ ∂Δ_k`:
/// `P_{k+1} = {t0_j = 0}`, `Q_{k+1} = {t0_j ≠ 0}`,
/// `a_{k+1} = a_k + |Q_{k+1}| − |1/m|_{Q_{k+1}}`.
pub fn recursion_step(state: &RecursionState, t0: &[f64]) -> Result<RecursionState> {
    let split = simplex_boundary_classify(&state.simplex, t0)?;
    let a = state.a + split.q2.len() as f64 - state.domain.inverse_sum(&split.q2);
    Ok(RecursionState {
        level: state.level + 1,
        simplex: Simplex::for_indices(&state.domain, &split.p2),
        p: split.p2,
        q: split.q2,
        a,
        t0: t0.to_vec(),
        domain: state.domain.clone(),
    })
}

/// `Φ_k(t) = (1/n!) (1 − Σ_{P_k} t^{2m})^{a_k+1} ∫ e^{−s} ∏_{P_k} F(t_j² s^{1/m_j}) s^{a_k} ds`.
pub fn phi_recursive(state: &RecursionState, t: &[f64], settings: &EvalSettings) -> Result<f64> {
    profile_integral(
        KernelKind::Bergman,
        &state.domain,
        &state.p,
        state.a,
        t,
        settings,
    )
}

/// Level-`k` angular point whose level-`(k+1)` chart coordinates are
/// `(t_next, r_next)` with respect to the frontier point `t0`:
/// `Q_{k+1}` coordinates are `(1 − ρ)^{1/2m_j} t0_j`, `P_{k+1}` coordinates
/// `ρ^{1/2m_j} t_next_j`, `ρ = r_next / (1 − Σ t_next^{2m})`.
pub fn lift_to_level(
    state: &RecursionState,
    next: &RecursionState,
    t_next: &[f64],
    r_next: f64,
) -> Result<Vec<f64>> {
    if t_next.len() != next.p.len() {
        return Err(Error::InvalidArgument(format!(
            "t has {} coordinates, |P_k+1| = {}",
            t_next.len(),
            next.p.len()
        )));
    }
    let rho = r_next / (1.0 - next.simplex.power_sum(t_next));
    if !(rho > 0.0 && rho <= 1.0) {
        return Err(Error::Domain {
            op: "lift_to_level",
            detail: format!("(t, r) outside the chart image (rho = {rho})"),
        });
    }
    let m = state.domain.m();
    let mut t = vec![0.0; state.p.len()];
    for (pos, &j) in state.p.iter().enumerate() {
        let two_m = 2.0 * m[j] as f64;
        if let Some(i) = next.p.iter().position(|&x| x == j) {
            t[pos] = rho.powf(1.0 / two_m) * t_next[i];
        } else {
            t[pos] = (1.0 - rho).powf(1.0 / two_m) * next.t0[pos];
        }
    }
    Ok(t)
}

/// Right-hand side of the level-`k` asymptotic relation:
/// `∏_{Q_{k+1}} m_j² t_j^{2m_j−2} Φ_{k+1}(t_{k+1}) / r_{k+1}^{|Q_{k+1}| − |1/m|_{Q_{k+1}}}`.
fn recursion_rhs(
    state: &RecursionState,
    next: &RecursionState,
    t: &[f64],
    phi_next: f64,
    r_next: f64,
) -> f64 {
    let m = state.domain.m();
    let factor: f64 = next
        .q
        .iter()
        .map(|&j| {
            let pos = state
                .p
                .iter()
                .position(|&x| x == j)
                .expect("Q_k+1 within P_k");
            let mf = m[j] as f64;
            mf * mf * t[pos].powi(2 * m[j] as i32 - 2)
        })
        .product();
    let e = next.q.len() as f64 - state.domain.inverse_sum(&next.q);
    factor * phi_next / r_next.powf(e)
}

/// Compares `Φ_k` with the next-level right-hand side along the path
/// `r_{k+1} ∈ path`, `t_{k+1} = t_next` fixed.
pub fn recursion_residual_check(
    state: &RecursionState,
    t0: &[f64],
    t_next: &[f64],
    path: &[f64],
    settings: &EvalSettings,
) -> Result<AsymptoticReport> {
    if path.len() < 2 {
        return Err(Error::InvalidArgument(
            "path needs at least two points".into(),
        ));
    }
    let next = recursion_step(state, t0)?;
    let phi_next = phi_recursive(&next, t_next, settings)?;
    let rows = par::try_map(settings.execution, path, |&r| -> Result<(f64, f64, f64)> {
        let t = lift_to_level(state, &next, t_next, r)?;
        let lhs = phi_recursive(state, &t, settings)?;
        let rhs = recursion_rhs(state, &next, &t, phi_next, r);
        Ok((lhs, rhs, settings.tol * lhs))
    })?;
    let e = next.q.len() as f64 - state.domain.inverse_sum(&next.q);
    Ok(finish_report(
        t_next.to_vec(),
        path.to_vec(),
        rows,
        -e,
        10.0 * settings.tol,
    ))
}

/// Full descent along a chain of frontier points; stops at the first
/// level with `P_k = ∅`.
pub fn resolve(ctx: &ProfileContext, frontier: &[Vec<f64>]) -> Result<Vec<RecursionState>> {
    let mut states = vec![RecursionState::initial(ctx)];
    for t0 in frontier {
        let last = states.last().expect("nonempty");
        if last.is_terminal() {
            break;
        }
        let next = recursion_step(last, t0)?;
        states.push(next);
    }
    Ok(states)
}

/// One sample of a decomposition term against its model estimate.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EstimateRow {
    pub kind: &'static str,
    #[serde(rename = "K")]
    pub k: Vec<usize>,
    /// `r` for I_K, `1 − Σ t^{2m}` for J_K.
    pub distance: f64,
    pub value: f64,
    pub estimate: f64,
    pub ratio: f64,
    pub error_estimate: f64,
}

/// Frontier point in the direction of `t` (all-equal weights when `t = 0`).
pub fn frontier_direction(simplex: &Simplex, t: &[f64]) -> Vec<f64> {
    let s = simplex.power_sum(t);
    if s > 0.0 {
        t.iter()
            .zip(&simplex.exponents)
            .map(|(&tj, &mj)| tj / s.powf(1.0 / (2.0 * mj as f64)))
            .collect()
    } else {
        let w = 1.0 / simplex.dim() as f64;
        simplex
            .exponents
            .iter()
            .map(|&mj| w.powf(1.0 / (2.0 * mj as f64)))
            .collect()
    }
}

fn estimate_rows(
    ctx: &ProfileContext,
    t: &[f64],
    grid: &[f64],
    settings: &EvalSettings,
) -> Result<Vec<EstimateRow>> {
    let mut rows = Vec::new();
    let ks = admissible_subsets(&ctx.domain, &ctx.cls);
    for &r in grid {
        let z = from_polar(&ctx.domain, &ctx.cls, &PolarPoint { t: t.to_vec(), r })?;
        for k in &ks {
            let term = i_k_term(&ctx.domain, &ctx.cls, k, &z, settings)?;
            let est = i_k_estimate(&ctx.domain, k, &z);
            rows.push(EstimateRow {
                kind: "I",
                k: one_based(k),
                distance: r,
                value: term.value,
                estimate: est,
                ratio: if est > 0.0 {
                    term.value / est
                } else {
                    f64::NAN
                },
                error_estimate: term.error_estimate,
            });
        }
    }
    if !ctx.cls.p.is_empty() {
        let simplex = ctx.simplex();
        let dir = frontier_direction(&simplex, t);
        for &d in grid {
            let scale = 1.0 - d;
            let tt: Vec<f64> = dir
                .iter()
                .zip(&simplex.exponents)
                .map(|(&x, &mj)| x * scale.powf(1.0 / (2.0 * mj as f64)))
                .collect();
            for k in subsets_of_p(ctx) {
                let v = j_k_term(ctx, &k, &tt, settings)?;
                let est = j_k_estimate(ctx, &k, &tt);
                rows.push(EstimateRow {
                    kind: "J",
                    k: one_based(&k),
                    distance: d,
                    value: v,
                    estimate: est,
                    ratio: if est > 0.0 { v / est } else { f64::NAN },
                    error_estimate: settings.tol * v.abs(),
                });
            }
        }
    }
    Ok(rows)
}

/// Two-sided constant `max(ratio, 1/ratio)` over rows with a nonzero estimate.
fn estimate_constant(rows: &[EstimateRow]) -> f64 {
    rows.iter()
        .filter(|r| r.ratio.is_finite() && r.ratio > 0.0)
        .map(|r| r.ratio.max(1.0 / r.ratio))
        .fold(1.0, f64::max)
}

/// Ratios of every `I_K` (along the fixed-`t` path) and every `J_K` (along
/// the ray toward the frontier point in the direction of `t`) against their
/// model estimates.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EstimateReport {
    pub rows: Vec<EstimateRow>,
    /// Smallest `C` with `1/C ≤ ratio ≤ C` on every row with a nonzero estimate.
    pub constant: f64,
}

pub fn estimate_check(
    ctx: &ProfileContext,
    t: &[f64],
    grid: &[f64],
    settings: &EvalSettings,
) -> Result<EstimateReport> {
    let rows = estimate_rows(ctx, t, grid, settings)?;
    let constant = estimate_constant(&rows);
    Ok(EstimateReport { rows, constant })
}
