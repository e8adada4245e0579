//! Numerical integration and lattice-series summation.
//!
//! Every integrand in this crate has the shape `e^{−aτ} g(τ)` on `[0, ∞)`
//! with `g` of at most polynomial growth `C τ^p`. The integral is split at a
//! truncation point chosen from that envelope; the finite part goes through
//! globally adaptive Gauss–Kronrod (10/21) panels.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::par::Execution;
use crate::special::{ln_gamma_pos, ln_upper_gamma, PrecisionMode};

/// Constants measured by calibration, see [`crate::kernel::calibrate_constants`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Calibration {
    /// Measured series constant divided by the reference `(1/2π^n) ∏ m_j`.
    pub series_constant_ratio: f64,
    /// Factor applied to the closed-form Bergman profile for `m = (1,…,1,m)`.
    pub closed_form_constant: f64,
    /// Factor applied to the closed-form Szegő profile.
    pub closed_form_constant_szego: f64,
}

/// Tolerances, budgets and calibration constants shared by all evaluators.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalSettings {
    /// Relative tolerance, in (1e−14, 1e−2).
    pub tol: f64,
    /// Panel budget of the adaptive quadrature.
    pub max_subdivisions: usize,
    pub precision: PrecisionMode,
    #[serde(default)]
    pub calibration: Option<Calibration>,
    #[serde(default)]
    pub execution: Execution,
}

impl Default for EvalSettings {
    fn default() -> Self {
        EvalSettings {
            tol: 1e-8,
            max_subdivisions: 4000,
            precision: PrecisionMode::Standard,
            calibration: None,
            execution: Execution::Auto,
        }
    }
}

impl EvalSettings {
    pub fn with_tol(mut self, tol: f64) -> Self {
        self.tol = tol;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.tol > 1e-14 && self.tol < 1e-2) {
            return Err(Error::InvalidArgument(format!(
                "tol must lie in (1e-14, 1e-2), got {}",
                self.tol
            )));
        }
        if self.max_subdivisions < 16 {
            return Err(Error::InvalidArgument(
                "max_subdivisions must be at least 16".into(),
            ));
        }
        Ok(())
    }

    pub fn calibration(&self, op: &'static str) -> Result<Calibration> {
        self.calibration.ok_or(Error::NotCalibrated { op })
    }
}

/// Integrand on `(0, ∞)` with a certified envelope
/// `evaluate(τ) ≤ C τ^p e^{−aτ}` for `τ ≥ T₀`.
pub struct SemiInfiniteIntegrand<F> {
    evaluate: F,
    decay_rate: f64,
    power: f64,
    envelope_constant: f64,
    envelope_start: f64,
}

impl<F: Fn(f64) -> f64> SemiInfiniteIntegrand<F> {
    pub fn new(evaluate: F, decay_rate: f64, power: f64) -> Self {
        SemiInfiniteIntegrand {
            evaluate,
            decay_rate,
            power,
            envelope_constant: 1.0,
            envelope_start: 0.0,
        }
    }

    pub fn with_envelope(mut self, constant: f64, start: f64) -> Self {
        self.envelope_constant = constant;
        self.envelope_start = start;
        self
    }

    pub fn decay_rate(&self) -> f64 {
        self.decay_rate
    }

    /// `ln ∫_T^∞ C τ^p e^{−aτ} dτ`.
    fn ln_tail_bound(&self, t: f64) -> f64 {
        let (a, p) = (self.decay_rate, self.power);
        self.envelope_constant.ln() + ln_upper_gamma(p + 1.0, a * t) - (p + 1.0) * a.ln()
    }

    /// Smallest (up to bisection) `T ≥ T₀` with tail bound below `target`.
    fn truncation_for(&self, target: f64) -> f64 {
        let a = self.decay_rate;
        let ln_target = target.ln();
        let mut lo = self.envelope_start;
        if self.ln_tail_bound(lo) <= ln_target {
            return lo.max(f64::MIN_POSITIVE);
        }
        let mut hi = lo.max((self.power + 1.0) / a).max(1.0 / a);
        while self.ln_tail_bound(hi) > ln_target {
            lo = hi;
            hi *= 2.0;
        }
        for _ in 0..60 {
            let mid = 0.5 * (lo + hi);
            if self.ln_tail_bound(mid) > ln_target {
                lo = mid;
            } else {
                hi = mid;
            }
            if hi - lo <= 1e-6 * hi {
                break;
            }
        }
        hi
    }
}

/// Result of an integration.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Quadrature {
    pub value: f64,
    /// Panel error estimate plus the certified tail bound.
    pub error_estimate: f64,
    pub truncation: f64,
    pub panels: usize,
    pub evaluations: usize,
}

/// Integrates `f` over `[0, ∞)` to relative tolerance `settings.tol`.
pub fn integrate_semi_infinite<F>(
    f: &SemiInfiniteIntegrand<F>,
    settings: &EvalSettings,
) -> Result<Quadrature>
where
    F: Fn(f64) -> f64,
{
    let a = f.decay_rate;
    if !(a > 0.0) || !a.is_finite() {
        return Err(Error::DecayRateNonPositive(a));
    }
    let tol = settings.tol;
    // 0.9 tol for the panels, 0.1 tol for the truncated tail
    let panel_tol = 0.9 * tol;
    let envelope_total =
        f.envelope_constant.ln() + ln_gamma_pos(f.power + 1.0) - (f.power + 1.0) * a.ln();
    let first_cut = f.truncation_for((envelope_total + (1e-3f64).ln()).exp());

    let mut engine = Adaptive::new(&f.evaluate, settings.max_subdivisions);
    engine.seed(0.0, first_cut);
    engine.refine(panel_tol, 0.0)?;

    let mut cut = first_cut;
    for _ in 0..3 {
        let partial = engine.value().abs();
        if partial == 0.0 {
            break;
        }
        let next = f.truncation_for(0.1 * tol * partial);
        if next <= cut {
            break;
        }
        engine.seed(cut, next);
        engine.refine(panel_tol, 0.0)?;
        cut = next;
    }

    let value = engine.value();
    let tail = f.ln_tail_bound(cut).exp();
    let err = engine.error() + tail;
    if err > tol * value.abs() && err > f64::MIN_POSITIVE {
        return Err(Error::ToleranceNotMet {
            op: "integrate_semi_infinite",
            achieved: err / value.abs(),
            requested: tol,
        });
    }
    Ok(Quadrature {
        value,
        error_estimate: err,
        truncation: cut,
        panels: engine.panels.len() + engine.heap.len(),
        evaluations: engine.evaluations,
    })
}

/// Adaptive Gauss–Kronrod on a finite interval `[lo, hi]`.
pub fn integrate_finite<F>(f: F, lo: f64, hi: f64, settings: &EvalSettings) -> Result<Quadrature>
where
    F: Fn(f64) -> f64,
{
    let mut engine = Adaptive::new(&f, settings.max_subdivisions);
    engine.seed_uniform(lo, hi, 4);
    engine.refine(settings.tol, 0.0)?;
    Ok(Quadrature {
        value: engine.value(),
        error_estimate: engine.error(),
        truncation: hi,
        panels: engine.panels.len() + engine.heap.len(),
        evaluations: engine.evaluations,
    })
}

const XGK: [f64; 11] = [
    0.995_657_163_025_808_1,
    0.973_906_528_517_171_7,
    0.930_157_491_355_708_2,
    0.865_063_366_688_984_5,
    0.780_817_726_586_416_9,
    0.679_409_568_299_024_4,
    0.562_757_134_668_604_7,
    0.433_395_394_129_247_2,
    0.294_392_862_701_460_2,
    0.148_874_338_981_631_2,
    0.0,
];
const WGK: [f64; 11] = [
    0.011_694_638_867_371_874,
    0.032_558_162_307_964_73,
    0.054_755_896_574_352,
    0.075_039_674_810_919_95,
    0.093_125_454_583_697_6,
    0.109_387_158_802_297_64,
    0.123_491_976_262_065_85,
    0.134_709_217_311_473_33,
    0.142_775_938_577_060_08,
    0.147_739_104_901_338_5,
    0.149_445_554_002_916_9,
];
const WG: [f64; 5] = [
    0.066_671_344_308_688_14,
    0.149_451_349_150_580_6,
    0.219_086_362_515_982_04,
    0.269_266_719_309_996_36,
    0.295_524_224_714_752_87,
];

#[derive(Debug, Clone, Copy)]
struct Panel {
    lo: f64,
    hi: f64,
    value: f64,
    error: f64,
}

impl PartialEq for Panel {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}
impl Eq for Panel {}
impl PartialOrd for Panel {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Panel {
    // max-heap on error; ties broken by position for determinism
    fn cmp(&self, other: &Self) -> Ordering {
        self.error
            .total_cmp(&other.error)
            .then_with(|| other.lo.total_cmp(&self.lo))
    }
}

struct Adaptive<'f, F> {
    f: &'f F,
    heap: BinaryHeap<Panel>,
    /// Panels too narrow to split further.
    panels: Vec<Panel>,
    evaluations: usize,
    budget: usize,
}

impl<'f, F: Fn(f64) -> f64> Adaptive<'f, F> {
    fn new(f: &'f F, budget: usize) -> Self {
        Adaptive {
            f,
            heap: BinaryHeap::new(),
            panels: Vec::new(),
            evaluations: 0,
            budget,
        }
    }

    // Geometric breakpoints resolve both the origin and the decay scale.
    fn seed(&mut self, lo: f64, hi: f64) {
        let width = hi - lo;
        let mut left = lo;
        let mut step = width * 2f64.powi(-24);
        if lo > 0.0 {
            step = width / 16.0;
        }
        while left < hi {
            let right = (left + step).min(hi);
            let p = self.gk21(left, right);
            self.heap.push(p);
            left = right;
            if lo == 0.0 {
                step = right - lo;
            }
        }
    }

    fn seed_uniform(&mut self, lo: f64, hi: f64, pieces: usize) {
        let h = (hi - lo) / pieces as f64;
        for i in 0..pieces {
            let a = lo + h * i as f64;
            let b = if i + 1 == pieces { hi } else { a + h };
            let p = self.gk21(a, b);
            self.heap.push(p);
        }
    }

    fn gk21(&mut self, lo: f64, hi: f64) -> Panel {
        let center = 0.5 * (lo + hi);
        let half = 0.5 * (hi - lo);
        let fc = (self.f)(center);
        let mut kronrod = fc * WGK[10];
        let mut gauss = 0.0;
        let mut resabs = kronrod.abs();
        let mut fv1 = [0.0; 10];
        let mut fv2 = [0.0; 10];
        for j in 0..10 {
            let dx = half * XGK[j];
            let f1 = (self.f)(center - dx);
            let f2 = (self.f)(center + dx);
            fv1[j] = f1;
            fv2[j] = f2;
            kronrod += WGK[j] * (f1 + f2);
            resabs += WGK[j] * (f1.abs() + f2.abs());
            if j % 2 == 1 {
                gauss += WG[j / 2] * (f1 + f2);
            }
        }
        self.evaluations += 21;
        let mean = 0.5 * kronrod;
        let mut resasc = WGK[10] * (fc - mean).abs();
        for j in 0..10 {
            resasc += WGK[j] * ((fv1[j] - mean).abs() + (fv2[j] - mean).abs());
        }
        let value = kronrod * half;
        let resabs = resabs * half.abs();
        let resasc = resasc * half.abs();
        let mut err = ((kronrod - gauss) * half).abs();
        if resasc != 0.0 && err != 0.0 {
            err = resasc * (200.0 * err / resasc).powf(1.5).min(1.0);
        }
        if resabs > f64::MIN_POSITIVE / (50.0 * f64::EPSILON) {
            err = err.max(50.0 * f64::EPSILON * resabs);
        }
        if !value.is_finite() {
            err = f64::INFINITY;
        }
        Panel {
            lo,
            hi,
            value,
            error: err,
        }
    }

    fn value(&self) -> f64 {
        let mut all: Vec<&Panel> = self.heap.iter().chain(self.panels.iter()).collect();
        all.sort_by(|a, b| a.lo.total_cmp(&b.lo));
        neumaier_sum(all.iter().map(|p| p.value))
    }

    fn error(&self) -> f64 {
        self.heap
            .iter()
            .chain(self.panels.iter())
            .map(|p| p.error)
            .sum()
    }

    fn refine(&mut self, tol: f64, abs_floor: f64) -> Result<()> {
        let mut value = self.value();
        let mut error = self.error();
        loop {
            if !value.is_finite() || error.is_nan() {
                return Err(Error::ToleranceNotMet {
                    op: "adaptive quadrature",
                    achieved: f64::INFINITY,
                    requested: tol,
                });
            }
            if error <= (tol * value.abs()).max(abs_floor) {
                return Ok(());
            }
            if self.heap.len() + self.panels.len() >= self.budget {
                return Err(Error::ToleranceNotMet {
                    op: "adaptive quadrature",
                    achieved: error / value.abs(),
                    requested: tol,
                });
            }
            let Some(worst) = self.heap.pop() else {
                // nothing left to split; accept the roundoff-limited result
                return Ok(());
            };
            let mid = 0.5 * (worst.lo + worst.hi);
            if mid <= worst.lo || mid >= worst.hi || worst.hi - worst.lo < 1e-13 * worst.hi.abs() {
                self.panels.push(worst);
                continue;
            }
            let left = self.gk21(worst.lo, mid);
            let right = self.gk21(mid, worst.hi);
            value += left.value + right.value - worst.value;
            error += left.error + right.error - worst.error;
            self.heap.push(left);
            self.heap.push(right);
            // resynchronise the running sums now and then
            if (self.heap.len() & 63) == 0 {
                value = self.value();
                error = self.error();
            }
        }
    }
}

/// Kahan–Babuška–Neumaier summation.
pub fn neumaier_sum<I: IntoIterator<Item = f64>>(values: I) -> f64 {
    let mut sum = 0.0f64;
    let mut c = 0.0f64;
    for v in values {
        let t = sum + v;
        if sum.abs() >= v.abs() {
            c += (sum - t) + v;
        } else {
            c += (v - t) + sum;
        }
        sum = t;
    }
    sum + c
}

/// Double-exponential (tanh–sinh) rule on `[lo, hi]`, refined level by level.
///
/// Endpoint algebraic singularities cost nothing extra, which is what the
/// nested radial integrals of the monomial-norm oracle need.
pub fn integrate_tanh_sinh<F>(f: F, lo: f64, hi: f64, tol: f64) -> Result<Quadrature>
where
    F: Fn(f64) -> f64,
{
    use std::f64::consts::FRAC_PI_2;
    let half = 0.5 * (hi - lo);
    if half == 0.0 {
        return Ok(Quadrature {
            value: 0.0,
            error_estimate: 0.0,
            truncation: hi,
            panels: 0,
            evaluations: 0,
        });
    }
    // far enough that the omitted end pieces are below 1e-70 for x^{−3/4}
    let t_max = 6.0;
    let node = |t: f64| -> (f64, f64, f64) {
        // distance to each endpoint computed without cancellation
        let s = FRAC_PI_2 * t.sinh();
        let cosh_s = s.cosh();
        let w = FRAC_PI_2 * t.cosh() / (cosh_s * cosh_s);
        let gap = half * 2.0 / (1.0 + (2.0 * s.abs()).exp());
        (gap, w, s)
    };
    let eval_at = |t: f64, evals: &mut usize| -> f64 {
        let (gap, w, s) = node(t);
        if gap <= 0.0 || w == 0.0 {
            return 0.0;
        }
        *evals += 1;
        let x = if s >= 0.0 { hi - gap } else { lo + gap };
        let fx = f(x);
        if fx.is_finite() {
            w * fx
        } else {
            0.0
        }
    };
    let mut evals = 0usize;
    let mut h = 0.5;
    // level 0: all multiples of h
    let mut sum = eval_at(0.0, &mut evals);
    let n0 = (t_max / h) as i64;
    for k in 1..=n0 {
        let t = k as f64 * h;
        sum += eval_at(t, &mut evals) + eval_at(-t, &mut evals);
    }
    let mut estimate = half * h * sum;
    for _level in 0..12 {
        h *= 0.5;
        let n = (t_max / h) as i64;
        let mut k = 1;
        while k <= n {
            let t = k as f64 * h;
            sum += eval_at(t, &mut evals) + eval_at(-t, &mut evals);
            k += 2;
        }
        let next = half * h * sum;
        let diff = (next - estimate).abs();
        estimate = next;
        // error roughly squares per level; the difference overestimates it
        if diff <= tol * estimate.abs() {
            return Ok(Quadrature {
                value: estimate,
                error_estimate: diff,
                truncation: hi,
                panels: 0,
                evaluations: evals,
            });
        }
    }
    Err(Error::ToleranceNotMet {
        op: "integrate_tanh_sinh",
        achieved: f64::NAN,
        requested: tol,
    })
}

/// Sum of a non-negative multi-index series.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LatticeSum {
    pub value: f64,
    pub tail_bound: f64,
    pub terms: usize,
}

/// Most indices visited along one axis before declaring divergence.
const AXIS_BUDGET: usize = 2_000_000;

/// Sums `Σ_ν term(ν)` over `ν ∈ ℕ^dim` for non-negative terms that are
/// eventually log-concave along each axis.
///
/// Axes are summed innermost first; each one stops once the ratio of
/// consecutive (slice) sums is below one and non-increasing, and the
/// geometric tail `a_k ρ / (1 − ρ)` is below `tol/2` of the partial sum.
/// Relative error of the whole sum is then at most `settings.tol`.
pub fn sum_lattice_series<T>(dim: usize, term: T, settings: &EvalSettings) -> Result<LatticeSum>
where
    T: Fn(&[usize]) -> f64,
{
    if dim == 0 {
        return Err(Error::InvalidArgument(
            "lattice dimension must be positive".into(),
        ));
    }
    let mut index = vec![0usize; dim];
    let mut terms = 0usize;
    let (value, tail) = sum_axis(0, &mut index, &term, settings.tol, &mut terms)?;
    Ok(LatticeSum {
        value,
        tail_bound: tail,
        terms,
    })
}

fn sum_axis<T>(
    axis: usize,
    index: &mut Vec<usize>,
    term: &T,
    tol: f64,
    terms: &mut usize,
) -> Result<(f64, f64)>
where
    T: Fn(&[usize]) -> f64,
{
    let dim = index.len();
    let slice = |index: &mut Vec<usize>, terms: &mut usize| -> Result<(f64, f64)> {
        if axis + 1 == dim {
            *terms += 1;
            Ok((term(index), 0.0))
        } else {
            sum_axis(axis + 1, index, term, tol, terms)
        }
    };

    index[axis] = 0;
    let (first, mut inner_tail) = slice(index, terms)?;
    let mut sum = first;
    let mut comp = 0.0;
    let mut prev = first;
    let mut prev_ratio = f64::INFINITY;
    let mut k = 1usize;
    let result = loop {
        if k > AXIS_BUDGET {
            index[axis] = 0;
            return Err(Error::Divergence {
                op: "sum_lattice_series",
                detail: format!("axis {axis} exceeded {AXIS_BUDGET} terms"),
            });
        }
        index[axis] = k;
        let (cur, tail_k) = slice(index, terms)?;
        inner_tail += tail_k;
        // Neumaier step
        let t = sum + cur;
        if sum.abs() >= cur.abs() {
            comp += (sum - t) + cur;
        } else {
            comp += (cur - t) + sum;
        }
        sum = t;
        if cur == 0.0 && prev == 0.0 {
            break (sum + comp, inner_tail);
        }
        if prev > 0.0 {
            let ratio = cur / prev;
            if ratio < 1.0 && ratio <= prev_ratio * (1.0 + 1e-9) {
                let tail = cur * ratio / (1.0 - ratio);
                if tail <= 0.5 * tol * (sum + comp) {
                    break (sum + comp, inner_tail + tail);
                }
            }
            prev_ratio = ratio;
        }
        prev = cur;
        k += 1;
    };
    index[axis] = 0;
    Ok(result)
}
