//! Egg domains `E_m = {Σ |z_j|^{2m_j} < 1}`, boundary classification and
//! the polar chart `(t, r)` attached to a boundary point.
//!
//! Index sets are 0-based in memory and 1-based in serialized output.

use num_complex::Complex64;
use serde::ser::SerializeStruct;
use serde::{Deserialize, Serialize, Serializer};

use crate::error::{Error, Result};

/// Tolerance for membership in `∂E_m` and `∂Δ`.
pub const BOUNDARY_TOL: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq, Eq, Deserialize)]
#[serde(try_from = "DomainRepr")]
pub struct EggDomain {
    m: Vec<u32>,
}

#[derive(Deserialize)]
struct DomainRepr {
    m: Vec<u32>,
}

impl TryFrom<DomainRepr> for EggDomain {
    type Error = Error;
    fn try_from(r: DomainRepr) -> Result<Self> {
        EggDomain::new(r.m)
    }
}

impl Serialize for EggDomain {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        let mut st = s.serialize_struct("EggDomain", 2)?;
        st.serialize_field("m", &self.m)?;
        st.serialize_field("n", &self.n())?;
        st.end()
    }
}

impl EggDomain {
    /// Requires `n ≥ 1`, every `m_j ≥ 1` and at least one `m_j ≥ 2`.
    pub fn new(m: Vec<u32>) -> Result<Self> {
        if m.is_empty() {
            return Err(Error::InvalidArgument("exponent vector m is empty".into()));
        }
        if m.contains(&0) {
            return Err(Error::InvalidArgument(
                "every exponent m_j must be >= 1".into(),
            ));
        }
        if m.iter().all(|&mj| mj == 1) {
            return Err(Error::InvalidArgument(
                "at least one exponent m_j must be >= 2".into(),
            ));
        }
        Ok(EggDomain { m })
    }

    pub fn m(&self) -> &[u32] {
        &self.m
    }

    pub fn n(&self) -> usize {
        self.m.len()
    }

    /// `|1/m|_S = Σ_{j∈S} 1/m_j`.
    pub fn inverse_sum(&self, set: &[usize]) -> f64 {
        set.iter().map(|&j| 1.0 / self.m[j] as f64).sum()
    }

    /// `|z_j|^{2m_j}`.
    pub fn weight(&self, j: usize, z: Complex64) -> f64 {
        z.norm_sqr().powi(self.m[j] as i32)
    }

    fn check_len(&self, z: &[Complex64], what: &str) -> Result<()> {
        if z.len() != self.n() {
            return Err(Error::InvalidArgument(format!(
                "{what} has {} coordinates, domain dimension is {}",
                z.len(),
                self.n()
            )));
        }
        Ok(())
    }
}

/// `r(z) = 1 − Σ |z_j|^{2m_j}`; positive exactly inside `E_m`.
pub fn defining_r(domain: &EggDomain, z: &[Complex64]) -> f64 {
    1.0 - z
        .iter()
        .enumerate()
        .map(|(j, &zj)| domain.weight(j, zj))
        .sum::<f64>()
}

/// A boundary point with its partition `I ⊆ Q`, `P = N \ Q`.
#[derive(Debug, Clone, PartialEq)]
pub struct BoundaryClassification {
    pub z0: Vec<Complex64>,
    pub i: Vec<usize>,
    pub p: Vec<usize>,
    pub q: Vec<usize>,
}

impl BoundaryClassification {
    /// Degenerate rank `k = |P|`.
    pub fn k(&self) -> usize {
        self.p.len()
    }

    pub fn is_strongly_pseudoconvex(&self) -> bool {
        self.p.is_empty()
    }
}

pub(crate) fn one_based(set: &[usize]) -> Vec<usize> {
    set.iter().map(|j| j + 1).collect()
}

impl Serialize for BoundaryClassification {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        let mut st = s.serialize_struct("BoundaryClassification", 5)?;
        st.serialize_field("z0", &self.z0)?;
        st.serialize_field("I", &one_based(&self.i))?;
        st.serialize_field("P", &one_based(&self.p))?;
        st.serialize_field("Q", &one_based(&self.q))?;
        st.serialize_field("k", &self.k())?;
        st.end()
    }
}

/// Classifies `z0 ∈ ∂E_m`. Zero detection is exact.
pub fn classify(domain: &EggDomain, z0: &[Complex64]) -> Result<BoundaryClassification> {
    domain.check_len(z0, "z0")?;
    let residual = defining_r(domain, z0);
    if residual.abs() > BOUNDARY_TOL || !residual.is_finite() {
        return Err(Error::NotOnBoundary {
            residual: residual.abs(),
        });
    }
    let mut cls = BoundaryClassification {
        z0: z0.to_vec(),
        i: Vec::new(),
        p: Vec::new(),
        q: Vec::new(),
    };
    for (j, (&mj, zj)) in domain.m.iter().zip(z0).enumerate() {
        if mj == 1 {
            cls.i.push(j);
        }
        if mj != 1 && *zj == Complex64::new(0.0, 0.0) {
            cls.p.push(j);
        } else {
            cls.q.push(j);
        }
    }
    Ok(cls)
}

/// Angular variables `t = (t_j)_{j∈P}` and radial variable `r`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PolarPoint {
    pub t: Vec<f64>,
    pub r: f64,
}

fn q_denominator(domain: &EggDomain, cls: &BoundaryClassification, z: &[Complex64]) -> Result<f64> {
    let d = 1.0 - cls.q.iter().map(|&j| domain.weight(j, z[j])).sum::<f64>();
    if !(d > 0.0) {
        return Err(Error::DegenerateDenominator { denominator: d });
    }
    Ok(d)
}

fn check_inside(domain: &EggDomain, z: &[Complex64], op: &'static str) -> Result<f64> {
    domain.check_len(z, "z")?;
    let r = defining_r(domain, z);
    if !(r > 0.0) {
        return Err(Error::Domain {
            op,
            detail: format!("point is not inside the domain (r = {r:e})"),
        });
    }
    Ok(r)
}

/// `t_j^{2m_j} = |z_j|^{2m_j} / (1 − Σ_{j∈Q} |z_j|^{2m_j})` for `j ∈ P`, `r = r(z)`.
pub fn to_polar(
    domain: &EggDomain,
    cls: &BoundaryClassification,
    z: &[Complex64],
) -> Result<PolarPoint> {
    let r = check_inside(domain, z, "to_polar")?;
    let d = q_denominator(domain, cls, z)?;
    let t = cls
        .p
        .iter()
        .map(|&j| {
            let w = domain.weight(j, z[j]) / d;
            w.powf(1.0 / (2.0 * domain.m[j] as f64))
        })
        .collect();
    Ok(PolarPoint { t, r })
}

/// Inverse chart: the point with polar coordinates `(t, r)` whose
/// `Q`-coordinates are `(1 − ρ)^{1/(2m_j)} z⁰_j`, `ρ = r / (1 − Σ t^{2m})`,
/// and whose `P`-coordinates are real and non-negative.
pub fn from_polar(
    domain: &EggDomain,
    cls: &BoundaryClassification,
    polar: &PolarPoint,
) -> Result<Vec<Complex64>> {
    if polar.t.len() != cls.p.len() {
        return Err(Error::InvalidArgument(format!(
            "t has {} coordinates, |P| = {}",
            polar.t.len(),
            cls.p.len()
        )));
    }
    let simplex = Simplex::for_indices(domain, &cls.p);
    let s = simplex.power_sum(&polar.t);
    let rho = polar.r / (1.0 - s);
    if !(polar.r > 0.0) || !(rho <= 1.0) || polar.t.iter().any(|&tj| !(tj >= 0.0)) {
        return Err(Error::Domain {
            op: "from_polar",
            detail: format!(
                "(t, r) outside the chart image (sum t^2m = {s}, r = {})",
                polar.r
            ),
        });
    }
    let mut z = vec![Complex64::new(0.0, 0.0); domain.n()];
    for &j in &cls.q {
        let scale = (1.0 - rho).powf(1.0 / (2.0 * domain.m[j] as f64));
        z[j] = cls.z0[j] * scale;
    }
    for (&j, &tj) in cls.p.iter().zip(&polar.t) {
        z[j] = Complex64::new(rho.powf(1.0 / (2.0 * domain.m[j] as f64)) * tj, 0.0);
    }
    Ok(z)
}

/// Reading of the angular bound defining the approach region `U_α`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum UAlphaVariant {
    /// `Σ_{j∈P} t_j^{2m_j} < 1/α`.
    #[default]
    Power,
    /// `Σ_{j∈P} t_j < 1/α`.
    Sum,
}

pub fn in_admissible_region(
    domain: &EggDomain,
    cls: &BoundaryClassification,
    z: &[Complex64],
    alpha: f64,
    variant: UAlphaVariant,
) -> Result<bool> {
    if !(alpha > 1.0) || !alpha.is_finite() {
        return Err(Error::InvalidArgument(format!(
            "alpha must be > 1, got {alpha}"
        )));
    }
    let polar = to_polar(domain, cls, z)?;
    let lhs = match variant {
        UAlphaVariant::Power => Simplex::for_indices(domain, &cls.p).power_sum(&polar.t),
        UAlphaVariant::Sum => polar.t.iter().sum(),
    };
    Ok(lhs < 1.0 / alpha)
}

/// `Δ = {t_j ≥ 0, Σ t_j^{2m_j} < 1}` over a subset of the coordinates.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Simplex {
    /// Global coordinate indices (0-based).
    #[serde(skip)]
    pub indices: Vec<usize>,
    pub exponents: Vec<u32>,
}

impl Simplex {
    pub fn for_indices(domain: &EggDomain, indices: &[usize]) -> Self {
        Simplex {
            indices: indices.to_vec(),
            exponents: indices.iter().map(|&j| domain.m[j]).collect(),
        }
    }

    pub fn dim(&self) -> usize {
        self.exponents.len()
    }

    /// `Σ t_j^{2m_j}`.
    pub fn power_sum(&self, t: &[f64]) -> f64 {
        t.iter()
            .zip(&self.exponents)
            .map(|(&tj, &mj)| tj.powi(2 * mj as i32))
            .sum()
    }

    pub fn contains(&self, t: &[f64]) -> bool {
        t.len() == self.dim() && t.iter().all(|&tj| tj >= 0.0) && self.power_sum(t) < 1.0
    }
}

/// Split of the simplex coordinates at a frontier point `t⁰ ∈ ∂Δ`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SimplexBoundary {
    /// Global indices with `t⁰_j = 0`.
    pub p2: Vec<usize>,
    /// Global indices with `t⁰_j ≠ 0`; never empty.
    pub q2: Vec<usize>,
}

impl Serialize for SimplexBoundary {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        let mut st = s.serialize_struct("SimplexBoundary", 2)?;
        st.serialize_field("P2", &one_based(&self.p2))?;
        st.serialize_field("Q2", &one_based(&self.q2))?;
        st.end()
    }
}

pub fn simplex_boundary_classify(simplex: &Simplex, t0: &[f64]) -> Result<SimplexBoundary> {
    if t0.len() != simplex.dim() {
        return Err(Error::InvalidArgument(format!(
            "t0 has {} coordinates, simplex dimension is {}",
            t0.len(),
            simplex.dim()
        )));
    }
    if t0.iter().any(|&tj| !(tj >= 0.0)) {
        return Err(Error::InvalidArgument("t0 coordinates must be >= 0".into()));
    }
    let sum = simplex.power_sum(t0);
    if sum < 1.0 - BOUNDARY_TOL {
        return Err(Error::InteriorPoint { sum });
    }
    if sum > 1.0 + BOUNDARY_TOL {
        return Err(Error::Domain {
            op: "simplex_boundary_classify",
            detail: format!("t0 lies outside the closed simplex (sum t^2m = {sum})"),
        });
    }
    let mut out = SimplexBoundary {
        p2: Vec::new(),
        q2: Vec::new(),
    };
    for (&j, &tj) in simplex.indices.iter().zip(t0) {
        if tj == 0.0 {
            out.p2.push(j);
        } else {
            out.q2.push(j);
        }
    }
    Ok(out)
}
