//! Command-line front end.
//!
//! Exit codes: 0 success, 2 invalid input, 3 numeric failure. Floats are
//! printed as `{:.16e}` and object keys keep declaration order, so repeated
//! invocations are byte-identical.

use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use num_complex::Complex64;
use serde::Serialize;
use serde_json::{json, Value};
use sha2::{Digest, Sha256};

use crate::asymptotics::{
    estimate_check, frontier_direction, geometric_grid, leading_term, phi, phi_b_closed_special,
    phi_s_closed_special, recursion_residual_check, recursion_step, residual_scan,
    AsymptoticReport, ProfileContext, RecursionState,
};
use crate::domain::{
    classify, defining_r, in_admissible_region, one_based, to_polar, BoundaryClassification,
    EggDomain, Simplex, UAlphaVariant,
};
use crate::error::Error;
use crate::kernel::{
    bergman_series, calibrate_constants, kernel_integral_of, KernelKind, INTEGRAL_MIN_R,
};
use crate::quadrature::EvalSettings;

pub const EXIT_OK: i32 = 0;
pub const EXIT_INVALID: i32 = 2;
pub const EXIT_NUMERIC: i32 = 3;

pub const DEFAULT_SETTINGS_PATH: &str = "eggkernel.json";

#[derive(Parser, Debug)]
#[command(
    name = "eggkernel",
    version,
    about = "Bergman and Szegő kernels of egg domains"
)]
struct Cli {
    #[command(subcommand)]
    verb: Verb,
}

#[derive(Subcommand, Debug)]
enum Verb {
    /// Evaluate a kernel at an interior point.
    Eval(EvalArgs),
    /// Classify a boundary point.
    Classify(ClassifyArgs),
    /// Polar coordinates of an interior point relative to a boundary point.
    Polar(PolarArgs),
    /// Singular profile Φ at an angular point.
    Phi(PhiArgs),
    /// Kernel against its leading term along a fixed-t path.
    LimitScan(ScanArgs),
    /// One step of the recursive resolution of Φ.
    RecursionCheck(RecursionArgs),
    /// Measure the calibration constants and store them in the settings file.
    Calibrate(CommonArgs),
    /// Ratios of I_K and J_K against their model estimates.
    EstimateCheck(EstimateArgs),
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
enum Format {
    Json,
    Csv,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
enum KernelFlag {
    Bergman,
    Szego,
}

impl From<KernelFlag> for KernelKind {
    fn from(k: KernelFlag) -> Self {
        match k {
            KernelFlag::Bergman => KernelKind::Bergman,
            KernelFlag::Szego => KernelKind::Szego,
        }
    }
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
enum MethodFlag {
    Series,
    Integral,
    Both,
    Leading,
    Closed,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
enum VariantFlag {
    Sum,
    Power,
}

#[derive(Args, Debug)]
struct CommonArgs {
    /// Relative tolerance.
    #[arg(long)]
    tol: Option<f64>,
    #[arg(long, value_enum, default_value = "json")]
    format: Format,
    /// Settings file holding tolerances and calibration constants.
    #[arg(long)]
    settings: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct EvalArgs {
    #[arg(long, value_delimiter = ',', required = true)]
    m: Vec<String>,
    /// Interior point as re,im pairs.
    #[arg(
        long,
        value_delimiter = ',',
        allow_hyphen_values = true,
        required = true
    )]
    z: Vec<String>,
    /// Boundary point, needed by `leading` and `closed`.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    z0: Option<Vec<String>>,
    #[arg(long, value_enum, default_value = "bergman")]
    kernel: KernelFlag,
    #[arg(long, value_enum, default_value = "integral")]
    method: MethodFlag,
    #[command(flatten)]
    common: CommonArgs,
}

#[derive(Args, Debug)]
struct ClassifyArgs {
    #[arg(long, value_delimiter = ',', required = true)]
    m: Vec<String>,
    #[arg(
        long,
        value_delimiter = ',',
        allow_hyphen_values = true,
        required = true
    )]
    z0: Vec<String>,
    #[command(flatten)]
    common: CommonArgs,
}

#[derive(Args, Debug)]
struct PolarArgs {
    #[arg(long, value_delimiter = ',', required = true)]
    m: Vec<String>,
    #[arg(
        long,
        value_delimiter = ',',
        allow_hyphen_values = true,
        required = true
    )]
    z0: Vec<String>,
    #[arg(
        long,
        value_delimiter = ',',
        allow_hyphen_values = true,
        required = true
    )]
    z: Vec<String>,
    /// Aperture of the admissible region U_α.
    #[arg(long)]
    alpha: Option<f64>,
    #[arg(long, value_enum, default_value = "power")]
    ualpha_variant: VariantFlag,
    #[command(flatten)]
    common: CommonArgs,
}

#[derive(Args, Debug)]
struct PhiArgs {
    #[arg(long, value_delimiter = ',', required = true)]
    m: Vec<String>,
    #[arg(
        long,
        value_delimiter = ',',
        allow_hyphen_values = true,
        required = true
    )]
    z0: Vec<String>,
    /// Angular point, one coordinate per index in P.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    t: Option<Vec<String>>,
    #[arg(long, value_enum, default_value = "bergman")]
    kernel: KernelFlag,
    #[arg(long, value_enum, default_value = "integral")]
    method: MethodFlag,
    #[command(flatten)]
    common: CommonArgs,
}

#[derive(Args, Debug)]
struct ScanArgs {
    #[arg(long, value_delimiter = ',', required = true)]
    m: Vec<String>,
    #[arg(
        long,
        value_delimiter = ',',
        allow_hyphen_values = true,
        required = true
    )]
    z0: Vec<String>,
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    t: Option<Vec<String>>,
    #[arg(long, value_enum, default_value = "bergman")]
    kernel: KernelFlag,
    #[arg(long, default_value_t = 0.1)]
    r_from: f64,
    #[arg(long, default_value_t = 0.001)]
    r_to: f64,
    #[arg(long, default_value_t = 20)]
    steps: usize,
    #[command(flatten)]
    common: CommonArgs,
}

#[derive(Args, Debug)]
struct RecursionArgs {
    #[arg(long, value_delimiter = ',', required = true)]
    m: Vec<String>,
    #[arg(
        long,
        value_delimiter = ',',
        allow_hyphen_values = true,
        required = true
    )]
    z0: Vec<String>,
    /// Frontier point of the level-1 simplex.
    #[arg(
        long,
        value_delimiter = ',',
        allow_hyphen_values = true,
        required = true
    )]
    t0: Vec<String>,
    /// Fixed angular point of the next level.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    t: Option<Vec<String>>,
    #[arg(long, default_value_t = 0.1)]
    r_from: f64,
    #[arg(long, default_value_t = 2e-4)]
    r_to: f64,
    #[arg(long, default_value_t = 16)]
    steps: usize,
    #[command(flatten)]
    common: CommonArgs,
}

#[derive(Args, Debug)]
struct EstimateArgs {
    #[arg(long, value_delimiter = ',', required = true)]
    m: Vec<String>,
    #[arg(
        long,
        value_delimiter = ',',
        allow_hyphen_values = true,
        required = true
    )]
    z0: Vec<String>,
    /// Angular point of the I_K scan; its direction also fixes the J_K ray.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    t: Option<Vec<String>>,
    #[arg(long, default_value_t = 0.1)]
    r_from: f64,
    #[arg(long, default_value_t = 0.001)]
    r_to: f64,
    #[arg(long, default_value_t = 12)]
    steps: usize,
    #[command(flatten)]
    common: CommonArgs,
}

/// Failure of a command, carrying its exit code.
#[derive(Debug)]
struct Failure {
    code: i32,
    message: String,
}

impl Failure {
    fn flag(flag: &str, detail: impl std::fmt::Display) -> Self {
        Failure {
            code: EXIT_INVALID,
            message: format!("invalid value for --{flag}: {detail}"),
        }
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let code = if e.is_numeric() {
            EXIT_NUMERIC
        } else {
            EXIT_INVALID
        };
        let message = match &e {
            Error::NotCalibrated { .. } => format!("{e} (pass its output file via --settings)"),
            _ if e.is_numeric() => format!("numeric failure: {e}"),
            _ => e.to_string(),
        };
        Failure { code, message }
    }
}

type CliResult<T> = std::result::Result<T, Failure>;

/// Parses `argv` (including the program name), writes the result to `out`
/// and diagnostics to `err`, and returns the exit code.
pub fn run<I, T>(argv: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() {
                EXIT_INVALID
            } else {
                EXIT_OK
            };
            let rendered = e.render().to_string();
            if code == EXIT_OK {
                let _ = write!(out, "{rendered}");
            } else {
                let _ = write!(err, "{rendered}");
            }
            return code;
        }
    };
    match dispatch(cli.verb) {
        Ok(text) => match out.write_all(text.as_bytes()) {
            Ok(()) => EXIT_OK,
            Err(e) => {
                let _ = writeln!(err, "error: cannot write output: {e}");
                EXIT_INVALID
            }
        },
        Err(f) => {
            let _ = writeln!(err, "error: {}", f.message);
            f.code
        }
    }
}

fn dispatch(verb: Verb) -> CliResult<String> {
    match verb {
        Verb::Eval(a) => cmd_eval(a),
        Verb::Classify(a) => cmd_classify(a),
        Verb::Polar(a) => cmd_polar(a),
        Verb::Phi(a) => cmd_phi(a),
        Verb::LimitScan(a) => cmd_limit_scan(a),
        Verb::RecursionCheck(a) => cmd_recursion(a),
        Verb::Calibrate(a) => cmd_calibrate(a),
        Verb::EstimateCheck(a) => cmd_estimate(a),
    }
}

fn parse_domain(raw: &[String]) -> CliResult<EggDomain> {
    let m = raw
        .iter()
        .map(|s| {
            s.trim()
                .parse::<u32>()
                .map_err(|e| Failure::flag("m", format!("{s:?}: {e}")))
        })
        .collect::<CliResult<Vec<u32>>>()?;
    EggDomain::new(m).map_err(|e| Failure::flag("m", e))
}

fn parse_reals(flag: &str, raw: &[String]) -> CliResult<Vec<f64>> {
    raw.iter()
        .map(|s| {
            let v: f64 = s
                .trim()
                .parse()
                .map_err(|e| Failure::flag(flag, format!("{s:?}: {e}")))?;
            if v.is_finite() {
                Ok(v)
            } else {
                Err(Failure::flag(flag, format!("{s:?} is not finite")))
            }
        })
        .collect()
}

fn parse_complex(flag: &str, raw: &[String], n: usize) -> CliResult<Vec<Complex64>> {
    let v = parse_reals(flag, raw)?;
    if v.len() != 2 * n {
        return Err(Failure::flag(
            flag,
            format!(
                "expected {} numbers (re,im pairs for n = {n}), got {}",
                2 * n,
                v.len()
            ),
        ));
    }
    Ok(v.chunks(2).map(|c| Complex64::new(c[0], c[1])).collect())
}

fn parse_boundary(domain: &EggDomain, raw: &[String]) -> CliResult<BoundaryClassification> {
    let z0 = parse_complex("z0", raw, domain.n())?;
    classify(domain, &z0).map_err(|e| Failure::flag("z0", e))
}

fn parse_t(flag: &str, raw: &Option<Vec<String>>, simplex: &Simplex) -> CliResult<Vec<f64>> {
    let t = match raw {
        Some(v) => parse_reals(flag, v)?,
        None => vec![0.0; simplex.dim()],
    };
    if t.len() != simplex.dim() {
        return Err(Failure::flag(
            flag,
            format!(
                "expected {} coordinates (one per index in P), got {}",
                simplex.dim(),
                t.len()
            ),
        ));
    }
    if !simplex.contains(&t) {
        return Err(Failure::flag(
            flag,
            "point must satisfy t_j >= 0 and sum t_j^2m_j < 1",
        ));
    }
    Ok(t)
}

fn check_grid(from: f64, to: f64, steps: usize) -> CliResult<Vec<f64>> {
    if !(from > 0.0 && from < 1.0) {
        return Err(Failure::flag("r-from", "must lie in (0, 1)"));
    }
    if !(to > 0.0 && to < from) {
        return Err(Failure::flag("r-to", "must lie in (0, r-from)"));
    }
    if steps < 2 {
        return Err(Failure::flag("steps", "must be at least 2"));
    }
    Ok(geometric_grid(from, to, steps)?)
}

/// Loads the settings file (explicit path must exist; the default path is
/// optional) and applies `--tol`.
fn load_settings(common: &CommonArgs) -> CliResult<EvalSettings> {
    let (path, explicit) = match &common.settings {
        Some(p) => (p.clone(), true),
        None => (PathBuf::from(DEFAULT_SETTINGS_PATH), false),
    };
    let mut settings = if path.exists() {
        let text = std::fs::read_to_string(&path)
            .map_err(|e| Failure::flag("settings", format!("{}: {e}", path.display())))?;
        serde_json::from_str::<EvalSettings>(&text)
            .map_err(|e| Failure::flag("settings", format!("{}: {e}", path.display())))?
    } else if explicit {
        return Err(Failure::flag(
            "settings",
            format!("{} does not exist", path.display()),
        ));
    } else {
        EvalSettings::default()
    };
    if let Some(tol) = common.tol {
        settings.tol = tol;
        settings.validate().map_err(|e| Failure::flag("tol", e))?;
    } else {
        settings
            .validate()
            .map_err(|e| Failure::flag("settings", e))?;
    }
    Ok(settings)
}

/// First 16 hex digits of the SHA-256 of the canonical settings JSON.
pub fn settings_digest(settings: &EvalSettings) -> String {
    let canonical = render_json(&serde_json::to_value(settings).expect("settings serialize"));
    let hash = Sha256::digest(canonical.as_bytes());
    hash.iter().take(8).map(|b| format!("{b:02x}")).collect()
}

/// Fixed float format used for every emitted number.
pub fn format_float(x: f64) -> String {
    if x.is_finite() {
        format!("{x:.16e}")
    } else {
        "null".into()
    }
}

fn render_json(v: &Value) -> String {
    let mut s = String::new();
    write_json(v, &mut s);
    s
}

fn write_json(v: &Value, s: &mut String) {
    match v {
        Value::Null => s.push_str("null"),
        Value::Bool(b) => s.push_str(if *b { "true" } else { "false" }),
        Value::Number(n) => {
            if n.is_f64() {
                s.push_str(&format_float(n.as_f64().unwrap_or(f64::NAN)));
            } else {
                s.push_str(&n.to_string());
            }
        }
        Value::String(t) => s.push_str(&Value::String(t.clone()).to_string()),
        Value::Array(a) => {
            s.push('[');
            for (i, x) in a.iter().enumerate() {
                if i > 0 {
                    s.push(',');
                }
                write_json(x, s);
            }
            s.push(']');
        }
        Value::Object(o) => {
            s.push('{');
            for (i, (k, x)) in o.iter().enumerate() {
                if i > 0 {
                    s.push(',');
                }
                s.push_str(&Value::String(k.clone()).to_string());
                s.push(':');
                write_json(x, s);
            }
            s.push('}');
        }
    }
}

fn to_value<T: Serialize>(x: &T) -> Value {
    serde_json::to_value(x).expect("output types serialize")
}

fn emit_json(v: Value) -> String {
    let mut s = render_json(&v);
    s.push('\n');
    s
}

fn emit_csv(header: &[&str], rows: Vec<Vec<String>>) -> CliResult<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let fail = |e: csv::Error| Failure {
        code: EXIT_INVALID,
        message: format!("csv output: {e}"),
    };
    w.write_record(header).map_err(fail)?;
    for r in rows {
        w.write_record(&r).map_err(fail)?;
    }
    let bytes = w.into_inner().map_err(|e| Failure {
        code: EXIT_INVALID,
        message: format!("csv output: {e}"),
    })?;
    Ok(String::from_utf8(bytes).expect("csv is utf-8"))
}

fn complex_json(z: &[Complex64]) -> Value {
    Value::Array(z.iter().map(|c| json!([c.re, c.im])).collect())
}

fn index_list(set: &[usize]) -> String {
    one_based(set)
        .iter()
        .map(|j| j.to_string())
        .collect::<Vec<_>>()
        .join(";")
}

fn kernel_name(k: KernelKind) -> &'static str {
    match k {
        KernelKind::Bergman => "bergman",
        KernelKind::Szego => "szego",
    }
}

// Domain m = (1,…,1,m) with the weak point P = {n}; returns m.
fn closed_form_shape(domain: &EggDomain, cls: &BoundaryClassification) -> CliResult<u32> {
    let n = domain.n();
    let m = domain.m();
    let shape_ok = n >= 2 && m[..n - 1].iter().all(|&x| x == 1) && m[n - 1] >= 2;
    if !shape_ok {
        return Err(Failure::flag(
            "method",
            "closed forms need m = (1,...,1,m) with m >= 2",
        ));
    }
    if cls.p != [n - 1] {
        return Err(Failure::flag("method", "closed forms need z0 with P = {n}"));
    }
    Ok(m[n - 1])
}

fn closed_profile(
    kind: KernelKind,
    domain: &EggDomain,
    cls: &BoundaryClassification,
    t: &[f64],
    settings: &EvalSettings,
) -> CliResult<f64> {
    let m = closed_form_shape(domain, cls)?;
    let t_power = t[0].powi(2 * m as i32);
    let n = domain.n();
    Ok(match kind {
        KernelKind::Bergman => phi_b_closed_special(n, m, t_power, settings)?,
        KernelKind::Szego => phi_s_closed_special(n, m, t_power, settings)?,
    })
}

fn cmd_eval(a: EvalArgs) -> CliResult<String> {
    let domain = parse_domain(&a.m)?;
    let z = parse_complex("z", &a.z, domain.n())?;
    let r = defining_r(&domain, &z);
    if !(r > 0.0) {
        return Err(Failure::flag(
            "z",
            format!("point is not inside the domain (r = {r:e})"),
        ));
    }
    if a.method != MethodFlag::Series && r < INTEGRAL_MIN_R {
        return Err(Failure::flag(
            "z",
            format!("r(z) = {r:e} is below the integral threshold {INTEGRAL_MIN_R:e}"),
        ));
    }
    let kind = KernelKind::from(a.kernel);
    if kind == KernelKind::Szego && matches!(a.method, MethodFlag::Series | MethodFlag::Both) {
        return Err(Failure::flag(
            "method",
            "the series method is available for the Bergman kernel only",
        ));
    }
    let cls = match (&a.z0, a.method) {
        (Some(raw), _) => Some(parse_boundary(&domain, raw)?),
        (None, MethodFlag::Leading | MethodFlag::Closed) => {
            return Err(Failure::flag(
                "z0",
                "required by --method leading and --method closed",
            ))
        }
        (None, _) => None,
    };
    let settings = load_settings(&a.common)?;
    let mut results: Vec<(&'static str, f64, f64)> = Vec::new();
    let mut uses_calibration = false;
    match a.method {
        MethodFlag::Integral => {
            let v = kernel_integral_of(kind, &domain, &z, &settings)?;
            results.push(("integral", v.value, v.error_estimate));
        }
        MethodFlag::Series => {
            uses_calibration = true;
            let v = bergman_series(&domain, &z, &settings)?;
            results.push(("series", v.value, v.error_estimate));
        }
        MethodFlag::Both => {
            uses_calibration = true;
            let s = bergman_series(&domain, &z, &settings)?;
            let i = kernel_integral_of(kind, &domain, &z, &settings)?;
            results.push(("series", s.value, s.error_estimate));
            results.push(("integral", i.value, i.error_estimate));
        }
        MethodFlag::Leading | MethodFlag::Closed => {
            let cls = cls.as_ref().expect("checked above");
            let ctx = ProfileContext::new(&domain, cls)?;
            let polar = to_polar(&domain, cls, &z).map_err(|e| Failure::flag("z", e))?;
            let lead = leading_term(&ctx, &z, kind, &settings)?;
            if a.method == MethodFlag::Leading {
                results.push(("leading", lead, settings.tol * lead.abs()));
            } else {
                uses_calibration = true;
                let profile = phi(kind, &ctx, &polar.t, &settings)?;
                let closed = closed_profile(kind, &domain, cls, &polar.t, &settings)?;
                let v = lead / profile * closed;
                results.push(("closed", v, settings.tol * v.abs()));
            }
        }
    }
    let digest = settings_digest(&settings);
    if a.common.format == Format::Csv {
        let rows = results
            .iter()
            .map(|(m, v, e)| {
                vec![
                    kernel_name(kind).to_string(),
                    m.to_string(),
                    format_float(*v),
                    format_float(*e),
                    format_float(r),
                ]
            })
            .collect();
        return emit_csv(&["kernel", "method", "value", "error_estimate", "r"], rows);
    }
    let mut obj = serde_json::Map::new();
    obj.insert("domain".into(), to_value(&domain));
    obj.insert("z".into(), complex_json(&z));
    obj.insert("kernel".into(), json!(kernel_name(kind)));
    if results.len() == 1 {
        let (m, v, e) = results[0];
        obj.insert("method".into(), json!(m));
        obj.insert("value".into(), json!(v));
        obj.insert("error_estimate".into(), json!(e));
    } else {
        obj.insert("method".into(), json!("both"));
        for (m, v, e) in &results {
            obj.insert((*m).into(), json!({"value": v, "error_estimate": e}));
        }
        let (s, i) = (results[0].1, results[1].1);
        obj.insert("rel_diff".into(), json!((s - i).abs() / i.abs()));
    }
    obj.insert("r".into(), json!(r));
    if uses_calibration {
        obj.insert("calibration".into(), to_value(&settings.calibration));
    }
    obj.insert("settings_digest".into(), json!(digest));
    Ok(emit_json(Value::Object(obj)))
}

fn cmd_classify(a: ClassifyArgs) -> CliResult<String> {
    let domain = parse_domain(&a.m)?;
    let cls = parse_boundary(&domain, &a.z0)?;
    if a.common.format == Format::Csv {
        return emit_csv(
            &["I", "P", "Q", "k"],
            vec![vec![
                index_list(&cls.i),
                index_list(&cls.p),
                index_list(&cls.q),
                cls.k().to_string(),
            ]],
        );
    }
    Ok(emit_json(to_value(&cls)))
}

fn cmd_polar(a: PolarArgs) -> CliResult<String> {
    let domain = parse_domain(&a.m)?;
    let cls = parse_boundary(&domain, &a.z0)?;
    let z = parse_complex("z", &a.z, domain.n())?;
    if let Some(alpha) = a.alpha {
        if !(alpha > 1.0 && alpha.is_finite()) {
            return Err(Failure::flag("alpha", "must be a finite number > 1"));
        }
    }
    let polar = to_polar(&domain, &cls, &z).map_err(|e| Failure::flag("z", e))?;
    let variant = match a.ualpha_variant {
        VariantFlag::Power => UAlphaVariant::Power,
        VariantFlag::Sum => UAlphaVariant::Sum,
    };
    let admissible = match a.alpha {
        Some(alpha) => Some(in_admissible_region(&domain, &cls, &z, alpha, variant)?),
        None => None,
    };
    if a.common.format == Format::Csv {
        let mut header: Vec<String> = vec!["r".into()];
        header.extend(one_based(&cls.p).iter().map(|j| format!("t_{j}")));
        header.push("admissible".into());
        let mut row = vec![format_float(polar.r)];
        row.extend(polar.t.iter().map(|&x| format_float(x)));
        row.push(admissible.map(|b| b.to_string()).unwrap_or_default());
        let h: Vec<&str> = header.iter().map(String::as_str).collect();
        return emit_csv(&h, vec![row]);
    }
    let mut obj = match to_value(&polar) {
        Value::Object(o) => o,
        _ => unreachable!("PolarPoint is a struct"),
    };
    if let Some(b) = admissible {
        obj.insert("alpha".into(), json!(a.alpha));
        obj.insert("ualpha_variant".into(), to_value(&variant));
        obj.insert("admissible".into(), json!(b));
    }
    Ok(emit_json(Value::Object(obj)))
}

fn cmd_phi(a: PhiArgs) -> CliResult<String> {
    let domain = parse_domain(&a.m)?;
    let cls = parse_boundary(&domain, &a.z0)?;
    let ctx = ProfileContext::new(&domain, &cls)?;
    let t = parse_t("t", &a.t, &ctx.simplex())?;
    let kind = KernelKind::from(a.kernel);
    let (method, settings) = match a.method {
        MethodFlag::Integral => ("integral", load_settings(&a.common)?),
        MethodFlag::Closed => {
            closed_form_shape(&domain, &cls)?;
            ("closed", load_settings(&a.common)?)
        }
        _ => return Err(Failure::flag("method", "phi supports integral or closed")),
    };
    let value = match a.method {
        MethodFlag::Closed => closed_profile(kind, &domain, &cls, &t, &settings)?,
        _ => phi(kind, &ctx, &t, &settings)?,
    };
    let error_estimate = settings.tol * value.abs();
    if a.common.format == Format::Csv {
        let mut header: Vec<String> = one_based(&cls.p).iter().map(|j| format!("t_{j}")).collect();
        header.extend(["kernel", "method", "value", "error_estimate"].map(String::from));
        let mut row: Vec<String> = t.iter().map(|&x| format_float(x)).collect();
        row.extend([
            kernel_name(kind).to_string(),
            method.to_string(),
            format_float(value),
            format_float(error_estimate),
        ]);
        let h: Vec<&str> = header.iter().map(String::as_str).collect();
        return emit_csv(&h, vec![row]);
    }
    Ok(emit_json(json!({
        "domain": to_value(&domain),
        "boundary": to_value(&cls),
        "t": t,
        "kernel": kernel_name(kind),
        "method": method,
        "value": value,
        "error_estimate": error_estimate,
        "settings_digest": settings_digest(&settings),
    })))
}

fn report_output(
    report: &AsymptoticReport,
    format: Format,
    extra: Vec<(&str, Value)>,
) -> CliResult<String> {
    if format == Format::Csv {
        let rows = (0..report.r_grid.len())
            .map(|i| {
                vec![
                    format_float(report.r_grid[i]),
                    format_float(report.kernel_values[i]),
                    format_float(report.leading_values[i]),
                    format_float(report.residuals[i]),
                    format_float(report.error_estimates[i]),
                ]
            })
            .collect();
        return emit_csv(
            &["r", "value", "leading", "residual", "error_estimate"],
            rows,
        );
    }
    let mut obj = match to_value(report) {
        Value::Object(o) => o,
        _ => unreachable!("report is a struct"),
    };
    for (k, v) in extra {
        obj.insert(k.into(), v);
    }
    Ok(emit_json(Value::Object(obj)))
}

fn cmd_limit_scan(a: ScanArgs) -> CliResult<String> {
    let domain = parse_domain(&a.m)?;
    let cls = parse_boundary(&domain, &a.z0)?;
    let ctx = ProfileContext::new(&domain, &cls)?;
    let t = parse_t("t", &a.t, &ctx.simplex())?;
    let grid = check_grid(a.r_from, a.r_to, a.steps)?;
    let settings = load_settings(&a.common)?;
    let kind = KernelKind::from(a.kernel);
    let report = residual_scan(&ctx, &t, &grid, kind, &settings)?;
    report_output(
        &report,
        a.common.format,
        vec![
            ("kernel", json!(kernel_name(kind))),
            ("settings_digest", json!(settings_digest(&settings))),
        ],
    )
}

fn cmd_recursion(a: RecursionArgs) -> CliResult<String> {
    let domain = parse_domain(&a.m)?;
    let cls = parse_boundary(&domain, &a.z0)?;
    let ctx = ProfileContext::new(&domain, &cls)?;
    let state = RecursionState::initial(&ctx);
    if state.is_terminal() {
        return Err(Failure::flag(
            "z0",
            "strongly pseudoconvex point: the profile is constant",
        ));
    }
    let t0 = parse_reals("t0", &a.t0)?;
    let next = recursion_step(&state, &t0).map_err(|e| Failure::flag("t0", e))?;
    let t = parse_t("t", &a.t, &next.simplex)?;
    let grid = check_grid(a.r_from, a.r_to, a.steps)?;
    let settings = load_settings(&a.common)?;
    let report = recursion_residual_check(&state, &t0, &t, &grid, &settings)?;
    let mut chain = vec![state, next];
    while let Some(cur) = chain.last().filter(|s| !s.is_terminal()) {
        let frontier = frontier_direction(&cur.simplex, &vec![0.0; cur.simplex.dim()]);
        let deeper = recursion_step(cur, &frontier)?;
        chain.push(deeper);
    }
    report_output(
        &report,
        a.common.format,
        vec![
            ("levels", to_value(&chain)),
            ("depth", json!(chain.len() - 1)),
            ("settings_digest", json!(settings_digest(&settings))),
        ],
    )
}

fn cmd_calibrate(a: CommonArgs) -> CliResult<String> {
    let base = load_settings_or_default(&a)?;
    let (settings, report) = calibrate_constants(&base)?;
    let path = a
        .settings
        .clone()
        .unwrap_or_else(|| PathBuf::from(DEFAULT_SETTINGS_PATH));
    write_settings(&path, &settings)?;
    if a.format == Format::Csv {
        let v = to_value(&report);
        let rows = v
            .as_object()
            .expect("report is a struct")
            .iter()
            .map(|(k, x)| vec![k.clone(), format_float(x.as_f64().unwrap_or(f64::NAN))])
            .collect();
        return emit_csv(&["quantity", "value"], rows);
    }
    Ok(emit_json(json!({
        "report": to_value(&report),
        "settings_path": path.display().to_string(),
        "settings_digest": settings_digest(&settings),
    })))
}

// Calibration may create the settings file, so a missing explicit path is fine.
fn load_settings_or_default(a: &CommonArgs) -> CliResult<EvalSettings> {
    match &a.settings {
        Some(p) if !p.exists() => {
            let mut s = EvalSettings::default();
            if let Some(tol) = a.tol {
                s.tol = tol;
            }
            s.validate().map_err(|e| Failure::flag("tol", e))?;
            Ok(s)
        }
        _ => load_settings(a),
    }
}

fn write_settings(path: &Path, settings: &EvalSettings) -> CliResult<()> {
    let mut text = render_json(&to_value(settings));
    text.push('\n');
    std::fs::write(path, text)
        .map_err(|e| Failure::flag("settings", format!("cannot write {}: {e}", path.display())))
}

fn cmd_estimate(a: EstimateArgs) -> CliResult<String> {
    let domain = parse_domain(&a.m)?;
    let cls = parse_boundary(&domain, &a.z0)?;
    let ctx = ProfileContext::new(&domain, &cls)?;
    let t = parse_t("t", &a.t, &ctx.simplex())?;
    let grid = check_grid(a.r_from, a.r_to, a.steps)?;
    let settings = load_settings(&a.common)?;
    let report = estimate_check(&ctx, &t, &grid, &settings)?;
    let rows = &report.rows;
    let constant = report.constant;
    if a.common.format == Format::Csv {
        let out = rows
            .iter()
            .map(|r| {
                vec![
                    r.kind.to_string(),
                    r.k.iter()
                        .map(|j| j.to_string())
                        .collect::<Vec<_>>()
                        .join(";"),
                    format_float(r.distance),
                    format_float(r.value),
                    format_float(r.estimate),
                    format_float(r.ratio),
                    format_float(r.error_estimate),
                ]
            })
            .collect();
        return emit_csv(
            &[
                "kind",
                "K",
                "distance",
                "value",
                "estimate",
                "ratio",
                "error_estimate",
            ],
            out,
        );
    }
    Ok(emit_json(json!({
        "domain": to_value(&domain),
        "boundary": to_value(&cls),
        "t": t,
        "rows": to_value(rows),
        "constant": constant,
        "settings_digest": settings_digest(&settings),
    })))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn run_str(args: &[&str]) -> (i32, String, String) {
        let mut out = Vec::new();
        let mut err = Vec::new();
        let mut argv = vec!["eggkernel"];
        argv.extend_from_slice(args);
        let code = run(argv, &mut out, &mut err);
        (
            code,
            String::from_utf8(out).unwrap(),
            String::from_utf8(err).unwrap(),
        )
    }

    #[test]
    fn classify_example() {
        let (code, out, _) = run_str(&["classify", "--m", "1,2", "--z0", "1,0,0,0"]);
        assert_eq!(code, 0);
        assert!(out.contains(r#""I":[1],"P":[2],"Q":[1],"k":1"#), "{out}");
    }

    #[test]
    fn float_format_is_fixed() {
        assert_eq!(format_float(0.75), "7.5000000000000000e-1");
        assert_eq!(format_float(f64::NAN), "null");
    }

    #[test]
    fn bad_flags_name_the_flag() {
        let (code, _, err) = run_str(&["classify", "--m", "1,x", "--z0", "1,0,0,0"]);
        assert_eq!(code, 2);
        assert!(err.contains("--m"), "{err}");
        let (code, _, err) = run_str(&["classify", "--m", "1,2", "--z0", "0.5,0,0,0"]);
        assert_eq!(code, 2);
        assert!(err.contains("--z0"), "{err}");
        let (code, _, err) = run_str(&["eval", "--m", "1,2", "--z", "0.1,0,0,0", "--tol", "1"]);
        assert_eq!(code, 2);
        assert!(err.contains("--tol"), "{err}");
        let (code, _, err) = run_str(&[
            "eval",
            "--m",
            "1,2",
            "--z",
            "0.1,0,0,0",
            "--kernel",
            "szego",
            "--method",
            "series",
        ]);
        assert_eq!(code, 2);
        assert!(err.contains("--method"), "{err}");
    }

    #[test]
    fn digest_is_stable() {
        let s = EvalSettings::default();
        assert_eq!(settings_digest(&s), settings_digest(&s.clone()));
        assert_ne!(
            settings_digest(&s),
            settings_digest(&s.clone().with_tol(1e-9))
        );
        assert_eq!(settings_digest(&s).len(), 16);
    }
}
