//! Dini kernels, moduli of continuity and the smooth cutoff.

use std::fmt;
use std::io::Read;
use std::str::FromStr;

use serde::Serialize;

use crate::error::{EuclidError, Result};

/// Lower end of the Dini integral, `2^-40`.
pub const DINI_FLOOR_EXP: u32 = 40;
/// A last dyadic piece of `∫ ω(t) dt/t` larger than this fraction of the
/// whole means the partial sums are still moving: divergence. Relative, so
/// the verdict does not depend on the scale of `ω`.
pub const DINI_CAUCHY_TOL: f64 = 1e-6;
/// Relative slack allowed by the sampled smoothness check.
pub const SMOOTHNESS_SLACK: f64 = 0.05;

/// `ψ(v) = Π_a φ(v_a)` with `φ = 1` on `[-½, ½]`, `0` off `(-1, 1)` and the
/// smoothstep in between.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct CutoffPsi;

impl CutoffPsi {
    pub fn axis(v: f64) -> f64 {
        let a = v.abs();
        if a <= 0.5 {
            1.0
        } else if a >= 1.0 {
            0.0
        } else {
            let w = 2.0 * a - 1.0;
            1.0 - w * w * (3.0 - 2.0 * w)
        }
    }

    pub fn eval(&self, v: &[f64]) -> f64 {
        v.iter().map(|&x| Self::axis(x)).product()
    }

    /// `∫ ψ` over `ℝ^d`.
    pub fn mass(d: usize) -> f64 {
        // ∫ φ = 1 + 2 ∫_0^1 (1 - 3w² + 2w³) dw/2 = 1.5
        1.5f64.powi(d as i32)
    }
}

/// A modulus of continuity `ω` on `[0, ∞)`.
#[derive(Clone)]
pub enum Modulus {
    /// `c t`.
    Linear(f64),
    /// `t^α`.
    Power(f64),
    /// An expression in `t`, e.g. `sqrt(t)` or `1/ln(e^2/t)`.
    Expression { text: String, expr: meval::Expr },
    /// Piecewise linear through `(t, ω)` pairs, linear to `(0, 0)` below the
    /// first point and constant beyond the last.
    Table(Vec<(f64, f64)>),
}

impl fmt::Debug for Modulus {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Modulus::Linear(c) => write!(f, "Linear({c})"),
            Modulus::Power(a) => write!(f, "Power({a})"),
            Modulus::Expression { text, .. } => write!(f, "Expression({text:?})"),
            Modulus::Table(points) => write!(f, "Table({} points)", points.len()),
        }
    }
}

impl fmt::Display for Modulus {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Modulus::Linear(c) => write!(f, "{c}*t"),
            Modulus::Power(a) => write!(f, "t^{a}"),
            Modulus::Expression { text, .. } => write!(f, "{text}"),
            Modulus::Table(points) => write!(f, "table[{}]", points.len()),
        }
    }
}

impl Modulus {
    pub fn expression(text: &str) -> Result<Self> {
        // The tokenizer panics on input that is only whitespace.
        if text.trim().is_empty() {
            return Err(EuclidError::InvalidModulus("empty expression".into()));
        }
        let expr = meval::Expr::from_str(text)
            .map_err(|e| EuclidError::InvalidModulus(format!("`{text}`: {e}")))?;
        // Rejects unknown variables and functions up front.
        let _ = expr.clone()
            .bind("t")
            .map_err(|e| EuclidError::InvalidModulus(format!("`{text}`: {e}")))?;
        Ok(Modulus::Expression {
            text: text.to_string(),
            expr,
        })
    }

    pub fn table(mut points: Vec<(f64, f64)>) -> Result<Self> {
        if points.is_empty() {
            return Err(EuclidError::InvalidModulus("empty table".into()));
        }
        points.sort_by(|a, b| a.0.total_cmp(&b.0));
        for w in points.windows(2) {
            if w[0].0 == w[1].0 {
                return Err(EuclidError::InvalidModulus(format!("duplicate t = {}", w[0].0)));
            }
        }
        for &(t, w) in &points {
            if !(t > 0.0 && t.is_finite() && w >= 0.0 && w.is_finite()) {
                return Err(EuclidError::InvalidModulus(format!("bad table row ({t}, {w})")));
            }
        }
        Ok(Modulus::Table(points))
    }

    /// Reads a `t,omega` CSV table.
    pub fn read_table<R: Read>(input: R) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new()
            .trim(csv::Trim::All)
            .from_reader(input);
        let headers = rdr.headers()?;
        if headers.iter().ne(["t", "omega"]) {
            return Err(EuclidError::InvalidModulus("expected header `t,omega`".into()));
        }
        let mut points = Vec::new();
        for row in rdr.deserialize() {
            let (t, w): (f64, f64) = row?;
            points.push((t, w));
        }
        Modulus::table(points)
    }

    /// Either an expression or, if `spec` names an existing file, a table.
    pub fn parse(spec: &str) -> Result<Self> {
        let path = std::path::Path::new(spec);
        if path.is_file() {
            Modulus::read_table(std::fs::File::open(path)?)
        } else {
            Modulus::expression(spec)
        }
    }

    /// An evaluator for `ω`. Expression evaluators are not `Send`, so build
    /// one per thread.
    pub fn evaluator(&self) -> Box<dyn Fn(f64) -> f64 + '_> {
        match self {
            &Modulus::Linear(c) => Box::new(move |t| c * t),
            &Modulus::Power(a) => Box::new(move |t: f64| t.powf(a)),
            Modulus::Expression { expr, .. } => {
                let f = expr.clone().bind("t").expect("checked at construction");
                Box::new(f)
            }
            Modulus::Table(points) => Box::new(move |t| table_eval(points, t)),
        }
    }

    pub fn eval(&self, t: f64) -> f64 {
        self.evaluator()(t)
    }
}

fn table_eval(points: &[(f64, f64)], t: f64) -> f64 {
    let (t0, w0) = points[0];
    if t <= t0 {
        return w0 * t.max(0.0) / t0;
    }
    let i = points.partition_point(|p| p.0 <= t);
    if i == points.len() {
        return points[i - 1].1;
    }
    let (a, wa) = points[i - 1];
    let (b, wb) = points[i];
    wa + (wb - wa) * (t - a) / (b - a)
}

/// `∫_{2^-40}^1 ω(t) dt/t` with a divergence flag.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct DiniReport {
    pub value: f64,
    pub divergent: bool,
    /// The integral over the last dyadic piece `[2^-40, 2^-39]`.
    pub last_piece: f64,
}

fn simpson(f: &dyn Fn(f64) -> f64, a: f64, fa: f64, b: f64, fb: f64) -> (f64, f64, f64) {
    let m = 0.5 * (a + b);
    let fm = f(m);
    (m, fm, (b - a) / 6.0 * (fa + 4.0 * fm + fb))
}

#[allow(clippy::too_many_arguments)]
fn adaptive(
    f: &dyn Fn(f64) -> f64,
    a: f64,
    fa: f64,
    b: f64,
    fb: f64,
    m: f64,
    fm: f64,
    whole: f64,
    tol: f64,
    depth: u32,
) -> f64 {
    let (lm, flm, left) = simpson(f, a, fa, m, fm);
    let (rm, frm, right) = simpson(f, m, fm, b, fb);
    let delta = left + right - whole;
    if depth == 0 || delta.abs() <= 15.0 * tol {
        return left + right + delta / 15.0;
    }
    adaptive(f, a, fa, m, fm, lm, flm, left, tol / 2.0, depth - 1)
        + adaptive(f, m, fm, b, fb, rm, frm, right, tol / 2.0, depth - 1)
}

fn integrate(f: &dyn Fn(f64) -> f64, a: f64, b: f64, tol: f64) -> f64 {
    let (fa, fb) = (f(a), f(b));
    let (m, fm, whole) = simpson(f, a, fa, b, fb);
    adaptive(f, a, fa, b, fb, m, fm, whole, tol, 40)
}

/// Checks monotonicity of `ω` on a log-spaced sample of `[2^-40, 1]` and
/// integrates `ω(e^u)` in `u = ln t`, one dyadic piece at a time.
pub fn dini_check(omega: &Modulus) -> Result<DiniReport> {
    let w = omega.evaluator();
    let samples = 4000;
    let lo = -(DINI_FLOOR_EXP as f64) * std::f64::consts::LN_2;
    let mut prev = f64::NEG_INFINITY;
    for i in 0..=samples {
        let t = (lo * (1.0 - i as f64 / samples as f64)).exp();
        let v = w(t);
        if !v.is_finite() || v < 0.0 {
            return Err(EuclidError::InvalidModulus(format!("ω({t:e}) = {v}")));
        }
        if v < prev * (1.0 - 1e-12) {
            return Err(EuclidError::InvalidModulus(format!("ω is not monotone near t = {t:e}")));
        }
        prev = v;
    }
    let g = |u: f64| w(u.exp());
    let mut value = 0.0;
    let mut last_piece = 0.0;
    for i in 0..DINI_FLOOR_EXP {
        let b = -(i as f64) * std::f64::consts::LN_2;
        let a = b - std::f64::consts::LN_2;
        last_piece = integrate(&g, a, b, 1e-14);
        value += last_piece;
    }
    Ok(DiniReport {
        value,
        divergent: last_piece > DINI_CAUCHY_TOL * value,
        last_piece,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum KernelKind {
    /// `1 / (x - y)` on the line.
    Hilbert,
    /// The first Riesz kernel `(x - y)_1 / |x - y|^{d+1}`, with its
    /// Lipschitz modulus.
    Lipschitz,
    /// The first Riesz kernel with a user-supplied modulus.
    Custom,
}

impl FromStr for KernelKind {
    type Err = EuclidError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "hilbert" => Ok(KernelKind::Hilbert),
            "lipschitz" | "riesz" => Ok(KernelKind::Lipschitz),
            "custom" => Ok(KernelKind::Custom),
            other => Err(EuclidError::InvalidKernel(format!("unknown kernel `{other}`"))),
        }
    }
}

/// Outcome of the sampled size and smoothness checks.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct SmoothnessReport {
    pub samples: usize,
    /// Largest `|K(x,y)| |x-y|^d`.
    pub size_constant: f64,
    /// Largest `|K(x,y) - K(x',y)| |x-y|^d / ω(|x-x'|/|x-y|)`.
    pub worst_ratio: f64,
}

/// A convolution kernel `K(x, y) = k(x - y)` with its modulus.
#[derive(Clone, Debug)]
pub struct DiniKernel {
    kind: KernelKind,
    d: usize,
    modulus: Modulus,
    dini: DiniReport,
    smoothness: SmoothnessReport,
}

impl DiniKernel {
    pub fn hilbert() -> Self {
        DiniKernel::build(KernelKind::Hilbert, 1, Modulus::Linear(2.0)).expect("Hilbert kernel is Dini")
    }

    pub fn lipschitz(d: usize) -> Result<Self> {
        let c = ((d + 2) as f64) * 2f64.powi(d as i32 + 1);
        DiniKernel::build(KernelKind::Lipschitz, d, Modulus::Linear(c))
    }

    /// The Riesz kernel paired with `omega`. Rejected if `ω` fails the Dini
    /// condition or the sampled smoothness bound.
    pub fn custom(d: usize, omega: Modulus) -> Result<Self> {
        DiniKernel::build(KernelKind::Custom, d, omega)
    }

    pub fn from_kind(kind: KernelKind, d: usize, omega: Option<Modulus>) -> Result<Self> {
        match (kind, omega) {
            (KernelKind::Hilbert, None) if d == 1 => Ok(DiniKernel::hilbert()),
            (KernelKind::Hilbert, None) => Err(EuclidError::InvalidKernel(
                "the Hilbert kernel lives in dimension 1".into(),
            )),
            (KernelKind::Lipschitz, None) => DiniKernel::lipschitz(d),
            (KernelKind::Custom, Some(w)) => DiniKernel::custom(d, w),
            (KernelKind::Custom, None) => {
                Err(EuclidError::InvalidKernel("custom kernel needs a modulus".into()))
            }
            (_, Some(_)) => Err(EuclidError::InvalidKernel(
                "a modulus is only accepted with the custom kernel".into(),
            )),
        }
    }

    fn build(kind: KernelKind, d: usize, modulus: Modulus) -> Result<Self> {
        if !(1..=3).contains(&d) {
            return Err(EuclidError::InvalidDimension(d));
        }
        let dini = dini_check(&modulus)?;
        if dini.divergent {
            return Err(EuclidError::InvalidKernel(format!(
                "ω = {modulus} fails the Dini condition (last dyadic piece {:e})",
                dini.last_piece
            )));
        }
        let mut kernel = DiniKernel {
            kind,
            d,
            modulus,
            dini,
            smoothness: SmoothnessReport {
                samples: 0,
                size_constant: 0.0,
                worst_ratio: 0.0,
            },
        };
        kernel.smoothness = kernel.check_smoothness(20_000, 0x5eed);
        if kernel.smoothness.worst_ratio > 1.0 + SMOOTHNESS_SLACK {
            return Err(EuclidError::InvalidKernel(format!(
                "ω = {} is too small for the kernel: sampled ratio {:.4}",
                kernel.modulus, kernel.smoothness.worst_ratio
            )));
        }
        Ok(kernel)
    }

    pub fn kind(&self) -> KernelKind {
        self.kind
    }

    pub fn dim(&self) -> usize {
        self.d
    }

    pub fn modulus(&self) -> &Modulus {
        &self.modulus
    }

    pub fn dini_value(&self) -> f64 {
        self.dini.value
    }

    pub fn dini(&self) -> DiniReport {
        self.dini
    }

    pub fn smoothness(&self) -> SmoothnessReport {
        self.smoothness
    }

    /// `k(z) = K(x, x - z)`, with `k(0) = 0`.
    pub fn eval(&self, z: &[f64]) -> f64 {
        let r2: f64 = z.iter().map(|v| v * v).sum();
        if r2 == 0.0 {
            return 0.0;
        }
        // Both kernels are z_1 / |z|^{d+1}; in d = 1 this is 1/z.
        z[0] / r2.sqrt().powi(self.d as i32 + 1)
    }

    /// Samples pairs and triples `(x, x', y)` with `|x - x'| ≤ ½|x - y|`,
    /// using a fixed splitmix stream so the result is reproducible.
    pub fn check_smoothness(&self, samples: usize, seed: u64) -> SmoothnessReport {
        let w = self.modulus.evaluator();
        let mut state = seed;
        let mut next = move || {
            state = state.wrapping_add(0x9e37_79b9_7f4a_7c15);
            let mut z = state;
            z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
            z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
            ((z ^ (z >> 31)) >> 11) as f64 / (1u64 << 53) as f64
        };
        let d = self.d;
        let mut size_constant = 0.0f64;
        let mut worst_ratio = 0.0f64;
        for _ in 0..samples {
            let mut dir = [0.0; 3];
            let mut hdir = [0.0; 3];
            for a in 0..d {
                dir[a] = 2.0 * next() - 1.0;
                hdir[a] = 2.0 * next() - 1.0;
            }
            let norm = |v: &[f64]| v.iter().map(|x| x * x).sum::<f64>().sqrt();
            let (nd, nh) = (norm(&dir[..d]), norm(&hdir[..d]));
            if nd == 0.0 || nh == 0.0 {
                continue;
            }
            // |x - y| spread over many scales; |x - x'| up to half of it.
            let r = (20.0 * next() - 10.0).exp2();
            let rho = 0.5 * r * next().powi(3);
            let z: Vec<f64> = dir[..d].iter().map(|v| v * r / nd).collect();
            let step: Vec<f64> = hdir[..d].iter().map(|v| v * rho / nh).collect();
            let z2: Vec<f64> = z.iter().zip(&step).map(|(a, b)| a + b).collect();
            let kz = self.eval(&z);
            size_constant = size_constant.max(kz.abs() * r.powi(d as i32));
            if rho == 0.0 {
                continue;
            }
            let diff = (kz - self.eval(&z2)).abs() * r.powi(d as i32);
            let bound = w(rho / r);
            let ratio = if bound > 0.0 {
                diff / bound
            } else if diff > 0.0 {
                f64::INFINITY
            } else {
                0.0
            };
            worst_ratio = worst_ratio.max(ratio);
        }
        SmoothnessReport {
            samples,
            size_constant,
            worst_ratio,
        }
    }
}
