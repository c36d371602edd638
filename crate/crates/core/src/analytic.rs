//! Chebotarev counting: class densities, the GRH-conditional
//! Lagarias–Odlyzko error bound, the logarithmic integral, the row/column
//! double count of the `x × x` null matrix, and a Monte Carlo model of
//! that matrix.

use num_rational::Rational64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum AnalyticError {
    #[error("x = {0} is outside the domain x >= 2")]
    Domain(f64),
    #[error("parameter {name} = {value} must be positive")]
    NonPositive { name: &'static str, value: f64 },
    #[error("density must satisfy 0 < d <= 1, got {0}")]
    Density(Rational64),
    #[error("p = {0} must be at least 5 so that 1 - 2/p > 0")]
    SmallPrime(u64),
    #[error("probability {0} is outside [0, 1]")]
    Probability(f64),
    #[error("matrix size must be at least 2")]
    Size,
}

pub type Result<T> = std::result::Result<T, AnalyticError>;

/// Default relative tolerance of [`logint`].
pub const LOGINT_TOLERANCE: f64 = 1e-11;

fn simpson(fa: f64, fm: f64, fb: f64, h: f64) -> f64 {
    h / 6.0 * (fa + 4.0 * fm + fb)
}

#[allow(clippy::too_many_arguments)]
fn adaptive<F: Fn(f64) -> f64>(
    f: &F,
    a: f64,
    b: f64,
    fa: f64,
    fm: f64,
    fb: f64,
    whole: f64,
    eps: f64,
    depth: u32,
) -> f64 {
    let m = 0.5 * (a + b);
    let (lm, rm) = (0.5 * (a + m), 0.5 * (m + b));
    let (flm, frm) = (f(lm), f(rm));
    let left = simpson(fa, flm, fm, m - a);
    let right = simpson(fm, frm, fb, b - m);
    let delta = left + right - whole;
    if depth == 0 || delta.abs() <= 15.0 * eps {
        return left + right + delta / 15.0;
    }
    adaptive(f, a, m, fa, flm, fm, left, 0.5 * eps, depth - 1)
        + adaptive(f, m, b, fm, frm, fb, right, 0.5 * eps, depth - 1)
}

/// `∫_2^x dt / ln t`, integrated as `∫ e^s / s ds` over `[ln 2, ln x]`.
pub fn logint(x: f64) -> Result<f64> {
    logint_with_tolerance(x, LOGINT_TOLERANCE)
}

pub fn logint_with_tolerance(x: f64, rel_tol: f64) -> Result<f64> {
    if !x.is_finite() || x < 2.0 {
        return Err(AnalyticError::Domain(x));
    }
    if rel_tol <= 0.0 {
        return Err(AnalyticError::NonPositive { name: "rel_tol", value: rel_tol });
    }
    if x == 2.0 {
        return Ok(0.0);
    }
    let f = |s: f64| s.exp() / s;
    let (a, b) = (2f64.ln(), x.ln());
    // Coarse panels give a scale for the absolute tolerance and keep the
    // recursion shallow where the integrand grows exponentially.
    let panels = 64;
    let h = (b - a) / panels as f64;
    let mut total = 0.0;
    let mut pieces = Vec::with_capacity(panels);
    for i in 0..panels {
        let lo = a + i as f64 * h;
        let hi = if i + 1 == panels { b } else { lo + h };
        let (fa, fm, fb) = (f(lo), f(0.5 * (lo + hi)), f(hi));
        let s = simpson(fa, fm, fb, hi - lo);
        total += s;
        pieces.push((lo, hi, fa, fm, fb, s));
    }
    let eps = rel_tol * total.abs() / panels as f64;
    Ok(pieces
        .into_iter()
        .map(|(lo, hi, fa, fm, fb, s)| adaptive(&f, lo, hi, fa, fm, fb, s, eps, 40))
        .sum())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct DensityParams {
    /// Density of the base class; stored exactly.
    #[serde(with = "ratio_serde")]
    pub d: Rational64,
    pub p: u64,
}

mod ratio_serde {
    use num_rational::Rational64;
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    pub fn serialize<S: Serializer>(r: &Rational64, s: S) -> Result<S::Ok, S::Error> {
        format!("{}/{}", r.numer(), r.denom()).serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Rational64, D::Error> {
        let s = String::deserialize(d)?;
        let parse = |t: &str| t.trim().parse::<i64>().map_err(serde::de::Error::custom);
        match s.split_once('/') {
            Some((n, m)) => {
                let den = parse(m)?;
                if den == 0 {
                    return Err(serde::de::Error::custom("zero denominator"));
                }
                Ok(Rational64::new(parse(n)?, den))
            }
            None => Ok(Rational64::from_integer(parse(&s)?)),
        }
    }
}

impl Default for DensityParams {
    /// `d = 1/100` at `p = 5`.
    fn default() -> Self {
        DensityParams { d: Rational64::new(1, 100), p: 5 }
    }
}

impl DensityParams {
    pub fn new(d: Rational64, p: u64) -> Result<Self> {
        if d <= Rational64::from_integer(0) || d > Rational64::from_integer(1) {
            return Err(AnalyticError::Density(d));
        }
        Ok(DensityParams { d, p })
    }

    pub fn d_f64(&self) -> f64 {
        ratio_to_f64(self.d)
    }
}

pub fn ratio_to_f64(r: Rational64) -> f64 {
    *r.numer() as f64 / *r.denom() as f64
}

/// `(d/p, d(1 - 1/p))`: densities of the split-completely class and of its
/// complement inside the base class.
pub fn split_density(params: &DensityParams) -> (Rational64, Rational64) {
    let p = Rational64::from_integer(params.p as i64);
    let one = Rational64::from_integer(1);
    (params.d / p, params.d * (one - one / p))
}

/// `ln D` for the discriminant model `D = c1 · q^c2`.
pub fn log_discriminant(c1: f64, c2: f64, q: f64) -> f64 {
    c1.ln() + c2 * q.ln()
}

/// `e1 (ratio · √x · ln(D x^n) + ln D)`, taking `ln D` directly.
pub fn lo_bound(x: f64, class_ratio: f64, log_disc: f64, n_l: f64, e1: f64) -> Result<f64> {
    if !x.is_finite() || x <= 2.0 {
        return Err(AnalyticError::Domain(x));
    }
    for (name, value) in [("n_l", n_l), ("e1", e1)] {
        if value.is_nan() || value <= 0.0 {
            return Err(AnalyticError::NonPositive { name, value });
        }
    }
    if class_ratio < 0.0 {
        return Err(AnalyticError::NonPositive { name: "class_ratio", value: class_ratio });
    }
    if log_disc < 0.0 {
        return Err(AnalyticError::NonPositive { name: "log_disc", value: log_disc });
    }
    Ok(e1 * (class_ratio * x.sqrt() * (log_disc + n_l * x.ln()) + log_disc))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LoParams {
    pub e1: f64,
    pub c1: f64,
    pub c2: f64,
    pub n_l: f64,
}

impl Default for LoParams {
    fn default() -> Self {
        LoParams { e1: 1.0, c1: 1.0, c2: 10.0, n_l: 100.0 }
    }
}

impl LoParams {
    pub fn validate(&self) -> Result<()> {
        for (name, value) in [("e1", self.e1), ("c1", self.c1), ("c2", self.c2), ("n_l", self.n_l)] {
            if !value.is_finite() || value <= 0.0 {
                return Err(AnalyticError::NonPositive { name, value });
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CountingSettings {
    pub x_start: f64,
    /// Number of doublings tried before giving up.
    pub max_steps: u32,
    pub safety_factor: f64,
    /// Grid points reported past the crossover.
    pub lookahead: u32,
    pub logint_tolerance: f64,
}

impl Default for CountingSettings {
    fn default() -> Self {
        CountingSettings {
            x_start: 4.0,
            max_steps: 120,
            safety_factor: 2.0,
            lookahead: 5,
            logint_tolerance: LOGINT_TOLERANCE,
        }
    }
}

/// Both counts of the ones in the `x × x` square at one grid point.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CountingPoint {
    pub x: f64,
    pub li: f64,
    /// `d^2 (1 - 1/p) li^2`.
    pub row_main: f64,
    /// `(d^2 / p) li^2`.
    pub column_main: f64,
    /// `d^2 (1 - 2/p) li^2`.
    pub gap: f64,
    pub row_budget: f64,
    pub column_budget: f64,
    pub total_budget: f64,
    /// `gap / total_budget`.
    pub ratio: f64,
}

impl CountingPoint {
    pub fn contradicts(&self, safety: f64) -> bool {
        self.gap > safety * self.total_budget
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    ContradictionReached,
    NotReached,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CountingReport {
    pub density: DensityParams,
    pub lo: LoParams,
    pub safety_factor: f64,
    pub verdict: Verdict,
    /// First grid point where the gap exceeds the safety factor times the budget.
    pub crossover: Option<CountingPoint>,
    /// Grid points following the crossover.
    pub after: Vec<CountingPoint>,
    /// Every grid point evaluated up to the crossover.
    pub trajectory: Vec<CountingPoint>,
}

impl CountingReport {
    pub fn ratios_increase_after(&self) -> bool {
        let Some(c) = self.crossover else {
            return false;
        };
        let mut prev = c.ratio;
        self.after.iter().all(|pt| {
            let ok = pt.ratio > prev;
            prev = pt.ratio;
            ok
        })
    }
}

/// Evaluates both counts at `x`.
///
/// Rows: about `R = d·li(x)` primes `q < x` in the class; each row carries
/// the error bound with class ratio `d(1 - 1/p)` and `ln D = ln c1 + c2 ln q`.
/// The sum of `ln q` over rows is bounded by `R ln x`.
/// Columns: each column is bounded by the class count (ratio `d`) minus the
/// row count, so it carries both error bounds with `D <= c1 x^c2`.
pub fn counting_point(params: &DensityParams, lo: &LoParams, x: f64, tol: f64) -> Result<CountingPoint> {
    let p = params.p as f64;
    let d = params.d_f64();
    let li = logint_with_tolerance(x, tol)?;
    let ln_x = x.ln();
    let rows = d * li;
    let sum_log_q = rows * ln_x;
    let ratio_one = d * (1.0 - 1.0 / p);
    let sqrt_x = x.sqrt();
    let ln_c1 = lo.c1.ln();

    let row_budget = lo.e1
        * (ratio_one * sqrt_x * (rows * (ln_c1 + lo.n_l * ln_x) + lo.c2 * sum_log_q)
            + rows * ln_c1
            + lo.c2 * sum_log_q);
    let log_disc_max = log_discriminant(lo.c1, lo.c2, x);
    let per_column = lo_bound(x, d, log_disc_max, lo.n_l, lo.e1)?
        + lo_bound(x, ratio_one, log_disc_max, lo.n_l, lo.e1)?;
    let column_budget = rows * per_column;
    let total_budget = row_budget + column_budget;

    let li2 = li * li;
    let gap = d * d * (1.0 - 2.0 / p) * li2;
    Ok(CountingPoint {
        x,
        li,
        row_main: d * d * (1.0 - 1.0 / p) * li2,
        column_main: d * d / p * li2,
        gap,
        row_budget,
        column_budget,
        total_budget,
        ratio: gap / total_budget,
    })
}

/// Scans `x = x_start · 2^i` for the first point where the counts contradict.
pub fn contradiction_x(params: &DensityParams, lo: &LoParams) -> Result<CountingReport> {
    contradiction_x_with(params, lo, &CountingSettings::default())
}

pub fn contradiction_x_with(
    params: &DensityParams,
    lo: &LoParams,
    settings: &CountingSettings,
) -> Result<CountingReport> {
    if params.p < 5 {
        return Err(AnalyticError::SmallPrime(params.p));
    }
    DensityParams::new(params.d, params.p)?;
    lo.validate()?;
    let mut trajectory = Vec::new();
    let mut x = settings.x_start.max(2.0 + f64::EPSILON);
    for _ in 0..settings.max_steps {
        let pt = counting_point(params, lo, x, settings.logint_tolerance)?;
        trajectory.push(pt);
        if pt.contradicts(settings.safety_factor) {
            let mut after = Vec::new();
            let mut y = x;
            for _ in 0..settings.lookahead {
                y *= 2.0;
                after.push(counting_point(params, lo, y, settings.logint_tolerance)?);
            }
            return Ok(CountingReport {
                density: *params,
                lo: *lo,
                safety_factor: settings.safety_factor,
                verdict: Verdict::ContradictionReached,
                crossover: Some(pt),
                after,
                trajectory,
            });
        }
        x *= 2.0;
    }
    Ok(CountingReport {
        density: *params,
        lo: *lo,
        safety_factor: settings.safety_factor,
        verdict: Verdict::NotReached,
        crossover: None,
        after: Vec::new(),
        trajectory,
    })
}

/// Summary of one simulated null matrix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulationStats {
    pub size: usize,
    pub p: u64,
    pub seed: u64,
    pub null_probability: f64,
    /// Pooled fraction of ones off the diagonal, read by rows.
    pub row_one_density: f64,
    /// Pooled fraction of ones off the diagonal, read by columns.
    pub column_one_density: f64,
    pub one_density_se: f64,
    pub row_density_min: f64,
    pub row_density_max: f64,
    pub column_density_min: f64,
    pub column_density_max: f64,
    pub symmetric_pairs: u64,
    pub total_pairs: u64,
    pub symmetric_fraction: f64,
    pub symmetric_se: f64,
    pub expected_one_density: f64,
    pub expected_symmetric_fraction: f64,
}

impl SimulationStats {
    /// Deviation of the row density from its expectation, in standard errors.
    pub fn row_z(&self) -> f64 {
        z_score(self.row_one_density, self.expected_one_density, self.one_density_se)
    }

    pub fn symmetric_z(&self) -> f64 {
        z_score(self.symmetric_fraction, self.expected_symmetric_fraction, self.symmetric_se)
    }
}

fn z_score(observed: f64, expected: f64, se: f64) -> f64 {
    if se == 0.0 {
        if observed == expected {
            0.0
        } else {
            f64::INFINITY
        }
    } else {
        (observed - expected) / se
    }
}

/// Simulates the `size × size` matrix whose off-diagonal entries are `0`
/// with probability `1/p` (or `null_probability` when given), independently.
/// Row `i` draws from its own ChaCha stream, so results do not depend on
/// thread scheduling.
pub fn simulate_matrix(
    size: usize,
    p: u64,
    seed: u64,
    null_probability: Option<f64>,
) -> Result<SimulationStats> {
    if size < 2 {
        return Err(AnalyticError::Size);
    }
    let q0 = null_probability.unwrap_or(1.0 / p as f64);
    if !(0.0..=1.0).contains(&q0) {
        return Err(AnalyticError::Probability(q0));
    }
    let rows: Vec<Vec<bool>> = (0..size)
        .into_par_iter()
        .map(|i| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(i as u64);
            (0..size)
                .map(|j| j != i && !rng.gen_bool(q0))
                .collect()
        })
        .collect();

    let off = (size - 1) as f64;
    let row_density: Vec<f64> = rows
        .iter()
        .map(|r| r.iter().filter(|&&b| b).count() as f64 / off)
        .collect();
    let column_density: Vec<f64> = (0..size)
        .into_par_iter()
        .map(|j| (0..size).filter(|&i| rows[i][j]).count() as f64 / off)
        .collect();
    let symmetric_pairs: u64 = (0..size)
        .into_par_iter()
        .map(|i| ((i + 1)..size).filter(|&j| rows[i][j] && rows[j][i]).count() as u64)
        .sum();

    let cells = (size * (size - 1)) as f64;
    let total_pairs = (size * (size - 1) / 2) as u64;
    let ones: f64 = row_density.iter().sum::<f64>() * off;
    let col_ones: f64 = column_density.iter().sum::<f64>() * off;
    let expected_one = 1.0 - q0;
    let expected_sym = expected_one * expected_one;
    let fold = |v: &[f64], f: fn(f64, f64) -> f64, init: f64| v.iter().copied().fold(init, f);
    Ok(SimulationStats {
        size,
        p,
        seed,
        null_probability: q0,
        row_one_density: ones / cells,
        column_one_density: col_ones / cells,
        one_density_se: (expected_one * (1.0 - expected_one) / cells).sqrt(),
        row_density_min: fold(&row_density, f64::min, f64::INFINITY),
        row_density_max: fold(&row_density, f64::max, f64::NEG_INFINITY),
        column_density_min: fold(&column_density, f64::min, f64::INFINITY),
        column_density_max: fold(&column_density, f64::max, f64::NEG_INFINITY),
        symmetric_pairs,
        total_pairs,
        symmetric_fraction: symmetric_pairs as f64 / total_pairs as f64,
        symmetric_se: (expected_sym * (1.0 - expected_sym) / total_pairs as f64).sqrt(),
        expected_one_density: expected_one,
        expected_symmetric_fraction: expected_sym,
    })
}
