//! N-functions `Φ(t) = ∫₀ᵗ sφ(s) ds`: densities, growth indices, conjugates and
//! the structural conditions the solvers rely on.
//!
//! Every kind is described by its odd "flux" `a(t) = tφ(t)`. Built-in kinds use
//! closed forms; tabulated kinds interpolate `a` with a shape-preserving cubic and
//! extend it by power laws outside the table.

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::error::{Error, Result};
use crate::interp::MonotoneCubic;
use crate::quadrature::{bisect, bracket_decreasing, invert_increasing, GaussLegendre};
use crate::scalar::{log_grid, Real};

/// Default sampling window and density for index extraction.
pub const INDEX_T_MIN: f64 = 1e-6;
pub const INDEX_T_MAX: f64 = 1e6;
pub const INDEX_SAMPLES: usize = 4096;

/// Default regularization of `|∇u|` inside flux assembly.
pub const EPS_REG: f64 = 1e-10;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", deny_unknown_fields)]
pub enum PhiKind<T> {
    /// `φ(t) = t^{p-2}`, `Φ(t) = t^p / p`.
    #[serde(rename = "power")]
    Power { p: T },
    /// `φ(t) = t^{p-2} + t^{q-2}` with `q < p`.
    #[serde(rename = "pq")]
    SumOfPowers { p: T, q: T },
    /// `Φ(t) = |t|^γ log(1 + |t|)`.
    #[serde(rename = "log")]
    LogPower { gamma: T },
    /// Samples of `tφ(t)` at increasing positive `t`.
    #[serde(rename = "table")]
    Tabulated { t: Vec<T>, tphi: Vec<T> },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NFunctionSpec<T> {
    pub kind: PhiKind<T>,
    /// Spatial dimension `N` entering the Sobolev conjugate and the index windows.
    pub ambient_dimension: usize,
}

impl<T: Real> NFunctionSpec<T> {
    pub fn power(p: T, n: usize) -> Self {
        Self { kind: PhiKind::Power { p }, ambient_dimension: n }
    }

    pub fn sum_of_powers(p: T, q: T, n: usize) -> Self {
        Self { kind: PhiKind::SumOfPowers { p, q }, ambient_dimension: n }
    }

    pub fn log_power(gamma: T, n: usize) -> Self {
        Self { kind: PhiKind::LogPower { gamma }, ambient_dimension: n }
    }

    pub fn tabulated(t: Vec<T>, tphi: Vec<T>, n: usize) -> Self {
        Self { kind: PhiKind::Tabulated { t, tphi }, ambient_dimension: n }
    }
}

#[derive(Clone, Debug)]
struct Table<T> {
    cubic: MonotoneCubic<T>,
    /// `Φ` at each knot.
    cum: Vec<T>,
    k_lo: T,
    k_hi: T,
}

impl<T: Real> Table<T> {
    fn new(t: Vec<T>, a: Vec<T>) -> Result<Self> {
        if t.len() < 3 {
            return Err(Error::InvalidSpec("tabulated N-function needs at least 3 samples".into()));
        }
        if t[0] <= T::zero() {
            return Err(Error::InvalidSpec("tabulated abscissae must be positive".into()));
        }
        if a.iter().any(|v| *v <= T::zero()) {
            return Err(Error::InvalidSpec("tabulated tφ(t) must be positive".into()));
        }
        let n = t.len();
        let k_lo = (a[1] / a[0]).ln() / (t[1] / t[0]).ln();
        let k_hi = (a[n - 1] / a[n - 2]).ln() / (t[n - 1] / t[n - 2]).ln();
        if k_lo <= -T::one() {
            return Err(Error::InvalidSpec("tabulated tφ(t) is not integrable at the origin".into()));
        }
        let cubic = MonotoneCubic::new(t, a)?;
        let mut cum = Vec::with_capacity(n);
        let x = cubic.knots();
        let y = cubic.values();
        cum.push(y[0] * x[0] / (k_lo + T::one()));
        for k in 0..n - 1 {
            let next = cum[k] + cubic.segment_integral(k);
            cum.push(next);
        }
        Ok(Self { cubic, cum, k_lo, k_hi })
    }

    fn bounds(&self) -> (T, T, T, T) {
        let x = self.cubic.knots();
        let y = self.cubic.values();
        (x[0], y[0], x[x.len() - 1], y[y.len() - 1])
    }

    /// `a`, `a'`, `a''` at `t > 0`.
    fn flux3(&self, t: T) -> (T, T, T) {
        let (t0, a0, tn, an) = self.bounds();
        if t < t0 {
            let k = self.k_lo;
            let v = a0 * (t / t0).powf(k);
            (v, k * v / t, k * (k - T::one()) * v / (t * t))
        } else if t > tn {
            let k = self.k_hi;
            let v = an * (t / tn).powf(k);
            (v, k * v / t, k * (k - T::one()) * v / (t * t))
        } else {
            self.cubic.eval3(t)
        }
    }

    fn big_phi(&self, t: T) -> T {
        let (t0, a0, tn, an) = self.bounds();
        if t < t0 {
            a0 * t0 / (self.k_lo + T::one()) * (t / t0).powf(self.k_lo + T::one())
        } else if t > tn {
            let k1 = self.k_hi + T::one();
            let last = self.cum[self.cum.len() - 1];
            if k1.abs() < T::lit(1e-12) {
                last + an * tn * (t / tn).ln()
            } else {
                last + an * tn / k1 * ((t / tn).powf(k1) - T::one())
            }
        } else {
            let k = self.cubic.segment_of(t);
            self.cum[k] + self.cubic.partial_integral(k, t)
        }
    }
}

/// A validated N-function ready for evaluation.
#[derive(Clone, Debug)]
pub struct NFunction<T> {
    spec: NFunctionSpec<T>,
    table: Option<Table<T>>,
}

/// Growth indices sampled over a log grid, merged with the kind's analytic end limits.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct IndexReport<T> {
    pub ell: T,
    pub em: T,
    pub ell2: T,
    pub em2: T,
    pub ell_star: T,
    pub em_star: T,
    pub sample_range: (T, T),
    pub conditions_pass: ConditionFlags,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub struct ConditionFlags {
    pub phi1: bool,
    pub phi2: bool,
    pub phi3: bool,
    pub phi3_prime: bool,
}

/// Outcome of one sampled condition: pass flag plus the worst observed witness.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ConditionCheck {
    pub name: String,
    pub passed: bool,
    pub witness: Value,
}

impl ConditionCheck {
    pub(crate) fn new(name: &str, passed: bool, witness: Value) -> Self {
        Self { name: name.to_string(), passed, witness }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PhiConditionReport {
    pub phi1: ConditionCheck,
    pub phi2: ConditionCheck,
    pub phi3: ConditionCheck,
    pub phi3_prime: ConditionCheck,
}

impl PhiConditionReport {
    pub fn all_pass(&self) -> bool {
        self.phi1.passed && self.phi2.passed && self.phi3.passed && self.phi3_prime.passed
    }

    pub fn flags(&self) -> ConditionFlags {
        ConditionFlags {
            phi1: self.phi1.passed,
            phi2: self.phi2.passed,
            phi3: self.phi3.passed,
            phi3_prime: self.phi3_prime.passed,
        }
    }

    pub fn checks(&self) -> [&ConditionCheck; 4] {
        [&self.phi1, &self.phi2, &self.phi3, &self.phi3_prime]
    }
}

fn f64v<T: Real>(x: T) -> f64 {
    x.to_f64_lossy()
}

impl<T: Real> NFunction<T> {
    pub fn new(spec: NFunctionSpec<T>) -> Result<Self> {
        Self::build(spec, true)
    }

    /// Like [`Self::new`] but without the `< N` growth windows; used for
    /// auxiliary functions such as growth envelopes.
    pub fn new_unwindowed(spec: NFunctionSpec<T>) -> Result<Self> {
        Self::build(spec, false)
    }

    fn build(spec: NFunctionSpec<T>, windowed: bool) -> Result<Self> {
        let n = spec.ambient_dimension;
        if n == 0 {
            return Err(Error::InvalidSpec("ambient dimension must be positive".into()));
        }
        let big_n = if windowed { T::from_usize_lossy(n) } else { T::infinity() };
        let one = T::one();
        let table = match &spec.kind {
            PhiKind::Power { p } => {
                if !(*p > one && *p < big_n) {
                    return Err(Error::InvalidSpec(format!("power N-function needs 1 < p < N, got p = {p}, N = {n}")));
                }
                None
            }
            PhiKind::SumOfPowers { p, q } => {
                if !(*q > one && *q < *p && *p < big_n) {
                    return Err(Error::InvalidSpec(format!(
                        "(p,q) N-function needs 1 < q < p < N, got p = {p}, q = {q}, N = {n}"
                    )));
                }
                None
            }
            PhiKind::LogPower { gamma } => {
                let lower = if windowed {
                    (-one + (one + T::lit(4.0) * big_n).sqrt()) / T::lit(2.0)
                } else {
                    one
                };
                if !(*gamma > lower && *gamma < big_n - one) {
                    return Err(Error::InvalidSpec(format!(
                        "log N-function needs {lower} < γ < {}, got γ = {gamma}",
                        big_n - one
                    )));
                }
                None
            }
            PhiKind::Tabulated { t, tphi } => Some(Table::new(t.clone(), tphi.clone())?),
        };
        Ok(Self { spec, table })
    }

    pub fn spec(&self) -> &NFunctionSpec<T> {
        &self.spec
    }

    pub fn dimension(&self) -> usize {
        self.spec.ambient_dimension
    }

    /// The flux `a(t) = tφ(t) = Φ'(t)`, extended oddly.
    pub fn flux(&self, t: T) -> T {
        if t < T::zero() {
            return -self.flux(-t);
        }
        if t == T::zero() {
            return T::zero();
        }
        match &self.spec.kind {
            PhiKind::Power { p } => t.powf(*p - T::one()),
            PhiKind::SumOfPowers { p, q } => t.powf(*p - T::one()) + t.powf(*q - T::one()),
            PhiKind::LogPower { gamma } => {
                let g = *gamma;
                g * t.powf(g - T::one()) * t.ln_1p() + t.powf(g) / (T::one() + t)
            }
            PhiKind::Tabulated { .. } => self.table().flux3(t).0,
        }
    }

    fn table(&self) -> &Table<T> {
        self.table.as_ref().expect("tabulated kind carries a table")
    }

    /// `φ(t)` for `t > 0`.
    pub fn phi(&self, t: T) -> Result<T> {
        if !(t > T::zero()) {
            return Err(Error::Domain(format!("φ(t) requires t > 0, got {t}")));
        }
        Ok(self.phi_unchecked(t))
    }

    fn phi_unchecked(&self, t: T) -> T {
        match &self.spec.kind {
            PhiKind::Power { p } => t.powf(*p - T::lit(2.0)),
            PhiKind::SumOfPowers { p, q } => t.powf(*p - T::lit(2.0)) + t.powf(*q - T::lit(2.0)),
            PhiKind::LogPower { gamma } => {
                let g = *gamma;
                g * t.powf(g - T::lit(2.0)) * t.ln_1p() + t.powf(g - T::one()) / (T::one() + t)
            }
            PhiKind::Tabulated { .. } => self.table().flux3(t).0 / t,
        }
    }

    /// `φ(√(t² + ε²))`, finite for every `t` when `ε > 0`.
    #[inline]
    pub fn phi_reg(&self, t: T, eps: T) -> T {
        let r = (t * t + eps * eps).sqrt();
        if r > T::zero() {
            self.phi_unchecked(r)
        } else {
            self.phi_unchecked(T::min_positive_value())
        }
    }

    /// `Φ(t)`, even in `t`.
    pub fn big_phi(&self, t: T) -> T {
        let t = t.abs();
        if t == T::zero() {
            return T::zero();
        }
        match &self.spec.kind {
            PhiKind::Power { p } => t.powf(*p) / *p,
            PhiKind::SumOfPowers { p, q } => t.powf(*p) / *p + t.powf(*q) / *q,
            PhiKind::LogPower { gamma } => t.powf(*gamma) * t.ln_1p(),
            PhiKind::Tabulated { .. } => self.table().big_phi(t),
        }
    }

    /// `φ'(t)` for `t > 0`.
    pub fn phi_prime(&self, t: T) -> Result<T> {
        if !(t > T::zero()) {
            return Err(Error::Domain(format!("φ'(t) requires t > 0, got {t}")));
        }
        Ok(self.phi_prime_unchecked(t))
    }

    fn phi_prime_unchecked(&self, t: T) -> T {
        let one = T::one();
        let two = T::lit(2.0);
        let three = T::lit(3.0);
        match &self.spec.kind {
            PhiKind::Power { p } => (*p - two) * t.powf(*p - three),
            PhiKind::SumOfPowers { p, q } => (*p - two) * t.powf(*p - three) + (*q - two) * t.powf(*q - three),
            PhiKind::LogPower { gamma } => {
                let g = *gamma;
                let l = t.ln_1p();
                let s = one + t;
                g * (g - two) * t.powf(g - three) * l + (two * g - one) * t.powf(g - two) / s
                    - t.powf(g - one) / (s * s)
            }
            PhiKind::Tabulated { .. } => {
                let (a, da, _) = self.table().flux3(t);
                (da * t - a) / (t * t)
            }
        }
    }

    /// `φ'(r) r` at `r = √(t² + ε²)`, the regularized companion of [`Self::phi_reg`].
    #[inline]
    pub fn phi_prime_times_r_reg(&self, t: T, eps: T) -> T {
        let r = (t * t + eps * eps).sqrt().max(T::min_positive_value());
        self.phi_prime_unchecked(r) * r
    }

    /// First-order index quotient `t²φ(t)/Φ(t)`.
    pub fn index_quotient(&self, t: T) -> T {
        let one = T::one();
        match &self.spec.kind {
            PhiKind::Power { p } => *p,
            PhiKind::SumOfPowers { p, q } => {
                let r = t.powf(*p - *q);
                if r.is_infinite() {
                    *p
                } else {
                    (r + one) / (r / *p + one / *q)
                }
            }
            PhiKind::LogPower { gamma } => *gamma + t / ((one + t) * t.ln_1p()),
            PhiKind::Tabulated { .. } => t * self.flux(t) / self.big_phi(t),
        }
    }

    /// Second-order quotient `(tφ)''t / (tφ)'`, i.e. the quantity bounded by `ℓ-2` and `m-2`.
    pub fn second_quotient(&self, t: T) -> T {
        let one = T::one();
        let two = T::lit(2.0);
        let three = T::lit(3.0);
        match &self.spec.kind {
            PhiKind::Power { p } => *p - two,
            PhiKind::SumOfPowers { p, q } => {
                let r = t.powf(*p - *q);
                if r.is_infinite() {
                    return *p - two;
                }
                let num = (*p - one) * (*p - two) * r + (*q - one) * (*q - two);
                let den = (*p - one) * r + (*q - one);
                num / den
            }
            PhiKind::LogPower { gamma } => {
                let g = *gamma;
                let l = t.ln_1p();
                let x = t / (one + t);
                let num = g * (g - one) * (g - two) * l + three * g * (g - one) * x - three * g * x * x
                    + two * x * x * x;
                let den = g * (g - one) * l + two * g * x - x * x;
                num / den
            }
            PhiKind::Tabulated { .. } => {
                let (_, da, dda) = self.table().flux3(t);
                dda * t / da
            }
        }
    }

    /// Limits of the (first, second) quotients at `t → 0` and `t → ∞`, when known in closed form.
    fn quotient_limits(&self) -> ([T; 2], [T; 2]) {
        let one = T::one();
        let two = T::lit(2.0);
        match &self.spec.kind {
            PhiKind::Power { p } => ([*p, *p], [*p - two, *p - two]),
            PhiKind::SumOfPowers { p, q } => ([*q, *p], [*q - two, *p - two]),
            PhiKind::LogPower { gamma } => ([*gamma + one, *gamma], [*gamma - one, *gamma - two]),
            PhiKind::Tabulated { .. } => {
                let tb = self.table();
                ([tb.k_lo + one, tb.k_hi + one], [tb.k_lo - one, tb.k_hi - one])
            }
        }
    }

    /// Growth indices over a log grid on `[t_min, t_max]`.
    pub fn compute_indices(&self, t_min: T, t_max: T, samples: usize) -> Result<IndexReport<T>> {
        if !(t_min > T::zero() && t_max > t_min) {
            return Err(Error::Precondition(format!("index window needs 0 < t_min < t_max, got [{t_min}, {t_max}]")));
        }
        if samples < 100 {
            return Err(Error::Precondition(format!("index extraction needs at least 100 samples, got {samples}")));
        }
        let mut lo = t_min;
        let mut attempt = 0;
        loop {
            let grid = log_grid(lo, t_max, samples);
            match self.indices_on(&grid) {
                Some(report) => {
                    let conditions = self.check_conditions();
                    return Ok(IndexReport { conditions_pass: conditions.flags(), sample_range: (lo, t_max), ..report });
                }
                None if attempt == 0 => {
                    attempt += 1;
                    lo = (lo * T::lit(1e3)).min((lo * t_max).sqrt());
                }
                None => {
                    return Err(Error::Domain(format!(
                        "index quotient is not finite on [{lo}, {t_max}] (Φ underflow)"
                    )))
                }
            }
        }
    }

    /// Indices on the default window.
    pub fn indices(&self) -> IndexReport<T> {
        self.compute_indices(T::lit(INDEX_T_MIN), T::lit(INDEX_T_MAX), INDEX_SAMPLES)
            .expect("default index window is valid for validated N-functions")
    }

    fn indices_on(&self, grid: &[T]) -> Option<IndexReport<T>> {
        let (first_lim, second_lim) = self.quotient_limits();
        let mut ell = first_lim[0].min(first_lim[1]);
        let mut em = first_lim[0].max(first_lim[1]);
        let mut lo2 = second_lim[0].min(second_lim[1]);
        let mut hi2 = second_lim[0].max(second_lim[1]);
        for &t in grid {
            let q = self.index_quotient(t);
            if !q.is_finite() {
                return None;
            }
            ell = ell.min(q);
            em = em.max(q);
            let q2 = self.second_quotient(t);
            if q2.is_nan() {
                lo2 = T::neg_infinity();
                hi2 = T::infinity();
            } else {
                lo2 = lo2.min(q2);
                hi2 = hi2.max(q2);
            }
        }
        let big_n = T::from_usize_lossy(self.dimension());
        let star = |x: T| if x < big_n { x * big_n / (big_n - x) } else { T::infinity() };
        Some(IndexReport {
            ell,
            em,
            ell2: lo2 + T::lit(2.0),
            em2: hi2 + T::lit(2.0),
            ell_star: star(ell),
            em_star: star(em),
            sample_range: (grid[0], grid[grid.len() - 1]),
            conditions_pass: ConditionFlags { phi1: false, phi2: false, phi3: false, phi3_prime: false },
        })
    }

    /// Samples the structural conditions on φ; failures are reported, never raised.
    pub fn check_conditions(&self) -> PhiConditionReport {
        let decades: Vec<T> = (0..=6).map(|k| T::lit(10f64.powi(k))).collect();

        // tφ(t) → 0 at the origin and → ∞ at infinity, with a positive power-law order at both ends.
        let small: Vec<T> = decades.iter().map(|d| self.flux(T::one() / *d)).collect();
        let large: Vec<T> = decades.iter().map(|d| self.flux(*d)).collect();
        let slope = |a: T, b: T| (b / a).ln() / T::lit(10f64.ln());
        let slope0 = slope(small[6], small[5]);
        let slope_inf = slope(large[5], large[6]);
        let shrinking = small.windows(2).all(|w| w[1] < w[0]);
        let growing = large.windows(2).all(|w| w[1] > w[0]);
        let floor = T::lit(1e-3);
        let phi1 = ConditionCheck::new(
            "phi1",
            shrinking && growing && slope0 > floor && slope_inf > floor,
            json!({
                "tphi_at_1e-6": f64v(small[6]),
                "tphi_at_1e6": f64v(large[6]),
                "log_slope_at_0": f64v(slope0),
                "log_slope_at_inf": f64v(slope_inf),
            }),
        );

        let grid = log_grid(T::lit(INDEX_T_MIN), T::lit(INDEX_T_MAX), INDEX_SAMPLES);
        let mut phi2_witness = Value::Null;
        let mut prev = self.flux(grid[0]);
        for w in grid.windows(2) {
            let next = self.flux(w[1]);
            if !(next > prev) {
                phi2_witness = json!({"t0": f64v(w[0]), "t1": f64v(w[1]), "tphi0": f64v(prev), "tphi1": f64v(next)});
                break;
            }
            prev = next;
        }
        let phi2 = ConditionCheck::new("phi2", phi2_witness.is_null(), phi2_witness);

        let report = self
            .indices_on(&grid)
            .unwrap_or(IndexReport {
                ell: T::nan(),
                em: T::nan(),
                ell2: T::nan(),
                em2: T::nan(),
                ell_star: T::nan(),
                em_star: T::nan(),
                sample_range: (grid[0], grid[grid.len() - 1]),
                conditions_pass: ConditionFlags { phi1: false, phi2: false, phi3: false, phi3_prime: false },
            });
        let big_n = T::from_usize_lossy(self.dimension());
        let phi3 = ConditionCheck::new(
            "phi3",
            report.ell2 > T::one() && report.em2 < big_n,
            json!({"ell2": f64v(report.ell2), "em2": f64v(report.em2), "N": self.dimension()}),
        );
        let phi3_prime = ConditionCheck::new(
            "phi3_prime",
            report.ell > T::one() && report.ell <= report.em && report.em < big_n,
            json!({"ell": f64v(report.ell), "em": f64v(report.em), "N": self.dimension()}),
        );
        PhiConditionReport { phi1, phi2, phi3, phi3_prime }
    }

    /// Inverse of `Φ` on `[0, ∞)`.
    pub fn inverse(&self, y: T) -> Result<T> {
        self.inverse_from(y, T::one())
    }

    pub(crate) fn inverse_from(&self, y: T, start: T) -> Result<T> {
        if y < T::zero() {
            return Err(Error::Domain(format!("Φ⁻¹ requires y ≥ 0, got {y}")));
        }
        if y == T::zero() {
            return Ok(T::zero());
        }
        invert_increasing(|s| self.big_phi(s), y, start)
    }

    /// Complementary function `Φ̃(t) = max_{s≥0} (ts − Φ(s))`.
    pub fn conjugate(&self, t: T) -> Result<T> {
        if t < T::zero() {
            return Err(Error::Domain(format!("Φ̃(t) requires t ≥ 0, got {t}")));
        }
        if t == T::zero() {
            return Ok(T::zero());
        }
        let g = |s: T| t - self.flux(s);
        let (lo, hi) = bracket_decreasing(g, T::one(), 2000)
            .map_err(|e| Error::NoBracket(format!("solving sφ(s) = {t}: {e}")))?;
        let s = bisect(g, lo, hi);
        Ok(t * s - self.big_phi(s))
    }

    /// Sobolev conjugate `Φ*`, precomputed for repeated evaluation.
    pub fn sobolev_conjugate(&self) -> Result<SobolevConjugate<T>> {
        SobolevConjugate::new(self.clone())
    }
}

/// `Φ*`: the inverse of `G(t) = ∫₀ᵗ Φ⁻¹(s) s^{-(N+1)/N} ds`.
///
/// `G` is tabulated on a log grid with Gauss–Legendre panels; below the cutoff
/// `δ` and above the table the integrand is extended by its local power law.
#[derive(Clone, Debug)]
pub struct SobolevConjugate<T> {
    nfunc: NFunction<T>,
    inv_n: T,
    gl: GaussLegendre<T>,
    /// Panel knots in `ln s`.
    knots: Vec<T>,
    /// `G` at each knot.
    cum: Vec<T>,
    /// Φ⁻¹ at the first and last knot with the local exponents `1/q` there.
    head: (T, T),
    tail: (T, T),
    cutoff_error: T,
}

impl<T: Real> SobolevConjugate<T> {
    pub const PANEL: f64 = 0.5;

    pub fn new(nfunc: NFunction<T>) -> Result<Self> {
        let indices = nfunc.indices();
        let big_n = T::from_usize_lossy(nfunc.dimension());
        if !(indices.em < big_n) {
            return Err(Error::Precondition(format!(
                "Sobolev conjugate needs m < N, got m = {}, N = {}",
                indices.em,
                nfunc.dimension()
            )));
        }
        let inv_n = T::one() / big_n;
        let delta = T::lit(1e-40).max(T::min_positive_value() * T::lit(1e6));
        let s_max = T::lit(1e120).min(T::max_value().sqrt().sqrt());
        let (x0, x1) = (delta.ln(), s_max.ln());
        let panel = T::lit(Self::PANEL);
        let panels = ((x1 - x0) / panel).ceil().to_usize().unwrap_or(1).max(1);
        let gl = GaussLegendre::new(8);

        let head_inv = nfunc.inverse(delta)?;
        let q_head = nfunc.index_quotient(head_inv);
        let head = (head_inv, T::one() / q_head);
        let tail_integral = |inv: T, kappa: T, s: T| inv * s.powf(-inv_n) / (kappa - inv_n);

        let mut knots = Vec::with_capacity(panels + 1);
        let mut cum = Vec::with_capacity(panels + 1);
        knots.push(x0);
        cum.push(tail_integral(head.0, head.1, delta));
        let mut warm = head_inv;
        for k in 0..panels {
            let a = x0 + panel * T::from_usize_lossy(k);
            let b = a + panel;
            let mut err = None;
            let piece = gl.integrate(a, b, |u| {
                match nfunc.inverse_from(u.exp(), warm) {
                    Ok(v) => {
                        warm = v;
                        v * (-u * inv_n).exp()
                    }
                    Err(e) => {
                        err = Some(e);
                        T::nan()
                    }
                }
            });
            if let Some(e) = err {
                return Err(e);
            }
            knots.push(b);
            cum.push(cum[k] + piece);
        }
        let s_top = knots[panels].exp();
        let top_inv = nfunc.inverse_from(s_top, warm)?;
        let tail = (top_inv, T::one() / nfunc.index_quotient(top_inv));

        // Compare the power-law tail at δ with the tail at 10³δ plus the quadrature in between.
        let delta2 = delta * T::lit(1e3);
        let inv2 = nfunc.inverse(delta2)?;
        let alt_tail = tail_integral(inv2, T::one() / nfunc.index_quotient(inv2), delta2);
        let between = gl.integrate(x0, delta2.ln(), |u| {
            nfunc.inverse(u.exp()).unwrap_or(T::nan()) * (-u * inv_n).exp()
        });
        let cutoff_error = ((cum[0] + between) - alt_tail).abs();

        Ok(Self { nfunc, inv_n, gl, knots, cum, head, tail, cutoff_error })
    }

    pub fn nfunction(&self) -> &NFunction<T> {
        &self.nfunc
    }

    /// Difference between tail estimates at `δ` and `10³δ`, an estimate of the cutoff error in `G`.
    pub fn cutoff_error(&self) -> T {
        self.cutoff_error
    }

    /// `G(s)` for `s > 0`.
    pub fn g(&self, s: T) -> T {
        let x = s.ln();
        let n = self.knots.len();
        if x <= self.knots[0] {
            let (inv, kappa) = self.head;
            let delta = self.knots[0].exp();
            let beta = kappa - self.inv_n;
            return inv * delta.powf(-kappa) * s.powf(beta) / beta;
        }
        if x >= self.knots[n - 1] {
            let (inv, kappa) = self.tail;
            let top = self.knots[n - 1].exp();
            let beta = kappa - self.inv_n;
            return self.cum[n - 1] + inv * top.powf(-kappa) * (s.powf(beta) - top.powf(beta)) / beta;
        }
        let k = (((x - self.knots[0]) / T::lit(Self::PANEL)).floor().to_usize().unwrap_or(0)).min(n - 2);
        self.cum[k] + self.partial(k, x)
    }

    fn partial(&self, k: usize, x: T) -> T {
        let a = self.knots[k];
        self.gl
            .integrate(a, x, |u| self.nfunc.inverse(u.exp()).unwrap_or(T::nan()) * (-u * self.inv_n).exp())
    }

    /// `Φ*(t)` for `t > 0`.
    pub fn eval(&self, t: T) -> Result<T> {
        if !(t > T::zero()) {
            return Err(Error::Domain(format!("Φ*(t) requires t > 0, got {t}")));
        }
        let n = self.knots.len();
        if t <= self.cum[0] {
            let (inv, kappa) = self.head;
            let delta = self.knots[0].exp();
            let beta = kappa - self.inv_n;
            return Ok((t * beta * delta.powf(kappa) / inv).powf(T::one() / beta));
        }
        if t >= self.cum[n - 1] {
            let (inv, kappa) = self.tail;
            let top = self.knots[n - 1].exp();
            let beta = kappa - self.inv_n;
            let v = (t - self.cum[n - 1]) * beta * top.powf(kappa) / inv + top.powf(beta);
            return Ok(v.powf(T::one() / beta));
        }
        let k = match self.cum.binary_search_by(|v| v.partial_cmp(&t).unwrap_or(std::cmp::Ordering::Less)) {
            Ok(i) => return Ok(self.knots[i].exp()),
            Err(i) => i - 1,
        };
        let target = t - self.cum[k];
        let x = bisect(|x| target - self.partial(k, x), self.knots[k], self.knots[k + 1]);
        Ok(x.exp())
    }
}
