//! Reaction terms `f(t)`, their antiderivatives and sign truncations.
//!
//! Built-ins are autonomous; the `x` argument of the Carathéodory form is kept
//! out of the evaluation API until a spatially varying kind exists.

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::error::{Error, Result};
use crate::interp::MonotoneCubic;
use crate::nfunction::{ConditionCheck, NFunction, NFunctionSpec, PhiKind};
use crate::quadrature::GaussLegendre;
use crate::scalar::{log_grid, Real};

/// Relative safety margin used when sampling the small-amplitude bound against `λ₁`.
pub const F2_MARGIN: f64 = 1e-3;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind")]
pub enum FKind<T> {
    /// `f(t) = |t|^{q-2} t`.
    #[serde(rename = "power")]
    Power { q: T },
    /// `F(t) = |t|^p log(1 + |t|)`, `f = F'`, odd.
    #[serde(rename = "log_example")]
    LogExample { p: T },
    /// Samples of `f` at increasing positive `t`, extended oddly.
    #[serde(rename = "table")]
    Tabulated { t: Vec<T>, f: Vec<T> },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EnvelopeSpec<T> {
    /// The N-function `Ψ`, with `ψ = Ψ'`.
    pub psi: PhiKind<T>,
    #[serde(rename = "C")]
    pub c: T,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NonlinearitySpec<T> {
    #[serde(flatten)]
    pub kind: FKind<T>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub envelope: Option<EnvelopeSpec<T>>,
}

impl<T: Real> NonlinearitySpec<T> {
    pub fn power(q: T) -> Self {
        Self { kind: FKind::Power { q }, envelope: None }
    }

    pub fn log_example(p: T) -> Self {
        Self { kind: FKind::LogExample { p }, envelope: None }
    }

    pub fn tabulated(t: Vec<T>, f: Vec<T>) -> Self {
        Self { kind: FKind::Tabulated { t, f }, envelope: None }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Sign {
    Plus,
    Minus,
}

/// `|f(t)| ≤ C (1 + ψ(|t|))` with `ψ = Ψ'`.
#[derive(Clone, Debug)]
pub struct GrowthEnvelope<T> {
    pub psi: NFunction<T>,
    pub c: T,
    pub ell_psi: T,
    pub em_psi: T,
}

#[derive(Clone, Debug)]
struct FTable<T> {
    /// Interpolates `f(t)/t`.
    cubic: MonotoneCubic<T>,
    cum: Vec<T>,
    k_lo: T,
    k_hi: T,
}

impl<T: Real> FTable<T> {
    fn new(t: Vec<T>, f: Vec<T>) -> Result<Self> {
        if t.len() != f.len() {
            return Err(Error::LengthMismatch { expected: t.len(), got: f.len() });
        }
        if t.len() < 3 || t[0] <= T::zero() {
            return Err(Error::InvalidSpec("tabulated f needs at least 3 samples at positive t".into()));
        }
        if f.iter().any(|v| *v <= T::zero()) {
            return Err(Error::InvalidSpec("tabulated f must be positive for t > 0".into()));
        }
        let g: Vec<T> = t.iter().zip(&f).map(|(t, f)| *f / *t).collect();
        let n = t.len();
        let k_lo = (g[1] / g[0]).ln() / (t[1] / t[0]).ln();
        let k_hi = (g[n - 1] / g[n - 2]).ln() / (t[n - 1] / t[n - 2]).ln();
        if k_lo <= -T::one() {
            return Err(Error::InvalidSpec("tabulated f does not vanish at the origin".into()));
        }
        let cubic = MonotoneCubic::new(t, g)?;
        let gl = GaussLegendre::<T>::new(5);
        let x = cubic.knots().to_vec();
        let mut cum = vec![cubic.values()[0] * x[0] * x[0] / (k_lo + T::lit(2.0))];
        for k in 0..n - 1 {
            let piece = gl.integrate(x[k], x[k + 1], |s| s * cubic.eval(s));
            cum.push(cum[k] + piece);
        }
        Ok(Self { cubic, cum, k_lo, k_hi })
    }

    /// `g = f/t` and `g'` at `t > 0`.
    fn g2(&self, t: T) -> (T, T) {
        let x = self.cubic.knots();
        let y = self.cubic.values();
        let n = x.len();
        if t < x[0] {
            let v = y[0] * (t / x[0]).powf(self.k_lo);
            (v, self.k_lo * v / t)
        } else if t > x[n - 1] {
            let v = y[n - 1] * (t / x[n - 1]).powf(self.k_hi);
            (v, self.k_hi * v / t)
        } else {
            let (v, d, _) = self.cubic.eval3(t);
            (v, d)
        }
    }

    fn big_f(&self, t: T) -> T {
        let x = self.cubic.knots();
        let y = self.cubic.values();
        let n = x.len();
        let two = T::lit(2.0);
        if t < x[0] {
            y[0] * x[0] * x[0] / (self.k_lo + two) * (t / x[0]).powf(self.k_lo + two)
        } else if t > x[n - 1] {
            let k2 = self.k_hi + two;
            let tn = x[n - 1];
            let last = self.cum[n - 1];
            if k2.abs() < T::lit(1e-12) {
                last + y[n - 1] * tn * tn * (t / tn).ln()
            } else {
                last + y[n - 1] * tn * tn / k2 * ((t / tn).powf(k2) - T::one())
            }
        } else {
            let k = self.cubic.segment_of(t);
            let gl = GaussLegendre::<T>::new(5);
            self.cum[k] + gl.integrate(x[k], t, |s| s * self.cubic.eval(s))
        }
    }
}

#[derive(Clone, Debug)]
pub struct Nonlinearity<T> {
    spec: NonlinearitySpec<T>,
    table: Option<FTable<T>>,
    truncation: Option<Sign>,
    envelope: Option<GrowthEnvelope<T>>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct FConditionReport {
    pub f1: ConditionCheck,
    pub f2: ConditionCheck,
    pub f2_limsup: ConditionCheck,
    pub f3: ConditionCheck,
    pub f0: Option<ConditionCheck>,
    pub psi1: Option<ConditionCheck>,
}

impl FConditionReport {
    pub fn checks(&self) -> Vec<&ConditionCheck> {
        let mut v = vec![&self.f1, &self.f2, &self.f2_limsup, &self.f3];
        v.extend(self.f0.iter());
        v.extend(self.psi1.iter());
        v
    }

    pub fn all_pass(&self) -> bool {
        self.checks().iter().all(|c| c.passed)
    }
}

impl<T: Real> Nonlinearity<T> {
    /// Builds the evaluator. `ambient_dimension` is only used for the envelope's `Ψ`.
    pub fn new(spec: NonlinearitySpec<T>, ambient_dimension: usize) -> Result<Self> {
        let table = match &spec.kind {
            FKind::Power { q } => {
                if !(*q > T::one()) {
                    return Err(Error::InvalidSpec(format!("power nonlinearity needs q > 1, got {q}")));
                }
                None
            }
            FKind::LogExample { p } => {
                if !(*p > T::one()) {
                    return Err(Error::InvalidSpec(format!("log example needs p > 1, got {p}")));
                }
                None
            }
            FKind::Tabulated { t, f } => Some(FTable::new(t.clone(), f.clone())?),
        };
        let envelope = match &spec.envelope {
            None => None,
            Some(env) => {
                if !(env.c > T::zero()) {
                    return Err(Error::InvalidSpec("envelope constant C must be positive".into()));
                }
                let psi = NFunction::new_unwindowed(NFunctionSpec {
                    kind: env.psi.clone(),
                    ambient_dimension,
                })?;
                let idx = psi.indices();
                Some(GrowthEnvelope { psi, c: env.c, ell_psi: idx.ell, em_psi: idx.em })
            }
        };
        Ok(Self { spec, table, truncation: None, envelope })
    }

    pub fn spec(&self) -> &NonlinearitySpec<T> {
        &self.spec
    }

    pub fn truncation(&self) -> Option<Sign> {
        self.truncation
    }

    pub fn envelope(&self) -> Option<&GrowthEnvelope<T>> {
        self.envelope.as_ref()
    }

    /// `f⁺` (keeps `t ≥ 0`) or `f⁻` (keeps `t ≤ 0`); antiderivatives follow.
    pub fn truncate(&self, sign: Sign) -> Self {
        Self { truncation: Some(sign), ..self.clone() }
    }

    #[inline]
    fn active(&self, t: T) -> bool {
        match self.truncation {
            None => true,
            Some(Sign::Plus) => t >= T::zero(),
            Some(Sign::Minus) => t <= T::zero(),
        }
    }

    /// `f(t)` of the untruncated kind on `t ≥ 0`.
    fn f_pos(&self, t: T) -> T {
        if t == T::zero() {
            return T::zero();
        }
        match &self.spec.kind {
            FKind::Power { q } => t.powf(*q - T::one()),
            FKind::LogExample { p } => {
                let p = *p;
                p * t.powf(p - T::one()) * t.ln_1p() + t.powf(p) / (T::one() + t)
            }
            FKind::Tabulated { .. } => t * self.ftable().g2(t).0,
        }
    }

    fn ftable(&self) -> &FTable<T> {
        self.table.as_ref().expect("tabulated kind carries a table")
    }

    pub fn f(&self, t: T) -> T {
        if !self.active(t) {
            return T::zero();
        }
        if t < T::zero() {
            -self.f_pos(-t)
        } else {
            self.f_pos(t)
        }
    }

    pub fn big_f(&self, t: T) -> T {
        if !self.active(t) {
            return T::zero();
        }
        let a = t.abs();
        if a == T::zero() {
            return T::zero();
        }
        match &self.spec.kind {
            FKind::Power { q } => a.powf(*q) / *q,
            FKind::LogExample { p } => a.powf(*p) * a.ln_1p(),
            FKind::Tabulated { .. } => self.ftable().big_f(a),
        }
    }

    /// `∂f/∂t`.
    pub fn f_prime(&self, t: T) -> Result<T> {
        if t != T::zero() && !self.active(t) {
            return Ok(T::zero());
        }
        let a = t.abs();
        let one = T::one();
        let two = T::lit(2.0);
        if a == T::zero() {
            let order = match &self.spec.kind {
                FKind::Power { q } => *q - two,
                FKind::LogExample { p } => *p - two,
                FKind::Tabulated { .. } => self.ftable().k_lo,
            };
            return if order > T::zero() {
                Ok(T::zero())
            } else if order == T::zero() && matches!(self.spec.kind, FKind::Power { .. }) {
                Ok(one)
            } else {
                Err(Error::Domain("f'(0) does not exist for this nonlinearity".into()))
            };
        }
        Ok(match &self.spec.kind {
            FKind::Power { q } => (*q - one) * a.powf(*q - two),
            FKind::LogExample { p } => {
                let p = *p;
                let s = one + a;
                p * (p - one) * a.powf(p - two) * a.ln_1p() + two * p * a.powf(p - one) / s - a.powf(p) / (s * s)
            }
            FKind::Tabulated { .. } => {
                let (g, dg) = self.ftable().g2(a);
                g + a * dg
            }
        })
    }

    /// Samples (f0)–(f3) and (ψ1) against `phi`, whose upper index `m` sets the
    /// superlinearity exponent.
    pub fn check_conditions(&self, phi: &NFunction<T>, lambda1: T) -> FConditionReport {
        let idx = phi.indices();
        let em = idx.em;
        let sides: Vec<T> = [T::one(), -T::one()].into_iter().filter(|s| self.active(*s)).collect();
        let quotient = |t: T| self.f(t) / (t.abs().powf(em - T::lit(2.0)) * t);
        let f64v = |x: T| x.to_f64_lossy();

        // (f1): the quotient increases with |t| on each active half-line.
        let grid = log_grid(T::lit(1e-6), T::lit(1e6), 512);
        let mut f1_witness = Value::Null;
        'outer: for &s in &sides {
            let mut prev = quotient(s * grid[0]);
            for w in grid.windows(2) {
                let next = quotient(s * w[1]);
                if !(next > prev) {
                    f1_witness = json!({"t0": f64v(s * w[0]), "t1": f64v(s * w[1]), "q0": f64v(prev), "q1": f64v(next)});
                    break 'outer;
                }
                prev = next;
            }
        }
        let f1 = ConditionCheck::new("f1", f1_witness.is_null() && !sides.is_empty(), f1_witness);

        let bound = lambda1 * (T::one() - T::lit(F2_MARGIN));
        let small: Vec<T> = (3..=8).map(|k| T::lit(10f64.powi(-k))).collect();
        let mut worst = T::neg_infinity();
        let mut worst_limsup = T::neg_infinity();
        for &s in &sides {
            for &t in &small {
                let x = s * t;
                worst = worst.max(self.f(x) / phi.flux(x));
                worst_limsup = worst_limsup.max(x * self.f(x) / phi.big_phi(x));
            }
        }
        let f2 = ConditionCheck::new(
            "f2",
            worst < bound,
            json!({"max_quotient": f64v(worst), "bound": f64v(bound), "lambda1": f64v(lambda1)}),
        );
        let limsup_bound = lambda1 / em;
        let f2_limsup = ConditionCheck::new(
            "f2_limsup",
            worst_limsup < limsup_bound,
            json!({"max_quotient": f64v(worst_limsup), "bound": f64v(limsup_bound)}),
        );

        // (f3): the quotient keeps rising across decades and grows by at least 10x.
        let mut f3_pass = !sides.is_empty();
        let mut f3_witness = json!({});
        for &s in &sides {
            let q: Vec<T> = (0..=12).map(|k| quotient(s * T::lit(10f64.powi(k)))).collect();
            let rising = q.windows(2).all(|w| w[1] > w[0]);
            let growth = q[12] / q[0];
            if !(rising && growth >= T::lit(10.0)) {
                f3_pass = false;
            }
            f3_witness = json!({"side": f64v(s), "q_at_1": f64v(q[0]), "q_at_1e12": f64v(q[12]), "growth": f64v(growth)});
            if !f3_pass {
                break;
            }
        }
        let f3 = ConditionCheck::new("f3", f3_pass, f3_witness);

        let (f0, psi1) = match &self.envelope {
            None => (None, None),
            Some(env) => {
                let mut worst_ratio = T::neg_infinity();
                let mut at = T::zero();
                for &s in &[T::one(), -T::one()] {
                    for &t in &grid {
                        let x = s * t;
                        let r = self.f(x).abs() / (env.c * (T::one() + env.psi.flux(t)));
                        if r > worst_ratio {
                            worst_ratio = r;
                            at = x;
                        }
                    }
                }
                let f0 = ConditionCheck::new(
                    "f0",
                    worst_ratio <= T::one(),
                    json!({"max_ratio": f64v(worst_ratio), "t": f64v(at)}),
                );
                let psi1 = ConditionCheck::new(
                    "psi1",
                    T::one() < idx.ell
                        && idx.em < env.ell_psi
                        && env.ell_psi <= env.em_psi
                        && env.em_psi < idx.ell_star,
                    json!({
                        "ell": f64v(idx.ell), "em": f64v(idx.em),
                        "ell_psi": f64v(env.ell_psi), "em_psi": f64v(env.em_psi),
                        "ell_star": f64v(idx.ell_star),
                    }),
                );
                (Some(f0), Some(psi1))
            }
        };
        FConditionReport { f1, f2, f2_limsup, f3, f0, psi1 }
    }
}
