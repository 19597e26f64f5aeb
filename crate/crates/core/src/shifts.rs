//! Weight sequences, the associated sequence `v`, and shift-level checks.
//!
//! `v_n = 1/(w_1⋯w_n)` with `v_0 = 1`; everything is stored as `ln v_n`.

use crate::logmath::{
    nonvanishing_certificate, sup_trend, tail_sum_test, vanishing_test, LogReal, LogSum, TailVerdict, Trend, Vanishing,
};
use crate::search::SearchConfig;
use crate::seqdsl::{self, Bindings, Expr};
use crate::spaces::{check_normable, FiniteVector, Order, SpaceSpec};
use crate::verdict::{all_of, Outcome, Verdict, Witness};
use std::fmt;
use std::sync::{Arc, RwLock};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum WeightError {
    #[error("weight w_{index} = {value} is not strictly positive")]
    NonPositive { index: usize, value: f64 },
    #[error("v_0 must equal 1, got ln v_0 = {0}")]
    BadStart(f64),
    #[error("empty weight table")]
    Empty,
}

type LnFn = Arc<dyn Fn(usize) -> f64 + Send + Sync>;

#[derive(Clone)]
enum Source {
    /// `n ↦ ln w_n` for `n ≥ 1`.
    LnW(LnFn),
    /// `n ↦ ln v_n` for `n ≥ 0`.
    LnV(LnFn),
}

/// A positive weight sequence with a lazily extended cache of `ln v`.
#[derive(Clone)]
pub struct WeightSeq {
    label: String,
    source: Source,
    cache: Arc<RwLock<Arc<Vec<f64>>>>,
    pub notes: Vec<String>,
}

impl fmt::Debug for WeightSeq {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "WeightSeq({})", self.label)
    }
}

impl WeightSeq {
    fn with_source(label: impl Into<String>, source: Source) -> Self {
        WeightSeq {
            label: label.into(),
            source,
            cache: Arc::new(RwLock::new(Arc::new(Vec::new()))),
            notes: Vec::new(),
        }
    }

    pub fn from_ln_w(label: impl Into<String>, f: impl Fn(usize) -> f64 + Send + Sync + 'static) -> Self {
        Self::with_source(label, Source::LnW(Arc::new(f)))
    }

    pub fn from_ln_v(label: impl Into<String>, f: impl Fn(usize) -> f64 + Send + Sync + 'static) -> Self {
        Self::with_source(label, Source::LnV(Arc::new(f)))
    }

    /// `w_n = c`.
    pub fn constant(c: f64) -> Result<Self, WeightError> {
        if !(c > 0.0) {
            return Err(WeightError::NonPositive { index: 1, value: c });
        }
        let lc = c.ln();
        Ok(Self::from_ln_w(format!("constant:{c}"), move |_| lc))
    }

    /// `w_n = c^n`.
    pub fn geometric(c: f64) -> Result<Self, WeightError> {
        if !(c > 0.0) {
            return Err(WeightError::NonPositive { index: 1, value: c });
        }
        let lc = c.ln();
        Ok(Self::from_ln_w(format!("geometric:{c}"), move |n| n as f64 * lc))
    }

    /// Table `w_1, w_2, …`; signs are dropped, the last entry repeats past the table.
    pub fn from_table(values: &[f64]) -> Result<Self, WeightError> {
        if values.is_empty() {
            return Err(WeightError::Empty);
        }
        let mut notes = Vec::new();
        let mut lns = Vec::with_capacity(values.len());
        for (i, &x) in values.iter().enumerate() {
            if x == 0.0 || !x.is_finite() {
                return Err(WeightError::NonPositive { index: i + 1, value: x });
            }
            if x < 0.0 && notes.is_empty() {
                notes.push("negative weights replaced by their moduli".to_string());
            }
            lns.push(x.abs().ln());
        }
        let lns = Arc::new(lns);
        let mut w = Self::from_ln_w(format!("table[{}]", values.len()), move |n| {
            lns[(n.max(1) - 1).min(lns.len() - 1)]
        });
        w.notes = notes;
        Ok(w)
    }

    /// `w_n` given by an expression in `n`.
    pub fn from_expr(expr: Expr) -> Self {
        let label = format!("expr:{expr}");
        let e = Arc::new(expr);
        Self::from_ln_w(label, move |n| match seqdsl::eval_log(&e, &Bindings::n(n as f64)) {
            Ok(v) if !v.is_zero() => v.ln(),
            _ => f64::NAN,
        })
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn set_label(&mut self, label: impl Into<String>) {
        self.label = label.into();
    }

    /// `ln v_0, …, ln v_h`.
    pub fn ln_v_prefix(&self, h: usize) -> Arc<Vec<f64>> {
        let need = h + 1;
        {
            let c = self.cache.read().expect("weight cache poisoned");
            if c.len() >= need {
                return Arc::clone(&c);
            }
        }
        let mut guard = self.cache.write().expect("weight cache poisoned");
        if guard.len() < need {
            let target = need.max(2 * guard.len());
            let mut v: Vec<f64> = guard.as_ref().clone();
            v.reserve(target - v.len());
            match &self.source {
                Source::LnV(f) => {
                    for n in v.len()..target {
                        v.push(if n == 0 { 0.0 } else { f(n) });
                    }
                }
                Source::LnW(f) => {
                    if v.is_empty() {
                        v.push(0.0);
                    }
                    for n in v.len()..target {
                        let prev = v[n - 1];
                        v.push(prev - f(n));
                    }
                }
            }
            *guard = Arc::new(v);
        }
        Arc::clone(&guard)
    }

    pub fn ln_v(&self, n: usize) -> f64 {
        self.ln_v_prefix(n)[n]
    }

    /// `ln w_n` for `n ≥ 1`.
    pub fn ln_w(&self, n: usize) -> f64 {
        assert!(n >= 1, "weights are indexed from 1");
        match &self.source {
            Source::LnW(f) => f(n),
            Source::LnV(_) => {
                let v = self.ln_v_prefix(n);
                v[n - 1] - v[n]
            }
        }
    }

    /// Checks that `w_1..=w_h` are positive reals.
    pub fn validate(&self, h: usize) -> Result<(), WeightError> {
        let v = self.ln_v_prefix(h);
        for n in 1..=h {
            let lw = v[n - 1] - v[n];
            if !lw.is_finite() {
                return Err(WeightError::NonPositive {
                    index: n,
                    value: lw.exp(),
                });
            }
        }
        Ok(())
    }
}

/// `v_0..=v_N` from `w_1..=w_N`.
pub fn v_from_w(w: &[LogReal]) -> Result<Vec<LogReal>, WeightError> {
    let mut out = Vec::with_capacity(w.len() + 1);
    out.push(LogReal::ONE);
    let mut acc = 0.0;
    for (i, wi) in w.iter().enumerate() {
        if wi.is_zero() {
            return Err(WeightError::NonPositive {
                index: i + 1,
                value: 0.0,
            });
        }
        acc -= wi.ln();
        out.push(LogReal::from_ln(acc).map_err(|_| WeightError::NonPositive {
            index: i + 1,
            value: wi.value(),
        })?);
    }
    Ok(out)
}

/// `w_1..=w_N` from `v_0..=v_N`, requiring `v_0 = 1`.
pub fn w_from_v(v: &[LogReal]) -> Result<Vec<LogReal>, WeightError> {
    match v.first() {
        None => return Err(WeightError::Empty),
        Some(v0) if v0.ln() != 0.0 => return Err(WeightError::BadStart(v0.ln())),
        _ => {}
    }
    let mut out = Vec::with_capacity(v.len() - 1);
    for n in 1..v.len() {
        if v[n].is_zero() {
            return Err(WeightError::NonPositive { index: n, value: 0.0 });
        }
        out.push(LogReal::from_ln(v[n - 1].ln() - v[n].ln()).expect("finite ratio"));
    }
    Ok(out)
}

/// `B_w^n x`: coordinate `k` is `(v_k / v_{k+n}) x_{k+n}`.
pub fn apply_power(w: &WeightSeq, x: &FiniteVector, n: usize) -> FiniteVector {
    if n == 0 {
        return x.clone();
    }
    let top = x.support.last().copied().unwrap_or(0);
    let v = w.ln_v_prefix(top);
    let mut out = FiniteVector::default();
    for (&j, &c) in x.support.iter().zip(&x.coords) {
        if j < n {
            continue;
        }
        let k = j - n;
        let coord = (v[k] - v[j]).exp() * c;
        if coord != 0.0 {
            out.support.push(k);
            out.coords.push(coord);
        }
    }
    out
}

/// `ln( v_{n-1}^p a_{m,n-1} / (v_n^p a_{μ,n}) )` for `n = 1..h`.
fn operator_ratios(space: &SpaceSpec, v: &[f64], m: u64, mu: u64, h: usize) -> Vec<f64> {
    let p = space.order.p();
    let am = space.ln_row(m, h + 1);
    let amu = space.ln_row(mu, h + 1);
    let len = am.len().min(amu.len()).min(v.len());
    (1..len).map(|n| p * (v[n - 1] - v[n]) + am[n - 1] - amu[n]).collect()
}

/// Continuity of `B_w`: for every probe `m` a ladder `(μ, C)` bounding the ratio.
pub fn check_operator(space: &SpaceSpec, w: &WeightSeq, cfg: &SearchConfig) -> Verdict {
    let h = cfg.horizon;
    let v = w.ln_v_prefix(h);
    let mut verdict = Verdict::new(Outcome::Undetermined, h);
    let mut outcomes = Vec::new();
    for &m in &cfg.probes {
        let mut found = None;
        let mut all_growing = true;
        for mu in cfg.mu_ladder(m) {
            let r = operator_ratios(space, &v, m, mu, h);
            verdict.truncate_to(r.len() + 1);
            match sup_trend(&r, cfg.margin) {
                Trend::Bounded => {
                    let sup = r.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                    found = Some((mu, sup));
                    break;
                }
                Trend::Growing => {}
                Trend::Unclear => all_growing = false,
            }
        }
        outcomes.push(match found {
            Some((mu, sup)) => {
                verdict.witnesses.push(
                    Witness::new(format!("m={m}"))
                        .with("m", m as f64)
                        .with("mu", mu as f64)
                        .with("C", cfg.c_witness(sup).unwrap_or(sup.exp())),
                );
                Outcome::Holds
            }
            None if all_growing => {
                verdict.note(format!("m={m}: ratio unbounded for every ladder μ ≤ {}", cfg.mu_max));
                Outcome::Fails
            }
            None => Outcome::Undetermined,
        });
    }
    verdict.outcome = all_of(outcomes);
    verdict
}

/// `ln(v_n^p a_{m,n})` for `n ≤ h`, cut at overflow.
pub fn chaos_terms(space: &SpaceSpec, v: &[f64], m: u64, h: usize) -> Vec<f64> {
    let p = space.order.p();
    let a = space.ln_row(m, h + 1);
    let len = a.len().min(v.len());
    (0..len).map(|n| p * v[n] + a[n]).collect()
}

/// Whether terms `ln(|x_n|^p a_{m,n})` describe a member of the space (summable for `λ^p`, null for `c_0`).
pub fn series_membership(order: Order, terms: &[f64], cfg: &SearchConfig) -> (Outcome, String) {
    match order {
        Order::Lp(_) => {
            let rep = tail_sum_test(terms, cfg.tuning());
            let o = match rep.verdict {
                TailVerdict::Converges => Outcome::Holds,
                TailVerdict::Diverges => Outcome::Fails,
                TailVerdict::Undetermined => Outcome::Undetermined,
            };
            (o, rep.certificate)
        }
        Order::C0 => {
            if let Some(cert) = nonvanishing_certificate(terms, cfg.tuning()) {
                (Outcome::Fails, cert.to_string())
            } else {
                match vanishing_test(terms, cfg.margin) {
                    Vanishing::TendsToZero => (Outcome::Holds, "terms tend to zero".into()),
                    Vanishing::BoundedBelow => (Outcome::Fails, "terms bounded below".into()),
                    Vanishing::Undetermined => (Outcome::Undetermined, "no certificate".into()),
                }
            }
        }
    }
}

/// Chaos: convergence of `Σ v_n e_n`, tested per probe seminorm.
pub fn check_chaotic(space: &SpaceSpec, w: &WeightSeq, cfg: &SearchConfig) -> Verdict {
    let h = cfg.horizon;
    let v = w.ln_v_prefix(h);
    let mut verdict = Verdict::new(Outcome::Undetermined, h);
    let op = check_operator(space, w, cfg);
    if !op.holds() {
        verdict.note(format!(
            "warning: operator condition is {}; chaos verdict is not meaningful",
            op.outcome
        ));
    }
    let mut outcomes = Vec::new();
    for &m in &cfg.probes {
        let terms = chaos_terms(space, &v, m, h);
        verdict.truncate_to(terms.len());
        let (outcome, cert) = series_membership(space.order, &terms, cfg);
        verdict.note(format!("m={m}: {outcome} ({cert})"));
        outcomes.push(outcome);
    }
    verdict.outcome = all_of(outcomes);
    verdict
}

/// Boundedness of the partial sums `Σ_{n≤N} v_n e_n` in every probe seminorm.
pub fn check_ufhc_necessary(space: &SpaceSpec, w: &WeightSeq, cfg: &SearchConfig) -> Verdict {
    let h = cfg.horizon;
    let v = w.ln_v_prefix(h);
    let p = space.order.p();
    let mut verdict = Verdict::new(Outcome::Undetermined, h);
    let mut outcomes = Vec::new();
    for &m in &cfg.probes {
        let terms = chaos_terms(space, &v, m, h);
        verdict.truncate_to(terms.len());
        let mut partial = Vec::with_capacity(terms.len());
        match space.order {
            Order::C0 => {
                let mut best = f64::NEG_INFINITY;
                for t in &terms {
                    best = best.max(*t);
                    partial.push(best);
                }
            }
            Order::Lp(_) => {
                let mut acc = LogSum::default();
                for t in &terms {
                    acc.push(*t);
                    partial.push(acc.ln() / p);
                }
            }
        }
        let o = match sup_trend(&partial, cfg.margin) {
            Trend::Bounded => Outcome::Holds,
            Trend::Growing => Outcome::Fails,
            Trend::Unclear => Outcome::Undetermined,
        };
        let last = partial.last().copied().unwrap_or(f64::NEG_INFINITY);
        verdict.witnesses.push(
            Witness::new(format!("m={m}"))
                .with("m", m as f64)
                .with("ln_partial_sup", last),
        );
        outcomes.push(o);
    }
    verdict.outcome = all_of(outcomes);
    if check_normable(space, cfg).outcome != Outcome::Holds {
        verdict.note("advisory: boundedness is a proven necessary condition on Banach spaces only");
    }
    verdict
}
