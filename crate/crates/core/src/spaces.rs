//! Köthe matrices, the sequence spaces they define, and their structural checks.
//!
//! Entries are handled as logarithms. A row `n ↦ ln a_{m,n}` is computed once
//! per `m` and cached; it ends at the first entry whose logarithm leaves the
//! `f64` range, which becomes the effective horizon of every scan using it.

use crate::logmath::{finite_prefix, inf_trend, log_sum_exp, sup_trend, tail_sum_test, LogReal, TailVerdict, Trend};
use crate::search::SearchConfig;
use crate::seqdsl::{self, Bindings, Expr};
use crate::verdict::{all_of, Outcome, Verdict, Witness};
use serde::{Deserialize, Serialize};
use std::collections::HashMap;
use std::fmt;
use std::sync::{Arc, Mutex, RwLock};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SpaceError {
    #[error("unknown builtin space `{0}`")]
    UnknownBuiltin(String),
    #[error("α is not a positive nondecreasing sequence: fails at n = {n}")]
    InvalidAlpha { n: usize },
    #[error("entry a(m={m}, n={n}) is not strictly positive")]
    NonPositiveEntry { m: u64, n: usize },
    #[error("column monotonicity violated: a(m={m}, n={n}) > a(m={next}, n={n})")]
    ColumnMonotonicity { m: u64, next: u64, n: usize },
    #[error("entry a(m={m}, n={n}) leaves the representable range")]
    Overflow { m: u64, n: usize },
    #[error("vector support and coordinates differ in length or are unsorted")]
    MalformedVector,
    #[error("expression error: {0}")]
    Expr(String),
}

type LnGen = Arc<dyn Fn(usize) -> f64 + Send + Sync>;
type LnEntry = Arc<dyn Fn(u64, usize) -> f64 + Send + Sync>;

/// A positive nondecreasing sequence `α`, stored as `ln α_n` with a growable cache.
#[derive(Clone)]
pub struct AlphaSeq {
    label: String,
    gen: LnGen,
    cache: Arc<RwLock<Arc<Vec<f64>>>>,
}

impl fmt::Debug for AlphaSeq {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "AlphaSeq({})", self.label)
    }
}

impl AlphaSeq {
    pub fn from_ln_fn(label: impl Into<String>, gen: impl Fn(usize) -> f64 + Send + Sync + 'static) -> Self {
        AlphaSeq {
            label: label.into(),
            gen: Arc::new(gen),
            cache: Arc::new(RwLock::new(Arc::new(Vec::new()))),
        }
    }

    /// `α_n = n + 1`.
    pub fn linear() -> Self {
        Self::from_ln_fn("n+1", |n| ((n + 1) as f64).ln())
    }

    /// `α_n = 2^n`.
    pub fn exponential() -> Self {
        Self::from_ln_fn("2^n", |n| n as f64 * std::f64::consts::LN_2)
    }

    /// `α_n = (n + 1)!`.
    pub fn factorial() -> Self {
        Self::from_ln_fn("(n+1)!", |n| seqdsl::ln_factorial((n + 1) as f64))
    }

    /// `α_n = log(n + 2)`.
    pub fn logarithmic() -> Self {
        Self::from_ln_fn("log(n+2)", |n| ((n + 2) as f64).ln().ln())
    }

    /// `α_0 = 1` and `α_n = k!` for `2^{k-1} < n ≤ 2^k`.
    pub fn dyadic_factorial() -> Self {
        Self::from_ln_fn("k! on (2^(k-1), 2^k]", |n| {
            if n == 0 {
                0.0
            } else {
                seqdsl::ln_factorial(dyadic_block(n) as f64)
            }
        })
    }

    pub fn from_expr(expr: Expr, validate_to: usize) -> Result<Self, SpaceError> {
        let label = expr.to_string();
        let e = Arc::new(expr);
        let seq = Self::from_ln_fn(label, move |n| match seqdsl::eval_log(&e, &Bindings::n(n as f64)) {
            Ok(v) => v.ln(),
            Err(_) => f64::NAN,
        });
        seq.validate(validate_to)?;
        Ok(seq)
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn ln(&self, n: usize) -> f64 {
        {
            let c = self.cache.read().expect("alpha cache poisoned");
            if n < c.len() {
                return c[n];
            }
        }
        (self.gen)(n)
    }

    pub fn value(&self, n: usize) -> f64 {
        self.ln(n).exp()
    }

    /// `ln α_0, …, ln α_{h-1}`.
    pub fn ln_prefix(&self, h: usize) -> Arc<Vec<f64>> {
        {
            let c = self.cache.read().expect("alpha cache poisoned");
            if c.len() >= h {
                return Arc::clone(&c);
            }
        }
        let mut w = self.cache.write().expect("alpha cache poisoned");
        if w.len() < h {
            let target = h.max(2 * w.len());
            let mut v: Vec<f64> = w.as_ref().clone();
            v.reserve(target - v.len());
            for n in v.len()..target {
                v.push((self.gen)(n));
            }
            *w = Arc::new(v);
        }
        Arc::clone(&w)
    }

    /// Checks positivity and monotonicity on `0..h`.
    pub fn validate(&self, h: usize) -> Result<(), SpaceError> {
        let p = self.ln_prefix(h);
        for n in 0..h {
            if !p[n].is_finite() && p[n] != f64::INFINITY {
                return Err(SpaceError::InvalidAlpha { n });
            }
            if n > 0 && p[n] < p[n - 1] - 1e-12 * p[n - 1].abs().max(1.0) {
                return Err(SpaceError::InvalidAlpha { n });
            }
        }
        Ok(())
    }
}

/// `k` with `2^{k-1} < n ≤ 2^k`, and `0` for `n ≤ 1`.
pub fn dyadic_block(n: usize) -> u32 {
    if n <= 1 {
        0
    } else {
        usize::BITS - (n - 1).leading_zeros()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum PowerType {
    /// Entries `m^{α_n}`.
    Infinite,
    /// Entries `(1 + 1/m)^{-α_n}`.
    Finite,
}

#[derive(Clone)]
pub enum MatrixKind {
    Power(PowerType, AlphaSeq),
    Ones,
    Generic(LnEntry),
}

pub struct KotheMatrix {
    label: String,
    kind: MatrixKind,
    rows: Mutex<HashMap<u64, Arc<Vec<f64>>>>,
}

impl fmt::Debug for KotheMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "KotheMatrix({})", self.label)
    }
}

impl KotheMatrix {
    pub fn new(label: impl Into<String>, kind: MatrixKind) -> Self {
        KotheMatrix {
            label: label.into(),
            kind,
            rows: Mutex::new(HashMap::new()),
        }
    }

    pub fn power(t: PowerType, alpha: AlphaSeq) -> Self {
        let label = match t {
            PowerType::Infinite => format!("m^({})", alpha.label()),
            PowerType::Finite => format!("(1+1/m)^(-({}))", alpha.label()),
        };
        Self::new(label, MatrixKind::Power(t, alpha))
    }

    pub fn generic(label: impl Into<String>, ln_entry: impl Fn(u64, usize) -> f64 + Send + Sync + 'static) -> Self {
        Self::new(label, MatrixKind::Generic(Arc::new(ln_entry)))
    }

    pub fn from_expr(expr: Expr) -> Self {
        let label = expr.to_string();
        let e = Arc::new(expr);
        Self::generic(label, move |m, n| {
            match seqdsl::eval_log(&e, &Bindings::nm(n as f64, m as f64)) {
                Ok(v) => v.ln(),
                Err(_) => f64::NAN,
            }
        })
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn kind(&self) -> &MatrixKind {
        &self.kind
    }

    pub fn power_series(&self) -> Option<(PowerType, &AlphaSeq)> {
        match &self.kind {
            MatrixKind::Power(t, a) => Some((*t, a)),
            _ => None,
        }
    }

    /// `ln a_{m,n}`; non-finite values mark entries outside the representable range.
    pub fn ln_entry(&self, m: u64, n: usize) -> f64 {
        match &self.kind {
            MatrixKind::Ones => 0.0,
            MatrixKind::Power(t, alpha) => power_ln_entry(*t, alpha.ln(n), m),
            MatrixKind::Generic(f) => f(m, n),
        }
    }

    pub fn entry(&self, m: u64, n: usize) -> Result<LogReal, SpaceError> {
        let x = self.ln_entry(m, n);
        if x.is_finite() {
            Ok(LogReal::from_ln(x).expect("finite"))
        } else {
            Err(SpaceError::Overflow { m, n })
        }
    }

    /// `ln a_{m,0..h}`, cut at the first non-finite entry.
    pub fn ln_row(&self, m: u64, h: usize) -> Arc<Vec<f64>> {
        {
            let rows = self.rows.lock().expect("row cache poisoned");
            if let Some(r) = rows.get(&m) {
                if r.len() >= h || r.last().is_some_and(|x| !x.is_finite()) {
                    return Arc::clone(r);
                }
            }
        }
        let mut row = Vec::with_capacity(h);
        match &self.kind {
            MatrixKind::Power(t, alpha) => {
                let a = alpha.ln_prefix(h);
                for n in 0..h {
                    row.push(power_ln_entry(*t, a[n], m));
                }
            }
            _ => {
                for n in 0..h {
                    row.push(self.ln_entry(m, n));
                }
            }
        }
        let cut = row.iter().position(|x| !x.is_finite()).unwrap_or(row.len());
        let overflowed = cut < row.len();
        row.truncate(cut);
        if overflowed {
            row.push(f64::NAN);
        }
        let row = Arc::new(row);
        self.rows
            .lock()
            .expect("row cache poisoned")
            .insert(m, Arc::clone(&row));
        row
    }

    /// Finite part of `ln a_{m,0..h}`.
    pub fn finite_row(&self, m: u64, h: usize) -> Vec<f64> {
        let r = self.ln_row(m, h);
        finite_prefix(&r[..r.len().min(h)]).to_vec()
    }

    /// Checks strict positivity and monotonicity in `m` over probes and `0..h`.
    pub fn validate(&self, probes: &[u64], h: usize) -> Result<(), SpaceError> {
        let mut ms: Vec<u64> = probes.to_vec();
        ms.sort_unstable();
        ms.dedup();
        let rows: Vec<Vec<f64>> = ms.iter().map(|&m| self.finite_row(m, h)).collect();
        for (i, &m) in ms.iter().enumerate() {
            let len = rows[i].len();
            if len < h.min(8) {
                return Err(SpaceError::NonPositiveEntry { m, n: len });
            }
            if i + 1 < ms.len() {
                let next = &rows[i + 1];
                for n in 0..len.min(next.len()) {
                    let tol = 1e-12 * rows[i][n].abs().max(1.0);
                    if rows[i][n] > next[n] + tol {
                        return Err(SpaceError::ColumnMonotonicity { m, next: ms[i + 1], n });
                    }
                }
            }
        }
        Ok(())
    }
}

fn power_ln_entry(t: PowerType, ln_alpha: f64, m: u64) -> f64 {
    match t {
        PowerType::Infinite => {
            if m <= 1 {
                0.0
            } else {
                (ln_alpha + (m as f64).ln().ln()).exp()
            }
        }
        PowerType::Finite => -(ln_alpha + (1.0 / m as f64).ln_1p().ln()).exp(),
    }
}

/// `p ≥ 1` for `λ^p`, or the `c_0` order.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub enum Order {
    Lp(f64),
    C0,
}

impl Order {
    /// Exponent used in sums over coordinates; `1` for `c_0`.
    pub fn p(self) -> f64 {
        match self {
            Order::Lp(p) => p,
            Order::C0 => 1.0,
        }
    }

    pub fn is_c0(self) -> bool {
        matches!(self, Order::C0)
    }

    /// `0` encodes `c_0`.
    pub fn from_number(p: f64) -> Option<Order> {
        if p == 0.0 {
            Some(Order::C0)
        } else if p >= 1.0 && p.is_finite() {
            Some(Order::Lp(p))
        } else {
            None
        }
    }

    pub fn as_number(self) -> f64 {
        match self {
            Order::Lp(p) => p,
            Order::C0 => 0.0,
        }
    }
}

#[derive(Clone, Debug)]
pub struct SpaceSpec {
    pub label: String,
    pub matrix: Arc<KotheMatrix>,
    pub order: Order,
}

pub const BUILTIN_SPACES: [&str; 8] = [
    "entire",
    "disk",
    "s",
    "ces1plus",
    "lacunary2n",
    "dyadic-factorial",
    "ones",
    "nonN",
];

impl SpaceSpec {
    pub fn new(label: impl Into<String>, matrix: KotheMatrix, order: Order) -> Self {
        SpaceSpec {
            label: label.into(),
            matrix: Arc::new(matrix),
            order,
        }
    }

    pub fn builtin(name: &str) -> Result<SpaceSpec, SpaceError> {
        let p1 = Order::Lp(1.0);
        Ok(match name {
            "entire" => make_power_series("entire", AlphaSeq::linear(), PowerType::Infinite, p1),
            "disk" => make_power_series("disk", AlphaSeq::linear(), PowerType::Finite, p1),
            "s" => make_power_series("s", AlphaSeq::logarithmic(), PowerType::Infinite, p1),
            "ces1plus" => make_power_series("ces1plus", AlphaSeq::logarithmic(), PowerType::Finite, p1),
            "dyadic-factorial" => make_power_series(
                "dyadic-factorial",
                AlphaSeq::dyadic_factorial(),
                PowerType::Infinite,
                Order::C0,
            ),
            "lacunary2n" => SpaceSpec::new(
                "lacunary2n",
                KotheMatrix::generic("m^(2^n)", |m, n| {
                    if m <= 1 {
                        0.0
                    } else {
                        (n as f64 * std::f64::consts::LN_2 + (m as f64).ln().ln()).exp()
                    }
                }),
                p1,
            ),
            "ones" => SpaceSpec::new("ones", KotheMatrix::new("1", MatrixKind::Ones), p1),
            "ones-c0" => SpaceSpec::new("ones-c0", KotheMatrix::new("1", MatrixKind::Ones), Order::C0),
            "nonN" => SpaceSpec::new(
                "nonN",
                KotheMatrix::generic("(n+1)^(-1/m)", |m, n| -((n + 1) as f64).ln() / m as f64),
                Order::C0,
            ),
            other => return Err(SpaceError::UnknownBuiltin(other.to_string())),
        })
    }

    pub fn ln_row(&self, m: u64, h: usize) -> Vec<f64> {
        self.matrix.finite_row(m, h)
    }
}

pub fn make_power_series(label: &str, alpha: AlphaSeq, t: PowerType, order: Order) -> SpaceSpec {
    SpaceSpec::new(label, KotheMatrix::power(t, alpha), order)
}

/// A finitely supported sequence with plain coordinates.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct FiniteVector {
    pub support: Vec<usize>,
    pub coords: Vec<f64>,
}

impl FiniteVector {
    pub fn new(support: Vec<usize>, coords: Vec<f64>) -> Result<Self, SpaceError> {
        if support.len() != coords.len() || support.windows(2).any(|p| p[0] >= p[1]) {
            return Err(SpaceError::MalformedVector);
        }
        let (support, coords) = support.into_iter().zip(coords).filter(|(_, c)| *c != 0.0).unzip();
        Ok(FiniteVector { support, coords })
    }

    pub fn unit(n: usize) -> Self {
        FiniteVector {
            support: vec![n],
            coords: vec![1.0],
        }
    }

    pub fn from_pairs(mut pairs: Vec<(usize, f64)>) -> Self {
        pairs.sort_by_key(|p| p.0);
        let mut out = FiniteVector::default();
        for (n, c) in pairs {
            if c == 0.0 {
                continue;
            }
            if out.support.last() == Some(&n) {
                *out.coords.last_mut().expect("nonempty") += c;
            } else {
                out.support.push(n);
                out.coords.push(c);
            }
        }
        out
    }

    pub fn get(&self, n: usize) -> f64 {
        match self.support.binary_search(&n) {
            Ok(i) => self.coords[i],
            Err(_) => 0.0,
        }
    }

    pub fn sub(&self, other: &FiniteVector) -> FiniteVector {
        let mut pairs: Vec<(usize, f64)> = self.support.iter().copied().zip(self.coords.iter().copied()).collect();
        pairs.extend(other.support.iter().copied().zip(other.coords.iter().map(|c| -c)));
        FiniteVector::from_pairs(pairs)
    }
}

/// `‖x‖_m`; `(Σ |x_n|^p a_{m,n})^{1/p}` or `sup |x_n| a_{m,n}`.
pub fn seminorm(space: &SpaceSpec, x: &FiniteVector, m: u64) -> Result<LogReal, SpaceError> {
    let mut terms = Vec::with_capacity(x.support.len());
    for (&n, &c) in x.support.iter().zip(&x.coords) {
        let a = space.matrix.ln_entry(m, n);
        if !a.is_finite() {
            return Err(SpaceError::Overflow { m, n });
        }
        terms.push((c.abs().ln(), a));
    }
    let ln = match space.order {
        Order::C0 => terms.iter().map(|(lx, a)| lx + a).fold(f64::NEG_INFINITY, f64::max),
        Order::Lp(p) => log_sum_exp(terms.iter().map(|(lx, a)| p * lx + a)) / p,
    };
    LogReal::from_ln(ln).map_err(|_| SpaceError::Overflow { m, n: 0 })
}

fn pair_rows(space: &SpaceSpec, m: u64, mu: u64, h: usize) -> (Vec<f64>, Vec<f64>) {
    let a = space.ln_row(m, h);
    let b = space.ln_row(mu, h);
    let len = a.len().min(b.len());
    (a[..len].to_vec(), b[..len].to_vec())
}

/// Nuclearity: for every probe `m` some ladder `μ` gives `Σ a_{m,n}/a_{μ,n} < ∞`.
pub fn check_n(space: &SpaceSpec, cfg: &SearchConfig) -> Verdict {
    let h = cfg.horizon;
    let mut verdict = Verdict::new(Outcome::Undetermined, h);
    let mut per_m = Vec::new();
    for &m in &cfg.probes {
        let mut all_diverge = true;
        let mut found = None;
        for mu in cfg.mu_ladder(m) {
            let (a, b) = pair_rows(space, m, mu, h);
            verdict.truncate_to(a.len());
            let terms: Vec<f64> = a.iter().zip(&b).map(|(x, y)| x - y).collect();
            match tail_sum_test(&terms, cfg.tuning()).verdict {
                TailVerdict::Converges => {
                    found = Some(mu);
                    break;
                }
                TailVerdict::Diverges => {}
                TailVerdict::Undetermined => all_diverge = false,
            }
        }
        per_m.push(match found {
            Some(mu) => {
                verdict
                    .witnesses
                    .push(Witness::new(format!("m={m}")).with("m", m as f64).with("mu", mu as f64));
                Outcome::Holds
            }
            None if all_diverge => {
                verdict.note(format!("m={m}: every ladder μ gives a divergent ratio series"));
                Outcome::Fails
            }
            None => {
                verdict.note(format!("m={m}: no convergence certificate"));
                Outcome::Undetermined
            }
        });
    }
    verdict.outcome = all_of(per_m);
    verdict
}

fn octave_minima(terms: &[f64]) -> Option<[f64; 3]> {
    let h = terms.len();
    if h < 16 {
        return None;
    }
    let min = |s: &[f64]| s.iter().copied().fold(f64::INFINITY, f64::min);
    Some([
        min(&terms[h / 8..h / 4]),
        min(&terms[h / 4..h / 2]),
        min(&terms[h / 2..]),
    ])
}

/// Bounded completeness of the unit vectors in `c_0(A)`:
/// for every probe `m` some `μ` has `liminf a_{m,n}/a_{μ,n} = 0`.
pub fn check_bc(space: &SpaceSpec, cfg: &SearchConfig) -> Verdict {
    let h = cfg.horizon;
    let shrink = (1.0 - cfg.margin).ln();
    let mut verdict = Verdict::new(Outcome::Undetermined, h);
    let mut per_m = Vec::new();
    for &m in &cfg.probes {
        let mut all_bounded = true;
        let mut found = None;
        for mu in cfg.mu_ladder(m) {
            let (a, b) = pair_rows(space, m, mu, h);
            verdict.truncate_to(a.len());
            let terms: Vec<f64> = a.iter().zip(&b).map(|(x, y)| x - y).collect();
            let Some([m1, m2, m3]) = octave_minima(&terms) else {
                all_bounded = false;
                continue;
            };
            if m3 <= m2 + shrink && m2 <= m1 + shrink {
                found = Some((mu, m3));
                break;
            }
            if inf_trend(&terms, cfg.margin) != Trend::Bounded {
                all_bounded = false;
            }
        }
        per_m.push(match found {
            Some((mu, tail)) => {
                verdict.witnesses.push(
                    Witness::new(format!("m={m}"))
                        .with("m", m as f64)
                        .with("mu", mu as f64)
                        .with("ln_tail_inf", tail),
                );
                Outcome::Holds
            }
            None if all_bounded => {
                verdict.note(format!("m={m}: ratios bounded below for every ladder μ"));
                Outcome::Fails
            }
            None => Outcome::Undetermined,
        });
    }
    verdict.outcome = all_of(per_m);
    verdict
}

/// `a_{m,n+1}/a_{1,n} ≤ C a_{J,n+1}/a_{j,n}` for probe pairs `(m, j)` with ladder `J`.
pub fn check_row_domination(space: &SpaceSpec, cfg: &SearchConfig) -> Verdict {
    let h = cfg.horizon;
    let mut verdict = Verdict::new(Outcome::Undetermined, h);
    let mut outcomes = Vec::new();
    let a1 = space.ln_row(1, h);
    for &m in &cfg.probes {
        let am = space.ln_row(m, h);
        for &j in &cfg.probes {
            let aj = space.ln_row(j, h);
            let mut found = None;
            let mut all_growing = true;
            let mut ladder = cfg.mu_ladder(m.max(j));
            ladder.extend(cfg.mu_ladder(m.saturating_mul(j)));
            ladder.sort_unstable();
            ladder.dedup();
            ladder.retain(|&big_j| big_j <= cfg.mu_max);
            for big_j in ladder {
                let aj_big = space.ln_row(big_j, h);
                let len = a1.len().min(am.len()).min(aj.len()).min(aj_big.len());
                if len < 2 {
                    all_growing = false;
                    continue;
                }
                verdict.truncate_to(len);
                let vals: Vec<f64> = (0..len - 1)
                    .map(|n| am[n + 1] - a1[n] - aj_big[n + 1] + aj[n])
                    .collect();
                match sup_trend(&vals, cfg.margin) {
                    Trend::Bounded => {
                        let sup = vals.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                        found = Some((big_j, sup));
                        break;
                    }
                    Trend::Growing => {}
                    Trend::Unclear => all_growing = false,
                }
            }
            outcomes.push(match found {
                Some((big_j, sup)) => {
                    let c = cfg.c_witness(sup).unwrap_or(sup.exp());
                    verdict.witnesses.push(
                        Witness::new(format!("m={m},j={j}"))
                            .with("m", m as f64)
                            .with("j", j as f64)
                            .with("J", big_j as f64)
                            .with("C", c),
                    );
                    Outcome::Holds
                }
                None if all_growing => {
                    verdict.note(format!("(m,j)=({m},{j}): ratio unbounded for every ladder J"));
                    Outcome::Fails
                }
                None => Outcome::Undetermined,
            });
        }
    }
    verdict.outcome = all_of(outcomes);
    verdict
}

/// Normability: one `μ` dominates every row up to a constant.
///
/// Witnesses are limited to `μ` up to the largest probe; the refuting probes are the
/// largest probe, `2μ` and the far row `mu_max`, so slow growth such as `n^{1/μ}` stays visible.
pub fn check_normable(space: &SpaceSpec, cfg: &SearchConfig) -> Verdict {
    let h = cfg.horizon.min(cfg.triangular_horizon.max(4096));
    let mut verdict = Verdict::new(Outcome::Undetermined, h);
    let top = *cfg.probes.iter().max().unwrap_or(&1);
    let mut all_growing = true;
    for mu in cfg.mu_ladder(1).into_iter().filter(|&mu| mu <= top) {
        let trends: Vec<Trend> = [top, mu.saturating_mul(2), cfg.mu_max]
            .iter()
            .map(|&m| {
                let (a, b) = pair_rows(space, m, mu, h);
                let vals: Vec<f64> = a.iter().zip(&b).map(|(x, y)| x - y).collect();
                sup_trend(&vals, cfg.margin)
            })
            .collect();
        if trends.iter().all(|t| *t == Trend::Bounded) {
            verdict.outcome = Outcome::Holds;
            verdict.witnesses.push(Witness::new("mu").with("mu", mu as f64));
            return verdict;
        }
        if !trends.contains(&Trend::Growing) {
            all_growing = false;
        }
    }
    if all_growing {
        verdict.outcome = Outcome::Fails;
        verdict.note("every candidate μ is outgrown by a probe row");
    }
    verdict
}
