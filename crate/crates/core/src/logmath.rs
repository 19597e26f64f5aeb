//! Log-domain arithmetic and finite-horizon asymptotic tests.
//!
//! Every quantity that can leave the `f64` range is carried as its natural
//! logarithm. The tests in this module inspect a finite prefix of a sequence
//! of logarithms and return a three-valued answer; they never claim more than
//! the prefix supports.

use serde::{Deserialize, Deserializer, Serialize, Serializer};
use std::cmp::Ordering;
use std::fmt;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LogError {
    #[error("logarithm {0} is not representable")]
    NotRepresentable(f64),
    #[error("value {0} is negative or NaN and has no logarithm")]
    Negative(f64),
    #[error("division by zero in the log domain")]
    DivisionByZero,
}

/// A nonnegative real stored as its natural logarithm; zero is `-inf`.
#[derive(Clone, Copy, PartialEq)]
pub struct LogReal(f64);

impl LogReal {
    pub const ZERO: LogReal = LogReal(f64::NEG_INFINITY);
    pub const ONE: LogReal = LogReal(0.0);

    pub fn from_ln(ln: f64) -> Result<Self, LogError> {
        if ln.is_nan() || ln == f64::INFINITY {
            Err(LogError::NotRepresentable(ln))
        } else {
            Ok(LogReal(ln))
        }
    }

    pub fn from_value(x: f64) -> Result<Self, LogError> {
        if x.is_nan() || x < 0.0 {
            Err(LogError::Negative(x))
        } else if x.is_infinite() {
            Err(LogError::NotRepresentable(x))
        } else {
            Ok(LogReal(x.ln()))
        }
    }

    pub fn ln(self) -> f64 {
        self.0
    }

    /// The plain value; may underflow to 0 or overflow to `inf`.
    pub fn value(self) -> f64 {
        self.0.exp()
    }

    pub fn is_zero(self) -> bool {
        self.0 == f64::NEG_INFINITY
    }

    pub fn powf(self, p: f64) -> Result<Self, LogError> {
        if self.is_zero() {
            return if p > 0.0 {
                Ok(Self::ZERO)
            } else if p == 0.0 {
                Ok(Self::ONE)
            } else {
                Err(LogError::DivisionByZero)
            };
        }
        Self::from_ln(self.0 * p)
    }

    pub fn checked_mul(self, rhs: Self) -> Result<Self, LogError> {
        Self::from_ln(self.0 + rhs.0)
    }

    pub fn checked_div(self, rhs: Self) -> Result<Self, LogError> {
        if rhs.is_zero() {
            return Err(LogError::DivisionByZero);
        }
        Self::from_ln(self.0 - rhs.0)
    }

    pub fn checked_add(self, rhs: Self) -> Result<Self, LogError> {
        Self::from_ln(log_add_exp(self.0, rhs.0))
    }

    pub fn max(self, rhs: Self) -> Self {
        if self.0 >= rhs.0 {
            self
        } else {
            rhs
        }
    }
}

impl fmt::Debug for LogReal {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "LogReal(ln={})", self.0)
    }
}

impl fmt::Display for LogReal {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "exp({})", self.0)
    }
}

impl Eq for LogReal {}

impl Ord for LogReal {
    fn cmp(&self, other: &Self) -> Ordering {
        self.0.partial_cmp(&other.0).unwrap_or(Ordering::Equal)
    }
}

impl PartialOrd for LogReal {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Serialize for LogReal {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        if self.is_zero() {
            s.serialize_none()
        } else {
            s.serialize_f64(self.0)
        }
    }
}

impl<'de> Deserialize<'de> for LogReal {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let raw = Option::<f64>::deserialize(d)?;
        match raw {
            None => Ok(LogReal::ZERO),
            Some(x) => LogReal::from_ln(x).map_err(serde::de::Error::custom),
        }
    }
}

/// `ln(e^a + e^b)` without overflow.
pub fn log_add_exp(a: f64, b: f64) -> f64 {
    let (hi, lo) = if a >= b { (a, b) } else { (b, a) };
    if lo == f64::NEG_INFINITY {
        return hi;
    }
    hi + (lo - hi).exp().ln_1p()
}

/// Streaming log-sum-exp accumulator.
#[derive(Clone, Copy, Debug)]
pub struct LogSum {
    max: f64,
    scaled: f64,
}

impl Default for LogSum {
    fn default() -> Self {
        LogSum {
            max: f64::NEG_INFINITY,
            scaled: 0.0,
        }
    }
}

impl LogSum {
    pub fn push(&mut self, x: f64) {
        if x == f64::NEG_INFINITY {
            return;
        }
        if x > self.max {
            self.scaled = self.scaled * (self.max - x).exp() + 1.0;
            self.max = x;
        } else {
            self.scaled += (x - self.max).exp();
        }
    }

    pub fn ln(&self) -> f64 {
        if self.max == f64::NEG_INFINITY {
            f64::NEG_INFINITY
        } else {
            self.max + self.scaled.ln()
        }
    }
}

/// `ln Σ e^{x_i}`; the empty sum is `-inf`.
pub fn log_sum_exp<I: IntoIterator<Item = f64>>(terms: I) -> f64 {
    let mut acc = LogSum::default();
    for x in terms {
        acc.push(x);
    }
    acc.ln()
}

/// Shared tuning for the finite-horizon tests.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TestTuning {
    pub window: usize,
    pub margin: f64,
}

impl Default for TestTuning {
    fn default() -> Self {
        TestTuning {
            window: 64,
            margin: 0.05,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum TailVerdict {
    Converges,
    Diverges,
    Undetermined,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TailReport {
    pub verdict: TailVerdict,
    pub certificate: String,
    pub horizon: usize,
}

fn max_of(xs: &[f64]) -> f64 {
    xs.iter().copied().fold(f64::NEG_INFINITY, f64::max)
}

fn min_of(xs: &[f64]) -> f64 {
    xs.iter().copied().fold(f64::INFINITY, f64::min)
}

/// Truncates a sequence of logarithms at the first overflowed entry.
pub fn finite_prefix(ln_terms: &[f64]) -> &[f64] {
    let end = ln_terms
        .iter()
        .position(|x| x.is_nan() || *x == f64::INFINITY)
        .unwrap_or(ln_terms.len());
    &ln_terms[..end]
}

/// Convergence test for `Σ t_n` given `ln t_n` on a finite prefix.
///
/// Divergence certificates are tried first: a last window that does not decay
/// below the first one, a recurrent non-null tail, or octave sums that grow
/// geometrically. Convergence needs every consecutive ratio in the last
/// window to be at most `1 - margin`.
pub fn tail_sum_test(ln_terms: &[f64], tuning: TestTuning) -> TailReport {
    let terms = finite_prefix(ln_terms);
    let h = terms.len();
    let w = tuning.window.max(2);
    let report = |verdict, certificate: &str| TailReport {
        verdict,
        certificate: certificate.to_string(),
        horizon: h,
    };
    if h < 4 * w {
        return report(TailVerdict::Undetermined, "prefix shorter than four windows");
    }
    let shrink = (1.0 - tuning.margin).ln();
    let grow = (1.0 + tuning.margin).ln();

    if let Some(cert) = nonvanishing_certificate(terms, tuning) {
        return report(TailVerdict::Diverges, cert);
    }
    let last = &terms[h - w..];

    let octave = |lo: usize, hi: usize| log_sum_exp(terms[lo..hi].iter().copied());
    let (o1, o2, o3) = (octave(h / 8, h / 4), octave(h / 4, h / 2), octave(h / 2, h));
    if o1.is_finite() && o3 >= o2 + grow && o2 >= o1 + grow {
        return report(TailVerdict::Diverges, "octave sums grow geometrically");
    }

    if terms[h / 2..].iter().all(|x| *x == f64::NEG_INFINITY) {
        return report(TailVerdict::Converges, "terms vanish on the second half");
    }
    if last.iter().all(|x| x.is_finite()) {
        let worst = last.windows(2).map(|p| p[1] - p[0]).fold(f64::NEG_INFINITY, f64::max);
        if worst <= shrink {
            return report(TailVerdict::Converges, "ratio certificate on last window");
        }
    }
    report(TailVerdict::Undetermined, "no certificate")
}

/// Evidence that `t_n` does not tend to zero: a last window that does not
/// decay below the first one, or a late maximum as large as the early one.
pub fn nonvanishing_certificate(ln_terms: &[f64], tuning: TestTuning) -> Option<&'static str> {
    let terms = finite_prefix(ln_terms);
    let h = terms.len();
    let w = tuning.window.max(2);
    if h < 4 * w {
        return None;
    }
    let shrink = (1.0 - tuning.margin).ln();
    let first_max = max_of(&terms[..w]);
    let last_min = min_of(&terms[h - w..]);
    if last_min.is_finite() && first_max.is_finite() && last_min >= first_max + shrink {
        return Some("last window does not decay");
    }
    let split = (h / 16).max(w);
    let early = max_of(&terms[..split]);
    let late = max_of(&terms[split..]);
    if late.is_finite() && early.is_finite() && late >= early + shrink {
        return Some("recurrent non-null tail");
    }
    None
}

/// Trailing-half estimates of `liminf` and `limsup` of `s_{n+lag}/s_n`, as logarithms.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RatioEstimate {
    pub lag: usize,
    pub ln_liminf: f64,
    pub ln_limsup: f64,
    pub horizon: usize,
}

impl RatioEstimate {
    pub fn liminf(&self) -> f64 {
        self.ln_liminf.exp()
    }
    pub fn limsup(&self) -> f64 {
        self.ln_limsup.exp()
    }
}

/// Ratio estimate of `s_{n+lag}/s_n` over `n ∈ [H/2, H - lag)` where `H = ln_seq.len()`.
pub fn limit_ratio_estimate(ln_seq: &[f64], lag: usize) -> Option<RatioEstimate> {
    let seq = finite_prefix(ln_seq);
    let h = seq.len();
    if lag == 0 || h < 2 * lag + 2 {
        return None;
    }
    let lo = h / 2;
    let mut inf = f64::INFINITY;
    let mut sup = f64::NEG_INFINITY;
    for n in lo..h - lag {
        let r = seq[n + lag] - seq[n];
        if r.is_nan() {
            continue;
        }
        inf = inf.min(r);
        sup = sup.max(r);
    }
    if inf > sup {
        return None;
    }
    Some(RatioEstimate {
        lag,
        ln_liminf: inf,
        ln_limsup: sup,
        horizon: h,
    })
}

/// Ratio estimates at the horizons `H/4`, `H/2` and `H`.
pub fn ratio_octaves(ln_seq: &[f64], lag: usize) -> Option<[RatioEstimate; 3]> {
    let seq = finite_prefix(ln_seq);
    let h = seq.len();
    Some([
        limit_ratio_estimate(&seq[..h / 4], lag)?,
        limit_ratio_estimate(&seq[..h / 2], lag)?,
        limit_ratio_estimate(seq, lag)?,
    ])
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Trend {
    Bounded,
    Growing,
    Unclear,
}

/// Classifies three successive log-estimates (at `H/4`, `H/2`, `H`).
pub fn trend(ln_values: [f64; 3], margin: f64) -> Trend {
    let grow = (1.0 + margin).ln();
    let [a, b, c] = ln_values;
    if c.is_nan() || b.is_nan() {
        return Trend::Unclear;
    }
    if c == f64::INFINITY || (c >= b + grow && b >= a + grow) {
        Trend::Growing
    } else if c <= b + grow {
        Trend::Bounded
    } else {
        Trend::Unclear
    }
}

/// Whether the running supremum of a log-sequence stabilises on the prefix.
pub fn sup_trend(ln_values: &[f64], margin: f64) -> Trend {
    let h = ln_values.len();
    if h < 8 {
        return Trend::Unclear;
    }
    let overflow = finite_prefix(ln_values).len() < h;
    if overflow {
        return Trend::Growing;
    }
    trend(
        [
            max_of(&ln_values[..h / 4]),
            max_of(&ln_values[..h / 2]),
            max_of(ln_values),
        ],
        margin,
    )
}

/// Whether the running infimum stays bounded away from zero (`Bounded`) or keeps falling (`Growing`).
pub fn inf_trend(ln_values: &[f64], margin: f64) -> Trend {
    let negated: Vec<f64> = ln_values.iter().map(|x| -x).collect();
    sup_trend(&negated, margin)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Vanishing {
    TendsToZero,
    BoundedBelow,
    Undetermined,
}

/// Evidence for `t_n -> 0` from octave maxima `[H/8,H/4)`, `[H/4,H/2)`, `[H/2,H)`.
pub fn vanishing_test(ln_terms: &[f64], margin: f64) -> Vanishing {
    let terms = finite_prefix(ln_terms);
    let h = terms.len();
    if h < 16 {
        return Vanishing::Undetermined;
    }
    if terms[h / 2..].iter().all(|x| *x == f64::NEG_INFINITY) {
        return Vanishing::TendsToZero;
    }
    let shrink = (1.0 - margin).ln();
    let m1 = max_of(&terms[h / 8..h / 4]);
    let m2 = max_of(&terms[h / 4..h / 2]);
    let m3 = max_of(&terms[h / 2..]);
    if m3 <= m2 + shrink && m2 <= m1 + shrink {
        return Vanishing::TendsToZero;
    }
    let lo2 = min_of(&terms[h / 4..h / 2]);
    let lo3 = min_of(&terms[h / 2..]);
    if lo3.is_finite() && lo2.is_finite() && lo3 >= lo2 + shrink {
        return Vanishing::BoundedBelow;
    }
    Vanishing::Undetermined
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn geometric(q: f64, h: usize) -> Vec<f64> {
        (0..h).map(|n| n as f64 * q.ln()).collect()
    }

    #[test]
    fn log_real_rejects_nan_and_positive_infinity() {
        assert!(LogReal::from_ln(f64::NAN).is_err());
        assert!(LogReal::from_ln(f64::INFINITY).is_err());
        assert!(LogReal::from_ln(f64::NEG_INFINITY).unwrap().is_zero());
        assert!(LogReal::from_value(-1.0).is_err());
    }

    #[test]
    fn log_real_serialises_zero_as_null() {
        let s = serde_json::to_string(&LogReal::ZERO).unwrap();
        assert_eq!(s, "null");
        let back: LogReal = serde_json::from_str(&s).unwrap();
        assert!(back.is_zero());
        let x = LogReal::from_ln(-3.25).unwrap();
        let back: LogReal = serde_json::from_str(&serde_json::to_string(&x).unwrap()).unwrap();
        assert_eq!(back, x);
    }

    #[test]
    fn log_sum_exp_handles_huge_and_empty() {
        assert_eq!(log_sum_exp(std::iter::empty()), f64::NEG_INFINITY);
        let s = log_sum_exp([1000.0, 1000.0]);
        assert!((s - (1000.0 + 2f64.ln())).abs() < 1e-12);
        let s = log_sum_exp([f64::NEG_INFINITY, 0.0]);
        assert_eq!(s, 0.0);
    }

    #[test]
    fn tail_test_on_reference_series() {
        let t = TestTuning::default();
        assert_eq!(
            tail_sum_test(&geometric(0.5, 10_000), t).verdict,
            TailVerdict::Converges
        );
        assert_eq!(tail_sum_test(&vec![0.0; 10_000], t).verdict, TailVerdict::Diverges);
        let harmonic: Vec<f64> = (0..100_000).map(|n| -((n + 1) as f64).ln()).collect();
        assert_eq!(tail_sum_test(&harmonic, t).verdict, TailVerdict::Undetermined);
        let sqrt: Vec<f64> = (0..100_000).map(|n| -0.5 * ((n + 1) as f64).ln()).collect();
        assert_eq!(tail_sum_test(&sqrt, t).verdict, TailVerdict::Diverges);
    }

    #[test]
    fn sparse_unit_spikes_are_not_summable() {
        let mut terms = vec![f64::NEG_INFINITY; 100_000];
        for k in 0..8u32 {
            let n = (k as usize) * 4usize.pow(k);
            if n < terms.len() {
                terms[n] = 0.0;
            }
        }
        for n in 0..terms.len() {
            if terms[n] != 0.0 {
                terms[n] = -(n as f64);
            }
        }
        assert_eq!(
            tail_sum_test(&terms, TestTuning::default()).verdict,
            TailVerdict::Diverges
        );
    }

    #[test]
    fn ratio_estimate_on_dyadic_factorial_blocks() {
        let alpha = |n: usize| -> f64 {
            if n == 0 {
                return 0.0;
            }
            let k = usize::BITS - (n - 1).leading_zeros();
            (1..=k).map(|i| (i as f64).ln()).sum()
        };
        let seq: Vec<f64> = (0..100_000).map(alpha).collect();
        let est = limit_ratio_estimate(&seq, 1).unwrap();
        assert!((est.liminf() - 1.0).abs() < 1e-12);
        assert!((est.limsup() - 17.0).abs() < 1e-9);
    }

    #[test]
    fn sup_trend_distinguishes_bounded_and_growing() {
        let bounded: Vec<f64> = (0..1000).map(|n| (2.0 - 0.5f64.powi(n)).ln()).collect();
        assert_eq!(sup_trend(&bounded, 0.05), Trend::Bounded);
        let linear: Vec<f64> = (0..1000).map(|n| ((n + 1) as f64).ln()).collect();
        assert_eq!(sup_trend(&linear, 0.05), Trend::Growing);
    }

    #[test]
    fn vanishing_test_examples() {
        let decay: Vec<f64> = (0..4096).map(|n| -0.3 * ((n + 1) as f64).ln()).collect();
        assert_eq!(vanishing_test(&decay, 0.05), Vanishing::TendsToZero);
        assert_eq!(vanishing_test(&vec![-1.0; 4096], 0.05), Vanishing::BoundedBelow);
    }

    proptest! {
        #[test]
        fn log_sum_exp_matches_direct_sum(xs in prop::collection::vec(-30.0f64..30.0, 1..40)) {
            let direct: f64 = xs.iter().map(|x| x.exp()).sum::<f64>().ln();
            let viaf = log_sum_exp(xs.iter().copied());
            prop_assert!((direct - viaf).abs() <= 1e-12 * direct.abs().max(1.0));
        }

        #[test]
        fn log_sum_exp_is_order_independent(mut xs in prop::collection::vec(-700.0f64..700.0, 1..40)) {
            let a = log_sum_exp(xs.iter().copied());
            xs.reverse();
            let b = log_sum_exp(xs.iter().copied());
            prop_assert!((a - b).abs() <= 1e-12 * a.abs().max(1.0));
        }

        #[test]
        fn log_sum_exp_dominates_max(xs in prop::collection::vec(-1e6f64..1e6, 1..40)) {
            let m = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let s = log_sum_exp(xs.iter().copied());
            prop_assert!(s >= m);
            prop_assert!(s <= m + (xs.len() as f64).ln() + 1e-9);
        }

        #[test]
        fn geometric_series_classified_by_ratio(q in 0.01f64..0.94) {
            let r = tail_sum_test(&geometric(q, 4096), TestTuning::default());
            prop_assert_eq!(r.verdict, TailVerdict::Converges);
        }

        #[test]
        fn growing_geometric_diverges(q in 1.0f64..3.0) {
            let r = tail_sum_test(&geometric(q, 4096), TestTuning::default());
            prop_assert_eq!(r.verdict, TailVerdict::Diverges);
        }

        #[test]
        fn log_real_arithmetic_is_consistent(a in -50.0f64..50.0, b in -50.0f64..50.0) {
            let x = LogReal::from_ln(a).unwrap();
            let y = LogReal::from_ln(b).unwrap();
            let prod = x.checked_mul(y).unwrap();
            prop_assert!((prod.ln() - (a + b)).abs() < 1e-12);
            let back = prod.checked_div(y).unwrap();
            prop_assert!((back.ln() - a).abs() < 1e-9);
            let sum = x.checked_add(y).unwrap();
            prop_assert!(sum >= x.max(y));
        }
    }
}
