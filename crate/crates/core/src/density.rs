//! Index sets, densities, syndeticity and correlation sets.

use crate::logmath::{sup_trend, Trend};
use crate::par;
use crate::search::power_schedule;
use crate::seqdsl::{self, Bindings, Expr};
use crate::spaces::{seminorm, FiniteVector, SpaceSpec};
use serde::{Deserialize, Serialize};
use std::fmt;
use std::sync::Arc;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DensityError {
    #[error("empty prefix up to N = {0}")]
    EmptyPrefix(usize),
    #[error("epsilon {epsilon} must lie in (0, {bound})")]
    EpsilonOutOfRange { epsilon: f64, bound: f64 },
    #[error("residue modulus must be positive")]
    ZeroModulus,
    #[error("schedule is empty")]
    EmptySchedule,
}

type Pred = Arc<dyn Fn(usize) -> bool + Send + Sync>;

/// A subset of `ℕ_0` given by a membership predicate.
#[derive(Clone)]
pub struct IndexSet {
    label: String,
    pred: Pred,
}

impl fmt::Debug for IndexSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "IndexSet({})", self.label)
    }
}

impl IndexSet {
    pub fn from_fn(label: impl Into<String>, f: impl Fn(usize) -> bool + Send + Sync + 'static) -> Self {
        IndexSet {
            label: label.into(),
            pred: Arc::new(f),
        }
    }

    pub fn all() -> Self {
        Self::from_fn("N0", |_| true)
    }

    pub fn empty() -> Self {
        Self::from_fn("empty", |_| false)
    }

    /// `{n : n mod q ∈ residues}`.
    pub fn residues(q: usize, residues: &[usize]) -> Result<Self, DensityError> {
        if q == 0 {
            return Err(DensityError::ZeroModulus);
        }
        let mut mask = vec![false; q];
        for &r in residues {
            mask[r % q] = true;
        }
        let label = format!("{residues:?} mod {q}");
        Ok(Self::from_fn(label, move |n| mask[n % q]))
    }

    /// A finite set from an explicit list.
    pub fn explicit(mut elems: Vec<usize>) -> Self {
        elems.sort_unstable();
        elems.dedup();
        let label = format!("explicit[{}]", elems.len());
        Self::from_fn(label, move |n| elems.binary_search(&n).is_ok())
    }

    /// Bitset-backed set; indices beyond the table are not members.
    pub fn from_sorted(label: impl Into<String>, elems: &[usize]) -> Self {
        let top = elems.last().map_or(0, |x| x + 1);
        let mut bits = vec![false; top];
        for &e in elems {
            bits[e] = true;
        }
        Self::from_fn(label, move |n| n < bits.len() && bits[n])
    }

    /// Members are the `n` where the expression evaluates to zero.
    pub fn from_expr(expr: Expr) -> Self {
        let label = format!("expr:{expr}");
        Self::from_fn(
            label,
            move |n| matches!(seqdsl::eval(&expr, &Bindings::n(n as f64)), Ok(v) if v == 0.0),
        )
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn contains(&self, n: usize) -> bool {
        (self.pred)(n)
    }

    /// Sorted members `≤ n_max`.
    pub fn prefix(&self, n_max: usize) -> Vec<usize> {
        (0..=n_max).filter(|&n| self.contains(n)).collect()
    }

    pub fn count(&self, n_max: usize) -> usize {
        (0..=n_max).filter(|&n| self.contains(n)).count()
    }

    pub fn union(&self, other: &IndexSet) -> IndexSet {
        let (a, b) = (self.clone(), other.clone());
        IndexSet::from_fn(format!("{} ∪ {}", self.label, other.label), move |n| {
            a.contains(n) || b.contains(n)
        })
    }
}

/// `card{n ≤ N : n ∈ A}/(N+1)`.
pub fn lower_density(set: &IndexSet, n_max: usize) -> f64 {
    set.count(n_max) as f64 / (n_max + 1) as f64
}

/// Same finite quantity as [`lower_density`]; the two differ only through the schedule statistic.
pub fn upper_density(set: &IndexSet, n_max: usize) -> f64 {
    lower_density(set, n_max)
}

/// The second half of a schedule.
pub fn schedule_tail(schedule: &[usize]) -> &[usize] {
    &schedule[schedule.len() / 2..]
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DensityEstimate {
    /// Minimum of the density over the schedule tail.
    pub lower: f64,
    /// Maximum of the density over the schedule tail.
    pub upper: f64,
}

/// Densities from one pass over `0..=max(schedule)`.
pub fn density_profile(set: &IndexSet, schedule: &[usize]) -> Vec<f64> {
    let Some(&top) = schedule.iter().max() else {
        return Vec::new();
    };
    let mut counts = Vec::with_capacity(top + 1);
    let mut c = 0usize;
    for n in 0..=top {
        if set.contains(n) {
            c += 1;
        }
        counts.push(c);
    }
    schedule.iter().map(|&n| counts[n] as f64 / (n + 1) as f64).collect()
}

pub fn density_estimate(set: &IndexSet, schedule: &[usize]) -> Result<DensityEstimate, DensityError> {
    if schedule.is_empty() {
        return Err(DensityError::EmptySchedule);
    }
    let tail = schedule_tail(schedule);
    let d = density_profile(set, tail);
    Ok(DensityEstimate {
        lower: d.iter().copied().fold(f64::INFINITY, f64::min),
        upper: d.iter().copied().fold(f64::NEG_INFINITY, f64::max),
    })
}

/// Largest difference between consecutive members `≤ N`.
pub fn syndetic_gap(set: &IndexSet, n_max: usize) -> Result<usize, DensityError> {
    let p = set.prefix(n_max);
    if p.is_empty() {
        return Err(DensityError::EmptyPrefix(n_max));
    }
    Ok(p.windows(2).map(|w| w[1] - w[0]).max().unwrap_or(0))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SyndeticReport {
    pub schedule: Vec<usize>,
    pub gaps: Vec<usize>,
    /// Gap at the largest scheduled `N`.
    pub gap: usize,
    /// The gap is constant over the schedule tail.
    pub syndetic_at_horizon: bool,
}

pub fn syndetic_report(set: &IndexSet, schedule: &[usize]) -> Result<SyndeticReport, DensityError> {
    let top = *schedule.last().ok_or(DensityError::EmptySchedule)?;
    let prefix = set.prefix(top);
    if prefix.is_empty() {
        return Err(DensityError::EmptyPrefix(top));
    }
    let gaps: Vec<usize> = schedule
        .iter()
        .map(|&n| {
            let end = prefix.partition_point(|&x| x <= n);
            prefix[..end].windows(2).map(|w| w[1] - w[0]).max().unwrap_or(0)
        })
        .collect();
    let tail = schedule_tail(&gaps);
    let gap = *gaps.last().expect("nonempty");
    Ok(SyndeticReport {
        schedule: schedule.to_vec(),
        syndetic_at_horizon: gap > 0 && tail.iter().all(|&g| g == gap),
        gaps,
        gap,
    })
}

/// `card{n ≤ N : n ∈ A, n + k ∈ A}/(N+1)`.
pub fn correlation_density(set: &IndexSet, k: usize, n_max: usize) -> f64 {
    let c = (0..=n_max).filter(|&n| set.contains(n) && set.contains(n + k)).count();
    c as f64 / (n_max + 1) as f64
}

/// Correlation densities at every scheduled `N`, from one pass.
fn correlation_profile(members: &[bool], k: usize, schedule: &[usize]) -> Vec<f64> {
    let mut out = Vec::with_capacity(schedule.len());
    let mut c = 0usize;
    let mut next = 0;
    let top = *schedule.last().unwrap_or(&0);
    for n in 0..=top {
        if members[n] && members[n + k] {
            c += 1;
        }
        while next < schedule.len() && schedule[next] == n {
            out.push(c as f64 / (n + 1) as f64);
            next += 1;
        }
    }
    out
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CorrelationSet {
    pub members: Vec<usize>,
    pub k_max: usize,
    pub delta_est: f64,
    pub epsilon: f64,
    pub threshold: f64,
    /// Tail minimum of the correlation density for each `k ≤ k_max`.
    pub tail_min: Vec<f64>,
    pub gap: Option<usize>,
}

impl CorrelationSet {
    pub fn to_index_set(&self) -> IndexSet {
        IndexSet::explicit(self.members.clone())
    }
}

/// `F = {k ≤ k_max : min over the schedule tail of the correlation density > δ² − ε}`.
pub fn find_correlation_set(
    set: &IndexSet,
    epsilon: f64,
    schedule: &[usize],
    k_max: usize,
) -> Result<CorrelationSet, DensityError> {
    let mut sched: Vec<usize> = schedule.to_vec();
    sched.sort_unstable();
    sched.dedup();
    if sched.is_empty() {
        return Err(DensityError::EmptySchedule);
    }
    let delta = density_estimate(set, &sched)?.upper;
    let bound = delta * delta;
    if !(epsilon > 0.0 && epsilon < bound) {
        return Err(DensityError::EpsilonOutOfRange { epsilon, bound });
    }
    let threshold = bound - epsilon;
    let tail: Vec<usize> = schedule_tail(&sched).to_vec();
    let top = *tail.last().expect("nonempty");
    let members: Vec<bool> = (0..=top + k_max).map(|n| set.contains(n)).collect();
    let tail_min: Vec<f64> = par::map((0..=k_max).collect(), |k| {
        correlation_profile(&members, k, &tail)
            .into_iter()
            .fold(f64::INFINITY, f64::min)
    });
    let f: Vec<usize> = (0..=k_max).filter(|&k| tail_min[k] > threshold).collect();
    let gap = if f.is_empty() {
        None
    } else {
        Some(f.windows(2).map(|w| w[1] - w[0]).max().unwrap_or(0))
    };
    Ok(CorrelationSet {
        members: f,
        k_max,
        delta_est: delta,
        epsilon,
        threshold,
        tail_min,
        gap,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HarnessRow {
    pub n: usize,
    pub m_cut: usize,
    pub ln_y: f64,
    pub ln_f_sum: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HarnessReport {
    pub seminorm_index: u64,
    pub correlation: CorrelationSet,
    pub rows: Vec<HarnessRow>,
    pub y_bounded: bool,
    pub f_sums_bounded: bool,
    /// False only when `y` is bounded while the restricted sums are not.
    pub consistent: bool,
}

/// Compares `‖y_{N,M}‖` (correlation-weighted partial sums) with `‖Σ_{k∈F,k≤M} v_k e_k‖`.
pub fn lemma1_harness(
    space: &SpaceSpec,
    set: &IndexSet,
    ln_v: &[f64],
    schedule: &[usize],
    k_max: usize,
    epsilon: f64,
    m: u64,
) -> Result<HarnessReport, DensityError> {
    let corr = find_correlation_set(set, epsilon, schedule, k_max)?;
    let cuts: Vec<usize> = power_schedule(k_max.min(ln_v.len().saturating_sub(1)));
    let tail: Vec<usize> = schedule_tail(schedule).to_vec();
    let top = *tail.last().unwrap_or(&0);
    let members: Vec<bool> = (0..=top + k_max).map(|n| set.contains(n)).collect();
    let coeff: Vec<Vec<f64>> = par::map((0..=k_max).collect(), |k| correlation_profile(&members, k, &tail));
    let mut rows = Vec::new();
    let mut y_track = Vec::new();
    let mut f_track = Vec::new();
    for &cut in &cuts {
        let f_vec = FiniteVector::from_pairs(
            corr.members
                .iter()
                .filter(|&&k| k <= cut)
                .map(|&k| (k, ln_v[k].exp()))
                .collect(),
        );
        let ln_f = seminorm(space, &f_vec, m).map(|x| x.ln()).unwrap_or(f64::NAN);
        let mut worst_y = f64::NEG_INFINITY;
        for (i, &n) in tail.iter().enumerate() {
            let y = FiniteVector::from_pairs((0..=cut).map(|k| (k, coeff[k][i] * ln_v[k].exp())).collect());
            let ln_y = seminorm(space, &y, m).map(|x| x.ln()).unwrap_or(f64::NAN);
            worst_y = worst_y.max(ln_y);
            rows.push(HarnessRow {
                n,
                m_cut: cut,
                ln_y,
                ln_f_sum: ln_f,
            });
        }
        y_track.push(worst_y);
        f_track.push(ln_f);
    }
    let bounded = |t: &[f64]| sup_trend(t, 0.05) == Trend::Bounded;
    let y_bounded = bounded(&y_track);
    let f_sums_bounded = bounded(&f_track);
    Ok(HarnessReport {
        seminorm_index: m,
        correlation: corr,
        rows,
        y_bounded,
        f_sums_bounded,
        consistent: !(y_bounded && !f_sums_bounded),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn multiples(q: usize) -> IndexSet {
        IndexSet::residues(q, &[0]).unwrap()
    }

    #[test]
    fn density_examples() {
        let evens = multiples(2);
        assert_eq!(lower_density(&evens, 99), 0.5);
        assert_eq!(upper_density(&IndexSet::empty(), 99), 0.0);
        assert!((lower_density(&multiples(3), 29) - 1.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn syndetic_examples() {
        assert_eq!(syndetic_gap(&multiples(3), 100).unwrap(), 3);
        assert!(syndetic_gap(&IndexSet::empty(), 10).is_err());
        let powers = IndexSet::from_fn("2^k", |n| n.is_power_of_two());
        let rep = syndetic_report(&powers, &power_schedule(1 << 12)).unwrap();
        assert_eq!(rep.gap, 1 << 11);
        assert!(!rep.syndetic_at_horizon);
        let mixed = multiples(2).union(&IndexSet::explicit(vec![7]));
        assert_eq!(syndetic_gap(&mixed, 1000).unwrap(), 2);
        assert!(
            syndetic_report(&multiples(3), &power_schedule(1 << 12))
                .unwrap()
                .syndetic_at_horizon
        );
    }

    #[test]
    fn correlation_examples() {
        let a = multiples(3);
        assert!((correlation_density(&a, 3, 29) - 1.0 / 3.0).abs() < 1e-15);
        assert_eq!(correlation_density(&a, 1, 1000), 0.0);
        assert_eq!(correlation_density(&a, 0, 500), lower_density(&a, 500));
    }

    #[test]
    fn correlation_set_examples() {
        let sched = power_schedule(1 << 14);
        let f = find_correlation_set(&multiples(3), 0.05, &sched, 100).unwrap();
        assert_eq!(f.members, (0..=99).step_by(3).collect::<Vec<_>>());
        assert_eq!(f.gap, Some(3));
        let f = find_correlation_set(&multiples(2), 0.1, &sched, 50).unwrap();
        assert_eq!(f.members, (0..=50).step_by(2).collect::<Vec<_>>());
        let f = find_correlation_set(&IndexSet::all(), 0.05, &sched, 40).unwrap();
        assert_eq!(f.members, (0..=40).collect::<Vec<_>>());
        assert_eq!(f.gap, Some(1));
        assert!(find_correlation_set(&multiples(3), 0.5, &sched, 10).is_err());
    }

    #[test]
    fn harness_examples() {
        let sched = power_schedule(1 << 12);
        let l1 = SpaceSpec::builtin("ones").unwrap();
        let c0 = SpaceSpec::builtin("ones-c0").unwrap();
        let geometric: Vec<f64> = (0..=512).map(|n| -(n as f64) * 2f64.ln()).collect();
        let flat = vec![0.0; 513];
        let r = lemma1_harness(&l1, &IndexSet::all(), &geometric, &sched, 512, 0.05, 1).unwrap();
        assert!(r.y_bounded && r.f_sums_bounded && r.consistent);
        let r = lemma1_harness(&c0, &multiples(3), &flat, &sched, 512, 0.05, 1).unwrap();
        assert!(r.y_bounded && r.f_sums_bounded && r.consistent);
        let r = lemma1_harness(&l1, &multiples(3), &flat, &sched, 512, 0.05, 1).unwrap();
        assert!(!r.y_bounded && !r.f_sums_bounded && r.consistent);
    }

    #[test]
    fn dsl_predicate_sets() {
        let s = IndexSet::from_expr(seqdsl::parse("mod(n, 4)").unwrap());
        assert_eq!(s.prefix(12), vec![0, 4, 8, 12]);
    }

    proptest! {
        #[test]
        fn periodic_correlation_matches_residues(q in 1usize..12, mask in 1u32..4096, k in 0usize..40) {
            let residues: Vec<usize> = (0..q).filter(|r| mask & (1 << r) != 0).collect();
            prop_assume!(!residues.is_empty());
            let a = IndexSet::residues(q, &residues).unwrap();
            let exact = residues.iter().filter(|&&r| residues.contains(&((r + k) % q))).count() as f64 / q as f64;
            let n = 5_000;
            prop_assert!((correlation_density(&a, k, n) - exact).abs() <= 2.0 * q as f64 / n as f64);
        }

        #[test]
        fn zero_lag_is_density(q in 1usize..12, n in 0usize..2000) {
            let a = IndexSet::residues(q, &[0]).unwrap();
            prop_assert_eq!(correlation_density(&a, 0, n), lower_density(&a, n));
        }
    }
}
