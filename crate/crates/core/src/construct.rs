//! Block structures, comparison matrices and the weights built from them.
//!
//! A block structure is a cut sequence `0 = N_0 < N_1 < …` with disjoint sets
//! `A_1, …, A_R`. Elements sit inside block interiors (the interior property)
//! and pairwise differences stay away from the cuts (the difference property).
//! A comparison matrix `b_{m,n}` (`0 ≤ m ≤ n`, increasing in `m`) turns a block
//! structure into the block weight `ln v_n = -(1/p) ln b_{n-N_k, n}`.

use crate::density::{density_profile, schedule_tail, IndexSet};
use crate::logmath::{inf_trend, sup_trend, vanishing_test, Trend, Vanishing};
use crate::par;
use crate::search::{power_schedule, SearchConfig};
use crate::shifts::{
    chaos_terms, check_chaotic, check_operator, check_ufhc_necessary, series_membership, WeightError, WeightSeq,
};
use crate::spaces::{PowerType, SpaceSpec};
use crate::verdict::{all_of, Outcome, Verdict, Witness};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use std::collections::BTreeMap;
use std::fmt;
use std::sync::{Arc, RwLock};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ConstructError {
    #[error("horizon {horizon} contains {cuts} cuts; at least {needed} are required")]
    HorizonTooSmall { horizon: usize, cuts: usize, needed: usize },
    #[error("invalid parameters: {0}")]
    InvalidParams(String),
    #[error("set A_{r} has lower density {density:.6} below the floor {floor:.6}")]
    DensityCollapse { r: usize, density: f64, floor: f64 },
    #[error(
        "block verification failed: {overlaps} overlaps, {interior} interior violations, {difference} difference violations"
    )]
    Violations {
        overlaps: usize,
        interior: usize,
        difference: usize,
    },
    #[error("unsupported: {0}")]
    Unsupported(String),
    #[error("refused: {clause} is {outcome}; {detail}")]
    Refused {
        clause: String,
        outcome: Outcome,
        detail: String,
    },
    #[error(transparent)]
    Weight(#[from] WeightError),
}

// ---------------------------------------------------------------- blocks

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BlockParams {
    /// Cuts grow like `k · cut_base^k`.
    pub cut_base: u64,
    pub density_floor: f64,
    /// Minimum number of cuts `≤ horizon`, counting `N_0 = 0`.
    pub min_cuts: usize,
    /// Explicit cuts replacing the growth rule; must start at 0 and end beyond the horizon.
    pub cuts: Option<Vec<usize>>,
}

impl Default for BlockParams {
    fn default() -> Self {
        BlockParams {
            cut_base: 4,
            density_floor: 1.0 / 64.0,
            min_cuts: 7,
            cuts: None,
        }
    }
}

/// Independent verification of a block structure on `0..=horizon`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BlockReport {
    /// The last cut lies beyond the horizon.
    pub covered: bool,
    pub overlaps: usize,
    pub interior_violations: usize,
    pub difference_violations: usize,
    pub pairs_checked: u64,
    /// Minimum density of each set over the tail of the dyadic schedule.
    pub lower_density: Vec<f64>,
    pub density_floor: f64,
}

impl BlockReport {
    pub fn passed(&self) -> bool {
        self.covered
            && self.overlaps == 0
            && self.interior_violations == 0
            && self.difference_violations == 0
            && self.lower_density.iter().all(|&d| d >= self.density_floor)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Blocks {
    pub r_max: usize,
    pub horizon: usize,
    /// All members are multiples of this modulus.
    pub modulus: usize,
    pub cuts: Vec<usize>,
    /// `sets[r-1]` holds the members of `A_r` up to the horizon.
    pub sets: Vec<Vec<usize>>,
    /// Candidates removed to enforce the difference property.
    pub pruned: usize,
    pub report: BlockReport,
}

impl Blocks {
    /// `k` with `N_k ≤ n < N_{k+1}`; the last block is unbounded.
    pub fn block_index(&self, n: usize) -> usize {
        self.cuts.partition_point(|&c| c <= n) - 1
    }

    pub fn block_start(&self, n: usize) -> usize {
        self.cuts[self.block_index(n)]
    }

    pub fn members(&self, r: usize) -> &[usize] {
        &self.sets[r - 1]
    }

    pub fn set(&self, r: usize) -> IndexSet {
        IndexSet::from_sorted(format!("A_{r}"), self.members(r))
    }

    pub fn union_members(&self) -> Vec<usize> {
        let mut all: Vec<usize> = self.sets.iter().flatten().copied().collect();
        all.sort_unstable();
        all
    }

    pub fn union(&self) -> IndexSet {
        IndexSet::from_sorted("union of A_r", &self.union_members())
    }

    /// Which set contains `n`, as `r ≥ 1`.
    pub fn owner(&self, n: usize) -> Option<usize> {
        self.sets
            .iter()
            .position(|s| s.binary_search(&n).is_ok())
            .map(|i| i + 1)
    }

    /// Cuts `≤ h`.
    pub fn starts_within(&self, h: usize) -> Vec<usize> {
        self.cuts.iter().copied().filter(|&c| c <= h).collect()
    }
}

fn snap_up(x: u128, modulus: u128, residue: u128) -> u128 {
    x + (residue + modulus - x % modulus) % modulus
}

fn growth_cuts(base: u64, modulus: usize, horizon: usize) -> Result<Vec<usize>, ConstructError> {
    if base < 2 {
        return Err(ConstructError::InvalidParams("cut_base must be at least 2".into()));
    }
    let (m, half) = (modulus as u128, (modulus / 2) as u128);
    let mut cuts = vec![0usize];
    for k in 1u32.. {
        let raw = (base as u128)
            .checked_pow(k)
            .and_then(|p| p.checked_mul(k as u128))
            .ok_or_else(|| ConstructError::InvalidParams("cut sequence overflows".into()))?;
        let last = *cuts.last().expect("nonempty") as u128;
        let c = snap_up(raw.max(last + 1), m, half);
        let c = usize::try_from(c).map_err(|_| ConstructError::InvalidParams("cut sequence overflows".into()))?;
        cuts.push(c);
        if c > horizon {
            break;
        }
    }
    Ok(cuts)
}

fn block_of(cuts: &[usize], n: usize) -> usize {
    cuts.partition_point(|&c| c <= n) - 1
}

fn difference_ok(cuts: &[usize], d: usize, t: usize) -> bool {
    let k = block_of(cuts, d);
    cuts[k] + t <= d && k + 1 < cuts.len() && d + t < cuts[k + 1]
}

/// Deterministic block structure: members are multiples of a modulus `M`
/// (the least power of two above `2·r_max`), assigned to sets round-robin,
/// filtered to block interiors, then greedily pruned for the difference property.
/// Cuts are congruent to `M/2` mod `M`, which keeps member differences at
/// distance at least `M/2 > r_max` from every cut.
pub fn build_blocks(r_max: usize, horizon: usize, params: &BlockParams) -> Result<Blocks, ConstructError> {
    if r_max == 0 {
        return Err(ConstructError::InvalidParams("r_max must be at least 1".into()));
    }
    let modulus = (2 * (r_max + 1)).next_power_of_two();
    let cuts = match &params.cuts {
        Some(c) => {
            if c.first() != Some(&0) || c.windows(2).any(|w| w[0] >= w[1]) {
                return Err(ConstructError::InvalidParams(
                    "explicit cuts must start at 0 and increase strictly".into(),
                ));
            }
            c.clone()
        }
        None => growth_cuts(params.cut_base, modulus, horizon)?,
    };
    let within = cuts.iter().filter(|&&c| c <= horizon).count();
    if within < params.min_cuts || *cuts.last().expect("nonempty") <= horizon {
        return Err(ConstructError::HorizonTooSmall {
            horizon,
            cuts: within,
            needed: params.min_cuts,
        });
    }

    let mut owner = vec![0u8; horizon + 1];
    let mut sets = vec![Vec::new(); r_max];
    let mut pruned = 0;
    for q in 0..=horizon / modulus {
        let n = q * modulus;
        let r = q % r_max + 1;
        let k = block_of(&cuts, n);
        if n < cuts[k] + k || n + r >= cuts[k + 1] {
            continue;
        }
        let mut ok = true;
        'cuts: for &c in cuts.iter().take_while(|&&c| c <= n + r_max) {
            for d in c.saturating_sub(r_max).max(1)..(c + r_max).min(n + 1) {
                let s = owner[n - d] as usize;
                if s != 0 && !difference_ok(&cuts, d, r.max(s)) {
                    ok = false;
                    break 'cuts;
                }
            }
        }
        if ok {
            owner[n] = r as u8;
            sets[r - 1].push(n);
        } else {
            pruned += 1;
        }
    }

    let report = verify_blocks(&cuts, &sets, horizon, params.density_floor);
    if report.overlaps + report.interior_violations + report.difference_violations > 0 {
        return Err(ConstructError::Violations {
            overlaps: report.overlaps,
            interior: report.interior_violations,
            difference: report.difference_violations,
        });
    }
    if let Some((i, &d)) = report
        .lower_density
        .iter()
        .enumerate()
        .find(|(_, &d)| d < params.density_floor)
    {
        return Err(ConstructError::DensityCollapse {
            r: i + 1,
            density: d,
            floor: params.density_floor,
        });
    }
    Ok(Blocks {
        r_max,
        horizon,
        modulus,
        cuts,
        sets,
        pruned,
        report,
    })
}

/// Checks disjointness, the interior property and the difference property
/// over all member pairs `≤ horizon`, using a direct block lookup table.
pub fn verify_blocks(cuts: &[usize], sets: &[Vec<usize>], horizon: usize, density_floor: f64) -> BlockReport {
    let covered = cuts.first() == Some(&0) && cuts.last().is_some_and(|&c| c > horizon);
    let mut table = vec![u32::MAX; horizon + 1];
    for (k, w) in cuts.windows(2).enumerate() {
        for slot in table.iter_mut().take(w[1].min(horizon + 1)).skip(w[0]) {
            *slot = k as u32;
        }
    }
    let lookup = |d: usize| -> Option<(usize, usize)> {
        let k = table[d];
        (k != u32::MAX).then(|| (cuts[k as usize], cuts[k as usize + 1]))
    };

    let mut label = vec![0usize; horizon + 1];
    let mut overlaps = 0;
    let mut interior = 0;
    for (i, set) in sets.iter().enumerate() {
        let r = i + 1;
        for &n in set.iter().filter(|&&n| n <= horizon) {
            if label[n] != 0 {
                overlaps += 1;
            }
            label[n] = r;
            let k = table[n] as usize;
            match lookup(n) {
                Some((lo, hi)) if lo + k <= n && n + r < hi => {}
                _ => interior += 1,
            }
        }
    }

    let members: Vec<(usize, usize)> = (0..=horizon)
        .filter(|&n| label[n] != 0)
        .map(|n| (n, label[n]))
        .collect();
    let counts = par::map((0..members.len()).collect(), |i| {
        let (n, r) = members[i];
        members[..i]
            .iter()
            .filter(|&&(m, s)| {
                let d = n - m;
                let t = r.max(s);
                !matches!(lookup(d), Some((lo, hi)) if lo + t <= d && d + t < hi)
            })
            .count()
    });
    let difference: usize = counts.iter().sum();
    let pairs = (members.len() as u64) * (members.len().saturating_sub(1) as u64) / 2;

    let schedule = power_schedule(horizon);
    let tail = schedule_tail(&schedule);
    let lower_density = sets
        .iter()
        .map(|s| {
            let mut count = 0usize;
            let mut next = 0;
            let mut min = f64::INFINITY;
            for &n in tail {
                while next < s.len() && s[next] <= n {
                    count += 1;
                    next += 1;
                }
                min = min.min(count as f64 / (n + 1) as f64);
            }
            min
        })
        .collect();

    BlockReport {
        covered,
        overlaps,
        interior_violations: interior,
        difference_violations: difference,
        pairs_checked: pairs,
        lower_density,
        density_floor,
    }
}

// ---------------------------------------------------------------- comparison matrices

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BFamily {
    /// `b_{m,n} = ε^{-mn}`.
    Product,
    /// `b_{m,n} = ε^{-(α_{n-m} + … + α_{n-1})}`, with `b_{0,n} = 1`.
    PartialSum,
    /// `b_{m,n} = ε^{α_{n-m}}`.
    FinitePower,
    Custom,
}

impl BFamily {
    pub fn parse(s: &str) -> Option<BFamily> {
        match s {
            "product" => Some(BFamily::Product),
            "partial-sum" => Some(BFamily::PartialSum),
            "finite-power" => Some(BFamily::FinitePower),
            _ => None,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            BFamily::Product => "product",
            BFamily::PartialSum => "partial-sum",
            BFamily::FinitePower => "finite-power",
            BFamily::Custom => "custom",
        }
    }
}

type LnB = Arc<dyn Fn(usize, usize) -> f64 + Send + Sync>;

/// Strictly positive upper triangular matrix `b_{m,n}`, `0 ≤ m ≤ n`, held as logarithms.
#[derive(Clone)]
pub struct BMatrix {
    label: String,
    family: BFamily,
    epsilon: f64,
    alpha: Option<crate::spaces::AlphaSeq>,
    sums: Arc<RwLock<Arc<Vec<f64>>>>,
    custom: Option<LnB>,
}

impl fmt::Debug for BMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "BMatrix({})", self.label)
    }
}

impl BMatrix {
    fn with(family: BFamily, epsilon: f64, alpha: Option<crate::spaces::AlphaSeq>) -> Self {
        let label = match (&alpha, family) {
            (Some(a), _) => format!("{}[ε={epsilon}, α={}]", family.name(), a.label()),
            (None, _) => format!("{}[ε={epsilon}]", family.name()),
        };
        BMatrix {
            label,
            family,
            epsilon,
            alpha,
            sums: Arc::new(RwLock::new(Arc::new(vec![0.0]))),
            custom: None,
        }
    }

    pub fn product(epsilon: f64) -> Self {
        Self::with(BFamily::Product, epsilon, None)
    }

    pub fn custom(label: impl Into<String>, ln_b: impl Fn(usize, usize) -> f64 + Send + Sync + 'static) -> Self {
        BMatrix {
            label: label.into(),
            family: BFamily::Custom,
            epsilon: f64::NAN,
            alpha: None,
            sums: Arc::new(RwLock::new(Arc::new(vec![0.0]))),
            custom: Some(Arc::new(ln_b)),
        }
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn family(&self) -> BFamily {
        self.family
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    /// `S_0..=S_n` with `S_k = α_0 + … + α_{k-1}`.
    fn sums_to(&self, n: usize) -> Arc<Vec<f64>> {
        {
            let s = self.sums.read().expect("sum cache poisoned");
            if s.len() > n {
                return Arc::clone(&s);
            }
        }
        let alpha = self.alpha.as_ref().expect("partial sums need α");
        let mut w = self.sums.write().expect("sum cache poisoned");
        if w.len() <= n {
            let target = (n + 1).max(2 * w.len());
            let a = alpha.ln_prefix(target);
            let mut v: Vec<f64> = w.as_ref().clone();
            while v.len() < target {
                let k = v.len();
                v.push(v[k - 1] + a[k - 1].exp());
            }
            *w = Arc::new(v);
        }
        Arc::clone(&w)
    }

    /// `ln b_{m,n}`; `NaN` below the diagonal or outside the representable range.
    pub fn ln_entry(&self, m: usize, n: usize) -> f64 {
        if m > n {
            return f64::NAN;
        }
        let le = self.epsilon.ln();
        let x = match self.family {
            BFamily::Product => -le * (m as f64) * (n as f64),
            BFamily::PartialSum => {
                if m == 0 {
                    0.0
                } else {
                    let s = self.sums_to(n);
                    -le * (s[n] - s[n - m])
                }
            }
            BFamily::FinitePower => le * self.alpha.as_ref().expect("α").value(n - m),
            BFamily::Custom => (self.custom.as_ref().expect("custom entries"))(m, n),
        };
        if x.is_finite() {
            x
        } else {
            f64::NAN
        }
    }

    /// `ln b_{0,n}, …, ln b_{n,n}`.
    pub fn ln_column(&self, n: usize) -> Vec<f64> {
        (0..=n).map(|m| self.ln_entry(m, n)).collect()
    }

    /// `ln b_{m,n}` for `n` in `0..h`; entries with `n < m` are `NaN`.
    pub fn ln_row(&self, m: usize, h: usize) -> Vec<f64> {
        (0..h).map(|n| self.ln_entry(m, n)).collect()
    }

    /// First `(m, n)` with `b_{m,n} > b_{m+1,n}` for `n < h`, if any.
    pub fn column_violation(&self, h: usize) -> Option<(usize, usize)> {
        for n in 1..h {
            let col = self.ln_column(n);
            for m in 0..n {
                if col[m].is_finite() && col[m + 1].is_finite() && col[m] > col[m + 1] + 1e-9 * col[m].abs().max(1.0) {
                    return Some((m, n));
                }
            }
        }
        None
    }
}

/// The comparison family matching a power series space; `family = None` picks the default.
pub fn build_b(space: &SpaceSpec, family: Option<BFamily>, epsilon: f64) -> Result<BMatrix, ConstructError> {
    if !(epsilon > 0.0 && epsilon < 1.0) {
        return Err(ConstructError::InvalidParams(format!(
            "ε = {epsilon} must lie in (0, 1)"
        )));
    }
    let power = space.matrix.power_series();
    let family = match (family, power) {
        (Some(f), _) => f,
        (None, Some((PowerType::Infinite, _))) => BFamily::PartialSum,
        (None, Some((PowerType::Finite, _))) => BFamily::FinitePower,
        (None, None) => {
            return Err(ConstructError::Unsupported(
                "non power series spaces need a user-supplied comparison matrix".into(),
            ))
        }
    };
    match (family, power) {
        (BFamily::Product, _) => Ok(BMatrix::product(epsilon)),
        (BFamily::PartialSum, Some((_, a))) | (BFamily::FinitePower, Some((_, a))) => {
            Ok(BMatrix::with(family, epsilon, Some(a.clone())))
        }
        (BFamily::Custom, _) => Err(ConstructError::Unsupported(
            "custom comparison matrices are built with BMatrix::custom".into(),
        )),
        _ => Err(ConstructError::Unsupported(format!(
            "family {} needs a power series space",
            family.name()
        ))),
    }
}

// ---------------------------------------------------------------- conditions

/// Which tail clause carried the construction; fixes the constant `c` in `ε_r = c/2^r`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TailRoute {
    Summable,
    Decaying,
}

impl TailRoute {
    pub fn epsilon_constant(self) -> f64 {
        match self {
            TailRoute::Summable => 1.0,
            TailRoute::Decaying => 2.0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConstructionConditions {
    /// `a_{m,n}/a_{μ,n+1} ≤ C b_{j,n}/b_{j+1,n+1}` for all `j ≤ n`.
    pub operator_bound: Verdict,
    /// `inf_n a_{m,n}/b_{0,n} > 0` for some `m`.
    pub lower_bound: Verdict,
    /// `Σ_n a_{m,n}/b_{j_m,n} < ∞` (λ^p) or `a_{m,n}/b_{j_m,n} → 0` (c_0).
    pub summable_tail: Verdict,
    /// Ratio contraction, decay along a diagonal ladder, and decay along `j_m`.
    pub decaying_tail: Verdict,
    pub outcome: Outcome,
}

impl ConstructionConditions {
    pub fn tail_route(&self) -> Option<TailRoute> {
        if self.summable_tail.holds() {
            Some(TailRoute::Summable)
        } else if self.decaying_tail.holds() {
            Some(TailRoute::Decaying)
        } else {
            None
        }
    }
}

fn either(a: Outcome, b: Outcome) -> Outcome {
    match (a, b) {
        (Outcome::Holds, _) | (_, Outcome::Holds) => Outcome::Holds,
        (Outcome::Fails, Outcome::Fails) => Outcome::Fails,
        _ => Outcome::Undetermined,
    }
}

/// `max_j` and `min_j` of `ln b_{j+1,n+1} - ln b_{j,n}` over `j ≤ n`, for `n < h`.
fn diagonal_steps(b: &BMatrix, h: usize) -> (Vec<f64>, Vec<f64>) {
    let mut hi = Vec::with_capacity(h);
    let mut lo = Vec::with_capacity(h);
    let mut prev = b.ln_column(0);
    for n in 0..h {
        let next = b.ln_column(n + 1);
        let (mut mx, mut mn) = (f64::NEG_INFINITY, f64::INFINITY);
        let mut finite = true;
        for j in 0..=n {
            let d = next[j + 1] - prev[j];
            if !d.is_finite() {
                finite = false;
                break;
            }
            mx = mx.max(d);
            mn = mn.min(d);
        }
        if !finite {
            break;
        }
        hi.push(mx);
        lo.push(mn);
        prev = next;
    }
    (hi, lo)
}

fn operator_bound(space: &SpaceSpec, steps_hi: &[f64], cfg: &SearchConfig) -> Verdict {
    let h = steps_hi.len();
    let mut verdict = Verdict::new(Outcome::Undetermined, cfg.triangular_horizon);
    verdict.truncate_to(h);
    let mut outcomes = Vec::new();
    for &m in &cfg.probes {
        let am = space.ln_row(m, h + 1);
        let mut found = None;
        let mut all_growing = true;
        for mu in cfg.mu_ladder(m) {
            let amu = space.ln_row(mu, h + 1);
            let len = h.min(am.len()).min(amu.len().saturating_sub(1));
            verdict.truncate_to(len);
            let vals: Vec<f64> = (0..len).map(|n| am[n] - amu[n + 1] + steps_hi[n]).collect();
            match sup_trend(&vals, cfg.margin) {
                Trend::Bounded => {
                    found = Some((mu, vals.iter().copied().fold(f64::NEG_INFINITY, f64::max)));
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
                verdict.note(format!("m={m}: unbounded for every ladder μ ≤ {}", cfg.mu_max));
                Outcome::Fails
            }
            None => Outcome::Undetermined,
        });
    }
    verdict.outcome = all_of(outcomes);
    verdict
}

fn lower_bound(space: &SpaceSpec, b: &BMatrix, cfg: &SearchConfig) -> Verdict {
    let h = cfg.horizon;
    let mut verdict = Verdict::new(Outcome::Undetermined, h);
    let mut all_vanish = true;
    for &m in &cfg.probes {
        let a = space.ln_row(m, h);
        let vals: Vec<f64> = a
            .iter()
            .enumerate()
            .map(|(n, x)| x - b.ln_entry(0, n))
            .take_while(|x| x.is_finite())
            .collect();
        verdict.truncate_to(vals.len());
        match inf_trend(&vals, cfg.margin) {
            Trend::Bounded => {
                let inf = vals.iter().copied().fold(f64::INFINITY, f64::min);
                verdict
                    .witnesses
                    .push(Witness::new("lower").with("m", m as f64).with("ln_inf", inf));
                verdict.outcome = Outcome::Holds;
                return verdict;
            }
            Trend::Growing => verdict.note(format!("m={m}: ratio tends to zero")),
            Trend::Unclear => all_vanish = false,
        }
    }
    if all_vanish {
        verdict.outcome = Outcome::Fails;
    }
    verdict
}

/// Terms `ln a_{m,n} - ln b_{j,n}` for `j ≤ n < h`.
fn quotient_terms(space: &SpaceSpec, b: &BMatrix, m: u64, j: usize, h: usize) -> Vec<f64> {
    let a = space.ln_row(m, h);
    (j..a.len())
        .map(|n| a[n] - b.ln_entry(j, n))
        .take_while(|x| x.is_finite())
        .collect()
}

/// Searches a strictly increasing `j_m` per probe with `accept` deciding each candidate.
fn increasing_index_search(
    space: &SpaceSpec,
    b: &BMatrix,
    cfg: &SearchConfig,
    label: &str,
    accept: impl Fn(&[f64]) -> Outcome,
) -> Verdict {
    let h = cfg.horizon;
    let span = *cfg.lag_ladder.last().unwrap_or(&64);
    let mut verdict = Verdict::new(Outcome::Undetermined, h);
    let mut outcomes = Vec::new();
    let mut prev = 0usize;
    for &m in &cfg.probes {
        let mut found = None;
        let mut all_fail = true;
        for j in prev + 1..=prev + span {
            let terms = quotient_terms(space, b, m, j, h);
            verdict.truncate_to(terms.len() + j);
            match accept(&terms) {
                Outcome::Holds => {
                    found = Some(j);
                    break;
                }
                Outcome::Fails => {}
                Outcome::Undetermined => all_fail = false,
            }
        }
        outcomes.push(match found {
            Some(j) => {
                prev = j;
                verdict
                    .witnesses
                    .push(Witness::new(format!("m={m}")).with("m", m as f64).with("j", j as f64));
                Outcome::Holds
            }
            None if all_fail => {
                verdict.note(format!("m={m}: {label} fails for every j ≤ {}", prev + span));
                Outcome::Fails
            }
            None => {
                verdict.note(format!("m={m}: no {label} certificate for j ≤ {}", prev + span));
                Outcome::Undetermined
            }
        });
        if found.is_none() {
            break;
        }
    }
    verdict.outcome = all_of(outcomes);
    verdict
}

fn summable_tail(space: &SpaceSpec, b: &BMatrix, cfg: &SearchConfig) -> Verdict {
    let order = space.order;
    increasing_index_search(space, b, cfg, "membership", |t| series_membership(order, t, cfg).0)
}

fn decay_outcome(terms: &[f64], margin: f64) -> Outcome {
    match vanishing_test(terms, margin) {
        Vanishing::TendsToZero => Outcome::Holds,
        Vanishing::BoundedBelow => Outcome::Fails,
        Vanishing::Undetermined => Outcome::Undetermined,
    }
}

fn ratio_contraction(space: &SpaceSpec, steps_lo: &[f64], cfg: &SearchConfig) -> Verdict {
    let h = steps_lo.len();
    let shrink = (1.0 - cfg.margin).ln();
    let mut verdict = Verdict::new(Outcome::Undetermined, cfg.triangular_horizon);
    verdict.truncate_to(h);
    let mut outcomes = Vec::new();
    for &m in &cfg.probes {
        let a = space.ln_row(m, h + 1);
        let len = h.min(a.len().saturating_sub(1));
        verdict.truncate_to(len);
        let q: Vec<f64> = (0..len).map(|n| a[n + 1] - a[n] - steps_lo[n]).collect();
        if len < 2 * cfg.window {
            outcomes.push(Outcome::Undetermined);
            continue;
        }
        let mut start = len;
        let mut worst = f64::NEG_INFINITY;
        while start > 0 && q[start - 1] <= shrink {
            start -= 1;
            worst = worst.max(q[start]);
        }
        let last_max = q[len - cfg.window..].iter().copied().fold(f64::NEG_INFINITY, f64::max);
        outcomes.push(if start <= len / 2 {
            verdict.witnesses.push(
                Witness::new(format!("contraction m={m}"))
                    .with("m", m as f64)
                    .with("N", start as f64)
                    .with("rho", worst.exp()),
            );
            Outcome::Holds
        } else if last_max >= 0.0 {
            verdict.note(format!("m={m}: ratio reaches 1 in the last window"));
            Outcome::Fails
        } else {
            Outcome::Undetermined
        });
    }
    verdict.outcome = all_of(outcomes);
    verdict
}

fn diagonal_decay(space: &SpaceSpec, b: &BMatrix, cfg: &SearchConfig) -> Verdict {
    let h = cfg.horizon;
    let start = h / 2;
    let shrink = (1.0 - cfg.margin).ln();
    let mut verdict = Verdict::new(Outcome::Undetermined, h);
    let mut outcomes = Vec::new();
    let ladder = &cfg.lag_ladder;
    for &m in &cfg.probes {
        let sups: Vec<f64> = ladder
            .iter()
            .map(|&d| {
                let a = space.ln_row(m, h);
                let from = start.max(d);
                let vals: Vec<f64> = (from..a.len()).map(|n| a[n] - b.ln_entry(d, n)).collect();
                if vals.is_empty() || vals.iter().any(|x| !x.is_finite()) {
                    f64::NAN
                } else {
                    vals.into_iter().fold(f64::NEG_INFINITY, f64::max)
                }
            })
            .collect();
        let k = sups.len();
        let ok = k >= 3
            && sups.iter().all(|x| x.is_finite())
            && sups[k - 1] <= shrink
            && sups[k - 1] <= sups[k - 2] + shrink
            && sups[k - 2] <= sups[k - 3] + shrink;
        if ok {
            verdict.witnesses.push(
                Witness::new(format!("diagonal m={m}"))
                    .with("m", m as f64)
                    .with("n_k", start as f64)
                    .with("d_max", ladder[k - 1] as f64)
                    .with("ln_sup", sups[k - 1]),
            );
            outcomes.push(Outcome::Holds);
        } else {
            verdict.note(format!("m={m}: tail suprema along the ladder {sups:?}"));
            outcomes.push(Outcome::Undetermined);
        }
    }
    verdict.outcome = all_of(outcomes);
    verdict
}

/// Evaluates the four clauses needed by the block construction.
pub fn check_construction_conditions(space: &SpaceSpec, b: &BMatrix, cfg: &SearchConfig) -> ConstructionConditions {
    let ht = cfg.triangular_horizon.min(cfg.horizon);
    let (hi, lo) = diagonal_steps(b, ht);
    let operator = operator_bound(space, &hi, cfg);
    let lower = lower_bound(space, b, cfg);
    let summable = summable_tail(space, b, cfg);

    let contraction = ratio_contraction(space, &lo, cfg);
    let diagonal = diagonal_decay(space, b, cfg);
    let margin = cfg.margin;
    let index = increasing_index_search(space, b, cfg, "decay", |t| decay_outcome(t, margin));
    let mut decaying = Verdict::new(
        all_of([contraction.outcome, diagonal.outcome, index.outcome]),
        cfg.horizon,
    );
    for (name, part) in [
        ("contraction", &contraction),
        ("diagonal", &diagonal),
        ("index", &index),
    ] {
        decaying.truncate_to(part.effective_horizon);
        decaying.note(format!("{name}: {}", part.outcome));
        decaying.witnesses.extend(part.witnesses.iter().cloned());
        decaying.trace.extend(part.trace.iter().map(|t| format!("{name}: {t}")));
    }

    let outcome = all_of([
        operator.outcome,
        lower.outcome,
        either(summable.outcome, decaying.outcome),
    ]);
    ConstructionConditions {
        operator_bound: operator,
        lower_bound: lower,
        summable_tail: summable,
        decaying_tail: decaying,
        outcome,
    }
}

// ---------------------------------------------------------------- weights

#[derive(Clone, Debug)]
pub struct BuiltWeight {
    pub weight: WeightSeq,
    pub route: String,
    pub operator: Verdict,
    pub chaotic: Verdict,
}

fn with_probes(cfg: &SearchConfig, extra: &[u64]) -> SearchConfig {
    let mut c = cfg.clone();
    c.probes.extend_from_slice(extra);
    c.probes.sort_unstable();
    c.probes.dedup();
    c
}

fn screen_chaos(space: &SpaceSpec, w: &WeightSeq, cfg: &SearchConfig) -> bool {
    let v = w.ln_v_prefix(cfg.horizon);
    cfg.probes.iter().all(|&m| {
        let terms = chaos_terms(space, &v, m, cfg.horizon);
        series_membership(space.order, &terms, cfg).0 == Outcome::Holds
    })
}

/// A chaotic weight: constant 2 on finite type, `w_n^p = 2^{α_{n-1}}` on infinite
/// type, otherwise `w_n^p = C a_{μ,n}/a_{1,n-1}` over the `(μ, C)` grid.
/// Candidates are screened with the extra probes `2μ, 4μ`.
pub fn build_chaotic_weight(space: &SpaceSpec, cfg: &SearchConfig) -> Result<BuiltWeight, ConstructError> {
    let p = space.order.p();
    let mut trace = Vec::new();
    let mut candidates: Vec<(String, WeightSeq, Vec<u64>)> = Vec::new();
    match space.matrix.power_series() {
        Some((PowerType::Finite, _)) => {
            candidates.push(("constant weight 2".into(), WeightSeq::constant(2.0)?, vec![]));
        }
        Some((PowerType::Infinite, alpha)) => {
            let a = alpha.clone();
            let w = WeightSeq::from_ln_w("2^(α_(n-1)/p)", move |n| a.value(n - 1) * std::f64::consts::LN_2 / p);
            candidates.push(("partial sums of α".into(), w, vec![4, 8]));
        }
        None => {}
    }
    let try_candidate = |route: &str, w: &WeightSeq, extra: &[u64], trace: &mut Vec<String>| {
        let c = with_probes(cfg, extra);
        if !screen_chaos(space, w, &c) {
            trace.push(format!("{route}: chaos screen failed"));
            return None;
        }
        let operator = check_operator(space, w, &c);
        let chaotic = check_chaotic(space, w, &c);
        if operator.holds() && chaotic.holds() {
            Some(BuiltWeight {
                weight: w.clone(),
                route: route.to_string(),
                operator,
                chaotic,
            })
        } else {
            trace.push(format!(
                "{route}: operator {}, chaos {}",
                operator.outcome, chaotic.outcome
            ));
            None
        }
    };
    for (route, w, extra) in &candidates {
        if let Some(b) = try_candidate(route, w, extra, &mut trace) {
            return Ok(b);
        }
    }
    let quotient = |mu: u64, c: f64| {
        let matrix = Arc::clone(&space.matrix);
        let lc = c.ln();
        WeightSeq::from_ln_w(format!("quotient μ={mu} C={c}"), move |n| {
            (lc + matrix.ln_entry(mu, n) - matrix.ln_entry(1, n - 1)) / p
        })
    };
    let grid = cfg.c_grid();
    let c_max = *grid.last().expect("nonempty grid");
    for mu in cfg.mu_ladder(1) {
        let extra = [mu.saturating_mul(2), mu.saturating_mul(4)];
        let screen_cfg = with_probes(cfg, &extra);
        if !screen_chaos(space, &quotient(mu, c_max), &screen_cfg) {
            continue;
        }
        for &c in &grid {
            let w = quotient(mu, c);
            if screen_chaos(space, &w, &screen_cfg) {
                let route = format!("row quotient with μ = {mu}, C = {c}");
                if let Some(b) = try_candidate(&route, &w, &extra, &mut trace) {
                    return Ok(b);
                }
                break;
            }
        }
    }
    trace.push(format!("row quotients: no (μ, C) with μ ≤ {} passes", cfg.mu_max));
    Err(ConstructError::Refused {
        clause: "chaotic weight".into(),
        outcome: Outcome::Fails,
        detail: trace.join("; "),
    })
}

/// `ln v_n = -(1/p) ln b_{n-N_k, n}` for `N_k ≤ n < N_{k+1}`.
pub fn block_weight(space: &SpaceSpec, b: &BMatrix, blocks: &Blocks) -> WeightSeq {
    let p = space.order.p();
    let cuts = Arc::new(blocks.cuts.clone());
    let b = b.clone();
    WeightSeq::from_ln_v(format!("block weight over {}", b.label()), move |n| {
        let start = cuts[cuts.partition_point(|&c| c <= n) - 1];
        -b.ln_entry(n - start, n) / p
    })
}

/// Certifies non-chaos by `inf_k v_{N_k}^p a_{m,N_k} > 0` over block starts within the horizon.
pub fn verify_not_chaotic(space: &SpaceSpec, w: &WeightSeq, blocks: &Blocks, cfg: &SearchConfig) -> Verdict {
    let h = cfg.horizon;
    let p = space.order.p();
    let starts = blocks.starts_within(h);
    let v = w.ln_v_prefix(h);
    let mut verdict = Verdict::new(Outcome::Undetermined, h);
    let shrink = (1.0 - cfg.margin).ln();
    for &m in &cfg.probes {
        let a = space.ln_row(m, h + 1);
        let vals: Vec<f64> = starts
            .iter()
            .filter(|&&n| n < a.len())
            .map(|&n| p * v[n] + a[n])
            .collect();
        if vals.len() < 2 || vals.iter().any(|x| !x.is_finite()) {
            continue;
        }
        let half = vals.len() / 2;
        let early = vals[..half].iter().copied().fold(f64::INFINITY, f64::min);
        let late = vals[half..].iter().copied().fold(f64::INFINITY, f64::min);
        if late >= early + shrink {
            let max = vals.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            verdict.witnesses.push(
                Witness::new("block starts")
                    .with("m", m as f64)
                    .with("ln_min", early.min(late))
                    .with("ln_max", max)
                    .with("starts", vals.len() as f64),
            );
            verdict.outcome = Outcome::Holds;
            break;
        }
    }
    let chaos = check_chaotic(space, w, cfg);
    verdict.note(format!("cross-check: chaos verdict is {}", chaos.outcome));
    if chaos.holds() {
        verdict.outcome = Outcome::Fails;
    }
    verdict
}

#[derive(Clone, Debug)]
pub struct FhcConstruction {
    pub weight: WeightSeq,
    pub route: TailRoute,
    pub conditions: ConstructionConditions,
    pub operator: Verdict,
    pub chaotic: Verdict,
    pub partial_sums: Verdict,
    pub not_chaotic: Verdict,
}

/// Builds the block weight after checking every precondition; refuses otherwise.
pub fn build_fhc_nonchaotic_weight(
    space: &SpaceSpec,
    b: &BMatrix,
    blocks: &Blocks,
    cfg: &SearchConfig,
) -> Result<FhcConstruction, ConstructError> {
    if !blocks.report.passed() {
        return Err(ConstructError::Refused {
            clause: "block verification".into(),
            outcome: Outcome::Fails,
            detail: format!("{:?}", blocks.report),
        });
    }
    let conditions = check_construction_conditions(space, b, cfg);
    for (name, v) in [
        ("operator bound", &conditions.operator_bound),
        ("lower bound", &conditions.lower_bound),
    ] {
        if !v.holds() {
            return Err(ConstructError::Refused {
                clause: name.into(),
                outcome: v.outcome,
                detail: v.trace.join("; "),
            });
        }
    }
    let route = conditions.tail_route().ok_or_else(|| ConstructError::Refused {
        clause: "summable or decaying tail".into(),
        outcome: either(conditions.summable_tail.outcome, conditions.decaying_tail.outcome),
        detail: conditions
            .summable_tail
            .trace
            .iter()
            .chain(&conditions.decaying_tail.trace)
            .cloned()
            .collect::<Vec<_>>()
            .join("; "),
    })?;
    let weight = block_weight(space, b, blocks);
    weight.validate(cfg.horizon)?;
    let operator = check_operator(space, &weight, cfg);
    let chaotic = check_chaotic(space, &weight, cfg);
    let partial_sums = check_ufhc_necessary(space, &weight, cfg);
    let not_chaotic = verify_not_chaotic(space, &weight, blocks, cfg);
    Ok(FhcConstruction {
        weight,
        route,
        conditions,
        operator,
        chaotic,
        partial_sums,
        not_chaotic,
    })
}

// ---------------------------------------------------------------- artifact

pub const ARTIFACT_FORMAT: &str = "kothe-shifts/construction/1";

/// Reproducible record of a construction; `digest` is the SHA-256 of the
/// JSON encoding with an empty digest field.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConstructionArtifact {
    pub format: String,
    pub space: String,
    pub order: f64,
    pub family: String,
    pub epsilon: f64,
    pub horizon: usize,
    pub tail_route: TailRoute,
    pub blocks: Blocks,
    /// `ln v_0, …, ln v_horizon`.
    pub ln_v: Vec<f64>,
    pub verdicts: BTreeMap<String, Verdict>,
    pub digest: String,
}

impl ConstructionArtifact {
    pub fn new(space: &SpaceSpec, b: &BMatrix, blocks: &Blocks, c: &FhcConstruction, horizon: usize) -> Self {
        let mut verdicts = BTreeMap::new();
        verdicts.insert("operator_bound".into(), c.conditions.operator_bound.clone());
        verdicts.insert("lower_bound".into(), c.conditions.lower_bound.clone());
        verdicts.insert("summable_tail".into(), c.conditions.summable_tail.clone());
        verdicts.insert("decaying_tail".into(), c.conditions.decaying_tail.clone());
        verdicts.insert("operator".into(), c.operator.clone());
        verdicts.insert("chaotic".into(), c.chaotic.clone());
        verdicts.insert("partial_sums_bounded".into(), c.partial_sums.clone());
        verdicts.insert("not_chaotic".into(), c.not_chaotic.clone());
        ConstructionArtifact {
            format: ARTIFACT_FORMAT.into(),
            space: space.label.clone(),
            order: space.order.as_number(),
            family: b.family().name().into(),
            epsilon: b.epsilon(),
            horizon,
            tail_route: c.route,
            blocks: blocks.clone(),
            ln_v: c.weight.ln_v_prefix(horizon)[..=horizon].to_vec(),
            verdicts,
            digest: String::new(),
        }
        .sealed()
    }

    pub fn compute_digest(&self) -> String {
        let mut copy = self.clone();
        copy.digest.clear();
        let bytes = serde_json::to_vec(&copy).expect("artifact serializes");
        hex::encode(Sha256::digest(&bytes))
    }

    pub fn sealed(mut self) -> Self {
        self.digest = self.compute_digest();
        self
    }

    pub fn digest_ok(&self) -> bool {
        self.digest == self.compute_digest()
    }

    /// The stored weight; past the stored prefix the final weight repeats.
    pub fn weight(&self) -> WeightSeq {
        let v = Arc::new(self.ln_v.clone());
        WeightSeq::from_ln_v(format!("artifact weight ({})", self.space), move |n| {
            let last = v.len() - 1;
            if n <= last {
                v[n]
            } else {
                let step = if last > 0 { v[last] - v[last - 1] } else { 0.0 };
                v[last] + step * (n - last) as f64
            }
        })
    }
}

/// Lower density of `∪ A_r` over the schedule tail, from the stored members.
pub fn union_density(blocks: &Blocks) -> f64 {
    let sched = power_schedule(blocks.horizon);
    density_profile(&blocks.union(), schedule_tail(&sched))
        .into_iter()
        .fold(f64::INFINITY, f64::min)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn cfg(h: usize) -> SearchConfig {
        SearchConfig::default().with_horizon(h)
    }

    #[test]
    fn growth_cuts_sit_between_multiples() {
        let cuts = growth_cuts(4, 8, 100_000).unwrap();
        assert_eq!(cuts, vec![0, 4, 36, 196, 1028, 5124, 24580, 114692]);
    }

    #[test]
    fn blocks_pass_their_verifier() {
        let b = build_blocks(3, 100_000, &BlockParams::default()).unwrap();
        assert!(b.report.passed());
        assert_eq!(b.report.difference_violations, 0);
        assert_eq!(b.report.interior_violations, 0);
        for d in &b.report.lower_density {
            assert!(*d >= 1.0 / 64.0);
        }
        assert_eq!(b.owner(0), Some(1));
        assert_eq!(b.block_start(40), 36);
    }

    #[test]
    fn verifier_catches_planted_violations() {
        let cuts = vec![0, 4, 36, 196];
        let report = verify_blocks(&cuts, &[vec![8, 37], vec![8]], 150, 0.0);
        assert_eq!(report.overlaps, 1);
        assert!(report.interior_violations >= 1);
        let report = verify_blocks(&cuts, &[vec![8, 44]], 150, 0.0);
        assert_eq!(report.difference_violations, 1);
    }

    #[test]
    fn small_horizon_is_rejected() {
        assert!(matches!(
            build_blocks(3, 1000, &BlockParams::default()),
            Err(ConstructError::HorizonTooSmall { .. })
        ));
    }

    #[test]
    fn explicit_cuts_are_pruned_into_shape() {
        let params = BlockParams {
            cuts: Some(vec![0, 10, 50, 300, 2000]),
            min_cuts: 4,
            density_floor: 0.0,
            ..BlockParams::default()
        };
        let b = build_blocks(2, 1500, &params).unwrap();
        assert!(b.report.passed());
    }

    #[test]
    fn b_family_entries() {
        let entire = SpaceSpec::builtin("entire").unwrap();
        let prod = build_b(&entire, Some(BFamily::Product), 0.5).unwrap();
        assert!((prod.ln_entry(2, 5) - 1024f64.ln()).abs() < 1e-12);
        let sums = build_b(&entire, None, 0.5).unwrap();
        assert_eq!(sums.family(), BFamily::PartialSum);
        assert!((sums.ln_entry(2, 5) - 512f64.ln()).abs() < 1e-12);
        for n in 0..50 {
            assert_eq!(prod.ln_entry(0, n), 0.0);
            assert_eq!(sums.ln_entry(0, n), 0.0);
        }
        let disk = SpaceSpec::builtin("disk").unwrap();
        assert_eq!(build_b(&disk, None, 0.5).unwrap().family(), BFamily::FinitePower);
        assert!(build_b(&SpaceSpec::builtin("lacunary2n").unwrap(), None, 0.5).is_err());
        assert!(build_b(&entire, None, 1.5).is_err());
    }

    #[test]
    fn b_families_have_increasing_columns() {
        for name in ["entire", "s", "disk", "ces1plus"] {
            let space = SpaceSpec::builtin(name).unwrap();
            let b = build_b(&space, None, 0.5).unwrap();
            assert_eq!(b.column_violation(200), None, "{name}");
        }
        assert_eq!(BMatrix::product(0.5).column_violation(200), None);
    }

    #[test]
    fn product_family_conditions_on_entire_functions() {
        let space = SpaceSpec::builtin("entire").unwrap();
        let b = BMatrix::product(0.5);
        let c = check_construction_conditions(&space, &b, &cfg(2000));
        assert!(c.operator_bound.holds());
        for m in 1..=6u64 {
            let w = c.operator_bound.witness(&format!("m={m}")).unwrap();
            assert_eq!(w.get("mu"), Some(4.0 * m as f64));
            assert_eq!(w.get("C"), Some(1.0));
            let g = c.summable_tail.witness(&format!("m={m}")).unwrap();
            assert_eq!(g.get("j"), Some(m as f64));
        }
        assert!(c.lower_bound.holds());
        assert_eq!(c.lower_bound.witnesses[0].get("ln_inf"), Some(0.0));
        assert_eq!(c.outcome, Outcome::Holds);
        assert_eq!(c.tail_route(), Some(TailRoute::Summable));
    }

    #[test]
    fn slowly_growing_exponents_use_the_decaying_route() {
        let space = SpaceSpec::builtin("s").unwrap();
        let b = build_b(&space, None, 0.5).unwrap();
        let c = check_construction_conditions(&space, &b, &cfg(20_000));
        assert!(c.operator_bound.holds() && c.lower_bound.holds());
        assert!(c.decaying_tail.holds(), "{:?}", c.decaying_tail.trace);
        assert_eq!(c.outcome, Outcome::Holds);
    }

    #[test]
    fn disk_conditions_fail() {
        let space = SpaceSpec::builtin("disk").unwrap();
        let b = build_b(&space, None, 0.5).unwrap();
        let c = check_construction_conditions(&space, &b, &cfg(20_000));
        assert!(c.summable_tail.fails());
        assert!(!c.decaying_tail.holds());
        assert_ne!(c.outcome, Outcome::Holds);
    }

    #[test]
    fn chaotic_weights() {
        let c = cfg(20_000);
        let disk = build_chaotic_weight(&SpaceSpec::builtin("disk").unwrap(), &c).unwrap();
        assert_eq!(disk.route, "constant weight 2");
        assert!(disk.chaotic.holds());
        let entire = SpaceSpec::builtin("entire").unwrap();
        let e = build_chaotic_weight(&entire, &c).unwrap();
        assert!(e.chaotic.holds() && e.operator.holds());
        assert!((e.weight.ln_w(10) - 10.0 * std::f64::consts::LN_2).abs() < 1e-9);
        let lac = build_chaotic_weight(&SpaceSpec::builtin("lacunary2n").unwrap(), &cfg(10_000));
        assert!(matches!(lac, Err(ConstructError::Refused { .. })));
        let ones = build_chaotic_weight(&SpaceSpec::builtin("ones").unwrap(), &c).unwrap();
        assert!(ones.chaotic.holds());
    }

    #[test]
    fn block_weight_values() {
        let space = SpaceSpec::builtin("entire").unwrap();
        let blocks = build_blocks(3, 100_000, &BlockParams::default()).unwrap();
        let w = block_weight(&space, &BMatrix::product(0.5), &blocks);
        for &nk in &blocks.cuts[..7] {
            assert_eq!(w.ln_v(nk), 0.0);
            for j in [1usize, 2, 3] {
                let expect = -((j * (nk + j)) as f64) * std::f64::consts::LN_2;
                assert!((w.ln_v(nk + j) - expect).abs() <= 1e-12 * expect.abs());
            }
        }
    }

    #[test]
    fn constant_chaotic_weight_is_not_certified_nonchaotic() {
        let space = SpaceSpec::builtin("disk").unwrap();
        let blocks = build_blocks(3, 100_000, &BlockParams::default()).unwrap();
        let w = WeightSeq::constant(2.0).unwrap();
        assert!(verify_not_chaotic(&space, &w, &blocks, &cfg(100_000)).fails());
    }

    #[test]
    fn disk_construction_is_refused() {
        let space = SpaceSpec::builtin("disk").unwrap();
        let b = build_b(&space, None, 0.5).unwrap();
        let blocks = build_blocks(
            3,
            20_000,
            &BlockParams {
                min_cuts: 6,
                ..BlockParams::default()
            },
        )
        .unwrap();
        assert!(matches!(
            build_fhc_nonchaotic_weight(&space, &b, &blocks, &cfg(20_000)),
            Err(ConstructError::Refused { .. })
        ));
    }

    #[test]
    fn artifact_digest_round_trips() {
        let space = SpaceSpec::builtin("entire").unwrap();
        let b = BMatrix::product(0.5);
        let blocks = build_blocks(
            3,
            20_000,
            &BlockParams {
                min_cuts: 6,
                ..BlockParams::default()
            },
        )
        .unwrap();
        let c = build_fhc_nonchaotic_weight(&space, &b, &blocks, &cfg(20_000)).unwrap();
        let art = ConstructionArtifact::new(&space, &b, &blocks, &c, 20_000);
        assert!(art.digest_ok());
        let back: ConstructionArtifact = serde_json::from_str(&serde_json::to_string(&art).unwrap()).unwrap();
        assert!(back.digest_ok());
        let mut tampered = back.clone();
        tampered.ln_v[3] += 1.0;
        assert!(!tampered.digest_ok());
        assert_eq!(back.weight().ln_v(100), c.weight.ln_v(100));
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]
        #[test]
        fn built_blocks_always_verify(r_max in 1usize..5, base in 3u64..6, h in 3_000usize..12_000) {
            let params = BlockParams { cut_base: base, min_cuts: 3, density_floor: 0.0, cuts: None };
            let b = build_blocks(r_max, h, &params).unwrap();
            prop_assert_eq!(b.report.difference_violations, 0);
            prop_assert_eq!(b.report.interior_violations, 0);
            prop_assert_eq!(b.report.overlaps, 0);
        }

        #[test]
        fn partial_sum_columns_increase(n in 1usize..300) {
            let space = SpaceSpec::builtin("entire").unwrap();
            let b = build_b(&space, None, 0.5).unwrap();
            let col = b.ln_column(n);
            prop_assert!(col.windows(2).all(|w| w[0] <= w[1]));
        }
    }
}
