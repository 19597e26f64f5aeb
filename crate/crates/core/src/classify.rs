//! Space-level classification: existence of hypercyclic and chaotic shifts,
//! whether frequent hypercyclicity forces chaos, and topologizability checks.
//!
//! Power series spaces are routed through lag-ratio estimates of `α`; other
//! Köthe matrices go through a bounded `(μ, C)` grid search.

use crate::logmath::{inf_trend, limit_ratio_estimate, ratio_octaves, sup_trend, trend, LogSum, RatioEstimate, Trend};
use crate::search::SearchConfig;
use crate::shifts::{series_membership, WeightSeq};
use crate::spaces::{check_bc, check_normable, check_row_domination, AlphaSeq, Order, PowerType, SpaceSpec};
use crate::verdict::{all_of, Outcome, Verdict, Witness};
use serde::{Deserialize, Serialize};
use std::fmt;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ClassifyError {
    #[error("space '{0}' is not a power series space")]
    NotPowerSeries(String),
}

pub mod route {
    pub const INF_RATIO_ABOVE_ONE: &str = "infinite type, lag-one ratio bounded away from one";
    pub const INF_RATIO_TO_ONE: &str = "infinite type, lag-one ratio tends to one";
    pub const INF_RATIO_SUM_SUP: &str = "infinite type, limsup of ratio sums";
    pub const INF_RATIO_SUM_LIM: &str = "infinite type, limit of ratio sums";
    pub const INF_REFINED: &str = "infinite type, refined tail hypothesis";
    pub const FIN_RATIO_INFINITE: &str = "finite type, lag-one ratio tends to infinity";
    pub const FIN_BOUNDED_LAGS: &str = "finite type, bounded lag ratios";
    pub const FIN_SPREADING_LAGS: &str = "finite type, lag ratios unbounded in the lag";
    pub const FIN_CONSTANT_WEIGHT: &str = "finite type, constant weight 2";
    pub const FIN_REFINED: &str = "finite type, refined tail hypothesis";
    pub const ROW_DOMINATION_GRID: &str = "row domination, (mu, C) grid";
    pub const SEMINORM_LADDER: &str = "seminorm ladder search";
    pub const NORMABLE: &str = "normable space";
    pub const VACUOUS: &str = "vacuous, no hypercyclic shifts";
    pub const CHAOS_IMPLIES_HC: &str = "chaos implies hypercyclicity";
    pub const OPEN: &str = "open question";
    pub const NONE: &str = "no applicable criterion";
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Routed {
    pub route: String,
    pub verdict: Verdict,
}

impl Routed {
    fn new(route: &str, verdict: Verdict) -> Self {
        Routed {
            route: route.to_string(),
            verdict,
        }
    }

    fn bare(route: &str, outcome: Outcome, horizon: usize) -> Self {
        Self::new(route, Verdict::new(outcome, horizon))
    }

    pub fn outcome(&self) -> Outcome {
        self.verdict.outcome
    }
}

/// Summary-table symbol.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Symbol {
    /// Every frequently hypercyclic shift is chaotic, and chaotic shifts exist.
    #[serde(rename = "=")]
    Equal,
    /// Some frequently hypercyclic shift is not chaotic.
    #[serde(rename = "≠")]
    NotEqual,
    /// No hypercyclic shift.
    #[serde(rename = "×")]
    NoHypercyclic,
    #[serde(rename = "?")]
    Unknown,
}

impl fmt::Display for Symbol {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Symbol::Equal => "=",
            Symbol::NotEqual => "≠",
            Symbol::NoHypercyclic => "×",
            Symbol::Unknown => "?",
        })
    }
}

/// Lag-ratio estimates for `α_{n+j}/α_n` over the trailing half of the horizon.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RhoReport {
    pub horizon: usize,
    pub eta: f64,
    /// Lag-one estimates at `H/4`, `H/2`, `H`.
    pub lag1: Vec<RatioEstimate>,
    pub lag1_liminf_trend: Trend,
    pub lag1_limsup_trend: Trend,
    /// Estimates at the full horizon for each lag of the ladder.
    pub ladder: Vec<RatioEstimate>,
    /// Behaviour of `limsup_n` as the lag grows.
    pub ladder_limsup_trend: Trend,
    /// Behaviour of `liminf_n` as the lag grows.
    pub ladder_liminf_trend: Trend,
}

impl RhoReport {
    fn lag1_full(&self) -> Option<&RatioEstimate> {
        self.lag1.last()
    }

    /// `limsup α_{n+1}/α_n ≤ 1 + η`.
    pub fn tends_to_one(&self) -> bool {
        self.lag1_full().is_some_and(|e| e.ln_limsup <= (1.0 + self.eta).ln())
    }

    /// `liminf α_{n+1}/α_n ≥ 1 + η`.
    pub fn above_one(&self) -> bool {
        self.lag1_full().is_some_and(|e| e.ln_liminf >= (1.0 + self.eta).ln())
    }

    pub fn lag1_tends_to_infinity(&self) -> bool {
        self.lag1_liminf_trend == Trend::Growing
    }

    pub fn lag1_limsup_bounded(&self) -> bool {
        self.lag1_limsup_trend == Trend::Bounded
    }
}

fn ladder_trend(values: &[f64], margin: f64) -> Trend {
    if values.len() < 3 {
        return Trend::Unclear;
    }
    let k = values.len();
    trend([values[k - 3], values[k - 2], values[k - 1]], margin)
}

pub fn rho_report(alpha: &AlphaSeq, cfg: &SearchConfig) -> RhoReport {
    let h = cfg.horizon.max(16);
    let a = alpha.ln_prefix(h);
    let a = &a[..h];
    let lag1: Vec<RatioEstimate> = ratio_octaves(a, 1).map(|o| o.to_vec()).unwrap_or_default();
    let (lag1_liminf_trend, lag1_limsup_trend) = if lag1.len() == 3 {
        (
            trend([lag1[0].ln_liminf, lag1[1].ln_liminf, lag1[2].ln_liminf], cfg.margin),
            trend([lag1[0].ln_limsup, lag1[1].ln_limsup, lag1[2].ln_limsup], cfg.margin),
        )
    } else {
        (Trend::Unclear, Trend::Unclear)
    };
    let ladder: Vec<RatioEstimate> = cfg
        .lag_ladder
        .iter()
        .filter_map(|&j| limit_ratio_estimate(a, j))
        .collect();
    let sups: Vec<f64> = ladder.iter().map(|e| e.ln_limsup).collect();
    let infs: Vec<f64> = ladder.iter().map(|e| e.ln_liminf).collect();
    RhoReport {
        horizon: h,
        eta: cfg.eta,
        lag1,
        lag1_liminf_trend,
        lag1_limsup_trend,
        ladder_limsup_trend: ladder_trend(&sups, cfg.margin),
        ladder_liminf_trend: ladder_trend(&infs, cfg.margin),
        ladder,
    }
}

/// `ln(Σ_{n<N} α_n / α_N)` for `N = 0..h`; entry 0 is `-inf`.
pub fn ln_ratio_sums(alpha: &AlphaSeq, h: usize) -> Vec<f64> {
    let a = alpha.ln_prefix(h);
    let mut out = Vec::with_capacity(h);
    let mut acc = LogSum::default();
    for n in 0..h {
        out.push(acc.ln() - a[n]);
        acc.push(a[n]);
    }
    out
}

fn third_minima(x: &[f64]) -> Option<[f64; 3]> {
    let h = x.len();
    if h < 16 {
        return None;
    }
    let min = |s: &[f64]| s.iter().copied().fold(f64::INFINITY, f64::min);
    Some([min(&x[h / 8..h / 4]), min(&x[h / 4..h / 2]), min(&x[h / 2..])])
}

fn infinite_ratio_sum_hc(alpha: &AlphaSeq, cfg: &SearchConfig) -> Verdict {
    let h = cfg.horizon.max(16);
    let r = ln_ratio_sums(alpha, h);
    let t = sup_trend(&r[1..], cfg.margin);
    let mut v = Verdict::new(
        match t {
            Trend::Growing => Outcome::Holds,
            Trend::Bounded => Outcome::Fails,
            Trend::Unclear => Outcome::Undetermined,
        },
        h,
    );
    let sup = r[1..].iter().copied().fold(f64::NEG_INFINITY, f64::max);
    v.witnesses.push(Witness::new("ratio sums").with("ln_sup", sup));
    v.note(format!("running sup of ratio sums: {t:?}"));
    v
}

fn infinite_ratio_sum_chaos(alpha: &AlphaSeq, cfg: &SearchConfig) -> Verdict {
    let h = cfg.horizon.max(16);
    let r = ln_ratio_sums(alpha, h);
    let mut v = Verdict::new(Outcome::Undetermined, h);
    if let Some(mins) = third_minima(&r) {
        let t = trend(mins, cfg.margin);
        v.outcome = match t {
            Trend::Growing => Outcome::Holds,
            Trend::Bounded => Outcome::Fails,
            Trend::Unclear => Outcome::Undetermined,
        };
        v.witnesses.push(
            Witness::new("ratio sum minima")
                .with("ln_min_1", mins[0])
                .with("ln_min_2", mins[1])
                .with("ln_min_3", mins[2]),
        );
        v.note(format!("tail minima of ratio sums: {t:?}"));
    }
    v
}

/// `α_n` as plain values, cut at the first overflow.
fn alpha_values(alpha: &AlphaSeq, h: usize) -> Vec<f64> {
    let a = alpha.ln_prefix(h);
    a[..h].iter().map(|x| x.exp()).take_while(|x| x.is_finite()).collect()
}

/// Sufficient hypothesis for a non-chaotic frequently hypercyclic shift on infinite type:
/// for sampled `C`, some lag `j` makes `Σ ε^{α_{n-j}+…+α_{n-1} - Cα_n}` converge (`λ^p`)
/// or `α_{n-j}+…+α_{n-1} - Cα_n` bounded below (`c_0`).
pub fn refined_infinite_hypothesis(alpha: &AlphaSeq, order: Order, rho: &RhoReport, cfg: &SearchConfig) -> Verdict {
    let h = cfg.horizon.min(1 << 14).max(64);
    if rho.lag1_limsup_trend == Trend::Growing {
        // S_j(n) ≤ j α_{n-1}, so jumps of α_n/α_{n-1} drive S_j(n) - Cα_n to -∞ for every C.
        let mut v = Verdict::new(Outcome::Fails, h);
        v.note("lag-one ratio unbounded");
        return v;
    }
    let a = alpha_values(alpha, h);
    let mut prefix = vec![0.0];
    for x in &a {
        prefix.push(prefix.last().unwrap() + x);
    }
    let ln_eps = 0.5f64.ln();
    let mut verdict = Verdict::new(Outcome::Undetermined, h);
    verdict.truncate_to(a.len());
    let mut outcomes = Vec::new();
    for c in [1.0, 2.0, 4.0, 8.0, 16.0] {
        let mut per_j = Vec::new();
        for &j in &cfg.lag_ladder {
            if a.len() < j + 16 {
                continue;
            }
            let diff: Vec<f64> = (j..a.len()).map(|n| prefix[n] - prefix[n - j] - c * a[n]).collect();
            let o = match order {
                Order::Lp(_) => {
                    let terms: Vec<f64> = diff.iter().map(|d| ln_eps * d).collect();
                    series_membership(order, &terms, cfg).0
                }
                Order::C0 => match inf_trend(&diff, cfg.margin) {
                    Trend::Bounded => Outcome::Holds,
                    Trend::Growing => Outcome::Fails,
                    Trend::Unclear => Outcome::Undetermined,
                },
            };
            per_j.push((j, o));
        }
        let o = if let Some(&(j, _)) = per_j.iter().find(|(_, o)| *o == Outcome::Holds) {
            verdict
                .witnesses
                .push(Witness::new(format!("C={c}")).with("C", c).with("j", j as f64));
            Outcome::Holds
        } else if !per_j.is_empty() && per_j.iter().all(|(_, o)| *o == Outcome::Fails) {
            verdict.note(format!("C={c}: every lag fails"));
            Outcome::Fails
        } else {
            Outcome::Undetermined
        };
        outcomes.push(o);
    }
    verdict.outcome = all_of(outcomes);
    verdict
}

/// Sufficient hypothesis for a non-chaotic frequently hypercyclic shift on finite type:
/// bounded lag-one ratios and, for sampled `δ`, some lag `j` with
/// `Σ ε^{-α_{n-j}+δα_n}` convergent (`λ^p`), or lag ratios unbounded in the lag (`c_0`).
pub fn refined_finite_hypothesis(alpha: &AlphaSeq, order: Order, rho: &RhoReport, cfg: &SearchConfig) -> Verdict {
    let h = cfg.horizon.min(1 << 14).max(64);
    let mut verdict = Verdict::new(Outcome::Undetermined, h);
    if rho.lag1_limsup_trend == Trend::Growing {
        verdict.outcome = Outcome::Fails;
        verdict.note("lag-one ratio unbounded");
        return verdict;
    }
    let second = match order {
        Order::C0 => match rho.ladder_liminf_trend {
            Trend::Growing => Outcome::Holds,
            Trend::Bounded => Outcome::Fails,
            Trend::Unclear => Outcome::Undetermined,
        },
        Order::Lp(_) => {
            let a = alpha_values(alpha, h);
            verdict.truncate_to(a.len());
            let ln_eps = 0.5f64.ln();
            let mut outcomes = Vec::new();
            for k in 1..=6 {
                let delta = 0.5f64.powi(k);
                let mut found = None;
                let mut all_fail = true;
                for &j in &cfg.lag_ladder {
                    if a.len() < j + 16 {
                        continue;
                    }
                    let terms: Vec<f64> = (j..a.len()).map(|n| ln_eps * (-a[n - j] + delta * a[n])).collect();
                    match series_membership(order, &terms, cfg).0 {
                        Outcome::Holds => {
                            found = Some(j);
                            break;
                        }
                        Outcome::Undetermined => all_fail = false,
                        Outcome::Fails => {}
                    }
                }
                outcomes.push(match found {
                    Some(j) => {
                        verdict.witnesses.push(
                            Witness::new(format!("delta={delta}"))
                                .with("delta", delta)
                                .with("j", j as f64),
                        );
                        Outcome::Holds
                    }
                    None if all_fail => Outcome::Fails,
                    None => Outcome::Undetermined,
                });
            }
            all_of(outcomes)
        }
    };
    verdict.outcome = if rho.lag1_limsup_bounded() {
        second
    } else {
        all_of([Outcome::Undetermined, second])
    };
    verdict
}

fn trend_outcome(t: Trend, growing: Outcome) -> Outcome {
    match t {
        Trend::Growing => growing,
        Trend::Bounded => match growing {
            Outcome::Holds => Outcome::Fails,
            _ => Outcome::Holds,
        },
        Trend::Unclear => Outcome::Undetermined,
    }
}

/// `Σ_{n=1}^N (ln a_{1,n-1} - ln a_{μ,n})` for `N = 0..len`.
fn product_prefix(a1: &[f64], amu: &[f64], len: usize) -> Vec<f64> {
    let mut out = Vec::with_capacity(len);
    out.push(0.0);
    for n in 1..len {
        out.push(out[n - 1] + a1[n - 1] - amu[n]);
    }
    out
}

/// Searches `μ` (ascending) and `C ∈ {2^0..2^c_max}` for which `test` accepts the sequences
/// `ln(∏_{n≤N} a_{1,n-1}/(C^N ∏ a_{μ,n})) + ln a_{m,N}` for every probe `m` and the
/// refuting probes `{μ, 2μ, μ², 2μ²}`.
fn mu_c_grid(
    space: &SpaceSpec,
    cfg: &SearchConfig,
    test: impl Fn(&[f64]) -> Outcome,
    verdict: &mut Verdict,
) -> Outcome {
    let h = cfg.horizon;
    let a1 = space.ln_row(1, h);
    let c_grid = cfg.c_grid();
    let mut all_refuted = true;
    for mu in cfg.mu_ladder(1) {
        let amu = space.ln_row(mu, h);
        let mut probes: Vec<u64> = cfg.probes.clone();
        probes.extend([
            mu,
            mu.saturating_mul(2),
            mu.saturating_mul(mu),
            mu.saturating_mul(mu).saturating_mul(2),
        ]);
        probes.sort_unstable();
        probes.dedup();
        let rows: Vec<(u64, Vec<f64>)> = probes.iter().map(|&m| (m, space.ln_row(m, h))).collect();
        let len = rows
            .iter()
            .map(|r| r.1.len())
            .chain([a1.len(), amu.len()])
            .min()
            .unwrap_or(0);
        if len < 16 {
            all_refuted = false;
            continue;
        }
        verdict.truncate_to(len);
        let p = product_prefix(&a1, &amu, len);
        let eval = |c: f64| -> Outcome {
            let lc = c.ln();
            all_of(rows.iter().map(|(_, am)| {
                let t: Vec<f64> = (0..len).map(|n| p[n] - n as f64 * lc + am[n]).collect();
                test(&t)
            }))
        };
        match eval(*c_grid.last().expect("grid")) {
            Outcome::Fails => continue,
            Outcome::Undetermined => {
                all_refuted = false;
                continue;
            }
            Outcome::Holds => {}
        }
        let c = c_grid
            .iter()
            .copied()
            .find(|&c| eval(c) == Outcome::Holds)
            .expect("largest C holds");
        verdict
            .witnesses
            .push(Witness::new("grid").with("mu", mu as f64).with("C", c));
        return Outcome::Holds;
    }
    if all_refuted {
        verdict.note(format!(
            "every mu <= {} refuted at C = 2^{} by a probe in {{m <= {}, mu, 2mu, mu^2, 2mu^2}}",
            cfg.mu_max,
            cfg.c_max_log2,
            cfg.probes.iter().max().unwrap_or(&1)
        ));
        Outcome::Fails
    } else {
        Outcome::Undetermined
    }
}

/// `ν_n = min_k a_{m_{k+1},n}/a_{m_k,n-1}` over the doubling ladder `m_k = 2^k`.
fn ladder_nu(space: &SpaceSpec, cfg: &SearchConfig) -> Vec<f64> {
    let h = cfg.horizon;
    let mut ms = vec![1u64];
    while *ms.last().unwrap() < cfg.mu_max {
        let next = ms.last().unwrap() * 2;
        ms.push(next);
    }
    let rows: Vec<Vec<f64>> = ms.iter().map(|&m| space.ln_row(m, h)).collect();
    let len = rows.iter().map(|r| r.len()).min().unwrap_or(0);
    let mut nu = vec![0.0; len];
    for n in 1..len {
        nu[n] = (0..rows.len() - 1)
            .map(|k| rows[k + 1][n] - rows[k][n - 1])
            .fold(f64::INFINITY, f64::min);
    }
    nu
}

fn generic_ladder(space: &SpaceSpec, cfg: &SearchConfig, chaos: bool, verdict: &mut Verdict) -> Outcome {
    let nu = ladder_nu(space, cfg);
    if nu.len() < 16 {
        return Outcome::Undetermined;
    }
    verdict.truncate_to(nu.len());
    let mut prefix = vec![0.0];
    for n in 1..nu.len() {
        prefix.push(prefix[n - 1] - nu[n]);
    }
    let outcomes = cfg.probes.iter().map(|&m| {
        let am = space.ln_row(m, nu.len());
        let t: Vec<f64> = (0..am.len().min(prefix.len())).map(|n| prefix[n] + am[n]).collect();
        if chaos {
            series_membership(space.order, &t, cfg).0
        } else {
            match inf_trend(&t, cfg.margin) {
                Trend::Growing => Outcome::Holds,
                _ => Outcome::Undetermined,
            }
        }
    });
    // Only a positive answer is conclusive for a fixed ladder.
    match all_of(outcomes) {
        Outcome::Holds => Outcome::Holds,
        _ => Outcome::Undetermined,
    }
}

fn generic_exists(space: &SpaceSpec, cfg: &SearchConfig, chaos: bool) -> Routed {
    let h = cfg.horizon;
    let mut verdict = Verdict::new(Outcome::Undetermined, h);
    let dom = check_row_domination(space, cfg);
    verdict.note(format!("row domination: {}", dom.outcome));
    if dom.holds() {
        let order = space.order;
        verdict.outcome = if chaos {
            mu_c_grid(space, cfg, |t| series_membership(order, t, cfg).0, &mut verdict)
        } else {
            mu_c_grid(
                space,
                cfg,
                |t| trend_outcome(inf_trend(t, cfg.margin), Outcome::Holds),
                &mut verdict,
            )
        };
        return Routed::new(route::ROW_DOMINATION_GRID, verdict);
    }
    verdict.outcome = generic_ladder(space, cfg, chaos, &mut verdict);
    Routed::new(route::SEMINORM_LADDER, verdict)
}

pub fn exists_hc_shift(space: &SpaceSpec, cfg: &SearchConfig) -> Routed {
    match space.matrix.power_series() {
        Some((PowerType::Infinite, alpha)) => Routed::new(route::INF_RATIO_SUM_SUP, infinite_ratio_sum_hc(alpha, cfg)),
        Some((PowerType::Finite, alpha)) => finite_existence(&rho_report(alpha, cfg), cfg.horizon),
        None => generic_exists(space, cfg, false),
    }
}

pub fn exists_chaotic_shift(space: &SpaceSpec, cfg: &SearchConfig) -> Routed {
    match space.matrix.power_series() {
        Some((PowerType::Infinite, alpha)) => {
            Routed::new(route::INF_RATIO_SUM_LIM, infinite_ratio_sum_chaos(alpha, cfg))
        }
        Some((PowerType::Finite, alpha)) => finite_existence(&rho_report(alpha, cfg), cfg.horizon),
        None => generic_exists(space, cfg, true),
    }
}

/// Finite type: chaotic and hypercyclic shifts exist together exactly when the lag-one ratio is bounded.
fn finite_existence(rho: &RhoReport, h: usize) -> Routed {
    if rho.lag1_tends_to_infinity() {
        Routed::bare(route::FIN_RATIO_INFINITE, Outcome::Fails, h)
    } else if rho.lag1_limsup_bounded() {
        Routed::bare(route::FIN_CONSTANT_WEIGHT, Outcome::Holds, h)
    } else {
        Routed::bare(route::NONE, Outcome::Undetermined, h)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Classification {
    pub space: String,
    pub kind: String,
    pub horizon: usize,
    pub symbol: Symbol,
    pub exists_hc: Routed,
    pub exists_chaotic: Routed,
    pub fhc_implies_chaos: Routed,
    pub exists_fhc_not_chaotic: Routed,
    pub rho: Option<RhoReport>,
    pub auxiliary: Vec<(String, Verdict)>,
    pub notes: Vec<String>,
}

impl Classification {
    /// Checks the invariants; see [`Classification::enforce`].
    pub fn invariant_violations(&self) -> Vec<String> {
        let mut out = Vec::new();
        if self.exists_chaotic.verdict.holds() && !self.exists_hc.verdict.holds() {
            out.push("chaotic shift exists but hypercyclic existence is not Holds".into());
        }
        if self.fhc_implies_chaos.verdict.holds() && self.exists_fhc_not_chaotic.verdict.holds() {
            out.push("both 'FHC implies chaos' and 'FHC non-chaotic exists' hold".into());
        }
        if self.exists_hc.verdict.fails() && self.exists_chaotic.verdict.holds() {
            out.push("no hypercyclic shift but a chaotic one".into());
        }
        out
    }

    /// Repairs the invariants: chaos lifts hypercyclic existence; contradictions become `Undetermined`.
    fn enforce(&mut self) {
        if self.exists_hc.verdict.fails() && self.exists_chaotic.verdict.holds() {
            self.notes
                .push("contradiction between hypercyclic and chaotic routes; both set to Undetermined".into());
            self.exists_hc.verdict.outcome = Outcome::Undetermined;
            self.exists_chaotic.verdict.outcome = Outcome::Undetermined;
        }
        if self.exists_chaotic.verdict.holds() && !self.exists_hc.verdict.holds() {
            self.exists_hc = Routed::bare(route::CHAOS_IMPLIES_HC, Outcome::Holds, self.horizon);
        }
        if self.fhc_implies_chaos.verdict.holds() && self.exists_fhc_not_chaotic.verdict.holds() {
            self.notes
                .push("contradictory frequent hypercyclicity verdicts; both set to Undetermined".into());
            self.fhc_implies_chaos.verdict.outcome = Outcome::Undetermined;
            self.exists_fhc_not_chaotic.verdict.outcome = Outcome::Undetermined;
        }
        self.symbol = if self.exists_hc.verdict.fails() {
            Symbol::NoHypercyclic
        } else if self.exists_chaotic.verdict.holds() && self.fhc_implies_chaos.verdict.holds() {
            Symbol::Equal
        } else if self.exists_fhc_not_chaotic.verdict.holds() {
            Symbol::NotEqual
        } else {
            Symbol::Unknown
        };
    }

    /// Whether at least one of the four verdicts is determinate.
    pub fn is_determinate(&self) -> bool {
        [
            &self.exists_hc,
            &self.exists_chaotic,
            &self.fhc_implies_chaos,
            &self.exists_fhc_not_chaotic,
        ]
        .iter()
        .any(|r| r.outcome() != Outcome::Undetermined)
    }

    pub fn headline(&self) -> String {
        match self.symbol {
            Symbol::NoHypercyclic => format!("no hypercyclic weighted shift (route: {})", self.exists_hc.route),
            Symbol::Equal => format!("FHC ⇒ chaos (route: {})", self.fhc_implies_chaos.route),
            Symbol::NotEqual => {
                format!("exists FHC non-chaotic (route: {})", self.exists_fhc_not_chaotic.route)
            }
            Symbol::Unknown => "undetermined".to_string(),
        }
    }

    pub fn summary(&self) -> String {
        let mut s = format!(
            "space: {} ({})\nhorizon: {}\nclass: {}  {}\n",
            self.space,
            self.kind,
            self.horizon,
            self.symbol,
            self.headline()
        );
        for (name, r) in [
            ("exists hypercyclic shift", &self.exists_hc),
            ("exists chaotic shift", &self.exists_chaotic),
            ("FHC implies chaos", &self.fhc_implies_chaos),
            ("exists FHC non-chaotic shift", &self.exists_fhc_not_chaotic),
        ] {
            s.push_str(&format!(
                "  {name}: {} (route: {}; effective horizon {})\n",
                r.outcome(),
                r.route,
                r.verdict.effective_horizon
            ));
            for w in &r.verdict.witnesses {
                let vals: Vec<String> = w.values.iter().map(|(k, v)| format!("{k}={v}")).collect();
                s.push_str(&format!("    witness {}: {}\n", w.label, vals.join(", ")));
            }
        }
        if let Some(rho) = &self.rho {
            if let Some(e) = rho.lag1.last() {
                s.push_str(&format!(
                    "  lag-one ratio on tail: liminf {:.6}, limsup {:.6} (eta {})\n",
                    e.liminf(),
                    e.limsup(),
                    rho.eta
                ));
            }
            s.push_str(&format!(
                "  lag ladder: limsup {:?}, liminf {:?}\n",
                rho.ladder_limsup_trend, rho.ladder_liminf_trend
            ));
        }
        for (name, v) in &self.auxiliary {
            s.push_str(&format!("  auxiliary {name}: {}\n", v.outcome));
        }
        for n in &self.notes {
            s.push_str(&format!("  note: {n}\n"));
        }
        s
    }
}

fn kind_name(space: &SpaceSpec) -> String {
    let order = match space.order {
        Order::C0 => "c0".to_string(),
        Order::Lp(p) => format!("l^{p}"),
    };
    match space.matrix.power_series() {
        Some((PowerType::Infinite, a)) => format!("power series, infinite type, alpha = {}, {order}", a.label()),
        Some((PowerType::Finite, a)) => format!("power series, finite type, alpha = {}, {order}", a.label()),
        None => format!("Köthe matrix {}, {order}", space.matrix.label()),
    }
}

fn assemble(space: &SpaceSpec, cfg: &SearchConfig, hc: Routed, ch: Routed, fic: Routed, fnc: Routed) -> Classification {
    Classification {
        space: space.label.clone(),
        kind: kind_name(space),
        horizon: cfg.horizon,
        symbol: Symbol::Unknown,
        exists_hc: hc,
        exists_chaotic: ch,
        fhc_implies_chaos: fic,
        exists_fhc_not_chaotic: fnc,
        rho: None,
        auxiliary: Vec::new(),
        notes: Vec::new(),
    }
}

fn no_hc(space: &SpaceSpec, cfg: &SearchConfig, hc: Routed) -> Classification {
    let h = cfg.horizon;
    let route = hc.route.clone();
    assemble(
        space,
        cfg,
        hc,
        Routed::bare(&route, Outcome::Fails, h),
        Routed::bare(route::VACUOUS, Outcome::Holds, h),
        Routed::bare(route::VACUOUS, Outcome::Fails, h),
    )
}

pub fn classify_power_series(space: &SpaceSpec, cfg: &SearchConfig) -> Result<Classification, ClassifyError> {
    let (t, alpha) = space
        .matrix
        .power_series()
        .ok_or_else(|| ClassifyError::NotPowerSeries(space.label.clone()))?;
    let h = cfg.horizon;
    let rho = rho_report(alpha, cfg);
    let mut c = match t {
        PowerType::Infinite => {
            let sums = exists_hc_shift(space, cfg);
            if rho.above_one() {
                let mut c = no_hc(space, cfg, Routed::bare(route::INF_RATIO_ABOVE_ONE, Outcome::Fails, h));
                if sums.verdict.holds() {
                    c.notes.push("ratio-sum route contradicts the lag-one rule".into());
                    c.exists_hc.verdict.outcome = Outcome::Undetermined;
                    c.exists_chaotic.verdict.outcome = Outcome::Undetermined;
                }
                c.auxiliary.push(("ratio sums".into(), sums.verdict));
                c
            } else if rho.tends_to_one() {
                let mut c = assemble(
                    space,
                    cfg,
                    Routed::bare(route::INF_RATIO_TO_ONE, Outcome::Holds, h),
                    Routed::bare(route::INF_RATIO_TO_ONE, Outcome::Holds, h),
                    Routed::bare(route::INF_RATIO_TO_ONE, Outcome::Fails, h),
                    Routed::bare(route::INF_RATIO_TO_ONE, Outcome::Holds, h),
                );
                if sums.verdict.fails() {
                    c.notes.push("ratio-sum route contradicts the lag-one rule".into());
                    c.exists_hc.verdict.outcome = Outcome::Undetermined;
                }
                c.auxiliary.push(("ratio sums".into(), sums.verdict));
                c
            } else if sums.verdict.fails() {
                no_hc(space, cfg, sums)
            } else {
                let chaos = exists_chaotic_shift(space, cfg);
                let refined = refined_infinite_hypothesis(alpha, space.order, &rho, cfg);
                let (fic, fnc) = if refined.holds() {
                    (
                        Routed::bare(route::INF_REFINED, Outcome::Fails, h),
                        Routed::bare(route::INF_REFINED, Outcome::Holds, h),
                    )
                } else {
                    (
                        Routed::bare(route::OPEN, Outcome::Undetermined, h),
                        Routed::bare(route::OPEN, Outcome::Undetermined, h),
                    )
                };
                let mut c = assemble(space, cfg, sums, chaos, fic, fnc);
                if !refined.holds() {
                    c.notes.push(
                        "neither the lag-one rules nor the refined hypothesis apply; whether every FHC shift is chaotic is open".into(),
                    );
                }
                c.auxiliary.push(("refined tail hypothesis".into(), refined));
                c
            }
        }
        PowerType::Finite => {
            let exist = finite_existence(&rho, h);
            if exist.verdict.fails() {
                no_hc(space, cfg, exist)
            } else if rho.ladder_limsup_trend == Trend::Bounded && rho.lag1_limsup_bounded() {
                assemble(
                    space,
                    cfg,
                    exist.clone(),
                    exist,
                    Routed::bare(route::FIN_BOUNDED_LAGS, Outcome::Holds, h),
                    Routed::bare(route::FIN_BOUNDED_LAGS, Outcome::Fails, h),
                )
            } else if rho.lag1_limsup_bounded() && rho.ladder_liminf_trend == Trend::Growing {
                assemble(
                    space,
                    cfg,
                    exist.clone(),
                    exist,
                    Routed::bare(route::FIN_SPREADING_LAGS, Outcome::Fails, h),
                    Routed::bare(route::FIN_SPREADING_LAGS, Outcome::Holds, h),
                )
            } else {
                let refined = refined_finite_hypothesis(alpha, space.order, &rho, cfg);
                let (fic, fnc) = if refined.holds() {
                    (
                        Routed::bare(route::FIN_REFINED, Outcome::Fails, h),
                        Routed::bare(route::FIN_REFINED, Outcome::Holds, h),
                    )
                } else {
                    (
                        Routed::bare(route::NONE, Outcome::Undetermined, h),
                        Routed::bare(route::NONE, Outcome::Undetermined, h),
                    )
                };
                let mut c = assemble(space, cfg, exist.clone(), exist, fic, fnc);
                c.auxiliary.push(("refined tail hypothesis".into(), refined));
                c
            }
        }
    };
    c.rho = Some(rho);
    c.enforce();
    Ok(c)
}

/// Classification of any space: power series go through [`classify_power_series`].
pub fn classify(space: &SpaceSpec, cfg: &SearchConfig) -> Classification {
    if let Ok(c) = classify_power_series(space, cfg) {
        return c;
    }
    let h = cfg.horizon;
    let hc = exists_hc_shift(space, cfg);
    if hc.verdict.fails() {
        let mut c = no_hc(space, cfg, hc);
        c.enforce();
        return c;
    }
    let chaos = exists_chaotic_shift(space, cfg);
    let normable = check_normable(space, cfg);
    let bc_ok = match space.order {
        Order::Lp(_) => true,
        Order::C0 => check_bc(space, cfg).holds(),
    };
    let (fic, fnc) = if normable.holds() && bc_ok {
        (
            Routed::new(route::NORMABLE, normable),
            Routed::bare(route::NORMABLE, Outcome::Fails, h),
        )
    } else {
        (
            Routed::bare(route::NONE, Outcome::Undetermined, h),
            Routed::bare(route::NONE, Outcome::Undetermined, h),
        )
    };
    let mut c = assemble(space, cfg, hc, chaos, fic, fnc);
    c.enforce();
    c
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TkReport {
    pub premise: Verdict,
    pub conclusion: Verdict,
    /// Premise holds and conclusion fails.
    pub counterexample: bool,
}

/// Magnitude beyond which differences of logarithms lose all useful precision.
const CONDITIONING_LIMIT: f64 = 1e12;

/// `ln v_{n-j} + ln a_{m,n-j} - ln v_n - ln a_{μ,n}` for `n ≥ j`, cut where the inputs become ill-conditioned.
fn shift_gap(v: &[f64], am: &[f64], amu: &[f64], j: usize) -> Vec<f64> {
    let len = v.len().min(am.len()).min(amu.len());
    let mut out = Vec::new();
    for n in j..len {
        let parts = [v[n - j], am[n - j], v[n], amu[n]];
        if parts.iter().any(|x| !x.is_finite() || x.abs() > CONDITIONING_LIMIT) {
            break;
        }
        out.push(parts[0] + parts[1] - parts[2] - parts[3]);
    }
    out
}

/// Whether `v_{n-1} a_{m,n-1} ≤ C v_n a_{μ,n}` on the prefix, with the smallest grid `C`.
pub fn tk_premise_with(
    space: &SpaceSpec,
    v: &WeightSeq,
    m: u64,
    mu: u64,
    cfg: &SearchConfig,
) -> (Outcome, Option<f64>) {
    let h = cfg.horizon;
    let lv = v.ln_v_prefix(h);
    let g = shift_gap(&lv, &space.ln_row(m, h), &space.ln_row(mu, h), 1);
    match sup_trend(&g, cfg.margin) {
        Trend::Bounded => {
            let sup = g.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            (Outcome::Holds, Some(cfg.c_witness(sup).unwrap_or(sup.exp())))
        }
        Trend::Growing => (Outcome::Fails, None),
        Trend::Unclear => (Outcome::Undetermined, None),
    }
}

/// Tests the topologizability premise and conclusion for one positive sequence `v`.
pub fn check_tk_witness(space: &SpaceSpec, v: &WeightSeq, cfg: &SearchConfig) -> TkReport {
    let h = cfg.horizon;
    let lv = v.ln_v_prefix(h);
    let mut premise = Verdict::new(Outcome::Undetermined, h);
    let mut conclusion = Verdict::new(Outcome::Undetermined, h);
    let mut p_out = Vec::new();
    let mut c_out = Vec::new();
    for &m in &cfg.probes {
        let am = space.ln_row(m, h);
        let ladder = cfg.mu_ladder(m);

        let mut found = None;
        let mut all_growing = true;
        for &mu in &ladder {
            match tk_premise_with(space, v, m, mu, cfg) {
                (Outcome::Holds, c) => {
                    found = Some((mu, c.unwrap_or(1.0)));
                    break;
                }
                (Outcome::Undetermined, _) => all_growing = false,
                (Outcome::Fails, _) => {}
            }
        }
        p_out.push(match found {
            Some((mu, c)) => {
                premise.witnesses.push(
                    Witness::new(format!("m={m}"))
                        .with("m", m as f64)
                        .with("mu", mu as f64)
                        .with("C", c),
                );
                Outcome::Holds
            }
            None if all_growing => Outcome::Fails,
            None => Outcome::Undetermined,
        });

        // One μ must serve every tested lag.
        let mut serving = None;
        let mut refuted_at = Vec::new();
        let mut any_unclear = false;
        let mut skipped = Vec::new();
        for &mu in &ladder {
            let amu = space.ln_row(mu, h);
            let mut first_bad = None;
            let mut unclear = false;
            let mut consts = Vec::new();
            for &j in &cfg.lag_ladder {
                let g = shift_gap(&lv, &am, &amu, j);
                if g.len() < 16 {
                    if !skipped.contains(&j) {
                        skipped.push(j);
                    }
                    continue;
                }
                conclusion.truncate_to(g.len() + j);
                match sup_trend(&g, cfg.margin) {
                    Trend::Bounded => consts.push((j, g.iter().copied().fold(f64::NEG_INFINITY, f64::max))),
                    Trend::Growing => {
                        first_bad = Some(j);
                        break;
                    }
                    Trend::Unclear => unclear = true,
                }
            }
            match first_bad {
                Some(j) => refuted_at.push(j),
                None if unclear || consts.is_empty() => any_unclear = true,
                None => {
                    serving = Some((mu, consts));
                    break;
                }
            }
        }
        if !skipped.is_empty() {
            conclusion.note(format!(
                "m={m}: lags {skipped:?} too long for the well-conditioned prefix"
            ));
        }
        c_out.push(match serving {
            Some((mu, consts)) => {
                let mut w = Witness::new(format!("m={m}")).with("m", m as f64).with("mu", mu as f64);
                for (j, ln_c) in consts {
                    w = w.with(&format!("ln_C_{j}"), ln_c);
                }
                conclusion.witnesses.push(w);
                Outcome::Holds
            }
            None if !any_unclear && !refuted_at.is_empty() => {
                let j = *refuted_at.iter().max().unwrap();
                conclusion.witnesses.push(
                    Witness::new(format!("m={m} fails"))
                        .with("m", m as f64)
                        .with("j_fail", j as f64),
                );
                Outcome::Fails
            }
            None => Outcome::Undetermined,
        });
    }
    premise.outcome = all_of(p_out);
    conclusion.outcome = all_of(c_out);
    let counterexample = premise.holds() && conclusion.fails();
    TkReport {
        premise,
        conclusion,
        counterexample,
    }
}

/// Topologizability of all shifts on the space, where a sufficient condition decides it.
pub fn check_tk_space(space: &SpaceSpec, cfg: &SearchConfig) -> Routed {
    let h = cfg.horizon;
    match space.matrix.power_series() {
        Some((PowerType::Finite, alpha)) => {
            let rho = rho_report(alpha, cfg);
            if rho.ladder_limsup_trend == Trend::Bounded && rho.lag1_limsup_bounded() {
                Routed::bare(route::FIN_BOUNDED_LAGS, Outcome::Holds, h)
            } else {
                Routed::bare(route::NONE, Outcome::Undetermined, h)
            }
        }
        Some((PowerType::Infinite, _)) => {
            let hc = exists_hc_shift(space, cfg);
            if hc.verdict.holds() {
                let mut v = Verdict::new(Outcome::Fails, h);
                v.note("hypercyclic shifts exist, which is incompatible with the condition on infinite type");
                Routed::new(route::INF_RATIO_SUM_SUP, v)
            } else {
                Routed::bare(route::NONE, Outcome::Undetermined, h)
            }
        }
        None => {
            let normable = check_normable(space, cfg);
            if normable.holds() {
                Routed::new(route::NORMABLE, normable)
            } else {
                Routed::bare(route::NONE, Outcome::Undetermined, h)
            }
        }
    }
}
