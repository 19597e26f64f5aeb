//! Frequent hypercyclicity conditions, explicit orbit vectors and hitting densities.
//!
//! Vectors are stored relative to a weight: `x_i = v_i · c_i`. The iterate
//! `(B^n x)_k = (v_k / v_{k+n}) x_{k+n} = v_k c_{k+n}` then needs no division
//! by tiny `v`, and coordinates far below the `f64` range stay exact.

use crate::construct::Blocks;
use crate::logmath::{log_add_exp, LogSum};
use crate::search::SearchConfig;
use crate::shifts::{series_membership, WeightSeq};
use crate::spaces::{seminorm, FiniteVector, Order, SpaceSpec};
use crate::verdict::{all_of, Outcome, Verdict, Witness};
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::io::{self, Write};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum OrbitError {
    #[error("r = {r} exceeds the {available} sets of the block structure")]
    NotEnoughSets { r: usize, available: usize },
    #[error("target for r = {r} has support outside [0, {r}]")]
    TargetSupport { r: usize },
    #[error("coordinate {index} written twice")]
    OverlappingWrite { index: usize },
    #[error("no targets supplied")]
    NoTargets,
}

/// A vector with finitely many nonzero coordinates `x_i = sign_i · v_i · exp(ln_c_i)`.
#[derive(Clone, Debug)]
pub struct LazyVector {
    pub description: String,
    weight: WeightSeq,
    /// `(index, sign, ln |c|)`, sorted by index.
    entries: Vec<(usize, f64, f64)>,
}

impl LazyVector {
    fn from_map(description: String, weight: &WeightSeq, map: BTreeMap<usize, (f64, f64)>) -> Self {
        LazyVector {
            description,
            weight: weight.clone(),
            entries: map.into_iter().map(|(i, (s, l))| (i, s, l)).collect(),
        }
    }

    /// `Σ_{k : kq ≤ h} v_{kq} e_{kq}`, a periodic point of period `q`.
    pub fn periodic(weight: &WeightSeq, q: usize, h: usize) -> Self {
        let q = q.max(1);
        let map = (0..=h / q).map(|k| (k * q, (1.0, 0.0))).collect();
        Self::from_map(format!("periodic point, period {q}"), weight, map)
    }

    /// `e_n`.
    pub fn unit(weight: &WeightSeq, n: usize) -> Self {
        let ln_v = weight.ln_v(n);
        Self::from_map(format!("e_{n}"), weight, BTreeMap::from([(n, (1.0, -ln_v))]))
    }

    pub fn weight(&self) -> &WeightSeq {
        &self.weight
    }

    pub fn support(&self) -> impl Iterator<Item = usize> + '_ {
        self.entries.iter().map(|e| e.0)
    }

    pub fn support_len(&self) -> usize {
        self.entries.len()
    }

    fn lookup(&self, i: usize) -> Option<(f64, f64)> {
        self.entries
            .binary_search_by_key(&i, |e| e.0)
            .ok()
            .map(|k| (self.entries[k].1, self.entries[k].2))
    }

    /// `(sign, ln |x_i|)`, or `None` off the support.
    pub fn ln_coord(&self, i: usize) -> Option<(f64, f64)> {
        self.lookup(i).map(|(s, l)| (s, self.weight.ln_v(i) + l))
    }

    pub fn coord(&self, i: usize) -> f64 {
        self.ln_coord(i).map_or(0.0, |(s, l)| s * l.exp())
    }

    /// Coordinates `lo..hi` of `x`.
    pub fn section(&self, lo: usize, hi: usize) -> FiniteVector {
        FiniteVector::from_pairs((lo..hi).map(|i| (i, self.coord(i))).collect())
    }

    /// `(sign, ln |(B^n x)_k|)`.
    pub fn ln_iterate_coord(&self, n: usize, k: usize) -> Option<(f64, f64)> {
        self.lookup(k + n).map(|(s, l)| (s, self.weight.ln_v(k) + l))
    }

    /// Coordinates `0..len` of `B^n x`.
    pub fn iterate_section(&self, n: usize, len: usize) -> FiniteVector {
        FiniteVector::from_pairs(
            (0..len)
                .filter_map(|k| self.ln_iterate_coord(n, k).map(|(s, l)| (k, s * l.exp())))
                .collect(),
        )
    }

    /// `ln ‖(B^n x) restricted to indices ≥ from‖_m`, over the stored support.
    pub fn ln_iterate_tail(&self, space: &SpaceSpec, n: usize, from: usize, m: u64) -> f64 {
        let p = space.order.p();
        let start = self.entries.partition_point(|e| e.0 < n + from);
        let mut acc = LogSum::default();
        let mut best = f64::NEG_INFINITY;
        for &(i, _, l) in &self.entries[start..] {
            let k = i - n;
            let t = self.weight.ln_v(k) + l + space.matrix.ln_entry(m, k);
            if !t.is_finite() {
                continue;
            }
            match space.order {
                Order::C0 => best = best.max(t),
                Order::Lp(_) => acc.push(p * t),
            }
        }
        match space.order {
            Order::C0 => best,
            Order::Lp(_) => acc.ln() / p,
        }
    }
}

/// `x_{n+j} = (v_{n+j}/v_j) y_j` for `n ∈ A_r`, so that `(B^n x)_j = y_j` exactly.
/// `targets[r-1]` is used for `A_r`; the last target repeats for larger `r`.
pub fn build_fhc_vector(w: &WeightSeq, blocks: &Blocks, targets: &[FiniteVector]) -> Result<LazyVector, OrbitError> {
    if targets.is_empty() {
        return Err(OrbitError::NoTargets);
    }
    let mut map = BTreeMap::new();
    for r in 1..=blocks.r_max {
        let y = &targets[(r - 1).min(targets.len() - 1)];
        if y.support.iter().any(|&j| j > r) {
            return Err(OrbitError::TargetSupport { r });
        }
        for &n in blocks.members(r) {
            for (&j, &yj) in y.support.iter().zip(&y.coords) {
                let entry = (yj.signum(), yj.abs().ln() - w.ln_v(j));
                if map.insert(n + j, entry).is_some() {
                    return Err(OrbitError::OverlappingWrite { index: n + j });
                }
            }
        }
    }
    Ok(LazyVector::from_map(
        format!("block orbit vector, {} targets, r ≤ {}", targets.len(), blocks.r_max),
        w,
        map,
    ))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FhcConditions {
    pub epsilon_constant: f64,
    /// `(r, verdict)` for the convergence of `Σ_{n∈A_r} v_{n+r} e_{n+r}`.
    pub cond_i: Vec<(usize, Verdict)>,
    /// `((r, s), verdict)` for the cross bounds against `min(ε_r, ε_s)`.
    pub cond_ii: Vec<((usize, usize), Verdict)>,
}

impl FhcConditions {
    pub fn outcome(&self) -> Outcome {
        all_of(
            self.cond_i
                .iter()
                .map(|(_, v)| v.outcome)
                .chain(self.cond_ii.iter().map(|(_, v)| v.outcome)),
        )
    }
}

fn sample(members: &[usize], n: usize) -> Vec<usize> {
    if members.len() <= n {
        return members.to_vec();
    }
    let step = members.len() as f64 / n as f64;
    let mut out: Vec<usize> = (0..n).map(|i| members[(i as f64 * step) as usize]).collect();
    out.push(*members.last().expect("nonempty"));
    out.dedup();
    out
}

/// `ln ‖Σ_{n∈A_r, n>m} v_{n-m+j} e_{n-m+j}‖_s`, stopping once the remaining terms are negligible.
fn cross_sum(space: &SpaceSpec, g: &[f64], suffix_max: &[f64], set: &[usize], m: usize, j: usize, p: f64) -> f64 {
    let start = set.partition_point(|&n| n <= m);
    let mut acc = f64::NEG_INFINITY;
    for (idx, &n) in set[start..].iter().enumerate() {
        let i = n - m + j;
        if i >= g.len() {
            break;
        }
        let remaining = (set.len() - start - idx) as f64;
        if acc.is_finite() && p * suffix_max[i] + remaining.ln() < acc - 50.0 {
            break;
        }
        acc = match space.order {
            Order::C0 => acc.max(g[i]),
            Order::Lp(_) => log_add_exp(acc, p * g[i]),
        };
    }
    match space.order {
        Order::C0 => acc,
        Order::Lp(_) => acc / p,
    }
}

/// Conditions (i) and (ii) of the frequent hypercyclicity characterization on the block prefix,
/// with `ε_r = c / 2^r`.
pub fn check_fhc_conditions(
    space: &SpaceSpec,
    w: &WeightSeq,
    blocks: &Blocks,
    r_max: usize,
    epsilon_constant: f64,
    cfg: &SearchConfig,
) -> Result<FhcConditions, OrbitError> {
    if r_max > blocks.r_max {
        return Err(OrbitError::NotEnoughSets {
            r: r_max,
            available: blocks.r_max,
        });
    }
    let h = blocks.horizon.min(cfg.horizon);
    let p = space.order.p();
    let v = w.ln_v_prefix(h + r_max + 1);
    let eps = |r: usize| epsilon_constant / 2f64.powi(r as i32);

    let mut cond_i = Vec::new();
    for r in 1..=r_max {
        let mut verdict = Verdict::new(Outcome::Undetermined, h);
        let mut outcomes = Vec::new();
        for &m in &cfg.probes {
            let a = space.ln_row(m, h + r + 1);
            let terms: Vec<f64> = blocks
                .members(r)
                .iter()
                .map(|&n| n + r)
                .take_while(|&i| i < a.len())
                .map(|i| p * v[i] + a[i])
                .collect();
            let (o, cert) = series_membership(space.order, &terms, cfg);
            verdict.note(format!("m={m}: {o} ({cert})"));
            outcomes.push(o);
        }
        verdict.outcome = all_of(outcomes);
        cond_i.push((r, verdict));
    }

    let mut cond_ii = Vec::new();
    for s in 1..=r_max {
        let a = space.ln_row(s as u64, h + r_max + 1);
        let len = a.len().min(v.len());
        let g: Vec<f64> = (0..len).map(|i| v[i] + a[i]).collect();
        let mut suffix_max = g.clone();
        for i in (0..len.saturating_sub(1)).rev() {
            suffix_max[i] = suffix_max[i].max(suffix_max[i + 1]);
        }
        let ms = sample(blocks.members(s), 256);
        for r in 1..=r_max {
            let bound = eps(r).min(eps(s)).ln();
            let set: Vec<usize> = blocks.members(r).iter().copied().filter(|&n| n <= h).collect();
            let worst = crate::par::map(ms.clone(), |m| {
                (0..=r)
                    .map(|j| (cross_sum(space, &g, &suffix_max, &set, m, j, p), m, j))
                    .fold((f64::NEG_INFINITY, 0, 0), |acc, x| if x.0 > acc.0 { x } else { acc })
            })
            .into_iter()
            .fold((f64::NEG_INFINITY, 0, 0), |acc, x| if x.0 > acc.0 { x } else { acc });
            let mut verdict = Verdict::new(
                if worst.0 < bound {
                    Outcome::Holds
                } else {
                    Outcome::Fails
                },
                h,
            );
            verdict.witnesses.push(
                Witness::new("worst sample")
                    .with("ln_value", worst.0)
                    .with("ln_bound", bound)
                    .with("m", worst.1 as f64)
                    .with("j", worst.2 as f64)
                    .with("samples", ms.len() as f64),
            );
            cond_ii.push(((r, s), verdict));
        }
    }
    Ok(FhcConditions {
        epsilon_constant,
        cond_i,
        cond_ii,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OrbitRow {
    pub n: usize,
    pub hit: bool,
    /// `ln` of the seminorm of the section difference; `-inf` for an exact hit.
    pub ln_seminorm: f64,
    pub cum_density: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HittingReport {
    pub n_max: usize,
    pub delta: f64,
    pub seminorm_index: u64,
    pub section_len: usize,
    pub hits: usize,
    pub density: f64,
    /// Largest `ln` tail seminorm beyond the section, over sampled hits.
    pub ln_tail_max: Option<f64>,
    pub tail_samples: usize,
    #[serde(skip)]
    pub rows: Vec<OrbitRow>,
}

/// Fraction of `n ≤ N` whose iterate section lies within `delta` of `target` in seminorm `m`.
/// The section spans the target support plus `guard` coordinates.
pub fn hitting_density(
    space: &SpaceSpec,
    x: &LazyVector,
    target: &FiniteVector,
    m: u64,
    delta: f64,
    n_max: usize,
    guard: usize,
) -> HittingReport {
    let width = target.support.last().map_or(1, |&j| j + 1);
    let len = width + guard;
    let ln_delta = delta.ln();
    let mut rows = Vec::with_capacity(n_max + 1);
    let mut hits = 0usize;
    let mut hit_ns = Vec::new();
    for n in 0..=n_max {
        let diff = x.iterate_section(n, len).sub(target);
        let ln_norm = seminorm(space, &diff, m).map_or(f64::INFINITY, |s| s.ln());
        let hit = ln_norm < ln_delta;
        if hit {
            hits += 1;
            hit_ns.push(n);
        }
        rows.push(OrbitRow {
            n,
            hit,
            ln_seminorm: ln_norm,
            cum_density: hits as f64 / (n + 1) as f64,
        });
    }
    let sampled: Vec<usize> = if hit_ns.len() <= 128 {
        hit_ns.clone()
    } else {
        hit_ns[..64]
            .iter()
            .chain(&hit_ns[hit_ns.len() - 64..])
            .copied()
            .collect()
    };
    let ln_tail_max = sampled
        .iter()
        .map(|&n| x.ln_iterate_tail(space, n, len, m))
        .fold(None, |acc: Option<f64>, t| Some(acc.map_or(t, |a| a.max(t))));
    HittingReport {
        n_max,
        delta,
        seminorm_index: m,
        section_len: len,
        hits,
        density: hits as f64 / (n_max + 1) as f64,
        ln_tail_max,
        tail_samples: sampled.len(),
        rows,
    }
}

pub const CSV_HEADER: &str = "n,hit,log_seminorm,cum_density";

pub fn write_csv<W: Write>(rows: &[OrbitRow], mut out: W) -> io::Result<()> {
    writeln!(out, "{CSV_HEADER}")?;
    for r in rows {
        writeln!(
            out,
            "{},{},{},{}",
            r.n,
            u8::from(r.hit),
            fmt_ln(r.ln_seminorm),
            r.cum_density
        )?;
    }
    Ok(())
}

fn fmt_ln(x: f64) -> String {
    if x == f64::NEG_INFINITY {
        "-inf".into()
    } else if x == f64::INFINITY {
        "inf".into()
    } else {
        format!("{x:.6}")
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::construct::{block_weight, build_blocks, BMatrix, BlockParams};
    use crate::shifts::apply_power;

    fn entire_setup(h: usize) -> (SpaceSpec, WeightSeq, Blocks) {
        let space = SpaceSpec::builtin("entire").unwrap();
        let blocks = build_blocks(
            3,
            h,
            &BlockParams {
                min_cuts: 5,
                ..BlockParams::default()
            },
        )
        .unwrap();
        let w = block_weight(&space, &BMatrix::product(0.5), &blocks);
        (space, w, blocks)
    }

    #[test]
    fn fhc_vector_hits_targets_exactly() {
        let (_, w, blocks) = entire_setup(10_000);
        let targets = vec![
            FiniteVector::unit(0),
            FiniteVector::from_pairs(vec![(0, 0.5), (2, -1.0)]),
            FiniteVector::from_pairs(vec![(1, 2.0), (3, 0.25)]),
        ];
        let x = build_fhc_vector(&w, &blocks, &targets).unwrap();
        for r in 1..=3 {
            let y = &targets[r - 1];
            for &n in blocks.members(r) {
                let it = x.iterate_section(n, r + 1);
                for j in 0..=r {
                    let (a, b) = (it.get(j), y.get(j));
                    assert!((a - b).abs() <= 1e-9 * b.abs().max(1e-300), "n={n} j={j} {a} {b}");
                }
            }
        }
        assert_eq!(x.coord(1), 0.0);
        assert_eq!(x.coord(blocks.members(1)[5] + 3), 0.0);
    }

    #[test]
    fn iterates_agree_with_apply_power_where_representable() {
        let (_, w, blocks) = entire_setup(10_000);
        let x = build_fhc_vector(&w, &blocks, &[FiniteVector::unit(0)]).unwrap();
        let section = x.section(0, 400);
        let mut checked = 0;
        for &n in blocks.union_members().iter().filter(|&&n| n < 400) {
            if x.ln_coord(n).is_some_and(|(_, l)| l > -700.0) {
                let it = apply_power(&w, &section, n);
                assert!((it.get(0) - 1.0).abs() < 1e-9, "n={n}");
                checked += 1;
            }
        }
        assert!(checked >= 3);
    }

    #[test]
    fn overlapping_targets_are_rejected() {
        let (_, w, blocks) = entire_setup(10_000);
        assert!(matches!(
            build_fhc_vector(&w, &blocks, &[FiniteVector::unit(2)]),
            Err(OrbitError::TargetSupport { r: 1 })
        ));
        assert!(build_fhc_vector(&w, &blocks, &[]).is_err());
    }

    #[test]
    fn fhc_conditions_on_the_entire_construction() {
        let (space, w, blocks) = entire_setup(10_000);
        let c = check_fhc_conditions(
            &space,
            &w,
            &blocks,
            3,
            1.0,
            &SearchConfig::default().with_horizon(10_000),
        )
        .unwrap();
        assert_eq!(c.outcome(), Outcome::Holds, "{c:?}");
        assert!(check_fhc_conditions(&space, &w, &blocks, 4, 1.0, &SearchConfig::default()).is_err());
    }

    #[test]
    fn fhc_condition_i_fails_for_unit_weights() {
        let space = SpaceSpec::builtin("ones").unwrap();
        let blocks = build_blocks(
            3,
            10_000,
            &BlockParams {
                min_cuts: 5,
                ..BlockParams::default()
            },
        )
        .unwrap();
        let w = WeightSeq::constant(1.0).unwrap();
        let c = check_fhc_conditions(
            &space,
            &w,
            &blocks,
            3,
            1.0,
            &SearchConfig::default().with_horizon(10_000),
        )
        .unwrap();
        assert!(c.cond_i.iter().all(|(_, v)| v.fails()));
    }

    #[test]
    fn chaotic_weight_satisfies_condition_i() {
        let space = SpaceSpec::builtin("disk").unwrap();
        let blocks = build_blocks(
            3,
            10_000,
            &BlockParams {
                min_cuts: 5,
                ..BlockParams::default()
            },
        )
        .unwrap();
        let w = WeightSeq::constant(2.0).unwrap();
        let c = check_fhc_conditions(
            &space,
            &w,
            &blocks,
            3,
            1.0,
            &SearchConfig::default().with_horizon(10_000),
        )
        .unwrap();
        assert!(c.cond_i.iter().all(|(_, v)| v.holds()));
    }

    #[test]
    fn hitting_density_examples() {
        let (space, w, blocks) = entire_setup(10_000);
        let x = build_fhc_vector(&w, &blocks, &[FiniteVector::unit(0)]).unwrap();
        let rep = hitting_density(&space, &x, &FiniteVector::unit(0), 1, 0.1, 10_000, 4);
        let union = crate::construct::union_density(&blocks);
        assert!(rep.density >= 0.9 * union, "{} vs {union}", rep.density);
        assert!(rep.ln_tail_max.unwrap() < 0.1f64.ln());

        let ones = SpaceSpec::builtin("ones").unwrap();
        let w1 = WeightSeq::constant(1.0).unwrap();
        let x5 = LazyVector::unit(&w1, 5);
        let r = hitting_density(&ones, &x5, &FiniteVector::unit(0), 1, 0.5, 1000, 4);
        assert_eq!(r.hits, 1);
        assert!(r.rows[5].hit);
        let far = FiniteVector::from_pairs(vec![(0, 10.0)]);
        assert_eq!(hitting_density(&ones, &x5, &far, 1, 0.5, 1000, 4).hits, 0);
    }

    #[test]
    fn hitting_density_is_monotone_in_delta() {
        let ones = SpaceSpec::builtin("ones").unwrap();
        let w = WeightSeq::constant(2.0).unwrap();
        let x = LazyVector::periodic(&w, 3, 600);
        let mut prev = 0;
        for delta in [0.01, 0.1, 0.5, 1.0, 2.0, 10.0] {
            let r = hitting_density(&ones, &x, &FiniteVector::unit(0), 1, delta, 500, 4);
            assert!(r.hits >= prev);
            prev = r.hits;
        }
    }

    #[test]
    fn csv_layout() {
        let rows = vec![
            OrbitRow {
                n: 0,
                hit: true,
                ln_seminorm: f64::NEG_INFINITY,
                cum_density: 1.0,
            },
            OrbitRow {
                n: 1,
                hit: false,
                ln_seminorm: 0.5,
                cum_density: 0.5,
            },
        ];
        let mut buf = Vec::new();
        write_csv(&rows, &mut buf).unwrap();
        let s = String::from_utf8(buf).unwrap();
        assert_eq!(s, "n,hit,log_seminorm,cum_density\n0,1,-inf,1\n1,0,0.500000,0.5\n");
    }
}
