//! Command-line front end: config ingestion, the five commands and report files.

use anyhow::{anyhow, bail, Context, Result};
use clap::{Parser, Subcommand};
use kothe_shifts::classify::{classify, Classification, Symbol};
use kothe_shifts::construct::{
    build_b, build_blocks, build_fhc_nonchaotic_weight, union_density, BFamily, BlockParams, Blocks,
    ConstructionArtifact, FhcConstruction,
};
use kothe_shifts::orbit::{
    build_fhc_vector, check_fhc_conditions, hitting_density, write_csv, FhcConditions, LazyVector,
};
use kothe_shifts::seqdsl;
use kothe_shifts::shifts::{apply_power, v_from_w, w_from_v, WeightSeq};
use kothe_shifts::spaces::{make_power_series, AlphaSeq, KotheMatrix, PowerType, BUILTIN_SPACES};
use kothe_shifts::{FiniteVector, LogReal, Order, SearchConfig, SpaceSpec};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::ffi::OsString;
use std::fs;
use std::path::{Path, PathBuf};

pub const CLASSIFICATION_FILE: &str = "classification.json";
pub const SUMMARY_FILE: &str = "classification.txt";
pub const ARTIFACT_FILE: &str = "artifact.json";
pub const CONSTRUCT_REPORT_FILE: &str = "construct_report.json";
pub const SIMULATION_CSV: &str = "simulation.csv";
pub const SIMULATION_FILE: &str = "simulation.json";
pub const VERIFY_FILE: &str = "verify.json";
pub const REPORT_FILE: &str = "report.txt";
pub const META_FILE: &str = "run_meta.json";

#[derive(Parser, Debug)]
#[command(
    name = "kshift",
    version,
    about = "Weighted backward shifts on Köthe sequence spaces"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    #[arg(long, global = true)]
    pub horizon: Option<usize>,
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    #[arg(long, global = true)]
    pub force: bool,
}

#[derive(Subcommand, Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    /// Classify the configured space.
    Classify,
    /// Build and persist a frequently hypercyclic, non-chaotic weight.
    Construct,
    /// Hitting-density simulation of an orbit.
    Simulate,
    /// Run the invariant suite.
    Verify,
    /// Combine existing result files into one report.
    Report,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum OrderValue {
    Number(f64),
    Name(String),
}

impl OrderValue {
    fn to_order(&self) -> Result<Order> {
        match self {
            OrderValue::Number(p) => Order::from_number(*p).ok_or_else(|| anyhow!("order must be >= 1, got {p}")),
            OrderValue::Name(s) if s.eq_ignore_ascii_case("c0") => Ok(Order::C0),
            OrderValue::Name(s) => s
                .parse::<f64>()
                .ok()
                .and_then(Order::from_number)
                .ok_or_else(|| anyhow!("unknown order '{s}'")),
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SpaceSection {
    pub builtin: Option<String>,
    /// Named sequence or `expr:<dsl>` in `n`.
    pub alpha: Option<String>,
    /// `infinite` or `finite`.
    pub kind: Option<String>,
    /// `expr:<dsl>` in `n` and `m` for `a_{m,n}`.
    pub matrix: Option<String>,
    pub order: Option<OrderValue>,
    pub label: Option<String>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct WeightSection {
    /// `const:<c>`, `geometric:<c>` or `expr:<dsl>` for `w_n`.
    pub spec: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ConstructSection {
    pub family: Option<String>,
    pub epsilon: f64,
    pub r_max: usize,
    pub min_cuts: Option<usize>,
    pub cut_base: Option<u64>,
    pub density_floor: Option<f64>,
}

impl Default for ConstructSection {
    fn default() -> Self {
        ConstructSection {
            family: None,
            epsilon: 0.5,
            r_max: 3,
            min_cuts: None,
            cut_base: None,
            density_floor: None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimulateSection {
    pub artifact: Option<PathBuf>,
    /// `fhc`, `periodic:<q>` or `unit:<n>`.
    pub vector: String,
    /// Target coordinates as `[index, value]` pairs.
    pub target: Vec<(usize, f64)>,
    pub m: u64,
    pub delta: f64,
    pub n_max: Option<usize>,
    pub guard: usize,
}

impl Default for SimulateSection {
    fn default() -> Self {
        SimulateSection {
            artifact: None,
            vector: "fhc".into(),
            target: vec![(0, 1.0)],
            m: 1,
            delta: 0.1,
            n_max: None,
            guard: 4,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct VerifySection {
    pub seed: u64,
    pub samples: usize,
}

impl Default for VerifySection {
    fn default() -> Self {
        VerifySection { seed: 7, samples: 200 }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputSection {
    pub dir: Option<PathBuf>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub space: SpaceSection,
    pub weight: WeightSection,
    pub run: SearchConfig,
    pub construct: ConstructSection,
    pub simulate: SimulateSection,
    pub verify: VerifySection,
    pub output: OutputSection,
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).context("invalid config")
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        Self::from_toml(&text)
    }

    pub fn has_space(&self) -> bool {
        self.space.builtin.is_some() || self.space.alpha.is_some() || self.space.matrix.is_some()
    }

    pub fn space(&self) -> Result<SpaceSpec> {
        let s = &self.space;
        let order = s.order.as_ref().map(OrderValue::to_order).transpose()?;
        let mut spec = if let Some(name) = &s.builtin {
            SpaceSpec::builtin(name)?
        } else if let Some(alpha) = &s.alpha {
            let kind = match s.kind.as_deref().unwrap_or("infinite") {
                "infinite" => PowerType::Infinite,
                "finite" => PowerType::Finite,
                other => bail!("space.kind must be 'infinite' or 'finite', got '{other}'"),
            };
            let label = s
                .label
                .clone()
                .unwrap_or_else(|| format!("{} type, alpha {alpha}", s.kind.as_deref().unwrap_or("infinite")));
            make_power_series(
                &label,
                parse_alpha(alpha, self.run.horizon)?,
                kind,
                order.unwrap_or(Order::Lp(1.0)),
            )
        } else if let Some(matrix) = &s.matrix {
            let expr = seqdsl::parse(strip_expr(matrix)).map_err(|e| anyhow!("space.matrix: {e}"))?;
            let label = s.label.clone().unwrap_or_else(|| format!("matrix {expr}"));
            SpaceSpec::new(label, KotheMatrix::from_expr(expr), order.unwrap_or(Order::Lp(1.0)))
        } else {
            bail!("config has no [space] definition (builtin, alpha or matrix)");
        };
        if let Some(o) = order {
            spec.order = o;
        }
        if let Some(l) = &s.label {
            spec.label = l.clone();
        }
        Ok(spec)
    }

    pub fn weight(&self) -> Result<Option<WeightSeq>> {
        let Some(spec) = &self.weight.spec else { return Ok(None) };
        let w = if let Some(c) = spec.strip_prefix("const:") {
            WeightSeq::constant(c.trim().parse()?)?
        } else if let Some(c) = spec.strip_prefix("geometric:") {
            WeightSeq::geometric(c.trim().parse()?)?
        } else if let Some(e) = spec.strip_prefix("expr:") {
            WeightSeq::from_expr(seqdsl::parse(e).map_err(|e| anyhow!("weight.spec: {e}"))?)
        } else {
            bail!("weight.spec must start with const:, geometric: or expr:");
        };
        Ok(Some(w))
    }

    pub fn block_params(&self) -> BlockParams {
        let mut p = BlockParams::default();
        if let Some(m) = self.construct.min_cuts {
            p.min_cuts = m;
        }
        if let Some(b) = self.construct.cut_base {
            p.cut_base = b;
        }
        if let Some(f) = self.construct.density_floor {
            p.density_floor = f;
        }
        p
    }
}

fn strip_expr(s: &str) -> &str {
    s.strip_prefix("expr:").unwrap_or(s).trim()
}

pub fn parse_alpha(s: &str, validate_to: usize) -> Result<AlphaSeq> {
    Ok(match s.trim() {
        "linear" | "n+1" => AlphaSeq::linear(),
        "exponential" | "2^n" => AlphaSeq::exponential(),
        "factorial" | "(n+1)!" => AlphaSeq::factorial(),
        "logarithmic" | "log(n+2)" => AlphaSeq::logarithmic(),
        "dyadic-factorial" => AlphaSeq::dyadic_factorial(),
        other if other.starts_with("expr:") => {
            let e = seqdsl::parse(strip_expr(other)).map_err(|e| anyhow!("space.alpha: {e}"))?;
            AlphaSeq::from_expr(e, validate_to.min(10_000))?
        }
        other => bail!("unknown alpha '{other}'"),
    })
}

/// Resolved invocation: config plus command-line overrides.
#[derive(Clone, Debug)]
pub struct Invocation {
    pub config: RunConfig,
    pub out: PathBuf,
    pub force: bool,
}

impl Invocation {
    pub fn new(config: RunConfig, out: PathBuf) -> Self {
        Invocation {
            config,
            out,
            force: false,
        }
    }

    fn cfg(&self) -> &SearchConfig {
        &self.config.run
    }

    fn write_json<T: Serialize>(&self, name: &str, value: &T) -> Result<PathBuf> {
        fs::create_dir_all(&self.out).with_context(|| format!("creating {}", self.out.display()))?;
        let path = self.out.join(name);
        let mut text = serde_json::to_string_pretty(value)?;
        text.push('\n');
        fs::write(&path, text).with_context(|| format!("writing {}", path.display()))?;
        Ok(path)
    }

    fn write_text(&self, name: &str, text: &str) -> Result<PathBuf> {
        fs::create_dir_all(&self.out)?;
        let path = self.out.join(name);
        fs::write(&path, text)?;
        Ok(path)
    }

    fn write_meta(&self, command: &str) -> Result<()> {
        let secs = std::time::SystemTime::now()
            .duration_since(std::time::UNIX_EPOCH)
            .map(|d| d.as_secs())
            .unwrap_or(0);
        self.write_json(
            META_FILE,
            &serde_json::json!({ "command": command, "unix_time": secs, "version": env!("CARGO_PKG_VERSION") }),
        )?;
        Ok(())
    }
}

#[derive(Serialize, Deserialize)]
pub struct ClassificationFile {
    pub config: RunConfig,
    pub classification: Classification,
}

/// Outcome of a command: exit code and a message for standard output.
#[derive(Debug)]
pub struct Outcome {
    pub code: i32,
    pub message: String,
}

impl Outcome {
    fn ok(message: String) -> Self {
        Outcome { code: 0, message }
    }
}

pub fn cmd_classify(inv: &Invocation) -> Result<Outcome> {
    let space = inv.config.space()?;
    let c = classify(&space, inv.cfg());
    let summary = c.summary();
    inv.write_json(
        CLASSIFICATION_FILE,
        &ClassificationFile {
            config: inv.config.clone(),
            classification: c.clone(),
        },
    )?;
    inv.write_text(SUMMARY_FILE, &summary)?;
    inv.write_meta("classify")?;
    let code = if c.is_determinate() { 0 } else { 2 };
    Ok(Outcome { code, message: summary })
}

#[derive(Serialize, Deserialize)]
pub struct ConstructReport {
    pub space: String,
    pub class: Symbol,
    pub forced: bool,
    pub advisory: Option<String>,
    pub digest: String,
    pub tail_route: String,
    pub block_report: kothe_shifts::construct::BlockReport,
    pub verdicts: std::collections::BTreeMap<String, String>,
}

/// Builds blocks, comparison matrix and weight for a space.
pub fn construct(
    space: &SpaceSpec,
    config: &RunConfig,
) -> Result<(Blocks, kothe_shifts::construct::BMatrix, FhcConstruction)> {
    let cfg = &config.run;
    let family = match &config.construct.family {
        Some(f) => Some(BFamily::parse(f).ok_or_else(|| anyhow!("unknown construct.family '{f}'"))?),
        None => None,
    };
    let b = build_b(space, family, config.construct.epsilon)?;
    let blocks = build_blocks(config.construct.r_max, cfg.horizon, &config.block_params())?;
    let c = build_fhc_nonchaotic_weight(space, &b, &blocks, cfg)?;
    Ok((blocks, b, c))
}

pub fn cmd_construct(inv: &Invocation) -> Result<Outcome> {
    let space = inv.config.space()?;
    let class = classify(&space, inv.cfg());
    let (blocks, b, c) = construct(&space, &inv.config).map_err(|e| {
        let mut text = e.to_string();
        if text.len() > 400 {
            let cut = (0..=400).rev().find(|&i| text.is_char_boundary(i)).unwrap_or(0);
            text.truncate(cut);
            text.push_str(" …");
        }
        anyhow!(
            "construction refused: {text} (classification {}: {})",
            class.symbol,
            class.headline()
        )
    })?;
    let permitted = matches!(class.symbol, Symbol::NotEqual | Symbol::Unknown);
    let advisory = (!permitted).then(|| format!("classification {} forbids a non-chaotic FHC shift", class.symbol));
    if !permitted && !inv.force {
        bail!(
            "construction refused: {} (use --force to override)",
            advisory.unwrap_or_default()
        );
    }
    let artifact = ConstructionArtifact::new(&space, &b, &blocks, &c, inv.cfg().horizon);
    let report = ConstructReport {
        space: space.label.clone(),
        class: class.symbol,
        forced: !permitted,
        advisory,
        digest: artifact.digest.clone(),
        tail_route: format!("{:?}", c.route),
        block_report: blocks.report.clone(),
        verdicts: artifact
            .verdicts
            .iter()
            .map(|(k, v)| (k.clone(), v.outcome.to_string()))
            .collect(),
    };
    let path = inv.write_json(ARTIFACT_FILE, &artifact)?;
    inv.write_json(CONSTRUCT_REPORT_FILE, &report)?;
    inv.write_meta("construct")?;
    let mut msg = format!(
        "artifact {} (digest {})\nblocks: {} cuts, {} overlaps, {} interior and {} difference violations\n",
        path.display(),
        artifact.digest,
        blocks.cuts.len(),
        blocks.report.overlaps,
        blocks.report.interior_violations,
        blocks.report.difference_violations
    );
    for (k, v) in &report.verdicts {
        msg.push_str(&format!("  {k}: {v}\n"));
    }
    if let Some(a) = &report.advisory {
        msg.push_str(&format!("advisory: {a}\n"));
    }
    Ok(Outcome::ok(msg))
}

#[derive(Serialize, Deserialize)]
pub struct SimulationSummary {
    pub space: String,
    pub vector: String,
    pub n_max: usize,
    pub delta: f64,
    pub seminorm_index: u64,
    pub hits: usize,
    pub hit_density: f64,
    pub blocks_density: Option<f64>,
    pub density_check: Option<String>,
    pub ln_tail_max: Option<f64>,
    pub fhc_conditions: Option<FhcConditions>,
}

pub fn load_artifact(path: &Path) -> Result<ConstructionArtifact> {
    let text = fs::read_to_string(path).with_context(|| format!("artifact {} not found", path.display()))?;
    let a: ConstructionArtifact = serde_json::from_str(&text).context("invalid artifact")?;
    if !a.digest_ok() {
        bail!("artifact {} fails its digest check", path.display());
    }
    Ok(a)
}

pub fn cmd_simulate(inv: &Invocation) -> Result<Outcome> {
    let sim = &inv.config.simulate;
    let space = inv.config.space()?;
    let artifact_path = sim.artifact.clone().unwrap_or_else(|| inv.out.join(ARTIFACT_FILE));
    let needs_artifact = sim.vector == "fhc" || inv.config.weight.spec.is_none();
    let artifact = if needs_artifact || artifact_path.exists() {
        Some(load_artifact(&artifact_path)?)
    } else {
        None
    };
    if let Some(a) = &artifact {
        if a.space != space.label {
            bail!(
                "artifact was built for '{}', config describes '{}'",
                a.space,
                space.label
            );
        }
    }
    let w = match (&artifact, inv.config.weight()?) {
        (Some(a), _) => a.weight(),
        (None, Some(w)) => w,
        (None, None) => bail!("no weight: supply an artifact or [weight] spec"),
    };
    let target = FiniteVector::from_pairs(sim.target.clone());
    let n_max = sim.n_max.unwrap_or(inv.cfg().horizon);
    let x = if sim.vector == "fhc" {
        let a = artifact.as_ref().expect("checked above");
        build_fhc_vector(&w, &a.blocks, std::slice::from_ref(&target))?
    } else if let Some(q) = sim.vector.strip_prefix("periodic:") {
        LazyVector::periodic(&w, q.trim().parse()?, n_max + sim.guard + 64)
    } else if let Some(n) = sim.vector.strip_prefix("unit:") {
        LazyVector::unit(&w, n.trim().parse()?)
    } else {
        bail!("simulate.vector must be fhc, periodic:<q> or unit:<n>");
    };
    let rep = hitting_density(&space, &x, &target, sim.m, sim.delta, n_max, sim.guard);
    let mut csv = Vec::new();
    write_csv(&rep.rows, &mut csv)?;
    inv.write_text(SIMULATION_CSV, std::str::from_utf8(&csv)?)?;

    let blocks_density = artifact.as_ref().map(|a| union_density(&a.blocks));
    let density_check = blocks_density.map(|d| {
        let ok = rep.density >= 0.9 * d;
        format!(
            "hit density ≥ 0.9 × blocks density: {}",
            if ok { "PASS" } else { "FAIL" }
        )
    });
    let fhc_conditions = match &artifact {
        Some(a) => Some(check_fhc_conditions(
            &space,
            &w,
            &a.blocks,
            a.blocks.r_max,
            a.tail_route.epsilon_constant(),
            inv.cfg(),
        )?),
        None => None,
    };
    let summary = SimulationSummary {
        space: space.label.clone(),
        vector: x.description.clone(),
        n_max,
        delta: sim.delta,
        seminorm_index: sim.m,
        hits: rep.hits,
        hit_density: rep.density,
        blocks_density,
        density_check: density_check.clone(),
        ln_tail_max: rep.ln_tail_max,
        fhc_conditions,
    };
    inv.write_json(SIMULATION_FILE, &summary)?;
    inv.write_meta("simulate")?;
    let mut msg = format!(
        "vector: {}\nhits: {} of {} (density {:.6})\n",
        summary.vector,
        rep.hits,
        n_max + 1,
        rep.density
    );
    if let Some(d) = blocks_density {
        msg.push_str(&format!("blocks density: {d:.6}\n"));
    }
    if let Some(c) = density_check {
        msg.push_str(&c);
        msg.push('\n');
    }
    if let Some(fc) = &summary.fhc_conditions {
        msg.push_str(&format!("orbit conditions (i)/(ii): {}\n", fc.outcome()));
    }
    Ok(Outcome::ok(msg))
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    pub pass: bool,
    pub detail: String,
}

fn check(name: impl Into<String>, pass: bool, detail: impl Into<String>) -> Check {
    Check {
        name: name.into(),
        pass,
        detail: detail.into(),
    }
}

fn space_checks(space: &SpaceSpec, cfg: &SearchConfig, out: &mut Vec<Check>) {
    let name = &space.label;
    let h = cfg.horizon.min(10_000);
    let valid = space.matrix.validate(&cfg.probes, h);
    out.push(check(
        format!("{name}: matrix validation"),
        valid.is_ok(),
        valid.err().map(|e| e.to_string()).unwrap_or_default(),
    ));
    let c = classify(space, cfg);
    let v = c.invariant_violations();
    out.push(check(
        format!("{name}: classification invariants"),
        v.is_empty(),
        v.join("; "),
    ));
    let consistent = !(c.symbol == Symbol::NoHypercyclic && c.exists_hc.verdict.holds())
        && !(c.exists_chaotic.verdict.holds() && c.exists_hc.verdict.fails());
    out.push(check(
        format!("{name}: route consistency"),
        consistent,
        format!("class {}", c.symbol),
    ));
}

fn oracle_checks(seed: u64, samples: usize, out: &mut Vec<Check>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst = 0f64;
    for _ in 0..samples {
        let table: Vec<f64> = (0..16).map(|_| rng.gen_range(0.2..5.0)).collect();
        let w = WeightSeq::from_table(&table).expect("positive table");
        let x = FiniteVector::from_pairs((0..10).map(|i| (i, rng.gen_range(-3.0..3.0))).collect());
        let n = rng.gen_range(0..=5usize);
        let got = apply_power(&w, &x, n);
        for k in 0..10usize {
            let prod: f64 = (k + 1..=k + n)
                .map(|i| table[(i.max(1) - 1).min(table.len() - 1)])
                .product();
            let want = prod * x.get(k + n);
            let err = (got.get(k) - want).abs() / want.abs().max(1e-300);
            if want != 0.0 {
                worst = worst.max(err);
            }
        }
    }
    out.push(check(
        "apply_power oracle",
        worst <= 1e-9,
        format!("worst relative error {worst:e}"),
    ));

    let mut worst = 0f64;
    for _ in 0..samples {
        let w: Vec<LogReal> = (0..32)
            .map(|_| LogReal::from_ln(rng.gen_range(-3.0..3.0)).expect("finite"))
            .collect();
        let back = v_from_w(&w).and_then(|v| w_from_v(&v));
        match back {
            Ok(b) => {
                for (a, c) in w.iter().zip(&b) {
                    worst = worst.max((a.ln() - c.ln()).abs());
                }
            }
            Err(_) => worst = f64::INFINITY,
        }
    }
    out.push(check(
        "weight round trip",
        worst <= 1e-12,
        format!("worst log error {worst:e}"),
    ));
}

pub fn cmd_verify(inv: &Invocation) -> Result<Outcome> {
    let cfg = inv.cfg().clone();
    let mut checks = Vec::new();
    if inv.config.has_space() {
        match inv.config.space() {
            Ok(space) => space_checks(&space, &cfg, &mut checks),
            Err(e) => checks.push(check("space definition", false, e.to_string())),
        }
    } else {
        for name in BUILTIN_SPACES {
            space_checks(&SpaceSpec::builtin(name)?, &cfg, &mut checks);
        }
    }
    let blocks = build_blocks(3, 100_000, &inv.config.block_params());
    checks.push(match blocks {
        Ok(b) => check(
            "block verifier",
            b.report.passed(),
            format!(
                "{} overlaps, {} interior, {} difference violations",
                b.report.overlaps, b.report.interior_violations, b.report.difference_violations
            ),
        ),
        Err(e) => check("block verifier", false, e.to_string()),
    });
    oracle_checks(inv.config.verify.seed, inv.config.verify.samples, &mut checks);
    let artifact = inv.out.join(ARTIFACT_FILE);
    if artifact.exists() {
        let r = load_artifact(&artifact);
        checks.push(check(
            "artifact digest",
            r.is_ok(),
            r.err().map(|e| e.to_string()).unwrap_or_default(),
        ));
    }
    let passed = checks.iter().all(|c| c.pass);
    inv.write_json(VERIFY_FILE, &serde_json::json!({ "passed": passed, "checks": checks }))?;
    let mut msg = String::new();
    for c in &checks {
        msg.push_str(&format!(
            "{} {}{}\n",
            if c.pass { "PASS" } else { "FAIL" },
            c.name,
            if c.detail.is_empty() {
                String::new()
            } else {
                format!(" ({})", c.detail)
            }
        ));
    }
    Ok(Outcome {
        code: if passed { 0 } else { 1 },
        message: msg,
    })
}

pub fn cmd_report(inv: &Invocation) -> Result<Outcome> {
    let mut text = String::new();
    let read = |name: &str| fs::read_to_string(inv.out.join(name)).ok();
    if let Some(s) = read(SUMMARY_FILE) {
        text.push_str("== classification ==\n");
        text.push_str(&s);
    }
    if let Some(s) = read(CONSTRUCT_REPORT_FILE) {
        let r: ConstructReport = serde_json::from_str(&s)?;
        text.push_str("== construction ==\n");
        text.push_str(&format!(
            "space: {}\nclass: {}\ndigest: {}\ntail route: {}\n",
            r.space, r.class, r.digest, r.tail_route
        ));
        for (k, v) in &r.verdicts {
            text.push_str(&format!("  {k}: {v}\n"));
        }
    }
    if let Some(s) = read(SIMULATION_FILE) {
        let r: SimulationSummary = serde_json::from_str(&s)?;
        text.push_str("== simulation ==\n");
        text.push_str(&format!(
            "vector: {}\nhits: {} (density {:.6})\n",
            r.vector, r.hits, r.hit_density
        ));
        if let Some(c) = r.density_check {
            text.push_str(&c);
            text.push('\n');
        }
    }
    if let Some(s) = read(VERIFY_FILE) {
        let v: serde_json::Value = serde_json::from_str(&s)?;
        text.push_str(&format!("== verify ==\npassed: {}\n", v["passed"]));
    }
    if text.is_empty() {
        bail!("no result files in {}", inv.out.display());
    }
    inv.write_text(REPORT_FILE, &text)?;
    Ok(Outcome::ok(text))
}

pub fn run_command(cmd: Command, inv: &Invocation) -> Result<Outcome> {
    match cmd {
        Command::Classify => cmd_classify(inv),
        Command::Construct => cmd_construct(inv),
        Command::Simulate => cmd_simulate(inv),
        Command::Verify => cmd_verify(inv),
        Command::Report => cmd_report(inv),
    }
}

/// Parses arguments, runs the command and returns the exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 1 } else { 0 };
        }
    };
    match prepare(&cli).and_then(|inv| run_command(cli.command, &inv)) {
        Ok(o) => {
            print!("{}", o.message);
            o.code
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            1
        }
    }
}

fn prepare(cli: &Cli) -> Result<Invocation> {
    let mut config = match &cli.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    if let Some(h) = cli.horizon {
        config.run.horizon = h;
    }
    if let Some(k) = cli.threads {
        // A second initialization (e.g. in tests) keeps the existing pool.
        let _ = rayon::ThreadPoolBuilder::new().num_threads(k.max(1)).build_global();
    }
    let out = cli
        .out
        .clone()
        .or_else(|| config.output.dir.clone())
        .unwrap_or_else(|| PathBuf::from("out"));
    Ok(Invocation {
        config,
        out,
        force: cli.force,
    })
}
