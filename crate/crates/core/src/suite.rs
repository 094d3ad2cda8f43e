//! Experiment suites: each builds constructions, runs estimators, emits
//! long-format report rows and named pass/fail verdicts.

use std::fmt;
use std::fs::File;
use std::io::BufWriter;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::sync::Arc;
use std::time::Instant;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::basis::{Basis, NormedSpace};
use crate::constructions::{
    build_dem_nonucc, build_main_a, build_thm_a, lorentz_sandwich_check, parse_host, DkkSpace,
    RotationPair, DEFAULT_DIM_CAP,
};
use crate::error::{Error, Result};
use crate::estimators::{
    alpha1, alpha2, dyadic_layers_of, km_exact_hilbert, km_lower, kmphi_transfer_check,
    ktilde_from_witnesses, ktilde_lower, lebesgue_search, phi_lower, quasi_greedy_lower,
    threshold_set, tqg_constant_lower, BoundKind, EstimateReport, SearchOptions, Witness,
    WitnessFamily,
};
use crate::fit::{exponential_rate, linear_fit, loglog_fit, spread};
use crate::io::write_report_csv;
use crate::partition::{average_project, complement_project, projection_norm_bound_check, BlockSystem, OrderedPartition};
use crate::sampling;
use crate::seqspace::{dini_ratio, empirical_ratio, has_lrp, has_urp, lorentz_equiv_check, FundamentalFunction, SeqNorm, Weight};

pub const SCHEMA: &str = "glab-verdicts/1";
/// Largest admissible `|slope|` of a log-log fit for a family claimed to be `≈ 1`.
pub const DRIFT_TOL: f64 = 0.15;
/// Minimal `R²` of a growth-law fit.
pub const FIT_R2: f64 = 0.98;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Suite {
    #[serde(rename = "rotation")]
    Rotation,
    #[serde(rename = "dkk-core")]
    DkkCore,
    #[serde(rename = "dkkw")]
    Dkkw,
    #[serde(rename = "thmA")]
    ThmA,
    #[serde(rename = "mainA")]
    MainA,
    #[serde(rename = "demNonUCC")]
    DemNonUcc,
    #[serde(rename = "lorentz")]
    Lorentz,
    #[serde(rename = "regularity")]
    Regularity,
    #[serde(rename = "phi")]
    Phi,
    #[serde(rename = "calibration")]
    Calibration,
}

impl Suite {
    pub const ALL: [Suite; 10] = [
        Suite::Rotation,
        Suite::DkkCore,
        Suite::Dkkw,
        Suite::ThmA,
        Suite::MainA,
        Suite::DemNonUcc,
        Suite::Lorentz,
        Suite::Regularity,
        Suite::Phi,
        Suite::Calibration,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Suite::Rotation => "rotation",
            Suite::DkkCore => "dkk-core",
            Suite::Dkkw => "dkkw",
            Suite::ThmA => "thmA",
            Suite::MainA => "mainA",
            Suite::DemNonUcc => "demNonUCC",
            Suite::Lorentz => "lorentz",
            Suite::Regularity => "regularity",
            Suite::Phi => "phi",
            Suite::Calibration => "calibration",
        }
    }

    /// Acceptance criterion checked by the suite.
    pub fn criterion(self) -> u8 {
        match self {
            Suite::Rotation => 1,
            Suite::DkkCore => 2,
            Suite::Dkkw => 3,
            Suite::ThmA => 4,
            Suite::MainA => 5,
            Suite::DemNonUcc => 6,
            Suite::Lorentz | Suite::Regularity => 7,
            Suite::Phi => 8,
            Suite::Calibration => 9,
        }
    }

    /// Suite running acceptance criterion `c`.
    pub fn for_criterion(c: u8) -> Option<Suite> {
        Suite::ALL
            .into_iter()
            .filter(|s| *s != Suite::Regularity)
            .find(|s| s.criterion() == c)
    }

    /// Default size knob: the number of levels, read as `log₂ N` for
    /// dkk-core and as the largest pair size for demNonUCC.
    pub fn default_levels(self) -> usize {
        match self {
            Suite::DkkCore => 14,
            Suite::Dkkw | Suite::ThmA => 10,
            Suite::MainA | Suite::Phi => 8,
            Suite::DemNonUcc => 60,
            Suite::Rotation | Suite::Lorentz | Suite::Regularity | Suite::Calibration => 2,
        }
    }

    pub fn default_trials(self) -> usize {
        match self {
            Suite::DkkCore => 10_000,
            Suite::Lorentz => 1000,
            Suite::Calibration => 200,
            _ => 100,
        }
    }
}

impl fmt::Display for Suite {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Suite {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        Suite::ALL
            .into_iter()
            .find(|x| x.name().eq_ignore_ascii_case(s))
            .ok_or_else(|| Error::InvalidParameter(format!("unknown suite {s:?}")))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ExperimentConfig {
    pub suite: Suite,
    pub levels: Option<usize>,
    pub host: String,
    pub seed: u64,
    pub trials: Option<usize>,
    pub out: Option<PathBuf>,
    pub cap: usize,
    /// Bound on `max/min` for families claimed to be of constant order.
    pub spread_limit: f64,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            suite: Suite::Rotation,
            levels: None,
            host: "l2".into(),
            seed: 42,
            trials: None,
            out: None,
            cap: DEFAULT_DIM_CAP,
            spread_limit: 8.0,
        }
    }
}

impl ExperimentConfig {
    pub fn new(suite: Suite) -> Self {
        Self {
            suite,
            ..Self::default()
        }
    }

    pub fn levels(&self) -> usize {
        self.levels.unwrap_or_else(|| self.suite.default_levels())
    }

    pub fn trials(&self) -> usize {
        self.trials.unwrap_or_else(|| self.suite.default_trials())
    }

    pub fn validate(&self) -> Result<()> {
        if self.levels() < 2 {
            return Err(Error::InvalidParameter("levels must be at least 2".into()));
        }
        if self.trials() < 1 {
            return Err(Error::InvalidParameter("trials must be at least 1".into()));
        }
        if !(self.spread_limit >= 1.0) {
            return Err(Error::InvalidParameter("spread limit must be at least 1".into()));
        }
        Ok(())
    }

    fn host(&self, dim: usize) -> Result<SeqNorm> {
        parse_host(&self.host, dim)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Verdict {
    pub criterion: u8,
    pub check: String,
    pub passed: bool,
    pub detail: String,
}

impl fmt::Display for Verdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "[{}] criterion {} {}: {}",
            if self.passed { "PASS" } else { "FAIL" },
            self.criterion,
            self.check,
            self.detail
        )
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunInfo {
    pub config: ExperimentConfig,
    pub version: String,
    pub elapsed_seconds: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SuiteResult {
    pub suite: Suite,
    pub rows: Vec<EstimateReport>,
    pub verdicts: Vec<Verdict>,
    pub info: RunInfo,
}

impl SuiteResult {
    pub fn passed(&self) -> bool {
        self.verdicts.iter().all(|v| v.passed)
    }

    pub fn failures(&self) -> impl Iterator<Item = &Verdict> {
        self.verdicts.iter().filter(|v| !v.passed)
    }
}

struct Sink {
    rows: Vec<EstimateReport>,
    verdicts: Vec<Verdict>,
    seed: u64,
    criterion: u8,
}

impl Sink {
    fn row(&mut self, quantity: &str, scale: f64, value: f64, kind: BoundKind, witness: impl Into<String>) {
        self.rows
            .push(EstimateReport::new(quantity, scale, value, kind, witness, self.seed));
    }

    fn push(&mut self, r: EstimateReport) {
        self.rows.push(r);
    }

    fn check(&mut self, check: &str, passed: bool, detail: String) {
        self.verdicts.push(Verdict {
            criterion: self.criterion,
            check: check.into(),
            passed,
            detail,
        });
    }
}

/// `spread ≤ limit` and, when `xs` is given, `|log-log slope| ≤ DRIFT_TOL`.
fn constant_order(xs: Option<&[f64]>, ys: &[f64], limit: f64) -> (bool, String) {
    let sp = spread(ys);
    let mut ok = sp <= limit;
    let mut detail = format!("spread {sp:.4} (limit {limit})");
    if let Some(xs) = xs {
        match loglog_fit(xs, ys) {
            Ok(fit) => {
                ok &= fit.slope.abs() <= DRIFT_TOL;
                detail.push_str(&format!(", drift slope {:.4} (limit ±{DRIFT_TOL})", fit.slope));
            }
            Err(e) => {
                ok = false;
                detail.push_str(&format!(", drift fit failed: {e}"));
            }
        }
    }
    (ok, detail)
}

pub fn run_suite(cfg: &ExperimentConfig) -> Result<SuiteResult> {
    cfg.validate()?;
    let start = Instant::now();
    let mut sink = Sink {
        rows: Vec::new(),
        verdicts: Vec::new(),
        seed: cfg.seed,
        criterion: cfg.suite.criterion(),
    };
    log::info!("running suite {}", cfg.suite);
    match cfg.suite {
        Suite::Rotation => rotation(&mut sink)?,
        Suite::DkkCore => dkk_core(cfg, &mut sink)?,
        Suite::Dkkw => dkkw(cfg, &mut sink)?,
        Suite::ThmA => thm_a(cfg, &mut sink)?,
        Suite::MainA => main_a(cfg, &mut sink)?,
        Suite::DemNonUcc => dem_nonucc(cfg, &mut sink)?,
        Suite::Lorentz => {
            lorentz(cfg, &mut sink)?;
            regularity(&mut sink)?;
        }
        Suite::Regularity => regularity(&mut sink)?,
        Suite::Phi => phi(cfg, &mut sink)?,
        Suite::Calibration => calibration(cfg, &mut sink)?,
    }
    Ok(SuiteResult {
        suite: cfg.suite,
        rows: sink.rows,
        verdicts: sink.verdicts,
        info: RunInfo {
            config: cfg.clone(),
            version: env!("CARGO_PKG_VERSION").into(),
            elapsed_seconds: start.elapsed().as_secs_f64(),
        },
    })
}

/// Path of the verdict file written next to a report CSV.
pub fn verdict_path(csv_path: &Path) -> PathBuf {
    csv_path.with_extension("verdicts.json")
}

pub fn verdict_json(r: &SuiteResult) -> serde_json::Value {
    serde_json::json!({
        "schema": SCHEMA,
        "suite": r.suite,
        "passed": r.passed(),
        "verdicts": r.verdicts,
        "provenance": r.info,
    })
}

/// Writes the report CSV and the verdict JSON; returns the JSON path.
pub fn emit_report(r: &SuiteResult, csv_path: &Path) -> Result<PathBuf> {
    write_report_csv(BufWriter::new(File::create(csv_path)?), &r.rows)?;
    let json = verdict_path(csv_path);
    serde_json::to_writer_pretty(BufWriter::new(File::create(&json)?), &verdict_json(r))?;
    Ok(json)
}

const ROTATION_TOL: f64 = 1e-10;

fn rotation(sink: &mut Sink) -> Result<()> {
    let radii = [2f64.sqrt(), 1.5, 2.0, 5.0, 50.0];
    let dot = |a: [f64; 2], b: [f64; 2]| a[0] * b[0] + a[1] * b[1];
    let (mut bio, mut unit, mut diff, mut dual, mut sandwich) = (0.0f64, 0.0f64, 0.0f64, 0.0f64, 0.0f64);
    for &r in &radii {
        let h = RotationPair::new(r)?;
        let e = [
            (dot(h.h1_star, h.h1) - 1.0).abs(),
            dot(h.h1_star, h.h2).abs(),
            dot(h.h2_star, h.h1).abs(),
            (dot(h.h2_star, h.h2) - 1.0).abs(),
        ];
        let e_bio = e.into_iter().fold(0.0, f64::max);
        let e_unit = (dot(h.h1, h.h1).sqrt() - 1.0).abs().max((dot(h.h2, h.h2).sqrt() - 1.0).abs());
        let d = [h.h1[0] - h.h2[0], h.h1[1] - h.h2[1]];
        let e_diff = (dot(d, d).sqrt() - 2.0 / r).abs();
        let c = r * r / (2.0 * (r * r - 1.0).sqrt());
        let e_dual = (dot(h.h1_star, h.h1_star).sqrt() - c)
            .abs()
            .max((dot(h.h2_star, h.h2_star).sqrt() - c).abs());
        let mut e_sand = 0.0f64;
        for i in 0..50 {
            for j in 0..50 {
                let (x, y) = (i as f64 / 49.0, j as f64 / 49.0);
                let v = h.combination_norm(x, y);
                e_sand = e_sand.max(x.hypot(y) - v).max(v - (x + y));
            }
        }
        sink.row("rotation-dual-norm", r, c, BoundKind::Exact, "h*");
        sink.row("rotation-h1-h2", r, dot(d, d).sqrt(), BoundKind::Exact, "h1-h2");
        sink.row("rotation-max-error", r, e_bio.max(e_unit).max(e_diff).max(e_dual).max(e_sand.max(0.0)), BoundKind::Exact, "");
        bio = bio.max(e_bio);
        unit = unit.max(e_unit);
        diff = diff.max(e_diff);
        dual = dual.max(e_dual);
        sandwich = sandwich.max(e_sand);
    }
    for (name, err) in [
        ("biorthogonality", bio),
        ("unit norms", unit),
        ("difference norm 2/R", diff),
        ("dual-norm formula", dual),
        ("sandwich on 50x50 grid", sandwich),
    ] {
        sink.check(name, err <= ROTATION_TOL, format!("max error {err:.3e} (tol {ROTATION_TOL:e})"));
    }
    Ok(())
}

/// Block sizes `1, 2, ..., 64, 1, 2, ...` cut to total `n`.
fn cycling_partition(n: usize) -> Result<OrderedPartition> {
    let mut sizes = Vec::new();
    let mut total = 0;
    let mut k = 0;
    while total < n {
        let s = (k % 64 + 1).min(n - total);
        sizes.push(s);
        total += s;
        k += 1;
    }
    OrderedPartition::new(sizes)
}

fn dkk_core(cfg: &ExperimentConfig, sink: &mut Sink) -> Result<()> {
    let levels = cfg.levels();
    if levels > 24 {
        return Err(Error::ResourceLimit(format!("dkk-core at 2^{levels} coordinates")));
    }
    let n = 1usize << levels;
    if n > cfg.cap {
        return Err(Error::ResourceLimit(format!("{n} coordinates exceed cap {}", cfg.cap)));
    }
    let sigma = cycling_partition(n)?;
    let hosts = [
        ("l1", SeqNorm::lp(1.0, n)?),
        ("l2", SeqNorm::l2(n)),
        ("d1(1/n)", SeqNorm::lorentz(1.0, Weight::harmonic(n))?),
    ];

    let mut bio = 0.0f64;
    for (_, s) in &hosts {
        let sys = BlockSystem::for_norm(sigma.clone(), s)?;
        let worst = (0..sigma.num_blocks())
            .into_par_iter()
            .map(|k| {
                let v = sys.v(k).expect("block index in range");
                let c = sys.functionals(&v).expect("dimension matches");
                c.iter()
                    .enumerate()
                    .map(|(j, x)| (x - if j == k { 1.0 } else { 0.0 }).abs())
                    .fold(0.0, f64::max)
            })
            .reduce(|| 0.0, f64::max);
        bio = bio.max(worst);
    }
    sink.row("vv-biorthogonality-error", n as f64, bio, BoundKind::Exact, "");
    sink.check("V/V* biorthogonality", bio <= 1e-12, format!("max error {bio:.3e} (tol 1e-12)"));

    let samples = 1000;
    let (idem, sum) = (0..samples)
        .into_par_iter()
        .map(|k| {
            let mut rng = sampling::stream(cfg.seed, k as u64);
            let f = sampling::gaussian_vector(n, &mut rng);
            let p = average_project(&sigma, &f).expect("dimension matches");
            let pp = average_project(&sigma, &p).expect("dimension matches");
            let q = complement_project(&sigma, &f).expect("dimension matches");
            let e1 = p.iter().zip(&pp).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
            let e2 = p
                .iter()
                .zip(&q)
                .zip(&f)
                .map(|((a, b), x)| (a + b - x).abs())
                .fold(0.0, f64::max);
            (e1, e2)
        })
        .reduce(|| (0.0, 0.0), |a, b| (a.0.max(b.0), a.1.max(b.1)));
    sink.row("p-idempotence-error", n as f64, idem, BoundKind::Exact, "");
    sink.row("p-plus-q-error", n as f64, sum, BoundKind::Exact, "");
    sink.check(
        "P idempotent and P+Q=Id",
        idem <= 1e-12 && sum <= 1e-12,
        format!("{samples} vectors: idempotence {idem:.3e}, P+Q-Id {sum:.3e} (tol 1e-12)"),
    );

    let mut worst_p = 0.0f64;
    let mut detail = Vec::new();
    for (name, s) in &hosts {
        let b = projection_norm_bound_check(&sigma, s, cfg.trials(), cfg.seed)?;
        sink.row(&format!("p-norm[{name}]"), n as f64, b.p_ratio, BoundKind::Lower, format!("{} samples", b.samples));
        sink.row(&format!("q-norm[{name}]"), n as f64, b.q_ratio, BoundKind::Lower, format!("{} samples", b.samples));
        worst_p = worst_p.max(b.p_ratio);
        detail.push(format!("{name} {:.6}", b.p_ratio));
    }
    sink.check(
        "||P f||/||f|| <= 2",
        worst_p <= 2.0 + 1e-10,
        format!("{} ({} random samples per norm)", detail.join(", "), cfg.trials()),
    );

    let blocks = sigma.num_blocks();
    let mut worst_round = 0.0f64;
    let mut worst_sum = 0.0f64;
    let mut worst_factor = 0.0f64;
    for (name, s) in &hosts[..2] {
        let base = Basis::unit(Arc::new(NormedSpace::Seq(SeqNorm::l2(blocks))));
        let y = DkkSpace::new(base, s.clone(), sigma.clone())?;
        let (round, sum_err, factor) = (0..samples)
            .into_par_iter()
            .map(|k| {
                let mut rng = sampling::stream(cfg.seed ^ 0x5eed, k as u64);
                let f = sampling::probe_vector(n, k, &mut rng);
                let (g, x) = y.split(&f).expect("dimension matches");
                let back = y.compose(&g, &x).expect("dimension matches");
                let scale = f.iter().fold(0.0f64, |m, v| m.max(v.abs())).max(1e-300);
                let round = back.iter().zip(&f).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max) / scale;
                let (a, b) = y.norm_parts(&f);
                let total = y.norm(&f);
                let sum_err = (total - (a + b)).abs() / total.max(1e-300);
                let mx = a.max(b);
                let factor = if mx > 0.0 { total / mx } else { 1.0 };
                (round, sum_err, factor)
            })
            .reduce(|| (0.0, 0.0, 0.0), |p, q| (p.0.max(q.0), p.1.max(q.1), p.2.max(q.2)));
        sink.row(&format!("dkk-sum-over-max[{name}]"), n as f64, factor, BoundKind::Lower, "");
        worst_round = worst_round.max(round);
        worst_sum = worst_sum.max(sum_err);
        worst_factor = worst_factor.max(factor);
    }
    sink.check(
        "S, T inverse and max-vs-sum factor <= 2",
        worst_round <= 1e-12 && worst_sum <= 1e-12 && worst_factor <= 2.0 + 1e-12,
        format!(
            "T(S f) - f {worst_round:.3e}, sum identity {worst_sum:.3e}, largest sum/max {worst_factor:.6}"
        ),
    );
    Ok(())
}

fn dkkw(cfg: &ExperimentConfig, sink: &mut Sink) -> Result<()> {
    let levels = cfg.levels();
    let dim = crate::constructions::dyadic_pairs(levels)?.dim();
    let host = cfg.host(dim)?;
    let thm = build_thm_a(&host, None, levels, cfg.cap)?;
    let dkk = &thm.dkk;
    let grid = [-2.0, -1.0, -0.5, 0.0, 0.5, 1.0, 2.0];
    let mut worst = 0.0f64;
    for n in 0..dkk.pairs() {
        for &a in &grid {
            for &b in &grid {
                let lhs = dkk.r(n, a, b);
                let rhs = dkk.r_from_pair(n, a, b);
                worst = worst.max((lhs - rhs).abs() / lhs.abs().max(1.0));
            }
        }
    }
    sink.row("dkkw-identity-error", levels as f64, worst, BoundKind::Exact, "");
    sink.check(
        "R_n(a,b) = Λ_{s_n}||a y_{2n-1} + b y_{2n}||",
        worst <= 1e-10,
        format!("max relative error {worst:.3e} over {} pairs (tol 1e-10)", dkk.pairs()),
    );

    let mut ns = Vec::new();
    let mut r11 = Vec::new();
    let mut rm11 = Vec::new();
    for n in 0..dkk.pairs() {
        let s = dkk.pair_sizes[n] as f64;
        let scale = (n + 1) as f64;
        let v11 = dkk.r(n, 1.0, 1.0);
        let vm11 = dkk.r(n, -1.0, 1.0);
        sink.row("R(1,0)", scale, dkk.r(n, 1.0, 0.0), BoundKind::Exact, format!("pair-{}", n + 1));
        sink.row("R(0,1)", scale, dkk.r(n, 0.0, 1.0), BoundKind::Exact, format!("pair-{}", n + 1));
        sink.row("R(1,1)", scale, v11, BoundKind::Exact, format!("pair-{}", n + 1));
        sink.row("R(-1,1)", scale, vm11, BoundKind::Exact, format!("pair-{}", n + 1));
        if n >= 1 {
            ns.push(scale);
            r11.push(v11 / (2.0 * s));
            rm11.push(vm11);
        }
    }
    let (ok1, d1) = constant_order(Some(&ns), &r11, cfg.spread_limit);
    sink.check("R_n(1,1)/(2 s_n) of constant order", ok1, d1);
    let (ok2, d2) = constant_order(Some(&ns), &rm11, cfg.spread_limit);
    sink.check("R_n(-1,1) of constant order", ok2, d2);
    Ok(())
}

fn thm_a(cfg: &ExperimentConfig, sink: &mut Sink) -> Result<()> {
    let top = cfg.levels();
    if top < 4 {
        return Err(Error::InvalidParameter("thmA suite fits levels 3..=L and needs L ≥ 4".into()));
    }
    let dim = crate::constructions::dyadic_pairs(top)?.dim();
    let host = cfg.host(dim)?;
    let mut ms = Vec::new();
    let mut ks = Vec::new();
    for levels in 3..=top {
        let thm = build_thm_a(&host, None, levels, cfg.cap)?;
        let m = thm.dkk.m(levels);
        let kt = ktilde_from_witnesses(thm.basis(), m, &thm.witnesses)?;
        let km = km_lower(thm.basis(), thm.dkk.pair_sizes[levels - 1], &thm.witnesses, &SearchOptions::new(0, cfg.seed))?;
        sink.row("ktilde", m as f64, kt.value, BoundKind::Lower, kt.witness.clone());
        sink.row("km", km.scale, km.value, BoundKind::Lower, km.witness);
        sink.row("km-upper-order", m as f64, m as f64, BoundKind::Upper, "k_m <= C m");
        ms.push(m as f64);
        ks.push(kt.value);
        if levels == top {
            let search = ktilde_lower(thm.basis(), m, &thm.witnesses, &SearchOptions::new(cfg.trials(), cfg.seed))?;
            sink.row("ktilde-search", m as f64, search.value, BoundKind::Lower, search.witness);
        }
    }
    let fit = loglog_fit(&ms, &ks)?;
    sink.row("ktilde-loglog-slope", top as f64, fit.slope, BoundKind::Exact, format!("r2={:.6}", fit.r2));
    sink.check(
        "ktilde at M_n grows linearly",
        (fit.slope - 1.0).abs() <= DRIFT_TOL && fit.r2 >= FIT_R2,
        format!("log-log slope {:.4} (1 ± {DRIFT_TOL}), R² {:.5} (≥ {FIT_R2}), levels 3..{top}", fit.slope, fit.r2),
    );
    Ok(())
}

fn main_a(cfg: &ExperimentConfig, sink: &mut Sink) -> Result<()> {
    let levels = cfg.levels();
    let host = cfg.host(crate::constructions::dyadic_pairs(levels)?.dim())?;
    let a = build_main_a(&host, levels, cfg.cap)?;
    let b = &a.basis;
    let witnesses = a.qg_witnesses();
    let mut ns = Vec::new();
    let mut g_ratio = Vec::new();
    let mut mfg = Vec::new();
    let mut qg = Vec::new();
    let mut kt_log = Vec::new();
    for (w, wit) in a.witnesses.iter().zip(witnesses.iter()) {
        let n = w.level as f64;
        let ng = b.cnorm(&w.g);
        let nf = b.cnorm(&w.f);
        let nd = b.cnorm(&wit.coeffs);
        let label = wit.label.clone();
        let single = WitnessFamily::new(vec![wit.clone()]);
        let q = quasi_greedy_lower(b, &single)?;
        if !q.rejected.is_empty() {
            return Err(Error::InvalidParameter(format!("{label}: f-half is not a greedy set")));
        }
        let g_half = b.restricted_cnorm(&wit.coeffs, &w.g_support) / nd;
        let qg_value = q.report.value.max(g_half);
        let m = a.cardinality(&(0..w.g_support.iter().max().map_or(0, |x| x + 1)).collect::<Vec<_>>());
        let log_m = (1.0 + m).log2();
        sink.row("norm-f", n, nf, BoundKind::Exact, label.clone());
        sink.row("norm-g", n, ng, BoundKind::Exact, label.clone());
        sink.row("norm-g-over-2^n", n, ng / n.exp2(), BoundKind::Exact, label.clone());
        sink.row("norm-(-f+g)", n, nd, BoundKind::Exact, label.clone());
        sink.row("qg", n, qg_value, BoundKind::Lower, q.report.witness.clone());
        sink.row("qg-f-half", n, q.report.value, BoundKind::Exact, label.clone());
        sink.row("qg-g-half-not-greedy", n, g_half, BoundKind::Exact, label.clone());
        sink.row("ktilde", log_m, qg_value, BoundKind::Lower, format!("{label}: m=2^{:.3}", m.log2()));
        ns.push(n);
        g_ratio.push(ng / n.exp2());
        mfg.push(nd);
        qg.push(qg_value);
        kt_log.push(qg_value / log_m);
    }

    let (ok, d) = constant_order(Some(&ns), &g_ratio, cfg.spread_limit);
    sink.check("(a) ||g_n||/2^n of constant order", ok, d);
    let (ok, d) = constant_order(Some(&ns), &mfg, cfg.spread_limit);
    sink.check("(b) ||-f_n+g_n|| of constant order", ok, d);
    let (rate, fit) = exponential_rate(&ns, &qg)?;
    let c = qg.iter().zip(&ns).map(|(q, n)| q / n.exp2()).fold(f64::INFINITY, f64::min);
    sink.row("qg-rate", levels as f64, rate, BoundKind::Exact, format!("r2={:.6}", fit.r2));
    sink.check(
        "(c) quasi-greedy bound grows like 2^n",
        (rate - 2.0).abs() <= 0.2 && c > 0.0,
        format!("rate {rate:.4} per level (2 ± 0.2), c = min qg/2^n = {c:.4}"),
    );
    let (ok, d) = constant_order(None, &kt_log, cfg.spread_limit);
    sink.check("ktilde/log m of constant order", ok, d);

    let blocks = a.outer.partition().num_blocks();
    let mut fund = Vec::new();
    let mut single_m = Vec::new();
    let mut single_r = Vec::new();
    let step = (blocks / 256).max(1);
    for k in (0..blocks).step_by(step).chain(std::iter::once(blocks - 1)) {
        let r = a.block(k);
        let mut sets = vec![(r.clone().collect::<Vec<_>>(), "block"), ((0..r.end).collect(), "prefix")];
        if a.compressed {
            sets.push((vec![r.start], "cell"));
        }
        for (set, kind) in sets {
            let m = a.cardinality(&set);
            let mut c = vec![0.0; b.dim()];
            for &i in &set {
                c[i] = 1.0;
            }
            let ratio = b.cnorm(&c) / m.sqrt();
            fund.push(ratio);
            if kind == "block" {
                single_m.push(m);
                single_r.push(ratio);
                sink.row("indicator-over-sqrt-m", m.log2(), ratio, BoundKind::Exact, format!("{kind}-{}", k + 1));
            }
        }
    }
    let sp = spread(&fund);
    let (ok_single, d_single) = constant_order(Some(&single_m), &single_r, cfg.spread_limit);
    sink.check(
        "(d) fundamental function of constant order over sqrt(m)",
        sp <= cfg.spread_limit && ok_single,
        format!("{} structured sets: spread {sp:.4}; single blocks: {d_single}", fund.len()),
    );

    let tqg = tqg_constant_lower(b, &witnesses, cfg.trials(), cfg.seed)?;
    sink.push(tqg);
    Ok(())
}

fn dem_nonucc(cfg: &ExperimentConfig, sink: &mut Sink) -> Result<()> {
    let max_pair = cfg.levels();
    let dim = (2..=max_pair).map(|n| 2 * n).sum::<usize>();
    let host = cfg.host(dim)?;
    let d = build_dem_nonucc(&host, max_pair, cfg.cap)?;
    let b = d.basis();
    let n = b.dim();

    let mut sizes = Vec::new();
    let mut alt = Vec::new();
    let mut growth = Vec::new();
    for (k, (m, v)) in d.alternating_witnesses().into_iter().enumerate() {
        let na = b.cnorm(&v);
        let np = b.cnorm(&d.dkk.pair_vector(k, 1.0, 1.0));
        sink.row("alternating-norm", m as f64, na, BoundKind::Exact, format!("pair-{}", k + d.first));
        sink.row("phils", m as f64, na, BoundKind::Upper, format!("pair-{}", k + d.first));
        sink.row("positive-pair-norm", m as f64, np, BoundKind::Exact, format!("pair-{}", k + d.first));
        sizes.push(m as f64);
        alt.push(na);
        growth.push(np / na);
    }
    let (ok, detail) = constant_order(Some(&sizes), &alt, cfg.spread_limit);
    sink.check("alternating-sign witnesses of constant norm", ok, detail);

    let mut ratios = Vec::new();
    let mut ms = Vec::new();
    let mut by_m = Vec::new();
    let mut m = 1;
    while m <= n {
        ms.push(m);
        m *= 2;
    }
    if ms.last() != Some(&n) {
        ms.push(n);
    }
    let sigma = d.dkk.space.partition().clone();
    for (t, &m) in ms.iter().enumerate() {
        let mut sets: Vec<Vec<usize>> = vec![(0..m).collect(), (n - m..n).collect()];
        let mut rng = sampling::stream(cfg.seed, t as u64);
        let start = sigma.blocks().position(|r| r.len() >= m);
        if let Some(k) = start {
            sets.push(sigma.block(k).take(m).collect());
        }
        let mut union = Vec::new();
        for r in sigma.blocks().collect::<Vec<_>>().into_iter().rev() {
            if union.len() + r.len() > m {
                break;
            }
            union.extend(r);
        }
        if !union.is_empty() {
            let extra = m - union.len();
            let lo = union.iter().min().copied().unwrap_or(n);
            union.extend(lo.saturating_sub(extra)..lo);
            if union.len() == m {
                union.sort_unstable();
                sets.push(union);
            }
        }
        for _ in 0..cfg.trials().min(32) {
            sets.push(sampling::random_subset(n, m, &mut rng));
        }
        let vals: Vec<f64> = sets
            .par_iter()
            .map(|s| {
                let mut c = vec![0.0; n];
                for &i in s {
                    c[i] = 1.0;
                }
                b.cnorm(&c) / (m as f64).sqrt()
            })
            .collect();
        let hi = vals.iter().cloned().fold(0.0, f64::max);
        let lo = vals.iter().cloned().fold(f64::INFINITY, f64::min);
        sink.row("phiu-over-sqrt-m", m as f64, hi, BoundKind::Lower, format!("{} sets", vals.len()));
        sink.row("phil-over-sqrt-m", m as f64, lo, BoundKind::Upper, format!("{} sets", vals.len()));
        by_m.push((m as f64, hi, lo));
        ratios.extend(vals);
    }
    let sp = spread(&ratios);
    let xs: Vec<f64> = by_m.iter().map(|t| t.0).collect();
    let his: Vec<f64> = by_m.iter().map(|t| t.1).collect();
    let los: Vec<f64> = by_m.iter().map(|t| t.2).collect();
    let (ok_hi, d_hi) = constant_order(Some(&xs), &his, cfg.spread_limit);
    let (ok_lo, d_lo) = constant_order(Some(&xs), &los, cfg.spread_limit);
    sink.check(
        "positive indicators of size m have norm of order sqrt(m)",
        sp <= cfg.spread_limit && ok_hi && ok_lo,
        format!("all sets: spread {sp:.4}; max per m: {d_hi}; min per m: {d_lo}"),
    );

    let fit = loglog_fit(&sizes, &growth)?;
    sink.row("superdemocracy-gap-slope", max_pair as f64, fit.slope, BoundKind::Exact, format!("r2={:.6}", fit.r2));
    sink.check(
        "positive over alternating pair norm grows like sqrt(m)",
        (fit.slope - 0.5).abs() <= DRIFT_TOL && fit.r2 >= FIT_R2,
        format!("log-log slope {:.4} (0.5 ± {DRIFT_TOL}), R² {:.5}", fit.slope, fit.r2),
    );
    Ok(())
}

fn lorentz(cfg: &ExperimentConfig, sink: &mut Sink) -> Result<()> {
    let trials = cfg.trials();
    let mut dims = Vec::new();
    let mut consts = Vec::new();
    for k in [8, 10, 12] {
        let n = 1usize << k;
        let w = Weight::new((1..=n).map(|j| (j as f64).powf(-0.5)).collect())?;
        let d1 = SeqNorm::lorentz(1.0, w.clone())?;
        let d2 = SeqNorm::lorentz(2.0, w)?;
        let c = empirical_ratio(&d2, &d1, trials, cfg.seed)?;
        sink.row("embedding-d1-to-d2", n as f64, c, BoundKind::Lower, "w_n=n^-1/2");
        dims.push(n as f64);
        consts.push(c);
    }
    let (ok, d) = constant_order(Some(&dims), &consts, cfg.spread_limit);
    sink.check("embedding constant d_1(w) -> d_2(w) stable over dimension", ok, format!("constants {consts:.4?}; {d}"));

    let n = 256;
    let w = Weight::ones(n);
    let w2 = Weight::new((0..n).map(|j| if j % 2 == 0 { 2.0 } else { 0.0 }).collect())?;
    let r = lorentz_equiv_check(&w, &w2, 1.0, trials, cfg.seed)?;
    sink.row("lorentz-equivalence", n as f64, r, BoundKind::Lower, "w=1, w'=(2,0,2,0,...)");
    sink.check("equal-primitive Lorentz pair within 2.01", r <= 2.01, format!("ratio {r:.6}"));
    let rh = lorentz_equiv_check(&w, &Weight::harmonic(n), 1.0, trials.min(100), cfg.seed)?;
    sink.row("lorentz-equivalence", n as f64, rh, BoundKind::Lower, "w=1, w'=1/n");

    for levels in [4, 6, 8] {
        let sigma = OrderedPartition::new((1..=levels).map(|k| 1usize << k).collect())?;
        let host = SeqNorm::l2(sigma.dim());
        let base = Basis::unit(Arc::new(NormedSpace::Seq(SeqNorm::l2(levels))));
        let y = DkkSpace::new(base, host, sigma)?;
        let (c, c2) = lorentz_sandwich_check(&y, trials.min(200), cfg.seed)?;
        sink.row("sandwich-weak-lorentz", y.dim() as f64, c, BoundKind::Lower, "");
        sink.row("sandwich-lorentz-1", y.dim() as f64, c2, BoundKind::Lower, "");
    }
    Ok(())
}

/// Expected `(LRP b, URP b)` on `N = 10^4`, `None` for failure.
const REGULARITY_TABLE: [(&str, Option<usize>, Option<usize>); 3] =
    [("sqrt(m)", Some(4), Some(4)), ("m", Some(2), None), ("1+log m", None, Some(6))];

fn regularity_functions(n: usize) -> Result<Vec<FundamentalFunction>> {
    Ok(vec![
        FundamentalFunction::from_fn(n, |m| (m as f64).sqrt())?,
        FundamentalFunction::from_fn(n, |m| m as f64)?,
        FundamentalFunction::from_fn(n, |m| 1.0 + (m as f64).ln())?,
    ])
}

fn regularity(sink: &mut Sink) -> Result<()> {
    let n = 10_000;
    let mut all_match = true;
    let mut detail = Vec::new();
    for ((name, lrp_b, urp_b), lambda) in REGULARITY_TABLE.iter().zip(regularity_functions(n)?) {
        let lrp = has_lrp(&lambda)?;
        let urp = has_urp(&lambda)?;
        let enc = |v: &crate::seqspace::RegularityVerdict| v.witness_b.map_or(0.0, |b| b as f64);
        sink.row(&format!("lrp-b[{name}]"), n as f64, enc(&lrp), BoundKind::Exact, if lrp.holds { "holds" } else { "fails" });
        sink.row(&format!("urp-b[{name}]"), n as f64, enc(&urp), BoundKind::Exact, if urp.holds { "holds" } else { "fails" });
        let matched = lrp.witness_b == *lrp_b && urp.witness_b == *urp_b;
        all_match &= matched;
        detail.push(format!("{name}: LRP {:?} URP {:?}", lrp.witness_b, urp.witness_b));
        let dini = dini_ratio(&lambda);
        let max = dini.iter().cloned().fold(0.0, f64::max);
        for m in [10usize, 100, 1000, 10_000] {
            sink.row(&format!("dini[{name}]"), m as f64, dini[m - 1], BoundKind::Exact, "");
        }
        if let Some(b) = lrp.witness_b {
            all_match &= max <= 2.0 * b as f64;
        }
    }
    sink.check("LRP/URP verdicts match table", all_match, detail.join("; "));
    let sqrt = FundamentalFunction::from_fn(n, |m| (m as f64).sqrt())?;
    let max = dini_ratio(&sqrt).into_iter().fold(0.0, f64::max);
    sink.check("Dini ratio for sqrt(m) <= 2.01", max <= 2.01, format!("max over m <= {n}: {max:.6}"));
    Ok(())
}

fn phi(cfg: &ExperimentConfig, sink: &mut Sink) -> Result<()> {
    let levels = cfg.levels();
    let host = cfg.host(crate::constructions::dyadic_pairs(levels)?.dim())?;
    let a = build_main_a(&host, levels, cfg.cap)?;
    let witnesses = a.qg_witnesses();
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    let mut prev = f64::INFINITY;
    let mut monotone = true;
    for n in 2..=levels {
        let lam = host.closed_form_lambda((1u64 << n) as f64).unwrap_or_else(|| {
            host.with_dim(1 << n).map(|h| h.fundamental_function().get(1 << n)).unwrap_or(f64::NAN)
        });
        let av = 1.0 / lam;
        let r = phi_lower(&a.basis, av, &witnesses, cfg.trials(), cfg.seed)?;
        monotone &= r.value >= prev - 1e-12 || prev.is_infinite();
        prev = r.value;
        xs.push(1.0 - av.ln());
        ys.push(r.value);
        sink.push(r);
    }
    let fit = linear_fit(&xs, &ys)?;
    let c1 = ys.iter().zip(&xs).map(|(y, x)| y / x).fold(f64::INFINITY, f64::min);
    sink.row("phi-fit-slope", levels as f64, fit.slope, BoundKind::Exact, format!("r2={:.6}", fit.r2));
    sink.row("phi-c1", levels as f64, c1, BoundKind::Lower, "min phi(a)/(1-log a)");
    sink.check(
        "phi(a) grows like 1 - log a",
        fit.slope > 0.0 && c1 > 0.0 && fit.r2 >= 0.95 && monotone,
        format!("slope {:.4}, R² {:.5} (≥ 0.95), c1 {c1:.4}, non-increasing in a: {monotone}", fit.slope, fit.r2),
    );

    let dim = 64;
    let bad = (0..1000)
        .into_par_iter()
        .filter(|&t| {
            let mut rng = sampling::stream(cfg.seed, t as u64);
            let f: Vec<f64> = (0..dim)
                .map(|_| {
                    let x: f64 = rng.random_range(-1.0..=1.0);
                    if rng.random_bool(0.1) {
                        x.signum()
                    } else {
                        x * x * x
                    }
                })
                .collect();
            let a: f64 = 2f64.powf(-rng.random_range(0.0..12.0));
            !layers_ok(&f, a)
        })
        .count();
    sink.row("dyadic-layer-failures", 1000.0, bad as f64, BoundKind::Exact, "");
    sink.check("dyadic layers partition A(f,a)", bad == 0, format!("{bad} failures over 1000 random f"));

    let mut flags = 0;
    let mut rows = 0;
    for (k, b) in calibration_bases(8, 10, cfg.seed)?.iter().enumerate() {
        let curve: Vec<f64> = (1..=b.dim())
            .map(|m| km_exact_hilbert(b, m, None).map(|r| r.value))
            .collect::<Result<_>>()?;
        let a1 = alpha1(b);
        let a2 = alpha2(b, 0, cfg.seed)?;
        let grid = [1.0, 0.5, 0.25, 0.125, 1.0 / 16.0];
        let table = kmphi_transfer_check(b, 1.0, a1, a2, &curve, &grid, &WitnessFamily::empty(), cfg.trials(), cfg.seed)?;
        for r in table {
            sink.row("kmphi-lhs", r.a, r.lhs, BoundKind::Lower, format!("basis-{k}"));
            sink.row("kmphi-rhs", r.a, r.rhs, BoundKind::Exact, format!("basis-{k}"));
            flags += r.flagged as usize;
            rows += 1;
        }
    }
    sink.check(
        "kmphi transfer raises no flags on calibration bases",
        flags == 0,
        format!("{flags} flags over {rows} rows (sampled bounds: consistency check, not a proof)"),
    );
    Ok(())
}

fn layers_ok(f: &[f64], a: f64) -> bool {
    let Ok(layers) = dyadic_layers_of(f, a, None) else {
        return false;
    };
    if (layers.len() as f64) > 2.0 - a.log2() + 1e-12 {
        return false;
    }
    let n = layers.len() - 1;
    let mut all: Vec<usize> = layers.iter().flatten().copied().collect();
    all.sort_unstable();
    if all.windows(2).any(|p| p[0] == p[1]) || all != threshold_set(f, a) {
        return false;
    }
    layers.iter().enumerate().all(|(k, l)| {
        l.iter().all(|&i| {
            let x = f[i].abs();
            (k == n || x >= 2f64.powi(-(k as i32))) && (k == 0 || x < 2f64.powi(1 - k as i32))
        })
    })
}

/// The unit vector system of `ℓ_2(n)` followed by `count` seeded Gaussian bases.
fn calibration_bases(n: usize, count: usize, seed: u64) -> Result<Vec<Basis>> {
    let space = Arc::new(NormedSpace::Seq(SeqNorm::l2(n)));
    let mut out = vec![Basis::unit(space.clone())];
    for k in 0..count {
        let mut rng = sampling::stream(seed, 10_000 + k as u64);
        let g = sampling::gaussian_vector(n * n, &mut rng);
        out.push(Basis::from_synth(space.clone(), nalgebra::DMatrix::from_column_slice(n, n, &g))?);
    }
    Ok(out)
}

/// `max ‖S_A f‖/‖f‖` over unit `f ∈ R³` by a spherical grid refined around
/// the best point.
pub fn grid_projection_norm(b: &Basis, set: &[usize]) -> f64 {
    let eval = |theta: f64, phi: f64| {
        let f = [theta.sin() * phi.cos(), theta.sin() * phi.sin(), theta.cos()];
        let nf = b.space().norm(&f);
        let c = b.anal(&f);
        let mut r = vec![0.0; 3];
        for &i in set {
            r[i] = c[i];
        }
        b.space().norm(&b.synth(&r)) / nf
    };
    let (mut t0, mut p0, mut best) = (0.0, 0.0, 0.0);
    let (nt, np) = (180, 360);
    for i in 0..=nt {
        for j in 0..np {
            let (t, p) = (std::f64::consts::PI * i as f64 / nt as f64, 2.0 * std::f64::consts::PI * j as f64 / np as f64);
            let v = eval(t, p);
            if v > best {
                (t0, p0, best) = (t, p, v);
            }
        }
    }
    let mut h = std::f64::consts::PI / nt as f64;
    for _ in 0..40 {
        let (mut bt, mut bp) = (t0, p0);
        for i in -10..=10 {
            for j in -10..=10 {
                let (t, p) = (t0 + h * i as f64 / 5.0, p0 + h * j as f64 / 5.0);
                let v = eval(t, p);
                if v > best {
                    (bt, bp, best) = (t, p, v);
                }
            }
        }
        (t0, p0) = (bt, bp);
        h *= 0.5;
    }
    best
}

fn calibration(cfg: &ExperimentConfig, sink: &mut Sink) -> Result<()> {
    let mut worst = 0.0f64;
    for k in 0..5u64 {
        let b = &calibration_bases(3, 1, cfg.seed.wrapping_add(k))?[1];
        for m in 1..=3 {
            let exact = km_exact_hilbert(b, m, None)?.value;
            let mut brute = 0.0f64;
            for mask in 1u32..8 {
                let set: Vec<usize> = (0..3).filter(|i| mask >> i & 1 == 1).collect();
                if set.len() <= m {
                    brute = brute.max(grid_projection_norm(b, &set));
                }
            }
            worst = worst.max((exact - brute).abs() / exact);
            sink.row("km-3d-exact", m as f64, exact, BoundKind::Exact, format!("basis-{k}"));
            sink.row("km-3d-grid", m as f64, brute, BoundKind::Lower, format!("basis-{k}"));
        }
    }
    sink.check("km exact vs grid brute force in 3 dimensions", worst <= 1e-6, format!("max relative gap {worst:.3e} (tol 1e-6)"));

    let bases = calibration_bases(8, 10, cfg.seed)?;
    let opts = SearchOptions::new(cfg.trials(), cfg.seed);
    let mut violations = 0;
    let mut kt_violations = 0;
    for (k, b) in bases[1..].iter().enumerate() {
        for m in [1, 2, 4, 8] {
            let exact = km_exact_hilbert(b, m, None)?.value;
            let low = km_lower(b, m, &WitnessFamily::empty(), &opts)?.value;
            let kt = ktilde_lower(b, m, &WitnessFamily::empty(), &opts)?.value;
            violations += (low > exact * (1.0 + 1e-9)) as usize;
            kt_violations += (kt > exact * (1.0 + 1e-9)) as usize;
            sink.row("km", m as f64, exact, BoundKind::Exact, format!("basis-{k}"));
            sink.row("km", m as f64, low, BoundKind::Lower, format!("basis-{k}"));
            sink.row("ktilde", m as f64, kt, BoundKind::Lower, format!("basis-{k}"));
        }
    }
    sink.check(
        "km_lower <= km_exact on random 8-dim bases",
        violations == 0 && kt_violations == 0,
        format!("{violations} km violations, {kt_violations} ktilde > k_m violations over 10 bases"),
    );

    let e = &bases[0];
    let mut worst = 0.0f64;
    for m in 1..=8 {
        let km = km_exact_hilbert(e, m, None)?.value;
        let leb = lebesgue_search(e, m, cfg.trials(), cfg.seed)?.value;
        worst = worst.max((km - 1.0).abs()).max((leb - 1.0).abs());
        sink.row("km", m as f64, km, BoundKind::Exact, "orthonormal");
        sink.row("lebesgue", m as f64, leb, BoundKind::Lower, "orthonormal");
    }
    let mut fam = WitnessFamily::empty();
    fam.push(Witness::structured("flat", vec![1.0; 8], (0..8).collect()));
    for a in [1.0, 0.5, 0.1, 0.01] {
        let p = phi_lower(e, a, &fam, cfg.trials(), cfg.seed)?;
        worst = worst.max((p.value - 1.0).abs());
        sink.push(EstimateReport { witness: format!("orthonormal:{}", p.witness), ..p });
    }
    sink.check("orthonormal basis: k_m = L_m = phi = 1", worst <= 1e-10, format!("max deviation {worst:.3e}"));
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn suite_names_round_trip() {
        for s in Suite::ALL {
            assert_eq!(s.name().parse::<Suite>().unwrap(), s);
            assert_eq!(serde_json::to_value(s).unwrap(), s.name());
        }
        assert!("nope".parse::<Suite>().is_err());
        for c in 1..=9 {
            assert_eq!(Suite::for_criterion(c).unwrap().criterion(), c);
        }
    }

    #[test]
    fn config_validation() {
        let mut c = ExperimentConfig::new(Suite::ThmA);
        assert_eq!(c.levels(), 10);
        c.levels = Some(1);
        assert!(c.validate().is_err());
        c.levels = Some(3);
        c.trials = Some(0);
        assert!(c.validate().is_err());
        let parsed: ExperimentConfig = serde_json::from_str(r#"{"suite":"mainA","seed":7}"#).unwrap();
        assert_eq!(parsed.suite, Suite::MainA);
        assert_eq!(parsed.seed, 7);
        assert_eq!(parsed.host, "l2");
    }

    #[test]
    fn rotation_suite_passes() {
        let r = run_suite(&ExperimentConfig::new(Suite::Rotation)).unwrap();
        assert!(r.passed(), "{:?}", r.failures().collect::<Vec<_>>());
        assert_eq!(r.verdicts.len(), 5);
    }

    #[test]
    fn grid_oracle_matches_identity() {
        let e = Basis::unit(Arc::new(NormedSpace::Seq(SeqNorm::l2(3))));
        assert!((grid_projection_norm(&e, &[0, 2]) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn small_suites_are_deterministic() {
        let mut cfg = ExperimentConfig::new(Suite::ThmA);
        cfg.levels = Some(4);
        cfg.trials = Some(4);
        let a = run_suite(&cfg).unwrap();
        let b = run_suite(&cfg).unwrap();
        assert_eq!(a.rows, b.rows);
        let dir = tempfile::tempdir().unwrap();
        let (p1, p2) = (dir.path().join("a.csv"), dir.path().join("b.csv"));
        emit_report(&a, &p1).unwrap();
        let json = emit_report(&b, &p2).unwrap();
        assert_eq!(std::fs::read(&p1).unwrap(), std::fs::read(&p2).unwrap());
        let v: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(json).unwrap()).unwrap();
        assert_eq!(v["schema"], SCHEMA);
        assert_eq!(v["suite"], "thmA");
    }
}
