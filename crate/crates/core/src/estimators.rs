//! Greedy-approximation parameters: unconditionality parameters `k_m` and
//! `k̃_m`, democracy functions, truncation-quasi-greedy and quasi-greedy
//! constants, Lebesgue-parameter lower bounds, the near-unconditionality
//! function `φ(a)` and its dyadic layers.
//!
//! Apart from [`km_exact_hilbert`], every estimate is a witness lower bound
//! (or, for infima, an upper bound) and is labelled as such.

use std::fmt;

use nalgebra::DMatrix;
use rand::Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::basis::{greedy_set_of, is_greedy_set, Basis, TieRule};
use crate::error::{check_dim, Error, Result};
use crate::sampling;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum BoundKind {
    Exact,
    Lower,
    Upper,
}

impl fmt::Display for BoundKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            BoundKind::Exact => "exact",
            BoundKind::Lower => "lower",
            BoundKind::Upper => "upper",
        })
    }
}

/// One row of an experiment table.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EstimateReport {
    pub quantity: String,
    pub scale: f64,
    pub value: f64,
    pub bound_kind: BoundKind,
    pub witness: String,
    pub seed: u64,
}

impl EstimateReport {
    pub fn new(
        quantity: impl Into<String>,
        scale: f64,
        value: f64,
        bound_kind: BoundKind,
        witness: impl Into<String>,
        seed: u64,
    ) -> Self {
        Self {
            quantity: quantity.into(),
            scale,
            value,
            bound_kind,
            witness: witness.into(),
            seed,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Provenance {
    Construction,
    Random,
    Structured,
}

/// A coefficient vector together with an index set.
#[derive(Debug, Clone, PartialEq)]
pub struct Witness {
    pub label: String,
    pub provenance: Provenance,
    pub coeffs: Vec<f64>,
    pub set: Vec<usize>,
}

impl Witness {
    pub fn structured(label: impl Into<String>, coeffs: Vec<f64>, set: Vec<usize>) -> Self {
        Self {
            label: label.into(),
            provenance: Provenance::Structured,
            coeffs,
            set,
        }
    }

    /// Largest index carrying a nonzero coefficient, plus one.
    pub fn support_end(&self) -> usize {
        self.coeffs.iter().rposition(|x| *x != 0.0).map_or(0, |i| i + 1)
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct WitnessFamily {
    witnesses: Vec<Witness>,
}

impl WitnessFamily {
    pub fn new(witnesses: Vec<Witness>) -> Self {
        Self { witnesses }
    }

    pub fn empty() -> Self {
        Self::default()
    }

    pub fn push(&mut self, w: Witness) {
        self.witnesses.push(w);
    }

    pub fn extend(&mut self, other: WitnessFamily) {
        self.witnesses.extend(other.witnesses);
    }

    pub fn iter(&self) -> std::slice::Iter<'_, Witness> {
        self.witnesses.iter()
    }

    pub fn len(&self) -> usize {
        self.witnesses.len()
    }

    pub fn is_empty(&self) -> bool {
        self.witnesses.is_empty()
    }

    /// Every coefficient vector has length `dim` and every set lies in `0..dim`.
    pub fn validate(&self, dim: usize) -> Result<()> {
        for w in &self.witnesses {
            check_dim(dim, w.coeffs.len())?;
            if let Some(&i) = w.set.iter().find(|&&i| i >= dim) {
                return Err(Error::IndexOutOfRange { index: i, len: dim });
            }
        }
        Ok(())
    }
}

/// Random-search budget shared by the sampling estimators.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SearchOptions {
    pub trials: usize,
    pub rounds: usize,
    pub seed: u64,
}

impl Default for SearchOptions {
    fn default() -> Self {
        Self {
            trials: 1000,
            rounds: 20,
            seed: 0,
        }
    }
}

impl SearchOptions {
    pub fn new(trials: usize, seed: u64) -> Self {
        Self {
            trials,
            rounds: 20,
            seed,
        }
    }
}

fn projection_ratio(b: &Basis, c: &[f64], set: &[usize]) -> f64 {
    let whole = b.cnorm(c);
    if whole == 0.0 {
        return 0.0;
    }
    b.restricted_cnorm(c, set) / whole
}

fn describe_set(set: &[usize]) -> String {
    const SHOWN: usize = 8;
    let head: Vec<String> = set.iter().take(SHOWN).map(|i| i.to_string()).collect();
    if set.len() > SHOWN {
        format!("A={{{},...}}|{}|", head.join(";"), set.len())
    } else {
        format!("A={{{}}}", head.join(";"))
    }
}

/// Best `(value, label)` by value, ties resolved towards the earlier entry.
fn best_of(items: impl IntoIterator<Item = (f64, String)>) -> (f64, String) {
    let mut best = (f64::NEG_INFINITY, String::new());
    for (v, l) in items {
        if v > best.0 {
            best = (v, l);
        }
    }
    best
}

fn subsets_up_to(n: usize, m: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    if n <= 20 {
        for mask in 1u32..(1u32 << n) {
            if (mask.count_ones() as usize) <= m {
                out.push((0..n).filter(|i| mask >> i & 1 == 1).collect());
            }
        }
    } else {
        for i in 0..n {
            out.push(vec![i]);
            if m >= 2 {
                for j in i + 1..n {
                    out.push(vec![i, j]);
                }
            }
        }
    }
    out
}

/// `k_m = max_{|A|≤m} ‖S_A‖` in a Euclidean ambient via singular values.
/// Exhaustive (and labelled exact) when `N ≤ 20` or `m ≤ 2`; otherwise the
/// maximum over `candidates` (or over contiguous and seeded random sets) is
/// labelled a lower bound.
pub fn km_exact_hilbert(b: &Basis, m: usize, candidates: Option<&[Vec<usize>]>) -> Result<EstimateReport> {
    if !b.space().is_euclidean() {
        return Err(Error::Unsupported(
            "exact k_m needs a Euclidean ambient; use km_lower".into(),
        ));
    }
    let n = b.dim();
    if m == 0 || m > n {
        return Err(Error::InvalidParameter(format!("m = {m} outside 1..={n}")));
    }
    let exhaustive = candidates.is_none() && (n <= 20 || m <= 2);
    let sets: Vec<Vec<usize>> = match candidates {
        Some(c) => c.iter().filter(|s| !s.is_empty() && s.len() <= m).cloned().collect(),
        None if exhaustive => subsets_up_to(n, m),
        None => {
            let mut v: Vec<Vec<usize>> = (0..=n - m).map(|s| (s..s + m).collect()).collect();
            let mut rng = sampling::stream(0, 0);
            for _ in 0..256 {
                v.push(sampling::random_subset(n, m, &mut rng));
            }
            v
        }
    };
    if let Some(s) = sets.iter().flatten().find(|&&i| i >= n) {
        return Err(Error::IndexOutOfRange { index: *s, len: n });
    }
    let synth = b.synth_matrix();
    let anal = b.anal_matrix();
    let (value, label) = sets
        .par_iter()
        .map(|set| {
            let mut d = DMatrix::zeros(n, n);
            for &i in set {
                d[(i, i)] = 1.0;
            }
            let p = &synth * d * &anal;
            (p.singular_values().max(), set.clone())
        })
        .reduce(
            || (0.0, Vec::new()),
            |a, b| if b.0 > a.0 || (b.0 == a.0 && b.1 < a.1) { b } else { a },
        );
    Ok(EstimateReport::new(
        "km",
        m as f64,
        value,
        if exhaustive { BoundKind::Exact } else { BoundKind::Lower },
        describe_set(&label),
        0,
    ))
}

#[derive(Clone, Copy, PartialEq)]
enum Restriction {
    /// `|A| ≤ m`, any coefficients.
    SetSize(usize),
    /// Coefficients supported in the first `m` indices, `A` arbitrary.
    Prefix(usize),
}

/// Local search on `(c, A)` maximizing `‖S_A f‖/‖f‖`: sign flips, rescalings,
/// zeroing and membership toggles over a random sample of coordinates.
fn hill_climb<R: Rng>(b: &Basis, c: &mut [f64], set: &mut Vec<usize>, restr: Restriction, rounds: usize, rng: &mut R) -> f64 {
    let n = c.len();
    let limit = match restr {
        Restriction::SetSize(_) => n,
        Restriction::Prefix(m) => m,
    };
    let mut inside = vec![false; n];
    for &i in set.iter() {
        inside[i] = true;
    }
    let eval = |c: &[f64], inside: &[bool]| -> f64 {
        let set: Vec<usize> = (0..n).filter(|&i| inside[i]).collect();
        projection_ratio(b, c, &set)
    };
    let mut best = eval(c, &inside);
    let sample = limit.min(24);
    for _ in 0..rounds {
        let mut improved = false;
        for i in sampling::random_subset(limit, sample, rng) {
            let old = c[i];
            let peak = c.iter().fold(0.0f64, |m, x| m.max(x.abs())).max(1e-300);
            for cand in [-old, 2.0 * old, 0.5 * old, 0.0, peak, -peak] {
                if cand == old {
                    continue;
                }
                c[i] = cand;
                let v = eval(c, &inside);
                if v > best * (1.0 + 1e-12) {
                    best = v;
                    improved = true;
                    break;
                }
                c[i] = old;
            }
            let count = inside.iter().filter(|&&x| x).count();
            let can_add = match restr {
                Restriction::SetSize(m) => count < m,
                Restriction::Prefix(_) => true,
            };
            if inside[i] || can_add {
                inside[i] = !inside[i];
                let v = eval(c, &inside);
                if v > best * (1.0 + 1e-12) {
                    best = v;
                    improved = true;
                } else {
                    inside[i] = !inside[i];
                }
            }
        }
        if !improved {
            break;
        }
    }
    *set = (0..n).filter(|&i| inside[i]).collect();
    best
}

fn projection_search(
    b: &Basis,
    restr: Restriction,
    witnesses: &WitnessFamily,
    opts: &SearchOptions,
) -> Result<(f64, String)> {
    witnesses.validate(b.dim())?;
    let n = b.dim();
    let usable = |w: &Witness| match restr {
        Restriction::SetSize(m) => w.set.len() <= m,
        Restriction::Prefix(m) => w.support_end() <= m,
    };
    let mut candidates: Vec<(f64, String)> = vec![(1.0, "x_1".into())];
    candidates.extend(
        witnesses
            .iter()
            .filter(|w| usable(w))
            .map(|w| (projection_ratio(b, &w.coeffs, &w.set), w.label.clone())),
    );
    let (size, span) = match restr {
        Restriction::SetSize(m) => (m, n),
        Restriction::Prefix(m) => (m, m),
    };
    let random: Vec<(f64, String)> = (0..opts.trials)
        .into_par_iter()
        .map(|t| {
            let mut rng = sampling::stream(opts.seed, t as u64);
            let mut c = vec![0.0; n];
            let probe = sampling::probe_vector(span, t, &mut rng);
            c[..span].copy_from_slice(&probe);
            let mut set = match t % 3 {
                0 => sampling::random_subset(span, size.min(span), &mut rng),
                1 => greedy_set_of(&c, size.min(n), &TieRule::LowestIndex)
                    .map(|g| g.set)
                    .unwrap_or_default(),
                _ => {
                    let k = rng.random_range(1..=size.min(span).max(1));
                    let start = rng.random_range(0..=span - k);
                    (start..start + k).collect()
                }
            };
            if let Restriction::Prefix(m) = restr {
                set.retain(|&i| i < m);
            }
            let v = hill_climb(b, &mut c, &mut set, restr, opts.rounds, &mut rng);
            (v, format!("random-{t}"))
        })
        .collect();
    candidates.extend(random);
    Ok(best_of(candidates))
}

/// Lower bound for `k_m = sup{‖S_A f‖/‖f‖ : |A| ≤ m}` from witnesses and
/// seeded random restarts refined by local search.
pub fn km_lower(b: &Basis, m: usize, witnesses: &WitnessFamily, opts: &SearchOptions) -> Result<EstimateReport> {
    if m == 0 || m > b.dim() {
        return Err(Error::InvalidParameter(format!("m = {m} outside 1..={}", b.dim())));
    }
    let (value, label) = projection_search(b, Restriction::SetSize(m), witnesses, opts)?;
    Ok(EstimateReport::new("km", m as f64, value, BoundKind::Lower, label, opts.seed))
}

/// Lower bound for `k̃_m`: `f` in the span of the first `m` basis vectors,
/// `A` arbitrary.
pub fn ktilde_lower(b: &Basis, m: usize, witnesses: &WitnessFamily, opts: &SearchOptions) -> Result<EstimateReport> {
    if m == 0 || m > b.dim() {
        return Err(Error::InvalidParameter(format!("m = {m} outside 1..={}", b.dim())));
    }
    let (value, label) = projection_search(b, Restriction::Prefix(m), witnesses, opts)?;
    Ok(EstimateReport::new("ktilde", m as f64, value, BoundKind::Lower, label, opts.seed))
}

/// Witness-only `k̃_m` bound: the best witness supported in the first `m` indices.
pub fn ktilde_from_witnesses(b: &Basis, m: usize, witnesses: &WitnessFamily) -> Result<EstimateReport> {
    ktilde_lower(b, m, witnesses, &SearchOptions { trials: 0, rounds: 0, seed: 0 })
}

/// A signed index set for democracy estimates.
#[derive(Debug, Clone, PartialEq)]
pub struct SignedSet {
    pub set: Vec<usize>,
    pub signs: Option<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum DemocracyMode {
    Exhaustive,
    Sampled {
        trials: usize,
        seed: u64,
        structured: Vec<SignedSet>,
    },
}

/// `φ_u(m)`, `φ_l(m)`, `φ^s_u(m)`, `φ^s_l(m)`. In sampled mode the upper
/// functions are lower bounds and the lower functions upper bounds.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DemocracyReport {
    pub m: usize,
    pub phi_u: f64,
    pub phi_l: f64,
    pub phi_u_s: f64,
    pub phi_l_s: f64,
    pub exact: bool,
}

impl DemocracyReport {
    pub fn rows(&self, seed: u64) -> Vec<EstimateReport> {
        let (up, low) = if self.exact {
            (BoundKind::Exact, BoundKind::Exact)
        } else {
            (BoundKind::Lower, BoundKind::Upper)
        };
        let m = self.m as f64;
        vec![
            EstimateReport::new("phiu", m, self.phi_u, up, "", seed),
            EstimateReport::new("phil", m, self.phi_l, low, "", seed),
            EstimateReport::new("phius", m, self.phi_u_s, up, "", seed),
            EstimateReport::new("phils", m, self.phi_l_s, low, "", seed),
        ]
    }
}

const EXHAUSTIVE_BUDGET: f64 = 4e6;

struct DemAcc {
    phi_u: f64,
    phi_l: f64,
    phi_u_s: f64,
    phi_l_s: f64,
}

impl DemAcc {
    fn new() -> Self {
        Self {
            phi_u: 0.0,
            phi_l: f64::INFINITY,
            phi_u_s: 0.0,
            phi_l_s: f64::INFINITY,
        }
    }

    fn merge(mut self, o: DemAcc) -> Self {
        self.phi_u = self.phi_u.max(o.phi_u);
        self.phi_l = self.phi_l.min(o.phi_l);
        self.phi_u_s = self.phi_u_s.max(o.phi_u_s);
        self.phi_l_s = self.phi_l_s.min(o.phi_l_s);
        self
    }

    fn add(&mut self, size: usize, m: usize, positive: bool, norm: f64) {
        if size <= m {
            self.phi_u_s = self.phi_u_s.max(norm);
            if positive {
                self.phi_u = self.phi_u.max(norm);
            }
        }
        if size >= m {
            self.phi_l_s = self.phi_l_s.min(norm);
            if positive {
                self.phi_l = self.phi_l.min(norm);
            }
        }
    }
}

fn binomial(n: usize, k: usize) -> f64 {
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

pub fn democracy_functions(b: &Basis, m: usize, mode: &DemocracyMode) -> Result<DemocracyReport> {
    let n = b.dim();
    if m == 0 || m > n {
        return Err(Error::InvalidParameter(format!("m = {m} outside 1..={n}")));
    }
    let signed_norm = |set: &[usize], signs: &[f64]| {
        let mut c = vec![0.0; n];
        for (&i, &s) in set.iter().zip(signs) {
            c[i] = s;
        }
        b.cnorm(&c)
    };
    let acc = match mode {
        DemocracyMode::Exhaustive => {
            let work: f64 = (1..=n).map(|k| binomial(n, k) * 2f64.powi(k as i32 - 1)).sum();
            if n > 20 || work > EXHAUSTIVE_BUDGET {
                return Err(Error::ResourceLimit(format!(
                    "exhaustive democracy search in dimension {n} is too large; use sampled mode"
                )));
            }
            (1u32..(1u32 << n))
                .into_par_iter()
                .map(|mask| {
                    let set: Vec<usize> = (0..n).filter(|i| mask >> i & 1 == 1).collect();
                    let k = set.len();
                    let mut acc = DemAcc::new();
                    // first sign fixed to +1
                    for pattern in 0u32..(1u32 << (k - 1)) {
                        let signs: Vec<f64> = (0..k)
                            .map(|j| if j > 0 && pattern >> (j - 1) & 1 == 1 { -1.0 } else { 1.0 })
                            .collect();
                        acc.add(k, m, pattern == 0, signed_norm(&set, &signs));
                    }
                    acc
                })
                .reduce(DemAcc::new, DemAcc::merge)
        }
        DemocracyMode::Sampled {
            trials,
            seed,
            structured,
        } => {
            let mut acc = DemAcc::new();
            for s in structured {
                if let Some(&i) = s.set.iter().find(|&&i| i >= n) {
                    return Err(Error::IndexOutOfRange { index: i, len: n });
                }
                let ones = vec![1.0; s.set.len()];
                let signs = s.signs.as_deref().unwrap_or(&ones);
                let positive = signs.iter().all(|&x| x > 0.0);
                acc.add(s.set.len(), m, positive, signed_norm(&s.set, signs));
            }
            for start in [0, n - m] {
                let set: Vec<usize> = (start..start + m).collect();
                acc.add(m, m, true, signed_norm(&set, &vec![1.0; m]));
                let alt: Vec<f64> = (0..m).map(|j| if j % 2 == 0 { 1.0 } else { -1.0 }).collect();
                acc.add(m, m, false, signed_norm(&set, &alt));
            }
            let sampled = (0..*trials)
                .into_par_iter()
                .map(|t| {
                    let mut rng = sampling::stream(*seed, t as u64);
                    let set = sampling::random_subset(n, m, &mut rng);
                    let mut acc = DemAcc::new();
                    acc.add(m, m, true, signed_norm(&set, &vec![1.0; m]));
                    let signs = sampling::random_signs(m, &mut rng);
                    acc.add(m, m, false, signed_norm(&set, &signs));
                    acc
                })
                .reduce(DemAcc::new, DemAcc::merge);
            acc.merge(sampled)
        }
    };
    Ok(DemocracyReport {
        m,
        phi_u: acc.phi_u,
        phi_l: acc.phi_l,
        phi_u_s: acc.phi_u_s,
        phi_l_s: acc.phi_l_s,
        exact: matches!(mode, DemocracyMode::Exhaustive),
    })
}

/// Sizes `1, 2, 4, ...` up to `n`, plus `n`; every size when `n ≤ 64`.
fn size_grid(n: usize) -> Vec<usize> {
    if n <= 64 {
        return (1..=n).collect();
    }
    let mut v: Vec<usize> = std::iter::successors(Some(1usize), |k| Some(k * 2))
        .take_while(|&k| k <= n)
        .collect();
    if v.last() != Some(&n) {
        v.push(n);
    }
    v
}

/// Lower bound for the truncation-quasi-greedy constant
/// `sup min_{n∈A}|x*_n(f)| ‖1_{ε(f),A}‖ / ‖f‖` over greedy sets `A`.
pub fn tqg_constant_lower(b: &Basis, witnesses: &WitnessFamily, trials: usize, seed: u64) -> Result<EstimateReport> {
    witnesses.validate(b.dim())?;
    let n = b.dim();
    let sizes = size_grid(n);
    let eval = |c: &[f64]| -> (f64, usize) {
        let whole = b.cnorm(c);
        if whole == 0.0 {
            return (0.0, 0);
        }
        let mut best = (0.0, 0);
        for &m in &sizes {
            let g = greedy_set_of(c, m, &TieRule::LowestIndex).expect("m ≤ n");
            let mut ind = vec![0.0; n];
            let mut min = f64::INFINITY;
            for &i in &g.set {
                ind[i] = c[i].signum();
                min = min.min(c[i].abs());
            }
            if min == 0.0 {
                continue;
            }
            let v = min * b.cnorm(&ind) / whole;
            if v > best.0 {
                best = (v, m);
            }
        }
        best
    };
    let mut items: Vec<(f64, String)> = witnesses
        .iter()
        .map(|w| {
            let (v, m) = eval(&w.coeffs);
            (v, format!("{}:m={m}", w.label))
        })
        .collect();
    items.extend(
        (0..trials)
            .into_par_iter()
            .map(|t| {
                let mut rng = sampling::stream(seed, t as u64);
                let c = sampling::probe_vector(n, t, &mut rng);
                let (v, m) = eval(&c);
                (v, format!("random-{t}:m={m}"))
            })
            .collect::<Vec<_>>(),
    );
    let (value, label) = best_of(items);
    Ok(EstimateReport::new("tqg", n as f64, value.max(0.0), BoundKind::Lower, label, seed))
}

/// Quasi-greedy witness evaluation.
#[derive(Debug, Clone, PartialEq)]
pub struct QuasiGreedyEstimate {
    pub report: EstimateReport,
    /// Labels of witnesses whose set is not a greedy set of their vector.
    pub rejected: Vec<String>,
}

/// `max ‖S_A f‖/‖f‖` over witnesses whose set `A` is a greedy set of `f`,
/// together with the greedy approximant of the same size.
pub fn quasi_greedy_lower(b: &Basis, witnesses: &WitnessFamily) -> Result<QuasiGreedyEstimate> {
    witnesses.validate(b.dim())?;
    let mut rejected = Vec::new();
    let mut items = vec![(1.0, "trivial".to_string())];
    for w in witnesses.iter() {
        if is_greedy_set(&w.coeffs, &w.set) {
            items.push((projection_ratio(b, &w.coeffs, &w.set), w.label.clone()));
        } else {
            rejected.push(w.label.clone());
        }
        if !w.set.is_empty() {
            let g = greedy_set_of(&w.coeffs, w.set.len(), &TieRule::LowestIndex)?;
            items.push((projection_ratio(b, &w.coeffs, &g.set), format!("{}:tga", w.label)));
        }
    }
    let (value, label) = best_of(items);
    Ok(QuasiGreedyEstimate {
        report: EstimateReport::new("qg", b.dim() as f64, value, BoundKind::Lower, label, 0),
        rejected,
    })
}

/// `‖f - G_m f‖ / min_B ‖f - S_B f‖` over candidate supports `|B| ≤ m`, a
/// lower bound for the Lebesgue parameter `L_m`.
pub fn lebesgue_lower(b: &Basis, f: &[f64], m: usize, candidates: &[Vec<usize>]) -> Result<EstimateReport> {
    check_dim(b.dim(), f.len())?;
    if candidates.is_empty() {
        return Err(Error::InvalidParameter("no candidate supports".into()));
    }
    let c = b.anal(f);
    let n = b.dim();
    let residual = |set: &[usize]| {
        let mut r = c.clone();
        for &i in set {
            r[i] = 0.0;
        }
        b.cnorm(&r)
    };
    let g = greedy_set_of(&c, m.min(n), &TieRule::LowestIndex)?;
    let num = residual(&g.set);
    let mut den = f64::INFINITY;
    let mut arg = 0;
    for (k, s) in candidates.iter().enumerate() {
        if s.len() > m {
            return Err(Error::InvalidParameter(format!("candidate {k} has more than {m} elements")));
        }
        if let Some(&i) = s.iter().find(|&&i| i >= n) {
            return Err(Error::IndexOutOfRange { index: i, len: n });
        }
        let r = residual(s);
        if r < den {
            den = r;
            arg = k;
        }
    }
    let tol = 1e-12 * b.cnorm(&c).max(1e-300);
    let value = if den <= tol {
        if num <= tol {
            1.0
        } else {
            f64::INFINITY
        }
    } else {
        num / den
    };
    Ok(EstimateReport::new("lebesgue", m as f64, value, BoundKind::Lower, format!("B#{arg}"), 0))
}

/// Seeded search for a Lebesgue lower bound: random `f`, candidate supports
/// formed by the greedy set, contiguous windows and random sets.
pub fn lebesgue_search(b: &Basis, m: usize, trials: usize, seed: u64) -> Result<EstimateReport> {
    let n = b.dim();
    if m == 0 || m > n {
        return Err(Error::InvalidParameter(format!("m = {m} outside 1..={n}")));
    }
    let rows: Vec<Result<EstimateReport>> = (0..trials)
        .into_par_iter()
        .map(|t| {
            let mut rng = sampling::stream(seed, t as u64);
            let c = sampling::probe_vector(n, t, &mut rng);
            let f = b.synth(&c);
            let mut cands = vec![greedy_set_of(&c, m, &TieRule::LowestIndex)?.set];
            for s in 0..=(n - m).min(16) {
                cands.push((s..s + m).collect());
            }
            for _ in 0..8 {
                cands.push(sampling::random_subset(n, m, &mut rng));
            }
            let mut r = lebesgue_lower(b, &f, m, &cands)?;
            r.witness = format!("random-{t}:{}", r.witness);
            Ok(r)
        })
        .collect();
    let mut best = EstimateReport::new("lebesgue", m as f64, 1.0, BoundKind::Lower, "trivial", seed);
    for r in rows {
        let r = r?;
        if r.value > best.value {
            best = r;
        }
    }
    best.seed = seed;
    Ok(best)
}

/// `A(f, a) = {n : |x*_n(f)| ≥ a}` for coefficients.
pub fn threshold_set(coeffs: &[f64], a: f64) -> Vec<usize> {
    (0..coeffs.len()).filter(|&i| coeffs[i].abs() >= a).collect()
}

fn normalize_sup(c: &[f64]) -> Option<Vec<f64>> {
    let peak = c.iter().fold(0.0f64, |m, x| m.max(x.abs()));
    (peak > 0.0).then(|| c.iter().map(|x| x / peak).collect())
}

/// Entry count up to which every magnitude prefix is tried.
const ALL_PREFIXES: usize = 256;

/// Prefix lengths: all up to `ALL_PREFIXES`, then a geometric grid of ratio
/// `2^{1/4}`, always ending with `len`.
fn prefix_lengths(len: usize) -> Vec<usize> {
    if len <= ALL_PREFIXES {
        return (1..=len).collect();
    }
    let mut out: Vec<usize> = (1..=ALL_PREFIXES).collect();
    let mut x = ALL_PREFIXES as f64;
    loop {
        x *= 2f64.powf(0.25);
        let k = x.round() as usize;
        if k >= len {
            break;
        }
        out.push(k);
    }
    out.push(len);
    out
}

/// Sets `A ∩ A(f, a)` for prefixes `A` of `set` ordered by decreasing
/// magnitude. With at most `ALL_PREFIXES` entries every prefix is taken, so
/// shrinking `a` only adds sets.
fn magnitude_prefixes(c: &[f64], set: &[usize], a: f64) -> Vec<Vec<usize>> {
    let mut ordered: Vec<usize> = set.iter().copied().filter(|&i| c[i].abs() >= a).collect();
    ordered.sort_by(|&i, &j| c[j].abs().total_cmp(&c[i].abs()).then(i.cmp(&j)));
    prefix_lengths(ordered.len())
        .into_iter()
        .map(|k| {
            let mut s = ordered[..k].to_vec();
            s.sort_unstable();
            s
        })
        .collect()
}

/// Lower bound for `φ(a) = sup{‖S_A f‖/‖f‖ : f ∈ Q, A ⊆ A(f, a)}` where `Q`
/// holds the vectors with coefficients bounded by one. Witnesses are rescaled
/// into `Q`; for each witness the sets considered are the magnitude-ordered
/// prefixes of both its set and of `A(f, a)`.
pub fn phi_lower(b: &Basis, a: f64, witnesses: &WitnessFamily, trials: usize, seed: u64) -> Result<EstimateReport> {
    if !(a > 0.0 && a <= 1.0) {
        return Err(Error::InvalidParameter(format!("a = {a} outside (0, 1]")));
    }
    witnesses.validate(b.dim())?;
    let n = b.dim();
    let eval = |c: &[f64], extra: Option<&[usize]>| -> f64 {
        let whole = b.cnorm(c);
        if whole == 0.0 {
            return 0.0;
        }
        let all = threshold_set(c, a);
        let mut sets = magnitude_prefixes(c, &all, a);
        if let Some(e) = extra {
            sets.extend(magnitude_prefixes(c, e, a));
        }
        sets.iter().map(|s| b.restricted_cnorm(c, s)).fold(0.0, f64::max) / whole
    };
    let mut items = vec![(1.0, "x_1".to_string())];
    for w in witnesses.iter() {
        if let Some(c) = normalize_sup(&w.coeffs) {
            items.push((eval(&c, Some(&w.set)), w.label.clone()));
        }
    }
    items.extend(
        (0..trials)
            .into_par_iter()
            .map(|t| {
                let mut rng = sampling::stream(seed, t as u64);
                let c = normalize_sup(&sampling::probe_vector(n, t, &mut rng));
                let pick = sampling::random_subset(n, (n / 2).max(1), &mut rng);
                let v = c.map_or(0.0, |c| eval(&c, Some(&pick)));
                (v, format!("random-{t}"))
            })
            .collect::<Vec<_>>(),
    );
    let (value, label) = best_of(items);
    Ok(EstimateReport::new("phi", a, value, BoundKind::Lower, label, seed))
}

/// `sup_n ‖x_n‖`.
pub fn alpha1(b: &Basis) -> f64 {
    (0..b.dim())
        .map(|k| {
            let mut c = vec![0.0; b.dim()];
            c[k] = 1.0;
            b.cnorm(&c)
        })
        .fold(0.0, f64::max)
}

/// `‖x*_n‖`: exact in a Euclidean ambient, otherwise a sampled lower bound.
pub fn dual_norm_lower(b: &Basis, n: usize, trials: usize, seed: u64) -> Result<EstimateReport> {
    let row = b.dual(n)?;
    if b.space().is_euclidean() {
        let v = row.iter().map(|x| x * x).sum::<f64>().sqrt();
        return Ok(EstimateReport::new("dual-norm", n as f64, v, BoundKind::Exact, "", seed));
    }
    let space = b.space();
    let ratio = |f: &[f64]| {
        let nf = space.norm(f);
        if nf == 0.0 {
            0.0
        } else {
            row.iter().zip(f).map(|(a, b)| a * b).sum::<f64>().abs() / nf
        }
    };
    let mut best = ratio(&b.vector(n)?);
    best = best.max(ratio(&row));
    best = best.max(ratio(&row.iter().map(|x| x.signum()).collect::<Vec<_>>()));
    let dim = b.dim();
    let sampled = (0..trials)
        .into_par_iter()
        .map(|t| {
            let mut rng = sampling::stream(seed, t as u64);
            ratio(&sampling::probe_vector(dim, t, &mut rng))
        })
        .reduce(|| 0.0, f64::max);
    Ok(EstimateReport::new(
        "dual-norm",
        n as f64,
        best.max(sampled),
        BoundKind::Lower,
        "",
        seed,
    ))
}

/// `sup_n ‖x*_n‖` (lower bound unless Euclidean).
pub fn alpha2(b: &Basis, trials: usize, seed: u64) -> Result<f64> {
    let mut best = 0.0f64;
    for n in 0..b.dim() {
        best = best.max(dual_norm_lower(b, n, trials, seed)?.value);
    }
    Ok(best)
}

/// One row of the `φ` versus `k_m` comparison.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct KmPhiRow {
    pub a: f64,
    pub lhs: f64,
    pub rhs: f64,
    pub flagged: bool,
}

/// Compares `φ(a)` (lower bound) with `F(a^{-p}) / (4^{1/p} α_1 α_2)`, where
/// `F` is the running maximum of `km_curve` (`km_curve[m-1]` bounds `k_m`)
/// evaluated at `⌊t⌋` clamped to the curve. A flag marks `lhs < rhs`: both
/// sides are estimates, so this is a consistency check, not a proof.
pub fn kmphi_transfer_check(
    b: &Basis,
    p: f64,
    alpha1: f64,
    alpha2: f64,
    km_curve: &[f64],
    a_grid: &[f64],
    witnesses: &WitnessFamily,
    trials: usize,
    seed: u64,
) -> Result<Vec<KmPhiRow>> {
    if km_curve.is_empty() {
        return Err(Error::InvalidParameter("empty k_m curve".into()));
    }
    if !(p > 0.0) {
        return Err(Error::InvalidParameter("p must be positive".into()));
    }
    let mut running = Vec::with_capacity(km_curve.len());
    let mut acc = f64::NEG_INFINITY;
    for &k in km_curve {
        acc = acc.max(k);
        running.push(acc);
    }
    let f_of = |t: f64| {
        let idx = (t.floor() as usize).clamp(1, running.len());
        running[idx - 1]
    };
    let denom = 4f64.powf(1.0 / p) * alpha1 * alpha2;
    a_grid
        .iter()
        .map(|&a| {
            let lhs = phi_lower(b, a, witnesses, trials, seed)?.value;
            let rhs = f_of(a.powf(-p)) / denom;
            Ok(KmPhiRow {
                a,
                lhs,
                rhs,
                flagged: lhs < rhs - 1e-9 * rhs.max(1.0),
            })
        })
        .collect()
}

/// `n` with `2^{-n} < a ≤ 2^{1-n}`.
pub fn dyadic_level(a: f64) -> Result<usize> {
    if !(a > 0.0 && a <= 1.0) {
        return Err(Error::InvalidParameter(format!("a = {a} outside (0, 1]")));
    }
    let mut n = 1usize;
    while 2f64.powi(-(n as i32)) >= a {
        n += 1;
    }
    Ok(n)
}

/// Layers `A_0, ..., A_n` of `A ⊆ A(f, a)` (default `A = A(f, a)`):
/// `A_0 = A ∩ A(f,1)`, `A_k = A ∩ (A(f,2^{-k}) \ A(f,2^{1-k}))` for
/// `1 ≤ k < n` and `A_n = A \ A(f, 2^{1-n})`. Empty layers are kept.
pub fn dyadic_layers_of(coeffs: &[f64], a: f64, set: Option<&[usize]>) -> Result<Vec<Vec<usize>>> {
    if coeffs.iter().any(|x| x.abs() > 1.0) {
        return Err(Error::InvalidParameter("coefficients must be bounded by one".into()));
    }
    let n = dyadic_level(a)?;
    let base = threshold_set(coeffs, a);
    let set: Vec<usize> = match set {
        Some(s) => {
            if let Some(&i) = s.iter().find(|&&i| i >= coeffs.len() || coeffs[i].abs() < a) {
                return Err(Error::InvalidParameter(format!("index {i} is not in A(f, a)")));
            }
            s.to_vec()
        }
        None => base,
    };
    let mut layers = vec![Vec::new(); n + 1];
    for i in set {
        let x = coeffs[i].abs();
        let k = if x >= 1.0 {
            0
        } else {
            (1..n).find(|&k| x >= 2f64.powi(-(k as i32))).unwrap_or(n)
        };
        layers[k].push(i);
    }
    Ok(layers)
}

pub fn dyadic_layers(b: &Basis, f: &[f64], a: f64) -> Result<Vec<Vec<usize>>> {
    check_dim(b.dim(), f.len())?;
    dyadic_layers_of(&b.anal(f), a, None)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::basis::NormedSpace;
    use crate::seqspace::SeqNorm;
    use proptest::prelude::*;
    use std::sync::Arc;

    fn l2(n: usize) -> Arc<NormedSpace> {
        Arc::new(NormedSpace::Seq(SeqNorm::l2(n)))
    }

    fn random_basis(n: usize, seed: u64) -> Basis {
        let mut rng = sampling::stream(seed, 0);
        let g = sampling::gaussian_vector(n * n, &mut rng);
        Basis::from_synth(l2(n), DMatrix::from_column_slice(n, n, &g)).unwrap()
    }

    #[test]
    fn orthonormal_km_is_one() {
        let b = Basis::unit(l2(6));
        for m in 1..=6 {
            let r = km_exact_hilbert(&b, m, None).unwrap();
            assert!((r.value - 1.0).abs() < 1e-12);
            assert_eq!(r.bound_kind, BoundKind::Exact);
        }
    }

    #[test]
    fn skewed_pair_km() {
        let synth = DMatrix::from_column_slice(2, 2, &[1.0, 0.0, 1.0, 1.0]);
        let b = Basis::from_synth(l2(2), synth).unwrap();
        let r = km_exact_hilbert(&b, 1, Some(&[vec![0]])).unwrap();
        assert!((r.value - 2f64.sqrt()).abs() < 1e-12);
        assert_eq!(r.bound_kind, BoundKind::Lower);
        let all = km_exact_hilbert(&b, 2, None).unwrap();
        assert!(all.value >= km_exact_hilbert(&b, 1, None).unwrap().value - 1e-12);
    }

    #[test]
    fn km_exact_requires_euclidean() {
        let b = Basis::unit(Arc::new(NormedSpace::Seq(SeqNorm::lp(1.0, 3).unwrap())));
        assert!(matches!(km_exact_hilbert(&b, 1, None), Err(Error::Unsupported(_))));
    }

    #[test]
    fn km_lower_below_exact() {
        for seed in 0..3 {
            let b = random_basis(6, seed);
            for m in [1, 3] {
                let exact = km_exact_hilbert(&b, m, None).unwrap().value;
                let low = km_lower(&b, m, &WitnessFamily::empty(), &SearchOptions::new(60, seed)).unwrap();
                assert!(low.value >= 1.0 && low.value <= exact * (1.0 + 1e-9));
                let kt = ktilde_lower(&b, m, &WitnessFamily::empty(), &SearchOptions::new(60, seed)).unwrap();
                assert!(kt.value <= exact * (1.0 + 1e-9));
            }
        }
    }

    #[test]
    fn search_is_deterministic() {
        let b = random_basis(7, 4);
        let o = SearchOptions::new(40, 9);
        let a = km_lower(&b, 3, &WitnessFamily::empty(), &o).unwrap();
        let c = km_lower(&b, 3, &WitnessFamily::empty(), &o).unwrap();
        assert_eq!(a, c);
    }

    #[test]
    fn witnesses_only_raise_bounds() {
        let b = random_basis(5, 2);
        let o = SearchOptions::new(10, 1);
        let plain = km_lower(&b, 2, &WitnessFamily::empty(), &o).unwrap().value;
        let exact_set = km_exact_hilbert(&b, 2, None).unwrap();
        let mut fam = WitnessFamily::empty();
        fam.push(Witness::structured("w", vec![1.0, -1.0, 0.5, 0.0, 2.0], vec![0, 4]));
        let with = km_lower(&b, 2, &fam, &o).unwrap().value;
        assert!(with >= plain && with <= exact_set.value * (1.0 + 1e-9));
    }

    #[test]
    fn identity_ktilde_is_one() {
        let b = Basis::unit(l2(8));
        let r = ktilde_lower(&b, 4, &WitnessFamily::empty(), &SearchOptions::new(30, 0)).unwrap();
        assert!((r.value - 1.0).abs() < 1e-12);
    }

    #[test]
    fn lp_democracy_is_power() {
        let b = Basis::unit(Arc::new(NormedSpace::Seq(SeqNorm::lp(3.0, 7).unwrap())));
        for m in 1..=7 {
            let d = democracy_functions(&b, m, &DemocracyMode::Exhaustive).unwrap();
            let want = (m as f64).powf(1.0 / 3.0);
            for v in [d.phi_u, d.phi_l, d.phi_u_s, d.phi_l_s] {
                assert!((v - want).abs() < 1e-12);
            }
        }
        let one = democracy_functions(&random_basis(5, 1), 1, &DemocracyMode::Exhaustive).unwrap();
        assert!((one.phi_u - alpha1(&random_basis(5, 1))).abs() < 1e-12);
        assert!(democracy_functions(&Basis::unit(l2(30)), 3, &DemocracyMode::Exhaustive).is_err());
    }

    #[test]
    fn sampled_democracy_brackets_exhaustive() {
        let b = random_basis(6, 3);
        for m in 1..=6 {
            let e = democracy_functions(&b, m, &DemocracyMode::Exhaustive).unwrap();
            let s = democracy_functions(
                &b,
                m,
                &DemocracyMode::Sampled { trials: 50, seed: 1, structured: vec![] },
            )
            .unwrap();
            assert!(s.phi_u <= e.phi_u + 1e-12 && s.phi_u_s <= e.phi_u_s + 1e-12);
            assert!(s.phi_l >= e.phi_l - 1e-12 && s.phi_l_s >= e.phi_l_s - 1e-12);
        }
    }

    #[test]
    fn l2_tqg_constant_is_one() {
        let b = Basis::unit(l2(16));
        let r = tqg_constant_lower(&b, &WitnessFamily::empty(), 200, 3).unwrap();
        assert!(r.value <= 1.0 + 1e-12 && r.value >= 1.0 - 1e-12);
    }

    #[test]
    fn orthonormal_quasi_greedy_and_lebesgue() {
        let b = Basis::unit(l2(10));
        let mut fam = WitnessFamily::empty();
        fam.push(Witness::structured("w", vec![3.0, -1.0, 2.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.5], vec![0, 2]));
        fam.push(Witness::structured("not-greedy", vec![1.0, 5.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0], vec![0]));
        let q = quasi_greedy_lower(&b, &fam).unwrap();
        assert!((q.report.value - 1.0).abs() < 1e-12);
        assert_eq!(q.rejected, vec!["not-greedy".to_string()]);
        let r = lebesgue_search(&b, 3, 100, 2).unwrap();
        assert!((r.value - 1.0).abs() < 1e-12);
    }

    #[test]
    fn lebesgue_exact_recovery() {
        let b = Basis::unit(l2(5));
        let f = [0.0, 2.0, 0.0, -1.0, 0.0];
        let r = lebesgue_lower(&b, &f, 2, &[vec![1, 3]]).unwrap();
        assert_eq!(r.value, 1.0);
        let r = lebesgue_lower(&b, &f, 1, &[vec![1]]).unwrap();
        assert!((r.value - 1.0).abs() < 1e-12);
    }

    #[test]
    fn lebesgue_matches_exhaustive_on_orthonormal() {
        let b = Basis::unit(l2(8));
        let mut rng = sampling::stream(5, 0);
        for _ in 0..20 {
            let f = sampling::gaussian_vector(8, &mut rng);
            let all: Vec<Vec<usize>> = subsets_up_to(8, 3).into_iter().filter(|s| s.len() == 3).collect();
            assert!((lebesgue_lower(&b, &f, 3, &all).unwrap().value - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn identity_phi_is_one() {
        let b = Basis::unit(l2(12));
        for a in [1.0, 0.5, 0.1] {
            let r = phi_lower(&b, a, &WitnessFamily::empty(), 100, 1).unwrap();
            assert!((r.value - 1.0).abs() < 1e-12);
        }
        assert!(phi_lower(&b, 0.0, &WitnessFamily::empty(), 1, 1).is_err());
    }

    #[test]
    fn phi_monotone_in_a() {
        let b = random_basis(8, 6);
        let mut prev = f64::INFINITY;
        for a in [0.05, 0.1, 0.2, 0.4, 0.8, 1.0] {
            let v = phi_lower(&b, a, &WitnessFamily::empty(), 60, 2).unwrap().value;
            assert!(v <= prev + 1e-12);
            prev = v;
        }
    }

    #[test]
    fn kmphi_identity_row() {
        let b = Basis::unit(l2(6));
        let rows = kmphi_transfer_check(&b, 1.0, 1.0, 1.0, &[1.0; 6], &[1.0, 0.5, 0.25], &WitnessFamily::empty(), 20, 0).unwrap();
        for r in rows {
            assert!((r.rhs - 0.25).abs() < 1e-15 && r.lhs >= 1.0 && !r.flagged);
        }
    }

    #[test]
    fn dyadic_examples() {
        let c = [1.0, 0.6, 0.3, 0.1];
        let layers = dyadic_layers_of(&c, 0.25, None).unwrap();
        assert_eq!(layers, vec![vec![0], vec![1], vec![2], vec![]]);
        assert_eq!(dyadic_level(0.25).unwrap(), 3);
        assert_eq!(dyadic_level(1.0).unwrap(), 1);
        let flat = [1.0, -1.0, 1.0];
        let layers = dyadic_layers_of(&flat, 0.3, None).unwrap();
        assert_eq!(layers[0], vec![0, 1, 2]);
        assert!(layers[1..].iter().all(|l| l.is_empty()));
        assert!(dyadic_layers_of(&[2.0], 0.5, None).is_err());
    }

    proptest! {
        #[test]
        fn dyadic_layers_partition(
            c in proptest::collection::vec(-1.0f64..=1.0, 1..40),
            a in 0.001f64..=1.0,
        ) {
            let layers = dyadic_layers_of(&c, a, None).unwrap();
            prop_assert!((layers.len() as f64) <= 2.0 - a.log2() + 1e-12);
            let mut all: Vec<usize> = layers.iter().flatten().copied().collect();
            all.sort_unstable();
            prop_assert_eq!(all, threshold_set(&c, a));
            let n = layers.len() - 1;
            for (k, layer) in layers.iter().enumerate() {
                for &i in layer {
                    let x = c[i].abs();
                    if k < n {
                        prop_assert!(x >= 2f64.powi(-(k as i32)));
                    }
                    if k > 0 {
                        prop_assert!(x < 2f64.powi(1 - k as i32));
                    }
                }
            }
        }
    }
}
