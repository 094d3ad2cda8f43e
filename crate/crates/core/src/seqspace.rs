//! Weights, fundamental functions, regularity predicates and the symmetric
//! sequence norms (ℓ_p, Lorentz `d_q(w)`, weak Lorentz `d_∞(w)`).
//!
//! Every space here is a finite truncation of length `N`. Regularity
//! verdicts are therefore statements about the truncated sequence only.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{check_dim, Error, Result};
use crate::sampling;

/// Non-negative weight with a strictly positive first entry.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct Weight {
    w: Vec<f64>,
    primitive: Vec<f64>,
}

impl Weight {
    pub fn new(w: Vec<f64>) -> Result<Self> {
        if w.is_empty() {
            return Err(Error::InvalidParameter("empty weight".into()));
        }
        if !(w[0] > 0.0) {
            return Err(Error::InvalidParameter("weight must have w_1 > 0".into()));
        }
        if w.iter().any(|x| !x.is_finite() || *x < 0.0) {
            return Err(Error::InvalidParameter(
                "weight entries must be finite and non-negative".into(),
            ));
        }
        let primitive = w
            .iter()
            .scan(0.0, |acc, x| {
                *acc += x;
                Some(*acc)
            })
            .collect();
        Ok(Self { w, primitive })
    }

    pub fn ones(n: usize) -> Self {
        Self::new(vec![1.0; n.max(1)]).expect("constant weight is valid")
    }

    /// Harmonic weight `w_n = 1/n`.
    pub fn harmonic(n: usize) -> Self {
        Self::new((1..=n.max(1)).map(|k| 1.0 / k as f64).collect()).expect("valid")
    }

    pub fn values(&self) -> &[f64] {
        &self.w
    }

    /// Primitive sequence `s_m = w_1 + ... + w_m`.
    pub fn primitive(&self) -> &[f64] {
        &self.primitive
    }

    pub fn len(&self) -> usize {
        self.w.len()
    }

    pub fn is_non_increasing(&self) -> bool {
        self.w.windows(2).all(|p| p[1] <= p[0])
    }

    pub fn is_empty(&self) -> bool {
        self.w.is_empty()
    }
}

impl TryFrom<Vec<f64>> for Weight {
    type Error = Error;
    fn try_from(w: Vec<f64>) -> Result<Self> {
        Weight::new(w)
    }
}

impl From<Weight> for Vec<f64> {
    fn from(w: Weight) -> Self {
        w.w
    }
}

/// `(Λ_1, ..., Λ_N)`; stored zero-based, accessed one-based via [`get`](Self::get).
#[derive(Debug, Clone, PartialEq)]
pub struct FundamentalFunction {
    lambda: Vec<f64>,
}

/// Result of checking the two monotonicity properties of a fundamental function.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MonotoneCheck {
    pub non_decreasing: bool,
    pub ratio_non_decreasing: bool,
}

impl FundamentalFunction {
    pub fn new(lambda: Vec<f64>) -> Result<Self> {
        if lambda.is_empty() {
            return Err(Error::InvalidParameter("empty fundamental function".into()));
        }
        if lambda.iter().any(|x| !x.is_finite() || *x <= 0.0) {
            return Err(Error::InvalidParameter(
                "fundamental function values must be positive".into(),
            ));
        }
        Ok(Self { lambda })
    }

    pub fn from_fn(n: usize, f: impl Fn(usize) -> f64) -> Result<Self> {
        Self::new((1..=n).map(f).collect())
    }

    pub fn values(&self) -> &[f64] {
        &self.lambda
    }

    pub fn len(&self) -> usize {
        self.lambda.len()
    }

    pub fn is_empty(&self) -> bool {
        self.lambda.is_empty()
    }

    /// `Λ_m` for `1 ≤ m ≤ N`.
    pub fn get(&self, m: usize) -> f64 {
        self.lambda[m - 1]
    }

    /// Checks `Λ_m` and `m/Λ_m` are non-decreasing, with relative slack `1e-12`.
    pub fn check_monotone(&self) -> MonotoneCheck {
        let tol = 1e-12;
        let non_decreasing = self
            .lambda
            .windows(2)
            .all(|p| p[1] >= p[0] * (1.0 - tol));
        let ratio_non_decreasing = self.lambda.windows(2).enumerate().all(|(i, p)| {
            let m = (i + 1) as f64;
            (m + 1.0) / p[1] >= (m / p[0]) * (1.0 - tol)
        });
        MonotoneCheck {
            non_decreasing,
            ratio_non_decreasing,
        }
    }

    /// `w = (Λ_n - Λ_{n-1})` with `Λ_0 = 0`.
    pub fn increment_weight(&self) -> Result<Weight> {
        let mut prev = 0.0;
        let w = self
            .lambda
            .iter()
            .map(|&l| {
                let d = (l - prev).max(0.0);
                prev = l;
                d
            })
            .collect();
        Weight::new(w)
    }

    /// `u = (Λ_n / n)`.
    pub fn average_weight(&self) -> Result<Weight> {
        Weight::new(
            self.lambda
                .iter()
                .enumerate()
                .map(|(i, l)| l / (i + 1) as f64)
                .collect(),
        )
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SeqNormKind {
    Lp { p: f64, dim: usize },
    Lorentz { q: f64, weight: Weight },
    WeakLorentz { weight: Weight },
}

/// A 1-symmetric norm (or quasi-norm when `p < 1` / `q < 1`) on `R^N`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "SeqNormKind", into = "SeqNormKind")]
pub struct SeqNorm {
    kind: SeqNormKind,
}

impl TryFrom<SeqNormKind> for SeqNorm {
    type Error = Error;
    fn try_from(kind: SeqNormKind) -> Result<Self> {
        match &kind {
            SeqNormKind::Lp { p, dim } => {
                if !(*p > 0.0) || !p.is_finite() {
                    return Err(Error::InvalidParameter(format!("p must be positive, got {p}")));
                }
                if *dim == 0 {
                    return Err(Error::InvalidParameter("dimension must be positive".into()));
                }
            }
            SeqNormKind::Lorentz { q, .. } => {
                if !(*q > 0.0) || !q.is_finite() {
                    return Err(Error::InvalidParameter(format!("q must be positive, got {q}")));
                }
            }
            SeqNormKind::WeakLorentz { .. } => {}
        }
        Ok(Self { kind })
    }
}

impl From<SeqNorm> for SeqNormKind {
    fn from(s: SeqNorm) -> Self {
        s.kind
    }
}

impl SeqNorm {
    pub fn lp(p: f64, dim: usize) -> Result<Self> {
        SeqNormKind::Lp { p, dim }.try_into()
    }

    pub fn l2(dim: usize) -> Self {
        Self::lp(2.0, dim).expect("valid")
    }

    pub fn lorentz(q: f64, weight: Weight) -> Result<Self> {
        SeqNormKind::Lorentz { q, weight }.try_into()
    }

    pub fn weak_lorentz(weight: Weight) -> Self {
        Self {
            kind: SeqNormKind::WeakLorentz { weight },
        }
    }

    pub fn kind(&self) -> &SeqNormKind {
        &self.kind
    }

    pub fn dim(&self) -> usize {
        match &self.kind {
            SeqNormKind::Lp { dim, .. } => *dim,
            SeqNormKind::Lorentz { weight, .. } | SeqNormKind::WeakLorentz { weight } => {
                weight.len()
            }
        }
    }

    /// Same kind of norm on a different dimension. Lorentz weights are
    /// truncated; extending them is an error.
    pub fn with_dim(&self, dim: usize) -> Result<Self> {
        let cut = |w: &Weight| -> Result<Weight> {
            if dim > w.len() {
                return Err(Error::InvalidParameter(format!(
                    "weight of length {} cannot describe dimension {dim}",
                    w.len()
                )));
            }
            Weight::new(w.values()[..dim].to_vec())
        };
        match &self.kind {
            SeqNormKind::Lp { p, .. } => Self::lp(*p, dim),
            SeqNormKind::Lorentz { q, weight } => Self::lorentz(*q, cut(weight)?),
            SeqNormKind::WeakLorentz { weight } => Ok(Self::weak_lorentz(cut(weight)?)),
        }
    }

    /// Whether the triangle inequality holds: `p ≥ 1`, `q ≥ 1` with a
    /// non-increasing weight, or a weak Lorentz norm reducing to `ℓ_∞`.
    pub fn is_locally_convex(&self) -> bool {
        match &self.kind {
            SeqNormKind::Lp { p, .. } => *p >= 1.0,
            SeqNormKind::Lorentz { q, weight } => *q >= 1.0 && weight.is_non_increasing(),
            SeqNormKind::WeakLorentz { weight } => weight.values()[1..].iter().all(|w| *w == 0.0),
        }
    }

    pub fn is_euclidean(&self) -> bool {
        matches!(self.kind, SeqNormKind::Lp { p, .. } if p == 2.0)
    }

    pub fn norm_eval(&self, f: &[f64]) -> Result<f64> {
        check_dim(self.dim(), f.len())?;
        Ok(self.eval(f))
    }

    /// Norm without the dimension check; `f` may be shorter than `dim`
    /// (missing entries are zero).
    pub(crate) fn eval(&self, f: &[f64]) -> f64 {
        match &self.kind {
            SeqNormKind::Lp { p, .. } => lp_norm(f, *p),
            SeqNormKind::Lorentz { q, weight } => {
                let a = rearrangement(f);
                let s = weight.primitive();
                let w = weight.values();
                let scale = a.first().copied().unwrap_or(0.0);
                if scale == 0.0 || !scale.is_finite() {
                    return scale;
                }
                if *q == 1.0 {
                    return a.iter().zip(w).map(|(x, w)| x * w).sum();
                }
                let mut acc = 0.0;
                for (n, &x) in a.iter().enumerate() {
                    if x == 0.0 {
                        break;
                    }
                    acc += (x / scale).powf(*q) * s[n].powf(q - 1.0) * w[n];
                }
                scale * acc.powf(1.0 / q)
            }
            SeqNormKind::WeakLorentz { weight } => {
                let a = rearrangement(f);
                let s = weight.primitive();
                a.iter()
                    .zip(s)
                    .map(|(x, s)| x * s)
                    .fold(0.0, f64::max)
            }
        }
    }

    /// Norm of a vector whose entry `i` is repeated `mult[i]` times.
    /// Only ℓ_p admits this without expanding the vector.
    pub(crate) fn eval_with_multiplicity(&self, f: &[f64], mult: &[f64]) -> Result<f64> {
        match &self.kind {
            SeqNormKind::Lp { p, .. } => {
                let scale = max_abs(f);
                if scale == 0.0 || !scale.is_finite() {
                    return Ok(scale);
                }
                Ok(scale
                    * f.iter()
                        .zip(mult)
                        .map(|(x, m)| m * (x.abs() / scale).powf(*p))
                        .sum::<f64>()
                        .powf(1.0 / p))
            }
            _ => Err(Error::Unsupported(
                "multiplicity-compressed evaluation needs an l_p host".into(),
            )),
        }
    }

    /// `Λ_t` in closed form for real `t`, when the kind has one.
    pub fn closed_form_lambda(&self, t: f64) -> Option<f64> {
        match &self.kind {
            SeqNormKind::Lp { p, .. } => Some(t.powf(1.0 / p)),
            _ => None,
        }
    }

    /// `Λ_m` = norm of the indicator of `{1..m}`, for `m = 1..N`.
    pub fn fundamental_function(&self) -> FundamentalFunction {
        let n = self.dim();
        let lambda = match &self.kind {
            SeqNormKind::Lp { p, .. } => (1..=n).map(|m| (m as f64).powf(1.0 / p)).collect(),
            SeqNormKind::Lorentz { q, weight } => {
                let s = weight.primitive();
                let w = weight.values();
                let mut acc = 0.0;
                (0..n)
                    .map(|k| {
                        acc += s[k].powf(q - 1.0) * w[k];
                        acc.powf(1.0 / q)
                    })
                    .collect()
            }
            SeqNormKind::WeakLorentz { weight } => weight.primitive().to_vec(),
        };
        FundamentalFunction::new(lambda).expect("indicator norms are positive")
    }
}

fn max_abs(f: &[f64]) -> f64 {
    f.iter().fold(0.0, |m, x| m.max(x.abs()))
}

fn lp_norm(f: &[f64], p: f64) -> f64 {
    if p == 1.0 {
        return f.iter().map(|x| x.abs()).sum();
    }
    let scale = max_abs(f);
    if scale == 0.0 || !scale.is_finite() {
        return scale;
    }
    if p == 2.0 {
        scale * f.iter().map(|x| (x / scale).powi(2)).sum::<f64>().sqrt()
    } else {
        scale * f.iter().map(|x| (x.abs() / scale).powf(p)).sum::<f64>().powf(1.0 / p)
    }
}

/// Non-increasing rearrangement of `|f|`.
pub fn rearrangement(f: &[f64]) -> Vec<f64> {
    let mut bits: Vec<u64> = f.iter().map(|x| x.abs().to_bits()).collect();
    bits.sort_unstable_by(|x, y| y.cmp(x));
    bits.into_iter().map(f64::from_bits).collect()
}

/// Outcome of a lower/upper regularity search on a truncated sequence.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RegularityVerdict {
    pub holds: bool,
    /// Smallest dilation `b` for which the inequality holds on the truncation.
    pub witness_b: Option<usize>,
    /// For a failed search: `(b, first violating m)` for every `b` tried.
    pub violations: Vec<(usize, usize)>,
    pub truncation: usize,
}

fn regularity_search(
    lambda: &FundamentalFunction,
    ok: impl Fn(f64, f64, f64) -> bool,
) -> Result<RegularityVerdict> {
    let n = lambda.len();
    if n < 4 {
        return Err(Error::InvalidParameter(
            "regularity search needs at least 4 terms".into(),
        ));
    }
    let b_max = ((n as f64).sqrt().floor() as usize).max(2);
    let mut violations = Vec::new();
    for b in 2..=b_max {
        let bad = (1..=n / b).find(|&m| !ok(lambda.get(m), lambda.get(b * m), b as f64));
        match bad {
            None => {
                return Ok(RegularityVerdict {
                    holds: true,
                    witness_b: Some(b),
                    violations,
                    truncation: n,
                })
            }
            Some(m) => violations.push((b, m)),
        }
    }
    Ok(RegularityVerdict {
        holds: false,
        witness_b: None,
        violations,
        truncation: n,
    })
}

const REG_TOL: f64 = 1e-12;

/// Lower regularity: some `b` with `2Λ_m ≤ Λ_{bm}` for every `m` with `bm ≤ N`.
pub fn has_lrp(lambda: &FundamentalFunction) -> Result<RegularityVerdict> {
    regularity_search(lambda, |lm, lbm, _| 2.0 * lm <= lbm * (1.0 + REG_TOL))
}

/// Upper regularity: some `b` with `2Λ_{bm} ≤ bΛ_m` for every `m` with `bm ≤ N`.
pub fn has_urp(lambda: &FundamentalFunction) -> Result<RegularityVerdict> {
    regularity_search(lambda, |lm, lbm, b| 2.0 * lbm <= b * lm * (1.0 + REG_TOL))
}

/// `r_m = (Σ_{n≤m} Λ_n/n) / Λ_m` for `m = 1..N`.
pub fn dini_ratio(lambda: &FundamentalFunction) -> Vec<f64> {
    let mut acc = 0.0;
    lambda
        .values()
        .iter()
        .enumerate()
        .map(|(i, l)| {
            acc += l / (i + 1) as f64;
            acc / l
        })
        .collect()
}

/// Largest observed `‖f‖_num / ‖f‖_den` over indicator vectors and `trials`
/// seeded probe vectors.
pub fn empirical_ratio(num: &SeqNorm, den: &SeqNorm, trials: usize, seed: u64) -> Result<f64> {
    check_dim(num.dim(), den.dim())?;
    let n = num.dim();
    let ratio = |f: &[f64]| {
        let d = den.eval(f);
        if d > 0.0 {
            num.eval(f) / d
        } else {
            0.0
        }
    };
    let indicators = (1..=n)
        .into_par_iter()
        .map(|m| {
            let f = vec![1.0; m];
            ratio(&f)
        })
        .reduce(|| 0.0, f64::max);
    let sampled = (0..trials)
        .into_par_iter()
        .map(|k| {
            let mut rng = sampling::stream(seed, k as u64);
            let f = sampling::probe_vector(n, k, &mut rng);
            ratio(&f)
        })
        .reduce(|| 0.0, f64::max);
    Ok(indicators.max(sampled))
}

/// Two-sided comparison of `d_q(w)` and `d_q(w')`: the largest of the two
/// observed ratios.
pub fn lorentz_equiv_check(
    w: &Weight,
    w_prime: &Weight,
    q: f64,
    trials: usize,
    seed: u64,
) -> Result<f64> {
    check_dim(w.len(), w_prime.len())?;
    let a = SeqNorm::lorentz(q, w.clone())?;
    let b = SeqNorm::lorentz(q, w_prime.clone())?;
    Ok(empirical_ratio(&a, &b, trials, seed)?.max(empirical_ratio(&b, &a, trials, seed)?))
}
