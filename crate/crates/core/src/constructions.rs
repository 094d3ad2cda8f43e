//! The rotation pair, the `X_η` transform, the DKK space `Y[X, S, σ]` and the
//! composite constructions built from them.

use std::sync::Arc;

use nalgebra::DMatrix;

use crate::basis::{affinity, cc_block_sequence, direct_sum, Basis, NormedSpace};
use crate::error::{check_dim, Error, Result};
use crate::estimators::{Provenance, Witness, WitnessFamily};
use crate::partition::OrderedPartition;
use crate::sampling;
use crate::seqspace::{has_lrp, RegularityVerdict, SeqNorm, SeqNormKind, Weight};

/// Largest number of coordinates a construction may materialize.
pub const DEFAULT_DIM_CAP: usize = 1 << 17;

/// Relative slack on the `R ≥ √2` hypothesis.
const ROTATION_SLACK: f64 = 1e-12;

/// `h_1 = (1, 0)`, `h_2 = (cos 2α, sin 2α)` with `sin α = 1/R`, and the
/// biorthogonal functionals `h*_1 = C(sin 2α, -cos 2α)`, `h*_2 = C(0, 1)`,
/// `C = R² / (2√(R² - 1))`.
#[derive(Debug, Clone, PartialEq)]
pub struct RotationPair {
    pub r: f64,
    pub alpha: f64,
    pub h1: [f64; 2],
    pub h2: [f64; 2],
    pub h1_star: [f64; 2],
    pub h2_star: [f64; 2],
}

impl RotationPair {
    pub fn new(r: f64) -> Result<Self> {
        if !r.is_finite() || r < 2f64.sqrt() * (1.0 - ROTATION_SLACK) {
            return Err(Error::InvalidParameter(format!("rotation needs R ≥ √2, got {r}")));
        }
        let r = r.max(2f64.sqrt());
        let inv = 1.0 / r;
        let alpha = inv.asin();
        let c2 = 1.0 - 2.0 * inv * inv;
        let s2 = 2.0 * inv * (1.0 - inv * inv).max(0.0).sqrt();
        let big_c = r * r / (2.0 * (r * r - 1.0).sqrt());
        Ok(Self {
            r,
            alpha,
            h1: [1.0, 0.0],
            h2: [c2, s2],
            h1_star: [big_c * s2, -big_c * c2],
            h2_star: [0.0, big_c],
        })
    }

    /// `R² / (2√(R² - 1))`, the Euclidean norm of both functionals.
    pub fn dual_norm(&self) -> f64 {
        self.r * self.r / (2.0 * (self.r * self.r - 1.0).sqrt())
    }

    /// Euclidean norm of `x h_1 + y h_2`.
    pub fn combination_norm(&self, x: f64, y: f64) -> f64 {
        (x * self.h1[0] + y * self.h2[0]).hypot(x * self.h1[1] + y * self.h2[1])
    }
}

/// `η = (λ_n, μ_n)` with `λ_n μ_n ≥ √2`.
#[derive(Debug, Clone, PartialEq)]
pub struct EtaSequence {
    pairs: Vec<(f64, f64)>,
}

impl EtaSequence {
    pub fn new(pairs: Vec<(f64, f64)>) -> Result<Self> {
        for (n, &(l, m)) in pairs.iter().enumerate() {
            if !(l > 0.0 && m > 0.0) || !l.is_finite() || !m.is_finite() {
                return Err(Error::InvalidParameter(format!("η pair {n} is not positive")));
            }
            if l * m < 2f64.sqrt() * (1.0 - ROTATION_SLACK) {
                return Err(Error::InvalidParameter(format!(
                    "η pair {n} has λμ = {} < √2",
                    l * m
                )));
            }
        }
        Ok(Self { pairs })
    }

    pub fn pairs(&self) -> &[(f64, f64)] {
        &self.pairs
    }

    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }
}

/// `X_η`: `y_{2n-1} = λ_n L_n(h_{1,λ_nμ_n})`, `y_{2n} = λ_n L_n(h_{2,λ_nμ_n})`
/// where `L_n` maps `(1,0) ↦ x_{2n-1}`, `(0,1) ↦ x_{2n}`. The duals are
/// `y*_{2n-1} = L_n(h*_1)/λ_n`, `y*_{2n} = L_n(h*_2)/λ_n`.
pub fn eta_transform(b: &Basis, eta: &EtaSequence) -> Result<Basis> {
    let n = b.dim();
    if !n.is_multiple_of(2) {
        return Err(Error::InvalidParameter("X_η needs an even-dimensional basis".into()));
    }
    check_dim(n / 2, eta.len())?;
    let mut fwd = DMatrix::zeros(n, n);
    let mut inv = DMatrix::zeros(n, n);
    for (k, &(l, m)) in eta.pairs().iter().enumerate() {
        let rot = RotationPair::new(l * m)?;
        let (i, j) = (2 * k, 2 * k + 1);
        fwd[(i, i)] = l * rot.h1[0];
        fwd[(j, i)] = l * rot.h1[1];
        fwd[(i, j)] = l * rot.h2[0];
        fwd[(j, j)] = l * rot.h2[1];
        inv[(i, i)] = rot.h1_star[0] / l;
        inv[(i, j)] = rot.h1_star[1] / l;
        inv[(j, i)] = rot.h2_star[0] / l;
        inv[(j, j)] = rot.h2_star[1] / l;
    }
    let synth = b.synth_matrix() * fwd;
    let anal = inv * b.anal_matrix();
    Basis::from_pair(b.space().clone(), synth, anal)
}

/// `Y[X, S, σ]`: `R^N` normed by `‖Q_σ f‖_S + ‖Σ_n v*_n(f) x_n‖_X`.
///
/// Coordinates may carry multiplicities: coordinate `i` then stands for
/// `mult[i]` equal coordinates of the uncompressed space, which is how block
/// sizes far beyond memory are represented. Multiplicities need a host with
/// a closed-form fundamental function.
#[derive(Debug, Clone)]
pub struct DkkSpace {
    base: Basis,
    host: SeqNorm,
    partition: OrderedPartition,
    mult: Option<Vec<f64>>,
    sizes: Vec<f64>,
    scales: Vec<f64>,
}

impl DkkSpace {
    pub fn new(base: Basis, host: SeqNorm, partition: OrderedPartition) -> Result<Self> {
        check_dim(partition.num_blocks(), base.dim())?;
        check_dim(partition.dim(), host.dim())?;
        let lambda = host.fundamental_function();
        let sizes = partition.sizes().iter().map(|&s| s as f64).collect();
        let scales = partition.sizes().iter().map(|&s| lambda.get(s)).collect();
        Ok(Self {
            base,
            host,
            partition,
            mult: None,
            sizes,
            scales,
        })
    }

    pub fn with_multiplicity(
        base: Basis,
        host: SeqNorm,
        partition: OrderedPartition,
        mult: Vec<f64>,
    ) -> Result<Self> {
        check_dim(partition.num_blocks(), base.dim())?;
        check_dim(partition.dim(), mult.len())?;
        if mult.iter().any(|m| !(m.is_finite() && *m >= 1.0)) {
            return Err(Error::InvalidParameter("multiplicities must be finite and ≥ 1".into()));
        }
        let sizes: Vec<f64> = partition
            .blocks()
            .map(|r| mult[r].iter().sum::<f64>())
            .collect();
        if sizes.iter().any(|s| !s.is_finite()) {
            return Err(Error::ResourceLimit("block size overflows f64".into()));
        }
        let mut scales = Vec::with_capacity(sizes.len());
        for &t in &sizes {
            let l = host.closed_form_lambda(t).ok_or_else(|| {
                Error::Unsupported("compressed coordinates need an l_p host".into())
            })?;
            scales.push(l);
        }
        Ok(Self {
            base,
            host,
            partition,
            mult: Some(mult),
            sizes,
            scales,
        })
    }

    pub fn dim(&self) -> usize {
        self.partition.dim()
    }

    pub fn base(&self) -> &Basis {
        &self.base
    }

    pub fn host(&self) -> &SeqNorm {
        &self.host
    }

    pub fn partition(&self) -> &OrderedPartition {
        &self.partition
    }

    pub fn multiplicity(&self) -> Option<&[f64]> {
        self.mult.as_deref()
    }

    /// Uncompressed block sizes `|σ_n|`.
    pub fn block_sizes(&self) -> &[f64] {
        &self.sizes
    }

    /// `Λ_{|σ_n|}`.
    pub fn scales(&self) -> &[f64] {
        &self.scales
    }

    pub fn is_locally_convex(&self) -> bool {
        self.host.is_locally_convex() && self.base.space().is_locally_convex()
    }

    fn weight(&self, i: usize) -> f64 {
        self.mult.as_ref().map_or(1.0, |m| m[i])
    }

    /// Number of uncompressed coordinates in a set of coordinates.
    pub fn cardinality(&self, set: &[usize]) -> f64 {
        set.iter().map(|&i| self.weight(i)).sum()
    }

    /// `(Q_σ f, (v*_n(f))_n)`.
    pub fn decompose(&self, f: &[f64]) -> (Vec<f64>, Vec<f64>) {
        let mut q = f.to_vec();
        let mut c = Vec::with_capacity(self.partition.num_blocks());
        for (n, r) in self.partition.blocks().enumerate() {
            let total: f64 = r.clone().map(|i| self.weight(i) * f[i]).sum();
            let ave = total / self.sizes[n];
            for x in &mut q[r] {
                *x -= ave;
            }
            c.push(self.scales[n] * ave);
        }
        (q, c)
    }

    /// `(‖Q_σ f‖_S, ‖Σ v*_n(f) x_n‖_X)`.
    pub fn norm_parts(&self, f: &[f64]) -> (f64, f64) {
        let (q, c) = self.decompose(f);
        let qn = match &self.mult {
            Some(m) => self
                .host
                .eval_with_multiplicity(&q, m)
                .expect("host checked at construction"),
            None => self.host.eval(&q),
        };
        (qn, self.base.cnorm(&c))
    }

    pub(crate) fn norm(&self, f: &[f64]) -> f64 {
        let (a, b) = self.norm_parts(f);
        a + b
    }

    /// `S(f) = (Q_σ f, Σ v*_n(f) x_n)`, the second part in `X` coordinates.
    pub fn split(&self, f: &[f64]) -> Result<(Vec<f64>, Vec<f64>)> {
        check_dim(self.dim(), f.len())?;
        let (q, c) = self.decompose(f);
        Ok((q, self.base.synth(&c)))
    }

    /// `T(g, x) = g + Σ x*_n(x) v_n`.
    pub fn compose(&self, g: &[f64], x: &[f64]) -> Result<Vec<f64>> {
        check_dim(self.dim(), g.len())?;
        check_dim(self.base.dim(), x.len())?;
        let c = self.base.anal(x);
        let mut f = g.to_vec();
        for (n, r) in self.partition.blocks().enumerate() {
            let v = c[n] / self.scales[n];
            for y in &mut f[r] {
                *y += v;
            }
        }
        Ok(f)
    }

    /// `z*_k(g, x) = e*_k(g) + x*_n(x)/Λ_{|σ_n|}` with `k ∈ σ_n`.
    pub fn unit_dual(&self, k: usize, g: &[f64], x: &[f64]) -> Result<f64> {
        if k >= self.dim() {
            return Err(Error::IndexOutOfRange {
                index: k,
                len: self.dim(),
            });
        }
        let n = self.partition.block_of(k);
        let c = self.base.anal(x);
        Ok(g[k] + c[n] / self.scales[n])
    }

    /// `Σ_{i∈σ_n} e_i`.
    pub fn block_indicator(&self, n: usize) -> Vec<f64> {
        let mut f = vec![0.0; self.dim()];
        f[self.partition.block(n)].fill(1.0);
        f
    }

    /// Unit vector system of the space.
    pub fn unit_basis(self: &Arc<Self>) -> Basis {
        Basis::unit(Arc::new(NormedSpace::Dkk(self.clone())))
    }
}

/// Normalized block basis `V[S, σ]` restricted to the first `blocks` blocks,
/// as a basis of its span in `S` truncated to those blocks.
pub fn block_basis(host: &SeqNorm, sigma: &OrderedPartition, blocks: usize) -> Result<Basis> {
    if blocks == 0 || blocks > sigma.num_blocks() {
        return Err(Error::InvalidParameter(format!("cannot take {blocks} blocks")));
    }
    let len = sigma.cumulative(blocks);
    let s = host.with_dim(len)?;
    let lambda = s.fundamental_function();
    let e = Basis::unit(Arc::new(NormedSpace::Seq(s)));
    let sets: Vec<Vec<usize>> = (0..blocks).map(|n| sigma.block(n).collect()).collect();
    let span = cc_block_sequence(&e, &sets, None)?;
    let inv: Vec<f64> = (0..blocks).map(|n| 1.0 / lambda.get(sigma.sizes()[n])).collect();
    affinity(&span, &inv)
}

/// `Y[X_η, S, σ]` over paired blocks `|σ_{2n-1}| = |σ_{2n}| = s_n`.
#[derive(Debug, Clone)]
pub struct PairedDkk {
    pub space: Arc<DkkSpace>,
    pub basis: Basis,
    pub x_eta: Basis,
    pub eta: EtaSequence,
    pub pair_sizes: Vec<usize>,
}

impl PairedDkk {
    pub fn new(base: &Basis, host: &SeqNorm, sigma: OrderedPartition, eta: EtaSequence) -> Result<Self> {
        let pair_sizes = sigma.pair_sizes()?;
        let x_eta = eta_transform(base, &eta)?;
        let space = Arc::new(DkkSpace::new(x_eta.clone(), host.clone(), sigma)?);
        let basis = space.unit_basis();
        Ok(Self {
            space,
            basis,
            x_eta,
            eta,
            pair_sizes,
        })
    }

    pub fn pairs(&self) -> usize {
        self.pair_sizes.len()
    }

    /// `a 1_{σ_{2n-1}} + b 1_{σ_{2n}}` for the zero-based pair `n`.
    pub fn pair_vector(&self, n: usize, a: f64, b: f64) -> Vec<f64> {
        let p = self.space.partition();
        let mut f = vec![0.0; p.dim()];
        f[p.block(2 * n)].fill(a);
        f[p.block(2 * n + 1)].fill(b);
        f
    }

    /// `R_n(a, b)` evaluated in `Y`.
    pub fn r(&self, n: usize, a: f64, b: f64) -> f64 {
        self.space.norm(&self.pair_vector(n, a, b))
    }

    /// `Λ_{s_n} ‖a y_{2n-1} + b y_{2n}‖_X`.
    pub fn r_from_pair(&self, n: usize, a: f64, b: f64) -> f64 {
        let mut c = vec![0.0; self.x_eta.dim()];
        c[2 * n] = a;
        c[2 * n + 1] = b;
        self.space.scales()[2 * n] * self.x_eta.cnorm(&c)
    }

    /// `M_n`: coordinates in the first `n` pairs (one-based `n`).
    pub fn m(&self, n: usize) -> usize {
        self.space.partition().cumulative(2 * n)
    }

    /// Signed pair `-1_{σ_{2n-1}} + 1_{σ_{2n}}` projected onto `σ_{2n}`.
    pub fn ktilde_witness(&self, n: usize) -> Witness {
        let p = self.space.partition();
        Witness {
            label: format!("pair-{}", n + 1),
            provenance: Provenance::Construction,
            coeffs: self.pair_vector(n, -1.0, 1.0),
            set: p.block(2 * n + 1).collect(),
        }
    }

    pub fn ktilde_witnesses(&self) -> WitnessFamily {
        WitnessFamily::new((0..self.pairs()).map(|n| self.ktilde_witness(n)).collect())
    }
}

/// `η = (s_n/Λ_{s_n}, Λ_{s_n})` and the space `Y[X_η, S, σ]`.
pub fn dkkw_assembly(base: &Basis, host: &SeqNorm, sigma: OrderedPartition) -> Result<PairedDkk> {
    let sizes = sigma.pair_sizes()?;
    if let Some(s) = sizes.iter().find(|&&s| s < 2) {
        return Err(Error::InvalidParameter(format!("paired block size {s} < 2")));
    }
    check_dim(sigma.dim(), host.dim())?;
    let lambda = host.fundamental_function();
    let eta = EtaSequence::new(
        sizes
            .iter()
            .map(|&s| (s as f64 / lambda.get(s), lambda.get(s)))
            .collect(),
    )?;
    PairedDkk::new(base, host, sigma, eta)
}

fn check_cap(n: usize, cap: usize) -> Result<()> {
    if n > cap {
        return Err(Error::ResourceLimit(format!(
            "construction needs {n} coordinates, cap is {cap}"
        )));
    }
    Ok(())
}

/// `V[S, σ]` on the first `L` blocks interleaved with a basis of `X`, max norm.
fn direct_sum_base(host: &SeqNorm, sigma: &OrderedPartition, x: Option<&Basis>, l: usize) -> Result<Basis> {
    let v = block_basis(host, sigma, l)?;
    let x = match x {
        Some(b) => {
            check_dim(l, b.dim())?;
            b.clone()
        }
        None => Basis::unit(Arc::new(NormedSpace::Seq(SeqNorm::l2(l)))),
    };
    direct_sum(&v, &x)
}

/// Paired partition with `|σ_{2n-1}| = |σ_{2n}| = 2^n`, `n = 1..levels`.
pub fn dyadic_pairs(levels: usize) -> Result<OrderedPartition> {
    if levels >= 40 {
        return Err(Error::ResourceLimit(format!("{levels} levels")));
    }
    OrderedPartition::paired(&(1..=levels).map(|n| 1usize << n).collect::<Vec<_>>())
}

/// The M-bounded basis with linearly growing `k̃_m`.
#[derive(Debug, Clone)]
pub struct ThmA {
    pub dkk: PairedDkk,
    pub witnesses: WitnessFamily,
    pub levels: usize,
}

impl ThmA {
    pub fn basis(&self) -> &Basis {
        &self.dkk.basis
    }

    /// `M_n` for `n = 1..levels`.
    pub fn scales(&self) -> Vec<usize> {
        (1..=self.levels).map(|n| self.dkk.m(n)).collect()
    }
}

/// Unit vector system of `Y[X_η, S, σ]` with `|σ_{2n-1}| = |σ_{2n}| = 2^n`,
/// where `X` is `V[S, σ]` on the first `levels` blocks interleaved with the
/// given basis (Euclidean by default) of dimension `levels`.
pub fn build_thm_a(host: &SeqNorm, x: Option<&Basis>, levels: usize, cap: usize) -> Result<ThmA> {
    if levels < 2 {
        return Err(Error::InvalidParameter("thmA needs at least 2 levels".into()));
    }
    let sigma = dyadic_pairs(levels)?;
    check_cap(sigma.dim(), cap)?;
    let s = host.with_dim(sigma.dim())?;
    let base = direct_sum_base(&s, &sigma, x, levels)?;
    let dkk = dkkw_assembly(&base, &s, sigma)?;
    let witnesses = dkk.ktilde_witnesses();
    Ok(ThmA {
        dkk,
        witnesses,
        levels,
    })
}

/// The vectors `f = Σ_{k∈σ'_{2n-1}} 1_{σ_k}/Λ_{|σ_k|}` and the analogous `g`
/// over `σ'_{2n}`, in outer coordinates.
#[derive(Debug, Clone)]
pub struct MainAWitness {
    pub level: usize,
    pub f: Vec<f64>,
    pub g: Vec<f64>,
    pub f_support: Vec<usize>,
    pub g_support: Vec<usize>,
    /// Outer blocks (= inner coordinates) carrying `f` and `g`.
    pub f_blocks: std::ops::Range<usize>,
    pub g_blocks: std::ops::Range<usize>,
}

/// Two-stage squeeze-symmetric construction.
#[derive(Debug, Clone)]
pub struct MainA {
    pub inner: PairedDkk,
    pub outer: Arc<DkkSpace>,
    pub basis: Basis,
    pub witnesses: Vec<MainAWitness>,
    pub lrp: RegularityVerdict,
    pub levels: usize,
    pub compressed: bool,
}

impl MainA {
    /// Uncompressed coordinates in a set of outer coordinates.
    pub fn cardinality(&self, set: &[usize]) -> f64 {
        self.outer.cardinality(set)
    }

    /// Outer coordinates of block `k` (the two cells when compressed).
    pub fn block(&self, k: usize) -> std::ops::Range<usize> {
        self.outer.partition().block(k)
    }

    /// `-f + g` for each level, with the greedy set carried by `f`.
    pub fn qg_witnesses(&self) -> WitnessFamily {
        WitnessFamily::new(
            self.witnesses
                .iter()
                .map(|w| Witness {
                    label: format!("level-{}", w.level),
                    provenance: Provenance::Construction,
                    coeffs: w.g.iter().zip(&w.f).map(|(g, f)| g - f).collect(),
                    set: w.f_support.clone(),
                })
                .collect(),
        )
    }
}

/// Inner space `Y[X_{0,η}, S, σ']` with `|σ'_{2n-1}| = |σ'_{2n}| = 2^n`, then
/// outer space `Y[X_1, S, σ]` with `|σ_k| = 2^k` over the unit vector system
/// `X_1` of the inner space. For `ℓ_p` hosts each outer block is stored as two
/// cells of `2^{k-1}` coordinates each; other hosts are materialized and
/// limited by `cap`.
pub fn build_main_a(host: &SeqNorm, levels: usize, cap: usize) -> Result<MainA> {
    if levels < 2 {
        return Err(Error::InvalidParameter("mainA needs at least 2 levels".into()));
    }
    let sigma_p = dyadic_pairs(levels)?;
    let inner_dim = sigma_p.dim();
    check_cap(inner_dim, cap)?;
    let s_inner = host.with_dim(inner_dim)?;

    let probe_dim = if host.closed_form_lambda(1.0).is_some() {
        1 << 16
    } else {
        host.dim().min(1 << 16)
    };
    let lrp = has_lrp(&host.with_dim(probe_dim)?.fundamental_function())?;
    if !lrp.holds {
        log::warn!("host fundamental function fails LRP on its truncation; squeeze-symmetry may degrade");
    }

    let base = direct_sum_base(&s_inner, &sigma_p, None, levels)?;
    let inner = dkkw_assembly(&base, &s_inner, sigma_p.clone())?;

    let compressed = host.closed_form_lambda(1.0).is_some();
    let outer = if compressed {
        if inner_dim > 1020 {
            return Err(Error::ResourceLimit(format!(
                "outer block sizes 2^{inner_dim} exceed the f64 range"
            )));
        }
        let cells = OrderedPartition::uniform(2, inner_dim)?;
        let mult: Vec<f64> = (1..=inner_dim)
            .flat_map(|k| {
                let h = 2f64.powi(k as i32 - 1);
                [h, h]
            })
            .collect();
        DkkSpace::with_multiplicity(inner.basis.clone(), host.clone(), cells, mult)?
    } else {
        if inner_dim >= 63 {
            return Err(Error::ResourceLimit(format!(
                "outer dimension 2^{} - 2 is too large to materialize",
                inner_dim + 1
            )));
        }
        let sizes: Vec<usize> = (1..=inner_dim).map(|k| 1usize << k).collect();
        let sigma = OrderedPartition::new(sizes)?;
        check_cap(sigma.dim(), cap)?;
        let s_outer = host.with_dim(sigma.dim())?;
        DkkSpace::new(inner.basis.clone(), s_outer, sigma)?
    };
    let outer = Arc::new(outer);
    let basis = outer.unit_basis();

    let witnesses = (0..levels)
        .map(|j| {
            let fb = sigma_p.block(2 * j);
            let gb = sigma_p.block(2 * j + 1);
            let build = |blocks: std::ops::Range<usize>| {
                let mut v = vec![0.0; outer.dim()];
                let mut support = Vec::new();
                for k in blocks {
                    let r = outer.partition().block(k);
                    v[r.clone()].fill(1.0 / outer.scales()[k]);
                    support.extend(r);
                }
                (v, support)
            };
            let (f, f_support) = build(fb.clone());
            let (g, g_support) = build(gb.clone());
            MainAWitness {
                level: j + 1,
                f,
                g,
                f_support,
                g_support,
                f_blocks: fb,
                g_blocks: gb,
            }
        })
        .collect();

    Ok(MainA {
        inner,
        outer,
        basis,
        witnesses,
        lrp,
        levels,
        compressed,
    })
}

/// Democratic basis whose lower super-democracy function stays bounded.
#[derive(Debug, Clone)]
pub struct DemNonUcc {
    pub dkk: PairedDkk,
    /// `s_n` of the first pair; pairs run over `s_n = first, ..., first + pairs - 1`.
    pub first: usize,
}

impl DemNonUcc {
    pub fn basis(&self) -> &Basis {
        &self.dkk.basis
    }

    /// Alternating pairs `1_{σ_{2n-1}} - 1_{σ_{2n}}`.
    pub fn alternating_witnesses(&self) -> Vec<(usize, Vec<f64>)> {
        (0..self.dkk.pairs())
            .map(|n| (2 * self.dkk.pair_sizes[n], self.dkk.pair_vector(n, 1.0, -1.0)))
            .collect()
    }
}

/// `Y[(V[S, σ])_η, S, σ]` with `|σ_{2n-1}| = |σ_{2n}| = n` for `n = 2..=max_pair`
/// and `η = (1, Λ_n)`.
pub fn build_dem_nonucc(host: &SeqNorm, max_pair: usize, cap: usize) -> Result<DemNonUcc> {
    if max_pair < 2 {
        return Err(Error::InvalidParameter("need at least the pair n = 2".into()));
    }
    if !host.is_locally_convex() {
        return Err(Error::InvalidParameter("host must be locally convex".into()));
    }
    let first = 2;
    let sizes: Vec<usize> = (first..=max_pair).collect();
    let sigma = OrderedPartition::paired(&sizes)?;
    check_cap(sigma.dim(), cap)?;
    let s = host.with_dim(sigma.dim())?;
    let lambda = s.fundamental_function();
    let base = block_basis(&s, &sigma, sigma.num_blocks())?;
    let eta = EtaSequence::new(sizes.iter().map(|&n| (1.0, lambda.get(n))).collect())?;
    let dkk = PairedDkk::new(&base, &s, sigma, eta)?;
    Ok(DemNonUcc { dkk, first })
}

/// Largest two-sided ratio between `‖Σ a_n z_n‖` over `U²` and over `(U²)_η`,
/// `η = (1, μ_n)`, for non-negative coefficient vectors.
pub fn eq_positive_check(u: &Basis, mu: &[f64], trials: usize, seed: u64) -> Result<f64> {
    check_dim(u.dim(), mu.len())?;
    let u2 = direct_sum(u, u)?;
    let eta = EtaSequence::new(mu.iter().map(|&m| (1.0, m)).collect())?;
    let ue = eta_transform(&u2, &eta)?;
    let n = u2.dim();
    let ratio = |a: &[f64]| {
        let (x, y) = (u2.cnorm(a), ue.cnorm(a));
        if x == 0.0 && y == 0.0 {
            1.0
        } else {
            (x / y).max(y / x)
        }
    };
    let mut best = 1.0f64;
    for k in 0..trials {
        let mut rng = sampling::stream(seed, k as u64);
        let mut a: Vec<f64> = match k % 3 {
            0 => {
                let p = rand::Rng::random_range(&mut rng, 0..n / 2);
                let mut a = vec![0.0; n];
                a[2 * p] = rand::Rng::random::<f64>(&mut rng);
                a[2 * p + 1] = rand::Rng::random::<f64>(&mut rng);
                a
            }
            _ => sampling::probe_vector(n, k, &mut rng),
        };
        for x in &mut a {
            *x = x.abs();
        }
        best = best.max(ratio(&a));
    }
    Ok(best)
}

/// Observed constants `C`, `C'` in `‖f‖_{d_∞(w)} ≤ C‖f‖_Y` and
/// `‖f‖_Y ≤ C'‖f‖_{d_1(u)}` with `w = (Λ_n - Λ_{n-1})`, `u = (Λ_n/n)`.
pub fn lorentz_sandwich_check(space: &DkkSpace, trials: usize, seed: u64) -> Result<(f64, f64)> {
    if space.multiplicity().is_some() {
        return Err(Error::Unsupported("sandwich check needs materialized coordinates".into()));
    }
    let lambda = space.host().fundamental_function();
    let lower = SeqNorm::weak_lorentz(lambda.increment_weight()?);
    let upper = SeqNorm::lorentz(1.0, lambda.average_weight()?)?;
    let n = space.dim();
    let mut c = 0.0f64;
    let mut c2 = 0.0f64;
    let mut probe = |f: &[f64]| {
        let y = space.norm(f);
        if y > 0.0 {
            c = c.max(lower.eval(f) / y);
            c2 = c2.max(y / upper.eval(f));
        }
    };
    for k in 0..n.min(256) {
        let mut f = vec![0.0; n];
        f[k] = 1.0;
        probe(&f);
    }
    for b in 0..space.partition().num_blocks() {
        probe(&space.block_indicator(b));
    }
    for k in 0..trials {
        let mut rng = sampling::stream(seed, k as u64);
        probe(&sampling::probe_vector(n, k, &mut rng));
    }
    Ok((c, c2))
}

/// Weight `w_n = Λ_n - Λ_{n-1}` of a host, for reference norms.
pub fn increment_weight(host: &SeqNorm) -> Result<Weight> {
    host.fundamental_function().increment_weight()
}

/// Host descriptor `l2`, `l1`, `lp:P`, `lorentz:Q:FILE` or `weak:FILE`, where
/// `FILE` holds one weight per line (or comma separated).
pub fn parse_host(desc: &str, dim: usize) -> Result<SeqNorm> {
    let parts: Vec<&str> = desc.split(':').collect();
    let read_weight = |path: &str| -> Result<Weight> {
        let text = std::fs::read_to_string(path)?;
        let w: std::result::Result<Vec<f64>, _> = text
            .split(|c: char| c == ',' || c.is_whitespace())
            .filter(|t| !t.is_empty())
            .map(str::parse::<f64>)
            .collect();
        Weight::new(w.map_err(|e| Error::InvalidParameter(format!("bad weight entry: {e}")))?)
    };
    let num = |s: &str| -> Result<f64> {
        s.parse::<f64>()
            .map_err(|_| Error::InvalidParameter(format!("bad number {s:?}")))
    };
    match parts.as_slice() {
        ["l2"] => Ok(SeqNorm::l2(dim)),
        ["l1"] => SeqNorm::lp(1.0, dim),
        ["lp", p] => SeqNorm::lp(num(p)?, dim),
        ["lorentz", q, file] => SeqNorm::lorentz(num(q)?, read_weight(file)?),
        ["weak", file] => Ok(SeqNorm::weak_lorentz(read_weight(file)?)),
        ["lorentz-harmonic", q] => SeqNorm::lorentz(num(q)?, Weight::harmonic(dim)),
        _ => Err(Error::InvalidParameter(format!("unknown host {desc:?}"))),
    }
}

/// True when the host is `ℓ_2`.
pub fn is_l2(host: &SeqNorm) -> bool {
    matches!(host.kind(), SeqNormKind::Lp { p, .. } if *p == 2.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::partition::{average_project, complement_project};
    use proptest::prelude::*;

    const SQRT2: f64 = std::f64::consts::SQRT_2;

    fn dot(a: &[f64; 2], b: &[f64; 2]) -> f64 {
        a[0] * b[0] + a[1] * b[1]
    }

    #[test]
    fn rotation_at_sqrt2() {
        let r = RotationPair::new(SQRT2).unwrap();
        assert!(r.h2[0].abs() < 1e-15 && (r.h2[1] - 1.0).abs() < 1e-15);
        assert!((r.h1_star[0] - 1.0).abs() < 1e-15 && r.h1_star[1].abs() < 1e-15);
        assert!((r.h2_star[1] - 1.0).abs() < 1e-15);
        assert!((r.combination_norm(1.0, -1.0) - SQRT2).abs() < 1e-15);
    }

    #[test]
    fn rotation_at_two() {
        let r = RotationPair::new(2.0).unwrap();
        let s3 = 3f64.sqrt();
        assert!((r.h2[0] - 0.5).abs() < 1e-15 && (r.h2[1] - s3 / 2.0).abs() < 1e-15);
        assert!((r.h1_star[0] - 1.0).abs() < 1e-15);
        assert!((r.h1_star[1] + 1.0 / s3).abs() < 1e-15);
        assert!((r.h2_star[1] - 2.0 / s3).abs() < 1e-15);
        // independent oracle: invert [h1 h2]
        let m = DMatrix::from_column_slice(2, 2, &[r.h1[0], r.h1[1], r.h2[0], r.h2[1]]);
        let inv = m.try_inverse().unwrap();
        assert!((inv[(0, 1)] - r.h1_star[1]).abs() < 1e-14);
        assert!((inv[(1, 1)] - r.h2_star[1]).abs() < 1e-14);
    }

    #[test]
    fn rotation_rejects_small_r() {
        assert!(RotationPair::new(1.4).is_err());
        assert!(RotationPair::new(f64::NAN).is_err());
        assert!(EtaSequence::new(vec![(1.0, 1.2)]).is_err());
        assert!(EtaSequence::new(vec![(-1.0, -2.0)]).is_err());
    }

    proptest! {
        #[test]
        fn rotation_identities(r in 1.4143f64..100.0, x in 0.0f64..10.0, y in 0.0f64..10.0) {
            let p = RotationPair::new(r).unwrap();
            prop_assert!((dot(&p.h1_star, &p.h1) - 1.0).abs() < 1e-12);
            prop_assert!(dot(&p.h1_star, &p.h2).abs() < 1e-12);
            prop_assert!(dot(&p.h2_star, &p.h1).abs() < 1e-12);
            prop_assert!((dot(&p.h2_star, &p.h2) - 1.0).abs() < 1e-12);
            prop_assert!((p.h2[0].hypot(p.h2[1]) - 1.0).abs() < 1e-12);
            prop_assert!(((p.h1[0] - p.h2[0]).hypot(p.h1[1] - p.h2[1]) - 2.0 / r).abs() < 1e-12);
            prop_assert!((p.h1_star[0].hypot(p.h1_star[1]) - p.dual_norm()).abs() < 1e-10 * p.dual_norm());
            let v = p.combination_norm(x, y);
            prop_assert!(x.hypot(y) <= v + 1e-12 && v <= x + y + 1e-12);
        }
    }

    fn l2_space(n: usize) -> Arc<NormedSpace> {
        Arc::new(NormedSpace::Seq(SeqNorm::l2(n)))
    }

    #[test]
    fn eta_transform_of_identity() {
        let b = Basis::unit(l2_space(2));
        let eta = EtaSequence::new(vec![(1.0, 2.0)]).unwrap();
        let y = eta_transform(&b, &eta).unwrap();
        let r = RotationPair::new(2.0).unwrap();
        assert_eq!(y.vector(0).unwrap(), vec![1.0, 0.0]);
        let y2 = y.vector(1).unwrap();
        assert!((y2[0] - r.h2[0]).abs() < 1e-15 && (y2[1] - r.h2[1]).abs() < 1e-15);
        assert!(eta_transform(&Basis::unit(l2_space(3)), &eta).is_err());
    }

    #[test]
    fn eta_transform_norm_estimates() {
        let n = 12;
        let b = Basis::unit(l2_space(n));
        let eta = EtaSequence::new((0..n / 2).map(|k| (1.5, 1.0 + k as f64)).collect()).unwrap();
        let y = eta_transform(&b, &eta).unwrap();
        let err = (y.anal_matrix() * y.synth_matrix() - DMatrix::identity(n, n)).abs().max();
        assert!(err < 1e-12);
        for (k, &(l, mu)) in eta.pairs().iter().enumerate() {
            let d = y.coeff_norm(&{
                let mut c = vec![0.0; n];
                c[2 * k] = -1.0;
                c[2 * k + 1] = 1.0;
                c
            })
            .unwrap();
            assert!((d - 2.0 / mu).abs() < 1e-12);
            let dual: f64 = y.dual(2 * k + 1).unwrap().iter().map(|x| x * x).sum::<f64>().sqrt();
            let c = RotationPair::new(l * mu).unwrap().dual_norm() / l;
            assert!((dual - c).abs() < 1e-12);
            // ‖y*_{2n}‖ ≈ μ_n
            assert!(dual / mu > 0.3 && dual / mu < 1.5);
        }
    }

    fn small_dkk() -> DkkSpace {
        let sigma = OrderedPartition::uniform(2, 3).unwrap();
        DkkSpace::new(Basis::unit(l2_space(3)), SeqNorm::l2(6), sigma).unwrap()
    }

    #[test]
    fn dkk_norm_of_unit_vector() {
        let y = small_dkk();
        let mut e = vec![0.0; 6];
        e[0] = 1.0;
        assert!((y.norm(&e) - SQRT2).abs() < 1e-15);
        let one = y.block_indicator(1);
        assert!((y.norm(&one) - SQRT2).abs() < 1e-15);
    }

    #[test]
    fn dkk_split_compose_and_duals() {
        let y = small_dkk();
        let f = [1.0, -2.0, 0.5, 3.0, 0.0, 4.0];
        let (g, x) = y.split(&f).unwrap();
        assert_eq!(g, complement_project(y.partition(), &f).unwrap());
        let back = y.compose(&g, &x).unwrap();
        assert!(back.iter().zip(&f).all(|(a, b)| (a - b).abs() < 1e-14));
        for k in 0..6 {
            assert!((y.unit_dual(k, &g, &x).unwrap() - f[k]).abs() < 1e-14);
        }
        // T ∘ S = Id on P_σ f alone
        let p = average_project(y.partition(), &f).unwrap();
        let (g2, x2) = y.split(&p).unwrap();
        assert!(g2.iter().all(|v| v.abs() < 1e-15));
        assert!(y.compose(&g2, &x2).unwrap().iter().zip(&p).all(|(a, b)| (a - b).abs() < 1e-14));
    }

    #[test]
    fn unit_vector_norms_follow_block_scale() {
        // ‖e_k‖_Y ≈ max{1, ‖x_n‖Λ_{|σ_n|}/|σ_n|}
        let sizes: Vec<usize> = (1..=6).map(|n| 1 << n).collect();
        let sigma = OrderedPartition::new(sizes.clone()).unwrap();
        let n = sigma.dim();
        let x = affinity(&Basis::unit(l2_space(6)), &[1.0, 3.0, 10.0, 30.0, 100.0, 300.0]).unwrap();
        let y = DkkSpace::new(x.clone(), SeqNorm::l2(n), sigma.clone()).unwrap();
        let mut ratios = vec![];
        for (b, &s) in sizes.iter().enumerate() {
            let mut e = vec![0.0; n];
            e[sigma.block(b).start] = 1.0;
            let xn = x.coeff_norm(&{
                let mut c = vec![0.0; 6];
                c[b] = 1.0;
                c
            })
            .unwrap();
            let expect = 1f64.max(xn * (s as f64).sqrt() / s as f64);
            ratios.push(y.norm(&e) / expect);
        }
        let hi = ratios.iter().cloned().fold(0.0, f64::max);
        let lo = ratios.iter().cloned().fold(f64::INFINITY, f64::min);
        assert!(hi / lo < 2.5, "{ratios:?}");
    }

    #[test]
    fn isomorphism_factor_two() {
        let thm = build_thm_a(&SeqNorm::l2(1), None, 4, DEFAULT_DIM_CAP).unwrap();
        let y = &thm.dkk.space;
        for k in 0..200 {
            let mut rng = sampling::stream(11, k);
            let f = sampling::probe_vector(y.dim(), k as usize, &mut rng);
            let (a, b) = y.norm_parts(&f);
            let full = y.norm(&f);
            assert!(a.max(b) <= full + 1e-12 && full <= 2.0 * a.max(b) + 1e-12);
        }
    }

    #[test]
    fn projection_identity_on_block_unions() {
        let thm = build_thm_a(&SeqNorm::l2(1), None, 3, DEFAULT_DIM_CAP).unwrap();
        let y = &thm.dkk.space;
        let blocks = [1usize, 2, 5];
        let coords: Vec<usize> = blocks.iter().flat_map(|&b| y.partition().block(b)).collect();
        let mut rng = sampling::stream(4, 0);
        let f = sampling::gaussian_vector(y.dim(), &mut rng);
        let e = &thm.dkk.basis;
        let proj = e.coordinate_projection(&coords, &f).unwrap();
        let (g, x) = y.split(&f).unwrap();
        let (gp, xp) = y.split(&proj).unwrap();
        let xb = y.base().coordinate_projection(&blocks, &x).unwrap();
        for i in 0..y.dim() {
            let want = if coords.contains(&i) { g[i] } else { 0.0 };
            assert!((gp[i] - want).abs() < 1e-10);
        }
        assert!(xp.iter().zip(&xb).all(|(a, b)| (a - b).abs() < 1e-10));
    }

    #[test]
    fn dkkw_identity_and_estimates() {
        let thm = build_thm_a(&SeqNorm::l2(1), None, 6, DEFAULT_DIM_CAP).unwrap();
        let d = &thm.dkk;
        for n in 0..d.pairs() {
            for (a, b) in [(1.0, 0.0), (0.0, 1.0), (-1.0, 1.0), (2.0, -0.5), (1.0, 1.0)] {
                let (x, y) = (d.r(n, a, b), d.r_from_pair(n, a, b));
                assert!((x - y).abs() < 1e-10 * x.max(1.0));
            }
            let s = d.pair_sizes[n] as f64;
            // with the max-norm base: R_n(-1,1) = 2√(1 - 1/s²), R_n(0,1) = s·max(cos 2α, sin 2α)
            assert!((d.r(n, -1.0, 1.0) - 2.0 * (1.0 - 1.0 / (s * s)).sqrt()).abs() < 1e-10);
            let rot = RotationPair::new(s).unwrap();
            assert!((d.r(n, 0.0, 1.0) - s * rot.h2[0].max(rot.h2[1])).abs() < 1e-9 * s);
        }
        assert_eq!(thm.scales(), vec![4, 12, 28, 60, 124, 252]);
        assert_eq!(thm.basis().dim(), 252);
    }

    #[test]
    fn thm_a_guards() {
        assert!(build_thm_a(&SeqNorm::l2(1), None, 1, DEFAULT_DIM_CAP).is_err());
        assert!(build_thm_a(&SeqNorm::l2(1), None, 16, DEFAULT_DIM_CAP).is_err());
        assert_eq!(build_thm_a(&SeqNorm::l2(1), None, 3, DEFAULT_DIM_CAP).unwrap().basis().dim(), 28);
    }

    #[test]
    fn dkkw_rejects_unit_pairs() {
        let sigma = OrderedPartition::paired(&[1, 2]).unwrap();
        let base = Basis::unit(l2_space(4));
        assert!(dkkw_assembly(&base, &SeqNorm::l2(6), sigma).is_err());
        let odd = OrderedPartition::new(vec![2, 2, 2]).unwrap();
        assert!(dkkw_assembly(&Basis::unit(l2_space(3)), &SeqNorm::l2(6), odd).is_err());
    }

    #[test]
    fn compressed_matches_materialized() {
        // outer blocks of sizes 2, 4, 8 stored as cells of 1, 2, 4
        let x = Basis::unit(l2_space(3));
        let host = SeqNorm::l2(14);
        let full = DkkSpace::new(x.clone(), host.clone(), OrderedPartition::new(vec![2, 4, 8]).unwrap()).unwrap();
        let cells = DkkSpace::with_multiplicity(
            x,
            host,
            OrderedPartition::uniform(2, 3).unwrap(),
            vec![1.0, 1.0, 2.0, 2.0, 4.0, 4.0],
        )
        .unwrap();
        let mut rng = sampling::stream(2, 0);
        let c = sampling::gaussian_vector(6, &mut rng);
        let mut f = vec![];
        for (v, m) in c.iter().zip([1, 1, 2, 2, 4, 4]) {
            f.extend(std::iter::repeat_n(*v, m));
        }
        assert!((cells.norm(&c) - full.norm(&f)).abs() < 1e-12);
        assert_eq!(cells.cardinality(&[2, 3]), 4.0);
        let lorentz = SeqNorm::lorentz(1.0, Weight::harmonic(14)).unwrap();
        assert!(DkkSpace::with_multiplicity(
            Basis::unit(l2_space(3)),
            lorentz,
            OrderedPartition::uniform(2, 3).unwrap(),
            vec![1.0; 6]
        )
        .is_err());
    }

    #[test]
    fn main_a_witness_norms() {
        let a = build_main_a(&SeqNorm::l2(1), 4, DEFAULT_DIM_CAP).unwrap();
        assert!(a.compressed && a.lrp.holds);
        assert_eq!(a.basis.dim(), 2 * 60);
        for w in &a.witnesses {
            let j = w.level - 1;
            let d = &a.inner;
            let neg: Vec<f64> = w.f.iter().zip(&w.g).map(|(f, g)| g - f).collect();
            assert!((a.outer.norm(&neg) - d.r(j, -1.0, 1.0)).abs() < 1e-9);
            assert!((a.outer.norm(&w.g) - d.r(j, 0.0, 1.0)).abs() < 1e-9 * d.r(j, 0.0, 1.0));
            assert!((a.outer.norm(&w.f) - d.r(j, 1.0, 0.0)).abs() < 1e-9 * d.r(j, 1.0, 0.0));
        }
    }

    #[test]
    fn main_a_materialized_for_lorentz() {
        let n = 1 << 14;
        let host = SeqNorm::lorentz(1.0, Weight::new((1..=n).map(|k| 1.0 / (k as f64).sqrt()).collect()).unwrap()).unwrap();
        let a = build_main_a(&host, 2, DEFAULT_DIM_CAP).unwrap();
        assert!(!a.compressed);
        assert_eq!(a.basis.dim(), (1 << 13) - 2);
        assert!(build_main_a(&host, 3, DEFAULT_DIM_CAP).is_err());
    }

    #[test]
    fn dem_nonucc_shape() {
        let d = build_dem_nonucc(&SeqNorm::l2(1), 10, DEFAULT_DIM_CAP).unwrap();
        assert_eq!(d.dkk.pair_sizes, (2..=10).collect::<Vec<_>>());
        assert_eq!(d.basis().dim(), 2 * (2..=10).sum::<usize>());
        for (_, v) in d.alternating_witnesses() {
            assert!((d.dkk.space.norm(&v) - 2.0).abs() < 1e-10);
        }
        assert!(build_dem_nonucc(&SeqNorm::l2(1), 1, DEFAULT_DIM_CAP).is_err());
    }

    #[test]
    fn eq_positive_single_pair_within_two() {
        let u = Basis::unit(l2_space(4));
        let r = eq_positive_check(&u, &[2.0, 3.0, 5.0, 8.0], 300, 1).unwrap();
        assert!((1.0..=2.0 + 1e-12).contains(&r), "{r}");
    }

    #[test]
    fn sandwich_constants_bounded() {
        let mut prev = None;
        for levels in [4, 6, 8] {
            let sigma = OrderedPartition::new((1..=levels).map(|n| 1 << n).collect()).unwrap();
            let host = SeqNorm::l2(sigma.dim());
            let space = DkkSpace::new(Basis::unit(l2_space(levels)), host, sigma).unwrap();
            let (c, c2) = lorentz_sandwich_check(&space, 200, 5).unwrap();
            assert!(c > 0.0 && c < 10.0 && c2 < 10.0, "{c} {c2}");
            if let Some((p, p2)) = prev {
                assert!(c / p < 2.0 && c2 / p2 < 2.0);
            }
            prev = Some((c, c2));
        }
    }

    #[test]
    fn block_basis_is_affinity_of_host() {
        let sigma = OrderedPartition::new(vec![2, 3, 4]).unwrap();
        let v = block_basis(&SeqNorm::lp(1.0, 9).unwrap(), &sigma, 3).unwrap();
        // disjoint normalized blocks in ℓ_1: ‖Σ c_n v_n‖ = Σ|c_n|
        assert!((v.coeff_norm(&[1.0, -2.0, 0.5]).unwrap() - 3.5).abs() < 1e-14);
    }

    #[test]
    fn host_descriptors() {
        assert!(is_l2(&parse_host("l2", 4).unwrap()));
        assert_eq!(parse_host("lp:3", 4).unwrap().dim(), 4);
        assert!(parse_host("lorentz:1", 4).is_err());
        assert!(parse_host("bogus", 4).is_err());
    }
}
