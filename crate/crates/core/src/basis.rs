//! Finite normed spaces and bases with explicit dual systems: coefficient
//! transforms, coordinate projections, greedy sets, the thresholding greedy
//! algorithm, direct sums, affinities and constant-coefficient block sequences.

use std::sync::Arc;

use nalgebra::{DMatrix, DVector};

use crate::constructions::DkkSpace;
use crate::error::{check_dim, Error, Result};
use crate::seqspace::SeqNorm;

/// Relative tolerance under which two coefficient magnitudes count as tied.
pub const TIE_TOL: f64 = 1e-12;

/// Condition number above which a basis construction logs a warning.
pub const CONDITION_WARNING: f64 = 1e12;

/// `R^N` with one of the shipped norms. All shipped norms are locally convex
/// except `ℓ_p`/`d_q(w)` with exponent below one.
#[derive(Debug, Clone)]
pub enum NormedSpace {
    Seq(SeqNorm),
    Dkk(Arc<DkkSpace>),
    Sum(DirectSumSpace),
    Span(SpanSpace),
}

impl NormedSpace {
    pub fn dim(&self) -> usize {
        match self {
            NormedSpace::Seq(s) => s.dim(),
            NormedSpace::Dkk(d) => d.dim(),
            NormedSpace::Sum(s) => s.dim(),
            NormedSpace::Span(s) => s.dim(),
        }
    }

    pub fn norm_eval(&self, f: &[f64]) -> Result<f64> {
        check_dim(self.dim(), f.len())?;
        Ok(self.norm(f))
    }

    /// Norm without the dimension check.
    pub(crate) fn norm(&self, f: &[f64]) -> f64 {
        match self {
            NormedSpace::Seq(s) => s.eval(f),
            NormedSpace::Dkk(d) => d.norm(f),
            NormedSpace::Sum(s) => s.norm(f),
            NormedSpace::Span(s) => s.norm(f),
        }
    }

    /// True when the norm is the Euclidean norm of the coordinates.
    pub fn is_euclidean(&self) -> bool {
        matches!(self, NormedSpace::Seq(s) if s.is_euclidean())
    }

    pub fn is_locally_convex(&self) -> bool {
        match self {
            NormedSpace::Seq(s) => s.is_locally_convex(),
            NormedSpace::Dkk(d) => d.is_locally_convex(),
            NormedSpace::Sum(s) => s.left.is_locally_convex() && s.right.is_locally_convex(),
            NormedSpace::Span(s) => s.ambient.is_locally_convex(),
        }
    }
}

impl From<SeqNorm> for NormedSpace {
    fn from(s: SeqNorm) -> Self {
        NormedSpace::Seq(s)
    }
}

/// `X ⊕ Y` with `‖(f, g)‖ = max{‖f‖, ‖g‖}`; coordinates are those of `X`
/// followed by those of `Y`.
#[derive(Debug, Clone)]
pub struct DirectSumSpace {
    pub left: Arc<NormedSpace>,
    pub right: Arc<NormedSpace>,
}

impl DirectSumSpace {
    pub fn new(left: Arc<NormedSpace>, right: Arc<NormedSpace>) -> Self {
        Self { left, right }
    }

    pub fn dim(&self) -> usize {
        self.left.dim() + self.right.dim()
    }

    pub fn split<'a>(&self, f: &'a [f64]) -> (&'a [f64], &'a [f64]) {
        f.split_at(self.left.dim())
    }

    fn norm(&self, f: &[f64]) -> f64 {
        let (a, b) = self.split(f);
        self.left.norm(a).max(self.right.norm(b))
    }
}

/// Subspace of an ambient space spanned by sparse generators; coordinates
/// are the coefficients with respect to the generators.
#[derive(Debug, Clone)]
pub struct SpanSpace {
    pub ambient: Arc<NormedSpace>,
    generators: Vec<Vec<(usize, f64)>>,
}

impl SpanSpace {
    pub fn new(ambient: Arc<NormedSpace>, generators: Vec<Vec<(usize, f64)>>) -> Result<Self> {
        let n = ambient.dim();
        for g in &generators {
            if let Some(&(i, _)) = g.iter().find(|(i, _)| *i >= n) {
                return Err(Error::IndexOutOfRange { index: i, len: n });
            }
        }
        Ok(Self {
            ambient,
            generators,
        })
    }

    pub fn dim(&self) -> usize {
        self.generators.len()
    }

    pub fn generators(&self) -> &[Vec<(usize, f64)>] {
        &self.generators
    }

    /// Ambient coordinates of `Σ c_j g_j`.
    pub fn embed(&self, c: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.ambient.dim()];
        for (g, &x) in self.generators.iter().zip(c) {
            if x != 0.0 {
                for &(i, v) in g {
                    out[i] += x * v;
                }
            }
        }
        out
    }

    fn norm(&self, c: &[f64]) -> f64 {
        self.ambient.norm(&self.embed(c))
    }
}

/// How basis vectors and dual functionals sit in the space coordinates.
#[derive(Debug, Clone)]
pub enum Coords {
    /// Unit vector system.
    Identity,
    /// `x_n = d_n e_n`, `x*_n = e*_n / d_n`.
    Diagonal(Vec<f64>),
    /// Columns of `synth` are the `x_n`; rows of `anal` are the `x*_n`.
    Dense {
        synth: DMatrix<f64>,
        anal: DMatrix<f64>,
    },
}

/// A basis of a finite normed space together with its biorthogonal functionals.
#[derive(Debug, Clone)]
pub struct Basis {
    space: Arc<NormedSpace>,
    coords: Coords,
}

/// A greedy set and whether the `m`-th and `(m+1)`-th magnitudes tie.
#[derive(Debug, Clone, PartialEq)]
pub struct GreedyResult {
    pub set: Vec<usize>,
    pub tie: bool,
}

/// Which members of a tie group enter a greedy set.
#[derive(Debug, Clone, PartialEq, Default)]
pub enum TieRule {
    #[default]
    LowestIndex,
    HighestIndex,
    /// Indices in the list first, then lowest index.
    Prefer(Vec<usize>),
}

impl Basis {
    /// Unit vector system of `space`.
    pub fn unit(space: Arc<NormedSpace>) -> Self {
        Self {
            space,
            coords: Coords::Identity,
        }
    }

    /// Basis whose vectors are the columns of `synth`; duals by LU inversion.
    pub fn from_synth(space: Arc<NormedSpace>, synth: DMatrix<f64>) -> Result<Self> {
        let n = space.dim();
        if synth.nrows() != n || synth.ncols() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                got: synth.nrows().max(synth.ncols()),
            });
        }
        let anal = synth.clone().lu().try_inverse().ok_or(Error::Singular)?;
        if n <= 1024 {
            let sv = synth.singular_values();
            let cond = sv.max() / sv.min();
            if !(cond <= CONDITION_WARNING) {
                log::warn!("basis condition number {cond:.3e} exceeds {CONDITION_WARNING:.0e}");
            }
        }
        Ok(Self {
            space,
            coords: Coords::Dense { synth, anal },
        })
    }

    /// Basis with both matrices supplied; `anal · synth = I` is checked to `1e-8`.
    pub fn from_pair(space: Arc<NormedSpace>, synth: DMatrix<f64>, anal: DMatrix<f64>) -> Result<Self> {
        let n = space.dim();
        for m in [&synth, &anal] {
            if m.nrows() != n || m.ncols() != n {
                return Err(Error::DimensionMismatch {
                    expected: n,
                    got: m.nrows().max(m.ncols()),
                });
            }
        }
        let err = (&anal * &synth - DMatrix::identity(n, n)).abs().max();
        if err > 1e-8 {
            return Err(Error::InvalidParameter(format!(
                "dual system is not biorthogonal (error {err:.3e})"
            )));
        }
        Ok(Self {
            space,
            coords: Coords::Dense { synth, anal },
        })
    }

    pub fn space(&self) -> &Arc<NormedSpace> {
        &self.space
    }

    pub fn coords(&self) -> &Coords {
        &self.coords
    }

    pub fn dim(&self) -> usize {
        self.space.dim()
    }

    pub fn is_unit_vector_system(&self) -> bool {
        matches!(self.coords, Coords::Identity)
    }

    /// Dense synthesis matrix (columns are the basis vectors).
    pub fn synth_matrix(&self) -> DMatrix<f64> {
        let n = self.dim();
        match &self.coords {
            Coords::Identity => DMatrix::identity(n, n),
            Coords::Diagonal(d) => DMatrix::from_diagonal(&DVector::from_column_slice(d)),
            Coords::Dense { synth, .. } => synth.clone(),
        }
    }

    /// Dense analysis matrix (rows are the dual functionals).
    pub fn anal_matrix(&self) -> DMatrix<f64> {
        let n = self.dim();
        match &self.coords {
            Coords::Identity => DMatrix::identity(n, n),
            Coords::Diagonal(d) => {
                DMatrix::from_diagonal(&DVector::from_iterator(n, d.iter().map(|x| 1.0 / x)))
            }
            Coords::Dense { anal, .. } => anal.clone(),
        }
    }

    /// `x_n`.
    pub fn vector(&self, n: usize) -> Result<Vec<f64>> {
        self.check_index(n)?;
        let mut c = vec![0.0; self.dim()];
        c[n] = 1.0;
        Ok(self.synth(&c))
    }

    /// `x*_n` as a coordinate row.
    pub fn dual(&self, n: usize) -> Result<Vec<f64>> {
        self.check_index(n)?;
        Ok(match &self.coords {
            Coords::Identity => {
                let mut r = vec![0.0; self.dim()];
                r[n] = 1.0;
                r
            }
            Coords::Diagonal(d) => {
                let mut r = vec![0.0; self.dim()];
                r[n] = 1.0 / d[n];
                r
            }
            Coords::Dense { anal, .. } => anal.row(n).iter().copied().collect(),
        })
    }

    fn check_index(&self, n: usize) -> Result<()> {
        if n >= self.dim() {
            return Err(Error::IndexOutOfRange {
                index: n,
                len: self.dim(),
            });
        }
        Ok(())
    }

    /// `(x*_n(f))_n`.
    pub fn analyze(&self, f: &[f64]) -> Result<Vec<f64>> {
        check_dim(self.dim(), f.len())?;
        Ok(self.anal(f))
    }

    /// `Σ c_n x_n`.
    pub fn synthesize(&self, c: &[f64]) -> Result<Vec<f64>> {
        check_dim(self.dim(), c.len())?;
        Ok(self.synth(c))
    }

    pub(crate) fn anal(&self, f: &[f64]) -> Vec<f64> {
        match &self.coords {
            Coords::Identity => f.to_vec(),
            Coords::Diagonal(d) => f.iter().zip(d).map(|(x, d)| x / d).collect(),
            Coords::Dense { anal, .. } => mat_vec(anal, f),
        }
    }

    pub(crate) fn synth(&self, c: &[f64]) -> Vec<f64> {
        match &self.coords {
            Coords::Identity => c.to_vec(),
            Coords::Diagonal(d) => c.iter().zip(d).map(|(x, d)| x * d).collect(),
            Coords::Dense { synth, .. } => mat_vec(synth, c),
        }
    }

    /// `‖f‖` for a vector in space coordinates.
    pub fn norm(&self, f: &[f64]) -> Result<f64> {
        self.space.norm_eval(f)
    }

    /// `‖Σ c_n x_n‖`.
    pub fn coeff_norm(&self, c: &[f64]) -> Result<f64> {
        check_dim(self.dim(), c.len())?;
        Ok(self.cnorm(c))
    }

    pub(crate) fn cnorm(&self, c: &[f64]) -> f64 {
        match &self.coords {
            Coords::Identity => self.space.norm(c),
            _ => self.space.norm(&self.synth(c)),
        }
    }

    /// `‖Σ_{n∈A} c_n x_n‖` for coefficients `c`.
    pub(crate) fn restricted_cnorm(&self, c: &[f64], set: &[usize]) -> f64 {
        let mut r = vec![0.0; c.len()];
        for &i in set {
            r[i] = c[i];
        }
        self.cnorm(&r)
    }

    /// `‖1_{ε,A}‖ = ‖Σ_{n∈A} ε_n x_n‖`.
    pub fn indicator_norm(&self, set: &[usize], signs: Option<&[f64]>) -> Result<f64> {
        let mut c = vec![0.0; self.dim()];
        for (k, &i) in set.iter().enumerate() {
            self.check_index(i)?;
            c[i] = signs.map_or(1.0, |s| s[k]);
        }
        Ok(self.cnorm(&c))
    }

    /// `S_A f = Σ_{n∈A} x*_n(f) x_n`.
    pub fn coordinate_projection(&self, set: &[usize], f: &[f64]) -> Result<Vec<f64>> {
        check_dim(self.dim(), f.len())?;
        let c = self.anal(f);
        let mut r = vec![0.0; c.len()];
        for &i in set {
            self.check_index(i)?;
            r[i] = c[i];
        }
        Ok(self.synth(&r))
    }

    /// Greedy set of size `m` for `f` under the default lowest-index tie rule.
    pub fn greedy_set(&self, f: &[f64], m: usize) -> Result<GreedyResult> {
        self.greedy_set_with(f, m, &TieRule::LowestIndex)
    }

    pub fn greedy_set_with(&self, f: &[f64], m: usize, rule: &TieRule) -> Result<GreedyResult> {
        check_dim(self.dim(), f.len())?;
        greedy_set_of(&self.anal(f), m, rule)
    }

    /// `G_m(f)`.
    pub fn tga(&self, f: &[f64], m: usize) -> Result<Vec<f64>> {
        let g = self.greedy_set(f, m)?;
        self.coordinate_projection(&g.set, f)
    }
}

fn mat_vec(m: &DMatrix<f64>, v: &[f64]) -> Vec<f64> {
    let out = m * DVector::from_column_slice(v);
    out.as_slice().to_vec()
}

/// Greedy set of size `m` for a coefficient sequence.
pub fn greedy_set_of(coeffs: &[f64], m: usize, rule: &TieRule) -> Result<GreedyResult> {
    let n = coeffs.len();
    if m > n {
        return Err(Error::InvalidParameter(format!(
            "greedy set of size {m} requested in dimension {n}"
        )));
    }
    if m == 0 {
        return Ok(GreedyResult { set: vec![], tie: false });
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| coeffs[j].abs().total_cmp(&coeffs[i].abs()).then(i.cmp(&j)));
    let t = coeffs[order[m - 1]].abs();
    let tied = |x: f64| (x.abs() - t).abs() <= TIE_TOL * t.max(x.abs());
    let mut set: Vec<usize> = Vec::with_capacity(m);
    let mut group: Vec<usize> = Vec::new();
    for &i in &order {
        let a = coeffs[i].abs();
        if tied(a) {
            group.push(i);
        } else if a > t {
            set.push(i);
        }
    }
    let need = m - set.len();
    let tie = group.len() > need;
    let rank = |i: usize| -> (bool, usize) {
        match rule {
            TieRule::LowestIndex => (false, i),
            TieRule::HighestIndex => (false, n - i),
            TieRule::Prefer(p) => (!p.contains(&i), i),
        }
    };
    group.sort_by_key(|&i| rank(i));
    set.extend_from_slice(&group[..need]);
    set.sort_unstable();
    Ok(GreedyResult { set, tie })
}

/// Whether `set` is a greedy set of the coefficient sequence, with relative
/// slack [`TIE_TOL`].
pub fn is_greedy_set(coeffs: &[f64], set: &[usize]) -> bool {
    let mut inside = vec![false; coeffs.len()];
    for &i in set {
        if i >= coeffs.len() {
            return false;
        }
        inside[i] = true;
    }
    let min_in = set.iter().map(|&i| coeffs[i].abs()).fold(f64::INFINITY, f64::min);
    let max_out = coeffs
        .iter()
        .zip(&inside)
        .filter(|(_, &inn)| !inn)
        .map(|(x, _)| x.abs())
        .fold(0.0, f64::max);
    min_in >= max_out * (1.0 - TIE_TOL)
}

/// `X ⊕ Y` with basis `z_{2n-1} = (x_n, 0)`, `z_{2n} = (0, y_n)`; when the
/// dimensions differ the leftover vectors of the longer basis follow in order.
pub fn direct_sum(b1: &Basis, b2: &Basis) -> Result<Basis> {
    let (n1, n2) = (b1.dim(), b2.dim());
    let n = n1 + n2;
    let space = Arc::new(NormedSpace::Sum(DirectSumSpace::new(
        b1.space.clone(),
        b2.space.clone(),
    )));
    let order = interleaving(n1, n2);
    let (s1, a1) = (b1.synth_matrix(), b1.anal_matrix());
    let (s2, a2) = (b2.synth_matrix(), b2.anal_matrix());
    let mut synth = DMatrix::zeros(n, n);
    let mut anal = DMatrix::zeros(n, n);
    for (k, &(side, j)) in order.iter().enumerate() {
        if side == 0 {
            synth.view_mut((0, k), (n1, 1)).copy_from(&s1.column(j));
            anal.view_mut((k, 0), (1, n1)).copy_from(&a1.row(j));
        } else {
            synth.view_mut((n1, k), (n2, 1)).copy_from(&s2.column(j));
            anal.view_mut((k, n1), (1, n2)).copy_from(&a2.row(j));
        }
    }
    Ok(Basis {
        space,
        coords: Coords::Dense { synth, anal },
    })
}

/// Position `k` of the interleaved sum comes from `(side, index)`.
pub fn interleaving(n1: usize, n2: usize) -> Vec<(u8, usize)> {
    let common = n1.min(n2);
    let mut out = Vec::with_capacity(n1 + n2);
    for j in 0..common {
        out.push((0, j));
        out.push((1, j));
    }
    out.extend((common..n1).map(|j| (0, j)));
    out.extend((common..n2).map(|j| (1, j)));
    out
}

/// `y_n = λ_n x_n`.
pub fn affinity(b: &Basis, lambda: &[f64]) -> Result<Basis> {
    check_dim(b.dim(), lambda.len())?;
    if lambda.iter().any(|&l| l == 0.0 || !l.is_finite()) {
        return Err(Error::InvalidParameter("affinity scalars must be finite and nonzero".into()));
    }
    let coords = match &b.coords {
        Coords::Identity => Coords::Diagonal(lambda.to_vec()),
        Coords::Diagonal(d) => Coords::Diagonal(d.iter().zip(lambda).map(|(a, l)| a * l).collect()),
        Coords::Dense { synth, anal } => {
            let mut s = synth.clone();
            let mut a = anal.clone();
            for (j, &l) in lambda.iter().enumerate() {
                s.column_mut(j).scale_mut(l);
                a.row_mut(j).scale_mut(1.0 / l);
            }
            Coords::Dense { synth: s, anal: a }
        }
    };
    Ok(Basis {
        space: b.space.clone(),
        coords,
    })
}

/// Block basic sequence `y_j = Σ_{n∈D_j} ε_n x_n`, represented as the unit
/// vector system of its span. On the span the dual functionals are the
/// coordinate functionals; in the ambient they are the averaged duals
/// `(1/|D_j|) Σ_{n∈D_j} ε_n x*_n`.
pub fn cc_block_sequence(b: &Basis, blocks: &[Vec<usize>], signs: Option<&[Vec<f64>]>) -> Result<Basis> {
    let mut seen = vec![false; b.dim()];
    let mut generators = Vec::with_capacity(blocks.len());
    for (j, d) in blocks.iter().enumerate() {
        if d.is_empty() {
            return Err(Error::InvalidParameter("empty block".into()));
        }
        let mut c = vec![0.0; b.dim()];
        for (k, &i) in d.iter().enumerate() {
            b.check_index(i)?;
            if seen[i] {
                return Err(Error::InvalidParameter(format!("index {i} appears in two blocks")));
            }
            seen[i] = true;
            c[i] = match signs {
                Some(s) => s[j][k],
                None => 1.0,
            };
        }
        let v = b.synth(&c);
        generators.push(
            v.into_iter()
                .enumerate()
                .filter(|(_, x)| *x != 0.0)
                .collect(),
        );
    }
    let span = SpanSpace::new(b.space.clone(), generators)?;
    Ok(Basis::unit(Arc::new(NormedSpace::Span(span))))
}

/// Averaged dual `(1/|D|) Σ_{n∈D} ε_n x*_n` of a block, as an ambient row.
pub fn averaged_dual(b: &Basis, block: &[usize], signs: Option<&[f64]>) -> Result<Vec<f64>> {
    let mut out = vec![0.0; b.dim()];
    for (k, &i) in block.iter().enumerate() {
        let d = b.dual(i)?;
        let e = signs.map_or(1.0, |s| s[k]);
        for (o, x) in out.iter_mut().zip(d) {
            *o += e * x / block.len() as f64;
        }
    }
    Ok(out)
}
