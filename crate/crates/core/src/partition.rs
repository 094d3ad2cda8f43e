//! Ordered partitions into consecutive blocks, the averaging projection
//! `P_σ`, its complement `Q_σ`, and the normalized block system
//! `v_n = 1_{σ_n} / Λ_{|σ_n|}` with functionals `v*_n = (Λ_{|σ_n|}/|σ_n|) 1*_{σ_n}`.

use std::ops::Range;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{check_dim, Error, Result};
use crate::sampling;
use crate::seqspace::{FundamentalFunction, SeqNorm};

/// Consecutive blocks `σ_1, σ_2, ...` covering `0..N`. Block and coordinate
/// indices are zero-based.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "PartitionRepr", into = "PartitionRepr")]
pub struct OrderedPartition {
    sizes: Vec<usize>,
    starts: Vec<usize>,
}

#[derive(Serialize, Deserialize)]
struct PartitionRepr {
    sizes: Vec<usize>,
}

impl TryFrom<PartitionRepr> for OrderedPartition {
    type Error = Error;
    fn try_from(r: PartitionRepr) -> Result<Self> {
        OrderedPartition::new(r.sizes)
    }
}

impl From<OrderedPartition> for PartitionRepr {
    fn from(p: OrderedPartition) -> Self {
        PartitionRepr { sizes: p.sizes }
    }
}

impl OrderedPartition {
    pub fn new(sizes: Vec<usize>) -> Result<Self> {
        if sizes.is_empty() {
            return Err(Error::InvalidParameter("partition has no blocks".into()));
        }
        if sizes.contains(&0) {
            return Err(Error::InvalidParameter("partition blocks must be nonempty".into()));
        }
        let mut starts = Vec::with_capacity(sizes.len());
        let mut acc = 0usize;
        for &s in &sizes {
            starts.push(acc);
            acc = acc
                .checked_add(s)
                .ok_or_else(|| Error::ResourceLimit("partition length overflows".into()))?;
        }
        Ok(Self { sizes, starts })
    }

    /// `count` blocks of equal size.
    pub fn uniform(size: usize, count: usize) -> Result<Self> {
        Self::new(vec![size; count])
    }

    /// Paired blocks `|σ_{2n-1}| = |σ_{2n}| = s_n`.
    pub fn paired(pair_sizes: &[usize]) -> Result<Self> {
        Self::new(pair_sizes.iter().flat_map(|&s| [s, s]).collect())
    }

    pub fn sizes(&self) -> &[usize] {
        &self.sizes
    }

    pub fn num_blocks(&self) -> usize {
        self.sizes.len()
    }

    /// Total length `N`.
    pub fn dim(&self) -> usize {
        self.starts.last().unwrap() + self.sizes.last().unwrap()
    }

    pub fn block(&self, n: usize) -> Range<usize> {
        self.starts[n]..self.starts[n] + self.sizes[n]
    }

    pub fn blocks(&self) -> impl Iterator<Item = Range<usize>> + '_ {
        (0..self.num_blocks()).map(|n| self.block(n))
    }

    /// `M_n`: number of coordinates in the first `n` blocks.
    pub fn cumulative(&self, n: usize) -> usize {
        if n == 0 {
            0
        } else {
            self.starts[n - 1] + self.sizes[n - 1]
        }
    }

    /// Block containing coordinate `i`.
    pub fn block_of(&self, i: usize) -> usize {
        self.starts.partition_point(|&s| s <= i) - 1
    }

    /// `(|σ_{2n-1}|)_n` when the blocks come in equal pairs.
    pub fn pair_sizes(&self) -> Result<Vec<usize>> {
        if !self.sizes.len().is_multiple_of(2) {
            return Err(Error::InvalidParameter("odd number of blocks".into()));
        }
        self.sizes
            .chunks(2)
            .map(|p| {
                if p[0] == p[1] {
                    Ok(p[0])
                } else {
                    Err(Error::InvalidParameter(format!(
                        "unequal paired blocks {} and {}",
                        p[0], p[1]
                    )))
                }
            })
            .collect()
    }
}

/// `P_σ f`: every block replaced by its mean.
pub fn average_project(sigma: &OrderedPartition, f: &[f64]) -> Result<Vec<f64>> {
    check_dim(sigma.dim(), f.len())?;
    let mut out = vec![0.0; f.len()];
    for r in sigma.blocks() {
        let mean = f[r.clone()].iter().sum::<f64>() / r.len() as f64;
        out[r].fill(mean);
    }
    Ok(out)
}

/// `Q_σ f = f - P_σ f`.
pub fn complement_project(sigma: &OrderedPartition, f: &[f64]) -> Result<Vec<f64>> {
    let p = average_project(sigma, f)?;
    Ok(f.iter().zip(p).map(|(x, y)| x - y).collect())
}

/// The block vectors `v_n` and functionals `v*_n` of a partition relative to a
/// fundamental function.
#[derive(Debug, Clone)]
pub struct BlockSystem {
    partition: OrderedPartition,
    scales: Vec<f64>,
}

impl BlockSystem {
    pub fn new(partition: OrderedPartition, lambda: &FundamentalFunction) -> Result<Self> {
        check_dim(partition.dim(), lambda.len())?;
        let scales = partition.sizes().iter().map(|&s| lambda.get(s)).collect();
        Ok(Self { partition, scales })
    }

    pub fn for_norm(partition: OrderedPartition, host: &SeqNorm) -> Result<Self> {
        check_dim(partition.dim(), host.dim())?;
        let lambda = host.fundamental_function();
        Self::new(partition, &lambda)
    }

    pub fn partition(&self) -> &OrderedPartition {
        &self.partition
    }

    /// `Λ_{|σ_n|}` for every block.
    pub fn scales(&self) -> &[f64] {
        &self.scales
    }

    fn check_block(&self, n: usize) -> Result<()> {
        if n >= self.partition.num_blocks() {
            return Err(Error::IndexOutOfRange {
                index: n,
                len: self.partition.num_blocks(),
            });
        }
        Ok(())
    }

    /// `v*_n(f)`.
    pub fn block_functional(&self, n: usize, f: &[f64]) -> Result<f64> {
        check_dim(self.partition.dim(), f.len())?;
        self.check_block(n)?;
        let r = self.partition.block(n);
        Ok(self.scales[n] / r.len() as f64 * f[r].iter().sum::<f64>())
    }

    /// `(v*_n(f))_n`.
    pub fn functionals(&self, f: &[f64]) -> Result<Vec<f64>> {
        check_dim(self.partition.dim(), f.len())?;
        Ok(self
            .partition
            .blocks()
            .zip(&self.scales)
            .map(|(r, l)| l / r.len() as f64 * f[r].iter().sum::<f64>())
            .collect())
    }

    pub fn v(&self, n: usize) -> Result<Vec<f64>> {
        self.check_block(n)?;
        let mut out = vec![0.0; self.partition.dim()];
        out[self.partition.block(n)].fill(1.0 / self.scales[n]);
        Ok(out)
    }

    pub fn v_star(&self, n: usize) -> Result<Vec<f64>> {
        self.check_block(n)?;
        let r = self.partition.block(n);
        let mut out = vec![0.0; self.partition.dim()];
        let c = self.scales[n] / r.len() as f64;
        out[r].fill(c);
        Ok(out)
    }

    /// `Σ c_n v_n`.
    pub fn synthesize(&self, c: &[f64]) -> Result<Vec<f64>> {
        check_dim(self.partition.num_blocks(), c.len())?;
        let mut out = vec![0.0; self.partition.dim()];
        for ((r, l), x) in self.partition.blocks().zip(&self.scales).zip(c) {
            out[r].fill(x / l);
        }
        Ok(out)
    }
}

/// Largest observed `‖P_σ f‖/‖f‖` and `‖Q_σ f‖/‖f‖`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProjectionBound {
    pub p_ratio: f64,
    pub q_ratio: f64,
    pub samples: usize,
}

/// Empirical operator-norm lower estimates for `P_σ` and `Q_σ` on `S`, from
/// structured vectors (block indicators, spikes, sign-alternating blocks,
/// prefixes) and `trials` seeded probe vectors.
pub fn projection_norm_bound_check(
    sigma: &OrderedPartition,
    s: &SeqNorm,
    trials: usize,
    seed: u64,
) -> Result<ProjectionBound> {
    check_dim(sigma.dim(), s.dim())?;
    let n = sigma.dim();
    let ratios = |f: &[f64]| -> (f64, f64) {
        let nf = s.eval(f);
        if nf == 0.0 {
            return (0.0, 0.0);
        }
        let p = average_project(sigma, f).expect("dimension checked");
        let q: Vec<f64> = f.iter().zip(&p).map(|(a, b)| a - b).collect();
        (s.eval(&p) / nf, s.eval(&q) / nf)
    };
    let mut structured: Vec<Vec<f64>> = Vec::new();
    for r in sigma.blocks().take(64) {
        let mut ind = vec![0.0; n];
        ind[r.clone()].fill(1.0);
        structured.push(ind);
        let mut spike = vec![0.0; n];
        spike[r.start] = 1.0;
        structured.push(spike);
        let mut alt = vec![0.0; n];
        for (k, i) in r.enumerate() {
            alt[i] = if k % 2 == 0 { 1.0 } else { -1.0 };
        }
        structured.push(alt);
    }
    let mut m = 1;
    while m <= n {
        let mut pre = vec![0.0; n];
        pre[..m].fill(1.0);
        structured.push(pre);
        m *= 2;
    }
    let fold = |a: (f64, f64), b: (f64, f64)| (a.0.max(b.0), a.1.max(b.1));
    let s_best = structured
        .par_iter()
        .map(|f| ratios(f))
        .reduce(|| (0.0, 0.0), fold);
    let r_best = (0..trials)
        .into_par_iter()
        .map(|k| {
            let mut rng = sampling::stream(seed, k as u64);
            ratios(&sampling::probe_vector(n, k, &mut rng))
        })
        .reduce(|| (0.0, 0.0), fold);
    let (p_ratio, q_ratio) = fold(s_best, r_best);
    Ok(ProjectionBound {
        p_ratio,
        q_ratio,
        samples: structured.len() + trials,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::seqspace::Weight;
    use nalgebra::DMatrix;
    use proptest::prelude::*;

    fn close(a: &[f64], b: &[f64], tol: f64) -> bool {
        a.len() == b.len() && a.iter().zip(b).all(|(x, y)| (x - y).abs() <= tol)
    }

    #[test]
    fn partition_bookkeeping() {
        let p = OrderedPartition::new(vec![2, 3, 1]).unwrap();
        assert_eq!(p.dim(), 6);
        assert_eq!(p.block(1), 2..5);
        assert_eq!(p.cumulative(0), 0);
        assert_eq!(p.cumulative(2), 5);
        assert_eq!(p.block_of(4), 1);
        assert_eq!(p.block_of(5), 2);
        assert!(OrderedPartition::new(vec![]).is_err());
        assert!(OrderedPartition::new(vec![1, 0]).is_err());
        assert_eq!(OrderedPartition::paired(&[2, 4]).unwrap().pair_sizes().unwrap(), vec![2, 4]);
        assert!(p.pair_sizes().is_err());
    }

    #[test]
    fn block_means() {
        let p = OrderedPartition::uniform(2, 2).unwrap();
        assert_eq!(average_project(&p, &[1.0, 2.0, 3.0, 4.0]).unwrap(), vec![1.5, 1.5, 3.5, 3.5]);
        assert_eq!(average_project(&p, &[1.0, -1.0, 0.0, 0.0]).unwrap(), vec![0.0; 4]);
        assert_eq!(
            complement_project(&p, &[1.0, 2.0, 3.0, 4.0]).unwrap(),
            vec![-0.5, 0.5, -0.5, 0.5]
        );
        assert_eq!(complement_project(&p, &[7.0, 7.0, -2.0, -2.0]).unwrap(), vec![0.0; 4]);
        assert!(average_project(&p, &[1.0]).is_err());
    }

    #[test]
    fn l2_block_functional() {
        let p = OrderedPartition::uniform(2, 3).unwrap();
        let bs = BlockSystem::for_norm(p, &SeqNorm::l2(6)).unwrap();
        let f = [1.0, 1.0, 0.0, 0.0, 0.0, 0.0];
        assert!((bs.block_functional(0, &f).unwrap() - 2f64.sqrt()).abs() < 1e-15);
        let v0 = bs.v(0).unwrap();
        assert!((bs.block_functional(0, &v0).unwrap() - 1.0).abs() < 1e-15);
        assert_eq!(bs.block_functional(1, &v0).unwrap(), 0.0);
        assert!(matches!(
            bs.block_functional(3, &f),
            Err(Error::IndexOutOfRange { .. })
        ));
    }

    #[test]
    fn biorthogonal_and_normalized() {
        let sizes = vec![1, 2, 3, 5, 8, 13];
        let p = OrderedPartition::new(sizes).unwrap();
        let n = p.dim();
        let hosts = [
            SeqNorm::lp(1.0, n).unwrap(),
            SeqNorm::l2(n),
            SeqNorm::lorentz(1.0, Weight::harmonic(n)).unwrap(),
            SeqNorm::weak_lorentz(Weight::harmonic(n)),
        ];
        for s in &hosts {
            let bs = BlockSystem::for_norm(p.clone(), s).unwrap();
            for i in 0..p.num_blocks() {
                let vi = bs.v(i).unwrap();
                assert!((s.eval(&vi) - 1.0).abs() < 1e-12);
                for j in 0..p.num_blocks() {
                    let d = bs.block_functional(j, &vi).unwrap();
                    assert!((d - if i == j { 1.0 } else { 0.0 }).abs() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn block_functionals_synthesize_the_average() {
        let p = OrderedPartition::new(vec![3, 1, 4]).unwrap();
        let bs = BlockSystem::for_norm(p.clone(), &SeqNorm::lp(3.0, 8).unwrap()).unwrap();
        let f = [1.0, -2.0, 0.5, 4.0, 3.0, 3.0, -1.0, 0.0];
        let back = bs.synthesize(&bs.functionals(&f).unwrap()).unwrap();
        assert!(close(&back, &average_project(&p, &f).unwrap(), 1e-14));
    }

    #[test]
    fn l2_averaging_norm_is_one_by_svd() {
        let p = OrderedPartition::new(vec![1, 3, 2, 4]).unwrap();
        let n = p.dim();
        let m = DMatrix::from_fn(n, n, |i, j| {
            let b = p.block_of(i);
            if p.block_of(j) == b {
                1.0 / p.sizes()[b] as f64
            } else {
                0.0
            }
        });
        let top = m.singular_values().max();
        assert!((top - 1.0).abs() < 1e-12);
        let est = projection_norm_bound_check(&p, &SeqNorm::l2(n), 500, 3).unwrap();
        assert!(est.p_ratio <= top + 1e-12);
        assert!((est.p_ratio - 1.0).abs() < 1e-12);
    }

    #[test]
    fn l1_projection_bounds() {
        let p = OrderedPartition::uniform(2, 64).unwrap();
        let est = projection_norm_bound_check(&p, &SeqNorm::lp(1.0, 128).unwrap(), 2000, 9)
            .unwrap();
        assert!((est.p_ratio - 1.0).abs() < 1e-12);
        assert!(est.q_ratio <= 3.0 + 1e-10);
    }

    proptest! {
        #[test]
        fn projections_are_complementary_and_idempotent(
            sizes in proptest::collection::vec(1usize..6, 1..8),
            seed in any::<u64>(),
        ) {
            let p = OrderedPartition::new(sizes).unwrap();
            let mut rng = sampling::stream(seed, 0);
            let f = sampling::gaussian_vector(p.dim(), &mut rng);
            let pf = average_project(&p, &f).unwrap();
            let qf = complement_project(&p, &f).unwrap();
            prop_assert!(close(&average_project(&p, &pf).unwrap(), &pf, 1e-12));
            let sum: Vec<f64> = pf.iter().zip(&qf).map(|(a, b)| a + b).collect();
            prop_assert!(close(&sum, &f, 1e-12));
            for r in p.blocks() {
                prop_assert!(qf[r].iter().sum::<f64>().abs() < 1e-12);
            }
            let l2 = SeqNorm::l2(p.dim());
            prop_assert!(l2.eval(&qf) <= l2.eval(&f) * (1.0 + 1e-12));
        }
    }
}
