//! A deterministic in-process stand-in for `K` machines joined by an
//! allreduce network.
//!
//! Every allreduce sums the workers' contributions in ascending worker
//! order, so results are bitwise reproducible. Each call is charged to a
//! [`CommLedger`]: one round, `ℓ` scalars and `log₂ max(K, 2)` latency units
//! per reduction of an `ℓ`-vector (unit `T_initial` and `T_byte`).

use std::ops::Range;

use crate::error::{check_len, Error, Result};

/// Contiguous ranges `I_1, …, I_K` partitioning `0..n`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Partition {
    ranges: Vec<Range<usize>>,
}

impl Partition {
    /// Builds a partition from explicit ranges; they must be contiguous,
    /// in order and start at zero.
    pub fn from_ranges(ranges: Vec<Range<usize>>) -> Result<Self> {
        if ranges.is_empty() {
            return Err(Error::Partition("at least one block is required".into()));
        }
        let mut next = 0;
        for r in &ranges {
            if r.start != next || r.end < r.start {
                return Err(Error::Partition(format!("block {r:?} does not continue at index {next}")));
            }
            next = r.end;
        }
        Ok(Partition { ranges })
    }

    pub fn blocks(&self) -> &[Range<usize>] {
        &self.ranges
    }

    pub fn block(&self, k: usize) -> Range<usize> {
        self.ranges[k].clone()
    }

    pub fn n_blocks(&self) -> usize {
        self.ranges.len()
    }

    /// Size of the partitioned index set.
    pub fn total(&self) -> usize {
        self.ranges.last().map_or(0, |r| r.end)
    }
}

/// Splits `0..n` into `k` contiguous blocks whose sizes differ by at most
/// one, larger blocks first.
pub fn partition_even(n: usize, k: usize) -> Result<Partition> {
    if k == 0 {
        return Err(Error::Partition("worker count must be positive".into()));
    }
    if k > n {
        return Err(Error::Partition(format!("cannot split {n} indices across {k} workers")));
    }
    let (base, extra) = (n / k, n % k);
    let mut start = 0;
    let ranges = (0..k)
        .map(|i| {
            let len = base + usize::from(i < extra);
            let r = start..start + len;
            start += len;
            r
        })
        .collect();
    Ok(Partition { ranges })
}

/// Communication counters, unit-normalized.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct CommLedger {
    pub rounds: u64,
    pub scalars_transmitted: u64,
    pub modeled_latency_units: f64,
    pub modeled_byte_units: f64,
}

impl CommLedger {
    pub fn new() -> Self {
        Self::default()
    }

    fn charge(&mut self, workers: usize, len: usize) {
        self.rounds += 1;
        self.scalars_transmitted += len as u64;
        self.modeled_latency_units += (workers.max(2) as f64).log2();
        self.modeled_byte_units += len as f64;
    }

    /// Modeled cost `rounds·log₂K·t_initial + scalars·t_byte`.
    pub fn modeled_cost(&self, t_initial: f64, t_byte: f64) -> f64 {
        self.modeled_latency_units * t_initial + self.modeled_byte_units * t_byte
    }
}

/// `K` simulated workers.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ClusterSim {
    workers: usize,
}

impl ClusterSim {
    pub fn new(workers: usize) -> Result<Self> {
        if workers == 0 {
            return Err(Error::Partition("worker count must be positive".into()));
        }
        Ok(ClusterSim { workers })
    }

    pub fn workers(&self) -> usize {
        self.workers
    }

    /// Runs `f` once per worker. Workers are independent between barriers;
    /// they are evaluated in worker order.
    pub fn map_workers<T, F>(&self, f: F) -> Vec<T>
    where
        F: FnMut(usize) -> T,
    {
        (0..self.workers).map(f).collect()
    }

    /// Elementwise sum of one equal-length vector per worker, broadcast back
    /// to all workers.
    pub fn allreduce_sum(&self, contributions: &[Vec<f64>], ledger: &mut CommLedger) -> Result<Vec<f64>> {
        check_len(self.workers, contributions.len())?;
        let len = contributions[0].len();
        for c in contributions {
            check_len(len, c.len())?;
        }
        let mut out = vec![0.0; len];
        for c in contributions {
            for (o, v) in out.iter_mut().zip(c) {
                *o += v;
            }
        }
        ledger.charge(self.workers, len);
        Ok(out)
    }

    pub fn allreduce_scalar(&self, contributions: &[f64], ledger: &mut CommLedger) -> Result<f64> {
        check_len(self.workers, contributions.len())?;
        let total = contributions.iter().fold(0.0, |acc, v| acc + v);
        ledger.charge(self.workers, 1);
        Ok(total)
    }

    /// Minimum of one scalar per worker; metered like a scalar sum.
    pub fn allreduce_min(&self, contributions: &[f64], ledger: &mut CommLedger) -> Result<f64> {
        check_len(self.workers, contributions.len())?;
        let least = contributions.iter().fold(f64::INFINITY, |acc, &v| acc.min(v));
        ledger.charge(self.workers, 1);
        Ok(least)
    }

    /// Computes one partial vector per block of `partition` and sums them.
    pub fn reduce_blocks<F>(&self, partition: &Partition, ledger: &mut CommLedger, mut partial: F) -> Result<Vec<f64>>
    where
        F: FnMut(usize, Range<usize>) -> Vec<f64>,
    {
        check_len(self.workers, partition.n_blocks())?;
        let parts = self.map_workers(|k| partial(k, partition.block(k)));
        self.allreduce_sum(&parts, ledger)
    }

    /// Assembles a vector whose block `k` is owned by worker `k` onto every
    /// worker. Realized as an allreduce of zero-padded blocks, so it costs
    /// one round of `partition.total()` scalars.
    pub fn allgather(&self, partition: &Partition, v: &[f64], ledger: &mut CommLedger) -> Result<Vec<f64>> {
        check_len(partition.total(), v.len())?;
        check_len(self.workers, partition.n_blocks())?;
        let mut out = vec![0.0; v.len()];
        out.copy_from_slice(v);
        ledger.charge(self.workers, v.len());
        Ok(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn allreduce_of_basis_vectors() {
        let c = ClusterSim::new(4).unwrap();
        let mut ledger = CommLedger::new();
        let parts: Vec<Vec<f64>> = (0..4).map(|k| (0..4).map(|i| f64::from(u8::from(i == k))).collect()).collect();
        assert_eq!(c.allreduce_sum(&parts, &mut ledger).unwrap(), vec![1.0; 4]);
        assert_eq!(ledger.rounds, 1);
        assert_eq!(ledger.scalars_transmitted, 4);
        assert_eq!(ledger.modeled_latency_units, 2.0);
        assert_eq!(ledger.modeled_byte_units, 4.0);
    }

    #[test]
    fn single_worker_still_pays_latency() {
        let c = ClusterSim::new(1).unwrap();
        let mut ledger = CommLedger::new();
        assert_eq!(c.allreduce_sum(&[vec![5.0, 6.0]], &mut ledger).unwrap(), vec![5.0, 6.0]);
        assert_eq!(ledger.modeled_latency_units, 1.0);
    }

    #[test]
    fn scalar_rounds() {
        let c = ClusterSim::new(4).unwrap();
        let mut ledger = CommLedger::new();
        assert_eq!(c.allreduce_scalar(&[1.0, 2.0, 3.0, 4.0], &mut ledger).unwrap(), 10.0);
        let c2 = ClusterSim::new(2).unwrap();
        assert_eq!(c2.allreduce_scalar(&[0.5, -0.5], &mut ledger).unwrap(), 0.0);
        c2.allreduce_scalar(&[1.0, 1.0], &mut ledger).unwrap();
        assert_eq!(ledger.rounds, 3);
        assert_eq!(ledger.scalars_transmitted, 3);
    }

    #[test]
    fn mismatched_contributions_are_rejected() {
        let c = ClusterSim::new(2).unwrap();
        let mut ledger = CommLedger::new();
        assert!(c.allreduce_sum(&[vec![1.0], vec![1.0, 2.0]], &mut ledger).is_err());
        assert!(c.allreduce_sum(&[vec![1.0]], &mut ledger).is_err());
        assert!(c.allreduce_scalar(&[1.0], &mut ledger).is_err());
        assert_eq!(ledger, CommLedger::new());
    }

    #[test]
    fn sum_matches_sequential_oracle_exactly() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let parts: Vec<Vec<f64>> = (0..3).map(|_| (0..7).map(|_| rng.random_range(-1e3..1e3)).collect()).collect();
        let mut expected = vec![0.0; 7];
        for p in &parts {
            for i in 0..7 {
                expected[i] += p[i];
            }
        }
        let c = ClusterSim::new(3).unwrap();
        let got = c.allreduce_sum(&parts, &mut CommLedger::new()).unwrap();
        assert_eq!(got, expected);

        // The same vectors reduced again produce identical bits and ledgers.
        let mut l1 = CommLedger::new();
        let mut l2 = CommLedger::new();
        let a = c.allreduce_sum(&parts, &mut l1).unwrap();
        let b = c.allreduce_sum(&parts, &mut l2).unwrap();
        assert_eq!(a, b);
        assert_eq!(l1, l2);
    }

    #[test]
    fn even_partitions() {
        let sizes = |p: &Partition| p.blocks().iter().map(|r| r.len()).collect::<Vec<_>>();
        assert_eq!(sizes(&partition_even(10, 4).unwrap()), vec![3, 3, 2, 2]);
        assert_eq!(sizes(&partition_even(4, 4).unwrap()), vec![1, 1, 1, 1]);
        let one = partition_even(7, 1).unwrap();
        assert_eq!(one.blocks(), std::slice::from_ref(&(0..7)));
        assert!(partition_even(3, 4).is_err());
        assert!(partition_even(3, 0).is_err());
    }

    #[test]
    fn explicit_ranges_must_tile() {
        assert!(Partition::from_ranges(vec![0..2, 2..5]).is_ok());
        assert!(Partition::from_ranges(vec![0..2, 3..5]).is_err());
        assert!(Partition::from_ranges(vec![]).is_err());
    }

    proptest::proptest! {
        #[test]
        fn even_partition_covers(n in 1usize..200, k in 1usize..40) {
            proptest::prop_assume!(k <= n);
            let p = partition_even(n, k).unwrap();
            proptest::prop_assert_eq!(p.total(), n);
            let lens: Vec<usize> = p.blocks().iter().map(|r| r.len()).collect();
            let (lo, hi) = (*lens.iter().min().unwrap(), *lens.iter().max().unwrap());
            proptest::prop_assert!(hi - lo <= 1);
            proptest::prop_assert!(lens.windows(2).all(|w| w[0] >= w[1]));
        }
    }
}
