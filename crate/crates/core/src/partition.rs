//! Data distribution across machines and support set selection.

use alloc::collections::BTreeSet;
use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::exact::Dataset;
use crate::kernel::{check_points, kernel_unchecked, Hyperparameters, InputPoint};

/// Training blocks `D_1..D_M` paired with query blocks `U_1..U_M`.
///
/// `train_index[m][k]` is the position, in the caller's training list, of
/// the k-th point of block m (likewise `query_index` for queries).
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Partition {
    blocks: Vec<Dataset>,
    query_blocks: Vec<Vec<InputPoint>>,
    train_index: Vec<Vec<usize>>,
    query_index: Vec<Vec<usize>>,
}

impl Partition {
    /// Builds a partition from per-point block labels. Within a block points
    /// keep their original relative order.
    pub fn from_assignment(
        train: &Dataset,
        query: &[InputPoint],
        machines: usize,
        train_labels: &[usize],
        query_labels: &[usize],
    ) -> Result<Self> {
        if train_labels.len() != train.len() || query_labels.len() != query.len() {
            return Err(Error::InvalidArgument("one label per point is required".into()));
        }
        if let Some(bad) = train_labels.iter().chain(query_labels).find(|l| **l >= machines) {
            return Err(Error::InvalidArgument(format!(
                "block label {bad} out of range for {machines} machines"
            )));
        }
        let mut train_index = vec![Vec::new(); machines];
        for (i, &l) in train_labels.iter().enumerate() {
            train_index[l].push(i);
        }
        let mut query_index = vec![Vec::new(); machines];
        for (i, &l) in query_labels.iter().enumerate() {
            query_index[l].push(i);
        }
        let blocks = train_index.iter().map(|idx| train.select(idx)).collect();
        let query_blocks = query_index
            .iter()
            .map(|idx| idx.iter().map(|&i| query[i].clone()).collect())
            .collect();
        Ok(Self {
            blocks,
            query_blocks,
            train_index,
            query_index,
        })
    }

    /// Takes blocks as given. Indices refer to the concatenation of the
    /// blocks (and of the query blocks) in block order.
    pub fn from_blocks(blocks: Vec<Dataset>, query_blocks: Vec<Vec<InputPoint>>) -> Result<Self> {
        if blocks.len() != query_blocks.len() {
            return Err(Error::InvalidArgument(format!(
                "{} training blocks but {} query blocks",
                blocks.len(),
                query_blocks.len()
            )));
        }
        let mut ids = BTreeSet::new();
        for p in blocks.iter().flat_map(|b| b.inputs()) {
            if !ids.insert(p.id) {
                return Err(Error::DuplicateId(p.id));
            }
        }
        let mut qids = BTreeSet::new();
        for p in query_blocks.iter().flatten() {
            if !qids.insert(p.id) {
                return Err(Error::DuplicateId(p.id));
            }
        }
        let train_index = running_indices(blocks.iter().map(Dataset::len));
        let query_index = running_indices(query_blocks.iter().map(Vec::len));
        Ok(Self {
            blocks,
            query_blocks,
            train_index,
            query_index,
        })
    }

    pub fn num_blocks(&self) -> usize {
        self.blocks.len()
    }

    pub fn blocks(&self) -> &[Dataset] {
        &self.blocks
    }

    pub fn query_blocks(&self) -> &[Vec<InputPoint>] {
        &self.query_blocks
    }

    pub fn train_index(&self) -> &[Vec<usize>] {
        &self.train_index
    }

    pub fn query_index(&self) -> &[Vec<usize>] {
        &self.query_index
    }

    pub fn train_len(&self) -> usize {
        self.blocks.iter().map(Dataset::len).sum()
    }

    pub fn query_len(&self) -> usize {
        self.query_blocks.iter().map(Vec::len).sum()
    }

    /// All training data, blocks concatenated in block order.
    pub fn stacked_train(&self) -> Dataset {
        Dataset::concat(&self.blocks).expect("partition blocks are disjoint")
    }
}

fn running_indices(sizes: impl Iterator<Item = usize>) -> Vec<Vec<usize>> {
    let mut next = 0;
    sizes
        .map(|n| {
            let idx = (next..next + n).collect();
            next += n;
            idx
        })
        .collect()
}

fn check_machines(train: &Dataset, machines: usize) -> Result<()> {
    if machines == 0 {
        return Err(Error::InvalidArgument("at least one machine is required".into()));
    }
    if machines > train.len() {
        return Err(Error::InvalidArgument(format!(
            "{machines} machines but only {} training points",
            train.len()
        )));
    }
    Ok(())
}

/// Round-robin assignment by index: point `i` goes to block `i mod M`.
pub fn partition_even(train: &Dataset, query: &[InputPoint], machines: usize) -> Result<Partition> {
    check_machines(train, machines)?;
    let tl: Vec<usize> = (0..train.len()).map(|i| i % machines).collect();
    let ql: Vec<usize> = (0..query.len()).map(|i| i % machines).collect();
    Partition::from_assignment(train, query, machines, &tl, &ql)
}

/// Machine `machine`'s cluster center: a uniformly drawn point of its block,
/// using a per-machine stream of the seeded generator.
pub fn draw_cluster_center(block: &Dataset, seed: u64, machine: usize) -> Result<Vec<f64>> {
    if block.is_empty() {
        return Err(Error::InvalidArgument(format!(
            "machine {machine} has no data to draw a cluster center from"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(machine as u64);
    let k = rng.random_range(0..block.len());
    Ok(block.inputs()[k].coords.clone())
}

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Capacity-constrained nearest-center assignment.
///
/// Points are processed in order of their distance to their nearest center
/// (ties by position); each takes the nearest center that still has room
/// (ties by center index). Points closest to a full center therefore keep
/// their place and the farthest ones overflow.
pub fn assign_to_centers(points: &[&[f64]], centers: &[Vec<f64>], capacity: usize) -> Result<Vec<usize>> {
    if centers.is_empty() {
        return Err(Error::InvalidArgument("no cluster centers".into()));
    }
    if capacity.saturating_mul(centers.len()) < points.len() {
        return Err(Error::InvalidArgument(format!(
            "capacity {capacity} x {} centers cannot hold {} points",
            centers.len(),
            points.len()
        )));
    }
    let dists: Vec<Vec<f64>> = points
        .iter()
        .map(|p| centers.iter().map(|c| sq_dist(p, c)).collect())
        .collect();
    let nearest = |i: usize| dists[i].iter().copied().fold(f64::INFINITY, f64::min);
    let mut order: Vec<usize> = (0..points.len()).collect();
    order.sort_by(|&a, &b| nearest(a).total_cmp(&nearest(b)).then(a.cmp(&b)));

    let mut load = vec![0usize; centers.len()];
    let mut labels = vec![0usize; points.len()];
    let mut prefs: Vec<usize> = Vec::with_capacity(centers.len());
    for i in order {
        prefs.clear();
        prefs.extend(0..centers.len());
        prefs.sort_by(|&a, &b| dists[i][a].total_cmp(&dists[i][b]).then(a.cmp(&b)));
        let c = prefs
            .iter()
            .copied()
            .find(|&c| load[c] < capacity)
            .expect("total capacity checked above");
        load[c] += 1;
        labels[i] = c;
    }
    Ok(labels)
}

/// Clustered assignment given the machines' centers. Training and query
/// points are capped at `⌈|D|/M⌉` and `⌈|U|/M⌉` per machine.
pub fn assign_clustered(train: &Dataset, query: &[InputPoint], centers: &[Vec<f64>]) -> Result<Partition> {
    let machines = centers.len();
    check_machines(train, machines)?;
    let train_pts: Vec<&[f64]> = train.inputs().iter().map(|p| p.coords.as_slice()).collect();
    let query_pts: Vec<&[f64]> = query.iter().map(|p| p.coords.as_slice()).collect();
    let tl = assign_to_centers(&train_pts, centers, train.len().div_ceil(machines))?;
    let ql = assign_to_centers(&query_pts, centers, query.len().div_ceil(machines).max(1))?;
    Partition::from_assignment(train, query, machines, &tl, &ql)
}

/// Each machine draws one center from its even-partition block, then every
/// training and query input goes to the nearest center with room.
pub fn partition_clustered(train: &Dataset, query: &[InputPoint], machines: usize, seed: u64) -> Result<Partition> {
    let even = partition_even(train, query, machines)?;
    let centers = even
        .blocks()
        .iter()
        .enumerate()
        .map(|(m, b)| draw_cluster_center(b, seed, m))
        .collect::<Result<Vec<_>>>()?;
    assign_clustered(train, query, &centers)
}

/// The common support set `S`. Its outputs are never observed.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct SupportSet {
    points: Vec<InputPoint>,
}

impl SupportSet {
    pub fn new(points: Vec<InputPoint>) -> Result<Self> {
        if points.is_empty() {
            return Err(Error::InvalidArgument("support set must be nonempty".into()));
        }
        let mut seen = BTreeSet::new();
        for p in &points {
            if !seen.insert(p.id) {
                return Err(Error::DuplicateId(p.id));
            }
        }
        Ok(Self { points })
    }

    pub fn points(&self) -> &[InputPoint] {
        &self.points
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}

/// Seeded uniform subsample (without replacement) of the training inputs,
/// returned in index order. The copies get fresh ids `first_id, first_id+1,
/// ...` so they never share noise with the data they were drawn from.
pub fn candidate_pool(train: &Dataset, pool_size: usize, seed: u64, first_id: u64) -> Vec<InputPoint> {
    let n = train.len();
    let k = pool_size.min(n);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut idx = rand::seq::index::sample(&mut rng, n, k).into_vec();
    idx.sort_unstable();
    idx.into_iter()
        .enumerate()
        .map(|(j, i)| InputPoint::new(first_id + j as u64, train.inputs()[i].coords.clone()))
        .collect()
}

/// Greedy differential-entropy selection: `k` times, add the remaining
/// candidate with the largest posterior variance given the points picked so
/// far (ties to the lowest candidate index).
///
/// The posterior variances are kept current with one incremental Cholesky
/// row per pick. Candidates repeated by id are considered once.
pub fn select_support_set(candidates: &[InputPoint], k: usize, h: &Hyperparameters) -> Result<SupportSet> {
    check_points(candidates, h)?;
    let mut seen = BTreeSet::new();
    let cands: Vec<&InputPoint> = candidates.iter().filter(|p| seen.insert(p.id)).collect();
    let n = cands.len();
    if k == 0 || k > n {
        return Err(Error::InvalidArgument(format!(
            "support size {k} must be in 1..={n}"
        )));
    }
    let mut var: Vec<f64> = cands.iter().map(|p| kernel_unchecked(p, p, h)).collect();
    let mut chosen = vec![false; n];
    // rows[t][x]: entry t of L⁻¹ Σ_Sx for candidate x.
    let mut rows: Vec<Vec<f64>> = Vec::with_capacity(k);
    let mut picked = Vec::with_capacity(k);

    for _ in 0..k {
        let mut best: Option<usize> = None;
        for x in 0..n {
            if chosen[x] {
                continue;
            }
            if best.is_none_or(|b| var[x] > var[b]) {
                best = Some(x);
            }
        }
        let p = best.expect("k <= n leaves a candidate");
        debug_assert!((0..n).filter(|x| !chosen[*x]).all(|x| var[p] >= var[x]));
        if !(var[p] > 0.0) {
            return Err(Error::NotPositiveDefinite { jitter: 0.0 });
        }
        let diag = libm::sqrt(var[p]);
        chosen[p] = true;
        picked.push(cands[p].clone());

        let mut row = vec![0.0; n];
        row[p] = diag;
        for x in 0..n {
            if chosen[x] {
                continue;
            }
            let mut s = kernel_unchecked(cands[p], cands[x], h);
            for r in &rows {
                s -= r[p] * r[x];
            }
            let e = s / diag;
            row[x] = e;
            var[x] -= e * e;
        }
        var[p] = 0.0;
        rows.push(row);
    }
    SupportSet::new(picked)
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    fn line(xs: &[f64]) -> Dataset {
        Dataset::new(
            xs.iter().enumerate().map(|(i, x)| InputPoint::new(i as u64, vec![*x])).collect(),
            xs.iter().map(|x| x * 2.0).collect(),
            0.0,
        )
        .unwrap()
    }

    fn ids(d: &Dataset) -> Vec<u64> {
        d.inputs().iter().map(|p| p.id).collect()
    }

    #[test]
    fn even_blocks_of_two() {
        let d = line(&[0., 1., 2., 3., 4., 5., 6., 7.]);
        let p = partition_even(&d, &[], 4).unwrap();
        assert!(p.blocks().iter().all(|b| b.len() == 2));
        assert_eq!(ids(&p.blocks()[1]), vec![1, 5]);
    }

    #[test]
    fn single_machine_is_whole_dataset() {
        let d = line(&[0., 1., 2.]);
        let p = partition_even(&d, &[], 1).unwrap();
        assert_eq!(p.blocks()[0], d);
    }

    #[test]
    fn uneven_sizes_differ_by_one() {
        let d = line(&[0., 1., 2., 3., 4., 5., 6.]);
        let p = partition_even(&d, &[], 2).unwrap();
        let sizes: Vec<_> = p.blocks().iter().map(Dataset::len).collect();
        assert_eq!(sizes, vec![4, 3]);
    }

    #[test]
    fn too_many_machines() {
        let d = line(&[0., 1.]);
        assert!(partition_even(&d, &[], 3).is_err());
        assert!(partition_even(&d, &[], 0).is_err());
    }

    #[test]
    fn nearest_center_assignment() {
        let pts: [&[f64]; 2] = [&[0.1], &[9.9]];
        let labels = assign_to_centers(&pts, &[vec![0.0], vec![10.0]], 2).unwrap();
        assert_eq!(labels, vec![0, 1]);
    }

    #[test]
    fn overflow_goes_to_farthest() {
        // All four are nearer center 0; capacity 2 pushes the two farthest out.
        let pts: [&[f64]; 4] = [&[3.0], &[0.5], &[4.0], &[1.0]];
        let labels = assign_to_centers(&pts, &[vec![0.0], vec![10.0]], 2).unwrap();
        assert_eq!(labels, vec![1, 0, 1, 0]);
    }

    #[test]
    fn clustered_single_machine() {
        let d = line(&[5., 1., 3.]);
        let q = [InputPoint::new(10, vec![2.0])];
        let p = partition_clustered(&d, &q, 1, 9).unwrap();
        assert_eq!(p.blocks()[0], d);
        assert_eq!(p.query_blocks()[0].len(), 1);
    }

    #[test]
    fn clustered_is_deterministic_and_covers() {
        let xs: Vec<f64> = (0..40).map(|i| ((i * 37) % 41) as f64 * 0.25).collect();
        let d = line(&xs);
        let q: Vec<_> = (0..9).map(|i| InputPoint::new(100 + i, vec![i as f64])).collect();
        let a = partition_clustered(&d, &q, 4, 3).unwrap();
        let b = partition_clustered(&d, &q, 4, 3).unwrap();
        assert_eq!(a, b);
        let mut all: Vec<u64> = a.blocks().iter().flat_map(ids).collect();
        all.sort_unstable();
        assert_eq!(all, (0..40).collect::<Vec<_>>());
        assert!(a.blocks().iter().all(|b| b.len() <= 10));
        assert!(a.query_blocks().iter().all(|b| b.len() <= 3));
        assert_eq!(a.query_len(), 9);
    }

    #[test]
    fn first_pick_is_lowest_index_on_ties() {
        let h = Hyperparameters::new(1.0, 0.1, vec![1.0]).unwrap();
        let c: Vec<_> = [3.0, 1.0, 2.0].iter().enumerate().map(|(i, x)| InputPoint::new(i as u64, vec![*x])).collect();
        let s = select_support_set(&c, 1, &h).unwrap();
        assert_eq!(s.points()[0].id, 0);
    }

    #[test]
    fn selecting_everything_returns_all() {
        let h = Hyperparameters::new(1.0, 0.1, vec![1.0]).unwrap();
        let c: Vec<_> = (0..5).map(|i| InputPoint::new(i, vec![i as f64 * 0.3])).collect();
        let s = select_support_set(&c, 5, &h).unwrap();
        let mut got: Vec<u64> = s.points().iter().map(|p| p.id).collect();
        got.sort_unstable();
        assert_eq!(got, vec![0, 1, 2, 3, 4]);
    }

    #[test]
    fn picks_far_point_second() {
        let h = Hyperparameters::new(1.0, 0.01, vec![1.0]).unwrap();
        let c: Vec<_> = [0.0, 0.1, 5.0].iter().enumerate().map(|(i, x)| InputPoint::new(i as u64, vec![*x])).collect();
        // Residual variances given {0}: 1.01 - k²/1.01.
        let k01 = libm::exp(-0.5 * 0.01);
        let k02 = libm::exp(-0.5 * 25.0);
        assert!(1.01 - k02 * k02 / 1.01 > 1.01 - k01 * k01 / 1.01);
        let s = select_support_set(&c, 2, &h).unwrap();
        assert_eq!(s.points().iter().map(|p| p.id).collect::<Vec<_>>(), vec![0, 2]);
    }

    #[test]
    fn duplicates_do_not_change_selection() {
        let h = Hyperparameters::new(1.0, 0.05, vec![0.8]).unwrap();
        let c: Vec<_> = (0..12).map(|i| InputPoint::new(i, vec![((i * 7) % 12) as f64 * 0.4])).collect();
        let mut dup = c.clone();
        dup.extend(c.iter().take(5).cloned());
        assert_eq!(select_support_set(&c, 6, &h).unwrap(), select_support_set(&dup, 6, &h).unwrap());
    }

    #[test]
    fn pool_uses_fresh_ids() {
        let d = line(&(0..50).map(f64::from).collect::<Vec<_>>());
        let pool = candidate_pool(&d, 10, 1, 1000);
        assert_eq!(pool.len(), 10);
        assert!(pool.iter().enumerate().all(|(j, p)| p.id == 1000 + j as u64));
        assert_eq!(pool, candidate_pool(&d, 10, 1, 1000));
        assert_eq!(candidate_pool(&d, 80, 1, 0).len(), 50);
    }
}
