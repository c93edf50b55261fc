//! Merkle-tree collective commitments with octopus openings.
//!
//! A tree of height `h` commits `ell = 2^h` messages under a single root
//! digest. Opening a challenge set `c` reveals the messages at the chosen
//! leaves together with the octopus: the off-path labels needed to recompute
//! every authentication path, overlaps deduplicated.

use std::collections::{BTreeMap, BTreeSet};

use num_bigint::BigUint;
use num_traits::ToPrimitive;
use rand::Rng;
use rand::RngCore;

use crate::cno::{Challenge, ChallengeSpace};
use crate::rom::{Database, Digest, InverseIndex, Oracle, OracleInput, Tag};
use crate::{Error, Result};

/// Octopus statistics switch to sampling beyond this many challenges.
pub const STATS_EXHAUSTIVE_LIMIT: u64 = 1 << 16;

/// A vertex of the full binary tree of height `h`, identified by its depth
/// and the path bits from the root read as a big-endian integer. The root is
/// `(0, 0)`; leaf `i` is `(h, i)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct TreeVertex {
    pub depth: u32,
    pub path: u64,
}

impl TreeVertex {
    pub const ROOT: TreeVertex = TreeVertex { depth: 0, path: 0 };

    pub fn leaf(height: u32, index: u64) -> TreeVertex {
        debug_assert!(index < (1u64 << height) || height >= 64);
        TreeVertex { depth: height, path: index }
    }

    pub fn parent(&self) -> Option<TreeVertex> {
        (self.depth > 0).then(|| TreeVertex { depth: self.depth - 1, path: self.path >> 1 })
    }

    pub fn sibling(&self) -> Option<TreeVertex> {
        (self.depth > 0).then(|| TreeVertex { depth: self.depth, path: self.path ^ 1 })
    }

    pub fn child(&self, bit: u64) -> TreeVertex {
        TreeVertex { depth: self.depth + 1, path: self.path << 1 | (bit & 1) }
    }
}

/// Canonical octopus order: depth descending, then path-lexicographic.
fn canonical_cmp(a: &TreeVertex, b: &TreeVertex) -> std::cmp::Ordering {
    b.depth.cmp(&a.depth).then(a.path.cmp(&b.path))
}

/// The exact set of off-path vertices revealed when opening the leaves in
/// `c`: the leaves of the union of authentication paths, minus the opened
/// leaves themselves. Computed as the unmatched siblings of the ancestor
/// set.
pub fn octo_set(c: &Challenge, height: u32) -> Result<BTreeSet<TreeVertex>> {
    let ell = 1u64 << height;
    if c.is_empty() || c.iter().any(|&i| i as u64 >= ell) {
        return Err(Error::InvalidChallenge(format!(
            "challenge must be a nonempty subset of [{ell}]"
        )));
    }
    let mut ancestors: BTreeSet<TreeVertex> = BTreeSet::new();
    for &i in c {
        let mut v = TreeVertex::leaf(height, i as u64);
        loop {
            ancestors.insert(v);
            match v.parent() {
                Some(p) => v = p,
                None => break,
            }
        }
    }
    let mut out = BTreeSet::new();
    for v in &ancestors {
        if let Some(sib) = v.sibling() {
            if !ancestors.contains(&sib) {
                out.insert(sib);
            }
        }
    }
    Ok(out)
}

/// Prover-side Merkle commitment: all labels, level by level. `levels[d]`
/// holds the `2^d` labels at depth `d`; `levels[0][0]` is the root.
#[derive(Debug, Clone)]
pub struct MerkleCommitment {
    height: u32,
    levels: Vec<Vec<Digest>>,
}

impl MerkleCommitment {
    pub fn height(&self) -> u32 {
        self.height
    }

    pub fn leaf_count(&self) -> usize {
        1 << self.height
    }

    pub fn root(&self) -> &Digest {
        &self.levels[0][0]
    }

    pub fn label(&self, v: TreeVertex) -> &Digest {
        &self.levels[v.depth as usize][v.path as usize]
    }
}

/// Commit to `messages` with a Merkle tree: leaf hashes in index order, then
/// each internal level bottom-up, left to right. The message count must be a
/// power of two (callers pad with a fixed dummy message).
pub fn mcommit(oracle: &mut dyn Oracle, messages: &[Vec<u8>]) -> Result<MerkleCommitment> {
    let ell = messages.len();
    if ell == 0 || !ell.is_power_of_two() {
        return Err(Error::Parse(format!(
            "merkle commitment needs a power-of-two message count, got {ell}"
        )));
    }
    let height = ell.trailing_zeros();
    let mut levels: Vec<Vec<Digest>> = vec![Vec::new(); height as usize + 1];
    let mut leaves = Vec::with_capacity(ell);
    for m in messages {
        leaves.push(oracle.query(&OracleInput::msg(m.clone()))?);
    }
    levels[height as usize] = leaves;
    for depth in (0..height).rev() {
        let below = &levels[depth as usize + 1];
        let mut level = Vec::with_capacity(below.len() / 2);
        for pair in below.chunks_exact(2) {
            level.push(oracle.query(&OracleInput::node(&pair[0], &pair[1]))?);
        }
        levels[depth as usize] = level;
    }
    Ok(MerkleCommitment { height, levels })
}

/// An opened octopus: `(vertex, label)` entries in canonical order (depth
/// descending, then path-lexicographic).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Octopus {
    entries: Vec<(TreeVertex, Digest)>,
}

impl Octopus {
    pub fn new(mut entries: Vec<(TreeVertex, Digest)>) -> Self {
        entries.sort_by(|a, b| canonical_cmp(&a.0, &b.0));
        Octopus { entries }
    }

    pub fn entries(&self) -> &[(TreeVertex, Digest)] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn vertices(&self) -> impl Iterator<Item = TreeVertex> + '_ {
        self.entries.iter().map(|(v, _)| *v)
    }

    /// Wire form: count (2-byte BE), then per entry depth (1 byte), path
    /// bits packed big-endian into `ceil(h/8)` bytes, digest (`n/8` bytes).
    pub fn to_wire(&self, height: u32, n_bytes: usize) -> Vec<u8> {
        let path_bytes = height.div_ceil(8) as usize;
        let mut out = Vec::with_capacity(2 + self.entries.len() * (1 + path_bytes + n_bytes));
        out.extend_from_slice(&(self.entries.len() as u16).to_be_bytes());
        for (v, d) in &self.entries {
            out.push(v.depth as u8);
            out.extend_from_slice(&v.path.to_be_bytes()[8 - path_bytes..]);
            out.extend_from_slice(d.as_bytes());
        }
        out
    }

    /// Strict parse of the wire form; returns the octopus and the bytes
    /// consumed. Rejects out-of-range depths and paths.
    pub fn from_wire(bytes: &[u8], height: u32, n_bytes: usize) -> Option<(Octopus, usize)> {
        if bytes.len() < 2 {
            return None;
        }
        let count = u16::from_be_bytes(bytes[..2].try_into().unwrap()) as usize;
        let path_bytes = height.div_ceil(8) as usize;
        let entry_len = 1 + path_bytes + n_bytes;
        let total = 2 + count * entry_len;
        if bytes.len() < total {
            return None;
        }
        let mut entries = Vec::with_capacity(count);
        let mut off = 2;
        for _ in 0..count {
            let depth = bytes[off] as u32;
            let mut path_buf = [0u8; 8];
            path_buf[8 - path_bytes..].copy_from_slice(&bytes[off + 1..off + 1 + path_bytes]);
            let path = u64::from_be_bytes(path_buf);
            if depth > height || (depth < 64 && path >= 1u64 << depth) {
                return None;
            }
            let digest =
                Digest::from_bytes(bytes[off + 1 + path_bytes..off + entry_len].to_vec());
            entries.push((TreeVertex { depth, path }, digest));
            off += entry_len;
        }
        Some((Octopus { entries }, total))
    }
}

/// Open a commitment at a challenge: the covered messages and the octopus
/// labels, both in canonical order.
pub fn mopen(
    commitment: &MerkleCommitment,
    messages: &[Vec<u8>],
    c: &Challenge,
) -> Result<(Vec<(usize, Vec<u8>)>, Octopus)> {
    assert_eq!(messages.len(), commitment.leaf_count());
    let vertices = octo_set(c, commitment.height)?;
    let opened: Vec<(usize, Vec<u8>)> =
        c.iter().map(|&i| (i, messages[i].clone())).collect();
    let entries = vertices
        .iter()
        .map(|&v| (v, commitment.label(v).clone()))
        .collect();
    Ok((opened, Octopus::new(entries)))
}

/// Recompute the root from opened messages and octopus labels and compare.
/// The octopus must carry exactly the off-path vertex set for `c`; any
/// malformation yields `false`.
pub fn octo_verify(
    oracle: &mut dyn Oracle,
    c: &Challenge,
    root: &Digest,
    opened: &[(usize, Vec<u8>)],
    octopus: &Octopus,
    height: u32,
) -> Result<bool> {
    let Ok(expected) = octo_set(c, height) else {
        return Ok(false);
    };
    let supplied: BTreeSet<TreeVertex> = octopus.vertices().collect();
    if supplied.len() != octopus.len() || supplied != expected {
        return Ok(false);
    }
    if !crate::cno::opened_matches_challenge(opened, c) {
        return Ok(false);
    }

    let mut labels: BTreeMap<TreeVertex, Digest> = BTreeMap::new();
    for (v, d) in octopus.entries() {
        if d.len() != oracle.n_bytes() {
            return Ok(false);
        }
        labels.insert(*v, d.clone());
    }
    for (i, m) in opened {
        let d = oracle.query(&OracleInput::msg(m.clone()))?;
        labels.insert(TreeVertex::leaf(height, *i as u64), d);
    }

    // Fold the ancestor set bottom-up.
    let mut ancestors: BTreeSet<TreeVertex> = BTreeSet::new();
    for &i in c {
        let mut v = TreeVertex::leaf(height, i as u64);
        while let Some(p) = v.parent() {
            ancestors.insert(p);
            v = p;
        }
    }
    for depth in (0..height).rev() {
        for v in ancestors.iter().filter(|v| v.depth == depth) {
            let (Some(left), Some(right)) =
                (labels.get(&v.child(0)), labels.get(&v.child(1)))
            else {
                return Ok(false);
            };
            let d = oracle.query(&OracleInput::node(left, right))?;
            labels.insert(*v, d);
        }
    }
    Ok(labels.get(&TreeVertex::ROOT) == Some(root))
}

/// Reverse-engineer a Merkle tree from a root digest by repeatedly taking
/// smallest preimages in the database: an internal label splits when its
/// preimage is a `NODE` input of exactly two digests; a leaf label yields a
/// message when its preimage is a `MSG` input. Everything else is undefined
/// and undefinedness propagates downward.
pub fn mroot_inverse_indexed(
    index: &InverseIndex,
    root: &Digest,
    height: u32,
    n_bytes: usize,
) -> Vec<Option<Vec<u8>>> {
    let ell = 1usize << height;
    let mut labels: Vec<Option<Digest>> = vec![Some(root.clone())];
    for depth in 0..height {
        let mut next: Vec<Option<Digest>> = Vec::with_capacity(1 << (depth + 1));
        for label in &labels {
            let split = label.as_ref().and_then(|l| split_node_preimage(index, l, n_bytes));
            match split {
                Some((left, right)) => {
                    next.push(Some(left));
                    next.push(Some(right));
                }
                None => {
                    next.push(None);
                    next.push(None);
                }
            }
        }
        labels = next;
    }
    debug_assert_eq!(labels.len(), ell);
    labels
        .into_iter()
        .map(|label| {
            let preimage = index.inverse(&label?)?;
            (preimage.tag == Tag::Msg).then(|| preimage.payload.clone())
        })
        .collect()
}

/// Convenience wrapper building the inverse index on the fly.
pub fn mroot_inverse(
    db: &Database,
    root: &Digest,
    height: u32,
    n_bytes: usize,
) -> Vec<Option<Vec<u8>>> {
    mroot_inverse_indexed(&InverseIndex::build(db), root, height, n_bytes)
}

fn split_node_preimage(
    index: &InverseIndex,
    label: &Digest,
    n_bytes: usize,
) -> Option<(Digest, Digest)> {
    let preimage = index.inverse(label)?;
    if preimage.tag != Tag::Node || preimage.payload.len() != 2 * n_bytes {
        return None;
    }
    let (left, right) = preimage.payload.split_at(n_bytes);
    Some((Digest::from_bytes(left.to_vec()), Digest::from_bytes(right.to_vec())))
}

/// Summary of the octopus size distribution over a challenge population.
#[derive(Debug, Clone, PartialEq)]
pub struct OctoStats {
    pub min: usize,
    pub max: usize,
    pub mean: f64,
    pub histogram: BTreeMap<usize, u64>,
    pub samples: u64,
    pub exhaustive: bool,
}

/// The challenges octopus statistics range over.
pub enum StatsPopulation<'a> {
    /// A protocol challenge space (restriction respected).
    Space(&'a ChallengeSpace),
    /// All subsets of `[2^h]` of size exactly `kappa`.
    FixedWeight(usize),
}

/// Octopus size distribution: exhaustive when the population has at most
/// [`STATS_EXHAUSTIVE_LIMIT`] challenges, Monte-Carlo with `samples` draws
/// otherwise.
pub fn octo_stats(
    height: u32,
    population: StatsPopulation<'_>,
    samples: u64,
    rng: &mut dyn RngCore,
) -> Result<OctoStats> {
    let ell = 1u64 << height;
    let mut histogram: BTreeMap<usize, u64> = BTreeMap::new();
    let mut count = 0u64;
    let record = |size: usize, histogram: &mut BTreeMap<usize, u64>, count: &mut u64| {
        *histogram.entry(size).or_insert(0) += 1;
        *count += 1;
    };

    let exhaustive = match &population {
        StatsPopulation::Space(space) => {
            space.size().to_u64().is_some_and(|s| s <= STATS_EXHAUSTIVE_LIMIT)
        }
        StatsPopulation::FixedWeight(kappa) => {
            binomial(ell, *kappa as u64).is_some_and(|b| b <= STATS_EXHAUSTIVE_LIMIT)
        }
    };

    match (&population, exhaustive) {
        (StatsPopulation::Space(space), true) => {
            let size = space.size().to_u64().unwrap();
            for rank in 0..size {
                let c = space.unrank(&BigUint::from(rank));
                if !space.passes_filter(&c) {
                    continue;
                }
                record(octo_set(&c, height)?.len(), &mut histogram, &mut count);
            }
        }
        (StatsPopulation::Space(space), false) => {
            let size = space.size();
            let mut drawn = 0u64;
            while drawn < samples {
                let rank = sample_biguint_below(rng, size);
                let c = space.unrank(&rank);
                if !space.passes_filter(&c) {
                    continue;
                }
                record(octo_set(&c, height)?.len(), &mut histogram, &mut count);
                drawn += 1;
            }
        }
        (StatsPopulation::FixedWeight(kappa), true) => {
            crate::sigma::for_each_combination(ell as usize, *kappa, &mut |idxs| {
                let c: Challenge = idxs.iter().copied().collect();
                record(octo_set(&c, height).unwrap().len(), &mut histogram, &mut count);
                true
            });
        }
        (StatsPopulation::FixedWeight(kappa), false) => {
            for _ in 0..samples {
                let c = sample_fixed_weight(rng, ell, *kappa);
                record(octo_set(&c, height)?.len(), &mut histogram, &mut count);
            }
        }
    }

    if count == 0 {
        return Err(Error::InvalidChallenge("empty challenge population".into()));
    }
    let min = *histogram.keys().next().unwrap();
    let max = *histogram.keys().next_back().unwrap();
    let total: u64 = histogram.iter().map(|(size, n)| *size as u64 * n).sum();
    Ok(OctoStats {
        min,
        max,
        mean: total as f64 / count as f64,
        histogram,
        samples: count,
        exhaustive,
    })
}

fn binomial(n: u64, k: u64) -> Option<u64> {
    if k > n {
        return Some(0);
    }
    let k = k.min(n - k);
    let mut out = 1u64;
    for i in 0..k {
        out = out.checked_mul(n - i)?;
        out /= i + 1;
    }
    Some(out)
}

fn sample_biguint_below(rng: &mut dyn RngCore, bound: &BigUint) -> BigUint {
    let bytes = bound.bits().div_ceil(8) as usize;
    loop {
        let mut buf = vec![0u8; bytes];
        rng.fill_bytes(&mut buf);
        let candidate = BigUint::from_bytes_be(&buf);
        if &candidate < bound {
            return candidate;
        }
    }
}

fn sample_fixed_weight(rng: &mut dyn RngCore, ell: u64, kappa: usize) -> Challenge {
    let mut c = Challenge::new();
    while c.len() < kappa {
        c.insert(rng.gen_range(0..ell) as usize);
    }
    c
}

/// Restrict a challenge space to the challenges whose octopus has at most
/// `bound` vertices. Membership is validated eagerly when the space is small
/// enough to enumerate; fails with [`Error::EmptyRestriction`] when nothing
/// qualifies.
pub fn bounded_challenge_space(
    space: &ChallengeSpace,
    height: u32,
    bound: usize,
) -> Result<ChallengeSpace> {
    let filter = std::sync::Arc::new(move |c: &Challenge| {
        octo_set(c, height).map(|o| o.len() <= bound).unwrap_or(false)
    });
    let restricted = space.clone().restricted(filter);
    if let Some(size) = space.size().to_u64().filter(|&s| s <= STATS_EXHAUSTIVE_LIMIT) {
        let any = (0..size).any(|rank| {
            let c = restricted.unrank(&BigUint::from(rank));
            restricted.passes_filter(&c)
        });
        if !any {
            return Err(Error::EmptyRestriction { bound });
        }
    }
    Ok(restricted)
}
