//! Plain Σ-protocol descriptors and the generalized soundness machinery
//! shared with commit-and-open protocols.
//!
//! A soundness system is a monotone family of "qualifying" challenge sets: a
//! witness is computable from valid responses covering any qualifying set.
//! Challenges are identified with their rank in the challenge space, so the
//! same combinatorial object serves plain protocols (where a challenge is an
//! index) and commit-and-open protocols (where a challenge is a subset of
//! commitment slots reachable through `unrank`).

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::sync::Arc;

use num_bigint::{BigInt, BigUint};
use num_rational::Ratio;
use num_traits::{One, ToPrimitive, Zero};
use rand::RngCore;

use crate::{Error, Result};

pub type BigRational = Ratio<BigInt>;

/// A set of challenge ranks.
pub type RankSet = BTreeSet<u64>;

/// Exhaustive subset scans are refused beyond this challenge-space size.
pub const EXHAUSTIVE_SCAN_LIMIT: u64 = 24;

/// Subset searches inside a candidate set are refused beyond this size.
pub const SUBSET_SEARCH_LIMIT: usize = 20;

type MembershipFn = dyn Fn(&RankSet) -> bool + Send + Sync;
type MinSetsFn = dyn Fn() -> Result<Vec<RankSet>> + Send + Sync;

/// A monotone increasing family of qualifying challenge sets over a
/// challenge space of a given size, with a membership test, an enumerator of
/// the minimal qualifying sets, and optionally a closed form for the trivial
/// attack probability.
#[derive(Clone)]
pub struct SoundnessSystem {
    size: BigUint,
    membership: Arc<MembershipFn>,
    min_sets: Arc<MinSetsFn>,
    p_triv_closed_form: Option<BigRational>,
}

impl fmt::Debug for SoundnessSystem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("SoundnessSystem")
            .field("size", &self.size)
            .field("p_triv_closed_form", &self.p_triv_closed_form)
            .finish_non_exhaustive()
    }
}

impl SoundnessSystem {
    pub fn new(
        size: impl Into<BigUint>,
        membership: Arc<MembershipFn>,
        min_sets: Arc<MinSetsFn>,
        p_triv_closed_form: Option<BigRational>,
    ) -> Self {
        SoundnessSystem { size: size.into(), membership, min_sets, p_triv_closed_form }
    }

    /// Threshold system: a set qualifies iff it has at least `k` elements.
    /// Minimal sets are exactly the `k`-subsets; the trivial attack keeps a
    /// largest non-qualifying set of `k - 1` challenges.
    pub fn threshold(k: u64, size: u64) -> Self {
        assert!(k >= 1 && k <= size, "threshold must satisfy 1 <= k <= |C|");
        let closed = Ratio::new(BigInt::from(k - 1), BigInt::from(size));
        SoundnessSystem {
            size: BigUint::from(size),
            membership: Arc::new(move |s: &RankSet| s.len() as u64 >= k),
            min_sets: Arc::new(move || {
                if k > size {
                    return Ok(vec![]);
                }
                let mut out = Vec::new();
                for_each_combination(size as usize, k as usize, &mut |idxs| {
                    out.push(idxs.iter().map(|&i| i as u64).collect());
                    true
                });
                Ok(out)
            }),
            p_triv_closed_form: Some(closed),
        }
    }

    /// Only the full challenge space qualifies. The trivial attack keeps all
    /// but one challenge.
    pub fn full_space(size: u64) -> Self {
        assert!(size >= 1);
        let closed = Ratio::new(BigInt::from(size - 1), BigInt::from(size));
        SoundnessSystem {
            size: BigUint::from(size),
            membership: Arc::new(move |s: &RankSet| s.len() as u64 == size),
            min_sets: Arc::new(move || Ok(vec![(0..size).collect()])),
            p_triv_closed_form: Some(closed),
        }
    }

    /// The r-fold disjunction over a product challenge space: a set of
    /// product ranks qualifies iff the projection onto some repetition
    /// qualifies in the base system. The trivial attack probability is
    /// exactly the base probability to the r-th power.
    pub fn product(base: &SoundnessSystem, r: u32) -> Result<SoundnessSystem> {
        assert!(r >= 1);
        let base_size = base.size.to_u64().ok_or_else(|| Error::ChallengeSpaceTooLarge {
            op: "soundness product",
            size: base.size.to_string(),
        })?;
        let size = base.size.pow(r);
        let base_membership = base.membership.clone();
        let membership: Arc<MembershipFn> = {
            let base_membership = base_membership.clone();
            Arc::new(move |s: &RankSet| {
                for j in 0..r {
                    let proj: RankSet =
                        s.iter().map(|&rank| product_digit(rank, base_size, r, j)).collect();
                    if base_membership(&proj) {
                        return true;
                    }
                }
                false
            })
        };
        let min_sets: Arc<MinSetsFn> = {
            let base = base.clone();
            let membership = membership.clone();
            Arc::new(move || {
                // Lift every base minimal set into each coordinate, padding
                // the remaining coordinates with challenge 0, then keep the
                // lifts that are genuinely minimal. This enumeration is
                // sound (every emitted set is minimal) but not exhaustive;
                // extraction over products never consults it.
                let mut out: BTreeSet<RankSet> = BTreeSet::new();
                for s in base.min_sets()? {
                    for j in 0..r {
                        let weight = BigUint::from(base.size.to_u64().unwrap())
                            .pow(r - 1 - j);
                        let Some(weight) = weight.to_u64() else {
                            return Err(Error::ChallengeSpaceTooLarge {
                                op: "product min-set enumeration",
                                size: "ranks exceed u64".into(),
                            });
                        };
                        let lifted: RankSet = s
                            .iter()
                            .filter_map(|&c| c.checked_mul(weight))
                            .collect();
                        if lifted.len() == s.len()
                            && is_minimal_in(&membership, &lifted)
                        {
                            out.insert(lifted);
                        }
                    }
                }
                Ok(out.into_iter().collect())
            })
        };
        let closed = match &base.p_triv_closed_form {
            Some(p) => Some(pow_rational(p, r)),
            None => {
                if base.size.to_u64().is_some_and(|s| s <= EXHAUSTIVE_SCAN_LIMIT) {
                    Some(pow_rational(&base.p_triv()?, r))
                } else {
                    None
                }
            }
        };
        Ok(SoundnessSystem { size, membership, min_sets, p_triv_closed_form: closed })
    }

    /// Challenge-space size |C|.
    pub fn size(&self) -> &BigUint {
        &self.size
    }

    pub fn is_member(&self, s: &RankSet) -> bool {
        (self.membership)(s)
    }

    /// Whether `s` qualifies and no proper subset does. For a monotone
    /// family it suffices to drop one element at a time.
    pub fn is_minimal(&self, s: &RankSet) -> bool {
        if !self.is_member(s) {
            return false;
        }
        is_minimal_in(&self.membership, s)
    }

    /// The minimal qualifying sets, in lexicographic order of their sorted
    /// challenge ranks.
    pub fn min_sets(&self) -> Result<Vec<RankSet>> {
        let mut sets = (self.min_sets)()?;
        sets.sort();
        Ok(sets)
    }

    /// Trivial attack probability: `(1/|C|) * max{ |S| : S not qualifying }`.
    /// Uses the closed form when one is attached, otherwise an exhaustive
    /// subset scan gated to |C| <= 24.
    pub fn p_triv(&self) -> Result<BigRational> {
        if let Some(p) = &self.p_triv_closed_form {
            return Ok(p.clone());
        }
        self.p_triv_exhaustive()
    }

    /// Exhaustive evaluation of the trivial attack probability, scanning
    /// subset sizes from large to small and stopping at the first
    /// non-qualifying set.
    pub fn p_triv_exhaustive(&self) -> Result<BigRational> {
        let n = self
            .size
            .to_u64()
            .filter(|&n| n <= EXHAUSTIVE_SCAN_LIMIT)
            .ok_or_else(|| Error::ChallengeSpaceTooLarge {
                op: "p_triv exhaustive scan",
                size: self.size.to_string(),
            })? as usize;
        for k in (0..=n).rev() {
            let mut found_non_member = false;
            for_each_combination(n, k, &mut |idxs| {
                let s: RankSet = idxs.iter().map(|&i| i as u64).collect();
                if !self.is_member(&s) {
                    found_non_member = true;
                    return false;
                }
                true
            });
            if found_non_member {
                return Ok(Ratio::new(BigInt::from(k), BigInt::from(n as u64)));
            }
        }
        // Every subset qualifies; the trivial attack has nothing to keep.
        Ok(BigRational::zero())
    }

    /// First minimal qualifying set contained in `candidates`, scanning the
    /// enumerated minimal sets in lexicographic order.
    pub fn first_covered_min_set(&self, candidates: &RankSet) -> Result<Option<RankSet>> {
        for s in self.min_sets()? {
            if s.is_subset(candidates) {
                return Ok(Some(s));
            }
        }
        Ok(None)
    }

    /// First qualifying subset of `candidates` in size-ascending
    /// lexicographic order, found through membership tests alone. The result
    /// is minimal: it qualifies while every smaller subset was already seen
    /// to fail. Increments `membership_tests` once per test.
    pub fn search_min_qualifying(
        &self,
        candidates: &RankSet,
        membership_tests: &mut u64,
    ) -> Result<Option<RankSet>> {
        let items: Vec<u64> = candidates.iter().copied().collect();
        if items.len() > SUBSET_SEARCH_LIMIT {
            return Err(Error::ChallengeSpaceTooLarge {
                op: "qualifying-subset search",
                size: items.len().to_string(),
            });
        }
        for k in 1..=items.len() {
            let mut hit: Option<RankSet> = None;
            for_each_combination(items.len(), k, &mut |idxs| {
                let s: RankSet = idxs.iter().map(|&i| items[i]).collect();
                *membership_tests += 1;
                if self.is_member(&s) {
                    hit = Some(s);
                    return false;
                }
                true
            });
            if hit.is_some() {
                return Ok(hit);
            }
        }
        Ok(None)
    }
}

fn is_minimal_in(membership: &Arc<MembershipFn>, s: &RankSet) -> bool {
    s.iter().all(|&x| {
        let mut smaller = s.clone();
        smaller.remove(&x);
        !membership(&smaller)
    })
}

/// Digit `j` (repetition `j`, most significant first) of a product rank.
pub(crate) fn product_digit(rank: u64, base_size: u64, r: u32, j: u32) -> u64 {
    let mut rank = rank;
    let mut digits = vec![0u64; r as usize];
    for slot in (0..r as usize).rev() {
        digits[slot] = rank % base_size;
        rank /= base_size;
    }
    digits[j as usize]
}

pub(crate) fn pow_rational(p: &BigRational, r: u32) -> BigRational {
    let mut out = BigRational::one();
    for _ in 0..r {
        out *= p.clone();
    }
    out
}

/// Visits the k-subsets of {0,..,n-1} in lexicographic order. The visitor
/// returns `false` to stop early.
pub(crate) fn for_each_combination(
    n: usize,
    k: usize,
    visit: &mut dyn FnMut(&[usize]) -> bool,
) {
    if k > n {
        return;
    }
    let mut idxs: Vec<usize> = (0..k).collect();
    loop {
        if !visit(&idxs) {
            return;
        }
        // Advance to the next combination.
        let mut i = k;
        loop {
            if i == 0 {
                return;
            }
            i -= 1;
            if idxs[i] != i + n - k {
                break;
            }
            if i == 0 {
                return;
            }
        }
        idxs[i] += 1;
        for j in i + 1..k {
            idxs[j] = idxs[j - 1] + 1;
        }
    }
}

/// The prover-side output of a Σ-protocol first round: the public first
/// message and the private state all responses derive from.
#[derive(Debug, Clone)]
pub struct SigmaCommitment {
    pub first_message: Vec<u8>,
    pub state: Vec<u8>,
}

type SigmaCommitFn = dyn Fn(&[u8], &[u8], &mut dyn RngCore) -> SigmaCommitment + Send + Sync;
type SigmaRespondFn = dyn Fn(&[u8], u64) -> Vec<u8> + Send + Sync;
type SigmaVerifyFn = dyn Fn(&[u8], &[u8], u64, &[u8]) -> bool + Send + Sync;
type SigmaExtractFn =
    dyn Fn(&[u8], &[u8], &RankSet, &BTreeMap<u64, Vec<u8>>) -> Option<Vec<u8>> + Send + Sync;
type RelationFn = dyn Fn(&[u8], &[u8]) -> bool + Send + Sync;

/// A plain Σ-protocol with challenges identified with `0..challenge_count`.
/// Byte strings carry instances, witnesses, first messages and responses so
/// that protocols compose through hashing and serialization.
#[derive(Clone)]
pub struct SigmaProtocol {
    challenge_count: u64,
    commit: Arc<SigmaCommitFn>,
    respond: Arc<SigmaRespondFn>,
    verify: Arc<SigmaVerifyFn>,
    extract: Arc<SigmaExtractFn>,
    relation: Arc<RelationFn>,
    sys: SoundnessSystem,
}

impl fmt::Debug for SigmaProtocol {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("SigmaProtocol")
            .field("challenge_count", &self.challenge_count)
            .field("sys", &self.sys)
            .finish_non_exhaustive()
    }
}

impl SigmaProtocol {
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        challenge_count: u64,
        sys: SoundnessSystem,
        commit: Arc<SigmaCommitFn>,
        respond: Arc<SigmaRespondFn>,
        verify: Arc<SigmaVerifyFn>,
        extract: Arc<SigmaExtractFn>,
        relation: Arc<RelationFn>,
    ) -> Self {
        SigmaProtocol { challenge_count, commit, respond, verify, extract, relation, sys }
    }

    pub fn challenge_count(&self) -> u64 {
        self.challenge_count
    }

    pub fn soundness(&self) -> &SoundnessSystem {
        &self.sys
    }

    pub fn commit(&self, inst: &[u8], witness: &[u8], rng: &mut dyn RngCore) -> SigmaCommitment {
        (self.commit)(inst, witness, rng)
    }

    pub fn respond(&self, state: &[u8], challenge: u64) -> Vec<u8> {
        (self.respond)(state, challenge)
    }

    pub fn verify(&self, inst: &[u8], first_message: &[u8], challenge: u64, response: &[u8]) -> bool {
        (self.verify)(inst, first_message, challenge, response)
    }

    pub fn relation(&self, inst: &[u8], witness: &[u8]) -> bool {
        (self.relation)(inst, witness)
    }

    pub fn run_extractor(
        &self,
        inst: &[u8],
        first_message: &[u8],
        s: &RankSet,
        responses: &BTreeMap<u64, Vec<u8>>,
    ) -> Option<Vec<u8>> {
        (self.extract)(inst, first_message, s, responses)
    }
}

/// Witness extraction from responses on a given minimal qualifying set.
///
/// Errors with [`Error::NotMinimalSet`] when `s` is not minimal qualifying;
/// returns `Ok(None)` when a response is missing or fails verification, or
/// when the protocol extractor cannot produce a relation-valid witness.
pub fn extract_sigma(
    sigma: &SigmaProtocol,
    inst: &[u8],
    first_message: &[u8],
    s: &RankSet,
    responses: &BTreeMap<u64, Vec<u8>>,
) -> Result<Option<Vec<u8>>> {
    if !sigma.soundness().is_minimal(s) {
        return Err(Error::NotMinimalSet);
    }
    for &c in s {
        match responses.get(&c) {
            Some(z) if sigma.verify(inst, first_message, c, z) => {}
            _ => return Ok(None),
        }
    }
    let witness = sigma.run_extractor(inst, first_message, s, responses);
    Ok(witness.filter(|w| sigma.relation(inst, w)))
}
