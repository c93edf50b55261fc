//! Commit-and-open protocols: descriptors, ordinary hash commitments,
//! parallel repetition, and the search-based witness extractor that works
//! from whatever openings a database yields.

use std::collections::BTreeSet;
use std::fmt;
use std::sync::Arc;

use num_bigint::BigUint;
use num_traits::ToPrimitive;
use rand::RngCore;

use crate::rom::{Digest, Oracle, OracleInput};
use crate::sigma::{RankSet, SoundnessSystem};
use crate::{Error, Result};

/// A challenge: the set of commitment slots to open, a subset of `[ell]`.
pub type Challenge = BTreeSet<usize>;

/// Generic extraction refuses to enumerate challenge spaces beyond this.
pub const STAR_ENUMERATION_LIMIT: u64 = 1 << 20;

type UnrankFn = dyn Fn(&BigUint) -> Challenge + Send + Sync;
type FilterFn = dyn Fn(&Challenge) -> bool + Send + Sync;

/// A challenge space `C` inside the power set of `[ell]`, described by its
/// size and an unranking bijection, optionally restricted by a predicate
/// (used for octopus-size bounds). The size always refers to the
/// unrestricted space; restricted members are reached by rejection.
#[derive(Clone)]
pub struct ChallengeSpace {
    size: BigUint,
    kappa: usize,
    unrank: Arc<UnrankFn>,
    filter: Option<Arc<FilterFn>>,
}

impl fmt::Debug for ChallengeSpace {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ChallengeSpace")
            .field("size", &self.size)
            .field("kappa", &self.kappa)
            .field("restricted", &self.filter.is_some())
            .finish_non_exhaustive()
    }
}

impl ChallengeSpace {
    pub fn new(size: impl Into<BigUint>, kappa: usize, unrank: Arc<UnrankFn>) -> Self {
        ChallengeSpace { size: size.into(), kappa, unrank, filter: None }
    }

    /// Size of the unrestricted space.
    pub fn size(&self) -> &BigUint {
        &self.size
    }

    /// Maximum challenge cardinality.
    pub fn kappa(&self) -> usize {
        self.kappa
    }

    pub fn is_restricted(&self) -> bool {
        self.filter.is_some()
    }

    pub fn unrank(&self, index: &BigUint) -> Challenge {
        debug_assert!(index < &self.size);
        (self.unrank)(index)
    }

    /// Whether a (syntactically valid) challenge survives the restriction.
    pub fn passes_filter(&self, c: &Challenge) -> bool {
        self.filter.as_ref().is_none_or(|f| f(c))
    }

    /// Attach a restriction predicate; members become `{c : filter(c)}`.
    pub fn restricted(mut self, filter: Arc<FilterFn>) -> Self {
        self.filter = Some(filter);
        self
    }

    /// Enumerate `(rank, challenge)` for the unrestricted space. Gated.
    pub fn enumerate(&self) -> Result<impl Iterator<Item = (u64, Challenge)> + '_> {
        let size = self.size.to_u64().filter(|&s| s <= STAR_ENUMERATION_LIMIT).ok_or(
            Error::ChallengeSpaceTooLarge {
                op: "challenge enumeration",
                size: self.size.to_string(),
            },
        )?;
        Ok((0..size).map(move |rank| (rank, self.unrank(&BigUint::from(rank)))))
    }
}

/// Ordinary-mode commitment: one digest per committed message.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Commitment(pub Vec<Digest>);

impl Commitment {
    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// The digests concatenated, as embedded in challenge derivations.
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::new();
        for d in &self.0 {
            out.extend_from_slice(d.as_bytes());
        }
        out
    }
}

/// Opened messages for a challenge: `(slot, message)` pairs in ascending
/// slot order, covering exactly the challenge set.
pub type OpenedMessages = Vec<(usize, Vec<u8>)>;

type PredicateFn = dyn Fn(&[u8], &Challenge, &[(usize, Vec<u8>)], &[u8]) -> bool + Send + Sync;
type CnoExtractFn =
    dyn Fn(&[u8], &[Option<Vec<u8>>], &[u8], &RankSet) -> Option<Vec<u8>> + Send + Sync;
type StarFn = dyn Fn(&[u8], &[Option<Vec<u8>>], &[u8]) -> Result<Option<Vec<u8>>> + Send + Sync;
type RelationFn = dyn Fn(&[u8], &[u8]) -> bool + Send + Sync;
type ProverFn = dyn Fn(&[u8], &[u8], &mut dyn RngCore) -> Result<(Vec<Vec<u8>>, Vec<u8>)>
    + Send
    + Sync;

/// How the search-based extractor proceeds for a protocol.
#[derive(Clone)]
enum StarStrategy {
    /// Enumerate the challenge space, collect the valid challenge set, and
    /// scan the enumerated minimal qualifying sets.
    Scan,
    /// Search every repetition of a parallel-repeated protocol on its own.
    PerRepetition { base: Arc<CnOProtocol>, reps: u32 },
    /// Protocol-supplied strategy (the pre-Unruh transformation installs a
    /// membership-test search).
    Custom(Arc<StarFn>),
}

/// Descriptor of a commit-and-open protocol: `ell` committed messages, a
/// challenge space over subsets of `[ell]`, the verification predicate, the
/// soundness system, and extraction hooks. The same descriptor drives both
/// ordinary (element-wise hashing) and Merkle-tree commitments.
#[derive(Clone)]
pub struct CnOProtocol {
    ell: usize,
    message_len: Option<usize>,
    space: ChallengeSpace,
    sys: SoundnessSystem,
    predicate: Arc<PredicateFn>,
    extract: Arc<CnoExtractFn>,
    star: StarStrategy,
    relation: Arc<RelationFn>,
    prover: Option<Arc<ProverFn>>,
}

impl fmt::Debug for CnOProtocol {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("CnOProtocol")
            .field("ell", &self.ell)
            .field("space", &self.space)
            .field("sys", &self.sys)
            .finish_non_exhaustive()
    }
}

pub struct CnOProtocolBuilder {
    inner: CnOProtocol,
}

impl CnOProtocolBuilder {
    pub fn new(
        ell: usize,
        space: ChallengeSpace,
        sys: SoundnessSystem,
        predicate: Arc<PredicateFn>,
        extract: Arc<CnoExtractFn>,
        relation: Arc<RelationFn>,
    ) -> Self {
        CnOProtocolBuilder {
            inner: CnOProtocol {
                ell,
                message_len: None,
                space,
                sys,
                predicate,
                extract,
                star: StarStrategy::Scan,
                relation,
                prover: None,
            },
        }
    }

    /// Fixed message length, when the message space has one.
    pub fn message_len(mut self, len: usize) -> Self {
        self.inner.message_len = Some(len);
        self
    }

    pub fn prover(mut self, prover: Arc<ProverFn>) -> Self {
        self.inner.prover = Some(prover);
        self
    }

    /// Replace the generic enumeration-based search strategy.
    pub fn star_strategy(
        mut self,
        star: Arc<StarFn>,
    ) -> Self {
        self.inner.star = StarStrategy::Custom(star);
        self
    }

    pub fn build(self) -> CnOProtocol {
        self.inner
    }
}

impl CnOProtocol {
    /// Number of committed messages.
    pub fn ell(&self) -> usize {
        self.ell
    }

    pub fn message_len(&self) -> Option<usize> {
        self.message_len
    }

    pub fn challenge_space(&self) -> &ChallengeSpace {
        &self.space
    }

    pub fn soundness(&self) -> &SoundnessSystem {
        &self.sys
    }

    /// The verification predicate `V(inst, c, m_c, a_o)`.
    pub fn predicate(
        &self,
        inst: &[u8],
        c: &Challenge,
        opened: &[(usize, Vec<u8>)],
        first_extra: &[u8],
    ) -> bool {
        (self.predicate)(inst, c, opened, first_extra)
    }

    pub fn relation(&self, inst: &[u8], witness: &[u8]) -> bool {
        (self.relation)(inst, witness)
    }

    /// Honest prover hook: messages to commit plus the extra first-message
    /// string, derived from the instance, witness and randomness.
    pub fn prove_messages(
        &self,
        inst: &[u8],
        witness: &[u8],
        rng: &mut dyn RngCore,
    ) -> Result<(Vec<Vec<u8>>, Vec<u8>)> {
        let prover = self.prover.as_ref().ok_or_else(|| {
            Error::ProverMisbehaved("protocol has no honest prover hook".into())
        })?;
        prover(inst, witness, rng)
    }

    pub fn has_prover(&self) -> bool {
        self.prover.is_some()
    }

    /// Whether a challenge is syntactically valid for this protocol.
    pub fn challenge_in_range(&self, c: &Challenge) -> bool {
        !c.is_empty()
            && c.len() <= self.space.kappa
            && c.iter().all(|&i| i < self.ell)
            && self.space.passes_filter(c)
    }

    /// Commit by element-wise hashing, slot order, tag `MSG`.
    pub fn commit_ordinary(
        &self,
        oracle: &mut dyn Oracle,
        messages: &[Vec<u8>],
    ) -> Result<Commitment> {
        assert_eq!(messages.len(), self.ell, "message vector length must equal ell");
        let mut digests = Vec::with_capacity(messages.len());
        for m in messages {
            digests.push(oracle.query(&OracleInput::msg(m.clone()))?);
        }
        Ok(Commitment(digests))
    }

    /// Ordinary-mode opening check: every opened message hashes to its
    /// commitment and the predicate holds. Malformed openings return false.
    pub fn verify_ordinary(
        &self,
        oracle: &mut dyn Oracle,
        inst: &[u8],
        commitment: &Commitment,
        c: &Challenge,
        opened: &[(usize, Vec<u8>)],
        first_extra: &[u8],
    ) -> Result<bool> {
        if commitment.len() != self.ell || !self.challenge_in_range(c) {
            return Ok(false);
        }
        if !opened_matches_challenge(opened, c) {
            return Ok(false);
        }
        for (i, m) in opened {
            let d = oracle.query(&OracleInput::msg(m.clone()))?;
            if &d != &commitment.0[*i] {
                return Ok(false);
            }
        }
        Ok(self.predicate(inst, c, opened, first_extra))
    }

    /// Witness extraction given a minimal qualifying set of challenge ranks.
    /// Errors when the set is not minimal qualifying; returns `None` when
    /// some covered challenge fails to verify against the messages or the
    /// extractor cannot produce a relation-valid witness.
    pub fn extract_with_set(
        &self,
        inst: &[u8],
        messages: &[Option<Vec<u8>>],
        first_extra: &[u8],
        s: &RankSet,
    ) -> Result<Option<Vec<u8>>> {
        if !self.sys.is_minimal(s) {
            return Err(Error::NotMinimalSet);
        }
        for &rank in s {
            let c = self.space.unrank(&BigUint::from(rank));
            match gather_opened(messages, &c) {
                Some(opened) if self.predicate(inst, &c, &opened, first_extra) => {}
                _ => return Ok(None),
            }
        }
        let w = (self.extract)(inst, messages, first_extra, s);
        Ok(w.filter(|w| self.relation(inst, w)))
    }

    /// Search-based extraction: find the challenges on which the supplied
    /// messages verify, and extract from the first covered minimal
    /// qualifying set. Parallel repetitions are searched one repetition at a
    /// time. Deterministic in its inputs; failure is a value.
    pub fn extract_star(
        &self,
        inst: &[u8],
        messages: &[Option<Vec<u8>>],
        first_extra: &[u8],
    ) -> Result<Option<Vec<u8>>> {
        match &self.star {
            StarStrategy::Scan => {
                let mut valid = RankSet::new();
                for (rank, c) in self.space.enumerate()? {
                    if !self.space.passes_filter(&c) {
                        continue;
                    }
                    if let Some(opened) = gather_opened(messages, &c) {
                        if self.predicate(inst, &c, &opened, first_extra) {
                            valid.insert(rank);
                        }
                    }
                }
                let Some(s) = self.sys.first_covered_min_set(&valid)? else {
                    return Ok(None);
                };
                let w = (self.extract)(inst, messages, first_extra, &s);
                Ok(w.filter(|w| self.relation(inst, w)))
            }
            StarStrategy::PerRepetition { base, reps } => {
                let ell = base.ell;
                for j in 0..*reps as usize {
                    let slice = &messages[j * ell..(j + 1) * ell];
                    let Some(extra_j) = split_framed_segment(first_extra, *reps, j) else {
                        continue;
                    };
                    if let Some(w) = base.extract_star(inst, slice, &extra_j)? {
                        return Ok(Some(w));
                    }
                }
                Ok(None)
            }
            StarStrategy::Custom(star) => star(inst, messages, first_extra),
        }
    }

    /// The `r`-fold parallel repetition: `r * ell` commitments, the product
    /// challenge space in mixed-radix order (repetition 0 most significant),
    /// the conjunction predicate, and per-repetition extraction.
    pub fn parallel_repeat(self: &Arc<Self>, reps: u32) -> Result<CnOProtocol> {
        assert!(reps >= 1);
        if reps == 1 {
            return Ok(self.as_ref().clone());
        }
        let base = Arc::clone(self);
        let ell = base.ell;
        let base_size = base.space.size.clone();
        let size = base_size.pow(reps);

        let unrank: Arc<UnrankFn> = {
            let base = Arc::clone(&base);
            let base_size = base_size.clone();
            Arc::new(move |index: &BigUint| {
                let mut digits = vec![BigUint::ZERO; reps as usize];
                let mut rest = index.clone();
                for slot in (0..reps as usize).rev() {
                    digits[slot] = &rest % &base_size;
                    rest /= &base_size;
                }
                let mut c = Challenge::new();
                for (j, digit) in digits.iter().enumerate() {
                    for i in base.space.unrank(digit) {
                        c.insert(j * ell + i);
                    }
                }
                c
            })
        };

        let filter: Option<Arc<FilterFn>> = base.space.filter.as_ref().map(|f| {
            let f = Arc::clone(f);
            let filter: Arc<FilterFn> = Arc::new(move |c: &Challenge| {
                (0..reps as usize).all(|j| {
                    let part: Challenge = c
                        .iter()
                        .filter(|&&i| i / ell == j)
                        .map(|&i| i % ell)
                        .collect();
                    f(&part)
                })
            });
            filter
        });

        let mut space = ChallengeSpace::new(size, base.space.kappa * reps as usize, unrank);
        space.filter = filter;

        let predicate: Arc<PredicateFn> = {
            let base = Arc::clone(&base);
            Arc::new(move |inst, c: &Challenge, opened, extra| {
                for j in 0..reps as usize {
                    let part: Challenge =
                        c.iter().filter(|&&i| i / ell == j).map(|&i| i % ell).collect();
                    if part.is_empty() {
                        return false;
                    }
                    let part_opened: Vec<(usize, Vec<u8>)> = opened
                        .iter()
                        .filter(|(i, _)| i / ell == j)
                        .map(|(i, m)| (i % ell, m.clone()))
                        .collect();
                    let Some(extra_j) = split_framed_segment(extra, reps, j) else {
                        return false;
                    };
                    if !base.predicate(inst, &part, &part_opened, &extra_j) {
                        return false;
                    }
                }
                true
            })
        };

        let extract: Arc<CnoExtractFn> = {
            let base = Arc::clone(&base);
            Arc::new(move |inst, messages, extra, _s| {
                // A qualifying product set is covered by some repetition;
                // the search visits them all.
                for j in 0..reps as usize {
                    let slice = &messages[j * ell..(j + 1) * ell];
                    let Some(extra_j) = split_framed_segment(extra, reps, j) else {
                        continue;
                    };
                    if let Ok(Some(w)) = base.extract_star(inst, slice, &extra_j) {
                        return Some(w);
                    }
                }
                None
            })
        };

        let prover: Option<Arc<ProverFn>> = base.prover.as_ref().map(|_| {
            let base = Arc::clone(&base);
            let prover: Arc<ProverFn> =
                Arc::new(move |inst: &[u8], witness: &[u8], rng: &mut dyn RngCore| {
                    let mut messages = Vec::with_capacity(reps as usize * ell);
                    let mut extra = Vec::new();
                    for _ in 0..reps {
                        let (mut msgs, extra_j) = base.prove_messages(inst, witness, rng)?;
                        messages.append(&mut msgs);
                        extra.extend_from_slice(&(extra_j.len() as u32).to_be_bytes());
                        extra.extend_from_slice(&extra_j);
                    }
                    Ok((messages, extra))
                });
            prover
        });

        Ok(CnOProtocol {
            ell: ell * reps as usize,
            message_len: base.message_len,
            space,
            sys: SoundnessSystem::product(&base.sys, reps)?,
            predicate,
            extract,
            star: StarStrategy::PerRepetition { base, reps },
            relation: self.relation.clone(),
            prover,
        })
    }
}

/// Collect the messages a challenge opens; `None` when any slot is
/// undefined or out of range.
pub fn gather_opened(
    messages: &[Option<Vec<u8>>],
    c: &Challenge,
) -> Option<Vec<(usize, Vec<u8>)>> {
    let mut out = Vec::with_capacity(c.len());
    for &i in c {
        out.push((i, messages.get(i)?.clone()?));
    }
    Some(out)
}

/// Whether opened `(slot, message)` pairs cover a challenge exactly, in
/// ascending slot order without duplicates.
pub fn opened_matches_challenge(opened: &[(usize, Vec<u8>)], c: &Challenge) -> bool {
    opened.len() == c.len()
        && opened.windows(2).all(|w| w[0].0 < w[1].0)
        && opened.iter().all(|(i, _)| c.contains(i))
}

/// Parse segment `j` out of `count` length-prefixed segments. Used to frame
/// per-repetition first-message extras.
pub fn split_framed_segment(framed: &[u8], count: u32, j: usize) -> Option<Vec<u8>> {
    let mut rest = framed;
    let mut seen = 0usize;
    for _ in 0..count {
        if rest.len() < 4 {
            return None;
        }
        let len = u32::from_be_bytes(rest[..4].try_into().unwrap()) as usize;
        rest = &rest[4..];
        if rest.len() < len {
            return None;
        }
        if seen == j {
            return Some(rest[..len].to_vec());
        }
        rest = &rest[len..];
        seen += 1;
    }
    None
}

/// Frame per-repetition extras into one byte string.
pub fn frame_segments(segments: &[Vec<u8>]) -> Vec<u8> {
    let mut out = Vec::new();
    for s in segments {
        out.extend_from_slice(&(s.len() as u32).to_be_bytes());
        out.extend_from_slice(s);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rom::{OracleParams, RecordingOracle};
    use crate::sigma::BigRational;
    use num_bigint::BigInt;
    use num_rational::Ratio;

    /// Toy protocol: two slots, both holding the instance bytes; a
    /// challenge opens one slot; both slots together reveal the "witness"
    /// (the instance itself).
    fn echo_protocol() -> Arc<CnOProtocol> {
        let space = ChallengeSpace::new(
            2u64,
            1,
            Arc::new(|idx: &BigUint| {
                let mut c = Challenge::new();
                c.insert(idx.to_u64().unwrap() as usize);
                c
            }),
        );
        let sys = SoundnessSystem::threshold(2, 2);
        let predicate: Arc<PredicateFn> = Arc::new(|inst, _c, opened, _extra| {
            opened.iter().all(|(_, m)| m.as_slice() == inst)
        });
        let extract: Arc<CnoExtractFn> = Arc::new(|_inst, messages, _extra, _s| {
            messages.first().cloned().flatten()
        });
        let relation: Arc<RelationFn> = Arc::new(|inst, w| inst == w);
        let prover: Arc<ProverFn> = Arc::new(|inst: &[u8], _w: &[u8], _rng: &mut dyn RngCore| {
            Ok((vec![inst.to_vec(), inst.to_vec()], Vec::new()))
        });
        Arc::new(
            CnOProtocolBuilder::new(2, space, sys, predicate, extract, relation)
                .prover(prover)
                .build(),
        )
    }

    fn oracle() -> RecordingOracle {
        RecordingOracle::with_seed(OracleParams::with_n(64), 99)
    }

    #[test]
    fn commit_hashes_each_slot_in_order() {
        let p = echo_protocol();
        let mut o = oracle();
        let y = p.commit_ordinary(&mut o, &[b"x".to_vec(), b"x".to_vec()]).unwrap();
        assert_eq!(y.len(), 2);
        // Identical messages share a digest.
        assert_eq!(y.0[0], y.0[1]);
        assert_eq!(o.database().len(), 1);

        let mut o = oracle();
        let y = p.commit_ordinary(&mut o, &[b"a".to_vec(), b"b".to_vec()]).unwrap();
        assert_ne!(y.0[0], y.0[1]);
        assert_eq!(o.database().len(), 2);
    }

    #[test]
    fn commitments_invert_through_the_database() {
        let p = echo_protocol();
        let mut o = oracle();
        let messages = vec![b"first".to_vec(), b"second".to_vec()];
        let y = p.commit_ordinary(&mut o, &messages).unwrap();
        let db = o.database();
        assert!(!db.has_collision());
        for (i, m) in messages.iter().enumerate() {
            assert_eq!(db.inverse(&y.0[i]), Some(&OracleInput::msg(m.clone())));
        }
    }

    #[test]
    fn honest_round_verifies_for_every_challenge() {
        let p = echo_protocol();
        let inst = b"inst".to_vec();
        let mut rng = rand_chacha::ChaCha20Rng::seed_from_u64(0);
        let (messages, extra) = p.prove_messages(&inst, &inst, &mut rng).unwrap();
        let mut o = oracle();
        let y = p.commit_ordinary(&mut o, &messages).unwrap();
        for (_, c) in p.challenge_space().enumerate().unwrap() {
            let opened: Vec<(usize, Vec<u8>)> =
                c.iter().map(|&i| (i, messages[i].clone())).collect();
            assert!(p.verify_ordinary(&mut o, &inst, &y, &c, &opened, &extra).unwrap());
        }
    }

    #[test]
    fn tampered_opening_is_rejected() {
        let p = echo_protocol();
        let inst = b"inst".to_vec();
        let messages = vec![inst.clone(), inst.clone()];
        let mut o = oracle();
        let y = p.commit_ordinary(&mut o, &messages).unwrap();
        let c: Challenge = [0usize].into_iter().collect();

        let mut flipped = inst.clone();
        flipped[0] ^= 1;
        // Digest mismatch: the opened message no longer hashes to y_0.
        assert!(!p
            .verify_ordinary(&mut o, &inst, &y, &c, &[(0, flipped)], &[])
            .unwrap());
        // Valid opening but failing predicate.
        let mut o2 = oracle();
        let other = b"nope".to_vec();
        let y2 = p.commit_ordinary(&mut o2, &[other.clone(), other.clone()]).unwrap();
        assert!(!p
            .verify_ordinary(&mut o2, &inst, &y2, &c, &[(0, other)], &[])
            .unwrap());
        // Opened slots not matching the challenge.
        assert!(!p
            .verify_ordinary(&mut o, &inst, &y, &c, &[(1, inst.clone())], &[])
            .unwrap());
    }

    #[test]
    fn repeat_once_is_identity() {
        let p = echo_protocol();
        let r1 = p.parallel_repeat(1).unwrap();
        assert_eq!(r1.ell(), p.ell());
        assert_eq!(r1.challenge_space().size(), p.challenge_space().size());
        for (rank, c) in p.challenge_space().enumerate().unwrap() {
            assert_eq!(r1.challenge_space().unrank(&BigUint::from(rank)), c);
        }
        assert_eq!(r1.soundness().p_triv().unwrap(), p.soundness().p_triv().unwrap());
    }

    #[test]
    fn product_space_size_and_bijectivity() {
        let p = echo_protocol();
        let r4 = p.parallel_repeat(4).unwrap();
        assert_eq!(r4.ell(), 8);
        assert_eq!(r4.challenge_space().size(), &BigUint::from(16u64));
        assert_eq!(r4.challenge_space().kappa(), 4);
        let all: BTreeSet<Challenge> = r4
            .challenge_space()
            .enumerate()
            .unwrap()
            .map(|(_, c)| c)
            .collect();
        assert_eq!(all.len(), 16, "unrank must be injective");
        for c in &all {
            assert_eq!(c.len(), 4, "one slot opened per repetition");
        }
    }

    #[test]
    fn product_p_triv_exponentiates() {
        let p = echo_protocol();
        let r2 = p.parallel_repeat(2).unwrap();
        let expected: BigRational = Ratio::new(BigInt::from(1), BigInt::from(4));
        assert_eq!(r2.soundness().p_triv().unwrap(), expected);
        assert_eq!(r2.soundness().p_triv_exhaustive().unwrap(), expected);
    }

    #[test]
    fn extract_star_finds_witness_and_fails_below_threshold() {
        let p = echo_protocol();
        let inst = b"secret".to_vec();
        let all = vec![Some(inst.clone()), Some(inst.clone())];
        assert_eq!(p.extract_star(&inst, &all, &[]).unwrap(), Some(inst.clone()));

        // All messages undefined: no valid challenge at all.
        assert_eq!(p.extract_star(&inst, &[None, None], &[]).unwrap(), None);

        // A single valid slot stays below the qualifying threshold.
        let one = vec![Some(inst.clone()), None];
        assert_eq!(p.extract_star(&inst, &one, &[]).unwrap(), None);

        // Determinism.
        assert_eq!(
            p.extract_star(&inst, &all, &[]).unwrap(),
            p.extract_star(&inst, &all, &[]).unwrap()
        );
    }

    #[test]
    fn per_repetition_extraction_succeeds_from_any_repetition() {
        let p = echo_protocol();
        let r3 = Arc::new(p.parallel_repeat(3).unwrap());
        let inst = b"w".to_vec();
        let extra = frame_segments(&[vec![], vec![], vec![]]);
        // Only the middle repetition carries usable openings.
        let messages = vec![
            None,
            None,
            Some(inst.clone()),
            Some(inst.clone()),
            None,
            None,
        ];
        assert_eq!(r3.extract_star(&inst, &messages, &extra).unwrap(), Some(inst.clone()));

        let nothing = vec![None; 6];
        assert_eq!(r3.extract_star(&inst, &nothing, &extra).unwrap(), None);
    }

    #[test]
    fn extract_with_set_gates_on_minimality() {
        let p = echo_protocol();
        let inst = b"i".to_vec();
        let all = vec![Some(inst.clone()), Some(inst.clone())];
        let full: RankSet = [0u64, 1].into_iter().collect();
        assert_eq!(p.extract_with_set(&inst, &all, &[], &full).unwrap(), Some(inst.clone()));

        let single: RankSet = [0u64].into_iter().collect();
        assert!(matches!(
            p.extract_with_set(&inst, &all, &[], &single),
            Err(Error::NotMinimalSet)
        ));

        // Minimal set, but one covered challenge fails to verify.
        let partial = vec![Some(inst.clone()), Some(b"bad".to_vec())];
        assert_eq!(p.extract_with_set(&inst, &partial, &[], &full).unwrap(), None);
    }

    #[test]
    fn enumeration_gate() {
        let space = ChallengeSpace::new(
            BigUint::from(1u64) << 30,
            1,
            Arc::new(|_: &BigUint| Challenge::new()),
        );
        assert!(space.enumerate().is_err());
    }

    use rand::SeedableRng;
}
