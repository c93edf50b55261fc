//! Random-oracle abstraction with two interchangeable instantiations: a
//! production mode backed by a concrete extendable-output hash truncated to
//! `n` bits, and a recording mode that lazy-samples fresh digests and keeps
//! the full input→digest database for later inspection.
//!
//! All oracle inputs carry a one-byte domain-separation tag so that committed
//! messages, Merkle tree nodes and challenge derivations can never alias.

use std::collections::{BTreeMap, HashMap, HashSet};

use num_bigint::BigUint;
use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha20Rng;
use sha3::digest::{ExtendableOutput, Update, XofReader};
use sha3::Shake256;

use crate::{Error, Result};

/// Domain-separation tag prepended to every oracle input.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
#[repr(u8)]
pub enum Tag {
    /// A committed message.
    Msg = 0x00,
    /// An internal Merkle node: two child digests concatenated.
    Node = 0x01,
    /// A challenge derivation: instance, commitment data, optional extras.
    Chal = 0x02,
}

impl Tag {
    pub fn from_byte(b: u8) -> Option<Tag> {
        match b {
            0x00 => Some(Tag::Msg),
            0x01 => Some(Tag::Node),
            0x02 => Some(Tag::Chal),
            _ => None,
        }
    }
}

/// A tagged oracle input. The encoding `tag byte || payload` is injective
/// across tags by construction.
///
/// Inputs order by encoded byte length first and lexicographically on the
/// encoded bytes second; this is the "smallest preimage" order used by
/// [`Database::inverse`].
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct OracleInput {
    pub tag: Tag,
    pub payload: Vec<u8>,
}

impl OracleInput {
    pub fn new(tag: Tag, payload: impl Into<Vec<u8>>) -> Self {
        OracleInput { tag, payload: payload.into() }
    }

    pub fn msg(payload: impl Into<Vec<u8>>) -> Self {
        Self::new(Tag::Msg, payload)
    }

    /// A Merkle node input: the two child digests concatenated (2n bits).
    pub fn node(left: &Digest, right: &Digest) -> Self {
        let mut payload = Vec::with_capacity(left.len() + right.len());
        payload.extend_from_slice(left.as_bytes());
        payload.extend_from_slice(right.as_bytes());
        Self::new(Tag::Node, payload)
    }

    pub fn chal(payload: impl Into<Vec<u8>>) -> Self {
        Self::new(Tag::Chal, payload)
    }

    /// Total encoded length in bytes (tag byte included).
    pub fn encoded_len(&self) -> usize {
        1 + self.payload.len()
    }

    /// `tag byte || payload`.
    pub fn encode(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(self.encoded_len());
        out.push(self.tag as u8);
        out.extend_from_slice(&self.payload);
        out
    }

    pub fn decode(bytes: &[u8]) -> Option<OracleInput> {
        let (&tag, payload) = bytes.split_first()?;
        Some(OracleInput::new(Tag::from_byte(tag)?, payload.to_vec()))
    }
}

impl Ord for OracleInput {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        // Length ascending, then lexicographic on the encoded bytes. The tag
        // byte leads the encoding, so it is compared before the payload.
        self.encoded_len()
            .cmp(&other.encoded_len())
            .then_with(|| (self.tag as u8).cmp(&(other.tag as u8)))
            .then_with(|| self.payload.cmp(&other.payload))
    }
}

impl PartialOrd for OracleInput {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}

/// An `n`-bit oracle output, `n` a positive multiple of 8.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Digest(Vec<u8>);

impl Digest {
    pub fn from_bytes(bytes: impl Into<Vec<u8>>) -> Self {
        let bytes = bytes.into();
        assert!(!bytes.is_empty(), "digest must carry at least 8 bits");
        Digest(bytes)
    }

    pub fn as_bytes(&self) -> &[u8] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn bit_len(&self) -> usize {
        self.0.len() * 8
    }

    /// The digest read as a big-endian integer.
    pub fn to_biguint(&self) -> BigUint {
        BigUint::from_bytes_be(&self.0)
    }
}

/// Static parameters of an oracle: output size and input cap.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct OracleParams {
    /// Output length `n` in bits; positive multiple of 8.
    pub n_bits: usize,
    /// Maximum encoded input length `B` in bytes.
    pub max_input_len: usize,
}

impl OracleParams {
    pub fn new(n_bits: usize, max_input_len: usize) -> Self {
        assert!(n_bits > 0 && n_bits % 8 == 0, "n must be a positive multiple of 8");
        OracleParams { n_bits, max_input_len }
    }

    /// Parameters with the default input cap of 64 KiB.
    pub fn with_n(n_bits: usize) -> Self {
        Self::new(n_bits, DEFAULT_MAX_INPUT_LEN)
    }

    pub fn n_bytes(&self) -> usize {
        self.n_bits / 8
    }

    fn check_len(&self, input: &OracleInput) -> Result<()> {
        let len = input.encoded_len();
        if len > self.max_input_len {
            return Err(Error::InputTooLong { len, max: self.max_input_len });
        }
        Ok(())
    }
}

pub const DEFAULT_MAX_INPUT_LEN: usize = 1 << 16;

/// The concrete hash for production mode: SHAKE256 over the encoded input,
/// truncated to `n` bits.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct HashSpec {
    pub n_bits: usize,
}

impl HashSpec {
    pub fn new(n_bits: usize) -> Self {
        assert!(n_bits > 0 && n_bits % 8 == 0);
        HashSpec { n_bits }
    }

    pub fn digest(&self, input: &OracleInput) -> Digest {
        self.digest_encoded(&input.encode())
    }

    pub fn digest_encoded(&self, encoded: &[u8]) -> Digest {
        let mut hasher = Shake256::default();
        hasher.update(encoded);
        let mut out = vec![0u8; self.n_bits / 8];
        hasher.finalize_xof().read(&mut out);
        Digest(out)
    }
}

/// The lazy-sampling record: an ordered map from oracle inputs to digests,
/// keyed in smallest-preimage order, plus the total query count.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Database {
    entries: BTreeMap<OracleInput, Digest>,
    query_count: u64,
    seen: HashSet<Digest>,
    collision: bool,
}

impl Database {
    pub fn new() -> Self {
        Database::default()
    }

    /// Number of stored entries. Bounded by `query_count` at all times.
    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Total queries served, replays included.
    pub fn query_count(&self) -> u64 {
        self.query_count
    }

    pub fn get(&self, input: &OracleInput) -> Option<&Digest> {
        self.entries.get(input)
    }

    /// Entries in smallest-preimage order.
    pub fn iter(&self) -> impl Iterator<Item = (&OracleInput, &Digest)> {
        self.entries.iter()
    }

    /// The smallest input mapped to `y` (byte length ascending, then
    /// lexicographic on the encoded bytes), or `None` when `y` has no
    /// preimage in the record.
    pub fn inverse(&self, y: &Digest) -> Option<&OracleInput> {
        self.entries.iter().find(|(_, d)| *d == y).map(|(x, _)| x)
    }

    /// Whether two distinct inputs share a digest. Monotone under appends.
    pub fn has_collision(&self) -> bool {
        self.collision
    }

    fn record_fresh(&mut self, input: OracleInput, digest: Digest) {
        if !self.seen.insert(digest.clone()) {
            self.collision = true;
        }
        self.entries.insert(input, digest);
    }

    /// Drop an entry. Test and harness tooling; the oracle itself never
    /// removes entries, so the collision flag is left untouched to preserve
    /// its monotonicity.
    pub fn remove(&mut self, input: &OracleInput) -> Option<Digest> {
        self.entries.remove(input)
    }

    /// One line per entry, `hex(encoded input) SP hex(digest)`, in
    /// smallest-preimage order.
    pub fn dump(&self) -> String {
        let mut out = String::new();
        for (input, digest) in &self.entries {
            out.push_str(&hex::encode(input.encode()));
            out.push(' ');
            out.push_str(&hex::encode(digest.as_bytes()));
            out.push('\n');
        }
        out
    }
}

/// A precomputed digest → smallest-preimage map for repeated inversions of
/// the same database snapshot.
pub struct InverseIndex {
    map: HashMap<Digest, OracleInput>,
}

impl InverseIndex {
    pub fn build(db: &Database) -> Self {
        let mut map = HashMap::with_capacity(db.len());
        // Iteration is in smallest-preimage order, so the first input seen
        // for a digest is the canonical preimage.
        for (input, digest) in db.iter() {
            map.entry(digest.clone()).or_insert_with(|| input.clone());
        }
        InverseIndex { map }
    }

    pub fn inverse(&self, y: &Digest) -> Option<&OracleInput> {
        self.map.get(y)
    }
}

/// Query interface shared by the production and recording modes.
pub trait Oracle {
    fn query(&mut self, input: &OracleInput) -> Result<Digest>;
    fn params(&self) -> OracleParams;

    fn n_bytes(&self) -> usize {
        self.params().n_bytes()
    }
}

/// Stateless production oracle: a pure function of the encoded input.
#[derive(Debug, Clone)]
pub struct ProductionOracle {
    params: OracleParams,
    hash: HashSpec,
}

impl ProductionOracle {
    pub fn new(params: OracleParams) -> Self {
        let hash = HashSpec::new(params.n_bits);
        ProductionOracle { params, hash }
    }
}

impl Oracle for ProductionOracle {
    fn query(&mut self, input: &OracleInput) -> Result<Digest> {
        self.params.check_len(input)?;
        Ok(self.hash.digest(input))
    }

    fn params(&self) -> OracleParams {
        self.params
    }
}

/// Where a recording oracle draws fresh digests from.
enum FreshSource {
    /// Seeded deterministic generator; the statistical model of a random
    /// oracle used by the extraction harness.
    Rng(Box<ChaCha20Rng>),
    /// A fixed concrete function; makes the recording oracle replay the
    /// production oracle bit for bit while still building the database.
    Hash(HashSpec),
}

/// Recording oracle: classical lazy sampling. Fresh inputs get a fresh
/// digest from the source; replayed inputs return the stored digest without
/// mutating the entry set.
pub struct RecordingOracle {
    params: OracleParams,
    db: Database,
    source: FreshSource,
}

impl RecordingOracle {
    /// Recording oracle drawing fresh digests from a ChaCha20 stream.
    pub fn with_seed(params: OracleParams, seed: u64) -> Self {
        let mut seed_bytes = [0u8; 32];
        seed_bytes[..8].copy_from_slice(&seed.to_be_bytes());
        RecordingOracle {
            params,
            db: Database::new(),
            source: FreshSource::Rng(Box::new(ChaCha20Rng::from_seed(seed_bytes))),
        }
    }

    /// Recording oracle replaying a fixed concrete hash.
    pub fn with_function(params: OracleParams) -> Self {
        RecordingOracle {
            params,
            db: Database::new(),
            source: FreshSource::Hash(HashSpec::new(params.n_bits)),
        }
    }

    pub fn database(&self) -> &Database {
        &self.db
    }

    pub fn database_mut(&mut self) -> &mut Database {
        &mut self.db
    }

    pub fn into_database(self) -> Database {
        self.db
    }
}

impl Oracle for RecordingOracle {
    fn query(&mut self, input: &OracleInput) -> Result<Digest> {
        self.params.check_len(input)?;
        self.db.query_count += 1;
        if let Some(d) = self.db.entries.get(input) {
            return Ok(d.clone());
        }
        let digest = match &mut self.source {
            FreshSource::Rng(rng) => {
                let mut bytes = vec![0u8; self.params.n_bytes()];
                rng.fill_bytes(&mut bytes);
                Digest(bytes)
            }
            FreshSource::Hash(hash) => hash.digest(input),
        };
        self.db.record_fresh(input.clone(), digest.clone());
        debug_assert!(self.db.len() as u64 <= self.db.query_count);
        Ok(digest)
    }

    fn params(&self) -> OracleParams {
        self.params
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn msg_u64(i: u64) -> OracleInput {
        OracleInput::msg(i.to_be_bytes().to_vec())
    }

    #[test]
    fn replay_returns_stored_digest() {
        let mut oracle = RecordingOracle::with_seed(OracleParams::with_n(64), 7);
        let x = OracleInput::msg(b"hello".to_vec());
        let d1 = oracle.query(&x).unwrap();
        let d2 = oracle.query(&x).unwrap();
        assert_eq!(d1, d2);
        assert_eq!(oracle.database().len(), 1);
        assert_eq!(oracle.database().query_count(), 2);
    }

    #[test]
    fn one_entry_per_fresh_query() {
        let mut oracle = RecordingOracle::with_seed(OracleParams::with_n(64), 7);
        for i in 0..100u64 {
            oracle.query(&msg_u64(i)).unwrap();
        }
        assert_eq!(oracle.database().len(), 100);
    }

    #[test]
    fn input_too_long_rejected() {
        let params = OracleParams::new(64, 16);
        let mut oracle = RecordingOracle::with_seed(params, 1);
        let err = oracle.query(&OracleInput::msg(vec![0u8; 16])).unwrap_err();
        assert!(matches!(err, Error::InputTooLong { len: 17, max: 16 }));
        assert!(oracle.query(&OracleInput::msg(vec![0u8; 15])).is_ok());
    }

    /// Exact birthday probability for `q` fresh uniform draws over `space`
    /// outcomes: 1 - prod_{i<q} (1 - i/space).
    fn birthday_exact(q: u64, space: f64) -> f64 {
        let mut no_collision = 1.0f64;
        for i in 0..q {
            no_collision *= 1.0 - (i as f64) / space;
        }
        1.0 - no_collision
    }

    #[test]
    fn birthday_collision_rate_at_n8() {
        let q = 20u64;
        let expected = birthday_exact(q, 256.0);
        assert!((expected - 0.53).abs() < 0.01, "oracle value drifted: {expected}");

        let trials = 4000u64;
        let mut hits = 0u64;
        for t in 0..trials {
            let mut oracle = RecordingOracle::with_seed(OracleParams::with_n(8), 1000 + t);
            for i in 0..q {
                oracle.query(&msg_u64(i)).unwrap();
            }
            if oracle.database().has_collision() {
                hits += 1;
            }
        }
        let emp = hits as f64 / trials as f64;
        let sigma = (expected * (1.0 - expected) / trials as f64).sqrt();
        assert!(
            (emp - expected).abs() <= 3.0 * sigma,
            "empirical {emp} vs exact {expected} (3 sigma = {})",
            3.0 * sigma
        );
    }

    #[test]
    fn inverse_on_empty_database() {
        let db = Database::new();
        assert!(db.inverse(&Digest::from_bytes(vec![0u8; 8])).is_none());
    }

    #[test]
    fn inverse_picks_smallest_preimage() {
        let mut db = Database::new();
        let v = Digest::from_bytes(vec![9u8; 8]);
        let a = OracleInput::msg(b"aa".to_vec());
        let b = OracleInput::msg(b"ab".to_vec());
        db.record_fresh(b.clone(), v.clone());
        db.record_fresh(a.clone(), v.clone());
        assert_eq!(db.inverse(&v), Some(&a));
        assert!(db.has_collision());

        // Shorter beats lexicographically-smaller-but-longer.
        let mut db = Database::new();
        let short = OracleInput::msg(b"zz".to_vec());
        let long = OracleInput::msg(b"aaa".to_vec());
        db.record_fresh(long, v.clone());
        db.record_fresh(short.clone(), v.clone());
        assert_eq!(db.inverse(&v), Some(&short));
    }

    #[test]
    fn inverse_round_trip_without_collisions() {
        let mut oracle = RecordingOracle::with_seed(OracleParams::with_n(64), 42);
        let inputs: Vec<_> = (0..100u64).map(msg_u64).collect();
        for x in &inputs {
            oracle.query(x).unwrap();
        }
        let db = oracle.database();
        assert!(!db.has_collision());

        // Independent linear-scan oracle over all pairs.
        let all: Vec<_> = db.iter().map(|(x, d)| (x.clone(), d.clone())).collect();
        for x in &inputs {
            let d = db.get(x).unwrap();
            let scan = all
                .iter()
                .filter(|(_, dd)| dd == d)
                .map(|(xx, _)| xx)
                .min()
                .unwrap();
            assert_eq!(db.inverse(d), Some(scan));
            assert_eq!(db.inverse(d), Some(x));
        }

        let index = InverseIndex::build(db);
        for x in &inputs {
            assert_eq!(index.inverse(db.get(x).unwrap()), Some(x));
        }
    }

    #[test]
    fn collision_flag_is_monotone() {
        let mut oracle = RecordingOracle::with_seed(OracleParams::with_n(8), 5);
        let mut was_true = false;
        for i in 0..200u64 {
            oracle.query(&msg_u64(i)).unwrap();
            let now = oracle.database().has_collision();
            assert!(!was_true || now, "collision flag reverted at query {i}");
            was_true = now;
        }
        assert!(was_true, "200 draws over 256 outcomes should collide");
    }

    #[test]
    fn fixed_seed_replays_bit_identically() {
        let run = |seed| {
            let mut oracle = RecordingOracle::with_seed(OracleParams::with_n(64), seed);
            for i in 0..50u64 {
                oracle.query(&msg_u64(i % 17)).unwrap();
            }
            oracle.into_database()
        };
        let a = run(33);
        let b = run(33);
        assert_eq!(a, b);
        assert_eq!(a.dump(), b.dump());
        let c = run(34);
        assert_ne!(a.dump(), c.dump());
    }

    #[test]
    fn production_is_pure_and_matches_recording_with_function() {
        let params = OracleParams::with_n(128);
        let mut prod1 = ProductionOracle::new(params);
        let mut prod2 = ProductionOracle::new(params);
        let mut rec = RecordingOracle::with_function(params);
        for i in 0..20u64 {
            let x = msg_u64(i);
            let d1 = prod1.query(&x).unwrap();
            let d2 = prod2.query(&x).unwrap();
            let d3 = rec.query(&x).unwrap();
            assert_eq!(d1, d2);
            assert_eq!(d1, d3);
            assert_eq!(d1.bit_len(), 128);
        }
    }

    #[test]
    fn dump_format_is_sorted_hex_lines() {
        let mut oracle = RecordingOracle::with_seed(OracleParams::with_n(16), 9);
        oracle.query(&OracleInput::msg(b"xyz".to_vec())).unwrap();
        oracle.query(&OracleInput::msg(b"ab".to_vec())).unwrap();
        oracle.query(&OracleInput::chal(b"ab".to_vec())).unwrap();
        let dump = oracle.database().dump();
        let lines: Vec<&str> = dump.lines().collect();
        assert_eq!(lines.len(), 3);
        // Sorted: 3-byte encodings before 4-byte, MSG tag (0x00) before CHAL (0x02).
        assert!(lines[0].starts_with("006162 "));
        assert!(lines[1].starts_with("026162 "));
        assert!(lines[2].starts_with("0078797a "));
        for line in lines {
            let (input_hex, digest_hex) = line.split_once(' ').unwrap();
            assert!(hex::decode(input_hex).is_ok());
            assert_eq!(hex::decode(digest_hex).unwrap().len(), 2);
        }
    }

    #[test]
    fn ordering_is_length_then_lex_on_encoded_bytes() {
        let mut inputs = vec![
            OracleInput::chal(b"a".to_vec()),
            OracleInput::msg(b"b".to_vec()),
            OracleInput::msg(b"aa".to_vec()),
            OracleInput::node(&Digest::from_bytes(vec![1]), &Digest::from_bytes(vec![2])),
            OracleInput::msg(b"a".to_vec()),
        ];
        inputs.sort();
        let encoded: Vec<Vec<u8>> = inputs.iter().map(|x| x.encode()).collect();
        for w in encoded.windows(2) {
            let (a, b) = (&w[0], &w[1]);
            assert!((a.len(), a) < (b.len(), b));
        }
    }
}
