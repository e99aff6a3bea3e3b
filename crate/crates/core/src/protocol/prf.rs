use std::hash::Hasher;

use sha2::{Digest, Sha256};
use siphasher::sip128::{Hasher128, SipHasher24};

use crate::block::ParticipantId;

/// Domain separators for every PRF use in the crate.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
#[repr(u8)]
pub(crate) enum Domain {
    Oracle = 1,
    P1 = 2,
    P2 = 3,
    P3Sig = 4,
    P3Hash = 5,
    Digest = 6,
    Fingerprint = 7,
}

/// A 128-bit key for keyed SipHash-2-4.
#[derive(Clone, Copy, PartialEq, Eq, Hash)]
pub struct PrfKey {
    k0: u64,
    k1: u64,
}

impl std::fmt::Debug for PrfKey {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str("PrfKey(..)")
    }
}

impl PrfKey {
    fn from_bytes(b: &[u8]) -> Self {
        PrfKey {
            k0: u64::from_be_bytes(b[0..8].try_into().expect("8 bytes")),
            k1: u64::from_be_bytes(b[8..16].try_into().expect("8 bytes")),
        }
    }

    pub(crate) fn eval(&self, domain: Domain, parts: &[&[u8]]) -> u128 {
        let mut buf = [0u8; 96];
        let mut heap = Vec::new();
        let total = 1 + parts.iter().map(|p| 4 + p.len()).sum::<usize>();
        let out: &mut [u8] = if total <= buf.len() {
            &mut buf[..total]
        } else {
            heap.resize(total, 0);
            &mut heap
        };
        out[0] = domain as u8;
        let mut at = 1;
        for p in parts {
            out[at..at + 4].copy_from_slice(&(p.len() as u32).to_le_bytes());
            out[at + 4..at + 4 + p.len()].copy_from_slice(p);
            at += 4 + p.len();
        }
        let mut h = SipHasher24::new_with_keys(self.k0, self.k1);
        h.write(out);
        h.finish128().as_u128()
    }
}

/// Maps a PRF output to a uniform value in [0, 1) using its top 53 bits.
pub fn unit_interval(x: u128) -> f64 {
    (x >> 75) as f64 / (1u64 << 53) as f64
}

/// Derives every key used by a protocol instance from one master seed.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct KeyRing {
    master: [u8; 32],
    public: PrfKey,
    oracle: PrfKey,
}

impl KeyRing {
    pub fn from_seed(seed: u64) -> Self {
        let master: [u8; 32] = Sha256::new()
            .chain_update(b"lcpos/keyring")
            .chain_update(seed.to_be_bytes())
            .finalize()
            .into();
        KeyRing {
            master,
            public: Self::derive(&master, b"hash", 0),
            oracle: Self::derive(&master, b"oracle", 0),
        }
    }

    fn derive(master: &[u8; 32], label: &[u8], index: u32) -> PrfKey {
        let d = Sha256::new()
            .chain_update(master)
            .chain_update(label)
            .chain_update(index.to_be_bytes())
            .finalize();
        PrfKey::from_bytes(&d[..16])
    }

    /// Key of the publicly computable hash.
    pub fn public(&self) -> PrfKey {
        self.public
    }

    /// Key of the random oracle M*.
    pub fn oracle(&self) -> PrfKey {
        self.oracle
    }

    /// Signing key of one participant.
    pub fn signer(&self, p: ParticipantId) -> Signer {
        Signer { owner: p, key: Self::derive(&self.master, b"sig", p.0) }
    }

    pub(crate) fn master(&self) -> &[u8; 32] {
        &self.master
    }
}

/// A participant's deterministic signing handle. Signatures are unique, so a
/// PRF under the owner's key models them.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Signer {
    owner: ParticipantId,
    key: PrfKey,
}

impl Signer {
    pub fn owner(&self) -> ParticipantId {
        self.owner
    }

    pub(crate) fn sign(&self, parts: &[&[u8]]) -> [u8; 16] {
        self.key.eval(Domain::P3Sig, parts).to_be_bytes()
    }
}
