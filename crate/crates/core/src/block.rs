use std::fmt;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

pub type Slot = u64;

#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ParticipantId(pub u32);

#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct CoinId(pub u32);

/// SHA-256 of a block's canonical serialization.
#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct BlockId(pub [u8; 32]);

impl BlockId {
    pub fn to_hex(&self) -> String {
        hex::encode(self.0)
    }

    pub fn short(&self) -> String {
        hex::encode(&self.0[..6])
    }
}

impl fmt::Debug for BlockId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "BlockId({})", self.short())
    }
}

impl fmt::Display for BlockId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.short())
    }
}

impl fmt::Debug for ParticipantId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "P{}", self.0)
    }
}

impl fmt::Display for ParticipantId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "P{}", self.0)
    }
}

impl fmt::Debug for CoinId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "c{}", self.0)
    }
}

impl fmt::Display for CoinId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "c{}", self.0)
    }
}

impl Serialize for BlockId {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&self.to_hex())
    }
}

impl<'de> Deserialize<'de> for BlockId {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        let bytes = hex::decode(&s).map_err(serde::de::Error::custom)?;
        let arr: [u8; 32] = bytes
            .try_into()
            .map_err(|_| serde::de::Error::custom("block id must be 32 bytes"))?;
        Ok(BlockId(arr))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Transfer {
    pub coin: CoinId,
    pub from: ParticipantId,
    pub to: ParticipantId,
}

/// An immutable block. The id is derived from the other fields on construction.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Block {
    id: BlockId,
    pred: Option<BlockId>,
    miner: ParticipantId,
    slot: Slot,
    coin: Option<CoinId>,
    payload: Vec<Transfer>,
    #[serde(with = "hex_bytes")]
    aux: Vec<u8>,
}

mod hex_bytes {
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &[u8], s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&hex::encode(v))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<u8>, D::Error> {
        let s = String::deserialize(d)?;
        hex::decode(s).map_err(serde::de::Error::custom)
    }
}

/// Participant id reserved for the genesis block.
pub const GENESIS_MINER: ParticipantId = ParticipantId(u32::MAX);

impl Block {
    pub fn new(
        pred: BlockId,
        miner: ParticipantId,
        slot: Slot,
        coin: CoinId,
        payload: Vec<Transfer>,
        aux: Vec<u8>,
    ) -> Self {
        Self::build(Some(pred), miner, slot, Some(coin), payload, aux)
    }

    /// Genesis block at slot 0. `tag` distinguishes otherwise identical runs.
    pub fn genesis(tag: &[u8]) -> Self {
        Self::build(None, GENESIS_MINER, 0, None, Vec::new(), tag.to_vec())
    }

    fn build(
        pred: Option<BlockId>,
        miner: ParticipantId,
        slot: Slot,
        coin: Option<CoinId>,
        payload: Vec<Transfer>,
        aux: Vec<u8>,
    ) -> Self {
        let mut b = Block { id: BlockId([0; 32]), pred, miner, slot, coin, payload, aux };
        b.id = BlockId(Sha256::digest(b.canonical_bytes()).into());
        b
    }

    /// Length-prefixed fields in declaration order, integers big-endian.
    pub fn canonical_bytes(&self) -> Vec<u8> {
        fn field(out: &mut Vec<u8>, bytes: &[u8]) {
            out.extend_from_slice(&(bytes.len() as u32).to_be_bytes());
            out.extend_from_slice(bytes);
        }
        let mut out = Vec::with_capacity(96 + 12 * self.payload.len() + self.aux.len());
        field(&mut out, self.pred.as_ref().map(|p| &p.0[..]).unwrap_or(&[]));
        field(&mut out, &self.miner.0.to_be_bytes());
        field(&mut out, &self.slot.to_be_bytes());
        match self.coin {
            Some(c) => field(&mut out, &c.0.to_be_bytes()),
            None => field(&mut out, &[]),
        }
        let mut txs = Vec::with_capacity(4 + 12 * self.payload.len());
        txs.extend_from_slice(&(self.payload.len() as u32).to_be_bytes());
        for t in &self.payload {
            txs.extend_from_slice(&t.coin.0.to_be_bytes());
            txs.extend_from_slice(&t.from.0.to_be_bytes());
            txs.extend_from_slice(&t.to.0.to_be_bytes());
        }
        field(&mut out, &txs);
        field(&mut out, &self.aux);
        out
    }

    /// Recomputes the id; a deserialized block whose id disagrees has been tampered with.
    pub fn id_is_consistent(&self) -> bool {
        BlockId(Sha256::digest(self.canonical_bytes()).into()) == self.id
    }

    pub fn id(&self) -> BlockId {
        self.id
    }
    pub fn pred(&self) -> Option<BlockId> {
        self.pred
    }
    pub fn miner(&self) -> ParticipantId {
        self.miner
    }
    pub fn slot(&self) -> Slot {
        self.slot
    }
    pub fn coin(&self) -> Option<CoinId> {
        self.coin
    }
    pub fn payload(&self) -> &[Transfer] {
        &self.payload
    }
    pub fn aux(&self) -> &[u8] {
        &self.aux
    }
    pub fn is_genesis(&self) -> bool {
        self.pred.is_none()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn id_changes_with_every_field() {
        let g = Block::genesis(b"x");
        let base = Block::new(g.id(), ParticipantId(1), 3, CoinId(2), vec![], vec![]);
        let variants = [
            Block::new(Block::genesis(b"y").id(), ParticipantId(1), 3, CoinId(2), vec![], vec![]),
            Block::new(g.id(), ParticipantId(2), 3, CoinId(2), vec![], vec![]),
            Block::new(g.id(), ParticipantId(1), 4, CoinId(2), vec![], vec![]),
            Block::new(g.id(), ParticipantId(1), 3, CoinId(3), vec![], vec![]),
            Block::new(
                g.id(),
                ParticipantId(1),
                3,
                CoinId(2),
                vec![Transfer { coin: CoinId(0), from: ParticipantId(0), to: ParticipantId(1) }],
                vec![],
            ),
            Block::new(g.id(), ParticipantId(1), 3, CoinId(2), vec![], vec![7]),
        ];
        for v in &variants {
            assert_ne!(v.id(), base.id());
        }
    }

    #[test]
    fn serde_round_trip_keeps_id() {
        let g = Block::genesis(b"seed");
        let b = Block::new(g.id(), ParticipantId(9), 11, CoinId(4), vec![], vec![1, 2, 3]);
        let s = serde_json::to_string(&b).unwrap();
        let back: Block = serde_json::from_str(&s).unwrap();
        assert_eq!(back, b);
        assert!(back.id_is_consistent());
    }

    #[test]
    fn length_prefix_prevents_field_smearing() {
        let g = Block::genesis(b"");
        let a = Block::new(g.id(), ParticipantId(1), 1, CoinId(1), vec![], vec![0, 0, 0, 1]);
        let b = Block::new(g.id(), ParticipantId(1), 1, CoinId(1), vec![], vec![0, 0, 1]);
        assert_ne!(a.id(), b.id());
    }
}
