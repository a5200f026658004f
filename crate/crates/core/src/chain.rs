//! Minimal hash-linked block storage for settled trades plus the proposer's
//! VRF evidence.
//!
//! Block content is hashed over a canonical length-prefixed field encoding;
//! the chain is append-only from a fixed genesis block.

use serde::Serialize;
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::market::Settlement;
use crate::types::{NodeId, Tick};
use crate::vrf::{PublicKey, VrfOutput, VrfProof, VrfValue};

#[derive(Debug, Error, PartialEq)]
pub enum ChainError {
    #[error("block rejected: {0}")]
    RejectedBlock(&'static str),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct BlockHash(pub [u8; 32]);

impl BlockHash {
    pub const ZERO: BlockHash = BlockHash([0u8; 32]);

    pub fn to_hex(&self) -> String {
        hex::encode(self.0)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Block {
    pub height: u64,
    pub previous_hash: BlockHash,
    pub transactions: Vec<Settlement>,
    pub proposer: NodeId,
    pub vrf_value: VrfValue,
    pub vrf_proof: VrfProof,
    pub timestamp: Tick,
    pub hash: BlockHash,
}

/// Flat record form for the newline-delimited chain dump.
#[derive(Serialize)]
struct BlockRecord<'a> {
    height: u64,
    previous_hash: String,
    hash: String,
    proposer: String,
    vrf_value: String,
    timestamp: Tick,
    transactions: &'a [Settlement],
}

impl Block {
    pub fn new(
        height: u64,
        previous_hash: BlockHash,
        transactions: Vec<Settlement>,
        proposer: NodeId,
        vrf: &VrfOutput,
        timestamp: Tick,
    ) -> Self {
        let mut block = Block {
            height,
            previous_hash,
            transactions,
            proposer,
            vrf_value: vrf.value,
            vrf_proof: vrf.proof,
            timestamp,
            hash: BlockHash::ZERO,
        };
        block.hash = block.compute_hash();
        block
    }

    pub fn genesis() -> Self {
        let zero = VrfOutput {
            value: VrfValue([0u8; 32]),
            proof: VrfProof([0u8; 32]),
        };
        Block::new(0, BlockHash::ZERO, Vec::new(), NodeId::SUPERVISOR, &zero, 0)
    }

    /// Content hash over every field except `hash` itself, with each field
    /// length-prefixed so encodings never collide.
    pub fn compute_hash(&self) -> BlockHash {
        let mut hasher = Sha256::new();
        let mut field = |bytes: &[u8]| {
            hasher.update((bytes.len() as u64).to_be_bytes());
            hasher.update(bytes);
        };
        field(&self.height.to_be_bytes());
        field(&self.previous_hash.0);
        field(&(self.transactions.len() as u64).to_be_bytes());
        for tx in &self.transactions {
            field(&tx.canonical_bytes());
        }
        field(&self.proposer.0.to_be_bytes());
        field(&self.vrf_value.0);
        field(&self.vrf_proof.0);
        field(&self.timestamp.to_be_bytes());
        BlockHash(hasher.finalize().into())
    }

    pub fn vrf_output(&self) -> VrfOutput {
        VrfOutput {
            value: self.vrf_value,
            proof: self.vrf_proof,
        }
    }
}

#[derive(Clone, Debug)]
pub struct Chain {
    blocks: Vec<Block>,
}

impl Default for Chain {
    fn default() -> Self {
        Self::new()
    }
}

impl Chain {
    pub fn new() -> Self {
        Chain {
            blocks: vec![Block::genesis()],
        }
    }

    pub fn tip(&self) -> &Block {
        self.blocks.last().expect("genesis always present")
    }

    pub fn height(&self) -> u64 {
        self.tip().height
    }

    pub fn blocks(&self) -> &[Block] {
        &self.blocks
    }

    /// Appends a structurally verified block: hash integrity, parent link
    /// and consecutive height. Proposer legitimacy (VRF, membership) is
    /// checked by `verify_block` before blocks reach this point.
    pub fn append(&mut self, block: Block) -> Result<(), ChainError> {
        if block.compute_hash() != block.hash {
            return Err(ChainError::RejectedBlock("content hash mismatch"));
        }
        let tip = self.tip();
        if block.previous_hash != tip.hash {
            return Err(ChainError::RejectedBlock("previous hash does not match tip"));
        }
        if block.height != tip.height + 1 {
            return Err(ChainError::RejectedBlock("non-consecutive height"));
        }
        self.blocks.push(block);
        Ok(())
    }

    /// Full candidate-block check against the current tip: content hash,
    /// link, proposer VRF against the round seed, and every transaction
    /// re-validated through the supplied predicate.
    pub fn verify_block<F>(
        &self,
        block: &Block,
        round_seed: &[u8],
        proposer_pk: &PublicKey,
        tx_valid: F,
    ) -> bool
    where
        F: Fn(&Settlement) -> bool,
    {
        if block.compute_hash() != block.hash {
            return false;
        }
        let tip = self.tip();
        if block.previous_hash != tip.hash || block.height != tip.height + 1 {
            return false;
        }
        if !crate::vrf::verify(proposer_pk, round_seed, &block.vrf_output()) {
            return false;
        }
        block.transactions.iter().all(tx_valid)
    }

    /// Newline-delimited structured records for audit tooling.
    pub fn dump_records(&self) -> String {
        let mut out = String::new();
        for block in &self.blocks {
            let record = BlockRecord {
                height: block.height,
                previous_hash: block.previous_hash.to_hex(),
                hash: block.hash.to_hex(),
                proposer: block.proposer.to_string(),
                vrf_value: block.vrf_value.to_hex(),
                timestamp: block.timestamp,
                transactions: &block.transactions,
            };
            out.push_str(&serde_json::to_string(&record).expect("serializable record"));
            out.push('\n');
        }
        out
    }
}
