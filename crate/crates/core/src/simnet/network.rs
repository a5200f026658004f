//! Reliable FIFO message transport with per-recipient drop probabilities
//! for flaky nodes.

use std::collections::{BTreeMap, VecDeque};

use rand::Rng;
use rand_chacha::ChaCha20Rng;

use crate::chain::Block;
use crate::consensus::{CommitteeDispatch, ComputingSubmission, RoundEndBroadcast};
use crate::types::NodeId;

use super::SimError;

#[derive(Clone, Debug)]
pub enum Message {
    /// A computing node's list submission to the supervision node.
    ListSubmission(ComputingSubmission),
    /// Committee credentials for the next round.
    Dispatch(CommitteeDispatch),
    /// The round-end broadcast to every node.
    RoundEnd(RoundEndBroadcast),
    /// A candidate's proposed block.
    BlockProposal(Block),
    /// The supervision node asks a voter to check the leading block.
    VoteRequest(Block),
    /// The voter's verdict.
    VoteReply { approve: bool },
}

#[derive(Clone, Debug)]
pub struct Envelope {
    pub from: NodeId,
    pub to: NodeId,
    pub message: Message,
}

#[derive(Debug)]
pub struct Network {
    queue: VecDeque<Envelope>,
    drop_probability: BTreeMap<NodeId, f64>,
    rng: ChaCha20Rng,
    /// Queue pops, delivered or dropped; part of the round event count.
    pub events: u64,
    pub dropped: u64,
}

impl Network {
    pub fn new(rng: ChaCha20Rng) -> Self {
        Network {
            queue: VecDeque::new(),
            drop_probability: BTreeMap::new(),
            rng,
            events: 0,
            dropped: 0,
        }
    }

    pub fn register(&mut self, node: NodeId, drop_probability: f64) {
        self.drop_probability.insert(node, drop_probability);
    }

    /// Enqueues a message for in-order delivery on the next event step.
    pub fn deliver(&mut self, message: Message, from: NodeId, to: NodeId) -> Result<(), SimError> {
        if !self.drop_probability.contains_key(&from) {
            return Err(SimError::Routing(from));
        }
        if !self.drop_probability.contains_key(&to) {
            return Err(SimError::Routing(to));
        }
        self.queue.push_back(Envelope { from, to, message });
        Ok(())
    }

    /// Pops until a message survives its recipient's drop roll; `None`
    /// when the queue is empty.
    pub fn step(&mut self) -> Option<Envelope> {
        while let Some(envelope) = self.queue.pop_front() {
            self.events += 1;
            let p = self.drop_probability[&envelope.to];
            if p > 0.0 && self.rng.gen_bool(p) {
                self.dropped += 1;
                continue;
            }
            return Some(envelope);
        }
        None
    }

    /// Delivers everything currently queued, in order.
    pub fn drain(&mut self) -> Vec<Envelope> {
        let mut out = Vec::new();
        while let Some(envelope) = self.step() {
            out.push(envelope);
        }
        out
    }
}
