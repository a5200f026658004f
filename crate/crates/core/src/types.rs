//! Identifiers and time units shared across the crate.

use std::fmt;

use serde::{Deserialize, Serialize};

/// Simulation time in abstract ticks.
pub type Tick = u64;

/// Identifier of a participant node.
///
/// The supervision node is a distinct entity outside the participant set and
/// uses the reserved [`NodeId::SUPERVISOR`] value.
#[derive(
    Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize,
)]
#[serde(transparent)]
pub struct NodeId(pub u32);

impl NodeId {
    /// Reserved id of the supervision node.
    pub const SUPERVISOR: NodeId = NodeId(u32::MAX);

    pub fn is_supervisor(&self) -> bool {
        *self == Self::SUPERVISOR
    }
}

impl fmt::Display for NodeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_supervisor() {
            write!(f, "supervisor")
        } else {
            write!(f, "{}", self.0)
        }
    }
}
