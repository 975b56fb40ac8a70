use super::{uniform_index, Decision};
use crate::engine::{AgentState, ConventionId, Inventory, NamePool};

/// Speaker rule: a uniform element of the inventory, or a fresh name when
/// the inventory is empty.
pub fn minimal_ng_decide(inventory: &Inventory, draw: u64) -> Decision {
    if inventory.is_empty() {
        Decision::Invent
    } else {
        Decision::Name(inventory.as_slice()[uniform_index(draw, inventory.len())])
    }
}

/// Speaker choice with invention applied: an invented name is interned in
/// `pool` and added to the speaker's inventory.
pub fn minimal_ng_choose(speaker: &mut AgentState, pool: &mut NamePool, draw: u64) -> ConventionId {
    match minimal_ng_decide(&speaker.inventory, draw) {
        Decision::Name(name) => name,
        Decision::Invent => {
            let name = pool.invent();
            speaker.inventory.insert(name);
            name
        }
    }
}

/// On success both inventories collapse to the spoken name; on failure the
/// listener learns it. Committed agents keep their inventory unchanged.
pub fn minimal_ng_update(
    speaker: &mut AgentState,
    listener: &mut AgentState,
    name: ConventionId,
    success: bool,
) {
    if success {
        if speaker.committed_to.is_none() {
            speaker.inventory.collapse_to(name);
        }
        if listener.committed_to.is_none() {
            listener.inventory.collapse_to(name);
        }
    } else if listener.committed_to.is_none() {
        listener.inventory.insert(name);
    }
}
