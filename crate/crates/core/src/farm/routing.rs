use alloc::vec::Vec;

use super::FarmletId;

/// Round-robin routing over the active farmlets.
///
/// Each slot holds a farmlet; failover rewrites the unfit farmlet's slot to
/// the spare so the spare inherits exactly that share.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RoutingTable {
    slots: Vec<FarmletId>,
    cursor: usize,
}

impl RoutingTable {
    pub fn new(active: impl IntoIterator<Item = FarmletId>) -> Self {
        RoutingTable {
            slots: active.into_iter().collect(),
            cursor: 0,
        }
    }

    pub fn slots(&self) -> &[FarmletId] {
        &self.slots
    }

    /// Next farmlet in rotation; `None` when no farmlet is routable.
    pub fn route(&mut self) -> Option<FarmletId> {
        if self.slots.is_empty() {
            return None;
        }
        let f = self.slots[self.cursor % self.slots.len()];
        self.cursor = (self.cursor + 1) % self.slots.len();
        Some(f)
    }

    /// Redirects every slot of `unfit` to `spare`. Returns the number of slots changed.
    pub fn redirect(&mut self, unfit: FarmletId, spare: FarmletId) -> usize {
        let mut n = 0;
        for s in &mut self.slots {
            if *s == unfit {
                *s = spare;
                n += 1;
            }
        }
        n
    }

    pub fn contains(&self, f: FarmletId) -> bool {
        self.slots.contains(&f)
    }
}
