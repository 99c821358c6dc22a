use alloc::collections::VecDeque;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use super::{Crossing, FarmError, FarmletId, WorkerId};
use crate::rng::RngStream;
use crate::time::SimTime;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FarmletRole {
    Active,
    HotSpare,
    Unfit,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum EnqueueOutcome {
    Accepted,
    DroppedPrescale,
    Overflowed,
}

/// A group of workers fed from one bounded buffer-manager queue.
#[derive(Clone, Debug)]
pub struct Farmlet {
    pub id: FarmletId,
    pub workers: Vec<WorkerId>,
    pub role: FarmletRole,
    pub prescale_drop_rate: f64,
    queue: VecDeque<Crossing>,
    capacity: usize,
    rng: RngStream,
    pub received: u64,
    pub overflowed: u64,
    pub dropped_prescale: u64,
    pub processed: u64,
    pub last_received_at: Option<SimTime>,
    pub max_occupancy: usize,
}

impl Farmlet {
    pub fn new(id: FarmletId, workers: Vec<WorkerId>, role: FarmletRole, capacity: usize, rng: RngStream) -> Self {
        Farmlet {
            id,
            workers,
            role,
            prescale_drop_rate: 0.0,
            queue: VecDeque::with_capacity(capacity),
            capacity,
            rng,
            received: 0,
            overflowed: 0,
            dropped_prescale: 0,
            processed: 0,
            last_received_at: None,
            max_occupancy: 0,
        }
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn occupancy(&self) -> usize {
        self.queue.len()
    }

    pub fn occupancy_fraction(&self) -> f64 {
        if self.capacity == 0 {
            1.0
        } else {
            self.queue.len() as f64 / self.capacity as f64
        }
    }

    /// Clamps into `[0, 1]`.
    pub fn set_drop_rate(&mut self, rate: f64) {
        self.prescale_drop_rate = if rate.is_nan() { 0.0 } else { rate.clamp(0.0, 1.0) };
    }

    /// Prescale coin first, then the capacity check.
    pub fn enqueue(&mut self, crossing: Crossing, now: SimTime) -> Result<EnqueueOutcome, FarmError> {
        if self.role == FarmletRole::HotSpare {
            return Err(FarmError::FarmletNotActive(self.id));
        }
        self.received += 1;
        self.last_received_at = Some(now);
        let rate = self.prescale_drop_rate;
        let drop = rate >= 1.0 || (rate > 0.0 && self.rng.bernoulli(rate));
        if drop {
            self.dropped_prescale += 1;
            return Ok(EnqueueOutcome::DroppedPrescale);
        }
        if self.queue.len() >= self.capacity {
            self.overflowed += 1;
            return Ok(EnqueueOutcome::Overflowed);
        }
        self.queue.push_back(crossing);
        self.max_occupancy = self.max_occupancy.max(self.queue.len());
        Ok(EnqueueOutcome::Accepted)
    }

    pub fn dequeue(&mut self) -> Option<Crossing> {
        self.queue.pop_front()
    }

    pub fn is_empty(&self) -> bool {
        self.queue.is_empty()
    }
}
