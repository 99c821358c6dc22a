use serde::{Deserialize, Serialize};

/// Farm-wide event accounting.
///
/// `generated = processed + dropped_prescale + lost + in_flight` holds at
/// every snapshot, with `in_flight` measured from queues, workers and links.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct FarmCounters {
    pub generated: u64,
    pub processed: u64,
    pub accepted_l1: u64,
    pub rejected_l1: u64,
    pub dropped_prescale: u64,
    /// Missing events: overflow, severed links, aborted crossings.
    pub lost: u64,
    pub l2_passed: u64,
    pub l3_passed: u64,
    pub generated_bytes: u64,
    pub l3_bytes: u64,
}

/// Processed over generated; 1.0 when nothing has been generated.
pub fn efficiency(c: &FarmCounters) -> f64 {
    if c.generated == 0 {
        1.0
    } else {
        c.processed as f64 / c.generated as f64
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_run_is_fully_efficient() {
        assert_eq!(efficiency(&FarmCounters::default()), 1.0);
    }

    #[test]
    fn all_processed_is_one() {
        let c = FarmCounters {
            generated: 10,
            processed: 10,
            ..Default::default()
        };
        assert_eq!(efficiency(&c), 1.0);
    }

    #[test]
    fn ratio() {
        let c = FarmCounters {
            generated: 8,
            processed: 6,
            lost: 2,
            ..Default::default()
        };
        assert_eq!(efficiency(&c), 0.75);
    }
}
