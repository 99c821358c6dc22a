use alloc::collections::BTreeMap;
use alloc::string::String;
use core::fmt;
use core::str::FromStr;

use serde::{Deserialize, Serialize};

use super::VlaError;
use crate::engine::NodeId;
use crate::time::SimTime;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MessageClass {
    Fault,
    Control,
    Statistical,
}

impl MessageClass {
    pub fn name(self) -> &'static str {
        match self {
            MessageClass::Fault => "fault",
            MessageClass::Control => "control",
            MessageClass::Statistical => "statistical",
        }
    }
}

/// Fault vocabulary. `e1` is the over-budget fault; the rest are local additions.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FaultCode {
    /// PA over its crossing time budget.
    E1,
    /// Link down.
    E2,
    /// Queue overflow.
    E3,
    /// PA dead.
    E4,
}

impl FaultCode {
    pub fn as_str(self) -> &'static str {
        match self {
            FaultCode::E1 => "e1",
            FaultCode::E2 => "e2",
            FaultCode::E3 => "e3",
            FaultCode::E4 => "e4",
        }
    }
}

impl fmt::Display for FaultCode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for FaultCode {
    type Err = ();
    fn from_str(s: &str) -> Result<Self, ()> {
        match s {
            "e1" => Ok(FaultCode::E1),
            "e2" => Ok(FaultCode::E2),
            "e3" => Ok(FaultCode::E3),
            "e4" => Ok(FaultCode::E4),
            _ => Err(()),
        }
    }
}

/// What a message is about, beyond its class.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Topic {
    Fault,
    FaultSummary,
    Alarm,
    Statistics,
    SetPrescale,
    /// Farmlet-ordered PA reset.
    Reset,
    Heartbeat,
}

/// Asynchronous message between agents. Sending never blocks.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VlaMessage {
    pub class: MessageClass,
    pub topic: Topic,
    pub code: Option<FaultCode>,
    pub source: NodeId,
    pub dest: NodeId,
    pub t: SimTime,
    pub body: BTreeMap<String, f64>,
}

impl VlaMessage {
    pub fn new(
        class: MessageClass,
        topic: Topic,
        code: Option<FaultCode>,
        source: NodeId,
        dest: NodeId,
        t: SimTime,
    ) -> Result<Self, VlaError> {
        if class == MessageClass::Fault && code.is_none() {
            return Err(VlaError::MissingCode);
        }
        Ok(VlaMessage {
            class,
            topic,
            code,
            source,
            dest,
            t,
            body: BTreeMap::new(),
        })
    }

    pub fn fault(code: FaultCode, source: NodeId, dest: NodeId, t: SimTime) -> Self {
        VlaMessage {
            class: MessageClass::Fault,
            topic: Topic::Fault,
            code: Some(code),
            source,
            dest,
            t,
            body: BTreeMap::new(),
        }
    }

    pub fn with(mut self, key: &str, value: f64) -> Self {
        self.body.insert(String::from(key), value);
        self
    }

    pub fn get(&self, key: &str) -> Option<f64> {
        self.body.get(key).copied()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fault_requires_code() {
        assert_eq!(
            VlaMessage::new(MessageClass::Fault, Topic::Fault, None, NodeId(1), NodeId(0), SimTime::ZERO),
            Err(VlaError::MissingCode)
        );
        assert!(VlaMessage::new(
            MessageClass::Statistical,
            Topic::Statistics,
            None,
            NodeId(1),
            NodeId(0),
            SimTime::ZERO
        )
        .is_ok());
    }

    #[test]
    fn codes_round_trip() {
        for c in [FaultCode::E1, FaultCode::E2, FaultCode::E3, FaultCode::E4] {
            assert_eq!(c.as_str().parse::<FaultCode>(), Ok(c));
        }
        assert!("e9".parse::<FaultCode>().is_err());
    }
}
