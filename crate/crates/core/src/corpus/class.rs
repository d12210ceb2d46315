use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::Error;

/// The seven event classes of the short-story schema.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum EventClass {
    CognitiveMentalState,
    Communication,
    Conflict,
    GeneralActivity,
    LifeEvent,
    Movement,
    Others,
}

impl EventClass {
    /// Alphabetical by abbreviation; this is the canonical index order.
    pub const ALL: [EventClass; 7] = [
        EventClass::CognitiveMentalState,
        EventClass::Communication,
        EventClass::Conflict,
        EventClass::GeneralActivity,
        EventClass::LifeEvent,
        EventClass::Movement,
        EventClass::Others,
    ];

    /// Slot order of the classification prompt.
    pub const PROMPT_ORDER: [EventClass; 7] = [
        EventClass::Conflict,
        EventClass::Communication,
        EventClass::LifeEvent,
        EventClass::Movement,
        EventClass::CognitiveMentalState,
        EventClass::GeneralActivity,
        EventClass::Others,
    ];

    pub const fn code(self) -> &'static str {
        match self {
            EventClass::CognitiveMentalState => "CMS",
            EventClass::Communication => "COM",
            EventClass::Conflict => "CON",
            EventClass::GeneralActivity => "GA",
            EventClass::LifeEvent => "LE",
            EventClass::Movement => "MOV",
            EventClass::Others => "OTH",
        }
    }

    pub const fn name(self) -> &'static str {
        match self {
            EventClass::CognitiveMentalState => "COGNITIVE-MENTAL-STATE",
            EventClass::Communication => "COMMUNICATION",
            EventClass::Conflict => "CONFLICT",
            EventClass::GeneralActivity => "GENERAL-ACTIVITY",
            EventClass::LifeEvent => "LIFE-EVENT",
            EventClass::Movement => "MOVEMENT",
            EventClass::Others => "OTHERS",
        }
    }

    /// Position in [`EventClass::ALL`].
    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(i: usize) -> Option<Self> {
        Self::ALL.get(i).copied()
    }
}

impl fmt::Display for EventClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for EventClass {
    type Err = Error;

    /// Accepts either the full name or the abbreviation, case-sensitively.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        EventClass::ALL
            .into_iter()
            .find(|c| c.name() == s || c.code() == s)
            .ok_or_else(|| Error::Class { class: s.to_string(), line: None })
    }
}

impl Serialize for EventClass {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(self.name())
    }
}

impl<'de> Deserialize<'de> for EventClass {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}
