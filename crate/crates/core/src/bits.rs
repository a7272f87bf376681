use std::fmt;

use serde::{Deserialize, Serialize};

/// Alice's two-bit message `a = a0 a1`, stored as `2*a0 + a1`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "u8", into = "u8")]
pub struct Message(u8);

impl Message {
    pub const ALL: [Message; 4] = [Message(0), Message(1), Message(2), Message(3)];

    pub fn new(a0: u8, a1: u8) -> Self {
        assert!(a0 < 2 && a1 < 2, "message bits must be 0 or 1");
        Message(2 * a0 + a1)
    }

    pub fn from_index(index: usize) -> Self {
        assert!(index < 4, "message index out of range");
        Message(index as u8)
    }

    pub fn index(self) -> usize {
        self.0 as usize
    }

    /// Bit `a_i` for `i` in {0, 1}.
    pub fn bit(self, i: usize) -> u8 {
        match i {
            0 => self.0 >> 1,
            1 => self.0 & 1,
            _ => panic!("message bit index {i} out of range"),
        }
    }

    /// `(-1)^{a_i}`.
    pub fn sign(self, i: usize) -> f64 {
        if self.bit(i) == 0 {
            1.0
        } else {
            -1.0
        }
    }
}

impl TryFrom<u8> for Message {
    type Error = String;

    fn try_from(v: u8) -> Result<Self, Self::Error> {
        if v < 4 {
            Ok(Message(v))
        } else {
            Err(format!("message index {v} out of range"))
        }
    }
}

impl From<Message> for u8 {
    fn from(m: Message) -> u8 {
        m.0
    }
}

impl fmt::Display for Message {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}{}", self.bit(0), self.bit(1))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bits_round_trip() {
        let m = Message::new(0, 1);
        assert_eq!(m.to_string(), "01");
        assert_eq!(m.bit(0), 0);
        assert_eq!(m.bit(1), 1);
        assert_eq!(m.sign(1), -1.0);
        assert_eq!(Message::from_index(2).to_string(), "10");
        assert!(Message::try_from(4).is_err());
    }
}
