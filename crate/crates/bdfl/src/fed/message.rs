//! Protocol message schema shared by every transport.

use crate::phe::{Ciphertext, PublicKey};
use serde::{Deserialize, Serialize};

/// The three protocol roles. A holds features only, B holds features and
/// labels, C holds the private key and no data.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum PartyRole {
    #[serde(rename = "A")]
    HostA,
    #[serde(rename = "B")]
    GuestB,
    #[serde(rename = "C")]
    ArbiterC,
}

impl PartyRole {
    pub fn name(&self) -> &'static str {
        match self {
            PartyRole::HostA => "A",
            PartyRole::GuestB => "B",
            PartyRole::ArbiterC => "C",
        }
    }
}

/// Message payloads. Per round the data plane is exactly: `EncUa` (A to B),
/// `EncD` (B to A), `EncGrad` from each data party to C, `EncLoss` (B to C)
/// and one `PlainGrad` back to each owner. The control variants exist for
/// deployments where no shared driver coordinates the loop.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Payload {
    PubKey { key: PublicKey },
    EncUa { u: Vec<Ciphertext>, u_sq: Vec<Ciphertext> },
    EncD { d: Vec<Ciphertext> },
    EncGrad { owner: PartyRole, g: Vec<Ciphertext> },
    EncLoss { loss: Ciphertext },
    PlainGrad { owner: PartyRole, g: Vec<f64> },
    PlainLoss { loss: f64 },
    Converged { flag: bool },
    Halt,
}

impl Payload {
    pub fn kind_name(&self) -> &'static str {
        match self {
            Payload::PubKey { .. } => "pub_key",
            Payload::EncUa { .. } => "enc_ua",
            Payload::EncD { .. } => "enc_d",
            Payload::EncGrad { .. } => "enc_grad",
            Payload::EncLoss { .. } => "enc_loss",
            Payload::PlainGrad { .. } => "plain_grad",
            Payload::PlainLoss { .. } => "plain_loss",
            Payload::Converged { .. } => "converged",
            Payload::Halt => "halt",
        }
    }
}

/// A routed protocol datagram.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Message {
    pub round: u32,
    pub from: PartyRole,
    pub to: PartyRole,
    pub payload: Payload,
}

impl Message {
    /// Position of this message inside its round's canonical order.
    pub fn canonical_rank(&self) -> u8 {
        match (&self.payload, self.from, self.to) {
            (Payload::EncUa { .. }, ..) => 0,
            (Payload::EncD { .. }, ..) => 1,
            (Payload::EncGrad { .. }, PartyRole::HostA, _) => 2,
            (Payload::EncGrad { .. }, PartyRole::GuestB, _) => 3,
            (Payload::EncLoss { .. }, ..) => 4,
            (Payload::PlainGrad { .. }, _, PartyRole::HostA) => 5,
            (Payload::PlainGrad { .. }, _, PartyRole::GuestB) => 6,
            (Payload::PlainLoss { .. }, ..) => 7,
            (Payload::PubKey { .. }, ..) => 8,
            (Payload::Converged { .. }, ..) => 9,
            (Payload::Halt, ..) => 10,
            _ => 11,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::phe::generate_keypair;

    #[test]
    fn payload_kind_tags_are_stable() {
        let kp = generate_keypair(512, 1).unwrap();
        let msg = Message {
            round: 3,
            from: PartyRole::ArbiterC,
            to: PartyRole::HostA,
            payload: Payload::PlainGrad { owner: PartyRole::HostA, g: vec![0.5, -0.25] },
        };
        let json = serde_json::to_string(&msg).unwrap();
        assert!(json.contains("\"kind\":\"plain_grad\""));
        assert!(json.contains("\"from\":\"C\""));
        let back: Message = serde_json::from_str(&json).unwrap();
        assert_eq!(back, msg);

        let msg = Message {
            round: 0,
            from: PartyRole::ArbiterC,
            to: PartyRole::GuestB,
            payload: Payload::PubKey { key: kp.public.clone() },
        };
        let back: Message = serde_json::from_str(&serde_json::to_string(&msg).unwrap()).unwrap();
        assert_eq!(back, msg);
    }

    #[test]
    fn canonical_ranks_order_a_round() {
        use PartyRole::*;
        let mk = |payload, from, to| Message { round: 1, from, to, payload };
        let round = [
            mk(Payload::EncUa { u: vec![], u_sq: vec![] }, HostA, GuestB),
            mk(Payload::EncD { d: vec![] }, GuestB, HostA),
            mk(Payload::EncGrad { owner: HostA, g: vec![] }, HostA, ArbiterC),
            mk(Payload::EncGrad { owner: GuestB, g: vec![] }, GuestB, ArbiterC),
            mk(Payload::EncLoss { loss: serde_json::from_str("{\"value\":\"01\",\"exponent\":0}").unwrap() }, GuestB, ArbiterC),
            mk(Payload::PlainGrad { owner: HostA, g: vec![] }, ArbiterC, HostA),
            mk(Payload::PlainGrad { owner: GuestB, g: vec![] }, ArbiterC, GuestB),
        ];
        for (i, m) in round.iter().enumerate() {
            assert_eq!(m.canonical_rank() as usize, i);
        }
    }
}
