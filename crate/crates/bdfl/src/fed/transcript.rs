//! Append-only record of every protocol message, the artifact's unit of
//! communication-cost accounting.

use super::message::{Message, PartyRole};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use std::time::Instant;

/// One recorded message. `bytes` and `payload_digest` are computed over the
/// serialized payload, so records are identical however the message
/// travelled. The capture instant is diagnostic only and never serialized,
/// keeping transcript files byte-stable across runs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TranscriptRecord {
    pub round: u32,
    pub from: PartyRole,
    pub to: PartyRole,
    pub kind: String,
    pub bytes: u64,
    pub payload_digest: String,
    #[serde(skip, default = "Instant::now")]
    pub captured_at: Instant,
}

impl TranscriptRecord {
    pub fn of(msg: &Message) -> Self {
        let payload = serde_json::to_vec(&msg.payload).expect("payload serialization");
        let digest = Sha256::digest(&payload);
        TranscriptRecord {
            round: msg.round,
            from: msg.from,
            to: msg.to,
            kind: msg.payload.kind_name().to_string(),
            bytes: payload.len() as u64,
            payload_digest: hex::encode(digest),
            captured_at: Instant::now(),
        }
    }
}

/// Ordered list of transcript records.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Transcript {
    records: Vec<TranscriptRecord>,
}

impl Transcript {
    pub fn new() -> Self {
        Transcript::default()
    }

    pub fn append(&mut self, record: TranscriptRecord) {
        self.records.push(record);
    }

    pub fn records(&self) -> &[TranscriptRecord] {
        &self.records
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    /// Total payload bytes attributed to one round.
    pub fn round_bytes(&self, round: u32) -> u64 {
        self.records.iter().filter(|r| r.round == round).map(|r| r.bytes).sum()
    }

    /// Line-delimited JSON rendering, one record per line.
    pub fn to_jsonl(&self) -> String {
        let mut out = String::new();
        for r in &self.records {
            out.push_str(&serde_json::to_string(r).expect("record serialization"));
            out.push('\n');
        }
        out
    }
}
