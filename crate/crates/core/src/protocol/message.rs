use serde::{Deserialize, Serialize};

use crate::membership::ProcessId;
use crate::treecode::ProblemCode;

/// Fixed per-message header in the byte model.
pub const HEADER_BYTES: u64 = 64;
/// Bytes per `(var, bit)` pair, per scalar, and per view entry.
pub const WORD_BYTES: u64 = 8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MessageKind {
    WorkRequest,
    WorkGrant,
    WorkDenied,
    WorkReport,
    TableGossip,
    TerminationNotice,
    Join,
    ViewGossip,
}

impl MessageKind {
    pub const ALL: [MessageKind; 8] = [
        MessageKind::WorkRequest,
        MessageKind::WorkGrant,
        MessageKind::WorkDenied,
        MessageKind::WorkReport,
        MessageKind::TableGossip,
        MessageKind::TerminationNotice,
        MessageKind::Join,
        MessageKind::ViewGossip,
    ];

    pub fn name(self) -> &'static str {
        match self {
            MessageKind::WorkRequest => "work-request",
            MessageKind::WorkGrant => "work-grant",
            MessageKind::WorkDenied => "work-denied",
            MessageKind::WorkReport => "work-report",
            MessageKind::TableGossip => "table-gossip",
            MessageKind::TerminationNotice => "termination-notice",
            MessageKind::Join => "join",
            MessageKind::ViewGossip => "view-gossip",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Payload {
    WorkRequest {
        request: u64,
    },
    WorkGrant {
        request: u64,
        codes: Vec<ProblemCode>,
        best: f64,
    },
    WorkDenied {
        request: u64,
    },
    WorkReport {
        codes: Vec<ProblemCode>,
        best: f64,
    },
    TableGossip {
        codes: Vec<ProblemCode>,
        best: f64,
    },
    /// Carries the root code (zero pairs) and the sender's incumbent.
    TerminationNotice {
        best: f64,
    },
    Join {
        heartbeat: u64,
    },
    ViewGossip {
        entries: Vec<(ProcessId, u64)>,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct Message {
    pub sender: ProcessId,
    pub receiver: ProcessId,
    pub payload: Payload,
}

fn pairs(codes: &[ProblemCode]) -> u64 {
    codes.iter().map(|c| c.len() as u64).sum()
}

impl Message {
    pub fn new(sender: ProcessId, receiver: ProcessId, payload: Payload) -> Self {
        Self { sender, receiver, payload }
    }

    pub fn kind(&self) -> MessageKind {
        match self.payload {
            Payload::WorkRequest { .. } => MessageKind::WorkRequest,
            Payload::WorkGrant { .. } => MessageKind::WorkGrant,
            Payload::WorkDenied { .. } => MessageKind::WorkDenied,
            Payload::WorkReport { .. } => MessageKind::WorkReport,
            Payload::TableGossip { .. } => MessageKind::TableGossip,
            Payload::TerminationNotice { .. } => MessageKind::TerminationNotice,
            Payload::Join { .. } => MessageKind::Join,
            Payload::ViewGossip { .. } => MessageKind::ViewGossip,
        }
    }

    /// Codes carried by the payload, if any.
    pub fn codes(&self) -> &[ProblemCode] {
        match &self.payload {
            Payload::WorkGrant { codes, .. }
            | Payload::WorkReport { codes, .. }
            | Payload::TableGossip { codes, .. } => codes,
            _ => &[],
        }
    }

    /// Wire size: 64-byte header, plus 8 bytes per code pair, per scalar
    /// (request id, incumbent, heartbeat), and per view entry.
    pub fn size_bytes(&self) -> u64 {
        let words = match &self.payload {
            Payload::WorkRequest { .. } | Payload::WorkDenied { .. } => 1,
            Payload::WorkGrant { codes, .. } => 2 + pairs(codes),
            Payload::WorkReport { codes, .. } | Payload::TableGossip { codes, .. } => 1 + pairs(codes),
            Payload::TerminationNotice { .. } => 1,
            Payload::Join { .. } => 1,
            Payload::ViewGossip { entries } => entries.len() as u64,
        };
        HEADER_BYTES + WORD_BYTES * words
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn byte_model() {
        let code = ProblemCode::from_bits(&[(1, 0), (2, 1), (3, 0)]);
        let report =
            Message::new(0, 1, Payload::WorkReport { codes: vec![code.clone(), ProblemCode::root()], best: 1.0 });
        assert_eq!(report.size_bytes(), 64 + 8 * 3 + 8);
        assert_eq!(Message::new(0, 1, Payload::WorkRequest { request: 1 }).size_bytes(), 72);
        assert_eq!(Message::new(0, 1, Payload::TerminationNotice { best: 0.0 }).size_bytes(), 72);
        let grant = Message::new(0, 1, Payload::WorkGrant { request: 4, codes: vec![code], best: 2.0 });
        assert_eq!(grant.size_bytes(), 64 + 16 + 24);
        let view = Message::new(0, 1, Payload::ViewGossip { entries: vec![(0, 1), (1, 1), (2, 0), (3, 4), (4, 4)] });
        assert_eq!(view.size_bytes(), 64 + 40);
        let empty_table = Message::new(0, 1, Payload::TableGossip { codes: vec![], best: f64::INFINITY });
        assert_eq!(empty_table.size_bytes(), 72);
    }

    #[test]
    fn kind_names_match_serde() {
        for k in MessageKind::ALL {
            assert_eq!(serde_json::to_string(&k).unwrap(), format!("\"{}\"", k.name()));
        }
    }
}
