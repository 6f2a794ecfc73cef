//! Append-only event log of a simulation run.
//!
//! Exported as newline-delimited records
//! `timestamp_ms,event_kind,node_id,round,message_kind,message_hash`
//! for post-hoc analysis; the safety checker consumes the structural subset
//! (commits, adoptions, reorgs, role assignments).

use crate::hash::{from_hex32, to_hex};
use crate::vrf::NodeId;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum LogLevel {
    /// Only structural records: round boundaries, commits, adoptions,
    /// reorgs, withholds, and role assignments. Keeps experiment logs small.
    #[default]
    CommitsOnly,
    /// Every send, delivery, and drop as well; for debugging and the
    /// determinism/reachability tests.
    Full,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum EventKind {
    Send,
    Deliver,
    DropDuplicate,
    DropStale,
    DropForward,
    Withhold,
    Commit,
    Adopt,
    Reorg,
    RoundStart,
    RoleMalicious,
}

impl EventKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            EventKind::Send => "send",
            EventKind::Deliver => "deliver",
            EventKind::DropDuplicate => "drop-duplicate",
            EventKind::DropStale => "drop-stale",
            EventKind::DropForward => "drop-forward",
            EventKind::Withhold => "withhold",
            EventKind::Commit => "commit",
            EventKind::Adopt => "adopt",
            EventKind::Reorg => "reorg",
            EventKind::RoundStart => "round-start",
            EventKind::RoleMalicious => "role-malicious",
        }
    }

    pub fn from_str(s: &str) -> Option<EventKind> {
        Some(match s {
            "send" => EventKind::Send,
            "deliver" => EventKind::Deliver,
            "drop-duplicate" => EventKind::DropDuplicate,
            "drop-stale" => EventKind::DropStale,
            "drop-forward" => EventKind::DropForward,
            "withhold" => EventKind::Withhold,
            "commit" => EventKind::Commit,
            "adopt" => EventKind::Adopt,
            "reorg" => EventKind::Reorg,
            "round-start" => EventKind::RoundStart,
            "role-malicious" => EventKind::RoleMalicious,
            _ => return None,
        })
    }

    /// Structural records survive at `CommitsOnly` level.
    pub fn is_structural(&self) -> bool {
        matches!(
            self,
            EventKind::Commit
                | EventKind::Adopt
                | EventKind::Reorg
                | EventKind::Withhold
                | EventKind::RoundStart
                | EventKind::RoleMalicious
        )
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LogRecord {
    pub at_ms: u64,
    pub kind: EventKind,
    /// Acting node; all-zero for network-global records (round boundaries).
    pub node: NodeId,
    /// Message round, block height (commit/reorg), new head height (adopt),
    /// or cycle number (round-start).
    pub round: u64,
    /// Message kind for traffic records, "block" / "chain" for ledger
    /// records, "-" otherwise.
    pub message_kind: &'static str,
    /// Message digest, block hash, or all-zero.
    pub hash: [u8; 32],
}

impl LogRecord {
    pub fn to_line(&self) -> String {
        format!(
            "{},{},{},{},{},{}",
            self.at_ms,
            self.kind.as_str(),
            self.node.to_hex(),
            self.round,
            self.message_kind,
            to_hex(&self.hash)
        )
    }

    pub fn parse(line: &str) -> Result<LogRecord, LogParseError> {
        let parts: Vec<&str> = line.split(',').collect();
        if parts.len() != 6 {
            return Err(LogParseError::FieldCount(parts.len()));
        }
        let at_ms = parts[0]
            .parse()
            .map_err(|_| LogParseError::BadField("timestamp"))?;
        let kind =
            EventKind::from_str(parts[1]).ok_or(LogParseError::BadField("event_kind"))?;
        let node = NodeId(from_hex32(parts[2]).ok_or(LogParseError::BadField("node_id"))?);
        let round = parts[3]
            .parse()
            .map_err(|_| LogParseError::BadField("round"))?;
        let message_kind = match parts[4] {
            "proposal-announce" => "proposal-announce",
            "block-body" => "block-body",
            "vote" => "vote",
            "sync-request" => "sync-request",
            "sync-response" => "sync-response",
            "block" => "block",
            "chain" => "chain",
            "-" => "-",
            _ => return Err(LogParseError::BadField("message_kind")),
        };
        let hash = from_hex32(parts[5]).ok_or(LogParseError::BadField("message_hash"))?;
        Ok(LogRecord {
            at_ms,
            kind,
            node,
            round,
            message_kind,
            hash,
        })
    }
}

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum LogParseError {
    #[error("expected 6 comma-separated fields, found {0}")]
    FieldCount(usize),
    #[error("unparseable {0} field")]
    BadField(&'static str),
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct EventLog {
    level: LogLevel,
    records: Vec<LogRecord>,
}

impl EventLog {
    pub fn new(level: LogLevel) -> EventLog {
        EventLog {
            level,
            records: Vec::new(),
        }
    }

    pub fn push(&mut self, record: LogRecord) {
        if self.level == LogLevel::Full || record.kind.is_structural() {
            self.records.push(record);
        }
    }

    pub fn records(&self) -> &[LogRecord] {
        &self.records
    }

    pub fn iter_kind(&self, kind: EventKind) -> impl Iterator<Item = &LogRecord> {
        self.records.iter().filter(move |r| r.kind == kind)
    }

    pub fn export_lines(&self) -> String {
        let mut out = String::new();
        for r in &self.records {
            out.push_str(&r.to_line());
            out.push('\n');
        }
        out
    }

    /// Parse a log previously written with [`EventLog::export_lines`].
    pub fn parse(input: &str) -> Result<EventLog, LogParseError> {
        let mut log = EventLog::new(LogLevel::Full);
        for line in input.lines() {
            if line.is_empty() {
                continue;
            }
            log.records.push(LogRecord::parse(line)?);
        }
        Ok(log)
    }
}
