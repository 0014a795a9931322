//! Message and payload accounting for one run.

use std::collections::BTreeMap;
use std::fmt::{self, Write as _};

use super::protocol::MessageKind;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Collective {
    Gather,
    Broadcast,
    Reduction,
}

impl Collective {
    pub fn as_str(self) -> &'static str {
        match self {
            Collective::Gather => "gather",
            Collective::Broadcast => "broadcast",
            Collective::Reduction => "reduction",
        }
    }
}

/// Totals for one message kind.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct KindTally {
    pub messages: usize,
    pub scalars: usize,
    pub min_scalars: usize,
    pub max_scalars: usize,
}

/// Per-kind message counts, payload sizes and collective counts. Counters
/// only grow during a run.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Ledger {
    kinds: BTreeMap<MessageKind, KindTally>,
    collectives: BTreeMap<(Collective, MessageKind), usize>,
}

impl Ledger {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn record(&mut self, kind: MessageKind, scalars: usize) {
        let t = self.kinds.entry(kind).or_default();
        if t.messages == 0 {
            t.min_scalars = scalars;
            t.max_scalars = scalars;
        } else {
            t.min_scalars = t.min_scalars.min(scalars);
            t.max_scalars = t.max_scalars.max(scalars);
        }
        t.messages += 1;
        t.scalars += scalars;
    }

    pub fn record_collective(&mut self, op: Collective, kind: MessageKind) {
        *self.collectives.entry((op, kind)).or_default() += 1;
    }

    pub fn tally(&self, kind: MessageKind) -> KindTally {
        self.kinds.get(&kind).copied().unwrap_or_default()
    }

    pub fn messages(&self, kind: MessageKind) -> usize {
        self.tally(kind).messages
    }

    pub fn scalars(&self, kind: MessageKind) -> usize {
        self.tally(kind).scalars
    }

    /// True when every message of `kind` carried exactly `scalars` reals.
    pub fn every_message_carries(&self, kind: MessageKind, scalars: usize) -> bool {
        let t = self.tally(kind);
        t.messages > 0 && t.min_scalars == scalars && t.max_scalars == scalars
    }

    pub fn collectives(&self, op: Collective, kind: MessageKind) -> usize {
        self.collectives.get(&(op, kind)).copied().unwrap_or(0)
    }

    pub fn total_collectives(&self, op: Collective) -> usize {
        self.collectives.iter().filter(|((o, _), _)| *o == op).map(|(_, n)| n).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.kinds.is_empty() && self.collectives.is_empty()
    }

    /// Flat `key value` report, one line per counter, keys sorted.
    pub fn report(&self) -> String {
        let mut out = String::new();
        for (kind, t) in &self.kinds {
            let _ = writeln!(out, "messages.{kind} {}", t.messages);
            let _ = writeln!(out, "scalars.{kind} {}", t.scalars);
        }
        for ((op, kind), n) in &self.collectives {
            let _ = writeln!(out, "{}.{kind} {n}", op.as_str());
        }
        out
    }
}

impl fmt::Display for Ledger {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.report())
    }
}
