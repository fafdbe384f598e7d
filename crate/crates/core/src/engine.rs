//! Deterministic message-passing simulator.
//!
//! Parties are event-driven state machines. The engine starts them in index
//! order, then delivers messages from one global FIFO queue until it drains.
//! Because there is a single queue, per-channel FIFO order holds and a run is
//! a pure function of the protocol instance and the parties' tapes.
//!
//! Every transmission is appended to a [`Transcript`]. Views of parties,
//! coalitions and an eavesdropper are projections of the transcript plus the
//! private values each party recorded locally.

use std::collections::VecDeque;
use std::fmt;
use std::io::{BufRead, Write};
use std::path::Path;

use num_bigint::{BigInt, BigUint};
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use thiserror::Error;

use crate::error::{Error, Result};
use crate::ring::{RingElement, RingSpec};
use crate::tape::{RandomTape, SeededTapes, TapeFactory};
use crate::topology::{Capability, ChannelGraph, PartyId, Security};

/// Upper bound on messages per run unless overridden.
pub const DEFAULT_MESSAGE_LIMIT: usize = 5_000_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Recipient {
    Party(PartyId),
    Broadcast,
}

impl Recipient {
    pub fn includes(&self, p: PartyId) -> bool {
        match self {
            Recipient::Party(q) => *q == p,
            Recipient::Broadcast => true,
        }
    }
}

impl fmt::Display for Recipient {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Recipient::Party(p) => p.fmt(f),
            Recipient::Broadcast => f.write_str("all"),
        }
    }
}

/// What a message carries.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum Payload {
    Element(RingElement),
    Elements(Vec<RingElement>),
    Integer(u64),
    Integers(Vec<u64>),
    Token(String),
}

impl Payload {
    pub fn kind(&self) -> &'static str {
        match self {
            Payload::Element(_) => "element",
            Payload::Elements(_) => "elements",
            Payload::Integer(_) => "integer",
            Payload::Integers(_) => "integers",
            Payload::Token(_) => "token",
        }
    }

    fn mismatch(&self, want: &str) -> Error {
        Error::protocol(format!("expected {want} payload, got {}", self.kind()))
    }

    pub fn as_element(&self) -> Result<&RingElement> {
        match self {
            Payload::Element(e) => Ok(e),
            _ => Err(self.mismatch("element")),
        }
    }

    pub fn as_elements(&self) -> Result<&[RingElement]> {
        match self {
            Payload::Elements(e) => Ok(e),
            _ => Err(self.mismatch("elements")),
        }
    }

    pub fn as_integer(&self) -> Result<u64> {
        match self {
            Payload::Integer(v) => Ok(*v),
            _ => Err(self.mismatch("integer")),
        }
    }

    pub fn as_integers(&self) -> Result<&[u64]> {
        match self {
            Payload::Integers(v) => Ok(v),
            _ => Err(self.mismatch("integers")),
        }
    }

    pub fn as_token(&self) -> Result<&str> {
        match self {
            Payload::Token(t) => Ok(t),
            _ => Err(self.mismatch("token")),
        }
    }

    fn to_json(&self) -> Value {
        match self {
            Payload::Element(e) => Value::String(e.to_string()),
            Payload::Elements(es) => es.iter().map(|e| Value::String(e.to_string())).collect(),
            Payload::Integer(v) => json!(v),
            Payload::Integers(vs) => json!(vs),
            Payload::Token(t) => Value::String(t.clone()),
        }
    }

    fn from_json(kind: &str, v: &Value) -> std::result::Result<Payload, String> {
        let elem = |v: &Value| -> std::result::Result<RingElement, String> {
            let s = v.as_str().ok_or("element must be a decimal string")?;
            s.parse::<BigInt>()
                .map(RingElement)
                .map_err(|e| format!("bad element {s:?}: {e}"))
        };
        let int = |v: &Value| v.as_u64().ok_or_else(|| "integer payload must be a u64".to_string());
        let arr = |v: &Value| v.as_array().cloned().ok_or_else(|| "expected an array".to_string());
        match kind {
            "element" => elem(v).map(Payload::Element),
            "elements" => arr(v)?.iter().map(elem).collect::<std::result::Result<_, _>>().map(Payload::Elements),
            "integer" => int(v).map(Payload::Integer),
            "integers" => arr(v)?.iter().map(int).collect::<std::result::Result<_, _>>().map(Payload::Integers),
            "token" => v
                .as_str()
                .map(|s| Payload::Token(s.to_string()))
                .ok_or_else(|| "token must be a string".to_string()),
            other => Err(format!("unknown payload kind {other:?}")),
        }
    }
}

impl fmt::Display for Payload {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Payload::Element(e) => e.fmt(f),
            Payload::Elements(es) => {
                let parts: Vec<String> = es.iter().map(|e| e.to_string()).collect();
                write!(f, "[{}]", parts.join(", "))
            }
            Payload::Integer(v) => v.fmt(f),
            Payload::Integers(vs) => write!(f, "{vs:?}"),
            Payload::Token(t) => t.fmt(f),
        }
    }
}

impl From<RingElement> for Payload {
    fn from(e: RingElement) -> Self {
        Payload::Element(e)
    }
}

/// One transmission.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Message {
    pub seq: u64,
    pub from: PartyId,
    pub to: Recipient,
    pub security: Security,
    pub label: String,
    pub payload: Payload,
}

impl Message {
    pub fn element(&self) -> Result<&RingElement> {
        self.payload.as_element()
    }
}

/// A value a party generated or holds privately (inputs, noise, outputs).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Local {
    /// Number of messages in the transcript when the value was recorded.
    pub after: u64,
    pub label: String,
    pub value: Payload,
}

/// Run metadata, enough to replay a seeded run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunMeta {
    pub protocol: String,
    pub ring: RingSpec,
    pub seed: Option<u64>,
    pub topology: ChannelGraph,
    pub roster: Vec<Capability>,
    #[serde(default)]
    pub config: Value,
}

impl RunMeta {
    pub fn replayable(&self) -> bool {
        self.seed.is_some() && !self.config.is_null()
    }
}

/// Ordered log of every transmission of a run.
#[derive(Debug, Clone, PartialEq)]
pub struct Transcript {
    pub meta: RunMeta,
    pub messages: Vec<Message>,
    /// Private values per party. Kept in memory only, never serialized.
    pub locals: Vec<Vec<Local>>,
    /// Number of randomness draws per party.
    pub draws: Vec<u64>,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum TranscriptError {
    #[error("transcript is empty")]
    Empty,
    #[error("line {line}: {reason}")]
    Malformed { line: usize, reason: String },
    #[error("transcript truncated after {messages} messages (no end marker)")]
    Truncated { messages: usize },
    #[error("end marker declares {declared} messages but {found} were read")]
    CountMismatch { declared: usize, found: usize },
    #[error("i/o error: {0}")]
    Io(String),
}

#[derive(Serialize)]
struct MessageRecord<'a> {
    seq: u64,
    from: usize,
    to: Value,
    security: Security,
    label: &'a str,
    kind: &'a str,
    payload: Value,
}

#[derive(Deserialize)]
struct MessageRecordIn {
    seq: u64,
    from: usize,
    to: Value,
    security: Security,
    label: String,
    kind: String,
    payload: Value,
}

#[derive(Serialize, Deserialize)]
struct EndRecord {
    messages: usize,
    draws: Vec<u64>,
}

impl Transcript {
    pub fn k(&self) -> usize {
        self.meta.roster.len()
    }

    pub fn locals(&self, p: PartyId) -> &[Local] {
        self.locals.get(p.0).map(Vec::as_slice).unwrap_or(&[])
    }

    /// First local value of `p` with the given label.
    pub fn local(&self, p: PartyId, label: &str) -> Option<&Payload> {
        self.locals(p).iter().find(|l| l.label == label).map(|l| &l.value)
    }

    pub fn with_label<'a>(&'a self, label: &'a str) -> impl Iterator<Item = &'a Message> + 'a {
        self.messages.iter().filter(move |m| m.label == label)
    }

    pub fn total_draws(&self, capability: Capability) -> u64 {
        self.meta
            .roster
            .iter()
            .zip(&self.draws)
            .filter(|(c, _)| **c == capability)
            .map(|(_, d)| d)
            .sum()
    }

    /// Line-delimited JSON: a `meta` header, one line per message, an `end` trailer.
    pub fn to_jsonl(&self) -> String {
        let mut out = String::new();
        out.push_str(&serde_json::to_string(&json!({ "meta": self.meta })).expect("meta serializes"));
        out.push('\n');
        for m in &self.messages {
            let rec = MessageRecord {
                seq: m.seq,
                from: m.from.0,
                to: match m.to {
                    Recipient::Party(p) => json!(p.0),
                    Recipient::Broadcast => json!("broadcast"),
                },
                security: m.security,
                label: &m.label,
                kind: m.payload.kind(),
                payload: m.payload.to_json(),
            };
            out.push_str(&serde_json::to_string(&rec).expect("message serializes"));
            out.push('\n');
        }
        let end = EndRecord {
            messages: self.messages.len(),
            draws: self.draws.clone(),
        };
        out.push_str(&serde_json::to_string(&json!({ "end": end })).expect("end serializes"));
        out.push('\n');
        out
    }

    pub fn from_jsonl(text: &str) -> std::result::Result<Transcript, TranscriptError> {
        Self::read_lines(text.lines().map(|l| Ok(l.to_string())))
    }

    pub fn write_jsonl(&self, path: &Path) -> std::result::Result<(), TranscriptError> {
        let io = |e: std::io::Error| TranscriptError::Io(e.to_string());
        let mut f = std::io::BufWriter::new(std::fs::File::create(path).map_err(io)?);
        f.write_all(self.to_jsonl().as_bytes()).map_err(io)?;
        f.flush().map_err(io)
    }

    pub fn read_jsonl(path: &Path) -> std::result::Result<Transcript, TranscriptError> {
        let f = std::fs::File::open(path).map_err(|e| TranscriptError::Io(e.to_string()))?;
        Self::read_lines(std::io::BufReader::new(f).lines())
    }

    fn read_lines(
        lines: impl Iterator<Item = std::io::Result<String>>,
    ) -> std::result::Result<Transcript, TranscriptError> {
        let bad = |line: usize, reason: String| TranscriptError::Malformed { line, reason };
        let mut meta: Option<RunMeta> = None;
        let mut messages = Vec::new();
        let mut end: Option<EndRecord> = None;
        for (i, line) in lines.enumerate() {
            let n = i + 1;
            let line = line.map_err(|e| TranscriptError::Io(e.to_string()))?;
            if line.trim().is_empty() {
                continue;
            }
            if end.is_some() {
                return Err(bad(n, "content after end marker".into()));
            }
            let v: Value = match serde_json::from_str(&line) {
                Ok(v) => v,
                // a cut-off final line reads as a truncation, not a format error
                Err(e) if e.is_eof() && meta.is_some() => {
                    return Err(TranscriptError::Truncated {
                        messages: messages.len(),
                    })
                }
                Err(e) => return Err(bad(n, e.to_string())),
            };
            if meta.is_none() {
                let m = v.get("meta").ok_or_else(|| bad(n, "first line must be the meta header".into()))?;
                meta = Some(serde_json::from_value(m.clone()).map_err(|e| bad(n, e.to_string()))?);
                continue;
            }
            if let Some(e) = v.get("end") {
                end = Some(serde_json::from_value(e.clone()).map_err(|e| bad(n, e.to_string()))?);
                continue;
            }
            let rec: MessageRecordIn = serde_json::from_value(v).map_err(|e| bad(n, e.to_string()))?;
            if rec.seq != messages.len() as u64 {
                return Err(bad(n, format!("expected seq {}, found {}", messages.len(), rec.seq)));
            }
            let to = match &rec.to {
                Value::String(s) if s == "broadcast" => Recipient::Broadcast,
                v => Recipient::Party(PartyId(
                    v.as_u64().ok_or_else(|| bad(n, "bad recipient".into()))? as usize,
                )),
            };
            let payload = Payload::from_json(&rec.kind, &rec.payload).map_err(|r| bad(n, r))?;
            messages.push(Message {
                seq: rec.seq,
                from: PartyId(rec.from),
                to,
                security: rec.security,
                label: rec.label,
                payload,
            });
        }
        let meta = meta.ok_or(TranscriptError::Empty)?;
        let end = end.ok_or(TranscriptError::Truncated {
            messages: messages.len(),
        })?;
        if end.messages != messages.len() {
            return Err(TranscriptError::CountMismatch {
                declared: end.messages,
                found: messages.len(),
            });
        }
        let k = meta.roster.len();
        Ok(Transcript {
            meta,
            messages,
            locals: vec![Vec::new(); k],
            draws: end.draws,
        })
    }
}

pub type Tamper<'a> = Box<dyn FnMut(&Message) -> Option<Payload> + 'a>;

/// Where randomness comes from, plus optional fault injection.
pub struct RunEnv<'a> {
    tapes: Box<dyn TapeFactory + 'a>,
    tamper: Option<Tamper<'a>>,
    max_messages: usize,
}

impl<'a> RunEnv<'a> {
    pub fn seeded(seed: u64) -> Self {
        Self::with_tapes(SeededTapes(seed))
    }

    pub fn with_tapes(tapes: impl TapeFactory + 'a) -> Self {
        RunEnv {
            tapes: Box::new(tapes),
            tamper: None,
            max_messages: DEFAULT_MESSAGE_LIMIT,
        }
    }

    /// Installs a hook that may replace any payload as it is sent.
    pub fn tamper(mut self, f: impl FnMut(&Message) -> Option<Payload> + 'a) -> Self {
        self.tamper = Some(Box::new(f));
        self
    }

    pub fn max_messages(mut self, n: usize) -> Self {
        self.max_messages = n;
        self
    }
}

/// Outcome of a completed run together with its transcript.
#[derive(Debug, Clone)]
pub struct Run<T> {
    pub outcome: T,
    pub transcript: Transcript,
}

pub trait Party {
    fn start(&mut self, _ctx: &mut Ctx<'_>) -> Result<()> {
        Ok(())
    }

    fn on_message(&mut self, msg: &Message, ctx: &mut Ctx<'_>) -> Result<()>;
}

/// A configured protocol instance.
pub trait Protocol {
    type Party: Party;
    type Outcome;

    fn name(&self) -> &'static str;
    fn ring(&self) -> &RingSpec;
    fn graph(&self) -> &ChannelGraph;
    fn roster(&self) -> Vec<Capability>;
    fn check_topology(&self) -> Result<()>;
    fn parties(&self) -> Result<Vec<Self::Party>>;
    fn outcome(&self, parties: Vec<Self::Party>, transcript: &Transcript) -> Result<Self::Outcome>;

    /// Replayable configuration, or `Null` when the instance cannot be rebuilt from JSON.
    fn config(&self) -> Value {
        Value::Null
    }
}

type TamperFn<'a> = dyn FnMut(&Message) -> Option<Payload> + 'a;

/// A party's handle on the engine during one event.
pub struct Ctx<'a> {
    me: PartyId,
    capability: Capability,
    ring: &'a RingSpec,
    graph: &'a ChannelGraph,
    tape: Option<&'a mut dyn RandomTape>,
    messages: &'a mut Vec<Message>,
    queue: &'a mut VecDeque<(usize, PartyId)>,
    locals: &'a mut Vec<Local>,
    draws: &'a mut u64,
    tamper: Option<&'a mut TamperFn<'a>>,
    max_messages: usize,
}

impl Ctx<'_> {
    pub fn me(&self) -> PartyId {
        self.me
    }

    pub fn k(&self) -> usize {
        self.graph.k()
    }

    pub fn ring(&self) -> &RingSpec {
        self.ring
    }

    pub fn capability(&self) -> Capability {
        self.capability
    }

    fn push(&mut self, to: Recipient, security: Security, label: String, payload: Payload) -> Result<()> {
        if self.messages.len() >= self.max_messages {
            return Err(Error::MessageLimit(self.max_messages));
        }
        let seq = self.messages.len();
        let mut msg = Message {
            seq: seq as u64,
            from: self.me,
            to,
            security,
            label,
            payload,
        };
        if let Some(t) = self.tamper.as_deref_mut() {
            if let Some(p) = t(&msg) {
                msg.payload = p;
            }
        }
        self.messages.push(msg);
        match to {
            Recipient::Party(p) => self.queue.push_back((seq, p)),
            Recipient::Broadcast => {
                for i in (0..self.graph.k()).filter(|&i| i != self.me.0) {
                    self.queue.push_back((seq, PartyId(i)));
                }
            }
        }
        Ok(())
    }

    /// Sends over the channel to `to`, which must exist in the run's graph.
    pub fn send(&mut self, to: PartyId, label: impl Into<String>, payload: impl Into<Payload>) -> Result<()> {
        if to.0 >= self.graph.k() {
            return Err(Error::UnknownParty(to));
        }
        let security = self
            .graph
            .security(self.me.0, to.0)
            .ok_or(Error::NoChannel { from: self.me, to })?;
        self.push(Recipient::Party(to), security, label.into(), payload.into())
    }

    /// Publishes to every other party and to any eavesdropper.
    pub fn broadcast(&mut self, label: impl Into<String>, payload: impl Into<Payload>) -> Result<()> {
        self.push(Recipient::Broadcast, Security::Insecure, label.into(), payload.into())
    }

    /// Notes a private value (input, noise, output) in this party's view.
    pub fn record(&mut self, label: impl Into<String>, value: impl Into<Payload>) {
        self.locals.push(Local {
            after: self.messages.len() as u64,
            label: label.into(),
            value: value.into(),
        });
    }

    fn tape(&mut self) -> Result<&mut dyn RandomTape> {
        match self.tape.as_deref_mut() {
            Some(t) => Ok(t),
            None => Err(Error::DummyRandomness { party: self.me }),
        }
    }

    pub fn draw_below(&mut self, bound: &BigUint) -> Result<BigUint> {
        let v = self.tape()?.draw_below(bound)?;
        *self.draws += 1;
        Ok(v)
    }

    /// Uniform in `0..bound`.
    pub fn draw_index(&mut self, bound: u64) -> Result<u64> {
        let v = self.tape()?.draw_index(bound)?;
        *self.draws += 1;
        Ok(v)
    }

    /// Uniform in `lo..=hi`.
    pub fn draw_range(&mut self, lo: u64, hi: u64) -> Result<u64> {
        Ok(lo + self.draw_index(hi - lo + 1)?)
    }

    /// Noise from the run's ring.
    pub fn sample_noise(&mut self, require_unit: bool) -> Result<RingElement> {
        let ring = self.ring;
        self.sample_in(ring, require_unit)
    }

    /// Noise from another ring (e.g. a per-bit subprotocol).
    pub fn sample_in(&mut self, ring: &RingSpec, require_unit: bool) -> Result<RingElement> {
        let v = ring.sample_noise(self.tape()?, require_unit)?;
        *self.draws += 1;
        Ok(v)
    }
}

/// Runs `protocol` to completion.
pub fn run<P: Protocol>(protocol: &P, env: RunEnv<'_>) -> Result<Run<P::Outcome>> {
    protocol.check_topology()?;
    let graph = protocol.graph();
    let ring = protocol.ring();
    let roster = protocol.roster();
    let k = graph.k();
    if roster.len() != k {
        return Err(Error::protocol(format!(
            "roster has {} parties but the graph has {k}",
            roster.len()
        )));
    }
    if !roster.contains(&Capability::Full) {
        return Err(Error::input("at least one party must be able to draw randomness"));
    }
    let mut parties = protocol.parties()?;
    if parties.len() != k {
        return Err(Error::protocol(format!("{} party machines for {k} parties", parties.len())));
    }

    let RunEnv {
        mut tapes,
        mut tamper,
        max_messages,
    } = env;
    let mut party_tapes: Vec<Option<Box<dyn RandomTape>>> = roster
        .iter()
        .enumerate()
        .map(|(i, c)| match c {
            Capability::Full => Some(tapes.tape(PartyId(i))),
            Capability::Dummy => None,
        })
        .collect();

    let mut transcript = Transcript {
        meta: RunMeta {
            protocol: protocol.name().to_string(),
            ring: ring.clone(),
            seed: tapes.seed(),
            topology: graph.clone(),
            roster: roster.clone(),
            config: protocol.config(),
        },
        messages: Vec::new(),
        locals: vec![Vec::new(); k],
        draws: vec![0; k],
    };
    let mut queue: VecDeque<(usize, PartyId)> = VecDeque::new();

    macro_rules! ctx {
        ($i:expr) => {
            Ctx {
                me: PartyId($i),
                capability: roster[$i],
                ring,
                graph,
                tape: party_tapes[$i].as_deref_mut().map(|t| t as &mut dyn RandomTape),
                messages: &mut transcript.messages,
                queue: &mut queue,
                locals: &mut transcript.locals[$i],
                draws: &mut transcript.draws[$i],
                tamper: tamper.as_deref_mut().map(|t| t as &mut dyn FnMut(&Message) -> Option<Payload>),
                max_messages,
            }
        };
    }

    for i in 0..k {
        let mut ctx = ctx!(i);
        parties[i].start(&mut ctx)?;
    }
    while let Some((idx, to)) = queue.pop_front() {
        let msg = transcript.messages[idx].clone();
        let mut ctx = ctx!(to.0);
        parties[to.0].on_message(&msg, &mut ctx)?;
    }

    let outcome = protocol.outcome(parties, &transcript)?;
    Ok(Run { outcome, transcript })
}

/// Who is looking.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Observer {
    Party(PartyId),
    Coalition(Vec<PartyId>),
    Eavesdropper,
}

impl fmt::Display for Observer {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Observer::Party(p) => p.fmt(f),
            Observer::Coalition(ps) => {
                let names: Vec<String> = ps.iter().map(|p| p.to_string()).collect();
                write!(f, "{{{}}}", names.join(","))
            }
            Observer::Eavesdropper => f.write_str("eavesdropper"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum EntryKind {
    Local,
    Sent,
    Received,
    Broadcast,
    Overheard,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct ViewEntry {
    /// Transcript position; `None` for local values.
    pub seq: Option<u64>,
    pub kind: EntryKind,
    pub from: PartyId,
    pub to: Recipient,
    pub label: String,
    pub value: Payload,
}

/// Everything an observer sent, received, generated or overheard, in order.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct View {
    pub observer: Observer,
    pub entries: Vec<ViewEntry>,
}

/// A view entry stripped of its global sequence number, which no party observes.
pub type ObservedEntry = (EntryKind, PartyId, Recipient, String, Payload);

impl View {
    pub fn get(&self, label: &str) -> Option<&Payload> {
        self.entries.iter().find(|e| e.label == label).map(|e| &e.value)
    }

    pub fn all<'a>(&'a self, label: &'a str) -> impl Iterator<Item = &'a ViewEntry> + 'a {
        self.entries.iter().filter(move |e| e.label == label)
    }

    pub fn of_kind(&self, kind: EntryKind) -> impl Iterator<Item = &ViewEntry> + '_ {
        self.entries.iter().filter(move |e| e.kind == kind)
    }

    pub fn observed(&self) -> Vec<ObservedEntry> {
        self.entries
            .iter()
            .map(|e| (e.kind, e.from, e.to, e.label.clone(), e.value.clone()))
            .collect()
    }

    /// The values held under each label, ignoring direction and order.
    pub fn inventory(&self) -> Vec<(String, Payload)> {
        let mut inv: Vec<(String, Payload)> = self
            .entries
            .iter()
            .map(|e| (e.label.clone(), e.value.clone()))
            .collect();
        inv.sort_by(|a, b| a.0.cmp(&b.0));
        inv
    }
}

fn party_entries(t: &Transcript, p: PartyId) -> Vec<ViewEntry> {
    let locals = t.locals(p);
    let mut li = 0;
    let mut out = Vec::new();
    let flush = |out: &mut Vec<ViewEntry>, upto: u64, li: &mut usize| {
        while *li < locals.len() && locals[*li].after <= upto {
            let l = &locals[*li];
            out.push(ViewEntry {
                seq: None,
                kind: EntryKind::Local,
                from: p,
                to: Recipient::Party(p),
                label: l.label.clone(),
                value: l.value.clone(),
            });
            *li += 1;
        }
    };
    for m in &t.messages {
        flush(&mut out, m.seq, &mut li);
        let kind = match m.to {
            Recipient::Broadcast => Some(EntryKind::Broadcast),
            Recipient::Party(q) if m.from == p => (q != p).then_some(EntryKind::Sent),
            Recipient::Party(q) if q == p => Some(EntryKind::Received),
            _ => None,
        };
        if let Some(kind) = kind {
            out.push(ViewEntry {
                seq: Some(m.seq),
                kind,
                from: m.from,
                to: m.to,
                label: m.label.clone(),
                value: m.payload.clone(),
            });
        }
    }
    flush(&mut out, u64::MAX, &mut li);
    out
}

/// The view of party `p`: its locals, the messages it sent or received, and all broadcasts.
pub fn extract_view(t: &Transcript, p: PartyId) -> Result<View> {
    if p.0 >= t.k() {
        return Err(Error::UnknownParty(p));
    }
    Ok(View {
        observer: Observer::Party(p),
        entries: party_entries(t, p),
    })
}

/// Joint view of a coalition: the members' views concatenated in member order.
pub fn coalition_view(t: &Transcript, members: &[PartyId]) -> Result<View> {
    let mut entries = Vec::new();
    for &p in members {
        entries.extend(extract_view(t, p)?.entries);
    }
    Ok(View {
        observer: Observer::Coalition(members.to_vec()),
        entries,
    })
}

/// Messages on insecure channels and broadcasts.
pub fn eavesdropper_view(t: &Transcript) -> View {
    let entries = t
        .messages
        .iter()
        .filter(|m| m.security == Security::Insecure)
        .map(|m| ViewEntry {
            seq: Some(m.seq),
            kind: match m.to {
                Recipient::Broadcast => EntryKind::Broadcast,
                Recipient::Party(_) => EntryKind::Overheard,
            },
            from: m.from,
            to: m.to,
            label: m.label.clone(),
            value: m.payload.clone(),
        })
        .collect();
    View {
        observer: Observer::Eavesdropper,
        entries,
    }
}

pub fn view_of(t: &Transcript, observer: &Observer) -> Result<View> {
    match observer {
        Observer::Party(p) => extract_view(t, *p),
        Observer::Coalition(ps) => coalition_view(t, ps),
        Observer::Eavesdropper => Ok(eavesdropper_view(t)),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tape::ScriptedTapes;

    /// Each party sends a noisy token to its successor, which broadcasts what it got.
    struct Relay {
        graph: ChannelGraph,
        ring: RingSpec,
        roster: Vec<Capability>,
    }

    struct RelayParty {
        got: Option<RingElement>,
    }

    impl Party for RelayParty {
        fn start(&mut self, ctx: &mut Ctx<'_>) -> Result<()> {
            let n = ctx.sample_noise(false)?;
            ctx.record("noise", n.clone());
            let next = PartyId((ctx.me().0 + 1) % ctx.k());
            ctx.send(next, "hop", n)
        }

        fn on_message(&mut self, msg: &Message, ctx: &mut Ctx<'_>) -> Result<()> {
            if msg.label == "hop" {
                self.got = Some(msg.element()?.clone());
                ctx.broadcast("echo", msg.payload.clone())?;
            }
            Ok(())
        }
    }

    impl Protocol for Relay {
        type Party = RelayParty;
        type Outcome = Vec<RingElement>;

        fn name(&self) -> &'static str {
            "relay"
        }
        fn ring(&self) -> &RingSpec {
            &self.ring
        }
        fn graph(&self) -> &ChannelGraph {
            &self.graph
        }
        fn roster(&self) -> Vec<Capability> {
            self.roster.clone()
        }
        fn check_topology(&self) -> Result<()> {
            self.graph.validate_topology().map_err(|r| Error::Topology(r.into()))
        }
        fn parties(&self) -> Result<Vec<RelayParty>> {
            Ok((0..self.graph.k()).map(|_| RelayParty { got: None }).collect())
        }
        fn outcome(&self, parties: Vec<RelayParty>, _: &Transcript) -> Result<Vec<RingElement>> {
            Ok(parties.into_iter().map(|p| p.got.unwrap()).collect())
        }
    }

    fn relay(k: usize, roster: Vec<Capability>) -> Relay {
        Relay {
            graph: ChannelGraph::cycle(k).unwrap(),
            ring: RingSpec::modular(101).unwrap(),
            roster,
        }
    }

    #[test]
    fn runs_are_deterministic_per_seed() {
        let p = relay(4, vec![Capability::Full; 4]);
        let a = run(&p, RunEnv::seeded(7)).unwrap();
        let b = run(&p, RunEnv::seeded(7)).unwrap();
        let c = run(&p, RunEnv::seeded(8)).unwrap();
        assert_eq!(a.transcript.to_jsonl(), b.transcript.to_jsonl());
        assert_ne!(a.transcript.to_jsonl(), c.transcript.to_jsonl());
        assert_eq!(a.transcript.messages.len(), 8);
        assert_eq!(a.transcript.draws, vec![1; 4]);
    }

    #[test]
    fn dummy_draw_is_a_hard_fault() {
        let p = relay(3, vec![Capability::Full, Capability::Dummy, Capability::Full]);
        assert_eq!(
            run(&p, RunEnv::seeded(1)).unwrap_err(),
            Error::DummyRandomness { party: PartyId(1) }
        );
    }

    #[test]
    fn scripted_tapes_fix_the_noise() {
        let p = relay(3, vec![Capability::Full; 3]);
        let tapes = ScriptedTapes::new().with_u64(0, [5]).with_u64(1, [6]).with_u64(2, [7]);
        let r = run(&p, RunEnv::with_tapes(tapes)).unwrap();
        let got: Vec<String> = r.outcome.iter().map(|e| e.to_string()).collect();
        assert_eq!(got, ["7", "5", "6"]);
    }

    #[test]
    fn jsonl_round_trip_and_failure_modes() {
        let p = relay(3, vec![Capability::Full; 3]);
        let t = run(&p, RunEnv::seeded(3)).unwrap().transcript;
        let text = t.to_jsonl();
        let back = Transcript::from_jsonl(&text).unwrap();
        assert_eq!(back.messages, t.messages);
        assert_eq!(back.meta, t.meta);
        assert_eq!(back.draws, t.draws);

        let lines: Vec<&str> = text.lines().collect();
        let cut = lines[..lines.len() - 1].join("\n");
        assert!(matches!(Transcript::from_jsonl(&cut), Err(TranscriptError::Truncated { .. })));
        let half = &text[..text.len() / 2];
        assert!(matches!(Transcript::from_jsonl(half), Err(TranscriptError::Truncated { .. })));
        assert!(matches!(Transcript::from_jsonl("not json"), Err(TranscriptError::Malformed { .. })));
        assert_eq!(Transcript::from_jsonl(""), Err(TranscriptError::Empty));
    }

    #[test]
    fn tamper_hook_replaces_payloads() {
        let p = relay(3, vec![Capability::Full; 3]);
        let env = RunEnv::seeded(3).tamper(|m| (m.seq == 0).then(|| Payload::Element(RingElement::from(42))));
        let r = run(&p, env).unwrap();
        assert_eq!(r.outcome[1], RingElement::from(42));
    }

    #[test]
    fn views_partition_the_transcript() {
        let p = relay(3, vec![Capability::Full; 3]);
        let t = run(&p, RunEnv::seeded(11)).unwrap().transcript;
        let v1 = extract_view(&t, PartyId(1)).unwrap();
        // own noise, sent hop, received hop, three echoes (one its own)
        assert_eq!(v1.of_kind(EntryKind::Local).count(), 1);
        assert_eq!(v1.of_kind(EntryKind::Sent).count(), 1);
        assert_eq!(v1.of_kind(EntryKind::Received).count(), 1);
        assert_eq!(v1.of_kind(EntryKind::Broadcast).count(), 3);
        let eve = eavesdropper_view(&t);
        assert_eq!(eve.entries.len(), 3);
        let mut covered = vec![false; t.messages.len()];
        for i in 0..3 {
            for e in extract_view(&t, PartyId(i)).unwrap().entries {
                if let Some(s) = e.seq {
                    covered[s as usize] = true;
                }
            }
        }
        assert!(covered.iter().all(|&c| c));
        assert_eq!(extract_view(&t, PartyId(3)).unwrap_err(), Error::UnknownParty(PartyId(3)));
    }

    #[test]
    fn sends_off_the_graph_are_rejected() {
        struct Stray;
        impl Party for Stray {
            fn start(&mut self, ctx: &mut Ctx<'_>) -> Result<()> {
                if ctx.me().0 == 0 {
                    ctx.send(PartyId(2), "x", Payload::Integer(1))?;
                }
                Ok(())
            }
            fn on_message(&mut self, _: &Message, _: &mut Ctx<'_>) -> Result<()> {
                Ok(())
            }
        }
        struct P(ChannelGraph, RingSpec);
        impl Protocol for P {
            type Party = Stray;
            type Outcome = ();
            fn name(&self) -> &'static str {
                "stray"
            }
            fn ring(&self) -> &RingSpec {
                &self.1
            }
            fn graph(&self) -> &ChannelGraph {
                &self.0
            }
            fn roster(&self) -> Vec<Capability> {
                vec![Capability::Full; 4]
            }
            fn check_topology(&self) -> Result<()> {
                Ok(())
            }
            fn parties(&self) -> Result<Vec<Stray>> {
                Ok((0..4).map(|_| Stray).collect())
            }
            fn outcome(&self, _: Vec<Stray>, _: &Transcript) -> Result<()> {
                Ok(())
            }
        }
        let p = P(ChannelGraph::cycle(4).unwrap(), RingSpec::modular(5).unwrap());
        assert_eq!(
            run(&p, RunEnv::seeded(0)).unwrap_err(),
            Error::NoChannel { from: PartyId(0), to: PartyId(2) }
        );
    }
}
