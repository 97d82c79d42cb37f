//! Authenticated classical channel between the three parties and the
//! signature flow that runs over it.
//!
//! Delivery is reliable and FIFO per ordered pair of parties. Every message
//! gets a global sequence number and is logged, so a run can be re-executed
//! from its log alone.

use std::collections::{BTreeMap, BTreeSet, VecDeque};

use serde::{Deserialize, Serialize};

use crate::counts::{Basis, Link};
use crate::error::{Error, Result};
use crate::mathkit::Probability;
use crate::netsim::schedule::Party;
use crate::qds::{verify, AliceKeys, Decision, Declaration, Exchange, Recipient, Symmetrisation};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Payload {
    /// Basis choices for a run of slots, announced for sifting.
    Bases {
        link: Link,
        first_slot: u64,
        bases: Vec<Basis>,
    },
    /// One masked bit of the symmetrisation step.
    Exchange(Exchange),
    /// Alice's declaration to her direct recipient.
    Declaration {
        id: u64,
        declaration: Declaration,
    },
    /// A recipient passing an accepted declaration on to its peer.
    Forward {
        id: u64,
        declaration: Declaration,
    },
    Text(String),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Message {
    pub seq: u64,
    pub from: Party,
    pub to: Party,
    pub payload: Payload,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClassicalChannel {
    parties: BTreeSet<Party>,
    #[serde(skip)]
    queues: BTreeMap<(Party, Party), VecDeque<Message>>,
    log: Vec<Message>,
}

impl ClassicalChannel {
    pub fn new() -> Self {
        Self::default()
    }

    /// A channel with Alice, Bob and Charlie registered.
    pub fn three_party() -> Self {
        let mut c = Self::new();
        for p in [Party::Alice, Party::Bob, Party::Charlie] {
            c.register(p);
        }
        c
    }

    pub fn register(&mut self, party: Party) {
        self.parties.insert(party);
    }

    fn known(&self, party: Party) -> Result<()> {
        if self.parties.contains(&party) {
            Ok(())
        } else {
            Err(Error::UnknownParty(format!("{party:?}")))
        }
    }

    /// Queues `payload` for `to` and returns its sequence number.
    pub fn send(&mut self, from: Party, to: Party, payload: Payload) -> Result<u64> {
        self.known(from)?;
        self.known(to)?;
        let msg = Message {
            seq: self.log.len() as u64,
            from,
            to,
            payload,
        };
        self.log.push(msg.clone());
        self.queues.entry((from, to)).or_default().push_back(msg);
        Ok(self.log.len() as u64 - 1)
    }

    /// Next message from `from` to `to`, if any.
    pub fn receive(&mut self, to: Party, from: Party) -> Result<Option<Message>> {
        self.known(from)?;
        self.known(to)?;
        Ok(self.queues.get_mut(&(from, to)).and_then(|q| q.pop_front()))
    }

    /// Oldest undelivered message across all queues.
    pub fn next_pending(&mut self) -> Option<Message> {
        let key = self
            .queues
            .iter()
            .filter_map(|(k, q)| q.front().map(|m| (m.seq, *k)))
            .min()?
            .1;
        self.queues.get_mut(&key).and_then(|q| q.pop_front())
    }

    pub fn pending(&self) -> usize {
        self.queues.values().map(|q| q.len()).sum()
    }

    pub fn log(&self) -> &[Message] {
        &self.log
    }
}

/// Outcome of one declaration at one recipient.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Received {
    pub id: u64,
    pub seq: u64,
    pub forwarded: bool,
    pub decision: Decision,
}

/// A signature recipient's state machine.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RecipientState {
    pub who: Recipient,
    pub key: crate::qds::SymmetrisedKey,
    pub s_auth: Probability,
    pub s_ver: Probability,
    pub l: usize,
    pub exchanges_seen: u64,
    pub log: Vec<Received>,
}

pub fn party_of(r: Recipient) -> Party {
    match r {
        Recipient::Bob => Party::Bob,
        Recipient::Charlie => Party::Charlie,
    }
}

impl RecipientState {
    /// Handles one delivered message and returns the message to send in
    /// response, if any.
    pub fn handle(&mut self, msg: &Message) -> Option<(Party, Payload)> {
        match &msg.payload {
            Payload::Declaration { id, declaration } => {
                let decision = verify(&self.key, declaration, self.s_auth, self.l);
                let accepted = decision.accepted();
                self.log.push(Received {
                    id: *id,
                    seq: msg.seq,
                    forwarded: false,
                    decision,
                });
                accepted.then(|| {
                    (
                        party_of(self.who.peer()),
                        Payload::Forward {
                            id: *id,
                            declaration: declaration.clone(),
                        },
                    )
                })
            }
            Payload::Forward { id, declaration } => {
                let decision = verify(&self.key, declaration, self.s_ver, self.l);
                self.log.push(Received {
                    id: *id,
                    seq: msg.seq,
                    forwarded: true,
                    decision,
                });
                None
            }
            Payload::Exchange(_) => {
                self.exchanges_seen += 1;
                None
            }
            Payload::Bases { .. } | Payload::Text(_) => None,
        }
    }
}

/// Both recipients after a signature session.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionStates {
    pub bob: RecipientState,
    pub charlie: RecipientState,
}

impl SessionStates {
    pub fn new(sym: &Symmetrisation, s_auth: Probability, s_ver: Probability, l: usize) -> Self {
        let state = |who: Recipient| RecipientState {
            who,
            key: sym.key(who).clone(),
            s_auth,
            s_ver,
            l,
            exchanges_seen: 0,
            log: Vec::new(),
        };
        SessionStates {
            bob: state(Recipient::Bob),
            charlie: state(Recipient::Charlie),
        }
    }

    fn get_mut(&mut self, party: Party) -> Option<&mut RecipientState> {
        match party {
            Party::Bob => Some(&mut self.bob),
            Party::Charlie => Some(&mut self.charlie),
            Party::Alice => None,
        }
    }

    /// Re-executes a message log against these states. Responses are not
    /// re-sent: they are already in the log.
    pub fn replay(&mut self, log: &[Message]) {
        for msg in log {
            if let Some(s) = self.get_mut(msg.to) {
                s.handle(msg);
            }
        }
    }
}

/// Delivers every queued message, in sequence order, until the channel is
/// quiet.
fn pump(bus: &mut ClassicalChannel, states: &mut SessionStates) -> Result<()> {
    while let Some(msg) = bus.next_pending() {
        if let Some(reply) = states.get_mut(msg.to).and_then(|s| s.handle(&msg)) {
            bus.send(msg.to, reply.0, reply.1)?;
        }
    }
    Ok(())
}

/// Runs symmetrisation and one declaration per message bit over `bus`:
/// the recipients exchange their masked bits, then Alice sends each
/// declaration to `direct`, who forwards it on acceptance.
#[allow(clippy::too_many_arguments)]
pub fn signature_session(
    bus: &mut ClassicalChannel,
    sym: &Symmetrisation,
    alice: &AliceKeys,
    messages: &[bool],
    direct: Recipient,
    s_auth: Probability,
    s_ver: Probability,
    l: usize,
) -> Result<SessionStates> {
    let mut states = SessionStates::new(sym, s_auth, s_ver, l);
    for ex in &sym.transcript {
        let from = party_of(ex.from);
        bus.send(from, party_of(ex.from.peer()), Payload::Exchange(*ex))?;
    }
    pump(bus, &mut states)?;
    for (id, &m) in messages.iter().enumerate() {
        let declaration = alice.sign(m, l)?;
        bus.send(
            Party::Alice,
            party_of(direct),
            Payload::Declaration {
                id: id as u64,
                declaration,
            },
        )?;
        pump(bus, &mut states)?;
    }
    Ok(states)
}
