//! Poll lifecycle: create, register voters or open to all, open, vote,
//! close and publish the winner.
//!
//! ```text
//! Created --openPoll--> Open --closePoll / last registered vote--> Closed
//! ```
//!
//! Like the identity registry, mutating operations first validate and
//! return [`PollEvent`]s; [`PollEngine::apply`] performs the change. The
//! winner is the option with the most votes, the lowest index on ties.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::codec::{CodecError, Decoder, Encoder};
use crate::identity::PermanentId;
use crate::ledger::TxKind;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum PollError {
    #[error("poll not found")]
    NotFound,
    #[error("creator is not a verified identity")]
    UnverifiedCreator,
    #[error("a poll needs at least two distinct, non-empty options")]
    BadOptions,
    #[error("only the poll creator may do this")]
    NotCreator,
    #[error("operation not allowed in the poll's current state")]
    WrongState,
    #[error("voter {0} is not a verified identity")]
    UnknownVoter(PermanentId),
    #[error("poll has no registered voters and is not open to all")]
    NoVoters,
    #[error("poll is not open")]
    PollNotOpen,
    #[error("voter is not eligible for this poll")]
    NotRegistered,
    #[error("voter has already voted")]
    AlreadyVoted,
    #[error("choice index out of range")]
    BadChoice,
}

impl PollError {
    pub fn code(&self) -> &'static str {
        match self {
            PollError::NotFound => "NotFound",
            PollError::UnverifiedCreator => "UnverifiedCreator",
            PollError::BadOptions => "BadOptions",
            PollError::NotCreator => "NotCreator",
            PollError::WrongState => "WrongState",
            PollError::UnknownVoter(_) => "UnknownVoter",
            PollError::NoVoters => "NoVoters",
            PollError::PollNotOpen => "PollNotOpen",
            PollError::NotRegistered => "NotRegistered",
            PollError::AlreadyVoted => "AlreadyVoted",
            PollError::BadChoice => "BadChoice",
        }
    }
}

/// Serialized as a decimal string.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(into = "String", try_from = "String")]
pub struct PollId(pub u64);

impl From<PollId> for String {
    fn from(id: PollId) -> String {
        id.0.to_string()
    }
}

impl TryFrom<String> for PollId {
    type Error = String;
    fn try_from(s: String) -> Result<Self, Self::Error> {
        s.parse()
    }
}

impl fmt::Display for PollId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

impl FromStr for PollId {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        if s.is_empty() || !s.bytes().all(|b| b.is_ascii_digit()) {
            return Err(format!("bad poll id {s:?}"));
        }
        s.parse().map(PollId).map_err(|e| format!("bad poll id {s:?}: {e}"))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum PollStatus {
    Created,
    Open,
    Closed,
}

impl PollStatus {
    fn tag(self) -> u8 {
        match self {
            PollStatus::Created => 0,
            PollStatus::Open => 1,
            PollStatus::Closed => 2,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Poll {
    pub id: PollId,
    pub name: String,
    pub description: String,
    pub options: Vec<String>,
    pub creator: PermanentId,
    pub registered_voters: BTreeSet<PermanentId>,
    pub open_to_all: bool,
    pub status: PollStatus,
    pub votes: BTreeMap<PermanentId, usize>,
    pub result: Option<usize>,
}

impl Poll {
    pub fn counts(&self) -> Vec<u64> {
        let mut counts = vec![0u64; self.options.len()];
        for &choice in self.votes.values() {
            counts[choice] += 1;
        }
        counts
    }

    pub fn is_eligible(&self, voter: &PermanentId) -> bool {
        self.open_to_all || self.registered_voters.contains(voter)
    }

    fn encode(&self) -> Vec<u8> {
        let mut enc = Encoder::new();
        enc.u64("id", self.id.0)
            .str("name", &self.name)
            .str("description", &self.description)
            .list("options", self.options.iter().map(String::as_bytes))
            .str("creator", self.creator.as_str())
            .list("voters", self.registered_voters.iter().map(|v| v.as_str().as_bytes()))
            .bool("openToAll", self.open_to_all)
            .u8("status", self.status.tag())
            .list(
                "votes",
                self.votes.iter().map(|(voter, choice)| {
                    let mut e = Encoder::new();
                    e.str("voter", voter.as_str()).u64("choice", *choice as u64);
                    e.finish()
                }),
            )
            .optional("result", self.result.map(|r| (r as u64).to_be_bytes()).as_ref().map(|b| &b[..]));
        enc.finish()
    }
}

/// Winning option: most votes, lowest index among equals. With no votes
/// every count is zero and option 0 wins.
pub fn tally<I: IntoIterator<Item = usize>>(choices: I, option_count: usize) -> usize {
    let mut counts = vec![0u64; option_count];
    for c in choices {
        counts[c] += 1;
    }
    let mut best = 0;
    for (i, &n) in counts.iter().enumerate() {
        if n > counts[best] {
            best = i;
        }
    }
    best
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum PollEvent {
    CreatePoll {
        poll_id: PollId,
        creator: PermanentId,
        name: String,
        description: String,
        options: Vec<String>,
    },
    RegisterVoters {
        poll_id: PollId,
        voters: Vec<PermanentId>,
    },
    SetOpen {
        poll_id: PollId,
    },
    OpenPoll {
        poll_id: PollId,
    },
    CastVote {
        poll_id: PollId,
        voter: PermanentId,
        choice: usize,
    },
    ClosePoll {
        poll_id: PollId,
    },
    PublishResult {
        poll_id: PollId,
        winner: usize,
    },
}

impl PollEvent {
    pub fn kind(&self) -> TxKind {
        match self {
            PollEvent::CreatePoll { .. } => TxKind::CreatePoll,
            PollEvent::RegisterVoters { .. } => TxKind::RegisterVoters,
            PollEvent::SetOpen { .. } => TxKind::SetOpen,
            PollEvent::OpenPoll { .. } => TxKind::OpenPoll,
            PollEvent::CastVote { .. } => TxKind::CastVote,
            PollEvent::ClosePoll { .. } => TxKind::ClosePoll,
            PollEvent::PublishResult { .. } => TxKind::PublishResult,
        }
    }

    pub fn poll_id(&self) -> PollId {
        match self {
            PollEvent::CreatePoll { poll_id, .. }
            | PollEvent::RegisterVoters { poll_id, .. }
            | PollEvent::SetOpen { poll_id }
            | PollEvent::OpenPoll { poll_id }
            | PollEvent::CastVote { poll_id, .. }
            | PollEvent::ClosePoll { poll_id }
            | PollEvent::PublishResult { poll_id, .. } => *poll_id,
        }
    }

    pub fn encode(&self) -> Vec<u8> {
        let mut enc = Encoder::new();
        enc.u64("poll", self.poll_id().0);
        match self {
            PollEvent::CreatePoll {
                creator,
                name,
                description,
                options,
                ..
            } => {
                enc.str("creator", creator.as_str())
                    .str("name", name)
                    .str("description", description)
                    .list("options", options.iter().map(String::as_bytes));
            }
            PollEvent::RegisterVoters { voters, .. } => {
                enc.list("voters", voters.iter().map(|v| v.as_str().as_bytes()));
            }
            PollEvent::SetOpen { .. } | PollEvent::OpenPoll { .. } | PollEvent::ClosePoll { .. } => {}
            PollEvent::CastVote { voter, choice, .. } => {
                enc.str("voter", voter.as_str()).u64("choice", *choice as u64);
            }
            PollEvent::PublishResult { winner, .. } => {
                enc.u64("winner", *winner as u64);
            }
        }
        enc.finish()
    }

    pub fn decode(kind: TxKind, payload: &[u8]) -> Result<Self, CodecError> {
        let mut dec = Decoder::new(payload);
        let poll_id = PollId(dec.u64("poll")?);
        let id = |s: &str| s.parse::<PermanentId>().map_err(|_| CodecError::BadValue("permanent id"));
        let text = |b: &[u8]| {
            std::str::from_utf8(b)
                .map(str::to_string)
                .map_err(|_| CodecError::BadValue("utf-8"))
        };
        let index = |v: u64| usize::try_from(v).map_err(|_| CodecError::BadValue("index"));
        let event = match kind {
            TxKind::CreatePoll => PollEvent::CreatePoll {
                poll_id,
                creator: id(dec.str("creator")?)?,
                name: dec.str("name")?.to_string(),
                description: dec.str("description")?.to_string(),
                options: dec
                    .list("options")?
                    .into_iter()
                    .map(text)
                    .collect::<Result<_, _>>()?,
            },
            TxKind::RegisterVoters => PollEvent::RegisterVoters {
                poll_id,
                voters: dec
                    .list("voters")?
                    .into_iter()
                    .map(|b| text(b).and_then(|s| id(&s)))
                    .collect::<Result<_, _>>()?,
            },
            TxKind::SetOpen => PollEvent::SetOpen { poll_id },
            TxKind::OpenPoll => PollEvent::OpenPoll { poll_id },
            TxKind::CastVote => PollEvent::CastVote {
                poll_id,
                voter: id(dec.str("voter")?)?,
                choice: index(dec.u64("choice")?)?,
            },
            TxKind::ClosePoll => PollEvent::ClosePoll { poll_id },
            TxKind::PublishResult => PollEvent::PublishResult {
                poll_id,
                winner: index(dec.u64("winner")?)?,
            },
            _ => return Err(CodecError::BadValue("kind")),
        };
        dec.finish()?;
        Ok(event)
    }
}

#[derive(Debug, Default, Clone)]
pub struct PollEngine {
    polls: BTreeMap<PollId, Poll>,
}

impl PollEngine {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn get(&self, id: PollId) -> Result<&Poll, PollError> {
        self.polls.get(&id).ok_or(PollError::NotFound)
    }

    pub fn polls(&self) -> impl Iterator<Item = &Poll> {
        self.polls.values()
    }

    pub fn len(&self) -> usize {
        self.polls.len()
    }

    pub fn is_empty(&self) -> bool {
        self.polls.is_empty()
    }

    fn owned(&self, id: PollId, caller: &PermanentId) -> Result<&Poll, PollError> {
        let poll = self.get(id)?;
        if &poll.creator != caller {
            return Err(PollError::NotCreator);
        }
        Ok(poll)
    }

    fn owned_in(&self, id: PollId, caller: &PermanentId, state: PollStatus) -> Result<&Poll, PollError> {
        let poll = self.owned(id, caller)?;
        if poll.status != state {
            return Err(PollError::WrongState);
        }
        Ok(poll)
    }

    pub fn create_poll(
        &self,
        creator: &PermanentId,
        creator_verified: bool,
        name: &str,
        description: &str,
        options: &[String],
    ) -> Result<PollEvent, PollError> {
        if !creator_verified {
            return Err(PollError::UnverifiedCreator);
        }
        let distinct: BTreeSet<&String> = options.iter().collect();
        if options.len() < 2 || distinct.len() != options.len() || options.iter().any(String::is_empty) {
            return Err(PollError::BadOptions);
        }
        Ok(PollEvent::CreatePoll {
            poll_id: PollId(self.polls.len() as u64),
            creator: creator.clone(),
            name: name.to_string(),
            description: description.to_string(),
            options: options.to_vec(),
        })
    }

    /// Returns the event and the size of the electorate after merging.
    pub fn register_voters(
        &self,
        id: PollId,
        caller: &PermanentId,
        voters: &[PermanentId],
        is_verified: impl Fn(&PermanentId) -> bool,
    ) -> Result<(PollEvent, usize), PollError> {
        let poll = self.owned_in(id, caller, PollStatus::Created)?;
        if let Some(unknown) = voters.iter().find(|v| !is_verified(v)) {
            return Err(PollError::UnknownVoter(unknown.clone()));
        }
        let mut merged = poll.registered_voters.clone();
        merged.extend(voters.iter().cloned());
        Ok((
            PollEvent::RegisterVoters {
                poll_id: id,
                voters: voters.to_vec(),
            },
            merged.len(),
        ))
    }

    pub fn set_open(&self, id: PollId, caller: &PermanentId) -> Result<PollEvent, PollError> {
        self.owned_in(id, caller, PollStatus::Created)?;
        Ok(PollEvent::SetOpen { poll_id: id })
    }

    pub fn open_poll(&self, id: PollId, caller: &PermanentId) -> Result<PollEvent, PollError> {
        let poll = self.owned_in(id, caller, PollStatus::Created)?;
        if poll.registered_voters.is_empty() && !poll.open_to_all {
            return Err(PollError::NoVoters);
        }
        Ok(PollEvent::OpenPoll { poll_id: id })
    }

    /// The vote, followed by the close and result events when it completes
    /// a closed electorate.
    pub fn cast_vote(
        &self,
        id: PollId,
        voter: &PermanentId,
        voter_verified: bool,
        choice: usize,
    ) -> Result<Vec<PollEvent>, PollError> {
        let poll = self.get(id)?;
        if poll.status != PollStatus::Open {
            return Err(PollError::PollNotOpen);
        }
        if choice >= poll.options.len() {
            return Err(PollError::BadChoice);
        }
        if !voter_verified || !poll.is_eligible(voter) {
            return Err(PollError::NotRegistered);
        }
        if poll.votes.contains_key(voter) {
            return Err(PollError::AlreadyVoted);
        }
        let mut events = vec![PollEvent::CastVote {
            poll_id: id,
            voter: voter.clone(),
            choice,
        }];
        if !poll.open_to_all && poll.votes.len() + 1 == poll.registered_voters.len() {
            let winner = tally(poll.votes.values().copied().chain([choice]), poll.options.len());
            events.push(PollEvent::ClosePoll { poll_id: id });
            events.push(PollEvent::PublishResult { poll_id: id, winner });
        }
        Ok(events)
    }

    pub fn close_poll(&self, id: PollId, caller: &PermanentId) -> Result<[PollEvent; 2], PollError> {
        let poll = self.owned_in(id, caller, PollStatus::Open)?;
        let winner = tally(poll.votes.values().copied(), poll.options.len());
        Ok([
            PollEvent::ClosePoll { poll_id: id },
            PollEvent::PublishResult { poll_id: id, winner },
        ])
    }

    /// The winning option index and label once closed, `None` before.
    pub fn results(&self, id: PollId) -> Result<Option<(usize, &str)>, PollError> {
        let poll = self.get(id)?;
        Ok(poll.result.map(|r| (r, poll.options[r].as_str())))
    }

    pub fn apply(&mut self, event: &PollEvent) -> Result<(), String> {
        let id = event.poll_id();
        if let PollEvent::CreatePoll {
            creator,
            name,
            description,
            options,
            ..
        } = event
        {
            if id.0 != self.polls.len() as u64 {
                return Err(format!("poll {id} out of sequence"));
            }
            if options.len() < 2 {
                return Err(format!("poll {id} has fewer than two options"));
            }
            self.polls.insert(
                id,
                Poll {
                    id,
                    name: name.clone(),
                    description: description.clone(),
                    options: options.clone(),
                    creator: creator.clone(),
                    registered_voters: BTreeSet::new(),
                    open_to_all: false,
                    status: PollStatus::Created,
                    votes: BTreeMap::new(),
                    result: None,
                },
            );
            return Ok(());
        }
        let poll = self
            .polls
            .get_mut(&id)
            .ok_or_else(|| format!("poll {id} does not exist"))?;
        let expect = |poll: &Poll, state: PollStatus| {
            if poll.status == state {
                Ok(())
            } else {
                Err(format!("poll {id} is {:?}, expected {state:?}", poll.status))
            }
        };
        match event {
            PollEvent::CreatePoll { .. } => unreachable!(),
            PollEvent::RegisterVoters { voters, .. } => {
                expect(poll, PollStatus::Created)?;
                poll.registered_voters.extend(voters.iter().cloned());
            }
            PollEvent::SetOpen { .. } => {
                expect(poll, PollStatus::Created)?;
                poll.open_to_all = true;
            }
            PollEvent::OpenPoll { .. } => {
                expect(poll, PollStatus::Created)?;
                poll.status = PollStatus::Open;
            }
            PollEvent::CastVote { voter, choice, .. } => {
                expect(poll, PollStatus::Open)?;
                if *choice >= poll.options.len() || poll.votes.contains_key(voter) || !poll.is_eligible(voter) {
                    return Err(format!("invalid vote in poll {id}"));
                }
                poll.votes.insert(voter.clone(), *choice);
            }
            PollEvent::ClosePoll { .. } => {
                expect(poll, PollStatus::Open)?;
                poll.status = PollStatus::Closed;
                poll.result = Some(tally(poll.votes.values().copied(), poll.options.len()));
            }
            PollEvent::PublishResult { winner, .. } => {
                expect(poll, PollStatus::Closed)?;
                if poll.result != Some(*winner) {
                    return Err(format!("published result {winner} disagrees with the tally of poll {id}"));
                }
            }
        }
        Ok(())
    }

    /// Canonical encoding of every poll, in id order.
    pub fn snapshot(&self) -> Vec<u8> {
        let mut enc = Encoder::new();
        enc.list("polls", self.polls.values().map(Poll::encode));
        enc.finish()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn pid(n: u8) -> PermanentId {
        format!("{n:032x}").parse().unwrap()
    }

    fn opts(names: &[&str]) -> Vec<String> {
        names.iter().map(|s| s.to_string()).collect()
    }

    struct Fixture {
        engine: PollEngine,
        creator: PermanentId,
    }

    impl Fixture {
        fn new() -> Self {
            Fixture {
                engine: PollEngine::new(),
                creator: pid(100),
            }
        }

        fn run(&mut self, events: impl IntoIterator<Item = PollEvent>) {
            for ev in events {
                self.engine.apply(&ev).unwrap();
            }
        }

        fn poll(&mut self, options: &[&str]) -> PollId {
            let ev = self
                .engine
                .create_poll(&self.creator, true, "n", "d", &opts(options))
                .unwrap();
            let id = ev.poll_id();
            self.run([ev]);
            id
        }

        fn open_with(&mut self, voters: &[PermanentId], options: &[&str]) -> PollId {
            let id = self.poll(options);
            let (ev, _) = self.engine.register_voters(id, &self.creator, voters, |_| true).unwrap();
            self.run([ev]);
            let open = self.engine.open_poll(id, &self.creator).unwrap();
            self.run([open]);
            id
        }

        fn vote(&mut self, id: PollId, voter: &PermanentId, choice: usize) -> Result<(), PollError> {
            let events = self.engine.cast_vote(id, voter, true, choice)?;
            self.run(events);
            Ok(())
        }
    }

    #[test]
    fn create_validates_options_and_creator() {
        let f = Fixture::new();
        let c = &f.creator;
        assert!(f.engine.create_poll(c, true, "n", "d", &opts(&["A", "B"])).is_ok());
        for bad in [&["A"][..], &["A", "A"], &["A", ""], &[]] {
            assert_eq!(
                f.engine.create_poll(c, true, "n", "d", &opts(bad)),
                Err(PollError::BadOptions)
            );
        }
        assert_eq!(
            f.engine.create_poll(c, false, "n", "d", &opts(&["A", "B"])),
            Err(PollError::UnverifiedCreator)
        );
    }

    #[test]
    fn register_voters_has_set_semantics() {
        let mut f = Fixture::new();
        let id = f.poll(&["A", "B"]);
        let (_, n) = f
            .engine
            .register_voters(id, &f.creator, &[pid(1), pid(2), pid(3)], |_| true)
            .unwrap();
        assert_eq!(n, 3);
        let (ev, n) = f.engine.register_voters(id, &f.creator, &[pid(1), pid(1)], |_| true).unwrap();
        assert_eq!(n, 1);
        f.run([ev]);
        assert_eq!(f.engine.get(id).unwrap().registered_voters.len(), 1);
        assert_eq!(
            f.engine.register_voters(id, &f.creator, &[pid(4)], |v| v != &pid(4)),
            Err(PollError::UnknownVoter(pid(4)))
        );
        assert_eq!(
            f.engine.register_voters(id, &pid(1), &[pid(4)], |_| true),
            Err(PollError::NotCreator)
        );
    }

    #[test]
    fn lifecycle_state_errors() {
        let mut f = Fixture::new();
        let id = f.poll(&["A", "B"]);
        assert_eq!(f.engine.open_poll(id, &f.creator), Err(PollError::NoVoters));
        assert_eq!(f.engine.close_poll(id, &f.creator), Err(PollError::WrongState));
        assert_eq!(f.engine.set_open(id, &pid(1)), Err(PollError::NotCreator));
        let ev = f.engine.set_open(id, &f.creator).unwrap();
        f.run([ev]);
        let ev = f.engine.open_poll(id, &f.creator).unwrap();
        f.run([ev]);
        assert_eq!(f.engine.open_poll(id, &f.creator), Err(PollError::WrongState));
        assert_eq!(
            f.engine.register_voters(id, &f.creator, &[pid(1)], |_| true),
            Err(PollError::WrongState)
        );
        // Open to all: any verified identity, but still only verified ones.
        f.vote(id, &pid(7), 1).unwrap();
        assert_eq!(
            f.engine.cast_vote(id, &pid(8), false, 0),
            Err(PollError::NotRegistered)
        );
        assert_eq!(f.engine.get(id).unwrap().status, PollStatus::Open);
        assert_eq!(f.engine.close_poll(id, &pid(7)), Err(PollError::NotCreator));
        let evs = f.engine.close_poll(id, &f.creator).unwrap();
        f.run(evs);
        assert_eq!(f.engine.results(id).unwrap(), Some((1, "B")));
        assert_eq!(f.engine.set_open(id, &f.creator), Err(PollError::WrongState));
        assert_eq!(f.engine.results(PollId(42)), Err(PollError::NotFound));
    }

    #[test]
    fn votes_and_auto_close() {
        let mut f = Fixture::new();
        let voters = [pid(1), pid(2), pid(3)];
        let id = f.open_with(&voters, &["A", "B", "C"]);
        assert_eq!(f.engine.results(id).unwrap(), None);
        f.vote(id, &pid(1), 0).unwrap();
        assert_eq!(f.vote(id, &pid(1), 1), Err(PollError::AlreadyVoted));
        assert_eq!(f.vote(id, &pid(9), 1), Err(PollError::NotRegistered));
        assert_eq!(f.vote(id, &pid(2), 3), Err(PollError::BadChoice));
        f.vote(id, &pid(2), 1).unwrap();
        assert_eq!(f.engine.get(id).unwrap().status, PollStatus::Open);
        let events = f.engine.cast_vote(id, &pid(3), true, 1).unwrap();
        assert_eq!(events.len(), 3);
        f.run(events);
        assert_eq!(f.engine.get(id).unwrap().status, PollStatus::Closed);
        assert_eq!(f.engine.results(id).unwrap(), Some((1, "B")));
        assert_eq!(f.vote(id, &pid(3), 0), Err(PollError::PollNotOpen));
    }

    #[test]
    fn manual_close_with_no_votes_yields_option_zero() {
        let mut f = Fixture::new();
        let id = f.open_with(&[pid(1)], &["A", "B"]);
        let evs = f.engine.close_poll(id, &f.creator).unwrap();
        f.run(evs);
        assert_eq!(f.engine.results(id).unwrap(), Some((0, "A")));
    }

    #[test]
    fn tally_examples() {
        assert_eq!(tally([0, 1, 1], 3), 1);
        assert_eq!(tally([], 2), 0);
        assert_eq!(tally([2, 0], 3), 0);
    }

    #[test]
    fn apply_rejects_inconsistent_events() {
        let mut f = Fixture::new();
        let id = f.open_with(&[pid(1), pid(2)], &["A", "B"]);
        let bad_result = PollEvent::PublishResult { poll_id: id, winner: 0 };
        assert!(f.engine.apply(&bad_result).is_err());
        assert!(f
            .engine
            .apply(&PollEvent::CastVote { poll_id: id, voter: pid(5), choice: 0 })
            .is_err());
        assert!(f.engine.apply(&PollEvent::OpenPoll { poll_id: PollId(3) }).is_err());
    }

    #[test]
    fn events_round_trip() {
        let events = [
            PollEvent::CreatePoll {
                poll_id: PollId(4),
                creator: pid(1),
                name: "name".into(),
                description: "".into(),
                options: opts(&["x", "y"]),
            },
            PollEvent::RegisterVoters { poll_id: PollId(4), voters: vec![pid(2), pid(3)] },
            PollEvent::SetOpen { poll_id: PollId(4) },
            PollEvent::OpenPoll { poll_id: PollId(4) },
            PollEvent::CastVote { poll_id: PollId(4), voter: pid(2), choice: 1 },
            PollEvent::ClosePoll { poll_id: PollId(4) },
            PollEvent::PublishResult { poll_id: PollId(4), winner: 1 },
        ];
        for ev in events {
            assert_eq!(PollEvent::decode(ev.kind(), &ev.encode()).unwrap(), ev);
        }
    }

    proptest! {
        #[test]
        fn tally_matches_counting(options in 2usize..5, choices in proptest::collection::vec(0usize..4, 0..9)) {
            let choices: Vec<usize> = choices.into_iter().map(|c| c % options).collect();
            let winner = tally(choices.iter().copied(), options);
            let count = |o: usize| choices.iter().filter(|&&c| c == o).count();
            prop_assert!((0..options).all(|o| count(o) <= count(winner)));
            prop_assert!((0..winner).all(|o| count(o) < count(winner)));
        }

        #[test]
        fn one_vote_per_voter(attempts in proptest::collection::vec((0u8..4, 0usize..2), 1..20)) {
            let mut f = Fixture::new();
            let id = f.poll(&["A", "B"]);
            let ev = f.engine.set_open(id, &f.creator).unwrap();
            f.run([ev]);
            let ev = f.engine.open_poll(id, &f.creator).unwrap();
            f.run([ev]);
            let mut first = BTreeMap::new();
            for (voter, choice) in attempts {
                let ok = f.vote(id, &pid(voter), choice).is_ok();
                prop_assert_eq!(ok, !first.contains_key(&voter));
                first.entry(voter).or_insert(choice);
            }
            let recorded: BTreeMap<u8, usize> = first.into_iter().collect();
            let poll = f.engine.get(id).unwrap();
            prop_assert_eq!(poll.votes.len(), recorded.len());
            for (v, c) in recorded {
                prop_assert_eq!(poll.votes.get(&pid(v)), Some(&c));
            }
        }
    }
}
