//! Scripted multi-party scenarios: a line-oriented harness that drives
//! several [`Session`]s over one [`ChatRoom`] and checks expectations.
//!
//! Scripts are plain text, one statement per line; blank lines and lines
//! starting with `#` are skipped. Declarations come first, then actions:
//!
//! ```text
//! # declarations (before the first action)
//! policy <rotate-after-sent> <resend-after-total> <history-batch>
//! participant <name>        # founding group member
//! contact <name>            # keys known, joins only if included later
//!
//! # actions
//! send <name> <text…>       # post a message (type chosen by the session)
//! blind-send <name>         # post a payload-less key/membership message
//! include <name> <name…>    # stage inclusions; announced by the next send
//! exclude <name> <name…>    # stage exclusions; announced by the next send
//! seed <name>               # restart the client, recover keys from history
//!
//! # expectations (about the most recent post)
//! expect-type <keyed|followup|alter>
//! expect-decrypt <name> <text…>
//! expect-blind <name>
//! expect-skipped <name>
//! expect-missing-key <name>
//! ```
//!
//! Names are 1–8 characters of `[A-Za-z0-9_-]` and double as handles (zero
//! padded to 8 bytes). Every posted message is delivered to every other
//! client immediately — the room is an ordered, reliable transport — and the
//! outcome per receiver is recorded for the `expect-*` statements.
//!
//! A run is bit-reproducible: all key material and nonces derive from the
//! seed passed to [`run_script`], so the same script and seed give the same
//! wires, the same export, and the same transcript.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt::Write as _;

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha20Rng;
use sha2::{Digest, Sha256};

use crate::crypto::{DhKeyPair, ParticipantId, SignKeyPair};
use crate::keystore::RotationPolicy;
use crate::session::{Directory, PublicKeys, Session, SessionError};
use crate::transport::ChatRoom;
use crate::wire::MessageType;

/// Scenario time starts here and advances by a fixed tick per action, so
/// key-ID days are stable no matter when a scenario runs.
pub const SCENARIO_EPOCH: u64 = 1_728_000_000;
const STEP_SECONDS: u64 = 60;

/// Why a run stopped early.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FailureKind {
    /// The script itself is unusable: unknown verbs, undeclared names,
    /// operations the protocol refuses. Exit code 2 territory.
    Script,
    /// The script ran but an `expect-*` statement did not hold. Exit code 1.
    Assertion,
}

/// A failed run: what went wrong, and on which script line.
#[derive(Debug, Clone)]
pub struct ScenarioFailure {
    pub kind: FailureKind,
    pub line: usize,
    pub message: String,
}

impl std::fmt::Display for ScenarioFailure {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let kind = match self.kind {
            FailureKind::Script => "script error",
            FailureKind::Assertion => "assertion failed",
        };
        write!(f, "line {}: {}: {}", self.line, kind, self.message)
    }
}

/// The result of a scenario run — produced whether or not the run passed.
#[derive(Debug, Clone)]
pub struct ScenarioRun {
    /// Human-readable play-by-play, ending in a PASS/FAIL line.
    pub transcript: String,
    /// The room log, one `<seq> <sender hex> <wire hex>` line per message.
    pub export: String,
    /// Actions executed (sends, stagings, seeds).
    pub steps: usize,
    /// Expectations checked (only counted when they held).
    pub assertions: usize,
    /// `None` when every statement succeeded.
    pub failure: Option<ScenarioFailure>,
}

impl ScenarioRun {
    pub fn passed(&self) -> bool {
        self.failure.is_none()
    }
}

/// What one client made of one received message.
#[derive(Debug, Clone, PartialEq, Eq)]
enum Outcome {
    Decrypted(Vec<u8>),
    Blind,
    Skipped,
    MissingKey,
    Rejected(String),
}

impl Outcome {
    fn describe(&self) -> String {
        match self {
            Outcome::Decrypted(text) => {
                format!("decrypted {:?}", String::from_utf8_lossy(text))
            }
            Outcome::Blind => "blind".to_string(),
            Outcome::Skipped => "skipped".to_string(),
            Outcome::MissingKey => "missing-key".to_string(),
            Outcome::Rejected(error) => format!("rejected ({error})"),
        }
    }
}

struct Actor {
    name: String,
    id: ParticipantId,
    sign: SignKeyPair,
    dh: DhKeyPair,
    /// Present for founding members and anyone included since; contacts that
    /// were never included have no session and receive nothing.
    session: Option<Session>,
    /// Bumped each time the client is restarted by `seed`, so a restarted
    /// session draws a fresh deterministic randomness stream.
    generation: u32,
    founding: bool,
}

struct Runner {
    master: [u8; 32],
    actors: Vec<Actor>,
    by_name: HashMap<String, usize>,
    room: ChatRoom,
    /// The group as most recently announced on the wire.
    composition: BTreeSet<ParticipantId>,
    policy: RotationPolicy,
    policy_set: bool,
    started: bool,
    step: usize,
    transcript: String,
    export: String,
    assertions: usize,
    last: Option<LastSend>,
}

struct LastSend {
    seq: u64,
    sender: usize,
    message_type: MessageType,
    outcomes: BTreeMap<usize, Outcome>,
}

/// Runs a script against a fresh room. `seed` is arbitrary bytes (often
/// decoded from a hex flag); the run's 32-byte master seed is its SHA-256,
/// so an empty seed still yields a well-defined deterministic run.
pub fn run_script(script: &str, seed: &[u8]) -> ScenarioRun {
    let master: [u8; 32] = Sha256::digest(seed).into();
    let mut runner = Runner {
        master,
        actors: Vec::new(),
        by_name: HashMap::new(),
        room: ChatRoom::new(),
        composition: BTreeSet::new(),
        policy: RotationPolicy::default(),
        policy_set: false,
        started: false,
        step: 0,
        transcript: String::new(),
        export: String::new(),
        assertions: 0,
        last: None,
    };

    for (index, raw) in script.lines().enumerate() {
        let line_no = index + 1;
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        if let Err(failure) = runner.statement(line, line_no) {
            let _ = writeln!(runner.transcript, "{failure}");
            let _ = writeln!(
                runner.transcript,
                "scenario: FAIL ({} steps, {} assertions)",
                runner.step, runner.assertions
            );
            return runner.finish(Some(failure));
        }
    }

    let _ = writeln!(
        runner.transcript,
        "scenario: PASS ({} steps, {} assertions)",
        runner.step, runner.assertions
    );
    runner.finish(None)
}

/// Splits off the first whitespace-delimited token; the rest keeps its
/// internal spacing (payload text is taken verbatim).
fn split_first(s: &str) -> (&str, &str) {
    let s = s.trim_start();
    match s.find(char::is_whitespace) {
        Some(at) => (&s[..at], s[at..].trim_start()),
        None => (s, ""),
    }
}

fn script_error(line: usize, message: impl Into<String>) -> ScenarioFailure {
    ScenarioFailure {
        kind: FailureKind::Script,
        line,
        message: message.into(),
    }
}

fn assertion_error(line: usize, message: impl Into<String>) -> ScenarioFailure {
    ScenarioFailure {
        kind: FailureKind::Assertion,
        line,
        message: message.into(),
    }
}

impl Runner {
    fn statement(&mut self, line: &str, line_no: usize) -> Result<(), ScenarioFailure> {
        let (verb, rest) = split_first(line);
        match verb {
            "policy" => self.declare_policy(rest, line_no),
            "participant" => self.declare_actor(rest, line_no, true),
            "contact" => self.declare_actor(rest, line_no, false),
            "send" => {
                let (name, text) = split_first(rest);
                self.action_send(name, Some(text.as_bytes()), line_no)
            }
            "blind-send" => self.action_send(rest, None, line_no),
            "include" => self.action_alter(rest, line_no, true),
            "exclude" => self.action_alter(rest, line_no, false),
            "seed" => self.action_seed(rest, line_no),
            "expect-type" => self.expect_type(rest, line_no),
            "expect-decrypt" => {
                let (name, text) = split_first(rest);
                self.expect_outcome(name, Outcome::Decrypted(text.as_bytes().to_vec()), line_no)
            }
            "expect-blind" => self.expect_outcome(rest, Outcome::Blind, line_no),
            "expect-skipped" => self.expect_outcome(rest, Outcome::Skipped, line_no),
            "expect-missing-key" => self.expect_outcome(rest, Outcome::MissingKey, line_no),
            other => Err(script_error(line_no, format!("unknown verb {other:?}"))),
        }
    }

    fn declare_policy(&mut self, rest: &str, line_no: usize) -> Result<(), ScenarioFailure> {
        if self.started {
            return Err(script_error(line_no, "policy must precede the first action"));
        }
        if self.policy_set {
            return Err(script_error(line_no, "policy was already set"));
        }
        let numbers: Vec<&str> = rest.split_whitespace().collect();
        let [rotate, resend, batch] = numbers.as_slice() else {
            return Err(script_error(
                line_no,
                "policy takes exactly three numbers: rotate-after-sent, resend-after-total, history-batch",
            ));
        };
        let parse = |s: &str| -> Result<u32, ScenarioFailure> {
            s.parse()
                .map_err(|_| script_error(line_no, format!("{s:?} is not a number")))
        };
        self.policy = RotationPolicy::new(parse(rotate)?, parse(resend)?, parse(batch)?)
            .map_err(|error| script_error(line_no, error.to_string()))?;
        self.policy_set = true;
        Ok(())
    }

    fn declare_actor(
        &mut self,
        rest: &str,
        line_no: usize,
        founding: bool,
    ) -> Result<(), ScenarioFailure> {
        if self.started {
            return Err(script_error(
                line_no,
                "declarations must precede the first action",
            ));
        }
        let (name, extra) = split_first(rest);
        if !extra.is_empty() {
            return Err(script_error(line_no, "one name per declaration"));
        }
        if name.is_empty()
            || name.len() > 8
            || !name
                .chars()
                .all(|c| c.is_ascii_alphanumeric() || c == '_' || c == '-')
        {
            return Err(script_error(
                line_no,
                format!("{name:?} is not a valid name (1-8 of [A-Za-z0-9_-])"),
            ));
        }
        if self.by_name.contains_key(name) {
            return Err(script_error(line_no, format!("{name} is already declared")));
        }

        let mut handle = [0u8; 8];
        handle[..name.len()].copy_from_slice(name.as_bytes());
        let id = ParticipantId::from_bytes(handle);
        let sign = SignKeyPair::from_seed(self.derive(b"sign", name, 0));
        let dh = DhKeyPair::from_secret_bytes(self.derive(b"dh", name, 0));
        self.by_name.insert(name.to_string(), self.actors.len());
        self.actors.push(Actor {
            name: name.to_string(),
            id,
            sign,
            dh,
            session: None,
            generation: 0,
            founding,
        });
        Ok(())
    }

    fn derive(&self, label: &[u8], name: &str, generation: u32) -> [u8; 32] {
        Sha256::new()
            .chain_update(self.master)
            .chain_update(label)
            .chain_update(name.as_bytes())
            .chain_update(generation.to_be_bytes())
            .finalize()
            .into()
    }

    /// Freezes declarations and brings up the founding sessions.
    fn start(&mut self, line_no: usize) -> Result<(), ScenarioFailure> {
        if self.started {
            return Ok(());
        }
        if !self.actors.iter().any(|a| a.founding) {
            return Err(script_error(line_no, "no participants declared"));
        }
        self.room = ChatRoom::with_members(self.actors.iter().map(|a| a.id));
        self.composition = self
            .actors
            .iter()
            .filter(|a| a.founding)
            .map(|a| a.id)
            .collect();
        let founding: Vec<usize> = (0..self.actors.len())
            .filter(|i| self.actors[*i].founding)
            .collect();
        for index in founding {
            self.create_session(index, line_no)?;
        }
        self.started = true;
        Ok(())
    }

    fn directory(&self) -> Directory {
        self.actors
            .iter()
            .map(|actor| {
                (
                    actor.id,
                    PublicKeys {
                        signing: actor.sign.public_bytes(),
                        dh: actor.dh.public_bytes(),
                    },
                )
            })
            .collect()
    }

    fn create_session(&mut self, index: usize, line_no: usize) -> Result<(), ScenarioFailure> {
        let directory = self.directory();
        let composition = self.composition.clone();
        let actor = &mut self.actors[index];
        let rng_seed = Sha256::new()
            .chain_update(self.master)
            .chain_update(b"rng")
            .chain_update(actor.name.as_bytes())
            .chain_update(actor.generation.to_be_bytes())
            .finalize()
            .into();
        actor.generation += 1;
        let session = Session::with_rng(
            actor.id,
            actor.sign.clone(),
            actor.dh.clone(),
            directory,
            composition,
            self.policy,
            Box::new(ChaCha20Rng::from_seed(rng_seed)),
        )
        .map_err(|error| {
            script_error(line_no, format!("cannot start {}: {error}", actor.name))
        })?;
        actor.session = Some(session);
        Ok(())
    }

    fn lookup(&self, name: &str, line_no: usize) -> Result<usize, ScenarioFailure> {
        if name.is_empty() {
            return Err(script_error(line_no, "missing a participant name"));
        }
        self.by_name
            .get(name)
            .copied()
            .ok_or_else(|| script_error(line_no, format!("{name} is not declared")))
    }

    fn now(&self) -> u64 {
        SCENARIO_EPOCH + self.step as u64 * STEP_SECONDS
    }

    fn action_send(
        &mut self,
        name: &str,
        payload: Option<&[u8]>,
        line_no: usize,
    ) -> Result<(), ScenarioFailure> {
        self.start(line_no)?;
        self.step += 1;
        let sender = self.lookup(name, line_no)?;
        if !self.composition.contains(&self.actors[sender].id) {
            return Err(script_error(
                line_no,
                format!("{name} is not currently a participant"),
            ));
        }
        let now = self.now();
        let sender_id = self.actors[sender].id;
        let session = self.actors[sender]
            .session
            .as_mut()
            .expect("participants have sessions");
        let outbound = session
            .send_message(payload, now)
            .map_err(|error| script_error(line_no, format!("{name} cannot send: {error}")))?;
        let announced = session.participants().clone();

        let seq = self
            .room
            .post(sender_id, outbound.wire.clone())
            .map_err(|error| script_error(line_no, format!("{name} cannot post: {error}")))?;
        let _ = writeln!(
            self.export,
            "{} {} {}",
            seq,
            hex::encode(sender_id.as_bytes()),
            hex::encode(&outbound.wire)
        );

        // A membership change takes effect the moment it is announced:
        // newly included members come online and receive the announcement
        // like everyone else.
        let included: Vec<ParticipantId> =
            announced.difference(&self.composition).copied().collect();
        self.composition = announced;
        for id in included {
            let index = self
                .actors
                .iter()
                .position(|a| a.id == id)
                .expect("announced participants are declared");
            if self.actors[index].session.is_none() {
                self.create_session(index, line_no)?;
            }
        }

        let mut outcomes = BTreeMap::new();
        for index in 0..self.actors.len() {
            if index == sender || self.actors[index].session.is_none() {
                continue;
            }
            let session = self.actors[index].session.as_mut().unwrap();
            let outcome = match session.receive_message(&outbound.wire, sender_id) {
                Ok(result) if !result.addressed => Outcome::Skipped,
                Ok(result) => match result.payload {
                    Some(text) => Outcome::Decrypted(text),
                    None => Outcome::Blind,
                },
                Err(SessionError::MissingKey { .. }) => Outcome::MissingKey,
                Err(error) => Outcome::Rejected(error.to_string()),
            };
            outcomes.insert(index, outcome);
        }

        let type_name = match outbound.message_type {
            MessageType::GroupKeyed => "keyed",
            MessageType::GroupFollowup => "followup",
            MessageType::AlterParticipants => "alter",
        };
        let _ = writeln!(
            self.transcript,
            "post #{seq} (line {line_no}): {name} -> {type_name} under key {}{}",
            outbound.key_id,
            if payload.is_none() { ", blind" } else { "" },
        );
        for (index, outcome) in &outcomes {
            let _ = writeln!(
                self.transcript,
                "  {}: {}",
                self.actors[*index].name,
                outcome.describe()
            );
        }

        self.last = Some(LastSend {
            seq,
            sender,
            message_type: outbound.message_type,
            outcomes,
        });
        Ok(())
    }

    fn action_alter(
        &mut self,
        rest: &str,
        line_no: usize,
        include: bool,
    ) -> Result<(), ScenarioFailure> {
        self.start(line_no)?;
        self.step += 1;
        let (name, others) = split_first(rest);
        let actor = self.lookup(name, line_no)?;
        if !self.composition.contains(&self.actors[actor].id) {
            return Err(script_error(
                line_no,
                format!("{name} is not currently a participant"),
            ));
        }
        let mut ids = Vec::new();
        let mut listed = Vec::new();
        for other in others.split_whitespace() {
            let index = self.lookup(other, line_no)?;
            ids.push(self.actors[index].id);
            listed.push(other);
        }
        if ids.is_empty() {
            return Err(script_error(
                line_no,
                format!(
                    "{} whom? name at least one participant",
                    if include { "include" } else { "exclude" }
                ),
            ));
        }
        let session = self.actors[actor]
            .session
            .as_mut()
            .expect("participants have sessions");
        let result = if include {
            session.alter_participants(&ids, &[])
        } else {
            session.alter_participants(&[], &ids)
        };
        result.map_err(|error| script_error(line_no, error.to_string()))?;
        let _ = writeln!(
            self.transcript,
            "stage (line {line_no}): {name} {}s {}",
            if include { "include" } else { "exclude" },
            listed.join(", "),
        );
        Ok(())
    }

    fn action_seed(&mut self, rest: &str, line_no: usize) -> Result<(), ScenarioFailure> {
        self.start(line_no)?;
        self.step += 1;
        let (name, extra) = split_first(rest);
        if !extra.is_empty() {
            return Err(script_error(line_no, "seed takes exactly one name"));
        }
        let index = self.lookup(name, line_no)?;
        if !self.composition.contains(&self.actors[index].id) {
            return Err(script_error(
                line_no,
                format!("{name} is not currently a participant"),
            ));
        }

        // Restart the client: fresh session, keys recovered from history in
        // backward batches until its own key turns up (or history runs out).
        self.create_session(index, line_no)?;
        let batch_size = self.policy.history_batch() as usize;
        let mut before = None;
        let mut batches = 0usize;
        let mut diagnostics = 0usize;
        let mut found = false;
        loop {
            let page: Vec<(ParticipantId, Vec<u8>)> = self
                .room
                .fetch_history(before, batch_size)
                .iter()
                .map(|m| (m.sender, m.wire.clone()))
                .collect();
            let first_seq = self.room.fetch_history(before, batch_size).first().map(|m| m.seq);
            if page.is_empty() {
                break;
            }
            batches += 1;
            let session = self.actors[index].session.as_mut().unwrap();
            let report = session.seed_from_history(&page);
            diagnostics += report.diagnostics.len();
            if report.own_key_found {
                found = true;
                break;
            }
            before = first_seq;
            if before == Some(0) {
                break;
            }
        }
        let _ = writeln!(
            self.transcript,
            "seed (line {line_no}): {name} restarted; {} after {batches} batch(es), {diagnostics} diagnostic(s)",
            if found { "own key found" } else { "own key not found" },
        );
        Ok(())
    }

    fn last_send(&self, line_no: usize) -> Result<&LastSend, ScenarioFailure> {
        self.last
            .as_ref()
            .ok_or_else(|| script_error(line_no, "nothing has been sent yet"))
    }

    fn expect_type(&mut self, rest: &str, line_no: usize) -> Result<(), ScenarioFailure> {
        let expected = match rest {
            "keyed" => MessageType::GroupKeyed,
            "followup" => MessageType::GroupFollowup,
            "alter" => MessageType::AlterParticipants,
            other => {
                return Err(script_error(
                    line_no,
                    format!("unknown message type {other:?} (keyed, followup, alter)"),
                ))
            }
        };
        let last = self.last_send(line_no)?;
        let (seq, actual) = (last.seq, last.message_type);
        if actual != expected {
            return Err(assertion_error(
                line_no,
                format!(
                    "post #{seq} is {}, expected {}",
                    actual.name(),
                    expected.name()
                ),
            ));
        }
        self.assertions += 1;
        let _ = writeln!(
            self.transcript,
            "assert (line {line_no}): post #{seq} is {rest}: ok",
        );
        Ok(())
    }

    fn expect_outcome(
        &mut self,
        name: &str,
        expected: Outcome,
        line_no: usize,
    ) -> Result<(), ScenarioFailure> {
        let index = self.lookup(name, line_no)?;
        let last = self.last_send(line_no)?;
        if index == last.sender {
            return Err(script_error(
                line_no,
                format!("{name} posted that message and does not receive it"),
            ));
        }
        let Some(actual) = last.outcomes.get(&index) else {
            return Err(script_error(
                line_no,
                format!("{name} was not online for post #{}", last.seq),
            ));
        };
        if *actual != expected {
            return Err(assertion_error(
                line_no,
                format!(
                    "{name} on post #{}: expected {}, got {}",
                    last.seq,
                    expected.describe(),
                    actual.describe()
                ),
            ));
        }
        let seq = last.seq;
        self.assertions += 1;
        let _ = writeln!(
            self.transcript,
            "assert (line {line_no}): {name} on post #{seq} {}: ok",
            expected.describe()
        );
        Ok(())
    }

    fn finish(self, failure: Option<ScenarioFailure>) -> ScenarioRun {
        ScenarioRun {
            transcript: self.transcript,
            export: self.export,
            steps: self.step,
            assertions: self.assertions,
            failure,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const BASIC: &str = "\
participant alice
participant bob
participant carol

send alice hello room
expect-type keyed
expect-decrypt bob hello room
expect-decrypt carol hello room

send bob hi alice
expect-type keyed
send alice back to you
expect-type followup
expect-decrypt carol back to you
";

    #[test]
    fn basic_script_passes() {
        let run = run_script(BASIC, b"test");
        assert!(run.passed(), "{}\n{:?}", run.transcript, run.failure);
        assert_eq!(run.steps, 3);
        assert_eq!(run.assertions, 6);
        assert!(run.transcript.ends_with("scenario: PASS (3 steps, 6 assertions)\n"));
        assert_eq!(run.export.lines().count(), 3);
    }

    #[test]
    fn runs_are_bit_reproducible_under_a_seed() {
        let first = run_script(BASIC, b"reseed");
        let second = run_script(BASIC, b"reseed");
        assert_eq!(first.transcript, second.transcript);
        assert_eq!(first.export, second.export);

        let other = run_script(BASIC, b"different");
        assert!(other.passed());
        // Same structure, different key material and signatures.
        assert_ne!(first.export, other.export);
    }

    #[test]
    fn membership_change_walkthrough() {
        let script = "\
participant alice
participant bob
participant carol
contact dave

send alice morning
expect-decrypt carol morning

include alice dave
send alice welcome dave
expect-type alter
expect-decrypt dave welcome dave
expect-decrypt bob welcome dave

exclude bob carol
send bob carol is out
expect-type alter
expect-skipped carol
expect-decrypt dave carol is out

send alice onward
expect-type alter
expect-skipped carol

send alice fresh epoch
expect-type followup
expect-missing-key carol
expect-decrypt dave fresh epoch
";
        let run = run_script(script, b"membership");
        assert!(run.passed(), "{}\n{:?}", run.transcript, run.failure);
    }

    #[test]
    fn seed_restores_a_restarted_client() {
        let script = "\
participant alice
participant bob

send alice first
send bob second
seed bob
send alice third
expect-type followup
expect-decrypt bob third
";
        let run = run_script(script, b"seeding");
        assert!(run.passed(), "{}\n{:?}", run.transcript, run.failure);
        assert!(run.transcript.contains("bob restarted; own key found"));
    }

    #[test]
    fn undeclared_names_are_script_errors() {
        let run = run_script("participant alice\nsend mallory hi\n", b"x");
        let failure = run.failure.expect("must fail");
        assert_eq!(failure.kind, FailureKind::Script);
        assert_eq!(failure.line, 2);
        assert!(failure.message.contains("mallory"));
    }

    #[test]
    fn failed_expectations_are_assertions() {
        let script = "\
participant alice
participant bob
send alice hi
expect-decrypt bob bye
";
        let run = run_script(script, b"x");
        let failure = run.failure.expect("must fail");
        assert_eq!(failure.kind, FailureKind::Assertion);
        assert_eq!(failure.line, 4);
        assert!(run.transcript.contains("scenario: FAIL"));
    }

    #[test]
    fn declarations_freeze_at_the_first_action() {
        let script = "\
participant alice
participant bob
send alice hi
participant carol
";
        let run = run_script(script, b"x");
        let failure = run.failure.expect("must fail");
        assert_eq!(failure.kind, FailureKind::Script);
        assert_eq!(failure.line, 4);
    }

    #[test]
    fn policy_overrides_change_rotation_cadence() {
        let script = "\
policy 2 30 32
participant alice
participant bob

send alice one
expect-type keyed
send alice two
expect-type followup
send alice three
expect-type keyed
";
        let run = run_script(script, b"policy");
        assert!(run.passed(), "{}\n{:?}", run.transcript, run.failure);
    }

    #[test]
    fn blind_sends_must_carry_keys() {
        let script = "\
participant alice
participant bob
blind-send alice
expect-type keyed
expect-blind bob
blind-send alice
";
        let run = run_script(script, b"blind");
        let failure = run.failure.expect("second blind send has no key to carry");
        assert_eq!(failure.kind, FailureKind::Script);
        assert_eq!(failure.line, 6);
    }

    #[test]
    fn export_lines_replay_into_the_same_wires() {
        let run = run_script(BASIC, b"export");
        for line in run.export.lines() {
            let mut fields = line.split_whitespace();
            let seq: u64 = fields.next().unwrap().parse().unwrap();
            let sender = hex::decode(fields.next().unwrap()).unwrap();
            let wire = hex::decode(fields.next().unwrap()).unwrap();
            assert_eq!(sender.len(), 8);
            assert!(seq < 3);
            assert_eq!(wire[0], 0x00);
            assert!(fields.next().is_none());
        }
    }
}
