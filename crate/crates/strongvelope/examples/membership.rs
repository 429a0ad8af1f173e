//! Growing and shrinking a group without ever re-encrypting history.
//!
//! Includes stage on a session and take effect at its next send, which goes
//! out as an ALTER_PARTICIPANTS message carrying a fresh key. Newcomers get
//! only that fresh key — messages from before their arrival stay opaque to
//! them. Excluded members simply stop receiving keys: they are never told
//! they're out, their copies of old traffic still read, but everything after
//! the cut is noise to them.
//!
//! ```bash
//! cargo run -p strongvelope --example membership
//! ```

use std::collections::BTreeSet;

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha20Rng;
use strongvelope::crypto::{DhKeyPair, ParticipantId, SignKeyPair};
use strongvelope::keystore::RotationPolicy;
use strongvelope::session::{Directory, InboundResult, PublicKeys, Session, SessionError};

const EPOCH: u64 = 1_726_000_000;

fn pid(name: &str) -> ParticipantId {
    let mut bytes = [0u8; 8];
    bytes[..name.len()].copy_from_slice(name.as_bytes());
    ParticipantId::from_bytes(bytes)
}

fn name_of(id: ParticipantId) -> String {
    String::from_utf8_lossy(id.as_bytes())
        .trim_end_matches('\0')
        .to_string()
}

fn describe(seen: &InboundResult) -> String {
    match (&seen.payload, seen.addressed) {
        (Some(text), _) => format!("reads {:?}", String::from_utf8_lossy(text)),
        (None, false) => "was not addressed (skips it)".into(),
        (None, true) => "got keys but no text".into(),
    }
}

/// Hands a wire message to one receiver and narrates what came of it. A
/// follow-up under a key the receiver never got is a hard error on receive
/// (there is no recipient list to consult) — for this walkthrough that is an
/// outcome to show, not a failure.
fn deliver(session: &mut Session, wire: &[u8], sender: ParticipantId) -> Result<(), SessionError> {
    let name = name_of(session.me());
    match session.receive_message(wire, sender) {
        Ok(seen) => println!("  {} {}", name, describe(&seen)),
        Err(SessionError::MissingKey { id, .. }) => {
            println!("  {name} holds no key {id} (ciphertext only)")
        }
        Err(other) => return Err(other),
    }
    Ok(())
}

fn main() -> Result<(), SessionError> {
    let names = ["alice", "bob", "carol", "dave"];
    let ids: Vec<ParticipantId> = names.iter().map(|n| pid(n)).collect();
    let identities: Vec<(SignKeyPair, DhKeyPair)> = (0..4u8)
        .map(|i| {
            (
                SignKeyPair::from_seed([i + 61; 32]),
                DhKeyPair::from_secret_bytes([i + 161; 32]),
            )
        })
        .collect();
    let mut directory = Directory::new();
    for (id, (sign, dh)) in ids.iter().zip(&identities) {
        directory.insert(
            *id,
            PublicKeys {
                signing: sign.public_bytes(),
                dh: dh.public_bytes(),
            },
        );
    }

    // The room opens with alice, bob and carol; dave exists but isn't in yet.
    let founders: BTreeSet<ParticipantId> = ids[..3].iter().copied().collect();
    let mut sessions: Vec<Session> = ids
        .iter()
        .zip(identities)
        .take(3)
        .enumerate()
        .map(|(i, (id, (sign, dh)))| {
            Session::with_rng(
                *id,
                sign,
                dh,
                directory.clone(),
                founders.clone(),
                RotationPolicy::default(),
                Box::new(ChaCha20Rng::seed_from_u64(60 + i as u64)),
            )
        })
        .collect::<Result<_, _>>()?;
    let dave_identity = (
        SignKeyPair::from_seed([3 + 61; 32]),
        DhKeyPair::from_secret_bytes([3 + 161; 32]),
    );

    let mut clock = EPOCH;
    let mut history: Vec<(ParticipantId, Vec<u8>)> = Vec::new();

    println!("-- three founders chat --");
    for (s, text) in [(0usize, "kickoff"), (1, "on it"), (2, "same here")] {
        clock += 60;
        let out = sessions[s].send_message(Some(text.as_bytes()), clock)?;
        let sender = sessions[s].me();
        history.push((sender, out.wire.clone()));
        println!("{} sends {:?} ({})", names[s], text, out.message_type.name());
        for session in sessions.iter_mut() {
            if session.me() != sender {
                deliver(session, &out.wire, sender)?;
            }
        }
    }

    // Alice brings dave in. Dave's session starts life when the invitation
    // is on its way; the include itself is just staged state until the send.
    println!("\n-- alice includes dave --");
    sessions[0].alter_participants(&[ids[3]], &[])?;
    clock += 60;
    let out = sessions[0].send_message(Some(b"welcome dave"), clock)?;
    println!("alice sends the invite ({})", out.message_type.name());
    let announced: BTreeSet<ParticipantId> = sessions[0].participants().clone();
    sessions.push(Session::with_rng(
        ids[3],
        dave_identity.0,
        dave_identity.1,
        directory.clone(),
        announced,
        RotationPolicy::default(),
        Box::new(ChaCha20Rng::seed_from_u64(63)),
    )?);
    for session in sessions.iter_mut().skip(1) {
        deliver(session, &out.wire, ids[0])?;
    }

    // The fresh key is all dave has: the pre-inclusion history stays dark.
    println!("\n-- dave replays the history from before his arrival --");
    for (sender, wire) in &history {
        let seen = sessions[3].receive_message(wire, *sender)?;
        assert!(seen.payload.is_none());
        println!("  message from {}: {}", name_of(*sender), describe(&seen));
    }

    // Bob hasn't spoken since the include, so his own view of the group is
    // still the founders' roster. His next send re-announces his (stale)
    // list merged with what alice told him — the rosters converge as each
    // member takes their next turn.
    println!("\n-- bob's next send folds the change in --");
    clock += 60;
    let out = sessions[1].send_message(Some(b"hi dave"), clock)?;
    println!("bob sends {:?} ({})", "hi dave", out.message_type.name());
    for (i, session) in sessions.iter_mut().enumerate() {
        if i != 1 {
            deliver(session, &out.wire, ids[1])?;
        }
    }

    // Now carol is voted off. Nothing reaches her about it — she just stops
    // being a recipient, and post-exclusion traffic never decrypts for her.
    println!("\n-- alice excludes carol --");
    sessions[0].alter_participants(&[], &[ids[2]])?;
    clock += 60;
    let out = sessions[0].send_message(Some(b"ok, just the three of us"), clock)?;
    println!("alice announces it ({})", out.message_type.name());
    for (i, session) in sessions.iter_mut().enumerate() {
        if i != 0 {
            deliver(session, &out.wire, ids[0])?;
        }
    }

    // Dave and bob re-announce the exclusion on their next turns (more
    // alters); once every view agrees, traffic settles back to follow-ups.
    println!("\n-- traffic after the cut --");
    for (s, text) in [(3usize, "noted"), (1, "moving on"), (0, "back to business")] {
        clock += 60;
        let out = sessions[s].send_message(Some(text.as_bytes()), clock)?;
        let sender = sessions[s].me();
        println!("{} sends {:?} ({})", names[s], text, out.message_type.name());
        for session in sessions.iter_mut() {
            if session.me() != sender {
                deliver(session, &out.wire, sender)?;
            }
        }
    }
    println!("\ncarol still holds the old keys — her copy of the early chat reads fine —");
    println!("but no new key ever reaches her again.");

    Ok(())
}
