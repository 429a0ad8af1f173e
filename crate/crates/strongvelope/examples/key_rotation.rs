//! When sender keys rotate, and why.
//!
//! Two triggers, both visible here:
//!
//! 1. **Rotation** — after 16 messages sent under one key, the 17th send
//!    mints a fresh key (limits how much traffic any single key covers).
//! 2. **Re-send** — a participant who merely reads 30 messages re-keys on
//!    their next send, so long-time lurkers re-distribute to anyone who
//!    joined the room since they last spoke.
//!
//! ```bash
//! cargo run -p strongvelope --example key_rotation
//! ```

use std::collections::BTreeSet;

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha20Rng;
use strongvelope::crypto::{DhKeyPair, ParticipantId, SignKeyPair};
use strongvelope::keystore::RotationPolicy;
use strongvelope::session::{Directory, PublicKeys, Session, SessionError};
use strongvelope::wire::MessageType;

const EPOCH: u64 = 1_726_000_000;

fn pair(names: [&str; 2]) -> Result<Vec<Session>, SessionError> {
    let ids: Vec<ParticipantId> = names
        .iter()
        .map(|name| {
            let mut bytes = [0u8; 8];
            bytes[..name.len()].copy_from_slice(name.as_bytes());
            ParticipantId::from_bytes(bytes)
        })
        .collect();
    let identities: Vec<(SignKeyPair, DhKeyPair)> = (0..2u8)
        .map(|i| {
            (
                SignKeyPair::from_seed([i + 21; 32]),
                DhKeyPair::from_secret_bytes([i + 121; 32]),
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
    let group: BTreeSet<ParticipantId> = ids.iter().copied().collect();
    ids.iter()
        .zip(identities)
        .enumerate()
        .map(|(i, (id, (sign, dh)))| {
            Session::with_rng(
                *id,
                sign,
                dh,
                directory.clone(),
                group.clone(),
                RotationPolicy::default(),
                Box::new(ChaCha20Rng::seed_from_u64(40 + i as u64)),
            )
        })
        .collect()
}

fn main() -> Result<(), SessionError> {
    // Part 1: rotation by sent count. Alice talks, bob only listens.
    println!("rotation by sent count (rotate after 16):");
    let sessions = &mut pair(["alice", "bob"])?;
    let alice_id = sessions[0].me();
    let mut clock = EPOCH;
    let mut line = String::new();
    for n in 1..=17 {
        clock += 60;
        let out = sessions[0].send_message(Some(format!("note {n}").as_bytes()), clock)?;
        sessions[1].receive_message(&out.wire, alice_id)?;
        line.push(match out.message_type {
            MessageType::GroupKeyed => 'K',
            MessageType::GroupFollowup => '.',
            MessageType::AlterParticipants => 'A',
        });
    }
    println!("  sends 1..=17: {line}");
    println!("  (K = keyed, . = follow-up — fresh keys on send 1 and send 17)\n");

    // Part 2: re-send by received count. Bob reads 30 messages in silence;
    // his next send re-distributes his key unprompted.
    println!("re-send by received count (re-send after 30):");
    let sessions = &mut pair(["alice", "bob"])?;
    let (alice_id, bob_id) = (sessions[0].me(), sessions[1].me());
    let mut clock = EPOCH;

    let out = sessions[1].send_message(Some(b"bob's first and last word for a while"), clock)?;
    sessions[0].receive_message(&out.wire, bob_id)?;
    println!("  bob's opener: {}", out.message_type.name());

    let mut read = 0;
    for n in 1..=30 {
        clock += 60;
        let out = sessions[0].send_message(Some(format!("alice {n}").as_bytes()), clock)?;
        let seen = sessions[1].receive_message(&out.wire, alice_id)?;
        assert!(seen.payload.is_some());
        read += 1;
    }
    println!("  bob silently read {read} messages");

    clock += 60;
    let comeback = sessions[1].send_message(Some(b"still following"), clock)?;
    println!(
        "  bob's comeback: {} under fresh key {}",
        comeback.message_type.name(),
        comeback.key_id,
    );
    assert_eq!(comeback.message_type, MessageType::GroupKeyed);

    Ok(())
}
