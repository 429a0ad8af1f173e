//! Recovering keys after a client restart.
//!
//! Sessions keep keys in memory only. A client that restarts comes back
//! empty-handed and rebuilds its key ring by replaying room history
//! backwards, batch by batch, until it finds the last message it keyed
//! itself — every key needed for anything newer is learned along the way.
//! A client that never sent anything has nothing to find; it reads what it
//! can and simply starts a fresh key at its next send.
//!
//! ```bash
//! cargo run -p strongvelope --example history_seeding
//! ```

use std::collections::BTreeSet;

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha20Rng;
use strongvelope::crypto::{DhKeyPair, ParticipantId, SignKeyPair};
use strongvelope::keystore::RotationPolicy;
use strongvelope::session::{Directory, PublicKeys, Session, SessionError};
use strongvelope::transport::ChatRoom;
use strongvelope::wire::MessageType;

const EPOCH: u64 = 1_726_000_000;

fn pid(name: &str) -> ParticipantId {
    let mut bytes = [0u8; 8];
    bytes[..name.len()].copy_from_slice(name.as_bytes());
    ParticipantId::from_bytes(bytes)
}

fn main() -> Result<(), SessionError> {
    let names = ["alice", "bob", "carol"];
    let ids: Vec<ParticipantId> = names.iter().map(|n| pid(n)).collect();
    let identities: Vec<(SignKeyPair, DhKeyPair)> = (0..3u8)
        .map(|i| {
            (
                SignKeyPair::from_seed([i + 81; 32]),
                DhKeyPair::from_secret_bytes([i + 181; 32]),
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
    let spawn = |i: usize, salt: u64| -> Result<Session, SessionError> {
        Session::with_rng(
            ids[i],
            identities[i].0.clone(),
            identities[i].1.clone(),
            directory.clone(),
            group.clone(),
            RotationPolicy::default(),
            Box::new(ChaCha20Rng::seed_from_u64(80 + salt)),
        )
    };

    // Build up 40 messages of room history: alice and bob trade messages,
    // carol never says a word. The room keeps the wire log.
    let mut room = ChatRoom::with_members(group.clone());
    let mut sessions = [spawn(0, 0)?, spawn(1, 1)?, spawn(2, 2)?];
    let mut clock = EPOCH;
    for n in 0..40u32 {
        clock += 60;
        let s = (n % 2) as usize;
        let out = sessions[s].send_message(Some(format!("msg {n}").as_bytes()), clock)?;
        let sender = sessions[s].me();
        room.post(sender, out.wire.clone()).expect("member posts");
        for session in sessions.iter_mut() {
            if session.me() != sender {
                session.receive_message(&out.wire, sender)?;
            }
        }
    }
    println!("room history: {} messages, carol silent throughout", room.len());

    // Bob's phone reboots. The new session trawls history backwards in
    // batches of 32 (the re-send threshold bounds how far back the last
    // self-keyed message can be) until it recognises one of its own keys.
    println!("\n-- bob restarts and seeds from history --");
    let mut bob = spawn(1, 10)?;
    let batch_size = bob.policy().history_batch() as usize;
    let mut before = None;
    let mut batches = 0;
    loop {
        let page = room.fetch_history(before, batch_size);
        if page.is_empty() {
            break;
        }
        let batch: Vec<(ParticipantId, Vec<u8>)> = page
            .iter()
            .map(|entry| (entry.sender, entry.wire.clone()))
            .collect();
        before = Some(page[0].seq);
        batches += 1;
        let known_before = bob.ring().known().count();
        let report = bob.seed_from_history(&batch);
        println!(
            "  batch {batches}: {} message(s), {} key(s) learned{}",
            batch.len(),
            bob.ring().known().count() - known_before,
            if report.own_key_found { ", own key found" } else { "" },
        );
        if report.own_key_found {
            break;
        }
    }
    println!("bob stopped after {batches} batch(es)");

    // With the ring rebuilt, bob picks up right where he left off.
    clock += 60;
    let out = sessions[0].send_message(Some(b"did you catch all that?"), clock)?;
    let seen = bob.receive_message(&out.wire, ids[0])?;
    println!(
        "alice's next message ({}): bob reads {:?}",
        out.message_type.name(),
        String::from_utf8_lossy(seen.payload.as_deref().unwrap()),
    );
    clock += 60;
    let out = bob.send_message(Some(b"every word"), clock)?;
    println!("bob answers with a {}", out.message_type.name());

    // Carol restarts too — but she never sent, so there is no own key to
    // find. She still learns everyone else's keys from the history, and her
    // next send starts a key of its own.
    println!("\n-- carol (who never sent) restarts --");
    let mut carol = spawn(2, 20)?;
    let mut before = None;
    let mut batches = 0;
    let found = loop {
        let page = room.fetch_history(before, batch_size);
        if page.is_empty() {
            break false;
        }
        let batch: Vec<(ParticipantId, Vec<u8>)> = page
            .iter()
            .map(|entry| (entry.sender, entry.wire.clone()))
            .collect();
        before = Some(page[0].seq);
        batches += 1;
        if carol.seed_from_history(&batch).own_key_found {
            break true;
        }
    };
    println!("carol walked all {batches} batch(es); own key found: {found}");
    clock += 60;
    let out = carol.send_message(Some(b"first words"), clock)?;
    println!("carol's first send is a {}", out.message_type.name());
    assert_eq!(out.message_type, MessageType::GroupKeyed);

    Ok(())
}
