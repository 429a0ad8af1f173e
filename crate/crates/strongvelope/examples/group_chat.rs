//! A three-party chat from a cold start to steady state.
//!
//! Each participant's first message is *keyed*: it distributes their fresh
//! sender key, wrapped individually for every other member. Once everyone
//! holds everyone's key, traffic switches to *follow-ups* that reference a
//! key by ID — one signature, one CTR pass, no key material.
//!
//! ```bash
//! cargo run -p strongvelope --example group_chat
//! ```

use std::collections::BTreeSet;

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha20Rng;
use strongvelope::crypto::{DhKeyPair, ParticipantId, SignKeyPair};
use strongvelope::keystore::RotationPolicy;
use strongvelope::session::{Directory, PublicKeys, Session, SessionError};

const EPOCH: u64 = 1_726_000_000;

fn pid(name: &str) -> ParticipantId {
    let mut bytes = [0u8; 8];
    bytes[..name.len()].copy_from_slice(name.as_bytes());
    ParticipantId::from_bytes(bytes)
}

fn main() -> Result<(), SessionError> {
    let names = ["alice", "bob", "carol"];

    // Every identity is two key pairs: Ed25519 to sign messages, X25519 to
    // derive the pairwise keys that wrap sender keys in transit. The
    // directory of public halves is assumed to be exchanged out of band.
    let identities: Vec<(SignKeyPair, DhKeyPair)> = (0..names.len() as u8)
        .map(|i| {
            (
                SignKeyPair::from_seed([i + 1; 32]),
                DhKeyPair::from_secret_bytes([i + 101; 32]),
            )
        })
        .collect();
    let mut directory = Directory::new();
    for (name, (sign, dh)) in names.iter().zip(&identities) {
        directory.insert(
            pid(name),
            PublicKeys {
                signing: sign.public_bytes(),
                dh: dh.public_bytes(),
            },
        );
    }
    let group: BTreeSet<ParticipantId> = names.iter().map(|n| pid(n)).collect();

    let mut sessions: Vec<Session> = names
        .iter()
        .zip(identities)
        .enumerate()
        .map(|(i, (name, (sign, dh)))| {
            Session::with_rng(
                pid(name),
                sign,
                dh,
                directory.clone(),
                group.clone(),
                RotationPolicy::default(),
                Box::new(ChaCha20Rng::seed_from_u64(i as u64)),
            )
        })
        .collect::<Result<_, _>>()?;

    let script: [(usize, &str); 6] = [
        (0, "hello everyone"),
        (1, "hi alice"),
        (2, "good to see you both"),
        (0, "all keys are out now"),
        (1, "so this one is lean"),
        (2, "one signature and one cipher pass"),
    ];

    for (step, (sender, text)) in script.into_iter().enumerate() {
        let out = sessions[sender].send_message(Some(text.as_bytes()), EPOCH + step as u64 * 60)?;
        println!(
            "{} sends {:?} -> {} ({} bytes on the wire, key {})",
            names[sender],
            text,
            out.message_type.name(),
            out.wire.len(),
            out.key_id,
        );
        for receiver in 0..names.len() {
            if receiver == sender {
                continue;
            }
            let sender_id = pid(names[sender]);
            let seen = sessions[receiver].receive_message(&out.wire, sender_id)?;
            let payload = seen.payload.expect("every message in this chat has a payload");
            assert_eq!(payload, text.as_bytes());
            println!(
                "  {} reads {:?}{}",
                names[receiver],
                String::from_utf8_lossy(&payload),
                if seen.learned_keys.is_empty() {
                    String::new()
                } else {
                    format!(" (learned {} key(s))", seen.learned_keys.len())
                },
            );
        }
    }

    println!("\nFirst three sends carried keys; the rest reused them.");
    Ok(())
}
