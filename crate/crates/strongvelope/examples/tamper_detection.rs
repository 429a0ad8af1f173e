//! What happens to a message that was tampered with in transit.
//!
//! Every message is signed over its entire body, and the signature is
//! checked before anything else — before key unwrapping, before state
//! updates. A flipped bit anywhere, or a message replayed under the wrong
//! sender's name, is rejected outright and leaves the receiving session
//! untouched.
//!
//! ```bash
//! cargo run -p strongvelope --example tamper_detection
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
    let ids = [pid("alice"), pid("bob"), pid("mallory")];
    let identities: Vec<(SignKeyPair, DhKeyPair)> = (0..3u8)
        .map(|i| {
            (
                SignKeyPair::from_seed([i + 41; 32]),
                DhKeyPair::from_secret_bytes([i + 141; 32]),
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
    let group: BTreeSet<ParticipantId> = ids.into();
    let mut sessions: Vec<Session> = ids
        .iter()
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
                Box::new(ChaCha20Rng::seed_from_u64(90 + i as u64)),
            )
        })
        .collect::<Result<_, _>>()?;

    let out = sessions[0].send_message(Some(b"the genuine article"), EPOCH + 60)?;
    println!(
        "alice sends {:?} ({} bytes)\n",
        "the genuine article",
        out.wire.len()
    );

    // A single flipped bit in the middle of the ciphertext.
    let mut flipped = out.wire.clone();
    let target = flipped.len() - 10;
    flipped[target] ^= 0x01;
    print!("bit flipped at byte {target}: ");
    match sessions[1].receive_message(&flipped, ids[0]) {
        Err(err @ SessionError::BadSignature { .. }) => println!("rejected ({err})"),
        other => panic!("tampered message got through: {other:?}"),
    }

    // The untouched message, but mallory claims she sent it. The signature
    // is checked against the claimed sender's key, so the claim fails.
    print!("same bytes claimed by mallory: ");
    match sessions[1].receive_message(&out.wire, ids[2]) {
        Err(err @ SessionError::BadSignature { .. }) => println!("rejected ({err})"),
        other => panic!("misattributed message got through: {other:?}"),
    }

    // A copy with the tail chopped off. The signature covers every byte
    // after its own record, so a shortened span fails the same check.
    print!("last 7 bytes dropped: ");
    match sessions[1].receive_message(&out.wire[..out.wire.len() - 7], ids[0]) {
        Err(err @ SessionError::BadSignature { .. }) => println!("rejected ({err})"),
        other => panic!("truncated message got through: {other:?}"),
    }

    // Cut inside the signature record itself and the message isn't even
    // well-formed — the record walk fails before any verification.
    print!("cut mid-signature: ");
    match sessions[1].receive_message(&out.wire[..40], ids[0]) {
        Err(SessionError::Wire(err)) => println!("rejected ({err})"),
        other => panic!("truncated message got through: {other:?}"),
    }

    // None of the rejects touched bob's state: the original still reads,
    // and the key it carried was only learned now.
    let seen = sessions[1].receive_message(&out.wire, ids[0])?;
    let (_, key_id, _) = seen
        .learned_keys
        .first()
        .expect("keyed message carries a key");
    println!(
        "\nthe genuine wire still reads: {:?} (key {key_id} learned just now)",
        String::from_utf8_lossy(seen.payload.as_deref().unwrap()),
    );

    Ok(())
}
