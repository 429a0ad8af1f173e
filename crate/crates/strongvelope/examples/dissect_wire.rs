//! Taking a wire message apart without any key material.
//!
//! Everything but the payload bytes and the wrapped keys is visible to
//! anyone holding the ciphertext: the record layout, who the recipients
//! are, which key identifier the payload uses, and — given the sender's
//! public signing key — whether the signature checks out. The dissector
//! prints all of it.
//!
//! ```bash
//! cargo run -p strongvelope --example dissect_wire
//! ```

use std::collections::BTreeSet;

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha20Rng;
use strongvelope::crypto::{DhKeyPair, ParticipantId, SignKeyPair};
use strongvelope::dissect::dissect;
use strongvelope::keystore::RotationPolicy;
use strongvelope::session::{Directory, PublicKeys, Session, SessionError};

const EPOCH: u64 = 1_726_000_000;

fn pid(name: &str) -> ParticipantId {
    let mut bytes = [0u8; 8];
    bytes[..name.len()].copy_from_slice(name.as_bytes());
    ParticipantId::from_bytes(bytes)
}

fn main() -> Result<(), SessionError> {
    let ids = [pid("alice"), pid("bob"), pid("carol")];
    let identities: Vec<(SignKeyPair, DhKeyPair)> = (0..3u8)
        .map(|i| {
            (
                SignKeyPair::from_seed([i + 31; 32]),
                DhKeyPair::from_secret_bytes([i + 131; 32]),
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
    let alice_public = identities[0].0.public_bytes();
    let mut alice = Session::with_rng(
        ids[0],
        identities[0].0.clone(),
        identities[0].1.clone(),
        directory,
        BTreeSet::from(ids),
        RotationPolicy::default(),
        Box::new(ChaCha20Rng::seed_from_u64(7)),
    )?;

    let out = alice.send_message(Some(b"a message worth inspecting"), EPOCH + 60)?;
    println!("wire ({} bytes): {}\n", out.wire.len(), hex::encode(&out.wire));

    println!("-- without the sender's public key --\n");
    println!("{}", dissect(&out.wire, None).text);

    println!("-- with it --\n");
    let report = dissect(&out.wire, Some(&alice_public));
    println!("{}", report.text);
    assert_eq!(report.signature_valid, Some(true));

    // The same tooling is one CLI call away:
    println!(
        "same thing from the shell:\n  strongvelope dissect {} --pubkey {}",
        hex::encode(&out.wire),
        hex::encode(alice_public),
    );

    Ok(())
}
