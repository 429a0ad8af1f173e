//! The acceptance gate: one test per protocol-level guarantee this crate
//! makes. Each test prints a `criterion NN: PASS` line (visible with
//! `--nocapture`); the test name itself carries the criterion number, so
//! the ordinary test listing doubles as the report.
//!
//! Everything here runs deterministically from fixed seeds and finishes in
//! well under a minute.

use std::collections::BTreeSet;

use rand_chacha::rand_core::{RngCore, SeedableRng};
use rand_chacha::ChaCha20Rng;
use sha2::{Digest, Sha256};

use strongvelope::crypto::{
    decrypt_payload, derive_pairwise_key, derive_payload_nonce, derive_recipient_iv,
    encrypt_payload, sign_message, unwrap_sender_keys, verify_message, wrap_sender_keys,
    DhKeyPair, MasterNonce, PairwiseKey, ParticipantId, SenderKey, SignKeyPair,
};
use strongvelope::keystore::{new_key_id, KeyId, KeyStoreError, RotationPolicy};
use strongvelope::session::{Directory, PublicKeys, Session, SessionError};
use strongvelope::transport::ChatRoom;
use strongvelope::wire::{
    decode_message, encode_message, MessageType, ProtocolMessage, RecordType, TlvRecord,
};

const EPOCH: u64 = 1_726_000_000;

fn h(hex_str: &str) -> Vec<u8> {
    hex::decode(hex_str).expect("test vectors are valid hex")
}

fn arr<const N: usize>(hex_str: &str) -> [u8; N] {
    h(hex_str).try_into().expect("vector length")
}

fn pid(name: &str) -> ParticipantId {
    let mut bytes = [0u8; 8];
    bytes[..name.len()].copy_from_slice(name.as_bytes());
    ParticipantId::from_bytes(bytes)
}

/// A pool of deterministic identities plus the shared key directory; spawns
/// sessions on demand, each with its own derived randomness stream.
struct Net {
    salt: u64,
    directory: Directory,
    spawned: u64,
}

impl Net {
    fn new(names: &[&'static str], salt: u64) -> Net {
        let mut net = Net {
            salt,
            directory: Directory::new(),
            spawned: 0,
        };
        for name in names {
            let (sign, dh) = net.keys_for(name);
            net.directory.insert(
                pid(name),
                PublicKeys {
                    signing: sign.public_bytes(),
                    dh: dh.public_bytes(),
                },
            );
        }
        net
    }

    fn digest(&self, label: &str, name: &str, extra: u64) -> [u8; 32] {
        Sha256::new()
            .chain_update(label)
            .chain_update(name)
            .chain_update(self.salt.to_be_bytes())
            .chain_update(extra.to_be_bytes())
            .finalize()
            .into()
    }

    fn keys_for(&self, name: &str) -> (SignKeyPair, DhKeyPair) {
        (
            SignKeyPair::from_seed(self.digest("sign", name, 0)),
            DhKeyPair::from_secret_bytes(self.digest("dh", name, 0)),
        )
    }

    fn spawn(&mut self, name: &str, members: &[&str], policy: RotationPolicy) -> Session {
        let (sign, dh) = self.keys_for(name);
        let rng_seed = self.digest("rng", name, self.spawned);
        self.spawned += 1;
        Session::with_rng(
            pid(name),
            sign,
            dh,
            self.directory.clone(),
            members.iter().map(|n| pid(n)).collect::<BTreeSet<_>>(),
            policy,
            Box::new(ChaCha20Rng::from_seed(rng_seed)),
        )
        .expect("test groups are well-formed")
    }
}

#[test]
fn criterion_01_wire_round_trip_and_decode_robustness() {
    fn random_value(rng: &mut ChaCha20Rng, max_len: usize) -> Vec<u8> {
        let len = rng.next_u32() as usize % (max_len + 1);
        let mut value = vec![0u8; len];
        rng.fill_bytes(&mut value);
        value
    }

    let mut rng = ChaCha20Rng::seed_from_u64(0xC1);
    let loose_types = [
        RecordType::MessageType,
        RecordType::Nonce,
        RecordType::KeyIds,
        RecordType::IncParticipant,
        RecordType::ExcParticipant,
        RecordType::Payload,
        RecordType::OwnKey,
    ];

    for round in 0..10_000u32 {
        let signature = random_value(&mut rng, 80);
        let mut records = vec![TlvRecord::new(RecordType::Signature, signature)];
        for _ in 0..(round % 6) {
            let pick = rng.next_u32() as usize;
            if pick.is_multiple_of(3) {
                // KEYS and RECIPIENT must stay balanced, so they travel as a pair.
                let recipient = random_value(&mut rng, 16);
                let keys = random_value(&mut rng, 48);
                records.push(TlvRecord::new(RecordType::Recipient, recipient));
                records.push(TlvRecord::new(RecordType::Keys, keys));
            } else {
                let value = random_value(&mut rng, 64);
                records.push(TlvRecord::new(loose_types[pick % loose_types.len()], value));
            }
        }
        let message = ProtocolMessage::new(records);
        let wire = encode_message(&message).expect("generated messages are encodable");
        let back = decode_message(&wire).expect("own encoding must decode");
        assert_eq!(back, message, "round {round} did not round-trip");
    }

    let mut well_formed = 0u32;
    let mut rejected = 0u32;
    for _ in 0..10_000 {
        let blob = random_value(&mut rng, 300);
        match decode_message(&blob) {
            Ok(_) => well_formed += 1,
            Err(_) => rejected += 1,
        }
    }
    assert_eq!(well_formed + rejected, 10_000);

    println!(
        "criterion 01: PASS — 10000 messages round-tripped byte-exact; \
         10000 random blobs decoded without panic ({well_formed} ok, {rejected} typed errors)"
    );
}

#[test]
fn criterion_02_crypto_known_answers() {
    // X25519 + HKDF-SHA256(info = "strongvelope pairwise key") -> AES-128 key.
    let pairwise = [
        (
            "77076d0a7318a57d3c16c17251b26645df4c2f87ebc0992ab177fba51db92c2a",
            "de9edb7d7b7dc1b4d35b61c2ece435373f8343c85b78674dadfc7e146f882b4f",
            "057a86d37b314377b9f0a2392e2d9c54",
        ),
        (
            "1111111111111111111111111111111111111111111111111111111111111111",
            "0faa684ed28867b97f4a6a2dee5df8ce974e76b7018e3f22a1c4cf2678570f20",
            "75ef9db4e6d5a649110db0754282fcdb",
        ),
        (
            "a7a7a7a7a7a7a7a7a7a7a7a7a7a7a7a7a7a7a7a7a7a7a7a7a7a7a7a7a7a7a7a7",
            "d3baf56cb00bfcbb41a459bd640f05a77ed6110809bf5f21be1a08e51dff7409",
            "c7ed365a9cc4f3c25672b896db0e2f7a",
        ),
    ];
    for (secret, peer, expected) in pairwise {
        let own = DhKeyPair::from_secret_bytes(arr::<32>(secret));
        let key = derive_pairwise_key(&own, &arr::<32>(peer)).expect("contributory exchange");
        assert_eq!(key.as_bytes()[..], h(expected), "pairwise key mismatch");
    }

    // Recipient IV: HMAC-SHA256(master nonce, handle)[..16].
    let recipient_ivs = [
        (
            "00000000000000000000000000000000",
            "0000000000000000",
            "f375180aba92888401f1919be4a8715a",
        ),
        (
            "000102030405060708090a0b0c0d0e0f",
            "616c696365000000",
            "50108ab6371ab3ec34a61999e8e289e4",
        ),
        (
            "f0e1d2c3b4a5968778695a4b3c2d1e0f",
            "0123456789abcdef",
            "33ac61a03040280aff9e57acbb9a4a3a",
        ),
    ];
    for (nonce, handle, expected) in recipient_ivs {
        let nonce = MasterNonce::from_bytes(arr::<16>(nonce));
        let recipient = ParticipantId::from_bytes(arr::<8>(handle));
        assert_eq!(
            derive_recipient_iv(&nonce, recipient)[..],
            h(expected),
            "recipient IV mismatch"
        );
    }

    // Payload nonce: HMAC-SHA256(master nonce, "payload")[..12].
    let payload_nonces = [
        ("00000000000000000000000000000000", "f81a95af381879c33f964c58"),
        ("000102030405060708090a0b0c0d0e0f", "d8b108b7376e51ac05c6dcc3"),
        ("f0e1d2c3b4a5968778695a4b3c2d1e0f", "71cc9dcfebdd0ccf0a90a553"),
    ];
    for (nonce, expected) in payload_nonces {
        let nonce = MasterNonce::from_bytes(arr::<16>(nonce));
        assert_eq!(
            derive_payload_nonce(&nonce)[..],
            h(expected),
            "payload nonce mismatch"
        );
    }

    // Key wrap: AES-128-CBC without padding.
    let wraps = [
        (
            "00000000000000000000000000000000",
            "00000000000000000000000000000000",
            "00000000000000000000000000000000",
            "66e94bd4ef8a2c3b884cfa59ca342b2e",
        ),
        (
            "2b7e151628aed2a6abf7158809cf4f3c",
            "000102030405060708090a0b0c0d0e0f",
            "6bc1bee22e409f96e93d7e117393172aae2d8a571e03ac9c9eb76fac45af8e51",
            "7649abac8119b246cee98e9b12e9197d5086cb9b507219ee95db113a917678b2",
        ),
        (
            "aabbccddeeff00112233445566778899",
            "99887766554433221100ffeeddccbbaa",
            "00112233445566778899aabbccddeeff",
            "424bac0f75e2c3ab84477255cecb0126",
        ),
    ];
    for (key, iv, plaintext, expected) in wraps {
        let pairwise = PairwiseKey::from_bytes(arr::<16>(key));
        let iv = arr::<16>(iv);
        let wrapped = wrap_sender_keys(&h(plaintext), &pairwise, &iv).expect("whole blocks");
        assert_eq!(wrapped, h(expected), "CBC wrap mismatch");
        let unwrapped = unwrap_sender_keys(&wrapped, &pairwise, &iv).expect("whole blocks");
        let plain = h(plaintext);
        assert_eq!(unwrapped.current.as_bytes()[..], plain[..16]);
        match unwrapped.previous {
            Some(previous) => assert_eq!(previous.as_bytes()[..], plain[16..]),
            None => assert_eq!(plain.len(), 16),
        }
    }

    // Payload cipher: AES-128-CTR, counter block = nonce12 || u32 BE from 0.
    let payloads = [
        (
            "00000000000000000000000000000000",
            "000000000000000000000000",
            "00000000000000000000000000000000",
            "66e94bd4ef8a2c3b884cfa59ca342b2e",
        ),
        (
            "2b7e151628aed2a6abf7158809cf4f3c",
            "f0f1f2f3f4f5f6f7f8f9fafb",
            "54686520717569636b2062726f776e20666f78206a756d7073206f766572207468",
            "1d4cf47328ed934775dba97175c96847252eee0551ac374e474ed3000d678f4d6d",
        ),
        (
            "000102030405060708090a0b0c0d0e0f",
            "0b0c0d0e0f101112131415f0",
            "000102030405060708090a0b0c0d0e0f101112131415161718191a1b1c1d1e1f202122232425262728292a2b2c2d2e2f3031",
            "721ad7b0bd127bffeb7b3a3bf40010e572e04fea531a7146b6b6ed8bffbaa4db49ae5333bb8fa120ac5d146cfef1386f9422",
        ),
    ];
    for (key, nonce, plaintext, expected) in payloads {
        let key = SenderKey::from_bytes(arr::<16>(key));
        let nonce = arr::<12>(nonce);
        let ciphertext = encrypt_payload(&h(plaintext), &key, &nonce);
        assert_eq!(ciphertext, h(expected), "CTR mismatch");
        assert_eq!(decrypt_payload(&ciphertext, &key, &nonce), h(plaintext));
    }

    // Prefixed Ed25519: signature over "strongvelopesig" || body.
    let signatures = [
        (
            "9d61b19deffd5a60ba844af492ec2cc44449c5697b326919703bac031cae7f60",
            "d75a980182b10ab7d54bfed3c964073a0ee172f3daa62325af021a68f707511a",
            "",
            "3d2e15ed962b0e7bc11f373568e9c702d5b271beae89855c1f1a9fd4881cf4fdfe3b78316dee28bf7832483607d34a46cbc9b1737c6041366b0d6adea2634a05",
        ),
        (
            "4ccd089b28ff96da9db6c346ec114e0f5b8a319f35aba624da8cf6ed4fb8a6fb",
            "3d4017c3e843895a92b70aa74d1b7ebc9c982ccf2ec4968cc0cd55f12af4660c",
            "72",
            "69eb930890e688eff0ad58a78a4f1e9f40e0665c98e1261843159a128e2fbcd5f2a1170d2e95d0a2b78da49c39e3451038a28c5e6541e89166f895062781a70e",
        ),
        (
            "c5aa8df43f9f837bedb7442f31dcb7b166d38535076f094b85ce3a2e0b4458f7",
            "fc51cd8e6218a1a38da47ed00230f0580816ed13ba3303ac5deb911548908025",
            "0200010067726f7570206d65737361676520626f6479",
            "fdf666504771736aa6c3e31d67f81fa71271e783ae107f6839d0108e8fbf311ea4c644729dd4e93bda3b99cf2b3c3c63d075c1708b9b46f1b6e542f1ce513e06",
        ),
    ];
    for (seed, public, body, expected) in signatures {
        let keys = SignKeyPair::from_seed(arr::<32>(seed));
        assert_eq!(keys.public_bytes()[..], h(public), "derived public key");
        let signature = sign_message(&h(body), &keys);
        assert_eq!(signature[..], h(expected), "signature mismatch");
        assert!(verify_message(&h(body), &signature, &arr::<32>(public)));
    }

    println!(
        "criterion 02: PASS — 6 primitive families, 3 oracle vectors each, byte-exact \
         (pairwise key, recipient IV, payload nonce, CBC wrap, CTR payload, prefixed Ed25519)"
    );
}

#[test]
fn criterion_03_three_party_end_to_end() {
    let names = ["alice", "bob", "carol"];
    let mut net = Net::new(&names, 3);
    let mut sessions: Vec<Session> = names
        .iter()
        .map(|name| net.spawn(name, &names, RotationPolicy::default()))
        .collect();
    let ids: Vec<ParticipantId> = names.iter().map(|n| pid(n)).collect();

    let mut keyed = 0u32;
    let mut followup = 0u32;
    let mut decryptions = 0u32;
    for i in 0..100u64 {
        let sender = (i % 3) as usize;
        let text = format!("message {i} from {}", names[sender]);
        let out = sessions[sender]
            .send_message(Some(text.as_bytes()), EPOCH + i * 30)
            .expect("send must succeed");
        match out.message_type {
            MessageType::GroupKeyed => keyed += 1,
            MessageType::GroupFollowup => followup += 1,
            MessageType::AlterParticipants => panic!("no membership changes were staged"),
        }
        for (receiver, session) in sessions.iter_mut().enumerate() {
            if receiver == sender {
                continue;
            }
            let seen = session
                .receive_message(&out.wire, ids[sender])
                .expect("receive must succeed");
            assert!(seen.addressed, "every participant is addressed");
            assert_eq!(
                seen.payload.as_deref(),
                Some(text.as_bytes()),
                "payload must decrypt to the original bytes"
            );
            decryptions += 1;
        }
    }

    assert_eq!(keyed + followup, 100);
    assert!(keyed >= 3, "each participant rotates at least once");
    assert!(followup > keyed, "follow-ups dominate steady-state traffic");
    assert_eq!(decryptions, 200);
    println!(
        "criterion 03: PASS — 100 messages across 3 participants \
         ({keyed} keyed, {followup} follow-up), {decryptions}/200 decryptions byte-exact"
    );
}

#[test]
fn criterion_04_rotation_every_16_sent() {
    let names = ["alice", "bob"];
    let mut net = Net::new(&names, 4);
    let mut alice = net.spawn("alice", &names, RotationPolicy::default());
    let mut bob = net.spawn("bob", &names, RotationPolicy::default());

    let mut types = Vec::new();
    for n in 1..=17u64 {
        let out = alice
            .send_message(Some(format!("send {n}").as_bytes()), EPOCH + n * 30)
            .expect("send");
        bob.receive_message(&out.wire, pid("alice")).expect("receive");
        types.push(out.message_type);
    }

    assert_eq!(types[0], MessageType::GroupKeyed, "1st send distributes the key");
    for (index, message_type) in types.iter().enumerate().take(16).skip(1) {
        assert_eq!(
            *message_type,
            MessageType::GroupFollowup,
            "send {} must be a follow-up",
            index + 1
        );
    }
    assert_eq!(types[16], MessageType::GroupKeyed, "17th send rotates");
    println!(
        "criterion 04: PASS — sends 1 and 17 were GROUP_KEYED, sends 2-16 were GROUP_FOLLOWUP \
         (rotate-after-sent = 16)"
    );
}

#[test]
fn criterion_05_resend_after_30_received() {
    let names = ["alice", "bob"];
    let mut net = Net::new(&names, 5);
    let mut alice = net.spawn("alice", &names, RotationPolicy::default());
    let mut bob = net.spawn("bob", &names, RotationPolicy::default());

    let first = alice
        .send_message(Some(b"hello"), EPOCH)
        .expect("first send");
    assert_eq!(first.message_type, MessageType::GroupKeyed);
    bob.receive_message(&first.wire, pid("alice")).expect("receive");

    // Alice goes silent and reads 30 messages.
    for n in 1..=30u64 {
        let out = bob
            .send_message(Some(format!("bob {n}").as_bytes()), EPOCH + n * 30)
            .expect("send");
        let seen = alice
            .receive_message(&out.wire, pid("bob"))
            .expect("receive");
        assert_eq!(seen.payload.as_deref(), Some(format!("bob {n}").as_bytes()));
    }

    let next = alice
        .send_message(Some(b"still here"), EPOCH + 31 * 30)
        .expect("send");
    assert_eq!(
        next.message_type,
        MessageType::GroupKeyed,
        "after 30 received messages the next send must re-distribute the key"
    );
    println!(
        "criterion 05: PASS — sender silent through 30 received messages re-keyed on its next \
         send (resend-after-total = 30)"
    );
}

#[test]
fn criterion_06_seeding_batches_and_rotation_fallback() {
    let names = ["alice", "bob", "dora"];
    let mut net = Net::new(&names, 6);
    let chat = ["alice", "bob"];
    let policy = RotationPolicy::default();
    let mut alice = net.spawn("alice", &chat, policy);
    let mut bob = net.spawn("bob", &chat, policy);
    let mut room = ChatRoom::with_members([pid("alice"), pid("bob")]);

    // 60 alternating messages, then 40 from bob alone, so alice's newest
    // keyed message sits well over one batch back from the end.
    let mut alice_last_keyed: Option<(u64, KeyId)> = None;
    for i in 0..100u64 {
        let from_alice = i < 60 && i % 2 == 0;
        let text = format!("history {i}");
        let (out, sender) = if from_alice {
            (alice.send_message(Some(text.as_bytes()), EPOCH + i * 30), pid("alice"))
        } else {
            (bob.send_message(Some(text.as_bytes()), EPOCH + i * 30), pid("bob"))
        };
        let out = out.expect("send");
        let seq = room.post(sender, out.wire.clone()).expect("post");
        if from_alice {
            bob.receive_message(&out.wire, sender).expect("receive");
            if out.message_type == MessageType::GroupKeyed {
                alice_last_keyed = Some((seq, out.key_id));
            }
        } else {
            alice.receive_message(&out.wire, sender).expect("receive");
        }
    }
    let (keyed_seq, keyed_id) = alice_last_keyed.expect("alice rotated at least once");
    let distance = (room.len() as u64 - keyed_seq) as usize;
    assert!(
        distance > 32,
        "layout check: alice's newest key must be over one batch back, got {distance}"
    );

    // A fresh client with alice's identity seeds backwards in batches of 32.
    let batch = policy.history_batch() as usize;
    let mut fresh = net.spawn("alice", &chat, policy);
    let mut before = None;
    let mut batches = 0usize;
    let mut found = false;
    while !found {
        let page = room.fetch_history(before, batch);
        if page.is_empty() {
            break;
        }
        let first_seq = page.first().expect("nonempty").seq;
        let messages: Vec<(ParticipantId, Vec<u8>)> =
            page.iter().map(|m| (m.sender, m.wire.clone())).collect();
        batches += 1;
        found = fresh.seed_from_history(&messages).own_key_found;
        before = Some(first_seq);
    }
    let allowed = distance.div_ceil(batch);
    assert!(found, "alice's key must be recoverable from history");
    assert!(
        batches <= allowed,
        "took {batches} batches, allowed ceil({distance}/{batch}) = {allowed}"
    );
    let (recovered_id, _) = fresh.ring().own_current().expect("own key recovered");
    assert_eq!(recovered_id, keyed_id, "the newest own key wins");

    // A client that never sent finds nothing and simply rotates when it speaks.
    let mut dora = net.spawn("dora", &names, policy);
    let mut before = None;
    let mut dora_found = false;
    loop {
        let page = room.fetch_history(before, batch);
        if page.is_empty() {
            break;
        }
        let first_seq = page.first().expect("nonempty").seq;
        let messages: Vec<(ParticipantId, Vec<u8>)> =
            page.iter().map(|m| (m.sender, m.wire.clone())).collect();
        dora_found = dora.seed_from_history(&messages).own_key_found;
        if dora_found {
            break;
        }
        before = Some(first_seq);
    }
    assert!(!dora_found, "dora never sent, so history holds no key of hers");
    let out = dora
        .send_message(Some(b"first words"), EPOCH + 101 * 30)
        .expect("send");
    assert_eq!(
        out.message_type,
        MessageType::GroupKeyed,
        "with no recovered key the next send must rotate"
    );

    println!(
        "criterion 06: PASS — key {distance} messages deep recovered in {batches} \
         batch(es) (allowed {allowed}); keyless client rotated on next send"
    );
}

#[test]
fn criterion_07_inclusion_is_backward_confidential() {
    let names = ["alice", "bob", "carol", "dave"];
    let chat = ["alice", "bob", "carol"];
    let mut net = Net::new(&names, 7);
    let policy = RotationPolicy::default();
    let mut sessions: Vec<Session> = chat
        .iter()
        .map(|name| net.spawn(name, &chat, policy))
        .collect();
    let ids: Vec<ParticipantId> = chat.iter().map(|n| pid(n)).collect();

    // Pre-inclusion traffic: every key ID issued in this phase is recorded.
    let mut pre_wires: Vec<(ParticipantId, Vec<u8>)> = Vec::new();
    let mut pre_ids: BTreeSet<(ParticipantId, KeyId)> = BTreeSet::new();
    let mut clock = EPOCH;
    for i in 0..12u64 {
        let sender = (i % 3) as usize;
        clock += 30;
        let out = sessions[sender]
            .send_message(Some(format!("before {i}").as_bytes()), clock)
            .expect("send");
        pre_ids.insert((ids[sender], out.key_id));
        for (receiver, session) in sessions.iter_mut().enumerate() {
            if receiver != sender {
                session
                    .receive_message(&out.wire, ids[sender])
                    .expect("receive");
            }
        }
        pre_wires.push((ids[sender], out.wire));
    }

    // Alice includes dave; the announcement itself travels as an alter.
    sessions[0]
        .alter_participants(&[pid("dave")], &[])
        .expect("stage inclusion");
    clock += 30;
    let alter = sessions[0]
        .send_message(Some(b"welcome dave"), clock)
        .expect("send alter");
    assert_eq!(alter.message_type, MessageType::AlterParticipants);
    let mut dave = net.spawn("dave", &names, policy);
    for session in sessions.iter_mut().skip(1) {
        session
            .receive_message(&alter.wire, ids[0])
            .expect("receive");
    }
    let seen = dave
        .receive_message(&alter.wire, ids[0])
        .expect("dave receives his inclusion");
    assert!(seen.addressed);
    assert_eq!(seen.payload.as_deref(), Some(&b"welcome dave"[..]));

    // Post-inclusion traffic with all four speaking, dave included.
    for i in 0..12u64 {
        clock += 30;
        let sender = (i % 4) as usize;
        let text = format!("after {i}");
        let (out, sender_id) = if sender == 3 {
            (dave.send_message(Some(text.as_bytes()), clock), pid("dave"))
        } else {
            (
                sessions[sender].send_message(Some(text.as_bytes()), clock),
                ids[sender],
            )
        };
        let out = out.expect("send");
        for receiver in 0..3 {
            if ids[receiver] != sender_id {
                let seen = sessions[receiver]
                    .receive_message(&out.wire, sender_id)
                    .expect("receive");
                assert_eq!(seen.payload.as_deref(), Some(text.as_bytes()));
            }
        }
        if sender != 3 {
            let seen = dave
                .receive_message(&out.wire, sender_id)
                .expect("dave receives");
            assert_eq!(seen.payload.as_deref(), Some(text.as_bytes()));
        }
    }

    // Dave's ring must contain nothing from before his inclusion.
    let ring_ids: Vec<(ParticipantId, KeyId)> = dave.ring().known().collect();
    assert!(!ring_ids.is_empty());
    for slot in &ring_ids {
        assert!(
            !pre_ids.contains(slot),
            "dave must hold no pre-inclusion key, found {slot:?}"
        );
    }

    // And replaying the earlier wires gets him nothing but missing-key.
    let mut plaintexts = 0usize;
    let mut missing = 0usize;
    let mut unaddressed = 0usize;
    for (sender, wire) in &pre_wires {
        match dave.receive_message(wire, *sender) {
            Ok(result) => {
                assert!(!result.addressed, "pre-inclusion wires cannot address dave");
                if result.payload.is_some() {
                    plaintexts += 1;
                } else {
                    unaddressed += 1;
                }
            }
            Err(SessionError::MissingKey { .. }) => missing += 1,
            Err(other) => panic!("unexpected failure on replay: {other}"),
        }
    }
    assert_eq!(plaintexts, 0, "no pre-inclusion wire may yield a plaintext");
    assert_eq!(missing + unaddressed, pre_wires.len());

    println!(
        "criterion 07: PASS — included member holds {} key slots, none pre-inclusion; \
         {} earlier wires replayed: {missing} missing-key, {unaddressed} not addressed, 0 plaintexts",
        ring_ids.len(),
        pre_wires.len()
    );
}

#[test]
fn criterion_08_exclusion_is_forward_confidential() {
    let names = ["alice", "bob", "carol"];
    let mut net = Net::new(&names, 8);
    let policy = RotationPolicy::default();
    let mut alice = net.spawn("alice", &names, policy);
    let mut bob = net.spawn("bob", &names, policy);
    let mut carol = net.spawn("carol", &names, policy);
    let carol_id = pid("carol");

    // Pre-exclusion traffic carol can read.
    let mut clock = EPOCH;
    for i in 0..9u64 {
        clock += 30;
        let text = format!("open {i}");
        let (out, sender) = match i % 3 {
            0 => (alice.send_message(Some(text.as_bytes()), clock), pid("alice")),
            1 => (bob.send_message(Some(text.as_bytes()), clock), pid("bob")),
            _ => (carol.send_message(Some(text.as_bytes()), clock), carol_id),
        };
        let out = out.expect("send");
        for (id, session) in [
            (pid("alice"), &mut alice),
            (pid("bob"), &mut bob),
            (carol_id, &mut carol),
        ] {
            if id != sender {
                let seen = session.receive_message(&out.wire, sender).expect("receive");
                assert_eq!(seen.payload.as_deref(), Some(text.as_bytes()));
            }
        }
    }

    // Alice excludes carol. From here on, every wire is checked.
    alice
        .alter_participants(&[], &[carol_id])
        .expect("stage exclusion");
    let mut post_wires: Vec<(ParticipantId, Vec<u8>)> = Vec::new();
    let mut post_ids: BTreeSet<(ParticipantId, KeyId)> = BTreeSet::new();
    for i in 0..12u64 {
        clock += 30;
        let text = format!("closed {i}");
        let (out, sender) = if i % 2 == 0 {
            (alice.send_message(Some(text.as_bytes()), clock), pid("alice"))
        } else {
            (bob.send_message(Some(text.as_bytes()), clock), pid("bob"))
        };
        let out = out.expect("send");
        post_ids.insert((sender, out.key_id));
        let receiver = if sender == pid("alice") { &mut bob } else { &mut alice };
        let seen = receiver.receive_message(&out.wire, sender).expect("receive");
        assert_eq!(seen.payload.as_deref(), Some(text.as_bytes()));
        post_wires.push((sender, out.wire));
    }

    // No post-exclusion wire addresses carol or wraps a key for her.
    for (_, wire) in &post_wires {
        let message = decode_message(wire).expect("honest wires decode");
        for recipient in message.all(RecordType::Recipient) {
            assert_ne!(
                recipient,
                carol_id.as_bytes().as_slice(),
                "an excluded member must never appear as a recipient"
            );
        }
    }

    // Carol reads along and gets nothing.
    let mut plaintexts = 0usize;
    let mut missing = 0usize;
    let mut unaddressed = 0usize;
    for (sender, wire) in &post_wires {
        match carol.receive_message(wire, *sender) {
            Ok(result) => {
                assert!(!result.addressed);
                if result.payload.is_some() {
                    plaintexts += 1;
                } else {
                    unaddressed += 1;
                }
            }
            Err(SessionError::MissingKey { .. }) => missing += 1,
            Err(other) => panic!("unexpected failure for excluded member: {other}"),
        }
    }
    assert_eq!(plaintexts, 0, "no post-exclusion wire may yield a plaintext");
    assert_eq!(missing + unaddressed, post_wires.len());

    // Her ring never gains a post-exclusion key.
    for slot in carol.ring().known() {
        assert!(
            !post_ids.contains(&slot),
            "excluded member must hold no post-exclusion key, found {slot:?}"
        );
    }

    println!(
        "criterion 08: PASS — {} post-exclusion wires: 0 RECIPIENT records for the excluded \
         member, 0 plaintexts ({missing} missing-key, {unaddressed} not addressed), ring clean",
        post_wires.len()
    );
}

#[test]
fn criterion_09_any_tamper_after_the_signature_is_rejected() {
    let names = ["alice", "bob", "carol"];
    let chat = ["alice", "bob"];
    let mut net = Net::new(&names, 9);
    let policy = RotationPolicy::default();
    let mut alice = net.spawn("alice", &chat, policy);
    let mut bob = net.spawn("bob", &chat, policy);
    let alice_id = pid("alice");

    // A corpus covering every message shape: keyed, follow-up, alter, blind.
    let keyed = alice.send_message(Some(b"attack at dawn"), EPOCH).expect("send");
    bob.receive_message(&keyed.wire, alice_id).expect("receive");
    let followup = alice
        .send_message(Some(b"correction: dusk"), EPOCH + 30)
        .expect("send");
    bob.receive_message(&followup.wire, alice_id).expect("receive");
    alice
        .alter_participants(&[pid("carol")], &[])
        .expect("stage");
    let alter = alice
        .send_message(Some(b"carol joins"), EPOCH + 60)
        .expect("send");
    bob.receive_message(&alter.wire, alice_id).expect("receive");
    let blind = {
        let mut fresh = net.spawn("alice", &chat, policy);
        fresh.send_message(None, EPOCH + 90).expect("blind keyed send")
    };

    assert_eq!(keyed.message_type, MessageType::GroupKeyed);
    assert_eq!(followup.message_type, MessageType::GroupFollowup);
    assert_eq!(alter.message_type, MessageType::AlterParticipants);
    assert_eq!(blind.message_type, MessageType::GroupKeyed);

    let mut flips = 0usize;
    for wire in [&keyed.wire, &followup.wire, &alter.wire, &blind.wire] {
        let span_len = strongvelope::wire::signed_span(wire).expect("well-formed").len();
        let span_start = wire.len() - span_len;
        for position in span_start..wire.len() {
            let mut tampered = wire.clone();
            tampered[position] ^= 0x01;
            match bob.receive_message(&tampered, alice_id) {
                Err(SessionError::BadSignature { .. }) => flips += 1,
                Ok(_) => panic!("byte {position} flipped yet the message was accepted"),
                Err(other) => panic!("byte {position}: rejected, but not by the signature: {other}"),
            }
        }
    }

    // The receiver survives the barrage untouched and still reads clean mail.
    let clean = alice
        .send_message(Some(b"as you were"), EPOCH + 120)
        .expect("send");
    let seen = bob.receive_message(&clean.wire, alice_id).expect("receive");
    assert_eq!(seen.payload.as_deref(), Some(&b"as you were"[..]));

    println!(
        "criterion 09: PASS — {flips} single-byte flips across 4 message shapes, \
         100% rejected as signature failures; receiver state intact"
    );
}

#[test]
fn criterion_10_key_ids_increase_and_overflow_errors() {
    let mut now = EPOCH;
    let mut last: Option<KeyId> = None;
    let mut issued = 0u32;
    let mut day_jumps = 0u32;
    for i in 0..10_000u64 {
        if i % 7 == 3 {
            now += 86_400 * (1 + i % 3);
            day_jumps += 1;
        } else {
            now += 17;
        }
        let id = new_key_id(now, last).expect("fresh IDs while the clock moves forward");
        if let Some(previous) = last {
            assert!(
                id.to_bytes() > previous.to_bytes(),
                "IDs must be strictly increasing as big-endian bytes: {previous} then {id}"
            );
        }
        last = Some(id);
        issued += 1;
    }
    assert_eq!(issued, 10_000);

    let day = (now / 86_400) as u16;
    let exhausted = KeyId::new(day, u16::MAX);
    match new_key_id(now, Some(exhausted)) {
        Err(KeyStoreError::CounterOverflow { day: reported }) => assert_eq!(reported, day),
        other => panic!("expected the counter-overflow error, got {other:?}"),
    }

    println!(
        "criterion 10: PASS — 10000 sequential IDs strictly increasing across {day_jumps} \
         day boundaries; within-day counter overflow raised the typed error"
    );
}
