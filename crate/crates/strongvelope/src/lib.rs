//! Strongvelope: multi-party encrypted messaging over an untrusted,
//! ordered transport.
//!
//! Each participant encrypts with their own symmetric *sender key* and
//! distributes it to the group inside signed *keyed* messages — wrapped
//! per-recipient with a pairwise key derived from an X25519 exchange.
//! Subsequent *follow-up* messages just reference the key by ID, so the
//! common case costs one signature and one AES-CTR pass. Sender keys rotate
//! on a policy cadence and on every membership change, which is what gives
//! the protocol its forward/backward confidentiality at group boundaries:
//! newly included members cannot read older messages, excluded members
//! cannot read newer ones.
//!
//! The crate is organized bottom-up:
//!
//! - [`wire`] — the TLV message codec (version byte + type/length/value
//!   records) and its structural rules.
//! - [`crypto`] — the primitive layer: pairwise key derivation, key
//!   wrapping, payload encryption, message signatures.
//! - [`keystore`] — key IDs, the rotation policy, and the ring of learned
//!   sender keys.
//! - [`session`] — the protocol engine: one [`Session`] per participant
//!   builds outbound messages, verifies and absorbs inbound ones, stages
//!   membership changes, and reseeds from stored history.
//! - [`transport`] — an in-memory ordered chat room standing in for the
//!   real transport, with backward history pagination.
//! - [`dissect`] — a wire dissector for debugging and forensics.
//! - [`scenario`] — a line-oriented script harness driving whole groups,
//!   used by the CLI and the integration tests.
//!
//! # Quickstart
//!
//! ```
//! use std::collections::BTreeSet;
//! use strongvelope::crypto::{DhKeyPair, ParticipantId, SignKeyPair};
//! use strongvelope::keystore::RotationPolicy;
//! use strongvelope::session::{Directory, PublicKeys, Session};
//!
//! // Two identities, known to each other through a public-key directory.
//! let alice = ParticipantId::from_bytes(*b"alice\0\0\0");
//! let bob = ParticipantId::from_bytes(*b"bob\0\0\0\0\0");
//! let alice_sign = SignKeyPair::from_seed([1; 32]);
//! let alice_dh = DhKeyPair::from_secret_bytes([2; 32]);
//! let bob_sign = SignKeyPair::from_seed([3; 32]);
//! let bob_dh = DhKeyPair::from_secret_bytes([4; 32]);
//!
//! let mut directory = Directory::new();
//! directory.insert(alice, PublicKeys {
//!     signing: alice_sign.public_bytes(),
//!     dh: alice_dh.public_bytes(),
//! });
//! directory.insert(bob, PublicKeys {
//!     signing: bob_sign.public_bytes(),
//!     dh: bob_dh.public_bytes(),
//! });
//! let group: BTreeSet<ParticipantId> = [alice, bob].into_iter().collect();
//!
//! let mut alice_session = Session::new(
//!     alice, alice_sign, alice_dh,
//!     directory.clone(), group.clone(), RotationPolicy::default(),
//! )?;
//! let mut bob_session = Session::new(
//!     bob, bob_sign, bob_dh,
//!     directory, group, RotationPolicy::default(),
//! )?;
//!
//! // Alice's first message is keyed: it carries her fresh sender key,
//! // wrapped for Bob. He verifies, unwraps, and decrypts in one step.
//! let post = alice_session.send_message(Some(b"hello, bob"), 1_700_000_000)?;
//! let seen = bob_session.receive_message(&post.wire, alice)?;
//! assert_eq!(seen.payload.as_deref(), Some(&b"hello, bob"[..]));
//! # Ok::<(), strongvelope::session::SessionError>(())
//! ```
//!
//! # Runnable examples
//!
//! Each major capability has a self-contained example:
//!
//! ```bash
//! cargo run -p strongvelope --example group_chat         # three-party keyed/follow-up flow
//! cargo run -p strongvelope --example key_rotation       # policy-driven rotation and re-sends
//! cargo run -p strongvelope --example membership         # include/exclude with key boundaries
//! cargo run -p strongvelope --example history_seeding    # restoring a client from stored history
//! cargo run -p strongvelope --example dissect_wire       # taking a wire message apart
//! cargo run -p strongvelope --example tamper_detection   # what signature verification rejects
//! ```
//!
//! The `strongvelope` binary exposes the same machinery as a CLI: `keygen`,
//! `dissect`, and `scenario` (see `scenarios/` for script examples).

#![forbid(unsafe_code)]

pub mod crypto;
pub mod dissect;
pub mod keystore;
pub mod scenario;
pub mod session;
pub mod transport;
pub mod wire;

pub use crypto::{DhKeyPair, ParticipantId, SenderKey, SignKeyPair};
pub use dissect::{dissect, DissectReport};
pub use keystore::{KeyId, KeyRing, RotationPolicy};
pub use scenario::{run_script, ScenarioRun};
pub use session::{
    Directory, InboundResult, OutboundMessage, PublicKeys, SeedReport, Session, SessionError,
};
pub use transport::{ChatRoom, LoggedMessage, TransportError};
pub use wire::{MessageType, ProtocolMessage, RecordType, TlvRecord, WireError};
