//! Group messaging sessions: the protocol state machine for one participant
//! in one chat.
//!
//! A session owns the participant's identity keys, its view of the group
//! composition, the ring of sender keys, and the counters that drive the
//! rotation policy. [`Session::send_message`] picks the cheapest legal
//! message form:
//!
//! * staged membership changes force an ALTER_PARTICIPANTS message — a keyed
//!   message that also announces the deltas;
//! * a missing sender key, a rotation that has come due, or a reminder for
//!   quiet participants forces a GROUP_KEYED message;
//! * otherwise a GROUP_FOLLOWUP references the current key by ID and carries
//!   only the encrypted payload.
//!
//! Receiving verifies the signature over the signed span *before* trusting
//! any structure past the leading signature record, so a corrupted length
//! field deeper in the message can tear the record stream without ever being
//! parsed as content. [`Session::receive_message`] is transactional: it
//! either succeeds or leaves the session state untouched.
//!
//! Membership changes deliberately take effect lazily. Staging them only
//! marks intent; the change rides out with the next keyed message, and
//! receivers fold the announced deltas into their own pending sets (skipping
//! whatever they have already applied) so that each participant re-announces
//! the change exactly once, with a fresh key that excludes the removed
//! members. A client resuming from an empty state rebuilds its key ring from
//! stored history via [`Session::seed_from_history`].

use std::collections::{BTreeMap, BTreeSet};

use rand_core::CryptoRngCore;
use thiserror::Error;

use crate::crypto::{
    decrypt_payload, derive_pairwise_key, derive_payload_nonce, derive_recipient_iv,
    encrypt_payload, sign_message, unwrap_sender_keys, verify_message, wrap_sender_keys,
    CryptoError, DhKeyPair, MasterNonce, ParticipantId, SenderKey, SignKeyPair,
    HANDLE_LEN, MASTER_NONCE_LEN,
};
use crate::keystore::{
    due_actions, KeyId, KeyRing, KeyStoreError, RotationPolicy, KEY_ID_LEN,
};
use crate::wire::{
    decode_message, encode_message, encode_records, split_signature, MessageType,
    ProtocolMessage, RecordType, TlvRecord, WireError, MAX_VALUE_LEN,
};

/// The public half of a participant's identity: Ed25519 verification key and
/// X25519 key-agreement key. How these are distributed and authenticated is
/// outside this crate's scope; sessions take a ready-made directory.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PublicKeys {
    pub signing: [u8; 32],
    pub dh: [u8; 32],
}

/// Who a session can talk to: every participant's public keys, own included.
pub type Directory = BTreeMap<ParticipantId, PublicKeys>;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum SessionError {
    #[error("wire format: {0}")]
    Wire(#[from] WireError),
    #[error("crypto: {0}")]
    Crypto(#[from] CryptoError),
    #[error("key store: {0}")]
    KeyStore(#[from] KeyStoreError),
    #[error("signature verification failed for message claimed to be from {sender}")]
    BadSignature { sender: ParticipantId },
    #[error("no public keys known for participant {0}")]
    UnknownParticipant(ParticipantId),
    #[error("a group message needs at least one other participant")]
    NoOtherParticipants,
    #[error("a follow-up message must carry a payload; only keyed messages may be blind")]
    BlindFollowup,
    #[error("no current sender key; a keyed message has to go out first")]
    NoCurrentKey,
    #[error("payload of {0} bytes exceeds the wire limit of {MAX_VALUE_LEN} bytes")]
    PayloadTooLong(usize),
    #[error("message carries no {0} record")]
    MissingRecord(&'static str),
    #[error("{record} record value is {got} bytes; expected {expected}")]
    BadRecordValue {
        record: &'static str,
        expected: &'static str,
        got: usize,
    },
    #[error("unknown message type code {0:#04x}")]
    UnknownMessageType(u8),
    #[error("KEYS record carries a previous key but KEY_IDS names no previous ID")]
    PreviousKeyWithoutId,
    #[error("no sender key known for {sender} under key ID {id}")]
    MissingKey { sender: ParticipantId, id: KeyId },
    #[error("{0} is already a participant")]
    AlreadyParticipant(ParticipantId),
    #[error("{0} is not a participant and cannot be excluded")]
    NotAParticipant(ParticipantId),
    #[error("cannot exclude oneself; leave the chat instead")]
    ExcludeSelf,
    #[error("{0} appears in both the include and the exclude set")]
    IncludeExcludeOverlap(ParticipantId),
}

/// A message built by this session, ready to post.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct OutboundMessage {
    pub wire: Vec<u8>,
    pub message_type: MessageType,
    /// The sender-key ID the payload (if any) is encrypted under.
    pub key_id: KeyId,
}

/// What a received message meant for this session.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct InboundResult {
    pub sender: ParticipantId,
    pub message_type: MessageType,
    /// `false` when the message carried keys but none for this client (and
    /// it was not our own): such messages are skipped, with no state change
    /// beyond the received-message counter.
    pub addressed: bool,
    /// Decrypted payload; `None` for blind messages and skipped ones.
    pub payload: Option<Vec<u8>>,
    /// Sender keys learned from this message, in `(sender, id, key)` form.
    pub learned_keys: Vec<(ParticipantId, KeyId, SenderKey)>,
    /// Participants the message announced as included / excluded.
    pub included: BTreeSet<ParticipantId>,
    pub excluded: BTreeSet<ParticipantId>,
}

/// Outcome of seeding from one batch of history.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SeedReport {
    /// Whether an own sender key is (now) held. Once true, seeding can stop;
    /// while false, the caller should fetch an older batch, and a client
    /// whose history is exhausted without a hit simply rotates on its next
    /// send.
    pub own_key_found: bool,
    /// One line per message that could not be used, and why. Malformed
    /// history is diagnosed and skipped, never fatal.
    pub diagnostics: Vec<String>,
}

/// Per-participant protocol state for one chat.
pub struct Session {
    me: ParticipantId,
    sign_keys: SignKeyPair,
    dh_keys: DhKeyPair,
    directory: Directory,
    participants: BTreeSet<ParticipantId>,
    pending_include: BTreeSet<ParticipantId>,
    pending_exclude: BTreeSet<ParticipantId>,
    ring: KeyRing,
    /// Group composition snapshotted when the current / previous own key was
    /// minted: exactly the participants those keys were distributed to.
    current_holders: BTreeSet<ParticipantId>,
    previous_holders: BTreeSet<ParticipantId>,
    sent_since_keyed: u32,
    total_since_keyed: u32,
    policy: RotationPolicy,
    rng: Box<dyn CryptoRngCore>,
}

impl std::fmt::Debug for Session {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Session")
            .field("me", &self.me)
            .field("participants", &self.participants)
            .field("pending_include", &self.pending_include)
            .field("pending_exclude", &self.pending_exclude)
            .field("sent_since_keyed", &self.sent_since_keyed)
            .field("total_since_keyed", &self.total_since_keyed)
            .finish_non_exhaustive()
    }
}

impl Session {
    /// Creates a session using the operating system's RNG.
    ///
    /// `participants` is the current group composition; the own ID is added
    /// implicitly. Every *other* participant must appear in `directory` (the
    /// own entry is filled in from the key pairs).
    pub fn new(
        me: ParticipantId,
        sign_keys: SignKeyPair,
        dh_keys: DhKeyPair,
        directory: Directory,
        participants: BTreeSet<ParticipantId>,
        policy: RotationPolicy,
    ) -> Result<Session, SessionError> {
        Session::with_rng(
            me,
            sign_keys,
            dh_keys,
            directory,
            participants,
            policy,
            Box::new(rand_core::OsRng),
        )
    }

    /// Creates a session drawing all randomness (keys, nonces) from the
    /// given RNG — the deterministic variant used by tests and the scenario
    /// runner.
    pub fn with_rng(
        me: ParticipantId,
        sign_keys: SignKeyPair,
        dh_keys: DhKeyPair,
        mut directory: Directory,
        mut participants: BTreeSet<ParticipantId>,
        policy: RotationPolicy,
        rng: Box<dyn CryptoRngCore>,
    ) -> Result<Session, SessionError> {
        participants.insert(me);
        directory.insert(
            me,
            PublicKeys {
                signing: sign_keys.public_bytes(),
                dh: dh_keys.public_bytes(),
            },
        );
        for participant in &participants {
            if !directory.contains_key(participant) {
                return Err(SessionError::UnknownParticipant(*participant));
            }
        }
        Ok(Session {
            me,
            sign_keys,
            dh_keys,
            directory,
            participants,
            pending_include: BTreeSet::new(),
            pending_exclude: BTreeSet::new(),
            ring: KeyRing::new(),
            current_holders: BTreeSet::new(),
            previous_holders: BTreeSet::new(),
            sent_since_keyed: 0,
            total_since_keyed: 0,
            policy,
            rng,
        })
    }

    pub fn me(&self) -> ParticipantId {
        self.me
    }

    /// Current group composition as this session sees it (self included).
    pub fn participants(&self) -> &BTreeSet<ParticipantId> {
        &self.participants
    }

    pub fn pending_include(&self) -> &BTreeSet<ParticipantId> {
        &self.pending_include
    }

    pub fn pending_exclude(&self) -> &BTreeSet<ParticipantId> {
        &self.pending_exclude
    }

    pub fn ring(&self) -> &KeyRing {
        &self.ring
    }

    pub fn policy(&self) -> &RotationPolicy {
        &self.policy
    }

    /// Own messages sent under the current key.
    pub fn sent_since_keyed(&self) -> u32 {
        self.sent_since_keyed
    }

    /// Messages seen (sent or received) since the own key last went out.
    pub fn total_since_keyed(&self) -> u32 {
        self.total_since_keyed
    }

    /// Stages membership changes. Nothing goes on the wire here — the change
    /// is announced by the next keyed message this session sends, which will
    /// be of type ALTER_PARTICIPANTS and carry a fresh sender key that the
    /// excluded members never receive.
    pub fn alter_participants(
        &mut self,
        include: &[ParticipantId],
        exclude: &[ParticipantId],
    ) -> Result<(), SessionError> {
        let include: BTreeSet<ParticipantId> = include.iter().copied().collect();
        let exclude: BTreeSet<ParticipantId> = exclude.iter().copied().collect();
        if let Some(overlap) = include.intersection(&exclude).next() {
            return Err(SessionError::IncludeExcludeOverlap(*overlap));
        }
        if exclude.contains(&self.me) {
            return Err(SessionError::ExcludeSelf);
        }
        for participant in &include {
            if self.participants.contains(participant) {
                return Err(SessionError::AlreadyParticipant(*participant));
            }
            if !self.directory.contains_key(participant) {
                return Err(SessionError::UnknownParticipant(*participant));
            }
        }
        for participant in &exclude {
            if !self.participants.contains(participant) {
                return Err(SessionError::NotAParticipant(*participant));
            }
        }
        self.pending_include.extend(include);
        self.pending_exclude.extend(exclude);
        Ok(())
    }

    /// Sends a message, choosing the message type the current state calls
    /// for. `payload` may be `None` only when a keyed message is due — a
    /// blind keyed message distributes keys or membership changes without
    /// saying anything.
    pub fn send_message(
        &mut self,
        payload: Option<&[u8]>,
        now: u64,
    ) -> Result<OutboundMessage, SessionError> {
        let has_pending = !self.pending_include.is_empty() || !self.pending_exclude.is_empty();
        // Evaluate the policy as of the message about to be sent.
        let due = due_actions(
            self.sent_since_keyed + 1,
            self.total_since_keyed + 1,
            &self.policy,
        );
        if has_pending || self.ring.own_current().is_none() || due.rotate || due.resend {
            self.build_keyed_message(payload, now)
        } else {
            match payload {
                Some(payload) => self.build_followup_message(payload),
                None => Err(SessionError::BlindFollowup),
            }
        }
    }

    /// Builds a keyed message: rotates the sender key, wraps it (plus the
    /// previous key, for those entitled to it) to every other participant,
    /// and announces any staged membership change. Resets both policy
    /// counters.
    pub fn build_keyed_message(
        &mut self,
        payload: Option<&[u8]>,
        now: u64,
    ) -> Result<OutboundMessage, SessionError> {
        if let Some(payload) = payload {
            if payload.len() > MAX_VALUE_LEN {
                return Err(SessionError::PayloadTooLong(payload.len()));
            }
        }

        let is_alter = !self.pending_include.is_empty() || !self.pending_exclude.is_empty();
        let new_composition: BTreeSet<ParticipantId> = self
            .participants
            .union(&self.pending_include)
            .copied()
            .collect::<BTreeSet<_>>()
            .difference(&self.pending_exclude)
            .copied()
            .collect();
        let recipients: Vec<ParticipantId> = new_composition
            .iter()
            .copied()
            .filter(|p| *p != self.me)
            .collect();
        if recipients.is_empty() {
            return Err(SessionError::NoOtherParticipants);
        }

        // Derive all pairwise keys up front: after this point nothing that
        // depends on the directory can fail, so the rotation below cannot
        // leave the session half-updated.
        let mut pairwise_keys = Vec::with_capacity(recipients.len());
        for recipient in &recipients {
            let keys = self
                .directory
                .get(recipient)
                .ok_or(SessionError::UnknownParticipant(*recipient))?;
            pairwise_keys.push(derive_pairwise_key(&self.dh_keys, &keys.dh)?);
        }

        let (key_id, key) = self.ring.rotate(now, self.rng.as_mut())?;
        self.ring.record_participant_key(self.me, key_id, key)?;
        let previous = self.ring.own_previous();
        self.previous_holders = std::mem::take(&mut self.current_holders);
        self.current_holders = new_composition.clone();

        let nonce = MasterNonce::generate(self.rng.as_mut());
        let message_type = if is_alter {
            MessageType::AlterParticipants
        } else {
            MessageType::GroupKeyed
        };

        let mut records = vec![
            TlvRecord::new(RecordType::MessageType, vec![message_type.byte()]),
            TlvRecord::new(RecordType::Nonce, nonce.as_bytes().to_vec()),
        ];

        // RECIPIENT records, then the KEYS records in matching order. A
        // recipient gets `current || previous` only if it held the previous
        // key: newly included members must not be able to read backwards.
        let mut keys_records = Vec::with_capacity(recipients.len());
        let mut any_previous = false;
        for (recipient, pairwise) in recipients.iter().zip(&pairwise_keys) {
            let mut block = key.as_bytes().to_vec();
            if let Some((_, previous_key)) = previous {
                if self.previous_holders.contains(recipient) {
                    block.extend_from_slice(previous_key.as_bytes());
                    any_previous = true;
                }
            }
            let iv = derive_recipient_iv(&nonce, *recipient);
            let wrapped = wrap_sender_keys(&block, pairwise, &iv)?;
            records.push(TlvRecord::new(
                RecordType::Recipient,
                recipient.as_bytes().to_vec(),
            ));
            keys_records.push(TlvRecord::new(RecordType::Keys, wrapped));
        }
        records.extend(keys_records);

        let mut key_ids = key_id.to_bytes().to_vec();
        if any_previous {
            let (previous_id, _) = previous.expect("previous key was just used");
            key_ids.extend_from_slice(&previous_id.to_bytes());
        }
        records.push(TlvRecord::new(RecordType::KeyIds, key_ids));

        if is_alter {
            for included in &self.pending_include {
                records.push(TlvRecord::new(
                    RecordType::IncParticipant,
                    included.as_bytes().to_vec(),
                ));
            }
            for excluded in &self.pending_exclude {
                records.push(TlvRecord::new(
                    RecordType::ExcParticipant,
                    excluded.as_bytes().to_vec(),
                ));
            }
        }

        if let Some(payload) = payload {
            let payload_nonce = derive_payload_nonce(&nonce);
            records.push(TlvRecord::new(
                RecordType::Payload,
                encrypt_payload(payload, &key, &payload_nonce),
            ));
        }

        let wire = self.sign_and_assemble(records)?;

        self.participants = new_composition;
        self.pending_include.clear();
        self.pending_exclude.clear();
        self.sent_since_keyed = 0;
        self.total_since_keyed = 0;

        Ok(OutboundMessage {
            wire,
            message_type,
            key_id,
        })
    }

    /// Builds a follow-up message under the current sender key. Advances
    /// both policy counters.
    pub fn build_followup_message(
        &mut self,
        payload: &[u8],
    ) -> Result<OutboundMessage, SessionError> {
        let (key_id, key) = self.ring.own_current().ok_or(SessionError::NoCurrentKey)?;
        if payload.len() > MAX_VALUE_LEN {
            return Err(SessionError::PayloadTooLong(payload.len()));
        }
        let nonce = MasterNonce::generate(self.rng.as_mut());
        let payload_nonce = derive_payload_nonce(&nonce);
        let records = vec![
            TlvRecord::new(
                RecordType::MessageType,
                vec![MessageType::GroupFollowup.byte()],
            ),
            TlvRecord::new(RecordType::Nonce, nonce.as_bytes().to_vec()),
            TlvRecord::new(RecordType::KeyIds, key_id.to_bytes().to_vec()),
            TlvRecord::new(
                RecordType::Payload,
                encrypt_payload(payload, &key, &payload_nonce),
            ),
        ];
        let wire = self.sign_and_assemble(records)?;
        self.sent_since_keyed += 1;
        self.total_since_keyed += 1;
        Ok(OutboundMessage {
            wire,
            message_type: MessageType::GroupFollowup,
            key_id,
        })
    }

    fn sign_and_assemble(&self, records: Vec<TlvRecord>) -> Result<Vec<u8>, SessionError> {
        let body = encode_records(&records)?;
        let signature = sign_message(&body, &self.sign_keys);
        let mut all = Vec::with_capacity(records.len() + 1);
        all.push(TlvRecord::new(RecordType::Signature, signature.to_vec()));
        all.extend(records);
        Ok(encode_message(&ProtocolMessage::new(all))?)
    }

    /// Processes one incoming message.
    ///
    /// The signature is verified over the signed span before the rest of the
    /// message is even decoded; any verification or parse failure leaves the
    /// session completely untouched. Keyed messages not addressed to this
    /// client (and not its own) are skipped: the result comes back with
    /// `addressed: false` and no keys or payload.
    pub fn receive_message(
        &mut self,
        wire: &[u8],
        claimed_sender: ParticipantId,
    ) -> Result<InboundResult, SessionError> {
        let sender_keys = *self
            .directory
            .get(&claimed_sender)
            .ok_or(SessionError::UnknownParticipant(claimed_sender))?;

        // Step 1: light parse — version byte and the leading signature
        // record only — then verify. Everything after the signature record
        // is untrusted bytes until this passes.
        let (signature, span) = split_signature(wire)?;
        if !verify_message(span, signature, &sender_keys.signing) {
            return Err(SessionError::BadSignature {
                sender: claimed_sender,
            });
        }

        // Step 2: full structural decode.
        let message = decode_message(wire)?;
        let type_value = message
            .first(RecordType::MessageType)
            .ok_or(SessionError::MissingRecord("MESSAGE_TYPE"))?;
        if type_value.len() != 1 {
            return Err(SessionError::BadRecordValue {
                record: "MESSAGE_TYPE",
                expected: "1",
                got: type_value.len(),
            });
        }
        let message_type = MessageType::from_byte(type_value[0])
            .ok_or(SessionError::UnknownMessageType(type_value[0]))?;

        // Step 3: semantic processing. Parsing and key lookups come first;
        // state (counters, ring, pending sets) only changes once nothing can
        // fail any more.
        match message_type {
            MessageType::GroupFollowup => self.receive_followup(claimed_sender, &message),
            MessageType::GroupKeyed | MessageType::AlterParticipants => {
                self.receive_keyed(claimed_sender, &message, message_type)
            }
        }
    }

    fn receive_followup(
        &mut self,
        sender: ParticipantId,
        message: &ProtocolMessage,
    ) -> Result<InboundResult, SessionError> {
        let nonce = required_nonce(message)?;
        let key_ids = message
            .first(RecordType::KeyIds)
            .ok_or(SessionError::MissingRecord("KEY_IDS"))?;
        if key_ids.len() != KEY_ID_LEN {
            return Err(SessionError::BadRecordValue {
                record: "KEY_IDS",
                expected: "4 (a follow-up references only the current key)",
                got: key_ids.len(),
            });
        }
        let key_id = KeyId::from_bytes(key_ids.try_into().expect("length checked"));
        let ciphertext = message
            .first(RecordType::Payload)
            .ok_or(SessionError::MissingRecord("PAYLOAD"))?;
        let key = self
            .ring
            .lookup(sender, key_id)
            .ok_or(SessionError::MissingKey { sender, id: key_id })?;

        let payload = decrypt_payload(ciphertext, &key, &derive_payload_nonce(&nonce));
        self.total_since_keyed += 1;
        Ok(InboundResult {
            sender,
            message_type: MessageType::GroupFollowup,
            addressed: true,
            payload: Some(payload),
            learned_keys: Vec::new(),
            included: BTreeSet::new(),
            excluded: BTreeSet::new(),
        })
    }

    fn receive_keyed(
        &mut self,
        sender: ParticipantId,
        message: &ProtocolMessage,
        message_type: MessageType,
    ) -> Result<InboundResult, SessionError> {
        let parts = parse_keyed_parts(message)?;

        // Which KEYS slot is ours? For a foreign message, the slot whose
        // RECIPIENT is us, unwrapped against the sender's DH key. For our
        // own message coming back out of history, the first slot, unwrapped
        // against that recipient's DH key — the exchange is symmetric, so
        // the wrap key is the same one we derived when sending.
        let slot = if sender == self.me {
            parts
                .recipients
                .first()
                .map(|first| (0usize, *first, *first))
        } else {
            parts
                .recipients
                .iter()
                .position(|r| *r == self.me)
                .map(|index| (index, self.me, sender))
        };

        let Some((index, iv_owner, dh_peer)) = slot else {
            // Not addressed to us: count it and move on. The announced
            // deltas are reported for observability but nothing is applied —
            // an excluded member, in particular, learns of its exclusion
            // only by no longer being able to read the room.
            self.total_since_keyed += 1;
            return Ok(InboundResult {
                sender,
                message_type,
                addressed: false,
                payload: None,
                learned_keys: Vec::new(),
                included: parts.included,
                excluded: parts.excluded,
            });
        };

        let peer_public = self
            .directory
            .get(&dh_peer)
            .ok_or(SessionError::UnknownParticipant(dh_peer))?
            .dh;
        let pairwise = derive_pairwise_key(&self.dh_keys, &peer_public)?;
        let iv = derive_recipient_iv(&parts.nonce, iv_owner);
        let unwrapped = unwrap_sender_keys(&parts.key_blocks[index], &pairwise, &iv)?;

        let mut learned = vec![(sender, parts.current_id, unwrapped.current)];
        if let Some(previous_key) = unwrapped.previous {
            let previous_id = parts
                .previous_id
                .ok_or(SessionError::PreviousKeyWithoutId)?;
            learned.push((sender, previous_id, previous_key));
        }
        // Detect conflicts before recording anything, so a bad message
        // cannot leave half its keys behind.
        for (participant, id, key) in &learned {
            if let Some(existing) = self.ring.lookup(*participant, *id) {
                if existing != *key {
                    return Err(SessionError::KeyStore(KeyStoreError::KeyConflict {
                        participant: *participant,
                        id: *id,
                    }));
                }
            }
        }

        let payload = match message.first(RecordType::Payload) {
            Some(ciphertext) => Some(decrypt_payload(
                ciphertext,
                &unwrapped.current,
                &derive_payload_nonce(&parts.nonce),
            )),
            None => None,
        };

        // All checks passed — commit.
        self.total_since_keyed += 1;
        for (participant, id, key) in &learned {
            self.ring
                .record_participant_key(*participant, *id, *key)
                .expect("conflicts were ruled out above");
        }
        if sender == self.me && self.ring.adopt_own_current(parts.current_id, unwrapped.current)
        {
            self.previous_holders = std::mem::take(&mut self.current_holders);
            self.current_holders = parts.recipients.iter().copied().collect();
            self.current_holders.insert(self.me);
        }
        if message_type == MessageType::AlterParticipants {
            self.merge_membership_deltas(&parts.included, &parts.excluded);
        }

        Ok(InboundResult {
            sender,
            message_type,
            addressed: true,
            payload,
            learned_keys: learned,
            included: parts.included,
            excluded: parts.excluded,
        })
    }

    /// Folds announced deltas into the pending sets, skipping anything this
    /// session has already applied or staged. The filtering is what makes
    /// re-announcements converge: once every participant has applied a
    /// change, the deltas are no-ops everywhere and nobody announces them
    /// again.
    fn merge_membership_deltas(
        &mut self,
        included: &BTreeSet<ParticipantId>,
        excluded: &BTreeSet<ParticipantId>,
    ) {
        for participant in excluded {
            if self.pending_include.remove(participant) {
                continue;
            }
            if self.participants.contains(participant) && *participant != self.me {
                self.pending_exclude.insert(*participant);
            }
        }
        for participant in included {
            if self.pending_exclude.remove(participant) {
                continue;
            }
            if !self.participants.contains(participant) {
                self.pending_include.insert(*participant);
            }
        }
    }

    /// Rebuilds key material from a batch of stored history, newest batch
    /// first (the order *within* a batch does not matter). Returns whether
    /// an own sender key is held after this batch; malformed or alien
    /// messages are skipped with a diagnostic rather than failing the seed.
    ///
    /// Membership deltas in history are not applied — the transport conveys
    /// current room membership when a client resumes, and replaying old
    /// changes would fight it.
    pub fn seed_from_history(&mut self, batch: &[(ParticipantId, Vec<u8>)]) -> SeedReport {
        let mut diagnostics = Vec::new();
        for (sender, wire) in batch {
            if let Err(error) = self.seed_one(*sender, wire) {
                diagnostics.push(format!("history message from {sender}: {error}"));
            }
        }
        SeedReport {
            own_key_found: self.ring.own_current().is_some(),
            diagnostics,
        }
    }

    fn seed_one(&mut self, sender: ParticipantId, wire: &[u8]) -> Result<(), SessionError> {
        let sender_keys = *self
            .directory
            .get(&sender)
            .ok_or(SessionError::UnknownParticipant(sender))?;
        let (signature, span) = split_signature(wire)?;
        if !verify_message(span, signature, &sender_keys.signing) {
            return Err(SessionError::BadSignature { sender });
        }
        let message = decode_message(wire)?;
        let type_value = message
            .first(RecordType::MessageType)
            .ok_or(SessionError::MissingRecord("MESSAGE_TYPE"))?;
        if type_value.len() != 1 {
            return Err(SessionError::BadRecordValue {
                record: "MESSAGE_TYPE",
                expected: "1",
                got: type_value.len(),
            });
        }
        let message_type = MessageType::from_byte(type_value[0])
            .ok_or(SessionError::UnknownMessageType(type_value[0]))?;
        if message_type == MessageType::GroupFollowup {
            // Follow-ups carry no key material; nothing to learn.
            return Ok(());
        }

        let parts = parse_keyed_parts(&message)?;
        let slot = if sender == self.me {
            parts
                .recipients
                .first()
                .map(|first| (0usize, *first, *first))
        } else {
            parts
                .recipients
                .iter()
                .position(|r| *r == self.me)
                .map(|index| (index, self.me, sender))
        };
        let Some((index, iv_owner, dh_peer)) = slot else {
            return Ok(());
        };

        let peer_public = self
            .directory
            .get(&dh_peer)
            .ok_or(SessionError::UnknownParticipant(dh_peer))?
            .dh;
        let pairwise = derive_pairwise_key(&self.dh_keys, &peer_public)?;
        let iv = derive_recipient_iv(&parts.nonce, iv_owner);
        let unwrapped = unwrap_sender_keys(&parts.key_blocks[index], &pairwise, &iv)?;

        self.ring
            .record_participant_key(sender, parts.current_id, unwrapped.current)?;
        if let Some(previous_key) = unwrapped.previous {
            let previous_id = parts
                .previous_id
                .ok_or(SessionError::PreviousKeyWithoutId)?;
            self.ring
                .record_participant_key(sender, previous_id, previous_key)?;
        }
        if sender == self.me && self.ring.adopt_own_current(parts.current_id, unwrapped.current)
        {
            self.previous_holders = std::mem::take(&mut self.current_holders);
            self.current_holders = parts.recipients.iter().copied().collect();
            self.current_holders.insert(self.me);
        }
        Ok(())
    }
}

/// The pieces of a keyed (or alter) message, pulled out of the record list
/// with all value lengths checked.
struct KeyedParts {
    nonce: MasterNonce,
    recipients: Vec<ParticipantId>,
    key_blocks: Vec<Vec<u8>>,
    current_id: KeyId,
    previous_id: Option<KeyId>,
    included: BTreeSet<ParticipantId>,
    excluded: BTreeSet<ParticipantId>,
}

fn required_nonce(message: &ProtocolMessage) -> Result<MasterNonce, SessionError> {
    let value = message
        .first(RecordType::Nonce)
        .ok_or(SessionError::MissingRecord("NONCE"))?;
    MasterNonce::try_from_slice(value).map_err(|_| SessionError::BadRecordValue {
        record: "NONCE",
        expected: "16",
        got: value.len(),
    })
}

fn parse_handles(
    message: &ProtocolMessage,
    record_type: RecordType,
    record_name: &'static str,
) -> Result<Vec<ParticipantId>, SessionError> {
    message
        .all(record_type)
        .into_iter()
        .map(|value| {
            ParticipantId::try_from_slice(value).map_err(|_| SessionError::BadRecordValue {
                record: record_name,
                expected: "8",
                got: value.len(),
            })
        })
        .collect()
}

fn parse_keyed_parts(message: &ProtocolMessage) -> Result<KeyedParts, SessionError> {
    debug_assert_eq!(MASTER_NONCE_LEN, 16);
    debug_assert_eq!(HANDLE_LEN, 8);

    let nonce = required_nonce(message)?;
    let recipients = parse_handles(message, RecordType::Recipient, "RECIPIENT")?;
    let key_blocks: Vec<Vec<u8>> = message
        .all(RecordType::Keys)
        .into_iter()
        .map(|v| v.to_vec())
        .collect();
    // The codec guarantees the counts match.
    debug_assert_eq!(recipients.len(), key_blocks.len());

    let key_ids = message
        .first(RecordType::KeyIds)
        .ok_or(SessionError::MissingRecord("KEY_IDS"))?;
    let (current_id, previous_id) = match key_ids.len() {
        KEY_ID_LEN => (KeyId::from_bytes(key_ids.try_into().unwrap()), None),
        8 => (
            KeyId::from_bytes(key_ids[..KEY_ID_LEN].try_into().unwrap()),
            Some(KeyId::from_bytes(key_ids[KEY_ID_LEN..].try_into().unwrap())),
        ),
        other => {
            return Err(SessionError::BadRecordValue {
                record: "KEY_IDS",
                expected: "4 or 8",
                got: other,
            })
        }
    };

    let included = parse_handles(message, RecordType::IncParticipant, "INC_PARTICIPANT")?
        .into_iter()
        .collect();
    let excluded = parse_handles(message, RecordType::ExcParticipant, "EXC_PARTICIPANT")?
        .into_iter()
        .collect();

    Ok(KeyedParts {
        nonce,
        recipients,
        key_blocks,
        current_id,
        previous_id,
        included,
        excluded,
    })
}
