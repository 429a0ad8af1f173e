//! Sender-key lifecycle: key IDs, the rotation/re-send policy, and the ring
//! of keys — own and learned — that decryption draws from.
//!
//! Key IDs pack a day number and per-day counter into four bytes so that
//! freshness can be compared directly on the serialized form. The ring is
//! deliberately append-only: old keys stay available for decrypting history,
//! and recording a *different* key under an existing `(participant, id)` is
//! an error rather than an overwrite, since an honest client never reuses an
//! ID.

use std::collections::HashMap;

use rand_core::CryptoRngCore;
use thiserror::Error;

use crate::crypto::{ParticipantId, SenderKey};

pub const SECONDS_PER_DAY: u64 = 86_400;

/// Serialized length of a key ID.
pub const KEY_ID_LEN: usize = 4;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum KeyStoreError {
    #[error("key-ID counter exhausted for day {day}: no further keys can be minted today")]
    CounterOverflow { day: u16 },
    #[error("clock regression: now falls on day {now_day}, but the newest key ID is from day {last_day}")]
    ClockRegression { now_day: u16, last_day: u16 },
    #[error("conflicting key recorded for participant {participant}, key ID {id}")]
    KeyConflict { participant: ParticipantId, id: KeyId },
    #[error("rotation policy values must all be at least 1")]
    InvalidPolicy,
}

/// A four-byte sender-key identifier: a 16-bit day number (days since the
/// epoch, truncated) and a 16-bit counter within that day.
///
/// Serialized big-endian as `day || counter`, which makes the numeric
/// ordering and the lexicographic byte ordering one and the same — receivers
/// can compare freshness on the raw record value.
#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct KeyId {
    day: u16,
    counter: u16,
}

impl KeyId {
    pub fn new(day: u16, counter: u16) -> KeyId {
        KeyId { day, counter }
    }

    pub fn day(self) -> u16 {
        self.day
    }

    pub fn counter(self) -> u16 {
        self.counter
    }

    pub fn to_bytes(self) -> [u8; KEY_ID_LEN] {
        let mut out = [0u8; KEY_ID_LEN];
        out[..2].copy_from_slice(&self.day.to_be_bytes());
        out[2..].copy_from_slice(&self.counter.to_be_bytes());
        out
    }

    pub fn from_bytes(bytes: [u8; KEY_ID_LEN]) -> KeyId {
        KeyId {
            day: u16::from_be_bytes([bytes[0], bytes[1]]),
            counter: u16::from_be_bytes([bytes[2], bytes[3]]),
        }
    }
}

impl std::fmt::Debug for KeyId {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "KeyId({})", hex::encode(self.to_bytes()))
    }
}

impl std::fmt::Display for KeyId {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&hex::encode(self.to_bytes()))
    }
}

/// Mints the next key ID for a clock reading of `now` (seconds since the
/// epoch), given the newest ID minted so far.
///
/// IDs are strictly increasing: a later day resets the counter, the same day
/// increments it, and an earlier day — a clock that went backwards — is an
/// error rather than a silently non-monotonic ID.
pub fn new_key_id(now: u64, last: Option<KeyId>) -> Result<KeyId, KeyStoreError> {
    let now_day = (now / SECONDS_PER_DAY) as u16;
    let Some(last) = last else {
        return Ok(KeyId::new(now_day, 0));
    };
    if now_day > last.day {
        Ok(KeyId::new(now_day, 0))
    } else if now_day < last.day {
        Err(KeyStoreError::ClockRegression {
            now_day,
            last_day: last.day,
        })
    } else {
        let counter = last
            .counter
            .checked_add(1)
            .ok_or(KeyStoreError::CounterOverflow { day: now_day })?;
        Ok(KeyId::new(now_day, counter))
    }
}

/// When to rotate the own sender key and when to merely re-send it.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RotationPolicy {
    rotate_after_sent: u32,
    resend_after_total: u32,
    history_batch: u32,
}

impl RotationPolicy {
    /// Builds a policy; every threshold must be at least 1.
    pub fn new(
        rotate_after_sent: u32,
        resend_after_total: u32,
        history_batch: u32,
    ) -> Result<RotationPolicy, KeyStoreError> {
        if rotate_after_sent == 0 || resend_after_total == 0 || history_batch == 0 {
            return Err(KeyStoreError::InvalidPolicy);
        }
        Ok(RotationPolicy {
            rotate_after_sent,
            resend_after_total,
            history_batch,
        })
    }

    /// Rotate after this many own messages under one key.
    pub fn rotate_after_sent(&self) -> u32 {
        self.rotate_after_sent
    }

    /// Re-send the key after this many total messages (from anyone) since
    /// the own key was last distributed — a reminder for participants who
    /// have been lurking without sending.
    pub fn resend_after_total(&self) -> u32 {
        self.resend_after_total
    }

    /// How many messages to fetch per batch when seeding from history.
    pub fn history_batch(&self) -> u32 {
        self.history_batch
    }
}

impl Default for RotationPolicy {
    fn default() -> RotationPolicy {
        RotationPolicy {
            rotate_after_sent: 16,
            resend_after_total: 30,
            history_batch: 32,
        }
    }
}

/// What the policy says is due, given the counters for the current key
/// epoch. Rotation wins over a mere re-send: a fresh key reaches everyone
/// anyway.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct DueActions {
    pub rotate: bool,
    pub resend: bool,
}

/// Evaluates the policy against the number of own messages sent and total
/// messages seen since the own key was last distributed.
pub fn due_actions(
    sent_since_keyed: u32,
    total_since_keyed: u32,
    policy: &RotationPolicy,
) -> DueActions {
    let rotate = sent_since_keyed >= policy.rotate_after_sent;
    let resend = !rotate && total_since_keyed >= policy.resend_after_total;
    DueActions { rotate, resend }
}

/// The ring of sender keys: everything learned from other participants,
/// keyed by `(participant, key ID)`, plus the own current and previous key.
#[derive(Debug, Default)]
pub struct KeyRing {
    entries: HashMap<(ParticipantId, KeyId), SenderKey>,
    own_current: Option<(KeyId, SenderKey)>,
    own_previous: Option<(KeyId, SenderKey)>,
}

impl KeyRing {
    pub fn new() -> KeyRing {
        KeyRing::default()
    }

    /// Mints a fresh own key: a new random key under the next key ID. The
    /// key that was current becomes the previous one.
    pub fn rotate(
        &mut self,
        now: u64,
        rng: &mut dyn CryptoRngCore,
    ) -> Result<(KeyId, SenderKey), KeyStoreError> {
        let id = new_key_id(now, self.own_current.map(|(id, _)| id))?;
        let key = SenderKey::generate(rng);
        self.own_previous = self.own_current;
        self.own_current = Some((id, key));
        Ok((id, key))
    }

    /// Records a key learned for `(participant, id)`. Recording the same key
    /// again is a no-op; recording a *different* key under the same slot is
    /// an error (an ID is never legitimately reused).
    pub fn record_participant_key(
        &mut self,
        participant: ParticipantId,
        id: KeyId,
        key: SenderKey,
    ) -> Result<(), KeyStoreError> {
        match self.entries.get(&(participant, id)) {
            Some(existing) if *existing != key => {
                Err(KeyStoreError::KeyConflict { participant, id })
            }
            Some(_) => Ok(()),
            None => {
                self.entries.insert((participant, id), key);
                Ok(())
            }
        }
    }

    /// Looks up a learned key.
    pub fn lookup(&self, participant: ParticipantId, id: KeyId) -> Option<SenderKey> {
        self.entries.get(&(participant, id)).copied()
    }

    /// All learned `(participant, id)` slots, in no particular order. Own
    /// keys are not included; see [`KeyRing::own_current`].
    pub fn known(&self) -> impl Iterator<Item = (ParticipantId, KeyId)> + '_ {
        self.entries.keys().copied()
    }

    /// Adopts an own key recovered from history. Only an ID strictly newer
    /// than the current one (or any ID, when none is held) is adopted;
    /// returns whether the ring changed. The displaced key, if any, becomes
    /// the previous key, exactly as in a live rotation.
    pub fn adopt_own_current(&mut self, id: KeyId, key: SenderKey) -> bool {
        match self.own_current {
            Some((current_id, _)) if current_id >= id => false,
            _ => {
                self.own_previous = self.own_current;
                self.own_current = Some((id, key));
                true
            }
        }
    }

    pub fn own_current(&self) -> Option<(KeyId, SenderKey)> {
        self.own_current
    }

    pub fn own_previous(&self) -> Option<(KeyId, SenderKey)> {
        self.own_previous
    }

    /// Number of learned `(participant, id)` entries.
    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}
