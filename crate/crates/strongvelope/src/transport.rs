//! In-memory stand-in for the chat service: an append-only, totally ordered
//! message log plus a room membership list.
//!
//! The service is honest-but-curious in this model: it orders and stores
//! opaque wire messages and decides who may post, but it holds no key
//! material and never looks inside a message. Room membership is therefore
//! *not* the same thing as session participation — the membership list says
//! who receives bytes, while the RECIPIENT records inside the messages say
//! who can read them. A member who was never keyed can fetch everything and
//! decrypt nothing.

use std::collections::BTreeSet;

use thiserror::Error;

use crate::crypto::ParticipantId;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum TransportError {
    #[error("{sender} is not a member of the room and cannot post")]
    NotAMember { sender: ParticipantId },
}

/// One stored message: its sequence number, the claimed sender (the service
/// authenticates transport-level identity, not message contents), and the
/// opaque wire bytes.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LoggedMessage {
    pub seq: u64,
    pub sender: ParticipantId,
    pub wire: Vec<u8>,
}

/// An ordered chat-room log with membership control.
#[derive(Debug, Default)]
pub struct ChatRoom {
    log: Vec<LoggedMessage>,
    members: BTreeSet<ParticipantId>,
}

impl ChatRoom {
    pub fn new() -> ChatRoom {
        ChatRoom::default()
    }

    pub fn with_members(members: impl IntoIterator<Item = ParticipantId>) -> ChatRoom {
        ChatRoom {
            log: Vec::new(),
            members: members.into_iter().collect(),
        }
    }

    /// Replaces the membership list. The log is untouched: leaving a room
    /// does not unsend anything.
    pub fn set_members(&mut self, members: impl IntoIterator<Item = ParticipantId>) {
        self.members = members.into_iter().collect();
    }

    pub fn members(&self) -> &BTreeSet<ParticipantId> {
        &self.members
    }

    /// Appends a message and returns its sequence number. Sequence numbers
    /// are contiguous from zero. Only current members may post.
    pub fn post(&mut self, sender: ParticipantId, wire: Vec<u8>) -> Result<u64, TransportError> {
        if !self.members.contains(&sender) {
            return Err(TransportError::NotAMember { sender });
        }
        let seq = self.log.len() as u64;
        self.log.push(LoggedMessage { seq, sender, wire });
        Ok(seq)
    }

    /// Returns up to `limit` messages with sequence numbers below
    /// `before_seq` (or counting back from the newest when `None`), ordered
    /// oldest-first. Walking backwards — passing the first sequence number
    /// of each batch as the next `before_seq` — tiles the log exactly.
    pub fn fetch_history(&self, before_seq: Option<u64>, limit: usize) -> &[LoggedMessage] {
        let end = match before_seq {
            Some(before) => (before as usize).min(self.log.len()),
            None => self.log.len(),
        };
        let start = end.saturating_sub(limit);
        &self.log[start..end]
    }

    /// The full log, oldest-first.
    pub fn log(&self) -> &[LoggedMessage] {
        &self.log
    }

    pub fn len(&self) -> usize {
        self.log.len()
    }

    pub fn is_empty(&self) -> bool {
        self.log.is_empty()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn id(byte: u8) -> ParticipantId {
        ParticipantId::from_bytes([byte; 8])
    }

    fn room_with_log(n: usize) -> ChatRoom {
        let mut room = ChatRoom::with_members([id(1)]);
        for i in 0..n {
            let seq = room.post(id(1), vec![i as u8]).unwrap();
            assert_eq!(seq, i as u64);
        }
        room
    }

    #[test]
    fn posting_requires_membership() {
        let mut room = ChatRoom::with_members([id(1)]);
        assert_eq!(room.post(id(1), b"ok".to_vec()), Ok(0));
        assert_eq!(
            room.post(id(2), b"nope".to_vec()),
            Err(TransportError::NotAMember { sender: id(2) })
        );
        assert_eq!(room.len(), 1);
    }

    #[test]
    fn membership_changes_gate_future_posts_only() {
        let mut room = ChatRoom::with_members([id(1), id(2)]);
        room.post(id(2), b"before".to_vec()).unwrap();
        room.set_members([id(1)]);
        assert!(room.post(id(2), b"after".to_vec()).is_err());
        // The earlier message is still in the log.
        assert_eq!(room.log()[0].sender, id(2));
        // Membership says nothing about decryption; it is purely who may
        // post and who receives bytes.
        assert_eq!(room.members().len(), 1);
    }

    #[test]
    fn fetch_history_pages_backwards_oldest_first() {
        let room = room_with_log(10);

        let newest = room.fetch_history(None, 4);
        assert_eq!(newest.iter().map(|m| m.seq).collect::<Vec<_>>(), [6, 7, 8, 9]);

        let middle = room.fetch_history(Some(6), 4);
        assert_eq!(middle.iter().map(|m| m.seq).collect::<Vec<_>>(), [2, 3, 4, 5]);

        // The final batch is short: only two messages are left.
        let oldest = room.fetch_history(Some(2), 4);
        assert_eq!(oldest.iter().map(|m| m.seq).collect::<Vec<_>>(), [0, 1]);

        assert!(room.fetch_history(Some(0), 4).is_empty());
    }

    #[test]
    fn fetch_history_edge_cases() {
        let room = room_with_log(3);
        // A before_seq past the end behaves like None.
        assert_eq!(room.fetch_history(Some(99), 2).len(), 2);
        // A limit larger than the log returns the whole log.
        assert_eq!(room.fetch_history(None, 100).len(), 3);
        assert!(room.fetch_history(None, 0).is_empty());
        assert!(ChatRoom::new().fetch_history(None, 5).is_empty());
    }

    proptest! {
        #[test]
        fn backward_walks_tile_the_log(len in 0usize..60, limit in 1usize..10) {
            let room = room_with_log(len);
            let mut seen = Vec::new();
            let mut before = None;
            loop {
                let batch = room.fetch_history(before, limit);
                if batch.is_empty() {
                    break;
                }
                prop_assert!(batch.len() <= limit);
                // Contiguous within the batch…
                for pair in batch.windows(2) {
                    prop_assert_eq!(pair[1].seq, pair[0].seq + 1);
                }
                // …and flush against the previous batch.
                if let Some(prev_first) = before {
                    prop_assert_eq!(batch.last().unwrap().seq + 1, prev_first);
                }
                seen.extend(batch.iter().map(|m| m.seq).rev());
                before = Some(batch[0].seq);
            }
            seen.reverse();
            let expected: Vec<u64> = (0..len as u64).collect();
            prop_assert_eq!(seen, expected);
        }
    }
}
