//! TLV wire format for protocol messages.
//!
//! A message on the wire is a single version byte followed by a flat
//! sequence of type–length–value records: one type byte, a two-byte
//! big-endian value length, then the value itself. There is no framing
//! beyond that — record boundaries are implied by the length fields, so a
//! corrupted length tears the rest of the stream (which is why receivers
//! verify the message signature before trusting any structure past the
//! leading signature record).
//!
//! Structural rules enforced here:
//!
//! * only version [`PROTOCOL_VERSION`] is accepted;
//! * if a message has any records at all, the first must be
//!   [`RecordType::Signature`];
//! * [`RecordType::Keys`] and [`RecordType::Recipient`] records must come in
//!   equal numbers (keys are matched to recipients by position);
//! * unknown record types are a hard parse error — there is no skip-and-hope
//!   path, since silently dropping a record would change the signed bytes'
//!   meaning.
//!
//! Records may otherwise repeat and appear in any order; what they *mean* is
//! the session layer's business.

use thiserror::Error;

/// Version byte every message starts with. Nothing else is accepted.
pub const PROTOCOL_VERSION: u8 = 0x00;

/// Maximum bytes a single record value can carry (the length field is two
/// bytes, big-endian).
pub const MAX_VALUE_LEN: usize = u16::MAX as usize;

/// Record types understood by the codec.
///
/// `OwnKey` appears in message histories produced by older clients that
/// encrypted the sender key to themselves under a separate scheme; this
/// implementation parses it but never emits it.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
#[repr(u8)]
pub enum RecordType {
    /// Signature over every byte of the message that follows this record.
    Signature = 0x01,
    /// One-byte message type code (see [`MessageType`]).
    MessageType = 0x02,
    /// 16-byte master nonce for this message.
    Nonce = 0x03,
    /// 8-byte handle of one recipient.
    Recipient = 0x04,
    /// Sender keys encrypted to the recipient in the same list position.
    Keys = 0x05,
    /// Key IDs for the keys carried (or referenced) by this message.
    KeyIds = 0x06,
    /// Ciphertext of the message body.
    Payload = 0x07,
    /// 8-byte handle of a participant added to the chat.
    IncParticipant = 0x08,
    /// 8-byte handle of a participant removed from the chat.
    ExcParticipant = 0x09,
    /// Sender key encrypted to the sender itself (legacy; parsed, never emitted).
    OwnKey = 0x0a,
}

impl RecordType {
    /// All record types, in ascending wire-code order.
    pub const ALL: [RecordType; 10] = [
        RecordType::Signature,
        RecordType::MessageType,
        RecordType::Nonce,
        RecordType::Recipient,
        RecordType::Keys,
        RecordType::KeyIds,
        RecordType::Payload,
        RecordType::IncParticipant,
        RecordType::ExcParticipant,
        RecordType::OwnKey,
    ];

    /// Maps a wire byte to a record type, or `None` for unassigned codes.
    pub fn from_byte(byte: u8) -> Option<RecordType> {
        match byte {
            0x01 => Some(RecordType::Signature),
            0x02 => Some(RecordType::MessageType),
            0x03 => Some(RecordType::Nonce),
            0x04 => Some(RecordType::Recipient),
            0x05 => Some(RecordType::Keys),
            0x06 => Some(RecordType::KeyIds),
            0x07 => Some(RecordType::Payload),
            0x08 => Some(RecordType::IncParticipant),
            0x09 => Some(RecordType::ExcParticipant),
            0x0a => Some(RecordType::OwnKey),
            _ => None,
        }
    }

    /// The byte this type is encoded as.
    pub fn byte(self) -> u8 {
        self as u8
    }

    /// Canonical upper-case name, as shown by the dissector.
    pub fn name(self) -> &'static str {
        match self {
            RecordType::Signature => "SIGNATURE",
            RecordType::MessageType => "MESSAGE_TYPE",
            RecordType::Nonce => "NONCE",
            RecordType::Recipient => "RECIPIENT",
            RecordType::Keys => "KEYS",
            RecordType::KeyIds => "KEY_IDS",
            RecordType::Payload => "PAYLOAD",
            RecordType::IncParticipant => "INC_PARTICIPANT",
            RecordType::ExcParticipant => "EXC_PARTICIPANT",
            RecordType::OwnKey => "OWN_KEY",
        }
    }
}

/// Message type codes carried in a [`RecordType::MessageType`] record.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
#[repr(u8)]
pub enum MessageType {
    /// Carries freshly distributed sender keys (and optionally a payload).
    GroupKeyed = 0x00,
    /// References an already-distributed key by ID; always has a payload.
    GroupFollowup = 0x01,
    /// A keyed message that additionally announces membership changes.
    AlterParticipants = 0x02,
}

impl MessageType {
    /// Maps a wire byte to a message type, or `None` for unassigned codes.
    pub fn from_byte(byte: u8) -> Option<MessageType> {
        match byte {
            0x00 => Some(MessageType::GroupKeyed),
            0x01 => Some(MessageType::GroupFollowup),
            0x02 => Some(MessageType::AlterParticipants),
            _ => None,
        }
    }

    /// The byte this type is encoded as.
    pub fn byte(self) -> u8 {
        self as u8
    }

    /// Canonical name, as shown by the dissector.
    pub fn name(self) -> &'static str {
        match self {
            MessageType::GroupKeyed => "GROUP_KEYED",
            MessageType::GroupFollowup => "GROUP_FOLLOWUP",
            MessageType::AlterParticipants => "ALTER_PARTICIPANTS",
        }
    }
}

/// One type–length–value record.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TlvRecord {
    pub record_type: RecordType,
    pub value: Vec<u8>,
}

impl TlvRecord {
    pub fn new(record_type: RecordType, value: impl Into<Vec<u8>>) -> TlvRecord {
        TlvRecord {
            record_type,
            value: value.into(),
        }
    }
}

/// A decoded message: version byte plus record sequence.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ProtocolMessage {
    pub version: u8,
    pub records: Vec<TlvRecord>,
}

impl ProtocolMessage {
    /// A message at the current protocol version.
    pub fn new(records: Vec<TlvRecord>) -> ProtocolMessage {
        ProtocolMessage {
            version: PROTOCOL_VERSION,
            records,
        }
    }

    /// First record of the given type, if any.
    pub fn first(&self, record_type: RecordType) -> Option<&[u8]> {
        self.records
            .iter()
            .find(|r| r.record_type == record_type)
            .map(|r| r.value.as_slice())
    }

    /// All records of the given type, in wire order.
    pub fn all(&self, record_type: RecordType) -> Vec<&[u8]> {
        self.records
            .iter()
            .filter(|r| r.record_type == record_type)
            .map(|r| r.value.as_slice())
            .collect()
    }
}

/// Errors raised by the codec. Offsets are byte positions within the record
/// stream handed to the decoder (for a full message, the stream starts right
/// after the version byte).
#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum WireError {
    #[error("{record_type:?} record value is {len} bytes, exceeding the {MAX_VALUE_LEN}-byte limit")]
    ValueTooLong { record_type: RecordType, len: usize },
    #[error("empty input: a message needs at least a version byte")]
    Empty,
    #[error("unsupported protocol version {0:#04x} (only {PROTOCOL_VERSION:#04x} is accepted)")]
    UnsupportedVersion(u8),
    #[error("unknown record type byte {byte:#04x} at offset {offset}")]
    UnknownRecordType { byte: u8, offset: usize },
    #[error("truncated record header at offset {offset}: need {needed} more byte(s)")]
    TruncatedHeader { offset: usize, needed: usize },
    #[error("truncated record at offset {offset}: {declared} bytes declared, {available} present")]
    Truncated {
        offset: usize,
        declared: usize,
        available: usize,
    },
    #[error("first record is {found}, but a message must lead with its SIGNATURE record")]
    SignatureNotFirst { found: &'static str },
    #[error("message carries no SIGNATURE record")]
    MissingSignature,
    #[error("{keys} KEYS record(s) for {recipients} RECIPIENT record(s); counts must match")]
    KeysRecipientMismatch { keys: usize, recipients: usize },
}

/// Encodes a single record: type byte, two-byte big-endian length, value.
pub fn encode_record(record: &TlvRecord) -> Result<Vec<u8>, WireError> {
    if record.value.len() > MAX_VALUE_LEN {
        return Err(WireError::ValueTooLong {
            record_type: record.record_type,
            len: record.value.len(),
        });
    }
    let mut out = Vec::with_capacity(3 + record.value.len());
    out.push(record.record_type.byte());
    out.extend_from_slice(&(record.value.len() as u16).to_be_bytes());
    out.extend_from_slice(&record.value);
    Ok(out)
}

/// Encodes a record sequence back-to-back, with no leading version byte.
pub fn encode_records(records: &[TlvRecord]) -> Result<Vec<u8>, WireError> {
    let mut out = Vec::new();
    for record in records {
        out.extend_from_slice(&encode_record(record)?);
    }
    Ok(out)
}

/// Decodes a record stream (no leading version byte) until the input is
/// exhausted. Unknown types and truncation are hard errors that identify the
/// offending offset; an empty input is a valid empty sequence.
pub fn decode_records(data: &[u8]) -> Result<Vec<TlvRecord>, WireError> {
    let mut records = Vec::new();
    let mut offset = 0;
    while offset < data.len() {
        let (record, next) = decode_record_at(data, offset)?;
        records.push(record);
        offset = next;
    }
    Ok(records)
}

/// Decodes the single record starting at `offset`, returning it together
/// with the offset of the byte right after its value.
pub(crate) fn decode_record_at(data: &[u8], offset: usize) -> Result<(TlvRecord, usize), WireError> {
    let byte = data[offset];
    let record_type = RecordType::from_byte(byte).ok_or(WireError::UnknownRecordType {
        byte,
        offset,
    })?;
    if data.len() - offset < 3 {
        return Err(WireError::TruncatedHeader {
            offset,
            needed: 3 - (data.len() - offset),
        });
    }
    let declared = u16::from_be_bytes([data[offset + 1], data[offset + 2]]) as usize;
    let value_start = offset + 3;
    let available = data.len() - value_start;
    if declared > available {
        return Err(WireError::Truncated {
            offset: value_start,
            declared,
            available,
        });
    }
    let value = data[value_start..value_start + declared].to_vec();
    Ok((TlvRecord::new(record_type, value), value_start + declared))
}

/// Encodes a full message: version byte followed by its records.
///
/// The same structural rules checked by [`decode_message`] are enforced, so
/// anything this function emits will decode again.
pub fn encode_message(message: &ProtocolMessage) -> Result<Vec<u8>, WireError> {
    if message.version != PROTOCOL_VERSION {
        return Err(WireError::UnsupportedVersion(message.version));
    }
    validate_structure(&message.records)?;
    let mut out = vec![message.version];
    out.extend_from_slice(&encode_records(&message.records)?);
    Ok(out)
}

/// Decodes a full message and enforces the structural rules: supported
/// version, SIGNATURE first (when any records exist), and matching
/// KEYS/RECIPIENT counts.
pub fn decode_message(data: &[u8]) -> Result<ProtocolMessage, WireError> {
    let (&version, body) = data.split_first().ok_or(WireError::Empty)?;
    if version != PROTOCOL_VERSION {
        return Err(WireError::UnsupportedVersion(version));
    }
    let records = decode_records(body)?;
    validate_structure(&records)?;
    Ok(ProtocolMessage { version, records })
}

fn validate_structure(records: &[TlvRecord]) -> Result<(), WireError> {
    if let Some(first) = records.first() {
        if first.record_type != RecordType::Signature {
            return Err(WireError::SignatureNotFirst {
                found: first.record_type.name(),
            });
        }
    }
    let keys = records
        .iter()
        .filter(|r| r.record_type == RecordType::Keys)
        .count();
    let recipients = records
        .iter()
        .filter(|r| r.record_type == RecordType::Recipient)
        .count();
    if keys != recipients {
        return Err(WireError::KeysRecipientMismatch { keys, recipients });
    }
    Ok(())
}

/// Splits a wire message into its leading signature value and the signed
/// span (every byte after the signature record). Only the first record is
/// parsed; the rest of the message may be arbitrarily mangled and this still
/// succeeds — by design, so receivers can check the signature before
/// trusting any later structure.
pub fn split_signature(data: &[u8]) -> Result<(&[u8], &[u8]), WireError> {
    let (&version, body) = data.split_first().ok_or(WireError::Empty)?;
    if version != PROTOCOL_VERSION {
        return Err(WireError::UnsupportedVersion(version));
    }
    if body.is_empty() {
        return Err(WireError::MissingSignature);
    }
    let (record, next) = decode_record_at(body, 0)?;
    if record.record_type != RecordType::Signature {
        return Err(WireError::SignatureNotFirst {
            found: record.record_type.name(),
        });
    }
    // The signature value sits at body[3..next]; return it as a borrowed
    // slice rather than the decoded copy.
    Ok((&body[3..next], &body[next..]))
}

/// The signed span of a wire message: every byte after the leading
/// signature record.
pub fn signed_span(data: &[u8]) -> Result<&[u8], WireError> {
    split_signature(data).map(|(_, span)| span)
}
