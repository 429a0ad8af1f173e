//! Wire-message dissection: a human-readable, hex-faithful walk of a
//! message's records.
//!
//! The dissector is deliberately more forgiving than the strict decoder: it
//! keeps walking for as long as the byte stream allows, annotates what it
//! recognises, flags structural anomalies, and only then reports the first
//! hard parse error (with its wire offset). Every record's full value is
//! printed as hex, so the output re-assembles byte-for-byte into the
//! original message — `value:` lines are the ground truth, annotations are
//! commentary.

use std::fmt::Write as _;

use crate::crypto::verify_message;
use crate::keystore::KeyId;
use crate::wire::{
    decode_record_at, signed_span, MessageType, RecordType, TlvRecord, WireError,
    PROTOCOL_VERSION,
};

/// Outcome of dissecting one wire message.
#[derive(Debug, Clone)]
pub struct DissectReport {
    /// The full dissection text, independent of success.
    pub text: String,
    /// The first hard parse error, if the walk could not finish.
    pub error: Option<WireError>,
    /// Signature verdict: `None` when no public key was supplied or no
    /// signature record could be located, `Some(valid)` otherwise.
    pub signature_valid: Option<bool>,
}

/// Dissects a wire message. With a signer's public key, the leading
/// signature is verified over the signed span; without one it is only
/// displayed.
pub fn dissect(wire: &[u8], signer_public: Option<&[u8; 32]>) -> DissectReport {
    let mut text = String::new();
    let mut error: Option<WireError> = None;

    if wire.is_empty() {
        error = Some(WireError::Empty);
        let _ = writeln!(text, "error: {}", error.as_ref().unwrap());
        return DissectReport {
            text,
            error,
            signature_valid: None,
        };
    }

    let version = wire[0];
    let _ = writeln!(text, "version: {:02x}", version);
    if version != PROTOCOL_VERSION {
        let _ = writeln!(
            text,
            "  note: unsupported version (only {:02x} is defined); walking records anyway",
            PROTOCOL_VERSION
        );
        error = Some(WireError::UnsupportedVersion(version));
    }

    let mut records: Vec<TlvRecord> = Vec::new();
    let mut offset = 1usize;
    while offset < wire.len() {
        match decode_record_at(wire, offset) {
            Ok((record, next)) => {
                let _ = writeln!(
                    text,
                    "record[{}] @ {}: {} (0x{:02x}), {} byte{}",
                    records.len(),
                    offset,
                    record.record_type.name(),
                    record.record_type.byte(),
                    record.value.len(),
                    if record.value.len() == 1 { "" } else { "s" },
                );
                let _ = writeln!(text, "  value: {}", hex::encode(&record.value));
                annotate(&record, &mut text);
                records.push(record);
                offset = next;
            }
            Err(walk_error) => {
                let _ = writeln!(text, "error at wire offset: {}", walk_error);
                if error.is_none() {
                    error = Some(walk_error);
                }
                break;
            }
        }
    }

    summarize_structure(&records, &mut text);

    let signature_valid = match signer_public {
        Some(public) => match signed_span(wire) {
            Ok(span) => {
                let signature = &records[0].value;
                let valid = verify_message(span, signature, public);
                let _ = writeln!(
                    text,
                    "signature: {} (public key {})",
                    if valid { "VALID" } else { "INVALID" },
                    hex::encode(public)
                );
                Some(valid)
            }
            Err(_) => {
                let _ = writeln!(text, "signature: unverifiable (no leading signature record)");
                None
            }
        },
        None => {
            let _ = writeln!(text, "signature: not checked (no public key given)");
            None
        }
    };

    DissectReport {
        text,
        error,
        signature_valid,
    }
}

fn annotate(record: &TlvRecord, text: &mut String) {
    let value = &record.value;
    match record.record_type {
        RecordType::Signature => {
            if value.len() != 64 {
                let _ = writeln!(text, "  note: expected 64 bytes for an Ed25519 signature");
            }
        }
        RecordType::MessageType => match value.as_slice() {
            [byte] => match MessageType::from_byte(*byte) {
                Some(message_type) => {
                    let _ = writeln!(text, "  message type: {}", message_type.name());
                }
                None => {
                    let _ = writeln!(text, "  note: unassigned message type code");
                }
            },
            _ => {
                let _ = writeln!(text, "  note: expected a single type byte");
            }
        },
        RecordType::Nonce => {
            if value.len() != 16 {
                let _ = writeln!(text, "  note: expected a 16-byte master nonce");
            }
        }
        RecordType::Recipient | RecordType::IncParticipant | RecordType::ExcParticipant => {
            if value.len() != 8 {
                let _ = writeln!(text, "  note: expected an 8-byte handle");
            }
        }
        RecordType::Keys => match value.len() {
            16 => {
                let _ = writeln!(text, "  wrapped keys: current only");
            }
            32 => {
                let _ = writeln!(text, "  wrapped keys: current + previous");
            }
            _ => {
                let _ = writeln!(text, "  note: expected 16 or 32 bytes of wrapped keys");
            }
        },
        RecordType::KeyIds => match value.len() {
            4 => {
                let id = KeyId::from_bytes(value.as_slice().try_into().unwrap());
                let _ = writeln!(text, "  current key id: {} (day {}, counter {})", id, id.day(), id.counter());
            }
            8 => {
                let current = KeyId::from_bytes(value[..4].try_into().unwrap());
                let previous = KeyId::from_bytes(value[4..].try_into().unwrap());
                let _ = writeln!(
                    text,
                    "  current key id: {} (day {}, counter {}), previous key id: {} (day {}, counter {})",
                    current,
                    current.day(),
                    current.counter(),
                    previous,
                    previous.day(),
                    previous.counter()
                );
            }
            _ => {
                let _ = writeln!(text, "  note: expected 4 or 8 bytes of key IDs");
            }
        },
        RecordType::Payload => {
            let _ = writeln!(text, "  ciphertext: {} byte(s)", value.len());
        }
        RecordType::OwnKey => {
            let _ = writeln!(text, "  note: legacy record; parsed but never emitted");
        }
    }
}

fn summarize_structure(records: &[TlvRecord], text: &mut String) {
    let count = |t: RecordType| records.iter().filter(|r| r.record_type == t).count();

    let signature_first = records
        .first()
        .map(|r| r.record_type == RecordType::Signature);
    let keys = count(RecordType::Keys);
    let recipients = count(RecordType::Recipient);

    let _ = write!(
        text,
        "structure: {} record(s); signature first: {}; KEYS: {}, RECIPIENT: {} ({})",
        records.len(),
        match signature_first {
            Some(true) => "yes",
            Some(false) => "NO",
            None => "no records",
        },
        keys,
        recipients,
        if keys == recipients { "balanced" } else { "MISMATCH" },
    );
    let _ = writeln!(text);

    for (name, record_type) in [
        ("MESSAGE_TYPE", RecordType::MessageType),
        ("NONCE", RecordType::Nonce),
        ("KEY_IDS", RecordType::KeyIds),
        ("PAYLOAD", RecordType::Payload),
    ] {
        if count(record_type) > 1 {
            let _ = writeln!(
                text,
                "  note: {} {} records; receivers use the first",
                count(record_type),
                name
            );
        }
    }
}
